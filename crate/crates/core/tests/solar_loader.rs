use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use uavgrid_core::scenario::{load_solar_trace, synth_solar, write_solar_csv, HOURS_PER_YEAR};
use uavgrid_core::Error;

fn full_year(stations: usize) -> Vec<Vec<f64>> {
    (0..stations).map(|s| synth_solar(100 + s as u64, 365, 2.5e5)).collect()
}

/// Builds the CSV by hand so the fixture does not depend on the writer.
fn render(traces: &[Vec<f64>], skip: Option<(usize, u32, u32)>) -> String {
    let mut out = String::from("station,day,hour,energy_j\n");
    for (s, trace) in traces.iter().enumerate() {
        for (i, e) in trace.iter().enumerate() {
            let (day, hour) = (i as u32 / 24 + 1, i as u32 % 24);
            if skip == Some((s, day, hour)) {
                continue;
            }
            writeln!(out, "{s},{day},{hour},{e}").unwrap();
        }
    }
    out
}

/// Column sum from a plain text pass, no csv crate involved.
fn text_column_sums(path: &Path, stations: usize) -> Vec<f64> {
    let mut sums = vec![0.0; stations];
    for line in fs::read_to_string(path).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let s: usize = cols[0].parse().unwrap();
        sums[s] += cols[3].parse::<f64>().unwrap();
    }
    sums
}

#[test]
fn full_year_five_stations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    let traces = full_year(5);
    fs::write(&path, render(&traces, None)).unwrap();

    let loaded = load_solar_trace(&path, 5).unwrap();
    assert_eq!(loaded.len(), 5);
    assert!(loaded.iter().all(|t| t.len() == HOURS_PER_YEAR));
    assert_eq!(loaded, traces);

    let sums = text_column_sums(&path, 5);
    for (trace, want) in loaded.iter().zip(&sums) {
        let got: f64 = trace.iter().sum();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn writer_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    let traces = full_year(2);
    write_solar_csv(&path, &traces).unwrap();
    assert_eq!(load_solar_trace(&path, 2).unwrap(), traces);
}

#[test]
fn hour_24_is_a_parse_error_at_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    let mut text = render(&full_year(1), None);
    // line 1 is the header, so the fourth data row sits on line 5
    let lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut edited = lines.clone();
    edited[4] = "0,1,24,0".into();
    text = edited.join("\n");
    fs::write(&path, text).unwrap();

    match load_solar_trace(&path, 1) {
        Err(Error::Parse { line, reason, .. }) => {
            assert_eq!(line, 5);
            assert!(reason.contains("hour 24"), "{reason}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn malformed_row_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    fs::write(&path, "station,day,hour,energy_j\n0,1,0,1.0\n0,1,x,2.0\n").unwrap();
    match load_solar_trace(&path, 1) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn gap_is_reported_not_interpolated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    fs::write(&path, render(&full_year(5), Some((3, 200, 5)))).unwrap();
    match load_solar_trace(&path, 5) {
        Err(Error::Shape(msg)) => {
            assert!(msg.contains("station 3"), "{msg}");
            assert!(msg.contains("day 200 hour 5"), "{msg}");
            assert!(!msg.contains("station 0"), "{msg}");
        }
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn duplicate_record_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    let mut text = render(&full_year(1), None);
    text.push_str("0,17,9,5.0\n");
    fs::write(&path, text).unwrap();
    match load_solar_trace(&path, 1) {
        Err(Error::Duplicate {
            station,
            day,
            hour,
            line,
            ..
        }) => {
            assert_eq!((station, day, hour), (0, 17, 9));
            assert_eq!(line, HOURS_PER_YEAR as u64 + 2);
        }
        other => panic!("expected duplicate error, got {other:?}"),
    }
}

#[test]
fn station_count_mismatch_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solar.csv");
    fs::write(&path, render(&full_year(3), None)).unwrap();
    assert!(matches!(load_solar_trace(&path, 2), Err(Error::Shape(_))));
    assert!(matches!(load_solar_trace(&path, 4), Err(Error::Shape(_))));
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_solar_trace(&dir.path().join("nope.csv"), 1).is_err());
}
