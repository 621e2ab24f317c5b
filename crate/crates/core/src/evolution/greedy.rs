//! Cheapest-pair greedy allocation, the non-evolutionary baseline.

use super::genome::Allocation;

/// Repeatedly assigns the cheapest (drone, area) pair among available,
/// unassigned drones and areas still short of their `need`, until every
/// need is met or no drone is left. Ties go to the lower drone, then area,
/// index. Non-finite costs mark impossible pairs.
pub fn allocate_greedy(costs: &[Vec<f64>], need: &[usize], available: &[bool]) -> Allocation {
    let n_areas = need.len();
    let mut alloc = Allocation::empty(n_areas);
    let mut used: Vec<bool> = available.iter().map(|a| !a).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in costs.iter().enumerate() {
            if used.get(i).copied().unwrap_or(true) {
                continue;
            }
            for (j, &c) in row.iter().enumerate().take(n_areas) {
                if alloc.areas[j].len() >= need[j] || !c.is_finite() {
                    continue;
                }
                if best.is_none_or(|(bc, _, _)| c < bc) {
                    best = Some((c, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        used[i] = true;
        alloc.areas[j].push(i);
    }
    for uavs in &mut alloc.areas {
        uavs.sort_unstable();
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let a = allocate_greedy(&[vec![3.0]], &[1], &[true]);
        assert_eq!(a.areas, vec![vec![0]]);
    }

    #[test]
    fn no_drones_or_no_need() {
        assert_eq!(allocate_greedy(&[], &[2, 1], &[]).assigned(), 0);
        assert_eq!(allocate_greedy(&[vec![1.0, 1.0]], &[1, 1], &[false]).assigned(), 0);
        assert_eq!(allocate_greedy(&[vec![1.0, 1.0]], &[0, 0], &[true]).assigned(), 0);
    }

    #[test]
    fn two_by_two_matches_enumeration() {
        // drone 0 is cheap everywhere; drone 1 is much cheaper in area 1
        let costs = vec![vec![1.0, 2.0], vec![5.0, 2.5]];
        let a = allocate_greedy(&costs, &[1, 1], &[true, true]);
        // enumeration: {0->A0, 1->A1} = 3.5 beats {0->A1, 1->A0} = 7.0
        let total = |al: &Allocation| -> f64 {
            al.areas
                .iter()
                .enumerate()
                .flat_map(|(j, v)| v.iter().map(move |&i| (i, j)))
                .map(|(i, j)| costs[i][j])
                .sum()
        };
        let best = [
            Allocation {
                areas: vec![vec![0], vec![1]],
            },
            Allocation {
                areas: vec![vec![1], vec![0]],
            },
        ]
        .into_iter()
        .min_by(|x, y| total(x).total_cmp(&total(y)))
        .unwrap();
        assert_eq!(a, best);
        assert_eq!(total(&a), 3.5);
    }

    #[test]
    fn respects_need_counts_and_availability() {
        let costs = vec![vec![1.0, 9.0], vec![2.0, 9.0], vec![3.0, 9.0], vec![0.5, 0.5]];
        let a = allocate_greedy(&costs, &[2, 1], &[true, true, true, false]);
        assert_eq!(a.areas, vec![vec![0, 1], vec![2]]);
        a.validate(4, 2).unwrap();
    }
}
