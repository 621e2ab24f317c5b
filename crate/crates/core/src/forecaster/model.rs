//! LSTM layer, optional dense stack and linear head over one flat parameter
//! vector, with a forward trace and backpropagation through time.
//!
//! Parameter layout, in order:
//! - `W`: `4H x D`, row-major, gate blocks f, i, o, c
//! - `U`: `4H x H`, same gate order
//! - `b`: `4H`
//! - per dense layer: weights `out x in` row-major, then `out` biases
//! - head: `last` weights, then one bias

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Tanh];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the activation value.
    fn slope(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// Widths of dense layers between the LSTM state and the head.
    pub dense_layers: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub forget_bias: f64,
}

impl Architecture {
    /// Single LSTM layer straight into the linear head.
    pub fn plain(input_dim: usize, hidden_units: usize) -> Self {
        Self {
            input_dim,
            hidden_units,
            dense_layers: Vec::new(),
            activation: Activation::Tanh,
            dropout_rate: 0.0,
            forget_bias: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim", "must be >= 1"));
        }
        if self.hidden_units == 0 {
            return Err(Error::config("hidden_units", "must be >= 1"));
        }
        if self.dense_layers.contains(&0) {
            return Err(Error::config("dense_layers", "every width must be >= 1"));
        }
        if !(0.0..=0.5).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate", "must lie in [0, 0.5]"));
        }
        if !self.forget_bias.is_finite() {
            return Err(Error::config("forget_bias", "must be finite"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Clone, Debug)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    d: usize,
    h: usize,
    u: usize,
    b: usize,
    dense: Vec<Dense>,
    head_w: usize,
    head_b: usize,
    head_in: usize,
    total: usize,
}

impl Layout {
    fn new(arch: &Architecture) -> Self {
        let (d, h) = (arch.input_dim, arch.hidden_units);
        let u = 4 * h * d;
        let b = u + 4 * h * h;
        let mut next = b + 4 * h;
        let mut fan_in = h;
        let mut dense = Vec::with_capacity(arch.dense_layers.len());
        for &fan_out in &arch.dense_layers {
            dense.push(Dense {
                w: next,
                b: next + fan_out * fan_in,
                fan_in,
                fan_out,
            });
            next += fan_out * fan_in + fan_out;
            fan_in = fan_out;
        }
        Self {
            d,
            h,
            u,
            b,
            dense,
            head_w: next,
            head_b: next + fan_in,
            head_in: fan_in,
            total: next + fan_in + 1,
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Post-activation gates per step, `[f, i, o, g]` blocks of `H`.
    gates: Vec<Vec<f64>>,
    /// Cell states; index 0 is the zero initial state.
    cells: Vec<Vec<f64>>,
    /// Hidden states; index 0 is the zero initial state.
    hidden: Vec<Vec<f64>>,
    mask: Option<Vec<f64>>,
    /// Inputs to each dense layer and to the head; entry 0 is the masked final state.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pub output: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    arch: Architecture,
    layout_total: usize,
    pub params: Vec<f64>,
}

impl LstmModel {
    /// Uniform init in `[-k, k]`, `k = 1/sqrt(fan)`, with zero gate biases
    /// except the forget gate.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        let mut rng = seeded(seed);
        let mut params = vec![0.0; layout.total];
        let k = 1.0 / (layout.h as f64).sqrt();
        for p in &mut params[..layout.b] {
            *p = rng.gen_range(-k..=k);
        }
        for p in &mut params[layout.b..layout.b + layout.h] {
            *p = arch.forget_bias;
        }
        for dense in &layout.dense {
            let k = 1.0 / (dense.fan_in as f64).sqrt();
            for p in &mut params[dense.w..dense.b] {
                *p = rng.gen_range(-k..=k);
            }
        }
        let k = 1.0 / (layout.head_in as f64).sqrt();
        for p in &mut params[layout.head_w..layout.head_b] {
            *p = rng.gen_range(-k..=k);
        }
        Ok(Self {
            arch,
            layout_total: layout.total,
            params,
        })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let total = arch.param_count();
        if params.len() != total {
            return Err(Error::Shape(format!(
                "architecture needs {total} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            arch,
            layout_total: total,
            params,
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.param_count();
        Self::from_params(arch, vec![0.0; n])
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.layout_total
    }

    /// Inference output; dropout is never applied here.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<f64> {
        Ok(self.trace(window, None)?.output)
    }

    /// Forward pass keeping activations. `mask` scales the final hidden state
    /// (inverted dropout) and must have `H` entries.
    pub fn trace(&self, window: &[Vec<f64>], mask: Option<&[f64]>) -> Result<Trace> {
        let l = Layout::new(&self.arch);
        let (d, h) = (l.d, l.h);
        if window.is_empty() {
            return Err(Error::Shape("empty input window".into()));
        }
        if let Some(row) = window.iter().find(|r| r.len() != d) {
            return Err(Error::Shape(format!(
                "input row has {} features, model expects {d}",
                row.len()
            )));
        }
        if let Some(m) = mask {
            if m.len() != h {
                return Err(Error::Shape(format!(
                    "dropout mask has {} entries, expected {h}",
                    m.len()
                )));
            }
        }
        let p = &self.params;
        let (w, u, b) = (&p[..l.u], &p[l.u..l.b], &p[l.b..l.b + 4 * h]);

        let steps = window.len();
        let mut gates = Vec::with_capacity(steps);
        let mut cells = Vec::with_capacity(steps + 1);
        let mut hidden = Vec::with_capacity(steps + 1);
        cells.push(vec![0.0; h]);
        hidden.push(vec![0.0; h]);
        for x in window {
            let h_prev = hidden.last().unwrap();
            let c_prev = cells.last().unwrap();
            let mut z = b.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let wr = &w[r * d..(r + 1) * d];
                let ur = &u[r * h..(r + 1) * h];
                *zr += dot(wr, x) + dot(ur, h_prev);
            }
            let mut c = vec![0.0; h];
            let mut hn = vec![0.0; h];
            for k in 0..h {
                let f = sigmoid(z[k]);
                let i = sigmoid(z[h + k]);
                let o = sigmoid(z[2 * h + k]);
                let g = z[3 * h + k].tanh();
                z[k] = f;
                z[h + k] = i;
                z[2 * h + k] = o;
                z[3 * h + k] = g;
                c[k] = f * c_prev[k] + i * g;
                hn[k] = o * c[k].tanh();
            }
            gates.push(z);
            cells.push(c);
            hidden.push(hn);
        }

        let mut a0 = hidden.last().unwrap().clone();
        if let Some(m) = mask {
            for (a, s) in a0.iter_mut().zip(m) {
                *a *= s;
            }
        }
        let mut acts = vec![a0];
        let mut pre = Vec::with_capacity(l.dense.len());
        for layer in &l.dense {
            let input = acts.last().unwrap();
            let mut z = p[layer.b..layer.b + layer.fan_out].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&p[layer.w + r * layer.fan_in..layer.w + (r + 1) * layer.fan_in], input);
            }
            let out = z.iter().map(|&v| self.arch.activation.apply(v)).collect();
            pre.push(z);
            acts.push(out);
        }
        let output = p[l.head_b] + dot(&p[l.head_w..l.head_b], acts.last().unwrap());
        Ok(Trace {
            gates,
            cells,
            hidden,
            mask: mask.map(<[f64]>::to_vec),
            acts,
            pre,
            output,
        })
    }

    /// Gradient of a loss with `dL/dy = dy` with respect to every parameter,
    /// accumulated into `grad`.
    pub fn backward(&self, window: &[Vec<f64>], trace: &Trace, dy: f64, grad: &mut [f64]) {
        let l = Layout::new(&self.arch);
        let (d, h) = (l.d, l.h);
        let p = &self.params;

        let last = trace.acts.last().unwrap();
        for (g, a) in grad[l.head_w..l.head_b].iter_mut().zip(last) {
            *g += dy * a;
        }
        grad[l.head_b] += dy;
        let mut da: Vec<f64> = p[l.head_w..l.head_b].iter().map(|w| w * dy).collect();

        for (idx, layer) in l.dense.iter().enumerate().rev() {
            let out = &trace.acts[idx + 1];
            let input = &trace.acts[idx];
            let dz: Vec<f64> = (0..layer.fan_out)
                .map(|r| da[r] * self.arch.activation.slope(trace.pre[idx][r], out[r]))
                .collect();
            let mut d_in = vec![0.0; layer.fan_in];
            for (r, &dzr) in dz.iter().enumerate() {
                let row = layer.w + r * layer.fan_in;
                for k in 0..layer.fan_in {
                    grad[row + k] += dzr * input[k];
                    d_in[k] += p[row + k] * dzr;
                }
                grad[layer.b + r] += dzr;
            }
            da = d_in;
        }

        let mut dh = da;
        if let Some(m) = &trace.mask {
            for (v, s) in dh.iter_mut().zip(m) {
                *v *= s;
            }
        }
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..window.len()).rev() {
            let gate = &trace.gates[t];
            let c = &trace.cells[t + 1];
            let c_prev = &trace.cells[t];
            for k in 0..h {
                let (f, i, o, g) = (gate[k], gate[h + k], gate[2 * h + k], gate[3 * h + k]);
                let tc = c[k].tanh();
                let d_o = dh[k] * tc;
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                dz[k] = dc[k] * c_prev[k] * f * (1.0 - f);
                dz[h + k] = dc[k] * g * i * (1.0 - i);
                dz[2 * h + k] = d_o * o * (1.0 - o);
                dz[3 * h + k] = dc[k] * i * (1.0 - g * g);
                dc[k] *= f;
            }
            let x = &window[t];
            let h_prev = &trace.hidden[t];
            let mut dh_prev = vec![0.0; h];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                let wrow = r * d;
                for k in 0..d {
                    grad[wrow + k] += dzr * x[k];
                }
                let urow = l.u + r * h;
                for k in 0..h {
                    grad[urow + k] += dzr * h_prev[k];
                    dh_prev[k] += p[urow + k] * dzr;
                }
                grad[l.b + r] += dzr;
            }
            dh = dh_prev;
        }
    }

    /// Parameter index range of one LSTM input-weight gate block
    /// (0 = forget, 1 = input, 2 = output, 3 = candidate).
    pub fn input_gate_block(&self, gate: usize) -> std::ops::Range<usize> {
        let block = self.arch.hidden_units * self.arch.input_dim;
        gate * block..(gate + 1) * block
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
