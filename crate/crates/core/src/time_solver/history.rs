use crate::error::{Error, Result};
use crate::special_functions::cardinal_integrals;

/// Uniform-grid samples `values[i] = f(i·dt)` of a causal density.
///
/// Off-grid reads use piecewise Lagrange interpolation with a stencil of
/// `stencil` nodes chosen per grid cell; `f` is taken to vanish for `t ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    dt: f64,
    stencil: usize,
    values: Vec<f64>,
}

/// Largest stencil the buffer accepts.
pub const MAX_STENCIL: usize = 8;

impl HistoryBuffer {
    pub fn new(dt: f64, stencil: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if stencil == 0 || stencil > MAX_STENCIL {
            return Err(Error::Config(format!(
                "interpolation stencil must have 1..={MAX_STENCIL} nodes, got {stencil}"
            )));
        }
        Ok(Self {
            dt,
            stencil,
            values: Vec::new(),
        })
    }

    pub fn from_values(dt: f64, stencil: usize, values: Vec<f64>) -> Result<Self> {
        let mut h = Self::new(dt, stencil)?;
        h.values = values;
        Ok(h)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stencil(&self) -> usize {
        self.stencil
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, v: f64) {
        self.values.push(v);
    }

    /// Grid time of index `i`, always computed from the index.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Time of the newest sample, or `None` when empty.
    pub fn last_time(&self) -> Option<f64> {
        self.values.len().checked_sub(1).map(|i| self.time(i))
    }

    /// `(t_i, f_i)` pairs in grid order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.time(i), v))
    }

    /// First index and length of the stencil used on cell `[j, j+1]` when
    /// indices `0..=last` are available.
    ///
    /// The six-node stencil is `j-3..=j+2`, one node heavier on the past
    /// side; four- and two-node stencils are centred on the cell. Stencils
    /// are shifted to stay inside the available samples and shrink during
    /// start-up when fewer than `p` samples exist.
    pub(crate) fn stencil_range(p: usize, j: usize, last: usize) -> (usize, usize) {
        let len = p.min(last + 1);
        let back = match p {
            1 | 2 => 0,
            6 => 3,
            _ => p / 2 - 1,
        };
        let first = j.saturating_sub(back).min(last + 1 - len);
        (first, len)
    }

    fn index_coordinate(&self, t: f64) -> Result<f64> {
        let last = match self.values.len() {
            0 => {
                return Err(Error::InsufficientHistory("history buffer is empty".into()));
            }
            n => n - 1,
        };
        let x = t / self.dt;
        if x > last as f64 * (1.0 + 1e-13) + 1e-9 {
            return Err(Error::Extrapolation {
                t,
                lo: 0.0,
                hi: self.time(last),
            });
        }
        Ok(x.min(last as f64))
    }

    /// `f(t)` from the stored samples.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let x = self.index_coordinate(t)?;
        let last = self.values.len() - 1;
        let k = x.round();
        if (x - k).abs() <= 1e-12 * x.max(1.0) {
            return Ok(self.values[k as usize]);
        }
        let j = (x.floor() as usize).min(last.saturating_sub(1));
        Ok(self.eval_in_cell(j, x))
    }

    fn eval_in_cell(&self, j: usize, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let (first, len) = Self::stencil_range(self.stencil, j, last);
        let mut w = [0.0; MAX_STENCIL];
        let nodes: [f64; MAX_STENCIL] = std::array::from_fn(|k| (first + k) as f64);
        crate::special_functions::cardinal_values_dyn(&nodes[..len], x, &mut w[..len]);
        w[..len]
            .iter()
            .zip(&self.values[first..first + len])
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `∫_a^b f(t) dt` of the piecewise interpolant; the part below 0 is zero.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return self.integrate(b, a).map(|v| -v);
        }
        if b <= 0.0 {
            return Ok(0.0);
        }
        let xb = self.index_coordinate(b)?;
        let xa = (a.max(0.0)) / self.dt;
        let last = self.values.len() - 1;
        if last == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        let mut j = (xa.floor() as usize).min(last - 1);
        loop {
            let lo = xa.max(j as f64);
            let hi = xb.min((j + 1) as f64);
            if hi > lo {
                total += self.cell_integral(j, lo, hi);
            }
            if (j + 1) as f64 >= xb || j + 1 >= last {
                break;
            }
            j += 1;
        }
        Ok(total * self.dt)
    }

    // ∫ over [lo, hi] ⊂ [j, j+1] in index units.
    fn cell_integral(&self, j: usize, lo: f64, hi: f64) -> f64 {
        let last = self.values.len() - 1;
        let (first, len) = Self::stencil_range(self.stencil, j, last);
        let vals = &self.values[first..first + len];
        macro_rules! fixed {
            ($n:literal) => {{
                let nodes: [f64; $n] = std::array::from_fn(|k| (first + k) as f64);
                cardinal_integrals(&nodes, lo, hi)
                    .iter()
                    .zip(vals)
                    .map(|(w, v)| w * v)
                    .sum()
            }};
        }
        match len {
            1 => vals[0] * (hi - lo),
            2 => fixed!(2),
            3 => fixed!(3),
            4 => fixed!(4),
            5 => fixed!(5),
            6 => fixed!(6),
            7 => fixed!(7),
            _ => fixed!(8),
        }
    }

    /// Values at `t = 0, dt', 2dt', ...` re-read through the interpolant.
    pub fn resample(&self, dt: f64, t_end: f64) -> Result<Vec<f64>> {
        let n = (t_end / dt + 1e-9).floor() as usize;
        (0..=n).map(|i| self.interpolate(i as f64 * dt)).collect()
    }
}
