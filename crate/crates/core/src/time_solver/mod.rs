//! Adams-Bashforth-Moulton marching for the mode equations.
//!
//! Two solvers share the same discretisation:
//!
//! - [`solve_mode0_correction_form`] advances the normalised `n = 0`
//!   equation in its incremental ("correction") form
//!
//!   ```text
//!   μ(t+Δt) = μ(t) - λ[μ(t+Δt-2) - μ(t-2)]
//!           + ν ∫_t^{t+Δt} μ - ν ∫_{t-2}^{t+Δt-2} μ + 2/(1+α) [g(t+Δt) - g(t)]
//!   ```
//!
//! - [`solve_mode`] / [`ModeStepper`] handle any degree `n`. Each step
//!   enforces the difference of the mode equation between `t+Δt` and `t`;
//!   for `n = 0` this is algebraically the correction form above.
//!
//! Delayed arguments are never on the grid for the default step sizes and
//! are read through [`HistoryBuffer`] interpolation. The integral over the
//! newest step uses an Adams-Bashforth predictor on `μ(t-kΔt), k < p` and a
//! single Adams-Moulton correction (PECE) whose stencil includes the
//! predicted value.

mod history;

pub use history::{HistoryBuffer, MAX_STENCIL};

use crate::error::{Error, Result};
use crate::mode_equation::{BoundarySignal, DelayCoefficients, ModeParams};
use crate::special_functions::{
    cardinal_integrals_dyn, cardinal_values_dyn, gauss_legendre_rule, QuadratureRule,
};

/// Chord length across the unit sphere: the antipodal delay.
pub const DELAY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    /// Stencil size and formal order: 2, 4 or 6.
    pub order: usize,
    pub t_end: f64,
    pub corrector_iterations: usize,
    /// Gauss nodes per grid cell for the `Q_n` convolution; `None` picks the
    /// smallest exact rule.
    pub panel_nodes: Option<usize>,
}

impl SolverConfig {
    pub fn new(dt: f64, order: usize, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            order,
            t_end,
            corrector_iterations: 1,
            panel_nodes: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.dt >= DELAY {
            return Err(Error::Config(format!(
                "dt = {} must be below the delay 2",
                self.dt
            )));
        }
        if !matches!(self.order, 2 | 4 | 6) {
            return Err(Error::Config(format!(
                "order must be 2, 4 or 6, got {}",
                self.order
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.corrector_iterations == 0 {
            return Err(Error::Config(
                "corrector_iterations must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps; the last grid time is the first one `≥ t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 - 1e-12)).ceil() as usize
    }

    /// Diagnostic variant whose step divides the delay exactly, so delayed
    /// reads fall on grid points.
    pub fn aligned(mut self) -> Self {
        let per_delay = (DELAY / self.dt).round().max(1.0);
        self.dt = DELAY / per_delay;
        self
    }
}

fn signal_increment(g: &BoundarySignal, dt: f64, i: usize) -> (f64, f64) {
    (g.eval(i as f64 * dt), g.eval((i + 1) as f64 * dt))
}

/// Adams weights over `[i, i+1]` (index units, scaled by `dt`).
/// Predictor nodes: `i, i-1, ..., i-q+1`; corrector: `i+1, i, ..., i-q+2`.
fn adams_weights(last: usize, order: usize, corrector: bool, dt: f64) -> Vec<f64> {
    let newest = if corrector { last + 1 } else { last };
    let q = order.min(newest + 1);
    let nodes: Vec<f64> = (0..q).map(|k| (newest - k) as f64).collect();
    let mut w = vec![0.0; q];
    cardinal_integrals_dyn(&nodes, last as f64, last as f64 + 1.0, &mut w);
    w.iter_mut().for_each(|v| *v *= dt);
    w
}

/// Solves the normalised `n = 0` equation in correction form.
pub fn solve_mode0_correction_form(
    alpha: f64,
    beta: f64,
    sig: &BoundarySignal,
    cfg: &SolverConfig,
) -> Result<HistoryBuffer> {
    cfg.validate()?;
    let p = ModeParams::mode0_relaxed(alpha, beta)?;
    let c = p.delay_coefficients();
    let forcing = 2.0 / (1.0 + alpha);
    let dt = cfg.dt;
    let mut h = HistoryBuffer::new(dt, cfg.order)?;
    h.push(forcing * sig.eval(0.0));
    for i in 0..cfg.steps() {
        let next = mode0_correction_step(&c, forcing, &h, sig, cfg)?;
        debug_assert_eq!(h.len(), i + 1);
        h.push(next);
    }
    Ok(h)
}

/// One step of the correction form from the state in `h`.
pub(crate) fn mode0_correction_step(
    c: &DelayCoefficients,
    forcing: f64,
    h: &HistoryBuffer,
    sig: &BoundarySignal,
    cfg: &SolverConfig,
) -> Result<f64> {
    let dt = cfg.dt;
    let i = h.len() - 1;
    let t = h.time(i);
    let t1 = h.time(i + 1);
    let mu = h.values();
    let (g0, g1) = signal_increment(sig, dt, i);

    let delayed_now = h.interpolate(t - DELAY)?;
    let delayed_next = h.interpolate(t1 - DELAY)?;
    let delayed_integral = h.integrate(t - DELAY, t1 - DELAY)?;
    let base = mu[i] - c.lambda * (delayed_next - delayed_now) - c.nu * delayed_integral
        + forcing * (g1 - g0);
    if c.nu == 0.0 {
        return Ok(base);
    }

    let ab = adams_weights(i, cfg.order, false, dt);
    let future: f64 = ab.iter().enumerate().map(|(k, w)| w * mu[i - k]).sum();
    let mut current = base + c.nu * future;
    let am = adams_weights(i, cfg.order, true, dt);
    for _ in 0..cfg.corrector_iterations {
        let future = am[0] * current
            + am[1..]
                .iter()
                .enumerate()
                .map(|(k, w)| w * mu[i - k])
                .sum::<f64>();
        current = base + c.nu * future;
    }
    Ok(current)
}

/// Marches one mode equation of any degree.
///
/// Each step solves `E(t+Δt) - E(t) = 0`, where
/// `E(t) = a₊ f(t) + a₋ f(t-2) - J(t) - g(t)` and
/// `J(t) = ∫_{t-2}^{t} Q_n(t-τ) f(τ) dτ`. `J` is assembled cell by cell from
/// the history interpolant; on the newest cell `[t, t+Δt]` the interpolant
/// is replaced by the Adams predictor and corrector stencils. Away from
/// start-up every such sum is a fixed linear combination of past samples,
/// so the weights are computed once.
#[derive(Debug, Clone)]
pub struct ModeStepper {
    params: ModeParams,
    coeffs: DelayCoefficients,
    cfg: SolverConfig,
    rule: QuadratureRule,
    /// `2/dt`: the delay in index units.
    delay_steps: f64,
    /// Samples needed before the convolution weights stop changing.
    steady_from: usize,
    /// Convolution weights by lag for `J(t_i)` and the history part of `J(t_{i+1})`.
    steady: [Vec<f64>; 2],
    ab: Vec<f64>,
    am: Vec<f64>,
}

impl ModeStepper {
    pub fn new(params: ModeParams, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let min_nodes = params.n + 2;
        let nodes = cfg
            .panel_nodes
            .unwrap_or(params.n + cfg.order / 2)
            .max(min_nodes);
        if let Some(requested) = cfg.panel_nodes {
            if requested < min_nodes {
                return Err(Error::Config(format!(
                    "panel rule of {requested} nodes under-resolves Q_{} (needs >= {min_nodes})",
                    params.n
                )));
            }
        }
        let rule = gauss_legendre_rule(nodes)?;
        let delay_steps = DELAY / cfg.dt;
        let steady_from = delay_steps.ceil() as usize + cfg.order + 2;
        let mut stepper = Self {
            params,
            coeffs: params.delay_coefficients(),
            cfg,
            rule,
            delay_steps,
            steady_from,
            steady: [Vec::new(), Vec::new()],
            ab: Vec::new(),
            am: Vec::new(),
        };
        for delta in 0..2 {
            let mut weights = vec![0.0; steady_from + 1];
            stepper.history_cells(steady_from, delta, |idx, w| weights[steady_from - idx] += w);
            stepper.steady[delta] = weights;
        }
        stepper.ab = stepper.newest_cell_weights(steady_from, false);
        stepper.am = stepper.newest_cell_weights(steady_from, true);
        Ok(stepper)
    }

    pub fn params(&self) -> &ModeParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Accumulates `dt ∫ Q_n((e-τ)dt) ℓ_k(τ) dτ` over `[j+lo, j+hi]` for the
    /// stencil `first..first+len` (index units), reporting `(index, weight)`.
    #[allow(clippy::too_many_arguments)]
    fn cell<F: FnMut(usize, f64)>(
        &self,
        e: f64,
        j: usize,
        lo: f64,
        hi: f64,
        first: usize,
        len: usize,
        sink: &mut F,
    ) {
        let dt = self.cfg.dt;
        let nodes: [f64; MAX_STENCIL] = std::array::from_fn(|k| (first + k) as f64);
        let mut l = [0.0; MAX_STENCIL];
        let mut acc = [0.0; MAX_STENCIL];
        for (tau, w) in self.rule.mapped(j as f64 + lo, j as f64 + hi) {
            let kernel = self.params.q((e - tau) * dt) * w * dt;
            cardinal_values_dyn(&nodes[..len], tau, &mut l[..len]);
            for (a, lk) in acc[..len].iter_mut().zip(&l[..len]) {
                *a += kernel * lk;
            }
        }
        for (k, a) in acc[..len].iter().enumerate() {
            sink(first + k, *a);
        }
    }

    /// History part of `J` at index `last + delta` with samples `0..=last`.
    fn history_cells<F: FnMut(usize, f64)>(&self, last: usize, delta: usize, mut sink: F) {
        let e = (last + delta) as f64;
        let x = e - self.delay_steps;
        let (j_start, lo_start) = if x <= 0.0 {
            (0, 0.0)
        } else {
            (x.floor() as usize, x - x.floor())
        };
        for j in j_start..last {
            let lo = if j == j_start { lo_start } else { 0.0 };
            let (first, len) = HistoryBuffer::stencil_range(self.cfg.order, j, last);
            self.cell(e, j, lo, 1.0, first, len, &mut sink);
        }
    }

    /// Weights on `[last, last+1]`, newest node first.
    fn newest_cell_weights(&self, last: usize, corrector: bool) -> Vec<f64> {
        let newest = if corrector { last + 1 } else { last };
        let q = self.cfg.order.min(newest + 1);
        let mut w = vec![0.0; q];
        self.cell(
            (last + 1) as f64,
            last,
            0.0,
            1.0,
            newest + 1 - q,
            q,
            &mut |idx, v| w[newest - idx] += v,
        );
        w
    }

    fn history_convolution(&self, values: &[f64], last: usize, delta: usize) -> f64 {
        if last >= self.steady_from {
            self.steady[delta]
                .iter()
                .zip(values[..=last].iter().rev())
                .map(|(w, v)| w * v)
                .sum()
        } else {
            let mut total = 0.0;
            self.history_cells(last, delta, |idx, w| total += w * values[idx]);
            total
        }
    }

    /// Advances `h` by one step and returns the new value.
    pub fn step(&self, h: &mut HistoryBuffer, g: &BoundarySignal) -> Result<f64> {
        if h.is_empty() {
            return Err(Error::InsufficientHistory("history must hold f(0)".into()));
        }
        if (h.dt() - self.cfg.dt).abs() > 1e-15 * self.cfg.dt {
            return Err(Error::Config("history and solver time steps differ".into()));
        }
        let next = self.next_value(h, g)?;
        h.push(next);
        Ok(next)
    }

    pub(crate) fn next_value(&self, h: &HistoryBuffer, g: &BoundarySignal) -> Result<f64> {
        let dt = self.cfg.dt;
        let last = h.len() - 1;
        let f = h.values();
        let c = &self.coeffs;
        let (g0, g1) = signal_increment(g, dt, last);

        let delayed = if c.a_minus != 0.0 {
            h.interpolate(h.time(last + 1) - DELAY)? - h.interpolate(h.time(last) - DELAY)?
        } else {
            0.0
        };
        let j_now = self.history_convolution(f, last, 0);
        let j_next = self.history_convolution(f, last, 1);
        let rhs = g1 - g0 - c.a_minus * delayed + j_next - j_now;

        let (ab, am);
        let (ab, am) = if last >= self.steady_from {
            (&self.ab, &self.am)
        } else {
            ab = self.newest_cell_weights(last, false);
            am = self.newest_cell_weights(last, true);
            (&ab, &am)
        };
        let future: f64 = ab.iter().enumerate().map(|(k, w)| w * f[last - k]).sum();
        let mut current = f[last] + (rhs + future) / c.a_plus;
        if am.iter().any(|&w| w != 0.0) {
            for _ in 0..self.cfg.corrector_iterations {
                let future = am[0] * current
                    + am[1..]
                        .iter()
                        .enumerate()
                        .map(|(k, w)| w * f[last - k])
                        .sum::<f64>();
                current = f[last] + (rhs + future) / c.a_plus;
            }
        }
        Ok(current)
    }
}

/// One step of the general solver; builds the stepper on every call.
/// Prefer [`ModeStepper`] in loops.
pub fn step(
    p: &ModeParams,
    h: &mut HistoryBuffer,
    g: &BoundarySignal,
    cfg: &SolverConfig,
) -> Result<f64> {
    ModeStepper::new(*p, *cfg)?.step(h, g)
}

/// Runs the general solver from `f(0) = g(0)/a₊` to `cfg.t_end`.
pub fn solve_mode(
    p: &ModeParams,
    sig: &BoundarySignal,
    cfg: &SolverConfig,
) -> Result<HistoryBuffer> {
    let stepper = ModeStepper::new(*p, *cfg)?;
    let mut h = HistoryBuffer::new(cfg.dt, cfg.order)?;
    h.push(sig.eval(0.0) / stepper.coeffs.a_plus);
    for _ in 0..cfg.steps() {
        stepper.step(&mut h, sig)?;
    }
    Ok(h)
}
