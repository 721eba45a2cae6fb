//! One spherical-harmonic mode of the combined-field equation on the unit
//! sphere.
//!
//! With constant coefficients the degree-`n` component `f` of the density
//! satisfies
//!
//! ```text
//! a₊ f(t) + a₋ f(t-2) - ∫_0^2 Q_n(s) f(t-s) ds = g(t)
//! a₊ = (1+α)/2,   a₋ = (-1)^n (1-α)/2
//! Q_n(s) = ¼ [(2-2β) P_n(1-s²/2) - s(s-2α) P_n'(1-s²/2)]
//! ```
//!
//! The `f(t-2)` term is the echo from the antipodal point (`s = 2` is the
//! chord length across the sphere).

use crate::error::{Error, Result};
use crate::special_functions::{legendre_pair, QuadratureRule};
use crate::time_solver::HistoryBuffer;

/// Degree `n` and coefficients `α`, `β` of one mode equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ModeParams {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Domain(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Domain(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self { n, alpha, beta })
    }

    /// Mode-0 parameters with only `α > -1` required; used by the
    /// correction-form solver, which admits negative `α`.
    pub(crate) fn mode0_relaxed(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > -1.0) {
            return Err(Error::Domain(format!("alpha must be > -1, got {alpha}")));
        }
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        Ok(Self { n: 0, alpha, beta })
    }

    pub fn delay_coefficients(&self) -> DelayCoefficients {
        delay_coefficients(self)
    }

    /// `Q_n(s)` without the domain check.
    pub(crate) fn q(&self, s: f64) -> f64 {
        let (p, dp) = legendre_pair(self.n, 1.0 - 0.5 * s * s);
        0.25 * ((2.0 - 2.0 * self.beta) * p - s * (s - 2.0 * self.alpha) * dp)
    }
}

/// Coefficients of the instantaneous and delayed terms, plus the
/// normalised mode-0 factors `λ = (1-α)/(1+α)` and `ν = (1-β)/(1+α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayCoefficients {
    pub a_plus: f64,
    pub a_minus: f64,
    pub lambda: f64,
    pub nu: f64,
}

pub fn delay_coefficients(p: &ModeParams) -> DelayCoefficients {
    let sign = if p.n.is_multiple_of(2) { 1.0 } else { -1.0 };
    DelayCoefficients {
        a_plus: 0.5 * (1.0 + p.alpha),
        a_minus: sign * 0.5 * (1.0 - p.alpha),
        lambda: (1.0 - p.alpha) / (1.0 + p.alpha),
        nu: (1.0 - p.beta) / (1.0 + p.alpha),
    }
}

/// Smooth kernel `Q_n(s)` for `s ∈ [0, 2]`.
pub fn kernel_q(p: &ModeParams, s: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&s) {
        return Err(Error::Domain(format!(
            "kernel argument s = {s} outside [0, 2]"
        )));
    }
    Ok(p.q(s))
}

/// Piecewise-linear table of samples on a uniform grid, zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampleTable {
    fn eval(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let x = (t - self.t0) / self.dt;
        let last = (self.values.len() - 1) as f64;
        if x < -1.0 || x > last + 1.0 {
            return 0.0;
        }
        let j = x.floor();
        let frac = x - j;
        let at = |k: f64| {
            if k < 0.0 || k > last {
                0.0
            } else {
                self.values[k as usize]
            }
        };
        (1.0 - frac) * at(j) + frac * at(j + 1.0)
    }
}

/// Dirichlet data `g(t)` for one mode. Every variant vanishes for `t ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySignal {
    /// `A·exp(-w (t-c)²)`, `w` being `width`.
    GaussianPulse {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// `A·sin(ω t)·exp(-w (t-c)²)`.
    ModulatedPulse {
        amplitude: f64,
        frequency: f64,
        width: f64,
        center: f64,
    },
    Samples(SampleTable),
}

impl BoundarySignal {
    pub fn gaussian_pulse(amplitude: f64, width: f64, center: f64) -> Result<Self> {
        check_width(width)?;
        Ok(Self::GaussianPulse {
            amplitude,
            width,
            center,
        })
    }

    pub fn modulated_pulse(
        amplitude: f64,
        frequency: f64,
        width: f64,
        center: f64,
    ) -> Result<Self> {
        check_width(width)?;
        Ok(Self::ModulatedPulse {
            amplitude,
            frequency,
            width,
            center,
        })
    }

    /// `8 exp(-40 (t-1)²)`.
    pub fn non_oscillatory() -> Self {
        Self::GaussianPulse {
            amplitude: 8.0,
            width: 40.0,
            center: 1.0,
        }
    }

    /// `8 sin(50 t) exp(-40 (t-1)²)`.
    pub fn oscillatory() -> Self {
        Self::ModulatedPulse {
            amplitude: 8.0,
            frequency: 50.0,
            width: 40.0,
            center: 1.0,
        }
    }

    pub fn samples(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!(
                "sample spacing must be positive, got {dt}"
            )));
        }
        Ok(Self::Samples(SampleTable { t0, dt, values }))
    }

    /// The empty signal.
    pub fn zero() -> Self {
        Self::Samples(SampleTable {
            t0: 0.0,
            dt: 1.0,
            values: Vec::new(),
        })
    }

    /// A single unit sample at `t0` (a hat of half-width `dt`). Only meant
    /// for hand-checkable oracle tests; it is not smooth.
    pub fn unit_sample(t0: f64, dt: f64) -> Result<Self> {
        Self::samples(t0, dt, vec![1.0])
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::GaussianPulse {
                amplitude,
                width,
                center,
            } => amplitude * (-width * (t - center).powi(2)).exp(),
            Self::ModulatedPulse {
                amplitude,
                frequency,
                width,
                center,
            } => amplitude * (frequency * t).sin() * (-width * (t - center).powi(2)).exp(),
            Self::Samples(table) => table.eval(t),
        }
    }

    /// `sup |g|`, estimated on a fine grid for the pulse kinds.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::GaussianPulse { amplitude, .. } => amplitude.abs(),
            Self::Samples(table) => table.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Self::ModulatedPulse { center, width, .. } => {
                let half = 8.0 / width.sqrt();
                let n = 20_000;
                (0..=n)
                    .map(|i| {
                        self.eval(center - half + 2.0 * half * i as f64 / n as f64)
                            .abs()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "pulse width must be positive, got {width}"
        )))
    }
}

pub fn eval_signal(sig: &BoundarySignal, t: f64) -> f64 {
    sig.eval(t)
}

/// `(G_n f)(t)` evaluated directly from a stored history.
///
/// The convolution is split at the history's grid points and each cell is
/// integrated with `quad`, so the result is exact whenever `quad` integrates
/// `Q_n` times the cell interpolant exactly.
pub fn apply_operator(
    p: &ModeParams,
    f: &HistoryBuffer,
    t: f64,
    quad: &QuadratureRule,
) -> Result<f64> {
    apply_operator_refined(p, f, t, quad, 1)
}

/// As [`apply_operator`], with every grid cell split into `subdivisions`
/// panels.
pub fn apply_operator_refined(
    p: &ModeParams,
    f: &HistoryBuffer,
    t: f64,
    quad: &QuadratureRule,
    subdivisions: usize,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InsufficientHistory(format!(
            "t = {t} precedes the grid start"
        )));
    }
    match f.last_time() {
        Some(last) if t <= last * (1.0 + 1e-13) + 1e-12 => {}
        Some(last) => {
            return Err(Error::Extrapolation {
                t,
                lo: 0.0,
                hi: last,
            })
        }
        None => return Err(Error::InsufficientHistory("empty history".into())),
    }
    if quad.len() < p.n + 2 {
        return Err(Error::Config(format!(
            "panel rule of {} nodes cannot resolve Q_{} (needs >= {})",
            quad.len(),
            p.n,
            p.n + 2
        )));
    }
    let subdivisions = subdivisions.max(1);
    let c = p.delay_coefficients();
    let dt = f.dt();
    let lower = (t - 2.0).max(0.0);

    // Cells in index units; Gauss nodes stay strictly inside each cell so the
    // interpolant is a single polynomial there.
    let (x_lo, x_hi) = (lower / dt, t / dt);
    let mut integral = 0.0;
    let mut j = x_lo.floor();
    while j < x_hi {
        let a = x_lo.max(j);
        let b = x_hi.min(j + 1.0);
        if b > a {
            let h = (b - a) / subdivisions as f64;
            for k in 0..subdivisions {
                let lo = (a + k as f64 * h) * dt;
                let hi = (a + (k + 1) as f64 * h) * dt;
                for (tau, w) in quad.mapped(lo, hi) {
                    integral += w * p.q(t - tau) * f.interpolate(tau)?;
                }
            }
        }
        j += 1.0;
    }
    Ok(c.a_plus * f.interpolate(t)? + c.a_minus * f.interpolate(t - 2.0)? - integral)
}
