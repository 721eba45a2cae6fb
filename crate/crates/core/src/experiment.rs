//! Scriptable experiments behind the command-line front end.
//!
//! Every experiment is a pure function from [`Settings`] to CSV text, so
//! reruns with the same settings produce identical bytes. Settings are built
//! from defaults, then a named preset, then `key = value` lines from a file,
//! then command-line flags, each layer overriding the previous one.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::laplace_analysis::{find_roots, SearchRect};
use crate::mode_equation::{apply_operator_refined, BoundarySignal, ModeParams};
use crate::oracles::series_solution_beta1;
use crate::special_functions::gauss_legendre_rule;
use crate::stationary_phase::{
    cancellation_ratio, cancellation_residual, critical_points, diag_asymptotics,
    direct_layer_pair, sp_double_layer, sp_single_layer, ConvexSurface, QuadratureOptions,
};
use crate::time_solver::{solve_mode, solve_mode0_correction_form, HistoryBuffer, SolverConfig};

/// Boundary data choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalChoice {
    /// `8 sin(50t) e^{-40(t-1)²}`.
    Oscillatory,
    /// `8 e^{-40(t-1)²}`.
    NonOscillatory,
    Zero,
}

impl SignalChoice {
    pub fn signal(self) -> BoundarySignal {
        match self {
            Self::Oscillatory => BoundarySignal::oscillatory(),
            Self::NonOscillatory => BoundarySignal::non_oscillatory(),
            Self::Zero => BoundarySignal::zero(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Oscillatory => "osc",
            Self::NonOscillatory => "nonosc",
            Self::Zero => "zero",
        }
    }
}

/// A named reproduction of one published mode-0 run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub signal: SignalChoice,
    pub dt: f64,
}

const DT_SMOOTH: f64 = 97.0 / 6400.0;
const DT_OSC: f64 = 97.0 / 12800.0;

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "fig-a0b0-osc",
        alpha: 0.0,
        beta: 0.0,
        signal: SignalChoice::Oscillatory,
        dt: DT_OSC,
    },
    Preset {
        name: "fig-a0b0-nonosc",
        alpha: 0.0,
        beta: 0.0,
        signal: SignalChoice::NonOscillatory,
        dt: DT_SMOOTH,
    },
    Preset {
        name: "fig-a1b0-osc",
        alpha: 1.0,
        beta: 0.0,
        signal: SignalChoice::Oscillatory,
        dt: DT_OSC,
    },
    Preset {
        name: "fig-a1b0-nonosc",
        alpha: 1.0,
        beta: 0.0,
        signal: SignalChoice::NonOscillatory,
        dt: DT_SMOOTH,
    },
    Preset {
        name: "fig-a1bh-osc",
        alpha: 1.0,
        beta: 0.5,
        signal: SignalChoice::Oscillatory,
        dt: DT_OSC,
    },
    Preset {
        name: "fig-a1bh-nonosc",
        alpha: 1.0,
        beta: 0.5,
        signal: SignalChoice::NonOscillatory,
        dt: DT_SMOOTH,
    },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .copied()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            Error::Config(format!(
                "unknown preset '{name}' (known: {})",
                names.join(", ")
            ))
        })
}

/// All tunable parameters of every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub order: usize,
    pub t_end: f64,
    pub signal: SignalChoice,
    /// Add the operator residual `A f - g` as a column of `solve`.
    pub residual: bool,
    /// Number of step sizes in a convergence ladder.
    pub levels: usize,
    pub re_range: (f64, f64),
    pub im_max: f64,
    pub tol: f64,
    pub surface: ConvexSurface,
    /// Surface point as `(θ, φ)`.
    pub point: (f64, f64),
    pub a: f64,
    pub b: f64,
    pub k_values: Vec<f64>,
    pub points_per_wavelength: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            n: 0,
            alpha: 1.0,
            beta: 0.5,
            dt: DT_SMOOTH,
            order: 6,
            t_end: 10.0,
            signal: SignalChoice::NonOscillatory,
            residual: false,
            levels: 4,
            re_range: (-3.0, 0.5),
            im_max: 20.0,
            tol: 1e-12,
            surface: ConvexSurface::Spheroid {
                equatorial: 1.0,
                polar: 1.5,
            },
            point: (0.0, 0.0),
            a: 1.0,
            b: 1.0,
            k_values: vec![25.0, 50.0, 100.0, 200.0],
            points_per_wavelength: 10.0,
        }
    }
}

/// Parses `"97/6400"` or a plain decimal.
pub fn parse_real(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse '{s}' as a number"));
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

fn parse_pair(key: &str, s: &str) -> Result<(f64, f64)> {
    match parse_list(s)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!(
            "{key} expects two comma-separated numbers, got '{s}'"
        ))),
    }
}

/// `key = value` pairs from a settings file; `#` starts a comment.
pub fn parse_settings_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key = value, got '{line}'",
                lineno + 1
            ))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn apply_preset(&mut self, p: &Preset) {
        self.n = 0;
        self.alpha = p.alpha;
        self.beta = p.beta;
        self.signal = p.signal;
        self.dt = p.dt;
        self.order = 6;
        self.t_end = 10.0;
    }

    /// Sets one key; keys use underscores or dashes interchangeably.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let int = |v: &str| {
            v.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!("{key} expects a non-negative integer, got '{v}'"))
            })
        };
        match key.as_str() {
            "n" => self.n = int(value)?,
            "alpha" => self.alpha = parse_real(value)?,
            "beta" => self.beta = parse_real(value)?,
            "dt" => self.dt = parse_real(value)?,
            "order" => self.order = int(value)?,
            "t_end" => self.t_end = parse_real(value)?,
            "signal" => {
                self.signal = match value.trim() {
                    "osc" | "oscillatory" => SignalChoice::Oscillatory,
                    "nonosc" | "non-oscillatory" => SignalChoice::NonOscillatory,
                    "zero" | "none" => SignalChoice::Zero,
                    other => return Err(Error::Config(format!("unknown signal '{other}'"))),
                }
            }
            "residual" => {
                self.residual = match value.trim() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "residual expects a boolean, got '{other}'"
                        )))
                    }
                }
            }
            "levels" => self.levels = int(value)?,
            "re_range" => self.re_range = parse_pair(&key, value)?,
            "im_max" => self.im_max = parse_real(value)?,
            "tol" => self.tol = parse_real(value)?,
            "surface" => {
                let (a, c) = self.surface.semi_axes();
                self.surface = match value.trim() {
                    "sphere" => ConvexSurface::sphere(a)?,
                    "spheroid" => ConvexSurface::spheroid(a, c)?,
                    other => return Err(Error::Config(format!("unknown surface '{other}'"))),
                }
            }
            "axes" => {
                let (a, c) = parse_pair(&key, value)?;
                self.surface = match self.surface {
                    ConvexSurface::Sphere { .. } if a == c => ConvexSurface::sphere(a)?,
                    _ => ConvexSurface::spheroid(a, c)?,
                }
            }
            "point" => self.point = parse_pair(&key, value)?,
            "a" => self.a = parse_real(value)?,
            "b" => self.b = parse_real(value)?,
            "k" => self.k_values = parse_list(value)?,
            "ppw" | "points_per_wavelength" => self.points_per_wavelength = parse_real(value)?,
            other => return Err(Error::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Layers defaults, preset, file pairs and flag pairs. A `preset` key in
    /// either source is applied first, the flag taking precedence.
    pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<Self> {
        let is_preset = |(k, _): &&(String, String)| k == "preset";
        let chosen = flags
            .iter()
            .find(is_preset)
            .or_else(|| file.iter().find(is_preset));
        let mut s = Self::default();
        if let Some((_, name)) = chosen {
            s.apply_preset(&preset(name)?);
        }
        for (k, v) in file.iter().chain(flags).filter(|kv| !is_preset(kv)) {
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn mode_params(&self) -> Result<ModeParams> {
        ModeParams::new(self.n, self.alpha, self.beta)
    }

    pub fn solver_config(&self, dt: f64) -> Result<SolverConfig> {
        SolverConfig::new(dt, self.order, self.t_end)
    }

    fn surface_point(&self) -> [f64; 3] {
        self.surface.point(self.point.0, self.point.1)
    }
}

/// Full-precision float: 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

fn run_solver(s: &Settings, dt: f64) -> Result<HistoryBuffer> {
    let cfg = s.solver_config(dt)?;
    let sig = s.signal.signal();
    let p = s.mode_params()?;
    if p.n == 0 {
        solve_mode0_correction_form(p.alpha, p.beta, &sig, &cfg)
    } else {
        solve_mode(&p, &sig, &cfg)
    }
}

/// `t, mu, g[, residual]` on the solver grid.
pub fn cmd_solve(s: &Settings) -> Result<String> {
    let h = run_solver(s, s.dt)?;
    let sig = s.signal.signal();
    let p = s.mode_params()?;
    let quad = gauss_legendre_rule(p.n + 4)?;
    let rows = h
        .samples()
        .map(|(t, mu)| {
            let mut row = vec![num(t), num(mu), num(sig.eval(t))];
            if s.residual {
                let applied = apply_operator_refined(&p, &h, t, &quad, 4)?;
                row.push(num(applied - sig.eval(t)));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["t", "mu", "g"];
    if s.residual {
        header.push("residual");
    }
    to_csv(&header, rows)
}

/// One rung of a step-size ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error: f64,
    /// `log2(previous error / error)`; `None` on the first rung.
    pub observed_order: Option<f64>,
}

/// Errors on the ladder `dt, dt/2, ...` (`levels` rungs). Mode-0 runs with
/// `β = 1` are compared with the series solution; all others with a run on
/// a grid twice finer than the last rung, at the coarse grid points.
pub fn convergence_study(s: &Settings) -> Result<Vec<ConvergenceRow>> {
    if s.levels < 3 {
        return Err(Error::Config(format!(
            "a convergence study needs at least 3 levels, got {}",
            s.levels
        )));
    }
    let dts: Vec<f64> = (0..s.levels).map(|i| s.dt / 2f64.powi(i as i32)).collect();
    let use_series = s.n == 0 && s.beta == 1.0;
    let runs: Vec<HistoryBuffer> = dts
        .par_iter()
        .map(|&dt| run_solver(s, dt))
        .collect::<Result<Vec<_>>>()?;
    let sig = s.signal.signal();
    let reference = if use_series {
        None
    } else {
        // Fine enough that the reference error does not bias the last observed order.
        let refine = 2f64.powi((6 + s.order - 1) as i32 / s.order as i32);
        Some(run_solver(s, dts[dts.len() - 1] / refine)?)
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (h, &dt) in runs.iter().zip(&dts) {
        let mut err: f64 = 0.0;
        for (i, (t, v)) in h.samples().enumerate() {
            if t > s.t_end * (1.0 + 1e-12) {
                break;
            }
            let exact = match &reference {
                None => series_solution_beta1(s.alpha, &sig, t)?,
                Some(r) => {
                    let stride = (dt / r.dt()).round() as usize;
                    r.values()[i * stride]
                }
            };
            err = err.max((v - exact).abs());
        }
        let observed_order = rows.last().map(|prev| (prev.error / err).log2());
        rows.push(ConvergenceRow {
            dt,
            error: err,
            observed_order,
        });
    }
    Ok(rows)
}

/// `dt, error, observed_order`.
pub fn cmd_convergence(s: &Settings) -> Result<String> {
    let rows = convergence_study(s)?
        .into_iter()
        .map(|r| {
            vec![
                num(r.dt),
                num(r.error),
                r.observed_order.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    to_csv(&["dt", "error", "observed_order"], rows)
}

/// Roots of the symbol in `re_range × [-im_max, im_max]`, one row each,
/// with the predicted decay rate repeated on every row. With no roots a
/// single row carries only the rate (`inf`).
pub fn cmd_roots(s: &Settings) -> Result<String> {
    let p = s.mode_params()?;
    let rect = SearchRect::new(s.re_range.0, s.re_range.1, -s.im_max, s.im_max)?;
    let roots = find_roots(&p, &rect, s.tol)?;
    let rate = roots
        .iter()
        .map(|r| r.location.re)
        .max_by(f64::total_cmp)
        .map_or(f64::INFINITY, |re| 0.0 - re);
    let header = [
        "re",
        "im",
        "residual",
        "newton_iterations",
        "multiplicity",
        "predicted_rate",
    ];
    let rows = if roots.is_empty() {
        vec![vec![
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            num(rate),
        ]]
    } else {
        roots
            .iter()
            .map(|r| {
                vec![
                    num(r.location.re),
                    num(r.location.im),
                    num(r.residual),
                    r.newton_iterations.to_string(),
                    r.multiplicity.to_string(),
                    num(rate),
                ]
            })
            .collect()
    };
    to_csv(&header, rows)
}

/// One wavenumber of the asymptotics sweep, all for `f ≡ 1` and the
/// operator `A = I/2 + D_k - i(ka + ib) S_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsRow {
    pub k: f64,
    pub direct: Complex64,
    pub diag: Complex64,
    pub stationary: Complex64,
    pub cancellation_ratio: f64,
    pub cancellation_residual: f64,
}

pub fn asymptotics_sweep(s: &Settings) -> Result<Vec<AsymptoticsRow>> {
    let x = s.surface_point();
    let surf = s.surface;
    let cps = critical_points(&surf, x)?;
    let opts = QuadratureOptions {
        points_per_wavelength: s.points_per_wavelength,
        ..Default::default()
    };
    let one = Complex64::new(1.0, 0.0);
    s.k_values
        .par_iter()
        .map(|&k| {
            let coupling = Complex64::new(0.0, 1.0) * Complex64::new(k * s.a, s.b);
            let (single, double) = direct_layer_pair(&surf, x, k, |_| one, &opts)?;
            let mut stationary = Complex64::new(0.0, 0.0);
            for cp in &cps {
                stationary +=
                    sp_double_layer(cp, k, one)? - coupling * sp_single_layer(cp, k, one)?;
            }
            Ok(AsymptoticsRow {
                k,
                direct: 0.5 + double - coupling * single,
                diag: diag_asymptotics(&surf, x, k, s.a, s.b, one)?,
                stationary,
                cancellation_ratio: cancellation_ratio(&surf, x, k, s.a)?,
                cancellation_residual: cancellation_residual(&surf, x, k, s.a, &opts)?,
            })
        })
        .collect()
}

/// `k, direct, diag, stationary` (complex values as re/im pairs) and the
/// leading and measured cancellation ratios.
pub fn cmd_asymptotics(s: &Settings) -> Result<String> {
    let header = [
        "k",
        "direct_re",
        "direct_im",
        "diag_re",
        "diag_im",
        "stationary_re",
        "stationary_im",
        "cancellation_ratio",
        "cancellation_residual",
    ];
    let rows = asymptotics_sweep(s)?
        .into_iter()
        .map(|r| {
            vec![
                num(r.k),
                num(r.direct.re),
                num(r.direct.im),
                num(r.diag.re),
                num(r.diag.im),
                num(r.stationary.re),
                num(r.stationary.im),
                num(r.cancellation_ratio),
                num(r.cancellation_residual),
            ]
        })
        .collect();
    to_csv(&header, rows)
}

/// `name, n, alpha, beta, signal, dt, order, t_end` for every preset.
pub fn cmd_presets() -> Result<String> {
    let rows = PRESETS
        .iter()
        .map(|p| {
            let mut s = Settings::default();
            s.apply_preset(p);
            vec![
                p.name.to_string(),
                s.n.to_string(),
                num(s.alpha),
                num(s.beta),
                s.signal.name().to_string(),
                num(s.dt),
                s.order.to_string(),
                num(s.t_end),
            ]
        })
        .collect();
    to_csv(
        &[
            "name", "n", "alpha", "beta", "signal", "dt", "order", "t_end",
        ],
        rows,
    )
}
