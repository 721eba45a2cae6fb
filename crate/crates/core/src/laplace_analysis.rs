//! Laplace-domain view of the mode equation.
//!
//! With `F(σ) = ∫_0^∞ f(t) e^{-σt} dt` the mode equation becomes
//! `Γ_n(σ) F(σ) = G(σ)`, where
//!
//! ```text
//! Γ_n(σ) = a₊ + a₋ e^{-2σ} - ∫_0^2 Q_n(s) e^{-σs} ds.
//! ```
//!
//! Decay of `f` is governed by the rightmost zero of `Γ_n`, so roots in
//! `Re σ < 0` mean decay. The frequency-domain variable of the Helmholtz
//! problems is `k = iσ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mode_equation::{DelayCoefficients, ModeParams};
use crate::special_functions::{gauss_legendre_rule, QuadratureRule};
use crate::time_solver::HistoryBuffer;

const SERIES_RADIUS: f64 = 1e-2;
const ROOT_RESIDUAL: f64 = 1e-10;
const MAX_DEPTH: usize = 48;

/// Cached evaluator for `Γ_n` and `Γ_n'`.
#[derive(Debug, Clone)]
pub struct Symbol {
    params: ModeParams,
    coeffs: DelayCoefficients,
    rule: QuadratureRule,
}

impl Symbol {
    pub fn new(params: ModeParams) -> Self {
        let rule = gauss_legendre_rule(16 + params.n).expect("non-empty rule");
        Self {
            params,
            coeffs: params.delay_coefficients(),
            rule,
        }
    }

    pub fn params(&self) -> &ModeParams {
        &self.params
    }

    /// `Γ_n(σ)`; closed form for `n = 0`, quadrature otherwise.
    pub fn eval(&self, sigma: Complex64) -> Complex64 {
        if self.params.n == 0 {
            self.delay_part(sigma) - (1.0 - self.params.beta) * expm1_ratio(sigma)
        } else {
            self.eval_quadrature(sigma)
        }
    }

    /// `Γ_n(σ)` with the kernel integral always done by quadrature.
    pub fn eval_quadrature(&self, sigma: Complex64) -> Complex64 {
        self.delay_part(sigma) - self.kernel_moment(sigma, 0)
    }

    /// `Γ_n'(σ) = -2a₋ e^{-2σ} + ∫_0^2 s Q_n(s) e^{-σs} ds`.
    pub fn derivative(&self, sigma: Complex64) -> Complex64 {
        -2.0 * self.coeffs.a_minus * (-2.0 * sigma).exp() + self.kernel_moment(sigma, 1)
    }

    fn delay_part(&self, sigma: Complex64) -> Complex64 {
        self.coeffs.a_plus + self.coeffs.a_minus * (-2.0 * sigma).exp()
    }

    // ∫_0^2 s^power Q_n(s) e^{-σs} ds on panels short enough that |σ|·h ≤ 2.
    fn kernel_moment(&self, sigma: Complex64, power: i32) -> Complex64 {
        let panels = sigma.norm().ceil().max(1.0) as usize;
        let h = 2.0 / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let a = k as f64 * h;
            for (s, w) in self.rule.mapped(a, a + h) {
                total += w * s.powi(power) * self.params.q(s) * (-sigma * s).exp();
            }
        }
        total
    }
}

// (1 - e^{-2σ}) / (2σ), with a Taylor series near the removable singularity.
fn expm1_ratio(sigma: Complex64) -> Complex64 {
    if sigma.norm() < SERIES_RADIUS {
        expm1_ratio_series(sigma)
    } else {
        (1.0 - (-2.0 * sigma).exp()) / (2.0 * sigma)
    }
}

fn expm1_ratio_series(sigma: Complex64) -> Complex64 {
    let x = -2.0 * sigma;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..=8 {
        term *= x / (k + 1) as f64;
        sum += term;
    }
    sum
}

/// `Γ_n(σ)`.
pub fn symbol(p: &ModeParams, sigma: Complex64) -> Complex64 {
    Symbol::new(*p).eval(sigma)
}

/// `Γ_n'(σ)`.
pub fn symbol_derivative(p: &ModeParams, sigma: Complex64) -> Complex64 {
    Symbol::new(*p).derivative(sigma)
}

/// Axis-aligned rectangle in the `σ` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl SearchRect {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Result<Self> {
        let ok = [re_lo, re_hi, im_lo, im_hi].iter().all(|v| v.is_finite());
        if !ok || re_lo >= re_hi || im_lo >= im_hi {
            return Err(Error::Domain(format!(
                "degenerate rectangle [{re_lo}, {re_hi}] x [{im_lo}, {im_hi}]"
            )));
        }
        Ok(Self {
            re: (re_lo, re_hi),
            im: (im_lo, im_hi),
        })
    }

    /// `Re σ ∈ [0, 4]`, `|Im σ| ≤ im_max`: the region where a root would
    /// mean a non-decaying mode.
    pub fn closed_right_half(im_max: f64) -> Result<Self> {
        Self::new(0.0, 4.0, -im_max, im_max)
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re.0 - slack
            && z.re <= self.re.1 + slack
            && z.im >= self.im.0 - slack
            && z.im <= self.im.1 + slack
    }

    fn width(&self) -> f64 {
        self.re.1 - self.re.0
    }

    fn height(&self) -> f64 {
        self.im.1 - self.im.0
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    fn expanded(&self, d: f64) -> Self {
        Self {
            re: (self.re.0 - d, self.re.1 + d),
            im: (self.im.0 - d, self.im.1 + d),
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }

    fn split(&self, frac: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let m = self.re.0 + frac * self.width();
            (
                Self {
                    re: (self.re.0, m),
                    ..*self
                },
                Self {
                    re: (m, self.re.1),
                    ..*self
                },
            )
        } else {
            let m = self.im.0 + frac * self.height();
            (
                Self {
                    im: (self.im.0, m),
                    ..*self
                },
                Self {
                    im: (m, self.im.1),
                    ..*self
                },
            )
        }
    }
}

/// A located zero of `Γ_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRoot {
    pub location: Complex64,
    /// `|Γ_n|` at `location`.
    pub residual: f64,
    pub newton_iterations: usize,
    pub multiplicity: usize,
}

#[derive(Debug)]
enum Winding {
    Count(usize),
    /// `|Γ|` nearly vanishes on the contour.
    OnBoundary(Complex64),
    Ambiguous(String),
}

struct RootSearch<'a> {
    symbol: &'a Symbol,
    tol: f64,
}

impl RootSearch<'_> {
    fn winding(&self, rect: &SearchRect) -> Winding {
        let c = rect.corners();
        let mut total = 0.0;
        for k in 0..4 {
            match self.edge_phase(c[k], c[(k + 1) % 4]) {
                Ok(d) => total += d,
                Err(w) => return w,
            }
        }
        let turns = total / std::f64::consts::TAU;
        let rounded = turns.round();
        if (turns - rounded).abs() > 0.1 || rounded < 0.0 {
            return Winding::Ambiguous(format!("winding {turns:.3} on {rect:?}"));
        }
        Winding::Count(rounded as usize)
    }

    // Total change of arg Γ along the segment, refined until every piece
    // turns by less than π/4.
    fn edge_phase(&self, a: Complex64, b: Complex64) -> std::result::Result<f64, Winding> {
        let len = (b - a).norm();
        let pieces = ((len * 4.0).ceil() as usize).max(8);
        let mut total = 0.0;
        let mut z0 = a;
        let mut f0 = self.sample(a)?;
        for i in 1..=pieces {
            let z1 = a + (b - a) * (i as f64 / pieces as f64);
            let f1 = self.sample(z1)?;
            total += self.phase_piece(z0, f0, z1, f1, 0)?;
            z0 = z1;
            f0 = f1;
        }
        Ok(total)
    }

    fn phase_piece(
        &self,
        z0: Complex64,
        f0: Complex64,
        z1: Complex64,
        f1: Complex64,
        depth: usize,
    ) -> std::result::Result<f64, Winding> {
        let d = (f1 / f0).arg();
        if d.abs() < std::f64::consts::FRAC_PI_4 {
            return Ok(d);
        }
        if depth >= 40 {
            return Err(Winding::Ambiguous(format!("phase unresolved near {z0}")));
        }
        let zm = 0.5 * (z0 + z1);
        let fm = self.sample(zm)?;
        Ok(self.phase_piece(z0, f0, zm, fm, depth + 1)?
            + self.phase_piece(zm, fm, z1, f1, depth + 1)?)
    }

    fn sample(&self, z: Complex64) -> std::result::Result<Complex64, Winding> {
        let f = self.symbol.eval(z);
        if f.norm() < 1e-9 {
            Err(Winding::OnBoundary(z))
        } else {
            Ok(f)
        }
    }

    fn newton(
        &self,
        start: Complex64,
        multiplicity: usize,
        reach: f64,
    ) -> Option<(Complex64, usize)> {
        let mut z = start;
        for it in 1..=80 {
            let f = self.symbol.eval(z);
            if f.norm() == 0.0 {
                return Some((z, it));
            }
            let d = self.symbol.derivative(z);
            if d.norm() == 0.0 || !d.is_finite() {
                return None;
            }
            let step = multiplicity as f64 * f / d;
            z -= step;
            if !z.is_finite() || (z - start).norm() > reach {
                return None;
            }
            if step.norm() <= self.tol * z.norm().max(1.0) {
                return Some((z, it));
            }
        }
        None
    }

    fn polish(&self, rect: &SearchRect, multiplicity: usize) -> Option<SymbolRoot> {
        let c = rect.center();
        let (w, h) = (rect.width(), rect.height());
        let seeds = [
            c,
            c + Complex64::new(-0.25 * w, -0.25 * h),
            c + Complex64::new(0.25 * w, -0.25 * h),
            c + Complex64::new(0.25 * w, 0.25 * h),
            c + Complex64::new(-0.25 * w, 0.25 * h),
        ];
        let slack = 1e-9 * (1.0 + rect.diameter());
        seeds.iter().find_map(|&s| {
            let (z, its) = self.newton(s, multiplicity, 2.0 * rect.diameter() + 1.0)?;
            let residual = self.symbol.eval(z).norm();
            (rect.contains(z, slack) && residual <= ROOT_RESIDUAL).then_some(SymbolRoot {
                location: z,
                residual,
                newton_iterations: its,
                multiplicity,
            })
        })
    }

    fn locate(
        &self,
        rect: SearchRect,
        count: usize,
        depth: usize,
    ) -> (Vec<SymbolRoot>, Vec<String>) {
        if count == 0 {
            return (Vec::new(), Vec::new());
        }
        let tiny = rect.diameter() < 1e-7 * (1.0 + rect.center().norm());
        if count == 1 || tiny {
            if let Some(r) = self.polish(&rect, count) {
                return (vec![r], Vec::new());
            }
            if tiny || depth >= MAX_DEPTH {
                return (
                    Vec::new(),
                    vec![format!("Newton failed for {count} root(s) in {rect:?}")],
                );
            }
        }
        if depth >= MAX_DEPTH {
            return (
                Vec::new(),
                vec![format!("depth limit with {count} root(s) in {rect:?}")],
            );
        }
        let mut notes = Vec::new();
        for frac in [0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65] {
            let (lo, hi) = rect.split(frac);
            let (wl, wh) = rayon::join(|| self.winding(&lo), || self.winding(&hi));
            match (wl, wh) {
                (Winding::Count(a), Winding::Count(b)) if a + b == count => {
                    let ((mut ra, na), (rb, nb)) = rayon::join(
                        || self.locate(lo, a, depth + 1),
                        || self.locate(hi, b, depth + 1),
                    );
                    ra.extend(rb);
                    notes.extend(na);
                    notes.extend(nb);
                    return (ra, notes);
                }
                (Winding::Count(a), Winding::Count(b)) => {
                    notes.push(format!("split {frac}: {a}+{b} != {count} in {rect:?}"));
                }
                (other_l, other_h) => {
                    log::debug!("retrying split of {rect:?}: {other_l:?} / {other_h:?}");
                }
            }
        }
        notes.push(format!("no clean split of {rect:?}"));
        (Vec::new(), notes)
    }
}

/// Zeros of `Γ_n` inside `rect`, Newton-polished to relative step `tol`.
///
/// The winding number of `Γ_n` around the rectangle fixes how many roots
/// must be found; the rectangle is bisected until each piece holds one.
/// If a root sits on the boundary the rectangle is enlarged slightly (and a
/// warning logged) so the count is well defined.
pub fn find_roots(p: &ModeParams, rect: &SearchRect, tol: f64) -> Result<Vec<SymbolRoot>> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let symbol = Symbol::new(*p);
    let search = RootSearch {
        symbol: &symbol,
        tol,
    };
    let mut region = *rect;
    let mut pad = 1e-6 * rect.diameter();
    let mut count = None;
    for _ in 0..4 {
        match search.winding(&region) {
            Winding::Count(c) => {
                count = Some(c);
                break;
            }
            Winding::OnBoundary(z) => {
                log::warn!("symbol vanishes near {z} on the search boundary; enlarging by {pad:e}");
                region = rect.expanded(pad);
                pad *= 8.0;
            }
            Winding::Ambiguous(msg) => {
                return Err(Error::IncompleteRootSearch {
                    expected: 0,
                    found: 0,
                    diagnostics: msg,
                });
            }
        }
    }
    let expected = count.ok_or_else(|| Error::IncompleteRootSearch {
        expected: 0,
        found: 0,
        diagnostics: "root persists on the search boundary".into(),
    })?;
    let (mut roots, notes) = search.locate(region, expected, 0);
    let found: usize = roots.iter().map(|r| r.multiplicity).sum();
    if found != expected {
        return Err(Error::IncompleteRootSearch {
            expected,
            found,
            diagnostics: notes.join("; "),
        });
    }
    roots.sort_by(|a, b| {
        b.location
            .re
            .total_cmp(&a.location.re)
            .then(a.location.im.total_cmp(&b.location.im))
    });
    let edge = 0.05 * region.height();
    if roots
        .iter()
        .any(|r| r.location.im < region.im.0 + edge || r.location.im > region.im.1 - edge)
    {
        log::warn!("roots cluster at the Im edge of {region:?}; the window may be too small");
    }
    Ok(roots)
}

/// `-max Re σ` over the roots in `rect`, or `+∞` when there are none.
pub fn predicted_decay_rate(p: &ModeParams, rect: &SearchRect) -> Result<f64> {
    let roots = find_roots(p, rect, 1e-13)?;
    Ok(roots
        .iter()
        .map(|r| r.location.re)
        .max_by(f64::total_cmp)
        .map_or(f64::INFINITY, |re| 0.0 - re))
}

/// Log-linear fit `|f| ≈ amplitude · e^{-rate·t}` to the peak envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Positive for decay.
    pub rate: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the fit in `ln |f|`.
    pub fit_residual: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Relative floor below which peaks are treated as round-off.
const PEAK_FLOOR: f64 = 1e-8;

/// A maximum this far below the largest one within [`ENVELOPE_RADIUS`] lies
/// between pulses or in the tail of one and is not on the envelope.
const ENVELOPE_DROP: f64 = 1e-2;

/// Half the echo period of the mode equations.
const ENVELOPE_RADIUS: f64 = 1.0;

/// Fits the decay rate of `|f|` over `window`.
///
/// The envelope is the set of local maxima of `|f|`, each refined by a
/// parabola through the logs of the three surrounding samples. Maxima below
/// `1e-8` of the window maximum are ignored, as are maxima below `1e-2` of
/// the largest maximum within one time unit. When fewer than four maxima
/// remain the signal is not oscillating and every positive sample of `|f|`
/// is used instead.
pub fn fit_decay_rate(series: &HistoryBuffer, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let end = series.last_time().unwrap_or(0.0);
    if !(lo < hi && lo >= 0.0 && hi <= end * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "window [{lo}, {hi}] not inside [0, {end}]"
        )));
    }
    let dt = series.dt();
    let v = series.values();
    let inside: Vec<usize> = (0..v.len())
        .filter(|&i| {
            let t = series.time(i);
            t >= lo && t <= hi
        })
        .collect();
    let peak_max = inside.iter().map(|&i| v[i].abs()).fold(0.0, f64::max);
    let mut pts: Vec<(f64, f64)> = inside
        .iter()
        .filter(|&&i| i > 0 && i + 1 < v.len())
        .filter_map(|&i| {
            let (a, b, c) = (v[i - 1].abs(), v[i].abs(), v[i + 1].abs());
            let is_peak = (b > a && b >= c) || (b >= a && b > c);
            if !is_peak || b <= PEAK_FLOOR * peak_max || a <= 0.0 || c <= 0.0 {
                return None;
            }
            let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
            let curv = la - 2.0 * lb + lc;
            if curv >= 0.0 {
                return Some((series.time(i), lb));
            }
            let shift = 0.5 * (la - lc) / curv;
            Some((series.time(i) + shift * dt, lb - 0.25 * (la - lc) * shift))
        })
        .collect();
    let peaks = std::mem::take(&mut pts);
    pts = peaks
        .iter()
        .filter(|&&(t, lv)| {
            let local = peaks
                .iter()
                .filter(|p| (p.0 - t).abs() <= ENVELOPE_RADIUS)
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max);
            lv >= local + ENVELOPE_DROP.ln()
        })
        .copied()
        .collect();
    if pts.len() < 4 {
        pts = inside
            .iter()
            .filter(|&&i| v[i].abs() > 0.0)
            .map(|&i| (series.time(i), v[i].abs().ln()))
            .collect();
    }
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} envelope points in [{lo}, {hi}]",
            pts.len()
        )));
    }
    let (slope, intercept, rms) = least_squares(&pts);
    Ok(DecayFit {
        rate: 0.0 - slope,
        amplitude: intercept.exp(),
        fit_residual: rms,
        window,
        points: pts.len(),
    })
}

/// Ordinary least-squares line `y = slope·x + intercept`, with the RMS residual.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Whether `k` lies in the region where the impedance problem with
/// `∂_n u - i(ka + ib)u = 0` is known to have no poles: the closed upper
/// half plane, or the disk `k₁² + (k₂ + b/a)² ≤ (b/a)²` off the imaginary
/// axis. Points on the negative imaginary axis need a separate condition
/// and are reported as not covered.
pub fn impedance_pole_free(k: Complex64, a: f64, b: f64) -> Result<bool> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "impedance parameters must be positive, got a={a}, b={b}"
        )));
    }
    if !k.is_finite() {
        return Err(Error::Domain(format!("non-finite frequency {k}")));
    }
    if k.im >= 0.0 {
        return Ok(true);
    }
    let r = b / a;
    Ok(k.re != 0.0 && k.re * k.re + (k.im + r).powi(2) <= r * r)
}
