//! High-frequency structure of the Helmholtz layer potentials on convex
//! surfaces.
//!
//! With `G_k(r) = e^{ikr}/(4πr)`,
//!
//! ```text
//! S_k f(x) = ∫ G_k(|x-y|) f(y) dA(y)
//! D_k f(x) = ∫ ∂_{n_y} G_k(|x-y|) f(y) dA(y)
//! ```
//!
//! For large `k` each operator splits into a diagonal part from the
//! neighbourhood of `x` and one contribution per critical point `ŷ ≠ x` of
//! the phase `φ_x(y) = |x-y|`. On a convex surface every such `ŷ` sees `x` on
//! its inner side, `x = ŷ - d n_ŷ`, and the leading terms satisfy
//! `D ≈ ik S`, which is what makes `D_k - ik S_k` small away from the
//! diagonal.
//!
//! Surfaces are spheres and spheroids, handled together as ellipsoids
//! `(x² + y²)/a² + z²/c² = 1`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::special_functions::{gauss_legendre_rule, QuadratureRule};

pub type Point3 = [f64; 3];

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(s: f64, a: Point3) -> Point3 {
    [s * a[0], s * a[1], s * a[2]]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: Point3) -> Point3 {
    scale(1.0 / norm(a), a)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
fn sym_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.5 * (m[0][0] - m[1][1])).hypot(m[0][1]);
    (mean - r, mean + r)
}

/// A strictly convex surface of revolution about the z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexSurface {
    Sphere {
        radius: f64,
    },
    /// Semi-axes `equatorial` (x and y) and `polar` (z).
    Spheroid {
        equatorial: f64,
        polar: f64,
    },
}

impl ConvexSurface {
    pub fn sphere(radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Self::Sphere { radius })
    }

    pub fn unit_sphere() -> Self {
        Self::Sphere { radius: 1.0 }
    }

    pub fn spheroid(equatorial: f64, polar: f64) -> Result<Self> {
        check_positive("equatorial semi-axis", equatorial)?;
        check_positive("polar semi-axis", polar)?;
        Ok(Self::Spheroid { equatorial, polar })
    }

    /// `(a, c)`.
    pub fn semi_axes(&self) -> (f64, f64) {
        match *self {
            Self::Sphere { radius } => (radius, radius),
            Self::Spheroid { equatorial, polar } => (equatorial, polar),
        }
    }

    fn metric(&self) -> Point3 {
        let (a, c) = self.semi_axes();
        [1.0 / (a * a), 1.0 / (a * a), 1.0 / (c * c)]
    }

    // yᵀ M z with M = diag(1/a², 1/a², 1/c²).
    fn form(&self, y: Point3, z: Point3) -> f64 {
        let m = self.metric();
        m[0] * y[0] * z[0] + m[1] * y[1] * z[1] + m[2] * y[2] * z[2]
    }

    /// Largest chord length.
    pub fn diameter(&self) -> f64 {
        let (a, c) = self.semi_axes();
        2.0 * a.max(c)
    }

    /// `(a sinθ cosφ, a sinθ sinφ, c cosθ)`.
    pub fn point(&self, theta: f64, phi: f64) -> Point3 {
        let (a, c) = self.semi_axes();
        [
            a * theta.sin() * phi.cos(),
            a * theta.sin() * phi.sin(),
            c * theta.cos(),
        ]
    }

    /// `|yᵀMy - 1|`, zero on the surface.
    pub fn level_defect(&self, y: Point3) -> f64 {
        (self.form(y, y) - 1.0).abs()
    }

    pub fn check_on_surface(&self, y: Point3) -> Result<()> {
        if self.level_defect(y) > 1e-10 {
            return Err(Error::Domain(format!("point {y:?} is not on the surface")));
        }
        Ok(())
    }

    /// Outward unit normal.
    pub fn normal(&self, y: Point3) -> Point3 {
        let m = self.metric();
        unit([m[0] * y[0], m[1] * y[1], m[2] * y[2]])
    }

    /// An orthonormal tangent pair `(e1, e2)` with `e1 × e2 = n`.
    pub fn tangent_basis(&self, y: Point3) -> (Point3, Point3) {
        let n = self.normal(y);
        let helper = if n[0].abs() < 0.6 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let e1 = unit(sub(helper, scale(dot(helper, n), n)));
        (e1, cross(n, e1))
    }

    /// Second fundamental form in the basis `(e1, e2)`, positive for this
    /// convex surface with its outward normal.
    pub fn second_fundamental_form(&self, y: Point3, e1: Point3, e2: Point3) -> [[f64; 2]; 2] {
        let m = self.metric();
        let grad = norm([m[0] * y[0], m[1] * y[1], m[2] * y[2]]);
        let b = |u: Point3, v: Point3| self.form(u, v) / grad;
        [[b(e1, e1), b(e1, e2)], [b(e2, e1), b(e2, e2)]]
    }

    /// `(κ₁, κ₂)`, ascending.
    pub fn principal_curvatures(&self, y: Point3) -> (f64, f64) {
        let (e1, e2) = self.tangent_basis(y);
        sym_eigenvalues(self.second_fundamental_form(y, e1, e2))
    }

    pub fn mean_curvature(&self, y: Point3) -> f64 {
        let (k1, k2) = self.principal_curvatures(y);
        0.5 * (k1 + k2)
    }

    /// Radial projection onto the surface.
    fn project(&self, p: Point3) -> Point3 {
        scale(1.0 / self.form(p, p).sqrt(), p)
    }

    /// Length of the chord from `x` (on the surface) in direction `v`
    /// pointing into the body.
    fn chord(&self, x: Point3, v: Point3) -> f64 {
        -2.0 * self.form(x, v) / self.form(v, v)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// A critical point `ŷ ≠ x` of `φ_x(y) = |x - y|` on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPointRecord {
    pub y_hat: Point3,
    /// `|x - ŷ|`.
    pub d: f64,
    /// Hessian of `φ_x` in the tangent basis `basis` at `ŷ`.
    pub hessian: [[f64; 2]; 2],
    pub det: f64,
    /// Positive minus negative eigenvalue count.
    pub signature: i32,
    pub degenerate: bool,
    pub basis: (Point3, Point3),
    /// `+1` when `x` lies on the outer side of the tangent plane at `ŷ`,
    /// `-1` on the inner side (always the case for convex surfaces).
    pub side: f64,
}

/// All critical points of `φ_x` other than `x` itself.
///
/// Newton iterations on the tangential part of `y - x` start from a
/// 12 × 24 grid of surface points; converged points within `1e-8` are
/// merged. Records are sorted by decreasing distance.
pub fn critical_points(s: &ConvexSurface, x: Point3) -> Result<Vec<CriticalPointRecord>> {
    s.check_on_surface(x)?;
    let diam = s.diameter();
    let mut found: Vec<Point3> = Vec::new();
    for i in 0..12 {
        for j in 0..24 {
            let theta = (i as f64 + 0.5) * std::f64::consts::PI / 12.0;
            let phi = j as f64 * std::f64::consts::TAU / 24.0;
            let seed = s.point(theta, phi);
            if norm(sub(seed, x)) < 0.2 * diam {
                continue;
            }
            let Some(y) = newton_critical(s, x, seed) else {
                continue;
            };
            if norm(sub(y, x)) < 1e-6 * diam {
                continue;
            }
            if found
                .iter()
                .all(|f| norm(sub(*f, y)) > 1e-8 * diam.max(1.0))
            {
                found.push(y);
            }
        }
    }
    if found.is_empty() {
        return Err(Error::SearchFailure(format!(
            "Newton did not converge from any seed for x = {x:?}"
        )));
    }
    let mut records: Vec<_> = found.into_iter().map(|y| record(s, x, y)).collect();
    records.sort_by(|a, b| b.d.total_cmp(&a.d));
    Ok(records)
}

// Newton in the radial-projection chart around the iterate.
fn newton_critical(s: &ConvexSurface, x: Point3, seed: Point3) -> Option<Point3> {
    let diam = s.diameter();
    let mut y = seed;
    for _ in 0..60 {
        let (e1, e2) = s.tangent_basis(y);
        let chart = |u: [f64; 2]| s.project(add(y, add(scale(u[0], e1), scale(u[1], e2))));
        // Tangential part of Y(u) - x at Y(u), in the fixed basis at y.
        let g = |u: [f64; 2]| {
            let p = chart(u);
            let n = s.normal(p);
            let r = sub(p, x);
            let t = sub(r, scale(dot(r, n), n));
            [dot(t, e1), dot(t, e2)]
        };
        let g0 = g([0.0, 0.0]);
        if g0[0].hypot(g0[1]) <= 1e-13 * diam {
            return Some(y);
        }
        let h = 1e-6 * diam;
        let col = |k: usize| {
            let mut up = [0.0; 2];
            let mut dn = [0.0; 2];
            up[k] = h;
            dn[k] = -h;
            let (gp, gm) = (g(up), g(dn));
            [(gp[0] - gm[0]) / (2.0 * h), (gp[1] - gm[1]) / (2.0 * h)]
        };
        let (c0, c1) = (col(0), col(1));
        let det = c0[0] * c1[1] - c1[0] * c0[1];
        if det.abs() < 1e-14 {
            return None;
        }
        let mut du = [
            -(c1[1] * g0[0] - c1[0] * g0[1]) / det,
            -(-c0[1] * g0[0] + c0[0] * g0[1]) / det,
        ];
        let len = du[0].hypot(du[1]);
        if len > 0.5 * diam {
            du = [du[0] * 0.5 * diam / len, du[1] * 0.5 * diam / len];
        }
        y = chart(du);
    }
    let r = sub(y, x);
    let (e1, e2) = s.tangent_basis(y);
    (dot(r, e1).hypot(dot(r, e2)) <= 1e-11 * diam).then_some(y)
}

fn record(s: &ConvexSurface, x: Point3, y: Point3) -> CriticalPointRecord {
    let n = s.normal(y);
    let r = sub(x, y);
    let d = norm(r);
    let side = dot(r, n).signum();
    let (e1, e2) = s.tangent_basis(y);
    let ii = s.second_fundamental_form(y, e1, e2);
    // φ = sqrt(|u|² + (h - side·d)²) with h ≈ -½ uᵀ II u.
    let hessian = [
        [(1.0 + side * d * ii[0][0]) / d, side * ii[0][1]],
        [side * ii[1][0], (1.0 + side * d * ii[1][1]) / d],
    ];
    let (l1, l2) = sym_eigenvalues(hessian);
    let det = l1 * l2;
    let signature = [l1, l2].iter().map(|l| l.signum() as i32).sum();
    CriticalPointRecord {
        y_hat: y,
        d,
        hessian,
        det,
        signature,
        degenerate: det.abs() < 1e-8 / (d * d),
        basis: (e1, e2),
        side,
    }
}

fn check_wavenumber(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    Ok(())
}

/// `S_k^diag f(x) = -f(x)/(2ik)`.
pub fn single_layer_diag(k: f64, f_at_x: Complex64) -> Result<Complex64> {
    check_wavenumber(k)?;
    Ok(-f_at_x / Complex64::new(0.0, 2.0 * k))
}

/// `D_k^diag f(x) = H(x) f(x)/(2ik)`.
pub fn double_layer_diag(
    s: &ConvexSurface,
    x: Point3,
    k: f64,
    f_at_x: Complex64,
) -> Result<Complex64> {
    check_wavenumber(k)?;
    s.check_on_surface(x)?;
    Ok(s.mean_curvature(x) * f_at_x / Complex64::new(0.0, 2.0 * k))
}

/// Two-term diagonal expansion of `A = I/2 + D_k - i(ka + ib) S_k`:
/// `((1+a)/2) f + (H(x) - b) f/(2ik)`.
pub fn diag_asymptotics(
    s: &ConvexSurface,
    x: Point3,
    k: f64,
    a: f64,
    b: f64,
    f_at_x: Complex64,
) -> Result<Complex64> {
    let d = double_layer_diag(s, x, k, f_at_x)?;
    let sd = single_layer_diag(k, f_at_x)?;
    Ok(0.5 * f_at_x + d - Complex64::new(0.0, 1.0) * Complex64::new(k * a, b) * sd)
}

fn non_degenerate(cp: &CriticalPointRecord) -> Result<()> {
    if cp.degenerate {
        return Err(Error::Unsupported(format!(
            "degenerate critical point at {:?} (det {:e})",
            cp.y_hat, cp.det
        )));
    }
    Ok(())
}

/// Leading stationary-phase term of `S_k f(x)` from `cp`:
/// `e^{iπ Sgn/4} e^{ikd} f(ŷ) / (2k d √|det|)`.
pub fn sp_single_layer(
    cp: &CriticalPointRecord,
    k: f64,
    f_at_yhat: Complex64,
) -> Result<Complex64> {
    check_wavenumber(k)?;
    non_degenerate(cp)?;
    let phase = Complex64::from_polar(
        1.0,
        std::f64::consts::FRAC_PI_4 * cp.signature as f64 + k * cp.d,
    );
    Ok(phase * f_at_yhat / (2.0 * k * cp.d * cp.det.abs().sqrt()))
}

/// Leading stationary-phase term of `D_k f(x)` from `cp`. The normal
/// derivative of the kernel at `ŷ` is `-side·ik` times the kernel, so on
/// a convex surface this is `ik` times the single-layer term.
pub fn sp_double_layer(
    cp: &CriticalPointRecord,
    k: f64,
    f_at_yhat: Complex64,
) -> Result<Complex64> {
    Ok(Complex64::new(0.0, -cp.side * k) * sp_single_layer(cp, k, f_at_yhat)?)
}

/// Which layer potential to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Single,
    Double,
}

/// Resolution and optional far-field window for [`direct_layer_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Nodes per wavelength along chords; below 6 the quadrature refuses.
    pub points_per_wavelength: f64,
    /// Minimum node count in each angular direction.
    pub min_nodes: usize,
    /// `Some((r0, r1))` multiplies the integrand by a smooth step in
    /// `r = |x - y|` that is 0 below `r0` and 1 above `r1`, removing the
    /// diagonal contribution.
    pub window: Option<(f64, f64)>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            points_per_wavelength: 10.0,
            min_nodes: 32,
            window: None,
        }
    }
}

const GAUSS_PANEL: usize = 16;

/// `S_k f(x)` or `D_k f(x)` by direct quadrature.
///
/// The surface is swept by chords from `x`: a direction `v` at polar angle
/// `θ` from the inward normal and azimuth `ψ` meets the surface again at
/// distance `r(v)`, and `dA = r² dΩ / (v·n_y)`. The area element cancels the
/// `1/r` singularity, leaving smooth integrands
///
/// ```text
/// S:  e^{ikr} r / (4π v·n_y) dΩ        D:  e^{ikr} (ikr - 1) / (4π) dΩ
/// ```
///
/// integrated with panel Gauss–Legendre in `θ` and the trapezoid rule in `ψ`.
pub fn direct_layer_quadrature<F>(
    s: &ConvexSurface,
    x: Point3,
    k: f64,
    layer: Layer,
    f: F,
    opts: &QuadratureOptions,
) -> Result<Complex64>
where
    F: Fn(Point3) -> Complex64 + Sync,
{
    let (single, double) = direct_layer_pair(s, x, k, f, opts)?;
    Ok(match layer {
        Layer::Single => single,
        Layer::Double => double,
    })
}

/// Both layer potentials from one sweep: `(S_k f(x), D_k f(x))`.
pub fn direct_layer_pair<F>(
    s: &ConvexSurface,
    x: Point3,
    k: f64,
    f: F,
    opts: &QuadratureOptions,
) -> Result<(Complex64, Complex64)>
where
    F: Fn(Point3) -> Complex64 + Sync,
{
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be >= 0, got {k}")));
    }
    if !(opts.points_per_wavelength >= 6.0) {
        return Err(Error::QuadratureRefused(format!(
            "{} points per wavelength is below the minimum of 6",
            opts.points_per_wavelength
        )));
    }
    if let Some((r0, r1)) = opts.window {
        if !(0.0 <= r0 && r0 < r1) {
            return Err(Error::Config(format!(
                "window ({r0}, {r1}) must satisfy 0 <= r0 < r1"
            )));
        }
    }
    s.check_on_surface(x)?;

    let wavelengths = k * s.diameter() / std::f64::consts::TAU;
    let n_theta = ((opts.points_per_wavelength * wavelengths).ceil() as usize).max(opts.min_nodes);
    let panels = n_theta.div_ceil(GAUSS_PANEL);
    let n_psi = 2 * panels * GAUSS_PANEL;
    let rule: QuadratureRule = gauss_legendre_rule(GAUSS_PANEL)?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let thetas: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let a = half_pi * p as f64 / panels as f64;
            let b = half_pi * (p + 1) as f64 / panels as f64;
            rule.mapped(a, b).collect::<Vec<_>>()
        })
        .collect();

    let inward = scale(-1.0, s.normal(x));
    let (e1, e2) = s.tangent_basis(x);
    let dpsi = std::f64::consts::TAU / n_psi as f64;
    let ik = Complex64::new(0.0, k);

    let rows: Vec<(Complex64, Complex64)> = (0..n_psi)
        .into_par_iter()
        .map(|j| {
            let psi = j as f64 * dpsi;
            let tangent = add(scale(psi.cos(), e1), scale(psi.sin(), e2));
            let mut acc = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &(theta, w) in &thetas {
                let v = add(scale(theta.cos(), inward), scale(theta.sin(), tangent));
                let r = s.chord(x, v);
                let y = add(x, scale(r, v));
                let cos_y = dot(v, s.normal(y));
                let cut = opts.window.map_or(1.0, |(r0, r1)| smooth_step(r, r0, r1));
                if cut == 0.0 {
                    continue;
                }
                let common = (ik * r).exp() * f(y) * (cut * w * theta.sin());
                acc.0 += common * (r / cos_y.abs());
                acc.1 += common * (ik * r - 1.0) * cos_y.signum();
            }
            acc
        })
        .collect();
    let (mut single, mut double) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (a, b) in rows {
        single += a;
        double += b;
    }
    let c = dpsi / (4.0 * std::f64::consts::PI);
    Ok((single * c, double * c))
}

/// C^∞ step: 0 for `r ≤ r0`, 1 for `r ≥ r1`.
pub fn smooth_step(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 {
        return 0.0;
    }
    if r >= r1 {
        return 1.0;
    }
    let t = (r - r0) / (r1 - r0);
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Leading-order `|Σ (D^ŷ - iak S^ŷ)| / |Σ D^ŷ|` over all critical points,
/// for `f ≡ 1`. On a convex surface this is `|1 - a|`.
pub fn cancellation_ratio(s: &ConvexSurface, x: Point3, k: f64, a: f64) -> Result<f64> {
    check_positive("a", a)?;
    let cps = critical_points(s, x)?;
    let one = Complex64::new(1.0, 0.0);
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for cp in &cps {
        let sd = sp_double_layer(cp, k, one)?;
        num += sd - Complex64::new(0.0, a * k) * sp_single_layer(cp, k, one)?;
        den += sd;
    }
    Ok(num.norm() / den.norm())
}

/// Window that keeps every critical point and removes a neighbourhood of
/// `x`: `(0.25 d_min, 0.6 d_min)`.
pub fn far_field_window(cps: &[CriticalPointRecord]) -> Option<(f64, f64)> {
    let d = cps.iter().map(|c| c.d).fold(f64::INFINITY, f64::min);
    d.is_finite().then_some((0.25 * d, 0.6 * d))
}

/// Measured counterpart of [`cancellation_ratio`]: the far-field part of
/// `(D_k - iak S_k) 1` from windowed direct quadrature, relative to the
/// leading-order `|Σ D^ŷ|`.
pub fn cancellation_residual(
    s: &ConvexSurface,
    x: Point3,
    k: f64,
    a: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    check_positive("a", a)?;
    let cps = critical_points(s, x)?;
    let mut opts = *opts;
    if opts.window.is_none() {
        opts.window = far_field_window(&cps);
    }
    let one = Complex64::new(1.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for cp in &cps {
        den += sp_double_layer(cp, k, one)?;
    }
    let (single, double) = direct_layer_pair(s, x, k, |_| one, &opts)?;
    Ok((double - Complex64::new(0.0, a * k) * single).norm() / den.norm())
}
