//! Independent reference solutions for the mode equations.
//!
//! - [`series_solution_beta1`]: the closed-form delay-recurrence solution of
//!   the `n = 0, β = 1` equation;
//! - [`dense_volterra_solve`]: an implicit product-trapezoid discretisation
//!   on a grid where the delay is a whole number of steps, i.e. the opposite
//!   alignment choice from [`crate::time_solver`];
//! - [`residual_norm`]: how well a stored density satisfies the equation.

use crate::error::{Error, Result};
use crate::mode_equation::{apply_operator_refined, BoundarySignal, ModeParams};
use crate::special_functions::gauss_legendre_rule;
use crate::time_solver::HistoryBuffer;

/// `f(t) = 2/(1+α) Σ_j (-λ)^j g(t-2j)` for `G_0^{α,1} f = g`, `α ∈ (0, 1]`.
pub fn series_solution_beta1(alpha: f64, sig: &BoundarySignal, t: f64) -> Result<f64> {
    series_terms(alpha, sig, t, 0)
}

/// As [`series_solution_beta1`] for data supported in `[0, 2M]`: only the
/// `j ≥ (t - 2M)/2` terms can be non-zero.
pub fn series_solution_beta1_supported(
    alpha: f64,
    sig: &BoundarySignal,
    t: f64,
    support_halves: usize,
) -> Result<f64> {
    let first = ((t - 2.0 * support_halves as f64) / 2.0).ceil().max(0.0) as usize;
    series_terms(alpha, sig, t, first)
}

fn series_terms(alpha: f64, sig: &BoundarySignal, t: f64, first: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "series oracle needs alpha in (0, 1], got {alpha}"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let lambda = (1.0 - alpha) / (1.0 + alpha);
    let last = (t / 2.0).floor() as usize;
    let mut sum = 0.0;
    let mut weight = (-lambda).powi(first as i32);
    for j in first..=last {
        sum += weight * sig.eval(t - 2.0 * j as f64);
        weight *= -lambda;
    }
    Ok(2.0 / (1.0 + alpha) * sum)
}

/// Implicit second-order solver on a delay-aligned grid.
///
/// With `h = fine_dt = 2/N`, the convolution `∫_0^2 Q_n(s) f(t_i-s) ds` is
/// replaced by `Σ_m w_m f_{i-m}` where `w_m = ∫ Q_n(s) φ_m(s) ds` integrates
/// the kernel against the piecewise-linear hat `φ_m` centred at `s = m h`.
/// Each step solves `(a₊ - w₀) f_i = g_i - a₋ f_{i-N} + Σ_{m≥1} w_m f_{i-m}`.
pub fn dense_volterra_solve(
    p: &ModeParams,
    sig: &BoundarySignal,
    fine_dt: f64,
    t_end: f64,
) -> Result<HistoryBuffer> {
    let per_delay = 2.0 / fine_dt;
    let n_delay = per_delay.round();
    if !(fine_dt > 0.0) || n_delay < 1.0 || (per_delay - n_delay).abs() > 1e-9 * per_delay {
        return Err(Error::Config(format!(
            "fine_dt = {fine_dt} must divide the delay 2 exactly"
        )));
    }
    let n_delay = n_delay as usize;
    let h = 2.0 / n_delay as f64;
    let weights = hat_weights(p, n_delay, h)?;
    let c = p.delay_coefficients();
    let diagonal = c.a_plus - weights[0];
    if diagonal.abs() <= 1e-14 * c.a_plus.abs().max(1.0) {
        return Err(Error::SingularStep(diagonal));
    }

    let steps = (t_end / h * (1.0 + 1e-12)).floor() as usize;
    let mut f = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let gi = sig.eval(i as f64 * h);
        let delayed = if i >= n_delay { f[i - n_delay] } else { 0.0 };
        let history: f64 = weights[1..]
            .iter()
            .enumerate()
            .take(i)
            .map(|(k, w)| w * f[i - 1 - k])
            .sum();
        f.push((gi - c.a_minus * delayed + history) / diagonal);
    }
    HistoryBuffer::from_values(h, 2, f)
}

fn hat_weights(p: &ModeParams, n_delay: usize, h: f64) -> Result<Vec<f64>> {
    let rule = gauss_legendre_rule(p.n + 2)?;
    let mut w = vec![0.0; n_delay + 1];
    for cell in 0..n_delay {
        let (a, b) = (cell as f64 * h, (cell + 1) as f64 * h);
        for (s, ws) in rule.mapped(a, b) {
            let q = p.q(s) * ws;
            let right = (s - a) / h;
            w[cell] += q * (1.0 - right);
            w[cell + 1] += q * right;
        }
    }
    Ok(w)
}

/// Richardson extrapolation `(4 f_{h/2} - f_h)/3` of [`dense_volterra_solve`]
/// on the coarse grid `fine_dt`.
pub fn dense_volterra_extrapolated(
    p: &ModeParams,
    sig: &BoundarySignal,
    fine_dt: f64,
    t_end: f64,
) -> Result<HistoryBuffer> {
    let coarse = dense_volterra_solve(p, sig, fine_dt, t_end)?;
    let fine = dense_volterra_solve(p, sig, fine_dt / 2.0, t_end)?;
    let values = coarse
        .values()
        .iter()
        .enumerate()
        .map(|(i, &c)| (4.0 * fine.values()[2 * i] - c) / 3.0)
        .collect();
    HistoryBuffer::from_values(coarse.dt(), 4, values)
}

/// `max |G_n f(t) - g(t)|` over grid points `t ∈ [2, t_end]`.
///
/// The operator is evaluated with every grid cell split into four panels of
/// `n + 4` Gauss nodes.
pub fn residual_norm(p: &ModeParams, f: &HistoryBuffer, sig: &BoundarySignal) -> Result<f64> {
    let last = f
        .last_time()
        .ok_or_else(|| Error::InsufficientHistory("empty history".into()))?;
    if last < 2.0 {
        return Err(Error::InsufficientHistory(format!(
            "history ends at {last}, residual needs t >= 2"
        )));
    }
    let quad = gauss_legendre_rule(p.n + 4)?;
    let first = (2.0 / f.dt()).ceil() as usize;
    let mut worst: f64 = 0.0;
    for i in first..f.len() {
        let t = f.time(i);
        let r = apply_operator_refined(p, f, t, &quad, 4)? - sig.eval(t);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mp(n: usize, a: f64, b: f64) -> ModeParams {
        ModeParams::new(n, a, b).unwrap()
    }

    #[test]
    fn series_examples() {
        let g = BoundarySignal::non_oscillatory();
        for t in [0.3, 1.0, 2.7, 7.1] {
            assert_eq!(series_solution_beta1(1.0, &g, t).unwrap(), g.eval(t));
        }
        for t in [0.1, 0.9, 1.5, 1.99] {
            assert_relative_eq!(
                series_solution_beta1(0.5, &g, t).unwrap(),
                2.0 * g.eval(t) / 1.5,
                max_relative = 1e-15
            );
        }
        let unit = BoundarySignal::unit_sample(1.0, 0.01).unwrap();
        for j in 0..5 {
            let got = series_solution_beta1(0.5, &unit, 1.0 + 2.0 * j as f64).unwrap();
            assert_relative_eq!(
                got,
                4.0 / 3.0 * (-1.0f64 / 3.0).powi(j),
                max_relative = 1e-14
            );
        }
        assert!(series_solution_beta1(0.0, &g, 1.0).is_err());
        assert!(series_solution_beta1(1.5, &g, 1.0).is_err());
    }

    #[test]
    fn supported_series_matches_full_sum() {
        let g =
            BoundarySignal::samples(0.0, 0.1, (0..=20).map(|i| (i as f64 * 0.3).sin()).collect())
                .unwrap();
        for t in [0.5, 3.3, 8.7, 15.05] {
            let full = series_solution_beta1(0.6, &g, t).unwrap();
            let short = series_solution_beta1_supported(0.6, &g, t, 2).unwrap();
            assert_relative_eq!(full, short, epsilon = 1e-15);
        }
    }

    #[test]
    fn dense_identity_and_zero() {
        let g = BoundarySignal::non_oscillatory();
        let f = dense_volterra_solve(&mp(0, 1.0, 1.0), &g, 2.0 / 200.0, 10.0).unwrap();
        for (t, v) in f.samples() {
            assert!((v - g.eval(t)).abs() <= 1e-13);
        }
        let z = dense_volterra_solve(&mp(2, 0.4, 0.1), &BoundarySignal::zero(), 0.02, 6.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(dense_volterra_solve(&mp(0, 1.0, 1.0), &g, 0.03, 1.0).is_err());
    }

    #[test]
    fn dense_second_order_against_series() {
        let g = BoundarySignal::non_oscillatory();
        let p = mp(0, 0.5, 1.0);
        let err = |h: f64| {
            let f = dense_volterra_solve(&p, &g, h, 10.0).unwrap();
            f.samples()
                .map(|(t, v)| (v - series_solution_beta1(0.5, &g, t).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        // The pure delay equation has no quadrature error: both agree exactly.
        assert!(err(0.02) <= 1e-13);
        // With a kernel present the scheme is second order.
        let q = mp(0, 1.0, 0.5);
        let reference = dense_volterra_extrapolated(&q, &g, 2.0 / 1600.0, 6.0).unwrap();
        let e = |h: f64| {
            let f = dense_volterra_solve(&q, &g, h, 6.0).unwrap();
            let stride = (h / reference.dt()).round() as usize;
            f.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - reference.values()[i * stride]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = e(2.0 / 200.0) / e(2.0 / 400.0);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn singular_step_detected() {
        // Q_0 = (1-β)/2 at s=0; a₊ - h(1-β)/4 vanishes for β = 1 - 4a₊/h.
        let h = 0.5;
        let p = ModeParams::new(0, 0.0, 0.0).unwrap();
        let mut bad = p;
        bad.beta = 1.0 - 4.0 * 0.5 / h;
        assert!(matches!(
            dense_volterra_solve(&bad, &BoundarySignal::non_oscillatory(), h, 3.0),
            Err(Error::SingularStep(_))
        ));
    }

    #[test]
    fn residual_examples() {
        let g = BoundarySignal::non_oscillatory();
        let dt = 97.0 / 6400.0;
        let p = mp(0, 1.0, 1.0);
        let values: Vec<f64> = (0..=660).map(|i| g.eval(i as f64 * dt)).collect();
        let f = HistoryBuffer::from_values(dt, 6, values.clone()).unwrap();
        assert!(residual_norm(&p, &f, &g).unwrap() <= 1e-12);

        let q = mp(0, 0.5, 0.5);
        let eps = 1e-3;
        let mut bumped = values.clone();
        bumped[400] += eps;
        let base = HistoryBuffer::from_values(dt, 6, values).unwrap();
        let pert = HistoryBuffer::from_values(dt, 6, bumped).unwrap();
        // Residual of the perturbed minus unperturbed data at the bumped node
        // is the operator applied to the bump: at least a₊ ε / 2.
        let zero = BoundarySignal::zero();
        let diff: Vec<f64> = pert
            .values()
            .iter()
            .zip(base.values())
            .map(|(a, b)| a - b)
            .collect();
        let bump = HistoryBuffer::from_values(dt, 6, diff).unwrap();
        let r = residual_norm(&q, &bump, &zero).unwrap();
        assert!(r >= 0.75 * eps / 2.0, "{r}");

        let short = HistoryBuffer::from_values(dt, 6, vec![0.0; 50]).unwrap();
        assert!(residual_norm(&p, &short, &g).is_err());
    }
}
