use modecfie::experiment::{convergence_study, Settings, SignalChoice};
use modecfie::mode_equation::{BoundarySignal, ModeParams};
use modecfie::oracles::residual_norm;
use modecfie::time_solver::{solve_mode, solve_mode0_correction_form, HistoryBuffer, SolverConfig};

const DT: f64 = 97.0 / 6400.0;

fn mode0(alpha: f64, beta: f64, dt: f64, order: usize) -> HistoryBuffer {
    let cfg = SolverConfig::new(dt, order, 10.0).unwrap();
    solve_mode0_correction_form(alpha, beta, &BoundarySignal::non_oscillatory(), &cfg).unwrap()
}

fn coarse_gap(coarse: &HistoryBuffer, fine: &HistoryBuffer) -> f64 {
    coarse
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.values()[2 * i]).abs())
        .fold(0.0, f64::max)
}

fn sup(h: &HistoryBuffer) -> f64 {
    h.values().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[test]
fn halving_the_figure_step_changes_seven_digits_at_most() {
    for (alpha, beta) in [(1.0, 0.0), (1.0, 0.5), (0.5, 1.0)] {
        let coarse = mode0(alpha, beta, DT, 6);
        let fine = mode0(alpha, beta, DT / 2.0, 6);
        let gap = coarse_gap(&coarse, &fine);
        assert!(
            gap <= 1e-7 * sup(&fine),
            "({alpha},{beta}): {gap:e} vs max {}",
            sup(&fine)
        );
    }
}

#[test]
fn residual_shrinks_like_a_sixth_order_method() {
    let p = ModeParams::new(0, 1.0, 0.5).unwrap();
    let sig = BoundarySignal::non_oscillatory();
    let mut consts = Vec::new();
    for dt in [2.0 * DT, DT] {
        let h = mode0(1.0, 0.5, dt, 6);
        let r = residual_norm(&p, &h, &sig).unwrap();
        consts.push((dt, r, r / dt.powi(6)));
    }
    for &(_, _, c) in &consts {
        assert!(c.is_finite() && c > 0.0, "{consts:?}");
    }
    let ratio = consts[0].1 / consts[1].1;
    assert!(ratio > 16.0, "{consts:?}");
}

#[test]
fn orders_two_four_six_agree_within_their_estimates() {
    let runs: Vec<(usize, HistoryBuffer, f64)> = [2usize, 4, 6]
        .into_iter()
        .map(|order| {
            let h = mode0(1.0, 0.5, DT, order);
            let half = mode0(1.0, 0.5, DT / 2.0, order);
            let scale = 2f64.powi(order as i32);
            let estimate = coarse_gap(&h, &half) * scale / (scale - 1.0);
            (order, h, estimate)
        })
        .collect();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (p, hp, ep) = &runs[i];
            let (q, hq, eq) = &runs[j];
            let diff = hp
                .values()
                .iter()
                .zip(hq.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                diff <= 2.0 * (ep + eq),
                "orders {p} and {q}: {diff:e} vs {ep:e} + {eq:e}"
            );
        }
    }
}

#[test]
fn higher_modes_decay_and_converge_at_sixth_order() {
    let sig = BoundarySignal::non_oscillatory();
    let cfg = SolverConfig::new(DT, 6, 10.0).unwrap();
    for n in 1..=3 {
        let h = solve_mode(&ModeParams::new(n, 1.0, 0.5).unwrap(), &sig, &cfg).unwrap();
        let early = h
            .samples()
            .filter(|&(t, _)| t <= 3.0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let late = h
            .samples()
            .filter(|&(t, _)| t >= 8.0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert!(late < 0.05 * early, "n = {n}: {late} vs {early}");
    }
    let s = Settings {
        n: 1,
        alpha: 1.0,
        beta: 0.5,
        dt: 97.0 / 3200.0,
        levels: 3,
        signal: SignalChoice::NonOscillatory,
        ..Default::default()
    };
    let rows = convergence_study(&s).unwrap();
    for r in &rows[1..] {
        let p = r.observed_order.unwrap();
        assert!((5.0..=7.0).contains(&p), "{rows:?}");
    }
}

#[test]
fn oscillatory_figure_cases() {
    let cfg = SolverConfig::new(97.0 / 12800.0, 6, 10.0).unwrap();
    let sig = BoundarySignal::oscillatory();
    let decaying = solve_mode(&ModeParams::new(0, 1.0, 0.5).unwrap(), &sig, &cfg).unwrap();
    let fit = modecfie::laplace_analysis::fit_decay_rate(&decaying, (4.0, 10.0)).unwrap();
    assert!(fit.rate > 0.2, "{fit:?}");
    let sustained = solve_mode0_correction_form(0.0, 0.0, &sig, &cfg).unwrap();
    let fit = modecfie::laplace_analysis::fit_decay_rate(&sustained, (4.0, 10.0)).unwrap();
    assert!(fit.rate < 0.02, "{fit:?}");
}
