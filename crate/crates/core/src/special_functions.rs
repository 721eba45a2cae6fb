//! Legendre polynomials, Gauss-Legendre quadrature and Lagrange
//! interpolation/integration weights.

use crate::error::{Error, Result};

/// Evaluates `(P_n(z), P_n'(z))`.
///
/// Both values come from recurrences: Bonnet's three-term recurrence for
/// `P_n` and `P'_{k+1} = P'_{k-1} + (2k+1) P_k` for the derivative. The
/// derivative recurrence has no `1/(1-z²)` factor, so it stays accurate at
/// `z = ±1` where the mode kernels are evaluated most often.
pub fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    // p0 = P_{k-1}, p1 = P_k; d0 = P'_{k-1}, d1 = P'_k
    let (mut p0, mut p1) = (1.0, z);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights affinely mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// `∫_a^b f` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Builds the `m`-node Gauss-Legendre rule by Newton iteration on `P_m`.
pub fn gauss_legendre_rule(m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::Domain(
            "quadrature rule needs at least one node".into(),
        ));
    }
    let mf = m as f64;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    // Roots are symmetric; compute the upper half and mirror.
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_pair(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - i] = x;
        weights[m - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

fn check_distinct(nodes: &[f64]) -> Result<()> {
    for (i, a) in nodes.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidStencil(format!("node {i} is not finite")));
        }
        for (j, b) in nodes.iter().enumerate().skip(i + 1) {
            if a == b {
                return Err(Error::InvalidStencil(format!(
                    "nodes {i} and {j} coincide at {a}"
                )));
            }
        }
    }
    Ok(())
}

/// Cardinal-basis values `ℓ_i(t)` for the interpolant through `nodes`.
///
/// `Σ w_i f(nodes_i)` is the interpolating polynomial of degree `N-1`
/// evaluated at `t`. Works for any stencil size; the solvers use 2, 4 and 6.
pub fn lagrange_value_weights<const N: usize>(nodes: &[f64; N], t: f64) -> Result<[f64; N]> {
    check_distinct(nodes)?;
    Ok(cardinal_values(nodes, t))
}

// Caller guarantees distinct nodes.
pub(crate) fn cardinal_values<const N: usize>(nodes: &[f64; N], t: f64) -> [f64; N] {
    let mut w = [0.0; N];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut num = 1.0;
        let mut den = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if j != i {
                num *= t - xj;
                den *= nodes[i] - xj;
            }
        }
        *wi = num / den;
    }
    w
}

/// Weights `v_i` with `Σ v_i f(nodes_i) = ∫_a^b p(t) dt`, `p` the interpolant.
pub fn lagrange_integral_weights<const N: usize>(
    nodes: &[f64; N],
    a: f64,
    b: f64,
) -> Result<[f64; N]> {
    check_distinct(nodes)?;
    Ok(cardinal_integrals(nodes, a, b))
}

pub(crate) fn cardinal_integrals<const N: usize>(nodes: &[f64; N], a: f64, b: f64) -> [f64; N] {
    let mut v = [0.0; N];
    if a == b {
        return v;
    }
    // ceil(N/2) nodes integrate degree N-1 exactly.
    let rule = gauss_legendre_rule(N.div_ceil(2).max(1)).expect("positive node count");
    for (x, w) in rule.mapped(a, b) {
        let l = cardinal_values(nodes, x);
        for (vi, li) in v.iter_mut().zip(l) {
            *vi += w * li;
        }
    }
    v
}

/// Slice form of [`cardinal_values`] for stencils whose size is only known at
/// run time (start-up ramps).
pub(crate) fn cardinal_values_dyn(nodes: &[f64], t: f64, out: &mut [f64]) {
    for i in 0..nodes.len() {
        let mut num = 1.0;
        let mut den = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if j != i {
                num *= t - xj;
                den *= nodes[i] - xj;
            }
        }
        out[i] = num / den;
    }
}

/// Slice form of [`cardinal_integrals`].
pub(crate) fn cardinal_integrals_dyn(nodes: &[f64], a: f64, b: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if a == b {
        return;
    }
    let rule = gauss_legendre_rule(nodes.len().div_ceil(2).max(1)).expect("positive node count");
    let mut l = [0.0; 16];
    for (x, w) in rule.mapped(a, b) {
        cardinal_values_dyn(nodes, x, &mut l[..nodes.len()]);
        for (vi, li) in out.iter_mut().zip(&l) {
            *vi += w * li;
        }
    }
}
