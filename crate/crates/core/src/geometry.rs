//! The `diag(1/x)` Riemannian structure of the product of simplices, in
//! corner-of-cube coordinates: per-player metric blocks, gradients of
//! scalar functions, the divergence of vector fields, and simplex volumes.
//!
//! The metric block of player `i` at `x` is
//! `G[l][k] = delta_{lk}/x_l + 1/x_0` with `x_0` the eliminated
//! coordinate, its determinant is `1/(x_0 * prod_l x_l)`, and its inverse
//! has the rank-one form `delta_{lk} x_l - x_l x_k`. The divergence of a
//! per-player field splits into a metric term with the closed-form log
//! derivative of `sqrt(det G)` plus the coordinate divergence, and the two
//! never mix coordinates across players.

use crate::error::{Error, Result};
use crate::game::{eff_payoff_field, payoff_field, EffProfile, Game, MixedProfile};

/// Metric block of player `i` at `x`: an `m_i x m_i` matrix.
pub fn metric_eff(x: &EffProfile, i: usize) -> Vec<Vec<f64>> {
    let block = x.block(i);
    let inv_x0 = 1.0 / x.mass_on_zero(i);
    let m = block.len();
    (0..m)
        .map(|l| {
            (0..m)
                .map(|k| if l == k { 1.0 / block[l] + inv_x0 } else { inv_x0 })
                .collect()
        })
        .collect()
}

/// Inverse metric block of player `i` at `x`.
pub fn metric_eff_inverse(x: &EffProfile, i: usize) -> Vec<Vec<f64>> {
    let block = x.block(i);
    let m = block.len();
    (0..m)
        .map(|l| {
            (0..m)
                .map(|k| {
                    let rank_one = -block[l] * block[k];
                    if l == k {
                        block[l] + rank_one
                    } else {
                        rank_one
                    }
                })
                .collect()
        })
        .collect()
}

/// Closed-form determinant of the metric block of player `i`.
pub fn metric_eff_det(x: &EffProfile, i: usize) -> f64 {
    1.0 / (x.mass_on_zero(i) * x.block(i).iter().product::<f64>())
}

/// Inner product of two tangent vectors of one full simplex block at `x`.
pub fn shah_inner(x_block: &[f64], u: &[f64], v: &[f64]) -> f64 {
    x_block
        .iter()
        .zip(u.iter().zip(v))
        .map(|(&x, (&a, &b))| a * b / x)
        .sum()
}

/// Gradient of a scalar function along the simplex of player `i`, from the
/// partial derivatives of the function in the ambient coordinates of that
/// block: `grad_a = x_a (d_a f - sum_b x_b d_b f)`. The result is tangent
/// (components sum to zero).
pub fn shah_gradient(partials: &[f64], x: &MixedProfile, i: usize) -> Result<Vec<f64>> {
    let block = x.block(i);
    if partials.len() != block.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} partials for a block of {} coordinates",
            partials.len(),
            block.len()
        )));
    }
    if !x.is_interior() {
        return Err(Error::Boundary("gradient requires an interior point".into()));
    }
    let mean: f64 = block.iter().zip(partials).map(|(&x, &d)| x * d).sum();
    Ok(block
        .iter()
        .zip(partials)
        .map(|(&x, &d)| x * (d - mean))
        .collect())
}

/// A vector field on the open corner of cube, one block per player.
pub trait EffVectorField {
    fn eval(&self, x: &EffProfile) -> Result<Vec<Vec<f64>>>;

    /// Diagonal of the Jacobian, `d F_{il} / d x_{il}`, if available
    /// analytically.
    fn diagonal_jacobian(&self, _x: &EffProfile) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Adapter turning a closure into a field without an analytic Jacobian.
pub struct ClosureField<F>(pub F);

impl<F: Fn(&EffProfile) -> Vec<Vec<f64>>> EffVectorField for ClosureField<F> {
    fn eval(&self, x: &EffProfile) -> Result<Vec<Vec<f64>>> {
        Ok((self.0)(x))
    }
}

/// The replicator field of a game in corner-of-cube coordinates,
/// `F_{il} = x_l (w_l - sum_k x_k w_k)` with `w` the reduced payoff field.
pub struct ReplicatorFieldEff<'a> {
    pub game: &'a Game,
}

impl EffVectorField for ReplicatorFieldEff<'_> {
    fn eval(&self, x: &EffProfile) -> Result<Vec<Vec<f64>>> {
        let w = eff_payoff_field(self.game, x)?;
        Ok(x.blocks()
            .iter()
            .zip(&w.blocks)
            .map(|(xb, wb)| {
                let mean: f64 = xb.iter().zip(wb).map(|(&a, &b)| a * b).sum();
                xb.iter().zip(wb).map(|(&a, &b)| a * (b - mean)).collect()
            })
            .collect())
    }

    fn diagonal_jacobian(&self, x: &EffProfile) -> Option<Vec<Vec<f64>>> {
        // the reduced payoff field of player i does not depend on block i,
        // so d F_{il} / d x_{il} = (w_l - mean) - x_l w_l
        let w = eff_payoff_field(self.game, x).ok()?;
        Some(
            x.blocks()
                .iter()
                .zip(&w.blocks)
                .map(|(xb, wb)| {
                    let mean: f64 = xb.iter().zip(wb).map(|(&a, &b)| a * b).sum();
                    xb.iter()
                        .zip(wb)
                        .map(|(&a, &b)| (b - mean) - a * b)
                        .collect()
                })
                .collect(),
        )
    }
}

/// How the coordinate derivatives of a field are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

/// Divergence of `field` at `x` with respect to the simplex metric:
/// per player, `sum_l [ d_l(log sqrt(det G)) F_l + d_l F_l ]`, summed over
/// players. The metric term is closed-form; the coordinate term uses the
/// field's analytic Jacobian diagonal or central finite differences with a
/// step scaled by the distance to the boundary.
pub fn shah_divergence(
    field: &dyn EffVectorField,
    x: &EffProfile,
    mode: JacobianMode,
) -> Result<f64> {
    let value = field.eval(x)?;
    for b in &value {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field output".into()));
        }
    }

    let mut div = 0.0;
    for (i, fb) in value.iter().enumerate() {
        let x0 = x.mass_on_zero(i);
        for (l, &f) in fb.iter().enumerate() {
            let xl = x.block(i)[l];
            div += 0.5 * (1.0 / x0 - 1.0 / xl) * f;
        }
    }

    match mode {
        JacobianMode::Analytic => {
            let diag = field.diagonal_jacobian(x).ok_or_else(|| {
                Error::ShapeMismatch("field provides no analytic Jacobian".into())
            })?;
            for b in &diag {
                div += b.iter().sum::<f64>();
            }
        }
        JacobianMode::FiniteDifference => {
            for i in 0..x.blocks().len() {
                let x0 = x.mass_on_zero(i);
                for l in 0..x.block(i).len() {
                    let xl = x.block(i)[l];
                    let room = xl.min(x0);
                    let h = (1e-6 * room).clamp(1e-9, 1e-6);
                    if h >= 0.5 * room {
                        return Err(Error::Boundary(format!(
                            "coordinate ({i},{l}) too close to the boundary for differencing"
                        )));
                    }
                    let mut hi = x.blocks().to_vec();
                    hi[i][l] += h;
                    let mut lo = x.blocks().to_vec();
                    lo[i][l] -= h;
                    let fp = field.eval(&EffProfile::new(hi)?)?;
                    let fm = field.eval(&EffProfile::new(lo)?)?;
                    if !fp[i][l].is_finite() || !fm[i][l].is_finite() {
                        return Err(Error::NonFinite("vector field output".into()));
                    }
                    div += (fp[i][l] - fm[i][l]) / (2.0 * h);
                }
            }
        }
    }
    Ok(div)
}

/// Divergence of the replicator field, in closed form. Two algebraically
/// equivalent routes are evaluated and cross-checked:
/// `0.5 sum_i sum_a (v_{ia} - u_i)` and
/// `-0.5 sum_i n_i v_i . (x_i - b_i)` with `b_i` the block barycenter.
pub fn replicator_divergence_analytic(g: &Game, x: &MixedProfile) -> Result<f64> {
    let v = payoff_field(g, x)?;
    let mut form_a = 0.0;
    let mut form_b = 0.0;
    for (i, vb) in v.blocks.iter().enumerate() {
        let n = g.action_counts()[i] as f64;
        let u: f64 = vb.iter().zip(x.block(i)).map(|(&a, &b)| a * b).sum();
        form_a += 0.5 * vb.iter().map(|&w| w - u).sum::<f64>();
        let centered: f64 = vb
            .iter()
            .zip(x.block(i))
            .map(|(&w, &p)| w * (p - 1.0 / n))
            .sum();
        form_b += -0.5 * n * centered;
    }
    if (form_a - form_b).abs() > 1e-10 {
        return Err(Error::InternalCheck(format!(
            "divergence routes disagree: {form_a} vs {form_b}"
        )));
    }
    Ok(form_a)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Volume of the m-dimensional open simplex under the `diag(1/x)` metric:
/// `pi^((m+1)/2) / Gamma((m+1)/2)`, evaluated exactly for integer and
/// half-integer arguments.
pub fn simplex_volume_shah(m: usize) -> f64 {
    assert!(m >= 1, "simplex dimension must be at least 1");
    let pi = std::f64::consts::PI;
    if m % 2 == 1 {
        let k = (m + 1) / 2;
        pi.powi(k as i32) / factorial(k - 1)
    } else {
        let k = m / 2;
        pi.powi(k as i32) * 4f64.powi(k as i32) * factorial(k) / factorial(2 * k)
    }
}

/// Chebyshev nodes and the constant weight of the n-point rule on `(0, 1)`
/// for the weight function `(x (1 - x))^(-1/2)`.
fn chebyshev_rule(n: usize) -> (Vec<f64>, f64) {
    let nodes = (1..=n)
        .map(|k| {
            let theta = (2.0 * k as f64 - 1.0) * std::f64::consts::PI / (2.0 * n as f64);
            0.5 * (1.0 + theta.cos())
        })
        .collect();
    (nodes, std::f64::consts::PI / n as f64)
}

/// Gauss-Legendre nodes and weights on `(0, 1)` by Newton iteration.
fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = 0.5 * (1.0 + x);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn sqrt_det_metric_m1(x: f64) -> f64 {
    1.0 / (x * (1.0 - x)).sqrt()
}

fn sqrt_det_metric_m2(x: f64, y: f64) -> f64 {
    1.0 / (x * y * (1.0 - x - y)).sqrt()
}

fn volume_quadrature_m1(n: usize) -> f64 {
    let (nodes, w) = chebyshev_rule(n);
    w * nodes
        .iter()
        .map(|&x| sqrt_det_metric_m1(x) * (x * (1.0 - x)).sqrt())
        .sum::<f64>()
}

fn volume_quadrature_m2(n: usize) -> f64 {
    // inner integral over y in (0, 1 - x) via the Chebyshev rule after
    // y = (1 - x) s; outer over x after x = xi^2, which absorbs the
    // remaining x^(-1/2) edge factor
    let (s_nodes, s_w) = chebyshev_rule(n);
    let (xi_nodes, xi_w) = gauss_legendre_rule(n);
    let inner = |x: f64| -> f64 {
        let c = 1.0 - x;
        s_w * s_nodes
            .iter()
            .map(|&s| c * sqrt_det_metric_m2(x, c * s) * (s * (1.0 - s)).sqrt())
            .sum::<f64>()
    };
    xi_nodes
        .iter()
        .zip(&xi_w)
        .map(|(&xi, &w)| w * 2.0 * xi * inner(xi * xi))
        .sum()
}

/// Quadrature cross-check of [`simplex_volume_shah`] for `m` in `{1, 2}`.
/// The integrand's inverse-square-root edge singularities are absorbed by
/// the node placement, so refinement from `points` to `2 * points` must
/// settle within `tol`; otherwise a non-convergence error is returned.
pub fn simplex_volume_numeric(m: usize, points: usize, tol: f64) -> Result<f64> {
    let points = points.max(2);
    let (coarse, fine) = match m {
        1 => (volume_quadrature_m1(points), volume_quadrature_m1(2 * points)),
        2 => (volume_quadrature_m2(points), volume_quadrature_m2(2 * points)),
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "numeric volume supports m in {{1, 2}}, got {m}"
            )))
        }
    };
    let delta = (fine - coarse).abs();
    if delta > tol {
        return Err(Error::QuadratureNotConverged { delta, tol });
    }
    Ok(fine)
}
