//! Proximal primitives: soft-thresholding, the local quadratic model psi,
//! the prox step T, the composite gradient mapping g, and the optimality
//! residue omega.

use crate::error::{Error, Result};
use crate::vec_util::{dot, l1_norm, norm_sq};

/// Output of one prox step at curvature `L`.
#[derive(Debug, Clone)]
pub struct ProxStepOutput {
    /// `T_{lambda,L}(x)`, the minimizer of the local model.
    pub x_plus: Vec<f64>,
    /// Composite gradient mapping `g = L*(x - x_plus)`, exact by construction.
    pub g_map: Vec<f64>,
    /// `psi_{lambda,L}(x; x_plus)`, the local model value at the minimizer.
    pub psi_value: f64,
}

/// Coordinatewise shrinkage `sgn(v_i)*max(|v_i| - alpha, 0)`.
///
/// Coordinates with `|v_i| <= alpha` map to exactly `+0.0`, ties included.
pub fn soft_threshold(v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!(
            "soft-threshold level must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(v.iter()
        .map(|&vi| {
            let t = vi.abs() - alpha;
            if t > 0.0 {
                vi.signum() * t
            } else {
                0.0
            }
        })
        .collect())
}

/// One prox step: `x_plus = soft_threshold(x - grad/L, lambda/L)` together
/// with the gradient mapping and the model value
/// `psi = f_x + grad.(x_plus - x) + (L/2)||x_plus - x||^2 + lambda*||x_plus||_1`.
///
/// `grad` must be the gradient of `f` at `x` and `f_x = f(x)`. No matvec is
/// consumed.
pub fn prox_step(lambda: f64, l: f64, x: &[f64], grad: &[f64], f_x: f64) -> Result<ProxStepOutput> {
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::invalid(format!(
            "prox curvature must be finite and positive, got {l}"
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if x.len() != grad.len() {
        return Err(Error::dims(format!(
            "x has length {}, grad has length {}",
            x.len(),
            grad.len()
        )));
    }
    let target: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - gi / l).collect();
    let x_plus = soft_threshold(&target, lambda / l)?;
    let g_map: Vec<f64> = x
        .iter()
        .zip(&x_plus)
        .map(|(xi, pi)| l * (xi - pi))
        .collect();
    let step: Vec<f64> = x_plus.iter().zip(x).map(|(pi, xi)| pi - xi).collect();
    let psi_value = f_x + dot(grad, &step) + 0.5 * l * norm_sq(&step) + lambda * l1_norm(&x_plus);
    Ok(ProxStepOutput {
        x_plus,
        g_map,
        psi_value,
    })
}

/// Golden-section minimization of `0.5*L*(t - v)^2 + lambda*|t|` over a
/// bracketing interval, to absolute accuracy `tol` in `t`. A scalar oracle
/// for the soft-thresholding closed form.
///
/// The probe comparison evaluates `h(c) - h(d)` in a factored form whose
/// rounding error scales with the difference itself, not with `h`, so the
/// bracket keeps contracting reliably below the square-root-of-epsilon floor
/// of naive evaluation.
pub fn golden_section_prox(v: f64, lambda: f64, l: f64, tol: f64) -> Result<f64> {
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::invalid(format!(
            "prox curvature must be finite and positive, got {l}"
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::invalid(format!(
            "tolerance must be finite and positive, got {tol}"
        )));
    }
    let hdiff =
        |c: f64, d: f64| 0.5 * l * (c - d) * ((c - v) + (d - v)) + lambda * (c.abs() - d.abs());
    let bound = v.abs() + lambda / l + 1.0;
    let (mut a, mut b) = (-bound, bound);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    while b - a > tol {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if hdiff(c, d) < 0.0 {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

/// Optimality residue `omega_lambda(x) = min over subgradients xi of
/// ||grad + lambda*xi||_inf`, via its coordinatewise closed form:
/// `|grad_i + lambda*sgn(x_i)|` at nonzero coordinates and
/// `max(|grad_i| - lambda, 0)` at zero coordinates. O(n), no matvec.
pub fn optimality_residue(lambda: f64, x: &[f64], grad: &[f64]) -> Result<f64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if x.len() != grad.len() {
        return Err(Error::dims(format!(
            "x has length {}, grad has length {}",
            x.len(),
            grad.len()
        )));
    }
    Ok(x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            if xi != 0.0 {
                (gi + lambda * xi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max))
}
