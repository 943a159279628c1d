//! Brute-force verification oracles: restricted eigenvalues, the global
//! Lipschitz constant, an exact tiny-instance KKT solver, and the recovery
//! assumption diagnostic.
//!
//! Everything here works on the raw matrix and never touches an instance's
//! matvec counters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{DenseMatrix, ProblemInstance};
use crate::vec_util::{dot, l1_norm, linf_norm, nnz, norm_sq};

/// Extremal restricted eigenvalues of `A^T A` at sparsity level `s`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RestrictedSpectrum {
    pub s: usize,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// `rho_plus / rho_minus`, or +infinity when `rho_minus` is 0.
    pub kappa: f64,
}

/// Default cap on the number of enumerated supports.
pub const DEFAULT_ENUM_BUDGET: u64 = 1_000_000;

/// Default relative convergence tolerance for [`lipschitz_constant`].
pub const DEFAULT_POWER_TOL: f64 = 1e-10;

/// Column cap for the 3^n sign-pattern enumeration in [`kkt_oracle`].
pub const KKT_MAX_DIM: usize = 10;

const KKT_DUAL_SLACK: f64 = 1e-9;

/// Eigenvalues of a symmetric `s x s` row-major matrix by cyclic Jacobi
/// rotations, optionally with the orthogonal eigenvector matrix (columns).
/// A diagonal input is returned unchanged, so exact inputs stay exact.
fn jacobi_sym(mat: &[f64], s: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    debug_assert_eq!(mat.len(), s * s);
    let mut a = mat.to_vec();
    let mut v = if want_vectors {
        let mut id = vec![0.0; s * s];
        for i in 0..s {
            id[i * s + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };
    let frob = norm_sq(&a).sqrt();
    let off_tol = frob * 1e-15;
    for _sweep in 0..100 {
        let mut off_sq = 0.0;
        for p in 0..s {
            for q in (p + 1)..s {
                off_sq += a[p * s + q] * a[p * s + q];
            }
        }
        if off_sq.sqrt() <= off_tol {
            break;
        }
        for p in 0..s {
            for q in (p + 1)..s {
                let apq = a[p * s + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * s + p];
                let aqq = a[q * s + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for i in 0..s {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * s + p];
                    let aiq = a[i * s + q];
                    a[i * s + p] = c * aip - sn * aiq;
                    a[p * s + i] = a[i * s + p];
                    a[i * s + q] = sn * aip + c * aiq;
                    a[q * s + i] = a[i * s + q];
                }
                a[p * s + p] = app - t * apq;
                a[q * s + q] = aqq + t * apq;
                a[p * s + q] = 0.0;
                a[q * s + p] = 0.0;
                if let Some(vm) = v.as_mut() {
                    for i in 0..s {
                        let vip = vm[i * s + p];
                        let viq = vm[i * s + q];
                        vm[i * s + p] = c * vip - sn * viq;
                        vm[i * s + q] = sn * vip + c * viq;
                    }
                }
            }
        }
    }
    let vals = (0..s).map(|i| a[i * s + i]).collect();
    (vals, v)
}

/// Eigendecomposition of a symmetric matrix, reusable across many
/// pseudo-inverse solves against the same matrix.
struct SymEig {
    s: usize,
    vals: Vec<f64>,
    vecs: Vec<f64>,
    /// Eigenvalues at or below this magnitude are treated as zero.
    threshold: f64,
}

impl SymEig {
    fn new(mat: &[f64], s: usize) -> SymEig {
        let (vals, vecs) = jacobi_sym(mat, s, true);
        let vecs = vecs.unwrap();
        let vmax = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        SymEig {
            s,
            vals,
            vecs,
            threshold: vmax * 1e-12,
        }
    }

    /// Minimum-norm least-squares solution of `mat * x = rhs`.
    fn pinv_solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.s);
        let s = self.s;
        let mut x = vec![0.0; s];
        for (j, &lam) in self.vals.iter().enumerate() {
            if lam.abs() <= self.threshold {
                continue;
            }
            let proj: f64 = (0..s).map(|i| self.vecs[i * s + j] * rhs[i]).sum();
            let coef = proj / lam;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.vecs[i * s + j];
            }
        }
        x
    }
}

/// One-shot [`SymEig::pinv_solve`].
pub(crate) fn sym_pinv_solve(mat: &[f64], s: usize, rhs: &[f64]) -> Vec<f64> {
    SymEig::new(mat, s).pinv_solve(rhs)
}

/// `C(n, k)` if it is at most `cap`, else `None`.
fn binomial_at_most(n: usize, k: usize, cap: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
        if c > cap as u128 {
            return None;
        }
    }
    Some(c as u64)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] != i + n - k {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub(crate) fn support_gram(a: &DenseMatrix, support: &[usize]) -> Vec<f64> {
    let s = support.len();
    let m = a.nrows();
    let mut gram = vec![0.0; s * s];
    for (p, &jp) in support.iter().enumerate() {
        for (q, &jq) in support.iter().enumerate().skip(p) {
            let mut acc = 0.0;
            for i in 0..m {
                acc += a.entry(i, jp) * a.entry(i, jq);
            }
            gram[p * s + q] = acc;
            gram[q * s + p] = acc;
        }
    }
    gram
}

/// Extremal eigenvalues of all `s x s` Gram submatrices `A_S^T A_S`, by
/// exhaustive support enumeration.
pub fn restricted_eigs(a: &DenseMatrix, s: usize, budget: u64) -> Result<RestrictedSpectrum> {
    let n = a.ncols();
    if s < 1 || s > n {
        return Err(Error::invalid(format!(
            "sparsity level must satisfy 1 <= s <= {n}, got {s}"
        )));
    }
    if binomial_at_most(n, s, budget).is_none() {
        return Err(Error::Capacity(format!(
            "C({n}, {s}) exceeds the support enumeration budget {budget}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut support: Vec<usize> = (0..s).collect();
    loop {
        let gram = support_gram(a, &support);
        let (vals, _) = jacobi_sym(&gram, s, false);
        for v in vals {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !next_combination(&mut support, n) {
            break;
        }
    }
    let rho_minus = lo.max(0.0);
    let rho_plus = hi.max(0.0);
    let kappa = if rho_minus > 0.0 {
        rho_plus / rho_minus
    } else {
        f64::INFINITY
    };
    Ok(RestrictedSpectrum {
        s,
        rho_minus,
        rho_plus,
        kappa,
    })
}

/// Largest eigenvalue of `A^T A` by power iteration with a deterministic
/// all-ones start, certified by the eigen-residual `||A^T A v - lam v|| <=
/// tol * lam`. A start vector annihilated by `A^T A` falls back to canonical
/// basis vectors; the zero matrix yields 0.
pub fn lipschitz_constant(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::invalid(format!(
            "power iteration tolerance must be positive, got {tol}"
        )));
    }
    let n = a.ncols();
    'starts: for start in 0..=n {
        let mut v = if start == 0 {
            vec![1.0 / (n as f64).sqrt(); n]
        } else {
            let mut e = vec![0.0; n];
            e[start - 1] = 1.0;
            e
        };
        let mut lam = 0.0;
        for _ in 0..200_000 {
            let av = a.matvec(&v);
            let w = a.rmatvec(&av);
            let nw = norm_sq(&w).sqrt();
            if nw == 0.0 {
                continue 'starts;
            }
            lam = dot(&v, &w);
            let res_sq: f64 = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lam * vi) * (wi - lam * vi))
                .sum();
            if res_sq.sqrt() <= tol * lam.max(f64::MIN_POSITIVE) {
                return Ok(lam.max(0.0));
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
        }
        return Ok(lam.max(0.0));
    }
    Ok(0.0)
}

/// Exact minimizer of the tiny-instance objective, via 3^n sign-pattern
/// enumeration.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub x: Vec<f64>,
    pub phi: f64,
    pub support: Vec<usize>,
}

/// Enumerates every support/sign pattern `sigma` in `{-1,0,+1}^n`, solves the
/// stationarity system `A_S^T (A_S x_S - b) + lambda sigma_S = 0`
/// (minimum-norm least squares when singular), and keeps candidates whose
/// solved signs match `sigma` and whose off-support dual values satisfy
/// `|A_j^T (A x - b)| <= lambda (1 + 1e-9)`. Returns the accepted candidate
/// with smallest objective; ties break to the lexicographically smallest
/// support.
pub fn kkt_oracle(problem: &ProblemInstance, lambda: f64) -> Result<KktSolution> {
    let a = problem.op.matrix();
    let (m, n) = (a.nrows(), a.ncols());
    if n > KKT_MAX_DIM {
        return Err(Error::invalid(format!(
            "sign-pattern enumeration handles at most {KKT_MAX_DIM} columns, got {n}"
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    let b = &problem.b;
    let atb = a.rmatvec(b);
    let mut best: Option<KktSolution> = None;

    for mask in 0u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let gram = support_gram(a, &support);
        let eig = SymEig::new(&gram, s);
        for sign_bits in 0u32..(1u32 << s) {
            let sigma: Vec<f64> = (0..s)
                .map(|i| if sign_bits & (1 << i) != 0 { -1.0 } else { 1.0 })
                .collect();
            let rhs: Vec<f64> = support
                .iter()
                .zip(&sigma)
                .map(|(&j, sg)| atb[j] - lambda * sg)
                .collect();
            let x_s = eig.pinv_solve(&rhs);
            if x_s.iter().zip(&sigma).any(|(xi, sg)| xi * sg <= 0.0) {
                continue;
            }
            let mut x = vec![0.0; n];
            for (&j, &xi) in support.iter().zip(&x_s) {
                x[j] = xi;
            }
            let mut residual = vec![0.0; m];
            for i in 0..m {
                let mut acc = -b[i];
                for (&j, &xi) in support.iter().zip(&x_s) {
                    acc += a.entry(i, j) * xi;
                }
                residual[i] = acc;
            }
            let dual_ok = (0..n)
                .filter(|j| mask & (1 << j) == 0)
                .all(|j| a.col_dot(j, &residual).abs() <= lambda * (1.0 + KKT_DUAL_SLACK));
            if !dual_ok {
                continue;
            }
            let phi = 0.5 * norm_sq(&residual) + lambda * l1_norm(&x);
            let replace = match &best {
                None => true,
                Some(cur) => phi < cur.phi || (phi == cur.phi && support < cur.support),
            };
            if replace {
                best = Some(KktSolution {
                    x,
                    phi,
                    support: support.clone(),
                });
            }
        }
    }
    best.ok_or_else(|| {
        Error::OracleFailure("no sign pattern satisfied the stationarity and dual checks".into())
    })
}

/// Numeric evaluation of the recovery conditions for a ground-truth
/// instance.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub gamma: f64,
    pub delta_prime: f64,
    pub s_tilde: usize,
    pub sbar: usize,
    /// `||A^T z||_inf`.
    pub noise_inf: f64,
    /// `max{4, (gamma+1)/((1-delta')gamma-(1+delta'))} * noise_inf`.
    pub lambda_floor: f64,
    pub mixed_re_lhs: f64,
    pub mixed_re_rhs: f64,
    pub lambda_ok: bool,
    pub re_ok: bool,
    pub l_min: f64,
    pub l_min_ok: bool,
}

/// Checks `lambda_tgt >= lambda_floor` and the mixed restricted-eigenvalue
/// condition
/// `s_tilde > 16(gamma_inc rho+(sbar+2*s_tilde) + 2 rho+(s_tilde)) /
/// rho-(sbar+s_tilde) * (1+gamma) * sbar`,
/// reporting both sides of each. Also reports whether the default curvature
/// floor satisfies `l_min <= gamma_inc * rho+(sbar+2*s_tilde)`.
pub fn check_assumption(
    problem: &ProblemInstance,
    lambda_tgt: f64,
    gamma: f64,
    delta_prime: f64,
    s_tilde: usize,
    gamma_inc: f64,
    budget: u64,
) -> Result<AssumptionReport> {
    if !lambda_tgt.is_finite() || lambda_tgt <= 0.0 {
        return Err(Error::invalid("lambda_tgt must be positive"));
    }
    if !delta_prime.is_finite() || delta_prime <= 0.0 || delta_prime >= 1.0 {
        return Err(Error::invalid("delta_prime must lie in (0,1)"));
    }
    if !gamma.is_finite() || gamma <= (1.0 + delta_prime) / (1.0 - delta_prime) {
        return Err(Error::invalid(format!(
            "gamma must exceed (1+delta')/(1-delta') = {}",
            (1.0 + delta_prime) / (1.0 - delta_prime)
        )));
    }
    if s_tilde == 0 {
        return Err(Error::invalid("s_tilde must be positive"));
    }
    if !gamma_inc.is_finite() || gamma_inc <= 1.0 {
        return Err(Error::invalid("gamma_inc must exceed 1"));
    }
    let a = problem.op.matrix();
    let xbar = problem
        .xbar
        .as_ref()
        .ok_or_else(|| Error::invalid("assumption check requires ground truth xbar"))?;
    let z = problem
        .z
        .as_ref()
        .ok_or_else(|| Error::invalid("assumption check requires the noise vector z"))?;
    let sbar = nnz(xbar);

    let noise_inf = linf_norm(&a.rmatvec(z));
    let floor_const =
        4.0f64.max((gamma + 1.0) / ((1.0 - delta_prime) * gamma - (1.0 + delta_prime)));
    let lambda_floor = floor_const * noise_inf;
    let lambda_ok = lambda_tgt >= lambda_floor;

    let big = restricted_eigs(a, sbar + 2 * s_tilde, budget)?;
    let small = restricted_eigs(a, s_tilde, budget)?;
    let mid = restricted_eigs(a, sbar + s_tilde, budget)?;
    let mixed_re_lhs = s_tilde as f64;
    let mixed_re_rhs = if mid.rho_minus > 0.0 {
        16.0 * (gamma_inc * big.rho_plus + 2.0 * small.rho_plus) / mid.rho_minus
            * (1.0 + gamma)
            * sbar as f64
    } else {
        f64::INFINITY
    };
    let re_ok = mixed_re_lhs > mixed_re_rhs && big.rho_minus > 0.0;

    let l_min = a.max_col_norm_sq();
    let l_min_ok = l_min <= gamma_inc * big.rho_plus;

    Ok(AssumptionReport {
        gamma,
        delta_prime,
        s_tilde,
        sbar,
        noise_inf,
        lambda_floor,
        mixed_re_lhs,
        mixed_re_rhs,
        lambda_ok,
        re_ok,
        l_min,
        l_min_ok,
    })
}
