//! Problem data: dense matrices, matrix-vector accounting, and solver configuration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vec_util::{l1_norm, norm_sq};

/// Dense row-major matrix with finite 64-bit float entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    m: usize,
    n: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    /// Builds an `m x n` matrix from row-major entries.
    pub fn new(m: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if entries.len() != m * n {
            return Err(Error::dims(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                m * n,
                m,
                n,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(DenseMatrix { m, n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        DenseMatrix { m: n, n, entries }
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `A.v`. Panics if `v.len() != n`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "matvec input length");
        (0..self.m)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `A^T.u`. Panics if `u.len() != m`.
    pub fn rmatvec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.m, "rmatvec input length");
        let mut out = vec![0.0; self.n];
        for (i, &ui) in u.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += ui * a;
            }
        }
        out
    }

    /// Dot product of column `j` with `u`.
    pub fn col_dot(&self, j: usize, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.m, "col_dot input length");
        u.iter()
            .enumerate()
            .map(|(i, &ui)| ui * self.entry(i, j))
            .sum()
    }

    /// Largest squared column norm; the default curvature floor `L_min`.
    pub fn max_col_norm_sq(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.m).map(|i| self.entry(i, j).powi(2)).sum())
            .fold(0.0, f64::max)
    }
}

/// Dense operator that counts every application of `A` and `A^T`.
///
/// Counters start at zero and only increase.
#[derive(Debug, Clone)]
pub struct CountingOperator {
    matrix: DenseMatrix,
    forward_count: u64,
    adjoint_count: u64,
}

impl CountingOperator {
    pub fn new(matrix: DenseMatrix) -> Self {
        CountingOperator {
            matrix,
            forward_count: 0,
            adjoint_count: 0,
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `A.v`, incrementing the forward counter by exactly 1.
    pub fn matvec(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ncols() {
            return Err(Error::dims(format!(
                "matvec input has length {}, matrix has {} columns",
                v.len(),
                self.ncols()
            )));
        }
        self.forward_count += 1;
        Ok(self.matrix.matvec(v))
    }

    /// `A^T.u`, incrementing the adjoint counter by exactly 1.
    pub fn rmatvec(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.nrows() {
            return Err(Error::dims(format!(
                "rmatvec input has length {}, matrix has {} rows",
                u.len(),
                self.nrows()
            )));
        }
        self.adjoint_count += 1;
        Ok(self.matrix.rmatvec(u))
    }

    pub fn forward_count(&self) -> u64 {
        self.forward_count
    }

    pub fn adjoint_count(&self) -> u64 {
        self.adjoint_count
    }

    /// Forward plus adjoint applications so far.
    pub fn total_matvecs(&self) -> u64 {
        self.forward_count + self.adjoint_count
    }
}

/// A least-squares instance `b = A.xbar + z`, with optional ground truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub op: CountingOperator,
    pub b: Vec<f64>,
    pub xbar: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(
        matrix: DenseMatrix,
        b: Vec<f64>,
        xbar: Option<Vec<f64>>,
        z: Option<Vec<f64>>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let (m, n) = (matrix.nrows(), matrix.ncols());
        if b.len() != m {
            return Err(Error::dims(format!(
                "b has length {}, matrix has {} rows",
                b.len(),
                m
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("b entries must be finite"));
        }
        if let Some(x) = &xbar {
            if x.len() != n {
                return Err(Error::dims(format!(
                    "xbar has length {}, matrix has {} columns",
                    x.len(),
                    n
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("xbar entries must be finite"));
            }
        }
        if let Some(zv) = &z {
            if zv.len() != m {
                return Err(Error::dims(format!(
                    "z has length {}, matrix has {} rows",
                    zv.len(),
                    m
                )));
            }
            if zv.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("z entries must be finite"));
            }
        }
        Ok(ProblemInstance {
            op: CountingOperator::new(matrix),
            b,
            xbar,
            z,
            seed,
        })
    }

    /// Builds an instance with `b = A.xbar + z` computed exactly once here,
    /// so the stored `b` is bitwise consistent with the stored ground truth.
    pub fn from_ground_truth(
        matrix: DenseMatrix,
        xbar: Vec<f64>,
        z: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if xbar.len() != matrix.ncols() {
            return Err(Error::dims(format!(
                "xbar has length {}, matrix has {} columns",
                xbar.len(),
                matrix.ncols()
            )));
        }
        if z.len() != matrix.nrows() {
            return Err(Error::dims(format!(
                "z has length {}, matrix has {} rows",
                z.len(),
                matrix.nrows()
            )));
        }
        let b: Vec<f64> = matrix
            .matvec(&xbar)
            .iter()
            .zip(&z)
            .map(|(ax, zi)| ax + zi)
            .collect();
        ProblemInstance::new(matrix, b, Some(xbar), Some(z), seed)
    }

    pub fn nrows(&self) -> usize {
        self.op.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.op.ncols()
    }

    /// Copy of this instance with a fresh operator whose counters start at 0.
    pub fn fresh_clone(&self) -> Self {
        ProblemInstance {
            op: CountingOperator::new(self.op.matrix().clone()),
            b: self.b.clone(),
            xbar: self.xbar.clone(),
            z: self.z.clone(),
            seed: self.seed,
        }
    }

    /// `phi_lambda(x) = 0.5||Ax - b||^2 + lambda*||x||_1`; costs exactly one
    /// forward matvec. Use [`objective_from_residual`] when `Ax - b` is cached.
    pub fn objective(&mut self, lambda: f64, x: &[f64]) -> Result<f64> {
        check_lambda(lambda)?;
        let ax = self.op.matvec(x)?;
        let residual: Vec<f64> = ax.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        Ok(objective_from_residual(lambda, &residual, x))
    }

    /// Gradient of `f(x) = 0.5||Ax - b||^2` together with the residual
    /// `Ax - b`; costs exactly one forward and one adjoint matvec. The
    /// residual lets the caller evaluate `f(x)` without another matvec.
    pub fn gradient(&mut self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let ax = self.op.matvec(x)?;
        let residual: Vec<f64> = ax.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        let grad = self.op.rmatvec(&residual)?;
        Ok((grad, residual))
    }
}

/// `phi_lambda(x)` evaluated from a cached residual `Ax - b`; no matvec.
pub fn objective_from_residual(lambda: f64, residual: &[f64], x: &[f64]) -> f64 {
    0.5 * norm_sq(residual) + lambda * l1_norm(x)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// All solver tunables.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Target regularization weight.
    pub lambda_tgt: f64,
    /// Target optimality residue at the final stage.
    pub eps: f64,
    /// Stage decrease factor for lambda, in (0,1).
    pub eta: f64,
    /// Intermediate-stage tolerance factor (eps_hat = delta * lambda), in (0,1).
    pub delta: f64,
    /// Curvature floor L_min.
    pub l_min: f64,
    /// Line-search increase factor, > 1.
    pub gamma_inc: f64,
    /// Curvature decrease factor between iterations, >= 1.
    pub gamma_dec: f64,
    /// Iteration cap per inner solve.
    pub max_inner_iters: usize,
    /// Trial cap per line search.
    pub max_linesearch_steps: usize,
}

pub const DEFAULT_ETA: f64 = 0.7;
pub const DEFAULT_DELTA: f64 = 0.2;
pub const DEFAULT_GAMMA_INC: f64 = 2.0;
pub const DEFAULT_GAMMA_DEC: f64 = 2.0;
pub const DEFAULT_MAX_INNER_ITERS: usize = 100_000;
pub const DEFAULT_MAX_LINESEARCH_STEPS: usize = 200;

impl SolverConfig {
    /// Config with default continuation and line-search parameters.
    pub fn new(lambda_tgt: f64, eps: f64, l_min: f64) -> Self {
        SolverConfig {
            lambda_tgt,
            eps,
            eta: DEFAULT_ETA,
            delta: DEFAULT_DELTA,
            l_min,
            gamma_inc: DEFAULT_GAMMA_INC,
            gamma_dec: DEFAULT_GAMMA_DEC,
            max_inner_iters: DEFAULT_MAX_INNER_ITERS,
            max_linesearch_steps: DEFAULT_MAX_LINESEARCH_STEPS,
        }
    }

    /// Config with `l_min` taken from the instance's largest squared column
    /// norm.
    pub fn for_problem(problem: &ProblemInstance, lambda_tgt: f64, eps: f64) -> Self {
        SolverConfig::new(lambda_tgt, eps, problem.op.matrix().max_col_norm_sq())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(msg.to_string()))
            }
        };
        check(
            self.lambda_tgt.is_finite() && self.lambda_tgt > 0.0,
            "lambda_tgt must be positive",
        )?;
        check(
            self.eps.is_finite() && self.eps > 0.0,
            "eps must be positive",
        )?;
        check(
            self.eta.is_finite() && 0.0 < self.eta && self.eta < 1.0,
            "eta must lie in (0,1)",
        )?;
        check(
            self.delta.is_finite() && 0.0 < self.delta && self.delta < 1.0,
            "delta must lie in (0,1)",
        )?;
        check(
            self.l_min.is_finite() && self.l_min > 0.0,
            "l_min must be positive",
        )?;
        check(
            self.gamma_inc.is_finite() && self.gamma_inc > 1.0,
            "gamma_inc must exceed 1",
        )?;
        check(
            self.gamma_dec.is_finite() && self.gamma_dec >= 1.0,
            "gamma_dec must be at least 1",
        )?;
        check(
            self.max_inner_iters >= 1,
            "max_inner_iters must be positive",
        )?;
        check(
            self.max_linesearch_steps >= 1,
            "max_linesearch_steps must be positive",
        )?;
        Ok(())
    }
}
