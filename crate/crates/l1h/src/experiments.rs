//! Benchmark experiments: seeded random instance generation, solver
//! comparisons against a shared objective reference, and near-zero
//! regularization runs that recover an exact sparse signal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{support_gram, sym_pinv_solve};
use crate::error::{Error, Result};
use crate::problem::{DenseMatrix, ProblemInstance, SolverConfig};
use crate::report::LongRow;
use crate::solver::{homotopy, solve_pg, SolveResult, SolveStatus};
use crate::vec_util::{l1_norm, linf_norm, norm, norm_sq};

/// Parameters of a random benchmark instance.
///
/// All randomness comes from an 8-round ChaCha generator keyed by `seed`,
/// with one substream per component in a fixed order: 0 for the matrix, 1
/// for the support, 2 for the signal values, 3 for the noise. Instances are
/// therefore portable across platforms and runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    /// Nonzero count of the planted signal.
    pub sbar: usize,
    /// Noise entries are uniform on `[-sigma, sigma]`; 0 means exactly no
    /// noise.
    pub sigma: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::invalid("m and n must be positive"));
        }
        if self.sbar == 0 || self.sbar > self.n {
            return Err(Error::invalid(format!(
                "sbar must satisfy 1 <= sbar <= n = {}, got {}",
                self.n, self.sbar
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Benchmark shape small enough for a laptop: a 1/5 linear scaling of
    /// the classic 1000 x 5000 compressed-sensing setup.
    pub fn desk_scale(seed: u64) -> InstanceSpec {
        InstanceSpec {
            m: 200,
            n: 1000,
            sbar: 20,
            sigma: 0.01,
            seed,
        }
    }
}

fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the instance determined by `spec`: matrix entries uniform on
/// `[-1, 1]`, a planted signal with `sbar` uniformly chosen support
/// coordinates and uniform nonzero values, noise uniform on
/// `[-sigma, sigma]`, and `b` assembled as matrix * signal + noise.
pub fn generate_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);

    let mut rng = component_rng(spec.seed, 0);
    let entries: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let matrix = DenseMatrix::new(m, n, entries)?;

    let mut rng = component_rng(spec.seed, 1);
    let mut support = rand::seq::index::sample(&mut rng, n, spec.sbar).into_vec();
    support.sort_unstable();

    let mut rng = component_rng(spec.seed, 2);
    let mut xbar = vec![0.0; n];
    for &j in &support {
        xbar[j] = loop {
            let v: f64 = rng.gen_range(-1.0..=1.0);
            if v != 0.0 {
                break v;
            }
        };
    }

    let z = if spec.sigma == 0.0 {
        vec![0.0; m]
    } else {
        let mut rng = component_rng(spec.seed, 3);
        (0..m)
            .map(|_| rng.gen_range(-spec.sigma..=spec.sigma))
            .collect()
    };

    ProblemInstance::from_ground_truth(matrix, xbar, z, Some(spec.seed))
}

/// Euclidean distance between an iterate and the planted signal.
pub fn recovery_error(x: &[f64], x_bar: &[f64]) -> Result<f64> {
    if x.len() != x_bar.len() {
        return Err(Error::dims(format!(
            "length mismatch: {} vs {}",
            x.len(),
            x_bar.len()
        )));
    }
    let diff: Vec<f64> = x.iter().zip(x_bar).map(|(a, b)| a - b).collect();
    Ok(norm(&diff))
}

/// Solver selection for benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Single inner solve at the target regularization.
    Pg,
    /// Continuation over a decreasing regularization sequence.
    Pgh,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pg => "pg",
            Method::Pgh => "pgh",
        }
    }

    /// Parses a method name. Only the two implemented solvers are accepted;
    /// the accelerated and continuation baselines from the wider literature
    /// are deliberately not implemented here.
    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "pg" => Ok(Method::Pg),
            "pgh" => Ok(Method::Pgh),
            other => Err(Error::invalid(format!(
                "unknown method '{other}': accelerated variants (adg, adgh) and the \
                 sparsa/fpc baselines are out of scope; use pg or pgh"
            ))),
        }
    }
}

/// Per-method outcome of a comparison run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub status: SolveStatus,
    pub total_inner_iterations: usize,
    pub total_matvecs: u64,
    pub final_phi: f64,
    /// `final_phi` minus the shared reference objective.
    pub phi_gap: f64,
    /// Distance to the planted signal; absent when the instance has none.
    pub recovery_error: Option<f64>,
    /// Inner iterations per stage; a single entry for plain inner solves.
    pub stage_iterations: Vec<usize>,
}

/// Summary of a comparison run, serialized as the comparison JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub spec: Option<InstanceSpec>,
    pub lambda_tgt: f64,
    pub eps: f64,
    /// Shared reference objective: best of a high-accuracy continuation
    /// solve and one support-restricted polish of its result.
    pub phi_star: f64,
    pub methods: Vec<MethodReport>,
}

/// Comparison outcome: the serializable report plus the full per-method
/// solve results for trace and figure output.
#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub report: ComparisonReport,
    pub results: Vec<(Method, SolveResult)>,
}

fn objective_raw(a: &DenseMatrix, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(ai, bi)| ai - bi).collect();
    0.5 * norm_sq(&r) + lambda * l1_norm(x)
}

/// One polish pass: re-solves the least-squares-plus-sign stationarity
/// system on the support of `x` and keeps the better objective.
fn polish_objective(a: &DenseMatrix, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let phi_x = objective_raw(a, b, lambda, x);
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    if support.is_empty() {
        return phi_x;
    }
    let atb = a.rmatvec(b);
    let gram = support_gram(a, &support);
    let rhs: Vec<f64> = support
        .iter()
        .map(|&j| atb[j] - lambda * x[j].signum())
        .collect();
    let xs = sym_pinv_solve(&gram, support.len(), &rhs);
    let mut candidate = vec![0.0; x.len()];
    for (&j, &v) in support.iter().zip(&xs) {
        candidate[j] = v;
    }
    phi_x.min(objective_raw(a, b, lambda, &candidate))
}

/// Reference objective at `config.lambda_tgt`: a continuation solve pushed
/// to residue 1e-12, followed by one polish pass.
pub fn reference_phi(base: &ProblemInstance, config: &SolverConfig) -> Result<f64> {
    let mut tight = config.clone();
    tight.eps = 1e-12;
    let mut p = base.fresh_clone();
    let res = homotopy(&mut p, &tight)?;
    Ok(polish_objective(
        p.op.matrix(),
        &p.b,
        config.lambda_tgt,
        &res.x,
    ))
}

fn run_method(
    base: &ProblemInstance,
    config: &SolverConfig,
    method: Method,
) -> Result<SolveResult> {
    let mut p = base.fresh_clone();
    match method {
        Method::Pg => solve_pg(&mut p, config),
        Method::Pgh => homotopy(&mut p, config),
    }
}

fn comparison_on(
    base: &ProblemInstance,
    config: &SolverConfig,
    methods: &[Method],
    spec: Option<InstanceSpec>,
) -> Result<ComparisonRun> {
    if methods.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }
    config.validate()?;
    let phi_star = reference_phi(base, config)?;
    let mut reports = Vec::with_capacity(methods.len());
    let mut results = Vec::with_capacity(methods.len());
    for &method in methods {
        let res = run_method(base, config, method)?;
        let rec = match &base.xbar {
            Some(xbar) => Some(recovery_error(&res.x, xbar)?),
            None => None,
        };
        reports.push(MethodReport {
            method,
            status: res.status,
            total_inner_iterations: res.total_inner_iterations,
            total_matvecs: res.total_matvecs,
            final_phi: res.final_phi,
            phi_gap: res.final_phi - phi_star,
            recovery_error: rec,
            stage_iterations: res.stages.iter().map(|s| s.inner_iterations).collect(),
        });
        results.push((method, res));
    }
    Ok(ComparisonRun {
        report: ComparisonReport {
            spec,
            lambda_tgt: config.lambda_tgt,
            eps: config.eps,
            phi_star,
            methods: reports,
        },
        results,
    })
}

/// Runs the requested methods on the instance generated from `spec`, all
/// from identical pristine copies with independent product counters.
pub fn run_comparison(
    spec: &InstanceSpec,
    config: &SolverConfig,
    methods: &[Method],
) -> Result<ComparisonRun> {
    let base = generate_instance(spec)?;
    comparison_on(&base, config, methods, Some(*spec))
}

/// [`run_comparison`] on an existing instance.
pub fn run_comparison_instance(
    base: &ProblemInstance,
    config: &SolverConfig,
    methods: &[Method],
) -> Result<ComparisonRun> {
    comparison_on(base, config, methods, None)
}

/// Default regularization target for noisy instances: four times the
/// largest magnitude of the adjoint applied to the noise.
pub fn default_lambda_tgt(problem: &ProblemInstance) -> Result<f64> {
    let z = problem.z.as_ref().ok_or_else(|| {
        Error::invalid("instance has no noise vector; pass an explicit lambda_tgt")
    })?;
    let noise_inf = linf_norm(&problem.op.matrix().rmatvec(z));
    if noise_inf == 0.0 {
        return Err(Error::invalid(
            "noise-free instance; pass an explicit lambda_tgt",
        ));
    }
    Ok(4.0 * noise_inf)
}

/// Long-format figure rows for every method in a comparison run: objective,
/// objective gap, residue, sparsity, and cumulative products per iteration.
pub fn figure_rows(run: &ComparisonRun) -> Vec<LongRow> {
    let mut rows = Vec::new();
    for (method, result) in &run.results {
        let name = method.name();
        for (i, rec) in result.trace.iter().enumerate() {
            let metrics = [
                ("phi", rec.phi),
                ("phi_gap", rec.phi - run.report.phi_star),
                ("omega", rec.omega),
                ("nnz", rec.nnz as f64),
                ("matvecs", rec.matvecs as f64),
            ];
            for (metric, value) in metrics {
                rows.push(LongRow {
                    method: name,
                    stage: rec.stage,
                    k: i,
                    metric,
                    value,
                });
            }
        }
    }
    rows
}

/// Outcome of a near-zero regularization run on a noise-free instance.
#[derive(Debug, Clone)]
pub struct BpRun {
    pub result: SolveResult,
    /// Largest magnitude of the adjoint applied to `b`, measured before the
    /// solve to set the target regularization.
    pub lambda0_estimate: f64,
    /// Distance to the planted signal at each stage boundary.
    pub stage_recovery: Vec<f64>,
}

/// Drives the continuation solver to a vanishing regularization
/// (`1e-10` of the initial one) on a noise-free instance, recording the
/// recovery error at every stage boundary. `eps` defaults to the stage
/// tolerance `delta * lambda_tgt`.
pub fn run_bp(spec: &InstanceSpec, eps: Option<f64>) -> Result<BpRun> {
    if spec.sigma != 0.0 {
        return Err(Error::invalid(
            "near-zero regularization runs require a noise-free instance (sigma = 0)",
        ));
    }
    let mut p = generate_instance(spec)?;
    let xbar = p.xbar.clone().expect("generated instances carry a signal");
    let lambda0_estimate = linf_norm(&p.op.matrix().rmatvec(&p.b));
    if lambda0_estimate == 0.0 {
        return Err(Error::invalid("instance data is identically zero"));
    }
    let lambda_tgt = 1e-10 * lambda0_estimate;
    let eps = eps.unwrap_or(crate::problem::DEFAULT_DELTA * lambda_tgt);
    let config = SolverConfig::for_problem(&p, lambda_tgt, eps);
    config.validate()?;
    let result = homotopy(&mut p, &config)?;
    let stage_recovery = result
        .stages
        .iter()
        .map(|st| {
            recovery_error(
                st.x_snapshot.as_ref().expect("stages keep snapshots"),
                &xbar,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BpRun {
        result,
        lambda0_estimate,
        stage_recovery,
    })
}

/// Least-squares line fit: returns (slope, intercept, r_squared). A constant
/// series is reported as perfectly fit.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::dims("fit inputs must have equal length"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("fit needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("fit inputs must be finite"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((slope, intercept, r2))
}
