//! The solver stack: adaptive line search, the proximal-gradient inner loop,
//! and the homotopy continuation driver that chains inner solves over a
//! decreasing regularization sequence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{ProblemInstance, SolverConfig};
use crate::prox::{optimality_residue, prox_step};
use crate::vec_util::{l1_norm, linf_norm, nnz, norm_sq};

/// Relative slack added to the line-search acceptance test so floating-point
/// ties cannot loop forever.
pub const LINE_SEARCH_SLACK: f64 = 1e-12;

/// Terminal state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted inner iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    /// Stage index: 0-based position of the inner solve in the continuation
    /// sequence (a plain inner solve uses the caller-supplied id).
    pub stage: usize,
    /// 0-based inner iteration index within the stage.
    pub k: usize,
    pub lambda: f64,
    /// Curvature constant accepted by the line search this iteration.
    pub m: f64,
    /// Objective at the new iterate.
    pub phi: f64,
    /// Optimality residue at the new iterate.
    pub omega: f64,
    /// Nonzero count of the new iterate.
    pub nnz: usize,
    /// Cumulative forward+adjoint products on the instance so far.
    pub matvecs: u64,
    /// Prox evaluations (line-search trials) spent this iteration.
    pub linesearch_steps: usize,
}

/// Outcome of one stage of the continuation sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub lambda: f64,
    /// Residue target for this stage.
    pub eps_hat: f64,
    pub inner_iterations: usize,
    /// Residue of the warm-start point at this stage's lambda.
    pub entry_omega: f64,
    pub final_omega: f64,
    /// Iterate at stage exit.
    pub x_snapshot: Option<Vec<f64>>,
}

/// Full outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    /// Final accepted curvature constant.
    pub m: f64,
    pub status: SolveStatus,
    /// Largest magnitude of the zero-point gradient; None for solves that do
    /// not start a continuation sequence.
    pub lambda0: Option<f64>,
    pub lambda_tgt: f64,
    pub eps: f64,
    pub final_phi: f64,
    pub final_omega: f64,
    pub total_inner_iterations: usize,
    /// Forward+adjoint products consumed by this solve.
    pub total_matvecs: u64,
    pub stages: Vec<StageReport>,
    pub trace: Vec<IterateRecord>,
}

/// Accepted line-search trial.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub x_plus: Vec<f64>,
    /// Accepted curvature constant.
    pub m: f64,
    /// Trials spent, including the accepted one.
    pub steps: usize,
    pub phi_plus: f64,
    /// Smooth part of `phi_plus`, cached for gradient reuse.
    pub f_plus: f64,
    /// `A x_plus - b`, cached for gradient reuse.
    pub residual_plus: Vec<f64>,
    /// Local upper model value at acceptance.
    pub psi_value: f64,
    /// Squared norm of the gradient mapping at acceptance.
    pub g_map_norm_sq: f64,
}

/// Per-iteration measurements exposed to observers.
#[derive(Debug)]
pub struct StepInfo<'a> {
    pub stage: usize,
    pub k: usize,
    pub lambda: f64,
    /// Curvature constant the line search started from.
    pub l_start: f64,
    /// Accepted curvature constant.
    pub m: f64,
    pub phi_prev: f64,
    pub phi_next: f64,
    pub psi_value: f64,
    pub g_map_norm_sq: f64,
    pub omega_next: f64,
    pub linesearch_steps: usize,
    pub x_prev: &'a [f64],
    pub x_next: &'a [f64],
    pub grad_prev: &'a [f64],
    pub grad_next: &'a [f64],
}

/// Receives every accepted iteration of a solve.
pub trait StepObserver {
    fn on_step(&mut self, info: &StepInfo<'_>);
}

/// Observer that discards everything.
pub struct NoopObserver;

impl StepObserver for NoopObserver {
    fn on_step(&mut self, _info: &StepInfo<'_>) {}
}

/// Finds the smallest curvature constant in `{l0, l0*gamma_inc, ...}` whose
/// prox step satisfies the local upper-model acceptance test
/// `phi(x_plus) <= psi + 1e-12 (1 + |phi(x_plus)|)`. Each trial costs exactly
/// one forward product; the accepted residual is returned for gradient reuse.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    problem: &mut ProblemInstance,
    lambda: f64,
    x: &[f64],
    grad: &[f64],
    f_x: f64,
    l0: f64,
    gamma_inc: f64,
    max_steps: usize,
) -> Result<LineSearchOutcome> {
    if !l0.is_finite() || l0 <= 0.0 {
        return Err(Error::invalid(format!(
            "line search needs a positive starting constant, got {l0}"
        )));
    }
    if !gamma_inc.is_finite() || gamma_inc <= 1.0 {
        return Err(Error::invalid(format!(
            "gamma_inc must exceed 1, got {gamma_inc}"
        )));
    }
    if max_steps == 0 {
        return Err(Error::invalid("max_steps must be positive"));
    }
    let mut l = l0;
    for step in 1..=max_steps {
        let ps = prox_step(lambda, l, x, grad, f_x)?;
        let ax = problem.op.matvec(&ps.x_plus)?;
        let residual_plus: Vec<f64> = ax.iter().zip(&problem.b).map(|(ai, bi)| ai - bi).collect();
        let f_plus = 0.5 * norm_sq(&residual_plus);
        let phi_plus = f_plus + lambda * l1_norm(&ps.x_plus);
        if phi_plus <= ps.psi_value + LINE_SEARCH_SLACK * (1.0 + phi_plus.abs()) {
            return Ok(LineSearchOutcome {
                g_map_norm_sq: norm_sq(&ps.g_map),
                x_plus: ps.x_plus,
                m: l,
                steps: step,
                phi_plus,
                f_plus,
                residual_plus,
                psi_value: ps.psi_value,
            });
        }
        l *= gamma_inc;
    }
    Err(Error::LineSearchFailed { max_steps })
}

/// Iterate state with the cached quantities that make an iteration cost
/// about three matrix-vector products.
struct IterState {
    x: Vec<f64>,
    grad: Vec<f64>,
    f_x: f64,
}

impl IterState {
    fn initial(problem: &mut ProblemInstance, x0: &[f64]) -> Result<IterState> {
        let n = problem.op.matrix().ncols();
        if x0.len() != n {
            return Err(Error::dims(format!(
                "starting point has length {}, expected {n}",
                x0.len()
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("starting point must be finite"));
        }
        let residual: Vec<f64> = if x0.iter().all(|&v| v == 0.0) {
            problem.b.iter().map(|bi| -bi).collect()
        } else {
            let ax = problem.op.matvec(x0)?;
            ax.iter().zip(&problem.b).map(|(ai, bi)| ai - bi).collect()
        };
        let grad = problem.op.rmatvec(&residual)?;
        Ok(IterState {
            x: x0.to_vec(),
            f_x: 0.5 * norm_sq(&residual),
            grad,
        })
    }

    fn phi(&self, lambda: f64) -> f64 {
        self.f_x + lambda * l1_norm(&self.x)
    }

    fn omega(&self, lambda: f64) -> Result<f64> {
        optimality_residue(lambda, &self.x, &self.grad)
    }
}

struct StageOutcome {
    m: f64,
    status: SolveStatus,
    iterations: usize,
    entry_omega: f64,
    final_omega: f64,
}

/// One inner solve: repeats line-search steps with the relaxed restart
/// `L_{k+1} = max(l_min, M_k / gamma_dec)` until the residue at the new
/// iterate drops to `eps_hat`. Always performs at least one iteration.
#[allow(clippy::too_many_arguments)]
fn run_stage(
    problem: &mut ProblemInstance,
    state: &mut IterState,
    lambda: f64,
    eps_hat: f64,
    l0: f64,
    config: &SolverConfig,
    stage: usize,
    trace: &mut Vec<IterateRecord>,
    observer: &mut dyn StepObserver,
) -> Result<StageOutcome> {
    let entry_omega = state.omega(lambda)?;
    let mut l = l0;
    let mut m = l0;
    let mut phi = state.phi(lambda);
    for k in 0..config.max_inner_iters {
        let ls = match line_search(
            problem,
            lambda,
            &state.x,
            &state.grad,
            state.f_x,
            l,
            config.gamma_inc,
            config.max_linesearch_steps,
        ) {
            Ok(ls) => ls,
            Err(Error::LineSearchFailed { .. }) => {
                return Ok(StageOutcome {
                    m,
                    status: SolveStatus::LineSearchFailed,
                    iterations: k,
                    entry_omega,
                    final_omega: state.omega(lambda)?,
                })
            }
            Err(e) => return Err(e),
        };
        let grad_plus = problem.op.rmatvec(&ls.residual_plus)?;
        let omega_plus = optimality_residue(lambda, &ls.x_plus, &grad_plus)?;
        observer.on_step(&StepInfo {
            stage,
            k,
            lambda,
            l_start: l,
            m: ls.m,
            phi_prev: phi,
            phi_next: ls.phi_plus,
            psi_value: ls.psi_value,
            g_map_norm_sq: ls.g_map_norm_sq,
            omega_next: omega_plus,
            linesearch_steps: ls.steps,
            x_prev: &state.x,
            x_next: &ls.x_plus,
            grad_prev: &state.grad,
            grad_next: &grad_plus,
        });
        trace.push(IterateRecord {
            stage,
            k,
            lambda,
            m: ls.m,
            phi: ls.phi_plus,
            omega: omega_plus,
            nnz: nnz(&ls.x_plus),
            matvecs: problem.op.total_matvecs(),
            linesearch_steps: ls.steps,
        });
        m = ls.m;
        l = (ls.m / config.gamma_dec).max(config.l_min);
        state.x = ls.x_plus;
        state.grad = grad_plus;
        state.f_x = ls.f_plus;
        phi = ls.phi_plus;
        if omega_plus <= eps_hat {
            return Ok(StageOutcome {
                m,
                status: SolveStatus::Converged,
                iterations: k + 1,
                entry_omega,
                final_omega: omega_plus,
            });
        }
    }
    Ok(StageOutcome {
        m,
        status: SolveStatus::MaxIterations,
        iterations: config.max_inner_iters,
        entry_omega,
        final_omega: state.omega(lambda)?,
    })
}

/// Result of a single inner solve at fixed regularization.
#[derive(Debug, Clone)]
pub struct ProxGradResult {
    pub x: Vec<f64>,
    pub m: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub entry_omega: f64,
    pub final_omega: f64,
    pub records: Vec<IterateRecord>,
}

/// Runs the inner solver at a fixed `lambda` until the residue drops to
/// `eps_hat`. Requires `l0 >= config.l_min`.
pub fn prox_grad(
    problem: &mut ProblemInstance,
    lambda: f64,
    eps_hat: f64,
    x0: &[f64],
    l0: f64,
    config: &SolverConfig,
    stage_id: usize,
) -> Result<ProxGradResult> {
    config.validate()?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    if !eps_hat.is_finite() || eps_hat <= 0.0 {
        return Err(Error::invalid(format!(
            "eps_hat must be finite and positive, got {eps_hat}"
        )));
    }
    if l0 < config.l_min {
        return Err(Error::invalid(format!(
            "l0 = {l0} is below the curvature floor {}",
            config.l_min
        )));
    }
    let mut state = IterState::initial(problem, x0)?;
    let mut trace = Vec::new();
    let out = run_stage(
        problem,
        &mut state,
        lambda,
        eps_hat,
        l0,
        config,
        stage_id,
        &mut trace,
        &mut NoopObserver,
    )?;
    Ok(ProxGradResult {
        x: state.x,
        m: out.m,
        status: out.status,
        iterations: out.iterations,
        entry_omega: out.entry_omega,
        final_omega: out.final_omega,
        records: trace,
    })
}

fn intermediate_stage_count(lambda0: f64, lambda_tgt: f64, eta: f64) -> usize {
    if lambda_tgt >= lambda0 {
        return 0;
    }
    ((lambda0 / lambda_tgt).ln() / (1.0 / eta).ln()).floor() as usize
}

/// Continuation solve: starts from zero at `lambda_0`, the largest magnitude
/// of the zero-point gradient, shrinks the regularization by `eta` per stage
/// with stage tolerance `delta * lambda`, warm-starting each stage from the
/// previous iterate and curvature estimate, then solves at `lambda_tgt` to
/// tolerance `eps`.
pub fn homotopy(problem: &mut ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    homotopy_observed(problem, config, &mut NoopObserver)
}

/// [`homotopy`] with an observer receiving every accepted iteration.
pub fn homotopy_observed(
    problem: &mut ProblemInstance,
    config: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<SolveResult> {
    config.validate()?;
    let mv_start = problem.op.total_matvecs();
    let n = problem.op.matrix().ncols();
    let zero = vec![0.0; n];
    let mut state = IterState::initial(problem, &zero)?;
    let lambda0 = linf_norm(&state.grad);
    let num_mid = intermediate_stage_count(lambda0, config.lambda_tgt, config.eta);

    let mut stages = Vec::with_capacity(num_mid + 1);
    let mut trace = Vec::new();
    let mut m_hat = config.l_min;
    let mut lambda = lambda0;
    let mut status = SolveStatus::Converged;
    let mut last_lambda = config.lambda_tgt;
    for stage in 0..=num_mid {
        let (lam, eps_hat) = if stage == num_mid {
            (config.lambda_tgt, config.eps)
        } else {
            lambda *= config.eta;
            (lambda, config.delta * lambda)
        };
        last_lambda = lam;
        let out = run_stage(
            problem, &mut state, lam, eps_hat, m_hat, config, stage, &mut trace, observer,
        )?;
        m_hat = out.m;
        stages.push(StageReport {
            lambda: lam,
            eps_hat,
            inner_iterations: out.iterations,
            entry_omega: out.entry_omega,
            final_omega: out.final_omega,
            x_snapshot: Some(state.x.clone()),
        });
        if out.status != SolveStatus::Converged {
            status = out.status;
            break;
        }
    }
    let final_phi = state.phi(last_lambda);
    let final_omega = state.omega(last_lambda)?;
    Ok(SolveResult {
        x: state.x,
        m: m_hat,
        status,
        lambda0: Some(lambda0),
        lambda_tgt: config.lambda_tgt,
        eps: config.eps,
        final_phi,
        final_omega,
        total_inner_iterations: stages.iter().map(|s| s.inner_iterations).sum(),
        total_matvecs: problem.op.total_matvecs() - mv_start,
        stages,
        trace,
    })
}

/// Plain inner solve at `lambda_tgt` from zero, without continuation. Useful
/// as the baseline the continuation scheme is measured against.
pub fn solve_pg(problem: &mut ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    solve_pg_observed(problem, config, &mut NoopObserver)
}

/// [`solve_pg`] with an observer receiving every accepted iteration.
pub fn solve_pg_observed(
    problem: &mut ProblemInstance,
    config: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<SolveResult> {
    config.validate()?;
    let mv_start = problem.op.total_matvecs();
    let n = problem.op.matrix().ncols();
    let zero = vec![0.0; n];
    let mut state = IterState::initial(problem, &zero)?;
    let mut trace = Vec::new();
    let out = run_stage(
        problem,
        &mut state,
        config.lambda_tgt,
        config.eps,
        config.l_min,
        config,
        0,
        &mut trace,
        observer,
    )?;
    let final_phi = state.phi(config.lambda_tgt);
    let stages = vec![StageReport {
        lambda: config.lambda_tgt,
        eps_hat: config.eps,
        inner_iterations: out.iterations,
        entry_omega: out.entry_omega,
        final_omega: out.final_omega,
        x_snapshot: Some(state.x.clone()),
    }];
    Ok(SolveResult {
        x: state.x,
        m: out.m,
        status: out.status,
        lambda0: None,
        lambda_tgt: config.lambda_tgt,
        eps: config.eps,
        final_phi,
        final_omega: out.final_omega,
        total_inner_iterations: out.iterations,
        total_matvecs: problem.op.total_matvecs() - mv_start,
        stages,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{kkt_oracle, lipschitz_constant, DEFAULT_POWER_TOL};
    use crate::problem::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(m: usize, n: usize, entries: Vec<f64>, b: Vec<f64>) -> ProblemInstance {
        ProblemInstance::new(
            DenseMatrix::new(m, n, entries).unwrap(),
            b,
            None,
            None,
            None,
        )
        .unwrap()
    }

    fn random_instance(m: usize, n: usize, seed: u64) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let b = (0..m).map(|_| rng.gen_range(-1.0f64..=1.0)).collect();
        instance(m, n, entries, b)
    }

    #[test]
    fn line_search_scalar_example() {
        let mut p = instance(1, 1, vec![1.0], vec![2.0]);
        let out = line_search(&mut p, 1.0, &[0.0], &[-2.0], 2.0, 1.0, 2.0, 200).unwrap();
        assert_eq!(out.x_plus, vec![1.0]);
        assert_eq!(out.m, 1.0);
        assert_eq!(out.steps, 1);
        assert_eq!(out.phi_plus, 1.5);
        assert_eq!(out.psi_value, 1.5);
        assert_eq!(out.residual_plus, vec![-1.0]);
        assert_eq!(out.g_map_norm_sq, 1.0);
    }

    #[test]
    fn line_search_accepts_immediately_at_global_curvature() {
        let mut p = random_instance(5, 8, 2);
        let lf = lipschitz_constant(p.op.matrix(), DEFAULT_POWER_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let (grad, residual) = p.gradient(&x).unwrap();
            let f_x = 0.5 * norm_sq(&residual);
            let out = line_search(&mut p, 0.3, &x, &grad, f_x, lf, 2.0, 200).unwrap();
            assert_eq!(out.steps, 1);
        }
    }

    #[test]
    fn line_search_reports_exhaustion() {
        let mut p = instance(1, 1, vec![1.0], vec![2.0]);
        let err = line_search(&mut p, 1.0, &[0.0], &[-2.0], 2.0, 1e-8, 2.0, 3).unwrap_err();
        match err {
            Error::LineSearchFailed { max_steps } => assert_eq!(max_steps, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn prox_grad_degenerate_lambda_converges_in_one_iteration() {
        let mut p = instance(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 2.0]);
        let config = SolverConfig::new(3.0, 1e-10, 1.0);
        let out = prox_grad(&mut p, 3.0, 1e-10, &[0.0, 0.0], 1.0, &config, 0).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, vec![0.0, 0.0]);
        assert_eq!(out.final_omega, 0.0);
        assert_eq!(out.records.len(), 1);
        let rec = &out.records[0];
        assert_eq!(rec.phi, 2.5);
        assert_eq!(rec.nnz, 0);
        assert_eq!(rec.m, 1.0);
        assert_eq!(rec.linesearch_steps, 1);
    }

    #[test]
    fn prox_grad_rejects_l0_below_floor() {
        let mut p = random_instance(4, 6, 9);
        let config = SolverConfig::for_problem(&p, 0.1, 1e-8);
        let low = config.l_min * 0.5;
        assert!(prox_grad(&mut p, 0.1, 1e-8, &[0.0; 6], low, &config, 0).is_err());
    }

    #[test]
    fn prox_grad_matches_enumeration_oracle() {
        let mut p = random_instance(8, 10, 31);
        let atb = p.op.matrix().rmatvec(&p.b);
        let lambda = 0.25 * linf_norm(&atb);
        let config = SolverConfig::for_problem(&p, lambda, 1e-10);
        let out = prox_grad(&mut p, lambda, 1e-10, &[0.0; 10], config.l_min, &config, 0).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        let oracle = kkt_oracle(&p, lambda).unwrap();
        let dist_sq: f64 = out
            .x
            .iter()
            .zip(&oracle.x)
            .map(|(a, o)| (a - o) * (a - o))
            .sum();
        assert!(
            dist_sq.sqrt() <= 1e-7,
            "distance to oracle minimizer: {}",
            dist_sq.sqrt()
        );
    }

    #[test]
    fn stage_count_floor_formula() {
        assert_eq!(intermediate_stage_count(483.4, 1.0, 0.7), 17);
        assert_eq!(intermediate_stage_count(1.0, 1.0, 0.7), 0);
        assert_eq!(intermediate_stage_count(1.0, 3.0, 0.7), 0);
    }

    #[test]
    fn homotopy_trivial_target_gives_single_stage() {
        let mut p = instance(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            vec![1.0, 2.0, 3.0],
        );
        let config = SolverConfig::new(3.0, 1e-9, 1.0);
        let res = homotopy(&mut p, &config).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert_eq!(res.lambda0, Some(3.0));
        assert_eq!(res.stages.len(), 1);
        assert_eq!(res.x, vec![0.0; 3]);
        assert_eq!(res.final_omega, 0.0);
        assert_eq!(res.total_inner_iterations, 1);
    }

    #[test]
    fn homotopy_stage_schedule_matches_floor_formula() {
        let mut p = instance(1, 1, vec![1.0], vec![483.4]);
        let config = SolverConfig::new(1.0, 1e-8, 1.0);
        let res = homotopy(&mut p, &config).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert_eq!(res.stages.len(), 18);
        for (i, pair) in res.stages.windows(2).enumerate() {
            assert!(
                pair[1].lambda < pair[0].lambda,
                "stage {} did not decrease lambda",
                i + 1
            );
        }
        for st in &res.stages[..17] {
            assert!((st.eps_hat - 0.2 * st.lambda).abs() <= 1e-15 * st.lambda);
            assert!(st.final_omega <= st.eps_hat);
        }
        assert_eq!(res.stages[17].lambda, 1.0);
        assert_eq!(res.stages[17].eps_hat, 1e-8);
    }

    struct InvariantObserver {
        l_min: f64,
        gamma_inc: f64,
        lf: f64,
        per_stage_steps: Vec<(usize, usize)>,
    }

    impl StepObserver for InvariantObserver {
        fn on_step(&mut self, info: &StepInfo<'_>) {
            assert!(info.l_start >= self.l_min);
            assert!(info.m >= info.l_start);
            assert!(
                info.m < self.gamma_inc * self.lf * (1.0 + 1e-9),
                "accepted constant {} exceeds {}",
                info.m,
                self.gamma_inc * self.lf
            );
            let slack = 1e-12 * (1.0 + info.phi_next.abs());
            assert!(info.phi_next <= info.psi_value + slack);
            assert!(
                info.phi_next <= info.phi_prev - info.g_map_norm_sq / (2.0 * info.m) + 2.0 * slack
            );
            match self.per_stage_steps.last_mut() {
                Some((stage, steps)) if *stage == info.stage => *steps += info.linesearch_steps,
                _ => self
                    .per_stage_steps
                    .push((info.stage, info.linesearch_steps)),
            }
        }
    }

    fn planted_instance(m: usize, n: usize, sbar: usize, seed: u64) -> ProblemInstance {
        crate::experiments::generate_instance(&crate::experiments::InstanceSpec {
            m,
            n,
            sbar,
            sigma: 0.01,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn inner_loop_invariants_hold_on_random_instance() {
        let mut p = planted_instance(40, 100, 4, 77);
        let lambda_tgt = crate::experiments::default_lambda_tgt(&p).unwrap();
        let config = SolverConfig::for_problem(&p, lambda_tgt, 1e-8);
        let lf = lipschitz_constant(p.op.matrix(), DEFAULT_POWER_TOL).unwrap();
        let mut obs = InvariantObserver {
            l_min: config.l_min,
            gamma_inc: config.gamma_inc,
            lf,
            per_stage_steps: Vec::new(),
        };
        let res = homotopy_observed(&mut p, &config, &mut obs).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        let budget_const = (lf / config.l_min).log2() + 1.0;
        for &(stage, steps) in &obs.per_stage_steps {
            let iters = res.stages[stage].inner_iterations;
            assert!(
                steps as f64 <= 2.0 * iters as f64 + budget_const,
                "stage {stage}: {steps} trials over {iters} iterations"
            );
        }
        for pair in res.trace.windows(2) {
            assert!(pair[1].matvecs > pair[0].matvecs);
            if pair[1].stage == pair[0].stage {
                assert_eq!(pair[1].k, pair[0].k + 1);
                let slack = 1e-12 * (1.0 + pair[0].phi.abs());
                assert!(pair[1].phi <= pair[0].phi + slack);
            }
        }
    }

    #[test]
    fn warm_start_entry_residue_is_bounded() {
        let mut p = planted_instance(40, 100, 4, 13);
        let lambda_tgt = crate::experiments::default_lambda_tgt(&p).unwrap();
        let config = SolverConfig::for_problem(&p, lambda_tgt, 1e-9);
        let res = homotopy(&mut p, &config).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert!(res.stages.len() > 2);
        let factor = (config.delta + 1.0 - config.eta) / config.eta;
        for st in &res.stages[1..] {
            assert!(
                st.entry_omega <= factor * st.lambda * (1.0 + 1e-10),
                "entry residue {} exceeds {} at lambda {}",
                st.entry_omega,
                factor * st.lambda,
                st.lambda
            );
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let p0 = random_instance(12, 30, 4);
        let atb = p0.op.matrix().rmatvec(&p0.b);
        let lambda_tgt = 0.1 * linf_norm(&atb);
        let config = SolverConfig::for_problem(&p0, lambda_tgt, 1e-9);
        let mut p1 = p0.fresh_clone();
        let mut p2 = p0.fresh_clone();
        let r1 = homotopy(&mut p1, &config).unwrap();
        let r2 = homotopy(&mut p2, &config).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn plain_inner_solve_matches_continuation_answer() {
        let mut p1 = planted_instance(30, 60, 3, 8);
        let mut p2 = p1.fresh_clone();
        let lambda_tgt = crate::experiments::default_lambda_tgt(&p1).unwrap();
        let config = SolverConfig::for_problem(&p1, lambda_tgt, 1e-10);
        let rh = homotopy(&mut p1, &config).unwrap();
        let rp = solve_pg(&mut p2, &config).unwrap();
        assert_eq!(rh.status, SolveStatus::Converged);
        assert_eq!(rp.status, SolveStatus::Converged);
        assert_eq!(rp.lambda0, None);
        assert_eq!(rp.stages.len(), 1);
        let dist_sq: f64 = rh.x.iter().zip(&rp.x).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(
            dist_sq.sqrt() <= 1e-6,
            "solvers disagree: {}",
            dist_sq.sqrt()
        );
    }
}
