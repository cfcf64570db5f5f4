//! Single runs and convergence studies.

use std::ops::ControlFlow;
use std::sync::Arc;

use crate::adaptive::{adaptive_loop, AdaptConfig, AdaptStats, AdaptiveStepper, StepRecord};
use crate::error::{invalid, Error, Result};
use crate::fem::{discrete_time_norm, error_norm, ErrorKind, FieldVector, TimeNorm};
use crate::harness::config::{ExperimentConfig, PolicyKind, ProblemKind, SchemeKind};
use crate::harness::policy::{rate_table, steps_covering, RateRow};
use crate::harness::problems::{manufactured2d, random2d, wave1d, AtTime, ExactSolution, TestProblem};
use crate::model::Problem;
use crate::modified::{midpoint_step, ModifiedDln, Nonlinearity};
use crate::sav::DlnSav;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: FieldVector,
}

/// Everything recorded along one run. Level `n` is the solution at
/// `times[n]`; `steps[n] = times[n + 1] - times[n]`.
pub struct RunReport {
    pub scheme: SchemeKind,
    pub theta: f64,
    pub mesh_n: usize,
    pub problem: Arc<Problem>,
    pub times: Vec<f64>,
    pub steps: Vec<f64>,
    /// Scheme energy at levels `1..`, which needs two solutions.
    pub energy: Vec<f64>,
    /// Per-level L2 and H1 errors (empty without an exact solution).
    pub err_l2: Vec<f64>,
    pub err_h1: Vec<f64>,
    /// `[l_inf(L2), l_2(L2), l_2(H1)]`
    pub norms: Option<[f64; 3]>,
    pub records: Vec<StepRecord>,
    pub adapt: Option<AdaptStats>,
    pub snapshots: Vec<Snapshot>,
    pub final_u: FieldVector,
    /// Time at which the steady-state test first held.
    pub steady_time: Option<f64>,
}

impl RunReport {
    pub fn k_max(&self) -> f64 {
        self.steps.iter().fold(0.0, |m: f64, &k| m.max(k))
    }

    /// Accepted steps, the starting step included.
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn rejections(&self) -> usize {
        self.adapt.as_ref().map_or(0, |a| a.rejections)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least one level")
    }

    /// Largest energy increase between consecutive levels (0 if none).
    pub fn max_energy_increase(&self) -> f64 {
        self.energy.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

struct Monitor<'a> {
    problem: &'a Problem,
    exact: Option<&'a dyn ExactSolution>,
    report_times: Vec<f64>,
    steps: Vec<f64>,
    energy: Vec<f64>,
    err_l2: Vec<f64>,
    err_h1: Vec<f64>,
    snapshot_times: Vec<f64>,
    snapshots: Vec<Snapshot>,
    steady_tol: Option<f64>,
    steady_time: Option<f64>,
    last: FieldVector,
}

impl<'a> Monitor<'a> {
    fn new(tp: &'a TestProblem, cfg: &ExperimentConfig) -> Result<Self> {
        let mut snapshot_times = cfg.snapshot_times.clone();
        snapshot_times.sort_by(f64::total_cmp);
        let mut m = Self {
            problem: &tp.problem,
            exact: tp.exact.as_deref(),
            report_times: vec![],
            steps: vec![],
            energy: vec![],
            err_l2: vec![],
            err_h1: vec![],
            snapshot_times,
            snapshots: vec![],
            steady_tol: cfg.steady_tol,
            steady_time: None,
            last: tp.u0.clone(),
        };
        m.level(tp.t0, &tp.u0)?;
        Ok(m)
    }

    fn level(&mut self, t: f64, u: &FieldVector) -> Result<()> {
        self.report_times.push(t);
        if let Some(e) = self.exact {
            let at = AtTime::new(e, t);
            self.err_l2.push(error_norm(&self.problem.space, u, &at, ErrorKind::L2)?);
            self.err_h1.push(error_norm(&self.problem.space, u, &at, ErrorKind::H1)?);
        }
        while let Some(&ts) = self.snapshot_times.first() {
            if t < ts - 1e-12 * ts.abs().max(1.0) {
                break;
            }
            self.snapshots.push(Snapshot { t, u: u.clone() });
            self.snapshot_times.remove(0);
        }
        Ok(())
    }

    /// Records an accepted level; `Break` once the steady-state test holds.
    fn accept(&mut self, t: f64, k: f64, u: &FieldVector, energy: f64) -> Result<ControlFlow<()>> {
        u.check_finite(&format!("solution at t = {t}"))?;
        self.steps.push(k);
        self.energy.push(energy);
        self.level(t, u)?;
        let mut flow = ControlFlow::Continue(());
        if let Some(tol) = self.steady_tol {
            let d: Vec<f64> = u.iter().zip(self.last.iter()).map(|(a, b)| a - b).collect();
            let rate = self.problem.mass_sq(&d).max(0.0).sqrt() / k;
            if rate < tol {
                self.steady_time = Some(t);
                flow = ControlFlow::Break(());
            }
        }
        self.last.clone_from(u);
        Ok(flow)
    }
}

enum Plan {
    Fixed(Vec<f64>),
    Adaptive(AdaptConfig),
}

fn drive<S: AdaptiveStepper>(
    mut stepper: S,
    tp: &TestProblem,
    cfg: &ExperimentConfig,
    mesh_n: usize,
    plan: Plan,
) -> Result<RunReport> {
    let k0 = match &plan {
        Plan::Fixed(steps) => *steps.first().ok_or_else(|| Error::InvalidArgument("empty step plan".into()))?,
        Plan::Adaptive(a) => a.k0,
    };
    let t1 = tp.t0 + k0;
    // accuracy runs start from the exact second level, random data from a
    // single implicit-midpoint step
    let u1 = match tp.exact_interpolant(t1) {
        Some(u) => u,
        None => midpoint_step(&tp.problem, &tp.u0, tp.t0, k0, cfg.fixed_point()?)?.0,
    };
    let mut monitor = Monitor::new(tp, cfg)?;
    let mut state = stepper.initial_state(tp.u0.clone(), u1.clone(), tp.t0, t1)?;
    let e1 = stepper.energy(&state)?;
    let mut records = Vec::new();
    let mut adapt = None;
    if monitor.accept(t1, k0, &u1, e1)?.is_continue() {
        match plan {
            Plan::Fixed(steps) => {
                for &k in &steps[1..] {
                    state = stepper.step(&state, k)?;
                    let e = stepper.energy(&state)?;
                    if monitor.accept(S::time(&state), k, S::solution(&state), e)?.is_break() {
                        break;
                    }
                }
            }
            Plan::Adaptive(acfg) => {
                let run = adaptive_loop(&mut stepper, (tp.u0.clone(), state), &acfg, cfg.t_final, |rec, st| {
                    monitor.accept(S::time(st), rec.k, S::solution(st), rec.energy)
                })?;
                state = run.final_state;
                records = run.records;
                adapt = Some(run.stats);
            }
        }
    }

    let norms = if tp.exact.is_some() {
        let l2_tail = &monitor.err_l2[1..];
        let h1_tail = &monitor.err_h1[1..];
        Some([
            discrete_time_norm(&monitor.err_l2, &[], TimeNorm::Linf)?,
            discrete_time_norm(l2_tail, &monitor.steps, TimeNorm::L2)?,
            discrete_time_norm(h1_tail, &monitor.steps, TimeNorm::L2)?,
        ])
    } else {
        None
    };
    Ok(RunReport {
        scheme: cfg.scheme,
        theta: cfg.theta,
        mesh_n,
        problem: tp.problem.clone(),
        times: monitor.report_times,
        steps: monitor.steps,
        energy: monitor.energy,
        err_l2: monitor.err_l2,
        err_h1: monitor.err_h1,
        norms,
        records,
        adapt,
        snapshots: monitor.snapshots,
        final_u: S::solution(&state).clone(),
        steady_time: monitor.steady_time,
    })
}

fn run_on(tp: &TestProblem, cfg: &ExperimentConfig, mesh_n: usize, k: f64) -> Result<RunReport> {
    let plan = match cfg.policy {
        PolicyKind::Adaptive => {
            let mut a = cfg.adapt_config()?;
            a.k0 = k;
            Plan::Adaptive(a)
        }
        _ => Plan::Fixed(steps_covering(cfg.step_policy(k)?, cfg.t_final - tp.t0)?),
    };
    let p = tp.problem.clone();
    let theta = cfg.theta();
    match cfg.scheme {
        SchemeKind::Modified => {
            drive(ModifiedDln::new(p, theta, cfg.fixed_point()?, Nonlinearity::Secant), tp, cfg, mesh_n, plan)
        }
        SchemeKind::CssSplit => {
            drive(ModifiedDln::new(p, theta, cfg.fixed_point()?, Nonlinearity::ConvexSplit), tp, cfg, mesh_n, plan)
        }
        SchemeKind::Sav => drive(DlnSav::new(p, theta, cfg.sav_params()?), tp, cfg, mesh_n, plan),
    }
}

fn build(cfg: &ExperimentConfig, mesh_n: usize) -> Result<TestProblem> {
    match cfg.problem {
        ProblemKind::Wave1d => wave1d(cfg.epsilon, mesh_n),
        ProblemKind::Manufactured2d => manufactured2d(cfg.epsilon, mesh_n),
        ProblemKind::Random2d => random2d(cfg.epsilon, mesh_n, cfg.seed),
    }
}

fn require(cfg: &ExperimentConfig, kind: ProblemKind) -> Result<usize> {
    if cfg.problem != kind {
        return invalid(format!("expected a {kind:?} configuration, got {:?}", cfg.problem));
    }
    cfg.mesh_n.ok_or_else(|| Error::Config("`mesh_n` is required".into()))
}

/// One run with the configured policy and mesh.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunReport> {
    let n = cfg.mesh_n.ok_or_else(|| Error::Config("`mesh_n` is required".into()))?;
    run_on(&build(cfg, n)?, cfg, n, cfg.k)
}

pub fn run_wave1d(cfg: &ExperimentConfig) -> Result<RunReport> {
    let n = require(cfg, ProblemKind::Wave1d)?;
    run_on(&build(cfg, n)?, cfg, n, cfg.k)
}

pub fn run_manufactured2d(cfg: &ExperimentConfig) -> Result<RunReport> {
    let n = require(cfg, ProblemKind::Manufactured2d)?;
    run_on(&build(cfg, n)?, cfg, n, cfg.k)
}

pub fn run_random2d(cfg: &ExperimentConfig) -> Result<RunReport> {
    let n = require(cfg, ProblemKind::Random2d)?;
    run_on(&build(cfg, n)?, cfg, n, cfg.k)
}

/// A convergence study: one report per ladder point and the rate table.
pub struct StudyReport {
    pub runs: Vec<RunReport>,
    pub rows: Vec<RateRow>,
}

fn run_ladder(points: Vec<(usize, f64, f64)>, cfg: &ExperimentConfig) -> Result<StudyReport> {
    // ladder points are independent; assembly of the table stays ordered
    let results: Vec<Result<RunReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .iter()
            .map(|&(n, k, _)| s.spawn(move || build(cfg, n).and_then(|tp| run_on(&tp, cfg, n, k))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("ladder worker panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut table = Vec::with_capacity(runs.len());
    for (r, &(_, _, size)) in runs.iter().zip(&points) {
        let norms = r.norms.ok_or_else(|| Error::InvalidState("run without error norms".into()))?;
        let size = if size.is_nan() { r.k_max() } else { size };
        table.push((size, norms));
    }
    Ok(StudyReport { rows: rate_table(&table)?, runs })
}

/// Temporal study over `k_ladder`; rates use each run's largest step. For
/// wave1d the mesh follows `h = k^2`.
pub fn converge_time(cfg: &ExperimentConfig) -> Result<StudyReport> {
    let points = cfg
        .k_ladder
        .iter()
        .map(|&k| {
            let n = match cfg.problem {
                ProblemKind::Wave1d => Ok(ExperimentConfig::wave_cells(k * k)),
                _ => cfg.mesh_n.ok_or_else(|| Error::Config("`mesh_n` is required".into())),
            };
            n.map(|n| (n, k, f64::NAN))
        })
        .collect::<Result<Vec<_>>>()?;
    run_ladder(points, cfg)
}

/// Spatial study over `h_ladder` with constant steps `k = h^2`.
pub fn converge_space(cfg: &ExperimentConfig) -> Result<StudyReport> {
    if cfg.problem != ProblemKind::Wave1d {
        return invalid("spatial studies are provided for wave1d only");
    }
    let points = cfg.h_ladder.iter().map(|&h| (ExperimentConfig::wave_cells(h), h * h, h)).collect();
    run_ladder(points, cfg)
}
