use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlnac::harness::config::{ConfigFile, EstimatorName, PolicyKind, ProblemKind, SchemeKind, Study};
use dlnac::harness::output::{write_manifest, write_run, write_study};
use dlnac::harness::{converge_space, converge_time, run_single, ExperimentConfig, NormName, RunReport, StudyReport};

/// Variable-step DLN solvers for the Allen-Cahn equation.
#[derive(Parser)]
#[command(name = "dlnac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal convergence over `k_ladder`.
    ConvergeTime(Opts),
    /// Spatial convergence over `h_ladder` with k = h^2 (wave1d).
    ConvergeSpace(Opts),
    /// One adaptive run.
    Adapt(Opts),
    /// One run with a fixed step policy.
    Simulate(Opts),
}

#[derive(Args)]
struct Opts {
    /// Config file of `key = value` lines; flags override its keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Reference step (k0 for adaptive runs).
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    k_min: Option<f64>,
    #[arg(long)]
    k_max: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated step ladder.
    #[arg(long, value_delimiter = ',')]
    k_ladder: Option<Vec<f64>>,
    /// Comma-separated mesh-size ladder.
    #[arg(long, value_delimiter = ',')]
    h_ladder: Option<Vec<f64>>,
    #[arg(long)]
    steady_tol: Option<f64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Output directory for CSV, VTK and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProblemArg {
    Wave1d,
    Manufactured2d,
    Random2d,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SchemeArg {
    Modified,
    CssSplit,
    Sav,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PolicyArg {
    Constant,
    Random,
    Alternating,
    Adaptive,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EstimatorArg {
    Absolute,
    Relative,
}

impl Opts {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            problem: self.problem.map(|p| match p {
                ProblemArg::Wave1d => ProblemKind::Wave1d,
                ProblemArg::Manufactured2d => ProblemKind::Manufactured2d,
                ProblemArg::Random2d => ProblemKind::Random2d,
            }),
            scheme: self.scheme.map(|s| match s {
                SchemeArg::Modified => SchemeKind::Modified,
                SchemeArg::CssSplit => SchemeKind::CssSplit,
                SchemeArg::Sav => SchemeKind::Sav,
            }),
            theta: self.theta,
            epsilon: self.epsilon,
            mesh_n: self.mesh_n,
            t_final: self.t_final,
            policy: self.policy.map(|p| match p {
                PolicyArg::Constant => PolicyKind::Constant,
                PolicyArg::Random => PolicyKind::Random,
                PolicyArg::Alternating => PolicyKind::Alternating,
                PolicyArg::Adaptive => PolicyKind::Adaptive,
            }),
            k: self.k,
            seed: self.seed,
            tol: self.tol,
            kappa: self.kappa,
            k_min: self.k_min,
            k_max: self.k_max,
            estimator: self.estimator.map(|e| match e {
                EstimatorArg::Absolute => EstimatorName::Absolute,
                EstimatorArg::Relative => EstimatorName::Relative,
            }),
            k_ladder: self.k_ladder.clone(),
            h_ladder: self.h_ladder.clone(),
            steady_tol: self.steady_tol,
            out: self.out.clone(),
            ..Default::default()
        }
    }

    fn resolve(&self, study: Study, force_adaptive: bool) -> Result<ExperimentConfig, dlnac::Error> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut file = base.merged(&self.overrides());
        if force_adaptive {
            file.policy = Some(PolicyKind::Adaptive);
        } else if study == Study::Single && file.policy == Some(PolicyKind::Adaptive) {
            return Err(dlnac::Error::Config("`simulate` runs a fixed policy; use `adapt` for adaptive runs".into()));
        }
        ExperimentConfig::resolve(&file, study)
    }
}

fn print_study(cfg: &ExperimentConfig, study: &StudyReport, size_name: &str) {
    print!("{:>10}", size_name);
    for n in &cfg.norms {
        print!(" {:>14} {:>6}", format!("err_{n}"), "rate");
    }
    println!(" {:>8}", "steps");
    for (run, row) in study.runs.iter().zip(&study.rows) {
        print!("{:>10.4e}", row.size);
        for n in &cfg.norms {
            let j = n.index();
            let rate = row.rates.map_or("-".to_string(), |r| format!("{:.2}", r[j]));
            print!(" {:>14.4e} {:>6}", row.errors[j], rate);
        }
        println!(" {:>8}", run.n_steps());
    }
}

fn run_facts(run: &RunReport, norms: &[NormName]) -> Vec<(&'static str, String)> {
    let mut facts = vec![
        ("t_end", format!("{}", run.t_end())),
        ("steps", run.n_steps().to_string()),
        ("rejections", run.rejections().to_string()),
        ("k_max_used", format!("{:e}", run.k_max())),
        ("energy_final", format!("{:e}", run.energy.last().copied().unwrap_or(f64::NAN))),
        ("max_energy_increase", format!("{:e}", run.max_energy_increase())),
    ];
    if let Some(a) = &run.adapt {
        facts.push(("stalled_accepts", a.stalled.to_string()));
        facts.push(("guard_events", a.guard_events.to_string()));
        facts.push(("solver_failures", a.solver_failures.to_string()));
    }
    if let Some(t) = run.steady_time {
        facts.push(("steady_time", t.to_string()));
    }
    if let Some(e) = run.norms {
        for n in norms {
            let key = match n {
                NormName::LinfL2 => "err_linf_l2",
                NormName::L2L2 => "err_l2_l2",
                NormName::L2H1 => "err_l2_h1",
            };
            facts.push((key, format!("{:e}", e[n.index()])));
        }
    }
    facts
}

fn finish_run(cfg: &ExperimentConfig, command: &str, run: &RunReport) -> Result<(), dlnac::Error> {
    let facts = run_facts(run, &cfg.norms);
    for (k, v) in &facts {
        println!("{k:>20} = {v}");
    }
    if let Some(dir) = &cfg.out {
        let files = write_run(dir, run)?;
        write_manifest(&dir.join("manifest.txt"), cfg, command, &facts)?;
        report_files(dir, &files);
    }
    Ok(())
}

fn report_files(dir: &Path, files: &[PathBuf]) {
    eprintln!("wrote {} files to {}", files.len() + 1, dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ConvergeTime(o) | Command::ConvergeSpace(o) => {
            let (study_kind, command, size_name) = match cli.command {
                Command::ConvergeTime(_) => (Study::Time, "converge-time", "k_max"),
                _ => (Study::Space, "converge-space", "h"),
            };
            o.resolve(study_kind, false).and_then(|cfg| {
                let study = match study_kind {
                    Study::Time => converge_time(&cfg)?,
                    _ => converge_space(&cfg)?,
                };
                print_study(&cfg, &study, size_name);
                if let Some(dir) = &cfg.out {
                    let path = write_study(dir, &study)?;
                    let facts: Vec<(&str, String)> = study
                        .rows
                        .iter()
                        .map(|r| ("row", format!("size={:e} errors={:?} rates={:?}", r.size, r.errors, r.rates)))
                        .collect();
                    write_manifest(&dir.join("manifest.txt"), &cfg, command, &facts)?;
                    report_files(dir, &[path]);
                }
                Ok(())
            })
        }
        Command::Adapt(o) => o.resolve(Study::Single, true).and_then(|cfg| finish_run(&cfg, "adapt", &run_single(&cfg)?)),
        Command::Simulate(o) => {
            o.resolve(Study::Single, false).and_then(|cfg| finish_run(&cfg, "simulate", &run_single(&cfg)?))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
