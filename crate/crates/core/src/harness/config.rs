//! Experiment configuration: a flat `key = value` file (TOML syntax) whose
//! unset keys take per-problem defaults.
//!
//! Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `problem` | `wave1d`, `manufactured2d`, `random2d` | required |
//! | `scheme` | `modified`, `css_split`, `sav` | `modified` |
//! | `theta` | DLN parameter in `[0, 1]` | `1.0` |
//! | `epsilon` | interfacial parameter | 0.01, 0.01, 0.1 |
//! | `mesh_n` | cells per side | derived (wave1d), 64, 48 |
//! | `t_final` | final time | 2, 4, 320 |
//! | `policy` | `constant`, `random`, `alternating`, `adaptive` | `constant` |
//! | `k` | reference step, or `k0` for adaptive runs | 0.01 |
//! | `seed` | RNG seed for random steps and random data | 0 |
//! | `tol`, `kappa`, `k_min`, `k_max`, `max_rejections` | adaptive controller | 1e-6, 0.8, 1e-5, 0.1, 30 |
//! | `estimator` | `absolute` or `relative` | `absolute` |
//! | `fp_tol`, `fp_max_iter` | fixed-point iteration | 1e-8, 100 |
//! | `c0` | SAV energy shift | 0 (1 for random2d) |
//! | `k_ladder` | steps of a temporal study | `[]` |
//! | `h_ladder` | mesh sizes of a spatial study | `[]` |
//! | `norms` | subset of `linf_l2`, `l2_l2`, `l2_h1` to print | all |
//! | `steady_tol` | stop once `||u_{n+1} - u_n|| / k_n` falls below | unset |
//! | `snapshot_times` | times of VTK/CSV field snapshots | `[]` |
//! | `out` | output directory | unset |
//!
//! In wave1d temporal studies the mesh follows `h = k^2`; in spatial
//! studies the step follows `k = h^2`. Setting the coupled quantity by hand
//! in those studies is an error.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptConfig, EstimatorKind};
use crate::coeffs::Theta;
use crate::error::{Error, Result};
use crate::harness::policy::StepPolicy;
use crate::harness::problems::TravellingWave;
use crate::modified::FixedPointConfig;
use crate::sav::SavParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Wave1d,
    Manufactured2d,
    Random2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    Modified,
    CssSplit,
    Sav,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Constant,
    Random,
    Alternating,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    #[default]
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormName {
    LinfL2,
    L2L2,
    L2H1,
}

impl NormName {
    pub const ALL: [NormName; 3] = [NormName::LinfL2, NormName::L2L2, NormName::L2H1];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NormName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormName::LinfL2 => "linf_l2",
            NormName::L2L2 => "l2_l2",
            NormName::L2H1 => "l2_h1",
        })
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Modified => "modified",
            SchemeKind::CssSplit => "css_split",
            SchemeKind::Sav => "sav",
        })
    }
}

/// Which kind of run a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Temporal convergence over `k_ladder`.
    Time,
    /// Spatial convergence over `h_ladder`.
    Space,
    /// A single run with the configured policy.
    Single,
}

/// Configuration as written in a file; unset keys are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<ProblemKind>,
    pub scheme: Option<SchemeKind>,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub mesh_n: Option<usize>,
    pub t_final: Option<f64>,
    pub policy: Option<PolicyKind>,
    pub k: Option<f64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub kappa: Option<f64>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub max_rejections: Option<usize>,
    pub estimator: Option<EstimatorName>,
    pub fp_tol: Option<f64>,
    pub fp_max_iter: Option<usize>,
    pub c0: Option<f64>,
    pub k_ladder: Option<Vec<f64>>,
    pub h_ladder: Option<Vec<f64>>,
    pub norms: Option<Vec<NormName>>,
    pub steady_tol: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `other` replace those in `self`.
    pub fn merged(mut self, other: &ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(
            problem, scheme, theta, epsilon, mesh_n, t_final, policy, k, seed, tol, kappa, k_min, k_max, max_rejections,
            estimator, fp_tol, fp_max_iter, c0, k_ladder, h_ladder, norms, steady_tol, snapshot_times, out
        );
        self
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub scheme: SchemeKind,
    pub theta: f64,
    pub epsilon: f64,
    /// Cells per side; `None` when a study derives it.
    pub mesh_n: Option<usize>,
    pub t_final: f64,
    pub policy: PolicyKind,
    pub k: f64,
    pub seed: u64,
    pub tol: f64,
    pub kappa: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub max_rejections: usize,
    pub estimator: EstimatorName,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub c0: f64,
    pub k_ladder: Vec<f64>,
    pub h_ladder: Vec<f64>,
    pub norms: Vec<NormName>,
    pub steady_tol: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub out: Option<PathBuf>,
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    /// Fills defaults and checks consistency for the given study.
    pub fn resolve(file: &ConfigFile, study: Study) -> Result<Self> {
        let Some(problem) = file.problem else {
            return cfg_err("missing key `problem`");
        };
        // random data relaxes towards E = 0, where r = sqrt(E + c0) needs a shift
        let (eps, n, t_final, c0) = match problem {
            ProblemKind::Wave1d => (0.01, None, 2.0, 0.0),
            ProblemKind::Manufactured2d => (0.01, Some(64), 4.0, 0.0),
            ProblemKind::Random2d => (0.1, Some(48), 320.0, 1.0),
        };
        let cfg = Self {
            problem,
            scheme: file.scheme.unwrap_or_default(),
            theta: file.theta.unwrap_or(1.0),
            epsilon: file.epsilon.unwrap_or(eps),
            mesh_n: file.mesh_n.or(n),
            t_final: file.t_final.unwrap_or(t_final),
            policy: file.policy.unwrap_or_default(),
            k: file.k.unwrap_or(0.01),
            seed: file.seed.unwrap_or(0),
            tol: file.tol.unwrap_or(1e-6),
            kappa: file.kappa.unwrap_or(0.8),
            k_min: file.k_min.unwrap_or(1e-5),
            k_max: file.k_max.unwrap_or(0.1),
            max_rejections: file.max_rejections.unwrap_or(30),
            estimator: file.estimator.unwrap_or_default(),
            fp_tol: file.fp_tol.unwrap_or(1e-8),
            fp_max_iter: file.fp_max_iter.unwrap_or(100),
            c0: file.c0.unwrap_or(c0),
            k_ladder: file.k_ladder.clone().unwrap_or_default(),
            h_ladder: file.h_ladder.clone().unwrap_or_default(),
            norms: file.norms.clone().unwrap_or_else(|| NormName::ALL.to_vec()),
            steady_tol: file.steady_tol,
            snapshot_times: file.snapshot_times.clone().unwrap_or_default(),
            out: file.out.clone(),
        };
        cfg.check(file, study)?;
        Ok(cfg)
    }

    fn check(&self, file: &ConfigFile, study: Study) -> Result<()> {
        Theta::new(self.theta).map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [("epsilon", self.epsilon), ("t_final", self.t_final), ("k", self.k)] {
            if !(v > 0.0 && v.is_finite()) {
                return cfg_err(format!("`{name}` must be positive, got {v}"));
            }
        }
        if self.scheme == SchemeKind::Sav && self.c0 < 0.0 {
            return cfg_err("`c0` must be nonnegative");
        }
        let has_exact = self.problem != ProblemKind::Random2d;
        match study {
            Study::Time => {
                if !has_exact {
                    return cfg_err("convergence studies need a problem with an exact solution");
                }
                if self.k_ladder.len() < 2 {
                    return cfg_err("a temporal study needs `k_ladder` with at least two entries");
                }
                if self.policy == PolicyKind::Adaptive {
                    return cfg_err("temporal studies use a fixed step policy");
                }
                if self.problem == ProblemKind::Wave1d && file.mesh_n.is_some() {
                    return cfg_err("wave1d temporal studies derive the mesh from h = k^2; remove `mesh_n`");
                }
                if self.problem != ProblemKind::Wave1d && self.mesh_n.is_none() {
                    return cfg_err("`mesh_n` is required");
                }
            }
            Study::Space => {
                if self.problem != ProblemKind::Wave1d {
                    return cfg_err("spatial studies are provided for wave1d only");
                }
                if self.h_ladder.len() < 2 {
                    return cfg_err("a spatial study needs `h_ladder` with at least two entries");
                }
                if file.k.is_some() || file.mesh_n.is_some() {
                    return cfg_err("spatial studies derive the step from k = h^2; remove `k` and `mesh_n`");
                }
                if self.policy != PolicyKind::Constant {
                    return cfg_err("spatial studies use constant steps");
                }
            }
            Study::Single => {
                if self.mesh_n.is_none() {
                    return cfg_err("`mesh_n` is required for a single wave1d run");
                }
            }
        }
        if self.policy == PolicyKind::Adaptive {
            self.adapt_config().map_err(|e| Error::Config(e.to_string()))?.validate()?;
        }
        Ok(())
    }

    pub fn theta(&self) -> Theta {
        Theta::new(self.theta).expect("validated")
    }

    pub fn fixed_point(&self) -> Result<FixedPointConfig> {
        FixedPointConfig::new(self.fp_tol, self.fp_max_iter)
    }

    pub fn sav_params(&self) -> Result<SavParams> {
        SavParams::new(self.c0)
    }

    pub fn step_policy(&self, k: f64) -> Result<StepPolicy> {
        Ok(match self.policy {
            PolicyKind::Constant => StepPolicy::Constant { k },
            PolicyKind::Random => StepPolicy::Random { k, seed: self.seed },
            PolicyKind::Alternating => StepPolicy::Alternating { k },
            PolicyKind::Adaptive => return cfg_err("adaptive runs have no fixed step policy"),
        })
    }

    pub fn adapt_config(&self) -> Result<AdaptConfig> {
        Ok(AdaptConfig {
            tol: self.tol,
            k_min: self.k_min,
            k_max: self.k_max,
            kappa: self.kappa,
            estimator: match self.estimator {
                EstimatorName::Absolute => EstimatorKind::Absolute,
                EstimatorName::Relative => EstimatorKind::Relative,
            },
            max_rejections: self.max_rejections,
            k0: self.k,
        })
    }

    /// Mesh resolution for a wave1d run with mesh size `h`.
    pub fn wave_cells(h: f64) -> usize {
        let len = TravellingWave::DOMAIN.measure();
        (len / h).round().max(1.0) as usize
    }

    /// Resolved config as `key = value` lines.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let f = ConfigFile::parse(
            "problem = \"wave1d\"\nscheme = \"css_split\"\ntheta = 0.6666666666666666\nk_ladder = [0.04, 0.02]\n",
        )
        .unwrap();
        let c = ExperimentConfig::resolve(&f, Study::Time).unwrap();
        assert_eq!(c.scheme, SchemeKind::CssSplit);
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.t_final, 2.0);
        assert_eq!(c.mesh_n, None);
        let back = ConfigFile::parse(&c.to_text()).unwrap();
        assert_eq!(back.k_ladder, Some(vec![0.04, 0.02]));
    }

    #[test]
    fn couplings_are_enforced() {
        let f = ConfigFile::parse("problem = \"wave1d\"\nmesh_n = 100\nk_ladder = [0.04, 0.02]").unwrap();
        assert!(ExperimentConfig::resolve(&f, Study::Time).is_err());
        let f = ConfigFile::parse("problem = \"wave1d\"\nk = 0.01\nh_ladder = [0.04, 0.02]").unwrap();
        assert!(ExperimentConfig::resolve(&f, Study::Space).is_err());
        let f = ConfigFile::parse("problem = \"random2d\"\nk_ladder = [0.04, 0.02]").unwrap();
        assert!(ExperimentConfig::resolve(&f, Study::Time).is_err());
        assert!(ConfigFile::parse("problem = \"wave1d\"\nbogus = 1").is_err());
        assert!(ConfigFile::parse("scheme = \"rk4\"").is_err());
    }

    #[test]
    fn overrides_replace_keys() {
        let base = ConfigFile::parse("problem = \"random2d\"\ntheta = 0.5").unwrap();
        let over = ConfigFile { theta: Some(1.0), ..Default::default() };
        let m = base.merged(&over);
        assert_eq!(m.theta, Some(1.0));
        assert_eq!(m.problem, Some(ProblemKind::Random2d));
    }
}
