use crate::curves::CurveSpec;
use crate::error::{Error, Result};
use crate::field::{CovarianceKernel, Perturbation};
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MassIntensity,
    SecondMoment,
    Scaling,
    Werner,
    TailDecay,
    ProxyComparison,
    Chen,
    Regularity,
    HolderBound,
    PhiMap,
    RectangleMoments,
    Kahane,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::MassIntensity,
        Experiment::SecondMoment,
        Experiment::Scaling,
        Experiment::Werner,
        Experiment::TailDecay,
        Experiment::ProxyComparison,
        Experiment::Chen,
        Experiment::Regularity,
        Experiment::HolderBound,
        Experiment::PhiMap,
        Experiment::RectangleMoments,
        Experiment::Kahane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MassIntensity => "mass-intensity",
            Experiment::SecondMoment => "second-moment",
            Experiment::Scaling => "scaling",
            Experiment::Werner => "werner",
            Experiment::TailDecay => "tail-decay",
            Experiment::ProxyComparison => "proxy-comparison",
            Experiment::Chen => "chen",
            Experiment::Regularity => "regularity",
            Experiment::HolderBound => "holder-bound",
            Experiment::PhiMap => "phi-map",
            Experiment::RectangleMoments => "rectangle-moments",
            Experiment::Kahane => "kahane",
        }
    }
}

/// Covariance kernel as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    PureLog,
    LogPlusConstant { c: f64 },
    /// `g(d) = amplitude * exp(-|d|^2 / (2 scale^2))`, positive definite for `amplitude >= 0`.
    LogPlusGaussian { amplitude: f64, scale: f64 },
}

impl KernelSpec {
    pub fn build(&self, eps_reg: Option<f64>) -> Result<CovarianceKernel> {
        let k = match *self {
            KernelSpec::PureLog => CovarianceKernel::pure_log(),
            KernelSpec::LogPlusConstant { c } => CovarianceKernel::log_plus_constant(c),
            KernelSpec::LogPlusGaussian { amplitude, scale } => {
                if !(amplitude >= 0.0 && scale > 0.0) {
                    return Err(Error::InvalidArgument("need amplitude >= 0 and scale > 0".into()));
                }
                let s2 = 2.0 * scale * scale;
                CovarianceKernel::log_plus_smooth(
                    Perturbation::Stationary(Arc::new(move |dx, dy| amplitude * (-(dx * dx + dy * dy) / s2).exp())),
                    amplitude,
                )
            }
        };
        Ok(match eps_reg {
            Some(e) => k.with_eps(e),
            None => k,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            h: 1.0 / 64.0,
            x0: 0.0,
            y0: 0.0,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.x0, self.y0, self.h, self.nx, self.ny)
    }
}

/// Knobs used by one or a few experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Test rectangle `(x_lo, x_hi, y_lo, y_hi)` for second moments and Kahane.
    pub square: (f64, f64, f64, f64),
    /// Side of the base square and the ratios of the scaling check.
    pub side: f64,
    pub ratios: Vec<f64>,
    /// Rectangle area and aspect ratios of the rectangle moment check.
    pub area: f64,
    pub aspects: Vec<f64>,
    /// Subdivision exponent and distance exponent of the proxy comparison.
    pub t: f64,
    pub eps: f64,
    /// Hölder exponent of the curve; 1/2 for Brownian paths.
    pub alpha: f64,
    pub betas: Vec<f64>,
    pub max_span: usize,
    /// When set (or at `gamma = 0`), deterministic curves use Lebesgue
    /// measure on per-interval grids with this many cells across.
    pub lebesgue_cells: Option<usize>,
    pub r: f64,
    pub phi_n: Vec<u32>,
    pub phi_pairs: usize,
    pub shift_c: f64,
    pub kernel_b: Option<KernelSpec>,
    /// Random instances per identity in the `chen` experiment.
    pub instances: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            square: (0.0, 0.25, 0.0, 0.25),
            side: 0.5,
            ratios: vec![1.0, 0.5, 0.25],
            area: 1.0 / 256.0,
            aspects: vec![1.0, 16.0, 256.0],
            t: 0.4,
            eps: 0.05,
            alpha: 0.5,
            betas: (1..=30).map(|k| k as f64 / 10.0).collect(),
            max_span: 4,
            lebesgue_cells: None,
            r: 1.5,
            phi_n: vec![1, 3, 6],
            phi_pairs: 100_000,
            shift_c: 0.25,
            kernel_b: None,
            instances: 10,
        }
    }
}

fn default_gammas() -> Vec<f64> {
    vec![0.5]
}
fn default_ensemble() -> usize {
    32
}
fn default_levels() -> Vec<u32> {
    vec![4, 8, 16, 32]
}
fn default_depth() -> u32 {
    4
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    /// Diagonal regularization; half the grid spacing when absent.
    #[serde(default)]
    pub eps_reg: Option<f64>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Outer ensemble size (paths or instances).
    #[serde(default = "default_ensemble")]
    pub paths: usize,
    /// Inner ensemble size (chaos samples).
    #[serde(default = "default_ensemble")]
    pub measures: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 picks the number of available cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub params: Params,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::PureLog
}

impl ExperimentConfig {
    /// Defaults for `experiment`, including a curve where one is needed.
    pub fn new(experiment: Experiment) -> Self {
        let mut cfg = Self {
            experiment,
            kernel: KernelSpec::PureLog,
            eps_reg: None,
            gammas: default_gammas(),
            curve: None,
            grid: GridConfig::default(),
            paths: default_ensemble(),
            measures: default_ensemble(),
            levels: default_levels(),
            depth: default_depth(),
            p: default_p(),
            q: default_q(),
            seed: 0,
            out: None,
            workers: 0,
            params: Params::default(),
        };
        match experiment {
            Experiment::Werner | Experiment::TailDecay | Experiment::ProxyComparison | Experiment::Regularity | Experiment::Chen => {
                cfg.curve = Some(CurveSpec::Brownian {
                    n_steps: 1 << 12,
                    horizon: (0.0, 1.0),
                });
            }
            Experiment::HolderBound => {
                cfg.curve = Some(CurveSpec::CircleChain {
                    alpha: 1.2,
                    m: 16,
                    verts_per_circle: 256,
                    holder: Some(0.9),
                });
                cfg.params.alpha = 0.9;
            }
            _ => {}
        }
        cfg
    }

    /// Parses JSON; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Err(Error::Config {
            path: path.into(),
            message,
        });
        if self.gammas.is_empty() {
            return bad("gammas", "at least one gamma is required".into());
        }
        for (k, &g) in self.gammas.iter().enumerate() {
            if !(0.0..2.0).contains(&g) {
                return bad(&format!("gammas[{k}]"), format!("gamma = {g} must lie in [0, 2)"));
            }
        }
        if self.paths < 2 {
            return bad("paths", "ensemble sizes must be at least 2".into());
        }
        if self.measures < 2 {
            return bad("measures", "ensemble sizes must be at least 2".into());
        }
        if let Err(e) = self.grid.spec() {
            return bad("grid", e.to_string());
        }
        if self.p.is_empty() || self.p.iter().any(|&p| !(p >= 1.0)) {
            return bad("p", "p values must be at least 1".into());
        }
        if matches!(self.eps_reg, Some(e) if !(e > 0.0)) {
            return bad("eps_reg", "must be positive".into());
        }
        let needs_curve = matches!(
            self.experiment,
            Experiment::Werner | Experiment::HolderBound | Experiment::Regularity | Experiment::Chen
        );
        if needs_curve && self.curve.is_none() {
            return bad("curve", format!("{} needs a curve", self.experiment.name()));
        }
        if matches!(self.experiment, Experiment::TailDecay | Experiment::ProxyComparison)
            && !matches!(self.curve, None | Some(CurveSpec::Brownian { .. }))
        {
            return bad("curve", "nested ensembles use Brownian paths".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<CovarianceKernel> {
        self.kernel.build(self.eps_reg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid.spec()
    }

    /// SHA-256 of the config with the seed, output directory and worker
    /// count cleared; reports with equal hashes may be merged.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.out = None;
        c.workers = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
