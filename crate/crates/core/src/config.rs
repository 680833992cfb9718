//! TOML run configuration: one optional section per command.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::bounds::FamilySpec;
use crate::dist::{axis_angle, AnisotropicGaussian, Distribution, FermiDiracGaussian, GaussianMixture, GridDistribution};
use crate::error::{Error, Result};
use crate::functionals::FunctionalOptions;
use crate::quad::DiagonalRule;
use crate::solver::SolverConfig;
use crate::quad::Vec3;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized candidate sets.
    pub seed: u64,
    /// Overrides every tolerance that a command uses.
    pub tolerance: Option<f64>,
    pub quadrature: QuadratureSettings,
    pub functionals: Option<FunctionalsSection>,
    pub verify: Option<VerifySection>,
    pub simulate: Option<SimulateSection>,
    pub decay: Option<DecaySection>,
    pub equilibrium: Option<EquilibriumSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    pub nodes: usize,
    pub pair_nodes: usize,
    pub diagonal: DiagonalRule,
    pub spherical: [usize; 3],
    pub angles: usize,
    /// Extra random sup candidates drawn from N(0, I) with `seed`.
    pub random_candidates: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        let d = FunctionalOptions::default();
        Self {
            nodes: d.nodes,
            pair_nodes: d.pair_nodes,
            diagonal: d.diagonal,
            spherical: [d.spherical.0, d.spherical.1, d.spherical.2],
            angles: d.angles,
            random_candidates: 0,
        }
    }
}

impl QuadratureSettings {
    pub fn options(&self, seed: u64) -> FunctionalOptions {
        use rand::SeedableRng;
        use rand_distr::{Distribution as _, StandardNormal};
        let mut opts = FunctionalOptions {
            nodes: self.nodes,
            pair_nodes: self.pair_nodes,
            diagonal: self.diagonal,
            spherical: (self.spherical[0], self.spherical[1], self.spherical[2]),
            angles: self.angles,
            ..FunctionalOptions::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..self.random_candidates {
            let v: Vec3 = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            opts.candidates.push(v);
        }
        opts
    }

    fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.pair_nodes < 2 || self.angles < 1 || self.spherical.contains(&0) {
            return Err(Error::Config("quadrature node counts must be positive (nodes, pair_nodes ≥ 2)".into()));
        }
        Ok(())
    }
}

/// A single test state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    Maxwellian,
    Gaussian {
        temperatures: Vec3,
        #[serde(default)]
        mean: Vec3,
        /// Rotation axis and angle (radians) of the principal frame.
        #[serde(default)]
        rotation: Option<(Vec3, f64)>,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    FermiDirac {
        epsilon: f64,
        #[serde(default = "unit_temperatures")]
        temperatures: Vec3,
    },
    /// Grid CSV file; relative paths resolve against the config file.
    Grid {
        path: PathBuf,
    },
}

fn unit_temperatures() -> Vec3 {
    [1.0; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub temperatures: Vec3,
    #[serde(default)]
    pub mean: Vec3,
}

impl DistributionSpec {
    pub fn build(&self, base: &Path) -> Result<Distribution> {
        Ok(match self {
            DistributionSpec::Maxwellian => Distribution::maxwellian(),
            DistributionSpec::Gaussian {
                temperatures,
                mean,
                rotation,
            } => {
                let frame = rotation.map_or_else(nalgebra::Matrix3::identity, |(axis, angle)| axis_angle(axis, angle));
                AnisotropicGaussian::new(*mean, *temperatures, frame)?.into()
            }
            DistributionSpec::Mixture { components } => GaussianMixture::new(
                components
                    .iter()
                    .map(|c| Ok((c.weight, AnisotropicGaussian::new(c.mean, c.temperatures, nalgebra::Matrix3::identity())?)))
                    .collect::<Result<Vec<_>>>()?,
            )?
            .into(),
            DistributionSpec::FermiDirac { epsilon, temperatures } => {
                FermiDiracGaussian::with_temperatures(*epsilon, *temperatures)?.into()
            }
            DistributionSpec::Grid { path } => {
                let full = base.join(path);
                let file = std::fs::File::open(&full)
                    .map_err(|e| Error::Config(format!("cannot open grid {}: {e}", full.display())))?;
                GridDistribution::read_csv(std::io::BufReader::new(file))?.into()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDistribution {
    pub id: String,
    pub state: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalsSection {
    pub distributions: Vec<NamedDistribution>,
    /// Family members are appended to `distributions`.
    pub family: Option<FamilySpec>,
    pub gammas: Vec<f64>,
    /// Each ε adds a row with the Fermi-Dirac block per (state, γ).
    pub epsilons: Vec<f64>,
    pub output: String,
}

impl Default for FunctionalsSection {
    fn default() -> Self {
        Self {
            distributions: Vec::new(),
            family: None,
            gammas: vec![0.0, 0.5, 1.0],
            epsilons: Vec::new(),
            output: "functionals.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub family: FamilySpec,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Also emit inequality-chain audits for every (member, γ, ε).
    pub chain: bool,
    pub output: String,
    pub chain_output: String,
    /// Multiplies every rhs before scoring; only for exercising the
    /// failure path.
    pub rhs_scale: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            family: FamilySpec::GaussianDelta {
                deltas: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06],
            },
            gammas: vec![0.0, 0.5, 1.0],
            epsilons: Vec::new(),
            chain: false,
            output: "verify.csv".into(),
            chain_output: "chain.csv".into(),
            rhs_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub initial: DistributionSpec,
    pub solver: SolverConfig,
    pub output: String,
    /// Snapshot files are named `<prefix>_<t>.csv`.
    pub snapshot_prefix: String,
    /// Run the decay checks on the fresh trajectory.
    pub decay: bool,
    pub c1: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            initial: DistributionSpec::Gaussian {
                temperatures: [1.06, 0.97, 0.97],
                mean: [0.0; 3],
                rotation: None,
            },
            solver: SolverConfig::default(),
            output: "trajectory.csv".into(),
            snapshot_prefix: "snapshot".into(),
            decay: true,
            c1: crate::decay::DEFAULT_C1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    /// Relative paths resolve against the config file.
    pub trajectory: PathBuf,
    pub c1: f64,
    /// Drop samples before this time and restart the clock there.
    pub start_time: f64,
    /// Explicit (q, c0); otherwise derived from the recorded ‖f‖_{L²₆}.
    pub q: Option<f64>,
    pub c0: Option<f64>,
    /// Tolerance on H as a fraction of max(H0, initial mass).
    pub tolerance: f64,
    pub output: String,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            c1: crate::decay::DEFAULT_C1,
            start_time: 0.0,
            q: None,
            c0: None,
            tolerance: crate::decay::NOISE_FLOOR,
            output: "decay.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    pub epsilons: Vec<f64>,
    pub tolerance: f64,
    pub output: String,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-6, 1e-3, 0.05, 0.1],
            tolerance: 1e-12,
            output: "equilibrium.csv".into(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerance {t} must be positive")));
            }
        }
        let gammas_ok = |g: &[f64]| g.iter().all(|x| (0.0..=1.0).contains(x));
        let eps_ok = |e: &[f64]| e.iter().all(|x| *x >= 0.0 && x.is_finite());
        if let Some(s) = &self.functionals {
            if !gammas_ok(&s.gammas) || !eps_ok(&s.epsilons) {
                return Err(Error::Config("functionals: γ must lie in [0, 1] and ε ≥ 0".into()));
            }
        }
        if let Some(s) = &self.verify {
            if !gammas_ok(&s.gammas) || !eps_ok(&s.epsilons) || !(s.rhs_scale > 0.0) {
                return Err(Error::Config("verify: γ ∈ [0, 1], ε ≥ 0 and rhs_scale > 0 required".into()));
            }
        }
        if let Some(s) = &self.simulate {
            s.solver.validate()?;
            if !(s.c1 > 0.0) {
                return Err(Error::Config("simulate: c1 must be positive".into()));
            }
        }
        if let Some(s) = &self.decay {
            if !(s.c1 > 0.0) || !(s.tolerance >= 0.0) || !s.start_time.is_finite() {
                return Err(Error::Config("decay: c1 > 0, tolerance ≥ 0 and a finite start_time required".into()));
            }
            if s.q.is_some() != s.c0.is_some() {
                return Err(Error::Config("decay: give both q and c0 or neither".into()));
            }
        }
        if let Some(s) = &self.equilibrium {
            if !s.epsilons.iter().all(|e| *e > 0.0 && e.is_finite()) || !(s.tolerance > 0.0) {
                return Err(Error::Config("equilibrium: ε > 0 and a positive tolerance required".into()));
            }
        }
        Ok(())
    }
}
