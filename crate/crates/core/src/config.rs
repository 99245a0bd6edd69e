//! TOML run configuration.
//!
//! Every section is optional and falls back to the documented defaults; unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentPlan, HolderParams};
use crate::noise::{make_family, ModeIndex, NoiseSpec};
use crate::phase::{PhaseFunctions, PhaseParams};
use crate::solver::{Forcing, FourierTerm, InitialCondition, LimitConfig, Scheme, SolverConfig};
use crate::spectral::{ScalarField, TorusGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    /// Defaults to `Lip(Psi) + Lip(g)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imex_a: Option<f64>,
    pub scheme: Scheme,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 0.25,
            stride: 10,
            imex_a: None,
            scheme: Scheme::ItoImex,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Truncation radius of the flat family.
    pub radius: u32,
    pub seed: u64,
    pub replica: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            radius: 8,
            seed: 0,
            replica: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingSection {
    pub terms: Vec<FourierTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub radii: Vec<u32>,
    pub replicas: usize,
    pub base_seed: u64,
    pub max_abort_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_bound: Option<f64>,
    pub probe_mode: ModeIndex,
    pub holder: HolderParams,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            radii: vec![4, 8, 16, 32],
            replicas: 64,
            base_seed: 0,
            max_abort_fraction: 0.01,
            state_bound: None,
            probe_mode: ModeIndex::new(1, 0).expect("nonzero"),
            holder: HolderParams::default(),
        }
    }
}

/// A complete run description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub phase: PhaseParams,
    pub grid: GridSection,
    pub time: TimeSection,
    pub noise: NoiseSection,
    pub initial: InitialCondition,
    pub forcing: ForcingSection,
    pub experiment: ExperimentSection,
}

const EXAMPLE: &str = r#"# Material parameters of the enthalpy relation and the turbulence profile.
[phase]
c1 = 2.0          # heat capacity, solid
c2 = 2.0          # heat capacity, liquid
k1 = 1.0          # conductivity, solid
k2 = 0.5          # conductivity, liquid
latent = 1.0      # latent heat
delta = 0.1       # width of the mushy region in temperature
eps = 0.05        # turbulence vanishes below this temperature
eta_slope = 1.0   # slope of the turbulence profile
# eta_sat = 0.5   # optional saturation level (>= eta_slope * eps)

[grid]
n = 64            # nodes per side, even

[time]
dt = 1e-4
t_end = 0.25      # must be a whole number of steps
stride = 10       # record every `stride` steps; must divide the step count
# imex_a = 0.5625 # implicit shift, defaults to Lip(Psi) + Lip(g)
scheme = "ito_imex"   # or "stratonovich_midpoint"

[noise]
radius = 8        # flat family on 0 < |k| <= radius, radius <= n/2
seed = 0
replica = 0

# Initial enthalpy: kind = "zero" | "constant" | "blob" | "fourier".
[initial]
kind = "blob"
lo = -1.0
hi = 2.0
kappa = 2.0

# Time-independent source, a sum of a*cos(2 pi k.x) + b*sin(2 pi k.x).
[forcing]
terms = []
# [[forcing.terms]]
# k = [1, 0]
# cos = 0.1
# sin = 0.0

[experiment]
radii = [4, 8, 16, 32]
replicas = 64
base_seed = 0
max_abort_fraction = 0.01
# state_bound = 1e6   # abort replicas leaving [-bound, bound]
probe_mode = [1, 0]   # test mode of the martingale probe

[experiment.holder]
beta = 5.0
r = 4.0
pairs = 32
trajectories = 4  # replicas per radius kept for the fit
"#;

impl RunConfig {
    /// Commented configuration holding the defaults.
    pub fn example() -> &'static str {
        EXAMPLE
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.n)
    }

    pub fn phase_functions(&self) -> Result<PhaseFunctions> {
        PhaseFunctions::new(self.phase)
    }

    pub fn initial_field(&self, grid: &TorusGrid) -> Result<ScalarField> {
        self.initial.sample(grid)
    }

    pub fn limit_config(&self) -> Result<LimitConfig> {
        let grid = self.grid()?;
        let mut cfg = LimitConfig::new(&grid, self.phase_functions()?, self.time.dt, self.time.t_end)
            .with_stride(self.time.stride);
        if let Some(a) = self.time.imex_a {
            cfg = cfg.with_imex_a(a);
        }
        if !self.forcing.terms.is_empty() {
            cfg = cfg.with_forcing(Forcing::Fourier(self.forcing.terms.clone()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let base = self.limit_config()?;
        let noise = NoiseSpec::new(make_family(self.noise.radius)?, &base.grid, self.noise.seed)?;
        let cfg = SolverConfig::new(base, noise).with_scheme(self.time.scheme);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let base = self.limit_config()?;
        let initial = self.initial_field(&base.grid)?;
        let e = &self.experiment;
        let mut plan = ExperimentPlan::new(base, initial, e.radii.clone(), e.replicas);
        plan.base_seed = e.base_seed;
        plan.max_abort_fraction = e.max_abort_fraction;
        plan.state_bound = e.state_bound;
        plan.probe_mode = e.probe_mode;
        plan.holder = e.holder;
        plan.validate()?;
        Ok(plan)
    }

    /// Checks everything the commands would build.
    pub fn validate(&self) -> Result<()> {
        self.solver_config()?;
        let grid = self.grid()?;
        self.initial_field(&grid)?;
        self.plan()?;
        Ok(())
    }
}
