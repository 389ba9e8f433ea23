//! Run configuration: flat `section.key = value` lines, parsed as TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use landau_core::bounds::{DEFAULT_C1, DEFAULT_C2};
use landau_core::coefficients::default_c_factor;
use landau_core::{KernelParams, ScalarField, VelocityGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub counterexample: CounterexampleSection,
    /// Filled in from the command line.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_name() -> String {
    "run".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 2, half_width: 8.0, n: 129 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct KernelConfig {
    pub gamma: f64,
    #[serde(rename = "aConst")]
    pub a_const: f64,
    /// Defaults to aConst (d-1)(d+gamma).
    #[serde(rename = "cConst")]
    pub c_const: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { gamma: -1.0, a_const: 1.0, c_const: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InitKind {
    Maxwellian,
    Bump,
    /// Several bumps with centres drawn from the seed.
    Bumps,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct InitConfig {
    pub kind: InitKind,
    pub radius: f64,
    pub height: f64,
    pub center: Option<Vec<f64>>,
    pub count: usize,
    /// Bump centres are drawn uniformly from [-spread, spread]^d.
    pub spread: f64,
    pub path: Option<PathBuf>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { kind: InitKind::Maxwellian, radius: 1.0, height: 1.0, center: None, count: 2, spread: 1.0, path: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct SolverSection {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub refresh_every: usize,
    pub record_every: usize,
    pub clamp_negatives: bool,
    pub entropy_tolerance: f64,
    pub abort_mass_drift: f64,
    pub mass_tolerance: f64,
    pub energy_tolerance: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            t_end: 0.5,
            cfl_safety: 0.4,
            refresh_every: 1,
            record_every: 1,
            clamp_negatives: true,
            entropy_tolerance: 1e-6,
            abort_mass_drift: 0.1,
            mass_tolerance: 1e-3,
            energy_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct BoundsSection {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    /// Mass lower bound; defaults to the mass of the initial field.
    #[serde(rename = "M1")]
    pub m1: Option<f64>,
    /// Conditional bound below gamma = -2: exponent p, weight kappa and
    /// the bound W0 on the weighted L^p norm.
    pub p: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(rename = "W0")]
    pub w0: Option<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { c1: DEFAULT_C1, c2: DEFAULT_C2, m1: None, p: None, kappa: None, w0: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct VerifySection {
    #[serde(rename = "M1")]
    pub m1: Option<f64>,
    /// Subset of plain, logImproved, lpInterp; all admissible ones when absent.
    pub variants: Option<Vec<String>>,
    /// Exponent for lpInterp; midpoint of the admissible interval when absent.
    pub p: Option<f64>,
    pub divergence_tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { m1: None, variants: None, p: None, divergence_tolerance: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct CounterexampleSection {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub samples: usize,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self { d: 2, p: 1.0, alpha: 1.0, times: vec![0.1, 0.5, 0.9, 0.99], samples: 10_000 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("malformed config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> Result<VelocityGrid> {
        if self.grid.d < 2 {
            bail!("the Landau kernel needs d >= 2 (grid.d = {})", self.grid.d);
        }
        Ok(VelocityGrid::new(self.grid.d, self.grid.half_width, self.grid.n)?)
    }

    pub fn kernel(&self) -> Result<KernelParams> {
        let d = self.grid.d;
        let k = &self.kernel;
        let c = k.c_const.unwrap_or(k.a_const * default_c_factor(d, k.gamma));
        Ok(KernelParams::with_constants(d, k.gamma, k.a_const, c)?)
    }

    pub fn initial_field(&self, grid: VelocityGrid) -> Result<ScalarField> {
        let init = &self.init;
        let d = grid.dim();
        match init.kind {
            InitKind::Maxwellian => Ok(ScalarField::maxwellian(grid)),
            InitKind::Bump => {
                let center = init.center.clone().unwrap_or_else(|| vec![0.0; d]);
                Ok(ScalarField::bump(grid, &center, init.radius, init.height)?)
            }
            InitKind::Bumps => {
                if init.count == 0 {
                    bail!("init.count must be at least 1");
                }
                if !(init.spread >= 0.0 && init.spread <= grid.half_width()) {
                    bail!("init.spread = {} must lie in [0, L]", init.spread);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut f = ScalarField::zeros(grid);
                for _ in 0..init.count {
                    let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-init.spread..=init.spread)).collect();
                    f = f.add(&ScalarField::bump(grid, &c, init.radius, init.height)?)?;
                }
                Ok(f)
            }
            InitKind::File => {
                let path = init.path.as_ref().context("init.kind = \"file\" needs init.path")?;
                let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let f = ScalarField::read_csv(std::io::BufReader::new(file))?;
                if f.grid() != &grid {
                    bail!("field in {} does not match the configured grid", path.display());
                }
                Ok(f)
            }
        }
    }
}
