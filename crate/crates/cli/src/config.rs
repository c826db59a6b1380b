use std::fs;
use std::path::{Path, PathBuf};

use eta_forge::eta::EtaQuadrature;
use eta_forge::linalg::{c, CMat};
use eta_forge::opmodel::build_group_model;
use eta_forge::EquivariantModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Eta,
    EtaGap,
    Stability,
    Rho,
    Volterra,
    #[serde(rename = "mckean-singer")]
    #[value(name = "mckean-singer")]
    McKeanSinger,
    KeyLemma,
    EqfeNumeric,
    EqfeSymbolic,
    Zeta,
    Decay,
    SmallTime,
    VerifyAll,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Eta => "eta",
            Scenario::EtaGap => "eta-gap",
            Scenario::Stability => "stability",
            Scenario::Rho => "rho",
            Scenario::Volterra => "volterra",
            Scenario::McKeanSinger => "mckean-singer",
            Scenario::KeyLemma => "key-lemma",
            Scenario::EqfeNumeric => "eqfe-numeric",
            Scenario::EqfeSymbolic => "eqfe-symbolic",
            Scenario::Zeta => "zeta",
            Scenario::Decay => "decay",
            Scenario::SmallTime => "small-time",
            Scenario::VerifyAll => "verify-all",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadOverrides {
    pub nodes: Option<usize>,
    pub u_factor: Option<f64>,
    pub kernel_tol: Option<f64>,
}

impl QuadOverrides {
    pub fn apply(&self) -> Result<EtaQuadrature, CliError> {
        let mut q = EtaQuadrature::default();
        if let Some(n) = self.nodes {
            if n < 16 {
                return Err(CliError::Config(format!("quad.nodes = {n} is below 16")));
            }
            q.nodes = n;
        }
        if let Some(u) = self.u_factor {
            if !(u > 0.0 && u.is_finite()) {
                return Err(CliError::Config(format!("quad.u_factor = {u} must be positive")));
            }
            q.u_factor = u;
        }
        q.kernel_tol = self.kernel_tol.or(q.kernel_tol);
        Ok(q)
    }
}

/// A run as read from `--config` (flags override individual fields).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub quad: QuadOverrides,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quick: bool,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub dump: bool,
    #[serde(default)]
    pub trace_ir: bool,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        RunConfig {
            scenario,
            model_path: None,
            quad: QuadOverrides::default(),
            seed: 0,
            quick: false,
            threads: None,
            out_dir: None,
            dump: false,
            trace_ir: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.model_path {
            if !p.is_file() {
                return Err(CliError::Config(format!("model file {} not found", p.display())));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        self.quad.apply()?;
        Ok(())
    }
}

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Generators { generators: Vec<MatrixSpec>, g_index: usize },
    Cyclic { cyclic: usize, weights: Vec<i64>, power: usize },
}

/// Model file: a group action plus the operator `d` and an optional perturbation `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub group: GroupSpec,
    #[serde(default)]
    pub d: Option<MatrixSpec>,
    #[serde(default)]
    pub c: Option<MatrixSpec>,
}

pub fn matrix_from_spec(m: &MatrixSpec) -> Result<CMat, CliError> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("matrices must be square and nonempty".into()));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(m[i][j][0], m[i][j][1])))
}

pub struct LoadedModel {
    pub model: EquivariantModel,
    pub d: Option<CMat>,
    pub c: Option<CMat>,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<LoadedModel, CliError> {
        let model = match &self.group {
            GroupSpec::Generators { generators, g_index } => {
                let gens = generators.iter().map(matrix_from_spec).collect::<Result<Vec<_>, _>>()?;
                build_group_model(&gens, *g_index)
            }
            GroupSpec::Cyclic { cyclic, weights, power } => EquivariantModel::cyclic(*cyclic, weights, *power),
        }
        .map_err(|e| CliError::Config(format!("group: {e}")))?;
        let d = self.d.as_ref().map(matrix_from_spec).transpose()?;
        let c = self.c.as_ref().map(matrix_from_spec).transpose()?;
        for m in d.iter().chain(c.iter()) {
            if m.nrows() != model.dim() {
                return Err(CliError::Config(format!(
                    "operator has dimension {}, group acts on {}",
                    m.nrows(),
                    model.dim()
                )));
            }
        }
        Ok(LoadedModel { model, d, c })
    }
}
