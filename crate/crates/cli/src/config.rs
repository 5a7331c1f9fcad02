//! Run configuration: per-command defaults, a TOML file on top, then
//! `--set section.key=value` overrides.

use serde::{Deserialize, Serialize};
use skgs_core::grid::{make_grid, Grid1D, InitialData, NoiseCoupling, SchemeConfig, SchemeKind};
use skgs_core::montecarlo::{ConvergenceSpec, EnsembleSpec, NoiseProfile, NoiseSpec, ProblemSpec};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    ChargeLaw,
    EnergyLaw,
    Converge,
    Symplectic,
    Multisymplectic,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::ChargeLaw,
        Command::EnergyLaw,
        Command::Converge,
        Command::Symplectic,
        Command::Multisymplectic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ChargeLaw => "charge-law",
            Command::EnergyLaw => "energy-law",
            Command::Converge => "converge",
            Command::Symplectic => "symplectic",
            Command::Multisymplectic => "multisymplectic",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub a: f64,
    pub b: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub name: SchemeKind,
    pub dt: f64,
    pub t_final: f64,
    pub alpha: Vec<f64>,
    pub stages: usize,
    pub noise_coupling: NoiseCoupling,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub literal_mixed_index: bool,
}

/// `"sine"` or explicit values at the interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Values(Vec<f64>),
}

impl ProfileSpec {
    fn resolve(&self, field: &str) -> Result<NoiseProfile, CliError> {
        match self {
            ProfileSpec::Named(s) if s == "sine" => Ok(NoiseProfile::Sine),
            ProfileSpec::Named(s) => Err(CliError::Usage(format!("{field}: unknown profile `{s}` (expected \"sine\" or an array)"))),
            ProfileSpec::Values(v) => Ok(NoiseProfile::Nodal(v.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub c1: f64,
    pub c2: f64,
    pub eta1: ProfileSpec,
    pub eta2: ProfileSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub samples: usize,
    pub seed: u64,
    pub record_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub dt_list: Vec<f64>,
    pub reference_dt: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentSection {
    pub pairs: usize,
    pub steps: usize,
    pub seed: u64,
    /// Start every tangent at zero instead of at random.
    pub zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub record_stride: usize,
    /// Write the fields every this many steps (0 = never).
    pub snapshot_stride: usize,
}

/// Everything a run depends on. Output locations and thread counts are
/// deliberately absent: they cannot change the numbers written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub scheme: SchemeSection,
    pub noise: NoiseSection,
    pub initial: InitialData,
    pub ensemble: EnsembleSection,
    pub convergence: ConvergenceSection,
    pub symplectic: TangentSection,
    pub simulate: SimulateSection,
}

const FIG3: &str = r#"
[grid]
a = 0.0
b = 1.0
cells = 16
[scheme]
name = "CFD-I"
dt = 0.09765625
t_final = 50.0
[initial]
kind = "zero_with_unit_velocity"
[ensemble]
samples = 2000
"#;

const FIG4: &str = r#"
[grid]
a = 0.0
b = 1.0
cells = 8
[scheme]
name = "CFD-I"
dt = 0.0244140625
t_final = 50.0
[initial]
kind = "zero_with_unit_velocity"
[ensemble]
samples = 2000
"#;

const SOLITON: &str = r#"
[grid]
a = -15.0
b = 15.0
cells = 256
[scheme]
name = "CFD-I"
dt = 0.125
t_final = 1.0
[initial]
kind = "soliton"
theta = 0.3
"#;

const TANGENTS: &str = r#"
[grid]
a = -15.0
b = 15.0
cells = 64
[scheme]
dt = 0.05
t_final = 0.5
[initial]
kind = "soliton"
theta = 0.3
"#;

const COMMON: &str = r#"
[scheme]
alpha = [0.001]
stages = 2
noise_coupling = "splitting"
fp_tol = 1e-12
fp_max_iter = 200
literal_mixed_index = false
[noise]
c1 = 1.0
c2 = 1.0
eta1 = "sine"
eta2 = "sine"
[ensemble]
samples = 200
seed = 20240601
record_stride = 1
[convergence]
dt_list = [0.125, 0.0625, 0.03125, 0.015625]
reference_dt = 0.00390625
samples = 200
[symplectic]
pairs = 8
steps = 10
seed = 1
zero = false
[simulate]
record_stride = 1
snapshot_stride = 0
"#;

fn parse_table(text: &str, origin: &str) -> Result<Table, CliError> {
    text.parse::<Table>()
        .map_err(|e| CliError::Usage(format!("{origin}: {e}")))
}

/// Recursively overlays `top` on `base`.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Defaults of `cmd` as a TOML table.
pub fn defaults(cmd: Command) -> Table {
    let mut t = parse_table(COMMON, "defaults").expect("built-in defaults parse");
    let specific = match cmd {
        Command::ChargeLaw => FIG3,
        Command::EnergyLaw => FIG4,
        Command::Simulate | Command::Converge => SOLITON,
        Command::Symplectic | Command::Multisymplectic => TANGENTS,
    };
    merge(&mut t, parse_table(specific, "defaults").expect("built-in defaults parse"));
    if cmd == Command::Simulate {
        merge(&mut t, parse_table("[scheme]\ndt = 0.01\n", "defaults").expect("built-in defaults parse"));
    }
    let scheme = match cmd {
        Command::Symplectic => Some("FD-SRK"),
        Command::Multisymplectic => Some("MSFD"),
        _ => None,
    };
    if let Some(name) = scheme {
        if let Some(Value::Table(s)) = t.get_mut("scheme") {
            s.insert("name".into(), Value::String(name.into()));
        }
    }
    t
}

/// Applies one `section.key=value` override. The value is read as a TOML
/// value when it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects section.key=value, got `{spec}`")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("--set key `{path}` must look like section.key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Usage(format!("--set {path}: `{k}` is not a section"))),
        };
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Resolves a config from defaults, an optional file body and overrides.
pub fn resolve(cmd: Command, file: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut t = defaults(cmd);
    if let Some(text) = file {
        let user = parse_table(text, "config")?;
        // A file replaces the initial-data table wholesale, since its keys
        // depend on the kind.
        if let Some(init) = user.get("initial") {
            t.insert("initial".into(), init.clone());
        }
        merge(&mut t, user);
    }
    for o in overrides {
        if o.trim_start().starts_with("initial.kind") {
            t.insert("initial".into(), Value::Table(Table::new()));
        }
        apply_override(&mut t, o)?;
    }
    let cfg: RunConfig = Table::try_into(t).map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
    cfg.validate(cmd)?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("embedded config: {}", e.message())))
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(make_grid(self.grid.a, self.grid.b, self.grid.cells)?)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let s = &self.scheme;
        SchemeConfig {
            scheme: s.name,
            dt: s.dt,
            t_final: s.t_final,
            alpha: s.alpha.clone(),
            stages: s.stages,
            noise_coupling: s.noise_coupling,
            fp_tol: s.fp_tol,
            fp_max_iter: s.fp_max_iter,
            literal_mixed_index: s.literal_mixed_index,
        }
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec, CliError> {
        Ok(NoiseSpec {
            c1: self.noise.c1,
            c2: self.noise.c2,
            eta1: self.noise.eta1.resolve("noise.eta1")?,
            eta2: self.noise.eta2.resolve("noise.eta2")?,
        })
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        Ok(ProblemSpec {
            grid: self.grid()?,
            scheme: self.scheme_config(),
            noise: self.noise_spec()?,
            initial: self.initial.clone(),
        })
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, CliError> {
        Ok(EnsembleSpec {
            problem: self.problem()?,
            samples: self.ensemble.samples,
            master_seed: self.ensemble.seed,
            record_stride: self.ensemble.record_stride,
        })
    }

    pub fn convergence_spec(&self) -> Result<ConvergenceSpec, CliError> {
        Ok(ConvergenceSpec {
            problem: self.problem()?,
            dt_list: self.convergence.dt_list.clone(),
            reference_dt: self.convergence.reference_dt,
            samples: self.convergence.samples,
            master_seed: self.ensemble.seed,
        })
    }

    /// Checks everything the command will use before any work starts.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let problem = self.problem()?;
        problem.setup()?;
        if self.ensemble.seed > i64::MAX as u64 {
            return Err(CliError::Usage("ensemble.seed must be below 2^63".into()));
        }
        if self.symplectic.seed > i64::MAX as u64 {
            return Err(CliError::Usage("symplectic.seed must be below 2^63".into()));
        }
        match cmd {
            Command::Simulate => {
                if self.simulate.record_stride == 0 {
                    return Err(CliError::Usage("simulate.record_stride must be at least 1".into()));
                }
            }
            Command::ChargeLaw | Command::EnergyLaw => self.ensemble_spec()?.validate()?,
            Command::Converge => {
                self.convergence_spec()?.validate()?;
            }
            Command::Symplectic | Command::Multisymplectic => {
                let want = if cmd == Command::Symplectic { SchemeKind::FdSrk } else { SchemeKind::Msfd };
                if self.scheme.name != want {
                    return Err(CliError::Usage(format!(
                        "{} needs scheme.name = \"{want}\", got \"{}\"",
                        cmd.name(),
                        self.scheme.name
                    )));
                }
                if self.scheme.literal_mixed_index {
                    return Err(CliError::Usage(
                        "tangent propagation is not available with scheme.literal_mixed_index".into(),
                    ));
                }
                if self.symplectic.pairs == 0 || self.symplectic.steps == 0 {
                    return Err(CliError::Usage("symplectic.pairs and symplectic.steps must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_command() {
        for cmd in Command::ALL {
            let cfg = resolve(cmd, None, &[]).unwrap();
            assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        let fig3 = resolve(Command::ChargeLaw, None, &[]).unwrap();
        assert_eq!(fig3.scheme.dt, 25.0 / 256.0);
        assert_eq!(fig3.grid.cells, 16);
        let fig4 = resolve(Command::EnergyLaw, None, &[]).unwrap();
        assert_eq!(fig4.scheme.dt, 25.0 / 1024.0);
        assert_eq!(fig4.grid.cells, 8);
        let conv = resolve(Command::Converge, None, &[]).unwrap();
        assert_eq!(conv.grid.b - conv.grid.a, 30.0);
        assert_eq!(conv.grid.cells, 256);
    }

    #[test]
    fn overrides_and_files_layer() {
        let file = "[scheme]\nname = \"SPS-II\"\n[initial]\nkind = \"soliton\"\ntheta = 0.2\n";
        let cfg = resolve(
            Command::ChargeLaw,
            Some(file),
            &["noise.c1=0.5".into(), "scheme.noise_coupling=paper".into()],
        )
        .unwrap();
        assert_eq!(cfg.scheme.name, SchemeKind::SpsII);
        assert_eq!(cfg.noise.c1, 0.5);
        assert_eq!(cfg.noise.c2, 1.0);
        assert_eq!(cfg.scheme.noise_coupling, NoiseCoupling::Paper);
        assert_eq!(cfg.initial, InitialData::Soliton { theta: 0.2 });
        let cfg = resolve(Command::Converge, None, &["initial.kind=zero_with_unit_velocity".into()]).unwrap();
        assert_eq!(cfg.initial, InitialData::ZeroWithUnitVelocity);
    }

    #[test]
    fn bad_configs_name_the_field() {
        let err = |cmd, o: &str| resolve(cmd, None, &[o.to_string()]).unwrap_err().to_string();
        assert!(err(Command::ChargeLaw, "grid.cells=1").contains("grid.cells"));
        assert!(err(Command::ChargeLaw, "grid.colour=1").contains("colour"));
        assert!(err(Command::ChargeLaw, "scheme.dt=0.3").contains("scheme.dt"));
        assert!(err(Command::Converge, "convergence.dt_list=[0.0625, 0.125]").contains("descending"));
        assert!(err(Command::Symplectic, "scheme.name=CFD-I").contains("FD-SRK"));
        assert!(err(Command::ChargeLaw, "noise.eta1=cosine").contains("cosine"));
        assert!(err(Command::ChargeLaw, "oops").contains("section.key=value"));
        assert!(err(Command::ChargeLaw, "scheme.literal_mixed_index=true").contains("MSFD"));
    }
}
