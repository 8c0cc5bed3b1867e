//! Run configuration: a flat `key = value` file overridden by command-line
//! flags.
//!
//! Recognized keys (with defaults):
//!
//! | key          | default | meaning                                        |
//! |--------------|---------|------------------------------------------------|
//! | `command`    | `run`   | run, mms-spatial, mms-temporal, stability, infsup |
//! | `re`         | 1       | hydrodynamic Reynolds number                   |
//! | `rm`         | 1       | magnetic Reynolds number                       |
//! | `s`          | 1       | coupling number (0 decouples)                  |
//! | `tau`        | 0.01    | time step                                      |
//! | `tfinal`     | 0.1     | final time                                     |
//! | `n`          | 4       | subdivisions per axis                          |
//! | `out`        | `out`   | output directory                               |
//! | `vtk_every`  | 0       | VTK snapshot cadence in steps (0 = none)       |
//! | `solver_tol` | 1e-10   | largest accepted scaled solver residual        |
//! | `grid`       | study default | comma-separated n values or step counts  |
//!
//! Lines starting with `#` and blank lines are ignored.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mhd_core::SchemeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Manufactured-solution run with per-step CSV and VTK snapshots.
    Run,
    /// Spatial convergence study of the manufactured solution.
    MmsSpatial,
    /// Temporal convergence study of the manufactured solution.
    MmsTemporal,
    /// Unforced decay run checking the energy identity.
    Stability,
    /// Discrete inf-sup constant of the velocity/pressure pair.
    Infsup,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::MmsSpatial => "mms-spatial",
            Command::MmsTemporal => "mms-temporal",
            Command::Stability => "stability",
            Command::Infsup => "infsup",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Command::Run, Command::MmsSpatial, Command::MmsTemporal, Command::Stability, Command::Infsup]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("output directory {path} is not writable: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

/// Partially specified settings, from a file or from flags.
#[derive(Debug, Default, Clone, PartialEq, clap::Args)]
pub struct Overrides {
    /// Hydrodynamic Reynolds number.
    #[arg(long)]
    pub re: Option<f64>,
    /// Magnetic Reynolds number.
    #[arg(long)]
    pub rm: Option<f64>,
    /// Coupling number S.
    #[arg(long = "s-coupling")]
    pub s: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Final time.
    #[arg(long = "tfinal")]
    pub t_final: Option<f64>,
    /// Mesh subdivisions per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// VTK snapshot cadence in steps (0 disables snapshots).
    #[arg(long = "vtk-every")]
    pub vtk_every: Option<usize>,
    /// Largest accepted scaled residual of a linear solve.
    #[arg(long = "solver-tol")]
    pub solver_tol: Option<f64>,
    /// Study grid: mesh subdivisions (mms-spatial) or step counts (mms-temporal).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(skip)]
    pub command: Option<Command>,
}

impl Overrides {
    /// Values of `over` take precedence.
    pub fn merge(self, over: Overrides) -> Overrides {
        Overrides {
            re: over.re.or(self.re),
            rm: over.rm.or(self.rm),
            s: over.s.or(self.s),
            tau: over.tau.or(self.tau),
            t_final: over.t_final.or(self.t_final),
            n: over.n.or(self.n),
            out: over.out.or(self.out),
            vtk_every: over.vtk_every.or(self.vtk_every),
            solver_tol: over.solver_tol.or(self.solver_tol),
            grid: over.grid.or(self.grid),
            command: over.command.or(self.command),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

/// Parses the text of a config file.
pub fn parse_config_text(text: &str) -> Result<Overrides, ConfigError> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.into() });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "command" => o.command = Some(parse_value(key, value)?),
            "re" => o.re = Some(parse_value(key, value)?),
            "rm" => o.rm = Some(parse_value(key, value)?),
            "s" => o.s = Some(parse_value(key, value)?),
            "tau" => o.tau = Some(parse_value(key, value)?),
            "tfinal" => o.t_final = Some(parse_value(key, value)?),
            "n" => o.n = Some(parse_value(key, value)?),
            "out" => o.out = Some(PathBuf::from(value)),
            "vtk_every" => o.vtk_every = Some(parse_value(key, value)?),
            "solver_tol" => o.solver_tol = Some(parse_value(key, value)?),
            "grid" => {
                o.grid = Some(value.split(',').map(|v| parse_value(key, v.trim())).collect::<Result<_, _>>()?)
            }
            _ => return Err(ConfigError::UnknownKey { line: i + 1, key: key.into() }),
        }
    }
    Ok(o)
}

pub fn parse_config_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_config_text(&text)
}

/// Validated settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub re: f64,
    pub rm: f64,
    pub s: f64,
    pub tau: f64,
    pub t_final: f64,
    pub n: usize,
    pub out: PathBuf,
    pub vtk_every: usize,
    pub solver_tol: f64,
    pub grid: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SchemeParams::default();
        Self {
            command: Command::Run,
            re: p.re,
            rm: p.rm,
            s: p.s,
            tau: p.tau,
            t_final: p.t_final,
            n: p.n,
            out: PathBuf::from("out"),
            vtk_every: 0,
            solver_tol: 1e-10,
            grid: None,
        }
    }
}

/// Defaults, then the config file (if any), then `flags`.
pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<RunConfig, ConfigError> {
    let from_file = match file {
        Some(path) => parse_config_file(path)?,
        None => Overrides::default(),
    };
    RunConfig::from_overrides(from_file.merge(flags))
}

impl RunConfig {
    pub fn from_overrides(o: Overrides) -> Result<Self, ConfigError> {
        let d = RunConfig::default();
        let cfg = RunConfig {
            command: o.command.unwrap_or(d.command),
            re: o.re.unwrap_or(d.re),
            rm: o.rm.unwrap_or(d.rm),
            s: o.s.unwrap_or(d.s),
            tau: o.tau.unwrap_or(d.tau),
            t_final: o.t_final.unwrap_or(d.t_final),
            n: o.n.unwrap_or(d.n),
            out: o.out.unwrap_or(d.out),
            vtk_every: o.vtk_every.unwrap_or(d.vtk_every),
            solver_tol: o.solver_tol.unwrap_or(d.solver_tol),
            grid: o.grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scheme_params(&self) -> SchemeParams {
        SchemeParams { re: self.re, rm: self.rm, s: self.s, tau: self.tau, t_final: self.t_final, n: self.n }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scheme_params().validate().map_err(|e| match e {
            mhd_core::Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "Re" => "re",
                    "Rm" => "rm",
                    "S" => "s",
                    "T" => "tfinal",
                    other => other,
                };
                ConfigError::Invalid { key: key.into(), reason }
            }
            other => ConfigError::Invalid { key: "config".into(), reason: other.to_string() },
        })?;
        if !(self.solver_tol > 0.0 && self.solver_tol.is_finite()) {
            return Err(ConfigError::Invalid { key: "solver_tol".into(), reason: "must be positive".into() });
        }
        if let Some(grid) = &self.grid {
            if grid.len() < 3 || grid.contains(&0) {
                return Err(ConfigError::Invalid {
                    key: "grid".into(),
                    reason: "needs at least 3 positive entries".into(),
                });
            }
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.s == 0.0 {
            out.push("S = 0: the fluid and the magnetic field are decoupled".into());
        }
        out
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<(), ConfigError> {
        let err = |source| ConfigError::Output { path: self.out.clone(), source };
        fs::create_dir_all(&self.out).map_err(err)?;
        let probe = self.out.join(".write-probe");
        fs::write(&probe, b"").map_err(err)?;
        fs::remove_file(&probe).map_err(err)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = RunConfig::from_overrides(parse_config_text("").unwrap()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.re, cfg.rm, cfg.s, cfg.n, cfg.tau, cfg.t_final), (1.0, 1.0, 1.0, 4, 0.01, 0.1));
    }

    #[test]
    fn file_values_and_flag_precedence() {
        let file = parse_config_text("# comment\ncommand = stability\nre = 2\n\ntau=0.05\ntfinal = 1\ngrid = 2, 4, 8\n").unwrap();
        let flags = Overrides { re: Some(3.0), n: Some(2), ..Default::default() };
        let cfg = RunConfig::from_overrides(file.merge(flags)).unwrap();
        assert_eq!(cfg.command, Command::Stability);
        assert_eq!(cfg.re, 3.0);
        assert_eq!(cfg.n, 2);
        assert_eq!(cfg.tau, 0.05);
        assert_eq!(cfg.grid, Some(vec![2, 4, 8]));
    }

    #[test]
    fn zero_coupling_warns() {
        let cfg = RunConfig::from_overrides(parse_config_text("s = 0").unwrap()).unwrap();
        assert_eq!(cfg.warnings().len(), 1);
        assert!(RunConfig::default().warnings().is_empty());
    }

    #[test]
    fn rejections_name_the_key() {
        let bad = |text: &str| RunConfig::from_overrides(parse_config_text(text)?);
        for (text, key) in [("tau = -1", "tau"), ("re = 0", "re"), ("s = -2", "s"), ("tfinal = 0.15\ntau = 0.1", "tau")] {
            let msg = bad(text).unwrap_err().to_string();
            assert!(msg.contains(&format!("`{key}`")), "{msg}");
        }
        assert!(matches!(parse_config_text("tau = abc"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse_config_text("speed = 3"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(parse_config_text("\nnonsense"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(parse_config_text("command = fly"), Err(ConfigError::Value { .. })));
        assert!(bad("grid = 2,4").is_err());
    }
}
