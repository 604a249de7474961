//! Flag definitions and `key = value` config files.

use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use geomforce_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "geomforce", version, about = "Curvature-induced geometric potential and force on implicit surfaces")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a surface expression and print a summary of its syntax tree.
    Parse(ParseArgs),
    /// Sample curvature fields on a surface and write them as JSON or CSV.
    Fields(FieldsArgs),
    /// Search a curvature field for critical points.
    Extrema(ExtremaArgs),
    /// Integrate constrained classical motion and check the centripetal force law.
    Classical(ClassicalArgs),
    /// Run the operator identity suite on a family of periodic grids.
    Verify(VerifyArgs),
    /// Estimate the geometric force in piconewtons.
    Force(ForceArgs),
    /// Evolve a wave packet and write its Ehrenfest trace.
    Ehrenfest(EhrenfestArgs),
    /// Merge earlier JSON outputs into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (written atomically); standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Catalog surface: circle, sphere, cylinder, spheroid, torus, plane.
    #[arg(long)]
    pub surface: Option<String>,
    /// Implicit surface expression f(x) = 0 in the variables x, y, z, w.
    #[arg(long)]
    pub expr: Option<String>,
    /// Ambient dimension of an expression surface.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Half width of the sampling box of an expression surface.
    #[arg(long, default_value_t = 2.0)]
    pub half_width: f64,
    /// Declare the expression an exact signed-distance function.
    #[arg(long)]
    pub signed_distance: bool,
    /// Radius `a` (circle, sphere, cylinder, spheroid equator); accepts length units.
    #[arg(long)]
    pub a: Option<String>,
    /// Polar semi-axis `b` of a spheroid; accepts length units.
    #[arg(long)]
    pub b: Option<String>,
    /// Torus major radius; accepts length units.
    #[arg(long = "R", alias = "major")]
    pub major: Option<String>,
    /// Torus tube radius; accepts length units.
    #[arg(long = "r", alias = "minor")]
    pub minor: Option<String>,
    /// Expression parameter binding `name=value` (repeatable).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Physical length of one model unit (e.g. `10nm`). Defaults to the first
    /// unit-bearing radius, or 1 m. `--curvature-scale` is the same flag.
    #[arg(long, alias = "curvature-scale")]
    pub length: Option<String>,
    /// Normal-field extension: signed-distance or gradient-normalized.
    #[arg(long, default_value = "signed-distance")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Expression text.
    pub expression: String,
    /// Ambient dimension used to check variable usage.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingKind {
    Parametric,
    Random,
}

#[derive(Debug, Args)]
pub struct FieldsArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long, value_enum, default_value_t = SamplingKind::Random)]
    pub sampling: SamplingKind,
    /// Parametric nodes along the first parameter.
    #[arg(long, default_value_t = 32)]
    pub nu: usize,
    /// Parametric nodes along the second parameter.
    #[arg(long, default_value_t = 16)]
    pub nv: usize,
    /// Number of random samples.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExtremaArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Field to search: lapM, vg_geom or M.
    #[arg(long, default_value = "lapM")]
    pub field: String,
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Relative projected-gradient tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 400)]
    pub max_iter: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Initial position as comma-separated coordinates (projected onto the surface).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Initial momentum as comma-separated components (made tangent).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Catalog parameter `u` of the start point when `--x` is absent.
    #[arg(long, default_value_t = 0.1)]
    pub u: f64,
    /// Catalog parameter `v` of the start point when `--x` is absent.
    #[arg(long, default_value_t = 0.0)]
    pub v: f64,
    /// Momentum magnitude when `--p` is absent.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Also rerun at 4dt and 2dt over the same time span and report orders.
    #[arg(long)]
    pub convergence: bool,
    /// Write the trajectory as CSV to this file.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// circle or torus.
    #[arg(long, default_value = "circle")]
    pub surface: String,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long = "R", alias = "major", default_value_t = 2.0)]
    pub major: f64,
    #[arg(long = "r", alias = "minor", default_value_t = 1.0)]
    pub minor: f64,
    /// Grid sizes per angle, at least three powers of two.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub grids: Vec<usize>,
    /// Identities to check (default: all).
    #[arg(long, value_delimiter = ',')]
    pub identities: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Number of random test states.
    #[arg(long, default_value_t = 6)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Fraction of Fourier modes populated in test states.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub band: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ForceArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Particle mass (kg, or suffixed with kg or g).
    #[arg(long)]
    pub mass: String,
    /// Evaluation point in model units, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Catalog parameters of the evaluation point when `--point` is absent.
    #[arg(long, default_value_t = 0.3)]
    pub u: f64,
    #[arg(long, default_value_t = 0.2)]
    pub v: f64,
    /// Evaluate at the largest-magnitude critical point of lapM instead.
    #[arg(long)]
    pub at_extremum: bool,
    /// Dimensionless |lapM| L³ below which the force is reported as zero.
    #[arg(long, default_value_t = 1e-10)]
    pub zero_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EhrenfestArgs {
    /// circle or torus.
    #[arg(long, default_value = "circle")]
    pub surface: String,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long = "R", alias = "major", default_value_t = 2.0)]
    pub major: f64,
    #[arg(long = "r", alias = "minor", default_value_t = 1.0)]
    pub minor: f64,
    /// Grid size per angle.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Packet centre angles, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Vec<f64>,
    /// Packet width in radians.
    #[arg(long, default_value_t = 0.2)]
    pub width: f64,
    /// Integer mode numbers per angle, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Vec<i64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON files produced by earlier runs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Expands `--config FILE` into flags. Keys also given on the command line are
/// skipped, so explicit flags win.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            config = Some(it.next().ok_or_else(|| Error::InvalidInput("--config needs a file".into()))?);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config `{path}`: {e}")))?;
    let sub = rest
        .get(1)
        .cloned()
        .ok_or_else(|| Error::InvalidInput("a config file needs a subcommand".into()))?;
    let cmd = Cli::command();
    let sub_cmd = cmd
        .find_subcommand(&sub)
        .ok_or_else(|| Error::InvalidInput(format!("unknown subcommand `{sub}`")))?;

    let explicit: Vec<&str> = rest[2..]
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("{path}:{}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| Error::InvalidInput(format!("{path}:{}: unknown key `{key}`", lineno + 1)))?;
        let names: Vec<&str> = arg.get_long().into_iter().chain(arg.get_all_aliases().unwrap_or_default()).collect();
        if names.iter().any(|n| explicit.contains(n)) {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value.to_string());
        } else {
            match value {
                "true" | "yes" | "1" => injected.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                other => {
                    return Err(Error::InvalidInput(format!(
                        "{path}:{}: `{key}` is a switch, got `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
    }
    let mut out = rest[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_flags_come_before_explicit_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# torus run\nsurface = torus\ngrids = 16,32,64\nseed=3\n").unwrap();
        let argv: Vec<String> = ["geomforce", "verify", "--config", path.to_str().unwrap(), "--seed", "9"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let expanded = expand_config(argv).unwrap();
        let cli = Cli::try_parse_from(&expanded).unwrap();
        let Command::Verify(v) = cli.command else { panic!() };
        assert_eq!(v.surface, "torus");
        assert_eq!(v.grids, vec![16, 32, 64]);
        assert_eq!(v.seed, 9);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "colour = blue\n").unwrap();
        let argv = vec!["geomforce".into(), "verify".into(), format!("--config={}", path.display())];
        assert!(expand_config(argv).is_err());
    }

    #[test]
    fn unknown_flags_are_errors() {
        assert!(Cli::try_parse_from(["geomforce", "verify", "--colour", "blue"]).is_err());
    }
}
