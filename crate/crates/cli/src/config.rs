//! Command-line flags, the JSON config file, and their merge.
//!
//! Every numeric option is optional at both layers; a flag wins over the
//! config file, which wins over the built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use grushin_core::FrameSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "grushin", version, about = "Geodesics, cut loci and heat kernels near Grushin points")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Frame spec `{"a": .., "coeffs": [{"i":..,"j":..,"c":..}]}`, inline or
    /// as a file path [default: the Grushin plane]
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Use the Grushin plane `(∂x, x ∂y)`
    #[arg(long, global = true, conflicts_with = "spec")]
    pub grushin: bool,
    /// JSON config file; its keys are the long flag names with underscores
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomised sampling [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reduced resolution
    #[arg(long, global = true)]
    pub quick: bool,
    #[arg(long, global = true, hide = true)]
    pub inject_fault: Option<Fault>,
}

/// Deliberate defects for checking that the selftest notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Flip the sign of `ṗ_x`.
    PxSign,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one geodesic and write its trajectory
    Geodesic(GeodesicArgs),
    /// Cut and conjugate loci from a base point
    Loci(LociArgs),
    /// Tangents and angle of the cut-locus corner at the Grushin point
    Corner(CornerArgs),
    /// Convergence orders of the small-rho series
    Series(SeriesArgs),
    /// Small-time heat-kernel exponent between two points
    Heat(HeatArgs),
    /// Oracle and invariant checks at reduced resolution
    Selftest(SelftestArgs),
}

macro_rules! overlay {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            /// Fills unset fields from `other`.
            pub fn or(self, other: Self) -> Self {
                Self { $($f: self.$f.or(other.$f)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicArgs {
    /// Base point x [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub base_x: Option<f64>,
    /// Base point y [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub base_y: Option<f64>,
    /// Initial covector angle [default: 0]
    #[arg(long, allow_hyphen_values = true, conflicts_with = "rho")]
    pub theta: Option<f64>,
    /// Launch from the Grushin point with p_y = 1/rho instead of from the base
    #[arg(long)]
    pub rho: Option<f64>,
    /// Sign of p_x for a rho launch [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<f64>,
    /// Final time [default: 1]
    #[arg(long)]
    pub t: Option<f64>,
    /// Integration tolerance [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
}
overlay!(GeodesicArgs { base_x, base_y, theta, rho, sign, t, tol });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LociArgs {
    /// Base point x [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub base_x: Option<f64>,
    /// Base point y [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub base_y: Option<f64>,
    /// Rays in the conjugate-locus scan [default: 128, quick 32]
    #[arg(long)]
    pub rays: Option<usize>,
    /// Rays in the cut-locus sampling [default: 128, quick 32]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Cut search horizon [default: 40 |x f(base)|]
    #[arg(long)]
    pub t_max: Option<f64>,
}
overlay!(LociArgs { base_x, base_y, rays, resolution, t_max });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerArgs {
    /// Coefficient a of f = 1 + a x; overrides --spec
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Relative tolerance on the tangents [default: 0.02]
    #[arg(long)]
    pub rel_tol: Option<f64>,
}
overlay!(CornerArgs { a, rel_tol });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesArgs {
    /// Coefficient a of f = 1 + a x; overrides --spec
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
}
overlay!(SeriesArgs { a });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatArgs {
    /// Source x [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub source_x: Option<f64>,
    /// Source y [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub source_y: Option<f64>,
    /// Target x [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub target_x: Option<f64>,
    /// Target y [default: pi/2]
    #[arg(long, allow_hyphen_values = true)]
    pub target_y: Option<f64>,
    /// Cells along the box side [default: 512, quick 160]
    #[arg(long)]
    pub cells: Option<usize>,
    /// Box half-width in units of d + 4 sqrt(t_max) [default: 1]
    #[arg(long)]
    pub margin: Option<f64>,
}
overlay!(HeatArgs { source_x, source_y, target_x, target_y, cells, margin });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {}

/// Layout of the JSON config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Frame spec object, or a path to a file holding one.
    pub spec: Option<serde_json::Value>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub quick: bool,
    #[serde(default)]
    pub geodesic: GeodesicArgs,
    #[serde(default)]
    pub loci: LociArgs,
    #[serde(default)]
    pub corner: CornerArgs,
    #[serde(default)]
    pub series: SeriesArgs,
    #[serde(default)]
    pub heat: HeatArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn parse_spec(text: &str, origin: &str) -> CliResult<FrameSpec> {
    FrameSpec::from_json(text).map_err(|e| CliError::Config(format!("frame spec from {origin}: {e}")))
}

fn spec_from_arg(arg: &str) -> CliResult<FrameSpec> {
    if arg.trim_start().starts_with('{') {
        parse_spec(arg, "--spec")
    } else {
        parse_spec(&read(Path::new(arg))?, arg)
    }
}

/// Settings shared by all subcommands after merging.
#[derive(Debug, Clone)]
pub struct Settings {
    pub spec: FrameSpec,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub seed: u64,
    pub quick: bool,
    pub fault: Option<Fault>,
}

/// Resolves the run settings and the config file's subcommand sections.
pub fn resolve(common: &CommonArgs) -> CliResult<(Settings, ConfigFile)> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let spec = if common.grushin {
        FrameSpec::nilpotent()
    } else if let Some(s) = &common.spec {
        spec_from_arg(s)?
    } else {
        match &file.spec {
            None => FrameSpec::nilpotent(),
            Some(serde_json::Value::String(path)) => spec_from_arg(path)?,
            Some(v) => parse_spec(&v.to_string(), "config")?,
        }
    };
    let settings = Settings {
        spec,
        out_dir: common.out_dir.clone().or_else(|| file.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
        threads: common.threads.or(file.threads).unwrap_or(0),
        seed: common.seed.or(file.seed).unwrap_or(0),
        quick: common.quick || file.quick,
        fault: common.inject_fault,
    };
    Ok((settings, file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"sead": 3}"#).is_err());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"heat": {"cell": 3}}"#).is_err());
        let ok: ConfigFile = serde_json::from_str(r#"{"seed": 3, "heat": {"cells": 64}, "spec": {"a": 0.1}}"#).unwrap();
        assert_eq!(ok.seed, Some(3));
        assert_eq!(ok.heat.cells, Some(64));
    }

    #[test]
    fn flags_win_over_config() {
        let flag = HeatArgs { cells: Some(100), ..Default::default() };
        let file = HeatArgs { cells: Some(64), margin: Some(0.8), ..Default::default() };
        let m = flag.or(file);
        assert_eq!(m.cells, Some(100));
        assert_eq!(m.margin, Some(0.8));
    }

    #[test]
    fn inline_spec_parses() {
        let s = spec_from_arg(r#"{"a": 0.1}"#).unwrap();
        assert_eq!(s.a(), 0.1);
    }
}
