//! Run configuration: command-line flags merged with an optional JSON file,
//! plus the density and map generators the flags can name.

use crate::CliError;
use clap::{Parser, ValueEnum};
use jacshape_core::domain_geom::{build_domain, inradius, Domain, Geometry, ShapeSpec};
use jacshape_core::field_core::{Fill, ScalarField};
use jacshape_core::flow_transport::{FlowConfig, GridMap, Interp};
use jacshape_core::jacobian_solver::{MethodChoice, SupportedConfig};
use jacshape_core::{samples, tolerances};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve det ∇φ = f and write the map, a report and heatmaps.
    Solve,
    /// Recompute the residuals of a stored map against f.
    Verify,
    /// Correct a given map to a volume-preserving one that agrees with it
    /// near the boundary.
    CorrectVolume,
    /// Sweep the collar thickness and record the solver constant.
    ExperimentCollar,
    /// Compare the 1D solvers against the closed form.
    #[value(name = "oracle-1d")]
    #[serde(rename = "oracle-1d")]
    Oracle1d,
}

/// Command-line flags. Every flag except the command may also be set in the
/// JSON file given by `--config`, whose values win.
#[derive(Parser, Debug)]
#[command(name = "jacshape", version, about = "Prescribed Jacobian solver with support control")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// disk, square, interval or mask:<path to PGM>.
    #[arg(long)]
    pub domain: Option<String>,
    /// Grid cells per unit length of the shape (radius, side or length).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Density: a field file (JSON or CSV), `one`, `bump:<amplitude>` or
    /// `seeded:<amplitude>`.
    #[arg(long)]
    pub f: Option<String>,
    /// Map: a file written by `solve`, `identity` or
    /// `squeeze:<amplitude>:<radius>`.
    #[arg(long)]
    pub phi: Option<String>,
    /// Collar thickness.
    #[arg(long)]
    pub collar: Option<f64>,
    /// Distance of supp(f − 1) from the boundary; selects the
    /// general-domain solver.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Solver route; `auto` is the closed form in 1D, else the fixed point when its gate passes and the full pipeline otherwise
    #[arg(long, value_parser = ["auto", "moser", "fixedpoint", "full"])]
    pub method: Option<String>,
    /// Output directory (default jacshape-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bound on ‖det ∇φ − f‖∞ for exit code 0 (default 5e-3)
    #[arg(long)]
    pub tol_det: Option<f64>,
    /// Bound on |φ − id| over the identity region (default 1e-6 + 5h²)
    #[arg(long)]
    pub tol_support: Option<f64>,
    /// RK4 steps of the Moser flow (default 32)
    #[arg(long)]
    pub time_steps: Option<usize>,
    /// Initial mollifier radius of the full pipeline (default 0.05)
    #[arg(long)]
    pub mollify_radius: Option<f64>,
    /// Seed of `seeded:<amplitude>` densities (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the forward flow displacement of every time step (Moser solve).
    #[arg(long)]
    pub dump_flow: bool,
    /// JSON file of settings overriding the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Defaults to `interval` for `oracle-1d`, `disk` otherwise.
    pub domain: Option<String>,
    /// Defaults to 512 for `oracle-1d`, 64 otherwise.
    pub resolution: Option<usize>,
    pub f: String,
    pub phi: Option<String>,
    pub collar: f64,
    pub distance: Option<f64>,
    pub method: MethodChoice,
    pub out: PathBuf,
    pub tol_det: f64,
    /// Defaults to `10⁻⁶ + 5 h²`.
    pub tol_support: Option<f64>,
    pub time_steps: usize,
    pub mollify_radius: f64,
    pub seed: u64,
    pub dump_flow: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Solve,
            domain: None,
            resolution: None,
            f: "one".into(),
            phi: None,
            collar: 0.1,
            distance: None,
            method: MethodChoice::Auto,
            out: PathBuf::from("jacshape-out"),
            tol_det: 5e-3,
            tol_support: None,
            time_steps: FlowConfig::default().time_steps,
            mollify_radius: SupportedConfig::default().mollify_radius,
            seed: 0,
            dump_flow: false,
        }
    }
}

/// Where a density comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySource {
    One,
    /// Smooth zero-mean radial bump of the given amplitude about the deepest
    /// node, with radius half the inradius.
    Bump(f64),
    /// Seeded sum of zero-mean bumps in the same ball.
    Seeded(f64),
    File(PathBuf),
}

/// Where a map comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSource {
    Identity,
    Squeeze { amplitude: f64, radius: f64 },
    File(PathBuf),
}

fn number(text: &str, what: &str) -> Result<f64, CliError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("{what}: `{text}` is not a number")))
}

impl DensitySource {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text == "one" {
            Ok(Self::One)
        } else if let Some(a) = text.strip_prefix("bump:") {
            Ok(Self::Bump(number(a, "bump amplitude")?))
        } else if let Some(a) = text.strip_prefix("seeded:") {
            Ok(Self::Seeded(number(a, "seeded amplitude")?))
        } else {
            Ok(Self::File(PathBuf::from(text)))
        }
    }
}

impl MapSource {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text == "identity" {
            return Ok(Self::Identity);
        }
        if let Some(rest) = text.strip_prefix("squeeze:") {
            let (a, r) = rest
                .split_once(':')
                .ok_or_else(|| CliError::Config("squeeze needs <amplitude>:<radius>".into()))?;
            return Ok(Self::Squeeze {
                amplitude: number(a, "squeeze amplitude")?,
                radius: number(r, "squeeze radius")?,
            });
        }
        Ok(Self::File(PathBuf::from(text)))
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} `{}` is not a readable file", path.display())))
    }
}

impl RunConfig {
    /// Flags, then the `--config` file on top, then validation.
    pub fn from_args(args: Args) -> Result<Self, CliError> {
        let mut doc = serde_json::Map::new();
        let mut put = |key: &str, value: serde_json::Value| {
            doc.insert(key.to_string(), value);
        };
        put("command", serde_json::to_value(args.command).expect("serializable"));
        let fields: [(&str, Option<serde_json::Value>); 13] = [
            ("domain", args.domain.map(Into::into)),
            ("resolution", args.resolution.map(Into::into)),
            ("f", args.f.map(Into::into)),
            ("phi", args.phi.map(Into::into)),
            ("collar", args.collar.map(Into::into)),
            ("distance", args.distance.map(Into::into)),
            ("method", args.method.map(Into::into)),
            ("out", args.out.map(|p| p.to_string_lossy().into_owned().into())),
            ("tol_det", args.tol_det.map(Into::into)),
            ("tol_support", args.tol_support.map(Into::into)),
            ("time_steps", args.time_steps.map(Into::into)),
            ("mollify_radius", args.mollify_radius.map(Into::into)),
            ("seed", args.seed.map(Into::into)),
        ];
        for (key, value) in fields {
            if let Some(value) = value {
                put(key, value);
            }
        }
        if args.dump_flow {
            put("dump_flow", true.into());
        }
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
            let file: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
            let serde_json::Value::Object(entries) = file else {
                return Err(CliError::Config("config file must hold a JSON object".into()));
            };
            for (key, value) in entries {
                doc.insert(key, value);
            }
        }
        let cfg: RunConfig = serde_json::from_value(serde_json::Value::Object(doc))
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Positive tolerances and parameters, known shapes, existing files.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("tol_det", Some(self.tol_det)),
            ("tol_support", self.tol_support),
            ("collar", Some(self.collar)),
            ("distance", self.distance),
            ("mollify_radius", Some(self.mollify_radius)),
        ];
        for (name, value) in positive {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        self.shape()?;
        if let DensitySource::File(p) = DensitySource::parse(&self.f)? {
            require_file(&p, "density")?;
        }
        if let Some(phi) = &self.phi {
            if let MapSource::File(p) = MapSource::parse(phi)? {
                require_file(&p, "map")?;
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<ShapeSpec, CliError> {
        let name = self.domain.clone().unwrap_or_else(|| match self.command {
            Command::Oracle1d => "interval".into(),
            _ => "disk".into(),
        });
        match name.as_str() {
            "disk" => Ok(ShapeSpec::unit_disk()),
            "square" => Ok(ShapeSpec::unit_square()),
            "interval" => Ok(ShapeSpec::unit_interval()),
            other => match other.strip_prefix("mask:") {
                Some(path) => {
                    let path = PathBuf::from(path);
                    require_file(&path, "mask")?;
                    Ok(ShapeSpec::MaskFile { path })
                }
                None => Err(CliError::Config(format!("unknown domain `{other}`"))),
            },
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(match self.command {
            Command::Oracle1d => 512,
            _ => 64,
        })
    }

    pub fn build_domain(&self) -> Result<Arc<Domain>, CliError> {
        Ok(build_domain(&self.shape()?, self.resolution())?)
    }

    pub fn tol_support(&self, domain: &Domain) -> f64 {
        self.tol_support.unwrap_or_else(|| tolerances::support(domain.h()))
    }

    pub fn supported_config(&self) -> SupportedConfig {
        let mut cfg = SupportedConfig::default();
        cfg.flow.time_steps = self.time_steps;
        cfg.mollify_radius = self.mollify_radius;
        cfg
    }

    pub fn density(&self, domain: &Arc<Domain>) -> Result<ScalarField, CliError> {
        let (center, radius) = deepest_ball(domain);
        Ok(match DensitySource::parse(&self.f)? {
            DensitySource::One => ScalarField::ones(domain),
            DensitySource::Bump(a) if domain.dim() == 1 => {
                ScalarField::from_fn(domain, Fill::One, |x, _| {
                    1.0 + a * samples::even_zero_mean(x, center[0], radius)
                })
            }
            DensitySource::Bump(a) => samples::smooth_density(domain, a, center, radius),
            DensitySource::Seeded(a) if domain.dim() == 1 => {
                samples::seeded_interval_density(domain, self.seed, a, 3, center[0], radius)
            }
            DensitySource::Seeded(a) => {
                samples::seeded_density_at(domain, self.seed, a, 3, center, radius)
            }
            DensitySource::File(path) => {
                let text = std::fs::read_to_string(&path).map_err(jacshape_core::Error::from)?;
                jacshape_core::field_core::io::RawField::parse_any(&text)?
                    .into_scalar(domain, Fill::One)?
            }
        })
    }

    /// The map named by `--phi`; the identity when absent.
    pub fn map(&self, domain: &Arc<Domain>) -> Result<GridMap, CliError> {
        let source = match &self.phi {
            Some(text) => MapSource::parse(text)?,
            None => MapSource::Identity,
        };
        Ok(match source {
            MapSource::Identity => GridMap::identity(domain, Interp::Bicubic),
            MapSource::Squeeze { amplitude, radius } => {
                let (center, _) = deepest_ball(domain);
                GridMap::from_fn(domain, Interp::Bicubic, |x, y| {
                    let (dx, dy) = (x - center[0], y - center[1]);
                    let g = 1.0 + amplitude * samples::bump(dx.hypot(dy) / radius);
                    [center[0] + dx * g, center[1] + dy * g]
                })
            }
            MapSource::File(path) => {
                let text = std::fs::read_to_string(&path).map_err(jacshape_core::Error::from)?;
                GridMap::from_text(&text, domain)?
            }
        })
    }
}

/// Centre of the shape (the deepest in-mask node for mask files) and half
/// the inradius.
pub fn deepest_ball(domain: &Domain) -> ([f64; 2], f64) {
    let center = match &domain.geometry {
        Geometry::Interval { a, b } => [0.5 * (a + b), 0.0],
        Geometry::Disk { center, .. } => *center,
        Geometry::Rectangle { min, max } => [0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])],
        Geometry::Raster | Geometry::Sublevel { .. } => {
            let k = (0..domain.len())
                .filter(|&k| domain.mask[k])
                .fold(None::<usize>, |best, k| match best {
                    Some(b) if domain.sdist[b] <= domain.sdist[k] => Some(b),
                    _ => Some(k),
                })
                .unwrap_or(0);
            domain.grid.point(k)
        }
    };
    (center, 0.5 * inradius(domain))
}
