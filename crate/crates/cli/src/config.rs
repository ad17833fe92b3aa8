//! Experiment configuration: a flat `key = value` file with `#` comments,
//! overridden key by key from the command line.

use std::collections::BTreeMap;
use std::path::PathBuf;

use plap_core::mesh::{Domain, DomainKind};
use plap_core::solver::{BoundaryData, RegularizationSchedule, SolverConfig};
use plap_core::{ExactSolution, Point};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Solve,
    Frequency,
    Verify,
    Doubling,
    Linearize,
    Probes,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Frequency => "frequency",
            Kind::Verify => "verify",
            Kind::Doubling => "doubling",
            Kind::Linearize => "linearize",
            Kind::Probes => "probes",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Kind::Solve,
            "frequency" => Kind::Frequency,
            "verify" => Kind::Verify,
            "doubling" => Kind::Doubling,
            "linearize" => Kind::Linearize,
            "probes" => Kind::Probes,
            _ => return None,
        })
    }
}

/// Series drawn in the profile plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    I,
    D,
    F,
}

impl Series {
    pub fn label(self) -> &'static str {
        match self {
            Series::I => "I",
            Series::D => "D",
            Series::F => "F",
        }
    }
}

pub const KEYS: &[(&str, &str)] = &[
    ("kind", "solve"),
    ("domain", "disc"),
    ("center", "0,0"),
    ("r_outer", "1"),
    ("r_inner", "0.25"),
    ("h", "0.02"),
    ("p", "2"),
    ("boundary", "harmpoly:2"),
    ("ball_center", "auto"),
    ("window", "0.1,0.8"),
    ("grid", "64"),
    ("n_theta", "256"),
    ("eps0", "0.1"),
    ("eps_factor", "0.1"),
    ("eps_min", "1e-8"),
    ("picard_tol", "1e-10"),
    ("residual_tol", "1e-8"),
    ("max_outer", "20"),
    ("max_inner", "200"),
    ("linear_tol", "1e-12"),
    ("seed", "0"),
    ("out", "plap_out"),
    ("plot", "F"),
    ("alpha", "1,0"),
    ("field", "auto"),
    ("samples", "100"),
];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub domain: Domain,
    pub h: f64,
    pub p: f64,
    pub boundary_id: String,
    pub ball_center: Point,
    pub r_b: f64,
    pub r_big: f64,
    pub grid: usize,
    pub n_theta: usize,
    pub schedule: RegularizationSchedule,
    pub solver: SolverConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub plot: Vec<Series>,
    pub alpha: [f64; 2],
    pub field: String,
    pub samples: usize,
    raw: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let k = normalize_key(k);
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(CliError::Config(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(map)
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("`{key} = {value}`: {what}"))
}

fn num<T: std::str::FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let v = &raw[key];
    v.parse().map_err(|_| bad(key, v, "not a number"))
}

fn pair(raw: &BTreeMap<String, String>, key: &str) -> Result<[f64; 2], CliError> {
    let v = &raw[key];
    let parts: Vec<f64> = v
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad(key, v, "expected two comma-separated numbers"))?;
    match parts.as_slice() {
        [a, b] if a.is_finite() && b.is_finite() => Ok([*a, *b]),
        _ => Err(bad(key, v, "expected two comma-separated numbers")),
    }
}

impl ExperimentConfig {
    /// Defaults, then `file` entries, then `overrides`.
    pub fn resolve(
        kind: Kind,
        file: BTreeMap<String, String>,
        overrides: BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let mut raw: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        raw.extend(file);
        for (k, v) in overrides {
            let k = normalize_key(&k);
            if !raw.contains_key(&k) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            raw.insert(k, v);
        }
        raw.insert("kind".into(), kind.name().into());
        Self::from_raw(raw)
    }

    fn from_raw(raw: BTreeMap<String, String>) -> Result<Self, CliError> {
        let kind = Kind::parse(&raw["kind"]).ok_or_else(|| bad("kind", &raw["kind"], "unknown experiment kind"))?;
        let center = pair(&raw, "center")?;
        let r_outer: f64 = num(&raw, "r_outer")?;
        let r_inner: f64 = num(&raw, "r_inner")?;
        let domain = match raw["domain"].as_str() {
            "disc" => Domain::disc(center, r_outer),
            "annulus" => Domain::annulus(center, r_inner, r_outer),
            other => return Err(bad("domain", other, "expected `disc` or `annulus`")),
        }?;
        let h: f64 = num(&raw, "h")?;
        if !(h > 0.0 && h <= domain.width() / 2.0) {
            return Err(bad("h", &raw["h"], "need 0 < h <= half the domain width"));
        }
        let p: f64 = num(&raw, "p")?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(bad("p", &raw["p"], "need 1 < p < inf"));
        }
        let ball_center = match raw["ball_center"].as_str() {
            "auto" => match domain.kind {
                DomainKind::Disc => center,
                DomainKind::Annulus => [center[0] + 0.5 * (r_inner + r_outer), center[1]],
            },
            _ => pair(&raw, "ball_center")?,
        };
        let [r_b, r_big] = pair(&raw, "window")?;
        if !(0.0 <= r_b && r_b < r_big) {
            return Err(bad("window", &raw["window"], "need 0 <= r_b < R_b"));
        }
        let offset = (ball_center[0] - center[0]).hypot(ball_center[1] - center[1]);
        // polygonal outer boundary sits up to h^2/(8 R) inside the circle
        let outer_room = r_outer - h * h / (4.0 * r_outer);
        let inside = offset + r_big < outer_room
            && (domain.kind == DomainKind::Disc || offset - r_big > r_inner);
        if !inside {
            return Err(bad("window", &raw["window"], "ball B(ball_center, R_b) must lie inside the domain"));
        }
        let grid: usize = num(&raw, "grid")?;
        if grid < 8 {
            return Err(bad("grid", &raw["grid"], "need at least 8 radii"));
        }
        let n_theta: usize = num(&raw, "n_theta")?;
        if n_theta < 64 {
            return Err(bad("n_theta", &raw["n_theta"], "need at least 64 angles"));
        }
        let schedule = RegularizationSchedule {
            eps0: num(&raw, "eps0")?,
            factor: num(&raw, "eps_factor")?,
            eps_min: num(&raw, "eps_min")?,
        };
        schedule.validate()?;
        let solver = SolverConfig {
            picard_tol: num(&raw, "picard_tol")?,
            residual_tol: num(&raw, "residual_tol")?,
            max_outer: num(&raw, "max_outer")?,
            max_inner: num(&raw, "max_inner")?,
            linear_tol: num(&raw, "linear_tol")?,
        };
        solver.validate()?;
        let plot = match raw["plot"].as_str() {
            "none" | "" => Vec::new(),
            s => s
                .split(',')
                .map(|t| match t.trim() {
                    "I" => Ok(Series::I),
                    "D" => Ok(Series::D),
                    "F" => Ok(Series::F),
                    _ => Err(bad("plot", s, "expected a list of I, D, F or `none`")),
                })
                .collect::<Result<_, _>>()?,
        };
        let alpha = pair(&raw, "alpha")?;
        if kind == Kind::Linearize && alpha == [0.0, 0.0] {
            return Err(bad("alpha", &raw["alpha"], "alpha must be nonzero"));
        }
        let field = match raw["field"].as_str() {
            "auto" => raw["boundary"].clone(),
            f => f.to_string(),
        };
        let samples: usize = num(&raw, "samples")?;
        if samples == 0 {
            return Err(bad("samples", "0", "need at least one sample"));
        }
        let cfg = Self {
            kind,
            domain,
            h,
            p,
            boundary_id: raw["boundary"].clone(),
            ball_center,
            r_b,
            r_big,
            grid,
            n_theta,
            schedule,
            solver,
            seed: num(&raw, "seed")?,
            out: PathBuf::from(&raw["out"]),
            plot,
            alpha,
            field,
            samples,
            raw,
        };
        if kind != Kind::Linearize {
            cfg.boundary()?;
        }
        Ok(cfg)
    }

    /// Catalog id, or `csv:PATH` for explicit boundary-vertex values.
    pub fn boundary(&self) -> Result<BoundaryData, CliError> {
        if let Some(path) = self.boundary_id.strip_prefix("csv:") {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("boundary file `{path}`: {e}")))?;
            return Ok(BoundaryData::from_csv(&text)?);
        }
        Ok(BoundaryData::Exact(ExactSolution::from_id(&self.boundary_id, self.p)?))
    }

    /// Effective settings as sorted `key = value` lines, without `out`.
    pub fn canonical(&self) -> String {
        self.raw
            .iter()
            .filter(|(k, _)| k.as_str() != "out")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
