//! Analysis configuration: a flat `key = value` file with `[sections]`,
//! and the value grammars shared with the command line.
//!
//! ```text
//! [system]
//! gallery = sed_example
//! c1 = e^-4
//! c2 = e^2
//!
//! [analysis]
//! command = verify
//! certificate = SED:N=e^1,alpha=2,beta=1
//!
//! [window]
//! range = 0..200
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::checkers::{DichotomyCertificate, DichotomyKind, NedProfile, WindowSpec};
use crate::error::{Error, Result};
use crate::gallery::{make_example, GalleryEntry};
use crate::logscalar::LogScalar;
use crate::system::{Projection, ProjectionFamily, SystemDescription};

fn cfg_err(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Plain decimal or `e^x` (also `e^(x)`, `e^{x}`, `-e^x`).
pub fn parse_number(s: &str) -> Result<f64> {
    let l = parse_log_number(s)?;
    Ok(l.to_f64())
}

/// Like [`parse_number`] but keeps `e^x` exact in log form, so `e^5000`
/// stays representable.
pub fn parse_log_number(s: &str) -> Result<LogScalar> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) if rest.trim_start().starts_with("e^") => (true, rest.trim_start()),
        _ => (false, t),
    };
    let value = if let Some(exp) = body.strip_prefix("e^") {
        let exp = exp.trim();
        let inner = exp
            .strip_prefix('(')
            .and_then(|e| e.strip_suffix(')'))
            .or_else(|| exp.strip_prefix('{').and_then(|e| e.strip_suffix('}')))
            .unwrap_or(exp);
        let x: f64 = inner
            .trim()
            .parse()
            .map_err(|_| cfg_err(None, format!("invalid exponent in `{s}`")))?;
        LogScalar::exp(x)
    } else if body == "e" {
        LogScalar::exp(1.0)
    } else {
        let x: f64 = body
            .parse()
            .map_err(|_| cfg_err(None, format!("invalid number `{s}`")))?;
        LogScalar::from_f64(x)
    };
    Ok(if neg { -value } else { value })
}

/// `a..b` (inclusive on both ends).
pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| cfg_err(None, format!("expected `a..b`, got `{s}`")))?;
    let a = a.trim().strip_prefix('=').unwrap_or(a.trim());
    let b = b.trim().strip_prefix('=').unwrap_or(b.trim());
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| cfg_err(None, format!("invalid index `{v}` in `{s}`")))
    };
    Ok((p(a)?, p(b)?))
}

pub fn parse_window(s: &str) -> Result<WindowSpec> {
    let (a, b) = parse_range(s)?;
    WindowSpec::new(a, b)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_number)
        .collect()
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_list).collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(cfg_err(None, format!("ragged matrix `{s}`")));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn parse_mask(s: &str) -> Result<Vec<bool>> {
    s.split(',')
        .map(|v| match v.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(cfg_err(None, format!("mask entries are 0/1, got `{other}`"))),
        })
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(cfg_err(None, format!("expected a boolean, got `{other}`"))),
    }
}

/// `KIND:key=value,...`.
///
/// - `UED:N=1,alpha=0.5`
/// - `ED:N=e,alpha=0.5,beta=1`, `SED:...`
/// - `NED:alpha=0.69,N0=1,shift=2,power=1` for `N(n) = N0·(n+shift)^power`
/// - `NED:alpha=1,profile=gallery` takes the profile the gallery entry states
pub fn parse_certificate(
    s: &str,
    gallery: Option<&GalleryEntry>,
    horizon: usize,
) -> Result<DichotomyCertificate> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| cfg_err(None, format!("certificate `{s}` lacks `KIND:`")))?;
    let kind: DichotomyKind = kind.parse().map_err(|e: String| cfg_err(None, e))?;
    let mut kv = BTreeMap::new();
    for item in rest.split(',').filter(|i| !i.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| cfg_err(None, format!("expected key=value, got `{item}`")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let take = |k: &str| -> Result<&String> {
        kv.get(k)
            .ok_or_else(|| cfg_err(None, format!("certificate `{s}` is missing `{k}`")))
    };
    let num = |k: &str| -> Result<f64> { parse_number(take(k)?) };
    let known: &[&str] = match kind {
        DichotomyKind::Ued => &["N", "alpha"],
        DichotomyKind::Ed | DichotomyKind::Sed => &["N", "alpha", "beta"],
        DichotomyKind::Ned => &["alpha", "N0", "shift", "power", "profile"],
    };
    if let Some(k) = kv.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(cfg_err(None, format!("unknown certificate field `{k}`")));
    }
    let cert = match kind {
        DichotomyKind::Ued => DichotomyCertificate::Ued {
            n_const: parse_log_number(take("N")?)?,
            alpha: num("alpha")?,
        },
        DichotomyKind::Ed => {
            DichotomyCertificate::ed(parse_log_number(take("N")?)?, num("alpha")?, num("beta")?)
        }
        DichotomyKind::Sed => {
            DichotomyCertificate::sed(parse_log_number(take("N")?)?, num("alpha")?, num("beta")?)
        }
        DichotomyKind::Ned => {
            let alpha = num("alpha")?;
            if kv.get("profile").map(String::as_str) == Some("gallery") {
                let g = gallery
                    .ok_or_else(|| cfg_err(None, "profile=gallery needs a gallery system"))?;
                g.claims(horizon)
                    .into_iter()
                    .find_map(|c| match c.expectation {
                        crate::gallery::ClaimExpectation::Certified {
                            certificate: DichotomyCertificate::Ned { profile, .. },
                        } => Some(DichotomyCertificate::Ned { alpha, profile }),
                        _ => None,
                    })
                    .ok_or_else(|| cfg_err(None, format!("{} states no NED profile", g.name)))?
            } else {
                let n0 = kv.get("N0").map_or(Ok(LogScalar::ONE), |v| parse_log_number(v))?;
                let shift = kv.get("shift").map_or(Ok(0.0), |v| parse_number(v))?;
                let power = kv.get("power").map_or(Ok(0.0), |v| parse_number(v))?;
                DichotomyCertificate::Ned {
                    alpha,
                    profile: NedProfile::from_fn(0, horizon, |n| {
                        n0 * LogScalar::from_f64(n as f64 + shift).powf(power)
                    }),
                }
            }
        }
    };
    cert.validate()?;
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemSource {
    Gallery {
        name: String,
        params: Vec<(String, f64)>,
    },
    File(PathBuf),
}

/// Explicit system file (JSON): either a list of matrices `A(0..=N)` or a
/// constant matrix with a horizon.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SystemFile {
    Sequence { matrices: Vec<Vec<Vec<f64>>> },
    Constant { constant: Vec<Vec<f64>>, n_max: usize },
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSystem("matrices must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum CommandKind {
    #[default]
    Verify,
    Estimate,
    Falsify,
    Datko,
    GalleryClaims,
}

impl std::str::FromStr for CommandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "verify" => CommandKind::Verify,
            "estimate" => CommandKind::Estimate,
            "falsify" => CommandKind::Falsify,
            "datko" => CommandKind::Datko,
            "gallery-claims" => CommandKind::GalleryClaims,
            other => return Err(cfg_err(None, format!("unknown command `{other}`"))),
        })
    }
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Estimate => "estimate",
            CommandKind::Falsify => "falsify",
            CommandKind::Datko => "datko",
            CommandKind::GalleryClaims => "gallery-claims",
        }
    }
}

/// Explicit witness family given field by field.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WitnessSpec {
    pub m: Option<(usize, usize)>,
    pub n: Option<(usize, usize)>,
    pub direction: Option<Vec<f64>>,
    pub k: Option<(usize, usize)>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AnalysisConfig {
    pub command: CommandKind,
    pub source: Option<SystemSource>,
    pub mask: Option<Vec<bool>>,
    pub projection_matrix: Option<DMatrix<f64>>,
    pub window: Option<(usize, usize)>,
    pub triplet: bool,
    pub certificate: Option<String>,
    pub concept: Option<DichotomyKind>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub strong: bool,
    pub schedule: Option<String>,
    pub witness: WitnessSpec,
    pub d: Option<f64>,
    pub truncation: Option<usize>,
    pub big_d: Option<LogScalar>,
    pub datko_c: Option<f64>,
    pub horizon: Option<usize>,
    pub json_out: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
}

/// `[section]` → key → (value, line).
type Sections = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            out.entry(current.clone()).or_default();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(Some(line_no), format!("expected key = value, got `{line}`")))?;
        if current.is_empty() {
            return Err(cfg_err(Some(line_no), "key outside of a [section]"));
        }
        let k = k.trim().to_string();
        let sec = out.entry(current.clone()).or_default();
        if sec.contains_key(&k) {
            return Err(cfg_err(Some(line_no), format!("duplicate key `{current}.{k}`")));
        }
        sec.insert(k, (v.trim().to_string(), line_no));
    }
    Ok(out)
}

impl AnalysisConfig {
    /// Parse a config file's text; errors carry the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let sections = parse_sections(text)?;
        let mut cfg = AnalysisConfig::default();
        for (section, keys) in &sections {
            for (key, (value, line)) in keys {
                let at = |e: Error| match e {
                    Error::Config { message, .. } => cfg_err(
                        Some(*line),
                        format!("{section}.{key}: {message}"),
                    ),
                    other => cfg_err(Some(*line), format!("{section}.{key}: {other}")),
                };
                cfg.apply(section, key, value).map_err(at)?;
            }
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let unknown = || Err(cfg_err(None, "unknown key"));
        match (section, key) {
            ("system", "gallery") => {
                let params = match self.source.take() {
                    Some(SystemSource::Gallery { params, .. }) => params,
                    _ => vec![],
                };
                self.source = Some(SystemSource::Gallery {
                    name: value.to_string(),
                    params,
                });
            }
            ("system", "file") => self.source = Some(SystemSource::File(value.into())),
            ("system", p) => {
                let v = parse_number(value)?;
                match &mut self.source {
                    Some(SystemSource::Gallery { params, .. }) => params.push((p.to_string(), v)),
                    None => {
                        self.source = Some(SystemSource::Gallery {
                            name: String::new(),
                            params: vec![(p.to_string(), v)],
                        })
                    }
                    Some(SystemSource::File(_)) => {
                        return Err(cfg_err(None, "parameters only apply to gallery systems"))
                    }
                }
            }
            ("projection", "mask") => self.mask = Some(parse_mask(value)?),
            ("projection", "matrix") => self.projection_matrix = Some(parse_matrix(value)?),
            ("analysis", "command") => self.command = value.parse()?,
            ("analysis", "certificate") => self.certificate = Some(value.to_string()),
            ("analysis", "concept") => {
                self.concept = Some(value.parse().map_err(|e: String| cfg_err(None, e))?)
            }
            ("analysis", "alpha") => self.alpha = Some(parse_number(value)?),
            ("analysis", "strong") => self.strong = parse_bool(value)?,
            ("analysis", "triplet") => self.triplet = parse_bool(value)?,
            ("analysis", "schedule") => self.schedule = Some(value.to_string()),
            ("analysis", "d") => self.d = Some(parse_number(value)?),
            ("analysis", "truncation") => {
                self.truncation = Some(value.parse().map_err(|_| cfg_err(None, "expected an index"))?)
            }
            ("analysis", "big_d") => self.big_d = Some(parse_log_number(value)?),
            ("analysis", "datko_c") => self.datko_c = Some(parse_number(value)?),
            ("analysis", "horizon") => {
                self.horizon = Some(value.parse().map_err(|_| cfg_err(None, "expected an index"))?)
            }
            ("window", "range") => self.window = Some(parse_range(value)?),
            ("window", "n_min") | ("window", "m_max") => {
                let v: usize = value.parse().map_err(|_| cfg_err(None, "expected an index"))?;
                let (a, b) = self.window.unwrap_or((0, 0));
                self.window = Some(if key == "n_min" { (v, b) } else { (a, v) });
            }
            ("grid", "alpha") => self.alpha_grid = Some(parse_list(value)?),
            ("grid", "beta") => self.beta_grid = Some(parse_list(value)?),
            ("witness", "m") => self.witness.m = Some(parse_affine(value)?),
            ("witness", "n") => self.witness.n = Some(parse_affine(value)?),
            ("witness", "direction") => self.witness.direction = Some(parse_list(value)?),
            ("witness", "k") => self.witness.k = Some(parse_range(value)?),
            ("witness", "alpha") => self.witness.alpha = Some(parse_number(value)?),
            ("witness", "beta") => self.witness.beta = Some(parse_number(value)?),
            ("output", "json") => self.json_out = Some(value.into()),
            ("output", "csv") => self.csv_out = Some(value.into()),
            _ => return unknown(),
        }
        Ok(())
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        let (a, b) = self.window.unwrap_or((0, 50));
        let w = WindowSpec::new(a, b)?;
        Ok(WindowSpec {
            triplet: self.triplet,
            ..w
        })
    }

    /// Load the system and projection, plus the gallery entry if any.
    pub fn load_system(&self) -> Result<(SystemDescription, ProjectionFamily, Option<GalleryEntry>)> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| cfg_err(None, "no system given (use a gallery name or a system file)"))?;
        let (sys, default_proj, entry) = match source {
            SystemSource::Gallery { name, params } => {
                if name.is_empty() {
                    return Err(cfg_err(None, "gallery parameters given without a gallery name"));
                }
                let p: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                let g = make_example(name, &p)?;
                (g.system.clone(), Some(g.projection.clone()), Some(g))
            }
            SystemSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    cfg_err(None, format!("cannot read system file {}: {e}", path.display()))
                })?;
                let file: SystemFile = serde_json::from_str(&text).map_err(|e| {
                    cfg_err(Some(e.line()), format!("system file {}: {e}", path.display()))
                })?;
                let sys = match file {
                    SystemFile::Sequence { matrices } => SystemDescription::explicit(
                        matrices.iter().map(|m| rows_to_matrix(m)).collect::<Result<_>>()?,
                    )?,
                    SystemFile::Constant { constant, n_max } => {
                        SystemDescription::constant(rows_to_matrix(&constant)?, n_max)?
                    }
                };
                (sys, None, None)
            }
        };
        let proj = match (&self.mask, &self.projection_matrix) {
            (Some(_), Some(_)) => {
                return Err(cfg_err(None, "give either a projection mask or a matrix, not both"))
            }
            (Some(mask), None) => ProjectionFamily::constant(Projection::Mask(mask.clone()))?,
            (None, Some(m)) => ProjectionFamily::constant(Projection::Matrix(m.clone()))?,
            (None, None) => default_proj
                .ok_or_else(|| cfg_err(None, "explicit systems need a projection (mask or matrix)"))?,
        };
        if proj.dim() != sys.dim() {
            return Err(Error::InvalidProjection(format!(
                "projection has dimension {}, system has {}",
                proj.dim(),
                sys.dim()
            )));
        }
        Ok((sys, proj, entry))
    }
}

/// `scale,offset` for `k ↦ scale·k + offset`.
pub fn parse_affine(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| cfg_err(None, format!("expected `scale,offset`, got `{s}`")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| cfg_err(None, format!("invalid index `{v}`")))
    };
    Ok((p(a)?, p(b)?))
}
