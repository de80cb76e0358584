//! Command-line front end. Flags override values from `--config`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::checkers::{
    alpha_scale, default_alpha_grid, default_beta_grid, estimate_ed, estimate_ued,
    minimal_constant_by_span, minimal_ned_profile, verify_certificate, verify_triplet_form,
    DichotomyKind, WindowSpec,
};
use crate::config::{
    parse_affine, parse_certificate, parse_list, parse_log_number, parse_mask, parse_number,
    parse_range, AnalysisConfig, CommandKind, SystemSource,
};
use crate::datko::{
    certificate_to_datko, datko_round_trip, verify_datko_ed, verify_datko_ued, DatkoConstants,
};
use crate::error::{Error, Result};
use crate::gallery::GalleryEntry;
use crate::report::{emit_series, Outcome, Report, SystemRef, EXIT_CONFIG};
use crate::system::{ProjectionFamily, SystemDescription};
use crate::witness::{falsify, AffineIndex, WitnessSchedule};

#[derive(Parser, Debug)]
#[command(name = "dichotomy", version, about = "Dichotomy certificates for discrete linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a certificate on every pair (or triplet) of the window.
    Verify {
        #[command(flatten)]
        common: Common,
        /// e.g. `UED:N=1,alpha=0.5`, `SED:N=e^1,alpha=2,beta=1`
        #[arg(long)]
        cert: Option<String>,
        /// Check the triplet form instead of pairs.
        #[arg(long)]
        triplet: bool,
    },
    /// Estimate optimal constants on a grid (or the minimal NED profile).
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        concept: Option<String>,
        /// Comma-separated rates; defaults to a log-spaced grid.
        #[arg(long = "alpha-grid")]
        alpha_grid: Option<String>,
        #[arg(long = "beta-grid")]
        beta_grid: Option<String>,
        /// Restrict ED estimates to beta < alpha.
        #[arg(long)]
        strong: bool,
        /// Rate for the NED profile.
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Evaluate witness families against a concept.
    Falsify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        concept: Option<String>,
        /// Gallery schedule name, or `all`.
        #[arg(long)]
        schedule: Option<String>,
        /// `scale,offset` for m(k).
        #[arg(long = "witness-m")]
        witness_m: Option<String>,
        #[arg(long = "witness-n")]
        witness_n: Option<String>,
        /// Comma-separated initial vector.
        #[arg(long)]
        direction: Option<String>,
        /// Parameter range `a..b`.
        #[arg(long)]
        k: Option<String>,
        #[arg(long = "trial-alpha")]
        trial_alpha: Option<String>,
        #[arg(long = "trial-beta")]
        trial_beta: Option<String>,
    },
    /// Summation (Datko-type) criteria.
    Datko {
        #[command(flatten)]
        common: Common,
        /// Certificate whose induced constants are checked; also bounds the tail.
        #[arg(long)]
        cert: Option<String>,
        #[arg(long)]
        concept: Option<String>,
        /// Summation rate; defaults to alpha/2 of the certificate.
        #[arg(long)]
        d: Option<String>,
        /// Truncation index M.
        #[arg(long)]
        trunc: Option<usize>,
        #[arg(long = "big-d")]
        big_d: Option<String>,
        #[arg(long = "datko-c")]
        datko_c: Option<String>,
        #[arg(long)]
        strong: bool,
    },
    /// Reproduce the stated claims of a gallery example.
    GalleryClaims {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Key = value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, visible_alias = "name")]
    pub gallery: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub c1: Option<String>,
    #[arg(long)]
    pub c2: Option<String>,
    /// JSON system file.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Coordinate projection, e.g. `1,0`.
    #[arg(long)]
    pub mask: Option<String>,
    /// `n_min..m_max`
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn concept(s: &str) -> Result<DichotomyKind> {
    s.parse().map_err(|e: String| Error::Config { line: None, message: e })
}

fn opt_num(s: &Option<String>) -> Result<Option<f64>> {
    s.as_deref().map(parse_number).transpose()
}

impl Common {
    fn apply(&self, cfg: &mut AnalysisConfig) -> Result<()> {
        if let Some(name) = &self.gallery {
            let params = match cfg.source.take() {
                Some(SystemSource::Gallery { params, .. }) => params,
                _ => vec![],
            };
            cfg.source = Some(SystemSource::Gallery {
                name: name.clone(),
                params,
            });
        }
        if let Some(path) = &self.system {
            cfg.source = Some(SystemSource::File(path.clone()));
        }
        for (key, val) in [("b", &self.b), ("c", &self.c), ("c1", &self.c1), ("c2", &self.c2)] {
            let Some(v) = opt_num(val)? else { continue };
            match &mut cfg.source {
                Some(SystemSource::Gallery { params, .. }) => {
                    params.retain(|(k, _)| k != key);
                    params.push((key.to_string(), v));
                }
                _ => {
                    return Err(Error::Config {
                        line: None,
                        message: format!("--{key} needs --gallery"),
                    })
                }
            }
        }
        if let Some(m) = &self.mask {
            cfg.mask = Some(parse_mask(m)?);
            cfg.projection_matrix = None;
        }
        if let Some(w) = &self.window {
            cfg.window = Some(parse_range(w)?);
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if self.out.is_some() {
            cfg.json_out = self.out.clone();
        }
        if self.csv.is_some() {
            cfg.csv_out = self.csv.clone();
        }
        Ok(())
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Verify { common, .. }
            | Command::Estimate { common, .. }
            | Command::Falsify { common, .. }
            | Command::Datko { common, .. }
            | Command::GalleryClaims { common } => common,
        }
    }

    /// Merge the config file (if any) and the flags.
    pub fn to_config(&self) -> Result<AnalysisConfig> {
        let common = self.common();
        let mut cfg = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                    line: None,
                    message: format!("cannot read {}: {e}", path.display()),
                })?;
                AnalysisConfig::parse(&text)?
            }
            None => AnalysisConfig::default(),
        };
        common.apply(&mut cfg)?;
        match self {
            Command::Verify { cert, triplet, .. } => {
                cfg.command = CommandKind::Verify;
                if cert.is_some() {
                    cfg.certificate = cert.clone();
                }
                cfg.triplet |= *triplet;
            }
            Command::Estimate {
                concept: c,
                alpha_grid,
                beta_grid,
                strong,
                alpha,
                ..
            } => {
                cfg.command = CommandKind::Estimate;
                if let Some(c) = c {
                    cfg.concept = Some(concept(c)?);
                }
                if let Some(g) = alpha_grid {
                    cfg.alpha_grid = Some(parse_list(g)?);
                }
                if let Some(g) = beta_grid {
                    cfg.beta_grid = Some(parse_list(g)?);
                }
                cfg.strong |= *strong;
                if let Some(a) = opt_num(alpha)? {
                    cfg.alpha = Some(a);
                }
            }
            Command::Falsify {
                concept: c,
                schedule,
                witness_m,
                witness_n,
                direction,
                k,
                trial_alpha,
                trial_beta,
                ..
            } => {
                cfg.command = CommandKind::Falsify;
                if let Some(c) = c {
                    cfg.concept = Some(concept(c)?);
                }
                if schedule.is_some() {
                    cfg.schedule = schedule.clone();
                }
                let w = &mut cfg.witness;
                if let Some(s) = witness_m {
                    w.m = Some(parse_affine(s)?);
                }
                if let Some(s) = witness_n {
                    w.n = Some(parse_affine(s)?);
                }
                if let Some(s) = direction {
                    w.direction = Some(parse_list(s)?);
                }
                if let Some(s) = k {
                    w.k = Some(parse_range(s)?);
                }
                if let Some(a) = opt_num(trial_alpha)? {
                    w.alpha = Some(a);
                }
                if let Some(b) = opt_num(trial_beta)? {
                    w.beta = Some(b);
                }
            }
            Command::Datko {
                cert,
                concept: c,
                d,
                trunc,
                big_d,
                datko_c,
                strong,
                ..
            } => {
                cfg.command = CommandKind::Datko;
                if cert.is_some() {
                    cfg.certificate = cert.clone();
                }
                if let Some(c) = c {
                    cfg.concept = Some(concept(c)?);
                }
                if let Some(d) = opt_num(d)? {
                    cfg.d = Some(d);
                }
                if trunc.is_some() {
                    cfg.truncation = *trunc;
                }
                if let Some(v) = big_d {
                    cfg.big_d = Some(parse_log_number(v)?);
                }
                if let Some(c) = opt_num(datko_c)? {
                    cfg.datko_c = Some(c);
                }
                cfg.strong |= *strong;
            }
            Command::GalleryClaims { .. } => cfg.command = CommandKind::GalleryClaims,
        }
        Ok(cfg)
    }
}

fn system_ref(cfg: &AnalysisConfig, entry: Option<&GalleryEntry>) -> SystemRef {
    match (&cfg.source, entry) {
        (_, Some(g)) => SystemRef::Gallery {
            name: g.name.to_string(),
            params: g.params.iter().map(|p| (p.name.to_string(), p.value)).collect::<BTreeMap<_, _>>(),
        },
        (Some(SystemSource::File(p)), None) => SystemRef::File {
            path: p.display().to_string(),
        },
        _ => SystemRef::Unknown,
    }
}

fn missing(what: &str) -> Error {
    Error::Config {
        line: None,
        message: format!("missing {what}"),
    }
}

struct Loaded {
    sys: SystemDescription,
    proj: ProjectionFamily,
    entry: Option<GalleryEntry>,
}

fn horizon_of(cfg: &AnalysisConfig, window: &WindowSpec) -> usize {
    cfg.horizon.unwrap_or(window.m_max)
}

fn alpha_grid(cfg: &AnalysisConfig, l: &Loaded, window: &WindowSpec) -> Result<Vec<f64>> {
    match &cfg.alpha_grid {
        Some(g) => Ok(g.clone()),
        None => Ok(default_alpha_grid(alpha_scale(&l.sys, &l.proj, window)?)),
    }
}

fn run_estimate(cfg: &AnalysisConfig, l: &Loaded, window: &WindowSpec) -> Result<Outcome> {
    let kind = cfg.concept.ok_or_else(|| missing("--concept"))?;
    match kind {
        DichotomyKind::Ued => {
            let grid = alpha_grid(cfg, l, window)?;
            let estimate = estimate_ued(&l.sys, &l.proj, window, &grid)?;
            let series = match &estimate {
                Some(e) => minimal_constant_by_span(&l.sys, &l.proj, window, e.alpha, 0.0)?,
                None => vec![],
            };
            Ok(Outcome::EstimateUed { estimate, series })
        }
        DichotomyKind::Ed | DichotomyKind::Sed => {
            let strong = kind == DichotomyKind::Sed || cfg.strong;
            let a_grid = alpha_grid(cfg, l, window)?;
            let b_grid = match &cfg.beta_grid {
                Some(g) => g.clone(),
                None => default_beta_grid(alpha_scale(&l.sys, &l.proj, window)?),
            };
            let estimate = estimate_ed(&l.sys, &l.proj, window, &a_grid, &b_grid, strong)?;
            let series = match &estimate {
                Some(e) => minimal_constant_by_span(&l.sys, &l.proj, window, e.alpha, e.beta)?,
                None => vec![],
            };
            Ok(Outcome::EstimateEd {
                strong,
                estimate,
                series,
            })
        }
        DichotomyKind::Ned => {
            let alpha = match cfg.alpha {
                Some(a) => a,
                None => alpha_scale(&l.sys, &l.proj, window)?,
            };
            let profile = minimal_ned_profile(&l.sys, &l.proj, alpha, window)?;
            Ok(Outcome::EstimateNed { alpha, profile })
        }
    }
}

fn run_falsify(cfg: &AnalysisConfig, l: &Loaded) -> Result<Outcome> {
    let w = &cfg.witness;
    let explicit = w.m.is_some() || w.n.is_some() || w.direction.is_some();
    let mut schedules: Vec<(DichotomyKind, WitnessSchedule)> = if explicit {
        let kind = cfg.concept.ok_or_else(|| missing("--concept"))?;
        let (m, n) = (w.m.ok_or_else(|| missing("--witness-m"))?, w.n.ok_or_else(|| missing("--witness-n"))?);
        let (k_min, k_max) = w.k.ok_or_else(|| missing("--k"))?;
        vec![(
            kind,
            WitnessSchedule {
                name: "custom".into(),
                m: AffineIndex::new(m.0, m.1),
                n: AffineIndex::new(n.0, n.1),
                direction: w.direction.clone().ok_or_else(|| missing("--direction"))?,
                k_min,
                k_max,
                alpha: w.alpha.ok_or_else(|| missing("--trial-alpha"))?,
                beta: w.beta.unwrap_or(0.0),
            },
        )]
    } else {
        let entry = l
            .entry
            .as_ref()
            .ok_or_else(|| missing("witness schedule (explicit systems need --witness-m/--witness-n/--direction)"))?;
        let all = entry.schedules();
        let picked: Vec<_> = all
            .into_iter()
            .filter(|(kind, s)| {
                cfg.concept.is_none_or(|c| c == *kind)
                    && cfg.schedule.as_deref().is_none_or(|n| n == "all" || n == s.name)
            })
            .collect();
        if picked.is_empty() {
            let names: Vec<String> = entry.schedules().into_iter().map(|(_, s)| s.name).collect();
            return Err(Error::Config {
                line: None,
                message: format!("no matching schedule; available: {}", names.join(", ")),
            });
        }
        picked
    };
    if !explicit {
        for (_, s) in &mut schedules {
            if let Some((a, b)) = w.k {
                *s = s.clone().with_range(a, b);
            }
            if w.alpha.is_some() || w.beta.is_some() {
                *s = s.clone().with_trial(w.alpha.unwrap_or(s.alpha), w.beta.unwrap_or(s.beta));
            }
        }
    }
    let reports = schedules
        .iter()
        .map(|(kind, s)| falsify(&l.sys, &l.proj, *kind, s))
        .collect::<Result<_>>()?;
    Ok(Outcome::Falsify { reports })
}

fn run_datko(cfg: &AnalysisConfig, l: &Loaded, window: &WindowSpec) -> Result<Outcome> {
    let horizon = horizon_of(cfg, window);
    let cert = cfg
        .certificate
        .as_deref()
        .map(|c| parse_certificate(c, l.entry.as_ref(), horizon.max(window.m_max)))
        .transpose()?;
    let d = match (cfg.d, &cert) {
        (Some(d), _) => d,
        (None, Some(c)) => c.alpha() / 2.0,
        (None, None) => return Err(missing("--d (or a certificate)")),
    };
    let m_trunc = cfg.truncation.unwrap_or(200).max(window.m_max);
    if let Some(big_d) = cfg.big_d {
        let kind = cfg
            .concept
            .or(cert.as_ref().map(|c| c.kind()))
            .ok_or_else(|| missing("--concept"))?;
        let c = cfg.datko_c.unwrap_or(0.0);
        let scan = match kind {
            DichotomyKind::Ued => verify_datko_ued(&l.sys, &l.proj, d, big_d, window, m_trunc, cert.as_ref())?,
            DichotomyKind::Ed | DichotomyKind::Sed => verify_datko_ed(
                &l.sys,
                &l.proj,
                d,
                c,
                big_d,
                window,
                m_trunc,
                kind == DichotomyKind::Sed || cfg.strong,
                cert.as_ref(),
            )?,
            DichotomyKind::Ned => {
                return Err(Error::Config {
                    line: None,
                    message: "the nonuniform criterion takes its profile from --cert".into(),
                })
            }
        };
        let constants = DatkoConstants::Exponential { d, big_d, c };
        return Ok(Outcome::Datko { constants, scan });
    }
    let cert = cert.ok_or_else(|| missing("--cert or --big-d"))?;
    let constants = certificate_to_datko(&cert, d)?;
    let scan = datko_round_trip(&l.sys, &l.proj, &cert, d, window, m_trunc)?;
    Ok(Outcome::Datko { constants, scan })
}

fn execute(cfg: &AnalysisConfig, l: &Loaded) -> (Option<WindowSpec>, Result<Outcome>) {
    if cfg.command == CommandKind::GalleryClaims {
        let Some(entry) = &l.entry else {
            return (None, Err(missing("--gallery")));
        };
        let horizon = cfg.horizon.unwrap_or_else(|| entry.default_horizon());
        let window = WindowSpec::new(0, horizon).ok();
        let outcomes = entry.check_claims(horizon).map(|outcomes| Outcome::GalleryClaims { outcomes });
        return (window, outcomes);
    }
    let window = match cfg.window_spec() {
        Ok(w) => w,
        Err(e) => return (None, Err(e)),
    };
    let outcome = match cfg.command {
        CommandKind::Verify => (|| {
            let text = cfg.certificate.as_deref().ok_or_else(|| missing("--cert"))?;
            let cert = parse_certificate(text, l.entry.as_ref(), horizon_of(cfg, &window))?;
            let verdict = if window.triplet {
                verify_triplet_form(&l.sys, &l.proj, &cert, &window)?
            } else {
                verify_certificate(&l.sys, &l.proj, &cert, &window)?
            };
            Ok(Outcome::Verify {
                certificate: cert,
                verdict,
            })
        })(),
        CommandKind::Estimate => run_estimate(cfg, l, &window),
        CommandKind::Falsify => run_falsify(cfg, l),
        CommandKind::Datko => run_datko(cfg, l, &window),
        CommandKind::GalleryClaims => unreachable!(),
    };
    (Some(window), outcome)
}

/// Build the report for a merged configuration. Errors become an error
/// outcome with exit code 2.
pub fn run_config(cfg: &AnalysisConfig) -> Report {
    let command = cfg.command.as_str();
    let (sys, proj, entry) = match cfg.load_system() {
        Ok(t) => t,
        Err(e) => {
            return Report::new(command, system_ref(cfg, None), None, Outcome::from_error(&e));
        }
    };
    let loaded = Loaded { sys, proj, entry };
    let (window, outcome) = execute(cfg, &loaded);
    let outcome = outcome.unwrap_or_else(|e| Outcome::from_error(&e));
    Report::new(command, system_ref(cfg, loaded.entry.as_ref()), window, outcome)
}

fn summary(report: &Report) -> String {
    match &report.outcome {
        Outcome::Error { name, message } => format!("error [{name}]: {message}"),
        Outcome::Verify { verdict, .. } => {
            if verdict.holds() {
                "verdict: holds".into()
            } else {
                "verdict: violated".into()
            }
        }
        Outcome::GalleryClaims { outcomes } => outcomes
            .iter()
            .map(|o| format!("[{}] {}", if o.reproduced { "ok" } else { "FAILED" }, o.statement))
            .collect::<Vec<_>>()
            .join("\n"),
        Outcome::Datko { scan, .. } => format!("datko: {:?} over {} instances", scan.verdict, scan.checked),
        Outcome::Falsify { reports } => reports
            .iter()
            .map(|r| format!("{} vs {:?}: {:?}", r.schedule, r.concept, r.trend))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => format!("exit {}", report.exit_code),
    }
}

/// Parse arguments, run, write outputs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (report, cfg) = match cli.command.to_config() {
        Ok(cfg) => (run_config(&cfg), cfg),
        Err(e) => {
            let cfg = AnalysisConfig::default();
            (Report::new("unknown", SystemRef::Unknown, None, Outcome::from_error(&e)), cfg)
        }
    };
    let json = report.to_json();
    match &cfg.json_out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => print!("{json}"),
    }
    if let Some(path) = &cfg.csv_out {
        if let Err(e) = std::fs::write(path, emit_series(&report)) {
            eprintln!("cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    eprintln!("{}", summary(&report));
    report.exit_code
}
