//! Versioned JSON reports and plot-ready CSV series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checkers::{DichotomyCertificate, EdEstimate, NedProfile, UedEstimate, Verdict, WindowSpec};
use crate::datko::{DatkoConstants, DatkoScan, DatkoVerdict};
use crate::error::Error;
use crate::gallery::ClaimOutcome;
use crate::logscalar::LogScalar;
use crate::witness::{Trend, WitnessReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SystemRef {
    Gallery {
        name: String,
        params: BTreeMap<String, f64>,
    },
    File {
        path: String,
    },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Verify {
        certificate: DichotomyCertificate,
        #[serde(flatten)]
        verdict: Verdict,
    },
    EstimateUed {
        estimate: Option<UedEstimate>,
        /// Minimal constant per span `m − n` at the estimated rate.
        series: Vec<LogScalar>,
    },
    EstimateEd {
        strong: bool,
        estimate: Option<EdEstimate>,
        series: Vec<LogScalar>,
    },
    EstimateNed {
        alpha: f64,
        profile: NedProfile,
    },
    Falsify {
        reports: Vec<WitnessReport>,
    },
    Datko {
        constants: DatkoConstants,
        scan: DatkoScan,
    },
    GalleryClaims {
        outcomes: Vec<ClaimOutcome>,
    },
    Error {
        name: String,
        message: String,
    },
}

impl Outcome {
    pub fn from_error(e: &Error) -> Self {
        Outcome::Error {
            name: e.name().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Verify { verdict, .. } => {
                if verdict.holds() {
                    EXIT_HOLDS
                } else {
                    EXIT_VIOLATED
                }
            }
            Outcome::EstimateUed { estimate, .. } => {
                if estimate.is_some() {
                    EXIT_HOLDS
                } else {
                    EXIT_VIOLATED
                }
            }
            Outcome::EstimateEd { estimate, .. } => {
                if estimate.is_some() {
                    EXIT_HOLDS
                } else {
                    EXIT_VIOLATED
                }
            }
            Outcome::EstimateNed { .. } => EXIT_HOLDS,
            Outcome::Falsify { reports } => {
                if reports.iter().any(|r| r.trend == Trend::Divergent) {
                    EXIT_VIOLATED
                } else {
                    EXIT_HOLDS
                }
            }
            Outcome::Datko { scan, .. } => match scan.verdict {
                DatkoVerdict::Holds => EXIT_HOLDS,
                DatkoVerdict::Violated => EXIT_VIOLATED,
                DatkoVerdict::InconclusiveTail => EXIT_INCONCLUSIVE,
            },
            Outcome::GalleryClaims { outcomes } => {
                if outcomes.iter().all(|o| o.reproduced) {
                    EXIT_HOLDS
                } else {
                    EXIT_VIOLATED
                }
            }
            Outcome::Error { .. } => EXIT_CONFIG,
        }
    }

    /// `(index, value)` rows: span for estimates, `n` for profiles, the
    /// position in the schedule for witnesses.
    pub fn series(&self) -> Vec<(usize, LogScalar)> {
        match self {
            Outcome::EstimateUed { series, .. } | Outcome::EstimateEd { series, .. } => {
                series.iter().copied().enumerate().collect()
            }
            Outcome::EstimateNed { profile, .. } => profile
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| (profile.start + i, *v))
                .collect(),
            Outcome::Falsify { reports } => reports
                .iter()
                .flat_map(|r| r.witnesses.iter().enumerate())
                .map(|(i, w)| (i, w.required_constant))
                .collect(),
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub system: SystemRef,
    pub window: Option<WindowSpec>,
    pub outcome: Outcome,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &str, system: SystemRef, window: Option<WindowSpec>, outcome: Outcome) -> Self {
        let exit_code = outcome.exit_code();
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            system,
            window,
            outcome,
            exit_code,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

fn fmt_logmag(v: LogScalar) -> String {
    let l = v.ln_f64();
    if l.is_infinite() {
        if l > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{l:.17e}")
    }
}

/// CSV with header `index,logmag,sign`; header only when the report
/// carries no series.
pub fn emit_series(report: &Report) -> String {
    let mut out = String::from("index,logmag,sign\n");
    for (i, v) in report.outcome.series() {
        let _ = writeln!(out, "{i},{},{}", fmt_logmag(v), v.sign());
    }
    out
}
