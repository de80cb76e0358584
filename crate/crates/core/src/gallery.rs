//! Built-in two-dimensional diagonal systems with closed-form products,
//! their certificates and the witness families that rule out the stronger
//! concepts.
//!
//! Every entry acts as `A(n)(x₁, x₂) = (p_n x₁, q_n x₂)` with the constant
//! projection `P(n)(x₁, x₂) = (x₁, 0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::checkers::{
    alpha_scale, default_alpha_grid, default_beta_grid, scan_ed, verify_certificate,
    DichotomyCertificate, DichotomyKind, NedProfile, WindowSpec,
};
use crate::error::{Error, Result};
use crate::logscalar::{Dd, ExactSum, LogScalar};
use crate::system::{CoordinateFn, LogFactor, ProjectionFamily, SystemDescription};
use crate::witness::{falsify, AffineIndex, Trend, WitnessSchedule};

pub const UED_EXAMPLE: &str = "ued_example";
pub const NED_EXAMPLE: &str = "ned_example";
pub const SED_EXAMPLE: &str = "sed_example";
pub const NED_NOT_ED_EXAMPLE: &str = "ned_not_ed_example";

pub const GALLERY_NAMES: [&str; 4] = [UED_EXAMPLE, NED_EXAMPLE, SED_EXAMPLE, NED_NOT_ED_EXAMPLE];

/// Parameter points at which the source examples state their certificates
/// are recognized up to this distance in log scale.
const PARAM_MATCH_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub value: f64,
    pub range: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Ued,
    Ned { b: f64, c: f64 },
    Sed { c1: f64, c2: f64 },
    NedNotEd { c: f64 },
}

#[derive(Clone)]
pub struct GalleryEntry {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub system: SystemDescription,
    pub projection: ProjectionFamily,
    kind: Kind,
}

impl std::fmt::Debug for GalleryEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GalleryEntry")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum ClaimExpectation {
    /// The certificate verifies on the claim window.
    Certified { certificate: DichotomyCertificate },
    /// Every schedule reports a divergent required constant.
    Falsified { schedules: Vec<WitnessSchedule> },
    /// The strong grid scan finds no stable certificate.
    NoStableStrong,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub concept: DichotomyKind,
    pub statement: String,
    #[serde(flatten)]
    pub expectation: ClaimExpectation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub statement: String,
    pub reproduced: bool,
    pub detail: String,
}

fn param_in(name: &str, value: f64, ok: bool, range: &str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange {
            name: name.into(),
            value,
            range: range.into(),
        })
    }
}

fn lookup(params: &[(&str, f64)], allowed: &[(&str, f64)]) -> Result<Vec<f64>> {
    for (k, _) in params {
        if !allowed.iter().any(|(a, _)| a == k) {
            return Err(Error::InvalidConstants(format!("unknown parameter `{k}`")));
        }
    }
    Ok(allowed
        .iter()
        .map(|(a, default)| {
            params
                .iter()
                .rev()
                .find(|(k, _)| k == a)
                .map_or(*default, |(_, v)| *v)
        })
        .collect())
}

fn coord(f: impl Fn(usize) -> LogFactor + Send + Sync + 'static) -> CoordinateFn {
    Arc::new(f)
}

/// Exact `(n+1)·2^{n+1} + (n+1)`, the log of the odd-step factor's inverse.
fn big_log(k: usize) -> [f64; 2] {
    let k1 = (k + 1) as f64;
    [k1 * 2f64.powi(k as i32 + 1), k1]
}

/// Construct a gallery entry; unspecified parameters take the values of the
/// source examples.
pub fn make_example(name: &str, params: &[(&str, f64)]) -> Result<GalleryEntry> {
    let (kind, specs) = match name {
        UED_EXAMPLE => {
            lookup(params, &[])?;
            (Kind::Ued, vec![])
        }
        NED_EXAMPLE => {
            let v = lookup(params, &[("b", 0.5), ("c", 1.0)])?;
            let (b, c) = (v[0], v[1]);
            param_in("b", b, b > 0.0 && b < 1.0, "(0, 1)")?;
            param_in("c", c, c > 0.0, "(0, inf)")?;
            (
                Kind::Ned { b, c },
                vec![spec("b", b, "(0, 1)"), spec("c", c, "(0, inf)")],
            )
        }
        SED_EXAMPLE => {
            let v = lookup(params, &[("c1", (-4f64).exp()), ("c2", 2f64.exp())])?;
            let (c1, c2) = (v[0], v[1]);
            param_in("c1", c1, c1 > 0.0, "(0, inf)")?;
            param_in("c2", c2, c2 > 0.0, "(0, inf)")?;
            (
                Kind::Sed { c1, c2 },
                vec![spec("c1", c1, "(0, inf)"), spec("c2", c2, "(0, inf)")],
            )
        }
        NED_NOT_ED_EXAMPLE => {
            let v = lookup(params, &[("c", (-1f64).exp())])?;
            let c = v[0];
            param_in("c", c, c > 0.0, "(0, inf)")?;
            (Kind::NedNotEd { c }, vec![spec("c", c, "(0, inf)")])
        }
        other => return Err(Error::UnknownExample(other.into())),
    };
    let entries: Vec<CoordinateFn> = match kind {
        Kind::Ued => vec![
            coord(|n| LogFactor::positive(vec![-(n as f64 + 0.5)])),
            coord(|n| LogFactor::positive(vec![n as f64 + 0.5])),
        ],
        Kind::Ned { b, c } => {
            let lb = b.ln();
            vec![
                coord(move |n| {
                    let a = if n % 2 == 0 {
                        -c * ((n + 2) as f64).ln()
                    } else {
                        c * ((n + 1) as f64).ln()
                    };
                    LogFactor::positive(vec![lb, a])
                }),
                coord(move |_| LogFactor::positive(vec![-lb])),
            ]
        }
        Kind::Sed { c1, c2 } => {
            let a = |n: usize| if n.is_multiple_of(2) { -(n as f64) } else { n as f64 + 1.0 };
            let (l1, l2) = (c1.ln(), c2.ln());
            vec![
                coord(move |n| LogFactor::positive(vec![l1, a(n)])),
                coord(move |n| LogFactor::positive(vec![l2, a(n)])),
            ]
        }
        Kind::NedNotEd { c } => {
            let lc = c.ln();
            vec![
                coord(move |n| {
                    let mut parts = vec![lc];
                    if n % 2 == 0 {
                        // n(1 + 2^n) = (n-1+1)·2^{n-1+1} + (n-1+1)
                        if n > 0 {
                            parts.extend(big_log(n - 1));
                        }
                    } else {
                        parts.extend(big_log(n).map(|v| -v));
                    }
                    LogFactor::positive(parts)
                }),
                coord(move |_| LogFactor::positive(vec![-lc])),
            ]
        }
    };
    Ok(GalleryEntry {
        name: name.into(),
        params: specs,
        system: SystemDescription::diagonal(entries, None)?,
        projection: ProjectionFamily::constant_mask(vec![true, false]),
        kind,
    })
}

fn spec(name: &str, value: f64, range: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        value,
        range: range.into(),
    }
}

fn sum_log(parts: &[f64]) -> LogScalar {
    let mut s = ExactSum::new();
    parts.iter().for_each(|&p| s.add(p));
    LogScalar::from_log(1, s.value())
}

impl GalleryEntry {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    /// Tabulated `a_{mn} = ∏_{k=n+1}^{m} a_k` by parity case.
    pub fn closed_form_amn(&self, m: usize, n: usize) -> Result<LogScalar> {
        if m < n {
            return Err(Error::IndexOrder { m, n });
        }
        let (me, ne) = (m.is_multiple_of(2), n.is_multiple_of(2));
        let (mf, nf) = (m as f64, n as f64);
        Ok(match self.kind {
            Kind::Ued => LogScalar::exp(((mf + 1.0).powi(2) - (nf + 1.0).powi(2)) / 2.0),
            Kind::Ned { c, .. } => {
                let l = |x: f64| c * x.ln();
                LogScalar::exp(match (me, ne) {
                    (false, false) => 0.0,
                    (false, true) => l(nf + 2.0),
                    (true, true) => l(nf + 2.0) - l(mf + 2.0),
                    (true, false) => -l(mf + 2.0),
                })
            }
            Kind::Sed { .. } => LogScalar::exp(match (me, ne) {
                (true, true) => 0.0,
                (true, false) => -nf - 1.0,
                (false, true) => mf + 1.0,
                (false, false) => mf - nf,
            }),
            Kind::NedNotEd { .. } => {
                let up = big_log(n);
                let down = big_log(m).map(|v| -v);
                match (me, ne) {
                    (true, true) => LogScalar::ONE,
                    (true, false) => sum_log(&up),
                    (false, true) => sum_log(&down),
                    (false, false) => sum_log(&[up[0], up[1], down[0], down[1]]),
                }
            }
        })
    }

    /// Both diagonal entries of `𝒜(m, n)` from the closed forms.
    pub fn closed_form_evolution(&self, m: usize, n: usize) -> Result<[LogScalar; 2]> {
        let a = self.closed_form_amn(m, n)?;
        let k = (m - n) as f64;
        Ok(match self.kind {
            Kind::Ued => [a.recip(), a],
            Kind::Ned { b, .. } => [a.scale_exp(k * b.ln()), LogScalar::exp(-k * b.ln())],
            Kind::Sed { c1, c2 } => [a.scale_exp(k * c1.ln()), a.scale_exp(k * c2.ln())],
            Kind::NedNotEd { c } => [a.scale_exp(k * c.ln()), LogScalar::exp(-k * c.ln())],
        })
    }

    /// Witness families shipped with the entry.
    pub fn schedules(&self) -> Vec<(DichotomyKind, WitnessSchedule)> {
        let e1 = vec![1.0, 0.0];
        let pair = |name: &str, alpha: f64, k_max: usize| WitnessSchedule {
            name: name.into(),
            m: AffineIndex::new(2, 1),
            n: AffineIndex::new(2, 0),
            direction: e1.clone(),
            k_min: 0,
            k_max,
            alpha,
            beta: 0.0,
        };
        match self.kind {
            Kind::Ued => vec![],
            Kind::Ned { b, .. } => vec![(DichotomyKind::Ued, pair("m=2q+1,n=2q,x=e1", -b.ln(), 50))],
            Kind::Sed { .. } => {
                let alpha = if self.is_sed_point() { 2.0 } else { 0.5 };
                vec![(DichotomyKind::Ued, pair("m=2k+1,n=2k,x=e1", alpha, 50))]
            }
            Kind::NedNotEd { c } => {
                let lc = c.ln();
                let odd_next = |name: &str, alpha: f64| WitnessSchedule {
                    name: name.into(),
                    m: AffineIndex::new(2, 2),
                    n: AffineIndex::new(2, 1),
                    direction: e1.clone(),
                    k_min: 1,
                    k_max: 12,
                    alpha,
                    beta: 1.0,
                };
                let mut out = Vec::new();
                if lc < 0.0 {
                    out.push((DichotomyKind::Ed, odd_next("case1:e^a*c=1,n=2p+1,m=n+1", -lc)));
                }
                out.push((
                    DichotomyKind::Ed,
                    WitnessSchedule {
                        name: "case2:e^a*c>1,m=2q,n=2".into(),
                        m: AffineIndex::new(2, 0),
                        n: AffineIndex::new(0, 2),
                        direction: e1.clone(),
                        k_min: 2,
                        k_max: 40,
                        alpha: (1.0 - lc).max(1.0),
                        beta: 1.0,
                    },
                ));
                if lc < 0.0 {
                    out.push((DichotomyKind::Ed, odd_next("case3:e^a*c<1,n=2p+1,m=n+1", -lc / 2.0)));
                }
                out
            }
        }
    }

    fn is_sed_point(&self) -> bool {
        matches!(self.kind, Kind::Sed { c1, c2 } if near(c1, -4.0) && near(c2, 2.0))
    }

    fn is_ed_point(&self) -> bool {
        matches!(self.kind, Kind::Sed { c1, c2 } if near(c1, -1.5) && near(c2, 0.5))
    }

    /// Default window end for claim checks.
    pub fn default_horizon(&self) -> usize {
        match self.kind {
            Kind::NedNotEd { .. } => 25,
            _ => 200,
        }
    }

    /// Claims stated for this entry, with profiles tabulated on `0..=horizon`.
    pub fn claims(&self, horizon: usize) -> Vec<Claim> {
        let falsified = |concept: DichotomyKind, statement: &str| Claim {
            concept,
            statement: statement.into(),
            expectation: ClaimExpectation::Falsified {
                schedules: self
                    .schedules()
                    .into_iter()
                    .filter(|(k, _)| *k == concept)
                    .map(|(_, s)| s)
                    .collect(),
            },
        };
        let certified = |statement: String, certificate: DichotomyCertificate| Claim {
            concept: certificate.kind(),
            statement,
            expectation: ClaimExpectation::Certified { certificate },
        };
        let e = LogScalar::exp(1.0);
        match self.kind {
            Kind::Ued => vec![certified("UED(N=1, alpha=1/2)".into(), DichotomyCertificate::ued(1.0, 0.5))],
            Kind::Ned { b, c } => vec![
                certified(
                    format!("NED(alpha=-ln b, N(n)=(n+2)^{c})"),
                    DichotomyCertificate::Ned {
                        alpha: -b.ln(),
                        profile: NedProfile::from_fn(0, horizon, |n| {
                            LogScalar::exp(c * ((n + 2) as f64).ln())
                        }),
                    },
                ),
                falsified(DichotomyKind::Ued, "not UED"),
            ],
            Kind::Sed { .. } => {
                let mut out = Vec::new();
                if self.is_sed_point() {
                    out.push(certified("SED(N=e, alpha=2, beta=1)".into(), DichotomyCertificate::sed(e, 2.0, 1.0)));
                }
                if self.is_ed_point() {
                    out.push(certified("ED(N=e, alpha=1/2, beta=1)".into(), DichotomyCertificate::ed(e, 0.5, 1.0)));
                    out.push(Claim {
                        concept: DichotomyKind::Sed,
                        statement: "not SED".into(),
                        expectation: ClaimExpectation::NoStableStrong,
                    });
                }
                out.push(falsified(DichotomyKind::Ued, "not UED"));
                out
            }
            Kind::NedNotEd { c } => {
                let mut out = Vec::new();
                if near(c, -1.0) {
                    out.push(certified(
                        "NED(alpha=1, N(n)=e^{(n+1)(1+2^{n+1})})".into(),
                        DichotomyCertificate::Ned {
                            alpha: 1.0,
                            profile: NedProfile::from_fn(0, horizon, ned_not_ed_profile),
                        },
                    ));
                }
                out.push(falsified(DichotomyKind::Ed, "not ED"));
                out
            }
        }
    }

    /// Run every claim on `0..=horizon`.
    pub fn check_claims(&self, horizon: usize) -> Result<Vec<ClaimOutcome>> {
        let window = WindowSpec::new(0, horizon)?;
        let mut out = Vec::new();
        for claim in self.claims(horizon) {
            let (reproduced, detail) = match &claim.expectation {
                ClaimExpectation::Certified { certificate } => {
                    let v = verify_certificate(&self.system, &self.projection, certificate, &window)?;
                    (v.holds(), format!("{v:?}"))
                }
                ClaimExpectation::Falsified { schedules } => {
                    let mut all = !schedules.is_empty();
                    let mut notes = Vec::new();
                    for s in schedules {
                        let r = falsify(&self.system, &self.projection, claim.concept, s)?;
                        all &= r.trend == Trend::Divergent;
                        notes.push(format!("{}: {}", s.name, r.divergence));
                    }
                    (all, notes.join("; "))
                }
                ClaimExpectation::NoStableStrong => {
                    let amax = alpha_scale(&self.system, &self.projection, &window)?;
                    let scan = scan_ed(
                        &self.system,
                        &self.projection,
                        &window,
                        &default_alpha_grid(amax),
                        &default_beta_grid(amax),
                        true,
                    )?;
                    let stable = scan.iter().filter(|e| e.stable).count();
                    (
                        stable == 0,
                        format!("{} strong grid pairs, {stable} stable", scan.len()),
                    )
                }
            };
            out.push(ClaimOutcome {
                statement: claim.statement,
                reproduced,
                detail,
            });
        }
        Ok(out)
    }
}

fn near(x: f64, log_target: f64) -> bool {
    (x.ln() - log_target).abs() <= PARAM_MATCH_TOL
}

/// `N(n) = e^{(n+1)(1+2^{n+1})}`.
pub fn ned_not_ed_profile(n: usize) -> LogScalar {
    let [a, b] = big_log(n);
    LogScalar::from_log(1, Dd::from_sum(a, b))
}

/// Closed form `a_{mn}` of a named entry.
pub fn closed_form_amn(name: &str, params: &[(&str, f64)], m: usize, n: usize) -> Result<LogScalar> {
    make_example(name, params)?.closed_form_amn(m, n)
}
