//! Certificate verification, minimal-constant estimation and profile
//! extraction for the four dichotomy concepts.
//!
//! Every for-all-x inequality is reduced to two scalar inequalities per
//! index pair. Writing `x = u + v` with `u = P(n)x`, `v = Q(n)x`, the
//! inequality
//!
//! ```text
//! e^{α(m−n)} (‖𝒜u‖ + ‖v‖) ≤ R_P ‖u‖ + R_Q ‖𝒜v‖
//! ```
//!
//! holds for all `x` iff `e^{α(m−n)} ‖𝒜u‖ ≤ R_P ‖u‖` and
//! `e^{α(m−n)} ‖v‖ ≤ R_Q ‖𝒜v‖` hold separately, because
//! `(a+b)/(c+d) ≤ max(a/c, b/d)` with equality approached on pure
//! directions. Only the extreme gains of `𝒜(m, n)` on the two ranges matter.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{range_basis, ratio_extremes};
use crate::logscalar::{Dd, LogScalar};
use crate::system::{
    check_compatible, extremes_of, EvolutionMatrix, EvolutionTable, Part, ProjectionFamily,
    RestrictedExtremes, SystemDescription,
};
use crate::system::unit_vector;

/// Slack (in log units) below which an inequality counts as violated.
pub const VERIFY_TOL: f64 = 1e-9;
/// Relative growth of `ln N` between half and full window that marks a
/// minimal constant as unstable.
pub const STABILITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DichotomyKind {
    #[serde(rename = "UED")]
    Ued,
    #[serde(rename = "NED")]
    Ned,
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "SED")]
    Sed,
}

impl std::str::FromStr for DichotomyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "UED" => Ok(DichotomyKind::Ued),
            "NED" => Ok(DichotomyKind::Ned),
            "ED" => Ok(DichotomyKind::Ed),
            "SED" => Ok(DichotomyKind::Sed),
            other => Err(format!("unknown dichotomy kind `{other}`")),
        }
    }
}

/// Nondecreasing positive sequence `N(n)` tabulated on `start..start+len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NedProfile {
    pub start: usize,
    pub values: Vec<LogScalar>,
}

impl NedProfile {
    /// Tabulate `f` on `start..=end`.
    pub fn from_fn(start: usize, end: usize, f: impl Fn(usize) -> LogScalar) -> Self {
        NedProfile {
            start,
            values: (start..=end).map(f).collect(),
        }
    }

    pub fn constant(start: usize, end: usize, value: LogScalar) -> Self {
        Self::from_fn(start, end, |_| value)
    }

    /// Last tabulated index.
    pub fn end(&self) -> usize {
        self.start + self.values.len() - 1
    }

    pub fn value(&self, n: usize) -> Result<LogScalar> {
        if n < self.start || n > self.end() {
            return Err(Error::InvalidCertificate(format!(
                "profile is tabulated on {}..={}, index {n} requested",
                self.start,
                self.end()
            )));
        }
        Ok(self.values[n - self.start])
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidCertificate("empty profile".into()));
        }
        if self.values.iter().any(|v| v.sign() <= 0) {
            return Err(Error::InvalidCertificate("profile must be positive".into()));
        }
        if !self.is_nondecreasing() {
            return Err(Error::InvalidCertificate("profile must be nondecreasing".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DichotomyCertificate {
    #[serde(rename = "UED")]
    Ued { n_const: LogScalar, alpha: f64 },
    #[serde(rename = "NED")]
    Ned { alpha: f64, profile: NedProfile },
    #[serde(rename = "ED")]
    Ed {
        n_const: LogScalar,
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "SED")]
    Sed {
        n_const: LogScalar,
        alpha: f64,
        beta: f64,
    },
}

impl DichotomyCertificate {
    pub fn ued(n_const: f64, alpha: f64) -> Self {
        DichotomyCertificate::Ued {
            n_const: LogScalar::from_f64(n_const),
            alpha,
        }
    }

    pub fn ed(n_const: LogScalar, alpha: f64, beta: f64) -> Self {
        DichotomyCertificate::Ed {
            n_const,
            alpha,
            beta,
        }
    }

    pub fn sed(n_const: LogScalar, alpha: f64, beta: f64) -> Self {
        DichotomyCertificate::Sed {
            n_const,
            alpha,
            beta,
        }
    }

    pub fn kind(&self) -> DichotomyKind {
        match self {
            DichotomyCertificate::Ued { .. } => DichotomyKind::Ued,
            DichotomyCertificate::Ned { .. } => DichotomyKind::Ned,
            DichotomyCertificate::Ed { .. } => DichotomyKind::Ed,
            DichotomyCertificate::Sed { .. } => DichotomyKind::Sed,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            DichotomyCertificate::Ued { alpha, .. }
            | DichotomyCertificate::Ned { alpha, .. }
            | DichotomyCertificate::Ed { alpha, .. }
            | DichotomyCertificate::Sed { alpha, .. } => *alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            DichotomyCertificate::Ed { beta, .. } | DichotomyCertificate::Sed { beta, .. } => *beta,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidCertificate(format!("alpha = {alpha} must be > 0")));
        }
        let check_n = |n: &LogScalar| {
            if *n < LogScalar::ONE {
                Err(Error::InvalidCertificate(format!("N = {n} must be >= 1")))
            } else {
                Ok(())
            }
        };
        match self {
            DichotomyCertificate::Ued { n_const, .. } => check_n(n_const),
            DichotomyCertificate::Ned { profile, .. } => profile.validate(),
            DichotomyCertificate::Ed { n_const, beta, .. } => {
                check_n(n_const)?;
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidCertificate(format!("beta = {beta} must be >= 0")));
                }
                Ok(())
            }
            DichotomyCertificate::Sed { n_const, beta, .. } => {
                check_n(n_const)?;
                if !(*beta >= 0.0 && *beta < alpha) {
                    return Err(Error::InvalidCertificate(format!(
                        "strong dichotomy needs 0 <= beta < alpha, got beta = {beta}, alpha = {alpha}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Right-hand side weights `(R_P, R_Q)` at the pair `(m, n)`.
    pub fn weights(&self, m: usize, n: usize) -> Result<(LogScalar, LogScalar)> {
        Ok(match self {
            DichotomyCertificate::Ued { n_const, .. } => (*n_const, *n_const),
            DichotomyCertificate::Ned { profile, .. } => (profile.value(n)?, profile.value(m)?),
            DichotomyCertificate::Ed { n_const, beta, .. }
            | DichotomyCertificate::Sed { n_const, beta, .. } => (
                n_const.scale_exp(beta * n as f64),
                n_const.scale_exp(beta * m as f64),
            ),
        })
    }

    /// `R_P` evaluated at a single time index.
    pub(crate) fn p_weight(&self, n: usize) -> Result<LogScalar> {
        Ok(self.weights(n, n)?.0)
    }

    /// Same constants read as a nonuniform certificate on `0..=end`.
    pub fn as_ned(&self, end: usize) -> Option<DichotomyCertificate> {
        match self {
            DichotomyCertificate::Ued { n_const, alpha } => Some(DichotomyCertificate::Ned {
                alpha: *alpha,
                profile: NedProfile::constant(0, end, *n_const),
            }),
            DichotomyCertificate::Ned { .. } => Some(self.clone()),
            _ => None,
        }
    }

    /// `UED → ED(β = 0)`, `SED → ED`.
    pub fn as_ed(&self) -> Option<DichotomyCertificate> {
        match self {
            DichotomyCertificate::Ued { n_const, alpha } => {
                Some(DichotomyCertificate::ed(*n_const, *alpha, 0.0))
            }
            DichotomyCertificate::Ed { .. } => Some(self.clone()),
            DichotomyCertificate::Sed {
                n_const,
                alpha,
                beta,
            } => Some(DichotomyCertificate::ed(*n_const, *alpha, *beta)),
            DichotomyCertificate::Ned { .. } => None,
        }
    }

    /// `UED → SED(β = 0)`.
    pub fn as_sed(&self) -> Option<DichotomyCertificate> {
        match self {
            DichotomyCertificate::Ued { n_const, alpha } => {
                Some(DichotomyCertificate::sed(*n_const, *alpha, 0.0))
            }
            DichotomyCertificate::Sed { .. } => Some(self.clone()),
            _ => None,
        }
    }
}

/// Index window `{(m, n) : n_min ≤ n ≤ m ≤ m_max}`, or the triplets
/// `n_min ≤ p ≤ n ≤ m ≤ m_max` in triplet mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n_min: usize,
    pub m_max: usize,
    #[serde(default)]
    pub triplet: bool,
}

impl WindowSpec {
    pub fn new(n_min: usize, m_max: usize) -> Result<Self> {
        if n_min > m_max {
            return Err(Error::InvalidWindow(format!("n_min = {n_min} > m_max = {m_max}")));
        }
        Ok(WindowSpec {
            n_min,
            m_max,
            triplet: false,
        })
    }

    pub fn triplets(n_min: usize, m_max: usize) -> Result<Self> {
        Ok(WindowSpec {
            triplet: true,
            ..Self::new(n_min, m_max)?
        })
    }

    /// Pairs in lexicographic `(n, m)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.n_min..=self.m_max).flat_map(move |n| (n..=self.m_max).map(move |m| (m, n)))
    }

    /// Triplets `(m, n, p)` in lexicographic `(p, n, m)` order.
    pub fn triplet_iter(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (self.n_min..=self.m_max).flat_map(move |p| {
            (p..=self.m_max).flat_map(move |n| (n..=self.m_max).map(move |m| (m, n, p)))
        })
    }

    /// `[n_min, n_min + (m_max − n_min)/2]`.
    pub fn half(&self) -> WindowSpec {
        WindowSpec {
            m_max: self.n_min + (self.m_max - self.n_min) / 2,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_min > self.m_max {
            return Err(Error::InvalidWindow(format!(
                "n_min = {} > m_max = {}",
                self.n_min, self.m_max
            )));
        }
        Ok(())
    }
}

/// A point where an inequality fails, with the smallest constant that
/// would repair it there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub m: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    pub part: Part,
    pub direction: Vec<f64>,
    /// Minimal `N` (or profile value `N(n)` / `N(m)` for NED) at this point.
    pub required_constant: LogScalar,
    /// `ln(rhs) − ln(lhs)` for the checked certificate; negative means violated.
    #[serde(skip_serializing_if = "Option::is_none", default, with = "crate::serde_ext::opt")]
    pub slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds {
        #[serde(with = "crate::serde_ext")]
        min_slack: f64,
        checked: usize,
    },
    Violated { witness: Witness },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }
}

/// Extreme gains for every pair of a window.
pub(crate) struct ExtremesTable {
    window: WindowSpec,
    rows: Vec<Vec<RestrictedExtremes>>,
}

impl ExtremesTable {
    pub(crate) fn build(
        sys: &SystemDescription,
        proj: &ProjectionFamily,
        window: &WindowSpec,
    ) -> Result<Self> {
        window.check()?;
        check_compatible(sys, proj, window.n_min, window.m_max)?;
        let evo = EvolutionTable::build(sys, proj, window.n_min, window.m_max, window.m_max)?;
        let mut rows = Vec::new();
        for n in window.n_min..=window.m_max {
            let p = proj.at(n)?;
            let bases = (!sys.is_diagonal())
                .then(|| (range_basis(&p.matrix()), range_basis(&p.complement_matrix())));
            rows.push(
                (n..=window.m_max)
                    .map(|m| extremes_of(evo.get(m, n, Part::P), evo.get(m, n, Part::Q), p, bases.as_ref()))
                    .collect(),
            );
        }
        Ok(ExtremesTable {
            window: *window,
            rows,
        })
    }

    pub(crate) fn get(&self, m: usize, n: usize) -> &RestrictedExtremes {
        &self.rows[n - self.window.n_min][m - n]
    }

    fn pairs_upto(&self, m_cap: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = WindowSpec {
            m_max: m_cap.min(self.window.m_max),
            ..self.window
        };
        (w.n_min..=w.m_max).flat_map(move |n| (n..=w.m_max).map(move |m| (m, n)))
    }

    /// Minimal `N` for the exponential form with fixed `(α, β)` on pairs with
    /// `m ≤ m_cap`; `β = 0` gives the uniform form.
    pub(crate) fn min_constant(&self, alpha: f64, beta: f64, m_cap: usize) -> LogScalar {
        let mut best = LogScalar::ONE;
        for (m, n) in self.pairs_upto(m_cap) {
            let (rp, rq) = required_pair(self.get(m, n), alpha, m, n);
            let rp = rp.scale_exp(-beta * n as f64);
            let rq = rq.scale_exp(-beta * m as f64);
            best = best.max(rp).max(rq);
        }
        best
    }
}

/// Raw requirements `(e^{α(m−n)}·growth_P, e^{α(m−n)}/min_gain_Q)`.
fn required_pair(ext: &RestrictedExtremes, alpha: f64, m: usize, n: usize) -> (LogScalar, LogScalar) {
    let rate = alpha * (m - n) as f64;
    let rp = ext.growth_p.scale_exp(rate);
    let rq = if ext.q_degenerate {
        LogScalar::ZERO
    } else {
        ext.min_gain_q.recip().scale_exp(rate)
    };
    (rp, rq)
}

fn slack(rhs: LogScalar, lhs: LogScalar) -> f64 {
    if lhs.is_zero() || rhs.is_infinite() {
        return f64::INFINITY;
    }
    if rhs.is_zero() || lhs.is_infinite() {
        return f64::NEG_INFINITY;
    }
    (rhs.ln() - lhs.ln()).to_f64()
}

/// Weight that turns `R_P`/`R_Q` back into the certificate's constant.
fn constant_scale(cert: &DichotomyCertificate, idx: usize) -> LogScalar {
    match cert {
        DichotomyCertificate::Ed { beta, .. } | DichotomyCertificate::Sed { beta, .. } => {
            LogScalar::exp(beta * idx as f64)
        }
        _ => LogScalar::ONE,
    }
}

/// Check a certificate on every pair of `window`, first violation in
/// lexicographic `(n, m)` order.
pub fn verify_certificate(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    cert: &DichotomyCertificate,
    window: &WindowSpec,
) -> Result<Verdict> {
    cert.validate()?;
    let table = ExtremesTable::build(sys, proj, window)?;
    verify_with_table(&table, cert)
}

pub(crate) fn verify_with_table(
    table: &ExtremesTable,
    cert: &DichotomyCertificate,
) -> Result<Verdict> {
    let alpha = cert.alpha();
    let mut min_slack = f64::INFINITY;
    let mut checked = 0;
    for (m, n) in table.window.pairs() {
        let ext = table.get(m, n);
        let (rp, rq) = cert.weights(m, n)?;
        let (lp, lq) = required_pair(ext, alpha, m, n);
        let sp = slack(rp, lp);
        let sq = slack(rq, lq);
        checked += 1;
        for (s, part, lhs, idx) in [(sp, Part::P, lp, n), (sq, Part::Q, lq, m)] {
            if s < -VERIFY_TOL {
                let direction = match part {
                    Part::P => ext.growth_dir.clone(),
                    Part::Q => ext.min_gain_dir.clone(),
                }
                .unwrap_or_default();
                return Ok(Verdict::Violated {
                    witness: Witness {
                        m,
                        n,
                        p: None,
                        part,
                        direction,
                        required_constant: lhs / constant_scale(cert, idx),
                        slack: Some(s),
                    },
                });
            }
        }
        min_slack = min_slack.min(sp).min(sq);
    }
    Ok(Verdict::Holds { min_slack, checked })
}

/// Sup of `‖num·w‖ / ‖den·w‖` over the masked coordinates (diagonal case).
fn diagonal_ratio_sup(num: &[LogScalar], den: &[LogScalar], coords: &[usize]) -> (LogScalar, Option<usize>) {
    let mut best = (LogScalar::ZERO, None);
    for &i in coords {
        let (a, b) = (num[i].abs(), den[i].abs());
        let r = if a.is_zero() {
            LogScalar::ZERO
        } else if b.is_zero() {
            LogScalar::INFINITY
        } else {
            a / b
        };
        if best.1.is_none() || r > best.0 {
            best = (r, Some(i));
        }
    }
    best
}

/// Three-index form: for `p ≤ n ≤ m`,
/// `e^{α(m−n)}(‖𝒜_P(m,p)x‖ + ‖𝒜_Q(n,p)x‖) ≤ R_P(n)‖𝒜_P(n,p)x‖ + R_Q(m)‖𝒜_Q(m,p)x‖`.
pub fn verify_triplet_form(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    cert: &DichotomyCertificate,
    window: &WindowSpec,
) -> Result<Verdict> {
    cert.validate()?;
    window.check()?;
    check_compatible(sys, proj, window.n_min, window.m_max)?;
    let evo = EvolutionTable::build(sys, proj, window.n_min, window.m_max, window.m_max)?;
    let alpha = cert.alpha();
    let dim = sys.dim();
    let mut min_slack = f64::INFINITY;
    let mut checked = 0;

    for p in window.n_min..=window.m_max {
        let proj_p = proj.at(p)?;
        let mask = proj_p.as_mask();
        let bases = (!sys.is_diagonal())
            .then(|| (range_basis(&proj_p.matrix()), range_basis(&proj_p.complement_matrix())));
        for n in p..=window.m_max {
            for m in n..=window.m_max {
                let (a_mp, a_np) = (evo.get(m, p, Part::P), evo.get(n, p, Part::P));
                // sup over u ∈ range P(p) of ‖𝒜(m,p)u‖/‖𝒜(n,p)u‖ and
                // sup over v ∈ range Q(p) of ‖𝒜(n,p)v‖/‖𝒜(m,p)v‖
                let ((gp, dp), (gq, dq)) = match (&a_mp.matrix, &a_np.matrix) {
                    (EvolutionMatrix::Diagonal(dm), EvolutionMatrix::Diagonal(dn)) => {
                        let mask = mask.as_ref().expect("diagonal systems use masks");
                        let pc: Vec<usize> = (0..dim).filter(|&i| mask[i]).collect();
                        let qc: Vec<usize> = (0..dim).filter(|&i| !mask[i]).collect();
                        let (gp, ip) = diagonal_ratio_sup(dm, dn, &pc);
                        let (gq, iq) = diagonal_ratio_sup(dn, dm, &qc);
                        let u = |i: Option<usize>| i.map(|i| unit_vector(dim, i));
                        ((gp, u(ip)), (gq, u(iq)))
                    }
                    _ => {
                        let (bp, bq) = bases.as_ref().expect("dense bases");
                        let (am, an) = (a_mp.to_dense(), a_np.to_dense());
                        let (amq, anq) = (evo.get(m, p, Part::Q).to_dense(), evo.get(n, p, Part::Q).to_dense());
                        (dense_sup(&am, &an, bp), dense_sup(&anq, &amq, bq))
                    }
                };
                let (rp, rq) = cert.weights(m, n)?;
                let rate = alpha * (m - n) as f64;
                let (lp, lq) = (gp.scale_exp(rate), gq.scale_exp(rate));
                let sp = slack(rp, lp);
                let sq = slack(rq, lq);
                checked += 1;
                for (s, part, lhs, dir, idx) in [(sp, Part::P, lp, &dp, n), (sq, Part::Q, lq, &dq, m)] {
                    if s < -VERIFY_TOL {
                        return Ok(Verdict::Violated {
                            witness: Witness {
                                m,
                                n,
                                p: Some(p),
                                part,
                                direction: dir.clone().unwrap_or_default(),
                                required_constant: lhs / constant_scale(cert, idx),
                                slack: Some(s),
                            },
                        });
                    }
                }
                min_slack = min_slack.min(sp).min(sq);
            }
        }
    }
    Ok(Verdict::Holds { min_slack, checked })
}

fn dense_sup(num: &DMatrix<f64>, den: &DMatrix<f64>, basis: &DMatrix<f64>) -> (LogScalar, Option<Vec<f64>>) {
    match ratio_extremes(num, Some(den), basis) {
        None => (LogScalar::ZERO, None),
        Some(r) => (
            LogScalar::from_f64(r.sup),
            Some(r.sup_dir.as_slice().to_vec()),
        ),
    }
}

/// Least `N ≥ 1` for which the uniform inequality with rate `alpha` holds
/// on the window.
pub fn optimal_n_for_alpha(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    alpha: f64,
    window: &WindowSpec,
) -> Result<LogScalar> {
    check_alpha(alpha)?;
    let table = ExtremesTable::build(sys, proj, window)?;
    Ok(table.min_constant(alpha, 0.0, window.m_max))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConstants(format!("alpha = {alpha} must be > 0")));
    }
    Ok(())
}

fn is_stable(full: LogScalar, half: LogScalar) -> bool {
    if full.is_infinite() {
        return false;
    }
    let growth = full.log_ratio(half);
    growth <= STABILITY_TOL * half.ln_f64().abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UedEstimate {
    pub alpha: f64,
    pub n_const: LogScalar,
    /// Minimal constant on the half window.
    pub n_half: LogScalar,
    pub stable: bool,
}

/// Grid search for the uniform constants; minimal `N`, ties to larger `α`.
pub fn estimate_ued(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    window: &WindowSpec,
    alpha_grid: &[f64],
) -> Result<Option<UedEstimate>> {
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid("alpha grid".into()));
    }
    alpha_grid.iter().try_for_each(|&a| check_alpha(a))?;
    let table = ExtremesTable::build(sys, proj, window)?;
    let half = window.half().m_max;
    let mut best: Option<UedEstimate> = None;
    for &alpha in alpha_grid {
        let n_const = table.min_constant(alpha, 0.0, window.m_max);
        if n_const.is_infinite() {
            continue;
        }
        let n_half = table.min_constant(alpha, 0.0, half);
        let cand = UedEstimate {
            alpha,
            n_const,
            n_half,
            stable: is_stable(n_const, n_half),
        };
        best = match best {
            None => Some(cand),
            Some(b) => Some(if better(&cand.n_const, cand.alpha, &b.n_const, b.alpha) {
                cand
            } else {
                b
            }),
        };
    }
    Ok(best)
}

/// Smaller `N` wins; equal `N` (to 1e-12 in log) prefers larger `α`.
fn better(n_a: &LogScalar, alpha_a: f64, n_b: &LogScalar, alpha_b: f64) -> bool {
    if n_a.log_close(*n_b, 1e-12) {
        alpha_a > alpha_b
    } else {
        n_a < n_b
    }
}

/// For each span `s = m − n`, the largest constant required by a pair with
/// that span (exponential form with fixed `α`, `β`).
pub fn minimal_constant_by_span(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    window: &WindowSpec,
    alpha: f64,
    beta: f64,
) -> Result<Vec<LogScalar>> {
    check_alpha(alpha)?;
    let table = ExtremesTable::build(sys, proj, window)?;
    let mut out = vec![LogScalar::ZERO; window.m_max - window.n_min + 1];
    for (m, n) in window.pairs() {
        let (rp, rq) = required_pair(table.get(m, n), alpha, m, n);
        let r = rp.scale_exp(-beta * n as f64).max(rq.scale_exp(-beta * m as f64));
        out[m - n] = out[m - n].max(r);
    }
    Ok(out)
}

/// Pointwise-minimal nondecreasing profile for the nonuniform inequality.
///
/// The P-side requirement at `(m, n)` constrains `N(n)`, the Q-side one
/// constrains `N(m)`; per-index maxima are followed by a running maximum.
pub fn minimal_ned_profile(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    alpha: f64,
    window: &WindowSpec,
) -> Result<NedProfile> {
    check_alpha(alpha)?;
    let table = ExtremesTable::build(sys, proj, window)?;
    let len = window.m_max - window.n_min + 1;
    let mut raw = vec![LogScalar::ZERO; len];
    for (m, n) in window.pairs() {
        let (rp, rq) = required_pair(table.get(m, n), alpha, m, n);
        raw[n - window.n_min] = raw[n - window.n_min].max(rp);
        raw[m - window.n_min] = raw[m - window.n_min].max(rq);
    }
    let mut running = LogScalar::ZERO;
    let values = raw
        .into_iter()
        .map(|r| {
            running = running.max(r);
            running
        })
        .collect();
    Ok(NedProfile {
        start: window.n_min,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub n_const: LogScalar,
    pub n_half: LogScalar,
    pub stable: bool,
}

/// Minimal `N` for every admissible `(α, β)` grid pair, in grid order.
pub fn scan_ed(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    window: &WindowSpec,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    strong: bool,
) -> Result<Vec<EdEstimate>> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::EmptyGrid("alpha and beta grids must be nonempty".into()));
    }
    alpha_grid.iter().try_for_each(|&a| check_alpha(a))?;
    if let Some(b) = beta_grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::InvalidConstants(format!("beta = {b} must be >= 0")));
    }
    let pairs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| !strong || b < a)
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyFeasibleSet(
            "strong dichotomy needs a grid pair with beta < alpha".into(),
        ));
    }
    let table = ExtremesTable::build(sys, proj, window)?;
    let half = window.half().m_max;
    Ok(pairs
        .into_iter()
        .map(|(alpha, beta)| {
            let n_const = table.min_constant(alpha, beta, window.m_max);
            let n_half = table.min_constant(alpha, beta, half);
            EdEstimate {
                alpha,
                beta,
                n_const,
                n_half,
                stable: is_stable(n_const, n_half),
            }
        })
        .collect())
}

/// Best `(α, β, N)` over the grid: minimal `N`, then larger `α`, then
/// smaller `β`.
pub fn estimate_ed(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    window: &WindowSpec,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    strong: bool,
) -> Result<Option<EdEstimate>> {
    let scan = scan_ed(sys, proj, window, alpha_grid, beta_grid, strong)?;
    Ok(scan
        .into_iter()
        .filter(|e| !e.n_const.is_infinite())
        .reduce(|b, c| {
            let c_wins = if c.n_const.log_close(b.n_const, 1e-12) {
                c.alpha > b.alpha || (c.alpha == b.alpha && c.beta < b.beta)
            } else {
                c.n_const < b.n_const
            };
            if c_wins {
                c
            } else {
                b
            }
        }))
}

/// Rate scale for the default grids: half the average log-separation
/// between the Q-range and P-range gains over the whole window, or 1 when
/// that is not positive and finite.
pub fn alpha_scale(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    window: &WindowSpec,
) -> Result<f64> {
    let table = ExtremesTable::build(sys, proj, window)?;
    let (m, n) = (window.m_max, window.n_min);
    if m == n {
        return Ok(1.0);
    }
    let ext = table.get(m, n);
    let sep: Dd = ext.min_gain_q.ln() - ext.growth_p.ln();
    let rate = sep.to_f64() / (2.0 * (m - n) as f64);
    Ok(if rate.is_finite() && rate > 0.0 { rate } else { 1.0 })
}

/// 32 log-spaced points in `(0, alpha_max]`, from `alpha_max/1000`.
pub fn default_alpha_grid(alpha_max: f64) -> Vec<f64> {
    let lo = (alpha_max / 1000.0).ln();
    let hi = alpha_max.ln();
    (0..32)
        .map(|i| (lo + (hi - lo) * i as f64 / 31.0).exp())
        .collect()
}

/// 16 evenly spaced points in `[0, 2·alpha_max]`.
pub fn default_beta_grid(alpha_max: f64) -> Vec<f64> {
    (0..16).map(|i| 2.0 * alpha_max * i as f64 / 15.0).collect()
}

/// `max(a/c, b/d)`, the supremum of `(s·a + t·b)/(s·c + t·d)` over
/// `s, t ≥ 0` not both zero.
pub fn mediant_bound(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let ratio = |x: f64, y: f64| {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x / y
        }
    };
    ratio(a, c).max(ratio(b, d))
}
