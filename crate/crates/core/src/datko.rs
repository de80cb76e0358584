//! Summation criteria: weighted trajectory sums bounded by the seed norms.
//!
//! The P-seeded sum `∑_{j≥s} e^{d(j−s)}‖𝒜(j,p)u‖` is truncated at `M` and
//! closed with a geometric tail taken from a decay certificate. Each
//! inequality is split into a P-seeded and a Q-seeded scalar inequality; the
//! suprema over each range are bounded term by term, which is exact on
//! one-dimensional ranges and conservative otherwise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::checkers::{DichotomyCertificate, NedProfile, WindowSpec, VERIFY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{range_basis, ratio_extremes};
use crate::logscalar::LogScalar;
use crate::system::{
    check_compatible, EvolutionMatrix, EvolutionTable, Part, SplitStepper, ProjectionFamily,
    SystemDescription,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatkoVerdict {
    Holds,
    Violated,
    InconclusiveTail,
}

/// One evaluated instance. Sums are normalized so the seed norms
/// `‖𝒜_P(s,p)u‖` and `‖𝒜_Q(m,n)v‖` equal one; `rhs = rhs_p + rhs_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatkoReport {
    pub m: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    pub d: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    pub lhs_p_sum: LogScalar,
    pub lhs_q_sum: LogScalar,
    pub tail_bound: LogScalar,
    pub rhs_p: LogScalar,
    pub rhs_q: LogScalar,
    pub rhs: LogScalar,
    pub verdict: DatkoVerdict,
}

/// Aggregate over a window: the first failure in scan order and the
/// tightest passing instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatkoScan {
    pub verdict: DatkoVerdict,
    pub checked: usize,
    pub first_failure: Option<DatkoReport>,
    pub tightest: Option<DatkoReport>,
    /// Largest `tail_bound / rhs` over the scan.
    #[serde(with = "crate::serde_ext")]
    pub max_tail_ratio: f64,
}

/// Constants of a summation criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DatkoConstants {
    /// `S(n)` for the nonuniform criterion.
    Profile { d: f64, s: NedProfile },
    /// `(D, c)` for the exponential criterion; `c = 0` for the uniform one.
    Exponential { d: f64, big_d: LogScalar, c: f64 },
}

/// Constants produced by the necessity argument:
/// `S(n) = e^α N(n)/(e^α − e^d)`, `D = 1 + N e^α/(e^α − e^d)`, `c = β`.
pub fn certificate_to_datko(cert: &DichotomyCertificate, d: f64) -> Result<DatkoConstants> {
    cert.validate()?;
    let alpha = cert.alpha();
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidConstants(format!("d = {d} must be > 0")));
    }
    if d >= alpha {
        return Err(Error::DecayGap { alpha, d });
    }
    // e^α/(e^α − e^d) = 1/(1 − e^{d−α})
    let geo = -(-(d - alpha).exp_m1()).ln();
    Ok(match cert {
        DichotomyCertificate::Ned { profile, .. } => DatkoConstants::Profile {
            d,
            s: NedProfile {
                start: profile.start,
                values: profile.values.iter().map(|v| v.scale_exp(geo)).collect(),
            },
        },
        DichotomyCertificate::Ued { n_const, .. }
        | DichotomyCertificate::Ed { n_const, .. }
        | DichotomyCertificate::Sed { n_const, .. } => DatkoConstants::Exponential {
            d,
            big_d: LogScalar::ONE + n_const.scale_exp(geo),
            c: cert.beta(),
        },
    })
}

/// The three sums for a concrete vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatkoLhs {
    pub p_sum: LogScalar,
    pub q_sum: LogScalar,
    pub tail_bound: LogScalar,
}

/// `∑_{j=n}^{M} e^{d(j−n)}‖𝒜_P(j,p)x‖`, `∑_{k=n}^{m} e^{d(m−k)}‖𝒜_Q(k,n)x‖`
/// and the geometric bound on the P-sum beyond `M` from `tail_cert`
/// (infinite without one, unless the P-part vanishes).
#[allow(clippy::too_many_arguments)]
pub fn datko_lhs(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    d: f64,
    m: usize,
    n: usize,
    p: usize,
    x: &[f64],
    m_trunc: usize,
    tail_cert: Option<&DichotomyCertificate>,
) -> Result<DatkoLhs> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    if n < p {
        return Err(Error::IndexOrder { m: n, n: p });
    }
    if m_trunc < m {
        return Err(Error::IndexOrder { m: m_trunc, n: m });
    }
    if x.len() != sys.dim() {
        return Err(Error::InvalidConstants(format!(
            "vector has length {}, system dimension is {}",
            x.len(),
            sys.dim()
        )));
    }
    if let Some(cert) = tail_cert {
        if d >= cert.alpha() {
            return Err(Error::NoDecayCertificate { alpha: cert.alpha(), d });
        }
    }
    check_compatible(sys, proj, p, m_trunc)?;
    let xv = DVector::from_column_slice(x);
    let px = (proj.at(p)?.matrix() * &xv).as_slice().to_vec();
    let qx = (proj.at(n)?.complement_matrix() * &xv).as_slice().to_vec();

    let mut stepper = SplitStepper::new(sys, proj, p)?;
    let mut terms = Vec::new();
    let mut seed = LogScalar::ZERO;
    for j in p..=m_trunc {
        if j > p {
            stepper.step()?;
        }
        if j >= n {
            let v = stepper.current(Part::P).image_norm(&px, sys.norm());
            if j == n {
                seed = v;
            }
            terms.push(v.scale_exp(d * (j - n) as f64));
        }
    }
    let p_sum = LogScalar::sum(terms);

    let mut stepper = SplitStepper::new(sys, proj, n)?;
    let mut terms = Vec::new();
    for k in n..=m {
        if k > n {
            stepper.step()?;
        }
        terms.push(stepper.current(Part::Q).image_norm(&qx, sys.norm()).scale_exp(d * (m - k) as f64));
    }
    let q_sum = LogScalar::sum(terms);

    let tail_bound = if seed.is_zero() {
        LogScalar::ZERO
    } else {
        match tail_cert {
            Some(cert) => tail_factor(cert, d, n, m_trunc)? * seed,
            None => LogScalar::INFINITY,
        }
    };
    Ok(DatkoLhs {
        p_sum,
        q_sum,
        tail_bound,
    })
}

/// `R_P(s)·e^{(d−α)(M+1−s)}/(1−e^{d−α})`.
fn tail_factor(cert: &DichotomyCertificate, d: f64, s: usize, m_trunc: usize) -> Result<LogScalar> {
    let alpha = cert.alpha();
    if d >= alpha {
        return Err(Error::NoDecayCertificate { alpha, d });
    }
    let gap = d - alpha;
    let log = gap * (m_trunc + 1 - s) as f64 - (-gap.exp_m1()).ln();
    Ok(cert.p_weight(s)?.scale_exp(log))
}

/// Per-window sums on extremal directions.
struct SumEngine<'a> {
    proj: &'a ProjectionFamily,
    table: EvolutionTable,
    d: f64,
    m_trunc: usize,
}

impl<'a> SumEngine<'a> {
    fn new(
        sys: &'a SystemDescription,
        proj: &'a ProjectionFamily,
        window: &WindowSpec,
        d: f64,
        m_trunc: usize,
    ) -> Result<Self> {
        if window.n_min > window.m_max {
            return Err(Error::InvalidWindow(format!(
                "n_min = {} > m_max = {}",
                window.n_min, window.m_max
            )));
        }
        if m_trunc < window.m_max {
            return Err(Error::InvalidWindow(format!(
                "truncation M = {m_trunc} below window end {}",
                window.m_max
            )));
        }
        check_compatible(sys, proj, window.n_min, m_trunc)?;
        let table = EvolutionTable::build(sys, proj, window.n_min, window.m_max, m_trunc)?;
        Ok(SumEngine {
            proj,
            table,
            d,
            m_trunc,
        })
    }

    /// `∑_{j=s}^{M} e^{d(j−s)} sup_{u ∈ range P(p)} ‖𝒜(j,p)u‖/‖𝒜(s,p)u‖`,
    /// or `None` when `𝒜(s,p)` annihilates `range P(p)`.
    fn p_sum(&self, s: usize, p: usize) -> Result<Option<LogScalar>> {
        let mut terms = Vec::with_capacity(self.m_trunc + 1 - s);
        match &self.table.get(s, p, Part::P).matrix {
            EvolutionMatrix::Diagonal(seed) => {
                let mask = self.proj.mask(p)?.expect("diagonal systems use masks");
                let coords: Vec<usize> = (0..seed.len())
                    .filter(|&i| mask[i] && !seed[i].is_zero())
                    .collect();
                if coords.is_empty() {
                    return Ok(None);
                }
                for j in s..=self.m_trunc {
                    let EvolutionMatrix::Diagonal(a) = &self.table.get(j, s, Part::P).matrix else {
                        unreachable!()
                    };
                    let sup = coords.iter().map(|&i| a[i].abs()).fold(LogScalar::ZERO, LogScalar::max);
                    terms.push(sup.scale_exp(self.d * (j - s) as f64));
                }
            }
            EvolutionMatrix::Dense(seed) => {
                let basis = range_basis(&self.proj.at(p)?.matrix());
                if ratio_extremes(seed, None, &basis).is_none_or(|r| r.sup == 0.0) {
                    return Ok(None);
                }
                for j in s..=self.m_trunc {
                    let num = self.table.get(j, p, Part::P).to_dense();
                    let sup = ratio_extremes(&num, Some(seed), &basis).map_or(0.0, |r| r.sup);
                    terms.push(LogScalar::from_f64(sup).scale_exp(self.d * (j - s) as f64));
                }
            }
        }
        Ok(Some(LogScalar::sum(terms)))
    }

    /// `∑_{k=n}^{m} e^{d(m−k)} sup_{v ∈ range Q(n)} ‖𝒜(k,n)v‖/‖𝒜(m,n)v‖`.
    fn q_sum(&self, m: usize, n: usize) -> Result<LogScalar> {
        let mut terms = Vec::with_capacity(m + 1 - n);
        match &self.table.get(m, n, Part::Q).matrix {
            EvolutionMatrix::Diagonal(_) => {
                let mask = self.proj.mask(n)?.expect("diagonal systems use masks");
                let coords: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
                if coords.is_empty() {
                    return Ok(LogScalar::ZERO);
                }
                for k in n..=m {
                    // 𝒜(k,n)_i / 𝒜(m,n)_i = 1 / 𝒜(m,k)_i
                    let EvolutionMatrix::Diagonal(a) = &self.table.get(m, k, Part::Q).matrix else {
                        unreachable!()
                    };
                    let sup = coords
                        .iter()
                        .map(|&i| a[i].abs().recip())
                        .fold(LogScalar::ZERO, LogScalar::max);
                    terms.push(sup.scale_exp(self.d * (m - k) as f64));
                }
            }
            EvolutionMatrix::Dense(den) => {
                let basis = range_basis(&self.proj.at(n)?.complement_matrix());
                if basis.ncols() == 0 {
                    return Ok(LogScalar::ZERO);
                }
                for k in n..=m {
                    let num: DMatrix<f64> = self.table.get(k, n, Part::Q).to_dense();
                    let sup = ratio_extremes(&num, Some(den), &basis).map_or(0.0, |r| r.sup);
                    terms.push(LogScalar::from_f64(sup).scale_exp(self.d * (m - k) as f64));
                }
            }
        }
        Ok(LogScalar::sum(terms))
    }

    fn tail(&self, cert: Option<&DichotomyCertificate>, s: usize) -> Result<LogScalar> {
        match cert {
            Some(c) => tail_factor(c, self.d, s, self.m_trunc),
            None => Ok(LogScalar::INFINITY),
        }
    }
}

fn log_slack(rhs: LogScalar, lhs: LogScalar) -> f64 {
    if lhs.is_zero() || (rhs.is_infinite() && !lhs.is_infinite()) {
        return f64::INFINITY;
    }
    if rhs.is_zero() || lhs.is_infinite() {
        return f64::NEG_INFINITY;
    }
    (rhs.ln() - lhs.ln()).to_f64()
}

struct Instance {
    m: usize,
    n: usize,
    p: Option<usize>,
    c: Option<f64>,
    lhs_p: LogScalar,
    lhs_q: LogScalar,
    tail: LogScalar,
    rhs_p: LogScalar,
    rhs_q: LogScalar,
}

struct Aggregator {
    d: f64,
    checked: usize,
    first_failure: Option<(DatkoReport, bool)>,
    tightest: Option<(f64, DatkoReport)>,
    inconclusive: Option<DatkoReport>,
    max_tail_ratio: f64,
}

impl Aggregator {
    fn new(d: f64) -> Self {
        Aggregator {
            d,
            checked: 0,
            first_failure: None,
            tightest: None,
            inconclusive: None,
            max_tail_ratio: 0.0,
        }
    }

    /// Returns false once a violation has been recorded.
    fn push(&mut self, inst: Instance) -> bool {
        self.checked += 1;
        let sp_trunc = log_slack(inst.rhs_p, inst.lhs_p);
        let sp_full = log_slack(inst.rhs_p, inst.lhs_p + inst.tail);
        let sq = log_slack(inst.rhs_q, inst.lhs_q);
        let verdict = if sp_trunc < -VERIFY_TOL || sq < -VERIFY_TOL {
            DatkoVerdict::Violated
        } else if sp_full < -VERIFY_TOL {
            DatkoVerdict::InconclusiveTail
        } else {
            DatkoVerdict::Holds
        };
        let rhs = inst.rhs_p + inst.rhs_q;
        if !inst.tail.is_zero() {
            let ratio = if inst.tail.is_infinite() {
                f64::INFINITY
            } else {
                (inst.tail / rhs).to_f64()
            };
            self.max_tail_ratio = self.max_tail_ratio.max(ratio);
        }
        let report = DatkoReport {
            m: inst.m,
            n: inst.n,
            p: inst.p,
            d: self.d,
            c: inst.c,
            lhs_p_sum: inst.lhs_p,
            lhs_q_sum: inst.lhs_q,
            tail_bound: inst.tail,
            rhs_p: inst.rhs_p,
            rhs_q: inst.rhs_q,
            rhs,
            verdict,
        };
        match verdict {
            DatkoVerdict::Violated => {
                self.first_failure = Some((report, true));
                return false;
            }
            DatkoVerdict::InconclusiveTail => {
                if self.inconclusive.is_none() {
                    self.inconclusive = Some(report);
                }
            }
            DatkoVerdict::Holds => {
                let s = sp_full.min(sq);
                if self.tightest.as_ref().is_none_or(|(t, _)| s < *t) {
                    self.tightest = Some((s, report));
                }
            }
        }
        true
    }

    fn finish(self) -> DatkoScan {
        let (verdict, first_failure) = match (self.first_failure, self.inconclusive) {
            (Some((r, _)), _) => (DatkoVerdict::Violated, Some(r)),
            (None, Some(r)) => (DatkoVerdict::InconclusiveTail, Some(r)),
            (None, None) => (DatkoVerdict::Holds, None),
        };
        DatkoScan {
            verdict,
            checked: self.checked,
            first_failure,
            tightest: self.tightest.map(|t| t.1),
            max_tail_ratio: self.max_tail_ratio,
        }
    }
}

fn check_d(d: f64, allow_zero: bool) -> Result<()> {
    let ok = d.is_finite() && (d > 0.0 || (allow_zero && d == 0.0));
    if !ok {
        return Err(Error::InvalidConstants(format!(
            "d = {d} must be {}",
            if allow_zero { ">= 0" } else { "> 0" }
        )));
    }
    Ok(())
}

fn check_big_d(big_d: LogScalar) -> Result<()> {
    if big_d < LogScalar::ONE {
        return Err(Error::InvalidConstants(format!("D = {big_d} must be >= 1")));
    }
    Ok(())
}

fn check_tail_cert(cert: Option<&DichotomyCertificate>, d: f64) -> Result<()> {
    if let Some(c) = cert {
        c.validate()?;
        if d >= c.alpha() {
            return Err(Error::NoDecayCertificate { alpha: c.alpha(), d });
        }
    }
    Ok(())
}

/// Triplet scan shared by the nonuniform and exponential criteria.
#[allow(clippy::too_many_arguments)]
fn scan_triplets(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    d: f64,
    c: Option<f64>,
    weight: &dyn Fn(usize) -> Result<LogScalar>,
    window: &WindowSpec,
    m_trunc: usize,
    tail_cert: Option<&DichotomyCertificate>,
) -> Result<DatkoScan> {
    let engine = SumEngine::new(sys, proj, window, d, m_trunc)?;
    let len = window.m_max - window.n_min + 1;
    let mut q_cache: Vec<Vec<Option<LogScalar>>> = vec![vec![None; len]; len];
    let mut agg = Aggregator::new(d);
    'outer: for p in window.n_min..=window.m_max {
        for n in p..=window.m_max {
            let (lhs_p, tail) = match engine.p_sum(n, p)? {
                Some(s) => (s, engine.tail(tail_cert, n)?),
                None => (LogScalar::ZERO, LogScalar::ZERO),
            };
            let rhs_p = weight(n)?;
            for m in n..=window.m_max {
                let slot = &mut q_cache[n - window.n_min][m - window.n_min];
                let lhs_q = match slot {
                    Some(v) => *v,
                    None => *slot.insert(engine.q_sum(m, n)?),
                };
                let keep_going = agg.push(Instance {
                    m,
                    n,
                    p: Some(p),
                    c,
                    lhs_p,
                    lhs_q,
                    tail,
                    rhs_p,
                    rhs_q: weight(m)?,
                });
                if !keep_going {
                    break 'outer;
                }
            }
        }
    }
    Ok(agg.finish())
}

/// Nonuniform criterion over all triplets `p ≤ n ≤ m` of the window:
/// `∑_{j≥n} e^{d(j−n)}‖𝒜_P(j,p)x‖ + ∑_{k=n}^{m} e^{d(m−k)}‖𝒜_Q(k,n)x‖ ≤ S(n)‖𝒜_P(n,p)x‖ + S(m)‖𝒜_Q(m,n)x‖`.
pub fn verify_datko_ned(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    d: f64,
    s_profile: &NedProfile,
    window: &WindowSpec,
    m_trunc: usize,
    tail_cert: Option<&DichotomyCertificate>,
) -> Result<DatkoScan> {
    check_d(d, false)?;
    check_tail_cert(tail_cert, d)?;
    if s_profile.values.iter().any(|v| v.sign() < 0) {
        return Err(Error::InvalidConstants("S must be nonnegative".into()));
    }
    let weight = |i: usize| s_profile.value(i).map_err(|e| Error::InvalidConstants(e.to_string()));
    scan_triplets(sys, proj, d, None, &weight, window, m_trunc, tail_cert)
}

/// Exponential criterion over triplets, weights `D e^{cn}` and `D e^{cm}`.
/// The strong variant only adds the gate `c < d`.
#[allow(clippy::too_many_arguments)]
pub fn verify_datko_ed(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    d: f64,
    c: f64,
    big_d: LogScalar,
    window: &WindowSpec,
    m_trunc: usize,
    strong: bool,
    tail_cert: Option<&DichotomyCertificate>,
) -> Result<DatkoScan> {
    check_d(d, false)?;
    check_big_d(big_d)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidConstants(format!("c = {c} must be >= 0")));
    }
    if strong && c >= d {
        return Err(Error::InvalidConstants(format!(
            "strong criterion needs c < d, got c = {c}, d = {d}"
        )));
    }
    check_tail_cert(tail_cert, d)?;
    let weight = |i: usize| Ok(big_d.scale_exp(c * i as f64));
    scan_triplets(sys, proj, d, Some(c), &weight, window, m_trunc, tail_cert)
}

/// Uniform criterion over pairs `n ≤ m`:
/// `∑_{j≥m} e^{d(j−m)}‖𝒜_P(j,n)x‖ + ∑_{k=n}^{m} e^{d(m−k)}‖𝒜_Q(k,n)x‖ ≤ D(‖𝒜_P(m,n)x‖ + ‖𝒜_Q(m,n)x‖)`.
///
/// The P-sum starts at `j = m` and is weighted from `m`; `d = 0` gives the
/// unweighted form.
pub fn verify_datko_ued(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    d: f64,
    big_d: LogScalar,
    window: &WindowSpec,
    m_trunc: usize,
    tail_cert: Option<&DichotomyCertificate>,
) -> Result<DatkoScan> {
    check_d(d, true)?;
    check_big_d(big_d)?;
    check_tail_cert(tail_cert, d)?;
    let engine = SumEngine::new(sys, proj, window, d, m_trunc)?;
    let mut agg = Aggregator::new(d);
    'outer: for n in window.n_min..=window.m_max {
        for m in n..=window.m_max {
            let (lhs_p, tail) = match engine.p_sum(m, n)? {
                Some(s) => (s, engine.tail(tail_cert, m)?),
                None => (LogScalar::ZERO, LogScalar::ZERO),
            };
            let keep_going = agg.push(Instance {
                m,
                n,
                p: None,
                c: None,
                lhs_p,
                lhs_q: engine.q_sum(m, n)?,
                tail,
                rhs_p: big_d,
                rhs_q: big_d,
            });
            if !keep_going {
                break 'outer;
            }
        }
    }
    Ok(agg.finish())
}

/// Map `cert` with rate `d` and check the matching criterion, using the
/// certificate itself for the tail.
pub fn datko_round_trip(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    cert: &DichotomyCertificate,
    d: f64,
    window: &WindowSpec,
    m_trunc: usize,
) -> Result<DatkoScan> {
    match (cert, certificate_to_datko(cert, d)?) {
        (DichotomyCertificate::Ued { .. }, DatkoConstants::Exponential { big_d, .. }) => {
            verify_datko_ued(sys, proj, d, big_d, window, m_trunc, Some(cert))
        }
        (_, DatkoConstants::Exponential { big_d, c, .. }) => {
            verify_datko_ed(sys, proj, d, c, big_d, window, m_trunc, false, Some(cert))
        }
        (_, DatkoConstants::Profile { s, .. }) => {
            verify_datko_ned(sys, proj, d, &s, window, m_trunc, Some(cert))
        }
    }
}
