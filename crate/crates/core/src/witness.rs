//! Witness families: parameterized `(m_k, n_k, x)` along which the constant
//! required by a dichotomy inequality diverges.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::checkers::{DichotomyKind, Witness};
use crate::error::{Error, Result};
use crate::logscalar::LogScalar;
use crate::system::{check_compatible, split_evolution, vector_norm, Part, ProjectionFamily, SystemDescription};

/// Minimum number of witnesses before a family may be called divergent.
pub const MIN_DIVERGENT_WITNESSES: usize = 5;

/// `k ↦ scale·k + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineIndex {
    pub scale: usize,
    pub offset: usize,
}

impl AffineIndex {
    pub fn new(scale: usize, offset: usize) -> Self {
        AffineIndex { scale, offset }
    }

    pub fn at(&self, k: usize) -> usize {
        self.scale * k + self.offset
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSchedule {
    pub name: String,
    pub m: AffineIndex,
    pub n: AffineIndex,
    pub direction: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    /// Trial rate the required constant is computed for.
    pub alpha: f64,
    /// Trial nonuniformity exponent (ED/SED only).
    #[serde(default)]
    pub beta: f64,
}

impl WitnessSchedule {
    pub fn with_range(mut self, k_min: usize, k_max: usize) -> Self {
        self.k_min = k_min;
        self.k_max = k_max;
        self
    }

    pub fn with_trial(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Bounded,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub concept: DichotomyKind,
    pub schedule: String,
    pub witnesses: Vec<Witness>,
    pub trend: Trend,
    /// Least-squares slope of `ln required_constant` against `k`.
    #[serde(with = "crate::serde_ext")]
    pub log_slope: f64,
    pub divergence: String,
}

/// Minimal constant `N` for which the inequality holds at `(m, n, x)`:
/// `e^{α(m−n)}(‖𝒜_P x‖ + ‖Q x‖) / (w_P‖P x‖ + w_Q‖𝒜_Q x‖)` with the
/// concept's weights.
pub fn required_constant(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    concept: DichotomyKind,
    alpha: f64,
    beta: f64,
    m: usize,
    n: usize,
    x: &[f64],
) -> Result<LogScalar> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    if x.len() != sys.dim() {
        return Err(Error::InvalidConstants(format!(
            "direction has length {}, system dimension is {}",
            x.len(),
            sys.dim()
        )));
    }
    let beta = match concept {
        DichotomyKind::Ued => 0.0,
        DichotomyKind::Ned => {
            return Err(Error::InvalidConstants(
                "a nonuniform profile can absorb any single-index family; \
                 falsify NED with a profile bound instead"
                    .into(),
            ))
        }
        DichotomyKind::Ed => beta,
        DichotomyKind::Sed => {
            if beta >= alpha {
                return Err(Error::InvalidConstants(format!(
                    "strong trial needs beta < alpha, got beta = {beta}, alpha = {alpha}"
                )));
            }
            beta
        }
    };
    let p = proj.at(n)?;
    let xv = DVector::from_column_slice(x);
    let (u, v) = match p.as_mask() {
        Some(mask) => {
            let u: Vec<f64> = x.iter().zip(&mask).map(|(&xi, &k)| if k { xi } else { 0.0 }).collect();
            let v: Vec<f64> = x.iter().zip(&mask).map(|(&xi, &k)| if k { 0.0 } else { xi }).collect();
            (u, v)
        }
        None => {
            let u = p.matrix() * &xv;
            let v = &xv - &u;
            (u.as_slice().to_vec(), v.as_slice().to_vec())
        }
    };
    let (op_p, op_q) = split_evolution(sys, proj, m, n)?;
    let norm = |w: &[f64]| vector_norm(w.iter().map(|&c| LogScalar::from_f64(c)), sys.norm());
    let a = op_p.image_norm(&u, sys.norm());
    let b = norm(&v);
    let c = norm(&u);
    let d = op_q.image_norm(&v, sys.norm());
    let lhs = (a + b).scale_exp(alpha * (m - n) as f64);
    let rhs = c.scale_exp(beta * n as f64) + d.scale_exp(beta * m as f64);
    if lhs.is_zero() {
        return Ok(LogScalar::ZERO);
    }
    if rhs.is_zero() {
        return Ok(LogScalar::INFINITY);
    }
    Ok(lhs / rhs)
}

/// Evaluate the required constant along the schedule and classify its trend.
pub fn falsify(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    concept: DichotomyKind,
    schedule: &WitnessSchedule,
) -> Result<WitnessReport> {
    if schedule.k_min > schedule.k_max {
        return Err(Error::ScheduleOutOfRange(format!(
            "empty parameter range {}..={}",
            schedule.k_min, schedule.k_max
        )));
    }
    if !(schedule.alpha > 0.0 && schedule.alpha.is_finite()) {
        return Err(Error::InvalidConstants(format!("trial alpha = {} must be > 0", schedule.alpha)));
    }
    let mut pairs = Vec::new();
    for k in schedule.k_min..=schedule.k_max {
        let (m, n) = (schedule.m.at(k), schedule.n.at(k));
        if m < n {
            return Err(Error::ScheduleOutOfRange(format!("k = {k} gives m = {m} < n = {n}")));
        }
        if let Some(max) = sys.n_max() {
            if m > max {
                return Err(Error::ScheduleOutOfRange(format!(
                    "k = {k} gives m = {m} beyond the declared horizon {max}"
                )));
            }
        }
        pairs.push((k, m, n));
    }
    let lo = pairs.iter().map(|p| p.2).min().unwrap();
    let hi = pairs.iter().map(|p| p.1).max().unwrap();
    check_compatible(sys, proj, lo, hi)?;

    let mut witnesses = Vec::with_capacity(pairs.len());
    for &(_, m, n) in &pairs {
        let req = required_constant(
            sys,
            proj,
            concept,
            schedule.alpha,
            schedule.beta,
            m,
            n,
            &schedule.direction,
        )?;
        witnesses.push(Witness {
            m,
            n,
            p: None,
            part: dominant_part(proj, n, &schedule.direction)?,
            direction: schedule.direction.clone(),
            required_constant: req,
            slack: None,
        });
    }
    let ks: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let logs: Vec<f64> = witnesses.iter().map(|w| w.required_constant.ln_f64()).collect();
    let log_slope = ls_slope(&ks, &logs);
    let increasing = witnesses
        .windows(2)
        .all(|w| w[1].required_constant.log_ratio(w[0].required_constant) > 1e-12);
    let trend = if witnesses.len() >= MIN_DIVERGENT_WITNESSES && increasing && log_slope > 0.0 {
        Trend::Divergent
    } else {
        Trend::Bounded
    };
    let divergence = match trend {
        Trend::Divergent => format!(
            "required constant increases strictly over k = {}..={}; ln N grows with slope {:.6e} per step",
            schedule.k_min, schedule.k_max, log_slope
        ),
        Trend::Bounded => format!(
            "no monotone growth over k = {}..={} (slope {:.6e})",
            schedule.k_min, schedule.k_max, log_slope
        ),
    };
    Ok(WitnessReport {
        concept,
        schedule: schedule.name.clone(),
        witnesses,
        trend,
        log_slope,
        divergence,
    })
}

/// `Part::P` when the direction lies in `range P(n)`, otherwise `Part::Q`.
fn dominant_part(proj: &ProjectionFamily, n: usize, x: &[f64]) -> Result<Part> {
    let p = proj.at(n)?;
    let xv = DVector::from_column_slice(x);
    let u = p.matrix() * &xv;
    Ok(if (&xv - &u).norm() <= 1e-12 * xv.norm().max(1.0) {
        Part::P
    } else {
        Part::Q
    })
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 || y.iter().any(|v| !v.is_finite()) {
        return if y.contains(&f64::INFINITY) { f64::INFINITY } else { 0.0 };
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn growing_p() -> (SystemDescription, ProjectionFamily) {
        // P-coordinate grows by 2 per step: no dichotomy with this splitting
        let sys = SystemDescription::constant(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            100,
        )
        .unwrap();
        (sys, ProjectionFamily::constant_mask(vec![true, false]))
    }

    fn family(k_max: usize) -> WitnessSchedule {
        WitnessSchedule {
            name: "(k, 0, e1)".into(),
            m: AffineIndex::new(1, 0),
            n: AffineIndex::new(0, 0),
            direction: vec![1.0, 0.0],
            k_min: 0,
            k_max,
            alpha: 0.1,
            beta: 0.0,
        }
    }

    #[test]
    fn growing_family_is_divergent() {
        let (sys, p) = growing_p();
        let r = falsify(&sys, &p, DichotomyKind::Ued, &family(10)).unwrap();
        assert_eq!(r.trend, Trend::Divergent);
        assert!((r.log_slope - (2f64.ln() + 0.1)).abs() < 1e-9);
        assert_eq!(r.witnesses[3].part, Part::P);
    }

    #[test]
    fn short_families_are_never_divergent() {
        let (sys, p) = growing_p();
        let r = falsify(&sys, &p, DichotomyKind::Ued, &family(3)).unwrap();
        assert_eq!(r.witnesses.len(), 4);
        assert_eq!(r.trend, Trend::Bounded);
    }

    #[test]
    fn schedule_beyond_horizon() {
        let (sys, p) = growing_p();
        assert!(matches!(
            falsify(&sys, &p, DichotomyKind::Ued, &family(101)),
            Err(Error::ScheduleOutOfRange(_))
        ));
        let mut bad = family(5);
        bad.n = AffineIndex::new(2, 0);
        assert!(matches!(
            falsify(&sys, &p, DichotomyKind::Ued, &bad),
            Err(Error::ScheduleOutOfRange(_))
        ));
    }

    #[test]
    fn ned_and_bad_strong_trials_rejected() {
        let (sys, p) = growing_p();
        assert!(falsify(&sys, &p, DichotomyKind::Ned, &family(5)).is_err());
        let s = family(5).with_trial(0.5, 0.5);
        assert!(falsify(&sys, &p, DichotomyKind::Sed, &s).is_err());
    }

    #[test]
    fn required_constant_mixed_direction() {
        let (sys, p) = growing_p();
        // x = (1, 1), m = 1, n = 0: (2 + 1) / (1 + 3)
        let r = required_constant(&sys, &p, DichotomyKind::Ued, 1e-300, 0.0, 1, 0, &[1.0, 1.0]).unwrap();
        assert!((r.to_f64() - 0.75).abs() < 1e-12);
    }
}
