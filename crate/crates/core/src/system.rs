//! Systems `x_{n+1} = A(n) x_n`, projection families and evolution operators.
//!
//! Dense coefficients are plain `f64` matrices; the product `A(m)···A(n+1)`
//! is checked for overflow. Systems whose products leave the `f64` range must
//! be declared in diagonal closed form, where every coordinate of the
//! evolution is an exact log-domain sum of per-step factors.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ratio_extremes};
use crate::logscalar::{ExactSum, LogScalar};

/// Idempotence tolerance on matrix entries.
pub const TOL_PROJ: f64 = 1e-9;
/// Compatibility tolerance `‖A(n+1)P(n) − P(n+1)A(n+1)‖`.
pub const TOL_COMPAT: f64 = 1e-9;

/// `sign · exp(∑ parts)` with the summands kept apart, so that factors
/// like `e^{n·2^n + n + ln c}` accumulate exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct LogFactor {
    pub sign: i8,
    pub parts: Vec<f64>,
}

impl LogFactor {
    pub fn positive(parts: Vec<f64>) -> Self {
        LogFactor { sign: 1, parts }
    }

    pub fn zero() -> Self {
        LogFactor {
            sign: 0,
            parts: Vec::new(),
        }
    }

    pub fn to_logscalar(&self) -> LogScalar {
        if self.sign == 0 {
            return LogScalar::ZERO;
        }
        let mut s = ExactSum::new();
        self.parts.iter().for_each(|&p| s.add(p));
        LogScalar::from_log(self.sign, s.value())
    }
}

impl From<LogScalar> for LogFactor {
    fn from(x: LogScalar) -> Self {
        if x.is_zero() {
            return LogFactor::zero();
        }
        let l = x.ln();
        LogFactor {
            sign: x.sign(),
            parts: vec![l.hi(), l.lo()],
        }
    }
}

/// Per-coordinate closed form `n ↦ a_n` of a diagonal system.
pub type CoordinateFn = Arc<dyn Fn(usize) -> LogFactor + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Euclidean vector norm, spectral operator norm.
    #[default]
    Euclidean,
    /// Max norm; only valid for diagonal systems.
    Max,
}

#[derive(Clone)]
pub enum Coefficients {
    /// `A(n)` for `n = 0..len`.
    Explicit(Vec<DMatrix<f64>>),
    /// `A(n) = diag(f_1(n), …, f_d(n))`, optionally bounded by `n_max`.
    Diagonal {
        entries: Vec<CoordinateFn>,
        n_max: Option<usize>,
    },
}

#[derive(Clone)]
pub struct SystemDescription {
    dim: usize,
    coefficients: Coefficients,
    norm: NormKind,
}

impl fmt::Debug for SystemDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.coefficients {
            Coefficients::Explicit(v) => format!("Explicit({} matrices)", v.len()),
            Coefficients::Diagonal { n_max, .. } => format!("Diagonal(n_max = {n_max:?})"),
        };
        f.debug_struct("SystemDescription")
            .field("dim", &self.dim)
            .field("coefficients", &kind)
            .field("norm", &self.norm)
            .finish()
    }
}

impl SystemDescription {
    pub fn explicit(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidSystem("no coefficient matrices".into()))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        for (n, a) in matrices.iter().enumerate() {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::InvalidSystem(format!(
                    "A({n}) is {}x{}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSystem(format!("A({n}) has non-finite entries")));
            }
        }
        Ok(SystemDescription {
            dim,
            coefficients: Coefficients::Explicit(matrices),
            norm: NormKind::Euclidean,
        })
    }

    /// Autonomous system `A(n) = a` on `0..=n_max`.
    pub fn constant(a: DMatrix<f64>, n_max: usize) -> Result<Self> {
        Self::explicit(vec![a; n_max + 1])
    }

    pub fn diagonal(entries: Vec<CoordinateFn>, n_max: Option<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        Ok(SystemDescription {
            dim: entries.len(),
            coefficients: Coefficients::Diagonal { entries, n_max },
            norm: NormKind::Max,
        })
    }

    pub fn with_norm(mut self, norm: NormKind) -> Result<Self> {
        if norm == NormKind::Max && !self.is_diagonal() {
            return Err(Error::InvalidSystem(
                "max norm is only supported for diagonal systems".into(),
            ));
        }
        self.norm = norm;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.coefficients, Coefficients::Diagonal { .. })
    }

    /// Largest index with a defined coefficient, `None` if unbounded.
    pub fn n_max(&self) -> Option<usize> {
        match &self.coefficients {
            Coefficients::Explicit(v) => Some(v.len() - 1),
            Coefficients::Diagonal { n_max, .. } => *n_max,
        }
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        match self.n_max() {
            Some(max) if index > max => Err(Error::OutOfRange { index, max }),
            _ => Ok(()),
        }
    }

    /// Diagonal entries of `A(n)` (diagonal systems only).
    pub fn diagonal_at(&self, n: usize) -> Result<Vec<LogScalar>> {
        self.check_index(n)?;
        match &self.coefficients {
            Coefficients::Diagonal { entries, .. } => {
                Ok(entries.iter().map(|f| f(n).to_logscalar()).collect())
            }
            Coefficients::Explicit(_) => {
                Err(Error::InvalidSystem("system is not diagonal".into()))
            }
        }
    }

    /// `A(n)` as a dense matrix; diagonal entries are converted to `f64`.
    pub fn matrix_at(&self, n: usize) -> Result<DMatrix<f64>> {
        self.check_index(n)?;
        match &self.coefficients {
            Coefficients::Explicit(v) => Ok(v[n].clone()),
            Coefficients::Diagonal { entries, .. } => {
                let d: Vec<f64> = entries.iter().map(|f| f(n).to_logscalar().to_f64()).collect();
                Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
            }
        }
    }
}

/// A single projection `P(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Coordinate projection keeping the coordinates marked `true`.
    Mask(Vec<bool>),
    Matrix(DMatrix<f64>),
}

impl Projection {
    pub fn dim(&self) -> usize {
        match self {
            Projection::Mask(m) => m.len(),
            Projection::Matrix(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Projection::Mask(mask) => DMatrix::from_diagonal(&DVector::from_iterator(
                mask.len(),
                mask.iter().map(|&b| if b { 1.0 } else { 0.0 }),
            )),
            Projection::Matrix(m) => m.clone(),
        }
    }

    pub fn complement_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - self.matrix()
    }

    /// Coordinate mask, also recognized for 0/1 diagonal matrices.
    pub fn as_mask(&self) -> Option<Vec<bool>> {
        match self {
            Projection::Mask(m) => Some(m.clone()),
            Projection::Matrix(m) => {
                let d = m.nrows();
                let mut mask = Vec::with_capacity(d);
                for i in 0..d {
                    for j in 0..d {
                        if i != j && m[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                    match m[(i, i)] {
                        x if x == 1.0 => mask.push(true),
                        x if x == 0.0 => mask.push(false),
                        _ => return None,
                    }
                }
                Some(mask)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Projection::Matrix(p) = self {
            if p.nrows() != p.ncols() {
                return Err(Error::InvalidProjection("projection must be square".into()));
            }
            let p2 = p * p;
            let defect = (&p2 - p).amax();
            if !(defect <= TOL_PROJ) {
                return Err(Error::InvalidProjection(format!(
                    "P is not idempotent: max |P^2 - P| = {defect:e}"
                )));
            }
        }
        Ok(())
    }
}

/// `n ↦ P(n)`. A single entry is constant in `n`; otherwise entry `n` is
/// `P(n)` and indices past the end are out of range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFamily {
    projections: Vec<Projection>,
    constant: bool,
}

impl ProjectionFamily {
    pub fn constant(p: Projection) -> Result<Self> {
        p.validate()?;
        Ok(ProjectionFamily {
            projections: vec![p],
            constant: true,
        })
    }

    pub fn constant_mask(mask: Vec<bool>) -> Self {
        ProjectionFamily {
            projections: vec![Projection::Mask(mask)],
            constant: true,
        }
    }

    pub fn sequence(projections: Vec<Projection>) -> Result<Self> {
        if projections.is_empty() {
            return Err(Error::InvalidProjection("empty projection sequence".into()));
        }
        let dim = projections[0].dim();
        for p in &projections {
            p.validate()?;
            if p.dim() != dim {
                return Err(Error::InvalidProjection("mixed projection dimensions".into()));
            }
        }
        Ok(ProjectionFamily {
            projections,
            constant: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.projections[0].dim()
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn at(&self, n: usize) -> Result<&Projection> {
        if self.constant {
            Ok(&self.projections[0])
        } else {
            self.projections.get(n).ok_or(Error::OutOfRange {
                index: n,
                max: self.projections.len() - 1,
            })
        }
    }

    pub fn mask(&self, n: usize) -> Result<Option<Vec<bool>>> {
        Ok(self.at(n)?.as_mask())
    }

    pub(crate) fn check_against(&self, sys: &SystemDescription) -> Result<()> {
        if self.dim() != sys.dim() {
            return Err(Error::InvalidProjection(format!(
                "projection dimension {} does not match system dimension {}",
                self.dim(),
                sys.dim()
            )));
        }
        if sys.is_diagonal() && self.projections.iter().any(|p| p.as_mask().is_none()) {
            return Err(Error::InvalidProjection(
                "diagonal systems require coordinate-mask projections".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    P,
    Q,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvolutionMatrix {
    Dense(DMatrix<f64>),
    /// Diagonal entries in log-domain.
    Diagonal(Vec<LogScalar>),
}

/// `𝒜(m, n)` or one of its restrictions.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionOperator {
    pub m: usize,
    pub n: usize,
    pub matrix: EvolutionMatrix,
}

impl EvolutionOperator {
    pub fn dim(&self) -> usize {
        match &self.matrix {
            EvolutionMatrix::Dense(a) => a.nrows(),
            EvolutionMatrix::Diagonal(d) => d.len(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> LogScalar {
        match &self.matrix {
            EvolutionMatrix::Dense(a) => LogScalar::from_f64(a[(i, j)]),
            EvolutionMatrix::Diagonal(d) if i == j => d[i],
            EvolutionMatrix::Diagonal(_) => LogScalar::ZERO,
        }
    }

    /// Dense `f64` view; may contain infinities for extreme diagonal systems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.matrix {
            EvolutionMatrix::Dense(a) => a.clone(),
            EvolutionMatrix::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_iterator(
                d.len(),
                d.iter().map(|x| x.to_f64()),
            )),
        }
    }

    /// `self · rhs`, i.e. `𝒜(m, n)·𝒜(n, p) = 𝒜(m, p)` when indices chain.
    pub fn compose(&self, rhs: &EvolutionOperator) -> EvolutionOperator {
        let matrix = match (&self.matrix, &rhs.matrix) {
            (EvolutionMatrix::Diagonal(a), EvolutionMatrix::Diagonal(b)) => {
                EvolutionMatrix::Diagonal(a.iter().zip(b).map(|(x, y)| *x * *y).collect())
            }
            _ => EvolutionMatrix::Dense(self.to_dense() * rhs.to_dense()),
        };
        EvolutionOperator {
            m: self.m,
            n: rhs.n,
            matrix,
        }
    }

    /// `‖𝒜 x‖` in the system norm.
    pub fn image_norm(&self, x: &[f64], norm: NormKind) -> LogScalar {
        match &self.matrix {
            EvolutionMatrix::Dense(a) => {
                LogScalar::from_f64((a * DVector::from_column_slice(x)).norm())
            }
            EvolutionMatrix::Diagonal(d) => {
                let comps = d
                    .iter()
                    .zip(x)
                    .map(|(di, &xi)| (*di * LogScalar::from_f64(xi)).abs());
                vector_norm(comps, norm)
            }
        }
    }
}

pub(crate) fn vector_norm<I: Iterator<Item = LogScalar>>(comps: I, norm: NormKind) -> LogScalar {
    match norm {
        NormKind::Max => comps.fold(LogScalar::ZERO, LogScalar::max),
        NormKind::Euclidean => LogScalar::sum(comps.map(|c| c * c)).powf(0.5),
    }
}

pub(crate) fn unit_vector(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// Incremental `𝒜(m, n)` for fixed `n` and increasing `m`.
#[derive(Clone)]
pub(crate) struct EvolutionStepper<'a> {
    sys: &'a SystemDescription,
    n: usize,
    m: usize,
    state: StepState,
}

#[derive(Clone)]
enum StepState {
    Dense(DMatrix<f64>),
    Diagonal(Vec<(i8, ExactSum)>),
}

impl<'a> EvolutionStepper<'a> {
    pub(crate) fn new(sys: &'a SystemDescription, n: usize) -> Self {
        let state = match &sys.coefficients {
            Coefficients::Explicit(_) => StepState::Dense(DMatrix::identity(sys.dim, sys.dim)),
            Coefficients::Diagonal { .. } => {
                StepState::Diagonal(vec![(1, ExactSum::new()); sys.dim])
            }
        };
        EvolutionStepper { sys, n, m: n, state }
    }

    pub(crate) fn current(&self) -> EvolutionOperator {
        let matrix = match &self.state {
            StepState::Dense(a) => EvolutionMatrix::Dense(a.clone()),
            StepState::Diagonal(c) => EvolutionMatrix::Diagonal(
                c.iter()
                    .map(|(s, sum)| LogScalar::from_log(*s, sum.value()))
                    .collect(),
            ),
        };
        EvolutionOperator {
            m: self.m,
            n: self.n,
            matrix,
        }
    }

    /// Advance to `m + 1` by multiplying with `A(m + 1)` on the left.
    pub(crate) fn step(&mut self) -> Result<()> {
        let k = self.m + 1;
        self.sys.check_index(k)?;
        match (&mut self.state, &self.sys.coefficients) {
            (StepState::Dense(acc), Coefficients::Explicit(v)) => {
                let next = &v[k] * &*acc;
                if next.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Overflow { m: k, n: self.n });
                }
                *acc = next;
            }
            (StepState::Diagonal(acc), Coefficients::Diagonal { entries, .. }) => {
                for ((sign, sum), f) in acc.iter_mut().zip(entries) {
                    let a = f(k);
                    *sign *= a.sign;
                    if a.sign != 0 {
                        a.parts.iter().for_each(|&p| sum.add(p));
                    }
                }
            }
            _ => unreachable!("stepper state matches coefficient kind"),
        }
        self.m = k;
        Ok(())
    }
}

/// Incremental `(𝒜(m, n)P(n), 𝒜(m, n)Q(n))` for fixed `n`. Dense parts are
/// re-projected after every step (`P(k)A(k)` and `Q(k)A(k)`), so a decaying
/// part is not lost to cancellation against a growing one.
pub(crate) struct SplitStepper<'a> {
    sys: &'a SystemDescription,
    proj: &'a ProjectionFamily,
    n: usize,
    m: usize,
    state: SplitState<'a>,
}

enum SplitState<'a> {
    Dense(DMatrix<f64>, DMatrix<f64>),
    Diagonal(EvolutionStepper<'a>),
}

impl<'a> SplitStepper<'a> {
    pub(crate) fn new(sys: &'a SystemDescription, proj: &'a ProjectionFamily, n: usize) -> Result<Self> {
        let state = if sys.is_diagonal() {
            SplitState::Diagonal(EvolutionStepper::new(sys, n))
        } else {
            let p = proj.at(n)?;
            SplitState::Dense(p.matrix(), p.complement_matrix())
        };
        Ok(SplitStepper {
            sys,
            proj,
            n,
            m: n,
            state,
        })
    }

    pub(crate) fn step(&mut self) -> Result<()> {
        let k = self.m + 1;
        match &mut self.state {
            SplitState::Diagonal(st) => st.step()?,
            SplitState::Dense(ap, aq) => {
                let a = self.sys.matrix_at(k)?;
                let pk = self.proj.at(k)?;
                let next_p = pk.matrix() * (&a * &*ap);
                let next_q = pk.complement_matrix() * (&a * &*aq);
                if next_p.iter().chain(next_q.iter()).any(|x| !x.is_finite()) {
                    return Err(Error::Overflow { m: k, n: self.n });
                }
                *ap = next_p;
                *aq = next_q;
            }
        }
        self.m = k;
        Ok(())
    }

    /// Dense systems: the projected part. Diagonal systems: the full
    /// operator, whose coordinates callers select by mask.
    pub(crate) fn current(&self, part: Part) -> EvolutionOperator {
        match &self.state {
            SplitState::Diagonal(st) => st.current(),
            SplitState::Dense(ap, aq) => EvolutionOperator {
                m: self.m,
                n: self.n,
                matrix: EvolutionMatrix::Dense(if part == Part::P { ap.clone() } else { aq.clone() }),
            },
        }
    }

    pub(crate) fn advance_to(&mut self, m: usize) -> Result<()> {
        while self.m < m {
            self.step()?;
        }
        Ok(())
    }
}

/// `(𝒜(m, n)P(n), 𝒜(m, n)Q(n))` in the convention of [`SplitStepper::current`].
pub(crate) fn split_evolution(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    m: usize,
    n: usize,
) -> Result<(EvolutionOperator, EvolutionOperator)> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    proj.check_against(sys)?;
    sys.check_index(m)?;
    let mut st = SplitStepper::new(sys, proj, n)?;
    st.advance_to(m)?;
    Ok((st.current(Part::P), st.current(Part::Q)))
}

/// `𝒜(m, n) = A(m)···A(n+1)`, identity when `m = n`.
pub fn evolution(sys: &SystemDescription, m: usize, n: usize) -> Result<EvolutionOperator> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    sys.check_index(m)?;
    let mut stepper = EvolutionStepper::new(sys, n);
    while stepper.m < m {
        stepper.step()?;
    }
    Ok(stepper.current())
}

/// `‖A(n+1)P(n) − P(n+1)A(n+1)‖`.
pub fn compatibility_defect(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    n: usize,
) -> Result<f64> {
    proj.check_against(sys)?;
    sys.check_index(n + 1)?;
    let (p0, p1) = (proj.at(n)?, proj.at(n + 1)?);
    if sys.is_diagonal() {
        let (m0, m1) = (p0.as_mask().unwrap(), p1.as_mask().unwrap());
        let d = sys.diagonal_at(n + 1)?;
        let comps = (0..sys.dim)
            .filter(|&i| m0[i] != m1[i])
            .map(|i| d[i].abs());
        // the defect is diagonal, so every norm reduces to the largest entry
        return Ok(comps.fold(LogScalar::ZERO, LogScalar::max).to_f64());
    }
    let a = sys.matrix_at(n + 1)?;
    let defect = &a * p0.matrix() - p1.matrix() * &a;
    Ok(linalg::spectral_norm(&defect))
}

/// Fails with `IncompatibleProjection` unless compatible on `[n, m]`.
pub fn check_compatible(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    n: usize,
    m: usize,
) -> Result<()> {
    proj.check_against(sys)?;
    if sys.is_diagonal() && proj.is_constant() {
        return Ok(());
    }
    for k in n..m {
        let defect = compatibility_defect(sys, proj, k)?;
        if !(defect <= TOL_COMPAT) {
            return Err(Error::IncompatibleProjection { n: k, defect });
        }
    }
    Ok(())
}

/// `𝒜_P(m, n) = 𝒜(m, n)P(n)` or `𝒜_Q(m, n) = 𝒜(m, n)Q(n)`.
pub fn projected_evolution(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    m: usize,
    n: usize,
    part: Part,
) -> Result<EvolutionOperator> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    check_compatible(sys, proj, n, m)?;
    let (ap, aq) = split_evolution(sys, proj, m, n)?;
    match ap.matrix {
        EvolutionMatrix::Diagonal(_) => restrict(&ap, proj.at(n)?, part),
        _ => Ok(if part == Part::P { ap } else { aq }),
    }
}

fn restrict(full: &EvolutionOperator, p: &Projection, part: Part) -> Result<EvolutionOperator> {
    let matrix = match &full.matrix {
        EvolutionMatrix::Diagonal(d) => {
            let mask = p.as_mask().expect("checked by check_against");
            EvolutionMatrix::Diagonal(
                d.iter()
                    .zip(&mask)
                    .map(|(&x, &keep)| if keep == (part == Part::P) { x } else { LogScalar::ZERO })
                    .collect(),
            )
        }
        EvolutionMatrix::Dense(a) => EvolutionMatrix::Dense(match part {
            Part::P => a * p.matrix(),
            Part::Q => a * p.complement_matrix(),
        }),
    };
    Ok(EvolutionOperator {
        m: full.m,
        n: full.n,
        matrix,
    })
}

/// Extreme gains of `𝒜(m, n)` on `range P(n)` and `range Q(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedExtremes {
    /// `sup ‖𝒜u‖` over unit `u ∈ range P(n)`; zero for a trivial range.
    pub growth_p: LogScalar,
    /// `inf ‖𝒜v‖` over unit `v ∈ range Q(n)`; `+∞` for a trivial range.
    pub min_gain_q: LogScalar,
    pub growth_dir: Option<Vec<f64>>,
    pub min_gain_dir: Option<Vec<f64>>,
    /// `range Q(n) = {0}`: the Q-side constraint is vacuous.
    pub q_degenerate: bool,
}

/// `ap`/`aq` as produced by [`SplitStepper::current`].
pub(crate) fn extremes_of(
    ap: &EvolutionOperator,
    aq: &EvolutionOperator,
    p: &Projection,
    basis: Option<&(DMatrix<f64>, DMatrix<f64>)>,
) -> RestrictedExtremes {
    match &ap.matrix {
        EvolutionMatrix::Diagonal(d) => {
            let mask = p.as_mask().expect("diagonal systems use masks");
            let mut growth = (LogScalar::ZERO, None);
            let mut gain = (LogScalar::INFINITY, None);
            for (i, (&x, &in_p)) in d.iter().zip(&mask).enumerate() {
                let x = x.abs();
                if in_p {
                    if growth.1.is_none() || x > growth.0 {
                        growth = (x, Some(i));
                    }
                } else if gain.1.is_none() || x < gain.0 {
                    gain = (x, Some(i));
                }
            }
            let unit = |i: usize| unit_vector(d.len(), i);
            RestrictedExtremes {
                growth_p: growth.0,
                min_gain_q: gain.0,
                growth_dir: growth.1.map(unit),
                min_gain_dir: gain.1.map(unit),
                q_degenerate: gain.1.is_none(),
            }
        }
        EvolutionMatrix::Dense(a) => {
            let owned;
            let (bp, bq) = match basis {
                Some((bp, bq)) => (bp, bq),
                None => {
                    owned = (
                        linalg::range_basis(&p.matrix()),
                        linalg::range_basis(&p.complement_matrix()),
                    );
                    (&owned.0, &owned.1)
                }
            };
            let pr = ratio_extremes(a, None, bp);
            let qr = ratio_extremes(&aq.to_dense(), None, bq);
            RestrictedExtremes {
                growth_p: pr.as_ref().map_or(LogScalar::ZERO, |r| LogScalar::from_f64(r.sup)),
                growth_dir: pr.map(|r| r.sup_dir.as_slice().to_vec()),
                min_gain_q: qr
                    .as_ref()
                    .map_or(LogScalar::INFINITY, |r| LogScalar::from_f64(r.inf)),
                q_degenerate: qr.is_none(),
                min_gain_dir: qr.map(|r| r.inf_dir.as_slice().to_vec()),
            }
        }
    }
}

/// Extreme gains of `𝒜(m, n)` restricted to the ranges of `P(n)` and `Q(n)`.
///
/// Compatibility is not enforced here; the checkers verify it once per
/// window before relying on the split. A trivial `range Q(n)` yields `min_gain_q = +∞` with `q_degenerate` set.
pub fn restricted_extremes(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    m: usize,
    n: usize,
) -> Result<RestrictedExtremes> {
    if m < n {
        return Err(Error::IndexOrder { m, n });
    }
    let (ap, aq) = split_evolution(sys, proj, m, n)?;
    Ok(extremes_of(&ap, &aq, proj.at(n)?, None))
}

/// Like [`restricted_extremes`] but reports a trivial Q-range as an error.
pub fn restricted_extremes_strict(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    m: usize,
    n: usize,
) -> Result<RestrictedExtremes> {
    let r = restricted_extremes(sys, proj, m, n)?;
    if r.q_degenerate {
        return Err(Error::DegenerateRange(format!(
            "range Q({n}) is trivial; min_gain_Q is +inf by convention"
        )));
    }
    Ok(r)
}

/// `𝒜(m, n)` for `n_lo ≤ n ≤ n_hi` and `n ≤ m ≤ m_hi`, built row by row.
/// Split evolutions for `n_lo ≤ n ≤ n_hi`, `n ≤ m ≤ m_hi`, built row by row.
pub(crate) struct EvolutionTable {
    n_lo: usize,
    m_hi: usize,
    rows: Vec<Vec<[EvolutionOperator; 2]>>,
}

impl EvolutionTable {
    pub(crate) fn build(
        sys: &SystemDescription,
        proj: &ProjectionFamily,
        n_lo: usize,
        n_hi: usize,
        m_hi: usize,
    ) -> Result<Self> {
        sys.check_index(m_hi)?;
        proj.check_against(sys)?;
        let mut rows = Vec::with_capacity(n_hi + 1 - n_lo);
        for n in n_lo..=n_hi {
            let mut stepper = SplitStepper::new(sys, proj, n)?;
            let mut row = Vec::with_capacity(m_hi + 1 - n);
            row.push([stepper.current(Part::P), stepper.current(Part::Q)]);
            for _ in n..m_hi {
                stepper.step()?;
                row.push([stepper.current(Part::P), stepper.current(Part::Q)]);
            }
            rows.push(row);
        }
        Ok(EvolutionTable { n_lo, m_hi, rows })
    }

    /// See [`SplitStepper::current`] for what diagonal entries hold.
    pub(crate) fn get(&self, m: usize, n: usize, part: Part) -> &EvolutionOperator {
        debug_assert!(n >= self.n_lo && m >= n && m <= self.m_hi);
        &self.rows[n - self.n_lo][m - n][part as usize]
    }
}
