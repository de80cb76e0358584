//! Small dense helpers. Singular pairs come from the symmetric eigen
//! decomposition of the Gram matrix: nalgebra's SVD loses accuracy on
//! rank-deficient input such as oblique projections.

use nalgebra::{DMatrix, DVector};

/// Relative threshold under which a singular value counts as zero.
const RANK_TOL: f64 = 1e-10;

/// Right singular pairs `(‖m v‖, v)` of `m`, largest first. The values are
/// recomputed from the vectors, which keeps small ones accurate.
fn right_singular(m: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut pairs: Vec<_> = eig
        .eigenvectors
        .column_iter()
        .map(|v| {
            let v = v.into_owned();
            ((m * &v).norm(), v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    right_singular(m)[0].0
}

/// Orthonormal basis (as columns) of the column space of `p`.
pub(crate) fn range_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = p.nrows();
    let pairs = right_singular(&p.transpose());
    let smax = pairs.first().map_or(0.0, |x| x.0);
    let cols: Vec<DVector<f64>> = pairs
        .into_iter()
        .filter(|(s, _)| *s > RANK_TOL * smax.max(1.0))
        .map(|(_, u)| u)
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Extreme values of `‖num u‖ / ‖den u‖` over nonzero `u` in the span of
/// `basis` (orthonormal columns), with the attaining directions.
#[derive(Clone, Debug)]
pub(crate) struct RatioExtremes {
    pub sup: f64,
    pub sup_dir: DVector<f64>,
    pub inf: f64,
    pub inf_dir: DVector<f64>,
}

pub(crate) fn ratio_extremes(
    num: &DMatrix<f64>,
    den: Option<&DMatrix<f64>>,
    basis: &DMatrix<f64>,
) -> Option<RatioExtremes> {
    let k = basis.ncols();
    if k == 0 {
        return None;
    }
    // Change variables so the denominator becomes the Euclidean norm.
    let back = match den {
        None => basis.clone(),
        Some(den) => {
            let pairs = right_singular(&(den * basis));
            let smax = pairs[0].0;
            let cut = RANK_TOL * smax.max(1e-300);
            if pairs.iter().any(|(s, _)| *s <= cut) {
                let (kernel, keep): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(s, _)| *s <= cut);
                // directions killed by den must also be killed by num,
                // otherwise the ratio is unbounded
                for (_, v) in &kernel {
                    let dir = basis * v;
                    if (num * &dir).norm() > cut {
                        return Some(RatioExtremes {
                            sup: f64::INFINITY,
                            sup_dir: normalize(dir.clone()),
                            inf: 0.0,
                            inf_dir: normalize(dir),
                        });
                    }
                }
                if keep.is_empty() {
                    return None;
                }
                let cols: Vec<_> = keep.into_iter().map(|(_, v)| v).collect();
                let sub = basis * DMatrix::from_columns(&cols);
                return ratio_extremes(num, Some(den), &sub).map(|mut r| {
                    r.inf = 0.0;
                    r
                });
            }
            let cols: Vec<_> = pairs.iter().map(|(s, v)| v / *s).collect();
            basis * DMatrix::from_columns(&cols)
        }
    };
    let pairs = right_singular(&(num * &back));
    let (sup, vmax) = &pairs[0];
    let (inf, vmin) = &pairs[pairs.len() - 1];
    Some(RatioExtremes {
        sup: *sup,
        sup_dir: normalize(&back * vmax),
        inf: *inf,
        inf_dir: normalize(&back * vmin),
    })
}

fn normalize(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_has_unit_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_norm(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_of_oblique_projection() {
        // P = [[1, 1], [0, 0]] is idempotent with range span(e1)
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = range_basis(&p);
        assert_eq!(b.ncols(), 1);
        assert!((b[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_ratio_matches_diagonal_case() {
        let num = DMatrix::from_row_slice(2, 2, &[6.0, 0.0, 0.0, 1.0]);
        let den = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let id = DMatrix::identity(2, 2);
        let r = ratio_extremes(&num, Some(&den), &id).unwrap();
        assert!((r.sup - 3.0).abs() < 1e-12);
        assert!((r.inf - 1.0).abs() < 1e-12);
        assert!((r.sup_dir[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_of_rank_deficient_oblique_projection() {
        // P = T diag(1, 1, 0, 0) T⁻¹ for a non-orthogonal T
        let t = DMatrix::from_row_slice(
            4,
            4,
            &[1.3, 0.2, -0.4, 0.1, 0.3, 1.6, 0.2, -0.3, -0.2, 0.4, 1.2, 0.45, 0.1, -0.35, 0.25, 1.7],
        );
        let d = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 0.0, 0.0]);
        let p = &t * d * t.clone().try_inverse().unwrap();
        for q in [p.clone(), DMatrix::identity(4, 4) - &p] {
            let b = range_basis(&q);
            assert_eq!(b.ncols(), 2);
            assert!((&q * &b - &b).norm() < 1e-13);
            assert!((b.transpose() * &b - DMatrix::<f64>::identity(2, 2)).norm() < 1e-13);
        }
    }
}
