mod common;

use common::{naive_product, random_dense, random_dichotomic, rel_close};
use dichotomy::checkers::{
    mediant_bound, minimal_ned_profile, optimal_n_for_alpha, verify_certificate, verify_triplet_form,
    DichotomyCertificate, NedProfile, WindowSpec,
};
use dichotomy::datko::{datko_lhs, datko_round_trip, DatkoVerdict};
use dichotomy::gallery::{make_example, GalleryEntry, GALLERY_NAMES, NED_EXAMPLE, NED_NOT_ED_EXAMPLE, SED_EXAMPLE};
use dichotomy::logscalar::LogScalar;
use dichotomy::system::{evolution, ProjectionFamily, SystemDescription};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn entry(i: usize) -> GalleryEntry {
    make_example(GALLERY_NAMES[i], &[]).unwrap()
}

fn horizon(g: &GalleryEntry) -> usize {
    if g.name == NED_NOT_ED_EXAMPLE {
        16
    } else {
        30
    }
}

fn holds(g: &GalleryEntry, cert: &DichotomyCertificate, w: &WindowSpec) -> bool {
    verify_certificate(&g.system, &g.projection, cert, w).unwrap().holds()
}

fn ed_as_ned(n_const: LogScalar, alpha: f64, beta: f64, end: usize) -> DichotomyCertificate {
    DichotomyCertificate::Ned {
        alpha,
        profile: NedProfile::from_fn(0, end, |n| n_const.scale_exp(beta * n as f64)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn cocycle_on_random_systems(seed in any::<u64>(), dim in 2usize..=4, m in 0usize..=12, k in 0usize..=12, n in 0usize..=12) {
        let mut idx = [n, k, m];
        idx.sort();
        let [n, k, m] = idx;
        let (sys, mats) = random_dense(seed, dim, 12);
        let full = evolution(&sys, m, n).unwrap().to_dense();
        prop_assert!(rel_close(&full, &naive_product(&mats, m, n), 1e-9));
        let split = evolution(&sys, m, k).unwrap().compose(&evolution(&sys, k, n).unwrap()).to_dense();
        prop_assert!(rel_close(&full, &split, 1e-9));
        prop_assert!(rel_close(&evolution(&sys, n, n).unwrap().to_dense(), &DMatrix::identity(dim, dim), 0.0));
    }

    #[test]
    fn mediant_dominates_every_mixture(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.01f64..10.0, d in 0.01f64..10.0, s in 0.0f64..1.0) {
        let t = 1.0 - s;
        let mix = (s * a + t * b) / (s * c + t * d);
        let bound = mediant_bound(a, b, c, d);
        prop_assert!(mix <= bound * (1.0 + 1e-12));
        prop_assert!((bound - (a / c).max(b / d)).abs() <= 1e-12 * bound.max(1.0));
    }

    #[test]
    fn implication_lattice(i in 0usize..4, ln_n in 0.0f64..3.0, alpha in 0.05f64..2.5, beta_frac in 0.0f64..1.5) {
        let g = entry(i);
        let h = horizon(&g);
        let w = WindowSpec::new(0, h).unwrap();
        let n_const = LogScalar::exp(ln_n);
        let beta = beta_frac * alpha;
        let ued = DichotomyCertificate::Ued { n_const, alpha };
        if holds(&g, &ued, &w) {
            prop_assert!(holds(&g, &ued.as_ned(h).unwrap(), &w));
            prop_assert!(holds(&g, &ued.as_ed().unwrap(), &w));
            prop_assert!(holds(&g, &ued.as_sed().unwrap(), &w));
        }
        if beta < alpha {
            let sed = DichotomyCertificate::sed(n_const, alpha, beta);
            if holds(&g, &sed, &w) {
                prop_assert!(holds(&g, &sed.as_ed().unwrap(), &w));
            }
        }
        let ed = DichotomyCertificate::ed(n_const, alpha, beta);
        prop_assert_eq!(holds(&g, &ed, &w), holds(&g, &ed_as_ned(n_const, alpha, beta, h), &w));
    }

    #[test]
    fn pair_and_triplet_forms_agree(i in 0usize..4, ln_n in 0.0f64..3.0, alpha in 0.05f64..2.5, beta in 0.0f64..2.0, ned in any::<bool>()) {
        let g = entry(i);
        let h = horizon(&g).min(18);
        let cert = if ned {
            ed_as_ned(LogScalar::exp(ln_n), alpha, beta, h)
        } else {
            DichotomyCertificate::ed(LogScalar::exp(ln_n), alpha, beta)
        };
        let pairs = verify_certificate(&g.system, &g.projection, &cert, &WindowSpec::new(0, h).unwrap()).unwrap();
        let triplets = verify_triplet_form(&g.system, &g.projection, &cert, &WindowSpec::triplets(0, h).unwrap()).unwrap();
        prop_assert_eq!(pairs.holds(), triplets.holds());
    }

    #[test]
    fn autonomous_diagonal_reduces_to_spectral_gap(a in 0.1f64..0.9, b in 1.1f64..5.0, alpha in 0.01f64..3.0) {
        let sys = SystemDescription::constant(DMatrix::from_diagonal(&nalgebra::dvector![a, b]), 30).unwrap();
        let proj = ProjectionFamily::constant_mask(vec![true, false]);
        let gap = (-a.ln()).min(b.ln());
        let n = optimal_n_for_alpha(&sys, &proj, alpha, &WindowSpec::new(0, 30).unwrap()).unwrap();
        let expected = ((alpha - gap) * 30.0).max(0.0);
        prop_assert!((n.ln_f64() - expected).abs() <= 1e-9 * expected.max(1.0), "{} vs {}", n.ln_f64(), expected);
    }

    #[test]
    fn index_origin_shift(seed in any::<u64>(), dim in 2usize..=3, shift in 0usize..6, ln_n in 0.0f64..2.0, alpha in 0.01f64..1.0) {
        let rs = random_dichotomic(seed, dim, 30);
        let shifted = SystemDescription::explicit(rs.matrices[shift..].to_vec()).unwrap();
        let cert = DichotomyCertificate::ued(ln_n.exp(), alpha);
        let base = verify_certificate(&rs.sys, &rs.proj, &cert, &WindowSpec::new(shift, 20 + shift).unwrap()).unwrap();
        let moved = verify_certificate(&shifted, &rs.proj, &cert, &WindowSpec::new(0, 20).unwrap()).unwrap();
        prop_assert_eq!(base.holds(), moved.holds());
    }

    #[test]
    fn datko_truncation_is_monotone(i in 0usize..4, p in 0usize..6, dn in 0usize..6, dm in 0usize..6, extra in 1usize..20) {
        let g = entry(i);
        let cert = g.claims(60).into_iter().find_map(|c| match c.expectation {
            dichotomy::gallery::ClaimExpectation::Certified { certificate } => Some(certificate),
            _ => None,
        }).unwrap();
        let (n, m) = (p + dn, p + dn + dm);
        let d = cert.alpha() / 2.0;
        let m_trunc = m + 5;
        let x = vec![1.0, 1.0];
        let short = datko_lhs(&g.system, &g.projection, d, m, n, p, &x, m_trunc, Some(&cert)).unwrap();
        let long = datko_lhs(&g.system, &g.projection, d, m, n, p, &x, m_trunc + extra, Some(&cert)).unwrap();
        prop_assert!(short.p_sum <= long.p_sum);
        prop_assert!(long.p_sum.ln_f64() <= (short.p_sum + short.tail_bound).ln_f64() + 1e-9);
        prop_assert_eq!(short.q_sum, long.q_sum);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pointwise_certificate_implies_summation_bound(seed in any::<u64>(), dim in 2usize..=3) {
        let rs = random_dichotomic(seed, dim, 60);
        let alpha = 0.1;
        let n_const = optimal_n_for_alpha(&rs.sys, &rs.proj, alpha, &WindowSpec::new(0, 60).unwrap()).unwrap();
        let cert = DichotomyCertificate::Ued { n_const, alpha };
        let scan = datko_round_trip(&rs.sys, &rs.proj, &cert, alpha / 2.0, &WindowSpec::new(0, 12).unwrap(), 60).unwrap();
        prop_assert_eq!(scan.verdict, DatkoVerdict::Holds);
    }

    #[test]
    fn minimal_profile_is_tight(seed in any::<u64>(), dim in 2usize..=3, alpha in 0.05f64..0.5) {
        let rs = random_dichotomic(seed, dim, 25);
        let w = WindowSpec::new(0, 25).unwrap();
        check_profile_tightness(&rs.sys, &rs.proj, alpha, &w)?;
    }
}

fn check_profile_tightness(
    sys: &SystemDescription,
    proj: &ProjectionFamily,
    alpha: f64,
    w: &WindowSpec,
) -> Result<(), TestCaseError> {
    let profile = minimal_ned_profile(sys, proj, alpha, w).unwrap();
    prop_assert!(profile.is_nondecreasing());
    let cert = DichotomyCertificate::Ned { alpha, profile: profile.clone() };
    prop_assert!(verify_certificate(sys, proj, &cert, w).unwrap().holds());
    let lowered = NedProfile {
        start: profile.start,
        values: profile.values.iter().map(|v| *v * LogScalar::from_f64(0.999)).collect(),
    };
    let cert = DichotomyCertificate::Ned { alpha, profile: lowered };
    prop_assert!(!verify_certificate(sys, proj, &cert, w).unwrap().holds());
    // Lowering a single value where the profile jumps is already enough.
    for i in 0..profile.values.len() {
        let jump = i == 0 || profile.values[i].log_ratio(profile.values[i - 1]) > 2e-3;
        if !jump {
            continue;
        }
        let mut values = profile.values.clone();
        values[i] = values[i] * LogScalar::from_f64(0.999);
        let cert = DichotomyCertificate::Ned {
            alpha,
            profile: NedProfile { start: profile.start, values },
        };
        prop_assert!(!verify_certificate(sys, proj, &cert, w).unwrap().holds(), "index {}", i);
    }
    Ok(())
}

#[test]
fn ned_example_profile_is_tight() {
    for params in [vec![], vec![("b", 0.8), ("c", 2.5)]] {
        let g = make_example(NED_EXAMPLE, &params).unwrap();
        let alpha = -g.param("b").unwrap().ln();
        check_profile_tightness(&g.system, &g.projection, alpha, &WindowSpec::new(0, 60).unwrap()).unwrap();
    }
    let g = make_example(SED_EXAMPLE, &[]).unwrap();
    check_profile_tightness(&g.system, &g.projection, 2.0, &WindowSpec::new(0, 60).unwrap()).unwrap();
}
