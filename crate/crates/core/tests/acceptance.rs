//! Acceptance criteria. One line per criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{naive_product, random_dense, random_dichotomic, rel_close};
use dichotomy::checkers::{
    alpha_scale, default_alpha_grid, default_beta_grid, optimal_n_for_alpha, scan_ed, verify_certificate,
    verify_triplet_form, DichotomyCertificate, DichotomyKind, NedProfile, Verdict, WindowSpec,
};
use dichotomy::datko::{datko_round_trip, DatkoVerdict};
use dichotomy::gallery::{
    make_example, GalleryEntry, GALLERY_NAMES, NED_EXAMPLE, NED_NOT_ED_EXAMPLE, SED_EXAMPLE, UED_EXAMPLE,
};
use dichotomy::logscalar::{Dd, LogScalar};
use dichotomy::system::evolution;
use dichotomy::witness::{falsify, Trend};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK_TOL: f64 = 1e-9;
const CONST_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-9;
const RUNTIME_LIMIT: Duration = Duration::from_secs(1);
const TAIL_RATIO_LIMIT: f64 = 1e-6;
const DATKO_WINDOW: usize = 60;
const DATKO_TRUNC: usize = 200;
const SPHERE_SAMPLES: usize = 10_000;
const SPHERE_SYSTEMS: u64 = 20;
const SPHERE_REL_TOL: f64 = 1e-6;
const CLOSED_FORM_HORIZON: usize = 30;
const CLOSED_FORM_TOL: f64 = 1e-9;
const COCYCLE_SYSTEMS: u64 = 50;
const COCYCLE_HORIZON: usize = 12;
const COCYCLE_TOL: f64 = 1e-9;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gallery(name: &str, params: &[(&str, f64)]) -> GalleryEntry {
    make_example(name, params).unwrap()
}

fn holds_with_slack(v: &Verdict, what: &str) -> Result<(), String> {
    match v {
        Verdict::Holds { min_slack, checked } => {
            ensure(*min_slack >= -SLACK_TOL, || format!("{what}: min slack {min_slack}"))?;
            ensure(*checked > 0, || format!("{what}: nothing checked"))
        }
        Verdict::Violated { witness } => Err(format!("{what}: violated at {witness:?}")),
    }
}

fn ned_example_profile(end: usize) -> NedProfile {
    NedProfile::from_fn(0, end, |n| LogScalar::from_f64(n as f64 + 2.0))
}

/// `e^{(n+1) + (n+1)·2^{n+1}}`; both summands are exact doubles, their sum
/// is kept as a double-double.
fn final_example_profile(end: usize) -> NedProfile {
    NedProfile::from_fn(0, end, |n| {
        let k = (n + 1) as f64;
        LogScalar::exp_dd(Dd::from_sum(k * 2f64.powi(n as i32 + 1), k))
    })
}

fn sed_point() -> GalleryEntry {
    gallery(SED_EXAMPLE, &[("c1", (-4f64).exp()), ("c2", 2f64.exp())])
}

fn ed_point() -> GalleryEntry {
    gallery(SED_EXAMPLE, &[("c1", (-1.5f64).exp()), ("c2", 0.5f64.exp())])
}

fn final_point() -> GalleryEntry {
    gallery(NED_NOT_ED_EXAMPLE, &[("c", (-1f64).exp())])
}

fn criterion_1() -> Check {
    let t = Instant::now();
    let g = gallery(UED_EXAMPLE, &[]);
    let w = WindowSpec::new(0, 200).unwrap();
    let v = verify_certificate(&g.system, &g.projection, &DichotomyCertificate::ued(1.0, 0.5), &w).unwrap();
    holds_with_slack(&v, "UED(1, 1/2)")?;
    let n = optimal_n_for_alpha(&g.system, &g.projection, 0.5, &w).unwrap();
    let elapsed = t.elapsed();
    ensure((n.to_f64() - 1.0).abs() <= CONST_TOL, || format!("optimal N = {n}"))?;
    ensure(elapsed < RUNTIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("N*(0.5) = {n}, {elapsed:.2?}"))
}

fn criterion_2() -> Check {
    let t = Instant::now();
    let g = gallery(NED_EXAMPLE, &[("b", 0.5), ("c", 1.0)]);
    let alpha = 2f64.ln();
    let cert = DichotomyCertificate::Ned {
        alpha,
        profile: ned_example_profile(200),
    };
    let v = verify_certificate(&g.system, &g.projection, &cert, &WindowSpec::new(0, 200).unwrap()).unwrap();
    holds_with_slack(&v, "NED(ln 2, n+2)")?;
    let (kind, schedule) = g.schedules().into_iter().next().ok_or("no schedule")?;
    ensure(kind == DichotomyKind::Ued && schedule.k_max == 50, || format!("{kind:?} {schedule:?}"))?;
    let report = falsify(&g.system, &g.projection, DichotomyKind::Ued, &schedule).unwrap();
    let elapsed = t.elapsed();
    ensure(report.trend == Trend::Divergent, || format!("trend {:?}", report.trend))?;
    ensure(report.witnesses.len() == 51, || format!("{} witnesses", report.witnesses.len()))?;
    let mut worst = 0f64;
    for w in &report.witnesses {
        let q = ((w.m - 1) / 2) as f64;
        ensure(w.m == w.n + 1 && w.n % 2 == 0, || format!("schedule point ({}, {})", w.m, w.n))?;
        let expected = schedule.alpha + (q + 1.0).ln();
        worst = worst.max((w.required_constant.ln_f64() - expected).abs());
    }
    ensure(worst <= WITNESS_TOL, || format!("witness log error {worst:e}"))?;
    ensure(elapsed < RUNTIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("51 witnesses, max log error {worst:.1e}, {elapsed:.2?}"))
}

fn criterion_3() -> Check {
    let g = sed_point();
    let cert = DichotomyCertificate::sed(LogScalar::exp(1.0), 2.0, 1.0);
    let v = verify_certificate(&g.system, &g.projection, &cert, &WindowSpec::new(0, 200).unwrap()).unwrap();
    holds_with_slack(&v, "SED(e, 2, 1)")?;
    let (_, schedule) = g.schedules().into_iter().next().ok_or("no schedule")?;
    let report = falsify(&g.system, &g.projection, DichotomyKind::Ued, &schedule).unwrap();
    ensure(report.trend == Trend::Divergent, || format!("trend {:?}", report.trend))?;
    let mut worst = 0f64;
    for w in &report.witnesses {
        let k = (w.n / 2) as f64;
        let expected = schedule.alpha + (-4.0) + (2.0 * k + 2.0);
        worst = worst.max((w.required_constant.ln_f64() - expected).abs());
    }
    ensure(worst <= WITNESS_TOL, || format!("witness log error {worst:e}"))?;
    Ok(format!("{} witnesses, max log error {worst:.1e}", report.witnesses.len()))
}

fn criterion_4() -> Check {
    let g = ed_point();
    let w = WindowSpec::new(0, 200).unwrap();
    let cert = DichotomyCertificate::ed(LogScalar::exp(1.0), 0.5, 1.0);
    holds_with_slack(&verify_certificate(&g.system, &g.projection, &cert, &w).unwrap(), "ED(e, 1/2, 1)")?;
    let scale = alpha_scale(&g.system, &g.projection, &w).unwrap();
    let (ag, bg) = (default_alpha_grid(scale), default_beta_grid(scale));
    ensure(ag.len() == 32 && bg.len() == 16, || format!("grid {}x{}", ag.len(), bg.len()))?;
    let scan = scan_ed(&g.system, &g.projection, &w, &ag, &bg, true).unwrap();
    let admissible = ag.iter().flat_map(|a| bg.iter().filter(move |b| *b < a)).count();
    ensure(scan.len() == admissible, || format!("{} of {admissible} pairs scanned", scan.len()))?;
    let stable: Vec<_> = scan.iter().filter(|e| e.stable).collect();
    ensure(stable.is_empty(), || format!("stable strong pairs: {stable:?}"))?;
    Ok(format!("{admissible} strong grid pairs, none stable"))
}

fn criterion_5() -> Check {
    let g = final_point();
    let cert = DichotomyCertificate::Ned {
        alpha: 1.0,
        profile: final_example_profile(25),
    };
    let v = verify_certificate(&g.system, &g.projection, &cert, &WindowSpec::new(0, 25).unwrap()).unwrap();
    holds_with_slack(&v, "NED(1, e^{(n+1)(1+2^{n+1})})")?;
    let schedules = g.schedules();
    ensure(schedules.len() == 3, || format!("{} schedules", schedules.len()))?;
    for (kind, s) in &schedules {
        ensure(*kind == DichotomyKind::Ed, || format!("{} targets {kind:?}", s.name))?;
        let r = falsify(&g.system, &g.projection, DichotomyKind::Ed, s).unwrap();
        ensure(r.trend == Trend::Divergent, || format!("{}: {:?}", s.name, r.trend))?;
    }
    Ok("profile verified, 3 case schedules divergent".into())
}

fn criterion_6() -> Check {
    let cases: Vec<(&str, GalleryEntry, DichotomyCertificate)> = vec![
        ("UED", gallery(UED_EXAMPLE, &[]), DichotomyCertificate::ued(1.0, 0.5)),
        (
            "NED",
            gallery(NED_EXAMPLE, &[("b", 0.5), ("c", 1.0)]),
            DichotomyCertificate::Ned {
                alpha: 2f64.ln(),
                profile: ned_example_profile(DATKO_TRUNC),
            },
        ),
        ("SED", sed_point(), DichotomyCertificate::sed(LogScalar::exp(1.0), 2.0, 1.0)),
        ("ED", ed_point(), DichotomyCertificate::ed(LogScalar::exp(1.0), 0.5, 1.0)),
        (
            "final NED",
            final_point(),
            DichotomyCertificate::Ned {
                alpha: 1.0,
                profile: final_example_profile(DATKO_TRUNC),
            },
        ),
    ];
    let w = WindowSpec::triplets(0, DATKO_WINDOW).unwrap();
    let mut worst_tail = 0f64;
    for (label, g, cert) in cases {
        let scan = datko_round_trip(&g.system, &g.projection, &cert, cert.alpha() / 2.0, &w, DATKO_TRUNC)
            .map_err(|e| format!("{label}: {e}"))?;
        ensure(scan.verdict == DatkoVerdict::Holds, || {
            format!("{label}: {:?} at {:?}", scan.verdict, scan.first_failure)
        })?;
        ensure(scan.max_tail_ratio < TAIL_RATIO_LIMIT, || {
            format!("{label}: tail ratio {:e}", scan.max_tail_ratio)
        })?;
        worst_tail = worst_tail.max(scan.max_tail_ratio);
    }
    Ok(format!("5 certificates hold, max tail/rhs {worst_tail:.1e}"))
}

/// Largest `(‖𝒜Px‖ + ‖Qx‖)/(‖Px‖ + ‖𝒜Qx‖)` found by sampling the unit sphere
/// and refining the best sample with shrinking random perturbations.
/// Lower bound on the sup of the mixed ratio from random unit vectors plus
/// local refinement. The ratio has a cusp along the ranges of `P` and `Q`,
/// so the projections of every candidate are evaluated as well.
fn sampled_ratio(a: &DMatrix<f64>, p: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let dim = a.nrows();
    let q = DMatrix::identity(dim, dim) - p;
    let flat = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
    let (fp, fq) = (flat(p), flat(&q));
    let ops = [flat(&(a * p)), fq.clone(), fp.clone(), flat(&(a * &q))];
    let mul = |m: &[f64], x: &[f64], out: &mut [f64]| {
        for (o, row) in out.iter_mut().zip(m.chunks(dim)) {
            *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
        }
    };
    let apply = |m: &[f64], x: &[f64]| -> f64 {
        m.chunks(dim)
            .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let f = |x: &[f64]| (apply(&ops[0], x) + apply(&ops[1], x)) / (apply(&ops[2], x) + apply(&ops[3], x));
    let ball = |rng: &mut ChaCha8Rng, x: &mut [f64]| loop {
        x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            x.iter_mut().for_each(|v| *v /= r);
            return;
        }
    };
    let mut best = vec![0.0; dim];
    let mut best_val = 0.0;
    let mut cand = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let offer = |cand: &[Vec<f64>; 3], best: &mut Vec<f64>, best_val: &mut f64| {
        let mut improved = false;
        for c in cand {
            let r = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < 1e-12 {
                continue;
            }
            let v = f(c);
            if v > *best_val {
                best.iter_mut().zip(c).for_each(|(b, x)| *b = x / r);
                *best_val = v;
                improved = true;
            }
        }
        improved
    };
    let project = |cand: &mut [Vec<f64>; 3]| {
        let [x, px, qx] = cand;
        mul(&fp, x, px);
        mul(&fq, x, qx);
    };
    for _ in 0..SPHERE_SAMPLES {
        ball(rng, &mut cand[0]);
        project(&mut cand);
        offer(&cand, &mut best, &mut best_val);
    }
    let mut h = 0.1;
    while h > 1e-13 {
        let mut improved = false;
        for _ in 0..60 {
            ball(rng, &mut cand[0]);
            cand[0].iter_mut().zip(&best).for_each(|(v, b)| *v = b + *v * h);
            project(&mut cand);
            improved |= offer(&cand, &mut best, &mut best_val);
        }
        if !improved {
            h *= 0.5;
        }
    }
    best_val
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let horizon = 6;
    let w = WindowSpec::new(0, horizon).unwrap();
    let mut worst = 0f64;
    let mut verdicts = 0;
    for seed in 0..SPHERE_SYSTEMS {
        let dim = 2 + (seed as usize % 3);
        let rs = random_dichotomic(1000 + seed, dim, horizon);
        let p = rs.proj.at(0).unwrap().matrix();
        let mut ratios = Vec::new();
        for n in 0..=horizon {
            for m in n..=horizon {
                let a = naive_product(&rs.matrices, m, n);
                ratios.push((m - n, sampled_ratio(&a, &p, &mut rng)));
            }
        }
        for alpha in [0.05, 0.4, 1.5] {
            let sampled = ratios
                .iter()
                .map(|&(s, r)| (alpha * s as f64).exp() * r)
                .fold(1.0f64, f64::max);
            let reduced = optimal_n_for_alpha(&rs.sys, &rs.proj, alpha, &w).unwrap().to_f64();
            let rel = (sampled - reduced).abs() / reduced;
            ensure(rel <= SPHERE_REL_TOL, || {
                format!("seed {seed} dim {dim} alpha {alpha}: sampled {sampled} vs reduced {reduced}")
            })?;
            worst = worst.max(rel);
            for (factor, expect) in [(1.0 + 1e-3, true), (1.0 - 1e-3, false)] {
                if reduced * factor < 1.0 {
                    continue;
                }
                let cert = DichotomyCertificate::ued(reduced * factor, alpha);
                let got = verify_certificate(&rs.sys, &rs.proj, &cert, &w).unwrap().holds();
                let sampled_holds = sampled <= reduced * factor;
                ensure(got == expect && sampled_holds == expect, || {
                    format!("seed {seed}: verdict {got}, sampling {sampled_holds}, expected {expect}")
                })?;
                verdicts += 1;
            }
        }
    }
    Ok(format!("{verdicts} verdicts agree, max relative gap {worst:.1e}"))
}

fn criterion_8() -> Check {
    let entries = vec![
        gallery(UED_EXAMPLE, &[]),
        gallery(NED_EXAMPLE, &[]),
        gallery(NED_EXAMPLE, &[("b", 0.8), ("c", 2.5)]),
        sed_point(),
        ed_point(),
        final_point(),
        gallery(NED_NOT_ED_EXAMPLE, &[("c", 3.0)]),
    ];
    let mut checked = 0;
    for g in &entries {
        for n in 0..=CLOSED_FORM_HORIZON {
            for m in n..=CLOSED_FORM_HORIZON {
                let want = g.closed_form_evolution(m, n).unwrap();
                let op = evolution(&g.system, m, n).unwrap();
                for (i, w) in want.iter().enumerate() {
                    let got = op.entry(i, i);
                    ensure(got.sign() == w.sign() && got.log_close(*w, CLOSED_FORM_TOL), || {
                        format!("{} {:?} ({m}, {n})[{i}]: {got} vs {w}", g.name, g.params)
                    })?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} products match over {} entries", entries.len()))
}

fn criterion_9() -> Check {
    let mut premises = [0usize; 3];
    let mut triplet_checks = 0;
    for name in GALLERY_NAMES {
        let g = gallery(name, &[]);
        let h = if name == NED_NOT_ED_EXAMPLE { 16 } else { 30 };
        let w = WindowSpec::new(0, h).unwrap();
        let wt = WindowSpec::triplets(0, h.min(16)).unwrap();
        let holds = |c: &DichotomyCertificate| verify_certificate(&g.system, &g.projection, c, &w).unwrap().holds();
        for ln_n in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let n_const = LogScalar::exp(ln_n);
            for alpha in [0.1, 0.3, 0.5, 2f64.ln(), 1.0, 1.5, 2.0, 2.5] {
                let ued = DichotomyCertificate::Ued { n_const, alpha };
                if holds(&ued) {
                    premises[0] += 1;
                    for weaker in [ued.as_ned(h), ued.as_ed(), ued.as_sed()] {
                        let weaker = weaker.unwrap();
                        ensure(holds(&weaker), || format!("{name}: {ued:?} holds but {weaker:?} fails"))?;
                    }
                }
                for beta_frac in [0.0, 0.25, 0.5, 1.0, 1.5] {
                    let beta = beta_frac * alpha;
                    if beta < alpha {
                        let sed = DichotomyCertificate::sed(n_const, alpha, beta);
                        if holds(&sed) {
                            premises[1] += 1;
                            let ed = sed.as_ed().unwrap();
                            ensure(holds(&ed), || format!("{name}: {sed:?} holds but {ed:?} fails"))?;
                        }
                    }
                    let ed = DichotomyCertificate::ed(n_const, alpha, beta);
                    let ned = DichotomyCertificate::Ned {
                        alpha,
                        profile: NedProfile::from_fn(0, h, |k| n_const.scale_exp(beta * k as f64)),
                    };
                    let ed_holds = holds(&ed);
                    premises[2] += ed_holds as usize;
                    ensure(ed_holds == holds(&ned), || format!("{name}: ED/NED disagree for {ed:?}"))?;

                    let pair = verify_certificate(&g.system, &g.projection, &ed, &WindowSpec::new(0, wt.m_max).unwrap())
                        .unwrap()
                        .holds();
                    let trip = verify_triplet_form(&g.system, &g.projection, &ed, &wt).unwrap().holds();
                    ensure(pair == trip, || format!("{name}: pair {pair} vs triplet {trip} for {ed:?}"))?;
                    triplet_checks += 1;
                }
            }
        }
    }
    ensure(premises.iter().all(|&p| p > 0), || format!("vacuous implications {premises:?}"))?;
    Ok(format!(
        "implications exercised {premises:?} (UED, SED, ED), {triplet_checks} pair/triplet checks"
    ))
}

fn criterion_10() -> Check {
    let mut checked = 0;
    for seed in 0..COCYCLE_SYSTEMS {
        let dim = 2 + (seed as usize % 3);
        let (sys, mats) = random_dense(seed, dim, COCYCLE_HORIZON);
        for n in 0..=COCYCLE_HORIZON {
            for k in n..=COCYCLE_HORIZON {
                let left = evolution(&sys, k, n).unwrap();
                for m in k..=COCYCLE_HORIZON {
                    let full = evolution(&sys, m, n).unwrap().to_dense();
                    let split = evolution(&sys, m, k).unwrap().compose(&left).to_dense();
                    ensure(rel_close(&full, &split, COCYCLE_TOL), || format!("seed {seed}: ({m},{k},{n})"))?;
                    ensure(rel_close(&full, &naive_product(&mats, m, n), COCYCLE_TOL), || {
                        format!("seed {seed}: product ({m},{n})")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} index triples on {COCYCLE_SYSTEMS} systems"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1 uniform example certificate and optimal constant", criterion_1),
        ("2 nonuniform example profile and uniform witnesses", criterion_2),
        ("3 strong example certificate and uniform witnesses", criterion_3),
        ("4 exponential example, no stable strong certificate", criterion_4),
        ("5 final example profile and case witnesses", criterion_5),
        ("6 summation round trip", criterion_6),
        ("7 mediant reduction vs sphere sampling", criterion_7),
        ("8 closed-form products", criterion_8),
        ("9 implication lattice and pair/triplet forms", criterion_9),
        ("10 cocycle property", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let dt = t.elapsed();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{dt:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{dt:.2?}]");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
