//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use mshlab_core::analysis::{check_restriction, classify_msh, radial_extremal, Slack};
use mshlab_core::capacity::{polarity_indicator, radial_calibration, PolarityVerdict};
use mshlab_core::checks::{
    capacity_properties_noise, check_capacity_properties, check_comparison, check_convergence, check_theorem1,
    comparison_noise, comparison_pair, convergence_noise, glued_max, theorem1_corpus, theorem1_noise,
};
use mshlab_core::config::sample_spec;
use mshlab_core::corpus::{corpus, random_hermitian_quadratic, FunctionSpec};
use mshlab_core::envelope::{maximality_residual, profile_error, solve_pmeasure, EnvelopeConfig, PMeasureResult};
use mshlab_core::grid::{build_domain, DomainSpec, GridDomain, GridFunction, NodeClass, NodeMask, SetSpec};
use mshlab_core::hessian::{elementary_symmetric, hessian_density, mixed_hessian_density};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: usize, ok: bool, detail: String) {
    println!("criterion {criterion}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn ball(n: usize, res: usize, radius: f64) -> Arc<GridDomain> {
    Arc::new(build_domain(&DomainSpec::Ball { radius }, n, res).unwrap())
}

fn norm2(n: usize) -> FunctionSpec {
    FunctionSpec::HermitianQuadratic { diag: vec![1.0; n], offdiag: vec![[0.0, 0.0]; n * (n - 1) / 2], constant: 0.0 }
}

#[test]
fn criterion_01_normalization() {
    let _g = serial();
    let dom = Arc::new(build_domain(&DomainSpec::Box { lo: -1.0, hi: 1.0 }, 2, 33).unwrap());
    let u = sample_spec(&norm2(2), &dom).unwrap();
    let start = Instant::now();
    let d1 = hessian_density(&u, 1).unwrap();
    let d2 = hessian_density(&u, 2).unwrap();
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    let mut nodes = 0;
    for p in dom.interior_indices() {
        worst = worst.max((d1.density()[p] - 2.0).abs()).max((d2.density()[p] - 2.0).abs());
        nodes += 1;
    }
    let ok = worst <= 1e-10 && nodes > 0 && elapsed < Duration::from_secs(1);
    report(1, ok, format!("max |density - 2| = {worst:.2e} over {nodes} nodes, {elapsed:.2?}"));
}

fn subset_sum(lambda: &[f64], k: usize) -> (f64, f64) {
    let n = lambda.len();
    let mut sum = 0.0;
    let mut scale = 0.0;
    for bits in 0u32..(1 << n) {
        if bits.count_ones() as usize != k {
            continue;
        }
        let prod: f64 = (0..n).filter(|j| bits & (1 << j) != 0).map(|j| lambda[j]).product();
        sum += prod;
        scale += prod.abs();
    }
    (sum, scale)
}

#[test]
fn criterion_02_sigma_oracle() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4);
        let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for k in 0..=n {
            let fast = elementary_symmetric(&lambda, k).unwrap();
            let (slow, scale) = subset_sum(&lambda, k);
            // relative to the size of the summands, the conditioning of the sum
            let rel = (fast - slow).abs() / scale.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    report(2, ok, format!("max relative gap {worst:.2e}, {elapsed:.2?}"));
}

#[test]
fn criterion_03_polarization() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut diag_gap: f64 = 0.0;
    let mut perm_gap: f64 = 0.0;
    for case in 0..50 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let dom = ball(n, 9, 1.0);
        let fs: Vec<GridFunction> =
            (0..n).map(|_| sample_spec(&random_hermitian_quadratic(&mut rng, n), &dom).unwrap()).collect();
        let same = mixed_hessian_density(&vec![fs[0].clone(); n], n).unwrap();
        let direct = hessian_density(&fs[0], n).unwrap();
        let mut reversed = fs.clone();
        reversed.reverse();
        let mut rotated = fs.clone();
        rotated.rotate_left(1);
        let base = mixed_hessian_density(&fs, n).unwrap();
        let rev = mixed_hessian_density(&reversed, n).unwrap();
        let rot = mixed_hessian_density(&rotated, n).unwrap();
        for p in dom.interior_indices() {
            diag_gap = diag_gap.max((same.density()[p] - direct.density()[p]).abs());
            perm_gap = perm_gap
                .max((base.density()[p] - rev.density()[p]).abs())
                .max((base.density()[p] - rot.density()[p]).abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = diag_gap <= 1e-10 && perm_gap <= 1e-10 && elapsed < Duration::from_secs(30);
    report(3, ok, format!("diagonal gap {diag_gap:.2e}, permutation gap {perm_gap:.2e}, {elapsed:.2?}"));
}

/// Radial envelopes for `B̄_½ ⊂ B_1 ⊂ ℂ²`, computed once per (m, resolution).
fn radial_envelope(m: usize, res: usize) -> (Arc<PMeasureResult>, Duration) {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), (Arc<PMeasureResult>, Duration)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(m, res)) {
        return hit.clone();
    }
    let dom = ball(2, res, 1.0);
    let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.5);
    let start = Instant::now();
    let out = Arc::new(solve_pmeasure(&dom, &k, &EnvelopeConfig::new(m)).unwrap());
    let entry = (out, start.elapsed());
    cache.lock().unwrap().insert((m, res), entry.clone());
    entry
}

const BAND: (f64, f64) = (2.0 / 3.0, 5.0 / 6.0);

#[test]
fn criterion_04_radial_m_less_than_n() {
    let _g = serial();
    let prof = radial_extremal(2, 1, 0.5, 1.0).unwrap();
    let (coarse, t21) = radial_envelope(1, 21);
    let (fine, t31) = radial_envelope(1, 31);
    let e21 = profile_error(&coarse.omega, &prof, BAND);
    let e31 = profile_error(&fine.omega, &prof, BAND);
    let ok = coarse.stalled && fine.stalled && e21 <= 0.05 && e31 < e21 && t21 + t31 <= Duration::from_secs(300);
    report(4, ok, format!("error {e21:.4} at 21, {e31:.4} at 31 on {BAND:.3?}, {:.1?}", t21 + t31));
}

#[test]
fn criterion_05_radial_m_equals_n() {
    let _g = serial();
    let prof = radial_extremal(2, 2, 0.5, 1.0).unwrap();
    let (res, t) = radial_envelope(2, 21);
    let e = profile_error(&res.omega, &prof, BAND);
    let ok = res.stalled && e <= 0.07 && t <= Duration::from_secs(600);
    report(5, ok, format!("error {e:.4} at 21 on {BAND:.3?}, {t:.1?}"));
}

#[test]
fn criterion_06_maximality() {
    let _g = serial();
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [1, 2] {
        let r21 = maximality_residual(&radial_envelope(m, 21).0.omega, m).unwrap();
        let r31 = maximality_residual(&radial_envelope(m, 31).0.omega, m).unwrap();
        let factor = r21 / r31;
        ok &= factor >= 1.5;
        detail.push(format!("m={m}: {r21:.4} -> {r31:.4} ({factor:.2}x)"));
    }
    report(6, ok, detail.join(", "));
}

#[test]
fn criterion_07_capacity_calibration() {
    let _g = serial();
    let r = (-1.0f64).exp();
    let start = Instant::now();
    let (c65, exact) = radial_calibration(1, 1, r, 1.0, 65).unwrap();
    let (c129, _) = radial_calibration(1, 1, r, 1.0, 129).unwrap();
    let elapsed = start.elapsed();
    let e65 = (c65 - exact).abs() / exact;
    let e129 = (c129 - exact).abs() / exact;
    let ok = (exact - PI / 2.0).abs() < 1e-12 && e129 <= 0.1 && e129 < e65 && elapsed <= Duration::from_secs(60);
    report(7, ok, format!("C = {c129:.4} vs {exact:.4} ({:.2}%), 65: {:.2}%, {elapsed:.2?}", 100.0 * e129, 100.0 * e65));
}

#[test]
fn criterion_08_capacity_inequalities() {
    let _g = serial();
    let mut failures = Vec::new();
    let mut count = 0;
    for m in [1, 2] {
        let noise = capacity_properties_noise(2, m, (17, 21)).unwrap();
        for o in check_capacity_properties(2, m, 21, noise).unwrap() {
            count += 1;
            println!("  m={m} {} lhs={:.4} rhs={:.4} allowance={:.4} passed={}", o.name, o.lhs, o.rhs, o.noise, o.passed);
            if !o.passed {
                failures.push(format!("m={m} {}", o.name));
            }
        }
    }
    report(8, failures.is_empty() && count > 0, format!("{count} checks, failures: {failures:?}"));
}

#[test]
fn criterion_09_comparison() {
    let _g = serial();
    let noise = comparison_noise(2, 2, (11, 21)).unwrap();
    let dom = ball(2, 21, 1.0);
    let (u, v) = comparison_pair(&dom).unwrap();
    let out = check_comparison(&u, &v, 2, noise).unwrap();
    let ratio = out.rhs / out.lhs;
    let ok = out.passed && (ratio - 4.0).abs() <= 0.2;
    report(9, ok, format!("mass(u) = {:.4}, mass(v) = {:.4}, ratio {ratio:.6}", out.rhs, out.lhs));
}

#[test]
fn criterion_10_integral_estimate() {
    let _g = serial();
    let noise = theorem1_noise(2, 2, 0.8, (9, 17)).unwrap();
    let dom = ball(2, 17, 1.0);
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let cases = theorem1_corpus(2, 2, 10, 10);
    for specs in &cases {
        let us: Vec<GridFunction> = specs.iter().map(|s| sample_spec(s, &dom).unwrap()).collect();
        let out = check_theorem1(&us, 0.8, 2, noise).unwrap();
        ok &= out.passed && out.margin > 0.0;
        worst = worst.min(out.margin);
    }
    let zero = GridFunction::constant(dom.clone(), 0.0).unwrap();
    let u = sample_spec(&norm2(2), &dom).unwrap();
    let degenerate = check_theorem1(&[zero, u], 0.8, 2, noise).unwrap();
    ok &= degenerate.passed && degenerate.margin == 0.0;
    report(
        10,
        ok,
        format!("{} cases, smallest margin {worst:.4}, degenerate margin {}", cases.len(), degenerate.margin),
    );
}

#[test]
fn criterion_11_convergence() {
    let _g = serial();
    let spec = glued_max(2);
    let k_set = SetSpec::Ball { center: vec![0.0; 4], radius: 0.85 };
    let noise = convergence_noise(&spec, 2, 1, &DomainSpec::Ball { radius: 2.0 }, &k_set, (17, 33)).unwrap();
    let dom = ball(2, 33, 2.0);
    let u = sample_spec(&spec, &dom).unwrap();
    let k = k_set.mask(&dom).unwrap();
    let h = dom.h();
    let out = check_convergence(&u, 1, &[8.0 * h, 4.0 * h, 2.0 * h], &k, noise).unwrap();
    let masses: Vec<f64> = (0..3).map(|j| out.context.details[&format!("mass_{j}")]).collect();
    report(
        11,
        out.passed,
        format!(
            "mass {:.6}, mollified {masses:.6?}, final gap {:.2e}, noise {noise:.2e}",
            out.context.details["mass"], out.lhs
        ),
    );
}

#[test]
fn criterion_12_polarity() {
    let _g = serial();
    let domain = DomainSpec::Ball { radius: 1.0 };
    let cfg = EnvelopeConfig::new(1).with_warm_start(true);
    let point = polarity_indicator(&SetSpec::Point { at: vec![0.0; 4] }, &domain, 2, &cfg, &[1, 0], &[1, 0], &[9, 29, 89])
        .unwrap();
    let fat = polarity_indicator(
        &SetSpec::Ball { center: vec![0.0; 4], radius: 0.5 },
        &domain,
        2,
        &cfg,
        &[1, 0],
        &[1, 0],
        &[17, 25, 33],
    )
    .unwrap();
    let ok = point.verdict == PolarityVerdict::PolarTrend && fat.verdict == PolarityVerdict::NonPolar;
    report(
        12,
        ok,
        format!("point {:?} {:.3?}, fat ball {:?} {:.4?}", point.verdict, point.values, fat.verdict, fat.values),
    );
}

#[test]
fn criterion_13_filtration_and_restriction() {
    let _g = serial();
    let dom = ball(2, 17, 1.0);
    let mut mismatches = Vec::new();
    let mut restricted = 0;
    for member in corpus() {
        let u = sample_spec(&member.function, &dom).unwrap();
        let got = classify_msh(&u, Slack::Default).unwrap().largest_m;
        if got != member.expected_largest_m {
            mismatches.push(format!("{} {got} != {}", member.id, member.expected_largest_m));
        }
        if member.expected_largest_m >= 2 {
            restricted += 1;
            if !check_restriction(&u, 2, Slack::Default).unwrap() {
                mismatches.push(format!("{} restriction", member.id));
            }
        }
    }
    assert!(dom.interior_indices().iter().all(|&p| dom.class(p) == NodeClass::Interior));
    report(13, mismatches.is_empty(), format!("12 members, {restricted} restrictions, problems: {mismatches:?}"));
}
