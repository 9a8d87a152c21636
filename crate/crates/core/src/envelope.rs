//! Relative extremal functions `ω*(·, E, D)` by an ascending obstacle
//! iteration, with regular-point and maximality diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::RadialProfile;
use crate::error::{MshError, Result};
use crate::grid::{GridDomain, GridFunction, NodeClass, NodeMask};
use crate::hessian::{density_of, eigenvalues_array, HermitianMatrix, HessianStencil, JACOBI_TOL};
use crate::multigrid::harmonic_subsolution;

/// Stall threshold on the sup-norm of one sweep's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StallTolerance {
    Absolute(f64),
    /// `c·h⁴`, which keeps the algebraic error at the discretization level.
    PerH4(f64),
}

impl StallTolerance {
    pub fn value(&self, h: f64) -> f64 {
        match *self {
            StallTolerance::Absolute(t) => t,
            StallTolerance::PerH4(c) => c * h.powi(4),
        }
    }
}

impl Default for StallTolerance {
    fn default() -> Self {
        StallTolerance::PerH4(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepSchedule {
    /// Every node is updated from the previous iterate.
    #[default]
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub m: usize,
    pub max_iters: usize,
    #[serde(default)]
    pub tol: StallTolerance,
    #[serde(default)]
    pub sweep: SweepSchedule,
    /// For `m = 1`, start from a multigrid solve of the linear problem
    /// lowered to a certified subsolution.
    #[serde(default)]
    pub linear_warm_start: bool,
}

impl EnvelopeConfig {
    pub fn new(m: usize) -> Self {
        EnvelopeConfig {
            m,
            max_iters: 20_000,
            tol: StallTolerance::default(),
            sweep: SweepSchedule::Simultaneous,
            linear_warm_start: false,
        }
    }

    pub fn with_tol(mut self, tol: StallTolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_warm_start(mut self, on: bool) -> Self {
        self.linear_warm_start = on;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m > n {
            return Err(MshError::Order { order: self.m, lo: 1, hi: n });
        }
        if self.max_iters == 0 {
            return Err(MshError::Precondition("max_iters must be at least 1".into()));
        }
        let t = match self.tol {
            StallTolerance::Absolute(t) | StallTolerance::PerH4(t) => t,
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(MshError::Precondition("stall tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PMeasureResult {
    pub omega: GridFunction,
    pub e: NodeMask,
    pub m: usize,
    pub iterations: usize,
    pub stalled: bool,
    /// Last sweep's sup-norm update.
    pub last_update: f64,
    pub tol: f64,
    pub max_residual: f64,
    pub obstacle_active: NodeMask,
    pub warm_start_iterations: Option<usize>,
}

/// JSON sidecar for a [`PMeasureResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PMeasureSummary {
    pub m: usize,
    pub h: f64,
    pub iterations: usize,
    pub stalled: bool,
    pub last_update: f64,
    pub tol: f64,
    pub max_residual: f64,
    pub warm_start_iterations: Option<usize>,
    pub e_nodes: Vec<usize>,
    pub obstacle_active: Vec<usize>,
}

impl PMeasureResult {
    pub fn summary(&self) -> PMeasureSummary {
        PMeasureSummary {
            m: self.m,
            h: self.omega.domain().h(),
            iterations: self.iterations,
            stalled: self.stalled,
            last_update: self.last_update,
            tol: self.tol,
            max_residual: self.max_residual,
            warm_start_iterations: self.warm_start_iterations,
            e_nodes: self.e.indices(),
            obstacle_active: self.obstacle_active.indices(),
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Largest `t` with `λ(A) − t·1` in the closed cone Γ_m: the smallest root
/// of `t ↦ e_m(λ − t·1)`.
pub fn gamma_exit(a: &HermitianMatrix, m: usize) -> Result<f64> {
    let n = a.n();
    match m {
        1 => Ok(a.trace() / n as f64),
        2 => {
            let e1 = a.principal_minor_sum(1);
            let e2 = a.principal_minor_sum(2);
            let nm1 = (n - 1) as f64;
            let c2 = binom(n, 2);
            let disc = (nm1 * nm1 * e1 * e1 - 4.0 * c2 * e2).max(0.0);
            Ok((nm1 * e1 - disc.sqrt()) / (2.0 * c2))
        }
        3 => Ok(eigenvalues_array(a, JACOBI_TOL)?[0]),
        _ => Err(MshError::Order { order: m, lo: 1, hi: n }),
    }
}

fn validate_e(dom: &Arc<GridDomain>, e: &NodeMask) -> Result<()> {
    if !GridDomain::same_grid(dom, e.domain()) {
        return Err(MshError::DomainMismatch);
    }
    if let Some(node) = e.clearance_violation() {
        return Err(MshError::Clearance { node });
    }
    Ok(())
}

pub fn solve_pmeasure(dom: &Arc<GridDomain>, e: &NodeMask, cfg: &EnvelopeConfig) -> Result<PMeasureResult> {
    solve_pmeasure_observed(dom, e, cfg, |_, _| {})
}

/// As [`solve_pmeasure`], calling `observe(iteration, values)` after the
/// initial state and after every sweep.
pub fn solve_pmeasure_observed(
    dom: &Arc<GridDomain>,
    e: &NodeMask,
    cfg: &EnvelopeConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<PMeasureResult> {
    cfg.validate(dom.n())?;
    validate_e(dom, e)?;
    let len = dom.len();
    let tol = cfg.tol.value(dom.h());
    let mut vals = vec![f64::NAN; len];
    let mut free_nodes = Vec::new();
    for (p, v) in vals.iter_mut().enumerate() {
        match dom.class(p) {
            NodeClass::Outside => {}
            NodeClass::Boundary => *v = 0.0,
            NodeClass::Interior => {
                *v = -1.0;
                if !e.contains(p) {
                    free_nodes.push(p);
                }
            }
        }
    }

    if e.is_empty() {
        for &p in &free_nodes {
            vals[p] = 0.0;
        }
        observe(0, &vals);
        let omega = GridFunction::new(dom.clone(), vals)?;
        return Ok(PMeasureResult {
            omega,
            e: e.clone(),
            m: cfg.m,
            iterations: 0,
            stalled: true,
            last_update: 0.0,
            tol,
            max_residual: 0.0,
            obstacle_active: NodeMask::empty(dom.clone()),
            warm_start_iterations: None,
        });
    }

    let mut warm = None;
    if cfg.linear_warm_start && cfg.m == 1 {
        let mut free = vec![false; len];
        for &p in &free_nodes {
            free[p] = true;
        }
        warm = Some(harmonic_subsolution(dom, free, &mut vals));
    }
    observe(0, &vals);

    let stencil = HessianStencil::new(dom);
    let h2 = dom.h() * dom.h();
    let mut next = vals.clone();
    let mut iterations = 0;
    let mut stalled = false;
    let mut last_update = f64::INFINITY;
    while iterations < cfg.max_iters {
        let mut sup: f64 = 0.0;
        for &p in &free_nodes {
            let a0 = stencil.matrix_without_center(&vals, p);
            let cand = (h2 * gamma_exit(&a0, cfg.m)?).min(0.0);
            let old = vals[p];
            let v = old.max(cand);
            next[p] = v;
            sup = sup.max(v - old);
        }
        std::mem::swap(&mut vals, &mut next);
        iterations += 1;
        last_update = sup;
        observe(iterations, &vals);
        if sup < tol {
            stalled = true;
            break;
        }
    }
    drop(next);

    let omega = GridFunction::new(dom.clone(), vals)?;
    let obstacle_active = active_set(&omega);
    let max_residual = residual_off(&omega, &obstacle_active, cfg.m)?;
    Ok(PMeasureResult {
        omega,
        e: e.clone(),
        m: cfg.m,
        iterations,
        stalled,
        last_update,
        tol,
        max_residual,
        obstacle_active,
        warm_start_iterations: warm,
    })
}

fn active_set(omega: &GridFunction) -> NodeMask {
    let dom = omega.domain().clone();
    let members = (0..dom.len())
        .map(|p| dom.class(p) == NodeClass::Interior && omega.value(p) <= -1.0)
        .collect();
    NodeMask::from_members(dom, members).expect("lengths agree")
}

fn residual_off(omega: &GridFunction, active: &NodeMask, m: usize) -> Result<f64> {
    let dom = omega.domain();
    if m == 0 || m > dom.n() {
        return Err(MshError::Order { order: m, lo: 1, hi: dom.n() });
    }
    let collar = active.dilate(1);
    let stencil = HessianStencil::new(dom);
    let mut worst: f64 = 0.0;
    for p in 0..dom.len() {
        if dom.class(p) != NodeClass::Interior || collar.contains(p) {
            continue;
        }
        let a = stencil.matrix(omega.values(), p, omega.value(p));
        worst = worst.max(density_of(&a, m)?.abs());
    }
    Ok(worst)
}

/// Largest `|density of order m|` of `omega` over interior nodes at ℓ∞
/// distance ≥ 2 from the set where `omega ≤ −1`.
pub fn maximality_residual(omega: &GridFunction, m: usize) -> Result<f64> {
    residual_off(omega, &active_set(omega), m)
}

/// `ω*` at each node of `k`, estimated as the mean of `ω` over the punctured
/// axis neighbourhood; a node is regular when that mean is `≤ −1 + tol`.
pub fn regular_points(k: &NodeMask, result: &PMeasureResult, tol: f64) -> Result<NodeMask> {
    let dom = result.omega.domain();
    if !GridDomain::same_grid(dom, k.domain()) {
        return Err(MshError::DomainMismatch);
    }
    let mut out = NodeMask::empty(dom.clone());
    let d = dom.real_dim() as f64;
    for p in k.indices() {
        if dom.class(p) != NodeClass::Interior {
            continue;
        }
        let sum: f64 = dom
            .strides()
            .iter()
            .map(|&s| result.omega.value(p + s) + result.omega.value(p - s))
            .sum();
        if sum / (2.0 * d) <= -1.0 + tol {
            out.insert(p);
        }
    }
    Ok(out)
}

/// Fixed-resolution upper regularization: `value` is the input, and
/// `exceedance` marks nodes where the neighbourhood supremum on the finest
/// supplied grid exceeds the input by more than `tol`.
#[derive(Debug, Clone)]
pub struct UpperRegularization {
    pub value: GridFunction,
    pub limsup: Vec<f64>,
    pub exceedance: NodeMask,
}

/// `refinements` are nested finer samplings of the same function; with none
/// supplied, the input grid itself is used.
pub fn upper_regularize(u: &GridFunction, refinements: &[GridFunction], tol: f64) -> Result<UpperRegularization> {
    let dom = u.domain();
    let finest = refinements.last().unwrap_or(u);
    let fdom = finest.domain();
    if fdom.n() != dom.n() {
        return Err(MshError::DomainMismatch);
    }
    let ratio = dom.h() / fdom.h();
    let mut limsup = vec![f64::NAN; dom.len()];
    let mut exceed = NodeMask::empty(dom.clone());
    let d = dom.real_dim();
    let mut fidx = vec![0usize; d];
    for p in 0..dom.len() {
        if dom.class(p) != NodeClass::Interior {
            continue;
        }
        let x = dom.coords(p);
        for a in 0..d {
            let t = (x[a] - fdom.origin()[a]) / fdom.h();
            let i = t.round();
            if (t - i).abs() > 1e-6 * ratio.max(1.0) || i < 1.0 || i as usize + 1 >= fdom.dims()[a] {
                return Err(MshError::NotGridAligned);
            }
            fidx[a] = i as usize;
        }
        let centre = fdom.linear_index(&fidx);
        let mut sup = f64::NEG_INFINITY;
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let mut q = centre as isize;
            for &s in fdom.strides() {
                q += ((c % 3) as isize - 1) * s as isize;
                c /= 3;
            }
            let v = finest.value(q as usize);
            if !v.is_nan() {
                sup = sup.max(v);
            }
        }
        limsup[p] = sup;
        if sup - u.value(p) > tol {
            exceed.insert(p);
        }
    }
    Ok(UpperRegularization { value: u.clone(), limsup, exceedance: exceed })
}

/// Sup-norm gap between `omega` and a radial profile over interior nodes
/// with `band.0 ≤ |z| ≤ band.1`.
pub fn profile_error(omega: &GridFunction, profile: &RadialProfile, band: (f64, f64)) -> f64 {
    let dom = omega.domain();
    let mut worst: f64 = 0.0;
    for p in dom.interior_indices() {
        let t = dom.norm_sq(p).sqrt();
        if t >= band.0 && t <= band.1 {
            worst = worst.max((omega.value(p) - profile.eval(t)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::radial_extremal;
    use crate::grid::{build_domain, sample_function, DomainSpec};
    use crate::hessian::{elementary_symmetric, hermitian_eigenvalues, gamma_test};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn ball(n: usize, res: usize, radius: f64) -> Arc<GridDomain> {
        Arc::new(build_domain(&DomainSpec::Ball { radius }, n, res).unwrap())
    }

    fn bisect_exit(a: &HermitianMatrix, m: usize) -> f64 {
        // Γ_m exit along −1 by bisection on the eigenvalues
        let l = hermitian_eigenvalues(a, JACOBI_TOL).unwrap();
        let inside = |t: f64| {
            let s: Vec<f64> = l.iter().map(|v| v - t).collect();
            gamma_test(&s, m, 0.0).unwrap()
        };
        let mut lo = l[0] - 1.0;
        let mut hi = l[l.len() - 1] + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    proptest! {
        #[test]
        fn closed_form_exit_matches_bisection(
            n in 1usize..=3,
            vals in prop::collection::vec(-3.0f64..3.0, 9),
            m_pick in 0usize..3,
        ) {
            let m = 1 + m_pick % n;
            let off: Vec<Complex64> = (0..n * (n - 1) / 2).map(|i| Complex64::new(vals[n + 2 * i], vals[n + 2 * i + 1])).collect();
            let a = HermitianMatrix::new(&vals[..n], &off).unwrap();
            let t = gamma_exit(&a, m).unwrap();
            prop_assert!((t - bisect_exit(&a, m)).abs() < 1e-7);
            let l = hermitian_eigenvalues(&a.shift(-t), JACOBI_TOL).unwrap();
            prop_assert!(elementary_symmetric(&l, m).unwrap().abs() < 1e-8 * (1.0 + a.frobenius_norm().powi(m as i32)));
        }
    }

    #[test]
    fn trivial_obstacles() {
        let dom = ball(2, 11, 1.0);
        let cfg = EnvelopeConfig::new(1);
        let none = solve_pmeasure(&dom, &NodeMask::empty(dom.clone()), &cfg).unwrap();
        assert!(dom.interior_indices().iter().all(|&p| none.omega.value(p) == 0.0));
        assert_eq!(none.max_residual, 0.0);
        assert_eq!(maximality_residual(&none.omega, 1).unwrap(), 0.0);

        let all = NodeMask::clearance_zone(&dom);
        let res = solve_pmeasure(&dom, &all, &cfg).unwrap();
        for p in all.indices() {
            assert_eq!(res.omega.value(p), -1.0);
        }
        for p in 0..dom.len() {
            if dom.class(p) == NodeClass::Boundary {
                assert_eq!(res.omega.value(p), 0.0);
            }
        }
    }

    #[test]
    fn clearance_and_config_errors() {
        let dom = ball(2, 11, 1.0);
        let near = NodeMask::from_indices(dom.clone(), &[dom.linear_index(&[1, 5, 5, 5])]).unwrap();
        assert!(matches!(
            solve_pmeasure(&dom, &near, &EnvelopeConfig::new(1)),
            Err(MshError::Clearance { .. })
        ));
        let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.3);
        assert!(solve_pmeasure(&dom, &k, &EnvelopeConfig::new(3)).is_err());
        assert!(solve_pmeasure(&dom, &k, &EnvelopeConfig::new(1).with_max_iters(0)).is_err());
        assert!(solve_pmeasure(&dom, &k, &EnvelopeConfig::new(1).with_tol(StallTolerance::Absolute(0.0))).is_err());
    }

    #[test]
    fn iterates_ascend_and_stay_admissible() {
        let dom = ball(2, 13, 1.0);
        let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.5);
        for m in [1, 2] {
            let mut prev: Option<Vec<f64>> = None;
            let mut ok = true;
            let res = solve_pmeasure_observed(&dom, &k, &EnvelopeConfig::new(m), |_, v| {
                if let Some(pv) = &prev {
                    ok &= pv.iter().zip(v).all(|(a, b)| a.is_nan() || b >= a);
                }
                prev = Some(v.to_vec());
            })
            .unwrap();
            assert!(ok, "m={m}");
            assert!(res.stalled);
            let stencil = HessianStencil::new(&dom);
            for p in dom.interior_indices() {
                let w = res.omega.value(p);
                assert!((-1.0..=0.0).contains(&w));
                if k.contains(p) {
                    assert_eq!(w, -1.0);
                    continue;
                }
                let a = stencil.matrix(res.omega.values(), p, w);
                let l = hermitian_eigenvalues(&a, JACOBI_TOL).unwrap();
                assert!(gamma_test(&l, m, 10.0 * res.tol / (dom.h() * dom.h())).unwrap(), "m={m} p={p}");
            }
        }
    }

    #[test]
    fn radial_case_is_close_to_profile() {
        let dom = ball(2, 17, 1.0);
        let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.5);
        let res = solve_pmeasure(&dom, &k, &EnvelopeConfig::new(1)).unwrap();
        let prof = radial_extremal(2, 1, 0.5, 1.0).unwrap();
        assert!(profile_error(&res.omega, &prof, (2.0 / 3.0, 5.0 / 6.0)) < 0.08);
    }

    #[test]
    fn warm_start_agrees_with_plain_iteration() {
        let dom = ball(2, 17, 1.0);
        let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.3);
        let cfg = EnvelopeConfig::new(1).with_tol(StallTolerance::Absolute(1e-11));
        let plain = solve_pmeasure(&dom, &k, &cfg).unwrap();
        let warm = solve_pmeasure(&dom, &k, &cfg.clone().with_warm_start(true)).unwrap();
        assert!(plain.stalled && warm.stalled);
        assert!(warm.warm_start_iterations.is_some());
        assert!(warm.iterations < plain.iterations);
        for p in dom.interior_indices() {
            assert!((plain.omega.value(p) - warm.omega.value(p)).abs() < 1e-8);
        }
    }

    #[test]
    fn monotone_in_obstacle() {
        let dom = ball(2, 13, 1.0);
        let e1 = NodeMask::ball(dom.clone(), &[0.0; 4], 0.2);
        let e2 = NodeMask::ball(dom.clone(), &[0.0; 4], 0.4);
        for m in [1, 2] {
            let cfg = EnvelopeConfig::new(m);
            let a = solve_pmeasure(&dom, &e1, &cfg).unwrap();
            let b = solve_pmeasure(&dom, &e2, &cfg).unwrap();
            for p in dom.interior_indices() {
                assert!(a.omega.value(p) >= b.omega.value(p) - 2.0 * a.tol);
            }
        }
    }

    #[test]
    fn residual_of_norm_squared_is_n_factorial() {
        let dom = ball(2, 11, 1.0);
        let u = sample_function(|x| x.iter().map(|v| v * v).sum(), &dom).unwrap();
        assert!((maximality_residual(&u, 2).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn regular_points_of_fat_ball() {
        let dom = ball(2, 17, 1.0);
        let k = NodeMask::ball(dom.clone(), &[0.0; 4], 0.5);
        let res = solve_pmeasure(&dom, &k, &EnvelopeConfig::new(1)).unwrap();
        assert_eq!(regular_points(&k, &res, 0.4).unwrap().count(), k.count());
        let empty = NodeMask::empty(dom.clone());
        assert!(regular_points(&empty, &res, 0.4).unwrap().is_empty());
    }

    #[test]
    fn upper_regularization_examples() {
        let coarse = ball(1, 9, 1.0);
        let fine = ball(1, 17, 1.0);
        let finer = ball(1, 33, 1.0);
        let smooth = |x: &[f64]| x[0] * x[0] - x[1];
        let u = sample_function(smooth, &coarse).unwrap();
        let uf = sample_function(smooth, &fine).unwrap();
        let uff = sample_function(smooth, &finer).unwrap();
        let reg = upper_regularize(&u, &[uf, uff], 0.25).unwrap();
        assert!(reg.exceedance.is_empty());

        let c = GridFunction::constant(coarse.clone(), 3.0).unwrap();
        let reg = upper_regularize(&c, &[], 1e-12).unwrap();
        assert!(reg.exceedance.is_empty());
        assert_eq!(reg.value.values()[40], c.values()[40]);

        let dip = |dom: &Arc<GridDomain>| {
            let mut v = vec![0.0; dom.len()];
            v[dom.len() / 2] = -10.0;
            GridFunction::new(dom.clone(), v).unwrap()
        };
        let reg = upper_regularize(&dip(&coarse), &[dip(&fine)], 1e-6).unwrap();
        assert_eq!(reg.exceedance.indices(), vec![coarse.len() / 2]);
    }
}
