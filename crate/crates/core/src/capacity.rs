//! Condenser capacities `C(K, D)` as the Hessian mass of the relative
//! extremal function, plus open-set and outer capacities and a polarity
//! indicator built from refinement studies.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envelope::{solve_pmeasure, EnvelopeConfig};
use crate::error::{MshError, Result};
use crate::grid::{build_domain, DomainSpec, GridDomain, NodeClass, NodeMask, SetSpec};
use crate::hessian::{density_of, HessianStencil};

/// A compact `K` inside the lattice domain `D`, with the order `m`.
#[derive(Debug, Clone)]
pub struct CondenserSpec {
    pub dom: Arc<GridDomain>,
    pub k: NodeMask,
    pub m: usize,
}

impl CondenserSpec {
    pub fn new(dom: Arc<GridDomain>, k: NodeMask, m: usize) -> Result<Self> {
        if !GridDomain::same_grid(&dom, k.domain()) {
            return Err(MshError::DomainMismatch);
        }
        if m == 0 || m > dom.n() {
            return Err(MshError::Order { order: m, lo: 1, hi: dom.n() });
        }
        if let Some(node) = k.clearance_violation() {
            return Err(MshError::Clearance { node });
        }
        Ok(CondenserSpec { dom, k, m })
    }
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    pub mass_mask: NodeMask,
    pub h: f64,
    pub iterations: usize,
    pub stalled: bool,
    pub max_residual: f64,
    /// Total magnitude removed by clamping negative densities to zero.
    pub clamped: f64,
    /// Capacities of the inner approximations, in the order visited.
    pub sequence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySummary {
    pub value: f64,
    pub h: f64,
    pub iterations: usize,
    pub stalled: bool,
    pub max_residual: f64,
    pub clamped: f64,
    pub mass_nodes: usize,
    pub sequence: Vec<f64>,
}

impl CapacityResult {
    fn zero(dom: &Arc<GridDomain>) -> Self {
        CapacityResult {
            value: 0.0,
            mass_mask: NodeMask::empty(dom.clone()),
            h: dom.h(),
            iterations: 0,
            stalled: true,
            max_residual: 0.0,
            clamped: 0.0,
            sequence: Vec::new(),
        }
    }

    pub fn summary(&self) -> CapacitySummary {
        CapacitySummary {
            value: self.value,
            h: self.h,
            iterations: self.iterations,
            stalled: self.stalled,
            max_residual: self.max_residual,
            clamped: self.clamped,
            mass_nodes: self.mass_mask.count(),
            sequence: self.sequence.clone(),
        }
    }
}

/// Exact capacity of `B̄_r` in `B_R ⊂ ℂⁿ` for the densities used here:
/// `πⁿ·s^n·f'(s)^m` for the radial extremal function `f(|z|²)`.
pub fn radial_capacity(n: usize, m: usize, r: f64, big_r: f64) -> f64 {
    let pin = PI.powi(n as i32);
    if m == n {
        pin / (2.0 * (big_r / r).ln()).powi(n as i32)
    } else {
        let q = 1.0 - n as f64 / m as f64;
        pin * (-q).powi(m as i32) / (r.powf(2.0 * q) - big_r.powf(2.0 * q)).powi(m as i32)
    }
}

pub fn condenser_capacity(spec: &CondenserSpec, cfg: &EnvelopeConfig) -> Result<CapacityResult> {
    let dom = &spec.dom;
    if spec.k.is_empty() {
        return Ok(CapacityResult::zero(dom));
    }
    let mut cfg = cfg.clone();
    cfg.m = spec.m;
    let res = solve_pmeasure(dom, &spec.k, &cfg)?;
    let mask = spec.k.dilate(1).interior_part();
    let stencil = HessianStencil::new(dom);
    let vals = res.omega.values();
    let mut total = 0.0;
    let mut clamped = 0.0;
    for p in mask.indices() {
        let d = density_of(&stencil.matrix(vals, p, vals[p]), spec.m)?;
        if d >= 0.0 {
            total += d;
        } else {
            clamped -= d;
        }
    }
    let vol = dom.cell_volume();
    Ok(CapacityResult {
        value: total * vol,
        mass_mask: mask,
        h: dom.h(),
        iterations: res.iterations,
        stalled: res.stalled,
        max_residual: res.max_residual,
        clamped: clamped * vol,
        sequence: Vec::new(),
    })
}

/// Shared settings for the open-set and outer capacities.
#[derive(Debug, Clone)]
pub struct CapacityContext {
    pub dom: Arc<GridDomain>,
    pub cfg: EnvelopeConfig,
    /// Erosion depths for exhausting an open set by compacts.
    pub erosions: Vec<usize>,
    /// Dilation depths for approximating a set from outside.
    pub dilations: Vec<usize>,
}

impl CapacityContext {
    pub fn new(dom: Arc<GridDomain>, cfg: EnvelopeConfig) -> Self {
        CapacityContext { dom, cfg, erosions: vec![2, 1, 0], dilations: vec![2, 1, 0] }
    }

    pub fn with_depths(mut self, erosions: Vec<usize>, dilations: Vec<usize>) -> Self {
        self.erosions = erosions;
        self.dilations = dilations;
        self
    }
}

/// Memoizes condenser capacities by compact.
struct Solver<'a> {
    ctx: &'a CapacityContext,
    cache: HashMap<Vec<usize>, CapacityResult>,
}

impl<'a> Solver<'a> {
    fn capacity(&mut self, k: &NodeMask) -> Result<CapacityResult> {
        let key = k.indices();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let spec = CondenserSpec::new(self.ctx.dom.clone(), k.clone(), self.ctx.cfg.m)?;
        let res = condenser_capacity(&spec, &self.ctx.cfg)?;
        self.cache.insert(key, res.clone());
        Ok(res)
    }

    fn open_set(&mut self, u: &NodeMask) -> Result<CapacityResult> {
        let zone = NodeMask::clearance_zone(&self.ctx.dom);
        let mut best: Option<CapacityResult> = None;
        let mut sequence = Vec::new();
        let mut depths = self.ctx.erosions.clone();
        depths.sort_unstable_by(|a, b| b.cmp(a));
        depths.dedup();
        for depth in depths {
            let k = u.erode(depth).intersection(&zone)?;
            if k.is_empty() {
                continue;
            }
            let res = self.capacity(&k)?;
            sequence.push(res.value);
            if best.as_ref().is_none_or(|b| res.value > b.value) {
                best = Some(res);
            }
        }
        let mut out = best.unwrap_or_else(|| CapacityResult::zero(&self.ctx.dom));
        out.sequence = sequence;
        Ok(out)
    }
}

fn check_mask(ctx: &CapacityContext, mask: &NodeMask) -> Result<()> {
    if !GridDomain::same_grid(&ctx.dom, mask.domain()) {
        return Err(MshError::DomainMismatch);
    }
    if let Some(p) = mask.indices().into_iter().find(|&p| ctx.dom.class(p) != NodeClass::Interior) {
        return Err(MshError::Clearance { node: p });
    }
    Ok(())
}

/// Supremum of condenser capacities over the erosions of `u` that keep the
/// boundary clearance.
pub fn open_set_capacity(u: &NodeMask, ctx: &CapacityContext) -> Result<CapacityResult> {
    check_mask(ctx, u)?;
    Solver { ctx, cache: HashMap::new() }.open_set(u)
}

/// Infimum over dilations `U ⊃ e` of the open-set capacity of `U`.
pub fn outer_capacity(e: &NodeMask, ctx: &CapacityContext) -> Result<CapacityResult> {
    check_mask(ctx, e)?;
    if e.is_empty() {
        return Ok(CapacityResult::zero(&ctx.dom));
    }
    let mut solver = Solver { ctx, cache: HashMap::new() };
    let mut best: Option<CapacityResult> = None;
    let mut sequence = Vec::new();
    let mut depths = ctx.dilations.clone();
    depths.sort_unstable_by(|a, b| b.cmp(a));
    depths.dedup();
    for depth in depths {
        let u = e.dilate(depth).interior_part();
        let res = solver.open_set(&u)?;
        sequence.push(res.value);
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let mut out = best.unwrap_or_else(|| CapacityResult::zero(&ctx.dom));
    out.sequence = sequence;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolarityVerdict {
    PolarTrend,
    NonPolar,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityReport {
    pub verdict: PolarityVerdict,
    pub resolutions: Vec<usize>,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
}

/// Verdict from capacities listed coarse to fine.
pub fn polarity_verdict(values: &[f64]) -> Result<PolarityVerdict> {
    if values.len() < 2 {
        return Err(MshError::Precondition("polarity needs at least two resolutions".into()));
    }
    let first = values[0];
    let last = values[values.len() - 1];
    let halving = values.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    if halving && last <= 1e-2 * first {
        return Ok(PolarityVerdict::PolarTrend);
    }
    let stable = values.iter().all(|&v| v > 0.0)
        && values.windows(2).all(|w| (w[1] - w[0]).abs() <= 0.2 * w[0].abs());
    if stable {
        return Ok(PolarityVerdict::NonPolar);
    }
    Ok(PolarityVerdict::Inconclusive)
}

/// Outer capacity of `e` at each resolution (coarse to fine) and the
/// resulting verdict.
pub fn polarity_indicator(
    e: &SetSpec,
    domain: &DomainSpec,
    n: usize,
    cfg: &EnvelopeConfig,
    erosions: &[usize],
    dilations: &[usize],
    resolutions: &[usize],
) -> Result<PolarityReport> {
    if resolutions.len() < 2 {
        return Err(MshError::Precondition("polarity needs at least two resolutions".into()));
    }
    let mut values = Vec::with_capacity(resolutions.len());
    let mut hs = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let dom = Arc::new(build_domain(domain, n, res)?);
        let mask = e.mask(&dom)?;
        let ctx = CapacityContext::new(dom.clone(), cfg.clone()).with_depths(erosions.to_vec(), dilations.to_vec());
        values.push(outer_capacity(&mask, &ctx)?.value);
        hs.push(dom.h());
    }
    Ok(PolarityReport { verdict: polarity_verdict(&values)?, resolutions: resolutions.to_vec(), h: hs, values })
}

/// Radial calibration case `B̄_r ⊂ B_R` at one resolution: the computed
/// capacity and its exact value.
pub fn radial_calibration(n: usize, m: usize, r: f64, big_r: f64, res: usize) -> Result<(f64, f64)> {
    let dom = Arc::new(build_domain(&DomainSpec::Ball { radius: big_r }, n, res)?);
    let k = NodeMask::ball(dom.clone(), &vec![0.0; 2 * n], r);
    let spec = CondenserSpec::new(dom, k, m)?;
    let c = condenser_capacity(&spec, &EnvelopeConfig::new(m).with_warm_start(m == 1))?;
    Ok((c.value, radial_capacity(n, m, r, big_r)))
}

/// Additive allowance for capacity inequalities: the change in the radial
/// calibration capacity between two resolutions.
pub fn capacity_noise(n: usize, m: usize, r: f64, big_r: f64, resolutions: (usize, usize)) -> Result<f64> {
    let (a, _) = radial_calibration(n, m, r, big_r, resolutions.0)?;
    let (b, _) = radial_calibration(n, m, r, big_r, resolutions.1)?;
    Ok((a - b).abs())
}
