//! Position of grid functions in the filtration `sh_n ⊂ … ⊂ sh_1`, pointwise
//! maxima, hyperplane restrictions and the radial extremal profiles.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MshError, Result};
use crate::grid::{restrict_to_hyperplane, GridDomain, GridFunction, NodeClass, NodeMask};
use crate::hessian::{default_slack, eigenvalues_array, esym_all, HessianStencil, JACOBI_TOL};

/// Slack used by the Γ_m tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Slack {
    /// `1e-8·(1 + ‖A‖)` per node.
    #[default]
    Default,
    Absolute(f64),
}

impl Slack {
    pub fn at(&self, a: &crate::hessian::HermitianMatrix) -> f64 {
        match *self {
            Slack::Default => default_slack(a),
            Slack::Absolute(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MshReport {
    pub largest_m: usize,
    /// Failing node count for orders `1..=n`.
    pub violations: Vec<usize>,
    /// Smallest `e_k` seen for orders `1..=n`.
    pub worst_margin: Vec<f64>,
    pub nodes_checked: usize,
}

pub fn classify_msh(u: &GridFunction, tol: Slack) -> Result<MshReport> {
    classify_msh_excluding(u, tol, None)
}

/// Classification skipping the members of `exclude`, typically a collar
/// around the gluing set of a pointwise maximum.
pub fn classify_msh_excluding(u: &GridFunction, tol: Slack, exclude: Option<&NodeMask>) -> Result<MshReport> {
    let dom = u.domain();
    if let Some(ex) = exclude {
        if !GridDomain::same_grid(dom, ex.domain()) {
            return Err(MshError::DomainMismatch);
        }
    }
    let n = dom.n();
    let stencil = HessianStencil::new(dom);
    let mut violations = vec![0usize; n];
    let mut worst = vec![f64::INFINITY; n];
    let mut checked = 0;
    for p in dom.interior_indices() {
        if exclude.is_some_and(|ex| ex.contains(p)) {
            continue;
        }
        let a = stencil.matrix(u.values(), p, u.value(p));
        if a.diag().iter().any(|v| !v.is_finite()) {
            return Err(MshError::StencilOutside { node: p });
        }
        let slack = tol.at(&a);
        let l = eigenvalues_array(&a, JACOBI_TOL)?;
        let e = esym_all(&l[..n]);
        for k in 1..=n {
            worst[k - 1] = worst[k - 1].min(e[k]);
            if e[k] < -slack {
                violations[k - 1] += 1;
            }
        }
        checked += 1;
    }
    if checked == 0 {
        return Err(MshError::EmptyInterior);
    }
    let largest_m = violations.iter().take_while(|&&v| v == 0).count();
    Ok(MshReport { largest_m, violations, worst_margin: worst, nodes_checked: checked })
}

pub fn max_combine(us: &[GridFunction]) -> Result<GridFunction> {
    let first = us.first().ok_or(MshError::Empty("max_combine inputs"))?;
    if us.iter().any(|u| !GridDomain::same_grid(first.domain(), u.domain())) {
        return Err(MshError::DomainMismatch);
    }
    let mut values = first.values().to_vec();
    for u in &us[1..] {
        for (v, &w) in values.iter_mut().zip(u.values()) {
            *v = v.max(w);
        }
    }
    GridFunction::new(first.domain().clone(), values)
}

/// Nodes within `width` (ℓ∞) of a place where the maximizing input of
/// `max_combine(us)` changes between axis neighbours.
pub fn gluing_collar(us: &[GridFunction], width: usize) -> Result<NodeMask> {
    let first = us.first().ok_or(MshError::Empty("gluing inputs"))?;
    let dom = first.domain();
    if us.iter().any(|u| !GridDomain::same_grid(dom, u.domain())) {
        return Err(MshError::DomainMismatch);
    }
    let argmax: Vec<usize> = (0..dom.len())
        .map(|p| {
            let mut best = 0;
            for (i, u) in us.iter().enumerate() {
                if u.value(p) > us[best].value(p) {
                    best = i;
                }
            }
            best
        })
        .collect();
    let mut mask = NodeMask::empty(dom.clone());
    for p in 0..dom.len() {
        if dom.class(p) == NodeClass::Outside {
            continue;
        }
        let idx = dom.multi_index(p);
        for (a, &s) in dom.strides().iter().enumerate() {
            if idx[a] + 1 < dom.dims()[a] {
                let q = p + s;
                if dom.class(q) != NodeClass::Outside && argmax[q] != argmax[p] {
                    mask.insert(p);
                    mask.insert(q);
                }
            }
        }
    }
    Ok(mask.dilate(width))
}

/// Maximal radial m-sh function on `B_R` equal to −1 on `B̄_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub big_r: f64,
}

impl RadialProfile {
    pub fn new(n: usize, m: usize, r: f64, big_r: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(MshError::Dimension(n));
        }
        if m == 0 || m > n {
            return Err(MshError::Order { order: m, lo: 1, hi: n });
        }
        if !(r > 0.0 && big_r > r && big_r.is_finite()) {
            return Err(MshError::Geometry(format!("radii r={r}, R={big_r}")));
        }
        Ok(RadialProfile { n, m, r, big_r })
    }

    /// Value at `|z| = t`; −1 inside `B̄_r`, 0 beyond `R`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.r {
            return -1.0;
        }
        if t >= self.big_r {
            return 0.0;
        }
        if self.m == self.n {
            -(self.big_r / t).ln() / (self.big_r / self.r).ln()
        } else {
            let p = 2.0 - 2.0 * self.n as f64 / self.m as f64;
            -(t.powf(p) - self.big_r.powf(p)) / (self.r.powf(p) - self.big_r.powf(p))
        }
    }
}

pub fn radial_extremal(n: usize, m: usize, r: f64, big_r: f64) -> Result<RadialProfile> {
    RadialProfile::new(n, m, r, big_r)
}

/// Every axis-aligned complex slice of `u` lies in `sh_{m−1}`.
pub fn check_restriction(u: &GridFunction, m: usize, tol: Slack) -> Result<bool> {
    let dom = u.domain();
    let n = dom.n();
    if n < 2 || m < 2 || m > n {
        return Err(MshError::Precondition(format!("restriction needs 2 <= m <= n, got m={m}, n={n}")));
    }
    let report = classify_msh(u, tol)?;
    if report.largest_m < m {
        return Err(MshError::Precondition(format!(
            "input is only {}-subharmonic, not {m}-subharmonic",
            report.largest_m
        )));
    }
    for axis in 0..n {
        let (ax, ay) = (2 * axis, 2 * axis + 1);
        for i in 0..dom.dims()[ax] {
            for j in 0..dom.dims()[ay] {
                let level = [dom.coordinate(ax, i), dom.coordinate(ay, j)];
                let slice = match restrict_to_hyperplane(u, axis, level) {
                    Ok(s) => s,
                    Err(MshError::EmptyInterior) => continue,
                    Err(e) => return Err(e),
                };
                let rep = classify_msh(&slice, tol)?;
                if rep.largest_m < m - 1 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Sample a radial profile on `dom`.
pub fn sample_profile(profile: &RadialProfile, dom: &Arc<GridDomain>) -> Result<GridFunction> {
    crate::grid::sample_function(|x| profile.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt()), dom)
}
