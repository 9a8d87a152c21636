//! Uniform lattices over ℝ^{2n} ≅ ℂⁿ, sampled functions, node masks and the
//! mollifier used as the discrete standard approximation.
//!
//! Real axes are ordered `(x₁, y₁, x₂, y₂, …)` with `zⱼ = xⱼ + i yⱼ`; linear
//! node indices are row-major with the last axis fastest.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MshError, Result};

/// Slack used when comparing defining-function samples against zero.
const RHO_EPS: f64 = 1e-12;

/// Additive mollifier correction constant `c` in `c·δ²`.
pub const DEFAULT_MOLLIFIER_CORRECTION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeClass {
    Interior,
    Boundary,
    Outside,
}

/// Analytic domain shapes, all centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `{|z| < radius}` with `ρ = |z|² − radius²`.
    Ball { radius: f64 },
    /// The cube `[lo, hi]^{2n}`.
    Box { lo: f64, hi: f64 },
    /// `{inner < |z| < outer}`.
    Annulus { inner: f64, outer: f64 },
}

impl DomainSpec {
    /// Defining function ρ (negative inside).
    pub fn rho(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            DomainSpec::Ball { radius } => r2 - radius * radius,
            DomainSpec::Box { lo, hi } => {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                x.iter().map(|v| (v - mid).abs()).fold(f64::NEG_INFINITY, f64::max) - half
            }
            DomainSpec::Annulus { inner, outer } => (inner * inner - r2).max(r2 - outer * outer),
        }
    }

    fn extent(&self) -> (f64, f64) {
        match *self {
            DomainSpec::Ball { radius } => (-radius, radius),
            DomainSpec::Box { lo, hi } => (lo, hi),
            DomainSpec::Annulus { outer, .. } => (-outer, outer),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Ball { radius } => radius > 0.0 && radius.is_finite(),
            DomainSpec::Box { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            DomainSpec::Annulus { inner, outer } => {
                inner > 0.0 && outer > inner && outer.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(MshError::Geometry(format!("{self:?}")))
        }
    }
}

/// A uniform lattice with interior/boundary/outside classification.
#[derive(Debug, Clone)]
pub struct GridDomain {
    n: usize,
    h: f64,
    origin: Vec<f64>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    rho: Option<Vec<f64>>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.h == other.h
            && self.origin == other.origin
            && self.dims == other.dims
            && self.class == other.class
    }
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    strides
}

impl GridDomain {
    /// Assemble a domain from explicit classification, validating the stencil
    /// and defining-function invariants.
    pub fn from_classes(
        n: usize,
        h: f64,
        origin: Vec<f64>,
        dims: Vec<usize>,
        class: Vec<NodeClass>,
        rho: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(MshError::Dimension(n));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(MshError::Geometry(format!("spacing {h}")));
        }
        if dims.len() != 2 * n || origin.len() != 2 * n {
            return Err(MshError::Geometry("axis count must be 2n".into()));
        }
        let len: usize = dims.iter().product();
        if class.len() != len || rho.as_ref().is_some_and(|r| r.len() != len) {
            return Err(MshError::Geometry("per-node arrays do not match the lattice".into()));
        }
        let strides = row_major_strides(&dims);
        let dom = GridDomain { n, h, origin, dims, strides, class, rho };
        let mut any_interior = false;
        let offsets = dom.stencil_offsets();
        for p in 0..len {
            if dom.class[p] != NodeClass::Interior {
                continue;
            }
            any_interior = true;
            if dom.on_lattice_edge(p) {
                return Err(MshError::StencilOutside { node: p });
            }
            if offsets.iter().any(|&o| dom.class[(p as isize + o) as usize] == NodeClass::Outside) {
                return Err(MshError::StencilOutside { node: p });
            }
        }
        if !any_interior {
            return Err(MshError::EmptyInterior);
        }
        if let Some(rho) = &dom.rho {
            for (p, (&c, &r)) in dom.class.iter().zip(rho).enumerate() {
                let bad = match c {
                    NodeClass::Interior => !(r < 0.0),
                    NodeClass::Outside => r < -RHO_EPS,
                    NodeClass::Boundary => false,
                };
                if bad {
                    return Err(MshError::Geometry(format!("classification disagrees with rho at node {p}")));
                }
            }
        }
        Ok(dom)
    }

    /// Classify a lattice from a defining function: interior nodes have
    /// `ρ < 0` and a full in-lattice stencil, boundary nodes form the
    /// one-node collar reached by interior stencils.
    pub fn from_defining_function(
        n: usize,
        h: f64,
        origin: Vec<f64>,
        dims: Vec<usize>,
        rho: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let len: usize = dims.iter().product();
        let shell = GridDomain {
            n,
            h,
            origin,
            strides: row_major_strides(&dims),
            dims,
            class: vec![NodeClass::Outside; len],
            rho: None,
        };
        let mut x = vec![0.0; 2 * n];
        let mut rho_vals = Vec::with_capacity(len);
        let mut inside = Vec::with_capacity(len);
        for p in 0..len {
            shell.coords_into(p, &mut x);
            let r = rho(&x);
            rho_vals.push(r);
            inside.push(r < -RHO_EPS && !shell.on_lattice_edge(p));
        }
        let class = shell.classify_available(&inside, true);
        GridDomain::from_classes(n, h, shell.origin, shell.dims, class, Some(rho_vals))
    }

    /// Interior = `available` with a fully available stencil (or just
    /// `available` when `direct` is set); boundary = non-interior nodes
    /// reached by an interior stencil; everything else is outside.
    fn classify_available(&self, available: &[bool], direct: bool) -> Vec<NodeClass> {
        let len = self.len();
        let offsets = self.stencil_offsets();
        let mut class = vec![NodeClass::Outside; len];
        for p in 0..len {
            if !available[p] || self.on_lattice_edge(p) {
                continue;
            }
            let ok = direct
                || offsets.iter().all(|&o| available[(p as isize + o) as usize]);
            if ok {
                class[p] = NodeClass::Interior;
            }
        }
        for p in 0..len {
            if class[p] != NodeClass::Interior {
                continue;
            }
            for &o in &offsets {
                let q = (p as isize + o) as usize;
                if class[q] == NodeClass::Outside {
                    class[q] = NodeClass::Boundary;
                }
            }
        }
        class
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real axes, `2n`.
    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn class(&self, p: usize) -> NodeClass {
        self.class[p]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    pub fn rho(&self) -> Option<&[f64]> {
        self.rho.as_deref()
    }

    /// Volume element `h^{2n}` of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(2 * self.n as i32)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h
    }

    pub fn multi_index_into(&self, mut p: usize, out: &mut [usize]) {
        for (a, &s) in self.strides.iter().enumerate() {
            out[a] = p / s;
            p %= s;
        }
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        self.multi_index_into(p, &mut out);
        out
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords_into(&self, p: usize, out: &mut [f64]) {
        let mut rem = p;
        for (a, &s) in self.strides.iter().enumerate() {
            let i = rem / s;
            rem %= s;
            out[a] = self.coordinate(a, i);
        }
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        self.coords_into(p, &mut out);
        out
    }

    /// Squared Euclidean norm `|z|²` of node `p`.
    pub fn norm_sq(&self, p: usize) -> f64 {
        let mut rem = p;
        let mut acc = 0.0;
        for (a, &s) in self.strides.iter().enumerate() {
            let x = self.coordinate(a, rem / s);
            rem %= s;
            acc += x * x;
        }
        acc
    }

    pub fn on_lattice_edge(&self, p: usize) -> bool {
        let mut rem = p;
        for (a, &s) in self.strides.iter().enumerate() {
            let i = rem / s;
            rem %= s;
            if i == 0 || i + 1 >= self.dims[a] {
                return true;
            }
        }
        false
    }

    /// Linear offsets of the complex-Hessian stencil: `±e_a` for every real
    /// axis and `±e_a ± e_b` for axes belonging to different complex
    /// coordinates.
    pub fn stencil_offsets(&self) -> Vec<isize> {
        let d = self.dims.len();
        let s: Vec<isize> = self.strides.iter().map(|&v| v as isize).collect();
        let mut out = Vec::new();
        for a in 0..d {
            out.push(s[a]);
            out.push(-s[a]);
        }
        for a in 0..d {
            for b in (a + 1)..d {
                if a / 2 == b / 2 {
                    continue;
                }
                out.extend([s[a] + s[b], s[a] - s[b], -s[a] + s[b], -s[a] - s[b]]);
            }
        }
        out
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.class[p] == NodeClass::Interior).collect()
    }

    pub fn interior_count(&self) -> usize {
        self.class.iter().filter(|&&c| c == NodeClass::Interior).count()
    }

    /// Number of edge-connected components of the interior.
    pub fn interior_components(&self) -> usize {
        let len = self.len();
        let mut seen = vec![false; len];
        let mut components = 0;
        let axis: Vec<isize> = self
            .strides
            .iter()
            .flat_map(|&s| [s as isize, -(s as isize)])
            .collect();
        let mut queue = VecDeque::new();
        for start in 0..len {
            if seen[start] || self.class[start] != NodeClass::Interior {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for &o in &axis {
                    let q = (p as isize + o) as usize;
                    if !seen[q] && self.class[q] == NodeClass::Interior {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        components
    }

    /// Same lattice and classification (rho is not compared).
    pub fn same_grid(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Build a classified lattice for one of the analytic shapes.
pub fn build_domain(spec: &DomainSpec, n: usize, resolution: usize) -> Result<GridDomain> {
    if !(1..=3).contains(&n) {
        return Err(MshError::Dimension(n));
    }
    if resolution < 9 {
        return Err(MshError::Resolution(resolution));
    }
    spec.validate()?;
    let (lo, hi) = spec.extent();
    let h = (hi - lo) / (resolution - 1) as f64;
    let dom = GridDomain::from_defining_function(
        n,
        h,
        vec![lo; 2 * n],
        vec![resolution; 2 * n],
        |x| spec.rho(x),
    )?;
    let components = dom.interior_components();
    if components != 1 {
        return Err(MshError::Disconnected { components });
    }
    Ok(dom)
}

/// Real values at lattice nodes; `NaN` marks outside nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wrap raw values; outside nodes are forced to `NaN`.
    pub fn new(domain: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(MshError::Geometry("value count does not match the lattice".into()));
        }
        for (p, v) in values.iter_mut().enumerate() {
            if domain.class(p) == NodeClass::Outside {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(MshError::NonFinite { node: p });
            }
        }
        Ok(GridFunction { domain, values })
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Result<Self> {
        let len = domain.len();
        GridFunction::new(domain, vec![c; len])
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `a·self + b·other` on a shared grid.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        if !GridDomain::same_grid(&self.domain, &other.domain) {
            return Err(MshError::DomainMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridFunction::new(self.domain.clone(), values)
    }

    /// Apply `f` pointwise on non-outside nodes.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect();
        GridFunction::new(self.domain.clone(), values)
    }

    /// Sup and inf over interior nodes.
    pub fn interior_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..self.values.len() {
            if self.domain.class(p) == NodeClass::Interior {
                lo = lo.min(self.values[p]);
                hi = hi.max(self.values[p]);
            }
        }
        (hi, lo)
    }
}

/// Evaluate `f` at every non-outside node.
pub fn sample_function(f: impl Fn(&[f64]) -> f64, dom: &Arc<GridDomain>) -> Result<GridFunction> {
    let mut x = vec![0.0; dom.real_dim()];
    let mut values = vec![f64::NAN; dom.len()];
    for (p, v) in values.iter_mut().enumerate() {
        if dom.class(p) == NodeClass::Outside {
            continue;
        }
        dom.coords_into(p, &mut x);
        let fx = f(&x);
        if !fx.is_finite() {
            return Err(MshError::NonFinite { node: p });
        }
        *v = fx;
    }
    GridFunction::new(dom.clone(), values)
}

/// Per-node boolean set on a lattice.
#[derive(Debug, Clone)]
pub struct NodeMask {
    domain: Arc<GridDomain>,
    members: Vec<bool>,
}

impl NodeMask {
    pub fn empty(domain: Arc<GridDomain>) -> Self {
        let len = domain.len();
        NodeMask { domain, members: vec![false; len] }
    }

    pub fn from_members(domain: Arc<GridDomain>, members: Vec<bool>) -> Result<Self> {
        if members.len() != domain.len() {
            return Err(MshError::Geometry("mask length does not match the lattice".into()));
        }
        Ok(NodeMask { domain, members })
    }

    pub fn from_indices(domain: Arc<GridDomain>, indices: &[usize]) -> Result<Self> {
        let mut members = vec![false; domain.len()];
        for &p in indices {
            *members.get_mut(p).ok_or_else(|| MshError::Geometry(format!("node {p} out of range")))? = true;
        }
        Ok(NodeMask { domain, members })
    }

    /// Interior nodes whose coordinates satisfy `pred`.
    pub fn interior_where(domain: Arc<GridDomain>, pred: impl Fn(&[f64]) -> bool) -> Self {
        let mut x = vec![0.0; domain.real_dim()];
        let members = (0..domain.len())
            .map(|p| {
                domain.class(p) == NodeClass::Interior && {
                    domain.coords_into(p, &mut x);
                    pred(&x)
                }
            })
            .collect();
        NodeMask { domain, members }
    }

    /// All interior nodes.
    pub fn interior(domain: Arc<GridDomain>) -> Self {
        NodeMask::interior_where(domain, |_| true)
    }

    /// Interior nodes in the closed ball `|z − center| ≤ radius`.
    pub fn ball(domain: Arc<GridDomain>, center: &[f64], radius: f64) -> Self {
        let r2 = radius * radius * (1.0 + 1e-12) + 1e-14;
        let c = center.to_vec();
        NodeMask::interior_where(domain, move |x| {
            x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, p: usize) -> bool {
        self.members[p]
    }

    pub fn insert(&mut self, p: usize) {
        self.members[p] = true;
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&p| self.members[p]).collect()
    }

    fn zip_with(&self, other: &NodeMask, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if !GridDomain::same_grid(&self.domain, &other.domain) {
            return Err(MshError::DomainMismatch);
        }
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| f(a, b)).collect();
        Ok(NodeMask { domain: self.domain.clone(), members })
    }

    pub fn union(&self, other: &NodeMask) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &NodeMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &NodeMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint_from(&self, other: &NodeMask) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !(a && b))
    }

    /// ℓ∞ dilation by `k` nodes, clipped to the lattice.
    pub fn dilate(&self, k: usize) -> Self {
        let mut cur = self.members.clone();
        for _ in 0..k {
            for a in 0..self.domain.real_dim() {
                cur = shift_or(&self.domain, &cur, a);
            }
        }
        NodeMask { domain: self.domain.clone(), members: cur }
    }

    /// ℓ∞ erosion by `k` nodes; nodes within `k` of the lattice edge are removed.
    pub fn erode(&self, k: usize) -> Self {
        let complement: Vec<bool> = self.members.iter().map(|&m| !m).collect();
        let mut grown = NodeMask { domain: self.domain.clone(), members: complement }.dilate(k);
        for (p, m) in grown.members.iter_mut().enumerate() {
            let near_edge = {
                let idx = self.domain.multi_index(p);
                idx.iter()
                    .zip(self.domain.dims())
                    .any(|(&i, &d)| i < k || i + k >= d)
            };
            *m = !(*m || near_edge);
        }
        grown
    }

    /// Restrict to interior nodes.
    pub fn interior_part(&self) -> Self {
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(p, &m)| m && self.domain.class(p) == NodeClass::Interior)
            .collect();
        NodeMask { domain: self.domain.clone(), members }
    }

    /// Interior nodes with no boundary/outside node in their ℓ∞
    /// neighborhood of radius 1 (grid distance ≥ 2h from the collar).
    pub fn clearance_zone(domain: &Arc<GridDomain>) -> Self {
        let not_interior: Vec<bool> = domain.classes().iter().map(|&c| c != NodeClass::Interior).collect();
        let near = NodeMask { domain: domain.clone(), members: not_interior }.dilate(1);
        let members = near.members.iter().map(|&m| !m).collect();
        NodeMask { domain: domain.clone(), members }
    }

    /// First member violating the 2h clearance, if any.
    pub fn clearance_violation(&self) -> Option<usize> {
        let zone = NodeMask::clearance_zone(&self.domain);
        (0..self.members.len()).find(|&p| self.members[p] && !zone.members[p])
    }
}

/// Geometric description of a node set, realizable on any lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum SetSpec {
    Empty,
    /// Closed ball, interior nodes only.
    Ball { center: Vec<f64>, radius: f64 },
    /// A single lattice node; `at` must be a node of every lattice used.
    Point { at: Vec<f64> },
    /// Closed coordinate box `lo ≤ x ≤ hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Union { of: Vec<SetSpec> },
}

impl SetSpec {
    pub fn mask(&self, domain: &Arc<GridDomain>) -> Result<NodeMask> {
        let d = domain.real_dim();
        let check_len = |v: &[f64]| {
            if v.len() == d {
                Ok(())
            } else {
                Err(MshError::Geometry(format!("set coordinates have length {}, expected {d}", v.len())))
            }
        };
        match self {
            SetSpec::Empty => Ok(NodeMask::empty(domain.clone())),
            SetSpec::Ball { center, radius } => {
                check_len(center)?;
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(MshError::Geometry(format!("ball radius {radius}")));
                }
                Ok(NodeMask::ball(domain.clone(), center, *radius))
            }
            SetSpec::Point { at } => {
                check_len(at)?;
                let h = domain.h();
                let mut idx = Vec::with_capacity(d);
                for (a, &x) in at.iter().enumerate() {
                    let t = (x - domain.origin()[a]) / h;
                    let i = t.round();
                    if (t - i).abs() > 1e-9 || i < 0.0 || i as usize >= domain.dims()[a] {
                        return Err(MshError::NotGridAligned);
                    }
                    idx.push(i as usize);
                }
                let p = domain.linear_index(&idx);
                if domain.class(p) != NodeClass::Interior {
                    return Err(MshError::Clearance { node: p });
                }
                NodeMask::from_indices(domain.clone(), &[p])
            }
            SetSpec::Box { lo, hi } => {
                check_len(lo)?;
                check_len(hi)?;
                let eps = 1e-9 * domain.h();
                let (lo, hi) = (lo.clone(), hi.clone());
                Ok(NodeMask::interior_where(domain.clone(), move |x| {
                    x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, u))| *v >= l - eps && *v <= u + eps)
                }))
            }
            SetSpec::Union { of } => {
                let mut acc = NodeMask::empty(domain.clone());
                for s in of {
                    acc = acc.union(&s.mask(domain)?)?;
                }
                Ok(acc)
            }
        }
    }
}

fn shift_or(dom: &GridDomain, src: &[bool], axis: usize) -> Vec<bool> {
    let stride = dom.strides()[axis];
    let dim = dom.dims()[axis];
    let mut out = src.to_vec();
    for p in 0..src.len() {
        if !src[p] {
            continue;
        }
        let i = (p / stride) % dim;
        if i > 0 {
            out[p - stride] = true;
        }
        if i + 1 < dim {
            out[p + stride] = true;
        }
    }
    out
}

/// Lattice offsets and normalized weights of the bump kernel
/// `(1 − (|x|/δ)²)³` restricted to `|x| < δ`.
pub(crate) struct Kernel {
    pub offsets: Vec<Vec<isize>>,
    pub weights: Vec<f64>,
    pub reach: usize,
}

pub(crate) fn bump_kernel(real_dim: usize, h: f64, delta: f64) -> Kernel {
    let reach = ((delta / h) * (1.0 + 1e-12)).floor() as usize;
    let side = 2 * reach + 1;
    let total = side.pow(real_dim as u32);
    let mut offsets = Vec::new();
    let mut raw = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut off = vec![0isize; real_dim];
        for o in off.iter_mut() {
            *o = (c % side) as isize - reach as isize;
            c /= side;
        }
        let s = off.iter().map(|&v| (v * v) as f64).sum::<f64>() * h * h / (delta * delta);
        if s < 1.0 {
            raw.push((1.0 - s).powi(3));
            offsets.push(off);
        }
    }
    let total_w: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total_w).collect();
    Kernel { offsets, weights, reach }
}

/// Mollify with the default correction constant.
pub fn mollify(u: &GridFunction, delta: f64) -> Result<GridFunction> {
    mollify_with(u, delta, DEFAULT_MOLLIFIER_CORRECTION)
}

/// Discrete convolution with the normalized bump kernel of radius `delta`,
/// plus `correction·δ²`. The result lives on the δ-eroded domain: nodes
/// whose kernel support avoids outside nodes.
pub fn mollify_with(u: &GridFunction, delta: f64, correction: f64) -> Result<GridFunction> {
    let dom = u.domain();
    let h = dom.h();
    if !(delta >= h * (1.0 - 1e-12)) {
        return Err(MshError::MollifierRadius { delta, h });
    }
    let kernel = bump_kernel(dom.real_dim(), h, delta);
    let strides = dom.strides();
    let lin: Vec<isize> = kernel
        .offsets
        .iter()
        .map(|o| o.iter().zip(strides).map(|(&v, &s)| v * s as isize).sum())
        .collect();
    let len = dom.len();
    let mut available = vec![false; len];
    let mut conv = vec![f64::NAN; len];
    let mut idx = vec![0usize; dom.real_dim()];
    let vals = u.values();
    'nodes: for p in 0..len {
        if dom.class(p) == NodeClass::Outside {
            continue;
        }
        dom.multi_index_into(p, &mut idx);
        if idx.iter().zip(dom.dims()).any(|(&i, &d)| i < kernel.reach || i + kernel.reach >= d) {
            continue;
        }
        let mut acc = 0.0;
        for (&o, &w) in lin.iter().zip(&kernel.weights) {
            let q = (p as isize + o) as usize;
            if dom.class(q) == NodeClass::Outside {
                continue 'nodes;
            }
            acc += w * vals[q];
        }
        available[p] = true;
        conv[p] = acc + correction * delta * delta;
    }
    let class = dom.classify_available(&available, false);
    let eroded = GridDomain::from_classes(
        dom.n(),
        h,
        dom.origin().to_vec(),
        dom.dims().to_vec(),
        class,
        None,
    )?;
    GridFunction::new(Arc::new(eroded), conv)
}

/// Slice `u` along the complex hyperplane `z_axis = value`, where `value`
/// must coincide with a lattice level of both real axes of that coordinate.
pub fn restrict_to_hyperplane(u: &GridFunction, axis: usize, value: [f64; 2]) -> Result<GridFunction> {
    let dom = u.domain();
    let n = dom.n();
    if n < 2 {
        return Err(MshError::Precondition("hyperplane restriction needs n ≥ 2".into()));
    }
    if axis >= n {
        return Err(MshError::Order { order: axis, lo: 0, hi: n - 1 });
    }
    let h = dom.h();
    let mut level = [0usize; 2];
    for (k, lvl) in level.iter_mut().enumerate() {
        let a = 2 * axis + k;
        let t = (value[k] - dom.origin()[a]) / h;
        let i = t.round();
        if (t - i).abs() > 1e-9 || i < 0.0 || i as usize >= dom.dims()[a] {
            return Err(MshError::NotGridAligned);
        }
        *lvl = i as usize;
    }
    let keep: Vec<usize> = (0..dom.real_dim()).filter(|&a| a / 2 != axis).collect();
    let dims: Vec<usize> = keep.iter().map(|&a| dom.dims()[a]).collect();
    let origin: Vec<f64> = keep.iter().map(|&a| dom.origin()[a]).collect();
    let len: usize = dims.iter().product();
    let sub_strides = row_major_strides(&dims);
    let mut class = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    let mut rho = dom.rho().map(|_| Vec::with_capacity(len));
    let mut full = vec![0usize; dom.real_dim()];
    full[2 * axis] = level[0];
    full[2 * axis + 1] = level[1];
    for q in 0..len {
        let mut rem = q;
        for (k, &a) in keep.iter().enumerate() {
            full[a] = rem / sub_strides[k];
            rem %= sub_strides[k];
        }
        let p = dom.linear_index(&full);
        class.push(dom.class(p));
        values.push(u.value(p));
        if let (Some(dst), Some(src)) = (rho.as_mut(), dom.rho()) {
            dst.push(src[p]);
        }
    }
    let sliced = GridDomain::from_classes(n - 1, h, origin, dims, class, rho)?;
    GridFunction::new(Arc::new(sliced), values)
}
