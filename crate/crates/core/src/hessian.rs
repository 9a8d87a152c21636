//! Discrete complex Hessians, their spectra, and the Hessian measures
//! `(dd^c u₁ ∧ … ∧ dd^c u_k) ∧ β^{n−k}` reported as densities against `dV`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{MshError, Result};
use crate::grid::{GridDomain, GridFunction, NodeClass, NodeMask};

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOL: f64 = 1e-12;

/// Small Hermitian matrix; only the upper triangle is stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    diag: [f64; 3],
    off: [Complex64; 3],
}

fn off_slot(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

impl HermitianMatrix {
    /// `offdiag` lists the upper triangle row by row: (0,1), (0,2), (1,2).
    pub fn new(diag: &[f64], offdiag: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        if !(1..=3).contains(&n) {
            return Err(MshError::Dimension(n));
        }
        if offdiag.len() != n * (n - 1) / 2 {
            return Err(MshError::Geometry("off-diagonal count must be n(n-1)/2".into()));
        }
        if diag.iter().any(|v| !v.is_finite()) || offdiag.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MshError::NonFinite { node: 0 });
        }
        let mut m = HermitianMatrix::zeros(n);
        m.diag[..n].copy_from_slice(diag);
        m.off[..offdiag.len()].copy_from_slice(offdiag);
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix { n, diag: [0.0; 3], off: [Complex64::new(0.0, 0.0); 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = HermitianMatrix::zeros(n);
        m.diag[..n].fill(1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag[..self.n]
    }

    pub fn offdiag(&self) -> &[Complex64] {
        &self.off[..self.n * (self.n - 1) / 2]
    }

    pub fn set_diag(&mut self, j: usize, v: f64) {
        self.diag[j] = v;
    }

    pub fn set_off(&mut self, j: usize, k: usize, z: Complex64) {
        self.off[off_slot(self.n, j, k)] = z;
    }

    /// Entry `(j, k)` of the full matrix.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        match j.cmp(&k) {
            std::cmp::Ordering::Equal => Complex64::new(self.diag[j], 0.0),
            std::cmp::Ordering::Less => self.off[off_slot(self.n, j, k)],
            std::cmp::Ordering::Greater => self.off[off_slot(self.n, k, j)].conj(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.diag().iter().map(|v| v * v).sum();
        let o: f64 = self.offdiag().iter().map(|z| z.norm_sqr()).sum();
        (d + 2.0 * o).sqrt()
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        let mut m = *self;
        for j in 0..3 {
            m.diag[j] += other.diag[j];
            m.off[j] += other.off[j];
        }
        m
    }

    pub fn scale(&self, a: f64) -> HermitianMatrix {
        let mut m = *self;
        for j in 0..3 {
            m.diag[j] *= a;
            m.off[j] *= a;
        }
        m
    }

    /// `self + s·I`.
    pub fn shift(&self, s: f64) -> HermitianMatrix {
        let mut m = *self;
        for d in m.diag[..self.n].iter_mut() {
            *d += s;
        }
        m
    }

    /// `e_k` of the spectrum as the sum of k×k principal minors.
    pub fn principal_minor_sum(&self, k: usize) -> f64 {
        let d = &self.diag;
        match (self.n, k) {
            (_, 0) => 1.0,
            (_, 1) => self.trace(),
            (2, 2) => d[0] * d[1] - self.off[0].norm_sqr(),
            (3, 2) => {
                d[0] * d[1] + d[0] * d[2] + d[1] * d[2]
                    - self.off[0].norm_sqr()
                    - self.off[1].norm_sqr()
                    - self.off[2].norm_sqr()
            }
            (3, 3) => {
                let (a01, a02, a12) = (self.off[0], self.off[1], self.off[2]);
                d[0] * d[1] * d[2] + 2.0 * (a01 * a12 * a02.conj()).re
                    - d[0] * a12.norm_sqr()
                    - d[1] * a02.norm_sqr()
                    - d[2] * a01.norm_sqr()
            }
            _ => 0.0,
        }
    }
}

/// Eigenvalues sorted ascending, via cyclic complex Jacobi rotations.
pub fn hermitian_eigenvalues(a: &HermitianMatrix, tol: f64) -> Result<Vec<f64>> {
    Ok(eigenvalues_array(a, tol)?[..a.n].to_vec())
}

pub(crate) fn eigenvalues_array(a: &HermitianMatrix, tol: f64) -> Result<[f64; 3]> {
    let n = a.n;
    let mut out = [0.0; 3];
    if n == 1 {
        out[0] = a.diag[0];
        return Ok(out);
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok(out);
    }
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (j, row) in m.iter_mut().enumerate().take(n) {
        for (k, v) in row.iter_mut().enumerate().take(n) {
            *v = a.entry(j, k);
        }
    }
    let off_norm = |m: &[[Complex64; 3]; 3]| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                s += 2.0 * m[j][k].norm_sqr();
            }
        }
        s.sqrt()
    };
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&m) < tol * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let theta = (m[q][q].re - m[p][p].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // V = diag(1, conj(phase)) on (p, q) followed by the real rotation
                let mut v = [[Complex64::new(0.0, 0.0); 3]; 3];
                for (j, row) in v.iter_mut().enumerate().take(n) {
                    row[j] = Complex64::new(1.0, 0.0);
                }
                v[p][p] = Complex64::new(c, 0.0);
                v[p][q] = Complex64::new(s, 0.0);
                v[q][p] = -phase.conj() * s;
                v[q][q] = phase.conj() * c;
                let mut av = [[Complex64::new(0.0, 0.0); 3]; 3];
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for l in 0..n {
                            acc += m[j][l] * v[l][k];
                        }
                        av[j][k] = acc;
                    }
                }
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for l in 0..n {
                            acc += v[l][j].conj() * av[l][k];
                        }
                        m[j][k] = acc;
                    }
                }
                m[p][q] = Complex64::new(0.0, 0.0);
                m[q][p] = Complex64::new(0.0, 0.0);
                for (j, row) in m.iter_mut().enumerate().take(n) {
                    row[j] = Complex64::new(row[j].re, 0.0);
                }
            }
        }
    }
    if !converged && off_norm(&m) >= tol * norm {
        return Err(MshError::NoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }
    for (j, v) in out.iter_mut().enumerate().take(n) {
        *v = m[j][j].re;
    }
    out[..n].sort_by(f64::total_cmp);
    Ok(out)
}

/// `e_k(λ)` by the one-pass recurrence.
pub fn elementary_symmetric(lambda: &[f64], k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(MshError::Order { order: k, lo: 0, hi: lambda.len() });
    }
    Ok(esym_all(lambda)[k])
}

/// `e_0, …, e_n` of up to four values.
pub(crate) fn esym_all(lambda: &[f64]) -> [f64; 5] {
    let mut e = [0.0; 5];
    e[0] = 1.0;
    for (j, &l) in lambda.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

/// Γ_m membership: `e_k(λ) ≥ −tol` for every `k ≤ m`.
pub fn gamma_test(lambda: &[f64], m: usize, tol: f64) -> Result<bool> {
    if m == 0 || m > lambda.len() {
        return Err(MshError::Order { order: m, lo: 1, hi: lambda.len() });
    }
    let e = esym_all(lambda);
    Ok((1..=m).all(|k| e[k] >= -tol))
}

/// Default Γ_m slack `1e-8·(1 + ‖A‖)`.
pub fn default_slack(a: &HermitianMatrix) -> f64 {
    1e-8 * (1.0 + a.frobenius_norm())
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `k!(n−k)!`, the factor turning `e_k` into a density against `dV`.
pub fn density_factor(n: usize, k: usize) -> f64 {
    factorial(k) * factorial(n - k)
}

/// Central second differences feeding the complex Hessian at one node.
#[derive(Debug, Clone)]
pub(crate) struct HessianStencil {
    n: usize,
    inv_h2: f64,
    axis: [isize; 6],
}

impl HessianStencil {
    pub fn new(dom: &GridDomain) -> Self {
        let mut axis = [0isize; 6];
        for (a, &s) in dom.strides().iter().enumerate() {
            axis[a] = s as isize;
        }
        HessianStencil { n: dom.n(), inv_h2: 1.0 / (dom.h() * dom.h()), axis }
    }

    #[inline]
    fn at(vals: &[f64], p: usize, o: isize) -> f64 {
        vals[(p as isize + o) as usize]
    }

    #[inline]
    fn d2(&self, vals: &[f64], p: usize, a: usize, center: f64) -> f64 {
        let s = self.axis[a];
        (Self::at(vals, p, s) + Self::at(vals, p, -s) - 2.0 * center) * self.inv_h2
    }

    #[inline]
    fn dmix(&self, vals: &[f64], p: usize, a: usize, b: usize) -> f64 {
        let (sa, sb) = (self.axis[a], self.axis[b]);
        (Self::at(vals, p, sa + sb) - Self::at(vals, p, sa - sb) - Self::at(vals, p, sb - sa)
            + Self::at(vals, p, -sa - sb))
            * 0.25
            * self.inv_h2
    }

    /// Complex Hessian at `p` with the node's own value replaced by `center`.
    pub fn matrix(&self, vals: &[f64], p: usize, center: f64) -> HermitianMatrix {
        let n = self.n;
        let mut m = HermitianMatrix::zeros(n);
        for j in 0..n {
            let (x, y) = (2 * j, 2 * j + 1);
            m.diag[j] = 0.25 * (self.d2(vals, p, x, center) + self.d2(vals, p, y, center));
            for k in (j + 1)..n {
                let (xk, yk) = (2 * k, 2 * k + 1);
                let re = self.dmix(vals, p, x, xk) + self.dmix(vals, p, y, yk);
                let im = self.dmix(vals, p, x, yk) - self.dmix(vals, p, y, xk);
                m.off[off_slot(n, j, k)] = Complex64::new(0.25 * re, 0.25 * im);
            }
        }
        m
    }

    /// The Hessian with the center contribution removed, so that the full
    /// matrix at center value `v` is `A0 − (v/h²)·I`.
    pub fn matrix_without_center(&self, vals: &[f64], p: usize) -> HermitianMatrix {
        self.matrix(vals, p, 0.0)
    }
}

fn check_stencil(u: &GridFunction, p: usize, offsets: &[isize]) -> Result<()> {
    let vals = u.values();
    if offsets.iter().any(|&o| vals[(p as isize + o) as usize].is_nan()) {
        return Err(MshError::StencilOutside { node: p });
    }
    Ok(())
}

/// Per-interior-node complex Hessians and sorted spectra.
#[derive(Debug, Clone)]
pub struct HessianField {
    domain: Arc<GridDomain>,
    nodes: Vec<usize>,
    matrices: Vec<HermitianMatrix>,
    lambdas: Vec<[f64; 3]>,
}

impl HessianField {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Interior nodes in increasing order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn matrices(&self) -> &[HermitianMatrix] {
        &self.matrices
    }

    fn slot(&self, p: usize) -> Option<usize> {
        self.nodes.binary_search(&p).ok()
    }

    pub fn matrix(&self, p: usize) -> Option<&HermitianMatrix> {
        self.slot(p).map(|i| &self.matrices[i])
    }

    pub fn lambda(&self, p: usize) -> Option<&[f64]> {
        let n = self.domain.n();
        self.slot(p).map(|i| &self.lambdas[i][..n])
    }

    pub fn lambdas(&self) -> impl Iterator<Item = &[f64]> {
        let n = self.domain.n();
        self.lambdas.iter().map(move |l| &l[..n])
    }
}

pub fn complex_hessian(u: &GridFunction) -> Result<HessianField> {
    let dom = u.domain();
    let stencil = HessianStencil::new(dom);
    let offsets = dom.stencil_offsets();
    let nodes = dom.interior_indices();
    let mut matrices = Vec::with_capacity(nodes.len());
    let mut lambdas = Vec::with_capacity(nodes.len());
    for &p in &nodes {
        check_stencil(u, p, &offsets)?;
        let a = stencil.matrix(u.values(), p, u.value(p));
        lambdas.push(eigenvalues_array(&a, JACOBI_TOL)?);
        matrices.push(a);
    }
    Ok(HessianField { domain: dom.clone(), nodes, matrices, lambdas })
}

/// Per-node density against `dV`; `NaN` where it is not evaluated.
#[derive(Debug, Clone)]
pub struct MeasureField {
    domain: Arc<GridDomain>,
    k: usize,
    density: Vec<f64>,
}

impl MeasureField {
    pub fn new(domain: Arc<GridDomain>, k: usize, density: Vec<f64>) -> Result<Self> {
        if density.len() != domain.len() {
            return Err(MshError::Geometry("density length does not match the lattice".into()));
        }
        Ok(MeasureField { domain, k, density })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `Σ density·h^{2n}` over the interior members of `mask`.
    pub fn total_mass(&self, mask: &NodeMask) -> Result<f64> {
        if !GridDomain::same_grid(&self.domain, mask.domain()) {
            return Err(MshError::DomainMismatch);
        }
        let mut acc = 0.0;
        for (p, &m) in mask.members().iter().enumerate() {
            if m && self.domain.class(p) == NodeClass::Interior {
                acc += self.density[p];
            }
        }
        Ok(acc * self.domain.cell_volume())
    }

    /// Largest and smallest density over interior nodes.
    pub fn interior_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.domain.interior_indices() {
            lo = lo.min(self.density[p]);
            hi = hi.max(self.density[p]);
        }
        (hi, lo)
    }
}

fn check_order(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(MshError::Order { order: k, lo: 1, hi: n });
    }
    Ok(())
}

/// Density of `(dd^c u)^k ∧ β^{n−k}` at one node from its Hessian.
pub fn density_of(a: &HermitianMatrix, k: usize) -> Result<f64> {
    let lambda = eigenvalues_array(a, JACOBI_TOL)?;
    Ok(density_factor(a.n, k) * esym_all(&lambda[..a.n])[k])
}

pub fn hessian_density(u: &GridFunction, k: usize) -> Result<MeasureField> {
    let dom = u.domain();
    check_order(dom.n(), k)?;
    let stencil = HessianStencil::new(dom);
    let offsets = dom.stencil_offsets();
    let mut density = vec![f64::NAN; dom.len()];
    for p in dom.interior_indices() {
        check_stencil(u, p, &offsets)?;
        density[p] = density_of(&stencil.matrix(u.values(), p, u.value(p)), k)?;
    }
    MeasureField::new(dom.clone(), k, density)
}

/// `k!·σ_k(A₁,…,A_k)` by inclusion-exclusion, grouped as differences in the
/// first argument. `k = 0` yields 1.
pub(crate) fn polarized_ek(mats: &[HermitianMatrix]) -> Result<f64> {
    let k = mats.len();
    if k == 0 {
        return Ok(1.0);
    }
    let n = mats[0].n;
    let ek = |a: &HermitianMatrix| -> Result<f64> {
        let l = eigenvalues_array(a, JACOBI_TOL)?;
        Ok(esym_all(&l[..n])[k])
    };
    let rest = k - 1;
    let mut acc = 0.0;
    for bits in 0u32..(1 << rest) {
        let mut partial = HermitianMatrix::zeros(n);
        for (i, m) in mats[1..].iter().enumerate() {
            if bits & (1 << i) != 0 {
                partial = partial.add(m);
            }
        }
        let size = bits.count_ones() as usize;
        let sign = if (rest - size) % 2 == 0 { 1.0 } else { -1.0 };
        let with_first = ek(&mats[0].add(&partial))?;
        let without = if size == 0 { 0.0 } else { ek(&partial)? };
        acc += sign * (with_first - without);
    }
    Ok(acc)
}

/// Mixed density `k!(n−k)!·σ_k(A₁,…,A_k)` from per-node matrices; `k = 0`
/// gives the volume density `n!`.
pub fn mixed_density_of(mats: &[HermitianMatrix], n: usize) -> Result<f64> {
    let k = mats.len();
    Ok(factorial(n - k) * polarized_ek(mats)?)
}

pub fn mixed_hessian_density(us: &[GridFunction], k: usize) -> Result<MeasureField> {
    let first = us.first().ok_or(MshError::Empty("mixed density inputs"))?;
    let dom = first.domain();
    check_order(dom.n(), k)?;
    if us.len() != k {
        return Err(MshError::Precondition(format!("expected {k} functions, got {}", us.len())));
    }
    if us.iter().any(|u| !GridDomain::same_grid(dom, u.domain())) {
        return Err(MshError::DomainMismatch);
    }
    let stencil = HessianStencil::new(dom);
    let offsets = dom.stencil_offsets();
    let mut density = vec![f64::NAN; dom.len()];
    let mut mats = Vec::with_capacity(k);
    for p in dom.interior_indices() {
        mats.clear();
        for u in us {
            check_stencil(u, p, &offsets)?;
            mats.push(stencil.matrix(u.values(), p, u.value(p)));
        }
        density[p] = mixed_density_of(&mats, dom.n())?;
    }
    MeasureField::new(dom.clone(), k, density)
}

/// Mixed mass `Σ density·h^{2n}` over interior members of `mask`, computed
/// node by node; an empty function list gives the volume mass `n!·|mask|`.
pub fn mixed_mass(us: &[GridFunction], dom: &Arc<GridDomain>, mask: &NodeMask) -> Result<f64> {
    if !GridDomain::same_grid(dom, mask.domain()) || us.iter().any(|u| !GridDomain::same_grid(dom, u.domain())) {
        return Err(MshError::DomainMismatch);
    }
    if us.len() > dom.n() {
        return Err(MshError::Order { order: us.len(), lo: 0, hi: dom.n() });
    }
    let stencil = HessianStencil::new(dom);
    let mut mats = Vec::with_capacity(us.len());
    let mut acc = 0.0;
    for (p, &m) in mask.members().iter().enumerate() {
        if !m || dom.class(p) != NodeClass::Interior {
            continue;
        }
        mats.clear();
        for u in us {
            mats.push(stencil.matrix(u.values(), p, u.value(p)));
        }
        acc += mixed_density_of(&mats, dom.n())?;
    }
    Ok(acc * dom.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, sample_function, DomainSpec};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn small_spectra() {
        let a = HermitianMatrix::new(&[3.0, -1.0], &[c(0.0, 0.0)]).unwrap();
        assert_eq!(hermitian_eigenvalues(&a, JACOBI_TOL).unwrap(), vec![-1.0, 3.0]);
        let b = HermitianMatrix::new(&[0.0, 0.0], &[c(0.5, 0.0)]).unwrap();
        let l = hermitian_eigenvalues(&b, JACOBI_TOL).unwrap();
        assert!((l[0] + 0.5).abs() < 1e-14 && (l[1] - 0.5).abs() < 1e-14);
        let i3 = HermitianMatrix::identity(3);
        assert_eq!(hermitian_eigenvalues(&i3, JACOBI_TOL).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn complex_offdiagonal_spectrum() {
        // [[1, i],[−i, 1]] has eigenvalues 0 and 2
        let a = HermitianMatrix::new(&[1.0, 1.0], &[c(0.0, 1.0)]).unwrap();
        let l = hermitian_eigenvalues(&a, JACOBI_TOL).unwrap();
        assert!(l[0].abs() < 1e-14 && (l[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn esym_examples() {
        assert_eq!(elementary_symmetric(&[1.0, 1.0], 1).unwrap(), 2.0);
        assert_eq!(elementary_symmetric(&[1.0, 1.0], 2).unwrap(), 1.0);
        assert_eq!(elementary_symmetric(&[3.0, -1.0], 2).unwrap(), -3.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 0).unwrap(), 1.0);
        assert!(elementary_symmetric(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert!(gamma_test(&[1.0, 1.0], 2, 0.0).unwrap());
        assert!(gamma_test(&[3.0, -1.0], 1, 0.0).unwrap());
        assert!(!gamma_test(&[3.0, -1.0], 2, 0.0).unwrap());
        assert!(!gamma_test(&[-1.0, -1.0], 1, 0.0).unwrap());
        assert!(gamma_test(&[1.0], 2, 0.0).is_err());
    }

    fn ball2(res: usize) -> Arc<GridDomain> {
        Arc::new(build_domain(&DomainSpec::Ball { radius: 1.0 }, 2, res).unwrap())
    }

    #[test]
    fn quadratic_hessians() {
        let dom = ball2(11);
        let u = sample_function(|x| x[0] * x[2] + x[1] * x[3], &dom).unwrap();
        let f = complex_hessian(&u).unwrap();
        for (a, l) in f.matrices().iter().zip(f.lambdas()) {
            assert!(a.diag().iter().all(|d| d.abs() < 1e-12));
            assert!((a.offdiag()[0] - c(0.5, 0.0)).norm() < 1e-12);
            assert!((l[0] + 0.5).abs() < 1e-12 && (l[1] - 0.5).abs() < 1e-12);
        }
        let v = sample_function(|x| x[0] * x[0], &dom).unwrap();
        for a in complex_hessian(&v).unwrap().matrices() {
            assert!((a.diag()[0] - 0.5).abs() < 1e-12);
            assert!(a.diag()[1].abs() < 1e-12 && a.offdiag()[0].norm() < 1e-12);
        }
        // Im(z₁z̄₂) = y₁x₂ − x₁y₂ has u_{12̄} = −i/2
        let w = sample_function(|x| x[1] * x[2] - x[0] * x[3], &dom).unwrap();
        for a in complex_hessian(&w).unwrap().matrices() {
            assert!((a.offdiag()[0] - c(0.0, -0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn density_examples() {
        let dom = ball2(11);
        let r2 = sample_function(|x| x.iter().map(|v| v * v).sum(), &dom).unwrap();
        let z1 = sample_function(|x| x[0] * x[0] + x[1] * x[1], &dom).unwrap();
        let z2 = sample_function(|x| x[2] * x[2] + x[3] * x[3], &dom).unwrap();
        for (u, k, want) in [(&r2, 1, 2.0), (&r2, 2, 2.0), (&z1, 1, 1.0), (&z1, 2, 0.0)] {
            let d = hessian_density(u, k).unwrap();
            for p in dom.interior_indices() {
                assert!((d.density()[p] - want).abs() < 1e-10, "k={k}");
            }
        }
        let mixed = mixed_hessian_density(&[z1.clone(), z2], 2).unwrap();
        let mixed2 = mixed_hessian_density(&[r2, z1], 2).unwrap();
        for p in dom.interior_indices() {
            assert!((mixed.density()[p] - 1.0).abs() < 1e-10);
            assert!((mixed2.density()[p] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_with_zero_first_is_exactly_zero() {
        let dom = ball2(9);
        let zero = sample_function(|_| 0.0, &dom).unwrap();
        let u = sample_function(|x| 3.0 * x[0] * x[0] + x[1] * x[3], &dom).unwrap();
        let d = mixed_hessian_density(&[zero, u], 2).unwrap();
        assert!(dom.interior_indices().iter().all(|&p| d.density()[p] == 0.0));
    }

    #[test]
    fn order_and_domain_errors() {
        let dom = ball2(9);
        let u = sample_function(|_| 0.0, &dom).unwrap();
        assert!(hessian_density(&u, 0).is_err());
        assert!(hessian_density(&u, 3).is_err());
        let other = ball2(11);
        let v = sample_function(|_| 0.0, &other).unwrap();
        assert!(matches!(mixed_hessian_density(&[u, v], 2), Err(MshError::DomainMismatch)));
    }

    #[test]
    fn total_mass_additive() {
        let dom = ball2(11);
        let u = sample_function(|x| x.iter().map(|v| v * v).sum(), &dom).unwrap();
        let d = hessian_density(&u, 2).unwrap();
        let a = NodeMask::ball(dom.clone(), &[0.0; 4], 0.4);
        let b = NodeMask::interior(dom.clone()).difference(&a).unwrap();
        let whole = NodeMask::interior(dom.clone());
        let sum = d.total_mass(&a).unwrap() + d.total_mass(&b).unwrap();
        assert!((sum - d.total_mass(&whole).unwrap()).abs() <= 1e-12 * sum.abs());
        let expect = 2.0 * dom.interior_count() as f64 * dom.cell_volume();
        assert!((d.total_mass(&whole).unwrap() - expect).abs() < 1e-9);
    }

    fn brute_esym(l: &[f64], k: usize) -> f64 {
        let n = l.len();
        let mut s = 0.0;
        for bits in 0u32..(1 << n) {
            if bits.count_ones() as usize == k {
                s += (0..n).filter(|i| bits & (1 << i) != 0).map(|i| l[i]).product::<f64>();
            }
        }
        s
    }

    fn herm(n: usize, vals: &[f64]) -> HermitianMatrix {
        let m = n * (n - 1) / 2;
        let off: Vec<Complex64> = (0..m).map(|i| c(vals[n + 2 * i], vals[n + 2 * i + 1])).collect();
        HermitianMatrix::new(&vals[..n], &off).unwrap()
    }

    proptest! {
        #[test]
        fn esym_matches_subset_sum(l in prop::collection::vec(-5.0f64..5.0, 1..=4)) {
            for k in 0..=l.len() {
                let a = elementary_symmetric(&l, k).unwrap();
                let b = brute_esym(&l, k);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn jacobi_matches_minors(n in 1usize..=3, vals in prop::collection::vec(-3.0f64..3.0, 9)) {
            let a = herm(n, &vals);
            let l = hermitian_eigenvalues(&a, JACOBI_TOL).unwrap();
            prop_assert!(l.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((l.iter().sum::<f64>() - a.trace()).abs() <= 1e-10 * (1.0 + a.trace().abs()));
            for k in 1..=n {
                let e = elementary_symmetric(&l, k).unwrap();
                let m = a.principal_minor_sum(k);
                prop_assert!((e - m).abs() <= 1e-9 * (1.0 + a.frobenius_norm().powi(k as i32)));
            }
        }

        #[test]
        fn cone_is_convex(
            l1 in prop::collection::vec(-2.0f64..3.0, 3),
            l2 in prop::collection::vec(-2.0f64..3.0, 3),
            a in 0.0f64..4.0, b in 0.0f64..4.0, m in 1usize..=3,
        ) {
            // compare in a common eigenbasis: diagonal matrices
            let tol = 1e-9;
            if gamma_test(&l1, m, 0.0).unwrap() && gamma_test(&l2, m, 0.0).unwrap() {
                let mix: Vec<f64> = l1.iter().zip(&l2).map(|(x, y)| a * x + b * y).collect();
                prop_assert!(gamma_test(&mix, m, tol).unwrap());
            }
        }

        #[test]
        fn filtration_is_nested(l in prop::collection::vec(-2.0f64..3.0, 3), m in 1usize..=3) {
            if gamma_test(&l, m, 0.0).unwrap() {
                for k in 1..m {
                    prop_assert!(gamma_test(&l, k, 0.0).unwrap());
                }
            }
        }

        #[test]
        fn polarization_symmetric_and_multilinear(
            v1 in prop::collection::vec(-2.0f64..2.0, 9),
            v2 in prop::collection::vec(-2.0f64..2.0, 9),
            v3 in prop::collection::vec(-2.0f64..2.0, 9),
            a in 0.0f64..3.0, b in 0.0f64..3.0,
        ) {
            let (p, q, r) = (herm(3, &v1), herm(3, &v2), herm(3, &v3));
            let base = polarized_ek(&[p, q, r]).unwrap();
            for perm in [[q, p, r], [r, q, p], [p, r, q], [q, r, p], [r, p, q]] {
                prop_assert!((polarized_ek(&perm).unwrap() - base).abs() < 1e-10 * (1.0 + base.abs()));
            }
            let lhs = polarized_ek(&[p.scale(a).add(&r.scale(b)), q]).unwrap();
            let rhs = a * polarized_ek(&[p, q]).unwrap() + b * polarized_ek(&[r, q]).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
            let diag = polarized_ek(&[p, p]).unwrap();
            let l = hermitian_eigenvalues(&p, JACOBI_TOL).unwrap();
            prop_assert!((diag - 2.0 * elementary_symmetric(&l, 2).unwrap()).abs() < 1e-10 * (1.0 + diag.abs()));
        }
    }
}
