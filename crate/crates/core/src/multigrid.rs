//! Multigrid-preconditioned conjugate gradients for the order-1 envelope,
//! where the one-node update reduces to the discrete mean-value property.
//!
//! The operator on free nodes is `(Ax)_p = 2d·x_p − Σ_{free q ~ p} x_q`,
//! with `d` the number of real axes and `~` the axis neighbours.

use crate::grid::GridDomain;

const PRE_SWEEPS: usize = 2;
const COARSE_SWEEPS: usize = 40;
const MAX_PCG_ITERS: usize = 200;
const PCG_RTOL: f64 = 1e-12;

struct Level {
    dims: Vec<usize>,
    strides: Vec<usize>,
    free: Vec<bool>,
}

impl Level {
    fn len(&self) -> usize {
        self.free.len()
    }

    fn d(&self) -> usize {
        self.dims.len()
    }

    fn coarsen(&self) -> Option<Level> {
        if self.dims.iter().any(|&n| (n - 1) % 2 != 0 || n < 7) {
            return None;
        }
        let dims: Vec<usize> = self.dims.iter().map(|&n| (n - 1) / 2 + 1).collect();
        let strides = strides_of(&dims);
        let len: usize = dims.iter().product();
        let mut free = vec![false; len];
        let mut idx = vec![0usize; dims.len()];
        for (c, f) in free.iter_mut().enumerate() {
            let mut fine = 0;
            for a in 0..dims.len() {
                fine += 2 * idx[a] * self.strides[a];
            }
            *f = self.free[fine];
            advance(&mut idx, &dims, c + 1 < len);
        }
        if !free.iter().any(|&f| f) {
            return None;
        }
        Some(Level { dims, strides, free })
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let two_d = 2.0 * self.d() as f64;
        for p in 0..self.len() {
            if !self.free[p] {
                y[p] = 0.0;
                continue;
            }
            let mut s = two_d * x[p];
            for &st in &self.strides {
                if self.free[p + st] {
                    s -= x[p + st];
                }
                if self.free[p - st] {
                    s -= x[p - st];
                }
            }
            y[p] = s;
        }
    }

    /// One damped Jacobi sweep for `Ax = b`, using `t` as scratch.
    fn jacobi(&self, x: &mut [f64], b: &[f64], t: &mut [f64]) {
        let two_d = 2.0 * self.d() as f64;
        let weight = two_d / (two_d + 1.0);
        self.apply(x, t);
        for p in 0..self.len() {
            if self.free[p] {
                x[p] += weight * (b[p] - t[p]) / two_d;
            }
        }
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

/// Row-major odometer step.
#[inline]
fn advance(idx: &mut [usize], dims: &[usize], more: bool) {
    if !more {
        return;
    }
    for a in (0..dims.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// Visit the coarse parents of every free fine node with their bilinear weights.
fn for_each_parent(fine: &Level, coarse: &Level, mut f: impl FnMut(usize, usize, f64)) {
    let d = fine.d();
    let len = fine.len();
    let mut idx = vec![0usize; d];
    let mut lo = vec![0usize; d];
    let mut odd = vec![false; d];
    for p in 0..len {
        if fine.free[p] {
            let mut n_odd = 0;
            for a in 0..d {
                odd[a] = idx[a] % 2 == 1;
                lo[a] = idx[a] / 2;
                if odd[a] {
                    n_odd += 1;
                }
            }
            let w = 0.5f64.powi(n_odd);
            for combo in 0u32..(1 << d) {
                let mut c = 0;
                let mut ok = true;
                for a in 0..d {
                    let up = combo & (1 << a) != 0;
                    if up && !odd[a] {
                        ok = false;
                        break;
                    }
                    c += (lo[a] + usize::from(up)) * coarse.strides[a];
                }
                if ok && coarse.free[c] {
                    f(p, c, w);
                }
            }
        }
        advance(&mut idx, &fine.dims, p + 1 < len);
    }
}

struct Hierarchy {
    levels: Vec<Level>,
}

impl Hierarchy {
    fn new(top: Level) -> Self {
        let mut levels = vec![top];
        while let Some(next) = levels.last().unwrap().coarsen() {
            levels.push(next);
        }
        Hierarchy { levels }
    }

    /// Symmetric V-cycle approximating `A⁻¹ b` at level `l`, written to `x`.
    fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64], t: &mut [f64]) {
        let level = &self.levels[l];
        x.iter_mut().for_each(|v| *v = 0.0);
        if l + 1 == self.levels.len() {
            for _ in 0..COARSE_SWEEPS {
                level.jacobi(x, b, t);
            }
            return;
        }
        for _ in 0..PRE_SWEEPS {
            level.jacobi(x, b, t);
        }
        level.apply(x, t);
        for p in 0..level.len() {
            t[p] = if level.free[p] { b[p] - t[p] } else { 0.0 };
        }
        let coarse = &self.levels[l + 1];
        let scale = 4.0 * 0.5f64.powi(level.d() as i32);
        let mut bc = vec![0.0; coarse.len()];
        for_each_parent(level, coarse, |p, c, w| bc[c] += scale * w * t[p]);
        let mut xc = vec![0.0; coarse.len()];
        let mut tc = vec![0.0; coarse.len()];
        self.vcycle(l + 1, &bc, &mut xc, &mut tc);
        drop((bc, tc));
        for_each_parent(level, coarse, |p, c, w| x[p] += w * xc[c]);
        drop(xc);
        for _ in 0..PRE_SWEEPS {
            level.jacobi(x, b, t);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Replace the free entries of `values` by a certified discrete
/// subsolution close to the harmonic extension of the fixed entries:
/// `Σ_{q ~ p} w_q ≥ 2d·w_p` at every free node. Returns the number of
/// conjugate-gradient iterations.
pub(crate) fn harmonic_subsolution(dom: &GridDomain, free: Vec<bool>, values: &mut [f64]) -> usize {
    let d = dom.real_dim();
    let top = Level { dims: dom.dims().to_vec(), strides: dom.strides().to_vec(), free };
    let hier = Hierarchy::new(top);
    let level = &hier.levels[0];
    let len = level.len();
    let two_d = 2.0 * d as f64;

    // r = b − A x evaluated with the fixed values in place
    let residual = |vals: &[f64], r: &mut [f64]| {
        for p in 0..len {
            if !level.free[p] {
                r[p] = 0.0;
                continue;
            }
            let mut s = -two_d * vals[p];
            for &st in &level.strides {
                s += vals[p + st] + vals[p - st];
            }
            r[p] = s;
        }
    };

    let mut r = vec![0.0; len];
    residual(values, &mut r);
    let r0 = dot(&r, &r).sqrt();
    let mut iters = 0;
    if r0 > 0.0 {
        let mut t = vec![0.0; len];
        let mut z = vec![0.0; len];
        hier.vcycle(0, &r, &mut z, &mut t);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        // z doubles as the A·p buffer
        while iters < MAX_PCG_ITERS {
            level.apply(&p, &mut z);
            let pap = dot(&p, &z);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..len {
                values[i] += alpha * p[i];
                r[i] -= alpha * z[i];
            }
            iters += 1;
            if dot(&r, &r).sqrt() <= PCG_RTOL * r0 {
                break;
            }
            hier.vcycle(0, &r, &mut z, &mut t);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        drop((p, z, t));
    }

    // shift by a negative quadratic barrier whose discrete Laplacian is 2d
    residual(values, &mut r);
    let worst = (0..len).filter(|&p| level.free[p]).map(|p| r[p]).fold(0.0f64, f64::min);
    drop(r);
    if worst < 0.0 {
        let s = 2.0 * (-worst) / two_d;
        let centre: Vec<f64> = dom.dims().iter().map(|&n| (n as f64 - 1.0) / 2.0).collect();
        // nonpositive on the whole lattice, so fixed neighbours only help
        let big: f64 = centre.iter().map(|c| c * c).sum();
        let mut idx = vec![0usize; d];
        for p in 0..len {
            if level.free[p] {
                let q: f64 = idx.iter().zip(&centre).map(|(&i, c)| (i as f64 - c).powi(2)).sum();
                values[p] += s * (q - big);
            }
            advance(&mut idx, &level.dims, p + 1 < len);
        }
    }
    for p in 0..len {
        if level.free[p] {
            values[p] = values[p].clamp(-1.0, 0.0);
        }
    }
    iters
}
