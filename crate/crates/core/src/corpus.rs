//! Analytic test functions: a serializable expression type and the fixed
//! ℂ² classification corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::RadialProfile;
use crate::error::{MshError, Result};

/// A closed-form function on ℝ^{2n}, evaluated pointwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// A named member of [`corpus`].
    Corpus { id: String },
    Constant { value: f64 },
    /// `Σ h_{jk} z_j z̄_k + constant`, whose complex Hessian is `(h_{jk})`.
    /// `offdiag` is the upper triangle as `[re, im]` pairs, row by row.
    HermitianQuadratic {
        diag: Vec<f64>,
        #[serde(default)]
        offdiag: Vec<[f64; 2]>,
        #[serde(default)]
        constant: f64,
    },
    /// `xᵀ M x + constant` in real coordinates.
    RealQuadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    /// The radial extremal profile of order `m` for `B̄_r ⊂ B_R`.
    RadialExtremal { m: usize, r: f64, big_r: f64 },
    Max { of: Vec<FunctionSpec> },
    Sum { of: Vec<FunctionSpec> },
    Scaled { factor: f64, of: Box<FunctionSpec> },
    Shifted { offset: f64, of: Box<FunctionSpec> },
    Exp { of: Box<FunctionSpec> },
}

impl FunctionSpec {
    pub fn corpus(id: &str) -> Self {
        FunctionSpec::Corpus { id: id.to_string() }
    }

    /// Check shapes against the complex dimension and resolve corpus names.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FunctionSpec::Corpus { id } => {
                let member = corpus_member(id)?;
                if n != 2 {
                    return Err(MshError::Precondition(format!("corpus member {id} lives on C^2")));
                }
                member.function.validate(n)
            }
            FunctionSpec::Constant { .. } => Ok(()),
            FunctionSpec::HermitianQuadratic { diag, offdiag, .. } => {
                if diag.len() != n || offdiag.len() != n * (n - 1) / 2 {
                    return Err(MshError::Precondition("hermitian quadratic has the wrong shape".into()));
                }
                Ok(())
            }
            FunctionSpec::RealQuadratic { matrix, .. } => {
                if matrix.len() != 2 * n || matrix.iter().any(|r| r.len() != 2 * n) {
                    return Err(MshError::Precondition("real quadratic must be 2n x 2n".into()));
                }
                Ok(())
            }
            FunctionSpec::RadialExtremal { m, r, big_r } => RadialProfile::new(n, *m, *r, *big_r).map(|_| ()),
            FunctionSpec::Max { of } | FunctionSpec::Sum { of } => {
                if of.is_empty() {
                    return Err(MshError::Empty("function list"));
                }
                of.iter().try_for_each(|f| f.validate(n))
            }
            FunctionSpec::Scaled { of, .. } | FunctionSpec::Shifted { of, .. } | FunctionSpec::Exp { of } => {
                of.validate(n)
            }
        }
    }

    /// Value at the real point `x = (x₁, y₁, …, x_n, y_n)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Corpus { id } => match corpus_member(id) {
                Ok(m) => m.function.eval(x),
                Err(_) => f64::NAN,
            },
            FunctionSpec::Constant { value } => *value,
            FunctionSpec::HermitianQuadratic { diag, offdiag, constant } => {
                let n = diag.len();
                let mut acc = *constant;
                for (j, h) in diag.iter().enumerate() {
                    acc += h * (x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1]);
                }
                let mut slot = 0;
                for j in 0..n {
                    for k in (j + 1)..n {
                        let [a, b] = offdiag[slot];
                        slot += 1;
                        let (xj, yj, xk, yk) = (x[2 * j], x[2 * j + 1], x[2 * k], x[2 * k + 1]);
                        let re = xj * xk + yj * yk;
                        let im = yj * xk - xj * yk;
                        acc += 2.0 * (a * re - b * im);
                    }
                }
                acc
            }
            FunctionSpec::RealQuadratic { matrix, constant } => {
                let mut acc = *constant;
                for (i, row) in matrix.iter().enumerate() {
                    for (j, m) in row.iter().enumerate() {
                        acc += m * x[i] * x[j];
                    }
                }
                acc
            }
            FunctionSpec::RadialExtremal { m, r, big_r } => {
                let n = x.len() / 2;
                match RadialProfile::new(n, *m, *r, *big_r) {
                    Ok(p) => p.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt()),
                    Err(_) => f64::NAN,
                }
            }
            FunctionSpec::Max { of } => of.iter().map(|f| f.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            FunctionSpec::Sum { of } => of.iter().map(|f| f.eval(x)).sum(),
            FunctionSpec::Scaled { factor, of } => factor * of.eval(x),
            FunctionSpec::Shifted { offset, of } => offset + of.eval(x),
            FunctionSpec::Exp { of } => of.eval(x).exp(),
        }
    }
}

/// A corpus function with its expected position in the m-sh filtration.
#[derive(Debug, Clone)]
pub struct CorpusMember {
    pub id: &'static str,
    pub description: &'static str,
    pub expected_largest_m: usize,
    pub function: FunctionSpec,
}

fn hq(d1: f64, d2: f64, re: f64) -> FunctionSpec {
    FunctionSpec::HermitianQuadratic { diag: vec![d1, d2], offdiag: vec![[re, 0.0]], constant: 0.0 }
}

/// Twelve functions on ℂ² spanning every level of the filtration.
pub fn corpus() -> Vec<CorpusMember> {
    let m = |id, description, expected_largest_m, function| CorpusMember {
        id,
        description,
        expected_largest_m,
        function,
    };
    vec![
        m("norm2", "|z|^2", 2, hq(1.0, 1.0, 0.0)),
        m("z1_sq", "|z1|^2", 2, hq(1.0, 0.0, 0.0)),
        m("indef_3_1", "3|z1|^2 - |z2|^2", 1, hq(3.0, -1.0, 0.0)),
        m("neg_norm2", "-|z|^2", 0, hq(-1.0, -1.0, 0.0)),
        m("re_z1z2bar", "Re(z1 conj z2)", 1, hq(0.0, 0.0, 0.5)),
        m(
            "x1_sq",
            "x1^2",
            2,
            FunctionSpec::RealQuadratic {
                matrix: (0..4).map(|i| (0..4).map(|j| if i == 0 && j == 0 { 1.0 } else { 0.0 }).collect()).collect(),
                constant: 0.0,
            },
        ),
        m("zero", "0", 2, FunctionSpec::Constant { value: 0.0 }),
        m("diag_2_1", "2|z1|^2 + |z2|^2", 2, hq(2.0, 1.0, 0.0)),
        m("indef_1_3", "|z1|^2 - 3|z2|^2", 0, hq(1.0, -3.0, 0.0)),
        m("norm2_plus_re", "|z|^2 + Re(z1 conj z2)", 2, hq(1.0, 1.0, 0.5)),
        m("norm2_plus_3re", "|z|^2 + 3 Re(z1 conj z2)", 1, hq(1.0, 1.0, 1.5)),
        m("exp_norm2", "exp(|z|^2)", 2, FunctionSpec::Exp { of: Box::new(hq(1.0, 1.0, 0.0)) }),
    ]
}

pub fn corpus_member(id: &str) -> Result<CorpusMember> {
    corpus()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or_else(|| MshError::Precondition(format!("unknown corpus id {id}")))
}

/// Random Hermitian quadratic `Σ h_{jk} z_j z̄_k` with entries in [-1, 1].
pub fn random_hermitian_quadratic<R: Rng>(rng: &mut R, n: usize) -> FunctionSpec {
    let diag = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let offdiag = (0..n * (n - 1) / 2)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    FunctionSpec::HermitianQuadratic { diag, offdiag, constant: 0.0 }
}

/// Positive definite Hermitian quadratic `z ↦ |Lz|² + ε|z|²`, hence in
/// every `sh_m`.
pub fn random_psh_quadratic<R: Rng>(rng: &mut R, n: usize) -> FunctionSpec {
    let mut l = vec![[0.0f64; 2]; n * n];
    for e in l.iter_mut() {
        *e = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    }
    // H = L^* L + 0.1 I
    let entry = |j: usize, k: usize| -> [f64; 2] {
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..n {
            let [a, b] = l[i * n + j];
            let [c, d] = l[i * n + k];
            // conj(a + ib)·(c + id)
            re += a * c + b * d;
            im += a * d - b * c;
        }
        [re, im]
    };
    let diag = (0..n).map(|j| entry(j, j)[0] + 0.1).collect();
    let mut offdiag = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            offdiag.push(entry(j, k));
        }
    }
    FunctionSpec::HermitianQuadratic { diag, offdiag, constant: 0.0 }
}

/// Seeded family of `count` plurisubharmonic quadratics.
pub fn psh_quadratic_family(n: usize, count: usize, seed: u64) -> Vec<FunctionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_psh_quadratic(&mut rng, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: [f64; 4]) -> Vec<f64> {
        x.to_vec()
    }

    #[test]
    fn hermitian_quadratic_matches_complex_formula() {
        let f = FunctionSpec::HermitianQuadratic {
            diag: vec![2.0, -1.0],
            offdiag: vec![[0.3, -0.7]],
            constant: 0.5,
        };
        let x = pt([0.2, -0.4, 0.9, 0.1]);
        let (z1r, z1i, z2r, z2i) = (x[0], x[1], x[2], x[3]);
        // h12 z1 conj(z2) + conj(h12) z2 conj(z1)
        let (hr, hi) = (0.3, -0.7);
        let w_re = z1r * z2r + z1i * z2i;
        let w_im = z1i * z2r - z1r * z2i;
        let cross = 2.0 * (hr * w_re - hi * w_im);
        let want = 2.0 * (z1r * z1r + z1i * z1i) - (z2r * z2r + z2i * z2i) + cross + 0.5;
        assert!((f.eval(&x) - want).abs() < 1e-14);
    }

    #[test]
    fn corpus_is_complete_and_valid() {
        let c = corpus();
        assert_eq!(c.len(), 12);
        for m in &c {
            m.function.validate(2).unwrap();
        }
        assert_eq!(FunctionSpec::corpus("norm2").eval(&pt([1.0, 1.0, 0.0, 1.0])), 3.0);
        assert!(corpus_member("nope").is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let f = FunctionSpec::Max {
            of: vec![
                FunctionSpec::Shifted { offset: -0.5, of: Box::new(FunctionSpec::corpus("norm2")) },
                FunctionSpec::Scaled { factor: 2.0, of: Box::new(FunctionSpec::corpus("z1_sq")) },
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        let back: FunctionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn psh_family_is_deterministic() {
        assert_eq!(psh_quadratic_family(2, 3, 7), psh_quadratic_family(2, 3, 7));
        assert_ne!(psh_quadratic_family(2, 3, 7), psh_quadratic_family(2, 3, 8));
    }
}
