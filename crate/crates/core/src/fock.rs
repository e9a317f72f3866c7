//! Pfaffian computation, Wick's formula, polarizations of the generator
//! span, and the Fock-spectrum identity.
//!
//! The Pfaffian uses Parlett-Reid-style skew-symmetric elimination with
//! partial pivoting, O(n^3); the factorial permutation sum stays available
//! in [`reference`] as a test oracle for small sizes.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use serde::Serialize;

use crate::transfer::{GeneratorSet, InducedRotation, TransferOperator};
use crate::{Error, Result, C64};

/// Square complex matrix with A = -A^T enforced at construction.
#[derive(Clone, Debug)]
pub struct AntisymmetricMatrix {
    pub dim: usize,
    pub entries: Array2<C64>,
    /// Largest entry of (A_input + A_input^T)/2 removed by antisymmetrization.
    pub antisym_defect: f64,
}

impl AntisymmetricMatrix {
    pub fn new(input: Array2<C64>) -> Result<Self> {
        let dim = input.nrows();
        if input.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: input.ncols(),
            });
        }
        let mut entries = Array2::<C64>::zeros((dim, dim));
        let mut defect = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let anti = 0.5 * (input[[i, j]] - input[[j, i]]);
                let sym = 0.5 * (input[[i, j]] + input[[j, i]]);
                defect = defect.max(sym.norm());
                entries[[i, j]] = anti;
            }
        }
        Ok(AntisymmetricMatrix {
            dim,
            entries,
            antisym_defect: defect,
        })
    }

    /// Build from the strict upper triangle (i < j); lower filled by
    /// antisymmetry.
    pub fn from_upper(dim: usize, mut upper: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = upper(i, j);
                entries[[i, j]] = v;
                entries[[j, i]] = -v;
            }
        }
        AntisymmetricMatrix {
            dim,
            entries,
            antisym_defect: 0.0,
        }
    }
}

/// Pfaffian by skew-symmetric elimination with partial pivoting.
pub fn pfaffian(a: &AntisymmetricMatrix) -> Result<C64> {
    if a.dim % 2 != 0 {
        return Err(Error::Domain(format!(
            "pfaffian needs even dimension, got {}",
            a.dim
        )));
    }
    let n = a.dim;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut m = a.entries.clone();
    let mut pf = C64::new(1.0, 0.0);
    for k in 0..(n - 1) {
        if k % 2 == 0 {
            // Pivot: bring the largest |m[i, k]| (i > k) into row k+1.
            let mut best = k + 1;
            let mut best_val = m[[k + 1, k]].norm();
            for i in (k + 2)..n {
                if m[[i, k]].norm() > best_val {
                    best = i;
                    best_val = m[[i, k]].norm();
                }
            }
            if best != k + 1 {
                swap_rows_cols(&mut m, k + 1, best);
                pf = -pf;
            }
            let pivot = m[[k + 1, k]];
            if pivot.norm() == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            pf *= m[[k, k + 1]];
            // Eliminate column k below row k+1 (and symmetrically).
            for i in (k + 2)..n {
                let factor = m[[i, k]] / pivot;
                for j in 0..n {
                    let delta = factor * m[[k + 1, j]];
                    m[[i, j]] = m[[i, j]] - delta;
                }
                for j in 0..n {
                    let delta = factor * m[[j, k + 1]];
                    m[[j, i]] = m[[j, i]] - delta;
                }
            }
        }
    }
    Ok(pf)
}

/// Wick's formula: the 2m-point vacuum expectation equals the Pfaffian of
/// the pairwise table. An odd table size returns 0 with the parity flag set.
#[derive(Clone, Debug, Serialize)]
pub struct WickValue {
    pub value: (f64, f64),
    pub odd_parity: bool,
}

pub fn wick_correlation(pair_table: &AntisymmetricMatrix) -> Result<WickValue> {
    if pair_table.dim % 2 == 1 {
        return Ok(WickValue {
            value: (0.0, 0.0),
            odd_parity: true,
        });
    }
    let v = pfaffian(pair_table)?;
    Ok(WickValue {
        value: (v.re, v.im),
        odd_parity: false,
    })
}

fn swap_rows_cols(m: &mut Array2<C64>, a: usize, b: usize) {
    let n = m.nrows();
    for j in 0..n {
        let t = m[[a, j]];
        m[[a, j]] = m[[b, j]];
        m[[b, j]] = t;
    }
    for i in 0..n {
        let t = m[[i, a]];
        m[[i, a]] = m[[i, b]];
        m[[i, b]] = t;
    }
}

/// Where a polarization came from.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationSource {
    /// span{p_k - i q_k} / span{p_k + i q_k}.
    LowTemperature,
    /// span{V^{-N} (p_k - i q_k) V^N} / span{p_k + i q_k}.
    VanishingTemperature,
    /// Eigenvectors of T_V split by |lambda| below/above one.
    Physical,
}

/// A polarization of the generator span, stored as coefficient vectors over
/// the (p_0..p_{n-1}, q_0..q_{n-1}) basis, except for the vanishing-
/// temperature source whose creation side is stored as explicit matrices.
pub struct Polarization {
    pub source: PolarizationSource,
    /// Creation subspace basis (coefficients over the generator basis).
    pub w_cr: Vec<Array1<C64>>,
    pub w_ann: Vec<Array1<C64>>,
    /// Explicit operator form of the creation basis when coefficients over
    /// the generator span do not exist (vanishing-temperature source).
    pub w_cr_ops: Option<Vec<Array2<C64>>>,
    /// max |(w, w')| within each subspace, with (.,.) the anticommutator
    /// form on generator coefficients.
    pub isotropy_defect: f64,
    /// max off-scalar part of the anticommutators defining the form.
    pub form_defect: f64,
}

/// Gram matrix of the anticommutator form on the generator basis:
/// (g_i, g_j) = scalar part of {g_i, g_j}; defect = largest non-scalar part.
pub fn generator_gram(g: &GeneratorSet) -> (Array2<C64>, f64) {
    let n = g.n();
    let all: Vec<&Array2<C64>> = g.p.iter().chain(g.q.iter()).collect();
    let dim = all[0].nrows();
    let mut gram = Array2::<C64>::zeros((2 * n, 2 * n));
    let mut defect = 0.0f64;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let anti = all[i].dot(all[j]) + all[j].dot(all[i]);
            let scalar = {
                let mut tr = C64::new(0.0, 0.0);
                for d in 0..dim {
                    tr += anti[[d, d]];
                }
                tr / C64::new(dim as f64, 0.0)
            };
            for a in 0..dim {
                for b in 0..dim {
                    let expect = if a == b { scalar } else { C64::new(0.0, 0.0) };
                    defect = defect.max((anti[[a, b]] - expect).norm());
                }
            }
            gram[[i, j]] = scalar;
        }
    }
    (gram, defect)
}

/// Bilinear (not sesquilinear) form value u^T G v.
fn form(gram: &Array2<C64>, u: &Array1<C64>, v: &Array1<C64>) -> C64 {
    let gu = gram.dot(v);
    u.iter().zip(gu.iter()).map(|(a, b)| a * b).sum()
}

fn isotropy_defect(gram: &Array2<C64>, vs: &[Array1<C64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, u) in vs.iter().enumerate() {
        for v in vs.iter().skip(i) {
            worst = worst.max(form(gram, u, v).norm());
        }
    }
    worst
}

/// Low-temperature polarization: W_cr = span{p_k - i q_k}.
pub fn polarize_low_temperature(g: &GeneratorSet) -> Polarization {
    let n = g.n();
    let i = C64::new(0.0, 1.0);
    let mut w_cr = Vec::new();
    let mut w_ann = Vec::new();
    for k in 0..n {
        let mut cr = Array1::<C64>::zeros(2 * n);
        cr[k] = C64::new(1.0, 0.0);
        cr[n + k] = -i;
        w_cr.push(cr);
        let mut ann = Array1::<C64>::zeros(2 * n);
        ann[k] = C64::new(1.0, 0.0);
        ann[n + k] = i;
        w_ann.push(ann);
    }
    let (gram, form_defect) = generator_gram(g);
    let iso = isotropy_defect(&gram, &w_cr).max(isotropy_defect(&gram, &w_ann));
    Polarization {
        source: PolarizationSource::LowTemperature,
        w_cr,
        w_ann,
        w_cr_ops: None,
        isotropy_defect: iso,
        form_defect,
    }
}

/// Vanishing-temperature polarization: creation side conjugated by V^N.
/// The conjugated operators generally leave the generator span, so the
/// creation basis is kept as explicit matrices.
pub fn polarize_vanishing_temperature(
    g: &GeneratorSet,
    v: &TransferOperator,
    n_power: usize,
) -> Result<Polarization> {
    use ndarray_linalg::Inverse;
    let n = g.n();
    let i = C64::new(0.0, 1.0);
    let vc = v.matrix.mapv(|x| C64::new(x, 0.0));
    let v_invr = v
        .matrix
        .inv()
        .map_err(|e| Error::Numerical(format!("V not invertible: {e}")))?;
    let v_inv = v_invr.mapv(|x| C64::new(x, 0.0));
    let mut vn = Array2::<C64>::eye(v.dim);
    let mut vn_inv = Array2::<C64>::eye(v.dim);
    for _ in 0..n_power {
        vn = vn.dot(&vc);
        vn_inv = vn_inv.dot(&v_inv);
    }
    let mut ops = Vec::new();
    let mut w_ann = Vec::new();
    for k in 0..n {
        let cr = &g.p[k] - &g.q[k].mapv(|x| x * i);
        ops.push(vn_inv.dot(&cr).dot(&vn));
        let mut ann = Array1::<C64>::zeros(2 * n);
        ann[k] = C64::new(1.0, 0.0);
        ann[n + k] = i;
        w_ann.push(ann);
    }
    let (gram, form_defect) = generator_gram(g);
    let iso = isotropy_defect(&gram, &w_ann);
    Ok(Polarization {
        source: PolarizationSource::VanishingTemperature,
        w_cr: Vec::new(),
        w_ann,
        w_cr_ops: Some(ops),
        isotropy_defect: iso,
        form_defect,
    })
}

/// Physical polarization from the induced rotation: eigenvectors with
/// |lambda| < 1 span the creation side, |lambda| > 1 the annihilation side.
/// Eigenvalues on the unit circle (within `tolerance`) make the split
/// impossible.
pub fn polarize_physical(
    g: &GeneratorSet,
    rotation: &InducedRotation,
    tolerance: f64,
) -> Result<Polarization> {
    let n = g.n();
    // T_V was expressed in the (psi, psibar) basis; convert eigenvectors
    // back to generator coefficients: psi_k = (i/sqrt2)(p_k + q_k),
    // psibar_k = (1/sqrt2)(p_k - q_k).
    let (eigs, vecs) = rotation
        .matrix
        .eig()
        .map_err(|e| Error::Numerical(format!("T_V eigensolver failed: {e}")))?;
    let i = C64::new(0.0, 1.0);
    let r2 = 1.0 / 2f64.sqrt();
    let mut w_cr = Vec::new();
    let mut w_ann = Vec::new();
    for (idx, lambda) in eigs.iter().enumerate() {
        if (lambda.norm() - 1.0).abs() <= tolerance {
            return Err(Error::CannotPolarize(tolerance));
        }
        // Coefficients over (psi, psibar).
        let mut coeff = Array1::<C64>::zeros(2 * n);
        for k in 0..n {
            let a = vecs[[k, idx]]; // psi_k component
            let b = vecs[[n + k, idx]]; // psibar_k component
            coeff[k] = a * i * r2 + b * r2; // p_k component
            coeff[n + k] = a * i * r2 - b * r2; // q_k component
        }
        if lambda.norm() < 1.0 {
            w_cr.push(coeff);
        } else {
            w_ann.push(coeff);
        }
    }
    if w_cr.len() != n || w_ann.len() != n {
        return Err(Error::CannotPolarize(tolerance));
    }
    let (gram, form_defect) = generator_gram(g);
    let iso = isotropy_defect(&gram, &w_cr).max(isotropy_defect(&gram, &w_ann));
    Ok(Polarization {
        source: PolarizationSource::Physical,
        w_cr,
        w_ann,
        w_cr_ops: None,
        isotropy_defect: iso,
        form_defect,
    })
}

/// The Fock spectrum list Lambda0 * prod_{s in S} lambda_s^{-1} over index
/// subsets S, sorted descending by modulus and truncated to `max_terms`.
#[derive(Clone, Debug, Serialize)]
pub struct FockSpectrum {
    pub lambda0: (f64, f64),
    pub values: Vec<(f64, f64)>,
    pub truncated: bool,
}

pub fn fock_spectrum(lambda0: C64, lambdas: &[C64], max_terms: usize) -> FockSpectrum {
    let total = 1usize << lambdas.len();
    let mut values: Vec<C64> = Vec::with_capacity(total);
    for mask in 0..total {
        let mut v = lambda0;
        for (idx, l) in lambdas.iter().enumerate() {
            if mask >> idx & 1 == 1 {
                v /= *l;
            }
        }
        values.push(v);
    }
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
    });
    let truncated = values.len() > max_terms;
    values.truncate(max_terms);
    FockSpectrum {
        lambda0: (lambda0.re, lambda0.im),
        values: values.iter().map(|z| (z.re, z.im)).collect(),
        truncated,
    }
}

pub mod reference {
    //! Brute-force reference oracles for the Pfaffian suites.

    use super::*;

    /// The factorial-sum definition
    /// Pf[A] = 1/(2^m m!) sum_pi sgn(pi) prod A_{pi(2s-1), pi(2s)}.
    pub fn pfaffian_permutation_sum(a: &AntisymmetricMatrix) -> Result<C64> {
        if a.dim % 2 != 0 {
            return Err(Error::Domain("even dimension required".into()));
        }
        let n = a.dim;
        let m = n / 2;
        let mut indices: Vec<usize> = (0..n).collect();
        let mut total = C64::new(0.0, 0.0);
        permute(&mut indices, 0, &mut |perm, sign| {
            let mut prod = C64::new(1.0, 0.0);
            for s in 0..m {
                prod *= a.entries[[perm[2 * s], perm[2 * s + 1]]];
            }
            total += C64::new(sign, 0.0) * prod;
        });
        let mut factorial = 1.0;
        for k in 2..=m {
            factorial *= k as f64;
        }
        Ok(total / C64::new(2f64.powi(m as i32) * factorial, 0.0))
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize], f64)) {
        if k == v.len() {
            // Compute the permutation sign.
            let mut sign = 1.0;
            let mut seen = vec![false; v.len()];
            for start in 0..v.len() {
                if seen[start] {
                    continue;
                }
                let mut len = 0;
                let mut cur = start;
                while !seen[cur] {
                    seen[cur] = true;
                    cur = v[cur];
                    len += 1;
                }
                if len % 2 == 0 {
                    sign = -sign;
                }
            }
            f(v, sign);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }
}
