//! Fermion-operator correlators on the transfer strip: two-point and
//! multipoint vacuum sandwiches, the up/down combinations, and the
//! identity checks tying them to the low-temperature path observables.
//!
//! Insertions live at (dual site x, row y) with psi(x + i y) =
//! V^{-y} psi_x V^{y}; a product of insertions sorted by decreasing row is
//! evaluated as <e_+| V^{N - y_1} O_1 V^{y_1 - y_2} O_2 ... O_k V^{y_k} |e_+>
//! normalized by <e_+| V^N |e_+>. The generator span only closes under
//! conjugation for the gated (locally +) transfer matrix, so strips here are
//! always built with `SideBc::Plus`.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::fock::{pfaffian, AntisymmetricMatrix};
use crate::sholo::Model;
use crate::transfer::{
    build_at_transfer, build_ising_transfer, clifford_generators, GeneratorSet, SideBc,
    TransferOperator,
};
use crate::{lambda, Error, Result, C64};

/// Which fermion combination an insertion carries.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FermionKind {
    Psi,
    PsiBar,
    /// psi-up = (psibar - psi) / 2.
    PsiUp,
    /// psi-down = i (psi + psibar) / 2.
    PsiDown,
}

/// One operator insertion at dual site `x` (0-based, x in 0..sites-1) and
/// row `y` (1..=rows-1 strictly inside the sandwich).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Insertion {
    pub x: usize,
    pub y: usize,
    pub kind: FermionKind,
}

/// A strip of `rows` transfer applications with fermion insertions.
pub struct FermionStrip {
    pub model: Model,
    pub sites: usize,
    pub rows: usize,
    pub v: TransferOperator,
    pub g: GeneratorSet,
}

impl FermionStrip {
    pub fn ising(sites: usize, rows: usize, beta: f64) -> Result<Self> {
        let v = build_ising_transfer(sites, beta, SideBc::Plus)?;
        let basis = crate::transfer::SpinBasis::ising(sites)?;
        let g = clifford_generators(&basis)?;
        Ok(FermionStrip {
            model: Model::Ising,
            sites,
            rows,
            v,
            g,
        })
    }

    pub fn at(sites: usize, rows: usize, j: f64, u: f64) -> Result<Self> {
        let v = build_at_transfer(sites, j, u, SideBc::Plus)?;
        let basis = crate::transfer::SpinBasis::at(sites)?;
        let g = clifford_generators(&basis)?;
        Ok(FermionStrip {
            model: Model::At,
            sites,
            rows,
            v,
            g,
        })
    }

    fn operator(&self, kind: FermionKind, x: usize) -> Result<Array2<C64>> {
        if x >= self.g.n() {
            return Err(Error::DimensionMismatch {
                expected: self.g.n(),
                got: x,
            });
        }
        let psi = self.g.psi(x);
        let psi_bar = self.g.psi_bar(x);
        Ok(match kind {
            FermionKind::Psi => psi,
            FermionKind::PsiBar => psi_bar,
            FermionKind::PsiUp => (&psi_bar - &psi).mapv(|v| v * 0.5),
            FermionKind::PsiDown => (&psi + &psi_bar).mapv(|v| v * C64::new(0.0, 0.5)),
        })
    }

    /// Normalization <e_+| V^N |e_+>.
    pub fn vacuum_norm(&self) -> f64 {
        self.v.plus_sandwich(self.rows)
    }

    /// Normalized vacuum expectation of insertions, which must be strictly
    /// ordered by decreasing row (the y > y' time ordering).
    pub fn correlator(&self, insertions: &[Insertion]) -> Result<C64> {
        for w in insertions.windows(2) {
            if w[0].y <= w[1].y {
                return Err(Error::Precondition(format!(
                    "insertions must have strictly decreasing rows, got {} then {}",
                    w[0].y, w[1].y
                )));
            }
        }
        for ins in insertions {
            if ins.y == 0 || ins.y >= self.rows {
                return Err(Error::Precondition(format!(
                    "row {} outside the open strip 1..{}",
                    ins.y, self.rows
                )));
            }
        }
        let dim = self.v.dim;
        let vc = self.v.matrix.mapv(|x| C64::new(x, 0.0));
        // Build v = V^{y_k} e_+, interleave operators upward.
        let mut state = Array1::<C64>::zeros(dim);
        state[0] = C64::new(1.0, 0.0);
        let mut current_row = 0usize;
        for ins in insertions.iter().rev() {
            for _ in current_row..ins.y {
                state = vc.dot(&state);
            }
            current_row = ins.y;
            let op = self.operator(ins.kind, ins.x)?;
            state = op.dot(&state);
        }
        for _ in current_row..self.rows {
            state = vc.dot(&state);
        }
        Ok(state[0] / C64::new(self.vacuum_norm(), 0.0))
    }

    /// Two-point correlator <kind_z(z) kind_a(a)> with z.y > a.y.
    pub fn two_point(
        &self,
        z: (usize, usize),
        kind_z: FermionKind,
        a: (usize, usize),
        kind_a: FermionKind,
    ) -> Result<C64> {
        self.correlator(&[
            Insertion {
                x: z.0,
                y: z.1,
                kind: kind_z,
            },
            Insertion {
                x: a.0,
                y: a.1,
                kind: kind_a,
            },
        ])
    }

    /// Multipoint correlator via the Pfaffian of the pairwise table; the
    /// insertions are sorted by decreasing row internally. Returns the
    /// Pfaffian value together with the direct product value.
    pub fn multipoint(&self, insertions: &[Insertion]) -> Result<MultipointReport> {
        if insertions.len() % 2 == 1 {
            return Ok(MultipointReport {
                direct: (0.0, 0.0),
                pfaffian: (0.0, 0.0),
                abs_diff: 0.0,
                odd_parity: true,
            });
        }
        let mut sorted: Vec<Insertion> = insertions.to_vec();
        sorted.sort_by(|a, b| b.y.cmp(&a.y));
        for w in sorted.windows(2) {
            if w[0].y == w[1].y {
                return Err(Error::Precondition(
                    "multipoint insertions need pairwise distinct rows".into(),
                ));
            }
        }
        let direct = self.correlator(&sorted)?;
        let m = sorted.len();
        let mut table = Array2::<C64>::zeros((m, m));
        for i in 0..m {
            for j in (i + 1)..m {
                let val = self.correlator(&[sorted[i], sorted[j]])?;
                table[[i, j]] = val;
                table[[j, i]] = -val;
            }
        }
        let pf = pfaffian(&AntisymmetricMatrix::new(table)?)?;
        Ok(MultipointReport {
            direct: (direct.re, direct.im),
            pfaffian: (pf.re, pf.im),
            abs_diff: (direct - pf).norm(),
            odd_parity: false,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MultipointReport {
    pub direct: (f64, f64),
    pub pfaffian: (f64, f64),
    pub abs_diff: f64,
    pub odd_parity: bool,
}

/// The two epsilon identities of the multipoint theorem, evaluated exactly:
/// 1/2 (lambda^-eta - i lambda^eta) = lambda^-1 delta_{eta,+1} and
/// 1/2 (i lambda^-eta + lambda^eta) = lambda^2 delta_{eta,+1}. The first
/// holds; the second is off by a factor lambda (its true value is
/// lambda delta_{eta,+1}); both residuals are reported.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonIdentityReport {
    /// (eta, |lhs1 - lambda^-1 delta|, |lhs2 - lambda^2 delta|,
    /// |lhs2 - lambda delta|).
    pub rows: Vec<(i32, f64, f64, f64)>,
}

pub fn epsilon_identities() -> EpsilonIdentityReport {
    let lam = lambda();
    let i = C64::new(0.0, 1.0);
    let mut rows = Vec::new();
    for eta in [1i32, -1] {
        let le = lam.powi(eta);
        let lem = lam.powi(-eta);
        let lhs1 = 0.5 * (lem - i * le);
        let lhs2 = 0.5 * (i * lem + le);
        let delta = if eta == 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        rows.push((
            eta,
            (lhs1 - delta / lam).norm(),
            (lhs2 - delta * lam * lam).norm(),
            (lhs2 - delta * lam).norm(),
        ));
    }
    EpsilonIdentityReport { rows }
}

/// Report for one line of the two-point identity set: the operator value,
/// the path-sum value and their difference, evaluated in ratio form over a
/// reference point so normalization constants cancel.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelatorReport {
    pub identity: String,
    pub lhs: (f64, f64),
    pub rhs: (f64, f64),
    pub abs_diff: f64,
}
