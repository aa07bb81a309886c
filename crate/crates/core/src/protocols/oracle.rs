//! Brute-force four-qubit construction of one bilateral step, used to validate the closed forms.
//! Qubits are ordered A₁, B₁, A₂, B₂; the joint state is ρ⊗ρ.

use num_complex::Complex;

use crate::bellmat::{bell_basis, BellDensityMatrix, BellState, LocalGate};
use crate::error::{EppError, Result};
use crate::linalg::Mat4;
use crate::protocols::steps::{Sign, StepOutcome, DEGENERATE};
use crate::scalar::{czero, re, Cx, Real};

const N: usize = 16;

#[derive(Clone)]
struct Mat16<T: Real>(Vec<Cx<T>>);

impl<T: Real> Mat16<T> {
    fn zero() -> Self {
        Mat16(vec![czero(); N * N])
    }

    fn at(&self, i: usize, j: usize) -> Cx<T> {
        self.0[i * N + j]
    }

    fn mul(&self, o: &Mat16<T>) -> Mat16<T> {
        let mut out = Mat16::zero();
        for i in 0..N {
            for k in 0..N {
                let a = self.at(i, k);
                if a == czero() {
                    continue;
                }
                for j in 0..N {
                    out.0[i * N + j] = out.0[i * N + j] + a * o.at(k, j);
                }
            }
        }
        out
    }

    fn adjoint(&self) -> Mat16<T> {
        let mut out = Mat16::zero();
        for i in 0..N {
            for j in 0..N {
                out.0[i * N + j] = self.at(j, i).conj();
            }
        }
        out
    }
}

fn bit(i: usize, q: usize) -> usize {
    (i >> (3 - q)) & 1
}

/// Embeds a two-qubit operator (basis |q_a q_b⟩) on qubits `qa`, `qb` of four.
fn embed<T: Real>(m: &Mat4<T>, qa: usize, qb: usize) -> Mat16<T> {
    let mut u = Mat16::zero();
    for i in 0..N {
        let col = bit(i, qa) * 2 + bit(i, qb);
        for a in 0..2 {
            for b in 0..2 {
                let amp = m[(a * 2 + b, col)];
                if amp == czero() {
                    continue;
                }
                let mut o = i;
                o = (o & !(1 << (3 - qa))) | (a << (3 - qa));
                o = (o & !(1 << (3 - qb))) | (b << (3 - qb));
                u.0[o * N + i] = u.0[o * N + i] + amp;
            }
        }
    }
    u
}

/// M± = |Ψ±⟩⟨Ψ±| + |Φ±⟩⟨Φ±| in the computational basis.
fn measurement<T: Real>(s: Sign) -> Mat4<T> {
    let (a, b) = match s {
        Sign::Minus => (BellState::PsiMinus, BellState::PhiMinus),
        Sign::Plus => (BellState::PsiPlus, BellState::PhiPlus),
    };
    Mat4::outer(&a.ket(), &a.ket()) + Mat4::outer(&b.ket(), &b.ket())
}

/// Unnormalized corrected states (Bell basis) and probabilities for the four outcomes
/// |jk⟩ of qubits A₂B₂, indexed by `2j + k`.
pub fn oracle_outcomes<T: Real>(rho: &BellDensityMatrix<T>, sign_a: Sign, sign_b: Sign) -> [(Mat4<T>, T); 4] {
    let rc = rho.to_computational();
    let rc = rc.matrix();
    let mut big = Mat16::zero();
    for i in 0..N {
        for j in 0..N {
            // Joint index bits: a1 b1 a2 b2; ρ⊗ρ on (A₁B₁)(A₂B₂).
            big.0[i * N + j] = rc[(i >> 2, j >> 2)] * rc[(i & 3, j & 3)];
        }
    }
    let pi = embed(&measurement::<T>(sign_a), 0, 2).mul(&embed(&measurement::<T>(sign_b), 1, 3));
    let out = pi.mul(&big).mul(&pi.adjoint());
    let b = bell_basis::<T>();
    let mut res = [(Mat4::zero(), T::zero()); 4];
    for j in 0..2usize {
        for k in 0..2usize {
            let sub = Mat4::from_fn(|a, c| out.at((a << 2) | (j << 1) | k, (c << 2) | (j << 1) | k));
            let p = sub.trace().re;
            let w = LocalGate::<T>::vjk(j as u8, (k as u8 + 1) % 2);
            let corrected = sub.congruence(w.matrix());
            res[2 * j + k] = (corrected.congruence(&b.adjoint()), p);
        }
    }
    res
}

/// Single outcome `jk`, normalized.
pub fn oracle_step<T: Real>(rho: &BellDensityMatrix<T>, sign_a: Sign, sign_b: Sign, j: u8, k: u8) -> Result<StepOutcome<T>> {
    let (m, p) = oracle_outcomes(rho, sign_a, sign_b)[(2 * (j % 2) + (k % 2)) as usize];
    normalize(m, p)
}

/// All four outcomes summed, normalized by their total probability.
pub fn oracle_branch<T: Real>(rho: &BellDensityMatrix<T>, sign_a: Sign, sign_b: Sign) -> Result<StepOutcome<T>> {
    let outs = oracle_outcomes(rho, sign_a, sign_b);
    let m = outs.iter().fold(Mat4::zero(), |acc, (m, _)| acc + *m);
    let p = outs.iter().fold(T::zero(), |acc, (_, p)| acc + *p);
    normalize(m, p)
}

fn normalize<T: Real>(m: Mat4<T>, p: T) -> Result<StepOutcome<T>> {
    if !(p > T::lit(DEGENERATE)) {
        return Err(EppError::DegenerateBranch(p.as_f64()));
    }
    let s: Complex<T> = re(T::one() / p);
    Ok(StepOutcome { state: BellDensityMatrix::from_unchecked(m.scale(s)), probability: p })
}
