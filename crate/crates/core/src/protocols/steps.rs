use crate::bellmat::{apply_hh, BellDensityMatrix, X_TOL};
use crate::error::{EppError, Result};
use crate::linalg::Mat4;
use crate::scalar::{czero, imag_unit, re, Real};

/// Branch probabilities at or below this value are treated as unreachable.
pub const DEGENERATE: f64 = 1e-14;

/// Sign of the bilateral measurement operator M±.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    fn value<T: Real>(self) -> T {
        match self {
            Sign::Minus => -T::one(),
            Sign::Plus => T::one(),
        }
    }
}

/// Outcome probabilities of one bilateral step. `r_minus` is M₊ at node A with M₋ at node B,
/// `r_plus` the opposite assignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchProbabilities<T: Real> {
    pub q_minus: T,
    pub q_plus: T,
    pub r_minus: T,
    pub r_plus: T,
}

impl<T: Real> BranchProbabilities<T> {
    pub fn q(&self, s: Sign) -> T {
        match s {
            Sign::Minus => self.q_minus,
            Sign::Plus => self.q_plus,
        }
    }

    pub fn total(&self) -> T {
        self.q_minus + self.q_plus + self.r_minus + self.r_plus
    }
}

/// A normalized post-step state with the probability of reaching it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T: Real> {
    pub state: BellDensityMatrix<T>,
    pub probability: T,
}

pub fn branch_probabilities<T: Real>(rho: &BellDensityMatrix<T>) -> BranchProbabilities<T> {
    let r = |i, j| rho.get(i, j);
    let two = T::lit(2.0);
    let s1 = r(0, 0).re + r(1, 1).re;
    let s2 = r(2, 2).re + r(3, 3).re;
    let base = (s1 * s1 + s2 * s2) / two;
    let coh = two * r(0, 1).re.powi(2) + two * r(2, 3).re.powi(2);
    let cross = ((r(0, 1) + r(1, 0)) * (r(2, 3) + r(3, 2))).re;
    BranchProbabilities { q_minus: base - coh, q_plus: base + coh, r_minus: s1 * s2 - cross, r_plus: s1 * s2 + cross }
}

fn degenerate<T: Real>(p: T) -> Result<()> {
    if p > T::lit(DEGENERATE) {
        Ok(())
    } else {
        Err(EppError::DegenerateBranch(p.as_f64()))
    }
}

/// One bilateral M± step with matched outcomes, closed form.
pub fn m2_step<T: Real>(rho: &BellDensityMatrix<T>, sign: Sign) -> Result<StepOutcome<T>> {
    let q = branch_probabilities(rho).q(sign);
    degenerate(q)?;
    let r = |i, j| rho.get(i, j);
    let s: T = sign.value();
    let half = T::lit(0.5);
    let mut o = Mat4::zero();
    o[(0, 0)] = (r(0, 0) * r(0, 0) + r(1, 1) * r(1, 1) + (r(0, 1) * r(0, 1) + r(1, 0) * r(1, 0)) * s) * half;
    o[(1, 1)] = r(2, 2) * r(3, 3) + re(r(2, 3).norm_sqr() * s);
    o[(2, 2)] = r(0, 0) * r(1, 1) + re(r(0, 1).norm_sqr() * s);
    o[(3, 3)] = (r(2, 2) * r(2, 2) + r(3, 3) * r(3, 3) + (r(2, 3) * r(2, 3) + r(3, 2) * r(3, 2)) * s) * half;
    o[(0, 3)] = (r(0, 3) * r(0, 3) + r(1, 2) * r(1, 2) + (r(0, 2) * r(0, 2) + r(1, 3) * r(1, 3)) * s) * half;
    o[(1, 2)] = r(1, 2).conj() * r(0, 3).conj() + r(0, 2).conj() * r(1, 3).conj() * s;
    if sign == Sign::Plus {
        let i = imag_unit::<T>();
        o[(0, 1)] = (r(0, 2) * r(0, 3) + r(1, 2) * r(1, 3)) / i;
        o[(0, 2)] = (r(0, 0) * r(0, 1) + r(1, 1) * r(1, 0)) / i;
        o[(3, 1)] = (r(3, 3) * r(3, 2) + r(2, 2) * r(2, 3)) / i;
        o[(3, 2)] = (r(2, 0) * r(2, 1) + r(3, 0) * r(3, 1)) / i;
    }
    o[(3, 0)] = o[(0, 3)].conj();
    o[(2, 1)] = o[(1, 2)].conj();
    o[(1, 0)] = o[(0, 1)].conj();
    o[(2, 0)] = o[(0, 2)].conj();
    o[(1, 3)] = o[(3, 1)].conj();
    o[(2, 3)] = o[(3, 2)].conj();
    for k in 0..4 {
        o[(k, k)].im = T::zero();
    }
    let state = BellDensityMatrix::from_unchecked(o.scale(re(T::one() / q)));
    Ok(StepOutcome { state, probability: q })
}

/// p(ρ) = (ρ₁₁+ρ₂₂)² + (ρ₃₃+ρ₄₄)², the probability of either matched event.
pub fn x_step_probability<T: Real>(rho: &BellDensityMatrix<T>) -> T {
    let f = rho.fidelities();
    (f[0] + f[1]).powi(2) + (f[2] + f[3]).powi(2)
}

/// One step on an X-state; the X form is preserved and both matched events give this state.
pub fn x_step<T: Real>(rho: &BellDensityMatrix<T>) -> Result<StepOutcome<T>> {
    let defect = rho.x_defect();
    if defect > T::tolerance(X_TOL) {
        return Err(EppError::NotXState(defect.as_f64()));
    }
    let p = x_step_probability(rho);
    degenerate(p)?;
    let [a, b, c, d] = rho.fidelities();
    let two = T::lit(2.0);
    let inv = T::one() / p;
    let mut o = Mat4::diag([(a * a + b * b) * inv, two * c * d * inv, two * a * b * inv, (c * c + d * d) * inv]);
    let r03 = rho.get(0, 3);
    let r12 = rho.get(1, 2);
    o[(0, 3)] = (r03 * r03 + r12 * r12) * inv;
    o[(1, 2)] = r12.conj() * r03.conj() * (two * inv);
    o[(3, 0)] = o[(0, 3)].conj();
    o[(2, 1)] = o[(1, 2)].conj();
    Ok(StepOutcome { state: BellDensityMatrix::from_unchecked(o), probability: p })
}

/// Minus and plus outcomes; either may be a degenerate-branch error.
pub type BranchPair<T> = (Result<StepOutcome<T>>, Result<StepOutcome<T>>);

/// Applies HH and then both matched events. The minus branch is Bell-diagonal; the plus
/// branch carries Ψ⁻–Φ⁺ and Φ⁻–Ψ⁺ coherences. Degenerate branches are returned as errors
/// individually.
pub fn m2h_branches<T: Real>(rho_x: &BellDensityMatrix<T>) -> Result<BranchPair<T>> {
    let defect = rho_x.x_defect();
    if defect > T::tolerance(X_TOL) {
        return Err(EppError::NotXState(defect.as_f64()));
    }
    let h = apply_hh(rho_x);
    Ok((m2_step(&h, Sign::Minus), m2_step(&h, Sign::Plus)))
}

/// Which Bell states the purification conditions single out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PurifyTarget {
    PsiMinus,
    PsiPlus,
    None,
    Both,
}

/// Evaluates both strict purifiability inequalities.
pub fn purify_target<T: Real>(rho: &BellDensityMatrix<T>) -> PurifyTarget {
    let r = |i, j| rho.get(i, j);
    let one = T::one();
    let two = T::lit(2.0);
    let minus = (two * r(0, 0).re - one) * (one - two * r(1, 1).re) > -(two * r(0, 1).im).powi(2) - (two * r(2, 3).re).powi(2);
    let plus = (two * r(2, 2).re - one) * (one - two * r(3, 3).re) > -(two * r(2, 3).im).powi(2) - (two * r(0, 1).re).powi(2);
    match (minus, plus) {
        (true, true) => PurifyTarget::Both,
        (true, false) => PurifyTarget::PsiMinus,
        (false, true) => PurifyTarget::PsiPlus,
        (false, false) => PurifyTarget::None,
    }
}

/// Zeroes all off-diagonal Bell-basis entries.
pub fn dejmps_twirl<T: Real>(rho: &BellDensityMatrix<T>) -> BellDensityMatrix<T> {
    rho.diagonal_part()
}

/// G ρ G† computed on Bell indices: Ψ⁻, Φ⁻ fixed, Ψ⁺ → iΦ⁺, Φ⁺ → iΨ⁺.
pub(crate) fn apply_g<T: Real>(rho: &BellDensityMatrix<T>) -> BellDensityMatrix<T> {
    let one = re(T::one());
    let i = imag_unit::<T>();
    // (row index, phase) of the image of each basis vector.
    let img = [(0usize, one), (1, one), (3, i), (2, i)];
    let mut m = Mat4::from_fn(|_, _| czero());
    for a in 0..4 {
        for b in 0..4 {
            let (ia, pa) = img[a];
            let (ib, pb) = img[b];
            m[(ia, ib)] = pa * rho.get(a, b) * pb.conj();
        }
    }
    BellDensityMatrix::from_unchecked(m)
}
