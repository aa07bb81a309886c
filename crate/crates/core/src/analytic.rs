//! Closed forms: rank-two recurrences, MEMS families and their series, the rank-three family.

use crate::bellmat::BellDensityMatrix;
use crate::error::{domain, EppError, Result};
use crate::linalg::Mat4;
use crate::protocols::DEGENERATE;
use crate::scalar::{cx, re, Real};

/// Additive truncation threshold of the MEMS series.
pub const SERIES_TERM_FLOOR: f64 = 1e-15;
const SERIES_MAX_TERMS: i32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Rank2Trajectory<T: Real> {
    /// a₀ … a_n.
    pub a: Vec<T>,
    /// b_k = 1/a_k − 1.
    pub b: Vec<T>,
    /// p₁ … p_n.
    pub p: Vec<T>,
    /// P₁ … P_n, running products of `p`.
    pub cumulative: Vec<T>,
}

/// Rank-two Ψ⁻/Ψ⁺ recurrence a_{k+1} = a_k²/(a_k² + (1 − a_k)²).
pub fn rank2_trajectory<T: Real>(a0: T, n: usize) -> Result<Rank2Trajectory<T>> {
    if !(a0 > T::lit(0.5) && a0 <= T::one()) {
        return Err(domain("a0", a0.as_f64(), "(1/2, 1]"));
    }
    if n > 64 {
        return Err(domain("n", n as f64, "[0, 64]"));
    }
    let b0 = T::one() / a0 - T::one();
    let mut t = Rank2Trajectory { a: vec![a0], b: vec![b0], p: vec![], cumulative: vec![] };
    let mut big = T::one();
    for k in 1..=n {
        let prev = t.a[k - 1];
        let p = prev * prev + (T::one() - prev).powi(2);
        big = big * p;
        // b_k = b₀^(2^k) by repeated squaring.
        let bk = t.b[k - 1] * t.b[k - 1];
        t.b.push(bk);
        t.a.push(T::one() / (T::one() + bk));
        t.p.push(p);
        t.cumulative.push(big);
    }
    Ok(t)
}

/// Which two Bell states the rank-two input mixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank2Combo {
    /// Ψ⁻ with Ψ⁺ (or Φ⁻ with Φ⁺).
    PsiPsi,
    /// Ψ∓ with Φ±.
    PsiPhiOpp,
    /// Ψ∓ with Φ∓.
    PsiPhiSame,
}

/// Asymptotic success probability: C = 2a₀ − 1, or C² for the same-sign combination.
pub fn rank2_limit<T: Real>(a0: T, combo: Rank2Combo) -> Result<T> {
    if !(a0 > T::lit(0.5) && a0 <= T::one()) {
        return Err(domain("a0", a0.as_f64(), "(1/2, 1]"));
    }
    let c = T::lit(2.0) * a0 - T::one();
    Ok(match combo {
        Rank2Combo::PsiPsi | Rank2Combo::PsiPhiOpp => c,
        Rank2Combo::PsiPhiSame => c * c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemsKind {
    TypeI,
    TypeII,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemsParams<T: Real> {
    pub c: T,
    pub kind: MemsKind,
}

impl<T: Real> MemsParams<T> {
    /// Type II below C = 2/3, type I from 2/3 upward.
    pub fn new(c: T) -> Result<Self> {
        if !(c >= T::zero() && c <= T::one()) {
            return Err(domain("C", c.as_f64(), "[0, 1]"));
        }
        let kind = if c < T::lit(2.0) / T::lit(3.0) { MemsKind::TypeII } else { MemsKind::TypeI };
        Ok(Self { c, kind })
    }

    pub fn state(&self) -> BellDensityMatrix<T> {
        let c = self.c;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let (diag, coh) = match self.kind {
            MemsKind::TypeI => {
                let s = (T::one() - c) / two;
                ([s, T::zero(), c, s], s)
            }
            MemsKind::TypeII => {
                let six = T::lit(6.0);
                let ap = (two + three * c) / six;
                let am = (two - three * c) / six;
                let s = T::one() / six;
                ([s, am, ap, s], s)
            }
        };
        let mut m = Mat4::diag(diag);
        m[(0, 3)] = re(coh);
        m[(3, 0)] = re(coh);
        BellDensityMatrix::from_unchecked(m)
    }
}

/// C|Φ⁺⟩⟨Φ⁺| + (1 − C)|01⟩⟨01| for C ≥ 2/3, α₊|Φ⁺⟩⟨Φ⁺| + α₋|Φ⁻⟩⟨Φ⁻| + |01⟩⟨01|/3 below.
pub fn mems<T: Real>(c: T) -> Result<BellDensityMatrix<T>> {
    Ok(MemsParams::new(c)?.state())
}

/// Concurrence of the MEMS with purity 𝒫.
pub fn mems_concurrence_of_purity<T: Real>(purity: T) -> Result<T> {
    let third = T::one() / T::lit(3.0);
    if !(purity >= third - T::epsilon() && purity <= T::one() + T::epsilon()) {
        return Err(domain("purity", purity.as_f64(), "[1/3, 1]"));
    }
    let two = T::lit(2.0);
    if purity >= T::lit(5.0) / T::lit(9.0) {
        Ok((T::one() + (two * purity - T::one()).max(T::zero()).sqrt()) / two)
    } else {
        Ok((two * purity - two * third).max(T::zero()).sqrt())
    }
}

/// C_l = [2^(2^l − 1)(1/C − 1)^(2^l) + 1]⁻¹, the concurrence of the l-th type I row state.
pub fn mems1_chain<T: Real>(c: T, l: u32) -> Result<T> {
    if !(c > T::zero() && c <= T::one()) {
        return Err(domain("C", c.as_f64(), "(0, 1]"));
    }
    if l > 32 {
        return Err(domain("l", l as f64, "[0, 32]"));
    }
    if c == T::one() {
        return Ok(T::one());
    }
    let e = T::lit(2f64.powi(l as i32));
    let x = (e - T::one()) * T::LN_2() + e * (T::one() / c - T::one()).ln();
    Ok(T::one() / (x.exp() + T::one()))
}

/// P_I = Σ_l C/2^(l+1) · Π_{j≤l} C_j.
pub fn mems1_prob<T: Real>(c: T) -> Result<T> {
    mems1_chain(c, 0)?;
    let mut sum = T::zero();
    let mut prod = T::one();
    for l in 0..SERIES_MAX_TERMS {
        let cl = mems1_chain(c, l.min(32) as u32)?;
        prod = prod * cl;
        let term = c / T::lit(2f64.powi(l + 1)) * prod;
        sum = sum + term;
        if term < T::lit(SERIES_TERM_FLOOR) {
            break;
        }
    }
    Ok(sum)
}

fn check_type2<T: Real>(c: T) -> Result<()> {
    if !(c >= T::zero() && c <= T::lit(2.0) / T::lit(3.0) + T::epsilon()) {
        return Err(domain("C", c.as_f64(), "[0, 2/3]"));
    }
    Ok(())
}

/// C̃_l = (3/2)^(2^l − 1) C^(2^l).
pub fn mems2_chain<T: Real>(c: T, l: u32) -> Result<T> {
    check_type2(c)?;
    if l > 32 {
        return Err(domain("l", l as f64, "[0, 32]"));
    }
    if c == T::zero() {
        return Ok(T::zero());
    }
    let e = T::lit(2f64.powi(l as i32));
    Ok(((e - T::one()) * T::lit(1.5).ln() + e * c.ln()).exp())
}

/// P_II = ½ Σ_l 3^(−l) (3/2)^(2^(l+1) − 2) C^(2^(l+1)).
pub fn mems2_prob<T: Real>(c: T) -> Result<T> {
    check_type2(c)?;
    if c == T::zero() {
        return Ok(T::zero());
    }
    let half = T::lit(0.5);
    let mut sum = T::zero();
    for l in 0..SERIES_MAX_TERMS {
        let e = T::lit(2f64.powi(l + 1));
        let log = -T::lit(l as f64) * T::lit(3.0).ln() + (e - T::lit(2.0)) * T::lit(1.5).ln() + e * c.ln();
        let term = half * log.exp();
        sum = sum + term;
        if term < T::lit(SERIES_TERM_FLOOR) {
            break;
        }
    }
    Ok(sum)
}

/// Rank-three family (w+u)/2 |+⟩⟨+| + (w−u)/2 |−⟩⟨−| + (1−w)|01⟩⟨01| with
/// |+⟩ = cos(θ/2)|00⟩ + e^{iφ} sin(θ/2)|11⟩ and |−⟩ = e^{−iφ} sin(θ/2)|00⟩ − cos(θ/2)|11⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rank3Params<T: Real> {
    pub w: T,
    pub u: T,
    pub theta: T,
    pub phi: T,
}

impl<T: Real> Rank3Params<T> {
    pub fn new(w: T, u: T, theta: T, phi: T) -> Result<Self> {
        let tiny = T::epsilon() * T::lit(8.0);
        if !(u.abs() <= w + tiny && w <= T::one() + tiny) {
            return Err(domain("w", w.as_f64(), "|u| <= w <= 1"));
        }
        if !(theta >= T::zero() && theta <= T::FRAC_PI_2() + tiny) {
            return Err(domain("theta", theta.as_f64(), "[0, pi/2]"));
        }
        if !(phi >= T::zero() && phi < T::TAU()) {
            return Err(domain("phi", phi.as_f64(), "[0, 2pi)"));
        }
        Ok(Self { w, u, theta, phi })
    }

    pub fn concurrence(&self) -> T {
        self.u.abs() * self.theta.sin()
    }

    pub fn purity(&self) -> T {
        let two = T::lit(2.0);
        (self.u * self.u + self.w * self.w) / two + (T::one() - self.w).powi(2)
    }
}

pub fn rank3<T: Real>(p: &Rank3Params<T>) -> BellDensityMatrix<T> {
    let two = T::lit(2.0);
    let (s, c) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    let h = p.u / two;
    let o = (T::one() - p.w) / two;
    let mut m = Mat4::diag([o, p.w / two - h * s * cp, p.w / two + h * s * cp, o]);
    m[(0, 3)] = re(o);
    m[(3, 0)] = re(o);
    m[(1, 2)] = cx(h * c, -h * s * sp);
    m[(2, 1)] = cx(h * c, h * s * sp);
    BellDensityMatrix::from_unchecked(m)
}

/// Bell-diagonal output of HH followed by M₋ on a rank-three state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rank3Step<T: Real> {
    /// Φ⁻ weight.
    pub rho22: T,
    /// Ψ⁺ weight.
    pub rho44: T,
    /// Branch probability (w² − u² cos²θ)/2.
    pub p_tilde: T,
    pub c_out: T,
}

pub fn rank3_first_step<T: Real>(p: &Rank3Params<T>) -> Result<Rank3Step<T>> {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let (w2, u2) = (p.w * p.w, p.u * p.u);
    let ct = p.theta.cos();
    let pt = (w2 - u2 * ct * ct) / two;
    if !(pt > T::lit(DEGENERATE)) {
        return Err(EppError::DegenerateBranch(pt.as_f64()));
    }
    Ok(Rank3Step {
        rho22: (w2 - u2) / (four * pt),
        rho44: (w2 - u2 * (two * p.theta).cos()) / (four * pt),
        p_tilde: pt,
        c_out: u2 * p.theta.sin().powi(2) / (two * pt),
    })
}

/// Closed concurrence intervals attainable by the rank-three family at purity 𝒫 and angle θ.
pub fn rank3_cp_bounds<T: Real>(purity: T, theta: T) -> Result<Vec<(T, T)>> {
    let third = T::one() / T::lit(3.0);
    if !(purity >= third - T::epsilon() && purity <= T::one() + T::epsilon()) {
        return Err(domain("purity", purity.as_f64(), "[1/3, 1]"));
    }
    let s = theta.sin();
    let two = T::lit(2.0);
    let mut out = Vec::new();
    if purity <= T::lit(5.0) / T::lit(9.0) {
        out.push((T::zero(), (two * purity - two * third).max(T::zero()).sqrt() * s));
    } else {
        let r = (two * purity - T::one()).max(T::zero()).sqrt();
        out.push((T::zero(), (T::one() - r) / two * s));
        out.push((r * s, (r + T::one()) / two * s));
    }
    Ok(out)
}

/// (w, u ≥ 0) pairs with the given purity and |u|, i.e. the roots w = (2 ± √(6𝒫 − 2 − 3u²))/3
/// that satisfy |u| ≤ w ≤ 1.
pub fn rank3_preimages<T: Real>(purity: T, u_abs: T) -> Vec<(T, T)> {
    let disc = T::lit(6.0) * purity - T::lit(2.0) - T::lit(3.0) * u_abs * u_abs;
    let slack = T::lit(1e-12);
    if disc < -slack {
        return vec![];
    }
    let sq = disc.max(T::zero()).sqrt();
    let three = T::lit(3.0);
    let mut out: Vec<(T, T)> = Vec::new();
    for w in [(T::lit(2.0) + sq) / three, (T::lit(2.0) - sq) / three] {
        if w + slack >= u_abs && w <= T::one() + slack && !out.iter().any(|(x, _)| (*x - w).abs() < slack) {
            out.push((w.min(T::one()).max(u_abs), u_abs));
        }
    }
    out
}
