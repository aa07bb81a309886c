//! Two-qubit density matrices stored in the Bell basis ordered Ψ⁻, Φ⁻, Φ⁺, Ψ⁺.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{EppError, Result};
use crate::linalg::{kron2, Mat4};
use crate::scalar::{cone, cx, czero, imag_unit, re, Cx, Real};

/// Hermiticity and trace tolerance applied when a state is loaded or constructed.
pub const LOAD_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue.
pub const PSD_TOL: f64 = -1e-10;
/// Default X-state classification tolerance.
pub const X_TOL: f64 = 1e-10;

/// Bell states in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PsiMinus,
    PhiMinus,
    PhiPlus,
    PsiPlus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [BellState::PsiMinus, BellState::PhiMinus, BellState::PhiPlus, BellState::PsiPlus];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Ket in the computational basis |00⟩,|01⟩,|10⟩,|11⟩.
    pub fn ket<T: Real>(self) -> [Cx<T>; 4] {
        let h = T::FRAC_1_SQRT_2();
        let (z, p, m) = (T::zero(), h, -h);
        let v = match self {
            BellState::PsiMinus => [z, p, m, z],
            BellState::PhiMinus => [p, z, z, m],
            BellState::PhiPlus => [p, z, z, p],
            BellState::PsiPlus => [z, p, p, z],
        };
        v.map(re)
    }
}

/// Change of basis whose columns are the Bell kets in computational coordinates.
pub fn bell_basis<T: Real>() -> Mat4<T> {
    let cols = BellState::ALL.map(|b| b.ket::<T>());
    Mat4::from_fn(|i, j| cols[j][i])
}

fn check_state<T: Real>(m: &Mat4<T>) -> Result<()> {
    if !m.is_finite() {
        return Err(EppError::NonFinite);
    }
    let tol = T::tolerance(LOAD_TOL);
    let herm = m.hermiticity_defect();
    if herm > tol {
        return Err(EppError::NotHermitian(herm.as_f64()));
    }
    let tr = m.trace();
    if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
        return Err(EppError::TraceNotOne(tr.re.as_f64()));
    }
    let (e, _) = m.hermitian_eigen();
    if e[0] < -T::tolerance(-PSD_TOL) {
        return Err(EppError::NotPositive(e[0].as_f64()));
    }
    Ok(())
}

/// Density matrix in the Bell basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellDensityMatrix<T: Real> {
    m: Mat4<T>,
}

/// Density matrix in the computational basis |00⟩,|01⟩,|10⟩,|11⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComputationalDensityMatrix<T: Real> {
    m: Mat4<T>,
}

impl<T: Real> ComputationalDensityMatrix<T> {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: Mat4<T>) -> Result<Self> {
        check_state(&m)?;
        Ok(Self { m })
    }

    pub(crate) fn from_unchecked(m: Mat4<T>) -> Self {
        Self { m }
    }

    /// Normalized projector onto a (not necessarily normalized) ket.
    pub fn pure(v: [Cx<T>; 4]) -> Result<Self> {
        let n = v.iter().fold(T::zero(), |s, z| s + z.norm_sqr());
        if !(n > T::zero()) {
            return Err(EppError::NonFinite);
        }
        Ok(Self { m: Mat4::outer(&v, &v).scale(re(T::one() / n)) })
    }

    pub fn matrix(&self) -> &Mat4<T> {
        &self.m
    }

    pub fn to_bell(&self) -> BellDensityMatrix<T> {
        bell_from_computational(self)
    }
}

impl<T: Real> BellDensityMatrix<T> {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: Mat4<T>) -> Result<Self> {
        check_state(&m)?;
        Ok(Self { m })
    }

    /// Wraps a matrix produced by a trace-preserving map; no validation.
    pub(crate) fn from_unchecked(m: Mat4<T>) -> Self {
        Self { m }
    }

    pub fn projector(b: BellState) -> Self {
        let mut d = [T::zero(); 4];
        d[b.index()] = T::one();
        Self { m: Mat4::diag(d) }
    }

    pub fn maximally_mixed() -> Self {
        Self { m: Mat4::diag([T::lit(0.25); 4]) }
    }

    /// Bell-diagonal state with the given weights.
    pub fn bell_diagonal(w: [T; 4]) -> Result<Self> {
        Self::new(Mat4::diag(w))
    }

    pub fn matrix(&self) -> &Mat4<T> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        self.m.0[i][j]
    }

    /// Re-validates the invariants; used after long chains of maps.
    pub fn validate(&self) -> Result<()> {
        check_state(&self.m)
    }

    pub fn to_computational(&self) -> ComputationalDensityMatrix<T> {
        let b = bell_basis::<T>();
        ComputationalDensityMatrix { m: self.m.congruence(&b) }
    }

    pub fn concurrence(&self) -> T {
        concurrence(self)
    }

    pub fn purity(&self) -> T {
        purity(self)
    }

    pub fn fidelities(&self) -> [T; 4] {
        bell_fidelities(self)
    }

    pub fn fidelity(&self, b: BellState) -> T {
        self.m.0[b.index()][b.index()].re
    }

    pub fn is_x_state(&self, tol: T) -> bool {
        is_x_state(self, tol)
    }

    /// Largest modulus among entries outside the X pattern.
    pub fn x_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                if !in_x_pattern(i, j) {
                    d = d.max(self.m.0[i][j].norm());
                }
            }
        }
        d
    }

    pub fn is_bell_diagonal(&self, tol: T) -> bool {
        (0..4).all(|i| (0..4).all(|j| i == j || self.m.0[i][j].norm() <= tol))
    }

    /// Zeroes every off-diagonal Bell-basis entry.
    pub fn diagonal_part(&self) -> Self {
        Self { m: Mat4::diag(self.fidelities()) }
    }

    pub fn cast<U: Real>(&self) -> BellDensityMatrix<U> {
        BellDensityMatrix {
            m: Mat4::from_fn(|i, j| {
                let z = self.m.0[i][j];
                Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))
            }),
        }
    }
}

fn in_x_pattern(i: usize, j: usize) -> bool {
    let outer = |k| k == 0 || k == 3;
    outer(i) == outer(j)
}

/// Unitary congruence by the fixed Bell change of basis.
pub fn bell_from_computational<T: Real>(rho: &ComputationalDensityMatrix<T>) -> BellDensityMatrix<T> {
    let b = bell_basis::<T>();
    BellDensityMatrix { m: rho.m.congruence(&b.adjoint()) }
}

/// Spin-flip operator σy⊗σy in the computational basis.
fn sigma_yy<T: Real>() -> Mat4<T> {
    let (o, z) = (cone::<T>(), czero::<T>());
    Mat4([[z, z, z, -o], [z, z, o, z], [z, o, z, z], [-o, z, z, z]])
}

/// Concurrence. The λᵢ are taken as singular values of Wᵀ(σy⊗σy)W with ρ = WW†,
/// which avoids square roots of noisy near-zero eigenvalues on rank-deficient states.
pub fn concurrence<T: Real>(rho: &BellDensityMatrix<T>) -> T {
    let rc = rho.to_computational().m;
    let (e, v) = rc.hermitian_eigen();
    let w = Mat4::from_fn(|i, j| v.0[i][j] * e[j].max(T::zero()).sqrt());
    let tau = w.transpose() * sigma_yy() * w;
    let l = tau.singular_values();
    assert!(l.iter().all(|x| x.is_finite()), "concurrence: non-finite singular values for {:?}", rho);
    (l[0] - l[1] - l[2] - l[3]).max(T::zero()).min(T::one())
}

/// Tr(ρ²).
pub fn purity<T: Real>(rho: &BellDensityMatrix<T>) -> T {
    rho.m.0.iter().flatten().fold(T::zero(), |s, z| s + z.norm_sqr())
}

/// Diagonal Bell-basis weights.
pub fn bell_fidelities<T: Real>(rho: &BellDensityMatrix<T>) -> [T; 4] {
    [0, 1, 2, 3].map(|i| rho.m.0[i][i].re)
}

/// True iff every entry outside the {Ψ⁻,Ψ⁺} and {Φ⁻,Φ⁺} blocks is at most `tol` in modulus.
pub fn is_x_state<T: Real>(rho: &BellDensityMatrix<T>, tol: T) -> bool {
    rho.x_defect() <= tol
}

/// Pauli matrix selector for [`GateLabel::SigmaPair`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn matrix<T: Real>(self) -> [[Cx<T>; 2]; 2] {
        let (o, z, i) = (cone::<T>(), czero::<T>(), imag_unit::<T>());
        match self {
            Pauli::I => [[o, z], [z, o]],
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateLabel {
    HH,
    G,
    /// Correction V_j ⊗ V_k.
    VJK(u8, u8),
    SigmaPair(Pauli, Pauli),
    Custom,
}

/// Two-qubit separable gate, stored in the computational basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalGate<T: Real> {
    u: Mat4<T>,
    label: GateLabel,
}

/// Single-qubit correction V_j = |1⟩⟨j⊕1| + i|0⟩⟨j|.
pub fn v_gate<T: Real>(j: u8) -> [[Cx<T>; 2]; 2] {
    let j = (j % 2) as usize;
    let mut m = [[czero::<T>(); 2]; 2];
    m[1][(j + 1) % 2] = m[1][(j + 1) % 2] + cone();
    m[0][j] = m[0][j] + imag_unit();
    m
}

impl<T: Real> LocalGate<T> {
    /// Accepts any 4×4 unitary (within 1e−12).
    pub fn custom(u: Mat4<T>) -> Result<Self> {
        let defect = (u * u.adjoint()).max_abs_diff(&Mat4::identity());
        if !(defect <= T::tolerance(1e-12)) {
            return Err(EppError::NotUnitary(defect.as_f64()));
        }
        Ok(Self { u, label: GateLabel::Custom })
    }

    pub fn hh() -> Self {
        let h = re(T::FRAC_1_SQRT_2());
        let had = [[h, h], [h, -h]];
        Self { u: kron2(&had, &had), label: GateLabel::HH }
    }

    /// ((1 + iσx)/√2)^{⊗2}.
    pub fn g() -> Self {
        let h = T::FRAC_1_SQRT_2();
        let g = [[cx(h, T::zero()), cx(T::zero(), h)], [cx(T::zero(), h), cx(h, T::zero())]];
        Self { u: kron2(&g, &g), label: GateLabel::G }
    }

    pub fn vjk(j: u8, k: u8) -> Self {
        Self { u: kron2(&v_gate(j), &v_gate(k)), label: GateLabel::VJK(j % 2, k % 2) }
    }

    pub fn sigma_pair(a: Pauli, b: Pauli) -> Self {
        Self { u: kron2(&a.matrix(), &b.matrix()), label: GateLabel::SigmaPair(a, b) }
    }

    pub fn label(&self) -> GateLabel {
        self.label
    }

    /// The gate in the computational basis.
    pub fn matrix(&self) -> &Mat4<T> {
        &self.u
    }

    /// The gate expressed in the Bell basis.
    pub fn in_bell_basis(&self) -> Mat4<T> {
        let b = bell_basis::<T>();
        b.adjoint() * self.u * b
    }
}

/// ρ → UρU†.
pub fn apply_local_gate<T: Real>(rho: &BellDensityMatrix<T>, gate: &LocalGate<T>) -> BellDensityMatrix<T> {
    BellDensityMatrix { m: rho.m.congruence(&gate.in_bell_basis()) }
}

/// HH expressed directly on Bell indices: Ψ⁻ → −Ψ⁻, Φ⁻ ↔ Ψ⁺, Φ⁺ fixed.
pub(crate) fn apply_hh<T: Real>(rho: &BellDensityMatrix<T>) -> BellDensityMatrix<T> {
    const PERM: [usize; 4] = [0, 3, 2, 1];
    let sign = |k: usize| if k == 0 { -T::one() } else { T::one() };
    let m = Mat4::from_fn(|i, j| rho.m.0[PERM[i]][PERM[j]] * (sign(i) * sign(j)));
    BellDensityMatrix { m }
}

/// State file layout: `{"basis": "bell"|"computational", "matrix": [[[re, im], ...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateFile {
    pub basis: Basis,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Bell,
    Computational,
}

impl StateFile {
    pub fn from_bell<T: Real>(rho: &BellDensityMatrix<T>) -> Self {
        let matrix = rho.m.0.iter().map(|row| row.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()).collect();
        Self { basis: Basis::Bell, matrix }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EppError::Parse(e.to_string()))
    }

    /// Validates shape and state invariants, converting to the Bell basis if needed.
    pub fn to_bell<T: Real>(&self) -> Result<BellDensityMatrix<T>> {
        if self.matrix.len() != 4 || self.matrix.iter().any(|r| r.len() != 4) {
            return Err(EppError::Parse("matrix must be 4x4".into()));
        }
        let m = Mat4::from_fn(|i, j| {
            let [a, b] = self.matrix[i][j];
            Complex::new(T::lit(a), T::lit(b))
        });
        match self.basis {
            Basis::Bell => BellDensityMatrix::new(m),
            Basis::Computational => Ok(ComputationalDensityMatrix::new(m)?.to_bell()),
        }
    }
}
