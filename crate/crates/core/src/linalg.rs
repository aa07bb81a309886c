//! Fixed-size 4×4 complex matrices, Hermitian eigen-decomposition and singular values.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use crate::scalar::{cone, czero, Cx, Real};

const JACOBI_SWEEPS: usize = 64;

/// Dense 4×4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4<T: Real>(pub [[Complex<T>; 4]; 4]);

impl<T: Real> Default for Mat4<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Mat4<T> {
    pub fn zero() -> Self {
        Mat4([[czero(); 4]; 4])
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { cone() } else { czero() })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(d: [T; 4]) -> Self {
        Self::from_fn(|i, j| if i == j { Complex::new(d[i], T::zero()) } else { czero() })
    }

    /// Outer product |v⟩⟨w|.
    pub fn outer(v: &[Complex<T>; 4], w: &[Complex<T>; 4]) -> Self {
        Self::from_fn(|i, j| v[i] * w[j].conj())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|i, j| self.0[i][j].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn trace(&self) -> Complex<T> {
        (0..4).fold(czero(), |acc, i| acc + self.0[i][i])
    }

    /// U·self·U†.
    pub fn congruence(&self, u: &Mat4<T>) -> Self {
        *u * *self * u.adjoint()
    }

    /// Largest entry-wise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Mat4<T>) -> T {
        let mut m = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        m
    }

    pub fn hermiticity_defect(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> [Complex<T>; 4] {
        [self.0[0][j], self.0[1][j], self.0[2][j], self.0[3][j]]
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
    /// Returns eigenvalues in ascending order and the matching eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> ([T; 4], Mat4<T>) {
        let mut a = *self;
        // Symmetrize so roundoff asymmetry cannot stall the sweeps.
        for i in 0..4 {
            a.0[i][i] = Complex::new(a.0[i][i].re, T::zero());
            for j in (i + 1)..4 {
                let avg = (a.0[i][j] + a.0[j][i].conj()) * T::lit(0.5);
                a.0[i][j] = avg;
                a.0[j][i] = avg.conj();
            }
        }
        let mut v = Mat4::identity();
        let scale = (0..4).fold(T::zero(), |s, i| s.max(a.0[i][i].norm())).max(T::min_positive_value());
        for _ in 0..JACOBI_SWEEPS {
            let off = off_diagonal_norm(&a);
            if off <= T::epsilon() * scale * T::lit(1e-3) {
                break;
            }
            for p in 0..3 {
                for q in (p + 1)..4 {
                    let apq = a.0[p][q];
                    let r = apq.norm();
                    if r <= T::min_positive_value() {
                        continue;
                    }
                    let phase = apq / r;
                    let theta = (a.0[q][q].re - a.0[p][p].re) / (T::lit(2.0) * r);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    // U acts on the (p,q) plane: columns p,q of the identity replaced.
                    let upp = Complex::new(c, T::zero());
                    let upq = Complex::new(s, T::zero());
                    let uqp = -phase.conj() * s;
                    let uqq = phase.conj() * c;
                    rotate(&mut a, &mut v, p, q, [upp, upq, uqp, uqq]);
                }
            }
        }
        let mut idx = [0usize, 1, 2, 3];
        idx.sort_by(|&i, &j| a.0[i][i].re.partial_cmp(&a.0[j][j].re).unwrap_or(std::cmp::Ordering::Equal));
        let vals = [a.0[idx[0]][idx[0]].re, a.0[idx[1]][idx[1]].re, a.0[idx[2]][idx[2]].re, a.0[idx[3]][idx[3]].re];
        let vecs = Mat4::from_fn(|i, j| v.0[i][idx[j]]);
        (vals, vecs)
    }

    /// Singular values in descending order, by one-sided complex Jacobi.
    pub fn singular_values(&self) -> [T; 4] {
        let mut g = *self;
        for _ in 0..JACOBI_SWEEPS {
            let mut rotated = false;
            for i in 0..3 {
                for j in (i + 1)..4 {
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma: Cx<T> = czero();
                    for r in 0..4 {
                        alpha = alpha + g.0[r][i].norm_sqr();
                        beta = beta + g.0[r][j].norm_sqr();
                        gamma = gamma + g.0[r][i].conj() * g.0[r][j];
                    }
                    let gn = gamma.norm();
                    if gn <= T::epsilon() * (alpha * beta).sqrt() || gn <= T::min_positive_value() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / gn;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gn);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    for r in 0..4 {
                        let gi = g.0[r][i];
                        let gj = g.0[r][j] * phase.conj();
                        g.0[r][i] = gi * c - gj * s;
                        g.0[r][j] = gi * s + gj * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv = [T::zero(); 4];
        for (j, out) in sv.iter_mut().enumerate() {
            *out = (0..4).fold(T::zero(), |acc, r| acc + g.0[r][j].norm_sqr()).sqrt();
        }
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }
}

fn off_diagonal_norm<T: Real>(a: &Mat4<T>) -> T {
    let mut s = T::zero();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                s = s + a.0[i][j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// A ← U†AU and V ← VU for a rotation U in the (p,q) plane.
fn rotate<T: Real>(a: &mut Mat4<T>, v: &mut Mat4<T>, p: usize, q: usize, u: [Cx<T>; 4]) {
    let [upp, upq, uqp, uqq] = u;
    // A ← A·U (columns p, q)
    for r in 0..4 {
        let ap = a.0[r][p];
        let aq = a.0[r][q];
        a.0[r][p] = ap * upp + aq * uqp;
        a.0[r][q] = ap * upq + aq * uqq;
        let vp = v.0[r][p];
        let vq = v.0[r][q];
        v.0[r][p] = vp * upp + vq * uqp;
        v.0[r][q] = vp * upq + vq * uqq;
    }
    // A ← U†·A (rows p, q)
    for c in 0..4 {
        let ap = a.0[p][c];
        let aq = a.0[q][c];
        a.0[p][c] = upp.conj() * ap + uqp.conj() * aq;
        a.0[q][c] = upq.conj() * ap + uqq.conj() * aq;
    }
    a.0[p][q] = czero();
    a.0[q][p] = czero();
    a.0[p][p] = Complex::new(a.0[p][p].re, T::zero());
    a.0[q][q] = Complex::new(a.0[q][q].re, T::zero());
}

/// Kronecker product of two 2×2 matrices.
pub fn kron2<T: Real>(a: &[[Complex<T>; 2]; 2], b: &[[Complex<T>; 2]; 2]) -> Mat4<T> {
    Mat4::from_fn(|i, j| a[i / 2][j / 2] * b[i % 2][j % 2])
}

impl<T: Real> Index<(usize, usize)> for Mat4<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.0[i][j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Mat4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.0[i][j]
    }
}

impl<T: Real> Mul for Mat4<T> {
    type Output = Mat4<T>;
    fn mul(self, rhs: Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| (0..4).fold(czero(), |acc, k| acc + self.0[i][k] * rhs.0[k][j]))
    }
}

impl<T: Real> Add for Mat4<T> {
    type Output = Mat4<T>;
    fn add(self, rhs: Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<T: Real> Sub for Mat4<T> {
    type Output = Mat4<T>;
    fn sub(self, rhs: Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn herm_from(vals: &[f64]) -> Mat4<f64> {
        let mut k = 0;
        let mut m = Mat4::zero();
        for i in 0..4 {
            m.0[i][i] = Complex::new(vals[k], 0.0);
            k += 1;
            for j in (i + 1)..4 {
                let z = Complex::new(vals[k], vals[k + 1]);
                k += 2;
                m.0[i][j] = z;
                m.0[j][i] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigen_of_diagonal() {
        let (e, _) = Mat4::diag([0.3, -1.0, 2.0, 0.0]).hermitian_eigen();
        assert_eq!(e, [-1.0, 0.0, 0.3, 2.0]);
    }

    #[test]
    fn singular_values_of_unitary_are_one() {
        let i = Complex::new(0.0, 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = [[Complex::new(h, 0.0), i * h], [i * h, Complex::new(h, 0.0)]];
        let sv = kron2(&u, &u).singular_values();
        for s in sv {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(vals in prop::collection::vec(-1.0f64..1.0, 16)) {
            let a = herm_from(&vals);
            let (e, v) = a.hermitian_eigen();
            let back = Mat4::diag(e).congruence(&v);
            prop_assert!(back.max_abs_diff(&a) < 1e-12);
            prop_assert!((v * v.adjoint()).max_abs_diff(&Mat4::identity()) < 1e-12);
            prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn singular_values_match_gram_eigenvalues(vals in prop::collection::vec(-1.0f64..1.0, 32)) {
            let m = Mat4::from_fn(|i, j| Complex::new(vals[4 * i + j], vals[16 + 4 * i + j]));
            let sv = m.singular_values();
            let (e, _) = (m.adjoint() * m).hermitian_eigen();
            for k in 0..4 {
                prop_assert!((sv[k] * sv[k] - e[3 - k]).abs() < 1e-11);
            }
        }
    }
}
