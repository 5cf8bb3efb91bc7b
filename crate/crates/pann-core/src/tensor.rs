//! 3x3 tensor algebra.
//!
//! [`Tensor2`] is the carrier for deformation gradients, stresses and
//! cofactors. Operations are plain loops over the fixed 3x3 storage; the
//! cofactor is computed from 2x2 minors so it stays defined for singular
//! arguments.

use crate::float::Real;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Second order tensor in three dimensions, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Tensor2<T> {
    pub fn zeros() -> Self {
        Self {
            m: [[T::zero(); 3]; 3],
        }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            out.m[i][i] = T::one();
        }
        out
    }

    pub fn from_rows(rows: [[T; 3]; 3]) -> Self {
        Self { m: rows }
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let mut out = Self::zeros();
        out.m[0][0] = a;
        out.m[1][1] = b;
        out.m[2][2] = c;
        out
    }

    /// Rank-one tensor `a ⊗ b`.
    pub fn outer(a: [T; 3], b: [T; 3]) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = a[i] * b[j];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Matrix of cofactors from 2x2 minors: `Cof(A) = det(A) A^{-T}` for
    /// invertible `A`, but defined everywhere.
    pub fn cofactor(&self) -> Self {
        let m = &self.m;
        let minor = |i: usize, j: usize| {
            let r = [(i + 1) % 3, (i + 2) % 3];
            let c = [(j + 1) % 3, (j + 2) % 3];
            // Cyclic index choice absorbs the (-1)^(i+j) sign.
            m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
        };
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = minor(i, j);
            }
        }
        out
    }

    /// Inverse via cofactors; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() {
            return None;
        }
        let cof = self.cofactor();
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = cof.m[j][i] / d;
            }
        }
        Some(out)
    }

    /// Inverse transpose, i.e. `Cof(A) / det(A)`.
    pub fn inverse_transpose(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() {
            return None;
        }
        Some(self.cofactor().scale(T::one() / d))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s += self.m[i][k] * rhs.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = out.m[i][j] * s;
            }
        }
        out
    }

    /// Full contraction `A : B`.
    pub fn ddot(&self, rhs: &Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += self.m[i][j] * rhs.m[i][j];
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> T {
        self.ddot(self).sqrt()
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> T {
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max(self.m[i][j].abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// Entries flattened row-major.
    pub fn to_array(&self) -> [T; 9] {
        let mut out = [T::zero(); 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.m[i][j];
            }
        }
        out
    }

    pub fn from_array(a: [T; 9]) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = a[3 * i + j];
            }
        }
        out
    }
}

impl<T: Real> Index<(usize, usize)> for Tensor2<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.m[i][j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Tensor2<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.m[i][j]
    }
}

impl<T: Real> Add for Tensor2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += rhs.m[i][j];
            }
        }
        out
    }
}

impl<T: Real> Sub for Tensor2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] -= rhs.m[i][j];
            }
        }
        out
    }
}

impl<T: Real> Neg for Tensor2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<Tensor2<T>> for Tensor2<T> {
    type Output = Tensor2<T>;
    fn mul(self, rhs: Tensor2<T>) -> Tensor2<T> {
        self.matmul(&rhs)
    }
}

impl<T: Real> fmt::Display for Tensor2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..3 {
            writeln!(
                f,
                "[{:+.6e} {:+.6e} {:+.6e}]",
                self.m[i][0], self.m[i][1], self.m[i][2]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Tensor2<f64>, b: &Tensor2<f64>, tol: f64) {
        assert!((*a - *b).inf_norm() <= tol, "\n{a}\nvs\n{b}");
    }

    #[test]
    fn cofactor_of_identity() {
        assert_close(
            &Tensor2::<f64>::identity().cofactor(),
            &Tensor2::identity(),
            0.0,
        );
    }

    #[test]
    fn cofactor_of_diagonals_matches_minor_oracle() {
        // Cof(diag(a, b, c)) = diag(bc, ac, ab), read off the 2x2 minors.
        assert_close(
            &Tensor2::diag(2.0, 1.0, 1.0).cofactor(),
            &Tensor2::diag(1.0, 2.0, 2.0),
            0.0,
        );
        assert_close(
            &Tensor2::diag(2.0, 3.0, 4.0).cofactor(),
            &Tensor2::diag(12.0, 8.0, 6.0),
            0.0,
        );
    }

    #[test]
    fn cofactor_transpose_identity() {
        let a = Tensor2::from_rows([[1.2, -0.3, 0.4], [0.0, 2.0, -1.0], [0.7, 0.1, 0.9]]);
        let lhs = a.cofactor().transpose().matmul(&a);
        assert_close(&lhs, &Tensor2::identity().scale(a.det()), 1e-12);
    }

    #[test]
    fn cofactor_defined_for_singular_matrices() {
        let a = Tensor2::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 0.0]]);
        assert_eq!(a.det(), 0.0);
        assert!(a.cofactor().is_finite());
    }

    #[test]
    fn inverse_round_trip() {
        let a = Tensor2::from_rows([[1.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.2, -0.1, 0.8]]);
        let inv = a.inverse().unwrap();
        assert_close(&a.matmul(&inv), &Tensor2::identity(), 1e-12);
        assert_close(
            &a.inverse_transpose().unwrap(),
            &inv.transpose(),
            1e-12,
        );
    }

    #[test]
    fn det_and_trace() {
        let a = Tensor2::diag(2.0, 3.0, 4.0);
        assert_eq!(a.det(), 24.0);
        assert_eq!(a.trace(), 9.0);
        assert_eq!(a.frobenius_norm(), (4.0f64 + 9.0 + 16.0).sqrt());
    }

    #[test]
    fn works_in_f32() {
        let a = Tensor2::<f32>::diag(2.0, 1.0, 1.0);
        assert_eq!(a.cofactor(), Tensor2::diag(1.0, 2.0, 2.0));
    }
}
