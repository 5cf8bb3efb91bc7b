//! Strain invariants and their exact derivatives with respect to the
//! deformation gradient.
//!
//! The invariant set is (I1, I2, I3, I3*) of the right Cauchy-Green tensor
//! C = FᵀF, with I3* = -sqrt(I3) as the extra polyconvex invariant that
//! lets a non-decreasing potential produce negative stresses.

use crate::float::Real;
use crate::tensor::Tensor2;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("deformation gradient must have positive determinant, got det F = {0}")]
    NonPositiveDet(f64),
    #[error("jacobian must be positive, got J = {0}")]
    NonPositiveJacobian(f64),
}

/// Deformation gradient, an element of GL+(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformationGradient<T> {
    f: Tensor2<T>,
}

impl<T: Real> DeformationGradient<T> {
    /// Validates det F > 0.
    pub fn new(f: Tensor2<T>) -> Result<Self, DomainError> {
        let d = f.det();
        if d <= T::zero() || !d.is_finite() {
            return Err(DomainError::NonPositiveDet(d.to_f64_lossy()));
        }
        Ok(Self { f })
    }

    pub fn identity() -> Self {
        Self {
            f: Tensor2::identity(),
        }
    }

    pub fn tensor(&self) -> &Tensor2<T> {
        &self.f
    }

    pub fn det(&self) -> T {
        self.f.det()
    }
}

/// The invariant quadruple (I1, I2, I3, I3*).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantSet<T> {
    pub i1: T,
    pub i2: T,
    pub i3: T,
    pub i3_star: T,
}

impl<T: Real> InvariantSet<T> {
    pub fn to_array(&self) -> [T; 4] {
        [self.i1, self.i2, self.i3, self.i3_star]
    }

    /// Invariants of the undeformed state F = I.
    pub fn reference() -> Self {
        Self {
            i1: T::real(3.0),
            i2: T::real(3.0),
            i3: T::one(),
            i3_star: -T::one(),
        }
    }
}

/// Derivatives of each invariant with respect to F.
#[derive(Clone, Copy, Debug)]
pub struct InvariantGradients<T> {
    pub d_i1: Tensor2<T>,
    pub d_i2: Tensor2<T>,
    pub d_i3: Tensor2<T>,
    pub d_i3_star: Tensor2<T>,
}

impl<T: Real> InvariantGradients<T> {
    pub fn as_array(&self) -> [&Tensor2<T>; 4] {
        [&self.d_i1, &self.d_i2, &self.d_i3, &self.d_i3_star]
    }
}

/// Independent polyconvexity coordinates ξ = (F, H, J); `H` stands in for
/// Cof F and `J` for det F, but the probe treats them as free.
#[derive(Clone, Copy, Debug)]
pub struct PolyArgs<T> {
    pub f: Tensor2<T>,
    pub h: Tensor2<T>,
    pub j: T,
}

/// Invariants of C = FᵀF: I1 = tr C, I2 = tr Cof C, I3 = det C, I3* = -sqrt I3.
pub fn invariants<T: Real>(f: &DeformationGradient<T>) -> InvariantSet<T> {
    let c = f.tensor().transpose().matmul(f.tensor());
    let i3 = c.det();
    InvariantSet {
        i1: c.trace(),
        i2: c.cofactor().trace(),
        i3,
        i3_star: -i3.sqrt(),
    }
}

/// Exact F-gradients of the invariants:
/// dI1/dF = 2F, dI2/dF = 2F(I1 I - C), dI3/dF = 2 I3 F^{-T},
/// dI3*/dF = -J F^{-T}.
pub fn invariant_gradients<T: Real>(f: &DeformationGradient<T>) -> InvariantGradients<T> {
    let two = T::real(2.0);
    let ft = f.tensor();
    let c = ft.transpose().matmul(ft);
    let i1 = c.trace();
    let j = ft.det();
    let i3 = j * j;
    let f_inv_t = ft
        .inverse_transpose()
        .expect("det F > 0 guaranteed by DeformationGradient");
    InvariantGradients {
        d_i1: ft.scale(two),
        d_i2: ft.matmul(&(Tensor2::identity().scale(i1) - c)).scale(two),
        d_i3: f_inv_t.scale(two * i3),
        d_i3_star: f_inv_t.scale(-j),
    }
}

/// Invariants from independent ξ coordinates: I1 = ||F||², I2 = ||H||²,
/// I3 = J², I3* = -J. Coincides with [`invariants`] when ξ is consistent.
pub fn poly_invariants<T: Real>(xi: &PolyArgs<T>) -> Result<InvariantSet<T>, DomainError> {
    if xi.j <= T::zero() || !xi.j.is_finite() {
        return Err(DomainError::NonPositiveJacobian(xi.j.to_f64_lossy()));
    }
    Ok(InvariantSet {
        i1: xi.f.ddot(&xi.f),
        i2: xi.h.ddot(&xi.h),
        i3: xi.j * xi.j,
        i3_star: -xi.j,
    })
}

/// Uniformly seeded rotation via Gram-Schmidt with a cross-product third
/// column, so QᵀQ = I and det Q = +1 to rounding.
pub fn random_rotation<T: Real, R: Rng>(rng: &mut R) -> Tensor2<T> {
    loop {
        let mut v = [[T::zero(); 3]; 2];
        for row in v.iter_mut() {
            for e in row.iter_mut() {
                *e = T::real(rng.gen_range(-1.0..1.0));
            }
        }
        let norm = |a: [T; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let n1 = norm(v[0]);
        if n1 < T::real(1e-3) {
            continue;
        }
        let q1 = [v[0][0] / n1, v[0][1] / n1, v[0][2] / n1];
        let dot = q1[0] * v[1][0] + q1[1] * v[1][1] + q1[2] * v[1][2];
        let u2 = [
            v[1][0] - dot * q1[0],
            v[1][1] - dot * q1[1],
            v[1][2] - dot * q1[2],
        ];
        let n2 = norm(u2);
        if n2 < T::real(1e-3) {
            continue;
        }
        let q2 = [u2[0] / n2, u2[1] / n2, u2[2] / n2];
        let q3 = [
            q1[1] * q2[2] - q1[2] * q2[1],
            q1[2] * q2[0] - q1[0] * q2[2],
            q1[0] * q2[1] - q1[1] * q2[0],
        ];
        return Tensor2::from_rows([
            [q1[0], q2[0], q3[0]],
            [q1[1], q2[1], q3[1]],
            [q1[2], q2[2], q3[2]],
        ]);
    }
}

/// Draws F = I + 0.3 G with G entries uniform in [-1, 1], rejecting draws
/// with det F outside [0.2, 3]. Keeps probes inside the physically
/// exercised deformation range.
pub fn random_deformation<T: Real, R: Rng>(rng: &mut R) -> DeformationGradient<T> {
    loop {
        let mut f = Tensor2::identity();
        for i in 0..3 {
            for j in 0..3 {
                f.m[i][j] += T::real(0.3 * rng.gen_range(-1.0..1.0));
            }
        }
        let d = f.det();
        if d >= T::real(0.2) && d <= T::real(3.0) {
            return DeformationGradient::new(f).expect("det in range");
        }
    }
}
