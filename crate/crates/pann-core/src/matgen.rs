//! Analytical parametrised Neo-Hookean ground truth and dataset
//! construction.
//!
//! Ground truth is the compressible Neo-Hookean potential
//! ψ = μ/2 (I1 - 3 - 2 ln J) + λ/2 (J - 1)² with closed-form stress
//! P = μ (F - F^{-T}) + λ J (J - 1) F^{-T}.
//!
//! Two parameter families are provided: three scalar parametrisations of
//! the Lamé constants with constant bulk modulus κ = 100, and a
//! two-parameter family inspired by resin printing where μ depends on a
//! grey value and an exposure time through a tanh saturation.
//!
//! Load cases mirror physical experiments: uniaxial and equibiaxial
//! tension with the lateral stretches solved so the free faces are
//! traction free, simple shear, and a mixed shear-tension path used for
//! testing. The mixed path prescribes the in-plane components
//! F11 = 1 + γ, F12 = γ and solves the thickness stretch F33 for P33 = 0,
//! so its stresses stay on the same scale as the calibration paths.

use crate::dataset::{DataTuple, Dataset, Role};
use crate::float::Real;
use crate::kinematics::{DeformationGradient, DomainError};
use crate::tensor::Tensor2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatgenError {
    #[error("parameter {name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("load-state solve failed: {0}")]
    Solve(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Points per load path.
pub const POINTS_PER_PATH: usize = 101;
/// Size of the scalar parameter grid on [0, 1].
pub const T_GRID: usize = 201;
/// Constant bulk modulus of the scalar parametrisations.
pub const KAPPA: f64 = 100.0;
/// Constant first Lamé parameter of the print parametrisation.
pub const LAMBDA_PRINT: f64 = 100.0;

/// Indices into the 201-point t-grid used for calibration.
pub const STUDY1_CALIB_T_IDX: [usize; 6] = [0, 40, 80, 120, 160, 200];
pub const STUDY2_CALIB_T_IDX: [usize; 4] = [0, 20, 180, 200];

/// Neo-Hookean material with Lamé parameters μ, λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeoHookeMaterial<T> {
    pub mu: T,
    pub lambda: T,
}

/// The three scalar parametrisations of μ(t).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarCase {
    A,
    B,
    C,
}

impl ScalarCase {
    pub const ALL: [ScalarCase; 3] = [ScalarCase::A, ScalarCase::B, ScalarCase::C];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScalarCase::A => "A",
            ScalarCase::B => "B",
            ScalarCase::C => "C",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Some(ScalarCase::A),
            "B" => Some(ScalarCase::B),
            "C" => Some(ScalarCase::C),
            _ => None,
        }
    }
}

impl std::fmt::Display for ScalarCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_unit<T: Real>(name: &'static str, v: T) -> Result<(), MatgenError> {
    if v < T::zero() || v > T::one() || !v.is_finite() {
        return Err(MatgenError::OutOfRange {
            name,
            value: v.to_f64_lossy(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// μ(t) for the scalar cases: A linear, B convex, C concave in t.
pub fn mu_scalar<T: Real>(case: ScalarCase, t: T) -> Result<T, MatgenError> {
    check_unit("t", t)?;
    let l = |v: f64| T::real(v);
    Ok(match case {
        ScalarCase::A => l(0.5) + l(2.0) * t,
        ScalarCase::B => l(8.0) * t * t - l(8.0) * t + l(2.5),
        ScalarCase::C => -(l(8.0) * t * t) + l(8.0) * t + l(0.5),
    })
}

/// λ(t) = κ - (2/3) μ(t) with κ = 100.
pub fn lambda_scalar<T: Real>(case: ScalarCase, t: T) -> Result<T, MatgenError> {
    Ok(T::real(KAPPA) - T::real(2.0 / 3.0) * mu_scalar(case, t)?)
}

pub fn material_scalar<T: Real>(case: ScalarCase, t: T) -> Result<NeoHookeMaterial<T>, MatgenError> {
    Ok(NeoHookeMaterial {
        mu: mu_scalar(case, t)?,
        lambda: lambda_scalar(case, t)?,
    })
}

/// μ(G⁰, τ⁰) = 2.5 tanh(1.7 Ĝ² ln τ̂) with Ĝ = 0.6 + 0.4 G⁰ and
/// τ̂ = 1.5 + 4.5 τ⁰; monotonically increasing in both arguments and
/// bounded by 2.5.
pub fn mu_print<T: Real>(g0: T, tau0: T) -> Result<T, MatgenError> {
    check_unit("G0", g0)?;
    check_unit("tau0", tau0)?;
    let g_hat = T::real(0.6) + T::real(0.4) * g0;
    let tau_hat = T::real(1.5) + T::real(4.5) * tau0;
    let hv = T::real(1.7) * g_hat * g_hat * tau_hat.ln();
    Ok(T::real(2.5) * hv.tanh())
}

pub fn material_print<T: Real>(t: &[T]) -> Result<NeoHookeMaterial<T>, MatgenError> {
    Ok(NeoHookeMaterial {
        mu: mu_print(t[0], t[1])?,
        lambda: T::real(LAMBDA_PRINT),
    })
}

/// Closed-form Neo-Hookean potential.
pub fn nh_potential<T: Real>(
    mat: &NeoHookeMaterial<T>,
    f: &DeformationGradient<T>,
) -> T {
    let c = f.tensor().transpose().matmul(f.tensor());
    let i1 = c.trace();
    let j = f.det();
    let half = T::real(0.5);
    mat.mu * half * (i1 - T::real(3.0) - T::real(2.0) * j.ln())
        + mat.lambda * half * (j - T::one()) * (j - T::one())
}

/// Closed-form first Piola-Kirchhoff stress
/// P = μ (F - F^{-T}) + λ J (J - 1) F^{-T}.
pub fn nh_stress<T: Real>(mat: &NeoHookeMaterial<T>, f: &DeformationGradient<T>) -> Tensor2<T> {
    let j = f.det();
    let f_inv_t = f
        .tensor()
        .inverse_transpose()
        .expect("det F > 0 guaranteed");
    let dev = *f.tensor() - f_inv_t;
    dev.scale(mat.mu) + f_inv_t.scale(mat.lambda * j * (j - T::one()))
}

/// Newton iteration on a scalar residual with central finite-difference
/// slope (step 1e-7), step halving while the residual grows, and a
/// bisection fallback on [0.3, 3]. Converges to |r| <= 1e-12.
fn solve_scalar_root<T: Real>(
    residual: impl Fn(T) -> T,
    init: T,
    what: &'static str,
) -> Result<T, MatgenError> {
    let tol = T::real(1e-12);
    let fd_step = T::real(1e-7);
    let mut s = init;
    let mut r = residual(s);
    for _ in 0..100 {
        if r.abs() <= tol {
            return Ok(s);
        }
        let slope = (residual(s + fd_step) - residual(s - fd_step)) / (T::real(2.0) * fd_step);
        if slope == T::zero() || !slope.is_finite() {
            break;
        }
        let mut step = r / slope;
        // Damping: halve while the residual increases.
        let mut improved = false;
        for _ in 0..60 {
            let cand = s - step;
            if cand > T::zero() {
                let rc = residual(cand);
                if rc.abs() < r.abs() {
                    s = cand;
                    r = rc;
                    improved = true;
                    break;
                }
            }
            step = step * T::real(0.5);
        }
        if !improved {
            break;
        }
    }
    if r.abs() <= tol {
        return Ok(s);
    }
    // Bisection fallback.
    let (mut lo, mut hi) = (T::real(0.3), T::real(3.0));
    let (mut rlo, rhi) = (residual(lo), residual(hi));
    if (rlo > T::zero()) == (rhi > T::zero()) {
        return Err(MatgenError::Solve(format!(
            "{what}: no convergence and no sign change on [0.3, 3]"
        )));
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::real(0.5);
        let rm = residual(mid);
        if rm.abs() <= tol {
            return Ok(mid);
        }
        if (rm > T::zero()) == (rlo > T::zero()) {
            lo = mid;
            rlo = rm;
        } else {
            hi = mid;
        }
    }
    Err(MatgenError::Solve(format!(
        "{what}: bisection failed to reach tolerance"
    )))
}

/// Uniaxial tension/compression in x: F = diag(F11, s, s) with s solving
/// P22 = 0 (P33 = 0 follows by symmetry).
pub fn solve_uniaxial<T: Real>(
    mat: &NeoHookeMaterial<T>,
    f11: T,
) -> Result<DeformationGradient<T>, MatgenError> {
    let residual = |s: T| {
        let f = DeformationGradient::new(Tensor2::diag(f11, s, s)).expect("positive stretches");
        nh_stress(mat, &f).m[1][1]
    };
    let s = solve_scalar_root(residual, T::one(), "uniaxial")?;
    Ok(DeformationGradient::new(Tensor2::diag(f11, s, s))?)
}

/// Equibiaxial tension/compression in x-y: F = diag(F11, F11, c) with c
/// solving P33 = 0.
pub fn solve_equibiaxial<T: Real>(
    mat: &NeoHookeMaterial<T>,
    f11: T,
) -> Result<DeformationGradient<T>, MatgenError> {
    let residual = |c: T| {
        let f = DeformationGradient::new(Tensor2::diag(f11, f11, c)).expect("positive stretches");
        nh_stress(mat, &f).m[2][2]
    };
    let c = solve_scalar_root(residual, T::one(), "equibiaxial")?;
    Ok(DeformationGradient::new(Tensor2::diag(f11, f11, c))?)
}

/// Simple shear: F = I + γ e1⊗e2.
pub fn shear_f<T: Real>(gamma: T) -> DeformationGradient<T> {
    let mut m = Tensor2::identity();
    m.m[0][1] = gamma;
    DeformationGradient::new(m).expect("unit determinant")
}

/// Mixed shear-tension: in-plane components F11 = 1 + γ and F12 = γ are
/// prescribed, the thickness stretch F33 = c solves P33 = 0. A general
/// deformation mode combining tension, shear and a solved lateral
/// response, consistent with how the other load cases are generated.
pub fn solve_mixed<T: Real>(
    mat: &NeoHookeMaterial<T>,
    gamma: T,
) -> Result<DeformationGradient<T>, MatgenError> {
    let base = {
        let mut m = Tensor2::identity();
        m.m[0][0] = T::one() + gamma;
        m.m[0][1] = gamma;
        m
    };
    let residual = |c: T| {
        let mut m = base;
        m.m[2][2] = c;
        let f = DeformationGradient::new(m).expect("positive stretches");
        nh_stress(mat, &f).m[2][2]
    };
    let c = solve_scalar_root(residual, T::one(), "mixed shear-tension")?;
    let mut m = base;
    m.m[2][2] = c;
    Ok(DeformationGradient::new(m)?)
}

/// The four load paths. Calibration uses the first three; the mixed path
/// is reserved for testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoadPath {
    Uniaxial,
    Equibiaxial,
    SimpleShear,
    MixedShearTension,
}

impl LoadPath {
    pub const CALIBRATION: [LoadPath; 3] = [
        LoadPath::Uniaxial,
        LoadPath::Equibiaxial,
        LoadPath::SimpleShear,
    ];

    pub fn id(&self) -> u32 {
        match self {
            LoadPath::Uniaxial => 0,
            LoadPath::Equibiaxial => 1,
            LoadPath::SimpleShear => 2,
            LoadPath::MixedShearTension => 3,
        }
    }

    /// Control parameter value at grid point k of [`POINTS_PER_PATH`].
    pub fn control<T: Real>(&self, k: usize) -> T {
        let frac = T::real(k as f64 / (POINTS_PER_PATH - 1) as f64);
        match self {
            // F11 in [0.5, 1.5]
            LoadPath::Uniaxial | LoadPath::Equibiaxial => T::real(0.5) + frac,
            // gamma in [-0.5, 0.5]
            LoadPath::SimpleShear => frac - T::real(0.5),
            // gamma in [0, 0.5]
            LoadPath::MixedShearTension => frac * T::real(0.5),
        }
    }

    pub fn state<T: Real>(
        &self,
        mat: &NeoHookeMaterial<T>,
        k: usize,
    ) -> Result<DeformationGradient<T>, MatgenError> {
        let c = self.control::<T>(k);
        match self {
            LoadPath::Uniaxial => solve_uniaxial(mat, c),
            LoadPath::Equibiaxial => solve_equibiaxial(mat, c),
            LoadPath::SimpleShear => Ok(shear_f(c)),
            LoadPath::MixedShearTension => solve_mixed(mat, c),
        }
    }
}

/// The scalar t-grid value at index `idx` of the 201-point grid.
pub fn t_grid_value<T: Real>(idx: usize) -> T {
    T::real(idx as f64 / (T_GRID - 1) as f64)
}

fn append_path<T: Real>(
    tuples: &mut Vec<DataTuple<T>>,
    path: LoadPath,
    mat: &NeoHookeMaterial<T>,
    t: &[T],
    t_index: u32,
) -> Result<(), MatgenError> {
    for k in 0..POINTS_PER_PATH {
        let f = path.state(mat, k)?;
        let p = nh_stress(mat, &f);
        tuples.push(DataTuple {
            f: *f.tensor(),
            t: t.to_vec(),
            p,
            load_path: path.id(),
            t_index,
        });
    }
    Ok(())
}

fn build_scalar_study<T: Real>(
    case: ScalarCase,
    calib_idx: &[usize],
    role: Role,
) -> Result<Dataset<T>, MatgenError> {
    let mut tuples = Vec::new();
    match role {
        Role::Calib => {
            for path in LoadPath::CALIBRATION {
                for (tj, &idx) in calib_idx.iter().enumerate() {
                    let t = t_grid_value::<T>(idx);
                    let mat = material_scalar(case, t)?;
                    append_path(&mut tuples, path, &mat, &[t], tj as u32)?;
                }
            }
        }
        Role::Test => {
            let mut tj = 0u32;
            for idx in 0..T_GRID {
                if calib_idx.contains(&idx) {
                    continue;
                }
                let t = t_grid_value::<T>(idx);
                let mat = material_scalar(case, t)?;
                append_path(&mut tuples, LoadPath::MixedShearTension, &mat, &[t], tj)?;
                tj += 1;
            }
        }
    }
    Ok(Dataset { tuples, t_dim: 1 })
}

/// Study with six calibration t-values spanning [0, 1]:
/// calibration = 3 paths x 101 points x 6 t = 1818 tuples,
/// test = mixed path x 101 points x 195 remaining t = 19695 tuples.
pub fn build_study1<T: Real>(case: ScalarCase, role: Role) -> Result<Dataset<T>, MatgenError> {
    build_scalar_study(case, &STUDY1_CALIB_T_IDX, role)
}

/// Edge-of-domain study with t in {0, 0.1, 0.9, 1}:
/// calibration = 1212 tuples, test = 19897 tuples.
pub fn build_study2<T: Real>(case: ScalarCase, role: Role) -> Result<Dataset<T>, MatgenError> {
    build_scalar_study(case, &STUDY2_CALIB_T_IDX, role)
}

/// Iso-curve of constant μ* in the (G⁰, τ⁰) plane, sampled at `n` equally
/// spaced G⁰ over the sub-interval of [0, 1] where τ⁰ lands in [0, 1].
pub fn iso_curve_samples<T: Real>(mu_star: T, n: usize) -> Vec<[T; 2]> {
    let h_star = (mu_star / T::real(2.5)).atanh();
    let tau0_of_g0 = |g0: T| {
        let g_hat = T::real(0.6) + T::real(0.4) * g0;
        let tau_hat = (h_star / (T::real(1.7) * g_hat * g_hat)).exp();
        ((tau_hat - T::real(1.5)) / T::real(4.5))
            .max(T::zero())
            .min(T::one())
    };
    // G-hat bounds from tau-hat in [1.5, 6].
    let g_hat_lo = (h_star / (T::real(1.7) * T::real(6.0).ln())).sqrt();
    let g_hat_hi = (h_star / (T::real(1.7) * T::real(1.5).ln())).sqrt();
    let to_g0 = |g_hat: T| ((g_hat - T::real(0.6)) / T::real(0.4)).max(T::zero()).min(T::one());
    let g_lo = to_g0(g_hat_lo);
    let g_hi = to_g0(g_hat_hi);
    (0..n)
        .map(|i| {
            let frac = T::real(i as f64 / (n - 1) as f64);
            let g0 = g_lo + (g_hi - g_lo) * frac;
            [g0, tau0_of_g0(g0)]
        })
        .collect()
}

/// Targets of the two test iso-curves.
pub const ISO_CURVE_MU: [f64; 2] = [1.4, 2.4];
/// Samples per iso-curve.
pub const ISO_CURVE_SAMPLES: usize = 100;

/// Vector-valued study: calibration on the 3x3 grid {0, 0.5, 1}² of
/// (G⁰, τ⁰) = 2727 tuples; test on two μ-iso-curves with 100 samples each
/// = 20200 tuples.
pub fn build_vector_study<T: Real>(role: Role) -> Result<Dataset<T>, MatgenError> {
    let mut tuples = Vec::new();
    match role {
        Role::Calib => {
            let grid = [T::zero(), T::real(0.5), T::one()];
            for path in LoadPath::CALIBRATION {
                let mut tj = 0u32;
                for &g0 in &grid {
                    for &tau0 in &grid {
                        let t = [g0, tau0];
                        let mat = material_print(&t)?;
                        append_path(&mut tuples, path, &mat, &t, tj)?;
                        tj += 1;
                    }
                }
            }
        }
        Role::Test => {
            let mut tj = 0u32;
            for &mu_star in &ISO_CURVE_MU {
                for t in iso_curve_samples(T::real(mu_star), ISO_CURVE_SAMPLES) {
                    let mat = material_print(&t)?;
                    append_path(&mut tuples, LoadPath::MixedShearTension, &mat, &t, tj)?;
                    tj += 1;
                }
            }
        }
    }
    Ok(Dataset { tuples, t_dim: 2 })
}
