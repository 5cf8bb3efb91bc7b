//! Physics-augmented potential and first Piola-Kirchhoff stress.
//!
//! The model is ψ = ψ_nn(I(F); t) + ψ_growth(J) - n(t) J, where ψ_nn is a
//! pICNN in the invariants, ψ_growth = (J + 1/J - 2)² enforces blow-up as
//! J → 0⁺ and the linear-in-J term cancels the stress in the reference
//! configuration. The coefficients of n(t) follow from the invariant
//! gradients at identity (2I, 4I, 2I, -I) together with dJ/dF|_I = I, so
//! that P(I; t) = 0 holds exactly for every parameter vector:
//!
//!   n(t) = 2 ψ,I1 + 4 ψ,I2 + 2 ψ,I3 - ψ,I3*   (all at F = I)

use crate::float::{format_full, parse_full, Real};
use crate::kinematics::{
    invariant_gradients, invariants, poly_invariants, DeformationGradient, DomainError,
    InvariantSet, PolyArgs,
};
use crate::picnn::{
    self, read_picnn_block, write_picnn_block, ModelIoError, ParamLayout, PicnnConfig,
    PicnnParams,
};
use crate::tensor::Tensor2;
use std::io::{BufRead, Write};
use std::path::Path;

/// Weights of the four invariant derivatives in n(t), fixed by the chain
/// rule at the reference configuration.
pub const NORMALISATION_COEFFS: [f64; 4] = [2.0, 4.0, 2.0, -1.0];

/// A pICNN wrapped into the physics-augmented potential.
#[derive(Clone, Debug)]
pub struct PannModel<T> {
    config: PicnnConfig,
    layout: ParamLayout,
    pub params: PicnnParams<T>,
    /// Data normalisation factor: model stress in physical units is
    /// `stress_scale` times the internal (normalized) assembly.
    pub stress_scale: T,
    /// When false the -n(t) J term is dropped (ablation study).
    pub normalisation_term: bool,
    /// Free-form provenance notes persisted with the model file.
    pub provenance: Vec<(String, String)>,
}

/// Stress evaluation output.
#[derive(Clone, Debug)]
pub struct StressResult<T> {
    pub p: Tensor2<T>,
    pub psi: T,
}

impl<T: Real> PannModel<T> {
    pub fn new(config: PicnnConfig, params: PicnnParams<T>) -> Self {
        let layout = config.layout();
        assert_eq!(params.values.len(), layout.len, "parameter count mismatch");
        Self {
            config,
            layout,
            params,
            stress_scale: T::one(),
            normalisation_term: true,
            provenance: Vec::new(),
        }
    }

    /// Fresh model with fan-in initialized parameters.
    pub fn init(config: PicnnConfig, seed: u64) -> Self {
        let params = picnn::init(&config, seed);
        Self::new(config, params)
    }

    pub fn config(&self) -> &PicnnConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn y_dim(&self) -> usize {
        self.config.y_dim
    }

    fn nn_eval(&self, inv: &InvariantSet<T>, t: &[T]) -> picnn::EvalResult<T> {
        picnn::eval(&self.layout, &self.params.values, &inv.to_array(), t)
    }

    /// The scalar n(t): weighted invariant derivatives of the pICNN at the
    /// reference configuration.
    pub fn normalisation_offset(&self, t: &[T]) -> T {
        let res = self.nn_eval(&InvariantSet::reference(), t);
        normalisation_from_grad(&res.grad_x)
    }

    /// ψ(F; t) in physical units.
    pub fn potential(&self, f: &DeformationGradient<T>, t: &[T]) -> T {
        let inv = invariants(f);
        let j = f.det();
        let mut psi = self.nn_eval(&inv, t).value + growth_term(j).expect("det F > 0");
        if self.normalisation_term {
            psi -= self.normalisation_offset(t) * j;
        }
        psi * self.stress_scale
    }

    /// Potential on the independent polyconvexity coordinates ξ = (F, H, J);
    /// used by the convexity probes.
    pub fn poly_potential(&self, xi: &PolyArgs<T>, t: &[T]) -> Result<T, DomainError> {
        let inv = poly_invariants(xi)?;
        let mut psi = self.nn_eval(&inv, t).value + growth_term(xi.j)?;
        if self.normalisation_term {
            psi -= self.normalisation_offset(t) * xi.j;
        }
        Ok(psi * self.stress_scale)
    }

    /// First Piola-Kirchhoff stress, assembled from the explicit invariant
    /// derivatives, plus the potential value.
    pub fn stress(&self, f: &DeformationGradient<T>, t: &[T]) -> StressResult<T> {
        let inv = invariants(f);
        let grads = invariant_gradients(f);
        let j = f.det();
        let cof = f.tensor().cofactor(); // J F^{-T}
        let res = self.nn_eval(&inv, t);
        let mut p = Tensor2::zeros();
        for (g, d) in res.grad_x.iter().zip(grads.as_array()) {
            p = p + d.scale(*g);
        }
        p = p + cof.scale(growth_term_dj(j).expect("det F > 0"));
        let mut psi = res.value + growth_term(j).expect("det F > 0");
        if self.normalisation_term {
            let n = self.normalisation_offset(t);
            p = p - cof.scale(n);
            psi -= n * j;
        }
        StressResult {
            p: p.scale(self.stress_scale),
            psi: psi * self.stress_scale,
        }
    }

    /// Exact dP/dθ for every trainable scalar, in canonical parameter
    /// order. Assembled from the mixed second derivatives of the pICNN;
    /// the growth term carries no parameters.
    pub fn stress_param_grad(&self, f: &DeformationGradient<T>, t: &[T]) -> Vec<Tensor2<T>> {
        let inv = invariants(f);
        let grads = invariant_gradients(f);
        let cof = f.tensor().cofactor();
        let x = inv.to_array();
        let mixed = picnn::grad_params_of_grad_x(&self.layout, &self.params.values, &x, t);
        let mixed_ref = if self.normalisation_term {
            Some(picnn::grad_params_of_grad_x(
                &self.layout,
                &self.params.values,
                &InvariantSet::reference().to_array(),
                t,
            ))
        } else {
            None
        };
        let coeffs = NORMALISATION_COEFFS.map(T::real);
        (0..self.layout.len)
            .map(|jdx| {
                let mut dp = Tensor2::zeros();
                for (a, d) in grads.as_array().iter().enumerate() {
                    dp = dp + d.scale(mixed[a][jdx]);
                }
                if let Some(mr) = &mixed_ref {
                    let mut dn = T::zero();
                    for (a, c) in coeffs.iter().enumerate() {
                        dn += *c * mr[a][jdx];
                    }
                    dp = dp - cof.scale(dn);
                }
                dp.scale(self.stress_scale)
            })
            .collect()
    }

    /// Contraction `W : dP/dθ` for all θ at once, via two directional
    /// dual sweeps instead of materializing one tensor per parameter.
    /// `acc[j] += factor * (W : dP/dθ_j)`; returns the normalized stress
    /// assembly so callers can reuse the forward work.
    pub fn stress_param_grad_contracted(
        &self,
        prep: &PreparedPoint<T>,
        t: &[T],
        w: &Tensor2<T>,
        factor: T,
        reference: &ReferenceGrads<T>,
        acc: &mut [T],
    ) {
        // dP/dθ : W = Σ_a (dI_a/dF : W) d g_a/dθ - (J F^{-T} : W) dn/dθ.
        let mut dir = [T::zero(); 4];
        for (a, d) in prep.inv_grads.iter().enumerate() {
            dir[a] = d.ddot(w);
        }
        let dual = picnn::dual_eval(
            &self.layout,
            &self.params.values,
            &prep.invariants,
            t,
            &dir,
        );
        for (slot, g) in acc.iter_mut().zip(dual.grad_params_dir_grad.iter()) {
            *slot += factor * *g;
        }
        if self.normalisation_term {
            let r = prep.cof.ddot(w);
            for (slot, g) in acc.iter_mut().zip(reference.grad_params_n.iter()) {
                *slot -= factor * r * *g;
            }
        }
    }

    /// Normalized-unit stress (the internal assembly without
    /// `stress_scale`), using precomputed kinematic quantities.
    pub fn stress_normalized_prepared(&self, prep: &PreparedPoint<T>, t: &[T], n: T) -> Tensor2<T> {
        let res = picnn::eval(&self.layout, &self.params.values, &prep.invariants, t);
        let mut p = Tensor2::zeros();
        for (g, d) in res.grad_x.iter().zip(prep.inv_grads.iter()) {
            p = p + d.scale(*g);
        }
        p = p + prep.growth_stress;
        if self.normalisation_term {
            p = p - prep.cof.scale(n);
        }
        p
    }

    /// Per-parameter gradient of n(t), plus n itself, via one dual sweep
    /// at the reference invariants seeded with the normalisation coefficients.
    pub fn reference_grads(&self, t: &[T]) -> ReferenceGrads<T> {
        let dir = NORMALISATION_COEFFS.map(T::real);
        let dual = picnn::dual_eval(
            &self.layout,
            &self.params.values,
            &InvariantSet::reference().to_array(),
            t,
            &dir,
        );
        ReferenceGrads {
            n: dual.dir_grad,
            grad_params_n: dual.grad_params_dir_grad,
            grad_y_n: dual.grad_y_dir_grad,
        }
    }

    /// dψ/dt in physical units: the pICNN y-gradient minus J dn/dt.
    pub fn potential_param_gradient(&self, f: &DeformationGradient<T>, t: &[T]) -> Vec<T> {
        let inv = invariants(f);
        let res = self.nn_eval(&inv, t);
        let mut grad = res.grad_y;
        if self.normalisation_term {
            let j = f.det();
            let refg = self.reference_grads(t);
            for (g, dn) in grad.iter_mut().zip(refg.grad_y_n.iter()) {
                *g -= j * *dn;
            }
        }
        for g in &mut grad {
            *g *= self.stress_scale;
        }
        grad
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "pann-model v1")?;
        write_picnn_block(&mut file, &self.config, &self.params)?;
        writeln!(file, "stress_scale {}", format_full(self.stress_scale))?;
        writeln!(file, "normalisation_term {}", self.normalisation_term)?;
        for (k, v) in &self.provenance {
            writeln!(file, "provenance {k}={v}")?;
        }
        writeln!(file, "end")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let lines: Vec<String> = file.lines().collect::<Result<_, _>>()?;
        let mut iter = lines.iter().map(|s| s.as_str());
        match iter.next() {
            Some("pann-model v1") => {}
            other => {
                return Err(ModelIoError::Malformed(format!(
                    "unsupported header {other:?}"
                )))
            }
        }
        let (config, params) = read_picnn_block::<T, _>(&mut iter)?;
        let mut model = PannModel::new(config, params);
        for line in iter {
            if line == "end" {
                return Ok(model);
            }
            let (key, rest) = line
                .split_once(' ')
                .ok_or_else(|| ModelIoError::Malformed(format!("bad line {line:?}")))?;
            match key {
                "stress_scale" => {
                    model.stress_scale = parse_full(rest)
                        .ok_or_else(|| ModelIoError::Malformed("bad stress_scale".into()))?;
                }
                "normalisation_term" => {
                    model.normalisation_term = rest.trim() == "true";
                }
                "provenance" => {
                    let (k, v) = rest
                        .split_once('=')
                        .ok_or_else(|| ModelIoError::Malformed("bad provenance line".into()))?;
                    model.provenance.push((k.to_string(), v.to_string()));
                }
                _ => return Err(ModelIoError::Malformed(format!("unknown field {key}"))),
            }
        }
        Err(ModelIoError::Malformed("missing end marker".into()))
    }
}

/// Kinematic quantities of one data point that do not depend on the
/// parameters; computed once per dataset and reused every epoch.
#[derive(Clone, Debug)]
pub struct PreparedPoint<T> {
    pub invariants: [T; 4],
    pub inv_grads: [Tensor2<T>; 4],
    /// Cof F = J F^{-T}.
    pub cof: Tensor2<T>,
    /// growth'(J) · Cof F, the parameter-free stress contribution.
    pub growth_stress: Tensor2<T>,
    pub j: T,
}

impl<T: Real> PreparedPoint<T> {
    pub fn new(f: &DeformationGradient<T>) -> Self {
        let inv = invariants(f);
        let grads = invariant_gradients(f);
        let j = f.det();
        let cof = f.tensor().cofactor();
        Self {
            invariants: inv.to_array(),
            inv_grads: [grads.d_i1, grads.d_i2, grads.d_i3, grads.d_i3_star],
            cof,
            growth_stress: cof.scale(growth_term_dj(j).expect("det F > 0")),
            j,
        }
    }
}

/// n(t) and its parameter/y gradients at the reference configuration.
#[derive(Clone, Debug)]
pub struct ReferenceGrads<T> {
    pub n: T,
    pub grad_params_n: Vec<T>,
    pub grad_y_n: Vec<T>,
}

/// n(t) from the invariant gradient of the network at F = I.
pub fn normalisation_from_grad<T: Real>(grad_x: &[T]) -> T {
    let c = NORMALISATION_COEFFS.map(T::real);
    c[0] * grad_x[0] + c[1] * grad_x[1] + c[2] * grad_x[2] + c[3] * grad_x[3]
}

/// The analytical growth term (J + 1/J - 2)².
pub fn growth_term<T: Real>(j: T) -> Result<T, DomainError> {
    if j <= T::zero() || !j.is_finite() {
        return Err(DomainError::NonPositiveJacobian(j.to_f64_lossy()));
    }
    let u = j + T::one() / j - T::real(2.0);
    Ok(u * u)
}

/// d/dJ of the growth term: 2 (J + 1/J - 2)(1 - 1/J²).
pub fn growth_term_dj<T: Real>(j: T) -> Result<T, DomainError> {
    if j <= T::zero() || !j.is_finite() {
        return Err(DomainError::NonPositiveJacobian(j.to_f64_lossy()));
    }
    let u = j + T::one() / j - T::real(2.0);
    Ok(T::real(2.0) * u * (T::one() - T::one() / (j * j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picnn::{default_config, ArchitectureKind, PicnnConfig};
    use crate::{random_deformation, random_rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model(kind: ArchitectureKind, seed: u64) -> PannModel<f64> {
        let cfg = default_config(kind, 1).unwrap();
        PannModel::init(cfg, seed)
    }

    fn zero_model() -> PannModel<f64> {
        let cfg = default_config(ArchitectureKind::Type1, 1).unwrap();
        let layout = cfg.layout();
        PannModel::new(cfg, PicnnParams::zeros(&layout))
    }

    #[test]
    fn growth_term_values() {
        assert_eq!(growth_term(1.0f64).unwrap(), 0.0);
        assert!((growth_term(2.0f64).unwrap() - 0.25).abs() < 1e-15);
        assert!((growth_term(0.5f64).unwrap() - 0.25).abs() < 1e-15);
        assert!(growth_term(0.0f64).is_err());
        assert!(growth_term(-1.0f64).is_err());
    }

    #[test]
    fn growth_term_derivative() {
        assert_eq!(growth_term_dj(1.0f64).unwrap(), 0.0);
        assert!((growth_term_dj(2.0f64).unwrap() - 0.75).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let j: f64 = rng.gen_range(0.2..3.0);
            let h = 1e-6;
            let fd = (growth_term(j + h).unwrap() - growth_term(j - h).unwrap()) / (2.0 * h);
            let g = growth_term_dj(j).unwrap();
            assert!((g - fd).abs() / (1.0 + fd.abs()) <= 1e-8, "{g} vs {fd}");
        }
    }

    #[test]
    fn zero_network_normalisation_vanishes() {
        let model = zero_model();
        assert_eq!(model.normalisation_offset(&[0.4]), 0.0);
        let f = DeformationGradient::identity();
        assert_eq!(model.potential(&f, &[0.4]), 0.0);
    }

    #[test]
    fn zero_network_potential_reduces_to_growth() {
        let model = zero_model();
        let f = DeformationGradient::new(Tensor2::diag(2.0, 1.0, 1.0)).unwrap();
        assert!((model.potential(&f, &[0.1]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_network_stress_is_growth_only() {
        let model = zero_model();
        let f = DeformationGradient::new(Tensor2::diag(2.0, 1.0, 1.0)).unwrap();
        let s = model.stress(&f, &[0.1]);
        // growth'(2) J F^{-T} = 0.75 * 2 * diag(0.5, 1, 1)
        assert!((s.p - Tensor2::diag(0.75, 1.5, 1.5)).inf_norm() < 1e-14);
    }

    #[test]
    fn constructed_single_path_normalisation() {
        // Network reading I1 through one unit: ψ = wo · s(I1), so at the
        // reference state dψ/dI1 = wo · sigmoid(3) =: c and n = 2c.
        let cfg = PicnnConfig {
            kind: ArchitectureKind::Type1,
            x_dim: 4,
            y_dim: 1,
            x_widths: vec![1],
            y_widths: vec![1],
        };
        let layout = cfg.layout();
        // order: y0.w, y0.b, x0.w (1x4), x0.wy, x0.b, out.w
        let wo = 1.3;
        let params = PicnnParams {
            values: vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, wo],
        };
        assert_eq!(layout.len, params.values.len());
        let model = PannModel::new(cfg, params);
        let c = wo * crate::dual::Scalar::<f64>::sigmoid(3.0);
        let n = model.normalisation_offset(&[0.5]);
        assert!((n - 2.0 * c).abs() < 1e-14, "{n} vs {}", 2.0 * c);
    }

    #[test]
    fn stress_free_reference_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in ArchitectureKind::ALL {
            for seed in 0..25 {
                let model = small_model(kind, seed);
                let t = [rng.gen_range(0.0..1.0)];
                let s = model.stress(&DeformationGradient::identity(), &t);
                assert!(s.p.inf_norm() <= 1e-8, "{kind} seed {seed}: {}", s.p);
            }
        }
    }

    #[test]
    fn ablated_model_violates_normalisation() {
        let mut model = small_model(ArchitectureKind::Type1, 11);
        model.normalisation_term = false;
        let s = model.stress(&DeformationGradient::identity(), &[0.5]);
        assert!(s.p.inf_norm() > 1e-6, "ablation should leave residual stress");
    }

    #[test]
    fn stress_matches_finite_differences_of_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in ArchitectureKind::ALL {
            let model = small_model(kind, 7);
            for _ in 0..10 {
                let f = random_deformation::<f64, _>(&mut rng);
                let t = [rng.gen_range(0.0..1.0)];
                let s = model.stress(&f, &t);
                assert!((s.psi - model.potential(&f, &t)).abs() < 1e-12);
                let h = 1e-5;
                for i in 0..3 {
                    for j in 0..3 {
                        let mut fp = *f.tensor();
                        fp.m[i][j] += h;
                        let mut fm = *f.tensor();
                        fm.m[i][j] -= h;
                        let vp = model.potential(&DeformationGradient::new(fp).unwrap(), &t);
                        let vm = model.potential(&DeformationGradient::new(fm).unwrap(), &t);
                        let fd = (vp - vm) / (2.0 * h);
                        let rel = (s.p.m[i][j] - fd).abs() / (1.0 + fd.abs());
                        assert!(rel <= 1e-6, "{kind} ({i},{j}): {} vs {fd}", s.p.m[i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn stress_param_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ArchitectureKind::Type1, ArchitectureKind::Type3] {
            let model = small_model(kind, 13);
            let f = random_deformation::<f64, _>(&mut rng);
            let t = [0.35];
            let grads = model.stress_param_grad(&f, &t);
            let h = 1e-6;
            for j in (0..model.param_count()).step_by(3) {
                let mut mp = model.clone();
                mp.params.values[j] += h;
                let mut mm = model.clone();
                mm.params.values[j] -= h;
                let fd = (mp.stress(&f, &t).p - mm.stress(&f, &t).p).scale(1.0 / (2.0 * h));
                let err = (grads[j] - fd).inf_norm() / (1.0 + fd.inf_norm());
                assert!(err <= 1e-5, "{kind} param {j}: err {err}");
            }
        }
    }

    #[test]
    fn stress_param_grad_vanishes_at_identity() {
        // P(I; t) = 0 identically in θ, so dP(I)/dθ = 0 as well.
        let model = small_model(ArchitectureKind::Type2, 17);
        let grads = model.stress_param_grad(&DeformationGradient::identity(), &[0.7]);
        for (j, g) in grads.iter().enumerate() {
            assert!(g.inf_norm() <= 1e-8, "param {j}: {g}");
        }
    }

    #[test]
    fn dead_path_parameters_have_zero_sensitivity() {
        let model = zero_model();
        let f = DeformationGradient::new(Tensor2::diag(1.4, 0.9, 1.0)).unwrap();
        let grads = model.stress_param_grad(&f, &[0.2]);
        // A hidden y-trunk bias feeds only zeroed weight paths.
        let bias_spec = model
            .layout()
            .specs
            .iter()
            .find(|s| s.label == "y1.b")
            .unwrap()
            .clone();
        for j in bias_spec.range() {
            assert_eq!(grads[j].inf_norm(), 0.0);
        }
    }

    #[test]
    fn contracted_param_grad_matches_materialized() {
        let model = small_model(ArchitectureKind::Type3, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_deformation::<f64, _>(&mut rng);
        let t = [0.65];
        let mut w = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                w.m[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
        let prep = PreparedPoint::new(&f);
        let reference = model.reference_grads(&t);
        let mut acc = vec![0.0; model.param_count()];
        model.stress_param_grad_contracted(&prep, &t, &w, 1.0, &reference, &mut acc);
        let grads = model.stress_param_grad(&f, &t);
        for j in 0..model.param_count() {
            let direct = grads[j].ddot(&w);
            assert!(
                (acc[j] - direct).abs() <= 1e-11 * (1.0 + direct.abs()),
                "param {j}: {} vs {direct}",
                acc[j]
            );
        }
        // reference n matches the plain evaluation
        assert!((reference.n - model.normalisation_offset(&t)).abs() < 1e-13);
    }

    #[test]
    fn objectivity_and_isotropy_of_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = small_model(ArchitectureKind::Type2, 29);
        for _ in 0..500 {
            let f = random_deformation::<f64, _>(&mut rng);
            let q = random_rotation::<f64, _>(&mut rng);
            let t = [rng.gen_range(0.0..1.0)];
            let base = model.potential(&f, &t);
            let rot = model.potential(
                &DeformationGradient::new(q.matmul(f.tensor())).unwrap(),
                &t,
            );
            let sym = model.potential(
                &DeformationGradient::new(f.tensor().matmul(&q.transpose())).unwrap(),
                &t,
            );
            let s = 1.0 + base.abs();
            assert!((rot - base).abs() / s <= 1e-10);
            assert!((sym - base).abs() / s <= 1e-10);
        }
    }

    #[test]
    fn angular_momentum_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = small_model(ArchitectureKind::Type3, 31);
        for _ in 0..200 {
            let f = random_deformation::<f64, _>(&mut rng);
            let t = [rng.gen_range(0.0..1.0)];
            let p = model.stress(&f, &t).p;
            let pft = p.matmul(&f.tensor().transpose());
            let skew = pft - pft.transpose();
            assert!(skew.inf_norm() <= 1e-9 * (1.0 + pft.inf_norm()));
        }
    }

    #[test]
    fn poly_potential_is_midpoint_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = small_model(ArchitectureKind::Type1, 37);
        let sample_xi = |rng: &mut ChaCha8Rng| {
            let mut f = Tensor2::identity();
            let mut h = Tensor2::identity();
            for i in 0..3 {
                for j in 0..3 {
                    f.m[i][j] += 0.5 * rng.gen_range(-1.0..1.0);
                    h.m[i][j] += 0.5 * rng.gen_range(-1.0..1.0);
                }
            }
            PolyArgs {
                f,
                h,
                j: rng.gen_range(0.2..3.0),
            }
        };
        for _ in 0..1000 {
            let a = sample_xi(&mut rng);
            let b = sample_xi(&mut rng);
            let t = [rng.gen_range(0.0..1.0)];
            let mid = PolyArgs {
                f: (a.f + b.f).scale(0.5),
                h: (a.h + b.h).scale(0.5),
                j: 0.5 * (a.j + b.j),
            };
            let pa = model.poly_potential(&a, &t).unwrap();
            let pb = model.poly_potential(&b, &t).unwrap();
            let pm = model.poly_potential(&mid, &t).unwrap();
            let scale = 1.0 + pa.abs().max(pb.abs());
            assert!(pm <= 0.5 * (pa + pb) + 1e-9 * scale);
        }
    }

    #[test]
    fn growth_trend_towards_vanishing_volume() {
        let model = small_model(ArchitectureKind::Type1, 41);
        let t = [0.5];
        let mut last = f64::NEG_INFINITY;
        for &j in &[0.5f64, 0.2, 0.1, 0.05, 0.01] {
            let f = DeformationGradient::new(
                Tensor2::identity().scale(j.powf(1.0 / 3.0)),
            )
            .unwrap();
            let psi = model.potential(&f, &t);
            assert!(psi > last, "potential must increase as J decreases");
            last = psi;
        }
        let tiny = DeformationGradient::new(
            Tensor2::identity().scale(1e-3f64.powf(1.0 / 3.0)),
        )
        .unwrap();
        assert!(model.potential(&tiny, &t) > 1e3);
    }

    #[test]
    fn monotone_variant_potential_increases_in_t() {
        let cfg = default_config(ArchitectureKind::Type1M, 2).unwrap();
        let model = PannModel::init(cfg, 43);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let f = random_deformation::<f64, _>(&mut rng);
            let t = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let g = model.potential_param_gradient(&f, &t);
            assert!(
                g.iter().all(|v| *v >= -1e-9),
                "dψ/dt = {g:?} at t = {t:?}"
            );
            // cross-check against finite differences
            let h = 1e-6;
            for i in 0..2 {
                let mut tp = t;
                tp[i] += h;
                let mut tm = t;
                tm[i] -= h;
                let fd = (model.potential(&f, &tp) - model.potential(&f, &tm)) / (2.0 * h);
                assert!((g[i] - fd).abs() / (1.0 + fd.abs()) <= 1e-6);
            }
        }
    }

    #[test]
    fn model_file_round_trips_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.txt");
        let mut model = small_model(ArchitectureKind::Type3, 47);
        model.stress_scale = 2.375e-2;
        model.normalisation_term = false;
        model.provenance.push(("seed".into(), "47".into()));
        model
            .provenance
            .push(("dataset_sha256".into(), "deadbeef".into()));
        model.save(&path).unwrap();
        let loaded = PannModel::<f64>::load(&path).unwrap();
        assert_eq!(model.params, loaded.params);
        assert_eq!(model.config(), loaded.config());
        assert_eq!(model.stress_scale.to_bits(), loaded.stress_scale.to_bits());
        assert_eq!(model.normalisation_term, loaded.normalisation_term);
        assert_eq!(model.provenance, loaded.provenance);
    }
}
