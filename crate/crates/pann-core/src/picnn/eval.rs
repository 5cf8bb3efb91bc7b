//! Forward and derivative passes for the pICNN architectures.
//!
//! Everything here is generic over [`Scalar`], so the same hand-written
//! reverse pass serves three purposes:
//!
//! - with plain reals it yields the value, the input gradients and the
//!   parameter gradient (reverse accumulation),
//! - with [`Dual`] numbers carrying a tangent seeded along an x-direction
//!   it additionally yields the mixed second derivatives
//!   d²ψ/(dx_dir dθ) in the tangent slots (forward-over-reverse),
//!   exactly and without finite differences.

use super::{GatedPlan, Mat, ParamLayout, PassthroughPlan, Plan, SeparatePlan};
use crate::dual::{Dual, Scalar};
use crate::float::Real;

/// Value and input gradients of one evaluation.
#[derive(Clone, Debug)]
pub struct EvalResult<T> {
    pub value: T,
    pub grad_x: Vec<T>,
    pub grad_y: Vec<T>,
}

/// Everything the Sobolev training step needs from one dual evaluation:
/// the value, both input gradients, the parameter gradient of the value
/// and the parameter gradient of the directional x-derivative
/// `dir · ∇x ψ` (plus its y-gradient, used for the parameter-monotonicity
/// probes).
#[derive(Clone, Debug)]
pub struct DirDerivatives<T> {
    pub value: T,
    pub grad_x: Vec<T>,
    pub grad_y: Vec<T>,
    pub dir_grad: T,
    pub grad_params_value: Vec<T>,
    pub grad_params_dir_grad: Vec<T>,
    pub grad_y_dir_grad: Vec<T>,
}

struct Trace<S> {
    y_pre: Vec<Vec<S>>,
    y_act: Vec<Vec<S>>,
    x_pre: Vec<Vec<S>>,
    x_act: Vec<Vec<S>>,
    gx_pre: Vec<Vec<S>>,
    gx: Vec<Vec<S>>,
    g0_pre: Vec<Vec<S>>,
    g0: Vec<Vec<S>>,
    value: S,
}

impl<S: Copy> Trace<S> {
    fn new(value: S) -> Self {
        Self {
            y_pre: Vec::new(),
            y_act: Vec::new(),
            x_pre: Vec::new(),
            x_act: Vec::new(),
            gx_pre: Vec::new(),
            gx: Vec::new(),
            g0_pre: Vec::new(),
            g0: Vec::new(),
            value,
        }
    }
}

struct BackOut<S> {
    grad_x: Vec<S>,
    grad_y: Vec<S>,
    grad_params: Vec<S>,
}

#[inline]
fn matvec<T: Real, S: Scalar<T>>(p: &[T], m: &Mat, v: &[S]) -> Vec<S> {
    debug_assert_eq!(v.len(), m.c);
    let mut out = Vec::with_capacity(m.r);
    for r in 0..m.r {
        let row = &p[m.off + r * m.c..m.off + (r + 1) * m.c];
        let mut acc = S::zero();
        for (w, x) in row.iter().zip(v.iter()) {
            acc = acc + *x * S::from_real(*w);
        }
        out.push(acc);
    }
    out
}

#[inline]
fn matvec_add<T: Real, S: Scalar<T>>(p: &[T], m: &Mat, v: &[S], out: &mut [S]) {
    debug_assert_eq!(v.len(), m.c);
    debug_assert_eq!(out.len(), m.r);
    for r in 0..m.r {
        let row = &p[m.off + r * m.c..m.off + (r + 1) * m.c];
        let mut acc = S::zero();
        for (w, x) in row.iter().zip(v.iter()) {
            acc = acc + *x * S::from_real(*w);
        }
        out[r] = out[r] + acc;
    }
}

/// Accumulates the transpose application `out += Wᵀ cot`.
#[inline]
fn matvec_transpose_add<T: Real, S: Scalar<T>>(p: &[T], m: &Mat, cot: &[S], out: &mut [S]) {
    debug_assert_eq!(cot.len(), m.r);
    debug_assert_eq!(out.len(), m.c);
    for r in 0..m.r {
        let row = &p[m.off + r * m.c..m.off + (r + 1) * m.c];
        let cr = cot[r];
        for (o, w) in out.iter_mut().zip(row.iter()) {
            *o = *o + cr * S::from_real(*w);
        }
    }
}

/// Accumulates the rank-one parameter gradient `g[W] += cot ⊗ input`.
#[inline]
fn outer_add<S: Copy + std::ops::Add<Output = S> + std::ops::Mul<Output = S>>(
    g: &mut [S],
    m: &Mat,
    cot: &[S],
    input: &[S],
) {
    debug_assert_eq!(cot.len(), m.r);
    debug_assert_eq!(input.len(), m.c);
    for r in 0..m.r {
        let base = m.off + r * m.c;
        let cr = cot[r];
        for (slot, x) in g[base..base + m.c].iter_mut().zip(input.iter()) {
            *slot = *slot + cr * *x;
        }
    }
}

#[inline]
fn bias_add<S: Copy + std::ops::Add<Output = S>>(g: &mut [S], m: &Mat, cot: &[S]) {
    debug_assert_eq!(cot.len(), m.r);
    for (slot, c) in g[m.off..m.off + m.r].iter_mut().zip(cot.iter()) {
        *slot = *slot + *c;
    }
}

#[inline]
fn add_bias_vec<T: Real, S: Scalar<T>>(p: &[T], m: &Mat, v: &mut [S]) {
    for (slot, w) in v.iter_mut().zip(p[m.off..m.off + m.r].iter()) {
        *slot = *slot + S::from_real(*w);
    }
}

#[inline]
fn hadamard<T: Real, S: Scalar<T>>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).collect()
}

fn softplus_vec<T: Real, S: Scalar<T>>(v: &[S]) -> Vec<S> {
    v.iter().map(|x| x.softplus()).collect()
}

fn relu_vec<T: Real, S: Scalar<T>>(v: &[S]) -> Vec<S> {
    v.iter().map(|x| x.relu()).collect()
}

/// y-trunk shared by all plans. `sigmoid_first` switches the first
/// activation (monotone variant).
fn forward_trunk<T: Real, S: Scalar<T>>(
    p: &[T],
    y_w: &[Mat],
    y_b: &[Mat],
    sigmoid_first: bool,
    y: &[S],
    tr: &mut Trace<S>,
) {
    tr.y_act.push(y.to_vec());
    for l in 0..y_w.len() {
        let mut pre = matvec(p, &y_w[l], &tr.y_act[l]);
        add_bias_vec(p, &y_b[l], &mut pre);
        let act: Vec<S> = if l == 0 && sigmoid_first {
            pre.iter().map(|z| z.sigmoid()).collect()
        } else {
            softplus_vec(&pre)
        };
        tr.y_pre.push(pre);
        tr.y_act.push(act);
    }
}

/// Reverse pass through the y-trunk. `cot_y[l]` holds the accumulated
/// cotangent of `y_act[l]`; returns the input cotangent (grad_y).
fn backward_trunk<T: Real, S: Scalar<T>>(
    p: &[T],
    y_w: &[Mat],
    y_b: &[Mat],
    sigmoid_first: bool,
    tr: &Trace<S>,
    cot_y: &mut [Vec<S>],
    grad_params: Option<&mut Vec<S>>,
) -> Vec<S> {
    let mut gp = grad_params;
    for l in (0..y_w.len()).rev() {
        let cot = std::mem::take(&mut cot_y[l + 1]);
        let deriv: Vec<S> = if l == 0 && sigmoid_first {
            // sigmoid' from the stored activation: a (1 - a)
            tr.y_act[l + 1]
                .iter()
                .map(|a| *a * (S::from_real(T::one()) - *a))
                .collect()
        } else {
            tr.y_pre[l].iter().map(|z| z.sigmoid()).collect()
        };
        let cot_pre = hadamard::<T, S>(&cot, &deriv);
        if let Some(g) = gp.as_deref_mut() {
            outer_add(g, &y_w[l], &cot_pre, &tr.y_act[l]);
            bias_add(g, &y_b[l], &cot_pre);
        }
        matvec_transpose_add(p, &y_w[l], &cot_pre, &mut cot_y[l]);
    }
    std::mem::take(&mut cot_y[0])
}

fn forward_separate<T: Real, S: Scalar<T>>(
    plan: &SeparatePlan,
    p: &[T],
    x: &[S],
    y: &[S],
) -> Trace<S> {
    let mut tr = Trace::new(S::zero());
    forward_trunk(p, &plan.y_w, &plan.y_b, plan.sigmoid_first_y, y, &mut tr);
    tr.x_act.push(x.to_vec());
    let mut pre = matvec(p, &plan.x_first_w, x);
    add_bias_vec(p, &plan.x_first_b, &mut pre);
    matvec_add(p, &plan.x_first_xy, tr.y_act.last().unwrap(), &mut pre);
    tr.x_act.push(softplus_vec(&pre));
    tr.x_pre.push(pre);
    for l in 0..plan.x_w.len() {
        let mut pre = matvec(p, &plan.x_w[l], tr.x_act.last().unwrap());
        add_bias_vec(p, &plan.x_b[l], &mut pre);
        tr.x_act.push(softplus_vec(&pre));
        tr.x_pre.push(pre);
    }
    tr.value = matvec(p, &plan.out_w, tr.x_act.last().unwrap())[0];
    tr
}

fn backward_separate<T: Real, S: Scalar<T>>(
    plan: &SeparatePlan,
    p: &[T],
    tr: &Trace<S>,
    n_params: usize,
    want_params: bool,
) -> BackOut<S> {
    let one = S::from_real(T::one());
    let mut gp = if want_params {
        vec![S::zero(); n_params]
    } else {
        Vec::new()
    };
    let last = tr.x_act.len() - 1;
    if want_params {
        outer_add(&mut gp, &plan.out_w, &[one], &tr.x_act[last]);
    }
    let mut cot = vec![S::zero(); plan.out_w.c];
    matvec_transpose_add(p, &plan.out_w, &[one], &mut cot);
    for l in (0..plan.x_w.len()).rev() {
        let deriv: Vec<S> = tr.x_pre[l + 1].iter().map(|z| z.sigmoid()).collect();
        let cot_pre = hadamard::<T, S>(&cot, &deriv);
        if want_params {
            outer_add(&mut gp, &plan.x_w[l], &cot_pre, &tr.x_act[l + 1]);
            bias_add(&mut gp, &plan.x_b[l], &cot_pre);
        }
        cot = vec![S::zero(); plan.x_w[l].c];
        matvec_transpose_add(p, &plan.x_w[l], &cot_pre, &mut cot);
    }
    let deriv: Vec<S> = tr.x_pre[0].iter().map(|z| z.sigmoid()).collect();
    let cot_pre = hadamard::<T, S>(&cot, &deriv);
    let y_last = tr.y_act.len() - 1;
    if want_params {
        outer_add(&mut gp, &plan.x_first_w, &cot_pre, &tr.x_act[0]);
        outer_add(&mut gp, &plan.x_first_xy, &cot_pre, &tr.y_act[y_last]);
        bias_add(&mut gp, &plan.x_first_b, &cot_pre);
    }
    let mut grad_x = vec![S::zero(); plan.x_first_w.c];
    matvec_transpose_add(p, &plan.x_first_w, &cot_pre, &mut grad_x);
    let mut cot_y: Vec<Vec<S>> = tr.y_act.iter().map(|a| vec![S::zero(); a.len()]).collect();
    matvec_transpose_add(p, &plan.x_first_xy, &cot_pre, &mut cot_y[y_last]);
    let grad_y = backward_trunk(
        p,
        &plan.y_w,
        &plan.y_b,
        plan.sigmoid_first_y,
        tr,
        &mut cot_y,
        want_params.then_some(&mut gp),
    );
    BackOut {
        grad_x,
        grad_y,
        grad_params: gp,
    }
}

fn forward_passthrough<T: Real, S: Scalar<T>>(
    plan: &PassthroughPlan,
    p: &[T],
    x: &[S],
    y: &[S],
) -> Trace<S> {
    let mut tr = Trace::new(S::zero());
    forward_trunk(p, &plan.y_w, &plan.y_b, false, y, &mut tr);
    tr.x_act.push(x.to_vec());
    for (h, layer) in plan.layers.iter().enumerate() {
        let mut pre = matvec(p, &layer.w_x, &tr.x_act[h]);
        matvec_add(p, &layer.w_pass, x, &mut pre);
        matvec_add(p, &layer.w_y, &tr.y_act[h], &mut pre);
        add_bias_vec(p, &layer.b, &mut pre);
        tr.x_act.push(softplus_vec(&pre));
        tr.x_pre.push(pre);
    }
    let mut value = matvec(p, &plan.out_w, tr.x_act.last().unwrap());
    matvec_add(p, &plan.out_pass, x, &mut value);
    tr.value = value[0];
    tr
}

fn backward_passthrough<T: Real, S: Scalar<T>>(
    plan: &PassthroughPlan,
    p: &[T],
    tr: &Trace<S>,
    n_params: usize,
    want_params: bool,
) -> BackOut<S> {
    let one = S::from_real(T::one());
    let mut gp = if want_params {
        vec![S::zero(); n_params]
    } else {
        Vec::new()
    };
    let x = &tr.x_act[0];
    let last = tr.x_act.len() - 1;
    let mut grad_x = vec![S::zero(); x.len()];
    if want_params {
        outer_add(&mut gp, &plan.out_w, &[one], &tr.x_act[last]);
        outer_add(&mut gp, &plan.out_pass, &[one], x);
    }
    let mut cot = vec![S::zero(); plan.out_w.c];
    matvec_transpose_add(p, &plan.out_w, &[one], &mut cot);
    matvec_transpose_add(p, &plan.out_pass, &[one], &mut grad_x);
    let mut cot_y: Vec<Vec<S>> = tr.y_act.iter().map(|a| vec![S::zero(); a.len()]).collect();
    for h in (0..plan.layers.len()).rev() {
        let layer = &plan.layers[h];
        let deriv: Vec<S> = tr.x_pre[h].iter().map(|z| z.sigmoid()).collect();
        let cot_pre = hadamard::<T, S>(&cot, &deriv);
        if want_params {
            outer_add(&mut gp, &layer.w_x, &cot_pre, &tr.x_act[h]);
            outer_add(&mut gp, &layer.w_pass, &cot_pre, x);
            outer_add(&mut gp, &layer.w_y, &cot_pre, &tr.y_act[h]);
            bias_add(&mut gp, &layer.b, &cot_pre);
        }
        matvec_transpose_add(p, &layer.w_pass, &cot_pre, &mut grad_x);
        matvec_transpose_add(p, &layer.w_y, &cot_pre, &mut cot_y[h]);
        cot = vec![S::zero(); layer.w_x.c];
        matvec_transpose_add(p, &layer.w_x, &cot_pre, &mut cot);
        if h == 0 {
            // w_x of the first layer acts on x directly.
            for (g, c) in grad_x.iter_mut().zip(cot.iter()) {
                *g = *g + *c;
            }
        }
    }
    let grad_y = backward_trunk(
        p,
        &plan.y_w,
        &plan.y_b,
        false,
        tr,
        &mut cot_y,
        want_params.then_some(&mut gp),
    );
    BackOut {
        grad_x,
        grad_y,
        grad_params: gp,
    }
}

fn forward_gated<T: Real, S: Scalar<T>>(
    plan: &GatedPlan,
    p: &[T],
    x: &[S],
    y: &[S],
) -> Trace<S> {
    let mut tr = Trace::new(S::zero());
    forward_trunk(p, &plan.y_w, &plan.y_b, false, y, &mut tr);
    tr.x_act.push(x.to_vec());
    let n = plan.layers.len();
    for (h, layer) in plan.layers.iter().enumerate() {
        let mut gx_pre = matvec(p, &layer.gate_x_w, &tr.y_act[h]);
        add_bias_vec(p, &layer.gate_x_b, &mut gx_pre);
        let gx = relu_vec::<T, S>(&gx_pre);
        let mut g0_pre = matvec(p, &layer.gate_p_w, &tr.y_act[h]);
        add_bias_vec(p, &layer.gate_p_b, &mut g0_pre);
        let g0 = relu_vec::<T, S>(&g0_pre);
        let u = hadamard::<T, S>(&tr.x_act[h], &gx);
        let v = hadamard::<T, S>(x, &g0);
        let mut pre = matvec(p, &layer.w_x, &u);
        matvec_add(p, &layer.w_pass, &v, &mut pre);
        if let (Some(w_y), Some(b)) = (&layer.w_y, &layer.b) {
            matvec_add(p, w_y, &tr.y_act[h], &mut pre);
            add_bias_vec(p, b, &mut pre);
        }
        if h + 1 == n {
            tr.value = pre[0];
            tr.x_pre.push(pre);
            tr.x_act.push(Vec::new());
        } else {
            tr.x_act.push(softplus_vec(&pre));
            tr.x_pre.push(pre);
        }
        tr.gx_pre.push(gx_pre);
        tr.gx.push(gx);
        tr.g0_pre.push(g0_pre);
        tr.g0.push(g0);
    }
    tr
}

fn backward_gated<T: Real, S: Scalar<T>>(
    plan: &GatedPlan,
    p: &[T],
    tr: &Trace<S>,
    n_params: usize,
    want_params: bool,
) -> BackOut<S> {
    let one = S::from_real(T::one());
    let mut gp = if want_params {
        vec![S::zero(); n_params]
    } else {
        Vec::new()
    };
    let x = &tr.x_act[0];
    let n = plan.layers.len();
    let mut grad_x = vec![S::zero(); x.len()];
    let mut cot_y: Vec<Vec<S>> = tr.y_act.iter().map(|a| vec![S::zero(); a.len()]).collect();
    // Cotangent of x_act[h+1] flowing down; the output layer is linear.
    let mut cot_next: Vec<S> = vec![one];
    for h in (0..n).rev() {
        let layer = &plan.layers[h];
        let cot_pre = if h + 1 == n {
            cot_next.clone()
        } else {
            let deriv: Vec<S> = tr.x_pre[h].iter().map(|z| z.sigmoid()).collect();
            hadamard::<T, S>(&cot_next, &deriv)
        };
        let u = hadamard::<T, S>(&tr.x_act[h], &tr.gx[h]);
        let v = hadamard::<T, S>(x, &tr.g0[h]);
        if want_params {
            outer_add(&mut gp, &layer.w_x, &cot_pre, &u);
            outer_add(&mut gp, &layer.w_pass, &cot_pre, &v);
            if let (Some(w_y), Some(b)) = (&layer.w_y, &layer.b) {
                outer_add(&mut gp, w_y, &cot_pre, &tr.y_act[h]);
                bias_add(&mut gp, b, &cot_pre);
            }
        }
        if let Some(w_y) = &layer.w_y {
            matvec_transpose_add(p, w_y, &cot_pre, &mut cot_y[h]);
        }
        // u = x_act[h] * gx
        let mut cot_u = vec![S::zero(); layer.w_x.c];
        matvec_transpose_add(p, &layer.w_x, &cot_pre, &mut cot_u);
        let cot_gx = hadamard::<T, S>(&cot_u, &tr.x_act[h]);
        let cot_gx_pre: Vec<S> = cot_gx
            .iter()
            .zip(tr.gx_pre[h].iter())
            .map(|(c, z)| *c * z.heaviside())
            .collect();
        if want_params {
            outer_add(&mut gp, &layer.gate_x_w, &cot_gx_pre, &tr.y_act[h]);
            bias_add(&mut gp, &layer.gate_x_b, &cot_gx_pre);
        }
        matvec_transpose_add(p, &layer.gate_x_w, &cot_gx_pre, &mut cot_y[h]);
        // v = x * g0
        let mut cot_v = vec![S::zero(); layer.w_pass.c];
        matvec_transpose_add(p, &layer.w_pass, &cot_pre, &mut cot_v);
        for (g, (c, g0)) in grad_x.iter_mut().zip(cot_v.iter().zip(tr.g0[h].iter())) {
            *g = *g + *c * *g0;
        }
        let cot_g0 = hadamard::<T, S>(&cot_v, x);
        let cot_g0_pre: Vec<S> = cot_g0
            .iter()
            .zip(tr.g0_pre[h].iter())
            .map(|(c, z)| *c * z.heaviside())
            .collect();
        if want_params {
            outer_add(&mut gp, &layer.gate_p_w, &cot_g0_pre, &tr.y_act[h]);
            bias_add(&mut gp, &layer.gate_p_b, &cot_g0_pre);
        }
        matvec_transpose_add(p, &layer.gate_p_w, &cot_g0_pre, &mut cot_y[h]);
        // cotangent into x_act[h]
        let cot_xa = hadamard::<T, S>(&cot_u, &tr.gx[h]);
        if h == 0 {
            for (g, c) in grad_x.iter_mut().zip(cot_xa.iter()) {
                *g = *g + *c;
            }
        }
        cot_next = cot_xa;
    }
    let grad_y = backward_trunk(
        p,
        &plan.y_w,
        &plan.y_b,
        false,
        tr,
        &mut cot_y,
        want_params.then_some(&mut gp),
    );
    BackOut {
        grad_x,
        grad_y,
        grad_params: gp,
    }
}

fn forward_any<T: Real, S: Scalar<T>>(
    layout: &ParamLayout,
    p: &[T],
    x: &[S],
    y: &[S],
) -> Trace<S> {
    debug_assert_eq!(x.len(), layout.x_dim);
    debug_assert_eq!(y.len(), layout.y_dim);
    debug_assert_eq!(p.len(), layout.len);
    match &layout.plan {
        Plan::Separate(plan) => forward_separate(plan, p, x, y),
        Plan::Passthrough(plan) => forward_passthrough(plan, p, x, y),
        Plan::Gated(plan) => forward_gated(plan, p, x, y),
    }
}

fn backward_any<T: Real, S: Scalar<T>>(
    layout: &ParamLayout,
    p: &[T],
    tr: &Trace<S>,
    want_params: bool,
) -> BackOut<S> {
    match &layout.plan {
        Plan::Separate(plan) => backward_separate(plan, p, tr, layout.len, want_params),
        Plan::Passthrough(plan) => backward_passthrough(plan, p, tr, layout.len, want_params),
        Plan::Gated(plan) => backward_gated(plan, p, tr, layout.len, want_params),
    }
}

/// Scalar network output ψ(x, y).
pub fn forward<T: Real>(layout: &ParamLayout, params: &[T], x: &[T], y: &[T]) -> T {
    forward_any::<T, T>(layout, params, x, y).value
}

/// Value plus exact input gradients via one reverse sweep.
pub fn eval<T: Real>(layout: &ParamLayout, params: &[T], x: &[T], y: &[T]) -> EvalResult<T> {
    let tr = forward_any::<T, T>(layout, params, x, y);
    let back = backward_any(layout, params, &tr, false);
    EvalResult {
        value: tr.value,
        grad_x: back.grad_x,
        grad_y: back.grad_y,
    }
}

/// Exact dψ/dθ for every trainable scalar, aligned to the canonical
/// parameter ordering.
pub fn grad_params_value<T: Real>(
    layout: &ParamLayout,
    params: &[T],
    x: &[T],
    y: &[T],
) -> Vec<T> {
    let tr = forward_any::<T, T>(layout, params, x, y);
    backward_any(layout, params, &tr, true).grad_params
}

/// One dual-number forward-over-reverse sweep with the x-tangent seeded
/// along `dir`.
pub fn dual_eval<T: Real>(
    layout: &ParamLayout,
    params: &[T],
    x: &[T],
    y: &[T],
    dir: &[T],
) -> DirDerivatives<T> {
    debug_assert_eq!(dir.len(), x.len());
    let xd: Vec<Dual<T>> = x
        .iter()
        .zip(dir.iter())
        .map(|(&v, &d)| Dual::new(v, d))
        .collect();
    let yd: Vec<Dual<T>> = y.iter().map(|&v| Dual::constant(v)).collect();
    let tr = forward_any::<T, Dual<T>>(layout, params, &xd, &yd);
    let back = backward_any(layout, params, &tr, true);
    DirDerivatives {
        value: tr.value.re,
        grad_x: back.grad_x.iter().map(|g| g.re).collect(),
        grad_y: back.grad_y.iter().map(|g| g.re).collect(),
        dir_grad: tr.value.eps,
        grad_params_value: back.grad_params.iter().map(|g| g.re).collect(),
        grad_params_dir_grad: back.grad_params.iter().map(|g| g.eps).collect(),
        grad_y_dir_grad: back.grad_y.iter().map(|g| g.eps).collect(),
    }
}

/// Exact mixed second derivatives d²ψ/(dx_a dθ), one parameter-length
/// vector per x component, computed by forward-over-reverse.
pub fn grad_params_of_grad_x<T: Real>(
    layout: &ParamLayout,
    params: &[T],
    x: &[T],
    y: &[T],
) -> Vec<Vec<T>> {
    (0..x.len())
        .map(|a| {
            let mut dir = vec![T::zero(); x.len()];
            dir[a] = T::one();
            dual_eval(layout, params, x, y, &dir).grad_params_dir_grad
        })
        .collect()
}
