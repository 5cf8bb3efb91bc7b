//! Partially input-convex feed-forward networks.
//!
//! Four architectures are provided. All are convex and component-wise
//! non-decreasing in the convex input block `x` (the strain invariants);
//! they differ in how the free input block `y` (the material parameters)
//! couples in:
//!
//! - `Type1`: a separate y-trunk feeds only the first x-layer.
//! - `Type2`: the y-trunk runs in parallel and every x-layer receives a
//!   passthrough of `x`, the current y-activation and a bias.
//! - `Type3`: x-layers are additionally gated by relu-rectified affine
//!   images of the y-activations (Hadamard products).
//! - `Type1M`: Type1 with non-negative y-path weights and a sigmoid first
//!   y-activation, which makes the output monotonically increasing (but
//!   not convex) in `y`.
//!
//! Convexity and monotonicity in `x` are enforced structurally: every
//! weight acting on the x-path, including the first and the output layer,
//! is constrained non-negative, all hidden activations are Softplus and
//! the output is linear without bias. Output contributions that do not
//! depend on `x` are omitted.

mod eval;

pub use eval::{
    dual_eval, eval, forward, grad_params_of_grad_x, grad_params_value, DirDerivatives,
    EvalResult,
};

use crate::float::{format_full, parse_full, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unsupported parameter dimension {0}; expected 1 or 2")]
    UnsupportedYDim(usize),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The four architecture variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArchitectureKind {
    Type1,
    Type2,
    Type3,
    Type1M,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 4] = [
        ArchitectureKind::Type1,
        ArchitectureKind::Type2,
        ArchitectureKind::Type3,
        ArchitectureKind::Type1M,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArchitectureKind::Type1 => "type1",
            ArchitectureKind::Type2 => "type2",
            ArchitectureKind::Type3 => "type3",
            ArchitectureKind::Type1M => "type1m",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "1" => Some(ArchitectureKind::Type1),
            "type2" | "2" => Some(ArchitectureKind::Type2),
            "type3" | "3" => Some(ArchitectureKind::Type3),
            "type1m" | "1m" => Some(ArchitectureKind::Type1M),
            _ => None,
        }
    }

    /// Monotone variants constrain the y-path weights as well.
    pub fn monotone_in_y(&self) -> bool {
        matches!(self, ArchitectureKind::Type1M)
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture hyperparameters. `x_widths` lists the hidden x-layer
/// widths; the scalar linear output layer is implicit. `y_widths` lists
/// the y-trunk widths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PicnnConfig {
    pub kind: ArchitectureKind,
    pub x_dim: usize,
    pub y_dim: usize,
    pub x_widths: Vec<usize>,
    pub y_widths: Vec<usize>,
}

impl PicnnConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.x_dim == 0 || self.y_dim == 0 {
            return bad("input dimensions must be positive".into());
        }
        if self.x_widths.is_empty() || self.x_widths.iter().any(|&w| w == 0) {
            return bad("x_widths must be non-empty positive".into());
        }
        if self.y_widths.iter().any(|&w| w == 0) {
            return bad("y_widths must be positive".into());
        }
        match self.kind {
            ArchitectureKind::Type1 | ArchitectureKind::Type1M => {
                if self.y_widths.is_empty() {
                    return bad("separate-trunk variants need at least one y layer".into());
                }
            }
            ArchitectureKind::Type2 => {
                if self.y_widths.len() + 1 != self.x_widths.len() {
                    return bad(format!(
                        "passthrough variant needs one y layer per hidden x-layer beyond the first: got {} y layers for {} x layers",
                        self.y_widths.len(),
                        self.x_widths.len()
                    ));
                }
            }
            ArchitectureKind::Type3 => {
                if self.y_widths.len() != self.x_widths.len() {
                    return bad(format!(
                        "gated variant needs one y layer per x-layer including the output gates: got {} y layers for {} x layers",
                        self.y_widths.len(),
                        self.x_widths.len()
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::build(self)
    }
}

/// Canonical widths. Hidden width 8 throughout; trunk depths chosen so the
/// trainable parameter counts are 272 (Type1), 516 (Type2), 580 (Type3)
/// and 280 (Type1M with a two component parameter).
pub fn default_config(kind: ArchitectureKind, y_dim: usize) -> Result<PicnnConfig, ConfigError> {
    if !(1..=2).contains(&y_dim) {
        return Err(ConfigError::UnsupportedYDim(y_dim));
    }
    let cfg = match kind {
        ArchitectureKind::Type1 | ArchitectureKind::Type1M => PicnnConfig {
            kind,
            x_dim: 4,
            y_dim,
            x_widths: vec![8, 8],
            y_widths: vec![8, 8],
        },
        ArchitectureKind::Type2 => PicnnConfig {
            kind,
            x_dim: 4,
            y_dim,
            x_widths: vec![8, 8, 8],
            y_widths: vec![8, 8],
        },
        ArchitectureKind::Type3 => PicnnConfig {
            kind,
            x_dim: 4,
            y_dim,
            x_widths: vec![8, 8],
            y_widths: vec![8, 8],
        },
    };
    cfg.validate().expect("default config is valid");
    Ok(cfg)
}

/// Exact number of trainable scalars for a configuration.
pub fn count_params(cfg: &PicnnConfig) -> usize {
    cfg.layout().len
}

/// One weight matrix or bias inside the flat parameter vector.
///
/// The canonical ordering is layer-major with weights before biases and
/// row-major storage inside each matrix; every gradient vector, optimizer
/// state and serialized file is aligned to it.
#[derive(Clone, Debug)]
pub struct TensorSpec {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub constrained: bool,
    pub is_bias: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// View of one matrix inside the flat parameter vector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Mat {
    pub r: usize,
    pub c: usize,
    pub off: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct SeparatePlan {
    pub y_w: Vec<Mat>,
    pub y_b: Vec<Mat>,
    pub x_first_w: Mat,
    pub x_first_xy: Mat,
    pub x_first_b: Mat,
    pub x_w: Vec<Mat>,
    pub x_b: Vec<Mat>,
    pub out_w: Mat,
    pub sigmoid_first_y: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct PassLayer {
    pub w_x: Mat,
    pub w_pass: Mat,
    pub w_y: Mat,
    pub b: Mat,
}

#[derive(Clone, Debug)]
pub(crate) struct PassthroughPlan {
    pub y_w: Vec<Mat>,
    pub y_b: Vec<Mat>,
    pub layers: Vec<PassLayer>,
    pub out_w: Mat,
    pub out_pass: Mat,
}

#[derive(Clone, Debug)]
pub(crate) struct GatedLayer {
    pub w_x: Mat,
    pub gate_x_w: Mat,
    pub gate_x_b: Mat,
    pub w_pass: Mat,
    pub gate_p_w: Mat,
    pub gate_p_b: Mat,
    /// Absent on the output layer (x-independent contributions dropped).
    pub w_y: Option<Mat>,
    pub b: Option<Mat>,
}

#[derive(Clone, Debug)]
pub(crate) struct GatedPlan {
    pub y_w: Vec<Mat>,
    pub y_b: Vec<Mat>,
    pub layers: Vec<GatedLayer>,
}

#[derive(Clone, Debug)]
pub(crate) enum Plan {
    Separate(SeparatePlan),
    Passthrough(PassthroughPlan),
    Gated(GatedPlan),
}

/// Flat parameter layout for one configuration.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    pub specs: Vec<TensorSpec>,
    pub len: usize,
    pub x_dim: usize,
    pub y_dim: usize,
    pub kind: ArchitectureKind,
    pub(crate) plan: Plan,
}

struct LayoutBuilder {
    specs: Vec<TensorSpec>,
    off: usize,
}

impl LayoutBuilder {
    fn new() -> Self {
        Self {
            specs: Vec::new(),
            off: 0,
        }
    }

    fn weight(&mut self, label: String, rows: usize, cols: usize, constrained: bool) -> Mat {
        let mat = Mat {
            r: rows,
            c: cols,
            off: self.off,
        };
        self.specs.push(TensorSpec {
            label,
            rows,
            cols,
            offset: self.off,
            constrained,
            is_bias: false,
        });
        self.off += rows * cols;
        mat
    }

    fn bias(&mut self, label: String, rows: usize) -> Mat {
        let mat = Mat {
            r: rows,
            c: 1,
            off: self.off,
        };
        self.specs.push(TensorSpec {
            label,
            rows,
            cols: 1,
            offset: self.off,
            constrained: false,
            is_bias: true,
        });
        self.off += rows;
        mat
    }
}

impl ParamLayout {
    fn build(cfg: &PicnnConfig) -> ParamLayout {
        cfg.validate().expect("invalid picnn configuration");
        let mut b = LayoutBuilder::new();
        let plan = match cfg.kind {
            ArchitectureKind::Type1 | ArchitectureKind::Type1M => {
                Plan::Separate(Self::build_separate(cfg, &mut b))
            }
            ArchitectureKind::Type2 => Plan::Passthrough(Self::build_passthrough(cfg, &mut b)),
            ArchitectureKind::Type3 => Plan::Gated(Self::build_gated(cfg, &mut b)),
        };
        ParamLayout {
            specs: b.specs,
            len: b.off,
            x_dim: cfg.x_dim,
            y_dim: cfg.y_dim,
            kind: cfg.kind,
            plan,
        }
    }

    fn build_separate(cfg: &PicnnConfig, b: &mut LayoutBuilder) -> SeparatePlan {
        let monotone = cfg.kind.monotone_in_y();
        let mut y_w = Vec::new();
        let mut y_b = Vec::new();
        let mut in_dim = cfg.y_dim;
        for (l, &w) in cfg.y_widths.iter().enumerate() {
            y_w.push(b.weight(format!("y{l}.w"), w, in_dim, monotone));
            y_b.push(b.bias(format!("y{l}.b"), w));
            in_dim = w;
        }
        let w0 = cfg.x_widths[0];
        let x_first_w = b.weight("x0.w".into(), w0, cfg.x_dim, true);
        let x_first_xy = b.weight("x0.wy".into(), w0, in_dim, monotone);
        let x_first_b = b.bias("x0.b".into(), w0);
        let mut x_w = Vec::new();
        let mut x_b = Vec::new();
        let mut prev = w0;
        for (l, &w) in cfg.x_widths.iter().enumerate().skip(1) {
            x_w.push(b.weight(format!("x{l}.w"), w, prev, true));
            x_b.push(b.bias(format!("x{l}.b"), w));
            prev = w;
        }
        let out_w = b.weight("out.w".into(), 1, prev, true);
        SeparatePlan {
            y_w,
            y_b,
            x_first_w,
            x_first_xy,
            x_first_b,
            x_w,
            x_b,
            out_w,
            sigmoid_first_y: monotone,
        }
    }

    fn build_passthrough(cfg: &PicnnConfig, b: &mut LayoutBuilder) -> PassthroughPlan {
        let mut y_w = Vec::new();
        let mut y_b = Vec::new();
        let mut in_dim = cfg.y_dim;
        for (l, &w) in cfg.y_widths.iter().enumerate() {
            y_w.push(b.weight(format!("y{l}.w"), w, in_dim, false));
            y_b.push(b.bias(format!("y{l}.b"), w));
            in_dim = w;
        }
        let mut layers = Vec::new();
        let mut x_prev = cfg.x_dim;
        let mut y_dims = vec![cfg.y_dim];
        y_dims.extend(cfg.y_widths.iter().copied());
        for (h, &w) in cfg.x_widths.iter().enumerate() {
            layers.push(PassLayer {
                w_x: b.weight(format!("x{h}.w"), w, x_prev, true),
                w_pass: b.weight(format!("x{h}.wp"), w, cfg.x_dim, true),
                w_y: b.weight(format!("x{h}.wy"), w, y_dims[h], false),
                b: b.bias(format!("x{h}.b"), w),
            });
            x_prev = w;
        }
        let out_w = b.weight("out.w".into(), 1, x_prev, true);
        let out_pass = b.weight("out.wp".into(), 1, cfg.x_dim, true);
        PassthroughPlan {
            y_w,
            y_b,
            layers,
            out_w,
            out_pass,
        }
    }

    fn build_gated(cfg: &PicnnConfig, b: &mut LayoutBuilder) -> GatedPlan {
        let mut y_w = Vec::new();
        let mut y_b = Vec::new();
        let mut in_dim = cfg.y_dim;
        for (l, &w) in cfg.y_widths.iter().enumerate() {
            y_w.push(b.weight(format!("y{l}.w"), w, in_dim, false));
            y_b.push(b.bias(format!("y{l}.b"), w));
            in_dim = w;
        }
        let mut y_dims = vec![cfg.y_dim];
        y_dims.extend(cfg.y_widths.iter().copied());
        let n_layers = cfg.x_widths.len() + 1;
        let mut layers = Vec::new();
        let mut x_prev = cfg.x_dim;
        for h in 0..n_layers {
            let out_dim = if h < cfg.x_widths.len() {
                cfg.x_widths[h]
            } else {
                1
            };
            let is_out = h + 1 == n_layers;
            let w_x = b.weight(format!("x{h}.w"), out_dim, x_prev, true);
            let gate_x_w = b.weight(format!("x{h}.gx.w"), x_prev, y_dims[h], false);
            let w_pass = b.weight(format!("x{h}.wp"), out_dim, cfg.x_dim, true);
            let gate_p_w = b.weight(format!("x{h}.gp.w"), cfg.x_dim, y_dims[h], false);
            let w_y = if is_out {
                None
            } else {
                Some(b.weight(format!("x{h}.wy"), out_dim, y_dims[h], false))
            };
            let gate_x_b = b.bias(format!("x{h}.gx.b"), x_prev);
            let gate_p_b = b.bias(format!("x{h}.gp.b"), cfg.x_dim);
            let bias = if is_out {
                None
            } else {
                Some(b.bias(format!("x{h}.b"), out_dim))
            };
            layers.push(GatedLayer {
                w_x,
                gate_x_w,
                gate_x_b,
                w_pass,
                gate_p_w,
                gate_p_b,
                w_y,
                b: bias,
            });
            x_prev = out_dim;
        }
        GatedPlan { y_w, y_b, layers }
    }
}

/// Flat trainable parameters in canonical ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct PicnnParams<T> {
    pub values: Vec<T>,
}

impl<T: Real> PicnnParams<T> {
    pub fn zeros(layout: &ParamLayout) -> Self {
        Self {
            values: vec![T::zero(); layout.len],
        }
    }
}

/// Fan-in scaled uniform initialization; constrained matrices take the
/// absolute value so the feasible set holds from the start, biases are
/// zero. Deterministic for a fixed seed.
pub fn init<T: Real>(cfg: &PicnnConfig, seed: u64) -> PicnnParams<T> {
    let layout = cfg.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![T::zero(); layout.len];
    for spec in &layout.specs {
        if spec.is_bias {
            continue;
        }
        let bound = 1.0 / (spec.cols as f64).sqrt();
        for slot in &mut values[spec.range()] {
            let draw = rng.gen_range(-bound..bound);
            *slot = T::real(if spec.constrained { draw.abs() } else { draw });
        }
    }
    PicnnParams { values }
}

/// Clamps every entry of every constrained matrix at zero, in place.
pub fn project_nonneg_in_place<T: Real>(layout: &ParamLayout, values: &mut [T]) {
    for spec in &layout.specs {
        if !spec.constrained {
            continue;
        }
        for v in &mut values[spec.range()] {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }
}

/// Copying wrapper around [`project_nonneg_in_place`].
pub fn project_nonneg<T: Real>(cfg: &PicnnConfig, params: &PicnnParams<T>) -> PicnnParams<T> {
    let layout = cfg.layout();
    let mut out = params.clone();
    project_nonneg_in_place(&layout, &mut out.values);
    out
}

/// Checks the constraint flags; used by evaluation preconditions in tests.
pub fn constraints_satisfied<T: Real>(layout: &ParamLayout, values: &[T]) -> bool {
    layout
        .specs
        .iter()
        .filter(|s| s.constrained)
        .all(|s| values[s.range()].iter().all(|v| *v >= T::zero()))
}

fn widths_to_string(widths: &[usize]) -> String {
    widths
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn widths_from_string(s: &str) -> Result<Vec<usize>, ModelIoError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| ModelIoError::Malformed(format!("bad width list: {s}")))
        })
        .collect()
}

/// Writes the architecture header and the parameters in canonical order,
/// full precision. The inverse of [`read_picnn_block`].
pub fn write_picnn_block<T: Real, W: std::io::Write>(
    w: &mut W,
    cfg: &PicnnConfig,
    params: &PicnnParams<T>,
) -> Result<(), ModelIoError> {
    writeln!(w, "kind {}", cfg.kind)?;
    writeln!(w, "x_dim {}", cfg.x_dim)?;
    writeln!(w, "y_dim {}", cfg.y_dim)?;
    writeln!(w, "y_widths {}", widths_to_string(&cfg.y_widths))?;
    writeln!(w, "x_widths {}", widths_to_string(&cfg.x_widths))?;
    writeln!(w, "params {}", params.values.len())?;
    for v in &params.values {
        writeln!(w, "{}", format_full(*v))?;
    }
    Ok(())
}

/// Reads a block produced by [`write_picnn_block`] from an iterator of
/// lines.
pub fn read_picnn_block<'a, T: Real, I: Iterator<Item = &'a str>>(
    lines: &mut I,
) -> Result<(PicnnConfig, PicnnParams<T>), ModelIoError> {
    let mut field = |name: &str| -> Result<String, ModelIoError> {
        let line = lines
            .next()
            .ok_or_else(|| ModelIoError::Malformed(format!("missing field {name}")))?;
        let (key, rest) = line
            .split_once(' ')
            .ok_or_else(|| ModelIoError::Malformed(format!("bad line {line:?}")))?;
        if key != name {
            return Err(ModelIoError::Malformed(format!(
                "expected field {name}, found {key}"
            )));
        }
        Ok(rest.trim().to_string())
    };
    let kind = ArchitectureKind::parse(&field("kind")?)
        .ok_or_else(|| ModelIoError::Malformed("unknown architecture kind".into()))?;
    let x_dim = field("x_dim")?
        .parse::<usize>()
        .map_err(|_| ModelIoError::Malformed("bad x_dim".into()))?;
    let y_dim = field("y_dim")?
        .parse::<usize>()
        .map_err(|_| ModelIoError::Malformed("bad y_dim".into()))?;
    let y_widths = widths_from_string(&field("y_widths")?)?;
    let x_widths = widths_from_string(&field("x_widths")?)?;
    let n = field("params")?
        .parse::<usize>()
        .map_err(|_| ModelIoError::Malformed("bad params count".into()))?;
    let cfg = PicnnConfig {
        kind,
        x_dim,
        y_dim,
        x_widths,
        y_widths,
    };
    cfg.validate()?;
    if count_params(&cfg) != n {
        return Err(ModelIoError::Malformed(format!(
            "parameter count {n} does not match configuration ({})",
            count_params(&cfg)
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| ModelIoError::Malformed("truncated parameter block".into()))?;
        let v = parse_full::<T>(line)
            .ok_or_else(|| ModelIoError::Malformed(format!("bad parameter value {line:?}")))?;
        values.push(v);
    }
    Ok((cfg, PicnnParams { values }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_parameter_counts() {
        assert_eq!(
            count_params(&default_config(ArchitectureKind::Type1, 1).unwrap()),
            272
        );
        assert_eq!(
            count_params(&default_config(ArchitectureKind::Type2, 1).unwrap()),
            516
        );
        assert_eq!(
            count_params(&default_config(ArchitectureKind::Type3, 1).unwrap()),
            580
        );
        assert_eq!(
            count_params(&default_config(ArchitectureKind::Type1M, 2).unwrap()),
            280
        );
    }

    #[test]
    fn default_config_rejects_unsupported_y_dim() {
        assert!(matches!(
            default_config(ArchitectureKind::Type1, 3),
            Err(ConfigError::UnsupportedYDim(3))
        ));
    }

    #[test]
    fn layout_is_contiguous_and_ordered() {
        for kind in ArchitectureKind::ALL {
            let cfg = default_config(kind, 1).unwrap();
            let layout = cfg.layout();
            let mut expected = 0;
            for spec in &layout.specs {
                assert_eq!(spec.offset, expected, "{kind} {}", spec.label);
                expected += spec.len();
            }
            assert_eq!(expected, layout.len);
        }
    }

    #[test]
    fn constraint_flags_per_variant() {
        let flagged = |kind: ArchitectureKind, label: &str| -> bool {
            let cfg = default_config(kind, 1).unwrap();
            cfg.layout()
                .specs
                .iter()
                .find(|s| s.label == label)
                .unwrap_or_else(|| panic!("{label} missing"))
                .constrained
        };
        // x-path weights are non-negative everywhere, first layer included.
        assert!(flagged(ArchitectureKind::Type1, "x0.w"));
        assert!(flagged(ArchitectureKind::Type1, "out.w"));
        assert!(flagged(ArchitectureKind::Type2, "x0.wp"));
        assert!(flagged(ArchitectureKind::Type2, "out.wp"));
        assert!(flagged(ArchitectureKind::Type3, "x1.w"));
        // y-path and gates stay free on the non-monotone variants.
        assert!(!flagged(ArchitectureKind::Type1, "y0.w"));
        assert!(!flagged(ArchitectureKind::Type2, "x1.wy"));
        assert!(!flagged(ArchitectureKind::Type3, "x0.gx.w"));
        // The monotone variant constrains the whole y path.
        assert!(flagged(ArchitectureKind::Type1M, "y0.w"));
        assert!(flagged(ArchitectureKind::Type1M, "y1.w"));
        assert!(flagged(ArchitectureKind::Type1M, "x0.wy"));
    }

    #[test]
    fn init_respects_constraints_and_is_deterministic() {
        for kind in ArchitectureKind::ALL {
            let cfg = default_config(kind, 1).unwrap();
            let layout = cfg.layout();
            let a = init::<f64>(&cfg, 42);
            let b = init::<f64>(&cfg, 42);
            assert_eq!(a, b, "{kind}");
            assert!(constraints_satisfied(&layout, &a.values));
            let c = init::<f64>(&cfg, 43);
            assert_ne!(a, c);
            // biases zero
            for spec in layout.specs.iter().filter(|s| s.is_bias) {
                assert!(a.values[spec.range()].iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let cfg = default_config(ArchitectureKind::Type1, 1).unwrap();
        let layout = cfg.layout();
        let mut params = init::<f64>(&cfg, 7);
        // Pick one constrained and one free entry.
        let constrained = layout.specs.iter().find(|s| s.constrained).unwrap();
        let free = layout
            .specs
            .iter()
            .find(|s| !s.constrained && !s.is_bias)
            .unwrap();
        params.values[constrained.offset] = -0.3;
        params.values[free.offset] = -0.3;
        let once = project_nonneg(&cfg, &params);
        assert_eq!(once.values[constrained.offset], 0.0);
        assert_eq!(once.values[free.offset], -0.3);
        let kept = layout
            .specs
            .iter()
            .find(|s| s.constrained)
            .map(|s| s.offset + 1)
            .unwrap();
        assert_eq!(once.values[kept], params.values[kept].max(0.0));
        let twice = project_nonneg(&cfg, &once);
        assert_eq!(once, twice);
    }

    #[test]
    fn picnn_block_round_trips_bit_exact() {
        for kind in ArchitectureKind::ALL {
            let cfg = default_config(kind, 2).unwrap();
            let params = init::<f64>(&cfg, 99);
            let mut buf = Vec::new();
            write_picnn_block(&mut buf, &cfg, &params).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let mut lines = text.lines();
            let (cfg2, params2) = read_picnn_block::<f64, _>(&mut lines).unwrap();
            assert_eq!(cfg, cfg2);
            assert_eq!(params, params2);
        }
    }
}
