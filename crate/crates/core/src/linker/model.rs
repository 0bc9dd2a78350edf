use serde::{Deserialize, Serialize};

use crate::embedding_io::Modality;
use crate::error::{Error, Result};
use crate::numerics::{normalize_rows, Matrix, SeededRng};

/// Temperature is kept inside this range after every optimiser step.
pub const TEMPERATURE_RANGE: (f64, f64) = (0.01, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => {
                let u = GELU_C * (x + 0.044_715 * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let u = GELU_C * (x + 0.044_715 * x * x * x);
                let t = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * 0.044_715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
        }
    }
}

// sqrt(2/pi), tanh approximation of GELU
const GELU_C: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkerConfig {
    pub dim_speaker_in: usize,
    pub dim_text_in: usize,
    pub common_dim: usize,
    /// Hidden Linear→activation blocks; a final linear layer always follows.
    pub n_transform_layers: usize,
    pub activation: Activation,
    pub learnable_temperature: bool,
    pub init_temperature: f64,
    pub aam_margin: f64,
    pub aam_scale: f64,
    /// Number of AAM classes; zero disables the head.
    pub n_speakers_train: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self {
            dim_speaker_in: 192,
            dim_text_in: 768,
            common_dim: 768,
            n_transform_layers: 2,
            activation: Activation::Relu,
            learnable_temperature: true,
            init_temperature: 0.07,
            aam_margin: 0.2,
            aam_scale: 30.0,
            n_speakers_train: 0,
        }
    }
}

impl LinkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim_speaker_in == 0 || self.dim_text_in == 0 {
            return Err(Error::Config("input dimensions must be positive".into()));
        }
        if self.common_dim == 0 {
            return Err(Error::Config("common_dim must be positive".into()));
        }
        if self.n_transform_layers == 0 {
            return Err(Error::Config("n_transform_layers must be positive".into()));
        }
        let (lo, hi) = TEMPERATURE_RANGE;
        if !(self.init_temperature >= lo && self.init_temperature <= hi) {
            return Err(Error::Config(format!(
                "init_temperature must lie in [{lo}, {hi}]"
            )));
        }
        if !self.aam_margin.is_finite() || !(self.aam_scale > 0.0) {
            return Err(Error::Config("invalid AAM margin or scale".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Speaker => self.dim_speaker_in,
            Modality::Text => self.dim_text_in,
        }
    }

    /// Closed-form number of scalar parameters.
    pub fn param_count(&self) -> usize {
        let c = self.common_dim;
        let stack = (self.n_transform_layers + 1) * (c * c + c);
        let branch = |d_in: usize| d_in * c + c + stack;
        branch(self.dim_speaker_in) + branch(self.dim_text_in) + 1 + self.n_speakers_train * c
    }
}

/// Affine layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    fn glorot(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let limit = glorot_limit(fan_in, fan_out);
        let w = (0..fan_in * fan_out)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Self {
            weight: Matrix::from_vec(fan_in, fan_out, w),
            bias: vec![0.0; fan_out],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.weight);
        y.add_row_vector(&self.bias);
        y
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Projection layer plus transform stack for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub projection: Dense,
    /// `n_transform_layers` hidden layers followed by the output layer.
    pub transform: Vec<Dense>,
}

impl Branch {
    fn zeros(d_in: usize, config: &LinkerConfig) -> Self {
        let c = config.common_dim;
        Self {
            projection: Dense::zeros(d_in, c),
            transform: (0..=config.n_transform_layers)
                .map(|_| Dense::zeros(c, c))
                .collect(),
        }
    }

    fn init(d_in: usize, config: &LinkerConfig, rng: &mut SeededRng) -> Self {
        let c = config.common_dim;
        Self {
            projection: Dense::glorot(d_in, c, rng),
            transform: (0..=config.n_transform_layers)
                .map(|_| Dense::glorot(c, c, rng))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkerParams {
    pub speaker: Branch,
    pub text: Branch,
    pub log_temperature: f64,
    /// `n_speakers_train × common_dim`, unit rows.
    pub aam_weights: Option<Matrix>,
}

impl LinkerParams {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &LinkerConfig) -> Self {
        Self {
            speaker: Branch::zeros(config.dim_speaker_in, config),
            text: Branch::zeros(config.dim_text_in, config),
            log_temperature: 0.0,
            aam_weights: (config.n_speakers_train > 0)
                .then(|| Matrix::zeros(config.n_speakers_train, config.common_dim)),
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn branch(&self, modality: Modality) -> &Branch {
        match modality {
            Modality::Speaker => &self.speaker,
            Modality::Text => &self.text,
        }
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (tag, b) in [("speaker", &self.speaker), ("text", &self.text)] {
            out.push((format!("{tag}.projection.weight"), b.projection.weight.as_slice()));
            out.push((format!("{tag}.projection.bias"), &b.projection.bias));
            for (i, d) in b.transform.iter().enumerate() {
                out.push((format!("{tag}.transform.{i}.weight"), d.weight.as_slice()));
                out.push((format!("{tag}.transform.{i}.bias"), &d.bias));
            }
        }
        out.push(("log_temperature".into(), std::slice::from_ref(&self.log_temperature)));
        if let Some(w) = &self.aam_weights {
            out.push(("aam_weights".into(), w.as_slice()));
        }
        out
    }

    /// Mutable counterpart of [`LinkerParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (tag, b) in [("speaker", &mut self.speaker), ("text", &mut self.text)] {
            out.push((
                format!("{tag}.projection.weight"),
                b.projection.weight.as_mut_slice(),
            ));
            out.push((format!("{tag}.projection.bias"), &mut b.projection.bias));
            for (i, d) in b.transform.iter_mut().enumerate() {
                out.push((format!("{tag}.transform.{i}.weight"), d.weight.as_mut_slice()));
                out.push((format!("{tag}.transform.{i}.bias"), &mut d.bias));
            }
        }
        out.push((
            "log_temperature".into(),
            std::slice::from_mut(&mut self.log_temperature),
        ));
        if let Some(w) = &mut self.aam_weights {
            out.push(("aam_weights".into(), w.as_mut_slice()));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for (_, t) in self.tensors() {
            v.extend_from_slice(t);
        }
        v
    }

    /// Overwrites every tensor from a flat vector produced by [`flatten`].
    ///
    /// [`flatten`]: LinkerParams::flatten
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length mismatch");
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Renormalises AAM class rows to unit length.
    pub fn normalize_aam_rows(&mut self) {
        if let Some(w) = &mut self.aam_weights {
            for i in 0..w.rows() {
                let row = w.row_mut(i);
                let n = crate::numerics::norm(row);
                if n > 0.0 {
                    row.iter_mut().for_each(|x| *x /= n);
                }
            }
        }
    }

    pub fn clamp_temperature(&mut self) {
        let (lo, hi) = TEMPERATURE_RANGE;
        self.log_temperature = self.log_temperature.clamp(lo.ln(), hi.ln());
    }
}

/// Glorot-uniform weights, zero biases, `log τ = ln(init_temperature)`.
pub fn init_params(config: &LinkerConfig, seed: u64) -> Result<LinkerParams> {
    config.validate()?;
    let mut rng = SeededRng::new(seed);
    let speaker = Branch::init(config.dim_speaker_in, config, &mut rng);
    let text = Branch::init(config.dim_text_in, config, &mut rng);
    let aam_weights = (config.n_speakers_train > 0).then(|| {
        let mut w = Matrix::from_vec(
            config.n_speakers_train,
            config.common_dim,
            (0..config.n_speakers_train * config.common_dim)
                .map(|_| rng.normal())
                .collect(),
        );
        // a zero row would be a measure-zero draw; normalize_aam_rows leaves it alone
        for i in 0..w.rows() {
            let row = w.row_mut(i);
            let n = crate::numerics::norm(row);
            row.iter_mut().for_each(|x| *x /= n);
        }
        w
    });
    Ok(LinkerParams {
        speaker,
        text,
        log_temperature: config.init_temperature.ln(),
        aam_weights,
    })
}

/// Intermediates of one branch kept for backpropagation.
#[derive(Debug, Clone)]
pub struct BranchCache {
    input: Matrix,
    projection_raw: Matrix,
    /// Pre-activation of each hidden transform layer.
    pre_activations: Vec<Matrix>,
    /// Post-activation of each hidden transform layer.
    hidden: Vec<Matrix>,
    projection_norms: Vec<f64>,
    output_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BranchOutput {
    /// Unit-norm projection output.
    pub projected: Matrix,
    /// Unit-norm transform output.
    pub transformed: Matrix,
    pub cache: BranchCache,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub x_s_p: Matrix,
    pub x_t_p: Matrix,
    pub x_s_t: Matrix,
    pub x_t_t: Matrix,
    speaker_cache: BranchCache,
    text_cache: BranchCache,
}

fn check_input(rows: &Matrix, expected: usize, context: &'static str) -> Result<()> {
    if rows.cols() != expected {
        return Err(Error::DimMismatch {
            context,
            expected,
            found: rows.cols(),
        });
    }
    rows.check_finite()
}

/// Runs one branch.
///
/// The transform stack consumes the projection activations before length
/// normalisation; both outputs are normalised row-wise.
pub fn branch_forward(
    params: &LinkerParams,
    config: &LinkerConfig,
    modality: Modality,
    rows: &Matrix,
) -> Result<BranchOutput> {
    check_input(rows, config.input_dim(modality), "linker input")?;
    let branch = params.branch(modality);
    let projection_raw = branch.projection.forward(rows);
    let (projected, projection_norms) = normalize_rows(&projection_raw)?;

    let (hidden_layers, output_layer) = branch.transform.split_at(branch.transform.len() - 1);
    let mut pre_activations = Vec::with_capacity(hidden_layers.len());
    let mut hidden: Vec<Matrix> = Vec::with_capacity(hidden_layers.len());
    for layer in hidden_layers {
        let z = layer.forward(hidden.last().unwrap_or(&projection_raw));
        let mut h = z.clone();
        h.as_mut_slice()
            .iter_mut()
            .for_each(|x| *x = config.activation.apply(*x));
        pre_activations.push(z);
        hidden.push(h);
    }
    let out_raw = output_layer[0].forward(hidden.last().unwrap_or(&projection_raw));
    let (transformed, output_norms) = normalize_rows(&out_raw)?;

    Ok(BranchOutput {
        projected,
        transformed,
        cache: BranchCache {
            input: rows.clone(),
            projection_raw,
            pre_activations,
            hidden,
            projection_norms,
            output_norms,
        },
    })
}

pub fn forward(
    params: &LinkerParams,
    config: &LinkerConfig,
    speaker_rows: &Matrix,
    text_rows: &Matrix,
) -> Result<ForwardOutput> {
    let s = branch_forward(params, config, Modality::Speaker, speaker_rows)?;
    let t = branch_forward(params, config, Modality::Text, text_rows)?;
    Ok(ForwardOutput {
        x_s_p: s.projected,
        x_t_p: t.projected,
        x_s_t: s.transformed,
        x_t_t: t.transformed,
        speaker_cache: s.cache,
        text_cache: t.cache,
    })
}

/// Unit-norm projection-layer embeddings of one modality.
pub fn project(
    params: &LinkerParams,
    config: &LinkerConfig,
    modality: Modality,
    rows: &Matrix,
) -> Result<Matrix> {
    check_input(rows, config.input_dim(modality), "linker input")?;
    let raw = params.branch(modality).projection.forward(rows);
    Ok(normalize_rows(&raw)?.0)
}

/// Upstream gradients with respect to the four normalised outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads {
    pub x_s_p: Matrix,
    pub x_t_p: Matrix,
    pub x_s_t: Matrix,
    pub x_t_t: Matrix,
}

impl OutputGrads {
    pub fn zeros_like(out: &ForwardOutput) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            x_s_p: z(&out.x_s_p),
            x_t_p: z(&out.x_t_p),
            x_s_t: z(&out.x_s_t),
            x_t_t: z(&out.x_t_t),
        }
    }
}

/// Gradient of `y = x/‖x‖` pulled back to `x`, given `y`, `‖x‖` and `∂L/∂y`.
fn normalize_backward(y: &Matrix, norms: &[f64], grad: &Matrix) -> Matrix {
    let mut out = grad.clone();
    for i in 0..y.rows() {
        let yi = y.row(i);
        let proj = crate::numerics::dot(yi, grad.row(i));
        for (o, &yv) in out.row_mut(i).iter_mut().zip(yi) {
            *o = (*o - yv * proj) / norms[i];
        }
    }
    out
}

fn branch_backward(
    branch: &Branch,
    config: &LinkerConfig,
    cache: &BranchCache,
    projected: &Matrix,
    transformed: &Matrix,
    grad_projected: &Matrix,
    grad_transformed: &Matrix,
) -> Branch {
    let c = config.common_dim;
    let n_hidden = cache.hidden.len();
    let mut transform = Vec::with_capacity(n_hidden + 1);

    let mut g = normalize_backward(transformed, &cache.output_norms, grad_transformed);
    for l in (0..=n_hidden).rev() {
        let input = if l == 0 {
            &cache.projection_raw
        } else {
            &cache.hidden[l - 1]
        };
        if l < n_hidden {
            // g holds ∂L/∂h_l; convert to ∂L/∂z_l
            for (gv, &z) in g
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre_activations[l].as_slice())
            {
                *gv *= config.activation.derivative(z);
            }
        }
        transform.push(Dense {
            weight: input.t_matmul(&g),
            bias: g.column_sums(),
        });
        g = g.matmul_t(&branch.transform[l].weight);
    }
    transform.reverse();
    debug_assert_eq!(g.cols(), c);

    g.add_assign(&normalize_backward(
        projected,
        &cache.projection_norms,
        grad_projected,
    ));
    Branch {
        projection: Dense {
            weight: cache.input.t_matmul(&g),
            bias: g.column_sums(),
        },
        transform,
    }
}

/// Backpropagates output gradients into parameter gradients.
///
/// `log_temperature` and `aam_weights` gradients are zero here; the losses
/// that use them fill them in.
pub fn backward(
    params: &LinkerParams,
    config: &LinkerConfig,
    out: &ForwardOutput,
    grads: &OutputGrads,
) -> LinkerParams {
    let speaker = branch_backward(
        &params.speaker,
        config,
        &out.speaker_cache,
        &out.x_s_p,
        &out.x_s_t,
        &grads.x_s_p,
        &grads.x_s_t,
    );
    let text = branch_backward(
        &params.text,
        config,
        &out.text_cache,
        &out.x_t_p,
        &out.x_t_t,
        &grads.x_t_p,
        &grads.x_t_t,
    );
    LinkerParams {
        speaker,
        text,
        log_temperature: 0.0,
        aam_weights: params
            .aam_weights
            .as_ref()
            .map(|w| Matrix::zeros(w.rows(), w.cols())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, norm, relative_error, DEFAULT_STEP};

    fn tiny() -> LinkerConfig {
        LinkerConfig {
            dim_speaker_in: 5,
            dim_text_in: 4,
            common_dim: 16,
            n_transform_layers: 2,
            ..LinkerConfig::default()
        }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect())
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = LinkerConfig {
            n_speakers_train: 3,
            ..tiny()
        };
        let a = init_params(&cfg, 9).unwrap();
        assert_eq!(a, init_params(&cfg, 9).unwrap());
        assert_ne!(a, init_params(&cfg, 10).unwrap());
        for (name, t) in a.tensors() {
            if name.ends_with(".bias") {
                assert!(t.iter().all(|&x| x == 0.0), "{name}");
            }
        }
        let lim_p = glorot_limit(5, 16);
        assert!(a.speaker.projection.weight.max_abs() <= lim_p);
        let lim_t = glorot_limit(16, 16);
        for d in &a.text.transform {
            assert!(d.weight.max_abs() <= lim_t);
        }
        assert!((a.temperature() - 0.07).abs() < 1e-15);
        let w = a.aam_weights.as_ref().unwrap();
        for row in w.row_iter() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_shapes_and_param_count() {
        let cfg = LinkerConfig::default();
        let p = init_params(&cfg, 0).unwrap();
        assert_eq!(
            (p.speaker.projection.weight.rows(), p.speaker.projection.weight.cols()),
            (192, 768)
        );
        assert_eq!(p.len(), cfg.param_count());
        let with_aam = LinkerConfig {
            n_speakers_train: 7,
            ..tiny()
        };
        assert_eq!(init_params(&with_aam, 0).unwrap().len(), with_aam.param_count());
    }

    #[test]
    fn outputs_are_unit_norm() {
        let cfg = tiny();
        for seed in 0..100 {
            let p = init_params(&cfg, seed).unwrap();
            let out = forward(&p, &cfg, &random(3, 5, seed + 1000), &random(3, 4, seed + 2000))
                .unwrap();
            for m in [&out.x_s_p, &out.x_t_p, &out.x_s_t, &out.x_t_t] {
                for row in m.row_iter() {
                    assert!((norm(row) - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn minimal_stack_with_identity_weights() {
        let cfg = LinkerConfig {
            dim_speaker_in: 3,
            dim_text_in: 3,
            common_dim: 3,
            n_transform_layers: 1,
            ..LinkerConfig::default()
        };
        let mut p = LinkerParams::zeros(&cfg);
        for b in [&mut p.speaker, &mut p.text] {
            b.projection.weight = Matrix::from_rows(&[[1.0, 0.5, 0.0], [0.0, 1.0, -2.0], [0.3, 0.0, 1.0]]);
            for d in &mut b.transform {
                d.weight = Matrix::identity(3);
            }
        }
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.2, 0.4, 3.0]]);
        let out = forward(&p, &cfg, &x, &x).unwrap();
        let raw = x.matmul(&p.speaker.projection.weight);
        for i in 0..2 {
            let act: Vec<f64> = raw.row(i).iter().map(|v| v.max(0.0)).collect();
            let expect = crate::numerics::l2_normalize(&act).unwrap();
            for (a, b) in out.x_s_t.row(i).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_independent_and_permutation_equivariant() {
        let cfg = tiny();
        let p = init_params(&cfg, 4).unwrap();
        let s = random(8, 5, 1);
        let t = random(8, 4, 2);
        let full = forward(&p, &cfg, &s, &t).unwrap();
        let single = forward(&p, &cfg, &s.select_rows(&[3]), &t.select_rows(&[3])).unwrap();
        assert_eq!(single.x_s_t.row(0), full.x_s_t.row(3));
        assert_eq!(single.x_t_p.row(0), full.x_t_p.row(3));

        let perm = [7, 2, 5, 0, 1, 6, 4, 3];
        let permuted = forward(&p, &cfg, &s.select_rows(&perm), &t.select_rows(&perm)).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(permuted.x_s_t.row(i), full.x_s_t.row(src));
            assert_eq!(permuted.x_t_t.row(i), full.x_t_t.row(src));
        }
    }

    #[test]
    fn dim_mismatch_and_non_finite_input() {
        let cfg = tiny();
        let p = init_params(&cfg, 0).unwrap();
        assert!(matches!(
            forward(&p, &cfg, &random(2, 4, 0), &random(2, 4, 1)),
            Err(Error::DimMismatch { .. })
        ));
        let mut bad = random(2, 5, 0);
        bad[(1, 1)] = f64::INFINITY;
        assert!(forward(&p, &cfg, &bad, &random(2, 4, 1)).is_err());
    }

    /// Linear functional of all four outputs; its gradient exercises every path.
    #[test]
    fn backward_matches_finite_differences() {
        for activation in [Activation::Relu, Activation::Gelu] {
            let cfg = LinkerConfig {
                activation,
                ..tiny()
            };
            let p = init_params(&cfg, 21).unwrap();
            let s = random(3, 5, 5);
            let t = random(3, 4, 6);
            let out = forward(&p, &cfg, &s, &t).unwrap();
            let weights = OutputGrads {
                x_s_p: random(3, 16, 7),
                x_t_p: random(3, 16, 8),
                x_s_t: random(3, 16, 9),
                x_t_t: random(3, 16, 10),
            };
            let objective = |q: &LinkerParams| {
                let o = forward(q, &cfg, &s, &t).unwrap();
                [
                    (&o.x_s_p, &weights.x_s_p),
                    (&o.x_t_p, &weights.x_t_p),
                    (&o.x_s_t, &weights.x_s_t),
                    (&o.x_t_t, &weights.x_t_t),
                ]
                .iter()
                .map(|(a, b)| crate::numerics::dot(a.as_slice(), b.as_slice()))
                .sum::<f64>()
            };
            let analytic = backward(&p, &cfg, &out, &weights).flatten();
            let mut probe = p.clone();
            let numeric = finite_diff_grad(
                |theta| {
                    probe.assign_flat(theta);
                    objective(&probe)
                },
                &p.flatten(),
                DEFAULT_STEP,
            )
            .unwrap();
            let err = relative_error(&analytic, &numeric);
            assert!(err < 1e-6, "{activation:?}: relative error {err}");
        }
    }
}
