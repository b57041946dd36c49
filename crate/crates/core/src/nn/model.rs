use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, dim_err, Error, Result};
use crate::rng;

use super::loss::{one_hot, Posteriors};
use super::matrix::{dot, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(config_err!("unknown activation `{other}`")),
        }
    }
}

/// Architecture of a model, without parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl ModelSpec {
    pub fn build(&self, init_seed: u64) -> Result<MlpModel> {
        MlpModel::new(&self.layer_dims, self.activation, self.dropout_rate, init_seed)
    }
}

/// Whether a forward pass runs in evaluation or training mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Training mode; the seed drives the dropout mask.
    Train { dropout_seed: u64 },
}

/// Dense softmax classifier.
///
/// Layer `l` maps `x ↦ x·W_l + b_l` with `W_l` of shape `(dims[l], dims[l+1])`.
/// Hidden layers use `activation`; dropout (when non-zero) is applied to the
/// output of the last hidden layer only.
#[derive(Clone, Debug)]
pub struct MlpModel {
    pub(crate) layer_dims: Vec<usize>,
    pub(crate) weights: Vec<Matrix>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) activation: Activation,
    pub(crate) dropout_rate: f64,
    /// Bumped on every parameter update; ties forward caches to a parameter state.
    pub(crate) version: u64,
}

impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims
            && self.weights == other.weights
            && self.biases == other.biases
            && self.activation == other.activation
            && self.dropout_rate == other.dropout_rate
    }
}

/// Activations retained by [`MlpModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    model_version: u64,
    layer_dims: Vec<usize>,
    /// Input to each layer (post-activation, post-dropout).
    inputs: Vec<Matrix>,
    /// Pre-activations of each hidden layer.
    pre_activations: Vec<Matrix>,
    /// Scaled inverted-dropout mask on the last hidden layer.
    dropout_mask: Option<Vec<f64>>,
}

impl Cache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: Matrix,
    pub posteriors: Posteriors,
    pub cache: Cache,
}

/// Per-layer parameter gradients, shaped like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// All entries, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.data().iter().chain(b.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn l1_norm(&self) -> f64 {
        self.iter().map(f64::abs).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub(crate) fn matches(&self, model: &MlpModel) -> bool {
        self.weights.len() == model.weights.len()
            && self
                .weights
                .iter()
                .zip(&model.weights)
                .all(|(g, w)| g.shape() == w.shape())
            && self
                .biases
                .iter()
                .zip(&model.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Per-sample gradient norms of the individual cross-entropy loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradNorms {
    pub x_l1: f64,
    pub x_l2: f64,
    pub w_l1: f64,
    pub w_l2: f64,
}

impl MlpModel {
    /// Fan-in scaled uniform initialization, `U(±1/√fan_in)` for weights and biases.
    pub fn new(
        layer_dims: &[usize],
        activation: Activation,
        dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(config_err!("a model needs at least an input and an output dimension"));
        }
        if layer_dims.contains(&0) {
            return Err(config_err!("layer dimensions must be positive: {layer_dims:?}"));
        }
        if *layer_dims.last().unwrap() < 2 {
            return Err(config_err!("the output layer needs at least 2 classes"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(config_err!("dropout rate {dropout_rate} outside [0,1)"));
        }
        let mut rng = rng::stream(seed, 0x1417);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, w)?);
            biases.push((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
            dropout_rate,
            version: 0,
        })
    }

    /// Builds a model from explicit parameters, validating shapes.
    pub fn from_parameters(
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
        dropout_rate: f64,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(dim_err!(
                "{} weight matrices vs {} bias vectors",
                weights.len(),
                biases.len()
            ));
        }
        let mut dims = vec![weights[0].rows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != *dims.last().unwrap() {
                return Err(dim_err!("layer {l} expects {} inputs, got {}", w.rows(), dims.last().unwrap()));
            }
            if b.len() != w.cols() {
                return Err(dim_err!("layer {l} bias has {} entries, expected {}", b.len(), w.cols()));
            }
            if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("layer {l} has non-finite parameters")));
            }
            dims.push(w.cols());
        }
        if *dims.last().unwrap() < 2 {
            return Err(config_err!("the output layer needs at least 2 classes"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(config_err!("dropout rate {dropout_rate} outside [0,1)"));
        }
        Ok(Self {
            layer_dims: dims,
            weights,
            biases,
            activation,
            dropout_rate,
            version: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn num_parameters(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.data().len() + b.len())
            .sum()
    }

    /// Flattened parameters in the same order as [`Gradients::iter`].
    pub fn parameters(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.data().iter().chain(b.iter()).copied())
            .collect()
    }

    /// Mutable access to a single parameter by its flat index.
    pub fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        self.version += 1;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.data().len();
            if index < n {
                return &mut w.data_mut()[index];
            }
            index -= n;
            if index < b.len() {
                return &mut b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }

    fn hidden_layers(&self) -> usize {
        self.weights.len() - 1
    }

    fn affine(&self, l: usize, input: &Matrix) -> Result<Matrix> {
        let mut z = input.matmul(&self.weights[l])?;
        let b = &self.biases[l];
        for r in 0..z.rows() {
            for (v, bias) in z.row_mut(r).iter_mut().zip(b) {
                *v += bias;
            }
        }
        Ok(z)
    }

    /// Forward pass returning logits, posteriors and the backward cache.
    pub fn forward(&self, inputs: &Matrix, mode: Mode) -> Result<ForwardPass> {
        if inputs.cols() != self.input_dim() {
            return Err(dim_err!(
                "model expects {} input features, got {}",
                self.input_dim(),
                inputs.cols()
            ));
        }
        let hidden = self.hidden_layers();
        let mut layer_inputs = Vec::with_capacity(self.weights.len());
        let mut pre_activations = Vec::with_capacity(hidden);
        let mut dropout_mask = None;
        let mut current = inputs.clone();
        for l in 0..hidden {
            let z = self.affine(l, &current)?;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = self.activation.apply(*v);
            }
            if l + 1 == hidden && self.dropout_rate > 0.0 {
                if let Mode::Train { dropout_seed } = mode {
                    let keep = 1.0 - self.dropout_rate;
                    let mut rng = rng::stream(dropout_seed, 0xD50F);
                    let mask: Vec<f64> = (0..a.data().len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (v, m) in a.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    dropout_mask = Some(mask);
                }
            }
            layer_inputs.push(current);
            pre_activations.push(z);
            current = a;
        }
        let logits = self.affine(hidden, &current)?;
        layer_inputs.push(current);
        let posteriors = Posteriors::from_logits(&logits);
        Ok(ForwardPass {
            logits,
            posteriors,
            cache: Cache {
                model_version: self.version,
                layer_dims: self.layer_dims.clone(),
                inputs: layer_inputs,
                pre_activations,
                dropout_mask,
            },
        })
    }

    /// Evaluation-mode posteriors.
    pub fn predict(&self, inputs: &Matrix) -> Result<Posteriors> {
        Ok(self.forward(inputs, Mode::Eval)?.posteriors)
    }

    /// Evaluation-mode logits.
    pub fn logits(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.forward(inputs, Mode::Eval)?.logits)
    }

    fn check_cache(&self, cache: &Cache) -> Result<()> {
        if cache.layer_dims != self.layer_dims {
            return Err(Error::Usage(format!(
                "cache was produced by a model with dims {:?}, this model has {:?}",
                cache.layer_dims, self.layer_dims
            )));
        }
        if cache.model_version != self.version {
            return Err(Error::Usage(
                "cache is stale: the model was updated after the forward pass".into(),
            ));
        }
        Ok(())
    }

    /// Exact gradient of the batch-mean cross-entropy `−(1/B) Σ_i Σ_c t_i^c log p_i^c`.
    ///
    /// Targets are treated as constants, so soft targets receive no gradient.
    pub fn backward(&self, cache: &Cache, posteriors: &Posteriors, targets: &Matrix) -> Result<Gradients> {
        let p = posteriors.matrix();
        if p.shape() != targets.shape() {
            return Err(dim_err!("posteriors {:?} vs targets {:?}", p.shape(), targets.shape()));
        }
        if p.rows() != cache.batch_size() {
            return Err(Error::Usage(format!(
                "cache holds {} samples but {} posterior rows were given",
                cache.batch_size(),
                p.rows()
            )));
        }
        let b = p.rows().max(1) as f64;
        let mut dlogits = Matrix::zeros(p.rows(), p.cols());
        for r in 0..p.rows() {
            let t = targets.row(r);
            let mass: f64 = t.iter().sum();
            for ((d, &pv), &tv) in dlogits.row_mut(r).iter_mut().zip(p.row(r)).zip(t) {
                *d = (pv * mass - tv) / b;
            }
        }
        self.backward_logits(cache, &dlogits)
    }

    /// Backpropagates an arbitrary gradient with respect to the logits.
    pub fn backward_logits(&self, cache: &Cache, dlogits: &Matrix) -> Result<Gradients> {
        Ok(self.backprop(cache, dlogits, false)?.0)
    }

    fn backprop(&self, cache: &Cache, dlogits: &Matrix, want_input: bool) -> Result<(Gradients, Option<Matrix>)> {
        self.check_cache(cache)?;
        if dlogits.shape() != (cache.batch_size(), self.num_classes()) {
            return Err(dim_err!(
                "logit gradient {:?} does not match batch {} x {} classes",
                dlogits.shape(),
                cache.batch_size(),
                self.num_classes()
            ));
        }
        let layers = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = dlogits.clone();
        for l in (0..layers).rev() {
            grads.weights[l] = cache.inputs[l].t_matmul(&delta)?;
            let gb = &mut grads.biases[l];
            for row in delta.row_iter() {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 && !want_input {
                break;
            }
            let mut prev = delta.matmul_t(&self.weights[l])?;
            if l > 0 {
                let z = &cache.pre_activations[l - 1];
                for (v, &zv) in prev.data_mut().iter_mut().zip(z.data()) {
                    *v *= self.activation.derivative(zv);
                }
                if l == layers - 1 {
                    if let Some(mask) = &cache.dropout_mask {
                        for (v, m) in prev.data_mut().iter_mut().zip(mask) {
                            *v *= m;
                        }
                    }
                }
            }
            delta = prev;
        }
        let input_grad = if want_input { Some(delta) } else { None };
        Ok((grads, input_grad))
    }

    /// Gradient of the batch-mean cross-entropy with respect to the inputs.
    pub fn input_gradient(&self, cache: &Cache, posteriors: &Posteriors, targets: &Matrix) -> Result<Matrix> {
        let b = posteriors.rows().max(1) as f64;
        let mut dlogits = posteriors.matrix().clone();
        for (d, t) in dlogits.data_mut().iter_mut().zip(targets.data()) {
            *d = (*d - t) / b;
        }
        Ok(self.backprop(cache, &dlogits, true)?.1.unwrap())
    }

    /// L1/L2 norms of each sample's own cross-entropy gradient, with respect
    /// to the input (`x_*`) and to all parameters (`w_*`). Evaluation mode.
    ///
    /// Each sample's weight gradient is a sum of outer products `a ⊗ δ`, whose
    /// norms factor as `‖a‖·‖δ‖`, so no per-sample gradient is materialized.
    pub fn per_sample_grad_norms(&self, inputs: &Matrix, labels: &[usize]) -> Result<Vec<GradNorms>> {
        if labels.len() != inputs.rows() {
            return Err(dim_err!("{} inputs vs {} labels", inputs.rows(), labels.len()));
        }
        let fwd = self.forward(inputs, Mode::Eval)?;
        let targets = one_hot(labels, self.num_classes())?;
        let layers = self.weights.len();
        let mut out = Vec::with_capacity(labels.len());
        for i in 0..labels.len() {
            let mut delta: Vec<f64> = fwd
                .posteriors
                .row(i)
                .iter()
                .zip(targets.row(i))
                .map(|(p, t)| p - t)
                .collect();
            let mut w_l1 = 0.0;
            let mut w_l2_sq = 0.0;
            for l in (0..layers).rev() {
                let a = fwd.cache.inputs[l].row(i);
                let a_l1: f64 = a.iter().map(|v| v.abs()).sum();
                let a_l2_sq: f64 = a.iter().map(|v| v * v).sum();
                let d_l1: f64 = delta.iter().map(|v| v.abs()).sum();
                let d_l2_sq: f64 = delta.iter().map(|v| v * v).sum();
                w_l1 += a_l1 * d_l1 + d_l1;
                w_l2_sq += a_l2_sq * d_l2_sq + d_l2_sq;

                let w = &self.weights[l];
                let mut prev: Vec<f64> = (0..w.rows()).map(|j| dot(w.row(j), &delta)).collect();
                if l > 0 {
                    let z = fwd.cache.pre_activations[l - 1].row(i);
                    for (v, &zv) in prev.iter_mut().zip(z) {
                        *v *= self.activation.derivative(zv);
                    }
                }
                delta = prev;
            }
            out.push(GradNorms {
                x_l1: delta.iter().map(|v| v.abs()).sum(),
                x_l2: delta.iter().map(|v| v * v).sum::<f64>().sqrt(),
                w_l1,
                w_l2: w_l2_sq.sqrt(),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::cross_entropy;

    fn toy_model(dims: &[usize], seed: u64) -> MlpModel {
        MlpModel::new(dims, Activation::Tanh, 0.0, seed).unwrap()
    }

    #[test]
    fn zero_model_gives_uniform_posteriors() {
        let m = MlpModel::from_parameters(
            vec![Matrix::zeros(3, 2)],
            vec![vec![0.0, 0.0]],
            Activation::Relu,
            0.0,
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 5.0]]).unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn identity_logits() {
        let w = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = MlpModel::from_parameters(vec![w], vec![vec![0.0, 0.0]], Activation::Relu, 0.0).unwrap();
        let x = Matrix::from_rows(&[[0.0, 3f64.ln()]]).unwrap();
        let p = m.predict(&x).unwrap();
        assert!((p.row(0)[0] - 0.25).abs() < 1e-15);
        assert!((p.row(0)[1] - 0.75).abs() < 1e-15);
        let again = m.predict(&x).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = toy_model(&[3, 4, 2], 1);
        let x = Matrix::zeros(2, 4);
        assert!(matches!(m.forward(&x, Mode::Eval), Err(Error::Dimension(_))));
    }

    #[test]
    fn matching_targets_give_zero_gradient() {
        let m = toy_model(&[3, 5, 4], 7);
        let x = Matrix::from_rows(&[[0.1, 0.2, -0.3], [1.0, -1.0, 0.5]]).unwrap();
        let f = m.forward(&x, Mode::Eval).unwrap();
        let g = m.backward(&f.cache, &f.posteriors, f.posteriors.matrix()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn identical_batch_matches_single_sample() {
        let m = toy_model(&[3, 5, 4], 3);
        let one = Matrix::from_rows(&[[0.4, -0.2, 0.9]]).unwrap();
        let many = Matrix::from_rows(&[[0.4, -0.2, 0.9]; 6]).unwrap();
        let g1 = {
            let f = m.forward(&one, Mode::Eval).unwrap();
            m.backward(&f.cache, &f.posteriors, &one_hot(&[2], 4).unwrap()).unwrap()
        };
        let g6 = {
            let f = m.forward(&many, Mode::Eval).unwrap();
            m.backward(&f.cache, &f.posteriors, &one_hot(&[2; 6], 4).unwrap()).unwrap()
        };
        for (a, b) in g1.iter().zip(g6.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut m = toy_model(&[2, 3, 2], 0);
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let f = m.forward(&x, Mode::Eval).unwrap();
        *m.parameter_mut(0) += 0.1;
        let t = one_hot(&[0], 2).unwrap();
        assert!(matches!(m.backward(&f.cache, &f.posteriors, &t), Err(Error::Usage(_))));

        let other = toy_model(&[2, 4, 2], 0);
        let f = m.forward(&x, Mode::Eval).unwrap();
        assert!(matches!(other.backward(&f.cache, &f.posteriors, &t), Err(Error::Usage(_))));
    }

    #[test]
    fn dropout_is_train_only_and_seeded() {
        let m = MlpModel::new(&[4, 16, 3], Activation::Relu, 0.5, 11).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.1, 0.8, 0.2]]).unwrap();
        let e1 = m.forward(&x, Mode::Eval).unwrap();
        let e2 = m.forward(&x, Mode::Eval).unwrap();
        assert_eq!(e1.logits, e2.logits);
        let t1 = m.forward(&x, Mode::Train { dropout_seed: 5 }).unwrap();
        let t2 = m.forward(&x, Mode::Train { dropout_seed: 5 }).unwrap();
        assert_eq!(t1.logits, t2.logits);
        let t3 = m.forward(&x, Mode::Train { dropout_seed: 6 }).unwrap();
        assert_ne!(t1.logits, t3.logits);
    }

    #[test]
    fn dropout_gradient_matches_finite_differences() {
        let mut m = MlpModel::new(&[3, 6, 3], Activation::Tanh, 0.4, 2).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.7, 0.2], [0.9, 0.1, -0.4]]).unwrap();
        let t = one_hot(&[1, 2], 3).unwrap();
        let mode = Mode::Train { dropout_seed: 99 };
        let f = m.forward(&x, mode).unwrap();
        let g: Vec<f64> = m.backward(&f.cache, &f.posteriors, &t).unwrap().iter().collect();
        let h = 1e-6;
        for (k, &gk) in g.iter().enumerate() {
            let orig = *m.parameter_mut(k);
            *m.parameter_mut(k) = orig + h;
            let up = cross_entropy(&m.forward(&x, mode).unwrap().posteriors, &t).unwrap().mean;
            *m.parameter_mut(k) = orig - h;
            let dn = cross_entropy(&m.forward(&x, mode).unwrap().posteriors, &t).unwrap().mean;
            *m.parameter_mut(k) = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - gk).abs() < 1e-7, "param {k}: fd {fd} vs {gk}");
        }
    }

    #[test]
    fn input_gradient_matches_per_sample_norms() {
        let m = toy_model(&[3, 4, 3], 5);
        let x = Matrix::from_rows(&[[0.5, -0.5, 1.0]]).unwrap();
        let t = one_hot(&[1], 3).unwrap();
        let f = m.forward(&x, Mode::Eval).unwrap();
        let gx = m.input_gradient(&f.cache, &f.posteriors, &t).unwrap();
        let gw = m.backward(&f.cache, &f.posteriors, &t).unwrap();
        let norms = m.per_sample_grad_norms(&x, &[1]).unwrap()[0];
        let gx_l1: f64 = gx.data().iter().map(|v| v.abs()).sum();
        assert!((norms.x_l1 - gx_l1).abs() < 1e-12);
        assert!((norms.w_l1 - gw.l1_norm()).abs() < 1e-12);
        assert!((norms.w_l2 - gw.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_sample_has_tiny_gradients() {
        let w = Matrix::from_rows(&[[60.0, -60.0]]).unwrap();
        let m = MlpModel::from_parameters(vec![w], vec![vec![0.0, 0.0]], Activation::Relu, 0.0).unwrap();
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let n = m.per_sample_grad_norms(&x, &[0]).unwrap()[0];
        assert!(n.x_l1 < 1e-40 && n.x_l2 < 1e-40 && n.w_l1 < 1e-40 && n.w_l2 < 1e-40);
    }
}
