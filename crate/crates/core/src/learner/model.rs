use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearnerError, Result};

/// Per-coordinate affine map of `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaling {
    pub fn identity(dim: usize) -> Self {
        Self {
            min: vec![0.0; dim],
            max: vec![1.0; dim],
        }
    }

    /// Min/max over `rows`. Constant coordinates get a unit range.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            for (i, &x) in row.iter().enumerate() {
                min[i] = min[i].min(x);
                max[i] = max[i].max(x);
            }
        }
        for i in 0..dim {
            if !min[i].is_finite() {
                min[i] = 0.0;
            }
            if !(max[i] > min[i]) {
                max[i] = min[i] + 1.0;
            }
        }
        Self { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.min[i]) / (self.max[i] - self.min[i]))
            .collect()
    }

    pub fn unscale(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| self.min[i] + v * (self.max[i] - self.min[i]))
            .collect()
    }

    fn is_valid(&self) -> bool {
        self.min.len() == self.max.len()
            && self.min.iter().zip(&self.max).all(|(a, b)| a.is_finite() && b.is_finite() && b > a)
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b
        }));
    }
}

/// Parameter-shaped gradient (or velocity) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten().for_each(|x| *x *= s);
    }
}

/// Multilayer perceptron with ReLU hidden layers and an affine output, plus
/// the input/output scalings fitted on its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub(crate) layers: Vec<Layer>,
    pub(crate) input_scaling: Scaling,
    pub(crate) output_scaling: Scaling,
    pub(crate) seed: u64,
}

impl MlpModel {
    /// He-uniform weights, zero biases, identity scalings.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        let mut model = Self::zeros(dims);
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        model
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "invalid layer dims {dims:?}");
        Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            input_scaling: Scaling::identity(dims[0]),
            output_scaling: Scaling::identity(dims[dims.len() - 1]),
            seed: 0,
        }
    }

    pub(crate) fn from_parts(layers: Vec<Layer>, input_scaling: Scaling, output_scaling: Scaling, seed: u64) -> Result<Self> {
        let model = Self {
            layers,
            input_scaling,
            output_scaling,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LearnerError::Format(m.to_string()));
        if self.layers.is_empty() {
            return bad("no layers");
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return bad("adjacent layer dims disagree");
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return bad("layer buffer size");
            }
        }
        if self.input_scaling.dim() != self.input_dim() || self.output_scaling.dim() != self.output_dim() {
            return bad("scaling dims");
        }
        if !self.input_scaling.is_valid() || !self.output_scaling.is_valid() {
            return bad("scaling must be finite with max > min");
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].weights
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].biases
    }

    pub fn input_scaling(&self) -> &Scaling {
        &self.input_scaling
    }

    pub fn output_scaling(&self) -> &Scaling {
        &self.output_scaling
    }

    pub fn set_scalings(&mut self, input: Scaling, output: Scaling) -> Result<()> {
        let (old_in, old_out) = (
            std::mem::replace(&mut self.input_scaling, input),
            std::mem::replace(&mut self.output_scaling, output),
        );
        if let Err(e) = self.validate() {
            self.input_scaling = old_in;
            self.output_scaling = old_out;
            return Err(e);
        }
        Ok(())
    }

    /// Network output for an already-scaled input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pop().unwrap())
    }

    /// Scales `x`, runs the network and maps the output back to data units.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let y = self.forward(&self.input_scaling.scale(x))?;
        Ok(self.output_scaling.unscale(&y))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::NonFinite);
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(acts.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|z| *z = z.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over all outputs of a batch of scaled samples.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let m = self.output_dim() as f64;
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let y = self.trace(x).pop().unwrap();
                y.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        total / (inputs.len() as f64 * m)
    }

    /// Summed (not averaged) squared-error gradient over `inputs`, and the
    /// summed squared error. Dividing both by `batch * outputs` gives the
    /// gradient and value of [`MlpModel::loss`].
    pub(crate) fn accumulate(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let mut sse = 0.0;
        let last = self.layers.len() - 1;
        for (x, t) in inputs.iter().zip(targets) {
            let acts = self.trace(x);
            let y = &acts[last + 1];
            let mut delta: Vec<f64> = y.iter().zip(t.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
            sse += y.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let a_in = &acts[l];
                let gw = &mut grads.weights[l];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    grads.biases[l][o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
                }
                if l == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
                }
                // ReLU derivative via the post-activation sign.
                back.iter_mut().zip(a_in).for_each(|(b, a)| {
                    if *a <= 0.0 {
                        *b = 0.0
                    }
                });
                delta = back;
            }
        }
        (sse, grads)
    }

    /// Gradient of [`MlpModel::loss`] with respect to every parameter.
    pub fn gradients(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Gradients) {
        let (sse, mut g) = self.accumulate(inputs, targets);
        let denom = inputs.len() as f64 * self.output_dim() as f64;
        g.scale(1.0 / denom);
        (sse / denom, g)
    }

    pub(crate) fn apply_momentum(&mut self, velocity: &mut Gradients, grads: &Gradients, lr: f64, momentum: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for ((w, v), g) in layer.weights.iter_mut().zip(&mut velocity.weights[l]).zip(&grads.weights[l]) {
                *v = momentum * *v - lr * g;
                *w += *v;
            }
            for ((b, v), g) in layer.biases.iter_mut().zip(&mut velocity.biases[l]).zip(&grads.biases[l]) {
                *v = momentum * *v - lr * g;
                *b += *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const DIMS: [usize; 5] = [40, 100, 100, 100, 4];

    /// Plain nested-loop matrix arithmetic.
    fn oracle_forward(m: &MlpModel, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = m.layers.len();
        for (k, l) in m.layers.iter().enumerate() {
            let mut z = vec![0.0; l.outputs];
            for o in 0..l.outputs {
                let mut s = l.biases[o];
                for i in 0..l.inputs {
                    s += l.weights[o * l.inputs + i] * a[i];
                }
                z[o] = if k + 1 < n { s.max(0.0) } else { s };
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(&DIMS);
        assert_eq!(m.forward(&[0.3; 40]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn single_path_trace() {
        let mut m = MlpModel::zeros(&[3, 2, 2, 1]);
        // x[1] -> h1[0] (w 2, b 1) -> h2[1] (w -0.5, b 4) -> y (w 3, b -1)
        m.weights_mut(0)[1] = 2.0;
        m.biases_mut(0)[0] = 1.0;
        m.weights_mut(1)[2] = -0.5;
        m.biases_mut(1)[1] = 4.0;
        m.weights_mut(2)[1] = 3.0;
        m.biases_mut(2)[0] = -1.0;
        // h1 = 2*1.5+1 = 4; h2 = -2+4 = 2; y = 6-1 = 5
        assert_eq!(m.forward(&[0.0, 1.5, 0.0]).unwrap(), vec![5.0]);
        // h1 = 2*(-3)+1 = -5 -> 0; h2 = 4; y = 11
        assert_eq!(m.forward(&[0.0, -3.0, 0.0]).unwrap(), vec![11.0]);
    }

    #[test]
    fn dimension_errors() {
        let m = MlpModel::zeros(&DIMS);
        assert!(matches!(
            m.forward(&[0.0; 39]),
            Err(LearnerError::DimensionMismatch { expected: 40, got: 39 })
        ));
        assert!(matches!(m.forward(&[f64::NAN; 40]), Err(LearnerError::NonFinite)));
    }

    #[test]
    fn scaling_constant_coordinate() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Scaling::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(s.min, vec![1.0, 5.0]);
        assert_eq!(s.max, vec![3.0, 6.0]);
        assert_eq!(s.scale(&[2.0, 5.0]), vec![0.5, 0.0]);
        assert_eq!(s.unscale(&[0.5, 0.0]), vec![2.0, 5.0]);
    }

    /// Weights of layer `l` followed by its biases, as one flat index space.
    fn param(m: &mut MlpModel, l: usize, i: usize) -> &mut f64 {
        let layer = &mut m.layers[l];
        let nw = layer.weights.len();
        if i < nw {
            &mut layer.weights[i]
        } else {
            &mut layer.biases[i - nw]
        }
    }

    fn fd_check(dims: &[usize], seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let mut m = MlpModel::new(dims, seed);
        for l in 0..m.layers.len() {
            for b in m.biases_mut(l) {
                *b = rng.random_range(-0.3..0.3);
            }
        }
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..dims[0]).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = (0..5).map(|_| (0..*dims.last().unwrap()).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let tr: Vec<&[f64]> = ts.iter().map(|v| v.as_slice()).collect();
        let (_, g) = m.gradients(&xr, &tr);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for l in 0..m.layers.len() {
            let nw = m.layers[l].weights.len();
            for i in 0..nw + m.layers[l].biases.len() {
                let orig = *param(&mut m, l, i);
                *param(&mut m, l, i) = orig + h;
                let up = m.loss(&xr, &tr);
                *param(&mut m, l, i) = orig - h;
                let down = m.loss(&xr, &tr);
                *param(&mut m, l, i) = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = if i < nw { g.weights[l][i] } else { g.biases[l][i - nw] };
                let scale = numeric.abs().max(analytic.abs());
                if scale > 1e-7 {
                    worst = worst.max((numeric - analytic).abs() / scale);
                }
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_central_differences() {
        for seed in 0..4 {
            fd_check(&[6, 8, 7, 5, 3], seed);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn forward_matches_matrix_oracle(seed in any::<u64>(), xs in prop::collection::vec(-2.0f64..2.0, 40)) {
            let mut m = MlpModel::new(&DIMS, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for l in 0..4 {
                for b in m.biases_mut(l) {
                    *b = rng.random_range(-0.5..0.5);
                }
            }
            let y = m.forward(&xs).unwrap();
            let o = oracle_forward(&m, &xs);
            for (a, b) in y.iter().zip(&o) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn small_perturbations_give_small_changes(seed in any::<u64>(), xs in prop::collection::vec(0.0f64..1.0, 40), i in 0usize..40) {
            let m = MlpModel::new(&DIMS, seed);
            let mut x2 = xs.clone();
            x2[i] += 1e-6;
            let (a, b) = (m.forward(&xs).unwrap(), m.forward(&x2).unwrap());
            // Each He-uniform layer has spectral norm well below 10.
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-6 * 1e4);
            }
        }
    }
}
