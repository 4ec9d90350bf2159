//! Layer composition, forward pass and back-propagation.
//!
//! Error signals follow the ascent convention: `δ` is the gradient of the
//! *negative* loss with respect to a unit's output, so deltas computed from
//! it are added to the parameters.

mod activation;
pub mod conic;
mod layer;

use rand::Rng;

use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::scalar::{all_finite, Scalar};

pub use activation::Activation;
pub use layer::{
    backward_layer, forward_layer, HiddenLayer, LayerCache, LayerDeltas, OutputDeltas, OutputLayer,
};

/// Shape of one hidden layer to be created.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub family: FamilySpec,
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(family: impl Into<FamilySpec>, width: usize, activation: Activation) -> Self {
        Self {
            family: family.into(),
            width,
            activation,
        }
    }
}

/// Hidden functional layers followed by a linear softmax classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    hidden: Vec<HiddenLayer<T>>,
    output: OutputLayer<T>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    pub input: Vec<T>,
    pub caches: Vec<LayerCache<T>>,
    pub logits: Vec<T>,
    pub posteriors: Vec<T>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Input of the output layer.
    pub fn features(&self) -> &[T] {
        self.caches.last().map_or(&self.input, |c| &c.output)
    }

    /// `−ln posterior[label]`, computed from the logits.
    pub fn cross_entropy(&self, label: usize) -> T {
        cross_entropy(&self.logits, label)
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.posteriors)
    }
}

/// Deltas for every trainable parameter of a [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkDeltas<T> {
    pub hidden: Vec<LayerDeltas<T>>,
    pub output: OutputDeltas<T>,
}

impl<T: Scalar> NetworkDeltas<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            hidden: net.hidden.iter().map(LayerDeltas::zeros_for).collect(),
            output: OutputDeltas::zeros_for(&net.output),
        }
    }

    pub fn clear(&mut self) {
        self.hidden.iter_mut().for_each(LayerDeltas::clear);
        self.output.clear();
    }

    pub fn is_finite(&self) -> bool {
        self.hidden
            .iter()
            .all(|d| all_finite(&d.params) && all_finite(&d.bias))
            && all_finite(&self.output.weights)
            && all_finite(&self.output.bias)
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(hidden: Vec<HiddenLayer<T>>, output: OutputLayer<T>) -> Result<Self> {
        for pair in hidden.windows(2) {
            if pair[1].inputs() != pair[0].outputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        if let Some(last) = hidden.last() {
            if output.inputs() != last.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: last.outputs(),
                    actual: output.inputs(),
                });
            }
        }
        Ok(Self { hidden, output })
    }

    /// Random network: hidden layers are drawn in order, then the output layer.
    pub fn init<R: Rng + ?Sized>(
        layers: &[LayerSpec],
        input_dim: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut hidden = Vec::with_capacity(layers.len());
        let mut width = input_dim;
        for spec in layers {
            hidden.push(HiddenLayer::init(spec.family, width, spec.width, spec.activation, rng)?);
            width = spec.width;
        }
        let output = OutputLayer::init(width, classes, rng)?;
        Self::new(hidden, output)
    }

    pub fn hidden(&self) -> &[HiddenLayer<T>] {
        &self.hidden
    }

    pub fn hidden_mut(&mut self) -> &mut [HiddenLayer<T>] {
        &mut self.hidden
    }

    pub fn output(&self) -> &OutputLayer<T> {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut OutputLayer<T> {
        &mut self.output
    }

    pub fn into_parts(self) -> (Vec<HiddenLayer<T>>, OutputLayer<T>) {
        (self.hidden, self.output)
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().map_or(self.output.inputs(), HiddenLayer::inputs)
    }

    pub fn classes(&self) -> usize {
        self.output.classes()
    }

    pub fn forward(&self, x: &[T]) -> Result<ForwardPass<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut caches: Vec<LayerCache<T>> = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let cache = layer.forward(caches.last().map_or(x, |c| &c.output))?;
            caches.push(cache);
        }
        let features = caches.last().map_or(x, |c| &c.output);
        let logits = self.output.logits(features)?;
        let posteriors = softmax(&logits)?;
        Ok(ForwardPass {
            input: x.to_vec(),
            caches,
            logits,
            posteriors,
        })
    }

    pub fn posteriors(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x)?.posteriors)
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(self.forward(x)?.predicted())
    }

    /// Accumulates `scale ×` the ascent deltas of one labelled sample.
    pub fn accumulate_gradients(
        &self,
        pass: &ForwardPass<T>,
        label: usize,
        scale: T,
        acc: &mut NetworkDeltas<T>,
    ) -> Result<()> {
        self.accumulate_batch(std::slice::from_ref(pass), &[label], scale, acc)
    }

    /// Accumulates `scale ×` the summed ascent deltas of a batch of samples.
    pub fn accumulate_batch(
        &self,
        passes: &[ForwardPass<T>],
        labels: &[usize],
        scale: T,
        acc: &mut NetworkDeltas<T>,
    ) -> Result<()> {
        if passes.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: passes.len(),
                actual: labels.len(),
            });
        }
        let classes = self.classes();
        let has_hidden = !self.hidden.is_empty();
        let mut upstream: Vec<Vec<T>> = Vec::with_capacity(passes.len());
        for (pass, &label) in passes.iter().zip(labels) {
            if label >= classes {
                return Err(Error::ClassOutOfRange { class: label, classes });
            }
            let mut delta: Vec<T> = pass.posteriors.iter().map(|&p| -p).collect();
            delta[label] += T::one();
            let mut up = vec![T::zero(); if has_hidden { self.output.inputs() } else { 0 }];
            self.output.accumulate_backward(
                pass.features(),
                &delta,
                scale,
                &mut acc.output,
                has_hidden.then_some(up.as_mut_slice()),
            );
            upstream.push(up);
        }
        for l in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[l];
            let caches: Vec<&LayerCache<T>> = passes.iter().map(|p| &p.caches[l]).collect();
            let deltas: Vec<&[T]> = upstream.iter().map(Vec::as_slice).collect();
            if l > 0 {
                let mut below = vec![vec![T::zero(); layer.inputs()]; passes.len()];
                let mut below_refs: Vec<&mut [T]> = below.iter_mut().map(Vec::as_mut_slice).collect();
                layer.accumulate_backward_batch(&caches, &deltas, scale, &mut acc.hidden[l], Some(&mut below_refs))?;
                upstream = below;
            } else {
                layer.accumulate_backward_batch(&caches, &deltas, scale, &mut acc.hidden[l], None)?;
            }
        }
        Ok(())
    }

    /// Deltas of one sample at learning rate `rate`, ready for [`Network::apply_deltas`].
    pub fn backward(&self, pass: &ForwardPass<T>, label: usize, rate: T) -> Result<NetworkDeltas<T>> {
        let mut acc = NetworkDeltas::zeros_like(self);
        self.accumulate_gradients(pass, label, rate, &mut acc)?;
        Ok(acc)
    }

    /// `p += Δp`, `b += Δb` for every layer.
    pub fn apply_deltas(&mut self, deltas: &NetworkDeltas<T>) -> Result<()> {
        if deltas.hidden.len() != self.hidden.len() {
            return Err(Error::DimensionMismatch {
                expected: self.hidden.len(),
                actual: deltas.hidden.len(),
            });
        }
        for (layer, d) in self.hidden.iter_mut().zip(&deltas.hidden) {
            layer.apply_deltas(d)?;
        }
        self.output.apply_deltas(&deltas.output)
    }

    pub fn params_finite(&self) -> bool {
        self.hidden.iter().all(HiddenLayer::params_finite) && self.output.params_finite()
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.hidden
            .iter()
            .map(|l| l.matrix().params().len() + l.bias().len())
            .sum::<usize>()
            + self.output.weights().as_slice().len()
            + self.output.bias().len()
    }
}

/// Forward pass returning class posteriors and per-layer caches.
pub fn forward_network<T: Scalar>(net: &Network<T>, x: &[T]) -> Result<(Vec<T>, Vec<LayerCache<T>>)> {
    let pass = net.forward(x)?;
    Ok((pass.posteriors, pass.caches))
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if !all_finite(logits) {
        return Err(Error::NonFinite("logits"));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, &b| a + b);
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `−ln softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().fold(T::zero(), |a, &z| a + (z - max).exp()).ln() + max;
    lse - logits[label]
}

/// `target − posterior`.
pub fn output_delta<T: Scalar>(posteriors: &[T], target: &[T]) -> Result<Vec<T>> {
    if posteriors.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: posteriors.len(),
            actual: target.len(),
        });
    }
    Ok(target.iter().zip(posteriors).map(|(&t, &p)| t - p).collect())
}

/// Index of the largest element; the lowest index wins ties.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyId, FunctionalMatrix};
    use crate::linalg::{matvec, DenseMatrix, Vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lin_layer(rows: usize, cols: usize, w: &[f64], act: Activation) -> HiddenLayer<f64> {
        let m = FunctionalMatrix::from_parts(FamilyId::Lin.spec(), rows, cols, w.to_vec(), None).unwrap();
        HiddenLayer::new(m, vec![0.0; rows], act).unwrap()
    }

    #[test]
    fn lin_relu_layer_on_nonnegative_input_is_matvec() {
        let w = [0.5, 1.0, 2.0, 0.25, 3.0, 0.75];
        let layer = lin_layer(2, 3, &w, Activation::Relu);
        let x = [1.0, 2.0, 0.5];
        let (y, cache) = forward_layer(&layer, &x).unwrap();
        let dense = DenseMatrix::new(2, 3, w.to_vec()).unwrap();
        let expected = matvec(&dense, &Vector::new(x.to_vec()).unwrap()).unwrap();
        assert_eq!(y, expected.as_slice());
        assert_eq!(cache.pre_activation, y);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let out = OutputLayer::new(DenseMatrix::<f64>::zeros(10, 4).unwrap(), vec![0.0; 10]).unwrap();
        let net = Network::new(vec![], out).unwrap();
        let (post, caches) = forward_network(&net, &[0.3, -1.0, 2.0, 9.0]).unwrap();
        assert!(caches.is_empty());
        for p in post {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn posteriors_are_a_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layers = [
            LayerSpec::new(FamilyId::F12, 6, Activation::Tanh),
            LayerSpec::new(FamilyId::F20, 5, Activation::Relu),
        ];
        let net: Network<f64> = Network::init(&layers, 4, 7, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let p = net.posteriors(&x).unwrap();
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn lin_network_matches_standard_network() {
        // reference: y = logistic(W1 x + b1), logits = W2 y + b2, by hand
        let w1 = [0.2, -0.4, 0.1, 0.7, 0.3, -0.6];
        let b1 = [0.05, -0.1];
        let w2 = [0.9, -0.3, -0.5, 0.8, 0.1, 0.2];
        let b2 = [0.0, 0.1, -0.2];
        let m = FunctionalMatrix::from_parts(FamilyId::Lin.spec(), 2, 3, w1.to_vec(), None).unwrap();
        let hidden = HiddenLayer::new(m, b1.to_vec(), Activation::Logistic).unwrap();
        let out = OutputLayer::new(DenseMatrix::new(3, 2, w2.to_vec()).unwrap(), b2.to_vec()).unwrap();
        let net = Network::new(vec![hidden], out).unwrap();

        let x = [0.3, 0.9, -0.2];
        let y: Vec<f64> = (0..2)
            .map(|i| {
                let u: f64 = (0..3).map(|j| w1[i * 3 + j] * x[j]).sum::<f64>() + b1[i];
                1.0 / (1.0 + (-u).exp())
            })
            .collect();
        let z: Vec<f64> = (0..3)
            .map(|i| (0..2).map(|j| w2[i * 2 + j] * y[j]).sum::<f64>() + b2[i])
            .collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        let post = net.posteriors(&x).unwrap();
        for (p, zi) in post.iter().zip(&z) {
            assert!((p - zi.exp() / denom).abs() < 1e-14);
        }
    }

    #[test]
    fn output_delta_cases() {
        let t = [0.0, 1.0, 0.0];
        assert_eq!(output_delta(&t, &t).unwrap(), vec![0.0, 0.0, 0.0]);
        let uniform = [0.1f64; 10];
        let mut target = [0.0; 10];
        target[0] = 1.0;
        let d = output_delta(&uniform, &target).unwrap();
        assert!((d[0] - 0.9).abs() < 1e-15);
        assert!(d[1..].iter().all(|&v| (v + 0.1).abs() < 1e-15));
        assert!(output_delta(&uniform, &t).is_err());
    }

    #[test]
    fn output_delta_matches_loss_finite_differences() {
        // ∂(−CE)/∂z_i = target_i − posterior_i
        let z = [0.3f64, -1.2, 2.0, 0.0];
        let label = 2;
        let post = softmax(&z).unwrap();
        let mut target = [0.0; 4];
        target[label] = 1.0;
        let delta = output_delta(&post, &target).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let numeric = -(cross_entropy(&zp, label) - cross_entropy(&zm, label)) / (2.0 * h);
            assert!((numeric - delta[i]).abs() < 1e-8, "{i}: {numeric} vs {}", delta[i]);
        }
    }

    #[test]
    fn zero_delta_gives_zero_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer: HiddenLayer<f64> = HiddenLayer::init(FamilyId::F12.spec(), 3, 4, Activation::Tanh, &mut rng).unwrap();
        let cache = layer.forward(&[0.2, 0.5, 0.9]).unwrap();
        let (d, below) = backward_layer(&layer, &cache, &[0.0; 4], 0.5).unwrap();
        assert!(d.is_zero());
        assert!(below.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lin_deltas_are_classical_weight_deltas() {
        let w = [0.5, -0.2, 0.1, 0.3];
        let layer = lin_layer(2, 2, &w, Activation::Tanh);
        let x = [0.4, -0.7];
        let cache = layer.forward(&x).unwrap();
        let delta = [0.25, -0.5];
        let rate = 0.125;
        let (d, below) = backward_layer(&layer, &cache, &delta, rate).unwrap();
        for i in 0..2 {
            let g = delta[i] * (1.0 - cache.output[i].powi(2));
            assert!((d.bias[i] - rate * g).abs() < 1e-15);
            for j in 0..2 {
                assert!((d.params[i * 2 + j] - rate * g * x[j]).abs() < 1e-15);
            }
        }
        for j in 0..2 {
            let expected: f64 = (0..2)
                .map(|i| delta[i] * (1.0 - cache.output[i].powi(2)) * w[i * 2 + j])
                .sum();
            assert!((below[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_zero_deltas_leaves_net_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net: Network<f64> =
            Network::init(&[LayerSpec::new(FamilyId::F03, 3, Activation::Tanh)], 4, 3, &mut rng).unwrap();
        let before = net.clone();
        let zeros = NetworkDeltas::zeros_like(&net);
        net.apply_deltas(&zeros).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn single_lin_edge_update_by_hand() {
        // one input, one hidden unit (identity-like via relu on positive u), one output class pair
        let layer = lin_layer(1, 1, &[0.5], Activation::Relu);
        let out = OutputLayer::new(DenseMatrix::new(2, 1, vec![1.0, -1.0]).unwrap(), vec![0.0, 0.0]).unwrap();
        let mut net = Network::new(vec![layer], out).unwrap();
        let x = [2.0];
        let pass = net.forward(&x).unwrap();
        // y = 1, logits (1, -1), posterior0 = e/(e + 1/e)
        let p0 = 1.0f64.exp() / (1.0f64.exp() + (-1.0f64).exp());
        let d = net.backward(&pass, 0, 0.1).unwrap();
        net.apply_deltas(&d).unwrap();
        // δ_y = Σ_i W_i (t_i − p_i) = (1 − p0)·1 + (0 − (1 − p0))·(−1) = 2(1 − p0)
        let expected = 0.5 + 0.1 * 2.0 * (1.0 - p0) * 1.0 * 2.0;
        assert!((net.hidden()[0].matrix().params()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[1.0f64; 4]), 0);
    }

    #[test]
    fn chain_mismatch_rejected() {
        let a = lin_layer(2, 3, &[0.0; 6], Activation::Tanh);
        let b = lin_layer(2, 4, &[0.0; 8], Activation::Tanh);
        let out = OutputLayer::new(DenseMatrix::zeros(2, 2).unwrap(), vec![0.0; 2]).unwrap();
        assert!(Network::new(vec![a, b], out).is_err());
    }
}
