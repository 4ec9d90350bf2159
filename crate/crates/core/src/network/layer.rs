use rand::Rng;

use crate::error::{Error, Result};
use crate::families::{FamilySpec, FunctionalMatrix};
use crate::linalg::DenseMatrix;
use crate::scalar::{all_finite, Scalar};

use super::Activation;

/// `y = φ(F ⊙ x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer<T> {
    matrix: FunctionalMatrix<T>,
    bias: Vec<T>,
    activation: Activation,
}

/// Values retained from a forward step for the matching backward step.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerCache<T> {
    pub input: Vec<T>,
    /// `u_i = Σ_j F[i][j](x_j) + b_i`
    pub pre_activation: Vec<T>,
    pub output: Vec<T>,
}

/// Parameter and bias deltas of one hidden layer, shaped like the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDeltas<T> {
    pub params: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerDeltas<T> {
    pub fn zeros_for(layer: &HiddenLayer<T>) -> Self {
        Self {
            params: vec![T::zero(); layer.matrix.params().len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn clear(&mut self) {
        self.params.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v = T::zero());
    }

    pub fn is_zero(&self) -> bool {
        self.params.iter().chain(&self.bias).all(|v| *v == T::zero())
    }
}

impl<T: Scalar> HiddenLayer<T> {
    pub fn new(matrix: FunctionalMatrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: bias.len(),
            });
        }
        Ok(Self {
            matrix,
            bias,
            activation,
        })
    }

    /// Fresh layer: family-specific parameter draws, zero biases.
    pub fn init<R: Rng + ?Sized>(
        spec: FamilySpec,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let matrix = FunctionalMatrix::init(spec, outputs, inputs, rng)?;
        Self::new(matrix, vec![T::zero(); outputs], activation)
    }

    pub fn matrix(&self) -> &FunctionalMatrix<T> {
        &self.matrix
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn inputs(&self) -> usize {
        self.matrix.cols()
    }

    pub fn outputs(&self) -> usize {
        self.matrix.rows()
    }

    /// Mutable trainable state: edge parameters and biases.
    pub fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.matrix.params_mut(), &mut self.bias)
    }

    pub fn params_finite(&self) -> bool {
        all_finite(self.matrix.params()) && all_finite(&self.bias)
    }

    pub fn forward(&self, x: &[T]) -> Result<LayerCache<T>> {
        if x.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.len(),
            });
        }
        let mut u = vec![T::zero(); self.outputs()];
        self.matrix.transfer_into(x, &mut u)?;
        for (ui, &b) in u.iter_mut().zip(&self.bias) {
            *ui += b;
        }
        let y: Vec<T> = u.iter().map(|&ui| self.activation.apply(ui)).collect();
        Ok(LayerCache {
            input: x.to_vec(),
            pre_activation: u,
            output: y,
        })
    }

    /// Adds this sample's contribution to `acc`:
    /// `Δp_ijk += scale·δ_i·φ'(u_i)·∂F_ij/∂p_k`, `Δb_i += scale·δ_i·φ'(u_i)`.
    /// When `input_delta` is given it is overwritten with
    /// `Σ_i δ_i·φ'(u_i)·∂F_ij/∂x_j`, the error signal of the layer below.
    pub fn accumulate_backward(
        &self,
        cache: &LayerCache<T>,
        delta_out: &[T],
        scale: T,
        acc: &mut LayerDeltas<T>,
        input_delta: Option<&mut [T]>,
    ) -> Result<()> {
        match input_delta {
            Some(d) => self.accumulate_backward_batch(&[cache], &[delta_out], scale, acc, Some(&mut [d])),
            None => self.accumulate_backward_batch(&[cache], &[delta_out], scale, acc, None),
        }
    }

    /// [`Self::accumulate_backward`] for a batch of samples.
    pub fn accumulate_backward_batch(
        &self,
        caches: &[&LayerCache<T>],
        deltas_out: &[&[T]],
        scale: T,
        acc: &mut LayerDeltas<T>,
        input_deltas: Option<&mut [&mut [T]]>,
    ) -> Result<()> {
        if caches.len() != deltas_out.len() {
            return Err(Error::DimensionMismatch {
                expected: caches.len(),
                actual: deltas_out.len(),
            });
        }
        let mut gs = Vec::with_capacity(caches.len());
        for (cache, delta_out) in caches.iter().zip(deltas_out) {
            if delta_out.len() != self.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: self.outputs(),
                    actual: delta_out.len(),
                });
            }
            if cache.input.len() != self.inputs() || cache.pre_activation.len() != self.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: self.inputs(),
                    actual: cache.input.len(),
                });
            }
            let g: Vec<T> = delta_out
                .iter()
                .zip(cache.pre_activation.iter().zip(&cache.output))
                .map(|(&d, (&u, &y))| d * self.activation.derivative(u, y))
                .collect();
            for (b, &gi) in acc.bias.iter_mut().zip(&g) {
                *b += scale * gi;
            }
            gs.push(g);
        }
        if let Some(ds) = input_deltas.as_deref() {
            if ds.len() != caches.len() || ds.iter().any(|d| d.len() != self.inputs()) {
                return Err(Error::DimensionMismatch {
                    expected: self.inputs(),
                    actual: ds.first().map_or(0, |d| d.len()),
                });
            }
        }
        let mut input_deltas = input_deltas;
        for d in input_deltas.iter_mut().flat_map(|ds| ds.iter_mut()) {
            d.iter_mut().for_each(|v| *v = T::zero());
        }
        let xs: Vec<&[T]> = caches.iter().map(|c| c.input.as_slice()).collect();
        let gs: Vec<&[T]> = gs.iter().map(Vec::as_slice).collect();
        self.matrix
            .accumulate_backward_batch(&xs, &gs, scale, &mut acc.params, input_deltas)
    }

    pub fn apply_deltas(&mut self, d: &LayerDeltas<T>) -> Result<()> {
        let params = self.matrix.params_mut();
        if d.params.len() != params.len() || d.bias.len() != self.bias.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: d.params.len(),
            });
        }
        for (p, &dp) in params.iter_mut().zip(&d.params) {
            *p += dp;
        }
        for (b, &db) in self.bias.iter_mut().zip(&d.bias) {
            *b += db;
        }
        Ok(())
    }
}

/// One forward step through a hidden layer, returning its output and cache.
pub fn forward_layer<T: Scalar>(layer: &HiddenLayer<T>, x: &[T]) -> Result<(Vec<T>, LayerCache<T>)> {
    let cache = layer.forward(x)?;
    Ok((cache.output.clone(), cache))
}

/// Parameter deltas, bias deltas and the previous layer's error signal for a
/// single sample at learning rate `rate`.
pub fn backward_layer<T: Scalar>(
    layer: &HiddenLayer<T>,
    cache: &LayerCache<T>,
    delta_out: &[T],
    rate: T,
) -> Result<(LayerDeltas<T>, Vec<T>)> {
    let mut acc = LayerDeltas::zeros_for(layer);
    let mut delta_in = vec![T::zero(); layer.inputs()];
    layer.accumulate_backward(cache, delta_out, rate, &mut acc, Some(&mut delta_in))?;
    if !all_finite(&acc.params) || !all_finite(&acc.bias) || !all_finite(&delta_in) {
        return Err(Error::NonFinite("layer deltas"));
    }
    Ok((acc, delta_in))
}

/// Linear layer followed by softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputLayer<T> {
    weights: DenseMatrix<T>,
    bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputDeltas<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> OutputDeltas<T> {
    pub fn zeros_for(layer: &OutputLayer<T>) -> Self {
        Self {
            weights: vec![T::zero(); layer.weights.as_slice().len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v = T::zero());
    }
}

impl<T: Scalar> OutputLayer<T> {
    pub fn new(weights: DenseMatrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                expected: weights.rows(),
                actual: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    /// Weights uniform in `[-0.1, 0.1]`, zero biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let data = (0..inputs * classes)
            .map(|_| T::lit(rng.gen_range(-0.1..=0.1)))
            .collect();
        Self::new(DenseMatrix::new(classes, inputs, data)?, vec![T::zero(); classes])
    }

    pub fn weights(&self) -> &DenseMatrix<T> {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weights.as_mut_slice(), &mut self.bias)
    }

    pub fn params_finite(&self) -> bool {
        all_finite(self.weights.as_slice()) && all_finite(&self.bias)
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.len(),
            });
        }
        let mut out = vec![T::zero(); self.classes()];
        self.weights.matvec_into(x, &mut out);
        for (o, &b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        Ok(out)
    }

    /// Standard delta rule for the softmax layer; `delta` is `target − posterior`.
    /// Writes `Wᵀ·delta` into `input_delta` when given.
    pub fn accumulate_backward(
        &self,
        x: &[T],
        delta: &[T],
        scale: T,
        acc: &mut OutputDeltas<T>,
        input_delta: Option<&mut [T]>,
    ) {
        let n = self.inputs();
        for (i, &d) in delta.iter().enumerate() {
            let sd = scale * d;
            acc.bias[i] += sd;
            for (w, &xj) in acc.weights[i * n..(i + 1) * n].iter_mut().zip(x) {
                *w += sd * xj;
            }
        }
        if let Some(out) = input_delta {
            self.weights.matvec_transpose_into(delta, out);
        }
    }

    pub fn apply_deltas(&mut self, d: &OutputDeltas<T>) -> Result<()> {
        if d.weights.len() != self.weights.as_slice().len() || d.bias.len() != self.bias.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.as_slice().len(),
                actual: d.weights.len(),
            });
        }
        for (w, &dw) in self.weights.as_mut_slice().iter_mut().zip(&d.weights) {
            *w += dw;
        }
        for (b, &db) in self.bias.iter_mut().zip(&d.bias) {
            *b += db;
        }
        Ok(())
    }
}
