//! Recurrent memory-function layer and the next-digit sequence trainer.
//!
//! Each edge of a memory layer computes `F = tanh(p·x + q·C + r)` where `C` is
//! the edge's own output from the previous step, kept in a [`MemoryGrid`].
//! Gradients treat `C` as a constant: there is no back-propagation through
//! time.

use rand::Rng;

use crate::data::{one_hot, DigitSequence};
use crate::error::{Error, Result};
use crate::families::{logistic, FamilyId, FunctionalMatrix};
use crate::network::{argmax, cross_entropy, softmax, OutputDeltas, OutputLayer};
use crate::scalar::Scalar;

const DIGITS: usize = 10;

/// Per-edge recurrent cells `C[i][j]` and the step count `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryGrid<T> {
    rows: usize,
    cols: usize,
    cells: Vec<T>,
    t: usize,
}

impl<T: Scalar> MemoryGrid<T> {
    /// All cells zero at `t = 0`.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![T::zero(); rows * cols],
            t: 0,
        }
    }

    /// A grid holding arbitrary cell values, as if after step `t`.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<T>, t: usize) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: cells.len(),
            });
        }
        Ok(Self { rows, cols, cells, t })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> T {
        self.cells[i * self.cols + j]
    }

    pub fn timestep(&self) -> usize {
        self.t
    }

    pub fn reset(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = T::zero());
        self.t = 0;
    }
}

/// `tanh(p·x + q·c + r)` for `params = (p, q, r)`.
pub fn memory_function<T: Scalar>(params: &[T], x: T, c_prev: T) -> T {
    (params[0] * x + params[1] * c_prev + params[2]).tanh()
}

fn check_memory_shapes<T: Scalar>(matrix: &FunctionalMatrix<T>, grid: &MemoryGrid<T>, x: &[T]) -> Result<()> {
    if matrix.spec().id != FamilyId::Mem {
        return Err(Error::UnsupportedFamily {
            name: matrix.spec().id.name().to_string(),
            reason: "memory layers need the MEM family",
        });
    }
    if grid.rows != matrix.rows() || grid.cols != matrix.cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows() * matrix.cols(),
            actual: grid.rows * grid.cols,
        });
    }
    if x.len() != matrix.cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.cols(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// One recurrent step: every edge emits `tanh(p·x_j + q·C[i][j] + r)` and
/// stores it as its new cell value. Returns the row sums.
pub fn memory_step<T: Scalar>(matrix: &FunctionalMatrix<T>, grid: &mut MemoryGrid<T>, x: &[T]) -> Result<Vec<T>> {
    check_memory_shapes(matrix, grid, x)?;
    let n = matrix.cols();
    let (edges, _) = matrix.params().as_chunks::<3>();
    let mut out = vec![T::zero(); matrix.rows()];
    for ((o, row), cells) in out.iter_mut().zip(edges.chunks_exact(n)).zip(grid.cells.chunks_exact_mut(n)) {
        let mut acc = T::zero();
        for ((p, c), &xj) in row.iter().zip(cells.iter_mut()).zip(x) {
            *c = memory_function(p, xj, *c);
            acc += *c;
        }
        *o = acc;
    }
    grid.t += 1;
    Ok(out)
}

/// Deltas of one memory step: `params` scaled by the rate, `input` unscaled.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryDeltas<T> {
    pub params: Vec<T>,
    pub input: Vec<T>,
}

/// Adds `scale·g_i·∂F/∂(p, q, r)` for each edge given the previous cells and
/// the step's outputs `f` (the new cells). Optionally accumulates
/// `Σ_i g_i·∂F/∂x_j` into `input`.
#[allow(clippy::too_many_arguments)]
fn accumulate_memory_backward<T: Scalar>(
    matrix: &FunctionalMatrix<T>,
    prev: &[T],
    f: &[T],
    x: &[T],
    g: &[T],
    scale: T,
    param_acc: &mut [T],
    mut input: Option<&mut [T]>,
) {
    let n = matrix.cols();
    let (edges, _) = matrix.params().as_chunks::<3>();
    let (acc_edges, _) = param_acc.as_chunks_mut::<3>();
    for (i, &gi) in g.iter().enumerate() {
        if gi == T::zero() {
            continue;
        }
        let sg = scale * gi;
        let span = i * n..(i + 1) * n;
        let rows = edges[span.clone()].iter().zip(&mut acc_edges[span.clone()]);
        for (j, ((p, acc), (&c, &fv))) in rows.zip(prev[span.clone()].iter().zip(&f[span.clone()])).enumerate() {
            let slope = T::one() - fv * fv;
            let s = sg * slope;
            acc[0] += s * x[j];
            acc[1] += s * c;
            acc[2] += s;
            if let Some(d) = input.as_deref_mut() {
                d[j] += gi * slope * p[0];
            }
        }
    }
}

/// Parameter and input deltas of one step, from the grid as it was *before*
/// the step. `g_i` is the output error signal times the activation slope.
pub fn memory_backward_step<T: Scalar>(
    matrix: &FunctionalMatrix<T>,
    prev: &MemoryGrid<T>,
    x: &[T],
    g: &[T],
    rate: T,
) -> Result<MemoryDeltas<T>> {
    check_memory_shapes(matrix, prev, x)?;
    if g.len() != matrix.rows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows(),
            actual: g.len(),
        });
    }
    let mut next = prev.clone();
    memory_step(matrix, &mut next, x)?;
    let mut deltas = MemoryDeltas {
        params: vec![T::zero(); matrix.params().len()],
        input: vec![T::zero(); matrix.cols()],
    };
    accumulate_memory_backward(
        matrix,
        &prev.cells,
        &next.cells,
        x,
        g,
        rate,
        &mut deltas.params,
        Some(&mut deltas.input),
    );
    Ok(deltas)
}

/// Memory layer with logistic units feeding a softmax over the ten digits.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceModel<T> {
    matrix: FunctionalMatrix<T>,
    grid: MemoryGrid<T>,
    bias: Vec<T>,
    output: OutputLayer<T>,
}

/// Intermediate values of one step, enough for its backward pass.
#[derive(Clone, Debug)]
struct StepCache<T> {
    input: Vec<T>,
    prev_cells: Vec<T>,
    hidden: Vec<T>,
    posteriors: Vec<T>,
}

impl<T: Scalar> SequenceModel<T> {
    pub fn new(matrix: FunctionalMatrix<T>, bias: Vec<T>, output: OutputLayer<T>) -> Result<Self> {
        let grid = MemoryGrid::new(matrix.rows(), matrix.cols());
        check_memory_shapes(&matrix, &grid, &[T::zero(); DIGITS])?;
        if bias.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: bias.len(),
            });
        }
        if output.inputs() != matrix.rows() || output.classes() != DIGITS {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: output.inputs(),
            });
        }
        Ok(Self {
            matrix,
            grid,
            bias,
            output,
        })
    }

    /// `hidden` memory units over one-hot digits, random parameters, zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Result<Self> {
        let matrix = FunctionalMatrix::init(FamilyId::Mem.spec(), hidden, DIGITS, rng)?;
        let output = OutputLayer::init(hidden, DIGITS, rng)?;
        Self::new(matrix, vec![T::zero(); hidden], output)
    }

    pub fn matrix(&self) -> &FunctionalMatrix<T> {
        &self.matrix
    }

    pub fn grid(&self) -> &MemoryGrid<T> {
        &self.grid
    }

    pub fn hidden_units(&self) -> usize {
        self.matrix.rows()
    }

    pub fn reset(&mut self) {
        self.grid.reset();
    }

    fn step(&mut self, digit: u8) -> Result<StepCache<T>> {
        let input = one_hot::<T>(usize::from(digit), DIGITS)?;
        let prev_cells = self.grid.cells.clone();
        let mut hidden = memory_step(&self.matrix, &mut self.grid, &input)?;
        for (h, &b) in hidden.iter_mut().zip(&self.bias) {
            *h = logistic(*h + b);
        }
        let logits = self.output.logits(&hidden)?;
        let posteriors = softmax(&logits)?;
        Ok(StepCache {
            input,
            prev_cells,
            hidden,
            posteriors,
        })
    }

    /// Posteriors for the next digit after feeding `digit`; advances the cells.
    pub fn predict_next(&mut self, digit: u8) -> Result<Vec<T>> {
        Ok(self.step(digit)?.posteriors)
    }

    /// One online update toward `target` after feeding `digit`.
    /// Returns the step's cross-entropy and whether the prediction was right.
    pub fn train_pair(&mut self, digit: u8, target: u8, rate: T) -> Result<(T, bool)> {
        let target = usize::from(target);
        if target >= DIGITS {
            return Err(Error::ClassOutOfRange {
                class: target,
                classes: DIGITS,
            });
        }
        let cache = self.step(digit)?;
        let correct = argmax(&cache.posteriors) == target;
        let loss = -cache.posteriors[target].ln();

        let mut delta: Vec<T> = cache.posteriors.iter().map(|&p| -p).collect();
        delta[target] += T::one();
        let mut out_acc = OutputDeltas::zeros_for(&self.output);
        let mut upstream = vec![T::zero(); self.hidden_units()];
        self.output
            .accumulate_backward(&cache.hidden, &delta, rate, &mut out_acc, Some(&mut upstream));

        let g: Vec<T> = upstream
            .iter()
            .zip(&cache.hidden)
            .map(|(&d, &y)| d * y * (T::one() - y))
            .collect();
        for (b, &gi) in self.bias.iter_mut().zip(&g) {
            *b += rate * gi;
        }
        let mut acc = vec![T::zero(); self.matrix.params().len()];
        accumulate_memory_backward(
            &self.matrix,
            &cache.prev_cells,
            &self.grid.cells,
            &cache.input,
            &g,
            rate,
            &mut acc,
            None,
        );
        for (p, &d) in self.matrix.params_mut().iter_mut().zip(&acc) {
            *p += d;
        }
        self.output.apply_deltas(&out_acc)?;
        Ok((loss, correct))
    }

    /// Frozen pass over the first `d` pairs from reset cells; returns the
    /// next-digit accuracy in percent.
    pub fn sequence_accuracy(&mut self, seq: &DigitSequence, d: usize) -> Result<f64> {
        let digits = pairs_prefix(seq, d)?;
        self.reset();
        let mut correct = 0usize;
        for w in digits.windows(2) {
            correct += usize::from(argmax(&self.predict_next(w[0])?) == usize::from(w[1]));
        }
        Ok(100.0 * correct as f64 / d as f64)
    }

    /// Mean cross-entropy of a frozen pass over the first `d` pairs.
    pub fn sequence_loss(&mut self, seq: &DigitSequence, d: usize) -> Result<f64> {
        let digits = pairs_prefix(seq, d)?;
        self.reset();
        let mut total = 0.0;
        for w in digits.windows(2) {
            let cache = self.step(w[0])?;
            let logits = self.output.logits(&cache.hidden)?;
            total += cross_entropy(&logits, usize::from(w[1])).to_f64_lossy();
        }
        Ok(total / d as f64)
    }
}

fn pairs_prefix(seq: &DigitSequence, d: usize) -> Result<&[u8]> {
    if d == 0 {
        return Err(Error::Empty("training pairs"));
    }
    if seq.len() < d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            actual: seq.len(),
        });
    }
    Ok(&seq.digits()[..=d])
}

/// Per-epoch next-digit accuracy (percent) of a sequence run.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningCurve {
    pub hidden: usize,
    pub pairs: usize,
    pub accuracy: Vec<f64>,
}

impl LearningCurve {
    /// Legend tag `"{hidden}H-{pairs}D"`.
    pub fn tag(&self) -> String {
        format!("{}H-{}D", self.hidden, self.pairs)
    }

    /// First epoch (counting from 1) whose accuracy is at least `threshold`.
    pub fn first_epoch_at(&self, threshold: f64) -> Option<usize> {
        self.accuracy.iter().position(|&a| a >= threshold).map(|i| i + 1)
    }

    pub fn max_accuracy(&self) -> f64 {
        self.accuracy.iter().copied().fold(0.0, f64::max)
    }
}

/// Trains on the pairs `(s_t, s_{t+1})`, `t < d`, for `epochs` epochs at a
/// constant rate, updating after every pair. Cells are reset before each
/// epoch; accuracy is measured by a frozen pass after each epoch.
pub fn train_sequence<T: Scalar>(
    model: &mut SequenceModel<T>,
    seq: &DigitSequence,
    d: usize,
    epochs: usize,
    rate: T,
) -> Result<LearningCurve> {
    train_sequence_with(model, seq, d, epochs, rate, |_, _| {})
}

/// [`train_sequence`] calling `on_epoch(epoch, accuracy)` after each epoch.
pub fn train_sequence_with<T: Scalar, F: FnMut(usize, f64)>(
    model: &mut SequenceModel<T>,
    seq: &DigitSequence,
    d: usize,
    epochs: usize,
    rate: T,
    mut on_epoch: F,
) -> Result<LearningCurve> {
    let digits = pairs_prefix(seq, d)?;
    let mut curve = LearningCurve {
        hidden: model.hidden_units(),
        pairs: d,
        accuracy: Vec::with_capacity(epochs),
    };
    for epoch in 1..=epochs {
        model.reset();
        for w in digits.windows(2) {
            model.train_pair(w[0], w[1], rate)?;
        }
        let acc = model.sequence_accuracy(seq, d)?;
        curve.accuracy.push(acc);
        on_epoch(epoch, acc);
    }
    model.reset();
    Ok(curve)
}
