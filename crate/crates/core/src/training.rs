//! Minibatch SGD, layer-wise training and Newbob fine-tuning.
//!
//! A run that produces a non-finite loss, posterior or parameter is not an
//! error: it ends with [`RunStatus::Failed`] and keeps the epochs recorded so
//! far. Structural problems (shape mismatches, bad labels) are errors.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{HiddenLayer, LayerSpec, Network, NetworkDeltas, OutputLayer};
use crate::scalar::Scalar;

/// Independent RNG streams derived from one seed.
const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const FINE_TUNE_STREAM: u64 = 2;

/// Deterministic ChaCha stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingConfig {
    /// Learning-rate exponent: layer-wise rate `2^γ`, fine-tune start `2^(γ−4)`.
    pub gamma: i32,
    pub lwt_epochs: usize,
    pub ft_max_epochs: usize,
    pub batch_size: usize,
    pub newbob_threshold: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            gamma: 0,
            lwt_epochs: 15,
            ft_max_epochs: 15,
            batch_size: 16,
            newbob_threshold: 1e-4,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub const GAMMAS: [i32; 6] = [0, -1, -2, -3, -4, -5];

    pub fn with_gamma(gamma: i32) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-5..=0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in -5..=0, got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.newbob_threshold.is_finite() && self.newbob_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "newbob_threshold must be finite and non-negative, got {}",
                self.newbob_threshold
            )));
        }
        Ok(())
    }

    pub fn lwt_rate(&self) -> f64 {
        2f64.powi(self.gamma)
    }

    pub fn ft_initial_rate(&self) -> f64 {
        2f64.powi(self.gamma - 4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Layer-wise stage, counting hidden layers from 1.
    Layerwise(usize),
    FineTune,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Layerwise(k) => write!(f, "lwt{k}"),
            Phase::FineTune => f.write_str("ft"),
        }
    }
}

/// Loss is mean cross-entropy in nats; accuracy is a percentage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub phase: Phase,
    pub learning_rate: f64,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Failed(_) => f.write_str("failed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub status: RunStatus,
}

impl Default for TrainReport {
    fn default() -> Self {
        Self {
            epochs: Vec::new(),
            status: RunStatus::Ok,
        }
    }
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Appends `other`; a failure in either side is kept.
    pub fn extend(&mut self, other: TrainReport) {
        self.epochs.extend(other.epochs);
        if self.status.is_ok() {
            self.status = other.status;
        }
    }

    fn fail(&mut self, err: &Error) {
        self.status = RunStatus::Failed(err.to_string());
    }
}

/// Mean cross-entropy and accuracy (percent) over a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Frozen forward pass over `data`. Non-finite activations are errors.
pub fn evaluate<T: Scalar>(net: &Network<T>, data: &Dataset<T>) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, label) in data.iter() {
        let pass = net.forward(x)?;
        loss += pass.cross_entropy(label).to_f64_lossy();
        correct += usize::from(pass.predicted() == label);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: 100.0 * correct as f64 / n,
    })
}

/// One pass over a seeded shuffle of `data` in minibatches of `batch_size`.
///
/// Deltas of a batch are averaged and committed once at the end of the batch.
/// The returned loss and accuracy are running figures over the pass, each
/// sample scored before its batch is committed.
pub fn sgd_epoch<T: Scalar, R: Rng + ?Sized>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    rate: T,
    batch_size: usize,
    rng: &mut R,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);

    let mut acc = NetworkDeltas::zeros_like(net);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for batch in order.chunks(batch_size) {
        acc.clear();
        let scale = rate / T::lit(batch.len() as f64);
        let mut passes = Vec::with_capacity(batch.len());
        let labels: Vec<usize> = batch.iter().map(|&i| data.label(i)).collect();
        for (&i, &label) in batch.iter().zip(&labels) {
            let pass = net.forward(data.input(i))?;
            let l = pass.cross_entropy(label).to_f64_lossy();
            if !l.is_finite() {
                return Err(Error::NonFinite("loss"));
            }
            loss += l;
            correct += usize::from(pass.predicted() == label);
            passes.push(pass);
        }
        net.accumulate_batch(&passes, &labels, scale, &mut acc)?;
        if !acc.is_finite() {
            return Err(Error::NonFinite("parameter deltas"));
        }
        net.apply_deltas(&acc)?;
        if !net.params_finite() {
            return Err(Error::NonFinite("parameters"));
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: 100.0 * correct as f64 / n,
    })
}

/// Runs `epochs` SGD epochs at a fixed rate, recording running metrics.
fn constant_rate_epochs<T: Scalar, R: Rng + ?Sized>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    config: &TrainingConfig,
    phase: Phase,
    rng: &mut R,
    report: &mut TrainReport,
) -> Result<()> {
    let rate = config.lwt_rate();
    for _ in 0..config.lwt_epochs {
        match sgd_epoch(net, data, T::lit(rate), config.batch_size, rng) {
            Ok(e) => report.epochs.push(EpochRecord {
                phase,
                learning_rate: rate,
                loss: e.loss,
                accuracy: e.accuracy,
            }),
            Err(err) if err.is_divergence() => {
                report.fail(&err);
                return Ok(());
            }
            Err(err) => return Err(err),
        }
    }
    Ok(())
}

/// Trains a one-hidden-layer network directly for `lwt_epochs` at `2^γ`.
pub fn train_single_hidden<T: Scalar>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    config: &TrainingConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if net.hidden().len() != 1 {
        return Err(Error::Config(format!(
            "expected exactly one hidden layer, got {}",
            net.hidden().len()
        )));
    }
    let mut rng = rng_stream(config.seed, SHUFFLE_STREAM);
    let mut report = TrainReport::default();
    constant_rate_epochs(net, data, config, Phase::Layerwise(1), &mut rng, &mut report)?;
    Ok(report)
}

/// Greedy layer-wise trainer. Each stage puts a new hidden layer and a fresh
/// softmax head on top of the frozen layers below and trains only those two.
///
/// Frozen layers never change, so each stage trains on their cached outputs.
pub struct LayerwiseTrainer<'a, T> {
    data: &'a Dataset<T>,
    config: TrainingConfig,
    init_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    stack: Vec<HiddenLayer<T>>,
    head: Option<OutputLayer<T>>,
    features: Option<Dataset<T>>,
    report: TrainReport,
}

impl<'a, T: Scalar> LayerwiseTrainer<'a, T> {
    pub fn new(data: &'a Dataset<T>, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        Ok(Self {
            data,
            config,
            init_rng: rng_stream(config.seed, INIT_STREAM),
            shuffle_rng: rng_stream(config.seed, SHUFFLE_STREAM),
            stack: Vec::new(),
            head: None,
            features: None,
            report: TrainReport::default(),
        })
    }

    pub fn stack(&self) -> &[HiddenLayer<T>] {
        &self.stack
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    /// Adds and trains one hidden layer. Does nothing once the run has failed.
    pub fn push_stage(&mut self, spec: &LayerSpec) -> Result<()> {
        if !self.report.status.is_ok() {
            return Ok(());
        }
        let inputs = self.data_for_stage().dim();
        let hidden = HiddenLayer::init(spec.family, inputs, spec.width, spec.activation, &mut self.init_rng)?;
        let head = OutputLayer::init(spec.width, self.data.classes(), &mut self.init_rng)?;
        let mut stage_net = Network::new(vec![hidden], head)?;

        let phase = Phase::Layerwise(self.stack.len() + 1);
        let data = self.features.as_ref().unwrap_or(self.data);
        constant_rate_epochs(
            &mut stage_net,
            data,
            &self.config,
            phase,
            &mut self.shuffle_rng,
            &mut self.report,
        )?;

        let (mut hidden, head) = stage_net.into_parts();
        let layer = hidden.pop().expect("stage network has one hidden layer");
        if self.report.status.is_ok() {
            let data = self.features.as_ref().unwrap_or(self.data);
            match data.map_inputs(layer.outputs(), |x| Ok(layer.forward(x)?.output)) {
                Ok(next) => self.features = Some(next),
                Err(err) if err.is_divergence() => self.report.fail(&err),
                Err(err) => return Err(err),
            }
        }
        self.stack.push(layer);
        self.head = Some(head);
        Ok(())
    }

    fn data_for_stage(&self) -> &Dataset<T> {
        self.features.as_ref().unwrap_or(self.data)
    }

    /// The full network, using the last stage's softmax head as output layer.
    pub fn finish(self) -> Result<(Network<T>, TrainReport)> {
        let head = self.head.ok_or(Error::Empty("layer specs"))?;
        Ok((Network::new(self.stack, head)?, self.report))
    }
}

/// Layer-wise training of `specs` in order; returns the assembled network.
pub fn layerwise_train<T: Scalar>(
    specs: &[LayerSpec],
    data: &Dataset<T>,
    config: &TrainingConfig,
) -> Result<(Network<T>, TrainReport)> {
    if specs.is_empty() {
        return Err(Error::Empty("layer specs"));
    }
    let mut trainer = LayerwiseTrainer::new(data, *config)?;
    for spec in specs {
        trainer.push_stage(spec)?;
    }
    trainer.finish()
}

/// Newbob rate schedule: halve when an epoch improves the loss by less than
/// the threshold, stop when it makes the loss worse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Newbob {
    rate: f64,
    threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NewbobStep {
    Continue,
    Halved,
    Stop,
}

impl Newbob {
    pub fn new(rate: f64, threshold: f64) -> Self {
        Self { rate, threshold }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `improvement` is previous epoch loss minus current epoch loss.
    pub fn observe(&mut self, improvement: f64) -> NewbobStep {
        if improvement < 0.0 {
            NewbobStep::Stop
        } else if improvement < self.threshold {
            self.rate *= 0.5;
            NewbobStep::Halved
        } else {
            NewbobStep::Continue
        }
    }
}

/// Whole-network SGD under the Newbob schedule, starting at `2^(γ−4)`.
///
/// Improvement is measured with a frozen evaluation of the training set after
/// each epoch, against the same measurement taken before the first epoch.
pub fn fine_tune<T: Scalar>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    config: &TrainingConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let mut report = TrainReport::default();
    let mut prev = match evaluate(net, data) {
        Ok(e) => e.loss,
        Err(err) if err.is_divergence() => {
            report.fail(&err);
            return Ok(report);
        }
        Err(err) => return Err(err),
    };
    let mut rng = rng_stream(config.seed, FINE_TUNE_STREAM);
    let mut schedule = Newbob::new(config.ft_initial_rate(), config.newbob_threshold);
    for _ in 0..config.ft_max_epochs {
        let rate = schedule.rate();
        let eval = sgd_epoch(net, data, T::lit(rate), config.batch_size, &mut rng).and_then(|_| evaluate(net, data));
        let eval = match eval {
            Ok(e) => e,
            Err(err) if err.is_divergence() => {
                report.fail(&err);
                return Ok(report);
            }
            Err(err) => return Err(err),
        };
        report.epochs.push(EpochRecord {
            phase: Phase::FineTune,
            learning_rate: rate,
            loss: eval.loss,
            accuracy: eval.accuracy,
        });
        let improvement = prev - eval.loss;
        prev = eval.loss;
        if schedule.observe(improvement) == NewbobStep::Stop {
            break;
        }
    }
    Ok(report)
}
