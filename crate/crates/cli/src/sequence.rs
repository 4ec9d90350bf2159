//! Next-digit memorisation runs, one per (hidden units, pairs) combination.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ftnn::data::{load_digit_sequence, DigitSequence};
use ftnn::memory::{train_sequence_with, LearningCurve};
use ftnn::training::rng_stream;
use ftnn::{Error, Result, SequenceModel64};

use crate::config::Config;

pub const KEYS: &[&str] = &["hidden", "pairs", "epochs", "rate_exponent", "seed", "digits"];

pub const CSV_HEADER: &str = "model,epoch,accuracy";

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryExperiment {
    pub hidden: Vec<usize>,
    pub pairs: Vec<usize>,
    pub epochs: usize,
    /// Learning rate `2^rate_exponent`.
    pub rate_exponent: i32,
    pub seed: u64,
    pub digits: PathBuf,
}

impl MemoryExperiment {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.ensure_known(KEYS)?;
        let exp = Self {
            hidden: cfg.list("hidden", &[256])?,
            pairs: cfg.list("pairs", &[200])?,
            epochs: cfg.one("epochs", 5000)?,
            rate_exponent: cfg.one("rate_exponent", -4)?,
            seed: cfg.one("seed", 0)?,
            digits: cfg.one("digits", PathBuf::from("data/pi-digits.txt"))?,
        };
        if exp.hidden.contains(&0) || exp.pairs.contains(&0) {
            return Err(Error::Config("hidden and pairs must be positive".into()));
        }
        Ok(exp)
    }

    pub fn rate(&self) -> f64 {
        2f64.powi(self.rate_exponent)
    }

    /// `(hidden, pairs)` in config order.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        self.hidden
            .iter()
            .flat_map(|&h| self.pairs.iter().map(move |&d| (h, d)))
            .collect()
    }

    pub fn load_digits(&self) -> Result<DigitSequence> {
        let seq = load_digit_sequence(&self.digits)?;
        if let Some(&d) = self.pairs.iter().find(|&&d| seq.len() < d + 1) {
            return Err(Error::Config(format!(
                "pairs = {d} needs {} digits, {} has {}",
                d + 1,
                self.digits.display(),
                seq.len()
            )));
        }
        Ok(seq)
    }
}

/// One model trained for the configured epochs. The model's parameters are
/// drawn from the experiment seed, independent of `pairs`.
pub fn run_one(exp: &MemoryExperiment, seq: &DigitSequence, hidden: usize, pairs: usize) -> Result<LearningCurve> {
    let mut model = SequenceModel64::init(hidden, &mut rng_stream(exp.seed, 0))?;
    train_sequence_with(&mut model, seq, pairs, exp.epochs, exp.rate(), |_, _| {})
}

pub fn run_memory_experiment<F>(
    exp: &MemoryExperiment,
    seq: &DigitSequence,
    threads: usize,
    on_done: F,
) -> Result<Vec<LearningCurve>>
where
    F: Fn(&LearningCurve) + Sync,
{
    let runs = exp.runs();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<LearningCurve>>>> = Mutex::new(runs.iter().map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, runs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(h, d)) = runs.get(i) else { break };
                let curve = run_one(exp, seq, h, d);
                if let Ok(c) = &curve {
                    on_done(c);
                }
                slots.lock().expect("result slots")[i] = Some(curve);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|c| c.expect("every run finished"))
        .collect()
}

pub fn to_csv(curves: &[LearningCurve]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in curves {
        let tag = c.tag();
        for (epoch, acc) in c.accuracy.iter().enumerate() {
            writeln!(out, "{tag},{},{acc:.2}", epoch + 1).expect("writing to a String");
        }
    }
    out
}
