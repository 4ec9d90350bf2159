//! MNIST sweep: one job per (family, activation, depth, γ).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ftnn::data::load_mnist_idx;
use ftnn::network::LayerSpec;
use ftnn::training::{evaluate, fine_tune, layerwise_train, RunStatus, TrainReport, TrainingConfig};
use ftnn::{Activation, Dataset64, FamilyId, Result};

use crate::config::Config;

pub const KEYS: &[&str] = &[
    "family",
    "activation",
    "hidden_layers",
    "hidden_width",
    "gammas",
    "seed",
    "lwt_epochs",
    "ft_max_epochs",
    "batch_size",
    "mnist_dir",
    "train_subset",
    "test_subset",
    "subset_seed",
];

pub const CSV_HEADER: &str = "experiment_id,family,activation,layers,gamma,lwt_acc,ft_acc,status,wall_seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct MnistExperiment {
    pub families: Vec<FamilyId>,
    pub activations: Vec<Activation>,
    pub layers: Vec<usize>,
    pub width: usize,
    pub gammas: Vec<i32>,
    pub seed: u64,
    pub lwt_epochs: usize,
    pub ft_max_epochs: usize,
    pub batch_size: usize,
    pub mnist_dir: PathBuf,
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub subset_seed: u64,
}

/// One cell of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub family: FamilyId,
    pub activation: Activation,
    pub layers: usize,
    pub gamma: i32,
}

impl Job {
    pub fn id(&self) -> String {
        format!("{}-{}-{}L-g{}", self.family, self.activation, self.layers, self.gamma)
    }
}

impl MnistExperiment {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.ensure_known(KEYS)?;
        let d = TrainingConfig::default();
        let exp = Self {
            families: cfg.list("family", &[FamilyId::F03])?,
            activations: cfg.list("activation", &[Activation::Logistic])?,
            layers: cfg.list("hidden_layers", &[1])?,
            width: cfg.one("hidden_width", 128)?,
            gammas: cfg.list("gammas", &TrainingConfig::GAMMAS)?,
            seed: cfg.one("seed", 0)?,
            lwt_epochs: cfg.one("lwt_epochs", d.lwt_epochs)?,
            ft_max_epochs: cfg.one("ft_max_epochs", d.ft_max_epochs)?,
            batch_size: cfg.one("batch_size", d.batch_size)?,
            mnist_dir: cfg.one("mnist_dir", PathBuf::from("data/mnist"))?,
            train_subset: cfg.optional("train_subset")?,
            test_subset: cfg.optional("test_subset")?,
            subset_seed: cfg.one("subset_seed", 0)?,
        };
        exp.validate()?;
        Ok(exp)
    }

    fn validate(&self) -> Result<()> {
        if let Some(f) = self.families.iter().find(|f| **f == FamilyId::Mem) {
            return Err(ftnn::Error::StatefulFamily(*f));
        }
        if self.width == 0 || self.layers.contains(&0) {
            return Err(ftnn::Error::Config("hidden_width and hidden_layers must be positive".into()));
        }
        for &gamma in &self.gammas {
            self.training_config(gamma).validate()?;
        }
        Ok(())
    }

    pub fn training_config(&self, gamma: i32) -> TrainingConfig {
        TrainingConfig {
            gamma,
            lwt_epochs: self.lwt_epochs,
            ft_max_epochs: self.ft_max_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            ..TrainingConfig::default()
        }
    }

    /// Sweep cells in config order: family, activation, depth, then γ.
    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for &family in &self.families {
            for &activation in &self.activations {
                for &layers in &self.layers {
                    for &gamma in &self.gammas {
                        jobs.push(Job {
                            family,
                            activation,
                            layers,
                            gamma,
                        });
                    }
                }
            }
        }
        jobs
    }

    /// Train and test sets, subset as configured.
    pub fn load_data(&self) -> Result<(Dataset64, Dataset64)> {
        let (train, test) = load_mnist(&self.mnist_dir)?;
        let train = match self.train_subset {
            Some(k) => train.subset(k, self.subset_seed),
            None => train,
        };
        let test = match self.test_subset {
            Some(k) => test.subset(k, self.subset_seed),
            None => test,
        };
        Ok((train, test))
    }
}

/// The standard four IDX files in `dir`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset64, Dataset64)> {
    let train = load_mnist_idx(dir.join("train-images.idx3-ubyte"), dir.join("train-labels.idx1-ubyte"))?;
    let test = load_mnist_idx(dir.join("t10k-images.idx3-ubyte"), dir.join("t10k-labels.idx1-ubyte"))?;
    Ok((train, test))
}

/// Result of one sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct JobOutcome {
    pub job: Job,
    /// Test accuracy after layer-wise training, percent.
    pub lwt_acc: Option<f64>,
    /// Test accuracy after fine-tuning, percent.
    pub ft_acc: Option<f64>,
    pub status: RunStatus,
    pub lwt_report: TrainReport,
    pub ft_report: Option<TrainReport>,
    pub wall_seconds: f64,
}

fn test_accuracy(net: &ftnn::Network64, test: &Dataset64, status: &mut RunStatus) -> Result<Option<f64>> {
    if !status.is_ok() {
        return Ok(None);
    }
    match evaluate(net, test) {
        Ok(e) => Ok(Some(e.accuracy)),
        Err(e) if e.is_divergence() => {
            *status = RunStatus::Failed(e.to_string());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Layer-wise training, test evaluation, fine-tuning, test evaluation.
pub fn run_job(exp: &MnistExperiment, job: Job, train: &Dataset64, test: &Dataset64) -> Result<JobOutcome> {
    let start = Instant::now();
    let config = exp.training_config(job.gamma);
    let specs = vec![LayerSpec::new(job.family, exp.width, job.activation); job.layers];
    let (mut net, lwt_report) = layerwise_train(&specs, train, &config)?;
    let mut status = lwt_report.status.clone();
    let lwt_acc = test_accuracy(&net, test, &mut status)?;
    let mut ft_report = None;
    let mut ft_acc = None;
    if status.is_ok() {
        let report = fine_tune(&mut net, train, &config)?;
        status = report.status.clone();
        ft_report = Some(report);
        ft_acc = test_accuracy(&net, test, &mut status)?;
    }
    Ok(JobOutcome {
        job,
        lwt_acc,
        ft_acc,
        status,
        lwt_report,
        ft_report,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every job on up to `threads` worker threads. Outcomes come back in
/// job order; `on_done` sees them in completion order.
pub fn run_mnist_experiment<F>(
    exp: &MnistExperiment,
    train: &Dataset64,
    test: &Dataset64,
    threads: usize,
    on_done: F,
) -> Result<Vec<JobOutcome>>
where
    F: Fn(&JobOutcome) + Sync,
{
    let jobs = exp.jobs();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<JobOutcome>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&job) = jobs.get(i) else { break };
                let outcome = run_job(exp, job, train, test);
                if let Ok(o) = &outcome {
                    on_done(o);
                }
                slots.lock().expect("result slots")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect()
}

fn fmt_acc(acc: Option<f64>) -> String {
    acc.map_or_else(String::new, |a| format!("{a:.2}"))
}

/// CSV with header; `wall_seconds` is left empty unless `timing` is set so
/// that identical runs produce identical files.
pub fn to_csv(outcomes: &[JobOutcome], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for o in outcomes {
        let wall = if timing {
            format!("{:.1}", o.wall_seconds)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            o.job.id(),
            o.job.family,
            o.job.activation,
            o.job.layers,
            o.job.gamma,
            fmt_acc(o.lwt_acc),
            fmt_acc(o.ft_acc),
            o.status,
            wall
        )
        .expect("writing to a String");
    }
    out
}
