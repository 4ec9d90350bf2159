//! Central-difference gradient oracle.
//!
//! Analytic derivatives are compared with `(f(x + h) − f(x − h)) / 2h` using
//! the relative error `|a − n| / max(|a|, |n|, 1e-8)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::families::{self, EdgeParams, FamilyId, FunctionalMatrix, Sign, MAX_ARITY};
use crate::memory::{memory_backward_step, memory_function, MemoryGrid};
use crate::network::{Activation, LayerSpec, Network};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Draws whose rectifier argument lies within this distance of zero are skipped.
pub const KINK_RADIUS: f64 = 1e-3;
/// Denominator floor of [`relative_error`].
pub const ERROR_FLOOR: f64 = 1e-8;

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> Result<f64> {
    let hi = f(x + h);
    let lo = f(x - h);
    if !(hi.is_finite() && lo.is_finite()) {
        return Err(Error::NonFinite("finite-difference evaluation"));
    }
    Ok((hi - lo) / (2.0 * h))
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

/// Worst relative errors of one family over a batch of random draws.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyReport {
    pub family: FamilyId,
    pub trials: usize,
    /// Draws skipped for lying next to a rectifier kink.
    pub kink_skipped: usize,
    pub max_dx_error: f64,
    /// Per parameter slot; `None` for a slot checked exactly instead.
    pub max_dparam_error: Vec<Option<f64>>,
    /// Problems that are not tolerance comparisons.
    pub failures: Vec<String>,
}

impl FamilyReport {
    pub fn worst(&self) -> f64 {
        self.max_dparam_error
            .iter()
            .flatten()
            .copied()
            .fold(self.max_dx_error, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.failures.is_empty() && self.worst() <= tolerance
    }
}

impl fmt::Display for FamilyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<4} d/dx {:.2e}", self.family.name(), self.max_dx_error)?;
        for (k, e) in self.max_dparam_error.iter().enumerate() {
            match e {
                Some(e) => write!(f, "  d/dp{} {:.2e}", k + 1, e)?,
                None => write!(f, "  d/dp{} exact", k + 1)?,
            }
        }
        write!(f, "  ({} trials, {} near kink)", self.trials, self.kink_skipped)
    }
}

fn draw_params<R: Rng>(id: FamilyId, rng: &mut R) -> [f64; MAX_ARITY] {
    let mut p = [0.0; MAX_ARITY];
    for (k, v) in p.iter_mut().enumerate().take(id.param_arity()) {
        let (lo, hi) = id.init_range(k);
        *v = rng.gen_range(lo..=hi);
    }
    p
}

/// Checks `d_dx` and `d_dparam` of a family on `trials` seeded draws of
/// parameters (from the family's initialisation ranges), sign and input
/// `x ∈ [−1, 1]`. F07's parameter slot is compared exactly against `u·x`.
/// MEM is checked through its backward step with a fixed previous cell.
pub fn check_family(id: FamilyId, trials: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arity = id.param_arity();
    let mut report = FamilyReport {
        family: id,
        trials,
        kink_skipped: 0,
        max_dx_error: 0.0,
        max_dparam_error: (0..arity)
            .map(|k| if id == FamilyId::F07 && k == 0 { None } else { Some(0.0) })
            .collect(),
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let p = draw_params(id, &mut rng);
        let sign = id.has_sign_constant().then(|| Sign::random(&mut rng));
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let c_prev: f64 = rng.gen_range(-1.0..1.0);
        if id
            .kink_argument(&p[..arity], x)
            .is_some_and(|z| z.abs() < KINK_RADIUS)
        {
            report.kink_skipped += 1;
            continue;
        }
        let outcome = if id == FamilyId::Mem {
            check_memory_draw(&p, x, c_prev, &mut report)
        } else {
            check_stateless_draw(id, &p[..arity], sign, x, &mut report)
        };
        if let Err(e) = outcome {
            report.failures.push(format!("trial {trial}: {e}"));
        }
    }
    report
}

fn check_stateless_draw(
    id: FamilyId,
    p: &[f64],
    sign: Option<Sign>,
    x: f64,
    report: &mut FamilyReport,
) -> Result<()> {
    let spec = id.spec();
    let edge = EdgeParams::new(spec, p, sign)?;
    let eval_at = |params: &[f64], x: f64| {
        EdgeParams::new(spec, params, sign)
            .and_then(|e| families::eval(spec, &e, x))
            .unwrap_or(f64::NAN)
    };

    let numeric = central_diff(|v| eval_at(p, v), x, STEP)?;
    let analytic = families::d_dx(spec, &edge, x)?;
    report.max_dx_error = report.max_dx_error.max(relative_error(analytic, numeric));

    for k in 0..p.len() {
        let analytic = families::d_dparam(spec, &edge, x, k)?;
        match report.max_dparam_error[k].as_mut() {
            None => {
                let expected = sign.map_or(1.0, |s| s.value::<f64>()) * x;
                if analytic != expected {
                    report
                        .failures
                        .push(format!("F07 dp{} = {analytic}, expected u*x = {expected}", k + 1));
                }
            }
            Some(worst) => {
                let numeric = central_diff(
                    |v| {
                        let mut q = p.to_vec();
                        q[k] = v;
                        eval_at(&q, x)
                    },
                    p[k],
                    STEP,
                )?;
                *worst = worst.max(relative_error(analytic, numeric));
            }
        }
    }
    Ok(())
}

fn check_memory_draw(p: &[f64; MAX_ARITY], x: f64, c_prev: f64, report: &mut FamilyReport) -> Result<()> {
    let matrix = FunctionalMatrix::from_parts(FamilyId::Mem.spec(), 1, 1, p.to_vec(), None)?;
    let grid = MemoryGrid::from_cells(1, 1, vec![c_prev], 1)?;
    let d = memory_backward_step(&matrix, &grid, &[x], &[1.0], 1.0)?;

    let numeric = central_diff(|v| memory_function(p, v, c_prev), x, STEP)?;
    report.max_dx_error = report.max_dx_error.max(relative_error(d.input[0], numeric));
    for k in 0..MAX_ARITY {
        let numeric = central_diff(
            |v| {
                let mut q = *p;
                q[k] = v;
                memory_function(&q, x, c_prev)
            },
            p[k],
            STEP,
        )?;
        if let Some(worst) = report.max_dparam_error[k].as_mut() {
            *worst = worst.max(relative_error(d.params[k], numeric));
        }
    }
    Ok(())
}

/// Every family, MEM and LIN, each with its own seed derived from `seed`.
pub fn gradient_suite(trials: usize, seed: u64) -> Vec<FamilyReport> {
    FamilyId::TABLE
        .iter()
        .chain(&[FamilyId::Mem, FamilyId::Lin])
        .enumerate()
        .map(|(i, &id)| check_family(id, trials, seed.wrapping_add(i as u64)))
        .collect()
}

/// End-to-end comparison of a network's loss gradient with finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkReport {
    pub parameters: usize,
    pub max_error: f64,
    /// Flat index of the parameter with the largest error.
    pub worst_parameter: usize,
}

impl NetworkReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_error <= tolerance
    }
}

/// Mutable reference to the `idx`-th trainable scalar, in the order: each
/// hidden layer's edge parameters then biases, then output weights and biases.
fn param_slot(net: &mut Network<f64>, mut idx: usize) -> &mut f64 {
    let mut target = None;
    for (l, layer) in net.hidden().iter().enumerate() {
        let (n_params, n_bias) = (layer.matrix().params().len(), layer.bias().len());
        if idx < n_params + n_bias {
            target = Some((l, idx));
            break;
        }
        idx -= n_params + n_bias;
    }
    match target {
        Some((l, idx)) => {
            let (params, bias) = net.hidden_mut()[l].params_mut();
            let n = params.len();
            if idx < n {
                &mut params[idx]
            } else {
                &mut bias[idx - n]
            }
        }
        None => {
            let (weights, bias) = net.output_mut().params_mut();
            let n = weights.len();
            if idx < n {
                &mut weights[idx]
            } else {
                &mut bias[idx - n]
            }
        }
    }
}

/// Compares the back-propagated gradient of the cross-entropy of `(x, label)`
/// with central differences, for every trainable parameter of `net`.
pub fn check_network(net: &Network<f64>, x: &[f64], label: usize) -> Result<NetworkReport> {
    let pass = net.forward(x)?;
    // ascent deltas at rate 1 are the negative loss gradient
    let deltas = net.backward(&pass, label, 1.0)?;
    let analytic: Vec<f64> = deltas
        .hidden
        .iter()
        .flat_map(|d| d.params.iter().chain(&d.bias))
        .chain(deltas.output.weights.iter().chain(&deltas.output.bias))
        .map(|&v| -v)
        .collect();
    debug_assert_eq!(analytic.len(), net.param_count());

    let mut probe = net.clone();
    let mut report = NetworkReport {
        parameters: analytic.len(),
        max_error: 0.0,
        worst_parameter: 0,
    };
    for (idx, &a) in analytic.iter().enumerate() {
        let original = *param_slot(&mut probe, idx);
        let numeric = central_diff(
            |v| {
                *param_slot(&mut probe, idx) = v;
                probe.forward(x).map_or(f64::NAN, |p| p.cross_entropy(label))
            },
            original,
            STEP,
        )?;
        *param_slot(&mut probe, idx) = original;
        let err = relative_error(a, numeric);
        if err > report.max_error {
            report.max_error = err;
            report.worst_parameter = idx;
        }
    }
    Ok(report)
}

/// Seeded 4-2-3 network with an F03/tanh hidden layer. Hidden biases are
/// drawn from `[−0.5, 0.5]` so no unit sits at its symmetric point.
pub fn reference_network(seed: u64) -> Result<Network<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = LayerSpec::new(FamilyId::F03, 2, Activation::Tanh);
    let mut net = Network::init(&[spec], 4, 3, &mut rng)?;
    for b in net.hidden_mut()[0].params_mut().1 {
        *b = rng.gen_range(-0.5..=0.5);
    }
    Ok(net)
}
