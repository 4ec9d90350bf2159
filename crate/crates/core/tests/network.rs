use ftnn::data::Dataset;
use ftnn::network::{softmax, LayerSpec};
use ftnn::training::{evaluate, layerwise_train, rng_stream, TrainingConfig};
use ftnn::{Activation, FamilyId, Network, Scalar};
use proptest::prelude::*;
use rand::Rng;

/// Two Gaussian-ish blobs in the unit square, label 1 above the diagonal.
fn blobs<T: Scalar>(n: usize, seed: u64) -> Dataset<T> {
    let mut rng = rng_stream(seed, 9);
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        if (a - b).abs() < 0.1 {
            continue;
        }
        inputs.extend([T::lit(a), T::lit(b)]);
        labels.push(usize::from(b > a));
    }
    Dataset::new(2, 2, inputs, labels).unwrap()
}

fn short_config() -> TrainingConfig {
    TrainingConfig {
        lwt_epochs: 10,
        ..TrainingConfig::default()
    }
}

#[test]
fn separable_blobs_are_learned_in_f64_and_f32() {
    let spec = [LayerSpec::new(FamilyId::F03, 8, Activation::Tanh)];
    let (net, report) = layerwise_train(&spec, &blobs::<f64>(400, 1), &short_config()).unwrap();
    assert!(report.status.is_ok());
    assert!(evaluate(&net, &blobs::<f64>(200, 2)).unwrap().accuracy > 95.0);

    let (net, report) = layerwise_train(&spec, &blobs::<f32>(400, 1), &short_config()).unwrap();
    assert!(report.status.is_ok());
    assert!(evaluate(&net, &blobs::<f32>(200, 2)).unwrap().accuracy > 95.0);
}

#[test]
fn layerwise_training_is_reproducible() {
    let spec = [
        LayerSpec::new(FamilyId::F06, 6, Activation::Logistic),
        LayerSpec::new(FamilyId::F15, 4, Activation::Relu),
    ];
    let data = blobs::<f64>(100, 4);
    let a = layerwise_train(&spec, &data, &short_config()).unwrap();
    let b = layerwise_train(&spec, &data, &short_config()).unwrap();
    assert_eq!(a, b);
    let c = layerwise_train(&spec, &data, &TrainingConfig { seed: 1, ..short_config() }).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn small_step_lowers_sample_loss() {
    let spec = [LayerSpec::new(FamilyId::F03, 5, Activation::Logistic)];
    let mut net: Network<f64> = Network::init(&spec, 3, 4, &mut rng_stream(3, 0)).unwrap();
    let x = [0.3, 0.9, 0.1];
    let before = net.forward(&x).unwrap().cross_entropy(2);
    let deltas = net.backward(&net.forward(&x).unwrap(), 2, 1e-3).unwrap();
    net.apply_deltas(&deltas).unwrap();
    assert!(net.forward(&x).unwrap().cross_entropy(2) < before);
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&logits).unwrap();
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posteriors_are_distributions_for_every_family(
        family in prop::sample::select(FamilyId::TABLE.to_vec()),
        seed in any::<u64>(),
        x in prop::collection::vec(0.0f64..1.0, 6),
    ) {
        let spec = [LayerSpec::new(family, 4, Activation::Logistic)];
        let net: Network<f64> = Network::init(&spec, 6, 3, &mut rng_stream(seed, 0)).unwrap();
        let p = net.posteriors(&x).unwrap();
        prop_assert_eq!(p.len(), 3);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(net.predict(&x).unwrap() < 3);
    }
}
