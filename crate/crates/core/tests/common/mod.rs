//! Finite-difference gradient check on a tiny model that exercises every
//! layer type.

use rand::Rng;
use uritwin::neural::{Activation, ConvSpec, Model, ModelConfig, Tensor};
use uritwin::seed;

const H: f64 = 1e-5;
/// Gradients below this magnitude are compared in absolute terms.
const FLOOR: f64 = 1e-6;

pub fn tiny(activation: Activation) -> ModelConfig {
    ModelConfig {
        input_len: 32,
        conv: vec![
            ConvSpec {
                out_channels: 3,
                kernel: 5,
                stride: 2,
            },
            ConvSpec {
                out_channels: 4,
                kernel: 3,
                stride: 1,
            },
        ],
        activation,
        pool: 2,
        lstm_hidden: 5,
        dense: vec![6],
        init_seed: 11,
        ..Default::default()
    }
}

pub fn batch(n: usize) -> Tensor {
    let mut rng = seed::rng(99);
    let items: Vec<Tensor> = (0..n)
        .map(|_| Tensor::new(vec![2, 32], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    Tensor::stack(&items).unwrap()
}

/// Scales up the output layer so its gradients are not vanishingly small.
pub fn randomized(cfg: ModelConfig) -> Model {
    let mut m = Model::new(cfg).unwrap();
    for t in m.params.dense.last_mut().unwrap().weight.data_mut() {
        *t *= 10.0;
    }
    let mut rng = seed::rng(5);
    for b in m.params.lstm.bias.data_mut() {
        *b += rng.random_range(-0.3..0.3);
    }
    m
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter.
pub fn max_relative_error(model: &Model) -> (f64, String) {
    let x = batch(3);
    let labels = [0, 3, 4];
    let (_, grads) = model.loss_and_gradients(&x, &labels).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.named().into_iter().map(|(n, t)| (n, t.data().to_vec())).collect();
    let mut worst = (0.0, String::new());
    let mut probe = model.clone();
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for (k, &ak) in a.iter().enumerate() {
            let orig = probe.params.tensors_mut()[ti].data()[k];
            probe.params.tensors_mut()[ti].data_mut()[k] = orig + H;
            let up = probe.loss(&x, &labels).unwrap();
            probe.params.tensors_mut()[ti].data_mut()[k] = orig - H;
            let down = probe.loss(&x, &labels).unwrap();
            probe.params.tensors_mut()[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            let err = (ak - numeric).abs() / ak.abs().max(numeric.abs()).max(FLOOR);
            if err > worst.0 {
                worst = (err, format!("{name}[{k}] analytic={} numeric={numeric}", ak));
            }
        }
    }
    worst
}
