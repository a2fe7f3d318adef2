mod common;

use common::{batch, max_relative_error, randomized, tiny};
use uritwin::neural::Activation;

#[test]
fn tanh_model_gradients_match_finite_differences() {
    let (err, at) = max_relative_error(&randomized(tiny(Activation::Tanh)));
    assert!(err < 1e-4, "max relative error {err:e} at {at}");
}

#[test]
fn relu_model_gradients_match_finite_differences() {
    let (err, at) = max_relative_error(&randomized(tiny(Activation::Relu)));
    assert!(err < 1e-4, "max relative error {err:e} at {at}");
}

#[test]
fn every_layer_receives_gradient() {
    let m = randomized(tiny(Activation::Tanh));
    let (_, grads) = m.loss_and_gradients(&batch(3), &[0, 3, 4]).unwrap();
    for (name, t) in grads.named() {
        assert!(t.data().iter().any(|v| *v != 0.0), "{name} got no gradient");
    }
}
