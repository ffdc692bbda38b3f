//! Weight initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// He-uniform initialization: entries i.i.d. uniform on ±sqrt(6 / fanIn).
pub fn he_uniform_init(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    assert!(fan_in >= 1, "fan-in must be at least 1");
    let bound = (6.0 / fan_in as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| rng.random::<f64>() * 2.0 * bound - bound)
        .collect();
    Tensor::from_vec(shape, data)
}
