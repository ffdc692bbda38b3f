//! Inverted dropout: evaluation needs no rescaling because survivors are
//! scaled up during training.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Apply dropout. Train mode zeros each entry independently with
/// probability `rate` and scales survivors by 1/(1-rate); eval mode is the
/// identity. Returns the output and the multiplicative mask the backward
/// pass needs (all-ones in eval mode).
pub fn dropout_forward(
    x: &Tensor,
    rate: f64,
    mode: DropoutMode,
    rng: &mut ChaCha8Rng,
) -> (Tensor, Tensor) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == DropoutMode::Eval || rate == 0.0 {
        return (x.clone(), Tensor::from_vec(x.shape(), vec![1.0; x.len()]));
    }
    let scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
        .collect();
    let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    (Tensor::from_vec(x.shape(), y), Tensor::from_vec(x.shape(), mask))
}

/// dx = dy * mask, with the same mask the forward pass drew.
pub fn dropout_backward(dy: &Tensor, mask: &Tensor) -> Tensor {
    assert_eq!(dy.shape(), mask.shape());
    Tensor::from_vec(
        dy.shape(),
        dy.iter().zip(mask.iter()).map(|(d, m)| d * m).collect(),
    )
}
