//! 2x2 max-pooling with stride 2. Odd spatial dims are padded with -inf,
//! so padding cells can never win a window.

use super::Tensor;

/// Pool a [channels, height, width] tensor down to halved (rounded up)
/// spatial dims. Returns the output and the flat input index of each
/// window's argmax (ties go to the first cell in row-major order), which
/// the backward pass routes gradients through.
pub fn maxpool2x2_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let [c, h, w] = match x.shape() {
        [c, h, w] => [*c, *h, *w],
        s => panic!("maxpool expects [channels, height, width], got {s:?}"),
    };
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for di in 0..2 {
                    for dj in 0..2 {
                        let (i, j) = (oi * 2 + di, oj * 2 + dj);
                        if i >= h || j >= w {
                            continue;
                        }
                        let idx = (ch * h + i) * w + j;
                        // Strict comparison in row-major scan order keeps
                        // the first maximal cell on ties.
                        if x.data()[idx] > best {
                            best = x.data()[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    (Tensor::from_vec(&[c, oh, ow], out), argmax)
}

/// Scatter dy back to the argmax cells of the forward pass.
pub fn maxpool2x2_backward(x_shape: &[usize], argmax: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(x_shape);
    assert_eq!(argmax.len(), dy.len());
    for (idx, d) in argmax.iter().zip(dy.iter()) {
        dx.data_mut()[*idx] += d;
    }
    dx
}
