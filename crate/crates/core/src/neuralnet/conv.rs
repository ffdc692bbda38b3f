//! 3x3 convolution with stride 1 and same (zero) padding.

use super::{NnError, Tensor};

/// Convolve x [inC, H, W] with kernels [outC, inC, 3, 3] and bias [outC]
/// into [outC, H, W].
pub fn conv2d_forward(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let [ic, h, w] = match x.shape() {
        [c, h, w] => [*c, *h, *w],
        s => {
            return Err(NnError::ShapeMismatch {
                context: "conv input",
                expected: vec![0, 0, 0],
                got: s.to_vec(),
            })
        }
    };
    let [oc, kc, kh, kw] = match kernels.shape() {
        [o, c, kh, kw] => [*o, *c, *kh, *kw],
        s => {
            return Err(NnError::ShapeMismatch {
                context: "conv kernels",
                expected: vec![0, ic, 3, 3],
                got: s.to_vec(),
            })
        }
    };
    if kc != ic || kh != 3 || kw != 3 || bias.shape() != [oc] {
        return Err(NnError::ShapeMismatch {
            context: "conv kernels",
            expected: vec![oc, ic, 3, 3],
            got: kernels.shape().to_vec(),
        });
    }

    let mut out = Tensor::zeros(&[oc, h, w]);
    for o in 0..oc {
        let b = bias.data()[o];
        for i in 0..h {
            for j in 0..w {
                let mut acc = b;
                for c in 0..ic {
                    for di in 0..3usize {
                        let si = i as isize + di as isize - 1;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        for dj in 0..3usize {
                            let sj = j as isize + dj as isize - 1;
                            if sj < 0 || sj >= w as isize {
                                continue;
                            }
                            let xv = x.data()[(c * h + si as usize) * w + sj as usize];
                            let kv = kernels.data()[((o * ic + c) * 3 + di) * 3 + dj];
                            acc += xv * kv;
                        }
                    }
                }
                out.data_mut()[(o * h + i) * w + j] = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of the convolution: (dx, dKernels, dBias) for upstream dy of
/// shape [outC, H, W].
pub fn conv2d_backward(
    x: &Tensor,
    kernels: &Tensor,
    dy: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let [ic, h, w] = match x.shape() {
        [c, h, w] => [*c, *h, *w],
        s => panic!("conv input shape {s:?}"),
    };
    let oc = kernels.shape()[0];
    assert_eq!(dy.shape(), &[oc, h, w], "conv upstream gradient shape");

    let mut dx = Tensor::zeros(x.shape());
    let mut dk = Tensor::zeros(kernels.shape());
    let mut db = Tensor::zeros(&[oc]);
    for o in 0..oc {
        for i in 0..h {
            for j in 0..w {
                let d = dy.data()[(o * h + i) * w + j];
                if d == 0.0 {
                    continue;
                }
                db.data_mut()[o] += d;
                for c in 0..ic {
                    for di in 0..3usize {
                        let si = i as isize + di as isize - 1;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        for dj in 0..3usize {
                            let sj = j as isize + dj as isize - 1;
                            if sj < 0 || sj >= w as isize {
                                continue;
                            }
                            let xi = (c * h + si as usize) * w + sj as usize;
                            let ki = ((o * ic + c) * 3 + di) * 3 + dj;
                            dk.data_mut()[ki] += x.data()[xi] * d;
                            dx.data_mut()[xi] += kernels.data()[ki] * d;
                        }
                    }
                }
            }
        }
    }
    (dx, dk, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_delta_kernel_is_identity() {
        let x = Tensor::from_vec(&[1, 3, 4], (0..12).map(|v| v as f64 - 5.0).collect());
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_counts_the_neighborhood() {
        let x = Tensor::from_vec(&[1, 5, 5], vec![1.0; 25]);
        let k = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]);
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1])).unwrap();
        // Interior cells see the whole 3x3 window, corners only 2x2.
        assert_eq!(y.data()[(2 * 5) + 2], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[2], 6.0);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let x = Tensor::zeros(&[2, 4, 4]);
        assert!(conv2d_forward(&x, &Tensor::zeros(&[3, 1, 3, 3]), &Tensor::zeros(&[3])).is_err());
        assert!(conv2d_forward(&x, &Tensor::zeros(&[3, 2, 5, 5]), &Tensor::zeros(&[3])).is_err());
        assert!(conv2d_forward(&x, &Tensor::zeros(&[3, 2, 3, 3]), &Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_t = |shape: &[usize]| {
            let len: usize = shape.iter().product();
            Tensor::from_vec(shape, (0..len).map(|_| rng.random::<f64>() - 0.5).collect())
        };
        let x = rand_t(&[2, 5, 5]);
        let k = rand_t(&[3, 2, 3, 3]);
        let b = rand_t(&[3]);
        let r = rand_t(&[3, 5, 5]);

        let loss = |x: &Tensor, k: &Tensor, b: &Tensor| {
            let y = conv2d_forward(x, k, b).unwrap();
            y.iter().zip(r.iter()).map(|(y, r)| y * r).sum::<f64>()
        };
        let (dx, dk, db) = conv2d_backward(&x, &k, &r);

        let h = 1e-5;
        let check = |analytic: &Tensor, which: &str, base: &Tensor, eval: &dyn Fn(&Tensor) -> f64| {
            for i in 0..base.len() {
                let mut plus = base.clone();
                plus.data_mut()[i] += h;
                let mut minus = base.clone();
                minus.data_mut()[i] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[i];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-3);
                assert!(rel <= 1e-5, "{which}[{i}]: analytic {a} numeric {numeric}");
            }
        };
        check(&dx, "dx", &x, &|t| loss(t, &k, &b));
        check(&dk, "dk", &k, &|t| loss(&x, t, &b));
        check(&db, "db", &b, &|t| loss(&x, &k, t));
    }
}
