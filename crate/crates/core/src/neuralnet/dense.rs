//! Affine layer and the ReLU nonlinearity.

use super::linalg::{mat_vec_t, outer_acc, vec_mat};
use super::{NnError, Tensor};

/// y = xW + b for x of shape [batch, in], W [in, out], b [out].
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let (batch, input) = match x.shape() {
        [n, i] => (*n, *i),
        _ => {
            return Err(NnError::ShapeMismatch {
                context: "dense input",
                expected: vec![0, 0],
                got: x.shape().to_vec(),
            })
        }
    };
    let (wi, wo) = (w.shape()[0], w.shape()[1]);
    if wi != input || b.shape() != [wo] {
        return Err(NnError::ShapeMismatch {
            context: "dense weights",
            expected: vec![input, wo],
            got: w.shape().to_vec(),
        });
    }
    let mut data = Vec::with_capacity(batch * wo);
    for r in 0..batch {
        let row = &x.data()[r * input..(r + 1) * input];
        let mut y = vec_mat(row, w.data(), wi, wo);
        for (y, b) in y.iter_mut().zip(b.data()) {
            *y += b;
        }
        data.extend(y);
    }
    Ok(Tensor::from_vec(&[batch, wo], data))
}

/// Gradients of the affine layer: returns (dx, dW, db) for upstream dy of
/// shape [batch, out].
pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (batch, input) = (x.shape()[0], x.shape()[1]);
    let out = w.shape()[1];
    assert_eq!(dy.shape(), &[batch, out], "dense upstream gradient shape");

    let mut dx = Vec::with_capacity(batch * input);
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[out]);
    for r in 0..batch {
        let xr = &x.data()[r * input..(r + 1) * input];
        let dyr = &dy.data()[r * out..(r + 1) * out];
        dx.extend(mat_vec_t(w.data(), input, out, dyr));
        outer_acc(dw.data_mut(), xr, dyr);
        super::linalg::add_assign(db.data_mut(), dyr);
    }
    (Tensor::from_vec(x.shape(), dx), dw, db)
}

/// Elementwise max(0, x).
pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor::from_vec(x.shape(), x.iter().map(|v| v.max(0.0)).collect())
}

/// Routes gradients through positive inputs only. Zero inputs pass no
/// gradient (the subgradient at 0 is taken as 0).
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(x.shape(), dy.shape());
    Tensor::from_vec(
        x.shape(),
        x.iter().zip(dy.iter()).map(|(x, d)| if *x > 0.0 { *d } else { 0.0 }).collect(),
    )
}
