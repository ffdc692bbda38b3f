//! Shared dense kernels for the layer implementations. All matrices are
//! row-major slices with explicit dimensions.

/// y = x · W for a row vector x (len `rows`) and W (`rows` x `cols`).
pub(crate) fn vec_mat(x: &[f64], w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(w.len(), rows * cols);
    let mut out = vec![0.0; cols];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += xi * wv;
        }
    }
    out
}

/// x = W · dᵀ: contract a gradient over columns back onto rows,
/// out[i] = Σ_j W[i,j]·d[j].
pub(crate) fn mat_vec_t(w: &[f64], rows: usize, cols: usize, d: &[f64]) -> Vec<f64> {
    debug_assert_eq!(d.len(), cols);
    debug_assert_eq!(w.len(), rows * cols);
    (0..rows)
        .map(|i| {
            let row = &w[i * cols..(i + 1) * cols];
            row.iter().zip(d).map(|(w, d)| w * d).sum()
        })
        .collect()
}

/// dst += x ⊗ d, the rank-1 weight gradient of y = x·W.
pub(crate) fn outer_acc(dst: &mut [f64], x: &[f64], d: &[f64]) {
    debug_assert_eq!(dst.len(), x.len() * d.len());
    let cols = d.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut dst[i * cols..(i + 1) * cols];
        for (o, dv) in row.iter_mut().zip(d) {
            *o += xi * dv;
        }
    }
}

pub(crate) fn add_assign(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
