//! Single-layer LSTM over one sequence, with exact backpropagation
//! through time.
//!
//! Gate layout along the 4H axis is input, forget, candidate, output.
//! Initial hidden and cell states are zero; the forget-gate bias starts at
//! zero like every other bias.

use super::linalg::{add_assign, mat_vec_t, outer_acc, sigmoid, vec_mat};
use super::{NnError, Tensor};

/// Everything the backward pass needs, captured during the forward run.
#[derive(Debug, Clone)]
pub struct LstmCache {
    xs: Vec<Vec<f64>>,
    gates_i: Vec<Vec<f64>>,
    gates_f: Vec<Vec<f64>>,
    gates_g: Vec<Vec<f64>>,
    gates_o: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    tanh_cells: Vec<Vec<f64>>,
    /// h_0..h_T, one longer than the sequence; h_0 is all zeros.
    hiddens: Vec<Vec<f64>>,
    hidden_size: usize,
}

impl LstmCache {
    /// Hidden states h_1..h_T, one per input step.
    pub fn hidden_seq(&self) -> &[Vec<f64>] {
        &self.hiddens[1..]
    }

    pub fn final_hidden(&self) -> &[f64] {
        self.hiddens.last().expect("cache holds at least h_0 and h_1")
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }
}

fn check_shapes(
    seq: &[Vec<f64>],
    wx: &Tensor,
    wh: &Tensor,
    b: &Tensor,
) -> Result<(usize, usize), NnError> {
    if seq.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let (d, four_h) = match wx.shape() {
        [d, fh] => (*d, *fh),
        s => {
            return Err(NnError::ShapeMismatch {
                context: "lstm input weights",
                expected: vec![0, 0],
                got: s.to_vec(),
            })
        }
    };
    let h = four_h / 4;
    if four_h % 4 != 0 || wh.shape() != [h, four_h] || b.shape() != [four_h] {
        return Err(NnError::ShapeMismatch {
            context: "lstm recurrent weights",
            expected: vec![h, four_h],
            got: wh.shape().to_vec(),
        });
    }
    for x in seq {
        if x.len() != d {
            return Err(NnError::ShapeMismatch {
                context: "lstm step input",
                expected: vec![d],
                got: vec![x.len()],
            });
        }
    }
    Ok((d, h))
}

/// Run the cell over `seq` (T steps of input dimension D) with weights
/// wx [D, 4H], wh [H, 4H], b [4H].
pub fn lstm_forward(
    seq: &[Vec<f64>],
    wx: &Tensor,
    wh: &Tensor,
    b: &Tensor,
) -> Result<LstmCache, NnError> {
    let (d, h) = check_shapes(seq, wx, wh, b)?;
    let t_len = seq.len();

    let mut cache = LstmCache {
        xs: seq.to_vec(),
        gates_i: Vec::with_capacity(t_len),
        gates_f: Vec::with_capacity(t_len),
        gates_g: Vec::with_capacity(t_len),
        gates_o: Vec::with_capacity(t_len),
        cells: Vec::with_capacity(t_len),
        tanh_cells: Vec::with_capacity(t_len),
        hiddens: vec![vec![0.0; h]],
        hidden_size: h,
    };

    let mut c_prev = vec![0.0; h];
    for x in seq {
        let h_prev = cache.hiddens.last().expect("h_0 seeded").clone();
        let mut z = vec_mat(x, wx.data(), d, 4 * h);
        add_assign(&mut z, &vec_mat(&h_prev, wh.data(), h, 4 * h));
        add_assign(&mut z, b.data());

        let gi: Vec<f64> = z[..h].iter().map(|v| sigmoid(*v)).collect();
        let gf: Vec<f64> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
        let gg: Vec<f64> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
        let go: Vec<f64> = z[3 * h..].iter().map(|v| sigmoid(*v)).collect();

        let c: Vec<f64> = (0..h).map(|k| gf[k] * c_prev[k] + gi[k] * gg[k]).collect();
        let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_cur: Vec<f64> = (0..h).map(|k| go[k] * tc[k]).collect();

        cache.gates_i.push(gi);
        cache.gates_f.push(gf);
        cache.gates_g.push(gg);
        cache.gates_o.push(go);
        cache.tanh_cells.push(tc);
        c_prev.clone_from(&c);
        cache.cells.push(c);
        cache.hiddens.push(h_cur);
    }
    Ok(cache)
}

/// Weight and input gradients from backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dwx: Tensor,
    pub dwh: Tensor,
    pub db: Tensor,
    pub dx: Vec<Vec<f64>>,
}

/// Backward through time given the loss gradient at the final hidden state
/// (the recognizers read only h_T; intermediate hidden states feed nothing
/// else, so their external gradients are zero).
pub fn lstm_backward(wx: &Tensor, wh: &Tensor, cache: &LstmCache, dh_final: &[f64]) -> LstmGrads {
    let h = cache.hidden_size;
    let d = wx.shape()[0];
    assert_eq!(dh_final.len(), h, "final hidden gradient size");
    let t_len = cache.xs.len();

    let mut dwx = Tensor::zeros(wx.shape());
    let mut dwh = Tensor::zeros(wh.shape());
    let mut db = Tensor::zeros(&[4 * h]);
    let mut dx_rev: Vec<Vec<f64>> = Vec::with_capacity(t_len);

    let zero = vec![0.0; h];
    let mut dh = dh_final.to_vec();
    let mut dc_carry = vec![0.0; h];

    for t in (0..t_len).rev() {
        let gi = &cache.gates_i[t];
        let gf = &cache.gates_f[t];
        let gg = &cache.gates_g[t];
        let go = &cache.gates_o[t];
        let tc = &cache.tanh_cells[t];
        let c_prev = if t == 0 { &zero } else { &cache.cells[t - 1] };
        let h_prev = &cache.hiddens[t];

        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let d_o = dh[k] * tc[k];
            let dc = dc_carry[k] + dh[k] * go[k] * (1.0 - tc[k] * tc[k]);
            let d_i = dc * gg[k];
            let d_f = dc * c_prev[k];
            let d_g = dc * gi[k];
            dz[k] = d_i * gi[k] * (1.0 - gi[k]);
            dz[h + k] = d_f * gf[k] * (1.0 - gf[k]);
            dz[2 * h + k] = d_g * (1.0 - gg[k] * gg[k]);
            dz[3 * h + k] = d_o * go[k] * (1.0 - go[k]);
            dc_prev[k] = dc * gf[k];
        }

        outer_acc(dwx.data_mut(), &cache.xs[t], &dz);
        outer_acc(dwh.data_mut(), h_prev, &dz);
        add_assign(db.data_mut(), &dz);
        dx_rev.push(mat_vec_t(wx.data(), d, 4 * h, &dz));
        dh = mat_vec_t(wh.data(), h, 4 * h, &dz);
        dc_carry = dc_prev;
    }

    dx_rev.reverse();
    LstmGrads { dwx, dwh, db, dx: dx_rev }
}
