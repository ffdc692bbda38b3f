//! Central finite-difference verification for analytic gradients.

use super::params::{Grads, ParamSet};

/// Worst relative error per parameter tensor, plus the overall maximum.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub per_param: Vec<(String, f64)>,
    pub max_rel_err: f64,
}

impl GradReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_err <= threshold
    }
}

/// Compare the analytic gradients produced by `loss_and_grads` against
/// central differences with step `h` on every scalar in `params`.
///
/// Relative error is |a - n| / max(|a| + |n|, 1e-3); the floor keeps
/// near-zero gradients from blowing up the ratio. Parameter values are
/// restored after probing, so the set is unchanged on return.
pub fn grad_check(
    params: &mut ParamSet,
    loss_and_grads: impl Fn(&ParamSet) -> (f64, Grads),
    h: f64,
) -> GradReport {
    assert!(h > 0.0, "step must be positive");
    let (_, analytic) = loss_and_grads(params);
    let names: Vec<String> = params.names().map(str::to_owned).collect();

    let mut per_param = Vec::with_capacity(names.len());
    let mut max_rel_err: f64 = 0.0;
    for name in &names {
        let len = params.get(name).len();
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let original = params.get(name).data()[i];
            params.get_mut(name).data_mut()[i] = original + h;
            let plus = loss_and_grads(params).0;
            params.get_mut(name).data_mut()[i] = original - h;
            let minus = loss_and_grads(params).0;
            params.get_mut(name).data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic
                .get(name)
                .map(|g| g.data()[i])
                .unwrap_or(0.0);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
        max_rel_err = max_rel_err.max(worst);
        per_param.push((name.clone(), worst));
    }
    GradReport { per_param, max_rel_err }
}
