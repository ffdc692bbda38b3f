//! Named parameter storage with Adam state, gradient accumulators, and the
//! Adam update itself.

use std::collections::BTreeMap;

use super::{NnError, Tensor};

/// Adam hyperparameters. Defaults follow the training setup: learning rate
/// 0.001, beta1 0.9, beta2 0.999, epsilon-hat 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_hat: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon_hat: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Param {
    value: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

/// Named parameters plus their per-parameter Adam moments. BTreeMap keys
/// give a fixed iteration order, so updates are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: BTreeMap<String, Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter with zeroed moments. Replaces any previous
    /// parameter of the same name wholesale.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        self.params.insert(name.into(), Param { value, m, v, step: 0 });
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.params.get(name).unwrap_or_else(|| panic!("unknown parameter `{name}`")).value
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
            .value
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, p)| (k.as_str(), &p.value))
    }

    /// Copy parameter values only (fresh moments, step 0). Used for
    /// snapshots: a restored snapshot restarts its optimizer state.
    pub fn values_snapshot(&self) -> BTreeMap<String, Tensor> {
        self.params.iter().map(|(k, p)| (k.clone(), p.value.clone())).collect()
    }

    pub fn restore_values(&mut self, snapshot: &BTreeMap<String, Tensor>) {
        for (name, value) in snapshot {
            let p = self
                .params
                .get_mut(name)
                .unwrap_or_else(|| panic!("snapshot has unknown parameter `{name}`"));
            assert_eq!(p.value.shape(), value.shape());
            p.value = value.clone();
        }
    }
}

/// Gradient accumulator keyed like a [`ParamSet`]. Accumulation is
/// ordered addition, so batch reduction order is fixed by the caller.
#[derive(Debug, Clone, Default)]
pub struct Grads {
    grads: BTreeMap<String, Tensor>,
}

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    /// dst[name] += g, creating a zero tensor on first touch.
    pub fn add(&mut self, name: &str, g: &Tensor) {
        match self.grads.get_mut(name) {
            Some(acc) => {
                assert_eq!(acc.shape(), g.shape(), "gradient shape changed for `{name}`");
                crate::neuralnet::linalg::add_assign(acc.data_mut(), g.data());
            }
            None => {
                self.grads.insert(name.to_string(), g.clone());
            }
        }
    }

    /// Merge another accumulator into this one (ordered, deterministic).
    pub fn merge(&mut self, other: &Grads) {
        for (name, g) in &other.grads {
            self.add(name, g);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, t)| (k.as_str(), t))
    }
}

/// One bias-corrected Adam update over every parameter that has a
/// gradient. Parameters without a gradient are left untouched (their
/// moments do not decay). A non-finite gradient aborts before any state
/// is modified.
pub fn adam_step(params: &mut ParamSet, grads: &Grads, cfg: &AdamConfig) -> Result<(), NnError> {
    for (name, g) in grads.iter() {
        if !params.contains(name) {
            return Err(NnError::UnknownParam(name.to_string()));
        }
        if !g.all_finite() {
            return Err(NnError::NonFiniteGradient { param: name.to_string() });
        }
    }
    for (name, p) in params.params.iter_mut() {
        let Some(g) = grads.get(name) else { continue };
        assert_eq!(g.shape(), p.value.shape(), "gradient shape for `{name}`");
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (m, v, w) = (p.m.data_mut(), p.v.data_mut(), p.value.data_mut());
        for i in 0..w.len() {
            let gi = g.data()[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon_hat);
        }
    }
    Ok(())
}
