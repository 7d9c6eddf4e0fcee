use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::rng::Rng;

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Gradients produced by one backward pass, indexed by parameter.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub(crate) grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    value: Tensor,
    grad: Option<Vec<f64>>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

/// Named trainable parameters with their gradients and Adam state.
///
/// Gradients are `None` until a backward pass is accumulated; an Adam step
/// consumes them.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    by_name: BTreeMap<String, ParamId>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::invalid(alloc::format!(
                "duplicate parameter `{name}`"
            )));
        }
        let n = value.len();
        let id = ParamId(self.slots.len());
        self.slots.push(Slot {
            name: name.to_string(),
            value,
            grad: None,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    /// Adds a parameter drawn uniformly from `[-scale, scale]`.
    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        scale: f64,
        rng: &mut Rng,
    ) -> Result<ParamId> {
        let mut t = Tensor::zeros(shape);
        if scale > 0.0 {
            for v in t.data_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0].value
    }

    /// Replaces a parameter value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = &mut self.slots[id.0];
        if slot.value.shape() != value.shape() {
            return Err(Error::shape(
                slot.name.clone(),
                slot.value.shape(),
                value.shape(),
            ));
        }
        slot.value = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> Option<&[f64]> {
        self.slots[id.0].grad.as_deref()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Iterates `(name, value)` in registration order.
    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &s.value))
    }

    /// Marks every gradient as present and zero.
    pub fn zero_grad(&mut self) {
        for slot in &mut self.slots {
            slot.grad = Some(vec![0.0; slot.value.len()]);
        }
    }

    /// Adds a backward pass's gradients. Every parameter ends up with a
    /// gradient; parameters absent from `grads` receive zeros.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        for (i, slot) in self.slots.iter_mut().enumerate() {
            let acc = slot.grad.get_or_insert_with(|| vec![0.0; slot.value.len()]);
            if let Some(Some(g)) = grads.grads.get(i) {
                if g.len() != acc.len() {
                    return Err(Error::shape(slot.name.clone(), acc.len(), g.len()));
                }
                for (a, &d) in acc.iter_mut().zip(g) {
                    *a += d;
                }
                if acc.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(alloc::format!(
                        "gradient of `{}`",
                        slot.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scales every present gradient (e.g. to average over a batch).
    pub fn scale_grads(&mut self, factor: f64) {
        for slot in &mut self.slots {
            if let Some(g) = &mut slot.grad {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    /// One Adam update with bias correction. Consumes the gradients.
    pub fn adam_step(&mut self, lr: f64, betas: (f64, f64), eps: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if let Some(slot) = self.slots.iter().find(|s| s.grad.is_none()) {
            return Err(Error::state(alloc::format!(
                "missing gradient for `{}`",
                slot.name
            )));
        }
        let (b1, b2) = betas;
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - libm::pow(b1, t);
        let bias2 = 1.0 - libm::pow(b2, t);
        for slot in &mut self.slots {
            let grad = slot.grad.take().unwrap_or_default();
            let params = slot.value.data_mut();
            for (k, g) in grad.into_iter().enumerate() {
                let m = &mut slot.first_moment[k];
                let v = &mut slot.second_moment[k];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                params[k] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

/// Step-decay learning-rate schedule: `base * decay^(epoch / every)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay: f64,
    pub every: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: 5e-4,
            decay: 0.8,
            every: 10,
        }
    }
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule {
            base: lr,
            decay: 1.0,
            every: 1,
        }
    }

    /// Learning rate for a zero-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let periods = epoch.checked_div(self.every).unwrap_or(0);
        self.base * libm::pow(self.decay, periods as f64)
    }
}

#[cfg(test)]
impl ParamStore {
    pub(crate) fn grads_mut_for_test(&mut self, id: ParamId) -> &mut Vec<f64> {
        self.slots[id.0].grad.as_mut().unwrap()
    }
}
