use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Var};

/// Outcome of comparing analytic gradients with fourth-order central
/// differences `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// Parameter name and element index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric values at the worst element.
    pub worst_values: (f64, f64),
    pub elements_checked: usize,
}

fn evaluate<F>(store: &ParamStore, loss_fn: &F) -> Result<f64>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = loss_fn(&mut g)?;
    Ok(g.scalar(loss))
}

/// Checks every element of every parameter in `store`.
pub fn grad_check<F>(store: &mut ParamStore, epsilon: f64, loss_fn: F) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<Var>,
{
    let ids: Vec<ParamId> = store.ids().collect();
    grad_check_params(store, epsilon, &ids, loss_fn)
}

/// Checks only the listed parameters; the others still take part in the loss.
pub fn grad_check_params<F>(
    store: &mut ParamStore,
    epsilon: f64,
    ids: &[ParamId],
    loss_fn: F,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<Var>,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let (first, grads) = {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        let value = g.scalar(loss);
        (value, g.backward(loss)?)
    };
    let second = evaluate(store, &loss_fn)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        elements_checked: 0,
    };
    for &id in ids {
        let n = store.value(id).len();
        for k in 0..n {
            let original = store.value(id).data()[k];
            let mut at = |offset: f64| {
                store.value_mut(id).data_mut()[k] = original + offset;
                evaluate(store, &loss_fn)
            };
            let (p1, m1, p2, m2) = (
                at(epsilon),
                at(-epsilon),
                at(2.0 * epsilon),
                at(-2.0 * epsilon),
            );
            store.value_mut(id).data_mut()[k] = original;
            let numeric = (8.0 * (p1? - m1?) - (p2? - m2?)) / (12.0 * epsilon);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            report.elements_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_string(), k));
                report.worst_values = (analytic, numeric);
            }
        }
    }
    Ok(report)
}
