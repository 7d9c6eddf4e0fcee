use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Var};
use crate::rng::Rng;

/// Weights of one LSTM cell with gate order input, forget, output, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `[4H × input]`
    pub w_input: ParamId,
    /// `[4H × H]`
    pub w_hidden: ParamId,
    /// `[4H]`
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(LstmParams {
            w_input: store.add_uniform(
                &alloc::format!("{prefix}.w_input"),
                &[4 * hidden, input],
                scale,
                rng,
            )?,
            w_hidden: store.add_uniform(
                &alloc::format!("{prefix}.w_hidden"),
                &[4 * hidden, hidden],
                scale,
                rng,
            )?,
            bias: store.add_zeros(&alloc::format!("{prefix}.bias"), &[4 * hidden])?,
            input,
            hidden,
        })
    }
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_step(
    g: &mut Graph<'_>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmParams,
) -> Result<(Var, Var)> {
    let hid = p.hidden;
    for (name, v, want) in [
        ("x", x, p.input),
        ("h_prev", h_prev, hid),
        ("c_prev", c_prev, hid),
    ] {
        let got = g.value(v).len();
        if got != want {
            return Err(Error::shape(name, want, got));
        }
    }
    let wx = g.param(p.w_input);
    let wh = g.param(p.w_hidden);
    let b = g.param(p.bias);
    let a = g.matvec(wx, x)?;
    let r = g.matvec(wh, h_prev)?;
    let pre = g.add(a, r)?;
    let pre = g.add(pre, b)?;
    let i_pre = g.slice(pre, 0, hid)?;
    let f_pre = g.slice(pre, hid, hid)?;
    let o_pre = g.slice(pre, 2 * hid, hid)?;
    let c_pre = g.slice(pre, 3 * hid, hid)?;
    let i = g.sigmoid(i_pre)?;
    let f = g.sigmoid(f_pre)?;
    let o = g.sigmoid(o_pre)?;
    let cand = g.tanh(c_pre)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Fully connected layer `W x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        output: usize,
        scale: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Linear {
            weight: store.add_uniform(
                &alloc::format!("{prefix}.weight"),
                &[output, input],
                scale,
                rng,
            )?,
            bias: store.add_zeros(&alloc::format!("{prefix}.bias"), &[output])?,
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matvec(w, x)?;
        g.add(y, b)
    }
}
