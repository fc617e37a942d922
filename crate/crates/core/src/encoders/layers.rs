//! Graph-level building blocks shared by the detection models.

use crate::autodiff::{Graph, ParamStore, Real, Tensor, Var};
use crate::textcorpus::Token;
use crate::{Error, Result};

pub(crate) fn lookup<T: Real>(store: &ParamStore<T>, vars: &[Var], name: &str) -> Result<Var> {
    store
        .position(name)
        .map(|i| vars[i])
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
}

/// Gated recurrent unit weights bound to a graph. Input weights are
/// `[d_in, d_h]`, recurrent weights `[d_h, d_h]`, biases `[d_h]`.
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
    pub hidden: usize,
}

impl Gru {
    pub const PARTS: [&'static str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

    pub fn shapes(prefix: &str, d_in: usize, d_h: usize) -> Vec<(String, Vec<usize>)> {
        Self::PARTS
            .iter()
            .map(|p| {
                let shape = match &p[..1] {
                    "w" => vec![d_in, d_h],
                    "u" => vec![d_h, d_h],
                    _ => vec![d_h],
                };
                (format!("{prefix}.{p}"), shape)
            })
            .collect()
    }

    pub fn bind<T: Real>(g: &Graph<'_, T>, store: &ParamStore<T>, vars: &[Var], prefix: &str) -> Result<Self> {
        let v = |p: &str| lookup(store, vars, &format!("{prefix}.{p}"));
        let u_z = v("u_z")?;
        Ok(Gru {
            w_z: v("w_z")?,
            w_r: v("w_r")?,
            w_h: v("w_h")?,
            u_z,
            u_r: v("u_r")?,
            u_h: v("u_h")?,
            b_z: v("b_z")?,
            b_r: v("b_r")?,
            b_h: v("b_h")?,
            hidden: g.shape(u_z)[0],
        })
    }
}

/// One recurrence step:
/// `z = σ(x W_z + h U_z + b_z)`, `r = σ(x W_r + h U_r + b_r)`,
/// `h̃ = tanh(x W_h + (r ⊙ h) U_h + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ h̃`.
pub fn gru_step<T: Real>(g: &mut Graph<'_, T>, p: &Gru, h_prev: Var, x: Var) -> Result<Var> {
    let xz = g.matmul(x, p.w_z)?;
    let xz = g.add(xz, p.b_z)?;
    let xr = g.matmul(x, p.w_r)?;
    let xr = g.add(xr, p.b_r)?;
    let xh = g.matmul(x, p.w_h)?;
    let xh = g.add(xh, p.b_h)?;
    recur(g, p, h_prev, xz, xr, xh)
}

/// Recurrent half of a step given precomputed input projections.
fn recur<T: Real>(g: &mut Graph<'_, T>, p: &Gru, h: Var, xz: Var, xr: Var, xh: Var) -> Result<Var> {
    let hz = g.matmul(h, p.u_z)?;
    let z = g.add(xz, hz)?;
    let z = g.sigmoid(z);
    let hr = g.matmul(h, p.u_r)?;
    let r = g.add(xr, hr)?;
    let r = g.sigmoid(r);
    let rh = g.mul(r, h)?;
    let hh = g.matmul(rh, p.u_h)?;
    let cand = g.add(xh, hh)?;
    let cand = g.tanh(cand);
    // h + z ⊙ (h̃ − h) == (1 − z) ⊙ h + z ⊙ h̃
    let delta = g.sub(cand, h)?;
    let step = g.mul(z, delta)?;
    g.add(h, step)
}

/// Runs the recurrence from `h_0 = 0` over the rows of `inputs` (`[t, d_in]`).
/// Returns the final state and every intermediate state.
pub fn encode_rows<T: Real>(g: &mut Graph<'_, T>, p: &Gru, inputs: Var) -> Result<(Var, Vec<Var>)> {
    let t = match *g.shape(inputs) {
        [t, _] if t > 0 => t,
        _ => return Err(Error::EmptySequence),
    };
    // Input projections for all steps at once.
    let xz = g.matmul(inputs, p.w_z)?;
    let xz = g.add_row(xz, p.b_z)?;
    let xr = g.matmul(inputs, p.w_r)?;
    let xr = g.add_row(xr, p.b_r)?;
    let xh = g.matmul(inputs, p.w_h)?;
    let xh = g.add_row(xh, p.b_h)?;
    let mut h = g.constant(Tensor::zeros(&[p.hidden]));
    let mut states = Vec::with_capacity(t);
    for i in 0..t {
        let (z, r, c) = (g.row(xz, i)?, g.row(xr, i)?, g.row(xh, i)?);
        h = recur(g, p, h, z, r, c)?;
        states.push(h);
    }
    Ok((h, states))
}

/// Tokens with trailing padding removed.
pub fn unpadded(tokens: &[Token]) -> &[Token] {
    let end = tokens.iter().rposition(|t| !t.is_pad()).map_or(0, |i| i + 1);
    &tokens[..end]
}

fn token_ids(tokens: &[Token]) -> Result<Vec<usize>> {
    let toks = unpadded(tokens);
    if toks.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(toks.iter().map(|t| t.index()).collect())
}

/// Embeds `tokens` (trailing padding masked) and runs the GRU over them.
pub fn encode_tokens<T: Real>(
    g: &mut Graph<'_, T>,
    p: &Gru,
    embedding: Var,
    tokens: &[Token],
) -> Result<(Var, Vec<Var>)> {
    let ids = token_ids(tokens)?;
    let x = g.gather(embedding, &ids)?;
    encode_rows(g, p, x)
}

/// Mean word embedding of `tokens` (trailing padding masked).
pub fn mean_embedding<T: Real>(g: &mut Graph<'_, T>, embedding: Var, tokens: &[Token]) -> Result<Var> {
    let ids = token_ids(tokens)?;
    let x = g.gather(embedding, &ids)?;
    g.mean_rows(x)
}

pub const CONV_WIDTHS: [usize; 3] = [3, 4, 5];

/// Convolution filters per width in [`CONV_WIDTHS`]: weights
/// `[width * d_emb, k]` and biases `[k]`.
#[derive(Debug, Clone)]
pub struct Conv {
    pub filters: Vec<(usize, Var, Var)>,
}

impl Conv {
    pub fn shapes(prefix: &str, d_emb: usize, k: usize) -> Vec<(String, Vec<usize>)> {
        CONV_WIDTHS
            .iter()
            .flat_map(|&w| {
                [
                    (format!("{prefix}.w{w}"), vec![w * d_emb, k]),
                    (format!("{prefix}.b{w}"), vec![k]),
                ]
            })
            .collect()
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, vars: &[Var], prefix: &str) -> Result<Self> {
        let filters = CONV_WIDTHS
            .iter()
            .map(|&w| {
                Ok((
                    w,
                    lookup(store, vars, &format!("{prefix}.w{w}"))?,
                    lookup(store, vars, &format!("{prefix}.b{w}"))?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Conv { filters })
    }

    pub fn max_width(&self) -> usize {
        self.filters.iter().map(|f| f.0).max().unwrap_or(1)
    }
}

/// Valid convolution of every filter over `embedded` (`[t, d_emb]`, with
/// `t` at least the widest filter), max-pooled over time and concatenated
/// across widths.
pub fn conv_encode<T: Real>(g: &mut Graph<'_, T>, p: &Conv, embedded: Var) -> Result<Var> {
    let mut pooled = Vec::with_capacity(p.filters.len());
    for &(width, w, b) in &p.filters {
        let windows = g.unfold(embedded, width)?;
        let resp = g.matmul(windows, w)?;
        let resp = g.add_row(resp, b)?;
        pooled.push(g.max_rows(resp)?);
    }
    g.concat(&pooled)
}

/// Embeds tokens, right-pads with the padding row up to the widest filter
/// and applies [`conv_encode`].
pub fn conv_encode_tokens<T: Real>(g: &mut Graph<'_, T>, p: &Conv, embedding: Var, tokens: &[Token]) -> Result<Var> {
    let mut ids = token_ids(tokens)?;
    let need = p.max_width();
    if ids.len() < need {
        ids.resize(need, Token::PAD.index());
    }
    let x = g.gather(embedding, &ids)?;
    conv_encode(g, p, x)
}

/// Additive attention weights: `W_body [d_u, d_a]`, `W_head [d_u, d_a]`,
/// `v [d_a]`.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub w_body: Var,
    pub w_head: Var,
    pub v: Var,
}

impl Attention {
    pub fn shapes(prefix: &str, d_u: usize, d_a: usize) -> Vec<(String, Vec<usize>)> {
        vec![
            (format!("{prefix}.w_body"), vec![d_u, d_a]),
            (format!("{prefix}.w_head"), vec![d_u, d_a]),
            (format!("{prefix}.v"), vec![d_a]),
        ]
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, vars: &[Var], prefix: &str) -> Result<Self> {
        Ok(Attention {
            w_body: lookup(store, vars, &format!("{prefix}.w_body"))?,
            w_head: lookup(store, vars, &format!("{prefix}.w_head"))?,
            v: lookup(store, vars, &format!("{prefix}.v"))?,
        })
    }
}

/// `s_p = v · tanh(u_p W_body + u_H W_head)`, `a = softmax(s)`,
/// context `Σ a_p u_p`. Returns `(a, context)`.
pub fn attention_pool<T: Real>(g: &mut Graph<'_, T>, p: &Attention, states: &[Var], head: Var) -> Result<(Var, Var)> {
    if states.is_empty() {
        return Err(Error::EmptySequence);
    }
    let stacked = g.stack_rows(states)?;
    let proj_body = g.matmul(stacked, p.w_body)?;
    let proj_head = g.matmul(head, p.w_head)?;
    let pre = g.add_row(proj_body, proj_head)?;
    let act = g.tanh(pre);
    let scores = g.matmul(act, p.v)?;
    let weights = g.softmax(scores)?;
    let context = g.matmul(weights, stacked)?;
    Ok((weights, context))
}

/// Bilinear scorer `u_H^T M u_B + b`; `M` is `[d_head, d_body]`, `b` a
/// scalar.
#[derive(Debug, Clone, Copy)]
pub struct Scorer {
    pub m: Var,
    pub b: Var,
}

impl Scorer {
    pub fn shapes(d_head: usize, d_body: usize) -> Vec<(String, Vec<usize>)> {
        vec![("scorer.m".into(), vec![d_head, d_body]), ("scorer.b".into(), vec![])]
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, vars: &[Var]) -> Result<Self> {
        Ok(Scorer {
            m: lookup(store, vars, "scorer.m")?,
            b: lookup(store, vars, "scorer.b")?,
        })
    }
}

/// Pre-sigmoid bilinear score.
pub fn bilinear_logit<T: Real>(g: &mut Graph<'_, T>, p: &Scorer, u_head: Var, u_body: Var) -> Result<Var> {
    let hm = g.matmul(u_head, p.m)?;
    let prod = g.mul(hm, u_body)?;
    let s = g.sum(prod);
    g.add(s, p.b)
}

/// `σ(u_H^T M u_B + b)`.
pub fn bilinear_score<T: Real>(g: &mut Graph<'_, T>, p: &Scorer, u_head: Var, u_body: Var) -> Result<Var> {
    let z = bilinear_logit(g, p, u_head, u_body)?;
    Ok(g.sigmoid(z))
}
