//! GRU cell followed by a linear read-out.
//!
//! Gate convention (reset applied to the hidden state inside the candidate):
//!
//! ```text
//! z  = sigmoid(Wz x + Uz h + bz)
//! r  = sigmoid(Wr x + Ur h + br)
//! c  = tanh(Wh x + Uh (r * h) + bh)
//! h' = (1 - z) * h + z * c
//! q  = Wo h' + bo
//! ```
//!
//! Storage order: Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh, Wo, bo.

use super::{
    affine, check_len, matvec_add, matvec_t_add, outer_add, sigmoid, Architecture, NetworkParams,
    NeuralError,
};

#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    /// Candidate state `c`.
    pub candidate: Vec<f64>,
    /// `r * h_prev`.
    pub reset_hidden: Vec<f64>,
    pub h_next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruGradients {
    pub params: Vec<f64>,
    pub h_prev: Vec<f64>,
}

fn dims(params: &NetworkParams) -> Result<(usize, usize, usize), NeuralError> {
    match params.arch() {
        Architecture::Gru {
            input,
            hidden,
            output,
        } => Ok((input, hidden, output)),
        _ => Err(NeuralError::WrongArchitecture("gru")),
    }
}

pub fn gru_forward(
    params: &NetworkParams,
    x: &[f64],
    h_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, GruCache), NeuralError> {
    let (input, hidden, output) = dims(params)?;
    check_len("gru input", input, x.len())?;
    check_len("hidden state", hidden, h_prev.len())?;
    let b = params.split();
    let (wz, wr, wh, uz, ur, uh) = (b[0], b[1], b[2], b[3], b[4], b[5]);
    let (bz, br, bh, wo, bo) = (b[6], b[7], b[8], b[9], b[10]);

    let mut z = vec![0.0; hidden];
    affine(wz, x, bz, &mut z);
    matvec_add(uz, h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = vec![0.0; hidden];
    affine(wr, x, br, &mut r);
    matvec_add(ur, h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let reset_hidden: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut candidate = vec![0.0; hidden];
    affine(wh, x, bh, &mut candidate);
    matvec_add(uh, &reset_hidden, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let h_next: Vec<f64> = (0..hidden)
        .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * candidate[k])
        .collect();
    let mut q = vec![0.0; output];
    affine(wo, &h_next, bo, &mut q);

    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        candidate,
        reset_hidden,
        h_next: h_next.clone(),
    };
    Ok((q, h_next, cache))
}

/// Parameter gradients and the gradient w.r.t. `h_prev` for `dq = dL/dq`.
pub fn gru_backward(params: &NetworkParams, cache: &GruCache, dq: &[f64]) -> Result<GruGradients, NeuralError> {
    let mut grads = vec![0.0; params.len()];
    let dh = backward_into(params, cache, dq, None, &mut grads)?;
    Ok(GruGradients {
        params: grads,
        h_prev: dh,
    })
}

/// Accumulates into `grads`; `dh_next_extra` is an optional gradient flowing
/// into `h'` from later time steps. Returns `dL/dh_prev`.
pub(crate) fn backward_into(
    params: &NetworkParams,
    cache: &GruCache,
    dq: &[f64],
    dh_next_extra: Option<&[f64]>,
    grads: &mut [f64],
) -> Result<Vec<f64>, NeuralError> {
    let (input, hidden, output) = dims(params)?;
    check_len("output gradient", output, dq.len())?;
    check_len("cached input", input, cache.x.len())?;
    check_len("cached hidden", hidden, cache.h_prev.len())?;
    let b = params.split();
    let (uz, ur, uh, wo) = (b[3], b[4], b[5], b[9]);

    let ih = hidden * input;
    let hh = hidden * hidden;
    let (g_wz, rest) = grads.split_at_mut(ih);
    let (g_wr, rest) = rest.split_at_mut(ih);
    let (g_wh, rest) = rest.split_at_mut(ih);
    let (g_uz, rest) = rest.split_at_mut(hh);
    let (g_ur, rest) = rest.split_at_mut(hh);
    let (g_uh, rest) = rest.split_at_mut(hh);
    let (g_bz, rest) = rest.split_at_mut(hidden);
    let (g_br, rest) = rest.split_at_mut(hidden);
    let (g_bh, rest) = rest.split_at_mut(hidden);
    let (g_wo, g_bo) = rest.split_at_mut(output * hidden);

    outer_add(dq, &cache.h_next, g_wo);
    for (g, d) in g_bo.iter_mut().zip(dq) {
        *g += d;
    }
    let mut dh_next = vec![0.0; hidden];
    matvec_t_add(wo, dq, &mut dh_next);
    if let Some(extra) = dh_next_extra {
        check_len("h' gradient", hidden, extra.len())?;
        dh_next.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
    }

    let h = &cache.h_prev;
    let mut dh_prev: Vec<f64> = (0..hidden).map(|k| dh_next[k] * (1.0 - cache.z[k])).collect();
    let d_cand_pre: Vec<f64> = (0..hidden)
        .map(|k| dh_next[k] * cache.z[k] * (1.0 - cache.candidate[k] * cache.candidate[k]))
        .collect();
    let d_z_pre: Vec<f64> = (0..hidden)
        .map(|k| dh_next[k] * (cache.candidate[k] - h[k]) * cache.z[k] * (1.0 - cache.z[k]))
        .collect();

    outer_add(&d_cand_pre, &cache.x, g_wh);
    outer_add(&d_cand_pre, &cache.reset_hidden, g_uh);
    g_bh.iter_mut().zip(&d_cand_pre).for_each(|(g, d)| *g += d);

    let mut d_reset_hidden = vec![0.0; hidden];
    matvec_t_add(uh, &d_cand_pre, &mut d_reset_hidden);
    let d_r_pre: Vec<f64> = (0..hidden)
        .map(|k| d_reset_hidden[k] * h[k] * cache.r[k] * (1.0 - cache.r[k]))
        .collect();
    for k in 0..hidden {
        dh_prev[k] += d_reset_hidden[k] * cache.r[k];
    }

    outer_add(&d_z_pre, &cache.x, g_wz);
    outer_add(&d_z_pre, h, g_uz);
    g_bz.iter_mut().zip(&d_z_pre).for_each(|(g, d)| *g += d);
    outer_add(&d_r_pre, &cache.x, g_wr);
    outer_add(&d_r_pre, h, g_ur);
    g_br.iter_mut().zip(&d_r_pre).for_each(|(g, d)| *g += d);

    matvec_t_add(uz, &d_z_pre, &mut dh_prev);
    matvec_t_add(ur, &d_r_pre, &mut dh_prev);
    Ok(dh_prev)
}
