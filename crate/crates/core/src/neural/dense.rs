use super::{affine, check_len, matvec_t_add, outer_add, Architecture, NetworkParams, NeuralError};

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub x: Vec<f64>,
    /// Hidden pre-activations.
    pub pre: Vec<f64>,
    /// ReLU outputs.
    pub act: Vec<f64>,
}

fn dims(params: &NetworkParams) -> Result<(usize, usize, usize), NeuralError> {
    match params.arch() {
        Architecture::Mlp {
            input,
            hidden,
            output,
        } => Ok((input, hidden, output)),
        _ => Err(NeuralError::WrongArchitecture("mlp")),
    }
}

/// `q = W2 relu(W1 x + b1) + b2`
pub fn mlp_forward(params: &NetworkParams, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NeuralError> {
    let (input, hidden, output) = dims(params)?;
    check_len("mlp input", input, x.len())?;
    let b = params.split();
    let mut pre = vec![0.0; hidden];
    affine(b[0], x, b[1], &mut pre);
    let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    let mut q = vec![0.0; output];
    affine(b[2], &act, b[3], &mut q);
    Ok((
        q,
        MlpCache {
            x: x.to_vec(),
            pre,
            act,
        },
    ))
}

/// Gradients of a scalar loss w.r.t. every parameter, given `dq = dL/dq`.
pub fn mlp_backward(params: &NetworkParams, cache: &MlpCache, dq: &[f64]) -> Result<Vec<f64>, NeuralError> {
    let mut grads = vec![0.0; params.len()];
    backward_into(params, cache, dq, &mut grads)?;
    Ok(grads)
}

pub(crate) fn backward_into(
    params: &NetworkParams,
    cache: &MlpCache,
    dq: &[f64],
    grads: &mut [f64],
) -> Result<(), NeuralError> {
    let (input, hidden, output) = dims(params)?;
    check_len("output gradient", output, dq.len())?;
    check_len("cached input", input, cache.x.len())?;
    check_len("cached hidden", hidden, cache.act.len())?;
    let b = params.split();

    let (g_w1, rest) = grads.split_at_mut(hidden * input);
    let (g_b1, rest) = rest.split_at_mut(hidden);
    let (g_w2, g_b2) = rest.split_at_mut(output * hidden);

    outer_add(dq, &cache.act, g_w2);
    for (g, d) in g_b2.iter_mut().zip(dq) {
        *g += d;
    }
    let mut d_act = vec![0.0; hidden];
    matvec_t_add(b[2], dq, &mut d_act);
    let d_pre: Vec<f64> = d_act
        .iter()
        .zip(&cache.pre)
        .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
        .collect();
    outer_add(&d_pre, &cache.x, g_w1);
    for (g, d) in g_b1.iter_mut().zip(&d_pre) {
        *g += d;
    }
    Ok(())
}
