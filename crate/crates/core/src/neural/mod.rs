//! Small dense/recurrent Q-network substrate with hand-written gradients.
//!
//! Parameters live in one flat `Vec<f64>` whose layout is fixed by the
//! [`Architecture`]. That keeps the optimizer, gradient checks and
//! checkpoints oblivious to the network kind.

mod adam;
mod checkpoint;
mod dense;
mod gradcheck;
mod gru;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use dense::{mlp_backward, mlp_forward, MlpCache};
pub use gradcheck::{finite_difference_check, gradient_suite, relative_error};
pub use gru::{gru_backward, gru_forward, GruCache, GruGradients};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {what} expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("wrong architecture: expected {0}")]
    WrongArchitecture(&'static str),
    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NeuralError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NeuralError::Shape {
            what,
            expected,
            actual,
        })
    }
}

/// Layer sizes and kinds.
///
/// * `Mlp`: `input -> dense(hidden) + ReLU -> linear(output)`
/// * `Gru`: `input -> GRU(hidden) -> linear(output)`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Mlp {
        input: usize,
        hidden: usize,
        output: usize,
    },
    Gru {
        input: usize,
        hidden: usize,
        output: usize,
    },
}

impl Architecture {
    pub fn input(&self) -> usize {
        match *self {
            Architecture::Mlp { input, .. } | Architecture::Gru { input, .. } => input,
        }
    }

    pub fn hidden(&self) -> usize {
        match *self {
            Architecture::Mlp { hidden, .. } | Architecture::Gru { hidden, .. } => hidden,
        }
    }

    pub fn output(&self) -> usize {
        match *self {
            Architecture::Mlp { output, .. } | Architecture::Gru { output, .. } => output,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, Architecture::Gru { .. })
    }

    pub fn num_params(&self) -> usize {
        match *self {
            Architecture::Mlp {
                input,
                hidden,
                output,
            } => hidden * input + hidden + output * hidden + output,
            Architecture::Gru {
                input,
                hidden,
                output,
            } => 3 * hidden * input + 3 * hidden * hidden + 3 * hidden + output * hidden + output,
        }
    }

    /// `(fan_in, len)` for each parameter block in storage order.
    pub(crate) fn blocks(&self) -> Vec<(usize, usize)> {
        match *self {
            Architecture::Mlp {
                input,
                hidden,
                output,
            } => vec![
                (input, hidden * input),
                (input, hidden),
                (hidden, output * hidden),
                (hidden, output),
            ],
            Architecture::Gru {
                input,
                hidden,
                output,
            } => {
                let mut b = vec![(hidden, hidden * input); 3];
                b.extend([(hidden, hidden * hidden); 3]);
                b.extend([(hidden, hidden); 3]);
                b.push((hidden, output * hidden));
                b.push((hidden, output));
                b
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp { .. } => "mlp",
            Architecture::Gru { .. } => "gru",
        }
    }
}

/// Weights and biases for one network, flat in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> Self {
        NetworkParams {
            arch,
            data: vec![0.0; arch.num_params()],
        }
    }

    pub fn from_vec(arch: Architecture, data: Vec<f64>) -> Result<Self, NeuralError> {
        check_len("parameter vector", arch.num_params(), data.len())?;
        Ok(NetworkParams { arch, data })
    }

    /// Every block drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut data = Vec::with_capacity(arch.num_params());
        for (fan_in, len) in arch.blocks() {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            data.extend((0..len).map(|_| rng.gen_range(-bound..=bound)));
        }
        NetworkParams { arch, data }
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn split(&self) -> Vec<&[f64]> {
        let mut rest = self.data.as_slice();
        let mut out = Vec::new();
        for (_, len) in self.arch.blocks() {
            let (head, tail) = rest.split_at(len);
            out.push(head);
            rest = tail;
        }
        out
    }
}

/// Cache from either network kind.
#[derive(Debug, Clone)]
pub enum ForwardCache {
    Mlp(MlpCache),
    Gru(GruCache),
}

/// Output of a forward pass through either network kind.
#[derive(Debug, Clone)]
pub struct Forward {
    pub q: Vec<f64>,
    /// Next hidden state (recurrent networks only).
    pub hidden: Option<Vec<f64>>,
    pub cache: ForwardCache,
}

impl NetworkParams {
    /// Forward pass dispatching on the architecture. `hidden` is required for
    /// recurrent networks and ignored otherwise.
    pub fn forward(&self, x: &[f64], hidden: Option<&[f64]>) -> Result<Forward, NeuralError> {
        match self.arch {
            Architecture::Mlp { .. } => {
                let (q, cache) = mlp_forward(self, x)?;
                Ok(Forward {
                    q,
                    hidden: None,
                    cache: ForwardCache::Mlp(cache),
                })
            }
            Architecture::Gru { hidden: width, .. } => {
                let zero;
                let h = match hidden {
                    Some(h) => h,
                    None => {
                        zero = vec![0.0; width];
                        &zero
                    }
                };
                let (q, h_next, cache) = gru_forward(self, x, h)?;
                Ok(Forward {
                    q,
                    hidden: Some(h_next),
                    cache: ForwardCache::Gru(cache),
                })
            }
        }
    }

    /// Accumulate parameter gradients for output gradient `dq` into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dq: &[f64],
        grads: &mut [f64],
    ) -> Result<(), NeuralError> {
        check_len("gradient buffer", self.len(), grads.len())?;
        match cache {
            ForwardCache::Mlp(c) => dense::backward_into(self, c, dq, grads),
            ForwardCache::Gru(c) => gru::backward_into(self, c, dq, None, grads).map(|_| ()),
        }
    }
}

/// `out = m * x + b` for a row-major `rows x cols` matrix.
pub(crate) fn affine(m: &[f64], x: &[f64], b: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        *o = b[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// `out += m * x` (no bias).
pub(crate) fn matvec_add(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// `out += m^T * y` for a row-major `y.len() x out.len()` matrix.
pub(crate) fn matvec_t_add(m: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        let row = &m[i * cols..(i + 1) * cols];
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * yi;
        }
    }
}

/// `g += y x^T`.
pub(crate) fn outer_add(y: &[f64], x: &[f64], g: &mut [f64]) {
    let cols = x.len();
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        let row = &mut g[i * cols..(i + 1) * cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += yi * xv;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_counts() {
        let mlp = Architecture::Mlp {
            input: 2,
            hidden: 48,
            output: 4,
        };
        assert_eq!(mlp.num_params(), 48 * 2 + 48 + 4 * 48 + 4);
        let gru = Architecture::Gru {
            input: 4,
            hidden: 128,
            output: 4,
        };
        assert_eq!(
            gru.num_params(),
            gru.blocks().iter().map(|b| b.1).sum::<usize>()
        );
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let arch = Architecture::Mlp {
            input: 4,
            hidden: 16,
            output: 4,
        };
        let p = NetworkParams::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        let blocks = p.split();
        assert!(blocks[0].iter().all(|w| w.abs() <= 0.5));
        assert!(blocks[2].iter().all(|w| w.abs() <= 0.25));
        let again = NetworkParams::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p, again);
    }

    #[test]
    fn from_vec_checks_length() {
        let arch = Architecture::Mlp {
            input: 1,
            hidden: 1,
            output: 4,
        };
        assert!(NetworkParams::from_vec(arch, vec![0.0; 3]).is_err());
        assert!(NetworkParams::from_vec(arch, vec![0.0; arch.num_params()]).is_ok());
    }
}
