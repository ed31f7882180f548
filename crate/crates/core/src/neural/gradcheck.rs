use rand::Rng;

use super::{check_len, Architecture, NetworkParams, NeuralError};

/// Denominator floor so near-zero gradients are compared absolutely.
const DENOM_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

/// Compare `analytic` against central differences of `loss` around `params`
/// and return the largest elementwise relative error.
pub fn finite_difference_check<F>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    step: f64,
) -> Result<f64, NeuralError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(NeuralError::BadStep(step));
    }
    check_len("analytic gradient", params.len(), analytic.len())?;
    let mut theta = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let up = loss(&theta);
        theta[i] = orig - step;
        let down = loss(&theta);
        theta[i] = orig;
        for l in [up, down] {
            if !l.is_finite() {
                return Err(NeuralError::NonFiniteLoss(l));
            }
        }
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// Loss used by the verification suite: `sum_i c_i q_i + 0.5 q_i^2`.
fn probe_loss(q: &[f64], c: &[f64]) -> f64 {
    q.iter().zip(c).map(|(q, c)| c * q + 0.5 * q * q).sum()
}

/// Check `instances` freshly initialised networks of shape `arch` on random
/// inputs (and random hidden states for recurrent ones). Returns the worst
/// relative error seen.
pub fn gradient_suite<R: Rng + ?Sized>(
    arch: Architecture,
    instances: usize,
    rng: &mut R,
) -> Result<f64, NeuralError> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let params = NetworkParams::init(arch, rng);
        let x: Vec<f64> = (0..arch.input()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Option<Vec<f64>> = arch
            .is_recurrent()
            .then(|| (0..arch.hidden()).map(|_| rng.gen_range(-0.9..0.9)).collect());
        let c: Vec<f64> = (0..arch.output()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let fwd = params.forward(&x, h.as_deref())?;
        let dq: Vec<f64> = fwd.q.iter().zip(&c).map(|(q, c)| c + q).collect();
        let mut grads = vec![0.0; params.len()];
        params.backward_into(&fwd.cache, &dq, &mut grads)?;

        let mut probe = params.clone();
        let loss = |theta: &[f64]| {
            probe.as_mut_slice().copy_from_slice(theta);
            match probe.forward(&x, h.as_deref()) {
                Ok(f) => probe_loss(&f.q, &c),
                Err(_) => f64::NAN,
            }
        };
        worst = worst.max(finite_difference_check(params.as_slice(), &grads, loss, 1e-6)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let theta = [1.0, 2.0];
        let loss = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>();
        let err = finite_difference_check(&theta, &[2.0, 4.0], loss, 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let loss = |t: &[f64]| t[0] * t[0];
        let err = finite_difference_check(&[1.0], &[3.0], loss, 1e-5).unwrap();
        assert!(err > 0.3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let loss = |t: &[f64]| t[0];
        assert_eq!(
            finite_difference_check(&[1.0], &[1.0], loss, 0.0),
            Err(NeuralError::BadStep(0.0))
        );
        let nan = |_: &[f64]| f64::NAN;
        assert!(matches!(
            finite_difference_check(&[1.0], &[1.0], nan, 1e-5),
            Err(NeuralError::NonFiniteLoss(_))
        ));
    }

    #[test]
    fn suite_passes_on_small_networks() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for arch in [
            Architecture::Mlp { input: 4, hidden: 6, output: 4 },
            Architecture::Gru { input: 4, hidden: 5, output: 4 },
        ] {
            let err = gradient_suite(arch, 5, &mut rng).unwrap();
            assert!(err < 1e-5, "{arch:?}: {err}");
        }
    }
}
