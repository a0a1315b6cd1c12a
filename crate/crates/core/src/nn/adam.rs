use super::params::ModelParams;
use crate::error::Result;
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    params.check_congruent(grads)?;
    params.check_congruent(&state.m)?;
    state.t += 1;
    let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(EPSILON));
    let one = T::one();
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(lr);

    let moments = state.m.groups_mut().into_iter().zip(state.v.groups_mut());
    for ((p, g), (m, v)) in params.groups_mut().into_iter().zip(grads.groups()).zip(moments) {
        for (((pi, &gi), mi), vi) in p.values.iter_mut().zip(g.values).zip(m.values.iter_mut()).zip(v.values.iter_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, BankSpec, Variant};

    fn params() -> ModelParams<f64> {
        let arch = Architecture {
            text_banks: vec![],
            knowledge_bank: BankSpec { height: 3, filters: 2 },
            hidden: 3,
            embedding_dim: 0,
            seq_len: 0,
            keywords: 3,
        };
        ModelParams::init(&arch, Variant::Ikom, None, 1).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut state, 0.01).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn single_constant_step_closed_form() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        let gval = 0.3;
        for grp in g.groups_mut() {
            grp.values.fill(gval);
        }
        let mut state = AdamState::new(&p);
        let lr = 1e-3;
        adam_step(&mut p, &g, &mut state, lr).unwrap();
        // m̂ = g and v̂ = g² after one step, so the update is lr·g/(|g|+ε).
        let expected = lr * gval / (gval + EPSILON);
        for (a, b) in p.groups().iter().zip(before.groups().iter()) {
            for (&x, &y) in a.values.iter().zip(b.values) {
                assert!(((y - x) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut p = params();
        let other = ModelParams::<f64>::zeros(&p.arch, Variant::Ikom, 0).unwrap();
        let mut bigger = p.arch.clone();
        bigger.hidden = 4;
        let wrong = ModelParams::<f64>::zeros(&bigger, Variant::Ikom, 0).unwrap();
        let mut state = AdamState::new(&other);
        assert!(adam_step(&mut p, &wrong, &mut state, 0.1).is_err());
    }

    #[test]
    fn identical_runs_match() {
        let run = || {
            let mut p = params();
            let mut g = p.zeros_like();
            let mut state = AdamState::new(&p);
            for step in 0..5 {
                for grp in g.groups_mut() {
                    grp.values.iter_mut().enumerate().for_each(|(i, x)| *x = (i + step) as f64 * 0.01 - 0.02);
                }
                adam_step(&mut p, &g, &mut state, 0.01).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
