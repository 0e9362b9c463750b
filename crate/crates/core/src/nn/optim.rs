use serde::{Deserialize, Serialize};

use super::network::Parameter;
use super::tensor::{Scalar, Tensor};

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        #[serde(default = "defaults::lr")]
        lr: f64,
        #[serde(default = "defaults::beta1")]
        beta1: f64,
        #[serde(default = "defaults::beta2")]
        beta2: f64,
        #[serde(default = "defaults::eps")]
        eps: f64,
    },
}

mod defaults {
    pub fn lr() -> f64 {
        1e-3
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn eps() -> f64 {
        1e-8
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            lr: defaults::lr(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            eps: defaults::eps(),
        }
    }
}

impl Optimizer {
    /// Applies one update from each parameter's `grad`. `t` is the 1-based
    /// step count used for Adam's bias correction.
    pub fn step<'a, T: Scalar>(&self, params: impl IntoIterator<Item = &'a mut Parameter<T>>, t: u64) {
        assert!(t >= 1, "optimizer steps are 1-based");
        match *self {
            Optimizer::Sgd { lr } => {
                let lr = T::from_f64(lr);
                for p in params {
                    for (w, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= lr * g;
                    }
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                let c1 = T::from_f64(1.0 - beta1.powi(t as i32));
                let c2 = T::from_f64(1.0 - beta2.powi(t as i32));
                let (lr, b1, b2, eps) = (
                    T::from_f64(lr),
                    T::from_f64(beta1),
                    T::from_f64(beta2),
                    T::from_f64(eps),
                );
                for p in params {
                    let shape = p.value.shape().to_vec();
                    let m = p.first_moment.get_or_insert_with(|| Tensor::zeros(&shape));
                    let v = p.second_moment.get_or_insert_with(|| Tensor::zeros(&shape));
                    let grads = p.grad.data();
                    for (((w, m), v), &g) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                        .zip(grads)
                    {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(w: f32, g: f32) -> Parameter<f32> {
        let mut p = Parameter::new(Tensor::new(vec![1], vec![w]).unwrap());
        p.grad = Tensor::new(vec![1], vec![g]).unwrap();
        p
    }

    #[test]
    fn sgd_step() {
        let mut p = param(1.0, 1.0);
        Optimizer::Sgd { lr: 0.1 }.step([&mut p], 1);
        assert_eq!(p.value.data(), &[0.9]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3f32, 0.5, -3.0, 200.0] {
            let mut p = param(0.0, g);
            Optimizer::default().step([&mut p], 1);
            let delta = p.value.data()[0];
            assert!((delta.abs() - 1e-3).abs() < 1e-6, "g={g} delta={delta}");
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn config_parsing() {
        let opt: Optimizer = serde_json::from_str(r#"{"kind":"adam","lr":0.01}"#).unwrap();
        assert_eq!(
            opt,
            Optimizer::Adam {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8
            }
        );
        assert!(serde_json::from_str::<Optimizer>(r#"{"kind":"adam","momentum":0.9}"#).is_err());
        let opt: Optimizer = serde_json::from_str(r#"{"kind":"sgd","lr":0.5}"#).unwrap();
        assert_eq!(opt, Optimizer::Sgd { lr: 0.5 });
    }
}
