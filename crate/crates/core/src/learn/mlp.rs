//! Fully connected rectifier network over a flat parameter vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;

/// Layer `l` stores its weights as an `inputs × outputs` row-major block,
/// followed by `outputs` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

/// Activations recorded by a forward pass: the input, each hidden layer after
/// the rectifier, and the linear output.
#[derive(Clone, Debug)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an output layer")
    }
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self, LearnError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(LearnError::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Uniform fan-in initialization, `U(-√(6/fan_in), √(6/fan_in))`, with
    /// zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self, LearnError> {
        let mut mlp = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in mlp.layers() {
            let bound = (6.0 / layer.n_in as f64).sqrt();
            for w in &mut mlp.params[layer.w..layer.b] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, LearnError> {
        let mut mlp = Self::zeros(sizes)?;
        if params.len() != mlp.params.len() {
            return Err(LearnError::DimensionMismatch {
                expected: mlp.params.len(),
                got: params.len(),
            });
        }
        mlp.params = params;
        Ok(mlp)
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let layer = Layer {
                    w: off,
                    b: off + w[0] * w[1],
                    n_in: w[0],
                    n_out: w[1],
                };
                off = layer.b + w[1];
                layer
            })
            .collect()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), LearnError> {
        if x.len() != self.input_dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, LearnError> {
        self.check_input(x)?;
        let layers = self.layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_vec());
        for (k, layer) in layers.iter().enumerate() {
            let input = &acts[k];
            let mut z = self.params[layer.b..layer.b + layer.n_out].to_vec();
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &self.params[layer.w + i * layer.n_out..layer.w + (i + 1) * layer.n_out];
                for (zj, wij) in z.iter_mut().zip(row) {
                    *zj += a * wij;
                }
            }
            if k + 1 < layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        Ok(Trace { acts })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.acts.pop().expect("output layer"))
    }

    /// Adds `upstream · ∂output/∂params` into `grad`.
    pub fn backward_into(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<(), LearnError> {
        if upstream.len() != self.output_dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let layers = self.layers();
        let mut delta = upstream.to_vec();
        for (k, layer) in layers.iter().enumerate().rev() {
            let input = &trace.acts[k];
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut grad[layer.w + i * layer.n_out..layer.w + (i + 1) * layer.n_out];
                for (g, d) in row.iter_mut().zip(&delta) {
                    *g += a * d;
                }
            }
            for (g, d) in grad[layer.b..layer.b + layer.n_out].iter_mut().zip(&delta) {
                *g += d;
            }
            if k == 0 {
                break;
            }
            let next: Vec<f64> = input
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    if a <= 0.0 {
                        return 0.0;
                    }
                    let row = &self.params[layer.w + i * layer.n_out..layer.w + (i + 1) * layer.n_out];
                    row.iter().zip(&delta).map(|(w, d)| w * d).sum()
                })
                .collect();
            delta = next;
        }
        Ok(())
    }

    /// Gradient of `upstream · output(x)` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, LearnError> {
        let trace = self.forward_trace(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(&trace, upstream, &mut grad)?;
        Ok(grad)
    }
}

/// Adam optimizer state.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[4, 8, 8, 2]).unwrap();
        assert_eq!(mlp.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(mlp.n_params(), 4 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
    }

    #[test]
    fn dimension_checks() {
        let mlp = Mlp::new(&[3, 5, 1], 0).unwrap();
        assert!(matches!(
            mlp.forward(&[1.0, 2.0]),
            Err(LearnError::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(mlp.backward(&[1.0, 2.0, 3.0], &[1.0, 1.0]).is_err());
        assert!(Mlp::from_params(&[3, 5, 1], vec![0.0; 3]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mlp = Mlp::new(&[6, 16, 16, 3], 42).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0, -0.4, 0.1];
        let up = [0.7, -1.3, 0.25];
        let grad = mlp.backward(&x, &up).unwrap();
        let f = |m: &Mlp| -> f64 {
            let o = m.forward(&x).unwrap();
            o.iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 20 {
            let k = rng.gen_range(0..mlp.n_params());
            let h = 1e-6;
            let mut plus = mlp.clone();
            plus.params_mut()[k] += h;
            let mut minus = mlp.clone();
            minus.params_mut()[k] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            if grad[k].abs() < 1e-8 && fd.abs() < 1e-8 {
                continue;
            }
            let rel = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs());
            assert!(rel <= 1e-4, "param {k}: analytic {} vs fd {fd}", grad[k]);
            checked += 1;
        }
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mlp = Mlp::new(&[4, 8, 2], 3).unwrap();
        let x = [1.0, 0.5, -0.5, 2.0];
        let g1 = mlp.backward(&x, &[1.0, -0.5]).unwrap();
        let g2 = mlp.backward(&x, &[2.0, -1.0]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = Mlp::new(&[25, 128, 128, 2], 9).unwrap();
        let b = Mlp::new(&[25, 128, 128, 2], 9).unwrap();
        let c = Mlp::new(&[25, 128, 128, 2], 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f64 / 25.0).sqrt();
        assert!(a.params()[..25 * 128].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3, "{p:?}");
    }
}
