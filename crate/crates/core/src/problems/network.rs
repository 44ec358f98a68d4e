//! Two-layer ReLU network `y = W2 relu(W1 x + b1) + b2` with hand-written backprop.
//!
//! Parameters are packed as `[W1 (hidden x input, row-major), b1, W2 (output x hidden, row-major), b2]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl NetShape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.output * self.hidden;
        (b1, w2, b2)
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let (_, w2, _) = self.offsets();
        let k1 = 1.0 / (self.input as f64).sqrt();
        let k2 = 1.0 / (self.hidden as f64).sqrt();
        (0..self.param_count())
            .map(|p| {
                let k = if p < w2 { k1 } else { k2 };
                rng.gen_range(-k..k)
            })
            .collect()
    }

    /// Pre-activations `W1 x + b1`.
    pub fn preactivations(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|h| {
                let row = &theta[h * self.input..(h + 1) * self.input];
                theta[b1 + h] + crate::linalg::dot(row, x)
            })
            .collect()
    }

    fn output_from_hidden(&self, theta: &[f64], act: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.output)
            .map(|o| {
                let row = &theta[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
                theta[b2 + o] + crate::linalg::dot(row, act)
            })
            .collect()
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let act: Vec<f64> = self.preactivations(theta, x).into_iter().map(|z| z.max(0.0)).collect();
        self.output_from_hidden(theta, &act)
    }

    /// Pre-activations and output.
    pub fn forward_cached(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z = self.preactivations(theta, x);
        let act: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let y = self.output_from_hidden(theta, &act);
        (z, y)
    }

    /// For each output cotangent, adds the parameter gradient into the
    /// matching accumulator, reusing the pre-activations `z` of input `x`.
    pub fn backward_from(&self, theta: &[f64], x: &[f64], z: &[f64], cotangents: &[Vec<f64>], acc: &mut [Vec<f64>]) {
        debug_assert_eq!(cotangents.len(), acc.len());
        let (b1, w2, b2) = self.offsets();
        let mut g_hidden = vec![0.0; self.hidden];
        for (c, grad) in cotangents.iter().zip(acc.iter_mut()) {
            g_hidden.iter_mut().for_each(|v| *v = 0.0);
            for (o, &co) in c.iter().enumerate() {
                if co == 0.0 {
                    continue;
                }
                grad[b2 + o] += co;
                let row = w2 + o * self.hidden;
                for h in 0..self.hidden {
                    grad[row + h] += co * z[h].max(0.0);
                    g_hidden[h] += co * theta[row + h];
                }
            }
            for h in 0..self.hidden {
                if z[h] <= 0.0 || g_hidden[h] == 0.0 {
                    continue;
                }
                let gz = g_hidden[h];
                grad[b1 + h] += gz;
                let row = h * self.input;
                for (i, xi) in x.iter().enumerate() {
                    grad[row + i] += gz * xi;
                }
            }
        }
    }

    /// Forward pass, then for each cotangent on the output adds the
    /// parameter gradient into the matching accumulator.
    pub fn forward_backward(
        &self,
        theta: &[f64],
        x: &[f64],
        cotangents: &mut dyn FnMut(&[f64]) -> Vec<Vec<f64>>,
        acc: &mut [Vec<f64>],
    ) {
        let (z, y) = self.forward_cached(theta, x);
        let cots = cotangents(&y);
        self.backward_from(theta, x, &z, &cots, acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn param_count_and_layout() {
        let s = NetShape { input: 20, hidden: 400, output: 4 };
        assert_eq!(s.param_count(), 10_004);
        let s = NetShape { input: 2, hidden: 3, output: 1 };
        let theta = s.init(&mut rng::stream(0, 1));
        assert_eq!(theta.len(), 13);
        assert!(theta.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let s = NetShape { input: 2, hidden: 2, output: 1 };
        // W1 = [[1, 0], [0, -1]], b1 = [0, 0.5], W2 = [[2, 3]], b2 = [-1]
        let theta = [1.0, 0.0, 0.0, -1.0, 0.0, 0.5, 2.0, 3.0, -1.0];
        // x = (1, 1): z = (1, -0.5) -> a = (1, 0); y = 2 - 1 = 1
        assert_eq!(s.forward(&theta, &[1.0, 1.0]), vec![1.0]);
        // x = (-1, -1): z = (-1, 1.5) -> a = (0, 1.5); y = 4.5 - 1 = 3.5
        assert_eq!(s.forward(&theta, &[-1.0, -1.0]), vec![3.5]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let s = NetShape { input: 3, hidden: 5, output: 2 };
        let theta = s.init(&mut rng::stream(3, 1));
        let x = [0.3, -0.8, 0.5];
        let c = [0.7, -1.3];
        let loss = |t: &[f64]| crate::linalg::dot(&s.forward(t, &x), &c);
        let mut acc = vec![vec![0.0; s.param_count()]];
        s.forward_backward(&theta, &x, &mut |_| vec![c.to_vec()], &mut acc);
        let h = 1e-6;
        for p in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[p] += h;
            tm[p] -= h;
            let fd = (loss(&tp) - loss(&tm)) / (2.0 * h);
            assert!((fd - acc[0][p]).abs() < 1e-6, "param {p}: fd {fd} vs {}", acc[0][p]);
        }
    }
}
