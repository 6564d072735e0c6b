//! One-hidden-layer tanh network with hand-written backprop.
//!
//! Parameters live in one flat vector laid out as
//! `[w1 (hidden × inputs, row-major), b1 (hidden), w2 (outputs × hidden), b2 (outputs)]`
//! so gradients, updates and checkpoints all work on plain slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

/// Intermediate values kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let len = hidden * inputs + hidden + outputs * hidden + outputs;
        Self {
            inputs,
            hidden,
            outputs,
            params: vec![0.0; len],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        let l1 = 1.0 / (inputs as f64).sqrt();
        let l2 = 1.0 / (hidden as f64).sqrt();
        let (w1, rest) = net.params.split_at_mut(hidden * inputs);
        let (_, rest) = rest.split_at_mut(hidden);
        let (w2, _) = rest.split_at_mut(outputs * hidden);
        for w in w1 {
            *w = rng.gen_range(-l1..=l1);
        }
        for w in w2 {
            *w = rng.gen_range(-l2..=l2);
        }
        net
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    pub fn forward(&self, x: &[f64]) -> Activations {
        assert_eq!(x.len(), self.inputs, "input width");
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &p[h * self.inputs..(h + 1) * self.inputs];
                let z = p[b1 + h] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
                z.tanh()
            })
            .collect();
        let output = (0..self.outputs)
            .map(|o| {
                let row = &p[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
                p[b2 + o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        Activations { hidden, output }
    }

    /// Gradient of `Σ_o grad_out[o] · output[o]` with respect to every
    /// parameter, accumulated into `grad` (same layout as `params`).
    pub fn backward_into(&self, x: &[f64], act: &Activations, grad_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad_out.len(), self.outputs);
        assert_eq!(grad.len(), self.params.len());
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;

        let mut grad_hidden = vec![0.0; self.hidden];
        for (o, &go) in grad_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            grad[b2 + o] += go;
            let base = w2 + o * self.hidden;
            for h in 0..self.hidden {
                grad[base + h] += go * act.hidden[h];
                grad_hidden[h] += go * p[base + h];
            }
        }
        for h in 0..self.hidden {
            let dz = grad_hidden[h] * (1.0 - act.hidden[h] * act.hidden[h]);
            if dz == 0.0 {
                continue;
            }
            grad[b1 + h] += dz;
            let base = h * self.inputs;
            for (i, &xi) in x.iter().enumerate() {
                grad[base + i] += dz * xi;
            }
        }
    }

    pub fn backward(&self, x: &[f64], act: &Activations, grad_out: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(x, act, grad_out, &mut grad);
        grad
    }

    /// `params += scale · direction`. Refuses to leave the parameters
    /// non-finite.
    pub fn add_scaled(&mut self, direction: &[f64], scale: f64) -> Result<()> {
        assert_eq!(direction.len(), self.params.len());
        if let Some(i) = direction.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!("non-finite gradient at parameter {i}")));
        }
        let updated: Vec<f64> = self
            .params
            .iter()
            .zip(direction)
            .map(|(p, g)| p + scale * g)
            .collect();
        if let Some(i) = updated.iter().position(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!("parameter {i} became non-finite")));
        }
        self.params = updated;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(4, 5, 3);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5, 3.0]).output, vec![0.0; 3]);
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(16, 64, 8, &mut rng);
        let (b1, w2, b2) = net.offsets();
        assert!(net.params()[..b1].iter().all(|w| w.abs() <= 0.25));
        assert!(net.params()[b1..w2].iter().all(|&b| b == 0.0));
        assert!(net.params()[w2..b2].iter().all(|w| w.abs() <= 0.125));
        assert!(net.params()[b2..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::init(3, 6, 2, &mut rng);
        for p in net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let x = [0.2, -0.7, 1.1];
        let weights = [0.6, -1.3];
        let f = |n: &Mlp| -> f64 {
            n.forward(&x).output.iter().zip(&weights).map(|(o, w)| o * w).sum()
        };
        let act = net.forward(&x);
        let grad = net.backward(&x, &act, &weights);
        let h = 1e-5;
        for (i, g) in grad.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((fd - g).abs() < 1e-8, "param {i}: {fd} vs {g}");
        }
    }

    #[test]
    fn add_scaled_rejects_non_finite() {
        let mut net = Mlp::zeros(1, 1, 1);
        let mut g = vec![0.0; net.num_params()];
        g[0] = f64::NAN;
        assert!(matches!(net.add_scaled(&g, 1.0), Err(Error::Diverged(_))));
        assert!(net.params().iter().all(|&p| p == 0.0));
    }
}
