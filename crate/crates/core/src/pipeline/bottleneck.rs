//! Linear compression of frozen embeddings, trained through a small MLP
//! classifier. Only the linear part is kept at inference time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::BottleneckSettings;
use crate::error::{Error, Result};
use crate::gnn::softmax_xent;
use crate::optim::Adam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub d_in: usize,
    pub width: usize,
    pub hidden: usize,
    /// W1 (width × d_in), b1, W2 (hidden × width), b2, W3 (2 × hidden), b3.
    pub theta: Vec<f64>,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Bottleneck {
    fn offsets(&self) -> Offsets {
        let (d, w, h) = (self.d_in, self.width, self.hidden);
        let w1 = 0;
        let b1 = w1 + w * d;
        let w2 = b1 + w;
        let b2 = w2 + h * w;
        let w3 = b2 + h;
        let b3 = w3 + 2 * h;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            len: b3 + 2,
        }
    }

    pub fn init(d_in: usize, width: usize, hidden: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || width == 0 || hidden == 0 {
            return Err(Error::config("bottleneck dimensions must be positive"));
        }
        let mut b = Self {
            d_in,
            width,
            hidden,
            theta: Vec::new(),
        };
        let o = b.offsets();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; o.len];
        for (start, end, fan_in) in [(o.w1, o.b1, d_in), (o.w2, o.b2, width), (o.w3, o.b3, hidden)] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut theta[start..end] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        b.theta = theta;
        Ok(b)
    }

    pub fn compress(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: z.len(),
            });
        }
        let o = self.offsets();
        Ok((0..self.width)
            .map(|r| {
                let row = &self.theta[o.w1 + r * self.d_in..o.w1 + (r + 1) * self.d_in];
                self.theta[o.b1 + r] + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect())
    }

    /// Cross-entropy of the head on one sample and its gradient.
    fn loss_grad(&self, z: &[f64], class: u8) -> Result<(f64, Vec<f64>)> {
        let o = self.offsets();
        let (w, h) = (self.width, self.hidden);
        let t = &self.theta;
        let c = self.compress(z)?;
        let pre: Vec<f64> = (0..h)
            .map(|r| t[o.b2 + r] + (0..w).map(|k| t[o.w2 + r * w + k] * c[k]).sum::<f64>())
            .collect();
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let logits: Vec<f64> = (0..2)
            .map(|r| t[o.b3 + r] + (0..h).map(|k| t[o.w3 + r * h + k] * act[k]).sum::<f64>())
            .collect();
        let (loss, mut d_logits) = softmax_xent(&logits, class as usize);
        d_logits[class as usize] -= 1.0;

        let mut g = vec![0.0; o.len];
        let mut d_act = vec![0.0; h];
        for r in 0..2 {
            g[o.b3 + r] = d_logits[r];
            for k in 0..h {
                g[o.w3 + r * h + k] = d_logits[r] * act[k];
                d_act[k] += d_logits[r] * t[o.w3 + r * h + k];
            }
        }
        let mut d_c = vec![0.0; w];
        for r in 0..h {
            let dp = if pre[r] > 0.0 { d_act[r] } else { 0.0 };
            g[o.b2 + r] = dp;
            for k in 0..w {
                g[o.w2 + r * w + k] = dp * c[k];
                d_c[k] += dp * t[o.w2 + r * w + k];
            }
        }
        for r in 0..w {
            g[o.b1 + r] = d_c[r];
            for k in 0..self.d_in {
                g[o.w1 + r * self.d_in + k] = d_c[r] * z[k];
            }
        }
        Ok((loss, g))
    }

    pub fn mean_loss(&self, embeddings: &[Vec<f64>], classes: &[u8]) -> Result<f64> {
        let mut total = 0.0;
        for (z, &y) in embeddings.iter().zip(classes) {
            total += self.loss_grad(z, y)?.0;
        }
        Ok(total / embeddings.len().max(1) as f64)
    }
}

/// Trains a fresh bottleneck and head on frozen embeddings for a fixed
/// number of epochs (no early stopping).
pub fn train_bottleneck(
    embeddings: &[Vec<f64>],
    classes: &[u8],
    settings: &BottleneckSettings,
    batch_size: usize,
    seed: u64,
) -> Result<Bottleneck> {
    let d_in = embeddings
        .first()
        .ok_or_else(|| Error::Usage("bottleneck training needs samples".into()))?
        .len();
    if embeddings.len() != classes.len() {
        return Err(Error::Dimension {
            expected: embeddings.len(),
            actual: classes.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Bottleneck::init(d_in, settings.width, settings.head_hidden, rng.gen())?;
    let mut adam = Adam::new(model.theta.len(), settings.lr);
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size.max(1)) {
            let mut grad = vec![0.0; model.theta.len()];
            for &i in chunk {
                let (_, g) = model.loss_grad(&embeddings[i], classes[i])?;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v / chunk.len() as f64;
                }
            }
            adam.step(&mut model.theta, &grad)?;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut b = Bottleneck::init(4, 2, 3, 11).unwrap();
        // Move biases off zero so no ReLU sits on its kink.
        let o = b.offsets();
        for r in 0..3 {
            b.theta[o.b2 + r] = 0.3 + 0.1 * r as f64;
        }
        let z = [0.4, -1.2, 0.7, 2.0];
        let (_, g) = b.loss_grad(&z, 1).unwrap();
        let h = 1e-6;
        for k in 0..b.theta.len() {
            let mut p = b.clone();
            p.theta[k] += h;
            let mut m = b.clone();
            m.theta[k] -= h;
            let fd = (p.loss_grad(&z, 1).unwrap().0 - m.loss_grad(&z, 1).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn training_reduces_loss_on_separable_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut zs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..80 {
            let y = (i % 2) as u8;
            let shift = if y == 1 { 1.5 } else { -1.5 };
            zs.push((0..5).map(|_| rng.gen_range(-1.0..1.0) + shift).collect::<Vec<f64>>());
            ys.push(y);
        }
        let settings = BottleneckSettings {
            epochs: 30,
            lr: 1e-2,
            ..BottleneckSettings::new(2)
        };
        let untrained = Bottleneck::init(5, 2, 16, 0).unwrap();
        let trained = train_bottleneck(&zs, &ys, &settings, 16, 0).unwrap();
        assert!(trained.mean_loss(&zs, &ys).unwrap() < 0.2);
        assert!(untrained.mean_loss(&zs, &ys).unwrap() > trained.mean_loss(&zs, &ys).unwrap());
        assert_eq!(trained.compress(&zs[0]).unwrap().len(), 2);
    }
}
