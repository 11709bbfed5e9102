//! Adam and plain SGD parameter updates.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for an ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

fn check_pairs(pairs: &[(&mut Tensor, &Tensor)], expected: Option<&[Tensor]>) -> Result<()> {
    if let Some(moments) = expected {
        if moments.len() != pairs.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} tensors, got {}",
                moments.len(),
                pairs.len()
            )));
        }
        for (i, (m, (p, _))) in moments.iter().zip(pairs).enumerate() {
            if m.shape() != p.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {i}: optimizer state {:?} vs parameter {:?}",
                    m.shape(),
                    p.shape()
                )));
            }
        }
    }
    for (i, (p, g)) in pairs.iter().enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter {i}: gradient {:?} vs parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    Ok(())
}

impl AdamState {
    /// Zeroed moments for parameters of the given shapes, `t = 0`.
    pub fn new<'a>(
        config: AdamConfig,
        shapes: impl IntoIterator<Item = &'a [usize]>,
    ) -> Result<Self> {
        let m = shapes
            .into_iter()
            .map(Tensor::zeros)
            .collect::<Result<Vec<_>>>()?;
        Ok(AdamState {
            config,
            t: 0,
            v: m.clone(),
            m,
        })
    }

    pub fn from_parts(config: AdamConfig, t: u64, m: Vec<Tensor>, v: Vec<Tensor>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::ShapeMismatch(
                "first and second moment lists disagree".into(),
            ));
        }
        Ok(AdamState { config, t, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// One Adam update over every `(parameter, gradient)` pair, in tracking order.
    pub fn step(&mut self, mut pairs: Vec<(&mut Tensor, &Tensor)>) -> Result<()> {
        check_pairs(&pairs, Some(&self.m))?;
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - (beta1 as f64).powi(t);
        let c2 = 1.0 - (beta2 as f64).powi(t);
        let (c1, c2) = (c1 as f32, c2 as f32);
        for ((param, grad), (m, v)) in pairs.iter_mut().zip(self.m.iter_mut().zip(&mut self.v)) {
            for (((p, &g), m), v) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `p <- p - lr * g` for every pair.
pub fn sgd_step(mut pairs: Vec<(&mut Tensor, &Tensor)>, lr: f32) -> Result<()> {
    check_pairs(&pairs, None)?;
    for (param, grad) in pairs.iter_mut() {
        for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p -= lr * g;
        }
    }
    Ok(())
}
