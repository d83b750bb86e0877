//! Adam with bias correction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Gradients, Model};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_model(model: &Model<T>) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
        Self::new(&sizes)
    }

    /// One update. Nothing is modified if any gradient is non-finite.
    pub fn update(&mut self, params: &mut [&mut [T]], grads: &[&[T]], names: &[&str], cfg: &AdamConfig) -> Result<()> {
        let shapes_ok = params.len() == grads.len()
            && params.len() == self.first.len()
            && params.iter().zip(grads).zip(&self.first).all(|((p, g), m)| p.len() == g.len() && g.len() == m.len());
        if !shapes_ok {
            return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
        }
        if let Some(i) = grads.iter().position(|g| g.iter().any(|x| !x.is_finite())) {
            let tensor = names.get(i).map_or_else(|| alloc::format!("#{i}"), |n| (*n).into());
            return Err(Error::NonFiniteGradient { tensor });
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let bc1 = T::lit(1.0 - libm::pow(cfg.beta1, t as f64));
        let bc2 = T::lit(1.0 - libm::pow(cfg.beta2, t as f64));
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + c1 * g[i];
                v[i] = b2 * v[i] + c2 * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step of `grads` to every tensor of `model`.
pub fn adam_step<T: Real>(model: &mut Model<T>, grads: &Gradients<T>, state: &mut AdamState<T>, cfg: &AdamConfig) -> Result<()> {
    let g = grads.tensors();
    let names: Vec<&str> = g.iter().map(|t| t.name.as_str()).collect();
    let slices: Vec<&[T]> = g.iter().map(|t| t.data).collect();
    let mut params = model.tensors_mut();
    state.update(&mut params, &slices, &names, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::<f64>::new(&[1]);
        let mut p = [0.0];
        let cfg = AdamConfig { learning_rate: 0.01, ..AdamConfig::default() };
        s.update(&mut [&mut p[..]], &[&[1.0]], &["x"], &cfg).unwrap();
        assert!((p[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::<f64>::new(&[3]);
        let mut p = [1.0, -2.0, 3.5];
        s.update(&mut [&mut p[..]], &[&[0.0; 3]], &["x"], &AdamConfig::default()).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn nan_gradient_rejected_without_side_effects() {
        let mut s = AdamState::<f64>::new(&[1, 2]);
        let mut a = [1.0];
        let mut b = [2.0, 3.0];
        let before = s.clone();
        let err = s
            .update(&mut [&mut a[..], &mut b[..]], &[&[0.5], &[f64::NAN, 0.0]], &["a", "b"], &AdamConfig::default())
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { tensor: "b".into() });
        assert_eq!((a, b), ([1.0], [2.0, 3.0]));
        assert_eq!(s, before);
    }

    #[test]
    fn second_moments_stay_non_negative() {
        let mut s = AdamState::<f64>::new(&[2]);
        let mut p = [0.0, 0.0];
        for k in 0..20 {
            let g = [(k as f64).sin(), -(k as f64)];
            s.update(&mut [&mut p[..]], &[&g], &["x"], &AdamConfig::default()).unwrap();
        }
        assert!(s.second[0].iter().all(|&v| v >= 0.0));
    }
}
