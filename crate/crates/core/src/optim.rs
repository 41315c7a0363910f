//! Adam with L2 weight decay folded into the gradient, and epoch-milestone
//! schedules for the learning rate and the decay factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl AdamState {
    /// Zeroed accumulators for `len` parameters, β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(len: usize) -> Self {
        Self::with_hyper(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            first: vec![0.0; len],
            second: vec![0.0; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    /// One Adam update of `params` in place.
    ///
    /// `g' = grad + weight_decay · params`, then the usual bias-corrected
    /// moment update `params -= lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "adam parameters",
                expected: self.len(),
                got: params.len(),
            });
        }
        if grad.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "adam gradient",
                expected: self.len(),
                got: grad.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let g = g + weight_decay * *p;
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// From `epoch` onward (inclusive) the value is divided by `divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub epoch: usize,
    pub divisor: f64,
}

impl Milestone {
    pub fn new(epoch: usize, divisor: f64) -> Self {
        Self { epoch, divisor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    #[serde(default)]
    pub lr_milestones: Vec<Milestone>,
    #[serde(default)]
    pub wd0: f64,
    #[serde(default)]
    pub wd_milestones: Vec<Milestone>,
}

impl TrainSchedule {
    /// Autoencoder on moving-crop image sequences: 400 epochs, batches of
    /// 100, lr 1e-5, weight decay 1e-5 divided by 10 at epochs 4 and 120.
    pub fn autoencoder_images() -> Self {
        Self {
            epochs: 400,
            batch_size: 100,
            lr0: 1e-5,
            lr_milestones: vec![],
            wd0: 1e-5,
            wd_milestones: vec![Milestone::new(4, 10.0), Milestone::new(120, 10.0)],
        }
    }

    /// Autoencoder on ROI time series: 400 epochs, batches of 6, lr 1e-5
    /// halved at epoch 200, weight decay 1e-5.
    pub fn autoencoder_series() -> Self {
        Self {
            epochs: 400,
            batch_size: 6,
            lr0: 1e-5,
            lr_milestones: vec![Milestone::new(200, 2.0)],
            wd0: 1e-5,
            wd_milestones: vec![],
        }
    }

    /// FC-LSTM: 600 epochs, batches of 6, lr 1e-3 halved at epochs 200 and
    /// 400, no weight decay.
    pub fn lstm() -> Self {
        Self {
            epochs: 600,
            batch_size: 6,
            lr0: 1e-3,
            lr_milestones: vec![Milestone::new(200, 2.0), Milestone::new(400, 2.0)],
            wd0: 0.0,
            wd_milestones: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.wd0 >= 0.0 && self.wd0.is_finite()) {
            return bad(format!("wd0 must be nonnegative, got {}", self.wd0));
        }
        for (name, list) in [("lr", &self.lr_milestones), ("wd", &self.wd_milestones)] {
            if list.windows(2).any(|w| w[0].epoch >= w[1].epoch) {
                return bad(format!("{name} milestone epochs must be strictly increasing"));
            }
            if let Some(ms) = list.iter().find(|ms| !(ms.divisor > 0.0 && ms.divisor.is_finite())) {
                return bad(format!("{name} milestone divisor must be positive, got {}", ms.divisor));
            }
        }
        Ok(())
    }

    /// `(lr, weight_decay)` in effect during `epoch`.
    pub fn at(&self, epoch: usize) -> Result<(f64, f64)> {
        if epoch >= self.epochs {
            return Err(Error::EpochOutOfRange {
                epoch,
                epochs: self.epochs,
            });
        }
        let apply = |base: f64, list: &[Milestone]| {
            list.iter()
                .filter(|ms| ms.epoch <= epoch)
                .fold(base, |v, ms| v / ms.divisor)
        };
        Ok((apply(self.lr0, &self.lr_milestones), apply(self.wd0, &self.wd_milestones)))
    }
}

pub fn schedule_at(s: &TrainSchedule, epoch: usize) -> Result<(f64, f64)> {
    s.at(epoch)
}

/// Contiguous batches of `order`, the last one possibly short.
pub(crate) fn batches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_zeroed() {
        let s = AdamState::new(5);
        assert_eq!(s.first_moment(), &[0.0; 5]);
        assert_eq!(s.second_moment(), &[0.0; 5]);
        assert_eq!(s.step_count(), 0);
        assert_eq!(s, AdamState::new(5));
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3], 0.1, 0.0).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [3.0, -0.2] {
            let mut s = AdamState::new(1);
            let mut p = vec![0.0];
            s.step(&mut p, &[g], 0.01, 0.0).unwrap();
            assert!((p[0] + 0.01 * f64::signum(g)).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn quadratic_descent_oracle() {
        // Scalar reimplementation of the update rule, run side by side.
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut m, mut v, mut q) = (0.0, 0.0, 1.0f64);
        let mut s = AdamState::new(1);
        let mut p = vec![1.0];
        let mut prev = 1.0f64;
        for t in 1..=5 {
            let g = 2.0 * q;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            q -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);

            let grad = [2.0 * p[0]];
            s.step(&mut p, &grad, lr, 0.0).unwrap();
            assert!((p[0] - q).abs() < 1e-15);
            assert!(p[0].abs() < prev.abs());
            prev = p[0];
        }
    }

    #[test]
    fn weight_decay_is_folded_into_gradient() {
        let mut a = AdamState::new(1);
        let mut b = AdamState::new(1);
        let mut pa = vec![2.0];
        let mut pb = vec![2.0];
        a.step(&mut pa, &[0.5], 0.01, 0.1).unwrap();
        b.step(&mut pb, &[0.5 + 0.1 * 2.0], 0.01, 0.0).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2);
        assert!(s.step(&mut [0.0; 3], &[0.0; 3], 0.1, 0.0).is_err());
        assert!(s.step(&mut [0.0; 2], &[0.0; 1], 0.1, 0.0).is_err());
    }

    #[test]
    fn preset_schedules() {
        let ae = TrainSchedule::autoencoder_images();
        assert_eq!(schedule_at(&ae, 0).unwrap(), (1e-5, 1e-5));
        let (lr, wd) = schedule_at(&ae, 130).unwrap();
        assert_eq!(lr, 1e-5);
        assert!((wd - 1e-7).abs() < 1e-20);
        let (_, wd) = schedule_at(&ae, 4).unwrap();
        assert!((wd - 1e-6).abs() < 1e-20);

        let lstm = TrainSchedule::lstm();
        assert_eq!(schedule_at(&lstm, 450).unwrap(), (0.00025, 0.0));
        assert_eq!(schedule_at(&lstm, 199).unwrap(), (0.001, 0.0));
        assert_eq!(schedule_at(&lstm, 200).unwrap(), (0.0005, 0.0));

        let series = TrainSchedule::autoencoder_series();
        assert_eq!(schedule_at(&series, 250).unwrap(), (5e-6, 1e-5));
        for s in [ae, lstm, series] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn schedule_epoch_out_of_range() {
        let s = TrainSchedule::lstm();
        assert!(matches!(s.at(600), Err(Error::EpochOutOfRange { .. })));
    }

    #[test]
    fn schedule_validation() {
        let mut s = TrainSchedule::lstm();
        s.batch_size = 0;
        assert!(s.validate().is_err());
        let mut s = TrainSchedule::lstm();
        s.lr0 = 0.0;
        assert!(s.validate().is_err());
        let mut s = TrainSchedule::lstm();
        s.lr_milestones = vec![Milestone::new(5, 2.0), Milestone::new(5, 2.0)];
        assert!(s.validate().is_err());
        let mut s = TrainSchedule::lstm();
        s.wd0 = -1.0;
        assert!(s.validate().is_err());
    }

    mod props {
        use super::*;
        use crate::rng::Rng;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn schedule_non_increasing(
                epochs in 1usize..300,
                a in 0usize..300,
                b in 0usize..300,
                div in 1.0f64..20.0,
            ) {
                let (lo, hi) = (a.min(b), a.max(b) + 1);
                let s = TrainSchedule {
                    epochs,
                    batch_size: 1,
                    lr0: 0.1,
                    lr_milestones: vec![Milestone::new(lo, div), Milestone::new(hi, div)],
                    wd0: 0.01,
                    wd_milestones: vec![Milestone::new(hi, div)],
                };
                s.validate().unwrap();
                let mut prev = (f64::INFINITY, f64::INFINITY);
                for e in 0..epochs {
                    let cur = s.at(e).unwrap();
                    prop_assert!(cur.0 <= prev.0 && cur.1 <= prev.1);
                    prev = cur;
                }
            }

            #[test]
            fn tiny_lr_leaves_params_and_second_moment_nonnegative(seed in any::<u64>(), steps in 1usize..20) {
                let mut rng = Rng::new(seed);
                let mut s = AdamState::new(4);
                let start: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
                let mut p = start.clone();
                for _ in 0..steps {
                    let g: Vec<f64> = (0..4).map(|_| rng.normal() * 10.0).collect();
                    s.step(&mut p, &g, 1e-18, 0.0).unwrap();
                    prop_assert!(s.second_moment().iter().all(|v| *v >= 0.0));
                }
                prop_assert!(p.iter().zip(&start).all(|(a, b)| (a - b).abs() < 1e-15));
            }
        }
    }
}
