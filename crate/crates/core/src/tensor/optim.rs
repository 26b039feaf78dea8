//! ADAM optimizer, global-norm gradient clipping, and the warmup-cosine
//! learning-rate schedule.

use super::{shape_err, Tensor, TensorError};

/// Per-parameter first/second moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected ADAM update. Parameters without an accumulated
/// gradient are treated as having gradient zero. Per-element arithmetic runs
/// in f64 and rounds once on store.
pub fn adam_step(
    params: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TensorError> {
    if params.len() != state.m.len() {
        return Err(shape_err(format!(
            "{} params for optimizer state of {}",
            params.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (i, p) in params.iter().enumerate() {
        let grad = p.grad();
        let g = grad.as_deref().unwrap_or(&[]);
        if !g.is_empty() && g.len() != p.len() {
            return Err(shape_err(format!(
                "grad of {} values for param of {}",
                g.len(),
                p.len()
            )));
        }
        if state.m[i].len() != p.len() {
            return Err(shape_err(format!(
                "optimizer slot {i} sized {} for param of {}",
                state.m[i].len(),
                p.len()
            )));
        }
        let mut data = p.data_mut();
        for j in 0..data.len() {
            let gj = if g.is_empty() { 0.0 } else { g[j] as f64 };
            let m = state.beta1 * state.m[i][j] as f64 + (1.0 - state.beta1) * gj;
            let v = state.beta2 * state.v[i][j] as f64 + (1.0 - state.beta2) * gj * gj;
            state.m[i][j] = m as f32;
            state.v[i][j] = v as f32;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            data[j] = (data[j] as f64 - lr * m_hat / (v_hat.sqrt() + state.eps)) as f32;
        }
    }
    Ok(())
}

/// Scale all gradients by max_norm/‖g‖ when the global L2 norm exceeds
/// max_norm. Returns the pre-clip norm.
pub fn clip_global_norm(params: &[Tensor], max_norm: f64) -> f64 {
    debug_assert!(max_norm > 0.0);
    let mut sq = 0.0f64;
    for p in params {
        if let Some(g) = p.grad() {
            for &v in &g {
                sq += (v as f64) * (v as f64);
            }
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let factor = (max_norm / norm) as f32;
        for p in params {
            p.with_grad_mut(|g| {
                for v in g.iter_mut() {
                    *v *= factor;
                }
            });
        }
    }
    norm
}

/// Linear warmup from 0 to `peak_lr` over the first `warmup_fraction` of
/// steps, then cosine decay to `final_lr` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub final_lr: f64,
    pub total_steps: u64,
    pub warmup_fraction: f64,
}

impl LrSchedule {
    pub const DEFAULT_WARMUP_FRACTION: f64 = 0.10;

    pub fn new(peak_lr: f64, final_lr: f64, total_steps: u64) -> Result<Self, TensorError> {
        if !(peak_lr > 0.0 && final_lr > 0.0 && final_lr <= peak_lr) {
            return Err(shape_err(format!(
                "need 0 < final_lr <= peak_lr, got {final_lr} and {peak_lr}"
            )));
        }
        if total_steps == 0 {
            return Err(shape_err("total_steps must be positive".to_string()));
        }
        Ok(LrSchedule {
            peak_lr,
            final_lr,
            total_steps,
            warmup_fraction: Self::DEFAULT_WARMUP_FRACTION,
        })
    }

    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_fraction * self.total_steps as f64).floor() as u64
    }

    pub fn lr_at(&self, step: u64) -> Result<f64, TensorError> {
        if step > self.total_steps {
            return Err(TensorError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let warmup = self.warmup_steps();
        if step <= warmup && warmup > 0 {
            return Ok(self.peak_lr * step as f64 / warmup as f64);
        }
        let span = (self.total_steps - warmup) as f64;
        let progress = if span > 0.0 {
            (step - warmup) as f64 / span
        } else {
            1.0
        };
        let cos_factor = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        Ok(self.final_lr + (self.peak_lr - self.final_lr) * cos_factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_closed_form() {
        let p = Tensor::parameter(&[1], vec![1.0]).unwrap();
        p.with_grad_mut(|g| g[0] = 1.0);
        let mut state = AdamState::new(std::slice::from_ref(&p));
        adam_step(std::slice::from_ref(&p), &mut state, 0.1).unwrap();
        assert_eq!(state.t, 1);
        // m̂ = v̂ = 1 after bias correction, so Δ = -lr/(1 + eps)
        let expect = 1.0 - 0.1 / (1.0 + 1e-8);
        // parameter storage is f32, so compare at f32 resolution
        assert!((p.data()[0] as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn adam_zero_grad_leaves_params() {
        let p = Tensor::parameter(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut state = AdamState::new(std::slice::from_ref(&p));
        adam_step(std::slice::from_ref(&p), &mut state, 0.1).unwrap();
        assert_eq!(p.to_vec(), vec![1.0, -2.0, 0.5]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_two_steps_match_hand_unroll() {
        let p = Tensor::parameter(&[1], vec![0.0]).unwrap();
        let mut state = AdamState::new(std::slice::from_ref(&p));
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8f64, 0.05f64, 0.7f64);
        let mut expect = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2u32 {
            p.clear_grad();
            p.with_grad_mut(|gr| gr[0] = g as f32);
            adam_step(std::slice::from_ref(&p), &mut state, lr).unwrap();

            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            expect -= lr * mh / (vh.sqrt() + eps);
        }
        assert!(
            (p.data()[0] as f64 - expect).abs() < 1e-6,
            "got {} expected {expect}",
            p.data()[0]
        );
    }

    #[test]
    fn clip_scales_only_above_threshold() {
        let p = Tensor::parameter(&[2], vec![0.0, 0.0]).unwrap();
        p.with_grad_mut(|g| {
            g[0] = 0.3;
            g[1] = 0.4;
        });
        let norm = clip_global_norm(std::slice::from_ref(&p), 1.0);
        assert!((norm - 0.5).abs() < 1e-7);
        assert_eq!(p.grad().unwrap(), vec![0.3, 0.4]);

        p.clear_grad();
        p.with_grad_mut(|g| {
            g[0] = 1.2;
            g[1] = 1.6;
        });
        let norm = clip_global_norm(std::slice::from_ref(&p), 1.0);
        assert!((norm - 2.0).abs() < 1e-6);
        let g = p.grad().unwrap();
        let clipped = ((g[0] as f64).powi(2) + (g[1] as f64).powi(2)).sqrt();
        assert!((clipped - 1.0).abs() < 1e-6);

        let q = Tensor::parameter(&[2], vec![0.0, 0.0]).unwrap();
        let norm = clip_global_norm(std::slice::from_ref(&q), 1.0);
        assert_eq!(norm, 0.0);
    }

    #[test]
    fn schedule_endpoints() {
        let sched = LrSchedule::new(3e-4, 3e-5, 1000).unwrap();
        assert_eq!(sched.warmup_steps(), 100);
        assert!((sched.lr_at(0).unwrap()).abs() < 1e-12);
        assert!((sched.lr_at(100).unwrap() - 3e-4).abs() < 1e-12);
        assert!((sched.lr_at(1000).unwrap() - 3e-5).abs() < 1e-12);
        assert!(sched.lr_at(1001).is_err());
    }

    #[test]
    fn schedule_continuous_at_boundary() {
        let sched = LrSchedule::new(3e-4, 3e-5, 1000).unwrap();
        let at_end = sched.lr_at(100).unwrap();
        // Decay branch at progress 0 equals the warmup peak.
        let decay_start = sched.final_lr
            + (sched.peak_lr - sched.final_lr)
                * 0.5
                * (1.0 + (std::f64::consts::PI * 0.0).cos());
        assert!((at_end - decay_start).abs() < 1e-9);
        // Neighbor steps differ smoothly.
        let before = sched.lr_at(99).unwrap();
        let after = sched.lr_at(101).unwrap();
        assert!((at_end - before).abs() < 1e-5);
        assert!((at_end - after).abs() < 1e-5);
    }

    #[test]
    fn schedule_monotone_decay() {
        let sched = LrSchedule::new(1e-3, 1e-4, 500).unwrap();
        let mut last = sched.lr_at(sched.warmup_steps()).unwrap();
        for s in sched.warmup_steps() + 1..=500 {
            let lr = sched.lr_at(s).unwrap();
            assert!(lr <= last + 1e-15);
            last = lr;
        }
    }
}
