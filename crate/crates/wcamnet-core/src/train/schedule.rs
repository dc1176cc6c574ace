//! Learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    CosineWarmRestart,
    StepDecay,
}

/// Learning-rate schedule parameters. Cosine restarts every `period_epochs`;
/// step decay multiplies by `decay_factor` every `step_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub period_epochs: usize,
    pub step_epochs: usize,
    pub decay_factor: f64,
    pub min_lr: f64,
}

impl ScheduleSpec {
    pub fn cosine_warm_restart() -> Self {
        Self {
            kind: ScheduleKind::CosineWarmRestart,
            period_epochs: 5,
            step_epochs: 10,
            decay_factor: 0.1,
            min_lr: 0.0,
        }
    }

    pub fn step_decay() -> Self {
        Self {
            kind: ScheduleKind::StepDecay,
            ..Self::cosine_warm_restart()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_epochs < 1 || self.step_epochs < 1 {
            return Err(CoreError::config(
                "schedule period and step must be at least one epoch",
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(CoreError::config(format!(
                "decay factor must lie in (0, 1), got {}",
                self.decay_factor
            )));
        }
        if !self.min_lr.is_finite() || self.min_lr < 0.0 {
            return Err(CoreError::config(format!(
                "min_lr must be finite and non-negative, got {}",
                self.min_lr
            )));
        }
        Ok(())
    }

    /// Learning rate at (possibly fractional) epoch `t`.
    ///
    /// Cosine: `min + (base - min) * (1 + cos(pi * (t mod P) / P)) / 2`,
    /// exactly `base` at every restart boundary. Step: `base * d^floor(t/S)`.
    pub fn lr_at(&self, base_lr: f64, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::CosineWarmRestart => {
                let period = self.period_epochs as f64;
                let tp = t.rem_euclid(period);
                // restart boundaries return base exactly; cos(0) rounding
                // never enters
                if tp == 0.0 {
                    return base_lr;
                }
                self.min_lr
                    + (base_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * tp / period).cos())
                        / 2.0
            }
            ScheduleKind::StepDecay => {
                let k = (t / self.step_epochs as f64).floor() as i32;
                base_lr * self.decay_factor.powi(k)
            }
        }
    }
}
