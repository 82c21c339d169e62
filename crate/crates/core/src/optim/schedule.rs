use std::f64::consts::PI;

use super::{OptimError, Result};

/// Learning-rate schedule, indexed from `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant {
        lr: f64,
    },
    /// Linear ramp `max_lr·t/warmup_steps`, then cosine decay to `min_lr`
    /// at `total_steps`.
    CosineWarmup {
        max_lr: f64,
        min_lr: f64,
        warmup_steps: u64,
        total_steps: u64,
    },
    /// `η_t = (s + t)^(-2/3)` paired with momentum `β_{t+1} = 1 − 2·η_t`.
    Theory {
        s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValue {
    pub eta: f64,
    /// Populated for [`Schedule::Theory`] only.
    pub beta_next: Option<f64>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { lr } if lr >= 0.0 && lr.is_finite() => Ok(()),
            Schedule::Constant { lr } => Err(OptimError::Schedule(format!("invalid lr {lr}"))),
            Schedule::CosineWarmup {
                max_lr,
                min_lr,
                warmup_steps,
                total_steps,
            } => {
                if !(max_lr >= 0.0 && min_lr >= 0.0 && max_lr.is_finite() && min_lr.is_finite()) {
                    return Err(OptimError::Schedule("rates must be non-negative".into()));
                }
                if warmup_steps >= total_steps {
                    return Err(OptimError::Schedule(format!(
                        "warmup_steps ({warmup_steps}) must be below total_steps ({total_steps})"
                    )));
                }
                Ok(())
            }
            Schedule::Theory { s } if s >= 2.0 => Ok(()),
            Schedule::Theory { s } => Err(OptimError::Schedule(format!("theory schedule needs s >= 2, got {s}"))),
        }
    }

    pub fn eval(&self, t: u64) -> Result<ScheduleValue> {
        if t == 0 {
            return Err(OptimError::Schedule("steps are numbered from 1".into()));
        }
        self.validate()?;
        let eta = match *self {
            Schedule::Constant { lr } => lr,
            Schedule::CosineWarmup {
                max_lr,
                min_lr,
                warmup_steps,
                total_steps,
            } => {
                if t > total_steps {
                    return Err(OptimError::Schedule(format!(
                        "step {t} is past total_steps {total_steps}"
                    )));
                }
                if t <= warmup_steps {
                    max_lr * t as f64 / warmup_steps as f64
                } else {
                    let progress = (t - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
                    min_lr + 0.5 * (max_lr - min_lr) * (1.0 + (PI * progress).cos())
                }
            }
            Schedule::Theory { s } => theory_eta(s, t),
        };
        let beta_next = match self {
            Schedule::Theory { .. } => Some(1.0 - 2.0 * eta),
            _ => None,
        };
        Ok(ScheduleValue { eta, beta_next })
    }
}

fn theory_eta(s: f64, t: u64) -> f64 {
    (s + t as f64).powf(-2.0 / 3.0)
}

/// Momentum used at step `t` under the theory schedule: `β_t = 1 − 2·η_{t−1}`.
///
/// `η_0 = s^(-2/3)` may exceed 1/2 for small `s`; the result is clamped to
/// `[0, 1)`.
pub fn theory_beta(s: f64, t: u64) -> f64 {
    let eta_prev = (s + t as f64 - 1.0).powf(-2.0 / 3.0);
    (1.0 - 2.0 * eta_prev).clamp(0.0, 1.0 - f64::EPSILON)
}

/// Outcome of [`verify_schedule_lemma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub holds: bool,
    /// `min_t √η_t − (1/η_t − 1/η_{t−1})`.
    pub min_slack: f64,
    pub worst_t: u64,
}

/// Checks `1/η_t − 1/η_{t−1} ≤ √η_t` for `1 ≤ t ≤ horizon` with
/// `η_t = (s + t)^(-2/3)`.
pub fn verify_schedule_lemma(s: u64, horizon: u64) -> LemmaCheck {
    let mut min_slack = f64::INFINITY;
    let mut worst_t = 1;
    for t in 1..=horizon {
        let a = (s + t) as f64;
        let b = a - 1.0;
        // a^(2/3) − b^(2/3) = (a² − b²) / (x² + x·y + y²), x = a^(2/3), y = b^(2/3);
        // avoids cancellation for large a.
        let x = a.powf(2.0 / 3.0);
        let y = b.powf(2.0 / 3.0);
        let diff = (a + b) / (x * x + x * y + y * y);
        let slack = a.powf(-1.0 / 3.0) - diff;
        if slack < min_slack {
            min_slack = slack;
            worst_t = t;
        }
    }
    LemmaCheck {
        holds: min_slack >= 0.0,
        min_slack,
        worst_t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_first_step() {
        let v = Schedule::Theory { s: 2.0 }.eval(1).unwrap();
        assert!((v.eta - 3f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!((v.eta - 0.480750).abs() < 5e-7);
        assert!((v.beta_next.unwrap() - 0.038500).abs() < 5e-7);
    }

    #[test]
    fn cosine_warmup_midpoint_and_peak() {
        let s = Schedule::CosineWarmup {
            max_lr: 6e-3,
            min_lr: 3e-5,
            warmup_steps: 2000,
            total_steps: 100_000,
        };
        assert!((s.eval(1000).unwrap().eta - 3e-3).abs() < 1e-18);
        assert_eq!(s.eval(2000).unwrap().eta, 6e-3);
        assert!((s.eval(100_000).unwrap().eta - 3e-5).abs() < 1e-18);
        assert!(s.eval(100_001).is_err());
        assert_eq!(s.eval(1000).unwrap().beta_next, None);
        // halfway through the decay
        assert!((s.eval(51_000).unwrap().eta - (3e-5 + 0.5 * (6e-3 - 3e-5))).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule() {
        assert_eq!(Schedule::Constant { lr: 0.1 }.eval(12345).unwrap().eta, 0.1);
    }

    #[test]
    fn invalid_schedules() {
        assert!(Schedule::Theory { s: 1.0 }.validate().is_err());
        assert!(Schedule::Constant { lr: 1.0 }.eval(0).is_err());
        let bad = Schedule::CosineWarmup {
            max_lr: 1.0,
            min_lr: 0.0,
            warmup_steps: 10,
            total_steps: 10,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn theory_schedule_keeps_beta_in_range() {
        for s in [2.0, 3.0, 4.0, 100.0] {
            for t in 1..5000 {
                let v = Schedule::Theory { s }.eval(t).unwrap();
                assert!(v.eta <= 0.5);
                let b = v.beta_next.unwrap();
                assert!((0.0..1.0).contains(&b));
            }
        }
    }

    #[test]
    fn theory_beta_follows_previous_eta() {
        let s = 4.0;
        for t in 2..100 {
            let prev = Schedule::Theory { s }.eval(t - 1).unwrap().beta_next.unwrap();
            assert!((theory_beta(s, t) - prev).abs() < 1e-15);
        }
        assert_eq!(theory_beta(2.0, 1), 0.0);
    }

    #[test]
    fn lemma_single_step() {
        let c = verify_schedule_lemma(2, 1);
        assert!(c.holds);
        let want = 3f64.powf(-1.0 / 3.0) - (3f64.powf(2.0 / 3.0) - 2f64.powf(2.0 / 3.0));
        assert!((c.min_slack - want).abs() < 1e-14);
        assert!((c.min_slack - 0.20070).abs() < 5e-5);
    }

    #[test]
    fn lemma_long_horizons() {
        assert!(verify_schedule_lemma(100, 10_000).holds);
        let c = verify_schedule_lemma(1, 1_000_000);
        assert!(c.holds && c.min_slack > 0.0);
    }
}
