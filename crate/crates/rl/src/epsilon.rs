use serde::{Deserialize, Serialize};

/// Linear exploration decay from `start` to `floor` over `decay_steps`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub floor: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::evaluation()
    }
}

impl EpsilonSchedule {
    /// 1.0 decaying to 0.1 over 50,000 steps (caching-strategy evaluation).
    pub fn evaluation() -> Self {
        Self {
            start: 1.0,
            floor: 0.1,
            decay_steps: 50_000,
        }
    }

    /// 1.0 decaying to 0.2 over 250,000 steps (long-run hyperparameter preset).
    pub fn long_run() -> Self {
        Self {
            start: 1.0,
            floor: 0.2,
            decay_steps: 250_000,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.floor;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.floor - self.start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn starts_at_one() {
        assert_eq!(EpsilonSchedule::evaluation().value(0), 1.0);
    }

    #[test]
    fn clamps_to_floor() {
        let s = EpsilonSchedule::evaluation();
        assert_eq!(s.value(50_000), 0.1);
        assert_eq!(s.value(1_000_000), 0.1);
        assert_eq!(EpsilonSchedule::long_run().value(250_000), 0.2);
    }

    #[test]
    fn linear_midpoint() {
        assert!((EpsilonSchedule::evaluation().value(25_000) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn zero_decay_is_floor() {
        let s = EpsilonSchedule {
            start: 1.0,
            floor: 0.3,
            decay_steps: 0,
        };
        assert_eq!(s.value(0), 0.3);
    }

    proptest! {
        #[test]
        fn non_increasing(a in 0u64..200_000, b in 0u64..200_000) {
            let s = EpsilonSchedule::evaluation();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.value(lo) >= s.value(hi));
            prop_assert!(s.value(hi) >= s.floor);
        }
    }
}
