//! Abstract contention MAC: per-attempt delay with jitter, a bounded retry
//! budget for unicast frames, and random backoff between retries. Duty
//! cycling and explicit collisions are not modeled; contention effects are
//! folded into the jitter.

use rand::Rng;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct MacModel {
    /// Fixed per-attempt transmission delay (microseconds).
    pub base_delay_us: u64,
    /// Uniform jitter added per attempt: U(0, jitter_us).
    pub jitter_us: u64,
    /// Unicast retries after the first attempt.
    pub retries: u32,
    /// Uniform backoff before each retry: U(0, backoff_us).
    pub backoff_us: u64,
}

impl Default for MacModel {
    fn default() -> Self {
        MacModel {
            base_delay_us: 8_000,
            jitter_us: 8_000,
            retries: 3,
            backoff_us: 20_000,
        }
    }
}

/// Result of driving one unicast frame through the MAC.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct UnicastOutcome {
    /// Time spent on attempts and backoffs, success or not.
    pub elapsed_us: u64,
    pub delivered: bool,
}

impl MacModel {
    pub fn attempt_delay<R: Rng>(&self, rng: &mut R) -> u64 {
        self.base_delay_us + sample_uniform(self.jitter_us, rng)
    }

    fn retry_backoff<R: Rng>(&self, rng: &mut R) -> u64 {
        sample_uniform(self.backoff_us, rng)
    }

    /// Runs attempts against a fixed per-attempt success probability until
    /// delivery or the retry budget is spent.
    pub fn run_unicast<R: Rng>(&self, p_success: f64, rng: &mut R) -> UnicastOutcome {
        let mut elapsed_us = 0;
        for attempt in 0..=self.retries {
            elapsed_us += self.attempt_delay(rng);
            let delivered = if p_success >= 1.0 {
                true
            } else if p_success <= 0.0 {
                false
            } else {
                rng.gen_bool(p_success)
            };
            if delivered {
                return UnicastOutcome { elapsed_us, delivered: true };
            }
            if attempt < self.retries {
                elapsed_us += self.retry_backoff(rng);
            }
        }
        UnicastOutcome { elapsed_us, delivered: false }
    }
}

fn sample_uniform<R: Rng>(bound_us: u64, rng: &mut R) -> u64 {
    if bound_us == 0 {
        0
    } else {
        rng.gen_range(0..bound_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delay_within_jitter_window() {
        let mac = MacModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let d = mac.attempt_delay(&mut rng);
            assert!((8_000..16_000).contains(&d));
        }
    }

    #[test]
    fn unicast_exhausts_retry_budget_on_dead_link() {
        let mac = MacModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let outcome = mac.run_unicast(0.0, &mut rng);
        assert!(!outcome.delivered);
        // 4 attempts of at least base delay each.
        assert!(outcome.elapsed_us >= 4 * 8_000);
    }

    #[test]
    fn unicast_succeeds_immediately_on_perfect_link() {
        let mac = MacModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let outcome = mac.run_unicast(1.0, &mut rng);
        assert!(outcome.delivered);
        assert!(outcome.elapsed_us < 16_000);
    }

    #[test]
    fn retry_budget_raises_delivery_rate() {
        let mac = MacModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 20_000;
        let delivered = (0..trials)
            .filter(|_| mac.run_unicast(0.4, &mut rng).delivered)
            .count();
        let rate = delivered as f64 / trials as f64;
        // 1 - 0.6^4 = 0.8704 with four attempts.
        assert!((rate - 0.8704).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn zero_jitter_is_constant_delay() {
        let mac = MacModel { jitter_us: 0, ..MacModel::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(mac.attempt_delay(&mut rng), 8_000);
    }
}
