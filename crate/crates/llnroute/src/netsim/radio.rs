//! Unit-disk radio with optional distance-dependent loss.
//!
//! Reception succeeds with probability `base_success * (1 - (d/R)^alpha)`
//! inside the communication range and never beyond it. Disabling
//! `distance_loss` gives the ideal unit-disk model used by the lossless
//! correctness scenarios.

use rand::Rng;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RadioModel {
    /// Communication range R in meters.
    pub range_m: f64,
    /// Loss exponent alpha.
    pub alpha: f64,
    /// Success probability as d approaches 0.
    pub base_success: f64,
    /// When false, every in-range reception succeeds with `base_success`.
    pub distance_loss: bool,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            range_m: 150.0,
            alpha: 2.0,
            base_success: 1.0,
            distance_loss: true,
        }
    }
}

impl RadioModel {
    /// Ideal unit disk: reliable inside the range, silent beyond it.
    pub fn ideal(range_m: f64) -> Self {
        RadioModel {
            range_m,
            alpha: 2.0,
            base_success: 1.0,
            distance_loss: false,
        }
    }

    /// Reception probability at distance `d` meters.
    pub fn p_recv(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0);
        if d > self.range_m {
            return 0.0;
        }
        if !self.distance_loss {
            return self.base_success;
        }
        let p = self.base_success * (1.0 - (d / self.range_m).powf(self.alpha));
        p.clamp(0.0, 1.0)
    }

    /// One Bernoulli reception draw at distance `d`.
    pub fn sample_delivery<R: Rng>(&self, d: f64, rng: &mut R) -> bool {
        let p = self.p_recv(d);
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            rng.gen_bool(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_values() {
        let radio = RadioModel::default();
        assert_eq!(radio.p_recv(0.0), 1.0);
        assert_eq!(radio.p_recv(150.0), 0.0);
        assert_eq!(radio.p_recv(151.0), 0.0);
        assert_eq!(radio.p_recv(75.0), 0.75);
    }

    #[test]
    fn monotone_non_increasing_in_distance() {
        let radio = RadioModel::default();
        let mut last = 1.0f64;
        for step in 0..=300 {
            let p = radio.p_recv(step as f64);
            assert!(p <= last + 1e-12, "p_recv must not increase with distance");
            last = p;
        }
    }

    #[test]
    fn ideal_model_is_reliable_in_range() {
        let radio = RadioModel::ideal(150.0);
        assert_eq!(radio.p_recv(149.9), 1.0);
        assert_eq!(radio.p_recv(150.1), 0.0);
    }

    #[test]
    fn monte_carlo_matches_p_recv_at_75m() {
        let radio = RadioModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let successes = (0..trials)
            .filter(|_| radio.sample_delivery(75.0, &mut rng))
            .count();
        let empirical = successes as f64 / trials as f64;
        assert!(
            (empirical - 0.75).abs() <= 0.02,
            "empirical success {empirical} outside 0.75 +/- 0.02"
        );
    }
}
