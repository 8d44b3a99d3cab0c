//! Bidirectional AMI traffic patterns.
//!
//! Upward (MP2P): every client emits a fixed-size meter report to the sink
//! on a fixed period, phase-shifted by a uniform start jitter. Downward
//! (P2MP): the sink acknowledges each received report at the application
//! layer (generated by the engine on delivery) and pushes configuration
//! packets to uniformly chosen clients as a Poisson process.

use crate::time::SimTime;
use crate::wire::{Address, DataKind};
use rand::Rng;
use rand_distr::{Distribution, Exp};

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TrafficProfile {
    /// Meter report period, seconds.
    pub meter_period_s: f64,
    /// Meter report payload, octets.
    pub meter_payload: u32,
    /// Application-level ack of each delivered report.
    pub app_ack_enabled: bool,
    /// Ack payload, octets.
    pub ack_payload: u32,
    /// Mean interval between configuration pushes, seconds.
    pub config_mean_interval_s: f64,
    /// Configuration payload, octets.
    pub config_payload: u32,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        TrafficProfile {
            meter_period_s: 60.0,
            meter_payload: 512,
            app_ack_enabled: true,
            ack_payload: 16,
            config_mean_interval_s: 600.0,
            config_payload: 64,
        }
    }
}

/// One application packet handed to the network layer at `at`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Arrival {
    pub at: SimTime,
    pub src: Address,
    pub dst: Address,
    pub kind: DataKind,
    pub payload: u32,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrafficError {
    #[error("traffic pattern requires at least one client node")]
    NoClients,
}

/// Periodic meter reports from every client to the sink, first emission at
/// a uniform jitter within one period.
pub fn schedule_meter_reports<R: Rng>(
    profile: &TrafficProfile,
    clients: &[Address],
    sink: Address,
    duration_s: f64,
    rng: &mut R,
) -> Result<Vec<Arrival>, TrafficError> {
    if clients.is_empty() {
        return Err(TrafficError::NoClients);
    }
    let period = profile.meter_period_s;
    let mut arrivals = Vec::new();
    for &client in clients {
        let mut t = rng.gen_range(0.0..period);
        while t < duration_s {
            arrivals.push(Arrival {
                at: SimTime::from_secs_f64(t),
                src: client,
                dst: sink,
                kind: DataKind::MeterReport,
                payload: profile.meter_payload,
            });
            t += period;
        }
    }
    Ok(arrivals)
}

/// Poisson configuration pushes from the sink to uniformly chosen clients.
pub fn schedule_config_pushes<R: Rng>(
    profile: &TrafficProfile,
    clients: &[Address],
    sink: Address,
    duration_s: f64,
    rng: &mut R,
) -> Result<Vec<Arrival>, TrafficError> {
    if clients.is_empty() {
        return Err(TrafficError::NoClients);
    }
    let exp = Exp::new(1.0 / profile.config_mean_interval_s)
        .expect("validated positive mean interval");
    let mut arrivals = Vec::new();
    let mut t: f64 = exp.sample(rng);
    while t < duration_s {
        let target = clients[rng.gen_range(0..clients.len())];
        arrivals.push(Arrival {
            at: SimTime::from_secs_f64(t),
            src: sink,
            dst: target,
            kind: DataKind::Config,
            payload: profile.config_payload,
        });
        t += exp.sample(rng);
    }
    Ok(arrivals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn addrs(n: u64) -> Vec<Address> {
        (2..2 + n).map(Address::new).collect()
    }

    const SINK: Address = Address::new(1);

    #[test]
    fn one_client_five_reports_in_300s() {
        let profile = TrafficProfile::default();
        let arrivals =
            schedule_meter_reports(&profile, &addrs(1), SINK, 300.0, &mut rng(1)).unwrap();
        assert_eq!(arrivals.len(), 5);
        for pair in arrivals.windows(2) {
            assert_eq!(pair[1].at - pair[0].at, 60_000_000, "exact period spacing");
        }
        assert!(arrivals[0].at < SimTime::from_secs(60));
    }

    #[test]
    fn jittered_starts_are_distinct_across_clients() {
        let profile = TrafficProfile::default();
        let clients = addrs(25);
        let arrivals =
            schedule_meter_reports(&profile, &clients, SINK, 600.0, &mut rng(1)).unwrap();
        let mut firsts: Vec<SimTime> = clients
            .iter()
            .map(|c| arrivals.iter().find(|a| a.src == *c).unwrap().at)
            .collect();
        firsts.sort();
        firsts.dedup();
        assert_eq!(firsts.len(), 25, "no two first emissions collide for seed 1");
    }

    #[test]
    fn config_pushes_follow_exponential_law() {
        let profile = TrafficProfile::default();
        // Long horizon so the sample is large: 10^4 arrivals at mean 600 s
        // need ~70 simulated days.
        let horizon = 600.0 * 10_500.0;
        let arrivals =
            schedule_config_pushes(&profile, &addrs(10), SINK, horizon, &mut rng(7)).unwrap();
        assert!(arrivals.len() >= 10_000, "got {}", arrivals.len());
        let mut prev = 0.0;
        let mut sum = 0.0;
        for a in &arrivals {
            let at = a.at.as_secs_f64();
            sum += at - prev;
            prev = at;
        }
        let mean = sum / arrivals.len() as f64;
        assert!((mean - 600.0).abs() <= 10.0, "empirical mean {mean}");
    }

    #[test]
    fn schedules_are_seed_deterministic() {
        let profile = TrafficProfile::default();
        let clients = addrs(5);
        let a = schedule_config_pushes(&profile, &clients, SINK, 36_000.0, &mut rng(3)).unwrap();
        let b = schedule_config_pushes(&profile, &clients, SINK, 36_000.0, &mut rng(3)).unwrap();
        assert_eq!(a, b);
        let c = schedule_meter_reports(&profile, &clients, SINK, 3_600.0, &mut rng(4)).unwrap();
        let d = schedule_meter_reports(&profile, &clients, SINK, 3_600.0, &mut rng(4)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn zero_clients_is_an_error() {
        let profile = TrafficProfile::default();
        assert_eq!(
            schedule_config_pushes(&profile, &[], SINK, 100.0, &mut rng(1)).unwrap_err(),
            TrafficError::NoClients
        );
        assert_eq!(
            schedule_meter_reports(&profile, &[], SINK, 100.0, &mut rng(1)).unwrap_err(),
            TrafficError::NoClients
        );
    }

    #[test]
    fn config_targets_only_listed_clients() {
        let profile = TrafficProfile::default();
        let clients = addrs(3);
        let arrivals =
            schedule_config_pushes(&profile, &clients, SINK, 100_000.0, &mut rng(9)).unwrap();
        assert!(!arrivals.is_empty());
        for a in &arrivals {
            assert_eq!(a.src, SINK);
            assert!(clients.contains(&a.dst));
            assert_eq!(a.kind, DataKind::Config);
            assert_eq!(a.payload, 64);
        }
    }
}
