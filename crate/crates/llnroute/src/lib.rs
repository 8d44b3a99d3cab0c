//! Deterministic discrete-event simulation of reactive mesh routing for
//! AMI-style metering traffic.
//!
//! Two protocol state machines — LOADng ([`loadng`]) and an AODV baseline
//! ([`aodv`]) — run over a seeded unit-disk radio with distance loss and an
//! abstract contention MAC ([`netsim`]). The traffic model ([`traffic`])
//! drives periodic upward meter reports with application acks and Poisson
//! downward configuration pushes; [`metrics`] accounts delivery ratio,
//! end-to-end delay, and control overhead in packets and bytes. Scenarios
//! are flat-key text files ([`scenario`]); [`sweep`] executes parameter
//! sweeps over seeds and emits CSV/JSON tables.
//!
//! Identical (configuration, seed) pairs produce byte-identical outputs:
//! time is fixed-point microseconds, every random draw comes from a
//! per-purpose stream keyed by the master seed, and all iteration happens
//! over ordered containers.

pub mod aodv;
pub mod loadng;
pub mod metrics;
pub mod netsim;
pub mod router;
pub mod scenario;
pub mod sweep;
pub mod time;
pub mod traffic;
pub mod wire;

pub use router::Protocol;
pub use scenario::{parse_config, parse_config_str, ScenarioConfig};
pub use sweep::{emit_csv, emit_json, parse_json, run_single, run_sweep, ResultRow};
