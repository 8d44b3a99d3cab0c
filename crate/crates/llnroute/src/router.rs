//! Shared vocabulary between the two router state machines and the engine.
//!
//! Routers perform no I/O. Every handler returns a list of [`Effect`]s for
//! the host to carry out, so the state machines stay pure and replayable.

use crate::time::SimTime;
use crate::wire::{Address, ControlMessage, DataPacket, SequenceNumber};
use std::fmt;

/// Which routing protocol a node (or scenario) runs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Protocol {
    Loadng,
    Aodv,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Loadng, Protocol::Aodv];

    pub fn label(self) -> &'static str {
        match self {
            Protocol::Loadng => "loadng",
            Protocol::Aodv => "aodv",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loadng" => Ok(Protocol::Loadng),
            "aodv" => Ok(Protocol::Aodv),
            other => Err(format!("unknown protocol `{other}` (expected loadng or aodv)")),
        }
    }
}

/// Why a data packet was abandoned.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DropReason {
    /// Discovery buffer at capacity; oldest packet evicted.
    BufferFull,
    /// Route discovery exhausted its retries.
    DiscoveryFailed,
    /// Transit router had no usable route and no way to recover one.
    NoRoute,
    /// Link-layer delivery failed after the MAC retry budget.
    LinkFailure,
    /// Forwarding safety valve tripped (too many hops).
    HopLimit,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::BufferFull,
        DropReason::DiscoveryFailed,
        DropReason::NoRoute,
        DropReason::LinkFailure,
        DropReason::HopLimit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DropReason::BufferFull => "buffer_full",
            DropReason::DiscoveryFailed => "discovery_failed",
            DropReason::NoRoute => "no_route",
            DropReason::LinkFailure => "link_failure",
            DropReason::HopLimit => "hop_limit",
        }
    }
}

/// Timer classes a router may arm. The engine feeds them back through
/// `handle_timer` when they fire.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TimerKind {
    /// Re-check the pending discovery toward this destination.
    DiscoveryRetry(Address),
    /// Sweep the pending-acknowledgment set for missed RREP-ACK deadlines.
    PendingAckSweep,
}

/// One externally visible action requested by a router.
#[derive(Clone, PartialEq, Debug)]
pub enum Effect {
    BroadcastControl(ControlMessage),
    UnicastControl(ControlMessage, Address),
    UnicastData(DataPacket, Address),
    StartTimer(TimerKind, SimTime),
    DropData(DataPacket, DropReason),
    /// Packet addressed to this router; hand it to the application.
    DeliverLocal(DataPacket),
}

/// Ordered list of effects produced by one handler invocation.
pub type RouterActions = Vec<Effect>;

/// Timer and buffering constants shared by both protocols so that overhead
/// differences isolate the discovery/reply design rather than tuning.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ProtocolTimers {
    /// Route lifetime, refreshed on any use (microseconds).
    pub route_hold_us: u64,
    /// How long a neighbor stays blacklisted after a missed RREP-ACK.
    pub blacklist_us: u64,
    /// RREP-ACK wait before declaring the link unidirectional.
    pub ack_deadline_us: u64,
    /// Route-request retries after the initial attempt.
    pub rreq_retries: u32,
    /// First retry backoff; doubles on each subsequent retry.
    pub rreq_backoff_us: u64,
    /// Hop budget stamped into originated control messages.
    pub hop_limit: u8,
    /// Data packets buffered per pending discovery; oldest dropped first.
    pub buffer_cap: usize,
    /// How long a request-dedup entry stays live.
    pub dedup_ttl_us: u64,
}

impl Default for ProtocolTimers {
    fn default() -> Self {
        ProtocolTimers {
            route_hold_us: 100_000_000,
            blacklist_us: 30_000_000,
            ack_deadline_us: 1_000_000,
            rreq_retries: 3,
            rreq_backoff_us: 2_000_000,
            hop_limit: 32,
            buffer_cap: 8,
            dedup_ttl_us: 30_000_000,
        }
    }
}

/// A routing-table row in protocol-neutral form, for dumps and assertions.
#[derive(Clone, PartialEq, Debug)]
pub struct RouteView {
    pub destination: Address,
    pub next_hop: Address,
    pub metric: u16,
    pub seq: SequenceNumber,
    pub valid_until: SimTime,
    pub valid: bool,
    /// LOADng only; AODV rows report `None`.
    pub bidirectional: Option<bool>,
}

impl fmt::Display for RouteView {
    /// One dump line: `dest next_hop metric seq valid_until bidir`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bidir = match self.bidirectional {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        write!(
            f,
            "{} {} {} {} {} {}",
            self.destination,
            self.next_hop,
            self.metric,
            self.seq.value(),
            self.valid_until,
            bidir
        )
    }
}

/// Counters for events the metrics pipeline wants but that live naturally
/// inside a router.
#[derive(Clone, Copy, PartialEq, Eq, Default, Debug)]
pub struct RouterCounters {
    /// RREPs discarded because no reverse route existed.
    pub rrep_orphaned: u64,
    /// RERRs suppressed because no path back to the data source existed.
    pub rerr_unroutable: u64,
    /// Neighbors blacklisted after missed RREP-ACK deadlines.
    pub blacklist_adds: u64,
}

/// Candidate-vs-incumbent route preference shared by both protocols:
/// fresher sequence number wins; equal sequence numbers fall back to the
/// lower metric; equal on both keeps the incumbent.
pub fn route_candidate_wins(
    cand_seq: SequenceNumber,
    cand_metric: u16,
    cur_seq: SequenceNumber,
    cur_metric: u16,
) -> bool {
    cand_seq.is_newer_than(cur_seq) || (cand_seq == cur_seq && cand_metric < cur_metric)
}
