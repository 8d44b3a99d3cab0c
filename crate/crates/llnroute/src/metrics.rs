//! Per-run accounting: PDR, end-to-end delay, control overhead, drops.
//!
//! Every data packet id is tracked from creation to exactly one terminal
//! event (delivered or dropped); anything else is an accounting bug and
//! aborts the run. Control overhead counts one entry per transmission —
//! every hop's forwarding of a message is a separate transmission — and
//! never includes data packets.

use crate::router::{DropReason, RouterCounters};
use crate::time::SimTime;
use crate::wire::{DataKind, DataPacket, MessageKind};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AccountingError {
    #[error("packet id {0} recorded twice at creation")]
    DuplicateCreation(u64),
    #[error("terminal event for unknown packet id {0}")]
    UnknownPacket(u64),
    #[error("packet id {0} already reached a terminal state")]
    DoubleTerminal(u64),
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Terminal {
    Delivered,
    Dropped,
}

#[derive(Clone, Copy, PartialEq, Debug)]
struct PacketRecord {
    kind: DataKind,
    created_at: SimTime,
    terminal: Option<Terminal>,
}

/// Live accumulators owned by one engine.
#[derive(Clone, Default, Debug)]
pub struct Collectors {
    packets: BTreeMap<u64, PacketRecord>,
    sent: BTreeMap<DataKind, u64>,
    delivered: BTreeMap<DataKind, u64>,
    delays_us: BTreeMap<DataKind, Vec<u64>>,
    control_packets: BTreeMap<MessageKind, u64>,
    control_bytes: u64,
    drops: BTreeMap<DropReason, u64>,
    pub frames_tx: u64,
    pub frames_rx: u64,
    /// LOADng replies originated by a router not owning the destination
    /// address. Must stay zero; counted so runs can prove it.
    pub rrep_origin_violations: u64,
}

impl Collectors {
    pub fn record_sent(&mut self, pkt: &DataPacket) -> Result<(), AccountingError> {
        let record = PacketRecord {
            kind: pkt.kind,
            created_at: pkt.created_at,
            terminal: None,
        };
        if self.packets.insert(pkt.id, record).is_some() {
            return Err(AccountingError::DuplicateCreation(pkt.id));
        }
        *self.sent.entry(pkt.kind).or_insert(0) += 1;
        Ok(())
    }

    pub fn record_delivered(&mut self, pkt: &DataPacket, at: SimTime) -> Result<(), AccountingError> {
        let record = self
            .packets
            .get_mut(&pkt.id)
            .ok_or(AccountingError::UnknownPacket(pkt.id))?;
        if record.terminal.is_some() {
            return Err(AccountingError::DoubleTerminal(pkt.id));
        }
        record.terminal = Some(Terminal::Delivered);
        *self.delivered.entry(pkt.kind).or_insert(0) += 1;
        self.delays_us
            .entry(pkt.kind)
            .or_default()
            .push(at - record.created_at);
        Ok(())
    }

    pub fn record_drop(&mut self, pkt: &DataPacket, reason: DropReason) -> Result<(), AccountingError> {
        let record = self
            .packets
            .get_mut(&pkt.id)
            .ok_or(AccountingError::UnknownPacket(pkt.id))?;
        if record.terminal.is_some() {
            return Err(AccountingError::DoubleTerminal(pkt.id));
        }
        record.terminal = Some(Terminal::Dropped);
        *self.drops.entry(reason).or_insert(0) += 1;
        Ok(())
    }

    pub fn record_control_tx(&mut self, kind: MessageKind, bytes: u32) {
        *self.control_packets.entry(kind).or_insert(0) += 1;
        self.control_bytes += u64::from(bytes);
    }

    fn direction(&self, kinds: &[DataKind]) -> DirectionStats {
        let sent: u64 = kinds.iter().filter_map(|k| self.sent.get(k)).sum();
        let delivered: u64 = kinds.iter().filter_map(|k| self.delivered.get(k)).sum();
        let mut delays: Vec<u64> = kinds
            .iter()
            .filter_map(|k| self.delays_us.get(k))
            .flatten()
            .copied()
            .collect();
        delays.sort_unstable();
        DirectionStats::from_parts(sent, delivered, &delays)
    }

    /// delivered + dropped + in-flight must equal sent, and every id must
    /// have at most one terminal event (enforced at record time).
    pub fn conservation_holds(&self) -> bool {
        let sent: u64 = self.sent.values().sum();
        let delivered: u64 = self.delivered.values().sum();
        let dropped: u64 = self.drops.values().sum();
        let in_flight = self
            .packets
            .values()
            .filter(|r| r.terminal.is_none())
            .count() as u64;
        sent == delivered + dropped + in_flight
    }

    pub fn finish(self, duration_s: f64, routers: RouterCounters) -> MetricsReport {
        debug_assert!(self.conservation_holds());
        let mp2p = self.direction(&[DataKind::MeterReport]);
        let p2mp = self.direction(&[DataKind::AppAck, DataKind::Config]);
        let p2mp_ack = self.direction(&[DataKind::AppAck]);
        let p2mp_config = self.direction(&[DataKind::Config]);
        let control_total_packets: u64 = self.control_packets.values().sum();
        let drops_total: u64 = self.drops.values().sum();
        let in_flight_at_end = self
            .packets
            .values()
            .filter(|r| r.terminal.is_none())
            .count() as u64;
        MetricsReport {
            mp2p,
            p2mp,
            p2mp_ack,
            p2mp_config,
            control_packets: self.control_packets,
            control_total_packets,
            control_total_bytes: self.control_bytes,
            control_bytes_per_s: if duration_s > 0.0 {
                self.control_bytes as f64 / duration_s
            } else {
                0.0
            },
            drops: self.drops,
            drops_total,
            in_flight_at_end,
            frames_tx: self.frames_tx,
            frames_rx: self.frames_rx,
            duration_s,
            rrep_origin_violations: self.rrep_origin_violations,
            routers,
        }
    }
}

/// Delivery statistics for one traffic direction.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct DirectionStats {
    pub sent: u64,
    pub delivered: u64,
    /// delivered/sent; defined as 1.0 when nothing was sent (the sent
    /// count itself flags that case).
    pub pdr: f64,
    pub delay_mean_ms: f64,
    pub delay_p95_ms: f64,
}

impl DirectionStats {
    fn from_parts(sent: u64, delivered: u64, sorted_delays_us: &[u64]) -> Self {
        debug_assert!(delivered <= sent);
        let pdr = if sent == 0 { 1.0 } else { delivered as f64 / sent as f64 };
        let (mean, p95) = if sorted_delays_us.is_empty() {
            (0.0, 0.0)
        } else {
            let sum: u64 = sorted_delays_us.iter().sum();
            let mean = sum as f64 / sorted_delays_us.len() as f64 / 1_000.0;
            // Nearest-rank percentile.
            let rank = (0.95 * sorted_delays_us.len() as f64).ceil() as usize;
            let p95 = sorted_delays_us[rank.clamp(1, sorted_delays_us.len()) - 1] as f64 / 1_000.0;
            (mean, p95)
        };
        DirectionStats {
            sent,
            delivered,
            pdr,
            delay_mean_ms: mean,
            delay_p95_ms: p95,
        }
    }
}

/// Frozen output of one simulation run.
#[derive(Clone, PartialEq, Debug)]
pub struct MetricsReport {
    pub mp2p: DirectionStats,
    /// Acks and config pushes combined.
    pub p2mp: DirectionStats,
    pub p2mp_ack: DirectionStats,
    pub p2mp_config: DirectionStats,
    pub control_packets: BTreeMap<MessageKind, u64>,
    pub control_total_packets: u64,
    pub control_total_bytes: u64,
    pub control_bytes_per_s: f64,
    pub drops: BTreeMap<DropReason, u64>,
    pub drops_total: u64,
    pub in_flight_at_end: u64,
    pub frames_tx: u64,
    pub frames_rx: u64,
    pub duration_s: f64,
    pub rrep_origin_violations: u64,
    pub routers: RouterCounters,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Address;

    fn pkt(id: u64, kind: DataKind, created_s: u64) -> DataPacket {
        DataPacket {
            src: Address::new(1),
            dst: Address::new(2),
            payload_size: 512,
            created_at: SimTime::from_secs(created_s),
            id,
            kind,
        }
    }

    #[test]
    fn delay_is_delivery_minus_creation() {
        let mut c = Collectors::default();
        let p = pkt(1, DataKind::MeterReport, 10);
        c.record_sent(&p).unwrap();
        c.record_delivered(&p, SimTime::from_micros(10_300_000)).unwrap();
        let report = c.finish(60.0, RouterCounters::default());
        assert_eq!(report.mp2p.delay_mean_ms, 300.0);
        assert_eq!(report.mp2p.delay_p95_ms, 300.0);
    }

    #[test]
    fn pdr_is_delivered_over_sent() {
        let mut c = Collectors::default();
        for id in 0..4 {
            c.record_sent(&pkt(id, DataKind::MeterReport, 0)).unwrap();
        }
        for id in 0..3 {
            c.record_delivered(&pkt(id, DataKind::MeterReport, 0), SimTime::from_secs(1))
                .unwrap();
        }
        let report = c.finish(60.0, RouterCounters::default());
        assert_eq!(report.mp2p.pdr, 0.75);
        assert_eq!(report.p2mp.sent, 0);
        assert_eq!(report.p2mp.pdr, 1.0, "sent=0 reports pdr 1.0 with the sent flag at 0");
    }

    #[test]
    fn unknown_delivery_is_an_accounting_error() {
        let mut c = Collectors::default();
        let err = c
            .record_delivered(&pkt(7, DataKind::MeterReport, 0), SimTime::ZERO)
            .unwrap_err();
        assert_eq!(err, AccountingError::UnknownPacket(7));
    }

    #[test]
    fn double_terminal_rejected() {
        let mut c = Collectors::default();
        let p = pkt(1, DataKind::AppAck, 0);
        c.record_sent(&p).unwrap();
        c.record_delivered(&p, SimTime::from_secs(1)).unwrap();
        assert_eq!(
            c.record_delivered(&p, SimTime::from_secs(2)).unwrap_err(),
            AccountingError::DoubleTerminal(1)
        );
        assert_eq!(
            c.record_drop(&p, DropReason::LinkFailure).unwrap_err(),
            AccountingError::DoubleTerminal(1)
        );
    }

    #[test]
    fn conservation_ledger() {
        let mut c = Collectors::default();
        for id in 0..5 {
            c.record_sent(&pkt(id, DataKind::MeterReport, 0)).unwrap();
        }
        c.record_delivered(&pkt(0, DataKind::MeterReport, 0), SimTime::from_secs(1))
            .unwrap();
        c.record_drop(&pkt(1, DataKind::MeterReport, 0), DropReason::LinkFailure)
            .unwrap();
        c.record_drop(&pkt(2, DataKind::MeterReport, 0), DropReason::DiscoveryFailed)
            .unwrap();
        assert!(c.conservation_holds());
        let report = c.finish(10.0, RouterCounters::default());
        assert_eq!(report.in_flight_at_end, 2);
        assert_eq!(report.drops_total, 2);
    }

    #[test]
    fn control_accounting_excludes_data() {
        let mut c = Collectors::default();
        c.record_control_tx(MessageKind::LoadngRreq, 14);
        c.record_control_tx(MessageKind::LoadngRreq, 14);
        c.record_control_tx(MessageKind::LoadngRrepAck, 4);
        let p = pkt(1, DataKind::MeterReport, 0);
        c.record_sent(&p).unwrap();
        let report = c.finish(16.0, RouterCounters::default());
        assert_eq!(report.control_total_packets, 3);
        assert_eq!(report.control_total_bytes, 32);
        assert_eq!(report.control_bytes_per_s, 2.0);
        assert_eq!(report.control_packets[&MessageKind::LoadngRreq], 2);
    }

    #[test]
    fn p95_nearest_rank() {
        let mut c = Collectors::default();
        for id in 0..100u64 {
            let p = pkt(id, DataKind::Config, 0);
            c.record_sent(&p).unwrap();
            c.record_delivered(&p, SimTime::from_micros((id + 1) * 1_000)).unwrap();
        }
        let report = c.finish(1.0, RouterCounters::default());
        // Delays are 1..=100 ms; the 95th of 100 sorted values is 95 ms.
        assert_eq!(report.p2mp_config.delay_p95_ms, 95.0);
        assert_eq!(report.p2mp.delay_p95_ms, 95.0);
    }
}
