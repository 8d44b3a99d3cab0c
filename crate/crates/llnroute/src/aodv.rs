//! AODV router state machine (RFC 3561 semantics, minimal profile).
//!
//! The baseline LOADng is contrasted against: intermediate routers with a
//! fresh-enough cached route answer requests themselves and notify the
//! destination with a gratuitous RREP; every route keeps a precursor list
//! so route errors cascade upstream; replies carry destination sequence
//! numbers. No expanding-ring search, no local repair, no HELLO beacons —
//! link failure detection is MAC feedback, same as the LOADng side.

use crate::router::{DropReason, Effect, ProtocolTimers, RouteView, RouterActions, RouterCounters, TimerKind};
use crate::time::SimTime;
use crate::wire::{Address, ControlMessage, DataPacket, MessageKind, SequenceNumber};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// One AODV routing-table entry. Invalidated entries linger (soft state)
/// so sequence numbers and precursors survive until the delete period ends.
#[derive(Clone, PartialEq, Debug)]
pub struct AodvRouteEntry {
    pub destination: Address,
    pub next_hop: Address,
    pub hop_count: u16,
    /// Last known destination sequence number; `None` = unknown.
    pub dest_seq: Option<SequenceNumber>,
    pub valid_until: SimTime,
    pub valid: bool,
    /// Upstream neighbors routing through this entry.
    pub precursors: BTreeSet<Address>,
}

#[derive(Clone, PartialEq, Debug)]
struct PendingDiscovery {
    packets: VecDeque<DataPacket>,
    retries_left: u32,
    next_retry_at: SimTime,
    next_backoff_us: u64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct AodvRouter {
    addr: Address,
    own_seq: SequenceNumber,
    timers: ProtocolTimers,
    routes: BTreeMap<Address, AodvRouteEntry>,
    /// Strict duplicate suppression: (originator, seq) -> expiry.
    rreq_seen: BTreeMap<(Address, u16), SimTime>,
    pending: BTreeMap<Address, PendingDiscovery>,
    counters: RouterCounters,
}

impl AodvRouter {
    pub fn new(addr: Address, timers: ProtocolTimers) -> Self {
        debug_assert!(!addr.is_unspecified());
        AodvRouter {
            addr,
            own_seq: SequenceNumber::default(),
            timers,
            routes: BTreeMap::new(),
            rreq_seen: BTreeMap::new(),
            pending: BTreeMap::new(),
            counters: RouterCounters::default(),
        }
    }

    pub fn address(&self) -> Address {
        self.addr
    }

    pub fn seq(&self) -> SequenceNumber {
        self.own_seq
    }

    pub fn counters(&self) -> RouterCounters {
        self.counters
    }

    pub fn route_to(&self, dest: Address, now: SimTime) -> Option<&AodvRouteEntry> {
        self.routes.get(&dest).filter(|e| e.valid && e.valid_until >= now)
    }

    pub fn route_snapshot(&self) -> Vec<RouteView> {
        self.routes
            .values()
            .map(|e| RouteView {
                destination: e.destination,
                next_hop: e.next_hop,
                metric: e.hop_count,
                seq: e.dest_seq.unwrap_or_default(),
                valid_until: e.valid_until,
                valid: e.valid,
                bidirectional: None,
            })
            .collect()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for view in self.route_snapshot() {
            out.push_str(&view.to_string());
            out.push('\n');
        }
        out
    }

    // ------------------------------------------------------------------
    // Engine entry points
    // ------------------------------------------------------------------

    pub fn handle_data(&mut self, pkt: DataPacket, now: SimTime) -> RouterActions {
        if pkt.dst == self.addr {
            return vec![Effect::DeliverLocal(pkt)];
        }
        if let Some(next_hop) = self.use_route(pkt.dst, now) {
            return vec![Effect::UnicastData(pkt, next_hop)];
        }
        if pkt.src == self.addr {
            if self.pending.contains_key(&pkt.dst) {
                return self.buffer_packet(pkt);
            }
            return self.originate_discovery(pkt.dst, pkt, now);
        }
        // Transit with no active route: tell whoever depends on it.
        let mut actions = self.transit_no_route_rerr(pkt.dst, pkt.src, now);
        actions.push(Effect::DropData(pkt, DropReason::NoRoute));
        actions
    }

    pub fn handle_control(
        &mut self,
        msg: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        match msg.kind {
            MessageKind::AodvRreq => self.process_rreq(msg, prev_hop, now),
            MessageKind::AodvRrep => self.process_rrep(msg, prev_hop, now),
            MessageKind::AodvRerr => self.process_rerr(msg, prev_hop, now),
            _ => Vec::new(),
        }
    }

    pub fn handle_timer(&mut self, kind: TimerKind, now: SimTime) -> RouterActions {
        match kind {
            TimerKind::DiscoveryRetry(_) => self.tick(now),
            TimerKind::PendingAckSweep => Vec::new(), // not used by AODV
        }
    }

    pub fn handle_link_failure(
        &mut self,
        failed_next_hop: Address,
        data: Option<DataPacket>,
        now: SimTime,
    ) -> RouterActions {
        let mut actions = self.detect_broken_route(failed_next_hop, now);
        if let Some(pkt) = data {
            actions.push(Effect::DropData(pkt, DropReason::LinkFailure));
        }
        actions
    }

    // ------------------------------------------------------------------
    // Protocol operations
    // ------------------------------------------------------------------

    pub fn originate_discovery(
        &mut self,
        dest: Address,
        pkt: DataPacket,
        now: SimTime,
    ) -> RouterActions {
        debug_assert!(self.route_to(dest, now).is_none());
        self.own_seq = self.own_seq.incremented();
        let rreq = self.make_rreq(dest);
        let next_retry_at = now + self.timers.rreq_backoff_us;
        let mut packets = VecDeque::new();
        packets.push_back(pkt);
        self.pending.insert(
            dest,
            PendingDiscovery {
                packets,
                retries_left: self.timers.rreq_retries,
                next_retry_at,
                next_backoff_us: self.timers.rreq_backoff_us * 2,
            },
        );
        vec![
            Effect::BroadcastControl(rreq),
            Effect::StartTimer(TimerKind::DiscoveryRetry(dest), next_retry_at),
        ]
    }

    /// Route request: answer from own address or from a fresh-enough cached
    /// route (with gratuitous RREP toward the destination), else rebroadcast.
    pub fn process_rreq(
        &mut self,
        rreq: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        if rreq.originator == self.addr {
            return Vec::new();
        }
        let is_destination = rreq.destination == self.addr;
        if !is_destination && rreq.hop_count >= rreq.hop_limit {
            return Vec::new();
        }
        self.note_neighbor(prev_hop, now);
        let key = (rreq.originator, rreq.seq.value());
        if self.rreq_seen.get(&key).is_some_and(|expires| *expires > now) {
            return Vec::new(); // duplicate: discarded before route updates
        }
        self.rreq_seen.insert(key, now + self.timers.dedup_ttl_us);
        let reverse_metric = u16::from(rreq.hop_count) + 1;
        self.update_route(rreq.originator, prev_hop, reverse_metric, Some(rreq.seq), now);

        if is_destination {
            // Never answer with a number older than what was asked for.
            if let Some(requested) = rreq.aodv_dest_seq {
                if requested.is_newer_than(self.own_seq) {
                    self.own_seq = requested;
                }
            }
            self.own_seq = self.own_seq.incremented();
            let mut rrep = ControlMessage::new(MessageKind::AodvRrep, self.addr, rreq.originator);
            rrep.seq = self.own_seq;
            rrep.aodv_dest_seq = Some(self.own_seq);
            rrep.hop_limit = self.timers.hop_limit;
            let Some(next_hop) = self.use_route(rreq.originator, now) else {
                self.counters.rrep_orphaned += 1;
                return Vec::new();
            };
            return vec![Effect::UnicastControl(rrep, next_hop)];
        }

        // Intermediate reply if the cache holds a route at least as fresh
        // as requested.
        let cached = self
            .routes
            .get(&rreq.destination)
            .filter(|e| e.valid && e.valid_until >= now)
            .and_then(|e| e.dest_seq.map(|seq| (seq, e.hop_count, e.next_hop)));
        let fresh_enough = cached.is_some_and(|(cached_seq, _, _)| match rreq.aodv_dest_seq {
            Some(requested) => !requested.is_newer_than(cached_seq),
            None => true,
        });
        if let (Some((cached_seq, cached_hops, toward_dest)), true) = (cached, fresh_enough) {
            let mut actions = Vec::new();

            // Reply to the source on behalf of the destination.
            let mut rrep = ControlMessage::new(MessageKind::AodvRrep, rreq.destination, rreq.originator);
            rrep.seq = cached_seq;
            rrep.aodv_dest_seq = Some(cached_seq);
            rrep.hop_count = cached_hops.min(u16::from(u8::MAX)) as u8;
            rrep.metric = cached_hops;
            rrep.hop_limit = self.timers.hop_limit;
            if let Some(entry) = self.routes.get_mut(&rreq.destination) {
                entry.precursors.insert(prev_hop);
            }
            if let Some(entry) = self.routes.get_mut(&rreq.originator) {
                entry.precursors.insert(toward_dest);
            }
            let Some(next_hop) = self.use_route(rreq.originator, now) else {
                self.counters.rrep_orphaned += 1;
                return Vec::new();
            };
            actions.push(Effect::UnicastControl(rrep, next_hop));

            // Gratuitous RREP keeps the destination informed about the
            // source it is about to hear from.
            let mut grat = ControlMessage::new(MessageKind::AodvRrep, rreq.originator, rreq.destination);
            grat.seq = rreq.seq;
            grat.aodv_dest_seq = Some(rreq.seq);
            grat.hop_count = rreq.hop_count;
            grat.metric = u16::from(rreq.hop_count);
            grat.hop_limit = self.timers.hop_limit;
            self.use_route(rreq.destination, now);
            actions.push(Effect::UnicastControl(grat, toward_dest));
            return actions;
        }

        let mut fwd = rreq;
        fwd.hop_count += 1;
        fwd.metric = u16::from(fwd.hop_count);
        vec![Effect::BroadcastControl(fwd)]
    }

    /// Route reply: install the forward route, then either consume it (we
    /// asked) or relay it along the reverse route, growing precursor lists.
    pub fn process_rrep(
        &mut self,
        rrep: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        self.note_neighbor(prev_hop, now);
        let seq = rrep.aodv_dest_seq.unwrap_or(rrep.seq);
        let updated = self.update_route(
            rrep.originator,
            prev_hop,
            u16::from(rrep.hop_count) + 1,
            Some(seq),
            now,
        );

        if rrep.destination == self.addr {
            let mut actions = Vec::new();
            if let Some(pending) = self.pending.remove(&rrep.originator) {
                if let Some(next_hop) = self.use_route(rrep.originator, now) {
                    for pkt in pending.packets {
                        actions.push(Effect::UnicastData(pkt, next_hop));
                    }
                } else {
                    for pkt in pending.packets {
                        actions.push(Effect::DropData(pkt, DropReason::NoRoute));
                    }
                }
            }
            return actions;
        }

        if !updated || rrep.hop_count >= rrep.hop_limit {
            return Vec::new();
        }
        let Some(toward_origin) = self.use_route(rrep.destination, now) else {
            self.counters.rrep_orphaned += 1;
            return Vec::new();
        };
        // Whoever we relay to becomes a precursor of the forward route,
        // and of the link entry toward the route target.
        if let Some(entry) = self.routes.get_mut(&rrep.originator) {
            entry.precursors.insert(toward_origin);
        }
        if let Some(entry) = self.routes.get_mut(&prev_hop) {
            entry.precursors.insert(toward_origin);
        }
        let mut fwd = rrep;
        fwd.hop_count += 1;
        fwd.metric = u16::from(fwd.hop_count);
        vec![Effect::UnicastControl(fwd, toward_origin)]
    }

    /// Route error: invalidate listed routes that run through the sender
    /// and cascade to our own precursors.
    pub fn process_rerr(
        &mut self,
        rerr: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        let mut notify: BTreeMap<Address, Vec<Address>> = BTreeMap::new();
        for dest in &rerr.unreachable {
            let Some(entry) = self.routes.get_mut(dest) else { continue };
            if !entry.valid || entry.next_hop != prev_hop {
                continue;
            }
            entry.valid = false;
            entry.valid_until = now + self.timers.route_hold_us;
            entry.dest_seq = Some(entry.dest_seq.unwrap_or_default().incremented());
            for precursor in std::mem::take(&mut entry.precursors) {
                if precursor != prev_hop {
                    notify.entry(precursor).or_default().push(*dest);
                }
            }
        }
        self.rerr_batch(notify)
    }

    /// MAC-detected break toward `failed_next_hop`: invalidate affected
    /// routes and send each precursor a RERR naming what it lost.
    pub fn detect_broken_route(&mut self, failed_next_hop: Address, now: SimTime) -> RouterActions {
        let mut notify: BTreeMap<Address, Vec<Address>> = BTreeMap::new();
        for entry in self.routes.values_mut() {
            if !entry.valid || entry.next_hop != failed_next_hop {
                continue;
            }
            entry.valid = false;
            entry.valid_until = now + self.timers.route_hold_us;
            entry.dest_seq = Some(entry.dest_seq.unwrap_or_default().incremented());
            for precursor in std::mem::take(&mut entry.precursors) {
                notify.entry(precursor).or_default().push(entry.destination);
            }
        }
        self.rerr_batch(notify)
    }

    /// Housekeeping: age out soft state and drive discovery retries.
    pub fn tick(&mut self, now: SimTime) -> RouterActions {
        for entry in self.routes.values_mut() {
            if entry.valid && entry.valid_until < now {
                // Expired active route: keep as soft state for one more
                // hold period so seq/precursor knowledge survives.
                entry.valid = false;
                entry.valid_until = now + self.timers.route_hold_us;
            }
        }
        self.routes.retain(|_, e| e.valid || e.valid_until >= now);
        self.rreq_seen.retain(|_, expires| *expires > now);

        let due: Vec<Address> = self
            .pending
            .iter()
            .filter(|(_, p)| p.next_retry_at <= now)
            .map(|(dest, _)| *dest)
            .collect();
        let mut actions = Vec::new();
        for dest in due {
            let pending = self.pending.get_mut(&dest).expect("collected above");
            if pending.retries_left > 0 {
                pending.retries_left -= 1;
                let wait = pending.next_backoff_us;
                pending.next_retry_at = now + wait;
                pending.next_backoff_us = wait * 2;
                let retry_at = pending.next_retry_at;
                self.own_seq = self.own_seq.incremented();
                actions.push(Effect::BroadcastControl(self.make_rreq(dest)));
                actions.push(Effect::StartTimer(TimerKind::DiscoveryRetry(dest), retry_at));
            } else {
                let pending = self.pending.remove(&dest).expect("collected above");
                for pkt in pending.packets {
                    actions.push(Effect::DropData(pkt, DropReason::DiscoveryFailed));
                }
            }
        }
        actions
    }

    // ------------------------------------------------------------------
    // Internals
    // ------------------------------------------------------------------

    fn make_rreq(&self, dest: Address) -> ControlMessage {
        let mut rreq = ControlMessage::new(MessageKind::AodvRreq, self.addr, dest);
        rreq.seq = self.own_seq;
        rreq.hop_limit = self.timers.hop_limit;
        // Last known freshness for the destination, if any survives.
        rreq.aodv_dest_seq = self.routes.get(&dest).and_then(|e| e.dest_seq);
        rreq
    }

    fn rerr_batch(&mut self, notify: BTreeMap<Address, Vec<Address>>) -> RouterActions {
        let mut actions = Vec::new();
        for (precursor, mut dests) in notify {
            dests.sort();
            dests.dedup();
            let mut rerr = ControlMessage::new(MessageKind::AodvRerr, self.addr, precursor);
            rerr.seq = self.own_seq;
            rerr.hop_limit = self.timers.hop_limit;
            rerr.unreachable = dests;
            actions.push(Effect::UnicastControl(rerr, precursor));
        }
        actions
    }

    /// RERR fallback for data in transit with no active route: precursors
    /// of the stale entry if any remain, else unicast toward the source.
    fn transit_no_route_rerr(&mut self, dst: Address, src: Address, now: SimTime) -> RouterActions {
        let precursors: Vec<Address> = self
            .routes
            .get_mut(&dst)
            .map(|e| std::mem::take(&mut e.precursors).into_iter().collect())
            .unwrap_or_default();
        if !precursors.is_empty() {
            let mut notify = BTreeMap::new();
            for p in precursors {
                notify.insert(p, vec![dst]);
            }
            return self.rerr_batch(notify);
        }
        if let Some(next_hop) = self.use_route(src, now) {
            let mut rerr = ControlMessage::new(MessageKind::AodvRerr, self.addr, src);
            rerr.seq = self.own_seq;
            rerr.hop_limit = self.timers.hop_limit;
            rerr.unreachable = vec![dst];
            return vec![Effect::UnicastControl(rerr, next_hop)];
        }
        self.counters.rerr_unroutable += 1;
        Vec::new()
    }

    fn use_route(&mut self, dest: Address, now: SimTime) -> Option<Address> {
        let hold = self.timers.route_hold_us;
        let entry = self
            .routes
            .get_mut(&dest)
            .filter(|e| e.valid && e.valid_until >= now)?;
        entry.valid_until = now + hold;
        Some(entry.next_hop)
    }

    /// Direct radio contact with a neighbor always justifies a 1-hop entry.
    fn note_neighbor(&mut self, neighbor: Address, now: SimTime) {
        if neighbor == self.addr {
            return;
        }
        let valid_until = now + self.timers.route_hold_us;
        let entry = self.routes.entry(neighbor).or_insert(AodvRouteEntry {
            destination: neighbor,
            next_hop: neighbor,
            hop_count: 1,
            dest_seq: None,
            valid_until,
            valid: true,
            precursors: BTreeSet::new(),
        });
        entry.valid = true;
        entry.next_hop = neighbor;
        entry.hop_count = 1;
        if entry.valid_until < valid_until {
            entry.valid_until = valid_until;
        }
    }

    /// RFC update rule: accept if the entry is missing, has no sequence
    /// number, the candidate is fresher, or is equally fresh and either
    /// shorter or replacing an invalid route. Destination sequence numbers
    /// never move backward.
    fn update_route(
        &mut self,
        dest: Address,
        next_hop: Address,
        hop_count: u16,
        seq: Option<SequenceNumber>,
        now: SimTime,
    ) -> bool {
        if dest == self.addr {
            return false;
        }
        let valid_until = now + self.timers.route_hold_us;
        match self.routes.get_mut(&dest) {
            None => {
                self.routes.insert(
                    dest,
                    AodvRouteEntry {
                        destination: dest,
                        next_hop,
                        hop_count,
                        dest_seq: seq,
                        valid_until,
                        valid: true,
                        precursors: BTreeSet::new(),
                    },
                );
                true
            }
            Some(entry) => {
                let accept = match (entry.dest_seq, seq) {
                    (None, _) => true,
                    (Some(_), None) => !entry.valid,
                    (Some(cur), Some(cand)) => {
                        cand.is_newer_than(cur)
                            || (cand == cur && (!entry.valid || hop_count < entry.hop_count))
                            || (!entry.valid && !cur.is_newer_than(cand))
                    }
                };
                if accept {
                    if let (Some(cur), Some(cand)) = (entry.dest_seq, seq) {
                        debug_assert!(!cur.is_newer_than(cand), "dest_seq regression");
                    }
                    entry.next_hop = next_hop;
                    entry.hop_count = hop_count;
                    if seq.is_some() {
                        entry.dest_seq = seq;
                    }
                    entry.valid = true;
                    entry.valid_until = valid_until;
                    true
                } else {
                    if entry.valid
                        && entry.dest_seq == seq
                        && entry.hop_count == hop_count
                        && entry.next_hop == next_hop
                    {
                        entry.valid_until = valid_until;
                    }
                    false
                }
            }
        }
    }

    fn buffer_packet(&mut self, pkt: DataPacket) -> RouterActions {
        let cap = self.timers.buffer_cap;
        let pending = self.pending.get_mut(&pkt.dst).expect("caller checked");
        pending.packets.push_back(pkt);
        let mut actions = Vec::new();
        while pending.packets.len() > cap {
            let oldest = pending.packets.pop_front().expect("len > cap >= 0");
            actions.push(Effect::DropData(oldest, DropReason::BufferFull));
        }
        actions
    }
}
