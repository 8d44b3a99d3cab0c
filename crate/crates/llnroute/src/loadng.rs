//! LOADng router state machine.
//!
//! Reactive distance-vector routing in which only the destination of a
//! route request may answer it. Compared to the AODV baseline in
//! [`crate::aodv`]: no intermediate replies, no gratuitous RREP, no
//! precursor lists, hop-by-hop RREP-ACK with blacklisting of neighbors
//! whose links turn out to be unidirectional, and the Smart-RREQ
//! optimization that unicasts a request along an already-known route
//! instead of rebroadcasting it.
//!
//! The router owns only protocol state. All I/O is returned as
//! [`Effect`]s; the simulation engine applies them.

use crate::router::{
    route_candidate_wins, DropReason, Effect, ProtocolTimers, RouteView, RouterActions,
    RouterCounters, TimerKind,
};
use crate::time::SimTime;
use crate::wire::{Address, ControlMessage, DataPacket, Frame, MessageKind, SequenceNumber};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// One row of the Routing Set.
#[derive(Clone, PartialEq, Debug)]
pub struct RouteEntry {
    pub destination: Address,
    pub next_hop: Address,
    pub metric: u16,
    pub seq: SequenceNumber,
    pub valid_until: SimTime,
    pub bidirectional_confirmed: bool,
}

/// Forwarded (or generated) RREP awaiting its RREP-ACK.
#[derive(Clone, PartialEq, Debug)]
struct PendingAck {
    neighbor: Address,
    rrep_seq: SequenceNumber,
    deadline: SimTime,
}

/// Duplicate-suppression record for one (originator, seq) flood.
#[derive(Clone, PartialEq, Debug)]
struct DedupEntry {
    best_metric: u16,
    expires: SimTime,
}

/// Discovery in progress toward one destination, with buffered traffic.
#[derive(Clone, PartialEq, Debug)]
struct PendingDiscovery {
    packets: VecDeque<DataPacket>,
    retries_left: u32,
    next_retry_at: SimTime,
    /// Wait before the retry after next; doubles each attempt.
    next_backoff_us: u64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct LoadngRouter {
    addr: Address,
    own_seq: SequenceNumber,
    timers: ProtocolTimers,
    /// Routing Set: at most one entry per destination.
    routes: BTreeMap<Address, RouteEntry>,
    /// Blacklist Neighbor Set: neighbor -> blacklisted_until.
    blacklist: BTreeMap<Address, SimTime>,
    /// Pending Acknowledgment Set.
    pending_acks: Vec<PendingAck>,
    /// Destination Address Set: addresses this router answers RREQs for.
    destinations: BTreeSet<Address>,
    /// Local Interface Set: (interface id, address). Single radio here.
    interfaces: Vec<(u8, Address)>,
    /// RREQ dedup cache keyed by (originator, seq value).
    rreq_seen: BTreeMap<(Address, u16), DedupEntry>,
    /// In-flight discoveries keyed by destination.
    pending: BTreeMap<Address, PendingDiscovery>,
    counters: RouterCounters,
}

impl LoadngRouter {
    pub fn new(addr: Address, timers: ProtocolTimers) -> Self {
        debug_assert!(!addr.is_unspecified());
        let mut destinations = BTreeSet::new();
        destinations.insert(addr);
        LoadngRouter {
            addr,
            own_seq: SequenceNumber::default(),
            timers,
            routes: BTreeMap::new(),
            blacklist: BTreeMap::new(),
            pending_acks: Vec::new(),
            destinations,
            interfaces: vec![(0, addr)],
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

    pub fn is_blacklisted(&self, neighbor: Address, now: SimTime) -> bool {
        self.blacklist.get(&neighbor).is_some_and(|until| *until > now)
    }

    /// Valid (unexpired) route lookup.
    pub fn route_to(&self, dest: Address, now: SimTime) -> Option<&RouteEntry> {
        self.routes.get(&dest).filter(|e| e.valid_until >= now)
    }

    pub fn route_snapshot(&self) -> Vec<RouteView> {
        self.routes
            .values()
            .map(|e| RouteView {
                destination: e.destination,
                next_hop: e.next_hop,
                metric: e.metric,
                seq: e.seq,
                valid_until: e.valid_until,
                valid: true,
                bidirectional: Some(e.bidirectional_confirmed),
            })
            .collect()
    }

    /// Debug dump, one route per line: `dest next_hop metric seq valid_until bidir`.
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

    /// Data packet to route: locally generated or arriving from a neighbor.
    pub fn handle_data(&mut self, pkt: DataPacket, now: SimTime) -> RouterActions {
        if pkt.dst == self.addr {
            return vec![Effect::DeliverLocal(pkt)];
        }
        if let Some(next_hop) = self.use_route(pkt.dst, now) {
            return vec![Effect::UnicastData(pkt, next_hop)];
        }
        if pkt.src == self.addr {
            // Originator without a route: join or start a discovery.
            if self.pending.contains_key(&pkt.dst) {
                return self.buffer_packet(pkt);
            }
            return self.originate_discovery(pkt.dst, pkt, now);
        }
        // Transit router without a route: report back to the source.
        let mut actions = self.emit_rerr(vec![pkt.dst], pkt.src, now);
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
            MessageKind::LoadngRreq => self.process_rreq(msg, prev_hop, now),
            MessageKind::LoadngRrep => self.process_rrep(msg, prev_hop, now),
            MessageKind::LoadngRrepAck => self.process_rrep_ack(msg, prev_hop, now),
            MessageKind::LoadngRerr => self.process_rerr(msg, prev_hop, now),
            // Foreign-protocol traffic never reaches a LOADng deployment.
            _ => Vec::new(),
        }
    }

    pub fn handle_timer(&mut self, kind: TimerKind, now: SimTime) -> RouterActions {
        match kind {
            TimerKind::DiscoveryRetry(_) => self.tick(now),
            TimerKind::PendingAckSweep => self.expire_pending_ack(now),
        }
    }

    /// MAC feedback: delivery to `failed_next_hop` failed after retries.
    /// Data frames trigger the full broken-route procedure. A stalled
    /// unicast route request falls back to broadcast so the discovery
    /// keeps its flooding redundancy; other lost control frames just
    /// invalidate routes through that neighbor (the RREP-ACK deadline
    /// machinery covers the rest).
    pub fn handle_link_failure(
        &mut self,
        failed_next_hop: Address,
        frame: Frame,
        now: SimTime,
    ) -> RouterActions {
        match frame {
            Frame::Data(pkt) => self.detect_broken_route(failed_next_hop, pkt, now),
            Frame::Control(msg) => {
                self.invalidate_via(failed_next_hop);
                if msg.kind == MessageKind::LoadngRreq && msg.originator != self.addr {
                    return vec![Effect::BroadcastControl(msg)];
                }
                Vec::new()
            }
        }
    }

    // ------------------------------------------------------------------
    // Protocol operations
    // ------------------------------------------------------------------

    /// Start a route discovery toward `dest`, buffering `pkt` until a
    /// reply arrives. Caller must have checked that no valid route exists.
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

    /// Route request from `prev_hop`. Installs/refreshes the reverse route,
    /// answers if this router owns the requested address, otherwise
    /// forwards: unicast along a known route (Smart RREQ) or rebroadcast.
    pub fn process_rreq(
        &mut self,
        rreq: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        if rreq.originator == self.addr {
            return Vec::new(); // own flood echoing back
        }
        if self.is_blacklisted(prev_hop, now) {
            return Vec::new(); // unidirectional neighbor: ignore entirely
        }
        let is_destination = self.destinations.contains(&rreq.destination);
        if !is_destination && rreq.hop_count >= rreq.hop_limit {
            return Vec::new();
        }
        self.note_neighbor(prev_hop, now);
        let cand_metric = u16::from(rreq.hop_count) + 1;
        self.maybe_update_route(rreq.originator, prev_hop, cand_metric, rreq.seq, now);

        if !self.dedup_admits(rreq.originator, rreq.seq, cand_metric, now) {
            return Vec::new(); // stale duplicate
        }

        if is_destination {
            self.own_seq = self.own_seq.incremented();
            let mut rrep =
                ControlMessage::new(MessageKind::LoadngRrep, self.addr, rreq.originator);
            rrep.seq = self.own_seq;
            rrep.hop_limit = self.timers.hop_limit;
            return self.send_rrep(rrep, now);
        }

        let mut fwd = rreq;
        fwd.hop_count += 1;
        fwd.metric = u16::from(fwd.hop_count);
        if let Some(next_hop) = self.use_route(fwd.destination, now) {
            // Smart RREQ: the request travels unicast along the known
            // route, dedup key unchanged.
            vec![Effect::UnicastControl(fwd, next_hop)]
        } else {
            vec![Effect::BroadcastControl(fwd)]
        }
    }

    /// Route reply from `prev_hop`. Installs the forward route, always
    /// acknowledges the hop, then either completes a local discovery or
    /// relays the reply along the reverse route.
    pub fn process_rrep(
        &mut self,
        rrep: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        self.note_neighbor(prev_hop, now);
        let updated = self.maybe_update_route(
            rrep.originator,
            prev_hop,
            u16::from(rrep.hop_count) + 1,
            rrep.seq,
            now,
        );

        let mut ack = ControlMessage::new(MessageKind::LoadngRrepAck, self.addr, prev_hop);
        ack.seq = rrep.seq;
        let mut actions = vec![Effect::UnicastControl(ack, prev_hop)];

        if rrep.destination == self.addr {
            // This router originated the matching RREQ: flush what waited.
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
            return actions; // duplicate, worse, or out of hop budget
        }
        let Some(next_hop) = self.use_route(rrep.destination, now) else {
            self.counters.rrep_orphaned += 1;
            return actions;
        };
        let mut fwd = rrep;
        fwd.hop_count += 1;
        fwd.metric = u16::from(fwd.hop_count);
        let seq = fwd.seq;
        actions.push(Effect::UnicastControl(fwd, next_hop));
        actions.push(self.record_pending_ack(next_hop, seq, now));
        actions
    }

    /// RREP-ACK from `prev_hop`: clears the matching pending tuple and
    /// marks routes through that neighbor as confirmed bidirectional.
    /// Unmatched acks are ignored.
    pub fn process_rrep_ack(
        &mut self,
        ack: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        self.note_neighbor(prev_hop, now);
        if let Some(pos) = self
            .pending_acks
            .iter()
            .position(|p| p.neighbor == prev_hop && p.rrep_seq == ack.seq)
        {
            self.pending_acks.remove(pos);
            for entry in self.routes.values_mut() {
                if entry.next_hop == prev_hop {
                    entry.bidirectional_confirmed = true;
                }
            }
        }
        Vec::new()
    }

    /// Route error from `prev_hop`: tears down listed routes that run
    /// through that neighbor and relays the message toward its target.
    pub fn process_rerr(
        &mut self,
        rerr: ControlMessage,
        prev_hop: Address,
        now: SimTime,
    ) -> RouterActions {
        self.note_neighbor(prev_hop, now);
        for dest in &rerr.unreachable {
            if self.routes.get(dest).is_some_and(|e| e.next_hop == prev_hop) {
                self.routes.remove(dest);
            }
        }
        if rerr.destination == self.addr || rerr.hop_count >= rerr.hop_limit {
            return Vec::new();
        }
        let Some(next_hop) = self.use_route(rerr.destination, now) else {
            self.counters.rerr_unroutable += 1;
            return Vec::new();
        };
        let mut fwd = rerr;
        fwd.hop_count += 1;
        vec![Effect::UnicastControl(fwd, next_hop)]
    }

    /// Blacklist neighbors whose RREP-ACK deadline has passed.
    pub fn expire_pending_ack(&mut self, now: SimTime) -> RouterActions {
        let mut expired = Vec::new();
        self.pending_acks.retain(|p| {
            if p.deadline <= now {
                expired.push(p.neighbor);
                false
            } else {
                true
            }
        });
        for neighbor in expired {
            self.blacklist_neighbor(neighbor, now);
        }
        Vec::new()
    }

    fn blacklist_neighbor(&mut self, neighbor: Address, now: SimTime) {
        let blacklist_until = now + self.timers.blacklist_us;
        let until = self.blacklist.entry(neighbor).or_insert(blacklist_until);
        if *until < blacklist_until {
            *until = blacklist_until;
        }
        self.counters.blacklist_adds += 1;
    }

    /// Link-layer failure while forwarding `orphan_pkt` to
    /// `failed_next_hop`: invalidate everything routed through that
    /// neighbor, blacklist it (a spent MAC retry budget is the same
    /// unidirectionality evidence a missed RREP-ACK gives), and report the
    /// loss back to the packet's source when a reverse route exists.
    pub fn detect_broken_route(
        &mut self,
        failed_next_hop: Address,
        orphan_pkt: DataPacket,
        now: SimTime,
    ) -> RouterActions {
        let unreachable = self.invalidate_via(failed_next_hop);
        self.blacklist_neighbor(failed_next_hop, now);
        let mut actions = if unreachable.is_empty() || orphan_pkt.src == self.addr {
            Vec::new()
        } else {
            self.emit_rerr(unreachable, orphan_pkt.src, now)
        };
        actions.push(Effect::DropData(orphan_pkt, DropReason::LinkFailure));
        actions
    }

    /// Periodic housekeeping: purge expired state and drive discovery
    /// retries. `now` must be monotonically non-decreasing across calls.
    pub fn tick(&mut self, now: SimTime) -> RouterActions {
        self.routes.retain(|_, e| e.valid_until >= now);
        self.blacklist.retain(|_, until| *until > now);
        self.rreq_seen.retain(|_, e| e.expires > now);

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
        let mut rreq = ControlMessage::new(MessageKind::LoadngRreq, self.addr, dest);
        rreq.seq = self.own_seq;
        rreq.hop_limit = self.timers.hop_limit;
        rreq
    }

    /// Unicast a generated RREP toward its target and arm the ack wait.
    fn send_rrep(&mut self, rrep: ControlMessage, now: SimTime) -> RouterActions {
        let Some(next_hop) = self.use_route(rrep.destination, now) else {
            self.counters.rrep_orphaned += 1;
            return Vec::new();
        };
        let seq = rrep.seq;
        vec![
            Effect::UnicastControl(rrep, next_hop),
            self.record_pending_ack(next_hop, seq, now),
        ]
    }

    fn record_pending_ack(&mut self, neighbor: Address, rrep_seq: SequenceNumber, now: SimTime) -> Effect {
        let deadline = now + self.timers.ack_deadline_us;
        self.pending_acks.push(PendingAck { neighbor, rrep_seq, deadline });
        Effect::StartTimer(TimerKind::PendingAckSweep, deadline)
    }

    fn emit_rerr(&mut self, unreachable: Vec<Address>, source: Address, now: SimTime) -> RouterActions {
        debug_assert!(!unreachable.is_empty());
        let Some(next_hop) = self.use_route(source, now) else {
            self.counters.rerr_unroutable += 1;
            return Vec::new();
        };
        let mut rerr = ControlMessage::new(MessageKind::LoadngRerr, self.addr, source);
        rerr.seq = self.own_seq;
        rerr.hop_limit = self.timers.hop_limit;
        rerr.unreachable = unreachable;
        vec![Effect::UnicastControl(rerr, next_hop)]
    }

    /// Any received message proves the sender is one hop away: install or
    /// refresh the direct route to it. A direct entry is never worse than
    /// a relayed one, so this bypasses the preference order; the stored
    /// sequence number is kept untouched.
    fn note_neighbor(&mut self, neighbor: Address, now: SimTime) {
        if neighbor == self.addr {
            return;
        }
        let valid_until = now + self.timers.route_hold_us;
        match self.routes.get_mut(&neighbor) {
            Some(entry) => {
                entry.next_hop = neighbor;
                entry.metric = 1;
                if entry.valid_until < valid_until {
                    entry.valid_until = valid_until;
                }
            }
            None => {
                self.routes.insert(
                    neighbor,
                    RouteEntry {
                        destination: neighbor,
                        next_hop: neighbor,
                        metric: 1,
                        seq: SequenceNumber::default(),
                        valid_until,
                        bidirectional_confirmed: false,
                    },
                );
            }
        }
    }

    /// Look up a valid route and refresh its lifetime (routes are kept
    /// alive by use).
    fn use_route(&mut self, dest: Address, now: SimTime) -> Option<Address> {
        let hold = self.timers.route_hold_us;
        let entry = self.routes.get_mut(&dest).filter(|e| e.valid_until >= now)?;
        entry.valid_until = now + hold;
        Some(entry.next_hop)
    }

    /// Apply the route preference order to a candidate learned from a
    /// received message. Returns true when the table changed.
    fn maybe_update_route(
        &mut self,
        dest: Address,
        next_hop: Address,
        metric: u16,
        seq: SequenceNumber,
        now: SimTime,
    ) -> bool {
        if dest == self.addr {
            return false;
        }
        let valid_until = now + self.timers.route_hold_us;
        match self.routes.get_mut(&dest) {
            Some(cur) if cur.valid_until >= now => {
                if route_candidate_wins(seq, metric, cur.seq, cur.metric) {
                    let keep_bidir = cur.next_hop == next_hop && cur.bidirectional_confirmed;
                    *cur = RouteEntry {
                        destination: dest,
                        next_hop,
                        metric,
                        seq,
                        valid_until,
                        bidirectional_confirmed: keep_bidir,
                    };
                    true
                } else {
                    if cur.seq == seq && cur.metric == metric && cur.next_hop == next_hop {
                        // Same evidence re-observed: keep the entry alive.
                        cur.valid_until = valid_until;
                    }
                    false
                }
            }
            _ => {
                self.routes.insert(
                    dest,
                    RouteEntry {
                        destination: dest,
                        next_hop,
                        metric,
                        seq,
                        valid_until,
                        bidirectional_confirmed: false,
                    },
                );
                true
            }
        }
    }

    /// Admit an RREQ only if unseen or strictly better than what was seen.
    fn dedup_admits(
        &mut self,
        originator: Address,
        seq: SequenceNumber,
        metric: u16,
        now: SimTime,
    ) -> bool {
        let key = (originator, seq.value());
        let expires = now + self.timers.dedup_ttl_us;
        match self.rreq_seen.get_mut(&key) {
            Some(entry) if entry.expires > now => {
                if metric < entry.best_metric {
                    entry.best_metric = metric;
                    entry.expires = expires;
                    true
                } else {
                    false
                }
            }
            _ => {
                self.rreq_seen.insert(key, DedupEntry { best_metric: metric, expires });
                true
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

    /// Remove every route through `neighbor`; returns the torn-down
    /// destinations in address order.
    fn invalidate_via(&mut self, neighbor: Address) -> Vec<Address> {
        let dests: Vec<Address> = self
            .routes
            .values()
            .filter(|e| e.next_hop == neighbor)
            .map(|e| e.destination)
            .collect();
        for dest in &dests {
            self.routes.remove(dest);
        }
        dests
    }
}
