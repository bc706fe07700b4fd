//! Traffic collector and flow installer.
//!
//! Every packet that reaches the controller has its headers recorded for the
//! current interval. Packets that arrived on a table-miss additionally drive
//! the symmetric-flow state machine: a flow is parked in the pending list
//! until its reverse-direction counterpart shows up, and only then are rules
//! installed for both directions. One-way (typically spoofed) traffic never
//! gets a rule.

use std::collections::{HashMap, VecDeque};
use std::mem;

use crate::error::Result;
use crate::switch::{Actions, Switch, SwitchEvent};
use crate::traffic::{flow_key_of, symmetric_of, FlowKey, PacketHeader};

pub const DEFAULT_PENDING_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryReason {
    TableMiss,
    InstalledRuleToController,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcfiAction {
    /// Install rules for both directions; `symflow` has been removed from the pending list.
    InstallBoth {
        flow: FlowKey,
        symflow: FlowKey,
    },
    ForwardOnly,
    Recorded,
}

/// Insertion-ordered set of pending flows with FIFO eviction.
///
/// Removals are lazy: the queue may hold stale keys whose sequence number no
/// longer matches the map, and those are skipped on eviction.
#[derive(Debug, Clone)]
pub struct PendingFlows {
    seq_of: HashMap<FlowKey, u64>,
    order: VecDeque<(FlowKey, u64)>,
    next_seq: u64,
    capacity: usize,
    evicted: u64,
}

impl PendingFlows {
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "pending flow capacity must be positive");
        PendingFlows {
            seq_of: HashMap::new(),
            order: VecDeque::new(),
            next_seq: 0,
            capacity,
            evicted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.seq_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq_of.is_empty()
    }

    pub fn contains(&self, key: &FlowKey) -> bool {
        self.seq_of.contains_key(key)
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    pub fn remove(&mut self, key: &FlowKey) -> bool {
        self.seq_of.remove(key).is_some()
    }

    pub fn insert(&mut self, key: FlowKey) {
        if self.seq_of.contains_key(&key) {
            return;
        }
        while self.seq_of.len() >= self.capacity {
            let Some((old, seq)) = self.order.pop_front() else {
                break;
            };
            if self.seq_of.get(&old) == Some(&seq) {
                self.seq_of.remove(&old);
                self.evicted += 1;
            }
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.seq_of.insert(key, seq);
        self.order.push_back((key, seq));
        if self.order.len() > 2 * self.seq_of.len() + 1024 {
            let seq_of = &self.seq_of;
            self.order.retain(|(k, s)| seq_of.get(k) == Some(s));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlowKey> {
        self.seq_of.keys()
    }
}

#[derive(Debug, Clone)]
pub struct Tcfi {
    packets: Vec<PacketHeader>,
    pending: PendingFlows,
}

impl Default for Tcfi {
    fn default() -> Self {
        Self::new(DEFAULT_PENDING_CAPACITY)
    }
}

impl Tcfi {
    pub fn new(pending_capacity: usize) -> Self {
        Tcfi {
            packets: Vec::new(),
            pending: PendingFlows::with_capacity(pending_capacity),
        }
    }

    pub fn pending(&self) -> &PendingFlows {
        &self.pending
    }

    pub fn packets(&self) -> &[PacketHeader] {
        &self.packets
    }

    pub fn on_packet(&mut self, pkt: &PacketHeader, reason: DeliveryReason) -> TcfiAction {
        self.packets.push(*pkt);
        if reason == DeliveryReason::InstalledRuleToController {
            return TcfiAction::Recorded;
        }
        let flow = flow_key_of(pkt);
        let symflow = symmetric_of(&flow).filter(|s| *s != flow);
        if let Some(symflow) = symflow {
            if self.pending.remove(&symflow) {
                return TcfiAction::InstallBoth { flow, symflow };
            }
        }
        // Covers both the "new flow" and "already pending" branches.
        self.pending.insert(flow);
        TcfiAction::ForwardOnly
    }

    /// Hands over the headers collected since the last call. Pending flows persist.
    pub fn snapshot_and_reset(&mut self) -> Vec<PacketHeader> {
        mem::take(&mut self.packets)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub packets: u64,
    pub table_misses: u64,
    pub rules_installed: u64,
    pub packet_outs: u64,
    pub dropped: u64,
}

/// Reactive controller: wires a [`Switch`] to the [`Tcfi`] application.
#[derive(Debug, Clone)]
pub struct Controller {
    switch: Switch,
    tcfi: Tcfi,
    stats: ControllerStats,
}

impl Controller {
    pub fn new(switch: Switch, tcfi: Tcfi) -> Self {
        Controller {
            switch,
            tcfi,
            stats: ControllerStats::default(),
        }
    }

    pub fn switch(&self) -> &Switch {
        &self.switch
    }

    pub fn tcfi(&self) -> &Tcfi {
        &self.tcfi
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    /// Pushes one packet through the switch and, when it reaches the
    /// controller, through the TCFI. Returns what the TCFI decided, or `None`
    /// when the packet never reached the controller.
    pub fn ingest(&mut self, pkt: &PacketHeader) -> Result<Option<TcfiAction>> {
        self.stats.packets += 1;
        match self.switch.receive(pkt, pkt.timestamp) {
            SwitchEvent::Matched { actions, .. } => {
                if !actions.to_controller {
                    return Ok(None);
                }
                Ok(Some(
                    self.tcfi
                        .on_packet(pkt, DeliveryReason::InstalledRuleToController),
                ))
            }
            SwitchEvent::TableMiss(pkt) => {
                self.stats.table_misses += 1;
                let action = self.tcfi.on_packet(&pkt, DeliveryReason::TableMiss);
                if let TcfiAction::InstallBoth { flow, symflow } = action {
                    let timeout = self.switch.topology().idle_timeout;
                    for key in [symflow, flow] {
                        let actions = Actions {
                            forward: self.switch.topology().port_for(key.dst_ip),
                            to_controller: true,
                        };
                        self.switch.install_rule(key, actions, timeout);
                        self.stats.rules_installed += 1;
                    }
                }
                match self.switch.topology().port_for(pkt.dst_ip) {
                    Some(port) => {
                        self.switch.packet_out(&pkt, port)?;
                        self.stats.packet_outs += 1;
                    }
                    None => {
                        self.switch.drop_packet();
                        self.stats.dropped += 1;
                    }
                }
                Ok(Some(action))
            }
        }
    }

    pub fn snapshot_and_reset(&mut self) -> Vec<PacketHeader> {
        self.tcfi.snapshot_and_reset()
    }

    pub fn expire_idle(&mut self, now: f64) -> usize {
        self.switch.expire_idle(now)
    }
}
