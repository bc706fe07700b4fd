//! Single OpenFlow-style switch with an exact-match flow table, idle timeouts,
//! per-rule counters and a controller channel.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;

use crate::error::{Error, Result};
use crate::traffic::{flow_key_of, FlowKey, PacketHeader};

pub const DEFAULT_IDLE_TIMEOUT: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortId(pub u16);

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "port {}", self.0)
    }
}

/// Actions attached to a flow rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Actions {
    pub forward: Option<PortId>,
    pub to_controller: bool,
}

impl Actions {
    pub fn forward_and_mirror(port: PortId) -> Self {
        Actions {
            forward: Some(port),
            to_controller: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRule {
    pub match_key: FlowKey,
    pub actions: Actions,
    pub idle_timeout: f64,
    pub packet_count: u64,
    pub byte_count: u64,
    pub last_matched: f64,
}

impl FlowRule {
    fn expired_at(&self, now: f64) -> bool {
        now >= self.last_matched + self.idle_timeout
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchEvent {
    /// An installed rule matched; the switch already applied its forwarding action.
    Matched { key: FlowKey, actions: Actions },
    /// No rule matched; the headers go to the controller as a packet_in.
    TableMiss(PacketHeader),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgressVia {
    Rule,
    PacketOut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgressRecord {
    pub timestamp: f64,
    pub port: PortId,
    pub key: FlowKey,
    pub via: EgressVia,
}

/// Host-to-port map of the switch, read from a `key = value` config file.
///
/// ```text
/// # hosts
/// 10.0.0.1 = 1
/// 10.0.0.2 = 2
/// default_port = 0      # uplink for addresses not listed
/// idle_timeout = 60
/// num_ports = 3         # optional, defaults to highest port + 1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub hosts: BTreeMap<Ipv4Addr, PortId>,
    pub default_port: Option<PortId>,
    pub num_ports: u16,
    pub idle_timeout: f64,
}

impl Topology {
    /// Hosts on ports 1..=n in the given order, uplink on port 0.
    pub fn from_hosts<I: IntoIterator<Item = Ipv4Addr>>(hosts: I) -> Self {
        let mut map = BTreeMap::new();
        for ip in hosts {
            let next = PortId(map.len() as u16 + 1);
            map.entry(ip).or_insert(next);
        }
        let num_ports = map.len() as u16 + 1;
        Topology {
            hosts: map,
            default_port: Some(PortId(0)),
            num_ports,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut hosts = BTreeMap::new();
        let mut default_port = None;
        let mut num_ports = None;
        let mut idle_timeout = DEFAULT_IDLE_TIMEOUT;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let port = |v: &str| {
                v.parse::<u16>()
                    .map(PortId)
                    .map_err(|_| err(format!("bad port id `{v}`")))
            };
            match key {
                "idle_timeout" => {
                    idle_timeout = value
                        .parse::<f64>()
                        .ok()
                        .filter(|t| t.is_finite() && *t > 0.0)
                        .ok_or_else(|| err(format!("bad idle_timeout `{value}`")))?;
                }
                "default_port" => default_port = Some(port(value)?),
                "num_ports" => {
                    num_ports = Some(
                        value
                            .parse::<u16>()
                            .map_err(|_| err(format!("bad num_ports `{value}`")))?,
                    )
                }
                host => {
                    let ip: Ipv4Addr = host
                        .parse()
                        .map_err(|_| err(format!("unknown key `{host}`")))?;
                    if hosts.insert(ip, port(value)?).is_some() {
                        return Err(err(format!("host {ip} listed twice")));
                    }
                }
            }
        }
        let highest = hosts.values().chain(default_port.iter()).map(|p| p.0).max();
        let needed = highest.map_or(0, |p| p + 1);
        let num_ports = num_ports.unwrap_or(needed);
        if num_ports < needed {
            return Err(Error::Config(format!(
                "num_ports = {num_ports} but port {} is referenced",
                needed - 1
            )));
        }
        Ok(Topology {
            hosts,
            default_port,
            num_ports,
            idle_timeout,
        })
    }

    pub fn port_for(&self, ip: Ipv4Addr) -> Option<PortId> {
        self.hosts.get(&ip).copied().or(self.default_port)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EgressLog {
    pub per_port: Vec<u64>,
    pub dropped: u64,
    entries: Option<Vec<EgressRecord>>,
}

impl EgressLog {
    pub fn entries(&self) -> Option<&[EgressRecord]> {
        self.entries.as_deref()
    }

    pub fn total(&self) -> u64 {
        self.per_port.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Switch {
    topology: Topology,
    table: HashMap<FlowKey, FlowRule>,
    clock: f64,
    egress: EgressLog,
}

impl Switch {
    pub fn new(topology: Topology) -> Self {
        let ports = topology.num_ports as usize;
        Switch {
            topology,
            table: HashMap::new(),
            clock: 0.0,
            egress: EgressLog {
                per_port: vec![0; ports],
                ..Default::default()
            },
        }
    }

    /// Keep every egress record in memory (off by default; traces can be large).
    pub fn with_egress_log(mut self) -> Self {
        self.egress.entries = Some(Vec::new());
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn egress(&self) -> &EgressLog {
        &self.egress
    }

    pub fn rule(&self, key: &FlowKey) -> Option<&FlowRule> {
        self.table.get(key)
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.table.values()
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    pub fn receive(&mut self, pkt: &PacketHeader, now: f64) -> SwitchEvent {
        self.clock = self.clock.max(now);
        let key = flow_key_of(pkt);
        let Some(rule) = self.table.get_mut(&key) else {
            return SwitchEvent::TableMiss(*pkt);
        };
        if rule.expired_at(now) {
            self.table.remove(&key);
            return SwitchEvent::TableMiss(*pkt);
        }
        rule.packet_count += 1;
        rule.byte_count += u64::from(pkt.data_size);
        rule.last_matched = now;
        let actions = rule.actions;
        match actions.forward {
            Some(port) => self.emit(pkt.timestamp, port, key, EgressVia::Rule),
            None => self.egress.dropped += 1,
        }
        SwitchEvent::Matched { key, actions }
    }

    /// Installs (or replaces) the exact-match rule for `match_key`.
    pub fn install_rule(&mut self, match_key: FlowKey, actions: Actions, idle_timeout: f64) {
        self.table.insert(
            match_key,
            FlowRule {
                match_key,
                actions,
                idle_timeout,
                packet_count: 0,
                byte_count: 0,
                last_matched: self.clock,
            },
        );
    }

    pub fn packet_out(&mut self, pkt: &PacketHeader, port: PortId) -> Result<()> {
        if port.0 >= self.topology.num_ports {
            return Err(Error::UnknownPort {
                port: port.0,
                num_ports: self.topology.num_ports,
            });
        }
        self.emit(pkt.timestamp, port, flow_key_of(pkt), EgressVia::PacketOut);
        Ok(())
    }

    /// Counts a packet the controller chose not to forward.
    pub fn drop_packet(&mut self) {
        self.egress.dropped += 1;
    }

    /// Evicts every rule idle for at least its timeout. Returns the number removed.
    pub fn expire_idle(&mut self, now: f64) -> usize {
        let before = self.table.len();
        self.table.retain(|_, rule| !rule.expired_at(now));
        before - self.table.len()
    }

    fn emit(&mut self, timestamp: f64, port: PortId, key: FlowKey, via: EgressVia) {
        self.egress.per_port[port.0 as usize] += 1;
        if let Some(entries) = self.egress.entries.as_mut() {
            entries.push(EgressRecord {
                timestamp,
                port,
                key,
                via,
            });
        }
    }
}
