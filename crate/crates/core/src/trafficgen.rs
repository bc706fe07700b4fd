//! Seeded synthetic traffic: bidirectional background traffic for a set of
//! hosts plus one-way TCP/UDP/ICMP floods against chosen victims.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! seed = 7
//! duration = 600          # seconds
//! interval = 60           # labelling interval
//! hosts = ["10.0.0.1", "10.0.0.2"]
//! victims = ["10.0.0.2"]
//!
//! [normal_profile]
//! flows_per_minute = 15
//!
//! [[attack_segments]]
//! start = 120
//! end = 240
//! vector_set = ["T", "U"]
//! victim = "10.0.0.2"
//! packet_rate = 10        # packets per second per vector
//! spoofing = true
//! ```
//!
//! An optional `[rotation]` table expands into a regular schedule that
//! cycles every victim through all seven attack classes.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{AttackVector, TrafficClass};
use crate::traffic::{PacketHeader, TcpFlags, Transport};

pub const DEFAULT_INTERVAL: f64 = 60.0;

fn default_interval() -> f64 {
    DEFAULT_INTERVAL
}

fn default_true() -> bool {
    true
}

fn default_packet_rate() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_interval")]
    pub interval: f64,
    pub hosts: Vec<Ipv4Addr>,
    #[serde(default)]
    pub victims: Vec<Ipv4Addr>,
    #[serde(default)]
    pub normal_profile: NormalProfile,
    #[serde(default)]
    pub attack_segments: Vec<AttackSegment>,
    #[serde(default)]
    pub rotation: Option<Rotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalProfile {
    /// Mean number of flows each host opens or accepts per minute.
    pub flows_per_minute: f64,
    pub flow_length: FlowLength,
    pub port_mix: PortMix,
    /// Share of flows initiated by remote peers rather than the host.
    pub inbound_fraction: f64,
}

impl Default for NormalProfile {
    fn default() -> Self {
        NormalProfile {
            flows_per_minute: 15.0,
            flow_length: FlowLength::default(),
            port_mix: PortMix::default(),
            inbound_fraction: 0.1,
        }
    }
}

/// Geometric number of data exchanges per TCP or media flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowLength {
    pub mean_exchanges: f64,
    pub max_exchanges: u32,
}

impl Default for FlowLength {
    fn default() -> Self {
        FlowLength {
            mean_exchanges: 4.0,
            max_exchanges: 40,
        }
    }
}

/// Relative weights of the background applications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortMix {
    /// TCP to ports 80/443.
    pub web: f64,
    /// UDP query/response to port 53.
    pub dns: f64,
    /// ICMP echo request/reply.
    pub ping: f64,
    /// UDP exchanges between high ports.
    pub media: f64,
}

impl Default for PortMix {
    fn default() -> Self {
        PortMix {
            web: 0.55,
            dns: 0.25,
            ping: 0.1,
            media: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSegment {
    pub start: f64,
    pub end: f64,
    pub vector_set: Vec<AttackVector>,
    pub victim: Ipv4Addr,
    /// Packets per second for each vector in the set.
    #[serde(default = "default_packet_rate")]
    pub packet_rate: f64,
    #[serde(default = "default_true")]
    pub spoofing: bool,
}

impl AttackSegment {
    pub fn class(&self) -> TrafficClass {
        TrafficClass::from_vectors(self.vector_set.iter().copied())
    }
}

/// Repeating schedule: each victim is attacked for `segment_intervals`
/// intervals, rests for `gap_intervals`, then moves on to the next attack
/// class. Victims start at staggered classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rotation {
    pub start: f64,
    pub segment_intervals: u32,
    pub gap_intervals: u32,
    /// Per-vector packet rate is drawn uniformly from `[rate_min, rate_max]`.
    pub rate_min: f64,
    pub rate_max: f64,
    pub spoofing: bool,
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation {
            start: 0.0,
            segment_intervals: 5,
            gap_intervals: 2,
            rate_min: 2.5,
            rate_max: 25.0,
            spoofing: true,
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn num_intervals(&self) -> u64 {
        (self.duration / self.interval).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.interval.is_finite() && self.interval > 0.0) {
            return bad(format!("interval must be positive, got {}", self.interval));
        }
        if self.hosts.is_empty() {
            return bad("at least one host is required".into());
        }
        let hosts: BTreeSet<_> = self.hosts.iter().collect();
        if hosts.len() != self.hosts.len() {
            return bad("duplicate host address".into());
        }
        for v in &self.victims {
            if !hosts.contains(v) {
                return bad(format!("victim {v} is not one of the hosts"));
            }
        }
        let p = &self.normal_profile;
        let mix = &p.port_mix;
        let weights = [mix.web, mix.dns, mix.ping, mix.media];
        if !(p.flows_per_minute.is_finite() && p.flows_per_minute >= 0.0) {
            return bad("flows_per_minute must be non-negative".into());
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || weights.iter().sum::<f64>() <= 0.0
        {
            return bad("port_mix weights must be non-negative and not all zero".into());
        }
        if !(0.0..=1.0).contains(&p.inbound_fraction) {
            return bad("inbound_fraction must lie in [0, 1]".into());
        }
        let mean = p.flow_length.mean_exchanges;
        if !(mean.is_finite() && mean >= 1.0) || p.flow_length.max_exchanges == 0 {
            return bad("flow_length needs mean_exchanges >= 1 and max_exchanges >= 1".into());
        }
        for (i, s) in self.attack_segments.iter().enumerate() {
            if !hosts.contains(&s.victim) {
                return bad(format!(
                    "segment {i}: victim {} is not one of the hosts",
                    s.victim
                ));
            }
            if s.vector_set.is_empty() {
                return bad(format!("segment {i}: empty vector_set"));
            }
            if !(s.start >= 0.0 && s.start < s.end && s.end <= self.duration) {
                return bad(format!(
                    "segment {i}: [{}, {}) must satisfy 0 <= start < end <= duration",
                    s.start, s.end
                ));
            }
            if !(s.packet_rate.is_finite() && s.packet_rate > 0.0) {
                return bad(format!("segment {i}: packet_rate must be positive"));
            }
        }
        if let Some(r) = &self.rotation {
            if self.victims.is_empty() {
                return bad("rotation requires at least one victim".into());
            }
            if r.segment_intervals == 0 {
                return bad("rotation.segment_intervals must be positive".into());
            }
            if !(r.rate_min > 0.0 && r.rate_min <= r.rate_max && r.rate_max.is_finite()) {
                return bad("rotation needs 0 < rate_min <= rate_max".into());
            }
            if !(r.start >= 0.0 && r.start < self.duration) {
                return bad("rotation.start must lie in [0, duration)".into());
            }
        }
        Ok(())
    }

    /// Explicit segments followed by the expansion of `rotation`, if any.
    pub fn all_segments(&self) -> Vec<AttackSegment> {
        let mut segments = self.attack_segments.clone();
        let Some(r) = &self.rotation else {
            return segments;
        };
        let mut rng = stream_rng(self.seed, Stream::Rotation);
        let cycle = [
            TrafficClass::T,
            TrafficClass::U,
            TrafficClass::I,
            TrafficClass::TU,
            TrafficClass::TI,
            TrafficClass::UI,
            TrafficClass::A,
        ];
        let seg_len = f64::from(r.segment_intervals) * self.interval;
        let period = f64::from(r.segment_intervals + r.gap_intervals) * self.interval;
        for (slot, start) in (0..)
            .map(|j| (j, r.start + j as f64 * period))
            .take_while(|(_, s)| s + seg_len <= self.duration)
        {
            for (vi, &victim) in self.victims.iter().enumerate() {
                let class = cycle[(slot + vi) % cycle.len()];
                segments.push(AttackSegment {
                    start,
                    end: start + seg_len,
                    vector_set: class.vectors(),
                    victim,
                    packet_rate: rng.random_range(r.rate_min..=r.rate_max),
                    spoofing: r.spoofing,
                });
            }
        }
        segments
    }
}

/// Ground-truth class of every (host, interval) of a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    interval: u64,
    labels: BTreeMap<(Ipv4Addr, u64), TrafficClass>,
}

impl GroundTruth {
    /// Labels every host's intervals; attacked intervals get the union of
    /// the vectors of all segments overlapping them.
    pub fn from_spec(spec: &ScenarioSpec, segments: &[AttackSegment]) -> Self {
        let n = spec.num_intervals();
        let mut vectors: BTreeMap<(Ipv4Addr, u64), BTreeSet<AttackVector>> = BTreeMap::new();
        for s in segments {
            let first = (s.start / spec.interval).floor() as u64;
            let last = ((s.end / spec.interval).ceil() as u64).min(n);
            for k in first..last {
                let (lo, hi) = (k as f64 * spec.interval, (k + 1) as f64 * spec.interval);
                if s.start < hi && s.end > lo {
                    vectors
                        .entry((s.victim, k))
                        .or_default()
                        .extend(s.vector_set.iter().copied());
                }
            }
        }
        let mut labels = BTreeMap::new();
        for &h in &spec.hosts {
            for k in 0..n {
                let class = vectors.get(&(h, k)).map_or(TrafficClass::N, |v| {
                    TrafficClass::from_vectors(v.iter().copied())
                });
                labels.insert((h, k), class);
            }
        }
        GroundTruth {
            interval: spec.interval.round() as u64,
            labels,
        }
    }

    pub fn get(&self, host: Ipv4Addr, interval_index: u64) -> Option<TrafficClass> {
        self.labels.get(&(host, interval_index)).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(host, interval_start, class)` in host-then-time order.
    pub fn rows(&self) -> impl Iterator<Item = (Ipv4Addr, f64, TrafficClass)> + '_ {
        self.labels
            .iter()
            .map(|(&(h, k), &c)| (h, (k * self.interval) as f64, c))
    }

    pub fn class_counts(&self) -> BTreeMap<TrafficClass, usize> {
        let mut counts = BTreeMap::new();
        for c in self.labels.values() {
            *counts.entry(*c).or_default() += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTrace {
    pub packets: Vec<PacketHeader>,
    pub ground_truth: GroundTruth,
    pub segments: Vec<AttackSegment>,
}

#[derive(Debug, Clone, Copy)]
enum Stream {
    Rotation,
    Normal,
    Segment(u64),
}

/// Independent deterministic sub-stream per generation stage, so adding an
/// attack segment does not perturb the background traffic.
fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match stream {
        Stream::Rotation => 0,
        Stream::Normal => 1,
        Stream::Segment(i) => 2 + i,
    });
    rng
}

struct Emitter {
    duration: f64,
    packets: Vec<(PacketHeader, u64)>,
    seq: u64,
}

impl Emitter {
    fn emit(&mut self, mut pkt: PacketHeader) {
        // Microsecond timestamps so the CSV form round-trips exactly.
        pkt.timestamp = (pkt.timestamp * 1e6).round() / 1e6;
        if pkt.timestamp < 0.0 || pkt.timestamp >= self.duration {
            return;
        }
        self.packets.push((pkt, self.seq));
        self.seq += 1;
    }

    fn finish(mut self) -> Vec<PacketHeader> {
        self.packets.sort_by(|(a, sa), (b, sb)| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then(a.src_ip.cmp(&b.src_ip))
                .then(sa.cmp(sb))
        });
        self.packets.into_iter().map(|(p, _)| p).collect()
    }
}

fn is_public(ip: Ipv4Addr) -> bool {
    let o = ip.octets();
    !(o[0] == 0
        || o[0] == 10
        || o[0] == 127
        || o[0] >= 224
        || (o[0] == 172 && (16..32).contains(&o[1]))
        || (o[0] == 192 && o[1] == 168)
        || (o[0] == 100 && (64..128).contains(&o[1]))
        || (o[0] == 169 && o[1] == 254))
}

fn random_public_ip<R: Rng>(rng: &mut R) -> Ipv4Addr {
    loop {
        let ip = Ipv4Addr::from(rng.random::<u32>());
        if is_public(ip) {
            return ip;
        }
    }
}

/// TTL as seen at the switch for a remote peer: a common initial TTL minus a
/// stable per-peer hop count.
fn remote_ttl(ip: Ipv4Addr) -> u8 {
    let o = ip.octets();
    let mix = u32::from(o[0]) * 31 + u32::from(o[1]) * 17 + u32::from(o[2]) * 7 + u32::from(o[3]);
    let initial: u32 = [64, 128, 255][(mix % 3) as usize];
    (initial - 6 - mix % 18) as u8
}

fn ephemeral_port<R: Rng>(rng: &mut R) -> u16 {
    rng.random_range(32768..=60999)
}

/// Number of exchanges drawn from a geometric distribution with the given
/// mean, capped.
fn exchanges<R: Rng>(rng: &mut R, len: &FlowLength) -> u32 {
    let p = 1.0 / len.mean_exchanges;
    let mut n = 1;
    while n < len.max_exchanges && rng.random::<f64>() >= p {
        n += 1;
    }
    n
}

struct HostProfile {
    ip: Ipv4Addr,
    ttl: u8,
    window: u16,
    ping_size: u32,
}

struct Peers {
    web: Vec<Ipv4Addr>,
    dns: Vec<Ipv4Addr>,
    media: Vec<Ipv4Addr>,
}

#[derive(Clone, Copy)]
enum App {
    Web,
    Dns,
    Ping,
    Media,
}

struct Conversation {
    start: f64,
    rtt: f64,
    /// The side that opens the conversation.
    client: (Ipv4Addr, u8),
    server: (Ipv4Addr, u8),
}

impl Conversation {
    fn client_pkt(&self, t: f64, data_size: u32, transport: Transport) -> PacketHeader {
        PacketHeader {
            timestamp: self.start + t,
            src_ip: self.client.0,
            dst_ip: self.server.0,
            ttl: self.client.1,
            data_size,
            transport,
        }
    }

    fn server_pkt(&self, t: f64, data_size: u32, transport: Transport) -> PacketHeader {
        PacketHeader {
            timestamp: self.start + t,
            src_ip: self.server.0,
            dst_ip: self.client.0,
            ttl: self.server.1,
            data_size,
            transport,
        }
    }
}

fn tcp_flow<R: Rng>(
    out: &mut Emitter,
    rng: &mut R,
    conv: &Conversation,
    ports: (u16, u16),
    windows: (u16, u16),
    n: u32,
) {
    let (cp, sp) = ports;
    let c = |flags, window| Transport::Tcp {
        src_port: cp,
        dst_port: sp,
        flags,
        window,
    };
    let s = |flags, window| Transport::Tcp {
        src_port: sp,
        dst_port: cp,
        flags,
        window,
    };
    let (cw, sw) = windows;
    let rtt = conv.rtt;
    let mut t = 0.0;
    out.emit(conv.client_pkt(t, 0, c(TcpFlags::SYN, cw)));
    t += rtt;
    out.emit(conv.server_pkt(t, 0, s(TcpFlags::SYN | TcpFlags::ACK, sw)));
    t += rtt / 2.0;
    out.emit(conv.client_pkt(t, 0, c(TcpFlags::ACK, cw)));
    for _ in 0..n {
        t += rng.random_range(0.001..0.05);
        let req = rng.random_range(80..700);
        out.emit(conv.client_pkt(t, req, c(TcpFlags::PSH | TcpFlags::ACK, cw)));
        let segments = rng.random_range(1..=4);
        for i in 0..segments {
            t += if i == 0 {
                rtt
            } else {
                rng.random_range(0.0005..0.005)
            };
            let flags = if i + 1 == segments {
                TcpFlags::PSH | TcpFlags::ACK
            } else {
                TcpFlags::ACK
            };
            let size = rng.random_range(200..=1460);
            out.emit(conv.server_pkt(t, size, s(flags, sw)));
        }
        t += rtt / 2.0;
        out.emit(conv.client_pkt(t, 0, c(TcpFlags::ACK, cw)));
    }
    t += rng.random_range(0.01..0.5);
    out.emit(conv.client_pkt(t, 0, c(TcpFlags::FIN | TcpFlags::ACK, cw)));
    t += rtt;
    out.emit(conv.server_pkt(t, 0, s(TcpFlags::FIN | TcpFlags::ACK, sw)));
    t += rtt / 2.0;
    out.emit(conv.client_pkt(t, 0, c(TcpFlags::ACK, cw)));
}

fn udp_exchange<R: Rng>(
    out: &mut Emitter,
    rng: &mut R,
    conv: &Conversation,
    ports: (u16, u16),
    n: u32,
    sizes: (std::ops::Range<u32>, std::ops::Range<u32>),
) {
    let (cp, sp) = ports;
    let mut t = 0.0;
    for _ in 0..n {
        let req = Transport::Udp {
            src_port: cp,
            dst_port: sp,
        };
        out.emit(conv.client_pkt(t, rng.random_range(sizes.0.clone()), req));
        t += conv.rtt;
        let resp = Transport::Udp {
            src_port: sp,
            dst_port: cp,
        };
        out.emit(conv.server_pkt(t, rng.random_range(sizes.1.clone()), resp));
        t += rng.random_range(0.01..0.3);
    }
}

fn ping<R: Rng>(out: &mut Emitter, rng: &mut R, conv: &Conversation, size: u32) {
    let count = rng.random_range(1..=4);
    for i in 0..count {
        let t = f64::from(i);
        let req = Transport::Icmp {
            icmp_type: 8,
            icmp_code: 0,
        };
        let rep = Transport::Icmp {
            icmp_type: 0,
            icmp_code: 0,
        };
        out.emit(conv.client_pkt(t, size, req));
        out.emit(conv.server_pkt(t + conv.rtt, size, rep));
    }
}

fn generate_normal(spec: &ScenarioSpec, out: &mut Emitter) {
    let mut rng = stream_rng(spec.seed, Stream::Normal);
    let peers = Peers {
        web: (0..48).map(|_| random_public_ip(&mut rng)).collect(),
        dns: vec![
            Ipv4Addr::new(8, 8, 8, 8),
            Ipv4Addr::new(1, 1, 1, 1),
            Ipv4Addr::new(9, 9, 9, 9),
        ],
        media: (0..24).map(|_| random_public_ip(&mut rng)).collect(),
    };
    let hosts: Vec<HostProfile> = spec
        .hosts
        .iter()
        .map(|&ip| HostProfile {
            ip,
            ttl: *[64u8, 128].choose(&mut rng).unwrap(),
            window: *[64240u16, 65535, 29200, 8192].choose(&mut rng).unwrap(),
            ping_size: *[56u32, 32].choose(&mut rng).unwrap(),
        })
        .collect();
    let profile = &spec.normal_profile;
    let mix = &profile.port_mix;
    let apps = [
        (App::Web, mix.web),
        (App::Dns, mix.dns),
        (App::Ping, mix.ping),
        (App::Media, mix.media),
    ];
    let mean = profile.flows_per_minute * spec.interval / 60.0;
    let poisson = (mean > 0.0).then(|| Poisson::new(mean).expect("positive mean"));

    for k in 0..spec.num_intervals() {
        let lo = k as f64 * spec.interval;
        for host in &hosts {
            let n = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
            for _ in 0..n {
                let start = lo + rng.random_range(0.0..spec.interval);
                let app = apps.choose_weighted(&mut rng, |a| a.1).unwrap().0;
                let inbound = rng.random::<f64>() < profile.inbound_fraction;
                let rtt = rng.random_range(0.005..0.15);
                let local = (host.ip, host.ttl);
                match app {
                    App::Web => {
                        let server = *peers.web.choose(&mut rng).unwrap();
                        let remote = (server, remote_ttl(server));
                        let remote_window = 65535 - (u32::from(server) % 4096) as u16;
                        let n_ex = exchanges(&mut rng, &profile.flow_length);
                        if inbound {
                            let conv = Conversation {
                                start,
                                rtt,
                                client: remote,
                                server: local,
                            };
                            let port = *[22u16, 80, 8080].choose(&mut rng).unwrap();
                            let ports = (ephemeral_port(&mut rng), port);
                            tcp_flow(
                                out,
                                &mut rng,
                                &conv,
                                ports,
                                (remote_window, host.window),
                                n_ex,
                            );
                        } else {
                            let conv = Conversation {
                                start,
                                rtt,
                                client: local,
                                server: remote,
                            };
                            let port = *[80u16, 443, 443].choose(&mut rng).unwrap();
                            let ports = (ephemeral_port(&mut rng), port);
                            tcp_flow(
                                out,
                                &mut rng,
                                &conv,
                                ports,
                                (host.window, remote_window),
                                n_ex,
                            );
                        }
                    }
                    App::Dns => {
                        let resolver = *peers.dns.choose(&mut rng).unwrap();
                        let conv = Conversation {
                            start,
                            rtt,
                            client: local,
                            server: (resolver, remote_ttl(resolver)),
                        };
                        let ports = (ephemeral_port(&mut rng), 53);
                        let n_q = rng.random_range(1..=2);
                        udp_exchange(out, &mut rng, &conv, ports, n_q, (28..80, 60..320));
                    }
                    App::Ping => {
                        let target = *peers.web.choose(&mut rng).unwrap();
                        let remote = (target, remote_ttl(target));
                        let conv = if inbound {
                            Conversation {
                                start,
                                rtt,
                                client: remote,
                                server: local,
                            }
                        } else {
                            Conversation {
                                start,
                                rtt,
                                client: local,
                                server: remote,
                            }
                        };
                        ping(out, &mut rng, &conv, host.ping_size);
                    }
                    App::Media => {
                        let peer = *peers.media.choose(&mut rng).unwrap();
                        let remote = (peer, remote_ttl(peer));
                        let conv = if inbound {
                            Conversation {
                                start,
                                rtt,
                                client: remote,
                                server: local,
                            }
                        } else {
                            Conversation {
                                start,
                                rtt,
                                client: local,
                                server: remote,
                            }
                        };
                        let ports = (ephemeral_port(&mut rng), rng.random_range(16384..32768));
                        let n_ex = exchanges(&mut rng, &profile.flow_length);
                        udp_exchange(out, &mut rng, &conv, ports, n_ex, (60..200, 400..1400));
                    }
                }
            }
        }
    }
}

/// Per-segment randomisation of one flood vector, fixed for the segment's
/// lifetime the way a single attack-tool invocation would be.
struct FloodShape {
    fixed_dst_port: Option<u16>,
    tcp_flags: TcpFlags,
    fixed_window: Option<u16>,
    base_size: u32,
    size_jitter: u32,
}

impl FloodShape {
    fn draw<R: Rng>(rng: &mut R, vector: AttackVector) -> Self {
        let fixed_dst_port = match vector {
            AttackVector::T => rng
                .random_bool(0.5)
                .then(|| *[80u16, 443, 22, 8080].choose(rng).unwrap()),
            AttackVector::U => rng
                .random_bool(0.5)
                .then(|| *[53u16, 123, 1900, 5060].choose(rng).unwrap()),
            AttackVector::I => None,
        };
        let tcp_flags = *[
            TcpFlags::SYN,
            TcpFlags::SYN,
            TcpFlags::SYN,
            TcpFlags::ACK,
            TcpFlags::SYN | TcpFlags::ACK,
            TcpFlags::RST | TcpFlags::ACK,
        ]
        .choose(rng)
        .unwrap();
        FloodShape {
            fixed_dst_port,
            tcp_flags,
            fixed_window: rng.random_bool(0.5).then(|| rng.random_range(512..=65535)),
            base_size: rng.random_range(0..=1200),
            size_jitter: rng.random_range(0..=200),
        }
    }
}

fn generate_flood(spec: &ScenarioSpec, index: u64, seg: &AttackSegment, out: &mut Emitter) {
    let mut rng = stream_rng(spec.seed, Stream::Segment(index));
    let bots: Vec<(Ipv4Addr, u8)> = (0..16)
        .map(|_| {
            let ip = random_public_ip(&mut rng);
            (ip, remote_ttl(ip))
        })
        .collect();
    let mut vectors = seg.vector_set.clone();
    vectors.sort();
    vectors.dedup();
    for vector in vectors {
        let shape = FloodShape::draw(&mut rng, vector);
        let count = (seg.packet_rate * (seg.end - seg.start)).round() as u64;
        for _ in 0..count {
            let (src_ip, ttl) = if seg.spoofing {
                (random_public_ip(&mut rng), rng.random_range(30..=255))
            } else {
                *bots.choose(&mut rng).unwrap()
            };
            let transport = match vector {
                AttackVector::T => Transport::Tcp {
                    src_port: rng.random_range(1024..=65535),
                    dst_port: shape
                        .fixed_dst_port
                        .unwrap_or_else(|| rng.random_range(1..=65535)),
                    flags: shape.tcp_flags,
                    window: shape
                        .fixed_window
                        .unwrap_or_else(|| rng.random_range(0..=65535)),
                },
                AttackVector::U => Transport::Udp {
                    src_port: rng.random_range(1024..=65535),
                    dst_port: shape
                        .fixed_dst_port
                        .unwrap_or_else(|| rng.random_range(1..=65535)),
                },
                AttackVector::I => Transport::Icmp {
                    icmp_type: 8,
                    icmp_code: 0,
                },
            };
            let size = shape.base_size + rng.random_range(0..=shape.size_jitter);
            out.emit(PacketHeader {
                timestamp: rng.random_range(seg.start..seg.end),
                src_ip,
                dst_ip: seg.victim,
                ttl,
                data_size: size,
                transport,
            });
        }
    }
}

/// Generates the trace and its labels. Identical specs give identical output.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedTrace> {
    spec.validate()?;
    let segments = spec.all_segments();
    let mut out = Emitter {
        duration: spec.duration,
        packets: Vec::new(),
        seq: 0,
    };
    generate_normal(spec, &mut out);
    for (i, seg) in segments.iter().enumerate() {
        generate_flood(spec, i as u64, seg, &mut out);
    }
    Ok(GeneratedTrace {
        packets: out.finish(),
        ground_truth: GroundTruth::from_spec(spec, &segments),
        segments,
    })
}
