//! Per-host, per-interval flow features.
//!
//! Each host that received traffic during an interval gets a 68-value
//! vector: features 1-34 describe TCP flows, 35-54 UDP flows and 55-68 ICMP
//! flows. "Incoming" flows have the host as destination, "outgoing" flows
//! have it as source. Distinct-value counts and entropies count flows, not
//! packets: a flow contributes each distinct value it carries once.
//!
//! Degenerate cases (no flows of a protocol, no outgoing traffic) produce 0
//! rather than NaN so every vector is total and non-negative.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;
use std::net::Ipv4Addr;

use crate::traffic::{symmetric_of, FlowKey, PacketHeader, Protocol, TcpFlags};

pub const NUM_FEATURES: usize = 68;

/// Highest destination port counted as "well known" by features 21 and 51.
pub const LOW_PORT_LIMIT: u16 = 1024;

/// Short descriptions of features 1..=68, in order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "tcp_in_flows",
    "tcp_in_fraction",
    "tcp_out_flows",
    "tcp_out_fraction",
    "tcp_in_symmetric_fraction",
    "tcp_in_asymmetric_fraction",
    "tcp_in_distinct_src_ip",
    "tcp_in_src_ip_entropy",
    "tcp_in_bytes_per_flow",
    "tcp_out_bytes_per_flow",
    "tcp_in_packets_per_flow",
    "tcp_out_packets_per_flow",
    "tcp_in_distinct_window",
    "tcp_in_window_entropy",
    "tcp_in_distinct_ttl",
    "tcp_in_ttl_entropy",
    "tcp_in_distinct_src_port",
    "tcp_in_src_port_entropy",
    "tcp_in_distinct_dst_port",
    "tcp_in_dst_port_entropy",
    "tcp_in_low_dst_port_fraction",
    "tcp_in_high_dst_port_fraction",
    "tcp_in_syn_fraction",
    "tcp_out_syn_fraction",
    "tcp_in_ack_fraction",
    "tcp_out_ack_fraction",
    "tcp_in_urg_fraction",
    "tcp_out_urg_fraction",
    "tcp_in_fin_fraction",
    "tcp_out_fin_fraction",
    "tcp_in_rst_fraction",
    "tcp_out_rst_fraction",
    "tcp_in_psh_fraction",
    "tcp_out_psh_fraction",
    "udp_in_flows",
    "udp_in_fraction",
    "udp_out_flows",
    "udp_out_fraction",
    "udp_in_symmetric_fraction",
    "udp_in_asymmetric_fraction",
    "udp_in_distinct_src_ip",
    "udp_in_src_ip_entropy",
    "udp_in_bytes_per_flow",
    "udp_out_bytes_per_flow",
    "udp_in_packets_per_flow",
    "udp_out_packets_per_flow",
    "udp_in_distinct_src_port",
    "udp_in_src_port_entropy",
    "udp_in_distinct_dst_port",
    "udp_in_dst_port_entropy",
    "udp_in_low_dst_port_fraction",
    "udp_in_high_dst_port_fraction",
    "udp_in_distinct_ttl",
    "udp_in_ttl_entropy",
    "icmp_in_flows",
    "icmp_in_fraction",
    "icmp_out_flows",
    "icmp_out_fraction",
    "icmp_in_symmetric_fraction",
    "icmp_in_asymmetric_flows",
    "icmp_in_distinct_src_ip",
    "icmp_in_src_ip_entropy",
    "icmp_in_bytes_per_flow",
    "icmp_out_bytes_per_flow",
    "icmp_in_packets_per_flow",
    "icmp_out_packets_per_flow",
    "icmp_in_distinct_ttl",
    "icmp_in_ttl_entropy",
];

/// 1-based feature numbers of every entropy feature, paired with the
/// distinct-count feature it belongs to.
pub const ENTROPY_PAIRS: [(usize, usize); 11] = [
    (7, 8),
    (13, 14),
    (15, 16),
    (17, 18),
    (19, 20),
    (41, 42),
    (47, 48),
    (49, 50),
    (53, 54),
    (61, 62),
    (67, 68),
];

/// 1-based numbers of features bounded to [0, 1].
pub const FRACTION_FEATURES: [usize; 27] = [
    2, 4, 5, 6, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34, 36, 38, 39, 40, 51, 52, 56,
    58, 59,
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub host: Ipv4Addr,
    pub interval_start: f64,
    pub values: [f64; NUM_FEATURES],
}

impl FeatureVector {
    /// Feature by its 1-based number.
    pub fn feature(&self, number: usize) -> f64 {
        self.values[number - 1]
    }
}

type FlowMap<'a> = BTreeMap<FlowKey, Vec<&'a PacketHeader>>;

/// Flows of one direction, split by protocol.
#[derive(Debug, Clone, Default)]
pub struct FlowsByProtocol<'a> {
    maps: [FlowMap<'a>; 3],
}

impl<'a> FlowsByProtocol<'a> {
    pub fn get(&self, proto: Protocol) -> &FlowMap<'a> {
        &self.maps[proto.index()]
    }

    pub fn total_flows(&self) -> usize {
        self.maps.iter().map(BTreeMap::len).sum()
    }

    fn push(&mut self, pkt: &'a PacketHeader) {
        self.maps[pkt.protocol().index()]
            .entry(pkt.flow_key())
            .or_default()
            .push(pkt);
    }
}

#[derive(Debug, Clone)]
pub struct HostFlowView<'a> {
    pub host: Ipv4Addr,
    pub incoming: FlowsByProtocol<'a>,
    pub outgoing: FlowsByProtocol<'a>,
}

/// One view per destination host in the snapshot, ordered by address.
pub fn group_by_host(snapshot: &[PacketHeader]) -> Vec<HostFlowView<'_>> {
    let mut views: BTreeMap<Ipv4Addr, HostFlowView<'_>> = snapshot
        .iter()
        .map(|p| {
            (
                p.dst_ip,
                HostFlowView {
                    host: p.dst_ip,
                    incoming: FlowsByProtocol::default(),
                    outgoing: FlowsByProtocol::default(),
                },
            )
        })
        .collect();
    for pkt in snapshot {
        if let Some(view) = views.get_mut(&pkt.dst_ip) {
            view.incoming.push(pkt);
        }
        if let Some(view) = views.get_mut(&pkt.src_ip) {
            view.outgoing.push(pkt);
        }
    }
    views.into_values().collect()
}

/// Shannon entropy in bits of a frequency table. Empty input yields 0.
pub fn entropy(freqs: &[u64]) -> f64 {
    let total: u64 = freqs.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total_f = total as f64;
    let weighted: f64 = freqs
        .iter()
        .filter(|&&f| f > 0)
        .map(|&f| {
            let f = f as f64;
            f * f.log2()
        })
        .sum();
    (total_f.log2() - weighted / total_f).max(0.0)
}

/// Median with the mean-of-middle-pair convention. Empty input yields 0.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Distinct-value count and entropy where each flow contributes each value
/// it carries once.
fn distinct_and_entropy<T, I>(per_flow_values: I) -> (f64, f64)
where
    T: Eq + Hash,
    I: IntoIterator,
    I::Item: IntoIterator<Item = T>,
{
    let mut freq: HashMap<T, u64> = HashMap::new();
    for values in per_flow_values {
        for v in values {
            *freq.entry(v).or_default() += 1;
        }
    }
    // Sorted so the floating-point sum does not depend on hash order.
    let mut counts: Vec<u64> = freq.into_values().collect();
    counts.sort_unstable();
    (counts.len() as f64, entropy(&counts))
}

fn bytes_of(packets: &[&PacketHeader]) -> f64 {
    packets.iter().map(|p| f64::from(p.data_size)).sum()
}

fn median_bytes(flows: &FlowMap<'_>) -> f64 {
    median(&flows.values().map(|p| bytes_of(p)).collect::<Vec<_>>())
}

fn median_packets(flows: &FlowMap<'_>) -> f64 {
    median(&flows.values().map(|p| p.len() as f64).collect::<Vec<_>>())
}

fn flow_ttls<'a>(flows: &'a FlowMap<'_>) -> impl Iterator<Item = BTreeSet<u8>> + 'a {
    flows.values().map(|p| p.iter().map(|p| p.ttl).collect())
}

fn flow_src_ips<'a>(flows: &'a FlowMap<'_>) -> impl Iterator<Item = [Ipv4Addr; 1]> + 'a {
    flows.keys().map(|k| [k.src_ip])
}

fn flow_src_ports<'a>(flows: &'a FlowMap<'_>) -> impl Iterator<Item = Option<u16>> + 'a {
    flows.keys().map(|k| k.src_port())
}

fn flow_dst_ports<'a>(flows: &'a FlowMap<'_>) -> impl Iterator<Item = Option<u16>> + 'a {
    flows.keys().map(|k| k.dst_port())
}

struct DirectionCounts {
    in_total: usize,
    out_total: usize,
}

/// Values shared by the per-protocol blocks: counts, protocol fractions,
/// symmetric count.
struct CommonBlock {
    in_flows: usize,
    in_fraction: f64,
    out_flows: usize,
    out_fraction: f64,
    symmetric: usize,
}

fn common_block(view: &HostFlowView<'_>, proto: Protocol, totals: &DirectionCounts) -> CommonBlock {
    let incoming = view.incoming.get(proto);
    let outgoing = view.outgoing.get(proto);
    let symmetric = incoming
        .keys()
        .filter(|k| symmetric_of(k).is_some_and(|s| outgoing.contains_key(&s)))
        .count();
    CommonBlock {
        in_flows: incoming.len(),
        in_fraction: ratio(incoming.len(), totals.in_total),
        out_flows: outgoing.len(),
        out_fraction: ratio(outgoing.len(), totals.out_total),
        symmetric,
    }
}

fn port_fractions(flows: &FlowMap<'_>) -> (f64, f64) {
    if flows.is_empty() {
        return (0.0, 0.0);
    }
    let low = flows
        .keys()
        .filter(|k| k.dst_port().is_some_and(|p| p <= LOW_PORT_LIMIT))
        .count();
    (
        ratio(low, flows.len()),
        ratio(flows.len() - low, flows.len()),
    )
}

fn flag_fraction(flows: &FlowMap<'_>, flag: TcpFlags) -> f64 {
    let with_flag = flows
        .values()
        .filter(|pkts| {
            pkts.iter()
                .any(|p| p.tcp_flags().is_some_and(|f| f.contains(flag)))
        })
        .count();
    ratio(with_flag, flows.len())
}

pub fn extract(view: &HostFlowView<'_>, interval_start: f64) -> FeatureVector {
    let totals = DirectionCounts {
        in_total: view.incoming.total_flows(),
        out_total: view.outgoing.total_flows(),
    };
    let mut v = Vec::with_capacity(NUM_FEATURES);

    // TCP, features 1-34.
    let tcp_in = view.incoming.get(Protocol::Tcp);
    let tcp_out = view.outgoing.get(Protocol::Tcp);
    let c = common_block(view, Protocol::Tcp, &totals);
    let sym = ratio(c.symmetric, c.in_flows);
    v.extend([
        c.in_flows as f64,
        c.in_fraction,
        c.out_flows as f64,
        c.out_fraction,
        sym,
        ratio(c.in_flows - c.symmetric, c.in_flows),
    ]);
    let (n, h) = distinct_and_entropy(flow_src_ips(tcp_in));
    v.extend([n, h]);
    v.extend([
        median_bytes(tcp_in),
        median_bytes(tcp_out),
        median_packets(tcp_in),
        median_packets(tcp_out),
    ]);
    let windows = tcp_in
        .values()
        .map(|p| p.iter().filter_map(|p| p.window()).collect::<BTreeSet<_>>());
    let (n, h) = distinct_and_entropy(windows);
    v.extend([n, h]);
    let (n, h) = distinct_and_entropy(flow_ttls(tcp_in));
    v.extend([n, h]);
    let (n, h) = distinct_and_entropy(flow_src_ports(tcp_in));
    v.extend([n, h]);
    let (n, h) = distinct_and_entropy(flow_dst_ports(tcp_in));
    v.extend([n, h]);
    let (low, high) = port_fractions(tcp_in);
    v.extend([low, high]);
    for (flag, _) in TcpFlags::ORDERED {
        v.push(flag_fraction(tcp_in, flag));
        v.push(flag_fraction(tcp_out, flag));
    }
    debug_assert_eq!(v.len(), 34);

    // UDP, features 35-54.
    let udp_in = view.incoming.get(Protocol::Udp);
    let udp_out = view.outgoing.get(Protocol::Udp);
    let c = common_block(view, Protocol::Udp, &totals);
    let sym = ratio(c.symmetric, c.in_flows);
    v.extend([
        c.in_flows as f64,
        c.in_fraction,
        c.out_flows as f64,
        c.out_fraction,
        sym,
        ratio(c.in_flows - c.symmetric, c.in_flows),
    ]);
    let (n, h) = distinct_and_entropy(flow_src_ips(udp_in));
    v.extend([n, h]);
    v.extend([
        median_bytes(udp_in),
        median_bytes(udp_out),
        median_packets(udp_in),
        median_packets(udp_out),
    ]);
    let (n, h) = distinct_and_entropy(flow_src_ports(udp_in));
    v.extend([n, h]);
    let (n, h) = distinct_and_entropy(flow_dst_ports(udp_in));
    v.extend([n, h]);
    let (low, high) = port_fractions(udp_in);
    v.extend([low, high]);
    let (n, h) = distinct_and_entropy(flow_ttls(udp_in));
    v.extend([n, h]);
    debug_assert_eq!(v.len(), 54);

    // ICMP, features 55-68. Feature 60 is a count, not a fraction.
    let icmp_in = view.incoming.get(Protocol::Icmp);
    let icmp_out = view.outgoing.get(Protocol::Icmp);
    let c = common_block(view, Protocol::Icmp, &totals);
    v.extend([
        c.in_flows as f64,
        c.in_fraction,
        c.out_flows as f64,
        c.out_fraction,
        ratio(c.symmetric, c.in_flows),
        (c.in_flows - c.symmetric) as f64,
    ]);
    let (n, h) = distinct_and_entropy(flow_src_ips(icmp_in));
    v.extend([n, h]);
    v.extend([
        median_bytes(icmp_in),
        median_bytes(icmp_out),
        median_packets(icmp_in),
        median_packets(icmp_out),
    ]);
    let (n, h) = distinct_and_entropy(flow_ttls(icmp_in));
    v.extend([n, h]);

    let values: [f64; NUM_FEATURES] = v
        .try_into()
        .expect("feature layout produces exactly 68 values");
    FeatureVector {
        host: view.host,
        interval_start,
        values,
    }
}

/// Groups a snapshot by host and extracts one vector per host.
pub fn extract_snapshot(snapshot: &[PacketHeader], interval_start: f64) -> Vec<FeatureVector> {
    group_by_host(snapshot)
        .iter()
        .map(|view| extract(view, interval_start))
        .collect()
}
