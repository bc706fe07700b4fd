//! Brute-force reference implementations used by the integration tests.
//! Written directly from the definitions, sharing no code with the library
//! beyond its data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use proptest::prelude::*;
use sdn_ddos::traffic::{PacketHeader, TcpFlags, Transport};

/// `-sum p log2 p` evaluated term by term.
pub fn direct_entropy(freqs: &[u64]) -> f64 {
    let total: u64 = freqs.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &f in freqs {
        if f > 0 {
            let p = f as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn frac(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(proto, src, dst, a, b)` where `a, b` are the ports or ICMP type/code.
type Key = (u8, Ipv4Addr, Ipv4Addr, u16, u16);

fn key(p: &PacketHeader) -> Key {
    match p.transport {
        Transport::Tcp {
            src_port, dst_port, ..
        } => (6, p.src_ip, p.dst_ip, src_port, dst_port),
        Transport::Udp { src_port, dst_port } => (17, p.src_ip, p.dst_ip, src_port, dst_port),
        Transport::Icmp {
            icmp_type,
            icmp_code,
        } => (
            1,
            p.src_ip,
            p.dst_ip,
            u16::from(icmp_type),
            u16::from(icmp_code),
        ),
    }
}

fn reverse(k: Key) -> Option<Key> {
    let (proto, s, d, a, b) = k;
    if proto != 1 {
        return Some((proto, d, s, b, a));
    }
    let partner = match a {
        8 => 0,
        0 => 8,
        13 => 14,
        14 => 13,
        15 => 16,
        16 => 15,
        17 => 18,
        18 => 17,
        _ => return None,
    };
    Some((1, d, s, partner, b))
}

struct Flow<'a> {
    key: Key,
    packets: Vec<&'a PacketHeader>,
}

fn flows<'a>(
    snapshot: &'a [PacketHeader],
    pred: impl Fn(&PacketHeader) -> bool,
    proto: u8,
) -> Vec<Flow<'a>> {
    let mut out: Vec<Flow<'a>> = Vec::new();
    for p in snapshot.iter().filter(|p| pred(p)) {
        let k = key(p);
        if k.0 != proto {
            continue;
        }
        match out.iter_mut().find(|f| f.key == k) {
            Some(f) => f.packets.push(p),
            None => out.push(Flow {
                key: k,
                packets: vec![p],
            }),
        }
    }
    out
}

/// Distinct count and entropy where each flow counts each value it shows once.
fn per_flow_values<T: Ord + Clone>(
    flows: &[Flow<'_>],
    values: impl Fn(&Flow<'_>) -> Vec<T>,
) -> (f64, f64) {
    let mut freq: BTreeMap<T, u64> = BTreeMap::new();
    for f in flows {
        let set: BTreeSet<T> = values(f).into_iter().collect();
        for v in set {
            *freq.entry(v).or_insert(0) += 1;
        }
    }
    let counts: Vec<u64> = freq.values().copied().collect();
    (counts.len() as f64, direct_entropy(&counts))
}

fn bytes_median(flows: &[Flow<'_>]) -> f64 {
    median(
        flows
            .iter()
            .map(|f| f.packets.iter().map(|p| p.data_size as f64).sum())
            .collect(),
    )
}

fn packets_median(flows: &[Flow<'_>]) -> f64 {
    median(flows.iter().map(|f| f.packets.len() as f64).collect())
}

fn symmetric_count(incoming: &[Flow<'_>], outgoing: &[Flow<'_>]) -> usize {
    incoming
        .iter()
        .filter(|f| reverse(f.key).is_some_and(|r| outgoing.iter().any(|o| o.key == r)))
        .count()
}

fn has_flag(f: &Flow<'_>, flag: TcpFlags) -> bool {
    f.packets.iter().any(|p| match p.transport {
        Transport::Tcp { flags, .. } => flags.contains(flag),
        _ => false,
    })
}

fn ttls(f: &Flow<'_>) -> Vec<u8> {
    f.packets.iter().map(|p| p.ttl).collect()
}

fn windows(f: &Flow<'_>) -> Vec<u16> {
    f.packets
        .iter()
        .filter_map(|p| match p.transport {
            Transport::Tcp { window, .. } => Some(window),
            _ => None,
        })
        .collect()
}

/// All 68 features for every host that received a packet.
pub fn oracle_features(snapshot: &[PacketHeader]) -> BTreeMap<Ipv4Addr, Vec<f64>> {
    let hosts: BTreeSet<Ipv4Addr> = snapshot.iter().map(|p| p.dst_ip).collect();
    let mut result = BTreeMap::new();
    for h in hosts {
        let inc = |proto| flows(snapshot, |p| p.dst_ip == h, proto);
        let out = |proto| flows(snapshot, |p| p.src_ip == h, proto);
        let (ti, to, ui, uo, ii, io) = (inc(6), out(6), inc(17), out(17), inc(1), out(1));
        let in_total = ti.len() + ui.len() + ii.len();
        let out_total = to.len() + uo.len() + io.len();
        let mut v = Vec::new();

        // TCP
        let sym = symmetric_count(&ti, &to);
        v.push(ti.len() as f64);
        v.push(frac(ti.len(), in_total));
        v.push(to.len() as f64);
        v.push(frac(to.len(), out_total));
        v.push(frac(sym, ti.len()));
        v.push(if ti.is_empty() {
            0.0
        } else {
            frac(ti.len() - sym, ti.len())
        });
        let (n, e) = per_flow_values(&ti, |f| vec![f.key.1]);
        v.extend([n, e]);
        v.extend([
            bytes_median(&ti),
            bytes_median(&to),
            packets_median(&ti),
            packets_median(&to),
        ]);
        let (n, e) = per_flow_values(&ti, windows);
        v.extend([n, e]);
        let (n, e) = per_flow_values(&ti, ttls);
        v.extend([n, e]);
        let (n, e) = per_flow_values(&ti, |f| vec![f.key.3]);
        v.extend([n, e]);
        let (n, e) = per_flow_values(&ti, |f| vec![f.key.4]);
        v.extend([n, e]);
        let low = ti.iter().filter(|f| f.key.4 <= 1024).count();
        v.push(frac(low, ti.len()));
        v.push(frac(ti.len() - low, ti.len()));
        for flag in [
            TcpFlags::SYN,
            TcpFlags::ACK,
            TcpFlags::URG,
            TcpFlags::FIN,
            TcpFlags::RST,
            TcpFlags::PSH,
        ] {
            v.push(frac(
                ti.iter().filter(|f| has_flag(f, flag)).count(),
                ti.len(),
            ));
            v.push(frac(
                to.iter().filter(|f| has_flag(f, flag)).count(),
                to.len(),
            ));
        }
        assert_eq!(v.len(), 34);

        // UDP
        let sym = symmetric_count(&ui, &uo);
        v.push(ui.len() as f64);
        v.push(frac(ui.len(), in_total));
        v.push(uo.len() as f64);
        v.push(frac(uo.len(), out_total));
        v.push(frac(sym, ui.len()));
        v.push(if ui.is_empty() {
            0.0
        } else {
            frac(ui.len() - sym, ui.len())
        });
        let (n, e) = per_flow_values(&ui, |f| vec![f.key.1]);
        v.extend([n, e]);
        v.extend([
            bytes_median(&ui),
            bytes_median(&uo),
            packets_median(&ui),
            packets_median(&uo),
        ]);
        let (n, e) = per_flow_values(&ui, |f| vec![f.key.3]);
        v.extend([n, e]);
        let (n, e) = per_flow_values(&ui, |f| vec![f.key.4]);
        v.extend([n, e]);
        let low = ui.iter().filter(|f| f.key.4 <= 1024).count();
        v.push(frac(low, ui.len()));
        v.push(frac(ui.len() - low, ui.len()));
        let (n, e) = per_flow_values(&ui, ttls);
        v.extend([n, e]);
        assert_eq!(v.len(), 54);

        // ICMP
        let sym = symmetric_count(&ii, &io);
        v.push(ii.len() as f64);
        v.push(frac(ii.len(), in_total));
        v.push(io.len() as f64);
        v.push(frac(io.len(), out_total));
        v.push(frac(sym, ii.len()));
        v.push((ii.len() - sym) as f64);
        let (n, e) = per_flow_values(&ii, |f| vec![f.key.1]);
        v.extend([n, e]);
        v.extend([
            bytes_median(&ii),
            bytes_median(&io),
            packets_median(&ii),
            packets_median(&io),
        ]);
        let (n, e) = per_flow_values(&ii, ttls);
        v.extend([n, e]);
        assert_eq!(v.len(), 68);

        result.insert(h, v);
    }
    result
}

/// Packets over a deliberately small value space so flows, replies and
/// repeated values collide often.
pub fn small_packet() -> impl Strategy<Value = PacketHeader> {
    let ip = (1u8..=4).prop_map(|i| Ipv4Addr::new(10, 0, 0, i));
    let port = prop::sample::select(vec![22u16, 80, 1024, 1025, 5000, 40000]);
    let transport = prop_oneof![
        (
            port.clone(),
            port.clone(),
            0u8..64,
            prop::sample::select(vec![512u16, 1024, 65535])
        )
            .prop_map(|(s, d, f, w)| Transport::Tcp {
                src_port: s,
                dst_port: d,
                flags: TcpFlags::from_bits_truncate(f),
                window: w,
            }),
        (port.clone(), port).prop_map(|(s, d)| Transport::Udp {
            src_port: s,
            dst_port: d
        }),
        (prop::sample::select(vec![0u8, 3, 8, 13, 14]), 0u8..2).prop_map(|(t, c)| {
            Transport::Icmp {
                icmp_type: t,
                icmp_code: c,
            }
        }),
    ];
    (
        ip.clone(),
        ip,
        prop::sample::select(vec![32u8, 64, 128]),
        0u32..1500,
        transport,
        0.0f64..60.0,
    )
        .prop_map(
            |(src_ip, dst_ip, ttl, data_size, transport, timestamp)| PacketHeader {
                timestamp,
                src_ip,
                dst_ip,
                ttl,
                data_size,
                transport,
            },
        )
}

/// Confusion counts `[predicted][actual]` by scanning every pair.
pub fn recount(predicted: &[usize], actual: &[usize], k: usize) -> Vec<Vec<u64>> {
    (0..k)
        .map(|p| {
            (0..k)
                .map(|a| {
                    predicted
                        .iter()
                        .zip(actual)
                        .filter(|(&x, &y)| x == p && y == a)
                        .count() as u64
                })
                .collect()
        })
        .collect()
}

/// Precision, recall and F (0-100) of class `c` from raw predictions.
pub fn recount_prf(predicted: &[usize], actual: &[usize], c: usize) -> (f64, f64, f64) {
    let tp = predicted
        .iter()
        .zip(actual)
        .filter(|(&p, &a)| p == c && a == c)
        .count();
    let pred_c = predicted.iter().filter(|&&p| p == c).count();
    let act_c = actual.iter().filter(|&&a| a == c).count();
    let p = if pred_c == 0 {
        0.0
    } else {
        100.0 * tp as f64 / pred_c as f64
    };
    let r = if act_c == 0 {
        0.0
    } else {
        100.0 * tp as f64 / act_c as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

/// Relative error `|a - n| / |a + n|` between two gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let sum: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a + n).powi(2))
        .sum::<f64>()
        .sqrt();
    if sum == 0.0 {
        diff
    } else {
        diff / sum
    }
}

/// Central differences of `cost` around `params`.
pub fn numeric_gradient(
    params: &[f64],
    step: f64,
    mut cost: impl FnMut(&[f64]) -> f64,
) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let plus = cost(&p);
            p[i] = orig - step;
            let minus = cost(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-major `rows x cols` weights followed by `rows` biases.
pub struct DenseParams<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub rows: usize,
    pub cols: usize,
}

impl DenseParams<'_> {
    pub fn sigmoid(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                sig(self.b[i]
                    + (0..self.cols)
                        .map(|j| self.w[i * self.cols + j] * x[j])
                        .sum::<f64>())
            })
            .collect()
    }

    pub fn linear(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.b[i]
                    + (0..self.cols)
                        .map(|j| self.w[i * self.cols + j] * x[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Sparse autoencoder cost for records given as rows.
pub fn naive_ae_cost(
    enc: &DenseParams<'_>,
    dec: &DenseParams<'_>,
    records: &[Vec<f64>],
    lambda: f64,
    beta: f64,
    rho: f64,
    decay_biases: bool,
) -> f64 {
    let r = records.len() as f64;
    let mut recon = 0.0;
    let mut mean_act = vec![0.0; enc.rows];
    for x in records {
        let a = enc.sigmoid(x);
        for (m, v) in mean_act.iter_mut().zip(&a) {
            *m += v / r;
        }
        let xh = dec.sigmoid(&a);
        recon += xh.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / 2.0;
    }
    let mut sq: f64 = enc.w.iter().chain(dec.w).map(|w| w * w).sum();
    if decay_biases {
        sq += enc.b.iter().chain(dec.b).map(|b| b * b).sum::<f64>();
    }
    let kl: f64 = mean_act
        .iter()
        .map(|&h| rho * (rho / h).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - h)).ln())
        .sum();
    recon / r + lambda / 2.0 * sq + beta * kl
}

/// Mean cross-entropy of a soft-max layer on top of `hidden` sigmoid layers,
/// plus `lambda/2` times every squared weight (biases excluded).
pub fn naive_classifier_cost(
    hidden: &[DenseParams<'_>],
    head: &DenseParams<'_>,
    records: &[Vec<f64>],
    labels: &[usize],
    lambda: f64,
) -> f64 {
    let mut ce = 0.0;
    for (x, &y) in records.iter().zip(labels) {
        let mut a = x.clone();
        for layer in hidden {
            a = layer.sigmoid(&a);
        }
        let z = head.linear(&a);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        ce -= z[y] - log_sum;
    }
    let sq: f64 = hidden
        .iter()
        .chain(std::iter::once(head))
        .flat_map(|l| l.w.iter())
        .map(|w| w * w)
        .sum();
    ce / records.len() as f64 + lambda / 2.0 * sq
}

fn random_transport<R: rand::Rng>(rng: &mut R) -> Transport {
    let ports = [22u16, 53, 80, 443, 1025, 5000, 40000, 50000];
    match rng.random_range(0..3) {
        0 => Transport::Tcp {
            src_port: ports[rng.random_range(0..ports.len())],
            dst_port: ports[rng.random_range(0..ports.len())],
            flags: TcpFlags::from_bits_truncate(rng.random_range(0..64)),
            window: 1024,
        },
        1 => Transport::Udp {
            src_port: ports[rng.random_range(0..ports.len())],
            dst_port: ports[rng.random_range(0..ports.len())],
        },
        _ => Transport::Icmp {
            icmp_type: [0u8, 3, 8, 11, 13, 14][rng.random_range(0..6)],
            icmp_code: rng.random_range(0..2),
        },
    }
}

fn reply_transport(t: Transport) -> Transport {
    match t {
        Transport::Tcp {
            src_port,
            dst_port,
            flags,
            window,
        } => Transport::Tcp {
            src_port: dst_port,
            dst_port: src_port,
            flags,
            window,
        },
        Transport::Udp { src_port, dst_port } => Transport::Udp {
            src_port: dst_port,
            dst_port: src_port,
        },
        Transport::Icmp {
            icmp_type,
            icmp_code,
        } => Transport::Icmp {
            icmp_type: match icmp_type {
                8 => 0,
                0 => 8,
                13 => 14,
                14 => 13,
                t => t,
            },
            icmp_code,
        },
    }
}

/// Time-ordered packets among six hosts and two outside addresses, where
/// roughly half the packets answer an earlier one. Spans under 60 s so no
/// rule expires.
pub fn random_trace(seed: u64, n: usize) -> Vec<PacketHeader> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let addrs: Vec<Ipv4Addr> = (1..=6)
        .map(|i| Ipv4Addr::new(10, 0, 0, i))
        .chain([
            Ipv4Addr::new(198, 51, 100, 7),
            Ipv4Addr::new(203, 0, 113, 9),
        ])
        .collect();
    let mut out: Vec<PacketHeader> = Vec::with_capacity(n);
    for i in 0..n {
        let timestamp = 50.0 * i as f64 / n as f64;
        let pkt = if !out.is_empty() && rng.random_bool(0.5) {
            let prev = out[rng.random_range(0..out.len())];
            PacketHeader {
                timestamp,
                src_ip: prev.dst_ip,
                dst_ip: prev.src_ip,
                transport: reply_transport(prev.transport),
                ..prev
            }
        } else {
            PacketHeader {
                timestamp,
                src_ip: addrs[rng.random_range(0..addrs.len())],
                dst_ip: addrs[rng.random_range(0..addrs.len())],
                ttl: 64,
                data_size: rng.random_range(0..1500),
                transport: random_transport(&mut rng),
            }
        };
        out.push(pkt);
    }
    out
}

/// One-way packets to `victim` from random public sources.
pub fn spoofed_flood(seed: u64, n: usize, victim: Ipv4Addr) -> Vec<PacketHeader> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| PacketHeader {
            timestamp: 50.0 * i as f64 / n as f64,
            src_ip: Ipv4Addr::new(
                rng.random_range(11..=200),
                rng.random(),
                rng.random(),
                rng.random_range(1..=254),
            ),
            dst_ip: victim,
            ttl: rng.random_range(30..=255),
            data_size: rng.random_range(0..64),
            transport: match rng.random_range(0..3) {
                0 => Transport::Tcp {
                    src_port: rng.random(),
                    dst_port: 80,
                    flags: TcpFlags::SYN,
                    window: rng.random(),
                },
                1 => Transport::Udp {
                    src_port: rng.random(),
                    dst_port: rng.random(),
                },
                _ => Transport::Icmp {
                    icmp_type: 8,
                    icmp_code: 0,
                },
            },
        })
        .collect()
}

/// Ingests `trace` and checks the TCFI invariants after every packet.
/// Returns the controller so callers can inspect its final state.
pub fn check_tcfi_invariants(trace: &[PacketHeader]) -> Result<sdn_ddos::tcfi::Controller, String> {
    use sdn_ddos::switch::{Switch, Topology};
    use sdn_ddos::tcfi::{Controller, Tcfi, TcfiAction};
    use sdn_ddos::traffic::{flow_key_of, symmetric_of};

    let hosts = (1..=6).map(|i| Ipv4Addr::new(10, 0, 0, i));
    let mut ctl = Controller::new(Switch::new(Topology::from_hosts(hosts)), Tcfi::default());
    let mut delivered = 0usize;
    for (i, pkt) in trace.iter().enumerate() {
        let rules_before = ctl.switch().table_len();
        let action = ctl.ingest(pkt).map_err(|e| e.to_string())?;
        if action.is_some() {
            delivered += 1;
        }
        let key = flow_key_of(pkt);
        if let Some(sym) = symmetric_of(&key) {
            if sym != key
                && ctl.tcfi().pending().contains(&key)
                && ctl.tcfi().pending().contains(&sym)
            {
                return Err(format!("packet {i}: pending holds a symmetric pair"));
            }
        }
        let added = ctl.switch().table_len() - rules_before;
        match action {
            Some(TcfiAction::InstallBoth { flow, symflow }) => {
                if symmetric_of(&flow) != Some(symflow) {
                    return Err(format!("packet {i}: installed pair is not symmetric"));
                }
            }
            _ if added > 0 => return Err(format!("packet {i}: rule added without InstallBoth")),
            _ => {}
        }
        if ctl.tcfi().packets().len() != delivered {
            return Err(format!(
                "packet {i}: collected {} of {delivered}",
                ctl.tcfi().packets().len()
            ));
        }
    }
    for rule in ctl.switch().rules() {
        let paired = symmetric_of(&rule.match_key).is_some_and(|s| ctl.switch().rule(&s).is_some());
        if !paired {
            return Err(format!(
                "rule {:?} has no symmetric partner",
                rule.match_key
            ));
        }
    }
    let pending: Vec<_> = ctl.tcfi().pending().iter().copied().collect();
    for k in &pending {
        if let Some(s) = symmetric_of(k) {
            if s != *k && ctl.tcfi().pending().contains(&s) {
                return Err(format!("pending holds {k:?} and its partner"));
            }
        }
    }
    let snapshot = ctl.snapshot_and_reset();
    if snapshot.len() != delivered || delivered != trace.len() {
        return Err(format!(
            "snapshot {} / delivered {delivered} / ingested {}",
            snapshot.len(),
            trace.len()
        ));
    }
    Ok(ctl)
}

/// Gradient-check instances: one per seed, reporting the worst relative
/// error across the autoencoder, soft-max and fine-tuning costs.
pub fn gradient_check(seed: u64) -> f64 {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use sdn_ddos::sae::{
        sae_cost_grad, softmax_cost_grad, AutoencoderLayer, Hyperparams, SaeModel, SoftmaxHead,
        SparsityPenalty,
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(3..=8);
    let h = rng.random_range(2..=m);
    let h2 = rng.random_range(2..=h);
    let k = rng.random_range(2..=5);
    let r = 10;
    let x = Array2::from_shape_simple_fn((m, r), || rng.random_range(0.0..1.0));
    let rows: Vec<Vec<f64>> = (0..r).map(|j| x.column(j).to_vec()).collect();
    let labels: Vec<usize> = (0..r).map(|_| rng.random_range(0..k)).collect();
    let step = 1e-5;
    let mut worst: f64 = 0.0;

    for decay_biases in [false, true] {
        let pen = SparsityPenalty {
            lambda: 1e-3,
            beta: 3.0,
            rho: 0.1,
            decay_biases,
        };
        let mut layer = AutoencoderLayer::random(m, h, &mut rng);
        for b in layer
            .encoder
            .bias
            .iter_mut()
            .chain(layer.decoder.bias.iter_mut())
        {
            *b = rng.random_range(-0.5..0.5);
        }
        let (_, grad) = sae_cost_grad(&layer, x.view(), &pen).unwrap();
        let analytic: Vec<f64> = grad.parameters().copied().collect();
        let theta: Vec<f64> = layer.parameters().copied().collect();
        let (ew, eb, dw) = (m * h, h, h * m);
        let numeric = numeric_gradient(&theta, step, |p| {
            let enc = DenseParams {
                w: &p[..ew],
                b: &p[ew..ew + eb],
                rows: h,
                cols: m,
            };
            let dec = DenseParams {
                w: &p[ew + eb..ew + eb + dw],
                b: &p[ew + eb + dw..],
                rows: m,
                cols: h,
            };
            naive_ae_cost(
                &enc,
                &dec,
                &rows,
                pen.lambda,
                pen.beta,
                pen.rho,
                decay_biases,
            )
        });
        worst = worst.max(relative_error(&analytic, &numeric));
    }

    let codes_rows: Vec<Vec<f64>> = rows.iter().map(|v| v[..h.min(m)].to_vec()).collect();
    let codes = Array2::from_shape_fn((h, r), |(i, j)| codes_rows[j][i]);
    let mut head = SoftmaxHead::random(h, k, &mut rng);
    for b in head.bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let (_, grad) = softmax_cost_grad(&head, codes.view(), &labels, 1e-3).unwrap();
    let analytic: Vec<f64> = grad.parameters().copied().collect();
    let theta: Vec<f64> = head.parameters().copied().collect();
    let numeric = numeric_gradient(&theta, step, |p| {
        let hd = DenseParams {
            w: &p[..k * h],
            b: &p[k * h..],
            rows: k,
            cols: h,
        };
        naive_classifier_cost(&[], &hd, &codes_rows, &labels, 1e-3)
    });
    worst = worst.max(relative_error(&analytic, &numeric));

    let hp = Hyperparams {
        layer_sizes: vec![m, h, h2],
        seed,
        ..Hyperparams::default()
    };
    let names: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
    let mut model: SaeModel = sdn_ddos::sae::initial_model(&names, &hp).unwrap();
    for v in model.parameters_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let (_, grad) = model.finetune_cost_grad(x.view(), &labels, 1e-3).unwrap();
    let analytic: Vec<f64> = grad
        .encoders
        .iter()
        .flat_map(|l| l.parameters())
        .chain(grad.head.parameters())
        .copied()
        .collect();
    let theta: Vec<f64> = model.parameters().copied().collect();
    let numeric = numeric_gradient(&theta, step, |p| {
        let (a, rest) = p.split_at(h * m + h);
        let (b, c) = rest.split_at(h2 * h + h2);
        let l1 = DenseParams {
            w: &a[..h * m],
            b: &a[h * m..],
            rows: h,
            cols: m,
        };
        let l2 = DenseParams {
            w: &b[..h2 * h],
            b: &b[h2 * h..],
            rows: h2,
            cols: h,
        };
        let hd = DenseParams {
            w: &c[..k * h2],
            b: &c[k * h2..],
            rows: k,
            cols: h2,
        };
        naive_classifier_cost(&[l1, l2], &hd, &rows, &labels, 1e-3)
    });
    worst.max(relative_error(&analytic, &numeric))
}

/// AUC as the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Recounts one random prediction/label set against the library. Returns a
/// description of the first mismatch.
pub fn metrics_check(seed: u64) -> Result<(), String> {
    use rand::{Rng, SeedableRng};
    use sdn_ddos::metrics::ConfusionMatrix;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=8);
    let n = rng.random_range(1..=300);
    let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let actual: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let names: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
    let m = ConfusionMatrix::build(&predicted, &actual, &names).map_err(|e| e.to_string())?;
    if m.counts() != recount(&predicted, &actual, k).as_slice() {
        return Err(format!("seed {seed}: confusion counts differ"));
    }
    let correct = predicted
        .iter()
        .zip(&actual)
        .filter(|(p, a)| p == a)
        .count();
    let acc = m.accuracy().map_err(|e| e.to_string())?;
    if acc != 100.0 * correct as f64 / n as f64 {
        return Err(format!("seed {seed}: accuracy {acc}"));
    }
    for (c, s) in m
        .class_stats()
        .map_err(|e| e.to_string())?
        .iter()
        .enumerate()
    {
        let (p, r, f) = recount_prf(&predicted, &actual, c);
        if (s.precision, s.recall, s.f_measure) != (p, r, f) {
            return Err(format!(
                "seed {seed} class {c}: {:?} vs {:?}",
                (s.precision, s.recall, s.f_measure),
                (p, r, f)
            ));
        }
    }
    Ok(())
}
