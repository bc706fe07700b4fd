//! On-disk formats: packet-trace, label and dataset CSV, model JSON, PCAP.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! every format parses back to bit-identical values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use etherparse::{IpNumber, Ipv4Slice, NetSlice, PacketBuilder, SlicedPacket, TransportSlice};
use ndarray::{Array1, Array2};
use pcap_file::pcap::{PcapPacket, PcapReader, PcapWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, NUM_FEATURES};
use crate::labels::TrafficClass;
use crate::pipeline::{
    interval_key, DetectionModel, LabeledRecord, ModelKind, NormalizationParams,
};
use crate::sae::{Hyperparams, SaeModel, SigmoidLayer, SoftmaxHead};
use crate::traffic::{PacketHeader, Protocol, TcpFlags, Transport};
use crate::trafficgen::GroundTruth;

pub const TRACE_HEADER: [&str; 12] = [
    "ts",
    "proto",
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "icmp_type",
    "icmp_code",
    "ttl",
    "data_size",
    "tcp_flags",
    "window",
];

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn trace_row(p: &PacketHeader) -> [String; 12] {
    let (sport, dport) = match p.ports() {
        Some((s, d)) => (Some(s), Some(d)),
        None => (None, None),
    };
    let (itype, icode) = match p.transport {
        Transport::Icmp {
            icmp_type,
            icmp_code,
        } => (Some(icmp_type), Some(icmp_code)),
        _ => (None, None),
    };
    [
        p.timestamp.to_string(),
        p.protocol().as_str().to_string(),
        p.src_ip.to_string(),
        opt(sport),
        p.dst_ip.to_string(),
        opt(dport),
        opt(itype),
        opt(icode),
        p.ttl.to_string(),
        p.data_size.to_string(),
        p.tcp_flags().map_or_else(String::new, TcpFlags::to_letters),
        opt(p.window()),
    ]
}

pub fn write_trace<W: Write>(
    out: W,
    packets: &[PacketHeader],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for p in packets {
        w.write_record(trace_row(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(path: &Path, packets: &[PacketHeader]) -> Result<()> {
    write_trace(create(path)?, packets).map_err(|e| csv_err(path, e))
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> std::result::Result<T, String> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| format!("bad {} `{raw}`", TRACE_HEADER[i]))
}

fn must_be_empty(rec: &csv::StringRecord, cols: &[usize]) -> std::result::Result<(), String> {
    for &i in cols {
        if !rec.get(i).unwrap_or("").is_empty() {
            return Err(format!(
                "{} must be empty for this protocol",
                TRACE_HEADER[i]
            ));
        }
    }
    Ok(())
}

pub fn parse_trace_row(rec: &csv::StringRecord) -> std::result::Result<PacketHeader, String> {
    if rec.len() != TRACE_HEADER.len() {
        return Err(format!(
            "expected {} columns, got {}",
            TRACE_HEADER.len(),
            rec.len()
        ));
    }
    let proto: Protocol = rec[1].parse()?;
    let transport = match proto {
        Protocol::Tcp => {
            must_be_empty(rec, &[6, 7])?;
            Transport::Tcp {
                src_port: field(rec, 3)?,
                dst_port: field(rec, 5)?,
                flags: TcpFlags::from_letters(&rec[10])?,
                window: field(rec, 11)?,
            }
        }
        Protocol::Udp => {
            must_be_empty(rec, &[6, 7, 10, 11])?;
            Transport::Udp {
                src_port: field(rec, 3)?,
                dst_port: field(rec, 5)?,
            }
        }
        Protocol::Icmp => {
            must_be_empty(rec, &[3, 5, 10, 11])?;
            Transport::Icmp {
                icmp_type: field(rec, 6)?,
                icmp_code: field(rec, 7)?,
            }
        }
    };
    let timestamp: f64 = field(rec, 0)?;
    if !timestamp.is_finite() {
        return Err(format!("non-finite timestamp `{}`", &rec[0]));
    }
    Ok(PacketHeader {
        timestamp,
        src_ip: field(rec, 2)?,
        dst_ip: field(rec, 4)?,
        ttl: field(rec, 8)?,
        data_size: field(rec, 9)?,
        transport,
    })
}

/// Parses a trace; `path` is only used in error messages.
pub fn read_trace<R: Read>(input: R, path: &Path) -> Result<Vec<PacketHeader>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut packets = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        packets.push(parse_trace_row(&rec).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })?);
    }
    Ok(packets)
}

pub fn load_trace(path: &Path) -> Result<Vec<PacketHeader>> {
    read_trace(open(path)?, path)
}

pub fn write_labels<W: Write>(out: W, truth: &GroundTruth) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["host", "interval_start", "label"])?;
    for (host, start, class) in truth.rows() {
        w.write_record([host.to_string(), start.to_string(), class.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_labels(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_labels(create(path)?, truth).map_err(|e| csv_err(path, e))
}

pub type LabelMap = BTreeMap<(Ipv4Addr, i64), TrafficClass>;

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut labels = LabelMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse = || -> std::result::Result<_, String> {
            if rec.len() != 3 {
                return Err(format!("expected 3 columns, got {}", rec.len()));
            }
            let host: Ipv4Addr = rec[0]
                .parse()
                .map_err(|_| format!("bad host `{}`", &rec[0]))?;
            let start: f64 = rec[1]
                .parse()
                .map_err(|_| format!("bad interval_start `{}`", &rec[1]))?;
            let class: TrafficClass = rec[2].parse()?;
            Ok((host, start, class))
        };
        let (host, start, class) = parse().map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })?;
        labels.insert((host, interval_key(start)), class);
    }
    Ok(labels)
}

pub fn dataset_header() -> Vec<String> {
    let mut h = vec!["host".to_string(), "interval_start".to_string()];
    h.extend((1..=NUM_FEATURES).map(|i| format!("f{i}")));
    h.push("label".into());
    h
}

pub fn write_dataset<W: Write>(
    out: W,
    records: &[LabeledRecord],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header())?;
    for r in records {
        let mut row = Vec::with_capacity(NUM_FEATURES + 3);
        row.push(r.features.host.to_string());
        row.push(r.features.interval_start.to_string());
        row.extend(r.features.values.iter().map(f64::to_string));
        row.push(r.label.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, records: &[LabeledRecord]) -> Result<()> {
    write_dataset(create(path)?, records).map_err(|e| csv_err(path, e))
}

pub fn read_dataset<R: Read>(input: R, path: &Path) -> Result<Vec<LabeledRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header
        .iter()
        .ne(dataset_header().iter().map(String::as_str))
    {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("dataset header must be host,interval_start,f1..f{NUM_FEATURES},label"),
        });
    }
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse = || -> std::result::Result<LabeledRecord, String> {
            let host: Ipv4Addr = rec[0]
                .parse()
                .map_err(|_| format!("bad host `{}`", &rec[0]))?;
            let interval_start: f64 = rec[1]
                .parse()
                .map_err(|_| format!("bad interval_start `{}`", &rec[1]))?;
            let mut values = [0.0; NUM_FEATURES];
            for (i, v) in values.iter_mut().enumerate() {
                let raw = &rec[i + 2];
                *v = raw
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| format!("bad f{} `{raw}`", i + 1))?;
            }
            let label: TrafficClass = rec[NUM_FEATURES + 2].parse()?;
            Ok(LabeledRecord {
                features: FeatureVector {
                    host,
                    interval_start,
                    values,
                },
                label,
            })
        };
        records.push(parse().map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })?);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledRecord>> {
    read_dataset(open(path)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJson {
    pub weights: MatrixJson,
    pub bias: Vec<f64>,
}

impl LayerJson {
    fn from_parts(weights: &Array2<f64>, bias: &Array1<f64>) -> Self {
        LayerJson {
            weights: MatrixJson {
                rows: weights.nrows(),
                cols: weights.ncols(),
                data: weights.iter().copied().collect(),
            },
            bias: bias.to_vec(),
        }
    }

    fn to_parts(&self) -> Result<(Array2<f64>, Array1<f64>)> {
        let w = Array2::from_shape_vec(
            (self.weights.rows, self.weights.cols),
            self.weights.data.clone(),
        )
        .map_err(|e| Error::Dimension(format!("weight matrix: {e}")))?;
        Ok((w, Array1::from(self.bias.clone())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    pub layer_sizes: Vec<usize>,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub encoders: Vec<LayerJson>,
    pub softmax: LayerJson,
    pub normalization: NormalizationParams,
}

impl From<&DetectionModel> for ModelFile {
    fn from(m: &DetectionModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: m.kind,
            layer_sizes: m.network.layer_sizes(),
            class_names: m.network.class_names.clone(),
            seed: m.network.hyperparams.seed,
            hyperparams: m.network.hyperparams.clone(),
            encoders: m
                .network
                .encoders
                .iter()
                .map(|e| LayerJson::from_parts(&e.weights, &e.bias))
                .collect(),
            softmax: LayerJson::from_parts(&m.network.head.weights, &m.network.head.bias),
            normalization: m.normalization.clone(),
        }
    }
}

impl TryFrom<ModelFile> for DetectionModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                f.format_version
            )));
        }
        let encoders = f
            .encoders
            .iter()
            .map(|l| {
                l.to_parts()
                    .map(|(weights, bias)| SigmoidLayer { weights, bias })
            })
            .collect::<Result<Vec<_>>>()?;
        let (weights, bias) = f.softmax.to_parts()?;
        let network = SaeModel {
            encoders,
            head: SoftmaxHead { weights, bias },
            hyperparams: f.hyperparams,
            class_names: f.class_names,
        };
        network.validate()?;
        if network.layer_sizes() != f.layer_sizes {
            return Err(Error::Dimension(format!(
                "layer_sizes {:?} do not match the stored weights {:?}",
                f.layer_sizes,
                network.layer_sizes()
            )));
        }
        let n = &f.normalization;
        if n.x_min.len() != network.input_dim()
            || n.x_max.len() != n.x_min.len()
            || n.x_min.iter().zip(&n.x_max).any(|(lo, hi)| lo > hi)
        {
            return Err(Error::Dimension(
                "normalization does not match the model input".into(),
            ));
        }
        Ok(DetectionModel {
            kind: f.kind,
            network,
            normalization: f.normalization,
        })
    }
}

pub fn model_to_json(model: &DetectionModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<DetectionModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn save_model(path: &Path, model: &DetectionModel) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(model_to_json(model).as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DetectionModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

const HOST_MAC: [u8; 6] = [0x02, 0, 0, 0, 0, 0x01];
const PEER_MAC: [u8; 6] = [0x02, 0, 0, 0, 0, 0x02];

/// Ethernet/IPv4 frame for a header, with a zero payload of `data_size` bytes.
pub fn encode_frame(p: &PacketHeader) -> Result<Vec<u8>> {
    let payload = vec![0u8; p.data_size as usize];
    let ip = PacketBuilder::ethernet2(HOST_MAC, PEER_MAC).ipv4(
        p.src_ip.octets(),
        p.dst_ip.octets(),
        p.ttl,
    );
    let mut buf = Vec::new();
    let res = match p.transport {
        Transport::Tcp {
            src_port,
            dst_port,
            flags,
            window,
        } => {
            let mut b = ip.tcp(src_port, dst_port, 0, window);
            if flags.contains(TcpFlags::SYN) {
                b = b.syn();
            }
            if flags.contains(TcpFlags::ACK) {
                b = b.ack(0);
            }
            if flags.contains(TcpFlags::URG) {
                b = b.urg(0);
            }
            if flags.contains(TcpFlags::FIN) {
                b = b.fin();
            }
            if flags.contains(TcpFlags::RST) {
                b = b.rst();
            }
            if flags.contains(TcpFlags::PSH) {
                b = b.psh();
            }
            b.write(&mut buf, &payload).map_err(|e| e.to_string())
        }
        Transport::Udp { src_port, dst_port } => ip
            .udp(src_port, dst_port)
            .write(&mut buf, &payload)
            .map_err(|e| e.to_string()),
        Transport::Icmp {
            icmp_type,
            icmp_code,
        } => ip
            .icmpv4_raw(icmp_type, icmp_code, [0; 4])
            .write(&mut buf, &payload)
            .map_err(|e| e.to_string()),
    };
    res.map_err(Error::Pcap)?;
    Ok(buf)
}

/// Header of an Ethernet/IPv4 frame. `None` for anything that is not an
/// unfragmented IPv4 TCP, UDP or ICMP packet.
pub fn decode_frame(timestamp: f64, data: &[u8]) -> Option<PacketHeader> {
    match SlicedPacket::from_ethernet(data) {
        Ok(sliced) => decode_sliced(timestamp, &sliced),
        Err(_) => decode_raw_icmp(timestamp, data),
    }
}

/// etherparse rejects ICMP messages whose length does not match their type
/// (e.g. timestamp requests with extra payload); those are read by hand.
fn decode_raw_icmp(timestamp: f64, data: &[u8]) -> Option<PacketHeader> {
    if data.len() < 14 || data[12..14] != [0x08, 0x00] {
        return None;
    }
    let ip = Ipv4Slice::from_slice(&data[14..]).ok()?;
    let payload = ip.payload();
    if ip.is_payload_fragmented()
        || payload.ip_number != IpNumber::ICMP
        || payload.payload.len() < 8
    {
        return None;
    }
    let header = ip.header();
    Some(PacketHeader {
        timestamp,
        src_ip: header.source_addr(),
        dst_ip: header.destination_addr(),
        ttl: header.ttl(),
        data_size: (payload.payload.len() - 8) as u32,
        transport: Transport::Icmp {
            icmp_type: payload.payload[0],
            icmp_code: payload.payload[1],
        },
    })
}

fn decode_sliced(timestamp: f64, sliced: &SlicedPacket<'_>) -> Option<PacketHeader> {
    let Some(NetSlice::Ipv4(ip)) = &sliced.net else {
        return None;
    };
    if ip.is_payload_fragmented() {
        return None;
    }
    let transport = sliced.transport.clone()?;
    let (transport, data_size) = match transport {
        TransportSlice::Tcp(t) => {
            let mut flags = TcpFlags::empty();
            for (set, flag) in [
                (t.syn(), TcpFlags::SYN),
                (t.ack(), TcpFlags::ACK),
                (t.urg(), TcpFlags::URG),
                (t.fin(), TcpFlags::FIN),
                (t.rst(), TcpFlags::RST),
                (t.psh(), TcpFlags::PSH),
            ] {
                flags.set(flag, set);
            }
            (
                Transport::Tcp {
                    src_port: t.source_port(),
                    dst_port: t.destination_port(),
                    flags,
                    window: t.window_size(),
                },
                t.payload().len(),
            )
        }
        TransportSlice::Udp(u) => (
            Transport::Udp {
                src_port: u.source_port(),
                dst_port: u.destination_port(),
            },
            u.payload().len(),
        ),
        TransportSlice::Icmpv4(i) => (
            Transport::Icmp {
                icmp_type: i.type_u8(),
                icmp_code: i.code_u8(),
            },
            i.payload().len(),
        ),
        _ => return None,
    };
    let header = ip.header();
    Some(PacketHeader {
        timestamp,
        src_ip: header.source_addr(),
        dst_ip: header.destination_addr(),
        ttl: header.ttl(),
        data_size: data_size as u32,
        transport,
    })
}

pub fn write_pcap<W: Write>(out: W, packets: &[PacketHeader]) -> Result<()> {
    let mut w = PcapWriter::new(out).map_err(|e| Error::Pcap(e.to_string()))?;
    for p in packets {
        if p.timestamp < 0.0 {
            return Err(Error::Pcap(format!("negative timestamp {}", p.timestamp)));
        }
        let frame = encode_frame(p)?;
        let ts = Duration::from_micros((p.timestamp * 1e6).round() as u64);
        w.write_packet(&PcapPacket::new(ts, frame.len() as u32, &frame))
            .map_err(|e| Error::Pcap(e.to_string()))?;
    }
    Ok(())
}

pub fn save_pcap(path: &Path, packets: &[PacketHeader]) -> Result<()> {
    let mut w = create(path)?;
    write_pcap(&mut w, packets)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PcapImport {
    pub packets: Vec<PacketHeader>,
    /// Frames that were not unfragmented IPv4 TCP/UDP/ICMP.
    pub skipped: u64,
}

pub fn read_pcap<R: Read>(input: R) -> Result<PcapImport> {
    let mut r = PcapReader::new(input).map_err(|e| Error::Pcap(e.to_string()))?;
    let mut out = PcapImport::default();
    while let Some(pkt) = r.next_packet() {
        let pkt = pkt.map_err(|e| Error::Pcap(e.to_string()))?;
        // Microsecond resolution, matching the trace CSV.
        let ts = pkt.timestamp.as_micros() as f64 / 1e6;
        match decode_frame(ts, &pkt.data) {
            Some(h) => out.packets.push(h),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

pub fn load_pcap(path: &Path) -> Result<PcapImport> {
    read_pcap(open(path)?)
}
