//! Packets, flows and the symmetric-flow relation.
//!
//! A [`PacketHeader`] carries only the header fields the detector looks at.
//! Protocol-specific fields live inside [`Transport`], so a UDP packet simply
//! has no TCP flags and an ICMP packet has no ports.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Tcp, Protocol::Udp, Protocol::Icmp];

    pub fn index(self) -> usize {
        match self {
            Protocol::Tcp => 0,
            Protocol::Udp => 1,
            Protocol::Icmp => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "TCP",
            Protocol::Udp => "UDP",
            Protocol::Icmp => "ICMP",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TCP" => Ok(Protocol::Tcp),
            "UDP" => Ok(Protocol::Udp),
            "ICMP" => Ok(Protocol::Icmp),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

bitflags! {
    /// TCP control bits tracked by the feature extractor.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct TcpFlags: u8 {
        const SYN = 0b00_0001;
        const ACK = 0b00_0010;
        const URG = 0b00_0100;
        const FIN = 0b00_1000;
        const RST = 0b01_0000;
        const PSH = 0b10_0000;
    }
}

impl TcpFlags {
    /// Flag order used by the trace format and by features 23-34.
    pub const ORDERED: [(TcpFlags, char); 6] = [
        (TcpFlags::SYN, 'S'),
        (TcpFlags::ACK, 'A'),
        (TcpFlags::URG, 'U'),
        (TcpFlags::FIN, 'F'),
        (TcpFlags::RST, 'R'),
        (TcpFlags::PSH, 'P'),
    ];

    pub fn to_letters(self) -> String {
        Self::ORDERED
            .iter()
            .filter(|(flag, _)| self.contains(*flag))
            .map(|(_, c)| *c)
            .collect()
    }

    pub fn from_letters(s: &str) -> Result<Self, String> {
        let mut flags = TcpFlags::empty();
        for ch in s.chars() {
            let flag = Self::ORDERED
                .iter()
                .find(|(_, c)| *c == ch.to_ascii_uppercase())
                .map(|(f, _)| *f)
                .ok_or_else(|| format!("unknown TCP flag letter `{ch}`"))?;
            flags |= flag;
        }
        Ok(flags)
    }
}

/// Transport-layer header fields, by protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transport {
    Tcp {
        src_port: u16,
        dst_port: u16,
        flags: TcpFlags,
        window: u16,
    },
    Udp {
        src_port: u16,
        dst_port: u16,
    },
    Icmp {
        icmp_type: u8,
        icmp_code: u8,
    },
}

impl Transport {
    pub fn protocol(&self) -> Protocol {
        match self {
            Transport::Tcp { .. } => Protocol::Tcp,
            Transport::Udp { .. } => Protocol::Udp,
            Transport::Icmp { .. } => Protocol::Icmp,
        }
    }
}

/// One captured packet's headers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketHeader {
    /// Seconds since the start of the trace.
    pub timestamp: f64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub ttl: u8,
    /// Payload bytes.
    pub data_size: u32,
    pub transport: Transport,
}

impl PacketHeader {
    pub fn protocol(&self) -> Protocol {
        self.transport.protocol()
    }

    pub fn ports(&self) -> Option<(u16, u16)> {
        match self.transport {
            Transport::Tcp {
                src_port, dst_port, ..
            }
            | Transport::Udp { src_port, dst_port } => Some((src_port, dst_port)),
            Transport::Icmp { .. } => None,
        }
    }

    pub fn tcp_flags(&self) -> Option<TcpFlags> {
        match self.transport {
            Transport::Tcp { flags, .. } => Some(flags),
            _ => None,
        }
    }

    pub fn window(&self) -> Option<u16> {
        match self.transport {
            Transport::Tcp { window, .. } => Some(window),
            _ => None,
        }
    }

    pub fn flow_key(&self) -> FlowKey {
        flow_key_of(self)
    }
}

/// Protocol-specific part of a flow identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowEndpoints {
    Tcp { src_port: u16, dst_port: u16 },
    Udp { src_port: u16, dst_port: u16 },
    Icmp { icmp_type: u8, icmp_code: u8 },
}

/// Exact-match flow identity: protocol, addresses, and either the port pair
/// (TCP/UDP) or the ICMP type and code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub endpoints: FlowEndpoints,
}

impl FlowKey {
    pub fn tcp(src_ip: Ipv4Addr, src_port: u16, dst_ip: Ipv4Addr, dst_port: u16) -> Self {
        FlowKey {
            src_ip,
            dst_ip,
            endpoints: FlowEndpoints::Tcp { src_port, dst_port },
        }
    }

    pub fn udp(src_ip: Ipv4Addr, src_port: u16, dst_ip: Ipv4Addr, dst_port: u16) -> Self {
        FlowKey {
            src_ip,
            dst_ip,
            endpoints: FlowEndpoints::Udp { src_port, dst_port },
        }
    }

    pub fn icmp(src_ip: Ipv4Addr, dst_ip: Ipv4Addr, icmp_type: u8, icmp_code: u8) -> Self {
        FlowKey {
            src_ip,
            dst_ip,
            endpoints: FlowEndpoints::Icmp {
                icmp_type,
                icmp_code,
            },
        }
    }

    pub fn protocol(&self) -> Protocol {
        match self.endpoints {
            FlowEndpoints::Tcp { .. } => Protocol::Tcp,
            FlowEndpoints::Udp { .. } => Protocol::Udp,
            FlowEndpoints::Icmp { .. } => Protocol::Icmp,
        }
    }

    pub fn dst_port(&self) -> Option<u16> {
        match self.endpoints {
            FlowEndpoints::Tcp { dst_port, .. } | FlowEndpoints::Udp { dst_port, .. } => {
                Some(dst_port)
            }
            FlowEndpoints::Icmp { .. } => None,
        }
    }

    pub fn src_port(&self) -> Option<u16> {
        match self.endpoints {
            FlowEndpoints::Tcp { src_port, .. } | FlowEndpoints::Udp { src_port, .. } => {
                Some(src_port)
            }
            FlowEndpoints::Icmp { .. } => None,
        }
    }

    pub fn symmetric(&self) -> Option<FlowKey> {
        symmetric_of(self)
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.endpoints {
            FlowEndpoints::Tcp { src_port, dst_port } => {
                write!(
                    f,
                    "TCP {}:{} -> {}:{}",
                    self.src_ip, src_port, self.dst_ip, dst_port
                )
            }
            FlowEndpoints::Udp { src_port, dst_port } => {
                write!(
                    f,
                    "UDP {}:{} -> {}:{}",
                    self.src_ip, src_port, self.dst_ip, dst_port
                )
            }
            FlowEndpoints::Icmp {
                icmp_type,
                icmp_code,
            } => write!(
                f,
                "ICMP {} -> {} type={} code={}",
                self.src_ip, self.dst_ip, icmp_type, icmp_code
            ),
        }
    }
}

pub fn flow_key_of(pkt: &PacketHeader) -> FlowKey {
    let endpoints = match pkt.transport {
        Transport::Tcp {
            src_port, dst_port, ..
        } => FlowEndpoints::Tcp { src_port, dst_port },
        Transport::Udp { src_port, dst_port } => FlowEndpoints::Udp { src_port, dst_port },
        Transport::Icmp {
            icmp_type,
            icmp_code,
        } => FlowEndpoints::Icmp {
            icmp_type,
            icmp_code,
        },
    };
    FlowKey {
        src_ip: pkt.src_ip,
        dst_ip: pkt.dst_ip,
        endpoints,
    }
}

/// ICMP request/response type pairs: echo, timestamp, information, address mask.
const ICMP_PAIRS: [(u8, u8); 4] = [(8, 0), (13, 14), (15, 16), (17, 18)];

/// The ICMP type that answers (or is answered by) `icmp_type`, if any.
pub fn icmp_counterpart(icmp_type: u8) -> Option<u8> {
    ICMP_PAIRS.iter().find_map(|&(req, resp)| {
        if icmp_type == req {
            Some(resp)
        } else if icmp_type == resp {
            Some(req)
        } else {
            None
        }
    })
}

/// Reverse-direction counterpart of a flow. ICMP flows only have one when
/// their type belongs to a request/response pair; the code is carried over.
pub fn symmetric_of(key: &FlowKey) -> Option<FlowKey> {
    let endpoints = match key.endpoints {
        FlowEndpoints::Tcp { src_port, dst_port } => FlowEndpoints::Tcp {
            src_port: dst_port,
            dst_port: src_port,
        },
        FlowEndpoints::Udp { src_port, dst_port } => FlowEndpoints::Udp {
            src_port: dst_port,
            dst_port: src_port,
        },
        FlowEndpoints::Icmp {
            icmp_type,
            icmp_code,
        } => FlowEndpoints::Icmp {
            icmp_type: icmp_counterpart(icmp_type)?,
            icmp_code,
        },
    };
    Some(FlowKey {
        src_ip: key.dst_ip,
        dst_ip: key.src_ip,
        endpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ip(s: &str) -> Ipv4Addr {
        s.parse().unwrap()
    }

    fn tcp_pkt(src: &str, sport: u16, dst: &str, dport: u16) -> PacketHeader {
        PacketHeader {
            timestamp: 0.0,
            src_ip: ip(src),
            dst_ip: ip(dst),
            ttl: 64,
            data_size: 0,
            transport: Transport::Tcp {
                src_port: sport,
                dst_port: dport,
                flags: TcpFlags::SYN,
                window: 1024,
            },
        }
    }

    #[test]
    fn tcp_key_is_five_tuple() {
        let pkt = tcp_pkt("10.0.0.1", 5000, "10.0.0.2", 80);
        assert_eq!(
            flow_key_of(&pkt),
            FlowKey::tcp(ip("10.0.0.1"), 5000, ip("10.0.0.2"), 80)
        );
    }

    #[test]
    fn icmp_key_uses_type_and_code() {
        let pkt = PacketHeader {
            timestamp: 1.0,
            src_ip: ip("10.0.0.1"),
            dst_ip: ip("10.0.0.2"),
            ttl: 64,
            data_size: 56,
            transport: Transport::Icmp {
                icmp_type: 8,
                icmp_code: 0,
            },
        };
        assert_eq!(
            flow_key_of(&pkt),
            FlowKey::icmp(ip("10.0.0.1"), ip("10.0.0.2"), 8, 0)
        );
    }

    #[test]
    fn data_size_not_part_of_key() {
        let mk = |size| PacketHeader {
            timestamp: 0.0,
            src_ip: ip("10.0.0.1"),
            dst_ip: ip("10.0.0.2"),
            ttl: 64,
            data_size: size,
            transport: Transport::Udp {
                src_port: 4000,
                dst_port: 53,
            },
        };
        assert_eq!(flow_key_of(&mk(10)), flow_key_of(&mk(1400)));
    }

    #[test]
    fn tcp_symmetric_swaps_endpoints() {
        let k = FlowKey::tcp(ip("10.0.0.1"), 5000, ip("10.0.0.2"), 80);
        assert_eq!(
            symmetric_of(&k),
            Some(FlowKey::tcp(ip("10.0.0.2"), 80, ip("10.0.0.1"), 5000))
        );
    }

    #[test]
    fn icmp_echo_request_pairs_with_reply() {
        let k = FlowKey::icmp(ip("10.0.0.1"), ip("10.0.0.2"), 8, 0);
        assert_eq!(
            symmetric_of(&k),
            Some(FlowKey::icmp(ip("10.0.0.2"), ip("10.0.0.1"), 0, 0))
        );
    }

    #[test]
    fn icmp_unreachable_has_no_counterpart() {
        let k = FlowKey::icmp(ip("10.0.0.1"), ip("10.0.0.2"), 3, 1);
        assert_eq!(symmetric_of(&k), None);
    }

    #[test]
    fn flag_letters_roundtrip() {
        let f = TcpFlags::SYN | TcpFlags::ACK | TcpFlags::PSH;
        assert_eq!(f.to_letters(), "SAP");
        assert_eq!(TcpFlags::from_letters("SAP").unwrap(), f);
        assert_eq!(TcpFlags::from_letters("").unwrap(), TcpFlags::empty());
        assert!(TcpFlags::from_letters("X").is_err());
    }

    fn arb_key() -> impl Strategy<Value = FlowKey> {
        let ipv4 = any::<u32>().prop_map(Ipv4Addr::from);
        prop_oneof![
            (ipv4.clone(), any::<u16>(), ipv4.clone(), any::<u16>())
                .prop_map(|(a, p, b, q)| FlowKey::tcp(a, p, b, q)),
            (ipv4.clone(), any::<u16>(), ipv4.clone(), any::<u16>())
                .prop_map(|(a, p, b, q)| FlowKey::udp(a, p, b, q)),
            (ipv4.clone(), ipv4, 0u8..20, any::<u8>())
                .prop_map(|(a, b, t, c)| FlowKey::icmp(a, b, t, c)),
        ]
    }

    proptest! {
        #[test]
        fn symmetric_is_an_involution(k in arb_key()) {
            if let Some(s) = symmetric_of(&k) {
                prop_assert_eq!(symmetric_of(&s), Some(k));
                prop_assert_eq!(s.protocol(), k.protocol());
            } else {
                prop_assert_eq!(k.protocol(), Protocol::Icmp);
            }
        }
    }
}
