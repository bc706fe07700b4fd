//! A reactive switch wired to the TCFI controller: a TCP handshake, a
//! one-way probe and an unanswered ping, packet by packet.
//!
//!     cargo run --example reactive_switch

use std::net::Ipv4Addr;

use sdn_ddos::switch::{Switch, Topology};
use sdn_ddos::tcfi::{Controller, Tcfi, TcfiAction};
use sdn_ddos::traffic::{flow_key_of, PacketHeader, TcpFlags, Transport};
use sdn_ddos::Result;

fn tcp(
    t: f64,
    src: Ipv4Addr,
    sport: u16,
    dst: Ipv4Addr,
    dport: u16,
    flags: TcpFlags,
) -> PacketHeader {
    PacketHeader {
        timestamp: t,
        src_ip: src,
        dst_ip: dst,
        ttl: 64,
        data_size: 0,
        transport: Transport::Tcp {
            src_port: sport,
            dst_port: dport,
            flags,
            window: 29200,
        },
    }
}

fn main() -> Result<()> {
    let client = Ipv4Addr::new(10, 0, 0, 1);
    let server = Ipv4Addr::new(10, 0, 0, 2);
    let topology =
        Topology::parse("10.0.0.1 = 1\n10.0.0.2 = 2\ndefault_port = 0\nidle_timeout = 60\n")?;
    let switch = Switch::new(topology).with_egress_log();
    let mut ctl = Controller::new(switch, Tcfi::default());

    let packets = [
        tcp(0.00, client, 40000, server, 80, TcpFlags::SYN),
        tcp(
            0.01,
            server,
            80,
            client,
            40000,
            TcpFlags::SYN | TcpFlags::ACK,
        ),
        tcp(0.02, client, 40000, server, 80, TcpFlags::ACK),
        tcp(0.50, client, 40001, server, 22, TcpFlags::SYN),
        PacketHeader {
            timestamp: 1.0,
            src_ip: client,
            dst_ip: server,
            ttl: 64,
            data_size: 56,
            transport: Transport::Icmp {
                icmp_type: 8,
                icmp_code: 0,
            },
        },
    ];

    for pkt in &packets {
        let action = match ctl.ingest(pkt)? {
            Some(TcfiAction::InstallBoth { .. }) => "reply seen, rules installed both ways",
            Some(TcfiAction::ForwardOnly) => "table miss, flow pending",
            Some(TcfiAction::Recorded) => "matched a rule, header copied to controller",
            None => "matched a rule",
        };
        let key = flow_key_of(pkt);
        println!(
            "t={:<5} {:>15} -> {:<15} {:?}\n        {}; rules: {}, pending: {}",
            pkt.timestamp,
            key.src_ip,
            key.dst_ip,
            key.endpoints,
            action,
            ctl.switch().table_len(),
            ctl.tcfi().pending().len()
        );
    }

    println!("\nstats: {:?}", ctl.stats());
    for e in ctl.switch().egress().entries().unwrap_or_default() {
        println!(
            "egress t={:<5} port {:?} via {:?}",
            e.timestamp, e.port, e.via
        );
    }
    let snapshot = ctl.snapshot_and_reset();
    println!(
        "controller collected {} headers this interval",
        snapshot.len()
    );
    Ok(())
}
