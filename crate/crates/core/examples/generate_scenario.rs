//! Generates a scenario and writes its trace, labels and PCAP.
//!
//!     cargo run --release --example generate_scenario -- [spec.toml] [out_dir]
//!
//! Without arguments the bundled demo scenario is written to `./demo_out`.

use std::path::PathBuf;

use sdn_ddos::trafficgen::{generate, ScenarioSpec};
use sdn_ddos::{formats, scenarios, Error, Result};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let spec = match args.next() {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            ScenarioSpec::from_toml(&text)?
        }
        None => scenarios::demo()?,
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "demo_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let generated = generate(&spec)?;
    formats::save_trace(&out.join("trace.csv"), &generated.packets)?;
    formats::save_labels(&out.join("labels.csv"), &generated.ground_truth)?;
    formats::save_pcap(&out.join("trace.pcap"), &generated.packets)?;

    println!(
        "{} packets over {} s, {} attack segments",
        generated.packets.len(),
        spec.duration,
        generated.segments.len()
    );
    for s in generated.segments.iter().take(8) {
        println!(
            "  {:>6}-{:<6} {:<3} -> {} at {:.1} pkt/s{}",
            s.start,
            s.end,
            s.class().name(),
            s.victim,
            s.packet_rate,
            if s.spoofing { ", spoofed" } else { "" }
        );
    }
    if generated.segments.len() > 8 {
        println!("  ...");
    }
    println!("labelled host-intervals:");
    for (class, n) in generated.ground_truth.class_counts() {
        println!("  {:>2}: {n}", class.name());
    }
    println!("written to {}", out.display());
    Ok(())
}
