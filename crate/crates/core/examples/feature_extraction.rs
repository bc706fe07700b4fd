//! Replays the demo scenario and shows how a victim's per-interval
//! features move when a flood starts.
//!
//!     cargo run --release --example feature_extraction

use std::collections::BTreeMap;

use sdn_ddos::features::FEATURE_NAMES;
use sdn_ddos::pipeline::{self, ReplayConfig};
use sdn_ddos::switch::Topology;
use sdn_ddos::trafficgen::generate;
use sdn_ddos::{scenarios, Result};

fn main() -> Result<()> {
    let spec = scenarios::demo()?;
    let trace = generate(&spec)?;
    let cfg = ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone()));
    let out = pipeline::replay(&trace.packets, &cfg)?;
    let labels: BTreeMap<_, _> = trace
        .ground_truth
        .rows()
        .map(|(h, start, c)| ((h, pipeline::interval_key(start)), c))
        .collect();
    let records = pipeline::label_vectors(out.vectors, &labels)?;

    let victim = spec.victims[0];
    let shown = [1, 5, 7, 8, 35, 39, 41, 55, 59, 60, 61];
    print!("{:>6} {:>3}", "start", "cls");
    for n in shown {
        print!(" {:>6}", format!("#{n}"));
    }
    println!();
    for r in records
        .iter()
        .filter(|r| r.features.host == victim)
        .take(16)
    {
        print!("{:>6} {:>3}", r.features.interval_start, r.label.name());
        for n in shown {
            print!(" {:>6.2}", r.features.feature(n));
        }
        println!();
    }
    println!();
    for n in shown {
        println!("#{n:<2} {}", FEATURE_NAMES[n - 1]);
    }
    Ok(())
}
