//! Default scenario pair: generate, replay, train soft-max / NN / SAE and
//! print the accuracy comparison.
//!
//!     cargo run --release --example end_to_end

use std::collections::BTreeMap;
use std::time::Instant;

use sdn_ddos::labels::ClassMode;
use sdn_ddos::pipeline::{self, LabeledRecord, ReplayConfig};
use sdn_ddos::sae::Hyperparams;
use sdn_ddos::switch::Topology;
use sdn_ddos::trafficgen::{self, ScenarioSpec};
use sdn_ddos::{scenarios, Result};

fn dataset(spec: &ScenarioSpec) -> Result<Vec<LabeledRecord>> {
    let generated = trafficgen::generate(spec)?;
    let cfg = ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone()));
    let replayed = pipeline::replay(&generated.packets, &cfg)?;
    let labels: BTreeMap<_, _> = generated
        .ground_truth
        .rows()
        .map(|(h, start, c)| ((h, pipeline::interval_key(start)), c))
        .collect();
    println!(
        "  seed {}: {} packets, {} rules installed, {} table misses",
        spec.seed,
        generated.packets.len(),
        replayed.stats.rules_installed,
        replayed.stats.table_misses
    );
    pipeline::label_vectors(replayed.vectors, &labels)
}

fn main() -> Result<()> {
    let t0 = Instant::now();
    println!("generating and replaying");
    let train = dataset(&scenarios::default_train()?)?;
    let test = dataset(&scenarios::default_test()?)?;
    println!(
        "  {} training records, {} test records ({:.1?})",
        train.len(),
        test.len(),
        t0.elapsed()
    );

    let t1 = Instant::now();
    let models = pipeline::train_all(&train, &Hyperparams::default())?;
    println!("trained three models ({:.1?})", t1.elapsed());

    println!();
    print!(
        "{}",
        pipeline::comparison_table(&pipeline::compare(&models, &test)?)
    );
    println!();
    let report = pipeline::evaluate(&models.sae, &test, ClassMode::EightClass)?;
    print!("{}", report.to_text());
    println!("\ntotal {:.1?}", t0.elapsed());
    Ok(())
}
