//! Trains on the bundled training scenario, then watches a fresh demo
//! trace interval by interval and prints an alert for every attack verdict.
//!
//!     cargo run --release --example live_detect

use std::collections::BTreeMap;

use sdn_ddos::pipeline::{self, ModelKind, ReplayConfig};
use sdn_ddos::sae::Hyperparams;
use sdn_ddos::switch::Topology;
use sdn_ddos::trafficgen::{generate, ScenarioSpec};
use sdn_ddos::{scenarios, Result};

fn records(spec: &ScenarioSpec) -> Result<Vec<pipeline::LabeledRecord>> {
    let trace = generate(spec)?;
    let cfg = ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone()));
    let labels: BTreeMap<_, _> = trace
        .ground_truth
        .rows()
        .map(|(h, start, c)| ((h, pipeline::interval_key(start)), c))
        .collect();
    pipeline::label_vectors(pipeline::replay(&trace.packets, &cfg)?.vectors, &labels)
}

fn main() -> Result<()> {
    let train = records(&scenarios::default_train()?)?;
    let (model, _) = pipeline::train_model(ModelKind::Sae, &train, &Hyperparams::default())?;
    println!("model trained on {} records\n", train.len());

    let mut spec = scenarios::demo()?;
    spec.seed = 99;
    let trace = generate(&spec)?;
    let cfg = ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone()));
    let monitored = spec.hosts.iter().copied().collect();
    let detections = pipeline::detect(&model, &trace.packets, &cfg, Some(&monitored))?;

    let (mut hits, mut misses, mut false_alarms) = (0, 0, 0);
    for d in &detections {
        let index = (d.interval_start / spec.interval) as u64;
        let truth = trace
            .ground_truth
            .get(d.host, index)
            .expect("monitored host");
        let alert = d.class != "N";
        match (alert, truth.is_attack()) {
            (true, true) => hits += 1,
            (true, false) => false_alarms += 1,
            (false, true) => misses += 1,
            (false, false) => {}
        }
        if alert || truth.is_attack() {
            println!(
                "t={:>5} {:<9} predicted {:<2} ({:.3})  actual {}",
                d.interval_start,
                d.host,
                d.class,
                d.probability,
                truth.name()
            );
        }
    }
    println!(
        "\n{} host-intervals: {hits} attacks flagged, {misses} missed, {false_alarms} false alarms",
        detections.len()
    );
    Ok(())
}
