//! Checks the autoencoder gradient against finite differences, then trains
//! a stacked autoencoder on the demo scenario and prints its cost curves.
//!
//!     cargo run --release --example sae_training

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdn_ddos::labels::ClassMode;
use sdn_ddos::pipeline::{self, ModelKind, ReplayConfig};
use sdn_ddos::sae::{sae_cost_grad, AutoencoderLayer, Hyperparams};
use sdn_ddos::switch::Topology;
use sdn_ddos::trafficgen::generate;
use sdn_ddos::{scenarios, Result};

fn gradient_check() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_simple_fn((6, 10), || rng.random_range(0.0..1.0));
    let mut layer = AutoencoderLayer::random(6, 3, &mut rng);
    let pen = Hyperparams::default().penalty();
    let (_, grad) = sae_cost_grad(&layer, x.view(), &pen)?;
    let analytic: Vec<f64> = grad.parameters().copied().collect();
    let eps = 1e-5;
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = *layer.parameters().nth(i).unwrap();
        let mut cost_at = |v: f64| -> Result<f64> {
            *layer.parameters_mut().nth(i).unwrap() = v;
            Ok(sae_cost_grad(&layer, x.view(), &pen)?.0)
        };
        numeric.push((cost_at(orig + eps)? - cost_at(orig - eps)?) / (2.0 * eps));
        *layer.parameters_mut().nth(i).unwrap() = orig;
    }
    let norm = |v: Vec<f64>| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff = norm(analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect());
    let sum = norm(analytic.iter().zip(&numeric).map(|(a, n)| a + n).collect());
    Ok(diff / sum)
}

fn every(costs: &[f64], step: usize) -> String {
    costs
        .iter()
        .step_by(step)
        .chain(costs.last())
        .map(|c| format!("{c:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> Result<()> {
    println!("gradient check: relative error {:.2e}\n", gradient_check()?);

    let spec = scenarios::demo()?;
    let trace = generate(&spec)?;
    let cfg = ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone()));
    let labels: BTreeMap<_, _> = trace
        .ground_truth
        .rows()
        .map(|(h, start, c)| ((h, pipeline::interval_key(start)), c))
        .collect();
    let records =
        pipeline::label_vectors(pipeline::replay(&trace.packets, &cfg)?.vectors, &labels)?;

    let hp = Hyperparams::default();
    println!(
        "training {:?} on {} records ({} / {} / {} epochs)",
        hp.layer_sizes,
        records.len(),
        hp.epochs_pretrain,
        hp.epochs_softmax,
        hp.epochs_finetune
    );
    let (model, log) = pipeline::train_model(ModelKind::Sae, &records, &hp)?;
    for (i, costs) in log.pretrain.iter().enumerate() {
        println!("  layer {} cost: {}", i + 1, every(costs, 100));
    }
    println!("  soft-max cost: {}", every(&log.softmax, 100));
    println!("  fine-tune cost: {}", every(&log.finetune, 1000));

    let report = pipeline::evaluate(&model, &records, ClassMode::EightClass)?;
    println!("\ntraining-set accuracy {:.2}%", report.accuracy);
    Ok(())
}
