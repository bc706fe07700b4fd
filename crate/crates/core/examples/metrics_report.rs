//! Confusion matrix, per-class precision / recall / F and one-vs-rest ROC
//! for a handful of made-up predictions.
//!
//!     cargo run --example metrics_report

use sdn_ddos::labels::{ClassMode, TrafficClass};
use sdn_ddos::metrics::roc_from_scores;
use sdn_ddos::pipeline::evaluate_probabilities;
use sdn_ddos::Result;

fn main() -> Result<()> {
    // Rows are probability vectors over N, T, U, I, TU, TI, UI, A.
    let probs = vec![
        vec![0.90, 0.02, 0.02, 0.02, 0.01, 0.01, 0.01, 0.01],
        vec![0.70, 0.20, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01],
        vec![0.30, 0.60, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01],
        vec![0.05, 0.10, 0.70, 0.05, 0.05, 0.02, 0.02, 0.01],
        vec![0.05, 0.05, 0.05, 0.70, 0.05, 0.05, 0.03, 0.02],
        vec![0.05, 0.30, 0.30, 0.05, 0.20, 0.05, 0.03, 0.02],
        vec![0.05, 0.05, 0.05, 0.05, 0.05, 0.10, 0.05, 0.60],
        vec![0.40, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.30],
    ];
    let labels = [
        TrafficClass::N,
        TrafficClass::T,
        TrafficClass::T,
        TrafficClass::U,
        TrafficClass::I,
        TrafficClass::TU,
        TrafficClass::A,
        TrafficClass::N,
    ];
    for mode in [ClassMode::EightClass, ClassMode::TwoClass] {
        print!(
            "{}",
            evaluate_probabilities(&probs, &labels, mode)?.to_text()
        );
        println!();
    }

    let roc = roc_from_scores(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false])?;
    println!("hand ROC: points {:?}, auc {}", roc.points, roc.auc);
    Ok(())
}
