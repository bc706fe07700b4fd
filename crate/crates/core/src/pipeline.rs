//! Trace replay through the simulated switch and controller, dataset
//! assembly, normalization, model training and evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_snapshot, FeatureVector, NUM_FEATURES};
use crate::labels::{ClassMode, TrafficClass};
use crate::metrics::{ClassStats, ConfusionMatrix, RocCurve};
use crate::sae::{self, Hyperparams, SaeModel, TrainingLog};
use crate::switch::{Switch, Topology};
use crate::tcfi::{Controller, ControllerStats, Tcfi, DEFAULT_PENDING_CAPACITY};
use crate::traffic::PacketHeader;

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub interval: f64,
    pub topology: Topology,
    pub pending_capacity: usize,
}

impl ReplayConfig {
    pub fn new(interval: f64, topology: Topology) -> Self {
        ReplayConfig {
            interval,
            topology,
            pending_capacity: DEFAULT_PENDING_CAPACITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    /// One vector per host with incoming traffic per interval, in time then
    /// address order.
    pub vectors: Vec<FeatureVector>,
    pub stats: ControllerStats,
    pub rules_at_end: usize,
}

/// Feeds a time-sorted trace through switch and controller. At every
/// multiple of `interval` the collected headers are turned into feature
/// vectors and idle rules expire.
pub fn replay(trace: &[PacketHeader], cfg: &ReplayConfig) -> Result<ReplayOutput> {
    if !(cfg.interval.is_finite() && cfg.interval > 0.0) {
        return Err(Error::Config(format!(
            "interval must be positive, got {}",
            cfg.interval
        )));
    }
    for (i, w) in trace.windows(2).enumerate() {
        if w[1].timestamp < w[0].timestamp {
            return Err(Error::UnsortedTrace {
                index: i + 1,
                timestamp: w[1].timestamp,
                previous: w[0].timestamp,
            });
        }
    }
    let mut controller = Controller::new(
        Switch::new(cfg.topology.clone()),
        Tcfi::new(cfg.pending_capacity),
    );
    let mut vectors = Vec::new();
    let Some(first) = trace.first() else {
        return Ok(ReplayOutput {
            vectors,
            stats: controller.stats(),
            rules_at_end: 0,
        });
    };
    let mut index = (first.timestamp / cfg.interval).floor() as i64;
    let boundary = |k: i64| (k + 1) as f64 * cfg.interval;
    for pkt in trace {
        while pkt.timestamp >= boundary(index) {
            let snapshot = controller.snapshot_and_reset();
            vectors.extend(extract_snapshot(&snapshot, index as f64 * cfg.interval));
            controller.expire_idle(boundary(index));
            index += 1;
        }
        controller.ingest(pkt)?;
    }
    let snapshot = controller.snapshot_and_reset();
    vectors.extend(extract_snapshot(&snapshot, index as f64 * cfg.interval));
    Ok(ReplayOutput {
        vectors,
        stats: controller.stats(),
        rules_at_end: controller.switch().table_len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub features: FeatureVector,
    pub label: TrafficClass,
}

/// Integer key for an interval start so label joins never compare floats.
pub fn interval_key(start: f64) -> i64 {
    (start * 1e6).round() as i64
}

/// Joins feature vectors with `(host, interval_start) -> class` labels.
/// Vectors for hosts that never appear in `labels` are skipped; a labelled
/// host without a label for one of its intervals is an error.
pub fn label_vectors(
    vectors: Vec<FeatureVector>,
    labels: &BTreeMap<(Ipv4Addr, i64), TrafficClass>,
) -> Result<Vec<LabeledRecord>> {
    let hosts: BTreeSet<Ipv4Addr> = labels.keys().map(|(h, _)| *h).collect();
    let mut missing = Vec::new();
    let mut records = Vec::new();
    for fv in vectors {
        if !hosts.contains(&fv.host) {
            continue;
        }
        match labels.get(&(fv.host, interval_key(fv.interval_start))) {
            Some(&label) => records.push(LabeledRecord {
                features: fv,
                label,
            }),
            None => missing.push(format!("{} @ {}", fv.host, fv.interval_start)),
        }
    }
    if missing.is_empty() {
        Ok(records)
    } else {
        Err(Error::LabelJoin(missing))
    }
}

/// Per-feature min-max scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl NormalizationParams {
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(rows: I) -> Result<Self> {
        let mut x_min: Vec<f64> = Vec::new();
        let mut x_max: Vec<f64> = Vec::new();
        for row in rows {
            if x_min.is_empty() {
                x_min = row.to_vec();
                x_max = row.to_vec();
                continue;
            }
            if row.len() != x_min.len() {
                return Err(Error::Dimension(format!(
                    "row of length {} in data of width {}",
                    row.len(),
                    x_min.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                x_min[i] = x_min[i].min(v);
                x_max[i] = x_max[i].max(v);
            }
        }
        if x_min.is_empty() {
            return Err(Error::Empty("training records"));
        }
        Ok(NormalizationParams { x_min, x_max })
    }

    pub fn dim(&self) -> usize {
        self.x_min.len()
    }

    /// Scaled row, clamped to `[0, 1]`; constant features map to 0.
    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.dim(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// Normalizes records, fitting parameters first when none are given.
pub fn normalize(
    records: &[LabeledRecord],
    params: Option<&NormalizationParams>,
) -> Result<(Vec<Vec<f64>>, NormalizationParams)> {
    let params = match params {
        Some(p) => p.clone(),
        None => NormalizationParams::fit(records.iter().map(|r| &r.features.values[..]))?,
    };
    let rows = records
        .iter()
        .map(|r| params.apply(&r.features.values))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, params))
}

/// Rows as a `features x records` matrix, the layout the networks expect.
pub fn to_columns(rows: &[Vec<f64>], dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((dim, rows.len()), |(i, j)| rows[j][i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sae,
    Nn,
    Softmax,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Softmax, ModelKind::Nn, ModelKind::Sae];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Sae => "SAE",
            ModelKind::Nn => "Neural network",
            ModelKind::Softmax => "Soft-max",
        }
    }
}

/// A trained network plus the scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionModel {
    pub kind: ModelKind,
    pub network: SaeModel,
    pub normalization: NormalizationParams,
}

impl DetectionModel {
    pub fn class_names(&self) -> &[String] {
        &self.network.class_names
    }

    /// Class-probability vector for one raw feature vector.
    pub fn classify(&self, features: &[f64]) -> Result<(usize, Vec<f64>)> {
        let x = self.normalization.apply(features)?;
        self.network.predict(&x)
    }

    /// Probability vectors for many raw feature vectors at once.
    pub fn predict_proba(&self, records: &[LabeledRecord]) -> Result<Vec<Vec<f64>>> {
        let (rows, _) = normalize(records, Some(&self.normalization))?;
        let probs = self
            .network
            .predict_proba(to_columns(&rows, self.normalization.dim()).view())?;
        Ok(probs.columns().into_iter().map(|c| c.to_vec()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub sae: DetectionModel,
    pub nn: DetectionModel,
    pub softmax: DetectionModel,
    pub logs: BTreeMap<&'static str, TrainingLog>,
}

impl TrainedModels {
    pub fn get(&self, kind: ModelKind) -> &DetectionModel {
        match kind {
            ModelKind::Sae => &self.sae,
            ModelKind::Nn => &self.nn,
            ModelKind::Softmax => &self.softmax,
        }
    }
}

/// Class ids of the records.
fn label_ids(records: &[LabeledRecord]) -> Vec<usize> {
    records.iter().map(|r| r.label.id()).collect()
}

/// Trains one kind of model on normalized training data.
pub fn train_model(
    kind: ModelKind,
    records: &[LabeledRecord],
    hp: &Hyperparams,
) -> Result<(DetectionModel, TrainingLog)> {
    let (rows, normalization) = normalize(records, None)?;
    let x = to_columns(&rows, NUM_FEATURES);
    let labels = label_ids(records);
    let names = TrafficClass::names();
    let (network, log) = match kind {
        ModelKind::Sae => sae::train_stacked(x.view(), &labels, &names, hp)?,
        ModelKind::Nn => sae::train_unpretrained(x.view(), &labels, &names, hp)?,
        ModelKind::Softmax => sae::train_softmax_only(x.view(), &labels, &names, hp)?,
    };
    Ok((
        DetectionModel {
            kind,
            network,
            normalization,
        },
        log,
    ))
}

/// Soft-max baseline, un-pretrained network and SAE with shared seed and
/// epoch budget.
pub fn train_all(records: &[LabeledRecord], hp: &Hyperparams) -> Result<TrainedModels> {
    let mut logs = BTreeMap::new();
    let (softmax, log) = train_model(ModelKind::Softmax, records, hp)?;
    logs.insert("softmax", log);
    let (nn, log) = train_model(ModelKind::Nn, records, hp)?;
    logs.insert("nn", log);
    let (sae, log) = train_model(ModelKind::Sae, records, hp)?;
    logs.insert("sae", log);
    Ok(TrainedModels {
        sae,
        nn,
        softmax,
        logs,
    })
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub mode: ClassMode,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub class_stats: Vec<ClassStats>,
    /// One-vs-rest curve per class; `None` when the class is absent from the
    /// test set.
    pub roc: Vec<Option<RocCurve>>,
}

/// Collapses an 8-class probability vector: attack score is `1 - P(N)`.
fn collapse_probs(mode: ClassMode, probs: &[f64]) -> Vec<f64> {
    match mode {
        ClassMode::EightClass => probs.to_vec(),
        ClassMode::TwoClass => {
            let normal = probs[TrafficClass::N.id()];
            vec![normal, 1.0 - normal]
        }
    }
}

/// Scores an arbitrary set of probability vectors against 8-class labels.
pub fn evaluate_probabilities(
    probs: &[Vec<f64>],
    labels: &[TrafficClass],
    mode: ClassMode,
) -> Result<EvaluationReport> {
    if labels.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let scores: Vec<Vec<f64>> = probs.iter().map(|p| collapse_probs(mode, p)).collect();
    let predicted: Vec<usize> = probs.iter().map(|p| mode.collapse(argmax(p))).collect();
    let actual: Vec<usize> = labels.iter().map(|l| mode.collapse(l.id())).collect();
    let names = mode.class_names();
    let confusion = ConfusionMatrix::build(&predicted, &actual, &names)?;
    let roc = (0..names.len())
        .map(|c| {
            if actual.contains(&c) && actual.iter().any(|&a| a != c) {
                crate::metrics::roc_curve(&scores, &actual, c).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        mode,
        accuracy: confusion.accuracy()?,
        class_stats: confusion.class_stats()?,
        confusion,
        roc,
    })
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

pub fn evaluate(
    model: &DetectionModel,
    test: &[LabeledRecord],
    mode: ClassMode,
) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if model.class_names() != TrafficClass::names().as_slice() {
        return Err(Error::ClassMismatch(format!(
            "model classes {:?} differ from dataset classes {:?}",
            model.class_names(),
            TrafficClass::names()
        )));
    }
    let probs = model.predict_proba(test)?;
    let labels: Vec<TrafficClass> = test.iter().map(|r| r.label).collect();
    evaluate_probabilities(&probs, &labels, mode)
}

impl EvaluationReport {
    /// Human-readable summary with 2-decimal percentages.
    pub fn to_text(&self) -> String {
        let names = self.confusion.class_names();
        let mut s = String::new();
        let mode = match self.mode {
            ClassMode::EightClass => "8-class",
            ClassMode::TwoClass => "2-class",
        };
        writeln!(s, "mode: {mode}").unwrap();
        writeln!(s, "records: {}", self.confusion.total()).unwrap();
        writeln!(s, "accuracy: {:.2}% ({})", self.accuracy, self.accuracy).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "confusion matrix (rows predicted, columns actual)").unwrap();
        write!(s, "{:>8}", "").unwrap();
        for n in names {
            write!(s, "{n:>8}").unwrap();
        }
        writeln!(s).unwrap();
        for (i, row) in self.confusion.counts().iter().enumerate() {
            write!(s, "{:>8}", names[i]).unwrap();
            for c in row {
                write!(s, "{c:>8}").unwrap();
            }
            writeln!(s).unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:>8} {:>10} {:>10} {:>10} {:>8} {:>8}",
            "class", "precision", "recall", "f-measure", "auc", "support"
        )
        .unwrap();
        for (st, roc) in self.class_stats.iter().zip(&self.roc) {
            let auc = roc
                .as_ref()
                .map_or_else(|| "-".to_string(), |r| format!("{:.4}", r.auc));
            writeln!(
                s,
                "{:>8} {:>10.2} {:>10.2} {:>10.2} {:>8} {:>8}",
                st.class, st.precision, st.recall, st.f_measure, auc, st.support
            )
            .unwrap();
        }
        s
    }
}

/// Accuracy of each model in both modes, rows ordered soft-max, NN, SAE.
pub fn compare(
    models: &TrainedModels,
    test: &[LabeledRecord],
) -> Result<Vec<(ModelKind, f64, f64)>> {
    ModelKind::ALL
        .iter()
        .map(|&kind| {
            let model = models.get(kind);
            let probs = model.predict_proba(test)?;
            let labels: Vec<TrafficClass> = test.iter().map(|r| r.label).collect();
            let eight = evaluate_probabilities(&probs, &labels, ClassMode::EightClass)?;
            let two = evaluate_probabilities(&probs, &labels, ClassMode::TwoClass)?;
            Ok((kind, eight.accuracy, two.accuracy))
        })
        .collect()
}

pub fn comparison_table(rows: &[(ModelKind, f64, f64)]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<16} {:>10} {:>10}", "model", "8-class", "2-class").unwrap();
    for (kind, a8, a2) in rows {
        writeln!(s, "{:<16} {:>9.2}% {:>9.2}%", kind.label(), a8, a2).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub interval_start: f64,
    pub host: Ipv4Addr,
    pub class: String,
    pub probability: f64,
}

/// Replays a trace and classifies every host-interval vector. With
/// `monitored`, only those hosts are reported.
pub fn detect(
    model: &DetectionModel,
    trace: &[PacketHeader],
    cfg: &ReplayConfig,
    monitored: Option<&BTreeSet<Ipv4Addr>>,
) -> Result<Vec<Detection>> {
    let out = replay(trace, cfg)?;
    out.vectors
        .iter()
        .filter(|fv| monitored.is_none_or(|m| m.contains(&fv.host)))
        .map(|fv| {
            let (class, probs) = model.classify(&fv.values)?;
            Ok(Detection {
                interval_start: fv.interval_start,
                host: fv.host,
                class: model.class_names()[class].clone(),
                probability: probs[class],
            })
        })
        .collect()
}
