use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use sdn_ddos::features::NUM_FEATURES;
use sdn_ddos::labels::{ClassMode, TrafficClass};
use sdn_ddos::pipeline::{
    detect, evaluate, label_vectors, normalize, replay, train_model, ModelKind,
    NormalizationParams, ReplayConfig,
};
use sdn_ddos::sae::Hyperparams;
use sdn_ddos::switch::{Switch, Topology};
use sdn_ddos::tcfi::{Controller, Tcfi, TcfiAction};
use sdn_ddos::traffic::flow_key_of;
use sdn_ddos::trafficgen::{generate, ScenarioSpec};
use sdn_ddos::{formats, scenarios};

fn normal_only() -> ScenarioSpec {
    ScenarioSpec::from_toml(
        r#"
        seed = 3
        duration = 1800
        hosts = ["10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4", "10.0.0.5"]
        "#,
    )
    .unwrap()
}

fn flood_only(spoofing: bool) -> ScenarioSpec {
    ScenarioSpec::from_toml(&format!(
        r#"
        seed = 4
        duration = 600
        hosts = ["10.0.0.1", "10.0.0.2"]
        victims = ["10.0.0.2"]
        [normal_profile]
        flows_per_minute = 0
        [[attack_segments]]
        start = 60
        end = 540
        vector_set = ["T", "U", "I"]
        victim = "10.0.0.2"
        packet_rate = 20
        spoofing = {spoofing}
        "#
    ))
    .unwrap()
}

fn controller(spec: &ScenarioSpec) -> Controller {
    Controller::new(
        Switch::new(Topology::from_hosts(spec.hosts.iter().copied())),
        Tcfi::default(),
    )
}

#[test]
fn generation_is_deterministic() {
    let spec = scenarios::demo().unwrap();
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.packets, b.packets);
    assert_eq!(a.ground_truth, b.ground_truth);
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    formats::write_trace(&mut ta, &a.packets).unwrap();
    formats::write_trace(&mut tb, &b.packets).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn normal_flows_get_rules() {
    let spec = normal_only();
    let trace = generate(&spec).unwrap();
    assert!(trace
        .ground_truth
        .rows()
        .all(|(_, _, c)| c == TrafficClass::N));
    let mut ctl = controller(&spec);
    let mut flows = BTreeSet::new();
    let mut installed = BTreeSet::new();
    for pkt in &trace.packets {
        flows.insert(flow_key_of(pkt));
        if let Some(TcfiAction::InstallBoth { flow, symflow }) = ctl.ingest(pkt).unwrap() {
            installed.insert(flow);
            installed.insert(symflow);
        }
    }
    let covered = flows.intersection(&installed).count() as f64 / flows.len() as f64;
    assert!(
        covered >= 0.95,
        "only {:.2}% of flows got rules",
        100.0 * covered
    );
}

#[test]
fn spoofed_floods_install_no_rules() {
    let spec = flood_only(true);
    let trace = generate(&spec).unwrap();
    assert!(trace.packets.len() > 10_000);
    let mut ctl = controller(&spec);
    for pkt in &trace.packets {
        ctl.ingest(pkt).unwrap();
    }
    assert_eq!(ctl.stats().rules_installed, 0);
}

#[test]
fn symmetric_fraction_drops_for_the_victim() {
    let spec = scenarios::demo().unwrap();
    let trace = generate(&spec).unwrap();
    let out = replay(
        &trace.packets,
        &ReplayConfig::new(spec.interval, Topology::from_hosts(spec.hosts.clone())),
    )
    .unwrap();
    let labels = formats::LabelMap::from_iter(
        trace
            .ground_truth
            .rows()
            .map(|(h, s, c)| ((h, sdn_ddos::pipeline::interval_key(s)), c)),
    );
    let records = label_vectors(out.vectors, &labels).unwrap();
    let mean = |class: TrafficClass| {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.label == class && r.features.feature(1) > 0.0)
            .map(|r| r.features.feature(5))
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(TrafficClass::T) < 0.2, "T: {}", mean(TrafficClass::T));
    assert!(mean(TrafficClass::N) > 0.8, "N: {}", mean(TrafficClass::N));
}

#[test]
fn normalization_uses_training_bounds_only() {
    let train = [vec![0.0, 5.0], vec![10.0, 5.0]];
    let params = NormalizationParams::fit(train.iter().map(Vec::as_slice)).unwrap();
    assert_eq!(params.apply(&[5.0, 5.0]).unwrap(), vec![0.5, 0.0]);
    assert_eq!(params.apply(&[20.0, 1.0]).unwrap(), vec![1.0, 0.0]);
    assert_eq!(params.apply(&[-3.0, 9.0]).unwrap()[0], 0.0);
}

#[test]
fn demo_pipeline_detects_attacks() {
    let spec = scenarios::demo().unwrap();
    let trace = generate(&spec).unwrap();
    let topo = Topology::from_hosts(spec.hosts.clone());
    let cfg = ReplayConfig::new(spec.interval, topo);
    let out = replay(&trace.packets, &cfg).unwrap();
    let labels = formats::LabelMap::from_iter(
        trace
            .ground_truth
            .rows()
            .map(|(h, s, c)| ((h, sdn_ddos::pipeline::interval_key(s)), c)),
    );
    let records = label_vectors(out.vectors, &labels).unwrap();
    assert!(records
        .iter()
        .all(|r| r.features.values.len() == NUM_FEATURES));
    let hp = Hyperparams {
        epochs_finetune: 1000,
        ..Hyperparams::default()
    };
    let (model, _) = train_model(ModelKind::Softmax, &records, &hp).unwrap();
    let report8 = evaluate(&model, &records, ClassMode::EightClass).unwrap();
    let report2 = evaluate(&model, &records, ClassMode::TwoClass).unwrap();
    assert!(report2.accuracy >= report8.accuracy);
    assert_eq!(report8.confusion.total(), records.len() as u64);
    assert!(report2.accuracy > 90.0, "{}", report2.to_text());

    let (normalized, params) = normalize(&records, Some(&model.normalization)).unwrap();
    assert_eq!(normalized.len(), records.len());
    assert_eq!(params, model.normalization);

    let victim = Ipv4Addr::new(10, 0, 0, 2);
    let monitored: BTreeSet<Ipv4Addr> = [victim].into();
    let detections = detect(&model, &trace.packets, &cfg, Some(&monitored)).unwrap();
    assert!(detections.iter().all(|d| d.host == victim));
    let expected = records.iter().filter(|r| r.features.host == victim).count();
    assert_eq!(detections.len(), expected);
}
