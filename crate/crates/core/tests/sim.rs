use std::path::Path;

use tempfile::TempDir;

use pipeplan::landscape::{ArrivalTrace, TraceEntry, TraceParams};
use pipeplan::model::{Fraction, OperatorSpec, PipelineSpec, PlanPoint, Tier, TierTopology};
use pipeplan::par::Execution;
use pipeplan::sim::{
    ablations, compare, run, DriftChange, DriftEvent, Hardness, QueryStatus, SimConfig, TraceSource, Variant,
};

/// One operator with one configuration on a single tier of `machines`
/// machines. Only a whole machine meets the hard latency SLO, so at most
/// `machines` queries can be served at once.
fn single_slot(dir: &Path, machines: u32, trace: TraceSource) -> SimConfig {
    let op = OperatorSpec::new(0, "detect", &["only"], false, 4e4);
    let pipeline = PipelineSpec::new("one", vec![op], vec![]).unwrap();
    let tier = Tier {
        name: "cloud".into(),
        machine_count: machines,
        capacity: 1.0,
        unit_cost: 3.0,
        speed_factor: 1.0,
    };
    let topology = TierTopology::new(vec![tier], vec![vec![10_000.0]], 0.005, 0.001, 0).unwrap();
    pipeplan::io::write_json(dir.join("pipeline.json"), &pipeline).unwrap();
    pipeplan::io::write_json(dir.join("topology.json"), &topology).unwrap();
    let text = serde_json::json!({
        "schema_version": 1,
        "seed": 5,
        "topology": "topology.json",
        "templates": [{ "name": "one", "pipeline_file": "pipeline.json", "landscape_seed": 3 }],
        "trace": { "generate": { "seed": 1, "duration": 1.0, "base_rate": 1.0, "templates": 1 } },
        "hardness": "hard"
    })
    .to_string();
    let mut config: SimConfig = pipeplan::io::parse_json(Path::new("sim.json"), &text).unwrap();
    config.trace = trace;
    config.rebased(dir)
}

fn generated(seed: u64, duration: f64, rate: f64) -> TraceSource {
    TraceSource::Generate(TraceParams::new(seed, duration, rate, 1))
}

fn written(dir: &Path, entries: Vec<TraceEntry>) -> TraceSource {
    let path = dir.join("trace.jsonl");
    ArrivalTrace { params: None, entries }.write(&path).unwrap();
    TraceSource::File(path)
}

fn entry(arrival_time: f64, lifespan: f64) -> TraceEntry {
    TraceEntry {
        arrival_time,
        template: 0,
        slo_quantile: 0.5,
        weight: 1.0,
        lifespan,
    }
}

#[test]
fn only_a_whole_machine_meets_the_slo() {
    let dir = TempDir::new().unwrap();
    let s = single_slot(dir.path(), 1, generated(1, 10.0, 0.1)).scenario().unwrap();
    let w = &s.templates[0].workload;
    let at = |f| w.latency(&PlanPoint { configuration: vec![0], placement: vec![0], resources: vec![f] }).unwrap();
    let (l_mult, _) = Hardness::Hard.multipliers();
    assert!(at(Fraction::Half) > l_mult * at(Fraction::Full));
}

#[test]
fn empty_trace_gives_an_empty_report() {
    let dir = TempDir::new().unwrap();
    let config = single_slot(dir.path(), 2, written(dir.path(), vec![]));
    let out = run(&config.scenario().unwrap()).unwrap();
    let r = &out.report;
    assert_eq!((r.queries, r.peak_goodput), (0, 0));
    assert_eq!((r.goodput_integral, r.deployment_dollars, r.profiling_gpu_seconds), (0.0, 0.0, 0.0));
    assert!(QueryStatus::ALL.iter().all(|&s| r.count(s) == 0));
}

#[test]
fn lone_query_is_served_for_its_whole_lifespan() {
    let dir = TempDir::new().unwrap();
    let config = single_slot(dir.path(), 2, written(dir.path(), vec![entry(3.0, 120.0)]));
    let r = run(&config.scenario().unwrap()).unwrap().report;
    assert_eq!(r.count(QueryStatus::Completed), 1);
    let q = &r.per_query[0];
    let admitted = q.admitted_at.unwrap();
    assert_eq!(admitted, q.arrival_time + q.planning_seconds);
    assert_eq!(q.admitted_plan_compliant, Some(true));
    assert_eq!(r.peak_goodput, 1);
    assert!((r.goodput_integral - (123.0 - admitted)).abs() < 1e-9);
    assert_eq!(r.horizon, 123.0);
    // One whole machine for the served time.
    let dollars = 3.0 * (123.0 - admitted) / 3600.0;
    assert!((r.deployment_dollars - dollars).abs() < 1e-12);
}

#[test]
fn goodput_saturates_at_the_machine_count() {
    let machines = 4u32;
    let lifespan = 60.0;
    let mut means = Vec::new();
    for load in [0.5, 1.0, 2.0] {
        let dir = TempDir::new().unwrap();
        let rate = load * machines as f64 / lifespan;
        let config = single_slot(dir.path(), machines, generated(11, 1800.0, rate));
        let r = run(&config.scenario().unwrap()).unwrap().report;
        assert!(r.peak_goodput <= machines as usize, "load {load}: peak {}", r.peak_goodput);
        assert!(r.series.iter().all(|p| p.admitted <= machines as usize));
        assert!(r.mean_goodput <= machines as f64 + 1e-12);
        if load >= 2.0 {
            assert_eq!(r.peak_goodput, machines as usize);
            assert!(r.mean_goodput >= 0.9 * machines as f64, "load {load}: mean {}", r.mean_goodput);
        }
        means.push(r.mean_goodput);
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    // Light load is served almost in full: about rate × lifespan at once.
    assert!(means[0] >= 0.8 * 0.5 * machines as f64, "{means:?}");
}

#[test]
fn statuses_account_for_every_arrival() {
    let dir = TempDir::new().unwrap();
    let config = single_slot(dir.path(), 2, generated(4, 600.0, 0.1));
    let s = config.scenario().unwrap();
    let r = run(&s).unwrap().report;
    assert_eq!(r.queries, s.trace.entries.len());
    assert_eq!(r.status_counts.values().sum::<usize>(), r.queries);
    assert_eq!(r.per_query.len(), r.queries);
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = SimConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/drift/bandwidth.json")).unwrap();
    let s = config.scenario().unwrap();
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    assert_eq!(a, b);
    a.write(&dir.path().join("a")).unwrap();
    b.write(&dir.path().join("b")).unwrap();
    for f in ["report.json", "goodput.csv", "queries.jsonl", "deployments.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn identical_variants_compare_at_exactly_one() {
    let dir = TempDir::new().unwrap();
    let config = single_slot(dir.path(), 2, generated(4, 300.0, 0.1));
    let v = |name: &str| Variant {
        name: name.into(),
        config: config.clone(),
    };
    for exec in [Execution::Sequential, Execution::Parallel] {
        let c = compare(&[v("a"), v("b")], exec).unwrap();
        let row = c.row("b").unwrap();
        assert_eq!(row.goodput_factor, 1.0);
        assert_eq!(c.reports[0], c.reports[1]);
    }
    let names: Vec<String> = ablations(&config).into_iter().map(|v| v.name).collect();
    assert_eq!(names, ["full", "no-guided-sampling", "fixed-n", "no-warm-start", "fcfs"]);
}

#[test]
fn compare_rejects_mismatched_scenarios() {
    let dir = TempDir::new().unwrap();
    let config = single_slot(dir.path(), 2, generated(4, 300.0, 0.1));
    let mut other = config.clone();
    other.seed += 1;
    let mut traced = config.clone();
    traced.trace = generated(5, 300.0, 0.1);
    for bad in [other, traced] {
        let vs = [
            Variant { name: "a".into(), config: config.clone() },
            Variant { name: "b".into(), config: bad },
        ];
        assert!(compare(&vs, Execution::Sequential).is_err());
    }
    assert!(compare(&[], Execution::Sequential).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let base = single_slot(dir.path(), 2, generated(4, 300.0, 0.1));
    let mut no_templates = base.clone();
    no_templates.templates.clear();
    let mut bad_link = base.clone();
    bad_link.drift = vec![DriftEvent {
        time: 10.0,
        change: DriftChange::Bandwidth { a: 0, b: 5, mbps: 10.0 },
    }];
    let mut bad_template = base.clone();
    bad_template.drift = vec![DriftEvent {
        time: 10.0,
        change: DriftChange::AccuracyShift { template: 3, logit_shift: 1.0 },
    }];
    let mut bad_beta = base.clone();
    bad_beta.aging_beta = -1.0;
    let mut missing = base.clone();
    missing.templates[0].pipeline_file = Some(dir.path().join("absent.json"));
    let mut both = base.clone();
    both.templates[0].builtin = Some("VT".into());
    let mut stray = base.clone();
    stray.trace = written(dir.path(), vec![TraceEntry { template: 4, ..entry(1.0, 10.0) }]);
    for (name, c) in [
        ("no templates", no_templates),
        ("bad link", bad_link),
        ("bad template", bad_template),
        ("negative beta", bad_beta),
        ("missing file", missing),
        ("two pipeline sources", both),
        ("unknown trace template", stray),
    ] {
        assert!(c.scenario().is_err(), "{name}");
    }
    assert!(base.scenario().is_ok());
}
