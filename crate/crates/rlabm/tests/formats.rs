use std::io::Write;

use proptest::prelude::*;
use rlabm::io::*;
use rlabm::spec::{Experiment, SCHEMA_VERSION};
use rlabm::{ExperimentSpec, HarnessError, MetricsTable};
use rlabm_core::flu::{generate_network, NetworkSpec};
use rlabm_core::mg::{GameConfig, MinorityGame};
use rlabm_core::nn::{standard_specs, MlpParams};
use rlabm_core::sim::{run_episode, FixedActor};
use rlabm_core::RngStream;

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

#[test]
fn metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = MetricsTable::new("run-a");
    t.push(0, 0, "win_rate", 0.5);
    t.push(0, 1, "win_rate", 0.123456789012345);
    t.push(3, 7, "low/improvement", -1e-300);
    let p = dir.path().join("m.csv");
    write_metrics(&p, &t).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("run_id,trial,epoch,metric,value\n"));
    assert_eq!(read_metrics(&p).unwrap(), t);
}

#[test]
fn empty_metrics_keep_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    write_metrics(&p, &MetricsTable::new("x")).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "run_id,trial,epoch,metric,value\n");
    assert!(read_metrics(&p).unwrap().is_empty());
}

#[test]
fn malformed_metrics_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.csv", "run_id,trial,epoch,metric,value\nr,0,0,a,1\nr,zero,0,a,1\n");
    match read_metrics(&p) {
        Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn policy_round_trip_is_bit_exact() {
    let mut rng = RngStream::new(1, "p");
    let a = MlpParams::init(&standard_specs(3, &[20, 20, 20, 20], 2), &mut rng).unwrap();
    let b = MlpParams::init(&standard_specs(7, &[5], 1), &mut rng).unwrap();
    let bytes = encode_policies(&[a.clone(), b.clone()]);
    assert_eq!(&bytes[..4], b"RLMP");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let back = decode_policies(&bytes).unwrap();
    assert_eq!(back, vec![a, b]);
}

#[test]
fn corrupt_policies_are_rejected() {
    let p = MlpParams::init(&standard_specs(2, &[3], 2), &mut RngStream::new(2, "p")).unwrap();
    let bytes = encode_policies(&[p]);
    assert!(decode_policies(&bytes[..bytes.len() - 1]).unwrap_err().contains("truncated"));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_policies(&bad).unwrap_err().contains("magic"));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_policies(&extra).unwrap_err().contains("trailing"));
    let mut version = bytes;
    version[4] = 9;
    assert!(decode_policies(&version).unwrap_err().contains("version"));
}

#[test]
fn network_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = NetworkSpec {
        nodes: 200,
        ..NetworkSpec::default()
    };
    let net = generate_network(&spec, &mut RngStream::new(3, "n")).unwrap();
    assert!(net.edges().len() > 60);
    let p = dir.path().join("net.csv");
    write_network(&p, &net).unwrap();
    assert_eq!(read_network(&p, Some(200)).unwrap(), net);
}

fn network_error(text: &str) -> (u64, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "net.csv", text);
    match read_network(&p, None) {
        Err(HarnessError::Parse { line, message, .. }) => (line, message),
        other => panic!("{other:?}"),
    }
}

#[test]
fn network_errors_name_the_line() {
    assert_eq!(network_error("i,j,lambda\n0,1,0.5\n1,1,0.5\n").0, 3);
    assert_eq!(network_error("i,j,lambda\n0,1,0.5\n1,2,0.5\n2,1,0.3\n").0, 4);
    assert_eq!(network_error("i,j,lambda\n0,1,-1\n").0, 2);
    assert_eq!(network_error("i,j,lambda\n0,1,0.5\n0,x,0.5\n").0, 3);
    assert!(network_error("a,b,c\n0,1,0.5\n").1.contains("header"));
}

#[test]
fn network_missing_file() {
    let err = read_network(std::path::Path::new("/nonexistent/net.csv"), None).unwrap_err();
    assert!(matches!(err, HarnessError::MissingFile(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GameConfig {
        n_agents: 11,
        horizon: 12,
        ..GameConfig::default()
    };
    let mut g = MinorityGame::new(cfg, 1).unwrap();
    let trace = run_episode(&mut g, &mut [FixedActor(1)], 12, 5).unwrap();
    let p = dir.path().join("trace.csv");
    write_trace(&p, &trace, TraceKind::MinorityGame).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with(
        "step,count_choosing_1,minority,tie,default_win_rate,default_split_tie,rl_actions,rl_rewards\n"
    ));
    let (header, rows) = read_trace_columns(&p).unwrap();
    assert_eq!(header.len(), 6);
    assert_eq!(rows.len(), 12);
    for (t, (row, step)) in rows.iter().zip(&trace.steps).enumerate() {
        assert_eq!(row[0], t as f64);
        assert_eq!(row[1], step.summary[0]);
        assert!(row[1] >= 1.0, "the learner always chooses 1");
    }
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_json(
        r#"{"schema_version":1,"id":"m","seed":4,"experiment":{"kind":"mg_multi"}}"#,
    )
    .unwrap();
    let mut summary = serde_json::Map::new();
    summary.insert("x".into(), 1.5.into());
    let m = Manifest {
        run_id: "m".into(),
        kind: "mg_multi".into(),
        seed: 4,
        trial_seeds: vec![1, 2, u64::MAX],
        spec: serde_json::to_value(&spec).unwrap(),
        summary,
        artifacts: vec!["metrics.csv".into()],
        version: "0.1.0".into(),
        created: 17,
    };
    let p = dir.path().join("manifest.json");
    write_manifest(&p, &m).unwrap();
    assert_eq!(read_manifest(&p).unwrap(), m);
    let again: ExperimentSpec = serde_json::from_value(m.spec).unwrap();
    assert_eq!(again, spec);
}

#[test]
fn shipped_specs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let spec = ExperimentSpec::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(spec.schema_version, SCHEMA_VERSION);
        n += 1;
    }
    assert!(n >= 6);
}

fn config_error(text: &str) -> String {
    match ExperimentSpec::from_json(text) {
        Err(e @ HarnessError::Config(_)) => {
            assert_eq!(e.exit_code(), 2);
            e.to_string()
        }
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn spec_schema_errors() {
    assert!(config_error(r#"{"schema_version":1,"id":"a","experiment":{"kind":"mg_multi"}}"#).contains("seed"));
    assert!(config_error(r#"{"schema_version":2,"id":"a","seed":1,"experiment":{"kind":"mg_multi"}}"#)
        .contains("schema_version"));
    assert!(config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"mg_multi","bogus":1}}"#)
        .contains("bogus"));
    assert!(config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"nope"}}"#).contains("nope"));
    assert!(config_error(r#"{"schema_version":1,"id":"a b","seed":1,"experiment":{"kind":"mg_multi"}}"#).contains("id"));
    config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"mg_single_fixed","game":{"rl_agent_ids":[0,1]}}}"#);
    config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"flu_single","train":{"algorithm":"mac"}}}"#);
    config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"mg_multi","train":{"actor_lr":-1}}}"#);
    config_error(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"flu_single","flu":{"behavior":{"omega_pe":0.9}}}}"#);
}

#[test]
fn spec_missing_file() {
    let err = ExperimentSpec::load(std::path::Path::new("/nonexistent/spec.json")).unwrap_err();
    assert!(matches!(err, HarnessError::MissingFile(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn spec_defaults_fill_in() {
    let spec = ExperimentSpec::from_json(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"mg_single_fixed"}}"#)
        .unwrap();
    let Experiment::MgSingleFixed(s) = &spec.experiment else {
        panic!()
    };
    assert_eq!(s.game.n_agents, 301);
    assert_eq!(s.train.epochs, 400);
    assert_eq!(s.trials, 10);
}

#[test]
fn overrides_follow_dotted_paths() {
    let spec = ExperimentSpec::from_json(r#"{"schema_version":1,"id":"a","seed":1,"experiment":{"kind":"mg_resampled"}}"#)
        .unwrap();
    let s2 = spec.with_override("experiment.game.rl_window", "6").unwrap();
    let Experiment::MgResampled(r) = &s2.experiment else {
        panic!()
    };
    assert_eq!(r.game.rl_window, 6);
    assert_eq!(spec.with_override("seed", "9").unwrap().seed, 9);
    assert!(spec.with_override("experiment.game.rl_window", "0").is_err());
    assert!(spec.with_override("experiment.nothing", "1").is_err());
}

proptest! {
    #[test]
    fn policy_bytes_round_trip(seed: u64, inputs in 1usize..6, width in 1usize..6, outputs in 1usize..4) {
        let p = MlpParams::init(&standard_specs(inputs, &[width, width], outputs), &mut RngStream::new(seed, "p")).unwrap();
        prop_assert_eq!(decode_policies(&encode_policies(std::slice::from_ref(&p))).unwrap(), vec![p]);
    }

    #[test]
    fn metrics_values_round_trip(values in prop::collection::vec(-1e12f64..1e12, 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let mut t = MetricsTable::new("r");
        for (i, v) in values.iter().enumerate() {
            t.push(i % 3, i, "v", *v);
        }
        let p = dir.path().join("m.csv");
        write_metrics(&p, &t).unwrap();
        prop_assert_eq!(read_metrics(&p).unwrap(), t);
    }
}
