use std::path::PathBuf;

use ris_core::harness::{
    brute_force_wsr, emit_report, load_scenario_file, parse_scenario_str, run_campaign, write_atomic, Campaign, Task,
};
use ris_core::scene::synthesize_channels;
use ris_core::Error;

fn example() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/example.toml")
}

const TINY: &str = r#"
seed = 3
power_budget = 1.0
bs_antennas = 1

[channel]
reference_loss_db = 0.0

[[ris]]
elements = 6
feasibility = "discrete"
tau = 2
position = [20.0, 5.0, 5.0]

[[terminal]]
position = [25.0, 0.0, 1.5]
noise_power = 1e-6
"#;

#[test]
fn example_scenario_loads() {
    let file = load_scenario_file(&example()).unwrap();
    assert_eq!(file.scenario.bs_antennas, 4);
    assert_eq!(file.scenario.num_ris(), 2);
    assert!(file.scenario.eavesdropper.is_some() && file.scenario.relay.is_some());
}

#[test]
fn unknown_key_is_a_parse_error_with_line() {
    let text = TINY.replace("[channel]", "[channel]\nbogus = 1");
    match parse_scenario_str(&text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_value_names_the_key() {
    let text = TINY.replace("noise_power = 1e-6", "noise_power = -1.0");
    match parse_scenario_str(&text) {
        Err(Error::Validation { key, line, .. }) => {
            assert_eq!(key, "terminal[0].noise_power");
            assert_eq!(line, 17);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn campaign_with_oracle_reports_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    let c = Campaign {
        scenario_path: path.clone(),
        task: Task::Wsr,
        trials: 4,
        seed_base: 100,
        output_dir: dir.path().join("out"),
        oracle: true,
    };
    let res = run_campaign(&c).unwrap();
    assert_eq!(res.summary.feasible, 4);
    for row in &res.rows {
        assert!(row.oracle_gap.unwrap().abs() < 1e-9);
    }
    let paths = emit_report(&res, &c.output_dir).unwrap();
    let metrics = std::fs::read_to_string(&paths.metrics).unwrap();
    assert!(metrics.starts_with("trial,seed,objective,baseline_objective,iterations,feasible,oracle_gap\n"));
    assert_eq!(metrics.lines().count(), 5);
    assert!(std::fs::read_to_string(&paths.timings)
        .unwrap()
        .starts_with("trial,wall_ms\n"));
    assert!(std::fs::read_to_string(&paths.traces)
        .unwrap()
        .starts_with("trial,iteration,objective,min_slack\n"));
    assert!(paths.summary.exists());

    let file = load_scenario_file(&path).unwrap();
    let mut sc = file.scenario.clone();
    sc.seed = 100;
    let ch = synthesize_channels(&sc, 0).unwrap();
    assert!(brute_force_wsr(&ch, &sc).unwrap() >= res.rows[0].objective - 1e-9);
}

#[test]
fn task_names_round_trip() {
    for t in [
        "wsr",
        "wsr_clustered",
        "slp",
        "slp_all",
        "pilot",
        "hybrid",
        "secrecy",
        "distributed",
    ] {
        assert_eq!(t.parse::<Task>().unwrap().name(), t);
    }
    assert!("nope".parse::<Task>().is_err());
}

#[test]
fn atomic_write_replaces_content() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    write_atomic(&p, b"one").unwrap();
    write_atomic(&p, b"two").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"two");
}
