mod common;

use common::*;
use rotor_mle::*;

fn assess_fixture(name: &str, duration: Option<f64>) -> (OracleVerdict, AssessmentReport) {
    let case = fixture(name);
    let mut fault = case.fault.clone().unwrap();
    if let Some(d) = duration {
        fault.clear_time = fault.fault_time + d;
    }
    let sim = simulate_for_assessment(&case.network, &fault);
    let oracle = stability_oracle(&sim, OBSERVATION).unwrap();
    (oracle, assess_simulation(&sim, &AssessConfig::default()).unwrap())
}

#[test]
fn lossy_smib_large_swing_is_stable() {
    let (oracle, report) = assess_fixture("smib_lossy", None);
    assert_eq!(oracle, OracleVerdict::Stable);
    assert_eq!(report.system.status, SystemStatus::Stable);
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn short_fault_is_stable_long_fault_is_unstable() {
    for name in ["two_machine", "three_machine", "four_machine"] {
        let (oracle, report) = assess_fixture(name, Some(0.05));
        assert_eq!(oracle, OracleVerdict::Stable, "{name}");
        assert_eq!(report.system.status, SystemStatus::Stable, "{name}");
        let (oracle, report) = assess_fixture(name, Some(0.45));
        assert_eq!(oracle, OracleVerdict::Unstable, "{name}");
        assert_eq!(report.system.status, SystemStatus::Unstable, "{name}");
        assert_eq!(report.exit_code(), 2);
        assert!(report.pairs.iter().any(|p| p.status.is_unstable()), "{name}");
    }
}

#[test]
fn report_json_has_expected_fields() {
    let (_, report) = assess_fixture("three_machine", None);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let system = &json["system"];
    assert!(system["status"].is_string());
    let pairs = json["pairs"].as_array().unwrap();
    assert!(!pairs.is_empty());
    for p in pairs {
        for key in ["severe", "least", "pattern", "w", "m_n", "status", "decision_time_s", "peak_lambda"] {
            assert!(p.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn csv_round_trip_gives_the_same_report() {
    let case = fixture("two_machine");
    let fault = case.fault.clone().unwrap();
    let sim = simulate_for_assessment(&case.network, &fault);
    let direct = assess_simulation(&sim, &AssessConfig::default()).unwrap();
    let parsed = parse_traces(&write_traces(&sim.traces), &ParseOptions::default()).unwrap();
    let meta = EventMeta { fault_time: fault.fault_time, clear_time: fault.clear_time, label: None };
    let data = align(&parsed, &meta).unwrap();
    let via_csv = run_assessment(&data, &meta, &AssessConfig::default()).unwrap();
    assert_eq!(direct.to_json(), via_csv.to_json());
}

#[test]
fn short_observation_leaves_pairs_pending() {
    let case = fixture("three_machine");
    let fault = case.fault.clone().unwrap();
    let sim = simulate(&case.network, &fault, &SimOptions { horizon: fault.clear_time + 0.6, ..Default::default() }).unwrap();
    let report = assess_simulation(&sim, &AssessConfig::default()).unwrap();
    assert!(matches!(report.system.status, SystemStatus::Pending | SystemStatus::Unstable));
}

#[test]
fn tight_t_max_times_out() {
    let case = fixture("smib_lossy");
    let fault = case.fault.clone().unwrap();
    let sim = simulate_for_assessment(&case.network, &fault);
    let report = assess_simulation(&sim, &AssessConfig::default().with_t_max(0.3)).unwrap();
    assert_eq!(report.system.status, SystemStatus::Undetermined);
    assert_eq!(report.exit_code(), 3);
}
