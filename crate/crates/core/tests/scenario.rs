use satkd::fmt_sig;
use satkd::scenario::{
    load_config, parse_config, run_matrix, ExperimentConfig, ResultRecord, CSV_HEADER,
};

fn small_config() -> ExperimentConfig {
    let mut c = parse_config(
        r#"{
            "grid": {"pump_points": 15, "sampling_points": 8},
            "matrix": {"altitudes_km": [500, 1000], "distances_km": [600, 1800],
                       "period_overrides_s": [5647, 6276]},
            "days_list": [1, 40]
        }"#,
    )
    .unwrap();
    c.output_dir = "unused".into();
    c
}

#[test]
fn csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let full = run_matrix(&small_config(), dir.path()).unwrap();
    assert_eq!(full.len(), 2 * 2 * 2 * 4);

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let json: Vec<ResultRecord> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.json")).unwrap())
            .unwrap();
    assert_eq!(json.len(), full.len());

    for ((line, from_json), exact) in lines.zip(&json).zip(&full) {
        assert_eq!(line, from_json.csv_row());
        assert_eq!(*from_json, exact.rounded());
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], exact.scheme.as_str());
        assert_eq!(cells[14], fmt_sig(exact.effective_rate));
    }
}

#[test]
fn overrides_reach_the_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let records = run_matrix(&small_config(), dir.path()).unwrap();
    let first = records
        .iter()
        .find(|r| r.altitude_km == 500.0 && r.distance_km == 600.0)
        .unwrap();
    assert!((first.contact_length_s - 224.0).abs() < 1.0);
}

#[test]
fn emitted_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    let config = small_config();
    std::fs::write(&path, config.to_json()).unwrap();
    assert_eq!(load_config(&path).unwrap(), config);
}

#[test]
fn missing_config_file_is_reported() {
    let err = load_config("/nonexistent/satkd.json")
        .unwrap_err()
        .to_string();
    assert!(err.contains("/nonexistent/satkd.json"), "{err}");
}
