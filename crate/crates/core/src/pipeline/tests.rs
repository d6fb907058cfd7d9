use std::path::Path;

use super::*;
use crate::synthetic::{self, CountrySpec, SYNTHETIC_COUNTRY};
use crate::tune::Grid;

fn small_grid() -> Grid {
    Grid {
        learning_rate: vec![0.1],
        max_depth: vec![2, 3],
        n_estimators: vec![50],
        subsample: vec![1.0],
    }
}

fn fixture(dir: &Path, seed: u64) -> RunConfig {
    let c = synthetic::country(seed, CountrySpec::default());
    let (panel, target) = c.write(dir).unwrap();
    RunConfig {
        country: SYNTHETIC_COUNTRY.into(),
        seed,
        output_dir: dir.join("out"),
        timestamp: Some("2024-01-01T00:00:00Z".into()),
        input: InputConfig {
            panel_csv: Some(panel),
            target_csv: Some(target),
            ..InputConfig::default()
        },
        grid: small_grid(),
        rf: crate::impute::RfConfig {
            n_trees: 30,
            ..Default::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn full_run_writes_every_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 3);
    let result = run_pipeline(&cfg).unwrap();
    assert_eq!(result.horizon.len(), 4);
    assert_eq!(result.horizon.iter().map(|h| h.year).collect::<Vec<_>>(), cfg.horizon);
    assert!(!result.features.is_empty() && result.features.len() <= cfg.edr.k);
    assert_eq!(result.eval.grid_table.len(), 2);
    assert_eq!(result.in_sample().len(), 14);
    let written = emit_report(&result, &cfg.output_dir).unwrap();
    for f in REPORT_FILES {
        assert!(cfg.output_dir.join(f).is_file(), "{f}");
    }
    assert!(written.len() > REPORT_FILES.len());
    assert_eq!(read_forecast_csv(&cfg.output_dir.join("forecast.csv")).unwrap(), result.horizon);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["config_hash"], cfg.hash());
    assert_eq!(json["provenance"]["timestamp"], "2024-01-01T00:00:00Z");
}

#[test]
fn run_until_stops_at_the_requested_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 4);
    let run = run_until(&cfg, Stage::Select).unwrap();
    assert!(run.raw.is_some() && run.imputed.is_some() && run.ranking.is_some());
    assert!(run.simulation.is_none() && run.eval.is_none());
    let written = write_partial(&run, &dir.path().join("partial")).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"imputed_panel.csv".to_string()));
    assert!(names.contains(&"features.csv".to_string()));
    assert!(!names.contains(&"forecast.csv".to_string()));
    assert!(run_until(&cfg, Stage::Config).unwrap().raw.is_none());
}

#[test]
fn imputed_panel_is_complete_and_keeps_observed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 5);
    let run = run_until(&cfg, Stage::Impute).unwrap();
    let pruned = run.pruned.unwrap();
    let imputed = run.imputed.unwrap();
    assert_eq!(imputed.missing_cells(), 0);
    for (a, b) in pruned.columns().iter().zip(imputed.columns()) {
        for (x, y) in a.values.iter().zip(&b.values) {
            if x.is_some() {
                assert_eq!(x, y);
            }
        }
    }
}

#[test]
fn ranking_ignores_held_out_target_years() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 6);
    let before = run_until(&cfg, Stage::Select).unwrap().ranking.unwrap();
    let target_path = cfg.input.target_csv.clone().unwrap();
    let text = std::fs::read_to_string(&target_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let n = lines.len();
    for line in &mut lines[n - 2..] {
        let year = line.split(',').next().unwrap().to_string();
        *line = format!("{year},1000");
    }
    std::fs::write(&target_path, lines.join("\n")).unwrap();
    let after = run_until(&cfg, Stage::Select).unwrap().ranking.unwrap();
    assert_eq!(before, after);
}

#[test]
fn missing_target_year_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 7);
    let path = cfg.input.target_csv.clone().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("2015")).collect();
    std::fs::write(&path, kept.join("\n")).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("2015"), "{err}");
}

#[test]
fn bad_config_exits_with_two() {
    let mut cfg = RunConfig::default();
    cfg.country = "X".into();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn all_excluded_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture(dir.path(), 8);
    cfg.arima.min_accuracy = 100.0;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Simulate);
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn empty_horizon_gives_no_forecast_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture(dir.path(), 9);
    cfg.horizon.clear();
    let result = run_pipeline(&cfg).unwrap();
    assert!(result.horizon.is_empty());
}

#[test]
fn two_stage_mode_keeps_at_most_k_survivors_in_rank_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture(dir.path(), 10);
    cfg.two_stage_selection = true;
    cfg.edr.k = 5;
    let run = run_until(&cfg, Stage::Simulate).unwrap();
    let ranking = run.ranking.unwrap();
    assert_eq!(ranking.selected.len(), 20);
    let features = run.features.unwrap();
    assert!(features.len() <= 5);
    let positions: Vec<usize> = features
        .iter()
        .map(|k| ranking.ranked.iter().position(|r| &r.key == k).unwrap())
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn timestamp_prefers_config_value() {
    let mut cfg = RunConfig::default();
    cfg.timestamp = Some("2001-02-03T04:05:06Z".into());
    assert_eq!(resolve_timestamp(&cfg), "2001-02-03T04:05:06Z");
    cfg.timestamp = None;
    assert!(resolve_timestamp(&cfg).ends_with('Z'));
}

#[test]
fn derived_seeds_differ_by_stream() {
    assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
    assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
    assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
}
