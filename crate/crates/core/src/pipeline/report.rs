use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arima::SimulationSet;
use crate::gbtree::GbtParams;
use crate::impute::ImputationReport;
use crate::ingest::{self, IndicatorKey, MissingnessAudit, PanelDataset};
use crate::select::FeatureRanking;
use crate::tune::{self, EvalReport, GridRow};

use super::{ForecastResult, HorizonPrediction, PartialRun, PipelineError, Provenance, Stage, StageError};

/// Files every complete run writes.
pub const REPORT_FILES: [&str; 8] = [
    "forecast.csv",
    "eval.csv",
    "mape.csv",
    "features.csv",
    "arima_exclusions.csv",
    "grid_table.csv",
    "plot_spi.csv",
    "run.json",
];

fn write_err(path: &Path, message: impl ToString) -> PipelineError {
    PipelineError::new(
        Stage::Report,
        StageError::Write {
            path: path.display().to_string(),
            message: message.to_string(),
        },
    )
}

fn write_rows(path: &Path, rows: Vec<Vec<String>>) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

fn write_forecast(horizon: &[HorizonPrediction], path: &Path) -> Result<(), PipelineError> {
    let mut rows = vec![vec!["year".to_string(), "spi_predicted".into()]];
    for h in horizon {
        rows.push(vec![h.year.to_string(), h.spi_predicted.to_string()]);
    }
    write_rows(path, rows)
}

/// Reads a `year,spi_predicted` file written by a run.
pub fn read_forecast_csv(path: &Path) -> Result<Vec<HorizonPrediction>, PipelineError> {
    let err = |e: csv::Error| PipelineError::new(Stage::Report, ingest::IngestError::Csv {
        path: path.to_path_buf(),
        source: e,
    });
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(err)
}

/// Ranking rows with each indicator's ARIMA outcome and whether the final
/// model uses it.
fn write_features(
    ranking: &FeatureRanking,
    sim: Option<&SimulationSet>,
    used: Option<&[IndicatorKey]>,
    path: &Path,
) -> Result<(), PipelineError> {
    let mut rows = vec![[
        "rank",
        "indicator_code",
        "indicator_name",
        "edr_distance",
        "selected",
        "arima_status",
        "in_model",
    ]
    .map(String::from)
    .to_vec()];
    for (i, r) in ranking.ranked.iter().enumerate() {
        let status = match sim {
            None => "",
            Some(s) => {
                if s.included.iter().any(|f| f.key == r.key) {
                    "included"
                } else if let Some(e) = s.excluded.iter().find(|e| e.key == r.key) {
                    e.reason.as_str()
                } else {
                    "not_simulated"
                }
            }
        };
        let in_model = used.map(|u| u.contains(&r.key).to_string()).unwrap_or_default();
        rows.push(vec![
            (i + 1).to_string(),
            r.key.code.clone(),
            r.key.name.clone(),
            r.distance.to_string(),
            ranking.selected.contains(&r.key).to_string(),
            status.to_string(),
            in_model,
        ]);
    }
    write_rows(path, rows)
}

fn write_missingness(audit: &MissingnessAudit, path: &Path) -> Result<(), PipelineError> {
    let mut rows = vec![vec!["indicator_code".to_string(), "missing_fraction".into(), "retained".into()]];
    for (k, f) in &audit.fractions {
        rows.push(vec![k.code.clone(), f.to_string(), audit.retained.contains(k).to_string()]);
    }
    write_rows(path, rows)
}

/// Long `year,series,value` table: actual and model values for every
/// in-sample year, then the horizon forecast.
fn write_plot(eval: &EvalReport, horizon: &[HorizonPrediction], path: &Path) -> Result<(), PipelineError> {
    let mut rows = vec![vec!["year".to_string(), "series".into(), "value".into()]];
    for p in &eval.pairs {
        rows.push(vec![p.year.to_string(), "actual".into(), p.actual.to_string()]);
    }
    for p in &eval.pairs {
        rows.push(vec![p.year.to_string(), "predicted".into(), p.predicted.to_string()]);
    }
    for h in horizon {
        rows.push(vec![h.year.to_string(), "forecast".into(), h.spi_predicted.to_string()]);
    }
    write_rows(path, rows)
}

#[derive(Serialize)]
struct Manifest<'a> {
    country: &'a str,
    provenance: &'a Provenance,
    config: serde_json::Value,
    features: Vec<&'a str>,
    excluded: Vec<(&'a str, &'a str)>,
    dropped_sparse: Vec<&'a str>,
    best_params: &'a GbtParams,
    best_cv_mape: Option<f64>,
    train_mape: f64,
    test_mape: f64,
    forecast: &'a [HorizonPrediction],
    imputation: &'a ImputationReport,
}

fn best_cv(table: &[GridRow], best: &GbtParams) -> Option<f64> {
    table.iter().find(|r| &r.params == best).map(|r| r.cv_mape)
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| write_err(path, e))
}

fn prepare(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

/// Writes the full report of a run into `dir` and returns the paths written.
/// Output bytes depend only on the result, so equal runs give equal files.
pub fn emit_report(result: &ForecastResult, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    prepare(dir)?;
    let p = |name: &str| dir.join(name);
    let e = |path: PathBuf| move |err: tune::TuneError| write_err(&path, err);

    write_forecast(&result.horizon, &p("forecast.csv"))?;
    result.eval.write_pairs_csv(&p("eval.csv")).map_err(e(p("eval.csv")))?;
    result.eval.write_mape_csv(&p("mape.csv")).map_err(e(p("mape.csv")))?;
    write_features(
        &result.ranking,
        Some(&result.simulation),
        Some(&result.features),
        &p("features.csv"),
    )?;
    result
        .simulation
        .write_exclusions_csv(&p("arima_exclusions.csv"))
        .map_err(|err| write_err(&p("arima_exclusions.csv"), err))?;
    tune::write_grid_csv(&result.eval.grid_table, &p("grid_table.csv")).map_err(e(p("grid_table.csv")))?;
    write_plot(&result.eval, &result.horizon, &p("plot_spi.csv"))?;

    let manifest = Manifest {
        country: &result.country,
        provenance: &result.provenance,
        config: result.config.canonical_json(),
        features: result.features.iter().map(|k| k.code.as_str()).collect(),
        excluded: result
            .simulation
            .excluded
            .iter()
            .map(|x| (x.key.code.as_str(), x.reason.as_str()))
            .collect(),
        dropped_sparse: result.audit.dropped.iter().map(|(k, _)| k.code.as_str()).collect(),
        best_params: &result.eval.best_params,
        best_cv_mape: best_cv(&result.eval.grid_table, &result.eval.best_params),
        train_mape: result.eval.train_mape,
        test_mape: result.eval.test_mape,
        forecast: &result.horizon,
        imputation: &result.imputation,
    };
    write_json(&manifest, &p("run.json"))?;

    result
        .simulation
        .write_forecasts_csv(&p("simulated_features.csv"))
        .map_err(|err| write_err(&p("simulated_features.csv"), err))?;
    write_missingness(&result.audit, &p("missingness.csv"))?;
    let model = p("model.txt");
    fs::write(&model, result.final_model.to_text()).map_err(|err| write_err(&model, err))?;

    let mut written: Vec<PathBuf> = REPORT_FILES.iter().map(|f| p(f)).collect();
    written.extend(["simulated_features.csv", "missingness.csv", "model.txt"].map(p));
    Ok(written)
}

fn write_panel(ds: &PanelDataset, dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    ingest::write_panel_csv(ds, &path).map_err(|e| write_err(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes whatever a partial run has computed. Used by the single-stage CLI
/// commands.
pub fn write_partial(run: &PartialRun, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    prepare(dir)?;
    let mut written = Vec::new();
    let p = |name: &str| dir.join(name);
    if let Some(raw) = &run.raw {
        write_panel(raw, dir, "panel.csv", &mut written)?;
        let path = p("target.csv");
        ingest::write_target_csv(raw, &path).map_err(|e| write_err(&path, e))?;
        written.push(path);
    }
    if let Some(audit) = &run.audit {
        write_missingness(audit, &p("missingness.csv"))?;
        written.push(p("missingness.csv"));
    }
    if let Some(imputed) = &run.imputed {
        write_panel(imputed, dir, "imputed_panel.csv", &mut written)?;
    }
    if let Some(report) = &run.imputation {
        write_json(report, &p("imputation.json"))?;
        written.push(p("imputation.json"));
    }
    if let Some(ranking) = &run.ranking {
        write_features(
            ranking,
            run.simulation.as_ref(),
            run.features.as_deref(),
            &p("features.csv"),
        )?;
        written.push(p("features.csv"));
    }
    if let Some(sim) = &run.simulation {
        for (name, res) in [
            ("arima_exclusions.csv", sim.write_exclusions_csv(&p("arima_exclusions.csv"))),
            ("simulated_features.csv", sim.write_forecasts_csv(&p("simulated_features.csv"))),
        ] {
            res.map_err(|e| write_err(&p(name), e))?;
            written.push(p(name));
        }
    }
    if let Some(search) = &run.search {
        tune::write_grid_csv(&search.table, &p("grid_table.csv")).map_err(|e| write_err(&p("grid_table.csv"), e))?;
        written.push(p("grid_table.csv"));
    }
    if let Some(eval) = &run.eval {
        eval.write_pairs_csv(&p("eval.csv")).map_err(|e| write_err(&p("eval.csv"), e))?;
        eval.write_mape_csv(&p("mape.csv")).map_err(|e| write_err(&p("mape.csv"), e))?;
        written.extend([p("eval.csv"), p("mape.csv")]);
    }
    if let Some(horizon) = &run.horizon {
        write_forecast(horizon, &p("forecast.csv"))?;
        written.push(p("forecast.csv"));
    }
    if let Some(model) = &run.final_model {
        fs::write(p("model.txt"), model.to_text()).map_err(|e| write_err(&p("model.txt"), e))?;
        written.push(p("model.txt"));
    }
    Ok(written)
}
