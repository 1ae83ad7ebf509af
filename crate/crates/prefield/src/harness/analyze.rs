//! Replicated analysis of an external track file: ingest, project,
//! subsample, fit both models, and map prediction differences.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{assemble_fem, FieldParams, Mesh, Rect};
use crate::harness::config::AnalyzeConfig;
use crate::harness::ingest::{project_records, read_raw_records, subsample_tracks, write_tracks_csv};
use crate::harness::manifest::{Artifact, Manifest, ReplicateEntry};
use crate::harness::project::Projection;
use crate::harness::study::write_prediction_csv;
use crate::inference::fit::movement_init_from_tracks;
use crate::inference::{fit_preferential, fit_standard, FitReport, JointModel, ThetaFull};
use crate::movement::Track;
use crate::predict::{krige, predict_preferential, target_lattice, PredictionGrid};
use crate::score::{quantile_of_differences, score_diffs, score_report, ScoreDiffs, ScoreReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReplicate {
    pub index: usize,
    pub seed: u64,
    pub status: String,
    pub standard: Option<FitReport>,
    pub preferential: Option<FitReport>,
}

/// Results of a full data analysis.
#[derive(Debug, Clone)]
pub struct AnalysisOutputs {
    pub track_ids: Vec<String>,
    pub warnings: Vec<String>,
    pub replicates: Vec<AnalysisReplicate>,
    pub targets: Vec<(f64, f64)>,
    /// Per-location quantiles of preferential-minus-standard predictions,
    /// one vector per requested level.
    pub quantile_maps: Vec<(f64, Vec<f64>)>,
    /// Fraction of successful replicates with a positive preferential
    /// strength estimate.
    pub alpha_positive_fraction: f64,
    pub scores: Option<(ScoreReport, ScoreReport, ScoreDiffs)>,
    pub n_failed: usize,
    pub manifest: Manifest,
}

fn bbox(tracks: &[Track], pad: f64) -> Result<Rect> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for t in tracks {
        for &(x, y) in &t.locations {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let span = (x_max - x_min).max(y_max - y_min).max(1.0);
    let pad = pad.max(1e-3 * span);
    Rect::new(x_min - pad, x_max + pad, y_min - pad, y_max + pad)
}

fn moment_field_init(tracks: &[Track], tau2: f64, domain: &Rect) -> FieldParams {
    let responses: Vec<f64> =
        tracks.iter().flat_map(|t| t.responses.iter().copied()).collect();
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    let var = responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    FieldParams {
        mu: mean,
        tau2,
        kappa: 2,
        phi: domain.width().max(domain.height()) / 8.0,
        sigma2: (var - tau2).max(0.05 * var),
    }
}

/// Reads a truth grid (`x,y,value`) aligned to the prediction targets.
fn read_truth_grid(path: &Path, targets: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let num = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::data_at(i + 2, format!("missing {name}")))?
                .parse::<f64>()
                .map_err(|e| Error::data_at(i + 2, format!("bad {name}: {e}")))
        };
        rows.push((num(0, "x")?, num(1, "y")?, num(2, "value")?));
    }
    let span = targets
        .iter()
        .fold(0.0_f64, |a, &(x, y)| a.max(x.abs()).max(y.abs()))
        .max(1.0);
    let tol = 1e-6 * span;
    targets
        .iter()
        .map(|&(tx, ty)| {
            rows.iter()
                .find(|&&(x, y, _)| (x - tx).abs() <= tol && (y - ty).abs() <= tol)
                .map(|&(_, _, v)| v)
                .ok_or_else(|| {
                    Error::data(format!("truth grid has no value at target ({tx}, {ty})"))
                })
        })
        .collect()
}

/// Runs the replicated analysis pipeline over an observation CSV.
pub fn run_data_analysis(
    config: &AnalyzeConfig,
    out_dir: Option<&Path>,
) -> Result<AnalysisOutputs> {
    config.validate()?;
    let records = read_raw_records(&config.input)?;
    let projection = Projection::new(config.zone, config.scale, config.south)?;
    let ingested = project_records(&records, &projection)?;
    for t in &ingested.tracks {
        if config.per_track > t.len() {
            return Err(Error::data(format!(
                "per_track {} exceeds a track length {}",
                config.per_track,
                t.len()
            )));
        }
    }

    // one standard fit on everything fixes the working scale for meshes
    let core = bbox(&ingested.tracks, config.prediction_pad)?;
    let global_init = moment_field_init(&ingested.tracks, config.tau2, &core);
    let fit_opts = config.fit.fit_options();
    let global_std = fit_standard(&ingested.tracks, &global_init, &config.fixed, &fit_opts)?;
    let phi_hat = global_std.theta.field.phi;

    let targets = target_lattice(core, config.prediction_grid, config.prediction_grid);
    let base = Mesh::lattice(core, config.fitting_grid, config.fitting_grid)?;
    let grad_step = base.cell_width().max(base.cell_height());
    let margin = config.fitting_margin.unwrap_or(2.0 * phi_hat) + 2.0 * grad_step;
    let mesh = Arc::new(Mesh::lattice_with_margin(
        core,
        config.fitting_grid,
        config.fitting_grid,
        margin,
    )?);
    let fem = Arc::new(assemble_fem(&mesh)?);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    struct RepOut {
        rec: AnalysisReplicate,
        sub: Vec<Track>,
        pref: PredictionGrid,
        std: PredictionGrid,
    }
    let results: Vec<std::result::Result<RepOut, String>> = pool.install(|| {
        (0..config.replicate_count)
            .into_par_iter()
            .map(|r| {
                let seed = config.seed_base + r as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut run = || -> Result<RepOut> {
                    let sub = subsample_tracks(&ingested.tracks, config.per_track, &mut rng)?;
                    let std_init = moment_field_init(&sub, config.tau2, &core);
                    let std_fit = fit_standard(&sub, &std_init, &config.fixed, &fit_opts)?;
                    let model = JointModel::new(
                        Arc::clone(&mesh),
                        Arc::clone(&fem),
                        &sub,
                        grad_step,
                        config.fit.beta0_sd,
                    )?;
                    let mut movement = movement_init_from_tracks(&sub);
                    movement.c = config.c;
                    let init = ThetaFull { field: std_fit.theta.field, movement };
                    let (pref_fit, laplace) =
                        fit_preferential(&model, &init, &config.fixed, &fit_opts)?;
                    let pref =
                        predict_preferential(&model, &pref_fit.theta, &laplace, &targets)?;
                    let std = krige(&std_fit.theta.field, &sub, &targets)?;
                    Ok(RepOut {
                        rec: AnalysisReplicate {
                            index: r,
                            seed,
                            status: "ok".into(),
                            standard: Some(std_fit),
                            preferential: Some(pref_fit),
                        },
                        sub,
                        pref,
                        std,
                    })
                };
                run().map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut replicates = Vec::new();
    let mut pref_mean = Vec::new();
    let mut pref_var = Vec::new();
    let mut std_mean = Vec::new();
    let mut std_var = Vec::new();
    let mut oks: Vec<&RepOut> = Vec::new();
    let mut n_failed = 0;
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(out) => {
                let mut rec = out.rec.clone();
                if let Some(rep) = rec.standard.as_mut() {
                    rep.wall_time_ms = None;
                }
                if let Some(rep) = rec.preferential.as_mut() {
                    rep.wall_time_ms = None;
                }
                replicates.push(rec);
                pref_mean.push(out.pref.mean.clone());
                pref_var.push(out.pref.variance.clone());
                std_mean.push(out.std.mean.clone());
                std_var.push(out.std.variance.clone());
                oks.push(out);
            }
            Err(msg) => {
                n_failed += 1;
                replicates.push(AnalysisReplicate {
                    index: r,
                    seed: config.seed_base + r as u64,
                    status: format!("failed: {msg}"),
                    standard: None,
                    preferential: None,
                });
            }
        }
    }
    if n_failed * 5 > config.replicate_count {
        return Err(Error::Numerical(format!(
            "{n_failed} of {} analysis replicates failed",
            config.replicate_count
        )));
    }
    if oks.is_empty() {
        return Err(Error::Numerical("every analysis replicate failed".into()));
    }

    let quantile_maps: Vec<(f64, Vec<f64>)> = config
        .quantiles
        .iter()
        .map(|&q| quantile_of_differences(&pref_mean, &std_mean, q).map(|v| (q, v)))
        .collect::<Result<_>>()?;

    let alpha_positive = replicates
        .iter()
        .filter_map(|r| r.preferential.as_ref())
        .filter(|rep| {
            rep.free_names
                .iter()
                .position(|n| n == "alpha")
                .map(|i| rep.estimates[i] > 0.0)
                .unwrap_or(false)
        })
        .count();
    let alpha_positive_fraction = alpha_positive as f64 / oks.len() as f64;

    let scores = match &config.truth_csv {
        Some(path) => {
            let truth_row = read_truth_grid(path, &targets)?;
            let truth: Vec<Vec<f64>> = vec![truth_row; oks.len()];
            let pref = score_report(&truth, &pref_mean, &pref_var, config.rmspe_convention)?;
            let std = score_report(&truth, &std_mean, &std_var, config.rmspe_convention)?;
            let d = score_diffs(&pref, &std)?;
            Some((pref, std, d))
        }
        None => None,
    };

    let mut manifest = Manifest::new("data-analysis", config, config.seed_base)?;
    for rec in &replicates {
        manifest.replicates.push(ReplicateEntry {
            index: rec.index,
            seed: rec.seed,
            status: rec.status.clone(),
            artifacts: Vec::new(),
        });
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut ok_iter = oks.iter();
        for rec in &replicates {
            if !rec.status.starts_with("ok") {
                continue;
            }
            let out = ok_iter.next().unwrap();
            let rep_dir = dir.join(format!("replicates/rep_{:03}", rec.index));
            std::fs::create_dir_all(&rep_dir)?;
            let mut artifacts = Vec::new();
            let sub_path = rep_dir.join("subsample.csv");
            write_tracks_csv(&sub_path, &ingested.track_ids, &out.sub)?;
            artifacts.push(Artifact::of(dir, &sub_path)?);
            for (name, report) in [
                ("fit_standard.json", &rec.standard),
                ("fit_preferential.json", &rec.preferential),
            ] {
                if let Some(report) = report {
                    let path = rep_dir.join(name);
                    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
                    artifacts.push(Artifact::of(dir, &path)?);
                }
            }
            for (name, grid) in
                [("pred_preferential.csv", &out.pref), ("pred_standard.csv", &out.std)]
            {
                let path = rep_dir.join(name);
                write_prediction_csv(&path, grid)?;
                artifacts.push(Artifact::of(dir, &path)?);
            }
            manifest
                .replicates
                .iter_mut()
                .find(|e| e.index == rec.index)
                .unwrap()
                .artifacts = artifacts;
        }

        // estimates in long format for boxplots
        let est_path = dir.join("estimates.csv");
        {
            let mut w = csv::Writer::from_path(&est_path)?;
            w.write_record(["replicate", "model", "parameter", "estimate", "std_error"])?;
            for rec in &replicates {
                for report in [&rec.standard, &rec.preferential].into_iter().flatten() {
                    for (i, name) in report.free_names.iter().enumerate() {
                        let se = report
                            .std_errors
                            .as_ref()
                            .map(|s| s[i].to_string())
                            .unwrap_or_default();
                        w.write_record(&[
                            rec.index.to_string(),
                            report.model.clone(),
                            name.clone(),
                            report.estimates[i].to_string(),
                            se,
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
        manifest.aggregates.push(Artifact::of(dir, &est_path)?);

        // prediction-difference quantile maps
        let q_path = dir.join("quantile_maps.csv");
        {
            let mut w = csv::Writer::from_path(&q_path)?;
            let mut header = vec!["x".to_string(), "y".to_string()];
            header.extend(quantile_maps.iter().map(|(q, _)| format!("q{q}")));
            w.write_record(&header)?;
            for (i, &(x, y)) in targets.iter().enumerate() {
                let mut row = vec![x.to_string(), y.to_string()];
                row.extend(quantile_maps.iter().map(|(_, v)| v[i].to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        manifest.aggregates.push(Artifact::of(dir, &q_path)?);

        if let Some((pref, std, d)) = &scores {
            let path = dir.join("scores.json");
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&serde_json::json!({
                    "preferential": pref,
                    "standard": std,
                    "diffs": d,
                }))?,
            )?;
            manifest.aggregates.push(Artifact::of(dir, &path)?);
        }
        if !ingested.warnings.is_empty() {
            let path = dir.join("warnings.txt");
            std::fs::write(&path, ingested.warnings.join("\n"))?;
            manifest.aggregates.push(Artifact::of(dir, &path)?);
        }
        manifest.write(&dir.join("manifest.json"))?;
    }

    Ok(AnalysisOutputs {
        track_ids: ingested.track_ids,
        warnings: ingested.warnings,
        replicates,
        targets,
        quantile_maps,
        alpha_positive_fraction,
        scores,
        n_failed,
        manifest,
    })
}
