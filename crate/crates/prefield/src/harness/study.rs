//! The replicated simulation study: generate, fit both models, predict,
//! and score, with deterministic per-replicate seeding.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{assemble_fem, dense_gp::DenseGp, FieldParams, FieldRealization, Mesh};
use crate::harness::config::ExperimentConfig;
use crate::harness::manifest::{Artifact, Manifest, ReplicateEntry};
use crate::inference::fit::movement_init_from_tracks;
use crate::inference::{
    fit_preferential, fit_standard, FitReport, JointModel, ThetaFull,
};
use crate::movement::{simulate_track, SimProtocol, Track};
use crate::predict::{krige, predict_preferential, target_lattice, PredictionGrid};
use crate::score::{score_diffs, score_report, ScoreDiffs, ScoreReport};

/// Per-replicate summary kept in the study report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub status: String,
    pub standard: Option<FitReport>,
    pub preferential: Option<FitReport>,
}

/// Everything a finished study produces (also written to disk when an
/// output directory is given).
#[derive(Debug, Clone)]
pub struct StudyOutputs {
    pub records: Vec<ReplicateRecord>,
    pub targets: Vec<(f64, f64)>,
    pub truth: Vec<Vec<f64>>,
    pub pref_mean: Vec<Vec<f64>>,
    pub pref_var: Vec<Vec<f64>>,
    pub std_mean: Vec<Vec<f64>>,
    pub std_var: Vec<Vec<f64>>,
    pub pref_scores: ScoreReport,
    pub std_scores: ScoreReport,
    pub diffs: ScoreDiffs,
    pub n_failed: usize,
    pub manifest: Manifest,
}

struct ReplicateOutput {
    record: ReplicateRecord,
    tracks: Vec<Track>,
    truth_row: Vec<f64>,
    pref: PredictionGrid,
    std: PredictionGrid,
}

struct StudyContext {
    config: ExperimentConfig,
    gen_mesh: Arc<Mesh>,
    gen_gp: DenseGp,
    fit_mesh: Arc<Mesh>,
    fem: Arc<crate::field::FemMatrices>,
    targets: Vec<(f64, f64)>,
    protocol: SimProtocol,
}

fn moment_init(tracks: &[Track], config: &ExperimentConfig) -> FieldParams {
    let responses: Vec<f64> =
        tracks.iter().flat_map(|t| t.responses.iter().copied()).collect();
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    let var = responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    FieldParams {
        mu: mean,
        tau2: config.field.tau2,
        kappa: 2,
        phi: config.domain.width() / 8.0,
        sigma2: (var - config.field.tau2).max(0.05 * var),
    }
}

fn run_replicate(ctx: &StudyContext, index: usize) -> Result<ReplicateOutput> {
    let config = &ctx.config;
    let seed = config.seed_base + index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // latent field and tracks
    let anomaly = FieldRealization::new(
        Arc::clone(&ctx.gen_mesh),
        ctx.gen_gp.draw(&mut rng),
    )?;
    let tracks: Vec<Track> = (0..config.protocol.n_tracks)
        .map(|_| simulate_track(&anomaly, &config.movement, &config.field, &ctx.protocol, &mut rng))
        .collect::<Result<_>>()?;

    // standard fit from moment initials
    let fit_opts = config.fit.fit_options();
    let std_init = moment_init(&tracks, config);
    let std_fit = fit_standard(&tracks, &std_init, &config.fixed, &fit_opts)?;

    // movement-aware fit seeded by the standard fit
    let grad_step = config.gradient_step.unwrap_or(ctx.fit_mesh.cell_width());
    let model = JointModel::new(
        Arc::clone(&ctx.fit_mesh),
        Arc::clone(&ctx.fem),
        &tracks,
        grad_step,
        config.fit.beta0_sd,
    )?;
    let pref_init = match &config.init {
        Some(theta) => *theta,
        None => {
            let mut movement = movement_init_from_tracks(&tracks);
            movement.c = config.movement.c;
            movement.beta0 = config.movement.beta0;
            movement.sigma_beta = config.movement.sigma_beta.max(1e-3);
            ThetaFull { field: std_fit.theta.field, movement }
        }
    };
    let (pref_fit, laplace) = fit_preferential(&model, &pref_init, &config.fixed, &fit_opts)?;

    // predictions and truth on the target lattice
    let pref_grid = predict_preferential(&model, &pref_fit.theta, &laplace, &ctx.targets)?;
    let std_grid = krige(&std_fit.theta.field, &tracks, &ctx.targets)?;
    let with_mean = anomaly.with_added_mean(config.field.mu);
    let truth_row: Vec<f64> = ctx
        .targets
        .iter()
        .map(|&(x, y)| with_mean.interpolate(x, y))
        .collect::<Result<_>>()?;

    Ok(ReplicateOutput {
        record: ReplicateRecord {
            index,
            seed,
            status: "ok".into(),
            standard: Some(strip_wall_time(std_fit)),
            preferential: Some(strip_wall_time(pref_fit)),
        },
        tracks,
        truth_row,
        pref: pref_grid,
        std: std_grid,
    })
}

/// Wall-clock timings vary run to run; study artifacts must be
/// byte-identical, so reports are stored without them.
fn strip_wall_time(mut report: FitReport) -> FitReport {
    report.wall_time_ms = None;
    report
}

/// Runs the full study. Replicate failures are recorded and skipped; the
/// study itself fails only when more than 20% of replicates do.
pub fn run_simulation_study(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<StudyOutputs> {
    config.validate()?;
    let gen_mesh = Arc::new(Mesh::lattice_with_margin_cells(
        config.domain,
        config.generation_grid,
        config.generation_grid,
        config.generation_apron_cells,
    )?);
    let gen_locations: Vec<(f64, f64)> =
        (0..gen_mesh.n_vertices()).map(|i| gen_mesh.vertex(i)).collect();
    let mut zero_mean = config.field;
    zero_mean.mu = 0.0;
    let gen_gp = DenseGp::new(&gen_locations, &zero_mean)?;

    let fit_mesh = Arc::new(Mesh::lattice_with_margin(
        config.domain,
        config.fitting_grid,
        config.fitting_grid,
        config.fitting_margin_value(),
    )?);
    let fem = Arc::new(assemble_fem(&fit_mesh)?);
    let targets = target_lattice(config.domain, config.prediction_grid, config.prediction_grid);
    let protocol = SimProtocol {
        domain: config.domain,
        n_raw: config.protocol.n_raw,
        burn_in: config.protocol.burn_in,
        thin: config.protocol.thin,
        lambda: config.protocol.lambda,
        n_tracks: config.protocol.n_tracks,
        seed: config.seed_base,
    };
    protocol.validate()?;
    let ctx = StudyContext {
        config: config.clone(),
        gen_mesh,
        gen_gp,
        fit_mesh,
        fem,
        targets,
        protocol,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<ReplicateOutput, String>> = pool.install(|| {
        (0..config.replicate_count)
            .into_par_iter()
            .map(|r| run_replicate(&ctx, r).map_err(|e| e.to_string()))
            .collect()
    });

    // deterministic sequential aggregation in replicate order
    let mut records = Vec::with_capacity(config.replicate_count);
    let mut truth = Vec::new();
    let mut pref_mean = Vec::new();
    let mut pref_var = Vec::new();
    let mut std_mean = Vec::new();
    let mut std_var = Vec::new();
    let mut outputs_ok: Vec<&ReplicateOutput> = Vec::new();
    let mut n_failed = 0;
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok(out) => {
                records.push(out.record.clone());
                truth.push(out.truth_row.clone());
                pref_mean.push(out.pref.mean.clone());
                pref_var.push(out.pref.variance.clone());
                std_mean.push(out.std.mean.clone());
                std_var.push(out.std.variance.clone());
                outputs_ok.push(out);
            }
            Err(msg) => {
                n_failed += 1;
                records.push(ReplicateRecord {
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
            "{n_failed} of {} replicates failed (over the 20% budget)",
            config.replicate_count
        )));
    }
    if truth.is_empty() {
        return Err(Error::Numerical("every replicate failed".into()));
    }

    let convention = config.rmspe_convention;
    let pref_scores = score_report(&truth, &pref_mean, &pref_var, convention)?;
    let std_scores = score_report(&truth, &std_mean, &std_var, convention)?;
    let diffs = score_diffs(&pref_scores, &std_scores)?;

    let mut manifest = Manifest::new("simulation-study", config, config.seed_base)?;
    for record in &records {
        manifest.replicates.push(ReplicateEntry {
            index: record.index,
            seed: record.seed,
            status: record.status.clone(),
            artifacts: Vec::new(),
        });
    }

    if let Some(dir) = out_dir {
        write_study_artifacts(
            dir,
            &ctx,
            &records,
            &outputs_ok,
            &truth,
            &pref_scores,
            &std_scores,
            &diffs,
            &mut manifest,
        )?;
    }

    Ok(StudyOutputs {
        records,
        targets: ctx.targets,
        truth,
        pref_mean,
        pref_var,
        std_mean,
        std_var,
        pref_scores,
        std_scores,
        diffs,
        n_failed,
        manifest,
    })
}

pub fn write_prediction_csv(path: &Path, grid: &PredictionGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "mean", "variance", "model_tag"])?;
    for i in 0..grid.len() {
        w.write_record(&[
            grid.locations[i].0.to_string(),
            grid.locations[i].1.to_string(),
            grid.mean[i].to_string(),
            grid.variance[i].to_string(),
            grid.model_tag.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_study_artifacts(
    dir: &Path,
    ctx: &StudyContext,
    records: &[ReplicateRecord],
    outputs: &[&ReplicateOutput],
    truth: &[Vec<f64>],
    pref_scores: &ScoreReport,
    std_scores: &ScoreReport,
    diffs: &ScoreDiffs,
    manifest: &mut Manifest,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut ok_iter = outputs.iter();
    for record in records {
        if !record.status.starts_with("ok") {
            continue;
        }
        let out = ok_iter.next().expect("one output per ok record");
        let rep_dir = dir.join(format!("replicates/rep_{:03}", record.index));
        std::fs::create_dir_all(&rep_dir)?;
        let mut artifacts = Vec::new();

        let tracks_path = rep_dir.join("tracks.csv");
        let ids: Vec<String> = (0..out.tracks.len()).map(|i| i.to_string()).collect();
        crate::harness::ingest::write_tracks_csv(&tracks_path, &ids, &out.tracks)?;
        artifacts.push(Artifact::of(dir, &tracks_path)?);

        for (name, report) in [
            ("fit_standard.json", record.standard.as_ref()),
            ("fit_preferential.json", record.preferential.as_ref()),
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

        let truth_path = rep_dir.join("truth.csv");
        let mut w = csv::Writer::from_path(&truth_path)?;
        w.write_record(["x", "y", "value"])?;
        for (i, &(x, y)) in ctx.targets.iter().enumerate() {
            w.write_record(&[x.to_string(), y.to_string(), out.truth_row[i].to_string()])?;
        }
        w.flush()?;
        artifacts.push(Artifact::of(dir, &truth_path)?);

        manifest
            .replicates
            .iter_mut()
            .find(|e| e.index == record.index)
            .expect("entry exists")
            .artifacts = artifacts;
    }
    debug_assert!(truth.len() == outputs.len());

    // aggregate tables
    let est_path = dir.join("estimates.csv");
    {
        let mut w = csv::Writer::from_path(&est_path)?;
        w.write_record(["replicate", "model", "parameter", "estimate", "std_error"])?;
        for record in records {
            for report in [&record.standard, &record.preferential].into_iter().flatten() {
                for (i, name) in report.free_names.iter().enumerate() {
                    let se = report
                        .std_errors
                        .as_ref()
                        .map(|s| s[i].to_string())
                        .unwrap_or_default();
                    w.write_record(&[
                        record.index.to_string(),
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

    let scores_json = dir.join("scores.json");
    std::fs::write(
        &scores_json,
        serde_json::to_string_pretty(&serde_json::json!({
            "preferential": pref_scores,
            "standard": std_scores,
            "diffs": diffs,
        }))?,
    )?;
    manifest.aggregates.push(Artifact::of(dir, &scores_json)?);

    let loc_path = dir.join("scores_by_location.csv");
    {
        let mut w = csv::Writer::from_path(&loc_path)?;
        w.write_record([
            "x",
            "y",
            "rmspe_pref",
            "rmspe_std",
            "rmspe_diff",
            "lign_pref",
            "lign_std",
            "lign_diff",
        ])?;
        for (i, &(x, y)) in ctx.targets.iter().enumerate() {
            w.write_record(&[
                x.to_string(),
                y.to_string(),
                pref_scores.rmspe[i].to_string(),
                std_scores.rmspe[i].to_string(),
                diffs.rmspe[i].to_string(),
                pref_scores.lign[i].to_string(),
                std_scores.lign[i].to_string(),
                diffs.lign[i].to_string(),
            ])?;
        }
        w.flush()?;
    }
    manifest.aggregates.push(Artifact::of(dir, &loc_path)?);

    let mign_path = dir.join("scores_by_replicate.csv");
    {
        let mut w = csv::Writer::from_path(&mign_path)?;
        w.write_record(["replicate", "mign_pref", "mign_std", "mign_diff"])?;
        let ok_indices: Vec<usize> = records
            .iter()
            .filter(|r| r.status.starts_with("ok"))
            .map(|r| r.index)
            .collect();
        for (j, &rep) in ok_indices.iter().enumerate() {
            w.write_record(&[
                rep.to_string(),
                pref_scores.mign[j].to_string(),
                std_scores.mign[j].to_string(),
                diffs.mign[j].to_string(),
            ])?;
        }
        w.flush()?;
    }
    manifest.aggregates.push(Artifact::of(dir, &mign_path)?);

    manifest.write(&dir.join("manifest.json"))?;
    Ok(())
}
