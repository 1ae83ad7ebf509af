//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use prefield::error::Error;
use prefield::field::{
    assemble_fem, dense_gp_draw, io as field_io, FieldRealization, Mesh, Rect,
};
use prefield::harness::manifest::{Artifact, Manifest};
use prefield::harness::{
    load_config, read_tracks_csv, run_data_analysis, run_simulation_study, write_tracks_csv,
    AnalyzeConfig, ExperimentConfig, FitConfig,
};
use prefield::inference::fit::movement_init_from_tracks;
use prefield::inference::{
    fit_preferential, fit_standard, laplace_nll, FitReport, FixedMask, JointModel, ThetaFull,
};
use prefield::movement::{simulate_track, SimProtocol, Track};
use prefield::predict::{krige, predict_preferential, target_lattice};
use prefield::score::{score_diffs, score_report, RmspeConvention};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "prefield", version, about = "Preferentially sampled spatial fields: simulation, fitting, prediction, scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "prefield-out")]
    out_dir: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU).
    #[arg(long)]
    threads: Option<usize>,
    /// Per-location error convention: paper | rmse.
    #[arg(long)]
    rmspe_convention: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a field and simulate tracks over it.
    Simulate(Common),
    /// Fit the standard and/or movement-aware model to a track file.
    Fit(Common),
    /// Predict a fitted model on a lattice.
    Predict(Common),
    /// Score prediction stacks against a truth grid.
    Score(Common),
    /// Run the full replicated simulation study.
    Experiment(Common),
    /// Run the replicated analysis of an external observation file.
    Analyze(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Fit(c) => cmd_fit(c),
        Command::Predict(c) => cmd_predict(c),
        Command::Score(c) => cmd_score(c),
        Command::Experiment(c) => cmd_experiment(c),
        Command::Analyze(c) => cmd_analyze(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Data { .. } | Error::OutsideHull { .. } | Error::Io(_) | Error::Csv(_)
        | Error::Json(_) => 3,
        Error::Mesh(_)
        | Error::Dimension(_)
        | Error::NotPositiveDefinite(_)
        | Error::NonFinite(_)
        | Error::Numerical(_) => 4,
    }
}

fn apply_overrides_experiment(c: &Common, cfg: &mut ExperimentConfig) -> prefield::Result<()> {
    if let Some(seed) = c.seed {
        cfg.seed_base = seed;
    }
    if let Some(threads) = c.threads {
        cfg.threads = threads;
    }
    if let Some(conv) = &c.rmspe_convention {
        cfg.rmspe_convention = conv.parse()?;
    }
    Ok(())
}

fn cmd_experiment(c: &Common) -> prefield::Result<()> {
    let mut cfg: ExperimentConfig = load_config(&c.config)?;
    apply_overrides_experiment(c, &mut cfg)?;
    let out = run_simulation_study(&cfg, Some(&c.out_dir))?;
    println!(
        "experiment: {} replicates ({} failed), outputs in {}",
        cfg.replicate_count,
        out.n_failed,
        c.out_dir.display()
    );
    let mean_mign_diff: f64 =
        out.diffs.mign.iter().sum::<f64>() / out.diffs.mign.len() as f64;
    println!("mean MIGN difference (preferential - standard): {mean_mign_diff:.4}");
    Ok(())
}

fn cmd_analyze(c: &Common) -> prefield::Result<()> {
    let mut cfg: AnalyzeConfig = load_config(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed_base = seed;
    }
    if let Some(threads) = c.threads {
        cfg.threads = threads;
    }
    if let Some(conv) = &c.rmspe_convention {
        cfg.rmspe_convention = conv.parse()?;
    }
    let out = run_data_analysis(&cfg, Some(&c.out_dir))?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "analysis: {} tracks, {} replicates ({} failed), alpha > 0 in {:.0}% of fits",
        out.track_ids.len(),
        cfg.replicate_count,
        out.n_failed,
        100.0 * out.alpha_positive_fraction
    );
    println!("outputs in {}", c.out_dir.display());
    Ok(())
}

fn cmd_simulate(c: &Common) -> prefield::Result<()> {
    let mut cfg: ExperimentConfig = load_config(&c.config)?;
    apply_overrides_experiment(c, &mut cfg)?;
    cfg.validate()?;
    std::fs::create_dir_all(&c.out_dir)?;

    let mesh = Arc::new(Mesh::lattice_with_margin_cells(
        cfg.domain,
        cfg.generation_grid,
        cfg.generation_grid,
        cfg.generation_apron_cells,
    )?);
    let locations: Vec<(f64, f64)> =
        (0..mesh.n_vertices()).map(|i| mesh.vertex(i)).collect();
    let mut zero_mean = cfg.field;
    zero_mean.mu = 0.0;
    let draw = dense_gp_draw(&locations, &zero_mean, cfg.seed_base)?;
    let anomaly = FieldRealization::new(Arc::clone(&mesh), draw)?;
    let field_base = c.out_dir.join("field");
    field_io::export_realization(&anomaly.with_added_mean(cfg.field.mu), &field_base)?;

    let protocol = SimProtocol {
        domain: cfg.domain,
        n_raw: cfg.protocol.n_raw,
        burn_in: cfg.protocol.burn_in,
        thin: cfg.protocol.thin,
        lambda: cfg.protocol.lambda,
        n_tracks: cfg.protocol.n_tracks,
        seed: cfg.seed_base,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_base);
    let tracks: Vec<Track> = (0..cfg.protocol.n_tracks)
        .map(|_| simulate_track(&anomaly, &cfg.movement, &cfg.field, &protocol, &mut rng))
        .collect::<prefield::Result<_>>()?;
    let ids: Vec<String> = (0..tracks.len()).map(|i| i.to_string()).collect();
    let tracks_path = c.out_dir.join("tracks.csv");
    write_tracks_csv(&tracks_path, &ids, &tracks)?;

    let mut manifest = Manifest::new("simulate", &cfg, cfg.seed_base)?;
    for name in ["field.csv", "field.mesh.json", "tracks.csv"] {
        manifest.aggregates.push(Artifact::of(&c.out_dir, &c.out_dir.join(name))?);
    }
    manifest.write(&c.out_dir.join("manifest.json"))?;
    println!(
        "simulated {} tracks of {} observations over a {} vertex field",
        tracks.len(),
        tracks[0].len(),
        mesh.n_vertices()
    );
    Ok(())
}

/// Config for the `fit` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitCliConfig {
    tracks: PathBuf,
    /// "standard", "preferential", or "both".
    #[serde(default = "default_model_both")]
    model: String,
    tau2: f64,
    #[serde(default)]
    c: f64,
    #[serde(default)]
    fixed: FixedMask,
    #[serde(default)]
    fit: FitConfig,
    /// Fitting lattice core over the track bounding box.
    #[serde(default = "default_grid")]
    fitting_grid: usize,
    #[serde(default)]
    fitting_margin: Option<f64>,
    #[serde(default)]
    gradient_step: Option<f64>,
    #[serde(default)]
    init: Option<ThetaFull>,
}

fn default_model_both() -> String {
    "both".into()
}
fn default_grid() -> usize {
    21
}

fn track_bbox(tracks: &[Track], pad: f64) -> prefield::Result<Rect> {
    let xs: Vec<f64> = tracks.iter().flat_map(|t| t.locations.iter().map(|l| l.0)).collect();
    let ys: Vec<f64> = tracks.iter().flat_map(|t| t.locations.iter().map(|l| l.1)).collect();
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
        (a.0.min(v), a.1.max(v))
    });
    let (y0, y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
        (a.0.min(v), a.1.max(v))
    });
    let span = (x1 - x0).max(y1 - y0).max(1.0);
    let pad = pad.max(1e-3 * span);
    Rect::new(x0 - pad, x1 + pad, y0 - pad, y1 + pad)
}

fn moment_init(tracks: &[Track], tau2: f64, domain: &Rect) -> prefield::field::FieldParams {
    let responses: Vec<f64> =
        tracks.iter().flat_map(|t| t.responses.iter().copied()).collect();
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    let var = responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    prefield::field::FieldParams {
        mu: mean,
        tau2,
        kappa: 2,
        phi: domain.width().max(domain.height()) / 8.0,
        sigma2: (var - tau2).max(0.05 * var),
    }
}

fn build_fit_model(
    cfg: &FitCliConfig,
    tracks: &[Track],
    phi_for_margin: f64,
) -> prefield::Result<(JointModel, f64)> {
    let core = track_bbox(tracks, 0.0)?;
    let base = Mesh::lattice(core, cfg.fitting_grid, cfg.fitting_grid)?;
    let grad_step = cfg
        .gradient_step
        .unwrap_or_else(|| base.cell_width().max(base.cell_height()));
    let margin = cfg.fitting_margin.unwrap_or(2.0 * phi_for_margin) + 2.0 * grad_step;
    let mesh = Arc::new(Mesh::lattice_with_margin(
        core,
        cfg.fitting_grid,
        cfg.fitting_grid,
        margin,
    )?);
    let fem = Arc::new(assemble_fem(&mesh)?);
    Ok((JointModel::new(mesh, fem, tracks, grad_step, cfg.fit.beta0_sd)?, grad_step))
}

fn cmd_fit(c: &Common) -> prefield::Result<()> {
    let cfg: FitCliConfig = load_config(&c.config)?;
    std::fs::create_dir_all(&c.out_dir)?;
    let (_, tracks) = read_tracks_csv(&cfg.tracks)?;
    let core = track_bbox(&tracks, 0.0)?;
    let opts = cfg.fit.fit_options();

    let mut reports: Vec<FitReport> = Vec::new();
    let std_fit = if cfg.model == "standard" || cfg.model == "both" {
        let init = match &cfg.init {
            Some(t) => t.field,
            None => moment_init(&tracks, cfg.tau2, &core),
        };
        let report = fit_standard(&tracks, &init, &cfg.fixed, &opts)?;
        std::fs::write(
            c.out_dir.join("fit_standard.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
        reports.push(report.clone());
        Some(report)
    } else {
        None
    };

    if cfg.model == "preferential" || cfg.model == "both" {
        let init = match &cfg.init {
            Some(t) => *t,
            None => {
                let field = std_fit
                    .as_ref()
                    .map(|r| r.theta.field)
                    .unwrap_or_else(|| moment_init(&tracks, cfg.tau2, &core));
                let mut movement = movement_init_from_tracks(&tracks);
                movement.c = cfg.c;
                ThetaFull { field, movement }
            }
        };
        let (model, _) = build_fit_model(&cfg, &tracks, init.field.phi)?;
        let (report, _) = fit_preferential(&model, &init, &cfg.fixed, &opts)?;
        std::fs::write(
            c.out_dir.join("fit_preferential.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Config(format!("unknown model '{}'", cfg.model)));
    }
    for r in &reports {
        println!(
            "{}: nll {:.4}, converged {}, {:?} = {:?}",
            r.model, r.nll, r.converged, r.free_names, r.estimates
        );
    }
    Ok(())
}

/// Config for the `predict` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredictCliConfig {
    tracks: PathBuf,
    /// Fit report JSON produced by `prefield fit`.
    fit_report: PathBuf,
    /// Prediction lattice over the track bounding box (or explicit rect).
    #[serde(default = "default_pred_grid")]
    prediction_grid: usize,
    #[serde(default)]
    prediction_rect: Option<Rect>,
    #[serde(default = "default_grid")]
    fitting_grid: usize,
    #[serde(default)]
    fitting_margin: Option<f64>,
    #[serde(default)]
    gradient_step: Option<f64>,
    #[serde(default)]
    fit: FitConfig,
}

fn default_pred_grid() -> usize {
    26
}

fn cmd_predict(c: &Common) -> prefield::Result<()> {
    let cfg: PredictCliConfig = load_config(&c.config)?;
    std::fs::create_dir_all(&c.out_dir)?;
    let (_, tracks) = read_tracks_csv(&cfg.tracks)?;
    let report: FitReport =
        serde_json::from_str(&std::fs::read_to_string(&cfg.fit_report)?)?;
    let rect = match cfg.prediction_rect {
        Some(r) => r,
        None => track_bbox(&tracks, 0.0)?,
    };
    let targets = target_lattice(rect, cfg.prediction_grid, cfg.prediction_grid);

    let grid = if report.model == "preferential" {
        let fitcfg = FitCliConfig {
            tracks: cfg.tracks.clone(),
            model: "preferential".into(),
            tau2: report.theta.field.tau2,
            c: report.theta.movement.c,
            fixed: report.fixed,
            fit: cfg.fit,
            fitting_grid: cfg.fitting_grid,
            fitting_margin: cfg.fitting_margin,
            gradient_step: cfg.gradient_step,
            init: None,
        };
        let (model, _) = build_fit_model(&fitcfg, &tracks, report.theta.field.phi)?;
        let laplace = laplace_nll(&model, &report.theta, None, &cfg.fit.fit_options().laplace)?;
        predict_preferential(&model, &report.theta, &laplace, &targets)?
    } else {
        krige(&report.theta.field, &tracks, &targets)?
    };
    let path = c.out_dir.join(format!("pred_{}.csv", report.model));
    prefield::harness::study::write_prediction_csv(&path, &grid)?;
    println!("wrote {} ({} targets, {} valid)", path.display(), grid.len(), grid.n_valid());
    Ok(())
}

/// Config for the `score` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScoreCliConfig {
    /// Truth grid CSV: `x,y,value`, aligned with the prediction lattices.
    truth: PathBuf,
    /// Prediction CSVs (one replicate each) for the two models.
    preferential: Vec<PathBuf>,
    standard: Vec<PathBuf>,
    #[serde(default)]
    convention: RmspeConvention,
}

fn read_prediction_csv(path: &Path) -> prefield::Result<(Vec<(f64, f64)>, Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut locs = Vec::new();
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let num = |idx: usize, name: &str| -> prefield::Result<f64> {
            row.get(idx)
                .ok_or_else(|| Error::data_at(i + 2, format!("missing {name}")))?
                .parse::<f64>()
                .map_err(|e| Error::data_at(i + 2, format!("bad {name}: {e}")))
        };
        locs.push((num(0, "x")?, num(1, "y")?));
        mean.push(num(2, "mean")?);
        var.push(num(3, "variance")?);
    }
    Ok((locs, mean, var))
}

fn cmd_score(c: &Common) -> prefield::Result<()> {
    let mut cfg: ScoreCliConfig = load_config(&c.config)?;
    if let Some(conv) = &c.rmspe_convention {
        cfg.convention = conv.parse()?;
    }
    if cfg.preferential.len() != cfg.standard.len() || cfg.preferential.is_empty() {
        return Err(Error::Config(
            "need equally many preferential and standard prediction files".into(),
        ));
    }
    std::fs::create_dir_all(&c.out_dir)?;

    let mut pref_mean = Vec::new();
    let mut pref_var = Vec::new();
    let mut std_mean = Vec::new();
    let mut std_var = Vec::new();
    let mut locations: Option<Vec<(f64, f64)>> = None;
    for (p, s) in cfg.preferential.iter().zip(&cfg.standard) {
        let (lp, mp, vp) = read_prediction_csv(p)?;
        let (ls, ms, vs) = read_prediction_csv(s)?;
        if lp != ls {
            return Err(Error::data(format!(
                "prediction lattices differ between {} and {}",
                p.display(),
                s.display()
            )));
        }
        if let Some(l) = &locations {
            if *l != lp {
                return Err(Error::data("prediction lattices differ across replicates"));
            }
        } else {
            locations = Some(lp);
        }
        pref_mean.push(mp);
        pref_var.push(vp);
        std_mean.push(ms);
        std_var.push(vs);
    }
    let locations = locations.unwrap();

    // truth grid aligned by exact location match
    let mut reader = csv::Reader::from_path(&cfg.truth)?;
    let mut truth_rows: Vec<(f64, f64, f64)> = Vec::new();
    for row in reader.records() {
        let row = row?;
        truth_rows.push((
            row.get(0).unwrap_or_default().parse().map_err(|e| Error::data(format!("{e}")))?,
            row.get(1).unwrap_or_default().parse().map_err(|e| Error::data(format!("{e}")))?,
            row.get(2).unwrap_or_default().parse().map_err(|e| Error::data(format!("{e}")))?,
        ));
    }
    let span = locations.iter().fold(1.0_f64, |a, &(x, y)| a.max(x.abs()).max(y.abs()));
    let tol = 1e-6 * span;
    let truth_row: Vec<f64> = locations
        .iter()
        .map(|&(tx, ty)| {
            truth_rows
                .iter()
                .find(|&&(x, y, _)| (x - tx).abs() <= tol && (y - ty).abs() <= tol)
                .map(|&(_, _, v)| v)
                .ok_or_else(|| Error::data(format!("no truth value at ({tx}, {ty})")))
        })
        .collect::<prefield::Result<_>>()?;
    let truth: Vec<Vec<f64>> = vec![truth_row; pref_mean.len()];

    let pref = score_report(&truth, &pref_mean, &pref_var, cfg.convention)?;
    let std = score_report(&truth, &std_mean, &std_var, cfg.convention)?;
    let diffs = score_diffs(&pref, &std)?;
    std::fs::write(
        c.out_dir.join("scores.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "preferential": pref,
            "standard": std,
            "diffs": diffs,
        }))?,
    )?;
    let mean_mign: f64 = diffs.mign.iter().sum::<f64>() / diffs.mign.len() as f64;
    println!(
        "scored {} replicates at {} locations; mean MIGN difference {:.4}",
        pref_mean.len(),
        locations.len(),
        mean_mign
    );
    Ok(())
}
