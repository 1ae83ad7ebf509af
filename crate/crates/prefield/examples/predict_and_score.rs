//! Predict the latent field under both models on a lattice and score the
//! predictions against the simulated truth.
//!
//! ```bash
//! cargo run --release --example predict_and_score
//! ```

use std::sync::Arc;

use prefield::field::{assemble_fem, dense_gp_draw, FieldParams, FieldRealization, Mesh, Rect};
use prefield::inference::fit::movement_init_from_tracks;
use prefield::inference::{
    fit_preferential, fit_standard, FitOptions, FixedMask, JointModel, ThetaFull,
};
use prefield::movement::{simulate_track, MovementParams, SimProtocol, Track};
use prefield::predict::{krige, predict_preferential, target_lattice};
use prefield::score::{score_diffs, score_report, RmspeConvention};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> prefield::Result<()> {
    let domain = Rect::square(-60.0, 60.0)?;
    let field = FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 15.0, sigma2: 1.5 };
    let movement = MovementParams {
        alpha: 60.0,
        c: 0.0,
        sigma_beta: 0.1,
        sigma: [2.0, 2.0],
        beta0: -1.5,
    };

    let gen_mesh = Arc::new(Mesh::lattice_with_margin_cells(domain, 31, 31, 2)?);
    let locations: Vec<(f64, f64)> =
        (0..gen_mesh.n_vertices()).map(|i| gen_mesh.vertex(i)).collect();
    let mut zero_mean = field;
    zero_mean.mu = 0.0;
    let anomaly =
        FieldRealization::new(Arc::clone(&gen_mesh), dense_gp_draw(&locations, &zero_mean, 5)?)?;
    let truth_field = anomaly.with_added_mean(field.mu);

    let protocol = SimProtocol { n_raw: 240, burn_in: 60, thin: 3, ..SimProtocol::standard(domain, 5) };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let tracks: Vec<Track> = (0..protocol.n_tracks)
        .map(|_| simulate_track(&anomaly, &movement, &field, &protocol, &mut rng))
        .collect::<prefield::Result<_>>()?;

    let opts = FitOptions::default();
    let mask = FixedMask::default();
    let init_field = FieldParams { mu: 4.0, tau2: field.tau2, kappa: 2, phi: 10.0, sigma2: 1.0 };
    let std_fit = fit_standard(&tracks, &init_field, &mask, &opts)?;

    let fit_mesh = Arc::new(Mesh::lattice_with_margin(domain, 21, 21, 2.0 * field.phi)?);
    let fem = Arc::new(assemble_fem(&fit_mesh)?);
    let model = JointModel::new(
        Arc::clone(&fit_mesh),
        Arc::clone(&fem),
        &tracks,
        fit_mesh.cell_width(),
        1.0,
    )?;
    let init = ThetaFull {
        field: std_fit.theta.field,
        movement: movement_init_from_tracks(&tracks),
    };
    let (pref_fit, laplace) = fit_preferential(&model, &init, &mask, &opts)?;

    let targets = target_lattice(domain, 16, 16);
    let pref_grid = predict_preferential(&model, &pref_fit.theta, &laplace, &targets)?;
    let std_grid = krige(&std_fit.theta.field, &tracks, &targets)?;
    let truth_row: Vec<f64> = targets
        .iter()
        .map(|&(x, y)| truth_field.interpolate(x, y))
        .collect::<prefield::Result<_>>()?;

    // a single replicate still yields the full score set
    let truth = vec![truth_row];
    let pref_scores = score_report(
        &truth,
        &[pref_grid.mean.clone()],
        &[pref_grid.variance.clone()],
        RmspeConvention::Paper,
    )?;
    let std_scores = score_report(
        &truth,
        &[std_grid.mean.clone()],
        &[std_grid.variance.clone()],
        RmspeConvention::Paper,
    )?;
    let diffs = score_diffs(&pref_scores, &std_scores)?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean |error|  : preferential {:.4}  standard {:.4}", mean(&pref_scores.rmspe), mean(&std_scores.rmspe));
    println!("mean ignorance: preferential {:.4}  standard {:.4}", pref_scores.mign[0], std_scores.mign[0]);
    println!("MIGN difference (negative favours the movement-aware model): {:.4}", diffs.mign[0]);
    let better = diffs.lign.iter().filter(|&&d| d < 0.0).count();
    println!("locations with better ignorance score: {better} of {}", diffs.lign.len());
    Ok(())
}
