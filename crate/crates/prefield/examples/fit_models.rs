//! Fit the standard and the movement-aware likelihood to one simulated
//! data set and compare the estimates.
//!
//! ```bash
//! cargo run --release --example fit_models
//! ```

use std::sync::Arc;

use prefield::field::{assemble_fem, dense_gp_draw, FieldParams, FieldRealization, Mesh, Rect};
use prefield::inference::fit::movement_init_from_tracks;
use prefield::inference::{fit_preferential, fit_standard, FitOptions, FixedMask, JointModel, ThetaFull};
use prefield::movement::{simulate_track, MovementParams, SimProtocol, Track};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> prefield::Result<()> {
    // a moderate domain keeps this example around a minute
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
        FieldRealization::new(Arc::clone(&gen_mesh), dense_gp_draw(&locations, &zero_mean, 3)?)?;

    let protocol = SimProtocol { n_raw: 240, burn_in: 60, thin: 3, ..SimProtocol::standard(domain, 3) };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tracks: Vec<Track> = (0..protocol.n_tracks)
        .map(|_| simulate_track(&anomaly, &movement, &field, &protocol, &mut rng))
        .collect::<prefield::Result<_>>()?;
    println!("simulated {} tracks x {} observations", tracks.len(), tracks[0].len());

    let opts = FitOptions::default();
    let mask = FixedMask::default();

    let init_field = FieldParams { mu: 4.0, tau2: field.tau2, kappa: 2, phi: 10.0, sigma2: 1.0 };
    let std_fit = fit_standard(&tracks, &init_field, &mask, &opts)?;
    println!(
        "standard     : nll {:.2}, mu {:.3}, phi {:.2}, sigma2 {:.3}",
        std_fit.nll, std_fit.theta.field.mu, std_fit.theta.field.phi, std_fit.theta.field.sigma2
    );

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
    let (pref_fit, _laplace) = fit_preferential(&model, &init, &mask, &opts)?;
    println!(
        "preferential : nll {:.2}, converged {}, {} outer evaluations",
        pref_fit.nll, pref_fit.converged, pref_fit.outer_evals
    );
    for (i, name) in pref_fit.free_names.iter().enumerate() {
        let se = pref_fit
            .std_errors
            .as_ref()
            .map(|s| format!(" +- {:.3}", s[i]))
            .unwrap_or_default();
        println!("    {name:<10} {:>10.4}{se}", pref_fit.estimates[i]);
    }
    println!("generating values: mu 5, phi 15, sigma2 1.5, alpha 60");
    Ok(())
}
