use prefield::field::*;
use prefield::inference::*;
use prefield::movement::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let domain = Rect::square(-150.0, 150.0).unwrap();
    let fp = FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 25.0, sigma2: 1.5 };
    let mp = MovementParams { alpha: 100.0, c: 0.0, sigma_beta: 0.1, sigma: [3.0, 3.0], beta0: -1.5 };

    // generation field: dense draw on the 51x51 grid + 2-cell apron
    let gen_mesh = Arc::new(Mesh::lattice_with_margin_cells(domain, 51, 51, 2).unwrap());
    let locs: Vec<(f64,f64)> = (0..gen_mesh.n_vertices()).map(|i| gen_mesh.vertex(i)).collect();
    let t0 = Instant::now();
    let draw = dense_gp_draw(&locs, &fp, 7).unwrap();
    println!("dense draw {} pts: {:?}", locs.len(), t0.elapsed());
    let real = FieldRealization::new(Arc::clone(&gen_mesh), draw).unwrap();

    let protocol = SimProtocol::standard(domain, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let tracks: Vec<Track> = (0..3).map(|_| simulate_track(&real, &mp, &fp, &protocol, &mut rng).unwrap()).collect();
    println!("tracks: {} obs each", tracks[0].len());

    // fitting mesh: 21x21 core + 2 phi margin
    let t0 = Instant::now();
    let fit_mesh = Arc::new(Mesh::lattice_with_margin(domain, 21, 21, 50.0).unwrap());
    let fem = Arc::new(assemble_fem(&fit_mesh).unwrap());
    println!("fit mesh {}x{} = {} vertices, fem: {:?}", fit_mesh.rows(), fit_mesh.cols(), fit_mesh.n_vertices(), t0.elapsed());
    let model = JointModel::new(Arc::clone(&fit_mesh), Arc::clone(&fem), &tracks, fit_mesh.cell_width(), 1.0).unwrap();

    let theta0 = ThetaFull { field: fp, movement: mp };
    let t0 = Instant::now();
    let lap = laplace_nll(&model, &theta0, None, &LaplaceOptions::default()).unwrap();
    println!("laplace cold: {:?} nll={:.3} iters={} conv={}", t0.elapsed(), lap.nll, lap.inner_iters, lap.converged);
    let t0 = Instant::now();
    let lap2 = laplace_nll(&model, &theta0, Some(&lap.mode), &LaplaceOptions::default()).unwrap();
    println!("laplace warm: {:?} iters={}", t0.elapsed(), lap2.inner_iters);

    // standard fit timing
    let t0 = Instant::now();
    let std_init = FieldParams { mu: 4.0, tau2: 0.1, kappa: 2, phi: 15.0, sigma2: 1.0 };
    let std_fit = fit_standard(&tracks, &std_init, &FixedMask::standard_default(), &FitOptions::default()).unwrap();
    println!("standard fit: {:?} evals={} mu={:.3} phi={:.2} s2={:.3} conv={}",
        t0.elapsed(), std_fit.outer_evals, std_fit.theta.field.mu, std_fit.theta.field.phi, std_fit.theta.field.sigma2, std_fit.converged);

    // preferential fit timing
    let init = ThetaFull {
        field: FieldParams { mu: std_fit.theta.field.mu, tau2: 0.1, kappa: 2, phi: std_fit.theta.field.phi, sigma2: std_fit.theta.field.sigma2 },
        movement: prefield::inference::fit::movement_init_from_tracks(&tracks),
    };
    let t0 = Instant::now();
    let (rep, _state) = fit_preferential(&model, &init, &FixedMask::default(), &FitOptions::default()).unwrap();
    println!("preferential fit: {:?} evals={} iters={} conv={}", t0.elapsed(), rep.outer_evals, rep.outer_iterations, rep.converged);
    println!("estimates: {:?} = {:?}", rep.free_names, rep.estimates);
    println!("true:      mu=5, phi=25, s2=1.5, alpha=100, sb=0.1, sx=sy=3");
    println!("std errors: {:?}", rep.std_errors);
}
