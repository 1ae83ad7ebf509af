//! Run a small replicated simulation study end to end and summarize the
//! estimate and score comparisons.
//!
//! ```bash
//! cargo run --release --example run_experiment
//! ```

use prefield::field::{FieldParams, Rect};
use prefield::harness::{run_simulation_study, ExperimentConfig, ProtocolConfig};
use prefield::movement::MovementParams;

fn main() -> prefield::Result<()> {
    let config = ExperimentConfig {
        domain: Rect::square(-60.0, 60.0)?,
        field: FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 15.0, sigma2: 1.5 },
        movement: MovementParams {
            alpha: 60.0,
            c: 0.0,
            sigma_beta: 0.1,
            sigma: [2.0, 2.0],
            beta0: -1.5,
        },
        protocol: ProtocolConfig { n_raw: 240, burn_in: 60, thin: 3, lambda: 10.0, n_tracks: 2 },
        generation_grid: 31,
        fitting_grid: 15,
        prediction_grid: 12,
        replicate_count: 4,
        seed_base: 2024,
        ..ExperimentConfig::default()
    };

    let out_dir = std::env::temp_dir().join("prefield_experiment");
    let outputs = run_simulation_study(&config, Some(&out_dir))?;

    println!("replicates: {} ok, {} failed", outputs.truth.len(), outputs.n_failed);
    let pull = |model: &str, name: &str| -> Vec<f64> {
        outputs
            .records
            .iter()
            .filter_map(|r| {
                let rep = if model == "standard" { &r.standard } else { &r.preferential };
                rep.as_ref().and_then(|rep| {
                    rep.free_names.iter().position(|n| n == name).map(|i| rep.estimates[i])
                })
            })
            .collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for name in ["mu", "phi", "sigma2"] {
        println!(
            "{name:<7} standard {:>8.3}   preferential {:>8.3}   (generating {})",
            mean(&pull("standard", name)),
            mean(&pull("preferential", name)),
            match name {
                "mu" => 5.0,
                "phi" => 15.0,
                _ => 1.5,
            }
        );
    }
    let neg = outputs.diffs.mign.iter().filter(|&&d| d < 0.0).count();
    println!(
        "MIGN difference negative in {neg} of {} replicates; mean LIGN difference {:.4}",
        outputs.diffs.mign.len(),
        outputs.diffs.lign.iter().sum::<f64>() / outputs.diffs.lign.len() as f64
    );
    println!("artifacts under {}", out_dir.display());
    Ok(())
}
