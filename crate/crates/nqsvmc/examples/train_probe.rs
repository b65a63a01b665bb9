//! Scratch probe: Δ=-2 refinement at the warm-start learning rate.

use nqsvmc::ed::ground_state;
use nqsvmc::hamiltonian::xxz;
use nqsvmc::vmc::{train, zve, OptimizerKind, ProposalChoice, TrainingConfig};

fn main() {
    let dir = std::env::temp_dir().join("nqsvmc-branch-probe");
    let src = dir.join("multiplet.json");
    assert!(src.exists());
    let h = xxz(8, 1.0, -2.0, false);
    let e_ed = ground_state(&h).unwrap().ground_energy();
    let config = TrainingConfig {
        epochs_max: 150,
        learning_rate: 0.05,
        optimizer: OptimizerKind::Sgd,
        proposal: ProposalChoice::H,
        samples_per_epoch: 10_000,
        convergence_tol: 1e-4,
        seed: 9104,
        warm_start_path: Some(src),
        ..TrainingConfig::default()
    };
    let trace = train(&h, &config).unwrap();
    let (raw_mean, sd) = trace.reported_energy(config.window);
    let zve_energy = zve(&trace, config.window)
        .map(|z| z.extrapolated_energy)
        .unwrap_or(raw_mean);
    println!(
        "Δ=-2 lr=0.05: epochs {} conv {} | raw {raw_mean:.4}±{sd:.4} zve {zve_energy:.4} | rel zve {:.3e} raw {:.3e}",
        trace.epochs.len(),
        trace.converged,
        ((zve_energy - e_ed) / e_ed).abs(),
        ((raw_mean - e_ed) / e_ed).abs(),
    );
}
