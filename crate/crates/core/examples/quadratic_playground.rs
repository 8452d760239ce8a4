//! Gradient descent against first-order and full-Hessian extragradient on
//! the ill-conditioned reference quadratic.
//!
//! `cargo run --example quadratic_playground -- [out_dir]` also writes
//! `trajectories.svg` and `trajectories.csv` when an output directory is given.

use loant::quadratic::{reference_trajectories, render_csv, render_svg, Quadratic, CONVERGENCE_TOL};

fn main() -> loant::Result<()> {
    let q = Quadratic::reference();
    let (lo, hi) = q.eigenvalues();
    println!("hessian eigenvalues {lo:.3} and {hi:.3}, condition number {:.1}", q.condition_number());

    let trajs = reference_trajectories(200)?;
    for t in &trajs {
        let converged = t
            .steps_to_converge(CONVERGENCE_TOL)
            .map_or("never".to_string(), |s| format!("after {s} steps"));
        println!(
            "{:<4} eta={:<6} gamma={:<5} f(w_200)={:.6e}  converged {converged}",
            t.method.name(),
            t.eta,
            t.gamma,
            t.f_values[t.len() - 1]
        );
    }

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("trajectories.svg"), render_svg(&q, &trajs, None)?)?;
        std::fs::write(dir.join("trajectories.csv"), render_csv(&trajs)?)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
