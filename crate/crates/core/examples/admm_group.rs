//! Solves one noisy group with ADMM and prints the residual trace.
//!
//! `cargo run --release --example admm_group`

use graphdenoise::admm::{objective, solve_group_traced};
use graphdenoise::linalg::frobenius;
use graphdenoise::patch::{build_group, patch_vector, PatchRef};
use graphdenoise::pipeline::{group_laplacians, ParamSchedule};
use graphdenoise::synthetic::depth_scene;
use graphdenoise::{add_awgn, NoiseSpec};

fn main() -> graphdenoise::Result<()> {
    let s = ParamSchedule::for_sigma(20.0);
    let clean = depth_scene(96, 96);
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 11)?);
    let at = PatchRef::new(12, 60);
    let group = build_group(&noisy, at, s.patch_size, s.window, s.k)?;
    // same members, clean values
    let mut truth_matrix = group.matrix.clone();
    for (i, p) in group.members.iter().enumerate() {
        let v = patch_vector(&clean, *p, s.patch_size);
        truth_matrix.row_mut(i).assign(&ndarray::Array1::from(v));
    }

    let (lr, lc, _) = group_laplacians(&group.matrix, &s)?;
    let cfg = s.admm();
    let (z, state) = solve_group_traced(&group.matrix, &lr, &lc, &cfg)?;

    println!("iter  r_norm     s_norm     objective");
    for row in &state.trace {
        println!("{:4}  {:.3e}  {:.3e}  {:.2}", row.iteration, row.r_norm, row.s_norm, row.objective);
    }
    println!(
        "converged: {} after {} iterations; objective {:.2} -> {:.2}",
        state.converged,
        state.iter,
        objective(&group.matrix, &group.matrix, &lr, &lc, &cfg)?,
        objective(&z, &group.matrix, &lr, &lc, &cfg)?
    );
    println!(
        "distance to clean group: noisy {:.1}, solved {:.1}",
        frobenius(&(&group.matrix - &truth_matrix)),
        frobenius(&(&z - &truth_matrix))
    );
    Ok(())
}
