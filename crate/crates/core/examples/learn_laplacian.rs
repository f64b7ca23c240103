//! Learns row and column Laplacians for one group and compares them with a
//! Gaussian-kernel graph.
//!
//! `cargo run --release --example learn_laplacian -- [out_dir]`

use std::path::PathBuf;

use graphdenoise::graph::{kernel_laplacian, learn_laplacian, smoothness, GraphMode};
use graphdenoise::patch::{build_group, PatchRef};
use graphdenoise::pipeline::ParamSchedule;
use graphdenoise::synthetic::depth_scene;
use graphdenoise::{add_awgn, save_image, NoiseSpec};

fn main() -> graphdenoise::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;
    let s = ParamSchedule::for_sigma(20.0);
    let noisy = add_awgn(&depth_scene(96, 96), NoiseSpec::new(20.0, 3)?);
    let group = build_group(&noisy, PatchRef::new(40, 50), s.patch_size, s.window, s.k)?;
    let data = &group.matrix / s.graph_scale;

    for mode in [GraphMode::Row, GraphMode::Column] {
        let learned = learn_laplacian(&data, mode, &s.graph_learning())?;
        let l = &learned.laplacian;
        l.validate(true)?;
        let kernel = kernel_laplacian(&data, mode, 1.0, 10.0)?;
        println!(
            "{mode:?}: {} nodes, {} iterations (converged: {}), objective {:.5} -> {:.5}",
            l.size(),
            learned.iterations,
            learned.converged,
            learned.history[0],
            learned.objective
        );
        println!(
            "  trace {:.6}, min eigenvalue {:.2e}, smoothness learned {:.4} / kernel {:.4}",
            l.trace(),
            l.min_eigenvalue()?,
            smoothness(&data, l, mode)?,
            smoothness(&data, &kernel, mode)?
        );
        let name = format!("{mode:?}").to_lowercase();
        l.write_csv(out.join(format!("{name}_laplacian.csv")))?;
        save_image(&l.magnitude_image(8), out.join(format!("{name}_laplacian.png")))?;
    }
    Ok(())
}
