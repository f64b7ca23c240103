//! Patch grid and block matching on a noisy depth map.
//!
//! `cargo run --release --example block_matching -- [row col]`

use graphdenoise::patch::{build_group, extract_patch_refs, PatchRef};
use graphdenoise::pipeline::ParamSchedule;
use graphdenoise::synthetic::depth_scene;
use graphdenoise::{add_awgn, NoiseSpec};

fn main() -> graphdenoise::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let at = match args[..] {
        [row, col] => PatchRef::new(row, col),
        _ => PatchRef::new(30, 20),
    };
    let s = ParamSchedule::for_sigma(20.0);
    let noisy = add_awgn(&depth_scene(96, 96), NoiseSpec::new(20.0, 7)?);

    let refs = extract_patch_refs(&noisy, s.patch_size, s.stride)?;
    println!(
        "{} reference patches ({}x{} patches, stride {})",
        refs.len(),
        s.patch_size,
        s.patch_size,
        s.stride
    );

    let group = build_group(&noisy, at, s.patch_size, s.window, s.k)?;
    println!(
        "group at ({}, {}): {}x{} matrix, window {}",
        at.row,
        at.col,
        group.matrix.nrows(),
        group.matrix.ncols(),
        s.window
    );
    for (m, d) in group.members.iter().zip(&group.distances) {
        println!("  ({:3}, {:3})  dist² {:10.1}", m.row, m.col, d);
    }
    Ok(())
}
