//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use graphdenoise::admm::{fast_threshold, objective, solve_group, AdmmConfig, SylvesterSolver};
use graphdenoise::graph::{learn_laplacian, GraphLaplacian, GraphLearnConfig, GraphMode};
use graphdenoise::linalg::frobenius;
use graphdenoise::patch::{build_group, PatchRef};
use graphdenoise::pipeline::{denoise_detailed, group_laplacians, ParamSchedule};
use graphdenoise::synthetic::{depth_scene, four_regions};
use graphdenoise::{add_awgn, psnr, save_image, Matrix, NoiseSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (elapsed <= limit, format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn noise_fidelity() -> Outcome {
    let clean = depth_scene(256, 256);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, sigma) in [15.0, 20.0, 25.0, 30.0].into_iter().enumerate() {
        let noisy = add_awgn(&clean, NoiseSpec::new(sigma, 100 + i as u64).unwrap());
        let measured = psnr(&clean, &noisy, 255.0).unwrap();
        let expected = 20.0 * (255.0 / sigma).log10();
        worst = worst.max((measured - expected).abs());
        parts.push(format!("σ{sigma}: {measured:.2}/{expected:.2}"));
    }
    outcome(worst <= 0.15, format!("{} (max deviation {worst:.3} dB)", parts.join(", ")))
}

fn threshold_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut soft_err: f64 = 0.0;
    let mut odd_ok = true;
    let mut shrink_ok = true;
    let mut lipschitz_ok = true;
    for _ in 0..100_000 {
        let x: f64 = rng.random_range(-50.0..50.0);
        let y: f64 = rng.random_range(-50.0..50.0);
        let lambda: f64 = rng.random_range(0.0..20.0);
        let v: f64 = rng.random_range(0.01..=1.0);
        let soft = x.signum() * (x.abs() - lambda).max(0.0);
        soft_err = soft_err.max((fast_threshold(x, lambda, 1.0) - soft).abs());
        let g = fast_threshold(x, lambda, v);
        odd_ok &= fast_threshold(-x, lambda, v) == -g;
        shrink_ok &= g.abs() <= x.abs();
        // soft thresholding is 1-Lipschitz as well
        lipschitz_ok &=
            (fast_threshold(x, lambda, 1.0) - fast_threshold(y, lambda, 1.0)).abs() <= (x - y).abs() + 1e-12;
    }
    // hard-threshold limit over the operating range of λ = θn/p
    let mut limit_err: f64 = 0.0;
    for _ in 0..100_000 {
        let lambda: f64 = rng.random_range(2.0..200.0);
        let x = lambda * rng.random_range(10.0..1000.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        limit_err = limit_err.max(((fast_threshold(x, lambda, 0.01) - x) / x).abs());
    }
    let pass = soft_err <= f64::EPSILON * 64.0 && odd_ok && shrink_ok && lipschitz_ok && limit_err < 0.01;
    outcome(
        pass,
        format!(
            "soft max err {soft_err:.1e}, odd {odd_ok}, |Γ(x)| ≤ |x| {shrink_ok}, 1-Lipschitz at v=1 {lipschitz_ok}, v=0.01 max rel err {limit_err:.2e}"
        ),
    )
}

// ---- independent QP oracle for the Laplacian learning problem ----

fn laplacian_of(n: usize, w: &[f64]) -> Matrix {
    let mut l = Array2::zeros((n, n));
    let mut e = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            l[[i, j]] = -w[e];
            l[[j, i]] = -w[e];
            l[[i, i]] += w[e];
            l[[j, j]] += w[e];
            e += 1;
        }
    }
    l
}

/// α·tr(XᵀLX) + β·‖L‖², nodes are rows of `x`, all by explicit loops.
fn oracle_objective(x: &Matrix, l: &Matrix, alpha: f64, beta: f64) -> f64 {
    let n = l.nrows();
    let mut smooth = 0.0;
    for k in 0..x.ncols() {
        for i in 0..n {
            for j in 0..n {
                smooth += x[[i, k]] * l[[i, j]] * x[[j, k]];
            }
        }
    }
    let frob: f64 = l.iter().map(|v| v * v).sum();
    alpha * smooth + beta * frob
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Global minimum over the feasible Laplacians with trace `n`, by
/// enumerating every support of the edge weights and solving its
/// equality-constrained KKT system. The quadratic's coefficients are read
/// off `oracle_objective` by polarization.
fn oracle_minimum(x: &Matrix, alpha: f64, beta: f64) -> f64 {
    let n = x.nrows();
    let ne = n * (n - 1) / 2;
    let f = |w: &[f64]| oracle_objective(x, &laplacian_of(n, w), alpha, beta);
    let unit = |i: usize, s: f64| {
        let mut w = vec![0.0; ne];
        w[i] = s;
        w
    };
    let mut h = vec![vec![0.0; ne]; ne];
    let mut g = vec![0.0; ne];
    for i in 0..ne {
        let (f1, f2) = (f(&unit(i, 1.0)), f(&unit(i, 2.0)));
        h[i][i] = f2 - 2.0 * f1;
        g[i] = f1 - 0.5 * h[i][i];
    }
    for i in 0..ne {
        for j in (i + 1)..ne {
            let mut w = unit(i, 1.0);
            w[j] = 1.0;
            h[i][j] = f(&w) - g[i] - g[j] - 0.5 * (h[i][i] + h[j][j]);
            h[j][i] = h[i][j];
        }
    }
    let total = n as f64 / 2.0;
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << ne) {
        let s: Vec<usize> = (0..ne).filter(|&e| mask & (1 << e) != 0).collect();
        let m = s.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[r][c] = h[i][j];
            }
            a[r][m] = 1.0;
            a[m][r] = 1.0;
            b[r] = -g[i];
        }
        b[m] = total;
        let Some(sol) = solve_dense(a, b) else { continue };
        if sol[..m].iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; ne];
        for (r, &i) in s.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        best = best.min(f(&w));
    }
    best
}

fn feasible(l: &GraphLaplacian) -> bool {
    let m = l.matrix();
    let n = l.size();
    let symmetric = (0..n).all(|i| (0..n).all(|j| m[[i, j]] == m[[j, i]]));
    let off_diag = (0..n).all(|i| (0..n).all(|j| i == j || m[[i, j]] <= 1e-9));
    let rows = m.rows().into_iter().all(|r| r.sum().abs() <= 1e-9 * n as f64);
    let trace = (l.trace() - n as f64).abs() <= 1e-6;
    symmetric && off_diag && rows && trace
}

fn laplacian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = GraphLearnConfig::default();
    let mut worst: f64 = 0.0;
    let mut all_feasible = true;
    for trial in 0..20 {
        let n = 2 + trial % 3;
        let cols = rng.random_range(2..8);
        let scale: f64 = [0.05, 0.3, 1.0, 3.0][trial % 4];
        let x = Array2::from_shape_fn((n, cols), |_| rng.random_range(0.0..1.0) * scale);
        let mode = if trial % 2 == 0 { GraphMode::Row } else { GraphMode::Column };
        // column mode sees the transpose, so the oracle always works on node rows
        let data = match mode {
            GraphMode::Row => x.clone(),
            GraphMode::Column => x.t().to_owned(),
        };
        let learned = learn_laplacian(&data, mode, &cfg).unwrap();
        all_feasible &= feasible(&learned.laplacian);
        let got = oracle_objective(&x, learned.laplacian.matrix(), cfg.alpha, cfg.beta);
        let want = oracle_minimum(&x, cfg.alpha, cfg.beta);
        worst = worst.max((got - want).abs() / want.abs().max(1e-12));
    }
    outcome(
        worst <= 1e-4 && all_feasible,
        format!("max relative objective gap {worst:.2e}, constraints hold: {all_feasible}"),
    )
}

fn random_learned_laplacian(rng: &mut ChaCha8Rng, n: usize) -> GraphLaplacian {
    let data = Array2::from_shape_fn((n, 6), |_| rng.random_range(0.0..1.0));
    learn_laplacian(&data, GraphMode::Row, &GraphLearnConfig::default()).unwrap().laplacian
}

fn sylvester_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let lr = random_learned_laplacian(&mut rng, 16);
        let lc = random_learned_laplacian(&mut rng, 25);
        let cfg = AdmmConfig::with_weights(
            rng.random_range(0.1..3.0),
            rng.random_range(0.0..6.0),
            rng.random_range(0.0..3.0),
        );
        let mut m = || Array2::from_shape_fn((16, 25), |_| rng.random_range(-100.0..300.0));
        let (t, x, y) = (m(), m(), m());
        let z = SylvesterSolver::new(&lr, &lc, &cfg).unwrap().z_update(&t, &x, &y).unwrap();
        // (2θr·Lr + (1 + p)·I)·Z + 2θc·Z·Lc = T + p·(X + Y), written out directly
        let lhs = lr.matrix().dot(&z) * (2.0 * cfg.theta_r)
            + z.dot(lc.matrix()) * (2.0 * cfg.theta_c)
            + &z * (1.0 + cfg.p);
        let rhs = &t + &((&x + &y) * cfg.p);
        worst = worst.max(frobenius(&(&lhs - &rhs)) / frobenius(&rhs));
    }
    outcome(worst <= 1e-8, format!("max relative residual {worst:.2e} over 100 instances"))
}

fn admm_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scenes = [four_regions(64, 64), depth_scene(64, 64)];
    let (mut converged, mut decreased) = (0, 0);
    let trials = 200;
    for trial in 0..trials {
        let sigma = [15.0, 20.0, 25.0, 30.0][trial % 4];
        let schedule = ParamSchedule::for_sigma(sigma);
        let clean = &scenes[trial % 2];
        let noisy = add_awgn(clean, NoiseSpec::new(sigma, 1000 + trial as u64).unwrap());
        let last = 64 - schedule.patch_size;
        let at = PatchRef::new(rng.random_range(0..=last), rng.random_range(0..=last));
        let group = build_group(&noisy, at, schedule.patch_size, schedule.window, schedule.k).unwrap();
        let (lr, lc, _) = group_laplacians(&group.matrix, &schedule).unwrap();
        let cfg = schedule.admm();
        let (z, state) = solve_group(&group.matrix, &lr, &lc, &cfg).unwrap();
        converged += usize::from(state.converged && state.iter <= schedule.n2);
        let before = objective(&group.matrix, &group.matrix, &lr, &lc, &cfg).unwrap();
        let after = objective(&z, &group.matrix, &lr, &lc, &cfg).unwrap();
        decreased += usize::from(after <= before);
    }
    outcome(
        converged * 100 >= trials * 95 && decreased == trials,
        format!("converged {converged}/{trials}, objective not increased {decreased}/{trials}"),
    )
}

struct EndToEnd {
    noisy: f64,
    blind: f64,
    oracle: f64,
    trace: Vec<f64>,
    elapsed: Duration,
}

fn run_end_to_end() -> EndToEnd {
    let started = Instant::now();
    let clean = four_regions(64, 64);
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 20).unwrap());
    let schedule = ParamSchedule::for_sigma(20.0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let out = pool
        .install(|| denoise_detailed(&noisy, &schedule, Some(&clean), false))
        .unwrap();
    let blind = out.iterates.last().unwrap().quantized();
    EndToEnd {
        noisy: psnr(&clean, &noisy.quantized(), 255.0).unwrap(),
        blind: psnr(&clean, &blind, 255.0).unwrap(),
        oracle: psnr(&clean, &out.image.quantized(), 255.0).unwrap(),
        trace: out.report.iterations.iter().map(|it| it.psnr.unwrap()).collect(),
        elapsed: started.elapsed(),
    }
}

fn end_to_end(run: &EndToEnd) -> Outcome {
    let (fast, time) = within(Duration::from_secs(300), run.elapsed);
    let gain = run.blind - run.noisy;
    outcome(
        gain >= 5.0 && run.oracle >= run.blind && fast,
        format!(
            "noisy {:.2} dB, blind {:.2} dB (+{gain:.2}), oracle {:.2} dB, {time}",
            run.noisy, run.blind, run.oracle
        ),
    )
}

fn outer_stability(run: &EndToEnd) -> Outcome {
    let t = &run.trace;
    let rising = t.len() >= 3 && t[0] <= t[1] && t[1] <= t[2];
    let tail = &t[2.min(t.len())..];
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let trace: Vec<String> = t.iter().map(|p| format!("{p:.2}")).collect();
    outcome(
        rising && spread < 0.5,
        format!("trace [{}], spread from pass 3 on {spread:.2} dB", trace.join(", ")),
    )
}

/// CSV bytes plus every written image as (file name, bytes).
type BenchOutput = (Vec<u8>, Vec<(String, Vec<u8>)>);

fn bench_run(bin: &Path, inputs: &[&Path], dir: &Path, threads: usize) -> Result<BenchOutput, String> {
    let images = dir.join("images");
    let csv = dir.join("bench.csv");
    let mut cmd = Command::new(bin);
    cmd.arg("bench");
    for i in inputs {
        cmd.arg("--in").arg(i);
    }
    let status = cmd
        .args(["--sigma", "15,30", "--seed", "77", "--threads", &threads.to_string()])
        .arg("--out")
        .arg(&csv)
        .arg("--image-dir")
        .arg(&images)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&images)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok((std::fs::read(&csv).map_err(|e| e.to_string())?, files))
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let bin = Path::new(env!("CARGO_BIN_EXE_graphdenoise"));
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("quadrants.pgm");
    let b = root.path().join("scene.png");
    save_image(&four_regions(40, 40), &a).unwrap();
    save_image(&depth_scene(48, 40), &b).unwrap();
    let inputs = [a.as_path(), b.as_path()];
    let runs: Result<Vec<_>, String> = [(1, "r1"), (1, "r2"), (3, "r3")]
        .iter()
        .map(|(threads, name)| bench_run(bin, &inputs, &root.path().join(name), *threads))
        .collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("bench failed: {e}")),
    };
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let rows = String::from_utf8_lossy(&runs[0].0).lines().count() - 1;
    let (fast, time) = within(Duration::from_secs(600), started.elapsed());
    outcome(
        identical && rows == 4 && runs[0].1.len() == 8 && fast,
        format!(
            "3 runs (1, 1 and 3 threads): {rows} CSV rows, {} images, byte-identical {identical}, {time}",
            runs[0].1.len()
        ),
    )
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let started = Instant::now();
    let mut o = f();
    let (fast, time) = within(limit, started.elapsed());
    o.pass &= fast;
    o.detail = format!("{}; {time}", o.detail);
    o
}

fn main() {
    let e2e = run_end_to_end();
    let results = [
        ("1 noise injection fidelity", timed(Duration::from_secs(1), noise_fidelity)),
        ("2 threshold operator", timed(Duration::from_secs(1), threshold_suite)),
        ("3 Laplacian learning vs QP oracle", timed(Duration::from_secs(10), laplacian_oracle)),
        ("4 Sylvester residual", timed(Duration::from_secs(5), sylvester_residual)),
        ("5 ADMM convergence", timed(Duration::from_secs(60), admm_convergence)),
        ("6 end-to-end denoising", end_to_end(&e2e)),
        ("7 outer-iteration stability", outer_stability(&e2e)),
        ("8 bench determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
