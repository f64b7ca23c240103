//! Command-line driver.
//!
//! Three subcommands: `denoise` (one image), `bench` (noise sweep over clean
//! images, CSV table) and `inspect-laplacian` (dump the learned row/column
//! Laplacians of one group). Schedule values come from, in increasing order of
//! precedence: the σ-dependent defaults, a `--config` file, `--set` flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::graph::{kernel_laplacian, learn_laplacian, GraphLaplacian, GraphMode};
use crate::image_io::{add_awgn, load_image, save_image, Image, NoiseSpec};
use crate::metrics::{psnr, ssim};
use crate::patch::{build_group, PatchRef};
use crate::pipeline::{denoise_detailed, GraphKind, ParamSchedule};

#[derive(Debug, Parser)]
#[command(name = "graphdenoise", version, about = "Depth-image denoising with learned graph and low-rank priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Add seeded noise to clean images, denoise, and tabulate PSNR/SSIM.
    Bench(BenchArgs),
    /// Learn and dump the Laplacians of one patch group.
    InspectLaplacian(InspectArgs),
}

/// Options shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file with schedule values (and optionally sigma, seed, threads).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Schedule override, e.g. `--set theta_r=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise level of the input; selects the regularization weights.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Treat `--in` as clean: add noise with `--sigma`/`--seed` first and use
    /// the clean input as ground truth.
    #[arg(long)]
    pub add_noise: bool,
    /// Return the outer iterate with the best PSNR against `--truth`.
    #[arg(long, requires = "truth")]
    pub oracle: bool,
    /// Ground-truth image for PSNR reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// JSON report path (default: report.json next to the output).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for the PSNR trace and per-group ADMM traces.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Clean input image(s).
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma: Vec<f64>,
    /// CSV output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write noisy and denoised images here.
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    /// Select the best outer iterate against the clean image.
    #[arg(long)]
    pub oracle: bool,
    /// JSON file collecting every run's report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Top-left row of the reference patch.
    #[arg(long)]
    pub row: usize,
    /// Top-left column of the reference patch.
    #[arg(long)]
    pub col: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Noise level used to pick the schedule.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Size of each matrix entry in the magnitude images, in pixels.
    #[arg(long, default_value_t = 8)]
    pub scale: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses a flat key/value config: `key = value` or `key: value` per line,
/// `#`/`;` comments, `[section]` headers ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let v = v.split(" #").next().unwrap_or(v).trim();
        out.insert(k.trim().to_ascii_lowercase(), v.to_string());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {v:?}")))
}

/// Applies one schedule key. Unknown keys are an error.
pub fn apply_setting(s: &mut ParamSchedule, key: &str, value: &str) -> Result<()> {
    match key {
        "patch_size" => s.patch_size = parse_num(key, value)?,
        "window" => s.window = parse_num(key, value)?,
        "stride" => s.stride = parse_num(key, value)?,
        "k" => s.k = parse_num(key, value)?,
        "alpha" => s.alpha = parse_num(key, value)?,
        "beta" | "mu" => s.beta = parse_num(key, value)?,
        "theta_n" => s.theta_n = parse_num(key, value)?,
        "theta_r" => s.theta_r = parse_num(key, value)?,
        "theta_c" => s.theta_c = parse_num(key, value)?,
        "v" => s.v = parse_num(key, value)?,
        "p" => s.p = parse_num(key, value)?,
        "delta" => s.delta = parse_num(key, value)?,
        "n1" => s.n1 = parse_num(key, value)?,
        "n2" => s.n2 = parse_num(key, value)?,
        "eps_pri" => s.eps_pri = parse_num(key, value)?,
        "eps_dual" => s.eps_dual = parse_num(key, value)?,
        "graph_scale" => s.graph_scale = parse_num(key, value)?,
        "laplacian_iters" => s.laplacian_iters = parse_num(key, value)?,
        "laplacian_tol" => s.laplacian_tol = parse_num(key, value)?,
        "graph" => {
            s.graph = match value {
                "learned" => GraphKind::Learned,
                "kernel" => match s.graph {
                    k @ GraphKind::Kernel { .. } => k,
                    GraphKind::Learned => GraphKind::Kernel { sigma: 1.0, epsilon: 10.0 },
                },
                other => return Err(Error::Config(format!("unknown graph kind {other:?}"))),
            }
        }
        "kernel_sigma" | "kernel_epsilon" => {
            let x: f64 = parse_num(key, value)?;
            let (mut sigma, mut epsilon) = match s.graph {
                GraphKind::Kernel { sigma, epsilon } => (sigma, epsilon),
                GraphKind::Learned => (1.0, 10.0),
            };
            if key == "kernel_sigma" {
                sigma = x;
            } else {
                epsilon = x;
            }
            s.graph = GraphKind::Kernel { sigma, epsilon };
        }
        other => return Err(Error::Config(format!("unknown setting {other:?}"))),
    }
    Ok(())
}

const RUN_KEYS: [&str; 3] = ["sigma", "seed", "threads"];

/// Config file plus command-line values, flags winning.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub schedule: ParamSchedule,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs, sigma_flag: Option<f64>) -> Result<Self> {
        let file = match &common.config {
            Some(path) => parse_config(&fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?)?,
            None => BTreeMap::new(),
        };
        let file_num = |key: &str| file.get(key).map(|v| v.as_str());
        let sigma = match (sigma_flag, file_num("sigma")) {
            (Some(s), _) => Some(s),
            (None, Some(v)) => Some(parse_num("sigma", v)?),
            (None, None) => None,
        };
        let seed = match (common.seed, file_num("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_num("seed", v)?,
            (None, None) => 0,
        };
        let threads = match (common.threads, file_num("threads")) {
            (Some(t), _) => Some(t),
            (None, Some(v)) => Some(parse_num("threads", v)?),
            (None, None) => None,
        };
        let mut schedule = ParamSchedule::for_sigma(sigma.unwrap_or(20.0));
        for (k, v) in file.iter().filter(|(k, _)| !RUN_KEYS.contains(&k.as_str())) {
            apply_setting(&mut schedule, k, v)?;
        }
        for item in &common.overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
            apply_setting(&mut schedule, k.trim(), v.trim())?;
        }
        schedule.validate()?;
        if let Some(s) = sigma {
            NoiseSpec::new(s, seed)?;
        }
        Ok(Self {
            schedule,
            sigma,
            seed,
            threads,
        })
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_denoise(args: &DenoiseArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common, args.sigma)?;
    let input = load_image(&args.input)?;
    let (noisy, truth) = if args.add_noise {
        let sigma = cfg
            .sigma
            .ok_or_else(|| Error::Config("--add-noise needs --sigma".into()))?;
        (add_awgn(&input, NoiseSpec::new(sigma, cfg.seed)?), Some(input))
    } else {
        let truth = args.truth.as_ref().map(load_image).transpose()?;
        (input, truth)
    };
    let reference = if args.oracle || args.add_noise || truth.is_some() {
        truth.as_ref()
    } else {
        None
    };
    let collect = args.trace_dir.is_some();
    let out = cfg.run(|| denoise_detailed(&noisy, &cfg.schedule, reference, collect))??;
    // a truth without --oracle still gets PSNRs in the report but blind selection
    let (image, mut report) = (out.image, out.report);
    let image = if reference.is_some() && !args.oracle {
        report.mode = "blind";
        report.selected_iteration = report.iterations.len();
        out.iterates.last().cloned().unwrap_or(image)
    } else {
        image
    };

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_image(&image, &args.out)?;
    let report_path = args.report.clone().unwrap_or_else(|| {
        args.out
            .parent()
            .map(|p| p.join("report.json"))
            .unwrap_or_else(|| PathBuf::from("report.json"))
    });
    write_text(&report_path, &report.to_json()?)?;

    if let Some(dir) = &args.trace_dir {
        fs::create_dir_all(dir)?;
        write_text(&dir.join("psnr_trace.csv"), &report.psnr_csv()?)?;
        let mut w = csv::Writer::from_path(dir.join("admm_trace.csv"))?;
        w.write_record(["outer", "ref_row", "ref_col", "iteration", "r_norm", "s_norm", "objective"])?;
        for g in &out.traces {
            for row in &g.rows {
                w.write_record([
                    g.outer.to_string(),
                    g.reference.row.to_string(),
                    g.reference.col.to_string(),
                    row.iteration.to_string(),
                    format!("{:e}", row.r_norm),
                    format!("{:e}", row.s_norm),
                    format!("{:e}", row.objective),
                ])?;
            }
        }
        w.flush()?;
    }
    for it in &report.iterations {
        match it.psnr {
            Some(p) => eprintln!("iteration {}: PSNR {:.2} dB ({:.1}s)", it.iteration, p, it.seconds),
            None => eprintln!("iteration {} ({:.1}s)", it.iteration, it.seconds),
        }
    }
    Ok(())
}

/// Deterministic per-(image, σ) seed derived from the master seed.
pub fn derive_seed(master: u64, image_name: &str, sigma: f64) -> u64 {
    // FNV-1a over the name, then a SplitMix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in image_name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h ^ sigma.to_bits().rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn image_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchRow {
    pub image: String,
    pub sigma: f64,
    pub noisy_psnr: f64,
    pub denoised_psnr: f64,
    pub ssim: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image", "sigma", "noisy_psnr", "denoised_psnr", "ssim"])?;
    for r in rows {
        w.write_record([
            r.image.clone(),
            format!("{}", r.sigma),
            format!("{:.4}", r.noisy_psnr),
            format!("{:.4}", r.denoised_psnr),
            format!("{:.4}", r.ssim),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let base = RunConfig::resolve(&args.common, args.sigma.first().copied())?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for path in &args.inputs {
        let clean = load_image(path)?;
        let name = image_name(path);
        for &sigma in &args.sigma {
            // re-resolve so the θ weights follow σ; file and --set values still win
            let cfg = RunConfig::resolve(&args.common, Some(sigma))?;
            let spec = NoiseSpec::new(sigma, derive_seed(base.seed, &name, sigma))?;
            let noisy = add_awgn(&clean, spec);
            let noisy_q = noisy.quantized();
            let out = cfg.run(|| denoise_detailed(&noisy, &cfg.schedule, Some(&clean), false))??;
            let (image, report) = if args.oracle {
                (out.image, out.report)
            } else {
                let mut report = out.report;
                report.mode = "blind";
                report.selected_iteration = report.iterations.len();
                (out.iterates.last().cloned().expect("n1 ≥ 1"), report)
            };
            let denoised_q = image.quantized();
            rows.push(BenchRow {
                image: name.clone(),
                sigma,
                noisy_psnr: psnr(&clean, &noisy_q, 255.0)?,
                denoised_psnr: psnr(&clean, &denoised_q, 255.0)?,
                ssim: ssim(&clean, &denoised_q)?,
            });
            if let Some(dir) = &args.image_dir {
                fs::create_dir_all(dir)?;
                save_image(&noisy, dir.join(format!("{name}_sigma{sigma}_noisy.pgm")))?;
                save_image(&image, dir.join(format!("{name}_sigma{sigma}_denoised.pgm")))?;
            }
            let last = rows.last().expect("just pushed");
            eprintln!(
                "{name} σ={sigma}: noisy {:.2} dB → {:.2} dB, SSIM {:.4}",
                last.noisy_psnr, last.denoised_psnr, last.ssim
            );
            reports.push(serde_json::json!({
                "image": name,
                "sigma": sigma,
                "seed": spec.seed,
                "report": report,
            }));
        }
    }
    let table = bench_csv(&rows)?;
    match &args.out {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &args.report {
        write_text(path, &serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

/// Row and column Laplacians for the group at `at`, learned (or kernel-built)
/// regardless of the θ weights.
pub fn inspect_laplacians(img: &Image, at: PatchRef, schedule: &ParamSchedule) -> Result<(GraphLaplacian, GraphLaplacian)> {
    let p = schedule.patch_size;
    if p > img.width() || p > img.height() || at.row > img.height() - p || at.col > img.width() - p {
        return Err(Error::CoordinateOutOfRange { row: at.row, col: at.col });
    }
    let group = build_group(img, at, p, schedule.window, schedule.k)?;
    let scaled = &group.matrix / schedule.graph_scale;
    match schedule.graph {
        GraphKind::Learned => {
            let cfg = schedule.graph_learning();
            Ok((
                learn_laplacian(&scaled, GraphMode::Row, &cfg)?.laplacian,
                learn_laplacian(&scaled, GraphMode::Column, &cfg)?.laplacian,
            ))
        }
        GraphKind::Kernel { sigma, epsilon } => Ok((
            kernel_laplacian(&scaled, GraphMode::Row, sigma, epsilon)?,
            kernel_laplacian(&scaled, GraphMode::Column, sigma, epsilon)?,
        )),
    }
}

pub fn cmd_inspect_laplacian(args: &InspectArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common, args.sigma)?;
    let img = load_image(&args.input)?;
    let (lr, lc) = inspect_laplacians(&img, PatchRef::new(args.row, args.col), &cfg.schedule)?;
    fs::create_dir_all(&args.out)?;
    for (name, l) in [("row", &lr), ("column", &lc)] {
        l.write_csv(args.out.join(format!("{name}_laplacian.csv")))?;
        save_image(&l.magnitude_image(args.scale), args.out.join(format!("{name}_laplacian.pgm")))?;
    }
    eprintln!(
        "wrote {}x{} row and {}x{} column Laplacians to {}",
        lr.size(),
        lr.size(),
        lc.size(),
        lc.size(),
        args.out.display()
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Denoise(a) => cmd_denoise(a),
        Command::Bench(a) => cmd_bench(a),
        Command::InspectLaplacian(a) => cmd_inspect_laplacian(a),
    }
}
