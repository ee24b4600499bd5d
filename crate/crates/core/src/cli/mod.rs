// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `gen-data`, `train`, `eval`, `sweep`,
//! `show-manifest`. Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channel::{build_dataset, ChannelDataset, DatasetParams, Scenario, Split};
use crate::error::{Error, Result};
use crate::evaluator::{
    evaluate, model_id, EvalOptions, NmseConvention, NmseReport, NmseRow, ReportMeta, Snr,
    Transmit, DEFAULT_SNRS_DB,
};
use crate::model::{Architecture, Mode, ModelParams};
use crate::trainer::{anneal_and_retrain, train, AnnealSchedule, TrainConfig};

pub use config::{
    parse_gamma, parse_gamma_list, AnnealSection, DatasetSection, EvalSection, ExperimentConfig,
    ModelSection, SweepSection,
};
pub use manifest::{write_atomic, RunManifest, MANIFEST_FILE};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "PRVNET_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "prvnet", version, about = "Variational CSI feedback experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset file and its JSON sidecar.
    GenData(GenDataArgs),
    /// Train a model (anneal then retrain, or a single fixed-β run).
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train and evaluate one model per compression ratio.
    Sweep(SweepArgs),
    /// Print a run manifest, optionally re-executing the run.
    ShowManifest(ShowArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Baseline {
    PointEstimate,
}

/// Budget flags shared by `train` and `sweep`.
#[derive(Args, Debug, Default)]
pub struct BudgetArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f32>,
    /// Learning rate 0.1, 1000 epochs, batch size 128.
    #[arg(long)]
    pub paper_hyperparams: bool,
    #[arg(long)]
    pub anneal_fraction: Option<f64>,
    /// SNR of the feedback channel during training, in dB or `clean`.
    #[arg(long)]
    pub train_snr: Option<Snr>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Compression ratio, e.g. `1/4`.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub beta_fixed: Option<f64>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate at 35, 32, 29, 26 and 23 dB.
    #[arg(long, conflicts_with_all = ["clean", "snr"])]
    pub snr_sweep: bool,
    /// Evaluate without feedback noise.
    #[arg(long, conflicts_with = "snr")]
    pub clean: bool,
    /// Comma-separated SNR values in dB.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Transmit a sampled codeword instead of the mean.
    #[arg(long)]
    pub sample_codeword: bool,
    /// Average per-sample dB values instead of error ratios.
    #[arg(long)]
    pub mean_db: bool,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated compression ratios, e.g. `1/4,1/16,1/32,1/64`.
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Also train the point-estimate baseline and evaluate both over the SNR grid.
    #[arg(long)]
    pub baseline_compare: bool,
    #[arg(long, value_delimiter = ',')]
    pub snrs: Option<Vec<f64>>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ShowArgs {
    /// Manifest file or run directory.
    pub path: PathBuf,
    /// Re-execute the run into this directory and compare outputs.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let recorded = argv
        .iter()
        .skip(1)
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.command, recorded) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, argv: Vec<String>) -> Result<i32> {
    match cmd {
        Command::GenData(a) => gen_data(a).map(|_| 0),
        Command::Train(a) => cmd_train(a, argv).map(|_| 0),
        Command::Eval(a) => cmd_eval(a, argv).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(a, argv),
        Command::ShowManifest(a) => show_manifest(a),
    }
}

fn base_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_budget(cfg: &mut ExperimentConfig, b: &BudgetArgs) {
    if b.paper_hyperparams {
        let p = TrainConfig::paper();
        cfg.train.learning_rate = p.learning_rate;
        cfg.train.epochs = p.epochs;
        cfg.train.batch_size = p.batch_size;
    }
    if let Some(v) = b.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = b.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = b.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = b.anneal_fraction {
        cfg.train.anneal_fraction = v;
    }
    if let Some(v) = b.train_snr {
        cfg.train.train_snr = v;
    }
    if let Some(v) = b.seed {
        cfg.seed = v;
    }
}

fn finish_config(mut cfg: ExperimentConfig, out_dir: Option<PathBuf>) -> Result<ExperimentConfig> {
    if out_dir.is_some() {
        cfg.out_dir = out_dir;
    }
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Run directory: explicit setting, else `$PRVNET_OUT_DIR/<name>`, else `runs/<name>`.
fn run_dir(cfg: &ExperimentConfig, default_name: &str) -> Result<PathBuf> {
    let dir = match &cfg.out_dir {
        Some(d) => d.clone(),
        None => {
            let root = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"));
            root.join(default_name)
        }
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg = base_config(a.config.as_deref())?;
    if let Some(v) = a.count {
        cfg.dataset.count = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.scenario {
        cfg.dataset.scenario = v;
    }
    let ds = build_dataset(
        &DatasetParams::for_scenario(cfg.dataset.scenario),
        cfg.dataset.count,
        cfg.seed,
    )?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    ds.save(&a.out)?;
    let [tr, va, te] = ds.split_counts();
    println!("wrote {} ({} samples, sha256 {})", a.out.display(), ds.len(), ds.hash());
    println!("splits: train {tr}, val {va}, test {te}");
    Ok(())
}

fn architecture(cfg: &ExperimentConfig, ds: &ChannelDataset) -> Result<Architecture> {
    let arch = Architecture {
        encoder_channels: cfg.model.encoder_channels.clone(),
        decoder_channels: cfg.model.decoder_channels.clone(),
        ..Architecture::for_dataset(ds, cfg.train.gamma)?
    };
    arch.validate()?;
    Ok(arch)
}

fn row(
    model: &ModelParams,
    ds: &ChannelDataset,
    snr: Snr,
    cfg: &ExperimentConfig,
) -> Result<NmseRow> {
    let s = evaluate(
        model,
        ds,
        &EvalOptions {
            snr,
            seed: cfg.seed,
            transmit: cfg.eval.transmit,
            convention: cfg.eval.convention,
            ..EvalOptions::default()
        },
    )?;
    Ok(NmseRow {
        gamma: model.arch.gamma(),
        scenario: ds.params.scenario,
        snr,
        nmse_db: s.nmse_db,
        n_samples: ds.range(Split::Test).len(),
        model_id: model_id(model),
        seed: cfg.seed,
    })
}

fn meta(cfg: &ExperimentConfig, ds: &ChannelDataset) -> ReportMeta {
    ReportMeta {
        seed: cfg.seed,
        dataset_hash: ds.hash(),
    }
}

fn save_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    write_atomic(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())
}

/// Train per `cfg` into `dir`, writing checkpoints, traces, a clean test
/// report, the config snapshot and a manifest. Returns the final model.
fn run_train(
    cfg: &ExperimentConfig,
    ds: &ChannelDataset,
    data_path: &Path,
    dir: &Path,
    argv: Vec<String>,
) -> Result<ModelParams> {
    let started = Instant::now();
    let arch = architecture(cfg, ds)?;
    let mut m = RunManifest::new("train", argv, cfg.clone());
    m.dataset_path = absolute(data_path);
    m.dataset_hash = ds.hash();
    save_config(cfg, dir)?;

    let single = cfg.model.mode == Mode::PointEstimate || cfg.anneal.beta_fixed.is_some();
    let (params, best) = if single {
        let beta = cfg.anneal.beta_fixed.unwrap_or(0.0);
        let run = train(
            ModelParams::init(arch, cfg.model.mode, cfg.seed)?,
            ds,
            &cfg.train,
            &AnnealSchedule::fixed(beta),
        )?;
        run.trace.write_csv(&dir.join("trace.csv"))?;
        m.traces.push("trace.csv".into());
        eprintln!(
            "trained {} at fixed beta {beta}: final val NMSE {:.3} dB",
            model_id(&run.params),
            run.final_val_nmse_db()
        );
        (run.params, run.best_params)
    } else {
        let out = anneal_and_retrain(
            || ModelParams::init(arch.clone(), Mode::Variational, cfg.seed),
            ds,
            &cfg.train,
        )?;
        out.phase1.trace.write_csv(&dir.join("phase1_trace.csv"))?;
        out.phase2.trace.write_csv(&dir.join("phase2_trace.csv"))?;
        m.traces.push("phase1_trace.csv".into());
        m.traces.push("phase2_trace.csv".into());
        m.beta_star = Some(out.beta_star);
        m.beta_star_nmse_db = Some(out.beta_star_nmse_db);
        eprintln!(
            "beta* = {} (val NMSE {:.3} dB); retrained final val NMSE {:.3} dB",
            out.beta_star,
            out.beta_star_nmse_db,
            out.phase2.final_val_nmse_db()
        );
        (out.phase2.params, out.phase2.best_params)
    };
    params.save(&dir.join("model.ckpt"))?;
    best.save(&dir.join("best.ckpt"))?;
    m.checkpoints.push("model.ckpt".into());
    m.checkpoints.push("best.ckpt".into());

    let mut report = NmseReport::new(meta(cfg, ds));
    report.rows.push(row(&params, ds, Snr::Clean, cfg)?);
    report.write_csv(&dir.join("report.csv"))?;
    m.reports.push("report.csv".into());

    m.duration_secs = started.elapsed().as_secs_f64();
    m.complete = true;
    m.hash_artifacts(dir)?;
    m.save(dir)?;
    Ok(params)
}

/// Merge defaults, the config file, and the flags of `train`.
pub fn resolve_train(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(a.config.as_deref())?;
    apply_budget(&mut cfg, &a.budget);
    if let Some(g) = &a.gamma {
        cfg.train.gamma = parse_gamma(g)?;
    }
    if let Some(b) = a.beta_fixed {
        cfg.anneal.beta_fixed = Some(b);
    }
    if let Some(Baseline::PointEstimate) = a.baseline {
        cfg.model.mode = Mode::PointEstimate;
    }
    finish_config(cfg, a.out_dir.clone())
}

fn cmd_train(a: TrainArgs, argv: Vec<String>) -> Result<()> {
    let cfg = resolve_train(&a)?;
    let ds = ChannelDataset::load(&a.data)?;
    let m = Architecture::new(ds.n_a(), ds.n_t(), cfg.train.gamma)?.latent_dim;
    let dir = run_dir(&cfg, &format!("train-M{m}-seed{}", cfg.seed))?;
    run_train(&cfg, &ds, &a.data, &dir, argv)?;
    println!("{}", fs::read_to_string(dir.join("report.csv")).unwrap_or_default().trim_end());
    println!("run directory: {}", dir.display());
    Ok(())
}

/// Merge defaults, the config file, and the flags of `eval`.
pub fn resolve_eval(a: &EvalArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(a.config.as_deref())?;
    if a.snr_sweep {
        cfg.eval.snrs = DEFAULT_SNRS_DB.to_vec();
        cfg.eval.include_clean = false;
    } else if a.clean {
        cfg.eval.snrs.clear();
        cfg.eval.include_clean = true;
    } else if let Some(s) = &a.snr {
        cfg.eval.snrs = s.clone();
        cfg.eval.include_clean = false;
    }
    if a.sample_codeword {
        cfg.eval.transmit = Transmit::Sample;
    }
    if a.mean_db {
        cfg.eval.convention = NmseConvention::MeanDb;
    }
    if a.svg {
        cfg.eval.svg = true;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let cfg = finish_config(cfg, a.out_dir.clone())?;
    if cfg.eval.snrs.is_empty() && !cfg.eval.include_clean {
        return Err(Error::Config("nothing to evaluate: no SNR and no clean row".into()));
    }
    Ok(cfg)
}

fn cmd_eval(a: EvalArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve_eval(&a)?;
    let model = ModelParams::load(&a.checkpoint)?;
    let ds = ChannelDataset::load(&a.data)?;
    let dir = run_dir(&cfg, &format!("eval-seed{}", cfg.seed))?;

    let mut report = NmseReport::new(meta(&cfg, &ds));
    if cfg.eval.include_clean {
        report.rows.push(row(&model, &ds, Snr::Clean, &cfg)?);
    }
    for &db in &cfg.eval.snrs {
        report.rows.push(row(&model, &ds, Snr::Db(db), &cfg)?);
    }
    let mut m = RunManifest::new("eval", argv, cfg.clone());
    m.dataset_path = absolute(&a.data);
    m.dataset_hash = report.meta.dataset_hash.clone();
    m.input_checkpoint = Some(absolute(&a.checkpoint));
    save_config(&cfg, &dir)?;
    report.write_csv(&dir.join("report.csv"))?;
    m.reports.push("report.csv".into());
    if cfg.eval.svg {
        fs::write(dir.join("nmse_vs_snr.svg"), report.svg_vs_snr())
            .map_err(|e| Error::io(&dir, e))?;
        m.reports.push("nmse_vs_snr.svg".into());
    }
    print!("{}", report.summary_table());
    m.duration_secs = started.elapsed().as_secs_f64();
    m.complete = true;
    m.hash_artifacts(&dir)?;
    m.save(&dir)?;
    Ok(())
}

/// Train and evaluate one compression ratio of a sweep into `dir`.
fn sweep_job(
    cfg: &ExperimentConfig,
    ds: &ChannelDataset,
    data_path: &Path,
    gamma: f64,
    dir: &Path,
) -> Result<Vec<NmseRow>> {
    let mut job = cfg.clone();
    job.train.gamma = gamma;
    job.out_dir = Some(dir.to_path_buf());
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !cfg.sweep.baseline_compare {
        let model = run_train(&job, ds, data_path, dir, replay_argv("train", data_path, dir))?;
        return Ok(vec![row(&model, ds, Snr::Clean, &job)?]);
    }
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for (name, mode) in [("prvnet", Mode::Variational), ("point-estimate", Mode::PointEstimate)] {
        let mut c = job.clone();
        c.model.mode = mode;
        c.anneal.beta_fixed = (mode == Mode::PointEstimate).then_some(0.0);
        let sub = dir.join(name);
        c.out_dir = Some(sub.clone());
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let argv = replay_argv("train", data_path, &sub);
        models.push(run_train(&c, ds, data_path, &sub, argv)?);
    }
    let grid = std::iter::once(Snr::Clean).chain(cfg.sweep.snrs.iter().map(|&d| Snr::Db(d)));
    for snr in grid {
        for model in &models {
            rows.push(row(model, ds, snr, &job)?);
        }
    }
    Ok(rows)
}

fn replay_argv(command: &str, data: &Path, dir: &Path) -> Vec<String> {
    vec![
        command.to_string(),
        "--config".into(),
        dir.join("config.toml").display().to_string(),
        "--data".into(),
        absolute(data).display().to_string(),
        "--out-dir".into(),
        dir.display().to_string(),
    ]
}

fn gamma_dir(gamma: f64, n: usize) -> String {
    format!("M{}", (gamma * n as f64).round() as usize)
}

/// Merge defaults, the config file, and the flags of `sweep`.
pub fn resolve_sweep(a: &SweepArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(a.config.as_deref())?;
    apply_budget(&mut cfg, &a.budget);
    if let Some(g) = &a.gammas {
        cfg.sweep.gammas = parse_gamma_list(g)?;
    }
    if let Some(p) = a.parallel {
        cfg.sweep.parallel = p;
    }
    if a.baseline_compare {
        cfg.sweep.baseline_compare = true;
    }
    if let Some(s) = &a.snrs {
        cfg.sweep.snrs = s.clone();
    }
    let cfg = finish_config(cfg, a.out_dir.clone())?;
    if cfg.sweep.gammas.is_empty() {
        return Err(Error::Config("no compression ratios to sweep".into()));
    }
    Ok(cfg)
}

fn cmd_sweep(a: SweepArgs, argv: Vec<String>) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve_sweep(&a)?;
    let ds = ChannelDataset::load(&a.data)?;
    for &g in &cfg.sweep.gammas {
        Architecture::new(ds.n_a(), ds.n_t(), g)?;
    }
    let dir = run_dir(&cfg, &format!("sweep-seed{}", cfg.seed))?;
    save_config(&cfg, &dir)?;

    let mut manifest = RunManifest::new("sweep", argv, cfg.clone());
    manifest.dataset_path = absolute(&a.data);
    manifest.dataset_hash = ds.hash();
    manifest.reports.push("report.csv".into());
    manifest.save(&dir)?;

    let gammas = cfg.sweep.gammas.clone();
    let n = ds.input_len();
    let results: Mutex<Vec<Option<std::result::Result<Vec<NmseRow>, String>>>> =
        Mutex::new(vec![None; gammas.len()]);
    let next = AtomicUsize::new(0);
    let meta = meta(&cfg, &ds);
    let persist = |done: &[Option<std::result::Result<Vec<NmseRow>, String>>]| -> Result<()> {
        let mut report = NmseReport::new(meta.clone());
        let mut m = manifest.clone();
        for (g, r) in gammas.iter().zip(done) {
            match r {
                Some(Ok(rows)) => report.rows.extend(rows.iter().cloned()),
                Some(Err(e)) => m.failures.push(format!("gamma {g}: {e}")),
                None => {}
            }
        }
        write_atomic(&dir.join("report.csv"), report.to_csv().as_bytes())?;
        m.duration_secs = started.elapsed().as_secs_f64();
        m.complete = done.iter().all(|r| matches!(r, Some(Ok(_))));
        m.hash_artifacts(&dir)?;
        m.save(&dir)
    };

    let workers = cfg.sweep.parallel.min(gammas.len());
    let persist_err: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= gammas.len() {
                    break;
                }
                let g = gammas[i];
                let sub = dir.join(gamma_dir(g, n));
                eprintln!("sweep: training gamma {g}");
                let out = sweep_job(&cfg, &ds, &a.data, g, &sub).map_err(|e| e.to_string());
                if let Err(e) = &out {
                    eprintln!("sweep: gamma {g} failed: {e}");
                }
                let mut done = results.lock().unwrap();
                done[i] = Some(out);
                if let Err(e) = persist(&done) {
                    *persist_err.lock().unwrap() = Some(e);
                }
            });
        }
    });
    if let Some(e) = persist_err.into_inner().unwrap() {
        return Err(e);
    }

    let done = results.into_inner().unwrap();
    let mut report = NmseReport::new(meta);
    for rows in done.iter().flatten().flatten() {
        report.rows.extend(rows.iter().cloned());
    }
    let mut m = RunManifest::load(&dir)?;
    fs::write(dir.join("nmse_vs_compression.svg"), report.svg_vs_compression())
        .map_err(|e| Error::io(&dir, e))?;
    m.reports.push("nmse_vs_compression.svg".into());
    if cfg.sweep.baseline_compare {
        fs::write(dir.join("nmse_vs_snr.svg"), report.svg_vs_snr())
            .map_err(|e| Error::io(&dir, e))?;
        m.reports.push("nmse_vs_snr.svg".into());
    }
    m.duration_secs = started.elapsed().as_secs_f64();
    m.hash_artifacts(&dir)?;
    m.save(&dir)?;
    print!("{}", report.summary_table());
    if m.failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} of {} runs failed", m.failures.len(), gammas.len());
        Ok(1)
    }
}

fn show_manifest(a: ShowArgs) -> Result<i32> {
    let m = RunManifest::load(&a.path)?;
    print!("{}", m.summary());
    let Some(dir) = a.replay else {
        return Ok(0);
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_config(&m.config, &dir)?;
    let mut argv = replay_argv(&m.command, &m.dataset_path, &dir);
    match m.command.as_str() {
        "train" | "sweep" => {}
        "eval" => {
            let ckpt = m.input_checkpoint.clone().ok_or_else(|| {
                Error::Format {
                    kind: "manifest",
                    reason: "eval manifest has no input checkpoint".into(),
                }
            })?;
            argv.push("--checkpoint".into());
            argv.push(ckpt.display().to_string());
        }
        other => {
            return Err(Error::Format {
                kind: "manifest",
                reason: format!("cannot replay command {other:?}"),
            })
        }
    }
    let code = run(std::iter::once("prvnet".to_string()).chain(argv));
    if code != 0 {
        return Ok(code);
    }
    let replayed = RunManifest::load(&dir)?;
    let mut differ = Vec::new();
    for (name, hash) in &m.artifact_hashes {
        if replayed.artifact_hashes.get(name) != Some(hash) {
            differ.push(name.clone());
        }
    }
    if differ.is_empty() {
        println!("replay identical: {} artifacts", m.artifact_hashes.len());
        Ok(0)
    } else {
        println!("replay differs: {}", differ.join(", "));
        Ok(1)
    }
}
