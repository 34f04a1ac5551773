use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use emgtorque::data::csvio::write_text;
use emgtorque::data::manifest::RunManifest;
use emgtorque::eval::report::provenance;
use emgtorque::eval::{Grid, JOINTS};
use emgtorque::nn::bundle::Bundle;
use emgtorque::pipeline::files::{
    load_features, load_preprocessed, load_targets, write_features, write_preprocessed,
    write_targets,
};
use emgtorque::pipeline::{
    extract_all, load_results, model_bundle, preprocess, results_bundle, run_cell, run_protocol,
    target_keys, threads_from_env, torque_targets, write_report, Dataset,
};
use emgtorque::preprocess::NormalizationMode;
use emgtorque::synth::{condition_grid, write_dataset, SynthSpec};
use emgtorque::{Error, Result};

/// sEMG to joint-torque pipeline.
///
/// Stages read the manifest and write into new directories: `synth` fills
/// `data_dir`; `preprocess`, `features`, `torque`, `train` and `eval` write
/// `work_dir/<stage>` unless `--out` is given.
#[derive(Debug, Parser)]
#[command(name = "emgtorque", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run manifest (`key=value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Seed override: the synthesis seed for `synth`, the only training seed otherwise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Normalization override, `global` or `condition`.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Experiment grid for `eval`: `table3` or `core`.
    #[arg(long, global = true)]
    grid: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Input directory for `report` (the `eval` output).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Write a synthetic dataset with ground-truth envelopes.
    Synth,
    /// Filter, normalize and activate every trial.
    Preprocess,
    /// Windowed features from the preprocessed trials.
    Features,
    /// Window-end reference torques from the marker files.
    Torque,
    /// Train one model on the features and torques.
    Train,
    /// Run the seed × cell protocol and write the report.
    Eval,
    /// Rebuild report files from saved `eval` results.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Preprocess => "preprocess",
            Command::Features => "features",
            Command::Torque => "torque",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Report => "report",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "missing-input" => 3,
        "config" => 4,
        "schema" | "data" | "shape" | "length" | "encoding" | "kinematics" => 5,
        "parameter" | "normalization" | "metric" => 6,
        "training" => 7,
        "protocol" | "split" => 8,
        "bundle" => 9,
        _ => 1,
    }
}

fn manifest(cli: &Cli) -> Result<RunManifest> {
    let mut m = match &cli.manifest {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::default(),
    };
    if let Some(mode) = &cli.mode {
        m.normalization = NormalizationMode::parse(mode).ok_or_else(|| {
            Error::config(
                "mode",
                format!("expected global or condition, got {mode:?}"),
            )
        })?;
    }
    m.validate()?;
    Ok(m)
}

struct Ctx {
    cmd: Command,
    m: RunManifest,
    seed: Option<u64>,
    grid: Option<String>,
    out: Option<PathBuf>,
    input: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self, default: PathBuf) -> PathBuf {
        self.out.clone().unwrap_or(default)
    }

    fn stage(&self, name: &str) -> PathBuf {
        self.m.work_dir.join(name)
    }

    fn provenance(&self, dir: &Path, seed: &str) -> Result<()> {
        let command = std::env::args().collect::<Vec<_>>().join(" ");
        write_text(
            &dir.join("PROVENANCE"),
            &provenance(&self.m.digest(), seed, &command),
        )
    }

    fn seeds_label(&self) -> String {
        self.m
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn synth(ctx: &Ctx) -> Result<()> {
    let mut m = ctx.m.clone();
    if let Some(s) = ctx.seed {
        m.synth_seed = s;
    }
    let out = ctx.out_dir(m.data_dir.clone());
    let spec = SynthSpec::from_manifest(&m);
    let n = write_dataset(&spec, &condition_grid(&m.weights_kg)?, &out)?;
    ctx.provenance(&out, &m.synth_seed.to_string())?;
    println!("wrote {n} files to {}", out.display());
    Ok(())
}

fn preprocess_cmd(ctx: &Ctx) -> Result<()> {
    let ds = Dataset::load(&ctx.m.data_dir, &ctx.m.weights_kg)?;
    let sessions: Vec<_> = ds.sessions.iter().collect();
    let pre = preprocess(&sessions, &ctx.m)?;
    let out = ctx.out_dir(ctx.stage("preprocess"));
    write_preprocessed(&out, &pre)?;
    ctx.provenance(&out, "-")?;
    println!(
        "preprocessed {} trials into {}",
        pre.trials.len(),
        out.display()
    );
    Ok(())
}

fn features_cmd(ctx: &Ctx) -> Result<()> {
    let (trials, _) = load_preprocessed(&ctx.stage("preprocess"))?;
    let fm = extract_all(&trials, &ctx.m)?;
    let out = ctx.out_dir(ctx.stage("features"));
    write_features(&out.join("features.csv"), &fm)?;
    ctx.provenance(&out, "-")?;
    println!(
        "{} windows × {} features into {}",
        fm.n_rows(),
        fm.n_cols(),
        out.display()
    );
    Ok(())
}

fn torque_cmd(ctx: &Ctx) -> Result<()> {
    let ds = Dataset::load(&ctx.m.data_dir, &ctx.m.weights_kg)?;
    let sessions: Vec<_> = ds.sessions.iter().collect();
    let targets = torque_targets(&sessions, &ctx.m)?;
    let (conditions, groups) = target_keys(&sessions, &ctx.m)?;
    let out = ctx.out_dir(ctx.stage("torque"));
    write_targets(&out.join("targets.csv"), &targets, &conditions, &groups)?;
    ctx.provenance(&out, "-")?;
    println!("{} target rows into {}", targets.nrows(), out.display());
    Ok(())
}

fn train_cmd(ctx: &Ctx) -> Result<()> {
    let fm = load_features(&ctx.stage("features").join("features.csv"))?;
    let (targets, conditions, groups) = load_targets(&ctx.stage("torque").join("targets.csv"))?;
    if conditions != fm.conditions || groups != fm.groups {
        return Err(Error::Schema(
            "feature and target files describe different windows".into(),
        ));
    }
    let seed = ctx.seed.unwrap_or(ctx.m.seeds[0]);
    let o = run_cell(&fm, &targets, ctx.m.model, &ctx.m.weights_kg, &ctx.m, seed)?;
    let out = ctx.out_dir(ctx.stage("train"));
    let extra = [
        ("manifest", ctx.m.to_text()),
        ("seed", seed.to_string()),
        ("model_kind", ctx.m.model.as_str().to_string()),
    ];
    let bundle = model_bundle(&o.model, &extra, &[]);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    bundle.save(&out.join("model.bundle"))?;
    let mut metrics = String::from("joint,rmse,r2,rho\n");
    for (j, s) in o.result.scores.iter().enumerate() {
        metrics.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            JOINTS[j], s.rmse, s.r2, s.rho
        ));
    }
    write_text(&out.join("metrics.csv"), &metrics)?;
    let mut hist = String::from("epoch,train_loss,val_loss\n");
    for (e, (t, v)) in o
        .history
        .train_loss
        .iter()
        .zip(&o.history.val_loss)
        .enumerate()
    {
        hist.push_str(&format!("{e},{t},{v}\n"));
    }
    write_text(&out.join("history.csv"), &hist)?;
    ctx.provenance(&out, &seed.to_string())?;
    print!("{metrics}");
    Ok(())
}

fn eval_cmd(ctx: &Ctx) -> Result<()> {
    let mut m = ctx.m.clone();
    if let Some(s) = ctx.seed {
        m.seeds = vec![s];
    }
    let grid = Grid::parse(ctx.grid.as_deref().unwrap_or("table3"))?;
    let ds = Dataset::load(&m.data_dir, &m.weights_kg)?;
    let cells = grid.cells(&m.weights_kg);
    let run = run_protocol(&ds, &m, &cells, threads_from_env())?;
    let out = ctx.out_dir(ctx.stage("eval"));
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    write_report(&out, &run.reports, &m, &command)?;
    results_bundle(&run.reports).save(&out.join("results.bundle"))?;
    let bundles = out.join("bundles");
    std::fs::create_dir_all(&bundles).map_err(|e| Error::io(&bundles, e))?;
    for (name, bytes) in &run.bundles {
        let p = bundles.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    for r in &run.reports {
        println!("{:<24} mean R² {:.4}", r.cell.id(), r.mean_r2());
    }
    Ok(())
}

fn report_cmd(ctx: &Ctx) -> Result<()> {
    let input = ctx.input.clone().unwrap_or_else(|| ctx.stage("eval"));
    let reports = load_results(&Bundle::load(&input.join("results.bundle"))?)?;
    let out = ctx.out_dir(ctx.stage("report"));
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    write_report(&out, &reports, &ctx.m, &command)?;
    println!(
        "{} cells written to {} ({})",
        reports.len(),
        out.display(),
        ctx.seeds_label()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        cmd: cli.command,
        m: manifest(&cli)?,
        seed: cli.seed,
        grid: cli.grid,
        out: cli.out,
        input: cli.input,
    };
    if ctx.grid.is_some() && !matches!(ctx.cmd, Command::Eval) {
        return Err(Error::config(
            "grid",
            format!("`--grid` only applies to eval, not {}", ctx.cmd.name()),
        ));
    }
    match ctx.cmd {
        Command::Synth => synth(&ctx),
        Command::Preprocess => preprocess_cmd(&ctx),
        Command::Features => features_cmd(&ctx),
        Command::Torque => torque_cmd(&ctx),
        Command::Train => train_cmd(&ctx),
        Command::Eval => eval_cmd(&ctx),
        Command::Report => report_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("EMGTORQUE_LOG")
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
