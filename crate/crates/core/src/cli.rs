//! Command-line front end wiring the library into the full workflow:
//! data generation, training, sparsity analysis, masked-model construction,
//! growth, evaluation, prediction, and the solver cross-check.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rand::Rng;

use crate::config::{RunConfig, TemplateKind};
use crate::dynamics::{
    mdof_linear_response, newmark_integrate, sdof_linear_response, MdofSystem, SdofSystem,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, predict, write_prediction_csv};
use crate::nn::{read_checkpoint, write_checkpoint, Layer, LayerSpec, Model};
use crate::sampling::{
    compute_norm_stats, draw_load_params, generate_dataset, normalize, read_dataset,
    read_norm_stats, solve_response, write_dataset, write_norm_stats, CaseId, Dataspace, Direction,
    NormStats, ResponseKind, Split, SystemKind,
};
use crate::sparsify::{
    build_conv_dense_template, build_sparse_template, insert_bn_conv, read_mask, sparsity_mask,
    structured_mask, two_phase_train, write_mask, GrowthPlan, StructuredMaskKind,
    DEFAULT_MASK_RATIO,
};
use crate::train::{train, DataPair};

#[derive(Parser)]
#[command(
    name = "dynsurr",
    version,
    about = "Neural-network surrogates of structural dynamical systems under harmonic loading"
)]
struct Cli {
    /// JSON run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker cap for data generation (falls back to NDS_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the train/val/test datasets and normalization statistics.
    GenData(GenDataArgs),
    /// Train a model template (or continue from a checkpoint).
    Train(TrainArgs),
    /// Threshold a trained dense layer and export the mask and report.
    AnalyzeSparsity(AnalyzeArgs),
    /// Build a masked model from a trained dense layer's survivors.
    BuildSparse(BuildSparseArgs),
    /// Insert a CONV+BN block and run two-phase training.
    Grow(GrowArgs),
    /// Evaluate a trained model on the test split.
    Eval(EvalArgs),
    /// Predict the response to one freshly sampled load.
    Predict(PredictArgs),
    /// Cross-check the closed-form solution against the time integrator.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    case: Option<u32>,
    /// displacement or acceleration
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Cubic coefficient as a multiple of the (story) stiffness.
    #[arg(long)]
    cubic_ratio: Option<f64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    reg_weight: Option<f64>,
    /// dense, sparse, or conv_dense
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    n_l: Option<usize>,
    #[arg(long)]
    n_fc: Option<usize>,
    /// Fixed shuffle/update ordering for bit-identical reruns.
    #[arg(long)]
    deterministic: bool,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Relative magnitude threshold.
    #[arg(long, default_value_t = DEFAULT_MASK_RATIO)]
    ratio: f64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct BuildSparseArgs {
    /// Trained dense model to take surviving weights from.
    #[arg(long)]
    dense_checkpoint: Option<PathBuf>,
    /// Output checkpoint for the built model.
    #[arg(long)]
    out_checkpoint: Option<PathBuf>,
    #[arg(long)]
    n_l: Option<usize>,
}

#[derive(Args)]
struct GrowArgs {
    /// Epochs with pre-existing parameters frozen (default: half).
    #[arg(long)]
    phase1: Option<usize>,
    /// Epochs with everything trainable (default: half).
    #[arg(long)]
    phase2: Option<usize>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Seed for the fresh load sample.
    #[arg(long, default_value_t = 1)]
    sample_seed: u64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    case: Option<u32>,
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let threads = cli.threads.or_else(|| {
        std::env::var("NDS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.cmd {
        Cmd::GenData(args) => cmd_gen_data(cfg, args),
        Cmd::Train(args) => cmd_train(cfg, args),
        Cmd::AnalyzeSparsity(args) => cmd_analyze(cfg, args),
        Cmd::BuildSparse(args) => cmd_build_sparse(cfg, args),
        Cmd::Grow(args) => cmd_grow(cfg, args),
        Cmd::Eval(args) => cmd_eval(cfg, args),
        Cmd::Predict(args) => cmd_predict(cfg, args),
        Cmd::Verify(args) => cmd_verify(cfg, args),
    }
}

fn parse_response(text: &str) -> Result<ResponseKind> {
    match text {
        "displacement" => Ok(ResponseKind::Displacement),
        "acceleration" => Ok(ResponseKind::Acceleration),
        other => Err(Error::Config(format!(
            "response must be displacement or acceleration, got {other}"
        ))),
    }
}

fn build_space(cfg: &RunConfig) -> Result<Dataspace> {
    let case = CaseId::from_number(cfg.dataspace.case)?;
    let mut space = Dataspace::standard(case, cfg.dataspace.response, cfg.system.cubic_ratio)?;
    if let Some((lo, hi)) = cfg.dataspace.freq_range {
        space = space.with_freq_range(lo, hi)?;
    }
    Ok(space)
}

fn split_override(cfg: &RunConfig, split: Split) -> Option<usize> {
    match split {
        Split::Train => cfg.dataspace.n_train,
        Split::Val => cfg.dataspace.n_val,
        Split::Test => cfg.dataspace.n_test,
    }
}

fn cmd_gen_data(mut cfg: RunConfig, args: GenDataArgs) -> Result<()> {
    if let Some(case) = args.case {
        cfg.dataspace.case = case;
    }
    if let Some(text) = &args.response {
        cfg.dataspace.response = parse_response(text)?;
    }
    cfg.dataspace.n_train = args.n_train.or(cfg.dataspace.n_train);
    cfg.dataspace.n_val = args.n_val.or(cfg.dataspace.n_val);
    cfg.dataspace.n_test = args.n_test.or(cfg.dataspace.n_test);
    if let Some(r) = args.cubic_ratio {
        cfg.system.cubic_ratio = r;
    }
    if let Some(dir) = args.data_dir {
        cfg.paths.data_dir = dir;
    }
    cfg.validate()?;
    let space = build_space(&cfg)?;
    std::fs::create_dir_all(&cfg.paths.data_dir)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        let ds = generate_dataset(&space, split, cfg.seed, split_override(&cfg, split))?;
        let path = cfg.dataset_path(split);
        write_dataset(&path, &ds)?;
        println!("wrote {} ({} samples)", path.display(), ds.n_samples());
        if split == Split::Train {
            let (x_stats, y_stats) = compute_norm_stats(&ds)?;
            write_norm_stats(&cfg.stats_path("x"), &x_stats)?;
            write_norm_stats(&cfg.stats_path("y"), &y_stats)?;
        }
    }
    Ok(())
}

struct LoadedSplit {
    x_norm: Array2<f64>,
    y_norm: Array2<f64>,
    x_raw: Array2<f64>,
    y_raw: Array2<f64>,
}

fn load_split(cfg: &RunConfig, split: Split, x_stats: &NormStats, y_stats: &NormStats) -> Result<LoadedSplit> {
    let ds = read_dataset(&cfg.dataset_path(split))?;
    Ok(LoadedSplit {
        x_norm: normalize(&ds.x, x_stats, Direction::Forward)?,
        y_norm: normalize(&ds.y, y_stats, Direction::Forward)?,
        x_raw: ds.x,
        y_raw: ds.y,
    })
}

fn load_stats(cfg: &RunConfig) -> Result<(NormStats, NormStats)> {
    Ok((
        read_norm_stats(&cfg.stats_path("x"))?,
        read_norm_stats(&cfg.stats_path("y"))?,
    ))
}

fn load_model(checkpoint: &std::path::Path) -> Result<Model> {
    let spec_path = checkpoint.with_extension("json");
    let text = std::fs::read_to_string(&spec_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", spec_path.display())))?;
    let specs: Vec<LayerSpec> = serde_json::from_str(&text)?;
    let mut model = Model::from_specs(&specs, 0)?;
    read_checkpoint(&mut model, checkpoint)?;
    Ok(model)
}

fn save_model(model: &mut Model, checkpoint: &std::path::Path) -> Result<()> {
    if let Some(dir) = checkpoint.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_checkpoint(model, checkpoint)?;
    let specs = model.specs();
    std::fs::write(
        checkpoint.with_extension("json"),
        serde_json::to_string_pretty(&specs)?,
    )?;
    Ok(())
}

fn build_fresh_model(cfg: &RunConfig, n: usize) -> Result<Model> {
    let m = &cfg.model;
    match m.template {
        TemplateKind::Dense => build_conv_dense_template(n, 0, m.n_c, m.n_fc, cfg.seed),
        TemplateKind::ConvDense => build_conv_dense_template(n, m.n_l, m.n_c, m.n_fc, cfg.seed),
        TemplateKind::Sparse => {
            let kind = m
                .structure
                .unwrap_or(StructuredMaskKind::LowerTriangular);
            let mask = structured_mask(kind, n)?;
            build_sparse_template(n, m.n_l, m.n_c, mask, None, cfg.seed)
        }
    }
}

fn cmd_train(mut cfg: RunConfig, args: TrainArgs) -> Result<()> {
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.reg_weight {
        cfg.train.reg_weight = v;
    }
    if let Some(text) = &args.template {
        cfg.model.template = match text.as_str() {
            "dense" => TemplateKind::Dense,
            "sparse" => TemplateKind::Sparse,
            "conv_dense" => TemplateKind::ConvDense,
            other => {
                return Err(Error::Config(format!(
                    "template must be dense, sparse, or conv_dense, got {other}"
                )))
            }
        };
    }
    if let Some(v) = args.n_l {
        cfg.model.n_l = v;
    }
    if let Some(v) = args.n_fc {
        cfg.model.n_fc = v;
    }
    if args.deterministic {
        cfg.train.deterministic = true;
    }
    if let Some(p) = args.checkpoint {
        cfg.paths.checkpoint = p;
    }
    cfg.train.seed = cfg.seed;
    cfg.validate()?;

    let (x_stats, y_stats) = load_stats(&cfg)?;
    let train_split = load_split(&cfg, Split::Train, &x_stats, &y_stats)?;
    let val_split = load_split(&cfg, Split::Val, &x_stats, &y_stats)?;
    let n = train_split.x_norm.ncols();
    let mut model = match &args.init_checkpoint {
        Some(path) => load_model(path)?,
        None => build_fresh_model(&cfg, n)?,
    };
    let history = train(
        &mut model,
        DataPair {
            x: &train_split.x_norm,
            y: &train_split.y_norm,
        },
        DataPair {
            x: &val_split.x_norm,
            y: &val_split.y_norm,
        },
        &cfg.train,
    )?;
    save_model(&mut model, &cfg.paths.checkpoint)?;
    if let Some(dir) = cfg.paths.history.parent() {
        std::fs::create_dir_all(dir)?;
    }
    history.write_csv(&cfg.paths.history)?;
    if let (Some(first), Some(last)) = (history.train_loss.first(), history.train_loss.last()) {
        println!(
            "trained {} epochs: loss {first:.6e} -> {last:.6e}",
            history.train_loss.len()
        );
    } else {
        println!("zero epochs requested: checkpoint equals initialization");
    }
    println!("wrote {}", cfg.paths.checkpoint.display());
    Ok(())
}

fn first_dense_layer(model: &Model) -> Result<&crate::nn::FcLayer> {
    model
        .layers
        .iter()
        .find_map(|l| match l {
            Layer::Fc(fc) if fc.mask.is_none() => Some(fc),
            _ => None,
        })
        .ok_or_else(|| Error::InvalidParam("model has no dense layer to analyze".into()))
}

fn cmd_analyze(mut cfg: RunConfig, args: AnalyzeArgs) -> Result<()> {
    if let Some(p) = args.checkpoint {
        cfg.paths.checkpoint = p;
    }
    let model = load_model(&cfg.paths.checkpoint)?;
    let fc = first_dense_layer(&model)?;
    let (mask, report) = sparsity_mask(&fc.w, args.ratio)?;
    if let Some(dir) = cfg.paths.mask.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_mask(&mask, &cfg.paths.mask)?;
    report.write_json(&cfg.paths.sparsity_report)?;
    println!(
        "threshold {:.6e}: {} weights survive ({:.1}% lower-triangular), fitted {:?}",
        report.threshold,
        report.nnz,
        100.0 * report.lower_fraction,
        report.fitted_structure(fc.w.nrows()),
    );
    Ok(())
}

fn cmd_build_sparse(mut cfg: RunConfig, args: BuildSparseArgs) -> Result<()> {
    if let Some(v) = args.n_l {
        cfg.model.n_l = v;
    }
    let dense_path = args
        .dense_checkpoint
        .unwrap_or_else(|| cfg.paths.checkpoint.clone());
    let dense = load_model(&dense_path)?;
    let fc = first_dense_layer(&dense)?;
    let n = fc.n_out();
    let mask = match cfg.model.structure {
        Some(kind) => structured_mask(kind, n)?,
        None => read_mask(&cfg.paths.mask)?,
    };
    let mut model = build_sparse_template(
        n,
        cfg.model.n_l,
        cfg.model.n_c,
        mask,
        Some((&fc.w, &fc.b)),
        cfg.seed,
    )?;
    let out = args
        .out_checkpoint
        .unwrap_or_else(|| cfg.paths.checkpoint.clone());
    save_model(&mut model, &out)?;
    println!(
        "built masked model ({} trainable parameters), wrote {}",
        model.param_count().trainable,
        out.display()
    );
    Ok(())
}

fn cmd_grow(mut cfg: RunConfig, args: GrowArgs) -> Result<()> {
    if let Some(p) = args.checkpoint {
        cfg.paths.checkpoint = p;
    }
    cfg.train.seed = cfg.seed;
    let mut model = load_model(&cfg.paths.checkpoint)?;
    let new_names = insert_bn_conv(&mut model, cfg.model.n_c, cfg.seed)?;
    let (x_stats, y_stats) = load_stats(&cfg)?;
    let train_split = load_split(&cfg, Split::Train, &x_stats, &y_stats)?;
    let val_split = load_split(&cfg, Split::Val, &x_stats, &y_stats)?;
    let plan = GrowthPlan {
        n_c: cfg.model.n_c,
        phase1_epochs: args.phase1.unwrap_or(cfg.train.epochs / 2),
        phase2_epochs: args.phase2.unwrap_or(cfg.train.epochs - cfg.train.epochs / 2),
    };
    let history = two_phase_train(
        &mut model,
        &new_names,
        DataPair {
            x: &train_split.x_norm,
            y: &train_split.y_norm,
        },
        DataPair {
            x: &val_split.x_norm,
            y: &val_split.y_norm,
        },
        &cfg.train,
        &plan,
    )?;
    save_model(&mut model, &cfg.paths.checkpoint)?;
    history.write_csv(&cfg.paths.history)?;
    println!(
        "grew and trained {}+{} epochs, wrote {}",
        plan.phase1_epochs,
        plan.phase2_epochs,
        cfg.paths.checkpoint.display()
    );
    Ok(())
}

fn cmd_eval(mut cfg: RunConfig, args: EvalArgs) -> Result<()> {
    if let Some(p) = args.checkpoint {
        cfg.paths.checkpoint = p;
    }
    if let Some(p) = args.report {
        cfg.paths.report = p;
    }
    let mut model = load_model(&cfg.paths.checkpoint)?;
    let (x_stats, y_stats) = load_stats(&cfg)?;
    let test_split = load_split(&cfg, Split::Test, &x_stats, &y_stats)?;
    let report = evaluate(
        &mut model,
        &test_split.x_raw,
        &test_split.y_raw,
        &x_stats,
        &y_stats,
        &format!("case{}", cfg.dataspace.case),
        &cfg.paths.checkpoint.display().to_string(),
    )?;
    if let Some(dir) = cfg.paths.report.parent() {
        std::fs::create_dir_all(dir)?;
    }
    report.write_json(&cfg.paths.report)?;
    report.write_per_sample_csv(&cfg.paths.report.with_extension("samples.csv"))?;
    println!(
        "mse {:.6e}, mean relative error {:.3}% over {} samples",
        report.mse, report.mean_rel_err_pct, report.n_test
    );
    Ok(())
}

fn cmd_predict(mut cfg: RunConfig, args: PredictArgs) -> Result<()> {
    if let Some(p) = args.checkpoint {
        cfg.paths.checkpoint = p;
    }
    if let Some(p) = args.output {
        cfg.paths.prediction = p;
    }
    let mut model = load_model(&cfg.paths.checkpoint)?;
    let (x_stats, y_stats) = load_stats(&cfg)?;
    let space = build_space(&cfg)?;
    let mut rng = crate::util::seeded_rng(args.sample_seed, &[0x7072_6564]);
    let unit: Vec<f64> = (0..space.n_dims()).map(|_| rng.random::<f64>()).collect();
    let load = draw_load_params(&space, &unit)?;
    let truth = solve_response(&space, &load)?;
    let y_true = match space.response {
        ResponseKind::Displacement => truth.displacement,
        ResponseKind::Acceleration => truth.acceleration,
    };
    let x_row = load.sample(&space.grid);
    let n = x_row.len();
    let x = Array2::from_shape_vec((1, n), x_row)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let pred = predict(&mut model, &x, &x_stats, &y_stats)?;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * space.grid.obs_step).collect();
    if let Some(dir) = cfg.paths.prediction.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_prediction_csv(
        &cfg.paths.prediction,
        &times,
        &y_true,
        pred.row(0).as_slice().expect("standard layout"),
    )?;
    println!("wrote {}", cfg.paths.prediction.display());
    Ok(())
}

/// Largest discrepancy between the closed-form solution and the Newmark
/// integration over `n_loads` random loads from the case's dataspace.
/// SDOF cases report (displacement, acceleration) max-abs differences;
/// MDOF cases report the percent relative error at the observed dof twice.
pub fn verify_case(cfg: &RunConfig, n_loads: usize) -> Result<(f64, f64)> {
    let space = build_space(cfg)?;
    let mut worst: f64 = 0.0;
    let mut worst_accel: f64 = 0.0;
    for i in 0..n_loads {
        let mut rng = crate::util::seeded_rng(cfg.seed, &[0x7665_7269, i as u64]);
        let unit: Vec<f64> = (0..space.n_dims()).map(|_| rng.random::<f64>()).collect();
        let load = draw_load_params(&space, &unit)?;
        match &space.system {
            SystemKind::Sdof(params) => {
                if params.cubic_coeff != 0.0 {
                    return Err(Error::InvalidParam(
                        "verification compares closed forms; pick a linear case".into(),
                    ));
                }
                let exact = sdof_linear_response(params, &load, &space.grid)?;
                let sys = SdofSystem::new(*params);
                let series = newmark_integrate(
                    &sys,
                    &|t| ndarray::Array1::from_elem(1, load.eval(t)),
                    &space.grid,
                )?
                .series(1)?;
                for k in 0..exact.displacement.len() {
                    worst = worst.max((exact.displacement[k] - series.displacement[k]).abs());
                    worst_accel =
                        worst_accel.max((exact.acceleration[k] - series.acceleration[k]).abs());
                }
            }
            SystemKind::Mdof(params) => {
                if params.cubic_coeff != 0.0 {
                    return Err(Error::InvalidParam(
                        "verification compares closed forms; pick a linear case".into(),
                    ));
                }
                let exact = mdof_linear_response(params, &load, &space.grid, space.response_dof)?;
                let sys = MdofSystem::new(*params)?;
                let loadc = load.clone();
                let sysref = &sys;
                let series = newmark_integrate(
                    &sys,
                    &move |t| sysref.ground_force(&loadc, t),
                    &space.grid,
                )?
                .series(space.response_dof)?;
                let rel = crate::eval::relative_error(&exact.displacement, &series.displacement)?;
                worst = worst.max(rel);
                worst_accel = worst_accel.max(rel);
            }
        }
    }
    Ok((worst, worst_accel))
}

fn cmd_verify(mut cfg: RunConfig, args: VerifyArgs) -> Result<()> {
    if let Some(case) = args.case {
        cfg.dataspace.case = case;
    }
    cfg.validate()?;
    let space = build_space(&cfg)?;
    match &space.system {
        SystemKind::Sdof(_) => {
            let (disp, accel) = verify_case(&cfg, 100)?;
            println!(
                "case {}: over 100 loads, max |closed form - integrator|: \
                 displacement {disp:.3e} m, acceleration {accel:.3e} m/s^2",
                cfg.dataspace.case
            );
            // The acceleration bound is set by the second-order step error of
            // the integrator at the 1e-3 s step, not by roundoff.
            if disp < 1e-4 && accel < 1e-2 {
                println!("PASS (displacement tol 1e-4, acceleration tol 1e-2)");
                Ok(())
            } else {
                Err(Error::InvalidParam(format!(
                    "discrepancy too large: displacement {disp:.3e}, acceleration {accel:.3e}"
                )))
            }
        }
        SystemKind::Mdof(_) => {
            let (rel, _) = verify_case(&cfg, 50)?;
            println!(
                "case {}: max relative error at dof {} over 50 loads: {rel:.4}%",
                cfg.dataspace.case, space.response_dof
            );
            if rel < 0.5 {
                println!("PASS (tolerance 0.5%)");
                Ok(())
            } else {
                Err(Error::InvalidParam(format!(
                    "relative error {rel:.4}% exceeds 0.5%"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        run_cli(std::iter::once("dynsurr").chain(args.iter().copied()))
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run(&["--help"]), 0);
    }

    #[test]
    fn unknown_flags_fail_fast() {
        assert_eq!(run(&["gen-data", "--definitely-not-a-flag"]), 2);
    }

    #[test]
    fn unknown_subcommand_fails() {
        assert_eq!(run(&["frobnicate"]), 2);
    }

    #[test]
    fn gen_data_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let d1 = dir.path().join("a");
        let d2 = dir.path().join("b");
        for d in [&d1, &d2] {
            let code = run(&[
                "gen-data",
                "--case",
                "1",
                "--n-train",
                "16",
                "--n-val",
                "4",
                "--n-test",
                "4",
                "--seed",
                "7",
                "--data-dir",
                d.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
        }
        for name in ["case1_train.nds", "case1_val.nds", "case1_test.nds"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn missing_dataset_gives_an_error_exit() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("c.json");
        let mut cfg = RunConfig::default();
        cfg.paths.data_dir = dir.path().join("nope");
        std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(run(&["train", "--config", cfg_path.to_str().unwrap()]), 1);
    }
}
