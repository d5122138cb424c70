use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cogol_core::benchmark::{run_benchmark, BenchmarkConfig, RAW_HEADER};
use cogol_core::data::{load_csv, SyntheticKind, SyntheticSpec};
use cogol_core::eval::{comparison_csv, comparison_table, paired_comparison, read_comparison_csv};
use cogol_core::kernel::gamma_range;
use cogol_core::optimizer::TraceRecord;
use cogol_core::serialize::{load_model, save_model};
use cogol_core::tuning::{trial_table_csv, TrialStatus};
use cogol_core::{
    evaluate, fit, fit_kernel, make_synthetic, tune, Dataset, EvalReport, KernelKind, KernelSpec,
    Mode, PenaltySpec, SearchSpace, TuneConfig,
};
use serde_json::json;

use crate::manifest::Recorder;
use crate::{
    BenchmarkArgs, Command, CompareArgs, Failure, GridArgs, PredictArgs, SynthArgs, SynthKind,
    TrainArgs, TuneArgs,
};

pub fn run(command: Command, argv: &[String]) -> Result<(), Failure> {
    match command {
        Command::Train(a) => train(a, argv),
        Command::Predict(a) => predict(a, argv),
        Command::Tune(a) => tune_cmd(a, argv),
        Command::Benchmark(a) => benchmark(a, argv),
        Command::Compare(a) => compare(a),
        Command::Synth(a) => synth(a, argv),
        Command::Grid(a) => grid(a, argv),
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    let csv = load_csv(path)?;
    for w in &csv.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(csv.dataset)
}

fn metrics_row(out: &mut String, set: &str, r: &EvalReport) {
    let _ = write!(out, "{set},{},{},{},{}", r.n, r.mae, r.mse, r.accuracy);
}

/// Geometric centre of the heuristic bandwidth range.
fn default_gamma(data: &Dataset) -> Result<f64, Failure> {
    let (lo, hi) = gamma_range(data.features(), data.k())?;
    Ok((lo * hi).sqrt())
}

fn train(a: TrainArgs, argv: &[String]) -> Result<(), Failure> {
    let data = load(&a.data)?;
    let mode = Mode::from(a.mode);
    let beta = match mode {
        Mode::Ol => f64::INFINITY,
        Mode::Gol => 0.0,
        Mode::CoGol => a.beta,
    };
    let mut spec = cogol_core::FitSpec::new(mode, PenaltySpec::new(a.alpha, beta)?)
        .with_seed(a.seed)
        .with_trace(a.trace);
    spec.max_iters = a.max_iters;

    let mut rec = Recorder::start("train", argv, &a.out)?;
    rec.dataset(&a.data);
    rec.seed(a.seed);

    let (model, report, gamma) = match a.kernel.map(KernelKind::from) {
        None => {
            let (m, r) = fit(&data, &spec)?;
            (m, r, None)
        }
        Some(kind) => {
            let gamma = match (kind, a.gamma) {
                (KernelKind::Rbf, None) => default_gamma(&data)?,
                (_, g) => g.unwrap_or(0.0),
            };
            let kspec = KernelSpec::new(kind, gamma, data.features().clone())?;
            let (m, r) = fit_kernel(&data, &spec, &kspec)?;
            (
                m.into_model(),
                r,
                (kind == KernelKind::Rbf).then_some(gamma),
            )
        }
    };
    rec.params(json!({
        "mode": mode.as_str(),
        "alpha": a.alpha,
        "beta": if beta.is_finite() { json!(beta) } else { json!("inf") },
        "kernel": a.kernel.map(|k| format!("{k:?}").to_lowercase()),
        "gamma": gamma,
        "max_iters": a.max_iters,
        "grad_tol": spec.grad_tol,
    }));

    let model_path = a.out.join("model.json");
    save_model(&model, &model_path)?;
    rec.output(&model_path);

    let preds = model.predict_dataset(&data)?;
    let eval = evaluate(&preds, data.labels())?;
    let mut metrics =
        String::from("set,n,mae,mse,accuracy,objective,iterations,converged,grad_norm\n");
    metrics_row(&mut metrics, "train", &eval);
    let _ = writeln!(
        metrics,
        ",{},{},{},{}",
        report.final_objective, report.iterations, report.converged, report.grad_norm
    );
    rec.write("metrics.csv", &metrics)?;
    if a.trace {
        let mut t = String::from(TraceRecord::HEADER);
        t.push('\n');
        for r in &report.trace {
            let _ = writeln!(t, "{r}");
        }
        rec.write("trace.tsv", &t)?;
    }
    rec.finish()?;

    println!("mode            {mode}");
    println!("final_objective {:.12}", report.final_objective);
    println!("iterations      {}", report.iterations);
    println!("converged       {}", report.converged);
    println!("grad_norm       {:.3e}", report.grad_norm);
    println!("train_mae       {:.6}", eval.mae);
    println!("model           {}", model_path.display());
    Ok(())
}

fn predict(a: PredictArgs, argv: &[String]) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let data = load(&a.data)?;
    let preds = model.predict_dataset(&data)?;
    let eval = evaluate(&preds, data.labels())?;

    let mut rec = Recorder::start("predict", argv, &a.out)?;
    rec.dataset(&a.data);
    rec.params(json!({ "model": a.model.display().to_string() }));
    let mut out = String::from("row,pred,label\n");
    for (i, (p, y)) in preds.iter().zip(data.labels()).enumerate() {
        let _ = writeln!(out, "{i},{p},{y}");
    }
    rec.write("predictions.csv", &out)?;
    let mut metrics = String::from("set,n,mae,mse,accuracy\n");
    metrics_row(&mut metrics, "data", &eval);
    metrics.push('\n');
    rec.write("metrics.csv", &metrics)?;
    rec.finish()?;
    println!(
        "n {}  mae {:.6}  mse {:.6}  accuracy {:.6}",
        eval.n, eval.mae, eval.mse, eval.accuracy
    );
    Ok(())
}

fn search_space(
    kernel: Option<KernelKind>,
    trials: Option<usize>,
    gamma: Option<f64>,
) -> SearchSpace {
    let mut space = if kernel.is_some() {
        SearchSpace::kernel()
    } else {
        SearchSpace::linear()
    };
    if let Some(t) = trials {
        space.trials = t;
    }
    space.gamma_range = gamma.map(|g| (g, g));
    space
}

fn tune_cmd(a: TuneArgs, argv: &[String]) -> Result<(), Failure> {
    let data = load(&a.data)?;
    let mode = Mode::from(a.mode);
    let kernel = a.kernel.map(KernelKind::from);
    let mut config = TuneConfig::new(mode, search_space(kernel, a.trials, a.gamma), a.seed);
    config.folds = a.folds;
    config.kernel = kernel;
    let result = tune(&data, &config)?;

    let mut rec = Recorder::start("tune", argv, &a.out)?;
    rec.dataset(&a.data);
    rec.seed(a.seed);
    rec.params(json!({
        "mode": mode.as_str(),
        "folds": a.folds,
        "trials": config.space.trials,
        "kernel": a.kernel.map(|k| format!("{k:?}").to_lowercase()),
        "alpha_range": config.space.alpha_range,
        "beta_range": config.space.beta_range,
        "gamma_range": config.space.gamma_range,
    }));
    rec.write("trials.csv", &trial_table_csv(&result.trials))?;
    let best = &result.trials[result.best_index];
    let best_json = json!({
        "trial": result.best_index,
        "alpha": result.best.alpha,
        "beta": if result.best.beta.is_finite() { json!(result.best.beta) } else { json!("inf") },
        "gamma": result.best.gamma,
        "cv_mae": best.cv_mae,
        "cv_mse": best.cv_mse,
        "cv_acc": best.cv_acc,
    });
    rec.write(
        "best.json",
        &(serde_json::to_string_pretty(&best_json).expect("json") + "\n"),
    )?;
    rec.finish()?;

    let failed = result
        .trials
        .iter()
        .filter(|t| matches!(t.status, TrialStatus::Failed(_)))
        .count();
    println!(
        "best trial {} of {}: alpha {:.4e}  beta {:.4e}{}  cv_mae {:.6}",
        result.best_index,
        result.trials.len(),
        result.best.alpha,
        result.best.beta,
        result
            .best
            .gamma
            .map(|g| format!("  gamma {g:.4e}"))
            .unwrap_or_default(),
        best.cv_mae
    );
    if failed > 0 {
        eprintln!("warning: {failed} trial(s) failed; see trials.csv");
    }
    Ok(())
}

fn benchmark_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries =
        fs::read_dir(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::usage(format!("{}: no .csv files", path.display())));
    }
    Ok(files)
}

fn benchmark(a: BenchmarkArgs, argv: &[String]) -> Result<(), Failure> {
    let files = benchmark_files(&a.data)?;
    let kernel = a.kernel.map(KernelKind::from);
    let mut config = BenchmarkConfig::new(a.seed);
    config.modes = a.modes.iter().copied().map(Mode::from).collect();
    config.modes.dedup();
    config.replications = a.reps;
    config.folds = a.folds;
    config.kernel = kernel;
    config.space = search_space(kernel, a.trials, None);
    let baseline = Mode::from(a.baseline);

    let mut rec = Recorder::start("benchmark", argv, &a.out)?;
    rec.seed(a.seed);
    rec.params(serde_json::to_value(&config).map_err(|e| Failure::internal(e.to_string()))?);

    let mut raw = format!("{RAW_HEADER}\n");
    let mut summary = Vec::new();
    let mut failures = String::new();
    for file in &files {
        rec.dataset(file);
        let name = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let outcome = load(file).and_then(|data| {
            let result = run_benchmark(&name, &data, &config)?;
            let rows = result.summary(baseline)?;
            Ok((result, rows))
        });
        match outcome {
            Ok((result, rows)) => {
                raw.push_str(&result.raw_csv(false));
                summary.extend(rows);
                eprintln!("done: {name}");
            }
            Err(f) => {
                eprintln!("failed: {name}: {}", f.message);
                let _ = writeln!(failures, "{name}: {}", f.message.replace('\n', " "));
            }
        }
    }
    rec.write("raw.csv", &raw)?;
    rec.write("summary.csv", &comparison_csv(&summary))?;
    let table = comparison_table(&summary);
    rec.write("summary.txt", &table)?;
    if !failures.is_empty() {
        rec.write("failures.txt", &failures)?;
    }
    rec.finish()?;
    print!("{table}");
    if summary.is_empty() {
        return Err(Failure::internal("every dataset failed; see failures.txt"));
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let ra = read_comparison_csv(&a.a)?;
    let rb = read_comparison_csv(&a.b)?;
    let c = paired_comparison(
        &ra,
        &rb,
        &a.metric,
        a.model_a.as_deref(),
        a.model_b.as_deref(),
    )?;
    let t = &c.test;
    let direction = match t.direction() {
        1 => "A > B",
        -1 => "A < B",
        _ => "A = B",
    };
    println!("metric     {}", c.metric);
    println!(
        "pairs      {} ({} non-zero)",
        c.datasets.len(),
        t.n_effective
    );
    println!("W          {}", t.statistic);
    println!("W+         {}", t.w_plus);
    println!("p          {:.6e}", t.p_value);
    println!("method     {:?}", t.method);
    println!("direction  {direction}");
    Ok(())
}

fn synth(a: SynthArgs, argv: &[String]) -> Result<(), Failure> {
    let kind = match a.kind {
        SynthKind::ParallelBands => SyntheticKind::ParallelBands,
        SynthKind::RotatingBoundaries => SyntheticKind::RotatingBoundaries {
            total_angle_deg: a.angle,
        },
        SynthKind::ConcentricRings => SyntheticKind::ConcentricRings,
    };
    let spec = SyntheticSpec::new(kind, a.n, a.k, a.noise, a.seed).with_dim(a.p);
    let synthetic = make_synthetic(&spec)?;
    let mut rec = Recorder::start("synth", argv, &a.out)?;
    rec.seed(a.seed);
    rec.params(serde_json::to_value(spec).map_err(|e| Failure::internal(e.to_string()))?);
    let name = a.name.unwrap_or_else(|| kind.name().to_string());
    let path = a.out.join(format!("{name}.csv"));
    let sidecar = synthetic.export(&path)?;
    rec.output(&path);
    rec.output(&sidecar);
    rec.finish()?;
    println!("{}", path.display());
    Ok(())
}

fn grid(a: GridArgs, argv: &[String]) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let p = model
        .kernel()
        .map_or(model.p(), |k| k.support_points().ncols());
    if p != 2 {
        return Err(Failure::usage(format!(
            "grid needs a 2-feature model, got {p}"
        )));
    }
    if a.steps < 2 {
        return Err(Failure::usage("--steps must be at least 2"));
    }
    let mut rec = Recorder::start("grid", argv, &a.out)?;
    let bounds = match &a.data {
        Some(path) => {
            rec.dataset(path);
            let data = load(path)?;
            let x = data.features();
            let mut b = [(0.0, 0.0); 2];
            for (c, bc) in b.iter_mut().enumerate() {
                let col = x.column(c);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let pad = 0.1 * (hi - lo).max(1e-9);
                *bc = (lo - pad, hi + pad);
            }
            b
        }
        None => {
            if !(a.lo < a.hi) {
                return Err(Failure::usage("--lo must be below --hi"));
            }
            [(a.lo, a.hi); 2]
        }
    };
    rec.params(
        json!({ "model": a.model.display().to_string(), "bounds": bounds, "steps": a.steps }),
    );
    let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (a.steps - 1) as f64;
    let mut out = String::from("x1,x2,pred\n");
    for i in 0..a.steps {
        for j in 0..a.steps {
            let (x1, x2) = (at(bounds[0], i), at(bounds[1], j));
            let _ = writeln!(out, "{x1},{x2},{}", model.predict(&[x1, x2])?);
        }
    }
    rec.write("grid.csv", &out)?;
    rec.finish()?;
    Ok(())
}
