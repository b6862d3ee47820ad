mod args;

use anyhow::{bail, Context};
use args::{BenchArgs, Cli, Command, EvalArgs, TrainArgs, VerifyArgs};
use clap::Parser;
use specconv::autodiff::Tape;
use specconv::data::synth_separable_dataset;
use specconv::train::{accuracy, prepare, train_run, MetricsDocument, Model, RunMetrics};
use specconv::verify::{run_suite, Suite};
use specconv::{load_dataset, Checkpoint, Dataset, Purpose, Stream, TrainConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<specconv::Error> for Failure {
    fn from(e: specconv::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map_err(Failure::Run),
        Command::Verify(a) => cmd_verify(&a).map_err(Failure::Run),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

/// `model.sgcp` becomes `model-seed3.sgcp`.
fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-seed{seed}"),
    };
    path.with_file_name(name)
}

fn one_run(ds: &Dataset, config: &TrainConfig, checkpoint: Option<&Path>) -> anyhow::Result<RunMetrics> {
    let data = prepare(ds, config)?;
    let outcome = train_run(&data, config).with_context(|| format!("training seed {}", config.seed))?;
    if let Some(path) = checkpoint {
        Checkpoint::from_model(&outcome.model)?.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcome.metrics)
}

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let base = a.config().map_err(Failure::Usage)?;
    if a.runs == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--runs must be at least 1")));
    }
    let ds = load(&a.data)?;
    let start = Instant::now();
    let configs: Vec<TrainConfig> = (0..a.runs).map(|i| TrainConfig { seed: a.seed + i, ..base.clone() }).collect();
    let checkpoint =
        |seed: u64| a.checkpoint.as_ref().map(|p| if a.runs > 1 { seeded_path(p, seed) } else { p.clone() });
    let runs: Vec<RunMetrics> = if a.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| {
                    let ds = &ds;
                    let ck = checkpoint(c.seed);
                    scope.spawn(move || one_run(ds, c, ck.as_deref()))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect::<anyhow::Result<_>>()
        })?
    } else {
        configs
            .iter()
            .map(|c| {
                let metrics = one_run(&ds, c, checkpoint(c.seed).as_deref())?;
                eprintln!(
                    "seed {}: best val {:.4} at epoch {}, test {:.4}",
                    c.seed, metrics.best_val_accuracy, metrics.best_epoch, metrics.test_accuracy_at_best_val
                );
                Ok(metrics)
            })
            .collect::<anyhow::Result<_>>()?
    };
    let seconds = if a.no_timing { 0.0 } else { start.elapsed().as_secs_f64() };
    let name = a.data.file_stem().map(|s| s.to_string_lossy().into_owned());
    let doc = MetricsDocument::new(base, name, runs, seconds);
    if let Some(agg) = &doc.aggregate {
        println!("test accuracy {:.4} ± {:.4} over {} runs", agg.mean, agg.ci95, agg.runs);
    } else {
        println!("test accuracy {:.4}", doc.runs[0].test_accuracy_at_best_val);
    }
    let json = serde_json::to_string_pretty(&doc).context("serializing metrics")?;
    std::fs::write(&a.out, json + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("reading {}", a.checkpoint.display()))?;
    let meta = ck.meta()?;
    let c = &meta.config;
    if let Some(v) = a.model {
        if v != c.variant {
            bail!("--model {} but checkpoint holds {}", v.name(), c.variant.name());
        }
    }
    if let Some(b) = &a.basis {
        if b != c.basis.name() {
            bail!("--basis {b} but checkpoint holds {}", c.basis.name());
        }
    }
    if let Some(k) = a.k {
        if k != c.k {
            bail!("--K {k} but checkpoint was trained with K = {}", c.k);
        }
    }
    if let Some(g) = &a.graph_matrix {
        if g != c.graph_matrix.name() {
            bail!("--graph-matrix {g} but checkpoint holds {}", c.graph_matrix.name());
        }
    }
    let model = ck.to_model()?;
    let ds = load(&a.data)?;
    if ds.feat_dim != meta.in_dim || ds.num_classes != meta.out_dim {
        bail!(
            "dataset has {} features and {} classes; checkpoint expects {} and {}",
            ds.feat_dim,
            ds.num_classes,
            meta.in_dim,
            meta.out_dim
        );
    }
    let data = prepare(&ds, c)?;
    let logits = model.predict(&data.x, &data.s)?;
    let rows = data.split.indices(a.mask);
    let acc = accuracy(&logits, &data.labels, &rows)?;
    println!("{acc}");
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> anyhow::Result<()> {
    let suites = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite.clone() };
    let mut failed = 0;
    println!("{:<10} {:<34} {:>9} {:>10} {:>10}  result", "suite", "check", "instances", "measured", "tolerance");
    for suite in suites {
        for c in run_suite(suite, a.seed)? {
            if !c.passed {
                failed += 1;
            }
            println!(
                "{:<10} {:<34} {:>9} {:>10.2e} {:>10.0e}  {}",
                suite.name(),
                c.check,
                c.instances,
                c.measured,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
    }
    if failed > 0 {
        bail!("{failed} checks failed");
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let mut config = TrainConfig::default();
    a.model.apply(&mut config).map_err(Failure::Usage)?;
    config.validate().map_err(|e| Failure::Usage(e.into()))?;
    if a.reps == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--reps must be at least 1")));
    }
    let ds = match &a.data {
        Some(path) => load(path)?,
        None => synth_separable_dataset(a.nodes, 7, (28.0 / a.nodes as f64).min(1.0), 0).context("synthetic graph")?,
    };
    let data = prepare(&ds, &config)?;
    let model = Model::assemble(&config, data.x.cols(), data.num_classes, &mut Stream::substream(0, Purpose::Init))?;
    let rows = data.split.indices(specconv::train::MaskKind::Train);
    println!(
        "n = {}, nnz(S) = {}, features = {}, {} / {} / K = {}",
        ds.n,
        data.s.nnz(),
        data.x.cols(),
        config.variant.name(),
        config.basis.name(),
        config.k
    );

    let time = |label: &str, f: &mut dyn FnMut() -> anyhow::Result<()>| -> anyhow::Result<()> {
        f()?;
        let start = Instant::now();
        for _ in 0..a.reps {
            f()?;
        }
        let per = start.elapsed().as_secs_f64() / a.reps as f64;
        println!("{label:<18} {:>10.3} ms", per * 1e3);
        Ok(())
    };
    time("forward", &mut || {
        model.predict(&data.x, &data.s)?;
        Ok(())
    })?;
    time("forward+backward", &mut || {
        let mut tape = Tape::new();
        let out = model.record(&mut tape, &data.x, &data.s)?;
        let lp = tape.log_softmax(out);
        let loss = tape.masked_nll(lp, &data.labels, &rows)?;
        tape.backward(loss)?;
        Ok(())
    })?;
    Ok(())
}
