//! `lutnet`: train, compile and run lookup-table networks.

mod data;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lutnet::format::sections;
use lutnet::train::{evaluate, train_loop, MetricsRow};
use lutnet::{
    compile_model, conformance, estimate_storage, forward_int, load_model, save_model,
    ActivationKind, Checkpoint, ClusterConfig, ClusterMethod, CompileOptions, Error,
    IndexEncoding, LrSchedule, LutModel, LutOutput, ModelFile, Task, TrainConfig,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "lutnet", version, about = "Quantized networks with multiplication-free inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write a checkpoint.
    Train(TrainArgs),
    /// Compile a clustered checkpoint into an integer lookup-table model.
    Compile(CompileArgs),
    /// Run the integer engine, one JSON object per input line.
    Infer(InferArgs),
    /// Score a checkpoint or compiled model on the task's test split.
    Eval(EvalArgs),
    /// Describe a model file.
    Inspect(InspectArgs),
    /// Compare the integer engine with the float reference.
    Conformance(ConformanceArgs),
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long, default_value = "mnist")]
    task: Task,
    /// Directory with the MNIST IDX files (mnist), or with MNIST files or
    /// PNG/PGM images (autoenc).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value = "tanhd")]
    activation: ActivationKind,
    /// Activation levels; 0 trains the smooth float baseline.
    #[arg(long, default_value_t = 32)]
    levels: usize,
    /// Codebook size; omit to train without weight clustering.
    #[arg(long)]
    weights: Option<usize>,
    #[arg(long, default_value = "kmeans")]
    cluster_method: ClusterMethod,
    #[arg(long, default_value_t = 1000)]
    cluster_every: usize,
    /// Fraction of parameters the clusterer sees.
    #[arg(long, default_value_t = 1.0)]
    subsample: f64,
    /// Comma-separated hidden widths; defaults depend on the task.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Input quantization levels; defaults depend on the task.
    #[arg(long)]
    input_levels: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Constant learning rate, replacing the task's schedule.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    eval_every: usize,
    /// Metrics CSV destination; stdout when omitted.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value = "raw")]
    encoding: IndexEncoding,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    acc_bits: u32,
    #[arg(long, default_value_t = 8)]
    guard_bits: u32,
    /// Activation index table length; eight bins per level by default.
    #[arg(long)]
    table_len: Option<usize>,
    #[arg(long, default_value = "raw")]
    encoding: IndexEncoding,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV of raw inputs, one sample per line; `-` reads stdin. Without it
    /// the task's test split is used.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Print the section table as CSV instead of a summary.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ConformanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 1000)]
    limit: usize,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Data { .. } | Error::Io(_) | Error::ShapeMismatch { .. } => EXIT_DATA,
            _ => EXIT_INVARIANT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Compile(a) => compile(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Inspect(a) => inspect(a),
        Command::Conformance(a) => run_conformance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lutnet: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn train(a: TrainArgs) -> CliResult {
    let task = a.task.task;
    let (train_set, test_set) = data::load(task, a.task.data.as_deref(), a.task.seed)?;
    let hidden = a.hidden.clone().unwrap_or_else(|| task.default_hidden());
    let levels = (a.levels > 0).then_some(a.levels);
    let input_levels = a.input_levels.unwrap_or_else(|| task.default_input_levels());
    let net = task.network(&hidden, a.activation, levels, input_levels, a.task.seed)?;
    let clustering = a.weights.map(|size| ClusterConfig {
        every: a.cluster_every,
        subsample: a.subsample,
        ..ClusterConfig::new(a.cluster_method, size)
    });
    let config = TrainConfig {
        lr: a.lr.map_or_else(|| task.default_schedule(), LrSchedule::constant),
        batch_size: a.batch,
        steps: a.steps.unwrap_or_else(|| task.default_steps()),
        clustering,
        eval_every: a.eval_every,
        seed: a.task.seed,
        ..TrainConfig::default()
    };
    let out = train_loop(net, &train_set, Some(&test_set), &config)?;

    let mut sink: Box<dyn Write> = match &a.metrics {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(sink, "{}", MetricsRow::CSV_HEADER)?;
    for row in &out.history {
        writeln!(sink, "{}", row.to_csv())?;
    }
    sink.flush()?;

    let ckpt = Checkpoint {
        net: out.net,
        codebook: out.codebook,
    };
    save_model(&ModelFile::Checkpoint(ckpt), &a.out, a.encoding)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn compile(a: CompileArgs) -> CliResult {
    let ModelFile::Checkpoint(ckpt) = load_model(&a.model)? else {
        return Err(fail(EXIT_USAGE, "model is already compiled"));
    };
    let Some(codebook) = ckpt.codebook.as_ref() else {
        return Err(fail(
            EXIT_INVARIANT,
            "checkpoint has no weight codebook; train with --weights",
        ));
    };
    let options = CompileOptions {
        table_len: a.table_len,
        acc_bits: a.acc_bits,
        guard_bits: a.guard_bits,
    };
    let model = compile_model(&ckpt.net, codebook, &options)?;
    save_model(&ModelFile::Compiled(model.clone()), &a.out, a.encoding)?;
    eprintln!(
        "wrote {}: A={} |W|={} s={}",
        a.out.display(),
        model.levels_count(),
        model.codebook_len(),
        model.s
    );
    Ok(())
}

fn load_compiled(path: &PathBuf) -> std::result::Result<LutModel, Failure> {
    match load_model(path)? {
        ModelFile::Compiled(m) => Ok(m),
        ModelFile::Checkpoint(_) => Err(fail(EXIT_USAGE, "expected a compiled model; run `lutnet compile` first")),
    }
}

/// Row-major test inputs, truncated to `limit` samples.
fn test_inputs(task: &TaskArgs, limit: Option<usize>) -> std::result::Result<(usize, Vec<f64>), Failure> {
    let (_, test) = data::load(task.task, task.data.as_deref(), task.seed)?;
    let test = match limit {
        Some(n) => test.head(n),
        None => test,
    };
    Ok((test.dim, test.inputs))
}

fn infer(a: InferArgs) -> CliResult {
    let model = load_compiled(&a.model)?;
    let dim = model.layers.first().map_or(0, |l| l.in_dim);
    let inputs = match &a.input {
        Some(path) => data::read_csv(path, dim)?,
        None => test_inputs(&a.task, None)?.1,
    };
    let limit = a.limit.unwrap_or(usize::MAX);
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, raw) in inputs.chunks_exact(dim.max(1)).take(limit).enumerate() {
        let rows = model.quantize_input(raw)?;
        let line = match forward_int(&model, &rows)? {
            LutOutput::Class { class, sums } => serde_json::json!({ "index": i, "class": class, "sums": sums }),
            LutOutput::Fixed { sums, shift } => {
                let unit = model.output_unit();
                let values: Vec<f64> = sums.iter().map(|&s| s as f64 * unit).collect();
                serde_json::json!({ "index": i, "outputs": values, "sums": sums, "shift": shift })
            }
        };
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let (_, test) = data::load(a.task.task, a.task.data.as_deref(), a.task.seed)?;
    let test = match a.limit {
        Some(n) => test.head(n),
        None => test,
    };
    match load_model(&a.model)? {
        ModelFile::Checkpoint(ckpt) => {
            let m = evaluate(&ckpt.net, &test)?;
            match m.accuracy {
                Some(acc) => println!("accuracy {acc:.6} over {} samples (float)", m.count),
                None => println!("mse {:.6e} over {} samples (float)", m.value(), m.count),
            }
        }
        ModelFile::Compiled(model) => {
            let unit = model.output_unit();
            let (mut hits, mut sq) = (0usize, 0.0);
            for i in 0..test.len() {
                let rows = model.quantize_input(test.input(i))?;
                match (forward_int(&model, &rows)?, &test.targets) {
                    (LutOutput::Class { class, .. }, lutnet::data::DatasetTargets::Labels { labels, .. }) => {
                        hits += usize::from(class == labels[i]);
                    }
                    (LutOutput::Fixed { sums, .. }, lutnet::data::DatasetTargets::Values { dim, values }) => {
                        sq += sums
                            .iter()
                            .zip(&values[i * dim..(i + 1) * dim])
                            .map(|(&s, t)| (s as f64 * unit - t).powi(2))
                            .sum::<f64>();
                    }
                    _ => return Err(fail(EXIT_DATA, "model head does not match the task")),
                }
            }
            let n = test.len().max(1) as f64;
            match model.head {
                lutnet::LutHead::ArgmaxClassifier => {
                    println!("accuracy {:.6} over {} samples (integer)", hits as f64 / n, test.len())
                }
                lutnet::LutHead::FixedPointRegression => {
                    println!("mse {:.6e} over {} samples (integer)", sq / n, test.len())
                }
            }
        }
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> CliResult {
    let bytes = std::fs::read(&a.model)?;
    let (kind, table) = sections(&bytes)?;
    if a.csv {
        println!("section,id,offset,len");
        for s in &table {
            println!("{:?},{},{},{}", s.id, s.id as u16, s.offset, s.len);
        }
        return Ok(());
    }
    let model = lutnet::format::from_bytes(&bytes)?;
    println!("file {} ({} bytes)", a.model.display(), bytes.len());
    match model {
        ModelFile::Checkpoint(ckpt) => {
            let net = &ckpt.net;
            println!("kind checkpoint");
            println!("dims {:?}", net.dims());
            println!("hidden activation {}", describe_activation(&net.layers[0].activation));
            println!("parameters {}", net.parameter_count());
            println!("distinct parameter values {}", net.distinct_parameters());
            match &ckpt.codebook {
                Some(cb) => println!("codebook {} centers ({:?})", cb.len(), cb.method()),
                None => println!("codebook none"),
            }
        }
        ModelFile::Compiled(model) => {
            let mut dims = vec![model.layers.first().map_or(0, |l| l.in_dim)];
            dims.extend(model.layers.iter().map(|l| l.out_dim));
            println!("kind compiled (code {kind})");
            println!("dims {dims:?}");
            println!("levels A={} codebook |W|={} ({:?})", model.levels_count(), model.codebook_len(), model.codebook_method);
            println!("scale s={} dx={:e} acc_bits={} guard_bits={}", model.s, model.dx, model.acc_bits, model.guard_bits);
            println!("head {:?}", model.head);
            for enc in [IndexEncoding::Raw, IndexEncoding::Huffman] {
                let r = estimate_storage(&model, enc)?;
                println!(
                    "storage {:?}: total {} B (index {} B at {:.3} bits/index, tables {} B, header {} B), \
                     {:.3}x float32, entropy {:.3} bits",
                    enc,
                    r.total_bytes,
                    r.index_bytes,
                    r.bits_per_index,
                    r.table_bytes,
                    r.header_bytes,
                    r.ratio_vs_float32,
                    r.entropy_bits
                );
            }
        }
    }
    for s in &table {
        println!("section {:?} offset {} len {}", s.id, s.offset, s.len);
    }
    Ok(())
}

fn describe_activation(a: &lutnet::Activation) -> String {
    match a.spec() {
        Some(spec) => format!("{}({})", spec.kind().name(), spec.levels_count()),
        None => format!("{} (smooth)", a.kind().name()),
    }
}

fn run_conformance(a: ConformanceArgs) -> CliResult {
    let model = load_compiled(&a.model)?;
    let (_, inputs) = test_inputs(&a.task, Some(a.limit))?;
    let r = conformance(&model, &inputs)?;
    println!("samples {}", r.samples);
    println!("unit agreement {:.6} ({} of {})", r.unit_agreement(), r.unit_agreements, r.units);
    println!("max level deviation {}", r.max_deviation);
    println!("out-of-band disagreements {}", r.out_of_band);
    match model.head {
        lutnet::LutHead::ArgmaxClassifier => println!("argmax agreement {:.6}", r.argmax_agreement()),
        lutnet::LutHead::FixedPointRegression => println!("max output error {:e}", r.max_output_error),
    }
    if r.out_of_band > 0 {
        return Err(fail(
            EXIT_INVARIANT,
            format!("{} disagreements outside the rounding band", r.out_of_band),
        ));
    }
    Ok(())
}
