use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use psne::eval::{run_protocol, write_protocol_tsv, LabeledDataset, TrainOptions};
use psne::generate::{generate_ba, generate_er};
use psne::oracle::{audit_bounds, AuditOptions};
use psne::{embed_graph, load_edge_list, load_labels, EmbeddingMatrix, Graph, PsneConfig, PsneError, Scalar};

#[derive(Parser)]
#[command(name = "psne", version, about = "Sparsified personalized PageRank network embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed the nodes of an edge list.
    Embed(EmbedArgs),
    /// Check the sparsifier against dense ground truth.
    Audit(AuditArgs),
    /// Score an embedding with one-vs-all logistic regression.
    Classify(ClassifyArgs),
    /// Write a synthetic edge list.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, default_value_t = 0.35)]
    alpha: f64,
    /// Truncation order of the PPR series.
    #[arg(long, default_value_t = 10)]
    trunc: usize,
    /// Sample factor c; the sampler draws c·trunc·m paths.
    #[arg(long, default_value_t = 25.0)]
    samples_factor: f64,
    #[arg(long, default_value_t = 10.0)]
    mu: f64,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Skip the neighbor-perspective transform.
    #[arg(long)]
    no_mp: bool,
    /// Pattern-similarity samples kept per edge.
    #[arg(long, default_value_t = 8)]
    s_cap: u32,
    #[arg(long, default_value_t = 10)]
    oversample: usize,
    #[arg(long, default_value_t = 4)]
    power_iters: usize,
}

impl ConfigArgs {
    fn config(&self) -> PsneConfig {
        PsneConfig {
            alpha: self.alpha,
            trunc: self.trunc,
            samples_factor: self.samples_factor,
            mu: self.mu,
            dim: self.dim,
            seed: self.seed,
            threads: self.threads,
            s_cap: self.s_cap,
            oversample: self.oversample,
            power_iters: self.power_iters,
            multi_perspective: !self.no_mp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Binary,
}

#[derive(Args)]
struct EmbedArgs {
    /// Edge list: `u v [w]` per line.
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// Also write per-edge pattern weights as `u v weight`.
    #[arg(long)]
    dump_weights: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Sparsifier runs per sample factor.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 4.0, 16.0, 64.0])]
    sample_factors: Vec<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Embedding in TSV or binary form.
    embedding: PathBuf,
    /// Label file: `node label1 label2 ...` per line.
    labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    /// Step size; derived from the data when omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    model: Model,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Model {
    /// Erdős–Rényi G(n, p).
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Preferential attachment with `m` edges per new node.
    Ba {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Audit(String),
}

impl From<PsneError> for Failure {
    fn from(e: PsneError) -> Self {
        match e {
            PsneError::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn with_path<T>(path: &Path, r: psne::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Data(msg) => Failure::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_embed(args: &EmbedArgs) -> Result<(), Failure> {
    match args.precision {
        Precision::F64 => embed_as::<f64>(args),
        Precision::F32 => embed_as::<f32>(args),
    }
}

fn embed_as<T: Scalar>(args: &EmbedArgs) -> Result<(), Failure> {
    let cfg = args.cfg.config();
    cfg.validate(None)?;
    let g: Graph<T> = with_path(&args.input, load_edge_list(open(&args.input)?))?;
    let out = embed_graph(&g, &cfg)?;
    let mut dst = sink(args.output.as_deref())?;
    match args.format {
        Format::Tsv => out.embedding.write_tsv(&mut dst)?,
        Format::Binary => out.embedding.write_binary(&mut dst)?,
    }
    dst.flush()?;
    if let Some(path) = &args.dump_weights {
        let mut w = sink(Some(path))?;
        out.pattern_weights.write(&g, &mut w)?;
        w.flush()?;
    }
    eprint!("nodes={}\nedges={}\n{}", g.n(), g.m(), out.summary());
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<(), Failure> {
    let cfg = args.cfg.config();
    let g: Graph<f64> = with_path(&args.input, load_edge_list(open(&args.input)?))?;
    let opts = AuditOptions { runs: args.runs, sample_factors: args.sample_factors.clone() };
    let report = audit_bounds(&g, &cfg, &opts)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Audit(format!("{} audit check(s) failed", report.violations.len())))
    }
}

fn read_embedding(path: &Path) -> Result<EmbeddingMatrix<f64>, Failure> {
    let mut reader = open(path)?;
    let binary = reader.fill_buf()?.starts_with(b"PSNE");
    let parsed = if binary {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        EmbeddingMatrix::read_binary(bytes.as_slice())
    } else {
        EmbeddingMatrix::read_tsv(reader)
    };
    with_path(path, parsed)
}

fn cmd_classify(args: &ClassifyArgs) -> Result<(), Failure> {
    let embedding = read_embedding(&args.embedding)?;
    let labels = with_path(&args.labels, load_labels(open(&args.labels)?))?;
    let ds = LabeledDataset::new(&embedding, &labels)?;
    let opts = TrainOptions { l2: args.l2, epochs: args.epochs, lr: args.lr };
    let rows = run_protocol(&ds, &args.ratios, args.trials, args.seed, &opts)?;
    for r in &rows {
        let flagged: usize = r.trials.iter().map(|t| t.degenerate_labels).sum();
        if flagged > 0 {
            eprintln!("ratio {}: {flagged} label model(s) fell back to the constant prior", r.ratio);
        }
    }
    let mut dst = sink(args.output.as_deref())?;
    write_protocol_tsv(&rows, &mut dst)?;
    dst.flush()?;
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let g: Graph<f64> = match args.model {
        Model::Er { n, p, seed } => generate_er(n, p, seed)?,
        Model::Ba { n, m, seed } => generate_ba(n, m, seed)?,
    };
    let mut dst = sink(args.output.as_deref())?;
    g.write_edge_list(&mut dst)?;
    dst.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Audit(msg)) => {
            eprintln!("audit failed: {msg}");
            ExitCode::from(3)
        }
    }
}
