//! Command-line driver. Every command reads its inputs, computes a result and
//! returns it as text; `main` prints it and maps errors to exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bayes::{build_network, default_cpts, exact_posterior, BayesError};
use crate::kb::{load_kb, KbError, KnowledgeBase, Observation};
use crate::marker::{enumerate_paths_oracle, EngineConfig, OracleError};
use crate::path::{parse_observation, Path, PathError};
use crate::pipeline::{run, RunConfig, RunError};
use crate::scoring::score_path;
use crate::semantics::{relevant_subset, statements_of, SemanticsError};
use crate::sexpr::{self, SyntaxError};
use crate::synth::{synth_corpus, SynthParams};

#[derive(Debug, Parser)]
#[command(name = "markerpass", version, about = "Plan recognition by marker passing over a schema library")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a library and report its size, or the first problem found.
    Check(KbArgs),
    /// Recognise plans in an observation stream.
    Run(RunArgs),
    /// Spinal contribution of a path.
    Score(PathArgs),
    /// Statements a path asserts, and the relevant subset.
    Translate(PathArgs),
    /// The network a path induces.
    Network(NetArgs),
    /// Exact evaluation of a path's network.
    Eval(NetArgs),
    /// Every valid path between each pair of observations, by exhaustive search.
    Paths(PathsArgs),
    /// Write a synthetic library and observation streams.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct KbArgs {
    #[arg(long, value_name = "PATH")]
    pub kb: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long, value_name = "FLOAT", default_value_t = 30.0)]
    pub threshold: f64,
    #[arg(long, value_name = "FLOAT", default_value_t = 900.0)]
    pub full_threshold: f64,
    #[arg(long, value_name = "INT", default_value_t = 10)]
    pub max_depth: usize,
    #[arg(long, value_name = "FLOAT", default_value_t = 1000.0)]
    pub approval_ratio: f64,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig<f64> {
        EngineConfig {
            half_threshold: self.threshold,
            full_threshold: self.full_threshold,
            max_depth: self.max_depth,
            approval_ratio: self.approval_ratio,
        }
    }
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[arg(long, value_name = "FLOAT", default_value_t = 0.9)]
    pub gamma1: f64,
    #[arg(long, value_name = "FLOAT", default_value_t = 1e-6)]
    pub gamma0: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Observation stream; standard input if absent.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub gamma: GammaArgs,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Path in canonical syntax.
    #[arg(long, value_name = "TEXT")]
    pub path: String,
    /// Beliefs for the start and end observations, overriding the path text.
    #[arg(long, value_name = "B1,B2", value_delimiter = ',')]
    pub beliefs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    #[command(flatten)]
    pub path: PathArgs,
    #[command(flatten)]
    pub gamma: GammaArgs,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Observation stream; standard input if absent.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "INT", default_value_t = 10)]
    pub max_depth: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "INT", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_name = "INT", default_value_t = 5)]
    pub streams: usize,
    #[arg(long, value_name = "FLOAT", default_value_t = 1.0)]
    pub density: f64,
    /// Directory to write `library.kb` and `stream-N.obs` into; standard
    /// output if absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("knowledge base: {0}")]
    Kb(#[from] KbError),
    #[error("path: {0}")]
    Path(#[from] PathError),
    #[error("input: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("input: {0}")]
    Run(#[from] RunError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn read_input(path: &Option<PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) => read(p),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
            Ok(s)
        }
    }
}

fn kb(args: &KbArgs) -> Result<KnowledgeBase<f64>, CliError> {
    Ok(load_kb(&read(&args.kb)?)?)
}

fn path(kb: &KnowledgeBase<f64>, args: &PathArgs) -> Result<Path<f64>, CliError> {
    let p = Path::parse(kb, &args.path)?;
    let Some(b) = &args.beliefs else { return Ok(p) };
    if b.len() != 2 {
        return Err(CliError::Usage(format!("--beliefs takes two values, got {}", b.len())));
    }
    for &v in b {
        if !(v > 0.0 && v <= 1.0) {
            return Err(CliError::Usage(format!("belief {v} outside (0, 1]")));
        }
    }
    let start = Observation { belief: b[0], ..p.start().clone() };
    let end = Observation { belief: b[1], ..p.end().clone() };
    Ok(Path::new(start, p.links().to_vec(), end)?)
}

fn lines<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    items.into_iter().flat_map(|s| [s, "\n"]).collect()
}

fn check(args: &KbArgs) -> Result<String, CliError> {
    let kb = kb(args)?;
    Ok(format!("ok: {} schemas, {} role links\n", kb.len(), kb.roles().len()))
}

fn score(args: &PathArgs) -> Result<String, CliError> {
    let kb = kb(&args.kb)?;
    let p = path(&kb, args)?;
    Ok(format!("{}\n", score_path(&kb, &p)?.value()))
}

fn translate(args: &PathArgs) -> Result<String, CliError> {
    let kb = kb(&args.kb)?;
    let p = path(&kb, args)?;
    let s = statements_of(&p);
    let rs = relevant_subset(&s, &kb)?;
    let mut out = String::from("statements\n");
    out.push_str(&lines(s.statements().iter().map(|x| x.render(&kb)).collect::<Vec<_>>().iter().map(String::as_str)));
    out.push_str("relevant\n");
    out.push_str(&lines(rs.statements().iter().map(|x| x.render(&kb)).collect::<Vec<_>>().iter().map(String::as_str)));
    Ok(out)
}

fn network(args: &NetArgs, evaluate: bool) -> Result<String, CliError> {
    let kb = kb(&args.path.kb)?;
    let p = path(&kb, &args.path)?;
    let rs = relevant_subset(&statements_of(&p), &kb)?;
    let net = build_network(&kb, &p, &rs)?;
    let cpts = default_cpts(&net, args.gamma.gamma1, args.gamma.gamma0)?;
    if !evaluate {
        return Ok(net.dump(&kb, &cpts));
    }
    let post = exact_posterior(&net, &cpts)?;
    let sc = score_path(&kb, &p)?.value();
    Ok(format!(
        "sc {sc}\njoint {}\nresidual {}\ninterior {}\nplan-prior {}\n",
        post.joint,
        post.residual,
        post.interior,
        net.plan_prior()
    ))
}

fn paths(args: &PathsArgs) -> Result<String, CliError> {
    let kb = kb(&args.kb)?;
    let mut obs = Vec::new();
    for form in sexpr::read_all(&read_input(&args.input)?)? {
        if form.as_form()?.0 == "inst" {
            obs.push(parse_observation(&kb, &form)?);
        }
    }
    let mut out = String::new();
    for a in 0..obs.len() {
        for b in a + 1..obs.len() {
            for p in enumerate_paths_oracle(&kb, &obs[a], &obs[b], args.max_depth)? {
                out.push_str(&format!("sc={} {}\n", score_path(&kb, &p)?.value(), p.render(&kb)));
            }
        }
    }
    Ok(out)
}

fn synth(args: &SynthArgs) -> Result<String, CliError> {
    if !(0.0..=1.0).contains(&args.density) {
        return Err(CliError::Usage(format!("density {} outside [0, 1]", args.density)));
    }
    let params = SynthParams { streams: args.streams, corroboration: args.density, ..SynthParams::default() };
    let corpus = synth_corpus(args.seed, &params);
    let Some(dir) = &args.output else {
        let mut out = corpus.kb_text.clone();
        for (i, s) in corpus.streams.iter().enumerate() {
            out.push_str(&format!(";; stream {}\n{s}", i + 1));
        }
        return Ok(out);
    };
    let write = |name: String, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source })
    };
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    write("library.kb".into(), &corpus.kb_text)?;
    for (i, s) in corpus.streams.iter().enumerate() {
        write(format!("stream-{}.obs", i + 1), s)?;
    }
    Ok(String::new())
}

/// Runs one command and returns its output text and the file to write it to.
pub fn execute(cli: &Cli) -> Result<(String, Option<PathBuf>), CliError> {
    Ok(match &cli.command {
        Command::Check(a) => (check(a)?, a.output.clone()),
        Command::Run(a) => {
            let kb = kb(&a.kb)?;
            let config = RunConfig { engine: a.engine.config(), gamma1: a.gamma.gamma1, gamma0: a.gamma.gamma0 };
            (run(&kb, &config, &read_input(&a.input)?)?.to_jsonl(), a.kb.output.clone())
        }
        Command::Score(a) => (score(a)?, a.kb.output.clone()),
        Command::Translate(a) => (translate(a)?, a.kb.output.clone()),
        Command::Network(a) => (network(a, false)?, a.path.kb.output.clone()),
        Command::Eval(a) => (network(a, true)?, a.path.kb.output.clone()),
        Command::Paths(a) => (paths(a)?, a.kb.output.clone()),
        Command::Synth(a) => (synth(a)?, None),
    })
}

/// Parses `args`, runs the command and returns the process exit status:
/// 0 on success, 1 on domain errors, 2 on usage errors.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok((text, None)) => {
            let mut out = io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return 1;
            }
            0
        }
        Ok((text, Some(p))) => match fs::write(&p, text) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                1
            }
        },
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
