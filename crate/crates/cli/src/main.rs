//! `uaq`: solve, reduce, verify, generate and benchmark authorization query instances.
//!
//! Exit codes: 0 sat / valid / in class, 1 unsat / invalid / out of class / bench
//! disagreement, 2 usage, input or class error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use uaq_core::generators::{
    gen_mcb_k22, gen_mcb_nosod, gen_random, gen_rbds_type1, gen_rbds_type2, random_bipartite,
    random_blocked, BipartiteGraph, BipartiteInstance, RandomSpec,
};
use uaq_core::io::{read_instance, read_solution, serialize_instance, TreeDocument};
use uaq_core::reduce::{preprocess, reduction0};
use uaq_core::{run_engine, ClassParams, Engine, EngineError, EngineOptions, Instance, RepConfig};

#[derive(Parser)]
#[command(
    name = "uaq",
    version,
    about = "Exact solvers for the user authorization query problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write a solution document.
    Solve(SolveArgs),
    /// Run the reduction rules and dump the branch tree.
    Reduce(ReduceArgs),
    /// Check a solution document against an instance.
    Verify {
        instance: PathBuf,
        solution: PathBuf,
    },
    /// Generate an instance.
    Generate(GenerateArgs),
    /// Check membership in the K_{alpha,beta}-free class with bounded, disjoint constraints.
    CheckClass {
        instance: PathBuf,
        #[command(flatten)]
        class: ClassArgs,
    },
    /// Run several engines over every `*.uaq.json` in a directory and compare verdicts.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ClassArgs {
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    /// Largest allowed constraint width; defaults to the widest constraint present.
    #[arg(long)]
    max_constraint: Option<usize>,
}

impl ClassArgs {
    fn params(&self, inst: &Instance) -> anyhow::Result<Option<ClassParams>> {
        match (self.alpha, self.beta) {
            (Some(a), Some(b)) => {
                let widest = inst
                    .constraints()
                    .iter()
                    .map(|c| c.roles.len())
                    .max()
                    .unwrap_or(0);
                Ok(Some(ClassParams::new(
                    a,
                    b,
                    self.max_constraint.unwrap_or(widest.max(1)),
                )?))
            }
            (None, None) => Ok(None),
            _ => bail!("--alpha and --beta must be given together"),
        }
    }

    fn required(&self, inst: &Instance) -> anyhow::Result<ClassParams> {
        self.params(inst)?
            .ok_or_else(|| anyhow!("--alpha and --beta are required"))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RepFamArg {
    Exact,
    Truncated,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "fpt")]
    engine: Engine,
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long, value_enum, default_value = "exact")]
    repfam: RepFamArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write `wall_ms: 0` so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ReduceArgs {
    instance: PathBuf,
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rbds1,
    Rbds2,
    McbNosod,
    McbK22,
    Random,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Graph document (rbds: `{"a","b","edges"}`, mcb: `{"a_blocks","b_blocks","edges"}`) or,
    /// for `random`, a generator spec. Without it a random input is drawn from the flags below.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Dominating set size for rbds kinds.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Vertices per side (rbds) or blocks per side (mcb) of a random graph.
    #[arg(long, default_value_t = 4)]
    size: usize,
    /// Most vertices per block of a random blocked graph.
    #[arg(long, default_value_t = 3)]
    per_block: usize,
    /// Edge probability of a random graph.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Plant a multicolored biclique in a random blocked graph.
    #[arg(long)]
    plant: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    spec_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "brute,fpt")]
    engines: Vec<Engine>,
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Failure carrying its exit code.
struct Exit(u8, anyhow::Error);

trait ExitContext<T> {
    fn code(self, code: u8) -> Result<T, Exit>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Exit> {
        self.map_err(|e| Exit(code, e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Reduce(args) => reduce(args),
        Command::Verify { instance, solution } => verify(&instance, &solution),
        Command::Generate(args) => generate(args),
        Command::CheckClass { instance, class } => check_class(&instance, &class),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            // Library errors already embed their sources, so skip causes the message repeats.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(ToString::to_string) {
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Exit> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .code(3),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Instance, Exit> {
    read_instance(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(2)
}

fn solve(args: SolveArgs) -> Result<u8, Exit> {
    let inst = load(&args.instance)?;
    let params = args.class.params(&inst).code(2)?;
    let repfam = match args.repfam {
        RepFamArg::Exact => RepConfig::exact(),
        RepFamArg::Truncated => RepConfig::truncated(args.seed),
    };
    let opts = EngineOptions {
        params,
        repfam,
        threads: args.threads.max(1),
    };
    let mut run = match run_engine(&inst, args.engine, &opts) {
        Ok(run) => run,
        Err(EngineError::Refused(msg)) => {
            return Err(Exit(2, anyhow!("{} engine refused: {msg}", args.engine)))
        }
        Err(EngineError::Failed(msg)) => return Err(Exit(3, anyhow!(msg))),
    };
    if args.no_timing {
        run.wall_ms = 0;
    }
    eprintln!("leaves: {}, table cells: {}", run.leaves, run.table_cells);
    emit(
        &run.document(&inst, args.engine).to_json(),
        args.out.as_deref(),
    )?;
    Ok(if run.solution.is_some() { 0 } else { 1 })
}

fn reduce(args: ReduceArgs) -> Result<u8, Exit> {
    let inst = load(&args.instance)?;
    let params = args.class.required(&inst).code(2)?;
    let report = inst.check_class(&params);
    if !report.passes() {
        return Err(Exit(
            2,
            anyhow!("instance is outside the class: {}", report.summary()),
        ));
    }
    let tree = preprocess(&reduction0(&inst), &params).code(2)?;
    eprintln!("{} leaves", tree.leaves.len());
    emit(&TreeDocument::new(&tree).to_json(), args.out.as_deref())?;
    Ok(0)
}

fn verify(instance: &Path, solution: &Path) -> Result<u8, Exit> {
    let inst = load(instance)?;
    let doc = read_solution(solution)
        .with_context(|| format!("reading {}", solution.display()))
        .code(2)?;
    let Some(sol) = doc.to_solution(&inst).code(2)? else {
        eprintln!("solution document reports unsat; nothing to verify");
        return Ok(1);
    };
    let verdict = inst.verify_solution(&sol).code(2)?;
    for v in &verdict.violations {
        eprintln!("violation: {v}");
    }
    println!("{}", if verdict.ok { "valid" } else { "invalid" });
    Ok(if verdict.ok { 0 } else { 1 })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Exit> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(2)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .code(2)
}

fn generate(args: GenerateArgs) -> Result<u8, Exit> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let bipartite = |rng: &mut ChaCha8Rng| -> Result<BipartiteGraph, Exit> {
        match &args.input {
            Some(path) => {
                let g: BipartiteGraph = read_json(path)?;
                BipartiteGraph::new(g.a, g.b, g.edges).code(2)
            }
            None => Ok(random_bipartite(args.size, args.size, args.p, rng)),
        }
    };
    let blocked = |rng: &mut ChaCha8Rng| -> Result<BipartiteInstance, Exit> {
        match &args.input {
            Some(path) => {
                let g: BipartiteInstance = read_json(path)?;
                g.validate().code(2)?;
                Ok(g)
            }
            None => Ok(random_blocked(
                args.size,
                args.per_block,
                args.p,
                args.plant,
                rng,
            )),
        }
    };
    let inst = match args.kind {
        Kind::Rbds1 => gen_rbds_type1(&bipartite(&mut rng)?, args.k).code(2)?,
        Kind::Rbds2 => gen_rbds_type2(&bipartite(&mut rng)?, args.k).code(2)?,
        Kind::McbNosod => gen_mcb_nosod(&blocked(&mut rng)?).code(2)?,
        Kind::McbK22 => gen_mcb_k22(&blocked(&mut rng)?).code(2)?,
        Kind::Random => {
            let path = args
                .input
                .as_deref()
                .ok_or_else(|| Exit(2, anyhow!("random needs --input SPEC")))?;
            let mut spec: RandomSpec = read_json(path)?;
            if args.seed != 0 {
                spec.seed = args.seed;
            }
            gen_random(&spec).code(2)?.instance
        }
    };
    emit(&serialize_instance(&inst), args.out.as_deref())?;
    Ok(0)
}

fn check_class(instance: &Path, class: &ClassArgs) -> Result<u8, Exit> {
    let inst = load(instance)?;
    let params = class.required(&inst).code(2)?;
    let report = inst.check_class(&params);
    println!("{}", serde_json::to_string_pretty(&report).code(3)?);
    Ok(if report.passes() { 0 } else { 1 })
}

#[derive(Serialize)]
struct BenchRow {
    instance: String,
    engine: String,
    verdict: String,
    wall_ms: Option<u64>,
    leaves: Option<usize>,
    table_cells: Option<usize>,
}

fn bench(args: BenchArgs) -> Result<u8, Exit> {
    let mut files: Vec<PathBuf> = fs::read_dir(&args.spec_dir)
        .with_context(|| format!("listing {}", args.spec_dir.display()))
        .code(2)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".uaq.json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Exit(
            2,
            anyhow!("no *.uaq.json files in {}", args.spec_dir.display()),
        ));
    }

    let mut rows = Vec::new();
    let mut disagreements = 0;
    for path in &files {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let inst = load(path)?;
        let params = args.class.params(&inst).code(2)?;
        let opts = EngineOptions {
            params,
            repfam: RepConfig::exact(),
            threads: args.threads.max(1),
        };
        let mut verdicts = Vec::new();
        for &engine in &args.engines {
            let (verdict, run) = match run_with_timeout(&inst, engine, &opts, args.timeout_ms) {
                Some(Ok(run)) => {
                    let verdict = match &run.solution {
                        Some(sol) if !inst.verify_solution(sol).map(|v| v.ok).unwrap_or(false) => {
                            "invalid"
                        }
                        Some(_) => "sat",
                        None => "unsat",
                    };
                    (verdict, Some(run))
                }
                Some(Err(EngineError::Refused(msg))) => {
                    eprintln!("{name}: {engine} refused: {msg}");
                    ("refused", None)
                }
                Some(Err(EngineError::Failed(msg))) => {
                    eprintln!("{name}: {engine} failed: {msg}");
                    ("error", None)
                }
                None => ("timeout", None),
            };
            verdicts.push(verdict);
            rows.push(BenchRow {
                instance: name.clone(),
                engine: engine.to_string(),
                verdict: verdict.into(),
                wall_ms: run.as_ref().map(|r| r.wall_ms),
                leaves: run.as_ref().map(|r| r.leaves),
                table_cells: run.as_ref().map(|r| r.table_cells),
            });
        }
        let decided: Vec<&str> = verdicts
            .iter()
            .copied()
            .filter(|v| matches!(*v, "sat" | "unsat" | "invalid"))
            .collect();
        if decided.contains(&"invalid") || decided.windows(2).any(|w| w[0] != w[1]) {
            disagreements += 1;
        }
    }

    for r in &rows {
        let show = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        println!(
            "{:<32} {:<6} {:<8} {:>8} {:>6} {:>10}",
            r.instance,
            r.engine,
            r.verdict,
            r.wall_ms.map_or("-".to_string(), |x| x.to_string()),
            show(r.leaves),
            show(r.table_cells)
        );
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("writing {}", path.display()))
            .code(3)?;
        for r in &rows {
            w.serialize(r).code(3)?;
        }
        w.flush().code(3)?;
    }
    println!("disagreements: {disagreements}");
    Ok(if disagreements == 0 { 0 } else { 1 })
}

/// Runs the engine on a worker thread. `None` on timeout; the worker is abandoned and dies
/// with the process.
fn run_with_timeout(
    inst: &Instance,
    engine: Engine,
    opts: &EngineOptions,
    timeout_ms: Option<u64>,
) -> Option<Result<uaq_core::EngineRun, EngineError>> {
    let Some(ms) = timeout_ms else {
        return Some(run_engine(inst, engine, opts));
    };
    let (tx, rx) = mpsc::channel();
    let (inst, opts) = (inst.clone(), opts.clone());
    std::thread::spawn(move || {
        let _ = tx.send(run_engine(&inst, engine, &opts));
    });
    rx.recv_timeout(Duration::from_millis(ms)).ok()
}
