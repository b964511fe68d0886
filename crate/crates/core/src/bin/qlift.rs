use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::json;

use qlift::bounds::{BoundReport, Bounds, BoundsError, ExactValue, Params, TheoremTag};
use qlift::relations::{
    evaluate_predicate, p_of_r_closed_form, p_of_r_exact, GameFile, GameParameters, GameSpec, Oracle,
    OracleTable, OutputTuple, RelationError,
};
use qlift::statevec::{run_circuit, Backend, Circuit, Mode, RunOptions, StateError};
use qlift::verify::{write_csv, Manifest, VerifyError, Verdict};
use qlift::{format_rational, parse_rational};

#[derive(Parser)]
#[command(name = "qlift", version, about = "Lifting bounds for hybrid and noisy query algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every bound that applies to the given parameters.
    Bound(BoundArgs),
    /// Evaluate p(R) for a game, in closed form and by enumeration.
    #[command(name = "p-of-r")]
    POfR(POfRArgs),
    /// Run a circuit against one oracle and print its output distribution.
    Simulate(SimulateArgs),
    /// Run an experiment manifest and write the per-cell CSV.
    Verify(VerifyArgs),
    /// Tabulate one quantity over a parameter range as CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GameKind {
    MultiImage,
    MultiSearch,
    MultiCollision,
    ThreeSum,
}

impl GameKind {
    fn as_str(self) -> &'static str {
        match self {
            GameKind::MultiImage => "multi-image",
            GameKind::MultiSearch => "multi-search",
            GameKind::MultiCollision => "multi-collision",
            GameKind::ThreeSum => "three-sum",
        }
    }
}

/// Game selection shared by `bound` and `p-of-r`.
#[derive(Args, Clone)]
struct GameFlags {
    /// Named relation; needs --N (or --range for three-sum).
    #[arg(long)]
    game: Option<GameKind>,
    /// Multi-image targets, comma separated (default 0,1,…,k−1).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<u32>>,
    /// Multi-search target value.
    #[arg(long)]
    target: Option<u32>,
    /// Three-sum value range; N is then 2·range+1.
    #[arg(long)]
    range: Option<u32>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    k: u64,
    #[arg(long)]
    q: u64,
    #[arg(long)]
    c: u64,
    /// Noise probability of the oracle, as a fraction or decimal.
    #[arg(long)]
    p: Option<String>,
    /// Total query count of a noisy or depth-bounded algorithm.
    #[arg(long = "T")]
    total: Option<u64>,
    /// Depth between full dephasings.
    #[arg(long)]
    d: Option<u64>,
    /// Codomain size.
    #[arg(long = "N")]
    n: Option<u64>,
    /// Domain size.
    #[arg(long = "M")]
    m: Option<u64>,
    /// Advice bits.
    #[arg(long = "S")]
    s: Option<u64>,
    /// Number of salts.
    #[arg(long = "K")]
    salts: Option<u64>,
    /// Instances of the direct product.
    #[arg(long)]
    g: Option<u64>,
    /// p(R) of the S-fold multi-instance game, for the advice bound.
    #[arg(long = "p-mis")]
    p_mis: Option<String>,
    #[command(flatten)]
    game: GameFlags,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct POfRArgs {
    /// Game JSON file.
    #[arg(long, conflicts_with = "game")]
    file: Option<PathBuf>,
    #[command(flatten)]
    game: GameFlags,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "N")]
    n: Option<u32>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RunMode {
    Pure,
    Noisy,
    Depth,
}

#[derive(Args)]
struct SimulateArgs {
    /// Circuit JSON file.
    #[arg(long)]
    circuit: PathBuf,
    /// Oracle table entries, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    oracle: Vec<u32>,
    /// Codomain size.
    #[arg(long = "N")]
    n: u32,
    #[arg(long, value_enum, default_value = "pure")]
    mode: RunMode,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Sample this many trajectories instead of enumerating branches.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Game JSON file; prints the win probability too.
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Experiment manifest JSON.
    manifest: PathBuf,
    /// CSV destination (default: <manifest name>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of Monte Carlo cells.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Quantity {
    HybridLoss,
    SimplifiedLoss,
    DfmLoss,
    NoisyLoss,
    NoisyLossAsymptotic,
    CapitalA,
    MultiImageAlg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    K,
    Q,
    C,
    P,
    #[value(name = "T")]
    T,
    #[value(name = "N")]
    N,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    quantity: Quantity,
    #[arg(long, value_enum)]
    param: SweepParam,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, default_value = "1")]
    step: String,
    #[arg(long, default_value_t = 1)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    q: u64,
    #[arg(long, default_value_t = 0)]
    c: u64,
    #[arg(long, default_value = "0")]
    p: String,
    #[arg(long = "T", default_value_t = 1)]
    total: u64,
    #[arg(long = "N", default_value_t = 2)]
    n: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Largest number of rows a sweep may produce.
const MAX_SWEEP_ROWS: usize = 1_000_000;

enum Failure {
    Usage(String),
    Fail(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Fail(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Resource(_) => 3,
        }
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::TooLarge(_) => Failure::Resource(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<RelationError> for Failure {
    fn from(e: RelationError) -> Self {
        match e {
            RelationError::EnumerationTooLarge { .. } => Failure::Resource(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<StateError> for Failure {
    fn from(e: StateError) -> Self {
        match e {
            StateError::MemoryCapExceeded { .. } => Failure::Resource(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        if e.is_resource_cap() {
            Failure::Resource(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn rational(flag: &str, text: &str) -> Result<BigRational, Failure> {
    parse_rational(text).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
}

fn theorem_tags_help() -> String {
    let mut s = String::from("Theorem tags reported by `bound`:\n");
    for tag in TheoremTag::ALL {
        s.push_str(&format!("  {tag}\n"));
    }
    s.push_str("\nExit codes: 0 pass, 1 inequality violated, 2 usage or input error, 3 resource cap.");
    s
}

fn game_spec(flags: &GameFlags, k: usize, n: Option<u64>) -> Result<Option<GameSpec>, Failure> {
    let Some(kind) = flags.game else {
        return Ok(None);
    };
    let n = match (kind, flags.range, n) {
        (GameKind::ThreeSum, Some(r), None) => 2 * r as u64 + 1,
        (_, _, Some(n)) => n,
        _ => return Err(Failure::Usage(format!("--game {} needs --N", kind.as_str()))),
    };
    let n = u32::try_from(n).map_err(|_| Failure::Usage("--N does not fit in 32 bits".into()))?;
    let targets = match kind {
        GameKind::MultiImage => Some(flags.targets.clone().unwrap_or_else(|| (0..k as u32).map(|t| t % n).collect())),
        _ => None,
    };
    let file = GameFile {
        kind: kind.as_str().into(),
        k,
        domain: n,
        codomain: n,
        parameters: GameParameters {
            targets,
            target: flags.target,
            range: flags.range,
            predicate: None,
        },
        outputs_distinct_required: true,
        challenge: Default::default(),
    };
    Ok(Some(GameSpec::try_from(file)?))
}

fn p_of_r(game: &GameSpec) -> Result<ExactValue, Failure> {
    match p_of_r_closed_form(&game.relation) {
        Ok(v) => Ok(v),
        Err(RelationError::UnsupportedKind) => Ok(p_of_r_exact(&game.relation)?),
        Err(e) => Err(e.into()),
    }
}

fn cmd_bound(a: BoundArgs) -> Outcome {
    let mut params = Params::new(a.k, a.q, a.c);
    params.p = a.p.as_deref().map(|p| rational("p", p)).transpose()?;
    params.total = a.total;
    params.depth = a.d;
    params.codomain = a.n;
    params.domain = a.m;
    params.advice_bits = a.s;
    params.salts = a.salts;
    params.instances = a.g;
    params.validate()?;
    if (params.p.is_some() || params.depth.is_some()) && params.total.is_none() {
        return Err(Failure::Usage("--p and --d need --T".into()));
    }
    let k = usize::try_from(a.k).map_err(|_| Failure::Usage("--k too large".into()))?;
    let game = game_spec(&a.game, k, a.n)?;
    let p_r = game.as_ref().map(p_of_r).transpose()?;
    let p_mis = a
        .p_mis
        .as_deref()
        .map(|p| rational("p-mis", p).map(ExactValue::Exact))
        .transpose()?;
    let report = BoundReport::build(&Bounds::default(), &params, p_r.as_ref(), p_mis.as_ref())?;
    let mut out = io::stdout().lock();
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    } else {
        write!(out, "{report}")?;
    }
    Ok(())
}

fn cmd_p_of_r(a: POfRArgs) -> Outcome {
    let game = match &a.file {
        Some(path) => GameSpec::from_json(&std::fs::read_to_string(path)?)?,
        None => {
            let k = a.k.ok_or_else(|| Failure::Usage("--k is required without --file".into()))?;
            game_spec(&a.game, k, a.n.map(u64::from))?
                .ok_or_else(|| Failure::Usage("give --file or --game".into()))?
        }
    };
    let closed = match p_of_r_closed_form(&game.relation) {
        Ok(v) => Some(v),
        Err(RelationError::UnsupportedKind) => None,
        Err(e) => return Err(e.into()),
    };
    let exact = match p_of_r_exact(&game.relation) {
        Ok(v) => Some(v),
        Err(RelationError::EnumerationTooLarge { .. }) if closed.is_some() => None,
        Err(e) => return Err(e.into()),
    };
    let agree = match (&closed, &exact) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };
    let mut out = io::stdout().lock();
    if a.json {
        let body = json!({
            "closed_form": closed.as_ref().map(ToString::to_string),
            "enumerated": exact.as_ref().map(ToString::to_string),
            "agree": agree,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("json"))?;
    } else {
        let show = |v: &Option<ExactValue>| v.as_ref().map_or_else(|| "n/a".to_string(), ToString::to_string);
        writeln!(out, "closed form  {}", show(&closed))?;
        writeln!(out, "enumerated   {}", show(&exact))?;
        if let Some(agree) = agree {
            writeln!(out, "agree        {agree}")?;
        }
    }
    if agree == Some(false) {
        return Err(Failure::Fail("closed form and enumeration disagree".into()));
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    let circuit = Circuit::from_json(&std::fs::read_to_string(&a.circuit)?)?;
    let oracle = OracleTable::new(a.n, a.oracle.clone())?;
    let mode = match a.mode {
        RunMode::Pure => Mode::Pure,
        RunMode::Noisy => {
            let p = a.p.as_deref().ok_or_else(|| Failure::Usage("--mode noisy needs --p".into()))?;
            let p = rational("p", p)?;
            if p < BigRational::zero() || p > BigRational::one() {
                return Err(Failure::Usage("--p must lie in [0, 1]".into()));
            }
            Mode::Noisy { p: p.to_f64().unwrap_or(0.0) }
        }
        RunMode::Depth => Mode::Depth {
            d: a.d.filter(|&d| d > 0).ok_or_else(|| Failure::Usage("--mode depth needs --d ≥ 1".into()))?,
        },
    };
    let backend = match a.trials {
        Some(0) => return Err(Failure::Usage("--trials must be positive".into())),
        Some(trials) => Backend::Trajectories { trials, seed: a.seed },
        None => Backend::Exhaustive,
    };
    let options = RunOptions {
        mode,
        backend,
        ..RunOptions::default()
    };
    let exec = run_circuit(&circuit, &oracle, &options)?;
    let dist = exec.distribution();
    let game = a
        .game
        .as_ref()
        .map(|p| -> Result<GameSpec, Failure> { Ok(GameSpec::from_json(&std::fs::read_to_string(p)?)?) })
        .transpose()?;
    let k = circuit.arity();
    let win = match &game {
        Some(g) => {
            let mut w = 0.0;
            for (label, p) in &dist {
                let x = label[..k].to_vec();
                let y = x.iter().map(|&v| oracle.lookup(v)).collect();
                let z = label.get(k).map_or(0, |&v| v as u64);
                if evaluate_predicate(g, &oracle, g.challenge.sample(), &OutputTuple { x, y, z })? {
                    w += p;
                }
            }
            Some(w)
        }
        None => None,
    };
    let mut out = io::stdout().lock();
    if a.json {
        let rows: Vec<_> = dist.iter().map(|(l, p)| json!({"output": l, "probability": p})).collect();
        let body = json!({
            "distribution": rows,
            "total_weight": exec.total_weight(),
            "win_probability": win,
            "max_norm_drift": exec.stats.max_norm_drift,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("json"))?;
    } else {
        writeln!(out, "output  probability")?;
        for (label, p) in &dist {
            let l: Vec<String> = label.iter().map(u32::to_string).collect();
            writeln!(out, "{}  {p}", l.join(" "))?;
        }
        writeln!(out, "total weight  {}", exec.total_weight())?;
        if let Some(w) = win {
            writeln!(out, "win probability  {w}")?;
        }
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Outcome {
    let loaded = Manifest::load(&a.manifest)?;
    if a.trials == Some(0) {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let reports = loaded.run(a.trials)?;
    let out_path = a
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", loaded.manifest.name)));
    let mut buf = Vec::new();
    write_csv(&reports, &mut buf)?;
    File::create(&out_path)?.write_all(&buf)?;
    let mut out = io::stdout().lock();
    let mut failed = false;
    for r in &reports {
        writeln!(
            out,
            "{}  {}  cells={}  min_margin={:e}  loss={}",
            r.verdict,
            r.label,
            r.cells.len(),
            r.min_margin,
            r.loss
        )?;
        for c in r.failures() {
            let xo: Vec<String> = c.xo.iter().map(u32::to_string).collect();
            writeln!(
                out,
                "FAIL,{},{},{},{},{},{},{}",
                c.id,
                c.h_index,
                c.g_index,
                xo.join(" "),
                c.lhs,
                c.rhs,
                c.margin
            )?;
        }
        failed |= r.verdict == Verdict::Fail;
    }
    writeln!(out, "wrote {}", out_path.display())?;
    if failed {
        return Err(Failure::Fail(format!("{} reports an inequality violation", loaded.manifest.name)));
    }
    Ok(())
}

/// Grid points `from, from+step, …` up to `to`, exactly.
fn rational_range(from: &str, to: &str, step: &str) -> Result<Vec<BigRational>, Failure> {
    let (from, to, step) = (rational("from", from)?, rational("to", to)?, rational("step", step)?);
    if step <= BigRational::zero() {
        return Err(Failure::Usage("--step must be positive".into()));
    }
    if from > to {
        return Ok(Vec::new());
    }
    let rows: num_bigint::BigInt = ((&to - &from) / &step).floor().to_integer() + 1;
    if rows > MAX_SWEEP_ROWS.into() {
        return Err(Failure::Usage(format!("the range has more than {MAX_SWEEP_ROWS} rows")));
    }
    let rows = rows.to_usize().expect("bounded above");
    Ok((0..rows).map(|i| &from + &step * BigRational::from_integer(i.into())).collect())
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let points = rational_range(&a.from, &a.to, &a.step)?;
    let base_p = rational("p", &a.p)?;
    let b = Bounds::default();
    let mut rows = Vec::new();
    for x in &points {
        let int = || -> Result<u64, Failure> {
            if !x.is_integer() || x < &BigRational::zero() {
                return Err(Failure::Usage(format!("{x} is not a valid integer parameter")));
            }
            x.to_integer().to_u64().ok_or_else(|| Failure::Usage("parameter too large".into()))
        };
        let (mut k, mut q, mut c, mut total, mut n, mut p) = (a.k, a.q, a.c, a.total, a.n, base_p.clone());
        match a.param {
            SweepParam::K => k = int()?,
            SweepParam::Q => q = int()?,
            SweepParam::C => c = int()?,
            SweepParam::T => total = int()?,
            SweepParam::N => n = int()?,
            SweepParam::P => p = x.clone(),
        }
        let value = match a.quantity {
            Quantity::HybridLoss => b.hybrid_loss_exact(k, q, c)?,
            Quantity::SimplifiedLoss => b.hybrid_loss_simplified(k, q, c)?.full,
            Quantity::DfmLoss => b.dfm_loss(k, q)?,
            Quantity::NoisyLoss => b.noisy_loss_exact(&p, total, k)?,
            Quantity::NoisyLossAsymptotic => b.noisy_loss_asymptotic(&p, total, k)?,
            Quantity::CapitalA => b.capital_a(k, q, c)?,
            Quantity::MultiImageAlg => b.multi_image_alg_success(k, q, c, n)?.capped,
        };
        rows.push((format_rational(x), value));
    }
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let param = a.param.to_possible_value().expect("named").get_name().to_string();
    let io_err = |e: csv::Error| Failure::Usage(e.to_string());
    w.write_record([param.as_str(), "value", "log2", "exact"]).map_err(io_err)?;
    for (x, v) in rows {
        let exact = v.as_rational().map(format_rational).unwrap_or_default();
        w.write_record([x, v.to_f64().to_string(), v.log2().to_string(), exact])
            .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(theorem_tags_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::POfR(a) => cmd_p_of_r(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Fail(msg) | Failure::Resource(msg)) = &f;
            eprintln!("qlift: {msg}");
            ExitCode::from(f.code())
        }
    }
}
