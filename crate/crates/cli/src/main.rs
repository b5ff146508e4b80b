use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use cohsched::and_protocols::{majority_reps, spurious_one_probability, AndParams, AndVariant};
use cohsched::grover::{grover_blocked_bound, grover_protocol_bound, BinningParams, GroverParams};
use cohsched::leakage::{
    classical_lower_bound, inconclusive_probability, qic_bound_experimental, qic_bound_ideal, qic_bound_jrs,
    qic_bound_jrs_experimental, qic_bound_n_over_r, RangeCheck,
};
use cohsched::montecarlo::{
    simulate_and, simulate_and_tilde, simulate_grover, simulate_grover_blocked, simulate_pi_d, summarize_schedules,
    trial_key, AndTildeSummary,
};
use cohsched::netsim::{
    run_alice, run_bob, run_session, write_transcript, PartyInput, SessionConfig, SessionOutcome, SessionProtocol,
    SessionSeeds, TcpLink, Transport, Verdict,
};
use cohsched::optimizer::{
    optimize_params, sweep, write_csv, Comparator, DirectRule, OptConfig, OptVariant, SPolicy, Spacing, SweepMode,
    SweepSpec, SweptParam,
};
use cohsched::rng::StreamKey;
use cohsched::scheduler::{Calendar, ProtocolParams};
use cohsched::{ChannelModel, Error};

#[derive(Parser, Debug)]
#[command(name = "cohsched", version, about = "Coherent-state scheduling simulator and leakage-bound toolkit")]
struct Cli {
    /// Root seed for all randomness.
    #[arg(long, global = true, env = "COHSCHED_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for trials and sweep points (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo runs of the protocols, in-library or over a transport.
    Simulate(SimulateArgs),
    /// Evaluate one leakage upper bound.
    Leakage(LeakageArgs),
    /// Minimize a bound over (r, alpha, s).
    Optimize(OptimizeArgs),
    /// Tabulate bounds over a parameter range as CSV.
    Sweep(SweepArgs),
    /// Classical information lower bound.
    Classical(ClassicalArgs),
    /// Iteration and repetition counts and the leakage bound of the search protocol.
    Grover(GroverArgs),
}

#[derive(Args, Debug, Clone)]
struct ChannelArgs {
    /// Channel transmissivity per hop.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Detector efficiency.
    #[arg(long = "eta-det", default_value_t = 1.0)]
    eta_det: f64,
    /// Dark-count probability per detector.
    #[arg(long, default_value_t = 0.0)]
    pdark: f64,
    /// Perfect channel and detectors (the defaults, stated explicitly).
    #[arg(long, conflicts_with_all = ["eta", "eta_det", "pdark"])]
    ideal: bool,
}

impl ChannelArgs {
    fn model(&self) -> Result<ChannelModel, Error> {
        if self.ideal {
            return Ok(ChannelModel::ideal());
        }
        ChannelModel::new(self.eta, self.eta_det, self.pdark)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SimProtocol {
    AndTilde,
    And,
    AndMajority,
    Pid,
    Grover,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AndKind {
    Main,
    Jrs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TransportKind {
    Inproc,
    Tcp,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    protocol: SimProtocol,
    /// Number of dates; calendars are drawn at random unless --x/--y are given.
    #[arg(long, value_parser = parse_count)]
    n: Option<usize>,
    /// Alice's calendar as a 0/1 string.
    #[arg(long)]
    x: Option<String>,
    /// Bob's calendar as a 0/1 string.
    #[arg(long)]
    y: Option<String>,
    /// Probability that a random calendar has a date free.
    #[arg(long, default_value_t = 0.25)]
    density: f64,
    /// Alice's bit for the AND protocols.
    #[arg(long, value_parser = parse_bit, default_value = "1", action = clap::ArgAction::Set)]
    a: bool,
    /// Bob's bit for the AND protocols.
    #[arg(long, value_parser = parse_bit, default_value = "1", action = clap::ArgAction::Set)]
    b: bool,
    #[arg(long, default_value_t = 4)]
    r: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "and-variant", value_enum, default_value_t = AndKind::Main)]
    and_variant: AndKind,
    /// Subsample draws for the scheduling protocol.
    #[arg(long, value_parser = parse_count, default_value = "0")]
    s: usize,
    /// Attempts per date for the majority AND (default: enough for error 1/n^2).
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long = "max-reruns", default_value_t = cohsched::and_protocols::DEFAULT_MAX_RERUNS)]
    max_reruns: u32,
    #[arg(long = "early-stop")]
    early_stop: bool,
    #[arg(long = "constant-amplitude")]
    constant_amplitude: bool,
    /// Promised intersection count for the search protocol.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Target failure probability for the search protocol.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Search in blocks of block_scale^2 dates.
    #[arg(long = "block-scale")]
    block_scale: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Run each trial as a two-endpoint session over this transport.
    #[arg(long, value_enum)]
    transport: Option<TransportKind>,
    /// Act as Alice for one session, waiting for Bob on this address.
    #[arg(long, conflicts_with_all = ["connect", "transport"])]
    listen: Option<String>,
    /// Act as Bob for one session, connecting to Alice on this address.
    #[arg(long, conflicts_with = "transport")]
    connect: Option<String>,
    /// Dump the session transcripts here, one message per line.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum LeakageVariant {
    Ideal,
    Experimental,
    Jrs,
    JrsExperimental,
    NOverR,
    Grover,
    GroverBlocked,
}

#[derive(Args, Debug)]
struct LeakageArgs {
    #[arg(long, value_enum, default_value_t = LeakageVariant::Experimental)]
    variant: LeakageVariant,
    #[arg(long, value_parser = parse_real)]
    n: f64,
    #[arg(long, value_parser = parse_real, default_value = "0")]
    s: f64,
    #[arg(long, default_value_t = 1)]
    r: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Attempts per date (n-over-r); repetitions (search).
    #[arg(long)]
    reps: Option<u32>,
    /// Evaluate outside the proven parameter range.
    #[arg(long)]
    expert: bool,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Photon-number bin width for the search bound.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "block-scale")]
    block_scale: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OptVariantArg {
    Ideal,
    Experimental,
    Jrs,
    JrsExperimental,
}

impl From<OptVariantArg> for OptVariant {
    fn from(v: OptVariantArg) -> Self {
        match v {
            OptVariantArg::Ideal => OptVariant::Ideal,
            OptVariantArg::Experimental => OptVariant::Experimental,
            OptVariantArg::Jrs => OptVariant::Jrs,
            OptVariantArg::JrsExperimental => OptVariant::JrsExperimental,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ComparatorArg {
    /// Bounded-error classical protocols with error p_dark.
    Epsilon,
    /// Zero-error classical protocols.
    Zero,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// frac:F, abs:S, grid:F1,F2,..., two-thirds or auto.
    #[arg(long = "s-policy", value_parser = parse_policy, default_value = "auto")]
    s_policy: SPolicy,
    #[arg(long, value_enum, default_value_t = OptVariantArg::Experimental)]
    variant: OptVariantArg,
    #[arg(long, value_enum, default_value_t = ComparatorArg::Epsilon)]
    comparator: ComparatorArg,
    #[arg(long = "r-min", default_value_t = 1)]
    r_min: u32,
    #[arg(long = "r-max", default_value_t = 5000)]
    r_max: u32,
    #[arg(long = "alpha-min", default_value_t = 0.05)]
    alpha_min: f64,
    #[arg(long = "alpha-max", default_value_t = 5.0)]
    alpha_max: f64,
    #[arg(long)]
    expert: bool,
}

impl SearchArgs {
    fn config(&self) -> OptConfig {
        OptConfig {
            r_min: self.r_min,
            r_max: self.r_max,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            s_policy: self.s_policy.clone(),
            variant: self.variant.into(),
            comparator: match self.comparator {
                ComparatorArg::Epsilon => Comparator::EpsilonError,
                ComparatorArg::Zero => Comparator::ZeroError,
            },
            range_check: range_check(self.expert),
            ..OptConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long, value_parser = parse_real)]
    n: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SweptArg {
    N,
    Eta,
    EtaDet,
    Pdark,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SpacingArg {
    Linear,
    Log,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    param: SweptArg,
    #[arg(long, value_parser = parse_real)]
    from: f64,
    #[arg(long, value_parser = parse_real)]
    to: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = SpacingArg::Linear)]
    spacing: SpacingArg,
    /// n for sweeps over the channel parameters.
    #[arg(long, value_parser = parse_real, default_value = "1e15")]
    n: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Evaluate at r = round(n^E) and fixed alpha instead of optimizing; s
    /// is the first candidate of the s-policy.
    #[arg(long = "direct-r-exponent")]
    direct_r_exponent: Option<f64>,
    #[arg(long = "direct-alpha", default_value_t = 1.0, requires = "direct_r_exponent")]
    direct_alpha: f64,
}

#[derive(Args, Debug)]
struct ClassicalArgs {
    #[arg(long, value_parser = parse_real)]
    n: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Args, Debug)]
struct GroverArgs {
    #[arg(long, value_parser = parse_count)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "block-scale")]
    block_scale: Option<usize>,
}

/// Errors from the command line itself rather than from the library.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_validation() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

/// Accepts `64` as well as `1e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    let v = parse_real(s)?;
    if v < 0.0 || v.fract() != 0.0 || v > 9.007_199_254_740_992e15 {
        return Err(format!("{s:?} is not a non-negative integer"));
    }
    Ok(v as usize)
}

fn parse_bit(s: &str) -> Result<bool, String> {
    match s {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        _ => Err(format!("{s:?} is not a bit")),
    }
}

fn parse_policy(s: &str) -> Result<SPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn range_check(expert: bool) -> RangeCheck {
    if expert {
        RangeCheck::Expert
    } else {
        RangeCheck::Enforce
    }
}

fn sink(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> CliResult<()> {
    let mut out = sink(path)?;
    // a Value round trip sorts object keys
    let sorted = serde_json::to_value(value).map_err(|e| Error::Encode(e.to_string()))?;
    let text = serde_json::to_string_pretty(&sorted).map_err(|e| Error::Encode(e.to_string()))?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn protocol_name(p: SimProtocol) -> String {
    p.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default()
}

fn and_params(a: &SimulateArgs) -> AndParams {
    AndParams {
        variant: match a.and_variant {
            AndKind::Main => AndVariant::Main,
            AndKind::Jrs => AndVariant::Jrs,
        },
        max_reruns: a.max_reruns,
        constant_amplitude: a.constant_amplitude,
        ..AndParams::new(a.r, a.alpha)
    }
}

/// Calendars from --x/--y, or random ones of size --n drawn from the seed.
fn calendars(a: &SimulateArgs, key: StreamKey) -> CliResult<(Calendar, Calendar)> {
    let parse = |s: &String| s.parse::<Calendar>().map_err(CliError::from);
    match (&a.x, &a.y) {
        (Some(x), Some(y)) => Ok((parse(x)?, parse(y)?)),
        (None, None) => {
            let n = a.n.ok_or_else(|| CliError::Usage("give --n or both --x and --y".into()))?;
            if !(0.0..=1.0).contains(&a.density) {
                return Err(CliError::Usage(format!("--density {} is outside [0, 1]", a.density)));
            }
            Ok((
                Calendar::random(n, a.density, &mut key.child(1).rng())?,
                Calendar::random(n, a.density, &mut key.child(2).rng())?,
            ))
        }
        _ => Err(CliError::Usage("--x and --y must be given together".into())),
    }
}

fn grover_params(a: &SimulateArgs, n: usize) -> GroverParams {
    GroverParams::new(n, a.k, a.alpha, a.epsilon)
}

fn session_seeds(root: StreamKey, trial: u64) -> SessionSeeds {
    let mut rng = trial_key(root, trial).rng();
    SessionSeeds {
        shared: rng.random(),
        local: rng.random(),
    }
}

fn session_protocol(a: &SimulateArgs, n: usize) -> CliResult<SessionProtocol> {
    Ok(match a.protocol {
        SimProtocol::AndTilde => SessionProtocol::AndTilde(and_params(a)),
        SimProtocol::Pid => SessionProtocol::PiD(ProtocolParams {
            early_stop: a.early_stop,
            ..ProtocolParams::new(a.s, and_params(a))
        }),
        SimProtocol::Grover if a.block_scale.is_none() => SessionProtocol::Grover(grover_params(a, n)),
        _ => {
            return Err(CliError::Usage(
                "sessions run and-tilde, pid or (unblocked) grover".into(),
            ))
        }
    })
}

fn party_inputs(a: &SimulateArgs, key: StreamKey) -> CliResult<(PartyInput, PartyInput, usize)> {
    if a.protocol == SimProtocol::AndTilde {
        return Ok((PartyInput::Bit(a.a), PartyInput::Bit(a.b), 1));
    }
    let (x, y) = calendars(a, key)?;
    let n = x.len();
    Ok((PartyInput::Calendar(x), PartyInput::Calendar(y), n))
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, output: &Option<PathBuf>) -> CliResult<()> {
    let ch = a.channel.model()?;
    let key = StreamKey::new(seed);
    let root = key.child(0);
    if a.listen.is_some() || a.connect.is_some() {
        return simulate_endpoint(a, &ch, key, root, output);
    }
    if let Some(t) = a.transport {
        return simulate_sessions(a, &ch, t, key, root, output);
    }
    let base = json!({ "protocol": protocol_name(a.protocol), "seed": seed, "trials": a.trials });
    let body = match a.protocol {
        SimProtocol::AndTilde => {
            let p = and_params(a);
            let s = simulate_and_tilde(a.a, a.b, &p, &ch, root, a.trials)?;
            json!({ "a": a.a, "b": a.b, "summary": s,
                    "inconclusive_rate": s.inconclusive_rate().rate(),
                    "inconclusive_closed_form": inconclusive_probability(a.alpha, &ch) })
        }
        SimProtocol::And => {
            let s = simulate_and(a.a, a.b, None, &and_params(a), &ch, root, a.trials)?;
            json!({ "a": a.a, "b": a.b, "summary": s })
        }
        SimProtocol::AndMajority => {
            let reps = match a.reps {
                Some(m) => m,
                None => majority_reps(a.n.unwrap_or(2).max(2) as f64, spurious_one_probability(a.alpha, &ch))?,
            };
            let s = simulate_and(a.a, a.b, Some(reps), &and_params(a), &ch, root, a.trials)?;
            json!({ "a": a.a, "b": a.b, "reps": reps, "summary": s })
        }
        SimProtocol::Pid => {
            let (x, y) = calendars(a, key)?;
            let p = ProtocolParams {
                early_stop: a.early_stop,
                ..ProtocolParams::new(a.s, and_params(a))
            };
            let s = simulate_pi_d(&x, &y, &p, &ch, root, a.trials)?;
            json!({ "x": x.to_string(), "y": y.to_string(), "s": a.s, "summary": s })
        }
        SimProtocol::Grover => {
            let (x, y) = calendars(a, key)?;
            let s = match a.block_scale {
                Some(b) => {
                    let gp = grover_params(a, b * b);
                    simulate_grover_blocked(&x, &y, b, &gp, &ch, root, a.trials)?
                }
                None => simulate_grover(&x, &y, &grover_params(a, x.len()), &ch, root, a.trials)?,
            };
            json!({ "x": x.to_string(), "y": y.to_string(), "summary": s })
        }
    };
    emit_json(output, &merge(base, body))
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(ao), Value::Object(bo)) = (a.as_object_mut(), b) {
        ao.extend(bo);
    }
    a
}

fn simulate_sessions(
    a: &SimulateArgs,
    ch: &ChannelModel,
    kind: TransportKind,
    key: StreamKey,
    root: StreamKey,
    output: &Option<PathBuf>,
) -> CliResult<()> {
    use rayon::prelude::*;
    let (alice, bob, n) = party_inputs(a, key)?;
    let protocol = session_protocol(a, n)?;
    let transport = match kind {
        TransportKind::Inproc => Transport::InProcess,
        TransportKind::Tcp => Transport::loopback(),
    };
    let runs = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let cfg = SessionConfig {
                session_id: i,
                protocol,
                channel: *ch,
                seeds: session_seeds(root, i),
            };
            run_session(&transport, &cfg, &alice, &bob).map_err(|f| f.error)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    if let Some(path) = &a.transcript {
        let mut out = BufWriter::new(File::create(path)?);
        for r in &runs {
            write_transcript(&r.transcript, &mut out)?;
        }
        out.flush()?;
    }
    let messages: usize = runs.iter().map(|r| r.transcript.len()).sum();
    let quantum: usize = runs.iter().map(|r| r.transcript.iter().filter(|m| m.is_quantum()).count()).sum();
    let summary = match (&alice, &bob) {
        (PartyInput::Calendar(x), PartyInput::Calendar(y)) => {
            let results: Vec<_> = runs
                .iter()
                .filter_map(|r| match &r.outcome {
                    SessionOutcome::Schedule(o) => Some((o.result, o.stats)),
                    SessionOutcome::And(_) => None,
                })
                .collect();
            serde_json::to_value(summarize_schedules(x, y, &results))
        }
        _ => {
            let count = |v| runs.iter().filter(|r| r.outcome.verdict() == Verdict::And(v)).count() as u64;
            use cohsched::and_protocols::AndValue;
            serde_json::to_value(AndTildeSummary {
                trials: a.trials,
                zeros: count(AndValue::Zero),
                ones: count(AndValue::One),
                inconclusive: count(AndValue::Inconclusive),
            })
        }
    }
    .map_err(|e| Error::Encode(e.to_string()))?;
    emit_json(
        output,
        &json!({
            "protocol": protocol_name(a.protocol),
            "transport": format!("{kind:?}").to_lowercase(),
            "sessions": a.trials,
            "messages": messages,
            "quantum_messages": quantum,
            "summary": summary,
        }),
    )
}

/// One endpoint of a single session; the peer runs in another process.
fn simulate_endpoint(
    a: &SimulateArgs,
    ch: &ChannelModel,
    key: StreamKey,
    root: StreamKey,
    output: &Option<PathBuf>,
) -> CliResult<()> {
    let (alice, bob, n) = party_inputs(a, key)?;
    let cfg = SessionConfig {
        session_id: 0,
        protocol: session_protocol(a, n)?,
        channel: *ch,
        seeds: session_seeds(root, 0),
    };
    let (role, verdict, sent) = if let Some(addr) = &a.listen {
        let run = run_alice(&cfg, &alice, Box::new(TcpLink::listen(addr.as_str(), ch.eta)?));
        ("alice", run.result.map(|o| serde_json::to_value(o).unwrap_or(Value::Null)), run.sent)
    } else {
        let addr = a.connect.as_deref().unwrap_or_default();
        let run = run_bob(&cfg, &bob, Box::new(connect_with_retry(addr, ch.eta)?));
        ("bob", run.result.map(|v| serde_json::to_value(v).unwrap_or(Value::Null)), run.sent)
    };
    if let Some(path) = &a.transcript {
        let mut out = BufWriter::new(File::create(path)?);
        write_transcript(&sent, &mut out)?;
        out.flush()?;
    }
    emit_json(output, &json!({ "role": role, "messages_sent": sent.len(), "result": verdict? }))
}

/// Alice may not be listening yet when Bob starts.
fn connect_with_retry(addr: &str, eta: f64) -> CliResult<TcpLink> {
    let mut last = None;
    for _ in 0..100 {
        match TcpLink::connect(addr, eta) {
            Ok(link) => return Ok(link),
            Err(e) => last = Some(e),
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    Err(last.map_or_else(|| CliError::Usage("no address".into()), CliError::from))
}

fn cmd_leakage(a: &LeakageArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let ch = a.channel.model()?;
    let check = range_check(a.expert);
    let grover = || -> CliResult<(GroverParams, BinningParams)> {
        if a.n.fract() != 0.0 || a.n < 1.0 {
            return Err(CliError::Usage(format!("--n {} is not a calendar size", a.n)));
        }
        let gp = GroverParams {
            max_reps: a.reps,
            ..GroverParams::new(a.n as usize, a.k, a.alpha, a.epsilon)
        };
        let bp = a.delta.map_or_else(|| BinningParams::for_alpha(a.alpha), BinningParams::with_delta);
        Ok((gp, bp))
    };
    let bound = match a.variant {
        LeakageVariant::Ideal => qic_bound_ideal(a.n, a.s, a.r, a.alpha, check)?,
        LeakageVariant::Experimental => qic_bound_experimental(a.n, a.s, a.r, a.alpha, &ch, check)?,
        LeakageVariant::Jrs => qic_bound_jrs(a.n, a.s, a.r, a.alpha, check)?,
        LeakageVariant::JrsExperimental => qic_bound_jrs_experimental(a.n, a.s, a.r, a.alpha, &ch, check)?,
        LeakageVariant::NOverR => {
            let reps = match a.reps {
                Some(m) => m,
                None => majority_reps(a.n, spurious_one_probability(a.alpha, &ch))?,
            };
            qic_bound_n_over_r(a.n, a.r, a.alpha, &ch, reps)?
        }
        LeakageVariant::Grover => {
            let (gp, bp) = grover()?;
            grover_protocol_bound(&gp, &bp)?
        }
        LeakageVariant::GroverBlocked => {
            let (gp, bp) = grover()?;
            let b = a
                .block_scale
                .ok_or_else(|| CliError::Usage("grover-blocked needs --block-scale".into()))?;
            grover_blocked_bound(gp.n, b, &gp, &bp)?
        }
    };
    emit_json(output, &bound)
}

fn cmd_optimize(a: &OptimizeArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let ch = a.channel.model()?;
    emit_json(output, &optimize_params(a.n, &ch, &a.search.config())?)
}

fn cmd_sweep(a: &SweepArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let spec = SweepSpec {
        param: match a.param {
            SweptArg::N => SweptParam::N,
            SweptArg::Eta => SweptParam::Eta,
            SweptArg::EtaDet => SweptParam::EtaDet,
            SweptArg::Pdark => SweptParam::PDark,
        },
        start: a.from,
        stop: a.to,
        steps: a.steps,
        spacing: match a.spacing {
            SpacingArg::Linear => Spacing::Linear,
            SpacingArg::Log => Spacing::Log,
        },
        n: a.n,
        channel: a.channel.model()?,
        config: a.search.config(),
        mode: match a.direct_r_exponent {
            Some(e) => SweepMode::Direct(DirectRule {
                r_exponent: e,
                alpha: a.direct_alpha,
            }),
            None => SweepMode::Optimize,
        },
    };
    let rows = sweep(&spec)?;
    let mut out = sink(output)?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_grover(a: &GroverArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let bp = a.delta.map_or_else(|| BinningParams::for_alpha(a.alpha), BinningParams::with_delta);
    let (gp, bound) = match a.block_scale {
        Some(b) => {
            let gp = GroverParams::new(b * b, a.k, a.alpha, a.epsilon);
            let bound = grover_blocked_bound(a.n, b, &gp, &bp)?;
            (gp, bound)
        }
        None => {
            let gp = GroverParams::new(a.n, a.k, a.alpha, a.epsilon);
            let bound = grover_protocol_bound(&gp, &bp)?;
            (gp, bound)
        }
    };
    emit_json(
        output,
        &json!({
            "n": a.n,
            "search_size": gp.n,
            "blocks": a.n.div_ceil(gp.n),
            "iterations": gp.iterations(),
            "repetitions": gp.repetitions()?,
            "hops_per_search": gp.total_hops()?,
            "bound": bound,
        }),
    )
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed, &cli.output),
        Command::Leakage(a) => cmd_leakage(a, &cli.output),
        Command::Optimize(a) => cmd_optimize(a, &cli.output),
        Command::Sweep(a) => cmd_sweep(a, &cli.output),
        Command::Classical(a) => emit_json(&cli.output, &classical_lower_bound(a.n, a.epsilon)?),
        Command::Grover(a) => cmd_grover(a, &cli.output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
