//! `thermoscope`: runs the pressure, inducing and certification pipelines
//! and writes deterministic CSV/JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use thermoscope::bowen::{pressure_bowen, transition_scan, BowenParams, Verdict};
use thermoscope::certify::{
    certify_transition, enumerate_periodic_orbits, key_lemma_check, CertifyBudgets, CompactSupParams, KeyLemmaStatus,
    TransitionVerdict,
};
use thermoscope::induced::{DEFAULT_GRID, DEFAULT_TRUNCATION};
use thermoscope::pressure::{pressure_partition_with, pressure_tree, DEFAULT_PROBES};
use thermoscope::{Error, FiberParams, FiberTable, MpMap, PotentialSpec};

const SCHEMA: &str = "thermoscope/1";
const MAX_BETA_COUNT: usize = 10_000;

const EXIT_ERROR: u8 = 1;
const EXIT_UNDETERMINED: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "thermoscope", version, about = "Pressure and phase-transition pipelines for the Manneville-Pomeau map")]
struct Cli {
    /// Worker threads for all parallel sections (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Map exponent α.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Built-in name (zero, const:κ, omega:γ, geometric, hat, psi, tilde:γ) or a JSON spec file.
    #[arg(long, default_value = "zero")]
    potential: String,
    /// Artifact path; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum PressureMethod {
    Partition,
    Tree,
    Bowen,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FiberArgs {
    /// Grid cells on J₀ for the induced operator.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Largest return time summed explicitly.
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncation: usize,
    /// Operator iterations.
    #[arg(long, default_value_t = 3)]
    ell: usize,
}

impl FiberArgs {
    fn params(&self) -> FiberParams {
        FiberParams { grid: self.grid, truncation: self.truncation }
    }

    fn validate(&self) -> Result<(), String> {
        positive("grid", self.grid)?;
        positive("truncation", self.truncation)?;
        positive("ell", self.ell)?;
        if self.grid > u16::MAX as usize {
            return Err(format!("--grid must be at most {}", u16::MAX));
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Marked points xₙ and the products n·xₙ^α.
    Marked {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Bracket the pressure P(βφ).
    Pressure {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: PressureArgs,
    },
    /// Bracket the two-variable pressure 𝒫(βφ, p) and (1/ℓ) log Z_ℓ.
    Induced {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: InducedArgs,
    },
    /// Scan the sign of 𝒫(βφ, βφ(0)) over a β grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: ScanArgs,
    },
    /// Certify the presence or absence of a phase transition.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: CertifyArgs,
    },
    /// Enumerate periodic orbits and their Birkhoff averages.
    Orbits {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: OrbitArgs,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
struct PressureArgs {
    #[arg(long, value_enum, default_value_t = PressureMethod::Partition)]
    method: PressureMethod,
    /// Cylinder depth for partition and tree sums.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Probe points per cylinder for partition sums.
    #[arg(long, default_value_t = DEFAULT_PROBES)]
    probes: usize,
    /// Base point of the preimage tree.
    #[arg(long, default_value_t = 1.0)]
    tree_point: f64,
    /// Target width of the Bowen bracket.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[command(flatten)]
    fiber: FiberArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct InducedArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Second variable; defaults to β·φ(0).
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[command(flatten)]
    fiber: FiberArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ScanArgs {
    /// β grid as lo:hi:count.
    #[arg(long, default_value = "0.6:2:60", value_parser = parse_beta_range)]
    beta: BetaRange,
    #[command(flatten)]
    fiber: FiberArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CertifyArgs {
    /// Hölder exponent of the class; defaults to the potential's own.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    scan_horizon: usize,
    #[arg(long, default_value_t = 100_000)]
    marked_cache: usize,
    #[arg(long, default_value_t = 4096)]
    m0_cap: usize,
    #[arg(long, default_value_t = 10)]
    graph_depth: usize,
    #[arg(long, default_value_t = 1 << 16)]
    node_limit: usize,
    #[arg(long, default_value_t = 12)]
    orbit_period: usize,
    #[arg(long, default_value_t = 12)]
    orbit_cap: usize,
    /// Inverse temperatures for the operator route, comma separated.
    #[arg(long, default_value = "1,2,4,8,16,32,64", value_delimiter = ',')]
    betas: Vec<f64>,
    #[command(flatten)]
    fiber: FiberArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OrbitArgs {
    /// Largest total period.
    #[arg(long, default_value_t = 8)]
    period: usize,
    /// Largest single return time; defaults to the period.
    #[arg(long)]
    cap: Option<usize>,
    /// Drop orbits entering [0, x_m) for this m.
    #[arg(long)]
    floor_index: Option<usize>,
    /// Compare averages with the partition pressure at this depth.
    #[arg(long)]
    key_lemma_depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct BetaRange {
    lo: f64,
    hi: f64,
    count: usize,
}

fn parse_beta_range(s: &str) -> Result<BetaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:count, got {s:?}"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in {s:?}"));
    let lo = num(parts[0])?;
    let hi = num(parts[1])?;
    let count = parts[2].trim().parse::<usize>().map_err(|_| format!("bad count {:?} in {s:?}", parts[2]))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("need 0 < lo < hi, got {lo}:{hi}"));
    }
    if !(2..=MAX_BETA_COUNT).contains(&count) {
        return Err(format!("count must be in 2..={MAX_BETA_COUNT}, got {count}"));
    }
    Ok(BetaRange { lo, hi, count })
}

fn positive(name: &str, v: usize) -> Result<(), String> {
    if v == 0 {
        Err(format!("--{name} must be positive"))
    } else {
        Ok(())
    }
}

fn positive_f(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("--{name} must be positive and finite, got {v}"))
    }
}

/// What a command produced: the payload, CSV rows, timings and an exit code.
struct Outcome {
    result: Value,
    csv: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    timings: Vec<(String, f64)>,
    code: u8,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Self { result, csv: None, timings: Vec::new(), code: 0 }
    }
}

enum Failure {
    Usage(String),
    Run(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact types serialize")
}

/// Rounds every number to 12 significant digits.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64 number");
                let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
                *v = json!(r);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn fmt12(x: f64) -> String {
    if x.is_finite() {
        let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
        if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn load_potential(common: &Common) -> Result<PotentialSpec, Failure> {
    let path = Path::new(&common.potential);
    if common.potential.ends_with(".json") || path.is_file() {
        let phi = PotentialSpec::from_json_file(path)?;
        if let Some(a) = phi.alpha {
            if a != common.alpha {
                return Err(Failure::Usage(format!("potential file is for α={a}, but --alpha is {}", common.alpha)));
            }
        }
        return Ok(phi);
    }
    Ok(PotentialSpec::builtin(&common.potential, common.alpha)?)
}

fn run_marked(common: &Common, n: usize) -> Result<Outcome, Failure> {
    positive("n", n).map_err(Failure::Usage)?;
    let map = MpMap::new(common.alpha)?;
    let orbit = map.marked_points(n)?;
    let a = common.alpha;
    let rows: Vec<(usize, f64, f64)> = (1..=n)
        .map(|k| {
            let x = orbit.x(k);
            (k, x, k as f64 * x.powf(a))
        })
        .collect();
    let last = rows.last().map(|r| r.2).unwrap_or(f64::NAN);
    let mut out = Outcome::new(json!({
        "limit": 1.0 / a,
        "last": last,
        "rows": rows.iter().map(|r| json!({"n": r.0, "x_n": r.1, "n_x_n_alpha": r.2})).collect::<Vec<_>>(),
    }));
    out.csv = Some((
        vec!["n", "x_n", "n_x_n_alpha"],
        rows.iter().map(|r| vec![r.0.to_string(), fmt12(r.1), fmt12(r.2)]).collect(),
    ));
    Ok(out)
}

fn run_pressure(common: &Common, args: &PressureArgs) -> Result<Outcome, Failure> {
    positive("depth", args.depth).map_err(Failure::Usage)?;
    positive("probes", args.probes).map_err(Failure::Usage)?;
    positive_f("beta", args.beta).map_err(Failure::Usage)?;
    positive_f("tol", args.tol).map_err(Failure::Usage)?;
    args.fiber.validate().map_err(Failure::Usage)?;
    let map = MpMap::new(common.alpha)?;
    let phi = load_potential(common)?;
    let scaled = phi.scaled(args.beta);
    let mut code = 0;
    let result = match args.method {
        PressureMethod::Partition => to_value(&pressure_partition_with(&map, &scaled, args.depth, args.probes)?),
        PressureMethod::Tree => to_value(&pressure_tree(&map, &scaled, args.tree_point, args.depth)?),
        PressureMethod::Bowen => {
            let fiber = FiberTable::build(&map, &phi, args.fiber.params())?;
            let params = BowenParams { ell: args.fiber.ell, tol: args.tol, start: None };
            let r = pressure_bowen(&fiber, &phi, args.beta, params)?;
            if !r.converged {
                code = EXIT_UNDETERMINED;
            }
            to_value(&r)
        }
    };
    let bracket = if args.method == PressureMethod::Bowen { &result["bracket"] } else { &result };
    let row = vec![
        bracket["depth"].to_string(),
        bracket["method"].as_str().unwrap_or_default().to_string(),
        json_cell(&bracket["lo"]),
        json_cell(&bracket["hi"]),
    ];
    let mut out = Outcome::new(result);
    out.csv = Some((vec!["depth", "method", "lo", "hi"], vec![row]));
    out.code = code;
    Ok(out)
}

fn json_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => fmt12(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn run_induced(common: &Common, args: &InducedArgs) -> Result<Outcome, Failure> {
    positive_f("beta", args.beta).map_err(Failure::Usage)?;
    args.fiber.validate().map_err(Failure::Usage)?;
    if let Some(p) = args.p {
        if !p.is_finite() {
            return Err(Failure::Usage(format!("--p must be finite, got {p}")));
        }
    }
    let map = MpMap::new(common.alpha)?;
    let phi = load_potential(common)?;
    let t = Instant::now();
    let fiber = FiberTable::build(&map, &phi, args.fiber.params())?;
    let build = t.elapsed().as_secs_f64();
    let p = args.p.unwrap_or(args.beta * phi.value_at_zero);
    let t = Instant::now();
    let point = fiber.two_variable_pressure(args.beta, p, args.fiber.ell)?;
    let z = match fiber.z_partition(args.beta, p, args.fiber.ell) {
        Ok(b) => to_value(&b),
        Err(Error::DivergentTail(w)) => json!({ "divergent": to_value(&w) }),
        Err(e) => return Err(e.into()),
    };
    let eval = t.elapsed().as_secs_f64();
    let sign = point.sign();
    let row = vec![
        fmt12(point.p),
        fmt12(point.beta),
        fmt12(point.bracket.lo),
        fmt12(point.bracket.hi),
        to_value(&sign).as_str().unwrap_or_default().to_string(),
        point.divergence_flag.to_string(),
    ];
    let mut out = Outcome::new(json!({ "point": to_value(&point), "sign": to_value(&sign), "log_z_per_step": z }));
    out.csv = Some((vec!["p", "beta", "lo", "hi", "sign", "divergent"], vec![row]));
    out.timings = vec![("fiber_build".into(), build), ("evaluate".into(), eval)];
    Ok(out)
}

fn run_scan(common: &Common, args: &ScanArgs) -> Result<Outcome, Failure> {
    args.fiber.validate().map_err(Failure::Usage)?;
    let map = MpMap::new(common.alpha)?;
    let phi = load_potential(common)?;
    let t = Instant::now();
    let fiber = FiberTable::build(&map, &phi, args.fiber.params())?;
    let build = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let r = transition_scan(&fiber, &phi.name, (args.beta.lo, args.beta.hi), args.beta.count, args.fiber.ell)?;
    let scan = t.elapsed().as_secs_f64();
    let rows = r
        .sign_data
        .iter()
        .chain(&r.refinement)
        .map(|p| {
            vec![
                fmt12(p.beta),
                fmt12(p.lo),
                fmt12(p.hi),
                to_value(&p.sign).as_str().unwrap_or_default().to_string(),
                p.divergent.to_string(),
            ]
        })
        .collect();
    let code = if r.verdict == Verdict::NoSignChangeInRange { EXIT_UNDETERMINED } else { 0 };
    let mut out = Outcome::new(to_value(&r));
    out.csv = Some((vec!["beta", "lo", "hi", "sign", "divergent"], rows));
    out.timings = vec![("fiber_build".into(), build), ("scan".into(), scan)];
    out.code = code;
    Ok(out)
}

fn run_certify(common: &Common, args: &CertifyArgs) -> Result<Outcome, Failure> {
    args.fiber.validate().map_err(Failure::Usage)?;
    for (name, v) in [
        ("m0-cap", args.m0_cap),
        ("graph-depth", args.graph_depth),
        ("node-limit", args.node_limit),
        ("orbit-period", args.orbit_period),
        ("orbit-cap", args.orbit_cap),
    ] {
        positive(name, v).map_err(Failure::Usage)?;
    }
    if args.scan_horizon < 1000 {
        return Err(Failure::Usage("--scan-horizon must be at least 1000".into()));
    }
    for &b in &args.betas {
        positive_f("betas", b).map_err(Failure::Usage)?;
    }
    let map = MpMap::new(common.alpha)?;
    let phi = load_potential(common)?;
    let gamma = args.gamma.unwrap_or(phi.gamma);
    positive_f("gamma", gamma).map_err(Failure::Usage)?;
    let budgets = CertifyBudgets {
        scan_horizon: args.scan_horizon,
        marked_cache: args.marked_cache,
        m0_cap: args.m0_cap,
        compact: CompactSupParams {
            depth: args.graph_depth,
            node_limit: args.node_limit,
            orbit_period: args.orbit_period,
            orbit_cap: args.orbit_cap,
            ..Default::default()
        },
        betas: args.betas.clone(),
        ell: args.fiber.ell,
        fiber: args.fiber.params(),
    };
    let cert = certify_transition(&map, &phi, gamma, &budgets)?;
    let mut out = Outcome::new(to_value(&cert));
    out.timings = cert.timings.clone();
    if cert.verdict == TransitionVerdict::Undetermined {
        out.code = EXIT_UNDETERMINED;
    }
    Ok(out)
}

fn run_orbits(common: &Common, args: &OrbitArgs) -> Result<Outcome, Failure> {
    positive("period", args.period).map_err(Failure::Usage)?;
    let cap = args.cap.unwrap_or(args.period);
    positive("cap", cap).map_err(Failure::Usage)?;
    let map = MpMap::new(common.alpha)?;
    let phi = load_potential(common)?;
    let floor = match args.floor_index {
        Some(m) => Some(map.marked_points(m.max(1))?.x(m)),
        None => None,
    };
    let orbits = enumerate_periodic_orbits(&map, args.period, cap, floor, std::slice::from_ref(&phi))?;
    let rows = orbits
        .iter()
        .map(|o| {
            let word = o.return_word.as_ref().map(|w| w.times.iter().map(usize::to_string).collect::<Vec<_>>().join("-"));
            vec![
                word.unwrap_or_default(),
                o.period.to_string(),
                fmt12(o.point),
                fmt12(o.min_point),
                fmt12(o.averages[&phi.name]),
                fmt12(o.residual),
            ]
        })
        .collect();
    let mut result = json!({ "orbits": to_value(&orbits) });
    let mut code = 0;
    if let Some(depth) = args.key_lemma_depth {
        positive("key-lemma-depth", depth).map_err(Failure::Usage)?;
        let bracket = pressure_partition_with(&map, &phi, depth, DEFAULT_PROBES)?;
        let report = key_lemma_check(&phi, &orbits, &bracket)?;
        if report.status == KeyLemmaStatus::Inconclusive {
            code = EXIT_UNDETERMINED;
        }
        result["key_lemma"] = to_value(&report);
    }
    let mut out = Outcome::new(result);
    out.csv = Some((vec!["return_times", "period", "point", "min_point", "average", "residual"], rows));
    out.code = code;
    Ok(out)
}

fn render(command: &str, config: Value, outcome: &Outcome, format: Format) -> Result<Vec<u8>, Failure> {
    match format {
        Format::Json => {
            let mut doc = json!({
                "schema": SCHEMA,
                "command": command,
                "config": config,
                "result": outcome.result.clone(),
            });
            round_numbers(&mut doc);
            let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Failure::Io(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let (header, rows) = outcome
                .csv
                .as_ref()
                .ok_or_else(|| Failure::Usage(format!("{command} writes JSON only")))?;
            let mut cfg = config;
            round_numbers(&mut cfg);
            let mut bytes = format!("# schema: {SCHEMA}\n# command: {command}\n# config: {cfg}\n").into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut bytes);
                let io = |e: csv::Error| Failure::Io(e.to_string());
                w.write_record(header).map_err(io)?;
                for r in rows {
                    w.write_record(r).map_err(io)?;
                }
                w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            }
            Ok(bytes)
        }
    }
}

fn write_artifact(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if path == Path::new("-") {
        std::io::stdout().write_all(bytes).map_err(|e| Failure::Io(e.to_string()))
    } else {
        fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".timings.json");
    PathBuf::from(name)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        positive("threads", n).map_err(Failure::Usage)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    let (name, common, params, default_format): (&str, &Common, Value, Format) = match &cli.command {
        Command::Marked { common, n } => ("marked", common, json!({ "n": n }), Format::Csv),
        Command::Pressure { common, args } => ("pressure", common, to_value(args), Format::Json),
        Command::Induced { common, args } => ("induced", common, to_value(args), Format::Json),
        Command::Scan { common, args } => ("scan", common, to_value(args), Format::Json),
        Command::Certify { common, args } => ("certify", common, to_value(args), Format::Json),
        Command::Orbits { common, args } => ("orbits", common, to_value(args), Format::Json),
    };
    positive_f("alpha", common.alpha).map_err(Failure::Usage)?;
    let format = common.format.unwrap_or(default_format);
    let config = json!({
        "alpha": common.alpha,
        "potential": common.potential,
        "format": format,
        "params": params,
    });
    let outcome = match &cli.command {
        Command::Marked { common, n } => run_marked(common, *n)?,
        Command::Pressure { common, args } => run_pressure(common, args)?,
        Command::Induced { common, args } => run_induced(common, args)?,
        Command::Scan { common, args } => run_scan(common, args)?,
        Command::Certify { common, args } => run_certify(common, args)?,
        Command::Orbits { common, args } => run_orbits(common, args)?,
    };
    let bytes = render(name, config, &outcome, format)?;
    write_artifact(&common.out, &bytes)?;
    if common.out != Path::new("-") && !outcome.timings.is_empty() {
        let t: serde_json::Map<String, Value> = outcome.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let mut body = serde_json::to_vec_pretty(&Value::Object(t)).map_err(|e| Failure::Io(e.to_string()))?;
        body.push(b'\n');
        write_artifact(&sidecar(&common.out), &body)?;
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(Error::InvalidParameter(msg))) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e @ Error::Inconclusive(_))) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_UNDETERMINED)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
