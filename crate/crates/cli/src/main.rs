//! `relbn` — command-line front end over the inference library.
//!
//! Three subcommands tie the library together for batch use:
//!
//! * `infer` parses a specification, grounds it over `{1..N}` and answers a
//!   query exactly, picking the most specific applicable engine (or the one
//!   forced with `--engine`);
//! * `count` counts or weighs edge covers of a black/white graph, optionally
//!   cross-checking against brute force or sampling covers;
//! * `encode` translates higher-level models (tables, plates, relational
//!   skeletons, clause gadgets, matrix problems) into the core formats.
//!
//! Exit codes: 0 success, 1 invalid input, 2 resource guard tripped,
//! 3 evidence with probability zero. Identical invocations produce
//! byte-identical standard output, except for the `elapsed_ms` field of
//! `--format json-lines` records; progress notes go to standard error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use relbn_core::dllite::{infer_positive, normalize, DlliteError};
use relbn_core::edgecover::{
    count_covers, count_covers_bruteforce, count_covers_class_b_with_calls, detect_class_b,
    glauber_sample, parse_bwg, partition_bruteforce, partition_function_graph,
    partition_function_with_calls, render_bwg, BwGraph, BwgInput, ClassBGraph, EdgeCoverError,
};
use relbn_core::encode::{
    count_matrices, count_models_cnf3, count_models_monotone, count_one_in_three,
    linmoncbpc_to_bwgraph, matrix_problem_to_formula, one_in_three_gadget, parse_dimacs,
    parse_plate, parse_prm, plate_to_spec, prm_to_spec, render_dimacs, EncodeError,
    MatrixProblem, MonotoneCnf,
};
use relbn_core::ground::{ground_spec_capped, relevant_subnetwork, GroundError, DEFAULT_NODE_CAP};
use relbn_core::infer::{
    positive_query_product_with_work, query_probability_capped, InferError, DEFAULT_ROOT_CAP,
};
use relbn_core::lang::{parse_query, parse_spec, render_spec};
use relbn_core::model::{
    classify_fragment, decimal_string, parse_rational, render_rational, validate_spec,
    FragmentLabel, GroundAtom, Query, Rational, RelationalSpec,
};

#[derive(Parser)]
#[command(name = "relbn", version, about = "Exact inference for relational Bayesian network specifications")]
struct Cli {
    /// Output format for results on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    JsonLines,
}

#[derive(Subcommand)]
enum Cmd {
    /// Answer P(Q|E) over the grounding of a specification.
    Infer(InferArgs),
    /// Count or weigh the edge covers of a black/white graph.
    Count(CountArgs),
    /// Translate higher-level models into the core formats.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct InferArgs {
    /// Specification file (.rbn).
    #[arg(long)]
    spec: PathBuf,
    /// Domain size N; the domain is {1..N}.
    #[arg(long)]
    n: u32,
    /// Query, e.g. "friends(1,2)=1 | linked(1,2)=0 ; gamma=1/3".
    #[arg(long)]
    query: String,
    /// Inference engine; `auto` picks the most specific applicable one.
    #[arg(long, value_enum, default_value_t = EngineChoice::Auto)]
    engine: EngineChoice,
    /// Maximum number of ground nodes the grounding may create.
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    node_cap: usize,
    /// Maximum number of free roots the enumeration engines may sum over
    /// (overrides the RELBN_ROOT_CAP environment variable).
    #[arg(long)]
    root_cap: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineChoice {
    Auto,
    Bruteforce,
    PositiveProduct,
    QfPruned,
    Dllite,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Engine {
    Bruteforce,
    PositiveProduct,
    QfPruned,
    Dllite,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Bruteforce => "bruteforce",
            Engine::PositiveProduct => "positive-product",
            Engine::QfPruned => "qf-pruned",
            Engine::Dllite => "dllite",
        }
    }
}

#[derive(Args)]
struct CountArgs {
    /// Graph file (.bwg) with `node`/`edge` lines or a `classB` shorthand.
    #[arg(long, conflicts_with = "class_b", required_unless_present = "class_b")]
    graph: Option<PathBuf>,
    /// Layered instance given directly as the four layer sizes.
    #[arg(long = "classB", num_args = 4, value_names = ["V1", "V2", "V3", "V4"])]
    class_b: Option<Vec<usize>>,
    /// Weigh covers by λ^|cover| instead of counting them (λ > 0, rational).
    #[arg(long)]
    lambda: Option<String>,
    /// Also report how many recursion calls the layered route made.
    #[arg(long)]
    calls: bool,
    /// Cross-check the answer against brute force (≤ 25 edges).
    #[arg(long)]
    oracle: bool,
    /// Sample a cover by running this many steps of the edge dynamics.
    #[arg(long, value_name = "STEPS")]
    sample: Option<u64>,
    /// Seed for --sample; the trajectory is a function of the seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(subcommand)]
    what: EncodeCmd,
}

#[derive(Subcommand)]
enum EncodeCmd {
    /// Plate model (.plate) to a specification (.rbn).
    Plate {
        input: PathBuf,
        /// Output path; defaults to the input with extension `rbn`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-parse the output and check it round-trips and validates.
        #[arg(long)]
        verify: bool,
    },
    /// Relational model with skeleton (.prm) to a specification plus
    /// closed-world evidence, printed as a query fragment.
    Prm {
        input: PathBuf,
        /// Domain size the skeleton individuals live in.
        #[arg(long)]
        n: u32,
        /// Output path; defaults to the input with extension `rbn`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-parse the output and check it round-trips and validates.
        #[arg(long)]
        verify: bool,
    },
    /// 3CNF (DIMACS) to its exactly-one gadget (DIMACS).
    Gadget {
        input: PathBuf,
        /// Output path; defaults to the input with extension `gadget.cnf`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check the gadget's exactly-one count equals the model count.
        #[arg(long)]
        verify: bool,
    },
    /// Matrix counting problem to a monotone CNF or a layered cover graph.
    Matrix {
        /// Number of rows that must contain a one.
        covered_rows: u32,
        /// Number of columns that must contain a one.
        covered_cols: u32,
        /// Total rows.
        rows: u32,
        /// Total columns.
        cols: u32,
        #[arg(long = "to", value_enum, default_value_t = MatrixTarget::Cnf)]
        to: MatrixTarget,
        /// Output path; defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check matrix count, model count and cover count all agree.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MatrixTarget {
    Cnf,
    Bwg,
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

const EXIT_INVALID: u8 = 1;
const EXIT_RESOURCE: u8 = 2;
const EXIT_ZERO_EVIDENCE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Infer(args) => cmd_infer(args, cli.format),
        Cmd::Count(args) => cmd_count(args, cli.format),
        Cmd::Encode(args) => cmd_encode(args, cli.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// One `--format json-lines` record. Fields are always present; rationals
/// are carried as decimal strings so arbitrary precision survives.
fn emit_record(
    format: Format,
    engine: &str,
    value: Option<&Rational>,
    decision: Option<bool>,
    calls: Option<u64>,
    elapsed_ms: u128,
) {
    if format != Format::JsonLines {
        return;
    }
    let record = serde_json::json!({
        "engine": engine,
        "value_num": value.map(|v| v.numer().to_string()),
        "value_den": value.map(|v| v.denom().to_string()),
        "decision": decision,
        "calls": calls,
        "elapsed_ms": u64::try_from(elapsed_ms).unwrap_or(u64::MAX),
    });
    println!("{record}");
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| fail(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content)
        .map_err(|e| fail(EXIT_INVALID, format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// infer

fn cmd_infer(args: &InferArgs, format: Format) -> Result<(), Failure> {
    if args.n == 0 {
        return Err(fail(EXIT_INVALID, "the domain size N must be at least 1"));
    }
    let text = read_file(&args.spec)?;
    let spec = parse_spec(&text)
        .map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", args.spec.display())))?;
    let report = validate_spec(&spec);
    if !report.is_valid() {
        return Err(fail(EXIT_INVALID, format!("invalid specification:\n{report}")));
    }
    let query = parse_query(&args.query)
        .map_err(|e| fail(EXIT_INVALID, format!("query: {e}")))?;
    let root_cap = resolve_root_cap(args.root_cap)?;

    let start = Instant::now();
    let (engine, outcome) = match args.engine {
        EngineChoice::Auto => {
            // Most specific applicable engine first. A quantified body rules
            // out the pruning route's quantifier-free contract, so auto then
            // falls straight through to full grounding.
            let quantifier_free = matches!(
                classify_fragment(&spec),
                FragmentLabel::PropAnd
                    | FragmentLabel::PropOr
                    | FragmentLabel::PropAndNot
                    | FragmentLabel::QF
            );
            let mut ladder = vec![Engine::PositiveProduct, Engine::Dllite];
            if quantifier_free {
                ladder.push(Engine::QfPruned);
            }
            ladder.push(Engine::Bruteforce);
            let mut picked = None;
            for engine in ladder {
                match run_engine(engine, &spec, args.n, &query, args.node_cap, root_cap) {
                    Ok(outcome) => {
                        picked = Some((engine, outcome));
                        break;
                    }
                    Err(EngineError::Inapplicable(_)) => continue,
                    Err(EngineError::Hard(f)) => return Err(f),
                }
            }
            picked.expect("the bruteforce engine is always applicable")
        }
        forced => {
            let engine = match forced {
                EngineChoice::Bruteforce => Engine::Bruteforce,
                EngineChoice::PositiveProduct => Engine::PositiveProduct,
                EngineChoice::QfPruned => Engine::QfPruned,
                EngineChoice::Dllite => Engine::Dllite,
                EngineChoice::Auto => unreachable!(),
            };
            let outcome = run_engine(engine, &spec, args.n, &query, args.node_cap, root_cap)
                .map_err(|e| match e {
                    EngineError::Inapplicable(msg) => fail(EXIT_INVALID, msg),
                    EngineError::Hard(f) => f,
                })?;
            (engine, outcome)
        }
    };
    let elapsed = start.elapsed().as_millis();

    let decision = query.gamma.as_ref().map(|gamma| outcome.value > *gamma);
    eprintln!("engine: {}", engine.name());
    match format {
        Format::Text => match (&query.gamma, decision) {
            (Some(gamma), Some(d)) => println!(
                "{} > {} : {d}",
                render_rational(&outcome.value),
                render_rational(gamma)
            ),
            _ => println!(
                "{} ({})",
                render_rational(&outcome.value),
                decimal_string(&outcome.value, 12)
            ),
        },
        Format::JsonLines => emit_record(
            format,
            engine.name(),
            Some(&outcome.value),
            decision,
            outcome.calls,
            elapsed,
        ),
    }
    Ok(())
}

/// Root-cap precedence: explicit flag, then RELBN_ROOT_CAP, then default.
fn resolve_root_cap(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    match std::env::var("RELBN_ROOT_CAP") {
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            fail(EXIT_INVALID, format!("RELBN_ROOT_CAP must be a non-negative integer, got {s:?}"))
        }),
        Err(_) => Ok(DEFAULT_ROOT_CAP),
    }
}

struct Outcome {
    value: Rational,
    calls: Option<u64>,
}

enum EngineError {
    /// The engine's fragment or query-shape contract does not cover this
    /// instance; `auto` falls through to the next engine.
    Inapplicable(String),
    /// A real failure that every engine would report (bad input, caps,
    /// impossible evidence); `auto` stops and reports it.
    Hard(Failure),
}

fn run_engine(
    engine: Engine,
    spec: &RelationalSpec,
    n: u32,
    query: &Query,
    node_cap: usize,
    root_cap: usize,
) -> Result<Outcome, EngineError> {
    match engine {
        Engine::PositiveProduct => match positive_query_product_with_work(spec, query) {
            Ok((value, work)) => Ok(Outcome { value, calls: Some(work) }),
            Err(
                e @ (InferError::NotInFragment { .. }
                | InferError::NegativeAssignment { .. }
                | InferError::PositiveAssignment { .. }),
            ) => Err(EngineError::Inapplicable(e.to_string())),
            Err(e) => Err(EngineError::Hard(map_infer_error(e))),
        },
        Engine::Dllite => {
            let nspec = match normalize(spec) {
                Ok(ns) => ns,
                Err(e @ DlliteError::NotInFragment { .. }) => {
                    return Err(EngineError::Inapplicable(e.to_string()))
                }
                Err(e) => return Err(EngineError::Hard(map_dllite_error(e))),
            };
            match infer_positive(&nspec, n, query) {
                Ok(value) => Ok(Outcome { value, calls: None }),
                Err(e @ DlliteError::NegativeAssignment { .. }) => {
                    Err(EngineError::Inapplicable(e.to_string()))
                }
                Err(e) => Err(EngineError::Hard(map_dllite_error(e))),
            }
        }
        Engine::QfPruned | Engine::Bruteforce => {
            let net = ground_spec_capped(spec, n, node_cap)
                .map_err(|e| EngineError::Hard(map_ground_error(e)))?;
            let net = if engine == Engine::QfPruned {
                relevant_subnetwork(&net, query)
                    .map_err(|e| EngineError::Hard(map_ground_error(e)))?
            } else {
                net
            };
            match query_probability_capped(&net, query, root_cap) {
                Ok(value) => Ok(Outcome { value, calls: None }),
                Err(e) => Err(EngineError::Hard(map_infer_error(e))),
            }
        }
    }
}

fn map_infer_error(e: InferError) -> Failure {
    let code = match &e {
        InferError::ZeroEvidence => EXIT_ZERO_EVIDENCE,
        InferError::RootCapExceeded { .. } => EXIT_RESOURCE,
        InferError::Ground(g) => return map_ground_error(g.clone()),
        _ => EXIT_INVALID,
    };
    fail(code, e.to_string())
}

fn map_ground_error(e: GroundError) -> Failure {
    let code = match &e {
        GroundError::TooManyNodes { .. } => EXIT_RESOURCE,
        _ => EXIT_INVALID,
    };
    fail(code, e.to_string())
}

fn map_dllite_error(e: DlliteError) -> Failure {
    let code = match &e {
        DlliteError::ZeroEvidence => EXIT_ZERO_EVIDENCE,
        DlliteError::EdgeCover(EdgeCoverError::UnsupportedShape { .. }) => EXIT_RESOURCE,
        _ => EXIT_INVALID,
    };
    fail(code, e.to_string())
}

fn map_edgecover_error(e: EdgeCoverError) -> Failure {
    let code = match &e {
        EdgeCoverError::TooManyEdges { .. } | EdgeCoverError::UnsupportedShape { .. } => {
            EXIT_RESOURCE
        }
        _ => EXIT_INVALID,
    };
    fail(code, e.to_string())
}

fn map_encode_error(e: EncodeError) -> Failure {
    let code = match &e {
        EncodeError::TooLarge { .. } => EXIT_RESOURCE,
        _ => EXIT_INVALID,
    };
    fail(code, e.to_string())
}

// ---------------------------------------------------------------------------
// count

fn cmd_count(args: &CountArgs, format: Format) -> Result<(), Failure> {
    let input = match (&args.graph, &args.class_b) {
        (Some(path), None) => {
            let text = read_file(path)?;
            parse_bwg(&text).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))?
        }
        (None, Some(sizes)) => {
            let [v1, v2, v3, v4]: [usize; 4] = sizes
                .clone()
                .try_into()
                .map_err(|_| fail(EXIT_INVALID, "--classB takes exactly four layer sizes"))?;
            BwgInput::ClassB(ClassBGraph::new(v1, v2, v3, v4))
        }
        _ => return Err(fail(EXIT_INVALID, "give exactly one of --graph or --classB")),
    };
    let lambda = args
        .lambda
        .as_deref()
        .map(|s| {
            parse_rational(s).map_err(|m| fail(EXIT_INVALID, format!("--lambda: {m}")))
        })
        .transpose()?;

    if let Some(steps) = args.sample {
        return cmd_count_sample(&input, lambda.as_ref(), steps, args.seed, format);
    }

    let start = Instant::now();
    // Weighted and unweighted counting share the routes; λ = 1 when absent.
    let (value, route_name, calls): (Rational, String, Option<u64>) = match &input {
        BwgInput::ClassB(cb) => {
            let one = Rational::from_integer(1.into());
            let lam = lambda.clone().unwrap_or(one);
            let (z, calls) =
                partition_function_with_calls(cb, &lam).map_err(map_edgecover_error)?;
            (z, "class-b".into(), Some(calls))
        }
        BwgInput::Graph(g) => match (&lambda, args.calls) {
            // The call counter lives on the layered recursion, so a call
            // report requires the graph to match that shape.
            (_, true) => {
                let cb = detect_class_b(g).ok_or_else(|| {
                    fail(EXIT_INVALID, "--calls requires a graph of the layered family")
                })?;
                let one = Rational::from_integer(1.into());
                let lam = lambda.clone().unwrap_or(one);
                let (z, calls) =
                    partition_function_with_calls(&cb, &lam).map_err(map_edgecover_error)?;
                (z, "class-b".into(), Some(calls))
            }
            (Some(lam), false) => {
                let (z, route) = partition_function_graph(g, lam).map_err(map_edgecover_error)?;
                (z, route.to_string(), None)
            }
            (None, false) => {
                let (count, route) = count_covers(g).map_err(map_edgecover_error)?;
                let value = Rational::from_integer(count.into());
                (value, route.to_string(), None)
            }
        },
    };
    let elapsed = start.elapsed().as_millis();

    if args.oracle {
        let g = materialize(&input)?;
        let expected = match &lambda {
            Some(lam) => partition_bruteforce(&g, lam).map_err(map_edgecover_error)?,
            None => {
                let count = count_covers_bruteforce(&g).map_err(map_edgecover_error)?;
                Rational::from_integer(count.into())
            }
        };
        if expected != value {
            return Err(fail(
                EXIT_INVALID,
                format!(
                    "oracle mismatch: route {route_name} found {}, brute force found {}",
                    render_rational(&value),
                    render_rational(&expected)
                ),
            ));
        }
        eprintln!("oracle: ok");
    }

    eprintln!("route: {route_name}");
    match format {
        Format::Text => {
            println!("{}", render_rational(&value));
            if args.calls {
                match calls {
                    Some(c) => println!("calls: {c}"),
                    None => unreachable!("--calls always routes through the layered counter"),
                }
            }
        }
        Format::JsonLines => emit_record(
            format,
            &route_name,
            Some(&value),
            None,
            if args.calls { calls } else { None },
            elapsed,
        ),
    }
    Ok(())
}

fn materialize(input: &BwgInput) -> Result<BwGraph, Failure> {
    match input {
        BwgInput::Graph(g) => Ok(g.clone()),
        BwgInput::ClassB(cb) => cb.to_bwgraph().map_err(map_edgecover_error),
    }
}

fn cmd_count_sample(
    input: &BwgInput,
    lambda: Option<&Rational>,
    steps: u64,
    seed: u64,
    format: Format,
) -> Result<(), Failure> {
    let g = materialize(input)?;
    let one = Rational::from_integer(1.into());
    let lam = lambda.unwrap_or(&one);
    let start = Instant::now();
    let state = glauber_sample(&g, lam, steps, seed).map_err(map_edgecover_error)?;
    let elapsed = start.elapsed().as_millis();
    eprintln!("route: glauber");
    match format {
        Format::Text => {
            let edges: Vec<String> =
                state.iter().map(|(a, b)| format!("{a}-{b}")).collect();
            println!("{}", edges.join(" "));
        }
        Format::JsonLines => {
            // The record's value reports the sampled cover's size; the
            // edge list itself is text-format output.
            let size = Rational::from_integer((state.len() as u64).into());
            emit_record(format, "glauber", Some(&size), None, None, elapsed);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// encode

fn cmd_encode(args: &EncodeArgs, format: Format) -> Result<(), Failure> {
    match &args.what {
        EncodeCmd::Plate { input, out, verify } => {
            let text = read_file(input)?;
            let start = Instant::now();
            let model = parse_plate(&text)
                .map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", input.display())))?;
            let spec = plate_to_spec(&model).map_err(map_encode_error)?;
            let rendered = render_spec(&spec);
            if *verify {
                verify_spec_round_trip(&spec, &rendered)?;
                eprintln!("verify: ok");
            }
            let out = out.clone().unwrap_or_else(|| input.with_extension("rbn"));
            write_file(&out, &rendered)?;
            report_encode(format, "plate", &out, start.elapsed().as_millis());
        }
        EncodeCmd::Prm { input, n, out, verify } => {
            let text = read_file(input)?;
            let start = Instant::now();
            let (prm, skeleton) = parse_prm(&text)
                .map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", input.display())))?;
            let (spec, evidence) = prm_to_spec(&prm, &skeleton, *n).map_err(map_encode_error)?;
            let rendered = render_spec(&spec);
            if *verify {
                verify_spec_round_trip(&spec, &rendered)?;
                eprintln!("verify: ok");
            }
            let out = out.clone().unwrap_or_else(|| input.with_extension("rbn"));
            write_file(&out, &rendered)?;
            // The closed-world skeleton evidence, in query syntax, ready to
            // paste after `|` in an `infer --query`.
            println!("evidence: {}", render_evidence(&evidence));
            report_encode(format, "prm", &out, start.elapsed().as_millis());
        }
        EncodeCmd::Gadget { input, out, verify } => {
            let text = read_file(input)?;
            let start = Instant::now();
            let phi = parse_dimacs(&text)
                .map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", input.display())))?;
            let gadget = one_in_three_gadget(&phi).map_err(map_encode_error)?;
            if *verify {
                let models = count_models_cnf3(&phi).map_err(map_encode_error)?;
                let ones = count_one_in_three(&gadget).map_err(map_encode_error)?;
                if models != ones {
                    return Err(fail(
                        EXIT_INVALID,
                        format!("verification failed: {models} models vs {ones} exactly-one assignments"),
                    ));
                }
                eprintln!("verify: ok");
            }
            let out = out.clone().unwrap_or_else(|| input.with_extension("gadget.cnf"));
            write_file(&out, &render_dimacs(&gadget))?;
            report_encode(format, "gadget", &out, start.elapsed().as_millis());
        }
        EncodeCmd::Matrix { covered_rows, covered_cols, rows, cols, to, out, verify } => {
            let start = Instant::now();
            let problem = MatrixProblem::new(*covered_rows, *covered_cols, *rows, *cols)
                .map_err(map_encode_error)?;
            let cnf = matrix_problem_to_formula(&problem).map_err(map_encode_error)?;
            if *verify {
                let matrices = count_matrices(&problem).map_err(map_encode_error)?;
                let models = count_models_monotone(&cnf).map_err(map_encode_error)?;
                let cb = linmoncbpc_to_bwgraph(&cnf).map_err(map_encode_error)?;
                let (covers, _) =
                    count_covers_class_b_with_calls(&cb).map_err(map_edgecover_error)?;
                if matrices != models || models != covers {
                    return Err(fail(
                        EXIT_INVALID,
                        format!("verification failed: {matrices} matrices, {models} models, {covers} covers"),
                    ));
                }
                eprintln!("verify: ok");
            }
            let rendered = match to {
                MatrixTarget::Cnf => render_monotone_dimacs(&cnf),
                MatrixTarget::Bwg => {
                    let cb = linmoncbpc_to_bwgraph(&cnf).map_err(map_encode_error)?;
                    let g = cb.to_bwgraph().map_err(map_edgecover_error)?;
                    render_bwg(&g)
                }
            };
            match out {
                Some(path) => {
                    write_file(path, &rendered)?;
                    report_encode(format, "matrix", path, start.elapsed().as_millis());
                }
                None => {
                    print!("{rendered}");
                    emit_record(format, "matrix", None, None, None, start.elapsed().as_millis());
                }
            }
        }
    }
    Ok(())
}

/// The written specification must parse back to the same syntax tree and
/// pass validation — the encoder's output is usable as an `infer` input.
fn verify_spec_round_trip(spec: &RelationalSpec, rendered: &str) -> Result<(), Failure> {
    let reparsed = parse_spec(rendered)
        .map_err(|e| fail(EXIT_INVALID, format!("verification failed to re-parse: {e}")))?;
    if &reparsed != spec {
        return Err(fail(EXIT_INVALID, "verification failed: output does not round-trip"));
    }
    let report = validate_spec(spec);
    if !report.is_valid() {
        return Err(fail(EXIT_INVALID, format!("verification failed:\n{report}")));
    }
    Ok(())
}

fn render_evidence(evidence: &[(GroundAtom, bool)]) -> String {
    let parts: Vec<String> = evidence
        .iter()
        .map(|(atom, v)| format!("{atom}={}", if *v { 1 } else { 0 }))
        .collect();
    parts.join(", ")
}

fn report_encode(format: Format, kind: &str, out: &Path, elapsed_ms: u128) {
    eprintln!("wrote {}", out.display());
    if let Format::JsonLines = format {
        emit_record(format, kind, None, None, None, elapsed_ms);
    }
}

/// DIMACS-style rendering for monotone clauses of arbitrary width.
fn render_monotone_dimacs(cnf: &MonotoneCnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    for clause in &cnf.clauses {
        for var in clause {
            out.push_str(&format!("{var} "));
        }
        out.push_str("0\n");
    }
    out
}
