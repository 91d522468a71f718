use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use chasegate::analysis::{build_ucq, UcqVariant};
use chasegate::chase::{forest_edges, run_chase, CapKind, ChaseOptions, ChaseStatus, Strategy};
use chasegate::generators::{self, RandomParams, TmSpec, GUARDED_PARAM_LIMIT};
use chasegate::linearize::{
    linearize_program, LinOptions, DEFAULT_TABLE_BUDGET, DEFAULT_TYPE_BUDGET,
};
use chasegate::simplify::{simplify_program, DEFAULT_ARITY_CAP};
use chasegate::termination::{
    cap_name, cross_validate, decide, decide_by_bound, Answer, DecideOptions, Evidence, Verdict,
    DEFAULT_CEILING, DEFAULT_CHASE_CAP, REPORT_VERSION,
};
use chasegate::text::{parse_program, render_program};
use chasegate::{Class, Database, Error, Program};

const EXIT_DIVERGES: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOINPUT: u8 = 66;
const EXIT_UNAVAILABLE: u8 = 69;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IOERR: u8 = 74;

#[derive(Parser)]
#[command(
    name = "chasegate",
    version,
    about = "Semi-oblivious chase and chase termination for existential rules"
)]
struct Cli {
    /// Write the main output here instead of standard output.
    #[arg(short, long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it in normal form.
    Parse {
        /// Program file, or - for standard input
        file: String,
        /// Print a JSON report
        #[arg(long)]
        json: bool,
    },
    /// Run the chase under caps.
    Chase(ChaseArgs),
    /// Decide whether the chase terminates.
    Decide(DecideArgs),
    /// Print simple(D) and simple(Σ) for a linear program.
    Simplify {
        /// Program file, or - for standard input
        file: String,
        /// Largest arity to specialize
        #[arg(long, default_value_t = DEFAULT_ARITY_CAP)]
        arity_cap: usize,
    },
    /// Print lin(D) and lin(Σ) for a guarded program.
    Linearize(LinearizeArgs),
    /// Print the database-independent query that holds iff the program is not weakly acyclic for D.
    Ucq {
        /// Program file, or - for standard input
        file: String,
    },
    /// Generate an instance family.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Decide a program by every applicable method and compare.
    Validate {
        /// Program file, or - for standard input
        file: String,
        #[arg(long, default_value_t = DEFAULT_CEILING)]
        ceiling: u64,
        /// Print a JSON report
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Fifo,
    Lifo,
    Random,
}

#[derive(Args)]
struct ChaseArgs {
    /// Program file, or - for standard input
    file: String,
    #[arg(long, default_value_t = DEFAULT_CHASE_CAP)]
    max_atoms: usize,
    /// Defaults to ten times --max-atoms.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Stop once an atom of this depth appears
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Fifo)]
    strategy: StrategyArg,
    /// Seed for --strategy random.
    #[arg(long)]
    seed: Option<u64>,
    /// Print a JSON report
    #[arg(long)]
    json: bool,
    /// Write the guarded chase forest as a JSON edge list.
    #[arg(long, value_name = "PATH")]
    emit_forest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Auto,
    Sl,
    L,
    G,
    General,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Characterization,
    Bound,
}

#[derive(Args)]
struct DecideArgs {
    /// Program file, or - for standard input
    file: String,
    #[arg(long, value_enum, default_value_t = ClassArg::Auto)]
    class: ClassArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Characterization)]
    method: MethodArg,
    /// Print a JSON report
    #[arg(long)]
    json: bool,
    /// Largest atom cap the bound method may use.
    #[arg(long, default_value_t = DEFAULT_CEILING)]
    ceiling: u64,
    /// Atom cap for general programs.
    #[arg(long, default_value_t = DEFAULT_CHASE_CAP)]
    chase_cap: usize,
    #[arg(long)]
    full_type_enum: bool,
    #[arg(long, default_value_t = DEFAULT_TYPE_BUDGET)]
    type_budget: usize,
    /// Largest arity to specialize
    #[arg(long, default_value_t = DEFAULT_ARITY_CAP)]
    arity_cap: usize,
}

#[derive(Args)]
struct LinearizeArgs {
    /// Program file, or - for standard input
    file: String,
    #[arg(long)]
    full_type_enum: bool,
    #[arg(long, default_value_t = DEFAULT_TYPE_BUDGET)]
    type_budget: usize,
    /// Write the type table as JSON.
    #[arg(long, value_name = "PATH")]
    types: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Family {
    /// Simple-linear lower-bound family.
    SlLb(LowerBound),
    /// Linear lower-bound family.
    LinLb(LowerBound),
    /// Guarded lower-bound family.
    GLb {
        #[command(flatten)]
        params: LowerBound,
        /// Allow n or m above 2.
        #[arg(long)]
        allow_large: bool,
    },
    /// Chain database whose chase reaches depth n-1.
    Depth {
        #[arg(long)]
        n: usize,
    },
    /// Turing machine encoding of a machine spec file.
    Tm {
        /// Machine spec file, see docs/tm-format.md
        spec: String,
    },
    /// Seeded random program.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClassArg::Sl)]
        class: ClassArg,
        #[arg(long, default_value_t = 3)]
        preds: usize,
        #[arg(long, default_value_t = 2)]
        max_arity: usize,
        #[arg(long, default_value_t = 3)]
        tgds: usize,
        #[arg(long, default_value_t = 3)]
        facts: usize,
        /// Orient all edges so that the program is weakly acyclic.
        #[arg(long, conflicts_with = "unconstrained")]
        acyclic: bool,
        #[arg(long)]
        unconstrained: bool,
    },
}

#[derive(Args)]
struct LowerBound {
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
}

enum Failure {
    Core(Error),
    Input(String),
    Output(String),
    Data(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Core(e)
    }
}

fn exit_code_of(e: &Error) -> u8 {
    match e {
        Error::WrongClass { .. } | Error::ZeroCap | Error::Generator(_) => EXIT_USAGE,
        Error::CeilingExceeded { .. } => EXIT_UNKNOWN,
        Error::BudgetExceeded { .. }
        | Error::ArityCapExceeded { .. }
        | Error::ChaseCapExceeded(_) => EXIT_UNAVAILABLE,
        _ => EXIT_DATA,
    }
}

fn read_input(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Failure::Input(format!("{path}: {e}")))?;
    Ok(text)
}

fn load(path: &str) -> Result<(Database, Program), Failure> {
    let text = read_input(path)?;
    let sp = parse_program(&text).map_err(|e| match e {
        Error::Parse(pe) => Failure::Data(format!("{path}:{pe}")),
        other => Failure::Core(other),
    })?;
    sp.db.check_arities(&sp.program)?;
    Ok((sp.db, sp.program))
}

fn class_of(c: ClassArg) -> Option<Class> {
    match c {
        ClassArg::Auto => None,
        ClassArg::Sl => Some(Class::SimpleLinear),
        ClassArg::L => Some(Class::Linear),
        ClassArg::G => Some(Class::Guarded),
        ClassArg::General => Some(Class::General),
    }
}

struct Out {
    path: Option<PathBuf>,
    buf: String,
}

impl Out {
    fn line(&mut self, s: impl AsRef<str>) {
        self.buf.push_str(s.as_ref());
        self.buf.push('\n');
    }

    fn json(&mut self, v: &Value) {
        self.line(serde_json::to_string_pretty(v).expect("JSON values always serialize"));
    }

    fn flush(self) -> Result<(), Failure> {
        match &self.path {
            Some(p) => fs::write(p, &self.buf)
                .map_err(|e| Failure::Output(format!("{}: {e}", p.display()))),
            None => {
                let mut stdout = io::stdout().lock();
                stdout
                    .write_all(self.buf.as_bytes())
                    .and_then(|_| stdout.flush())
                    .or_else(|e| {
                        if e.kind() == io::ErrorKind::BrokenPipe {
                            Ok(())
                        } else {
                            Err(Failure::Output(format!("stdout: {e}")))
                        }
                    })
            }
        }
    }
}

fn write_file(path: &PathBuf, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("JSON values always serialize") + "\n";
    fs::write(path, text).map_err(|e| Failure::Output(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = Out {
        path: cli.output.clone(),
        buf: String::new(),
    };
    let result = run(cli.command, &mut out);
    let flushed = out.flush();
    match result.and_then(|code| flushed.map(|_| code)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (code, msg) = match f {
                Failure::Core(e) => (exit_code_of(&e), e.to_string()),
                Failure::Input(msg) => (EXIT_NOINPUT, msg),
                Failure::Output(msg) => (EXIT_IOERR, msg),
                Failure::Data(msg) => (EXIT_DATA, msg),
                Failure::Usage(msg) => (EXIT_USAGE, msg),
            };
            eprintln!("chasegate: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command, out: &mut Out) -> Result<u8, Failure> {
    match cmd {
        Command::Parse { file, json } => {
            let (db, p) = load(&file)?;
            if json {
                let schema: serde_json::Map<String, Value> = p
                    .schema()
                    .iter()
                    .map(|(k, v)| (k.as_str().to_owned(), json!(v)))
                    .collect();
                out.json(&json!({
                    "version": REPORT_VERSION,
                    "class": p.classify().short(),
                    "facts": db.len(),
                    "tgds": p.len(),
                    "schema": schema,
                    "max_arity": p.max_arity(),
                    "norm": p.norm().to_string(),
                }));
            } else {
                out.buf.push_str(&render_program(&db, &p));
            }
            Ok(0)
        }
        Command::Chase(args) => chase(args, out),
        Command::Decide(args) => decide_cmd(args, out),
        Command::Simplify { file, arity_cap } => {
            let (db, p) = load(&file)?;
            let s = simplify_program(&db, &p, arity_cap)?;
            out.buf.push_str(&render_program(&s.db, &s.program));
            Ok(0)
        }
        Command::Linearize(args) => {
            let (db, p) = load(&args.file)?;
            let opts = LinOptions {
                full_type_enum: args.full_type_enum,
                type_budget: args.type_budget,
                table_budget: DEFAULT_TABLE_BUDGET,
            };
            let lin = linearize_program(&db, &p, opts)?;
            for (name, t) in &lin.types {
                out.line(format!("% {} = {}", name.as_str(), t.render()));
            }
            out.buf.push_str(&render_program(&lin.db, &lin.program));
            if let Some(path) = &args.types {
                write_file(path, &lin.type_table_json())?;
            }
            Ok(0)
        }
        Command::Ucq { file } => {
            let (_, p) = load(&file)?;
            let variant = match p.classify() {
                Class::SimpleLinear => UcqVariant::SimpleLinear,
                _ => UcqVariant::LinearSimplified,
            };
            out.buf.push_str(&build_ucq(&p, variant)?.to_string());
            Ok(0)
        }
        Command::Gen { family } => {
            let (db, p) = generate(family)?;
            out.buf.push_str(&render_program(&db, &p));
            Ok(0)
        }
        Command::Validate {
            file,
            ceiling,
            json,
        } => validate(&file, ceiling, json, out),
    }
}

fn chase(args: ChaseArgs, out: &mut Out) -> Result<u8, Failure> {
    let strategy = match (args.strategy, args.seed) {
        (StrategyArg::Fifo, None) => Strategy::Fifo,
        (StrategyArg::Lifo, None) => Strategy::Lifo,
        (StrategyArg::Random, Some(s)) => Strategy::Random(s),
        (StrategyArg::Random, None) => {
            return Err(Failure::Usage("--strategy random needs --seed".into()))
        }
        (_, Some(_)) => {
            return Err(Failure::Usage(
                "--seed only applies to --strategy random".into(),
            ))
        }
    };
    let (db, p) = load(&args.file)?;
    let mut opts = ChaseOptions::new(args.max_atoms).strategy(strategy);
    if let Some(s) = args.max_steps {
        opts = opts.max_steps(s);
    }
    if let Some(d) = args.max_depth {
        opts = opts.max_depth(d);
    }
    if args.emit_forest.is_some() {
        if p.classify() > Class::Guarded {
            return Err(Failure::Usage(
                "--emit-forest needs a guarded program".into(),
            ));
        }
        opts = opts.with_forest();
    }
    let res = run_chase(&db, &p, opts)?;
    let cap: Option<CapKind> = match res.status {
        ChaseStatus::Finished => None,
        ChaseStatus::CapExceeded { which, .. } => Some(which),
    };
    let atoms: Vec<String> = (0..res.len())
        .map(|i| res.instance.render_atom(i as _))
        .collect();
    if let Some(path) = &args.emit_forest {
        let edges: Vec<Value> = forest_edges(&res)
            .unwrap_or_default()
            .into_iter()
            .map(|(a, b)| json!([atoms[a as usize], atoms[b as usize]]))
            .collect();
        write_file(path, &json!({ "edges": edges }))?;
    }
    let verdict = if cap.is_none() {
        "finished"
    } else {
        "cap-exceeded"
    };
    if args.json {
        out.json(&json!({
            "version": REPORT_VERSION,
            "verdict": verdict,
            "class": p.classify().short(),
            "stats": { "atoms": res.len(), "maxdepth": res.max_depth(), "steps": res.steps },
            "cap": cap.map(cap_name),
            "witness": Value::Null,
            "bounds": Value::Null,
            "instance": atoms,
        }));
    } else {
        for a in &atoms {
            out.line(format!("{a}."));
        }
        let cap = cap
            .map(|c| format!(" ({} cap)", cap_name(c)))
            .unwrap_or_default();
        out.line(format!(
            "% {verdict}{cap}: atoms={} maxdepth={} steps={}",
            res.len(),
            res.max_depth(),
            res.steps
        ));
    }
    Ok(if cap.is_none() { 0 } else { EXIT_UNKNOWN })
}

fn answer_code(a: Answer) -> u8 {
    match a {
        Answer::Terminates => 0,
        Answer::Diverges => EXIT_DIVERGES,
        Answer::Unknown => EXIT_UNKNOWN,
    }
}

fn describe(v: &Verdict) -> Vec<String> {
    let mut lines = vec![format!("{} ({}, {})", v.answer, v.class, v.method.as_str())];
    match &v.evidence {
        Evidence::Acyclic { stage } => lines.push(format!(
            "no supported special cycle in the {} program",
            stage.as_str()
        )),
        Evidence::Cycle { stage, witness } => {
            lines.push(format!("in the {} program:", stage.as_str()));
            lines.push(format!(
                "special edge: {} -> {}",
                witness.special.0, witness.special.1
            ));
            let cycle: Vec<String> = witness.cycle.iter().map(ToString::to_string).collect();
            lines.push(format!("cycle: {}", cycle.join(" -> ")));
            lines.push(format!(
                "support: {}",
                chasegate::text::render_pred(witness.support)
            ));
        }
        Evidence::Chase { stats, cap } => {
            let cap = cap
                .map(|c| format!(", stopped by the {} cap", cap_name(c)))
                .unwrap_or_default();
            lines.push(format!(
                "chase: atoms={} maxdepth={} steps={}{cap}",
                stats.atoms, stats.max_depth, stats.steps
            ));
        }
    }
    if let Some(b) = &v.bounds {
        lines.push(format!("bounds: d={} f={}", b.d.short(), b.f.short()));
    }
    for w in &v.warnings {
        lines.push(format!("warning: {w}"));
    }
    lines
}

fn decide_cmd(args: DecideArgs, out: &mut Out) -> Result<u8, Failure> {
    let (db, p) = load(&args.file)?;
    let class = class_of(args.class);
    let v = match args.method {
        MethodArg::Characterization => {
            let opts = DecideOptions {
                class,
                chase_cap: args.chase_cap,
                ceiling: args.ceiling,
                lin: LinOptions {
                    full_type_enum: args.full_type_enum,
                    type_budget: args.type_budget,
                    table_budget: DEFAULT_TABLE_BUDGET,
                },
                arity_cap: args.arity_cap,
            };
            decide(&db, &p, &opts)?
        }
        MethodArg::Bound => decide_by_bound(&db, &p, class, args.ceiling)?,
    };
    if args.json {
        out.json(&v.to_json());
    } else {
        for l in describe(&v) {
            out.line(l);
        }
    }
    Ok(answer_code(v.answer))
}

fn validate(file: &str, ceiling: u64, as_json: bool, out: &mut Out) -> Result<u8, Failure> {
    let (db, p) = load(file)?;
    let class = p.classify();
    let (agree, report) = match class {
        Class::SimpleLinear | Class::Linear => {
            let r = cross_validate(&db, &p, ceiling)?;
            let report = json!({
                "characterization": r.characterization.as_str(),
                "bound": r.bound.as_str(),
                "ucq_satisfied": r.ucq,
            });
            (r.agree(), report)
        }
        Class::Guarded => {
            let a = decide(&db, &p, &DecideOptions::default())?.answer;
            let b = decide_by_bound(&db, &p, None, ceiling)?.answer;
            (
                a == b,
                json!({ "characterization": a.as_str(), "bound": b.as_str() }),
            )
        }
        Class::General => {
            return Err(Error::WrongClass {
                expected: Class::Guarded,
                found: class,
            }
            .into())
        }
    };
    if as_json {
        out.json(&json!({
            "version": REPORT_VERSION,
            "class": class.short(),
            "agree": agree,
            "answers": report,
        }));
    } else {
        if let Value::Object(m) = &report {
            for (k, v) in m {
                out.line(format!(
                    "{k}: {}",
                    v.as_str()
                        .map(str::to_owned)
                        .unwrap_or_else(|| v.to_string())
                ));
            }
        }
        out.line(if agree { "agree" } else { "DISAGREE" });
    }
    Ok(if agree { 0 } else { EXIT_SOFTWARE })
}

fn generate(family: Family) -> Result<(Database, Program), Failure> {
    let g = match family {
        Family::SlLb(LowerBound { l, n, m }) => generators::gen_sl_lower(l, n, m)?,
        Family::LinLb(LowerBound { l, n, m }) => generators::gen_linear_lower(l, n, m)?,
        Family::GLb {
            params: LowerBound { l, n, m },
            allow_large,
        } => {
            let limit = if allow_large {
                usize::MAX
            } else {
                GUARDED_PARAM_LIMIT
            };
            generators::gen_guarded_lower(l, n, m, limit)?
        }
        Family::Depth { n } => generators::gen_depth_family(n)?,
        Family::Tm { spec } => generators::gen_tm(&TmSpec::parse(&read_input(&spec)?)?)?,
        Family::Random {
            seed,
            class,
            preds,
            max_arity,
            tgds,
            facts,
            acyclic,
            unconstrained,
        } => {
            let class = match class_of(class) {
                Some(c @ (Class::SimpleLinear | Class::Linear | Class::Guarded)) => c,
                _ => return Err(Error::Generator("--class must be sl, l or g".into()).into()),
            };
            let acyclic = if acyclic {
                Some(true)
            } else if unconstrained {
                Some(false)
            } else {
                None
            };
            generators::gen_random(
                &RandomParams {
                    class,
                    preds,
                    max_arity,
                    tgds,
                    facts,
                    acyclic,
                },
                seed,
            )?
        }
    };
    Ok(g)
}
