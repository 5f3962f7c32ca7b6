//! Command-line front end: classify and compile patterns, evaluate queries
//! over documents, plan RA-tree queries, and generate hardness-reduction
//! instances from DIMACS CNF files.
//!
//! Exit codes: 0 on success, 1 on domain errors (error JSON on standard
//! error), 2 on usage errors.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use spanner::enumerate::enumerate;
use spanner::error::{Error, Result};
use spanner::model::Document;
use spanner::ratree::{
    eval_query, load_instantiation, parse_ra_tree, validate_plan, EvalConfig,
};
use spanner::reductions::{
    gen_diff_3sat, gen_diff_bounded_occ, gen_diff_weighted, gen_join_3sat,
    CnfFormula,
};
use spanner::regex::{classify, infer_alphabet, oracle_eval, parse_regex, RegexFormula};
use spanner::va::{compile_regex, oracle_eval_va, va_from_json, va_to_json};

#[derive(Parser)]
#[command(name = "spanner", version, about = "Document spanner engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct DocArgs {
    /// Inline document text.
    #[arg(long, value_name = "TEXT")]
    doc_text: Option<String>,
    /// Document file (UTF-8); newlines are ordinary symbols.
    #[arg(long, value_name = "FILE", conflicts_with = "doc_text")]
    doc: Option<PathBuf>,
}

impl DocArgs {
    fn load(&self) -> std::result::Result<Document, String> {
        match (&self.doc_text, &self.doc) {
            (Some(t), None) => Ok(Document::new(t)),
            (None, Some(p)) => std::fs::read_to_string(p)
                .map(|t| Document::new(&t))
                .map_err(|e| format!("cannot read document file {}: {e}", p.display())),
            _ => Err("exactly one of --doc-text and --doc is required".into()),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Report a pattern's syntactic classes (functional, sequential, ...).
    Classify {
        #[arg(long)]
        regex: String,
        /// Explicit alphabet (a string of symbols); default: pattern literals.
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Compile a pattern to a vset-automaton, printed as JSON.
    Compile {
        #[arg(long)]
        regex: String,
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Evaluate a pattern, a VA file, or an RA-tree query on a document;
    /// prints one JSON mapping per line, streamed.
    Eval {
        #[arg(long, conflicts_with_all = ["va", "tree", "inst"])]
        regex: Option<String>,
        /// Vset-automaton JSON file.
        #[arg(long, conflicts_with_all = ["tree", "inst"])]
        va: Option<PathBuf>,
        /// RA-tree JSON file (requires --inst).
        #[arg(long, requires = "inst")]
        tree: Option<PathBuf>,
        /// Instantiation JSON file.
        #[arg(long, requires = "tree")]
        inst: Option<PathBuf>,
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        alphabet: Option<String>,
        /// Shared-variable bound for joins and differences.
        #[arg(short, default_value_t = 3)]
        k: usize,
        /// Black-box timeout in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
    },
    /// Check an RA-tree query's shared-variable bound and report per-node
    /// strategies.
    Plan {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        inst: PathBuf,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Generate a reduction instance from a DIMACS CNF file: writes
    /// <prefix>.tree.json, <prefix>.inst.json, <prefix>.doc.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Brute-force reference evaluation of a pattern or VA file.
    Oracle {
        #[arg(long)]
        regex: Option<String>,
        #[arg(long, conflicts_with = "regex")]
        va: Option<PathBuf>,
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        alphabet: Option<String>,
    },
}

#[derive(Args)]
struct GenArgs {
    /// DIMACS CNF input file.
    #[arg(long)]
    cnf: PathBuf,
    /// Output path prefix.
    #[arg(long, default_value = "instance")]
    out_prefix: String,
}

#[derive(Subcommand)]
enum GenKind {
    /// Join nonemptiness is satisfiability of the CNF.
    #[command(name = "join-3sat")]
    Join3sat(GenArgs),
    /// Difference nonemptiness is satisfiability of the CNF.
    #[command(name = "diff-3sat")]
    Diff3sat(GenArgs),
    /// Difference instance with bounded variable occurrences.
    DiffBounded(GenArgs),
    /// Difference nonemptiness is weight-p satisfiability.
    DiffWeighted {
        #[command(flatten)]
        args: GenArgs,
        /// Target assignment weight.
        #[arg(short)]
        p: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => {}
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(RunError::Domain(e)) => {
            let kind = match &e {
                Error::Parse { .. } => "parse",
                Error::SpanOutOfRange { .. } => "span_out_of_range",
                Error::Contract(_) => "contract",
                Error::SharedBound { .. } => "shared_bound",
                Error::PlanRefused(_) => "plan_refused",
                Error::BlackBox { .. } => "black_box",
                Error::Invalid(_) => "invalid",
                Error::Io { .. } => "io",
                Error::Json { .. } => "json",
            };
            eprintln!("{}", serde_json::json!({"error": {"kind": kind, "message": e.to_string()}}));
            std::process::exit(1);
        }
    }
}

enum RunError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Domain(e)
    }
}

fn alphabet_flag(flag: &Option<String>) -> std::result::Result<Option<BTreeSet<char>>, RunError> {
    match flag {
        None => Ok(None),
        Some(s) if s.is_empty() => {
            Err(RunError::Usage("--alphabet must be nonempty when given".into()))
        }
        Some(s) => Ok(Some(s.chars().collect())),
    }
}

/// Alphabet for a single pattern: explicit flag, else pattern literals plus
/// document symbols.
fn pattern_alphabet(
    regex: &str,
    flag: &Option<String>,
    d: Option<&Document>,
) -> std::result::Result<BTreeSet<char>, RunError> {
    if let Some(a) = alphabet_flag(flag)? {
        return Ok(a);
    }
    let base = d.map(|d| d.alphabet()).unwrap_or_default();
    Ok(infer_alphabet(regex, &base)?)
}

fn parse_with(regex: &str, flag: &Option<String>, d: Option<&Document>)
    -> std::result::Result<RegexFormula, RunError>
{
    let alphabet = pattern_alphabet(regex, flag, d)?;
    Ok(parse_regex(regex, &alphabet)?)
}

fn read_file(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {what} `{}`", path.display()),
        source,
    })
}

fn load_va(path: &Path) -> Result<spanner::va::Va> {
    let text = read_file(path, "VA file")?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("VA file `{}`", path.display()),
        source,
    })?;
    va_from_json(&v)
}

fn print_mapping_lines(
    mappings: impl IntoIterator<Item = spanner::model::Mapping>,
) -> std::result::Result<(), RunError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for m in mappings {
        // Flush per line so consumers see results as they are produced.
        if let Err(source) = writeln!(out, "{}", m.to_json()).and_then(|()| out.flush()) {
            // A closed consumer (e.g. `| head`) ends the stream normally.
            if source.kind() == std::io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(Error::Io { context: "writing results".into(), source }.into());
        }
    }
    Ok(())
}

fn run(cmd: Cmd) -> std::result::Result<(), RunError> {
    match cmd {
        Cmd::Classify { regex, alphabet } => {
            let ast = parse_with(&regex, &alphabet, None)?;
            let report = classify(&ast);
            let vars: Vec<String> = ast.vars().iter().map(|x| x.to_string()).collect();
            println!(
                "{}",
                serde_json::json!({
                    "functional": report.functional,
                    "sequential": report.sequential,
                    "disjunctive_functional": report.disjunctive_functional,
                    "disjunction_free": report.disjunction_free,
                    "vars": vars,
                })
            );
            Ok(())
        }
        Cmd::Compile { regex, alphabet } => {
            let ast = parse_with(&regex, &alphabet, None)?;
            println!("{}", va_to_json(&compile_regex(&ast)));
            Ok(())
        }
        Cmd::Eval { regex, va, tree, inst, doc, alphabet, k, timeout } => {
            let d = doc.load().map_err(RunError::Usage)?;
            match (regex, va, tree, inst) {
                (Some(rx), None, None, None) => {
                    let ast = parse_with(&rx, &alphabet, Some(&d))?;
                    let stream = enumerate(&compile_regex(&ast).trim(), &d)?;
                    print_mapping_lines(stream)
                }
                (None, Some(path), None, None) => {
                    let a = load_va(&path)?;
                    let stream = enumerate(&a.trim(), &d)?;
                    print_mapping_lines(stream)
                }
                (None, None, Some(tree_path), Some(inst_path)) => {
                    let tree = parse_ra_tree(&read_file(&tree_path, "RA-tree file")?)?;
                    let inst = load_instantiation(&read_file(&inst_path, "instantiation file")?)?;
                    let cfg = EvalConfig {
                        k,
                        alphabet: alphabet_flag(&alphabet)?,
                        blackbox_timeout: Duration::from_secs_f64(timeout),
                    };
                    let stream = eval_query(&tree, &inst, &d, &cfg)?;
                    print_mapping_lines(stream)
                }
                _ => Err(RunError::Usage(
                    "exactly one of --regex, --va, or --tree with --inst is required".into(),
                )),
            }
        }
        Cmd::Plan { tree, inst, k, alphabet } => {
            let tree = parse_ra_tree(&read_file(&tree, "RA-tree file")?)?;
            let inst = load_instantiation(&read_file(&inst, "instantiation file")?)?;
            // The alphabet flag feeds planning only through node variable
            // sets, which are alphabet-independent; accept and validate it
            // for interface symmetry.
            alphabet_flag(&alphabet)?;
            let report = validate_plan(&tree, &inst, k)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(())
        }
        Cmd::Gen { kind } => {
            let (args, op, outputs) = match kind {
                GenKind::Join3sat(args) => {
                    let phi = read_cnf(&args.cnf)?;
                    (args, "join", gen_join_3sat(&phi)?)
                }
                GenKind::Diff3sat(args) => {
                    let phi = read_cnf(&args.cnf)?;
                    (args, "difference", gen_diff_3sat(&phi)?)
                }
                GenKind::DiffBounded(args) => {
                    let phi = read_cnf(&args.cnf)?;
                    (args, "difference", gen_diff_bounded_occ(&phi)?)
                }
                GenKind::DiffWeighted { args, p } => {
                    let phi = read_cnf(&args.cnf)?;
                    (args, "difference", gen_diff_weighted(&phi, p)?)
                }
            };
            let (g1, g2, d) = outputs;
            let prefix = &args.out_prefix;
            let tree_path = format!("{prefix}.tree.json");
            let inst_path = format!("{prefix}.inst.json");
            let doc_path = format!("{prefix}.doc");
            let tree = serde_json::json!({
                "op": op, "left": {"leaf": "g1"}, "right": {"leaf": "g2"}
            });
            let inst = serde_json::json!({
                "g1": {"regex": g1.to_string()},
                "g2": {"regex": g2.to_string()},
            });
            for (path, contents) in [
                (&tree_path, tree.to_string()),
                (&inst_path, inst.to_string()),
                (&doc_path, d.to_string()),
            ] {
                std::fs::write(path, contents).map_err(|source| Error::Io {
                    context: format!("writing `{path}`"),
                    source,
                })?;
            }
            println!(
                "{}",
                serde_json::json!({"tree": tree_path, "inst": inst_path, "doc": doc_path})
            );
            Ok(())
        }
        Cmd::Oracle { regex, va, doc, alphabet } => {
            let d = doc.load().map_err(RunError::Usage)?;
            let set = match (regex, va) {
                (Some(rx), None) => {
                    let ast = parse_with(&rx, &alphabet, Some(&d))?;
                    oracle_eval(&ast, &d)
                }
                (None, Some(path)) => oracle_eval_va(&load_va(&path)?, &d),
                _ => {
                    return Err(RunError::Usage(
                        "exactly one of --regex and --va is required".into(),
                    ))
                }
            };
            print_mapping_lines(set)
        }
    }
}

fn read_cnf(path: &Path) -> Result<CnfFormula> {
    CnfFormula::from_dimacs(&read_file(path, "DIMACS CNF file")?)
}
