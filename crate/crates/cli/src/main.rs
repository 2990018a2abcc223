//! `unsat-lab`: build, analyze, normalize and certify unsatisfiable
//! matrices, run seeded scans, and play the stick game.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use unsat_lab::boolean::{parse_dimacs, write_cnf, write_nae, CnfFormula, DimacsFormula, NaeFormula};
use unsat_lab::certificates::{conjecture_value, tree_certificate};
use unsat_lab::matrix::{
    clause_variable_matrix, column_normalize, delta, discrepancy_bruteforce, is_disjoint_partition,
    is_unsatisfiable_bruteforce, RealMatrix,
};
use unsat_lab::normopt::{optimal_normalization, Method, NormProblem, SolverOptions};
use unsat_lab::resolution::{
    check_resolution, dpll_refute, parse_proof, proof_from_tree, serialize_proof, split_repeated_variables, ProofCheck,
    Refutation,
};
use unsat_lab::scan::{count_findings, scan_conjecture, scan_search, scan_trees, ScanConfig, ScanRecord};
use unsat_lab::stick::{parse_script, Move, StickGame};
use unsat_lab::tree::{complete_tree, BinaryTree, LiteralMask};
use unsat_lab::{Error, ENUMERATION_LIMIT, ONE_PLUS_SQRT2};

const EXIT_GUARD: u8 = 2;
const EXIT_FINDING: u8 = 3;

#[derive(Parser)]
#[command(
    name = "unsat-lab",
    version,
    about = "Unsatisfiable matrices, tree formulas and their discrepancy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write tree, formula, proof or matrix artifacts.
    Build(BuildArgs),
    /// Row-norm, discrepancy, unsatisfiability and partition report for a matrix.
    Analyze(AnalyzeArgs),
    /// Optimal column normalization of a formula's NAE matrix.
    Normalize(NormalizeArgs),
    /// Dual bounds for a tree, or conjecture values for a formula and proof.
    Certify(CertifyArgs),
    /// Refute a CNF formula and print a tree resolution proof.
    Prove(ProveArgs),
    /// Seeded randomized scans, one JSON record per line.
    Scan(ScanArgs),
    /// Play or replay the stick game.
    StickGame(StickArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Complete binary tree of depth K.
    #[arg(long, value_name = "K")]
    complete: Option<u32>,
    /// Tree file in s-expression form.
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
    /// DIMACS file (`p cnf` or `p naecnf`).
    #[arg(long, value_name = "FILE")]
    cnf: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TreeSource {
    #[arg(long, value_name = "K")]
    complete: Option<u32>,
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Tree,
    Dimacs,
    Nae,
    Proof,
    /// Sign matrix of the NAE formula.
    Matrix,
    /// Sign matrix with unit-norm columns.
    Normalized,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    source: TreeSource,
    #[arg(long, value_enum, default_value = "tree")]
    emit: Emit,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Matrix text file: a `rows cols` header, then one row per line.
    #[arg(long, value_name = "FILE")]
    matrix: PathBuf,
    /// Fail with a guard error instead of omitting exhaustive fields.
    #[arg(long)]
    exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Reweighted,
    Subgradient,
}

#[derive(Args)]
struct NormalizeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: u64,
    #[arg(long, value_enum, default_value = "reweighted")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    restarts: u32,
    /// Exit nonzero when the solver does not converge.
    #[arg(long)]
    strict: bool,
    /// Write the recovered normalized matrix here.
    #[arg(long, value_name = "FILE")]
    emit_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, value_name = "K", conflicts_with_all = ["tree", "cnf"])]
    complete: Option<u32>,
    #[arg(long, value_name = "FILE", conflicts_with = "cnf")]
    tree: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "proof")]
    cnf: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "cnf")]
    proof: Option<PathBuf>,
    #[arg(long)]
    strict_findings: bool,
}

#[derive(Args)]
struct ProveArgs {
    #[arg(long, value_name = "FILE")]
    cnf: PathBuf,
    /// Rename repeated pivots apart; the renamed formula goes to `--split-cnf`.
    #[arg(long, requires = "split_cnf")]
    split: bool,
    #[arg(long, value_name = "FILE")]
    split_cnf: Option<PathBuf>,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanMode {
    Trees,
    Conjecture,
    Search,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(value_enum)]
    mode: ScanMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances, or local moves for `search`.
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[arg(long, default_value_t = 64)]
    max_leaves: usize,
    #[arg(long, default_value_t = 12)]
    nvars: u32,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Aligned table instead of JSON lines.
    #[arg(long)]
    pretty: bool,
    #[arg(long)]
    strict_findings: bool,
}

#[derive(Args)]
struct StickArgs {
    /// One move per line, `pile: f1 f2 ...`; without it moves are read from stdin.
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn load_tree(complete: Option<u32>, tree: Option<&Path>) -> anyhow::Result<BinaryTree> {
    match (complete, tree) {
        (Some(k), _) => Ok(complete_tree(k)?),
        (None, Some(p)) => Ok(BinaryTree::parse(&read(p)?)?),
        (None, None) => bail!("a tree source is required"),
    }
}

fn load_cnf(path: &Path) -> anyhow::Result<CnfFormula> {
    match parse_dimacs(&read(path)?)? {
        DimacsFormula::Cnf(f) => Ok(f),
        DimacsFormula::Nae(_) => bail!("{} holds an NAE formula; a CNF is required", path.display()),
    }
}

fn load_nae(src: &Source) -> anyhow::Result<NaeFormula> {
    if let Some(p) = &src.cnf {
        return Ok(match parse_dimacs(&read(p)?)? {
            DimacsFormula::Cnf(f) => f.to_nae(),
            DimacsFormula::Nae(f) => f,
        });
    }
    let t = load_tree(src.complete, src.tree.as_deref())?;
    Ok(t.formula(&LiteralMask::empty())?.to_nae())
}

fn cmd_build(a: BuildArgs) -> anyhow::Result<u8> {
    let t = load_tree(a.source.complete, a.source.tree.as_deref())?;
    let f = t.formula(&LiteralMask::empty())?;
    let text = match a.emit {
        Emit::Tree => format!("{}\n", t.serialize()),
        Emit::Dimacs => write_cnf(&f),
        Emit::Nae => write_nae(&f.to_nae()),
        Emit::Proof => format!("{}\n", serialize_proof(&proof_from_tree(&t))),
        Emit::Matrix => clause_variable_matrix(&f.to_nae()).to_text(),
        Emit::Normalized => column_normalize(&clause_variable_matrix(&f.to_nae()).to_real()).to_text(),
    };
    write_out(a.output.as_deref(), &text)?;
    Ok(0)
}

fn cmd_analyze(a: AnalyzeArgs) -> anyhow::Result<u8> {
    let m = RealMatrix::parse(&read(&a.matrix)?)?;
    let n = m.cols();
    let mut report = Map::new();
    report.insert("rows".into(), json!(m.rows()));
    report.insert("cols".into(), json!(n));
    report.insert("delta".into(), json!(delta(&m)?));
    if n <= ENUMERATION_LIMIT || a.exact {
        let d = discrepancy_bruteforce(&m)?;
        let signs = m.sign();
        report.insert("discrepancy".into(), json!(d.value));
        report.insert("minimizer".into(), json!(d.minimizer));
        report.insert("unsat".into(), json!(is_unsatisfiable_bruteforce(&signs)?));
        report.insert("partition".into(), json!(is_disjoint_partition(&signs)));
    } else {
        report.insert(
            "skipped".into(),
            json!(format!("exhaustive fields need at most {ENUMERATION_LIMIT} columns")),
        );
    }
    print_json(&Value::Object(report));
    Ok(0)
}

fn cmd_normalize(a: NormalizeArgs) -> anyhow::Result<u8> {
    let f = load_nae(&a.source)?;
    let p = NormProblem::from_nae(&f)?;
    let opts = SolverOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        seed: a.seed,
        method: match a.method {
            MethodArg::Reweighted => Method::Reweighted,
            MethodArg::Subgradient => Method::Subgradient,
        },
        restarts: a.restarts,
    };
    let (primal, _, report) = optimal_normalization(&p, &opts)?;
    if let Some(path) = &a.emit_matrix {
        let m = primal.to_matrix(&clause_variable_matrix(&f));
        fs::write(path, m.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut v = serde_json::to_value(&report)?;
    v["rows"] = json!(p.m());
    v["cols"] = json!(p.n());
    v["value"] = json!(report.primal_value);
    print_json(&v);
    if a.strict && !report.converged {
        eprintln!(
            "solver did not converge: gap {} after {} iterations",
            report.gap, report.iterations
        );
        return Ok(1);
    }
    Ok(0)
}

fn cmd_certify(a: CertifyArgs) -> anyhow::Result<u8> {
    let (report, finding) = match (&a.cnf, &a.proof) {
        (Some(cnf), Some(proof)) => {
            let f = load_cnf(cnf)?;
            let q = parse_proof(&read(proof)?, &f)?;
            if let ProofCheck::Invalid(v) = check_resolution(&f, &q) {
                bail!(Error::InvalidProof(format!("{v:?}")));
            }
            let c = conjecture_value(&f, &q)?;
            let finding = c.value >= ONE_PLUS_SQRT2 || !c.forms_agree() || c.weak_value < c.value - 1e-10;
            let v = json!({
                "value": c.value,
                "weak_value": c.weak_value,
                "nae_objective": c.nae_objective,
                "forms_agree": c.forms_agree(),
                "limit": ONE_PLUS_SQRT2,
                "below_limit": c.value < ONE_PLUS_SQRT2,
                "finding": finding,
            });
            (v, finding)
        }
        _ => {
            if a.complete.is_none() && a.tree.is_none() {
                bail!("certify needs --tree, --complete, or --cnf with --proof");
            }
            let t = load_tree(a.complete, a.tree.as_deref())?;
            let cert = tree_certificate(&t);
            let finding = cert.bound >= ONE_PLUS_SQRT2;
            let v = json!({
                "leaves": t.n_leaves(),
                "bound": cert.bound,
                "limit": ONE_PLUS_SQRT2,
                "below_limit": !finding,
                "finding": finding,
            });
            (v, finding)
        }
    };
    print_json(&report);
    if finding {
        eprintln!("FINDING: bound reaches 1+√2 or certificate forms disagree");
        if a.strict_findings {
            return Ok(EXIT_FINDING);
        }
    }
    Ok(0)
}

fn cmd_prove(a: ProveArgs) -> anyhow::Result<u8> {
    let f = load_cnf(&a.cnf)?;
    let proof = match dpll_refute(&f)? {
        Refutation::Proof(p) => p,
        Refutation::Satisfiable(x) => {
            let signs: Vec<String> = x.signs().iter().map(|s| s.to_string()).collect();
            eprintln!("satisfiable: {}", signs.join(" "));
            return Ok(1);
        }
    };
    let proof = if a.split {
        let (g, q) = split_repeated_variables(&f, &proof)?;
        let path = a.split_cnf.as_deref().expect("clap requires --split-cnf");
        fs::write(path, write_cnf(&g)).with_context(|| format!("writing {}", path.display()))?;
        q
    } else {
        proof
    };
    write_out(a.output.as_deref(), &format!("{}\n", serialize_proof(&proof)))?;
    Ok(0)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.9}"))
}

fn pretty_table(records: &[ScanRecord]) -> String {
    let mut out = format!(
        "{:>8}  {:<12} {:>12} {:>12} {:>12}  detail\n",
        "id", "kind", "value", "weak", "bound"
    );
    for r in records {
        out.push_str(&format!(
            "{:>8}  {:<12} {:>12.9} {:>12} {:>12}  {}\n",
            r.instance_id,
            r.kind,
            r.value,
            fmt_opt(r.weak_value),
            fmt_opt(r.bound),
            r.detail.as_deref().unwrap_or("")
        ));
    }
    out
}

fn cmd_scan(a: ScanArgs) -> anyhow::Result<u8> {
    let cfg = ScanConfig {
        seed: a.seed,
        count: a.count,
        max_leaves: a.max_leaves,
        n_vars: a.nvars,
        tol: a.tol,
    };
    let records = match a.mode {
        ScanMode::Trees => scan_trees(&cfg)?,
        ScanMode::Conjecture => scan_conjecture(&cfg)?,
        ScanMode::Search => scan_search(&cfg)?,
    };
    let text = if a.pretty {
        pretty_table(&records)
    } else {
        let mut s = String::new();
        for r in &records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        s
    };
    write_out(a.output.as_deref(), &text)?;
    let findings = count_findings(&records);
    eprintln!("{} records, {findings} findings", records.len());
    Ok(if findings > 0 && a.strict_findings {
        EXIT_FINDING
    } else {
        0
    })
}

fn report_state(game: &StickGame, out: &mut impl Write) -> io::Result<()> {
    for (i, p) in game.piles().iter().enumerate() {
        let sticks: Vec<String> = p.sticks.iter().map(|s| format!("{s:.6}")).collect();
        writeln!(
            out,
            "  pile {i}: [{}]  sum sqrt = {:.9}  row norm = {:.9}",
            sticks.join(", "),
            p.stick_score(),
            p.row_norm()
        )?;
    }
    writeln!(
        out,
        "  min row norm = {:.9}, tree bound = {:.9}, limit 1+sqrt2 = {:.9}",
        game.min_row_norm(),
        game.tree_bound(),
        ONE_PLUS_SQRT2
    )
}

fn play_checked(game: &mut StickGame, mv: Move) -> anyhow::Result<()> {
    game.play(mv)?;
    game.verify()?;
    Ok(())
}

fn cmd_stick(a: StickArgs) -> anyhow::Result<u8> {
    let mut game = StickGame::new();
    let mut out = io::stdout().lock();
    writeln!(out, "start")?;
    report_state(&game, &mut out)?;
    if let Some(path) = &a.script {
        for (i, mv) in parse_script(&read(path)?)?.into_iter().enumerate() {
            writeln!(out, "move {}: {mv}", i + 1)?;
            play_checked(&mut game, mv).with_context(|| format!("move {}", i + 1))?;
            report_state(&game, &mut out)?;
        }
    } else {
        writeln!(out, "enter moves as `pile: f1 f2 ...`, `quit` to stop")?;
        let stdin = io::stdin();
        for line in stdin.lock().lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "quit" {
                break;
            }
            let played = Move::parse(line)
                .map_err(anyhow::Error::from)
                .and_then(|mv| play_checked(&mut game, mv));
            match played {
                Ok(()) => {
                    writeln!(out, "move {}: {line}", game.log().len())?;
                    report_state(&game, &mut out)?;
                }
                Err(e) => writeln!(out, "rejected: {e:#}")?,
            }
        }
    }
    writeln!(out, "tree {}", game.tree().serialize())?;
    Ok(0)
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("UNSAT_LAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("UNSAT_LAB_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let guard = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::TooLarge { .. })));
    if guard {
        EXIT_GUARD
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = configure_threads().and_then(|()| match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Normalize(a) => cmd_normalize(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Prove(a) => cmd_prove(a),
        Command::Scan(a) => cmd_scan(a),
        Command::StickGame(a) => cmd_stick(a),
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
