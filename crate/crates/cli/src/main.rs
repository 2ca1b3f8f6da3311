//! The `f2` command line: extremal searches, transforms, uniformity
//! reports, partition plans, and word-set reductions.
//!
//! Every run that writes artifacts records a manifest (command, parameters,
//! library version, seed, wall time). JSON artifacts embed it under a
//! `manifest` key; binary and CSV artifacts get a sibling
//! `<file>.manifest.json`. Writes go through a temp file and a rename, so a
//! crash never leaves a half-written artifact behind.
//!
//! Exit codes: 0 on success, 2 when a lookup legitimately finds nothing
//! (non-isomorphic pair, non-member graph, no usable spectral peak),
//! 1 for everything else, including unknown flags and invalid configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use f2lab_core::binfmt::{
    read_code_family, read_value_table, write_code_family, write_spectrum,
};
use f2lab_core::codes::{
    extremal_search, extremal_witnesses, is_code, monotonicity_table, CodeFamily, CodeKind,
    SearchBudget,
};
use f2lab_core::dphj::{
    code_to_word_set, grid_side, is_line_free, word_from_json, word_set_to_code, word_to_json,
    SquareWord,
};
use f2lab_core::f2space::{gowers_norm, walsh_transform, GowersMethod};
use f2lab_core::graphs::{
    graph_from_json, graph_to_json, is_isomorphic, is_isomorphic_to_member, Graph,
    ForbiddenFamily,
};
use f2lab_core::polynomials::{
    audit_plan, integer_poly_from_json, paper_params, partition_plan_to_json,
    partition_polynomial, CanonicalStrategy, PartitionMode,
};
use f2lab_core::subspaces::hj_embedding_from_json;
use f2lab_core::uniformity::{fourier_boost, uniformity_report, MonoCase};
use f2lab_core::{Dyadic, EdgeIndexSet};

// ===========================================================================
// Command surface
// ===========================================================================

#[derive(Parser)]
#[command(name = "f2", version, about = "Boolean graph spaces: search, analyze, partition")]
struct Cli {
    /// Seed recorded in artifact manifests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Format for tabular artifacts written under --out.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Pairwise sums avoid the family.
    Code,
    /// Unions with disjoint placements avoid the family.
    Hj,
}

impl KindArg {
    fn as_code_kind(self) -> CodeKind {
        match self {
            KindArg::Code => CodeKind::Code,
            KindArg::Hj => CodeKind::HjCode,
        }
    }

    fn label(self) -> &'static str {
        match self {
            KindArg::Code => "code",
            KindArg::Hj => "hj",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Naive,
    Recursive,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Greedy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find extremal densities, witnesses, or a monotonicity table.
    Search(SearchArgs),
    /// Evaluate a box norm of a stored value table.
    Gowers(GowersArgs),
    /// Transform a stored value table into its spectrum.
    Fwht(FwhtArgs),
    /// Density, spectral peak, and box norms of a stored family.
    Report(ReportArgs),
    /// Density boost on an affine subspace located from a spectral peak.
    Boost(BoostArgs),
    /// Partition a polynomial's domain into constancy pieces.
    Partition(PartitionArgs),
    /// Apply a stored embedding to a point.
    Embed(EmbedArgs),
    /// Decide whether two graphs are isomorphic.
    Iso(IsoArgs),
    /// Decide whether a graph matches a member of a family.
    Member(MemberArgs),
    /// Word-set reductions on a square grid.
    #[command(subcommand)]
    Dphj(DphjCmd),
    /// Run the shipped acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Number of vertices.
    #[arg(long)]
    n: u16,
    /// Extend to a table over n..=n-to and check non-increase.
    #[arg(long = "n-to")]
    n_to: Option<u16>,
    /// Work over the space with loops.
    #[arg(long)]
    loops: bool,
    /// Family name (cliques, cliques-looped) or a path to graph JSON.
    #[arg(long)]
    forbidden: String,
    #[arg(long, value_enum, default_value_t = KindArg::Code)]
    kind: KindArg,
    /// Node budget for the branch and bound, e.g. 1e8.
    #[arg(long = "budget-nodes", default_value = "5e7")]
    budget_nodes: String,
    /// Write every extremal family into this directory.
    #[arg(long = "all-witnesses")]
    all_witnesses: Option<PathBuf>,
    /// Cap on enumerated witnesses.
    #[arg(long = "witness-cap", default_value_t = 4096)]
    witness_cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GowersArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Norm order.
    #[arg(short = 'd', long = "order")]
    d: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FwhtArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file for the spectrum.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Stored family (.f2cf).
    #[arg(long)]
    code: PathBuf,
    /// Comma-separated norm orders; empty for none.
    #[arg(long, default_value = "2")]
    orders: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoostArgs {
    /// Stored family (.f2cf) over a loopless space.
    #[arg(long)]
    code: PathBuf,
    /// Family name or path to graph JSON.
    #[arg(long)]
    forbidden: String,
    /// Vertices in the monochromatic set.
    #[arg(long)]
    m: u16,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    /// Integer polynomial JSON.
    #[arg(long)]
    q: PathBuf,
    /// Initial measure, a dyadic in (0, 1]: 0.25, 1/4, or 1.
    #[arg(long)]
    eta: String,
    /// Ambient subspace dimension.
    #[arg(long)]
    m: u32,
    /// Use small tunable parameters instead of the growth-rate schedule.
    #[arg(long)]
    desk: bool,
    /// Block size per stage (desk mode).
    #[arg(long)]
    block: Option<u16>,
    /// Stage count (desk mode).
    #[arg(long)]
    stages: Option<u32>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Exhaustive)]
    strategy: StrategyArg,
    /// Print the closed-form schedule parameters only; no plan is built.
    #[arg(long)]
    params: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Embedding JSON.
    #[arg(long)]
    e: PathBuf,
    /// Point to map, as graph JSON over the domain space.
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IsoArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct MemberArgs {
    /// Graph JSON to test.
    #[arg(long)]
    g: PathBuf,
    /// Family name (cliques, cliques-looped) or a path to graph JSON.
    #[arg(long)]
    family: String,
}

#[derive(Subcommand)]
enum DphjCmd {
    /// Test a word set for combinatorial lines and report a witness.
    CheckLines(CheckLinesArgs),
    /// Turn a stored family with loops into a word set over grid cells.
    Reduce(ReduceArgs),
    /// Turn symmetric words back into a family with loops.
    ReduceBack(ReduceBackArgs),
}

#[derive(Args)]
struct CheckLinesArgs {
    /// JSON array of word documents (or a single document).
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    /// Stored family (.f2cf) over a space with loops.
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceBackArgs {
    /// JSON array of symmetric word documents.
    #[arg(long)]
    words: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run a single check by its 1-based index.
    #[arg(long)]
    only: Option<usize>,
}

// ===========================================================================
// Entry point and artifact plumbing
// ===========================================================================

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// One finished command: the value printed to stdout, the artifacts to
/// write, and the exit code. Artifacts are paired with full target paths
/// so a command may write into a directory or to an explicit file.
struct Outcome {
    params: Value,
    result: Option<Value>,
    artifacts: Vec<(PathBuf, Payload)>,
    exit: u8,
}

enum Payload {
    Json(Value),
    Bytes(Vec<u8>),
    Text(String),
}

fn dispatch(cli: Cli) -> Result<u8> {
    let started = Instant::now();
    let format = cli.format;
    let (name, outcome) = match cli.command {
        Cmd::Search(a) => ("search", cmd_search(a, format)?),
        Cmd::Gowers(a) => ("gowers", cmd_gowers(a)?),
        Cmd::Fwht(a) => ("fwht", cmd_fwht(a)?),
        Cmd::Report(a) => ("report", cmd_report(a, format)?),
        Cmd::Boost(a) => ("boost", cmd_boost(a)?),
        Cmd::Partition(a) => ("partition", cmd_partition(a)?),
        Cmd::Embed(a) => ("embed", cmd_embed(a)?),
        Cmd::Iso(a) => ("iso", cmd_iso(a)?),
        Cmd::Member(a) => ("member", cmd_member(a)?),
        Cmd::Dphj(DphjCmd::CheckLines(a)) => ("dphj check-lines", cmd_check_lines(a)?),
        Cmd::Dphj(DphjCmd::Reduce(a)) => ("dphj reduce", cmd_reduce(a)?),
        Cmd::Dphj(DphjCmd::ReduceBack(a)) => ("dphj reduce-back", cmd_reduce_back(a)?),
        Cmd::Selftest(a) => ("selftest", cmd_selftest(a)?),
    };

    let manifest = json!({
        "command": name,
        "parameters": outcome.params,
        "seed": cli.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_ms": started.elapsed().as_millis() as u64,
    });
    for (path, payload) in &outcome.artifacts {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
        }
        match payload {
            Payload::Json(result) => {
                let doc = json!({ "manifest": manifest, "result": result });
                write_atomic(path, format!("{doc:#}\n").as_bytes())?;
            }
            Payload::Bytes(bytes) => {
                write_atomic(path, bytes)?;
                write_sidecar_manifest(path, &manifest)?;
            }
            Payload::Text(text) => {
                write_atomic(path, text.as_bytes())?;
                write_sidecar_manifest(path, &manifest)?;
            }
        }
    }
    if let Some(result) = &outcome.result {
        println!("{result}");
    }
    Ok(outcome.exit)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("artifact path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!("{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_sidecar_manifest(path: &Path, manifest: &Value) -> Result<()> {
    let name = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("artifact path {} has no file name", path.display()))?;
    let sidecar = path.with_file_name(format!("{name}.manifest.json"));
    write_atomic(&sidecar, format!("{manifest:#}\n").as_bytes())
}

fn invalid(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("invalid configuration: {}", problems.join("; ")))
    }
}

// ===========================================================================
// Shared parsing and formatting
// ===========================================================================

/// Round to 12 significant digits so printed floats are stable across
/// platforms and reruns.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn dyadic_value(d: &Dyadic) -> Value {
    serde_json::to_value(d).expect("dyadic serializes")
}

fn parse_budget(s: &str) -> Result<SearchBudget> {
    let nodes: f64 = s
        .parse()
        .map_err(|_| anyhow!("budget {s:?} is not a number"))?;
    if !(nodes >= 1.0 && nodes <= 1e18) {
        return Err(anyhow!("budget {s:?} must be in [1, 1e18]"));
    }
    Ok(SearchBudget { max_nodes: nodes as u64 })
}

/// A dyadic rational from "0.25", "1/4", or "1".
fn parse_eta(s: &str) -> Result<Dyadic> {
    let err = || anyhow!("eta {s:?} is not a dyadic rational in (0, 1]");
    let d = if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| err())?;
        let den: u64 = den.trim().parse().map_err(|_| err())?;
        if !den.is_power_of_two() {
            return Err(err());
        }
        Dyadic::over_pow2(num, den.trailing_zeros() as u64)
    } else if let Some((int, frac)) = s.split_once('.') {
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
        if frac.len() > 18 || frac.chars().any(|c| !c.is_ascii_digit()) {
            return Err(err());
        }
        let digits: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        let mut num = digits as i128;
        let mut den = 10i128.pow(frac.len() as u32);
        let g = gcd(num, den);
        num /= g;
        den /= g;
        if !(den as u128).is_power_of_two() {
            return Err(err());
        }
        let shift = (den as u128).trailing_zeros() as u64;
        &Dyadic::over_pow2(int, 0) + &Dyadic::over_pow2(num as i64, shift)
    } else {
        Dyadic::over_pow2(s.trim().parse().map_err(|_| err())?, 0)
    };
    if d.is_zero() || d.is_negative() || d > Dyadic::one() {
        return Err(err());
    }
    Ok(d)
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs().max(1), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A forbidden family from a built-in name or a JSON file holding one
/// graph document or an array of them.
fn parse_forbidden(spec: &str) -> Result<ForbiddenFamily> {
    match spec {
        "cliques" => Ok(ForbiddenFamily::Cliques),
        "cliques-looped" => Ok(ForbiddenFamily::CliquesLooped),
        path => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading forbidden family {path}"))?;
            let doc: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {path} as JSON"))?;
            let members = match &doc {
                Value::Array(items) => items
                    .iter()
                    .map(|g| graph_from_json(&g.to_string()))
                    .collect::<f2lab_core::Result<Vec<Graph>>>()?,
                _ => vec![graph_from_json(&text)?],
            };
            Ok(ForbiddenFamily::explicit(members)?)
        }
    }
}

fn parse_orders(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| anyhow!("order {part:?} is not a positive integer"))
        })
        .collect()
}

fn read_family(path: &Path) -> Result<CodeFamily> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_code_family(&mut bytes.as_slice())
        .with_context(|| format!("decoding {}", path.display()))?)
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(graph_from_json(&text)?)
}

fn family_bytes(fam: &CodeFamily) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    write_code_family(&mut bytes, fam)?;
    Ok(bytes)
}

fn parse_json(s: &str) -> Result<Value> {
    Ok(serde_json::from_str(s)?)
}

// ===========================================================================
// Commands
// ===========================================================================

fn cmd_search(a: SearchArgs, format: Format) -> Result<Outcome> {
    let mut problems = Vec::new();
    if a.n == 0 {
        problems.push("n must be at least 1".into());
    }
    if let Some(hi) = a.n_to {
        if hi < a.n {
            problems.push("n-to must be at least n".into());
        }
        if a.all_witnesses.is_some() {
            problems.push("all-witnesses does not combine with n-to".into());
        }
    }
    if a.witness_cap == 0 {
        problems.push("witness-cap must be at least 1".into());
    }
    if format == Format::Csv && a.n_to.is_none() {
        problems.push("csv format applies to n-to tables only".into());
    }
    if format == Format::Csv && a.out.is_none() {
        problems.push("csv format needs --out".into());
    }
    let budget = match parse_budget(&a.budget_nodes) {
        Ok(b) => b,
        Err(e) => {
            problems.push(e.to_string());
            SearchBudget::default()
        }
    };
    let forb = match parse_forbidden(&a.forbidden) {
        Ok(f) => f,
        Err(e) => {
            problems.push(e.to_string());
            ForbiddenFamily::Cliques
        }
    };
    invalid(problems)?;

    let kind = a.kind.as_code_kind();
    let params = json!({
        "n": a.n,
        "n_to": a.n_to,
        "loops": a.loops,
        "forbidden": a.forbidden,
        "kind": a.kind.label(),
        "budget_nodes": budget.max_nodes,
        "witness_cap": a.witness_cap,
    });
    let mut artifacts = Vec::new();

    if let Some(hi) = a.n_to {
        let rows = monotonicity_table(&forb, kind, a.loops, a.n..=hi, &budget)?;
        let row_values: Vec<Value> = rows
            .iter()
            .map(|r| json!({"n": r.n, "density": dyadic_value(&r.density), "exact": r.exact}))
            .collect();
        let result = json!({"rows": row_values});
        if let Some(dir) = &a.out {
            match format {
                Format::Json => artifacts.push((dir.join("result.json"), Payload::Json(result.clone()))),
                Format::Csv => {
                    let mut csv = String::from("n,num,den_exp,exact\n");
                    for r in &rows {
                        let num = r.density.num().to_string();
                        csv.push_str(&format!("{},{},{},{}\n", r.n, num, r.density.den_exp(), r.exact));
                    }
                    artifacts.push((dir.join("result.csv"), Payload::Text(csv)));
                }
            }
        }
        return Ok(Outcome { params, result: Some(result), artifacts, exit: 0 });
    }

    let space = if a.loops {
        EdgeIndexSet::pairs_loops(a.n)?
    } else {
        EdgeIndexSet::pairs(a.n)?
    };

    if let Some(dir) = &a.all_witnesses {
        let found = extremal_witnesses(space, &forb, kind, &budget, a.witness_cap)?;
        for (i, fam) in found.witnesses.iter().enumerate() {
            artifacts.push((dir.join(format!("witness_{i:04}.f2cf")), Payload::Bytes(family_bytes(fam)?)));
        }
        let result = json!({
            "cardinality": found.cardinality,
            "complete": found.complete,
            "node_count": found.node_count,
            "witnesses": found.witnesses.len(),
        });
        if let Some(out) = &a.out {
            artifacts.push((out.join("result.json"), Payload::Json(result.clone())));
        }
        return Ok(Outcome { params, result: Some(result), artifacts, exit: 0 });
    }

    let found = extremal_search(space, &forb, kind, &budget)?;
    let result = json!({
        "n": a.n,
        "kind": a.kind.label(),
        "density": dyadic_value(&found.density),
        "cardinality": found.cardinality,
        "exact": found.exact,
        "node_count": found.node_count,
    });
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("result.json"), Payload::Json(result.clone())));
        artifacts.push((dir.join("witness.f2cf"), Payload::Bytes(family_bytes(&found.witness)?)));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_gowers(a: GowersArgs) -> Result<Outcome> {
    let mut problems = Vec::new();
    if a.d == 0 {
        problems.push("order must be at least 1".into());
    }
    invalid(problems)?;

    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let table = read_value_table(&mut bytes.as_slice())
        .with_context(|| format!("decoding {}", a.input.display()))?;
    let n_bits = table.space().len();
    let (method, label) = match a.method {
        MethodArg::Naive => (GowersMethod::Naive, "naive"),
        MethodArg::Recursive => (GowersMethod::Recursive, "recursive"),
        MethodArg::Spectral => (GowersMethod::Spectral, "spectral"),
        MethodArg::Auto => {
            if a.d == 2 {
                (GowersMethod::Spectral, "spectral")
            } else if (a.d as u64 + 1) * n_bits as u64 <= 26 {
                (GowersMethod::Naive, "naive")
            } else {
                (GowersMethod::Recursive, "recursive")
            }
        }
    };
    let value = gowers_norm(&table, a.d, method)?;
    let result = json!({
        "method": label,
        "order": a.d,
        "value": sig12(value),
    });
    let params = json!({
        "in": a.input.display().to_string(),
        "d": a.d,
        "method": label,
    });
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("gowers.json"), Payload::Json(result.clone())));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_fwht(a: FwhtArgs) -> Result<Outcome> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let table = read_value_table(&mut bytes.as_slice())
        .with_context(|| format!("decoding {}", a.input.display()))?;
    let spectrum = walsh_transform(&table);
    let mut out_bytes = Vec::new();
    write_spectrum(&mut out_bytes, &spectrum)?;
    let result = json!({
        "out": a.out.display().to_string(),
        "points": table.values().len(),
    });
    let params = json!({
        "in": a.input.display().to_string(),
        "out": a.out.display().to_string(),
    });
    Ok(Outcome {
        params,
        result: Some(result),
        artifacts: vec![(a.out.clone(), Payload::Bytes(out_bytes))],
        exit: 0,
    })
}

fn cmd_report(a: ReportArgs, format: Format) -> Result<Outcome> {
    let mut problems = Vec::new();
    let orders = match parse_orders(&a.orders) {
        Ok(o) => o,
        Err(e) => {
            problems.push(e.to_string());
            Vec::new()
        }
    };
    if orders.iter().any(|&d| d == 0) {
        problems.push("orders must be at least 1".into());
    }
    if format == Format::Csv && a.out.is_none() {
        problems.push("csv format needs --out".into());
    }
    invalid(problems)?;

    let fam = read_family(&a.code)?;
    let report = uniformity_report(&fam, &orders)?;
    let gowers: serde_json::Map<String, Value> = report
        .gowers
        .iter()
        .map(|&(d, v)| (d.to_string(), json!(sig12(v))))
        .collect();
    let result = json!({
        "density": dyadic_value(&report.density),
        "linf_fourier": sig12(report.linf_fourier),
        "gowers": gowers,
    });
    let params = json!({
        "code": a.code.display().to_string(),
        "orders": a.orders,
    });
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        match format {
            Format::Json => artifacts.push((dir.join("report.json"), Payload::Json(result.clone()))),
            Format::Csv => {
                let mut csv = String::from("order,value\n");
                for &(d, v) in &report.gowers {
                    csv.push_str(&format!("{},{}\n", d, sig12(v)));
                }
                artifacts.push((dir.join("report.csv"), Payload::Text(csv)));
            }
        }
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_boost(a: BoostArgs) -> Result<Outcome> {
    let mut problems = Vec::new();
    if a.m < 2 {
        problems.push("m must be at least 2".into());
    }
    let forb = match parse_forbidden(&a.forbidden) {
        Ok(f) => f,
        Err(e) => {
            problems.push(e.to_string());
            ForbiddenFamily::Cliques
        }
    };
    invalid(problems)?;

    let fam = read_family(&a.code)?;
    let params = json!({
        "code": a.code.display().to_string(),
        "forbidden": a.forbidden,
        "m": a.m,
    });
    match fourier_boost(&fam, &forb, a.m)? {
        None => {
            let result = json!({"found": false});
            Ok(Outcome { params, result: Some(result), artifacts: Vec::new(), exit: 2 })
        }
        Some(w) => {
            let result = json!({
                "found": true,
                "case": match w.case {
                    MonoCase::Disjoint => "disjoint",
                    MonoCase::Contained => "contained",
                },
                "peak_bits": w.g0.bits(),
                "monochromatic_set": w.a,
                "parity_class": w.i0,
                "section_bits": w.x0.bits(),
                "base_density": dyadic_value(&fam.density()),
                "linf_fourier": dyadic_value(&w.linf_fourier),
                "achieved_density": dyadic_value(&w.achieved_density),
                "boosted_cardinality": w.boosted.cardinality(),
            });
            let mut artifacts = Vec::new();
            if let Some(dir) = &a.out {
                artifacts.push((dir.join("result.json"), Payload::Json(result.clone())));
                artifacts.push((dir.join("boosted.f2cf"), Payload::Bytes(family_bytes(&w.boosted)?)));
            }
            Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
        }
    }
}

fn cmd_partition(a: PartitionArgs) -> Result<Outcome> {
    let mut problems = Vec::new();
    if a.m == 0 {
        problems.push("m must be at least 1".into());
    }
    let eta = match parse_eta(&a.eta) {
        Ok(e) => e,
        Err(e) => {
            problems.push(e.to_string());
            Dyadic::one()
        }
    };
    if a.desk {
        if a.params {
            problems.push("params prints the closed-form schedule and does not combine with desk".into());
        }
        if a.block.is_none() {
            problems.push("desk mode needs --block".into());
        }
        if a.stages.is_none() {
            problems.push("desk mode needs --stages".into());
        }
        if a.block == Some(0) {
            problems.push("block must be at least 1".into());
        }
        if a.stages == Some(0) {
            problems.push("stages must be at least 1".into());
        }
    } else if a.block.is_some() || a.stages.is_some() {
        problems.push("block and stages apply to desk mode only".into());
    }
    invalid(problems)?;

    let text = fs::read_to_string(&a.q).with_context(|| format!("reading {}", a.q.display()))?;
    let q = integer_poly_from_json(&text)?;
    let params = json!({
        "q": a.q.display().to_string(),
        "eta": a.eta,
        "m": a.m,
        "desk": a.desk,
        "block": a.block,
        "stages": a.stages,
        "params": a.params,
    });

    if a.params {
        let p = paper_params(&eta, a.m, q.k, q.d)?;
        let result = json!({
            "eta1": dyadic_value(&p.eta1),
            "block_size": p.block_size,
            "ell": p.ell.to_string(),
            "r": p.r.to_string(),
            "ramsey_symbol": p.ramsey_symbol,
        });
        let mut artifacts = Vec::new();
        if let Some(dir) = &a.out {
            artifacts.push((dir.join("params.json"), Payload::Json(result.clone())));
        }
        return Ok(Outcome { params, result: Some(result), artifacts, exit: 0 });
    }

    let mode = if a.desk {
        PartitionMode::DeskParams {
            block_size: a.block.unwrap(),
            stages: a.stages.unwrap(),
            strategy: match a.strategy {
                StrategyArg::Exhaustive => CanonicalStrategy::Exhaustive,
                StrategyArg::Greedy => CanonicalStrategy::Greedy,
            },
        }
    } else {
        PartitionMode::PaperParams
    };
    let plan = partition_polynomial(&q, &eta, a.m, &mode)?;
    audit_plan(&q, &plan)?;
    let result = parse_json(&partition_plan_to_json(&plan))?;
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("plan.json"), Payload::Json(result.clone())));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_embed(a: EmbedArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.e).with_context(|| format!("reading {}", a.e.display()))?;
    let emb = hj_embedding_from_json(&text)?;
    let x = read_graph(&a.x)?;
    if x.space() != emb.domain() {
        return Err(anyhow!(
            "point lives on a different space than the embedding domain"
        ));
    }
    let image = emb.apply(x.point())?;
    let image_graph = Graph::new(image)?;
    let result = parse_json(&graph_to_json(&image_graph))?;
    let params = json!({
        "e": a.e.display().to_string(),
        "x": a.x.display().to_string(),
    });
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("image.json"), Payload::Json(result.clone())));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_iso(a: IsoArgs) -> Result<Outcome> {
    let g1 = read_graph(&a.a)?;
    let g2 = read_graph(&a.b)?;
    let yes = is_isomorphic(&g1, &g2)?;
    let params = json!({
        "a": a.a.display().to_string(),
        "b": a.b.display().to_string(),
    });
    Ok(Outcome {
        params,
        result: Some(json!({"isomorphic": yes})),
        artifacts: Vec::new(),
        exit: if yes { 0 } else { 2 },
    })
}

fn cmd_member(a: MemberArgs) -> Result<Outcome> {
    let forb = parse_forbidden(&a.family)?;
    let g = read_graph(&a.g)?;
    let yes = is_isomorphic_to_member(&g, &forb)?;
    let params = json!({
        "g": a.g.display().to_string(),
        "family": a.family,
    });
    Ok(Outcome {
        params,
        result: Some(json!({"member": yes})),
        artifacts: Vec::new(),
        exit: if yes { 0 } else { 2 },
    })
}

/// Words from a JSON array of word documents (or a single document),
/// together with the family over the grid cells that holds exactly them.
fn read_word_set(path: &Path) -> Result<(u16, CodeFamily)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {} as JSON", path.display()))?;
    let docs: Vec<Value> = match doc {
        Value::Array(items) => items,
        one => vec![one],
    };
    if docs.is_empty() {
        return Err(anyhow!("word set is empty"));
    }
    let words: Vec<SquareWord> = docs
        .iter()
        .map(|d| word_from_json(&d.to_string()))
        .collect::<f2lab_core::Result<_>>()?;
    let n = words[0].n();
    if words.iter().any(|w| w.n() != n) {
        return Err(anyhow!("words have mixed grid sides"));
    }
    let cells = u32::from(n) * u32::from(n);
    let members: std::collections::HashSet<u64> = words.iter().map(|w| w.bits()).collect();
    let fam = CodeFamily::from_fn(EdgeIndexSet::generic(cells), |x| members.contains(&x))?;
    Ok((n, fam))
}

fn cmd_check_lines(a: CheckLinesArgs) -> Result<Outcome> {
    let (n, fam) = read_word_set(&a.input)?;
    let witness = is_line_free(&fam)?;
    let result = match &witness {
        None => json!({"line_free": true, "words": fam.cardinality(), "witness": Value::Null}),
        Some(line) => {
            let (v0, v1) = line.completions();
            let w0 = word_to_json(&SquareWord::new(n, v0)?);
            let w1 = word_to_json(&SquareWord::new(n, v1)?);
            json!({
                "line_free": false,
                "words": fam.cardinality(),
                "witness": {
                    "vertices": line.x_set(),
                    "fixed_bits": line.fixed(),
                    "completions": [parse_json(&w0)?, parse_json(&w1)?],
                },
            })
        }
    };
    let params = json!({"in": a.input.display().to_string()});
    Ok(Outcome { params, result: Some(result), artifacts: Vec::new(), exit: 0 })
}

fn cmd_reduce(a: ReduceArgs) -> Result<Outcome> {
    let fam = read_family(&a.code)?;
    let words = code_to_word_set(&fam)?;
    let n = fam.space().n();
    let result = json!({
        "n": n,
        "cells": words.space().len(),
        "cardinality": words.cardinality(),
        "density": dyadic_value(&words.density()),
    });
    let params = json!({"code": a.code.display().to_string()});
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("result.json"), Payload::Json(result.clone())));
        artifacts.push((dir.join("words.f2cf"), Payload::Bytes(family_bytes(&words)?)));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_reduce_back(a: ReduceBackArgs) -> Result<Outcome> {
    let (_, words) = read_word_set(&a.words)?;
    let n = grid_side(words.space())?;
    let fam = word_set_to_code(&words)?;
    let result = json!({
        "n": n,
        "cardinality": fam.cardinality(),
        "density": dyadic_value(&fam.density()),
    });
    let params = json!({"words": a.words.display().to_string()});
    let mut artifacts = Vec::new();
    if let Some(dir) = &a.out {
        artifacts.push((dir.join("result.json"), Payload::Json(result.clone())));
        artifacts.push((dir.join("code.f2cf"), Payload::Bytes(family_bytes(&fam)?)));
    }
    Ok(Outcome { params, result: Some(result), artifacts, exit: 0 })
}

fn cmd_selftest(a: SelftestArgs) -> Result<Outcome> {
    use f2lab_core::selftest::{run_all, run_one, CRITERIA};
    if let Some(idx) = a.only {
        if idx == 0 || idx > CRITERIA.len() {
            return Err(anyhow!(
                "invalid configuration: only must be in 1..={}",
                CRITERIA.len()
            ));
        }
    }
    let started = Instant::now();
    let outcomes = match a.only {
        Some(idx) => vec![run_one(idx)],
        None => run_all(),
    };
    let mut failed = 0usize;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("{status} {:>2}  {}: {}", o.index, o.name, o.detail);
    }
    println!(
        "{} of {} checks passed in {:.1}s",
        outcomes.len() - failed,
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(Outcome {
        params: json!({"only": a.only}),
        result: None,
        artifacts: Vec::new(),
        exit: if failed == 0 { 0 } else { 1 },
    })
}
