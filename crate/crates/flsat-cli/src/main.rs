//! `flsat`: command-line front end for the fluted satisfiability workbench.
//!
//! Exit codes: 0 sat/true/success, 1 unsat at cap/false, 2 budget
//! exhausted/unknown, 3 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use flsat::basic_reduction::{parse_type, quadratic_transform, spread_to_basic, BasicSet};
use flsat::certificate::{search, validate as validate_certificate, Certificate, SearchBudget, SearchStatus};
use flsat::corpus::{
    build_2T_torus, encode_2T, encode_3T, encode_3T_finite, example2_prefix, example_formulas, intended_3T_prefix,
    phi_grid_2t, phi_grid_3t, Encoding, TilingSystem,
};
use flsat::model_synthesis::{synthesize, verify_prefix};
use flsat::multivar::{reduce_arity, solve, ReduceOptions, SolveOptions};
use flsat::normal_form::{normal_form_to_formula, to_normal_form, to_spread, NormalForm, WEncoding};
use flsat::oracle::{check_model, find_model, Mode};
use flsat::random::{random_basic_set, random_sentence, rng};
use flsat::resolution::{restrict, saturate};
use flsat::syntax::{parse_header, print_file, validate};
use flsat::{parse_file, FlutedType, Formula, Signature, Structure};

const EXIT_OK: u8 = 0;
const EXIT_NO: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "flsat", version, about = "Satisfiability workbench for the fluted fragment with one transitive relation")]
struct Cli {
    /// Emit machine-readable JSON results.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized data generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the normal form (or spread normal form) of a sentence.
    Normalize {
        input: PathBuf,
        /// Number of variables of the normal form; defaults to the sentence's bound.
        #[arg(long)]
        m: Option<usize>,
        /// Reduce to two variables before printing.
        #[arg(long)]
        two: bool,
        /// Print the spread normal form (requires two variables).
        #[arg(long)]
        spread: bool,
        /// A royal 1-type such as `{p+, That-}`; repeatable.
        #[arg(long)]
        royal: Vec<String>,
        /// Use the shared routing-pattern encoding.
        #[arg(long)]
        shared: bool,
        /// Write the fresh-predicate provenance JSON here.
        #[arg(long)]
        provenance: Option<PathBuf>,
        /// Print the saturation and restriction of every clause set.
        #[arg(long)]
        dump_saturation: bool,
    },
    /// Print the basic set of a two-variable sentence.
    Basify {
        input: PathBuf,
        #[arg(long)]
        royal: Vec<String>,
        /// Apply the quadratic transformation as well.
        #[arg(long)]
        quadratic: bool,
        #[arg(long)]
        shared: bool,
    },
    /// Search for a certificate of a basic set, or check a supplied one.
    Certify {
        basic: PathBuf,
        /// Certificate JSON to validate instead of searching.
        #[arg(long)]
        check: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_omega: usize,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 60)]
        budget: u64,
    },
    /// Build the depth-D prefix of the model described by a certificate.
    Synthesize {
        cert: PathBuf,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Basic set to verify the prefix against.
        #[arg(long)]
        basic: Option<PathBuf>,
    },
    /// Run the full pipeline on a sentence.
    Solve {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        max_omega: usize,
        #[arg(long, default_value_t = 2)]
        royal_cap: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 60)]
        budget: u64,
        #[arg(long)]
        shared: bool,
        /// Directory receiving every staged artifact.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive finite-model search.
    Oracle {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_size: usize,
        /// Only search domains of exactly `max-size` elements.
        #[arg(long)]
        exactly: bool,
    },
    /// Evaluate a sentence in a structure.
    Check {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Take the transitive closure of the loaded relations first.
        #[arg(long)]
        repair: bool,
    },
    /// Generate corpus formulas, intended models and random test data.
    Gen {
        kind: GenKind,
        /// Tiling system JSON.
        #[arg(long)]
        tiling: Option<PathBuf>,
        /// Emit the intended model prefix with this many elements or steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Emit the torus model with parameter M.
        #[arg(long)]
        torus: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Phi1,
    Phi2,
    Grid2t,
    Bou3t,
    Bou3tFinite,
    RandomSentence,
    RandomBasic,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_formula(path: &Path) -> Result<(Signature, Formula)> {
    let text = read(path)?;
    let (sig, f) = parse_file(&text).with_context(|| format!("parsing {}", path.display()))?;
    validate(&sig, &f, 0).with_context(|| format!("{} is not a fluted sentence", path.display()))?;
    Ok((sig, f))
}

fn read_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing JSON in {}", path.display()))
}

fn read_basic(path: &Path) -> Result<BasicSet> {
    BasicSet::parse(&read(path)?).with_context(|| format!("parsing basic set {}", path.display()))
}

fn encoding(shared: bool) -> WEncoding {
    if shared {
        WEncoding::Shared
    } else {
        WEncoding::PerConjunct
    }
}

fn parse_royal(sig: &Signature, royal: &[String]) -> Result<Vec<FlutedType>> {
    royal.iter().map(|r| parse_type(sig, r).map_err(|e| anyhow!("royal type `{r}`: {e}"))).collect()
}

/// A certificate file: the certificate JSON plus a format tag and the
/// signature header it is read against.
fn certificate_file(c: &Certificate) -> Value {
    let mut v = c.to_json();
    v["format"] = json!(1);
    v["signature"] = json!(c.sig.header());
    v
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

/// Normal form at `m` variables (or the sentence's bound), optionally
/// reduced all the way to two variables.
fn normal_forms(sig: &Signature, f: &Formula, m: Option<usize>, two: bool) -> Result<Vec<NormalForm>> {
    let bound = validate(sig, f, 0)?.variable_bound;
    let m = m.unwrap_or(bound).max(bound).max(2);
    let mut nfs = vec![to_normal_form(sig, f, m)?];
    while two && nfs.last().expect("non-empty").m > 2 {
        let r = reduce_arity(nfs.last().expect("non-empty"), ReduceOptions::default())?;
        nfs.push(r.nf);
    }
    Ok(nfs)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Normalize { input, m, two, spread, royal, shared, provenance, dump_saturation } => {
            let (sig, f) = read_formula(input)?;
            let nfs = normal_forms(&sig, &f, *m, *two || *spread)?;
            let nf = nfs.last().expect("non-empty");
            if *dump_saturation {
                for (k, e) in nf.exist.iter().enumerate() {
                    let star = saturate(&nf.sig, &e.gamma);
                    eprintln!("exist {k}: gamma* = {}", star.display(&nf.sig));
                    eprintln!("exist {k}: gamma° = {}", restrict(&nf.sig, &star).display(&nf.sig));
                }
                for (k, u) in nf.univ.iter().enumerate() {
                    let star = saturate(&nf.sig, &u.delta);
                    eprintln!("univ {k}: delta* = {}", star.display(&nf.sig));
                    eprintln!("univ {k}: delta° = {}", restrict(&nf.sig, &star).display(&nf.sig));
                }
            }
            let (text, prov) = if *spread {
                let royal = parse_royal(&nf.sig, royal)?;
                let snf = to_spread(nf, &royal, encoding(*shared))?;
                (print_file(&snf.to_formula(), &snf.sig), snf.provenance_json())
            } else {
                (print_file(&normal_form_to_formula(nf), &nf.sig), nf.provenance_json())
            };
            if let Some(path) = provenance {
                fs::write(path, serde_json::to_string_pretty(&prov)?)?;
            }
            if cli.json {
                print_json(&json!({"format": 1, "formula": text, "provenance": prov}));
            } else {
                print!("{text}");
            }
            Ok(EXIT_OK)
        }
        Cmd::Basify { input, royal, quadratic, shared } => {
            let (sig, f) = read_formula(input)?;
            let nfs = normal_forms(&sig, &f, None, true)?;
            let nf = nfs.last().expect("non-empty");
            let royal = parse_royal(&nf.sig, royal)?;
            let snf = to_spread(nf, &royal, encoding(*shared))?;
            let mut basic = spread_to_basic(&snf);
            if *quadratic {
                basic = quadratic_transform(&basic).set;
            }
            if cli.json {
                print_json(&json!({"format": 1, "basic": basic.to_text()}));
            } else {
                print!("{}", basic.to_text());
            }
            Ok(EXIT_OK)
        }
        Cmd::Certify { basic, check, max_omega, budget } => {
            let phi = read_basic(basic)?;
            if let Some(path) = check {
                let c = Certificate::from_json(&read_json(path)?, &phi.sig)?;
                let verdict = validate_certificate(&c, &phi);
                if cli.json {
                    print_json(&json!({"format": 1, "valid": verdict.is_ok(), "error": verdict.as_ref().err().map(|e| e.to_string())}));
                } else {
                    match &verdict {
                        Ok(()) => println!("valid"),
                        Err(e) => println!("invalid: {e}"),
                    }
                }
                return Ok(if verdict.is_ok() { EXIT_OK } else { EXIT_NO });
            }
            let out = search(&phi, *max_omega, SearchBudget { time: Some(Duration::from_secs(*budget)) })?;
            let mut v = json!({"format": 1, "status": out.status.to_string(), "explored": out.explored, "universe": out.universe});
            if let Some(c) = &out.certificate {
                v["certificate"] = certificate_file(c);
            }
            if cli.json {
                print_json(&v);
            } else {
                println!("{}", out.status);
                if let Some(c) = &out.certificate {
                    print_json(&certificate_file(c));
                }
            }
            Ok(status_code(out.status))
        }
        Cmd::Synthesize { cert, depth, basic } => {
            let v = read_json(cert)?;
            let phi = basic.as_deref().map(read_basic).transpose()?;
            let sig = match (&phi, v.get("signature").and_then(Value::as_str)) {
                (Some(phi), _) => phi.sig.clone(),
                (None, Some(h)) => parse_header(h).context("certificate signature")?,
                (None, None) => bail!("the certificate has no signature; pass --basic"),
            };
            let c = Certificate::from_json(&v, &sig)?;
            let p = synthesize(&c, *depth)?;
            let mut out = p.to_json(&c);
            let mut code = EXIT_OK;
            if let Some(phi) = &phi {
                let report = verify_prefix(&p, &c, phi);
                if !report.is_clean() {
                    code = EXIT_NO;
                }
                out["report"] = json!({"clean": report.is_clean(), "checked": report.checked, "unchecked": report.unchecked,
                    "issues": report.issues.iter().map(|i| json!({"check": i.check, "detail": i.detail})).collect::<Vec<_>>()});
            }
            print_json(&out);
            Ok(code)
        }
        Cmd::Solve { input, m, max_omega, royal_cap, depth, budget, shared, out } => {
            let (sig, f) = read_formula(input)?;
            let opts = SolveOptions {
                m: *m,
                max_omega: *max_omega,
                royal_cap: *royal_cap,
                depth: *depth,
                budget: Some(Duration::from_secs(*budget)),
                encoding: encoding(*shared),
                reduce: ReduceOptions::default(),
            };
            let result = solve(&sig, &f, opts)?;
            let mut summary = result.to_json();
            if let Some(a) = &result.artifacts {
                summary["certificate"] = certificate_file(&a.certificate);
            }
            if let Some(dir) = out {
                write_artifacts(dir, &result, &summary)?;
            }
            if cli.json {
                print_json(&summary);
            } else {
                println!("{}", result.status);
                if let Some(a) = &result.artifacts {
                    print_json(&certificate_file(&a.certificate));
                }
            }
            Ok(status_code(result.status))
        }
        Cmd::Oracle { input, max_size, exactly } => {
            let (sig, f) = read_formula(input)?;
            let mode = if *exactly { Mode::Exactly } else { Mode::AtMost };
            let model = find_model(&sig, &f, *max_size, mode)?;
            match &model {
                Some(s) if cli.json => print_json(&json!({"format": 1, "found": true, "model": s.to_json()})),
                Some(s) => print_json(&s.to_json()),
                None if cli.json => print_json(&json!({"format": 1, "found": false, "max_size": max_size})),
                None => println!("no model of size {}{max_size}", if *exactly { "" } else { "<= " }),
            }
            Ok(if model.is_some() { EXIT_OK } else { EXIT_NO })
        }
        Cmd::Check { input, model, repair } => {
            let (sig, f) = read_formula(input)?;
            let s = Structure::from_json(&read_json(model)?, &sig, *repair)?;
            let failing: Vec<usize> =
                f.conjuncts().iter().enumerate().filter(|(_, c)| !check_model(&s, c)).map(|(k, _)| k).collect();
            let holds = failing.is_empty();
            if cli.json {
                print_json(&json!({"format": 1, "holds": holds, "failing_conjuncts": failing}));
            } else if holds {
                println!("true");
            } else {
                println!("false (failing top-level conjuncts: {failing:?})");
            }
            Ok(if holds { EXIT_OK } else { EXIT_NO })
        }
        Cmd::Gen { kind, tiling, steps, torus } => gen(cli, *kind, tiling.as_deref(), *steps, *torus),
    }
}

fn status_code(s: SearchStatus) -> u8 {
    match s {
        SearchStatus::Sat => EXIT_OK,
        SearchStatus::UnsatAtCap => EXIT_NO,
        SearchStatus::BudgetExhausted => EXIT_UNKNOWN,
    }
}

fn write_artifacts(dir: &Path, result: &flsat::multivar::SolveResult, summary: &Value) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, body: String| fs::write(dir.join(name), body).with_context(|| format!("writing {name}"));
    for (k, nf) in result.normal_forms.iter().enumerate() {
        put(&format!("normal_form_{k}.fl"), print_file(&normal_form_to_formula(nf), &nf.sig))?;
        put(&format!("normal_form_{k}.provenance.json"), serde_json::to_string_pretty(&nf.provenance_json())?)?;
    }
    if let Some(a) = &result.artifacts {
        put("spread.fl", print_file(&a.spread.to_formula(), &a.spread.sig))?;
        put("spread.provenance.json", serde_json::to_string_pretty(&a.spread.provenance_json())?)?;
        put("basic.basic", a.basic.to_text())?;
        put("quadratic.basic", a.quadratic.set.to_text())?;
        put("certificate.json", serde_json::to_string_pretty(&certificate_file(&a.certificate))?)?;
        put("prefix.json", serde_json::to_string_pretty(&a.prefix.to_json(&a.certificate))?)?;
        put("prefix_report.txt", a.prefix_report.to_string())?;
    }
    put("result.json", serde_json::to_string_pretty(summary)?)
}

fn read_tiling(path: Option<&Path>) -> Result<Option<TilingSystem>> {
    let Some(path) = path else { return Ok(None) };
    let ts: TilingSystem =
        serde_json::from_str(&read(path)?).with_context(|| format!("parsing tiling system {}", path.display()))?;
    ts.validate()?;
    Ok(Some(ts))
}

fn emit_formula(cli: &Cli, sig: &Signature, f: &Formula) {
    let text = print_file(f, sig);
    if cli.json {
        print_json(&json!({"format": 1, "formula": text}));
    } else {
        print!("{text}");
    }
}

fn emit_encoding(cli: &Cli, enc: &Encoding) {
    emit_formula(cli, &enc.sig, &enc.formula());
}

fn gen(cli: &Cli, kind: GenKind, tiling: Option<&Path>, steps: Option<usize>, torus: Option<usize>) -> Result<u8> {
    let ts = read_tiling(tiling)?;
    if torus.is_some() && kind != GenKind::Grid2t {
        bail!("--torus applies to grid2t only");
    }
    if steps.is_some() && !matches!(kind, GenKind::Phi2 | GenKind::Bou3t) {
        bail!("--steps applies to phi2 and bou3t only");
    }
    let mut r = rng(cli.seed);
    match kind {
        GenKind::Phi1 => {
            let ex = example_formulas().phi1;
            emit_formula(cli, &ex.sig, &ex.formula);
        }
        GenKind::Phi2 => match steps {
            Some(n) => print_json(&example2_prefix(n).to_json()),
            None => {
                let ex = example_formulas().phi2;
                emit_formula(cli, &ex.sig, &ex.formula);
            }
        },
        GenKind::Grid2t => match (torus, ts) {
            (Some(m), None) => print_json(&build_2T_torus(m).to_json()),
            (Some(m), Some(ts)) => {
                if ts.tiles.len() != 1 {
                    bail!("the torus carries a tiling only for one-tile systems");
                }
                let enc = encode_2T(&ts)?;
                let mut s = build_2T_torus(m).extend_signature(enc.sig.clone());
                let w = enc.sig.lookup(&ts.tiles[0]).expect("tile predicate");
                for e in 0..s.size() {
                    s.set(w, &[e], true);
                }
                print_json(&s.to_json());
            }
            (None, Some(ts)) => emit_encoding(cli, &encode_2T(&ts)?),
            (None, None) => emit_encoding(cli, &phi_grid_2t()),
        },
        GenKind::Bou3t => match (steps, ts) {
            (Some(n), _) => print_json(&intended_3T_prefix(n).to_json()),
            (None, Some(ts)) => emit_encoding(cli, &encode_3T(&ts)?),
            (None, None) => emit_encoding(cli, &phi_grid_3t(false)),
        },
        GenKind::Bou3tFinite => match ts {
            Some(ts) => emit_encoding(cli, &encode_3T_finite(&ts)?),
            None => emit_encoding(cli, &phi_grid_3t(true)),
        },
        GenKind::RandomSentence => {
            let sig = parse_header("sig { p/1, q/1, r/2 } trans { T } eq").expect("fixed header");
            let f = random_sentence(&mut r, &sig, 2, 3);
            emit_formula(cli, &sig, &f);
        }
        GenKind::RandomBasic => {
            let sig = parse_header("sig { p/1, q/1 } trans { T } eq").expect("fixed header");
            let set = random_basic_set(&mut r, &sig, 4);
            if cli.json {
                print_json(&json!({"format": 1, "basic": set.to_text()}));
            } else {
                print!("{}", set.to_text());
            }
        }
    }
    Ok(EXIT_OK)
}
