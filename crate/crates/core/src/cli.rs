//! The `kbrevise` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::grounder::{ground, propagate, Ecnf, GroundOptions, Grounding, Propagation};
use crate::inference::{
    model_check, model_expand, optimize, revise, Change, CostFunction, Criterion, InferOptions,
    PipelineStats, RevisionProblem, RevisionStatus,
};
use crate::lang::{self, load, parse_atom_list, parse_structure, parse_term, typecheck_objective, KnowledgeBase, TypedTheory};
use crate::structure::{DomainAtom, Model};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_UNSAT: i32 = 10;

#[derive(Parser, Debug)]
#[command(name = "kbrevise", version, about = "Knowledge-base inferences: check, expand, optimize, revise, ground")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a total model satisfies the theory.
    Check(CheckArgs),
    /// Extend the knowledge-base structure to a model.
    Expand(CommonArgs),
    /// Find a model with the least value of an aggregate term.
    Optimize(OptimizeArgs),
    /// Revise a model with minimal additional changes.
    Revise(ReviseArgs),
    /// Print the ground ECNF and its size.
    Ground(CommonArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Count,
    Weighted,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Knowledge-base file with vocabulary, theory and structure.
    #[arg(long)]
    kb: PathBuf,
    #[arg(long, value_enum, default_value = "on")]
    propagate: OnOff,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format; `ground` defaults to text, everything else to json.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Leave timings out of the report.
    #[arg(long)]
    deterministic: bool,
    /// Also write the ground ECNF to this file.
    #[arg(long)]
    dump_ecnf: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Total structure block.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Aggregate term to minimize, e.g. `#{x : p(x)}`.
    #[arg(long)]
    objective: String,
}

#[derive(Args, Debug)]
struct ReviseArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: PathBuf,
    /// Atoms that must change, one per line.
    #[arg(long)]
    changes: PathBuf,
    /// Atoms that must keep their value, one per line.
    #[arg(long)]
    fixed: Option<PathBuf>,
    /// JSON object mapping atoms to change weights.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "count")]
    criterion: CriterionArg,
    /// Skip checking that the model satisfies the theory.
    #[arg(long)]
    no_verify_model: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ok,
    Unsat,
    InputError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingSizes {
    pub naive: Option<crate::grounder::EcnfSize>,
    pub propagated: Option<crate::grounder::EcnfSize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportStats {
    pub grounding: GroundingSizes,
    pub solver: Option<crate::solver::Stats>,
}

/// Machine-readable result of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of each input file, keyed by flag name.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub status: Status,
    pub metric: Option<i64>,
    pub payload: Option<Value>,
    pub stats: ReportStats,
    pub error: Option<String>,
    pub wall_ms: Option<u64>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => EXIT_OK,
            Status::Unsat => EXIT_UNSAT,
            Status::InputError => EXIT_INPUT_ERROR,
        }
    }
}

struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

struct Ctx {
    inputs: BTreeMap<String, String>,
}

impl Ctx {
    fn read(&mut self, flag: &str, path: &Path) -> Result<String, InputError> {
        let bytes = std::fs::read(path)
            .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
        self.inputs
            .insert(flag.to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|_| InputError(format!("{} is not UTF-8", path.display())))
    }

    fn load_kb(&mut self, path: &Path) -> Result<(KnowledgeBase, TypedTheory), InputError> {
        let src = self.read("kb", path)?;
        load(&src).map_err(|errs| lang_errors(path, &errs))
    }

    fn load_model(&mut self, path: &Path, voc: &lang::Vocabulary) -> Result<Model, InputError> {
        let src = self.read("model", path)?;
        let s = parse_structure(&src, voc).map_err(|e| lang_errors(path, &[e]))?;
        Model::new(s, voc).map_err(|e| InputError(format!("{}: {e}", path.display())))
    }

    fn load_atoms(
        &mut self,
        flag: &str,
        path: &Path,
        voc: &lang::Vocabulary,
    ) -> Result<BTreeSet<DomainAtom>, InputError> {
        let src = self.read(flag, path)?;
        let atoms = parse_atom_list(&src, voc).map_err(|e| lang_errors(path, &[e]))?;
        Ok(atoms.into_iter().collect())
    }

    fn load_weights(&mut self, path: &Path, voc: &lang::Vocabulary) -> Result<CostFunction, InputError> {
        let src = self.read("weights", path)?;
        let raw: BTreeMap<String, u64> = serde_json::from_str(&src)
            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let mut weights = BTreeMap::new();
        for (k, w) in raw {
            let a: DomainAtom = k
                .parse()
                .map_err(|_| InputError(format!("{}: `{k}` is not an atom", path.display())))?;
            if !voc.is_well_sorted(&a) {
                return Err(InputError(format!(
                    "{}: {a} is not an atom of the vocabulary",
                    path.display()
                )));
            }
            weights.insert(a, w);
        }
        Ok(CostFunction::new(weights)?)
    }
}

fn lang_errors(path: &Path, errs: &[lang::LangError]) -> InputError {
    InputError(
        errs.iter()
            .map(|e| format!("{}:{e}", path.display()))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

fn atoms_json(m: &Model) -> Value {
    json!(m.true_atoms().iter().map(|a| a.to_string()).collect::<Vec<_>>())
}

fn changes_json(cs: &[Change]) -> Value {
    json!(cs
        .iter()
        .map(|c| json!({"atom": c.atom.to_string(), "from": c.from, "to": c.to}))
        .collect::<Vec<_>>())
}

fn stats_of(p: &PipelineStats, solved: bool) -> ReportStats {
    ReportStats {
        grounding: GroundingSizes {
            naive: Some(p.naive),
            propagated: p.propagated,
        },
        solver: solved.then_some(p.solver),
    }
}

/// The grounding the inferences work on, for `--dump-ecnf` and `ground`.
fn final_grounding(
    kb: &KnowledgeBase,
    t: &TypedTheory,
    propagate_first: bool,
    opts: &GroundOptions,
) -> Result<(Ecnf, GroundingSizes), InputError> {
    let naive: Grounding = ground(&kb.vocabulary, t, &kb.structure, opts)?;
    if !propagate_first {
        let size = naive.ecnf.size();
        return Ok((naive.ecnf, GroundingSizes { naive: Some(size), propagated: None }));
    }
    let ecnf = match propagate(&kb.vocabulary, t, &kb.structure, opts)? {
        Propagation::Inconsistent => {
            let mut e = Ecnf::new();
            e.clauses.push(Vec::new());
            e
        }
        Propagation::Consistent(s) => ground(&kb.vocabulary, t, &s, opts)?.ecnf,
    };
    let sizes = GroundingSizes {
        naive: Some(naive.ecnf.size()),
        propagated: Some(ecnf.size()),
    };
    Ok((ecnf, sizes))
}

struct Outcome {
    status: Status,
    metric: Option<i64>,
    payload: Option<Value>,
    stats: ReportStats,
    /// Text printed instead of the report in text mode, if any.
    text: Option<String>,
}

fn execute(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome, InputError> {
    let common = match cmd {
        Command::Check(a) => &a.common,
        Command::Expand(a) | Command::Ground(a) => a,
        Command::Optimize(a) => &a.common,
        Command::Revise(a) => &a.common,
    };
    let (kb, t) = ctx.load_kb(&common.kb)?;
    let voc = &kb.vocabulary;
    let gopts = GroundOptions::from_env();
    let opts = InferOptions {
        seed: common.seed,
        propagate: common.propagate == OnOff::On,
        ground: gopts,
    };
    if let Some(path) = &common.dump_ecnf {
        if !matches!(cmd, Command::Ground(_)) {
            let (e, _) = final_grounding(&kb, &t, opts.propagate, &gopts)?;
            std::fs::write(path, e.dump())
                .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
        }
    }

    let out = match cmd {
        Command::Check(a) => {
            let m = ctx.load_model(&a.model, voc)?;
            let ok = model_check(voc, &t, &m)?;
            Outcome {
                status: if ok { Status::Ok } else { Status::Unsat },
                metric: None,
                payload: ok.then(|| json!({"satisfied": true})),
                stats: ReportStats {
                    grounding: GroundingSizes { naive: None, propagated: None },
                    solver: None,
                },
                text: None,
            }
        }
        Command::Expand(_) => {
            let e = model_expand(voc, &t, &kb.structure, &opts)?;
            Outcome {
                status: if e.model.is_some() { Status::Ok } else { Status::Unsat },
                metric: None,
                payload: e.model.as_ref().map(|m| json!({"model": atoms_json(m)})),
                stats: stats_of(&e.stats, true),
                text: None,
            }
        }
        Command::Optimize(a) => {
            let term = parse_term(&a.objective, voc).map_err(|e| InputError(format!("--objective: {e}")))?;
            let agg = typecheck_objective(voc, &term).map_err(|errs| {
                InputError(
                    errs.iter()
                        .map(|e| format!("--objective: {e}"))
                        .collect::<Vec<_>>()
                        .join("\n"),
                )
            })?;
            let o = optimize(voc, &t, &kb.structure, &agg, &opts)?;
            Outcome {
                status: if o.best.is_some() { Status::Ok } else { Status::Unsat },
                metric: o.best.as_ref().map(|(_, v)| *v),
                payload: o
                    .best
                    .as_ref()
                    .map(|(m, v)| json!({"model": atoms_json(m), "value": v})),
                stats: stats_of(&o.stats, true),
                text: None,
            }
        }
        Command::Revise(a) => {
            let m = ctx.load_model(&a.model, voc)?;
            let changes = ctx.load_atoms("changes", &a.changes, voc)?;
            let fixed = match &a.fixed {
                Some(p) => ctx.load_atoms("fixed", p, voc)?,
                None => BTreeSet::new(),
            };
            let criterion = match (a.criterion, &a.weights) {
                (CriterionArg::Weighted, Some(p)) => Criterion::Weighted(ctx.load_weights(p, voc)?),
                (CriterionArg::Weighted, None) => {
                    return Err(InputError("--criterion weighted needs --weights".into()))
                }
                (CriterionArg::Count, Some(p)) => {
                    ctx.load_weights(p, voc)?;
                    Criterion::Count
                }
                (CriterionArg::Count, None) => Criterion::Count,
            };
            let problem = RevisionProblem {
                vocabulary: voc,
                theory: &t,
                model: &m,
                changes,
                fixed,
                criterion,
                verify_model: !a.no_verify_model,
            };
            let r = revise(&problem, &opts)?;
            let ok = r.status == RevisionStatus::Revised;
            Outcome {
                status: if ok { Status::Ok } else { Status::Unsat },
                metric: ok.then_some(r.metric as i64),
                payload: r.model.as_ref().map(|nm| {
                    json!({
                        "model": atoms_json(nm),
                        "required_changes": changes_json(&r.required),
                        "additional_changes": changes_json(&r.additional),
                    })
                }),
                stats: stats_of(&r.stats, true),
                text: None,
            }
        }
        Command::Ground(a) => {
            let (e, sizes) = final_grounding(&kb, &t, opts.propagate, &gopts)?;
            let dump = e.dump();
            if let Some(path) = &a.dump_ecnf {
                std::fs::write(path, &dump)
                    .map_err(|err| InputError(format!("cannot write {}: {err}", path.display())))?;
            }
            let size = e.size();
            Outcome {
                status: Status::Ok,
                metric: None,
                payload: Some(json!({"ecnf": dump, "size": size})),
                stats: ReportStats {
                    grounding: sizes,
                    solver: None,
                },
                text: Some(format!("{dump}{size}\n")),
            }
        }
    };
    Ok(out)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Check(_) => "check",
        Command::Expand(_) => "expand",
        Command::Optimize(_) => "optimize",
        Command::Revise(_) => "revise",
        Command::Ground(_) => "ground",
    }
}

fn render_text(r: &RunReport) -> String {
    let mut s = format!("command: {}\nstatus: {}\nseed: {}\n", r.command, status_str(r.status), r.seed);
    if let Some(m) = r.metric {
        s += &format!("metric: {m}\n");
    }
    if let Some(e) = &r.error {
        s += &format!("error: {e}\n");
    }
    if let Some(p) = &r.payload {
        if let Some(atoms) = p.get("model").and_then(Value::as_array) {
            let names: Vec<&str> = atoms.iter().filter_map(Value::as_str).collect();
            s += &format!("model: {}\n", names.join(" "));
        }
        if let Some(v) = p.get("value") {
            s += &format!("value: {v}\n");
        }
        for key in ["required_changes", "additional_changes"] {
            if let Some(cs) = p.get(key).and_then(Value::as_array) {
                for c in cs {
                    s += &format!(
                        "{}: {} {} -> {}\n",
                        key.trim_end_matches("_changes"),
                        c["atom"].as_str().unwrap_or_default(),
                        c["from"],
                        c["to"]
                    );
                }
            }
        }
    }
    if let Some(n) = r.stats.grounding.naive {
        s += &format!("grounding naive: {n}\n");
    }
    if let Some(p) = r.stats.grounding.propagated {
        s += &format!("grounding propagated: {p}\n");
    }
    if let Some(st) = r.stats.solver {
        s += &format!(
            "solver: conflicts={} decisions={} propagations={} restarts={} learned={} loops={}\n",
            st.conflicts, st.decisions, st.propagations, st.restarts, st.learned_clauses, st.loop_clauses
        );
    }
    if let Some(ms) = r.wall_ms {
        s += &format!("wall_ms: {ms}\n");
    }
    s
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Ok => "OK",
        Status::Unsat => "UNSAT",
        Status::InputError => "INPUT_ERROR",
    }
}

/// Runs one invocation; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let start = Instant::now();
    let mut ctx = Ctx {
        inputs: BTreeMap::new(),
    };
    let common = match &cli.command {
        Command::Check(a) => &a.common,
        Command::Expand(a) | Command::Ground(a) => a,
        Command::Optimize(a) => &a.common,
        Command::Revise(a) => &a.common,
    };
    let is_ground = matches!(cli.command, Command::Ground(_));
    let format = common
        .format
        .unwrap_or(if is_ground { Format::Text } else { Format::Json });

    let result = execute(&cli.command, &mut ctx);
    let wall_ms = (!common.deterministic).then(|| start.elapsed().as_millis() as u64);
    let empty_stats = ReportStats {
        grounding: GroundingSizes { naive: None, propagated: None },
        solver: None,
    };
    let (report, text) = match result {
        Ok(o) => (
            RunReport {
                command: command_name(&cli.command).into(),
                inputs: ctx.inputs,
                seed: common.seed,
                status: o.status,
                metric: o.metric,
                payload: o.payload,
                stats: o.stats,
                error: None,
                wall_ms,
            },
            o.text,
        ),
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            (
                RunReport {
                    command: command_name(&cli.command).into(),
                    inputs: ctx.inputs,
                    seed: common.seed,
                    status: Status::InputError,
                    metric: None,
                    payload: None,
                    stats: empty_stats,
                    error: Some(msg),
                    wall_ms,
                },
                None,
            )
        }
    };
    let rendered = match format {
        Format::Json => {
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
        }
        Format::Text => text.unwrap_or_else(|| render_text(&report)),
    };
    let _ = out.write_all(rendered.as_bytes());
    report.exit_code()
}
