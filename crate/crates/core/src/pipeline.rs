//! One recognition pass: observations seed and spread in arrival order, every
//! emitted path is translated, filtered for corroboration, evaluated exactly
//! and approved or not.

use serde::Serialize;
use thiserror::Error;

use crate::bayes::{approve, build_network, default_cpts, evidence_filter, exact_posterior, BayesError, EvidenceRegistry};
use crate::kb::{InstanceId, KbError, KnowledgeBase};
use crate::marker::{Engine, EngineConfig, FoundPath, MarkerError};
use crate::num::Real;
use crate::path::parse_observation;
use crate::scoring::score_path;
use crate::semantics::{relevant_subset, statements_with, SemanticsError};
use crate::sexpr::{self, Pos, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig<T> {
    pub engine: EngineConfig<T>,
    pub gamma1: T,
    pub gamma0: T,
}

impl<T: Real> Default for RunConfig<T> {
    fn default() -> Self {
        RunConfig { engine: EngineConfig::default(), gamma1: T::lit(0.9), gamma0: T::lit(1e-6) }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: {source}")]
    Marker { pos: Pos, source: MarkerError },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

/// Outcome of exact evaluation for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation<T> {
    /// Failed the evidence filter.
    NotEvaluated,
    /// Too many nodes to enumerate.
    TooLarge,
    Done { posterior: T, residual: T, approved: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord<T> {
    pub path: String,
    pub sc: T,
    pub rs: String,
    pub filtered: bool,
    pub evaluation: Evaluation<T>,
}

impl<T: Real> PathRecord<T> {
    pub fn approved(&self) -> bool {
        matches!(self.evaluation, Evaluation::Done { approved: true, .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub reported: usize,
    pub asserted: usize,
    pub evaluated: usize,
    pub approved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<T> {
    pub records: Vec<PathRecord<T>>,
    pub counters: Counters,
}

pub const ASSERTED_NOTE: &str =
    "asserted counts reported paths whose sc reaches the full threshold; paths failing the evidence filter or too large to enumerate are asserted but not evaluated";

#[derive(Serialize)]
#[serde(untagged)]
enum PosteriorField<T> {
    Value(T),
    Skipped(&'static str),
}

#[derive(Serialize)]
struct RecordLine<'a, T> {
    path: &'a str,
    sc: T,
    rs: &'a str,
    filtered: bool,
    posterior: Option<PosteriorField<T>>,
    residual: Option<T>,
    approved: bool,
}

impl<T: Real + Serialize> RunReport<T> {
    /// JSON lines: a header, one record per path in discovery order, then the
    /// counters.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({ "asserted": ASSERTED_NOTE });
        out.push_str(&header.to_string());
        out.push('\n');
        for r in &self.records {
            let (posterior, residual) = match r.evaluation {
                Evaluation::NotEvaluated => (None, None),
                Evaluation::TooLarge => (Some(PosteriorField::Skipped("skipped: too large")), None),
                Evaluation::Done { posterior, residual, .. } => (Some(PosteriorField::Value(posterior)), Some(residual)),
            };
            let line = RecordLine {
                path: &r.path,
                sc: r.sc,
                rs: &r.rs,
                filtered: r.filtered,
                posterior,
                residual,
                approved: r.approved(),
            };
            out.push_str(&serde_json::to_string(&line).expect("record serialises"));
            out.push('\n');
        }
        #[derive(Serialize)]
        struct CountersLine {
            counters: Counters,
        }
        out.push_str(&serde_json::to_string(&CountersLine { counters: self.counters }).expect("counters serialise"));
        out.push('\n');
        out
    }
}

/// Runs one pass over `input`, a sequence of `(inst ID SCHEMA [:belief F])`
/// and `(corroborate SCHEMA SLOT)` forms.
pub fn run<T: Real>(kb: &KnowledgeBase<T>, config: &RunConfig<T>, input: &str) -> Result<RunReport<T>, RunError> {
    let mut engine = Engine::new(kb, config.engine);
    let mut registry = EvidenceRegistry::new();
    let mut found: Vec<FoundPath<T>> = Vec::new();
    for form in sexpr::read_all(input)? {
        let (head, args) = form.as_form()?;
        match head {
            "inst" => {
                let obs = parse_observation(kb, &form)?;
                registry.observe(obs.instance.clone());
                engine.seed(obs).map_err(|source| RunError::Marker { pos: form.pos(), source })?;
                found.extend(engine.spread());
            }
            "corroborate" => {
                let [schema, slot] = args else {
                    return Err(SyntaxError::new(form.pos(), "expected (corroborate SCHEMA SLOT)").into());
                };
                let s = kb.id(name(schema)?).map_err(|e| SyntaxError::new(schema.pos(), e.to_string()))?;
                let sl = kb.slot(name(slot)?).map_err(|e| SyntaxError::new(slot.pos(), e.to_string()))?;
                registry.corroborate(s, sl);
            }
            other => return Err(SyntaxError::new(form.pos(), format!("unknown form `{other}`")).into()),
        }
    }

    let mut report = RunReport { records: Vec::new(), counters: Counters::default() };
    for (n, f) in found.iter().enumerate() {
        let prefix = n + 1;
        let s = statements_with(&f.path, |k| InstanceId::new(format!("p{prefix}-gen-{k}")));
        let rs = relevant_subset(&s, kb)?;
        let sc = score_path(kb, &f.path)?.value();
        report.counters.reported += 1;
        if sc >= config.engine.full_threshold {
            report.counters.asserted += 1;
        }
        let filtered = evidence_filter(kb, &rs, &registry)?;
        let evaluation = if !filtered {
            Evaluation::NotEvaluated
        } else {
            let net = build_network(kb, &f.path, &rs)?;
            let cpts = default_cpts(&net, config.gamma1, config.gamma0)?;
            match exact_posterior(&net, &cpts) {
                Ok(post) => {
                    let approved = approve(&net, post.joint, config.engine.approval_ratio);
                    report.counters.evaluated += 1;
                    report.counters.approved += usize::from(approved);
                    Evaluation::Done { posterior: post.joint, residual: post.residual, approved }
                }
                Err(BayesError::TooLarge(_)) => Evaluation::TooLarge,
                Err(e) => return Err(e.into()),
            }
        };
        report.records.push(PathRecord { path: f.path.render(kb), sc, rs: rs.render(kb), filtered, evaluation });
    }
    Ok(report)
}

fn name(s: &sexpr::Sexp) -> Result<&str, SyntaxError> {
    s.as_atom().ok_or_else(|| SyntaxError::new(s.pos(), "expected a name"))
}
