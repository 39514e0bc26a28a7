//! Plan recognition by marker passing over a schema network.
//!
//! Observations seed marks on schemas; marks spread breadth-first along isa
//! and role links under a path-validity automaton, and every mark carries the
//! spinal contribution of its half-path, an upper bound on the joint
//! probability of the statements the finished path would assert. Marks whose
//! bound falls below a threshold stop spreading. Colliding marks from two
//! observations are glued into a path, translated into inst and slot-equality
//! statements, and checked by exact evaluation of the small Bayesian network
//! those statements induce.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod num;
pub mod sexpr;
pub mod kb;
pub mod path;
pub mod semantics;
pub mod scoring;
pub mod marker;
pub mod bayes;
pub mod pipeline;
pub mod synth;
pub mod cli;

pub use kb::{load_kb, InstanceId, KbBuilder, KbError, RoleLink, SchemaId, SlotId};
pub use bayes::{approve, build_network, default_cpts, evidence_filter, exact_posterior, BayesError, EvidenceRegistry};
pub use marker::{completeness_check, enumerate_paths_oracle, MarkerError};
pub use num::Real;
pub use pipeline::{run, Counters, RunError};
pub use synth::{synth_corpus, SynthCorpus, SynthParams};
pub use path::{LinkKind, Phase, PathError, Rejection, TraversalLink, ValidityState};
pub use scoring::{combine, extend_half, initial_score, link_multiplier, score_path, terminal_multiplier, ScoreError};
pub use semantics::{relevant_statements, statements_of, SemanticsError, Statement, StatementSet};

pub type KnowledgeBase = kb::KnowledgeBase<f64>;
pub type KnowledgeBaseF32 = kb::KnowledgeBase<f32>;
pub type Observation = kb::Observation<f64>;
pub type Path = path::Path<f64>;
pub type PathF32 = path::Path<f32>;
pub type Score = scoring::Score<f64>;
pub type HalfScore = scoring::HalfScore<f64>;
pub type EngineConfig = marker::EngineConfig<f64>;
pub type Engine<'kb> = marker::Engine<'kb, f64>;
pub type FoundPath = marker::FoundPath<f64>;
pub type VertebrateNetwork = bayes::VertebrateNetwork<f64>;
pub type Cpts = bayes::Cpts<f64>;
pub type Posterior = bayes::Posterior<f64>;
pub type RunConfig = pipeline::RunConfig<f64>;
pub type RunReport = pipeline::RunReport<f64>;

#[cfg(test)]
pub(crate) mod fixture {
    use crate::kb::{load_kb, KnowledgeBase, Observation};
    use crate::path::Path;

    pub const FIXTURE_KB: &str = "(eq-prior 0.001)\
        (schema store- :prior 0.05)\
        (schema supermarket :isa store- :prior 0.01)\
        (schema supermarket-shopping :isa shopping :prior 0.02)\
        (schema shopping :prior 0.05)\
        (role supermarket-shopping store-of supermarket)\
        (role shopping go-step go)\
        (schema go :prior 0.1)";

    pub const WORKED_TEXT: &str = "(inst supermarket2 supermarket)\
        (role supermarket-shopping store-of supermarket)\
        (isa supermarket-shopping shopping)\
        (role- shopping go-step go)\
        (inst go1 go)";

    pub fn fixture_kb() -> KnowledgeBase<f64> {
        load_kb(FIXTURE_KB).unwrap()
    }

    pub fn worked_path(kb: &KnowledgeBase<f64>, b1: f64, b2: f64) -> Path<f64> {
        let mut p = Path::parse(kb, WORKED_TEXT).unwrap();
        let start = Observation::new("supermarket2", kb.id("supermarket").unwrap(), b1);
        let end = Observation::new("go1", kb.id("go").unwrap(), b2);
        p = Path::new(start, p.links().to_vec(), end).unwrap();
        p
    }
}
