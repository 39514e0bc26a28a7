//! Breadth-first mark spreading with automaton-constrained moves and a
//! spinal-contribution cutoff. Marks from different origins that meet on a
//! schema are glued into a path.

mod oracle;

use std::collections::{BTreeMap, HashSet, VecDeque};

use thiserror::Error;

use crate::kb::{InstanceId, KbError, KnowledgeBase, Observation, SchemaId};
use crate::num::Real;
use crate::path::{Path, TraversalLink, ValidityState};
use crate::scoring::multiplier_of;

pub use oracle::{
    completeness_check, enumerate_paths_oracle, enumerate_paths_with_guard, CompletenessReport, MissCause,
    MissedPath, OracleError, ORACLE_GUARD,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig<T> {
    /// Half-path cutoff `T`: marks scoring below it are not spread further.
    pub half_threshold: T,
    /// Whole paths scoring below this are not emitted.
    pub full_threshold: T,
    pub max_depth: usize,
    pub approval_ratio: T,
}

impl<T: Real> Default for EngineConfig<T> {
    fn default() -> Self {
        let t = T::lit(30.0);
        EngineConfig { half_threshold: t, full_threshold: t * t, max_depth: 10, approval_ratio: T::lit(1000.0) }
    }
}

impl<T: Real> EngineConfig<T> {
    /// Config with cutoff `t` and full threshold `t * t`.
    pub fn with_threshold(t: T) -> Self {
        EngineConfig { half_threshold: t, full_threshold: t * t, ..Self::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkerError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("belief for `{0}` must lie in (0, 1]")]
    BeliefRange(InstanceId),
    #[error("instance `{0}` already observed with a different schema or belief")]
    Conflicting(InstanceId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark<T> {
    pub origin: usize,
    pub at: SchemaId,
    pub state: ValidityState,
    pub score: T,
    pub depth: usize,
    parent: Option<usize>,
    via: Option<TraversalLink>,
}

/// Retained marks, one per `(origin, schema, automaton state)`, plus every
/// mark ever placed so trails can be traced back.
#[derive(Debug, Clone)]
pub struct MarkTable<T> {
    marks: Vec<Mark<T>>,
    by_node: Vec<BTreeMap<(usize, ValidityState), usize>>,
}

impl<T: Real> MarkTable<T> {
    fn new(nodes: usize) -> Self {
        MarkTable { marks: Vec::new(), by_node: vec![BTreeMap::new(); nodes] }
    }

    /// Number of retained marks.
    pub fn len(&self) -> usize {
        self.by_node.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Marks placed so far, including ones later displaced.
    pub fn placed(&self) -> usize {
        self.marks.len()
    }

    pub fn retained(&self, origin: usize, at: SchemaId, state: ValidityState) -> Option<&Mark<T>> {
        self.by_node.get(at.index())?.get(&(origin, state)).map(|&i| &self.marks[i])
    }

    pub fn retained_trail(&self, origin: usize, at: SchemaId, state: ValidityState) -> Option<Vec<TraversalLink>> {
        let &i = self.by_node.get(at.index())?.get(&(origin, state))?;
        Some(self.trail(i))
    }

    pub fn retained_at(&self, at: SchemaId) -> impl Iterator<Item = &Mark<T>> + '_ {
        self.by_node[at.index()].values().map(|&i| &self.marks[i])
    }

    fn trail(&self, mut i: usize) -> Vec<TraversalLink> {
        let mut out = Vec::with_capacity(self.marks[i].depth);
        while let (Some(link), Some(parent)) = (self.marks[i].via, self.marks[i].parent) {
            out.push(link);
            i = parent;
        }
        out.reverse();
        out
    }
}

/// A glued path and the score `combine` gave it at the collision schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FoundPath<T> {
    pub path: Path<T>,
    pub score: T,
    pub collision: SchemaId,
}

pub struct Engine<'kb, T> {
    kb: &'kb KnowledgeBase<T>,
    config: EngineConfig<T>,
    origins: Vec<Observation<T>>,
    table: MarkTable<T>,
    queue: VecDeque<usize>,
    pending: Vec<FoundPath<T>>,
    emitted: HashSet<(usize, usize, Vec<TraversalLink>)>,
}

impl<'kb, T: Real> Engine<'kb, T> {
    pub fn new(kb: &'kb KnowledgeBase<T>, config: EngineConfig<T>) -> Self {
        Engine {
            kb,
            config,
            origins: Vec::new(),
            table: MarkTable::new(kb.len()),
            queue: VecDeque::new(),
            pending: Vec::new(),
            emitted: HashSet::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig<T> {
        &self.config
    }

    pub fn origins(&self) -> &[Observation<T>] {
        &self.origins
    }

    pub fn marks(&self) -> &MarkTable<T> {
        &self.table
    }

    /// Places the depth-0 mark for `obs`. Collisions with marks already on
    /// the schema are queued for the next [`spread`](Self::spread).
    pub fn seed(&mut self, obs: Observation<T>) -> Result<usize, MarkerError> {
        self.kb.schema(obs.schema)?;
        if !(obs.belief > T::zero() && obs.belief <= T::one()) {
            return Err(MarkerError::BeliefRange(obs.instance));
        }
        if let Some(i) = self.origins.iter().position(|o| o.instance == obs.instance) {
            return if self.origins[i] == obs { Ok(i) } else { Err(MarkerError::Conflicting(obs.instance)) };
        }
        let origin = self.origins.len();
        let mark = Mark {
            origin,
            at: obs.schema,
            state: ValidityState::INITIAL,
            score: obs.belief,
            depth: 0,
            parent: None,
            via: None,
        };
        self.origins.push(obs);
        self.place(mark);
        Ok(origin)
    }

    /// Spreads until no mark can move, returning the paths found since the
    /// previous call in discovery order.
    pub fn spread(&mut self) -> Vec<FoundPath<T>> {
        let t = self.config.half_threshold;
        while let Some(i) = self.queue.pop_front() {
            let m = self.table.marks[i];
            if self.table.by_node[m.at.index()].get(&(m.origin, m.state)) != Some(&i) {
                continue;
            }
            // Seeds always spread: beliefs never exceed 1, so a cutoff above 1
            // would otherwise stop every search before its first move.
            if m.depth >= self.config.max_depth || (m.depth > 0 && m.score < t) {
                continue;
            }
            for link in self.kb.moves(m.at) {
                let Ok(state) = m.state.step(link.kind()) else { continue };
                let score = m.score * multiplier_of(self.kb, link);
                if score < t {
                    continue;
                }
                self.place(Mark {
                    origin: m.origin,
                    at: link.destination(),
                    state,
                    score,
                    depth: m.depth + 1,
                    parent: Some(i),
                    via: Some(*link),
                });
            }
        }
        std::mem::take(&mut self.pending)
    }

    fn place(&mut self, mark: Mark<T>) {
        let key = (mark.origin, mark.state);
        if let Some(&old) = self.table.by_node[mark.at.index()].get(&key) {
            if self.table.marks[old].score >= mark.score {
                return;
            }
        }
        let i = self.table.marks.len();
        self.table.marks.push(mark);
        self.table.by_node[mark.at.index()].insert(key, i);
        self.collide(i);
        self.queue.push_back(i);
    }

    fn collide(&mut self, i: usize) {
        let m = self.table.marks[i];
        let others: Vec<usize> = self.table.by_node[m.at.index()]
            .iter()
            .filter(|((origin, state), _)| *origin != m.origin && state.joins(m.state))
            .map(|(_, &j)| j)
            .collect();
        for j in others {
            let o = self.table.marks[j];
            if m.depth + o.depth > self.config.max_depth {
                continue;
            }
            let score = m.score * o.score / self.kb.prior_of(m.at);
            if score < self.config.full_threshold {
                continue;
            }
            let (left, right) = if m.origin < o.origin { (i, j) } else { (j, i) };
            let mut links = self.table.trail(left);
            links.extend(self.table.trail(right).iter().rev().map(TraversalLink::reversed));
            let (a, b) = (self.table.marks[left].origin, self.table.marks[right].origin);
            if !self.emitted.insert((a, b, links.clone())) {
                continue;
            }
            let path = Path::new(self.origins[a].clone(), links, self.origins[b].clone())
                .expect("glued half-paths chain");
            assert!(path.validate(), "glued path violates the path grammar");
            self.pending.push(FoundPath { path, score, collision: m.at });
        }
    }
}
