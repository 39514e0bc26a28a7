//! Exhaustive path enumeration, and a check of the marker passer against it.

use thiserror::Error;

use crate::kb::{KbError, KnowledgeBase, Observation};
use crate::num::Real;
use crate::path::{grammar_holds, grammar_prefix_ok, LinkKind, Path, TraversalLink, ValidityState};
use crate::scoring::{link_multiplier, score_path};

use super::{Engine, EngineConfig, MarkerError};

/// Default cap on prefixes visited by [`enumerate_paths_oracle`].
pub const ORACLE_GUARD: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration visited more than {0} prefixes")]
    GuardExceeded(usize),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Marker(#[from] MarkerError),
}

/// Every valid path of at most `max_depth` links from `from` to `to`, found
/// by depth-first search checked against the declarative grammar.
pub fn enumerate_paths_oracle<T: Real>(
    kb: &KnowledgeBase<T>,
    from: &Observation<T>,
    to: &Observation<T>,
    max_depth: usize,
) -> Result<Vec<Path<T>>, OracleError> {
    enumerate_paths_with_guard(kb, from, to, max_depth, ORACLE_GUARD)
}

pub fn enumerate_paths_with_guard<T: Real>(
    kb: &KnowledgeBase<T>,
    from: &Observation<T>,
    to: &Observation<T>,
    max_depth: usize,
    guard: usize,
) -> Result<Vec<Path<T>>, OracleError> {
    kb.schema(from.schema)?;
    kb.schema(to.schema)?;
    let mut search = Dfs { kb, to, max_depth, guard, visited: 0, links: Vec::new(), kinds: Vec::new(), out: Vec::new() };
    search.walk(from, from.schema)?;
    let out = search.out;
    for p in &out {
        assert!(p.validate(), "oracle produced an invalid path");
    }
    Ok(out)
}

struct Dfs<'a, T> {
    kb: &'a KnowledgeBase<T>,
    to: &'a Observation<T>,
    max_depth: usize,
    guard: usize,
    visited: usize,
    links: Vec<TraversalLink>,
    kinds: Vec<LinkKind>,
    out: Vec<Path<T>>,
}

impl<T: Real> Dfs<'_, T> {
    fn walk(&mut self, from: &Observation<T>, at: crate::kb::SchemaId) -> Result<(), OracleError> {
        self.visited += 1;
        if self.visited > self.guard {
            return Err(OracleError::GuardExceeded(self.guard));
        }
        if at == self.to.schema && grammar_holds(&self.kinds) {
            let path = Path::new(from.clone(), self.links.clone(), self.to.clone()).expect("links chain");
            self.out.push(path);
        }
        if self.links.len() == self.max_depth {
            return Ok(());
        }
        for link in self.kb.neighbors(at)? {
            self.kinds.push(link.kind());
            if grammar_prefix_ok(&self.kinds) {
                self.links.push(*link);
                self.walk(from, link.destination())?;
                self.links.pop();
            }
            self.kinds.pop();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissCause {
    /// Every cleave has a half whose running score fell below the cutoff.
    Pruned,
    /// Some cleave has both halves above the cutoff and retained in the mark
    /// table, yet the path was not emitted.
    Unexplained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissedPath<T> {
    pub path: Path<T>,
    pub score: T,
    pub cause: MissCause,
    /// Some cleave point has both halves scoring at least the cutoff along
    /// their whole length.
    pub halves_above_threshold: bool,
}

/// Oracle paths scoring at least the full threshold that the marker passer
/// did not emit, excluding those accounted for by best-trail retention (a
/// prefix of a half was displaced by a better-scoring mark with the same
/// origin, schema and automaton state).
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessReport<T> {
    pub missed: Vec<MissedPath<T>>,
    pub superseded: usize,
    pub oracle_paths: usize,
    pub emitted: usize,
    /// Emitted paths the oracle does not know; always a bug.
    pub spurious: Vec<Path<T>>,
}

impl<T> CompletenessReport<T> {
    pub fn is_empty(&self) -> bool {
        self.missed.is_empty() && self.spurious.is_empty()
    }
}

/// Seeds `seeds` in order into one engine (spreading after each) and compares
/// the emitted paths against the oracle for every ordered pair of seeds.
pub fn completeness_check<T: Real>(
    kb: &KnowledgeBase<T>,
    config: EngineConfig<T>,
    seeds: &[Observation<T>],
) -> Result<CompletenessReport<T>, OracleError> {
    let mut engine = Engine::new(kb, config);
    let mut emitted = Vec::new();
    for s in seeds {
        engine.seed(s.clone())?;
        emitted.extend(engine.spread().into_iter().map(|f| f.path));
    }
    let origins = engine.origins().to_vec();
    let mut report =
        CompletenessReport { missed: Vec::new(), superseded: 0, oracle_paths: 0, emitted: emitted.len(), spurious: Vec::new() };
    let mut known = Vec::new();
    // Paths scoring within rounding of the full threshold may fall either side
    // of it depending on accumulation order; they are not judged.
    let margin = T::one() + T::lit(1e-9);
    for a in 0..origins.len() {
        for b in a + 1..origins.len() {
            for path in enumerate_paths_oracle(kb, &origins[a], &origins[b], config.max_depth)? {
                let score = score_path(kb, &path)?.value();
                known.push(path.clone());
                if score < config.full_threshold * margin {
                    continue;
                }
                report.oracle_paths += 1;
                if emitted.contains(&path) {
                    continue;
                }
                match classify(kb, &engine, &config, a, b, &path)? {
                    Verdict::Superseded => report.superseded += 1,
                    Verdict::Pruned => report.missed.push(MissedPath {
                        path,
                        score,
                        cause: MissCause::Pruned,
                        halves_above_threshold: false,
                    }),
                    Verdict::Open => report.missed.push(MissedPath {
                        path,
                        score,
                        cause: MissCause::Unexplained,
                        halves_above_threshold: true,
                    }),
                }
            }
        }
    }
    report.spurious = emitted.into_iter().filter(|p| !known.contains(p)).collect();
    Ok(report)
}

enum Verdict {
    Pruned,
    Superseded,
    Open,
}

fn classify<T: Real>(
    kb: &KnowledgeBase<T>,
    engine: &Engine<'_, T>,
    config: &EngineConfig<T>,
    a: usize,
    b: usize,
    path: &Path<T>,
) -> Result<Verdict, OracleError> {
    let links = path.links();
    let mut any_admissible = false;
    for k in 0..=links.len() {
        let left: Vec<TraversalLink> = links[..k].to_vec();
        let right: Vec<TraversalLink> = links[k..].iter().rev().map(TraversalLink::reversed).collect();
        if !admissible(kb, config, path.start(), &left)? || !admissible(kb, config, path.end(), &right)? {
            continue;
        }
        any_admissible = true;
        if fully_retained(engine, a, &left) && fully_retained(engine, b, &right) {
            return Ok(Verdict::Open);
        }
    }
    Ok(if any_admissible { Verdict::Superseded } else { Verdict::Pruned })
}

/// A half survives the cutoff iff the running score after every move is at
/// least the cutoff. The origin's belief alone is not tested.
fn admissible<T: Real>(
    kb: &KnowledgeBase<T>,
    config: &EngineConfig<T>,
    origin: &Observation<T>,
    half: &[TraversalLink],
) -> Result<bool, KbError> {
    let mut v = origin.belief;
    for link in half {
        v = v * link_multiplier(kb, link)?;
        if v < config.half_threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every prefix of `half` is the retained trail for its mark-table key.
fn fully_retained<T: Real>(engine: &Engine<'_, T>, origin: usize, half: &[TraversalLink]) -> bool {
    let mut state = ValidityState::INITIAL;
    let mut at = engine.origins()[origin].schema;
    for n in 0..=half.len() {
        if n > 0 {
            state = state.step(half[n - 1].kind()).expect("half of a valid path");
            at = half[n - 1].destination();
        }
        match engine.marks().retained_trail(origin, at, state) {
            Some(trail) if trail == half[..n] => {}
            _ => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{worked_path, fixture_kb};
    use crate::kb::load_kb;

    fn obs(kb: &KnowledgeBase<f64>, i: &str, s: &str, b: f64) -> Observation<f64> {
        Observation::new(i, kb.id(s).unwrap(), b)
    }

    fn config(t: f64, full: f64) -> EngineConfig<f64> {
        EngineConfig { half_threshold: t, full_threshold: full, ..EngineConfig::default() }
    }

    #[test]
    fn fixture_oracle_finds_only_the_example_path() {
        let kb = fixture_kb();
        let (a, b) = (obs(&kb, "supermarket2", "supermarket", 0.9), obs(&kb, "go1", "go", 0.9));
        assert_eq!(enumerate_paths_oracle(&kb, &a, &b, 6).unwrap(), vec![worked_path(&kb, 0.9, 0.9)]);
        assert_eq!(enumerate_paths_oracle(&kb, &a, &b, 10).unwrap().len(), 1);
        assert!(enumerate_paths_oracle(&kb, &a, &b, 1).unwrap().is_empty());
    }

    #[test]
    fn guard_is_enforced() {
        let kb = fixture_kb();
        let (a, b) = (obs(&kb, "supermarket2", "supermarket", 0.9), obs(&kb, "go1", "go", 0.9));
        assert_eq!(enumerate_paths_with_guard(&kb, &a, &b, 6, 3), Err(OracleError::GuardExceeded(3)));
    }

    #[test]
    fn fixture_completeness_reports_nothing() {
        let kb = fixture_kb();
        let seeds = [obs(&kb, "supermarket2", "supermarket", 0.9), obs(&kb, "go1", "go", 0.9)];
        for t in [0.0, 0.1] {
            let r = completeness_check(&kb, config(t, t * t), &seeds).unwrap();
            assert!(r.is_empty(), "{r:?}");
            assert_eq!(r.oracle_paths, 1);
        }
    }

    #[test]
    fn halves_dipping_below_cutoff_are_reported_as_pruned() {
        // Going up into p costs a factor of 0.01 from either end, so every
        // cleave has a half below the cutoff although the whole clears it.
        let kb: KnowledgeBase<f64> = load_kb(
            "(eq-prior 0.0001)(schema p :prior 0.001)(schema a :prior 0.1)(schema b :prior 0.1)\
             (role p x a)(role p y b)",
        )
        .unwrap();
        let seeds = [obs(&kb, "a1", "a", 1.0), obs(&kb, "b1", "b", 1.0)];
        let whole = score_path(&kb, &enumerate_paths_oracle(&kb, &seeds[0], &seeds[1], 4).unwrap()[0]).unwrap();
        assert!((whole.value() - 0.1).abs() < 1e-12);
        let r = completeness_check(&kb, config(0.3, 0.09), &seeds).unwrap();
        assert_eq!(r.missed.len(), 1);
        assert_eq!(r.missed[0].cause, MissCause::Pruned);
        assert!(!r.missed[0].halves_above_threshold);
        assert!(completeness_check(&kb, config(0.0, 0.0), &seeds).unwrap().is_empty());
    }
}
