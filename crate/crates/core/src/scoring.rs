//! Spinal contribution: the incrementally computed upper bound on the joint
//! probability of a path's network, for whole paths and for half-paths that
//! meet at a common schema.
//!
//! Multipliers per link, in travel direction:
//!
//! | link       | multiplier                |
//! |------------|---------------------------|
//! | role up    | `p(filled) / p(filler)`   |
//! | role down  | `1`                       |
//! | isa up     | `1`                       |
//! | isa down   | `p(specific) / p(general)`|
//! | end inst   | `belief / p(end schema)`  |
//!
//! The start value is the belief in the start observation.

use thiserror::Error;

use crate::kb::{KbError, KnowledgeBase, Observation, SchemaId};
use crate::num::Real;
use crate::path::{Path, TraversalLink};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Score<T>(pub T);

impl<T: Real> Score<T> {
    pub fn value(self) -> T {
        self.0
    }
}

/// Spinal contribution of a half-path that currently stands at `at`. The
/// value includes the origin's belief and every link multiplier so far, but
/// no terminal division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfScore<T> {
    pub value: T,
    pub at: SchemaId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("link leaves schema #{found} but the half-path stands at #{expected}")]
    Chain { expected: usize, found: usize },
    #[error("half-paths meet at different schemas (#{left} and #{right})")]
    Mismatch { left: usize, right: usize },
    #[error(transparent)]
    Kb(#[from] KbError),
}

pub fn initial_score<T: Real>(obs: &Observation<T>) -> Score<T> {
    Score(obs.belief)
}

pub fn link_multiplier<T: Real>(kb: &KnowledgeBase<T>, link: &TraversalLink) -> Result<T, KbError> {
    Ok(match *link {
        TraversalLink::RoleUp { filled, filler, .. } => kb.prior(filled)? / kb.prior(filler)?,
        TraversalLink::IsaDown { specific, general } => kb.prior(specific)? / kb.prior(general)?,
        TraversalLink::RoleDown { filled, filler, .. } => {
            kb.schema(filled)?;
            kb.schema(filler)?;
            T::one()
        }
        TraversalLink::IsaUp { specific, general } => {
            kb.schema(specific)?;
            kb.schema(general)?;
            T::one()
        }
    })
}

/// Unchecked variant for the marker passer's inner loop.
pub(crate) fn multiplier_of<T: Real>(kb: &KnowledgeBase<T>, link: &TraversalLink) -> T {
    match *link {
        TraversalLink::RoleUp { filled, filler, .. } => kb.prior_of(filled) / kb.prior_of(filler),
        TraversalLink::IsaDown { specific, general } => kb.prior_of(specific) / kb.prior_of(general),
        TraversalLink::RoleDown { .. } | TraversalLink::IsaUp { .. } => T::one(),
    }
}

pub fn terminal_multiplier<T: Real>(kb: &KnowledgeBase<T>, obs: &Observation<T>) -> Result<T, KbError> {
    Ok(obs.belief / kb.prior(obs.schema)?)
}

/// Spinal contribution of a complete path, accumulated left to right.
pub fn score_path<T: Real>(kb: &KnowledgeBase<T>, path: &Path<T>) -> Result<Score<T>, KbError> {
    let mut value = initial_score(path.start()).0;
    for link in path.links() {
        value = value * link_multiplier(kb, link)?;
    }
    Ok(Score(value * terminal_multiplier(kb, path.end())?))
}

impl<T: Real> HalfScore<T> {
    /// Empty half-path standing at the observation's schema.
    pub fn seed(obs: &Observation<T>) -> Self {
        HalfScore { value: obs.belief, at: obs.schema }
    }
}

pub fn extend_half<T: Real>(
    kb: &KnowledgeBase<T>,
    half: HalfScore<T>,
    link: &TraversalLink,
) -> Result<HalfScore<T>, ScoreError> {
    if link.source() != half.at {
        return Err(ScoreError::Chain { expected: half.at.index(), found: link.source().index() });
    }
    Ok(HalfScore { value: half.value * link_multiplier(kb, link)?, at: link.destination() })
}

/// Whole-path score from two half-paths meeting at the same schema `n`:
/// `left * right / p(n)`.
pub fn combine<T: Real>(kb: &KnowledgeBase<T>, left: HalfScore<T>, right: HalfScore<T>) -> Result<Score<T>, ScoreError> {
    if left.at != right.at {
        return Err(ScoreError::Mismatch { left: left.at.index(), right: right.at.index() });
    }
    Ok(Score(left.value * right.value / kb.prior(left.at)?))
}

/// Splits `path` at schema position `k` (`0..=len`) into the half from the
/// start and the half from the end, both standing at that position.
pub fn cleave<T: Real>(
    kb: &KnowledgeBase<T>,
    path: &Path<T>,
    k: usize,
) -> Result<(HalfScore<T>, HalfScore<T>), ScoreError> {
    let links = path.links();
    assert!(k <= links.len(), "cleave position {k} beyond path of length {}", links.len());
    let mut left = HalfScore::seed(path.start());
    for link in &links[..k] {
        left = extend_half(kb, left, link)?;
    }
    let mut right = HalfScore::seed(path.end());
    for link in links[k..].iter().rev() {
        right = extend_half(kb, right, &link.reversed())?;
    }
    Ok((left, right))
}
