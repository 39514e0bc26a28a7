//! Marker-passer paths in travel order, the validity automaton that decides
//! which link sequences may form a path, and the canonical path syntax.

use std::fmt::Write as _;

use thiserror::Error;

use crate::kb::{KbError, KnowledgeBase, Observation, SchemaId, SlotId};
use crate::num::Real;
use crate::sexpr::{self, Pos, Sexp, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    /// From a filler type up to the schema whose slot it fills.
    RoleUp,
    /// From a schema down to one of its slot fillers.
    RoleDown,
    /// From a schema to its isa parent.
    IsaUp,
    /// From a schema to one of its isa children.
    IsaDown,
}

impl LinkKind {
    pub const ALL: [LinkKind; 4] = [LinkKind::RoleUp, LinkKind::RoleDown, LinkKind::IsaUp, LinkKind::IsaDown];

    pub fn is_role(self) -> bool {
        matches!(self, LinkKind::RoleUp | LinkKind::RoleDown)
    }

    pub fn reversed(self) -> LinkKind {
        match self {
            LinkKind::RoleUp => LinkKind::RoleDown,
            LinkKind::RoleDown => LinkKind::RoleUp,
            LinkKind::IsaUp => LinkKind::IsaDown,
            LinkKind::IsaDown => LinkKind::IsaUp,
        }
    }
}

/// One move of a path, normalised to the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraversalLink {
    RoleUp { filled: SchemaId, slot: SlotId, filler: SchemaId },
    RoleDown { filled: SchemaId, slot: SlotId, filler: SchemaId },
    IsaUp { specific: SchemaId, general: SchemaId },
    IsaDown { specific: SchemaId, general: SchemaId },
}

impl TraversalLink {
    pub fn kind(&self) -> LinkKind {
        match self {
            TraversalLink::RoleUp { .. } => LinkKind::RoleUp,
            TraversalLink::RoleDown { .. } => LinkKind::RoleDown,
            TraversalLink::IsaUp { .. } => LinkKind::IsaUp,
            TraversalLink::IsaDown { .. } => LinkKind::IsaDown,
        }
    }

    pub fn source(&self) -> SchemaId {
        match *self {
            TraversalLink::RoleUp { filler, .. } => filler,
            TraversalLink::RoleDown { filled, .. } => filled,
            TraversalLink::IsaUp { specific, .. } => specific,
            TraversalLink::IsaDown { general, .. } => general,
        }
    }

    pub fn destination(&self) -> SchemaId {
        match *self {
            TraversalLink::RoleUp { filled, .. } => filled,
            TraversalLink::RoleDown { filler, .. } => filler,
            TraversalLink::IsaUp { general, .. } => general,
            TraversalLink::IsaDown { specific, .. } => specific,
        }
    }

    pub fn slot(&self) -> Option<SlotId> {
        match *self {
            TraversalLink::RoleUp { slot, .. } | TraversalLink::RoleDown { slot, .. } => Some(slot),
            _ => None,
        }
    }

    /// The same KB link travelled the other way.
    pub fn reversed(&self) -> TraversalLink {
        match *self {
            TraversalLink::RoleUp { filled, slot, filler } => TraversalLink::RoleDown { filled, slot, filler },
            TraversalLink::RoleDown { filled, slot, filler } => TraversalLink::RoleUp { filled, slot, filler },
            TraversalLink::IsaUp { specific, general } => TraversalLink::IsaDown { specific, general },
            TraversalLink::IsaDown { specific, general } => TraversalLink::IsaUp { specific, general },
        }
    }

    fn render_into<T: Real>(&self, kb: &KnowledgeBase<T>, out: &mut String) {
        let _ = match *self {
            TraversalLink::RoleUp { filled, slot, filler } => {
                write!(out, "(role {} {} {})", kb.name(filled), kb.slot_name(slot), kb.name(filler))
            }
            TraversalLink::RoleDown { filled, slot, filler } => {
                write!(out, "(role- {} {} {})", kb.name(filled), kb.slot_name(slot), kb.name(filler))
            }
            TraversalLink::IsaUp { specific, general } => {
                write!(out, "(isa {} {})", kb.name(specific), kb.name(general))
            }
            TraversalLink::IsaDown { specific, general } => {
                write!(out, "(isa- {} {})", kb.name(specific), kb.name(general))
            }
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    NoRoleYet,
    UpPhase,
    DownPhase,
}

/// Why a link cannot extend a path prefix. Rejection is permanent: no
/// extension of a rejected prefix is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// An isa move up immediately followed by an isa move down.
    IsaPlateau,
    /// A role move up after a role move down.
    SlotFillerValley,
}

/// State of the path-validity automaton after a prefix of links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValidityState {
    pub phase: Phase,
    pub last_was_isa_up: bool,
}

impl Default for ValidityState {
    fn default() -> Self {
        Self::INITIAL
    }
}

impl ValidityState {
    pub const INITIAL: ValidityState = ValidityState { phase: Phase::NoRoleYet, last_was_isa_up: false };

    pub fn step(self, kind: LinkKind) -> Result<ValidityState, Rejection> {
        match kind {
            LinkKind::IsaDown if self.last_was_isa_up => Err(Rejection::IsaPlateau),
            LinkKind::RoleUp if self.phase == Phase::DownPhase => Err(Rejection::SlotFillerValley),
            LinkKind::RoleUp => Ok(ValidityState { phase: Phase::UpPhase, last_was_isa_up: false }),
            LinkKind::RoleDown => Ok(ValidityState { phase: Phase::DownPhase, last_was_isa_up: false }),
            LinkKind::IsaUp => Ok(ValidityState { phase: self.phase, last_was_isa_up: true }),
            LinkKind::IsaDown => Ok(ValidityState { phase: self.phase, last_was_isa_up: false }),
        }
    }

    /// A complete path may end in this state.
    pub fn is_accepting(self) -> bool {
        self.phase != Phase::NoRoleYet
    }

    /// Runs the automaton over `kinds` from the initial state.
    pub fn run(kinds: impl IntoIterator<Item = LinkKind>) -> Result<ValidityState, Rejection> {
        kinds.into_iter().try_fold(Self::INITIAL, ValidityState::step)
    }

    /// True iff a half-path ending in `self`, glued to the reversal of a
    /// half-path ending in `other`, forms a valid path.
    pub fn joins(self, other: ValidityState) -> bool {
        let both_down = self.phase == Phase::DownPhase && other.phase == Phase::DownPhase;
        let no_role = self.phase == Phase::NoRoleYet && other.phase == Phase::NoRoleYet;
        let plateau = self.last_was_isa_up && other.last_was_isa_up;
        !(both_down || no_role || plateau)
    }
}

/// Independent, declarative statement of the path grammar over link kinds:
/// at least one role move; no isa-up directly followed by isa-down; no role-up
/// anywhere after a role-down.
pub fn grammar_holds(kinds: &[LinkKind]) -> bool {
    kinds.iter().any(|k| k.is_role()) && grammar_prefix_ok(kinds)
}

/// [`grammar_holds`] without the at-least-one-role clause: true iff some
/// extension of `kinds` could still be valid.
pub fn grammar_prefix_ok(kinds: &[LinkKind]) -> bool {
    let plateau = kinds.windows(2).any(|w| w[0] == LinkKind::IsaUp && w[1] == LinkKind::IsaDown);
    let valley = kinds
        .iter()
        .enumerate()
        .any(|(i, k)| *k == LinkKind::RoleDown && kinds[i + 1..].contains(&LinkKind::RoleUp));
    !plateau && !valley
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: {msg}")]
    At { pos: Pos, msg: String },
    #[error("a path needs at least one link")]
    Empty,
    #[error("link {index} does not continue from where the path stands")]
    Chain { index: usize },
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// A chained sequence of links between two observations. Chaining is enforced
/// on construction; grammatical validity is checked by [`Path::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    start: Observation<T>,
    links: Vec<TraversalLink>,
    end: Observation<T>,
}

impl<T: Real> Path<T> {
    pub fn new(start: Observation<T>, links: Vec<TraversalLink>, end: Observation<T>) -> Result<Self, PathError> {
        if links.is_empty() {
            return Err(PathError::Empty);
        }
        let mut at = start.schema;
        for (index, link) in links.iter().enumerate() {
            if link.source() != at {
                return Err(PathError::Chain { index });
            }
            at = link.destination();
        }
        if at != end.schema {
            return Err(PathError::Chain { index: links.len() });
        }
        Ok(Path { start, links, end })
    }

    pub fn start(&self) -> &Observation<T> {
        &self.start
    }

    pub fn end(&self) -> &Observation<T> {
        &self.end
    }

    pub fn links(&self) -> &[TraversalLink] {
        &self.links
    }

    pub fn kinds(&self) -> impl Iterator<Item = LinkKind> + '_ {
        self.links.iter().map(TraversalLink::kind)
    }

    /// Schema at each position: `len() + 1` entries.
    pub fn schemas(&self) -> Vec<SchemaId> {
        std::iter::once(self.start.schema).chain(self.links.iter().map(|l| l.destination())).collect()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn role_count(&self) -> usize {
        self.kinds().filter(|k| k.is_role()).count()
    }

    /// The automaton accepts every prefix and the path contains a role move.
    pub fn validate(&self) -> bool {
        ValidityState::run(self.kinds()).is_ok_and(ValidityState::is_accepting)
    }

    /// The same path read from the other end.
    pub fn reverse(&self) -> Path<T> {
        Path {
            start: self.end.clone(),
            links: self.links.iter().rev().map(TraversalLink::reversed).collect(),
            end: self.start.clone(),
        }
    }

    /// Checks every link against the knowledge base.
    pub fn check_links(&self, kb: &KnowledgeBase<T>) -> Result<(), PathError> {
        for (index, link) in self.links.iter().enumerate() {
            if !kb.has_link(link) {
                return Err(PathError::Chain { index });
            }
        }
        Ok(())
    }

    /// Canonical syntax, beliefs omitted.
    pub fn render(&self, kb: &KnowledgeBase<T>) -> String {
        self.render_with(kb, false)
    }

    /// Canonical syntax with `:belief` on endpoints whose belief is not 1.
    pub fn render_annotated(&self, kb: &KnowledgeBase<T>) -> String {
        self.render_with(kb, true)
    }

    fn render_with(&self, kb: &KnowledgeBase<T>, beliefs: bool) -> String {
        let mut out = String::new();
        render_inst(&mut out, kb, &self.start, beliefs);
        for link in &self.links {
            link.render_into(kb, &mut out);
        }
        render_inst(&mut out, kb, &self.end, beliefs);
        out
    }

    /// Parses the canonical syntax. Endpoints without `:belief` get belief 1.
    pub fn parse(kb: &KnowledgeBase<T>, text: &str) -> Result<Path<T>, PathError> {
        let forms = sexpr::read_all(text)?;
        if forms.len() < 3 {
            let pos = forms.last().map_or(Pos { line: 1, col: 1 }, Sexp::pos);
            return Err(PathError::At { pos, msg: "expected (inst ...), at least one link, (inst ...)".into() });
        }
        let start = parse_observation(kb, &forms[0]).map_err(at_pos)?;
        let end = parse_observation(kb, &forms[forms.len() - 1]).map_err(at_pos)?;
        let mut links = Vec::with_capacity(forms.len() - 2);
        let mut at = start.schema;
        for form in &forms[1..forms.len() - 1] {
            let link = parse_link(kb, form)?;
            if link.source() != at {
                return Err(PathError::At {
                    pos: form.pos(),
                    msg: format!("link leaves `{}` but the path is at `{}`", kb.name(link.source()), kb.name(at)),
                });
            }
            at = link.destination();
            links.push(link);
        }
        if at != end.schema {
            return Err(PathError::At {
                pos: forms[forms.len() - 1].pos(),
                msg: format!("path ends at `{}` but the final instance is a `{}`", kb.name(at), kb.name(end.schema)),
            });
        }
        Path::new(start, links, end)
    }
}

fn at_pos(e: SyntaxError) -> PathError {
    PathError::At { pos: e.pos, msg: e.msg }
}

fn render_inst<T: Real>(out: &mut String, kb: &KnowledgeBase<T>, obs: &Observation<T>, beliefs: bool) {
    if beliefs && obs.belief != T::one() {
        let _ = write!(out, "(inst {} {} :belief {})", obs.instance, kb.name(obs.schema), obs.belief);
    } else {
        let _ = write!(out, "(inst {} {})", obs.instance, kb.name(obs.schema));
    }
}

/// `(inst ID SCHEMA [:belief FLOAT])`
pub(crate) fn parse_observation<T: Real>(kb: &KnowledgeBase<T>, form: &Sexp) -> Result<Observation<T>, SyntaxError> {
    let pos = form.pos();
    let (head, args) = form.as_form()?;
    if head != "inst" {
        return Err(SyntaxError::new(pos, format!("expected (inst ...), found ({head} ...)")));
    }
    let id = args.first().and_then(Sexp::as_atom).ok_or_else(|| SyntaxError::new(pos, "missing instance id"))?;
    let schema_name =
        args.get(1).and_then(Sexp::as_atom).ok_or_else(|| SyntaxError::new(pos, "missing schema name"))?;
    let schema = kb
        .id(schema_name)
        .map_err(|_| SyntaxError::new(args[1].pos(), format!("unknown schema `{schema_name}`")))?;
    let belief = match &args[2..] {
        [] => T::one(),
        [key, value] if key.as_atom() == Some(":belief") => {
            let raw = value.as_atom().ok_or_else(|| SyntaxError::new(value.pos(), "expected a number"))?;
            let b: T = raw
                .parse()
                .map_err(|_| SyntaxError::new(value.pos(), format!("`{raw}` is not a decimal number")))?;
            if !(b > T::zero() && b <= T::one()) {
                return Err(SyntaxError::new(value.pos(), format!("belief {raw} is outside (0, 1]")));
            }
            b
        }
        [extra, ..] => return Err(SyntaxError::new(extra.pos(), "expected `:belief FLOAT` or `)`")),
    };
    Ok(Observation::new(id, schema, belief))
}

fn parse_link<T: Real>(kb: &KnowledgeBase<T>, form: &Sexp) -> Result<TraversalLink, PathError> {
    let pos = form.pos();
    let (head, args) = form.as_form()?;
    let names: Vec<&str> = args
        .iter()
        .map(|a| a.as_atom().ok_or_else(|| PathError::At { pos: a.pos(), msg: "expected a name".into() }))
        .collect::<Result<_, _>>()?;
    let schema = |i: usize| {
        kb.id(names[i]).map_err(|_| PathError::At { pos: args[i].pos(), msg: format!("unknown schema `{}`", names[i]) })
    };
    let link = match (head, names.len()) {
        ("role" | "role-", 3) => {
            let filled = schema(0)?;
            let filler = schema(2)?;
            let slot = kb
                .slot(names[1])
                .map_err(|_| PathError::At { pos: args[1].pos(), msg: format!("unknown slot `{}`", names[1]) })?;
            if head == "role" {
                TraversalLink::RoleUp { filled, slot, filler }
            } else {
                TraversalLink::RoleDown { filled, slot, filler }
            }
        }
        ("isa" | "isa-", 2) => {
            let specific = schema(0)?;
            let general = schema(1)?;
            if head == "isa" {
                TraversalLink::IsaUp { specific, general }
            } else {
                TraversalLink::IsaDown { specific, general }
            }
        }
        ("role" | "role-" | "isa" | "isa-", n) => {
            return Err(PathError::At { pos, msg: format!("({head} ...) with {n} arguments") })
        }
        (other, _) => return Err(PathError::At { pos, msg: format!("unexpected form `{other}` inside a path") }),
    };
    if !kb.has_link(&link) {
        return Err(PathError::At { pos, msg: "link is not in the knowledge base".into() });
    }
    Ok(link)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{worked_path, fixture_kb, WORKED_TEXT};
    use std::collections::BTreeSet;

    #[test]
    fn isa_plateau_rejected() {
        let s = ValidityState::INITIAL.step(LinkKind::IsaUp).unwrap();
        assert_eq!(s.step(LinkKind::IsaDown), Err(Rejection::IsaPlateau));
    }

    #[test]
    fn slot_filler_valley_rejected_through_isa_moves() {
        let s = ValidityState::run([LinkKind::RoleDown, LinkKind::IsaUp, LinkKind::IsaUp]).unwrap();
        assert_eq!(s.step(LinkKind::RoleUp), Err(Rejection::SlotFillerValley));
        assert!(ValidityState::run([LinkKind::RoleDown, LinkKind::RoleUp]).is_err());
    }

    #[test]
    fn up_isa_down_accepted_at_every_step() {
        let mut s = ValidityState::INITIAL;
        for k in [LinkKind::RoleUp, LinkKind::IsaUp, LinkKind::RoleDown] {
            s = s.step(k).unwrap();
        }
        assert!(s.is_accepting());
    }

    #[test]
    fn exactly_six_reachable_states() {
        let mut seen = BTreeSet::from([ValidityState::INITIAL]);
        let mut frontier = vec![ValidityState::INITIAL];
        while let Some(s) = frontier.pop() {
            for k in LinkKind::ALL {
                if let Ok(n) = s.step(k) {
                    if seen.insert(n) {
                        frontier.push(n);
                    }
                }
            }
        }
        assert_eq!(seen.len(), 6);
    }

    fn all_kind_sequences(max_len: usize) -> Vec<Vec<LinkKind>> {
        let mut out = vec![vec![]];
        let mut layer = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for seq in &layer {
                for k in LinkKind::ALL {
                    let mut s: Vec<LinkKind> = seq.clone();
                    s.push(k);
                    next.push(s);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn automaton_matches_declarative_grammar_on_kind_sequences() {
        for seq in all_kind_sequences(6) {
            let dfa = ValidityState::run(seq.iter().copied()).is_ok_and(ValidityState::is_accepting);
            assert_eq!(dfa, grammar_holds(&seq), "{seq:?}");
            assert_eq!(ValidityState::run(seq.iter().copied()).is_ok(), grammar_prefix_ok(&seq), "{seq:?}");
        }
    }

    #[test]
    fn rejection_is_prefix_closed() {
        for seq in all_kind_sequences(5) {
            if ValidityState::run(seq.iter().copied()).is_err() {
                for k in LinkKind::ALL {
                    let mut ext = seq.clone();
                    ext.push(k);
                    assert!(ValidityState::run(ext).is_err());
                }
            }
        }
    }

    #[test]
    fn joins_agrees_with_gluing() {
        for left in all_kind_sequences(4) {
            let Ok(ls) = ValidityState::run(left.iter().copied()) else { continue };
            for right in all_kind_sequences(4) {
                let Ok(rs) = ValidityState::run(right.iter().copied()) else { continue };
                let glued: Vec<LinkKind> =
                    left.iter().copied().chain(right.iter().rev().map(|k| k.reversed())).collect();
                assert_eq!(ls.joins(rs), grammar_holds(&glued), "{left:?} + rev {right:?}");
            }
        }
    }

    #[test]
    fn worked_path_is_valid_and_renders_canonically() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 0.9, 0.9);
        assert!(p.validate());
        assert_eq!(p.render(&kb), WORKED_TEXT);
        let parsed = Path::parse(&kb, WORKED_TEXT).unwrap();
        assert_eq!(parsed.links(), p.links());
        assert_eq!(parsed.start().belief, 1.0);
    }

    #[test]
    fn worked_path_reverse() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 0.9, 0.9);
        let r = p.reverse();
        assert_eq!(
            r.render(&kb),
            "(inst go1 go)(role shopping go-step go)(isa- supermarket-shopping shopping)\
             (role- supermarket-shopping store-of supermarket)(inst supermarket2 supermarket)"
        );
        assert!(r.validate());
        assert_eq!(r.reverse(), p);
    }

    #[test]
    fn isa_only_path_is_invalid() {
        let kb = fixture_kb();
        let p = Path::parse(&kb, "(inst s1 supermarket)(isa supermarket store-)(inst s2 store-)").unwrap();
        assert!(!p.validate());
    }

    #[test]
    fn single_role_up_reverses_to_role_down() {
        let kb = fixture_kb();
        let p = Path::parse(&kb, "(inst s1 supermarket)(role supermarket-shopping store-of supermarket)(inst x supermarket-shopping)")
            .unwrap();
        let r = p.reverse();
        assert_eq!(r.kinds().collect::<Vec<_>>(), vec![LinkKind::RoleDown]);
    }

    #[test]
    fn chaining_violation_is_distinct_from_invalidity() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 1.0, 1.0);
        let mut links = p.links().to_vec();
        links.swap(0, 1);
        assert_eq!(Path::new(p.start().clone(), links, p.end().clone()), Err(PathError::Chain { index: 0 }));
        assert_eq!(Path::<f64>::new(p.start().clone(), vec![], p.end().clone()), Err(PathError::Empty));
    }

    #[test]
    fn malformed_text_reports_position() {
        let kb = fixture_kb();
        let err = Path::parse(&kb, "(inst s1 supermarket)\n(role supermarket-shopping nope supermarket)(inst x supermarket-shopping)")
            .unwrap_err();
        match err {
            PathError::At { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 28 }),
            other => panic!("{other}"),
        }
        let err = Path::parse(&kb, "(inst s1 supermarket)(isa supermarket store-)(inst s2 go)").unwrap_err();
        assert!(matches!(err, PathError::At { pos: Pos { line: 1, col: 46 }, .. }), "{err}");
        assert!(matches!(Path::parse(&kb, "(inst s1 supermarket"), Err(PathError::Syntax(_))));
    }

    #[test]
    fn annotated_render_round_trips_beliefs() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 0.9, 0.25);
        assert_eq!(Path::parse(&kb, &p.render_annotated(&kb)).unwrap(), p);
    }
}
