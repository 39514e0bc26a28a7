//! Statements asserted by a path: instance typings and slot bindings, and the
//! relevant subset that keeps each instance only at its most specific type.

use std::fmt::Write as _;

use thiserror::Error;

use crate::kb::{InstanceId, KbError, KnowledgeBase, SchemaId, SlotId};
use crate::num::Real;
use crate::path::{Path, TraversalLink};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statement {
    /// `(inst instance schema)`
    Inst { instance: InstanceId, schema: SchemaId },
    /// `(= (slot owner) filler)`
    SlotEq { owner: InstanceId, slot: SlotId, filler: InstanceId },
}

impl Statement {
    pub fn render<T: Real>(&self, kb: &KnowledgeBase<T>) -> String {
        match self {
            Statement::Inst { instance, schema } => format!("(inst {instance} {})", kb.name(*schema)),
            Statement::SlotEq { owner, slot, filler } => format!("(= ({} {owner}) {filler})", kb.slot_name(*slot)),
        }
    }
}

/// Statements in path order, without duplicates, plus the instances the
/// translation had to invent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StatementSet {
    items: Vec<Statement>,
    fresh: Vec<InstanceId>,
}

impl StatementSet {
    fn push(&mut self, s: Statement) {
        if !self.items.contains(&s) {
            self.items.push(s);
        }
    }

    pub fn statements(&self) -> &[Statement] {
        &self.items
    }

    pub fn insts(&self) -> impl Iterator<Item = (&InstanceId, SchemaId)> {
        self.items.iter().filter_map(|s| match s {
            Statement::Inst { instance, schema } => Some((instance, *schema)),
            _ => None,
        })
    }

    pub fn eqs(&self) -> impl Iterator<Item = (&InstanceId, SlotId, &InstanceId)> {
        self.items.iter().filter_map(|s| match s {
            Statement::SlotEq { owner, slot, filler } => Some((owner, *slot, filler)),
            _ => None,
        })
    }

    pub fn fresh(&self) -> &[InstanceId] {
        &self.fresh
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, s: &Statement) -> bool {
        self.items.contains(s)
    }

    /// Distinct instances in order of first mention.
    pub fn instances(&self) -> Vec<&InstanceId> {
        let mut out: Vec<&InstanceId> = Vec::new();
        for s in &self.items {
            let mentioned: [&InstanceId; 2] = match s {
                Statement::Inst { instance, .. } => [instance, instance],
                Statement::SlotEq { owner, filler, .. } => [owner, filler],
            };
            for i in mentioned {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }

    pub fn types_of(&self, instance: &InstanceId) -> Vec<SchemaId> {
        self.insts().filter(|(i, _)| *i == instance).map(|(_, t)| t).collect()
    }

    pub fn render<T: Real>(&self, kb: &KnowledgeBase<T>) -> String {
        let mut out = String::new();
        for s in &self.items {
            let _ = write!(out, "{}", s.render(kb));
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("instance `{0}` has no type")]
    Untyped(InstanceId),
    #[error("types of instance `{0}` do not lie on one isa chain")]
    NotOnOneChain(InstanceId),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Default fresh-instance naming: `gen-<k>` for the k-th role link.
pub fn default_fresh(k: usize) -> InstanceId {
    InstanceId::new(format!("gen-{k}"))
}

/// Relevant instance at each position of the path (`len() + 1` entries).
///
/// Isa links carry the instance forward. Each role link introduces a new
/// instance, except the last role link, whose instance is the end observation
/// (carried across any trailing isa links).
pub fn relevant_instance_trace<T: Real>(path: &Path<T>, mut fresh: impl FnMut(usize) -> InstanceId) -> Vec<InstanceId> {
    let roles = path.role_count();
    let mut trace = Vec::with_capacity(path.len() + 1);
    let mut cur = path.start().instance.clone();
    trace.push(cur.clone());
    let mut ordinal = 0;
    for link in path.links() {
        if link.kind().is_role() {
            ordinal += 1;
            cur = if ordinal == roles { path.end().instance.clone() } else { fresh(ordinal) };
        }
        trace.push(cur.clone());
    }
    trace
}

/// All statements asserted by `path`, inventing instances with `gen-<k>`.
pub fn statements_of<T: Real>(path: &Path<T>) -> StatementSet {
    statements_with(path, default_fresh)
}

/// All statements asserted by `path`, naming invented instances with `fresh`
/// (called with the 1-based ordinal of the creating role link).
pub fn statements_with<T: Real>(path: &Path<T>, fresh: impl FnMut(usize) -> InstanceId) -> StatementSet {
    let trace = relevant_instance_trace(path, fresh);
    let mut set = StatementSet::default();
    set.push(Statement::Inst { instance: trace[0].clone(), schema: path.start().schema });
    for (j, link) in path.links().iter().enumerate() {
        let (here, next) = (&trace[j], &trace[j + 1]);
        match *link {
            TraversalLink::IsaUp { .. } | TraversalLink::IsaDown { .. } => {}
            TraversalLink::RoleUp { slot, .. } => {
                set.push(Statement::SlotEq { owner: next.clone(), slot, filler: here.clone() });
            }
            TraversalLink::RoleDown { slot, .. } => {
                set.push(Statement::SlotEq { owner: here.clone(), slot, filler: next.clone() });
            }
        }
        set.push(Statement::Inst { instance: next.clone(), schema: link.destination() });
        if link.kind().is_role() && next != &path.end().instance && !set.fresh.contains(next) {
            set.fresh.push(next.clone());
        }
    }
    set.push(Statement::Inst { instance: path.end().instance.clone(), schema: path.end().schema });
    set
}

/// Most specific type the set gives `instance`.
pub fn relevant_type<T: Real>(
    instance: &InstanceId,
    set: &StatementSet,
    kb: &KnowledgeBase<T>,
) -> Result<SchemaId, SemanticsError> {
    let types = set.types_of(instance);
    for &t in &types {
        let mut all = true;
        for &other in &types {
            if !kb.is_a(t, other)? {
                all = false;
                break;
            }
        }
        if all {
            return Ok(t);
        }
    }
    if types.is_empty() {
        Err(SemanticsError::Untyped(instance.clone()))
    } else {
        Err(SemanticsError::NotOnOneChain(instance.clone()))
    }
}

/// Drops every instance typing other than the one at the relevant type.
pub fn relevant_subset<T: Real>(set: &StatementSet, kb: &KnowledgeBase<T>) -> Result<StatementSet, SemanticsError> {
    let mut keep = Vec::new();
    for i in set.instances() {
        keep.push((i.clone(), relevant_type(i, set, kb)?));
    }
    let items = set
        .items
        .iter()
        .filter(|s| match s {
            Statement::Inst { instance, schema } => keep.iter().any(|(i, t)| i == instance && t == schema),
            Statement::SlotEq { .. } => true,
        })
        .cloned()
        .collect();
    Ok(StatementSet { items, fresh: set.fresh.clone() })
}

/// Relevant statements of `path` with default fresh naming.
pub fn relevant_statements<T: Real>(path: &Path<T>, kb: &KnowledgeBase<T>) -> Result<StatementSet, SemanticsError> {
    relevant_subset(&statements_of(path), kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{worked_path, fixture_kb};

    fn inst(kb: &KnowledgeBase<f64>, i: &str, s: &str) -> Statement {
        Statement::Inst { instance: InstanceId::new(i), schema: kb.id(s).unwrap() }
    }

    fn eq(kb: &KnowledgeBase<f64>, owner: &str, slot: &str, filler: &str) -> Statement {
        Statement::SlotEq { owner: InstanceId::new(owner), slot: kb.slot(slot).unwrap(), filler: InstanceId::new(filler) }
    }

    #[test]
    fn worked_path_trace() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 0.9, 0.9);
        let trace: Vec<String> =
            relevant_instance_trace(&p, |_| InstanceId::new("shopping3")).iter().map(|i| i.to_string()).collect();
        assert_eq!(trace, ["supermarket2", "shopping3", "shopping3", "go1"]);
    }

    #[test]
    fn worked_path_statements() {
        let kb = fixture_kb();
        let p = worked_path(&kb, 0.9, 0.9);
        let s = statements_with(&p, |_| InstanceId::new("shopping3"));
        let expected = vec![
            inst(&kb, "supermarket2", "supermarket"),
            eq(&kb, "shopping3", "store-of", "supermarket2"),
            inst(&kb, "shopping3", "supermarket-shopping"),
            inst(&kb, "shopping3", "shopping"),
            eq(&kb, "shopping3", "go-step", "go1"),
            inst(&kb, "go1", "go"),
        ];
        assert_eq!(s.statements(), expected.as_slice());
        assert_eq!(s.fresh(), [InstanceId::new("shopping3")]);

        let rs = relevant_subset(&s, &kb).unwrap();
        let mut expected_rs = expected.clone();
        expected_rs.remove(3);
        assert_eq!(rs.statements(), expected_rs.as_slice());
    }

    #[test]
    fn default_fresh_names() {
        let kb = fixture_kb();
        let s = statements_of(&worked_path(&kb, 1.0, 1.0));
        assert_eq!(
            s.render(&kb),
            "(inst supermarket2 supermarket)(= (store-of gen-1) supermarket2)(inst gen-1 supermarket-shopping)\
             (inst gen-1 shopping)(= (go-step gen-1) go1)(inst go1 go)"
        );
    }

    #[test]
    fn single_role_path_has_three_statements_and_no_fresh_instance() {
        let kb = fixture_kb();
        let p = Path::parse(
            &kb,
            "(inst s1 supermarket)(role supermarket-shopping store-of supermarket)(inst x supermarket-shopping)",
        )
        .unwrap();
        let s = statements_of(&p);
        assert_eq!(s.len(), 3);
        assert_eq!(s.insts().count(), 2);
        assert_eq!(s.eqs().count(), 1);
        assert!(s.fresh().is_empty());
        assert_eq!(relevant_statements(&p, &kb).unwrap(), s);
    }

    #[test]
    fn relevant_type_picks_deepest() {
        let kb = crate::kb::load_kb::<f64>(
            "(eq-prior 0.001)(schema a :prior 0.5)(schema b :isa a :prior 0.2)(schema c :isa b :prior 0.1)\
             (schema p :prior 0.1)(role p x a)",
        )
        .unwrap();
        let p = Path::parse(&kb, "(inst p1 p)(role- p x a)(isa- b a)(isa- c b)(inst c1 c)").unwrap();
        let s = statements_of(&p);
        let c1 = InstanceId::new("c1");
        assert_eq!(s.types_of(&c1).len(), 3);
        assert_eq!(relevant_type(&c1, &s, &kb).unwrap(), kb.id("c").unwrap());
        assert_eq!(relevant_type(&InstanceId::new("p1"), &s, &kb).unwrap(), kb.id("p").unwrap());
    }

    #[test]
    fn relevant_type_errors() {
        let kb = fixture_kb();
        let mut s = StatementSet::default();
        let i = InstanceId::new("i");
        assert!(matches!(relevant_type(&i, &s, &kb), Err(SemanticsError::Untyped(_))));
        s.push(inst(&kb, "i", "go"));
        s.push(inst(&kb, "i", "shopping"));
        assert!(matches!(relevant_type(&i, &s, &kb), Err(SemanticsError::NotOnOneChain(_))));
    }
}
