//! The vertebrate network a path induces, its default conditional tables,
//! exact evaluation by enumeration, the evidence filter and the approval test.
//!
//! All variables are binary. Instance nodes are marginally independent with
//! `P(true) = p(relevant type)`. An equality node is true with probability
//! `p(==) / p(declared filler type)` when both its instances hold and never
//! otherwise. Each end observation is virtual evidence on its instance node:
//! the observation says "this instance is an `s`" with belief `b`, so the node
//! (typed at `r`, a subset of `s`) gets
//!
//! ```text
//! P(e | true)  = beta * b / p(s)
//! P(e | false) = beta * (1 - b p(r)/p(s)) / (1 - p(r))
//! ```
//!
//! which makes `P(e) = beta` and `P(node | e) = b p(r)/p(s)`. The interior node
//! is true with probability `gamma1` when every equality holds and `gamma0`
//! otherwise.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::kb::{InstanceId, KbError, KnowledgeBase, SchemaId, SlotId};
use crate::num::Real;
use crate::path::{Path, TraversalLink};
use crate::semantics::{Statement, StatementSet};

/// Largest number of instance plus equality nodes evaluated by enumeration.
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error("statement set does not match the path: {0}")]
    Mismatch(String),
    #[error("p(==) = {eq_prior} exceeds p({filler}) = {filler_prior}")]
    EqPriorTooLarge { eq_prior: f64, filler: String, filler_prior: f64 },
    #[error("interior strengths must lie in (0, 1], got gamma1 = {0}, gamma0 = {1}")]
    Gamma(f64, f64),
    #[error("evidence for `{0}` cannot be scaled into a probability table")]
    Evidence(InstanceId),
    #[error("network has {0} non-evidence nodes; enumeration is limited to {ENUMERATION_LIMIT}")]
    TooLarge(usize),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstNode<T> {
    pub instance: InstanceId,
    pub schema: SchemaId,
    pub prior: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqNode<T> {
    /// Instance node owning the slot.
    pub owner: usize,
    pub slot: SlotId,
    /// Instance node filling the slot.
    pub filler: usize,
    pub filler_type: SchemaId,
    pub filler_prior: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceNode<T> {
    /// Instance node the evidence bears on.
    pub of: usize,
    /// Schema named by the observation.
    pub schema: SchemaId,
    pub schema_prior: T,
    pub belief: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRef {
    Inst(usize),
    Eq(usize),
    Evidence(usize),
    Interior,
}

/// Spine (instance, equality and end-evidence nodes) plus the interior
/// evidence node fed by every equality node.
#[derive(Debug, Clone, PartialEq)]
pub struct VertebrateNetwork<T> {
    pub inst_nodes: Vec<InstNode<T>>,
    pub eq_nodes: Vec<EqNode<T>>,
    pub end_evidence: [EvidenceNode<T>; 2],
    pub eq_prior: T,
}

impl<T: Real> VertebrateNetwork<T> {
    /// Instance and equality nodes.
    pub fn hidden_len(&self) -> usize {
        self.inst_nodes.len() + self.eq_nodes.len()
    }

    /// Spine edges in construction order, then the interior's.
    ///
    /// The base spine links each of the first two instances to its evidence
    /// and both to the first equality. Each further instance is spliced in
    /// between the previous last instance and the end evidence, with its own
    /// equality node.
    pub fn edges(&self) -> Vec<(NodeRef, NodeRef)> {
        let n = self.inst_nodes.len();
        let mut out = Vec::new();
        out.push((NodeRef::Inst(self.end_evidence[0].of), NodeRef::Evidence(0)));
        for j in 1..n {
            if j >= 2 {
                out.push((NodeRef::Inst(j - 1), NodeRef::Inst(j)));
            }
            let eq = &self.eq_nodes[j - 1];
            let (a, b) = (eq.owner.min(eq.filler), eq.owner.max(eq.filler));
            out.push((NodeRef::Inst(a), NodeRef::Eq(j - 1)));
            out.push((NodeRef::Inst(b), NodeRef::Eq(j - 1)));
        }
        out.push((NodeRef::Inst(self.end_evidence[1].of), NodeRef::Evidence(1)));
        for k in 0..self.eq_nodes.len() {
            out.push((NodeRef::Eq(k), NodeRef::Interior));
        }
        out
    }

    /// Instance nodes not tied to an observation: the plans the path posits.
    pub fn unobserved(&self) -> impl Iterator<Item = &InstNode<T>> + '_ {
        let observed = [self.end_evidence[0].of, self.end_evidence[1].of];
        self.inst_nodes.iter().enumerate().filter(move |(i, _)| !observed.contains(i)).map(|(_, n)| n)
    }

    /// Product of the priors of the unobserved instance nodes (1 if none).
    pub fn plan_prior(&self) -> T {
        self.unobserved().fold(T::one(), |acc, n| acc * n.prior)
    }

    fn node_name(&self, node: NodeRef) -> String {
        match node {
            NodeRef::Inst(i) => self.inst_nodes[i].instance.to_string(),
            NodeRef::Eq(k) => format!("={}", k + 1),
            NodeRef::Evidence(e) => format!("e:{}", self.inst_nodes[self.end_evidence[e].of].instance),
            NodeRef::Interior => "E^I".to_string(),
        }
    }

    /// One `node` line per node, then one `edge` line per edge.
    pub fn dump(&self, kb: &KnowledgeBase<T>, cpts: &Cpts<T>) -> String {
        let mut out = String::new();
        for (i, n) in self.inst_nodes.iter().enumerate() {
            let _ = writeln!(out, "node {} kind=inst type={} prior={}", self.node_name(NodeRef::Inst(i)), kb.name(n.schema), n.prior);
        }
        for k in 0..self.eq_nodes.len() {
            let _ = writeln!(out, "node {} kind=eq type=- prior={}", self.node_name(NodeRef::Eq(k)), cpts.eq[k]);
        }
        for (e, ev) in self.end_evidence.iter().enumerate() {
            let _ =
                writeln!(out, "node {} kind=ev type={} prior={}", self.node_name(NodeRef::Evidence(e)), kb.name(ev.schema), ev.belief);
        }
        let _ = writeln!(out, "node E^I kind=interior type=- prior={}", cpts.gamma1);
        for (a, b) in self.edges() {
            let _ = writeln!(out, "edge {} {}", self.node_name(a), self.node_name(b));
        }
        out
    }
}

/// Builds the network for `path` from its relevant statements `rs`.
pub fn build_network<T: Real>(
    kb: &KnowledgeBase<T>,
    path: &Path<T>,
    rs: &StatementSet,
) -> Result<VertebrateNetwork<T>, BayesError> {
    let mut inst_nodes: Vec<InstNode<T>> = Vec::new();
    for (instance, schema) in rs.insts() {
        if inst_nodes.iter().any(|n| &n.instance == instance) {
            return Err(BayesError::Mismatch(format!("instance `{instance}` typed twice")));
        }
        inst_nodes.push(InstNode { instance: instance.clone(), schema, prior: kb.prior(schema)? });
    }
    let node_of = |i: &InstanceId| {
        inst_nodes
            .iter()
            .position(|n| &n.instance == i)
            .ok_or_else(|| BayesError::Mismatch(format!("instance `{i}` has no inst statement")))
    };
    let roles: Vec<&TraversalLink> = path.links().iter().filter(|l| l.kind().is_role()).collect();
    let eqs: Vec<_> = rs.eqs().collect();
    if eqs.len() != roles.len() || inst_nodes.len() != roles.len() + 1 {
        return Err(BayesError::Mismatch(format!(
            "{} roles but {} equalities and {} instances",
            roles.len(),
            eqs.len(),
            inst_nodes.len()
        )));
    }
    let mut eq_nodes = Vec::with_capacity(eqs.len());
    for ((owner, slot, filler), link) in eqs.into_iter().zip(roles) {
        let filler_type = match *link {
            TraversalLink::RoleUp { filler, slot: s, .. } | TraversalLink::RoleDown { filler, slot: s, .. } if s == slot => filler,
            _ => return Err(BayesError::Mismatch("equality does not follow the path's role order".into())),
        };
        eq_nodes.push(EqNode {
            owner: node_of(owner)?,
            slot,
            filler: node_of(filler)?,
            filler_type,
            filler_prior: kb.prior(filler_type)?,
        });
    }
    let evidence = |obs: &crate::kb::Observation<T>| -> Result<EvidenceNode<T>, BayesError> {
        Ok(EvidenceNode { of: node_of(&obs.instance)?, schema: obs.schema, schema_prior: kb.prior(obs.schema)?, belief: obs.belief })
    };
    let end_evidence = [evidence(path.start())?, evidence(path.end())?];
    Ok(VertebrateNetwork { inst_nodes, eq_nodes, end_evidence, eq_prior: kb.eq_prior() })
}

/// Conditional tables over the binary variables of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpts<T> {
    /// `P(inst node true)`.
    pub inst: Vec<T>,
    /// `P(eq node true | both instances true)`; zero otherwise.
    pub eq: Vec<T>,
    /// `(P(e | node true), P(e | node false))` per end observation.
    pub evidence: [(T, T); 2],
    pub gamma1: T,
    pub gamma0: T,
}

pub fn default_cpts<T: Real>(net: &VertebrateNetwork<T>, gamma1: T, gamma0: T) -> Result<Cpts<T>, BayesError> {
    let unit = |g: T| g > T::zero() && g <= T::one();
    if !unit(gamma1) || !unit(gamma0) {
        return Err(BayesError::Gamma(gamma1.as_f64(), gamma0.as_f64()));
    }
    let inst = net.inst_nodes.iter().map(|n| n.prior).collect();
    let mut eq = Vec::with_capacity(net.eq_nodes.len());
    for e in &net.eq_nodes {
        if net.eq_prior > e.filler_prior {
            return Err(BayesError::EqPriorTooLarge {
                eq_prior: net.eq_prior.as_f64(),
                filler: format!("#{}", e.filler_type.index()),
                filler_prior: e.filler_prior.as_f64(),
            });
        }
        eq.push(net.eq_prior / e.filler_prior);
    }
    let mut evidence = [(T::zero(), T::zero()); 2];
    for (slot, ev) in evidence.iter_mut().zip(&net.end_evidence) {
        let rho = net.inst_nodes[ev.of].prior;
        let on = ev.belief / ev.schema_prior;
        let off = if rho < T::one() { (T::one() - ev.belief * rho / ev.schema_prior) / (T::one() - rho) } else { T::zero() };
        let top = on.max(off);
        if !(top.is_finite() && top > T::zero() && off >= T::zero()) {
            return Err(BayesError::Evidence(net.inst_nodes[ev.of].instance.clone()));
        }
        *slot = (on / top, off / top);
    }
    Ok(Cpts { inst, eq, evidence, gamma1, gamma0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior<T> {
    /// `P(every instance and equality node true | both end observations, E^I)`.
    pub joint: T,
    /// `p(==)^k P(E^I | all equalities) / P(E^I | both end observations)`.
    pub residual: T,
    /// `P(E^I | both end observations)`.
    pub interior: T,
}

/// Exact evaluation by summing over every assignment of the hidden nodes.
pub fn exact_posterior<T: Real>(net: &VertebrateNetwork<T>, cpts: &Cpts<T>) -> Result<Posterior<T>, BayesError> {
    let ni = net.inst_nodes.len();
    let ne = net.eq_nodes.len();
    let n = ni + ne;
    if n > ENUMERATION_LIMIT {
        return Err(BayesError::TooLarge(n));
    }
    let all = (1u32 << n) - 1;
    let eq_all = all & !((1u32 << ni) - 1);
    let (mut z_e, mut z, mut top) = (T::zero(), T::zero(), T::zero());
    'assign: for mask in 0..=all {
        let bit = |i: usize| mask >> i & 1 == 1;
        let mut w = T::one();
        for (i, &p) in cpts.inst.iter().enumerate() {
            w = w * if bit(i) { p } else { T::one() - p };
        }
        for (k, e) in net.eq_nodes.iter().enumerate() {
            let parents = bit(e.owner) && bit(e.filler);
            w = w * match (bit(ni + k), parents) {
                (true, true) => cpts.eq[k],
                (false, true) => T::one() - cpts.eq[k],
                (true, false) => continue 'assign,
                (false, false) => T::one(),
            };
        }
        for (ev, &(on, off)) in net.end_evidence.iter().zip(&cpts.evidence) {
            w = w * if bit(ev.of) { on } else { off };
        }
        let interior = if mask & eq_all == eq_all { cpts.gamma1 } else { cpts.gamma0 };
        z_e = z_e + w;
        z = z + w * interior;
        if mask == all {
            top = w * interior;
        }
    }
    let interior = z / z_e;
    let residual = net.eq_prior.powi(ne as i32) * cpts.gamma1 / interior;
    Ok(Posterior { joint: top / z, residual, interior })
}

/// Corroborating (schema, slot) records gathered from the input, and the
/// instances that were observed directly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceRegistry {
    records: BTreeSet<(SchemaId, SlotId)>,
    observed: BTreeSet<InstanceId>,
}

impl EvidenceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn corroborate(&mut self, schema: SchemaId, slot: SlotId) {
        self.records.insert((schema, slot));
    }

    pub fn observe(&mut self, instance: InstanceId) {
        self.observed.insert(instance);
    }

    pub fn records(&self) -> impl Iterator<Item = (SchemaId, SlotId)> + '_ {
        self.records.iter().copied()
    }

    pub fn is_observed(&self, instance: &InstanceId) -> bool {
        self.observed.contains(instance)
    }
}

/// True iff every statement of `rs` has support: an instance is observed or
/// some record names its type or an ancestor; a slot binding has a record
/// for that slot on the owner's type or an ancestor.
pub fn evidence_filter<T: Real>(kb: &KnowledgeBase<T>, rs: &StatementSet, registry: &EvidenceRegistry) -> Result<bool, KbError> {
    let covers = |t: SchemaId, slot: Option<SlotId>| -> Result<bool, KbError> {
        for (s, sl) in registry.records() {
            if slot.is_none_or(|x| x == sl) && kb.is_a(t, s)? {
                return Ok(true);
            }
        }
        Ok(false)
    };
    for s in rs.statements() {
        let ok = match s {
            Statement::Inst { instance, schema } => registry.is_observed(instance) || covers(*schema, None)?,
            Statement::SlotEq { owner, slot, .. } => match rs.insts().find(|(i, _)| *i == owner) {
                Some((_, t)) => covers(t, Some(*slot))?,
                None => false,
            },
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `posterior >= ratio * plan_prior`, boundary inclusive.
pub fn approve<T: Real>(net: &VertebrateNetwork<T>, posterior: T, ratio: T) -> bool {
    posterior >= ratio * net.plan_prior()
}
