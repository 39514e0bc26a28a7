//! Schema knowledge base: an isa forest of schemas with priors, role (slot)
//! links between schemas, and the global slot-equality prior `p(==)`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::num::Real;
use crate::path::TraversalLink;
use crate::sexpr::{self, Pos, Sexp, SyntaxError};

/// Interned schema name. Only meaningful relative to the knowledge base that
/// issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId(pub(crate) u32);

impl SchemaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned slot name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotId(pub(crate) u32);

impl SlotId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a schema instance, observed (`go1`) or generated (`gen-1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceId(String);

impl InstanceId {
    pub fn new(name: impl Into<String>) -> Self {
        InstanceId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An observed instance together with the current belief `p(i|e)` that it is
/// of the given schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub instance: InstanceId,
    pub schema: SchemaId,
    pub belief: T,
}

impl<T: Real> Observation<T> {
    pub fn new(instance: impl Into<String>, schema: SchemaId, belief: T) -> Self {
        Observation { instance: InstanceId::new(instance), schema, belief }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema<T> {
    pub name: String,
    pub parent: Option<SchemaId>,
    pub prior: T,
    /// Slot name and declared filler type, in declaration order.
    pub slots: Vec<(SlotId, SchemaId)>,
}

/// `(role filled slot filler)`: anything filling `slot` of a `filled`
/// instance is a `filler`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoleLink {
    pub filled: SchemaId,
    pub slot: SlotId,
    pub filler: SchemaId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: {msg}")]
    Form { pos: Pos, msg: String },
    #[error("missing (eq-prior ...) form")]
    MissingEqPrior,
    #[error("{0}: more than one (eq-prior ...) form")]
    DuplicateEqPrior(Pos),
    #[error("eq-prior {0} must lie strictly between 0 and 1")]
    EqPriorRange(f64),
    #[error("invalid name `{0}`")]
    BadName(String),
    #[error("schema `{0}` defined twice")]
    DuplicateSchema(String),
    #[error("schema `{schema}` has unknown isa parent `{parent}`")]
    UnknownParent { schema: String, parent: String },
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("schema id {0} is not defined in this knowledge base")]
    UnknownId(u32),
    #[error("isa cycle through `{0}`")]
    IsaCycle(String),
    #[error("prior {prior} of `{schema}` is outside (0, 1]")]
    PriorRange { schema: String, prior: f64 },
    #[error("prior of `{child}` exceeds the prior of its isa parent `{parent}`")]
    ChildExceedsParent { child: String, parent: String },
    #[error("children of `{parent}` have total prior {sum}, exceeding its prior {prior}")]
    ChildrenExceedParent { parent: String, sum: f64, prior: f64 },
    #[error("schema `{schema}` declares slot `{slot}` twice")]
    DuplicateSlot { schema: String, slot: String },
}

/// Immutable after construction; share freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase<T> {
    schemas: Vec<Schema<T>>,
    by_name: HashMap<String, SchemaId>,
    slot_names: Vec<String>,
    slot_by_name: HashMap<String, SlotId>,
    roles: Vec<RoleLink>,
    children: Vec<Vec<SchemaId>>,
    adjacency: Vec<Vec<TraversalLink>>,
    eq_prior: T,
}

impl<T: Real> KnowledgeBase<T> {
    /// Parses and validates the textual knowledge-base format.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        load_kb(text)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SchemaId> + '_ {
        (0..self.schemas.len() as u32).map(SchemaId)
    }

    pub fn eq_prior(&self) -> T {
        self.eq_prior
    }

    pub fn roles(&self) -> &[RoleLink] {
        &self.roles
    }

    pub fn id(&self, name: &str) -> Result<SchemaId, KbError> {
        self.by_name.get(name).copied().ok_or_else(|| KbError::UnknownSchema(name.to_string()))
    }

    pub fn slot(&self, name: &str) -> Result<SlotId, KbError> {
        self.slot_by_name.get(name).copied().ok_or_else(|| KbError::UnknownSlot(name.to_string()))
    }

    pub fn schema(&self, id: SchemaId) -> Result<&Schema<T>, KbError> {
        self.schemas.get(id.index()).ok_or(KbError::UnknownId(id.0))
    }

    pub fn contains(&self, id: SchemaId) -> bool {
        id.index() < self.schemas.len()
    }

    /// Schema name; `"?"` for an id from another knowledge base.
    pub fn name(&self, id: SchemaId) -> &str {
        self.schemas.get(id.index()).map_or("?", |s| s.name.as_str())
    }

    pub fn slot_name(&self, slot: SlotId) -> &str {
        self.slot_names.get(slot.index()).map_or("?", String::as_str)
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    pub fn prior(&self, id: SchemaId) -> Result<T, KbError> {
        Ok(self.schema(id)?.prior)
    }

    pub fn parent(&self, id: SchemaId) -> Result<Option<SchemaId>, KbError> {
        Ok(self.schema(id)?.parent)
    }

    pub fn children(&self, id: SchemaId) -> Result<&[SchemaId], KbError> {
        self.schema(id)?;
        Ok(&self.children[id.index()])
    }

    /// True iff `general` is a proper isa ancestor of `specific`.
    pub fn isa_star(&self, specific: SchemaId, general: SchemaId) -> Result<bool, KbError> {
        self.schema(general)?;
        let mut cur = self.schema(specific)?.parent;
        while let Some(p) = cur {
            if p == general {
                return Ok(true);
            }
            cur = self.schemas[p.index()].parent;
        }
        Ok(false)
    }

    /// `a == b` or `isa_star(a, b)`.
    pub fn is_a(&self, a: SchemaId, b: SchemaId) -> Result<bool, KbError> {
        Ok(a == b || self.isa_star(a, b)?)
    }

    /// Declared filler type of `slot` on `filled`, looking only at the schema
    /// itself.
    pub fn filler_type(&self, filled: SchemaId, slot: SlotId) -> Option<SchemaId> {
        self.schemas
            .get(filled.index())?
            .slots
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, f)| *f)
    }

    /// Every single-link move out of `id`, sorted by destination name, then
    /// link kind, then slot name.
    pub fn neighbors(&self, id: SchemaId) -> Result<&[TraversalLink], KbError> {
        self.schema(id)?;
        Ok(&self.adjacency[id.index()])
    }

    /// Neighbour lookup for ids known to belong to this knowledge base.
    pub(crate) fn moves(&self, id: SchemaId) -> &[TraversalLink] {
        &self.adjacency[id.index()]
    }

    pub(crate) fn prior_of(&self, id: SchemaId) -> T {
        self.schemas[id.index()].prior
    }

    /// True iff `link` names an isa edge or role link present in this KB.
    pub fn has_link(&self, link: &TraversalLink) -> bool {
        match *link {
            TraversalLink::RoleUp { filled, slot, filler }
            | TraversalLink::RoleDown { filled, slot, filler } => {
                self.contains(filler) && self.filler_type(filled, slot) == Some(filler)
            }
            TraversalLink::IsaUp { specific, general } | TraversalLink::IsaDown { specific, general } => {
                self.contains(general)
                    && self.schemas.get(specific.index()).is_some_and(|s| s.parent == Some(general))
            }
        }
    }

    /// Canonical text form; `load_kb(kb.render())` reproduces `kb`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "(eq-prior {})", self.eq_prior);
        for s in &self.schemas {
            match s.parent {
                Some(p) => {
                    let _ = writeln!(out, "(schema {} :isa {} :prior {})", s.name, self.name(p), s.prior);
                }
                None => {
                    let _ = writeln!(out, "(schema {} :prior {})", s.name, s.prior);
                }
            }
        }
        for r in &self.roles {
            let _ = writeln!(
                out,
                "(role {} {} {})",
                self.name(r.filled),
                self.slot_name(r.slot),
                self.name(r.filler)
            );
        }
        out
    }
}

/// Incremental, validating constructor used by the text loader and by the
/// synthetic-corpus generator. Forward references are allowed; everything is
/// resolved in [`KbBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct KbBuilder<T> {
    schemas: Vec<(String, Option<String>, T)>,
    roles: Vec<(String, String, String)>,
    eq_prior: Option<T>,
}

impl<T: Real> KbBuilder<T> {
    pub fn new() -> Self {
        KbBuilder { schemas: Vec::new(), roles: Vec::new(), eq_prior: None }
    }

    pub fn eq_prior(&mut self, p: T) -> &mut Self {
        self.eq_prior = Some(p);
        self
    }

    pub fn schema(&mut self, name: &str, parent: Option<&str>, prior: T) -> &mut Self {
        self.schemas.push((name.to_string(), parent.map(str::to_string), prior));
        self
    }

    pub fn role(&mut self, filled: &str, slot: &str, filler: &str) -> &mut Self {
        self.roles.push((filled.to_string(), slot.to_string(), filler.to_string()));
        self
    }

    pub fn build(&self) -> Result<KnowledgeBase<T>, KbError> {
        let eq_prior = self.eq_prior.ok_or(KbError::MissingEqPrior)?;
        if !(eq_prior > T::zero() && eq_prior < T::one()) {
            return Err(KbError::EqPriorRange(eq_prior.as_f64()));
        }

        let mut by_name = HashMap::new();
        for (i, (name, _, prior)) in self.schemas.iter().enumerate() {
            if !sexpr::is_name(name) {
                return Err(KbError::BadName(name.clone()));
            }
            if by_name.insert(name.clone(), SchemaId(i as u32)).is_some() {
                return Err(KbError::DuplicateSchema(name.clone()));
            }
            if !(*prior > T::zero() && *prior <= T::one()) {
                return Err(KbError::PriorRange { schema: name.clone(), prior: prior.as_f64() });
            }
        }

        let mut schemas = Vec::with_capacity(self.schemas.len());
        for (name, parent, prior) in &self.schemas {
            let parent = match parent {
                Some(p) => Some(*by_name.get(p).ok_or_else(|| KbError::UnknownParent {
                    schema: name.clone(),
                    parent: p.clone(),
                })?),
                None => None,
            };
            schemas.push(Schema { name: name.clone(), parent, prior: *prior, slots: Vec::new() });
        }

        // Each schema has at most one parent, so a cycle shows up as a parent
        // chain longer than the number of schemas.
        for (i, s) in schemas.iter().enumerate() {
            let mut cur = s.parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if p.index() == i || steps > schemas.len() {
                    return Err(KbError::IsaCycle(s.name.clone()));
                }
                cur = schemas[p.index()].parent;
            }
        }

        let mut children = vec![Vec::new(); schemas.len()];
        for (i, s) in schemas.iter().enumerate() {
            if let Some(p) = s.parent {
                children[p.index()].push(SchemaId(i as u32));
                if s.prior > schemas[p.index()].prior {
                    return Err(KbError::ChildExceedsParent {
                        child: s.name.clone(),
                        parent: schemas[p.index()].name.clone(),
                    });
                }
            }
        }
        for (i, kids) in children.iter().enumerate() {
            if kids.len() < 2 {
                continue;
            }
            let sum = kids.iter().fold(T::zero(), |acc, k| acc + schemas[k.index()].prior);
            let prior = schemas[i].prior;
            // Rounding slack proportional to the number of terms summed.
            let slack = prior * T::epsilon() * T::lit(kids.len() as f64);
            if sum > prior + slack {
                return Err(KbError::ChildrenExceedParent {
                    parent: schemas[i].name.clone(),
                    sum: sum.as_f64(),
                    prior: prior.as_f64(),
                });
            }
        }

        let mut slot_names: Vec<String> = Vec::new();
        let mut slot_by_name: HashMap<String, SlotId> = HashMap::new();
        let mut roles = Vec::with_capacity(self.roles.len());
        for (filled, slot, filler) in &self.roles {
            let filled_id = *by_name.get(filled).ok_or_else(|| KbError::UnknownSchema(filled.clone()))?;
            let filler_id = *by_name.get(filler).ok_or_else(|| KbError::UnknownSchema(filler.clone()))?;
            if !sexpr::is_name(slot) {
                return Err(KbError::BadName(slot.clone()));
            }
            let slot_id = *slot_by_name.entry(slot.clone()).or_insert_with(|| {
                slot_names.push(slot.clone());
                SlotId(slot_names.len() as u32 - 1)
            });
            let owner = &mut schemas[filled_id.index()];
            if owner.slots.iter().any(|(s, _)| *s == slot_id) {
                return Err(KbError::DuplicateSlot { schema: filled.clone(), slot: slot.clone() });
            }
            owner.slots.push((slot_id, filler_id));
            roles.push(RoleLink { filled: filled_id, slot: slot_id, filler: filler_id });
        }

        let mut adjacency: Vec<Vec<TraversalLink>> = vec![Vec::new(); schemas.len()];
        for r in &roles {
            let (filled, slot, filler) = (r.filled, r.slot, r.filler);
            adjacency[filler.index()].push(TraversalLink::RoleUp { filled, slot, filler });
            adjacency[filled.index()].push(TraversalLink::RoleDown { filled, slot, filler });
        }
        for (i, s) in schemas.iter().enumerate() {
            if let Some(general) = s.parent {
                let specific = SchemaId(i as u32);
                adjacency[i].push(TraversalLink::IsaUp { specific, general });
                adjacency[general.index()].push(TraversalLink::IsaDown { specific, general });
            }
        }
        for moves in &mut adjacency {
            moves.sort_by(|a, b| {
                let key = |l: &TraversalLink| {
                    (
                        schemas[l.destination().index()].name.clone(),
                        l.kind(),
                        l.slot().map(|s| slot_names[s.index()].clone()),
                    )
                };
                key(a).cmp(&key(b))
            });
        }

        Ok(KnowledgeBase {
            schemas,
            by_name,
            slot_names,
            slot_by_name,
            roles,
            children,
            adjacency,
            eq_prior,
        })
    }
}

fn form_err(pos: Pos, msg: impl Into<String>) -> KbError {
    KbError::Form { pos, msg: msg.into() }
}

fn atom_arg<'a>(args: &'a [Sexp], i: usize, at: Pos, what: &str) -> Result<&'a str, KbError> {
    match args.get(i) {
        Some(Sexp::Atom(a, _)) => Ok(a),
        Some(other) => Err(form_err(other.pos(), format!("expected {what}"))),
        None => Err(form_err(at, format!("missing {what}"))),
    }
}

fn name_arg<'a>(args: &'a [Sexp], i: usize, at: Pos, what: &str) -> Result<&'a str, KbError> {
    let a = atom_arg(args, i, at, what)?;
    if !sexpr::is_name(a) {
        return Err(form_err(args[i].pos(), format!("`{a}` is not a valid {what}")));
    }
    Ok(a)
}

/// Loads the textual knowledge-base format:
///
/// ```text
/// (eq-prior 0.001)
/// (schema supermarket :isa store- :prior 0.01)
/// (role supermarket-shopping store-of supermarket)
/// ```
pub fn load_kb<T: Real>(text: &str) -> Result<KnowledgeBase<T>, KbError> {
    let mut builder = KbBuilder::new();
    let mut eq_seen = false;
    for form in sexpr::read_all(text)? {
        let pos = form.pos();
        let (head, args) = form.as_form()?;
        match head {
            "eq-prior" => {
                if eq_seen {
                    return Err(KbError::DuplicateEqPrior(pos));
                }
                eq_seen = true;
                if args.len() != 1 {
                    return Err(form_err(pos, "eq-prior takes exactly one number"));
                }
                let raw = atom_arg(args, 0, pos, "number")?;
                let v: T = raw
                    .parse()
                    .map_err(|_| form_err(args[0].pos(), format!("`{raw}` is not a decimal number")))?;
                if !(v > T::zero() && v < T::one()) {
                    return Err(KbError::EqPriorRange(v.as_f64()));
                }
                builder.eq_prior(v);
            }
            "schema" => {
                let name = name_arg(args, 0, pos, "schema name")?;
                let mut parent = None;
                let mut prior = None;
                let mut i = 1;
                while i < args.len() {
                    let key = atom_arg(args, i, pos, "keyword")?;
                    match key {
                        ":isa" if parent.is_none() => parent = Some(name_arg(args, i + 1, pos, "parent name")?),
                        ":prior" if prior.is_none() => {
                            let raw = atom_arg(args, i + 1, pos, "prior")?;
                            let v: T = raw.parse().map_err(|_| {
                                form_err(args[i + 1].pos(), format!("`{raw}` is not a decimal number"))
                            })?;
                            prior = Some(v);
                        }
                        _ => return Err(form_err(args[i].pos(), format!("unexpected `{key}` in schema form"))),
                    }
                    i += 2;
                }
                let prior = prior.ok_or_else(|| form_err(pos, format!("schema `{name}` has no :prior")))?;
                builder.schema(name, parent, prior);
            }
            "role" => {
                if args.len() != 3 {
                    return Err(form_err(pos, "role takes a filled schema, a slot and a filler schema"));
                }
                let filled = name_arg(args, 0, pos, "schema name")?;
                let slot = name_arg(args, 1, pos, "slot name")?;
                let filler = name_arg(args, 2, pos, "schema name")?;
                builder.role(filled, slot, filler);
            }
            other => return Err(form_err(pos, format!("unknown form `{other}`"))),
        }
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::FIXTURE_KB;
    use crate::path::LinkKind;

    fn kb() -> KnowledgeBase<f64> {
        load_kb(FIXTURE_KB).unwrap()
    }

    #[test]
    fn loads_fixture() {
        let kb = kb();
        assert_eq!(kb.len(), 5);
        assert_eq!(kb.roles().len(), 2);
        assert_eq!(kb.prior(kb.id("supermarket").unwrap()).unwrap(), 0.01);
        assert_eq!(kb.eq_prior(), 0.001);
    }

    #[test]
    fn empty_input_misses_eq_prior() {
        assert_eq!(load_kb::<f64>("").unwrap_err(), KbError::MissingEqPrior);
    }

    #[test]
    fn child_prior_above_parent_is_rejected() {
        let err = load_kb::<f64>("(eq-prior 0.01)(schema p :prior 0.5)(schema c :isa p :prior 0.9)").unwrap_err();
        assert!(matches!(err, KbError::ChildExceedsParent { .. }), "{err}");
    }

    #[test]
    fn children_sum_above_parent_is_rejected() {
        let text = "(eq-prior 0.01)(schema p :prior 0.5)(schema a :isa p :prior 0.3)(schema b :isa p :prior 0.3)";
        assert!(matches!(load_kb::<f64>(text).unwrap_err(), KbError::ChildrenExceedParent { .. }));
        // 0.1 + 0.2 rounds above 0.3 in binary; that must still load.
        let text = "(eq-prior 0.01)(schema p :prior 0.3)(schema a :isa p :prior 0.1)(schema b :isa p :prior 0.2)";
        load_kb::<f64>(text).unwrap();
    }

    #[test]
    fn semantic_errors() {
        #[allow(clippy::type_complexity)]
        let cases: &[(&str, fn(&KbError) -> bool)] = &[
            ("(eq-prior 0.1)(schema a :prior 0.1)(schema a :prior 0.1)", |e| matches!(e, KbError::DuplicateSchema(_))),
            ("(eq-prior 0.1)(schema a :isa b :prior 0.1)", |e| matches!(e, KbError::UnknownParent { .. })),
            ("(eq-prior 0.1)(schema a :prior 0.1)(role a s b)", |e| matches!(e, KbError::UnknownSchema(_))),
            ("(eq-prior 0.1)(schema a :isa b :prior 0.1)(schema b :isa a :prior 0.1)", |e| matches!(e, KbError::IsaCycle(_))),
            ("(eq-prior 0.1)(schema a :isa a :prior 0.1)", |e| matches!(e, KbError::IsaCycle(_))),
            ("(eq-prior 0.1)(schema a :prior 1.5)", |e| matches!(e, KbError::PriorRange { .. })),
            ("(eq-prior 0.1)(schema a :prior 0)", |e| matches!(e, KbError::PriorRange { .. })),
            ("(eq-prior 1.0)(schema a :prior 0.1)", |e| matches!(e, KbError::EqPriorRange(_))),
            ("(eq-prior 0.1)(eq-prior 0.1)", |e| matches!(e, KbError::DuplicateEqPrior(_))),
            ("(eq-prior 0.1)(schema a :prior 0.1)(schema b :prior 0.1)(role a s b)(role a s a)", |e| {
                matches!(e, KbError::DuplicateSlot { .. })
            }),
            ("(eq-prior 0.1)(schema 9a :prior 0.1)", |e| matches!(e, KbError::Form { .. })),
            ("(eq-prior 0.1)(frame a)", |e| matches!(e, KbError::Form { .. })),
        ];
        for (text, check) in cases {
            let err = load_kb::<f64>(text).unwrap_err();
            assert!(check(&err), "{text}: {err}");
        }
    }

    #[test]
    fn syntax_error_carries_line() {
        let err = load_kb::<f64>("(eq-prior 0.1)\n(schema a :prior 0.1\n").unwrap_err();
        match err {
            KbError::Syntax(e) => assert_eq!(e.pos.line, 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn isa_star_examples() {
        let kb = kb();
        let sm = kb.id("supermarket").unwrap();
        let st = kb.id("store-").unwrap();
        assert!(kb.isa_star(sm, st).unwrap());
        assert!(!kb.isa_star(sm, sm).unwrap());
        assert!(!kb.isa_star(st, sm).unwrap());
        assert!(kb.isa_star(SchemaId(99), st).is_err());
    }

    #[test]
    fn supermarket_neighbors() {
        let kb = kb();
        let sm = kb.id("supermarket").unwrap();
        let got: Vec<(LinkKind, &str)> =
            kb.neighbors(sm).unwrap().iter().map(|l| (l.kind(), kb.name(l.destination()))).collect();
        assert_eq!(got, vec![(LinkKind::IsaUp, "store-"), (LinkKind::RoleUp, "supermarket-shopping")]);
    }

    #[test]
    fn isolated_schema_has_no_neighbors() {
        let kb = load_kb::<f64>("(eq-prior 0.1)(schema lonely :prior 0.2)").unwrap();
        assert!(kb.neighbors(kb.id("lonely").unwrap()).unwrap().is_empty());
    }

    #[test]
    fn render_round_trips() {
        let kb = kb();
        let again: KnowledgeBase<f64> = load_kb(&kb.render()).unwrap();
        assert_eq!(kb, again);
    }

    #[test]
    fn loads_as_f32() {
        let kb: KnowledgeBase<f32> = load_kb(FIXTURE_KB).unwrap();
        assert_eq!(kb.prior(kb.id("go").unwrap()).unwrap(), 0.1_f32);
    }
}
