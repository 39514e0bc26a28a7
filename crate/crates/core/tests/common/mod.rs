// Shared generators and an independent network evaluator for the integration
// tests. Not every test target uses every helper.
#![allow(dead_code)]

use markerpass::bayes::{Cpts, VertebrateNetwork};
use markerpass::kb::{KbBuilder, KnowledgeBase, Observation};
use markerpass::path::{Path, TraversalLink, ValidityState};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// A random library of `n` schemas: an isa forest whose children take a
/// share of the parent's prior, plus `roles` role links with distinct slot
/// names. p(==) sits below every prior.
pub fn random_kb(rng: &mut ChaCha8Rng, n: usize, roles: usize) -> KnowledgeBase<f64> {
    let mut b = KbBuilder::<f64>::new();
    let mut priors: Vec<f64> = Vec::with_capacity(n);
    let mut room: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("s{i}");
        let parent = if i > 0 && rng.gen_bool(0.5) { Some(rng.gen_range(0..i)) } else { None };
        match parent {
            Some(p) if room[p] > priors[p] * 0.05 => {
                let prior = room[p] * rng.gen_range(0.2..0.6);
                room[p] -= prior;
                b.schema(&name, Some(&format!("s{p}")), prior);
                priors.push(prior);
            }
            _ => {
                let prior = rng.gen_range(0.01..0.5);
                b.schema(&name, None, prior);
                priors.push(prior);
            }
        }
        room.push(priors[i]);
    }
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&c| c != a).map(move |c| (a, c))).collect();
    pairs.shuffle(rng);
    for (k, &(filled, filler)) in pairs.iter().take(roles).enumerate() {
        b.role(&format!("s{filled}"), &format!("r{k}"), &format!("s{filler}"));
    }
    let min = priors.iter().cloned().fold(1.0, f64::min);
    b.eq_prior(min * rng.gen_range(0.1..0.9));
    b.build().expect("generated library is well formed")
}

/// A random valid path of at most `max_links` links and `max_roles` role
/// moves, found by a walk that respects the validity automaton.
pub fn random_path(kb: &KnowledgeBase<f64>, rng: &mut ChaCha8Rng, max_links: usize, max_roles: usize) -> Option<Path<f64>> {
    let ids: Vec<_> = kb.ids().collect();
    let start = *ids.choose(rng)?;
    let mut at = start;
    let mut state = ValidityState::INITIAL;
    let mut links: Vec<TraversalLink> = Vec::new();
    let mut roles = 0;
    while links.len() < max_links {
        let options: Vec<TraversalLink> = kb
            .neighbors(at)
            .ok()?
            .iter()
            .copied()
            .filter(|l| state.step(l.kind()).is_ok() && (!l.kind().is_role() || roles < max_roles))
            .collect();
        let Some(&link) = options.choose(rng) else { break };
        state = state.step(link.kind()).ok()?;
        roles += usize::from(link.kind().is_role());
        at = link.destination();
        links.push(link);
        if state.is_accepting() && rng.gen_bool(0.35) {
            break;
        }
    }
    if !state.is_accepting() {
        return None;
    }
    let b1 = rng.gen_range(0.05..=1.0);
    let b2 = rng.gen_range(0.05..=1.0);
    Path::new(Observation::new("a", start, b1), links, Observation::new("b", at, b2)).ok()
}

/// A table over binary variables; index bit `j` is the value of `vars[j]`.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    fn new(vars: Vec<usize>, f: impl Fn(&[bool]) -> f64) -> Factor {
        let n = vars.len();
        let table = (0..1usize << n)
            .map(|m| {
                let vals: Vec<bool> = (0..n).map(|j| m >> j & 1 == 1).collect();
                f(&vals)
            })
            .collect();
        Factor { vars, table }
    }

    fn value(&self, assign: &dyn Fn(usize) -> bool) -> f64 {
        let m = self.vars.iter().enumerate().fold(0, |m, (j, &v)| m | usize::from(assign(v)) << j);
        self.table[m]
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        for v in &other.vars {
            if !vars.contains(v) {
                vars.push(*v);
            }
        }
        let vs = vars.clone();
        Factor::new(vars, |vals| {
            let get = |v: usize| vals[vs.iter().position(|&x| x == v).unwrap()];
            self.value(&get) * other.value(&get)
        })
    }

    fn sum_out(&self, var: usize) -> Factor {
        let j = self.vars.iter().position(|&v| v == var).unwrap();
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let mut table = vec![0.0; 1 << vars.len()];
        for (m, &x) in self.table.iter().enumerate() {
            let low = m & ((1 << j) - 1);
            let high = (m >> (j + 1)) << j;
            table[low | high] += x;
        }
        Factor { vars, table }
    }
}

/// Sums the product of `factors` over every variable by elimination, always
/// removing the variable whose elimination builds the smallest factor.
fn eliminate_all(mut factors: Vec<Factor>) -> f64 {
    loop {
        let mut vars: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
        vars.sort_unstable();
        vars.dedup();
        let Some(&var) = vars.iter().min_by_key(|&&v| {
            let mut scope: Vec<usize> = factors.iter().filter(|f| f.vars.contains(&v)).flat_map(|f| f.vars.clone()).collect();
            scope.sort_unstable();
            scope.dedup();
            scope.len()
        }) else {
            return factors.iter().map(|f| f.table[0]).product();
        };
        let (touch, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        let joined = touch.iter().skip(1).fold(touch[0].clone(), |acc, f| acc.product(f));
        factors = rest;
        factors.push(joined.sum_out(var));
    }
}

/// Joint posterior of the all-true spine and `P(E^I | end evidence)`,
/// computed by variable elimination over the network's factors.
pub fn ve_posterior(net: &VertebrateNetwork<f64>, cpts: &Cpts<f64>) -> (f64, f64) {
    let ni = net.inst_nodes.len();
    let ne = net.eq_nodes.len();
    let mut base = Vec::new();
    for (i, &p) in cpts.inst.iter().enumerate() {
        base.push(Factor::new(vec![i], move |v| if v[0] { p } else { 1.0 - p }));
    }
    for (k, e) in net.eq_nodes.iter().enumerate() {
        let q = cpts.eq[k];
        base.push(Factor::new(vec![ni + k, e.owner, e.filler], move |v| match (v[0], v[1] && v[2]) {
            (true, true) => q,
            (false, true) => 1.0 - q,
            (true, false) => 0.0,
            (false, false) => 1.0,
        }));
    }
    for (ev, &(on, off)) in net.end_evidence.iter().zip(&cpts.evidence) {
        base.push(Factor::new(vec![ev.of], move |v| if v[0] { on } else { off }));
    }
    let (g1, g0) = (cpts.gamma1, cpts.gamma0);
    let interior = Factor::new((ni..ni + ne).collect(), move |v| if v.iter().all(|&x| x) { g1 } else { g0 });

    let z_e = eliminate_all(base.clone());
    let mut with_interior = base.clone();
    with_interior.push(interior.clone());
    let z = eliminate_all(with_interior);
    let all_true = |_: usize| true;
    let top: f64 = base.iter().map(|f| f.value(&all_true)).product::<f64>() * interior.value(&all_true);
    (top / z, z / z_e)
}

/// Score of a path recomputed from the priors: the start belief, one factor
/// per link, then the end belief over the prior of the end schema.
pub fn hand_score(kb: &KnowledgeBase<f64>, path: &Path<f64>) -> f64 {
    let p = |s| kb.prior(s).unwrap();
    let mut v = path.start().belief;
    for link in path.links() {
        v *= match *link {
            TraversalLink::RoleUp { filled, filler, .. } => p(filled) / p(filler),
            TraversalLink::IsaDown { specific, general } => p(specific) / p(general),
            TraversalLink::RoleDown { .. } | TraversalLink::IsaUp { .. } => 1.0,
        };
    }
    v * path.end().belief / p(path.end().schema)
}

pub const FIXTURE_KB: &str = "(eq-prior 0.001)
(schema store- :prior 0.05)
(schema supermarket :isa store- :prior 0.01)
(schema supermarket-shopping :isa shopping :prior 0.02)
(schema shopping :prior 0.05)
(role supermarket-shopping store-of supermarket)
(role shopping go-step go)
(schema go :prior 0.1)
";

pub const WORKED_PATH: &str = "(inst supermarket2 supermarket :belief 0.9)\
(role supermarket-shopping store-of supermarket)\
(isa supermarket-shopping shopping)\
(role- shopping go-step go)\
(inst go1 go :belief 0.9)";

pub fn fixture() -> KnowledgeBase<f64> {
    markerpass::kb::load_kb(FIXTURE_KB).unwrap()
}

/// A fresh scratch directory under the system temp dir.
pub fn scratch(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("markerpass-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
