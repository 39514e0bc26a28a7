//! Reproducible synthetic corpora: a random schema library of flat plans whose
//! slots take object categories, and short observation streams that each
//! plant one plan by observing two of its fillers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb::{KbBuilder, KnowledgeBase};
use crate::marker::EngineConfig;
use crate::pipeline::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub categories: usize,
    pub plans: usize,
    pub streams: usize,
    /// Probability that a given (plan, slot) pair is corroborated in a stream.
    pub corroboration: f64,
    /// Probability that an observation names a subcategory of the filler type.
    pub specific: f64,
    /// Probability that a stream carries one extra unrelated observation.
    pub distractor: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { categories: 12, plans: 8, streams: 5, corroboration: 1.0, specific: 0.3, distractor: 0.3 }
    }
}

impl SynthParams {
    /// Settings under which planted plans clear the cutoffs. Category priors
    /// are about a tenth of plan priors, so a half gains a factor near 10 on
    /// its way up; the cutoff stays below the lowest belief so isa moves out
    /// of a subcategory survive.
    pub fn run_config(&self) -> RunConfig<f64> {
        RunConfig { engine: EngineConfig::with_threshold(0.5), gamma1: 0.9, gamma0: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub kb_text: String,
    pub kb: KnowledgeBase<f64>,
    pub streams: Vec<String>,
}

const EQ_PRIOR: f64 = 5e-6;

pub fn synth_corpus(seed: u64, params: &SynthParams) -> SynthCorpus {
    assert!(params.categories >= 2 && params.plans >= 1, "need at least two categories and one plan");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = KbBuilder::<f64>::new();
    b.eq_prior(EQ_PRIOR);

    let mut subs: Vec<Vec<String>> = Vec::new();
    for c in 0..params.categories {
        let name = format!("obj-{c}");
        let prior = rng.gen_range(1e-5..2.5e-5);
        b.schema(&name, None, prior);
        let n = rng.gen_range(0..=3);
        let mut kids = Vec::new();
        for k in 0..n {
            let kid = format!("obj-{c}-{k}");
            b.schema(&kid, Some(&name), prior * rng.gen_range(0.1..0.25));
            kids.push(kid);
        }
        subs.push(kids);
    }

    let mut plans: Vec<(String, Vec<(String, usize)>)> = Vec::new();
    for p in 0..params.plans {
        let name = format!("plan-{p}");
        b.schema(&name, None, rng.gen_range(1.5e-4..3e-4));
        let arity = rng.gen_range(2..=3.min(params.categories));
        let mut cats: Vec<usize> = (0..params.categories).collect();
        cats.shuffle(&mut rng);
        let mut slots = Vec::new();
        for (j, &c) in cats[..arity].iter().enumerate() {
            let slot = format!("r{}", j + 1);
            b.role(&name, &slot, &format!("obj-{c}"));
            slots.push((slot, c));
        }
        plans.push((name, slots));
    }
    let kb = b.build().expect("synthetic library satisfies the invariants");

    let observe = |rng: &mut ChaCha8Rng, c: usize, id: &str| -> String {
        let schema = if !subs[c].is_empty() && rng.gen_bool(params.specific) {
            subs[c].choose(rng).expect("nonempty").clone()
        } else {
            format!("obj-{c}")
        };
        let belief: f64 = rng.gen_range(0.8..=1.0);
        format!("(inst {id} {schema} :belief {})\n", (belief * 1000.0).round() / 1000.0)
    };

    let mut streams = Vec::new();
    for _ in 0..params.streams {
        let mut s = String::new();
        let (_, slots) = &plans[rng.gen_range(0..plans.len())];
        let mut picked: Vec<usize> = (0..slots.len()).collect();
        picked.shuffle(&mut rng);
        s.push_str(&observe(&mut rng, slots[picked[0]].1, "o1"));
        s.push_str(&observe(&mut rng, slots[picked[1]].1, "o2"));
        if rng.gen_bool(params.distractor) {
            let c = rng.gen_range(0..params.categories);
            s.push_str(&observe(&mut rng, c, "o3"));
        }
        for (plan, slots) in &plans {
            for (slot, _) in slots {
                if rng.gen_bool(params.corroboration) {
                    s.push_str(&format!("(corroborate {plan} {slot})\n"));
                }
            }
        }
        streams.push(s);
    }

    SynthCorpus { kb_text: kb.render(), kb, streams }
}
