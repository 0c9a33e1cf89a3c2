use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{EvalResult, Method};
use crate::model::{Arena, Distribution, FiniteMemoryStrategy, Objective, Player, Rational};
use num_traits::ToPrimitive;

pub const GENERATOR: &str = "chacha8";
pub const DEFAULT_HORIZON: usize = 1000;
/// Samples are split into this many independent streams regardless of the
/// thread count, so results do not depend on scheduling.
pub const CHUNKS: u64 = 16;

#[derive(Clone, Debug)]
pub struct Simulation {
    pub result: EvalResult,
    pub successes: u64,
    pub horizon: usize,
    /// Büchi-type objectives look for a final visit in the last `window` steps.
    pub window: usize,
    pub approximate: bool,
    pub seed: u64,
}

impl Simulation {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.result.samples.unwrap_or(1) as f64
    }

    pub fn contains(&self, value: f64) -> bool {
        let hw = self.result.half_width.unwrap_or(0.0);
        (self.estimate() - value).abs() <= hw
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.result.to_json();
        let obj = v.as_object_mut().unwrap();
        obj.insert("estimate".into(), json!(self.estimate()));
        obj.insert("horizon".into(), json!(self.horizon));
        obj.insert("window".into(), json!(self.window));
        obj.insert("approximate".into(), json!(self.approximate));
        obj.insert("seed".into(), json!(self.seed));
        obj.insert("generator".into(), json!(GENERATOR));
        obj.insert("streams".into(), json!(CHUNKS));
        v
    }
}

/// 95% Wald half-width.
pub fn half_width(successes: u64, samples: u64) -> f64 {
    let p = successes as f64 / samples as f64;
    1.96 * (p * (1.0 - p) / samples as f64).sqrt()
}

fn sampler(d: &Distribution) -> WeightedIndex<f64> {
    WeightedIndex::new(d.entries().iter().map(|(_, p)| p.to_f64().unwrap_or(0.0))).expect("positive weights")
}

struct Tables<'a> {
    arena: &'a Arena,
    eve: &'a FiniteMemoryStrategy,
    adam: &'a FiniteMemoryStrategy,
    eve_moves: Vec<WeightedIndex<f64>>,
    adam_moves: Vec<WeightedIndex<f64>>,
    steps: Vec<WeightedIndex<f64>>,
}

impl Tables<'_> {
    fn pick(sampler: &WeightedIndex<f64>, d: &Distribution, rng: &mut ChaCha8Rng) -> usize {
        d.entries()[rng.sample(sampler)].0
    }

    /// Runs one play of `horizon` steps; reports (visited final at all,
    /// visited final within the window).
    fn run(&self, rng: &mut ChaCha8Rng, horizon: usize, window: usize) -> (bool, bool) {
        let arena = self.arena;
        let na = arena.num_actions(Player::Adam);
        let ne = arena.num_actions(Player::Eve);
        let (mut s, mut me, mut ma) = (arena.init(), self.eve.init, self.adam.init);
        let mut ever = arena.is_final(s);
        let mut late = ever && horizon < window;
        for t in 1..=horizon {
            let e = Self::pick(&self.eve_moves[me], &self.eve.moves[me], rng);
            let a = Self::pick(&self.adam_moves[ma], &self.adam.moves[ma], rng);
            let idx = (s * ne + e) * na + a;
            s = Self::pick(&self.steps[idx], &arena.transitions()[idx], rng);
            me = self.eve.next(me, arena.obs(Player::Eve).block_of(s));
            ma = self.adam.next(ma, arena.obs(Player::Adam).block_of(s));
            if arena.is_final(s) {
                ever = true;
                if t + window > horizon {
                    late = true;
                }
            }
        }
        (ever, late)
    }
}

/// Frequency estimate of the objective over `samples` plays of `horizon`
/// steps. Stream `i` is seeded from `(seed, i)`.
pub fn monte_carlo(
    arena: &Arena,
    eve: &FiniteMemoryStrategy,
    adam: &FiniteMemoryStrategy,
    objective: Objective,
    samples: u64,
    horizon: usize,
    seed: u64,
) -> Simulation {
    assert!(samples >= 1);
    let window = (horizon / 10).max(1);
    let tables = Tables {
        arena,
        eve,
        adam,
        eve_moves: eve.moves.iter().map(sampler).collect(),
        adam_moves: adam.moves.iter().map(sampler).collect(),
        steps: arena.transitions().iter().map(sampler).collect(),
    };
    let successes: u64 = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let quota = samples / CHUNKS + u64::from(chunk < samples % CHUNKS);
            (0..quota)
                .filter(|_| {
                    let (ever, late) = tables.run(&mut rng, horizon, window);
                    match objective {
                        Objective::Reachability => ever,
                        Objective::Safety => !ever,
                        Objective::Buchi => late,
                        Objective::CoBuchi => !late,
                    }
                })
                .count() as u64
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum();
    Simulation {
        result: EvalResult {
            probability: Rational::new(successes.into(), samples.into()),
            method: Method::MonteCarlo,
            samples: Some(samples),
            half_width: Some(half_width(successes, samples)),
        },
        successes,
        horizon,
        window,
        approximate: matches!(objective, Objective::Buchi | Objective::CoBuchi),
        seed,
    }
}
