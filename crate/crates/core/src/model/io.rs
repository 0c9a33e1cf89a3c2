//! JSON game and strategy documents.
//!
//! Game:
//! `{"states","init","final","eve_actions","adam_actions","eve_obs","adam_obs","transitions"}`
//! where each transition is `{"from","eve","adam","to":{state: prob}}` and a
//! probability is either a `"num/den"` string or a JSON integer.
//!
//! Strategy:
//! `{"owner","memory","init","move":{mem:{action:prob}},"update":{mem:{block:mem}}}`
//! where `block` is the decimal index of an observation block of the owner.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::arena::{Arena, ArenaParts, Partition, Player};
use super::distribution::Distribution;
use super::rational::{format_rational, is_one, parse_rational, Rational};
use super::strategy::{validate_strategy, FiniteMemoryStrategy};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    states: Vec<String>,
    init: String,
    #[serde(rename = "final")]
    final_states: Vec<String>,
    eve_actions: Vec<String>,
    adam_actions: Vec<String>,
    eve_obs: Vec<Vec<String>>,
    adam_obs: Vec<Vec<String>>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    from: String,
    eve: String,
    adam: String,
    to: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyDoc {
    owner: String,
    memory: Vec<String>,
    init: String,
    #[serde(rename = "move")]
    moves: Map<String, Value>,
    update: Map<String, Value>,
}

fn probability_value(value: &Value, context: &str) -> Result<Rational> {
    let parsed = match value {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => n.as_i64().map(|i| super::rational::ratio(i, 1)),
        _ => None,
    };
    parsed.ok_or_else(|| Error::Schema(format!("{context}: malformed probability {value}")))
}

fn probability_json(p: &Rational) -> Value {
    if is_one(p) {
        Value::from(1)
    } else {
        Value::String(format_rational(p))
    }
}

fn lookup(index: &HashMap<&str, usize>, name: &str, what: &str) -> Result<usize> {
    index
        .get(name)
        .copied()
        .ok_or_else(|| Error::validation(format!("unknown {what} {name:?}")))
}

fn name_index(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

fn weights_to_distribution(
    entries: &Map<String, Value>,
    index: &HashMap<&str, usize>,
    what: &str,
    context: &str,
) -> Result<Distribution> {
    let mut weights = Vec::with_capacity(entries.len());
    for (name, value) in entries {
        let target = lookup(index, name, what)?;
        let p = probability_value(value, context)?;
        if p <= num_traits::Zero::zero() {
            return Err(Error::validation(format!("{context}: zero or negative weight for {name:?}")));
        }
        weights.push((target, p));
    }
    Distribution::from_weights(weights).map_err(|e| Error::validation(format!("{context}: {e}")))
}

fn partition_from_names(
    blocks: &[Vec<String>],
    index: &HashMap<&str, usize>,
    size: usize,
    who: &str,
) -> Result<Partition> {
    let blocks = blocks
        .iter()
        .map(|b| b.iter().map(|s| lookup(index, s, "state")).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Partition::new(size, blocks)
        .map_err(|e| Error::validation(format!("{who}_obs is not a partition: {e}")))
}

/// Parses and validates a game document.
pub fn parse_game(text: &str) -> Result<Arena> {
    let doc: GameDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let states = name_index(&doc.states);
    let eve = name_index(&doc.eve_actions);
    let adam = name_index(&doc.adam_actions);
    let n = doc.states.len();
    let (ne, na) = (doc.eve_actions.len(), doc.adam_actions.len());

    let init = lookup(&states, &doc.init, "state")?;
    let mut final_states = vec![false; n];
    for f in &doc.final_states {
        final_states[lookup(&states, f, "state")?] = true;
    }
    let eve_obs = partition_from_names(&doc.eve_obs, &states, n, "eve")?;
    let adam_obs = partition_from_names(&doc.adam_obs, &states, n, "adam")?;

    let mut table: Vec<Option<Distribution>> = vec![None; n * ne * na];
    for t in &doc.transitions {
        let s = lookup(&states, &t.from, "state")?;
        let e = lookup(&eve, &t.eve, "eve action")?;
        let a = lookup(&adam, &t.adam, "adam action")?;
        let context = format!("δ({},{},{})", t.from, t.eve, t.adam);
        let dist = weights_to_distribution(&t.to, &states, "state", &context)?;
        let slot = &mut table[(s * ne + e) * na + a];
        if slot.is_some() {
            return Err(Error::validation(format!("{context} defined twice")));
        }
        *slot = Some(dist);
    }
    let mut transitions = Vec::with_capacity(table.len());
    for (i, slot) in table.into_iter().enumerate() {
        match slot {
            Some(d) => transitions.push(d),
            None => {
                let (s, rest) = (i / (ne * na), i % (ne * na));
                return Err(Error::validation(format!(
                    "δ not total: missing ({},{},{})",
                    doc.states[s],
                    doc.eve_actions[rest / na],
                    doc.adam_actions[rest % na]
                )));
            }
        }
    }

    Arena::new(ArenaParts {
        states: doc.states,
        init,
        eve_actions: doc.eve_actions,
        adam_actions: doc.adam_actions,
        transitions,
        eve_obs,
        adam_obs,
        final_states,
    })
}

pub fn game_to_value(arena: &Arena) -> Value {
    let names = arena.state_names();
    let obs = |p: Player| -> Vec<Vec<String>> {
        arena
            .obs(p)
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&s| names[s].clone()).collect())
            .collect()
    };
    let mut transitions = Vec::with_capacity(arena.transitions().len());
    for s in 0..arena.num_states() {
        for (e, eve) in arena.actions(Player::Eve).iter().enumerate() {
            for (a, adam) in arena.actions(Player::Adam).iter().enumerate() {
                let to = arena
                    .transition(s, e, a)
                    .entries()
                    .iter()
                    .map(|(t, p)| (names[*t].clone(), probability_json(p)))
                    .collect();
                transitions.push(TransitionDoc {
                    from: names[s].clone(),
                    eve: eve.clone(),
                    adam: adam.clone(),
                    to,
                });
            }
        }
    }
    let doc = GameDoc {
        states: names.to_vec(),
        init: names[arena.init()].clone(),
        final_states: (0..arena.num_states())
            .filter(|&s| arena.is_final(s))
            .map(|s| names[s].clone())
            .collect(),
        eve_actions: arena.actions(Player::Eve).to_vec(),
        adam_actions: arena.actions(Player::Adam).to_vec(),
        eve_obs: obs(Player::Eve),
        adam_obs: obs(Player::Adam),
        transitions,
    };
    serde_json::to_value(doc).expect("game document serializes")
}

/// Canonical document: states, actions and blocks in arena order, one
/// transition object per triple in `(state, eve, adam)` order.
pub fn serialize_game(arena: &Arena) -> String {
    serde_json::to_string_pretty(&game_to_value(arena)).expect("game document serializes")
}

/// Parses a strategy document against `arena` and validates it for the
/// owner named in the document.
pub fn parse_strategy(arena: &Arena, text: &str) -> Result<FiniteMemoryStrategy> {
    let doc: StrategyDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let owner: Player = doc.owner.parse()?;
    let memory_index = name_index(&doc.memory);
    if memory_index.len() != doc.memory.len() {
        return Err(Error::validation("duplicate memory names"));
    }
    let actions = name_index(arena.actions(owner));
    let init = lookup(&memory_index, &doc.init, "memory")?;
    let blocks = arena.obs(owner).len();

    let mut moves = Vec::with_capacity(doc.memory.len());
    let mut update = Vec::with_capacity(doc.memory.len());
    for mem in &doc.memory {
        let entry = doc
            .moves
            .get(mem)
            .and_then(Value::as_object)
            .ok_or_else(|| Error::validation(format!("move missing for memory {mem:?}")))?;
        let context = format!("move[{mem}]");
        let what = format!("{owner} action");
        moves.push(weights_to_distribution(entry, &actions, &what, &context)?);

        let row = doc
            .update
            .get(mem)
            .and_then(Value::as_object)
            .ok_or_else(|| Error::validation(format!("update missing for memory {mem:?}")))?;
        let mut targets = vec![usize::MAX; blocks];
        for (key, value) in row {
            let b: usize = key
                .parse()
                .ok()
                .filter(|&b| b < blocks)
                .ok_or_else(|| Error::validation(format!("update[{mem}]: unknown block {key:?}")))?;
            let target = value
                .as_str()
                .ok_or_else(|| Error::Schema(format!("update[{mem}][{key}] must be a memory name")))?;
            targets[b] = lookup(&memory_index, target, "memory")?;
        }
        if let Some(b) = targets.iter().position(|&t| t == usize::MAX) {
            return Err(Error::validation(format!("update[{mem}] lacks block {b}")));
        }
        update.push(targets);
    }
    for key in doc.moves.keys().chain(doc.update.keys()) {
        if !memory_index.contains_key(key.as_str()) {
            return Err(Error::validation(format!("unknown memory {key:?}")));
        }
    }
    let strat = FiniteMemoryStrategy {
        owner,
        memory: doc.memory,
        init,
        moves,
        update,
    };
    validate_strategy(arena, owner, &strat)?;
    Ok(strat)
}

pub fn strategy_to_value(arena: &Arena, strat: &FiniteMemoryStrategy) -> Value {
    let actions = arena.actions(strat.owner);
    let mut moves = Map::new();
    let mut update = Map::new();
    for (m, name) in strat.memory.iter().enumerate() {
        let dist: Map<String, Value> = strat.moves[m]
            .entries()
            .iter()
            .map(|(a, p)| (actions[*a].clone(), Value::String(format_rational(p))))
            .collect();
        moves.insert(name.clone(), Value::Object(dist));
        let row: Map<String, Value> = strat.update[m]
            .iter()
            .enumerate()
            .map(|(b, t)| (b.to_string(), Value::String(strat.memory[*t].clone())))
            .collect();
        update.insert(name.clone(), Value::Object(row));
    }
    serde_json::to_value(StrategyDoc {
        owner: strat.owner.as_str().to_string(),
        memory: strat.memory.clone(),
        init: strat.memory[strat.init].clone(),
        moves,
        update,
    })
    .expect("strategy document serializes")
}

pub fn serialize_strategy(arena: &Arena, strat: &FiniteMemoryStrategy) -> String {
    serde_json::to_string_pretty(&strategy_to_value(arena, strat)).expect("strategy document serializes")
}
