//! JSON file formats for models, queries and strategies.
//!
//! Rationals are written as `"num/den"` strings; plain integers are accepted
//! on input. Floats are rejected. Dimensions in query files count from 1.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MdpBuilder, StateId, WeightedMdp};
use crate::query::{PayoffKind, PercentileConstraint, PercentileQuery};
use crate::rational::Rational;
use crate::strategy::{MemId, MooreStrategy, Strategy};

fn parse_err(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { context: context.into(), message: message.into() }
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(format!("line {}, column {}", e.line(), e.column()), e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dimensions: usize,
    pub states: Vec<String>,
    pub initial: String,
    pub actions: Vec<ActionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEntry {
    pub from: String,
    pub name: String,
    pub weights: Vec<i64>,
    pub to: Vec<Successor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Successor {
    pub state: String,
    pub prob: Rational,
}

/// A parsed model with its initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mdp: WeightedMdp,
    pub init: StateId,
}

fn state_index(names: &[String]) -> Result<HashMap<&str, StateId>> {
    let mut index = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.as_str(), i).is_some() {
            return Err(parse_err(format!("states[{i}]"), format!("duplicate state name `{n}`")));
        }
    }
    Ok(index)
}

impl ModelFile {
    pub fn into_model(self) -> Result<Model> {
        if self.dimensions == 0 {
            return Err(parse_err("dimensions", "must be at least 1"));
        }
        let index = state_index(&self.states)?;
        let lookup = |ctx: String, name: &str| {
            index.get(name).copied().ok_or_else(|| parse_err(ctx, format!("unknown state `{name}`")))
        };
        let init = lookup("initial".into(), &self.initial)?;
        let mut b = MdpBuilder::new(self.dimensions);
        for n in &self.states {
            b.add_state(n.clone());
        }
        let mut seen: HashMap<(StateId, &str), usize> = HashMap::new();
        for (i, a) in self.actions.iter().enumerate() {
            let s = lookup(format!("actions[{i}].from"), &a.from)?;
            if let Some(j) = seen.insert((s, a.name.as_str()), i) {
                return Err(parse_err(
                    format!("actions[{i}].name"),
                    format!("action `{}` of state `{}` already defined at actions[{j}]", a.name, a.from),
                ));
            }
            if a.weights.len() != self.dimensions {
                return Err(parse_err(
                    format!("actions[{i}].weights"),
                    format!("expected {} weights, found {}", self.dimensions, a.weights.len()),
                ));
            }
            if a.to.is_empty() {
                return Err(parse_err(format!("actions[{i}].to"), "no successors"));
            }
            let mut succ = Vec::with_capacity(a.to.len());
            let mut sum = Rational::zero();
            for (k, t) in a.to.iter().enumerate() {
                let ts = lookup(format!("actions[{i}].to[{k}].state"), &t.state)?;
                if !t.prob.is_positive() {
                    return Err(parse_err(format!("actions[{i}].to[{k}].prob"), "probability must be positive"));
                }
                sum += &t.prob;
                succ.push((ts, t.prob.clone()));
            }
            if !sum.is_one() {
                return Err(parse_err(format!("actions[{i}].to"), format!("probabilities sum to {sum}, not 1")));
            }
            b.add_action(s, a.name.clone(), &a.weights, &succ);
        }
        let mdp = b.build_unchecked();
        if let Some(s) = mdp.states().find(|s| mdp.num_actions(*s) == 0) {
            return Err(parse_err("actions", format!("state `{}` has no actions", mdp.state_name(s))));
        }
        mdp.validate()?;
        Ok(Model { mdp, init })
    }

    pub fn from_model(mdp: &WeightedMdp, init: StateId) -> Self {
        let names = mdp.state_names();
        let actions = mdp
            .states()
            .flat_map(|s| {
                mdp.actions(s).iter().map(move |a| ActionEntry {
                    from: names[s].clone(),
                    name: a.name.clone(),
                    weights: a.weights.clone(),
                    to: a
                        .successors
                        .iter()
                        .map(|(t, p)| Successor { state: names[*t].clone(), prob: p.clone() })
                        .collect(),
                })
            })
            .collect();
        ModelFile { dimensions: mdp.dims(), states: names.to_vec(), initial: names[init].clone(), actions }
    }
}

pub fn parse_model(text: &str) -> Result<Model> {
    serde_json::from_str::<ModelFile>(text).map_err(json_err)?.into_model()
}

pub fn model_to_json(mdp: &WeightedMdp, init: StateId) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(mdp, init)).expect("model serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintEntry {
    /// Overrides the query-level payoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffKind>,
    pub dim: usize,
    pub value: Rational,
    pub prob: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<Rational>,
    /// Inner inequality of a truncated sum; only `le` is supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Rational>,
    pub disjuncts: Vec<Vec<ConstraintEntry>>,
}

/// A parsed query with its optional relaxation parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query: PercentileQuery,
    pub epsilon: Option<Rational>,
}

impl QueryFile {
    pub fn into_query(self, model: &Model) -> Result<Query> {
        let index = state_index(model.mdp.state_names())?;
        if self.disjuncts.is_empty() {
            return Err(parse_err("disjuncts", "at least one disjunct is required"));
        }
        if let Some(e) = &self.epsilon {
            if e.is_negative() {
                return Err(parse_err("epsilon", "must be non-negative"));
            }
        }
        let mut disjuncts = Vec::new();
        for (i, block) in self.disjuncts.iter().enumerate() {
            let mut out = Vec::new();
            for (j, c) in block.iter().enumerate() {
                let ctx = |f: &str| format!("disjuncts[{i}][{j}].{f}");
                let kind = c.payoff.or(self.payoff).ok_or_else(|| parse_err(ctx("payoff"), "no payoff kind given"))?;
                if c.dim == 0 || c.dim > model.mdp.dims() {
                    return Err(parse_err(ctx("dim"), format!("dimension must lie in 1..={}", model.mdp.dims())));
                }
                match (kind, c.direction) {
                    (PayoffKind::TruncatedSum, Some(Direction::Ge)) => {
                        return Err(parse_err(
                            ctx("direction"),
                            "truncated_sum ≥ thresholds are not supported: negating weights would break non-negativity",
                        ))
                    }
                    (PayoffKind::TruncatedSum, _) | (_, None) => {}
                    (_, Some(_)) => {
                        return Err(parse_err(ctx("direction"), format!("only applies to truncated_sum, not {kind}")))
                    }
                }
                let mut pc = PercentileConstraint::new(kind, c.dim - 1, c.value.clone(), c.prob.clone());
                if let Some(t) = &c.target {
                    let ids = t
                        .iter()
                        .map(|n| index.get(n.as_str()).copied().ok_or_else(|| parse_err(ctx("target"), format!("unknown state `{n}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    pc = pc.with_target(ids);
                }
                if let Some(l) = &c.discount {
                    pc = pc.with_discount(l.clone());
                }
                pc.validate(&model.mdp).map_err(|e| parse_err(format!("disjuncts[{i}][{j}]"), e.to_string()))?;
                out.push(pc);
            }
            crate::query::check_family(&out).map_err(|e| parse_err(format!("disjuncts[{i}]"), e.to_string()))?;
            disjuncts.push(out);
        }
        Ok(Query { query: PercentileQuery { init: model.init, disjuncts }, epsilon: self.epsilon })
    }

    pub fn from_query(mdp: &WeightedMdp, query: &PercentileQuery, epsilon: Option<Rational>) -> Self {
        let names = mdp.state_names();
        let disjuncts = query
            .disjuncts
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|c| ConstraintEntry {
                        payoff: Some(c.kind),
                        dim: c.dim + 1,
                        value: c.value.clone(),
                        prob: c.prob.clone(),
                        target: c.target.as_ref().map(|t| t.iter().map(|s| names[*s].clone()).collect()),
                        discount: c.discount.clone(),
                        direction: None,
                    })
                    .collect()
            })
            .collect();
        QueryFile { payoff: None, epsilon, disjuncts }
    }
}

pub fn parse_query(text: &str, model: &Model) -> Result<Query> {
    serde_json::from_str::<QueryFile>(text).map_err(json_err)?.into_query(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemProb {
    pub memory: MemId,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProb {
    pub action: String,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceEntry {
    pub state: String,
    pub memory: MemId,
    pub actions: Vec<ActionProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEntry {
    pub memory: MemId,
    pub state: String,
    pub action: String,
    pub next: String,
    pub to: Vec<MemProb>,
}

/// Moore machine with state and action names; only the reachable part is
/// stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyFile {
    Moore {
        initial_state: String,
        memory: Vec<String>,
        initial: Vec<MemProb>,
        choices: Vec<ChoiceEntry>,
        updates: Vec<UpdateEntry>,
    },
    /// Infinite-memory strategy; exported for inspection only.
    Switching { description: String },
}

impl StrategyFile {
    pub fn from_strategy(mdp: &WeightedMdp, strategy: &Strategy) -> Self {
        match strategy {
            Strategy::Finite(m) => Self::from_moore(mdp, m),
            Strategy::Switching(w) => StrategyFile::Switching {
                description: format!(
                    "reach phase over {} states, then per-MEC switching schedules (K0 = {:?})",
                    w.reach.reach.choice.len(),
                    w.mecs.iter().map(|m| m.k0.k0).collect::<Vec<_>>()
                ),
            },
        }
    }

    pub fn from_moore(mdp: &WeightedMdp, m: &MooreStrategy) -> Self {
        let sname = |s: StateId| mdp.state_name(s).to_string();
        let aname = |s: StateId, a| mdp.action(s, a).name.clone();
        let mems = |d: &[(MemId, Rational)]| d.iter().map(|(m, p)| MemProb { memory: *m, prob: p.clone() }).collect();
        StrategyFile::Moore {
            initial_state: sname(m.init),
            memory: m.memory.clone(),
            initial: mems(&m.initial),
            choices: m
                .next
                .iter()
                .map(|((s, mem), d)| ChoiceEntry {
                    state: sname(*s),
                    memory: *mem,
                    actions: d.iter().map(|(a, p)| ActionProb { action: aname(*s, *a), prob: p.clone() }).collect(),
                })
                .collect(),
            updates: m
                .update
                .iter()
                .map(|((mem, s, a, t), d)| UpdateEntry {
                    memory: *mem,
                    state: sname(*s),
                    action: aname(*s, *a),
                    next: sname(*t),
                    to: mems(d),
                })
                .collect(),
        }
    }

    pub fn into_moore(self, mdp: &WeightedMdp) -> Result<MooreStrategy> {
        let StrategyFile::Moore { initial_state, memory, initial, choices, updates } = self else {
            return Err(parse_err(
                "kind",
                "switching strategies have infinite memory and cannot be loaded; use `simulate` on the query instead",
            ));
        };
        let index = state_index(mdp.state_names())?;
        let state = |ctx: String, n: &str| {
            index.get(n).copied().ok_or_else(|| parse_err(ctx, format!("unknown state `{n}`")))
        };
        let action = |ctx: String, s: StateId, n: &str| {
            mdp.action_by_name(s, n)
                .ok_or_else(|| parse_err(ctx, format!("state `{}` has no action `{n}`", mdp.state_name(s))))
        };
        let mem = |ctx: String, m: MemId| {
            if m < memory.len() {
                Ok(m)
            } else {
                Err(parse_err(ctx, format!("memory element {m} out of range")))
            }
        };
        let init = state("initial_state".into(), &initial_state)?;
        let initial = initial
            .iter()
            .enumerate()
            .map(|(i, e)| Ok((mem(format!("initial[{i}]"), e.memory)?, e.prob.clone())))
            .collect::<Result<Vec<_>>>()?;
        let mut next = BTreeMap::new();
        for (i, c) in choices.iter().enumerate() {
            let s = state(format!("choices[{i}].state"), &c.state)?;
            let m = mem(format!("choices[{i}].memory"), c.memory)?;
            let d = c
                .actions
                .iter()
                .map(|a| Ok((action(format!("choices[{i}].actions"), s, &a.action)?, a.prob.clone())))
                .collect::<Result<Vec<_>>>()?;
            next.insert((s, m), d);
        }
        let mut update = BTreeMap::new();
        for (i, u) in updates.iter().enumerate() {
            let s = state(format!("updates[{i}].state"), &u.state)?;
            let a = action(format!("updates[{i}].action"), s, &u.action)?;
            let t = state(format!("updates[{i}].next"), &u.next)?;
            let m = mem(format!("updates[{i}].memory"), u.memory)?;
            let d = u
                .to
                .iter()
                .map(|e| Ok((mem(format!("updates[{i}].to"), e.memory)?, e.prob.clone())))
                .collect::<Result<Vec<_>>>()?;
            update.insert((m, s, a, t), d);
        }
        let strategy = MooreStrategy { init, memory, initial, next, update };
        strategy.validate(mdp)?;
        Ok(strategy)
    }
}

pub fn strategy_to_json(mdp: &WeightedMdp, strategy: &Strategy) -> String {
    serde_json::to_string_pretty(&StrategyFile::from_strategy(mdp, strategy)).expect("strategy serializes")
}

pub fn parse_strategy(text: &str, mdp: &WeightedMdp) -> Result<MooreStrategy> {
    serde_json::from_str::<StrategyFile>(text).map_err(json_err)?.into_moore(mdp)
}

/// Field-by-field description of the three formats, printed by the CLI.
pub const SCHEMAS: &str = r#"model file
  {
    "dimensions": d,
    "states": ["s0", "s1", ...],
    "initial": "s0",
    "actions": [
      {"from": "s0", "name": "a", "weights": [w_1, ..., w_d],
       "to": [{"state": "s1", "prob": "1/2"}, {"state": "s0", "prob": "1/2"}]}
    ]
  }
  weights are integers; probabilities are "num/den" strings or integers and
  sum to 1 per action; every state needs at least one action

query file
  {
    "payoff": "inf" | "sup" | "liminf" | "limsup" | "mp_sup" | "mp_inf"
              | "truncated_sum" | "discounted_sum",
    "epsilon": "1/8",
    "disjuncts": [
      [{"dim": 1, "value": "1/2", "prob": "3/5"}, ...],
      ...
    ]
  }
  each constraint reads P[payoff_dim >= value] >= prob; dimensions count
  from 1; a constraint may carry its own "payoff"; truncated_sum needs
  "target": [state names] and reads P[TS_dim <= value] >= prob ("direction"
  may only be "le"); discounted_sum needs "discount": "num/den" in (0,1)
  and a positive "epsilon"; for mp_inf a positive "epsilon" requests a
  finite witness meeting value - epsilon; for mp_sup it sizes the switching
  schedule. A query holds if some disjunct (a conjunction of constraints of
  one payoff family) holds.

strategy file
  {
    "kind": "moore",
    "initial_state": "s0",
    "memory": ["m0", ...],
    "initial": [{"memory": 0, "prob": "1"}],
    "choices": [{"state": "s0", "memory": 0,
                 "actions": [{"action": "a", "prob": "1/2"}, ...]}],
    "updates": [{"memory": 0, "state": "s0", "action": "a", "next": "s1",
                 "to": [{"memory": 1, "prob": "1"}]}]
  }
  only (state, memory) pairs reachable from the initial state are listed
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;
    use crate::strategy::Memoryless;

    const ST: &str = r#"{
      "dimensions": 2,
      "states": ["s", "t"],
      "initial": "s",
      "actions": [
        {"from": "s", "name": "loop", "weights": [1, 0], "to": [{"state": "s", "prob": 1}]},
        {"from": "s", "name": "go", "weights": [0, 0], "to": [{"state": "t", "prob": "1"}]},
        {"from": "t", "name": "loop", "weights": [0, 1], "to": [{"state": "t", "prob": "1/1"}]},
        {"from": "t", "name": "go", "weights": [0, 0], "to": [{"state": "s", "prob": 1}]}
      ]
    }"#;

    #[test]
    fn parses_the_two_state_model() {
        let m = parse_model(ST).unwrap();
        assert_eq!(m.mdp.num_states(), 2);
        assert_eq!(m.mdp.total_actions(), 4);
        assert_eq!(m.mdp.dims(), 2);
    }

    fn one_action(to: &str) -> String {
        format!(
            r#"{{"dimensions": 1, "states": ["a", "b"], "initial": "a", "actions": [
            {{"from": "a", "name": "x", "weights": [0], "to": {to}}},
            {{"from": "b", "name": "x", "weights": [0], "to": [{{"state": "b", "prob": 1}}]}}]}}"#
        )
    }

    #[test]
    fn thirds_sum_to_one() {
        let ok = one_action(r#"[{"state": "a", "prob": "1/3"}, {"state": "b", "prob": "1/3"}, {"state": "b", "prob": "1/3"}]"#);
        let m = parse_model(&ok).unwrap();
        assert_eq!(m.mdp.action(0, 0).prob_to(1), rat(2, 3));
        let bad = one_action(r#"[{"state": "b", "prob": "2/3"}]"#);
        let e = parse_model(&bad).unwrap_err().to_string();
        assert!(e.contains("actions[0].to") && e.contains("2/3"), "{e}");
    }

    #[test]
    fn rejects_floats_duplicates_and_unknown_states() {
        let e = parse_model(&one_action(r#"[{"state": "b", "prob": 1.0}]"#)).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let dup = ST.replace(r#"["s", "t"]"#, r#"["s", "s"]"#);
        assert!(parse_model(&dup).unwrap_err().to_string().contains("duplicate state name"));
        let unknown = one_action(r#"[{"state": "zz", "prob": 1}]"#);
        assert!(parse_model(&unknown).unwrap_err().to_string().contains("unknown state `zz`"));
    }

    #[test]
    fn fixtures_round_trip() {
        for m in [fixtures::s_t_mp(), fixtures::randomness_lemma(), fixtures::one_state_ab(), fixtures::sp_two_branch()] {
            let back = parse_model(&model_to_json(&m, 0)).unwrap();
            assert_eq!(back.mdp, m);
            assert_eq!(back.init, 0);
        }
    }

    #[test]
    fn query_defaults_and_overrides() {
        let m = parse_model(ST).unwrap();
        let q = parse_query(
            r#"{"payoff": "limsup", "disjuncts": [[{"dim": 1, "value": 1, "prob": 1}, {"dim": 2, "value": "1", "prob": "1"}],
                [{"payoff": "mp_inf", "dim": 2, "value": "1/2", "prob": "3/5"}]]}"#,
            &m,
        )
        .unwrap();
        assert_eq!(q.query.disjuncts[0][1].dim, 1);
        assert_eq!(q.query.disjuncts[0][1].kind, PayoffKind::LimSup);
        assert_eq!(q.query.disjuncts[1][0].kind, PayoffKind::MpInf);
        let back = QueryFile::from_query(&m.mdp, &q.query, None);
        let text = serde_json::to_string(&back).unwrap();
        assert_eq!(parse_query(&text, &m).unwrap(), q);
    }

    #[test]
    fn query_errors() {
        let m = parse_model(ST).unwrap();
        let ge = r#"{"payoff": "truncated_sum", "disjuncts": [[{"dim": 1, "value": 1, "prob": 1, "target": ["t"], "direction": "ge"}]]}"#;
        assert!(parse_query(ge, &m).unwrap_err().to_string().contains("not supported"));
        let dim = r#"{"payoff": "sup", "disjuncts": [[{"dim": 0, "value": 1, "prob": 1}]]}"#;
        assert!(parse_query(dim, &m).unwrap_err().to_string().contains("dim"));
        let mixed = r#"{"disjuncts": [[{"payoff": "sup", "dim": 1, "value": 1, "prob": 1}, {"payoff": "mp_inf", "dim": 1, "value": 1, "prob": 1}]]}"#;
        assert!(parse_query(mixed, &m).unwrap_err().to_string().contains("mix"));
        let missing = r#"{"payoff": "discounted_sum", "disjuncts": [[{"dim": 1, "value": 1, "prob": 1}]]}"#;
        assert!(parse_query(missing, &m).unwrap_err().to_string().contains("discount"));
    }

    #[test]
    fn strategy_round_trip() {
        let m = fixtures::randomness_lemma();
        let coin = Memoryless { choice: vec![vec![(0, rat(1, 2)), (1, rat(1, 2))], vec![], vec![]] };
        let st = MooreStrategy::from_policy(&m, &coin, 0).unwrap();
        let text = strategy_to_json(&m, &Strategy::Finite(st.clone()));
        assert_eq!(parse_strategy(&text, &m).unwrap(), st);
        let broken = text.replace("\"1/2\"", "\"1/3\"");
        assert!(parse_strategy(&broken, &m).is_err());
    }
}
