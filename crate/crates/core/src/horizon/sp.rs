use crate::error::{Error, Result};
use crate::lift::{explore_product, Product, ProductLift};
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::query::{MultiReachQuery, PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::reach::{absorbing_multi_reach, general_multi_reach, FlowSolution};
use crate::strategy::{MooreStrategy, MAX_CHAIN_STATES};

/// Product of the MDP with one saturating sum counter per dimension used by
/// the query.
#[derive(Debug, Clone)]
pub struct CounterProduct {
    pub product: Product,
    /// Tracked dimensions, in counter order.
    pub dims: Vec<usize>,
    /// Saturation value per tracked dimension (largest threshold plus one).
    pub caps: Vec<i64>,
    /// Counter vector per product tag.
    pub counters: Vec<Vec<i64>>,
    /// Product states where constraint `i` is met: origin in `T_i` and
    /// counter at most `v_i`.
    pub accept: Vec<StateSet>,
    /// All constraints share one target, whose states were made absorbing.
    pub stops_at_target: bool,
}

impl CounterProduct {
    pub fn counter(&self, p: StateId, dim: usize) -> Option<i64> {
        let j = self.dims.iter().position(|d| *d == dim)?;
        Some(self.counters[self.product.tag[p]][j])
    }
}

fn threshold_floor(c: &PercentileConstraint) -> Result<i64> {
    c.value.floor_i64().ok_or_else(|| Error::TooLarge(format!("threshold {} does not fit a counter", c.value)))
}

pub fn sp_build_product(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<CounterProduct> {
    if let Some(c) = constraints.iter().find(|c| c.kind != PayoffKind::TruncatedSum) {
        return Err(Error::InvalidQuery(format!("expected truncated_sum constraints, found {}", c.kind)));
    }
    if let Some((s, a)) = mdp.has_negative_weight() {
        return Err(Error::NegativeWeight { state: s, action: mdp.action(s, a).name.clone() });
    }
    let mut dims: Vec<usize> = constraints.iter().map(|c| c.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut caps = vec![0i64; dims.len()];
    let mut floors = Vec::with_capacity(constraints.len());
    for c in constraints {
        let f = threshold_floor(c)?;
        floors.push(f);
        let j = dims.binary_search(&c.dim).expect("tracked dim");
        caps[j] = caps[j].max(f.max(-1).saturating_add(1));
    }
    let n = mdp.num_states();
    let targets: Vec<StateSet> = constraints.iter().map(|c| c.target_set(n)).collect();
    let stops_at_target = targets.windows(2).all(|w| w[0] == w[1]);
    let (product, counters) = explore_product(
        mdp,
        init,
        vec![0i64; dims.len()],
        |s, a, x| {
            let act = mdp.action(s, a);
            x.iter().enumerate().map(|(j, v)| (v + act.weight(dims[j])).min(caps[j])).collect()
        },
        |s, _| stops_at_target && targets[0].contains(s),
        |x| format!("{x:?}"),
        MAX_CHAIN_STATES,
    )?;
    let total = product.num_states();
    let accept = constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let j = dims.binary_search(&c.dim).expect("tracked dim");
            StateSet::from_states(
                total,
                (0..total).filter(|p| {
                    let s = product.origin[*p].expect("counter product states have origins");
                    targets[i].contains(s) && counters[product.tag[*p]][j] <= floors[i]
                }),
            )
        })
        .collect();
    Ok(CounterProduct { product, dims, caps, counters, accept, stops_at_target })
}

#[derive(Debug, Clone)]
pub struct SpSolution {
    pub strategy: MooreStrategy,
    pub flow: FlowSolution,
    pub product_states: usize,
}

/// `P[TS_{T_i} ≤ v_i] ≥ α_i` for all `i`, with non-negative weights.
/// Counters only grow, so the first visit to `T_i` meets the bound iff some
/// visit does, and each constraint becomes reaching its accept set.
pub fn sp_solve(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<Option<SpSolution>> {
    let cp = sp_build_product(mdp, init, constraints)?;
    let thresholds: Vec<Rational> = constraints.iter().map(|c| c.prob.clone()).collect();
    let query = MultiReachQuery::new(cp.accept.clone(), thresholds);
    let pm = &cp.product.mdp;
    let product_states = cp.product.num_states();
    if cp.stops_at_target {
        let Some(flow) = absorbing_multi_reach(pm, cp.product.init, &query)? else {
            return Ok(None);
        };
        let lift = ProductLift { product: cp.product, inner: flow.strategy.clone() };
        let strategy = MooreStrategy::from_policy(mdp, &lift, init)?;
        return Ok(Some(SpSolution { strategy, flow, product_states }));
    }
    let Some((inner, flow)) = general_multi_reach(pm, cp.product.init, &query)? else {
        return Ok(None);
    };
    let product_states = product_states.max(inner.product.num_states());
    let lift = ProductLift { product: cp.product, inner };
    let strategy = MooreStrategy::from_policy(mdp, &lift, init)?;
    Ok(Some(SpSolution { strategy, flow, product_states }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::rat;
    use crate::strategy::policy_chain;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn ts(v: Rational, p: Rational, target: Vec<StateId>) -> PercentileConstraint {
        PercentileConstraint::new(PayoffKind::TruncatedSum, 0, v, p).with_target(target)
    }

    fn branch() -> WeightedMdp {
        fixtures::sp_two_branch()
    }

    #[test]
    fn chain_counter_reaches_accept() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "t"]);
        b.add_edge(s[0], "x", &[2], s[1]);
        b.add_edge(s[1], "l", &[0], s[1]);
        let m = b.build().unwrap();
        let cp = sp_build_product(&m, 0, &[ts(r(2), r(1), vec![1])]).unwrap();
        let hit: Vec<_> = cp.accept[0].iter().collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(cp.counter(hit[0], 0), Some(2));
    }

    #[test]
    fn branch_accepts_only_the_light_side() {
        let m = branch();
        let cp = sp_build_product(&m, 0, &[ts(r(1), r(1), vec![3])]).unwrap();
        let hit: Vec<_> = cp.accept[0].iter().collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(cp.counter(hit[0], 0), Some(1));
        assert!(sp_solve(&m, 0, &[ts(r(1), rat(1, 2), vec![3])]).unwrap().is_some());
        assert!(sp_solve(&m, 0, &[ts(r(1), rat(3, 5), vec![3])]).unwrap().is_none());
    }

    #[test]
    fn negative_weight_rejected() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "x", &[-1], s);
        let m = b.build().unwrap();
        let e = sp_build_product(&m, 0, &[ts(r(1), r(1), vec![0])]).unwrap_err();
        assert!(matches!(e, Error::NegativeWeight { .. }));
        assert!(e.to_string().contains("mixed-sign shortest path is undecidable; rejected"));
    }

    #[test]
    fn unreachable_target() {
        let m = branch();
        assert!(sp_solve(&m, 1, &[ts(r(5), rat(1, 10), vec![2])]).unwrap().is_none());
        assert!(sp_solve(&m, 1, &[ts(r(5), r(0), vec![2])]).unwrap().is_some());
    }

    #[test]
    fn two_deadlines_on_one_target() {
        let m = fixtures::sp_two_branch();
        let t = m.state_by_name("t").unwrap();
        let out = sp_solve(&m, 0, &[ts(r(2), rat(1, 2), vec![t]), ts(r(6), rat(19, 20), vec![t])]).unwrap();
        let sol = out.expect("both deadlines feasible");
        assert!(policy_chain(&m, &sol.strategy, 0).is_ok());
    }

    #[test]
    fn distinct_targets_use_the_visit_product() {
        let m = branch();
        let cs = [ts(r(0), rat(1, 2), vec![1]), ts(r(3), rat(1, 2), vec![3])];
        let cp = sp_build_product(&m, 0, &cs).unwrap();
        assert!(!cp.stops_at_target);
        assert!(sp_solve(&m, 0, &cs).unwrap().is_some());
    }
}
