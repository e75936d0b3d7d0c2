//! Exact sums over a binary Bayesian network.
//!
//! Everything here reduces to one primitive: the weighted sum
//!
//! ```text
//! S(A, f) = sum_x prod_j P(x_j | parents_j)^A * f_j(x_j)
//! ```
//!
//! evaluated by variable elimination over the factor set
//! `{ P(x_j | parents_j)^A * f_j(x_j) }`. The sum keeps the network's
//! factorization, so the elimination cost is that of ordinary inference.
//! Evidence is a special case with indicator weights. Powers `A >= 2` give an
//! unnormalized product, and no step here renormalizes it.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::network::BayesNet;

/// Largest network `brute_force_sum` will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Exponent `A` and per-variable weights `(f_j(0), f_j(1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSumQuery {
    exponent: u32,
    weights: Vec<[f64; 2]>,
}

impl FactorSumQuery {
    pub fn new(exponent: u32, weights: Vec<[f64; 2]>) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::InvalidConfig("exponent must be at least 1".into()));
        }
        if weights.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { exponent, weights })
    }

    /// All weights one.
    pub fn ones(exponent: u32, n: usize) -> Self {
        Self {
            exponent: exponent.max(1),
            weights: vec![[1.0, 1.0]; n],
        }
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn weights(&self) -> &[[f64; 2]] {
        &self.weights
    }

    pub fn weight_mut(&mut self, j: usize) -> &mut [f64; 2] {
        &mut self.weights[j]
    }

    /// Multiplies indicator weights for the evidence into the query.
    pub fn with_evidence(mut self, e: &Evidence) -> Self {
        for (&j, &v) in e.iter() {
            self.weights[j][!v as usize] = 0.0;
        }
        self
    }
}

/// Observed values for a subset of the variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence(BTreeMap<usize, bool>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, bool)>>(pairs: I) -> Self {
        Self(pairs.into_iter().collect())
    }

    /// Resolves `name -> value` pairs against the network.
    pub fn from_names<'a, I>(net: &BayesNet, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, bool)>,
    {
        pairs
            .into_iter()
            .map(|(name, v)| {
                net.index_of(name)
                    .map(|j| (j, v))
                    .ok_or_else(|| Error::UnknownVariable(name.to_string()))
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map(Self)
    }

    pub fn insert(&mut self, j: usize, value: bool) {
        self.0.insert(j, value);
    }

    pub fn get(&self, j: usize) -> Option<bool> {
        self.0.get(&j).copied()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains_key(&j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &bool)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two evidence sets; `other` wins on conflicts.
    pub fn union(&self, other: &Evidence) -> Evidence {
        let mut m = self.0.clone();
        m.extend(other.0.iter().map(|(&k, &v)| (k, v)));
        Evidence(m)
    }

    /// Whether a bitmask state agrees with the evidence.
    pub fn matches_state(&self, state: usize) -> bool {
        self.0.iter().all(|(&j, &v)| ((state >> j) & 1 == 1) == v)
    }
}

/// Parses an evidence document: a JSON object mapping variable name to 0 or 1.
pub fn parse_evidence(net: &BayesNet, text: &str) -> Result<Evidence> {
    let raw: HashMap<String, serde_json::Value> = serde_json::from_str(text)?;
    let mut e = Evidence::new();
    for (name, value) in raw {
        let j = net
            .index_of(&name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        let v = match value.as_u64() {
            Some(0) => false,
            Some(1) => true,
            _ => match value.as_bool() {
                Some(b) => b,
                None => return Err(Error::EvidenceValue(name)),
            },
        };
        e.insert(j, v);
    }
    Ok(e)
}

/// Scope bookkeeping for one product-then-sum step of the elimination.
#[derive(Debug)]
struct Step {
    inputs: Vec<usize>,
    /// `maps[k][idx]` is the index into input `k` for product index `idx`.
    maps: Vec<Vec<u32>>,
    product_bits: usize,
    /// Bit of the eliminated variable in the product scope; `None` for the
    /// final product that is not summed.
    sum_bit: Option<usize>,
}

/// A precompiled elimination for one network structure and one kept variable.
/// Only the structure is stored; query values are supplied at run time.
#[derive(Debug)]
pub(crate) struct Plan {
    /// Per family factor, `(parent config, child value)` of every table index.
    decode: Vec<Vec<(usize, bool)>>,
    steps: Vec<Step>,
}

/// Per-network cache of elimination plans, indexed by kept variable (the
/// last slot is for full sums).
#[derive(Debug, Default)]
pub(crate) struct PlanCache(Vec<std::sync::OnceLock<Plan>>);

impl Clone for PlanCache {
    fn clone(&self) -> Self {
        Self::new(self.0.len().saturating_sub(1))
    }
}

impl PlanCache {
    pub(crate) fn new(n: usize) -> Self {
        Self((0..=n).map(|_| std::sync::OnceLock::new()).collect())
    }
}

fn local_map(sub: &[usize], scope: &[usize]) -> Vec<u32> {
    let pos: Vec<usize> = sub.iter().map(|v| scope.binary_search(v).unwrap()).collect();
    (0..1usize << scope.len())
        .map(|idx| {
            pos.iter()
                .enumerate()
                .fold(0, |k, (b, &p)| k | (((idx >> p) & 1) << b)) as u32
        })
        .collect()
}

fn union_scope<'a, I: Iterator<Item = &'a Vec<usize>>>(scopes: I) -> Vec<usize> {
    let mut scope: Vec<usize> = scopes.flat_map(|s| s.iter().copied()).collect();
    scope.sort_unstable();
    scope.dedup();
    scope
}

impl Plan {
    /// Min-degree elimination with lowest-index tie-break, never eliminating
    /// `keep`.
    fn build(net: &BayesNet, keep: Option<usize>) -> Plan {
        let n = net.len();
        let mut decode = Vec::with_capacity(n);
        // live factors: (slot id, sorted scope)
        let mut live: Vec<(usize, Vec<usize>)> = Vec::with_capacity(n);
        for cpt in net.cpts() {
            let family = cpt.family();
            let mut scope = family.clone();
            scope.sort_unstable();
            let pos: Vec<usize> = family.iter().map(|v| scope.binary_search(v).unwrap()).collect();
            let child_bit = pos[pos.len() - 1];
            decode.push(
                (0..1usize << scope.len())
                    .map(|idx| {
                        let config = pos[..pos.len() - 1]
                            .iter()
                            .enumerate()
                            .fold(0, |k, (b, &p)| k | (((idx >> p) & 1) << b));
                        (config, (idx >> child_bit) & 1 == 1)
                    })
                    .collect(),
            );
            live.push((cpt.child, scope));
        }
        let mut next_slot = n;
        let mut steps = Vec::new();
        let mut remaining: Vec<usize> = (0..n).filter(|&v| Some(v) != keep).collect();
        while !remaining.is_empty() {
            let (slot, var) = remaining
                .iter()
                .enumerate()
                .map(|(slot, &v)| {
                    let touching = live.iter().filter(|(_, s)| s.binary_search(&v).is_ok());
                    let degree = union_scope(touching.map(|(_, s)| s)).len() - 1;
                    (degree, v, slot)
                })
                .min()
                .map(|(_, v, slot)| (slot, v))
                .unwrap();
            remaining.remove(slot);
            let (with, without): (Vec<_>, Vec<_>) =
                live.into_iter().partition(|(_, s)| s.binary_search(&var).is_ok());
            // every variable stays in the scope of its own family factor until eliminated
            debug_assert!(!with.is_empty());
            let scope = union_scope(with.iter().map(|(_, s)| s));
            let sum_bit = scope.binary_search(&var).unwrap();
            steps.push(Step {
                inputs: with.iter().map(|(id, _)| *id).collect(),
                maps: with.iter().map(|(_, s)| local_map(s, &scope)).collect(),
                product_bits: scope.len(),
                sum_bit: Some(sum_bit),
            });
            live = without;
            live.push((next_slot, scope.into_iter().filter(|&v| v != var).collect()));
            next_slot += 1;
        }
        let scope = union_scope(live.iter().map(|(_, s)| s));
        steps.push(Step {
            inputs: live.iter().map(|(id, _)| *id).collect(),
            maps: live.iter().map(|(_, s)| local_map(s, &scope)).collect(),
            product_bits: scope.len(),
            sum_bit: None,
        });
        Plan { decode, steps }
    }

    /// Runs the elimination; returns the final table (length 1 for a full
    /// sum, 2 when a variable is kept).
    fn run(&self, net: &BayesNet, q: &FactorSumQuery) -> Vec<f64> {
        let mut slots: Vec<Vec<f64>> = Vec::with_capacity(self.decode.len() + self.steps.len());
        for (cpt, decode) in net.cpts().iter().zip(&self.decode) {
            let w = q.weights[cpt.child];
            slots.push(
                decode
                    .iter()
                    .map(|&(config, value)| {
                        cpt.prob(config, value).powi(q.exponent as i32) * w[value as usize]
                    })
                    .collect(),
            );
        }
        let mut last = vec![1.0];
        for step in &self.steps {
            let size = 1usize << step.product_bits;
            let mut product = vec![1.0; size];
            for (input, map) in step.inputs.iter().zip(&step.maps) {
                let table = &slots[*input];
                for (p, &k) in product.iter_mut().zip(map) {
                    *p *= table[k as usize];
                }
            }
            last = match step.sum_bit {
                Some(bit) => {
                    let low = (1usize << bit) - 1;
                    (0..size / 2)
                        .map(|k| {
                            let base = (k & low) | ((k & !low) << 1);
                            product[base] + product[base | (1 << bit)]
                        })
                        .collect()
                }
                None => product,
            };
            if step.sum_bit.is_some() {
                slots.push(std::mem::take(&mut last));
            }
        }
        last
    }
}

fn run_plan(net: &BayesNet, q: &FactorSumQuery, keep: Option<usize>) -> Vec<f64> {
    assert_eq!(q.weights.len(), net.len(), "one weight pair per variable");
    let cache = net.plan_cache();
    let slot = keep.unwrap_or(net.len());
    cache.0[slot].get_or_init(|| Plan::build(net, keep)).run(net, q)
}

/// `sum_x prod_j P(x_j | parents_j)^A f_j(x_j)` by variable elimination.
pub fn factored_weighted_sum(net: &BayesNet, q: &FactorSumQuery) -> f64 {
    run_plan(net, q, None)[0]
}

/// The same sum split by the value of `x_j`: returns `[S|x_j=0, S|x_j=1]`.
pub fn factored_weighted_split(net: &BayesNet, q: &FactorSumQuery, j: usize) -> [f64; 2] {
    let t = run_plan(net, q, Some(j));
    [t[0], t[1]]
}

/// `P(e)`.
pub fn evidence_probability(net: &BayesNet, e: &Evidence) -> f64 {
    factored_weighted_sum(net, &FactorSumQuery::ones(1, net.len()).with_evidence(e))
}

/// `P(x_j = 1 | e)` for an unobserved `j`.
pub fn posterior_marginal(net: &BayesNet, e: &Evidence, j: usize) -> Result<f64> {
    if e.contains(j) {
        return Err(Error::ObservedQuery(j));
    }
    let [w0, w1] =
        factored_weighted_split(net, &FactorSumQuery::ones(1, net.len()).with_evidence(e), j);
    let z = w0 + w1;
    if z <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    Ok(w1 / z)
}

/// `P(x_j = 1 | e)` for every variable; observed variables report their
/// observed value.
pub fn posterior_marginals(net: &BayesNet, e: &Evidence) -> Result<Vec<f64>> {
    if evidence_probability(net, e) <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    (0..net.len())
        .map(|j| match e.get(j) {
            Some(v) => Ok(v as u8 as f64),
            None => posterior_marginal(net, e, j),
        })
        .collect()
}

/// Prior marginals `P(x_j = 1)`.
pub fn marginals(net: &BayesNet) -> Vec<f64> {
    posterior_marginals(net, &Evidence::new()).expect("empty evidence has probability one")
}

/// Literal enumeration of all `2^N` assignments. Test oracle.
pub fn brute_force_sum(net: &BayesNet, q: &FactorSumQuery) -> Result<f64> {
    let n = net.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut total = 0.0;
    for state in 0..1usize << n {
        let mut term = net.joint_of_state(state).powi(q.exponent as i32);
        for (j, w) in q.weights.iter().enumerate() {
            term *= w[(state >> j) & 1];
        }
        total += term;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::chest_clinic;
    use crate::network::parse_network;

    fn coins() -> BayesNet {
        parse_network(
            r#"{"variables":[{"name":"a"},{"name":"b"}],
                "cpts":[{"child":"a","parents":[],"p_one":[0.5]},{"child":"b","parents":[],"p_one":[0.5]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn normalization() {
        let net = chest_clinic();
        let s = factored_weighted_sum(&net, &FactorSumQuery::ones(1, 8));
        assert!((s - 1.0).abs() < 1e-12);
        assert!((brute_force_sum(&net, &FactorSumQuery::ones(1, 8)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squared_uniform_joint() {
        let s = factored_weighted_sum(&coins(), &FactorSumQuery::ones(2, 2));
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cubed_single_fair_coin() {
        let net = parse_network(
            r#"{"variables":[{"name":"a"}],"cpts":[{"child":"a","parents":[],"p_one":[0.5]}]}"#,
        )
        .unwrap();
        assert!((brute_force_sum(&net, &FactorSumQuery::ones(3, 1)).unwrap() - 0.25).abs() < 1e-15);
        assert!((factored_weighted_sum(&net, &FactorSumQuery::ones(3, 1)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn asia_and_positive_xray_is_rare() {
        let net = chest_clinic();
        let e = Evidence::from_names(&net, [("asia", true), ("xray", true)]).unwrap();
        let mut q = FactorSumQuery::ones(1, 8);
        q.weight_mut(0)[0] = 0.0;
        q.weight_mut(6)[0] = 0.0;
        let p = factored_weighted_sum(&net, &q);
        assert!((p - 0.0015).abs() < 1e-4, "{p}");
        assert!((evidence_probability(&net, &e) - p).abs() < 1e-15);
    }

    #[test]
    fn evidence_probability_basics() {
        let net = chest_clinic();
        assert!((evidence_probability(&net, &Evidence::new()) - 1.0).abs() < 1e-12);
        let single = parse_network(
            r#"{"variables":[{"name":"x"}],"cpts":[{"child":"x","parents":[],"p_one":[0.37]}]}"#,
        )
        .unwrap();
        let e = Evidence::from_pairs([(0, true)]);
        assert!((evidence_probability(&single, &e) - 0.37).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_evidence_errors() {
        let net = chest_clinic();
        // either = 0 while tub = 1 is impossible under the OR node
        let e = Evidence::from_names(&net, [("tub", true), ("either", false)]).unwrap();
        assert!(matches!(
            posterior_marginal(&net, &e, 0),
            Err(Error::ZeroProbabilityEvidence)
        ));
        assert!(posterior_marginals(&net, &e).is_err());
    }

    #[test]
    fn observed_query_is_rejected() {
        let net = chest_clinic();
        let e = Evidence::from_pairs([(0, true)]);
        assert!(matches!(posterior_marginal(&net, &e, 0), Err(Error::ObservedQuery(0))));
    }

    #[test]
    fn split_sums_to_total() {
        let net = chest_clinic();
        let mut q = FactorSumQuery::ones(2, 8);
        *q.weight_mut(3) = [0.3, 0.9];
        let total = factored_weighted_sum(&net, &q);
        for j in 0..8 {
            let [a, b] = factored_weighted_split(&net, &q, j);
            assert!(((a + b) - total).abs() < 1e-15);
        }
    }

    #[test]
    fn evidence_document() {
        let net = chest_clinic();
        let e = parse_evidence(&net, r#"{"dysp": 1, "smoker": 0}"#).unwrap();
        assert_eq!(e.get(7), Some(true));
        assert_eq!(e.get(1), Some(false));
        assert!(parse_evidence(&net, r#"{"nope": 1}"#).is_err());
        assert!(parse_evidence(&net, r#"{"dysp": 2}"#).is_err());
        assert!(parse_evidence(&net, "{}").unwrap().is_empty());
    }

    #[test]
    fn negative_weights_are_rejected() {
        assert!(FactorSumQuery::new(1, vec![[-1.0, 1.0]]).is_err());
        assert!(FactorSumQuery::new(0, vec![[1.0, 1.0]]).is_err());
    }

    #[test]
    fn brute_force_guard() {
        let names: Vec<String> = (0..26).map(|i| format!("v{i}")).collect();
        let cpts = (0..26)
            .map(|i| crate::network::Cpt { child: i, parents: vec![], p_one: vec![0.5] })
            .collect();
        let net = BayesNet::new(names, cpts).unwrap();
        assert!(matches!(
            brute_force_sum(&net, &FactorSumQuery::ones(1, 26)),
            Err(Error::TooLarge { .. })
        ));
        // the factored route has no such limit
        assert!((factored_weighted_sum(&net, &FactorSumQuery::ones(1, 26)) - 1.0).abs() < 1e-12);
    }
}
