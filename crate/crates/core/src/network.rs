//! Binary Bayesian networks: parsing, validation, joint evaluation and
//! ancestral sampling.
//!
//! Every variable takes values in `{0, 1}`. A CPT stores `P(child = 1)` for
//! each parent configuration; configuration `k` assigns parent `b` (in the
//! declared parent order) the value of bit `b` of `k`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::PlanCache;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub index: usize,
}

/// Conditional probability table `P(child = 1 | parents)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: usize,
    pub parents: Vec<usize>,
    pub p_one: Vec<f64>,
}

impl Cpt {
    /// Index of the parent configuration read off a full joint state given as
    /// a bitmask (bit `j` holds `x_j`).
    #[inline]
    pub fn config_of_state(&self, state: usize) -> usize {
        self.parents
            .iter()
            .enumerate()
            .fold(0, |k, (b, &p)| k | (((state >> p) & 1) << b))
    }

    #[inline]
    pub fn config_of(&self, x: &Assignment) -> usize {
        self.parents
            .iter()
            .enumerate()
            .fold(0, |k, (b, &p)| k | ((x.get(p) as usize) << b))
    }

    /// `P(child = value | parent config k)`.
    #[inline]
    pub fn prob(&self, config: usize, value: bool) -> f64 {
        let p = self.p_one[config];
        if value {
            p
        } else {
            1.0 - p
        }
    }

    /// The family scope `parents ++ [child]`.
    pub fn family(&self) -> Vec<usize> {
        let mut f = self.parents.clone();
        f.push(self.child);
        f
    }
}

/// A full joint assignment `x = (x_1, ..., x_N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Decodes a bitmask state with bit `j` holding `x_j`.
    pub fn from_state(state: usize, n: usize) -> Self {
        Self((0..n).map(|j| (state >> j) & 1 == 1).collect())
    }

    pub fn to_state(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |s, (j, &v)| s | ((v as usize) << j))
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.0[j] = value;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableDoc {
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CptDoc {
    pub child: String,
    pub parents: Vec<String>,
    pub p_one: Vec<f64>,
}

/// Serialized network document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub variables: Vec<VariableDoc>,
    pub cpts: Vec<CptDoc>,
}

/// A validated, immutable binary Bayesian network.
#[derive(Debug, Clone)]
pub struct BayesNet {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    plans: PlanCache,
}

impl BayesNet {
    /// Builds a network from variable names and one CPT per variable, in any
    /// order. Validates arity, ranges and acyclicity.
    pub fn new(names: Vec<String>, cpts: Vec<Cpt>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateVariable(name.clone()));
            }
        }
        let mut slots: Vec<Option<Cpt>> = vec![None; n];
        for cpt in cpts {
            let child = cpt.child;
            if child >= n {
                return Err(Error::UnknownVariable(format!("#{child}")));
            }
            if slots[child].is_some() {
                return Err(Error::DuplicateCpt(names[child].clone()));
            }
            for (a, &p) in cpt.parents.iter().enumerate() {
                if p >= n {
                    return Err(Error::UnknownVariable(format!("#{p}")));
                }
                if p == child {
                    return Err(Error::Cycle(names[child].clone()));
                }
                if cpt.parents[..a].contains(&p) {
                    return Err(Error::DuplicateParent {
                        child: names[child].clone(),
                        parent: names[p].clone(),
                    });
                }
            }
            let expected = 1usize << cpt.parents.len();
            if cpt.p_one.len() != expected {
                return Err(Error::CptArity {
                    child: names[child].clone(),
                    expected,
                    found: cpt.p_one.len(),
                });
            }
            if let Some((index, &value)) = cpt
                .p_one
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::ProbabilityRange {
                    child: names[child].clone(),
                    index,
                    value,
                });
            }
            slots[child] = Some(cpt);
        }
        let cpts = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::MissingCpt(names[i].clone())))
            .collect::<Result<Vec<_>>>()?;

        let mut children = vec![Vec::new(); n];
        for cpt in &cpts {
            for &p in &cpt.parents {
                children[p].push(cpt.child);
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }

        let order = kahn_order(&cpts, &children).map_err(|j| Error::Cycle(names[j].clone()))?;
        let variables = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| Variable { name, index })
            .collect();
        Ok(Self {
            plans: PlanCache::new(n),
            variables,
            cpts,
            children,
            order,
        })
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        let names: Vec<String> = doc.variables.iter().map(|v| v.name.clone()).collect();
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))
        };
        let cpts = doc
            .cpts
            .iter()
            .map(|c| {
                Ok(Cpt {
                    child: lookup(&c.child)?,
                    parents: c.parents.iter().map(|p| lookup(p)).collect::<Result<_>>()?,
                    p_one: c.p_one.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names, cpts)
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            variables: self
                .variables
                .iter()
                .map(|v| VariableDoc {
                    name: v.name.clone(),
                })
                .collect(),
            cpts: self
                .cpts
                .iter()
                .map(|c| CptDoc {
                    child: self.name(c.child).to_string(),
                    parents: c.parents.iter().map(|&p| self.name(p).to_string()).collect(),
                    p_one: c.p_one.clone(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn name(&self, j: usize) -> &str {
        &self.variables[j].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn cpt(&self, j: usize) -> &Cpt {
        &self.cpts[j]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub(crate) fn plan_cache(&self) -> &PlanCache {
        &self.plans
    }

    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    /// Parents, children and the children's other parents of `j`, sorted.
    pub fn markov_blanket(&self, j: usize) -> Vec<usize> {
        let mut blanket: Vec<usize> = self.cpts[j].parents.clone();
        for &c in &self.children[j] {
            blanket.push(c);
            blanket.extend(self.cpts[c].parents.iter().copied().filter(|&p| p != j));
        }
        blanket.sort_unstable();
        blanket.dedup();
        blanket
    }

    /// Variables ordered so each appears after all its parents; ties go to the
    /// lowest index.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// `P(x) = prod_j P(x_j | parents_j)`.
    pub fn joint_probability(&self, x: &Assignment) -> f64 {
        self.cpts
            .iter()
            .map(|c| c.prob(c.config_of(x), x.get(c.child)))
            .product()
    }

    /// Joint probability of a bitmask state.
    #[inline]
    pub fn joint_of_state(&self, state: usize) -> f64 {
        let mut p = 1.0;
        for c in &self.cpts {
            p *= c.prob(c.config_of_state(state), (state >> c.child) & 1 == 1);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Draws one assignment in topological order using the given seed.
    pub fn ancestral_sample(&self, seed: u64) -> Assignment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut x = Assignment::zeros(self.len());
        for &j in &self.order {
            let c = &self.cpts[j];
            let p = c.p_one[c.config_of(&x)];
            // gen::<f64>() is in [0, 1), so p = 0 never fires and p = 1 always does
            x.set(j, rng.gen::<f64>() < p);
        }
        x
    }

    /// Draws `count` assignments from one seeded stream.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<Assignment> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_with(&mut rng)).collect()
    }
}

/// Parses a JSON network document.
pub fn parse_network(text: &str) -> Result<BayesNet> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    BayesNet::from_doc(&doc)
}

fn kahn_order(cpts: &[Cpt], children: &[Vec<usize>]) -> std::result::Result<Vec<usize>, usize> {
    let n = cpts.len();
    let mut indegree: Vec<usize> = cpts.iter().map(|c| c.parents.len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&j| indegree[j] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(j)) = ready.pop() {
        order.push(j);
        for &c in &children[j] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&j| indegree[j] > 0).unwrap_or(0);
        return Err(stuck);
    }
    Ok(order)
}
