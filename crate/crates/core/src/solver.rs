//! Exact optimal winning probabilities by recursion over partial assignments.
//!
//! For a fixed challenge the solver works with unnormalised weights
//! `w(f) * Pr[ch | f]`; the value of a node is the best of answering now or
//! spending one query, and the optimal winning probability is the sum of the
//! per-challenge root values. Ties prefer querying over answering and
//! otherwise the smallest position or answer index.

use std::collections::HashMap;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::Result;
use crate::game::{multi_challenge, Game, OracleTable, Term};
use crate::ratio::Rational;

const UNSET: u32 = u32::MAX;

/// A deterministic adaptive query algorithm for a single oracle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyTree {
    Output(Term),
    /// No answer exists in the game's answer space; always loses.
    Abstain,
    Query {
        position: usize,
        branches: Vec<StrategyTree>,
    },
}

impl StrategyTree {
    /// Longest root-to-leaf query count.
    pub fn depth(&self) -> usize {
        match self {
            StrategyTree::Query { branches, .. } => {
                1 + branches.iter().map(|b| b.depth()).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Runs the tree against a table and returns the output, if any.
    pub fn run<'a>(&'a self, oracle: &[u32]) -> Option<&'a Term> {
        let mut node = self;
        loop {
            match node {
                StrategyTree::Output(a) => return Some(a),
                StrategyTree::Abstain => return None,
                StrategyTree::Query { position, branches } => {
                    node = &branches[oracle[*position] as usize]
                }
            }
        }
    }
}

/// One tree per challenge, indexed like `game.challenges()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub per_challenge: Vec<StrategyTree>,
}

impl Strategy {
    pub fn depth(&self) -> usize {
        self.per_challenge
            .iter()
            .map(StrategyTree::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn wins(&self, game: &Game, oracle: &[u32], ch: usize) -> bool {
        match self.per_challenge[ch].run(oracle) {
            Some(a) => game.evaluate(oracle, &game.challenges()[ch], a),
            None => false,
        }
    }
}

/// Memo table keyed by (partial assignment, remaining queries).
#[derive(Default, Debug)]
pub struct ValueCache {
    map: HashMap<(Vec<u32>, usize), Rational>,
}

impl ValueCache {
    pub fn len(&self) -> usize {
        self.map.len()
    }
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
    pub fn clear(&mut self) {
        self.map.clear();
    }
}

/// Solver for one challenge-conditioned instance with unnormalised weights.
struct Instance<'g> {
    game: &'g Game,
    ch: Term,
    members: Vec<(usize, Rational)>,
    cache: ValueCache,
}

impl<'g> Instance<'g> {
    fn new(game: &'g Game, ch: usize, members: Vec<(usize, Rational)>) -> Self {
        Instance {
            game,
            ch: game.challenges()[ch].clone(),
            members,
            cache: ValueCache::default(),
        }
    }

    fn oracle(&self, m: usize) -> &OracleTable {
        &self.game.oracles()[self.members[m].0]
    }

    fn best_answer(&self, live: &[usize]) -> (Rational, Option<usize>) {
        let mut best = (Rational::zero(), None);
        for (ai, a) in self.game.answers().iter().enumerate() {
            let mut w = Rational::zero();
            for &m in live {
                if self.game.evaluate(&self.oracle(m).values, &self.ch, a) {
                    w += &self.members[m].1;
                }
            }
            if best.1.is_none() || w > best.0 {
                best = (w, Some(ai));
            }
        }
        best
    }

    fn split(&self, live: &[usize], x: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.game.range() as usize];
        for &m in live {
            groups[self.oracle(m).values[x] as usize].push(m);
        }
        groups
    }

    /// Best query and its value, first maximiser by position.
    fn best_query(
        &mut self,
        u: &mut Vec<u32>,
        live: &[usize],
        t: usize,
    ) -> Option<(Rational, usize)> {
        let mut best: Option<(Rational, usize)> = None;
        for x in 0..u.len() {
            if u[x] != UNSET {
                continue;
            }
            let mut sum = Rational::zero();
            for (y, group) in self.split(live, x).into_iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                u[x] = y as u32;
                sum += self.value(u, &group, t - 1);
                u[x] = UNSET;
            }
            if best.as_ref().is_none_or(|(b, _)| sum > *b) {
                best = Some((sum, x));
            }
        }
        best
    }

    fn value(&mut self, u: &mut Vec<u32>, live: &[usize], t: usize) -> Rational {
        let unset = u.iter().filter(|&&v| v == UNSET).count();
        let t = t.min(unset);
        let key = (u.clone(), t);
        if let Some(v) = self.cache.map.get(&key) {
            return v.clone();
        }
        let (mut best, _) = self.best_answer(live);
        if t > 0 {
            if let Some((q, _)) = self.best_query(u, live, t) {
                if q > best {
                    best = q;
                }
            }
        }
        self.cache.map.insert(key, best.clone());
        best
    }

    fn tree(&mut self, u: &mut Vec<u32>, live: &[usize], t: usize) -> StrategyTree {
        let t = t.min(u.iter().filter(|&&v| v == UNSET).count());
        let (out_val, out_idx) = self.best_answer(live);
        let leaf = match out_idx {
            Some(ai) => StrategyTree::Output(self.game.answers()[ai].clone()),
            None => StrategyTree::Abstain,
        };
        if t == 0 {
            return leaf;
        }
        match self.best_query(u, live, t) {
            Some((q, x)) if q >= out_val => {
                let groups = self.split(live, x);
                let mut branches = Vec::with_capacity(groups.len());
                for (y, group) in groups.into_iter().enumerate() {
                    u[x] = y as u32;
                    branches.push(self.tree(u, &group, t - 1));
                    u[x] = UNSET;
                }
                StrategyTree::Query {
                    position: x,
                    branches,
                }
            }
            _ => leaf,
        }
    }
}

fn members_for(game: &Game, ch: usize, subset: Option<&[usize]>) -> Vec<(usize, Rational)> {
    let all: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..game.oracles().len()).collect(),
    };
    all.into_iter()
        .filter_map(|i| {
            let w = &game.weights()[i] * game.challenge_prob(i, ch);
            (!w.is_zero()).then_some((i, w))
        })
        .collect()
}

fn root_value(game: &Game, ch: usize, subset: Option<&[usize]>, t: usize) -> Rational {
    let mut inst = Instance::new(game, ch, members_for(game, ch, subset));
    let live: Vec<usize> = (0..inst.members.len()).collect();
    let mut u = vec![UNSET; game.domain()];
    inst.value(&mut u, &live, t)
}

/// ε_G(T): the best winning probability of a deterministic T-query algorithm.
pub fn optimal_value(game: &Game, t: usize) -> Rational {
    (0..game.challenges().len())
        .into_par_iter()
        .map(|ch| root_value(game, ch, None, t))
        .sum()
}

/// Value of a fixed challenge, unnormalised (i.e. `Pr[ch] * ε_{G_ch}(T)`).
pub fn optimal_value_for_challenge(game: &Game, ch: usize, t: usize) -> Rational {
    root_value(game, ch, None, t)
}

/// One optimal tree per challenge.
pub fn optimal_strategy(game: &Game, t: usize) -> Strategy {
    let per_challenge = (0..game.challenges().len())
        .into_par_iter()
        .map(|ch| {
            let mut inst = Instance::new(game, ch, members_for(game, ch, None));
            let live: Vec<usize> = (0..inst.members.len()).collect();
            let mut u = vec![UNSET; game.domain()];
            inst.value(&mut u, &live, t);
            inst.tree(&mut u, &live, t)
        })
        .collect();
    Strategy { per_challenge }
}

/// Exact winning probability of a strategy against the game's distribution.
pub fn evaluate_strategy(game: &Game, strategy: &Strategy) -> Rational {
    let mut total = Rational::zero();
    for (i, o) in game.oracles().iter().enumerate() {
        for (ch, p) in game.challenge_weights(i) {
            if strategy.wins(game, &o.values, *ch) {
                total += &game.weights()[i] * p;
            }
        }
    }
    total
}

/// ε_{G^n}(nT).
pub fn multi_challenge_value(
    game: &Game,
    n: usize,
    t_per: usize,
    budget: &Budget,
) -> Result<Rational> {
    let g = multi_challenge(game, n, budget)?;
    Ok(optimal_value(&g, n * t_per))
}

/// Result of the exact non-uniform search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonuniformSolution {
    pub value: Rational,
    /// Advice value assigned to each oracle (zero-weight oracles get 0).
    pub advice: Vec<usize>,
}

/// ε_{G}(S,T) by enumerating every advice map up to relabelling.
///
/// An advice map partitions the oracles into at most `2^S` groups; given the
/// advice, the best online algorithm is optimal for the group's posterior, so
/// the value is the sum of unnormalised group optima.
pub fn optimal_nonuniform(
    game: &Game,
    s: u32,
    t: usize,
    budget: &Budget,
) -> Result<NonuniformSolution> {
    let support: Vec<usize> = (0..game.oracles().len())
        .filter(|&i| !game.weights()[i].is_zero())
        .collect();
    let n = support.len();
    let groups = if s >= 64 { usize::MAX } else { 1usize << s };
    let max_blocks = groups.min(n.max(1));
    let maps = restricted_growth_count(n, max_blocks);
    budget.check_enumeration("advice maps", maps)?;

    let mut memo: HashMap<Vec<usize>, Rational> = HashMap::new();
    let mut group_value = |members: Vec<usize>| -> Rational {
        if let Some(v) = memo.get(&members) {
            return v.clone();
        }
        let v: Rational = (0..game.challenges().len())
            .map(|ch| root_value(game, ch, Some(&members), t))
            .sum();
        memo.insert(members, v.clone());
        v
    };

    let mut best: Option<(Rational, Vec<usize>)> = None;
    let mut labels = vec![0usize; n];
    loop {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut total = Rational::zero();
        for b in 0..blocks.max(1) {
            let members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == b)
                .map(|(i, _)| support[i])
                .collect();
            total += group_value(members);
        }
        if best.as_ref().is_none_or(|(v, _)| total > *v) {
            best = Some((total, labels.clone()));
        }
        if !next_restricted_growth(&mut labels, max_blocks) {
            break;
        }
    }
    let (value, labels) = best.expect("at least one map");
    let mut advice = vec![0usize; game.oracles().len()];
    for (i, &l) in labels.iter().enumerate() {
        advice[support[i]] = l;
    }
    Ok(NonuniformSolution { value, advice })
}

pub fn optimal_nonuniform_value(
    game: &Game,
    s: u32,
    t: usize,
    budget: &Budget,
) -> Result<Rational> {
    Ok(optimal_nonuniform(game, s, t, budget)?.value)
}

/// Advances a restricted growth string with at most `blocks` labels.
fn next_restricted_growth(labels: &mut [usize], blocks: usize) -> bool {
    let n = labels.len();
    for i in (1..n).rev() {
        let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] <= prefix_max && labels[i] + 1 < blocks {
            labels[i] += 1;
            for l in labels[i + 1..].iter_mut() {
                *l = 0;
            }
            return true;
        }
    }
    false
}

/// Number of set partitions of `n` items into at most `k` blocks.
fn restricted_growth_count(n: usize, k: usize) -> u128 {
    // Stirling numbers of the second kind, saturating
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; k + 1];
        for j in 1..=k {
            next[j] = (j as u128)
                .saturating_mul(row[j])
                .saturating_add(row[j - 1]);
        }
        row = next;
    }
    if n == 0 {
        1
    } else {
        row.iter().fold(0u128, |a, b| a.saturating_add(*b))
    }
}

/// Classical property finding on a uniform oracle `[m] -> [n]`.
///
/// Returns the best probability that `t` adaptive queries produce a learned
/// partial table satisfying `prop`.
pub fn property_finding_value(
    m: usize,
    n: u32,
    t: usize,
    prop: &dyn Fn(&[Option<u32>]) -> bool,
) -> Rational {
    fn rec(
        u: &mut Vec<Option<u32>>,
        n: u32,
        t: usize,
        prop: &dyn Fn(&[Option<u32>]) -> bool,
        memo: &mut HashMap<(Vec<Option<u32>>, usize), Rational>,
    ) -> Rational {
        if prop(u) {
            return Rational::from_integer(1.into());
        }
        if t == 0 || u.iter().all(|v| v.is_some()) {
            return Rational::zero();
        }
        let key = (u.clone(), t);
        if let Some(v) = memo.get(&key) {
            return v.clone();
        }
        let mut best = Rational::zero();
        for x in 0..u.len() {
            if u[x].is_some() {
                continue;
            }
            let mut sum = Rational::zero();
            for y in 0..n {
                u[x] = Some(y);
                sum += rec(u, n, t - 1, prop, memo);
            }
            u[x] = None;
            let v = sum / Rational::from_integer((n as i64).into());
            if v > best {
                best = v;
            }
        }
        memo.insert(key, best.clone());
        best
    }
    let mut u = vec![None; m];
    rec(&mut u, n, t, prop, &mut HashMap::new())
}
