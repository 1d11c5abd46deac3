//! Multi-game algorithms and the memoryless-to-fair reduction.
//!
//! A memoryless algorithm runs sub-programs `A_1..A_k` one after another,
//! each free to query any of the oracles `f_1..f_k` but keeping no state
//! between runs. [`FairExecutor`] replays the same programs out of order so
//! that the real oracle `f_j` is never queried more often than `A_j` itself
//! has queried. Queries aimed at an oracle whose owner has already finished
//! are answered from a substitute table chosen to maximise the winning
//! probability of the programs still running.

use std::collections::HashMap;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{Game, OracleTable, Term};
use crate::ratio::Rational;
use crate::solver::Strategy;

/// A deterministic decision program that may query any of the `k` oracles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    Output(Term),
    Query {
        oracle: usize,
        position: usize,
        branches: Vec<Program>,
    },
}

impl Program {
    pub fn depth(&self) -> usize {
        match self {
            Program::Output(_) => 0,
            Program::Query { branches, .. } => {
                1 + branches.iter().map(Program::depth).max().unwrap_or(0)
            }
        }
    }

    fn validate(&self, games: &[Game]) -> Result<()> {
        match self {
            Program::Output(_) => Ok(()),
            Program::Query {
                oracle,
                position,
                branches,
            } => {
                let g = games
                    .get(*oracle)
                    .ok_or_else(|| Error::InvalidSpec(format!("no oracle {oracle}")))?;
                if *position >= g.domain() {
                    return invalid(format!("position {position} outside oracle {oracle}"));
                }
                if branches.len() != g.range() as usize {
                    return invalid("a query node needs one branch per oracle value");
                }
                branches.iter().try_for_each(|b| b.validate(games))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorylessAlgorithm {
    pub programs: Vec<Program>,
    pub budgets: Vec<usize>,
}

/// The direct product of plain games.
#[derive(Clone, Debug)]
pub struct ProductGame {
    games: Vec<Game>,
}

impl ProductGame {
    pub fn new(games: Vec<Game>) -> Result<Self> {
        if games.is_empty() {
            return invalid("a product needs at least one game");
        }
        if let Some(g) = games.iter().find(|g| !g.is_plain()) {
            return invalid(format!("{} has challenges; condition it first", g.label()));
        }
        Ok(ProductGame { games })
    }

    pub fn games(&self) -> &[Game] {
        &self.games
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    fn wins(&self, i: usize, oracle: &OracleTable, answer: &Term) -> bool {
        self.games[i].evaluate(&oracle.values, &Term::Unit, answer)
    }

    /// Calls `f(tuple of oracle indices, weight)` for every positive-weight tuple.
    pub fn for_each_tuple(&self, mut f: impl FnMut(&[usize], &Rational)) {
        let supports: Vec<Vec<usize>> = self
            .games
            .iter()
            .map(|g| {
                (0..g.oracles().len())
                    .filter(|&i| !g.weights()[i].is_zero())
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; self.games.len()];
        loop {
            let tuple: Vec<usize> = idx
                .iter()
                .enumerate()
                .map(|(g, &i)| supports[g][i])
                .collect();
            let w: Rational = tuple
                .iter()
                .enumerate()
                .map(|(g, &i)| self.games[g].weights()[i].clone())
                .product();
            f(&tuple, &w);
            let mut p = idx.len();
            loop {
                if p == 0 {
                    return;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < supports[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    pub fn tables(&self, tuple: &[usize]) -> Vec<&OracleTable> {
        tuple
            .iter()
            .enumerate()
            .map(|(g, &i)| &self.games[g].oracles()[i])
            .collect()
    }
}

fn check_algorithm(alg: &MemorylessAlgorithm, product: &ProductGame) -> Result<()> {
    if alg.programs.len() != product.len() || alg.budgets.len() != product.len() {
        return invalid("need one program and one budget per game");
    }
    for (i, p) in alg.programs.iter().enumerate() {
        p.validate(product.games())?;
        if p.depth() > alg.budgets[i] {
            return Err(Error::QueryBudgetViolation {
                index: i,
                budget: alg.budgets[i],
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub outputs: Vec<Term>,
    pub wins: Vec<bool>,
    /// Queries received by each oracle.
    pub oracle_queries: Vec<usize>,
}

impl RunOutcome {
    pub fn all_win(&self) -> bool {
        self.wins.iter().all(|&w| w)
    }
}

/// Runs `A_1, .., A_k` sequentially against real oracles.
pub fn run_memoryless(
    alg: &MemorylessAlgorithm,
    product: &ProductGame,
    oracles: &[&OracleTable],
) -> Result<RunOutcome> {
    check_algorithm(alg, product)?;
    if oracles.len() != product.len() {
        return invalid("need one oracle per game");
    }
    let mut oracle_queries = vec![0usize; oracles.len()];
    let mut outputs = Vec::new();
    for p in &alg.programs {
        let mut node = p;
        loop {
            match node {
                Program::Output(a) => {
                    outputs.push(a.clone());
                    break;
                }
                Program::Query {
                    oracle,
                    position,
                    branches,
                } => {
                    oracle_queries[*oracle] += 1;
                    node = &branches[oracles[*oracle].values[*position] as usize];
                }
            }
        }
    }
    let wins = outputs
        .iter()
        .enumerate()
        .map(|(i, a)| product.wins(i, oracles[i], a))
        .collect();
    Ok(RunOutcome {
        outputs,
        wins,
        oracle_queries,
    })
}

/// Exact probability that the memoryless algorithm wins every game.
pub fn memoryless_win_probability(
    alg: &MemorylessAlgorithm,
    product: &ProductGame,
) -> Result<Rational> {
    check_algorithm(alg, product)?;
    let mut total = Rational::zero();
    let mut err = None;
    product.for_each_tuple(|tuple, w| {
        if err.is_some() {
            return;
        }
        match run_memoryless(alg, product, &product.tables(tuple)) {
            Ok(r) if r.all_win() => total += w,
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// One query issued by the fair executor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: usize,
    pub issuer: usize,
    pub target: usize,
    pub position: usize,
    pub answer: u32,
    pub simulated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Cycle,
    Path,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairTrace {
    pub events: Vec<TraceEvent>,
    pub steps: Vec<StepKind>,
    /// Real queries received by each oracle.
    pub real_queries: Vec<usize>,
    /// Queries made by each sub-program.
    pub program_queries: Vec<usize>,
    /// Substitute tables, in the order they were fixed.
    pub substitutes: Vec<(usize, Vec<u32>)>,
}

impl FairTrace {
    /// Replays the log and checks `t_j <= q_j <= T_j` after every step and
    /// `t_j <= T_j` after every single query.
    pub fn is_fair(&self, budgets: &[usize]) -> bool {
        let k = budgets.len();
        let (mut t, mut q) = (vec![0usize; k], vec![0usize; k]);
        let mut i = 0;
        for step in 0..self.steps.len() {
            while i < self.events.len() && self.events[i].step == step {
                let e = &self.events[i];
                q[e.issuer] += 1;
                if !e.simulated {
                    t[e.target] += 1;
                }
                if t.iter().zip(budgets).any(|(a, b)| a > b) {
                    return false;
                }
                i += 1;
            }
            if (0..k).any(|j| t[j] > q[j] || q[j] > budgets[j]) {
                return false;
            }
        }
        i == self.events.len() && t == self.real_queries && q == self.program_queries
    }

    pub fn simulated_count(&self) -> usize {
        self.events.iter().filter(|e| e.simulated).count()
    }
}

/// How a finished program's oracle is replaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubstituteRule {
    /// The continuation-maximising consistent table (the reduction proper).
    Argmax,
    /// The true table; the executor then reproduces the sequential run.
    TrueOracle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairRun {
    pub outcome: RunOutcome,
    pub trace: FairTrace,
}

/// Out-of-order executor produced by [`reduce_to_fair`].
#[derive(Clone, Debug)]
pub struct FairExecutor {
    alg: MemorylessAlgorithm,
    product: ProductGame,
    rule: SubstituteRule,
}

pub fn reduce_to_fair(alg: &MemorylessAlgorithm, product: &ProductGame) -> Result<FairExecutor> {
    check_algorithm(alg, product)?;
    Ok(FairExecutor {
        alg: alg.clone(),
        product: product.clone(),
        rule: SubstituteRule::Argmax,
    })
}

struct ExecState<'a> {
    nodes: Vec<&'a Program>,
    outputs: Vec<Option<Term>>,
    learned: Vec<Vec<Option<u32>>>,
    substitutes: Vec<Option<Vec<u32>>>,
}

impl FairExecutor {
    pub fn with_rule(mut self, rule: SubstituteRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn budgets(&self) -> &[usize] {
        &self.alg.budgets
    }

    pub fn run(&self, oracles: &[&OracleTable]) -> Result<FairRun> {
        let k = self.product.len();
        if oracles.len() != k {
            return invalid("need one oracle per game");
        }
        let mut st = ExecState {
            nodes: self.alg.programs.iter().collect(),
            outputs: vec![None; k],
            learned: self
                .product
                .games()
                .iter()
                .map(|g| vec![None; g.domain()])
                .collect(),
            substitutes: vec![None; k],
        };
        let mut trace = FairTrace {
            events: Vec::new(),
            steps: Vec::new(),
            real_queries: vec![0; k],
            program_queries: vec![0; k],
            substitutes: Vec::new(),
        };
        loop {
            // finished programs, in index order
            for j in 0..k {
                if st.outputs[j].is_none() {
                    if let Program::Output(a) = st.nodes[j] {
                        st.outputs[j] = Some(a.clone());
                    }
                }
            }
            for j in 0..k {
                if st.outputs[j].is_some() && st.substitutes[j].is_none() {
                    let table = match self.rule {
                        SubstituteRule::TrueOracle => oracles[j].values.clone(),
                        SubstituteRule::Argmax => self.argmax_substitute(&st, j),
                    };
                    trace.substitutes.push((j, table.clone()));
                    st.substitutes[j] = Some(table);
                }
            }
            let live: Vec<usize> = (0..k).filter(|&j| st.outputs[j].is_none()).collect();
            if live.is_empty() {
                break;
            }
            let target = |r: usize| match st.nodes[r] {
                Program::Query { oracle, .. } => *oracle,
                Program::Output(_) => unreachable!("live programs sit at query nodes"),
            };
            let next = |r: usize| {
                let v = target(r);
                st.outputs[v].is_none().then_some(v)
            };
            let (kind, group) = match find_cycle(&live, &next) {
                Some(c) => (StepKind::Cycle, c),
                None => (StepKind::Path, find_path(&live, &next)),
            };
            let step = trace.steps.len();
            trace.steps.push(kind);
            for &r in &group {
                let Program::Query {
                    oracle,
                    position,
                    branches,
                } = st.nodes[r]
                else {
                    unreachable!()
                };
                let (answer, simulated) = match &st.substitutes[*oracle] {
                    Some(sub) => (sub[*position], true),
                    None => {
                        let y = oracles[*oracle].values[*position];
                        st.learned[*oracle][*position] = Some(y);
                        trace.real_queries[*oracle] += 1;
                        (y, false)
                    }
                };
                trace.program_queries[r] += 1;
                if trace.program_queries[r] > self.alg.budgets[r] {
                    return Err(Error::QueryBudgetViolation {
                        index: r,
                        budget: self.alg.budgets[r],
                    });
                }
                trace.events.push(TraceEvent {
                    step,
                    issuer: r,
                    target: *oracle,
                    position: *position,
                    answer,
                    simulated,
                });
                st.nodes[r] = &branches[answer as usize];
            }
        }
        let outputs: Vec<Term> = st
            .outputs
            .into_iter()
            .map(|o| o.expect("all finished"))
            .collect();
        let wins = outputs
            .iter()
            .enumerate()
            .map(|(i, a)| self.product.wins(i, oracles[i], a))
            .collect();
        Ok(FairRun {
            outcome: RunOutcome {
                outputs,
                wins,
                oracle_queries: trace.real_queries.clone(),
            },
            trace,
        })
    }

    /// First table (lexicographically) consistent with what was learned about
    /// `f_j` that maximises the continuation's winning probability.
    fn argmax_substitute(&self, st: &ExecState<'_>, j: usize) -> Vec<u32> {
        let game = &self.product.games()[j];
        let mut candidates: Vec<&OracleTable> = game
            .oracles()
            .iter()
            .filter(|o| {
                o.values
                    .iter()
                    .zip(&st.learned[j])
                    .all(|(v, u)| u.is_none_or(|u| u == *v))
            })
            .collect();
        candidates.sort_by(|a, b| a.values.cmp(&b.values));
        candidates.dedup_by(|a, b| a.values == b.values);
        let mut best: Option<(Rational, &OracleTable)> = None;
        for c in candidates {
            let v = self.continuation_value(st, j, &c.values);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, c));
            }
        }
        best.expect("the real oracle is always a candidate")
            .1
            .values
            .clone()
    }

    /// Unnormalised probability that every program without a substitute wins,
    /// when the rest runs sequentially with real posterior oracles for those
    /// programs and substitutes (including `f_j := cand`) elsewhere.
    fn continuation_value(&self, st: &ExecState<'_>, j: usize, cand: &[u32]) -> Rational {
        let k = self.product.len();
        let open: Vec<usize> = (0..k)
            .filter(|&r| r != j && st.substitutes[r].is_none())
            .collect();
        let posteriors: Vec<Vec<(usize, Rational)>> = open
            .iter()
            .map(|&r| {
                let g = &self.product.games()[r];
                (0..g.oracles().len())
                    .filter(|&i| {
                        !g.weights()[i].is_zero()
                            && g.oracles()[i]
                                .values
                                .iter()
                                .zip(&st.learned[r])
                                .all(|(v, u)| u.is_none_or(|u| u == *v))
                    })
                    .map(|i| (i, g.weights()[i].clone()))
                    .collect()
            })
            .collect();
        if posteriors.iter().any(|p| p.is_empty()) {
            return Rational::zero();
        }
        let mut total = Rational::zero();
        let mut idx = vec![0usize; open.len()];
        loop {
            let mut view: Vec<&[u32]> = vec![&[]; k];
            for r in 0..k {
                if r == j {
                    view[r] = cand;
                } else if let Some(s) = &st.substitutes[r] {
                    view[r] = s;
                }
            }
            let mut w = Rational::from_integer(1.into());
            for (p, &r) in open.iter().enumerate() {
                let (oi, ow) = &posteriors[p][idx[p]];
                view[r] = &self.product.games()[r].oracles()[*oi].values;
                w *= ow;
            }
            let all = open.iter().all(|&r| {
                let answer = match &st.outputs[r] {
                    Some(a) => a.clone(),
                    None => run_program(st.nodes[r], &view),
                };
                self.product.games()[r].evaluate(view[r], &Term::Unit, &answer)
            });
            if all {
                total += w;
            }
            let mut p = idx.len();
            loop {
                if p == 0 {
                    return total;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < posteriors[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }
}

fn run_program(mut node: &Program, view: &[&[u32]]) -> Term {
    loop {
        match node {
            Program::Output(a) => return a.clone(),
            Program::Query {
                oracle,
                position,
                branches,
            } => node = &branches[view[*oracle][*position] as usize],
        }
    }
}

/// The cycle with the smallest minimal vertex in a functional graph.
fn find_cycle(live: &[usize], next: &dyn Fn(usize) -> Option<usize>) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    for &start in live {
        let mut seen = vec![start];
        let mut cur = start;
        while let Some(n) = next(cur) {
            if let Some(pos) = seen.iter().position(|&s| s == n) {
                let cycle = seen[pos..].to_vec();
                let min = *cycle.iter().min().expect("nonempty");
                if best
                    .as_ref()
                    .is_none_or(|b| min < *b.iter().min().expect("nonempty"))
                {
                    best = Some(cycle);
                }
                break;
            }
            seen.push(n);
            cur = n;
        }
    }
    best.map(|mut c| {
        // start the cycle at its smallest vertex for reproducible traces
        let pos = c
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .expect("nonempty");
        c.rotate_left(pos);
        c
    })
}

/// A maximal source-to-sink path in an acyclic functional graph, choosing the
/// one whose smallest vertex is smallest.
fn find_path(live: &[usize], next: &dyn Fn(usize) -> Option<usize>) -> Vec<usize> {
    let has_in: Vec<usize> = live.iter().filter_map(|&r| next(r)).collect();
    let mut best: Option<Vec<usize>> = None;
    for &s in live.iter().filter(|r| !has_in.contains(r)) {
        let mut path = vec![s];
        let mut cur = s;
        while let Some(n) = next(cur) {
            path.push(n);
            cur = n;
        }
        let min = *path.iter().min().expect("nonempty");
        if best
            .as_ref()
            .is_none_or(|b| min < *b.iter().min().expect("nonempty"))
        {
            best = Some(path);
        }
    }
    best.expect("an acyclic functional graph has a source")
}

/// Exact probability that the executor wins every game.
pub fn exact_win_probability(exec: &FairExecutor) -> Result<Rational> {
    let mut total = Rational::zero();
    let mut err = None;
    exec.product.for_each_tuple(|tuple, w| {
        if err.is_some() {
            return;
        }
        match exec.run(&exec.product.tables(tuple)) {
            Ok(r) if r.outcome.all_win() => total += w,
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Best winning probability over all deterministic fair algorithms.
///
/// Works with unnormalised weights: the value of a state is the sum over
/// consistent oracle tuples, which factorises across the independent games.
pub fn fair_optimal_value(product: &ProductGame, budgets: &[usize]) -> Result<Rational> {
    if budgets.len() != product.len() {
        return invalid("need one budget per game");
    }
    struct Ctx<'a> {
        games: &'a [Game],
        memo: HashMap<(Vec<Vec<Option<u32>>>, Vec<usize>), Rational>,
    }
    fn answer_mass(g: &Game, u: &[Option<u32>]) -> Rational {
        let consistent: Vec<usize> = (0..g.oracles().len())
            .filter(|&i| {
                g.oracles()[i]
                    .values
                    .iter()
                    .zip(u)
                    .all(|(v, u)| u.is_none_or(|u| u == *v))
            })
            .collect();
        let mut best = Rational::zero();
        for a in g.answers() {
            let w: Rational = consistent
                .iter()
                .filter(|&&i| g.evaluate(&g.oracles()[i].values, &Term::Unit, a))
                .map(|&i| g.weights()[i].clone())
                .sum();
            if w > best {
                best = w;
            }
        }
        best
    }
    fn rec(ctx: &mut Ctx<'_>, us: &mut Vec<Vec<Option<u32>>>, b: &mut Vec<usize>) -> Rational {
        let key = (us.clone(), b.clone());
        if let Some(v) = ctx.memo.get(&key) {
            return v.clone();
        }
        let mut best: Rational = ctx
            .games
            .iter()
            .zip(us.iter())
            .map(|(g, u)| answer_mass(g, u))
            .product();
        for i in 0..ctx.games.len() {
            if b[i] == 0 {
                continue;
            }
            for x in 0..us[i].len() {
                if us[i][x].is_some() {
                    continue;
                }
                b[i] -= 1;
                let mut sum = Rational::zero();
                for y in 0..ctx.games[i].range() {
                    us[i][x] = Some(y);
                    sum += rec(ctx, us, b);
                }
                us[i][x] = None;
                b[i] += 1;
                if sum > best {
                    best = sum;
                }
            }
        }
        ctx.memo.insert(key, best.clone());
        best
    }
    let mut ctx = Ctx {
        games: product.games(),
        memo: HashMap::new(),
    };
    let mut us: Vec<Vec<Option<u32>>> = product
        .games()
        .iter()
        .map(|g| vec![None; g.domain()])
        .collect();
    let mut b = budgets.to_vec();
    Ok(rec(&mut ctx, &mut us, &mut b))
}

/// A fair algorithm written out as a decision tree with joint outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FairTree {
    Output(Vec<Term>),
    Query {
        oracle: usize,
        position: usize,
        branches: Vec<FairTree>,
    },
}

/// Every deterministic fair tree within the budgets, repeated queries included.
pub fn enumerate_fair_trees(
    product: &ProductGame,
    budgets: &[usize],
    cap: usize,
) -> Result<Vec<FairTree>> {
    fn outputs(games: &[Game]) -> Vec<Vec<Term>> {
        let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
        for g in games {
            let mut next = Vec::new();
            for prefix in &acc {
                for a in g.answers() {
                    let mut p = prefix.clone();
                    p.push(a.clone());
                    next.push(p);
                }
            }
            acc = next;
        }
        acc
    }
    fn rec(
        games: &[Game],
        b: &mut Vec<usize>,
        outs: &[Vec<Term>],
        cap: usize,
    ) -> Result<Vec<FairTree>> {
        let mut trees: Vec<FairTree> = outs.iter().cloned().map(FairTree::Output).collect();
        for i in 0..games.len() {
            if b[i] == 0 {
                continue;
            }
            b[i] -= 1;
            let sub = rec(games, b, outs, cap)?;
            b[i] += 1;
            let n = games[i].range() as usize;
            let count = sub.len().checked_pow(n as u32).filter(|&c| c <= cap);
            let count = count.ok_or(Error::BudgetExceeded {
                what: "fair tree enumeration",
                needed: u128::MAX,
                cap: cap as u128,
            })?;
            for x in 0..games[i].domain() {
                for mut c in 0..count {
                    let mut branches = Vec::with_capacity(n);
                    for _ in 0..n {
                        branches.push(sub[c % sub.len()].clone());
                        c /= sub.len();
                    }
                    trees.push(FairTree::Query {
                        oracle: i,
                        position: x,
                        branches,
                    });
                }
            }
            if trees.len() > cap {
                return Err(Error::BudgetExceeded {
                    what: "fair tree enumeration",
                    needed: trees.len() as u128,
                    cap: cap as u128,
                });
            }
        }
        Ok(trees)
    }
    if budgets.len() != product.len() {
        return invalid("need one budget per game");
    }
    let outs = outputs(product.games());
    rec(product.games(), &mut budgets.to_vec(), &outs, cap)
}

pub fn fair_tree_win_probability(product: &ProductGame, tree: &FairTree) -> Rational {
    let mut total = Rational::zero();
    product.for_each_tuple(|tuple, w| {
        let tables = product.tables(tuple);
        let mut node = tree;
        loop {
            match node {
                FairTree::Output(answers) => {
                    if answers
                        .iter()
                        .enumerate()
                        .all(|(i, a)| product.wins(i, tables[i], a))
                    {
                        total += w;
                    }
                    break;
                }
                FairTree::Query {
                    oracle,
                    position,
                    branches,
                } => {
                    node = &branches[tables[*oracle].values[*position] as usize];
                }
            }
        }
    });
    total
}

/// Seeded random memoryless adversary; each program stays within its budget.
pub fn random_memoryless(
    seed: u64,
    product: &ProductGame,
    budgets: &[usize],
) -> MemorylessAlgorithm {
    fn gen(rng: &mut ChaCha8Rng, games: &[Game], own: usize, left: usize) -> Program {
        let answers = games[own].answers();
        if left == 0 || rng.gen_bool(0.25) {
            return Program::Output(answers[rng.gen_range(0..answers.len())].clone());
        }
        let oracle = rng.gen_range(0..games.len());
        let position = rng.gen_range(0..games[oracle].domain());
        let branches = (0..games[oracle].range())
            .map(|_| gen(rng, games, own, left - 1))
            .collect();
        Program::Query {
            oracle,
            position,
            branches,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let programs = budgets
        .iter()
        .enumerate()
        .map(|(i, &t)| gen(&mut rng, product.games(), i, t))
        .collect();
    MemorylessAlgorithm {
        programs,
        budgets: budgets.to_vec(),
    }
}

/// An advice map plus one online strategy per advice value.
#[derive(Clone, Debug)]
pub struct FixedAdviceAdversary {
    /// Advice value for each oracle of the salted game.
    pub advice: Vec<usize>,
    pub strategies: Vec<Strategy>,
}

impl FixedAdviceAdversary {
    pub fn uniform(game: &Game, strategy: Strategy) -> Self {
        FixedAdviceAdversary {
            advice: vec![0; game.oracles().len()],
            strategies: vec![strategy],
        }
    }

    fn win_probability(&self, game: &Game, oracle: usize) -> Rational {
        let s = &self.strategies[self.advice[oracle]];
        game.challenge_weights(oracle)
            .iter()
            .filter(|(ch, _)| s.wins(game, &game.oracles()[oracle].values, *ch))
            .map(|(_, p)| p.clone())
            .sum()
    }
}

/// Probability of winning `L` independent challenges against one oracle draw.
pub fn multi_salt_experiment(
    game: &Game,
    adversary: &FixedAdviceAdversary,
    l: u32,
) -> Result<Rational> {
    if l == 0 {
        return invalid("L must be positive");
    }
    if adversary.advice.len() != game.oracles().len()
        || adversary
            .advice
            .iter()
            .any(|&a| a >= adversary.strategies.len())
    {
        return invalid("advice map does not match the game");
    }
    Ok((0..game.oracles().len())
        .map(|i| {
            &game.weights()[i] * num_traits::pow(adversary.win_probability(game, i), l as usize)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::Budget;
    use crate::game::{build_game, condition_on_index, salt, Family, GameSpec};
    use crate::ratio::{pow, rat};
    use crate::solver::{optimal_strategy, optimal_value};

    fn pz(m: usize) -> Game {
        build_game(
            &GameSpec::new(Family::PreimageZero, m, 2),
            &Budget::default(),
        )
        .unwrap()
    }

    fn q(oracle: usize, position: usize, branches: Vec<Program>) -> Program {
        Program::Query {
            oracle,
            position,
            branches,
        }
    }

    fn out(x: u32) -> Program {
        Program::Output(Term::Int(x))
    }

    #[test]
    fn single_game_is_plain_run() {
        let product = ProductGame::new(vec![pz(2)]).unwrap();
        let alg = MemorylessAlgorithm {
            programs: vec![q(0, 0, vec![out(0), out(1)])],
            budgets: vec![1],
        };
        assert_eq!(
            memoryless_win_probability(&alg, &product).unwrap(),
            rat(3, 4)
        );
    }

    #[test]
    fn cross_queries_are_legal() {
        let product = ProductGame::new(vec![pz(1), pz(1)]).unwrap();
        // A1 looks at f2, A2 looks at f1: neither learns anything useful
        let alg = MemorylessAlgorithm {
            programs: vec![q(1, 0, vec![out(0), out(0)]), q(0, 0, vec![out(0), out(0)])],
            budgets: vec![1, 1],
        };
        let f = OracleTable::new(2, vec![0]).unwrap();
        let r = run_memoryless(&alg, &product, &[&f, &f]).unwrap();
        assert_eq!(r.oracle_queries, vec![1, 1]);
        assert_eq!(
            memoryless_win_probability(&alg, &product).unwrap(),
            rat(1, 4)
        );
    }

    #[test]
    fn hand_computed_two_by_two() {
        // A1 queries f1(0): outputs 0 if zero else 1. A2 outputs 0 blindly.
        let product = ProductGame::new(vec![pz(2), pz(1)]).unwrap();
        let alg = MemorylessAlgorithm {
            programs: vec![q(0, 0, vec![out(0), out(1)]), out(0)],
            budgets: vec![1, 0],
        };
        assert_eq!(
            memoryless_win_probability(&alg, &product).unwrap(),
            rat(3, 8)
        );
    }

    #[test]
    fn over_budget_program_is_rejected() {
        let product = ProductGame::new(vec![pz(2)]).unwrap();
        let deep = q(0, 0, vec![q(0, 1, vec![out(0), out(1)]), out(1)]);
        let alg = MemorylessAlgorithm {
            programs: vec![deep],
            budgets: vec![1],
        };
        assert_eq!(
            memoryless_win_probability(&alg, &product),
            Err(Error::QueryBudgetViolation {
                index: 0,
                budget: 1
            })
        );
    }

    #[test]
    fn own_oracle_queries_reduce_to_identity() {
        let product = ProductGame::new(vec![pz(2), pz(2)]).unwrap();
        let alg = MemorylessAlgorithm {
            programs: vec![q(0, 0, vec![out(0), out(1)]), q(1, 1, vec![out(1), out(0)])],
            budgets: vec![1, 1],
        };
        let exec = reduce_to_fair(&alg, &product).unwrap();
        product.for_each_tuple(|tuple, _| {
            let run = exec.run(&product.tables(tuple)).unwrap();
            assert_eq!(run.trace.simulated_count(), 0);
            assert!(run.trace.is_fair(&[1, 1]));
        });
    }

    #[test]
    fn two_cycle_advances_together() {
        let product = ProductGame::new(vec![pz(1), pz(1)]).unwrap();
        let alg = MemorylessAlgorithm {
            programs: vec![q(1, 0, vec![out(0), out(0)]), q(0, 0, vec![out(0), out(0)])],
            budgets: vec![1, 1],
        };
        let exec = reduce_to_fair(&alg, &product).unwrap();
        let f = OracleTable::new(2, vec![1]).unwrap();
        let run = exec.run(&[&f, &f]).unwrap();
        assert_eq!(run.trace.steps, vec![StepKind::Cycle]);
        assert_eq!(run.trace.real_queries, vec![1, 1]);
        assert_eq!(run.trace.program_queries, vec![1, 1]);
    }

    #[test]
    fn query_to_finished_program_is_simulated() {
        let product = ProductGame::new(vec![pz(1), pz(1)]).unwrap();
        // A2 answers at once; A1 wants f2
        let alg = MemorylessAlgorithm {
            programs: vec![q(1, 0, vec![out(0), out(0)]), out(0)],
            budgets: vec![1, 0],
        };
        let exec = reduce_to_fair(&alg, &product).unwrap();
        let f = OracleTable::new(2, vec![1]).unwrap();
        let run = exec.run(&[&f, &f]).unwrap();
        assert_eq!(run.trace.steps, vec![StepKind::Path]);
        assert!(run.trace.events[0].simulated);
        assert_eq!(run.trace.real_queries, vec![0, 0]);
        assert!(run.trace.is_fair(&[1, 0]));
    }

    #[test]
    fn true_oracle_rule_reproduces_sequential_outputs() {
        let games = vec![
            pz(2),
            build_game(&GameSpec::new(Family::Collision, 2, 2), &Budget::default()).unwrap(),
        ];
        let product = ProductGame::new(games).unwrap();
        for seed in 0..40 {
            let alg = random_memoryless(seed, &product, &[2, 2]);
            let exec = reduce_to_fair(&alg, &product)
                .unwrap()
                .with_rule(SubstituteRule::TrueOracle);
            product.for_each_tuple(|tuple, _| {
                let tables = product.tables(tuple);
                let seq = run_memoryless(&alg, &product, &tables).unwrap();
                let ooo = exec.run(&tables).unwrap();
                assert_eq!(seq.outputs, ooo.outcome.outputs);
            });
        }
    }

    #[test]
    fn reduction_preserves_value_and_fairness() {
        let product = ProductGame::new(vec![pz(2), pz(1)]).unwrap();
        let eps = optimal_value(&product.games()[0], 2) * optimal_value(&product.games()[1], 1);
        for seed in 0..30 {
            let alg = random_memoryless(seed, &product, &[2, 1]);
            let before = memoryless_win_probability(&alg, &product).unwrap();
            let exec = reduce_to_fair(&alg, &product).unwrap();
            let after = exact_win_probability(&exec).unwrap();
            assert!(after >= before, "seed {seed}");
            assert!(before <= eps);
            product.for_each_tuple(|tuple, _| {
                assert!(exec
                    .run(&product.tables(tuple))
                    .unwrap()
                    .trace
                    .is_fair(&[2, 1]));
            });
        }
    }

    #[test]
    fn independent_optimal_runs_multiply() {
        let g1 = pz(2);
        let g2 = build_game(&GameSpec::new(Family::Collision, 2, 2), &Budget::default()).unwrap();
        let to_program = |s: &crate::solver::StrategyTree, oracle: usize| -> Program {
            fn conv(t: &crate::solver::StrategyTree, oracle: usize) -> Program {
                match t {
                    crate::solver::StrategyTree::Output(a) => Program::Output(a.clone()),
                    crate::solver::StrategyTree::Abstain => unreachable!(),
                    crate::solver::StrategyTree::Query { position, branches } => Program::Query {
                        oracle,
                        position: *position,
                        branches: branches.iter().map(|b| conv(b, oracle)).collect(),
                    },
                }
            }
            conv(s, oracle)
        };
        let p1 = to_program(&optimal_strategy(&g1, 1).per_challenge[0], 0);
        let p2 = to_program(&optimal_strategy(&g2, 1).per_challenge[0], 1);
        let expect = optimal_value(&g1, 1) * optimal_value(&g2, 1);
        let product = ProductGame::new(vec![g1, g2]).unwrap();
        let alg = MemorylessAlgorithm {
            programs: vec![p1, p2],
            budgets: vec![1, 1],
        };
        assert_eq!(memoryless_win_probability(&alg, &product).unwrap(), expect);
    }

    #[test]
    fn fair_tree_enumeration_matches_recursion() {
        let product = ProductGame::new(vec![pz(1), pz(1)]).unwrap();
        let trees = enumerate_fair_trees(&product, &[1, 1], 1 << 20).unwrap();
        assert_eq!(trees.len(), 9);
        let best = trees
            .iter()
            .map(|t| fair_tree_win_probability(&product, t))
            .max()
            .unwrap();
        assert_eq!(best, rat(1, 4));
        assert_eq!(fair_optimal_value(&product, &[1, 1]).unwrap(), rat(1, 4));
    }

    #[test]
    fn fair_value_is_product_of_values() {
        let g1 = pz(2);
        let g2 = build_game(&GameSpec::new(Family::Collision, 2, 2), &Budget::default()).unwrap();
        let expect = optimal_value(&g1, 1) * optimal_value(&g2, 1);
        let product = ProductGame::new(vec![g1, g2]).unwrap();
        assert_eq!(fair_optimal_value(&product, &[1, 1]).unwrap(), expect);
        let trees = enumerate_fair_trees(&product, &[1, 1], 1 << 22).unwrap();
        let best = trees
            .iter()
            .map(|t| fair_tree_win_probability(&product, t))
            .max()
            .unwrap();
        assert_eq!(best, expect);
    }

    #[test]
    fn games_with_challenges_must_be_conditioned() {
        let inv = build_game(&GameSpec::new(Family::Inversion, 2, 2), &Budget::default()).unwrap();
        assert!(ProductGame::new(vec![inv.clone()]).is_err());
        assert!(ProductGame::new(vec![condition_on_index(&inv, 0).unwrap()]).is_ok());
    }

    #[test]
    fn multi_salt_experiment_sandwich() {
        let b = Budget::default();
        let base = pz(1);
        let eps = optimal_value(&base, 0);
        let gk = salt(&base, 2, &b).unwrap();
        let adv = FixedAdviceAdversary::uniform(&gk, optimal_strategy(&gk, 0));
        let single = multi_salt_experiment(&gk, &adv, 1).unwrap();
        assert_eq!(single, optimal_value(&gk, 0));
        for l in 1..=4u32 {
            let v = multi_salt_experiment(&gk, &adv, l).unwrap();
            assert!(v >= pow(&single, l));
            let moment = crate::bounds::distinct_count_moment(2, l as u64, &eps).unwrap();
            assert!(v <= moment.exact, "L={l}");
        }
        assert_eq!(multi_salt_experiment(&gk, &adv, 2).unwrap(), rat(3, 8));
        assert!(multi_salt_experiment(&gk, &adv, 0).is_err());
    }
}
