//! Games, challenge conditioning, salting and multi-challenge composition.
//!
//! A [`Game`] is an explicit finite object: a weighted list of oracle tables,
//! a per-oracle challenge distribution, an answer space and a predicate.
//! Positions and values are 0-based throughout, so an oracle over `[M]` with
//! range `[N]` is a table of `M` entries in `0..N`. Salted oracles are stored
//! flat: salt `k` (0-based) owns cells `k*M .. (k+1)*M`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::budget::{sat_pow, Budget};
use crate::error::{invalid, Error, Result};
use crate::ratio::{int, Rational};

/// Challenges and answers: unit, a small integer, or a tuple of terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Term {
    Unit,
    Int(u32),
    Tuple(Vec<Term>),
}

impl Term {
    pub fn as_int(&self) -> Option<u32> {
        match self {
            Term::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Term]> {
        match self {
            Term::Tuple(v) => Some(v),
            _ => None,
        }
    }

    fn ints(&self) -> Option<Vec<u32>> {
        self.as_tuple()?.iter().map(Term::as_int).collect()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Unit => write!(f, "()"),
            Term::Int(v) => write!(f, "{v}"),
            Term::Tuple(items) => {
                write!(f, "(")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A total function `[M] -> [N]` stored as its value sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OracleTable {
    pub range: u32,
    pub values: Vec<u32>,
}

impl OracleTable {
    pub fn new(range: u32, values: Vec<u32>) -> Result<Self> {
        if range == 0 {
            return invalid("oracle range must be positive");
        }
        if let Some(v) = values.iter().find(|&&v| v >= range) {
            return invalid(format!("oracle value {v} outside range {range}"));
        }
        Ok(OracleTable { range, values })
    }

    pub fn domain(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, x: usize) -> u32 {
        self.values[x]
    }

    /// Every table `[M] -> [N]` in lexicographic order of value sequences.
    pub fn enumerate(domain: usize, range: u32, budget: &Budget) -> Result<Vec<OracleTable>> {
        budget.check_oracles(sat_pow(range as u128, domain as u64))?;
        let mut out = Vec::new();
        let mut cur = vec![0u32; domain];
        loop {
            out.push(OracleTable {
                range,
                values: cur.clone(),
            });
            // odometer with the last cell fastest
            let mut i = domain;
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                cur[i] += 1;
                if cur[i] < range {
                    break;
                }
                cur[i] = 0;
            }
        }
    }
}

/// A partial table; `None` marks an unset cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialAssignment {
    pub range: u32,
    pub values: Vec<Option<u32>>,
}

impl PartialAssignment {
    pub fn empty(domain: usize, range: u32) -> Self {
        PartialAssignment {
            range,
            values: vec![None; domain],
        }
    }

    pub fn is_consistent(&self, f: &OracleTable) -> bool {
        f.values.len() == self.values.len()
            && self
                .values
                .iter()
                .zip(&f.values)
                .all(|(u, v)| u.is_none_or(|u| u == *v))
    }

    pub fn set(&mut self, x: usize, y: u32) {
        self.values[x] = Some(y);
    }

    pub fn unset_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Winning predicate over (flat oracle values, challenge, answer).
pub type Predicate = Arc<dyn Fn(&[u32], &Term, &Term) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Game {
    domain: usize,
    range: u32,
    oracles: Vec<OracleTable>,
    weights: Vec<Rational>,
    challenges: Vec<Term>,
    challenge_weights: Vec<Vec<(usize, Rational)>>,
    answers: Vec<Term>,
    predicate: Predicate,
    label: String,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("range", &self.range)
            .field("oracles", &self.oracles.len())
            .field("challenges", &self.challenges.len())
            .field("answers", &self.answers.len())
            .finish()
    }
}

impl Game {
    /// Builds a game after validating weights and challenge distributions.
    ///
    /// `challenge_weights[i]` is a sparse list of `(challenge index, weight)`
    /// for oracle `i`; each list must sum to one.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        domain: usize,
        range: u32,
        oracles: Vec<OracleTable>,
        weights: Vec<Rational>,
        challenges: Vec<Term>,
        challenge_weights: Vec<Vec<(usize, Rational)>>,
        answers: Vec<Term>,
        predicate: Predicate,
    ) -> Result<Self> {
        if oracles.is_empty() {
            return invalid("a game needs at least one oracle");
        }
        if weights.len() != oracles.len() || challenge_weights.len() != oracles.len() {
            return invalid("weights and challenge distributions must match the oracle list");
        }
        if challenges.is_empty() {
            return invalid("challenge space must be nonempty");
        }
        for o in &oracles {
            if o.domain() != domain || o.range != range {
                return invalid("oracle table shape does not match the game");
            }
        }
        if weights.iter().any(|w| w < &Rational::zero()) {
            return invalid("negative oracle weight");
        }
        if weights.iter().sum::<Rational>() != Rational::one() {
            return invalid("oracle weights must sum to 1");
        }
        for cw in &challenge_weights {
            if cw
                .iter()
                .any(|(c, w)| *c >= challenges.len() || w < &Rational::zero())
            {
                return invalid("bad challenge weight entry");
            }
            if cw.iter().map(|(_, w)| w).sum::<Rational>() != Rational::one() {
                return invalid("per-oracle challenge weights must sum to 1");
            }
        }
        Ok(Game {
            domain,
            range,
            oracles,
            weights,
            challenges,
            challenge_weights,
            answers,
            predicate,
            label: label.into(),
        })
    }

    /// A game with the singleton challenge `Term::Unit`.
    pub fn plain(
        label: impl Into<String>,
        domain: usize,
        range: u32,
        oracles: Vec<OracleTable>,
        weights: Vec<Rational>,
        answers: Vec<Term>,
        predicate: Predicate,
    ) -> Result<Self> {
        let n = oracles.len();
        Game::new(
            label,
            domain,
            range,
            oracles,
            weights,
            vec![Term::Unit],
            vec![vec![(0, Rational::one())]; n],
            answers,
            predicate,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn domain(&self) -> usize {
        self.domain
    }
    pub fn range(&self) -> u32 {
        self.range
    }
    pub fn oracles(&self) -> &[OracleTable] {
        &self.oracles
    }
    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }
    pub fn challenges(&self) -> &[Term] {
        &self.challenges
    }
    pub fn challenge_weights(&self, oracle: usize) -> &[(usize, Rational)] {
        &self.challenge_weights[oracle]
    }
    pub fn answers(&self) -> &[Term] {
        &self.answers
    }
    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn is_plain(&self) -> bool {
        self.challenges.len() == 1
    }

    /// Pr[ch | oracle].
    pub fn challenge_prob(&self, oracle: usize, ch: usize) -> Rational {
        self.challenge_weights[oracle]
            .iter()
            .filter(|(c, _)| *c == ch)
            .map(|(_, w)| w.clone())
            .sum()
    }

    /// Marginal distribution of the challenge.
    pub fn challenge_marginal(&self) -> Vec<Rational> {
        let mut m = vec![Rational::zero(); self.challenges.len()];
        for (i, w) in self.weights.iter().enumerate() {
            for (c, cw) in &self.challenge_weights[i] {
                m[*c] += w * cw;
            }
        }
        m
    }

    pub fn challenge_index(&self, ch: &Term) -> Option<usize> {
        self.challenges.iter().position(|c| c == ch)
    }

    pub fn evaluate(&self, oracle: &[u32], ch: &Term, answer: &Term) -> bool {
        (self.predicate)(oracle, ch, answer)
    }
}

/// Pure predicate check; see [`Game::evaluate`].
pub fn evaluate_predicate(game: &Game, oracle: &OracleTable, ch: &Term, answer: &Term) -> bool {
    game.evaluate(&oracle.values, ch, answer)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PreimageZero,
    Collision,
    Ksum,
    Inversion,
    /// Inversion where the challenge is the image of a uniform point.
    InversionImage,
    CustomTable,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::InvalidSpec(format!("unknown family {s:?}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::PreimageZero => "preimage_zero",
            Family::Collision => "collision",
            Family::Ksum => "ksum",
            Family::Inversion => "inversion",
            Family::InversionImage => "inversion_image",
            Family::CustomTable => "custom_table",
        }
    }
}

fn default_k() -> usize {
    1
}

/// JSON-loadable description of a named game family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub family: Family,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "K", default = "default_k")]
    pub salts: usize,
    #[serde(rename = "k", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<u32>>>,
}

impl GameSpec {
    pub fn new(family: Family, m: usize, n: u32) -> Self {
        GameSpec {
            family,
            m,
            n,
            salts: 1,
            k: None,
            tables: None,
        }
    }

    pub fn salted(mut self, salts: usize) -> Self {
        self.salts = salts;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.salts == 0 {
            return invalid("M, N and K must be positive");
        }
        match self.family {
            Family::Ksum => {
                if self.k.is_none_or(|k| k == 0) {
                    return invalid("ksum needs a positive k");
                }
            }
            Family::CustomTable => {
                let tables = self
                    .tables
                    .as_ref()
                    .ok_or(Error::InvalidSpec("custom_table needs tables".into()))?;
                if tables.is_empty() {
                    return invalid("custom_table needs at least one table");
                }
                for t in tables {
                    if t.len() != self.m {
                        return invalid(format!(
                            "custom table has length {} instead of M={}",
                            t.len(),
                            self.m
                        ));
                    }
                    if t.iter().any(|&v| v >= self.n) {
                        return invalid("custom table value outside [N]");
                    }
                }
            }
            _ => {
                if self.k.is_some() || self.tables.is_some() {
                    return invalid(format!("{} takes neither k nor tables", self.family.name()));
                }
            }
        }
        if self.family != Family::Ksum && self.k.is_some() {
            return invalid("k is only meaningful for ksum");
        }
        Ok(())
    }
}

fn uniform_weights(n: usize) -> Vec<Rational> {
    vec![Rational::new(1.into(), (n as i64).into()); n]
}

fn int_answers(m: usize) -> Vec<Term> {
    (0..m as u32).map(Term::Int).collect()
}

/// All increasing `k`-subsets of `[m]` as tuples.
fn combinations(m: usize, k: usize) -> Vec<Term> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Term>) {
        if cur.len() == k {
            out.push(Term::Tuple(cur.iter().map(|&x| Term::Int(x)).collect()));
            return;
        }
        for x in start..m {
            cur.push(x as u32);
            rec(x + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn preimage_zero_predicate() -> Predicate {
    Arc::new(|f, _, a| {
        a.as_int()
            .is_some_and(|x| (x as usize) < f.len() && f[x as usize] == 0)
    })
}

fn collision_predicate() -> Predicate {
    Arc::new(|f, _, a| match a.ints().as_deref() {
        Some([x, y]) => {
            x != y
                && (*x as usize) < f.len()
                && (*y as usize) < f.len()
                && f[*x as usize] == f[*y as usize]
        }
        _ => false,
    })
}

fn ksum_predicate(k: usize, n: u32) -> Predicate {
    Arc::new(move |f, _, a| match a.ints() {
        Some(xs) if xs.len() == k => {
            let mut seen = xs.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len() == k
                && xs.iter().all(|&x| (x as usize) < f.len())
                && xs.iter().map(|&x| f[x as usize] as u64).sum::<u64>() % n as u64 == 0
        }
        _ => false,
    })
}

fn inversion_predicate() -> Predicate {
    Arc::new(|f, ch, a| match (ch.as_int(), a.as_int()) {
        (Some(y), Some(x)) => (x as usize) < f.len() && f[x as usize] == y,
        _ => false,
    })
}

/// Expands a [`GameSpec`] into an explicit game, salting when `K > 1`.
pub fn build_game(spec: &GameSpec, budget: &Budget) -> Result<Game> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let name = spec.family.name();
    let label = format!("{name}(M={m},N={n})");
    let base = match spec.family {
        Family::PreimageZero => {
            let oracles = OracleTable::enumerate(m, n, budget)?;
            let w = uniform_weights(oracles.len());
            Game::plain(
                label,
                m,
                n,
                oracles,
                w,
                int_answers(m),
                preimage_zero_predicate(),
            )?
        }
        Family::Collision => {
            let oracles = OracleTable::enumerate(m, n, budget)?;
            let w = uniform_weights(oracles.len());
            Game::plain(
                label,
                m,
                n,
                oracles,
                w,
                combinations(m, 2),
                collision_predicate(),
            )?
        }
        Family::Ksum => {
            let k = spec.k.expect("validated");
            let oracles = OracleTable::enumerate(m, n, budget)?;
            let w = uniform_weights(oracles.len());
            let label = format!("ksum(k={k},M={m},N={n})");
            Game::plain(
                label,
                m,
                n,
                oracles,
                w,
                combinations(m, k),
                ksum_predicate(k, n),
            )?
        }
        Family::Inversion => {
            let oracles = OracleTable::enumerate(m, n, budget)?;
            budget.check_space("challenge space", n as u128)?;
            let w = uniform_weights(oracles.len());
            let cw = uniform_challenges(oracles.len(), n);
            let challenges = (0..n).map(Term::Int).collect();
            Game::new(
                label,
                m,
                n,
                oracles,
                w,
                challenges,
                cw,
                int_answers(m),
                inversion_predicate(),
            )?
        }
        Family::InversionImage => {
            let oracles = OracleTable::enumerate(m, n, budget)?;
            budget.check_space("challenge space", n as u128)?;
            let w = uniform_weights(oracles.len());
            let cw = oracles
                .iter()
                .map(|o| {
                    let mut counts = vec![0i64; n as usize];
                    for &v in &o.values {
                        counts[v as usize] += 1;
                    }
                    counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(y, &c)| (y, Rational::new(c.into(), (m as i64).into())))
                        .collect()
                })
                .collect();
            let challenges = (0..n).map(Term::Int).collect();
            Game::new(
                label,
                m,
                n,
                oracles,
                w,
                challenges,
                cw,
                int_answers(m),
                inversion_predicate(),
            )?
        }
        Family::CustomTable => {
            let tables = spec.tables.as_ref().expect("validated");
            budget.check_oracles(tables.len() as u128)?;
            budget.check_space("challenge space", n as u128)?;
            let oracles: Vec<OracleTable> = tables
                .iter()
                .map(|t| OracleTable::new(n, t.clone()))
                .collect::<Result<_>>()?;
            let w = uniform_weights(oracles.len());
            let cw = uniform_challenges(oracles.len(), n);
            let challenges = (0..n).map(Term::Int).collect();
            let label = format!("custom_table(M={m},N={n},tables={})", oracles.len());
            Game::new(
                label,
                m,
                n,
                oracles,
                w,
                challenges,
                cw,
                int_answers(m),
                inversion_predicate(),
            )?
        }
    };
    if spec.salts == 1 {
        Ok(base)
    } else {
        salt(&base, spec.salts, budget)
    }
}

fn uniform_challenges(oracles: usize, n: u32) -> Vec<Vec<(usize, Rational)>> {
    let w = Rational::new(1.into(), (n as i64).into());
    let row: Vec<(usize, Rational)> = (0..n as usize).map(|y| (y, w.clone())).collect();
    vec![row; oracles]
}

/// Mixed-radix counter over `digits` positions each in `0..radix`, first digit slowest.
fn for_each_tuple(radix: usize, digits: usize, mut f: impl FnMut(&[usize])) {
    let mut cur = vec![0usize; digits];
    if radix == 0 && digits > 0 {
        return;
    }
    loop {
        f(&cur);
        let mut i = digits;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < radix {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// The salted game: `K` independent copies, challenge `(k, ch_k)` with `k` uniform.
pub fn salt(game: &Game, k: usize, budget: &Budget) -> Result<Game> {
    if k == 0 {
        return invalid("K must be positive");
    }
    let no = game.oracles.len();
    budget.check_oracles(sat_pow(no as u128, k as u64))?;
    let nc = game.challenges.len();
    budget.check_space("challenge space", (k as u128).saturating_mul(nc as u128))?;
    let m = game.domain;
    let mut oracles = Vec::new();
    let mut weights = Vec::new();
    let mut cws = Vec::new();
    let salt_w = Rational::new(1.into(), (k as i64).into());
    for_each_tuple(no, k, |idx| {
        let mut values = Vec::with_capacity(k * m);
        let mut w = Rational::one();
        let mut cw = Vec::new();
        for (s, &i) in idx.iter().enumerate() {
            values.extend_from_slice(&game.oracles[i].values);
            w *= &game.weights[i];
            for (c, p) in &game.challenge_weights[i] {
                cw.push((s * nc + c, &salt_w * p));
            }
        }
        oracles.push(OracleTable {
            range: game.range,
            values,
        });
        weights.push(w);
        cws.push(cw);
    });
    let challenges = (0..k)
        .flat_map(|s| {
            game.challenges
                .iter()
                .map(move |c| Term::Tuple(vec![Term::Int(s as u32), c.clone()]))
        })
        .collect();
    let inner = game.predicate.clone();
    let pred: Predicate = Arc::new(move |f, ch, a| match ch.as_tuple() {
        Some([Term::Int(s), c]) => {
            let s = *s as usize;
            (s + 1) * m <= f.len() && inner(&f[s * m..(s + 1) * m], c, a)
        }
        _ => false,
    });
    Game::new(
        format!("salt({},K={k})", game.label),
        k * m,
        game.range,
        oracles,
        weights,
        challenges,
        cws,
        game.answers.clone(),
        pred,
    )
}

/// Bayes-conditions the oracle distribution on a challenge, giving a plain game.
///
/// Oracles with zero posterior weight are kept (with weight zero) so the
/// oracle list stays index-aligned with the input game.
pub fn condition_on_challenge(game: &Game, ch: &Term) -> Result<Game> {
    let ci = game.challenge_index(ch).ok_or_else(|| {
        Error::InvalidSpec(format!("challenge {ch} is not in the challenge space"))
    })?;
    condition_on_index(game, ci)
}

pub fn condition_on_index(game: &Game, ci: usize) -> Result<Game> {
    let joint: Vec<Rational> = (0..game.oracles.len())
        .map(|i| &game.weights[i] * game.challenge_prob(i, ci))
        .collect();
    let marginal: Rational = joint.iter().sum();
    if marginal.is_zero() {
        return Err(Error::ZeroProbabilityChallenge);
    }
    let weights = joint.into_iter().map(|w| w / &marginal).collect();
    let ch = game.challenges[ci].clone();
    let inner = game.predicate.clone();
    let pred: Predicate = Arc::new(move |f, _, a| inner(f, &ch, a));
    Game::plain(
        format!("{}|ch={}", game.label, game.challenges[ci]),
        game.domain,
        game.range,
        game.oracles.clone(),
        weights,
        game.answers.clone(),
        pred,
    )
}

/// `n` i.i.d. challenges against one oracle; wins iff every coordinate wins.
pub fn multi_challenge(game: &Game, n: usize, budget: &Budget) -> Result<Game> {
    let nc = game.challenges.len();
    let na = game.answers.len();
    budget.check_space("challenge space", sat_pow(nc as u128, n as u64))?;
    budget.check_space("answer space", sat_pow(na as u128, n as u64))?;
    let mut challenges = Vec::new();
    for_each_tuple(nc, n, |idx| {
        challenges.push(Term::Tuple(
            idx.iter().map(|&i| game.challenges[i].clone()).collect(),
        ));
    });
    let mut answers = Vec::new();
    for_each_tuple(na, n, |idx| {
        answers.push(Term::Tuple(
            idx.iter().map(|&i| game.answers[i].clone()).collect(),
        ));
    });
    let cws = (0..game.oracles.len())
        .map(|i| {
            let dense: HashMap<usize, Rational> =
                game.challenge_weights[i].iter().cloned().collect();
            let mut row = Vec::new();
            let mut ci = 0usize;
            for_each_tuple(nc, n, |idx| {
                let w = idx.iter().fold(Rational::one(), |acc, c| {
                    acc * dense.get(c).cloned().unwrap_or_else(Rational::zero)
                });
                if !w.is_zero() {
                    row.push((ci, w));
                }
                ci += 1;
            });
            row
        })
        .collect();
    let inner = game.predicate.clone();
    let pred: Predicate = Arc::new(move |f, ch, a| match (ch.as_tuple(), a.as_tuple()) {
        (Some(cs), Some(as_)) if cs.len() == n && as_.len() == n => {
            cs.iter().zip(as_).all(|(c, a)| inner(f, c, a))
        }
        _ => false,
    });
    Game::new(
        format!("{}^{n}", game.label),
        game.domain,
        game.range,
        game.oracles.clone(),
        game.weights.clone(),
        challenges,
        cws,
        answers,
        pred,
    )
}

/// Sum over challenges of Pr[ch] times the conditioned distribution, per oracle.
pub fn remix(game: &Game) -> Result<Vec<Rational>> {
    let marginal = game.challenge_marginal();
    let mut mix = vec![Rational::zero(); game.oracles.len()];
    for (ci, pm) in marginal.iter().enumerate() {
        if pm.is_zero() {
            continue;
        }
        let cond = condition_on_index(game, ci)?;
        for (i, w) in cond.weights.iter().enumerate() {
            mix[i] += pm * w;
        }
    }
    Ok(mix)
}

/// Restriction of a game to an explicit sub-list of oracles with new weights.
pub fn with_oracles(game: &Game, keep: &[usize], weights: Vec<Rational>) -> Result<Game> {
    Game::new(
        game.label.clone(),
        game.domain,
        game.range,
        keep.iter().map(|&i| game.oracles[i].clone()).collect(),
        weights,
        game.challenges.clone(),
        keep.iter()
            .map(|&i| game.challenge_weights[i].clone())
            .collect(),
        game.answers.clone(),
        game.predicate.clone(),
    )
}

/// Total weight of a list; handy in tests and reports.
pub fn total(ws: &[Rational]) -> Rational {
    ws.iter().fold(int(0), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::rat;

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn enumerate_is_lexicographic() {
        let t = OracleTable::enumerate(2, 3, &b()).unwrap();
        assert_eq!(t.len(), 9);
        assert_eq!(t[0].values, vec![0, 0]);
        assert_eq!(t[1].values, vec![0, 1]);
        assert_eq!(t[3].values, vec![1, 0]);
        let mut sorted = t.clone();
        sorted.sort();
        assert_eq!(sorted, t);
    }

    #[test]
    fn enumerate_respects_budget() {
        let tight = Budget {
            max_oracles: 8,
            ..b()
        };
        assert!(matches!(
            OracleTable::enumerate(4, 2, &tight),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn preimage_zero_small() {
        let g = build_game(&GameSpec::new(Family::PreimageZero, 1, 2), &b()).unwrap();
        assert_eq!(g.oracles().len(), 2);
        assert!(g.is_plain());
        assert_eq!(g.weights(), &[rat(1, 2), rat(1, 2)]);
        assert!(g.evaluate(&[0], &Term::Unit, &Term::Int(0)));
        assert!(!g.evaluate(&[1], &Term::Unit, &Term::Int(0)));
    }

    #[test]
    fn collision_predicate_examples() {
        let g = build_game(&GameSpec::new(Family::Collision, 2, 2), &b()).unwrap();
        assert_eq!(g.oracles().len(), 4);
        let pair = Term::Tuple(vec![Term::Int(0), Term::Int(1)]);
        assert!(g.evaluate(&[1, 1], &Term::Unit, &pair));
        for a in g.answers() {
            assert!(!g.evaluate(&[0, 1], &Term::Unit, a));
        }
        let same = Term::Tuple(vec![Term::Int(0), Term::Int(0)]);
        assert!(!g.evaluate(&[1, 1], &Term::Unit, &same));
    }

    #[test]
    fn predicate_depends_only_on_image() {
        let g = build_game(&GameSpec::new(Family::PreimageZero, 3, 3), &b()).unwrap();
        for o in g.oracles() {
            for a in g.answers() {
                let x = a.as_int().unwrap() as usize;
                assert_eq!(evaluate_predicate(&g, o, &Term::Unit, a), o.values[x] == 0);
            }
        }
    }

    #[test]
    fn inversion_has_uniform_challenge() {
        let g = build_game(&GameSpec::new(Family::Inversion, 2, 2), &b()).unwrap();
        assert_eq!(g.oracles().len(), 4);
        assert_eq!(g.challenges(), &[Term::Int(0), Term::Int(1)]);
        for i in 0..4 {
            assert_eq!(g.challenge_prob(i, 0), rat(1, 2));
        }
        assert!(g.evaluate(&[1, 0], &Term::Int(0), &Term::Int(1)));
    }

    #[test]
    fn inversion_image_conditioning() {
        // Pr[ch=1 | f] = |f^-1(1)| / 2, then normalised
        let g = build_game(&GameSpec::new(Family::InversionImage, 2, 2), &b()).unwrap();
        let c = condition_on_challenge(&g, &Term::Int(1)).unwrap();
        assert_eq!(c.weights(), &[rat(0, 1), rat(1, 4), rat(1, 4), rat(1, 2)]);
        assert!(c.is_plain());
    }

    #[test]
    fn uniform_inversion_conditioning_is_flat() {
        let g = build_game(&GameSpec::new(Family::Inversion, 2, 2), &b()).unwrap();
        let c = condition_on_challenge(&g, &Term::Int(1)).unwrap();
        assert_eq!(c.weights(), g.weights());
        assert!(c.evaluate(&[0, 1], &Term::Unit, &Term::Int(1)));
    }

    #[test]
    fn conditioning_plain_game_is_identity() {
        let g = build_game(&GameSpec::new(Family::Collision, 2, 3), &b()).unwrap();
        let c = condition_on_challenge(&g, &Term::Unit).unwrap();
        assert_eq!(c.weights(), g.weights());
    }

    #[test]
    fn zero_probability_challenge_is_rejected() {
        let spec = GameSpec {
            tables: Some(vec![vec![0, 0]]),
            ..GameSpec::new(Family::CustomTable, 2, 2)
        };
        let g = build_game(&spec, &b()).unwrap();
        // uniform challenge: never zero, so build an image-challenge game instead
        assert!(condition_on_challenge(&g, &Term::Int(1)).is_ok());
        let img = build_game(&GameSpec::new(Family::InversionImage, 1, 2), &b()).unwrap();
        let only_zero = with_oracles(&img, &[0], vec![rat(1, 1)]).unwrap();
        assert_eq!(
            condition_on_challenge(&only_zero, &Term::Int(1)).unwrap_err(),
            Error::ZeroProbabilityChallenge
        );
        assert!(condition_on_challenge(&only_zero, &Term::Int(7)).is_err());
    }

    #[test]
    fn remix_reproduces_prior() {
        for fam in [Family::Inversion, Family::InversionImage] {
            let g = build_game(&GameSpec::new(fam, 2, 3), &b()).unwrap();
            assert_eq!(remix(&g).unwrap(), g.weights());
        }
    }

    #[test]
    fn salt_plain_game() {
        let g = build_game(&GameSpec::new(Family::PreimageZero, 1, 2).salted(2), &b()).unwrap();
        assert_eq!(g.oracles().len(), 4);
        assert_eq!(g.domain(), 2);
        assert!(g.weights().iter().all(|w| *w == rat(1, 4)));
        assert_eq!(g.challenges().len(), 2);
        // salt 1 reads cell 1
        let ch1 = Term::Tuple(vec![Term::Int(1), Term::Unit]);
        assert!(g.evaluate(&[1, 0], &ch1, &Term::Int(0)));
        assert!(!g.evaluate(&[0, 1], &ch1, &Term::Int(0)));
    }

    #[test]
    fn salt_one_matches_base() {
        let base = build_game(&GameSpec::new(Family::Inversion, 2, 2), &b()).unwrap();
        let s = salt(&base, 1, &b()).unwrap();
        assert_eq!(s.oracles(), base.oracles());
        assert_eq!(s.weights(), base.weights());
        assert_eq!(s.challenges().len(), base.challenges().len());
        for (i, o) in s.oracles().iter().enumerate() {
            for (ci, ch) in s.challenges().iter().enumerate() {
                let inner = &ch.as_tuple().unwrap()[1];
                let bi = base.challenge_index(inner).unwrap();
                assert_eq!(s.challenge_prob(i, ci), base.challenge_prob(i, bi));
                for a in s.answers() {
                    assert_eq!(
                        s.evaluate(&o.values, ch, a),
                        base.evaluate(&o.values, inner, a)
                    );
                }
            }
        }
    }

    #[test]
    fn salted_marginals_factor() {
        for k in [2usize, 3] {
            let base = build_game(&GameSpec::new(Family::InversionImage, 1, 2), &b()).unwrap();
            let base = with_oracles(&base, &[0, 1], vec![rat(1, 3), rat(2, 3)]).unwrap();
            let s = salt(&base, k, &b()).unwrap();
            for (o, w) in s.oracles().iter().zip(s.weights()) {
                let expect: Rational = (0..k)
                    .map(|j| {
                        let v = o.values[j];
                        base.weights()[v as usize].clone()
                    })
                    .product();
                assert_eq!(*w, expect);
            }
        }
    }

    #[test]
    fn multi_challenge_zero_is_trivial() {
        let g = build_game(&GameSpec::new(Family::Inversion, 2, 2), &b()).unwrap();
        let g0 = multi_challenge(&g, 0, &b()).unwrap();
        assert!(g0.is_plain());
        assert_eq!(g0.answers().len(), 1);
        for o in g0.oracles() {
            assert!(g0.evaluate(&o.values, &g0.challenges()[0], &g0.answers()[0]));
        }
    }

    #[test]
    fn multi_challenge_two_inversions() {
        let g = build_game(&GameSpec::new(Family::Inversion, 2, 2), &b()).unwrap();
        let g2 = multi_challenge(&g, 2, &b()).unwrap();
        assert_eq!(g2.challenges().len(), 4);
        assert_eq!(g2.answers().len(), 4);
        for i in 0..g2.oracles().len() {
            assert_eq!(g2.challenge_weights(i).len(), 4);
            assert!(g2.challenge_weights(i).iter().all(|(_, w)| *w == rat(1, 4)));
        }
        // exhaustive conjunction check
        for o in g2.oracles() {
            for ch in g2.challenges() {
                for a in g2.answers() {
                    let cs = ch.as_tuple().unwrap();
                    let as_ = a.as_tuple().unwrap();
                    let expect = g.evaluate(&o.values, &cs[0], &as_[0])
                        && g.evaluate(&o.values, &cs[1], &as_[1]);
                    assert_eq!(g2.evaluate(&o.values, ch, a), expect);
                }
            }
        }
    }

    #[test]
    fn ksum_answers_and_predicate() {
        let spec = GameSpec {
            k: Some(2),
            ..GameSpec::new(Family::Ksum, 3, 3)
        };
        let g = build_game(&spec, &b()).unwrap();
        assert_eq!(g.answers().len(), 3);
        let a = Term::Tuple(vec![Term::Int(0), Term::Int(2)]);
        assert!(g.evaluate(&[1, 0, 2], &Term::Unit, &a));
        assert!(!g.evaluate(&[1, 0, 1], &Term::Unit, &a));
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let ok = GameSpec::from_json(r#"{"family":"collision","M":2,"N":2,"K":1}"#).unwrap();
        assert_eq!(ok, GameSpec::new(Family::Collision, 2, 2));
        assert!(GameSpec::from_json(r#"{"family":"collision","M":2,"N":2,"X":1}"#).is_err());
        assert!(GameSpec::from_json(r#"{"family":"nope","M":2,"N":2}"#).is_err());
        let custom =
            GameSpec::from_json(r#"{"family":"custom_table","M":2,"N":2,"tables":[[0,1],[1,0]]}"#)
                .unwrap();
        let g = build_game(&custom, &b()).unwrap();
        assert_eq!(g.oracles().len(), 2);
    }

    #[test]
    fn invalid_specs() {
        assert!(build_game(&GameSpec::new(Family::Collision, 0, 2), &b()).is_err());
        assert!(build_game(&GameSpec::new(Family::Ksum, 2, 2), &b()).is_err());
        let bad = GameSpec {
            tables: Some(vec![vec![0, 5]]),
            ..GameSpec::new(Family::CustomTable, 2, 2)
        };
        assert!(build_game(&bad, &b()).is_err());
        let short = GameSpec {
            tables: Some(vec![vec![0]]),
            ..GameSpec::new(Family::CustomTable, 2, 2)
        };
        assert!(build_game(&short, &b()).is_err());
        let stray = GameSpec {
            k: Some(2),
            ..GameSpec::new(Family::Collision, 2, 2)
        };
        assert!(build_game(&stray, &b()).is_err());
    }

    #[test]
    fn partial_assignment_consistency() {
        let mut u = PartialAssignment::empty(3, 2);
        let f = OracleTable::new(2, vec![1, 0, 1]).unwrap();
        assert!(u.is_consistent(&f));
        u.set(1, 0);
        assert!(u.is_consistent(&f));
        u.set(2, 0);
        assert!(!u.is_consistent(&f));
        assert_eq!(u.unset_count(), 1);
    }

    #[test]
    fn term_json_round_trip() {
        let t = Term::Tuple(vec![
            Term::Int(1),
            Term::Unit,
            Term::Tuple(vec![Term::Int(0)]),
        ]);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "[1,null,[0]]");
        assert_eq!(serde_json::from_str::<Term>(&s).unwrap(), t);
    }
}
