//! Lookup-plus-online attacks on salted games and their Monte Carlo estimates.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::game::Family;
use crate::ratio::{one, rat, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFamily {
    Collision,
    PreimageZero,
    Inversion,
}

impl TryFrom<Family> for AttackFamily {
    type Error = Error;

    fn try_from(f: Family) -> Result<Self> {
        match f {
            Family::Collision => Ok(AttackFamily::Collision),
            Family::PreimageZero => Ok(AttackFamily::PreimageZero),
            Family::Inversion => Ok(AttackFamily::Inversion),
            other => Err(Error::Unsupported(format!(
                "no canonical attack for {}",
                other.name()
            ))),
        }
    }
}

fn width(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AttackParams {
    pub family: AttackFamily,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "T")]
    pub t: usize,
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 || self.n == 0 {
            return invalid("K, M and N must be positive");
        }
        Ok(())
    }

    pub fn salt_bits(&self) -> u32 {
        width(self.k as u64)
    }

    pub fn answer_bits(&self) -> u32 {
        let x = width(self.m as u64);
        match self.family {
            AttackFamily::Collision => 2 * x,
            AttackFamily::PreimageZero => x,
            AttackFamily::Inversion => width(self.n as u64) + x,
        }
    }

    /// Bits per stored record: salt index then answer.
    pub fn entry_bits(&self) -> u32 {
        (self.salt_bits() + self.answer_bits()).max(1)
    }

    pub fn capacity(&self) -> usize {
        ((self.s / self.entry_bits() as u64) as usize).min(self.k)
    }
}

/// Packed advice: fixed-width records, salt first, most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdviceTable {
    pub s_bits: u64,
    pub salt_bits: u32,
    pub answer_fields: Vec<u32>,
    pub count: usize,
    pub bits: Vec<bool>,
}

impl AdviceTable {
    pub fn entry_bits(&self) -> u32 {
        (self.salt_bits + self.answer_fields.iter().sum::<u32>()).max(1)
    }

    pub fn encode(params: &AttackParams, entries: &[(usize, Vec<u32>)]) -> Result<AdviceTable> {
        let x = width(params.m as u64);
        let answer_fields = match params.family {
            AttackFamily::Collision => vec![x, x],
            AttackFamily::PreimageZero => vec![x],
            AttackFamily::Inversion => vec![width(params.n as u64), x],
        };
        let mut t = AdviceTable {
            s_bits: params.s,
            salt_bits: params.salt_bits(),
            answer_fields,
            count: entries.len(),
            bits: Vec::new(),
        };
        if entries.len() as u64 * t.entry_bits() as u64 > params.s {
            return invalid("entries do not fit in S bits");
        }
        let push = |bits: &mut Vec<bool>, v: u64, w: u32| -> Result<()> {
            if w < 64 && v >> w != 0 {
                return invalid(format!("value {v} does not fit in {w} bits"));
            }
            bits.extend((0..w).rev().map(|i| (v >> i) & 1 == 1));
            Ok(())
        };
        for (salt, answer) in entries {
            if answer.len() != t.answer_fields.len() {
                return invalid("answer arity does not match the family");
            }
            push(&mut t.bits, *salt as u64, t.salt_bits)?;
            for (v, w) in answer.iter().zip(t.answer_fields.clone()) {
                push(&mut t.bits, *v as u64, w)?;
            }
            // a zero-width record still occupies one bit
            if t.salt_bits + t.answer_fields.iter().sum::<u32>() == 0 {
                t.bits.push(false);
            }
        }
        t.bits.resize(params.s as usize, false);
        Ok(t)
    }

    pub fn decode(&self) -> Vec<(usize, Vec<u32>)> {
        let mut pos = 0usize;
        let mut read = |w: u32| -> u64 {
            let v = self.bits[pos..pos + w as usize]
                .iter()
                .fold(0u64, |acc, &b| (acc << 1) | b as u64);
            pos += w as usize;
            v
        };
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let salt = read(self.salt_bits) as usize;
            let answer = self.answer_fields.iter().map(|&w| read(w) as u32).collect();
            if self.salt_bits + self.answer_fields.iter().sum::<u32>() == 0 {
                read(1);
            }
            out.push((salt, answer));
        }
        out
    }

    pub fn lookup(&self, salt: usize) -> Option<Vec<u32>> {
        self.decode()
            .into_iter()
            .find(|(s, _)| *s == salt)
            .map(|(_, a)| a)
    }
}

/// A salted random oracle sampled one salt at a time.
pub struct LazySaltedOracle<'r> {
    m: usize,
    n: u32,
    rng: &'r mut ChaCha8Rng,
    salts: Vec<Option<Vec<u32>>>,
}

impl<'r> LazySaltedOracle<'r> {
    pub fn new(k: usize, m: usize, n: u32, rng: &'r mut ChaCha8Rng) -> Self {
        LazySaltedOracle {
            m,
            n,
            rng,
            salts: vec![None; k],
        }
    }

    pub fn table(&mut self, salt: usize) -> &[u32] {
        if self.salts[salt].is_none() {
            let (m, n) = (self.m, self.n);
            let t = (0..m).map(|_| self.rng.gen_range(0..n)).collect();
            self.salts[salt] = Some(t);
        }
        self.salts[salt].as_deref().expect("just sampled")
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }
}

/// The canonical winning answer stored for one salt, if the salt has one.
fn best_answer(family: AttackFamily, table: &[u32]) -> Option<Vec<u32>> {
    match family {
        AttackFamily::Collision => {
            let mut first: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
            let mut best: Option<(usize, usize)> = None;
            for (x, &y) in table.iter().enumerate() {
                if let Some(&x0) = first.get(&y) {
                    if best.is_none_or(|b| (x0, x) < b) {
                        best = Some((x0, x));
                    }
                } else {
                    first.insert(y, x);
                }
            }
            best.map(|(a, b)| vec![a as u32, b as u32])
        }
        AttackFamily::PreimageZero => table.iter().position(|&y| y == 0).map(|x| vec![x as u32]),
        AttackFamily::Inversion => {
            let (x, y) = table.iter().enumerate().min_by_key(|(x, y)| (**y, *x))?;
            Some(vec![*y, x as u32])
        }
    }
}

/// Stores answers for the first salts (in order) that have one, up to capacity.
pub fn build_lookup_advice(
    params: &AttackParams,
    oracle: &mut LazySaltedOracle<'_>,
) -> Result<AdviceTable> {
    let cap = params.capacity();
    let mut entries = Vec::with_capacity(cap);
    for salt in 0..params.k {
        if entries.len() == cap {
            break;
        }
        if let Some(a) = best_answer(params.family, oracle.table(salt)) {
            entries.push((salt, a));
        }
    }
    AdviceTable::encode(params, &entries)
}

/// Advice lookup for the challenge salt, else a generic `T`-query online attack.
#[derive(Clone, Copy, Debug)]
pub struct CombinedAttack {
    pub params: AttackParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub won: bool,
    pub stored: usize,
    pub advice_hit: bool,
}

pub fn combined_attack(params: AttackParams) -> Result<CombinedAttack> {
    params.validate()?;
    Ok(CombinedAttack { params })
}

impl CombinedAttack {
    pub fn trial(&self, rng: &mut ChaCha8Rng) -> TrialOutcome {
        let p = self.params;
        let mut oracle = LazySaltedOracle::new(p.k, p.m, p.n, rng);
        let advice = build_lookup_advice(&p, &mut oracle).expect("capacity respects S");
        let salt = oracle.rng().gen_range(0..p.k);
        let target = match p.family {
            AttackFamily::Inversion => Some(oracle.rng().gen_range(0..p.n)),
            _ => None,
        };
        let stored = advice.count;
        if let Some(a) = advice.lookup(salt) {
            let table = oracle.table(salt);
            let won = match p.family {
                AttackFamily::Collision => {
                    a[0] != a[1] && table[a[0] as usize] == table[a[1] as usize]
                }
                AttackFamily::PreimageZero => table[a[0] as usize] == 0,
                AttackFamily::Inversion => Some(a[0]) == target && table[a[1] as usize] == a[0],
            };
            if won || p.family != AttackFamily::Inversion {
                return TrialOutcome {
                    won,
                    stored,
                    advice_hit: true,
                };
            }
        }
        oracle.table(salt);
        let picks = sample(oracle.rng(), p.m, p.t.min(p.m)).into_vec();
        let wanted = target.unwrap_or(0);
        let table = oracle.salts[salt].as_deref().expect("sampled");
        let won = match p.family {
            AttackFamily::Collision => {
                let mut seen = std::collections::HashSet::new();
                picks.iter().any(|&x| !seen.insert(table[x]))
            }
            _ => {
                if picks.iter().any(|&x| table[x] == wanted) {
                    true
                } else if picks.len() < p.m {
                    // guess one unqueried point
                    let rest: Vec<usize> = (0..p.m).filter(|x| !picks.contains(x)).collect();
                    let x = rest[oracle.rng().gen_range(0..rest.len())];
                    oracle.salts[salt].as_deref().expect("sampled")[x] == wanted
                } else {
                    false
                }
            }
        };
        TrialOutcome {
            won,
            stored,
            advice_hit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub stderr: f64,
    pub stored_salts: f64,
    pub trials: u64,
    pub entry_bits: u32,
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Mean success over `trials` independent oracles; trial `i` uses stream `i`.
pub fn monte_carlo_advantage(attack: &CombinedAttack, trials: u64, seed: u64) -> Result<McReport> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let (wins, stored) = (0..trials)
        .into_par_iter()
        .map(|i| {
            let o = attack.trial(&mut trial_rng(seed, i));
            (o.won as u64, o.stored as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p = wins as f64 / trials as f64;
    Ok(McReport {
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        stored_salts: stored as f64 / trials as f64,
        trials,
        entry_bits: attack.params.entry_bits(),
    })
}

/// Probability that `t` uniform values in `[n]` are not all distinct.
pub fn birthday_probability(t: usize, n: u32) -> Rational {
    let mut none = one();
    for i in 0..t as i64 {
        none *= rat(n as i64 - i, n as i64).max(Rational::from_integer(0.into()));
    }
    one() - none
}

/// Optimal unsalted collision probability with `t` queries when `m > t`:
/// query fresh points, and on a miss pair a queried point with a new one.
pub fn collision_value(t: usize, m: usize, n: u32) -> Result<Rational> {
    if n == 0 || m <= t.max(1) {
        return invalid("need M > max(T, 1) and N > 0");
    }
    Ok(one() - (one() - birthday_probability(t, n)) * (one() - rat(1, n as i64)))
}
