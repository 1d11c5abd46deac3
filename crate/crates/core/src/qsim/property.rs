//! Database properties, transition probabilities and the projections built on them.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use super::{Dims, QState};
use crate::budget::{sat_pow, Budget};
use crate::error::{invalid, Result};
use crate::ratio::{rat, Rational};

type CellPredicate = Arc<dyn Fn(&[Option<u32>], u32) -> bool + Send + Sync>;

/// A property of a single-salt database, given as its `M` cells.
#[derive(Clone)]
pub struct PropertySpec {
    pub name: String,
    pub monotone: bool,
    predicate: CellPredicate,
}

impl fmt::Debug for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropertySpec")
            .field("name", &self.name)
            .field("monotone", &self.monotone)
            .finish()
    }
}

impl PropertySpec {
    pub fn custom(
        name: impl Into<String>,
        monotone: bool,
        f: impl Fn(&[Option<u32>], u32) -> bool + Send + Sync + 'static,
    ) -> Self {
        PropertySpec {
            name: name.into(),
            monotone,
            predicate: Arc::new(f),
        }
    }

    pub fn collision() -> Self {
        Self::custom("collision", true, |cells, _| {
            let vals: Vec<u32> = cells.iter().flatten().copied().collect();
            (0..vals.len()).any(|i| vals[i + 1..].contains(&vals[i]))
        })
    }

    pub fn preimage_zero() -> Self {
        Self::custom("preimage_zero", true, |cells, _| cells.contains(&Some(0)))
    }

    /// `k` distinct defined points whose values sum to zero mod `N`.
    pub fn ksum(k: usize) -> Self {
        Self::custom(format!("ksum{k}"), true, move |cells, n| {
            let vals: Vec<u64> = cells.iter().flatten().map(|&v| v as u64).collect();
            fn rec(vals: &[u64], k: usize, acc: u64, n: u64) -> bool {
                if k == 0 {
                    return acc.is_multiple_of(n);
                }
                (0..vals.len()).any(|i| rec(&vals[i + 1..], k - 1, acc + vals[i], n))
            }
            k > 0 && rec(&vals, k, 0, n as u64)
        })
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "collision" => Ok(Self::collision()),
            "preimage_zero" => Ok(Self::preimage_zero()),
            s if s.starts_with("ksum") => match s[4..].parse::<usize>() {
                Ok(k) if k > 0 => Ok(Self::ksum(k)),
                _ => invalid(format!("bad ksum arity in {s}")),
            },
            other => invalid(format!("unknown property {other}")),
        }
    }

    pub fn holds(&self, cells: &[Option<u32>], n: u32) -> bool {
        (self.predicate)(cells, n)
    }

    /// Exhaustive check of `D ∈ P, D ⊆ D' ⇒ D' ∈ P` on `m` cells.
    pub fn check_monotone(&self, m: usize, n: u32) -> bool {
        let all = partial_assignments(m, n);
        all.iter().filter(|d| self.holds(d, n)).all(|d| {
            (0..m).filter(|&x| d[x].is_none()).all(|x| {
                (0..n).all(|y| {
                    let mut e = d.clone();
                    e[x] = Some(y);
                    self.holds(&e, n)
                })
            })
        })
    }
}

/// Every assignment of `m` cells over `[n] ∪ {⊥}`.
pub fn partial_assignments(m: usize, n: u32) -> Vec<Vec<Option<u32>>> {
    let mut out: Vec<Vec<Option<u32>>> = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                std::iter::once(None).chain((0..n).map(Some)).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Largest chance that one fresh point completes `P`, over databases outside
/// `P` of size at most `nu`.
pub fn transition_probability(
    p: &PropertySpec,
    m: usize,
    n: u32,
    nu: usize,
    budget: &Budget,
) -> Result<Rational> {
    budget.check_enumeration(
        "transition probability",
        sat_pow(n as u128 + 1, m as u64).saturating_mul(m as u128),
    )?;
    let mut best = Rational::zero();
    for d in partial_assignments(m, n) {
        if d.iter().filter(|c| c.is_some()).count() > nu || p.holds(&d, n) {
            continue;
        }
        for x in (0..m).filter(|&x| d[x].is_none()) {
            let mut e = d.clone();
            let hits = (0..n)
                .filter(|&y| {
                    e[x] = Some(y);
                    p.holds(&e, n)
                })
                .count();
            let q = rat(hits as i64, n as i64);
            if q > best {
                best = q;
            }
        }
    }
    Ok(best)
}

/// The interpolating polynomial through `(t, p_t)` for `t = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPoly {
    pub values: Vec<Rational>,
}

impl TransitionPoly {
    pub fn fit(p: &PropertySpec, m: usize, n: u32, points: usize, budget: &Budget) -> Result<Self> {
        if points == 0 {
            return invalid("need at least one point");
        }
        let values = (0..points)
            .map(|t| transition_probability(p, m, n, t, budget))
            .collect::<Result<_>>()?;
        Ok(TransitionPoly { values })
    }

    /// Lagrange form, exact at every rational `t`.
    pub fn eval(&self, t: &Rational) -> Rational {
        let k = self.values.len();
        let mut acc = Rational::zero();
        for (i, v) in self.values.iter().enumerate() {
            let mut basis = Rational::one();
            for j in (0..k).filter(|&j| j != i) {
                basis *= (t - Rational::from_integer(j.into()))
                    / Rational::from_integer((i as i64 - j as i64).into());
            }
            acc += v * basis;
        }
        acc
    }
}

/// Per-database bookkeeping reused by every projection.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub dims: Dims,
    /// Bit `k` set when salt `k` satisfies the property.
    pub success: Vec<u64>,
    pub size: Vec<u32>,
    /// `salt_size[db * K + k]`.
    pub salt_size: Vec<u32>,
}

impl Classifier {
    pub fn new(dims: Dims, p: &PropertySpec) -> Result<Classifier> {
        if dims.salts > 64 {
            return invalid("at most 64 salts");
        }
        let count = dims.db_count();
        let (mut success, mut size, mut salt_size) = (
            Vec::with_capacity(count),
            Vec::with_capacity(count),
            Vec::with_capacity(count * dims.salts),
        );
        for db in 0..count {
            let cells = dims.decode_db(db);
            let mut bits = 0u64;
            for k in 0..dims.salts {
                let part = &cells[k * dims.m..(k + 1) * dims.m];
                if p.holds(part, dims.n) {
                    bits |= 1 << k;
                }
                salt_size.push(part.iter().filter(|c| c.is_some()).count() as u32);
            }
            success.push(bits);
            size.push(cells.iter().filter(|c| c.is_some()).count() as u32);
        }
        Ok(Classifier {
            dims,
            success,
            size,
            salt_size,
        })
    }

    pub fn succeeds(&self, db: usize, k: usize) -> bool {
        self.success[db] >> k & 1 == 1
    }

    pub fn count(&self, db: usize) -> u32 {
        self.success[db].count_ones()
    }

    pub fn salt_size(&self, db: usize, k: usize) -> u32 {
        self.salt_size[db * self.dims.salts + k]
    }

    /// Salt addressed by the query register.
    pub fn query_salt(&self, a: usize) -> usize {
        self.dims.salt_of(self.dims.a_parts(a).0)
    }

    /// Whether the queried cell is defined in the database.
    pub fn query_defined(&self, db: usize, a: usize) -> bool {
        let x = self.dims.a_parts(a).0;
        (db / self.dims.stride(x)) % (self.dims.n as usize + 1) != self.dims.n as usize
    }

    /// `t - |D| + Σ_{k∈S} |D|_k|`, or `None` when `|D| > t`.
    pub fn used(&self, db: usize, t: usize, salts: &[usize]) -> Option<usize> {
        let size = self.size[db] as usize;
        (t >= size).then(|| {
            t - size
                + salts
                    .iter()
                    .map(|&k| self.salt_size(db, k) as usize)
                    .sum::<usize>()
        })
    }
}

/// Which salt-count projection to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaltMode {
    /// `Λ^{=r}`.
    Exact(u32),
    /// `Λ^{≥r}`.
    AtLeast(u32),
    /// `Λ_k`.
    Salt(usize),
    /// `I - Λ_k`.
    NotSalt(usize),
}

impl SaltMode {
    pub fn accepts(&self, c: &Classifier, db: usize) -> bool {
        match *self {
            SaltMode::Exact(r) => c.count(db) == r,
            SaltMode::AtLeast(r) => c.count(db) >= r,
            SaltMode::Salt(k) => c.succeeds(db, k),
            SaltMode::NotSalt(k) => !c.succeeds(db, k),
        }
    }
}

pub fn project_salt_counts(state: &QState, c: &Classifier, mode: SaltMode) -> (QState, f64) {
    let s = state.project(|db, _| mode.accepts(c, db));
    let w = s.norm_sqr();
    (s, w)
}

/// `Λ_P` on the whole database, treated as one oracle on all cells.
pub fn project_property(state: &QState, p: &PropertySpec) -> (QState, f64) {
    let dims = state.dims;
    let ok: Vec<bool> = (0..dims.db_count())
        .map(|db| p.holds(&dims.decode_db(db), dims.n))
        .collect();
    let s = state.project(|db, _| ok[db]);
    let w = s.norm_sqr();
    (s, w)
}

/// `τ_k`: the query addresses salt `k`.
pub fn project_query_salt(state: &QState, c: &Classifier, k: usize) -> QState {
    state.project(|_, a| c.query_salt(a) == k)
}

/// `Γ_k^{≤t}`: the query addresses salt `k` and `|D|_k| ≤ t`.
pub fn project_gamma_le(state: &QState, c: &Classifier, k: usize, t: usize) -> QState {
    state.project(|db, a| c.query_salt(a) == k && c.salt_size(db, k) as usize <= t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::Budget;
    use crate::qsim::{run_circuit, CircuitDescription, OracleKind};

    #[test]
    fn families_are_monotone() {
        for p in [
            PropertySpec::collision(),
            PropertySpec::preimage_zero(),
            PropertySpec::ksum(2),
        ] {
            assert!(p.check_monotone(3, 3), "{}", p.name);
        }
        let odd =
            PropertySpec::custom("exactly_one", false, |c, _| c.iter().flatten().count() == 1);
        assert!(!odd.check_monotone(2, 2));
    }

    #[test]
    fn transition_probabilities() {
        let b = Budget::default();
        for nu in 0..3 {
            assert_eq!(
                transition_probability(&PropertySpec::preimage_zero(), 3, 4, nu, &b).unwrap(),
                rat(1, 4)
            );
        }
        assert_eq!(
            transition_probability(&PropertySpec::collision(), 3, 4, 2, &b).unwrap(),
            rat(1, 2)
        );
        let seq: Vec<Rational> = (0..4)
            .map(|nu| transition_probability(&PropertySpec::collision(), 4, 4, nu, &b).unwrap())
            .collect();
        assert_eq!(seq, vec![rat(0, 1), rat(1, 4), rat(1, 2), rat(3, 4)]);
        assert!(seq.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn polynomial_extension_interpolates() {
        let poly =
            TransitionPoly::fit(&PropertySpec::collision(), 4, 4, 3, &Budget::default()).unwrap();
        assert_eq!(poly.eval(&rat(3, 2)), rat(3, 8));
        assert_eq!(poly.eval(&rat(2, 1)), rat(1, 2));
    }

    #[test]
    fn salt_count_projections_resolve_identity() {
        let dims = Dims::new(2, 2, 2, 1).unwrap();
        let c = Classifier::new(dims, &PropertySpec::collision()).unwrap();
        let st = run_circuit(
            &CircuitDescription::random(dims, 3, OracleKind::Cphso, 9),
            &Budget::default(),
        )
        .unwrap();
        let total: f64 = (0..=2)
            .map(|r| project_salt_counts(&st, &c, SaltMode::Exact(r)).1)
            .sum();
        assert!((total - st.norm_sqr()).abs() < 1e-10);
        assert!(
            project_salt_counts(&st, &c, SaltMode::AtLeast(0))
                .0
                .distance(&st)
                == 0.0
        );
        let all = project_salt_counts(&st, &c, SaltMode::Exact(2)).0;
        let prod = project_salt_counts(
            &project_salt_counts(&st, &c, SaltMode::Salt(0)).0,
            &c,
            SaltMode::Salt(1),
        )
        .0;
        assert_eq!(all, prod);
    }

    #[test]
    fn empty_database_never_has_a_property() {
        let dims = Dims::new(1, 2, 2, 1).unwrap();
        let st = QState::initial(dims, &Budget::default()).unwrap();
        assert_eq!(project_property(&st, &PropertySpec::preimage_zero()).1, 0.0);
        let one = run_circuit(
            &CircuitDescription::random(dims, 1, OracleKind::Cphso, 2),
            &Budget::default(),
        )
        .unwrap();
        assert_eq!(project_property(&one, &PropertySpec::collision()).1, 0.0);
    }

    #[test]
    fn used_element_count() {
        let dims = Dims::new(2, 2, 2, 1).unwrap();
        let c = Classifier::new(dims, &PropertySpec::collision()).unwrap();
        assert_eq!(c.used(dims.empty_db(), 3, &[0, 1]), Some(3));
        let both_in_s = dims.encode_db(&[Some(0), Some(1), None, None]);
        assert_eq!(c.used(both_in_s, 2, &[0]), Some(2));
        let split = dims.encode_db(&[Some(0), None, Some(1), None]);
        assert_eq!(c.used(split, 3, &[0]), Some(2));
        assert_eq!(c.used(split, 1, &[0]), None);
    }

    #[test]
    fn parse_names() {
        assert_eq!(PropertySpec::parse("ksum3").unwrap().name, "ksum3");
        assert!(PropertySpec::parse("ksum0").is_err());
        assert!(PropertySpec::parse("nope").is_err());
    }
}
