//! Numerical checks of the compressed-oracle lemmas.
//!
//! Every check here is sound but not exhaustive: random states and circuits
//! can only fail to find a counterexample.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::property::{transition_probability, Classifier, PropertySpec, SaltMode, TransitionPoly};
use super::{
    all_tables, run_circuit, run_circuit_with, run_standard, CircuitDescription, Dims, OracleKind,
    QState,
};
use crate::budget::Budget;
use crate::error::{invalid, Error, Result};
use crate::ratio::{to_f64, Rational};

/// `t - |D| + Σ_{k∈S} |D|_k|`; a database larger than `t` is a schedule violation.
pub fn used_elements(
    dims: &Dims,
    cells: &[Option<u32>],
    t: usize,
    salts: &[usize],
) -> Result<usize> {
    if cells.len() != dims.cells() {
        return invalid("database has the wrong number of cells");
    }
    let size = cells.iter().filter(|c| c.is_some()).count();
    if t < size {
        return Err(Error::ScheduleViolation { size, queries: t });
    }
    let in_s: usize = salts
        .iter()
        .map(|&k| {
            cells[k * dims.m..(k + 1) * dims.m]
                .iter()
                .filter(|c| c.is_some())
                .count()
        })
        .sum();
    Ok(t - size + in_s)
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitarityReport {
    /// Largest `|‖Uψ‖ - ‖ψ‖|` over StdDecomp on each cell and both oracles.
    pub max_norm_error: f64,
    /// Largest `‖S S ψ - ψ‖` over cells.
    pub max_involution_error: f64,
    pub trials: usize,
    pub holds: bool,
}

pub fn unitarity_check(
    dims: Dims,
    trials: usize,
    seed: u64,
    budget: &Budget,
) -> Result<UnitarityReport> {
    let errs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let psi = QState::random(dims, budget, seed.wrapping_add(i), |_, _| true)?;
            let norm = psi.norm_sqr().sqrt();
            let (mut ne, mut ie) = (0.0f64, 0.0f64);
            for cell in 0..dims.cells() {
                let once = psi.std_decomp(cell);
                ne = ne.max((once.norm_sqr().sqrt() - norm).abs());
                ie = ie.max(once.std_decomp(cell).distance(&psi));
            }
            for kind in [OracleKind::Cphso, OracleKind::Csto] {
                ne = ne.max((psi.apply_oracle(kind).norm_sqr().sqrt() - norm).abs());
            }
            Ok((ne, ie))
        })
        .collect::<Result<_>>()?;
    let max_norm_error = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let max_involution_error = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(UnitarityReport {
        max_norm_error,
        max_involution_error,
        trials,
        holds: max_norm_error <= 1e-10 && max_involution_error <= 1e-12,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundedDatabaseReport {
    /// Largest amplitude on `|D| > t` after `t` queries, over all `t`.
    pub max_amplitude: f64,
    pub exactly_zero: bool,
    pub holds: bool,
}

pub fn bounded_database_check(
    circ: &CircuitDescription,
    budget: &Budget,
) -> Result<BoundedDatabaseReport> {
    let mut worst = 0.0f64;
    let fin = run_circuit_with(circ, budget, |t, st| {
        worst = worst.max(st.max_amplitude_beyond(t))
    })?;
    worst = worst.max(fin.max_amplitude_beyond(circ.queries()));
    Ok(BoundedDatabaseReport {
        max_amplitude: worst,
        exactly_zero: worst == 0.0,
        holds: worst <= 1e-12,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub tv: f64,
    pub tables: usize,
}

/// Total variation between the compressed run and the average over all
/// function tables of the matching uncompressed oracle.
pub fn compare_with_standard_oracle(
    circ: &CircuitDescription,
    budget: &Budget,
) -> Result<EquivalenceReport> {
    let compressed = run_circuit(circ, budget)?.output_distribution();
    let tables = all_tables(circ.dims.cells(), circ.dims.n, budget)?;
    let w = 1.0 / tables.len() as f64;
    let runs: Vec<Vec<f64>> = tables
        .par_iter()
        .map(|f| run_standard(circ, f).map(|v| v.iter().map(|a| a.norm_sqr() * w).collect()))
        .collect::<Result<_>>()?;
    let mut standard = vec![0.0; compressed.len()];
    for r in &runs {
        standard.iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    let tv = 0.5
        * compressed
            .iter()
            .zip(&standard)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    Ok(EquivalenceReport {
        tv,
        tables: tables.len(),
    })
}

/// Output relations for the lazy-sampling lemma. Outputs are read off the
/// algorithm registers: `(x, u)` for one pair, plus `(z / N, z % N)` for a
/// second pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Every output, with nothing to check against the oracle.
    Always,
    PreimageZero,
    /// Two distinct inputs under the same salt with equal claimed outputs.
    Collision,
}

impl Relation {
    pub fn arity(&self) -> usize {
        match self {
            Relation::Always => 0,
            Relation::PreimageZero => 1,
            Relation::Collision => 2,
        }
    }

    /// Claimed `(x_i, y_i)` pairs if the output lies in the relation.
    fn claims(&self, dims: &Dims, a: usize) -> Option<Vec<(usize, u32)>> {
        let (x, u, z) = dims.a_parts(a);
        let n = dims.n as usize;
        match self {
            Relation::Always => Some(Vec::new()),
            Relation::PreimageZero => (u == 0).then(|| vec![(x, 0)]),
            Relation::Collision => {
                let (x2, y2) = (z / n, (z % n) as u32);
                (x2 < dims.cells() && x2 != x && dims.salt_of(x2) == dims.salt_of(x) && y2 == u)
                    .then(|| vec![(x, u), (x2, y2)])
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LazySamplingReport {
    pub p: f64,
    pub p_prime: f64,
    pub sqrt_p: f64,
    pub rhs: f64,
    pub c: usize,
    pub holds: bool,
}

/// `√p ≤ √p' + √(c/N)`: `p` from the uncompressed oracle, `p'` from reading
/// the claimed values off the measured database.
pub fn lazy_sampling_check(
    circ: &CircuitDescription,
    rel: Relation,
    budget: &Budget,
) -> Result<LazySamplingReport> {
    let dims = circ.dims;
    if rel == Relation::Collision && dims.z < dims.cells() * dims.n as usize {
        return invalid("collision outputs need Z >= K*M*N");
    }
    let claims: Vec<Option<Vec<(usize, u32)>>> =
        (0..dims.d_a()).map(|a| rel.claims(&dims, a)).collect();
    let tables = all_tables(dims.cells(), dims.n, budget)?;
    let p: f64 = tables
        .par_iter()
        .map(|f| {
            let v = run_standard(circ, f)?;
            Ok(v.iter()
                .zip(&claims)
                .filter(|(_, c)| {
                    c.as_ref()
                        .is_some_and(|c| c.iter().all(|&(x, y)| f[x] == y))
                })
                .map(|(amp, _)| amp.norm_sqr())
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / tables.len() as f64;
    let st = run_circuit(circ, budget)?;
    let d_a = dims.d_a();
    let mut p_prime = 0.0;
    for db in 0..dims.db_count() {
        let cells = dims.decode_db(db);
        for (a, c) in claims.iter().enumerate() {
            if let Some(c) = c {
                if c.iter().all(|&(x, y)| cells[x] == Some(y)) {
                    p_prime += st.amps[db * d_a + a].norm_sqr();
                }
            }
        }
    }
    let c = rel.arity();
    let rhs = p_prime.sqrt() + (c as f64 / dims.n as f64).sqrt();
    Ok(LazySamplingReport {
        p,
        p_prime,
        sqrt_p: p.sqrt(),
        rhs,
        c,
        holds: p.sqrt() <= rhs + 1e-9,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    pub max_ratio: f64,
    pub bound: f64,
    pub p_t: f64,
    pub trials: usize,
    /// Trials whose pre-query projection vanished.
    pub degenerate: usize,
    pub holds: bool,
}

/// Largest observed `‖Γ^P cO (I-Γ^P) Γ^{≤t} ψ‖ / ‖(I-Γ^P) Γ^{≤t} ψ‖` over
/// seeded random states, against `√(8 p_t)`.
pub fn transition_capacity_check(
    p: &PropertySpec,
    dims: Dims,
    k: usize,
    t: usize,
    trials: usize,
    seed: u64,
    budget: &Budget,
) -> Result<CapacityReport> {
    if k >= dims.salts {
        return invalid("salt out of range");
    }
    let c = Classifier::new(dims, p)?;
    let p_t = to_f64(&transition_probability(p, dims.m, dims.n, t, budget)?);
    let ratios: Vec<Option<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let psi = QState::random(dims, budget, seed.wrapping_add(i), |_, _| true)?;
            let pre = psi.project(|db, a| {
                c.query_salt(a) == k && c.salt_size(db, k) as usize <= t && !c.succeeds(db, k)
            });
            let den = pre.norm_sqr().sqrt();
            if den == 0.0 {
                return Ok(None);
            }
            let post = pre
                .apply_oracle(OracleKind::Cphso)
                .project(|db, _| c.succeeds(db, k));
            Ok(Some(post.norm_sqr().sqrt() / den))
        })
        .collect::<Result<_>>()?;
    let max_ratio = ratios.iter().flatten().copied().fold(0.0, f64::max);
    let bound = (8.0 * p_t).sqrt();
    Ok(CapacityReport {
        max_ratio,
        bound,
        p_t,
        trials,
        degenerate: ratios.iter().filter(|r| r.is_none()).count(),
        holds: max_ratio <= bound + 1e-9,
    })
}

fn subsets(k: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, size, &mut Vec::new(), &mut out);
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PathReport {
    pub residual: f64,
    pub paths: usize,
    pub win_probability: f64,
    pub max_path_norm_sqr: f64,
}

/// Splits the final state with exactly `κ` successful salts into the
/// "last time each salt became good" paths and returns the reconstruction error.
pub fn path_decomposition(
    circ: &CircuitDescription,
    p: &PropertySpec,
    kappa: usize,
    budget: &Budget,
) -> Result<PathReport> {
    let dims = circ.dims;
    if kappa == 0 || kappa > dims.salts {
        return invalid("need 1 <= kappa <= K");
    }
    if p.holds(&vec![None; dims.m], dims.n) {
        return Err(Error::Unsupported(
            "the empty database already has the property".into(),
        ));
    }
    let c = Classifier::new(dims, p)?;
    let b = circ.queries();
    let win =
        run_circuit(circ, budget)?.project(|db, _| SaltMode::Exact(kappa as u32).accepts(&c, db));
    let mut sum = win.zeroed();
    let (mut paths, mut max_path) = (0usize, 0.0f64);
    for s in subsets(dims.salts, kappa) {
        for z in subsets(b, kappa) {
            // z holds 0-based query indices; query t (1-based) is z_r + 1
            let mut path = win.zeroed();
            for pi in permutations(&s) {
                let st = run_circuit_with(circ, budget, |t, st| {
                    for (r, &k) in pi.iter().enumerate() {
                        let zr = z[r] + 1;
                        if t >= zr {
                            *st = st.project(|db, _| c.succeeds(db, k));
                        } else if t + 1 == zr {
                            *st = st.project(|db, _| !c.succeeds(db, k));
                        }
                    }
                })?;
                let st = st.project(|db, _| {
                    (0..dims.salts)
                        .filter(|k| !s.contains(k))
                        .all(|k| !c.succeeds(db, k))
                });
                path.add(&st);
            }
            max_path = max_path.max(path.norm_sqr());
            sum.add(&path);
            paths += 1;
        }
    }
    Ok(PathReport {
        residual: win.distance(&sum),
        paths,
        win_probability: win.norm_sqr(),
        max_path_norm_sqr: max_path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub probability: f64,
    pub gamma: f64,
    pub bound: f64,
    /// `probability^{1/κ} / γ`; reported, never asserted.
    pub fitted_c: Option<f64>,
    pub queries: usize,
    pub kappa: usize,
    pub holds: bool,
}

/// Probability of succeeding on at least `κ` salts against `C^κ γ(B/κ)^κ`,
/// with `γ(t) = t² p(t)` and `p` the interpolated transition probability.
pub fn threshold_experiment(
    circ: &CircuitDescription,
    p: &PropertySpec,
    kappa: usize,
    c_const: f64,
    budget: &Budget,
) -> Result<ThresholdReport> {
    let dims = circ.dims;
    if kappa == 0 || kappa > dims.salts {
        return invalid("need 1 <= kappa <= K");
    }
    let c = Classifier::new(dims, p)?;
    let st = run_circuit(circ, budget)?;
    let probability = st
        .project(|db, _| SaltMode::AtLeast(kappa as u32).accepts(&c, db))
        .norm_sqr();
    let b = circ.queries();
    let poly = TransitionPoly::fit(p, dims.m, dims.n, dims.m, budget)?;
    let t = Rational::new((b as i64).into(), (kappa as i64).into());
    let gamma_r = &t * &t * poly.eval(&t);
    let gamma = gamma_r.to_f64().unwrap_or(f64::INFINITY).max(0.0);
    let bound = (c_const * gamma).powi(kappa as i32);
    let fitted_c = (!gamma_r.is_zero()).then(|| probability.powf(1.0 / kappa as f64) / gamma);
    Ok(ThresholdReport {
        probability,
        gamma,
        bound,
        fitted_c,
        queries: b,
        kappa,
        holds: probability <= bound + 1e-12,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GhReport {
    /// Largest `g / (p_{ν-1} h)` over trials and `(j, ν)` buckets.
    pub max_ratio: f64,
    pub trials: usize,
    /// Buckets with `h = 0`, skipped.
    pub degenerate: usize,
    /// Buckets with `p_{ν-1} = 0` and non-negligible `g`.
    pub zero_p_violations: usize,
    /// `Σ h ≤ Σ_j ‖Q_j ψ‖²` on every trial.
    pub h_sum_ok: bool,
    /// `‖Q_{≤B} Λ_{S'} cO ψ‖ ≤ ‖Q_{≤B} ψ‖` for every `B` on every trial.
    pub used_monotone_ok: bool,
    pub holds: bool,
}

/// The norm-transfer step from "salt `k` not yet good" to "good": with
/// `S = S' ∪ {k}` and `t` queries made before this one, checks
/// `g^{j,ν} ≤ 8 p_{ν-1} h^{j,ν}` on random states supported on `|D| ≤ t`.
#[allow(clippy::too_many_arguments)]
pub fn g_h_transition_check(
    p: &PropertySpec,
    dims: Dims,
    s_prime: &[usize],
    k: usize,
    t: usize,
    trials: usize,
    seed: u64,
    budget: &Budget,
) -> Result<GhReport> {
    if k >= dims.salts || s_prime.contains(&k) || s_prime.iter().any(|&s| s >= dims.salts) {
        return invalid("need k outside S' and all salts in range");
    }
    let c = Classifier::new(dims, p)?;
    let mut s_full = s_prime.to_vec();
    s_full.push(k);
    let p_nu: Vec<f64> = (0..=dims.m)
        .map(|nu| transition_probability(p, dims.m, dims.n, nu, budget).map(|r| to_f64(&r)))
        .collect::<Result<_>>()?;
    let d_a = dims.d_a();
    let per_trial: Vec<(f64, usize, usize, bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let psi = QState::random(dims, budget, seed.wrapping_add(i), |db, _| {
                c.size[db] as usize <= t
            })?;
            let psi = psi.project(|db, _| s_prime.iter().all(|&s| c.succeeds(db, s)));
            // static half of the h-to-g step, over every salt outside S'
            let mut h_total = 0.0;
            let mut h_k: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for kk in (0..dims.salts).filter(|kk| !s_prime.contains(kk)) {
                for (idx, amp) in psi.amps.iter().enumerate() {
                    let (db, a) = (idx / d_a, idx % d_a);
                    if c.query_salt(a) != kk || c.succeeds(db, kk) || amp.norm_sqr() == 0.0 {
                        continue;
                    }
                    let used = c.used(db, t, s_prime).expect("support respects |D| <= t");
                    let key = if c.query_defined(db, a) {
                        (used + 1, c.salt_size(db, kk) as usize)
                    } else {
                        (used, c.salt_size(db, kk) as usize + 1)
                    };
                    h_total += amp.norm_sqr();
                    if kk == k {
                        *h_k.entry(key).or_default() += amp.norm_sqr();
                    }
                }
            }
            let mut used_before: BTreeMap<usize, f64> = BTreeMap::new();
            for (idx, amp) in psi.amps.iter().enumerate() {
                if let Some(u) = c.used(idx / d_a, t, s_prime) {
                    *used_before.entry(u).or_default() += amp.norm_sqr();
                }
            }
            let h_sum_ok = h_total <= used_before.values().sum::<f64>() + 1e-12;
            let after = psi
                .apply_oracle(OracleKind::Cphso)
                .project(|db, _| s_prime.iter().all(|&s| c.succeeds(db, s)));
            let mut used_after: BTreeMap<usize, f64> = BTreeMap::new();
            for (idx, amp) in after.amps.iter().enumerate() {
                if let Some(u) = c.used(idx / d_a, t + 1, s_prime) {
                    *used_after.entry(u).or_default() += amp.norm_sqr();
                }
            }
            let max_used = used_before
                .keys()
                .chain(used_after.keys())
                .copied()
                .max()
                .unwrap_or(0);
            let mut monotone = true;
            let (mut acc_b, mut acc_a) = (0.0, 0.0);
            for bb in 0..=max_used {
                acc_b += used_before.get(&bb).copied().unwrap_or(0.0);
                acc_a += used_after.get(&bb).copied().unwrap_or(0.0);
                monotone &= acc_a <= acc_b + 1e-12;
            }
            // the transition itself
            let phi = psi.project(|db, a| c.query_salt(a) == k && !c.succeeds(db, k));
            let post = phi
                .apply_oracle(OracleKind::Cphso)
                .project(|db, _| s_full.iter().all(|&s| c.succeeds(db, s)));
            let mut g: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (idx, amp) in post.amps.iter().enumerate() {
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                let db = idx / d_a;
                let nu = c.salt_size(db, k) as usize;
                let used = c
                    .used(db, t + 1, &s_full)
                    .expect("one query adds at most one entry");
                *g.entry((used - nu, nu)).or_default() += amp.norm_sqr();
            }
            let (mut max_ratio, mut degenerate, mut zero_p) = (0.0f64, 0usize, 0usize);
            for (key, gv) in &g {
                let hv = h_k.get(key).copied().unwrap_or(0.0);
                let pv = if key.1 == 0 { 0.0 } else { p_nu[key.1 - 1] };
                if hv <= 1e-300 {
                    degenerate += 1;
                    if *gv > 1e-12 {
                        zero_p += 1;
                    }
                } else if pv == 0.0 {
                    if *gv > 1e-12 {
                        zero_p += 1;
                    }
                } else {
                    max_ratio = max_ratio.max(gv / (pv * hv));
                }
            }
            Ok((max_ratio, degenerate, zero_p, h_sum_ok, monotone))
        })
        .collect::<Result<_>>()?;
    let max_ratio = per_trial.iter().map(|r| r.0).fold(0.0, f64::max);
    let zero_p_violations = per_trial.iter().map(|r| r.2).sum();
    let h_sum_ok = per_trial.iter().all(|r| r.3);
    let used_monotone_ok = per_trial.iter().all(|r| r.4);
    Ok(GhReport {
        max_ratio,
        trials,
        degenerate: per_trial.iter().map(|r| r.1).sum(),
        zero_p_violations,
        h_sum_ok,
        used_monotone_ok,
        holds: max_ratio <= 8.0 + 1e-6 && zero_p_violations == 0 && h_sum_ok && used_monotone_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Gate;

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn unitarity_and_support_reports() {
        let d = Dims::new(1, 2, 2, 1).unwrap();
        assert!(unitarity_check(d, 10, 1, &b()).unwrap().holds);
        let circ = CircuitDescription::random(d, 2, OracleKind::Cphso, 9);
        let r = bounded_database_check(&circ, &b()).unwrap();
        assert!(r.exactly_zero && r.holds);
    }

    #[test]
    fn used_elements_formula() {
        let d = Dims::new(2, 2, 2, 1).unwrap();
        assert_eq!(used_elements(&d, &[None; 4], 3, &[0, 1]).unwrap(), 3);
        assert_eq!(
            used_elements(&d, &[Some(0), Some(1), None, None], 2, &[0]).unwrap(),
            2
        );
        assert_eq!(
            used_elements(&d, &[Some(0), None, Some(1), None], 3, &[0]).unwrap(),
            2
        );
        assert_eq!(
            used_elements(&d, &[Some(0), None, Some(1), None], 1, &[0]),
            Err(Error::ScheduleViolation {
                size: 2,
                queries: 1
            })
        );
    }

    #[test]
    fn zero_query_circuit_matches_exactly() {
        let d = Dims::new(1, 2, 2, 1).unwrap();
        let circ = CircuitDescription {
            dims: d,
            oracle: OracleKind::Cphso,
            gates: vec![Gate::Random { seed: 1 }],
        };
        assert_eq!(compare_with_standard_oracle(&circ, &b()).unwrap().tv, 0.0);
    }

    #[test]
    fn grover_style_single_query() {
        let d = Dims::new(1, 2, 2, 1).unwrap();
        for oracle in [OracleKind::Cphso, OracleKind::Csto] {
            let circ = CircuitDescription {
                dims: d,
                oracle,
                gates: vec![Gate::FourierX, Gate::FourierU],
            };
            assert!(compare_with_standard_oracle(&circ, &b()).unwrap().tv <= 1e-9);
        }
    }

    #[test]
    fn compressed_matches_standard_on_random_circuits() {
        for seed in 0..6 {
            let d = Dims::new(1, 1 + seed as usize % 3, 2, 1 + seed as usize % 2).unwrap();
            let oracle = if seed % 2 == 0 {
                OracleKind::Cphso
            } else {
                OracleKind::Csto
            };
            let circ = CircuitDescription::random(d, 1 + seed as usize % 3, oracle, seed);
            assert!(compare_with_standard_oracle(&circ, &b()).unwrap().tv <= 1e-9);
        }
    }

    #[test]
    fn lazy_sampling_trivial_and_real_relations() {
        let d = Dims::new(1, 3, 2, 6).unwrap();
        let circ = CircuitDescription::random(d, 2, OracleKind::Csto, 3);
        let r = lazy_sampling_check(&circ, Relation::Always, &b()).unwrap();
        assert!((r.p - r.p_prime).abs() < 1e-12);
        for rel in [Relation::PreimageZero, Relation::Collision] {
            let r = lazy_sampling_check(&circ, rel, &b()).unwrap();
            assert!(r.holds, "{rel:?}: {} > {}", r.sqrt_p, r.rhs);
        }
        let r = lazy_sampling_check(&circ, Relation::PreimageZero, &b()).unwrap();
        assert!((r.rhs - r.p_prime.sqrt() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn capacity_ratio_within_bound() {
        let d = Dims::new(1, 3, 4, 1).unwrap();
        let r = transition_capacity_check(&PropertySpec::preimage_zero(), d, 0, 1, 50, 1, &b())
            .unwrap();
        assert!(r.holds && r.bound > 1.41 && r.bound < 1.42);
        let r =
            transition_capacity_check(&PropertySpec::collision(), d, 0, 1, 50, 2, &b()).unwrap();
        assert!(r.holds, "{} > {}", r.max_ratio, r.bound);
        let r =
            transition_capacity_check(&PropertySpec::collision(), d, 0, 0, 20, 2, &b()).unwrap();
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn capacity_zero_on_good_states() {
        // a state already in the image of Γ^P contributes nothing
        let d = Dims::new(1, 2, 2, 1).unwrap();
        let c = Classifier::new(d, &PropertySpec::preimage_zero()).unwrap();
        let psi = QState::random(d, &b(), 4, |db, _| c.succeeds(db, 0)).unwrap();
        let pre = psi.project(|db, _| !c.succeeds(db, 0));
        assert_eq!(pre.norm_sqr(), 0.0);
    }

    #[test]
    fn single_path_for_one_query() {
        let d = Dims::new(1, 2, 2, 1).unwrap();
        let circ = CircuitDescription::random(d, 1, OracleKind::Cphso, 5);
        let r = path_decomposition(&circ, &PropertySpec::preimage_zero(), 1, &b()).unwrap();
        assert_eq!(r.paths, 1);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn paths_partition_the_winning_state() {
        let d = Dims::new(2, 1, 2, 1).unwrap();
        for (kappa, q) in [(1, 2), (2, 4), (1, 3)] {
            let circ = CircuitDescription::random(d, q, OracleKind::Cphso, 11 + q as u64);
            let r = path_decomposition(&circ, &PropertySpec::preimage_zero(), kappa, &b()).unwrap();
            assert!(r.residual <= 1e-8, "kappa={kappa}: {}", r.residual);
            assert!(r.win_probability > 0.0);
        }
    }

    #[test]
    fn threshold_beyond_budget_is_zero() {
        let d = Dims::new(2, 1, 2, 1).unwrap();
        let circ = CircuitDescription::random(d, 1, OracleKind::Cphso, 3);
        let r = threshold_experiment(&circ, &PropertySpec::preimage_zero(), 2, 4.0, &b()).unwrap();
        assert_eq!(r.probability, 0.0);
    }

    #[test]
    fn gh_transfer_bound() {
        let d = Dims::new(2, 1, 2, 1).unwrap();
        let r = g_h_transition_check(&PropertySpec::preimage_zero(), d, &[], 0, 1, 40, 7, &b())
            .unwrap();
        assert!(r.holds, "{r:?}");
        let r = g_h_transition_check(&PropertySpec::preimage_zero(), d, &[1], 0, 2, 40, 8, &b())
            .unwrap();
        assert!(r.holds, "{r:?}");
        let d = Dims::new(2, 2, 2, 1).unwrap();
        let r =
            g_h_transition_check(&PropertySpec::collision(), d, &[], 1, 2, 20, 9, &b()).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn gh_state_outside_query_salt_gives_zero() {
        let d = Dims::new(2, 1, 2, 1).unwrap();
        let c = Classifier::new(d, &PropertySpec::preimage_zero()).unwrap();
        let psi = QState::random(d, &b(), 1, |_, a| c.query_salt(a) == 1).unwrap();
        let g = psi
            .project(|_, a| c.query_salt(a) == 0)
            .apply_oracle(OracleKind::Cphso);
        assert_eq!(g.norm_sqr(), 0.0);
    }
}
