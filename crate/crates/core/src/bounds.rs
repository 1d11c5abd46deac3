//! Closed-form salting bounds and the combinatorial facts behind them.
//!
//! Every reported value is an upper bound: exact rationals where the bound is
//! rational, otherwise a decimal rounded upward (see [`crate::decimal`]).
//! Where a bound has the shape `prefactor * base^(1/L)` the exact form is kept
//! in a [`RootForm`] so comparisons against exact game values stay exact.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::decimal::{e_upper, root_ceil, Decimal, DIGITS};
use crate::error::{invalid, Result};
use crate::ratio::{int, pow, rat, to_json, Rational};

/// Distribution and moment of the number of distinct values among `L` draws from `[K]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentReport {
    /// `Pr[l = j]` for `j = 0..=L`.
    pub distribution: Vec<Rational>,
    /// `E[c^l]`.
    pub exact: Rational,
    /// `(c + L/K)^L`.
    pub bound: Rational,
}

pub fn distinct_count_distribution(k: u64, l: u64) -> Vec<Rational> {
    let mut dist = vec![Rational::zero(); l as usize + 1];
    dist[0] = Rational::one();
    let kk = Rational::from_integer(BigInt::from(k));
    for step in 0..l as usize {
        let mut next = vec![Rational::zero(); l as usize + 1];
        for j in 0..=step {
            if dist[j].is_zero() {
                continue;
            }
            let stay = Rational::from_integer(BigInt::from(j)) / &kk;
            let grow = Rational::one() - &stay;
            if !stay.is_zero() {
                next[j] += &dist[j] * &stay;
            }
            if !grow.is_zero() && j < l as usize {
                next[j + 1] += &dist[j] * grow;
            }
        }
        dist = next;
    }
    dist
}

pub fn distinct_count_moment(k: u64, l: u64, c: &Rational) -> Result<MomentReport> {
    if k == 0 || l == 0 {
        return invalid("K and L must be positive");
    }
    if c.is_negative() {
        return invalid("c must be nonnegative");
    }
    let distribution = distinct_count_distribution(k, l);
    let exact = distribution
        .iter()
        .enumerate()
        .map(|(j, p)| p * pow(c, j as u32))
        .sum();
    let bound = pow(&(c + rat(l as i64, k as i64)), l as u32);
    Ok(MomentReport {
        distribution,
        exact,
        bound,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionCount {
    /// `C(K+L-1, K-1)`.
    pub exact: BigInt,
    /// `(2eK/L)^L` if `L <= K`, else `(2eL/K)^K`, with `e` rounded up.
    pub stirling_bound: Rational,
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn composition_count(k: u64, l: u64) -> Result<CompositionCount> {
    if k == 0 || l == 0 {
        return invalid("K and L must be positive");
    }
    let exact = binomial(k + l - 1, k - 1);
    let two_e = int(2) * e_upper();
    let stirling_bound = if l <= k {
        pow(&(two_e * rat(k as i64, l as i64)), l as u32)
    } else {
        pow(&(two_e * rat(l as i64, k as i64)), k as u32)
    };
    Ok(CompositionCount {
        exact,
        stirling_bound,
    })
}

/// The number `prefactor * base^(1/root)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootForm {
    pub prefactor: Rational,
    pub base: Rational,
    pub root: u32,
}

impl RootForm {
    pub fn upper_decimal(&self) -> Decimal {
        let r = root_ceil(&self.base, self.root, DIGITS + 5).to_rational();
        Decimal::ceil_of(&(&self.prefactor * r), DIGITS)
    }

    /// Exact test of `v <= self` for nonnegative `v`.
    pub fn is_at_least(&self, v: &Rational) -> bool {
        if v.is_negative() || v.is_zero() {
            return true;
        }
        if !self.prefactor.is_positive() || self.base.is_zero() {
            return false;
        }
        pow(&(v / &self.prefactor), self.root) <= self.base
    }

    fn ln(&self) -> f64 {
        ln_rational(&self.prefactor) + ln_rational(&self.base) / self.root as f64
    }

    /// Exact comparison, with a floating-point shortcut when the gap is wide.
    pub fn compare(&self, other: &RootForm) -> Ordering {
        let (a, b) = (self.ln(), other.ln());
        if a.is_finite() && b.is_finite() && (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
            return a.partial_cmp(&b).expect("finite");
        }
        let (ra, rb) = (self.root, other.root);
        let lhs = pow(&self.prefactor, ra * rb) * pow(&self.base, rb);
        let rhs = pow(&other.prefactor, ra * rb) * pow(&other.base, ra);
        lhs.cmp(&rhs)
    }

    pub fn to_json(&self) -> Value {
        json!({ "prefactor": to_json(&self.prefactor), "base": to_json(&self.base), "root": self.root })
    }
}

/// Natural log of a positive rational of any size.
pub fn ln_rational(x: &Rational) -> f64 {
    if !x.is_positive() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("small").ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().expect("64 bits");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// An evaluated bound, minimised over the scanned range of `L`.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub name: String,
    pub params: Map<String, Value>,
    /// Upward-rounded decimal value at `argmin_l`.
    pub value: Decimal,
    /// Exact form of the value when available.
    pub form: Option<RootForm>,
    pub argmin_l: Option<u32>,
    pub l_range: Option<(u32, u32)>,
    pub extras: Map<String, Value>,
    pub comparisons: Map<String, Value>,
}

impl BoundReport {
    fn new(name: &str, params: Map<String, Value>, value: Decimal) -> Self {
        BoundReport {
            name: name.to_string(),
            params,
            value,
            form: None,
            argmin_l: None,
            l_range: None,
            extras: Map::new(),
            comparisons: Map::new(),
        }
    }

    /// Sound test of `v <= bound`: exact when the form is known.
    pub fn dominates(&self, v: &Rational) -> bool {
        match &self.form {
            Some(f) => f.is_at_least(v),
            None => *v <= self.value.to_rational(),
        }
    }

    pub fn upper_rational(&self) -> Rational {
        self.value.to_rational()
    }

    /// Records an exact or estimated value next to the bound.
    pub fn compare_with(&mut self, label: &str, v: &Rational) {
        self.comparisons.insert(
            label.to_string(),
            json!({ "value": to_json(v), "below_bound": self.dominates(v) }),
        );
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("name".into(), json!(self.name));
        out.insert("params".into(), Value::Object(self.params.clone()));
        out.insert("value".into(), self.value.to_json());
        if let Some(f) = &self.form {
            out.insert("exact_form".into(), f.to_json());
        }
        out.insert("argmin_L".into(), json!(self.argmin_l));
        if let Some((lo, hi)) = self.l_range {
            out.insert("L_range".into(), json!([lo, hi]));
        }
        for (k, v) in &self.extras {
            out.insert(k.clone(), v.clone());
        }
        if !self.comparisons.is_empty() {
            out.insert(
                "comparisons".into(),
                Value::Object(self.comparisons.clone()),
            );
        }
        Value::Object(out)
    }
}

fn pow2(s: u32) -> Rational {
    Rational::from_integer(BigInt::one() << s as usize)
}

fn argmin_forms(forms: Vec<(u32, RootForm)>) -> (u32, RootForm) {
    let mut it = forms.into_iter();
    let mut best = it.next().expect("nonempty scan");
    for cand in it {
        if cand.1.compare(&best.1) == Ordering::Less {
            best = cand;
        }
    }
    best
}

fn check_eps(eps: &Rational) -> Result<()> {
    if eps.is_negative() || *eps > Rational::one() {
        return invalid("eps must lie in [0, 1]");
    }
    Ok(())
}

/// `min_L 2^(S/L) (eps + L/K)` over `L in 1..=l_max`.
pub fn salting_bound(eps: &Rational, s: u32, t: u64, k: u64, l_max: u32) -> Result<BoundReport> {
    check_eps(eps)?;
    if k == 0 || l_max == 0 {
        return invalid("K and L_max must be positive");
    }
    let forms = (1..=l_max)
        .map(|l| {
            let base = pow2(s) * pow(&(eps + rat(l as i64, k as i64)), l);
            (
                l,
                RootForm {
                    prefactor: Rational::one(),
                    base,
                    root: l,
                },
            )
        })
        .collect();
    let (l, form) = argmin_forms(forms);
    let mut params = Map::new();
    params.insert("eps".into(), to_json(eps));
    params.insert("S".into(), json!(s));
    params.insert("T".into(), json!(t));
    params.insert("K".into(), json!(k));
    params.insert("L_max".into(), json!(l_max));
    let mut report = BoundReport::new("salting", params, form.upper_decimal());
    report.form = Some(form);
    report.argmin_l = Some(l);
    report.l_range = Some((1, l_max));
    let kk = Rational::from_integer(BigInt::from(k));
    let sk = Rational::from_integer(BigInt::from(s)) / &kk;
    let multiplicative = int(2) * eps + int(2) * &sk;
    let additive = Decimal::ceil_of(
        &(eps + int(4) * root_ceil(&sk, 2, DIGITS + 5).to_rational()),
        DIGITS,
    );
    report
        .extras
        .insert("multiplicative_form".into(), to_json(&multiplicative));
    report
        .extras
        .insert("additive_form".into(), additive.to_json());
    Ok(report)
}

fn check_eps_multi(eps_multi: &[Rational], l_max: u32) -> Result<()> {
    if eps_multi.len() <= l_max as usize {
        return invalid(format!("eps_multi must be given for n = 0..={l_max}"));
    }
    if eps_multi[0] != Rational::one() {
        return invalid("eps_multi(0) must be 1");
    }
    for e in eps_multi {
        check_eps(e)?;
    }
    Ok(())
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i))
}

/// Coefficients of `p^k` truncated to degree `deg`.
fn poly_pow(p: &[Rational], mut k: u64, deg: usize) -> Vec<Rational> {
    let mul = |a: &[Rational], b: &[Rational]| {
        let mut out = vec![Rational::zero(); deg + 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(deg + 1 - i) {
                if !y.is_zero() {
                    out[i + j] += x * y;
                }
            }
        }
        out
    };
    let mut result = vec![Rational::zero(); deg + 1];
    result[0] = Rational::one();
    let mut base: Vec<Rational> = p.iter().take(deg + 1).cloned().collect();
    base.resize(deg + 1, Rational::zero());
    while k > 0 {
        if k & 1 == 1 {
            result = mul(&result, &base);
        }
        k >>= 1;
        if k > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

/// `(L!/K^L) * sum over compositions of L into K parts of prod eps_multi(n_k)/n_k!`.
pub fn composition_moment(eps_multi: &[Rational], k: u64, l: u32) -> Rational {
    let p: Vec<Rational> = eps_multi
        .iter()
        .take(l as usize + 1)
        .enumerate()
        .map(|(n, e)| e / Rational::from_integer(factorial(n as u64)))
        .collect();
    let coeffs = poly_pow(&p, k, l as usize);
    Rational::from_integer(factorial(l as u64)) / Rational::from_integer(BigInt::from(k).pow(l))
        * &coeffs[l as usize]
}

/// Multi-challenge salting bound, minimised over `L in 1..=l_max`.
pub fn salting_bound_mult(
    eps_multi: &[Rational],
    s: u32,
    t: u64,
    k: u64,
    l_max: u32,
) -> Result<BoundReport> {
    if k == 0 || l_max == 0 {
        return invalid("K and L_max must be positive");
    }
    check_eps_multi(eps_multi, l_max)?;
    let p: Vec<Rational> = eps_multi
        .iter()
        .take(l_max as usize + 1)
        .enumerate()
        .map(|(n, e)| e / Rational::from_integer(factorial(n as u64)))
        .collect();
    let coeffs = poly_pow(&p, k, l_max as usize);
    let forms = (1..=l_max)
        .map(|l| {
            let inner = Rational::from_integer(factorial(l as u64))
                / Rational::from_integer(BigInt::from(k).pow(l))
                * &coeffs[l as usize];
            (
                l,
                RootForm {
                    prefactor: Rational::one(),
                    base: pow2(s) * inner,
                    root: l,
                },
            )
        })
        .collect();
    let (l, form) = argmin_forms(forms);
    let mut params = Map::new();
    params.insert(
        "eps_multi".into(),
        Value::Array(eps_multi.iter().map(to_json).collect()),
    );
    params.insert("S".into(), json!(s));
    params.insert("T".into(), json!(t));
    params.insert("K".into(), json!(k));
    params.insert("L_max".into(), json!(l_max));
    let mut report = BoundReport::new("salting-mult", params, form.upper_decimal());
    report.form = Some(form);
    report.argmin_l = Some(l);
    report.l_range = Some((1, l_max));
    Ok(report)
}

/// Best composition of `l` into `parts` parts for additive per-part scores.
///
/// Returns the maximal total and the sizes of the positive parts of one
/// maximiser; every other part is empty. `score[n]` is the score of a part of
/// size `n`.
pub fn max_composition(score: &[Rational], parts: u64, l: u32) -> (Rational, Vec<u32>) {
    // only parts of positive size matter beyond a constant; track the count j
    // of positive parts, each remaining part contributes score[0]
    let l = l as usize;
    let jmax = (parts as usize).min(l);
    // best[j][s]: best sum of j positive parts totalling s, with choice trace
    let mut best: Vec<Vec<Option<Rational>>> = vec![vec![None; l + 1]; jmax + 1];
    let mut choice: Vec<Vec<usize>> = vec![vec![0; l + 1]; jmax + 1];
    best[0][0] = Some(Rational::zero());
    for j in 1..=jmax {
        for s in j..=l {
            for n in 1..=(s - (j - 1)) {
                if let Some(prev) = &best[j - 1][s - n] {
                    let cand = prev + &score[n];
                    if best[j][s].as_ref().is_none_or(|b| cand > *b) {
                        best[j][s] = Some(cand);
                        choice[j][s] = n;
                    }
                }
            }
        }
    }
    let zero_parts = |j: usize| Rational::from_integer(BigInt::from(parts - j as u64)) * &score[0];
    let mut top: Option<(Rational, usize)> = None;
    for j in (if l == 0 { 0 } else { 1 })..=jmax {
        if let Some(v) = &best[j][l] {
            let total = v + zero_parts(j);
            if top.as_ref().is_none_or(|(b, _)| total > *b) {
                top = Some((total, j));
            }
        }
    }
    let (value, j) = top.expect("a composition exists");
    let mut sizes = Vec::new();
    let (mut jj, mut s) = (j, l);
    while jj > 0 {
        let n = choice[jj][s];
        sizes.push(n as u32);
        s -= n;
        jj -= 1;
    }
    (value, sizes)
}

/// Large-advice variant, minimised over `L in 1..=l_max`.
///
/// `value` follows the statement literally: a part of size zero contributes
/// `eps^(1/0) = 1`. The report also carries the sharper variant where only
/// positive parts contribute (the weighted AM-GM step gives a zero weight to
/// empty parts), which is the form used for the large-advice regime.
pub fn salting_bound_large_advice(
    eps_multi: &[Rational],
    s: u32,
    t: u64,
    k: u64,
    l_max: u32,
) -> Result<BoundReport> {
    if k == 0 || l_max == 0 {
        return invalid("K and L_max must be positive");
    }
    check_eps_multi(eps_multi, l_max)?;
    let delta: Vec<Rational> = (0..=l_max as usize)
        .map(|n| {
            if n == 0 {
                Rational::one()
            } else {
                root_ceil(&eps_multi[n], n as u32, DIGITS + 5).to_rational()
            }
        })
        .collect();
    let mut positive = delta.clone();
    positive[0] = Rational::zero();
    let e = e_upper();
    let two_e2 = int(2) * &e * &e;
    let scan = |score: &[Rational]| -> (u32, RootForm, Vec<u32>) {
        let mut best: Option<(u32, RootForm, Vec<u32>)> = None;
        for l in 1..=l_max {
            let (m, sizes) = max_composition(score, k, l);
            let denom = Rational::from_integer(BigInt::from(k.min(l as u64)));
            let form = RootForm {
                prefactor: &two_e2 * m / denom,
                base: pow2(s),
                root: l,
            };
            let better = match &best {
                None => true,
                Some((_, b, _)) => {
                    form.upper_decimal().to_rational() < b.upper_decimal().to_rational()
                }
            };
            if better {
                best = Some((l, form, sizes));
            }
        }
        best.expect("nonempty scan")
    };
    let (l, form, sizes) = scan(&delta);
    let (lp, form_p, sizes_p) = scan(&positive);
    let mut params = Map::new();
    params.insert(
        "eps_multi".into(),
        Value::Array(eps_multi.iter().map(to_json).collect()),
    );
    params.insert("S".into(), json!(s));
    params.insert("T".into(), json!(t));
    params.insert("K".into(), json!(k));
    params.insert("L_max".into(), json!(l_max));
    let mut report = BoundReport::new("large-advice", params, form.upper_decimal());
    report.argmin_l = Some(l);
    report.l_range = Some((1, l_max));
    report.extras.insert(
        "constant".into(),
        json!({"symbol": "2e^2", "upper": to_json(&two_e2)}),
    );
    report
        .extras
        .insert("maximizing_composition".into(), json!(sizes));
    report.extras.insert(
        "positive_parts".into(),
        json!({
            "value": form_p.upper_decimal().to_json(),
            "argmin_L": lp,
            "maximizing_composition": sizes_p,
        }),
    );
    report.form = None;
    Ok(report)
}

/// Salted function inversion, from the large-advice form at `L = S`.
///
/// With the quoted multi-instance bound `eps_{Inv^n}(nT) <= (C nT/N)^n` every
/// part contributes `C n_k T/N`, so the maximum over compositions is
/// `C S T/N` and the bound is `4e^2 C S T/(N min{S,K})`. For `S = 0` the scan
/// is taken at `L = 1`, giving `2e^2 C T/N`. `C` is configurable since its
/// value is never stated.
pub fn inversion_bound(s: u32, t: u64, k: u64, n: u64, c: &Rational) -> Result<BoundReport> {
    if k == 0 || n == 0 {
        return invalid("K and N must be positive");
    }
    if !c.is_positive() {
        return invalid("C must be positive");
    }
    let e = e_upper();
    let tn = Rational::new(BigInt::from(t), BigInt::from(n));
    let (c_prime, value) = if s == 0 {
        let cp = int(2) * &e * &e * c;
        (cp.clone(), cp * tn)
    } else {
        let cp = int(4) * &e * &e * c;
        let st = Rational::from_integer(BigInt::from(s)) * &tn;
        let denom = Rational::from_integer(BigInt::from((s as u64).min(k)));
        (cp.clone(), cp * st / denom)
    };
    let mut params = Map::new();
    params.insert("S".into(), json!(s));
    params.insert("T".into(), json!(t));
    params.insert("K".into(), json!(k));
    params.insert("N".into(), json!(n));
    params.insert("C".into(), to_json(c));
    let mut report = BoundReport::new("inversion", params, Decimal::ceil_of(&value, DIGITS));
    report.form = Some(RootForm {
        prefactor: value.clone(),
        base: Rational::one(),
        root: 1,
    });
    report.argmin_l = Some(s.max(1));
    report.extras.insert("exact_value".into(), to_json(&value));
    report.extras.insert(
        "constant".into(),
        json!({"C_prime": to_json(&c_prime), "C": to_json(c), "configurable": true, "note": "C stands for an unstated constant; not ground truth"}),
    );
    Ok(report)
}
