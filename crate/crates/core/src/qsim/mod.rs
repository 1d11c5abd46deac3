//! Dense state-vector simulation of the compressed random oracle.
//!
//! The joint state lives on the algorithm registers `(x, u, z)` and a
//! database of `K*M` cells, each holding a value in `[N]` or `⊥`. Basis index
//! `db * d_A + a` with `a = (x*N + u)*Z + z`; cell `x` of the database is the
//! base-`(N+1)` digit of weight `(N+1)^x`, and digit `N` encodes `⊥`.

pub mod checks;
pub mod property;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{sat_pow, Budget};
use crate::error::{invalid, Result};

pub use checks::*;
pub use property::*;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Register sizes: `salts` copies of an oracle on `m` points with range `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    #[serde(rename = "K")]
    pub salts: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "Z")]
    pub z: usize,
}

impl Dims {
    pub fn new(salts: usize, m: usize, n: u32, z: usize) -> Result<Dims> {
        if salts == 0 || m == 0 || n == 0 || z == 0 {
            return invalid("K, M, N and Z must be positive");
        }
        Ok(Dims { salts, m, n, z })
    }

    pub fn cells(&self) -> usize {
        self.salts * self.m
    }

    pub fn d_a(&self) -> usize {
        self.cells() * self.n as usize * self.z
    }

    pub fn db_count(&self) -> usize {
        (self.n as usize + 1).pow(self.cells() as u32)
    }

    pub fn len(&self) -> usize {
        self.d_a() * self.db_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, budget: &Budget) -> Result<()> {
        let db = sat_pow(self.n as u128 + 1, self.cells() as u64);
        budget.check_amplitudes(db.saturating_mul(self.d_a() as u128))
    }

    pub fn stride(&self, cell: usize) -> usize {
        (self.n as usize + 1).pow(cell as u32)
    }

    pub fn empty_db(&self) -> usize {
        self.db_count() - 1
    }

    /// Cell contents, `None` for `⊥`.
    pub fn decode_db(&self, mut db: usize) -> Vec<Option<u32>> {
        let base = self.n as usize + 1;
        (0..self.cells())
            .map(|_| {
                let d = db % base;
                db /= base;
                (d != self.n as usize).then_some(d as u32)
            })
            .collect()
    }

    pub fn encode_db(&self, cells: &[Option<u32>]) -> usize {
        cells.iter().rev().fold(0, |acc, c| {
            acc * (self.n as usize + 1) + c.map_or(self.n as usize, |v| v as usize)
        })
    }

    pub fn a_index(&self, x: usize, u: u32, z: usize) -> usize {
        (x * self.n as usize + u as usize) * self.z + z
    }

    pub fn a_parts(&self, a: usize) -> (usize, u32, usize) {
        let z = a % self.z;
        let xu = a / self.z;
        (xu / self.n as usize, (xu % self.n as usize) as u32, z)
    }

    pub fn salt_of(&self, cell: usize) -> usize {
        cell / self.m
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(dim: usize) -> Mat {
        Mat {
            dim,
            data: vec![C0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Mat {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C1;
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == C0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            *o = row
                .iter()
                .zip(v)
                .filter(|(_, b)| **b != C0)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn dagger(&self) -> Mat {
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Largest entry of `U†U - I`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().mul(self);
        let id = Mat::identity(self.dim);
        p.data
            .iter()
            .zip(&id.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `A ⊗ B` with `A` on the more significant index.
    pub fn kron(&self, other: &Mat) -> Mat {
        let d = self.dim * other.dim;
        let mut out = Mat::zeros(d);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        out.set(i * other.dim + k, j * other.dim + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn fourier(dim: usize) -> Mat {
        let mut m = Mat::zeros(dim);
        let s = 1.0 / (dim as f64).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                m.set(
                    i,
                    j,
                    Complex64::from_polar(s, 2.0 * PI * (i * j % dim) as f64 / dim as f64),
                );
            }
        }
        m
    }

    /// Haar-distributed unitary: Gram-Schmidt on a complex Gaussian matrix.
    pub fn random_unitary(dim: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<Complex64>> = (0..dim).map(|_| gaussian_vec(&mut rng, dim)).collect();
        for j in 0..dim {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: Complex64 = done[k]
                    .iter()
                    .zip(&rest[0])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                for (b, a) in rest[0].iter_mut().zip(&done[k]) {
                    *b -= proj * a;
                }
            }
            let n = cols[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            cols[j].iter_mut().for_each(|c| *c /= n);
        }
        let mut m = Mat::zeros(dim);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }
}

pub(crate) fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect()
}

/// Which compressed oracle answers queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Phase written as `ω_N^{u·D(x)}`.
    Cphso,
    /// Value added into the `u` register.
    Csto,
}

/// The `StdDecomp` swap on one `(N+1)`-dimensional cell: `|⊥⟩ ↔ |φ_0⟩`,
/// identity on the Fourier states with `u ≠ 0`.
pub fn std_decomp_matrix(n: u32) -> Mat {
    let d = n as usize + 1;
    let bot = n as usize;
    let mut s = Mat::identity(d);
    let amp = 1.0 / (n as f64).sqrt();
    // I - |φ0⟩⟨φ0| on the value block
    for i in 0..n as usize {
        for j in 0..n as usize {
            let v = s.get(i, j) - Complex64::new(amp * amp, 0.0);
            s.set(i, j, v);
        }
    }
    s.set(bot, bot, C0);
    for y in 0..n as usize {
        s.set(bot, y, Complex64::new(amp, 0.0));
        s.set(y, bot, Complex64::new(amp, 0.0));
    }
    s
}

/// Joint action on `(u, cell_x)`, index `u*(N+1) + c`, of one compressed query.
pub fn oracle_matrix(n: u32, kind: OracleKind) -> Mat {
    let nn = n as usize;
    let d = nn + 1;
    let s = Mat::identity(nn).kron(&std_decomp_matrix(n));
    let mut inner = Mat::zeros(nn * d);
    for u in 0..nn {
        for c in 0..d {
            let col = u * d + c;
            if c == nn {
                inner.set(col, col, C1);
                continue;
            }
            match kind {
                OracleKind::Cphso => {
                    let ph =
                        Complex64::from_polar(1.0, 2.0 * PI * ((u * c) % nn) as f64 / nn as f64);
                    inner.set(col, col, ph);
                }
                OracleKind::Csto => inner.set(((u + c) % nn) * d + c, col, C1),
            }
        }
    }
    s.mul(&inner).mul(&s)
}

/// A local gate on the algorithm registers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Identity,
    /// Quantum Fourier transform on the query-input register.
    FourierX,
    /// Quantum Fourier transform on the query-output register.
    FourierU,
    /// Seeded Haar-random unitary on all of `(x, u, z)`.
    Random {
        seed: u64,
    },
    /// Explicit matrix as rows of `[re, im]` pairs.
    Dense {
        matrix: Vec<Vec<[f64; 2]>>,
    },
}

impl Gate {
    pub fn matrix(&self, dims: &Dims) -> Result<Mat> {
        let d = dims.d_a();
        let m = match self {
            Gate::Identity => Mat::identity(d),
            Gate::FourierX => Mat::fourier(dims.cells())
                .kron(&Mat::identity(dims.n as usize))
                .kron(&Mat::identity(dims.z)),
            Gate::FourierU => Mat::identity(dims.cells())
                .kron(&Mat::fourier(dims.n as usize))
                .kron(&Mat::identity(dims.z)),
            Gate::Random { seed } => Mat::random_unitary(d, *seed),
            Gate::Dense { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return invalid(format!("dense gate must be {d}x{d}"));
                }
                Mat {
                    dim: d,
                    data: matrix
                        .iter()
                        .flatten()
                        .map(|[re, im]| Complex64::new(*re, *im))
                        .collect(),
                }
            }
        };
        if m.unitarity_error() > 1e-9 {
            return invalid("gate is not unitary to 1e-9");
        }
        Ok(m)
    }
}

/// `U_1, cO, U_2, cO, .., U_T, cO, U_final`: `queries + 1` gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitDescription {
    pub dims: Dims,
    pub oracle: OracleKind,
    pub gates: Vec<Gate>,
}

impl CircuitDescription {
    pub fn queries(&self) -> usize {
        self.gates.len().saturating_sub(1)
    }

    pub fn random(dims: Dims, queries: usize, oracle: OracleKind, seed: u64) -> CircuitDescription {
        let gates = (0..=queries as u64)
            .map(|i| Gate::Random {
                seed: seed.wrapping_mul(1_000_003).wrapping_add(i),
            })
            .collect();
        CircuitDescription {
            dims,
            oracle,
            gates,
        }
    }

    fn matrices(&self) -> Result<Vec<Mat>> {
        if self.gates.is_empty() {
            return invalid("a circuit needs at least the final gate");
        }
        self.gates.iter().map(|g| g.matrix(&self.dims)).collect()
    }
}

/// Dense joint state of algorithm and database.
#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    pub dims: Dims,
    pub amps: Vec<Complex64>,
}

impl QState {
    /// `|0⟩_A ⊗ |∅⟩`.
    pub fn initial(dims: Dims, budget: &Budget) -> Result<QState> {
        dims.check(budget)?;
        let mut amps = vec![C0; dims.len()];
        amps[dims.empty_db() * dims.d_a()] = C1;
        Ok(QState { dims, amps })
    }

    /// Normalised i.i.d. complex Gaussian amplitudes on basis states accepted by `keep(db, a)`.
    pub fn random(
        dims: Dims,
        budget: &Budget,
        seed: u64,
        keep: impl Fn(usize, usize) -> bool,
    ) -> Result<QState> {
        dims.check(budget)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d_a = dims.d_a();
        let mut amps = gaussian_vec(&mut rng, dims.len());
        for (i, v) in amps.iter_mut().enumerate() {
            if !keep(i / d_a, i % d_a) {
                *v = C0;
            }
        }
        let mut s = QState { dims, amps };
        let n = s.norm_sqr().sqrt();
        if n > 0.0 {
            s.amps.iter_mut().for_each(|v| *v /= n);
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn amp(&self, db: usize, a: usize) -> Complex64 {
        self.amps[db * self.dims.d_a() + a]
    }

    pub fn add(&mut self, other: &QState) {
        self.amps
            .iter_mut()
            .zip(&other.amps)
            .for_each(|(a, b)| *a += b);
    }

    pub fn distance(&self, other: &QState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn zeroed(&self) -> QState {
        QState {
            dims: self.dims,
            amps: vec![C0; self.amps.len()],
        }
    }

    pub fn apply_local(&mut self, m: &Mat) {
        let d_a = self.dims.d_a();
        self.amps.par_chunks_mut(d_a).for_each(|block| {
            if block.iter().all(|v| *v == C0) {
                return;
            }
            let src = block.to_vec();
            m.apply(&src, block);
        });
    }

    /// `StdDecomp` on one cell, regardless of the query register.
    pub fn std_decomp(&self, cell: usize) -> QState {
        let s = std_decomp_matrix(self.dims.n);
        let mut out = self.clone();
        let d_a = self.dims.d_a();
        let stride = self.dims.stride(cell);
        let base = self.dims.n as usize + 1;
        for db in 0..self.dims.db_count() {
            if !(db / stride).is_multiple_of(base) {
                continue;
            }
            for a in 0..d_a {
                let v: Vec<Complex64> = (0..base)
                    .map(|c| self.amps[(db + c * stride) * d_a + a])
                    .collect();
                let mut w = vec![C0; base];
                s.apply(&v, &mut w);
                for (c, val) in w.into_iter().enumerate() {
                    out.amps[(db + c * stride) * d_a + a] = val;
                }
            }
        }
        out
    }

    /// One compressed query, controlled on the query register.
    pub fn apply_oracle(&self, kind: OracleKind) -> QState {
        let w = oracle_matrix(self.dims.n, kind);
        self.apply_query_matrix(&w)
    }

    fn apply_query_matrix(&self, w: &Mat) -> QState {
        let dims = self.dims;
        let (n, z_len, d_a) = (dims.n as usize, dims.z, dims.d_a());
        let base = n + 1;
        let mut out = self.zeroed();
        for x in 0..dims.cells() {
            let stride = dims.stride(x);
            for db in 0..dims.db_count() {
                if !(db / stride).is_multiple_of(base) {
                    continue;
                }
                for z in 0..z_len {
                    let mut v = vec![C0; n * base];
                    for u in 0..n {
                        let a = dims.a_index(x, u as u32, z);
                        for c in 0..base {
                            v[u * base + c] = self.amps[(db + c * stride) * d_a + a];
                        }
                    }
                    if v.iter().all(|c| *c == C0) {
                        continue;
                    }
                    let mut r = vec![C0; n * base];
                    w.apply(&v, &mut r);
                    for u in 0..n {
                        let a = dims.a_index(x, u as u32, z);
                        for c in 0..base {
                            out.amps[(db + c * stride) * d_a + a] = r[u * base + c];
                        }
                    }
                }
            }
        }
        out
    }

    /// Keeps basis states accepted by `keep(db, a)`.
    pub fn project(&self, keep: impl Fn(usize, usize) -> bool) -> QState {
        let d_a = self.dims.d_a();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, v)| if keep(i / d_a, i % d_a) { *v } else { C0 })
            .collect();
        QState {
            dims: self.dims,
            amps,
        }
    }

    /// Largest amplitude on databases with more than `t` entries.
    pub fn max_amplitude_beyond(&self, t: usize) -> f64 {
        let d_a = self.dims.d_a();
        (0..self.dims.db_count())
            .filter(|&db| {
                self.dims
                    .decode_db(db)
                    .iter()
                    .filter(|c| c.is_some())
                    .count()
                    > t
            })
            .flat_map(|db| self.amps[db * d_a..(db + 1) * d_a].iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }

    /// Computational-basis distribution of the algorithm registers.
    pub fn output_distribution(&self) -> Vec<f64> {
        let d_a = self.dims.d_a();
        let mut p = vec![0.0; d_a];
        for chunk in self.amps.chunks(d_a) {
            for (a, v) in chunk.iter().enumerate() {
                p[a] += v.norm_sqr();
            }
        }
        p
    }
}

/// Runs the circuit against the compressed oracle, calling `after(t, state)`
/// right after the `t`-th query (1-based).
pub fn run_circuit_with(
    circ: &CircuitDescription,
    budget: &Budget,
    mut after: impl FnMut(usize, &mut QState),
) -> Result<QState> {
    let mats = circ.matrices()?;
    let mut st = QState::initial(circ.dims, budget)?;
    let w = oracle_matrix(circ.dims.n, circ.oracle);
    for (t, m) in mats.iter().enumerate() {
        st.apply_local(m);
        if t + 1 < mats.len() {
            st = st.apply_query_matrix(&w);
            after(t + 1, &mut st);
        }
    }
    Ok(st)
}

pub fn run_circuit(circ: &CircuitDescription, budget: &Budget) -> Result<QState> {
    run_circuit_with(circ, budget, |_, _| {})
}

/// Algorithm-register state after running against a fixed function table,
/// with the uncompressed oracle matching `circ.oracle`.
pub fn run_standard(circ: &CircuitDescription, f: &[u32]) -> Result<Vec<Complex64>> {
    let dims = circ.dims;
    if f.len() != dims.cells() {
        return invalid("function table has the wrong length");
    }
    let mats = circ.matrices()?;
    let mut v = vec![C0; dims.d_a()];
    v[0] = C1;
    let n = dims.n as usize;
    for (t, m) in mats.iter().enumerate() {
        let mut next = vec![C0; v.len()];
        m.apply(&v, &mut next);
        v = next;
        if t + 1 < mats.len() {
            let mut q = vec![C0; v.len()];
            for (a, amp) in v.iter().enumerate() {
                let (x, u, z) = dims.a_parts(a);
                let y = f[x] as usize;
                match circ.oracle {
                    OracleKind::Cphso => {
                        q[a] = amp
                            * Complex64::from_polar(
                                1.0,
                                2.0 * PI * ((u as usize * y) % n) as f64 / n as f64,
                            )
                    }
                    OracleKind::Csto => q[dims.a_index(x, ((u as usize + y) % n) as u32, z)] += amp,
                }
            }
            v = q;
        }
    }
    Ok(v)
}

/// Every function table on `cells` points, lexicographic.
pub fn all_tables(cells: usize, n: u32, budget: &Budget) -> Result<Vec<Vec<u32>>> {
    budget.check_oracles(sat_pow(n as u128, cells as u64))?;
    let mut out = vec![Vec::new()];
    for _ in 0..cells {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| (0..n).map(move |y| [p.clone(), vec![y]].concat()))
            .collect();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(k: usize, m: usize, n: u32, z: usize) -> Dims {
        Dims::new(k, m, n, z).unwrap()
    }

    #[test]
    fn database_codec_round_trip() {
        let d = dims(2, 2, 3, 1);
        for db in 0..d.db_count() {
            assert_eq!(d.encode_db(&d.decode_db(db)), db);
        }
        assert!(d.decode_db(d.empty_db()).iter().all(Option::is_none));
    }

    #[test]
    fn std_decomp_is_a_unitary_involution() {
        for n in 2..5 {
            let s = std_decomp_matrix(n);
            assert!(s.unitarity_error() < 1e-12);
            assert!(s
                .mul(&s)
                .data
                .iter()
                .zip(&Mat::identity(n as usize + 1).data)
                .all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn std_decomp_fills_empty_cell_uniformly() {
        let d = dims(1, 2, 2, 1);
        let s = QState::initial(d, &Budget::default())
            .unwrap()
            .std_decomp(0);
        for y in 0..2 {
            let db = d.encode_db(&[Some(y), None]);
            assert!((s.amp(db, 0).re - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn std_decomp_fixes_nonzero_fourier_states() {
        let n = 3u32;
        let d = dims(1, 1, n, 1);
        let mut st = QState::initial(d, &Budget::default()).unwrap().zeroed();
        for y in 0..n {
            let ph = Complex64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * y as f64 / n as f64);
            st.amps[d.encode_db(&[Some(y)]) * d.d_a()] = ph;
        }
        assert!(st.std_decomp(0).distance(&st) < 1e-12);
    }

    #[test]
    fn oracle_matrices_are_unitary() {
        for n in 2..5 {
            for kind in [OracleKind::Cphso, OracleKind::Csto] {
                assert!(oracle_matrix(n, kind).unitarity_error() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_phase_query_leaves_database_empty() {
        let d = dims(1, 2, 2, 1);
        let st = QState::initial(d, &Budget::default())
            .unwrap()
            .apply_oracle(OracleKind::Cphso);
        assert!((st.amp(d.empty_db(), 0) - C1).norm() < 1e-12);
        assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_query_bounds_the_database() {
        let d = dims(1, 3, 2, 1);
        let circ = CircuitDescription::random(d, 1, OracleKind::Cphso, 4);
        let st = run_circuit(&circ, &Budget::default()).unwrap();
        assert_eq!(st.max_amplitude_beyond(1), 0.0);
        assert!(st.max_amplitude_beyond(0) > 0.0);
    }

    #[test]
    fn empty_circuit_is_initial_state() {
        let d = dims(1, 2, 2, 2);
        let circ = CircuitDescription {
            dims: d,
            oracle: OracleKind::Cphso,
            gates: vec![Gate::Identity],
        };
        assert_eq!(
            run_circuit(&circ, &Budget::default()).unwrap(),
            QState::initial(d, &Budget::default()).unwrap()
        );
    }

    #[test]
    fn norm_is_preserved_by_queries() {
        for (k, m, n, z) in [(1, 2, 2, 1), (1, 3, 2, 2), (2, 2, 2, 1)] {
            let d = dims(k, m, n, z);
            for seed in 0..100 {
                let st = QState::random(d, &Budget::default(), seed, |_, _| true).unwrap();
                for kind in [OracleKind::Cphso, OracleKind::Csto] {
                    assert!((st.apply_oracle(kind).norm_sqr() - 1.0).abs() < 1e-10);
                }
                let cell = seed as usize % d.cells();
                assert!((st.std_decomp(cell).norm_sqr() - 1.0).abs() < 1e-10);
                assert!(st.std_decomp(cell).std_decomp(cell).distance(&st) < 1e-12);
            }
        }
    }

    #[test]
    fn gates_validate_shape_and_unitarity() {
        let d = dims(1, 1, 2, 1);
        let bad = Gate::Dense {
            matrix: vec![vec![[1.0, 0.0], [1.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]],
        };
        assert!(bad.matrix(&d).is_err());
        assert!(Gate::Dense {
            matrix: vec![vec![[1.0, 0.0]]]
        }
        .matrix(&d)
        .is_err());
        for g in [
            Gate::Identity,
            Gate::FourierX,
            Gate::FourierU,
            Gate::Random { seed: 3 },
        ] {
            assert!(g.matrix(&dims(1, 3, 2, 2)).is_ok());
        }
    }

    #[test]
    fn memory_cap_is_enforced() {
        let tiny = Budget {
            max_amplitudes: 10,
            ..Budget::default()
        };
        assert!(QState::initial(dims(1, 3, 2, 1), &tiny).is_err());
    }
}
