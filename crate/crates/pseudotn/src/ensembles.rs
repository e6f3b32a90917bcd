//! Gate ensembles: Haar unitaries, uniform Cliffords, random phase diagonals,
//! random basis permutations, and their P·F·C composition, all driven by a
//! deterministic seed tree.
//!
//! Cliffords are sampled exactly uniformly: a uniform integer index selects a
//! symplectic tableau through a transvection-based decomposition of Sp(2n, 2)
//! (the index-to-matrix map is a bijection, checked exhaustively in the tests
//! for n <= 3), uniform sign bits fix the Pauli frame, and the dense unitary
//! is rebuilt from the tableau's action on the stabilizer generators. Phases
//! and permutations come in truly random and keyed (PRF / Feistel) variants.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Largest qubit count for dense Clifford / P·F·C sampling.
pub const CLIFFORD_QUBIT_CAP: usize = 6;
/// Largest qubit count for structured phase and permutation gates.
pub const STRUCTURED_QUBIT_CAP: usize = 22;
/// Largest dimension `to_dense` will materialize.
pub const DENSE_GATE_CAP: usize = 1 << 12;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; the mixing primitive behind the seed tree, the keyed
/// phase PRF, and the Feistel round function.
pub fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-node RNG derivation from a master seed. Nodes are
/// addressed by integer paths, e.g. `[sample, gate_id]`.
#[derive(Debug, Clone, Copy)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        SeedTree { master }
    }

    pub fn node(&self, path: &[u64]) -> u64 {
        let mut acc = splitmix_mix(self.master ^ GOLDEN);
        for &p in path {
            acc = splitmix_mix(acc ^ p.wrapping_mul(GOLDEN).wrapping_add(1));
        }
        acc
    }

    pub fn rng(&self, path: &[u64]) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.node(path))
    }
}

/// Which ensemble a gate is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleSpec {
    Haar,
    Clifford,
    Pfc { keyed: bool },
}

impl std::str::FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(EnsembleSpec::Haar),
            "clifford" => Ok(EnsembleSpec::Clifford),
            "pfc" => Ok(EnsembleSpec::Pfc { keyed: false }),
            "pfc:keyed" => Ok(EnsembleSpec::Pfc { keyed: true }),
            other => Err(Error::Ensemble(format!(
                "unknown ensemble '{other}' (expected haar, clifford, pfc, pfc:keyed)"
            ))),
        }
    }
}

impl std::fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleSpec::Haar => write!(f, "haar"),
            EnsembleSpec::Clifford => write!(f, "clifford"),
            EnsembleSpec::Pfc { keyed: false } => write!(f, "pfc"),
            EnsembleSpec::Pfc { keyed: true } => write!(f, "pfc:keyed"),
        }
    }
}

/// Storage for a sampled gate: dense, diagonal-sign, or basis permutation.
#[derive(Debug, Clone)]
pub enum GateMatrix {
    Dense(Array2<Complex64>),
    Diagonal(Vec<f64>),
    Permutation(Vec<u32>),
}

/// A unitary gate on a `dim`-dimensional leg composite.
#[derive(Debug, Clone)]
pub struct UnitaryGate {
    dim: usize,
    matrix: GateMatrix,
}

impl UnitaryGate {
    /// Identity gate, stored as the trivial permutation.
    pub fn identity(dim: usize) -> Self {
        UnitaryGate {
            dim,
            matrix: GateMatrix::Permutation((0..dim as u32).collect()),
        }
    }

    /// Wraps an explicit square matrix. Unitarity is not checked here; the
    /// state builder's norm tracking catches non-unitary gates.
    pub fn from_dense(matrix: Array2<Complex64>) -> Result<Self> {
        if matrix.shape()[0] != matrix.shape()[1] {
            return Err(Error::Ensemble(format!(
                "gate matrix must be square, got {:?}",
                matrix.shape()
            )));
        }
        Ok(UnitaryGate {
            dim: matrix.shape()[0],
            matrix: GateMatrix::Dense(matrix),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &GateMatrix {
        &self.matrix
    }

    /// `out = U · input`, with `input` of shape `(dim, rest)`.
    pub fn apply_left_into(
        &self,
        input: ArrayView2<Complex64>,
        mut out: ArrayViewMut2<Complex64>,
    ) -> Result<()> {
        if input.shape()[0] != self.dim || out.shape() != input.shape() {
            return Err(Error::Simulation(format!(
                "gate of dimension {} applied to block {:?} -> {:?}",
                self.dim,
                input.shape(),
                out.shape()
            )));
        }
        match &self.matrix {
            GateMatrix::Dense(u) => {
                ndarray::linalg::general_mat_mul(
                    Complex64::new(1.0, 0.0),
                    u,
                    &input,
                    Complex64::new(0.0, 0.0),
                    &mut out,
                );
            }
            GateMatrix::Diagonal(signs) => {
                for (r, &s) in signs.iter().enumerate() {
                    let src = input.row(r);
                    let mut dst = out.row_mut(r);
                    for (d, &v) in dst.iter_mut().zip(src.iter()) {
                        *d = v * s;
                    }
                }
            }
            GateMatrix::Permutation(perm) => {
                for (r, &pr) in perm.iter().enumerate() {
                    let src = input.row(r);
                    let mut dst = out.row_mut(pr as usize);
                    for (d, &v) in dst.iter_mut().zip(src.iter()) {
                        *d = v;
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense matrix form, capped at `DENSE_GATE_CAP`.
    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        if self.dim > DENSE_GATE_CAP {
            return Err(Error::DimensionCap {
                dim: self.dim as u128,
                cap: DENSE_GATE_CAP as u128,
            });
        }
        Ok(match &self.matrix {
            GateMatrix::Dense(u) => u.clone(),
            GateMatrix::Diagonal(signs) => {
                let mut u = Array2::zeros((self.dim, self.dim));
                for (i, &s) in signs.iter().enumerate() {
                    u[(i, i)] = Complex64::new(s, 0.0);
                }
                u
            }
            GateMatrix::Permutation(perm) => {
                let mut u = Array2::zeros((self.dim, self.dim));
                for (x, &px) in perm.iter().enumerate() {
                    u[(px as usize, x)] = Complex64::new(1.0, 0.0);
                }
                u
            }
        })
    }
}

/// Haar-random unitary on `C^d`: complex Ginibre matrix, QR decomposition,
/// then the R-diagonal phase correction that makes the distribution exactly
/// invariant.
pub fn sample_haar(d: usize, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    use ndarray_linalg::QR;
    if d < 1 {
        return Err(Error::Ensemble(format!("haar dimension {d}")));
    }
    let mut g = Array2::<Complex64>::zeros((d, d));
    for v in g.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = Complex64::new(re, im);
    }
    let (mut q, r) = g.qr().map_err(|e| Error::Linalg(e.to_string()))?;
    for j in 0..d {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        if mag > 0.0 {
            let phase = rjj / mag;
            for v in q.column_mut(j).iter_mut() {
                *v *= phase;
            }
        }
    }
    Ok(UnitaryGate {
        dim: d,
        matrix: GateMatrix::Dense(q),
    })
}

fn qubit_count(d: usize, cap: usize, what: &str) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::Ensemble(format!(
            "{what} needs a power-of-two dimension, got {d}"
        )));
    }
    let n = d.trailing_zeros() as usize;
    if n > cap {
        return Err(Error::Ensemble(format!(
            "{what} capped at {cap} qubits, got {n}"
        )));
    }
    Ok(n)
}

/// Random diagonal of signs `(-1)^{f(x)}`. Truly random `f` draws one bit per
/// basis state; the keyed variant evaluates a fixed PRF under a key drawn
/// once from `rng`.
pub fn sample_phase(n: usize, keyed: bool, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    if n < 1 || n > STRUCTURED_QUBIT_CAP {
        return Err(Error::Ensemble(format!(
            "phase diagonal needs 1 <= n <= {STRUCTURED_QUBIT_CAP}, got {n}"
        )));
    }
    let total = 1usize << n;
    let mut signs = Vec::with_capacity(total);
    if keyed {
        let key: u64 = rng.gen();
        for x in 0..total {
            let bit = splitmix_mix(key ^ splitmix_mix(x as u64 ^ 0xd6e8_feb8_6659_fd93)) & 1;
            signs.push(1.0 - 2.0 * bit as f64);
        }
    } else {
        let mut word = 0u64;
        for x in 0..total {
            if x % 64 == 0 {
                word = rng.gen();
            }
            signs.push(1.0 - 2.0 * (word >> (x % 64) & 1) as f64);
        }
    }
    Ok(UnitaryGate {
        dim: total,
        matrix: GateMatrix::Diagonal(signs),
    })
}

/// Four-round balanced Feistel network over `n`-bit strings (halves of
/// `⌈n/2⌉` and `⌊n/2⌋` bits), keyed by `key`. Bijective by construction.
fn feistel_permutation(n: usize, key: u64) -> Vec<u32> {
    let total = 1usize << n;
    let lw0 = n - n / 2;
    let rw0 = n / 2;
    let round_key = |r: u64| splitmix_mix(key ^ r.wrapping_mul(GOLDEN).wrapping_add(0x2545_f491_4f6c_dd1d));
    (0..total)
        .map(|x| {
            let mut lw = lw0;
            let mut rw = rw0;
            let mut l = (x >> rw0) as u64;
            let mut r = x as u64 & ((1u64 << rw0) - 1);
            for round in 0..4u64 {
                let f = splitmix_mix(r ^ round_key(round)) & ((1u64 << lw) - 1);
                let nl = r;
                let nr = l ^ f;
                l = nl;
                r = nr;
                std::mem::swap(&mut lw, &mut rw);
            }
            ((l << rw0) | r) as u32
        })
        .collect()
}

/// Random permutation of the `2^n` basis states. Truly random uses a
/// Fisher-Yates shuffle; the keyed variant is a Feistel network under a key
/// drawn once from `rng` (for `n = 1` the keyed network degenerates, so it
/// falls back to a truly random draw).
pub fn sample_permutation(n: usize, keyed: bool, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    if n < 1 || n > STRUCTURED_QUBIT_CAP {
        return Err(Error::Ensemble(format!(
            "basis permutation needs 1 <= n <= {STRUCTURED_QUBIT_CAP}, got {n}"
        )));
    }
    let total = 1usize << n;
    let perm: Vec<u32> = if keyed && n > 1 {
        let key: u64 = rng.gen();
        feistel_permutation(n, key)
    } else {
        let mut p: Vec<u32> = (0..total as u32).collect();
        p.shuffle(rng);
        p
    };
    Ok(UnitaryGate {
        dim: total,
        matrix: GateMatrix::Permutation(perm),
    })
}

/// Symplectic inner product on `F_2^{2n}` bit vectors. Coordinate `2q` is
/// the X component of qubit `q`, coordinate `2q+1` the Z component.
#[inline]
fn sip(u: u32, v: u32) -> u32 {
    const M: u32 = 0x5555_5555;
    let ux = u & M;
    let uz = (u >> 1) & M;
    let vx = v & M;
    let vz = (v >> 1) & M;
    ((ux & vz) ^ (uz & vx)).count_ones() & 1
}

/// Symplectic transvection `v -> v + <v,h> h` (identity for `h = 0`).
#[inline]
fn zt(h: u32, v: u32) -> u32 {
    if sip(v, h) == 1 {
        v ^ h
    } else {
        v
    }
}

/// Returns `(a, b)` with `zt(a, zt(b, x)) = y` for nonzero `x`, `y`.
fn find_transvection(x: u32, y: u32, pairs: usize) -> (u32, u32) {
    if x == y {
        return (0, 0);
    }
    if sip(x, y) == 1 {
        return (x ^ y, 0);
    }
    // x and y pair to zero; route through a z with <x,z> = <y,z> = 1,
    // first looking for a qubit where both have support
    for q in 0..pairs {
        let xp = (x >> (2 * q)) & 3;
        let yp = (y >> (2 * q)) & 3;
        if xp != 0 && yp != 0 {
            for zp in 1u32..4 {
                if sip(xp, zp) == 1 && sip(yp, zp) == 1 {
                    let z = zp << (2 * q);
                    return (y ^ z, x ^ z);
                }
            }
        }
    }
    // supports are disjoint: pick one pairing partner for each
    let mut z = 0u32;
    for (vec, _) in [(x, 0), (y, 1)] {
        for q in 0..pairs {
            let vp = (vec >> (2 * q)) & 3;
            if vp != 0 {
                for zp in 1u32..4 {
                    if sip(vp, zp) == 1 {
                        z |= zp << (2 * q);
                        break;
                    }
                }
                break;
            }
        }
    }
    (y ^ z, x ^ z)
}

/// Returns `(a, b)` with `zt(a, zt(b, e_1)) = w`, both fixing `e_0`, for any
/// `w` with `<e_0, w> = 1`.
fn partner_transvections(w: u32, pairs: usize) -> (u32, u32) {
    let e2 = 2u32;
    if w == e2 {
        return (0, 0);
    }
    if sip(e2, w) == 1 {
        return (e2 ^ w, 0);
    }
    // need z with <e_0,z> = <e_1,z> = <w,z> = 1; z = e_0 + e_1 handles the
    // first two, and w (which has support beyond qubit 0 here) fixes the rest
    let mut z = 3u32;
    if sip(w, z) != 1 {
        for q in 1..pairs {
            let wp = (w >> (2 * q)) & 3;
            if wp != 0 {
                for zp in 1u32..4 {
                    if sip(wp, zp) == 1 {
                        z |= zp << (2 * q);
                        break;
                    }
                }
                break;
            }
        }
    }
    (w ^ z, e2 ^ z)
}

/// Order of `Sp(2n, 2)`: `prod_{j=1..n} (4^j - 1) 2^{2j-1}`. Fits u128 for
/// `n <= 6` with plenty of room.
fn sp_group_size(n: usize) -> u128 {
    let mut size = 1u128;
    for j in 1..=n {
        size *= ((1u128 << (2 * j)) - 1) << (2 * j - 1);
    }
    size
}

/// Decodes `index` in `[0, sp_group_size(n))` into the columns of a
/// symplectic matrix: entry `c` is the image of basis vector `e_c`. Distinct
/// indices give distinct matrices and every group element is hit, so a
/// uniform index yields a uniform symplectic matrix.
///
/// Layer structure: the image `f1` of `e_0` is an arbitrary nonzero vector,
/// the image `f2` of `e_1` is `T(w)` where `T` is the transvection pair
/// taking `e_0` to `f1` and `w` ranges over the `2^{2n-1}` vectors pairing
/// to 1 with `e_0`; the remaining columns come from a recursively decoded
/// element on `n - 1` qubits, pushed through the maps taking `(e_0, e_1)` to
/// `(f1, f2)`.
fn symplectic_cols(mut index: u128, n: usize) -> Vec<u32> {
    if n == 0 {
        return Vec::new();
    }
    let nn = 2 * n;
    let nonzero = (1u128 << nn) - 1;
    let f1 = ((index % nonzero) + 1) as u32;
    index /= nonzero;
    let bmask = (index % (1u128 << (nn - 1))) as u32;
    index /= 1u128 << (nn - 1);
    // w = e_1 + b_0 e_0 + sum_{j >= 2} b_{j-1} e_j
    let w = 2u32 | (bmask & 1) | ((bmask & !1u32) << 1);
    let (t1, t2) = find_transvection(1, f1, n);
    let (w1, w2) = partner_transvections(w, n);
    let sub = symplectic_cols(index, n - 1);
    let mut cols = vec![0u32; nn];
    cols[0] = f1;
    cols[1] = zt(t1, zt(t2, w));
    for c in 2..nn {
        let v = sub[c - 2] << 2;
        cols[c] = zt(t1, zt(t2, zt(w1, zt(w2, v))));
    }
    cols
}

fn uniform_u128_below(bound: u128, rng: &mut ChaCha8Rng) -> u128 {
    let limit = u128::MAX - (u128::MAX % bound);
    loop {
        let x: u128 = rng.gen();
        if x < limit {
            return x % bound;
        }
    }
}

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Signed Pauli `(-1)^neg i^{|x & z|} X^x Z^z` in sparse form. Qubit `q` of
/// the tableau maps to index bit `n-1-q` (first qubit most significant).
struct DensePauli {
    xmask: usize,
    zmask: usize,
    base: Complex64,
}

impl DensePauli {
    fn new(v: u32, negative: bool, n: usize) -> Self {
        let mut xmask = 0usize;
        let mut zmask = 0usize;
        for q in 0..n {
            let bit = 1usize << (n - 1 - q);
            if v >> (2 * q) & 1 == 1 {
                xmask |= bit;
            }
            if v >> (2 * q + 1) & 1 == 1 {
                zmask |= bit;
            }
        }
        let ycount = (xmask & zmask).count_ones();
        let mut base = I_POW[(ycount % 4) as usize];
        if negative {
            base = -base;
        }
        DensePauli { xmask, zmask, base }
    }

    fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        for (c, &v) in input.iter().enumerate() {
            let sign = if (c & self.zmask).count_ones() & 1 == 1 {
                -self.base
            } else {
                self.base
            };
            out[c ^ self.xmask] = sign * v;
        }
    }
}

/// Dense Clifford unitary with tableau action `U X_q U† = P_q`,
/// `U Z_q U† = Q_q`, where `P_q`, `Q_q` are the signed Paulis read off
/// columns `2q`, `2q+1` of `cols` and bits `2q`, `2q+1` of `sign_bits`.
///
/// `U|0..0>` is the stabilizer state of the `Q_q` (extracted from the
/// rank-one projector `prod_q (I + Q_q)/2`), and column `x` is
/// `prod_q P_q^{x_q} U|0..0>`; the `P_q` commute, so the order is immaterial
/// and the reconstruction is exact.
fn tableau_unitary(cols: &[u32], sign_bits: u32, n: usize) -> Array2<Complex64> {
    let dim = 1usize << n;
    let mut m = Array2::<Complex64>::eye(dim);
    let mut tmp = vec![Complex64::new(0.0, 0.0); dim];
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for q in 0..n {
        let stab = DensePauli::new(cols[2 * q + 1], sign_bits >> (2 * q + 1) & 1 == 1, n);
        for col in 0..dim {
            for (r, t) in tmp.iter_mut().enumerate() {
                *t = m[(r, col)];
            }
            stab.apply(&tmp, &mut out);
            for (r, &o) in out.iter().enumerate() {
                m[(r, col)] = (m[(r, col)] + o) * 0.5;
            }
        }
    }
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for c in 0..dim {
        let nsq: f64 = m.column(c).iter().map(|v| v.norm_sqr()).sum();
        if nsq > best_norm {
            best_norm = nsq;
            best = c;
        }
    }
    let scale = best_norm.sqrt();
    let psi0: Vec<Complex64> = m.column(best).iter().map(|&v| v / scale).collect();
    let flips: Vec<DensePauli> = (0..n)
        .map(|q| DensePauli::new(cols[2 * q], sign_bits >> (2 * q) & 1 == 1, n))
        .collect();
    let mut u = Array2::<Complex64>::zeros((dim, dim));
    for x in 0..dim {
        tmp.copy_from_slice(&psi0);
        for (q, flip) in flips.iter().enumerate() {
            if x >> (n - 1 - q) & 1 == 1 {
                flip.apply(&tmp, &mut out);
                std::mem::swap(&mut tmp, &mut out);
            }
        }
        for (r, &v) in tmp.iter().enumerate() {
            u[(r, x)] = v;
        }
    }
    u
}

/// Uniformly random Clifford unitary on `n <= 6` qubits, dense.
pub fn sample_clifford(n: usize, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    if n < 1 || n > CLIFFORD_QUBIT_CAP {
        return Err(Error::Ensemble(format!(
            "clifford sampling needs 1 <= n <= {CLIFFORD_QUBIT_CAP}, got {n}"
        )));
    }
    let index = uniform_u128_below(sp_group_size(n), rng);
    let cols = symplectic_cols(index, n);
    let sign_bits = (rng.gen::<u64>() & ((1u64 << (2 * n)) - 1)) as u32;
    Ok(UnitaryGate {
        dim: 1 << n,
        matrix: GateMatrix::Dense(tableau_unitary(&cols, sign_bits, n)),
    })
}

/// P·F·C gate: random Clifford, then a random phase diagonal, then a random
/// basis permutation, composed densely. Draw order is C, F, P.
pub fn sample_pfc(n: usize, keyed: bool, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    if n < 1 || n > CLIFFORD_QUBIT_CAP {
        return Err(Error::Ensemble(format!(
            "pfc sampling needs 1 <= n <= {CLIFFORD_QUBIT_CAP}, got {n}"
        )));
    }
    let c = sample_clifford(n, rng)?;
    let f = sample_phase(n, keyed, rng)?;
    let p = sample_permutation(n, keyed, rng)?;
    let mut dense = match c.matrix {
        GateMatrix::Dense(u) => u,
        _ => unreachable!("clifford gates are dense"),
    };
    let signs = match &f.matrix {
        GateMatrix::Diagonal(s) => s,
        _ => unreachable!("phase gates are diagonal"),
    };
    for (r, &s) in signs.iter().enumerate() {
        for v in dense.row_mut(r).iter_mut() {
            *v *= s;
        }
    }
    let perm = match &p.matrix {
        GateMatrix::Permutation(q) => q,
        _ => unreachable!("permutation gates are permutations"),
    };
    let dim = 1usize << n;
    let mut out = Array2::<Complex64>::zeros((dim, dim));
    for r in 0..dim {
        let pr = perm[r] as usize;
        for c in 0..dim {
            out[(pr, c)] = dense[(r, c)];
        }
    }
    Ok(UnitaryGate {
        dim,
        matrix: GateMatrix::Dense(out),
    })
}

/// Samples a gate of dimension `d` from the ensemble.
pub fn sample_gate(spec: EnsembleSpec, d: usize, rng: &mut ChaCha8Rng) -> Result<UnitaryGate> {
    match spec {
        EnsembleSpec::Haar => sample_haar(d, rng),
        EnsembleSpec::Clifford => {
            let n = qubit_count(d, CLIFFORD_QUBIT_CAP, "clifford gate")?;
            sample_clifford(n, rng)
        }
        EnsembleSpec::Pfc { keyed } => {
            let n = qubit_count(d, CLIFFORD_QUBIT_CAP, "pfc gate")?;
            sample_pfc(n, keyed, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn unitarity_error(u: &Array2<Complex64>) -> f64 {
        let d = u.shape()[0];
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    acc += u[(k, i)].conj() * u[(k, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    #[test]
    fn seed_tree_is_deterministic_and_separating() {
        let t = SeedTree::new(42);
        assert_eq!(t.node(&[1, 2]), t.node(&[1, 2]));
        assert_ne!(t.node(&[1, 2]), t.node(&[2, 1]));
        assert_ne!(t.node(&[1]), t.node(&[1, 0]));
        assert_ne!(SeedTree::new(1).node(&[5]), SeedTree::new(2).node(&[5]));
    }

    #[test]
    fn haar_gates_are_unitary_and_deterministic() {
        for d in [2usize, 7, 16] {
            let mut rng = SeedTree::new(9).rng(&[d as u64]);
            let u = sample_haar(d, &mut rng).unwrap();
            let dense = u.to_dense().unwrap();
            assert!(unitarity_error(&dense) < 1e-10, "d={d}");
        }
        let t = SeedTree::new(11);
        let a = sample_haar(5, &mut t.rng(&[0, 3])).unwrap().to_dense().unwrap();
        let b = sample_haar(5, &mut t.rng(&[0, 3])).unwrap().to_dense().unwrap();
        assert_eq!(a, b);
        let c = sample_haar(5, &mut t.rng(&[0, 4])).unwrap().to_dense().unwrap();
        assert!((&a - &c).iter().any(|v| v.norm() > 1e-3));
    }

    #[test]
    fn haar_low_moments_match_theory() {
        // E|U_00|^2 = 1/d and E|U_00|^4 = 2/(d(d+1)) for Haar
        let d = 4usize;
        let k = 20000usize;
        let t = SeedTree::new(17);
        let (mut s2, mut s4, mut s4sq) = (0.0, 0.0, 0.0);
        for i in 0..k {
            let u = sample_haar(d, &mut t.rng(&[i as u64])).unwrap();
            let dense = match u.matrix() {
                GateMatrix::Dense(m) => m.clone(),
                _ => unreachable!(),
            };
            let p = dense[(0, 0)].norm_sqr();
            s2 += p;
            s4 += p * p;
            s4sq += p * p * p * p;
        }
        let m2 = s2 / k as f64;
        let m4 = s4 / k as f64;
        let var4 = (s4sq / k as f64 - m4 * m4).max(0.0);
        let z2 = (m2 - 0.25) / (0.25 / (k as f64).sqrt());
        let z4 = (m4 - 0.1) / (var4 / k as f64).sqrt().max(1e-12);
        assert!(z2.abs() < 5.0, "second moment z = {z2}");
        assert!(z4.abs() < 5.0, "fourth moment z = {z4}");
    }

    #[test]
    fn phase_gates_are_sign_diagonals() {
        let t = SeedTree::new(23);
        for keyed in [false, true] {
            let g = sample_phase(10, keyed, &mut t.rng(&[keyed as u64])).unwrap();
            assert_eq!(g.dim(), 1024);
            let signs = match g.matrix() {
                GateMatrix::Diagonal(s) => s,
                _ => panic!("expected diagonal"),
            };
            assert!(signs.iter().all(|&s| s == 1.0 || s == -1.0));
            let sum: f64 = signs.iter().sum();
            assert!(sum.abs() < 5.0 * (1024f64).sqrt(), "sign bias {sum}");
        }
        assert!(sample_phase(23, false, &mut t.rng(&[9])).is_err());
    }

    #[test]
    fn permutations_are_bijections() {
        let t = SeedTree::new(29);
        for (n, keyed) in [(1usize, false), (4, false), (4, true), (12, true), (12, false)] {
            let g = sample_permutation(n, keyed, &mut t.rng(&[n as u64, keyed as u64])).unwrap();
            let perm = match g.matrix() {
                GateMatrix::Permutation(p) => p.clone(),
                _ => panic!("expected permutation"),
            };
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            let expect: Vec<u32> = (0..(1u32 << n)).collect();
            assert_eq!(sorted, expect, "n={n} keyed={keyed}");
        }
    }

    #[test]
    fn keyed_permutation_is_bijective_at_cap() {
        let key = 0x1234_5678_9abc_def0u64;
        let perm = feistel_permutation(STRUCTURED_QUBIT_CAP, key);
        let total = 1usize << STRUCTURED_QUBIT_CAP;
        let mut seen = vec![false; total];
        for &v in &perm {
            assert!(!seen[v as usize]);
            seen[v as usize] = true;
        }
    }

    #[test]
    fn keyed_single_qubit_permutation_covers_both_orders() {
        let t = SeedTree::new(31);
        let mut identities = 0;
        let mut swaps = 0;
        for i in 0..100 {
            let g = sample_permutation(1, true, &mut t.rng(&[i])).unwrap();
            match g.matrix() {
                GateMatrix::Permutation(p) if p == &vec![0, 1] => identities += 1,
                GateMatrix::Permutation(p) if p == &vec![1, 0] => swaps += 1,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(identities > 20 && swaps > 20, "{identities} vs {swaps}");
    }

    /// Canonical key of a small unitary modulo global phase.
    fn phase_class_key(u: &Array2<Complex64>) -> Vec<(i64, i64)> {
        let mut phase = Complex64::new(1.0, 0.0);
        'outer: for i in 0..u.shape()[0] {
            for j in 0..u.shape()[1] {
                if u[(i, j)].norm() > 1e-6 {
                    phase = u[(i, j)].conj() / u[(i, j)].norm();
                    break 'outer;
                }
            }
        }
        u.iter()
            .map(|v| {
                let w = v * phase;
                ((w.re * 1e6).round() as i64, (w.im * 1e6).round() as i64)
            })
            .collect()
    }

    fn assert_symplectic(cols: &[u32], n: usize) {
        for i in 0..2 * n {
            for j in (i + 1)..2 * n {
                let expect = if j == (i ^ 1) { 1 } else { 0 };
                assert_eq!(sip(cols[i], cols[j]), expect, "pairing ({i},{j})");
            }
        }
    }

    fn packed_cols(cols: &[u32]) -> [u16; 12] {
        let mut key = [0u16; 12];
        for (slot, &c) in key.iter_mut().zip(cols.iter()) {
            *slot = c as u16;
        }
        key
    }

    #[test]
    fn symplectic_index_enumeration_is_bijective_on_small_groups() {
        for n in 1..=2usize {
            let size = sp_group_size(n);
            assert_eq!(size, if n == 1 { 6 } else { 720 });
            let mut keys: Vec<[u16; 12]> = Vec::with_capacity(size as usize);
            for index in 0..size {
                let cols = symplectic_cols(index, n);
                assert_symplectic(&cols, n);
                keys.push(packed_cols(&cols));
            }
            keys.sort_unstable();
            keys.dedup();
            assert_eq!(keys.len() as u128, size, "n={n} index map not injective");
        }
    }

    #[test]
    fn symplectic_enumeration_covers_the_three_qubit_group() {
        let size = sp_group_size(3);
        assert_eq!(size, 1_451_520);
        let mut keys: Vec<[u16; 12]> = Vec::with_capacity(size as usize);
        for index in 0..size {
            let cols = symplectic_cols(index, 3);
            assert_symplectic(&cols, 3);
            keys.push(packed_cols(&cols));
        }
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len() as u128, size, "index map not injective");
    }

    #[test]
    fn single_qubit_cliffords_are_exactly_uniform() {
        // all 6 symplectic indices x 4 sign patterns hit each of the 24
        // phase classes exactly once
        let mut classes: HashMap<Vec<(i64, i64)>, usize> = HashMap::new();
        for index in 0..6u128 {
            let cols = symplectic_cols(index, 1);
            for signs in 0..4u32 {
                let u = tableau_unitary(&cols, signs, 1);
                assert!(unitarity_error(&u) < 1e-12);
                *classes.entry(phase_class_key(&u)).or_insert(0) += 1;
            }
        }
        assert_eq!(classes.len(), 24, "single-qubit group has 24 phase classes");
        for (_, count) in classes {
            assert_eq!(count, 1, "class hit more than once");
        }
    }

    #[test]
    fn three_qubit_cliffords_reproduce_the_haar_state_moment() {
        use crate::replica::{haar_state_moment, trace_norm_distance, MomentOperator, RegisterLayout};
        let t = SeedTree::new(59);
        let k = 150_000usize;
        let dim = 8usize;
        let rdim = dim * dim;
        let mut acc1 = Array2::<Complex64>::zeros((rdim, rdim));
        let mut acc2 = Array2::<Complex64>::zeros((rdim, rdim));
        let mut v = vec![Complex64::new(0.0, 0.0); rdim];
        for i in 0..k {
            let g = sample_clifford(3, &mut t.rng(&[i as u64])).unwrap();
            let u = match g.matrix() {
                GateMatrix::Dense(m) => m,
                _ => unreachable!(),
            };
            for a in 0..dim {
                for b in 0..dim {
                    v[a * dim + b] = u[(a, 0)] * u[(b, 0)];
                }
            }
            let acc = if i < k / 2 { &mut acc1 } else { &mut acc2 };
            for r in 0..rdim {
                let vr = v[r];
                if vr.norm_sqr() < 1e-30 {
                    continue;
                }
                for c in 0..rdim {
                    acc[(r, c)] += vr * v[c].conj();
                }
            }
        }
        let h1 = (k / 2) as f64;
        let h2 = (k - k / 2) as f64;
        let diff = &acc1 / Complex64::new(h1, 0.0) - &acc2 / Complex64::new(h2, 0.0);
        let stderr = diff.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let mean = (&acc1 + &acc2) / Complex64::new(k as f64, 0.0);
        let layout = RegisterLayout::new(vec![dim], 2).unwrap();
        let sampled = MomentOperator::from_matrix(layout.clone(), mean).unwrap();
        let exact = haar_state_moment::<Complex64>(&layout).unwrap();
        let distance = trace_norm_distance(&sampled, &exact).unwrap();
        assert!(
            distance < 5.0 * stderr,
            "three-qubit moment off: distance {distance:.3e} vs stderr {stderr:.3e}"
        );
    }

    /// Extracts the `(x, z)` Pauli exponents of `B = U P U†`, asserting `B`
    /// is exactly a signed Pauli.
    fn pauli_exponents(b: &Array2<Complex64>, n: usize) -> (u64, u64) {
        let dim = 1usize << n;
        let mut x = 0u64;
        let mut found = false;
        for r in 0..dim {
            if b[(r, 0)].norm() > 1e-8 {
                x = r as u64;
                found = true;
                break;
            }
        }
        assert!(found, "zero column in conjugated Pauli");
        let base = b[(x as usize, 0)];
        let mut z = 0u64;
        for t in 0..n {
            let col = 1usize << t;
            let row = col ^ x as usize;
            let ratio = b[(row, col)] / base;
            assert!(ratio.im.abs() < 1e-8, "non-real ratio {ratio}");
            if ratio.re < 0.0 {
                assert!((ratio.re + 1.0).abs() < 1e-8);
                z |= 1 << t;
            } else {
                assert!((ratio.re - 1.0).abs() < 1e-8);
            }
        }
        // full Pauli pattern check
        for c in 0..dim {
            let expect_row = c ^ x as usize;
            for r in 0..dim {
                let v = b[(r, c)];
                if r == expect_row {
                    let sign = if ((c as u64 & z).count_ones() & 1) == 1 {
                        -1.0
                    } else {
                        1.0
                    };
                    assert!((v - base * sign).norm() < 1e-8);
                } else {
                    assert!(v.norm() < 1e-8);
                }
            }
        }
        (x, z)
    }

    fn pauli_dense(n: usize, x: u64, z: u64) -> Array2<Complex64> {
        let dim = 1usize << n;
        let mut p = Array2::<Complex64>::zeros((dim, dim));
        for c in 0..dim {
            let sign = if ((c as u64 & z).count_ones() & 1) == 1 {
                -1.0
            } else {
                1.0
            };
            p[(c ^ x as usize, c)] = Complex64::new(sign, 0.0);
        }
        p
    }

    fn symplectic_key(u: &Array2<Complex64>, n: usize) -> Vec<(u64, u64)> {
        let ud = u.mapv(|v| v.conj()).reversed_axes();
        let mut key = Vec::with_capacity(2 * n);
        for t in 0..n {
            for (px, pz) in [(1u64 << t, 0u64), (0, 1u64 << t)] {
                let p = pauli_dense(n, px, pz);
                let b = u.dot(&p).dot(&ud);
                key.push(pauli_exponents(&b, n));
            }
        }
        key
    }

    #[test]
    fn sampled_cliffords_conjugate_paulis_to_paulis() {
        let t = SeedTree::new(37);
        for n in 1..=CLIFFORD_QUBIT_CAP {
            let reps = if n <= 4 { 4u64 } else { 2 };
            for s in 0..reps {
                let g = sample_clifford(n, &mut t.rng(&[n as u64, s])).unwrap();
                let u = g.to_dense().unwrap();
                assert!(unitarity_error(&u) < 1e-10);
                let _ = symplectic_key(&u, n);
            }
        }
    }

    #[test]
    fn two_qubit_cliffords_cover_symplectic_classes_uniformly() {
        // all 720 symplectic classes, chi-squared against uniform
        let t = SeedTree::new(41);
        let k = 60000usize;
        let mut counts: HashMap<Vec<(u64, u64)>, usize> = HashMap::new();
        let (mut s4, mut s6) = (0.0f64, 0.0f64);
        let (mut s4sq, mut s6sq) = (0.0f64, 0.0f64);
        for i in 0..k {
            let g = sample_clifford(2, &mut t.rng(&[i as u64])).unwrap();
            let u = match g.matrix() {
                GateMatrix::Dense(m) => m.clone(),
                _ => unreachable!(),
            };
            *counts.entry(symplectic_key(&u, 2)).or_insert(0) += 1;
            let p = u[(0, 0)].norm_sqr();
            s4 += p * p;
            s6 += p * p * p;
            s4sq += p.powi(4);
            s6sq += p.powi(6);
        }
        assert_eq!(counts.len(), 720, "did not reach all symplectic classes");
        let expect = k as f64 / 720.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        // dof = 719: mean 719, sd sqrt(2*719) ~ 37.9
        assert!(chi2 < 719.0 + 5.0 * 37.9, "chi2 = {chi2}");
        assert!(chi2 > 719.0 - 5.0 * 37.9, "chi2 suspiciously small: {chi2}");
        // the Clifford group is an exact 2- and 3-design:
        // E|U_00|^4 = 2/(d(d+1)) = 1/10, E|U_00|^6 = 6/(d(d+1)(d+2)) = 1/20
        let m4 = s4 / k as f64;
        let m6 = s6 / k as f64;
        let sd4 = ((s4sq / k as f64 - m4 * m4).max(0.0) / k as f64).sqrt();
        let sd6 = ((s6sq / k as f64 - m6 * m6).max(0.0) / k as f64).sqrt();
        let z4 = (m4 - 0.1) / sd4.max(1e-12);
        let z6 = (m6 - 0.05) / sd6.max(1e-12);
        assert!(z4.abs() < 5.0, "fourth moment z = {z4}");
        assert!(z6.abs() < 5.0, "sixth moment z = {z6}");
    }

    #[test]
    fn pfc_composition_matches_its_parts() {
        let t = SeedTree::new(43);
        for keyed in [false, true] {
            let seed = [7u64, keyed as u64];
            let g = sample_pfc(3, keyed, &mut t.rng(&seed)).unwrap();
            let u = g.to_dense().unwrap();
            assert!(unitarity_error(&u) < 1e-10);
            // replay the draws in the same order
            let mut rng = t.rng(&seed);
            let c = sample_clifford(3, &mut rng).unwrap().to_dense().unwrap();
            let f = sample_phase(3, keyed, &mut rng).unwrap().to_dense().unwrap();
            let p = sample_permutation(3, keyed, &mut rng)
                .unwrap()
                .to_dense()
                .unwrap();
            let expect = p.dot(&f).dot(&c);
            let diff = (&u - &expect).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "keyed={keyed}: {diff}");
        }
    }

    #[test]
    fn sample_gate_dispatches_and_validates() {
        let t = SeedTree::new(47);
        let g = sample_gate(EnsembleSpec::Haar, 6, &mut t.rng(&[0])).unwrap();
        assert_eq!(g.dim(), 6);
        let g = sample_gate(EnsembleSpec::Clifford, 8, &mut t.rng(&[1])).unwrap();
        assert_eq!(g.dim(), 8);
        let g = sample_gate(EnsembleSpec::Pfc { keyed: true }, 4, &mut t.rng(&[2])).unwrap();
        assert_eq!(g.dim(), 4);
        assert!(sample_gate(EnsembleSpec::Clifford, 6, &mut t.rng(&[3])).is_err());
        assert!(sample_gate(EnsembleSpec::Clifford, 128, &mut t.rng(&[4])).is_err());
        assert!("haar".parse::<EnsembleSpec>().is_ok());
        assert!("pfc:keyed".parse::<EnsembleSpec>().unwrap() == EnsembleSpec::Pfc { keyed: true });
        assert!("frob".parse::<EnsembleSpec>().is_err());
    }

    #[test]
    fn gate_application_matches_dense_multiplication() {
        let t = SeedTree::new(53);
        let mut rng = t.rng(&[0]);
        let input = {
            let mut m = Array2::<Complex64>::zeros((8, 3));
            for v in m.iter_mut() {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            m
        };
        for spec in [
            EnsembleSpec::Haar,
            EnsembleSpec::Clifford,
            EnsembleSpec::Pfc { keyed: false },
        ] {
            let g = sample_gate(spec, 8, &mut rng).unwrap();
            let mut out = Array2::<Complex64>::zeros((8, 3));
            g.apply_left_into(input.view(), out.view_mut()).unwrap();
            let expect = g.to_dense().unwrap().dot(&input);
            let diff = (&out - &expect).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
        // structured paths
        let f = sample_phase(3, false, &mut rng).unwrap();
        let mut out = Array2::<Complex64>::zeros((8, 3));
        f.apply_left_into(input.view(), out.view_mut()).unwrap();
        let expect = f.to_dense().unwrap().dot(&input);
        assert!((&out - &expect).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-14);
        let p = sample_permutation(3, true, &mut rng).unwrap();
        let mut out = Array2::<Complex64>::zeros((8, 3));
        p.apply_left_into(input.view(), out.view_mut()).unwrap();
        let expect = p.to_dense().unwrap().dot(&input);
        assert!((&out - &expect).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-14);
    }
}
