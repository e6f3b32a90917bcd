//! Symmetric-group permutations, cycle types, and Weingarten tables.
//!
//! Permutations act on copy labels `0..m`. The Gram matrix of permutation
//! operators on `(C^d)^{⊗m}` has entries `d^{cycles(σ τ^{-1})}`; its inverse
//! gives the Weingarten function used by the twirl and the spin models.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

use crate::{Error, Result};

/// Hard cap on full-group enumeration (`m! <= 720`).
pub const GROUP_ENUM_CAP: usize = 6;

/// A permutation of `{0, .., m-1}`, stored as the image list `i -> mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    /// Identity on `m` points.
    pub fn identity(m: usize) -> Self {
        Permutation {
            mapping: (0..m).collect(),
        }
    }

    /// Builds from an explicit image list, rejecting non-bijections.
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let m = mapping.len();
        let mut seen = vec![false; m];
        for &v in &mapping {
            if v >= m || seen[v] {
                return Err(Error::InvalidPermutation(format!("{mapping:?}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { mapping })
    }

    /// The transposition `(i j)` on `m` points.
    pub fn transposition(m: usize, i: usize, j: usize) -> Result<Self> {
        if i >= m || j >= m || i == j {
            return Err(Error::InvalidPermutation(format!(
                "transposition ({i} {j}) on {m} points"
            )));
        }
        let mut mapping: Vec<usize> = (0..m).collect();
        mapping.swap(i, j);
        Ok(Permutation { mapping })
    }

    /// Number of points.
    pub fn m(&self) -> usize {
        self.mapping.len()
    }

    /// Image of `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    /// The underlying image list.
    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// Composition `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.m() != other.m() {
            return Err(Error::CopyMismatch(self.m(), other.m()));
        }
        let mapping = other.mapping.iter().map(|&i| self.mapping[i]).collect();
        Ok(Permutation { mapping })
    }

    /// Group inverse.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.m()];
        for (i, &v) in self.mapping.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { mapping: inv }
    }

    /// Cycle type as a sorted (descending) list of cycle lengths.
    pub fn cycle_type(&self) -> CycleType {
        let m = self.m();
        let mut seen = vec![false; m];
        let mut lengths = Vec::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.mapping[cur];
                len += 1;
            }
            lengths.push(len);
        }
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        CycleType { lengths }
    }

    /// Number of cycles, fixed points included.
    pub fn cycle_count(&self) -> usize {
        self.cycle_type().lengths.len()
    }
}

/// Cycle type of a permutation: cycle lengths sorted descending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleType {
    lengths: Vec<usize>,
}

impl CycleType {
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn cycle_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn m(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// All of `S_m` in lexicographic order of the image list.
pub fn enumerate_group(m: usize) -> Result<Vec<Permutation>> {
    if m == 0 || m > GROUP_ENUM_CAP {
        return Err(Error::GroupCap {
            m,
            cap: GROUP_ENUM_CAP,
        });
    }
    let mut out = Vec::with_capacity((1..=m).product());
    let mut current: Vec<usize> = (0..m).collect();
    loop {
        out.push(Permutation {
            mapping: current.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (0..m - 1).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..m).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    Ok(out)
}

/// `n!` in `u128`.
pub fn factorial_u128(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// `d^k` in `u128`, erroring only on genuine overflow.
fn pow_u128(d: u128, k: usize) -> Result<u128> {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc = acc
            .checked_mul(d)
            .ok_or(Error::DimensionCap {
                dim: u128::MAX,
                cap: u128::MAX,
            })?;
    }
    Ok(acc)
}

/// Gram matrix `G[σ,τ] = d^{cycles(σ τ^{-1})}` over a fixed group ordering.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub m: usize,
    pub d: usize,
    pub group: Vec<Permutation>,
    pub entries: Array2<f64>,
}

/// Builds the Gram matrix of permutation operators on `(C^d)^{⊗m}`.
pub fn gram_matrix(m: usize, d: usize) -> Result<GramMatrix> {
    if d < 1 {
        return Err(Error::InvalidPermutation(format!("local dimension {d}")));
    }
    let group = enumerate_group(m)?;
    let n = group.len();
    let mut entries = Array2::<f64>::zeros((n, n));
    for (i, sigma) in group.iter().enumerate() {
        for (j, tau) in group.iter().enumerate() {
            let rel = sigma.compose(&tau.inverse())?;
            entries[(i, j)] = (d as f64).powi(rel.cycle_count() as i32);
        }
    }
    Ok(GramMatrix {
        m,
        d,
        group,
        entries,
    })
}

/// Weingarten function for `U(d)` at moment order `m`, tabulated by cycle type.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    pub m: usize,
    pub d: usize,
    values: BTreeMap<CycleType, f64>,
}

impl WeingartenTable {
    /// Builds the table by inverting the Gram matrix. Requires `m < d`,
    /// where the permutation operators are linearly independent.
    pub fn new(m: usize, d: usize) -> Result<Self> {
        if m >= d {
            return Err(Error::WeingartenRegime { m, d });
        }
        let gram = gram_matrix(m, d)?;
        let n = gram.group.len();
        let mut rhs = Array1::<f64>::zeros(n);
        let id_idx = gram
            .group
            .iter()
            .position(|p| *p == Permutation::identity(m))
            .expect("identity enumerated");
        rhs[id_idx] = 1.0;
        let solution = gram
            .entries
            .solve(&rhs)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        // Wg is a class function; collapse to cycle types and check consistency.
        let mut values: BTreeMap<CycleType, f64> = BTreeMap::new();
        for (i, p) in gram.group.iter().enumerate() {
            let ct = p.cycle_type();
            let v = solution[i];
            if let Some(&prev) = values.get(&ct) {
                let scale = prev.abs().max(v.abs()).max(1e-300);
                if (prev - v).abs() / scale > 1e-8 {
                    return Err(Error::Linalg(format!(
                        "weingarten solution not constant on cycle type {ct:?}: {prev} vs {v}"
                    )));
                }
            } else {
                values.insert(ct, v);
            }
        }
        Ok(WeingartenTable { m, d, values })
    }

    /// Value on a cycle type.
    pub fn value(&self, ct: &CycleType) -> f64 {
        self.values[ct]
    }

    /// Value on a permutation.
    pub fn value_of(&self, p: &Permutation) -> f64 {
        self.value(&p.cycle_type())
    }

    /// Iterates over `(cycle type, value)` pairs in a deterministic order.
    pub fn iter(&self) -> impl Iterator<Item = (&CycleType, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }
}

/// Leading large-`d` magnitude of `Wg` on a cycle type:
/// `d^{cycles - 2m} * Π Catalan(len_i - 1)`.
pub fn catalan_factor(ct: &CycleType, d: usize) -> f64 {
    let m = ct.m() as i32;
    let mut prod = 1.0f64;
    for &len in ct.lengths() {
        prod *= catalan(len - 1) as f64;
    }
    prod * (d as f64).powi(ct.cycle_count() as i32 - 2 * m)
}

/// Sign of the leading term of `Wg`: `(-1)^{m - cycles}`.
pub fn moebius_sign(ct: &CycleType) -> f64 {
    if (ct.m() - ct.cycle_count()) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn catalan(n: usize) -> u128 {
    // binom(2n, n) / (n + 1), exact in u128 for the small n used here
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 0..n as u128 {
        num *= 2 * n as u128 - k;
        den *= k + 1;
    }
    num / den / (n as u128 + 1)
}

/// Exact and floating summaries of the Gram/Weingarten tables used by the
/// identity checks: `Σ_σ d^{cycles(σ)}` (exact), `Σ_σ Wg(σ)`, `Σ_σ |Wg(σ)|`.
#[derive(Debug, Clone)]
pub struct FactSums {
    pub m: usize,
    pub d: usize,
    pub sum_gram: u128,
    pub sum_wg_signed: f64,
    pub sum_wg_abs: f64,
}

/// Computes the three fact sums. `sum_gram` is exact integer arithmetic;
/// the Weingarten sums come from the tabulated inverse.
pub fn fact_sums(m: usize, d: usize) -> Result<FactSums> {
    let group = enumerate_group(m)?;
    let mut sum_gram: u128 = 0;
    for p in &group {
        sum_gram += pow_u128(d as u128, p.cycle_count())?;
    }
    let table = WeingartenTable::new(m, d)?;
    let mut sum_wg_signed = 0.0;
    let mut sum_wg_abs = 0.0;
    for p in &group {
        let v = table.value_of(p);
        sum_wg_signed += v;
        sum_wg_abs += v.abs();
    }
    Ok(FactSums {
        m,
        d,
        sum_gram,
        sum_wg_signed,
        sum_wg_abs,
    })
}

/// Exact value of `Σ_σ d^{cycles(σ)} = (d - 1 + m)! / (d - 1)!`.
pub fn sum_gram_expected(m: usize, d: usize) -> u128 {
    let mut acc: u128 = 1;
    for k in 0..m as u128 {
        acc *= d as u128 + k;
    }
    acc
}
