//! Replica registers, permutation operators, moment operators, and the Haar
//! twirl.
//!
//! An `m`-copy register over sites of dimensions `q_0..q_{n-1}` uses the
//! copy-major basis: the full index is `X = Σ_c x_c D^{m-1-c}` with `D = Π q_s`
//! and each per-copy index `x_c` site-major. A permutation `σ` acts by routing
//! copy contents, `σ̂ |x_0,..,x_{m-1}⟩ = |x_{σ^{-1}(0)},..⟩`, which keeps every
//! `σ̂` a 0/1 matrix with one entry per column.

use ndarray::Array2;
use ndarray_linalg::{EigValsh, EigValshInto, Scalar, UPLO};

use crate::symgroup::{enumerate_group, Permutation, WeingartenTable};
use crate::{Error, Result};

/// Cap on the total replica dimension `D^m`.
pub const REPLICA_DIM_CAP: u128 = 1 << 22;

/// Matrix element type for moment operators: real for exact pipelines,
/// complex for sampled ones.
pub trait Field: Scalar<Real = f64> + ndarray_linalg::Lapack {}
impl Field for f64 {}
impl Field for num_complex::Complex64 {}

/// Shape of an `m`-copy register: ordered site dimensions plus copy count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    site_dims: Vec<usize>,
    m: usize,
}

impl RegisterLayout {
    pub fn new(site_dims: Vec<usize>, m: usize) -> Result<Self> {
        if m == 0 || site_dims.is_empty() || site_dims.iter().any(|&d| d < 2) {
            return Err(Error::LayoutMismatch(format!(
                "need m >= 1 and all site dims >= 2, got m={m}, dims={site_dims:?}"
            )));
        }
        let mut total: u128 = 1;
        for &d in &site_dims {
            total = total.saturating_mul(d as u128);
        }
        let total = total.saturating_pow(m as u32);
        if total > REPLICA_DIM_CAP {
            return Err(Error::DimensionCap {
                dim: total,
                cap: REPLICA_DIM_CAP,
            });
        }
        Ok(RegisterLayout { site_dims, m })
    }

    pub fn site_dims(&self) -> &[usize] {
        &self.site_dims
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_sites(&self) -> usize {
        self.site_dims.len()
    }

    /// Per-copy dimension `D`.
    pub fn copy_dim(&self) -> usize {
        self.site_dims.iter().product()
    }

    /// Full register dimension `D^m`.
    pub fn total_dim(&self) -> usize {
        self.copy_dim().pow(self.m as u32)
    }

    /// Merges each contiguous group of sites into one site. `groups` lists the
    /// group sizes in order and must sum to the current site count. The basis
    /// index is unchanged, so operators carry over without data movement.
    pub fn regroup(&self, groups: &[usize]) -> Result<RegisterLayout> {
        if groups.iter().sum::<usize>() != self.n_sites() || groups.iter().any(|&g| g == 0) {
            return Err(Error::LayoutMismatch(format!(
                "groups {groups:?} do not partition {} sites",
                self.n_sites()
            )));
        }
        let mut dims = Vec::with_capacity(groups.len());
        let mut at = 0;
        for &g in groups {
            dims.push(self.site_dims[at..at + g].iter().product());
            at += g;
        }
        RegisterLayout::new(dims, self.m)
    }
}

/// Computes the copy-digit image map of `σ̂` on a register of per-copy
/// dimension `copy_dim`: entry `X` holds the row index of the single 1 in
/// column `X`.
fn permutation_index_map(perm: &Permutation, copy_dim: usize) -> Vec<usize> {
    let m = perm.m();
    let pinv = perm.inverse();
    let total = copy_dim.pow(m as u32);
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; m];
    for x in 0..total {
        let mut rem = x;
        for c in (0..m).rev() {
            digits[c] = rem % copy_dim;
            rem /= copy_dim;
        }
        let mut y = 0usize;
        for c in 0..m {
            y = y * copy_dim + digits[pinv.apply(c)];
        }
        map.push(y);
    }
    map
}

/// A permutation operator on an `m`-copy register, stored as the index map of
/// its single 1 per column.
#[derive(Debug, Clone)]
pub struct ReplicaOperator {
    layout: RegisterLayout,
    perm: Permutation,
    map: Vec<usize>,
}

impl ReplicaOperator {
    pub fn new(layout: &RegisterLayout, perm: &Permutation) -> Result<Self> {
        if perm.m() != layout.m() {
            return Err(Error::CopyMismatch(perm.m(), layout.m()));
        }
        let map = permutation_index_map(perm, layout.copy_dim());
        Ok(ReplicaOperator {
            layout: layout.clone(),
            perm: perm.clone(),
            map,
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// Row index of the 1 in column `col`.
    pub fn row_of(&self, col: usize) -> usize {
        self.map[col]
    }

    /// Trace, i.e. the number of fixed basis states: `D^{cycles(σ)}`.
    pub fn trace(&self) -> u128 {
        let d = self.layout.copy_dim() as u128;
        let mut acc: u128 = 1;
        for _ in 0..self.perm.cycle_count() {
            acc *= d;
        }
        acc
    }

    /// Dense matrix form.
    pub fn to_dense<S: Field>(&self) -> Array2<S> {
        let n = self.layout.total_dim();
        let mut out = Array2::<S>::zeros((n, n));
        for (col, &row) in self.map.iter().enumerate() {
            out[(row, col)] = S::one();
        }
        out
    }
}

/// A dense operator on an `m`-copy register, e.g. an ensemble moment
/// `E[|ψ⟩⟨ψ|^{⊗m}]` or a difference of two such moments.
#[derive(Debug, Clone)]
pub struct MomentOperator<S: Field> {
    layout: RegisterLayout,
    mat: Array2<S>,
}

impl<S: Field> MomentOperator<S> {
    pub fn zeros(layout: RegisterLayout) -> Self {
        let n = layout.total_dim();
        MomentOperator {
            layout,
            mat: Array2::zeros((n, n)),
        }
    }

    pub fn from_matrix(layout: RegisterLayout, mat: Array2<S>) -> Result<Self> {
        let n = layout.total_dim();
        if mat.shape() != [n, n] {
            return Err(Error::LayoutMismatch(format!(
                "matrix shape {:?} vs register dimension {n}",
                mat.shape()
            )));
        }
        Ok(MomentOperator { layout, mat })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Array2<S> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<S> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> Array2<S> {
        self.mat
    }

    /// Reinterprets the register with merged contiguous sites; no data moves.
    pub fn regroup(self, groups: &[usize]) -> Result<Self> {
        let layout = self.layout.regroup(groups)?;
        Ok(MomentOperator {
            layout,
            mat: self.mat,
        })
    }

    pub fn trace_re(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.layout.total_dim() {
            acc += self.mat[(i, i)].re();
        }
        acc
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.layout.total_dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let diff = (self.mat[(i, j)] - self.mat[(j, i)].conj()).abs();
                worst = worst.max(diff);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = self.mat.eigvalsh(UPLO::Lower)?;
        Ok(vals.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
    }

    /// `self -= other`, entrywise.
    pub fn sub_in_place(&mut self, other: &MomentOperator<S>) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout, other.layout
            )));
        }
        self.mat -= &other.mat;
        Ok(())
    }

    /// Reorders sites: `order[k]` names the old site placed at new position
    /// `k`. Returns a data-moved operator on the permuted layout.
    pub fn reorder_sites(&self, order: &[usize]) -> Result<Self> {
        let n_sites = self.layout.n_sites();
        let mut seen = vec![false; n_sites];
        if order.len() != n_sites {
            return Err(Error::LayoutMismatch(format!(
                "order {order:?} vs {n_sites} sites"
            )));
        }
        for &s in order {
            if s >= n_sites || seen[s] {
                return Err(Error::LayoutMismatch(format!("order {order:?} not a permutation")));
            }
            seen[s] = true;
        }
        let old_dims = self.layout.site_dims();
        let new_dims: Vec<usize> = order.iter().map(|&s| old_dims[s]).collect();
        let d = self.layout.copy_dim();
        let m = self.layout.m();

        // per-copy index remap old -> new
        let mut remap = vec![0usize; d];
        let mut old_digits = vec![0usize; n_sites];
        for x in 0..d {
            let mut rem = x;
            for s in (0..n_sites).rev() {
                old_digits[s] = rem % old_dims[s];
                rem /= old_dims[s];
            }
            let mut y = 0usize;
            for k in 0..n_sites {
                y = y * new_dims[k] + old_digits[order[k]];
            }
            remap[x] = y;
        }
        // full-index remap, copy by copy
        let total = self.layout.total_dim();
        let mut full = vec![0usize; total];
        let mut copies = vec![0usize; m];
        for x in 0..total {
            let mut rem = x;
            for c in (0..m).rev() {
                copies[c] = rem % d;
                rem /= d;
            }
            let mut y = 0usize;
            for c in 0..m {
                y = y * d + remap[copies[c]];
            }
            full[x] = y;
        }
        let layout = RegisterLayout::new(new_dims, m)?;
        let mut out = Array2::<S>::zeros((total, total));
        for i in 0..total {
            for j in 0..total {
                out[(full[i], full[j])] = self.mat[(i, j)];
            }
        }
        Ok(MomentOperator { layout, mat: out })
    }
}

/// Exact Haar moment `E_{|ψ⟩ Haar}[|ψ⟩⟨ψ|^{⊗m}]` over the whole register:
/// `f Σ_σ σ̂` with `f = Π_{k=0}^{m-1} 1/(D+k)`. Needs `m < D` only for the
/// downstream Weingarten comparisons; the formula itself holds for all `m`.
pub fn haar_state_moment<S: Field>(layout: &RegisterLayout) -> Result<MomentOperator<S>> {
    let d = layout.copy_dim();
    let m = layout.m();
    let group = enumerate_group(m)?;
    let mut f = 1.0f64;
    for k in 0..m {
        f /= (d + k) as f64;
    }
    let mut op = MomentOperator::<S>::zeros(layout.clone());
    let coeff = S::from_real(f);
    for perm in &group {
        let map = permutation_index_map(perm, d);
        for (col, &row) in map.iter().enumerate() {
            op.mat[(row, col)] += coeff;
        }
    }
    Ok(op)
}

/// `self -= haar_state_moment`, without materialising the dense Haar matrix.
pub fn subtract_haar_in_place<S: Field>(op: &mut MomentOperator<S>) -> Result<()> {
    let d = op.layout.copy_dim();
    let m = op.layout.m();
    let group = enumerate_group(m)?;
    let mut f = 1.0f64;
    for k in 0..m {
        f /= (d + k) as f64;
    }
    let coeff = S::from_real(f);
    for perm in &group {
        let map = permutation_index_map(perm, d);
        for (col, &row) in map.iter().enumerate() {
            op.mat[(row, col)] -= coeff;
        }
    }
    Ok(())
}

/// Index tables for splitting each per-copy index into a twirled-site part and
/// a rest part.
struct SiteSplit {
    /// number of copies
    m: usize,
    /// dimension of the twirled composite within one copy
    dt: usize,
    /// dimension of the rest within one copy
    dr: usize,
    /// `dt^m` and `dr^m`
    tn: usize,
    rn: usize,
    /// `off[(c * dt + t) * dr + r]` = contribution of copy `c` with twirl
    /// digit `t` and rest digit `r` to the full register index
    off: Vec<usize>,
    /// digit tables for composite tuple indices
    tdig: Vec<usize>,
    rdig: Vec<usize>,
}

impl SiteSplit {
    fn new(layout: &RegisterLayout, sites: &[usize]) -> Result<Self> {
        let n_sites = layout.n_sites();
        if sites.is_empty()
            || sites.windows(2).any(|w| w[0] >= w[1])
            || *sites.last().unwrap() >= n_sites
        {
            return Err(Error::InvalidRegion(format!(
                "twirl sites {sites:?} must be strictly increasing and within 0..{n_sites}"
            )));
        }
        let dims = layout.site_dims();
        let rest: Vec<usize> = (0..n_sites).filter(|s| !sites.contains(s)).collect();
        let dt: usize = sites.iter().map(|&s| dims[s]).product();
        let dr: usize = rest.iter().map(|&s| dims[s]).product();
        let d = layout.copy_dim();
        let m = layout.m();

        // per-copy map (t, r) -> x
        let mut xof = vec![0usize; dt * dr];
        let mut digits = vec![0usize; n_sites];
        for x in 0..d {
            let mut rem = x;
            for s in (0..n_sites).rev() {
                digits[s] = rem % dims[s];
                rem /= dims[s];
            }
            let mut t = 0usize;
            for &s in sites {
                t = t * dims[s] + digits[s];
            }
            let mut r = 0usize;
            for &s in &rest {
                r = r * dims[s] + digits[s];
            }
            xof[t * dr.max(1) + r] = x;
        }

        let tn = dt.pow(m as u32);
        let rn = dr.max(1).pow(m as u32);
        let dr_eff = dr.max(1);

        let mut off = vec![0usize; m * dt * dr_eff];
        for c in 0..m {
            let stride = d.pow((m - 1 - c) as u32);
            for t in 0..dt {
                for r in 0..dr_eff {
                    off[(c * dt + t) * dr_eff + r] = xof[t * dr_eff + r] * stride;
                }
            }
        }
        let mut tdig = vec![0usize; tn * m];
        for tt in 0..tn {
            let mut rem = tt;
            for c in (0..m).rev() {
                tdig[tt * m + c] = rem % dt;
                rem /= dt;
            }
        }
        let mut rdig = vec![0usize; rn * m];
        for rr in 0..rn {
            let mut rem = rr;
            for c in (0..m).rev() {
                rdig[rr * m + c] = rem % dr_eff;
                rem /= dr_eff;
            }
        }
        Ok(SiteSplit {
            m,
            dt,
            dr: dr_eff,
            tn,
            rn,
            off,
            tdig,
            rdig,
        })
    }

    #[inline]
    fn offset(&self, c: usize, t: usize, r: usize) -> usize {
        self.off[(c * self.dt + t) * self.dr + r]
    }
}

/// Haar-twirls `mat` over the composite of the given sites, in place:
/// averages over `U^{⊗m} · ⊗ U_t` applied to those sites with `U_t` Haar on
/// the composite. Requires `m < d_t` for the Weingarten inversion.
pub fn haar_twirl_in_place<S: Field>(
    mat: &mut Array2<S>,
    layout: &RegisterLayout,
    sites: &[usize],
) -> Result<()> {
    let split = SiteSplit::new(layout, sites)?;
    let m = layout.m();
    let wg = WeingartenTable::new(m, split.dt)?;
    let group = enumerate_group(m)?;
    let total = layout.total_dim();
    let flat = mat
        .as_slice_mut()
        .ok_or_else(|| Error::Linalg("moment matrix not contiguous".into()))?;

    // tuple-permutation maps on the twirled composite
    let maps: Vec<Vec<usize>> = group
        .iter()
        .map(|p| permutation_index_map(p, split.dt))
        .collect();

    // partial traces T_tau[r, r'] = Σ_a O[(tau a, r), (a, r')]
    let mut traces: Vec<Array2<S>> = Vec::with_capacity(group.len());
    for map in &maps {
        let mut t_tau = Array2::<S>::zeros((split.rn, split.rn));
        for a in 0..split.tn {
            let b = map[a];
            for rr in 0..split.rn {
                let mut row = 0usize;
                for c in 0..split.m {
                    row += split.offset(c, split.tdig[b * m + c], split.rdig[rr * m + c]);
                }
                let row_off = row * total;
                for rp in 0..split.rn {
                    let mut col = 0usize;
                    for c in 0..split.m {
                        col += split.offset(c, split.tdig[a * m + c], split.rdig[rp * m + c]);
                    }
                    t_tau[(rr, rp)] += flat[row_off + col];
                }
            }
        }
        traces.push(t_tau);
    }

    // output = Σ_σ σ̂ ⊗ A_σ with A_σ = Σ_τ Wg(σ τ^{-1}) T_τ
    for v in flat.iter_mut() {
        *v = S::zero();
    }
    for (si, sigma) in group.iter().enumerate() {
        let mut a_sigma = Array2::<S>::zeros((split.rn, split.rn));
        for (ti, tau) in group.iter().enumerate() {
            let rel = sigma.compose(&tau.inverse())?;
            let w = S::from_real(wg.value_of(&rel));
            a_sigma.scaled_add(w, &traces[ti]);
        }
        let map = &maps[si];
        for a in 0..split.tn {
            let b = map[a];
            for rr in 0..split.rn {
                let mut row = 0usize;
                for c in 0..split.m {
                    row += split.offset(c, split.tdig[b * m + c], split.rdig[rr * m + c]);
                }
                let row_off = row * total;
                for rp in 0..split.rn {
                    let mut col = 0usize;
                    for c in 0..split.m {
                        col += split.offset(c, split.tdig[a * m + c], split.rdig[rp * m + c]);
                    }
                    flat[row_off + col] += a_sigma[(rr, rp)];
                }
            }
        }
    }
    Ok(())
}

/// Haar twirl over a site subset, returning a fresh operator.
pub fn haar_twirl<S: Field>(
    op: &MomentOperator<S>,
    sites: &[usize],
) -> Result<MomentOperator<S>> {
    let mut out = op.clone();
    let layout = out.layout.clone();
    haar_twirl_in_place(&mut out.mat, &layout, sites)?;
    Ok(out)
}

/// Trace norm `Σ_i |λ_i|` of the Hermitian difference `a - b`.
pub fn trace_norm_distance<S: Field>(
    a: &MomentOperator<S>,
    b: &MomentOperator<S>,
) -> Result<f64> {
    if a.layout != b.layout {
        return Err(Error::LayoutMismatch(format!(
            "{:?} vs {:?}",
            a.layout, b.layout
        )));
    }
    let delta = &a.mat - &b.mat;
    trace_norm_hermitian(delta, &a.layout)
}

/// Trace norm of a Hermitian operator on the given register. For two copies
/// the operator usually commutes with the copy swap; the spectrum then splits
/// into the symmetric and antisymmetric sectors, which are solved separately.
pub fn trace_norm_hermitian<S: Field>(delta: Array2<S>, layout: &RegisterLayout) -> Result<f64> {
    let n = layout.total_dim();
    let herm_err = {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((delta[(i, j)] - delta[(j, i)].conj()).abs());
            }
        }
        worst
    };
    if herm_err > 1e-8 {
        return Err(Error::Linalg(format!(
            "trace norm input not Hermitian: max deviation {herm_err:.3e}"
        )));
    }
    if layout.m() == 2 {
        let d = layout.copy_dim();
        // swap-commutation certificate: ‖Δ - SΔS‖_F
        let mut comm2 = 0.0f64;
        let mut frob2 = 0.0f64;
        for i in 0..n {
            let (i0, i1) = (i / d, i % d);
            let si = i1 * d + i0;
            for j in 0..n {
                let (j0, j1) = (j / d, j % d);
                let sj = j1 * d + j0;
                let v = delta[(i, j)];
                let w = delta[(si, sj)];
                frob2 += v.square();
                comm2 += (v - w).square();
            }
        }
        if comm2.sqrt() <= 1e-10 * frob2.sqrt().max(1.0) {
            return trace_norm_swap_split(&delta, d, frob2);
        }
    }
    let vals = delta.eigvalsh_into(UPLO::Lower)?;
    Ok(vals.iter().map(|v| v.abs()).sum())
}

/// Eigen-solves the symmetric sector of a swap-commuting two-copy operator
/// and bounds or solves the antisymmetric sector.
fn trace_norm_swap_split<S: Field>(delta: &Array2<S>, d: usize, frob2: f64) -> Result<f64> {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    // symmetric basis: (i, i) then (i < j) pairs
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        pairs.push((i, i));
    }
    for i in 0..d {
        for j in i + 1..d {
            pairs.push((i, j));
        }
    }
    let ns = pairs.len();
    let mut sym = Array2::<S>::zeros((ns, ns));
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for (q, &(k, l)) in pairs.iter().enumerate() {
            sym[(p, q)] = if i == j && k == l {
                delta[(i * d + i, k * d + k)]
            } else if i == j {
                (delta[(i * d + i, k * d + l)] + delta[(i * d + i, l * d + k)])
                    .mul_real(inv_sqrt2)
            } else if k == l {
                (delta[(i * d + j, k * d + k)] + delta[(j * d + i, k * d + k)])
                    .mul_real(inv_sqrt2)
            } else {
                (delta[(i * d + j, k * d + l)]
                    + delta[(i * d + j, l * d + k)]
                    + delta[(j * d + i, k * d + l)]
                    + delta[(j * d + i, l * d + k)])
                    .mul_real(0.5)
            };
        }
    }
    let mut sym_frob2 = 0.0f64;
    for v in sym.iter() {
        sym_frob2 += v.square();
    }
    let vals = sym.eigvalsh_into(UPLO::Lower)?;
    let sym_norm: f64 = vals.iter().map(|v| v.abs()).sum();

    let anti_frob2 = (frob2 - sym_frob2).max(0.0);
    let na = d * (d - 1) / 2;
    if na == 0 {
        return Ok(sym_norm);
    }
    let anti_bound = (na as f64).sqrt() * anti_frob2.sqrt();
    if anti_bound <= 1e-12 {
        return Ok(sym_norm);
    }
    // genuine antisymmetric content: solve that sector too
    let mut apairs: Vec<(usize, usize)> = Vec::with_capacity(na);
    for i in 0..d {
        for j in i + 1..d {
            apairs.push((i, j));
        }
    }
    let mut anti = Array2::<S>::zeros((na, na));
    for (p, &(i, j)) in apairs.iter().enumerate() {
        for (q, &(k, l)) in apairs.iter().enumerate() {
            let v = delta[(i * d + j, k * d + l)] - delta[(i * d + j, l * d + k)]
                - delta[(j * d + i, k * d + l)]
                + delta[(j * d + i, l * d + k)];
            anti[(p, q)] = v.mul_real(0.5);
        }
    }
    let avals = anti.eigvalsh_into(UPLO::Lower)?;
    let anti_norm: f64 = avals.iter().map(|v| v.abs()).sum();
    Ok(sym_norm + anti_norm)
}
