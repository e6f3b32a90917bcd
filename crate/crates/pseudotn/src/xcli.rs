//! Experiment drivers behind the command-line interface: exact
//! sequential-twirl moment operators, sampled moment estimates, copy-distance
//! sweeps, entropy profiles with Page-curve references, min-cut entropy
//! sandwiches, Weingarten identity residuals, and CSV emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::ensembles::{splitmix_mix, EnsembleSpec, SeedTree};
use crate::replica::{
    haar_state_moment, haar_twirl_in_place, trace_norm_distance, MomentOperator, RegisterLayout,
};
use crate::spinmodel::{
    checked_terms, leg_tuple_coefficients, moment_from_partition, rt_lower_bound, SpinModelGraph,
    PARTITION_TERM_CAP,
};
use crate::statesim::{
    build_state, entropy_profile, page_reference, CutFamily, EntropyKind, EntropyProfile,
    RunningMean,
};
use crate::symgroup::{
    catalan_factor, fact_sums, moebius_sign, sum_gram_expected, WeingartenTable, GROUP_ENUM_CAP,
};
use crate::tngraph::{
    build_bell_bridge, build_staircase, build_two_gate_tree, min_cut, TensorNetworkGraph,
    VertexKind,
};
use crate::{Error, Result};

/// Salt separating the Page-reference sample stream from the circuit stream.
const PAGE_SEED_SALT: u64 = 0x7061_6765_5f72_6566;

/// One row of a copy-distance study.
#[derive(Debug, Clone)]
pub struct DistanceRecord {
    pub chi: u64,
    pub nu: usize,
    pub l: usize,
    pub n_qubits: usize,
    pub m: usize,
    pub distance: f64,
    pub method: &'static str,
    pub samples: u64,
    pub stderr: Option<f64>,
}

/// Sampled moment estimate with a half-sample fluctuation scale.
#[derive(Debug)]
pub struct SampledMoment {
    pub op: MomentOperator<Complex64>,
    pub stderr: f64,
    pub samples: u64,
}

/// One row of the area-law profile: circuit entropies next to the Haar
/// (Page) reference at the same cut.
#[derive(Debug, Clone)]
pub struct AreaLawRow {
    pub cut: usize,
    pub mean_bits: f64,
    pub stderr_bits: f64,
    pub page_mean_bits: f64,
    pub page_stderr_bits: f64,
}

#[derive(Debug, Clone)]
pub struct AreaLawReport {
    pub l: usize,
    pub nu: usize,
    pub samples: usize,
    pub rows: Vec<AreaLawRow>,
}

/// Min-cut / partition-bound / sampled-entropy sandwich for one region.
#[derive(Debug, Clone)]
pub struct RTReport {
    pub region: Vec<usize>,
    pub mincut_bits: u64,
    pub cut_cardinality: usize,
    pub rt_lower_bound_bits: f64,
    pub mean_entropy_bits: f64,
    pub stderr_bits: f64,
    pub samples: u64,
    pub chi_max: u64,
    /// 4 / ln χ, the Newton-constant analogue in natural-log units.
    pub newton_ln: f64,
    /// 4 / log₂ χ, the same constant in bit units.
    pub newton_log2: f64,
    pub sandwich_ok: bool,
}

/// One row of the Weingarten identity table.
#[derive(Debug, Clone)]
pub struct WeingartenRow {
    pub m: usize,
    pub d: usize,
    pub accepted: bool,
    pub reason: String,
    pub s1_residual: f64,
    pub s2_residual: f64,
    pub s3_max_ratio_err: f64,
    pub s3_sign_ok: bool,
    pub s4_residual: f64,
}

/// One row of the twirl-vs-partition cross-check.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub name: &'static str,
    pub m: usize,
    pub total_dim: usize,
    pub max_abs_diff: f64,
    pub trace_twirl: f64,
    pub trace_partition: f64,
    pub pass: bool,
}

/// Named graph plus copy count for the oracle cross-check suite.
pub struct CrossCheckCase {
    pub name: &'static str,
    pub graph: TensorNetworkGraph,
    pub m: usize,
}

/// The fixed suite both exact moment pipelines must agree on.
pub fn cross_check_suite() -> Result<Vec<CrossCheckCase>> {
    Ok(vec![
        CrossCheckCase { name: "staircase-1-1", graph: build_staircase(1, 1)?, m: 2 },
        CrossCheckCase { name: "staircase-2-1", graph: build_staircase(2, 1)?, m: 2 },
        CrossCheckCase { name: "staircase-3-1", graph: build_staircase(3, 1)?, m: 2 },
        CrossCheckCase { name: "staircase-3-2", graph: build_staircase(3, 2)?, m: 2 },
        CrossCheckCase { name: "staircase-2-1-m3", graph: build_staircase(2, 1)?, m: 3 },
        CrossCheckCase { name: "two-gate-tree", graph: build_two_gate_tree(), m: 2 },
        CrossCheckCase { name: "bell-bridge", graph: build_bell_bridge(), m: 2 },
    ])
}

fn kron_power_f64(v: &Array1<f64>, m: usize) -> Array1<f64> {
    let d = v.len();
    let mut out = Array1::from_elem(1, 1.0f64);
    for _ in 0..m {
        let mut next = Array1::zeros(out.len() * d);
        for (i, &a) in out.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                next[i * d + j] = a * b;
            }
        }
        out = next;
    }
    out
}

fn kron_power_c64(v: &Array1<Complex64>, m: usize) -> Array1<Complex64> {
    let d = v.len();
    let mut out = Array1::from_elem(1, Complex64::new(1.0, 0.0));
    for _ in 0..m {
        let mut next = Array1::zeros(out.len() * d);
        for (i, &a) in out.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                next[i * d + j] = a * b;
            }
        }
        out = next;
    }
    out
}

/// Exact `ρ^(m)` of the Haar-gate ensemble on `g`: the replicated input
/// projector pushed through a Haar twirl per gate in topological order. The
/// twirl output is invariant under any unitary change of basis on the gate
/// register, so re-factorizing the register into the gate's output legs is a
/// pure relabeling.
pub fn ensemble_moment_exact(g: &TensorNetworkGraph, m: usize) -> Result<MomentOperator<f64>> {
    g.validate().into_result()?;
    let edges = g.edges();

    // seed the register with the product and Bell inputs, recording which
    // tensor-network edge each site carries
    let mut site_edges: Vec<usize> = Vec::new();
    let mut psi = Array1::from_elem(1, 1.0f64);
    let extend = |psi: &mut Array1<f64>, part: &[f64]| {
        let mut next = Array1::zeros(psi.len() * part.len());
        for (i, &a) in psi.iter().enumerate() {
            for (j, &b) in part.iter().enumerate() {
                next[i * part.len() + j] = a * b;
            }
        }
        *psi = next;
    };
    for v in g.ids_of_kind(VertexKind::Product) {
        let e = g.out_edges(v)[0];
        let chi = edges[e].chi as usize;
        let mut part = vec![0.0; chi];
        part[0] = 1.0;
        extend(&mut psi, &part);
        site_edges.push(e);
    }
    for v in g.ids_of_kind(VertexKind::Bell) {
        let es = g.out_edges(v);
        let chi = edges[es[0]].chi as usize;
        let mut part = vec![0.0; chi * chi];
        let w = 1.0 / (chi as f64).sqrt();
        for i in 0..chi {
            part[i * chi + i] = w;
        }
        extend(&mut psi, &part);
        site_edges.push(es[0]);
        site_edges.push(es[1]);
    }
    let site_dims: Vec<usize> = site_edges.iter().map(|&e| edges[e].chi as usize).collect();
    let layout = RegisterLayout::new(site_dims, m)?;
    let psi_m = kron_power_f64(&psi, m);
    let dm = layout.total_dim();
    let mut mat = Array2::<f64>::zeros((dm, dm));
    for i in 0..dm {
        for j in 0..dm {
            mat[(i, j)] = psi_m[i] * psi_m[j];
        }
    }
    let mut op = MomentOperator::from_matrix(layout, mat)?;

    for gate in g.topological_order()? {
        let ins = g.in_edges(gate);
        let pos: Vec<usize> = ins
            .iter()
            .map(|&e| {
                site_edges.iter().position(|&x| x == e).ok_or_else(|| {
                    Error::InvalidGraph(format!("gate {gate} input edge {e} not live"))
                })
            })
            .collect::<Result<_>>()?;
        let n = site_edges.len();
        let k = pos.len();
        let in_place = pos.iter().enumerate().all(|(i, &p)| p == n - k + i);
        if !in_place {
            let mut order: Vec<usize> = (0..n).filter(|i| !pos.contains(i)).collect();
            order.extend(&pos);
            op = op.reorder_sites(&order)?;
            site_edges = order.iter().map(|&i| site_edges[i]).collect();
        }
        let rest = n - k;
        let mut groups = vec![1usize; rest];
        groups.push(k);
        op = op.regroup(&groups)?;
        let lay = op.layout().clone();
        haar_twirl_in_place(op.matrix_mut(), &lay, &[rest])?;
        // relabel the twirled register as the gate's output legs
        let mut new_dims: Vec<usize> = lay.site_dims()[..rest].to_vec();
        let mut new_edges: Vec<usize> = site_edges[..rest].to_vec();
        for &e in &g.out_edges(gate) {
            new_dims.push(edges[e].chi as usize);
            new_edges.push(e);
        }
        let new_layout = RegisterLayout::new(new_dims, m)?;
        op = MomentOperator::from_matrix(new_layout, op.into_matrix())?;
        site_edges = new_edges;
    }

    // order the final register by ascending output vertex id
    let mut order: Vec<usize> = (0..site_edges.len()).collect();
    order.sort_by_key(|&i| edges[site_edges[i]].dst);
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        op = op.reorder_sites(&order)?;
    }
    Ok(op)
}

/// Monte Carlo `ρ^(m)`: the mean of `|ψ⟩⟨ψ|^{⊗m}` over sampled circuit
/// states. The stderr scalar is the operator-Frobenius distance between the
/// two half-sample means; trace-norm deviations of the full mean from the
/// true moment sit well inside five times this scale for the register sizes
/// the sampled pipeline handles. With one sample it is infinite.
pub fn ensemble_moment_sampled(
    g: &TensorNetworkGraph,
    spec: EnsembleSpec,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<SampledMoment> {
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    g.validate().into_result()?;
    let ids = g.output_ids();
    let edges = g.edges();
    let mut dims = Vec::with_capacity(ids.len());
    for &id in &ids {
        let e = edges
            .iter()
            .find(|e| e.dst == id)
            .ok_or_else(|| Error::InvalidGraph(format!("output {id} has no edge")))?;
        dims.push(e.chi as usize);
    }
    let layout = RegisterLayout::new(dims, m)?;
    let dm = layout.total_dim();
    let tree = SeedTree::new(seed);

    let half = samples / 2;
    let mut acc1 = Array2::<Complex64>::zeros((dm, dm));
    let mut acc2 = Array2::<Complex64>::zeros((dm, dm));
    let batch = 64usize.min(samples as usize).max(1);
    let mut block = Array2::<Complex64>::zeros((dm, batch));
    let mut filled = 0usize;
    let mut block_in_first_half = true;
    let one = Complex64::new(1.0, 0.0);
    let flush = |acc: &mut Array2<Complex64>, block: &Array2<Complex64>, filled: usize| {
        if filled == 0 {
            return;
        }
        let b = block.slice(ndarray::s![.., ..filled]);
        let bc = b.mapv(|z| z.conj());
        general_mat_mul(one, &b, &bc.t(), one, acc);
    };
    for s in 0..samples {
        let in_first = s < half;
        if filled == batch || (filled > 0 && in_first != block_in_first_half) {
            let acc = if block_in_first_half { &mut acc1 } else { &mut acc2 };
            flush(acc, &block, filled);
            filled = 0;
        }
        block_in_first_half = in_first;
        let state = build_state(g, spec, &tree, s)?;
        let psi_m = kron_power_c64(state.amplitudes(), m);
        block.column_mut(filled).assign(&psi_m);
        filled += 1;
    }
    let acc = if block_in_first_half { &mut acc1 } else { &mut acc2 };
    flush(acc, &block, filled);

    let stderr = if samples < 2 {
        f64::INFINITY
    } else {
        let h1 = half as f64;
        let h2 = (samples - half) as f64;
        let mut frob2 = 0.0f64;
        for (a, b) in acc1.iter().zip(acc2.iter()) {
            frob2 += (a / h1 - b / h2).norm_sqr();
        }
        frob2.sqrt()
    };
    let mut mean = acc1;
    mean += &acc2;
    mean.mapv_inplace(|z| z / samples as f64);
    Ok(SampledMoment {
        op: MomentOperator::from_matrix(layout, mean)?,
        stderr,
        samples,
    })
}

fn complexify(op: &MomentOperator<f64>) -> Result<MomentOperator<Complex64>> {
    MomentOperator::from_matrix(
        op.layout().clone(),
        op.matrix().mapv(|x| Complex64::new(x, 0.0)),
    )
}

/// Exact trace-norm distance to global Haar for a two-copy gate-only graph,
/// using the per-leg swap eigenbasis: both operators are polynomials in the
/// commuting per-leg copy swaps, so the spectrum splits into 2^legs sectors
/// with symmetric/antisymmetric multiplicities.
fn swap_sector_distance(g: &TensorNetworkGraph) -> Result<f64> {
    if !g.ids_of_kind(VertexKind::Bell).is_empty() {
        return Err(Error::InvalidGraph(
            "swap-sector distance needs a Bell-free graph".into(),
        ));
    }
    let model = SpinModelGraph::from_tn_graph(g, 2)?;
    let lc = leg_tuple_coefficients(&model)?;
    let k = lc.group_size;
    let n = lc.leg_dims.len();
    // the sector scan below touches 2^legs · k^legs weights
    checked_terms(2 * k, n, PARTITION_TERM_CAP)?;
    let d_total: f64 = lc.leg_dims.iter().map(|&d| d as f64).product();
    let f = 1.0 / (d_total * (d_total + 1.0));
    let mut coeffs = lc.coeffs.clone();
    // global Haar = f · (identity + full swap)
    coeffs[0] -= f;
    let last = coeffs.len() - 1;
    coeffs[last] -= f;

    // per-tuple swap masks: which legs carry the transposition
    let masks: Vec<u64> = (0..coeffs.len())
        .map(|t| {
            let mut mask = 0u64;
            let mut rem = t;
            for l in (0..n).rev() {
                if rem % k == 1 {
                    mask |= 1 << l;
                }
                rem /= k;
            }
            mask
        })
        .collect();
    let mut total = 0.0f64;
    for eps in 0u64..(1u64 << n) {
        let mut lam = 0.0f64;
        for (t, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let sign = if (masks[t] & eps).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            lam += c * sign;
        }
        let mut mult = 1.0f64;
        for (l, &dl) in lc.leg_dims.iter().enumerate() {
            let d = dl as f64;
            mult *= if (eps >> l) & 1 == 1 {
                d * (d - 1.0) / 2.0
            } else {
                d * (d + 1.0) / 2.0
            };
        }
        total += mult * lam.abs();
    }
    Ok(total)
}

/// Exact `Δ_m` between the staircase ensemble and global Haar for each `ν`.
/// Two copies use the swap-sector spectrum; higher copy counts diagonalize
/// the dense difference.
pub fn lemma2_sweep(l: usize, nus: &[usize], m: usize) -> Result<Vec<DistanceRecord>> {
    if nus.is_empty() {
        return Err(Error::Config("sweep list must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(nus.len());
    for &nu in nus {
        let g = build_staircase(l, nu)?;
        let distance = if m == 2 {
            swap_sector_distance(&g)?
        } else {
            let exact = ensemble_moment_exact(&g, m)?;
            let haar = haar_state_moment::<f64>(exact.layout())?;
            trace_norm_distance(&exact, &haar)?
        };
        out.push(DistanceRecord {
            chi: 1u64 << nu,
            nu,
            l,
            n_qubits: l + nu,
            m,
            distance,
            method: "exact",
            samples: 0,
            stderr: None,
        });
    }
    Ok(out)
}

/// Sampled PFC-gate moment against the exact Haar-gate moment on one
/// staircase. At `m = 2` the distance must sit inside five stderr of zero
/// (the PFC ensemble is an exact 2-design); violations are reported as
/// assertion failures.
pub fn lemma1_check(
    l: usize,
    nu: usize,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<DistanceRecord> {
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let g = build_staircase(l, nu)?;
    let exact = complexify(&ensemble_moment_exact(&g, m)?)?;
    let sampled = ensemble_moment_sampled(&g, EnsembleSpec::Pfc { keyed: false }, m, samples, seed)?;
    let distance = trace_norm_distance(&sampled.op, &exact)?;
    if m == 2 && distance >= 5.0 * sampled.stderr {
        return Err(Error::Simulation(format!(
            "two-copy distance {distance:.6e} exceeds 5 x stderr {:.6e}",
            sampled.stderr
        )));
    }
    Ok(DistanceRecord {
        chi: 1u64 << nu,
        nu,
        l,
        n_qubits: l + nu,
        m,
        distance,
        method: "sampled",
        samples,
        stderr: Some(sampled.stderr),
    })
}

/// Prefix-cut entropy profile of a staircase next to the Page reference at
/// the same cuts. The Page stream derives its seed from the circuit seed
/// through a fixed salt, keeping the two streams independent but both
/// reproducible.
pub fn area_law_profile(
    l: usize,
    nu: usize,
    spec: EnsembleSpec,
    samples: usize,
    seed: u64,
) -> Result<AreaLawReport> {
    let g = build_staircase(l, nu)?;
    let prof = entropy_profile(
        &g,
        spec,
        seed,
        CutFamily::PrefixCuts,
        samples,
        EntropyKind::VonNeumann,
    )?;
    let cuts: Vec<usize> = prof.points.iter().map(|p| p.cut).collect();
    let page = page_reference(l + nu, &cuts, samples, splitmix_mix(seed ^ PAGE_SEED_SALT))?;
    let rows = prof
        .points
        .iter()
        .zip(page.points.iter())
        .map(|(a, b)| AreaLawRow {
            cut: a.cut,
            mean_bits: a.mean,
            stderr_bits: a.stderr,
            page_mean_bits: b.mean,
            page_stderr_bits: b.stderr,
        })
        .collect();
    Ok(AreaLawReport { l, nu, samples, rows })
}

/// Drops every vertex with no path to the region's outputs. Unitaries on the
/// traced-out side cancel inside the partial trace, so the reduced state of
/// the region is unchanged; dangling edges into dropped gates become fresh
/// environment outputs. Vertex ids survive, so seed-keyed gates sample the
/// same unitaries as on the full graph.
pub fn causal_prune(
    g: &TensorNetworkGraph,
    region: &BTreeSet<usize>,
) -> Result<TensorNetworkGraph> {
    let edges = g.edges();
    let mut keep: BTreeSet<usize> = region.clone();
    loop {
        let mut changed = false;
        for e in edges {
            if keep.contains(&e.dst) && !keep.contains(&e.src) {
                keep.insert(e.src);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = TensorNetworkGraph::new();
    let mut added: BTreeSet<usize> = BTreeSet::new();
    for &v in &keep {
        let kind = g
            .kind(v)
            .ok_or_else(|| Error::InvalidRegion(format!("unknown vertex {v}")))?;
        out.add_vertex(v, kind)?;
        added.insert(v);
    }
    let mut fresh = [
        VertexKind::Product,
        VertexKind::Bell,
        VertexKind::Unitary,
        VertexKind::Output,
    ]
    .iter()
    .flat_map(|&k| g.ids_of_kind(k))
    .max()
    .unwrap_or(0)
        + 1;
    for e in edges {
        if !keep.contains(&e.src) {
            continue;
        }
        if keep.contains(&e.dst) {
            out.add_edge(e.src, e.dst, e.chi)?;
        } else {
            match g.kind(e.dst).expect("edge target exists") {
                VertexKind::Output => {
                    if !added.contains(&e.dst) {
                        out.add_vertex(e.dst, VertexKind::Output)?;
                        added.insert(e.dst);
                    }
                    out.add_edge(e.src, e.dst, e.chi)?;
                }
                _ => {
                    out.add_vertex(fresh, VertexKind::Output)?;
                    out.add_edge(e.src, fresh, e.chi)?;
                    fresh += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Min-cut bits, exact `-log₂ E[purity]` lower bound, and the sampled mean
/// entanglement entropy of `region`, with the two-sided sandwich
/// `rt_lower − 3σ ≤ mean S(A) ≤ mincut + 1e−9` recorded in `sandwich_ok`.
pub fn rt_verify(
    g: &TensorNetworkGraph,
    region: &BTreeSet<usize>,
    spec: EnsembleSpec,
    samples: u64,
    seed: u64,
) -> Result<RTReport> {
    if samples < 2 {
        return Err(Error::Config("rt verification needs samples >= 2".into()));
    }
    if region.is_empty() {
        return Err(Error::Config("region must be nonempty".into()));
    }
    let region_vec: Vec<usize> = region.iter().copied().collect();
    let cut = min_cut(g, &region_vec)?;
    let rt_lower = rt_lower_bound(g, region)?;
    let pruned = causal_prune(g, region)?;
    let tree = SeedTree::new(seed);
    let mut acc = RunningMean::new();
    for s in 0..samples {
        let state = build_state(&pruned, spec, &tree, s)?;
        acc.push(state.entropy(region, EntropyKind::VonNeumann)?);
    }
    let mean = acc.mean();
    let se = acc.stderr();
    let chi_max = g.edges().iter().map(|e| e.chi).max().unwrap_or(2);
    let sandwich_ok =
        rt_lower - 3.0 * se <= mean + 1e-9 && mean <= cut.weight_bits as f64 + 1e-9;
    Ok(RTReport {
        region: region_vec,
        mincut_bits: cut.weight_bits,
        cut_cardinality: cut.cardinality,
        rt_lower_bound_bits: rt_lower,
        mean_entropy_bits: mean,
        stderr_bits: se,
        samples,
        chi_max,
        newton_ln: 4.0 / (chi_max as f64).ln(),
        newton_log2: 4.0 / (chi_max as f64).log2(),
        sandwich_ok,
    })
}

/// Monte Carlo mean purity of `region` over sampled circuit states.
pub fn sampled_purity_mean(
    g: &TensorNetworkGraph,
    spec: EnsembleSpec,
    region: &BTreeSet<usize>,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let tree = SeedTree::new(seed);
    let mut acc = RunningMean::new();
    for s in 0..samples {
        let state = build_state(g, spec, &tree, s)?;
        acc.push(state.purity(region)?);
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Residuals of the four Weingarten facts on a grid of `(m, d)` pairs.
/// Invalid pairs become rejected rows and the run continues.
pub fn weingarten_check(ms: &[usize], ds: &[usize]) -> Result<Vec<WeingartenRow>> {
    if ms.is_empty() || ds.is_empty() {
        return Err(Error::Config("weingarten grid must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(ms.len() * ds.len());
    for &m in ms {
        for &d in ds {
            let mut row = WeingartenRow {
                m,
                d,
                accepted: false,
                reason: String::new(),
                s1_residual: f64::NAN,
                s2_residual: f64::NAN,
                s3_max_ratio_err: f64::NAN,
                s3_sign_ok: false,
                s4_residual: f64::NAN,
            };
            if m >= d {
                row.reason = "m < d violated".into();
                rows.push(row);
                continue;
            }
            if m > GROUP_ENUM_CAP {
                row.reason = format!("m exceeds enumeration cap {GROUP_ENUM_CAP}");
                rows.push(row);
                continue;
            }
            let fs = match fact_sums(m, d) {
                Ok(fs) => fs,
                Err(e) => {
                    row.reason = e.to_string();
                    rows.push(row);
                    continue;
                }
            };
            let expected = sum_gram_expected(m, d);
            row.s1_residual = fs.sum_gram.abs_diff(expected) as f64;
            let mut s2_expected = 1.0f64;
            for k in 0..m {
                s2_expected /= (d + k) as f64;
            }
            row.s2_residual = (fs.sum_wg_signed - s2_expected).abs();
            let table = WeingartenTable::new(m, d)?;
            let mut max_err = 0.0f64;
            let mut signs_ok = true;
            for (ct, wg) in table.iter() {
                let leading = moebius_sign(ct) * catalan_factor(ct, d);
                max_err = max_err.max((wg / leading - 1.0).abs());
                if wg.signum() != moebius_sign(ct) {
                    signs_ok = false;
                }
            }
            row.s3_max_ratio_err = max_err;
            row.s3_sign_ok = signs_ok;
            row.s4_residual = fs.sum_wg_abs * (d as f64).powi(m as i32) - 1.0;
            row.accepted = true;
            row.reason = "ok".into();
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs both exact moment pipelines over the cross-check suite and reports
/// the worst entrywise disagreement per case.
pub fn partition_oracle_rows() -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    for case in cross_check_suite()? {
        let twirl = ensemble_moment_exact(&case.graph, case.m)?;
        let model = SpinModelGraph::from_tn_graph(&case.graph, case.m)?;
        let part = moment_from_partition(&model)?;
        if twirl.layout() != part.layout() {
            return Err(Error::LayoutMismatch(format!(
                "pipelines disagree on layout for {}",
                case.name
            )));
        }
        let max_abs_diff = twirl
            .matrix()
            .iter()
            .zip(part.matrix().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(OracleRow {
            name: case.name,
            m: case.m,
            total_dim: twirl.layout().total_dim(),
            max_abs_diff,
            trace_twirl: twirl.trace_re(),
            trace_partition: part.trace_re(),
            pass: max_abs_diff < 1e-8,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Floating-point CSV field: 17 significant digits, scientific notation.
pub fn csv_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_f).unwrap_or_default()
}

pub fn distance_csv(records: &[DistanceRecord]) -> String {
    let mut s = String::from("chi,nu,l,n_qubits,m,distance,method,samples,stderr\n");
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.chi,
            r.nu,
            r.l,
            r.n_qubits,
            r.m,
            csv_f(r.distance),
            r.method,
            r.samples,
            csv_opt(r.stderr)
        )
        .expect("string write");
    }
    s
}

pub fn area_law_csv(rep: &AreaLawReport) -> String {
    let mut s = String::from("l,nu,samples,cut,mean_bits,stderr_bits,page_mean_bits,page_stderr_bits\n");
    for r in &rep.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            rep.l,
            rep.nu,
            rep.samples,
            r.cut,
            csv_f(r.mean_bits),
            csv_f(r.stderr_bits),
            csv_f(r.page_mean_bits),
            csv_f(r.page_stderr_bits)
        )
        .expect("string write");
    }
    s
}

pub fn rt_report_csv(r: &RTReport) -> String {
    let region = r
        .region
        .iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let mut s = String::from(
        "region,mincut_bits,cut_cardinality,rt_lower_bound_bits,mean_entropy_bits,stderr_bits,samples,chi,newton_4_over_ln_chi,newton_4_over_log2_chi,sandwich_ok\n",
    );
    writeln!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{}",
        region,
        r.mincut_bits,
        r.cut_cardinality,
        csv_f(r.rt_lower_bound_bits),
        csv_f(r.mean_entropy_bits),
        csv_f(r.stderr_bits),
        r.samples,
        r.chi_max,
        csv_f(r.newton_ln),
        csv_f(r.newton_log2),
        r.sandwich_ok
    )
    .expect("string write");
    s
}

pub fn weingarten_csv(rows: &[WeingartenRow]) -> String {
    let mut s = String::from(
        "m,d,accepted,reason,s1_residual,s2_residual,s3_max_ratio_err,s3_sign_ok,s4_residual\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.m,
            r.d,
            r.accepted,
            r.reason,
            csv_f(r.s1_residual),
            csv_f(r.s2_residual),
            csv_f(r.s3_max_ratio_err),
            r.s3_sign_ok,
            csv_f(r.s4_residual)
        )
        .expect("string write");
    }
    s
}

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut s = String::from("name,m,total_dim,max_abs_diff,trace_twirl,trace_partition,pass\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.name,
            r.m,
            r.total_dim,
            csv_f(r.max_abs_diff),
            csv_f(r.trace_twirl),
            csv_f(r.trace_partition),
            r.pass
        )
        .expect("string write");
    }
    s
}

/// Entropy profile rows as CSV (used by graph-validate's optional profile).
pub fn profile_csv(prof: &EntropyProfile) -> String {
    let mut s = String::from("cut,mean_bits,stderr_bits\n");
    for p in &prof.points {
        writeln!(s, "{},{},{}", p.cut, csv_f(p.mean), csv_f(p.stderr)).expect("string write");
    }
    s
}
