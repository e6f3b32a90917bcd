//! Exact partition-function evaluation of the symmetric-group spin models
//! induced by gate-averaged tensor networks.
//!
//! Each gate becomes a pair of S_m spins (an out-spin and an in-spin) joined
//! by a dashed edge weighted by the Weingarten function at the gate
//! dimension; tensor-network bonds between gates become solid edges with
//! weight χ^{cycles}; product inputs vanish; each Bell input merges into one
//! solid edge plus a global χ^{-m} prefactor; output legs are free boundary.
//! Summing the resulting signed weights reconstructs the exact gate-averaged
//! moment operator, and pinning the boundary spins to swap/identity yields
//! the exact mean purity.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;

use crate::replica::{MomentOperator, RegisterLayout};
use crate::symgroup::{enumerate_group, Permutation, WeingartenTable};
use crate::tngraph::{TensorNetworkGraph, VertexKind};
use crate::{Error, Result};

/// Cap on the number of weighted terms a partition enumeration may sum.
pub const PARTITION_TERM_CAP: u128 = 100_000_000;
/// Cap on the spin count for the S_2 purity enumeration.
pub const PURITY_SPIN_CAP: usize = 30;

/// Which half of a gate a spin site represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteRole {
    GateOutput,
    GateInput,
}

/// One S_m spin site. Gate `k` (in ascending vertex-id order) owns sites
/// `2k` (output side) and `2k + 1` (input side).
#[derive(Debug, Clone)]
pub struct Site {
    pub gate: usize,
    pub role: SiteRole,
}

/// Endpoint of a solid edge: a bulk spin site, or a boundary leg (only
/// produced by Bell pairs wired straight into outputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Site(usize),
    Leg(usize),
}

/// Weingarten-weighted edge between the two sites of one gate.
#[derive(Debug, Clone)]
pub struct DashedEdge {
    pub out_site: usize,
    pub in_site: usize,
    pub dim: usize,
}

/// χ^{cycles}-weighted edge from a tensor-network bond or a merged Bell pair.
#[derive(Debug, Clone)]
pub struct SolidEdge {
    pub a: End,
    pub b: End,
    pub chi: u64,
}

/// Where a boundary leg's amplitude comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegSource {
    /// Output of a gate: the adjacent out-site's spin acts on this leg.
    Gate(usize),
    /// Bell pair wired straight to an output; enters via a solid edge.
    BellDirect,
    /// Product input wired straight to an output; always pure.
    ProductDirect,
}

/// One surviving output-adjacent leg, with its local dimension preserved.
#[derive(Debug, Clone)]
pub struct BoundaryLeg {
    pub output: usize,
    pub chi: u64,
    pub source: LegSource,
}

/// Assignment of one S_m element per spin site.
#[derive(Debug, Clone)]
pub struct SpinConfiguration {
    spins: Vec<Permutation>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<Permutation>) -> Result<Self> {
        if let Some(first) = spins.first() {
            let m = first.m();
            if spins.iter().any(|p| p.m() != m) {
                return Err(Error::CopyMismatch(
                    m,
                    spins.iter().map(|p| p.m()).find(|&x| x != m).unwrap(),
                ));
            }
        }
        Ok(SpinConfiguration { spins })
    }

    /// All-identity configuration.
    pub fn uniform(m: usize, n_sites: usize) -> Self {
        SpinConfiguration {
            spins: (0..n_sites).map(|_| Permutation::identity(m)).collect(),
        }
    }

    pub fn spins(&self) -> &[Permutation] {
        &self.spins
    }
}

/// The spin model induced by a tensor-network graph at copy count `m`.
#[derive(Debug)]
pub struct SpinModelGraph {
    m: usize,
    sites: Vec<Site>,
    dashed: Vec<DashedEdge>,
    solid: Vec<SolidEdge>,
    legs: Vec<BoundaryLeg>,
    bell_chis: Vec<u64>,
    wg: BTreeMap<usize, WeingartenTable>,
}

impl SpinModelGraph {
    /// Applies the four transformation rules to a validated graph.
    pub fn from_tn_graph(g: &TensorNetworkGraph, m: usize) -> Result<Self> {
        g.validate().into_result()?;
        if m < 1 {
            return Err(Error::InvalidPermutation("copy count must be >= 1".into()));
        }
        let edges = g.edges();
        let gates = g.ids_of_kind(VertexKind::Unitary);
        let mut site_of_gate: BTreeMap<usize, usize> = BTreeMap::new();
        let mut sites = Vec::with_capacity(2 * gates.len());
        let mut dashed = Vec::with_capacity(gates.len());
        let mut wg: BTreeMap<usize, WeingartenTable> = BTreeMap::new();
        for (k, &gid) in gates.iter().enumerate() {
            site_of_gate.insert(gid, 2 * k);
            sites.push(Site { gate: gid, role: SiteRole::GateOutput });
            sites.push(Site { gate: gid, role: SiteRole::GateInput });
            let dim: usize = g
                .in_edges(gid)
                .iter()
                .map(|&e| edges[e].chi as usize)
                .product();
            if m >= dim {
                return Err(Error::WeingartenRegime { m, d: dim });
            }
            if let std::collections::btree_map::Entry::Vacant(v) = wg.entry(dim) {
                v.insert(WeingartenTable::new(m, dim)?);
            }
            dashed.push(DashedEdge {
                out_site: 2 * k,
                in_site: 2 * k + 1,
                dim,
            });
        }
        let mut solid = Vec::new();
        let mut legs: Vec<BoundaryLeg> = Vec::new();
        let bell_ids = g.ids_of_kind(VertexKind::Bell);
        let bell_edge_set: BTreeSet<usize> = bell_ids
            .iter()
            .flat_map(|&b| g.out_edges(b))
            .collect();
        for (idx, e) in edges.iter().enumerate() {
            if bell_edge_set.contains(&idx) {
                continue;
            }
            let src_kind = g.kind(e.src).expect("validated edge source");
            let dst_kind = g.kind(e.dst).expect("validated edge target");
            match (src_kind, dst_kind) {
                (VertexKind::Unitary, VertexKind::Unitary) => solid.push(SolidEdge {
                    a: End::Site(site_of_gate[&e.src]),
                    b: End::Site(site_of_gate[&e.dst] + 1),
                    chi: e.chi,
                }),
                (VertexKind::Unitary, VertexKind::Output) => legs.push(BoundaryLeg {
                    output: e.dst,
                    chi: e.chi,
                    source: LegSource::Gate(site_of_gate[&e.src]),
                }),
                (VertexKind::Product, VertexKind::Unitary) => {}
                (VertexKind::Product, VertexKind::Output) => legs.push(BoundaryLeg {
                    output: e.dst,
                    chi: e.chi,
                    source: LegSource::ProductDirect,
                }),
                other => {
                    return Err(Error::InvalidGraph(format!(
                        "unexpected edge kind pair {other:?}"
                    )))
                }
            }
        }
        let mut bell_chis = Vec::with_capacity(bell_ids.len());
        for &b in &bell_ids {
            let out = g.out_edges(b);
            let chi = edges[out[0]].chi;
            bell_chis.push(chi);
            let mut ends = Vec::with_capacity(2);
            for &ei in &out {
                let dst = edges[ei].dst;
                match g.kind(dst).expect("validated edge target") {
                    VertexKind::Unitary => ends.push(End::Site(site_of_gate[&dst] + 1)),
                    VertexKind::Output => {
                        legs.push(BoundaryLeg {
                            output: dst,
                            chi,
                            source: LegSource::BellDirect,
                        });
                        ends.push(End::Leg(legs.len() - 1));
                    }
                    other => {
                        return Err(Error::InvalidGraph(format!(
                            "bell leg into {other:?} vertex"
                        )))
                    }
                }
            }
            solid.push(SolidEdge { a: ends[0], b: ends[1], chi });
        }
        // order legs by output id, remapping solid-edge leg endpoints
        let mut order: Vec<usize> = (0..legs.len()).collect();
        order.sort_by_key(|&i| legs[i].output);
        let mut new_pos = vec![0usize; legs.len()];
        for (new, &old) in order.iter().enumerate() {
            new_pos[old] = new;
        }
        let legs: Vec<BoundaryLeg> = order.iter().map(|&i| legs[i].clone()).collect();
        for s in solid.iter_mut() {
            for end in [&mut s.a, &mut s.b] {
                if let End::Leg(i) = end {
                    *i = new_pos[*i];
                }
            }
        }
        Ok(SpinModelGraph {
            m,
            sites,
            dashed,
            solid,
            legs,
            bell_chis,
            wg,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn dashed_edges(&self) -> &[DashedEdge] {
        &self.dashed
    }

    pub fn solid_edges(&self) -> &[SolidEdge] {
        &self.solid
    }

    pub fn boundary_legs(&self) -> &[BoundaryLeg] {
        &self.legs
    }

    pub fn bell_chis(&self) -> &[u64] {
        &self.bell_chis
    }

    /// χ^{-m} per Bell input.
    pub fn bell_prefactor(&self) -> f64 {
        self.bell_chis
            .iter()
            .map(|&chi| (chi as f64).powi(-(self.m as i32)))
            .product()
    }

    /// Signed bulk weight of a configuration: dashed Weingarten factors,
    /// solid χ^{cycles} factors, and the Bell prefactor. Boundary legs do
    /// not contribute here.
    pub fn boltzmann_weight(&self, config: &SpinConfiguration) -> Result<f64> {
        if config.spins.len() != self.sites.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} spins for {} sites",
                config.spins.len(),
                self.sites.len()
            )));
        }
        if config.spins.iter().any(|p| p.m() != self.m) {
            return Err(Error::CopyMismatch(self.m, config.spins[0].m()));
        }
        let mut w = self.bell_prefactor();
        for d in &self.dashed {
            let rel = config.spins[d.out_site].compose(&config.spins[d.in_site].inverse())?;
            w *= self.wg[&d.dim].value(&rel.cycle_type());
        }
        for s in &self.solid {
            let (a, b) = match (s.a, s.b) {
                (End::Site(a), End::Site(b)) => (a, b),
                _ => {
                    return Err(Error::InvalidGraph(
                        "bulk weight undefined for a Bell edge pinned to outputs".into(),
                    ))
                }
            };
            let rel = config.spins[a].compose(&config.spins[b].inverse())?;
            w *= (s.chi as f64).powi(rel.cycle_count() as i32);
        }
        Ok(w)
    }
}

pub(crate) fn checked_terms(k: usize, n: usize, cap: u128) -> Result<u128> {
    let mut t: u128 = 1;
    for _ in 0..n {
        t = t
            .checked_mul(k as u128)
            .ok_or(Error::PartitionCap { terms: u128::MAX, cap })?;
        if t > cap {
            return Err(Error::PartitionCap { terms: t, cap });
        }
    }
    Ok(t)
}

/// Per-edge factor tables over group-element indices.
struct FactorTables {
    k: usize,
    dashed: Vec<Vec<f64>>,
    solid: Vec<Vec<f64>>,
}

fn factor_tables(model: &SpinModelGraph, group: &[Permutation]) -> Result<FactorTables> {
    let k = group.len();
    let mut rel_cycles = vec![0usize; k * k];
    let mut rel_type: Vec<Vec<crate::symgroup::CycleType>> = Vec::with_capacity(k);
    for p in group {
        let mut row = Vec::with_capacity(k);
        for q in group {
            row.push(p.compose(&q.inverse())?.cycle_type());
        }
        rel_type.push(row);
    }
    for (pi, row) in rel_type.iter().enumerate() {
        for (qi, ct) in row.iter().enumerate() {
            rel_cycles[pi * k + qi] = ct.cycle_count();
        }
    }
    let dashed = model
        .dashed
        .iter()
        .map(|d| {
            let table = &model.wg[&d.dim];
            (0..k * k)
                .map(|i| table.value(&rel_type[i / k][i % k]))
                .collect()
        })
        .collect();
    let solid = model
        .solid
        .iter()
        .map(|s| {
            (0..k * k)
                .map(|i| (s.chi as f64).powi(rel_cycles[i] as i32))
                .collect()
        })
        .collect();
    Ok(FactorTables { k, dashed, solid })
}

/// Coefficients of the gate-averaged moment in the per-leg replica basis:
/// `ρ^(m) = Σ_t coeffs[t] · ⊗_legs σ̂(t_leg)`, where `t` runs over mixed-radix
/// tuples with one `S_m` index (in `enumerate_group` order) per boundary leg.
#[derive(Debug, Clone)]
pub struct LegCoefficients {
    pub m: usize,
    pub group_size: usize,
    pub leg_dims: Vec<usize>,
    pub coeffs: Vec<f64>,
}

/// Marginalizes the bulk partition sum onto the boundary legs. Requires
/// every leg gate-sourced (legs on the same gate share one spin, so their
/// joint tuples are supported on the diagonal of that constraint).
pub fn leg_tuple_coefficients(model: &SpinModelGraph) -> Result<LegCoefficients> {
    let m = model.m;
    for leg in &model.legs {
        if !matches!(leg.source, LegSource::Gate(_)) {
            return Err(Error::InvalidGraph(
                "moment reconstruction needs every boundary leg on a gate; \
                 route Bell or product legs through a unitary"
                    .into(),
            ));
        }
    }
    let group = enumerate_group(m)?;
    let k = group.len();
    checked_terms(k, model.sites.len(), PARTITION_TERM_CAP)?;
    let n_tuples = checked_terms(k, model.legs.len(), PARTITION_TERM_CAP)? as usize;
    let tables = factor_tables(model, &group)?;
    let leg_sites: Vec<usize> = model
        .legs
        .iter()
        .map(|l| match l.source {
            LegSource::Gate(s) => s,
            _ => unreachable!("checked above"),
        })
        .collect();
    let mut coeffs = vec![0.0f64; n_tuples];
    let n_sites = model.sites.len();
    let mut digits = vec![0usize; n_sites];
    loop {
        let mut w = 1.0f64;
        for (d, table) in model.dashed.iter().zip(tables.dashed.iter()) {
            w *= table[digits[d.out_site] * k + digits[d.in_site]];
        }
        for (s, table) in model.solid.iter().zip(tables.solid.iter()) {
            let (a, b) = match (s.a, s.b) {
                (End::Site(a), End::Site(b)) => (a, b),
                _ => unreachable!("legs checked gate-sourced"),
            };
            w *= table[digits[a] * k + digits[b]];
        }
        let mut tuple = 0usize;
        for &site in &leg_sites {
            tuple = tuple * k + digits[site];
        }
        coeffs[tuple] += w;
        // advance the mixed-radix odometer
        let mut pos = n_sites;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
        if n_sites == 0 || digits.iter().all(|&d| d == 0) {
            break;
        }
    }
    let pref = model.bell_prefactor();
    for c in coeffs.iter_mut() {
        *c *= pref;
    }
    Ok(LegCoefficients {
        m,
        group_size: k,
        leg_dims: model.legs.iter().map(|l| l.chi as usize).collect(),
        coeffs,
    })
}

/// Exact gate-averaged moment operator, reconstructed by summing
/// `weight × ⊗_legs σ̂` over all spin configurations. Boundary legs must all
/// be gate outputs.
pub fn moment_from_partition(model: &SpinModelGraph) -> Result<MomentOperator<f64>> {
    let m = model.m;
    let lc = leg_tuple_coefficients(model)?;
    let group = enumerate_group(m)?;
    let k = lc.group_size;
    let leg_dims = lc.leg_dims.clone();
    let layout = RegisterLayout::new(leg_dims.clone(), m)?;

    // assemble Σ coeff · ⊗ σ̂ on the replica register
    let dm = layout.total_dim();
    let d_copy = layout.copy_dim();
    let n_legs = leg_dims.len();
    let mut strides = vec![1usize; n_legs];
    for i in (0..n_legs.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * leg_dims[i + 1];
    }
    // per-column, per-copy, per-leg digits
    let mut col_digits = vec![0u16; dm * m * n_legs.max(1)];
    for col in 0..dm {
        let mut rem = col;
        for c in 0..m {
            let pw = d_copy.pow((m - 1 - c) as u32);
            let x = rem / pw;
            rem %= pw;
            for l in 0..n_legs {
                col_digits[(col * m + c) * n_legs + l] = ((x / strides[l]) % leg_dims[l]) as u16;
            }
        }
    }
    let mut mat = Array2::<f64>::zeros((dm, dm));
    let inv_maps: Vec<Vec<usize>> = group.iter().map(|p| p.inverse().mapping().to_vec()).collect();
    let mut dig = vec![0usize; n_legs];
    for (t, &c) in lc.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut rem = t;
        for l in (0..n_legs).rev() {
            dig[l] = rem % k;
            rem /= k;
        }
        let leg_inv: Vec<&Vec<usize>> = dig.iter().map(|&gi| &inv_maps[gi]).collect();
        for col in 0..dm {
            let mut row = 0usize;
            for cpy in 0..m {
                let mut x = 0usize;
                for l in 0..n_legs {
                    let src_copy = leg_inv[l][cpy];
                    x += col_digits[(col * m + src_copy) * n_legs + l] as usize * strides[l];
                }
                row = row * d_copy + x;
            }
            mat[(row, col)] += c;
        }
    }
    let op = MomentOperator::from_matrix(layout, mat)?;
    let herm = op.hermiticity_error();
    if herm > 1e-9 {
        return Err(Error::Simulation(format!(
            "partition moment hermiticity error {herm}"
        )));
    }
    let tr = op.trace_re();
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::Simulation(format!("partition moment trace {tr}")));
    }
    Ok(op)
}

/// Exact mean purity `E[Tr ρ_A²]` by the pinned S_2 partition sum: swap
/// against legs in `region`, identity against the rest.
pub fn purity_partition(g: &TensorNetworkGraph, region: &BTreeSet<usize>) -> Result<f64> {
    let model = SpinModelGraph::from_tn_graph(g, 2)?;
    let outputs: BTreeSet<usize> = g.output_ids().into_iter().collect();
    for &id in region {
        if !outputs.contains(&id) {
            return Err(Error::InvalidRegion(format!("unknown output id {id}")));
        }
    }
    let n_sites = model.sites.len();
    if n_sites > PURITY_SPIN_CAP {
        return Err(Error::PartitionCap {
            terms: 1u128 << n_sites,
            cap: 1u128 << PURITY_SPIN_CAP,
        });
    }
    let group = enumerate_group(2)?;
    let tables = factor_tables(&model, &group)?;
    // pin digit per leg: 1 (swap) inside the region, 0 (identity) outside
    let pins: Vec<usize> = model
        .legs
        .iter()
        .map(|l| usize::from(region.contains(&l.output)))
        .collect();
    let k = tables.k;
    let pref = model.bell_prefactor();
    let mut total = 0.0f64;
    for mask in 0u64..(1u64 << n_sites) {
        let digit = |site: usize| ((mask >> site) & 1) as usize;
        let mut w = pref;
        for (d, table) in model.dashed.iter().zip(tables.dashed.iter()) {
            w *= table[digit(d.out_site) * k + digit(d.in_site)];
        }
        for (s, table) in model.solid.iter().zip(tables.solid.iter()) {
            let a = match s.a {
                End::Site(a) => digit(a),
                End::Leg(l) => pins[l],
            };
            let b = match s.b {
                End::Site(b) => digit(b),
                End::Leg(l) => pins[l],
            };
            w *= table[a * k + b];
        }
        for (leg, &pin) in model.legs.iter().zip(pins.iter()) {
            if let LegSource::Gate(site) = leg.source {
                let cycles = if digit(site) == pin { 2 } else { 1 };
                w *= (leg.chi as f64).powi(cycles);
            }
        }
        total += w;
        if n_sites == 0 {
            break;
        }
    }
    Ok(total)
}

/// `-log₂ E[Tr ρ_A²]`: a certified lower bound on the mean entanglement
/// entropy of `region`, in bits.
pub fn rt_lower_bound(g: &TensorNetworkGraph, region: &BTreeSet<usize>) -> Result<f64> {
    let p = purity_partition(g, region)?;
    if p <= 0.0 {
        return Err(Error::Simulation(format!("nonpositive mean purity {p}")));
    }
    Ok(-p.log2())
}
