//! Dense statevector construction from a gate-assigned tensor-network graph,
//! plus reduced-density-matrix spectra, entropies, purities, and entropy
//! profiles over cut families.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMut2, IxDyn};
use ndarray_linalg::{EighInto, UPLO};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensembles::{sample_gate, EnsembleSpec, SeedTree, UnitaryGate};
use crate::tngraph::{TensorNetworkGraph, VertexKind};
use crate::{Error, Result};

/// Largest statevector dimension the builder will materialize.
pub const STATEVECTOR_DIM_CAP: u128 = 1 << 24;
/// Largest qubit count for the sampled Page reference curve.
pub const PAGE_QUBIT_CAP: usize = 14;
/// Probabilities below the square of this singular-value floor are dropped
/// from reduced spectra.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

const NORM_DRIFT_PER_GATE: f64 = 1e-10;

/// Dense state over the graph's output legs, axes ordered by ascending
/// output vertex id.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Array1<Complex64>,
    outputs: Vec<(usize, usize)>,
}

impl StateVector {
    /// Wraps explicit amplitudes over outputs `(id, dim)` in ascending id
    /// order; checks dimensions and normalization.
    pub fn from_amplitudes(amps: Array1<Complex64>, outputs: Vec<(usize, usize)>) -> Result<Self> {
        let d: usize = outputs.iter().map(|&(_, d)| d).product();
        if d != amps.len() {
            return Err(Error::Simulation(format!(
                "amplitude length {} does not match output dims (product {d})",
                amps.len()
            )));
        }
        if outputs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Simulation(
                "output registry must be sorted by ascending id".into(),
            ));
        }
        let norm = amps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Simulation(format!("state norm {norm} out of tolerance")));
        }
        Ok(StateVector { amps, outputs })
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amps
    }

    /// Output registry as `(output vertex id, local dim)`, ascending by id.
    pub fn outputs(&self) -> &[(usize, usize)] {
        &self.outputs
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    fn position_of(&self, id: usize) -> Result<usize> {
        self.outputs
            .iter()
            .position(|&(oid, _)| oid == id)
            .ok_or_else(|| Error::InvalidRegion(format!("unknown output id {id}")))
    }

    /// Amplitudes reshaped to `(dim A, dim complement)` with the region axes
    /// leading, in ascending id order.
    pub fn region_matrix(&self, region: &BTreeSet<usize>) -> Result<Array2<Complex64>> {
        let mut front: Vec<usize> = Vec::with_capacity(region.len());
        for &id in region {
            front.push(self.position_of(id)?);
        }
        let nd = self.outputs.len();
        let mut perm = front.clone();
        perm.extend((0..nd).filter(|i| !front.contains(i)));
        let shape: Vec<usize> = self.outputs.iter().map(|&(_, d)| d).collect();
        let d_a: usize = front.iter().map(|&i| shape[i]).product();
        let d_b = self.amps.len() / d_a;
        let view = ArrayViewD::from_shape(IxDyn(&shape), self.amps.as_slice().unwrap())
            .expect("registry shape matches amplitude length");
        let permuted = view.permuted_axes(IxDyn(&perm));
        let mut flat = Vec::with_capacity(self.amps.len());
        flat.extend(permuted.iter().cloned());
        Ok(Array2::from_shape_vec((d_a, d_b), flat).expect("shape product preserved"))
    }

    /// Eigenvalues of the reduced density matrix on `region`, computed from
    /// the Gram matrix of the smaller side. Values below the squared
    /// singular-value floor are dropped.
    pub fn reduced_spectrum(&self, region: &BTreeSet<usize>) -> Result<Vec<f64>> {
        let m = self.region_matrix(region)?;
        let (rows, cols) = (m.shape()[0], m.shape()[1]);
        let gram = if rows <= cols {
            let conj = m.mapv(|v| v.conj());
            let mut g = Array2::<Complex64>::zeros((rows, rows));
            ndarray::linalg::general_mat_mul(
                Complex64::new(1.0, 0.0),
                &m,
                &conj.t(),
                Complex64::new(0.0, 0.0),
                &mut g,
            );
            g
        } else {
            let conj = m.mapv(|v| v.conj());
            let mut g = Array2::<Complex64>::zeros((cols, cols));
            ndarray::linalg::general_mat_mul(
                Complex64::new(1.0, 0.0),
                &conj.t(),
                &m,
                Complex64::new(0.0, 0.0),
                &mut g,
            );
            g
        };
        let (vals, _) = gram
            .eigh_into(UPLO::Lower)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        let floor = SINGULAR_VALUE_FLOOR * SINGULAR_VALUE_FLOOR;
        Ok(vals
            .iter()
            .filter(|&&p| p >= floor)
            .map(|&p| p.max(0.0))
            .collect())
    }

    /// `Tr ρ_A²`, evaluated as the squared Frobenius norm of the Gram matrix.
    pub fn purity(&self, region: &BTreeSet<usize>) -> Result<f64> {
        let m = self.region_matrix(region)?;
        let (rows, cols) = (m.shape()[0], m.shape()[1]);
        let small = rows.min(cols);
        let mm = if rows <= cols { m } else { m.reversed_axes().as_standard_layout().into_owned() };
        let conj = mm.mapv(|v| v.conj());
        let mut g = Array2::<Complex64>::zeros((small, small));
        ndarray::linalg::general_mat_mul(
            Complex64::new(1.0, 0.0),
            &mm,
            &conj.t(),
            Complex64::new(0.0, 0.0),
            &mut g,
        );
        Ok(g.iter().map(|v| v.norm_sqr()).sum())
    }

    pub fn entropy(&self, region: &BTreeSet<usize>, kind: EntropyKind) -> Result<f64> {
        match kind {
            EntropyKind::VonNeumann => {
                let spec = self.reduced_spectrum(region)?;
                Ok(spec
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| -p * p.log2())
                    .sum())
            }
            EntropyKind::Renyi2 => {
                let p = self.purity(region)?;
                Ok(-p.log2())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyKind {
    VonNeumann,
    Renyi2,
}

/// Which family of regions an entropy profile sweeps.
///
/// Prefix cuts take the first `ℓ` outputs for `ℓ = 1..N-1`. Segment cuts
/// take, for each width `w = 1..N-2`, the centered interior segment of that
/// width (never touching the first or last output).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutFamily {
    PrefixCuts,
    SegmentCuts,
}

#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub cut: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyProfile {
    pub family: CutFamily,
    pub points: Vec<ProfilePoint>,
}

/// The regions a cut family generates over `n` ordered outputs.
pub fn family_regions(family: CutFamily, ids: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let n = ids.len();
    match family {
        CutFamily::PrefixCuts => (1..n)
            .map(|l| (l, ids[..l].to_vec()))
            .collect(),
        CutFamily::SegmentCuts => (1..n.saturating_sub(1))
            .map(|w| {
                let start = ((n - w) / 2).max(1).min(n - 1 - w);
                (w, ids[start..start + w].to_vec())
            })
            .collect(),
    }
}

/// All contiguous interior segments `(start, width)` over `n` ordered
/// outputs, excluding any touching the first or last output.
pub fn interior_segments(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for start in 1..n.saturating_sub(1) {
        for width in 1..=(n - 1 - start) {
            out.push((start, width));
        }
    }
    out
}

struct AxisInfo {
    edge: usize,
    dim: usize,
}

struct Builder {
    data: Vec<Complex64>,
    scratch: Vec<Complex64>,
    axes: Vec<AxisInfo>,
    gates_applied: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            data: vec![Complex64::new(1.0, 0.0)],
            scratch: Vec::new(),
            axes: Vec::new(),
            gates_applied: 0,
        }
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.dim).collect()
    }

    fn append_product(&mut self, edge: usize, dim: usize) {
        let len = self.data.len();
        self.scratch.clear();
        self.scratch.resize(len * dim, Complex64::new(0.0, 0.0));
        for i in 0..len {
            self.scratch[i * dim] = self.data[i];
        }
        std::mem::swap(&mut self.data, &mut self.scratch);
        self.axes.push(AxisInfo { edge, dim });
    }

    fn append_bell(&mut self, edge_a: usize, edge_b: usize, chi: usize) {
        let len = self.data.len();
        let inv = 1.0 / (chi as f64).sqrt();
        self.scratch.clear();
        self.scratch
            .resize(len * chi * chi, Complex64::new(0.0, 0.0));
        for i in 0..len {
            let base = i * chi * chi;
            let v = self.data[i] * inv;
            for j in 0..chi {
                self.scratch[base + j * chi + j] = v;
            }
        }
        std::mem::swap(&mut self.data, &mut self.scratch);
        self.axes.push(AxisInfo { edge: edge_a, dim: chi });
        self.axes.push(AxisInfo { edge: edge_b, dim: chi });
    }

    fn permute_to_front(&mut self, front: &[usize]) {
        let nd = self.axes.len();
        let mut perm: Vec<usize> = front.to_vec();
        perm.extend((0..nd).filter(|i| !front.contains(i)));
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return;
        }
        let shape = self.shape();
        let view = ArrayViewD::from_shape(IxDyn(&shape), &self.data[..])
            .expect("axis dims match data length");
        let permuted = view.permuted_axes(IxDyn(&perm));
        self.scratch.clear();
        self.scratch.extend(permuted.iter().cloned());
        std::mem::swap(&mut self.data, &mut self.scratch);
        let mut old: Vec<Option<AxisInfo>> = self.axes.drain(..).map(Some).collect();
        self.axes = perm.iter().map(|&i| old[i].take().unwrap()).collect();
    }

    fn apply_gate(&mut self, gate: &UnitaryGate, in_axes: &[usize], out_edges: &[(usize, usize)]) -> Result<()> {
        self.permute_to_front(in_axes);
        let d_in: usize = self.axes[..in_axes.len()].iter().map(|a| a.dim).product();
        let rest = self.data.len() / d_in;
        if gate.dim() != d_in {
            return Err(Error::Simulation(format!(
                "gate dim {} vs leg product {d_in}",
                gate.dim()
            )));
        }
        self.scratch.clear();
        self.scratch.resize(self.data.len(), Complex64::new(0.0, 0.0));
        {
            let input = ArrayView2::from_shape((d_in, rest), &self.data[..])
                .expect("block shape matches data");
            let out = ArrayViewMut2::from_shape((d_in, rest), &mut self.scratch[..])
                .expect("block shape matches scratch");
            gate.apply_left_into(input, out)?;
        }
        std::mem::swap(&mut self.data, &mut self.scratch);
        self.axes.splice(
            0..in_axes.len(),
            out_edges.iter().map(|&(edge, dim)| AxisInfo { edge, dim }),
        );
        self.gates_applied += 1;
        let norm = self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let budget = NORM_DRIFT_PER_GATE * self.gates_applied as f64;
        if (norm - 1.0).abs() > budget {
            return Err(Error::Simulation(format!(
                "norm drift {} after {} gates exceeds budget {budget}",
                (norm - 1.0).abs(),
                self.gates_applied
            )));
        }
        Ok(())
    }
}

/// Builds the state with gates produced by `gate_fn(vertex_id, dim)`.
pub fn build_state_with<F>(g: &TensorNetworkGraph, mut gate_fn: F) -> Result<StateVector>
where
    F: FnMut(usize, usize) -> Result<UnitaryGate>,
{
    g.validate().into_result()?;
    let shape = g.system_shape();
    if shape.total_dim > STATEVECTOR_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: shape.total_dim,
            cap: STATEVECTOR_DIM_CAP,
        });
    }
    let edges = g.edges();
    let mut builder = Builder::new();
    for v in g.ids_of_kind(VertexKind::Product) {
        let out = g.out_edges(v);
        builder.append_product(out[0], edges[out[0]].chi as usize);
    }
    for v in g.ids_of_kind(VertexKind::Bell) {
        let out = g.out_edges(v);
        builder.append_bell(out[0], out[1], edges[out[0]].chi as usize);
    }
    for v in g.topological_order()? {
        let ins = g.in_edges(v);
        let outs = g.out_edges(v);
        let mut in_axes = Vec::with_capacity(ins.len());
        for e in &ins {
            let pos = builder
                .axes
                .iter()
                .position(|a| a.edge == *e)
                .expect("input leg present in topological order");
            in_axes.push(pos);
        }
        let d_in: usize = ins.iter().map(|&e| edges[e].chi as usize).product();
        let gate = gate_fn(v, d_in)?;
        let out_edges: Vec<(usize, usize)> = outs
            .iter()
            .map(|&e| (e, edges[e].chi as usize))
            .collect();
        builder.apply_gate(&gate, &in_axes, &out_edges)?;
    }
    // axes now carry exactly the edges feeding output vertices
    let mut slot_by_edge: BTreeMap<usize, usize> = BTreeMap::new();
    for (idx, e) in edges.iter().enumerate() {
        if matches!(g.kind(e.dst), Some(VertexKind::Output)) {
            slot_by_edge.insert(idx, e.dst);
        }
    }
    let mut order: Vec<(usize, usize)> = builder
        .axes
        .iter()
        .enumerate()
        .map(|(pos, a)| {
            let id = *slot_by_edge
                .get(&a.edge)
                .expect("every remaining leg feeds an output");
            (id, pos)
        })
        .collect();
    order.sort_unstable();
    let front: Vec<usize> = order.iter().map(|&(_, pos)| pos).collect();
    builder.permute_to_front(&front);
    let outputs: Vec<(usize, usize)> = builder
        .axes
        .iter()
        .map(|a| (slot_by_edge[&a.edge], a.dim))
        .collect();
    StateVector::from_amplitudes(Array1::from(builder.data), outputs)
}

/// Builds the state with gates sampled from `spec`, seeded per gate by
/// `tree` at path `[sample, vertex_id]`.
pub fn build_state(
    g: &TensorNetworkGraph,
    spec: EnsembleSpec,
    tree: &SeedTree,
    sample: u64,
) -> Result<StateVector> {
    build_state_with(g, |v, d| {
        let mut rng = tree.rng(&[sample, v as u64]);
        sample_gate(spec, d, &mut rng)
    })
}

/// Streaming mean and standard error of the mean.
#[derive(Debug, Clone, Default)]
pub struct RunningMean {
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl RunningMean {
    pub fn new() -> Self {
        RunningMean { n: 0, sum: 0.0, sumsq: 0.0 }
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = (self.sumsq - self.n as f64 * m * m).max(0.0) / (self.n as f64 - 1.0);
        (var / self.n as f64).sqrt()
    }
}

/// Mean and standard error of the entropy per cut over `samples` states.
pub fn entropy_profile(
    g: &TensorNetworkGraph,
    spec: EnsembleSpec,
    seed: u64,
    family: CutFamily,
    samples: usize,
    kind: EntropyKind,
) -> Result<EntropyProfile> {
    if samples == 0 {
        return Err(Error::Simulation("entropy profile needs samples >= 1".into()));
    }
    let ids = g.output_ids();
    let regions = family_regions(family, &ids);
    let tree = SeedTree::new(seed);
    let mut stats: Vec<RunningMean> = regions.iter().map(|_| RunningMean::new()).collect();
    for s in 0..samples {
        let state = build_state(g, spec, &tree, s as u64)?;
        for ((_, region), stat) in regions.iter().zip(stats.iter_mut()) {
            let set: BTreeSet<usize> = region.iter().copied().collect();
            stat.push(state.entropy(&set, kind)?);
        }
    }
    Ok(EntropyProfile {
        family,
        points: regions
            .iter()
            .zip(stats.iter())
            .map(|(&(cut, _), st)| ProfilePoint {
                cut,
                mean: st.mean(),
                stderr: st.stderr(),
            })
            .collect(),
    })
}

/// Haar-random state on `n` qubits: normalized complex Gaussian vector.
pub fn sample_haar_state(n_qubits: usize, rng: &mut ChaCha8Rng) -> Result<StateVector> {
    let dim = 1usize << n_qubits;
    let mut amps = Array1::<Complex64>::zeros(dim);
    let mut norm_sq = 0.0;
    for v in amps.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = Complex64::new(re, im);
        norm_sq += v.norm_sqr();
    }
    let inv = 1.0 / norm_sq.sqrt();
    amps.mapv_inplace(|v| v * inv);
    StateVector::from_amplitudes(amps, (0..n_qubits).map(|i| (i, 2)).collect())
}

/// Mean entropy per prefix cut of globally Haar-random `n`-qubit states;
/// the apparent volume-law reference curve.
pub fn page_reference(
    n_qubits: usize,
    cuts: &[usize],
    samples: usize,
    seed: u64,
) -> Result<EntropyProfile> {
    if n_qubits > PAGE_QUBIT_CAP {
        return Err(Error::Simulation(format!(
            "page reference capped at {PAGE_QUBIT_CAP} qubits, got {n_qubits}"
        )));
    }
    if samples == 0 {
        return Err(Error::Simulation("page reference needs samples >= 1".into()));
    }
    for &c in cuts {
        if c > n_qubits {
            return Err(Error::InvalidRegion(format!(
                "cut {c} exceeds {n_qubits} qubits"
            )));
        }
    }
    let tree = SeedTree::new(seed);
    let mut stats: Vec<RunningMean> = cuts.iter().map(|_| RunningMean::new()).collect();
    for s in 0..samples {
        let mut rng = tree.rng(&[s as u64]);
        let state = sample_haar_state(n_qubits, &mut rng)?;
        for (&c, stat) in cuts.iter().zip(stats.iter_mut()) {
            if c == 0 || c == n_qubits {
                stat.push(0.0);
                continue;
            }
            let region: BTreeSet<usize> = (0..c).collect();
            stat.push(state.entropy(&region, EntropyKind::VonNeumann)?);
        }
    }
    Ok(EntropyProfile {
        family: CutFamily::PrefixCuts,
        points: cuts
            .iter()
            .zip(stats.iter())
            .map(|(&cut, st)| ProfilePoint {
                cut,
                mean: st.mean(),
                stderr: st.stderr(),
            })
            .collect(),
    })
}

/// Closed-form mean entanglement entropy (in bits) of a Haar-random state
/// across a `d_a × d_b` bipartition with `d_a <= d_b`.
pub fn page_mean_bits(d_a: usize, d_b: usize) -> f64 {
    let (small, large) = if d_a <= d_b { (d_a, d_b) } else { (d_b, d_a) };
    let mut s = 0.0f64;
    for k in (large + 1)..=(small * large) {
        s += 1.0 / k as f64;
    }
    s -= (small as f64 - 1.0) / (2.0 * large as f64);
    s / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tngraph::build_staircase;

    fn region(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    fn staircase_state(l: usize, nu: usize, seed: u64, sample: u64) -> StateVector {
        let g = build_staircase(l, nu).unwrap();
        build_state(&g, EnsembleSpec::Haar, &SeedTree::new(seed), sample).unwrap()
    }

    #[test]
    fn identity_forced_product_chain_stays_in_zero_state() {
        let g = build_staircase(3, 2).unwrap();
        let state = build_state_with(&g, |_, d| Ok(UnitaryGate::identity(d))).unwrap();
        assert_eq!(state.dim(), 32);
        assert!((state.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(state.amplitudes().iter().skip(1).all(|v| v.norm() == 0.0));
        let ids = g.output_ids();
        for (_, reg) in family_regions(CutFamily::PrefixCuts, &ids) {
            let s = state.entropy(&region(&reg), EntropyKind::VonNeumann).unwrap();
            assert!(s.abs() < 1e-12, "entropy {s} on zero state");
        }
    }

    #[test]
    fn bell_pair_halves_are_maximally_mixed() {
        use crate::tngraph::TensorNetworkGraph;
        let mut g = TensorNetworkGraph::new();
        g.add_vertex(0, VertexKind::Bell).unwrap();
        g.add_vertex(1, VertexKind::Output).unwrap();
        g.add_vertex(2, VertexKind::Output).unwrap();
        g.add_edge(0, 1, 4).unwrap();
        g.add_edge(0, 2, 4).unwrap();
        let state = build_state_with(&g, |_, _| unreachable!("no gates")).unwrap();
        let s = state.entropy(&region(&[1]), EntropyKind::VonNeumann).unwrap();
        assert!((s - 2.0).abs() < 1e-10, "bell half entropy {s}");
        let p = state.purity(&region(&[2])).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        let s2 = state.entropy(&region(&[2]), EntropyKind::Renyi2).unwrap();
        assert!((s2 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn staircase_state_is_normalized_with_bounded_prefix_entropy() {
        let g = build_staircase(4, 2).unwrap();
        let tree = SeedTree::new(7);
        for sample in 0..3u64 {
            let state = build_state(&g, EnsembleSpec::Haar, &tree, sample).unwrap();
            let norm: f64 = state.amplitudes().iter().map(|v| v.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
            let ids = g.output_ids();
            for (_, reg) in family_regions(CutFamily::PrefixCuts, &ids) {
                let s = state.entropy(&region(&reg), EntropyKind::VonNeumann).unwrap();
                assert!(s <= 2.0 + 1e-9, "prefix entropy {s} above bond bound");
            }
        }
    }

    #[test]
    fn pure_state_entropy_is_symmetric_and_renyi_bounded() {
        let state = staircase_state(4, 2, 11, 0);
        let ids: Vec<usize> = state.outputs().iter().map(|&(id, _)| id).collect();
        for l in 1..ids.len() {
            let a = region(&ids[..l]);
            let b = region(&ids[l..]);
            let sa = state.entropy(&a, EntropyKind::VonNeumann).unwrap();
            let sb = state.entropy(&b, EntropyKind::VonNeumann).unwrap();
            assert!((sa - sb).abs() < 1e-9, "S(A)={sa} vs S(comp)={sb}");
            let r2 = state.entropy(&a, EntropyKind::Renyi2).unwrap();
            assert!(r2 <= sa + 1e-9, "renyi {r2} above von Neumann {sa}");
            let p = state.purity(&a).unwrap();
            assert!((p.log2() + r2).abs() < 1e-10);
            let spec_sum: f64 = state.reduced_spectrum(&a).unwrap().iter().sum();
            assert!((spec_sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn schmidt_bound_holds_samplewise_on_small_staircase() {
        use crate::tngraph::min_cut;
        let g = build_staircase(5, 2).unwrap();
        let ids = g.output_ids();
        let tree = SeedTree::new(13);
        for sample in 0..5u64 {
            let state = build_state(&g, EnsembleSpec::Haar, &tree, sample).unwrap();
            let mut regions: Vec<Vec<usize>> =
                (1..ids.len()).map(|l| ids[..l].to_vec()).collect();
            for (start, width) in interior_segments(ids.len()) {
                regions.push(ids[start..start + width].to_vec());
            }
            for reg in regions {
                let cut = min_cut(&g, &reg).unwrap();
                let s = state.entropy(&region(&reg), EntropyKind::VonNeumann).unwrap();
                assert!(
                    s <= cut.weight_bits as f64 + 1e-9,
                    "S={s} above cut {} for {reg:?}",
                    cut.weight_bits
                );
            }
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let g = build_staircase(24, 1).unwrap();
        let err = build_state(&g, EnsembleSpec::Haar, &SeedTree::new(1), 0).unwrap_err();
        assert!(matches!(err, Error::DimensionCap { .. }));
    }

    #[test]
    fn norm_drift_is_detected() {
        let g = build_staircase(2, 1).unwrap();
        let bad = |_: usize, d: usize| {
            let mut u = UnitaryGate::identity(d).to_dense().unwrap();
            u *= Complex64::new(1.001, 0.0);
            UnitaryGate::from_dense(u)
        };
        let err = build_state_with(&g, bad).unwrap_err();
        assert!(matches!(err, Error::Simulation(_)));
    }

    #[test]
    fn profile_rises_then_stays_under_bond_bound() {
        let g = build_staircase(8, 2).unwrap();
        let profile = entropy_profile(
            &g,
            EnsembleSpec::Haar,
            19,
            CutFamily::PrefixCuts,
            50,
            EntropyKind::VonNeumann,
        )
        .unwrap();
        assert_eq!(profile.points.len(), 9);
        for p in &profile.points {
            assert!(p.mean <= 2.0 + 1e-9, "cut {}: mean {}", p.cut, p.mean);
            assert!(p.mean >= 0.0);
        }
        // plateau well above 1 bit in the middle
        let mid: Vec<f64> = profile
            .points
            .iter()
            .filter(|p| (3..=7).contains(&p.cut))
            .map(|p| p.mean)
            .collect();
        assert!(mid.iter().all(|&m| m >= 1.0), "plateau {mid:?}");
    }

    #[test]
    fn segment_cut_family_is_interior_and_centered() {
        let ids: Vec<usize> = (10..20).collect();
        let regions = family_regions(CutFamily::SegmentCuts, &ids);
        assert_eq!(regions.len(), 8);
        for (w, reg) in regions {
            assert_eq!(reg.len(), w);
            assert!(!reg.contains(&10) && !reg.contains(&19), "width {w} touches an end");
        }
    }

    #[test]
    fn page_reference_matches_closed_form() {
        // exact Page means: (2,2) -> 0.480898, (2,4) -> 0.735087
        assert!((page_mean_bits(2, 2) - 0.4808983469629878).abs() < 1e-12);
        assert!((page_mean_bits(2, 4) - 0.7350874732148528).abs() < 1e-12);
        assert!((page_mean_bits(2, 8) - 0.8661534912207993).abs() < 1e-12);
        assert!((page_mean_bits(4, 2048) - 1.9986792001136622).abs() < 1e-12);
        assert_eq!(page_mean_bits(8, 2), page_mean_bits(2, 8));
        let prof = page_reference(2, &[0, 1], 2000, 23).unwrap();
        assert_eq!(prof.points[0].mean, 0.0);
        let p1 = &prof.points[1];
        let z = (p1.mean - page_mean_bits(2, 2)) / p1.stderr;
        assert!(z.abs() < 5.0, "page(2,2) z = {z}");
        let prof3 = page_reference(3, &[1, 2], 1500, 29).unwrap();
        let z1 = (prof3.points[0].mean - page_mean_bits(2, 4)) / prof3.points[0].stderr;
        assert!(z1.abs() < 5.0, "page(2,4) z = {z1}");
        // S(A) = S(complement) for pure states: cuts l and n-l agree
        let za = (prof3.points[0].mean - prof3.points[1].mean)
            / (prof3.points[0].stderr.powi(2) + prof3.points[1].stderr.powi(2)).sqrt();
        assert!(za.abs() < 5.0, "page symmetry z = {za}");
    }

    #[test]
    fn single_gate_profile_matches_page_oracle() {
        // one Haar gate on 3 qubits: the output is a global Haar state,
        // so the 1|2 cut mean must match the sampled Page reference
        let g = build_staircase(1, 2).unwrap();
        let profile = entropy_profile(
            &g,
            EnsembleSpec::Haar,
            31,
            CutFamily::PrefixCuts,
            200,
            EntropyKind::VonNeumann,
        )
        .unwrap();
        let p1 = profile.points.iter().find(|p| p.cut == 1).unwrap();
        let oracle = page_reference(3, &[1], 2000, 37).unwrap();
        let o1 = &oracle.points[0];
        let z = (p1.mean - o1.mean) / (p1.stderr.powi(2) + o1.stderr.powi(2)).sqrt();
        assert!(z.abs() < 5.0, "staircase(1,2) vs page oracle z = {z}");
        let zc = (p1.mean - page_mean_bits(2, 4)) / p1.stderr;
        assert!(zc.abs() < 5.0, "closed form z = {zc}");
    }
}
