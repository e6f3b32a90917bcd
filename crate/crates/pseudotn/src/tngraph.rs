//! Tensor-network graphs: directed acyclic wiring of product/Bell inputs
//! through unitary gates to output legs, plus validation, canonical builders,
//! a text format, and min-cut computation over the bond dimensions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::{Error, Result};

/// Vertex roles in a tensor-network graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Haar/ensemble-sampled isometry-as-unitary block.
    Unitary,
    /// Fixed product input `|0⟩` of the edge dimension.
    Product,
    /// Maximally entangled pair across its two outgoing edges.
    Bell,
    /// Physical output leg.
    Output,
}

impl VertexKind {
    fn as_str(self) -> &'static str {
        match self {
            VertexKind::Unitary => "unitary",
            VertexKind::Product => "product",
            VertexKind::Bell => "bell",
            VertexKind::Output => "output",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "unitary" => Some(VertexKind::Unitary),
            "product" => Some(VertexKind::Product),
            "bell" => Some(VertexKind::Bell),
            "output" => Some(VertexKind::Output),
            _ => None,
        }
    }
}

/// A directed bond of dimension `chi` from `src` to `dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub chi: u64,
}

/// A tensor-network graph. Vertex ids are arbitrary but unique; edges are kept
/// in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TensorNetworkGraph {
    vertices: BTreeMap<usize, VertexKind>,
    edges: Vec<Edge>,
}

impl TensorNetworkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, id: usize, kind: VertexKind) -> Result<()> {
        if self.vertices.insert(id, kind).is_some() {
            return Err(Error::InvalidGraph(format!("duplicate vertex id {id}")));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, chi: u64) -> Result<()> {
        for id in [src, dst] {
            if !self.vertices.contains_key(&id) {
                return Err(Error::InvalidGraph(format!(
                    "edge {src}->{dst} references missing vertex {id}"
                )));
            }
        }
        self.edges.push(Edge { src, dst, chi });
        Ok(())
    }

    pub fn kind(&self, id: usize) -> Option<VertexKind> {
        self.vertices.get(&id).copied()
    }

    /// Vertex ids in ascending order.
    pub fn vertex_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices.keys().copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Output vertex ids in ascending order.
    pub fn output_ids(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|(_, &k)| k == VertexKind::Output)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Ids of a given kind, ascending.
    pub fn ids_of_kind(&self, kind: VertexKind) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|(_, &k)| k == kind)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Indices into `edges()` of edges into `id`, in insertion order.
    pub fn in_edges(&self, id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.dst == id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices into `edges()` of edges out of `id`, in insertion order.
    pub fn out_edges(&self, id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.src == id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Structural validation; returns the full list of violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.vertices.is_empty() {
            violations.push("graph has no vertices".into());
            return ValidationReport { violations };
        }
        for e in &self.edges {
            if e.chi < 2 {
                violations.push(format!(
                    "edge {}->{} has bond dimension {} < 2",
                    e.src, e.dst, e.chi
                ));
            }
        }
        for (&id, &kind) in &self.vertices {
            let ins = self.in_edges(id);
            let outs = self.out_edges(id);
            match kind {
                VertexKind::Unitary => {
                    if ins.is_empty() || outs.is_empty() {
                        violations.push(format!(
                            "unitary {id} needs incoming and outgoing edges, has {} in / {} out",
                            ins.len(),
                            outs.len()
                        ));
                    } else {
                        let din: u128 = ins.iter().map(|&i| self.edges[i].chi as u128).product();
                        let dout: u128 =
                            outs.iter().map(|&i| self.edges[i].chi as u128).product();
                        if din != dout {
                            violations.push(format!(
                                "unitary {id} is unbalanced: in dimension {din} vs out {dout}"
                            ));
                        }
                    }
                }
                VertexKind::Product => {
                    if !ins.is_empty() || outs.len() != 1 {
                        violations.push(format!(
                            "product {id} needs 0 in / 1 out, has {} in / {} out",
                            ins.len(),
                            outs.len()
                        ));
                    }
                }
                VertexKind::Bell => {
                    if !ins.is_empty() || outs.len() != 2 {
                        violations.push(format!(
                            "bell {id} needs 0 in / 2 out, has {} in / {} out",
                            ins.len(),
                            outs.len()
                        ));
                    } else if self.edges[outs[0]].chi != self.edges[outs[1]].chi {
                        violations.push(format!(
                            "bell {id} legs have unequal dimensions {} and {}",
                            self.edges[outs[0]].chi, self.edges[outs[1]].chi
                        ));
                    }
                }
                VertexKind::Output => {
                    if ins.len() != 1 || !outs.is_empty() {
                        violations.push(format!(
                            "output {id} needs 1 in / 0 out, has {} in / {} out",
                            ins.len(),
                            outs.len()
                        ));
                    }
                }
            }
        }
        if self.ids_of_kind(VertexKind::Output).is_empty() {
            violations.push("graph has no output vertices".into());
        }
        if !self.is_connected() {
            violations.push("graph is not connected".into());
        }
        if self.directed_cycle() {
            violations.push("graph has a directed cycle".into());
        }
        ValidationReport { violations }
    }

    fn is_connected(&self) -> bool {
        let ids: Vec<usize> = self.vertex_ids().collect();
        if ids.len() <= 1 {
            return true;
        }
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.src).or_default().push(e.dst);
            adj.entry(e.dst).or_default().push(e.src);
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![ids[0]];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if let Some(next) = adj.get(&v) {
                stack.extend(next.iter().copied());
            }
        }
        seen.len() == ids.len()
    }

    fn directed_cycle(&self) -> bool {
        let mut indeg: BTreeMap<usize, usize> = self.vertex_ids().map(|id| (id, 0)).collect();
        for e in &self.edges {
            *indeg.get_mut(&e.dst).unwrap() += 1;
        }
        let mut queue: VecDeque<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut removed = 0;
        while let Some(v) = queue.pop_front() {
            removed += 1;
            for &i in &self.out_edges(v) {
                let d = indeg.get_mut(&self.edges[i].dst).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push_back(self.edges[i].dst);
                }
            }
        }
        removed != self.vertices.len()
    }

    /// Unitary ids in dependency order, smallest id first among ready gates.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let unitaries: Vec<usize> = self.ids_of_kind(VertexKind::Unitary);
        let uset: BTreeSet<usize> = unitaries.iter().copied().collect();
        let mut indeg: BTreeMap<usize, usize> = unitaries.iter().map(|&id| (id, 0)).collect();
        for e in &self.edges {
            if uset.contains(&e.src) && uset.contains(&e.dst) {
                *indeg.get_mut(&e.dst).unwrap() += 1;
            }
        }
        let mut ready: BTreeSet<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(unitaries.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            for &i in &self.out_edges(id) {
                let dst = self.edges[i].dst;
                if uset.contains(&dst) {
                    let d = indeg.get_mut(&dst).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(dst);
                    }
                }
            }
        }
        if order.len() != unitaries.len() {
            return Err(Error::InvalidGraph("unitary wiring has a cycle".into()));
        }
        Ok(order)
    }

    /// Global size summary of the modeled state.
    pub fn system_shape(&self) -> SystemShape {
        let mut total_dim: u128 = 1;
        let mut n_outputs = 0;
        for (&id, &kind) in &self.vertices {
            if kind == VertexKind::Output {
                n_outputs += 1;
                for &i in &self.in_edges(id) {
                    total_dim = total_dim.saturating_mul(self.edges[i].chi as u128);
                }
            }
        }
        SystemShape {
            total_dim,
            effective_qubits: (total_dim as f64).log2(),
            n_outputs,
            n_unitaries: self.ids_of_kind(VertexKind::Unitary).len(),
        }
    }

    /// Serializes to the line-based text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&id, &kind) in &self.vertices {
            writeln!(out, "vertex {id} {}", kind.as_str()).unwrap();
        }
        for e in &self.edges {
            writeln!(out, "edge {} {} {}", e.src, e.dst, e.chi).unwrap();
        }
        out
    }

    /// Parses the line-based text format: `vertex <id> <kind>` and
    /// `edge <src> <dst> <chi>` lines, `#` comments, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut g = TensorNetworkGraph::new();
        let mut pending_edges: Vec<(usize, Edge)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| Error::GraphParse {
                line: lineno + 1,
                msg,
            };
            match tok[0] {
                "vertex" => {
                    if tok.len() != 3 {
                        return Err(err(format!("expected 'vertex <id> <kind>', got '{line}'")));
                    }
                    let id: usize = tok[1]
                        .parse()
                        .map_err(|_| err(format!("bad vertex id '{}'", tok[1])))?;
                    let kind = VertexKind::parse(tok[2])
                        .ok_or_else(|| err(format!("unknown vertex kind '{}'", tok[2])))?;
                    g.add_vertex(id, kind)
                        .map_err(|e| err(e.to_string()))?;
                }
                "edge" => {
                    if tok.len() != 4 {
                        return Err(err(format!(
                            "expected 'edge <src> <dst> <chi>', got '{line}'"
                        )));
                    }
                    let src: usize = tok[1]
                        .parse()
                        .map_err(|_| err(format!("bad source id '{}'", tok[1])))?;
                    let dst: usize = tok[2]
                        .parse()
                        .map_err(|_| err(format!("bad destination id '{}'", tok[2])))?;
                    let chi: u64 = tok[3]
                        .parse()
                        .map_err(|_| err(format!("bad bond dimension '{}'", tok[3])))?;
                    pending_edges.push((lineno + 1, Edge { src, dst, chi }));
                }
                other => {
                    return Err(err(format!("unknown directive '{other}'")));
                }
            }
        }
        for (lineno, e) in pending_edges {
            g.add_edge(e.src, e.dst, e.chi).map_err(|er| Error::GraphParse {
                line: lineno,
                msg: er.to_string(),
            })?;
        }
        Ok(g)
    }
}

/// Result of structural validation.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.ok() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(self.violations.join("; ")))
        }
    }
}

/// Global size summary derived from a graph.
#[derive(Debug, Clone, Copy)]
pub struct SystemShape {
    pub total_dim: u128,
    pub effective_qubits: f64,
    pub n_outputs: usize,
    pub n_unitaries: usize,
}

/// Builds the length-`l` staircase circuit with bond dimension `2^nu`.
///
/// Gate `j` consumes the running bond and one fresh qubit; gates `1..l-1`
/// emit one qubit output plus the next bond, and the last gate fans out into
/// `nu + 1` qubit outputs, for `l + nu` qubit outputs in total.
pub fn build_staircase(l: usize, nu: usize) -> Result<TensorNetworkGraph> {
    if l < 1 || nu < 1 || nu > 20 {
        return Err(Error::InvalidGraph(format!(
            "staircase needs l >= 1 and 1 <= nu <= 20, got l={l}, nu={nu}"
        )));
    }
    let chi: u64 = 1 << nu;
    let mut g = TensorNetworkGraph::new();
    let mut next_id = 0usize;
    let mut fresh = |g: &mut TensorNetworkGraph, kind: VertexKind| -> Result<usize> {
        let id = next_id;
        next_id += 1;
        g.add_vertex(id, kind)?;
        Ok(id)
    };
    let bond_in = fresh(&mut g, VertexKind::Product)?;
    let mut bond_src = bond_in;
    for j in 1..=l {
        let pq = fresh(&mut g, VertexKind::Product)?;
        let gate = fresh(&mut g, VertexKind::Unitary)?;
        g.add_edge(bond_src, gate, chi)?;
        g.add_edge(pq, gate, 2)?;
        if j < l {
            let out = fresh(&mut g, VertexKind::Output)?;
            g.add_edge(gate, out, 2)?;
            bond_src = gate;
        } else {
            for _ in 0..=nu {
                let out = fresh(&mut g, VertexKind::Output)?;
                g.add_edge(gate, out, 2)?;
            }
        }
    }
    Ok(g)
}

/// Two-gate tree fixture: three fresh qubits into one gate, one wide leg
/// re-expanded by a second gate into two qubit outputs (vertices 5..=7 are
/// the outputs).
pub fn build_two_gate_tree() -> TensorNetworkGraph {
    let mut g = TensorNetworkGraph::new();
    for id in 0..3 {
        g.add_vertex(id, VertexKind::Product).unwrap();
    }
    g.add_vertex(3, VertexKind::Unitary).unwrap();
    g.add_vertex(4, VertexKind::Unitary).unwrap();
    g.add_vertex(5, VertexKind::Output).unwrap();
    g.add_vertex(6, VertexKind::Output).unwrap();
    g.add_vertex(7, VertexKind::Output).unwrap();
    for id in 0..3 {
        g.add_edge(id, 3, 2).unwrap();
    }
    g.add_edge(3, 5, 2).unwrap();
    g.add_edge(3, 4, 4).unwrap();
    g.add_edge(4, 6, 2).unwrap();
    g.add_edge(4, 7, 2).unwrap();
    g
}

/// Bell-bridge fixture: one Bell pair feeding two gates, each joined by a
/// fresh qubit (vertices 5..=8 are the outputs).
pub fn build_bell_bridge() -> TensorNetworkGraph {
    let mut g = TensorNetworkGraph::new();
    g.add_vertex(0, VertexKind::Bell).unwrap();
    g.add_vertex(1, VertexKind::Product).unwrap();
    g.add_vertex(2, VertexKind::Product).unwrap();
    g.add_vertex(3, VertexKind::Unitary).unwrap();
    g.add_vertex(4, VertexKind::Unitary).unwrap();
    for id in 5..9 {
        g.add_vertex(id, VertexKind::Output).unwrap();
    }
    g.add_edge(0, 3, 2).unwrap();
    g.add_edge(0, 4, 2).unwrap();
    g.add_edge(1, 3, 2).unwrap();
    g.add_edge(2, 4, 2).unwrap();
    g.add_edge(3, 5, 2).unwrap();
    g.add_edge(3, 6, 2).unwrap();
    g.add_edge(4, 7, 2).unwrap();
    g.add_edge(4, 8, 2).unwrap();
    g
}

/// Builds a hexagon-tiling patch on a cylinder with two hexagons per ring and
/// crossed radial bonds, matching the negative-curvature tiling locally. All
/// bonds carry dimension `chi`; the boundary is the final ring's six legs.
pub fn build_hyperbolic_64(layers: usize, chi: u64) -> Result<TensorNetworkGraph> {
    if !(1..=3).contains(&layers) || chi < 2 {
        return Err(Error::InvalidGraph(format!(
            "hyperbolic patch needs 1 <= layers <= 3 and chi >= 2, got layers={layers}, chi={chi}"
        )));
    }
    let mut g = TensorNetworkGraph::new();
    let mut next_id = 0usize;
    let mut fresh = |g: &mut TensorNetworkGraph, kind: VertexKind| -> Result<usize> {
        let id = next_id;
        next_id += 1;
        g.add_vertex(id, kind)?;
        Ok(id)
    };
    let bells: Vec<usize> = (0..3)
        .map(|_| fresh(&mut g, VertexKind::Bell))
        .collect::<Result<_>>()?;
    let mut hex_a = fresh(&mut g, VertexKind::Unitary)?;
    let mut hex_b = fresh(&mut g, VertexKind::Unitary)?;
    for &b in &bells {
        g.add_edge(b, hex_a, chi)?;
        g.add_edge(b, hex_b, chi)?;
    }
    for _ in 1..layers {
        let next_a = fresh(&mut g, VertexKind::Unitary)?;
        let next_b = fresh(&mut g, VertexKind::Unitary)?;
        g.add_edge(hex_a, next_a, chi)?;
        g.add_edge(hex_a, next_a, chi)?;
        g.add_edge(hex_a, next_b, chi)?;
        g.add_edge(hex_b, next_b, chi)?;
        g.add_edge(hex_b, next_b, chi)?;
        g.add_edge(hex_b, next_a, chi)?;
        hex_a = next_a;
        hex_b = next_b;
    }
    for gate in [hex_a, hex_b] {
        for _ in 0..3 {
            let out = fresh(&mut g, VertexKind::Output)?;
            g.add_edge(gate, out, chi)?;
        }
    }
    Ok(g)
}

/// A minimum cut separating a boundary region from its complement.
#[derive(Debug, Clone)]
pub struct CutResult {
    /// Total cut weight in bits, `Σ log2(chi)` over cut edges.
    pub weight_bits: u64,
    /// Indices into `graph.edges()` of a minimum-weight cut set.
    pub cut_edges: Vec<usize>,
    /// Number of edges in that cut set.
    pub cardinality: usize,
}

fn log2_exact(chi: u64) -> Result<u64> {
    if chi < 2 || !chi.is_power_of_two() {
        return Err(Error::InvalidGraph(format!(
            "min cut needs power-of-two bond dimensions, got {chi}"
        )));
    }
    Ok(chi.trailing_zeros() as u64)
}

struct FlowArc {
    to: usize,
    rev: usize,
    cap: u64,
}

struct FlowNetwork {
    graph: Vec<Vec<FlowArc>>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork {
            graph: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_arc(&mut self, u: usize, v: usize, cap_uv: u64, cap_vu: u64) {
        let ru = self.graph[v].len();
        let rv = self.graph[u].len();
        self.graph[u].push(FlowArc {
            to: v,
            rev: ru,
            cap: cap_uv,
        });
        self.graph[v].push(FlowArc {
            to: u,
            rev: rv,
            cap: cap_vu,
        });
    }

    /// Edmonds-Karp maximum flow.
    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let n = self.graph.len();
        let mut flow = 0u64;
        loop {
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut queue = VecDeque::new();
            queue.push_back(s);
            let mut seen = vec![false; n];
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (i, arc) in self.graph[u].iter().enumerate() {
                    if arc.cap > 0 && !seen[arc.to] {
                        seen[arc.to] = true;
                        prev[arc.to] = Some((u, i));
                        queue.push_back(arc.to);
                    }
                }
            }
            if !seen[t] {
                return flow;
            }
            let mut push = u64::MAX;
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                push = push.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                self.graph[u][i].cap -= push;
                let rev = self.graph[u][i].rev;
                self.graph[v][rev].cap += push;
                v = u;
            }
            flow += push;
        }
    }

    /// Vertices reachable from `s` in the residual network.
    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for arc in &self.graph[u] {
                if arc.cap > 0 && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}

/// Minimum-weight edge cut separating the outputs in `region` from the rest
/// of the outputs, with edge weights `log2(chi)`. Edges are cuttable in both
/// directions, output legs included. Degenerate regions (empty or all
/// outputs) yield weight zero with an empty cut set.
pub fn min_cut(g: &TensorNetworkGraph, region: &[usize]) -> Result<CutResult> {
    let outputs = g.output_ids();
    let oset: BTreeSet<usize> = outputs.iter().copied().collect();
    let mut a: BTreeSet<usize> = BTreeSet::new();
    for &id in region {
        if !oset.contains(&id) {
            return Err(Error::InvalidRegion(format!(
                "region vertex {id} is not an output"
            )));
        }
        a.insert(id);
    }
    if a.is_empty() || a.len() == outputs.len() {
        return Ok(CutResult {
            weight_bits: 0,
            cut_edges: Vec::new(),
            cardinality: 0,
        });
    }

    let ids: Vec<usize> = g.vertex_ids().collect();
    let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    let inf = u64::MAX / 4;
    for &id in &outputs {
        if a.contains(&id) {
            net.add_arc(s, index[&id], inf, 0);
        } else {
            net.add_arc(index[&id], t, inf, 0);
        }
    }
    let mut bits = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        let b = log2_exact(e.chi)?;
        bits.push(b);
        net.add_arc(index[&e.src], index[&e.dst], b, b);
    }
    let flow = net.max_flow(s, t);
    let reach = net.residual_reachable(s);
    let mut cut_edges = Vec::new();
    let mut weight = 0u64;
    for (i, e) in g.edges().iter().enumerate() {
        if reach[index[&e.src]] != reach[index[&e.dst]] {
            cut_edges.push(i);
            weight += bits[i];
        }
    }
    assert_eq!(weight, flow, "residual cut weight must equal max flow");
    Ok(CutResult {
        weight_bits: weight,
        cardinality: cut_edges.len(),
        cut_edges,
    })
}
