//! Explicit task graphs, built by unrolling a schedule symbolically.
//!
//! Each node carries a span cost (base kernel, addition pass or serialized
//! accumulate entry: 1; fork and join points: 0) and a work weight. The
//! longest weighted path is an independent check on the span recurrences
//! and the weight sum on the work recurrences.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::classic::SUBPRODUCTS;
use crate::config::switch_depth;
use crate::engine::Algorithm;
use crate::error::{MmError, Result};
use crate::strassen::{terms_of, CONTRIBUTIONS, S_FORMS, T_FORMS};

/// Largest `n / b` the builder accepts.
pub const MAX_RATIO: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeKind {
    /// A base kernel writing its output in place.
    Kernel,
    /// A base kernel into a private block followed by its serialized
    /// accumulate entry.
    KernelAccumulate,
    Fork,
    Join,
    Madd,
    /// Folding a lazily allocated temporary back into its parent region.
    Merge,
    /// Forming Strassen operands.
    Form,
    Assemble,
    /// Folding one Strassen product into its quadrants.
    Accumulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Node {
    pub kind: NodeKind,
    pub depth: u32,
    pub cost: u64,
    pub work: u128,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TaskDag {
    pub nodes: Vec<Node>,
    pub edges: Vec<(u32, u32)>,
}

impl TaskDag {
    pub fn add_node(&mut self, kind: NodeKind, depth: u32, work: u128) -> u32 {
        let cost = match kind {
            NodeKind::Fork | NodeKind::Join => 0,
            _ => 1,
        };
        self.nodes.push(Node { kind, depth, cost, work });
        (self.nodes.len() - 1) as u32
    }

    pub fn add_edge(&mut self, from: u32, to: u32) {
        self.edges.push((from, to));
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Base-kernel nodes of either flavour.
    pub fn kernel_count(&self) -> usize {
        self.count(NodeKind::Kernel) + self.count(NodeKind::KernelAccumulate)
    }

    pub fn total_work(&self) -> u128 {
        self.nodes.iter().map(|n| n.work).sum()
    }

    pub fn successors(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            out[a as usize].push(b);
        }
        out
    }
}

/// Longest path under node costs. Fails on a cycle.
pub fn longest_path(d: &TaskDag) -> Result<u64> {
    let n = d.nodes.len();
    let succ = d.successors();
    let mut indeg = vec![0usize; n];
    for &(_, b) in &d.edges {
        indeg[b as usize] += 1;
    }
    let mut dist: Vec<u64> = d.nodes.iter().map(|x| x.cost).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    let mut best = 0;
    while let Some(u) = ready.pop() {
        seen += 1;
        best = best.max(dist[u]);
        for &v in &succ[u] {
            let v = v as usize;
            dist[v] = dist[v].max(dist[u] + d.nodes[v].cost);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(v);
            }
        }
    }
    if seen != n {
        return Err(MmError::InternalError(format!("task graph has a cycle ({} of {n} nodes ordered)", seen)));
    }
    Ok(best)
}

/// A sub-graph with a single entry and a single exit node.
#[derive(Debug, Clone, Copy)]
struct Frag {
    entry: u32,
    exit: u32,
}

/// Output region of a unit under TAR-style chaining: `(size, row, col)` in
/// elements.
type Region = (usize, usize, usize);

struct Builder {
    g: TaskDag,
    b: usize,
    k: u32,
}

fn sq(v: usize) -> u128 {
    (v * v) as u128
}

impl Builder {
    fn single(&mut self, kind: NodeKind, depth: u32, work: u128) -> Frag {
        let id = self.g.add_node(kind, depth, work);
        Frag { entry: id, exit: id }
    }

    fn kernel(&mut self, d: u32) -> Frag {
        self.single(NodeKind::Kernel, d, (self.b as u128).pow(3))
    }

    /// `parts` run concurrently between a fork and a join.
    fn parallel(&mut self, d: u32, parts: &[Frag]) -> Frag {
        let fork = self.g.add_node(NodeKind::Fork, d, 0);
        let join = self.g.add_node(NodeKind::Join, d, 0);
        for f in parts {
            self.g.add_edge(fork, f.entry);
            self.g.add_edge(f.exit, join);
        }
        Frag { entry: fork, exit: join }
    }

    fn then(&mut self, a: Frag, b: Frag) -> Frag {
        self.g.add_edge(a.exit, b.entry);
        Frag { entry: a.entry, exit: b.exit }
    }

    fn co2(&mut self, v: usize, d: u32) -> Frag {
        if v <= self.b {
            return self.kernel(d);
        }
        let first: Vec<Frag> = (0..4).map(|_| self.co2(v / 2, d + 1)).collect();
        let second: Vec<Frag> = (0..4).map(|_| self.co2(v / 2, d + 1)).collect();
        let a = self.parallel(d, &first);
        let b = self.parallel(d, &second);
        self.then(a, b)
    }

    fn co3(&mut self, v: usize, d: u32) -> Frag {
        if v <= self.b {
            return self.kernel(d);
        }
        let kids: Vec<Frag> = (0..8).map(|_| self.co3(v / 2, d + 1)).collect();
        let body = self.parallel(d, &kids);
        let madd = self.single(NodeKind::Madd, d, sq(v));
        self.then(body, madd)
    }

    fn sar(&mut self, v: usize, d: u32) -> Frag {
        if v <= self.b {
            return self.kernel(d);
        }
        let fork = self.g.add_node(NodeKind::Fork, d, 0);
        let join = self.g.add_node(NodeKind::Join, d, 0);
        let kids: Vec<Frag> = (0..8).map(|_| self.sar(v / 2, d + 1)).collect();
        for q in 0..4 {
            let merge = self.g.add_node(NodeKind::Merge, d, sq(v / 2));
            // Top half of quadrant q is kid q, bottom half kid q + 4.
            for kid in [kids[q], kids[q + 4]] {
                self.g.add_edge(fork, kid.entry);
                self.g.add_edge(kid.exit, merge);
            }
            self.g.add_edge(merge, join);
        }
        Frag { entry: fork, exit: join }
    }

    fn strassen(&mut self, v: usize, d: u32, hybrid: bool) -> Frag {
        if hybrid && d >= self.k {
            return self.sar_strassen(v, d);
        }
        if v <= self.b {
            return self.kernel(d);
        }
        let forms = S_FORMS.iter().chain(&T_FORMS).filter(|f| !f.is_bare()).count() as u128;
        let form = self.single(NodeKind::Form, d, forms * sq(v / 2));
        let kids: Vec<Frag> = (0..7).map(|_| self.strassen(v / 2, d + 1, hybrid)).collect();
        let additions: u128 = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&q| terms_of(q).len() as u128 - 1).sum();
        let assemble = self.single(NodeKind::Assemble, d, additions * sq(v / 2));
        for k in &kids {
            self.g.add_edge(form.exit, k.entry);
            self.g.add_edge(k.exit, assemble.entry);
        }
        Frag { entry: form.entry, exit: assemble.exit }
    }

    fn sar_strassen(&mut self, v: usize, d: u32) -> Frag {
        if v <= self.b {
            return self.kernel(d);
        }
        let fork = self.g.add_node(NodeKind::Fork, d, 0);
        let join = self.g.add_node(NodeKind::Join, d, 0);
        let mut last: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for r in 0..7 {
            let forms = [S_FORMS[r], T_FORMS[r]].iter().filter(|f| !f.is_bare()).count() as u128;
            let form = self.single(NodeKind::Form, d + 1, forms * sq(v / 2));
            let kid = self.sar_strassen(v / 2, d + 1);
            let acc = self.single(NodeKind::Accumulate, d + 1, CONTRIBUTIONS[r].len() as u128 * sq(v / 2));
            self.g.add_edge(fork, form.entry);
            self.g.add_edge(form.exit, kid.entry);
            self.g.add_edge(kid.exit, acc.entry);
            // Accumulates into the same quadrant serialize through its tiles.
            for &(q, _) in CONTRIBUTIONS[r] {
                if let Some(prev) = last.insert(q, acc.exit) {
                    self.g.add_edge(prev, acc.entry);
                }
            }
            self.g.add_edge(acc.exit, join);
        }
        Frag { entry: fork, exit: join }
    }

    /// Collects the units of a TAR-style top in canonical order. Each unit
    /// targets a region of the output; units sharing a region are chained.
    fn tar_units(&mut self, v: usize, d: u32, at: (usize, usize), below: &mut dyn FnMut(&mut Self, usize, u32) -> Frag, out: &mut Vec<(Region, Frag)>) {
        if d >= self.k {
            let f = below(self, v, d);
            out.push(((v, at.0, at.1), f));
        } else if v <= self.b {
            let f = self.single(NodeKind::KernelAccumulate, d, (self.b as u128).pow(3) + sq(self.b));
            out.push(((v, at.0, at.1), f));
        } else {
            let h = v / 2;
            for &(i, j, _) in SUBPRODUCTS.iter() {
                self.tar_units(h, d + 1, (at.0 + i * h, at.1 + j * h), below, out);
            }
        }
    }

    fn tar_top(&mut self, v: usize, below: &mut dyn FnMut(&mut Self, usize, u32) -> Frag) -> Frag {
        let mut units = Vec::new();
        self.tar_units(v, 0, (0, 0), below, &mut units);
        if units.len() == 1 {
            return units[0].1;
        }
        let fork = self.g.add_node(NodeKind::Fork, 0, 0);
        let join = self.g.add_node(NodeKind::Join, 0, 0);
        let mut last: BTreeMap<Region, u32> = BTreeMap::new();
        for (region, f) in units {
            match last.insert(region, f.exit) {
                Some(prev) => self.g.add_edge(prev, f.entry),
                None => self.g.add_edge(fork, f.entry),
            }
        }
        for exit in last.into_values() {
            self.g.add_edge(exit, join);
        }
        Frag { entry: fork, exit: join }
    }
}

/// Builds the task graph of `algo` at dimension `n`, base `b`, `p` workers
/// (which fixes the switch depth of the hybrids).
pub fn build_dag(algo: Algorithm, n: usize, b: usize, p: usize) -> Result<TaskDag> {
    if b == 0 || n < b || !n.is_power_of_two() || !b.is_power_of_two() {
        return Err(MmError::InvalidSplit(format!("dimension {n} is not a power-of-two multiple of {b}")));
    }
    if n / b > MAX_RATIO {
        return Err(MmError::TooLarge(format!("n/b = {} exceeds {MAX_RATIO}", n / b)));
    }
    let mut bl = Builder { g: TaskDag::default(), b, k: switch_depth(p.max(1)) };
    match algo {
        Algorithm::Co2 => {
            bl.co2(n, 0);
        }
        Algorithm::Co3(_) => {
            bl.co3(n, 0);
        }
        Algorithm::Tar => {
            bl.k = u32::MAX;
            bl.tar_top(n, &mut |s, _v, d| s.kernel(d));
        }
        Algorithm::Sar => {
            bl.sar(n, 0);
        }
        Algorithm::Star => {
            bl.tar_top(n, &mut |s, v, d| s.sar(v, d));
        }
        Algorithm::Strassen(_) => {
            bl.strassen(n, 0, false);
        }
        Algorithm::SarStrassen => {
            bl.sar_strassen(n, 0);
        }
        Algorithm::StarStrassen1 => {
            bl.tar_top(n, &mut |s, v, d| s.sar_strassen(v, d));
        }
        Algorithm::StarStrassen2 => {
            bl.strassen(n, 0, true);
        }
    }
    Ok(bl.g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AllocMode;

    #[test]
    fn single_node() {
        let mut g = TaskDag::default();
        g.add_node(NodeKind::Kernel, 0, 1);
        assert_eq!(longest_path(&g).unwrap(), 1);
    }

    #[test]
    fn cycle_is_an_internal_error() {
        let mut g = TaskDag::default();
        let a = g.add_node(NodeKind::Kernel, 0, 1);
        let b = g.add_node(NodeKind::Kernel, 0, 1);
        g.add_edge(a, b);
        g.add_edge(b, a);
        assert!(matches!(longest_path(&g), Err(MmError::InternalError(_))));
    }

    #[test]
    fn co2_one_level_has_two_layers() {
        let g = build_dag(Algorithm::Co2, 4, 2, 1).unwrap();
        assert_eq!(g.kernel_count(), 8);
        assert_eq!(longest_path(&g).unwrap(), 2);
        // Every first-layer kernel precedes every second-layer kernel.
        let succ = g.successors();
        let kernels: Vec<usize> = (0..g.nodes.len()).filter(|&i| g.nodes[i].kind == NodeKind::Kernel).collect();
        let mid = succ[kernels[0]][0] as usize;
        assert_eq!(g.nodes[mid].kind, NodeKind::Join);
        assert_eq!(succ[mid].len(), 1);
    }

    #[test]
    fn co3_one_level() {
        let g = build_dag(Algorithm::Co3(AllocMode::Raw), 4, 2, 1).unwrap();
        assert_eq!(g.kernel_count(), 8);
        assert_eq!(g.count(NodeKind::Madd), 1);
        assert_eq!(longest_path(&g).unwrap(), 2);
        let succ = g.successors();
        for (i, n) in g.nodes.iter().enumerate() {
            if n.kind == NodeKind::Kernel {
                assert!(succ[i].iter().all(|&s| g.nodes[s as usize].kind == NodeKind::Join));
            }
        }
    }

    #[test]
    fn tar_one_level_chains_pairs() {
        let g = build_dag(Algorithm::Tar, 4, 2, 1).unwrap();
        assert_eq!(g.count(NodeKind::KernelAccumulate), 8);
        let chain_edges = g
            .edges
            .iter()
            .filter(|(a, b)| {
                g.nodes[*a as usize].kind == NodeKind::KernelAccumulate && g.nodes[*b as usize].kind == NodeKind::KernelAccumulate
            })
            .count();
        assert_eq!(chain_edges, 4);
        assert_eq!(longest_path(&g).unwrap(), 2);
    }

    #[test]
    fn seven_products_are_independent() {
        let g = build_dag(Algorithm::Strassen(AllocMode::Pooled), 4, 2, 1).unwrap();
        assert_eq!(g.kernel_count(), 7);
        let kernels: Vec<u32> = (0..g.nodes.len() as u32).filter(|&i| g.nodes[i as usize].kind == NodeKind::Kernel).collect();
        assert!(!g.edges.iter().any(|(a, b)| kernels.contains(a) && kernels.contains(b)));
    }

    #[test]
    fn scale_limit() {
        assert!(matches!(build_dag(Algorithm::Co2, 256, 2, 1), Err(MmError::TooLarge(_))));
        assert!(build_dag(Algorithm::Co2, 128, 2, 1).is_ok());
    }
}
