//! User graph with one virtual node per group, and loops over it.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::cut::Cut;
use crate::error::{Error, Result};
use crate::grouping::Grouping;

/// Directed graph over N real users followed by G virtual users.
///
/// Edge i → j means "i joins j's group and j leaves it"; its weight is the
/// resulting change of ω for j's group. Edges inside a group are +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopGraph {
    pub num_users: usize,
    pub num_groups: usize,
    /// Group of every node; virtual node N + g sits in group g.
    pub group_of: Vec<usize>,
    pub adjacency: DMatrix<f64>,
}

impl LoopGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_groups
    }

    pub fn is_virtual(&self, node: usize) -> bool {
        node >= self.num_users
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// Graph from an explicit weight matrix. Nodes from `num_users` on are
    /// virtual; edges between nodes of one group are forced to +∞.
    pub fn from_weights(num_users: usize, group_of: Vec<usize>, mut adjacency: DMatrix<f64>) -> Result<Self> {
        let num_nodes = group_of.len();
        if adjacency.nrows() != num_nodes || adjacency.ncols() != num_nodes || num_users > num_nodes {
            return Err(Error::InvalidInput("adjacency does not match the node list".into()));
        }
        for i in 0..num_nodes {
            for j in 0..num_nodes {
                if group_of[i] == group_of[j] {
                    adjacency[(i, j)] = f64::INFINITY;
                }
            }
        }
        Ok(Self {
            num_users,
            num_groups: num_nodes - num_users,
            group_of,
            adjacency,
        })
    }

    /// Edge list `i j weight`, one finite edge per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.num_nodes() {
            for j in 0..self.num_nodes() {
                let w = self.adjacency[(i, j)];
                if w.is_finite() {
                    let _ = writeln!(out, "{i} {j} {w:e}");
                }
            }
        }
        out
    }
}

/// Build the graph of a cut at grouping x.
///
/// With `max_group_size`, moves that would grow a group beyond it get
/// weight +∞.
pub fn build_graph(cut: &Cut, x: &Grouping, max_group_size: Option<usize>) -> LoopGraph {
    let n = x.num_users();
    let g_count = x.num_groups();
    let nodes = n + g_count;
    let group_of: Vec<usize> = (0..nodes).map(|v| if v < n { x.group_of(v) } else { v - n }).collect();
    let members = x.all_members();

    // Current interference of every member and current ω of every group.
    let mut interf = vec![0.0; n];
    let mut omega = vec![0.0; g_count];
    for (g, mem) in members.iter().enumerate() {
        let s = mem.len();
        for &j in mem {
            interf[j] = cut.interference(s, j, mem);
            omega[g] += cut.member_term(s, j, interf[j]);
        }
    }

    let mut adjacency = DMatrix::from_element(nodes, nodes, f64::INFINITY);
    let mut scratch = Vec::with_capacity(n);
    for j in 0..nodes {
        let g = group_of[j];
        let mem = &members[g];
        let removed = (j < n).then_some(j);
        for i in 0..nodes {
            if group_of[i] == g {
                continue;
            }
            let added = (i < n).then_some(i);
            let total = match (added, removed) {
                (Some(a), Some(r)) => {
                    // Same size: only the swapped pair changes.
                    let s = mem.len();
                    let mut total = 0.0;
                    for &k in mem {
                        if k != r {
                            let ik = interf[k] + cut.pair(s, k, a) - cut.pair(s, k, r);
                            total += cut.member_term(s, k, ik.max(0.0));
                        }
                    }
                    let ia = mem.iter().filter(|&&k| k != r).map(|&k| cut.pair(s, a, k)).sum::<f64>() + cut.pair(s, a, a);
                    total + cut.member_term(s, a, ia)
                }
                (Some(a), None) => {
                    if max_group_size.is_some_and(|cap| mem.len() + 1 > cap) {
                        continue;
                    }
                    scratch.clear();
                    scratch.extend_from_slice(mem);
                    scratch.push(a);
                    cut.group_weight(&scratch)
                }
                (None, Some(r)) => {
                    scratch.clear();
                    scratch.extend(mem.iter().copied().filter(|&k| k != r));
                    cut.group_weight(&scratch)
                }
                (None, None) => omega[g],
            };
            adjacency[(i, j)] = total - omega[g];
        }
    }
    LoopGraph {
        num_users: n,
        num_groups: g_count,
        group_of,
        adjacency,
    }
}

/// A cycle n₁ → n₂ → … → n_L → n₁ through pairwise distinct groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub nodes: Vec<usize>,
    /// Group of each node when the loop was found.
    pub groups: Vec<usize>,
    pub total_weight: f64,
}

impl Loop {
    pub fn from_nodes(graph: &LoopGraph, nodes: Vec<usize>) -> Self {
        let groups = nodes.iter().map(|&v| graph.group_of[v]).collect();
        let total_weight = (0..nodes.len())
            .map(|k| graph.weight(nodes[k], nodes[(k + 1) % nodes.len()]))
            .sum();
        Self {
            nodes,
            groups,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rotation starting at the smallest node index.
    pub fn canonical(&self) -> Vec<usize> {
        canonical_rotation(&self.nodes)
    }

    pub fn has_distinct_groups(&self) -> bool {
        let mut g = self.groups.clone();
        g.sort_unstable();
        g.windows(2).all(|w| w[0] != w[1])
    }
}

pub fn canonical_rotation(nodes: &[usize]) -> Vec<usize> {
    let Some(start) = (0..nodes.len()).min_by_key(|&k| nodes[k]) else {
        return Vec::new();
    };
    nodes[start..].iter().chain(&nodes[..start]).copied().collect()
}

/// Execute n₁ → n₂, …, n_L → n₁: every real node moves into the group its
/// successor occupied.
pub fn apply_loop(x: &Grouping, lp: &Loop) -> Result<Grouping> {
    let n = x.num_users();
    if lp.nodes.len() < 2 || lp.nodes.len() != lp.groups.len() {
        return Err(Error::StaleLoop("loop needs at least two nodes".into()));
    }
    if !lp.has_distinct_groups() {
        return Err(Error::StaleLoop("loop visits a group twice".into()));
    }
    for (&v, &g) in lp.nodes.iter().zip(&lp.groups) {
        let actual = if v < n {
            x.group_of(v)
        } else if v - n < x.num_groups() {
            v - n
        } else {
            return Err(Error::StaleLoop(format!("node {v} does not exist")));
        };
        if actual != g {
            return Err(Error::StaleLoop(format!("node {v} is in group {actual}, loop expected {g}")));
        }
    }
    let mut next = x.clone();
    for k in 0..lp.nodes.len() {
        let v = lp.nodes[k];
        if v < n {
            next.set(v, lp.groups[(k + 1) % lp.nodes.len()]);
        }
    }
    Ok(next)
}
