//! Negative differ-group loop search: the extended Bellman-Ford search and
//! the greedy walk.

use std::collections::HashSet;

use super::graph::{canonical_rotation, Loop, LoopGraph};

/// Loops excluded from a search, stored as canonical rotations.
pub type LoopSet = HashSet<Vec<usize>>;

/// Node expansions allowed in the exhaustive phase of [`ebsa`].
pub const EBSA_EXPANSION_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopSearch {
    Ebsa,
    Gfsa,
}

impl LoopSearch {
    pub fn find(self, graph: &LoopGraph, forbidden: &LoopSet, tol: f64) -> Option<Loop> {
        match self {
            LoopSearch::Ebsa => ebsa(graph, forbidden, tol),
            LoopSearch::Gfsa => gfsa(graph, forbidden, tol),
        }
    }
}

struct Path {
    nodes: Vec<usize>,
    /// Distance from the super node to each node of the path.
    cum: Vec<f64>,
}

impl Path {
    fn dist(&self) -> f64 {
        *self.cum.last().unwrap()
    }
}

fn admissible(nodes: &[usize], forbidden: &LoopSet) -> bool {
    !forbidden.contains(&canonical_rotation(nodes))
}

/// Extended Bellman-Ford search for a loop of weight below `-tol` whose nodes
/// lie in pairwise distinct groups and that is not in `forbidden`.
///
/// Every node starts at distance 0 from a super node. Relaxing i → j extends
/// i's best path when j's group is new to it, or restarts from the suffix
/// after the conflicting node otherwise. Reaching a node already on the path
/// closes a loop. Label correcting stops after (N+G)² rounds. When it ends
/// without a loop, an exhaustive depth-first search over paths with negative
/// prefix sums settles the question, so on small graphs the answer is exact.
pub fn ebsa(graph: &LoopGraph, forbidden: &LoopSet, tol: f64) -> Option<Loop> {
    let nn = graph.num_nodes();
    let group = &graph.group_of;
    let mut paths: Vec<Path> = (0..nn).map(|v| Path { nodes: vec![v], cum: vec![0.0] }).collect();
    let max_rounds = nn * nn;
    for _ in 0..max_rounds {
        let mut changed = false;
        for i in 0..nn {
            for j in 0..nn {
                let a = graph.weight(i, j);
                if !a.is_finite() {
                    continue;
                }
                let p = &paths[i];
                let cand = p.dist() + a;
                if !(cand < paths[j].dist()) {
                    continue;
                }
                if let Some(pos) = p.nodes.iter().position(|&v| v == j) {
                    if cand - p.cum[pos] < -tol && admissible(&p.nodes[pos..], forbidden) {
                        return Some(Loop::from_nodes(graph, p.nodes[pos..].to_vec()));
                    }
                    continue;
                }
                let start = match p.nodes.iter().position(|&v| group[v] == group[j]) {
                    Some(pos) => pos + 1,
                    None => 0,
                };
                let base = if start == 0 { 0.0 } else { p.cum[start] };
                let cand = cand - base;
                if !(cand < paths[j].dist()) {
                    continue;
                }
                let mut nodes = p.nodes[start..].to_vec();
                let mut cum: Vec<f64> = p.cum[start..].iter().map(|c| c - base).collect();
                nodes.push(j);
                cum.push(cand);
                paths[j] = Path { nodes, cum };
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    exhaustive(graph, forbidden, tol, EBSA_EXPANSION_BUDGET)
}

/// Depth-first search over simple differ-group paths whose every prefix sum is
/// negative. Any loop of negative total has a rotation with that property,
/// so no admissible loop is missed (within the expansion budget).
pub fn exhaustive(graph: &LoopGraph, forbidden: &LoopSet, tol: f64, budget: usize) -> Option<Loop> {
    struct Dfs<'a> {
        graph: &'a LoopGraph,
        forbidden: &'a LoopSet,
        tol: f64,
        budget: usize,
        path: Vec<usize>,
        used_groups: Vec<bool>,
    }
    impl Dfs<'_> {
        fn visit(&mut self, u: usize, sum: f64) -> Option<Vec<usize>> {
            let start = self.path[0];
            for v in 0..self.graph.num_nodes() {
                let w = self.graph.weight(u, v);
                if !w.is_finite() {
                    continue;
                }
                if v == start {
                    if self.path.len() >= 2 && sum + w < -self.tol && admissible(&self.path, self.forbidden) {
                        return Some(self.path.clone());
                    }
                    continue;
                }
                let g = self.graph.group_of[v];
                if self.used_groups[g] || !(sum + w < 0.0) {
                    continue;
                }
                if self.budget == 0 {
                    return None;
                }
                self.budget -= 1;
                self.path.push(v);
                self.used_groups[g] = true;
                let found = self.visit(v, sum + w);
                self.used_groups[g] = false;
                self.path.pop();
                if found.is_some() {
                    return found;
                }
            }
            None
        }
    }
    let num_groups = graph.group_of.iter().copied().max().map_or(0, |g| g + 1);
    let mut dfs = Dfs {
        graph,
        forbidden,
        tol,
        budget,
        path: Vec::new(),
        used_groups: vec![false; num_groups],
    };
    for s in 0..graph.num_nodes() {
        dfs.path = vec![s];
        dfs.used_groups.fill(false);
        dfs.used_groups[graph.group_of[s]] = true;
        if let Some(nodes) = dfs.visit(s, 0.0) {
            return Some(Loop::from_nodes(graph, nodes));
        }
    }
    None
}

/// Greedy search: start from the smallest remaining edge, then keep taking
/// the cheapest edge into a group not yet visited, testing closure after
/// every step. Each start edge is used once; ties go to the lowest (i, j).
pub fn gfsa(graph: &LoopGraph, forbidden: &LoopSet, tol: f64) -> Option<Loop> {
    let nn = graph.num_nodes();
    let group = &graph.group_of;
    let num_groups = group.iter().copied().max().map_or(0, |g| g + 1);
    let mut start_edges = graph.adjacency.clone();
    for _ in 0..nn {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..nn {
            for j in 0..nn {
                let w = start_edges[(i, j)];
                if w.is_finite() && best.is_none_or(|(_, _, b)| w < b) {
                    best = Some((i, j, w));
                }
            }
        }
        let (i, j, w) = best?;
        start_edges[(i, j)] = f64::INFINITY;
        let mut nodes = vec![i, j];
        let mut used = vec![false; num_groups];
        used[group[i]] = true;
        used[group[j]] = true;
        let mut m = w;
        let closes = |nodes: &[usize], m: f64| {
            let back = graph.weight(*nodes.last().unwrap(), nodes[0]);
            back.is_finite() && m + back < -tol && admissible(nodes, forbidden)
        };
        if closes(&nodes, m) {
            return Some(Loop::from_nodes(graph, nodes));
        }
        let mut cur = j;
        for _ in 3..=num_groups {
            let mut next: Option<(usize, f64)> = None;
            for v in 0..nn {
                let w = graph.weight(cur, v);
                if w.is_finite() && !used[group[v]] && next.is_none_or(|(_, b)| w < b) {
                    next = Some((v, w));
                }
            }
            let Some((v, w)) = next else { break };
            m += w;
            nodes.push(v);
            used[group[v]] = true;
            if closes(&nodes, m) {
                return Some(Loop::from_nodes(graph, nodes));
            }
            cur = v;
        }
    }
    None
}
