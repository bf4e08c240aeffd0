//! Graph-based local search over groupings for the relaxed master problem.

use std::collections::HashSet;

use super::cut::{Cut, CutKind};
use super::graph::{apply_loop, build_graph};
use super::search::{LoopSearch, LoopSet};
use crate::error::{Error, Result};
use crate::grouping::Grouping;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmaOptions {
    pub search: LoopSearch,
    /// Accepted moves before giving up.
    pub max_moves: usize,
    /// Loops rejected on one graph before it counts as exhausted.
    pub max_rejections: usize,
    /// Moves that would grow a group beyond this size are not offered.
    pub max_group_size: Option<usize>,
}

impl Default for GbmaOptions {
    fn default() -> Self {
        Self {
            search: LoopSearch::Ebsa,
            max_moves: 10_000,
            max_rejections: 256,
            max_group_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmaOutcome {
    pub grouping: Grouping,
    /// Largest optimality cut at the returned grouping, if there is one.
    pub bound: Option<f64>,
    pub moves: usize,
    pub rejected: usize,
}

/// Relative tolerance for "strictly negative" loop weights and cut decreases.
const REL_TOL: f64 = 1e-12;

fn argmax(values: &[(usize, f64)]) -> Option<(usize, f64)> {
    values.iter().copied().fold(None, |best, (k, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((k, v)),
    })
}

/// Level below which a feasibility cut counts as satisfied: the cut's noise
/// term Σ ν_n √γ_n σ sets its natural scale.
fn feasibility_tol(cut: &Cut) -> f64 {
    let sigma = cut.stats.sigma2.sqrt();
    let scale: f64 = cut.duals.iter().zip(&cut.gamma.gamma).map(|(nu, g)| nu * g.sqrt() * sigma).sum();
    1e-9 * scale
}

struct State<'a> {
    cuts: &'a [Cut],
    opts: GbmaOptions,
    visited: HashSet<Vec<usize>>,
    moves: usize,
    rejected: usize,
}

impl State<'_> {
    fn values(&self, x: &Grouping, kind: CutKind) -> Vec<(usize, f64)> {
        self.cuts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(k, c)| (k, c.evaluate(x)))
            .collect()
    }

    fn feasible(&self, x: &Grouping) -> bool {
        self.cuts
            .iter()
            .filter(|c| c.kind == CutKind::Feasibility)
            .all(|c| c.evaluate(x) <= feasibility_tol(c))
    }

    /// Search cut `k`'s graph at x for a loop whose result passes `accept`.
    /// Rejected loops are forbidden and the search repeats on the same graph.
    fn improve(&mut self, x: &Grouping, k: usize, current: f64, accept: impl Fn(&Grouping) -> bool) -> Result<Option<Grouping>> {
        let graph = build_graph(&self.cuts[k], x, self.opts.max_group_size);
        let tol = REL_TOL * (1.0 + current.abs());
        let mut forbidden = LoopSet::new();
        for _ in 0..self.opts.max_rejections {
            let Some(lp) = self.opts.search.find(&graph, &forbidden, tol) else {
                return Ok(None);
            };
            let next = apply_loop(x, &lp)?;
            let target = self.cuts[k].evaluate(&next);
            if target < current - tol && !self.visited.contains(next.assignment()) && accept(&next) {
                self.visited.insert(next.assignment().to_vec());
                self.moves += 1;
                if self.moves > self.opts.max_moves {
                    return Err(Error::MasterMoveCap(self.opts.max_moves));
                }
                return Ok(Some(next));
            }
            self.rejected += 1;
            forbidden.insert(lp.canonical());
        }
        Ok(None)
    }
}

/// Run GBMA from grouping x over the stored cuts.
///
/// Phase 1 drives every feasibility cut to ≤ 0 by attacking the most
/// violated one, refusing moves that push another feasibility cut above the
/// current worst. Phase 2 repeatedly lowers the largest optimality cut while
/// keeping all optimality cuts at or below that maximum and all feasibility
/// cuts satisfied. Groupings are never revisited within one call.
pub fn gbma(cuts: &[Cut], x: &Grouping, opts: GbmaOptions) -> Result<GbmaOutcome> {
    if cuts.is_empty() {
        return Err(Error::InvalidInput("master needs at least one cut".into()));
    }
    if cuts.iter().any(|c| c.num_users() != x.num_users()) {
        return Err(Error::InvalidInput("cut and grouping sizes differ".into()));
    }
    let mut state = State {
        cuts,
        opts,
        visited: HashSet::from([x.assignment().to_vec()]),
        moves: 0,
        rejected: 0,
    };
    let mut x = x.clone();

    loop {
        let values = state.values(&x, CutKind::Feasibility);
        let violated: Vec<(usize, f64)> = values
            .iter()
            .copied()
            .filter(|&(k, v)| v > feasibility_tol(&cuts[k]))
            .collect();
        let Some((k, worst)) = argmax(&violated) else { break };
        let feasibility: Vec<usize> = values.iter().map(|&(k, _)| k).collect();
        let accept = |next: &Grouping| feasibility.iter().all(|&f| f == k || cuts[f].evaluate(next) <= worst);
        match state.improve(&x, k, worst, accept)? {
            Some(next) => x = next,
            None => {
                return Err(Error::MasterInfeasible {
                    cut: k,
                    value: worst,
                    rejected: state.rejected,
                })
            }
        }
    }

    loop {
        let values = state.values(&x, CutKind::Optimality);
        let Some((k, max_l)) = argmax(&values) else { break };
        let optimality: Vec<usize> = values.iter().map(|&(k, _)| k).collect();
        let slack = REL_TOL * (1.0 + max_l.abs());
        let accept = |next: &Grouping| {
            optimality.iter().all(|&o| o == k || cuts[o].evaluate(next) <= max_l + slack) && state_feasible(cuts, next)
        };
        match state.improve(&x, k, max_l, accept)? {
            Some(next) => x = next,
            None => break,
        }
    }

    let bound = argmax(&state.values(&x, CutKind::Optimality)).map(|(_, v)| v);
    debug_assert!(state.feasible(&x));
    Ok(GbmaOutcome {
        grouping: x,
        bound,
        moves: state.moves,
        rejected: state.rejected,
    })
}

fn state_feasible(cuts: &[Cut], x: &Grouping) -> bool {
    cuts.iter()
        .filter(|c| c.kind == CutKind::Feasibility)
        .all(|c| c.evaluate(x) <= feasibility_tol(c))
}
