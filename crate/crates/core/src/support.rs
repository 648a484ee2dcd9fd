//! Outer iteration that updates the jump support from the sign changes of
//! the discrete adjoint and stops on a fixed point (T1) or on a two-cycle
//! with decreasing objective (T2).

use std::collections::HashMap;
use std::sync::Arc;

use log::{info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::mixed_fem::{MixedSystem, P0Function};
use crate::reduced::{ProxOptions, ReducedProblem, ReducedSolution};

/// Cell values with `|p_i| <= DEGENERATE_REL · ‖p‖_∞` count as vanishing.
pub const DEGENERATE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterConfig {
    /// Tolerance on the distance between consecutive support vectors.
    pub epsilon: f64,
    pub max_outer: usize,
    pub inner: ProxOptions,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self { epsilon: 1e-10, max_outer: 50, inner: ProxOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// Same support as in the previous iteration.
    T1,
    /// Support equal to the one two iterations back, with a smaller objective
    /// than the previous iteration.
    T2,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterIterate {
    /// Number of support points `m_k`.
    pub m: usize,
    /// Support point coordinates `t_k`.
    pub support: Vec<f64>,
    /// Objective of the reduced problem solved on `t_k`.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct OuterResult {
    pub solution: ReducedSolution,
    /// Nodes that carry a nonzero jump in the returned solution.
    pub support_nodes: Vec<usize>,
    pub outer_iterations: usize,
    pub termination: Termination,
    /// False if the final adjoint has a (numerically) vanishing cell value.
    pub assumption_ok: bool,
    /// A two-cycle was resolved by solving on the union of both supports.
    pub cycle_merged: bool,
    pub history: Vec<OuterIterate>,
}

impl OuterResult {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIter && self.solution.converged
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.solution.y.mesh()
    }
}

/// Support detected from an adjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectedSupport {
    pub nodes: Vec<usize>,
    /// Some cell value was within the degeneracy threshold of zero.
    pub degenerate: bool,
}

/// Interior nodes across which the piecewise constant `p` changes sign.
///
/// A cell value with `|p_i| <= 1e-12 ‖p‖_∞` inherits the sign of its left
/// neighbour (the first non-degenerate cell to its right when it has none)
/// and the result is flagged as degenerate.
pub fn detect_support(p: &P0Function) -> DetectedSupport {
    let values = p.values();
    let threshold = DEGENERATE_REL * p.max_abs();
    let mut degenerate = false;
    let mut signs: Vec<i8> = values
        .iter()
        .map(|&v| {
            if v.abs() <= threshold || v == 0.0 {
                degenerate = true;
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let Some(first) = signs.iter().copied().find(|&s| s != 0) else {
        return DetectedSupport { nodes: Vec::new(), degenerate: true };
    };
    let mut prev = first;
    for s in &mut signs {
        if *s == 0 {
            *s = prev;
        }
        prev = *s;
    }
    let nodes = signs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(k, _)| k + 1)
        .collect();
    DetectedSupport { nodes, degenerate }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Checks T1, then T2, on the history of iterates `0..=k` (the last entry is `k`).
pub fn check_termination(history: &[OuterIterate], epsilon: f64) -> Option<Termination> {
    let k = history.len().checked_sub(1)?;
    let cur = &history[k];
    if k >= 1 {
        let prev = &history[k - 1];
        if cur.m == prev.m && distance(&cur.support, &prev.support) <= epsilon {
            return Some(Termination::T1);
        }
    }
    if k >= 2 {
        let (prev, prev2) = (&history[k - 1], &history[k - 2]);
        if cur.m == prev.m
            && prev.m == prev2.m
            && distance(&cur.support, &prev2.support) <= epsilon
            && cur.objective < prev.objective
        {
            return Some(Termination::T2);
        }
    }
    None
}

/// Runs the support iteration starting from an empty support and `a = 0`.
pub fn run_outer(system: Arc<MixedSystem>, yd_cells: Vec<f64>, alpha: f64, config: &OuterConfig) -> Result<OuterResult> {
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", config.epsilon)));
    }
    if config.max_outer == 0 {
        return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
    }
    let mesh = system.mesh().clone();
    let base = ReducedProblem::new(system, yd_cells, alpha, Vec::new())?;
    let mut solved: HashMap<Vec<usize>, (ReducedSolution, bool)> = HashMap::new();
    let mut history: Vec<OuterIterate> = Vec::new();
    let mut support: Vec<usize> = Vec::new();
    let mut visited: Vec<Vec<usize>> = Vec::new();
    let mut warm: Option<ReducedSolution> = None;
    let mut best: Option<(f64, Vec<usize>)> = None;

    for k in 0..config.max_outer {
        if !solved.contains_key(&support) {
            let prob = base.with_support(support.clone())?;
            let (a0, c0) = warm_start(warm.as_ref(), &support);
            let sol = prob.prox_solve(a0, &c0, config.inner)?;
            let detected = detect_support(&sol.p);
            if detected.degenerate {
                warn!("outer iteration {k}: adjoint has a vanishing cell value, sign-change detection is ambiguous");
            }
            solved.insert(support.clone(), (sol, detected.degenerate));
        }
        visited.push(support.clone());
        let (sol, _) = &solved[&support];
        let coords: Vec<f64> = support.iter().map(|&t| mesh.nodes()[t]).collect();
        history.push(OuterIterate { m: support.len(), support: coords, objective: sol.objective });
        if best.as_ref().map_or(true, |(f, _)| sol.objective < *f) {
            best = Some((sol.objective, support.clone()));
        }

        let stop = check_termination(&history, config.epsilon);
        info!(
            "outer {k}: m = {}, f = {:.12e}, inner iterations = {}, stop = {:?}",
            support.len(),
            sol.objective,
            sol.iterations,
            stop
        );
        if let Some(termination) = stop {
            let current = solved.remove(&support).unwrap();
            if termination == Termination::T2 {
                let other = &visited[visited.len() - 2];
                if let Some(merged) = merge_cycle(&base, &current.0, other, config)? {
                    let mut res = finish(merged, termination, history);
                    res.cycle_merged = true;
                    return Ok(res);
                }
            }
            return Ok(finish(current, termination, history));
        }
        let next = detect_support(&sol.p).nodes;
        warm = Some(sol.clone());
        support = next;
    }

    let (_, best_support) = best.expect("at least one iteration");
    Ok(finish(solved.remove(&best_support).unwrap(), Termination::MaxIter, history))
}

/// A two-cycle stops at an optimum on either support but not necessarily on
/// their union. Solving on the union can only lower the objective.
fn merge_cycle(
    base: &ReducedProblem,
    current: &ReducedSolution,
    other: &[usize],
    config: &OuterConfig,
) -> Result<Option<(ReducedSolution, bool)>> {
    let mut union: Vec<usize> = current.support.iter().chain(other).copied().collect();
    union.sort_unstable();
    union.dedup();
    if union.len() == current.support.len() {
        return Ok(None);
    }
    let (a0, c0) = warm_start(Some(current), &union);
    let sol = base.with_support(union)?.prox_solve(a0, &c0, config.inner)?;
    if sol.objective >= current.objective {
        return Ok(None);
    }
    info!("two-cycle merged: f = {:.12e} (was {:.12e})", sol.objective, current.objective);
    let degenerate = detect_support(&sol.p).degenerate;
    Ok(Some((sol, degenerate)))
}

fn warm_start(prev: Option<&ReducedSolution>, support: &[usize]) -> (f64, Vec<f64>) {
    let Some(prev) = prev else {
        return (0.0, vec![0.0; support.len()]);
    };
    let c = support
        .iter()
        .map(|t| prev.support.iter().position(|s| s == t).map_or(0.0, |i| prev.c[i]))
        .collect();
    (prev.a, c)
}

fn finish((solution, degenerate): (ReducedSolution, bool), termination: Termination, history: Vec<OuterIterate>) -> OuterResult {
    let support_nodes = solution.active_jumps().map(|(t, _)| t).collect();
    OuterResult {
        outer_iterations: history.len(),
        support_nodes,
        termination,
        assumption_ok: !degenerate,
        cycle_merged: false,
        history,
        solution,
    }
}
