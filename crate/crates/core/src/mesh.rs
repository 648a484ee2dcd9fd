//! Partitions of the unit interval.

use crate::error::{invalid, Result};

/// A partition `0 = x_0 < x_1 < ... < x_N = 1` of the unit interval.
///
/// Cell `i` (zero-based) is the interval `(x_i, x_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    cell_sizes: Vec<f64>,
    h_max: f64,
}

impl Mesh {
    /// Uniform mesh with `n` cells of width `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("uniform mesh needs at least 2 cells, got {n}")));
        }
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self::from_nodes(nodes)
    }

    /// Mesh with the given node positions. Nodes must be strictly increasing
    /// and start at 0 and end at 1.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("a mesh needs at least two nodes"));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(invalid(format!(
                "mesh must start at 0 and end at 1, got [{}, {}]",
                nodes[0],
                nodes.last().unwrap()
            )));
        }
        let mut cell_sizes = Vec::with_capacity(nodes.len() - 1);
        for (i, w) in nodes.windows(2).enumerate() {
            let h = w[1] - w[0];
            if !(h > 0.0) {
                return Err(invalid(format!("mesh nodes not strictly increasing at index {}", i + 1)));
            }
            cell_sizes.push(h);
        }
        let h_max = cell_sizes.iter().copied().fold(0.0, f64::max);
        Ok(Self { nodes, cell_sizes, h_max })
    }

    pub fn num_cells(&self) -> usize {
        self.cell_sizes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cell_sizes(&self) -> &[f64] {
        &self.cell_sizes
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// End points of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.nodes[i], self.nodes[i + 1])
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.nodes[i] + self.nodes[i + 1])
    }

    /// Index of the cell containing `x`; points on an interior node belong to
    /// the cell on their left.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.num_cells();
        match self.nodes.partition_point(|&node| node < x) {
            0 => 0,
            k => (k - 1).min(n - 1),
        }
    }

    /// If `fine` refines `self` (every node of `self` is a node of `fine`),
    /// returns for each fine cell the index of the coarse cell containing it.
    pub fn parent_map(&self, fine: &Mesh) -> Result<Vec<usize>> {
        let tol = 1e-14;
        let mut j = 0;
        for &x in &self.nodes {
            while j < fine.num_nodes() && fine.nodes[j] < x - tol {
                j += 1;
            }
            if j >= fine.num_nodes() || (fine.nodes[j] - x).abs() > tol {
                return Err(invalid(format!("coarse node {x} is not a node of the fine mesh")));
            }
        }
        let mut parents = Vec::with_capacity(fine.num_cells());
        let mut coarse = 0;
        for i in 0..fine.num_cells() {
            let mid = fine.midpoint(i);
            while mid > self.nodes[coarse + 1] {
                coarse += 1;
            }
            parents.push(coarse);
        }
        Ok(parents)
    }
}
