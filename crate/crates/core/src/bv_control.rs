//! Step-function controls: a base value plus finitely many jumps.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::mixed_fem::{P0Function, P1Function};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub x: f64,
    pub c: f64,
}

/// `u(x) = base + Σ_{i: x_i < x} c_i` with jump locations strictly inside (0, 1).
///
/// Serialized as `{"base": r, "jumps": [{"x": r, "c": r}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJumpControl")]
pub struct JumpControl {
    base: f64,
    jumps: Vec<Jump>,
}

#[derive(Deserialize)]
struct RawJumpControl {
    base: f64,
    #[serde(default)]
    jumps: Vec<Jump>,
}

impl TryFrom<RawJumpControl> for JumpControl {
    type Error = crate::Error;

    fn try_from(raw: RawJumpControl) -> Result<Self> {
        JumpControl::new(raw.base, raw.jumps)
    }
}

impl JumpControl {
    pub fn new(base: f64, jumps: Vec<Jump>) -> Result<Self> {
        if !base.is_finite() {
            return Err(invalid("base value must be finite"));
        }
        let mut prev = 0.0;
        for j in &jumps {
            if !(j.x > prev && j.x < 1.0) || !j.c.is_finite() {
                return Err(invalid(format!(
                    "jump at {} (height {}) must lie in (0, 1) after {prev}",
                    j.x, j.c
                )));
            }
            prev = j.x;
        }
        Ok(Self { base, jumps })
    }

    pub fn constant(base: f64) -> Self {
        Self { base, jumps: Vec::new() }
    }

    /// Reads off base and jumps of a piecewise constant function; equal
    /// neighbouring values produce no jump.
    pub fn from_cell_values(mesh: &Mesh, values: &[f64]) -> Result<Self> {
        if values.len() != mesh.num_cells() {
            return Err(invalid(format!("expected {} cell values, got {}", mesh.num_cells(), values.len())));
        }
        let jumps = values
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] != w[0])
            .map(|(k, w)| Jump { x: mesh.nodes()[k + 1], c: w[1] - w[0] })
            .collect();
        Self::new(values[0], jumps)
    }

    /// `a + Σ c_i 1_{(x_{t_i}, 1)}` for interior node indices `t_i`.
    pub fn from_nodes(mesh: &Mesh, base: f64, node_indices: &[usize], heights: &[f64]) -> Result<Self> {
        if node_indices.len() != heights.len() {
            return Err(invalid("one height per jump node required"));
        }
        let jumps = node_indices
            .iter()
            .zip(heights)
            .map(|(&t, &c)| {
                if t == 0 || t >= mesh.num_cells() {
                    Err(invalid(format!("node {t} is not an interior node")))
                } else {
                    Ok(Jump { x: mesh.nodes()[t], c })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, jumps)
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Value at `x`; at a jump location this is the left limit.
    pub fn evaluate(&self, x: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.x < x);
        self.base + self.jumps[..k].iter().map(|j| j.c).sum::<f64>()
    }

    /// Maximal constant pieces `(start, end, value)` covering [0, 1].
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0.0;
        let mut value = self.base;
        for j in &self.jumps {
            out.push((start, j.x, value));
            start = j.x;
            value += j.c;
        }
        out.push((start, 1.0, value));
        out
    }

    /// Exact integrals over the cells of `mesh`.
    pub fn cell_integrals(&self, mesh: &Mesh) -> Vec<f64> {
        let pieces = self.pieces();
        let mut out = Vec::with_capacity(mesh.num_cells());
        let mut p = 0;
        for k in 0..mesh.num_cells() {
            let (l, r) = mesh.cell(k);
            while pieces[p].1 <= l && p + 1 < pieces.len() {
                p += 1;
            }
            let mut acc = 0.0;
            let mut q = p;
            while q < pieces.len() && pieces[q].0 < r {
                let (s, e, v) = pieces[q];
                let len = e.min(r) - s.max(l);
                if len > 0.0 {
                    acc += v * len;
                }
                q += 1;
            }
            out.push(acc);
        }
        out
    }

    /// Cell-average projection onto the piecewise constants.
    pub fn project(&self, mesh: &Arc<Mesh>) -> P0Function {
        let values = self
            .cell_integrals(mesh)
            .into_iter()
            .zip(mesh.cell_sizes())
            .map(|(i, h)| i / h)
            .collect();
        P0Function::new(mesh.clone(), values).expect("one value per cell")
    }

    /// Total variation `Σ |c_i|`.
    pub fn bv_seminorm(&self) -> f64 {
        self.jumps.iter().map(|j| j.c.abs()).sum()
    }

    pub fn l1_distance(&self, other: &JumpControl) -> f64 {
        self.merged_differences(other).map(|(len, d)| len * d.abs()).sum()
    }

    pub fn l2_distance(&self, other: &JumpControl) -> f64 {
        self.merged_differences(other).map(|(len, d)| len * d * d).sum::<f64>().sqrt()
    }

    /// `(length, u - v)` on each interval of the merged breakpoint partition.
    fn merged_differences<'a>(&'a self, other: &'a JumpControl) -> impl Iterator<Item = (f64, f64)> + 'a {
        let mut breaks: Vec<f64> = std::iter::once(0.0)
            .chain(self.jumps.iter().map(|j| j.x))
            .chain(other.jumps.iter().map(|j| j.x))
            .chain(std::iter::once(1.0))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        (0..breaks.len() - 1).map(move |i| {
            let (l, r) = (breaks[i], breaks[i + 1]);
            let mid = 0.5 * (l + r);
            (r - l, self.evaluate(mid) - other.evaluate(mid))
        })
    }

    /// `∫ u e` for the hat function `e` with support `[left, right]` and peak at `mid`.
    /// `left == mid` or `mid == right` give the half hats at the boundary.
    pub fn integrate_against_hat(&self, left: f64, mid: f64, right: f64) -> f64 {
        // antiderivatives of the rising and falling halves
        let rise = |x: f64| (x - left).powi(2) / (2.0 * (mid - left));
        let fall = |x: f64| -(right - x).powi(2) / (2.0 * (right - mid));
        let mut acc = 0.0;
        for (s, e, v) in self.pieces() {
            if mid > left {
                let (a, b) = (s.max(left), e.min(mid));
                if b > a {
                    acc += v * (rise(b) - rise(a));
                }
            }
            if right > mid {
                let (a, b) = (s.max(mid), e.min(right));
                if b > a {
                    acc += v * (fall(b) - fall(a));
                }
            }
        }
        acc
    }
}

/// Antiderivative `Φ(x) = ∫_0^x p` of a piecewise constant function.
pub fn phi_from_p(p: &P0Function) -> P1Function {
    let mesh = p.mesh();
    let mut values = Vec::with_capacity(mesh.num_nodes());
    let mut acc = 0.0;
    values.push(0.0);
    for (v, h) in p.values().iter().zip(mesh.cell_sizes()) {
        acc += v * h;
        values.push(acc);
    }
    P1Function::new(mesh.clone(), values).expect("one value per node")
}
