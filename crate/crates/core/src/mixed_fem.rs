//! Lowest-order Raviart–Thomas discretization of `-(a y')' + d y = u` on the
//! unit interval with homogeneous Dirichlet conditions.
//!
//! The flux `z = a y'` lives in the continuous piecewise linears (P1) and the
//! state `y` in the piecewise constants (P0). Testing the mixed weak form with
//! the hat functions `e_i` and the cell indicators `chi_j` gives
//!
//! ```text
//!  A z +  B y = 0          A_ij = ∫ (1/a) e_i e_j
//! -Bᵀz +  D y = u_cells    B_ij = ∫ e_i' chi_j,  D_jj = ∫ d chi_j
//! ```
//!
//! so `y` solves `K y = u_cells` with `K = BᵀA⁻¹B + D` and `z = -A⁻¹B y`.
//! `K` is dense, but ordering the unknowns as `z_0, y_1, z_1, y_2, ..., z_N`
//! turns the block matrix into a band of half-width 2, which is what gets
//! factored.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::{BandedLu, SymTridiagonal};
use crate::mesh::Mesh;
use crate::quadrature::GAUSS3;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusion `a` (bounded below by a positive constant) and reaction `d >= 0`.
#[derive(Clone)]
pub struct Coefficients {
    pub diffusion: ScalarFn,
    pub reaction: ScalarFn,
}

impl Coefficients {
    pub fn new(
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        reaction: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { diffusion: Arc::new(diffusion), reaction: Arc::new(reaction) }
    }

    pub fn constant(a: f64, d: f64) -> Self {
        Self::new(move |_| a, move |_| d)
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Self::constant(1.0, 0.0)
    }
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients").finish_non_exhaustive()
    }
}

/// Piecewise constant function, one value per cell.
#[derive(Debug, Clone)]
pub struct P0Function {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl P0Function {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_cells() {
            return Err(invalid(format!(
                "P0 function needs {} values, got {}",
                mesh.num_cells(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_cells();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.values[self.mesh.locate(x)]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.mesh.cell_sizes()).map(|(v, h)| v * h).sum()
    }

    pub fn l2_inner(&self, other: &P0Function) -> Result<f64> {
        same_mesh(&self.mesh, &other.mesh)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.mesh.cell_sizes())
            .map(|((a, b), h)| a * b * h)
            .sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mesh.cell_sizes())
            .map(|(v, h)| v * v * h)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Continuous piecewise linear function, one value per node.
#[derive(Debug, Clone)]
pub struct P1Function {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl P1Function {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(invalid(format!(
                "P1 function needs {} values, got {}",
                mesh.num_nodes(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let i = self.mesh.locate(x);
        let (l, r) = self.mesh.cell(i);
        let t = ((x - l) / (r - l)).clamp(0.0, 1.0);
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.nodes() == b.nodes() {
        Ok(())
    } else {
        Err(invalid("functions live on different meshes"))
    }
}

/// Assembled mixed system for one mesh, with the block matrix factored once.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    mesh: Arc<Mesh>,
    mass: SymTridiagonal,
    reaction: Vec<f64>,
    block: BandedLu,
}

impl MixedSystem {
    pub fn assemble(mesh: Arc<Mesh>, coeffs: &Coefficients) -> Result<Self> {
        let n = mesh.num_cells();
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n];
        let mut reaction = vec![0.0; n];
        for k in 0..n {
            let (l, r) = mesh.cell(k);
            let h = r - l;
            for (x, w) in GAUSS3.on(l, r) {
                let a = (coeffs.diffusion)(x);
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidCoefficient(format!("diffusion a({x}) = {a} is not positive")));
                }
                let d = (coeffs.reaction)(x);
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::InvalidCoefficient(format!("reaction d({x}) = {d} is negative")));
                }
                let right = (x - l) / h;
                let left = 1.0 - right;
                diag[k] += w * left * left / a;
                diag[k + 1] += w * right * right / a;
                off[k] += w * left * right / a;
                reaction[k] += w * d;
            }
        }
        let mass = SymTridiagonal { diag, off };
        let block = BandedLu::factor(2 * n + 1, 2, 2, block_entries(&mass, &reaction))?;
        Ok(Self { mesh, mass, reaction, block })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    /// The flux mass matrix `A`.
    pub fn mass_matrix(&self) -> &SymTridiagonal {
        &self.mass
    }

    /// Diagonal of `D`.
    pub fn reaction_diag(&self) -> &[f64] {
        &self.reaction
    }

    /// `B y` for `y` in P0, a vector over the nodes.
    pub fn apply_b(&self, y: &[f64]) -> Vec<f64> {
        let n = self.num_cells();
        let mut out = vec![0.0; n + 1];
        for (k, &v) in y.iter().enumerate() {
            out[k] -= v;
            out[k + 1] += v;
        }
        out
    }

    /// `Bᵀ z` for `z` in P1, a vector over the cells.
    pub fn apply_bt(&self, z: &[f64]) -> Vec<f64> {
        z.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn b_dense(&self) -> DMatrix<f64> {
        let n = self.num_cells();
        let mut b = DMatrix::zeros(n + 1, n);
        for k in 0..n {
            b[(k, k)] = -1.0;
            b[(k + 1, k)] = 1.0;
        }
        b
    }

    /// Solves the block system with right-hand side `(flux_rhs, cell_rhs)`.
    pub fn solve_block(&self, flux_rhs: &[f64], cell_rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.num_cells();
        if flux_rhs.len() != n + 1 || cell_rhs.len() != n {
            return Err(invalid(format!(
                "block right-hand side has sizes ({}, {}), expected ({}, {n})",
                flux_rhs.len(),
                cell_rhs.len(),
                n + 1
            )));
        }
        let mut rhs = vec![0.0; 2 * n + 1];
        for (i, &f) in flux_rhs.iter().enumerate() {
            rhs[2 * i] = f;
        }
        for (k, &g) in cell_rhs.iter().enumerate() {
            rhs[2 * k + 1] = g;
        }
        let sol = self.block.solve(&rhs);
        let z = sol.iter().step_by(2).copied().collect();
        let y = sol.iter().skip(1).step_by(2).copied().collect();
        Ok((z, y))
    }

    /// Discrete state for a control given by its cell integrals `∫_{I_j} u`.
    pub fn solve_state(&self, u_cells: &[f64]) -> Result<(P1Function, P0Function)> {
        self.solve_cells(u_cells)
    }

    /// Discrete adjoint for the right-hand side `r_cells[j] = ∫_{I_j} (y_h - y_d)`.
    /// The operator is the same as for the state.
    pub fn solve_adjoint(&self, r_cells: &[f64]) -> Result<(P1Function, P0Function)> {
        self.solve_cells(r_cells)
    }

    fn solve_cells(&self, cells: &[f64]) -> Result<(P1Function, P0Function)> {
        let n = self.num_cells();
        if cells.len() != n {
            return Err(invalid(format!("expected {n} cell values, got {}", cells.len())));
        }
        let (z, y) = self.solve_block(&vec![0.0; n + 1], cells)?;
        Ok((
            P1Function { mesh: self.mesh.clone(), values: z },
            P0Function { mesh: self.mesh.clone(), values: y },
        ))
    }

    /// Dense Schur complement `K = BᵀA⁻¹B + D`, built column by column with
    /// tridiagonal solves. Quadratic in memory; meant for checks on small meshes.
    pub fn schur_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.num_cells();
        let mut k = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_bt(&self.mass.solve(&self.apply_b(&e))?);
            e[j] = 0.0;
            for i in 0..n {
                k[(i, j)] = col[i];
            }
            k[(j, j)] += self.reaction[j];
        }
        Ok(k)
    }

    /// State solve through a dense Cholesky factorization of the Schur complement.
    pub fn solve_state_schur(&self, u_cells: &[f64]) -> Result<(P1Function, P0Function)> {
        let n = self.num_cells();
        if u_cells.len() != n {
            return Err(invalid(format!("expected {n} cell values, got {}", u_cells.len())));
        }
        let chol = self
            .schur_matrix()?
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("Schur complement is not positive definite".into()))?;
        let y = chol.solve(&DVector::from_column_slice(u_cells));
        let y: Vec<f64> = y.iter().copied().collect();
        let z: Vec<f64> = self.mass.solve(&self.apply_b(&y))?.into_iter().map(|v| -v).collect();
        Ok((
            P1Function { mesh: self.mesh.clone(), values: z },
            P0Function { mesh: self.mesh.clone(), values: y },
        ))
    }

    /// Largest residual of the two discrete weak equations over all basis test functions.
    pub fn state_residual(&self, z: &[f64], y: &[f64], u_cells: &[f64]) -> f64 {
        let az = self.mass.mul_vec(z);
        let by = self.apply_b(y);
        let first = az.iter().zip(&by).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        let btz = self.apply_bt(z);
        let second = btz
            .iter()
            .zip(y)
            .zip(&self.reaction)
            .zip(u_cells)
            .fold(0.0f64, |m, (((bt, yk), d), u)| m.max((-bt + d * yk - u).abs()));
        first.max(second)
    }
}

/// Band entries of the interleaved block matrix: node `i` ↦ row/col `2i`,
/// cell `k` ↦ row/col `2k + 1`.
fn block_entries(mass: &SymTridiagonal, reaction: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = reaction.len();
    let mut entries = Vec::with_capacity(8 * n + 4);
    for i in 0..=n {
        entries.push((2 * i, 2 * i, mass.diag[i]));
        if i > 0 {
            entries.push((2 * i, 2 * i - 2, mass.off[i - 1]));
            entries.push((2 * i, 2 * i - 1, 1.0));
        }
        if i < n {
            entries.push((2 * i, 2 * i + 2, mass.off[i]));
            entries.push((2 * i, 2 * i + 1, -1.0));
        }
    }
    for (k, &d) in reaction.iter().enumerate() {
        entries.push((2 * k + 1, 2 * k, 1.0));
        entries.push((2 * k + 1, 2 * k + 2, -1.0));
        entries.push((2 * k + 1, 2 * k + 1, d));
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_system(n: usize) -> MixedSystem {
        MixedSystem::assemble(Arc::new(Mesh::uniform(n).unwrap()), &Coefficients::default()).unwrap()
    }

    #[test]
    fn mass_matrix_two_cells() {
        let sys = unit_system(2);
        let a = sys.mass_matrix();
        let expect_diag = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (got, want) in a.diag.iter().zip(expect_diag) {
            assert!((got - want).abs() < 1e-15);
        }
        for got in &a.off {
            assert!((got - 1.0 / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_matrix_graded_mesh() {
        let mesh = Arc::new(Mesh::from_nodes(vec![0.0, 0.1, 0.4, 1.0]).unwrap());
        let sys = MixedSystem::assemble(mesh.clone(), &Coefficients::default()).unwrap();
        let h = mesh.cell_sizes();
        let a = sys.mass_matrix();
        assert!((a.diag[0] - h[0] / 3.0).abs() < 1e-15);
        assert!((a.diag[1] - (h[0] + h[1]) / 3.0).abs() < 1e-15);
        assert!((a.diag[3] - h[2] / 3.0).abs() < 1e-15);
        for k in 0..3 {
            assert!((a.off[k] - h[k] / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn incidence_pattern() {
        let sys = unit_system(5);
        let b = sys.b_dense();
        for j in 0..5 {
            assert_eq!(b[(j, j)], -1.0);
            assert_eq!(b[(j + 1, j)], 1.0);
            assert_eq!(b.column(j).sum(), 0.0);
            assert_eq!(b.column(j).iter().filter(|v| **v != 0.0).count(), 2);
        }
    }

    #[test]
    fn no_reaction_means_zero_d() {
        assert!(unit_system(7).reaction_diag().iter().all(|&d| d == 0.0));
        let sys = MixedSystem::assemble(Arc::new(Mesh::uniform(4).unwrap()), &Coefficients::constant(1.0, 2.0)).unwrap();
        for &d in sys.reaction_diag() {
            assert!((d - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let mesh = Arc::new(Mesh::uniform(4).unwrap());
        let err = MixedSystem::assemble(mesh.clone(), &Coefficients::new(|x| x - 0.5, |_| 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidCoefficient(_)));
        let err = MixedSystem::assemble(mesh, &Coefficients::constant(1.0, -1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidCoefficient(_)));
    }

    #[test]
    fn zero_control_gives_zero_state() {
        let sys = unit_system(8);
        let (z, y) = sys.solve_state(&[0.0; 8]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(y.values().iter().all(|&v| v == 0.0));
        let (phi, p) = sys.solve_adjoint(&[0.0; 8]).unwrap();
        assert_eq!(phi.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let sys = unit_system(4);
        assert!(sys.solve_state(&[1.0; 3]).is_err());
        assert!(sys.solve_adjoint(&[1.0; 5]).is_err());
    }

    #[test]
    fn state_and_adjoint_agree() {
        let sys = unit_system(16);
        let rhs: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).sin()).collect();
        let (z, y) = sys.solve_state(&rhs).unwrap();
        let (phi, p) = sys.solve_adjoint(&rhs).unwrap();
        assert_eq!(z.values(), phi.values());
        assert_eq!(y.values(), p.values());
    }

    #[test]
    fn residuals_small() {
        let sys = MixedSystem::assemble(
            Arc::new(Mesh::from_nodes(vec![0.0, 0.05, 0.2, 0.5, 0.55, 0.9, 1.0]).unwrap()),
            &Coefficients::new(|x| 1.0 + x * x, |x| 2.0 + x.sin()),
        )
        .unwrap();
        let u = [0.3, -1.0, 2.0, 0.1, 0.0, 5.0];
        let (z, y) = sys.solve_state(&u).unwrap();
        assert!(sys.state_residual(z.values(), y.values(), &u) < 1e-12 * 6.0);
    }

    #[test]
    fn schur_path_matches_block_path() {
        let sys = MixedSystem::assemble(Arc::new(Mesh::uniform(12).unwrap()), &Coefficients::new(|x| 2.0 - x, |x| x)).unwrap();
        let u: Vec<f64> = (0..12).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let (z1, y1) = sys.solve_state(&u).unwrap();
        let (z2, y2) = sys.solve_state_schur(&u).unwrap();
        for (a, b) in y1.values().iter().zip(y2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in z1.values().iter().zip(z2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn p0_norms() {
        let mesh = Arc::new(Mesh::uniform(2).unwrap());
        let one = P0Function::new(mesh.clone(), vec![1.0, 1.0]).unwrap();
        assert!((one.l2_norm() - 1.0).abs() < 1e-15);
        let alt = P0Function::new(mesh.clone(), vec![1.0, -1.0]).unwrap();
        assert!((alt.l2_norm() - 1.0).abs() < 1e-15);
        let e1 = P0Function::new(mesh.clone(), vec![1.0, 0.0]).unwrap();
        let e2 = P0Function::new(mesh.clone(), vec![0.0, 1.0]).unwrap();
        assert_eq!(e1.l2_inner(&e2).unwrap(), 0.0);
        let other = P0Function::new(Arc::new(Mesh::uniform(3).unwrap()), vec![1.0; 3]).unwrap();
        assert!(one.l2_inner(&other).is_err());
        let graded = Arc::new(Mesh::from_nodes(vec![0.0, 0.1, 0.35, 1.0]).unwrap());
        let g1 = P0Function::new(graded, vec![1.0; 3]).unwrap();
        assert!((g1.l2_norm() - 1.0).abs() < 1e-15);
        assert!(P0Function::new(mesh, vec![1.0; 3]).is_err());
    }

    #[test]
    fn p1_evaluation() {
        let mesh = Arc::new(Mesh::uniform(2).unwrap());
        let f = P1Function::new(mesh, vec![0.0, 1.0, -1.0]).unwrap();
        assert!((f.evaluate(0.25) - 0.5).abs() < 1e-15);
        assert!((f.evaluate(0.75) - 0.0).abs() < 1e-15);
        assert_eq!(f.evaluate(1.0), -1.0);
    }
}
