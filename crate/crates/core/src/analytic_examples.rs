//! The two benchmark problems: one with a closed-form optimal solution and
//! one whose solution is approximated by a fine-grid reference.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::bv_control::{Jump, JumpControl};
use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::mixed_fem::{Coefficients, MixedSystem, ScalarFn};
use crate::quadrature::GAUSS5;
use crate::support::{run_outer, OuterConfig, OuterResult};

/// Regularization weight used by both benchmarks.
pub const DEFAULT_ALPHA: f64 = 1e-5;

/// Closed-form optimal control, state, adjoint and multiplier.
#[derive(Clone)]
pub struct ExactSolution {
    pub u_bar: JumpControl,
    pub y_bar: ScalarFn,
    pub p_bar: ScalarFn,
    /// Second derivative of `p_bar`.
    pub p_bar_dd: ScalarFn,
    pub phi_bar: ScalarFn,
}

#[derive(Clone)]
pub struct ExampleSpec {
    pub name: String,
    pub coefficients: Coefficients,
    pub alpha: f64,
    pub yd: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ExampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleSpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

/// `c = 12 − 4√8`.
pub fn example1_c() -> f64 {
    12.0 - 4.0 * 8f64.sqrt()
}

/// `x_c = arccos(c/4) / 2π`, the first jump of the exact control.
pub fn example1_xc() -> f64 {
    (example1_c() / 4.0).acos() / (2.0 * PI)
}

/// Solution of `−y'' = u`, `y(0) = y(1) = 0` for a step function `u`:
/// `y(x) = x V(1) − V(x)` with `V` the second antiderivative of `u`.
struct StepPoisson {
    /// `(start, value, U(start), V(start))` per constant piece.
    pieces: Vec<(f64, f64, f64, f64)>,
    v_end: f64,
}

impl StepPoisson {
    fn new(u: &JumpControl) -> Self {
        let mut pieces = Vec::new();
        let (mut big_u, mut big_v) = (0.0, 0.0);
        for (s, e, v) in u.pieces() {
            pieces.push((s, v, big_u, big_v));
            let dx = e - s;
            big_v += big_u * dx + 0.5 * v * dx * dx;
            big_u += v * dx;
        }
        Self { pieces, v_end: big_v }
    }

    fn second_antiderivative(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.0 <= x).max(1) - 1;
        let (s, v, big_u, big_v) = self.pieces[k];
        let dx = x - s;
        big_v + big_u * dx + 0.5 * v * dx * dx
    }

    fn eval(&self, x: f64) -> f64 {
        x * self.v_end - self.second_antiderivative(x)
    }
}

/// Example with known solution: `a = 1`, `d = 0`, jumps at `x_c`, `1/2`, `1 − x_c`.
pub fn example1(alpha: f64) -> Result<ExampleSpec> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let c = example1_c();
    let xc = example1_xc();
    let u_bar = JumpControl::new(
        0.5,
        vec![Jump { x: xc, c: 1.0 }, Jump { x: 0.5, c: -2.0 }, Jump { x: 1.0 - xc, c: 1.5 }],
    )?;
    let scale = alpha / (2.0 * c);
    let phi_bar = move |x: f64| scale * ((1.0 - (4.0 * PI * x).cos()) - c * (1.0 - (2.0 * PI * x).cos()));
    let p_bar = move |x: f64| scale * (4.0 * PI * (4.0 * PI * x).sin() - 2.0 * PI * c * (2.0 * PI * x).sin());
    let p_bar_dd = move |x: f64| {
        scale * (-64.0 * PI.powi(3) * (4.0 * PI * x).sin() + 8.0 * PI.powi(3) * c * (2.0 * PI * x).sin())
    };
    let state = Arc::new(StepPoisson::new(&u_bar));
    let y_state = state.clone();
    let y_bar = move |x: f64| y_state.eval(x);
    let yd = move |x: f64| state.eval(x) + p_bar_dd(x);
    Ok(ExampleSpec {
        name: "example1".into(),
        coefficients: Coefficients::constant(1.0, 0.0),
        alpha,
        yd: Arc::new(yd),
        exact: Some(ExactSolution {
            u_bar,
            y_bar: Arc::new(y_bar),
            p_bar: Arc::new(p_bar),
            p_bar_dd: Arc::new(p_bar_dd),
            phi_bar: Arc::new(phi_bar),
        }),
    })
}

/// Example without known solution: `a = 1`, `d = 0`, `y_d = (1 − cos 2πx) / (2π²)`.
pub fn example2() -> ExampleSpec {
    ExampleSpec {
        name: "example2".into(),
        coefficients: Coefficients::constant(1.0, 0.0),
        alpha: DEFAULT_ALPHA,
        yd: Arc::new(|x: f64| 0.5 / (PI * PI) * (1.0 - (2.0 * PI * x).cos())),
        exact: None,
    }
}

impl ExampleSpec {
    /// Looks up a benchmark by name, optionally overriding `alpha`.
    pub fn by_name(name: &str, alpha: Option<f64>) -> Result<Self> {
        match name {
            "example1" => example1(alpha.unwrap_or(DEFAULT_ALPHA)),
            "example2" => {
                let mut spec = example2();
                if let Some(a) = alpha {
                    if !(a > 0.0) {
                        return Err(invalid(format!("alpha must be positive, got {a}")));
                    }
                    spec.alpha = a;
                }
                Ok(spec)
            }
            other => Err(invalid(format!("unknown example {other:?}, expected example1 or example2"))),
        }
    }

    /// Cell averages of the desired state (5-point Gauss per cell).
    pub fn yd_cells(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.num_cells())
            .map(|k| {
                let (l, r) = mesh.cell(k);
                GAUSS5.integrate(l, r, |x| (self.yd)(x)) / (r - l)
            })
            .collect()
    }

    pub fn discretize(&self, mesh: Arc<Mesh>) -> Result<(Arc<MixedSystem>, Vec<f64>)> {
        let yd = self.yd_cells(&mesh);
        let sys = MixedSystem::assemble(mesh, &self.coefficients)?;
        Ok((Arc::new(sys), yd))
    }

    /// Runs the support iteration on the uniform mesh with `n` cells.
    pub fn solve(&self, n: usize, config: &OuterConfig) -> Result<OuterResult> {
        let (sys, yd) = self.discretize(Arc::new(Mesh::uniform(n)?))?;
        run_outer(sys, yd, self.alpha, config)
    }
}

/// Measured quantities of [`verify_example1_consistency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Weak residual of `−ȳ'' = ū` against hat functions, relative.
    pub state_residual: f64,
    /// Pointwise residual of `−p̄'' = ȳ − y_d`, relative.
    pub adjoint_residual: f64,
    /// `max |Φ̄| / α` over the samples and the jump points.
    pub phi_max_over_alpha: f64,
    /// `max(|Φ̄(0)|, |Φ̄(1)|) / α`.
    pub phi_boundary: f64,
    /// `max_i |sign(c_i) Φ̄(x̂_i) − α| / α`.
    pub phi_jump_deviation: f64,
}

pub const CONSISTENCY_REL_TOL: f64 = 1e-10;
pub const MULTIPLIER_TOL: f64 = 1e-12;

/// Checks that the closed-form data of a benchmark satisfy the continuous
/// optimality system, sampled on the uniform mesh with `n` cells.
pub fn verify_example1_consistency(spec: &ExampleSpec, n: usize) -> Result<ConsistencyReport> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| invalid(format!("{} has no closed-form solution", spec.name)))?;
    let mesh = Mesh::uniform(n)?;
    let nodes = mesh.nodes();
    let alpha = spec.alpha;
    let fail = |quantity: &str, detail: String| Error::ConsistencyFailure { quantity: quantity.into(), detail };

    // ∫ ȳ' e_i' = ∫ ū e_i for the interior hats; ȳ' is integrated exactly through nodal values.
    let mut state_res = 0.0f64;
    let mut state_scale = 0.0f64;
    for i in 1..n {
        let (l, m, r) = (nodes[i - 1], nodes[i], nodes[i + 1]);
        let y = |x: f64| (exact.y_bar)(x);
        let (left, right) = ((y(m) - y(l)) / (m - l), (y(r) - y(m)) / (r - m));
        let rhs = exact.u_bar.integrate_against_hat(l, m, r);
        state_res = state_res.max((left - right - rhs).abs());
        // the difference of slopes cancels, so measure against the slopes themselves
        state_scale = state_scale.max(left.abs()).max(right.abs());
    }
    let state_residual = state_res / state_scale.max(f64::MIN_POSITIVE);
    if state_residual > CONSISTENCY_REL_TOL {
        return Err(fail("state equation", format!("relative weak residual {state_residual:.3e}")));
    }

    let mut samples: Vec<f64> = nodes.to_vec();
    samples.extend((0..n).map(|k| mesh.midpoint(k)));
    samples.extend(exact.u_bar.jumps().iter().map(|j| j.x));

    let mut adj_res = 0.0f64;
    let mut adj_scale = 0.0f64;
    for &x in &samples {
        let lhs = -(exact.p_bar_dd)(x);
        let y = (exact.y_bar)(x);
        let yd = (spec.yd)(x);
        adj_res = adj_res.max((lhs - (y - yd)).abs());
        adj_scale = adj_scale.max(lhs.abs()).max(y.abs()).max(yd.abs());
    }
    let adjoint_residual = adj_res / adj_scale.max(f64::MIN_POSITIVE);
    if adjoint_residual > CONSISTENCY_REL_TOL {
        return Err(fail("adjoint equation", format!("relative residual {adjoint_residual:.3e}")));
    }

    let phi_max_over_alpha = samples.iter().map(|&x| (exact.phi_bar)(x).abs()).fold(0.0, f64::max) / alpha;
    if phi_max_over_alpha > 1.0 + MULTIPLIER_TOL {
        return Err(fail("multiplier bound", format!("max |Φ̄| / α = {phi_max_over_alpha}")));
    }
    let phi_boundary = (exact.phi_bar)(0.0).abs().max((exact.phi_bar)(1.0).abs()) / alpha;
    if phi_boundary > MULTIPLIER_TOL {
        return Err(fail("multiplier boundary values", format!("|Φ̄| / α = {phi_boundary:.3e} at an end point")));
    }
    let phi_jump_deviation = exact
        .u_bar
        .jumps()
        .iter()
        .map(|j| (j.c.signum() * (exact.phi_bar)(j.x) - alpha).abs() / alpha)
        .fold(0.0, f64::max);
    if phi_jump_deviation > MULTIPLIER_TOL {
        return Err(fail("multiplier at jumps", format!("relative deviation {phi_jump_deviation:.3e}")));
    }
    Ok(ConsistencyReport { state_residual, adjoint_residual, phi_max_over_alpha, phi_boundary, phi_jump_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let c = example1_c();
        assert!((c - 0.686_291_501_015_239_3).abs() < 1e-15);
        let xc = example1_xc();
        assert!((2.0 * PI * xc).cos() - c / 4.0 < 1e-15);
        assert!(xc > 0.22 && xc < 0.23);
    }

    #[test]
    fn multiplier_values() {
        let spec = example1(DEFAULT_ALPHA).unwrap();
        let ex = spec.exact.as_ref().unwrap();
        let a = spec.alpha;
        let xc = example1_xc();
        assert!(((ex.phi_bar)(xc) - a).abs() <= 1e-12 * a);
        assert!(((ex.phi_bar)(0.5) + a).abs() <= 1e-12 * a);
        assert!(((ex.phi_bar)(1.0 - xc) - a).abs() <= 1e-12 * a);
        assert!((ex.phi_bar)(0.0).abs() <= 1e-12 * a);
        assert!((ex.phi_bar)(1.0).abs() <= 1e-12 * a);
    }

    #[test]
    fn closed_form_state() {
        let spec = example1(DEFAULT_ALPHA).unwrap();
        let ex = spec.exact.unwrap();
        assert_eq!((ex.y_bar)(0.0), 0.0);
        assert!((ex.y_bar)(1.0).abs() < 1e-16);
        // constant control: y = x(1 − x)/2 · u
        let sp = StepPoisson::new(&JumpControl::constant(2.0));
        for &x in &[0.1, 0.5, 0.77] {
            assert!((sp.eval(x) - x * (1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn example2_data() {
        let spec = example2();
        assert!(spec.exact.is_none());
        assert_eq!(spec.alpha, 1e-5);
        assert_eq!((spec.yd)(0.0), 0.0);
        assert!(((spec.yd)(0.5) - 1.0 / (PI * PI)).abs() < 1e-16);
        assert!((spec.yd)(1.0).abs() < 1e-16);
        for &x in &[0.1, 0.3, 0.45] {
            assert!(((spec.yd)(x) - (spec.yd)(1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn by_name_lookup() {
        assert_eq!(ExampleSpec::by_name("example1", None).unwrap().name, "example1");
        assert_eq!(ExampleSpec::by_name("example2", Some(2e-5)).unwrap().alpha, 2e-5);
        assert!(ExampleSpec::by_name("example3", None).is_err());
        assert!(example1(0.0).is_err());
    }

    #[test]
    fn consistency_passes_and_breaks() {
        let spec = example1(DEFAULT_ALPHA).unwrap();
        verify_example1_consistency(&spec, 512).unwrap();
        let mut broken = spec.clone();
        let yd = broken.yd.clone();
        broken.yd = Arc::new(move |x| yd(x) + 0.01);
        let err = verify_example1_consistency(&broken, 512).unwrap_err();
        assert!(matches!(err, Error::ConsistencyFailure { ref quantity, .. } if quantity == "adjoint equation"));
        verify_example1_consistency(&example1(3e-4).unwrap(), 256).unwrap();
        assert!(verify_example1_consistency(&example2(), 64).is_err());
    }
}
