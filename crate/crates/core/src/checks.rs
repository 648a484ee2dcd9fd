//! Self-check suites behind the `check` command.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic_examples::{example1, example2, verify_example1_consistency, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::mixed_fem::{Coefficients, MixedSystem};
use crate::reduced::{ProxOptions, ReducedProblem};
use crate::support::OuterConfig;

pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// Smooth part of the reduced objective.
fn tracking(prob: &ReducedProblem, a: f64, c: &[f64]) -> Result<f64> {
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    Ok(prob.objective(a, c)? - prob.alpha() * l1)
}

/// Largest relative deviation between the adjoint gradient and central
/// differences of the tracking term.
pub fn gradient_fd_error(prob: &ReducedProblem, a: f64, c: &[f64], step: f64) -> Result<f64> {
    let (ga, gc) = prob.smooth_gradient(a, c)?;
    let mut exact = vec![ga];
    exact.extend(gc);
    let mut theta = vec![a];
    theta.extend_from_slice(c);
    let mut worst = 0.0f64;
    let scale = exact.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(f64::MIN_POSITIVE);
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[i] += step;
        minus[i] -= step;
        let fd = (tracking(prob, plus[0], &plus[1..])? - tracking(prob, minus[0], &minus[1..])?) / (2.0 * step);
        worst = worst.max((fd - exact[i]).abs() / scale);
    }
    Ok(worst)
}

fn random_support(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (1..n).filter(|_| rng.gen_bool(0.3)).collect()
}

pub fn gradient_suite(seed: u64, points: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for n in [8usize, 32, 128] {
        let sys = Arc::new(MixedSystem::assemble(Arc::new(Mesh::uniform(n)?), &Coefficients::default())?);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let yd: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let support = random_support(&mut rng, n);
            let prob = ReducedProblem::new(sys.clone(), yd, DEFAULT_ALPHA, support)?;
            let a = rng.gen_range(-2.0..2.0);
            let c: Vec<f64> = prob.support().iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
            worst = worst.max(gradient_fd_error(&prob, a, &c, 1e-3)?);
        }
        out.push(CheckOutcome::new(format!("gradient N={n}"), worst <= 1e-6, format!("max relative error {worst:.3e}")));
    }
    Ok(out)
}

/// Tracking term `½ θᵀHθ − bᵀθ + k` of a reduced problem, assembled column by column.
pub fn quadratic_form(prob: &ReducedProblem) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let sys = prob.system();
    let h = sys.mesh().cell_sizes();
    let dim = prob.support().len() + 1;
    let mut g = DMatrix::zeros(h.len(), dim);
    for j in 0..dim {
        let mut theta = vec![0.0; dim];
        theta[j] = 1.0;
        let cells = prob.control_to_cells(theta[0], &theta[1..])?;
        let (_, y) = sys.solve_state(&cells)?;
        g.set_column(j, &DVector::from_column_slice(y.values()));
    }
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(h));
    let yd = DVector::from_column_slice(prob.yd_cells());
    let hess = g.transpose() * &w * &g;
    let b = g.transpose() * &w * &yd;
    let k = 0.5 * yd.dot(&(&w * &yd));
    Ok((hess, b, k))
}

/// Minimum of the reduced objective by enumerating every sign pattern of the
/// jump heights and solving the stationarity system on each.
pub fn sign_pattern_oracle(hess: &DMatrix<f64>, b: &DVector<f64>, k: f64, alpha: f64) -> Option<f64> {
    let m = hess.nrows() - 1;
    let total = 3usize.checked_pow(m as u32)?;
    let mut best: Option<f64> = None;
    for code in 0..total {
        let mut signs = vec![0i8; m];
        let mut rest = code;
        for s in signs.iter_mut() {
            *s = (rest % 3) as i8 - 1;
            rest /= 3;
        }
        let free: Vec<usize> = std::iter::once(0).chain((0..m).filter(|&i| signs[i] != 0).map(|i| i + 1)).collect();
        let hf = DMatrix::from_fn(free.len(), free.len(), |r, c| hess[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            b[i] - if i == 0 { 0.0 } else { alpha * f64::from(signs[i - 1]) }
        });
        let Some(sol) = hf.cholesky().map(|ch| ch.solve(&rhs)) else { continue };
        let feasible = free.iter().zip(sol.iter()).skip(1).all(|(&i, &v)| v * f64::from(signs[i - 1]) >= 0.0);
        if !feasible {
            continue;
        }
        let mut theta = DVector::zeros(m + 1);
        for (&i, &v) in free.iter().zip(sol.iter()) {
            theta[i] = v;
        }
        let l1: f64 = theta.iter().skip(1).map(|v| v.abs()).sum();
        let f = 0.5 * theta.dot(&(hess * &theta)) - b.dot(&theta) + k + alpha * l1;
        if best.map_or(true, |v| f < v) {
            best = Some(f);
        }
    }
    best
}

pub fn oracle_suite(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let n = 8;
    let sys = Arc::new(MixedSystem::assemble(Arc::new(Mesh::uniform(n)?), &Coefficients::default())?);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let yd: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let alpha = rng.gen_range(1e-5..1e-3);
        let prob = ReducedProblem::new(sys.clone(), yd, alpha, (1..n).collect())?;
        let sol = prob.prox_solve(0.0, &vec![0.0; n - 1], ProxOptions::default())?;
        let (hess, b, k) = quadratic_form(&prob)?;
        let oracle = sign_pattern_oracle(&hess, &b, k, alpha).unwrap_or(f64::NAN);
        worst = worst.max((sol.objective - oracle).abs());
    }
    Ok(vec![CheckOutcome::new("oracle N=8", worst <= 1e-8, format!("max objective gap {worst:.3e}"))])
}

pub fn kkt_suite(levels: &[usize], config: &OuterConfig) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for spec in [example1(DEFAULT_ALPHA)?, example2()] {
        for &n in levels {
            let res = spec.solve(n, config)?;
            let tol = 1e-6 * spec.alpha;
            let kkt = res.solution.kkt_residual;
            let passed = res.converged() && kkt <= tol;
            out.push(CheckOutcome::new(
                format!("kkt {} N={n}", spec.name),
                passed,
                format!("residual/alpha {:.3e}, termination {:?}", kkt / spec.alpha, res.termination),
            ));
        }
    }
    Ok(out)
}

pub fn consistency_suite(levels: &[usize]) -> Result<Vec<CheckOutcome>> {
    let spec = example1(DEFAULT_ALPHA)?;
    levels
        .iter()
        .map(|&n| {
            let name = format!("consistency example1 N={n}");
            match verify_example1_consistency(&spec, n) {
                Ok(r) => Ok(CheckOutcome::new(
                    name,
                    true,
                    format!(
                        "adjoint {:.2e}, state {:.2e}, boundary {:.2e}, jumps {:.2e}",
                        r.adjoint_residual, r.state_residual, r.phi_boundary, r.phi_jump_deviation
                    ),
                )),
                Err(e @ Error::ConsistencyFailure { .. }) => Ok(CheckOutcome::new(name, false, e.to_string())),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Every suite of the `check` command.
pub fn run_all(seed: u64, config: &OuterConfig) -> Result<Vec<CheckOutcome>> {
    let mut out = gradient_suite(seed, 20)?;
    out.extend(kkt_suite(&[16, 64, 256], config)?);
    out.extend(consistency_suite(&[64, 1024])?);
    out.extend(oracle_suite(seed, 5)?);
    Ok(out)
}
