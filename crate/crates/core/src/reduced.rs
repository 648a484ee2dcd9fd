//! The finite-dimensional L1 problem over the base value `a` and the jump
//! heights `c` on a fixed set of interior grid nodes:
//!
//! ```text
//! min_{a, c}  ½ ‖y_h(u) − y_d‖²  +  α Σ |c_i|,    u = a + Σ c_i 1_{(x_{t_i}, 1)}
//! ```
//!
//! Variables are packed as `θ = (a, c_1, ..., c_m)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bv_control::{phi_from_p, JumpControl};
use crate::error::{invalid, Error, Result};
use crate::mixed_fem::{MixedSystem, P0Function, P1Function};

/// Heights at or below this magnitude count as "no jump".
pub const ZERO_JUMP: f64 = 1e-10;

/// `sign(v) · max(|v| − λ, 0)`, the proximal map of `λ|·|`.
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOptions {
    /// Stop when the proximal-gradient residual is below `tol · (1 + |f|)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    system: Arc<MixedSystem>,
    yd_cells: Vec<f64>,
    alpha: f64,
    support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub a: f64,
    /// One height per support node; pruned jumps are exactly zero.
    pub c: Vec<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    pub y: P0Function,
    pub p: P0Function,
    pub phi: P1Function,
    pub iterations: usize,
    /// Proximal-gradient residual at the returned point.
    pub prox_residual: f64,
    /// Optimality residual of the full discrete problem, see [`ReducedProblem::optimality_check`].
    pub kkt_residual: f64,
    pub converged: bool,
}

impl ReducedSolution {
    /// Support nodes carrying a nonzero jump, with their heights.
    pub fn active_jumps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support
            .iter()
            .zip(&self.c)
            .filter(|(_, c)| c.abs() > ZERO_JUMP)
            .map(|(&t, &c)| (t, c))
    }

    pub fn control(&self) -> JumpControl {
        let (nodes, heights): (Vec<usize>, Vec<f64>) = self.active_jumps().unzip();
        JumpControl::from_nodes(self.y.mesh(), self.a, &nodes, &heights).expect("support nodes are interior")
    }
}

struct Evaluation {
    smooth: f64,
    y: P0Function,
    p: P0Function,
    phi: P1Function,
    grad: Vec<f64>,
}

impl ReducedProblem {
    pub fn new(system: Arc<MixedSystem>, yd_cells: Vec<f64>, alpha: f64, support: Vec<usize>) -> Result<Self> {
        let n = system.num_cells();
        if yd_cells.len() != n {
            return Err(invalid(format!("expected {n} desired-state cell values, got {}", yd_cells.len())));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        validate_support(&support, n)?;
        Ok(Self { system, yd_cells, alpha, support })
    }

    /// Same data on a different support set.
    pub fn with_support(&self, support: Vec<usize>) -> Result<Self> {
        validate_support(&support, self.system.num_cells())?;
        Ok(Self { support, ..self.clone() })
    }

    pub fn system(&self) -> &Arc<MixedSystem> {
        &self.system
    }

    pub fn yd_cells(&self) -> &[f64] {
        &self.yd_cells
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.support.len() {
            return Err(invalid(format!(
                "expected {} jump heights, got {}",
                self.support.len(),
                c.len()
            )));
        }
        Ok(())
    }

    /// Cell integrals of the step function `a + Σ c_i 1_{(x_{t_i}, 1)}`.
    pub fn control_to_cells(&self, a: f64, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c)?;
        Ok(self.cells_unchecked(a, c))
    }

    fn cells_unchecked(&self, a: f64, c: &[f64]) -> Vec<f64> {
        let mesh = self.system.mesh();
        let mut out = Vec::with_capacity(mesh.num_cells());
        let mut value = a;
        let mut next = 0;
        for (k, h) in mesh.cell_sizes().iter().enumerate() {
            while next < self.support.len() && self.support[next] <= k {
                value += c[next];
                next += 1;
            }
            out.push(value * h);
        }
        out
    }

    fn smooth_part(&self, y: &P0Function) -> f64 {
        let h = self.system.mesh().cell_sizes();
        0.5 * y
            .values()
            .iter()
            .zip(&self.yd_cells)
            .zip(h)
            .map(|((y, yd), h)| h * (y - yd).powi(2))
            .sum::<f64>()
    }

    fn l1_part(&self, c: &[f64]) -> f64 {
        self.alpha * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn objective(&self, a: f64, c: &[f64]) -> Result<f64> {
        self.check_len(c)?;
        let (_, y) = self.system.solve_state(&self.cells_unchecked(a, c))?;
        Ok(self.smooth_part(&y) + self.l1_part(c))
    }

    /// Gradient of the tracking term with respect to `(a, c)`, through the adjoint:
    /// `∂/∂a = Φ(1)` and `∂/∂c_i = Φ(1) − Φ(x_{t_i})` with `Φ = ∫_0^x p_h`.
    pub fn smooth_gradient(&self, a: f64, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(c)?;
        let mut theta = Vec::with_capacity(c.len() + 1);
        theta.push(a);
        theta.extend_from_slice(c);
        let grad = self.evaluate(&theta, true)?.grad;
        Ok((grad[0], grad[1..].to_vec()))
    }

    /// State, adjoint and gradient at `θ`. Without `with_data` the desired
    /// state is dropped, which turns the gradient into a Hessian product.
    fn evaluate(&self, theta: &[f64], with_data: bool) -> Result<Evaluation> {
        let mesh = self.system.mesh();
        let (_, y) = self.system.solve_state(&self.cells_unchecked(theta[0], &theta[1..]))?;
        let r: Vec<f64> = y
            .values()
            .iter()
            .zip(&self.yd_cells)
            .zip(mesh.cell_sizes())
            .map(|((y, yd), h)| if with_data { h * (y - yd) } else { h * y })
            .collect();
        let (_, p) = self.system.solve_adjoint(&r)?;
        let phi = phi_from_p(&p);
        let end = *phi.values().last().unwrap();
        let mut grad = Vec::with_capacity(theta.len());
        grad.push(end);
        grad.extend(self.support.iter().map(|&t| end - phi.values()[t]));
        let smooth = if with_data { self.smooth_part(&y) } else { 0.0 };
        Ok(Evaluation { smooth, y, p, phi, grad })
    }

    fn hessian_product(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(v, false)?.grad)
    }

    /// Largest eigenvalue of the Hessian of the tracking term, by power iteration.
    pub fn lipschitz_estimate(&self, iterations: usize) -> Result<f64> {
        let dim = self.support.len() + 1;
        let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let hv = self.hessian_product(&v)?;
            let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            v = hv.into_iter().map(|x| x / norm).collect();
        }
        Ok(lambda)
    }

    fn prox(&self, theta: &[f64], step: f64) -> Vec<f64> {
        let lambda = self.alpha * step;
        let mut out = Vec::with_capacity(theta.len());
        out.push(theta[0]);
        out.extend(theta[1..].iter().map(|&v| soft_threshold(v, lambda)));
        out
    }

    /// `L · ‖θ − prox(θ − ∇g(θ)/L)‖_∞`, zero exactly at minimizers.
    fn prox_residual(&self, theta: &[f64], grad: &[f64], lip: f64) -> f64 {
        let trial: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t - g / lip).collect();
        let next = self.prox(&trial, 1.0 / lip);
        theta.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max(lip * (a - b).abs()))
    }

    /// Accelerated proximal gradient with momentum restart on objective
    /// increase, interleaved with Newton steps on the detected active set.
    pub fn prox_solve(&self, init_a: f64, init_c: &[f64], opts: ProxOptions) -> Result<ReducedSolution> {
        self.check_len(init_c)?;
        if !(opts.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        let dim = self.support.len() + 1;
        let mut lip = 1.1 * self.lipschitz_estimate(50)?;
        if !(lip > 0.0) || !lip.is_finite() {
            return Err(Error::NumericalFailure(format!("bad Lipschitz estimate {lip}")));
        }

        let mut x: Vec<f64> = std::iter::once(init_a).chain(init_c.iter().copied()).collect();
        let mut eval_x = self.evaluate(&x, true)?;
        let mut f_x = eval_x.smooth + self.l1_part(&x[1..]);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut iters = 0;
        let mut converged = false;
        const CHUNK: usize = 100;

        loop {
            let residual = self.prox_residual(&x, &eval_x.grad, lip);
            if residual <= opts.tol * (1.0 + f_x.abs()) {
                converged = true;
                break;
            }
            if iters >= opts.max_iters {
                break;
            }
            let chunk_end = (iters + CHUNK).min(opts.max_iters);
            while iters < chunk_end {
                iters += 1;
                let eval_y = self.evaluate(&y, true)?;
                let (x_new, eval_new) = loop {
                    let trial: Vec<f64> = y.iter().zip(&eval_y.grad).map(|(v, g)| v - g / lip).collect();
                    let cand = self.prox(&trial, 1.0 / lip);
                    let eval_c = self.evaluate(&cand, true)?;
                    let diff: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
                    let lin: f64 = eval_y.grad.iter().zip(&diff).map(|(g, d)| g * d).sum();
                    let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() * 0.5 * lip;
                    let bound = eval_y.smooth + lin + quad;
                    if eval_c.smooth <= bound + 1e-14 * bound.abs().max(f64::MIN_POSITIVE) {
                        break (cand, eval_c);
                    }
                    lip *= 2.0;
                };
                let f_new = eval_new.smooth + self.l1_part(&x_new[1..]);
                if f_new > f_x {
                    // momentum restart; the next step is a plain proximal step from x
                    t = 1.0;
                    y.clone_from(&x);
                    continue;
                }
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                y = x_new.iter().zip(&x).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
                x = x_new;
                eval_x = eval_new;
                f_x = f_new;
                t = t_next;
                let step_res = self.prox_residual(&x, &eval_x.grad, lip);
                if step_res <= opts.tol * (1.0 + f_x.abs()) {
                    break;
                }
            }
            if let Some((xp, ep, fp)) = self.active_set_step(&x, &eval_x)? {
                if fp <= f_x {
                    x = xp;
                    eval_x = ep;
                    f_x = fp;
                    y.clone_from(&x);
                    t = 1.0;
                }
            }
        }

        let prox_residual = self.prox_residual(&x, &eval_x.grad, lip);
        // drop numerically inactive jumps and recompute everything at the final point
        for c in &mut x[1..] {
            if c.abs() <= ZERO_JUMP {
                *c = 0.0;
            }
        }
        let fin = self.evaluate(&x, true)?;
        let objective = fin.smooth + self.l1_part(&x[1..]);
        let mut sol = ReducedSolution {
            a: x[0],
            c: x[1..].to_vec(),
            support: self.support.clone(),
            objective,
            y: fin.y,
            p: fin.p,
            phi: fin.phi,
            iterations: iters,
            prox_residual,
            kkt_residual: 0.0,
            converged,
        };
        sol.kkt_residual = self.optimality_check(&sol);
        debug_assert!(dim == sol.c.len() + 1);
        Ok(sol)
    }

    /// Newton step for the smooth problem obtained by freezing the signs of the
    /// nonzero heights and the zero heights at zero. The step is shortened at
    /// the first sign change, which then becomes a zero.
    #[allow(clippy::type_complexity)]
    fn active_set_step(&self, x: &[f64], eval_x: &Evaluation) -> Result<Option<(Vec<f64>, Evaluation, f64)>> {
        let active: Vec<usize> = std::iter::once(0)
            .chain((1..x.len()).filter(|&i| x[i] != 0.0))
            .collect();
        let k = active.len();
        let mut hess = DMatrix::zeros(k, k);
        let mut e = vec![0.0; x.len()];
        for (col, &j) in active.iter().enumerate() {
            e[j] = 1.0;
            let hv = self.hessian_product(&e)?;
            e[j] = 0.0;
            for (row, &i) in active.iter().enumerate() {
                hess[(row, col)] = hv[i];
            }
        }
        let rhs = DVector::from_iterator(
            k,
            active.iter().map(|&i| {
                let s = if i == 0 { 0.0 } else { x[i].signum() };
                -(eval_x.grad[i] + self.alpha * s)
            }),
        );
        let hess_sym = 0.5 * (&hess + hess.transpose());
        let delta = match hess_sym.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match hess_sym.lu().solve(&rhs) {
                Some(d) => d,
                None => return Ok(None),
            },
        };
        if delta.iter().any(|d| !d.is_finite()) {
            return Ok(None);
        }
        let mut tau = 1.0;
        let mut blocking = None;
        for (row, &i) in active.iter().enumerate().skip(1) {
            let next = x[i] + delta[row];
            if next.signum() != x[i].signum() || next == 0.0 {
                let ti = -x[i] / delta[row];
                if ti < tau {
                    tau = ti;
                    blocking = Some(i);
                }
            }
        }
        let mut xp = x.to_vec();
        for (row, &i) in active.iter().enumerate() {
            xp[i] += tau * delta[row];
        }
        if let Some(i) = blocking {
            xp[i] = 0.0;
        }
        let ep = self.evaluate(&xp, true)?;
        let fp = ep.smooth + self.l1_part(&xp[1..]);
        Ok(Some((xp, ep, fp)))
    }

    /// Optimality residual of the full discrete problem at `sol`:
    /// the largest of `|Φ(1)|`, the excess of `max_nodes |Φ|` over `α`, and
    /// `|Φ(x_{t_i}) − α sign(c_i)|` over active jumps.
    pub fn optimality_check(&self, sol: &ReducedSolution) -> f64 {
        let phi = sol.phi.values();
        let end = phi.last().copied().unwrap_or(0.0).abs();
        let excess = (sol.phi.max_abs() - self.alpha).max(0.0);
        let jumps = sol
            .active_jumps()
            .map(|(t, c)| (phi[t] - self.alpha * c.signum()).abs())
            .fold(0.0, f64::max);
        end.max(excess).max(jumps)
    }
}

fn validate_support(support: &[usize], n: usize) -> Result<()> {
    let mut prev = 0;
    for &t in support {
        if t <= prev || t >= n {
            return Err(invalid(format!(
                "support must be strictly increasing interior node indices in 1..{n}, got {support:?}"
            )));
        }
        prev = t;
    }
    Ok(())
}
