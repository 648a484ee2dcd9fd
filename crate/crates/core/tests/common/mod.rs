//! Reference computations that share no code with the library's solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Dense saddle-point solve of the lowest-order mixed scheme with constant
/// coefficients: `A z + B y = 0`, `−Bᵀ z + D y = u` on the given nodes.
pub fn dense_state(nodes: &[f64], a: f64, d: f64, u_cells: &[f64]) -> Vec<f64> {
    let n = nodes.len() - 1;
    let dim = 2 * n + 1;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..n {
        let h = nodes[k + 1] - nodes[k];
        // flux mass on cell k
        m[(k, k)] += h / (3.0 * a);
        m[(k + 1, k + 1)] += h / (3.0 * a);
        m[(k, k + 1)] += h / (6.0 * a);
        m[(k + 1, k)] += h / (6.0 * a);
        // divergence coupling: ∫ e_i' over cell k
        let row = n + 1 + k;
        m[(k, row)] = -1.0;
        m[(k + 1, row)] = 1.0;
        m[(row, k)] = 1.0;
        m[(row, k + 1)] = -1.0;
        m[(row, row)] = d * h;
    }
    let mut rhs = DVector::zeros(dim);
    for k in 0..n {
        rhs[n + 1 + k] = u_cells[k];
    }
    let sol = m.lu().solve(&rhs).expect("block system is regular");
    sol.rows(n + 1, n).iter().copied().collect()
}

/// Cell integrals of `a + Σ_i c_i 1_{(x_{t_i}, 1)}` for node indices `t_i`.
pub fn step_cells(nodes: &[f64], support: &[usize], a: f64, c: &[f64]) -> Vec<f64> {
    (0..nodes.len() - 1)
        .map(|k| {
            let v = a + support.iter().zip(c).filter(|(&t, _)| t <= k).map(|(_, &ci)| ci).sum::<f64>();
            v * (nodes[k + 1] - nodes[k])
        })
        .collect()
}

/// `½ Σ h_k (y_k − yd_k)²` with the state from [`dense_state`].
pub fn dense_tracking(nodes: &[f64], yd: &[f64], support: &[usize], a: f64, c: &[f64]) -> f64 {
    let y = dense_state(nodes, 1.0, 0.0, &step_cells(nodes, support, a, c));
    (0..yd.len())
        .map(|k| 0.5 * (nodes[k + 1] - nodes[k]) * (y[k] - yd[k]).powi(2))
        .sum()
}

/// Hessian, linear term and constant of the tracking functional in `(a, c)`.
pub fn dense_quadratic(nodes: &[f64], yd: &[f64], support: &[usize]) -> (DMatrix<f64>, DVector<f64>, f64) {
    let n = nodes.len() - 1;
    let dim = support.len() + 1;
    let mut g = DMatrix::zeros(n, dim);
    for j in 0..dim {
        let mut theta = vec![0.0; dim];
        theta[j] = 1.0;
        let y = dense_state(nodes, 1.0, 0.0, &step_cells(nodes, support, theta[0], &theta[1..]));
        for k in 0..n {
            g[(k, j)] = y[k];
        }
    }
    let w = DMatrix::from_fn(n, n, |r, c| if r == c { nodes[r + 1] - nodes[r] } else { 0.0 });
    let ydv = DVector::from_column_slice(yd);
    let hess = g.transpose() * &w * &g;
    let b = g.transpose() * &w * &ydv;
    (hess, b, 0.5 * ydv.dot(&(&w * &ydv)))
}

/// Exhaustive minimization over the sign patterns of the jump heights: on
/// each pattern the objective is a smooth quadratic in the free variables.
pub fn brute_force_minimum(hess: &DMatrix<f64>, b: &DVector<f64>, k: f64, alpha: f64) -> f64 {
    let m = hess.nrows() - 1;
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(m as u32) {
        let signs: Vec<f64> = (0..m).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
        let free: Vec<usize> = (0..=m).filter(|&i| i == 0 || signs[i - 1] != 0.0).collect();
        let hf = DMatrix::from_fn(free.len(), free.len(), |r, c| hess[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            if i == 0 { b[0] } else { b[i] - alpha * signs[i - 1] }
        });
        let Some(x) = hf.lu().solve(&rhs) else { continue };
        if free.iter().zip(x.iter()).any(|(&i, &v)| i > 0 && v * signs[i - 1] < 0.0) {
            continue;
        }
        let mut theta = DVector::zeros(m + 1);
        for (&i, &v) in free.iter().zip(x.iter()) {
            theta[i] = v;
        }
        let l1: f64 = theta.iter().skip(1).map(|v| v.abs()).sum();
        best = best.min(0.5 * theta.dot(&(hess * &theta)) - b.dot(&theta) + k + alpha * l1);
    }
    best
}

/// Five-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss5() -> [(f64, f64); 5] {
    let r = [
        (0.0, 128.0 / 225.0),
        ((5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 + 13.0 * 70f64.sqrt()) / 900.0),
        ((5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
    ];
    [
        (0.5 - 0.5 * r[2].0, 0.5 * r[2].1),
        (0.5 - 0.5 * r[1].0, 0.5 * r[1].1),
        (0.5, 0.5 * r[0].1),
        (0.5 + 0.5 * r[1].0, 0.5 * r[1].1),
        (0.5 + 0.5 * r[2].0, 0.5 * r[2].1),
    ]
}

/// Least-squares slope of `log e` against `log h`.
pub fn loglog_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Random strictly increasing mesh on `[0, 1]` with `n` cells.
pub fn random_nodes(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let mut nodes = vec![0.0];
    for v in &w[..n - 1] {
        nodes.push(nodes.last().unwrap() + v);
    }
    nodes.push(1.0);
    nodes
}
