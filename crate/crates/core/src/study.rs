//! Convergence studies over dyadic grid levels: error columns, experimental
//! orders of convergence, their mean, and least-squares slopes.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic_examples::ExampleSpec;
use crate::bv_control::JumpControl;
use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::GAUSS5;
use crate::support::{OuterConfig, OuterResult, Termination};

pub const COLUMNS: [&str; 5] = ["err_u_l1", "err_u_l2", "err_y_l2", "err_p_linf", "err_phi_linf"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRecord {
    pub h: f64,
    pub err_u_l1: f64,
    pub err_u_l2: f64,
    pub err_y_l2: f64,
    pub err_p_linf: f64,
    pub err_phi_linf: f64,
}

impl StudyRecord {
    pub fn errors(&self) -> [f64; 5] {
        [self.err_u_l1, self.err_u_l2, self.err_y_l2, self.err_p_linf, self.err_phi_linf]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocRow {
    pub h1: f64,
    pub h2: f64,
    pub values: [Option<f64>; 5],
}

/// Per-level solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub n: usize,
    pub converged: bool,
    pub termination: Termination,
    pub outer_iterations: usize,
    pub kkt_residual: f64,
    pub assumption_ok: bool,
    pub control: JumpControl,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub example: String,
    pub records: Vec<StudyRecord>,
    pub eoc: Vec<EocRow>,
    pub mean_eoc: [Option<f64>; 5],
    pub bestfit_slope: [Option<f64>; 5],
    pub levels: Vec<LevelSummary>,
    /// Cell count of the reference solution, for examples without closed form.
    pub reference_n: Option<usize>,
}

/// `log(e1/e2) / log(h1/h2)`; `None` when an error is not positive or `h1 == h2`.
pub fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> Option<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0) || h1 == h2 {
        return None;
    }
    Some((e1 / e2).ln() / (h1 / h2).ln())
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn bestfit_slope(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() {
        return Err(invalid("need one error per grid size"));
    }
    if hs.len() < 2 {
        return Err(invalid("best fit needs at least two points"));
    }
    if hs.iter().chain(errs).any(|&v| !(v > 0.0)) {
        return Err(invalid("grid sizes and errors must be positive"));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("grid sizes must not all coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Errors of a discrete solution against the closed-form solution of `spec`.
pub fn errors_vs_exact(spec: &ExampleSpec, result: &OuterResult) -> Result<StudyRecord> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| invalid(format!("{} has no closed-form solution", spec.name)))?;
    let sol = &result.solution;
    let mesh = result.mesh();
    let u_h = sol.control();

    let mut y_sq = 0.0;
    let mut p_max = 0.0f64;
    let mut phi_max = 0.0f64;
    for k in 0..mesh.num_cells() {
        let (l, r) = mesh.cell(k);
        let (yk, pk) = (sol.y.values()[k], sol.p.values()[k]);
        for (x, w) in GAUSS5.on(l, r) {
            y_sq += w * ((exact.y_bar)(x) - yk).powi(2);
            p_max = p_max.max(((exact.p_bar)(x) - pk).abs());
            phi_max = phi_max.max(((exact.phi_bar)(x) - sol.phi.evaluate(x)).abs());
        }
        p_max = p_max.max(((exact.p_bar)(mesh.midpoint(k)) - pk).abs());
    }
    for (i, &x) in mesh.nodes().iter().enumerate() {
        phi_max = phi_max.max(((exact.phi_bar)(x) - sol.phi.values()[i]).abs());
    }
    Ok(StudyRecord {
        h: mesh.h_max(),
        err_u_l1: u_h.l1_distance(&exact.u_bar),
        err_u_l2: u_h.l2_distance(&exact.u_bar),
        err_y_l2: y_sq.sqrt(),
        err_p_linf: p_max,
        err_phi_linf: phi_max,
    })
}

/// Errors of a discrete solution against a solution on a nested finer mesh.
pub fn errors_vs_reference(reference: &OuterResult, result: &OuterResult) -> Result<StudyRecord> {
    let coarse = result.mesh();
    let fine = reference.mesh();
    let parents = coarse.parent_map(fine)?;
    let (rs, cs) = (&reference.solution, &result.solution);
    let mut y_sq = 0.0;
    let mut p_max = 0.0f64;
    for (f, &k) in parents.iter().enumerate() {
        let h = fine.cell_sizes()[f];
        y_sq += h * (cs.y.values()[k] - rs.y.values()[f]).powi(2);
        p_max = p_max.max((cs.p.values()[k] - rs.p.values()[f]).abs());
    }
    // both multipliers are linear on every fine cell
    let phi_max = fine
        .nodes()
        .iter()
        .zip(rs.phi.values())
        .map(|(&x, &v)| (cs.phi.evaluate(x) - v).abs())
        .fold(0.0, f64::max);
    let (u_ref, u_h) = (rs.control(), cs.control());
    Ok(StudyRecord {
        h: coarse.h_max(),
        err_u_l1: u_h.l1_distance(&u_ref),
        err_u_l2: u_h.l2_distance(&u_ref),
        err_y_l2: y_sq.sqrt(),
        err_p_linf: p_max,
        err_phi_linf: phi_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Inclusive range of exponents `k`, one level per `N = 2^k`.
    pub levels: (u32, u32),
    /// Exponent of the reference mesh for examples without closed form.
    pub reference_level: u32,
    pub outer: OuterConfig,
    /// Worker threads for solving levels.
    pub jobs: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { levels: (2, 11), reference_level: 10, outer: OuterConfig::default(), jobs: 1 }
    }
}

pub const MIN_LEVEL: u32 = 2;
pub const MAX_LEVEL: u32 = 12;

fn solve_levels(spec: &ExampleSpec, ns: &[usize], options: &StudyOptions) -> Result<Vec<OuterResult>> {
    let run = || ns.par_iter().map(|&n| spec.solve(n, &options.outer)).collect::<Result<Vec<_>>>();
    if options.jobs <= 1 {
        ns.iter().map(|&n| spec.solve(n, &options.outer)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?
            .install(run)
    }
}

/// Solves all levels, measures errors and assembles the convergence table.
pub fn run_study(spec: &ExampleSpec, options: &StudyOptions) -> Result<StudyReport> {
    let (lo, hi) = options.levels;
    if lo > hi || lo < MIN_LEVEL || hi > MAX_LEVEL {
        return Err(invalid(format!(
            "levels {lo}:{hi} must satisfy {MIN_LEVEL} <= lo <= hi <= {MAX_LEVEL}"
        )));
    }
    let needs_reference = spec.exact.is_none();
    if needs_reference && (options.reference_level > MAX_LEVEL || hi + 2 > options.reference_level) {
        return Err(invalid(format!(
            "reference level {} must be at most {MAX_LEVEL} and at least two levels above {hi}",
            options.reference_level
        )));
    }
    let ns: Vec<usize> = (lo..=hi).map(|k| 1usize << k).collect();
    let mut to_solve = ns.clone();
    if needs_reference {
        to_solve.push(1usize << options.reference_level);
    }
    let mut results = solve_levels(spec, &to_solve, options)?;
    let reference = if needs_reference { results.pop() } else { None };

    let records = results
        .iter()
        .map(|res| match &reference {
            Some(r) => errors_vs_reference(r, res),
            None => errors_vs_exact(spec, res),
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = ns
        .iter()
        .zip(&results)
        .map(|(&n, r)| LevelSummary {
            n,
            converged: r.converged(),
            termination: r.termination,
            outer_iterations: r.outer_iterations,
            kkt_residual: r.solution.kkt_residual,
            assumption_ok: r.assumption_ok,
            control: r.solution.control(),
        })
        .collect();
    Ok(assemble_report(spec.name.clone(), records, levels, reference.map(|r| r.mesh().num_cells())))
}

/// EOC rows, means and best-fit slopes for a list of records ordered from coarse to fine.
pub fn assemble_report(
    example: String,
    records: Vec<StudyRecord>,
    levels: Vec<LevelSummary>,
    reference_n: Option<usize>,
) -> StudyReport {
    let eoc_rows: Vec<EocRow> = records
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].errors(), w[1].errors());
            EocRow { h1: w[0].h, h2: w[1].h, values: std::array::from_fn(|c| eoc(a[c], b[c], w[0].h, w[1].h)) }
        })
        .collect();
    let mean_eoc = std::array::from_fn(|c| {
        let vals: Vec<f64> = eoc_rows.iter().filter_map(|r| r.values[c]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    });
    let bestfit = std::array::from_fn(|c| {
        let (hs, es): (Vec<f64>, Vec<f64>) = records
            .iter()
            .map(|r| (r.h, r.errors()[c]))
            .filter(|&(_, e)| e > 0.0)
            .unzip();
        bestfit_slope(&hs, &es).ok()
    });
    StudyReport { example, records, eoc: eoc_rows, mean_eoc, bestfit_slope: bestfit, levels, reference_n }
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, 6)).unwrap_or_default()
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "h,{}", COLUMNS.join(","));
        for r in &self.records {
            let cols: Vec<String> = std::iter::once(r.h).chain(r.errors()).map(|v| format_sig(v, 6)).collect();
            let _ = writeln!(out, "{}", cols.join(","));
        }
        let _ = writeln!(out, "# eoc");
        for row in &self.eoc {
            let vals: Vec<String> = row.values.iter().map(|v| fmt_opt(*v)).collect();
            let _ = writeln!(out, "{},{},{}", format_sig(row.h1, 6), format_sig(row.h2, 6), vals.join(","));
        }
        let mean: Vec<String> = self.mean_eoc.iter().map(|v| fmt_opt(*v)).collect();
        let _ = writeln!(out, "# mean,{}", mean.join(","));
        let fit: Vec<String> = self.bestfit_slope.iter().map(|v| fmt_opt(*v)).collect();
        let _ = writeln!(out, "# bestfit,{}", fit.join(","));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn all_converged(&self) -> bool {
        self.levels.iter().all(|l| l.converged)
    }
}

/// Convenience for tests and the CLI: nested uniform meshes for the given exponents.
pub fn dyadic_meshes(levels: (u32, u32)) -> Result<Vec<Arc<Mesh>>> {
    (levels.0..=levels.1).map(|k| Mesh::uniform(1usize << k).map(Arc::new)).collect()
}
