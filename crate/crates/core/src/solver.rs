//! Log-barrier interior-point solver for [`ConvexProgram`].
//!
//! The method is the textbook one: a phase-I problem (minimize the largest
//! constraint violation) finds a strictly feasible point, then a sequence of
//! Newton-centred barrier problems `t·cᵀx − Σ log(−f_i(x)) − Σ log x_j` is
//! solved for `t = t0, μ·t0, μ²·t0, …` until the surrogate duality gap
//! `m/t` drops below tolerance. Dual multipliers are read off the central
//! path as `λ_i = 1/(t·(−f_i))`.
//!
//! Rows with a log term also carry `−log(γ + g·x)`. Together with
//! `−log(−f_i)` this is the self-concordant barrier of the hypograph of the
//! logarithm, without which damped Newton can crawl for hundreds of steps.
//! Each such row counts twice in `m`.
//!
//! Variables pinned to zero by constraints of the form `a·x ≤ 0` with
//! `a ≥ 0` are removed before the barrier is formed, since such programs have
//! no strict interior.

use std::fmt::Write as _;

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::program::{dot, Constraint, ConvexProgram, LogTerm};

const LN2: f64 = std::f64::consts::LN_2;

/// Numerical knobs for [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    /// Cap on barrier (outer) iterations.
    pub max_outer: usize,
    /// Cap on Newton steps per centring.
    pub max_newton: usize,
    pub t0: f64,
    pub mu: f64,
    /// Armijo fraction.
    pub alpha: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Centring stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            gap_tol: 1e-6,
            max_outer: 200,
            max_newton: 500,
            t0: 1.0,
            mu: 10.0,
            alpha: 0.25,
            beta: 0.5,
            newton_tol: 1e-10,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feasibility_tol", self.feasibility_tol),
            ("gap_tol", self.gap_tol),
            ("t0", self.t0),
            ("newton_tol", self.newton_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive")));
            }
        }
        if !(self.mu > 1.0) {
            return Err(Error::Argument("barrier growth mu must exceed 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Argument("line-search alpha must lie in (0, 0.5)".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Argument("line-search beta must lie in (0, 1)".into()));
        }
        if self.max_outer == 0 || self.max_newton == 0 {
            return Err(Error::Argument("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Feasibility,
    Barrier,
}

/// One row of the optional iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub phase: Phase,
    pub outer: usize,
    pub newton_steps: usize,
    pub t: f64,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per program constraint.
    pub duals: Vec<f64>,
    /// Multipliers of the implicit bounds `x ≥ 0`.
    pub bound_duals: Vec<f64>,
    pub newton_steps: usize,
    pub outer_iterations: usize,
    pub gap: f64,
    /// Objective at the end of each barrier centring.
    pub objective_history: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl SolverResult {
    fn failed(status: SolveStatus, n: usize, m: usize) -> Self {
        SolverResult {
            status,
            x: vec![0.0; n],
            objective: f64::NAN,
            duals: vec![0.0; m],
            bound_duals: vec![0.0; n],
            newton_steps: 0,
            outer_iterations: 0,
            gap: f64::INFINITY,
            objective_history: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Trace as semicolon-separated text with a header line.
    pub fn trace_text(&self) -> String {
        let mut out = String::from("phase;outer;newton;t;objective;gap\n");
        for r in &self.trace {
            let phase = match r.phase {
                Phase::Feasibility => "I",
                Phase::Barrier => "II",
            };
            let _ = writeln!(
                out,
                "{phase};{};{};{:.3e};{:.10e};{:.3e}",
                r.outer, r.newton_steps, r.t, r.objective, r.gap
            );
        }
        out
    }
}

/// Free variables and surviving constraints after pinning forced zeros.
#[derive(Debug, Clone)]
struct Reduction {
    free: Vec<usize>,
    fixed: Vec<bool>,
    /// Constraint that pinned each fixed variable.
    pinned_by: Vec<Option<usize>>,
    active: Vec<usize>,
}

fn presolve(prog: &ConvexProgram, tol: f64) -> Result<Reduction> {
    let n = prog.num_vars();
    let mut fixed = vec![false; n];
    let mut pinned_by = vec![None; n];
    loop {
        let mut changed = false;
        for (ci, c) in prog.constraints.iter().enumerate() {
            let log_live = c
                .log
                .as_ref()
                .map_or(false, |l| l.slope.iter().any(|&(j, g)| g > 0.0 && !fixed[j]));
            if log_live {
                continue;
            }
            let live: Vec<(usize, f64)> = c
                .linear
                .iter()
                .copied()
                .filter(|&(j, a)| a != 0.0 && !fixed[j])
                .collect();
            if live.iter().any(|&(_, a)| a < 0.0) {
                continue;
            }
            if c.offset > tol {
                return Err(Error::Infeasible(format!(
                    "constraint {} cannot hold for nonnegative variables",
                    c.tag
                )));
            }
            if c.offset > -tol {
                for (j, _) in live {
                    fixed[j] = true;
                    pinned_by[j] = Some(ci);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let active = prog
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.variables().any(|j| !fixed[j]))
        .map(|(i, _)| i)
        .collect();
    for c in &prog.constraints {
        if c.variables().all(|j| fixed[j]) && c.offset > tol {
            return Err(Error::Infeasible(format!("constraint {} violated", c.tag)));
        }
    }
    let free = (0..n).filter(|&j| !fixed[j]).collect();
    Ok(Reduction { free, fixed, pinned_by, active })
}

/// A smooth barrier in reduced coordinates.
trait Barrier {
    fn dim(&self) -> usize;
    /// `None` outside the domain.
    fn value(&self, z: &[f64]) -> Option<f64>;
    fn grad_hess(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

/// Surviving constraints re-indexed onto the free variables. Pinned
/// variables are zero, so they simply drop out of every row.
struct Compact {
    free: Vec<usize>,
    /// Unit of each free variable: the solver works in `z = x / unit`.
    unit: Vec<f64>,
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Constraint>,
}

impl Compact {
    fn new(prog: &ConvexProgram, red: &Reduction, unit: &[f64]) -> Self {
        let mut pos = vec![usize::MAX; prog.num_vars()];
        for (k, &j) in red.free.iter().enumerate() {
            pos[j] = k;
        }
        let remap = |v: &[(usize, f64)]| -> Vec<(usize, f64)> {
            v.iter().filter(|&&(j, _)| pos[j] != usize::MAX).map(|&(j, a)| (pos[j], a * unit[j])).collect()
        };
        let rows = red
            .active
            .iter()
            .map(|&i| {
                let c = &prog.constraints[i];
                Constraint {
                    tag: c.tag,
                    linear: remap(&c.linear),
                    offset: c.offset,
                    log: c.log.as_ref().map(|l| LogTerm {
                        gamma: l.gamma,
                        slope: remap(&l.slope),
                        scale: l.scale,
                    }),
                }
            })
            .collect();
        Compact {
            objective: red.free.iter().map(|&j| prog.objective[j] * unit[j]).collect(),
            unit: red.free.iter().map(|&j| unit[j]).collect(),
            free: red.free.clone(),
            num_vars: prog.num_vars(),
            rows,
        }
    }

    fn dim(&self) -> usize {
        self.free.len()
    }

    fn expand(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars];
        for (k, &j) in self.free.iter().enumerate() {
            x[j] = z[k] * self.unit[k];
        }
        x
    }

    fn reduce(&self, x: &[f64]) -> Vec<f64> {
        self.free.iter().zip(&self.unit).map(|(&j, u)| x[j] / u).collect()
    }

    fn max_violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|c| if c.in_domain(z) { c.value(z) } else { f64::INFINITY })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds the gradient and Hessian of `−log(shift − f(z))` for every row.
    fn accumulate(&self, z: &[f64], shift: f64, extra: Option<usize>, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        let mut grad: Vec<(usize, f64)> = Vec::new();
        for c in &self.rows {
            let slack = shift - c.value(z);
            grad.clear();
            grad.extend(c.linear.iter().copied());
            if let Some(l) = &c.log {
                let w = l.scale / (LN2 * (l.gamma + dot(&l.slope, z)));
                grad.extend(l.slope.iter().map(|&(j, s)| (j, -w * s)));
            }
            if let Some(k) = extra {
                grad.push((k, -1.0));
            }
            let inv = 1.0 / slack;
            for &(j, a) in &grad {
                g[j] += inv * a;
            }
            let inv2 = inv * inv;
            for &(j, a) in &grad {
                for &(k, b) in &grad {
                    h[(j, k)] += inv2 * a * b;
                }
            }
            if let Some(l) = &c.log {
                // Companion term −log(γ + g·z) of the hypograph barrier.
                let y = l.gamma + dot(&l.slope, z);
                let kappa = c.curvature(z) * inv + 1.0 / (y * y);
                for &(j, a) in &l.slope {
                    g[j] -= a / y;
                    for &(k, b) in &l.slope {
                        h[(j, k)] += kappa * a * b;
                    }
                }
            }
        }
    }

    /// Barrier parameter contributed by the rows.
    fn weight(&self) -> f64 {
        self.rows.iter().map(|c| if c.log.is_some() { 2.0 } else { 1.0 }).sum()
    }

    fn log_barrier(&self, z: &[f64], shift: f64) -> Option<f64> {
        let mut v = 0.0;
        for c in &self.rows {
            if !c.in_domain(z) {
                return None;
            }
            let slack = shift - c.value(z);
            if !(slack > 0.0) {
                return None;
            }
            v -= slack.ln();
            if let Some(l) = &c.log {
                v -= (l.gamma + dot(&l.slope, z)).ln();
            }
        }
        Some(v)
    }
}

/// `t·cᵀx − Σ log(shift − f_i) − Σ log x_j`.
struct CentralPath<'a> {
    cp: &'a Compact,
    t: f64,
    shift: f64,
}

impl Barrier for CentralPath<'_> {
    fn dim(&self) -> usize {
        self.cp.dim()
    }

    fn value(&self, z: &[f64]) -> Option<f64> {
        if z.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let mut v = self.t * self.cp.objective.iter().zip(z).map(|(c, x)| c * x).sum::<f64>();
        v += self.cp.log_barrier(z, self.shift)?;
        v -= z.iter().map(|v| v.ln()).sum::<f64>();
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let nf = self.dim();
        let mut g = DVector::zeros(nf);
        let mut h = DMatrix::zeros(nf, nf);
        for k in 0..nf {
            g[k] = self.t * self.cp.objective[k] - 1.0 / z[k];
            h[(k, k)] = 1.0 / (z[k] * z[k]);
        }
        self.cp.accumulate(z, self.shift, None, &mut g, &mut h);
        (g, h)
    }
}

/// Phase-I barrier over `(x, s)`: `t·s + Σ x_j − Σ log(s − f_i) − Σ log x_j`.
/// The linear term keeps the barrier bounded below when some variable has no
/// upper bound.
struct FeasibilityPath<'a> {
    cp: &'a Compact,
    t: f64,
}

impl Barrier for FeasibilityPath<'_> {
    fn dim(&self) -> usize {
        self.cp.dim() + 1
    }

    fn value(&self, z: &[f64]) -> Option<f64> {
        let nf = self.cp.dim();
        let (xz, s) = (&z[..nf], z[nf]);
        if xz.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let mut v = self.t * s + xz.iter().sum::<f64>();
        v += self.cp.log_barrier(xz, s)?;
        v -= xz.iter().map(|v| v.ln()).sum::<f64>();
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let nf = d - 1;
        let (xz, s) = (&z[..nf], z[nf]);
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for k in 0..nf {
            g[k] = 1.0 - 1.0 / xz[k];
            h[(k, k)] = 1.0 / (xz[k] * xz[k]);
        }
        g[nf] = self.t;
        // Rows see `s − f(x)`; the extra coordinate enters with slope −1.
        let mut zx = xz.to_vec();
        zx.push(s);
        self.cp.accumulate_shifted(&zx, nf, &mut g, &mut h);
        (g, h)
    }
}

impl Compact {
    /// As [`accumulate`](Self::accumulate) with the shift taken from `z[k]`.
    fn accumulate_shifted(&self, z: &[f64], k: usize, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        self.accumulate(&z[..k], z[k], Some(k), g, h);
    }
}

fn newton_direction(g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -g;
    if let Some(ch) = h.clone().cholesky() {
        let d = ch.solve(&neg);
        if d.iter().all(|v| v.is_finite()) {
            return Some(d);
        }
    }
    let n = h.nrows();
    let scale = (0..n).map(|k| h[(k, k)].abs()).fold(0.0, f64::max).max(1.0);
    let mut reg = h.clone();
    for k in 0..n {
        reg[(k, k)] += 1e-12 * scale;
    }
    if let Some(ch) = reg.cholesky() {
        let d = ch.solve(&neg);
        if d.iter().all(|v| v.is_finite()) {
            return Some(d);
        }
    }
    h.lu().solve(&neg).filter(|d| d.iter().all(|v| v.is_finite()))
}

/// Half squared Newton decrement below which full steps are taken.
const PURE_NEWTON_DECREMENT: f64 = 0.02;

enum CenterOutcome {
    Centered(usize),
    Stalled(usize),
    Failed,
}

/// Damped Newton on `b` from `z`. `stop` is checked after every step.
fn center(
    b: &dyn Barrier,
    z: &mut Vec<f64>,
    opt: &SolverOptions,
    stop: &dyn Fn(&[f64]) -> bool,
) -> CenterOutcome {
    let Some(mut fz) = b.value(z) else {
        return CenterOutcome::Failed;
    };
    let mut last_pure: Option<f64> = None;
    for step in 0..opt.max_newton {
        let (g, h) = b.grad_hess(z);
        if g.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return CenterOutcome::Failed;
        }
        let Some(dz) = newton_direction(&g, h) else {
            return CenterOutcome::Failed;
        };
        let slope = g.dot(&dz);
        let dec = -slope / 2.0;
        if dec <= opt.newton_tol {
            return CenterOutcome::Centered(step);
        }
        // Near the centre full steps converge quadratically, which needs no
        // comparison of `f` values (those carry rounding noise far above
        // 1e-16·|f| at large t). Stop once the decrement no longer shrinks.
        if dec <= PURE_NEWTON_DECREMENT {
            if last_pure.is_some_and(|prev| dec >= 0.5 * prev) {
                return CenterOutcome::Centered(step);
            }
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + d).collect();
            if let Some(ft) = b.value(&trial) {
                *z = trial;
                fz = ft;
                last_pure = Some(dec);
                if stop(z) {
                    return CenterOutcome::Centered(step + 1);
                }
                continue;
            }
        }
        let mut s = 1.0;
        let mut accepted = None;
        while s > 1e-18 {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + s * d).collect();
            if -s * slope < 1e-15 * fz.abs() {
                // The predicted decrease is below what `f` can resolve.
                return CenterOutcome::Centered(step);
            }
            if let Some(ft) = b.value(&trial) {
                if ft <= fz + opt.alpha * s * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            s *= opt.beta;
        }
        match accepted {
            Some((trial, ft)) => {
                *z = trial;
                fz = ft;
            }
            None => return CenterOutcome::Stalled(step),
        }
        if stop(z) {
            return CenterOutcome::Centered(step + 1);
        }
    }
    CenterOutcome::Stalled(opt.max_newton)
}

/// Solves `prog` to the tolerances in `opt`. Deterministic.
pub fn solve(prog: &ConvexProgram, opt: &SolverOptions) -> Result<SolverResult> {
    solve_scaled(prog, opt, &vec![1.0; prog.num_vars()], opt.max_outer)
}

/// As [`solve`], with the search started near `hint`. Each variable is
/// measured in units of its hint value (zeros get a small share of the
/// largest entry), which leaves the central path unchanged and lets phase I
/// begin at the hint instead of at all ones.
pub fn solve_from(prog: &ConvexProgram, opt: &SolverOptions, hint: &[f64]) -> Result<SolverResult> {
    if hint.len() != prog.num_vars() {
        return Err(Error::Shape(format!("hint has {} entries, program has {} variables", hint.len(), prog.num_vars())));
    }
    let top = hint.iter().copied().filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
    let floor = (1e-6 * top).max(1e-12);
    let unit: Vec<f64> = hint.iter().map(|&v| if v.is_finite() && v > floor { v } else { floor }).collect();
    solve_scaled(prog, opt, &unit, opt.max_outer)
}

/// `phase_two_outer` caps the barrier iterations after feasibility.
fn solve_scaled(
    prog: &ConvexProgram,
    opt: &SolverOptions,
    unit: &[f64],
    phase_two_outer: usize,
) -> Result<SolverResult> {
    opt.validate()?;
    prog.audit()?;
    let n = prog.num_vars();
    let m = prog.constraints.len();
    let red = match presolve(prog, opt.feasibility_tol) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            debug!("presolve: {msg}");
            return Ok(SolverResult::failed(SolveStatus::Infeasible, n, m));
        }
        Err(e) => return Err(e),
    };
    let cp = Compact::new(prog, &red, unit);
    let nf = cp.dim();
    let mut trace = Vec::new();
    let mut newton_total = 0;

    // Phase I.
    let mut z: Vec<f64> = vec![1.0; nf];
    let mut shift = 0.0;
    let v0 = cp.max_violation(&z);
    if v0 >= 0.0 {
        let mut zs = z.clone();
        zs.push(v0.max(0.0) + 1.0);
        let m1 = cp.weight() + nf as f64;
        let mut t = opt.t0;
        let mut found = false;
        let mut phase_one_value = f64::INFINITY;
        for outer in 0..opt.max_outer {
            let path = FeasibilityPath { cp: &cp, t };
            let stop = |zz: &[f64]| cp.max_violation(&zz[..nf]) < 0.0;
            let outcome = center(&path, &mut zs, opt, &stop);
            let steps = match outcome {
                CenterOutcome::Centered(k) | CenterOutcome::Stalled(k) => k,
                CenterOutcome::Failed => {
                    return Ok(SolverResult::failed(SolveStatus::NumericFailure, n, m));
                }
            };
            newton_total += steps;
            phase_one_value = cp.max_violation(&zs[..nf]);
            if opt.trace {
                trace.push(TraceRow {
                    phase: Phase::Feasibility,
                    outer,
                    newton_steps: steps,
                    t,
                    objective: phase_one_value,
                    gap: m1 / t,
                });
            }
            if phase_one_value < 0.0 {
                found = true;
                break;
            }
            if m1 / t < opt.gap_tol {
                break;
            }
            t *= opt.mu;
        }
        if !found {
            if phase_one_value > opt.feasibility_tol || !phase_one_value.is_finite() {
                debug!("phase I optimum {phase_one_value:.3e} exceeds tolerance");
                let mut r = SolverResult::failed(SolveStatus::Infeasible, n, m);
                r.trace = trace;
                r.newton_steps = newton_total;
                return Ok(r);
            }
            shift = opt.feasibility_tol;
        }
        zs.pop();
        z = zs;
    }

    // Phase II.
    let m2 = cp.weight() + nf as f64;
    // Start no further along the path than where the barrier and the
    // objective carry similar weight, so the first centring stays short.
    let cx: f64 = cp.objective.iter().zip(&z).map(|(c, v)| c * v).sum();
    let mut t = if cx > 0.0 { opt.t0.min(m2 / cx) } else { opt.t0 };
    let mut status = SolveStatus::MaxIter;
    let mut history = Vec::new();
    let mut outer_done = 0;
    for outer in 0..phase_two_outer {
        let path = CentralPath { cp: &cp, t, shift };
        let outcome = center(&path, &mut z, opt, &|_| false);
        let (steps, centered) = match outcome {
            CenterOutcome::Centered(k) => (k, true),
            CenterOutcome::Stalled(k) => (k, false),
            CenterOutcome::Failed => {
                status = SolveStatus::NumericFailure;
                break;
            }
        };
        newton_total += steps;
        outer_done = outer + 1;
        let x = cp.expand(&z);
        let obj = prog.objective_value(&x);
        if !obj.is_finite() {
            status = SolveStatus::NumericFailure;
            break;
        }
        history.push(obj);
        if opt.trace {
            trace.push(TraceRow {
                phase: Phase::Barrier,
                outer,
                newton_steps: steps,
                t,
                objective: obj,
                gap: m2 / t,
            });
        }
        if m2 / t < opt.gap_tol {
            // A stalled last centring leaves the gap estimate unfounded.
            if centered {
                status = SolveStatus::Optimal;
            }
            break;
        }
        t *= opt.mu;
    }

    let x = cp.expand(&z);
    let mut duals = vec![0.0; m];
    for &i in &red.active {
        let slack = shift - prog.constraints[i].value(&x);
        duals[i] = 1.0 / (t * slack);
    }
    let mut bound_duals = vec![0.0; n];
    for &j in &red.free {
        bound_duals[j] = 1.0 / (t * x[j]);
    }
    recover_pinned_duals(prog, &red, &x, &mut duals, &mut bound_duals);
    Ok(SolverResult {
        status,
        objective: prog.objective_value(&x),
        x,
        duals,
        bound_duals,
        newton_steps: newton_total,
        outer_iterations: outer_done,
        gap: m2 / t,
        objective_history: history,
        trace,
    })
}

/// Splits the reduced cost of every pinned variable between its pinning
/// constraint (negative part) and its bound multiplier (positive part).
fn recover_pinned_duals(
    prog: &ConvexProgram,
    red: &Reduction,
    x: &[f64],
    duals: &mut [f64],
    bound_duals: &mut [f64],
) {
    let mut reduced = prog.objective.clone();
    for &i in &red.active {
        prog.constraints[i].add_gradient(x, duals[i], &mut reduced);
    }
    for j in 0..prog.num_vars() {
        if !red.fixed[j] {
            continue;
        }
        let pin = red.pinned_by[j].expect("fixed variable has a pinning constraint");
        let coef = prog.constraints[pin]
            .linear
            .iter()
            .filter(|&&(k, _)| k == j)
            .map(|&(_, a)| a)
            .sum::<f64>();
        let r = reduced[j] + duals[pin] * coef;
        if r < 0.0 && coef > 0.0 {
            let extra = -r / coef;
            duals[pin] += extra;
            for &(k, a) in &prog.constraints[pin].linear {
                reduced[k] += extra * a;
            }
        } else {
            bound_duals[j] = r.max(0.0);
        }
    }
    for j in 0..prog.num_vars() {
        if red.fixed[j] {
            bound_duals[j] = reduced[j].max(0.0);
        }
    }
}

/// Optimality certificates of a solved program.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    /// Surrogate duality gap `m/t`.
    pub gap: f64,
    /// `λ_i·(−f_i(x))` per constraint.
    pub complementary: Vec<f64>,
    pub max_complementary: f64,
    /// ∞-norm of `c + Σ λ_i ∇f_i − ν`.
    pub stationarity: f64,
    /// `stationarity / max(1, ‖c‖∞)`.
    pub scaled_stationarity: f64,
    pub min_dual: f64,
}

/// KKT residuals of `res` for `prog`.
pub fn duality_report(prog: &ConvexProgram, res: &SolverResult) -> Result<DualityReport> {
    if res.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("status {:?} is not optimal", res.status)));
    }
    let x = &res.x;
    let complementary: Vec<f64> = prog
        .constraints
        .iter()
        .zip(&res.duals)
        .map(|(c, &l)| (l * -c.value(x)).abs())
        .collect();
    let bound_cs = res
        .bound_duals
        .iter()
        .zip(x)
        .map(|(nu, v)| (nu * v).abs())
        .fold(0.0, f64::max);
    let mut grad = prog.objective.clone();
    for (c, &l) in prog.constraints.iter().zip(&res.duals) {
        if l != 0.0 {
            c.add_gradient(x, l, &mut grad);
        }
    }
    for (g, nu) in grad.iter_mut().zip(&res.bound_duals) {
        *g -= nu;
    }
    let stationarity = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
    let min_dual = res
        .duals
        .iter()
        .chain(&res.bound_duals)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let c_norm = prog.objective.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
    Ok(DualityReport {
        gap: res.gap,
        scaled_stationarity: stationarity / c_norm,
        max_complementary: complementary.iter().copied().fold(bound_cs, f64::max),
        complementary,
        stationarity,
        min_dual,
    })
}

/// Largest relative deviation between the analytic gradient of the
/// `t = 1` barrier objective and extrapolated central differences with
/// step `h·|z_j|` in the solver's scaled coordinates.
pub fn finite_difference_audit(prog: &ConvexProgram, point: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Argument("step must be positive".into()));
    }
    if point.len() != prog.num_vars() {
        return Err(Error::Shape(format!(
            "point has {} entries, program has {} variables",
            point.len(),
            prog.num_vars()
        )));
    }
    let red = presolve(prog, 1e-12)?;
    let cp = Compact::new(prog, &red, &vec![1.0; prog.num_vars()]);
    let path = CentralPath { cp: &cp, t: 1.0, shift: 0.0 };
    let z = cp.reduce(point);
    if path.value(&z).is_none() {
        return Err(Error::Domain("point is not strictly feasible".into()));
    }
    let (g, _) = path.grad_hess(&z);
    let mut worst: f64 = 0.0;
    for k in 0..z.len() {
        let step = h * z[k].abs().max(1e-12);
        let central = |d: f64| -> Result<f64> {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += d;
            zm[k] -= d;
            match (path.value(&zp), path.value(&zm)) {
                (Some(fp), Some(fm)) => Ok((fp - fm) / (2.0 * d)),
                _ => Err(Error::Domain("difference stencil leaves the domain".into())),
            }
        };
        // Richardson extrapolation cancels the h² truncation term.
        let fd = (4.0 * central(0.5 * step)? - central(step)?) / 3.0;
        let dev = (fd - g[k]).abs() / g[k].abs().max(1.0);
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Feasibility-phase output: a strictly feasible point and the `t = t0`
/// centred point that follows it.
pub fn initial_central_point(prog: &ConvexProgram, opt: &SolverOptions) -> Result<Vec<f64>> {
    let res = solve_scaled(prog, opt, &vec![1.0; prog.num_vars()], 1)?;
    match res.status {
        SolveStatus::Infeasible => Err(Error::Infeasible("no strictly feasible point".into())),
        SolveStatus::NumericFailure => Err(Error::Solver("numeric failure".into())),
        _ => Ok(res.x),
    }
}
