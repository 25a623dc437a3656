//! Newton solvers and continuation for the mean field and Gel'fand forms.
//!
//! The mean field form solves `lap w + rho H e^w / int H e^w = 0`; its
//! Jacobian is a sparse matrix plus a rank-one term from the normalization,
//! handled by Sherman-Morrison. The Gel'fand form solves
//! `-lap u = mu^2 H e^u` and records the induced mass `rho = mu^2 int H e^u`.
//! Amplitude continuation fixes the value at the sink node and solves a
//! bordered system in (u, mu^2), which passes folds in mu.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MfError, Result};
use crate::fem::FemSpace;
use crate::geometry::Point2;
use crate::linalg::{self, LuFactor, Rank1Solver, SparseMat};
use crate::weights::{WeightField, WeightedQuad};

const TOL_NEWTON: f64 = 1e-10;
const MAX_ITERS: usize = 50;
const MAX_BACKTRACK: usize = 30;

/// Which equation a [`Solution`] satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionForm {
    MeanField,
    Gelfand,
}

/// A converged discrete solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub form: SolutionForm,
    pub rho: f64,
    pub mu: f64,
    /// nodal field (w or u); zero at boundary nodes
    pub values: Vec<f64>,
    pub log_mass: f64,
    pub max_value: f64,
    pub max_location: Point2,
    pub residual_norm: f64,
    pub iters: usize,
}

/// An ordered family of solutions from a continuation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<Solution>,
    /// set when continuation stopped early; points up to the failure are kept
    pub failure: Option<String>,
}

/// A mean field problem instance: mesh, weight and quadrature cache.
pub struct Problem {
    pub fem: Arc<FemSpace>,
    pub field: Arc<WeightField>,
    pub quad: WeightedQuad,
    /// interior dof of the node closest to the sink
    sink_dof: usize,
}

impl Problem {
    pub fn new(fem: Arc<FemSpace>, field: Arc<WeightField>) -> Result<Problem> {
        let quad = WeightedQuad::new(&fem, &field)?;
        let sink_node = fem.mesh.nearest_node(field.sinks.q0);
        let sink_dof = fem.node_to_dof[sink_node].ok_or_else(|| {
            MfError::invalid("sink node lies on the boundary; grade the mesh at the sink")
        })?;
        Ok(Problem {
            fem,
            field,
            quad,
            sink_dof,
        })
    }

    pub fn rho_critical(&self) -> f64 {
        self.field.sinks.rho_critical()
    }

    /// Mesh node index carrying the amplitude constraint.
    pub fn sink_node(&self) -> usize {
        self.fem.interior_nodes[self.sink_dof]
    }

    fn diagnostics(
        &self,
        form: SolutionForm,
        rho: f64,
        mu: f64,
        values: Vec<f64>,
        residual_norm: f64,
        iters: usize,
    ) -> Solution {
        let log_mass = self.quad.mass(&values).ln();
        let (mut max_value, mut max_location) = (f64::NEG_INFINITY, Point2::new(0.0, 0.0));
        for (i, &v) in values.iter().enumerate() {
            if v > max_value {
                max_value = v;
                max_location = self.fem.mesh.nodes[i];
            }
        }
        Solution {
            form,
            rho,
            mu,
            values,
            log_mass,
            max_value,
            max_location,
            residual_norm,
            iters,
        }
    }

    /// Interior residual of the mean field form at `w`.
    fn mf_residual(&self, w: &[f64], rho: f64) -> (Vec<f64>, f64, Vec<f64>) {
        let m = self.quad.mass(w);
        let mut b = vec![0.0; w.len()];
        self.quad.load(w, &mut b);
        let kw = self.fem.stiffness_full.mul_vec(w);
        let r: Vec<f64> = self
            .fem
            .interior_nodes
            .iter()
            .map(|&i| kw[i] - (rho / m) * b[i])
            .collect();
        (r, m, b)
    }

    /// Interior residual of the Gel'fand form at `u` with `nu = mu^2`.
    fn gf_residual(&self, u: &[f64], nu: f64) -> (Vec<f64>, f64, Vec<f64>) {
        let m = self.quad.mass(u);
        let mut b = vec![0.0; u.len()];
        self.quad.load(u, &mut b);
        let ku = self.fem.stiffness_full.mul_vec(u);
        let r: Vec<f64> = self
            .fem
            .interior_nodes
            .iter()
            .map(|&i| ku[i] - nu * b[i])
            .collect();
        (r, m, b)
    }

    /// Assembles and factorizes S = K - c C(w) on interior dofs.
    fn shifted_jacobian(&self, w: &[f64], c: f64) -> Result<LuFactor> {
        let mut trips = self.fem.stiffness_int_triplets.clone();
        for (i, j, v) in self.quad.mass_matrix_triplets(w) {
            if let (Some(di), Some(dj)) = (self.fem.node_to_dof[i], self.fem.node_to_dof[j]) {
                trips.push((di, dj, -c * v));
            }
        }
        let n = self.fem.num_interior();
        SparseMat::from_triplets(n, n, &trips)?.lu()
    }
}

fn sanitize_guess(fem: &FemSpace, guess: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = fem.mesh.num_nodes();
    let mut w = match guess {
        Some(g) => {
            if g.len() != n {
                return Err(MfError::invalid(format!(
                    "guess has {} values for a mesh with {n} nodes",
                    g.len()
                )));
            }
            g.to_vec()
        }
        None => vec![0.0; n],
    };
    for (i, &b) in fem.mesh.is_boundary.iter().enumerate() {
        if b {
            w[i] = 0.0;
        }
    }
    Ok(w)
}

/// Solves the mean field equation at mass `rho`.
///
/// Subcritical `rho` converges from the zero guess; supercritical `rho` is
/// refused unless a guess is supplied.
pub fn solve_mean_field(problem: &Problem, rho: f64, guess: Option<&[f64]>) -> Result<Solution> {
    if rho >= problem.rho_critical() && guess.is_none() {
        return Err(MfError::refused(format!(
            "rho = {rho} is at or above the critical mass {}; supply a guess",
            problem.rho_critical()
        )));
    }
    let mut w = sanitize_guess(&problem.fem, guess)?;
    let (mut r, mut m, mut b) = problem.mf_residual(&w, rho);
    let mut res = problem.fem.energy_residual_norm(&r)?;
    let mut iters = 0;
    while res >= TOL_NEWTON {
        if iters >= MAX_ITERS {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("mean field solve at rho = {rho}"),
            });
        }
        let s = problem.shifted_jacobian(&w, rho / m)?;
        let b_int = problem.fem.restrict(&b);
        // J = S + (rho / m^2) b b^T
        let rank1 = Rank1Solver::new(&s, &b_int, &b_int, rho / (m * m))?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = problem.fem.extend(&rank1.solve_vec(&neg_r));

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = w.clone();
            linalg::axpy(alpha, &delta, &mut trial);
            let (rt, mt, bt) = problem.mf_residual(&trial, rho);
            let rest = problem.fem.energy_residual_norm(&rt)?;
            if rest < res * (1.0 - 1e-4 * alpha) || rest < TOL_NEWTON {
                w = trial;
                r = rt;
                m = mt;
                b = bt;
                res = rest;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("line search stalled at rho = {rho}"),
            });
        }
    }
    let mu = (rho / m).max(0.0).sqrt();
    Ok(problem.diagnostics(SolutionForm::MeanField, rho, mu, w, res, iters))
}

/// Solves the Gel'fand equation at parameter `mu` (so `nu = mu^2`).
pub fn solve_gelfand(problem: &Problem, mu: f64, guess: Option<&[f64]>) -> Result<Solution> {
    if mu < 0.0 {
        return Err(MfError::invalid("mu must be nonnegative"));
    }
    let nu = mu * mu;
    let mut u = sanitize_guess(&problem.fem, guess)?;
    let (mut r, mut m, mut _b) = problem.gf_residual(&u, nu);
    let mut res = problem.fem.energy_residual_norm(&r)?;
    let mut iters = 0;
    while res >= TOL_NEWTON {
        if iters >= MAX_ITERS {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("gelfand solve at mu = {mu}"),
            });
        }
        let s = problem.shifted_jacobian(&u, nu)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = problem.fem.extend(&s.solve_vec(&neg_r));
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = u.clone();
            linalg::axpy(alpha, &delta, &mut trial);
            let (rt, mt, bt) = problem.gf_residual(&trial, nu);
            let rest = problem.fem.energy_residual_norm(&rt)?;
            if rest < res * (1.0 - 1e-4 * alpha) || rest < TOL_NEWTON {
                u = trial;
                r = rt;
                m = mt;
                _b = bt;
                res = rest;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("line search stalled at mu = {mu}"),
            });
        }
    }
    Ok(problem.diagnostics(SolutionForm::Gelfand, nu * m, mu, u, res, iters))
}

/// Warm-started solves over an increasing grid of subcritical masses.
pub fn continue_in_rho(problem: &Problem, rho_grid: &[f64]) -> Result<Branch> {
    let rc = problem.rho_critical();
    for w in rho_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(MfError::invalid("rho grid must be strictly increasing"));
        }
    }
    if let Some(&last) = rho_grid.last() {
        if last >= rc || rho_grid[0] < 0.0 {
            return Err(MfError::invalid(format!(
                "rho grid must lie in [0, {rc})"
            )));
        }
    }
    let mut points: Vec<Solution> = Vec::with_capacity(rho_grid.len());
    for (k, &rho) in rho_grid.iter().enumerate() {
        let guess = points.last().map(|s| s.values.as_slice());
        match solve_mean_field(problem, rho, guess) {
            Ok(sol) => points.push(sol),
            Err(e) => {
                return Ok(Branch {
                    points,
                    failure: Some(format!("solve {k} at rho = {rho} failed: {e}")),
                })
            }
        }
    }
    Ok(Branch {
        points,
        failure: None,
    })
}

/// Bordered Newton step data for amplitude continuation.
fn solve_bordered(problem: &Problem, s: f64, u: &mut Vec<f64>, nu: &mut f64) -> Result<(f64, usize)> {
    let sink = problem.sink_dof;
    let mut iters = 0;
    loop {
        let (r1, _m, b) = problem.gf_residual(u, *nu);
        let r2 = u[problem.sink_node()] - s;
        let res = problem.fem.energy_residual_norm(&r1)? + r2.abs();
        if !res.is_finite() {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("amplitude solve overflowed at s = {s}"),
            });
        }
        if res < TOL_NEWTON {
            return Ok((res, iters));
        }
        if iters >= MAX_ITERS {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("amplitude solve at s = {s}"),
            });
        }
        let sfac = problem.shifted_jacobian(u, *nu)?;
        let a = sfac.solve_vec(&r1);
        let b_int = problem.fem.restrict(&b);
        let d = sfac.solve_vec(&b_int);
        if d[sink].abs() < 1e-300 {
            return Err(MfError::LinearSolve(
                "bordered system singular at the sink dof".into(),
            ));
        }
        let dnu = (a[sink] - r2) / d[sink];
        let du: Vec<f64> = a
            .iter()
            .zip(&d)
            .map(|(ai, di)| -ai + dnu * di)
            .collect();
        let du_full = problem.fem.extend(&du);
        // damped update, shrinking until the residual decreases
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let mut ut = u.clone();
            linalg::axpy(alpha, &du_full, &mut ut);
            let nut = *nu + alpha * dnu;
            let (r1t, _, _) = problem.gf_residual(&ut, nut);
            let r2t = ut[problem.sink_node()] - s;
            let rest = problem.fem.energy_residual_norm(&r1t)? + r2t.abs();
            if rest < res * (1.0 - 1e-4 * alpha) || rest < TOL_NEWTON {
                *u = ut;
                *nu = nut;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(MfError::NoConvergence {
                iters,
                residual: res,
                context: format!("amplitude line search stalled at s = {s}"),
            });
        }
    }
}

/// Continuation in the solution height at the sink node. Tracks the branch
/// through folds in mu; each point records rho = mu^2 int H e^u.
pub fn continue_in_amplitude(problem: &Problem, s_grid: &[f64]) -> Result<Branch> {
    for w in s_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(MfError::invalid("amplitude grid must be strictly increasing"));
        }
    }
    if s_grid.first().copied().unwrap_or(0.0) <= 0.0 {
        return Err(MfError::invalid("amplitude grid must be positive"));
    }
    let mut u = vec![0.0; problem.fem.mesh.num_nodes()];
    let mut nu = 0.0;
    let mut points: Vec<Solution> = Vec::with_capacity(s_grid.len());
    for (k, &s) in s_grid.iter().enumerate() {
        // predictor: scale the previous field toward the new height
        let prev_height = u[problem.sink_node()];
        if prev_height > 0.0 {
            let scale = s / prev_height;
            for v in u.iter_mut() {
                *v *= scale;
            }
        } else {
            // first point: constant-height bump from zero
            for (i, v) in u.iter_mut().enumerate() {
                if !problem.fem.mesh.is_boundary[i] {
                    *v = 0.5 * s;
                }
            }
            u[problem.sink_node()] = s;
        }
        match solve_bordered(problem, s, &mut u, &mut nu) {
            Ok((res, iters)) => {
                let m = problem.quad.mass(&u);
                if !(m.is_finite() && nu.is_finite() && u.iter().all(|v| v.is_finite())) {
                    return Ok(Branch {
                        points,
                        failure: Some(format!(
                            "amplitude step {k} at s = {s} left the solution manifold \
                             (non-finite state)"
                        )),
                    });
                }
                let mu = nu.max(0.0).sqrt();
                points.push(problem.diagnostics(
                    SolutionForm::Gelfand,
                    nu * m,
                    mu,
                    u.clone(),
                    res,
                    iters,
                ));
            }
            Err(e) => {
                return Ok(Branch {
                    points,
                    failure: Some(format!("amplitude step {k} at s = {s} failed: {e}")),
                })
            }
        }
    }
    Ok(Branch {
        points,
        failure: None,
    })
}

/// Amplitude continuation started from a caller-supplied field instead of the
/// trivial solution, following whichever family the seed selects.
///
/// This reaches branches that are not connected to zero by height growth at
/// the sink node, such as the near-critical concentrating family on domains
/// where the connected branch blows up at a regular point instead. The grid
/// must be positive and strictly monotone in either direction; the seed is
/// rescaled so its sink value matches `s_grid[0]` before the first correction.
pub fn continue_in_amplitude_from(
    problem: &Problem,
    s_grid: &[f64],
    seed: &[f64],
    seed_nu: f64,
) -> Result<Branch> {
    if s_grid.is_empty() {
        return Err(MfError::invalid("amplitude grid is empty"));
    }
    if s_grid.iter().any(|&s| s <= 0.0) {
        return Err(MfError::invalid("amplitude grid must be positive"));
    }
    let increasing = s_grid.len() < 2 || s_grid[1] > s_grid[0];
    for w in s_grid.windows(2) {
        if (increasing && w[1] <= w[0]) || (!increasing && w[1] >= w[0]) {
            return Err(MfError::invalid("amplitude grid must be strictly monotone"));
        }
    }
    if seed.len() != problem.fem.mesh.num_nodes() {
        return Err(MfError::invalid("seed length does not match the mesh"));
    }
    let seed_height = seed[problem.sink_node()];
    if seed_height <= 0.0 {
        return Err(MfError::invalid("seed must be positive at the sink node"));
    }
    let mut u: Vec<f64> = seed
        .iter()
        .zip(problem.fem.mesh.is_boundary.iter())
        .map(|(&v, &bd)| if bd { 0.0 } else { v * s_grid[0] / seed_height })
        .collect();
    let mut nu = seed_nu;
    let mut points: Vec<Solution> = Vec::with_capacity(s_grid.len());
    for (k, &s) in s_grid.iter().enumerate() {
        let prev_height = u[problem.sink_node()];
        if prev_height > 0.0 {
            let scale = s / prev_height;
            for v in u.iter_mut() {
                *v *= scale;
            }
        }
        match solve_bordered(problem, s, &mut u, &mut nu) {
            Ok((res, iters)) => {
                let m = problem.quad.mass(&u);
                if !(m.is_finite() && nu.is_finite() && u.iter().all(|v| v.is_finite())) {
                    return Ok(Branch {
                        points,
                        failure: Some(format!(
                            "amplitude step {k} at s = {s} left the solution manifold \
                             (non-finite state)"
                        )),
                    });
                }
                let mu = nu.max(0.0).sqrt();
                points.push(problem.diagnostics(
                    SolutionForm::Gelfand,
                    nu * m,
                    mu,
                    u.clone(),
                    res,
                    iters,
                ));
            }
            Err(e) => {
                return Ok(Branch {
                    points,
                    failure: Some(format!("amplitude step {k} at s = {s} failed: {e}")),
                })
            }
        }
    }
    Ok(Branch {
        points,
        failure: None,
    })
}
