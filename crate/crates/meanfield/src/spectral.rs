//! Linearized operator at a solution and its smallest eigenvalues.
//!
//! The linearization of the mean field equation at a solution w acts as
//! `phi -> -lap phi - rho K (phi - int K phi)` with the normalized density
//! `K = H e^w / int H e^w` and zero Dirichlet data. The nonlocal rank-one
//! term is kept exactly. Eigenvalues are computed for the K-weighted
//! generalized problem `A phi = nu K phi` by subspace iteration on the
//! shift-inverted operator; a positive smallest eigenvalue witnesses
//! non-degeneracy of the solution.

use std::sync::Arc;

use crate::error::{MfError, Result};
use crate::linalg::{dense_sym_eig, dot, LuFactor, Rank1Solver, SparseMat};
use crate::solver::{Problem, Solution};

/// Residual level above which a solution is treated as unconverged.
const CONVERGED_TOL: f64 = 1e-6;
/// Height of the solution maximum above which blow-up diagnostics apply.
pub const BLOWUP_THRESHOLD: f64 = 5.0;

/// Discrete linearized operator `A = K_stiff - (rho/m) C + (rho/m^2) b b^T`
/// on interior dofs, together with the weighted mass `B = C / m`.
pub struct LinearizedOperator {
    /// sparse part S = K - (rho/m) C
    pub sparse: SparseMat,
    /// weighted mass matrix C_ij = int H e^w phi_i phi_j (interior)
    pub weighted_mass: SparseMat,
    /// load vector b_i = int H e^w phi_i (interior)
    pub load: Vec<f64>,
    /// total mass m = int H e^w
    pub mass: f64,
    pub rho: f64,
}

impl LinearizedOperator {
    /// y = A x on interior dofs.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.sparse.mul_vec(x);
        let c = self.rho / (self.mass * self.mass) * dot(&self.load, x);
        for (yi, bi) in y.iter_mut().zip(&self.load) {
            *yi += c * bi;
        }
        y
    }

    /// y = B x = (C/m) x on interior dofs.
    pub fn apply_weight(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weighted_mass.mul_vec(x);
        y.iter_mut().for_each(|v| *v /= self.mass);
        y
    }

    /// B inner product of two interior vectors.
    pub fn weight_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply_weight(y))
    }

    fn factor(&self) -> Result<(LuFactor, f64)> {
        let lu = self.sparse.lu()?;
        Ok((lu, self.rho / (self.mass * self.mass)))
    }
}

/// Eigen-report of the K-weighted linearized problem.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// ascending eigenvalues of A phi = nu (C/m) phi
    pub eigenvalues: Vec<f64>,
    /// matching eigenfields as full nodal vectors, B-orthonormal
    pub eigenfields: Vec<Vec<f64>>,
    /// formulation tag for reports
    pub formulation: String,
    pub rho: f64,
}

/// Assembles the linearized operator at a converged solution.
pub fn assemble_linearized(problem: &Problem, sol: &Solution) -> Result<LinearizedOperator> {
    if !(sol.residual_norm < CONVERGED_TOL) {
        return Err(MfError::refused(format!(
            "solution residual {} is above the convergence tolerance {CONVERGED_TOL}",
            sol.residual_norm
        )));
    }
    let fem = &problem.fem;
    let n = fem.num_interior();
    let m = problem.quad.mass(&sol.values);
    let mut b_full = vec![0.0; fem.mesh.num_nodes()];
    problem.quad.load(&sol.values, &mut b_full);
    let b_int = fem.restrict(&b_full);
    let mut c_trips = Vec::new();
    let mut s_trips = fem.stiffness_int_triplets.clone();
    for (i, j, v) in problem.quad.mass_matrix_triplets(&sol.values) {
        if let (Some(di), Some(dj)) = (fem.node_to_dof[i], fem.node_to_dof[j]) {
            c_trips.push((di, dj, v));
            s_trips.push((di, dj, -sol.rho / m * v));
        }
    }
    Ok(LinearizedOperator {
        sparse: SparseMat::from_triplets(n, n, &s_trips)?,
        weighted_mass: SparseMat::from_triplets(n, n, &c_trips)?,
        load: b_int,
        mass: m,
        rho: sol.rho,
    })
}

/// First `k` eigenvalues of the K-weighted linearized problem at `sol`,
/// by subspace iteration on A^{-1} B with Rayleigh-Ritz extraction.
pub fn smallest_eigenvalues(problem: &Problem, sol: &Solution, k: usize) -> Result<SpectralReport> {
    if k == 0 {
        return Err(MfError::invalid("eigenvalue count k must be at least 1"));
    }
    let op = assemble_linearized(problem, sol)?;
    let n = op.load.len();
    let p = (k + 3).min(n);
    let (lu, rank1_c) = op.factor()?;
    let solver = Rank1Solver::new(&lu, &op.load, &op.load, rank1_c)?;

    // deterministic start: smooth trigonometric columns over dof index
    let mut basis: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let t = (i + 1) as f64 * (j + 1) as f64;
                    (0.7 * t).sin() + 0.3 * (1.3 * t + 0.5).cos()
                })
                .collect()
        })
        .collect();

    let mut prev: Vec<f64> = Vec::new();
    let max_iters = 300;
    for iter in 0..max_iters {
        // power step on A^{-1} B
        let mut work: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| solver.solve_vec(&op.apply_weight(v)))
            .collect();
        // B-orthonormalize by modified Gram-Schmidt
        for j in 0..p {
            for l in 0..j {
                let (head, tail) = work.split_at_mut(j);
                let proj = op.weight_inner(&head[l], &tail[0]);
                for (wi, hi) in tail[0].iter_mut().zip(&head[l]) {
                    *wi -= proj * hi;
                }
            }
            let norm = op.weight_inner(&work[j], &work[j]).max(0.0).sqrt();
            if norm < 1e-300 {
                return Err(MfError::LinearSolve(
                    "subspace iteration produced a degenerate basis".into(),
                ));
            }
            work[j].iter_mut().for_each(|v| *v /= norm);
        }
        // Rayleigh-Ritz in the B-orthonormal basis
        let a_cols: Vec<Vec<f64>> = work.iter().map(|v| op.apply(v)).collect();
        let proj: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| dot(&work[i], &a_cols[j])).collect())
            .collect();
        let (vals, vecs) = dense_sym_eig(&proj)?;
        let mut ritz: Vec<Vec<f64>> = Vec::with_capacity(p);
        for v in &vecs {
            let mut field = vec![0.0; n];
            for (c, col) in v.iter().zip(&work) {
                crate::linalg::axpy(*c, col, &mut field);
            }
            ritz.push(field);
        }
        basis = ritz;

        let head: Vec<f64> = vals.iter().take(k).cloned().collect();
        let converged = !prev.is_empty()
            && head
                .iter()
                .zip(&prev)
                .all(|(a, b)| (a - b).abs() < 1e-11 * (1.0 + a.abs()));
        if converged || iter == max_iters - 1 {
            if !converged {
                let gap = head
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                return Err(MfError::NoConvergence {
                    iters: max_iters,
                    residual: gap,
                    context: "eigenvalue subspace iteration".into(),
                });
            }
            let mut fields = Vec::with_capacity(k);
            for phi in basis.iter().take(k) {
                let mut full = problem.fem.extend(phi);
                // deterministic sign: positive at the sink node
                let anchor = full[problem.sink_node()];
                let s = if anchor < 0.0 {
                    -1.0
                } else if anchor > 0.0 {
                    1.0
                } else if full.iter().sum::<f64>() < 0.0 {
                    -1.0
                } else {
                    1.0
                };
                full.iter_mut().for_each(|v| *v *= s);
                fields.push(full);
            }
            return Ok(SpectralReport {
                eigenvalues: head,
                eigenfields: fields,
                formulation: "K-weighted linearized mean field operator".into(),
                rho: sol.rho,
            });
        }
        prev = head;
    }
    unreachable!("iteration loop returns or errors before exhausting");
}

/// Normalized K-weighted correlation between the first eigenfield and the
/// rescaled radial kernel profile of the linearized bubble,
/// `(1 - g r^{2(1+beta)}) / (1 + g r^{2(1+beta)})` with the amplitude scale
/// `g = rho h0(q0) e^lambda / (8 (1+beta)^2)`.
pub fn kernel_correlation(
    problem: &Problem,
    sol: &Solution,
    report: &SpectralReport,
) -> Result<f64> {
    if sol.max_value <= BLOWUP_THRESHOLD {
        return Err(MfError::refused(format!(
            "solution height {} is below the blow-up threshold {BLOWUP_THRESHOLD}",
            sol.max_value
        )));
    }
    let phi = report
        .eigenfields
        .first()
        .ok_or_else(|| MfError::invalid("spectral report has no eigenfields"))?;
    let beta = problem.field.sinks.beta;
    let q0 = problem.field.sinks.q0;
    let lambda = sol.values[problem.sink_node()] - sol.log_mass;
    let g = sol.rho * problem.field.h0_at_sink()? * lambda.exp()
        / (8.0 * (1.0 + beta) * (1.0 + beta));
    let profile = |x: crate::geometry::Point2| {
        let s = g * x.dist(q0).powf(2.0 * (1.0 + beta));
        (1.0 - s) / (1.0 + s)
    };
    // centered K-weighted correlation over the cached quadrature; centering
    // removes the constant offset int K phi contributed by the nonlocal term
    let (mut sw, mut sp, mut sq) = (0.0, 0.0, 0.0);
    let mut samples = Vec::with_capacity(problem.quad.points.len());
    for qp in &problem.quad.points {
        let wv = qp.shape[0] * sol.values[qp.nodes[0]]
            + qp.shape[1] * sol.values[qp.nodes[1]]
            + qp.shape[2] * sol.values[qp.nodes[2]];
        let weight = qp.wh * wv.exp();
        let ph = qp.shape[0] * phi[qp.nodes[0]]
            + qp.shape[1] * phi[qp.nodes[1]]
            + qp.shape[2] * phi[qp.nodes[2]];
        let pr = profile(qp.x);
        sw += weight;
        sp += weight * ph;
        sq += weight * pr;
        samples.push((weight, ph, pr));
    }
    let (mp, mq) = (sp / sw, sq / sw);
    let (mut pp, mut qq, mut pq) = (0.0, 0.0, 0.0);
    for (weight, ph, pr) in samples {
        pp += weight * (ph - mp) * (ph - mp);
        qq += weight * (pr - mq) * (pr - mq);
        pq += weight * (ph - mp) * (pr - mq);
    }
    if pp <= 0.0 || qq <= 0.0 {
        return Err(MfError::invalid("degenerate eigenfield or profile"));
    }
    Ok(pq / (pp.sqrt() * qq.sqrt()))
}

/// Convenience: smallest eigenvalue along a set of solutions sharing one
/// problem; used by branch diagnostics.
pub fn first_eigenvalue_along(
    problem: &Problem,
    sols: &[Solution],
) -> Result<Vec<f64>> {
    sols.iter()
        .map(|s| Ok(smallest_eigenvalues(problem, s, 1)?.eigenvalues[0]))
        .collect()
}

/// Builds a problem-and-solution pair purely for doc/test ergonomics.
pub fn solve_and_report(
    problem: &Arc<Problem>,
    rho: f64,
    k: usize,
) -> Result<(Solution, SpectralReport)> {
    let sol = crate::solver::solve_mean_field(problem, rho, None)?;
    let report = smallest_eigenvalues(problem, &sol, k)?;
    Ok((sol, report))
}
