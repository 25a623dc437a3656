//! Singular weights and the derived potentials.
//!
//! A sink configuration places one negative vortex of strength `beta` in
//! (-1, 0) at `q0` plus optional positive vortices `alpha_j > 0` at `q_j`.
//! The induced weight is `H(x) = |x - q0|^{2 beta} h0(x)` with
//! `h0(x) = exp(-4 pi beta R(x, q0) - sum_j 4 pi alpha_j G(x, q_j))`.
//! This module also provides the weighted quadrature used by the solver,
//! with the radial singularity at `q0` integrated exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{MfError, Result};
use crate::fem::FemSpace;
use crate::geometry::Point2;
use crate::quad::{singular_tri_rule, tri_rule_deg4};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// A positive vortex contributing a zero of order `2 alpha` to the weight.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PositiveVortex {
    pub q: Point2,
    pub alpha: f64,
}

/// One negative sink plus optional positive vortices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkConfig {
    pub q0: Point2,
    pub beta: f64,
    #[serde(default)]
    pub positives: Vec<PositiveVortex>,
}

impl SinkConfig {
    pub fn single(q0: Point2, beta: f64) -> SinkConfig {
        SinkConfig {
            q0,
            beta,
            positives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.beta > -1.0 && self.beta < 0.0) {
            problems.push(format!("beta = {} not in (-1, 0)", self.beta));
        }
        for (j, p) in self.positives.iter().enumerate() {
            if !(p.alpha > 0.0) {
                problems.push(format!("alpha_{j} = {} not positive", p.alpha));
            }
        }
        let mut pts = vec![self.q0];
        pts.extend(self.positives.iter().map(|p| p.q));
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[i].dist(pts[j]) < 1e-12 {
                    problems.push(format!("vortex points {i} and {j} coincide"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MfError::invalid(problems.join("; ")))
        }
    }

    /// Critical mass for concentration at the sink.
    pub fn rho_critical(&self) -> f64 {
        2.0 * FOUR_PI * (1.0 + self.beta)
    }
}

/// The weight `H` together with its potentials on a fixed domain.
pub struct WeightField {
    pub domain: Arc<Domain>,
    pub sinks: SinkConfig,
}

/// Result of the first-order concentration condition at the sink.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub grad_norm: f64,
    pub satisfied: bool,
    /// false when 1 + 2 beta < 0, where no condition is needed
    pub required: bool,
}

impl WeightField {
    pub fn new(domain: Arc<Domain>, sinks: SinkConfig) -> Result<WeightField> {
        sinks.validate()?;
        let field = WeightField { domain, sinks };
        // all vortex points must be strictly interior; robin() fails outside
        field.domain.robin(field.sinks.q0)?;
        for p in &field.sinks.positives {
            field.domain.robin(p.q)?;
        }
        Ok(field)
    }

    /// Regular factor h0(x); vanishes at positive vortices, positive elsewhere.
    pub fn h0(&self, x: Point2) -> Result<f64> {
        let mut log_h0 = -FOUR_PI * self.sinks.beta * self.domain.regular_part(x, self.sinks.q0)?;
        for p in &self.sinks.positives {
            if x.dist(p.q) < 1e-300 {
                return Ok(0.0);
            }
            log_h0 -= FOUR_PI * p.alpha * self.domain.green(x, p.q)?;
        }
        Ok(log_h0.exp())
    }

    /// h0 evaluated at the sink itself (R(q0, q0) replaces the Green value).
    pub fn h0_at_sink(&self) -> Result<f64> {
        let q0 = self.sinks.q0;
        let mut log_h0 = -FOUR_PI * self.sinks.beta * self.domain.robin(q0)?;
        for p in &self.sinks.positives {
            log_h0 -= FOUR_PI * p.alpha * self.domain.green(q0, p.q)?;
        }
        Ok(log_h0.exp())
    }

    /// The full weight H(x) = |x - q0|^{2 beta} h0(x).
    pub fn weight_at(&self, x: Point2) -> Result<f64> {
        let r = x.dist(self.sinks.q0);
        if r == 0.0 {
            return Err(MfError::invalid("weight evaluated at the sink"));
        }
        Ok(r.powf(2.0 * self.sinks.beta) * self.h0(x)?)
    }

    /// The concentration potentials (Phi, Phi*) at x.
    pub fn phi_potentials(&self, x: Point2) -> Result<(f64, f64)> {
        let q0 = self.sinks.q0;
        let r = x.dist(q0);
        if r == 0.0 {
            return Err(MfError::invalid("potentials evaluated at the sink"));
        }
        let b = self.sinks.beta;
        let coeff = 2.0 * FOUR_PI * (1.0 + b);
        let h0x = self.h0(x)?;
        let h00 = self.h0_at_sink()?;
        let phi_star = coeff * (self.domain.regular_part(x, q0)? - self.domain.robin(q0)?)
            + (h0x / h00).ln();
        let phi = phi_star - (4.0 + 2.0 * b) * r.ln();
        Ok((phi, phi_star))
    }

    /// gamma(q0) = 4 pi (1 + beta) R(q0, q0) + log h0(q0).
    pub fn gamma_at_sink(&self) -> Result<f64> {
        let q0 = self.sinks.q0;
        Ok(FOUR_PI * (1.0 + self.sinks.beta) * self.domain.robin(q0)? + self.h0_at_sink()?.ln())
    }

    /// Prefactor c_* = h0(q0) e^{8 pi (1 + beta) R(q0, q0)}.
    pub fn c_star(&self) -> Result<f64> {
        let q0 = self.sinks.q0;
        Ok(self.h0_at_sink()?
            * (2.0 * FOUR_PI * (1.0 + self.sinks.beta) * self.domain.robin(q0)?).exp())
    }

    /// c_beta = h0(q0) / (8 (1 + beta)^2).
    pub fn c_beta(&self) -> Result<f64> {
        let b1 = 1.0 + self.sinks.beta;
        Ok(self.h0_at_sink()? / (8.0 * b1 * b1))
    }

    /// c_0 = c_* / (8 (1 + beta)^2).
    pub fn c_zero(&self) -> Result<f64> {
        let b1 = 1.0 + self.sinks.beta;
        Ok(self.c_star()? / (8.0 * b1 * b1))
    }

    /// Central-difference gradient of Phi* at the sink. The condition is only
    /// required when 1 + 2 beta >= 0.
    pub fn criticality_check(&self, step: f64) -> Result<CriticalityReport> {
        if !(step > 0.0) {
            return Err(MfError::invalid("criticality step must be positive"));
        }
        let q0 = self.sinks.q0;
        let mut vals = [0.0; 4];
        let stencil = [
            Point2::new(q0.x + step, q0.y),
            Point2::new(q0.x - step, q0.y),
            Point2::new(q0.x, q0.y + step),
            Point2::new(q0.x, q0.y - step),
        ];
        for (v, p) in vals.iter_mut().zip(&stencil) {
            if !self.domain.contains(*p) {
                return Err(MfError::invalid(
                    "criticality stencil leaves the domain; reduce step",
                ));
            }
            let (_, phi_star) = self.phi_potentials(*p)?;
            *v = phi_star;
        }
        let gx = (vals[0] - vals[1]) / (2.0 * step);
        let gy = (vals[2] - vals[3]) / (2.0 * step);
        let grad_norm = gx.hypot(gy);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-6 * (1.0 + scale);
        Ok(CriticalityReport {
            grad_norm,
            satisfied: grad_norm < tol,
            required: 1.0 + 2.0 * self.sinks.beta >= 0.0,
        })
    }
}

/// One precomputed quadrature point for integrals of the form
/// `int H e^w f`, with H (and the exact radial singularity on triangles
/// touching the sink) folded into the weight `wh`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedQuadPoint {
    pub nodes: [usize; 3],
    pub shape: [f64; 3],
    pub x: Point2,
    pub wh: f64,
}

/// Quadrature for the weighted nonlinearity on a fixed mesh.
pub struct WeightedQuad {
    pub points: Vec<WeightedQuadPoint>,
}

impl WeightedQuad {
    /// Builds the cache. Triangles with a vertex at the sink use the
    /// desingularized radial rule; all others use the degree-4 rule.
    pub fn new(fem: &FemSpace, field: &WeightField) -> Result<WeightedQuad> {
        let mesh = &fem.mesh;
        let q0 = field.sinks.q0;
        let reg_rule = tri_rule_deg4();
        let mut points = Vec::new();
        let node_tol = 1e-12;
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangles[t];
            let verts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
            let sink_vertex = (0..3).find(|&k| verts[k].dist(q0) < node_tol);
            match sink_vertex {
                Some(k) => {
                    // rotate so the singular vertex comes first
                    let order = [k, (k + 1) % 3, (k + 2) % 3];
                    let rule = singular_tri_rule(
                        verts[order[0]],
                        verts[order[1]],
                        verts[order[2]],
                        field.sinks.beta,
                        8,
                    );
                    for q in rule {
                        let mut shape = [0.0; 3];
                        let mut nodes = [0usize; 3];
                        for i in 0..3 {
                            shape[order[i]] = q.bary[i];
                            nodes[i] = tri[i];
                        }
                        let wh = q.w * field.h0(q.x)?;
                        points.push(WeightedQuadPoint {
                            nodes,
                            shape,
                            x: q.x,
                            wh,
                        });
                    }
                }
                None => {
                    let area = mesh.triangle_area(t);
                    for &(l, w) in &reg_rule {
                        let x = verts[0]
                            .scale(l[0])
                            .add(verts[1].scale(l[1]))
                            .add(verts[2].scale(l[2]));
                        let wh = area * w * field.weight_at(x)?;
                        points.push(WeightedQuadPoint {
                            nodes: tri,
                            shape: l,
                            x,
                            wh,
                        });
                    }
                }
            }
        }
        Ok(WeightedQuad { points })
    }

    fn w_at(&self, q: &WeightedQuadPoint, w_nodal: &[f64]) -> f64 {
        q.shape[0] * w_nodal[q.nodes[0]]
            + q.shape[1] * w_nodal[q.nodes[1]]
            + q.shape[2] * w_nodal[q.nodes[2]]
    }

    /// int H e^w for a nodal field w.
    pub fn mass(&self, w_nodal: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|q| q.wh * self.w_at(q, w_nodal).exp())
            .sum()
    }

    /// Load vector b_i = int H e^w phi_i over all nodes.
    pub fn load(&self, w_nodal: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for q in &self.points {
            let c = q.wh * self.w_at(q, w_nodal).exp();
            for i in 0..3 {
                out[q.nodes[i]] += c * q.shape[i];
            }
        }
    }

    /// Triplets of the weighted mass matrix C_ij = int H e^w phi_i phi_j.
    pub fn mass_matrix_triplets(&self, w_nodal: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut trips = Vec::with_capacity(9 * self.points.len());
        for q in &self.points {
            let c = q.wh * self.w_at(q, w_nodal).exp();
            for i in 0..3 {
                for j in 0..3 {
                    trips.push((q.nodes[i], q.nodes[j], c * q.shape[i] * q.shape[j]));
                }
            }
        }
        trips
    }

    /// int H e^w f for an arbitrary pointwise integrand factor f(x).
    pub fn integrate_with(&self, w_nodal: &[f64], mut f: impl FnMut(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .map(|q| q.wh * self.w_at(q, w_nodal).exp() * f(q.x))
            .sum()
    }
}
