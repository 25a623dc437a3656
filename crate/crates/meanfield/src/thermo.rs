//! Thermodynamic curves of the vortex ensemble.
//!
//! For a solution `w` at mass `rho` with density `omega = H e^w / int H e^w`
//! the module evaluates the free energy `J_rho(w)`, the energy
//! `E = int |grad w|^2 / (2 rho^2)`, and the entropy
//! `S(omega) = -int omega (log omega - log H) = log int H e^w - int omega w`.
//! At solutions these satisfy `S + rho E + J = 0` exactly (also discretely,
//! since the same quadrature is used for the load vector and the averages).
//! The entropy-energy curve `S(E)` and its convexity scan expose the
//! negative-specific-heat windows of second-kind configurations.

use serde::{Deserialize, Serialize};

use crate::error::{MfError, Result};
use crate::solver::{Branch, Problem, Solution};

/// One (rho, mu, E, J, S, height) record of a thermodynamic curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThermoSample {
    pub rho: f64,
    pub mu: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub height: f64,
}

/// An ordered thermodynamic curve along a solution branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermoCurve {
    pub samples: Vec<ThermoSample>,
    /// indices where |S + rho E + J| exceeded the validation tolerance
    pub flagged: Vec<usize>,
    /// worst Legendre residual `S(E) - min_j (-J_j - rho_j E)` over samples
    pub legendre_residual: f64,
}

/// A maximal interval of constant sign of `S''(E)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexityInterval {
    pub e_min: f64,
    pub e_max: f64,
    /// +1 convex (negative specific heat), -1 concave
    pub sign: i32,
    pub samples: usize,
}

/// Result of a convexity scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub intervals: Vec<ConvexityInterval>,
    pub notes: Vec<String>,
}

/// Functional values of an arbitrary (not necessarily solving) nodal field.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FunctionalPair {
    /// J_rho(w), the field-side functional
    pub j_of_w: f64,
    /// F_rho(omega) = -S(omega) - rho E(omega) for omega = H e^w / int H e^w
    pub f_of_omega: f64,
    pub entropy: f64,
    pub energy: f64,
}

fn require_positive_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(MfError::refused(format!(
            "rho = {rho} must be positive (the 1/(2 rho) factor is undefined)"
        )));
    }
    Ok(())
}

/// `int omega w` for `omega = H e^w / int H e^w`, with the same quadrature
/// as the load vector so the discrete virial identity is exact.
fn density_average_of_w(problem: &Problem, w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for q in &problem.quad.points {
        let wq = q.shape[0] * w[q.nodes[0]] + q.shape[1] * w[q.nodes[1]] + q.shape[2] * w[q.nodes[2]];
        let c = q.wh * wq.exp();
        num += c * wq;
        den += c;
    }
    num / den
}

/// Free energy `J_rho(w) = (1/2 rho) int |grad w|^2 - log int H e^w`.
pub fn free_energy_value(problem: &Problem, sol: &Solution) -> Result<f64> {
    require_positive_rho(sol.rho)?;
    Ok(problem.fem.dirichlet_energy(&sol.values) / sol.rho - sol.log_mass)
}

/// Entropy `S(omega) = log int H e^w - int omega w`.
pub fn entropy_value(problem: &Problem, sol: &Solution) -> f64 {
    sol.log_mass - density_average_of_w(problem, &sol.values)
}

/// Entropy of the zero-mass density `omega_0 = H / int H`: `log int H`.
pub fn entropy_at_zero(problem: &Problem) -> f64 {
    let zeros = vec![0.0; problem.fem.mesh.num_nodes()];
    problem.quad.mass(&zeros).ln()
}

/// Energy `E = int |grad w|^2 / (2 rho^2)`; at `rho = 0` the well-defined
/// limit `E_0 = (1/2) int omega_0 G[omega_0]` is evaluated instead.
pub fn energy_value(problem: &Problem, sol: &Solution) -> Result<f64> {
    if sol.rho == 0.0 {
        return energy_at_zero(problem);
    }
    require_positive_rho(sol.rho)?;
    Ok(2.0 * problem.fem.dirichlet_energy(&sol.values) / (2.0 * sol.rho * sol.rho))
}

/// `E_0 = (1/2) int omega_0 G[omega_0]` with `omega_0 = H / int H`, via one
/// Poisson solve for the stream function of `omega_0`.
pub fn energy_at_zero(problem: &Problem) -> Result<f64> {
    let zeros = vec![0.0; problem.fem.mesh.num_nodes()];
    quadratic_energy(problem, &zeros)
}

/// `(1/2) int omega G[omega]` for `omega = H e^w / int H e^w`.
fn quadratic_energy(problem: &Problem, w: &[f64]) -> Result<f64> {
    let m = problem.quad.mass(w);
    let mut b = vec![0.0; w.len()];
    problem.quad.load(w, &mut b);
    for v in b.iter_mut() {
        *v /= m;
    }
    let psi = problem.fem.poisson_solve(&problem.fem.restrict(&b))?;
    Ok(0.5 * crate::linalg::dot(&b, &psi))
}

/// Field-side and density-side functionals of an arbitrary nodal field `w`
/// at mass `rho`. At solutions the two values coincide; in general
/// `J_rho(rho G[omega]) <= F_rho(omega) <= J_rho(w)`.
pub fn functional_values(problem: &Problem, rho: f64, w: &[f64]) -> Result<FunctionalPair> {
    require_positive_rho(rho)?;
    if w.len() != problem.fem.mesh.num_nodes() {
        return Err(MfError::invalid("field length does not match the mesh"));
    }
    let m = problem.quad.mass(w);
    let j_of_w = problem.fem.dirichlet_energy(w) / rho - m.ln();
    let entropy = m.ln() - density_average_of_w(problem, w);
    let energy = quadratic_energy(problem, w)?;
    Ok(FunctionalPair {
        j_of_w,
        f_of_omega: -entropy - rho * energy,
        entropy,
        energy,
    })
}

/// The field `rho G[omega]` induced by the density of `w`; pairing it with
/// `J_rho` gives the lower half of the duality sandwich.
pub fn induced_potential(problem: &Problem, rho: f64, w: &[f64]) -> Result<Vec<f64>> {
    require_positive_rho(rho)?;
    let m = problem.quad.mass(w);
    let mut b = vec![0.0; w.len()];
    problem.quad.load(w, &mut b);
    for v in b.iter_mut() {
        *v *= rho / m;
    }
    problem.fem.poisson_solve(&problem.fem.restrict(&b))
}

/// Builds the thermodynamic curve of a branch and validates the identity
/// `S + rho E + J = 0` per sample plus the Legendre property
/// `S(E_k) = min_j (-J_j - rho_j E_k)` attained at `j = k`.
pub fn build_thermo_curve(problem: &Problem, branch: &Branch) -> Result<ThermoCurve> {
    if branch.points.is_empty() {
        return Err(MfError::invalid("branch has no points"));
    }
    let mut samples = Vec::with_capacity(branch.points.len());
    let mut flagged = Vec::new();
    for (k, sol) in branch.points.iter().enumerate() {
        let j = free_energy_value(problem, sol)?;
        let e = energy_value(problem, sol)?;
        let s = entropy_value(problem, sol);
        let defect = s + sol.rho * e + j;
        if defect.abs() > 1e-6 * (1.0 + s.abs() + j.abs() + (sol.rho * e).abs()) {
            flagged.push(k);
        }
        samples.push(ThermoSample {
            rho: sol.rho,
            mu: sol.mu,
            e,
            j,
            s,
            height: sol.max_value,
        });
    }
    let mut legendre_residual = 0.0f64;
    for k in 0..samples.len() {
        let inf = samples
            .iter()
            .map(|o| -o.j - o.rho * samples[k].e)
            .fold(f64::INFINITY, f64::min);
        legendre_residual = legendre_residual.max((samples[k].s - inf).abs());
    }
    Ok(ThermoCurve {
        samples,
        flagged,
        legendre_residual,
    })
}

/// Scans `S(E)` for sign-constant intervals of the second derivative,
/// using three-point second differences on the (non-uniform) energy grid.
/// Windows with non-monotone `E` are skipped with a note.
pub fn convexity_scan(curve: &ThermoCurve) -> Result<ScanReport> {
    let s = &curve.samples;
    if s.len() < 4 {
        return Err(MfError::invalid(
            "convexity scan needs at least four samples",
        ));
    }
    let mut notes = Vec::new();
    let mut intervals: Vec<ConvexityInterval> = Vec::new();
    for i in 1..s.len() - 1 {
        let (e0, e1, e2) = (s[i - 1].e, s[i].e, s[i + 1].e);
        let d1 = e1 - e0;
        let d2 = e2 - e1;
        if d1 * d2 <= 0.0 {
            notes.push(format!(
                "window {}..{} skipped: energy not strictly monotone",
                i - 1,
                i + 1
            ));
            continue;
        }
        let sd = 2.0 * ((s[i + 1].s - s[i].s) / d2 - (s[i].s - s[i - 1].s) / d1) / (e2 - e0);
        let sign = if sd > 0.0 {
            1
        } else if sd < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        let (lo, hi) = (e0.min(e2), e0.max(e2));
        match intervals.last_mut() {
            Some(last) if last.sign == sign && last.e_max >= lo => {
                last.e_max = last.e_max.max(hi);
                last.e_min = last.e_min.min(lo);
                last.samples += 1;
            }
            _ => intervals.push(ConvexityInterval {
                e_min: lo,
                e_max: hi,
                sign,
                samples: 1,
            }),
        }
    }
    Ok(ScanReport { intervals, notes })
}
