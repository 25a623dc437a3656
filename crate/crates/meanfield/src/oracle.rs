//! Closed-form solution family on the unit disk with a centered sink.
//!
//! For the weight `H = |x|^{2 beta}` on the unit disk the mean field
//! equation has the explicit radial solution
//! `w(r) = 2 log((1 + gamma) / (1 + gamma r^{2(1 + beta)}))` with
//! `gamma = rho / (8 pi (1 + beta) - rho)`, valid for
//! `rho < 8 pi (1 + beta)`. All thermodynamic quantities along this branch
//! have closed forms; they serve as oracles for the numerical pipeline.

use crate::error::{MfError, Result};

use std::f64::consts::PI;

/// The explicit one-parameter solution branch on the unit disk.
#[derive(Debug, Clone, Copy)]
pub struct DiskOracle {
    pub beta: f64,
}

impl DiskOracle {
    pub fn new(beta: f64) -> Result<DiskOracle> {
        if !(-1.0..0.0).contains(&beta) || beta == -1.0 {
            return Err(MfError::invalid(format!(
                "beta must lie in (-1, 0), got {beta}"
            )));
        }
        Ok(DiskOracle { beta })
    }

    /// Critical mass 8 pi (1 + beta) at which the branch blows up.
    pub fn rho_critical(&self) -> f64 {
        8.0 * PI * (1.0 + self.beta)
    }

    /// Branch parameter gamma = rho / (rho_c - rho), increasing in rho.
    pub fn gamma(&self, rho: f64) -> Result<f64> {
        let rc = self.rho_critical();
        if !(0.0..rc).contains(&rho) {
            return Err(MfError::invalid(format!(
                "rho = {rho} outside the subcritical range (0, {rc})"
            )));
        }
        Ok(rho / (rc - rho))
    }

    pub fn rho_from_gamma(&self, gamma: f64) -> f64 {
        self.rho_critical() * gamma / (1.0 + gamma)
    }

    /// Solution value w(r) at radius r.
    pub fn w(&self, rho: f64, r: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        let s = r.powf(2.0 * (1.0 + self.beta));
        Ok(2.0 * ((1.0 + g) / (1.0 + g * s)).ln())
    }

    /// Normalized vorticity density omega(r); integrates to one over the disk.
    pub fn omega(&self, rho: f64, r: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        let b = self.beta;
        let s = r.powf(2.0 * (1.0 + b));
        let denom = 1.0 + g * s;
        Ok((1.0 + b) / PI * (1.0 + g) * r.powf(2.0 * b) / (denom * denom))
    }

    /// Energy E(rho) = (1/2) int omega G[omega]; along the branch this is
    /// (1 + gamma) ((1 + gamma) log(1 + gamma) - gamma) / (8 pi (1 + beta) gamma^2),
    /// and equals the Dirichlet integral of w divided by 2 rho^2.
    pub fn energy(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(self.energy_zero());
        }
        let g = self.gamma(rho)?;
        let l = g.ln_1p();
        Ok((1.0 + g) * ((1.0 + g) * l - g) / (8.0 * PI * (1.0 + self.beta) * g * g))
    }

    /// Zero-mass energy limit 1 / (16 pi (1 + beta)).
    pub fn energy_zero(&self) -> f64 {
        1.0 / (16.0 * PI * (1.0 + self.beta))
    }

    /// log of the mass integral, log int H e^w = log(pi (1 + gamma) / (1 + beta)).
    pub fn log_mass(&self, rho: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        Ok((PI * (1.0 + g) / (1.0 + self.beta)).ln())
    }

    /// Free energy J(rho) = rho E - log int H e^w.
    pub fn free_energy(&self, rho: f64) -> Result<f64> {
        Ok(rho * self.energy(rho)? - self.log_mass(rho)?)
    }

    /// Entropy S = -rho E - J = log_mass - 2 rho E.
    pub fn entropy(&self, rho: f64) -> Result<f64> {
        Ok(self.log_mass(rho)? - 2.0 * rho * self.energy(rho)?)
    }

    /// Peak height lambda = u(0) of the normalized solution u = w - log mass.
    pub fn lambda(&self, rho: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        Ok(((1.0 + self.beta) * (1.0 + g) / PI).ln())
    }

    /// Additive constant in the boundary expansion of the blow-up branch.
    pub fn c_const(&self, rho: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        Ok((PI * g * g / ((1.0 + self.beta) * (1.0 + g))).ln())
    }

    /// Residual of the pointwise upper-bound expansion: 2 log(1 + 1/gamma),
    /// decreasing to zero as rho approaches the critical mass.
    pub fn est_muk_residual(&self, rho: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        Ok(2.0 * (1.0 + 1.0 / g).ln())
    }

    /// Ratio (rho - rho_c) e^c / D_beta = gamma^2 / (1 + gamma)^2 along the
    /// branch (the concentration identity in closed form).
    pub fn im_ck_ratio(&self, rho: f64) -> Result<f64> {
        let g = self.gamma(rho)?;
        Ok(g * g / ((1.0 + g) * (1.0 + g)))
    }

    /// Bubble amplitude identity: rho e^lambda / (8 (1 + beta)^2) = gamma.
    pub fn bubble_amplitude(&self, rho: f64) -> Result<f64> {
        Ok(rho * self.lambda(rho)?.exp() / (8.0 * (1.0 + self.beta) * (1.0 + self.beta)))
    }

    /// Domain functional of the centered unit disk: D0 = -pi / (1 + beta).
    pub fn d0(&self) -> f64 {
        -PI / (1.0 + self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre_01;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn energy_at_half_critical_beta_minus_half() {
        // beta = -1/2: rho_c = 4 pi; at rho = 2 pi, gamma = 1 and
        // E = 2 (2 log 2 - 1) / (4 pi) = (2 log 2 - 1) / (2 pi)
        let o = DiskOracle::new(-0.5).unwrap();
        let e = o.energy(TWO_PI).unwrap();
        assert!((e - (2.0 * 2.0f64.ln() - 1.0) / TWO_PI).abs() < 1e-15);
    }

    #[test]
    fn entropy_energy_legendre_relation() {
        // dS/dE = -rho along the branch, by centered differences in gamma
        let o = DiskOracle::new(-0.5).unwrap();
        for &g in &[0.3, 1.0, 3.0] {
            let h = 1e-5;
            let (rm, rp) = (o.rho_from_gamma(g - h), o.rho_from_gamma(g + h));
            let ds = o.entropy(rp).unwrap() - o.entropy(rm).unwrap();
            let de = o.energy(rp).unwrap() - o.energy(rm).unwrap();
            let rho = o.rho_from_gamma(g);
            assert!((ds / de + rho).abs() < 1e-5 * rho, "gamma {g}: {}", ds / de);
        }
    }

    #[test]
    fn energy_limit_at_zero_mass() {
        for &beta in &[-0.25, -0.5, -0.75] {
            let o = DiskOracle::new(beta).unwrap();
            let e = o.energy(1e-6).unwrap();
            assert!(
                (e - o.energy_zero()).abs() < 1e-5 * o.energy_zero(),
                "beta {beta}: {e} vs {}",
                o.energy_zero()
            );
        }
    }

    #[test]
    fn omega_integrates_to_one() {
        // radial integral with the substitution u = r^{2 + 2 beta} removes
        // the singularity exactly
        let o = DiskOracle::new(-0.7).unwrap();
        let rho = 0.8 * o.rho_critical();
        let gl = gauss_legendre_01(64);
        let p = 2.0 + 2.0 * o.beta;
        let total: f64 = gl
            .iter()
            .map(|&(u, w)| {
                let r = u.powf(1.0 / p);
                // 2 pi r omega dr = (2 pi / p) omega r^{2 - p} ... in terms
                // of du: r dr = (1/p) u^{2/p - 1} du
                let jac = (1.0 / p) * u.powf(2.0 / p - 1.0);
                w * TWO_PI * o.omega(rho, r).unwrap() * jac
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "mass {total}");
    }

    #[test]
    fn w_solves_the_equation_radially() {
        // check lap w + rho H e^w / int(H e^w) = 0 off the origin by finite
        // differences of the radial profile
        let o = DiskOracle::new(-0.4).unwrap();
        let rho = 0.6 * o.rho_critical();
        let m = o.log_mass(rho).unwrap().exp();
        for &r in &[0.3, 0.5, 0.8] {
            let h = 1e-4;
            let wm = o.w(rho, r - h).unwrap();
            let w0 = o.w(rho, r).unwrap();
            let wp = o.w(rho, r + h).unwrap();
            let lap = (wp - 2.0 * w0 + wm) / (h * h) + (wp - wm) / (2.0 * h * r);
            let rhs = -rho * r.powf(2.0 * o.beta) * w0.exp() / m;
            assert!((lap - rhs).abs() < 1e-5 * rhs.abs().max(1.0), "r = {r}");
        }
    }

    #[test]
    fn energy_is_dirichlet_integral() {
        // E = (1/(2 rho^2)) int |w'|^2, radial quadrature vs closed form
        let o = DiskOracle::new(-0.5).unwrap();
        let rho = 0.7 * o.rho_critical();
        let gl = gauss_legendre_01(128);
        let h = 1e-6;
        let dirichlet: f64 = gl
            .iter()
            .map(|&(r, wq)| {
                let dw = (o.w(rho, r + h).unwrap() - o.w(rho, (r - h).max(1e-12)).unwrap())
                    / (2.0 * h);
                wq * TWO_PI * r * dw * dw
            })
            .sum();
        let e = dirichlet / (2.0 * rho * rho);
        assert!((e - o.energy(rho).unwrap()).abs() < 1e-6, "{e}");
    }

    #[test]
    fn thermo_identity_holds() {
        let o = DiskOracle::new(-0.6).unwrap();
        for &f in &[0.1, 0.5, 0.9] {
            let rho = f * o.rho_critical();
            let s = o.entropy(rho).unwrap();
            let e = o.energy(rho).unwrap();
            let j = o.free_energy(rho).unwrap();
            assert!((s + rho * e + j).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_at_zero_energy_offset() {
        // as rho -> 0 the entropy tends to log(pi / (1 + beta)); for
        // beta = -1/2 this is log(2 pi)
        let o = DiskOracle::new(-0.5).unwrap();
        let s = o.entropy(1e-8).unwrap();
        assert!((s - TWO_PI.ln()).abs() < 1e-6, "{s}");
    }

    #[test]
    fn blow_up_identities() {
        let o = DiskOracle::new(-0.75).unwrap();
        for &g in &[0.5, 2.0, 50.0] {
            let rho = o.rho_from_gamma(g);
            assert!((o.gamma(rho).unwrap() - g).abs() < 1e-10 * g);
            assert!((o.bubble_amplitude(rho).unwrap() - g).abs() < 1e-10 * g);
            let ratio = o.im_ck_ratio(rho).unwrap();
            assert!((ratio - g * g / ((1.0 + g) * (1.0 + g))).abs() < 1e-14);
        }
        // est-muk residual decreases to zero along the branch
        let r1 = o.est_muk_residual(o.rho_from_gamma(1.0)).unwrap();
        let r2 = o.est_muk_residual(o.rho_from_gamma(10.0)).unwrap();
        let r3 = o.est_muk_residual(o.rho_from_gamma(100.0)).unwrap();
        assert!(r1 > r2 && r2 > r3 && r3 > 0.0);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(DiskOracle::new(0.0).is_err());
        assert!(DiskOracle::new(-1.0).is_err());
        let o = DiskOracle::new(-0.5).unwrap();
        assert!(o.gamma(o.rho_critical()).is_err());
        assert!(o.gamma(-1.0).is_err());
    }
}
