//! Quadrature rules.
//!
//! Smooth triangle integrands use a 6-point degree-4 rule. Triangles with a
//! vertex at the sink carry an `r^{2 beta}` factor with `beta` in (-1, 0);
//! for those the radial direction is desingularized exactly by the
//! substitution `sigma = mu^{2 + 2 beta}` before tensor Gauss-Legendre is
//! applied.

use crate::geometry::Point2;

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on Legendre polynomials over [-1, 1], then affine map.
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Legendre polynomial P_n and derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Degree-4 rule on the reference triangle: barycentric points with weights
/// summing to one (multiply by the triangle area).
pub fn tri_rule_deg4() -> [([f64; 3], f64); 6] {
    let a1 = 0.445_948_490_915_965;
    let b1 = 1.0 - 2.0 * a1;
    let w1 = 0.223_381_589_678_011;
    let a2 = 0.091_576_213_509_771;
    let b2 = 1.0 - 2.0 * a2;
    let w2 = 0.109_951_743_655_322;
    [
        ([b1, a1, a1], w1),
        ([a1, b1, a1], w1),
        ([a1, a1, b1], w1),
        ([b2, a2, a2], w2),
        ([a2, b2, a2], w2),
        ([a2, a2, b2], w2),
    ]
}

/// A quadrature point with barycentric coordinates on its triangle.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: Point2,
    pub bary: [f64; 3],
    /// weight, including the singular radial factor when applicable
    pub w: f64,
}

/// Rule for `int_T r^{2 beta} g dx` over the triangle (v0, v1, v2) with the
/// singularity at v0. Returned weights absorb `r^{2 beta}`, so the rule is
/// applied to the smooth remainder `g`.
pub fn singular_tri_rule(v0: Point2, v1: Point2, v2: Point2, beta: f64, n: usize) -> Vec<QuadPoint> {
    assert!(beta > -1.0 && beta < 0.0, "beta must be in (-1, 0)");
    let gl = gauss_legendre_01(n);
    let area2 = v1.sub(v0).cross(v2.sub(v0)); // = 2 * area
    let p = 1.0 / (2.0 + 2.0 * beta);
    let mut out = Vec::with_capacity(n * n);
    for &(t, wt) in &gl {
        // opposite-edge point and its distance to the singular vertex
        let e = v1.add(v2.sub(v1).scale(t));
        let l = e.dist(v0);
        for &(s, ws) in &gl {
            let mu = s.powf(p);
            let x = v0.add(e.sub(v0).scale(mu));
            // bary coords w.r.t. (v0, v1, v2): lambda0 = 1 - mu, edge point
            // splits the rest as (1 - t, t)
            let bary = [1.0 - mu, mu * (1.0 - t), mu * t];
            let w = area2 * p * l.powf(2.0 * beta) * wt * ws;
            out.push(QuadPoint { x, bary, w });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre_01(6);
        // exact for degree <= 11
        for k in 0..=11usize {
            let got: f64 = gl.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((got - exact).abs() < 1e-14, "degree {k}");
        }
        let wsum: f64 = gl.iter().map(|&(_, w)| w).sum();
        assert!((wsum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tri_rule_exact_for_quartics() {
        // int over reference triangle of x^a y^b = a! b! / (a + b + 2)!
        let rule = tri_rule_deg4();
        let fact = |m: usize| (1..=m).map(|k| k as f64).product::<f64>().max(1.0);
        for a in 0..=4usize {
            for b in 0..=(4 - a) {
                let got: f64 = rule
                    .iter()
                    .map(|&(l, w)| {
                        // reference triangle vertices (0,0), (1,0), (0,1)
                        let x = l[1];
                        let y = l[2];
                        0.5 * w * x.powi(a as i32) * y.powi(b as i32)
                    })
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((got - exact).abs() < 1e-14, "x^{a} y^{b}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn singular_rule_matches_closed_form() {
        // int over {x > 0, y > 0, x + y < 1} of r^{2 beta} dx:
        // polar: int_0^{pi/2} (1 / (2 + 2 beta)) L(th)^{2 + 2 beta} dth with
        // L = 1 / (cos th + sin th); compare against a fine 1D reference.
        let beta = -0.6;
        let v0 = Point2::new(0.0, 0.0);
        let v1 = Point2::new(1.0, 0.0);
        let v2 = Point2::new(0.0, 1.0);
        let rule = singular_tri_rule(v0, v1, v2, beta, 12);
        let got: f64 = rule.iter().map(|q| q.w).sum();
        let gl = gauss_legendre_01(200);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let exact: f64 = gl
            .iter()
            .map(|&(t, w)| {
                let th = half_pi * t;
                let l = 1.0 / (th.cos() + th.sin());
                w * half_pi * l.powf(2.0 + 2.0 * beta) / (2.0 + 2.0 * beta)
            })
            .sum();
        assert!((got - exact).abs() < 1e-8, "{got} vs {exact}");
    }

    #[test]
    fn singular_rule_smooth_factor() {
        // int_T r^{2 beta} x dx over the same triangle, reference via polar
        let beta = -0.75;
        let v0 = Point2::new(0.0, 0.0);
        let v1 = Point2::new(1.0, 0.0);
        let v2 = Point2::new(0.0, 1.0);
        let rule = singular_tri_rule(v0, v1, v2, beta, 12);
        let got: f64 = rule.iter().map(|q| q.w * q.x.x).sum();
        let gl = gauss_legendre_01(200);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let exact: f64 = gl
            .iter()
            .map(|&(t, w)| {
                let th = half_pi * t;
                let l = 1.0 / (th.cos() + th.sin());
                // int_0^L r^{2 beta + 2} cos th dr
                w * half_pi * th.cos() * l.powf(3.0 + 2.0 * beta) / (3.0 + 2.0 * beta)
            })
            .sum();
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn singular_rule_bary_consistent() {
        let v0 = Point2::new(0.2, -0.1);
        let v1 = Point2::new(1.0, 0.3);
        let v2 = Point2::new(0.1, 0.9);
        for q in singular_tri_rule(v0, v1, v2, -0.5, 6) {
            let x = v0.scale(q.bary[0]).add(v1.scale(q.bary[1])).add(v2.scale(q.bary[2]));
            assert!(x.dist(q.x) < 1e-14);
            assert!((q.bary.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
