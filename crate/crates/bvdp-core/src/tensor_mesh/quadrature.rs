//! Quadrature rules on intervals and triangles.

use alloc::vec::Vec;

use crate::special::gauss_legendre_unit;

/// Points and weights of a rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Rule1d {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        Self { x, w }
    }

    /// Pulls the rule back through `x = s^k`, which turns an end-point
    /// behaviour `x^{1/k − 1}` at 0 into a smooth integrand.
    pub fn power(&self, k: f64) -> Self {
        Self {
            x: self.x.iter().map(|s| libm::pow(*s, k)).collect(),
            w: self.x.iter().zip(&self.w).map(|(s, w)| k * libm::pow(*s, k - 1.0) * w).collect(),
        }
    }

}

/// Quadrature points (physical coordinates) and weights on a triangle.
#[derive(Clone, Debug, Default)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Collapsed (Duffy) tensor rule with apex at `p[0]`:
    /// `x = p0 + ξ((1−η)(p1−p0) + η(p2−p0))`, Jacobian `2|T|ξ`.
    pub fn collapsed(p: [[f64; 2]; 3], xi: &Rule1d, eta: &Rule1d) -> Self {
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
                .abs();
        let n = xi.x.len() * eta.x.len();
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (a, wa) in xi.x.iter().zip(&xi.w) {
            for (b, wb) in eta.x.iter().zip(&eta.w) {
                let dir = [
                    (1.0 - b) * (p[1][0] - p[0][0]) + b * (p[2][0] - p[0][0]),
                    (1.0 - b) * (p[1][1] - p[0][1]) + b * (p[2][1] - p[0][1]),
                ];
                points.push([p[0][0] + a * dir[0], p[0][1] + a * dir[1]]);
                weights.push(2.0 * area * a * wa * wb);
            }
        }
        Self { points, weights }
    }

    /// Collapsed Gauss rule with `n × n` points, exact for polynomials of
    /// degree `2n − 1`.
    pub fn gauss(p: [[f64; 2]; 3], n: usize) -> Self {
        let g = Rule1d::gauss(n);
        let gx = Rule1d::gauss(n + 1);
        Self::collapsed(p, &gx, &g)
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_rule_moments() {
        let p = [[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]];
        let r = TriangleRule::gauss(p, 3);
        assert!((r.integrate(|_| 1.0) - 1.5).abs() < 1e-14);
        // centroid
        let cx = r.integrate(|x| x[0]) / 1.5;
        assert!((cx - 2.5 / 3.0).abs() < 1e-14);
        // exact second moment via the vertex formula
        let ixx = r.integrate(|x| x[0] * x[0]);
        let s: f64 = p.iter().map(|v| v[0] * v[0]).sum::<f64>()
            + p[0][0] * p[1][0]
            + p[1][0] * p[2][0]
            + p[0][0] * p[2][0];
        assert!((ixx - 1.5 * s / 6.0).abs() < 1e-13);
    }

    #[test]
    fn power_map_absorbs_root_singularity() {
        let r = Rule1d::gauss(4).power(2.0);
        let v: f64 = r.x.iter().zip(&r.w).map(|(x, w)| w / libm::sqrt(*x)).sum();
        assert!((v - 2.0).abs() < 1e-14);
    }
}
