//! Special functions and one-dimensional quadrature rules.

use alloc::vec::Vec;

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`; `xc` must equal `1 - x` and is
/// passed separately so callers can supply it without cancellation.
pub fn beta_reg(a: f64, b: f64, x: f64, xc: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if xc <= 0.0 {
        return 1.0;
    }
    let front = libm::exp(a * libm::log(x) + b * libm::log(xc) - ln_beta(a, b));
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, xc) / b
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..400 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `∫₀^θ cos^p(u) du` for `θ ∈ [0, π/2]`, given `sin²θ` and `cos²θ`.
///
/// Uses `∫₀^θ cos^p = ½ B(sin²θ; ½, (p+1)/2)`.
#[derive(Clone, Copy, Debug)]
pub struct CosPowerIntegral {
    q: f64,
    full: f64,
}

impl CosPowerIntegral {
    pub fn new(p: f64) -> Self {
        let q = 0.5 * (p + 1.0);
        Self { q, full: 0.5 * libm::exp(ln_beta(0.5, q)) }
    }

    pub fn eval(&self, sin2: f64, cos2: f64) -> f64 {
        self.full * beta_reg(0.5, self.q, sin2, cos2)
    }

    /// `∫_θ^{π/2} cos^p(u) du`, accurate when `θ` is close to `π/2`.
    pub fn tail(&self, sin2: f64, cos2: f64) -> f64 {
        self.full * beta_reg(self.q, 0.5, cos2, sin2)
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs.push(0.5 * (1.0 - x));
        ws.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre_unit(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, deg as f64)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn cos_power_integral_matches_midpoint_sum() {
        let p = 0.5;
        let f = CosPowerIntegral::new(p);
        for &theta in &[0.1, 0.7, 1.2, 1.5] {
            let m = 200_000;
            let h = theta / m as f64;
            let direct: f64 = (0..m)
                .map(|k| libm::pow(libm::cos((k as f64 + 0.5) * h), p) * h)
                .sum();
            let s = libm::sin(theta);
            let c = libm::cos(theta);
            assert!((f.eval(s * s, c * c) - direct).abs() < 1e-9, "theta={theta}");
            assert!((f.eval(s * s, c * c) + f.tail(s * s, c * c) - f.eval(1.0, 0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn beta_reg_symmetry() {
        let (a, b, x) = (0.5, 0.75, 0.3);
        let l = beta_reg(a, b, x, 1.0 - x);
        let r = 1.0 - beta_reg(b, a, 1.0 - x, x);
        assert!((l - r).abs() < 1e-14);
    }
}
