use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Symmetric 2×2 tensor stored by its three independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

const SQRT2: f64 = core::f64::consts::SQRT_2;

impl SymTensor2 {
    pub const ZERO: Self = Self { xx: 0.0, yy: 0.0, xy: 0.0 };
    pub const IDENTITY: Self = Self { xx: 1.0, yy: 1.0, xy: 0.0 };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// `A − (tr A / 2) I`.
    pub fn deviatoric(&self) -> Self {
        let h = 0.5 * self.trace();
        Self { xx: self.xx - h, yy: self.yy - h, xy: self.xy }
    }

    /// `A : B`.
    pub fn ddot(&self, b: &Self) -> f64 {
        self.xx * b.xx + self.yy * b.yy + 2.0 * self.xy * b.xy
    }

    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    /// Frobenius norm `|A| = (A:A)^{1/2}`.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    /// Mandel vector `(xx, yy, √2 xy)`, in which `A:B` is the Euclidean dot.
    pub fn to_mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, SQRT2 * self.xy]
    }

    pub fn from_mandel(v: [f64; 3]) -> Self {
        Self { xx: v[0], yy: v[1], xy: v[2] / SQRT2 }
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }
}

/// Free-function form of [`SymTensor2::deviatoric`].
pub fn deviatoric(a: SymTensor2) -> SymTensor2 {
    a.deviatoric()
}

impl Add for SymTensor2 {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        Self { xx: self.xx + b.xx, yy: self.yy + b.yy, xy: self.xy + b.xy }
    }
}

impl Sub for SymTensor2 {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        Self { xx: self.xx - b.xx, yy: self.yy - b.yy, xy: self.xy - b.xy }
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl Neg for SymTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self { xx: -self.xx, yy: -self.yy, xy: -self.xy }
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, a: SymTensor2) -> SymTensor2 {
        SymTensor2 { xx: self * a.xx, yy: self * a.yy, xy: self * a.xy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_deviator() {
        assert_eq!(deviatoric(SymTensor2::IDENTITY), SymTensor2::ZERO);
    }

    #[test]
    fn uniaxial_split() {
        assert_eq!(deviatoric(SymTensor2::new(1.0, 0.0, 0.0)), SymTensor2::new(0.5, -0.5, 0.0));
    }

    #[test]
    fn mandel_preserves_inner_product() {
        let a = SymTensor2::new(0.3, -1.2, 0.7);
        let b = SymTensor2::new(2.0, 0.5, -0.4);
        let (ma, mb) = (a.to_mandel(), b.to_mandel());
        let d = ma[0] * mb[0] + ma[1] * mb[1] + ma[2] * mb[2];
        assert!((d - a.ddot(&b)).abs() < 1e-15);
        let back = SymTensor2::from_mandel(ma);
        assert!((back - a).norm() < 1e-15);
    }
}
