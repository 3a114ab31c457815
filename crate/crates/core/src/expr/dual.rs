//! First-order dual numbers `v + d·ε` for forward-mode differentiation.

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn neg(self) -> Self {
        Dual { v: -self.v, d: -self.d }
    }
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
    fn div(self, o: Self) -> Self {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Dual::constant(1.0);
        }
        Dual {
            v: self.v.powi(k),
            d: k as f64 * self.v.powi(k - 1) * self.d,
        }
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual { v: e, d: e * self.d }
    }
    fn ln(self) -> Self {
        Dual {
            v: self.v.ln(),
            d: self.d / self.v,
        }
    }
    fn sin(self) -> Self {
        Dual {
            v: self.v.sin(),
            d: self.v.cos() * self.d,
        }
    }
    fn cos(self) -> Self {
        Dual {
            v: self.v.cos(),
            d: -self.v.sin() * self.d,
        }
    }
}
