//! Double-double arithmetic (about 32 significant digits).
//!
//! Used where a residual has to be resolved far below the spacing of `f64`
//! around the operands, e.g. derivative residuals at stationary points whose
//! two cancelling terms are of size 1e13.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        let xd = Dd::from_f64(x);
        xd + (self - xd * xd) / Dd::from_f64(2.0 * x)
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::from_f64(k);
        // exp(r) = (exp(r / 2^9))^(2^9)
        // carry exp(s) − 1 through the squarings to keep relative accuracy
        let s = r * Dd::from_f64(1.0 / 512.0);
        let mut term = s;
        let mut em1 = s;
        for i in 2..=24 {
            term = term * s / Dd::from_f64(i as f64);
            em1 = em1 + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..9 {
            em1 = em1 * Dd::from_f64(2.0) + em1 * em1;
        }
        let sum = Dd::ONE + em1;
        let scale = 2f64.powi(k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// Natural logarithm: `x = m·2^e`, then two Newton steps on `exp(y) = m`.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        let e = self.hi.log2().floor();
        let scale = 2f64.powi(-(e as i32));
        let m = Dd {
            hi: self.hi * scale,
            lo: self.lo * scale,
        };
        let mut y = Dd::from_f64(m.hi.ln());
        for _ in 0..2 {
            y = y + m * (-y).exp() - Dd::ONE;
        }
        y + LN2 * Dd::from_f64(e)
    }

    pub fn powd(self, e: Dd) -> Self {
        (e * self.ln()).exp()
    }

    pub fn powf(self, e: f64) -> Self {
        self.powd(Dd::from_f64(e))
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b).to_f64() / b.to_f64()).abs()
    }

    #[test]
    fn one_third_round_trip() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let back = third * Dd::from_f64(3.0);
        assert!((back - Dd::ONE).to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_squares_back() {
        let s = Dd::from_f64(8.0).sqrt();
        assert!(rel(s * s, Dd::from_f64(8.0)) < 1e-31);
    }

    #[test]
    fn exp_ln_inverse() {
        for &x in &[1e-300, 1e-12, 0.37, 1.0, 2.5, 7.0e13, 1e300] {
            let d = Dd::from_f64(x);
            // |ln x|·2^{−106} bounds the attainable accuracy
            let bound = 1e-31 * (1.0 + x.ln().abs());
            assert!(rel(d.ln().exp(), d) < bound, "x = {x}: {}", rel(d.ln().exp(), d));
        }
        let e = Dd::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert!((e.hi - std::f64::consts::E).abs() == 0.0);
        assert!((e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn integer_powers_exact() {
        let x = Dd::from_f64(3.0);
        assert!(rel(x.powf(5.0), Dd::from_f64(243.0)) < 1e-30);
        assert!(rel(Dd::from_f64(2.0).powf(0.5), Dd::from_f64(2.0).sqrt()) < 1e-30);
    }
}
