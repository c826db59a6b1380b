use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact element of ℚ(i).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coeff {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Coeff {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Coeff { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Coeff { re, im: BigRational::zero() }
    }

    pub fn int(n: i64) -> Self {
        Coeff::real(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn i() -> Self {
        Coeff { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn zero() -> Self {
        Coeff::int(0)
    }

    pub fn one() -> Self {
        Coeff::int(1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn inv(&self) -> Option<Coeff> {
        if self.is_zero() {
            return None;
        }
        let n = &self.re * &self.re + &self.im * &self.im;
        Some(Coeff { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn scale(&self, r: &BigRational) -> Coeff {
        Coeff { re: &self.re * r, im: &self.im * r }
    }

    /// Real or purely imaginary with a negative leading part; used by the printer
    /// to pull signs out of terms.
    pub(crate) fn is_negative(&self) -> bool {
        (self.im.is_zero() && self.re.is_negative()) || (self.re.is_zero() && self.im.is_negative())
    }

    pub fn to_f64(&self) -> (f64, f64) {
        use num_traits::ToPrimitive;
        (self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }
}

impl Add for &Coeff {
    type Output = Coeff;
    fn add(self, o: &Coeff) -> Coeff {
        Coeff { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub for &Coeff {
    type Output = Coeff;
    fn sub(self, o: &Coeff) -> Coeff {
        Coeff { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, o: &Coeff) -> Coeff {
        Coeff {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Neg for &Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        Coeff { re: -&self.re, im: -&self.im }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) if self.im.is_one() => write!(f, "i"),
            (true, false) if (-&self.im).is_one() => write!(f, "-i"),
            (true, false) => write!(f, "{}*i", self.im),
            (false, false) => {
                let (sign, mag) = if self.im.is_negative() { ('-', -&self.im) } else { ('+', self.im.clone()) };
                if mag.is_one() {
                    write!(f, "({}{sign}i)", self.re)
                } else {
                    write!(f, "({}{sign}{mag}*i)", self.re)
                }
            }
        }
    }
}
