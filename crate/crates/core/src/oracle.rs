//! Arbitrary-precision reference used as ground truth by the test suites.
//!
//! This module reads format fields itself and sums over a common power-of-two
//! denominator, so it shares no alignment or rounding code with the adder
//! under test.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::formats::{FpFormat, Specials, Subnormals};
use crate::rounding::RoundingMode;

/// An exact dyadic value `mantissa * 2^scale`.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    pub mantissa: BigInt,
    pub scale: i64,
}

impl ExactSum {
    pub fn new(mantissa: impl Into<BigInt>, scale: i64) -> Self {
        ExactSum {
            mantissa: mantissa.into(),
            scale,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    /// Exact value of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7FF) as i64;
        let frac = bits & ((1 << 52) - 1);
        let (int, scale) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1 << 52), exp - 1075)
        };
        let mut m = BigInt::from(int);
        if bits >> 63 == 1 {
            m = -m;
        }
        Some(ExactSum::new(m, scale))
    }

    /// Removes trailing zero bits so equal values compare field-wise.
    pub fn normalized(&self) -> Self {
        match self.mantissa.trailing_zeros() {
            None => ExactSum::zero(),
            Some(tz) => ExactSum::new(&self.mantissa >> tz, self.scale + tz as i64),
        }
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.normalized();
        let scale = n.scale.clamp(-4000, 4000) as i32;
        // Two steps so subnormal results do not underflow early.
        let half = scale / 2;
        n.mantissa.to_f64().unwrap_or(f64::NAN) * 2f64.powi(half) * 2f64.powi(scale - half)
    }

    fn add(&self, other: &ExactSum) -> ExactSum {
        let scale = self.scale.min(other.scale);
        let a = &self.mantissa << (self.scale - scale) as u64;
        let b = &other.mantissa << (other.scale - scale) as u64;
        ExactSum::new(a + b, scale)
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.normalized(), other.normalized());
        a.mantissa == b.mantissa && (a.mantissa.is_zero() || a.scale == b.scale)
    }
}

impl Eq for ExactSum {}

/// Field-level view of a finite word: signed integer significand and the
/// weight of its LSB. `None` for Inf/NaN.
fn finite_value(word: u64, fmt: &FpFormat) -> Option<ExactSum> {
    let man = fmt.man_bits();
    let exp_field = (word >> man) & ((1u64 << fmt.exp_bits()) - 1);
    let frac = word & ((1u64 << man) - 1);
    let negative = (word >> (man + fmt.exp_bits())) & 1 == 1;
    let all_ones = (1u64 << fmt.exp_bits()) - 1;
    match fmt.specials() {
        Specials::IeeeLike if exp_field == all_ones => return None,
        Specials::NanOnly if exp_field == all_ones && frac == (1u64 << man) - 1 => return None,
        _ => {}
    }
    let bias = i64::from(fmt.bias());
    let (int, scale) = if exp_field == 0 {
        if fmt.subnormals() == Subnormals::FlushToZero {
            (0, 0)
        } else {
            (frac, 1 - bias - i64::from(man))
        }
    } else {
        (frac + (1u64 << man), exp_field as i64 - bias - i64::from(man))
    };
    let m = BigInt::from(int);
    Some(ExactSum::new(if negative { -m } else { m }, scale))
}

/// Exact value of a single finite word.
pub fn exact_value(word: u64, fmt: &FpFormat) -> Result<ExactSum> {
    if fmt.width() < 64 && word >> fmt.width() != 0 {
        return Err(Error::Usage(format!("word {word:#x} wider than {fmt}")));
    }
    finite_value(word, fmt)
        .ok_or_else(|| Error::Usage(format!("{word:#x} is not finite in {fmt}")))
}

/// Exact sum of finite words.
pub fn exact_sum(words: &[u64], fmt: &FpFormat) -> Result<ExactSum> {
    let values = words
        .iter()
        .map(|&w| exact_value(w, fmt))
        .collect::<Result<Vec<_>>>()?;
    Ok(values.iter().fold(ExactSum::zero(), |acc, v| acc.add(v)))
}

/// Correctly rounds an exact value into `fmt`.
///
/// Neighbours are found by flooring onto the local grid and the choice is
/// made by comparing exact distances. Policies match the fused adder's:
/// exact zero is `+0`, overflow gives infinity under IEEE-like nearest-even
/// and saturates otherwise, flush-to-zero formats flush any result that
/// would be subnormal.
pub fn round_exact(x: &ExactSum, fmt: &FpFormat, mode: RoundingMode) -> u64 {
    let x = x.normalized();
    if x.is_zero() {
        return 0;
    }
    let negative = x.mantissa.sign() == Sign::Minus;
    let sign_bit = if negative { 1u64 << (fmt.exp_bits() + fmt.man_bits()) } else { 0 };
    let mag = x.mantissa.magnitude();
    let man = i64::from(fmt.man_bits());
    let bias = i64::from(fmt.bias());

    // floor(log2 |x|)
    let top = mag.bits() as i64 - 1 + x.scale;
    let grid = top.max(1 - bias) - man;

    // |x| = (mag * 2^(scale - low)) * 2^low, with low <= grid, exactly.
    let low = x.scale.min(grid - 1);
    let scaled = mag << (x.scale - low) as u64;
    let unit = BigUint::one() << (grid - low) as u64;
    let below = &scaled / &unit;
    let remainder = &scaled - &below * &unit;

    let pick_up = match mode {
        RoundingMode::TowardZero => false,
        RoundingMode::NearestEven => match (&remainder << 1u32).cmp(&unit) {
            Ordering::Less => false,
            Ordering::Greater => true,
            Ordering::Equal => below.bit(0),
        },
    };
    let k = if pick_up { below + 1u32 } else { below };

    // Value chosen is k * 2^grid. Compare against the largest finite value.
    let max_sig: u64 = match fmt.specials() {
        Specials::IeeeLike | Specials::FiniteOnly => (1u64 << (man + 1)) - 1,
        Specials::NanOnly => (1u64 << (man + 1)) - 2,
    };
    let max_exp_field: i64 = match fmt.specials() {
        Specials::IeeeLike => (1i64 << fmt.exp_bits()) - 2,
        _ => (1i64 << fmt.exp_bits()) - 1,
    };
    let max_lsb = max_exp_field - bias - man;
    let chosen_vs_max = if grid >= max_lsb {
        (&k << (grid - max_lsb) as u64).cmp(&BigUint::from(max_sig))
    } else {
        k.cmp(&(BigUint::from(max_sig) << (max_lsb - grid) as u64))
    };
    let max_finite_word = ((max_exp_field as u64) << man) | (max_sig & ((1u64 << man) - 1));
    if chosen_vs_max == Ordering::Greater {
        if fmt.specials() == Specials::IeeeLike && mode == RoundingMode::NearestEven {
            return sign_bit | ((max_exp_field as u64 + 1) << man);
        }
        return sign_bit | max_finite_word;
    }

    let mut k = k.to_u64().expect("bounded by max significand");
    let mut grid = grid;
    if k == 1u64 << (man + 1) {
        k >>= 1;
        grid += 1;
    }
    if k == 0 {
        return sign_bit;
    }
    let subnormal = k < 1u64 << man;
    if subnormal && fmt.subnormals() == Subnormals::FlushToZero {
        return sign_bit;
    }
    let exp_field = if subnormal { 0 } else { (grid + man + bias) as u64 };
    sign_bit | (exp_field << man) | (k & ((1u64 << man) - 1))
}

/// Position of a finite word on the number line; `-0` and `+0` share rank 0.
fn rank(word: u64, fmt: &FpFormat) -> Result<i128> {
    if finite_value(word, fmt).is_none() || (fmt.width() < 64 && word >> fmt.width() != 0) {
        return Err(Error::Usage(format!("{word:#x} is not a finite {fmt} word")));
    }
    let sign_bit = 1u64 << (fmt.exp_bits() + fmt.man_bits());
    let magnitude = i128::from(word & !sign_bit);
    Ok(if word & sign_bit != 0 { -magnitude } else { magnitude })
}

/// Number of representable steps between two finite words.
pub fn ulp_distance(a: u64, b: u64, fmt: &FpFormat) -> Result<u64> {
    Ok((rank(a, fmt)? - rank(b, fmt)?).unsigned_abs() as u64)
}
