//! Two's-complement accumulator values and the alignment shifter.
//!
//! The accumulator holds `man_bits + guard_bits` fraction bits below the
//! integer (hidden) bit, one integer bit, `ceil(log2 N)` carry bits and a
//! sign bit. Values are backed by arbitrary-width integers so that lossless
//! FP32 accumulators (hundreds of bits wide) need no special casing.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::formats::FpFormat;

/// What happens to bits pushed below the accumulator LSB by an alignment
/// shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossPolicy {
    /// Plain arithmetic right shift; lost bits are forgotten.
    Truncate,
    /// Arithmetic right shift that ORs lost bits into a sticky flag.
    Sticky,
    /// Enough guard bits that no shift can ever lose a nonzero bit.
    Lossless,
}

impl LossPolicy {
    pub fn name(self) -> &'static str {
        match self {
            LossPolicy::Truncate => "truncate",
            LossPolicy::Sticky => "sticky",
            LossPolicy::Lossless => "lossless",
        }
    }
}

impl std::str::FromStr for LossPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "truncate" => Ok(LossPolicy::Truncate),
            "sticky" => Ok(LossPolicy::Sticky),
            "lossless" => Ok(LossPolicy::Lossless),
            _ => Err(Error::Usage(format!(
                "unknown loss policy `{s}` (expected lossless, truncate or sticky)"
            ))),
        }
    }
}

/// Accumulator geometry for an `n_terms`-input adder over one input format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AccumulatorSpec {
    n_terms: usize,
    exp_bits: u32,
    man_bits: u32,
    bias: i32,
    guard_bits: u32,
    loss: LossPolicy,
}

impl AccumulatorSpec {
    /// Guard bits of a lossless accumulator for `fmt`: the largest possible
    /// exponent difference.
    pub fn lossless_guard_bits(fmt: &FpFormat) -> u32 {
        fmt.exp_field_max()
    }

    pub fn new(n_terms: usize, fmt: &FpFormat, loss: LossPolicy, guard_bits: u32) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::Usage("accumulator needs at least one term".into()));
        }
        if loss == LossPolicy::Lossless && guard_bits != Self::lossless_guard_bits(fmt) {
            return Err(Error::Usage(format!(
                "lossless accumulator for {fmt} needs {} guard bits, got {guard_bits}",
                Self::lossless_guard_bits(fmt)
            )));
        }
        Ok(AccumulatorSpec {
            n_terms,
            exp_bits: fmt.exp_bits(),
            man_bits: fmt.man_bits(),
            bias: fmt.bias(),
            guard_bits,
            loss,
        })
    }

    pub fn lossless(n_terms: usize, fmt: &FpFormat) -> Result<Self> {
        Self::new(n_terms, fmt, LossPolicy::Lossless, Self::lossless_guard_bits(fmt))
    }

    pub fn truncate(n_terms: usize, fmt: &FpFormat, guard_bits: u32) -> Result<Self> {
        Self::new(n_terms, fmt, LossPolicy::Truncate, guard_bits)
    }

    pub fn sticky(n_terms: usize, fmt: &FpFormat, guard_bits: u32) -> Result<Self> {
        Self::new(n_terms, fmt, LossPolicy::Sticky, guard_bits)
    }

    /// Same geometry for a different number of addends.
    pub fn with_n_terms(mut self, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::Usage("accumulator needs at least one term".into()));
        }
        self.n_terms = n_terms;
        Ok(self)
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn exp_bits(&self) -> u32 {
        self.exp_bits
    }

    pub fn man_bits(&self) -> u32 {
        self.man_bits
    }

    /// Bias of the input format, needed to interpret the accumulator's scale.
    pub fn bias(&self) -> i32 {
        self.bias
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    pub fn loss(&self) -> LossPolicy {
        self.loss
    }

    /// Bits below the binal point.
    pub fn frac_bits(&self) -> u32 {
        self.man_bits + self.guard_bits
    }

    pub fn carry_bits(&self) -> u32 {
        (self.n_terms as u64).next_power_of_two().trailing_zeros()
    }

    /// Total accumulator width including sign.
    pub fn width(&self) -> u32 {
        1 + self.carry_bits() + 1 + self.frac_bits()
    }
}

/// A signed fixed-point accumulator value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct FixedVal {
    pub value: BigInt,
    /// OR of every bit discarded by shifts (Sticky policy only).
    pub sticky: bool,
}

impl FixedVal {
    pub fn new(value: impl Into<BigInt>) -> Self {
        FixedVal {
            value: value.into(),
            sticky: false,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    /// Whether the value lies in the signed `spec.width()`-bit range.
    pub fn fits(&self, spec: &AccumulatorSpec) -> bool {
        let w = u64::from(spec.width());
        let bits = self.value.bits();
        bits < w || (self.value.is_negative() && bits == w && self.value.trailing_zeros() == Some(w - 1))
    }

    /// Arithmetic right shift by `d`, rounding toward negative infinity.
    ///
    /// Shifts of `width` or more saturate to the sign extension.
    pub fn asr(&self, d: u32, spec: &AccumulatorSpec) -> FixedVal {
        if d == 0 {
            return self.clone();
        }
        let dropped = match self.value.trailing_zeros() {
            None => false,
            Some(tz) => tz < u64::from(d),
        };
        let value = if d >= spec.width() {
            if self.value.is_negative() {
                BigInt::from(-1)
            } else {
                BigInt::zero()
            }
        } else {
            &self.value >> d
        };
        let sticky = match spec.loss() {
            LossPolicy::Truncate => self.sticky,
            LossPolicy::Sticky => self.sticky || dropped,
            LossPolicy::Lossless => {
                assert!(!dropped, "lossless shift by {d} dropped a nonzero bit");
                false
            }
        };
        FixedVal { value, sticky }
    }

    /// Exact sum; the carry headroom makes overflow an internal bug.
    pub fn add(&self, other: &FixedVal, spec: &AccumulatorSpec) -> FixedVal {
        let sum = FixedVal {
            value: &self.value + &other.value,
            sticky: self.sticky || other.sticky,
        };
        assert!(
            sum.fits(spec),
            "accumulator overflow: {} exceeds {} bits",
            sum.value,
            spec.width()
        );
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{builtin_format, Builtin};

    fn spec(loss: LossPolicy) -> AccumulatorSpec {
        let fmt = builtin_format(Builtin::BFloat16);
        let guard = if loss == LossPolicy::Lossless { 255 } else { 4 };
        AccumulatorSpec::new(8, &fmt, loss, guard).unwrap()
    }

    #[test]
    fn geometry() {
        let fp32 = builtin_format(Builtin::Fp32);
        let s = AccumulatorSpec::lossless(64, &fp32).unwrap();
        assert_eq!(s.width(), 1 + 6 + 1 + 23 + 255);
        let s = AccumulatorSpec::truncate(5, &fp32, 0).unwrap();
        assert_eq!(s.carry_bits(), 3);
        assert_eq!(AccumulatorSpec::truncate(1, &fp32, 0).unwrap().carry_bits(), 0);
        assert!(AccumulatorSpec::new(4, &fp32, LossPolicy::Lossless, 3).is_err());
        assert!(AccumulatorSpec::truncate(0, &fp32, 3).is_err());
    }

    #[test]
    fn asr_floors() {
        let s = spec(LossPolicy::Truncate);
        assert_eq!(FixedVal::new(-3).asr(1, &s).value, BigInt::from(-2));
        let r = FixedVal::new(80).asr(4, &s);
        assert_eq!(r, FixedVal::new(5));
    }

    #[test]
    fn asr_sticky() {
        let s = spec(LossPolicy::Sticky);
        let r = FixedVal::new(81).asr(4, &s);
        assert_eq!(r.value, BigInt::from(5));
        assert!(r.sticky);
        assert!(!FixedVal::new(80).asr(4, &s).sticky);
        // Truncate never raises the flag.
        assert!(!FixedVal::new(81).asr(4, &spec(LossPolicy::Truncate)).sticky);
    }

    #[test]
    fn asr_saturates() {
        let s = spec(LossPolicy::Sticky);
        let w = s.width();
        let r = FixedVal::new(-5).asr(w + 10, &s);
        assert_eq!(r.value, BigInt::from(-1));
        assert!(r.sticky);
        let r = FixedVal::new(7).asr(w, &s);
        assert_eq!(r.value, BigInt::zero());
        assert!(r.sticky);
        assert_eq!(FixedVal::zero().asr(w + 1, &s), FixedVal::zero());
    }

    #[test]
    #[should_panic(expected = "lossless shift")]
    fn lossless_asserts_no_loss() {
        FixedVal::new(3).asr(1, &spec(LossPolicy::Lossless));
    }

    #[test]
    fn add_cases() {
        let s = spec(LossPolicy::Truncate);
        assert_eq!(FixedVal::new(64).add(&FixedVal::new(16), &s), FixedVal::new(80));
        assert!(FixedVal::new(64).add(&FixedVal::new(-64), &s).is_zero());
        let sticky = FixedVal { value: BigInt::from(1), sticky: true };
        assert!(FixedVal::new(2).add(&sticky, &s).sticky);
    }

    #[test]
    #[should_panic(expected = "accumulator overflow")]
    fn add_overflow_is_a_bug() {
        let s = spec(LossPolicy::Truncate);
        let big = FixedVal::new(BigInt::from(1) << (s.width() - 2));
        big.add(&big, &s);
    }

    #[test]
    fn fits_bounds() {
        let s = spec(LossPolicy::Truncate);
        let w = s.width();
        let top = BigInt::from(1) << (w - 1);
        assert!(FixedVal::new(-top.clone()).fits(&s));
        assert!(!FixedVal::new(top.clone()).fits(&s));
        assert!(FixedVal::new(top.clone() - 1).fits(&s));
        assert!(!FixedVal::new(-top - 1).fits(&s));
    }

    #[test]
    fn loss_policy_names() {
        for p in [LossPolicy::Truncate, LossPolicy::Sticky, LossPolicy::Lossless] {
            assert_eq!(p.name().parse::<LossPolicy>().unwrap(), p);
        }
        assert!("round".parse::<LossPolicy>().is_err());
    }
}
