//! Fraction alignment and addition.
//!
//! Three routes to the same `(max exponent, aligned sum)` pair:
//!
//! * [`serial_baseline`] finds the maximum exponent first, then aligns every
//!   term against it and accumulates.
//! * [`online_sequential`] carries a running maximum and rescales the
//!   running sum whenever the maximum grows, in a single pass.
//! * [`op_combine`] is the two-input align-and-add operator. It is
//!   associative, so any reduction tree of it yields the same pair as the
//!   serial route when no bits are lost. [`op_combine_radix`] is its k-input
//!   form.

use crate::error::{Error, Result};
use crate::fixedpoint::{AccumulatorSpec, FixedVal};
use crate::formats::{DecodedFp, FpClass};

/// Running maximum biased exponent and the accumulated signed significand
/// aligned to it.
///
/// The represented value is `o * 2^(lambda - bias - man_bits - guard_bits)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PartialSum {
    pub lambda: u32,
    pub o: FixedVal,
}

impl PartialSum {
    pub fn new(lambda: u32, o: FixedVal) -> Self {
        PartialSum { lambda, o }
    }

    /// Power-of-two weight of the accumulator LSB.
    pub fn lsb_exponent(&self, spec: &AccumulatorSpec) -> i64 {
        i64::from(self.lambda) - i64::from(spec.bias()) - i64::from(spec.frac_bits())
    }
}

/// Places a finite operand in the accumulator, left-justified over the guard
/// field and negated for negative signs.
pub fn to_term(d: &DecodedFp, spec: &AccumulatorSpec) -> Result<PartialSum> {
    match d.class {
        FpClass::Zero => Ok(PartialSum::default()),
        FpClass::Normal | FpClass::Subnormal => {
            let mut value = num_bigint::BigInt::from(d.significand) << spec.guard_bits();
            if d.negative {
                value = -value;
            }
            Ok(PartialSum::new(d.biased_exp, FixedVal::new(value)))
        }
        FpClass::Inf | FpClass::NaN => Err(Error::Usage(format!(
            "{:?} operand reached the accumulator; resolve specials first",
            d.class
        ))),
    }
}

/// Two-input align-and-add.
pub fn op_combine(a: &PartialSum, b: &PartialSum, spec: &AccumulatorSpec) -> PartialSum {
    let lambda = a.lambda.max(b.lambda);
    let o = a
        .o
        .asr(lambda - a.lambda, spec)
        .add(&b.o.asr(lambda - b.lambda, spec), spec);
    PartialSum { lambda, o }
}

/// k-input align-and-add: one maximum over all exponents, one alignment
/// shift per input, one multi-input addition.
pub fn op_combine_radix(terms: &[PartialSum], spec: &AccumulatorSpec) -> Result<PartialSum> {
    if terms.len() < 2 {
        return Err(Error::Usage(format!(
            "radix operator needs at least 2 inputs, got {}",
            terms.len()
        )));
    }
    Ok(align_and_add(terms, spec))
}

fn align_and_add(terms: &[PartialSum], spec: &AccumulatorSpec) -> PartialSum {
    let lambda = terms.iter().map(|t| t.lambda).max().unwrap_or(0);
    let o = terms.iter().fold(FixedVal::zero(), |acc, t| {
        acc.add(&t.o.asr(lambda - t.lambda, spec), spec)
    });
    PartialSum { lambda, o }
}

/// Max-then-align-then-add over all terms, as two separate loops.
pub fn serial_baseline(terms: &[PartialSum], spec: &AccumulatorSpec) -> Result<PartialSum> {
    if terms.is_empty() {
        return Err(Error::Usage("cannot sum an empty list".into()));
    }
    let mut lambda = 0;
    for t in terms {
        lambda = lambda.max(t.lambda);
    }
    let mut o = FixedVal::zero();
    for t in terms {
        let aligned = t.o.asr(lambda - t.lambda, spec);
        o = o.add(&aligned, spec);
    }
    Ok(PartialSum { lambda, o })
}

/// Single-pass recursion: each step raises the running maximum to include
/// the new exponent, shifts the running sum by the increase, and adds the
/// new term shifted by its own distance to the maximum.
pub fn online_sequential(terms: &[PartialSum], spec: &AccumulatorSpec) -> Result<PartialSum> {
    if terms.is_empty() {
        return Err(Error::Usage("cannot sum an empty list".into()));
    }
    let mut state = PartialSum::default();
    for t in terms {
        let lambda = state.lambda.max(t.lambda);
        let o = state
            .o
            .asr(lambda - state.lambda, spec)
            .add(&t.o.asr(lambda - t.lambda, spec), spec);
        state = PartialSum { lambda, o };
    }
    Ok(state)
}
