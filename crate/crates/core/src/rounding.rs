//! Terminal normalization and rounding, and the end-to-end fused adder.

use num_bigint::BigUint;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::fixedpoint::AccumulatorSpec;
use crate::formats::{decode, resolve_specials, FpFormat, Special, Specials, Subnormals};
use crate::operator::{to_term, PartialSum};
use crate::tree::{eval_tree, TreeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum RoundingMode {
    #[default]
    NearestEven,
    TowardZero,
}

impl RoundingMode {
    pub fn name(self) -> &'static str {
        match self {
            RoundingMode::NearestEven => "rne",
            RoundingMode::TowardZero => "rtz",
        }
    }
}

impl std::str::FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rne" => Ok(RoundingMode::NearestEven),
            "rtz" => Ok(RoundingMode::TowardZero),
            _ => Err(Error::Usage(format!("unknown rounding mode `{s}` (expected rne or rtz)"))),
        }
    }
}

/// Rounds an accumulated partial sum to a word of `out`.
///
/// An exact zero accumulator gives `+0`. Under the Sticky policy a raised
/// flag means the true value lies strictly inside the accumulator LSB above
/// `o` (shifts floor), which is folded in as one extra half-LSB bit.
pub fn normalize_round(p: &PartialSum, out: &FpFormat, mode: RoundingMode, spec: &AccumulatorSpec) -> u64 {
    if p.o.is_zero() && !p.o.sticky {
        return 0;
    }
    let negative = p.o.value.is_negative();
    let mut magnitude = p.o.value.magnitude().clone();
    let mut lsb_exp = p.lsb_exponent(spec);
    if p.o.sticky {
        // value in (o, o + 1): magnitude in (|o| - 1, |o|) when negative.
        magnitude <<= 1u32;
        if negative {
            magnitude -= 1u32;
        } else {
            magnitude += 1u32;
        }
        lsb_exp -= 1;
    }
    round_magnitude(negative, &magnitude, lsb_exp, out, mode)
}

/// Rounds `(-1)^negative * magnitude * 2^scale` (magnitude > 0) with a
/// guard/round/sticky pass over the bits below the target LSB.
fn round_magnitude(negative: bool, magnitude: &BigUint, scale: i64, out: &FpFormat, mode: RoundingMode) -> u64 {
    let man = i64::from(out.man_bits());
    let sign = if negative { out.sign_mask() } else { 0 };
    let lead = scale + magnitude.bits() as i64 - 1;
    let min_normal_exp = 1 - i64::from(out.bias());
    let mut lsb = lead.max(min_normal_exp) - man;

    let shift = lsb - scale;
    let mut kept = if shift > 0 {
        let s = shift as u64;
        let kept = magnitude >> s;
        let round_bit = magnitude.bit(s - 1);
        let below = magnitude.trailing_zeros().is_some_and(|tz| tz < s - 1);
        let odd = kept.bit(0);
        let up = match mode {
            RoundingMode::NearestEven => round_bit && (below || odd),
            RoundingMode::TowardZero => false,
        };
        kept.to_u64().expect("kept bits fit the significand") + u64::from(up)
    } else {
        (magnitude << (-shift) as u64)
            .to_u64()
            .expect("kept bits fit the significand")
    };

    if kept >> (man + 1) != 0 {
        kept >>= 1;
        lsb += 1;
    }
    if kept == 0 {
        return sign;
    }
    let hidden = 1u64 << man;
    let biased = if kept < hidden { 0 } else { lsb + man + i64::from(out.bias()) };
    if biased == 0 && out.subnormals() == Subnormals::FlushToZero {
        return sign;
    }
    let word = sign | ((biased.max(0) as u64) << man) | (kept & out.man_mask());
    let overflow = biased > i64::from(out.max_finite_exp())
        || (out.specials() == Specials::NanOnly && Some(word & !out.sign_mask()) == out.canonical_nan());
    if overflow {
        return match (out.specials(), mode) {
            (Specials::IeeeLike, RoundingMode::NearestEven) => out.infinity(negative).unwrap(),
            _ => sign | out.max_finite_word(),
        };
    }
    word
}

/// Word for a special result in `out`.
///
/// Formats without infinities turn an infinite result into NaN when they
/// have one and saturate otherwise; a NaN result has no encoding in a
/// finite-only format.
pub fn special_word(special: Special, out: &FpFormat) -> Result<u64> {
    match special {
        Special::NaN => out
            .canonical_nan()
            .ok_or_else(|| Error::Unrepresentable(format!("NaN result in finite-only format {out}"))),
        Special::PosInf | Special::NegInf => {
            let negative = special == Special::NegInf;
            match out.specials() {
                Specials::IeeeLike => Ok(out.infinity(negative).unwrap()),
                Specials::NanOnly => Ok(out.canonical_nan().unwrap()),
                Specials::FiniteOnly => {
                    let sign = if negative { out.sign_mask() } else { 0 };
                    Ok(sign | out.max_finite_word())
                }
            }
        }
    }
}

/// Outcome of the alignment-and-addition stages, before rounding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    Special(Special),
    Finite(PartialSum),
}

/// A complete multi-term fused adder: decode, special-value bypass,
/// tree-structured alignment and addition, one terminal rounding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusedAdder {
    pub in_fmt: FpFormat,
    pub out_fmt: FpFormat,
    pub config: TreeConfig,
    pub spec: AccumulatorSpec,
    pub mode: RoundingMode,
}

impl FusedAdder {
    /// Output format defaults to the input format, rounding to nearest-even.
    pub fn new(in_fmt: FpFormat, config: TreeConfig, spec: AccumulatorSpec) -> Result<Self> {
        if spec.n_terms() < config.n_terms() {
            return Err(Error::Usage(format!(
                "accumulator sized for {} terms cannot hold configuration {config}",
                spec.n_terms()
            )));
        }
        if spec.man_bits() != in_fmt.man_bits() || spec.bias() != in_fmt.bias() {
            return Err(Error::Usage(format!("accumulator was not built for {in_fmt}")));
        }
        Ok(FusedAdder {
            in_fmt,
            out_fmt: in_fmt,
            config,
            spec,
            mode: RoundingMode::NearestEven,
        })
    }

    pub fn with_out_fmt(mut self, out_fmt: FpFormat) -> Self {
        self.out_fmt = out_fmt;
        self
    }

    pub fn with_mode(mut self, mode: RoundingMode) -> Self {
        self.mode = mode;
        self
    }

    /// Decodes `words` and runs every stage except rounding.
    pub fn reduce(&self, words: &[u64]) -> Result<Reduction> {
        if words.len() != self.config.n_terms() {
            return Err(Error::Usage(format!(
                "configuration {} takes {} words, got {}",
                self.config,
                self.config.n_terms(),
                words.len()
            )));
        }
        let decoded = words
            .iter()
            .map(|&w| decode(w, &self.in_fmt))
            .collect::<Result<Vec<_>>>()?;
        if let Some(special) = resolve_specials(&decoded) {
            return Ok(Reduction::Special(special));
        }
        let terms = decoded
            .iter()
            .map(|d| to_term(d, &self.spec))
            .collect::<Result<Vec<_>>>()?;
        eval_tree(&terms, &self.config, &self.spec).map(Reduction::Finite)
    }

    pub fn round(&self, reduction: &Reduction) -> Result<u64> {
        match reduction {
            Reduction::Special(s) => special_word(*s, &self.out_fmt),
            Reduction::Finite(p) => Ok(normalize_round(p, &self.out_fmt, self.mode, &self.spec)),
        }
    }

    pub fn sum(&self, words: &[u64]) -> Result<u64> {
        self.round(&self.reduce(words)?)
    }
}

/// Fused sum of `words` in `fmt`, rounded back to `fmt`.
pub fn fused_sum(
    words: &[u64],
    fmt: &FpFormat,
    cfg: &TreeConfig,
    spec: &AccumulatorSpec,
    mode: RoundingMode,
) -> Result<u64> {
    FusedAdder::new(*fmt, cfg.clone(), *spec)?
        .with_mode(mode)
        .sum(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::FixedVal;
    use crate::formats::{builtin_format, Builtin};
    use num_bigint::BigInt;

    fn bf16() -> FpFormat {
        builtin_format(Builtin::BFloat16)
    }

    #[test]
    fn exact_one() {
        let f = bf16();
        let spec = AccumulatorSpec::truncate(2, &f, 4).unwrap();
        let p = PartialSum::new(127, FixedVal::new(2048));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x3F80);
    }

    #[test]
    fn ties_to_even() {
        let f = bf16();
        let spec = AccumulatorSpec::truncate(2, &f, 4).unwrap();
        // 1 + 2^-8 lies halfway between 1.0 (even) and 1 + 2^-7.
        let p = PartialSum::new(127, FixedVal::new(2048 + 8));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x3F80);
        // 1 + 3 * 2^-8 is halfway between 0x3F81 (odd) and 0x3F82 (even).
        let p = PartialSum::new(127, FixedVal::new(2048 + 24));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x3F82);
        assert_eq!(normalize_round(&p, &f, RoundingMode::TowardZero, &spec), 0x3F81);
        let p = PartialSum::new(127, FixedVal::new(-(2048 + 24)));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0xBF82);
    }

    #[test]
    fn sticky_breaks_ties() {
        let f = bf16();
        let spec = AccumulatorSpec::sticky(2, &f, 4).unwrap();
        let p = PartialSum::new(127, FixedVal { value: BigInt::from(2048 + 8), sticky: true });
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x3F81);
        // Negative: floor put o below the true value, so the magnitude is
        // just under the halfway point and rounds down.
        let p = PartialSum::new(127, FixedVal { value: BigInt::from(-(2048 + 8)), sticky: true });
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0xBF80);
    }

    #[test]
    fn carry_out_renormalizes() {
        let f = bf16();
        let spec = AccumulatorSpec::truncate(2, &f, 4).unwrap();
        // 0x3FFF is 1.9921875; adding just over half an ulp rounds to 2.0.
        let p = PartialSum::new(127, FixedVal::new(0xFF * 16 + 9));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x4000);
    }

    #[test]
    fn overflow_policies() {
        let e5m2 = builtin_format(Builtin::Fp8E5M2);
        let spec = AccumulatorSpec::truncate(2, &e5m2, 0).unwrap();
        // 2 * max finite (0x7B)
        let p = PartialSum::new(30, FixedVal::new(14));
        assert_eq!(normalize_round(&p, &e5m2, RoundingMode::NearestEven, &spec), 0x7C);
        assert_eq!(normalize_round(&p, &e5m2, RoundingMode::TowardZero, &spec), 0x7B);
        let finite = e5m2.with_specials(Specials::FiniteOnly);
        assert_eq!(normalize_round(&p, &finite, RoundingMode::NearestEven, &spec), 0x7F);
        let e4m3 = builtin_format(Builtin::Fp8E4M3);
        assert_eq!(normalize_round(&p, &e4m3, RoundingMode::NearestEven, &spec), 0x7E);
    }

    #[test]
    fn underflow_policies() {
        let f = bf16();
        let spec = AccumulatorSpec::truncate(2, &f, 0).unwrap();
        // Smallest subnormal, 2^-133, expressed at lambda = 0.
        let p = PartialSum::new(1, FixedVal::new(1));
        assert_eq!(normalize_round(&p, &f, RoundingMode::NearestEven, &spec), 0x0001);
        let ftz = f.with_subnormals(Subnormals::FlushToZero);
        assert_eq!(normalize_round(&p, &ftz, RoundingMode::NearestEven, &spec), 0x0000);
        let p = PartialSum::new(1, FixedVal::new(-1));
        assert_eq!(normalize_round(&p, &ftz, RoundingMode::NearestEven, &spec), 0x8000);
    }

    #[test]
    fn zero_is_positive() {
        let f = bf16();
        let spec = AccumulatorSpec::lossless(4, &f).unwrap();
        let cfg = TreeConfig::baseline(4).unwrap();
        let w = fused_sum(&[0xBF80, 0x3F80, 0x8000, 0x8000], &f, &cfg, &spec, RoundingMode::NearestEven).unwrap();
        assert_eq!(w, 0);
    }

    #[test]
    fn fused_specials() {
        let f = bf16();
        let spec = AccumulatorSpec::lossless(4, &f).unwrap();
        let cfg = TreeConfig::new(vec![2, 2]).unwrap();
        let w = fused_sum(&[0x7F80, 0x3F80, 0xFF80, 0x4000], &f, &cfg, &spec, RoundingMode::NearestEven).unwrap();
        assert_eq!(Some(w), f.canonical_nan());
        let w = fused_sum(&[0xFF80, 0x3F80, 0, 0x4000], &f, &cfg, &spec, RoundingMode::NearestEven).unwrap();
        assert_eq!(w, 0xFF80);
        assert!(fused_sum(&[0; 3], &f, &cfg, &spec, RoundingMode::NearestEven).is_err());
    }

    #[test]
    fn special_words_in_other_formats() {
        let e4m3 = builtin_format(Builtin::Fp8E4M3);
        assert_eq!(special_word(Special::NegInf, &e4m3).unwrap(), 0x7F);
        let finite = e4m3.with_specials(Specials::FiniteOnly);
        assert_eq!(special_word(Special::NegInf, &finite).unwrap(), 0xFF);
        assert!(special_word(Special::NaN, &finite).is_err());
    }

    #[test]
    fn identity_sum() {
        let f = bf16();
        let spec = AccumulatorSpec::truncate(8, &f, 0).unwrap();
        let cfg: TreeConfig = "4-2".parse().unwrap();
        for x in [0x3F80u64, 0x0001, 0x80FF, 0x7F7F, 0xC2F7] {
            let mut words = vec![0u64; 8];
            words[0] = x;
            assert_eq!(fused_sum(&words, &f, &cfg, &spec, RoundingMode::NearestEven).unwrap(), x);
        }
    }

    #[test]
    fn wider_output() {
        let e4m3 = builtin_format(Builtin::Fp8E4M3);
        let fp32 = builtin_format(Builtin::Fp32);
        let spec = AccumulatorSpec::lossless(2, &e4m3).unwrap();
        let adder = FusedAdder::new(e4m3, TreeConfig::baseline(2).unwrap(), spec)
            .unwrap()
            .with_out_fmt(fp32);
        // 448 + 2^-9 is exact in fp32.
        let w = adder.sum(&[0x7E, 0x01]).unwrap();
        assert_eq!(f32::from_bits(w as u32), 448.0 + 2f32.powi(-9));
    }

    #[test]
    fn mode_names() {
        assert_eq!("RNE".parse::<RoundingMode>().unwrap(), RoundingMode::NearestEven);
        assert_eq!("rtz".parse::<RoundingMode>().unwrap(), RoundingMode::TowardZero);
        assert!("up".parse::<RoundingMode>().is_err());
    }
}
