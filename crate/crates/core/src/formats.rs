//! Parameterized binary floating-point formats.
//!
//! A format is a sign bit, an `exp_bits`-wide biased exponent and a
//! `man_bits`-wide fraction. Finite values are
//! `(-1)^s * significand * 2^(biased_exp - bias - man_bits)` where the
//! significand carries the leading bit explicitly. Subnormals decode with
//! `biased_exp = 1` and a clear leading bit, so the same formula covers both.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the all-ones exponent field is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Specials {
    /// All-ones exponent encodes infinity (zero fraction) or NaN.
    IeeeLike,
    /// No infinities; only the all-ones exponent with all-ones fraction is
    /// NaN, the rest of that binade holds finite numbers (the common FP8
    /// e4m3 convention).
    NanOnly,
    /// Every encoding is a finite number.
    FiniteOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subnormals {
    Support,
    FlushToZero,
}

/// The built-in formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Fp32,
    BFloat16,
    Fp8E4M3,
    Fp8E5M2,
    Fp8E6M1,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::Fp32,
        Builtin::BFloat16,
        Builtin::Fp8E4M3,
        Builtin::Fp8E5M2,
        Builtin::Fp8E6M1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Fp32 => "fp32",
            Builtin::BFloat16 => "bf16",
            Builtin::Fp8E4M3 => "e4m3",
            Builtin::Fp8E5M2 => "e5m2",
            Builtin::Fp8E6M1 => "e6m1",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(name))
    }
}

/// Returns the named built-in format.
pub fn builtin_format(name: Builtin) -> FpFormat {
    let (exp_bits, man_bits) = match name {
        Builtin::Fp32 => (8, 23),
        Builtin::BFloat16 => (8, 7),
        Builtin::Fp8E4M3 => (4, 3),
        Builtin::Fp8E5M2 => (5, 2),
        Builtin::Fp8E6M1 => (6, 1),
    };
    let fmt = FpFormat::new(exp_bits, man_bits).expect("built-in widths are valid");
    match name {
        Builtin::Fp8E4M3 => fmt.with_specials(Specials::NanOnly),
        _ => fmt,
    }
}

/// A binary floating-point layout together with its special-value policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FpFormat {
    exp_bits: u32,
    man_bits: u32,
    bias: i32,
    specials: Specials,
    subnormals: Subnormals,
}

impl FpFormat {
    /// Largest supported exponent field. Exponent arithmetic is done in
    /// `u32`, and lossless accumulators need `2^exp_bits` guard bits.
    pub const MAX_EXP_BITS: u32 = 30;

    /// Creates a format with the default bias `2^(exp_bits-1) - 1`, IEEE-like
    /// specials and subnormal support.
    pub fn new(exp_bits: u32, man_bits: u32) -> Result<Self> {
        if !(2..=Self::MAX_EXP_BITS).contains(&exp_bits) {
            return Err(Error::Format(format!(
                "exponent width {exp_bits} outside 2..={}",
                Self::MAX_EXP_BITS
            )));
        }
        if man_bits < 1 {
            return Err(Error::Format("mantissa width must be at least 1".into()));
        }
        if 1 + exp_bits + man_bits > 64 {
            return Err(Error::Format(format!(
                "total width {} exceeds 64 bits",
                1 + exp_bits + man_bits
            )));
        }
        Ok(FpFormat {
            exp_bits,
            man_bits,
            bias: (1 << (exp_bits - 1)) - 1,
            specials: Specials::IeeeLike,
            subnormals: Subnormals::Support,
        })
    }

    pub fn with_bias(mut self, bias: i32) -> Result<Self> {
        if bias <= 0 || i64::from(bias) >= 1i64 << self.exp_bits {
            return Err(Error::Format(format!(
                "bias {bias} outside 1..{}",
                1i64 << self.exp_bits
            )));
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn with_specials(mut self, specials: Specials) -> Self {
        self.specials = specials;
        self
    }

    pub fn with_subnormals(mut self, subnormals: Subnormals) -> Self {
        self.subnormals = subnormals;
        self
    }

    pub fn exp_bits(&self) -> u32 {
        self.exp_bits
    }

    pub fn man_bits(&self) -> u32 {
        self.man_bits
    }

    pub fn bias(&self) -> i32 {
        self.bias
    }

    pub fn specials(&self) -> Specials {
        self.specials
    }

    pub fn subnormals(&self) -> Subnormals {
        self.subnormals
    }

    /// Total encoding width in bits.
    pub fn width(&self) -> u32 {
        1 + self.exp_bits + self.man_bits
    }

    /// All-ones exponent field value.
    pub fn exp_field_max(&self) -> u32 {
        (1u32 << self.exp_bits) - 1
    }

    pub fn sign_mask(&self) -> u64 {
        1u64 << (self.exp_bits + self.man_bits)
    }

    pub fn man_mask(&self) -> u64 {
        (1u64 << self.man_bits) - 1
    }

    pub fn has_inf(&self) -> bool {
        self.specials == Specials::IeeeLike
    }

    pub fn has_nan(&self) -> bool {
        self.specials != Specials::FiniteOnly
    }

    /// Largest biased exponent that holds finite numbers.
    pub fn max_finite_exp(&self) -> u32 {
        match self.specials {
            Specials::IeeeLike => self.exp_field_max() - 1,
            Specials::NanOnly | Specials::FiniteOnly => self.exp_field_max(),
        }
    }

    /// Encoding of the largest positive finite value.
    pub fn max_finite_word(&self) -> u64 {
        let frac = match self.specials {
            Specials::NanOnly => self.man_mask() - 1,
            _ => self.man_mask(),
        };
        (u64::from(self.max_finite_exp()) << self.man_bits) | frac
    }

    /// The single quiet-NaN pattern produced by this library, if the format
    /// has NaNs.
    pub fn canonical_nan(&self) -> Option<u64> {
        let exp = u64::from(self.exp_field_max()) << self.man_bits;
        match self.specials {
            Specials::IeeeLike => Some(exp | (1u64 << (self.man_bits - 1))),
            Specials::NanOnly => Some(exp | self.man_mask()),
            Specials::FiniteOnly => None,
        }
    }

    pub fn infinity(&self, negative: bool) -> Option<u64> {
        self.has_inf().then(|| {
            let sign = if negative { self.sign_mask() } else { 0 };
            sign | (u64::from(self.exp_field_max()) << self.man_bits)
        })
    }

    /// Whether `word` is a NaN encoding other than the canonical one.
    pub fn is_noncanonical_nan(&self, word: u64) -> bool {
        matches!(decode(word, self), Ok(d) if d.class == FpClass::NaN)
            && Some(word) != self.canonical_nan()
    }

    fn builtin_match(&self) -> Option<Builtin> {
        Builtin::ALL
            .into_iter()
            .find(|b| builtin_format(*b) == *self)
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(b) = self.builtin_match() {
            return f.write_str(b.name());
        }
        write!(f, "e{}m{}", self.exp_bits, self.man_bits)?;
        if self.bias != (1 << (self.exp_bits - 1)) - 1 {
            write!(f, "b{}", self.bias)?;
        }
        match self.specials {
            Specials::IeeeLike => {
                // Only needed where the bare name would hit a built-in.
                if Builtin::from_name(&format!("e{}m{}", self.exp_bits, self.man_bits)).is_some() {
                    f.write_str(",ieee")?;
                }
            }
            Specials::NanOnly => f.write_str(",fn")?,
            Specials::FiniteOnly => f.write_str(",finite")?,
        }
        if self.subnormals == Subnormals::FlushToZero {
            f.write_str(",ftz")?;
        }
        Ok(())
    }
}

/// Parses `e<E>m<M>[b<BIAS>][,finite][,fn][,ieee][,ftz]` or one of the
/// built-in names `fp32`, `bf16`, `e4m3`, `e5m2`, `e6m1` (case-insensitive,
/// modifiers allowed after them too).
impl FromStr for FpFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim);
        let head = parts.next().unwrap_or_default();
        let mut fmt = match Builtin::from_name(head) {
            Some(b) => builtin_format(b),
            None => parse_layout(head)?,
        };
        for modifier in parts {
            match modifier.to_ascii_lowercase().as_str() {
                "finite" => fmt = fmt.with_specials(Specials::FiniteOnly),
                "fn" => fmt = fmt.with_specials(Specials::NanOnly),
                "ieee" => fmt = fmt.with_specials(Specials::IeeeLike),
                "ftz" => fmt = fmt.with_subnormals(Subnormals::FlushToZero),
                other => {
                    return Err(Error::Format(format!(
                        "unknown format modifier `{other}` in `{s}`"
                    )))
                }
            }
        }
        Ok(fmt)
    }
}

fn parse_layout(head: &str) -> Result<FpFormat> {
    let bad = || Error::Format(format!("cannot parse format `{head}`"));
    let lower = head.to_ascii_lowercase();
    let rest = lower.strip_prefix('e').ok_or_else(bad)?;
    let (exp, rest) = rest.split_once('m').ok_or_else(bad)?;
    let (man, bias) = match rest.split_once('b') {
        Some((man, bias)) => (man, Some(bias)),
        None => (rest, None),
    };
    let exp: u32 = exp.parse().map_err(|_| bad())?;
    let man: u32 = man.parse().map_err(|_| bad())?;
    let fmt = FpFormat::new(exp, man)?;
    match bias {
        Some(b) => fmt.with_bias(b.parse().map_err(|_| bad())?),
        None => Ok(fmt),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Inf,
    NaN,
}

impl FpClass {
    pub fn is_finite(self) -> bool {
        matches!(self, FpClass::Zero | FpClass::Subnormal | FpClass::Normal)
    }
}

/// An unpacked operand.
///
/// For Inf the significand is zero; for NaN it holds the raw fraction
/// payload. Zero decodes with `biased_exp = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecodedFp {
    pub negative: bool,
    pub biased_exp: u32,
    pub significand: u64,
    pub class: FpClass,
}

impl DecodedFp {
    /// Signed value as `f64`. Exact for every format narrower than `f64`'s
    /// own precision and range, approximate otherwise.
    pub fn to_f64(&self, fmt: &FpFormat) -> f64 {
        let magnitude = match self.class {
            FpClass::Zero => 0.0,
            FpClass::Inf => f64::INFINITY,
            FpClass::NaN => return f64::NAN,
            FpClass::Normal | FpClass::Subnormal => {
                let scale = i64::from(self.biased_exp) - i64::from(fmt.bias) - i64::from(fmt.man_bits);
                self.significand as f64 * 2f64.powi(scale as i32)
            }
        };
        if self.negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// Unpacks `word` according to `fmt`.
pub fn decode(word: u64, fmt: &FpFormat) -> Result<DecodedFp> {
    if fmt.width() < 64 && word >> fmt.width() != 0 {
        return Err(Error::Usage(format!(
            "word {word:#x} does not fit in {} bits",
            fmt.width()
        )));
    }
    let negative = word & fmt.sign_mask() != 0;
    let exp_field = ((word >> fmt.man_bits) as u32) & fmt.exp_field_max();
    let frac = word & fmt.man_mask();
    let hidden = 1u64 << fmt.man_bits;

    let (biased_exp, significand, class) = if exp_field == fmt.exp_field_max() {
        match fmt.specials {
            Specials::IeeeLike if frac == 0 => (exp_field, 0, FpClass::Inf),
            Specials::IeeeLike => (exp_field, frac, FpClass::NaN),
            Specials::NanOnly if frac == fmt.man_mask() => (exp_field, frac, FpClass::NaN),
            _ => (exp_field, hidden | frac, FpClass::Normal),
        }
    } else if exp_field == 0 {
        if frac == 0 || fmt.subnormals == Subnormals::FlushToZero {
            (0, 0, FpClass::Zero)
        } else {
            (1, frac, FpClass::Subnormal)
        }
    } else {
        (exp_field, hidden | frac, FpClass::Normal)
    };

    Ok(DecodedFp {
        negative,
        biased_exp,
        significand,
        class,
    })
}

/// Packs a decoded operand. NaNs always encode to the canonical pattern.
pub fn encode(d: &DecodedFp, fmt: &FpFormat) -> Result<u64> {
    let sign = if d.negative { fmt.sign_mask() } else { 0 };
    let hidden = 1u64 << fmt.man_bits;
    let unrepresentable = |why: &str| Error::Unrepresentable(format!("{d:?} in {fmt}: {why}"));
    match d.class {
        FpClass::Zero => {
            if d.significand != 0 {
                return Err(unrepresentable("zero with nonzero significand"));
            }
            Ok(sign)
        }
        FpClass::Subnormal => {
            if fmt.subnormals == Subnormals::FlushToZero {
                return Err(unrepresentable("format flushes subnormals"));
            }
            if d.biased_exp != 1 || d.significand == 0 || d.significand >= hidden {
                return Err(unrepresentable("malformed subnormal"));
            }
            Ok(sign | d.significand)
        }
        FpClass::Normal => {
            if d.significand & hidden == 0 || d.significand >> (fmt.man_bits + 1) != 0 {
                return Err(unrepresentable("significand not normalized"));
            }
            if d.biased_exp == 0 || d.biased_exp > fmt.max_finite_exp() {
                return Err(unrepresentable("exponent out of range"));
            }
            let word = sign | (u64::from(d.biased_exp) << fmt.man_bits) | (d.significand & fmt.man_mask());
            if fmt.specials == Specials::NanOnly && word & !fmt.sign_mask() == fmt.canonical_nan().unwrap() {
                return Err(unrepresentable("pattern is reserved for NaN"));
            }
            Ok(word)
        }
        FpClass::Inf => fmt
            .infinity(d.negative)
            .ok_or_else(|| unrepresentable("format has no infinities")),
        FpClass::NaN => fmt
            .canonical_nan()
            .ok_or_else(|| unrepresentable("format has no NaN")),
    }
}

/// Result of a sum forced by special operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Special {
    NaN,
    PosInf,
    NegInf,
}

/// IEEE addition rules for special operands: NaN dominates, opposite
/// infinities give NaN, otherwise any infinity passes through.
pub fn resolve_specials(operands: &[DecodedFp]) -> Option<Special> {
    let mut pos_inf = false;
    let mut neg_inf = false;
    for d in operands {
        match d.class {
            FpClass::NaN => return Some(Special::NaN),
            FpClass::Inf if d.negative => neg_inf = true,
            FpClass::Inf => pos_inf = true,
            _ => {}
        }
    }
    match (pos_inf, neg_inf) {
        (true, true) => Some(Special::NaN),
        (true, false) => Some(Special::PosInf),
        (false, true) => Some(Special::NegInf),
        (false, false) => None,
    }
}
