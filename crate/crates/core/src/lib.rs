//! Bit-accurate model of multi-term fused floating-point addition.
//!
//! Summing N floating-point numbers with a single terminal rounding needs
//! every significand aligned to the largest exponent before the integer
//! addition. The classic datapath finds that maximum first and only then
//! shifts and adds ([`serial_baseline`]). This crate also models the online
//! formulation, where a running maximum and a rescaled running sum are
//! carried together ([`online_sequential`]), and its two-input step, the
//! associative align-and-add operator ([`op_combine`]), which lets the
//! alignment and addition be organized as any mixed-radix tree
//! ([`eval_tree`]).
//!
//! ```
//! use online_fpadd::{builtin_format, fused_sum, AccumulatorSpec, Builtin, RoundingMode, TreeConfig};
//!
//! let bf16 = builtin_format(Builtin::BFloat16);
//! let cfg: TreeConfig = "2-2".parse().unwrap();
//! let spec = AccumulatorSpec::lossless(4, &bf16).unwrap();
//! // 1 + 2 + 0.5 - 1 = 2.5
//! let sum = fused_sum(&[0x3F80, 0x4000, 0x3F00, 0xBF80], &bf16, &cfg, &spec, RoundingMode::NearestEven).unwrap();
//! assert_eq!(sum, 0x4020);
//! ```
//!
//! The [`oracle`] module is an independent exact reference used by the test
//! suites, and [`analysis`] sweeps configurations against it.

pub mod analysis;
pub mod error;
pub mod fixedpoint;
pub mod formats;
pub mod operator;
pub mod oracle;
pub mod rounding;
pub mod tree;
pub mod vectors;

pub use error::{Error, Result};
pub use fixedpoint::{AccumulatorSpec, FixedVal, LossPolicy};
pub use formats::{
    builtin_format, decode, encode, resolve_specials, Builtin, DecodedFp, FpClass, FpFormat, Special, Specials,
    Subnormals,
};
pub use operator::{online_sequential, op_combine, op_combine_radix, serial_baseline, to_term, PartialSum};
pub use oracle::{exact_sum, round_exact, ulp_distance, ExactSum};
pub use rounding::{fused_sum, normalize_round, FusedAdder, Reduction, RoundingMode};
pub use tree::{enumerate_configs, eval_tree, parse_config, structural_report, CostReport, TreeConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/formats.md")]
    struct Formats;
    #[doc = include_str!("../../../book/src/alignment.md")]
    struct Alignment;
    #[doc = include_str!("../../../book/src/operator.md")]
    struct Operator;
    #[doc = include_str!("../../../book/src/trees.md")]
    struct Trees;
    #[doc = include_str!("../../../book/src/rounding.md")]
    struct Rounding;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
