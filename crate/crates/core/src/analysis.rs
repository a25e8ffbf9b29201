//! Design-space sweeps: every tree configuration for an adder width, under a
//! grid of accumulator geometries, scored against the exact oracle and the
//! single-node baseline, plus the structural census of each tree.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixedpoint::{AccumulatorSpec, LossPolicy};
use crate::formats::{decode, FpFormat};
use crate::operator::{online_sequential, serial_baseline, to_term, PartialSum};
use crate::oracle::{exact_sum, round_exact, ulp_distance, ExactSum};
use crate::rounding::{normalize_round, RoundingMode};
use crate::tree::{enumerate_configs, eval_tree, structural_report, CostReport, TreeConfig};

/// Where sample vectors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Uniformly random bit patterns, non-finite ones redrawn.
    UniformBits,
    /// Normally distributed reals rounded to the format.
    Normal { mean: f64, std_dev: f64 },
    /// Caller-supplied finite vectors.
    Vectors(Vec<Vec<u64>>),
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::UniformBits => "uniform".into(),
            DataSource::Normal { mean, std_dev } => format!("normal({mean},{std_dev})"),
            DataSource::Vectors(v) => format!("file({} vectors)", v.len()),
        }
    }
}

/// Draws a uniformly random finite word.
pub fn random_finite_word<R: Rng>(rng: &mut R, fmt: &FpFormat) -> u64 {
    let mask = if fmt.width() == 64 { u64::MAX } else { (1u64 << fmt.width()) - 1 };
    loop {
        let w = rng.random::<u64>() & mask;
        if decode(w, fmt).is_ok_and(|d| d.class.is_finite()) {
            return w;
        }
    }
}

/// `samples` seeded vectors of `n_terms` finite words.
pub fn generate_vectors(
    source: &DataSource,
    fmt: &FpFormat,
    n_terms: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<u64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match source {
        DataSource::UniformBits => Ok((0..samples)
            .map(|_| (0..n_terms).map(|_| random_finite_word(&mut rng, fmt)).collect())
            .collect()),
        DataSource::Normal { mean, std_dev } => {
            if !(*std_dev > 0.0 && std_dev.is_finite() && mean.is_finite()) {
                return Err(Error::Usage(format!("bad normal distribution N({mean}, {std_dev})")));
            }
            let normal = Normal::new(*mean, *std_dev)
                .map_err(|e| Error::Usage(format!("bad normal distribution: {e}")))?;
            let mut draw = || loop {
                let x = ExactSum::from_f64(normal.sample(&mut rng)).expect("normal samples are finite");
                let w = round_exact(&x, fmt, RoundingMode::NearestEven);
                if decode(w, fmt).is_ok_and(|d| d.class.is_finite()) {
                    return w;
                }
            };
            Ok((0..samples)
                .map(|_| (0..n_terms).map(|_| draw()).collect())
                .collect())
        }
        DataSource::Vectors(vectors) => {
            for (i, v) in vectors.iter().enumerate() {
                if v.len() != n_terms {
                    return Err(Error::Usage(format!(
                        "vector {} has {} words, expected {n_terms}",
                        i + 1,
                        v.len()
                    )));
                }
                for &w in v {
                    if !decode(w, fmt)?.class.is_finite() {
                        return Err(Error::Usage(format!(
                            "vector {} holds non-finite word {w:#x}; sweeps need finite inputs",
                            i + 1
                        )));
                    }
                }
            }
            let take = if samples == 0 { vectors.len() } else { samples.min(vectors.len()) };
            Ok(vectors[..take].to_vec())
        }
    }
}

/// One accumulator geometry to sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub loss: LossPolicy,
    /// Ignored for lossless points, which always use the lossless width.
    pub guard_bits: u32,
}

impl GridPoint {
    pub fn spec(&self, n_terms: usize, fmt: &FpFormat) -> Result<AccumulatorSpec> {
        match self.loss {
            LossPolicy::Lossless => AccumulatorSpec::lossless(n_terms, fmt),
            loss => AccumulatorSpec::new(n_terms, fmt, loss, self.guard_bits),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub n_terms: usize,
    pub fmt: FpFormat,
    pub out_fmt: FpFormat,
    pub mode: RoundingMode,
    pub grid: Vec<GridPoint>,
    pub source: DataSource,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config: TreeConfig,
    pub loss: LossPolicy,
    pub guard_bits: u32,
    pub samples: usize,
    pub max_ulp: u64,
    pub mean_ulp: f64,
    /// Fraction of samples whose output word differs from the baseline's.
    pub mismatch_rate: f64,
    pub structural: CostReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub params: SweepParams,
    pub rows: Vec<SweepResult>,
}

pub const CSV_HEADER: [&str; 13] = [
    "config",
    "depth",
    "nodes",
    "comparators",
    "shifters",
    "shifter_width",
    "loss_policy",
    "guard_bits",
    "samples",
    "max_ulp",
    "mean_ulp",
    "mismatch_rate",
    "seed",
];

/// ULP distance that places infinities one step past the largest finite
/// value, so saturating and overflowing results stay comparable.
pub fn output_error(got: u64, want: u64, fmt: &FpFormat) -> u64 {
    if got == want {
        return 0;
    }
    let clamp = |w: u64| match decode(w, fmt) {
        Ok(d) if d.class.is_finite() => (w, 0),
        Ok(d) if d.class == crate::formats::FpClass::Inf => {
            let sign = if d.negative { fmt.sign_mask() } else { 0 };
            (sign | fmt.max_finite_word(), 1)
        }
        _ => (w, u64::MAX / 4),
    };
    let (g, ge) = clamp(got);
    let (w, we) = clamp(want);
    ulp_distance(g, w, fmt).map_or(u64::MAX / 2, |d| d + ge + we)
}

fn terms_of(words: &[u64], fmt: &FpFormat, spec: &AccumulatorSpec) -> Result<Vec<PartialSum>> {
    words
        .iter()
        .map(|&w| to_term(&decode(w, fmt)?, spec))
        .collect()
}

/// Runs every configuration of `params.n_terms` over every grid point.
pub fn sweep(params: &SweepParams) -> Result<SweepReport> {
    let configs = enumerate_configs(params.n_terms)?;
    let vectors = generate_vectors(&params.source, &params.fmt, params.n_terms, params.samples, params.seed)?;
    let expected: Vec<u64> = vectors
        .par_iter()
        .map(|v| Ok(round_exact(&exact_sum(v, &params.fmt)?, &params.out_fmt, params.mode)))
        .collect::<Result<_>>()?;
    let baseline = TreeConfig::baseline(params.n_terms)?;

    let mut rows = Vec::new();
    for point in &params.grid {
        let spec = point.spec(params.n_terms, &params.fmt)?;
        let run = |cfg: &TreeConfig| -> Result<Vec<u64>> {
            vectors
                .par_iter()
                .map(|v| {
                    let p = eval_tree(&terms_of(v, &params.fmt, &spec)?, cfg, &spec)?;
                    Ok(normalize_round(&p, &params.out_fmt, params.mode, &spec))
                })
                .collect()
        };
        let base_out = run(&baseline)?;
        for cfg in &configs {
            let out = if *cfg == baseline { base_out.clone() } else { run(cfg)? };
            let errors: Vec<u64> = out
                .iter()
                .zip(&expected)
                .map(|(&g, &w)| output_error(g, w, &params.out_fmt))
                .collect();
            let n = vectors.len().max(1) as f64;
            let mismatches = out.iter().zip(&base_out).filter(|(a, b)| a != b).count();
            rows.push(SweepResult {
                config: cfg.clone(),
                loss: point.loss,
                guard_bits: spec.guard_bits(),
                samples: vectors.len(),
                max_ulp: errors.iter().copied().max().unwrap_or(0),
                mean_ulp: errors.iter().map(|&e| e as f64).sum::<f64>() / n,
                mismatch_rate: mismatches as f64 / n,
                structural: structural_report(cfg, &params.fmt, &spec),
            });
        }
    }
    Ok(SweepReport {
        params: params.clone(),
        rows,
    })
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.config.to_string(),
                r.structural.depth.to_string(),
                r.structural.nodes.to_string(),
                r.structural.comparators.to_string(),
                r.structural.shifters.to_string(),
                r.structural.shifter_width.to_string(),
                r.loss.name().to_string(),
                r.guard_bits.to_string(),
                r.samples.to_string(),
                r.max_ulp.to_string(),
                format!("{:.6}", r.mean_ulp),
                format!("{:.6}", r.mismatch_rate),
                self.params.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Human-readable table with a header naming the run.
    pub fn to_table(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# N={} fmt={} out={} round={} source={} samples={} seed={}",
            p.n_terms,
            p.fmt,
            p.out_fmt,
            p.mode.name(),
            p.source.name(),
            self.rows.first().map_or(0, |r| r.samples),
            p.seed
        );
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>5} {:>6} {:>9} {:>5} {:>8} {:>9} {:>9}",
            "config", "depth", "nodes", "width", "loss", "F", "max_ulp", "mean_ulp", "mismatch"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>5} {:>5} {:>6} {:>9} {:>5} {:>8} {:>9.4} {:>9.4}",
                r.config.to_string(),
                r.structural.depth,
                r.structural.nodes,
                r.structural.shifter_width,
                r.loss.name(),
                r.guard_bits,
                r.max_ulp,
                r.mean_ulp,
                r.mismatch_rate
            );
        }
        s
    }
}

/// Per-route error summary from [`verify`] in lossy modes.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteDelta {
    pub route: String,
    pub max_ulp: u64,
    pub mean_ulp: f64,
    /// Fraction of samples whose output word differs from the serial route's.
    pub mismatch_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VerifyOutcome {
    /// Lossless run where every route agreed on every vector.
    AllEqual,
    /// Lossless run that found a disagreement.
    Counterexample { vector: Vec<u64>, route: String },
    /// Lossy runs report deltas rather than asserting equality.
    Deltas(Vec<RouteDelta>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub configs: usize,
    pub samples: usize,
    pub outcome: VerifyOutcome,
}

/// Cross-checks the serial route, the online route and every tree
/// configuration on seeded uniform vectors.
///
/// Lossless runs demand bit equality of `(lambda, o)` and of the rounded
/// word across all routes, and of the rounded word with the oracle.
pub fn verify(
    fmt: &FpFormat,
    out_fmt: &FpFormat,
    spec: &AccumulatorSpec,
    mode: RoundingMode,
    samples: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let n = spec.n_terms();
    let configs = enumerate_configs(n)?;
    let vectors = generate_vectors(&DataSource::UniformBits, fmt, n, samples, seed)?;

    // Per vector: oracle word, then (route, partial sum, word) per route.
    let results: Vec<(u64, Vec<(PartialSum, u64)>)> = vectors
        .par_iter()
        .map(|v| {
            let terms = terms_of(v, fmt, spec)?;
            let mut routes = vec![serial_baseline(&terms, spec)?, online_sequential(&terms, spec)?];
            for cfg in &configs {
                routes.push(eval_tree(&terms, cfg, spec)?);
            }
            let words = routes
                .into_iter()
                .map(|p| {
                    let w = normalize_round(&p, out_fmt, mode, spec);
                    (p, w)
                })
                .collect();
            Ok((round_exact(&exact_sum(v, fmt)?, out_fmt, mode), words))
        })
        .collect::<Result<_>>()?;

    let route_names: Vec<String> = ["serial".to_string(), "online".to_string()]
        .into_iter()
        .chain(configs.iter().map(|c| c.to_string()))
        .collect();

    let outcome = if spec.loss() == LossPolicy::Lossless {
        let mismatch = results.iter().zip(&vectors).find_map(|((oracle, routes), v)| {
            let (ref_p, ref_w) = &routes[0];
            if *ref_w != *oracle {
                return Some((v.clone(), "oracle".to_string()));
            }
            routes
                .iter()
                .position(|(p, w)| p != ref_p || w != ref_w)
                .map(|i| (v.clone(), route_names[i].clone()))
        });
        match mismatch {
            Some((vector, route)) => VerifyOutcome::Counterexample { vector, route },
            None => VerifyOutcome::AllEqual,
        }
    } else {
        let count = results.len().max(1) as f64;
        let deltas = route_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let errors: Vec<u64> = results
                    .iter()
                    .map(|(oracle, routes)| output_error(routes[i].1, *oracle, out_fmt))
                    .collect();
                let mismatches = results.iter().filter(|(_, r)| r[i].1 != r[0].1).count();
                RouteDelta {
                    route: name.clone(),
                    max_ulp: errors.iter().copied().max().unwrap_or(0),
                    mean_ulp: errors.iter().map(|&e| e as f64).sum::<f64>() / count,
                    mismatch_rate: mismatches as f64 / count,
                }
            })
            .collect();
        VerifyOutcome::Deltas(deltas)
    };
    Ok(VerifyReport {
        configs: configs.len(),
        samples: vectors.len(),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{builtin_format, Builtin};

    fn params(fmt: FpFormat, n: usize, grid: Vec<GridPoint>) -> SweepParams {
        SweepParams {
            n_terms: n,
            fmt,
            out_fmt: fmt,
            mode: RoundingMode::NearestEven,
            grid,
            source: DataSource::UniformBits,
            samples: 300,
            seed: 42,
        }
    }

    #[test]
    fn lossless_rows_are_exact() {
        let fmt = builtin_format(Builtin::BFloat16);
        let r = sweep(&params(fmt, 8, vec![GridPoint { loss: LossPolicy::Lossless, guard_bits: 0 }])).unwrap();
        assert_eq!(r.rows.len(), 4);
        for row in &r.rows {
            assert_eq!(row.max_ulp, 0, "{}", row.config);
            assert_eq!(row.mismatch_rate, 0.0);
            assert_eq!(row.guard_bits, 255);
        }
    }

    #[test]
    fn guard_bits_reduce_error() {
        let fmt = builtin_format(Builtin::Fp8E4M3);
        let grid = [0, 3]
            .map(|f| GridPoint { loss: LossPolicy::Truncate, guard_bits: f })
            .to_vec();
        let r = sweep(&params(fmt, 8, grid)).unwrap();
        let (f0, f3) = r.rows.split_at(4);
        for (a, b) in f0.iter().zip(f3) {
            assert_eq!(a.config, b.config);
            assert!(b.max_ulp <= a.max_ulp, "{}: {} > {}", a.config, b.max_ulp, a.max_ulp);
        }
    }

    #[test]
    fn paper_configurations_enumerated() {
        let fmt = builtin_format(Builtin::BFloat16);
        let mut p = params(fmt, 32, vec![GridPoint { loss: LossPolicy::Truncate, guard_bits: 2 }]);
        p.samples = 10;
        let r = sweep(&p).unwrap();
        let names: Vec<String> = r.rows.iter().map(|r| r.config.to_string()).collect();
        for name in ["2-2-2-2-2", "8-2-2", "4-4-2", "32"] {
            assert!(names.contains(&name.to_string()));
        }
    }

    #[test]
    fn csv_is_deterministic() {
        let fmt = builtin_format(Builtin::Fp8E5M2);
        let grid = vec![
            GridPoint { loss: LossPolicy::Sticky, guard_bits: 1 },
            GridPoint { loss: LossPolicy::Lossless, guard_bits: 0 },
        ];
        let render = || {
            let mut buf = Vec::new();
            sweep(&params(fmt, 4, grid.clone())).unwrap().write_csv(&mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert!(a.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(a.lines().count(), 1 + 2 * 2);
    }

    #[test]
    fn normal_source_is_finite_and_seeded() {
        let fmt = builtin_format(Builtin::Fp8E4M3);
        let src = DataSource::Normal { mean: 0.0, std_dev: 1.0 };
        let a = generate_vectors(&src, &fmt, 4, 50, 7).unwrap();
        assert_eq!(a, generate_vectors(&src, &fmt, 4, 50, 7).unwrap());
        assert!(a.iter().flatten().all(|&w| decode(w, &fmt).unwrap().class.is_finite()));
        assert!(generate_vectors(&DataSource::Normal { mean: 0.0, std_dev: -1.0 }, &fmt, 4, 1, 0).is_err());
    }

    #[test]
    fn file_source_checks_vectors() {
        let fmt = builtin_format(Builtin::BFloat16);
        let ok = DataSource::Vectors(vec![vec![0x3F80, 0x3F80], vec![0, 1]]);
        assert_eq!(generate_vectors(&ok, &fmt, 2, 0, 0).unwrap().len(), 2);
        assert_eq!(generate_vectors(&ok, &fmt, 2, 1, 0).unwrap().len(), 1);
        let nan = DataSource::Vectors(vec![vec![0x7FC0, 0x3F80]]);
        assert!(generate_vectors(&nan, &fmt, 2, 0, 0).is_err());
        assert!(generate_vectors(&ok, &fmt, 3, 0, 0).is_err());
    }

    #[test]
    fn verify_lossless_and_lossy() {
        let fmt = builtin_format(Builtin::BFloat16);
        let spec = AccumulatorSpec::lossless(8, &fmt).unwrap();
        let r = verify(&fmt, &fmt, &spec, RoundingMode::NearestEven, 500, 1).unwrap();
        assert_eq!(r.configs, 4);
        assert_eq!(r.outcome, VerifyOutcome::AllEqual);

        let spec = AccumulatorSpec::truncate(8, &fmt, 0).unwrap();
        let r = verify(&fmt, &fmt, &spec, RoundingMode::NearestEven, 500, 1).unwrap();
        let VerifyOutcome::Deltas(d) = r.outcome else { panic!("lossy verify must report deltas") };
        assert_eq!(d.len(), 2 + 4);
        assert_eq!(d[0].route, "serial");
        assert_eq!(d[0].mismatch_rate, 0.0);
    }

    #[test]
    fn infinities_count_one_past_max() {
        let fmt = builtin_format(Builtin::Fp8E5M2);
        assert_eq!(output_error(0x7C, 0x7B, &fmt), 1);
        assert_eq!(output_error(0x7B, 0x7A, &fmt), 1);
        assert_eq!(output_error(0xFC, 0xFC, &fmt), 0);
    }
}
