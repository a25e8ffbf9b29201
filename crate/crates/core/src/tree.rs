//! Mixed-radix reduction trees of align-and-add operators.
//!
//! A configuration lists one radix per tree level, leaf level first: `4-2`
//! feeds eight terms into two radix-4 nodes whose outputs meet in one
//! radix-2 node. The single-level configuration `N` is the serial baseline.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fixedpoint::AccumulatorSpec;
use crate::formats::FpFormat;
use crate::operator::{op_combine_radix, PartialSum};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeConfig {
    radices: Vec<usize>,
}

impl TreeConfig {
    pub fn new(radices: Vec<usize>) -> Result<Self> {
        if radices.is_empty() {
            return Err(Error::Config("configuration has no levels".into()));
        }
        if let Some(r) = radices.iter().find(|&&r| r < 2) {
            return Err(Error::Config(format!("radix {r} is below 2")));
        }
        radices
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .ok_or_else(|| Error::Config("radix product overflows".into()))?;
        Ok(TreeConfig { radices })
    }

    /// The single radix-N node.
    pub fn baseline(n_terms: usize) -> Result<Self> {
        Self::new(vec![n_terms])
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn n_terms(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn depth(&self) -> usize {
        self.radices.len()
    }

    pub fn is_baseline(&self) -> bool {
        self.radices.len() == 1
    }

    /// Number of nodes at each level, leaf level first.
    pub fn nodes_per_level(&self) -> Vec<usize> {
        let mut entering = self.n_terms();
        self.radices
            .iter()
            .map(|&r| {
                entering /= r;
                entering
            })
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_level().iter().sum()
    }
}

impl fmt::Display for TreeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.radices.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for TreeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let radices = s
            .split('-')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("`{p}` in `{s}` is not a radix")))
            })
            .collect::<Result<Vec<_>>>()?;
        TreeConfig::new(radices)
    }
}

/// Parses a dash-separated configuration and checks it covers `n_terms`.
pub fn parse_config(s: &str, n_terms: usize) -> Result<TreeConfig> {
    let cfg: TreeConfig = s.parse()?;
    if cfg.n_terms() != n_terms {
        return Err(Error::Config(format!(
            "configuration {cfg} multiplies to {}, expected {n_terms}",
            cfg.n_terms()
        )));
    }
    Ok(cfg)
}

/// All ordered factorizations of `n_terms` into factors of at least 2:
/// deepest trees first, lexicographic within a depth.
pub fn enumerate_configs(n_terms: usize) -> Result<Vec<TreeConfig>> {
    if n_terms < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 terms to build a tree, got {n_terms}"
        )));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    factorize(n_terms, &mut prefix, &mut out);
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    Ok(out
        .into_iter()
        .map(|radices| TreeConfig { radices })
        .collect())
}

fn factorize(rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if rest == 1 {
        out.push(prefix.clone());
        return;
    }
    for f in 2..=rest {
        if rest.is_multiple_of(f) {
            prefix.push(f);
            factorize(rest / f, prefix, out);
            prefix.pop();
        }
    }
}

/// Reduces `terms` level by level, grouping consecutive outputs by each
/// level's radix.
pub fn eval_tree(terms: &[PartialSum], cfg: &TreeConfig, spec: &AccumulatorSpec) -> Result<PartialSum> {
    if terms.len() != cfg.n_terms() {
        return Err(Error::Usage(format!(
            "configuration {cfg} takes {} terms, got {}",
            cfg.n_terms(),
            terms.len()
        )));
    }
    let mut level: Vec<PartialSum> = terms.to_vec();
    for &radix in cfg.radices() {
        level = level
            .chunks(radix)
            .map(|group| op_combine_radix(group, spec))
            .collect::<Result<_>>()?;
    }
    debug_assert_eq!(level.len(), 1);
    Ok(level.pop().expect("non-empty configuration"))
}

/// Counts for one tree level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelCost {
    pub radix: usize,
    pub nodes: usize,
    /// Two-input max units per node.
    pub comparators_per_node: usize,
    pub shifters_per_node: usize,
    pub adder_inputs_per_node: usize,
}

/// Structural census of a tree: what each level instantiates, no timing or
/// area model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub config: TreeConfig,
    pub levels: Vec<LevelCost>,
    pub nodes: usize,
    pub comparators: usize,
    pub shifters: usize,
    pub adder_inputs: usize,
    pub depth: usize,
    /// Accumulator (and shifter datapath) width.
    pub shifter_width: u32,
    /// Width of the exponent differences driving the shifters.
    pub shift_amount_bits: u32,
}

pub fn structural_report(cfg: &TreeConfig, fmt: &FpFormat, spec: &AccumulatorSpec) -> CostReport {
    let levels: Vec<LevelCost> = cfg
        .radices()
        .iter()
        .zip(cfg.nodes_per_level())
        .map(|(&radix, nodes)| LevelCost {
            radix,
            nodes,
            comparators_per_node: radix - 1,
            shifters_per_node: radix,
            adder_inputs_per_node: radix,
        })
        .collect();
    let total = |f: fn(&LevelCost) -> usize| levels.iter().map(|l| l.nodes * f(l)).sum::<usize>();
    CostReport {
        config: cfg.clone(),
        nodes: total(|_| 1),
        comparators: total(|l| l.comparators_per_node),
        shifters: total(|l| l.shifters_per_node),
        adder_inputs: total(|l| l.adder_inputs_per_node),
        depth: levels.len(),
        shifter_width: spec.width(),
        shift_amount_bits: fmt.exp_bits(),
        levels,
    }
}
