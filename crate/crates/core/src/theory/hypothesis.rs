//! Finite hypothesis classes on explicit domains, with exhaustive ERM and
//! VC-dimension oracles.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample::{LabeledItem, LabeledSample};
use crate::error::{Error, Result};
use crate::game::CoopLabel;
use crate::rng::GameRng;

/// Largest domain `vc_dimension_exact` accepts by default.
pub const DEFAULT_VC_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    /// Object labels `0..n`.
    Objects(usize),
    /// Cooperation labels, encoded CP = 0, NC = 1.
    Cooperation,
}

impl OutputSpace {
    pub fn size(self) -> usize {
        match self {
            OutputSpace::Objects(n) => n,
            OutputSpace::Cooperation => 2,
        }
    }
}

pub fn encode(z: CoopLabel) -> usize {
    usize::from(z.is_nc())
}

pub fn decode(v: usize) -> CoopLabel {
    CoopLabel::from_nc(v != 0)
}

/// Every hypothesis listed by its output on each domain point `0..domain_size`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteHypothesisClass {
    domain_size: usize,
    output: OutputSpace,
    table: Vec<Vec<usize>>,
}

impl FiniteHypothesisClass {
    pub fn new(domain_size: usize, output: OutputSpace, table: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, row) in table.iter().enumerate() {
            if row.len() != domain_size {
                return Err(Error::InvalidArgument(format!(
                    "hypothesis {i} is defined on {} points, domain has {domain_size}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v >= output.size()) {
                return Err(Error::InvalidArgument(format!(
                    "hypothesis {i} outputs {v}, outside an output space of {}",
                    output.size()
                )));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::InvalidArgument(format!("hypothesis {i} is a duplicate")));
            }
        }
        Ok(FiniteHypothesisClass {
            domain_size,
            output,
            table,
        })
    }

    /// Build a class, silently dropping repeated hypotheses.
    pub fn dedup(domain_size: usize, output: OutputSpace, table: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let table = table.into_iter().filter(|r| seen.insert(r.clone())).collect();
        FiniteHypothesisClass::new(domain_size, output, table)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn output(&self) -> OutputSpace {
        self.output
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn contains(&self, row: &[usize]) -> bool {
        self.table.iter().any(|r| r == row)
    }

    /// Every hypothesis of `other` is in `self`.
    pub fn contains_class(&self, other: &FiniteHypothesisClass) -> bool {
        self.domain_size == other.domain_size && other.table.iter().all(|r| self.contains(r))
    }

    /// Hypothesis `i` as a map to object labels.
    pub fn object_fn(&self, i: usize) -> impl Fn(usize) -> usize + '_ {
        move |x| self.table[i][x]
    }

    /// Hypothesis `i` as a map to cooperation labels.
    pub fn coop_fn(&self, i: usize) -> impl Fn(usize) -> CoopLabel + '_ {
        move |x| decode(self.table[i][x])
    }

    fn check_sample(&self, s: &LabeledSample) -> Result<()> {
        match s.items().iter().find(|i| i.x >= self.domain_size) {
            Some(i) => Err(Error::Domain {
                point: i.x,
                domain: self.domain_size,
            }),
            None => Ok(()),
        }
    }

    /// Empirical error of hypothesis `i`, as a mistake count. Cooperation
    /// classes are scored against `z`, object classes against `y`.
    pub fn mistakes(&self, i: usize, s: &LabeledSample) -> usize {
        let row = &self.table[i];
        s.items()
            .iter()
            .filter(|it| {
                let target = match self.output {
                    OutputSpace::Cooperation => encode(it.z),
                    OutputSpace::Objects(_) => it.y,
                };
                row[it.x] != target
            })
            .count()
    }
}

/// `{x ↦ NC[o(x) ≠ o′(x)] : o, o′ ∈ O}` without repeats, in `(o, o′)`
/// enumeration order.
pub fn sym_diff_class(o: &FiniteHypothesisClass) -> FiniteHypothesisClass {
    let rows = o.table.iter().flat_map(|a| {
        o.table
            .iter()
            .map(move |b| a.iter().zip(b).map(|(p, q)| usize::from(p != q)).collect::<Vec<_>>())
    });
    FiniteHypothesisClass::dedup(o.domain_size, OutputSpace::Cooperation, rows.collect())
        .expect("disagreement patterns are valid hypotheses")
}

/// Index of a hypothesis with minimal empirical error, lowest index on ties.
pub fn erm(c: &FiniteHypothesisClass, s: &LabeledSample) -> Result<usize> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("ERM over an empty class".into()));
    }
    c.check_sample(s)?;
    let mut best = 0;
    let mut best_err = c.mistakes(0, s);
    for i in 1..c.len() {
        let e = c.mistakes(i, s);
        if e < best_err {
            best = i;
            best_err = e;
        }
    }
    Ok(best)
}

/// Largest `k` such that some `k` domain points are shattered, by exhaustive
/// search. Only defined for two-label classes.
pub fn vc_dimension_exact(c: &FiniteHypothesisClass, max_check: usize) -> Result<usize> {
    if c.output.size() != 2 {
        return Err(Error::Precondition(
            "VC dimension is only defined for two-label classes".into(),
        ));
    }
    if c.domain_size > max_check {
        return Err(Error::Infeasible {
            size: c.domain_size,
            limit: max_check,
        });
    }
    let n = c.domain_size;
    // Patterns of each hypothesis as a bitmask over the domain.
    let masks: Vec<u64> = c
        .table
        .iter()
        .map(|row| row.iter().enumerate().fold(0u64, |m, (i, &v)| m | ((v as u64 & 1) << i)))
        .collect();
    let mut best = 0;
    for k in 1..=n {
        if (1usize << k) > c.len() {
            break;
        }
        let shattered = subsets_of_size(n, k).any(|subset| {
            let mut seen = vec![false; 1 << k];
            let mut distinct = 0;
            for &m in &masks {
                let pattern = pext(m, subset);
                if !seen[pattern] {
                    seen[pattern] = true;
                    distinct += 1;
                }
            }
            distinct == 1 << k
        });
        if !shattered {
            break;
        }
        best = k;
    }
    Ok(best)
}

/// Bits of `value` at the set positions of `mask`, packed low.
fn pext(value: u64, mask: u64) -> usize {
    let mut out = 0usize;
    let mut bit = 0;
    let mut m = mask;
    while m != 0 {
        let pos = m.trailing_zeros();
        out |= (((value >> pos) & 1) as usize) << bit;
        bit += 1;
        m &= m - 1;
    }
    out
}

fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u64> {
    (0u64..(1u64 << n)).filter(move |m| m.count_ones() as usize == k)
}

/// A class of `count` distinct random hypotheses (fewer if the space is
/// exhausted first).
pub fn random_class(
    domain_size: usize,
    output: OutputSpace,
    count: usize,
    rng: &mut GameRng,
) -> FiniteHypothesisClass {
    let total = (output.size() as f64).powi(domain_size as i32);
    let count = count.min(total as usize);
    let mut seen = HashSet::new();
    let mut table = Vec::with_capacity(count);
    while table.len() < count {
        let row: Vec<usize> = (0..domain_size).map(|_| rng.gen_range(0..output.size())).collect();
        if seen.insert(row.clone()) {
            table.push(row);
        }
    }
    FiniteHypothesisClass::new(domain_size, output, table).expect("distinct rows")
}

/// `m` points drawn uniformly from the domain with random object labels and
/// NC labels drawn with probability `p_nc`.
pub fn random_sample(
    domain_size: usize,
    n_objects: usize,
    p_nc: f64,
    m: usize,
    rng: &mut GameRng,
) -> Result<LabeledSample> {
    LabeledSample::new(
        (0..m)
            .map(|_| LabeledItem {
                x: rng.gen_range(0..domain_size),
                y: rng.gen_range(0..n_objects),
                z: CoopLabel::from_nc(rng.gen_bool(p_nc)),
            })
            .collect(),
    )
}
