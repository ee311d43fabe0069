use super::{Fraction, PipelineSpec, PlanPoint, TierTopology};

/// `C(n, k)` in u64.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of non-decreasing placements of `operators` over `tiers`:
/// `C(M + T - 1, T - 1)`.
pub fn monotone_placement_count(operators: usize, tiers: usize) -> u64 {
    if tiers == 0 {
        return 0;
    }
    binomial((operators + tiers - 1) as u64, (tiers - 1) as u64)
}

/// All non-decreasing tier vectors of length `operators`, in lexicographic order.
pub fn monotone_placements(operators: usize, tiers: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: usize, tiers: usize, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        let lo = prefix.last().copied().unwrap_or(0);
        for t in lo..tiers {
            prefix.push(t);
            rec(prefix, left - 1, tiers, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if tiers > 0 {
        rec(&mut Vec::with_capacity(operators), operators, tiers, &mut out);
    }
    out
}

/// Indexable product space of configurations × monotone placements ×
/// per-operator resource fractions.
///
/// Index layout: `(config * P + placement) * F^M + fractions`, each part a
/// mixed-radix number with the last operator varying fastest.
#[derive(Debug, Clone)]
pub struct PlanSpace {
    knob_sizes: Vec<usize>,
    placements: Vec<Vec<usize>>,
    fractions: Vec<Fraction>,
    config_count: u64,
    fraction_combos: u64,
}

impl PlanSpace {
    pub fn new(knob_sizes: Vec<usize>, tiers: usize, fractions: Vec<Fraction>) -> Self {
        let m = knob_sizes.len();
        let placements = monotone_placements(m, tiers);
        let config_count = knob_sizes.iter().map(|&k| k as u64).product();
        let fraction_combos = (fractions.len() as u64).pow(m as u32);
        Self {
            knob_sizes,
            placements,
            fractions,
            config_count,
            fraction_combos,
        }
    }

    /// The full space over the whole fraction grid.
    pub fn full(pipeline: &PipelineSpec, topology: &TierTopology) -> Self {
        Self::new(pipeline.knob_sizes(), topology.len(), Fraction::GRID.to_vec())
    }

    /// The over-provisioned search space: every operator on a whole machine.
    pub fn search(pipeline: &PipelineSpec, topology: &TierTopology) -> Self {
        Self::new(pipeline.knob_sizes(), topology.len(), vec![Fraction::Full])
    }

    pub fn len(&self) -> u64 {
        self.config_count * self.placements.len() as u64 * self.fraction_combos
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn operators(&self) -> usize {
        self.knob_sizes.len()
    }

    pub fn knob_sizes(&self) -> &[usize] {
        &self.knob_sizes
    }

    pub fn config_count(&self) -> u64 {
        self.config_count
    }

    pub fn placements(&self) -> &[Vec<usize>] {
        &self.placements
    }

    pub fn placement_count(&self) -> usize {
        self.placements.len()
    }

    /// Decodes a configuration index into option indices.
    pub fn config(&self, mut index: u64) -> Vec<usize> {
        let mut out = vec![0; self.knob_sizes.len()];
        for (slot, &k) in out.iter_mut().zip(&self.knob_sizes).rev() {
            *slot = (index % k as u64) as usize;
            index /= k as u64;
        }
        out
    }

    /// Inverse of [`PlanSpace::config`].
    pub fn config_index(&self, config: &[usize]) -> u64 {
        config
            .iter()
            .zip(&self.knob_sizes)
            .fold(0u64, |acc, (&c, &k)| acc * k as u64 + c as u64)
    }

    /// Splits a plan index into (configuration index, placement index, fraction index).
    pub fn split(&self, index: u64) -> (u64, usize, u64) {
        let frac = index % self.fraction_combos;
        let rest = index / self.fraction_combos;
        let p = self.placements.len() as u64;
        (rest / p, (rest % p) as usize, frac)
    }

    pub fn plan(&self, index: u64) -> PlanPoint {
        debug_assert!(index < self.len());
        let (c, p, mut f) = self.split(index);
        let base = self.fractions.len() as u64;
        let mut resources = vec![Fraction::Full; self.knob_sizes.len()];
        for slot in resources.iter_mut().rev() {
            *slot = self.fractions[(f % base) as usize];
            f /= base;
        }
        PlanPoint {
            configuration: self.config(c),
            placement: self.placements[p].clone(),
            resources,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PlanPoint> + '_ {
        (0..self.len()).map(move |i| self.plan(i))
    }
}

/// Lazily yields every admissible plan exactly once.
pub fn enumerate_plan_space(
    pipeline: &PipelineSpec,
    topology: &TierTopology,
) -> impl Iterator<Item = PlanPoint> {
    let space = PlanSpace::full(pipeline, topology);
    (0..space.len()).map(move |i| space.plan(i))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(PlanSpace::new(vec![3], 3, Fraction::GRID.to_vec()).len(), 36);
        let s = PlanSpace::new(vec![2, 2], 2, vec![Fraction::Full]);
        assert_eq!(s.len(), 12);
        assert_eq!(s.placements(), &[vec![0, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn no_duplicates_and_config_roundtrip() {
        let s = PlanSpace::new(vec![2, 3], 3, Fraction::GRID.to_vec());
        let all: HashSet<PlanPoint> = s.iter().collect();
        assert_eq!(all.len() as u64, s.len());
        for c in 0..s.config_count() {
            assert_eq!(s.config_index(&s.config(c)), c);
        }
        assert!(s.iter().all(|p| p.is_monotone()));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(3, 5), 0);
    }
}
