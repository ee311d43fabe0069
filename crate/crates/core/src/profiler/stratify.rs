//! One-shot K-means stratification and round-robin case selection.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::rng::{seeded, Rng};

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub k: usize,
    /// Stratum of each case.
    pub assignment: Vec<usize>,
    /// Cases of each stratum, ascending.
    pub members: Vec<Vec<usize>>,
    /// Empirical stratum proportions.
    pub weights: Vec<f64>,
    /// Round-robin position: the next draw comes from stratum `cursor % k`.
    pub cursor: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `features` into `k` non-empty strata with k-means++ seeding
/// followed by Lloyd iterations. Deterministic for a fixed `seed`.
pub fn stratify<F: AsRef<[f64]>>(features: &[F], k: usize, seed: u64) -> Result<Stratification> {
    let n = features.len();
    if k < 1 || k > n {
        return Err(PlanError::Stratification(format!(
            "need 1 <= K <= case count, got K={k} with {n} cases"
        )));
    }
    let pts: Vec<&[f64]> = features.iter().map(|f| f.as_ref()).collect();
    let dim = pts[0].len();
    if pts.iter().any(|p| p.len() != dim) {
        return Err(PlanError::Stratification("feature vectors differ in length".into()));
    }
    let mut rng = seeded(seed);
    let mut centres = init_plus_plus(&pts, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in pts.iter().enumerate() {
            let best = nearest(&centres, p);
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        fill_empty(&pts, &mut centres, &mut assignment);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in pts.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, x) in sums[assignment[i]].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            for d in 0..dim {
                centres[c][d] = sums[c][d] / counts[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    let weights = members.iter().map(|m| m.len() as f64 / n as f64).collect();
    Ok(Stratification {
        k,
        assignment,
        members,
        weights,
        cursor: 0,
    })
}

fn nearest(centres: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centre) in centres.iter().enumerate() {
        let d = dist2(centre, p);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn init_plus_plus(pts: &[&[f64]], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = pts.len();
    let mut centres = vec![pts[rng.random_range(0..n)].to_vec()];
    let mut d: Vec<f64> = pts.iter().map(|p| dist2(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &di) in d.iter().enumerate() {
                if target < di {
                    chosen = i;
                    break;
                }
                target -= di;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centres.push(pts[pick].to_vec());
        for (i, p) in pts.iter().enumerate() {
            d[i] = d[i].min(dist2(p, &centres[centres.len() - 1]));
        }
    }
    centres
}

/// Gives every empty cluster the point farthest from its current centre.
fn fill_empty(pts: &[&[f64]], centres: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centres.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = (0..k).find(|&c| counts[c] == 0) else {
            return;
        };
        let far = (0..pts.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .max_by(|&a, &b| {
                dist2(pts[a], &centres[assignment[a]])
                    .total_cmp(&dist2(pts[b], &centres[assignment[b]]))
                    .then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with two points");
        assignment[far] = empty;
        centres[empty] = pts[far].to_vec();
    }
}

impl Stratification {
    /// Every case in one stratum.
    pub fn single(cases: usize) -> Result<Self> {
        if cases == 0 {
            return Err(PlanError::Stratification("no cases".into()));
        }
        Ok(Self {
            k: 1,
            assignment: vec![0; cases],
            members: vec![(0..cases).collect()],
            weights: vec![1.0],
            cursor: 0,
        })
    }

    pub fn case_count(&self) -> usize {
        self.assignment.len()
    }

    /// Same strata with the cursor rewound.
    pub fn restarted(&self) -> Self {
        Self {
            cursor: 0,
            ..self.clone()
        }
    }

    /// Next case: strata in turn, uniform within the stratum.
    pub fn next_case(&mut self, rng: &mut Rng) -> Result<usize> {
        self.next_draw(rng).map(|(_, case)| case)
    }

    /// Like [`next_case`](Self::next_case), also returning the stratum.
    pub fn next_draw(&mut self, rng: &mut Rng) -> Result<(usize, usize)> {
        let s = self.cursor % self.k;
        self.cursor += 1;
        let pool = &self.members[s];
        if pool.is_empty() {
            return Err(PlanError::Stratification(format!("stratum {s} is empty")));
        }
        Ok((s, pool[rng.random_range(0..pool.len())]))
    }
}
