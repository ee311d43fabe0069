//! Gaussian-process regression over categorical input vectors.
//!
//! Inputs are vectors of option indices. With a one-hot encoding, unit
//! length scale and unit signal variance the RBF kernel reduces to
//! `exp(-d)`, where `d` counts the positions at which two inputs differ, so
//! the one-hot vectors are never materialized.
//!
//! The Cholesky factor grows by one row per new observation, and
//! [`GpPool`] keeps each candidate's solved kernel vector in step with it,
//! so rescoring a fixed pool costs O(n) per candidate per observation.

use serde::{Deserialize, Serialize};

use crate::par::Execution;

pub const DEFAULT_NOISE: f64 = 1e-4;

fn kernel(a: &[usize], b: &[usize]) -> f64 {
    let d = a.iter().zip(b).filter(|(x, y)| x != y).count();
    (-(d as f64)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub input: Vec<usize>,
    pub target: f64,
    /// Observation noise variance in standardized units.
    pub noise: f64,
}

/// Exact GP with a fixed kernel; targets are standardized by their
/// observed mean and spread (with a floor) at prediction time.
#[derive(Debug, Clone)]
pub struct Gp {
    observations: Vec<Observation>,
    scale_floor: f64,
    /// Lower-triangular factor of `K + diag(noise)`; row `i` holds `i + 1` entries.
    chol: Vec<Vec<f64>>,
    /// Bumped whenever the factor is rebuilt rather than extended.
    epoch: u64,
}

/// Standardization and solved targets for the current observations.
struct Solved {
    mean: f64,
    scale: f64,
    /// `L⁻¹ y` for the standardized targets `y`.
    u: Vec<f64>,
}

impl Solved {
    fn finish(&self, v: &[f64], v_norm2: f64) -> (f64, f64) {
        let mu: f64 = v.iter().zip(&self.u).map(|(a, b)| a * b).sum();
        let var = (1.0 - v_norm2).max(0.0);
        (self.mean + self.scale * mu, self.scale * var.sqrt())
    }
}

impl Gp {
    /// `scale_floor` bounds the target spread used for standardization; it is
    /// also the prior standard deviation before any observation.
    pub fn new(scale_floor: f64) -> Self {
        Self {
            observations: Vec::new(),
            scale_floor,
            chol: Vec::new(),
            epoch: 0,
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// In-place `L⁻¹ k` over the first `k.len()` rows.
    fn forward(&self, k: &mut [f64]) {
        for i in 0..k.len() {
            let row = &self.chol[i];
            let s: f64 = row[..i].iter().zip(&k[..i]).map(|(a, b)| a * b).sum();
            k[i] = (k[i] - s) / row[i];
        }
    }

    fn append_row(&mut self, idx: usize) {
        let x = &self.observations[idx].input;
        let mut l: Vec<f64> = self.observations[..idx].iter().map(|o| kernel(&o.input, x)).collect();
        self.forward(&mut l);
        let d2 = 1.0 + self.observations[idx].noise - l.iter().map(|v| v * v).sum::<f64>();
        l.push(d2.max(1e-12).sqrt());
        self.chol.push(l);
    }

    fn rebuild(&mut self) {
        self.chol.clear();
        for i in 0..self.observations.len() {
            self.append_row(i);
        }
        self.epoch += 1;
    }

    /// Adds an observation; a repeated input replaces the earlier one.
    pub fn observe(&mut self, input: Vec<usize>, target: f64, noise: f64) {
        match self.observations.iter_mut().find(|o| o.input == input) {
            Some(o) => {
                let refactor = o.noise != noise;
                o.target = target;
                o.noise = noise;
                if refactor {
                    self.rebuild();
                }
            }
            None => {
                self.observations.push(Observation { input, target, noise });
                self.append_row(self.observations.len() - 1);
            }
        }
    }

    /// Multiplies every stored noise variance by `factor`.
    pub fn inflate_noise(&mut self, factor: f64) {
        for o in &mut self.observations {
            o.noise *= factor;
        }
        self.rebuild();
    }

    fn solve(&self) -> Solved {
        let n = self.observations.len();
        if n == 0 {
            return Solved {
                mean: 0.0,
                scale: self.scale_floor,
                u: Vec::new(),
            };
        }
        let mean = self.observations.iter().map(|o| o.target).sum::<f64>() / n as f64;
        let var = self
            .observations
            .iter()
            .map(|o| (o.target - mean) * (o.target - mean))
            .sum::<f64>()
            / n as f64;
        let scale = var.sqrt().max(self.scale_floor);
        let mut u: Vec<f64> = self.observations.iter().map(|o| (o.target - mean) / scale).collect();
        self.forward(&mut u);
        Solved { mean, scale, u }
    }

    fn predict_solved(&self, s: &Solved, x: &[usize]) -> (f64, f64) {
        let mut v: Vec<f64> = self.observations.iter().map(|o| kernel(&o.input, x)).collect();
        self.forward(&mut v);
        let n2 = v.iter().map(|a| a * a).sum();
        s.finish(&v, n2)
    }

    /// Predictive mean and standard deviation of the latent function.
    pub fn predict(&self, x: &[usize]) -> (f64, f64) {
        self.predict_solved(&self.solve(), x)
    }

    /// Predictions for many inputs, in input order.
    pub fn predict_many(&self, xs: &[Vec<usize>], exec: Execution) -> Vec<(f64, f64)> {
        let s = self.solve();
        exec.map_slice(xs, |x| self.predict_solved(&s, x))
    }
}

#[derive(Debug, Clone, Default)]
struct PoolPoint {
    v: Vec<f64>,
    norm2: f64,
}

/// A fixed list of inputs whose solved kernel vectors follow one growing [`Gp`].
#[derive(Debug, Clone)]
pub struct GpPool {
    inputs: Vec<Vec<usize>>,
    points: Vec<PoolPoint>,
    epoch: u64,
}

impl GpPool {
    pub fn new(inputs: Vec<Vec<usize>>) -> Self {
        Self {
            points: vec![PoolPoint::default(); inputs.len()],
            inputs,
            epoch: u64::MAX,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<usize>] {
        &self.inputs
    }

    /// Predictions for every pooled input under `gp`. The pool must always
    /// be synced against the same GP.
    pub fn predict(&mut self, gp: &Gp, exec: Execution) -> Vec<(f64, f64)> {
        if self.epoch != gp.epoch {
            self.points.iter_mut().for_each(|p| *p = PoolPoint::default());
            self.epoch = gp.epoch;
        }
        let n = gp.len();
        let inputs = &self.inputs;
        exec.for_each_indexed_mut(&mut self.points, |j, p| {
            for i in p.v.len()..n {
                let row = &gp.chol[i];
                let k = kernel(&gp.observations[i].input, &inputs[j]);
                let dot: f64 = row[..i].iter().zip(&p.v).map(|(a, b)| a * b).sum();
                let vi = (k - dot) / row[i];
                p.norm2 += vi * vi;
                p.v.push(vi);
            }
        });
        let s = gp.solve();
        self.points.iter().map(|p| s.finish(&p.v, p.norm2)).collect()
    }
}
