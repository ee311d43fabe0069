//! Query arrival traces: Poisson thinning of a diurnal rate with bursts.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::io;
use crate::rng::{derive, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub seed: u64,
    /// Simulated seconds covered by the trace.
    pub duration: f64,
    /// Mean arrivals per second before diurnal and burst modulation.
    pub base_rate: f64,
    /// Multiplier applied on top of `base_rate`.
    #[serde(default = "one")]
    pub rate_scale: f64,
    /// Relative amplitude of the sinusoidal daily pattern, in [0, 1).
    #[serde(default)]
    pub diurnal_amplitude: f64,
    #[serde(default = "default_period")]
    pub diurnal_period: f64,
    /// Rate multiplier inside burst windows.
    #[serde(default = "one")]
    pub burst_factor: f64,
    /// Probability that a burst window is active.
    #[serde(default)]
    pub burst_probability: f64,
    #[serde(default = "default_burst_window")]
    pub burst_window: f64,
    /// Number of query templates arrivals are spread over.
    pub templates: usize,
    #[serde(default = "default_lifespan")]
    pub lifespan: f64,
}

fn one() -> f64 {
    1.0
}
fn default_period() -> f64 {
    3600.0
}
fn default_burst_window() -> f64 {
    30.0
}
fn default_lifespan() -> f64 {
    60.0
}

impl TraceParams {
    pub fn new(seed: u64, duration: f64, base_rate: f64, templates: usize) -> Self {
        Self {
            seed,
            duration,
            base_rate,
            rate_scale: 1.0,
            diurnal_amplitude: 0.0,
            diurnal_period: default_period(),
            burst_factor: 1.0,
            burst_probability: 0.0,
            burst_window: default_burst_window(),
            templates,
            lifespan: default_lifespan(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.duration >= 0.0
            && self.base_rate >= 0.0
            && self.rate_scale >= 0.0
            && (0.0..1.0).contains(&self.diurnal_amplitude)
            && self.diurnal_period > 0.0
            && self.burst_factor >= 1.0
            && (0.0..=1.0).contains(&self.burst_probability)
            && self.burst_window > 0.0
            && self.templates > 0
            && self.lifespan > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlanError::Config(format!("invalid trace parameters: {self:?}")))
        }
    }

    fn in_burst(&self, t: f64) -> bool {
        if self.burst_probability == 0.0 {
            return false;
        }
        let window = (t / self.burst_window).floor() as u64;
        let mut r = seeded(derive(self.seed, &[0xb0b5, window]));
        r.random_bool(self.burst_probability)
    }

    /// Instantaneous arrival rate at time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let diurnal = 1.0 + self.diurnal_amplitude * (std::f64::consts::TAU * t / self.diurnal_period).sin();
        let burst = if self.in_burst(t) { self.burst_factor } else { 1.0 };
        self.base_rate * self.rate_scale * diurnal * burst
    }

    fn peak_rate(&self) -> f64 {
        self.base_rate * self.rate_scale * (1.0 + self.diurnal_amplitude) * self.burst_factor
    }
}

/// One arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub arrival_time: f64,
    pub template: usize,
    /// Uniform draw in [0, 1] locating the query's SLO reference point on
    /// its template's accuracy/latency frontier.
    pub slo_quantile: f64,
    #[serde(default = "one")]
    pub weight: f64,
    pub lifespan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTrace {
    pub params: Option<TraceParams>,
    pub entries: Vec<TraceEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    #[serde(default)]
    params: Option<TraceParams>,
}

impl ArrivalTrace {
    pub fn empty() -> Self {
        Self {
            params: None,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].arrival_time < w[0].arrival_time {
                return Err(PlanError::Config(format!(
                    "arrival times decrease: {} then {}",
                    w[0].arrival_time, w[1].arrival_time
                )));
            }
        }
        for e in &self.entries {
            if !(e.arrival_time >= 0.0 && e.lifespan > 0.0 && e.weight > 0.0 && (0.0..=1.0).contains(&e.slo_quantile)) {
                return Err(PlanError::Config(format!("invalid trace entry {e:?}")));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            kind: "arrival_trace".into(),
            params: self.params.clone(),
        };
        io::to_jsonl_string(&header, &self.entries)
    }

    pub fn parse_jsonl(path: &Path, text: &str) -> Result<Self> {
        let (header, entries): (Header, Vec<TraceEntry>) = io::parse_jsonl(path, text)?;
        if header.kind != "arrival_trace" {
            return Err(PlanError::Parse {
                path: path.to_path_buf(),
                line: 1,
                column: 1,
                message: format!("expected kind `arrival_trace`, found `{}`", header.kind),
            });
        }
        let trace = Self {
            params: header.params,
            entries,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PlanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_jsonl(path, &text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()?).map_err(|source| PlanError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Draws arrivals by thinning a homogeneous process at the peak rate.
pub fn generate_trace(params: &TraceParams) -> Result<ArrivalTrace> {
    params.validate()?;
    let mut entries = Vec::new();
    let peak = params.peak_rate();
    if peak > 0.0 {
        let mut rng = seeded(derive(params.seed, &[0x7ace]));
        let gap = Exp::new(peak).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= params.duration {
                break;
            }
            let keep: f64 = rng.random();
            if keep * peak < params.rate_at(t) {
                entries.push(TraceEntry {
                    arrival_time: t,
                    template: rng.random_range(0..params.templates),
                    slo_quantile: rng.random(),
                    weight: 1.0,
                    lifespan: params.lifespan,
                });
            }
        }
    }
    Ok(ArrivalTrace {
        params: Some(params.clone()),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrivals_sorted_and_rate_matches() {
        let p = TraceParams::new(3, 10_000.0, 0.5, 2);
        let t = generate_trace(&p).unwrap();
        t.validate().unwrap();
        let n = t.len() as f64;
        assert!((n - 5000.0).abs() < 4.0 * 5000f64.sqrt(), "{n}");
    }

    #[test]
    fn bursts_raise_the_count() {
        let mut p = TraceParams::new(3, 5_000.0, 0.2, 1);
        let calm = generate_trace(&p).unwrap().len();
        p.burst_factor = 4.0;
        p.burst_probability = 0.5;
        let bursty = generate_trace(&p).unwrap().len();
        assert!(bursty as f64 > 1.8 * calm as f64);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut p = TraceParams::new(9, 200.0, 0.3, 3);
        p.diurnal_amplitude = 0.5;
        p.diurnal_period = 100.0;
        let t = generate_trace(&p).unwrap();
        let s = t.to_jsonl().unwrap();
        let back = ArrivalTrace::parse_jsonl(Path::new("mem"), &s).unwrap();
        assert_eq!(back, t);
    }
}
