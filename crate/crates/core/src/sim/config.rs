use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::builtin_pipeline;
use crate::error::{PlanError, Result};
use crate::io::read_json;
use crate::landscape::{generate_landscape, generate_trace, ArrivalTrace, Difficulty, GroundTruthLandscape, TraceParams};
use crate::model::{Budget, PipelineSpec, TierTopology};
use crate::profiler::fixed_n_baseline;
use crate::workload::Workload;

/// How tight generated SLOs are relative to the template's frontier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Easy,
    #[default]
    Medium,
    Hard,
}

impl Hardness {
    /// `(latency multiplier, accuracy multiplier)` applied to a frontier point.
    pub fn multipliers(self) -> (f64, f64) {
        match self {
            Hardness::Easy => (2.0, 0.7),
            Hardness::Medium => (1.5, 0.8),
            Hardness::Hard => (1.1, 0.9),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    #[default]
    Greedy,
    Fcfs,
}

/// Planner switches toggled by the ablation variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerFlags {
    pub guided_sampling: bool,
    pub warm_start: bool,
    /// Profile every plan with the pipeline's fixed sample count.
    pub fixed_n: bool,
    pub cache: bool,
    pub scheduler: SchedulerKind,
    pub strata: usize,
}

impl Default for PlannerFlags {
    fn default() -> Self {
        Self {
            guided_sampling: true,
            warm_start: true,
            fixed_n: false,
            cache: true,
            scheduler: SchedulerKind::Greedy,
            strata: 4,
        }
    }
}

/// One query template: a pipeline and the ground truth behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub name: String,
    /// Name of a built-in pipeline; exclusive with `pipeline_file`.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub pipeline_file: Option<PathBuf>,
    /// A stored landscape; generated from `landscape_seed` otherwise.
    #[serde(default)]
    pub landscape_file: Option<PathBuf>,
    #[serde(default)]
    pub landscape_seed: u64,
    #[serde(default)]
    pub difficulty: Difficulty,
    /// Sample count for fixed-N profiling; the built-in baseline by default.
    #[serde(default)]
    pub fixed_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    File(PathBuf),
    Generate(TraceParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftChange {
    /// Sets the bandwidth of the link between tiers `a` and `b`.
    Bandwidth { a: usize, b: usize, mbps: f64 },
    /// Shifts every accuracy of one template on the logit scale.
    AccuracyShift { template: usize, logit_shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub time: f64,
    #[serde(flatten)]
    pub change: DriftChange,
}

fn default_budget() -> Budget {
    Budget::ResponseSeconds(5.0)
}

fn default_beta() -> f64 {
    0.01
}

fn default_fixed_n() -> usize {
    350
}

/// A simulation run. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Defaults to the built-in three-tier topology.
    #[serde(default)]
    pub topology: Option<PathBuf>,
    pub templates: Vec<TemplateSpec>,
    pub trace: TraceSource,
    #[serde(default = "default_budget")]
    pub budget: Budget,
    #[serde(default)]
    pub hardness: Hardness,
    #[serde(default)]
    pub drift: Vec<DriftEvent>,
    #[serde(default)]
    pub planner: PlannerFlags,
    /// Sibling landscapes searched per template to pre-fill its history.
    #[serde(default)]
    pub history_warmup: usize,
    #[serde(default = "default_beta")]
    pub aging_beta: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A template with everything loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub workload: Workload,
    pub fixed_n: usize,
}

/// A fully loaded, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SimConfig,
    pub topology: TierTopology,
    pub templates: Vec<Template>,
    pub trace: ArrivalTrace,
}

impl SimConfig {
    /// Reads a config file and resolves its paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let config: SimConfig = read_json(path)?;
        Ok(config.rebased(path.parent().unwrap_or(Path::new(""))))
    }

    /// Copy with every relative path prefixed by `base`.
    pub fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.topology.as_mut() {
            fix(p);
        }
        for t in &mut self.templates {
            if let Some(p) = t.pipeline_file.as_mut() {
                fix(p);
            }
            if let Some(p) = t.landscape_file.as_mut() {
                fix(p);
            }
        }
        if let TraceSource::File(p) = &mut self.trace {
            fix(p);
        }
        if let Some(p) = self.output_dir.as_mut() {
            fix(p);
        }
        self
    }

    /// Loads and validates everything the run needs.
    pub fn scenario(&self) -> Result<Scenario> {
        let topology = match &self.topology {
            Some(p) => read_json::<TierTopology>(p)?,
            None => TierTopology::three_tier_default(),
        };
        if self.templates.is_empty() {
            return Err(PlanError::Config("at least one template is required".into()));
        }
        let templates = self
            .templates
            .iter()
            .map(|t| t.load(&topology))
            .collect::<Result<Vec<_>>>()?;
        let trace = match &self.trace {
            TraceSource::File(p) => ArrivalTrace::read(p)?,
            TraceSource::Generate(params) => generate_trace(params)?,
        };
        trace.validate()?;
        if let Some(e) = trace.entries.iter().find(|e| e.template >= templates.len()) {
            return Err(PlanError::Config(format!(
                "trace references template {} but only {} are configured",
                e.template,
                templates.len()
            )));
        }
        for d in &self.drift {
            let ok = d.time >= 0.0
                && match d.change {
                    DriftChange::Bandwidth { a, b, mbps } => a < topology.len() && b < topology.len() && mbps > 0.0,
                    DriftChange::AccuracyShift { template, logit_shift } => {
                        template < templates.len() && logit_shift.is_finite()
                    }
                };
            if !ok {
                return Err(PlanError::Config(format!("invalid drift event {d:?}")));
            }
        }
        let budget_ok = match self.budget {
            Budget::ResponseSeconds(s) => s >= 0.0 && s.is_finite(),
            Budget::ProfilingGpuHours(h) => h >= 0.0 && h.is_finite(),
        };
        if !budget_ok || !(self.aging_beta >= 0.0) {
            return Err(PlanError::Config("budget and aging beta must be non-negative".into()));
        }
        Ok(Scenario {
            config: self.clone(),
            topology,
            templates,
            trace,
        })
    }
}

impl TemplateSpec {
    fn load(&self, topology: &TierTopology) -> Result<Template> {
        let pipeline: PipelineSpec = match (&self.builtin, &self.pipeline_file) {
            (Some(name), None) => builtin_pipeline(name)?,
            (None, Some(p)) => read_json(p)?,
            _ => {
                return Err(PlanError::Config(format!(
                    "template `{}` needs exactly one of `builtin` and `pipeline_file`",
                    self.name
                )))
            }
        };
        let landscape: GroundTruthLandscape = match &self.landscape_file {
            Some(p) => read_json(p)?,
            None => generate_landscape(self.landscape_seed, &pipeline, &self.difficulty),
        };
        if landscape.knob_sizes() != pipeline.knob_sizes().as_slice() {
            return Err(PlanError::Config(format!(
                "template `{}`: landscape does not match the pipeline's knobs",
                self.name
            )));
        }
        let fixed_n = self
            .fixed_n
            .or_else(|| fixed_n_baseline(pipeline.name()))
            .unwrap_or_else(default_fixed_n);
        Ok(Template {
            name: self.name.clone(),
            workload: Workload::new(pipeline, topology.clone(), landscape),
            fixed_n,
        })
    }
}
