use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

/// One pipeline stage and its discrete knob domain.
///
/// Knob options are ordered by increasing resource cost: option 0 is the
/// cheapest variant, the last option the most expensive one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: usize,
    pub name: String,
    pub knob_domain: Vec<String>,
    /// LLM-style batched operator; fractional resources share a batch
    /// instead of slowing the operator down.
    #[serde(default)]
    pub is_batching: bool,
    /// Bytes emitted per input item at the reference configuration.
    pub base_output_size: f64,
}

impl OperatorSpec {
    pub fn new(id: usize, name: &str, knobs: &[&str], is_batching: bool, output_bytes: f64) -> Self {
        Self {
            id,
            name: name.to_string(),
            knob_domain: knobs.iter().map(|s| s.to_string()).collect(),
            is_batching,
            base_output_size: output_bytes,
        }
    }

    pub fn option_count(&self) -> usize {
        self.knob_domain.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PipelineRaw {
    name: String,
    operators: Vec<OperatorSpec>,
    #[serde(default)]
    edges: Vec<(usize, usize)>,
}

/// A DAG of operators listed in topological order.
///
/// Edges always point from a lower operator index to a higher one, which
/// makes the operator order the pipeline's chain direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PipelineRaw", into = "PipelineRaw")]
pub struct PipelineSpec {
    name: String,
    operators: Vec<OperatorSpec>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    sink: usize,
}

impl TryFrom<PipelineRaw> for PipelineSpec {
    type Error = PlanError;

    fn try_from(raw: PipelineRaw) -> Result<Self> {
        PipelineSpec::new(raw.name, raw.operators, raw.edges)
    }
}

impl From<PipelineSpec> for PipelineRaw {
    fn from(p: PipelineSpec) -> Self {
        PipelineRaw {
            name: p.name,
            operators: p.operators,
            edges: p.edges,
        }
    }
}

impl PipelineSpec {
    pub fn new(
        name: impl Into<String>,
        operators: Vec<OperatorSpec>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let bad = |m: String| Err(PlanError::InvalidPipeline(m));
        let n = operators.len();
        if n == 0 {
            return bad("pipeline has no operators".into());
        }
        for (i, op) in operators.iter().enumerate() {
            if op.id != i {
                return bad(format!("operator at position {i} has id {}", op.id));
            }
            if op.knob_domain.is_empty() {
                return bad(format!("operator {i} has an empty knob domain"));
            }
            let unique: HashSet<&String> = op.knob_domain.iter().collect();
            if unique.len() != op.knob_domain.len() {
                return bad(format!("operator {i} has duplicate knob option names"));
            }
            if !(op.base_output_size > 0.0 && op.base_output_size.is_finite()) {
                return bad(format!("operator {i} must emit a positive output size"));
            }
        }
        let mut seen = HashSet::new();
        let mut preds = vec![Vec::new(); n];
        let mut out_degree = vec![0usize; n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return bad(format!("edge ({u},{v}) references a missing operator"));
            }
            if u >= v {
                return bad(format!(
                    "edge ({u},{v}) points backwards; operators must be listed in topological order"
                ));
            }
            if !seen.insert((u, v)) {
                return bad(format!("duplicate edge ({u},{v})"));
            }
            preds[v].push(u);
            out_degree[u] += 1;
        }
        let sinks: Vec<usize> = (0..n).filter(|&i| out_degree[i] == 0).collect();
        if sinks.len() != 1 {
            return bad(format!("pipeline must have exactly one sink, found {sinks:?}"));
        }
        Ok(Self {
            name: name.into(),
            operators,
            edges,
            preds,
            sink: sinks[0],
        })
    }

    /// Linear chain `0 -> 1 -> ... -> n-1`.
    pub fn chain(name: impl Into<String>, operators: Vec<OperatorSpec>) -> Result<Self> {
        let edges = (1..operators.len()).map(|i| (i - 1, i)).collect();
        Self::new(name, operators, edges)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn operators(&self) -> &[OperatorSpec] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, op: usize) -> &[usize] {
        &self.preds[op]
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.preds[i].is_empty())
    }

    /// Option count per operator, in operator order.
    /// Operators with a path to `op`, ascending.
    pub fn ancestors(&self, op: usize) -> Vec<usize> {
        let mut mark = vec![false; self.operators.len()];
        let mut stack = self.preds[op].clone();
        while let Some(u) = stack.pop() {
            if !mark[u] {
                mark[u] = true;
                stack.extend(&self.preds[u]);
            }
        }
        (0..op).filter(|&u| mark[u]).collect()
    }

    pub fn knob_sizes(&self) -> Vec<usize> {
        self.operators.iter().map(OperatorSpec::option_count).collect()
    }
}
