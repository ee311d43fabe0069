use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{DriftChange, Scenario, SchedulerKind};
use super::report::{finish_csv, Distribution, GoodputPoint, MetricsReport, QueryRecord, QueryStatus, ReplanRecord};
use crate::error::{PlanError, Result};
use crate::landscape::TraceEntry;
use crate::model::{PlanPoint, Query, TierTopology, Verdict};
use crate::profiler::{profile_plan, stratify, SessionLimits};
use crate::rng::{derive, seeded};
use crate::sched::{aged_weight, fcfs, greedy_goodput, replan, Cluster, DeploymentState, QueryCandidates};
use crate::search::{single_query_search, CandidateSet, HistoryStore, SearchConfig, SearchOutcome, SurrogatePair};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Expire(u64),
    Drift(usize),
    PlanReady(u64),
    Arrival(usize),
}

impl Kind {
    fn rank(self) -> u8 {
        match self {
            Kind::Expire(_) => 0,
            Kind::Drift(_) => 1,
            Kind::PlanReady(_) => 2,
            Kind::Arrival(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: the heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.rank().cmp(&self.kind.rank()))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Planning,
    Pending,
    Admitted,
    /// Still holding its old plan while a replacement is searched.
    Replanning,
    Done(QueryStatus),
}

struct Live {
    query: Query,
    template: usize,
    phase: Phase,
    candidates: CandidateSet,
    surrogates: SurrogatePair,
    compliant: bool,
    ever_admitted: bool,
    inflight: Option<(SearchOutcome, Option<usize>)>,
    record: QueryRecord,
}

#[derive(Serialize)]
struct DeploymentRow {
    time: f64,
    query: u64,
    operator: usize,
    tier: usize,
    machine: usize,
    eighths: u32,
    weight: f64,
    plan_cost: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub report: MetricsReport,
    /// Full deployment snapshot after every change, one row per operator.
    pub deployments_csv: String,
}

impl SimOutput {
    /// Writes the report files plus `deployments.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.report.write(dir)?;
        let path = dir.join("deployments.csv");
        fs::write(&path, &self.deployments_csv).map_err(|source| PlanError::Io { path, source })
    }
}

/// SLOs of a query whose reference point sits at `quantile` along `front`.
pub fn slo_from_front(front: &[(f64, f64)], quantile: f64, multipliers: (f64, f64)) -> Option<(f64, f64)> {
    let last = front.len().checked_sub(1)?;
    let (accuracy, latency) = front[((last as f64) * quantile.clamp(0.0, 1.0)).round() as usize];
    let (l_mult, a_mult) = multipliers;
    Some(((a_mult * accuracy).min(1.0), l_mult * latency))
}

struct Engine<'a> {
    scenario: &'a Scenario,
    topology: TierTopology,
    workloads: Vec<Workload>,
    fronts: Vec<Vec<(f64, f64)>>,
    histories: Vec<HistoryStore>,
    cluster: Cluster,
    state: DeploymentState,
    live: BTreeMap<u64, Live>,
    heap: BinaryHeap<Event>,
    seq: u64,
    last_time: f64,
    goodput_integral: f64,
    cost_integral: f64,
    gpu_seconds: f64,
    series: Vec<GoodputPoint>,
    replans: Vec<ReplanRecord>,
    deployments: csv::Writer<Vec<u8>>,
    deployed: Vec<(u64, Vec<(usize, usize)>)>,
    deployment_rows: usize,
}

/// Replays the scenario's trace through planning and scheduling.
pub fn run(scenario: &Scenario) -> Result<SimOutput> {
    let mut e = Engine::new(scenario)?;
    e.warm_up()?;
    for (i, entry) in scenario.trace.entries.iter().enumerate() {
        e.push(entry.arrival_time, Kind::Arrival(i));
    }
    for (i, d) in scenario.config.drift.iter().enumerate() {
        e.push(d.time, Kind::Drift(i));
    }
    while let Some(ev) = e.heap.pop() {
        e.advance(ev.time);
        match ev.kind {
            Kind::Arrival(i) => e.on_arrival(i, &scenario.trace.entries[i])?,
            Kind::PlanReady(q) => e.on_plan_ready(q)?,
            Kind::Expire(q) => e.on_expire(q)?,
            Kind::Drift(i) => e.on_drift(i)?,
        }
        e.observe(ev.time)?;
    }
    e.finish()
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self> {
        let workloads: Vec<Workload> = scenario.templates.iter().map(|t| t.workload.clone()).collect();
        let fronts = workloads
            .iter()
            .map(Workload::accuracy_latency_frontier)
            .collect::<Result<Vec<_>>>()?;
        let cluster = Cluster::from_topology(&scenario.topology);
        Ok(Self {
            scenario,
            topology: scenario.topology.clone(),
            fronts,
            histories: vec![HistoryStore::default(); workloads.len()],
            workloads,
            state: DeploymentState::new(cluster.clone()),
            cluster,
            live: BTreeMap::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            last_time: 0.0,
            goodput_integral: 0.0,
            cost_integral: 0.0,
            gpu_seconds: 0.0,
            series: Vec::new(),
            replans: Vec::new(),
            deployments: csv::Writer::from_writer(Vec::new()),
            deployed: Vec::new(),
            deployment_rows: 0,
        })
    }

    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event {
            time,
            kind,
            seq: self.seq,
        });
        self.seq += 1;
    }

    fn search_config(&self, template: usize, labels: &[u64]) -> SearchConfig {
        let flags = &self.scenario.config.planner;
        SearchConfig {
            seed: derive(self.scenario.config.seed, labels),
            limits: SessionLimits {
                fixed_n: flags.fixed_n.then_some(self.scenario.templates[template].fixed_n),
                ..SessionLimits::default()
            },
            strata: if flags.guided_sampling { flags.strata.max(1) } else { 1 },
            use_cache: flags.cache,
            warm_start: flags.warm_start,
            ..SearchConfig::default()
        }
    }

    fn warm_up(&mut self) -> Result<()> {
        let cfg = &self.scenario.config;
        if cfg.history_warmup == 0 || !cfg.planner.warm_start {
            return Ok(());
        }
        for (t, spec) in cfg.templates.iter().enumerate() {
            for m in 0..cfg.history_warmup {
                let base = &self.workloads[t];
                let sibling = Workload::new(
                    base.pipeline.clone(),
                    base.topology.clone(),
                    base.landscape.sibling(m as u64, 0.3, &spec.difficulty),
                );
                let quantile = (m as f64 + 0.5) / cfg.history_warmup as f64;
                let Some((a, l)) = slo_from_front(&sibling.accuracy_latency_frontier()?, quantile, cfg.hardness.multipliers())
                else {
                    continue;
                };
                let query = Query::new(u64::MAX - m as u64, &self.scenario.templates[t].name, a, l, cfg.budget);
                let sc = self.search_config(t, &[0x3a3a, t as u64, m as u64]);
                let out = single_query_search(&query, &sibling, &HistoryStore::default(), &sc, None)?;
                self.histories[t].push(format!("warmup-{t}-{m}"), out.surrogates);
            }
        }
        Ok(())
    }

    fn goodput(&self) -> usize {
        self.live
            .values()
            .filter(|l| matches!(l.phase, Phase::Admitted | Phase::Replanning) && l.compliant)
            .count()
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.last_time;
        if dt > 0.0 {
            self.goodput_integral += self.goodput() as f64 * dt;
            self.cost_integral += self.state.hourly_cost() * dt;
            self.last_time = t;
        }
    }

    fn compliant(&self, template: usize, plan: &PlanPoint, query: &Query) -> Result<bool> {
        let m = self.workloads[template].true_metrics(plan)?;
        Ok(m.accuracy >= query.a_slo && m.latency <= query.l_slo)
    }

    fn on_arrival(&mut self, i: usize, entry: &TraceEntry) -> Result<()> {
        let cfg = &self.scenario.config;
        let t = entry.template;
        let id = i as u64;
        let now = entry.arrival_time;
        let (a_slo, l_slo) = slo_from_front(&self.fronts[t], entry.slo_quantile, cfg.hardness.multipliers())
            .ok_or_else(|| PlanError::Config(format!("template {t} has an empty plan space")))?;
        let mut query = Query::new(id, &self.scenario.templates[t].name, a_slo, l_slo, cfg.budget);
        query.weight = entry.weight;
        query.arrival_time = now;
        query.lifespan = entry.lifespan;
        let feasible = self.workloads[t].feasible_plan_exists(&query)?;
        let sc = self.search_config(t, &[id]);
        let outcome = single_query_search(&query, &self.workloads[t], &self.histories[t], &sc, None)?;
        self.gpu_seconds += outcome.gpu_seconds;
        let record = QueryRecord {
            id,
            template: t,
            arrival_time: now,
            a_slo,
            l_slo,
            weight: query.weight,
            status: QueryStatus::Pending,
            candidates: outcome.candidates.len(),
            planning_seconds: outcome.elapsed,
            first_feasible_step: outcome.first_feasible_step,
            response_time: outcome.first_feasible_time,
            profiling_gpu_seconds: outcome.gpu_seconds,
            admitted_at: None,
            admitted_plan_compliant: None,
            feasible_at_arrival: feasible,
        };
        self.push(now + outcome.elapsed, Kind::PlanReady(id));
        self.push(now + query.lifespan, Kind::Expire(id));
        self.live.insert(
            id,
            Live {
                query,
                template: t,
                phase: Phase::Planning,
                candidates: CandidateSet::default(),
                surrogates: SurrogatePair::new(),
                compliant: false,
                ever_admitted: false,
                inflight: Some((outcome, None)),
                record,
            },
        );
        Ok(())
    }

    fn on_plan_ready(&mut self, q: u64) -> Result<()> {
        let Some(live) = self.live.get_mut(&q) else {
            return Ok(());
        };
        if matches!(live.phase, Phase::Done(_)) {
            return Ok(());
        }
        let Some((outcome, replan_idx)) = live.inflight.take() else {
            return Ok(());
        };
        live.surrogates = outcome.surrogates.clone();
        live.candidates = outcome.candidates;
        match replan_idx {
            None => {
                self.histories[live.template].push(format!("query-{q}"), outcome.surrogates);
                live.phase = if live.candidates.is_empty() {
                    Phase::Done(QueryStatus::Rejected)
                } else {
                    Phase::Pending
                };
            }
            Some(r) => {
                self.state.release(q);
                live.compliant = false;
                if live.candidates.is_empty() {
                    live.phase = Phase::Done(QueryStatus::Degraded);
                    self.replans[r].degraded = true;
                } else {
                    live.phase = Phase::Pending;
                }
            }
        }
        self.epoch()
    }

    fn on_expire(&mut self, q: u64) -> Result<()> {
        let Some(live) = self.live.get_mut(&q) else {
            return Ok(());
        };
        let status = match live.phase {
            Phase::Admitted | Phase::Replanning => {
                self.state.release(q);
                QueryStatus::Completed
            }
            Phase::Pending if live.ever_admitted => QueryStatus::Degraded,
            Phase::Pending | Phase::Planning => QueryStatus::Rejected,
            Phase::Done(_) => return Ok(()),
        };
        live.phase = Phase::Done(status);
        live.compliant = false;
        self.epoch()
    }

    fn on_drift(&mut self, i: usize) -> Result<()> {
        let scenario = self.scenario;
        let event = &scenario.config.drift[i];
        let now = event.time;
        let affected: Option<usize> = match event.change {
            DriftChange::Bandwidth { a, b, mbps } => {
                self.topology = self.topology.with_bandwidth(a, b, mbps)?;
                for w in &mut self.workloads {
                    w.topology = self.topology.clone();
                }
                None
            }
            DriftChange::AccuracyShift { template, logit_shift } => {
                let w = &mut self.workloads[template];
                w.landscape = w.landscape.with_accuracy_shift(logit_shift);
                Some(template)
            }
        };
        let admitted: Vec<u64> = self
            .live
            .iter()
            .filter(|(_, l)| matches!(l.phase, Phase::Admitted | Phase::Replanning))
            .map(|(&q, _)| q)
            .collect();
        for q in admitted {
            let plan = self.state.admitted[&q].plan.plan.clone();
            let (t, query, phase) = {
                let l = &self.live[&q];
                (l.template, l.query.clone(), l.phase)
            };
            let compliant = self.compliant(t, &plan, &query)?;
            self.live.get_mut(&q).expect("live query").compliant = compliant;
            if phase != Phase::Admitted || affected.is_some_and(|a| a != t) {
                continue;
            }
            let Some(trigger) = self.detect(q, t, &plan, &query, i)? else {
                continue;
            };
            let sc = self.search_config(t, &[q, 0x4e, i as u64]);
            let prior = self.live[&q].surrogates.clone();
            let r = replan(&query, &self.workloads[t], &prior, &self.histories[t], &sc)?;
            self.gpu_seconds += r.outcome.gpu_seconds;
            let mut first_compliant_time = None;
            for s in r.outcome.steps.iter().filter(|s| s.accepted) {
                if self.compliant(t, &s.plan, &query)? {
                    first_compliant_time = Some(s.elapsed);
                    break;
                }
            }
            self.replans.push(ReplanRecord {
                query: q,
                time: now,
                trigger: trigger.into(),
                planning_seconds: r.outcome.elapsed,
                first_feasible_time: r.outcome.first_feasible_time,
                candidates: r.outcome.candidates.len(),
                found_compliant: first_compliant_time.is_some(),
                first_compliant_time,
                oracle_feasible: self.workloads[t].feasible_plan_exists(&query)?,
                degraded: false,
            });
            self.push(now + r.outcome.elapsed, Kind::PlanReady(q));
            let live = self.live.get_mut(&q).expect("live query");
            live.phase = Phase::Replanning;
            live.inflight = Some((r.outcome, Some(self.replans.len() - 1)));
        }
        Ok(())
    }

    /// Whether the deployed plan visibly broke: measured latency over the
    /// SLO, or a fresh profiling session no longer passing.
    fn detect(&self, q: u64, t: usize, plan: &PlanPoint, query: &Query, drift: usize) -> Result<Option<&'static str>> {
        let w = &self.workloads[t];
        if w.latency(plan)? > query.l_slo {
            return Ok(Some("latency"));
        }
        let sc = self.search_config(t, &[q, 0xd41f, drift as u64]);
        let strat = stratify(&w.landscape.cases().features, sc.strata, sc.seed)?;
        let mut rng = seeded(sc.seed);
        let outcome = profile_plan(plan, w, &strat, None, query.a_slo, &sc.limits, &mut rng)?;
        Ok((outcome.verdict != Verdict::PassAccuracy).then_some("accuracy"))
    }

    fn epoch(&mut self) -> Result<()> {
        let now = self.last_time;
        let beta = self.scenario.config.aging_beta;
        let pending: Vec<QueryCandidates> = self
            .live
            .iter()
            .filter(|(_, l)| l.phase == Phase::Pending)
            .map(|(&q, l)| {
                let w = aged_weight(l.query.weight, now - l.query.arrival_time, beta);
                QueryCandidates::from_set(q, w, q as usize, &l.candidates, &self.cluster)
            })
            .collect();
        if pending.is_empty() {
            return Ok(());
        }
        let state = self.state.clone();
        self.state = match self.scenario.config.planner.scheduler {
            SchedulerKind::Greedy => greedy_goodput(&pending, state),
            SchedulerKind::Fcfs => fcfs(&pending, state),
        };
        for qc in &pending {
            let Some(a) = self.state.admitted.get(&qc.query) else {
                continue;
            };
            let plan = a.plan.plan.clone();
            let (t, query) = {
                let l = &self.live[&qc.query];
                (l.template, l.query.clone())
            };
            let compliant = self.compliant(t, &plan, &query)?;
            let live = self.live.get_mut(&qc.query).expect("live query");
            live.phase = Phase::Admitted;
            live.ever_admitted = true;
            live.compliant = compliant;
            live.record.admitted_at.get_or_insert(now);
            live.record.admitted_plan_compliant.get_or_insert(compliant);
        }
        Ok(())
    }

    fn observe(&mut self, t: f64) -> Result<()> {
        let point = GoodputPoint {
            time: t,
            admitted: self.state.admitted_count(),
            goodput: self.goodput(),
            pending: self.live.values().filter(|l| l.phase == Phase::Pending).count(),
            hourly_cost: self.state.hourly_cost(),
        };
        match self.series.last_mut() {
            Some(last) if last.time == t => *last = point,
            Some(last)
                if (last.admitted, last.goodput, last.pending, last.hourly_cost)
                    == (point.admitted, point.goodput, point.pending, point.hourly_cost) => {}
            _ => self.series.push(point),
        }
        let deployed: Vec<(u64, Vec<(usize, usize)>)> =
            self.state.admitted.iter().map(|(&q, a)| (q, a.machines.clone())).collect();
        if deployed != self.deployed {
            for (q, a) in &self.state.admitted {
                for (op, (&(tier, machine), &(_, eighths))) in a.machines.iter().zip(&a.plan.items).enumerate() {
                    self.deployments.serialize(DeploymentRow {
                        time: t,
                        query: *q,
                        operator: op,
                        tier,
                        machine,
                        eighths,
                        weight: a.plan.weight,
                        plan_cost: a.plan.cost,
                    })?;
                    self.deployment_rows += 1;
                }
            }
            self.deployed = deployed;
        }
        Ok(())
    }

    fn finish(self) -> Result<SimOutput> {
        let mut status_counts: BTreeMap<String, usize> =
            QueryStatus::ALL.iter().map(|s| (s.label().to_string(), 0)).collect();
        let mut per_query = Vec::with_capacity(self.live.len());
        let mut response = Vec::new();
        for l in self.live.into_values() {
            let mut r = l.record;
            r.status = match l.phase {
                Phase::Done(s) => s,
                _ => QueryStatus::Pending,
            };
            *status_counts.entry(r.status.label().to_string()).or_default() += 1;
            if let Some(t) = r.response_time {
                response.push(t);
            }
            per_query.push(r);
        }
        let horizon = self.last_time;
        let price = self.topology.tier(self.topology.reference_tier()).machine_cost();
        let report = MetricsReport {
            queries: per_query.len(),
            status_counts,
            horizon,
            goodput_integral: self.goodput_integral,
            mean_goodput: if horizon > 0.0 { self.goodput_integral / horizon } else { 0.0 },
            peak_goodput: self.series.iter().map(|p| p.goodput).max().unwrap_or(0),
            deployment_dollars: self.cost_integral / 3600.0,
            profiling_gpu_seconds: self.gpu_seconds,
            profiling_dollars: self.gpu_seconds / 3600.0 * price,
            response_time: Distribution::of(&response),
            per_query,
            replans: self.replans,
            series: self.series,
        };
        let mut deployments = self.deployments;
        if self.deployment_rows == 0 {
            deployments.write_record(["time", "query", "operator", "tier", "machine", "eighths", "weight", "plan_cost"])?;
        }
        Ok(SimOutput {
            report,
            deployments_csv: finish_csv(deployments)?,
        })
    }
}
