//! Objective functions with budget accounting and a canonical-SMILES cache.

mod bridge;
mod builtin;

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::Molecule;
use crate::pareto::MAX_HV_DIMENSION;

pub use bridge::{BridgeOracle, BridgeSpec, PROTOCOL_VERSION};
pub use builtin::{
    isomer_score, similarity_score, ConstantOracle, IsomerOracle, SimilarityOracle,
    SyntheticOracle,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle budget of {budget} calls exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("invalid task: {0}")]
    InvalidSpec(String),
    #[error("invalid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("oracle {oracle} could not score the molecule: {message}")]
    Scoring { oracle: String, message: String },
    #[error("oracle bridge {oracle} failed: {message}")]
    Bridge { oracle: String, message: String },
}

/// A scoring function. `smiles` is the canonical SMILES of `mol`.
pub trait Oracle: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, mol: &Molecule, smiles: &str) -> Result<f64, OracleError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Pareto,
}

/// Clamps `raw` into `[lo, hi]`, rescales to `[0, 1]` and flips it for
/// minimized objectives.
pub fn transform_direction(raw: f64, direction: Direction, bounds: [f64; 2]) -> Result<f64, OracleError> {
    let [lo, hi] = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(OracleError::InvalidBounds { lo, hi });
    }
    let x = (raw.clamp(lo, hi) - lo) / (hi - lo);
    Ok(match direction {
        Direction::Maximize => x,
        Direction::Minimize => 1.0 - x,
    })
}

fn default_weight() -> f64 {
    1.0
}

fn default_bounds() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// One of `isomer`, `similarity`, `synthetic`, `constant`, `bridge`.
    pub oracle: String,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
}

impl ObjectiveSpec {
    pub fn new(name: &str, oracle: &str, params: toml::Table) -> Self {
        ObjectiveSpec {
            name: name.to_string(),
            direction: Direction::Maximize,
            weight: 1.0,
            oracle: oracle.to_string(),
            params,
            bounds: default_bounds(),
        }
    }

    fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T, OracleError> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e| OracleError::InvalidSpec(format!("objective {:?} params: {e}", self.name)))
    }

    /// Instantiates the oracle named by this objective.
    pub fn build(&self) -> Result<Arc<dyn Oracle>, OracleError> {
        Ok(match self.oracle.as_str() {
            "isomer" => Arc::new(IsomerOracle::from_formula(&self.params::<builtin::IsomerParams>()?.formula)?),
            "similarity" => Arc::new(SimilarityOracle::from_smiles(
                &self.params::<builtin::SimilarityParams>()?.target,
            )?),
            "synthetic" => {
                let p: builtin::SyntheticParams = self.params()?;
                Arc::new(SyntheticOracle::new(p.seed, p.peaks)?)
            }
            "constant" => Arc::new(ConstantOracle {
                value: self.params::<builtin::ConstantParams>()?.value,
            }),
            "bridge" => Arc::new(BridgeOracle::spawn(self.params::<BridgeSpec>()?)?),
            other => {
                return Err(OracleError::InvalidSpec(format!(
                    "objective {:?}: unknown oracle {other:?}",
                    self.name
                )))
            }
        })
    }
}

/// Objectives to optimize and how they are combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub objectives: Vec<ObjectiveSpec>,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl TaskSpec {
    pub fn single(objective: ObjectiveSpec) -> Self {
        TaskSpec {
            objectives: vec![objective],
            aggregation: Aggregation::Sum,
        }
    }

    /// Checks everything that can be checked without starting oracles.
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.objectives.is_empty() {
            return Err(OracleError::InvalidSpec("at least one objective is required".into()));
        }
        let mut names = HashSet::new();
        for o in &self.objectives {
            if !names.insert(o.name.as_str()) {
                return Err(OracleError::InvalidSpec(format!("duplicate objective {:?}", o.name)));
            }
            if !(o.weight.is_finite() && o.weight > 0.0) {
                return Err(OracleError::InvalidSpec(format!(
                    "objective {:?}: weight must be positive, got {}",
                    o.name, o.weight
                )));
            }
            transform_direction(0.0, o.direction, o.bounds)?;
            if o.oracle == "isomer" {
                IsomerOracle::from_formula(&o.params::<builtin::IsomerParams>()?.formula)?;
            }
        }
        if self.aggregation == Aggregation::Pareto && self.objectives.len() > MAX_HV_DIMENSION {
            return Err(OracleError::InvalidSpec(format!(
                "pareto aggregation supports at most {MAX_HV_DIMENSION} objectives"
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.weight).collect()
    }

    pub fn build(&self) -> Result<Vec<Objective>, OracleError> {
        self.validate()?;
        self.objectives
            .iter()
            .map(|spec| {
                Ok(Objective {
                    oracle: spec.build()?,
                    spec: spec.clone(),
                })
            })
            .collect()
    }
}

/// An objective spec bound to a live oracle.
#[derive(Clone)]
pub struct Objective {
    pub spec: ObjectiveSpec,
    pub oracle: Arc<dyn Oracle>,
}

/// Call accounting. `used` counts molecule evaluations; every evaluation
/// scores all objectives once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub budget: u64,
    pub used: u64,
    pub per_objective: Vec<u64>,
}

impl BudgetLedger {
    pub fn new(budget: u64, objectives: usize) -> Self {
        BudgetLedger {
            budget,
            used: 0,
            per_objective: vec![0; objectives],
        }
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.used
    }

    pub fn is_exhausted(&self) -> bool {
        self.used >= self.budget
    }

    fn reserve(&mut self) -> Result<u64, OracleError> {
        if self.is_exhausted() {
            return Err(OracleError::BudgetExhausted { budget: self.budget });
        }
        self.used += 1;
        for c in &mut self.per_objective {
            *c += 1;
        }
        Ok(self.used)
    }
}

/// Raw oracle outputs and their normalized, maximized counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// One budgeted oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call: u64,
    pub smiles: String,
    pub generation: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub smiles: String,
    pub scores: ScoreVector,
    pub fitness: f64,
    /// `true` when the scores came from the cache.
    pub cached: bool,
}

struct State {
    ledger: BudgetLedger,
    cache: HashMap<String, ScoreVector>,
    inflight: HashSet<String>,
    record: Vec<CallRecord>,
}

enum Slot {
    Done(Result<Evaluation, OracleError>),
    Job(usize),
    Alias(usize),
    Wait,
}

/// Shared entry point for scoring: enforces the budget, caches by canonical
/// SMILES and keeps the per-call record. Safe to use from many threads; the
/// budget check and increment happen under one lock.
pub struct OracleHandle {
    objectives: Vec<Objective>,
    weights: Vec<f64>,
    strict: bool,
    workers: usize,
    generation: AtomicU32,
    state: Mutex<State>,
    done: Condvar,
}

impl OracleHandle {
    pub fn new(objectives: Vec<Objective>, budget: u64) -> Self {
        let weights = objectives.iter().map(|o| o.spec.weight).collect();
        OracleHandle {
            state: Mutex::new(State {
                ledger: BudgetLedger::new(budget, objectives.len()),
                cache: HashMap::new(),
                inflight: HashSet::new(),
                record: Vec::new(),
            }),
            objectives,
            weights,
            strict: false,
            workers: 1,
            generation: AtomicU32::new(0),
            done: Condvar::new(),
        }
    }

    pub fn from_task(task: &TaskSpec, budget: u64) -> Result<Self, OracleError> {
        Ok(OracleHandle::new(task.build()?, budget))
    }

    /// Cache hits also consume budget and are recorded.
    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Maximum number of oracle calls run in parallel by a batch.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_generation(&self, generation: u32) {
        self.generation.store(generation, Ordering::SeqCst);
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn ledger(&self) -> BudgetLedger {
        self.lock().ledger.clone()
    }

    /// Completed record entries with call index greater than `after`.
    pub fn records_after(&self, after: u64) -> Vec<CallRecord> {
        let st = self.lock();
        st.record
            .iter()
            .skip(after as usize)
            .take_while(|r| r.scores.is_some() || r.error.is_some())
            .cloned()
            .collect()
    }

    pub fn cached(&self, smiles: &str) -> Option<ScoreVector> {
        self.lock().cache.get(smiles).cloned()
    }

    /// Rebuilds ledger, cache and record from a persisted call log.
    pub fn restore(&self, records: &[CallRecord]) -> Result<(), OracleError> {
        let mut st = self.lock();
        for r in records {
            st.ledger.reserve()?;
            if let Some(s) = &r.scores {
                st.cache.insert(r.smiles.clone(), s.clone());
            }
            st.record.push(r.clone());
        }
        Ok(())
    }

    pub fn fitness(&self, scores: &ScoreVector) -> f64 {
        scores
            .normalized
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum()
    }

    fn compute(&self, mol: &Molecule, smiles: &str) -> Result<ScoreVector, OracleError> {
        let mut raw = Vec::with_capacity(self.objectives.len());
        let mut normalized = Vec::with_capacity(self.objectives.len());
        for o in &self.objectives {
            let r = o.oracle.score(mol, smiles)?;
            if !r.is_finite() {
                return Err(OracleError::Scoring {
                    oracle: o.spec.name.clone(),
                    message: format!("non-finite score {r}"),
                });
            }
            normalized.push(transform_direction(r, o.spec.direction, o.spec.bounds)?);
            raw.push(r);
        }
        Ok(ScoreVector { raw, normalized })
    }

    fn evaluation(&self, smiles: &str, scores: ScoreVector, cached: bool) -> Evaluation {
        Evaluation {
            smiles: smiles.to_string(),
            fitness: self.fitness(&scores),
            scores,
            cached,
        }
    }

    fn push_record(&self, st: &mut State, call: u64, smiles: &str, scores: Option<ScoreVector>) {
        debug_assert_eq!(call as usize, st.record.len() + 1);
        let fitness = scores.as_ref().map(|s| self.fitness(s));
        st.record.push(CallRecord {
            call,
            smiles: smiles.to_string(),
            generation: self.generation.load(Ordering::SeqCst),
            scores,
            fitness,
            error: None,
        });
    }

    pub fn evaluate(&self, mol: &Molecule) -> Result<Evaluation, OracleError> {
        self.evaluate_batch(std::slice::from_ref(mol))
            .pop()
            .expect("one result per molecule")
    }

    /// Scores `mols` in order. Call indices are assigned in input order, so
    /// results do not depend on how the oracle calls are scheduled. Once the
    /// budget runs out, the remaining uncached molecules get
    /// `BudgetExhausted`.
    pub fn evaluate_batch(&self, mols: &[Molecule]) -> Vec<Result<Evaluation, OracleError>> {
        let smiles: Vec<String> = mols.iter().map(|m| m.to_smiles()).collect();
        let mut slots = Vec::with_capacity(mols.len());
        let mut jobs: Vec<(usize, u64)> = Vec::new();
        {
            let mut st = self.lock();
            let mut first_seen: HashMap<&str, usize> = HashMap::new();
            for (i, s) in smiles.iter().enumerate() {
                let cached = st.cache.get(s).cloned();
                let slot = if let Some(scores) = cached {
                    if self.strict {
                        match st.ledger.reserve() {
                            Ok(call) => {
                                self.push_record(&mut st, call, s, Some(scores.clone()));
                                Slot::Done(Ok(self.evaluation(s, scores, true)))
                            }
                            Err(e) => Slot::Done(Err(e)),
                        }
                    } else {
                        Slot::Done(Ok(self.evaluation(s, scores, true)))
                    }
                } else if let Some(&j) = first_seen.get(s.as_str()) {
                    Slot::Alias(j)
                } else if st.inflight.contains(s) {
                    Slot::Wait
                } else {
                    match st.ledger.reserve() {
                        Ok(call) => {
                            st.inflight.insert(s.clone());
                            first_seen.insert(s, i);
                            self.push_record(&mut st, call, s, None);
                            jobs.push((i, call));
                            Slot::Job(jobs.len() - 1)
                        }
                        Err(e) => Slot::Done(Err(e)),
                    }
                };
                slots.push(slot);
            }
        }

        let outputs = self.run_jobs(mols, &smiles, &jobs);

        {
            let mut st = self.lock();
            for (&(i, call), out) in jobs.iter().zip(&outputs) {
                let entry = &mut st.record[call as usize - 1];
                match out {
                    Ok(scores) => {
                        entry.fitness = Some(self.fitness(scores));
                        entry.scores = Some(scores.clone());
                    }
                    Err(e) => entry.error = Some(e.to_string()),
                }
                if let Ok(scores) = out {
                    st.cache.insert(smiles[i].clone(), scores.clone());
                }
                st.inflight.remove(&smiles[i]);
            }
        }
        self.done.notify_all();

        let mut results: Vec<Result<Evaluation, OracleError>> = Vec::with_capacity(mols.len());
        for (i, slot) in slots.into_iter().enumerate() {
            let r = match slot {
                Slot::Done(r) => r,
                Slot::Job(k) => outputs[k]
                    .clone()
                    .map(|scores| self.evaluation(&smiles[i], scores, false)),
                Slot::Alias(j) => match &results[j] {
                    Ok(ev) if self.strict => self.evaluate(&mols[i]).map(|_| Evaluation {
                        cached: true,
                        ..ev.clone()
                    }),
                    Ok(ev) => Ok(Evaluation {
                        cached: true,
                        ..ev.clone()
                    }),
                    Err(e) => Err(e.clone()),
                },
                Slot::Wait => {
                    let mut st = self.lock();
                    while st.inflight.contains(&smiles[i]) {
                        st = self.done.wait(st).unwrap_or_else(|p| p.into_inner());
                    }
                    drop(st);
                    self.evaluate(&mols[i])
                }
            };
            results.push(r);
        }
        results
    }

    fn run_jobs(
        &self,
        mols: &[Molecule],
        smiles: &[String],
        jobs: &[(usize, u64)],
    ) -> Vec<Result<ScoreVector, OracleError>> {
        let workers = self.workers.min(jobs.len());
        if workers <= 1 {
            return jobs.iter().map(|&(i, _)| self.compute(&mols[i], &smiles[i])).collect();
        }
        let next = AtomicUsize::new(0);
        let outputs: Vec<Mutex<Option<Result<ScoreVector, OracleError>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&(i, _)) = jobs.get(k) else { break };
                    let out = self.compute(&mols[i], &smiles[i]);
                    *outputs[k].lock().unwrap_or_else(|p| p.into_inner()) = Some(out);
                });
            }
        });
        outputs
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every job ran"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use approx::assert_abs_diff_eq;

    fn mol(s: &str) -> Molecule {
        parse_smiles(s).unwrap()
    }

    fn isomer_handle(budget: u64) -> OracleHandle {
        let mut params = toml::Table::new();
        params.insert("formula".into(), "C2H6O".into());
        let task = TaskSpec::single(ObjectiveSpec::new("iso", "isomer", params));
        OracleHandle::from_task(&task, budget).unwrap()
    }

    #[test]
    fn direction_examples() {
        assert_eq!(transform_direction(1.0, Direction::Minimize, [1.0, 10.0]).unwrap(), 1.0);
        assert_eq!(transform_direction(10.0, Direction::Maximize, [1.0, 10.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(transform_direction(5.5, Direction::Minimize, [1.0, 10.0]).unwrap(), 0.5);
        assert_eq!(transform_direction(-30.0, Direction::Minimize, [-20.0, 0.0]).unwrap(), 1.0);
        assert_eq!(transform_direction(0.3, Direction::Maximize, [1.0, 1.0]), Err(OracleError::InvalidBounds { lo: 1.0, hi: 1.0 }));
    }

    #[test]
    fn cache_hit_is_free() {
        let h = isomer_handle(10);
        let a = h.evaluate(&mol("CCO")).unwrap();
        let used = h.ledger();
        let b = h.evaluate(&mol("OCC")).unwrap();
        assert_eq!(h.ledger(), used);
        assert!(b.cached);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.fitness, 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let h = isomer_handle(1);
        h.evaluate(&mol("CCO")).unwrap();
        assert_eq!(h.evaluate(&mol("CCN")), Err(OracleError::BudgetExhausted { budget: 1 }));
        assert_eq!(h.ledger().used, 1);
    }

    #[test]
    fn strict_mode_charges_hits() {
        let h = isomer_handle(3).with_strict(true);
        h.evaluate(&mol("CCO")).unwrap();
        let hit = h.evaluate(&mol("CCO")).unwrap();
        assert!(hit.cached);
        assert_eq!(h.ledger().used, 2);
        assert_eq!(h.records_after(0).len(), 2);
    }

    #[test]
    fn batch_assigns_calls_in_order() {
        let h = isomer_handle(10).with_workers(4);
        let mols: Vec<_> = ["CCO", "CCC", "CCO", "CCN", "COC"].iter().map(|s| mol(s)).collect();
        let out = h.evaluate_batch(&mols);
        assert!(out.iter().all(|r| r.is_ok()));
        assert!(out[2].as_ref().unwrap().cached);
        let rec = h.records_after(0);
        let calls: Vec<_> = rec.iter().map(|r| (r.call, r.smiles.as_str())).collect();
        assert_eq!(calls, vec![(1, "CCO"), (2, "CCC"), (3, "CCN"), (4, "COC")]);
    }

    #[test]
    fn task_validation() {
        let mut t = TaskSpec::single(ObjectiveSpec::new("c", "constant", toml::Table::new()));
        t.objectives[0].weight = 0.0;
        assert!(t.validate().is_err());
        let empty = TaskSpec {
            objectives: vec![],
            aggregation: Aggregation::Sum,
        };
        assert!(empty.validate().is_err());
        let mut params = toml::Table::new();
        params.insert("formula".into(), "".into());
        assert!(TaskSpec::single(ObjectiveSpec::new("i", "isomer", params)).validate().is_err());
        let unknown = TaskSpec::single(ObjectiveSpec::new("x", "qed", toml::Table::new()));
        assert!(unknown.build().is_err());
    }

    #[test]
    fn task_from_toml() {
        let text = r#"
aggregation = "pareto"
[[objectives]]
name = "iso"
oracle = "isomer"
params = { formula = "C7H8N2O2" }
[[objectives]]
name = "dock"
oracle = "constant"
direction = "minimize"
bounds = [-20.0, 0.0]
params = { value = -10.0 }
"#;
        let t: TaskSpec = toml::from_str(text).unwrap();
        assert_eq!(t.aggregation, Aggregation::Pareto);
        let h = OracleHandle::from_task(&t, 5).unwrap();
        let ev = h.evaluate(&mol("C")).unwrap();
        assert_eq!(ev.scores.raw[1], -10.0);
        assert_eq!(ev.scores.normalized[1], 0.5);
    }
}
