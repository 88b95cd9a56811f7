//! The generational loop: mate, mutate, prune towards the fittest molecule,
//! evaluate, and keep the best of parents and offspring.

mod config;
mod report;
mod rundir;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{default_fingerprint, tanimoto_distance};
use crate::genetic_ops::{crossover, mutate, rng_stream, sample_parents, GeneticError};
use crate::llm_ops::{ChatClient, HttpChatClient, LlmError, LlmOperator, SlotTag, StatsSnapshot};
use crate::molgraph::{parse_smiles, read_seed_pool, Molecule};
use crate::oracle::{Aggregation, CallRecord, Objective, OracleError, OracleHandle, ScoreVector};
use crate::pareto::{select_survivors, ObjectivePoint};

pub use config::{
    check_early_stop, locate_key, merge, preset_names, preset_text, ConfigError, ConfigSources,
    EarlyStopConfig, GaConfig, LlmConfig, OracleConfig, PromptRef, RunConfig, Wiring,
};
pub use report::{compute_metrics, read_records, render_report_csv, report_run_dir, RunMetrics};
pub use rundir::{Checkpoint, RunDir, CHECKPOINT, CONFIG, RECORD, REPORT, SUMMARY, TRANSCRIPT};

/// Molecules used when a config names no seed pool.
pub const BUNDLED_SEED_POOL: &str = include_str!("../../data/seed_pool.smi");

/// Slot index reserved for drawing the initial population.
const INIT_SLOT: u32 = u32::MAX;

/// Generations in a row without a new oracle call before giving up.
const STALL_LIMIT: u32 = 20;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Genetic(#[from] GeneticError),
    #[error("seed pool: {0}")]
    Pool(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("cannot resume: {0}")]
    Resume(String),
}

impl EngineError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        EngineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Operator that produced an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Crossover,
    /// Crossover child that was then mutated.
    Mutation,
    LlmCrossover,
    LlmMutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    #[serde(skip, default = "Molecule::empty")]
    pub mol: Molecule,
    pub smiles: String,
    pub scores: ScoreVector,
    pub fitness: f64,
    pub generation: u32,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    EarlyStop,
    MaxGenerations,
    Stalled,
}

/// Operator counts accumulated over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub crossover_children: u64,
    pub crossover_absent: u64,
    pub random_mutations: u64,
    pub failed_mutations: u64,
    pub llm_crossover_children: u64,
    pub llm_mutation_children: u64,
    pub pruned: u64,
    pub scoring_failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub generations: u32,
    pub budget: u64,
    pub used: u64,
    pub metrics: RunMetrics,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_stats: Option<StatsSnapshot>,
    /// Final population, fittest first, as (SMILES, fitness).
    pub population: Vec<(String, f64)>,
}

struct Slot {
    child: Option<(Molecule, Origin)>,
    parent_best: f64,
    llm_edit: bool,
    mutation_failed: bool,
}

/// One run of the optimizer.
pub struct Engine {
    config: RunConfig,
    oracle: Arc<OracleHandle>,
    llm: Option<Arc<LlmOperator>>,
    population: Vec<Individual>,
    generation: u32,
    history: Vec<f64>,
    best: BinaryHeap<Reverse<OrdF64>>,
    best_sum: f64,
    provenance: Provenance,
    stalled: u32,
    termination: Option<Termination>,
    initialized: bool,
    run_dir: Option<RunDir>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Reparses a molecule from its canonical SMILES so the atom order, and
/// with it every later operator outcome, depends only on the SMILES.
fn canonical(mol: &Molecule) -> Option<(Molecule, String)> {
    let smiles = mol.to_smiles();
    let canon = parse_smiles(&smiles).ok()?;
    Some((canon, smiles))
}

/// Runs `f` over `0..n` on up to `workers` threads; results keep index order.
fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let v = f(i);
                *out[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(v);
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every slot ran"))
        .collect()
}

impl Engine {
    /// Builds oracles from the task and, for LLM wirings, an HTTP client
    /// from the endpoint unless `client` is given.
    pub fn new(config: RunConfig, client: Option<Arc<dyn ChatClient>>) -> Result<Engine, EngineError> {
        config.validate()?;
        let objectives = config.task.build()?;
        Engine::with_objectives(config, objectives, client)
    }

    /// Like [`Engine::new`] with caller-supplied oracles; the task section
    /// still provides names, weights, directions and bounds.
    pub fn with_objectives(
        config: RunConfig,
        objectives: Vec<Objective>,
        client: Option<Arc<dyn ChatClient>>,
    ) -> Result<Engine, EngineError> {
        config.validate()?;
        let oracle = OracleHandle::new(objectives, config.budget)
            .with_strict(config.oracle.strict)
            .with_workers(config.oracle.workers);
        let llm = match (&config.llm, config.needs_llm()) {
            (Some(llm), true) => {
                let client: Arc<dyn ChatClient> = match client {
                    Some(c) => c,
                    None => Arc::new(HttpChatClient::new(llm.endpoint.clone())?),
                };
                let prompt = llm.prompt.resolve().expect("validated");
                Some(Arc::new(LlmOperator::new(client, prompt, config.wiring.templates())?))
            }
            _ => None,
        };
        Ok(Engine {
            config,
            oracle: Arc::new(oracle),
            llm,
            population: Vec::new(),
            generation: 0,
            history: Vec::new(),
            best: BinaryHeap::new(),
            best_sum: 0.0,
            provenance: Provenance::default(),
            stalled: 0,
            termination: None,
            initialized: false,
            run_dir: None,
        })
    }

    /// Persists every generation to `dir`, which must not hold a run yet.
    pub fn attach_run_dir(&mut self, dir: &Path) -> Result<(), EngineError> {
        self.run_dir = Some(RunDir::create(dir, &self.config)?);
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn oracle(&self) -> &OracleHandle {
        &self.oracle
    }

    pub fn llm(&self) -> Option<&LlmOperator> {
        self.llm.as_deref()
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    /// Index of the last completed generation; 0 is the initial population.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Tracked top-n mean after every completed generation.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.oracle.records_after(0)
    }

    fn track(&mut self, fitness: f64) {
        let cap = self.config.early_stop.top_n;
        self.best.push(Reverse(OrdF64(fitness)));
        self.best_sum += fitness;
        if self.best.len() > cap {
            let Reverse(OrdF64(dropped)) = self.best.pop().expect("non-empty");
            self.best_sum -= dropped;
        }
    }

    fn top_mean(&self) -> f64 {
        if self.best.is_empty() {
            0.0
        } else {
            self.best_sum / self.best.len() as f64
        }
    }

    fn seed_molecules(&self) -> Result<Vec<(Molecule, String)>, EngineError> {
        let text = match &self.config.seed_pool {
            Some(path) => std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?,
            None => BUNDLED_SEED_POOL.to_string(),
        };
        let mut seen = HashSet::new();
        let mut pool = Vec::new();
        for (line, parsed) in read_seed_pool(&text) {
            match parsed.map_err(|e| e.to_string()).and_then(|m| {
                if m.components().len() == 1 {
                    canonical(&m).ok_or_else(|| "cannot canonicalize".to_string())
                } else {
                    Err("disconnected molecule".to_string())
                }
            }) {
                Ok((mol, smiles)) => {
                    if seen.insert(smiles.clone()) {
                        pool.push((mol, smiles));
                    }
                }
                Err(e) => log::warn!("seed pool line {line} skipped: {e}"),
            }
        }
        let need = self.config.ga.population_size;
        if pool.len() < need {
            return Err(EngineError::Pool(format!(
                "{} distinct valid molecules, population needs {need}",
                pool.len()
            )));
        }
        Ok(pool)
    }

    /// Draws and evaluates the initial population.
    pub fn initialize(&mut self) -> Result<(), EngineError> {
        if self.initialized {
            return Ok(());
        }
        let mut pool = self.seed_molecules()?;
        let mut rng = rng_stream(self.config.seed, 0, INIT_SLOT);
        pool.shuffle(&mut rng);
        pool.truncate(self.config.ga.population_size);
        self.oracle.set_generation(0);
        let mols: Vec<Molecule> = pool.iter().map(|(m, _)| m.clone()).collect();
        let results = self.oracle.evaluate_batch(&mols);
        let mut population = Vec::new();
        for ((mol, smiles), result) in pool.into_iter().zip(results) {
            match result {
                Ok(ev) => {
                    self.track(ev.fitness);
                    population.push(Individual {
                        mol,
                        smiles,
                        scores: ev.scores,
                        fitness: ev.fitness,
                        generation: 0,
                        origin: Origin::Seed,
                    })
                }
                Err(OracleError::Scoring { oracle, message }) => {
                    log::warn!("{oracle} could not score seed {smiles}: {message}");
                    self.provenance.scoring_failures += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if population.is_empty() {
            return Err(EngineError::Pool("no seed molecule could be scored".into()));
        }
        self.population = population;
        self.select();
        self.initialized = true;
        self.history.push(self.top_mean());
        if self.oracle.ledger().is_exhausted() {
            self.termination = Some(Termination::Budget);
        }
        self.persist()?;
        Ok(())
    }

    fn workers(&self) -> usize {
        match &self.config.llm {
            Some(llm) if self.llm.is_some() => llm.endpoint.concurrency,
            _ => 1,
        }
    }

    fn propose(&self, generation: u32) -> Result<Vec<Slot>, EngineError> {
        let ga = &self.config.ga;
        let fitness: Vec<f64> = self.population.iter().map(|i| i.fitness).collect();
        let seed = self.config.seed;
        let gpt4 = self.llm.as_deref().filter(|_| self.config.wiring == Wiring::Gpt4);
        let slots = par_map(ga.crossovers, self.workers(), |j| -> Result<Slot, GeneticError> {
            let mut rng = rng_stream(seed, generation, j as u32);
            let (ia, ib) = sample_parents(&fitness, &mut rng)?;
            let (a, b) = (&self.population[ia], &self.population[ib]);
            let parent_best = a.fitness.max(b.fitness);
            let (child, origin) = match gpt4 {
                Some(op) => {
                    let tag = SlotTag {
                        generation,
                        slot: j as u32,
                    };
                    let out = op.crossover((&a.mol, a.fitness), (&b.mol, b.fitness), &ga.limits, &mut rng, tag);
                    let origin = if out.fallback {
                        Origin::Crossover
                    } else {
                        Origin::LlmCrossover
                    };
                    (out.child, origin)
                }
                None => (crossover(&a.mol, &b.mol, &ga.limits, &mut rng), Origin::Crossover),
            };
            let mut mutation_failed = false;
            let child = child.map(|c| {
                if origin == Origin::Crossover && rng.random_bool(ga.mutation_rate) {
                    match mutate(&c, &ga.mutation_table, &ga.limits, &mut rng) {
                        Some(m) => (m, Origin::Mutation),
                        None => {
                            mutation_failed = true;
                            (c, origin)
                        }
                    }
                } else {
                    (c, origin)
                }
            });
            Ok(Slot {
                child,
                parent_best,
                llm_edit: false,
                mutation_failed,
            })
        });
        let mut slots = slots.into_iter().collect::<Result<Vec<_>, _>>()?;

        if let Some(op) = self.llm.as_deref().filter(|_| self.config.wiring == Wiring::Biot5) {
            let top: Vec<&Individual> = self.population.iter().take(ga.llm_top_y).collect();
            let base = ga.crossovers as u32;
            let edits = par_map(top.len(), self.workers(), |i| {
                let tag = SlotTag {
                    generation,
                    slot: base + i as u32,
                };
                Slot {
                    child: op.mutate(&top[i].mol, tag).map(|m| (m, Origin::LlmMutation)),
                    parent_best: top[i].fitness,
                    llm_edit: true,
                    mutation_failed: false,
                }
            });
            slots.extend(edits);
        }
        Ok(slots)
    }

    /// Runs one generation. Returns the termination reason once the run is
    /// over.
    pub fn step(&mut self) -> Result<Option<Termination>, EngineError> {
        if !self.initialized {
            self.initialize()?;
        }
        if let Some(t) = self.termination {
            return Ok(Some(t));
        }
        let generation = self.generation + 1;
        let used_before = self.oracle.ledger().used;
        let slots = self.propose(generation)?;

        let mut offspring: Vec<(Molecule, String, Origin, f64)> = Vec::new();
        for slot in slots {
            let Some((mol, origin)) = slot.child else {
                if !slot.llm_edit {
                    self.provenance.crossover_absent += 1;
                }
                continue;
            };
            let p = &mut self.provenance;
            p.failed_mutations += u64::from(slot.mutation_failed);
            match origin {
                Origin::Crossover => p.crossover_children += 1,
                Origin::Mutation => {
                    p.crossover_children += 1;
                    p.random_mutations += 1;
                }
                Origin::LlmCrossover => p.llm_crossover_children += 1,
                Origin::LlmMutation => p.llm_mutation_children += 1,
                Origin::Seed => {}
            }
            match canonical(&mol) {
                Some((m, s)) => offspring.push((m, s, origin, slot.parent_best)),
                None => log::warn!("dropping child that does not reparse: {}", mol.to_smiles()),
            }
        }

        let offspring = self.prune(offspring);

        self.oracle.set_generation(generation);
        let mols: Vec<Molecule> = offspring.iter().map(|o| o.0.clone()).collect();
        let results = self.oracle.evaluate_batch(&mols);
        let mut budget_hit = false;
        let mut fresh = Vec::new();
        for ((mol, smiles, origin, parent_best), result) in offspring.into_iter().zip(results) {
            match result {
                Ok(ev) => {
                    if !ev.cached {
                        self.track(ev.fitness);
                    }
                    if matches!(origin, Origin::LlmCrossover | Origin::LlmMutation) && ev.fitness > parent_best {
                        if let Some(op) = &self.llm {
                            op.stats().record_improvement();
                        }
                    }
                    fresh.push(Individual {
                        mol,
                        smiles,
                        scores: ev.scores,
                        fitness: ev.fitness,
                        generation,
                        origin,
                    });
                }
                Err(OracleError::BudgetExhausted { .. }) => budget_hit = true,
                Err(OracleError::Scoring { oracle, message }) => {
                    log::warn!("{oracle} could not score {smiles}: {message}");
                    self.provenance.scoring_failures += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.population.extend(fresh);
        self.select();
        self.generation = generation;
        self.history.push(self.top_mean());

        let ledger = self.oracle.ledger();
        self.stalled = if ledger.used == used_before { self.stalled + 1 } else { 0 };
        let es = &self.config.early_stop;
        self.termination = if budget_hit || ledger.is_exhausted() {
            Some(Termination::Budget)
        } else if es.enabled && check_early_stop(&self.history, es.window, es.threshold) {
            Some(Termination::EarlyStop)
        } else if self.config.ga.max_generations.is_some_and(|m| generation >= m) {
            Some(Termination::MaxGenerations)
        } else if self.stalled >= STALL_LIMIT {
            Some(Termination::Stalled)
        } else {
            None
        };
        self.persist()?;
        Ok(self.termination)
    }

    /// Keeps the `offspring` children closest to the fittest known molecule.
    fn prune(&mut self, offspring: Vec<(Molecule, String, Origin, f64)>) -> Vec<(Molecule, String, Origin, f64)> {
        let keep = self.config.ga.offspring;
        if offspring.len() <= keep {
            return offspring;
        }
        // Fittest known molecule among parents and already-scored children.
        let known = self
            .population
            .iter()
            .map(|i| (i.fitness, &i.smiles, &i.mol))
            .chain(offspring.iter().filter_map(|o| {
                let f = self.oracle.cached(&o.1).map(|s| self.oracle.fitness(&s))?;
                Some((f, &o.1, &o.0))
            }));
        let reference = known
            .min_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)))
            .expect("population is non-empty");
        let reference_fp = default_fingerprint(reference.2);
        let mut order: Vec<(f64, usize)> = offspring
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let d = tanimoto_distance(&default_fingerprint(&o.0), &reference_fp).expect("same width");
                (d, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut kept: Vec<usize> = order.into_iter().take(keep).map(|(_, i)| i).collect();
        kept.sort_unstable();
        self.provenance.pruned += (offspring.len() - kept.len()) as u64;
        let mut offspring: Vec<Option<_>> = offspring.into_iter().map(Some).collect();
        kept.into_iter().map(|i| offspring[i].take().expect("kept once")).collect()
    }

    /// Deduplicates the pool by SMILES and keeps the survivors, fittest first.
    fn select(&mut self) {
        let mut seen = HashSet::new();
        let mut pool: Vec<Individual> = std::mem::take(&mut self.population)
            .into_iter()
            .filter(|i| seen.insert(i.smiles.clone()))
            .collect();
        let n = self.config.ga.population_size;
        let by_fitness = |a: &Individual, b: &Individual| {
            b.fitness.total_cmp(&a.fitness).then_with(|| a.smiles.cmp(&b.smiles))
        };
        if self.config.task.aggregation == Aggregation::Pareto && pool.len() > 1 {
            let points: Vec<ObjectivePoint> = pool
                .iter()
                .map(|i| ObjectivePoint::new(i.scores.normalized.clone(), i.smiles.clone()).expect("normalized scores are finite"))
                .collect();
            let chosen = select_survivors(&points, self.oracle.weights(), n.min(pool.len()))
                .expect("objective vectors share a dimension");
            let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
            pool = chosen.into_iter().map(|i| slots[i].take().expect("chosen once")).collect();
            pool.sort_by(by_fitness);
        } else {
            pool.sort_by(by_fitness);
            pool.truncate(n);
        }
        self.population = pool;
    }

    fn persist(&mut self) -> Result<(), EngineError> {
        let Some(mut dir) = self.run_dir.take() else {
            return Ok(());
        };
        let result = self.persist_into(&mut dir);
        self.run_dir = Some(dir);
        result
    }

    fn persist_into(&self, dir: &mut RunDir) -> Result<(), EngineError> {
        let transcript = self.llm.as_ref().map(|op| op.drain_transcript()).unwrap_or_default();
        let records = self.oracle.records_after(dir.records_written());
        let checkpoint = Checkpoint {
            generation: self.generation,
            population: self.population.clone(),
            history: self.history.clone(),
            provenance: self.provenance,
            stalled: self.stalled,
            termination: self.termination,
            llm_stats: self.llm.as_ref().map(|op| op.stats().snapshot()),
            records: 0,
            transcript: 0,
        };
        dir.append_generation(&records, &transcript, checkpoint)?;
        if self.termination.is_some() {
            let summary = self.summary();
            dir.finish(&summary, &self.records())?;
        }
        Ok(())
    }

    /// Runs at most `n` more generations; `None` while the run continues.
    pub fn run_generations(&mut self, n: u32) -> Result<Option<Termination>, EngineError> {
        if !self.initialized {
            self.initialize()?;
        }
        for _ in 0..n {
            if let Some(t) = self.step()? {
                return Ok(Some(t));
            }
        }
        Ok(self.termination)
    }

    /// Runs to termination.
    pub fn run(&mut self) -> Result<RunSummary, EngineError> {
        if !self.initialized {
            self.initialize()?;
        }
        while self.step()?.is_none() {}
        Ok(self.summary())
    }

    /// Summary of the run so far, computed from the call record.
    pub fn summary(&self) -> RunSummary {
        let records = self.records();
        let metrics = compute_metrics(&records, self.config.budget, self.oracle.weights().len());
        let ledger = self.oracle.ledger();
        RunSummary {
            termination: self.termination.unwrap_or(Termination::Budget),
            generations: self.generation,
            budget: ledger.budget,
            used: ledger.used,
            metrics,
            provenance: self.provenance,
            llm_stats: self.llm.as_ref().map(|op| op.stats().snapshot()),
            population: self.population.iter().map(|i| (i.smiles.clone(), i.fitness)).collect(),
        }
    }

    /// Continues a run persisted in `dir` from its last complete generation.
    pub fn resume(dir: &Path, client: Option<Arc<dyn ChatClient>>) -> Result<Engine, EngineError> {
        let (config, run_dir, checkpoint, records) = RunDir::reopen(dir)?;
        let mut engine = Engine::new(config, client)?;
        engine.restore(run_dir, checkpoint, records)?;
        Ok(engine)
    }

    /// [`Engine::resume`] with caller-supplied oracles.
    pub fn resume_with_objectives(
        dir: &Path,
        objectives: Vec<Objective>,
        client: Option<Arc<dyn ChatClient>>,
    ) -> Result<Engine, EngineError> {
        let (config, run_dir, checkpoint, records) = RunDir::reopen(dir)?;
        let mut engine = Engine::with_objectives(config, objectives, client)?;
        engine.restore(run_dir, checkpoint, records)?;
        Ok(engine)
    }

    fn restore(&mut self, run_dir: RunDir, cp: Checkpoint, records: Vec<CallRecord>) -> Result<(), EngineError> {
        self.oracle.restore(&records)?;
        for r in &records {
            if let Some(f) = r.fitness {
                self.track(f);
            }
        }
        let mut population = Vec::with_capacity(cp.population.len());
        for mut ind in cp.population {
            ind.mol = parse_smiles(&ind.smiles)
                .map_err(|e| EngineError::Resume(format!("population member {}: {e}", ind.smiles)))?;
            population.push(ind);
        }
        self.population = population;
        self.generation = cp.generation;
        self.history = cp.history;
        self.provenance = cp.provenance;
        self.stalled = cp.stalled;
        self.termination = cp.termination;
        if let (Some(op), Some(stats)) = (&self.llm, cp.llm_stats) {
            op.stats().restore(stats);
        }
        self.initialized = true;
        if self.termination.is_some() && !run_dir.has_summary() {
            run_dir.finish(&self.summary(), &records)?;
        }
        self.run_dir = Some(run_dir);
        Ok(())
    }
}
