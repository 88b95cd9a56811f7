mod common;

use std::fs;
use std::io::Write;

use molga::engine::{read_records, Engine, Origin, Termination, Wiring, RECORD, SUMMARY};
use molga::llm_ops::{ChatMessage, FnClient};
use molga::molgraph::{molecular_formula, parse_smiles};
use molga::oracle::Aggregation;
use sha2::{Digest, Sha256};

use common::*;

fn record_bytes(dir: &std::path::Path) -> Vec<u8> {
    fs::read(dir.join(RECORD)).unwrap()
}

#[test]
fn budget_equal_to_population_stops_after_seeding() {
    let mut cfg = synthetic(1, 30);
    cfg.ga.population_size = 30;
    let mut engine = Engine::new(cfg, None).unwrap();
    let summary = engine.run().unwrap();
    assert_eq!(summary.generations, 0);
    assert_eq!(summary.termination, Termination::Budget);
    assert_eq!(summary.used, 30);
}

#[test]
fn flat_landscape_stops_early() {
    let mut cfg = synthetic(2, 100_000);
    cfg.task.objectives[0].oracle = "constant".into();
    cfg.task.objectives[0].params = toml::toml! { value = 0.5 };
    let mut engine = Engine::new(cfg, None).unwrap();
    let summary = engine.run().unwrap();
    assert_eq!(summary.termination, Termination::EarlyStop);
    assert!(summary.generations <= 6, "{}", summary.generations);
}

#[test]
fn zero_mutation_rate_never_mutates() {
    let mut cfg = synthetic(3, 400);
    cfg.ga.mutation_rate = 0.0;
    let mut engine = Engine::new(cfg, None).unwrap();
    let summary = engine.run().unwrap();
    assert_eq!(summary.provenance.random_mutations, 0);
    assert!(engine.population().iter().all(|i| i.origin != Origin::Mutation));
}

#[test]
fn identical_seeds_give_identical_records() {
    let run = |seed| {
        let mut engine = Engine::new(synthetic(seed, 300), None).unwrap();
        engine.run().unwrap();
        engine.records()
    };
    assert_eq!(run(11), run(11));
    assert_ne!(run(11), run(12));
}

#[test]
fn record_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(5, 10_000);
    cfg.ga.max_generations = Some(3);
    let mut engine = Engine::new(cfg, None).unwrap();
    engine.attach_run_dir(dir.path()).unwrap();
    assert_eq!(engine.run().unwrap().termination, Termination::MaxGenerations);
    let digest = hex::encode(Sha256::digest(record_bytes(dir.path())));
    assert_eq!(digest, GOLDEN_RECORD_SHA256);
}

const GOLDEN_RECORD_SHA256: &str = "debda933af6f916d5c9b6bd83edc0a0635fcd3a787b1f3fefe0a1c6478641a0a";

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let full = tempfile::tempdir().unwrap();
    let cut = tempfile::tempdir().unwrap();
    let cfg = synthetic(8, 600);

    let mut engine = Engine::new(cfg.clone(), None).unwrap();
    engine.attach_run_dir(full.path()).unwrap();
    engine.run().unwrap();

    let mut engine = Engine::new(cfg, None).unwrap();
    engine.attach_run_dir(cut.path()).unwrap();
    assert_eq!(engine.run_generations(4).unwrap(), None);
    drop(engine);
    // A crash midway through writing the next generation.
    let mut f = fs::OpenOptions::new().append(true).open(cut.path().join(RECORD)).unwrap();
    f.write_all(b"{\"call\": 999, \"smi").unwrap();
    drop(f);

    let mut engine = Engine::resume(cut.path(), None).unwrap();
    assert_eq!(engine.generation(), 4);
    engine.run().unwrap();
    assert_eq!(record_bytes(full.path()), record_bytes(cut.path()));
    assert_eq!(
        fs::read(full.path().join(SUMMARY)).unwrap(),
        fs::read(cut.path().join(SUMMARY)).unwrap()
    );
}

#[test]
fn best_individual_never_lost() {
    let mut engine = Engine::new(synthetic(9, 2000), None).unwrap();
    engine.initialize().unwrap();
    let mut best = engine.population()[0].fitness;
    while engine.step().unwrap().is_none() {
        let now = engine.population()[0].fitness;
        assert!(now >= best);
        best = now;
    }
    let recorded = engine.records().iter().filter_map(|r| r.fitness).fold(f64::MIN, f64::max);
    assert_eq!(best, recorded);
}

#[test]
fn always_invalid_llm_matches_graph_ga() {
    let base = preset("isomers_c7h8n2o2", &["budget = 800"]);
    let mut plain = Engine::new(base.clone(), None).unwrap();
    plain.run().unwrap();
    let cfg = with_llm(base, Wiring::Gpt4, "isomers_c7h8n2o2");
    let mut llm = Engine::new(cfg, Some(invalid_client())).unwrap();
    let summary = llm.run().unwrap();
    assert_eq!(plain.records(), llm.records());
    let stats = summary.llm_stats.unwrap();
    assert!(stats.queries > 0);
    assert_eq!(stats.invalid, stats.queries);
    assert_eq!(stats.fallbacks, stats.queries);
}

#[test]
fn informed_llm_beats_graph_ga() {
    let base = preset("isomers_c7h8n2o2", &["budget = 600"]);
    let mut plain = Engine::new(base.clone(), None).unwrap();
    let plain = plain.run().unwrap();
    let cfg = with_llm(base, Wiring::Gpt4, "isomers_c7h8n2o2");
    let mut llm = Engine::new(cfg, Some(peeking_client())).unwrap();
    let informed = llm.run().unwrap();
    assert!(informed.metrics.top10_auc > plain.metrics.top10_auc);
    assert!(informed.provenance.llm_crossover_children > 0);
    let best = &informed.population[0];
    assert_eq!(best.1, 1.0);
    let formula = molecular_formula(&parse_smiles(&best.0).unwrap()).to_string();
    assert_eq!(formula, "C7H8N2O2");
}

#[test]
fn biot5_wiring_edits_top_molecules() {
    let base = preset("isomers_c7h8n2o2", &["budget = 400", "ga.llm_top_y = 5"]);
    let cfg = with_llm(base, Wiring::Biot5, "isomers_c7h8n2o2");
    let client = FnClient(|msgs: &[ChatMessage]| {
        let p = &msgs[0].content;
        let start = p.find("<bom>").unwrap() + 5;
        let end = p[start..].find("<eom>").unwrap() + start;
        Ok(format!("<bom>[N]{}<eom>", &p[start..end]))
    });
    let mut engine = Engine::new(cfg, Some(std::sync::Arc::new(client))).unwrap();
    let summary = engine.run().unwrap();
    let stats = summary.llm_stats.unwrap();
    assert_eq!(stats.queries, 5 * u64::from(summary.generations));
    assert!(summary.provenance.llm_mutation_children > 0);
    assert!(summary.provenance.crossover_children > 0);
}

#[test]
fn pareto_selection_runs_and_reports_hypervolume() {
    let mut cfg = synthetic(4, 500);
    let mut second = cfg.task.objectives[0].clone();
    second.name = "other".into();
    second.params = toml::toml! { seed = 99 };
    cfg.task.objectives.push(second);
    cfg.task.aggregation = Aggregation::Pareto;
    let mut engine = Engine::new(cfg, None).unwrap();
    let summary = engine.run().unwrap();
    let hv = summary.metrics.hypervolume.unwrap();
    assert!(hv > 0.0 && hv <= 1.0);
    assert!(summary.metrics.sum_of_top10_aucs.is_some());
    assert_eq!(engine.population().len(), 30);
}

#[test]
fn corrupted_seed_pool_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.smi");
    let mut text = String::new();
    for (i, line) in molga::engine::BUNDLED_SEED_POOL.lines().take(100).enumerate() {
        if i % 10 == 0 {
            text.push_str("C1CC(((\n");
        }
        text.push_str(line);
        text.push('\n');
    }
    fs::write(&pool, text).unwrap();
    let mut cfg = synthetic(6, 200);
    cfg.seed_pool = Some(pool);
    let mut engine = Engine::new(cfg, None).unwrap();
    engine.run().unwrap();
    assert!(engine.records().iter().all(|r| parse_smiles(&r.smiles).is_ok()));
}

#[test]
fn report_agrees_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut engine = Engine::new(synthetic(7, 300), None).unwrap();
    engine.attach_run_dir(dir.path()).unwrap();
    let summary = engine.run().unwrap();
    let (metrics, csv) = molga::engine::report_run_dir(dir.path()).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    assert!(close(metrics.top10_auc, summary.metrics.top10_auc));
    assert!(close(metrics.top1_auc, summary.metrics.top1_auc));
    assert!(close(metrics.top100_auc, summary.metrics.top100_auc));
    let written = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    for (i, (a, b)) in written.lines().zip(csv.lines()).enumerate() {
        assert_eq!(a, b, "line {}", i + 1);
    }
    assert_eq!(written, csv);
    assert_eq!(read_records(&dir.path().join(RECORD)).unwrap().len() as u64, summary.used);
}
