#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use molga::engine::{ConfigSources, LlmConfig, PromptRef, RunConfig, Wiring};
use molga::llm_ops::{ChatClient, ChatMessage, FnClient, LlmEndpoint, LlmError};
use molga::molgraph::{molecular_formula, parse_smiles, BondOrder, Molecule};

/// Small synthetic-landscape run.
pub fn synthetic(seed: u64, budget: u64) -> RunConfig {
    RunConfig::from_toml_str(&format!(
        r#"
seed = {seed}
budget = {budget}

[ga]
population_size = 30
offspring = 20
crossovers = 20

[[task.objectives]]
name = "syn"
oracle = "synthetic"
params = {{ seed = 7 }}
"#
    ))
    .unwrap()
}

pub fn preset(name: &str, overrides: &[&str]) -> RunConfig {
    RunConfig::load(&ConfigSources {
        presets: vec![name.to_string()],
        overrides: overrides.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    })
    .unwrap()
}

/// Switches to an LLM wiring; tests inject the client, so the endpoint is
/// never contacted.
pub fn with_llm(mut cfg: RunConfig, wiring: Wiring, prompt: &str) -> RunConfig {
    cfg.wiring = wiring;
    cfg.llm = Some(LlmConfig {
        endpoint: LlmEndpoint::new("http://127.0.0.1:9/v1", "mock"),
        prompt: PromptRef::Task(prompt.to_string()),
    });
    cfg
}

pub fn invalid_client() -> Arc<dyn ChatClient> {
    Arc::new(FnClient(|_: &[ChatMessage]| {
        Ok("{<<<Explanation>>>: none, <<<Molecule>>>: \\box{C(C)(C)(C)(C)C}}".to_string())
    }))
}

/// Exact C7H8N2O2 isomers, each checked against the formula on use.
pub const C7H8N2O2_ISOMERS: &[&str] = &[
    "NCc1ccc(cc1)[N+](=O)[O-]",
    "NCc1cccc(c1)[N+](=O)[O-]",
    "NCc1ccccc1[N+](=O)[O-]",
    "Cc1ccc(N)cc1[N+](=O)[O-]",
    "Cc1ccc(cc1N)[N+](=O)[O-]",
    "CNc1ccc(cc1)[N+](=O)[O-]",
    "CNc1ccccc1[N+](=O)[O-]",
    "NNC(=O)c1ccc(O)cc1",
    "NNC(=O)c1ccccc1O",
    "NNC(=O)c1cccc(O)c1",
    "NC(=O)c1ccc(N)cc1O",
    "COC(=O)c1ccc(N)nc1",
    "NC(=O)Nc1ccc(O)cc1",
    "NC(=O)Nc1ccccc1O",
    "Nc1ccc(cc1)C(=O)NO",
];

/// Client that "knows" the answer: every crossover request gets the next
/// exact isomer from the list, wrapped in the expected output format.
pub fn peeking_client() -> Arc<dyn ChatClient> {
    for s in C7H8N2O2_ISOMERS {
        let m = parse_smiles(s).unwrap();
        assert_eq!(molecular_formula(&m).to_string(), "C7H8N2O2", "{s}");
    }
    let next = AtomicUsize::new(0);
    Arc::new(FnClient(move |_: &[ChatMessage]| -> Result<String, LlmError> {
        let i = next.fetch_add(1, Ordering::SeqCst) % C7H8N2O2_ISOMERS.len();
        Ok(format!(
            "{{<<<Explanation>>>: matches the target formula, <<<Molecule>>>: \\box{{{}}}}}",
            C7H8N2O2_ISOMERS[i]
        ))
    }))
}

pub type LabeledGraph = petgraph::graph::UnGraph<(String, i8, u8, bool, Option<u16>), BondOrder>;

/// Labeled graph view used to check isomorphism with petgraph's VF2.
pub fn labeled_graph(mol: &Molecule) -> LabeledGraph {
    let mut g = LabeledGraph::default();
    let nodes: Vec<_> = (0..mol.num_atoms())
        .map(|i| {
            let a = mol.atom(i);
            g.add_node((a.element.to_string(), a.formal_charge, mol.hydrogens(i), a.aromatic, a.isotope))
        })
        .collect();
    for b in mol.bonds() {
        g.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    g
}

pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    petgraph::algo::is_isomorphic_matching(&labeled_graph(a), &labeled_graph(b), |x, y| x == y, |x, y| x == y)
}

pub fn corpus() -> Vec<String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus.smi");
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}
