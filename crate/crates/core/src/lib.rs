pub mod engine;
pub mod fingerprint;
pub mod genetic_ops;
pub mod llm_ops;
pub mod metrics;
pub mod molgraph;
pub mod oracle;
pub mod pareto;
pub mod selfies;
