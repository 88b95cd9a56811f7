use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineError, RunConfig, CONFIG, RECORD};
use crate::fingerprint::default_fingerprint;
use crate::metrics::{objective_diversity, structural_diversity, sum_of_aucs, topk_auc, topk_curve};
use crate::molgraph::parse_smiles;
use crate::oracle::CallRecord;
use crate::pareto::{frontier_indices, hypervolume, ObjectivePoint, MAX_HV_DIMENSION};

/// Metrics derived from a call record alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub calls: u64,
    pub scored: u64,
    pub failed: u64,
    pub best_fitness: Option<f64>,
    pub top1_auc: f64,
    pub top10_auc: f64,
    pub top100_auc: f64,
    /// Mean of the ten best fitnesses at the end of the run.
    pub top10_mean: f64,
    /// Sum over objectives of each objective's own top-10 AUC; only for
    /// runs with more than one objective. `top10_auc` is the AUC of the
    /// weighted sum.
    pub sum_of_top10_aucs: Option<f64>,
    /// Hypervolume of the frontier of every scored objective vector.
    pub hypervolume: Option<f64>,
    /// Mean pairwise Tanimoto distance among the 100 fittest molecules.
    pub structural_diversity: Option<f64>,
    /// Mean pairwise Euclidean distance among frontier objective vectors.
    pub objective_diversity: Option<f64>,
}

pub fn compute_metrics(records: &[CallRecord], budget: u64, objectives: usize) -> RunMetrics {
    let budget = (budget as usize).max(records.len()).max(1);
    let fitness: Vec<Option<f64>> = records.iter().map(|r| r.fitness).collect();
    let auc = |k: usize| topk_auc(&fitness, k.min(budget), budget).expect("k and budget checked");
    let top10_mean = topk_curve(&fitness, 10)
        .expect("k > 0")
        .last()
        .copied()
        .unwrap_or(0.0);

    let scored: Vec<&CallRecord> = records.iter().filter(|r| r.scores.is_some()).collect();
    let vectors: Vec<&[f64]> = scored
        .iter()
        .map(|r| r.scores.as_ref().expect("filtered").normalized.as_slice())
        .collect();

    let sum_of_top10_aucs = (objectives > 1).then(|| {
        let per: Vec<Vec<Option<f64>>> = (0..objectives)
            .map(|j| {
                records
                    .iter()
                    .map(|r| r.scores.as_ref().and_then(|s| s.normalized.get(j).copied()))
                    .collect()
            })
            .collect();
        sum_of_aucs(&per, 10.min(budget), budget).expect("k and budget checked")
    });

    let (hv, obj_div) = if vectors.is_empty() || objectives > MAX_HV_DIMENSION {
        (None, None)
    } else {
        let points: Vec<ObjectivePoint> = scored
            .iter()
            .zip(&vectors)
            .filter_map(|(r, v)| ObjectivePoint::new(v.to_vec(), r.smiles.clone()).ok())
            .collect();
        match frontier_indices(&points) {
            Ok(front) => {
                let fv: Vec<&[f64]> = front.iter().map(|&i| points[i].values.as_slice()).collect();
                (hypervolume(&fv).ok(), objective_diversity(&fv).ok())
            }
            Err(_) => (None, None),
        }
    };

    let mut ranked: Vec<&CallRecord> = scored.clone();
    ranked.sort_by(|a, b| {
        b.fitness
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&a.fitness.unwrap_or(f64::NEG_INFINITY))
            .then_with(|| a.smiles.cmp(&b.smiles))
    });
    let mut seen = HashSet::new();
    let fps: Vec<_> = ranked
        .iter()
        .filter(|r| seen.insert(r.smiles.as_str()))
        .take(100)
        .filter_map(|r| parse_smiles(&r.smiles).ok())
        .map(|m| default_fingerprint(&m))
        .collect();

    RunMetrics {
        calls: records.len() as u64,
        scored: scored.len() as u64,
        failed: (records.len() - scored.len()) as u64,
        best_fitness: ranked.first().and_then(|r| r.fitness),
        top1_auc: auc(1),
        top10_auc: auc(10),
        top100_auc: auc(100),
        top10_mean,
        sum_of_top10_aucs,
        hypervolume: hv,
        structural_diversity: structural_diversity(&fps).ok(),
        objective_diversity: obj_div,
    }
}

/// Long-format CSV with columns `metric,call,value`: the fitness and the
/// top-1/10/100 means after every call, then one row per run metric with
/// an empty call column.
pub fn render_report_csv(records: &[CallRecord], metrics: &RunMetrics) -> String {
    let fitness: Vec<Option<f64>> = records.iter().map(|r| r.fitness).collect();
    let curves: Vec<(&str, Vec<f64>)> = [("top1", 1), ("top10", 10), ("top100", 100)]
        .into_iter()
        .map(|(name, k)| (name, topk_curve(&fitness, k).expect("k > 0")))
        .collect();
    let mut out = String::from("metric,call,value\n");
    for (i, r) in records.iter().enumerate() {
        if let Some(f) = r.fitness {
            let _ = writeln!(out, "fitness,{},{f}", r.call);
        }
        for (name, curve) in &curves {
            let _ = writeln!(out, "{name},{},{}", r.call, curve[i]);
        }
    }
    let mut row = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            let _ = writeln!(out, "{name},,{v}");
        }
    };
    row("calls", Some(metrics.calls as f64));
    row("scored", Some(metrics.scored as f64));
    row("failed", Some(metrics.failed as f64));
    row("best_fitness", metrics.best_fitness);
    row("top1_auc", Some(metrics.top1_auc));
    row("top10_auc", Some(metrics.top10_auc));
    row("top100_auc", Some(metrics.top100_auc));
    row("top10_mean", Some(metrics.top10_mean));
    row("sum_of_top10_aucs", metrics.sum_of_top10_aucs);
    row("hypervolume", metrics.hypervolume);
    row("structural_diversity", metrics.structural_diversity);
    row("objective_diversity", metrics.objective_diversity);
    out
}

/// Parses a JSONL call record. Every line must be a complete record and
/// call indices must count up from 1.
pub fn read_records(path: &Path) -> Result<Vec<CallRecord>, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
    let corrupt = |line: usize, message: String| EngineError::Corrupt {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut records = Vec::new();
    let mut rest = text.as_str();
    let mut line_no = 0;
    while !rest.is_empty() {
        line_no += 1;
        let Some((line, tail)) = rest.split_once('\n') else {
            return Err(corrupt(line_no, "truncated line".into()));
        };
        rest = tail;
        let r: CallRecord = serde_json::from_str(line).map_err(|e| corrupt(line_no, e.to_string()))?;
        if r.call != line_no as u64 {
            return Err(corrupt(line_no, format!("expected call {line_no}, found {}", r.call)));
        }
        records.push(r);
    }
    Ok(records)
}

/// Recomputes metrics and the CSV report from a run directory.
pub fn report_run_dir(dir: &Path) -> Result<(RunMetrics, String), EngineError> {
    let config_path = dir.join(CONFIG);
    let text = std::fs::read_to_string(&config_path).map_err(|e| EngineError::io(&config_path, e))?;
    let config = RunConfig::from_toml_str(&text)?;
    let records = read_records(&dir.join(RECORD))?;
    let metrics = compute_metrics(&records, config.budget, config.task.objectives.len());
    let csv = render_report_csv(&records, &metrics);
    Ok((metrics, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ScoreVector;

    fn rec(call: u64, smiles: &str, f: Option<f64>) -> CallRecord {
        CallRecord {
            call,
            smiles: smiles.into(),
            generation: 0,
            scores: f.map(|v| ScoreVector {
                raw: vec![v],
                normalized: vec![v],
            }),
            fitness: f,
            error: f.is_none().then(|| "failed".into()),
        }
    }

    #[test]
    fn metrics_of_small_record() {
        let records = vec![rec(1, "C", Some(0.2)), rec(2, "CC", None), rec(3, "CCO", Some(0.6))];
        let m = compute_metrics(&records, 4, 1);
        assert_eq!((m.calls, m.scored, m.failed), (3, 2, 1));
        assert_eq!(m.best_fitness, Some(0.6));
        assert!((m.top1_auc - (0.2 + 0.2 + 0.6 + 0.6) / 4.0).abs() < 1e-12);
        assert_eq!(m.hypervolume, Some(0.6));
        assert_eq!(m.sum_of_top10_aucs, None);
        assert!(m.structural_diversity.unwrap() > 0.0);
        let csv = render_report_csv(&records, &m);
        assert!(csv.starts_with("metric,call,value\nfitness,1,0.2\ntop1,1,0.2\n"));
        assert!(csv.contains("\ntop1,2,0.2\n"));
        assert!(csv.contains("\nhypervolume,,0.6\n"));
    }

    #[test]
    fn truncated_record_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let good = serde_json::to_string(&rec(1, "C", Some(0.5))).unwrap();
        std::fs::write(&path, format!("{good}\n{}", &good[..10])).unwrap();
        match read_records(&path) {
            Err(EngineError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, format!("{good}\n{good}\n")).unwrap();
        assert!(matches!(read_records(&path), Err(EngineError::Corrupt { line: 2, .. })));
    }
}
