//! Three-model comparison, operation-count tables and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::market::{MarketSample, SplitDataset};
use crate::metrics::{self, fmt_sig12, ClassificationMetrics, ConfusionCounts};
use crate::mlp::MlpParams;
use crate::train::{self, ModelStream, TrainConfig, TrainHistory};
use crate::vqc::{self, ParameterizedCircuit};

pub const MODEL_NAMES: [&str; 3] = ["ann", "qqbn", "qqtn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReproductionStatus {
    Matched,
    NotAttempted,
    NotReproducible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedValue {
    pub table: &'static str,
    pub model: &'static str,
    pub column: &'static str,
    pub value: &'static str,
    pub status: ReproductionStatus,
}

const fn published(
    table: &'static str,
    model: &'static str,
    column: &'static str,
    value: &'static str,
) -> PublishedValue {
    PublishedValue {
        table,
        model,
        column,
        value,
        status: ReproductionStatus::NotReproducible,
    }
}

/// Published operation-count and timing claims, verbatim.
pub fn published_cost_claims() -> Vec<PublishedValue> {
    vec![
        published("2", "ANN", "Training time (relative)", "100% (Baseline)"),
        published("2", "QQBN", "Training time (relative)", "3.2% of ANN"),
        published("2", "QQTN", "Training time (relative)", "60-65% of QQBN"),
        published("2", "ANN", "Computational steps reduction", "N/A"),
        published("2", "QQBN", "Computational steps reduction", "96.8% Faster than ANN"),
        published("2", "QQTN", "Computational steps reduction", "35-40% Faster than QQBN"),
        published("2", "ANN", "Computational steps", "1000"),
        published("2", "QQBN", "Computational steps", "32"),
    ]
}

/// Published accuracy figures, verbatim.
pub fn published_accuracy_claims() -> Vec<PublishedValue> {
    vec![
        published("2", "ANN", "Accuracy (%)", "69.2"),
        published("2", "QQBN", "Accuracy (%)", "71.6"),
        published("2", "QQTN", "Accuracy (%)", "73.5"),
        published("3", "Classical NN", "Accuracy (%)", "69.2"),
        published("3", "Classical NN", "Precision (%)", "67.5"),
        published("3", "Classical NN", "Recall (%)", "70.0"),
        published("3", "Classical NN", "F1 score (%)", "68.7"),
        published("3", "Quantum Qubit NN", "Accuracy (%)", "71.6"),
        published("3", "Quantum Qubit NN", "Precision (%)", "70.5"),
        published("3", "Quantum Qubit NN", "Recall (%)", "71.9"),
        published("3", "Quantum Qubit NN", "F1 score (%)", "71.2"),
        published("3", "Quantum Qutrit NN", "Accuracy (%)", "73.5"),
        published("3", "Quantum Qutrit NN", "Precision (%)", "73.0"),
        published("3", "Quantum Qutrit NN", "Recall (%)", "73.8"),
        published("3", "Quantum Qutrit NN", "F1 score (%)", "73.4"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostUnit {
    GateApplications,
    MultiplyAccumulates,
}

/// Training cost of one epoch under the artifact's cost model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRecord {
    pub model: String,
    pub unit: CostUnit,
    /// Gate applications per circuit evaluation, or MACs per sample.
    pub per_forward: u64,
    pub forwards_per_epoch: u64,
    pub per_epoch: u64,
}

impl CostRecord {
    pub fn classical(model: &str, params: &MlpParams, n_train: usize) -> Self {
        let per_forward = params.macs_per_sample();
        Self {
            model: model.into(),
            unit: CostUnit::MultiplyAccumulates,
            per_forward,
            forwards_per_epoch: n_train as u64,
            per_epoch: per_forward * n_train as u64,
        }
    }

    /// Forward-difference training: `1 + P` evaluations per sample.
    pub fn quantum(model: &str, circuit: &ParameterizedCircuit, n_train: usize) -> Self {
        let counts = circuit.count_operations();
        let forwards = counts.forward_passes_per_gradient * n_train as u64;
        Self {
            model: model.into(),
            unit: CostUnit::GateApplications,
            per_forward: counts.gate_applications_per_forward,
            forwards_per_epoch: forwards,
            per_epoch: counts.gate_applications_per_forward * forwards,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRatio {
    pub numerator: String,
    pub denominator: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCountTable {
    pub models: Vec<CostRecord>,
    /// Every ordered pair of distinct models.
    pub ratios: Vec<CostRatio>,
    pub published: Vec<PublishedValue>,
}

pub fn op_count_comparison(records: &[CostRecord]) -> Result<OpCountTable> {
    if records.len() < 2 {
        return Err(Error::domain("op-count comparison needs at least two models"));
    }
    let mut ratios = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for (j, b) in records.iter().enumerate() {
            if i != j {
                ratios.push(CostRatio {
                    numerator: a.model.clone(),
                    denominator: b.model.clone(),
                    ratio: if b.per_epoch == 0 {
                        0.0
                    } else {
                        a.per_epoch as f64 / b.per_epoch as f64
                    },
                });
            }
        }
    }
    Ok(OpCountTable {
        models: records.to_vec(),
        ratios,
        published: published_cost_claims(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    /// `None` when the long/flat strategy has zero variance.
    pub sharpe: Option<f64>,
    /// `None` when the scores or returns are constant.
    pub ic: Option<f64>,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistorySummary {
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub final_train_accuracy: Option<f64>,
    pub cumulative_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub model: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub metrics: Option<ModelMetrics>,
    pub op_counts: CostRecord,
    pub history: HistorySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDefinitions {
    pub sharpe: &'static str,
    pub ic: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub config_hash: String,
    pub data_fingerprint: String,
    pub n_train: usize,
    pub n_test: usize,
    pub models: Vec<ModelRow>,
    pub op_count_comparison: OpCountTable,
    pub published_metrics: Vec<PublishedValue>,
    pub metric_definitions: MetricDefinitions,
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn any_failed(&self) -> bool {
        self.models.iter().any(|m| m.failure.is_some())
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Ann(MlpParams),
    Circuit(ParameterizedCircuit),
}

impl TrainedModel {
    pub fn scores(&self, samples: &[MarketSample]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Ann(p) => train::mlp_scores(p, samples),
            TrainedModel::Circuit(c) => train::circuit_scores(c, samples),
        }
    }
}

/// One model's training outcome, kept for plot emission.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub name: String,
    pub history: TrainHistory,
    pub model: Option<TrainedModel>,
    /// Test-set class-1 probabilities; empty when training failed.
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub runs: Vec<ModelRun>,
}

/// SHA-256 over the canonical sample stream (features, label, date, return).
pub fn dataset_fingerprint(dataset: &SplitDataset) -> String {
    let mut h = Sha256::new();
    for (part, samples) in [(0u8, &dataset.train), (1u8, &dataset.test)] {
        h.update([part]);
        h.update((samples.len() as u64).to_le_bytes());
        for s in samples {
            for v in s.features.values() {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update([s.label]);
            if let Some(d) = s.date {
                h.update(d.to_string().as_bytes());
            }
            if let Some(r) = s.next_return {
                h.update(r.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

pub fn config_hash(config: &TrainConfig) -> Result<String> {
    let text = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn evaluate(scores: &[f64], test: &[MarketSample]) -> Result<ModelMetrics> {
    let predicted = train::threshold(scores);
    let actual: Vec<u8> = test.iter().map(|s| s.label).collect();
    let confusion = ConfusionCounts::from_labels(&predicted, &actual)?;
    let ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
    } = metrics::classification_metrics(&confusion)?;
    let returns: Option<Vec<f64>> = test.iter().map(|s| s.next_return).collect();
    let (sharpe, ic) = match returns {
        Some(r) => (
            metrics::sharpe_ratio(&predicted, &r).ok(),
            metrics::information_coefficient(scores, &r).ok(),
        ),
        None => (None, None),
    };
    Ok(ModelMetrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
        sharpe,
        ic,
        confusion,
    })
}

fn summarize(history: &TrainHistory) -> HistorySummary {
    HistorySummary {
        epochs: history.records.len(),
        final_loss: history.last().map(|r| r.loss),
        final_train_accuracy: history.last().map(|r| r.accuracy),
        cumulative_ops: history.last().map_or(0, |r| r.cumulative_ops),
    }
}

type Trained = Result<(TrainedModel, TrainHistory)>;

fn run_ann(dataset: &SplitDataset, config: &TrainConfig) -> Trained {
    let (p, h) = train::train_classical(dataset, config)?;
    Ok((TrainedModel::Ann(p), h))
}

fn run_circuit(
    circuit: ParameterizedCircuit,
    stream: ModelStream,
    dataset: &SplitDataset,
    config: &TrainConfig,
) -> Trained {
    let start = train::initialized_ansatz(circuit, config, stream);
    let (c, h) = train::train_quantum(start, dataset, config)?;
    Ok((TrainedModel::Circuit(c), h))
}

/// Trains the ANN, QBN and QQTN under one config and seed and evaluates all
/// three on the test split. A failing model yields a row with its failure
/// recorded; the others still report. The three trainings run through
/// `rayon::join`, so a multi-threaded pool overlaps them.
pub fn run_comparison(dataset: &SplitDataset, config: &TrainConfig) -> Result<Comparison> {
    config.validate()?;
    let n_train = dataset.train.len();
    let reference_ann = crate::mlp::MlpParams::zeros(
        &crate::mlp::REFERENCE_LAYER_SIZES,
        crate::mlp::OutputHead::Softmax,
    )?;
    let costs = vec![
        CostRecord::classical(MODEL_NAMES[0], &reference_ann, n_train),
        CostRecord::quantum(MODEL_NAMES[1], &vqc::build_qbn_ansatz(), n_train),
        CostRecord::quantum(MODEL_NAMES[2], &vqc::build_qqtn_ansatz(), n_train),
    ];

    let (ann, (qbn, qqtn)) = rayon::join(
        || run_ann(dataset, config),
        || {
            rayon::join(
                || run_circuit(vqc::build_qbn_ansatz(), ModelStream::Qbn, dataset, config),
                || run_circuit(vqc::build_qqtn_ansatz(), ModelStream::Qqtn, dataset, config),
            )
        },
    );

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for ((name, outcome), cost) in MODEL_NAMES.iter().zip([ann, qbn, qqtn]).zip(&costs) {
        let evaluated = outcome.and_then(|(model, history)| {
            let scores = model.scores(&dataset.test)?;
            let metrics = evaluate(&scores, &dataset.test)?;
            Ok((model, history, scores, metrics))
        });
        match evaluated {
            Ok((model, history, scores, metrics)) => {
                rows.push(ModelRow {
                    model: (*name).into(),
                    status: "ok",
                    failure: None,
                    metrics: Some(metrics),
                    op_counts: cost.clone(),
                    history: summarize(&history),
                });
                runs.push(ModelRun {
                    name: (*name).into(),
                    history,
                    model: Some(model),
                    test_scores: scores,
                });
            }
            Err(e) => {
                rows.push(ModelRow {
                    model: (*name).into(),
                    status: "failed",
                    failure: Some(e.to_string()),
                    metrics: None,
                    op_counts: cost.clone(),
                    history: summarize(&TrainHistory::default()),
                });
                runs.push(ModelRun {
                    name: (*name).into(),
                    history: TrainHistory::default(),
                    model: None,
                    test_scores: Vec::new(),
                });
            }
        }
    }

    let report = ComparisonReport {
        seed: config.seed,
        config: config.clone(),
        config_hash: config_hash(config)?,
        data_fingerprint: dataset_fingerprint(dataset),
        n_train,
        n_test: dataset.test.len(),
        models: rows,
        op_count_comparison: op_count_comparison(&costs)?,
        published_metrics: published_accuracy_claims(),
        metric_definitions: MetricDefinitions {
            sharpe: "definition supplied by artifact: long/flat next day on label 1, zero risk-free rate, n-1 std, annualized by sqrt(252)",
            ic: "definition supplied by artifact: Spearman rank correlation of p_up with next-day return, average ranks for ties",
        },
    };
    Ok(Comparison { report, runs })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `cost_curves.csv`, `predictions.csv` and one `residuals_<model>.csv`
/// per model. Models without scores leave empty cells and get no residual file.
pub fn emit_plot_data(
    histories: &[(&str, &TrainHistory)],
    predictions: &[(&str, &[f64])],
    actuals: &[u8],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut curves = String::from("epoch,model,loss\n");
    for (name, history) in histories {
        for r in &history.records {
            let _ = writeln!(curves, "{},{},{}", r.epoch, name, fmt_sig12(r.loss));
        }
    }
    let path = out_dir.join("cost_curves.csv");
    write_file(&path, &curves)?;
    written.push(path);

    for (name, scores) in predictions {
        if !scores.is_empty() && scores.len() != actuals.len() {
            return Err(Error::domain(format!(
                "{name} has {} predictions for {} actuals",
                scores.len(),
                actuals.len()
            )));
        }
    }
    let mut table = String::from("index,actual");
    for (name, _) in predictions {
        let _ = write!(table, ",{name}");
    }
    table.push('\n');
    for (i, &actual) in actuals.iter().enumerate() {
        let _ = write!(table, "{i},{actual}");
        for (_, scores) in predictions {
            table.push(',');
            if let Some(&p) = scores.get(i) {
                table.push_str(&fmt_sig12(p));
            }
        }
        table.push('\n');
    }
    let path = out_dir.join("predictions.csv");
    write_file(&path, &table)?;
    written.push(path);

    for (name, scores) in predictions {
        if scores.is_empty() {
            continue;
        }
        let mut res = String::from("index,actual,predicted,residual\n");
        for (i, (&actual, &p)) in actuals.iter().zip(scores.iter()).enumerate() {
            let residual = f64::from(actual) - p;
            let _ = writeln!(res, "{i},{actual},{},{}", fmt_sig12(p), fmt_sig12(residual));
        }
        let path = out_dir.join(format!("residuals_{name}.csv"));
        write_file(&path, &res)?;
        written.push(path);
    }
    Ok(written)
}

/// Emits the plot files for a finished comparison.
pub fn emit_comparison_plots(
    comparison: &Comparison,
    dataset: &SplitDataset,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let histories: Vec<(&str, &TrainHistory)> = comparison
        .runs
        .iter()
        .map(|r| (r.name.as_str(), &r.history))
        .collect();
    let predictions: Vec<(&str, &[f64])> = comparison
        .runs
        .iter()
        .map(|r| (r.name.as_str(), r.test_scores.as_slice()))
        .collect();
    let actuals: Vec<u8> = dataset.test.iter().map(|s| s.label).collect();
    emit_plot_data(&histories, &predictions, &actuals, out_dir)
}

/// Plain-text summary in the layout of the comparison tables.
pub fn summary_table(report: &ComparisonReport, with_published: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:>8} {:>9} {:>8} {:>8} {:>8} {:>8} {:>16}",
        "model", "accuracy", "precision", "recall", "f1", "sharpe", "ic", "ops/epoch"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    for row in &report.models {
        match &row.metrics {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "{:<6} {:>8.4} {:>9.4} {:>8.4} {:>8.4} {:>8} {:>8} {:>16}",
                    row.model,
                    m.accuracy,
                    m.precision,
                    m.recall,
                    m.f1,
                    opt(m.sharpe),
                    opt(m.ic),
                    row.op_counts.per_epoch
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "{:<6} failed: {}",
                    row.model,
                    row.failure.as_deref().unwrap_or("unknown")
                );
            }
        }
    }
    if with_published {
        let _ = writeln!(s, "\npublished reference values (not reproduced by this run):");
        for v in report
            .op_count_comparison
            .published
            .iter()
            .chain(&report.published_metrics)
        {
            let status = match v.status {
                ReproductionStatus::Matched => "matched",
                ReproductionStatus::NotAttempted => "not_attempted",
                ReproductionStatus::NotReproducible => "not_reproducible",
            };
            let _ = writeln!(
                s,
                "  table {} | {} | {} | {} [{}]",
                v.table, v.model, v.column, v.value, status
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(model: &str, per_epoch: u64) -> CostRecord {
        CostRecord {
            model: model.into(),
            unit: CostUnit::GateApplications,
            per_forward: per_epoch,
            forwards_per_epoch: 1,
            per_epoch,
        }
    }

    #[test]
    fn identical_models_ratio_one() {
        let t = op_count_comparison(&[record("a", 10), record("b", 10)]).unwrap();
        assert!(t.ratios.iter().all(|r| r.ratio == 1.0));
        assert_eq!(t.ratios.len(), 2);
        assert!(op_count_comparison(&[record("a", 1)]).is_err());
    }

    #[test]
    fn ansatz_costs() {
        let qbn = CostRecord::quantum("qqbn", &vqc::build_qbn_ansatz(), 10);
        let qqtn = CostRecord::quantum("qqtn", &vqc::build_qqtn_ansatz(), 10);
        assert_eq!((qbn.per_forward, qbn.forwards_per_epoch), (27, 190));
        assert_eq!((qqtn.per_forward, qqtn.forwards_per_epoch), (30, 230));
    }

    #[test]
    fn published_values_verbatim() {
        let claims = published_cost_claims();
        for v in ["1000", "3.2% of ANN", "60-65% of QQBN", "96.8% Faster than ANN"] {
            assert!(claims.iter().any(|c| c.value == v), "{v}");
        }
        assert!(claims
            .iter()
            .chain(&published_accuracy_claims())
            .all(|c| c.status == ReproductionStatus::NotReproducible));
    }

    #[test]
    fn plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = TrainHistory::default();
        emit_plot_data(&[("ann", &empty)], &[], &[], dir.path()).unwrap();
        let curves = fs::read_to_string(dir.path().join("cost_curves.csv")).unwrap();
        assert_eq!(curves, "epoch,model,loss\n");

        let scores = [0.25, 0.75];
        let written =
            emit_plot_data(&[], &[("qqbn", &scores), ("qqtn", &[])], &[0, 1], dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        let preds = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
        assert_eq!(preds, "index,actual,qqbn,qqtn\n0,0,0.25,\n1,1,0.75,\n");
        let res = fs::read_to_string(dir.path().join("residuals_qqbn.csv")).unwrap();
        assert_eq!(res, "index,actual,predicted,residual\n0,0,0.25,-0.25\n1,1,0.75,0.25\n");
    }
}
