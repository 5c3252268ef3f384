//! Classification and trading metrics for the test split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_labels(predicted: &[u8], actual: &[u8]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::domain("prediction and label counts differ"));
        }
        let mut c = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                (0, 0) => c.tn += 1,
                _ => return Err(Error::domain(format!("non-binary label pair ({p}, {a})"))),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Precision was reported as 0 because nothing was predicted positive.
    pub precision_degenerate: bool,
    /// Recall was reported as 0 because there were no positives.
    pub recall_degenerate: bool,
}

pub fn classification_metrics(c: &ConfusionCounts) -> Result<ClassificationMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::domain("no evaluated samples"));
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_degenerate) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_degenerate) = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Annualized ex-post Sharpe ratio of a long/flat strategy: hold the next day
/// when the prediction is 1, stay flat otherwise. Zero risk-free rate,
/// sample standard deviation.
pub fn sharpe_ratio(predictions: &[u8], realized_returns: &[f64]) -> Result<f64> {
    if predictions.len() != realized_returns.len() || predictions.len() < 2 {
        return Err(Error::domain(
            "sharpe ratio needs equal-length inputs of at least 2",
        ));
    }
    let strategy: Vec<f64> = predictions
        .iter()
        .zip(realized_returns)
        .map(|(&p, &r)| f64::from(p) * r)
        .collect();
    strategy_sharpe(&strategy)
}

pub fn strategy_sharpe(strategy: &[f64]) -> Result<f64> {
    if strategy.len() < 2 || strategy.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain("sharpe ratio needs at least 2 finite returns"));
    }
    let mu = mean(strategy);
    let var = strategy.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (strategy.len() - 1) as f64;
    let sd = var.sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::Degenerate("strategy returns have zero variance".into()));
    }
    Ok(mu / sd * TRADING_DAYS_PER_YEAR.sqrt())
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation between scores and realized returns.
pub fn information_coefficient(scores: &[f64], realized_returns: &[f64]) -> Result<f64> {
    if scores.len() != realized_returns.len() || scores.len() < 3 {
        return Err(Error::domain(
            "information coefficient needs equal-length inputs of at least 3",
        ));
    }
    if scores.iter().chain(realized_returns).any(|v| v.is_nan()) {
        return Err(Error::domain("NaN in information coefficient input"));
    }
    pearson(&average_ranks(scores), &average_ranks(realized_returns))
}

/// Formats with 12 significant digits; plain notation for ordinary
/// magnitudes, trailing zeros trimmed.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-6..=14).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}
