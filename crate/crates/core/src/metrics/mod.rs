//! Classification metrics and gradient-norm summaries.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{scores} scores for {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("metric undefined: labels contain a single class")]
    SingleClass,
    #[error("recall undefined: no positive labels")]
    NoPositives,
    #[error("empty input")]
    Empty,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("labels must be 0 or 1, found {0}")]
    Label(f64),
}

fn check(scores: &[f64], labels: &[f64]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::Length { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    if let Some(&l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(MetricsError::Label(l));
    }
    Ok(())
}

/// Mann–Whitney AUC: P(pos > neg) + P(tie)/2, from midranks.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Confusion counts with label 1 as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Predict positive when `score >= threshold`.
    pub fn from_scores(scores: &[f64], labels: &[f64], threshold: f64) -> Result<Self, MetricsError> {
        check(scores, labels)?;
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l == 1.0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }
}

/// Accuracy and recall at `threshold`.
pub fn accuracy_recall(scores: &[f64], labels: &[f64], threshold: f64) -> Result<(f64, f64), MetricsError> {
    let c = Confusion::from_scores(scores, labels, threshold)?;
    let acc = c.accuracy().ok_or(MetricsError::Empty)?;
    Ok((acc, c.recall().ok_or(MetricsError::NoPositives)?))
}

/// Median and quartiles of per-example gradient norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradNormStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data; `p = 0.5` is the midpoint median.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn grad_norm_stats(norms: &[f64]) -> Result<GradNormStats, MetricsError> {
    if norms.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = norms.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let mut v = norms.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(GradNormStats {
        n: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

impl fmt::Display for GradNormStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} min={:.4} q1={:.4} median={:.4} q3={:.4} max={:.4}",
            self.n, self.min, self.q1, self.median, self.q3, self.max
        )
    }
}

/// Test-set summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub auc: f64,
    pub recall: f64,
    pub threshold: f64,
    pub counts: Confusion,
    pub n: usize,
}

impl EvalReport {
    pub fn from_scores(scores: &[f64], labels: &[f64], threshold: f64) -> Result<Self, MetricsError> {
        let counts = Confusion::from_scores(scores, labels, threshold)?;
        Ok(Self {
            auc: auc(scores, labels)?,
            accuracy: counts.accuracy().ok_or(MetricsError::Empty)?,
            recall: counts.recall().ok_or(MetricsError::NoPositives)?,
            threshold,
            counts,
            n: scores.len(),
        })
    }

    pub fn table_header() -> String {
        format!("{:<16} {:>8} {:>8} {:>8} {:>8}", "model", "accuracy", "AUC", "recall", "n")
    }

    pub fn table_row(&self, label: &str) -> String {
        format!("{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8}", label, self.accuracy, self.auc, self.recall, self.n)
    }

    /// `key=value` pairs on one line.
    pub fn to_line(&self) -> String {
        format!(
            "accuracy={:.6} auc={:.6} recall={:.6} threshold={} tp={} fp={} tn={} fn={} n={}",
            self.accuracy,
            self.auc,
            self.recall,
            self.threshold,
            self.counts.tp,
            self.counts.fp,
            self.counts.tn,
            self.counts.fn_,
            self.n
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::table_header())?;
        writeln!(f, "{}", self.table_row("model"))?;
        write!(
            f,
            "confusion: tp={} fp={} tn={} fn={} (threshold {})",
            self.counts.tp, self.counts.fp, self.counts.tn, self.counts.fn_, self.threshold
        )
    }
}
