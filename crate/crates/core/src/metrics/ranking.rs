//! Ranking metrics with anomalies as the positive class and higher scores
//! meaning "more anomalous".

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::Shape { expected: scores.len(), got: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::UndefinedMetric("needs at least one anomaly and one normal"));
    }
    Ok(pos)
}

/// One point per distinct score, in descending score order; tied scores
/// enter together.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    let pos = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(PrPoint { threshold: t, precision: tp as f64 / (tp + fp) as f64, recall: tp as f64 / pos as f64 });
    }
    Ok(out)
}

/// Average precision `Σ (R_i - R_{i-1}) P_i` over distinct thresholds.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in pr_curve(scores, labels)? {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    Ok(ap)
}

/// Fraction of anomalies: the AUPR of an uninformative scorer.
pub fn prevalence(labels: &[bool]) -> f64 {
    labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64
}

/// Ranks starting at 1; ties get their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve (Mann-Whitney statistic, ties count one half).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos = check(scores, labels)?;
    let neg = labels.len() - pos;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedMetric("rank correlation needs two points"));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedMetric("rank correlation of a constant sequence"));
    }
    Ok(sab / crate::math::sqrt(saa * sbb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeScore {
    pub subtype: String,
    pub aupr: f64,
    /// Anomaly prevalence of the evaluated subset.
    pub baseline: f64,
    pub auroc: f64,
    pub anomalies: usize,
    pub normals: usize,
}

/// Scores every anomaly subtype against all normal rows, plus an `"all"`
/// row pooling every anomaly. Anomalies without a subtype only enter `"all"`.
pub fn per_subtype_aupr(scores: &[f64], is_anomaly: &[bool], subtypes: &[Option<String>]) -> Result<Vec<SubtypeScore>> {
    if scores.len() != is_anomaly.len() || scores.len() != subtypes.len() {
        return Err(Error::Shape { expected: scores.len(), got: is_anomaly.len().min(subtypes.len()) });
    }
    let normals: Vec<usize> = (0..scores.len()).filter(|&i| !is_anomaly[i]).collect();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in (0..scores.len()).filter(|&i| is_anomaly[i]) {
        if let Some(s) = subtypes[i].as_deref() {
            groups.entry(s).or_default().push(i);
        }
    }
    let all: Vec<usize> = (0..scores.len()).filter(|&i| is_anomaly[i]).collect();
    let mut out = Vec::new();
    let mut score_group = |name: &str, anomalies: &[usize]| -> Result<()> {
        let idx: Vec<usize> = normals.iter().chain(anomalies).copied().collect();
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| is_anomaly[i]).collect();
        out.push(SubtypeScore {
            subtype: name.into(),
            aupr: aupr(&s, &l)?,
            baseline: prevalence(&l),
            auroc: auroc(&s, &l)?,
            anomalies: anomalies.len(),
            normals: normals.len(),
        });
        Ok(())
    };
    for (name, idx) in &groups {
        if *name != "all" {
            score_group(name, idx)?;
        }
    }
    score_group("all", &all)?;
    Ok(out)
}
