//! Classification metrics and the one-hop label-average statistic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{GraphDataset, LabelEncoding};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

fn check_lengths(preds: &[usize], targets: &[usize]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::dims("metrics", format!("{} predictions", targets.len()), preds.len()));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], targets: &[usize]) -> Result<f64> {
    check_lengths(preds, targets)?;
    if preds.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn from_predictions(preds: &[usize], targets: &[usize], positive_class: usize) -> Result<Self> {
        check_lengths(preds, targets)?;
        let mut c = Self::default();
        for (&p, &t) in preds.iter().zip(targets) {
            match (p == positive_class, t == positive_class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; undefined if either is, or if both are 0.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Precision, recall and F1; `None` marks an undefined value (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn precision_recall_f1(preds: &[usize], targets: &[usize], positive_class: usize) -> Result<Prf> {
    Ok(ConfusionCounts::from_predictions(preds, targets, positive_class)?.prf())
}

/// Mean and standard deviation over the defined entries, with the number of
/// skipped (undefined) entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub skipped: usize,
}

/// Population standard deviation is used, matching how repeated-trial spreads
/// are usually reported.
pub fn summarize(values: impl IntoIterator<Item = Option<f64>>) -> Option<Summary> {
    let mut defined = Vec::new();
    let mut skipped = 0;
    for v in values {
        match v {
            Some(x) => defined.push(x),
            None => skipped += 1,
        }
    }
    if defined.is_empty() {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some(Summary {
        mean,
        std: var.sqrt(),
        n: defined.len(),
        skipped,
    })
}

/// Mean scalar-mapped label over each node's neighbours in the raw adjacency
/// (no self-loop). Unknown labels count as 0; isolated nodes get 0.
pub fn neighbor_label_average(ds: &GraphDataset, a: &SparseMatrix) -> Result<Vec<f64>> {
    let LabelEncoding::ScalarMap(values) = &ds.label_encoding else {
        return Err(Error::InvalidArgument(
            "one-hop label average needs a scalar label mapping".into(),
        ));
    };
    if a.n_rows() != ds.n() {
        return Err(Error::dims("neighbor_label_average", ds.n(), a.n_rows()));
    }
    let mapped: Vec<f64> = ds.labels.iter().map(|l| l.map_or(0.0, |c| values[c])).collect();
    Ok((0..ds.n())
        .map(|i| {
            let (cols, _) = a.row(i);
            let neighbors: Vec<usize> = cols.iter().copied().filter(|&j| j != i).collect();
            if neighbors.is_empty() {
                0.0
            } else {
                neighbors.iter().map(|&j| mapped[j]).sum::<f64>() / neighbors.len() as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub center: f64,
    /// Count per class, indexed by class id.
    pub counts: Vec<usize>,
}

/// Equal-width histogram of `values` over `[lo, hi]`, split by the class of
/// each labeled node. Unlabeled nodes are ignored.
pub fn class_histogram(
    values: &[f64],
    labels: &[Option<usize>],
    n_classes: usize,
    bins: usize,
    (lo, hi): (f64, f64),
) -> Result<Vec<HistogramBin>> {
    if bins == 0 || hi <= lo {
        return Err(Error::InvalidArgument("histogram needs bins > 0 and hi > lo".into()));
    }
    if values.len() != labels.len() {
        return Err(Error::dims("class_histogram", labels.len(), values.len()));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            center: lo + (b as f64 + 0.5) * width,
            counts: vec![0; n_classes],
        })
        .collect();
    for (&v, label) in values.iter().zip(labels) {
        let Some(c) = *label else { continue };
        if !(lo..=hi).contains(&v) {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].counts[c] += 1;
    }
    Ok(out)
}

/// Writes `bin_center,count_<class>...` rows.
pub fn write_histogram_csv(out: &mut impl Write, bins: &[HistogramBin], class_names: &[String]) -> std::io::Result<()> {
    write!(out, "bin_center")?;
    for name in class_names {
        write!(out, ",count_{name}")?;
    }
    writeln!(out)?;
    for b in bins {
        write!(out, "{}", b.center)?;
        for c in &b.counts {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
