//! Classification metrics: confusion matrix (rows are predictions), per-class
//! precision/recall/F1, one-vs-rest ROC curves and AUC.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    /// `counts[predicted * classes + truth]`
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Rows indexed by predicted class, columns by true class.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::shape("confusion matrix must be square and non-empty"));
        }
        Ok(ConfusionMatrix {
            classes: c,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(classes: usize, predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
        }
        let mut m = Self::new(classes);
        for (&p, &t) in predicted.iter().zip(truth) {
            m.record(p, t)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, predicted: u8, truth: u8) -> Result<()> {
        let (p, t) = (predicted as usize, truth as usize);
        if p >= self.classes || t >= self.classes {
            return Err(Error::shape(format!("label pair ({p}, {t}) outside {} classes", self.classes)));
        }
        self.counts[p * self.classes + t] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted * self.classes + truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of samples predicted as `c`.
    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(c, t)).sum()
    }

    /// Number of samples whose true class is `c`.
    pub fn column_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(p, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        ratio(diag, self.total())
    }

    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.get(c, c), self.row_sum(c))
    }

    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.get(c, c), self.column_sum(c))
    }

    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

// 0/0 is reported as 0 so macro averages stay defined.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One-vs-rest ROC curve for `positive`, sweeping thresholds over the distinct
/// scores from high to low. `None` when either class is absent.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Option<Vec<RocPoint>> {
    let pos = positive.iter().filter(|p| **p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 || scores.len() != positive.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Some(curve)
}

/// Trapezoidal area under a curve ordered by increasing FPR.
pub fn auc(curve: &[RocPoint]) -> f64 {
    curve.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Mean over classes whose AUC is defined.
    pub macro_auc: Option<f64>,
    pub roc: Vec<Option<Vec<RocPoint>>>,
}

impl Metrics {
    /// `scores` holds per-sample class scores, row-major `n × classes`; pass
    /// `None` to skip ROC/AUC.
    pub fn compute(classes: usize, predicted: &[u8], truth: &[u8], scores: Option<&[f64]>) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let confusion = ConfusionMatrix::from_predictions(classes, predicted, truth)?;
        let roc: Vec<Option<Vec<RocPoint>>> = match scores {
            Some(s) => {
                if s.len() != truth.len() * classes {
                    return Err(Error::shape(format!("{} scores for {} samples × {classes}", s.len(), truth.len())));
                }
                (0..classes)
                    .map(|c| {
                        let col: Vec<f64> = s.chunks(classes).map(|r| r[c]).collect();
                        let pos: Vec<bool> = truth.iter().map(|&t| t as usize == c).collect();
                        roc_curve(&col, &pos)
                    })
                    .collect()
            }
            None => vec![None; classes],
        };
        Ok(Self::from_parts(confusion, roc))
    }

    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let c = confusion.classes();
        Self::from_parts(confusion, vec![None; c])
    }

    fn from_parts(confusion: ConfusionMatrix, roc: Vec<Option<Vec<RocPoint>>>) -> Self {
        let per_class: Vec<ClassMetrics> = (0..confusion.classes())
            .map(|c| ClassMetrics {
                class: c,
                precision: confusion.precision(c),
                recall: confusion.recall(c),
                f1: confusion.f1(c),
                auc: roc[c].as_deref().map(auc),
            })
            .collect();
        let k = per_class.len() as f64;
        let aucs: Vec<f64> = per_class.iter().filter_map(|m| m.auc).collect();
        Metrics {
            accuracy: confusion.accuracy(),
            macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
            macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
            macro_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
            per_class,
            confusion,
            roc,
        }
    }

    /// Per-class rows, then a macro row, then the confusion matrix.
    pub fn write_report<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let fmt_auc = |a: Option<f64>| a.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        writeln!(out, "class,precision,recall,f1,auc")?;
        for m in &self.per_class {
            writeln!(out, "{},{:.4},{:.4},{:.4},{}", m.class, m.precision, m.recall, m.f1, fmt_auc(m.auc))?;
        }
        writeln!(
            out,
            "macro,{:.4},{:.4},{:.4},{}",
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            fmt_auc(self.macro_auc)
        )?;
        writeln!(out, "accuracy,{:.4},,,", self.accuracy)?;
        writeln!(out)?;
        let c = self.confusion.classes();
        let header: Vec<String> = (0..c).map(|t| format!("truth_{t}")).collect();
        writeln!(out, "predicted,{}", header.join(","))?;
        for p in 0..c {
            let row: Vec<String> = (0..c).map(|t| self.confusion.get(p, t).to_string()).collect();
            writeln!(out, "{p},{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_roc<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        writeln!(out, "class,threshold,fpr,tpr")?;
        for (c, curve) in self.roc.iter().enumerate() {
            for p in curve.iter().flatten() {
                writeln!(out, "{c},{},{},{}", p.threshold, p.fpr, p.tpr)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
