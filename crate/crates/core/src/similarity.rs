//! Pearson-correlation analysis of how alike samples of the same intent are,
//! compared with samples of other intents.

use std::io::Write;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::seeded_rng;

/// Sample correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("pearson needs equal lengths, got {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} points", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean of a row's entries other than `own`.
pub fn cross_similarity(row: &[f64], own: usize) -> f64 {
    let others: Vec<f64> = row.iter().enumerate().filter(|(j, _)| *j != own).map(|(_, v)| *v).collect();
    others.iter().sum::<f64>() / others.len() as f64
}

/// `(self − cross) / self`, in percent.
pub fn percentage_difference(self_sim: f64, cross: f64) -> Result<f64> {
    if self_sim == 0.0 {
        return Err(Error::UndefinedCorrelation("self-similarity is zero".into()));
    }
    Ok((self_sim - cross) / self_sim * 100.0)
}

/// Mean pairwise correlations between intents; entry `(i, i)` is the
/// self-similarity of intent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub intents: Vec<u8>,
    rho: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(intents: Vec<u8>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = intents.len();
        if k < 2 || rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape(format!("similarity matrix must be square over {k} ≥ 2 intents")));
        }
        Ok(SimilarityMatrix {
            intents,
            rho: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.intents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intents.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rho[i * self.len()..(i + 1) * self.len()]
    }

    pub fn self_similarity(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn cross_similarity(&self, i: usize) -> f64 {
        cross_similarity(self.row(i), i)
    }

    pub fn percentage_difference(&self, i: usize) -> Result<f64> {
        percentage_difference(self.self_similarity(i), self.cross_similarity(i))
    }

    /// Matrix, then Self/Cross/PD columns, then Range/Average/STD summary rows
    /// (population standard deviation).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let k = self.len();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["class".to_string()];
        header.extend(self.intents.iter().map(u8::to_string));
        header.extend(["self", "cross", "pd_percent"].map(String::from));
        wr.write_record(&header).map_err(to_io)?;
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(k); k + 3];
        for i in 0..k {
            let mut values = self.row(i).to_vec();
            values.push(self.self_similarity(i));
            values.push(self.cross_similarity(i));
            values.push(self.percentage_difference(i).unwrap_or(f64::NAN));
            for (c, v) in columns.iter_mut().zip(&values) {
                c.push(*v);
            }
            let mut rec = vec![self.intents[i].to_string()];
            rec.extend(values.iter().map(|v| format!("{v:.4}")));
            wr.write_record(&rec).map_err(to_io)?;
        }
        let summaries: [(&str, fn(&[f64]) -> f64); 3] = [("range", range), ("average", mean), ("std", population_std)];
        for (name, stat) in summaries {
            let mut rec = vec![name.to_string()];
            rec.extend(columns.iter().map(|c| format!("{:.4}", stat(c))));
            wr.write_record(&rec).map_err(to_io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn to_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn range(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

pub fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

pub const DEFAULT_SAMPLES_PER_INTENT: usize = 50;

/// Builds the matrix from samples grouped by intent. Up to `per_intent` samples
/// are drawn from each group with a seeded shuffle; same-intent entries average
/// every unordered pair of distinct draws, cross entries every cross pair.
pub fn similarity_matrix(groups: &[(u8, Vec<&[f64]>)], per_intent: usize, seed: u64) -> Result<SimilarityMatrix> {
    if groups.len() < 2 {
        return Err(Error::Empty("intent groups (need at least 2)"));
    }
    let mut rng = seeded_rng(seed);
    let mut drawn: Vec<Vec<&[f64]>> = Vec::with_capacity(groups.len());
    for (label, samples) in groups {
        if samples.len() < 2 {
            return Err(Error::Data {
                row: 0,
                reason: format!("intent {label} has {} samples, need at least 2", samples.len()),
            });
        }
        let mut pick = samples.clone();
        pick.shuffle(&mut rng);
        pick.truncate(per_intent.max(2));
        drawn.push(pick);
    }
    let k = groups.len();
    let mut rows = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (mut sum, mut count) = (0.0, 0usize);
            if i == j {
                for a in 0..drawn[i].len() {
                    for b in a + 1..drawn[i].len() {
                        sum += pearson(drawn[i][a], drawn[i][b])?;
                        count += 1;
                    }
                }
            } else {
                for a in &drawn[i] {
                    for b in &drawn[j] {
                        sum += pearson(a, b)?;
                        count += 1;
                    }
                }
            }
            rows[i][j] = sum / count as f64;
            rows[j][i] = rows[i][j];
        }
    }
    SimilarityMatrix::from_rows(groups.iter().map(|(l, _)| *l).collect(), rows)
}
