use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall and F-score on the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub f: f64,
    pub recall: f64,
    pub precision: f64,
}

impl Prf {
    /// `F = 2PR / (P + R)`, zero when `P + R = 0`.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { f, recall, precision }
    }

    pub fn harmonic_mean_gap(&self) -> f64 {
        (Prf::from_pr(self.precision, self.recall).f - self.f).abs()
    }
}

/// Zero denominators give zero precision or recall.
pub fn f_score(predictions: &[usize], labels: &[usize], positive: usize) -> Result<Prf> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::MalformedLabels(format!("label {bad} is not binary")));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    Ok(Prf::from_pr(ratio(tp, fp), ratio(tp, fn_)))
}

/// Exact two-sided sign test on paired samples; ties are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

pub fn paired_sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let ties = a.len() - wins - losses;
    let n = wins + losses;
    let k = wins.min(losses);
    // P(X <= k) for X ~ Bin(n, 1/2), doubled and capped at 1
    let mut term = 0.5f64.powi(n as i32);
    let mut tail = 0.0;
    for i in 0..=k {
        tail += term;
        term *= (n - i) as f64 / (i + 1) as f64;
    }
    Ok(SignTest {
        wins,
        losses,
        ties,
        p_value: if n == 0 { 1.0 } else { (2.0 * tail).min(1.0) },
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
