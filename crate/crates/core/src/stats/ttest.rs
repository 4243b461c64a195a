use statrs::function::beta::beta_reg;

use super::correlation::mean;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// H1: the means differ.
    Two,
    /// H1: mean(a) > mean(b).
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom.
pub fn welch_t_test(a: &[f64], b: &[f64], tail: Tail) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (sample_var(a) / na, sample_var(b) / nb);
    let se2 = qa + qb;
    if !(se2 > 0.0) {
        return Err(Error::Numerical("t-test groups have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    // P(|T| ≥ |t|) = I_{df/(df+t²)}(df/2, 1/2)
    let two_sided = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    let p = match tail {
        Tail::Two => two_sided,
        Tail::Greater if t >= 0.0 => 0.5 * two_sided,
        Tail::Greater => 1.0 - 0.5 * two_sided,
    };
    Ok(WelchTest { t, df, p })
}
