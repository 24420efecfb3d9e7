//! Sample summaries and Welch's unequal-variance t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Mean and sample standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { mean: f64::NAN, std: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Summary { mean, std, n }
}

/// Two-sided Welch's t-test p-value. Zero-variance pairs short-circuit: equal
/// constant samples are indistinguishable (p = 1), disjoint constant samples
/// are perfectly separated (p = 0).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Contract(format!(
            "welch test needs at least two samples per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let sa = summarize(a);
    let sb = summarize(b);
    let va = sa.std * sa.std / sa.n as f64;
    let vb = sb.std * sb.std / sb.n as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if sa.mean == sb.mean { 1.0 } else { 0.0 });
    }
    let t = (sa.mean - sb.mean) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (sa.n as f64 - 1.0) + vb * vb / (sb.n as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Contract(format!("invalid t distribution: {e}")))?;
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Whether sample `a`'s mean is strictly higher than `b`'s with a significant
/// two-sided Welch p-value, returning the p-value alongside.
pub fn significantly_greater(a: &[f64], b: &[f64], alpha: f64) -> Result<(bool, f64)> {
    let p = welch_t_test(a, b)?;
    let sa = summarize(a);
    let sb = summarize(b);
    Ok((sa.mean > sb.mean && p < alpha, p))
}
