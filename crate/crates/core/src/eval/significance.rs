use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Differences had zero variance but a non-zero mean, so `t` is infinite
    /// and `p` is reported as 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on per-query values (paired by position).
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidValue(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidValue("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                p: 1.0,
                degenerate: false,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        p,
        degenerate: false,
    })
}

/// Holm step-down adjustment of `raw` p-values for a family of `m`
/// comparisons (`m >= raw.len()`), returned in input order.
pub fn holm_adjust(raw: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < raw.len() {
        return Err(Error::InvalidValue(format!(
            "family size {m} is smaller than the {} p-values given",
            raw.len()
        )));
    }
    if let Some(p) = raw.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidValue(format!("p-value {p} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; raw.len()];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * raw[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub test: TTest,
    pub adjusted_p: f64,
    pub reject: bool,
}

/// Paired t-tests for several system pairs followed by Holm correction over a
/// family of `m` comparisons.
pub fn paired_ttest_holm(pairs: &[(&[f64], &[f64])], alpha: f64, m: usize) -> Result<Vec<Comparison>> {
    let tests = pairs
        .iter()
        .map(|(a, b)| paired_ttest(a, b))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = tests.iter().map(|t| t.p).collect();
    let adjusted = holm_adjust(&raw, m)?;
    Ok(tests
        .into_iter()
        .zip(adjusted)
        .map(|(test, adjusted_p)| Comparison {
            test,
            adjusted_p,
            reject: adjusted_p < alpha,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holm_two_values() {
        let adj = holm_adjust(&[0.01, 0.04], 2).unwrap();
        assert!((adj[0] - 0.02).abs() < 1e-15);
        assert!((adj[1] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn holm_enforces_monotonicity() {
        // 3 * 0.01 = 0.03 exceeds 2 * 0.012 = 0.024, so the second is lifted
        let adj = holm_adjust(&[0.012, 0.01, 0.5], 3).unwrap();
        assert!((adj[1] - 0.03).abs() < 1e-15);
        assert!((adj[0] - 0.03).abs() < 1e-15);
        assert!((adj[2] - 0.5).abs() < 1e-15);
        assert!(holm_adjust(&[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn identical_samples() {
        let a = [0.1, 0.5, 0.3];
        let t = paired_ttest(&a, &a).unwrap();
        assert_eq!(t.p, 1.0);
        let cmp = paired_ttest_holm(&[(&a, &a)], 0.05, 1).unwrap();
        assert!(!cmp[0].reject);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let t = paired_ttest(&[1.0, 2.0], &[0.5, 1.5]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.p, 0.0);
    }

    #[test]
    fn known_t_value() {
        // diffs 1,2,3,4: mean 2.5, sd sqrt(5/3), t = 2.5 / sqrt(5/12)
        let t = paired_ttest(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert!((t.t - 2.5 / (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        // two-sided p for t=3.873 with 3 df
        assert!((t.p - 0.030_466).abs() < 1e-4, "{}", t.p);
    }

    #[test]
    fn length_checks() {
        assert!(paired_ttest(&[1.0], &[1.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
    }
}
