//! Paired t-test and exact sign test over per-image scores.
//!
//! Reported spreads are population standard deviations (divisor `N`); the
//! t statistic uses the sample deviation, so `t = M * sqrt(N - 1) / SD`.

use std::fmt;

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mean_diff: f64,
    pub pop_sd: f64,
    pub t: f64,
    pub dof: usize,
    /// Two-sided.
    pub p: f64,
}

/// t statistic from a mean difference and population SD over `n` pairs.
pub fn t_from_summary(mean_diff: f64, pop_sd: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "t-test needs at least 2 pairs, got {n}"
        )));
    }
    if pop_sd.is_nan() || pop_sd <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(mean_diff * ((n - 1) as f64).sqrt() / pop_sd)
}

fn mean_and_pop_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Dimensions(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

pub fn t_test_from_differences(diffs: &[f64]) -> Result<TTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "t-test needs at least 2 pairs, got {n}"
        )));
    }
    let (mean_diff, pop_sd) = mean_and_pop_sd(diffs);
    let t = t_from_summary(mean_diff, pop_sd, n)?;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("dof >= 1");
    Ok(TTest {
        mean_diff,
        pop_sd,
        t,
        dof: n - 1,
        p: (2.0 * dist.sf(t.abs())).min(1.0),
    })
}

/// Paired t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    t_test_from_differences(&differences(a, b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignCounts {
    pub positives: usize,
    pub negatives: usize,
    pub ties: usize,
}

impl SignCounts {
    pub fn of(diffs: &[f64]) -> Self {
        let positives = diffs.iter().filter(|&&d| d > 0.0).count();
        let negatives = diffs.iter().filter(|&&d| d < 0.0).count();
        Self {
            positives,
            negatives,
            ties: diffs.len() - positives - negatives,
        }
    }
}

/// Two-sided exact binomial sign test; ties are dropped.
pub fn exact_sign_test(diffs: &[f64]) -> Result<f64> {
    let counts = SignCounts::of(diffs);
    sign_test_p(counts.positives, counts.negatives)
}

/// `2 * P[X >= max(pos, neg)]` for `X ~ Binomial(pos + neg, 1/2)`, capped at 1.
pub fn sign_test_p(positives: usize, negatives: usize) -> Result<f64> {
    let n = positives + negatives;
    if n == 0 {
        return Err(Error::Degenerate(
            "sign test needs a nonzero difference".into(),
        ));
    }
    let k_min = positives.max(negatives);
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (k_min..=n)
        .map(|k| (ln_binomial(n as u64, k as u64) - ln_half_n).exp())
        .sum();
    Ok((2.0 * tail).min(1.0))
}

/// Paired scores of two methods with the derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub scores_a: Vec<f64>,
    pub scores_b: Vec<f64>,
    pub differences: Vec<f64>,
    pub mean_diff: f64,
    pub pop_sd: f64,
    /// `None` when the differences have zero variance.
    pub t_test: Option<TTest>,
    pub signs: SignCounts,
    /// `None` when every difference is a tie.
    pub p_sign: Option<f64>,
}

impl PairedComparison {
    pub fn new(scores_a: &[f64], scores_b: &[f64]) -> Result<Self> {
        let diffs = differences(scores_a, scores_b)?;
        if diffs.len() < 2 {
            return Err(Error::Degenerate(format!(
                "comparison needs at least 2 pairs, got {}",
                diffs.len()
            )));
        }
        let (mean_diff, pop_sd) = mean_and_pop_sd(&diffs);
        let signs = SignCounts::of(&diffs);
        Ok(Self {
            scores_a: scores_a.to_vec(),
            scores_b: scores_b.to_vec(),
            t_test: t_test_from_differences(&diffs).ok(),
            p_sign: sign_test_p(signs.positives, signs.negatives).ok(),
            differences: diffs,
            mean_diff,
            pop_sd,
            signs,
        })
    }

    pub fn n(&self) -> usize {
        self.differences.len()
    }
}

/// `p<.0001` below the reporting floor, `p=0.0123` style otherwise.
pub fn format_p(p: f64) -> String {
    if p < 1e-4 {
        "p<.0001".to_string()
    } else {
        format!("p={p:.5}")
    }
}

/// `(M=0.02112, SD=0.00581; t(13)=13.1095, p<.0001; signs +14/-0/=0, sign p=0.00012)`
impl fmt::Display for PairedComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(M={:.5}, SD={:.5}; ", self.mean_diff, self.pop_sd)?;
        match &self.t_test {
            Some(t) => write!(f, "t({})={:.4}, {}", t.dof, t.t, format_p(t.p))?,
            None => write!(f, "t-test degenerate (zero variance)")?,
        }
        write!(
            f,
            "; signs +{}/-{}/={}, ",
            self.signs.positives, self.signs.negatives, self.signs.ties
        )?;
        match self.p_sign {
            Some(p) => write!(f, "sign {})", format_p(p)),
            None => write!(f, "sign test degenerate (all ties))"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_summaries_reproduce_t() {
        // (M, SD, t) for Pyramidal, Hann, Bartlett-Hann, Triangular, Average
        let rows = [
            (0.02079, 0.00575, 13.0294),
            (0.02112, 0.00581, 13.1095),
            (0.02026, 0.00542, 13.4807),
            (0.01691, 0.00379, 16.0797),
            (-0.00710, 0.00431, 5.9431),
        ];
        for (m, sd, t) in rows {
            let got = t_from_summary(m, sd, 14).unwrap();
            assert!((got.abs() - t).abs() <= 0.02, "M={m}: {got} vs {t}");
        }
    }

    #[test]
    fn t_test_degenerate_cases() {
        assert!(matches!(
            t_test_from_differences(&[0.1; 5]),
            Err(Error::Degenerate(_))
        ));
        assert!(t_test_from_differences(&[0.0; 5]).is_err());
        assert!(t_test_from_differences(&[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn t_test_matches_direct_formula() {
        let a = [0.91, 0.88, 0.95, 0.90, 0.87, 0.93];
        let b = [0.90, 0.86, 0.92, 0.91, 0.85, 0.90];
        let r = paired_t_test(&a, &b).unwrap();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sample_sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((r.t - mean / (sample_sd / n.sqrt())).abs() < 1e-12);
        assert_eq!(r.dof, 5);
        assert!(r.p > 0.0 && r.p < 1.0);
    }

    #[test]
    fn t_is_scale_invariant_and_signed() {
        let d = [0.3, -0.1, 0.5, 0.2, 0.05];
        let base = t_test_from_differences(&d).unwrap();
        let scaled: Vec<f64> = d.iter().map(|v| v * 17.5).collect();
        assert!((t_test_from_differences(&scaled).unwrap().t - base.t).abs() < 1e-9);
        let flipped: Vec<f64> = d.iter().map(|v| -v).collect();
        assert!(t_test_from_differences(&flipped).unwrap().t < 0.0);
    }

    #[test]
    fn sign_test_examples() {
        let all_positive = sign_test_p(14, 0).unwrap();
        assert!((all_positive - 2.0 * 2f64.powi(-14)).abs() < 1e-15);
        assert!((all_positive - 1.2207e-4).abs() < 1e-8);
        assert_eq!(sign_test_p(7, 7).unwrap(), 1.0);
        let thirteen = sign_test_p(13, 1).unwrap();
        assert!((thirteen - 2.0 * 15.0 * 2f64.powi(-14)).abs() < 1e-15);
        assert!((thirteen - 1.8311e-3).abs() < 1e-7);
        assert!(exact_sign_test(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn sign_test_drops_ties() {
        let p = exact_sign_test(&[0.1, 0.2, 0.0, 0.3, 0.0]).unwrap();
        assert_eq!(p, sign_test_p(3, 0).unwrap());
        assert_eq!(
            SignCounts::of(&[0.1, -0.2, 0.0]),
            SignCounts {
                positives: 1,
                negatives: 1,
                ties: 1
            }
        );
    }

    #[test]
    fn comparison_report_format() {
        let a: Vec<f64> = (0..14).map(|k| 0.9 + 0.001 * k as f64).collect();
        let b: Vec<f64> = (0..14)
            .map(|k| 0.88 + 0.0003 * (k * k % 5) as f64)
            .collect();
        let cmp = PairedComparison::new(&a, &b).unwrap();
        assert_eq!(cmp.signs.positives, 14);
        let text = cmp.to_string();
        assert!(text.starts_with("(M=0.0"), "{text}");
        assert!(text.contains("t(13)="), "{text}");
        assert!(text.contains("sign p=0.00012"), "{text}");

        let same = PairedComparison::new(&a, &a).unwrap();
        assert!(same.t_test.is_none());
        assert!(same.p_sign.is_none());
        assert!(same.to_string().contains("degenerate (zero variance)"));
    }
}
