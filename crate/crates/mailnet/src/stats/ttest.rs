//! Two-sample t-tests. Welch (unequal variances) is the default because the
//! group sizes this toolkit compares are wildly unbalanced; the pooled
//! variant sits behind an explicit option.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::special::t_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    Welch,
    Pooled,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

fn mean_and_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let ss: f64 = sample.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch two-sample t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    ttest(a, b, TTestVariant::Welch)
}

pub fn ttest(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Domain(format!(
            "t-test needs at least 2 observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (mean_a, var_a) = mean_and_var(a);
    let (mean_b, var_b) = mean_and_var(b);
    if var_a == 0.0 && var_b == 0.0 {
        return Err(Error::Domain(
            "both samples have zero variance; the t statistic is undefined".into(),
        ));
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let (t, df) = match variant {
        TTestVariant::Welch => {
            let sa = var_a / na;
            let sb = var_b / nb;
            let t = (mean_a - mean_b) / (sa + sb).sqrt();
            let df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            (t, df)
        }
        TTestVariant::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            let t = (mean_a - mean_b) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
            (t, df)
        }
    };
    let p = t_two_sided_p(t, df)?;
    Ok(TTestResult {
        t,
        df,
        p_two_sided: p,
        mean_a,
        mean_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::adaptive_simpson;
    use crate::stats::special::ln_gamma;

    /// Independent oracle: two-sided t-tail probability by quadrature of
    /// the t density (never touches the incomplete beta path).
    fn t_p_by_quadrature(t: f64, df: f64) -> f64 {
        let ln_norm = ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let density = |x: f64| (ln_norm - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp();
        let tail = adaptive_simpson(&density, t.abs(), t.abs() + 400.0, 1e-12, 40);
        2.0 * tail
    }

    #[test]
    fn identical_samples_give_t_zero() {
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn hand_computed_welch_example() {
        // means 2.5 vs 3.5, both variances 5/3: t = -1/sqrt(5/6), df = 6.
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.t - (-1.095_445_115_010_332)).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
        assert!((r.p_two_sided - 0.3153).abs() < 1e-4);
        // Cross-check the p-value against direct quadrature of the density.
        let oracle = t_p_by_quadrature(r.t, r.df);
        assert!((r.p_two_sided - oracle).abs() < 1e-9);
        assert!((r.mean_a - 2.5).abs() < 1e-12);
        assert!((r.mean_b - 3.5).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let a = [0.4, 1.9, -0.7, 2.2, 0.0];
        let b = [1.0, 1.1, 0.3, 2.8];
        let base = welch_ttest(&a, &b).unwrap();
        let shift = 17.25;
        let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let moved = welch_ttest(&a2, &b2).unwrap();
        assert!((base.t - moved.t).abs() < 1e-9);
        assert!((base.df - moved.df).abs() < 1e-9);
        assert!((base.p_two_sided - moved.p_two_sided).abs() < 1e-9);
    }

    #[test]
    fn sign_matches_mean_difference() {
        let r = welch_ttest(&[5.0, 6.0, 7.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.t > 0.0 && r.mean_a > r.mean_b);
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[5.0, 6.0, 7.0]).unwrap();
        assert!(r.t < 0.0 && r.mean_a < r.mean_b);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_ttest(&[2.0, 2.0, 2.0], &[3.0, 3.0]).is_err());
        // One zero-variance sample is still testable.
        assert!(welch_ttest(&[2.0, 2.0, 2.0], &[3.0, 4.0]).is_ok());
    }

    #[test]
    fn pooled_variant_reduces_df() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        let pooled = ttest(&a, &b, TTestVariant::Pooled).unwrap();
        // Equal sizes and equal variances: pooled t equals Welch t, df = 6.
        assert!((pooled.t - (-1.095_445_115_010_332)).abs() < 1e-12);
        assert!((pooled.df - 6.0).abs() < 1e-12);
    }
}
