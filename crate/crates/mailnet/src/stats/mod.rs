//! Statistical engine: binary logit with fit diagnostics, two-sample
//! t-tests, one-way ANOVA and Tukey HSD post-hoc tests, built on the
//! special-function kernel in [`special`].

pub mod anova;
pub mod logit;
pub mod special;
pub mod ttest;

pub use anova::{oneway_anova, tukey_hsd, AnovaTable, GroupStat, TukeyPair};
pub use logit::{fit_logit, DesignMatrix, LogitFit};
pub use ttest::{ttest, welch_ttest, TTestResult, TTestVariant};

/// Significance stars in the convention of the ANOVA/Tukey reports:
/// `*` p < .1, `**` p < .05, `***` p < .01.
pub fn stars_tenth(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Significance stars in the convention of the logit coefficient reports:
/// `*` p < .05, `**` p < .01, `***` p < .001.
pub fn stars_millesimal(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
