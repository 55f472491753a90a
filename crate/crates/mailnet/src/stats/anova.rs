//! One-way ANOVA and Tukey HSD post-hoc comparisons (Tukey-Kramer form
//! for unequal group sizes).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::special::{f_cdf, studentized_range_cdf};

#[derive(Debug, Clone, Serialize)]
pub struct GroupStat {
    pub name: String,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnovaTable {
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_between: f64,
    pub ms_within: f64,
    pub f: f64,
    pub p: f64,
    pub groups: Vec<GroupStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TukeyPair {
    pub group_a: String,
    pub group_b: String,
    /// mean(a) - mean(b), signed.
    pub mean_diff: f64,
    pub q_stat: f64,
    pub p_adjusted: f64,
}

/// Standard one-way decomposition. Zero within-variance with unequal means
/// yields the `f = +inf`, `p = 0` sentinel; fully identical data yields
/// `f = 0`, `p = 1`.
pub fn oneway_anova(groups: &[(String, Vec<f64>)]) -> Result<AnovaTable> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::Domain(format!(
            "ANOVA needs at least 2 groups, got {k}"
        )));
    }
    for (name, sample) in groups {
        if sample.is_empty() {
            return Err(Error::Domain(format!("group {name} is empty")));
        }
    }
    let n_total: usize = groups.iter().map(|(_, s)| s.len()).sum();
    if n_total <= k {
        return Err(Error::Domain(format!(
            "ANOVA needs more observations ({n_total}) than groups ({k})"
        )));
    }

    let grand_mean =
        groups.iter().flat_map(|(_, s)| s.iter()).sum::<f64>() / n_total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    let mut stats = Vec::with_capacity(k);
    for (name, sample) in groups {
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        ss_between += n * (mean - grand_mean) * (mean - grand_mean);
        ss_within += sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        stats.push(GroupStat {
            name: name.clone(),
            n: sample.len(),
            mean,
        });
    }

    let df_between = k - 1;
    let df_within = n_total - k;
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p) = if ms_within == 0.0 {
        if ss_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        let p = 1.0 - f_cdf(f, df_between as f64, df_within as f64)?;
        (f, p)
    };

    Ok(AnovaTable {
        ss_between,
        ss_within,
        ss_total: ss_between + ss_within,
        df_between,
        df_within,
        ms_between,
        ms_within,
        f,
        p,
        groups: stats,
    })
}

/// All-pairs Tukey HSD on top of the one-way decomposition, using the
/// Tukey-Kramer standard error so unequal group sizes are handled.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)]) -> Result<Vec<TukeyPair>> {
    let table = oneway_anova(groups)?;
    tukey_from_anova(&table)
}

/// Tukey pairs from an already-computed ANOVA table.
pub fn tukey_from_anova(table: &AnovaTable) -> Result<Vec<TukeyPair>> {
    let k = table.groups.len();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let a = &table.groups[i];
            let b = &table.groups[j];
            let diff = a.mean - b.mean;
            let (q, p) = if table.ms_within == 0.0 {
                if diff == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let se = (table.ms_within / 2.0
                    * (1.0 / a.n as f64 + 1.0 / b.n as f64))
                    .sqrt();
                let q = diff.abs() / se;
                let p = 1.0 - studentized_range_cdf(q, k, table.df_within as f64)?;
                (q, p)
            };
            pairs.push(TukeyPair {
                group_a: a.name.clone(),
                group_b: b.name.clone(),
                mean_diff: diff,
                q_stat: q,
                p_adjusted: p.clamp(0.0, 1.0),
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn named(samples: &[&[f64]]) -> Vec<(String, Vec<f64>)> {
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("g{}", i + 1), s.to_vec()))
            .collect()
    }

    #[test]
    fn hand_computed_decomposition() {
        // {1,2,3}, {2,3,4}, {3,4,5}: SSB = 6, SSW = 6, df (2,6), F = 3,
        // p = I_0.5(3,1) = 0.125 exactly.
        let t = oneway_anova(&named(&[
            &[1.0, 2.0, 3.0],
            &[2.0, 3.0, 4.0],
            &[3.0, 4.0, 5.0],
        ]))
        .unwrap();
        assert!((t.ss_between - 6.0).abs() < 1e-12);
        assert!((t.ss_within - 6.0).abs() < 1e-12);
        assert_eq!((t.df_between, t.df_within), (2, 6));
        assert!((t.f - 3.0).abs() < 1e-12);
        assert!((t.p - 0.125).abs() < 1e-10);
    }

    #[test]
    fn identical_groups_give_f_zero() {
        let t = oneway_anova(&named(&[&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]])).unwrap();
        assert_eq!(t.f, 0.0);
        assert_eq!(t.p, 1.0);
    }

    #[test]
    fn zero_within_variance_with_unequal_means() {
        let t = oneway_anova(&named(&[&[1.0, 1.0], &[2.0, 2.0]])).unwrap();
        assert!(t.f.is_infinite());
        assert_eq!(t.p, 0.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let groups = vec![("a".to_string(), vec![1.0]), ("b".to_string(), vec![])];
        assert!(oneway_anova(&groups).is_err());
    }

    #[test]
    fn sum_of_squares_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let k = rng.random_range(2..5usize);
            let groups: Vec<(String, Vec<f64>)> = (0..k)
                .map(|g| {
                    let n = rng.random_range(2..9usize);
                    let offset: f64 = rng.random_range(-3.0..3.0);
                    let sample = (0..n)
                        .map(|_| offset + rng.random_range(-1.0..1.0))
                        .collect();
                    (format!("g{g}"), sample)
                })
                .collect();
            let t = oneway_anova(&groups).unwrap();
            let direct_total: f64 = {
                let all: Vec<f64> = groups.iter().flat_map(|(_, s)| s.clone()).collect();
                let m = all.iter().sum::<f64>() / all.len() as f64;
                all.iter().map(|x| (x - m) * (x - m)).sum()
            };
            assert!(
                (t.ss_between + t.ss_within - direct_total).abs()
                    <= 1e-9 * direct_total.max(1.0),
                "decomposition broke"
            );
            assert!((0.0..=1.0).contains(&t.p));
        }
    }

    #[test]
    fn tukey_identical_pair_has_p_one() {
        let pairs = tukey_hsd(&named(&[
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 3.0],
            &[4.0, 5.0, 6.0],
        ]))
        .unwrap();
        let same = pairs
            .iter()
            .find(|p| p.group_a == "g1" && p.group_b == "g2")
            .unwrap();
        assert!(same.p_adjusted >= 0.999, "p = {}", same.p_adjusted);
        assert_eq!(same.q_stat, 0.0);
    }

    #[test]
    fn tukey_p_ordering_follows_mean_gaps_for_equal_sizes() {
        let pairs = tukey_hsd(&named(&[
            &[1.0, 2.0, 3.0],
            &[2.0, 3.0, 4.0],
            &[3.0, 4.0, 5.0],
        ]))
        .unwrap();
        let get = |a: &str, b: &str| {
            pairs
                .iter()
                .find(|p| p.group_a == a && p.group_b == b)
                .unwrap()
        };
        let p12 = get("g1", "g2");
        let p13 = get("g1", "g3");
        let p23 = get("g2", "g3");
        // Widest gap gets the smallest p.
        assert!(p13.p_adjusted < p12.p_adjusted);
        assert!(p13.p_adjusted < p23.p_adjusted);
        // Equal gaps, equal sizes: identical p.
        assert!((p12.p_adjusted - p23.p_adjusted).abs() < 1e-9);
        assert!((p12.mean_diff - -1.0).abs() < 1e-12);
    }

    #[test]
    fn tukey_kramer_handles_unequal_sizes() {
        let pairs = tukey_hsd(&named(&[
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            &[4.0, 5.0, 6.0],
            &[9.0, 10.0],
        ]))
        .unwrap();
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            assert!(p.q_stat >= 0.0);
            assert!((0.0..=1.0).contains(&p.p_adjusted));
        }
    }
}
