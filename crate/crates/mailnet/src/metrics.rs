//! Per-actor metric vectors, cohort percentile-rank scores, and the
//! published Model-7 logit scorer for innovation administrators.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::InteractivityVector;
use crate::graph::ConnectivityVector;
use crate::ingest::{ActorDirectory, ActorId, Label};
use crate::report::fmt_sig;

/// Model 7 coefficients (administrator logit over percentile scores, with
/// raw rank as the control).
pub const MODEL7_INTERCEPT: f64 = -8.817;
pub const MODEL7_RANK: f64 = -0.729;
pub const MODEL7_EGO_NUDGES: f64 = 3.745;
pub const MODEL7_RECEIVED_MINUS_SENT: f64 = 3.683;
pub const MODEL7_DEGREE: f64 = 4.798;

/// Raw per-actor metrics.
#[derive(Debug, Clone, Serialize)]
pub struct MetricVector {
    pub actor: ActorId,
    pub degree: u32,
    pub betweenness: f64,
    pub sent: u64,
    pub received: u64,
    pub received_minus_sent: i64,
    pub ego_art_hours: Option<f64>,
    pub alter_art_hours: Option<f64>,
    pub ego_nudges: Option<f64>,
    pub alter_nudges: Option<f64>,
    pub rank: Option<u8>,
}

/// The same metrics as percentile-rank scores in [0, 1]; missing raw
/// values stay missing. Rank is carried raw on [`MetricVector`].
#[derive(Debug, Clone, Serialize)]
pub struct PercentileVector {
    pub actor: ActorId,
    pub degree: f64,
    pub betweenness: f64,
    pub sent: f64,
    pub received: f64,
    pub received_minus_sent: f64,
    pub ego_art_hours: Option<f64>,
    pub alter_art_hours: Option<f64>,
    pub ego_nudges: Option<f64>,
    pub alter_nudges: Option<f64>,
}

/// Population over which percentile ranks are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PercentileScope {
    /// Rank within the analysis cohort only (the default).
    Cohort,
    /// Rank over every graph node, cohort rows read off afterwards.
    Graph,
}

/// Midrank percentile scores: value -> (midrank - 0.5) / N over the
/// non-missing entries, ties sharing their average rank. Invariant under
/// any strictly increasing transform of the inputs, and the scores of a
/// complete column average exactly 0.5.
pub fn percentile_rank(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    if present.is_empty() {
        return Err(Error::AllMissing);
    }
    let n = present.len() as f64;
    let mut order: Vec<usize> = (0..present.len()).collect();
    order.sort_by(|&a, &b| {
        present[a]
            .1
            .partial_cmp(&present[b].1)
            .expect("metric values must not be NaN")
            .then(present[a].0.cmp(&present[b].0))
    });

    let mut out = vec![None; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && present[order[j + 1]].1 == present[order[i]].1 {
            j += 1;
        }
        // Ranks are 1-based; a tie run [i, j] shares the average rank.
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        let score = (midrank - 0.5) / n;
        for &k in &order[i..=j] {
            out[present[k].0] = Some(score);
        }
        i = j + 1;
    }
    Ok(out)
}

/// Join connectivity and interactivity into per-actor vectors for the
/// cohort, with percentile ranking performed across the chosen scope.
/// Every cohort member must be covered by the connectivity map.
pub fn assemble(
    connectivity: &BTreeMap<ActorId, ConnectivityVector>,
    interactivity: &BTreeMap<ActorId, InteractivityVector>,
    directory: &ActorDirectory,
    cohort: &BTreeSet<ActorId>,
    scope: PercentileScope,
) -> Result<Vec<(MetricVector, PercentileVector)>> {
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    for &actor in cohort {
        if !connectivity.contains_key(&actor) {
            return Err(Error::CohortNotCovered { actor: actor.0 });
        }
    }
    let population: Vec<ActorId> = match scope {
        PercentileScope::Cohort => cohort.iter().copied().collect(),
        PercentileScope::Graph => connectivity.keys().copied().collect(),
    };

    let raw = |actor: ActorId| -> MetricVector {
        let conn = &connectivity[&actor];
        let inter = interactivity.get(&actor);
        MetricVector {
            actor,
            degree: conn.degree,
            betweenness: conn.betweenness,
            sent: conn.sent,
            received: conn.received,
            received_minus_sent: conn.received_minus_sent,
            ego_art_hours: inter.and_then(|v| v.ego_art_hours),
            alter_art_hours: inter.and_then(|v| v.alter_art_hours),
            ego_nudges: inter.and_then(|v| v.ego_nudges),
            alter_nudges: inter.and_then(|v| v.alter_nudges),
            rank: directory.profile(actor).ok().and_then(|p| p.rank),
        }
    };

    let pop_raw: Vec<MetricVector> = population.iter().map(|&a| raw(a)).collect();
    let column = |f: &dyn Fn(&MetricVector) -> Option<f64>| -> Result<Vec<Option<f64>>> {
        percentile_rank(&pop_raw.iter().map(f).collect::<Vec<_>>())
    };
    let degree_pct = column(&|m| Some(m.degree as f64))?;
    let betweenness_pct = column(&|m| Some(m.betweenness))?;
    let sent_pct = column(&|m| Some(m.sent as f64))?;
    let received_pct = column(&|m| Some(m.received as f64))?;
    let balance_pct = column(&|m| Some(m.received_minus_sent as f64))?;
    // Interactivity columns can be entirely missing (for example a corpus
    // with no replies at all); that propagates as missing rather than
    // aborting the assembly.
    let optional_column = |f: &dyn Fn(&MetricVector) -> Option<f64>| -> Vec<Option<f64>> {
        percentile_rank(&pop_raw.iter().map(f).collect::<Vec<_>>())
            .unwrap_or_else(|_| vec![None; pop_raw.len()])
    };
    let ego_art_pct = optional_column(&|m| m.ego_art_hours);
    let alter_art_pct = optional_column(&|m| m.alter_art_hours);
    let ego_nudges_pct = optional_column(&|m| m.ego_nudges);
    let alter_nudges_pct = optional_column(&|m| m.alter_nudges);

    let index_of: BTreeMap<ActorId, usize> = population
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, i))
        .collect();

    Ok(cohort
        .iter()
        .map(|&actor| {
            let i = index_of[&actor];
            let pv = PercentileVector {
                actor,
                degree: degree_pct[i].unwrap(),
                betweenness: betweenness_pct[i].unwrap(),
                sent: sent_pct[i].unwrap(),
                received: received_pct[i].unwrap(),
                received_minus_sent: balance_pct[i].unwrap(),
                ego_art_hours: ego_art_pct[i],
                alter_art_hours: alter_art_pct[i],
                ego_nudges: ego_nudges_pct[i],
                alter_nudges: alter_nudges_pct[i],
            };
            (raw(actor), pv)
        })
        .collect())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Score an actor with the published administrator logit (Model 7):
/// logistic(-8.817 - 0.729 rank + 3.745 ego_nudges + 3.683 balance +
/// 4.798 degree), the communication terms as percentile scores and rank
/// raw in {1, 2, 3}. Deterministic, fixed evaluation order.
pub fn score_admin(pv: &PercentileVector, rank: u8) -> Result<f64> {
    if !(1..=3).contains(&rank) {
        return Err(Error::InvalidRank(rank as i64));
    }
    let ego_nudges = pv.ego_nudges.ok_or(Error::MissingField {
        actor: pv.actor.0,
        field: "ego_nudges",
    })?;
    let lp = MODEL7_INTERCEPT
        + MODEL7_RANK * rank as f64
        + MODEL7_EGO_NUDGES * ego_nudges
        + MODEL7_RECEIVED_MINUS_SENT * pv.received_minus_sent
        + MODEL7_DEGREE * pv.degree;
    Ok(logistic(lp))
}

/// One row of the ranked score list.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreRow {
    pub actor: ActorId,
    pub address: String,
    pub rank: Option<u8>,
    pub label: Label,
    pub model7_score: Option<f64>,
}

/// Score every cohort row, ranking scored actors by descending score
/// (ties by actor id); unscorable actors (missing rank or no closed
/// opened frames) sort to the end with an empty score.
pub fn score_all(
    rows: &[(MetricVector, PercentileVector)],
    directory: &ActorDirectory,
) -> Result<Vec<ScoreRow>> {
    let mut out = Vec::with_capacity(rows.len());
    for (mv, pv) in rows {
        let profile = directory.profile(mv.actor)?;
        let score = match mv.rank {
            Some(rank) => score_admin(pv, rank).ok(),
            None => None,
        };
        out.push(ScoreRow {
            actor: mv.actor,
            address: profile.address.clone(),
            rank: mv.rank,
            label: profile.label,
            model7_score: score,
        });
    }
    out.sort_by(|a, b| match (a.model7_score, b.model7_score) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then(a.actor.cmp(&b.actor)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.actor.cmp(&b.actor),
    });
    Ok(out)
}

/// Metric table: one row per actor, raw and percentile columns side by
/// side, plus the model7_score column.
pub fn write_metric_table<W: Write>(
    rows: &[(MetricVector, PercentileVector)],
    directory: &ActorDirectory,
    mut w: W,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Config(format!("metric table write failed: {e}"));
    writeln!(
        w,
        "actor_id,address,internal,rank,label,\
         degree,betweenness,sent,received,received_minus_sent,\
         ego_art_hours,alter_art_hours,ego_nudges,alter_nudges,\
         pct_degree,pct_betweenness,pct_sent,pct_received,pct_received_minus_sent,\
         pct_ego_art_hours,pct_alter_art_hours,pct_ego_nudges,pct_alter_nudges,\
         model7_score"
    )
    .map_err(io_err)?;
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for (mv, pv) in rows {
        let p = directory.profile(mv.actor)?;
        let score = mv.rank.and_then(|r| score_admin(pv, r).ok());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            mv.actor,
            p.address,
            p.internal,
            mv.rank.map(|r| r.to_string()).unwrap_or_default(),
            p.label,
            mv.degree,
            fmt_sig(mv.betweenness),
            mv.sent,
            mv.received,
            mv.received_minus_sent,
            opt(mv.ego_art_hours),
            opt(mv.alter_art_hours),
            opt(mv.ego_nudges),
            opt(mv.alter_nudges),
            fmt_sig(pv.degree),
            fmt_sig(pv.betweenness),
            fmt_sig(pv.sent),
            fmt_sig(pv.received),
            fmt_sig(pv.received_minus_sent),
            opt(pv.ego_art_hours),
            opt(pv.alter_art_hours),
            opt(pv.ego_nudges),
            opt(pv.alter_nudges),
            opt(score),
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(ego_nudges: Option<f64>, balance: f64, degree: f64) -> PercentileVector {
        PercentileVector {
            actor: ActorId(0),
            degree,
            betweenness: 0.5,
            sent: 0.5,
            received: 0.5,
            received_minus_sent: balance,
            ego_art_hours: Some(0.5),
            alter_art_hours: Some(0.5),
            ego_nudges,
            alter_nudges: Some(0.5),
        }
    }

    #[test]
    fn midrank_percentiles_hand_example() {
        // [10, 20, 20, 40]: midranks 1, 2.5, 2.5, 4.
        let out = percentile_rank(&[Some(10.0), Some(20.0), Some(20.0), Some(40.0)]).unwrap();
        let got: Vec<f64> = out.into_iter().map(|v| v.unwrap()).collect();
        assert_eq!(got, vec![0.125, 0.5, 0.5, 0.875]);
    }

    #[test]
    fn full_tie_gives_all_half() {
        let out = percentile_rank(&[Some(7.0); 5]).unwrap();
        assert!(out.iter().all(|v| *v == Some(0.5)));
    }

    #[test]
    fn missing_propagates_and_all_missing_errors() {
        let out = percentile_rank(&[Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(out[1], None);
        assert_eq!(out[0], Some(0.25));
        assert_eq!(out[2], Some(0.75));
        assert!(matches!(
            percentile_rank(&[None, None]),
            Err(Error::AllMissing)
        ));
    }

    #[test]
    fn rank_invariance_under_increasing_transform() {
        let vals = [3.0, -1.0, 7.5, 0.0, 3.0, 12.0];
        let base: Vec<Option<f64>> = vals.iter().map(|&v| Some(v)).collect();
        let cubed: Vec<Option<f64>> = vals.iter().map(|&v| Some(v * v * v)).collect();
        assert_eq!(
            percentile_rank(&base).unwrap(),
            percentile_rank(&cubed).unwrap()
        );
    }

    #[test]
    fn complete_column_mean_is_exactly_half() {
        let vals: Vec<Option<f64>> = (0..37).map(|i| Some(((i * 7) % 11) as f64)).collect();
        let out = percentile_rank(&vals).unwrap();
        let mean: f64 = out.iter().map(|v| v.unwrap()).sum::<f64>() / out.len() as f64;
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn model7_spec_points() {
        // All percentiles 0.5, rank 2: linear predictor -4.162.
        let p = score_admin(&pv(Some(0.5), 0.5, 0.5), 2).unwrap();
        assert!((p - 0.0153).abs() < 1e-4, "got {p}");
        // All percentiles 1.0, rank 1: linear predictor 2.680.
        let p = score_admin(&pv(Some(1.0), 1.0, 1.0), 1).unwrap();
        assert!((p - 0.936).abs() < 5e-4, "got {p}");
        // All percentiles 0.0, rank 3: linear predictor -11.004.
        let p = score_admin(&pv(Some(0.0), 0.0, 0.0), 3).unwrap();
        assert!((p - 1.7e-5).abs() < 1e-6, "got {p}");
    }

    #[test]
    fn model7_monotonicity() {
        let base = score_admin(&pv(Some(0.5), 0.5, 0.5), 2).unwrap();
        assert!(score_admin(&pv(Some(0.6), 0.5, 0.5), 2).unwrap() > base);
        assert!(score_admin(&pv(Some(0.5), 0.6, 0.5), 2).unwrap() > base);
        assert!(score_admin(&pv(Some(0.5), 0.5, 0.6), 2).unwrap() > base);
        assert!(score_admin(&pv(Some(0.5), 0.5, 0.5), 3).unwrap() < base);
        assert!(score_admin(&pv(Some(0.5), 0.5, 0.5), 1).unwrap() > base);
    }

    #[test]
    fn model7_refuses_missing_fields_by_name() {
        let err = score_admin(&pv(None, 0.5, 0.5), 2).unwrap_err();
        match err {
            Error::MissingField { field, .. } => assert_eq!(field, "ego_nudges"),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(matches!(
            score_admin(&pv(Some(0.5), 0.5, 0.5), 0),
            Err(Error::InvalidRank(0))
        ));
        assert!(matches!(
            score_admin(&pv(Some(0.5), 0.5, 0.5), 4),
            Err(Error::InvalidRank(4))
        ));
    }
}
