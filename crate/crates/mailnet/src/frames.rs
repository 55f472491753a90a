//! Dyadic conversation frames: the operational basis of response times
//! and nudges.
//!
//! Frame rule, per ordered dyad (A, B) in time order: a frame opens at the
//! first A->B event with no open A->B frame; further A->B events while it
//! is open count as pings; the next B->A event closes it (each reverse
//! event closes at most one frame, and simultaneously opens or feeds the
//! B->A direction by the same rule). A frame whose would-be close lands
//! more than the horizon after its open, or that is still open at window
//! end, is censored.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::io::Write;

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{ActorDirectory, ActorId, MessageEvent};

/// One dyadic conversation turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub opener: ActorId,
    pub responder: ActorId,
    pub open_time: DateTime<Utc>,
    /// Opener->responder messages strictly inside (open, close).
    pub ping_count: u32,
    /// None means censored: never closed within window and horizon.
    pub close_time: Option<DateTime<Utc>>,
}

impl Frame {
    pub fn is_closed(&self) -> bool {
        self.close_time.is_some()
    }

    /// Hours from open to close; present iff the frame closed.
    pub fn response_hours(&self) -> Option<f64> {
        self.close_time
            .map(|c| (c - self.open_time).num_seconds() as f64 / 3600.0)
    }
}

struct OpenFrame {
    open_time: DateTime<Utc>,
    ping_count: u32,
}

/// Replay the frame rule over a canonically ordered event stream.
///
/// The result is sorted by (opener, responder, open_time) so it is
/// independent of how dyads were interleaved in the input.
pub fn build_frames(events: &[MessageEvent], horizon_days: f64) -> Vec<Frame> {
    assert!(horizon_days > 0.0, "horizon must be positive");
    let horizon = Duration::seconds((horizon_days * 86_400.0).round() as i64);
    let mut open: HashMap<(ActorId, ActorId), OpenFrame> = HashMap::new();
    let mut frames: Vec<Frame> = Vec::new();

    for e in events {
        let t = e.timestamp;
        let forward = (e.sender, e.recipient);
        let reverse = (e.recipient, e.sender);

        // A reverse-direction event answers the open frame aimed at the
        // sender, unless the reply would land beyond the horizon, which
        // censors the frame instead.
        if let Some(f) = open.remove(&reverse) {
            let close = if t - f.open_time <= horizon {
                Some(t)
            } else {
                None
            };
            frames.push(Frame {
                opener: e.recipient,
                responder: e.sender,
                open_time: f.open_time,
                ping_count: f.ping_count,
                close_time: close,
            });
        }

        match open.get_mut(&forward) {
            Some(f) if t - f.open_time <= horizon => {
                f.ping_count += 1;
            }
            Some(_) => {
                // The standing frame aged out: censor it and open afresh.
                let f = open.remove(&forward).unwrap();
                frames.push(Frame {
                    opener: e.sender,
                    responder: e.recipient,
                    open_time: f.open_time,
                    ping_count: f.ping_count,
                    close_time: None,
                });
                open.insert(
                    forward,
                    OpenFrame {
                        open_time: t,
                        ping_count: 0,
                    },
                );
            }
            None => {
                open.insert(
                    forward,
                    OpenFrame {
                        open_time: t,
                        ping_count: 0,
                    },
                );
            }
        }
    }

    // Window end: whatever is still open is censored.
    for ((opener, responder), f) in open {
        frames.push(Frame {
            opener,
            responder,
            open_time: f.open_time,
            ping_count: f.ping_count,
            close_time: None,
        });
    }

    frames.sort_by_key(|f| (f.opener, f.responder, f.open_time));
    frames
}

/// Per-actor response-time and nudge averages over closed frames.
///
/// Orientation: ego ART measures how fast the actor answers (frames where
/// the actor is the responder); alter ART measures how fast others answer
/// the actor (frames the actor opened). Nudges follow the opener: ego
/// nudges average the actor's own follow-ups on frames it opened.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InteractivityVector {
    pub ego_art_hours: Option<f64>,
    pub alter_art_hours: Option<f64>,
    pub ego_nudges: Option<f64>,
    pub alter_nudges: Option<f64>,
    /// Censored frames the actor opened.
    pub open_frames_out: u32,
    /// Censored frames aimed at the actor.
    pub open_frames_in: u32,
}

impl InteractivityVector {
    /// Reverse the ego/alter orientation (the flag-reversible reading of
    /// the metric definitions).
    pub fn swapped(self) -> Self {
        InteractivityVector {
            ego_art_hours: self.alter_art_hours,
            alter_art_hours: self.ego_art_hours,
            ego_nudges: self.alter_nudges,
            alter_nudges: self.ego_nudges,
            open_frames_out: self.open_frames_out,
            open_frames_in: self.open_frames_in,
        }
    }
}

#[derive(Default)]
struct Accumulator {
    opened_hours: f64,
    opened_closed: u32,
    opened_pings: f64,
    responded_hours: f64,
    responded_closed: u32,
    responded_pings: f64,
    censored_out: u32,
    censored_in: u32,
}

/// Interactivity for every actor appearing in the frame list.
pub fn interactivity_all(frames: &[Frame]) -> BTreeMap<ActorId, InteractivityVector> {
    let mut acc: BTreeMap<ActorId, Accumulator> = BTreeMap::new();
    for f in frames {
        match f.response_hours() {
            Some(hours) => {
                let a = acc.entry(f.opener).or_default();
                a.opened_hours += hours;
                a.opened_pings += f.ping_count as f64;
                a.opened_closed += 1;
                let b = acc.entry(f.responder).or_default();
                b.responded_hours += hours;
                b.responded_pings += f.ping_count as f64;
                b.responded_closed += 1;
            }
            None => {
                acc.entry(f.opener).or_default().censored_out += 1;
                acc.entry(f.responder).or_default().censored_in += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(actor, a)| {
            let opened = a.opened_closed as f64;
            let responded = a.responded_closed as f64;
            let v = InteractivityVector {
                ego_art_hours: (a.responded_closed > 0).then(|| a.responded_hours / responded),
                alter_art_hours: (a.opened_closed > 0).then(|| a.opened_hours / opened),
                ego_nudges: (a.opened_closed > 0).then(|| a.opened_pings / opened),
                alter_nudges: (a.responded_closed > 0).then(|| a.responded_pings / responded),
                open_frames_out: a.censored_out,
                open_frames_in: a.censored_in,
            };
            (actor, v)
        })
        .collect()
}

/// Interactivity for a single actor.
pub fn interactivity(frames: &[Frame], actor: ActorId) -> InteractivityVector {
    interactivity_all(frames).remove(&actor).unwrap_or_default()
}

/// Summary counters for the frame diagnostics artifact.
#[derive(Debug, Clone, Serialize)]
pub struct FrameSummary {
    pub events: u64,
    pub frames_total: u64,
    pub frames_closed: u64,
    pub frames_censored: u64,
    pub total_pings: u64,
    pub horizon_days: f64,
}

pub fn summarize_frames(events: &[MessageEvent], frames: &[Frame], horizon_days: f64) -> FrameSummary {
    let closed = frames.iter().filter(|f| f.is_closed()).count() as u64;
    FrameSummary {
        events: events.len() as u64,
        frames_total: frames.len() as u64,
        frames_closed: closed,
        frames_censored: frames.len() as u64 - closed,
        total_pings: frames.iter().map(|f| f.ping_count as u64).sum(),
        horizon_days,
    }
}

/// Audit dump: `opener,responder,open_time,ping_count,close_time_or_CENSORED,response_hours`.
pub fn write_frame_dump<W: Write>(
    frames: &[Frame],
    dir: &ActorDirectory,
    mut w: W,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Config(format!("frame dump write failed: {e}"));
    writeln!(
        w,
        "opener,responder,open_time,ping_count,close_time_or_CENSORED,response_hours"
    )
    .map_err(io_err)?;
    for f in frames {
        let close = f
            .close_time
            .map(|c| c.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_else(|| "CENSORED".to_string());
        let hours = f
            .response_hours()
            .map(|h| crate::report::fmt_sig(h))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            dir.profile(f.opener)?.address,
            dir.profile(f.responder)?.address,
            f.open_time.format("%Y-%m-%dT%H:%M:%SZ"),
            f.ping_count,
            close,
            hours
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Channel;
    use chrono::TimeZone;

    fn ts(h: f64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2016, 4, 1, 0, 0, 0).unwrap()
            + Duration::seconds((h * 3600.0).round() as i64)
    }

    fn ev(seq: u32, h: f64, s: u32, r: u32) -> MessageEvent {
        MessageEvent {
            message_uid: format!("m{seq:04}"),
            timestamp: ts(h),
            sender: ActorId(s),
            recipient: ActorId(r),
            channel: Channel::To,
        }
    }

    #[test]
    fn ping_then_reply_closes_one_frame_and_opens_the_reverse() {
        // A->B at 0h, A->B at 2h (ping), B->A at 5h.
        let events = vec![ev(1, 0.0, 0, 1), ev(2, 2.0, 0, 1), ev(3, 5.0, 1, 0)];
        let frames = build_frames(&events, 14.0);
        assert_eq!(frames.len(), 2);
        let ab = &frames[0];
        assert_eq!((ab.opener, ab.responder), (ActorId(0), ActorId(1)));
        assert_eq!(ab.ping_count, 1);
        assert_eq!(ab.response_hours(), Some(5.0));
        let ba = &frames[1];
        assert_eq!((ba.opener, ba.responder), (ActorId(1), ActorId(0)));
        assert_eq!(ba.open_time, ts(5.0));
        assert!(!ba.is_closed());
    }

    #[test]
    fn unanswered_frame_is_censored_with_zero_pings() {
        let frames = build_frames(&[ev(1, 0.0, 0, 1)], 14.0);
        assert_eq!(frames.len(), 1);
        assert!(!frames[0].is_closed());
        assert_eq!(frames[0].ping_count, 0);
        assert_eq!(frames[0].response_hours(), None);
    }

    #[test]
    fn reply_beyond_horizon_censors_instead_of_closing() {
        // Reply arrives 15 days after the open with a 14-day horizon.
        let events = vec![ev(1, 0.0, 0, 1), ev(2, 15.0 * 24.0, 1, 0)];
        let frames = build_frames(&events, 14.0);
        assert_eq!(frames.len(), 2);
        let ab = frames.iter().find(|f| f.opener == ActorId(0)).unwrap();
        assert!(!ab.is_closed());
        // The late reply still opens its own direction.
        let ba = frames.iter().find(|f| f.opener == ActorId(1)).unwrap();
        assert_eq!(ba.open_time, ts(15.0 * 24.0));
        // Reply exactly at the horizon closes.
        let events = vec![ev(1, 0.0, 0, 1), ev(2, 14.0 * 24.0, 1, 0)];
        let frames = build_frames(&events, 14.0);
        let ab = frames.iter().find(|f| f.opener == ActorId(0)).unwrap();
        assert_eq!(ab.response_hours(), Some(14.0 * 24.0));
    }

    #[test]
    fn monotone_horizon_never_loses_closures() {
        let events: Vec<MessageEvent> = (0..40)
            .map(|i| {
                let s = i % 3;
                let r = (i + 1 + (i % 2)) % 3;
                ev(i, (i as f64) * 17.3, s, if r == s { (r + 1) % 3 } else { r })
            })
            .collect();
        let (events, _) = crate::ingest::dedupe_and_normalize(events);
        let mut last_closed = 0;
        for days in [1.0, 3.0, 7.0, 30.0, 365.0] {
            let closed = build_frames(&events, days)
                .iter()
                .filter(|f| f.is_closed())
                .count();
            assert!(closed >= last_closed, "horizon {days}");
            last_closed = closed;
        }
    }

    #[test]
    fn audit_identity_openers_plus_pings_equals_events() {
        let events: Vec<MessageEvent> = (0..120)
            .map(|i| {
                let s = (i * 7 + 3) % 5;
                let mut r = (i * 11 + 1) % 5;
                if r == s {
                    r = (r + 1) % 5;
                }
                ev(i, (i as f64) * 1.9, s, r)
            })
            .collect();
        let (events, _) = crate::ingest::dedupe_and_normalize(events);
        let frames = build_frames(&events, 14.0);
        let pings: u64 = frames.iter().map(|f| f.ping_count as u64).sum();
        assert_eq!(frames.len() as u64 + pings, events.len() as u64);
        // Closed frames A->B never exceed reverse traffic B->A.
        let mut reverse_counts: HashMap<(ActorId, ActorId), u64> = HashMap::new();
        for e in &events {
            *reverse_counts.entry((e.sender, e.recipient)).or_insert(0) += 1;
        }
        let mut closed_per_dyad: HashMap<(ActorId, ActorId), u64> = HashMap::new();
        for f in frames.iter().filter(|f| f.is_closed()) {
            *closed_per_dyad.entry((f.opener, f.responder)).or_insert(0) += 1;
        }
        for ((a, b), n) in closed_per_dyad {
            assert!(n <= *reverse_counts.get(&(b, a)).unwrap_or(&0));
        }
    }

    #[test]
    fn time_shift_invariance() {
        let events = vec![
            ev(1, 0.0, 0, 1),
            ev(2, 2.0, 0, 1),
            ev(3, 5.0, 1, 0),
            ev(4, 9.0, 0, 1),
        ];
        let frames = build_frames(&events, 14.0);
        let shifted: Vec<MessageEvent> = events
            .iter()
            .map(|e| MessageEvent {
                timestamp: e.timestamp + Duration::hours(1000),
                ..e.clone()
            })
            .collect();
        let shifted_frames = build_frames(&shifted, 14.0);
        assert_eq!(frames.len(), shifted_frames.len());
        for (a, b) in frames.iter().zip(&shifted_frames) {
            assert_eq!(a.ping_count, b.ping_count);
            assert_eq!(a.response_hours(), b.response_hours());
        }
    }

    #[test]
    fn interactivity_averages_and_missing_sides() {
        // P = actor 0 opens two frames answered in 2h and 4h with 0 and 2
        // pings; nobody ever gets an answer from P.
        let events = vec![
            ev(1, 0.0, 0, 1),
            ev(2, 2.0, 1, 0), // closes: 2h, 0 pings
            ev(3, 10.0, 0, 2),
            ev(4, 11.0, 0, 2),
            ev(5, 12.0, 0, 2),
            ev(6, 14.0, 2, 0), // closes: 4h, 2 pings
        ];
        let frames = build_frames(&events, 14.0);
        let p = interactivity(&frames, ActorId(0));
        assert_eq!(p.alter_art_hours, Some(3.0));
        assert_eq!(p.ego_nudges, Some(1.0));
        // The two replies opened frames aimed at P that P never answered.
        assert_eq!(p.ego_art_hours, None);
        assert_eq!(p.alter_nudges, None);
        assert_eq!(p.open_frames_in, 2);

        let absent = interactivity(&frames, ActorId(99));
        assert_eq!(absent, InteractivityVector::default());
    }

    #[test]
    fn swapped_orientation_exchanges_ego_and_alter() {
        let v = InteractivityVector {
            ego_art_hours: Some(1.0),
            alter_art_hours: Some(2.0),
            ego_nudges: Some(3.0),
            alter_nudges: None,
            open_frames_out: 4,
            open_frames_in: 5,
        };
        let s = v.clone().swapped();
        assert_eq!(s.ego_art_hours, Some(2.0));
        assert_eq!(s.alter_art_hours, Some(1.0));
        assert_eq!(s.ego_nudges, None);
        assert_eq!(s.alter_nudges, Some(3.0));
        assert_eq!(s.open_frames_out, 4);
        assert_eq!(s.swapped(), v);
    }
}
