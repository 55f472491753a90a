//! Ingest: parse mbox archives or normalized event logs into a
//! deduplicated, time-ordered stream of per-recipient message events
//! joined to an actor directory.

pub mod directory;
pub mod mbox;

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::Serialize;

use crate::error::{Error, Result};
pub use directory::{ActorDirectory, ActorId, ActorProfile, Label};

/// Delivery channel of one message copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Channel {
    To,
    Cc,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::To => "TO",
            Channel::Cc => "CC",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TO" => Some(Channel::To),
            "CC" => Some(Channel::Cc),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One delivered email copy: a message to k recipients yields k events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageEvent {
    pub message_uid: String,
    pub timestamp: DateTime<Utc>,
    pub sender: ActorId,
    pub recipient: ActorId,
    pub channel: Channel,
}

/// Observation window and edge policies for cohort extraction.
#[derive(Debug, Clone)]
pub struct CohortPolicy {
    /// Half-open window [start, end).
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    /// Keep events touching external actors (default true).
    pub keep_cross_boundary_edges: bool,
    /// Count CC copies as full recipients (default true).
    pub cc_counts_as_recipient: bool,
}

impl CohortPolicy {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start >= end {
            return Err(Error::Config(format!(
                "window start {start} must precede end {end}"
            )));
        }
        Ok(CohortPolicy {
            window_start: start,
            window_end: end,
            keep_cross_boundary_edges: true,
            cc_counts_as_recipient: true,
        })
    }
}

/// Per-stream parse tally. Parsing is total: every input row or message is
/// either turned into events or counted here with a reason.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseTally {
    /// Rows (event log) or messages (mbox) encountered.
    pub encountered: u64,
    /// Rows/messages parsed successfully.
    pub parsed: u64,
    /// Rows/messages skipped.
    pub skipped: u64,
    /// Events emitted.
    pub events: u64,
    pub skip_reasons: BTreeMap<String, u64>,
    /// Timestamps that carried no timezone and were assumed UTC.
    pub assumed_utc: u64,
    /// Addresses auto-registered as external actors.
    pub unresolved_addresses: BTreeSet<String>,
}

impl ParseTally {
    fn skip(&mut self, reason: &str) {
        self.skipped += 1;
        *self.skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: ParseTally) {
        self.encountered += other.encountered;
        self.parsed += other.parsed;
        self.skipped += other.skipped;
        self.events += other.events;
        for (k, v) in other.skip_reasons {
            *self.skip_reasons.entry(k).or_insert(0) += v;
        }
        self.assumed_utc += other.assumed_utc;
        self.unresolved_addresses.extend(other.unresolved_addresses);
    }
}

/// Diagnostics for a whole ingest run, emitted as JSON.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestDiagnostics {
    pub parsed: u64,
    pub skipped: u64,
    pub deduped: u64,
    pub self_loops: u64,
    pub events_in: u64,
    pub events_out: u64,
    pub skip_reasons: BTreeMap<String, u64>,
    pub assumed_utc_timestamps: u64,
    pub unresolved_address_count: u64,
    pub unresolved_addresses: Vec<String>,
}

impl IngestDiagnostics {
    pub fn from_parts(tally: &ParseTally, norm: &NormalizeStats) -> Self {
        IngestDiagnostics {
            parsed: tally.parsed,
            skipped: tally.skipped,
            deduped: norm.duplicates_removed,
            self_loops: norm.self_loops_removed,
            events_in: tally.events,
            events_out: norm.events_out,
            skip_reasons: tally.skip_reasons.clone(),
            assumed_utc_timestamps: tally.assumed_utc,
            unresolved_address_count: tally.unresolved_addresses.len() as u64,
            unresolved_addresses: tally.unresolved_addresses.iter().cloned().collect(),
        }
    }
}

/// Parse a timestamp that is either RFC 3339 / ISO-8601 with offset, or a
/// naive `YYYY-MM-DDTHH:MM:SS` (assumed UTC; the caller tallies that).
fn parse_timestamp(s: &str) -> Option<(DateTime<Utc>, bool)> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some((dt.with_timezone(&Utc), false));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some((naive.and_utc(), true));
        }
    }
    None
}

/// Parse a normalized event log: comma-separated with header row
/// `message_uid,timestamp,sender,recipient,channel`, one row per
/// (message, recipient) pair. Bad rows are skipped and tallied, never
/// aborting the stream.
pub fn parse_event_log<R: BufRead>(
    reader: R,
    directory: &mut ActorDirectory,
) -> Result<(Vec<MessageEvent>, ParseTally)> {
    let mut tally = ParseTally::default();
    let mut events = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Config(format!("event log header unreadable: {e}")))?;
        let expected = ["message_uid", "timestamp", "sender", "recipient", "channel"];
        let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        if got != expected {
            return Err(Error::Config(format!(
                "event log header must be '{}', got '{}'",
                expected.join(","),
                got.join(",")
            )));
        }
    }
    for record in rdr.records() {
        tally.encountered += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                tally.skip("unreadable_row");
                continue;
            }
        };
        if record.len() != 5 {
            tally.skip("wrong_field_count");
            continue;
        }
        let uid = record[0].trim();
        if uid.is_empty() {
            tally.skip("missing_message_uid");
            continue;
        }
        let Some((timestamp, assumed)) = parse_timestamp(&record[1]) else {
            tally.skip("bad_timestamp");
            continue;
        };
        let Some(sender_addr) = ActorDirectory::canonical_address(&record[2]) else {
            tally.skip("bad_sender_address");
            continue;
        };
        let Some(recipient_addr) = ActorDirectory::canonical_address(&record[3]) else {
            tally.skip("bad_recipient_address");
            continue;
        };
        let Some(channel) = Channel::parse(&record[4]) else {
            tally.skip("unknown_channel");
            continue;
        };
        if assumed {
            tally.assumed_utc += 1;
        }
        let (sender, fresh_s) = directory.resolve_or_register(&sender_addr);
        if fresh_s {
            tally.unresolved_addresses.insert(sender_addr);
        }
        let (recipient, fresh_r) = directory.resolve_or_register(&recipient_addr);
        if fresh_r {
            tally.unresolved_addresses.insert(recipient_addr);
        }
        events.push(MessageEvent {
            message_uid: uid.to_string(),
            timestamp,
            sender,
            recipient,
            channel,
        });
        tally.parsed += 1;
        tally.events += 1;
    }
    Ok((events, tally))
}

/// Write events in the normalized event-log format.
pub fn write_event_log<W: Write>(events: &[MessageEvent], dir: &ActorDirectory, mut w: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Config(format!("event log write failed: {e}"));
    writeln!(w, "message_uid,timestamp,sender,recipient,channel").map_err(io_err)?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.message_uid,
            e.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
            dir.profile(e.sender)?.address,
            dir.profile(e.recipient)?.address,
            e.channel
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Counters produced by [`dedupe_and_normalize`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct NormalizeStats {
    pub duplicates_removed: u64,
    pub self_loops_removed: u64,
    pub events_out: u64,
}

/// Deduplicate on (message_uid, recipient), drop self-loops, and sort into
/// the canonical ascending (timestamp, message_uid, recipient) order so
/// downstream processing is invariant to input permutation. Idempotent.
pub fn dedupe_and_normalize(mut events: Vec<MessageEvent>) -> (Vec<MessageEvent>, NormalizeStats) {
    let mut stats = NormalizeStats::default();
    events.sort_by(|a, b| {
        (a.timestamp, &a.message_uid, a.recipient, a.sender, a.channel).cmp(&(
            b.timestamp,
            &b.message_uid,
            b.recipient,
            b.sender,
            b.channel,
        ))
    });
    let mut seen: HashSet<(String, ActorId)> = HashSet::with_capacity(events.len());
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if e.sender == e.recipient {
            stats.self_loops_removed += 1;
            continue;
        }
        if !seen.insert((e.message_uid.clone(), e.recipient)) {
            stats.duplicates_removed += 1;
            continue;
        }
        out.push(e);
    }
    stats.events_out = out.len() as u64;
    (out, stats)
}

/// Apply the cohort policy: window filtering, the CC and cross-boundary
/// toggles, and extraction of the analysis cohort (internal actors only).
/// Surviving events keep external endpoints when the policy says so; the
/// cohort is what statistics and percentile ranks are computed over.
pub fn apply_cohort(
    events: Vec<MessageEvent>,
    directory: &ActorDirectory,
    policy: &CohortPolicy,
) -> Result<(Vec<MessageEvent>, BTreeSet<ActorId>)> {
    let cohort: BTreeSet<ActorId> = directory.internal_actors().map(|p| p.id).collect();
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let filtered: Vec<MessageEvent> = events
        .into_iter()
        .filter(|e| e.timestamp >= policy.window_start && e.timestamp < policy.window_end)
        .filter(|e| policy.cc_counts_as_recipient || e.channel != Channel::Cc)
        .filter(|e| {
            policy.keep_cross_boundary_edges
                || (directory.is_internal(e.sender) && directory.is_internal(e.recipient))
        })
        .collect();
    if filtered.is_empty() {
        return Err(Error::EmptyWindow {
            start: policy.window_start.to_rfc3339(),
            end: policy.window_end.to_rfc3339(),
        });
    }
    Ok((filtered, cohort))
}
