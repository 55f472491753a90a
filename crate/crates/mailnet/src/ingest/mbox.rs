//! RFC-4155-style mbox parsing. Only the envelope headers matter here
//! (From, To, Cc, Date, Message-ID); bodies are never inspected. Damaged
//! messages are tallied and skipped, never aborting the stream.

use std::io::BufRead;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::ingest::directory::ActorDirectory;
use crate::ingest::{Channel, MessageEvent, ParseTally};

/// Parse one mbox stream into per-recipient events. Unknown addresses are
/// auto-registered as external actors and reported through the tally.
pub fn parse_mbox<R: BufRead>(
    reader: R,
    directory: &mut ActorDirectory,
) -> Result<(Vec<MessageEvent>, ParseTally)> {
    let mut tally = ParseTally::default();
    let mut events = Vec::new();
    let mut missing_mid_seq = 0u64;

    for raw in split_messages(reader)? {
        tally.encountered += 1;
        let headers = match fold_headers(&raw) {
            Ok(h) => h,
            Err(folds) => {
                // Stray continuation lines: recover what we can, tally it.
                *tally
                    .skip_reasons
                    .entry("malformed_folding".to_string())
                    .or_insert(0) += folds;
                match fold_headers_lenient(&raw) {
                    Some(h) => h,
                    None => {
                        tally.skip("unreadable_headers");
                        continue;
                    }
                }
            }
        };

        let Some(date_raw) = header_value(&headers, "date") else {
            tally.skip("missing_date");
            continue;
        };
        let Some((timestamp, assumed_utc)) = parse_mail_date(&date_raw) else {
            tally.skip("bad_date");
            continue;
        };
        let Some(from_raw) = header_value(&headers, "from") else {
            tally.skip("missing_from");
            continue;
        };
        let Some(sender_addr) = split_address_list(&from_raw)
            .into_iter()
            .find_map(|t| ActorDirectory::canonical_address(&t))
        else {
            tally.skip("bad_from_address");
            continue;
        };

        let message_uid = match header_value(&headers, "message-id").and_then(|v| {
            let v = v.trim();
            let inner = v.trim_start_matches('<').trim_end_matches('>').trim();
            if inner.is_empty() {
                None
            } else {
                Some(inner.to_string())
            }
        }) {
            Some(uid) => uid,
            None => {
                missing_mid_seq += 1;
                *tally
                    .skip_reasons
                    .entry("missing_message_id".to_string())
                    .or_insert(0) += 1;
                format!("synthetic-mid-{missing_mid_seq}")
            }
        };

        if assumed_utc {
            tally.assumed_utc += 1;
        }
        let (sender, fresh) = directory.resolve_or_register(&sender_addr);
        if fresh {
            tally.unresolved_addresses.insert(sender_addr);
        }

        let mut emitted = 0u64;
        for (header, channel) in [("to", Channel::To), ("cc", Channel::Cc)] {
            let Some(list) = header_value(&headers, header) else {
                continue;
            };
            for token in split_address_list(&list) {
                let Some(addr) = ActorDirectory::canonical_address(&token) else {
                    *tally
                        .skip_reasons
                        .entry("bad_recipient_token".to_string())
                        .or_insert(0) += 1;
                    continue;
                };
                let (recipient, fresh) = directory.resolve_or_register(&addr);
                if fresh {
                    tally.unresolved_addresses.insert(addr);
                }
                events.push(MessageEvent {
                    message_uid: message_uid.clone(),
                    timestamp,
                    sender,
                    recipient,
                    channel,
                });
                emitted += 1;
            }
        }
        if emitted == 0 {
            *tally
                .skip_reasons
                .entry("no_recipients".to_string())
                .or_insert(0) += 1;
        }
        tally.parsed += 1;
        tally.events += emitted;
    }
    Ok((events, tally))
}

/// Split an mbox stream at `From ` separator lines (start of file or after
/// a blank line), returning each message's header block lines.
fn split_messages<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut messages: Vec<Vec<String>> = Vec::new();
    let mut current: Option<Vec<String>> = None;
    let mut in_headers = false;
    let mut prev_blank = true;

    for line in reader.split(b'\n') {
        let bytes = line.map_err(|e| Error::Config(format!("mbox read failed: {e}")))?;
        let mut text = String::from_utf8_lossy(&bytes).into_owned();
        if text.ends_with('\r') {
            text.pop();
        }
        let is_separator = prev_blank && text.starts_with("From ");
        if is_separator {
            if let Some(msg) = current.take() {
                messages.push(msg);
            }
            current = Some(Vec::new());
            in_headers = true;
            prev_blank = false;
            continue;
        }
        if text.is_empty() {
            // First blank line terminates the header section.
            in_headers = false;
            prev_blank = true;
            continue;
        }
        prev_blank = false;
        if in_headers {
            if let Some(msg) = current.as_mut() {
                msg.push(text);
            }
        }
    }
    if let Some(msg) = current.take() {
        messages.push(msg);
    }
    Ok(messages)
}

/// Unfold continuation lines (leading space/tab) onto their header.
/// Returns Err(count) when continuations appear with no header to attach
/// to, so the caller can tally and fall back to lenient recovery.
fn fold_headers(lines: &[String]) -> std::result::Result<Vec<(String, String)>, u64> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut stray = 0u64;
    for line in lines {
        if line.starts_with(' ') || line.starts_with('\t') {
            match out.last_mut() {
                Some((_, v)) => {
                    v.push(' ');
                    v.push_str(line.trim());
                }
                None => stray += 1,
            }
            continue;
        }
        match line.split_once(':') {
            Some((name, value)) => out.push((name.trim().to_ascii_lowercase(), value.trim().to_string())),
            None => stray += 1,
        }
    }
    if stray > 0 {
        Err(stray)
    } else {
        Ok(out)
    }
}

fn fold_headers_lenient(lines: &[String]) -> Option<Vec<(String, String)>> {
    let usable: Vec<String> = lines
        .iter()
        .filter(|l| l.contains(':') || l.starts_with(' ') || l.starts_with('\t'))
        .cloned()
        .collect();
    fold_headers(&usable).ok()
}

fn header_value(headers: &[(String, String)], name: &str) -> Option<String> {
    headers
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
}

/// RFC 2822 date with best-effort fallbacks; trailing zone comments like
/// `(CEST)` are stripped first. The boolean marks a timezone-less value
/// that was assumed UTC.
fn parse_mail_date(raw: &str) -> Option<(DateTime<Utc>, bool)> {
    let mut s = raw.trim().to_string();
    if let Some(open) = s.find('(') {
        s.truncate(open);
        s = s.trim().to_string();
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(&s) {
        return Some((dt.with_timezone(&Utc), false));
    }
    // Without the weekday prefix.
    if let Some((_, rest)) = s.split_once(',') {
        if let Ok(dt) = DateTime::parse_from_rfc2822(rest.trim()) {
            return Some((dt.with_timezone(&Utc), false));
        }
    }
    for fmt in ["%d %b %Y %H:%M:%S %z", "%a, %d %b %Y %H:%M:%S %z"] {
        if let Ok(dt) = DateTime::parse_from_str(&s, fmt) {
            return Some((dt.with_timezone(&Utc), false));
        }
    }
    for fmt in ["%a, %d %b %Y %H:%M:%S", "%d %b %Y %H:%M:%S"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(&s, fmt) {
            return Some((naive.and_utc(), true));
        }
    }
    None
}

/// Split an address list on commas that sit outside double quotes, so
/// `"Doe, Jane" <jd@x>` stays intact.
fn split_address_list(raw: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in raw.chars() {
        match c {
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            ',' if !in_quotes => {
                if !current.trim().is_empty() {
                    parts.push(current.trim().to_string());
                }
                current.clear();
            }
            _ => current.push(c),
        }
    }
    if !current.trim().is_empty() {
        parts.push(current.trim().to_string());
    }
    parts
}
