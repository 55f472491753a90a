//! Actor directory: identity, internal/external status, hierarchical rank
//! and innovator label for every email account seen by the pipeline.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Opaque actor identifier, assigned in directory order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ActorId(pub u32);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Innovator label. The three innovator groups are disjoint by
/// construction: one label column per actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Label {
    None,
    Admin,
    Product,
    Award,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::None => "NONE",
            Label::Admin => "ADMIN",
            Label::Product => "PRODUCT",
            Label::Award => "AWARD",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_uppercase().as_str() {
            "" | "NONE" => Some(Label::None),
            "ADMIN" => Some(Label::Admin),
            "PRODUCT" => Some(Label::Product),
            "AWARD" => Some(Label::Award),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ActorProfile {
    pub id: ActorId,
    /// Canonical lowercase address.
    pub address: String,
    pub internal: bool,
    /// 1 is the highest rank, 3 the lowest; absent for external actors.
    pub rank: Option<u8>,
    pub label: Label,
}

/// Address book mapping canonical addresses to actor profiles. Addresses
/// that show up in traffic but not in the loaded directory are registered
/// on the fly as external actors.
#[derive(Debug, Clone, Default)]
pub struct ActorDirectory {
    profiles: Vec<ActorProfile>,
    by_address: HashMap<String, ActorId>,
}

impl ActorDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lowercase and strip display-name decoration from a raw address
    /// token. Returns None when no plausible address remains.
    pub fn canonical_address(raw: &str) -> Option<String> {
        let mut s = raw.trim();
        // "Display Name <user@host>" keeps only the bracketed part.
        if let (Some(open), Some(close)) = (s.rfind('<'), s.rfind('>')) {
            if open < close {
                s = &s[open + 1..close];
            }
        }
        let s = s.trim().trim_matches('"').trim();
        if s.is_empty() || !s.contains('@') || s.contains(char::is_whitespace) {
            return None;
        }
        Some(s.to_ascii_lowercase())
    }

    pub fn insert(
        &mut self,
        address: String,
        internal: bool,
        rank: Option<u8>,
        label: Label,
    ) -> Result<ActorId> {
        if self.by_address.contains_key(&address) {
            return Err(Error::Config(format!("duplicate directory address {address}")));
        }
        if let Some(r) = rank {
            if !(1..=3).contains(&r) {
                return Err(Error::InvalidRank(r as i64));
            }
        }
        let id = ActorId(self.profiles.len() as u32);
        self.by_address.insert(address.clone(), id);
        self.profiles.push(ActorProfile {
            id,
            address,
            internal,
            rank,
            label,
        });
        Ok(id)
    }

    pub fn resolve(&self, address: &str) -> Option<ActorId> {
        self.by_address.get(address).copied()
    }

    /// Resolve an address, auto-registering unknown ones as external
    /// actors. The boolean reports whether a registration happened.
    pub fn resolve_or_register(&mut self, address: &str) -> (ActorId, bool) {
        if let Some(id) = self.by_address.get(address) {
            return (*id, false);
        }
        let id = ActorId(self.profiles.len() as u32);
        self.by_address.insert(address.to_string(), id);
        self.profiles.push(ActorProfile {
            id,
            address: address.to_string(),
            internal: false,
            rank: None,
            label: Label::None,
        });
        (id, true)
    }

    pub fn profile(&self, id: ActorId) -> Result<&ActorProfile> {
        self.profiles
            .get(id.0 as usize)
            .ok_or(Error::UnknownActor(id.0))
    }

    pub fn is_internal(&self, id: ActorId) -> bool {
        self.profiles
            .get(id.0 as usize)
            .map(|p| p.internal)
            .unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn actors(&self) -> impl Iterator<Item = &ActorProfile> {
        self.profiles.iter()
    }

    pub fn internal_actors(&self) -> impl Iterator<Item = &ActorProfile> {
        self.profiles.iter().filter(|p| p.internal)
    }

    /// Load the `address,internal,rank,label` table. Rank may be empty
    /// (external or unranked actors); label defaults to NONE.
    pub fn load<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut dir = ActorDirectory::new();
        let mut lines = reader.lines().enumerate();
        // Header row is required by the interface contract.
        match lines.next() {
            Some((_, Ok(header))) => {
                let normalized = header.trim().to_ascii_lowercase();
                if normalized != "address,internal,rank,label" {
                    return Err(Error::Directory {
                        path: origin.to_path_buf(),
                        line: 1,
                        message: format!(
                            "expected header 'address,internal,rank,label', got '{header}'"
                        ),
                    });
                }
            }
            Some((_, Err(e))) => return Err(Error::io(origin, e)),
            None => {
                return Err(Error::Directory {
                    path: origin.to_path_buf(),
                    line: 1,
                    message: "empty directory file".into(),
                })
            }
        }
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Directory {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let address = Self::canonical_address(fields[0]).ok_or_else(|| Error::Directory {
                path: origin.to_path_buf(),
                line: lineno,
                message: format!("invalid address '{}'", fields[0]),
            })?;
            let internal = match fields[1].trim().to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => {
                    return Err(Error::Directory {
                        path: origin.to_path_buf(),
                        line: lineno,
                        message: format!("invalid internal flag '{other}'"),
                    })
                }
            };
            let rank = match fields[2].trim() {
                "" => None,
                s => Some(s.parse::<u8>().map_err(|_| Error::Directory {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: format!("invalid rank '{s}'"),
                })?),
            };
            let label = Label::parse(fields[3]).ok_or_else(|| Error::Directory {
                path: origin.to_path_buf(),
                line: lineno,
                message: format!("invalid label '{}'", fields[3]),
            })?;
            dir.insert(address, internal, rank, label)
                .map_err(|e| Error::Directory {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: e.to_string(),
                })?;
        }
        Ok(dir)
    }

    /// Write the directory back out in the same format it is loaded from.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "address,internal,rank,label")?;
        for p in &self.profiles {
            writeln!(
                w,
                "{},{},{},{}",
                p.address,
                p.internal,
                p.rank.map(|r| r.to_string()).unwrap_or_default(),
                p.label
            )?;
        }
        Ok(())
    }
}
