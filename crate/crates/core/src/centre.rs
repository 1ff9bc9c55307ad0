//! The skill centre: an event-sourced store of rule packets.
//!
//! State is the merge of every distinct packet ever logged. The log is
//! append-only NDJSON (one packet per line); loading replays it and skips
//! packet ids it has already seen.

use std::collections::{BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rules::{RankedRule, RuleBase, RuleContext};
use crate::world::EventKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillPacket {
    pub packet_id: String,
    pub module_id: String,
    pub shape_id: u8,
    pub rules: RuleBase,
    pub first_episode: u32,
    pub episode_count: u32,
}

impl SkillPacket {
    /// Build a packet whose id is the content hash of module, episode range
    /// and rules.
    pub fn new(
        module_id: impl Into<String>,
        shape_id: u8,
        rules: RuleBase,
        first_episode: u32,
        episode_count: u32,
    ) -> SkillPacket {
        let module_id = module_id.into();
        let packet_id = content_id(&module_id, &rules, first_episode, episode_count);
        SkillPacket {
            packet_id,
            module_id,
            shape_id,
            rules,
            first_episode,
            episode_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::MalformedPacket(format!(
                "{}: no rules",
                self.packet_id
            )));
        }
        if self.module_id.is_empty() {
            return Err(Error::MalformedPacket(format!(
                "{}: empty module id",
                self.packet_id
            )));
        }
        self.rules
            .check()
            .map_err(|e| Error::MalformedPacket(format!("{}: {e}", self.packet_id)))?;
        let expected = content_id(
            &self.module_id,
            &self.rules,
            self.first_episode,
            self.episode_count,
        );
        if expected != self.packet_id {
            return Err(Error::MalformedPacket(format!(
                "{}: id does not match content hash {expected}",
                self.packet_id
            )));
        }
        Ok(())
    }
}

/// Hash excludes provenance so a fragment hashes the same wherever it sits.
fn content_id(module_id: &str, rules: &RuleBase, first_episode: u32, episode_count: u32) -> String {
    let body = serde_json::json!({
        "module_id": module_id,
        "first_episode": first_episode,
        "episode_count": episode_count,
        "entries": crate::canonical::to_value(&rules.entries()),
    });
    let digest = Sha256::digest(body.to_string().as_bytes());
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ack {
    Accepted,
    Duplicate,
}

#[derive(Debug, Default)]
pub struct CentreState {
    base: RuleBase,
    seen: HashSet<String>,
    /// Packets in arrival order, the in-memory image of the log.
    packets: Vec<SkillPacket>,
    log: Option<LogFile>,
}

#[derive(Debug)]
struct LogFile {
    path: PathBuf,
    file: File,
}

impl CentreState {
    /// A centre without persistence.
    pub fn in_memory() -> CentreState {
        CentreState::default()
    }

    /// Open (or create) a log and replay it.
    pub fn open(path: impl AsRef<Path>) -> Result<CentreState> {
        let path = path.as_ref().to_path_buf();
        let mut state = if path.exists() {
            CentreState::replay(&path)?
        } else {
            CentreState::default()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        state.log = Some(LogFile { path, file });
        Ok(state)
    }

    /// Rebuild from a log without attaching it for writes.
    pub fn replay(path: &Path) -> Result<CentreState> {
        let mut state = CentreState::default();
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let corrupt = |reason: String| Error::CorruptLog {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let line = line.map_err(|e| corrupt(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let packet: SkillPacket =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            packet.validate().map_err(|e| corrupt(e.to_string()))?;
            state.apply(packet);
        }
        Ok(state)
    }

    fn apply(&mut self, packet: SkillPacket) -> Ack {
        if self.seen.contains(&packet.packet_id) {
            return Ack::Duplicate;
        }
        let mut rules = packet.rules.clone();
        rules.add_provenance(packet.packet_id.clone());
        self.base.merge_in(&rules);
        self.seen.insert(packet.packet_id.clone());
        self.packets.push(packet);
        Ack::Accepted
    }

    /// Ingest a packet. Duplicates change nothing. With a log attached the
    /// packet is durable before the in-memory state changes.
    pub fn submit(&mut self, packet: SkillPacket) -> Result<Ack> {
        packet.validate()?;
        if self.seen.contains(&packet.packet_id) {
            return Ok(Ack::Duplicate);
        }
        if let Some(log) = self.log.as_mut() {
            let mut line = crate::canonical::to_string(&packet);
            line.push('\n');
            log.file.write_all(line.as_bytes())?;
            log.file.flush()?;
        }
        Ok(self.apply(packet))
    }

    pub fn base(&self) -> &RuleBase {
        &self.base
    }

    pub fn seen_ids(&self) -> BTreeSet<String> {
        self.seen.iter().cloned().collect()
    }

    pub fn packet_count(&self) -> usize {
        self.packets.len()
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|l| l.path.as_path())
    }

    pub fn query(&self, context: &RuleContext, goals: &BTreeSet<EventKind>) -> Vec<RankedRule> {
        self.base.query(context, goals)
    }

    /// Write the full packet log to `path`; loading it reproduces this state.
    pub fn snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(File::create(path)?);
        for p in &self.packets {
            writeln!(out, "{}", crate::canonical::to_string(p))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CentreState> {
        CentreState::replay(path.as_ref())
    }

    /// Stable serialization of the observable state: base and seen ids.
    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_string(&serde_json::json!({
            "base": crate::canonical::to_value(&self.base),
            "seen": self.seen_ids(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{ActionClass, RuleContext};

    fn packet(module: &str, hits: u64) -> SkillPacket {
        let mut rb = RuleBase::new();
        rb.insert(
            RuleContext::EMPTY,
            ActionClass::Fire,
            EventKind::NoEffect,
            5,
            hits,
        )
        .unwrap();
        rb.insert(
            RuleContext::EMPTY,
            ActionClass::Fire,
            EventKind::Moved,
            5,
            5 - hits,
        )
        .unwrap();
        SkillPacket::new(module, 1, rb, 0, 3)
    }

    #[test]
    fn fresh_then_duplicate() {
        let mut c = CentreState::in_memory();
        let p = packet("m1", 2);
        assert_eq!(c.submit(p.clone()).unwrap(), Ack::Accepted);
        let before = c.to_canonical_json();
        assert_eq!(c.submit(p).unwrap(), Ack::Duplicate);
        assert_eq!(c.to_canonical_json(), before);
    }

    #[test]
    fn empty_and_tampered_packets_rejected() {
        let mut c = CentreState::in_memory();
        let empty = SkillPacket::new("m1", 1, RuleBase::new(), 0, 1);
        assert!(matches!(c.submit(empty), Err(Error::MalformedPacket(_))));
        let mut p = packet("m1", 2);
        p.module_id = "m2".into();
        assert!(matches!(c.submit(p), Err(Error::MalformedPacket(_))));
        assert!(c.base().is_empty());
    }

    #[test]
    fn empty_centre_answers_nothing() {
        let c = CentreState::in_memory();
        assert!(c
            .query(
                &RuleContext::EMPTY,
                &BTreeSet::from([EventKind::ObjectDestroyed])
            )
            .is_empty());
    }

    #[test]
    fn snapshot_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = CentreState::in_memory();
        for (m, h) in [("a", 1), ("b", 2), ("c", 3)] {
            c.submit(packet(m, h)).unwrap();
        }
        let path = dir.path().join("snap.ndjson");
        c.snapshot(&path).unwrap();
        let back = CentreState::load(&path).unwrap();
        assert_eq!(back.to_canonical_json(), c.to_canonical_json());
    }

    #[test]
    fn empty_log_gives_empty_centre() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        File::create(&path).unwrap();
        let c = CentreState::load(&path).unwrap();
        assert!(c.base().is_empty());
        assert_eq!(c.packet_count(), 0);
    }

    #[test]
    fn duplicate_line_skipped_on_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        let p = packet("a", 1);
        let line = crate::canonical::to_string(&p);
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        let c = CentreState::load(&path).unwrap();
        assert_eq!(c.packet_count(), 1);
        assert_eq!(
            c.base()
                .pair(&RuleContext::EMPTY, ActionClass::Fire)
                .unwrap()
                .support,
            5
        );
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        let line = crate::canonical::to_string(&packet("a", 1));
        std::fs::write(&path, format!("{line}\n{{not json\n")).unwrap();
        match CentreState::load(&path) {
            Err(Error::CorruptLog { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn open_appends_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        {
            let mut c = CentreState::open(&path).unwrap();
            c.submit(packet("a", 1)).unwrap();
            c.submit(packet("b", 4)).unwrap();
        }
        let mut c = CentreState::open(&path).unwrap();
        assert_eq!(c.packet_count(), 2);
        assert_eq!(c.submit(packet("a", 1)).unwrap(), Ack::Duplicate);
        c.submit(packet("c", 0)).unwrap();
        assert_eq!(CentreState::load(&path).unwrap().packet_count(), 3);
    }

    #[cfg(unix)]
    #[test]
    fn log_write_failure_leaves_state_unchanged() {
        let mut c = CentreState::in_memory();
        c.log = Some(LogFile {
            path: "/dev/full".into(),
            file: OpenOptions::new().append(true).open("/dev/full").unwrap(),
        });
        let before = c.to_canonical_json();
        assert!(c.submit(packet("a", 1)).is_err());
        assert_eq!(c.to_canonical_json(), before);
    }
}
