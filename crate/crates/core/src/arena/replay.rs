//! Replay files.
//!
//! The uncompressed body is line oriented:
//!
//! ```text
//! GRIDMMO-REPLAY 1
//! seed <u64>
//! policies <name,name,...>
//! assignment <policy index per agent, space separated>
//! center <row> <col>
//! radius <r>
//! setup <json>
//! config <line count>
//! <effective config lines>
//! init
//! <log records emitted before the first tick>
//! T <tick>
//! A <agent id> <flat action indices>   (non-no-op actions of live agents)
//! <log records emitted during the tick>
//! ...
//! ```
//!
//! followed by the trailer `END <sha256 of the body, hex>`. The file is the
//! gzip of body plus trailer. Log record lines use the event log text form.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::runner::{summarize, EpisodeResult};
use crate::config::{GameConfig, Settings};
use crate::events::LogRecord;
use crate::minigame::{EpisodeSetup, Referee};
use crate::state::ledger_rules;
use crate::tasks::FactsLedger;
use crate::world::Pos;

pub const MAGIC: &str = "GRIDMMO-REPLAY 1";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("corrupt replay: {0}")]
    CorruptReplay(String),
    #[error("replay io: {0}")]
    Io(#[from] std::io::Error),
}

fn corrupt(msg: impl Into<String>) -> ReplayError {
    ReplayError::CorruptReplay(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayHeader {
    pub seed: u64,
    pub policies: Vec<String>,
    pub agent_policy: Vec<usize>,
    pub setup: EpisodeSetup,
    pub center: Pos,
    pub radius: i32,
    pub config_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u32,
    pub actions: Vec<(u32, Vec<i64>)>,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub header: ReplayHeader,
    pub initial: Vec<LogRecord>,
    pub ticks: Vec<TickRecord>,
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl Replay {
    /// The normative uncompressed body.
    pub fn body(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("seed {}\n", h.seed));
        out.push_str(&format!("policies {}\n", h.policies.join(",")));
        out.push_str(&format!("assignment {}\n", join(&h.agent_policy, " ")));
        out.push_str(&format!("center {} {}\n", h.center.r, h.center.c));
        out.push_str(&format!("radius {}\n", h.radius));
        out.push_str(&format!(
            "setup {}\n",
            serde_json::to_string(&h.setup).expect("setup serializes")
        ));
        let cfg_lines: Vec<&str> = h.config_text.lines().collect();
        out.push_str(&format!("config {}\n", cfg_lines.len()));
        for l in cfg_lines {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str("init\n");
        for r in &self.initial {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        for t in &self.ticks {
            out.push_str(&format!("T {}\n", t.tick));
            for (id, a) in &t.actions {
                out.push_str(&format!("A {} {}\n", id, join(a, " ")));
            }
            for r in &t.records {
                out.push_str(&r.to_string());
                out.push('\n');
            }
        }
        out
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.body().as_bytes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.body();
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(body.as_bytes()).expect("in-memory write");
        enc.write_all(format!("END {digest}\n").as_bytes()).expect("in-memory write");
        enc.finish().expect("in-memory gzip")
    }

    pub fn write(&self, path: &Path) -> Result<(), ReplayError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Replay, ReplayError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Replay, ReplayError> {
        let mut text = String::new();
        GzDecoder::new(bytes)
            .read_to_string(&mut text)
            .map_err(|e| corrupt(format!("decompression failed: {e}")))?;
        let body_end = text.trim_end_matches('\n').rfind('\n').map_or(0, |i| i + 1);
        let (body, trailer) = text.split_at(body_end);
        let digest = trailer
            .trim()
            .strip_prefix("END ")
            .ok_or_else(|| corrupt("missing trailer"))?;
        if hex::encode(Sha256::digest(body.as_bytes())) != digest {
            return Err(corrupt("digest mismatch"));
        }
        Self::parse_body(body)
    }

    fn parse_body(body: &str) -> Result<Replay, ReplayError> {
        let mut lines = body.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| corrupt(format!("missing {what}")));
        if next("magic")? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, ReplayError> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(Some(r).filter(|r| r.is_empty())))
                .ok_or_else(|| corrupt(format!("expected `{key}`")))
        }
        fn num<T: std::str::FromStr>(s: &str) -> Result<T, ReplayError> {
            s.trim().parse().map_err(|_| corrupt(format!("bad number `{s}`")))
        }
        let seed = num(field(next("seed")?, "seed")?)?;
        let policies = field(next("policies")?, "policies")?
            .split(',')
            .map(str::to_string)
            .collect();
        let agent_policy = field(next("assignment")?, "assignment")?
            .split_whitespace()
            .map(num)
            .collect::<Result<Vec<usize>, _>>()?;
        let c: Vec<i32> = field(next("center")?, "center")?
            .split_whitespace()
            .map(num)
            .collect::<Result<_, _>>()?;
        if c.len() != 2 {
            return Err(corrupt("bad center"));
        }
        let radius = num(field(next("radius")?, "radius")?)?;
        let setup: EpisodeSetup = serde_json::from_str(field(next("setup")?, "setup")?)
            .map_err(|e| corrupt(format!("bad setup: {e}")))?;
        let count: usize = num(field(next("config")?, "config")?)?;
        let mut config_text = String::new();
        for _ in 0..count {
            config_text.push_str(next("config line")?);
            config_text.push('\n');
        }
        field(next("init")?, "init")?;
        let header = ReplayHeader {
            seed,
            policies,
            agent_policy,
            setup,
            center: Pos::new(c[0], c[1]),
            radius,
            config_text,
        };
        let mut initial = Vec::new();
        let mut ticks: Vec<TickRecord> = Vec::new();
        for line in lines {
            if let Some(t) = line.strip_prefix("T ") {
                ticks.push(TickRecord {
                    tick: num(t)?,
                    actions: Vec::new(),
                    records: Vec::new(),
                });
            } else if let Some(a) = line.strip_prefix("A ") {
                let mut parts = a.split_whitespace();
                let id = num(parts.next().ok_or_else(|| corrupt("empty action"))?)?;
                let idx = parts.map(num).collect::<Result<Vec<i64>, _>>()?;
                ticks
                    .last_mut()
                    .ok_or_else(|| corrupt("action before first tick"))?
                    .actions
                    .push((id, idx));
            } else {
                let rec: LogRecord = line.parse().map_err(|e| corrupt(format!("{e}")))?;
                match ticks.last_mut() {
                    Some(t) => t.records.push(rec),
                    None => initial.push(rec),
                }
            }
        }
        Ok(Replay { header, initial, ticks })
    }

    /// Recomputes the episode result from the recorded log alone.
    pub fn rescore(&self) -> Result<EpisodeResult, ReplayError> {
        let h = &self.header;
        let cfg = GameConfig::from_text(&h.config_text).map_err(|e| corrupt(format!("config: {e}")))?;
        let s = Settings::resolve(&cfg);
        let n = h.agent_policy.len();
        if h.setup.tasks.len() != n {
            return Err(corrupt("assignment and task counts differ"));
        }
        let mut ledger = FactsLedger::new(n, ledger_rules(&s));
        let mut referee = Referee::new(&h.setup, h.center, h.radius);
        let mut all: Vec<LogRecord> = self.initial.clone();
        for r in &self.initial {
            ledger.apply(r);
        }
        let mut last = 0;
        for t in &self.ticks {
            for r in &t.records {
                ledger.apply(r);
            }
            all.extend_from_slice(&t.records);
            referee.update(t.tick, &ledger);
            last = t.tick;
        }
        Ok(summarize(h, &referee, &ledger, &all, last, self.digest()))
    }
}
