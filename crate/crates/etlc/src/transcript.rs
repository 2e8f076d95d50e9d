//! Run transcripts: the ordered, replayable record of everything both
//! chains did during one scenario, exported as JSON lines.
//!
//! Line format (one JSON object per line, tagged by `record`):
//!
//! ```text
//! {"record":"header","schema_version":1,"scenario":{...}}
//! {"record":"priv_commit", ...}                 # private-chain commits, in order
//! {"record":"pub_tx", ...}                      # public-chain transactions with receipts
//! {"record":"session", ...}                     # terminal session summaries
//! {"record":"summary","initial_balances":...}   # balances, heads, supply
//! ```
//!
//! Serialization is field-order deterministic and all maps are sorted, so
//! replaying a scenario reproduces the byte-identical file; the content
//! hash is SHA-256 over those bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::Flow;
use crate::pubbc::TxRecord;
use crate::scenario::Scenario;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("malformed transcript: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrivCommitRecord {
    pub index: u64,
    pub kind: String,
    pub object_key: String,
    pub version: Option<u64>,
    pub payload_hex: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChallengeSummary {
    pub verdict: String,
    pub reason: String,
    pub dec_eld_hex: String,
}

/// Terminal state of one session plus everything the property checkers
/// need: what the recipient decrypted, whether it accepted, the receipt,
/// and the session's complete fund-flow ledger.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: u64,
    pub object_key: String,
    pub version: Option<u64>,
    pub state: String,
    pub notifier_account: Option<String>,
    pub recipient_account: String,
    pub key_revealed: bool,
    pub revealed_hex: Option<String>,
    pub receipt_hex: Option<String>,
    pub challenge: Option<ChallengeSummary>,
    pub escrow_residual: u64,
    pub flows: Vec<Flow>,
    pub r_accepted: bool,
    pub r_validation: Option<String>,
    pub r_decrypted_hex: Option<String>,
    pub vrs_head_at_validation: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub priv_commits: Vec<PrivCommitRecord>,
    pub pub_txs: Vec<TxRecord>,
    pub sessions: Vec<SessionSummary>,
    pub initial_balances: BTreeMap<String, u64>,
    pub final_balances: BTreeMap<String, u64>,
    pub priv_heads: BTreeMap<String, u64>,
    pub total_supply: u64,
    pub final_height: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header {
        schema_version: u32,
        scenario: Scenario,
    },
    PrivCommit(PrivCommitRecord),
    PubTx(TxRecord),
    Session(SessionSummary),
    Summary {
        initial_balances: BTreeMap<String, u64>,
        final_balances: BTreeMap<String, u64>,
        priv_heads: BTreeMap<String, u64>,
        total_supply: u64,
        final_height: u64,
    },
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            out.push_str(&serde_json::to_string(line).expect("transcript lines serialize"));
            out.push('\n');
        };
        push(&Line::Header {
            schema_version: self.schema_version,
            scenario: self.scenario.clone(),
        });
        for commit in &self.priv_commits {
            push(&Line::PrivCommit(commit.clone()));
        }
        for tx in &self.pub_txs {
            push(&Line::PubTx(tx.clone()));
        }
        for session in &self.sessions {
            push(&Line::Session(session.clone()));
        }
        push(&Line::Summary {
            initial_balances: self.initial_balances.clone(),
            final_balances: self.final_balances.clone(),
            priv_heads: self.priv_heads.clone(),
            total_supply: self.total_supply,
            final_height: self.final_height,
        });
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let mut header: Option<(u32, Scenario)> = None;
        let mut priv_commits = Vec::new();
        let mut pub_txs = Vec::new();
        let mut sessions = Vec::new();
        let mut summary = None;
        for (no, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw)
                .map_err(|e| TranscriptError::Malformed(format!("line {}: {e}", no + 1)))?;
            match line {
                Line::Header {
                    schema_version,
                    scenario,
                } => {
                    if schema_version != TRANSCRIPT_SCHEMA_VERSION {
                        return Err(TranscriptError::Malformed(format!(
                            "unsupported transcript schema {schema_version}"
                        )));
                    }
                    header = Some((schema_version, scenario));
                }
                Line::PrivCommit(c) => priv_commits.push(c),
                Line::PubTx(tx) => pub_txs.push(tx),
                Line::Session(s) => sessions.push(s),
                Line::Summary {
                    initial_balances,
                    final_balances,
                    priv_heads,
                    total_supply,
                    final_height,
                } => {
                    summary = Some((
                        initial_balances,
                        final_balances,
                        priv_heads,
                        total_supply,
                        final_height,
                    ));
                }
            }
        }
        let (schema_version, scenario) =
            header.ok_or_else(|| TranscriptError::Malformed("missing header line".into()))?;
        let (initial_balances, final_balances, priv_heads, total_supply, final_height) =
            summary.ok_or_else(|| TranscriptError::Malformed("missing summary line".into()))?;
        Ok(Transcript {
            schema_version,
            scenario,
            priv_commits,
            pub_txs,
            sessions,
            initial_balances,
            final_balances,
            priv_heads,
            total_supply,
            final_height,
        })
    }

    /// SHA-256 over the serialized transcript; the replay-determinism
    /// fingerprint.
    pub fn content_hash(&self) -> String {
        crate::crypto::sha256(self.to_jsonl().as_bytes()).to_hex()
    }

    pub fn balance_delta(&self, account: &str) -> i64 {
        let before = self.initial_balances.get(account).copied().unwrap_or(0) as i64;
        let after = self.final_balances.get(account).copied().unwrap_or(0) as i64;
        after - before
    }

    pub fn session(&self, id: u64) -> Option<&SessionSummary> {
        self.sessions.iter().find(|s| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_transcript() -> Transcript {
        Transcript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            scenario: Scenario::default_honest(),
            priv_commits: vec![PrivCommitRecord {
                index: 0,
                kind: "update_ledger_data".into(),
                object_key: "deed-42".into(),
                version: Some(0),
                payload_hex: "00".into(),
            }],
            pub_txs: vec![],
            sessions: vec![],
            initial_balances: BTreeMap::from([("r1".into(), 1000)]),
            final_balances: BTreeMap::from([("r1".into(), 987)]),
            priv_heads: BTreeMap::from([("deed-42".into(), 0)]),
            total_supply: 1000,
            final_height: 30,
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_content_hash() {
        let t = tiny_transcript();
        let text = t.to_jsonl();
        let back = Transcript::from_jsonl(&text).unwrap();
        assert_eq!(back.content_hash(), t.content_hash());
        assert_eq!(back.balance_delta("r1"), -13);
    }

    #[test]
    fn missing_header_is_malformed() {
        let t = tiny_transcript();
        let text: String = t
            .to_jsonl()
            .lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(Transcript::from_jsonl(&text).is_err());
    }

    #[test]
    fn corrupt_line_is_malformed() {
        let mut text = tiny_transcript().to_jsonl();
        text.push_str("{\"record\":\"wat\"}\n");
        assert!(Transcript::from_jsonl(&text).is_err());
    }
}
