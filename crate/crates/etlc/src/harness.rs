//! Scenario runner plumbing shared by the CLI and the acceptance suite:
//! file IO for scenarios and transcripts, the strategy-product sweep, and
//! the per-session narrative renderer.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::actors::{run_scenario, NotifierStrategy, ReceiverStrategy};
use crate::properties::{check_corpus, PropertyReport};
use crate::scenario::{Scenario, ScenarioError};
use crate::transcript::{Transcript, TranscriptError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("no transcripts found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("unknown session {0}")]
    UnknownSession(u64),
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
            path: parent.into(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.into(),
        source,
    })
}

/// Load, validate and run a scenario file.
pub fn run_scenario_file(path: &Path) -> Result<Transcript, HarnessError> {
    let scenario = Scenario::from_json(&read(path)?)?;
    Ok(run_scenario(scenario)?)
}

/// Write a transcript under `out_dir` as `<name>.jsonl`; returns the path.
pub fn write_transcript(transcript: &Transcript, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    let name = format!(
        "{}-{}.jsonl",
        transcript.scenario.name, transcript.scenario.seed
    );
    let path = out_dir.join(name);
    write(&path, &transcript.to_jsonl())?;
    Ok(path)
}

/// Load one transcript file, or every `*.jsonl` under a directory.
pub fn load_transcripts(path: &Path) -> Result<Vec<Transcript>, HarnessError> {
    let mut transcripts = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| HarnessError::Io {
                path: path.into(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "jsonl").unwrap_or(false))
            .collect();
        entries.sort();
        for entry in entries {
            transcripts.push(Transcript::from_jsonl(&read(&entry)?)?);
        }
    } else {
        transcripts.push(Transcript::from_jsonl(&read(path)?)?);
    }
    if transcripts.is_empty() {
        return Err(HarnessError::EmptyCorpus(path.into()));
    }
    Ok(transcripts)
}

/// Evaluate every protocol property over the given transcripts.
pub fn check(transcripts: &[Transcript]) -> PropertyReport {
    check_corpus(transcripts)
}

/// Run the full notifier-strategy x receiver-strategy product against the
/// default scenario shape. Seeds derive deterministically from `base_seed`,
/// so a sweep is exactly reproducible.
pub fn sweep(base_seed: u64) -> Vec<Transcript> {
    sweep_with(
        &NotifierStrategy::all(),
        &ReceiverStrategy::all(),
        base_seed,
    )
}

/// Run the Cartesian product of the given strategy lists. Empty lists give
/// an empty corpus.
pub fn sweep_with(
    notifiers: &[NotifierStrategy],
    receivers: &[ReceiverStrategy],
    base_seed: u64,
) -> Vec<Transcript> {
    let mut corpus = Vec::new();
    for (i, notifier) in notifiers.iter().enumerate() {
        for (j, receiver) in receivers.iter().enumerate() {
            let seed = base_seed
                .wrapping_mul(10_000)
                .wrapping_add((i as u64) * 100)
                .wrapping_add(j as u64);
            let scenario = Scenario::for_strategies(notifier.name(), receiver.name(), seed);
            let transcript = run_scenario(scenario).expect("sweep scenarios are valid");
            corpus.push(transcript);
        }
    }
    corpus
}

/// Stable fingerprint of a whole corpus: the hash of all content hashes in
/// order.
pub fn corpus_hash(corpus: &[Transcript]) -> String {
    let concatenated: String = corpus.iter().map(|t| t.content_hash()).collect();
    crate::crypto::sha256(concatenated.as_bytes()).to_hex()
}

/// Human-readable stage-by-stage narrative of one session.
pub fn explain(transcript: &Transcript, session_id: u64) -> Result<String, HarnessError> {
    let session = transcript
        .session(session_id)
        .ok_or(HarnessError::UnknownSession(session_id))?;
    let mut out = String::new();
    out.push_str(&format!(
        "session {} for object '{}' (version {})\n",
        session.id,
        session.object_key,
        session.version.map_or("unbound".into(), |v| v.to_string()),
    ));
    out.push_str(&format!(
        "strategies: notifier {}, receiver {}\n\n",
        transcript.scenario.notifier_strategy, transcript.scenario.receiver_strategy
    ));

    let stage_of = |contract: &str, op: &str| -> Option<&'static str> {
        match (contract, op) {
            ("sc_reward", "record_pub_key") => Some("bootstrap"),
            ("sc_reward", "record_ciphertext_hash_proof") => Some("generation"),
            ("sc_r_sign", "install") | ("sc_n_key", "install") => Some("key transfer"),
            ("sc_n_key", "record_key") | ("sc_r_sign", "record_signature") => Some("key transfer"),
            ("sc_reward", "record_signature") => Some("verification and reward"),
            ("sc_reward", "validate") | ("sc_reward", "verify_signature") => {
                Some("verification and reward")
            }
            ("sc_reward", "timeout") => Some("timeout"),
            _ => None,
        }
    };

    for tx in &transcript.pub_txs {
        let Some(stage) = stage_of(&tx.contract, &tx.op) else {
            continue;
        };
        let payload_session = serde_json::from_str::<serde_json::Value>(&tx.payload)
            .ok()
            .and_then(|v| v.get("session").and_then(|s| s.as_u64()));
        let mentions_session = payload_session == Some(session_id)
            || (tx.op == "record_pub_key"
                && tx.receipt.info.contains(&format!("session {session_id} ")));
        if !mentions_session {
            continue;
        }
        let status = if tx.receipt.ok { "ok" } else { "REJECTED" };
        out.push_str(&format!(
            "[h{:>3}] {:<24} {:<28} {:<8} {}\n",
            tx.height,
            format!("{}.{}", tx.contract, tx.op),
            format!("({stage} stage)"),
            status,
            tx.receipt.info
        ));
    }

    out.push_str(&format!("\nterminal state: {}\n", session.state));
    if let Some(challenge) = &session.challenge {
        out.push_str(&format!(
            "challenge: {} ({})\n",
            challenge.verdict, challenge.reason
        ));
    }
    if let Some(validation) = &session.r_validation {
        out.push_str(&format!("receiver validation: {validation}\n"));
    }
    out.push_str("settlement flows:\n");
    for flow in &session.flows {
        out.push_str(&format!(
            "  {:<6} {:>6}  {}\n",
            flow.account, flow.delta, flow.reason
        ));
    }
    Ok(out)
}
