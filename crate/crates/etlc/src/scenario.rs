//! Scenario scripts: the JSON-serializable description that fully
//! determines one simulation run, and the strategy-product corpus builder
//! used by the sweep machinery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{DeadlineParams, EconParams};
use crate::crypto::derive_bytes;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MemberSpec {
    pub id: String,
    /// "peer" or "client".
    pub role: String,
    pub balance: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RecipientSpec {
    pub id: String,
    pub balance: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct UpdateSpec {
    pub author: String,
    pub value: String,
    pub at_tick: u64,
}

/// A fully deterministic run description. Replaying the same scenario
/// yields a bit-identical transcript.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub members: Vec<MemberSpec>,
    pub quorum_threshold: usize,
    pub recipient: RecipientSpec,
    pub object_key: String,
    pub updates: Vec<UpdateSpec>,
    /// Whether the network grants the recipient access during bootstrap.
    pub grant_access: bool,
    pub notifier: String,
    #[serde(default)]
    pub second_notifier: Option<String>,
    pub notifier_strategy: String,
    pub receiver_strategy: String,
    pub economics: EconParams,
    pub deadlines: DeadlineParams,
    pub max_ticks: u64,
    #[serde(default)]
    pub defer_proof_check: bool,
}

impl Scenario {
    /// The default honest scenario: three peers under a 2-of-3 quorum,
    /// one funded recipient, one ledger update.
    pub fn default_honest() -> Self {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: "honest".into(),
            seed: 7,
            members: vec![
                MemberSpec {
                    id: "m1".into(),
                    role: "peer".into(),
                    balance: 1000,
                },
                MemberSpec {
                    id: "m2".into(),
                    role: "peer".into(),
                    balance: 1000,
                },
                MemberSpec {
                    id: "m3".into(),
                    role: "peer".into(),
                    balance: 1000,
                },
            ],
            quorum_threshold: 2,
            recipient: RecipientSpec {
                id: "r1".into(),
                balance: 1000,
            },
            object_key: "deed-42".into(),
            updates: vec![UpdateSpec {
                author: "m1".into(),
                value: "owner=alice".into(),
                at_tick: 0,
            }],
            grant_access: true,
            notifier: "m1".into(),
            second_notifier: None,
            notifier_strategy: "honest".into(),
            receiver_strategy: "honest".into(),
            economics: EconParams {
                reward_a: 10,
                escrow_a: 100,
                penalty: 50,
                bonus: 3,
            },
            deadlines: DeadlineParams {
                t_key: 10,
                t_sig: 40,
                challenge_timeout: 20,
                min_gap: 20,
            },
            max_ticks: 200,
            defer_proof_check: false,
        }
    }

    /// Derive the default scenario for one strategy pair. Strategies that
    /// need a particular world shape (an extra update, a second notifier, a
    /// missing access grant) get it here, so the sweep exercises every
    /// failure branch.
    pub fn for_strategies(notifier_strategy: &str, receiver_strategy: &str, seed: u64) -> Self {
        let mut scenario = Self::default_honest();
        scenario.name = format!("{notifier_strategy}-x-{receiver_strategy}");
        scenario.seed = seed;
        scenario.notifier_strategy = notifier_strategy.into();
        scenario.receiver_strategy = receiver_strategy.into();
        match notifier_strategy {
            "stale-version" => {
                // A second update lands while the notifier sits on its
                // snapshot of the first.
                scenario.updates.push(UpdateSpec {
                    author: "m2".into(),
                    value: "owner=bob".into(),
                    at_tick: 2,
                });
            }
            "racing-duplicate-notifier" => {
                scenario.second_notifier = Some("m2".into());
            }
            "unauthorized-recipient" => {
                scenario.grant_access = false;
            }
            _ => {}
        }
        scenario
    }

    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(json).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return invalid(format!(
                "schema_version {} unsupported (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.members.is_empty() {
            return invalid("at least one member required".into());
        }
        let peer_count = self.members.iter().filter(|m| m.role == "peer").count();
        for m in &self.members {
            if m.role != "peer" && m.role != "client" {
                return invalid(format!("member '{}' has unknown role '{}'", m.id, m.role));
            }
        }
        if self.quorum_threshold == 0 || self.quorum_threshold > peer_count {
            return invalid(format!(
                "quorum threshold {} out of range for {peer_count} peers",
                self.quorum_threshold
            ));
        }
        if self.economics.escrow_a <= self.economics.reward_a {
            return invalid(format!(
                "interlock escrow ({}) must exceed the reward ({})",
                self.economics.escrow_a, self.economics.reward_a
            ));
        }
        if self.deadlines.t_sig < self.deadlines.t_key + self.deadlines.min_gap {
            return invalid(format!(
                "signature deadline {} too tight for key deadline {} plus gap {}",
                self.deadlines.t_sig, self.deadlines.t_key, self.deadlines.min_gap
            ));
        }
        if self.updates.is_empty() {
            return invalid("at least one ledger update required".into());
        }
        let member_ids: Vec<&str> = self.members.iter().map(|m| m.id.as_str()).collect();
        for u in &self.updates {
            if !member_ids.contains(&u.author.as_str()) {
                return invalid(format!("update author '{}' is not a member", u.author));
            }
        }
        if !member_ids.contains(&self.notifier.as_str()) {
            return invalid(format!("notifier '{}' is not a member", self.notifier));
        }
        if let Some(second) = &self.second_notifier {
            if !member_ids.contains(&second.as_str()) {
                return invalid(format!("second notifier '{second}' is not a member"));
            }
            if *second == self.notifier {
                return invalid("second notifier must differ from the first".into());
            }
        }
        if member_ids.contains(&self.recipient.id.as_str()) {
            return invalid("recipient id collides with a member id".into());
        }
        crate::actors::NotifierStrategy::parse(&self.notifier_strategy)
            .map_err(ScenarioError::Invalid)?;
        crate::actors::ReceiverStrategy::parse(&self.receiver_strategy)
            .map_err(ScenarioError::Invalid)?;
        if self.max_ticks == 0 {
            return invalid("max_ticks must be positive".into());
        }
        Ok(())
    }

    /// Root seed bytes for all key derivation in this scenario.
    pub fn seed_bytes(&self) -> [u8; 32] {
        derive_bytes(&self.seed.to_be_bytes(), "scenario-root")
    }

    /// Ticks to keep draining after the scripted phase so that every armed
    /// deadline has fired: twice the sum of all deadline windows.
    pub fn drain_ticks(&self) -> u64 {
        2 * (self.deadlines.t_key + self.deadlines.t_sig + self.deadlines.challenge_timeout) + 16
    }
}

/// Key-pair seed for a member, shared between the simulation and the
/// post-hoc transcript checkers.
pub fn member_key_seed(scenario_seed: &[u8; 32], member_id: &str) -> [u8; 32] {
    derive_bytes(scenario_seed, &format!("member:{member_id}"))
}

/// Key-pair seed for the recipient.
pub fn recipient_key_seed(scenario_seed: &[u8; 32], recipient_id: &str) -> [u8; 32] {
    derive_bytes(scenario_seed, &format!("recipient:{recipient_id}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_validates_and_round_trips() {
        let s = Scenario::default_honest();
        s.validate().unwrap();
        let json = s.to_json();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn escrow_not_exceeding_reward_is_invalid() {
        let mut s = Scenario::default_honest();
        s.economics.escrow_a = s.economics.reward_a;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn quorum_larger_than_peer_count_is_invalid() {
        let mut s = Scenario::default_honest();
        s.quorum_threshold = 4;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn tight_signature_deadline_is_invalid() {
        let mut s = Scenario::default_honest();
        s.deadlines.t_sig = s.deadlines.t_key + 1;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn unknown_strategy_is_invalid() {
        let mut s = Scenario::default_honest();
        s.notifier_strategy = "chaos-monkey".into();
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn garbage_json_is_a_parse_error() {
        assert!(matches!(
            Scenario::from_json("{nope"),
            Err(ScenarioError::Parse(_))
        ));
    }
}
