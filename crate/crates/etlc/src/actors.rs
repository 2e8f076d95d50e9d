//! Strategy-driven protocol actors and the deterministic simulation loop.
//!
//! Each actor is a stepper polled once per tick in a fixed order; an actor
//! never touches chain state except by submitting transactions (or, for
//! network members, private-chain operations). A strategy is a decision
//! table covering every protocol decision point; points a strategy does not
//! override fall through to [`rational_decision`], the one-step
//! payoff-maximizing default.

use std::collections::BTreeMap;

use crate::contracts::{DeadlineParams, EconParams, MemberReg, SessionState, Verdict};
use crate::crypto::{self, derive_bytes, SymKey};
use crate::privbc::{verify_endorsements_with, EndorsedLedgerData, PrivError, PrivateChain, Role};
use crate::pubbc::{
    auth_sigs_hex, proof_hex, signature_hex, sym_key_hex, Account, ContractCall, PublicChain,
};
use crate::scenario::{member_key_seed, recipient_key_seed, Scenario, ScenarioError, UpdateSpec};
use crate::transcript::{ChallengeSummary, PrivCommitRecord, SessionSummary, Transcript};
use crate::{Crypto, DetCiphertext, KeyPair};

// ---------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------

/// Notifier-side strategy catalog: one entry per failure branch the
/// protocol must withstand, plus the honest baseline and three abandonment
/// strategies that exercise each timeout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NotifierStrategy {
    Honest,
    WrongKey,
    StaleVersion,
    WrongRecipientPk,
    ForgedAuthSigs,
    UnauthorizedRecipient,
    RacingDuplicate,
    WithholdKey,
    NoSignContract,
    NoClaim,
}

impl NotifierStrategy {
    pub fn all() -> [NotifierStrategy; 10] {
        [
            NotifierStrategy::Honest,
            NotifierStrategy::WrongKey,
            NotifierStrategy::StaleVersion,
            NotifierStrategy::WrongRecipientPk,
            NotifierStrategy::ForgedAuthSigs,
            NotifierStrategy::UnauthorizedRecipient,
            NotifierStrategy::RacingDuplicate,
            NotifierStrategy::WithholdKey,
            NotifierStrategy::NoSignContract,
            NotifierStrategy::NoClaim,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            NotifierStrategy::Honest => "honest",
            NotifierStrategy::WrongKey => "wrong-key",
            NotifierStrategy::StaleVersion => "stale-version",
            NotifierStrategy::WrongRecipientPk => "wrong-recipient-pk",
            NotifierStrategy::ForgedAuthSigs => "forged-auth-sigs",
            NotifierStrategy::UnauthorizedRecipient => "unauthorized-recipient",
            NotifierStrategy::RacingDuplicate => "racing-duplicate-notifier",
            NotifierStrategy::WithholdKey => "withhold-key",
            NotifierStrategy::NoSignContract => "no-sign-contract",
            NotifierStrategy::NoClaim => "no-claim",
        }
    }

    pub fn parse(name: &str) -> Result<Self, String> {
        Self::all()
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| format!("unknown notifier strategy '{name}'"))
    }
}

/// Receiver-side strategy catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiverStrategy {
    Honest,
    WithholdSignature,
    InvalidSignature,
    FalseChallenge,
    NoChallengeOnBadData,
}

impl ReceiverStrategy {
    pub fn all() -> [ReceiverStrategy; 5] {
        [
            ReceiverStrategy::Honest,
            ReceiverStrategy::WithholdSignature,
            ReceiverStrategy::InvalidSignature,
            ReceiverStrategy::FalseChallenge,
            ReceiverStrategy::NoChallengeOnBadData,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ReceiverStrategy::Honest => "honest",
            ReceiverStrategy::WithholdSignature => "withhold-signature",
            ReceiverStrategy::InvalidSignature => "invalid-signature",
            ReceiverStrategy::FalseChallenge => "false-challenge",
            ReceiverStrategy::NoChallengeOnBadData => "no-challenge-on-bad-data",
        }
    }

    pub fn parse(name: &str) -> Result<Self, String> {
        Self::all()
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| format!("unknown receiver strategy '{name}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VersionChoice {
    Latest,
    /// Record against the current head, then delay the public posting until
    /// the ledger has moved on.
    StaleSnapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PkChoice {
    Recipient,
    Wrong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyChoice {
    Correct,
    Wrong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignChoice {
    Rational,
    Withhold,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChallengeChoice {
    Rational,
    Always,
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChallengePayload {
    Genuine,
    Fabricated,
}

/// The full decision table. Every decision point has a defined action;
/// the named strategies override only the points that make them what they
/// are, everything else stays at the rational-honest default.
#[derive(Clone, Debug)]
pub struct StrategyTable {
    pub name: String,
    pub initiate_when_unauthorized: bool,
    pub forge_auth_sigs: bool,
    pub version_choice: VersionChoice,
    pub pk_choice: PkChoice,
    pub install_sign_contract: bool,
    pub post_key: bool,
    pub key_choice: KeyChoice,
    pub claim: bool,
    pub sign: SignChoice,
    pub challenge: ChallengeChoice,
    pub challenge_payload: ChallengePayload,
}

impl Default for StrategyTable {
    fn default() -> Self {
        StrategyTable {
            name: "honest".into(),
            initiate_when_unauthorized: false,
            forge_auth_sigs: false,
            version_choice: VersionChoice::Latest,
            pk_choice: PkChoice::Recipient,
            install_sign_contract: true,
            post_key: true,
            key_choice: KeyChoice::Correct,
            claim: true,
            sign: SignChoice::Rational,
            challenge: ChallengeChoice::Rational,
            challenge_payload: ChallengePayload::Genuine,
        }
    }
}

impl NotifierStrategy {
    pub fn table(self) -> StrategyTable {
        let mut t = StrategyTable {
            name: self.name().into(),
            ..StrategyTable::default()
        };
        match self {
            NotifierStrategy::Honest | NotifierStrategy::RacingDuplicate => {}
            NotifierStrategy::WrongKey => t.key_choice = KeyChoice::Wrong,
            NotifierStrategy::StaleVersion => t.version_choice = VersionChoice::StaleSnapshot,
            NotifierStrategy::WrongRecipientPk => t.pk_choice = PkChoice::Wrong,
            NotifierStrategy::ForgedAuthSigs => t.forge_auth_sigs = true,
            NotifierStrategy::UnauthorizedRecipient => t.initiate_when_unauthorized = true,
            NotifierStrategy::WithholdKey => t.post_key = false,
            NotifierStrategy::NoSignContract => t.install_sign_contract = false,
            NotifierStrategy::NoClaim => t.claim = false,
        }
        t
    }
}

impl ReceiverStrategy {
    pub fn table(self) -> StrategyTable {
        let mut t = StrategyTable {
            name: self.name().into(),
            ..StrategyTable::default()
        };
        match self {
            ReceiverStrategy::Honest => {}
            ReceiverStrategy::WithholdSignature => t.sign = SignChoice::Withhold,
            ReceiverStrategy::InvalidSignature => t.sign = SignChoice::Invalid,
            ReceiverStrategy::FalseChallenge => {
                t.challenge = ChallengeChoice::Always;
                t.challenge_payload = ChallengePayload::Fabricated;
            }
            ReceiverStrategy::NoChallengeOnBadData => t.challenge = ChallengeChoice::Never,
        }
        t
    }
}

// ---------------------------------------------------------------------
// Rational default
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionPoint {
    /// Should the notifier start a notification at all?
    InitiateGeneration { authorized: bool },
    /// Should the notifier reveal the key once both contracts are armed?
    PostKey,
    /// Should the recipient sign the receipt rather than forfeit?
    SignReceipt,
    /// Should the recipient dispute the delivered data?
    Challenge { data_valid: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Proceed,
    Abstain,
}

/// One-step payoff comparison over the known parameter set. This is the
/// default filling every decision point a strategy leaves untouched.
pub fn rational_decision(point: DecisionPoint, econ: &EconParams) -> Action {
    match point {
        // Without authorization evidence the run can only end in a rejected
        // generation or an upheld challenge, so a rational notifier never
        // starts it.
        DecisionPoint::InitiateGeneration { authorized } => {
            if authorized {
                Action::Proceed
            } else {
                Action::Abstain
            }
        }
        // Revealing the key collects the interlock escrow now; withholding
        // refunds it. Collecting strictly dominates.
        DecisionPoint::PostKey => Action::Proceed,
        // Signing costs the reward and bonus later; withholding forfeits the
        // interlock escrow now.
        DecisionPoint::SignReceipt => {
            if econ.reward_a + econ.bonus < econ.escrow_a {
                Action::Proceed
            } else {
                Action::Abstain
            }
        }
        // Disputing invalid data pays the penalty; disputing valid data can
        // only burn the one challenge slot.
        DecisionPoint::Challenge { data_valid } => {
            if !data_valid && econ.penalty > 0 {
                Action::Proceed
            } else {
                Action::Abstain
            }
        }
    }
}

// ---------------------------------------------------------------------
// Notifier driver
// ---------------------------------------------------------------------

struct CachedGeneration {
    version: u64,
    sym_key: SymKey,
    call: ContractCall,
}

enum NotifierPhase {
    Idle,
    /// Stale strategy: generation recorded privately, waiting for the
    /// ledger to move before posting it.
    AwaitStaleness(Box<CachedGeneration>),
    AwaitInterlock,
    AwaitKeyContract,
    AwaitSignature,
    AwaitFinalize,
    Done,
}

pub struct NotifierDriver {
    member_id: String,
    account: String,
    table: StrategyTable,
    object_key: String,
    econ: EconParams,
    deadlines: DeadlineParams,
    seed: [u8; 32],
    phase: NotifierPhase,
    session: Option<u64>,
    sym_key: Option<SymKey>,
}

impl NotifierDriver {
    fn new(scenario: &Scenario, member_id: &str, table: StrategyTable) -> Self {
        NotifierDriver {
            member_id: member_id.to_string(),
            account: member_id.to_string(),
            table,
            object_key: scenario.object_key.clone(),
            econ: scenario.economics,
            deadlines: scenario.deadlines,
            seed: scenario.seed_bytes(),
            phase: NotifierPhase::Idle,
            session: None,
            sym_key: None,
        }
    }

    /// Poll once; returns true when an action was submitted.
    fn step(&mut self, net: &mut PrivateChain, chain: &mut PublicChain) -> bool {
        match &self.phase {
            NotifierPhase::Idle => self.step_idle(net, chain),
            NotifierPhase::AwaitStaleness(_) => self.step_stale(net, chain),
            NotifierPhase::AwaitInterlock => self.step_interlock(chain),
            NotifierPhase::AwaitKeyContract => self.step_key(chain),
            NotifierPhase::AwaitSignature => self.step_claim(chain),
            NotifierPhase::AwaitFinalize => self.step_finalize(chain),
            NotifierPhase::Done => false,
        }
    }

    fn live_session<'c>(&self, chain: &'c PublicChain) -> Option<&'c crate::contracts::Session> {
        chain
            .etlc
            .sessions
            .iter()
            .find(|s| !s.state.is_terminal() && s.object_key == self.object_key)
    }

    fn step_idle(&mut self, net: &mut PrivateChain, chain: &mut PublicChain) -> bool {
        let Some(session) = self.live_session(chain) else {
            return false;
        };
        if net.head(&self.object_key).is_none() {
            return false;
        }
        // Submit even when another notifier appears to have been designated
        // already: concurrent notifiers race, and the contract's
        // first-come-first-serve rule is what adjudicates.
        let session_id = session.id;
        let recipient_pk = session.recipient_pk;
        let authorized = net.has_live_grant(&recipient_pk, &self.object_key);
        if !authorized
            && !self.table.initiate_when_unauthorized
            && rational_decision(DecisionPoint::InitiateGeneration { authorized }, &self.econ)
                == Action::Abstain
        {
            self.phase = NotifierPhase::Done;
            return false;
        }

        match self.build_generation(net, session_id, &recipient_pk) {
            Ok(cached) => {
                if self.table.version_choice == VersionChoice::StaleSnapshot {
                    self.session = Some(session_id);
                    self.phase = NotifierPhase::AwaitStaleness(Box::new(cached));
                    true
                } else {
                    self.post_generation(chain, cached)
                }
            }
            Err(_) => {
                // The network refused to validate (no grant, stale, bad
                // payload); nothing further to do.
                self.phase = NotifierPhase::Done;
                true
            }
        }
    }

    /// Produce the generation payload, honestly or per the strategy's
    /// overrides, recording on the private chain where the strategy allows.
    fn build_generation(
        &mut self,
        net: &mut PrivateChain,
        session_id: u64,
        recipient_pk: &crate::GroupElement,
    ) -> Result<CachedGeneration, PrivError> {
        let eld_bytes = net
            .head(&self.object_key)
            .expect("checked above")
            .to_bytes();
        let version = net
            .head(&self.object_key)
            .expect("checked above")
            .data
            .version;
        let peers = net.peer_ids();
        // The payload is always encrypted under this key; a wrong-key
        // strategy deviates later, at the reveal.
        let sym_key = SymKey::derive(
            &self.seed,
            &format!("sym:{}:{}", self.member_id, session_id),
        );

        let (public_ct, proof_pk);
        let honest_ct = Crypto::det_encrypt(recipient_pk, &eld_bytes).expect("eld is never empty");
        match self.table.pk_choice {
            PkChoice::Recipient => {
                public_ct = honest_ct.clone();
                proof_pk = *recipient_pk;
            }
            PkChoice::Wrong => {
                let attacker = Crypto::keygen(&derive_bytes(&self.seed, "attacker-pk"));
                public_ct =
                    Crypto::det_encrypt(&attacker.pk, &eld_bytes).expect("eld is never empty");
                proof_pk = attacker.pk;
            }
        }

        let opening = derive_bytes(
            &self.seed,
            &format!("opening:{}:{}", self.member_id, session_id),
        );
        // Under deferred validation the commitment covers whatever will be
        // posted; otherwise the private chain insists on the honest
        // ciphertext and a cheating notifier can only swap public fields.
        let commit_target = if net.defer_generation_validation {
            &public_ct
        } else {
            &honest_ct
        };
        let commitment = crypto::commit(&commit_target.to_bytes(), opening);
        let public_proof = Crypto::prove_enc(&proof_pk, &eld_bytes, &public_ct, &commitment.value)
            .expect("prover inputs are consistent by construction");

        let auth_sigs = if self.table.forge_auth_sigs {
            // Skip the private record entirely and sign as everyone.
            let own = net
                .member(&self.member_id)
                .expect("driver is a member")
                .keypair
                .clone();
            let msg = crate::privbc::auth_grant_message(
                &self.object_key,
                version,
                &commitment.value,
                recipient_pk,
            );
            net.members()
                .map(|m| (m.id.clone(), Crypto::sign(&own.sk, &msg)))
                .collect()
        } else {
            let record_ct = if net.defer_generation_validation {
                &public_ct
            } else {
                &honest_ct
            };
            let record_proof = if net.defer_generation_validation {
                public_proof.clone()
            } else {
                Crypto::prove_enc(recipient_pk, &eld_bytes, &honest_ct, &commitment.value)
                    .expect("prover inputs are consistent by construction")
            };
            let record = net.record_enc_data_hash_proof(
                &self.member_id,
                recipient_pk,
                &self.object_key,
                version,
                record_ct,
                &commitment,
                &record_proof,
                &peers,
            )?;
            record.auth_sigs
        };

        let ciphertext2 = crypto::sym_encrypt(&sym_key, &public_ct.to_bytes());
        let call = ContractCall::RecordCiphertextHashProof {
            session: session_id,
            version,
            kem: crate::point_hex(&public_ct.kem),
            ciphertext2: hex::encode(&ciphertext2),
            commitment: commitment.value.to_hex(),
            opening: hex::encode(commitment.opening),
            proof: proof_hex(&public_proof),
            auth_sigs: auth_sigs_hex(&auth_sigs),
        };
        self.session = Some(session_id);
        Ok(CachedGeneration {
            version,
            sym_key,
            call,
        })
    }

    fn post_generation(&mut self, chain: &mut PublicChain, cached: CachedGeneration) -> bool {
        let receipt = chain.submit(&self.account, &cached.call);
        self.sym_key = Some(cached.sym_key);
        if receipt.ok && !receipt.info.contains("aborted") {
            self.phase = NotifierPhase::AwaitInterlock;
        } else {
            self.phase = NotifierPhase::Done;
        }
        true
    }

    fn step_stale(&mut self, net: &mut PrivateChain, chain: &mut PublicChain) -> bool {
        let cached_version = match &self.phase {
            NotifierPhase::AwaitStaleness(c) => c.version,
            _ => unreachable!(),
        };
        let head = net
            .head(&self.object_key)
            .map(|e| e.data.version)
            .unwrap_or(0);
        if head <= cached_version {
            return false;
        }
        // The ledger moved on; post the stale snapshot anyway.
        let cached = match std::mem::replace(&mut self.phase, NotifierPhase::Done) {
            NotifierPhase::AwaitStaleness(c) => *c,
            _ => unreachable!(),
        };
        self.post_generation(chain, cached)
    }

    fn step_interlock(&mut self, chain: &mut PublicChain) -> bool {
        let Some(session_id) = self.session else {
            return false;
        };
        if !self.table.install_sign_contract {
            self.phase = NotifierPhase::Done;
            return false;
        }
        let call = ContractCall::InstallSignContract {
            session: session_id,
            amount: self.econ.escrow_a,
            sig_deadline: self.deadlines.t_sig,
        };
        let receipt = chain.submit(&self.account, &call);
        self.phase = if receipt.ok {
            NotifierPhase::AwaitKeyContract
        } else {
            NotifierPhase::Done
        };
        true
    }

    fn step_key(&mut self, chain: &mut PublicChain) -> bool {
        let Some(session_id) = self.session else {
            return false;
        };
        let Some(session) = chain.etlc.session(session_id) else {
            return false;
        };
        if session.state.is_terminal() {
            self.phase = NotifierPhase::Done;
            return false;
        }
        if session.key_contract.is_none() {
            return false;
        }
        if !self.table.post_key
            || rational_decision(DecisionPoint::PostKey, &self.econ) == Action::Abstain
        {
            self.phase = NotifierPhase::Done;
            return false;
        }
        let key = match self.table.key_choice {
            KeyChoice::Correct => self.sym_key.clone().expect("key cached at generation"),
            KeyChoice::Wrong => SymKey::derive(
                &self.seed,
                &format!("wrong-sym:{}:{session_id}", self.member_id),
            ),
        };
        let receipt = chain.submit(
            &self.account,
            &ContractCall::RecordKey {
                session: session_id,
                key: sym_key_hex(&key),
            },
        );
        self.phase = if receipt.ok && !receipt.info.contains("aborted") {
            NotifierPhase::AwaitSignature
        } else {
            NotifierPhase::Done
        };
        true
    }

    fn step_claim(&mut self, chain: &mut PublicChain) -> bool {
        let Some(session_id) = self.session else {
            return false;
        };
        let Some(session) = chain.etlc.session(session_id) else {
            return false;
        };
        match session.state {
            SessionState::SignaturePosted => {}
            s if s.is_terminal() => {
                self.phase = NotifierPhase::Done;
                return false;
            }
            _ => return false,
        }
        if !self.table.claim {
            self.phase = NotifierPhase::Done;
            return false;
        }
        let receipt_sig = session
            .recorded
            .receipt_sig
            .clone()
            .expect("signature posted");
        let receipt = chain.submit(
            &self.account,
            &ContractCall::ClaimReward {
                session: session_id,
                signature: signature_hex(&receipt_sig),
            },
        );
        self.phase = if receipt.ok {
            NotifierPhase::AwaitFinalize
        } else {
            NotifierPhase::Done
        };
        true
    }

    fn step_finalize(&mut self, chain: &mut PublicChain) -> bool {
        let Some(session_id) = self.session else {
            return false;
        };
        let Some(session) = chain.etlc.session(session_id) else {
            return false;
        };
        if session.state.is_terminal() {
            self.phase = NotifierPhase::Done;
            return false;
        }
        let deadline = session.challenge_deadline.unwrap_or(u64::MAX);
        if session.state == SessionState::ChallengeWindow && chain.height() > deadline {
            chain.submit(
                &self.account,
                &ContractCall::Finalize {
                    session: session_id,
                },
            );
            self.phase = NotifierPhase::Done;
            return true;
        }
        false
    }
}

// ---------------------------------------------------------------------
// Receiver driver
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
struct SessionAppraisal {
    appraised: bool,
    accepted: bool,
    validation: Option<String>,
    decrypted: Option<Vec<u8>>,
    vrs_head: Option<u64>,
    sign_handled: bool,
    challenge_handled: bool,
    key_contract_attempted: bool,
}

pub struct ReceiverDriver {
    id: String,
    keypair: KeyPair,
    table: StrategyTable,
    object_key: String,
    grant_requested: bool,
    blind_bootstrapped: bool,
    last_bootstrapped_head: Option<u64>,
    econ: EconParams,
    deadlines: DeadlineParams,
    member_regs: Vec<MemberReg>,
    quorum_threshold: usize,
    grant_access: bool,
    seed: [u8; 32],
    memory: BTreeMap<u64, SessionAppraisal>,
}

impl ReceiverDriver {
    fn new(scenario: &Scenario, net: &PrivateChain) -> Self {
        let seed = scenario.seed_bytes();
        let keypair = Crypto::keygen(&recipient_key_seed(&seed, &scenario.recipient.id));
        let member_regs = net
            .members()
            .map(|m| MemberReg {
                member_id: m.id.clone(),
                pk_hex: crate::point_hex(&m.keypair.pk),
                account: m.pubbc_account.clone(),
            })
            .collect();
        let table = ReceiverStrategy::parse(&scenario.receiver_strategy)
            .expect("scenario validated")
            .table();
        ReceiverDriver {
            id: scenario.recipient.id.clone(),
            keypair,
            table,
            object_key: scenario.object_key.clone(),
            grant_requested: false,
            blind_bootstrapped: false,
            last_bootstrapped_head: None,
            econ: scenario.economics,
            deadlines: scenario.deadlines,
            member_regs,
            quorum_threshold: scenario.quorum_threshold,
            grant_access: scenario.grant_access,
            seed,
            memory: BTreeMap::new(),
        }
    }

    pub fn public_key(&self) -> &crate::GroupElement {
        &self.keypair.pk
    }

    fn live_session<'c>(&self, chain: &'c PublicChain) -> Option<&'c crate::contracts::Session> {
        chain.etlc.sessions.iter().find(|s| {
            !s.state.is_terminal()
                && s.object_key == self.object_key
                && s.recipient_pk == self.keypair.pk
        })
    }

    /// Poll once. The receiver's only view of the private network is the
    /// VRS (and the one-time access-grant request during bootstrap);
    /// everything else it learns from the public chain.
    fn step(&mut self, net: &mut PrivateChain, chain: &mut PublicChain) -> bool {
        if self.live_session(chain).is_none() {
            return self.try_bootstrap(net, chain);
        }
        let (session_id, state, sign_armed, key_armed) = {
            let s = self.live_session(chain).expect("checked above");
            (
                s.id,
                s.state,
                s.sign_contract.is_some(),
                s.key_contract.is_some(),
            )
        };
        match state {
            SessionState::Generated if sign_armed && !key_armed => {
                let memory = self.memory.entry(session_id).or_default();
                if memory.key_contract_attempted {
                    return false;
                }
                memory.key_contract_attempted = true;
                chain.submit(
                    &self.id,
                    &ContractCall::InstallKeyContract {
                        session: session_id,
                        amount: self.econ.escrow_a,
                        key_deadline: self.deadlines.t_key,
                    },
                );
                true
            }
            SessionState::KeyPosted => self.handle_key_posted(net, chain, session_id),
            SessionState::ChallengeWindow => self.handle_challenge_window(net, chain, session_id),
            _ => false,
        }
    }

    /// Bootstrap: request the access grant (once), confirm standing via the
    /// VRS, and fund a session. An unauthorized receiver cannot get the VRS
    /// confirmation and bootstraps blindly at most once.
    fn try_bootstrap(&mut self, net: &mut PrivateChain, chain: &mut PublicChain) -> bool {
        if net.head(&self.object_key).is_none() {
            return false;
        }
        if self.grant_access && !self.grant_requested {
            let peers = net.peer_ids();
            let granted = net.permit_access(&self.keypair.pk, &self.object_key, &peers);
            self.grant_requested = true;
            if granted.is_err() {
                return true;
            }
        }
        let head = match net.vrs_query(&self.keypair.pk, &self.object_key) {
            Ok((eld, att)) => {
                debug_assert!(verify_endorsements_with(
                    &net.members()
                        .map(|m| (m.id.clone(), m.keypair.pk))
                        .collect(),
                    self.quorum_threshold,
                    &eld
                ));
                Some(att.head_version)
            }
            Err(_) => None,
        };
        match head {
            Some(head) => {
                if self.last_bootstrapped_head.is_some_and(|prev| head <= prev) {
                    return false;
                }
                self.last_bootstrapped_head = Some(head);
            }
            None => {
                // No VRS standing. A rational outsider would stop here; the
                // driver proceeds once so unauthorized flows are exercised.
                if self.blind_bootstrapped {
                    return false;
                }
                self.blind_bootstrapped = true;
            }
        }
        chain.submit(
            &self.id,
            &ContractCall::RecordPubKey {
                recipient_pk: crate::point_hex(&self.keypair.pk),
                object_key: self.object_key.clone(),
                members: self.member_regs.clone(),
                quorum_threshold: self.quorum_threshold,
                econ: self.econ,
                deadlines: self.deadlines,
            },
        );
        true
    }

    /// On key reveal: decrypt, validate, and decide on the receipt.
    fn handle_key_posted(
        &mut self,
        net: &mut PrivateChain,
        chain: &mut PublicChain,
        session_id: u64,
    ) -> bool {
        self.appraise(net, chain, session_id);
        let memory = self.memory.get_mut(&session_id).expect("appraised");
        if memory.sign_handled {
            return false;
        }
        memory.sign_handled = true;
        let revealed = chain
            .etlc
            .session(session_id)
            .and_then(|s| s.recorded.revealed.clone())
            .expect("key posted implies reveal");
        match self.table.sign {
            SignChoice::Withhold => false,
            SignChoice::Invalid => {
                let wrong = Crypto::keygen(&derive_bytes(&self.seed, "wrong-receipt-key"));
                let sig = Crypto::sign(&wrong.sk, &revealed);
                chain.submit(
                    &self.id,
                    &ContractCall::RecordReceiptSignature {
                        session: session_id,
                        signature: signature_hex(&sig),
                    },
                );
                true
            }
            SignChoice::Rational => {
                if rational_decision(DecisionPoint::SignReceipt, &self.econ) == Action::Abstain {
                    return false;
                }
                let sig = Crypto::sign(&self.keypair.sk, &revealed);
                chain.submit(
                    &self.id,
                    &ContractCall::RecordReceiptSignature {
                        session: session_id,
                        signature: signature_hex(&sig),
                    },
                );
                true
            }
        }
    }

    /// Decrypt the revealed ciphertext and validate it exactly as the
    /// acceptance decision requires: robust decryption, well-formedness,
    /// quorum endorsement under the registered keys, signer-set match, and
    /// freshness against the VRS head.
    fn appraise(&mut self, net: &PrivateChain, chain: &PublicChain, session_id: u64) {
        if self.memory.entry(session_id).or_default().appraised {
            return;
        }
        let session = chain.etlc.session(session_id).expect("session exists");
        let revealed = session
            .recorded
            .revealed
            .clone()
            .expect("key posted implies reveal");
        let registry = chain.etlc.registry.clone();
        let threshold = chain.etlc.quorum_threshold;
        let auth_ids: Vec<&String> = session
            .recorded
            .auth_sigs
            .iter()
            .map(|(id, _)| id)
            .collect();
        let declared_version = session.version;

        let mut decrypted = None;
        let mut vrs_head = None;
        let validation: Result<(), String> = (|| {
            let ct = DetCiphertext::from_bytes(&revealed)
                .map_err(|_| "revealed data is not a ciphertext".to_string())?;
            let plain = match Crypto::det_decrypt(&self.keypair.sk, &ct) {
                Ok(p) => p,
                Err(e) => {
                    decrypted = Some(Crypto::det_decrypt_unchecked(&self.keypair.sk, &ct));
                    return Err(format!("decryption rejected: {e}"));
                }
            };
            decrypted = Some(plain.clone());
            let eld = EndorsedLedgerData::from_bytes(&plain)
                .map_err(|_| "plaintext is not endorsed ledger data".to_string())?;
            if eld.data.key != self.object_key {
                return Err("data is for a different object".into());
            }
            if Some(eld.data.version) != declared_version {
                return Err("data version differs from the notified version".into());
            }
            if !verify_endorsements_with(&registry, threshold, &eld) {
                return Err("endorsements fail quorum verification".into());
            }
            let mut endorsers: Vec<&String> = eld.endorsements.iter().map(|(id, _)| id).collect();
            let mut auth: Vec<&String> = auth_ids.clone();
            endorsers.sort();
            endorsers.dedup();
            auth.sort();
            auth.dedup();
            if endorsers != auth {
                return Err("endorser set differs from the authorization set".into());
            }
            if let Ok((_, att)) = net.vrs_query(&self.keypair.pk, &self.object_key) {
                vrs_head = Some(att.head_version);
                if eld.data.version < att.head_version {
                    return Err(format!(
                        "stale data: version {} but head is {}",
                        eld.data.version, att.head_version
                    ));
                }
            }
            Ok(())
        })();

        let memory = self.memory.get_mut(&session_id).expect("inserted above");
        memory.appraised = true;
        memory.accepted = validation.is_ok();
        memory.validation = Some(match &validation {
            Ok(()) => "ok".to_string(),
            Err(reason) => reason.clone(),
        });
        memory.decrypted = decrypted;
        memory.vrs_head = vrs_head;
    }

    fn handle_challenge_window(
        &mut self,
        net: &mut PrivateChain,
        chain: &mut PublicChain,
        session_id: u64,
    ) -> bool {
        self.appraise(net, chain, session_id);
        let memory = self.memory.get_mut(&session_id).expect("appraised");
        if memory.challenge_handled {
            return false;
        }
        let data_valid = memory.accepted;
        let proceed = match self.table.challenge {
            ChallengeChoice::Always => true,
            ChallengeChoice::Never => false,
            ChallengeChoice::Rational => {
                rational_decision(DecisionPoint::Challenge { data_valid }, &self.econ)
                    == Action::Proceed
            }
        };
        memory.challenge_handled = true;
        if !proceed {
            return false;
        }
        let payload = match self.table.challenge_payload {
            ChallengePayload::Genuine => memory
                .decrypted
                .clone()
                .unwrap_or_else(|| derive_bytes(&self.seed, "empty-challenge").to_vec()),
            ChallengePayload::Fabricated => {
                let mut fake = b"fabricated:".to_vec();
                fake.extend_from_slice(&derive_bytes(&self.seed, "fabricated-dec-ld"));
                fake
            }
        };
        let attestation = net
            .vrs_query(&self.keypair.pk, &self.object_key)
            .ok()
            .map(|(_, att)| hex::encode(att.to_bytes()));
        chain.submit(
            &self.id,
            &ContractCall::Challenge {
                session: session_id,
                dec_eld: hex::encode(&payload),
                attestation,
            },
        );
        true
    }
}

// ---------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------

/// One deterministic run: the two chains, the scripted updates, and the
/// actor steppers, polled in a fixed order each tick.
pub struct Simulation {
    scenario: Scenario,
    privbc: PrivateChain,
    pubbc: PublicChain,
    receiver: ReceiverDriver,
    notifiers: Vec<NotifierDriver>,
    updates: Vec<UpdateSpec>,
    applied_updates: usize,
    initial_balances: BTreeMap<String, u64>,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let seed = scenario.seed_bytes();
        let member_triples: Vec<(String, Role, String)> = scenario
            .members
            .iter()
            .map(|m| {
                let role = if m.role == "peer" {
                    Role::Peer
                } else {
                    Role::Client
                };
                (m.id.clone(), role, m.id.clone())
            })
            .collect();
        let mut privbc = PrivateChain::new(&seed, &member_triples, scenario.quorum_threshold);
        privbc.defer_generation_validation = scenario.defer_proof_check;

        let mut accounts: Vec<Account> = scenario
            .members
            .iter()
            .map(|m| Account {
                id: m.id.clone(),
                pk: Crypto::keygen(&member_key_seed(&seed, &m.id)).pk,
                balance: m.balance,
            })
            .collect();
        accounts.push(Account {
            id: scenario.recipient.id.clone(),
            pk: Crypto::keygen(&recipient_key_seed(&seed, &scenario.recipient.id)).pk,
            balance: scenario.recipient.balance,
        });
        let pubbc = PublicChain::new(accounts, scenario.defer_proof_check);
        let initial_balances = pubbc.balances();

        let receiver = ReceiverDriver::new(&scenario, &privbc);
        let primary_table = NotifierStrategy::parse(&scenario.notifier_strategy)
            .expect("scenario validated")
            .table();
        let mut notifiers = vec![NotifierDriver::new(
            &scenario,
            &scenario.notifier,
            primary_table,
        )];
        if let Some(second) = &scenario.second_notifier {
            notifiers.push(NotifierDriver::new(
                &scenario,
                second,
                NotifierStrategy::Honest.table(),
            ));
        }

        let mut updates = scenario.updates.clone();
        updates.sort_by_key(|u| u.at_tick);
        Ok(Simulation {
            scenario,
            privbc,
            pubbc,
            receiver,
            notifiers,
            updates,
            applied_updates: 0,
            initial_balances,
        })
    }

    /// Drive the run to termination and assemble the transcript.
    pub fn run(mut self) -> Transcript {
        let budget = self.scenario.max_ticks + self.scenario.drain_ticks();
        let mut quiet = 0;
        for _ in 0..budget {
            let height = self.pubbc.height();
            while self.applied_updates < self.updates.len()
                && self.updates[self.applied_updates].at_tick <= height
            {
                let update = self.updates[self.applied_updates].clone();
                let peers = self.privbc.peer_ids();
                self.privbc
                    .update_ledger_data(
                        &update.author,
                        &self.scenario.object_key,
                        update.value.as_bytes(),
                        &peers,
                    )
                    .expect("scripted updates are valid");
                self.applied_updates += 1;
            }
            self.privbc.take_notices();

            let mut acted = false;
            acted |= self.receiver.step(&mut self.privbc, &mut self.pubbc);
            for notifier in &mut self.notifiers {
                acted |= notifier.step(&mut self.privbc, &mut self.pubbc);
            }
            self.pubbc.tick();

            // Stop only after a full iteration in which every session is
            // terminal and no actor wanted to move, so late intentions (a
            // re-bootstrap for a superseded update) still get their turn.
            let settled = self.applied_updates == self.updates.len()
                && !self.pubbc.etlc.sessions.is_empty()
                && self
                    .pubbc
                    .etlc
                    .sessions
                    .iter()
                    .all(|s| s.state.is_terminal())
                && !acted;
            quiet = if settled { quiet + 1 } else { 0 };
            if quiet >= 2 {
                break;
            }
        }
        self.into_transcript()
    }

    fn into_transcript(self) -> Transcript {
        let Simulation {
            scenario,
            privbc,
            pubbc,
            receiver,
            initial_balances,
            ..
        } = self;
        let priv_commits = privbc
            .commits()
            .iter()
            .map(|c| PrivCommitRecord {
                index: c.index,
                kind: c.kind.clone(),
                object_key: c.object_key.clone(),
                version: c.version,
                payload_hex: c.payload_hex.clone(),
            })
            .collect();
        let sessions = pubbc
            .etlc
            .sessions
            .iter()
            .map(|s| {
                let memory = receiver.memory.get(&s.id).cloned().unwrap_or_default();
                SessionSummary {
                    id: s.id,
                    object_key: s.object_key.clone(),
                    version: s.version,
                    state: s.state.name().to_string(),
                    notifier_account: s.notifier_account.clone(),
                    recipient_account: s.recipient_account.clone(),
                    key_revealed: s.recorded.key.is_some(),
                    revealed_hex: s.recorded.revealed.as_ref().map(hex::encode),
                    receipt_hex: s
                        .recorded
                        .receipt_sig
                        .as_ref()
                        .map(|sig| hex::encode(sig.to_bytes())),
                    challenge: s.challenge.as_ref().map(|c| ChallengeSummary {
                        verdict: match c.verdict {
                            Verdict::Upheld => "Upheld".into(),
                            Verdict::Rejected => "Rejected".into(),
                        },
                        reason: c.reason.clone(),
                        dec_eld_hex: hex::encode(&c.dec_eld),
                    }),
                    escrow_residual: s.escrow.total(),
                    flows: s.flows.clone(),
                    r_accepted: memory.accepted,
                    r_validation: memory.validation.clone(),
                    r_decrypted_hex: memory.decrypted.as_ref().map(hex::encode),
                    vrs_head_at_validation: memory.vrs_head,
                }
            })
            .collect();
        Transcript {
            schema_version: crate::transcript::TRANSCRIPT_SCHEMA_VERSION,
            scenario,
            priv_commits,
            pub_txs: pubbc.txs().to_vec(),
            sessions,
            initial_balances,
            final_balances: pubbc.balances(),
            priv_heads: privbc.heads(),
            total_supply: pubbc.total_supply(),
            final_height: pubbc.height(),
        }
    }
}

/// Convenience: build and run in one call.
pub fn run_scenario(scenario: Scenario) -> Result<Transcript, ScenarioError> {
    Ok(Simulation::new(scenario)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_defaults_match_the_incentive_analysis() {
        let econ = EconParams {
            reward_a: 10,
            escrow_a: 100,
            penalty: 50,
            bonus: 3,
        };
        // Signing beats forfeiting while a + bonus < A.
        assert_eq!(
            rational_decision(DecisionPoint::SignReceipt, &econ),
            Action::Proceed
        );
        let upside_down = EconParams {
            reward_a: 100,
            escrow_a: 50,
            penalty: 50,
            bonus: 3,
        };
        assert_eq!(
            rational_decision(DecisionPoint::SignReceipt, &upside_down),
            Action::Abstain
        );
        // Invalid data with a positive penalty is always worth disputing.
        assert_eq!(
            rational_decision(DecisionPoint::Challenge { data_valid: false }, &econ),
            Action::Proceed
        );
        assert_eq!(
            rational_decision(DecisionPoint::Challenge { data_valid: true }, &econ),
            Action::Abstain
        );
        // No authorization, no initiation.
        assert_eq!(
            rational_decision(
                DecisionPoint::InitiateGeneration { authorized: false },
                &econ
            ),
            Action::Abstain
        );
        assert_eq!(
            rational_decision(
                DecisionPoint::InitiateGeneration { authorized: true },
                &econ
            ),
            Action::Proceed
        );
        assert_eq!(
            rational_decision(DecisionPoint::PostKey, &econ),
            Action::Proceed
        );
    }

    #[test]
    fn every_strategy_name_round_trips() {
        for s in NotifierStrategy::all() {
            assert_eq!(NotifierStrategy::parse(s.name()).unwrap(), s);
        }
        for s in ReceiverStrategy::all() {
            assert_eq!(ReceiverStrategy::parse(s.name()).unwrap(), s);
        }
        assert!(NotifierStrategy::parse("nope").is_err());
    }

    #[test]
    fn unnamed_decision_points_default_to_honest() {
        let t = NotifierStrategy::WrongKey.table();
        assert_eq!(t.key_choice, KeyChoice::Wrong);
        assert_eq!(t.pk_choice, PkChoice::Recipient);
        assert!(t.install_sign_contract);
        assert!(t.claim);
        let r = ReceiverStrategy::FalseChallenge.table();
        assert_eq!(r.challenge, ChallengeChoice::Always);
        assert_eq!(r.sign, SignChoice::Rational);
    }

    #[test]
    fn honest_run_terminates_rewarded() {
        let transcript = run_scenario(Scenario::default_honest()).unwrap();
        assert_eq!(transcript.sessions.len(), 1);
        let session = &transcript.sessions[0];
        assert_eq!(session.state, "Rewarded");
        assert!(session.r_accepted);
        assert_eq!(session.escrow_residual, 0);
        assert_eq!(transcript.balance_delta("r1"), -13);
    }

    #[test]
    fn honest_run_is_deterministic() {
        let a = run_scenario(Scenario::default_honest()).unwrap();
        let b = run_scenario(Scenario::default_honest()).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }
}
