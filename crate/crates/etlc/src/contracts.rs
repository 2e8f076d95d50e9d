//! The public-chain contract suite: the reward contract plus the pair of
//! interlocking escrow contracts that swap the symmetric key for the
//! recipient's receipt signature.
//!
//! Each notification session is one state machine instance:
//!
//! ```text
//! Init --generation--> Generated --key contract ops--> KeyPosted
//!      --receipt sig--> SignaturePosted --claim--> ChallengeWindow
//!      --timeout--> Rewarded   |  --upheld challenge--> Penalized
//! ```
//!
//! plus `Refunded` (clean timeout unwind, all net transfers zero) and
//! `Aborted` (failed validation, or receipt-signature forfeiture). Terminal
//! states are absorbing: no operation succeeds on them. Every fund movement
//! goes through the per-session escrow buckets so conservation and
//! per-session settlement are exactly auditable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, SymKey};
use crate::privbc::{
    verify_auth_sigs, verify_endorsements_with, verify_vrs_attestation, EndorsedLedgerData,
    MemberId, VrsAttestation,
};
use crate::pubbc::Balances;
use crate::{Crypto, DetCiphertext, Digest, EncProof, GroupElement, Signature};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("a session for this recipient, object and version already exists")]
    DuplicateSession,
    #[error("insufficient funds: need {need}, have {have}")]
    InsufficientFunds { need: u64, have: u64 },
    #[error("operation not valid in state {0}")]
    WrongState(&'static str),
    #[error("unknown session id")]
    UnknownSession,
    #[error("caller is not the party bound to this operation")]
    UnauthorizedCaller,
    #[error("caller is not a registered network member")]
    NotRegisteredMember,
    #[error("malformed payload: {0}")]
    Malformed(&'static str),
    #[error("authorization signatures failed quorum verification")]
    BadAuthSigs,
    #[error("registered member set does not match this bootstrap")]
    RegistryMismatch,
    #[error("escrow amount must equal the session's configured amount")]
    AmountMismatch,
    #[error("signature deadline must exceed the key deadline by the configured gap")]
    DeadlineTooTight,
    #[error("sign contract must be installed first")]
    SignContractMissing,
    #[error("deadline has passed")]
    PastDeadline,
    #[error("signature does not verify under the recipient key")]
    BadSignature,
    #[error("submitted signature does not match the recorded receipt")]
    SignatureMismatch,
    #[error("challenge window is closed")]
    WindowClosed,
    #[error("an upheld challenge blocks finalization")]
    ChallengeUpheld,
}

/// Economic parameters of a session: the notification reward `a`, the
/// interlock escrow `A`, the misbehavior penalty, and the notifier bonus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconParams {
    pub reward_a: u64,
    pub escrow_a: u64,
    pub penalty: u64,
    pub bonus: u64,
}

/// Deadline durations in blocks: `t_key` for the key contract, `t_sig` for
/// the sign contract, the challenge window length, and the minimum gap
/// enforced between the two interlock deadlines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlineParams {
    pub t_key: u64,
    pub t_sig: u64,
    pub challenge_timeout: u64,
    pub min_gap: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Init,
    Generated,
    KeyPosted,
    SignaturePosted,
    ChallengeWindow,
    Rewarded,
    Refunded,
    Penalized,
    Aborted,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            SessionState::Rewarded
                | SessionState::Refunded
                | SessionState::Penalized
                | SessionState::Aborted
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SessionState::Init => "Init",
            SessionState::Generated => "Generated",
            SessionState::KeyPosted => "KeyPosted",
            SessionState::SignaturePosted => "SignaturePosted",
            SessionState::ChallengeWindow => "ChallengeWindow",
            SessionState::Rewarded => "Rewarded",
            SessionState::Refunded => "Refunded",
            SessionState::Penalized => "Penalized",
            SessionState::Aborted => "Aborted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Upheld,
    Rejected,
}

/// The single content-adjudicated challenge a session may carry.
#[derive(Clone, Debug)]
pub struct ChallengeRecord {
    pub dec_eld: Vec<u8>,
    pub verdict: Verdict,
    pub reason: String,
}

/// Per-session escrow buckets. Funds in a bucket belong to the contract
/// until paid out or refunded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Escrow {
    pub reward: u64,
    pub penalty: u64,
    pub sign_a: u64,
    pub key_a: u64,
}

impl Escrow {
    pub fn total(&self) -> u64 {
        self.reward + self.penalty + self.sign_a + self.key_a
    }
}

/// One armed time-locked escrow promise (a sign- or key-contract instance).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EscrowContract {
    pub amount: u64,
    pub installed_at: u64,
    pub expiry: u64,
}

/// Every fund movement a session causes, for settlement audits. Deposits
/// into escrow are negative, payouts positive.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flow {
    pub account: String,
    pub delta: i64,
    pub reason: String,
}

/// Artifacts recorded on the public chain for one session.
#[derive(Clone, Debug, Default)]
pub struct Recorded {
    pub kem: Option<GroupElement>,
    pub ciphertext2: Vec<u8>,
    pub commitment: Option<Digest>,
    pub opening: Option<[u8; 32]>,
    pub proof: Option<EncProof>,
    pub auth_sigs: Vec<(MemberId, Signature)>,
    /// The symmetric decryption of `ciphertext2`, available after the key
    /// is recorded.
    pub revealed: Option<Vec<u8>>,
    pub key: Option<SymKey>,
    pub receipt_sig: Option<Signature>,
}

/// One notification session: the cross-chain state machine binding a
/// recipient to one ledger update.
#[derive(Clone, Debug)]
pub struct Session {
    pub id: u64,
    pub object_key: String,
    pub recipient_pk: GroupElement,
    pub recipient_account: String,
    pub member_accounts: Vec<String>,
    pub state: SessionState,
    pub version: Option<u64>,
    pub notifier_account: Option<String>,
    pub notifier_member: Option<MemberId>,
    pub econ: EconParams,
    pub deadlines: DeadlineParams,
    pub recorded: Recorded,
    pub challenge: Option<ChallengeRecord>,
    pub escrow: Escrow,
    pub sign_contract: Option<EscrowContract>,
    pub key_contract: Option<EscrowContract>,
    /// Height by which the current stage must advance; the timeout branch
    /// fires on the tick after this passes.
    pub stage_expiry: u64,
    pub challenge_deadline: Option<u64>,
    pub flows: Vec<Flow>,
    pub created_at: u64,
    pub proof_checked: bool,
}

impl Session {
    fn require_state(&self, want: SessionState) -> Result<(), ContractError> {
        if self.state == want {
            Ok(())
        } else {
            Err(ContractError::WrongState(self.state.name()))
        }
    }
}

/// State shared by the contract suite across sessions.
pub struct EtlcState {
    /// Member public keys recorded during bootstrap. The contract can only
    /// verify quorum signatures against keys it has on record.
    pub registry: BTreeMap<MemberId, GroupElement>,
    pub member_accounts: BTreeMap<MemberId, String>,
    pub quorum_threshold: usize,
    pub sessions: Vec<Session>,
    /// Highest version per object for which a generation was accepted;
    /// enforces the first-come-first-serve notifier designation.
    pub generated: BTreeMap<String, u64>,
    /// Defer the well-formedness proof check from the generation stage to
    /// the final verification stage.
    pub defer_proof_check: bool,
}

/// Member registration entry carried by the bootstrap call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberReg {
    pub member_id: String,
    pub pk_hex: String,
    pub account: String,
}

impl EtlcState {
    pub fn new(defer_proof_check: bool) -> Self {
        Self {
            registry: BTreeMap::new(),
            member_accounts: BTreeMap::new(),
            quorum_threshold: 0,
            sessions: Vec::new(),
            generated: BTreeMap::new(),
            defer_proof_check,
        }
    }

    pub fn session(&self, id: u64) -> Option<&Session> {
        self.sessions.get(id as usize)
    }

    fn session_mut(&mut self, id: u64) -> Result<&mut Session, ContractError> {
        self.sessions
            .get_mut(id as usize)
            .ok_or(ContractError::UnknownSession)
    }

    pub fn escrow_total(&self) -> u64 {
        self.sessions.iter().map(|s| s.escrow.total()).sum()
    }

    fn member_by_account(&self, account: &str) -> Option<MemberId> {
        self.member_accounts
            .iter()
            .find(|(_, acct)| acct.as_str() == account)
            .map(|(id, _)| id.clone())
    }

    // ---- fund plumbing -------------------------------------------------

    fn deposit(
        balances: &mut Balances,
        session: &mut Session,
        account: &str,
        amount: u64,
        bucket: fn(&mut Escrow) -> &mut u64,
        reason: &str,
    ) -> Result<(), ContractError> {
        let have = balances.balance(account);
        if have < amount {
            return Err(ContractError::InsufficientFunds { need: amount, have });
        }
        balances.debit(account, amount);
        *bucket(&mut session.escrow) += amount;
        session.flows.push(Flow {
            account: account.to_string(),
            delta: -(amount as i64),
            reason: reason.to_string(),
        });
        Ok(())
    }

    fn payout(
        balances: &mut Balances,
        session: &mut Session,
        bucket: fn(&mut Escrow) -> &mut u64,
        account: &str,
        amount: u64,
        reason: &str,
    ) {
        let b = bucket(&mut session.escrow);
        debug_assert!(*b >= amount, "escrow bucket underflow");
        *b -= amount;
        balances.credit(account, amount);
        session.flows.push(Flow {
            account: account.to_string(),
            delta: amount as i64,
            reason: reason.to_string(),
        });
    }

    fn refund_all(balances: &mut Balances, session: &mut Session, reason: &str) {
        let reward = session.escrow.reward;
        let penalty = session.escrow.penalty;
        let sign_a = session.escrow.sign_a;
        let key_a = session.escrow.key_a;
        if reward > 0 {
            let to = session.recipient_account.clone();
            Self::payout(
                balances,
                session,
                |e| &mut e.reward,
                &to,
                reward,
                &format!("refund:reward ({reason})"),
            );
        }
        if penalty > 0 {
            let to = session
                .notifier_account
                .clone()
                .expect("penalty implies notifier");
            Self::payout(
                balances,
                session,
                |e| &mut e.penalty,
                &to,
                penalty,
                &format!("refund:penalty ({reason})"),
            );
        }
        if sign_a > 0 {
            let to = session
                .notifier_account
                .clone()
                .expect("sign escrow implies notifier");
            Self::payout(
                balances,
                session,
                |e| &mut e.sign_a,
                &to,
                sign_a,
                &format!("refund:sign-escrow ({reason})"),
            );
        }
        if key_a > 0 {
            let to = session.recipient_account.clone();
            Self::payout(
                balances,
                session,
                |e| &mut e.key_a,
                &to,
                key_a,
                &format!("refund:key-escrow ({reason})"),
            );
        }
    }

    // ---- SC-Reward: bootstrap ------------------------------------------

    /// Create a session in `Init`, registering the member key set and
    /// escrowing the reward plus bonus from the recipient.
    #[allow(clippy::too_many_arguments)]
    pub fn record_pubkey(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        recipient_pk: GroupElement,
        object_key: &str,
        members: &[MemberReg],
        quorum_threshold: usize,
        econ: EconParams,
        deadlines: DeadlineParams,
    ) -> Result<u64, ContractError> {
        let mut registry = BTreeMap::new();
        let mut accounts = BTreeMap::new();
        for m in members {
            let pk =
                crate::point_from_hex(&m.pk_hex).ok_or(ContractError::Malformed("member pk"))?;
            registry.insert(m.member_id.clone(), pk);
            accounts.insert(m.member_id.clone(), m.account.clone());
        }
        if self.registry.is_empty() {
            self.registry = registry;
            self.member_accounts = accounts;
            self.quorum_threshold = quorum_threshold;
        } else if self.registry != registry
            || self.member_accounts != accounts
            || self.quorum_threshold != quorum_threshold
        {
            return Err(ContractError::RegistryMismatch);
        }
        let duplicate = self.sessions.iter().any(|s| {
            !s.state.is_terminal() && s.object_key == object_key && s.recipient_pk == recipient_pk
        });
        if duplicate {
            return Err(ContractError::DuplicateSession);
        }

        let id = self.sessions.len() as u64;
        let mut session = Session {
            id,
            object_key: object_key.to_string(),
            recipient_pk,
            recipient_account: caller.to_string(),
            member_accounts: members.iter().map(|m| m.account.clone()).collect(),
            state: SessionState::Init,
            version: None,
            notifier_account: None,
            notifier_member: None,
            econ,
            deadlines,
            recorded: Recorded::default(),
            challenge: None,
            escrow: Escrow::default(),
            sign_contract: None,
            key_contract: None,
            // Generation must happen within the longer interlock window.
            stage_expiry: height + deadlines.t_sig,
            challenge_deadline: None,
            flows: Vec::new(),
            created_at: height,
            proof_checked: false,
        };
        Self::deposit(
            balances,
            &mut session,
            caller,
            econ.reward_a + econ.bonus,
            |e| &mut e.reward,
            "deposit:reward+bonus",
        )?;
        self.sessions.push(session);
        Ok(id)
    }

    // ---- SC-Reward: generation -----------------------------------------

    /// Record the doubly encrypted payload, commitment, opening, proof and
    /// authorization signatures. On success the caller becomes the
    /// designated notifier and the session moves to `Generated`; a failed
    /// proof terminates the session with every deposit refunded.
    #[allow(clippy::too_many_arguments)]
    pub fn record_ciphertext_hash_proof(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        version: u64,
        kem: GroupElement,
        ciphertext2: Vec<u8>,
        commitment: Digest,
        opening: [u8; 32],
        proof: EncProof,
        auth_sigs: Vec<(MemberId, Signature)>,
    ) -> Result<String, ContractError> {
        let member = self
            .member_by_account(caller)
            .ok_or(ContractError::NotRegisteredMember)?;
        let registry = self.registry.clone();
        let threshold = self.quorum_threshold;
        let defer = self.defer_proof_check;
        let object_key = self
            .session(session_id)
            .ok_or(ContractError::UnknownSession)?
            .object_key
            .clone();
        // First come, first served: one designated notifier per version.
        if let Some(&latest) = self.generated.get(&object_key) {
            if version <= latest {
                return Err(ContractError::DuplicateSession);
            }
        }
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::Init)?;

        if !verify_auth_sigs(
            &registry,
            threshold,
            &session.object_key,
            version,
            &commitment,
            &session.recipient_pk,
            &auth_sigs,
        ) {
            return Err(ContractError::BadAuthSigs);
        }

        let proof_ok = Crypto::verify_enc_proof(&session.recipient_pk, &kem, &commitment, &proof);
        if !defer && !proof_ok {
            session.state = SessionState::Aborted;
            Self::refund_all(balances, session, "proof rejected at generation");
            return Ok("aborted: well-formedness proof rejected; deposits refunded".into());
        }

        Self::deposit(
            balances,
            session,
            caller,
            session.econ.penalty,
            |e| &mut e.penalty,
            "deposit:penalty",
        )?;

        session.version = Some(version);
        session.notifier_account = Some(caller.to_string());
        session.notifier_member = Some(member);
        session.recorded.kem = Some(kem);
        session.recorded.ciphertext2 = ciphertext2;
        session.recorded.commitment = Some(commitment);
        session.recorded.opening = Some(opening);
        session.recorded.proof = Some(proof);
        session.recorded.auth_sigs = auth_sigs;
        session.proof_checked = !defer;
        session.state = SessionState::Generated;
        // The sign contract must be installed within the key window.
        session.stage_expiry = height + session.deadlines.t_key;
        let key = session.object_key.clone();
        self.generated.insert(key, version);
        Ok(format!(
            "generated: notifier designated for version {version}"
        ))
    }

    // ---- SC-R-Sign / SC-N-Key: interlock installation -------------------

    /// Notifier escrows `A`, promising it to the recipient against a valid
    /// receipt signature before the signature deadline.
    pub fn install_sign_contract(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        amount: u64,
        sig_deadline: u64,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::Generated)?;
        if session.notifier_account.as_deref() != Some(caller) {
            return Err(ContractError::UnauthorizedCaller);
        }
        if session.sign_contract.is_some() {
            return Err(ContractError::WrongState("Generated"));
        }
        if amount != session.econ.escrow_a {
            return Err(ContractError::AmountMismatch);
        }
        if sig_deadline < session.deadlines.t_key + session.deadlines.min_gap {
            return Err(ContractError::DeadlineTooTight);
        }
        Self::deposit(
            balances,
            session,
            caller,
            amount,
            |e| &mut e.sign_a,
            "deposit:sign-escrow",
        )?;
        session.sign_contract = Some(EscrowContract {
            amount,
            installed_at: height,
            expiry: height + sig_deadline,
        });
        // The key contract must appear within the key window.
        session.stage_expiry = height + session.deadlines.t_key;
        Ok(format!(
            "sign contract armed, expires at height {}",
            height + sig_deadline
        ))
    }

    /// Recipient escrows the same `A`, promising it to the notifier against
    /// a valid symmetric key before the key deadline.
    pub fn install_key_contract(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        amount: u64,
        key_deadline: u64,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::Generated)?;
        if session.recipient_account != caller {
            return Err(ContractError::UnauthorizedCaller);
        }
        if session.sign_contract.is_none() {
            return Err(ContractError::SignContractMissing);
        }
        if session.key_contract.is_some() {
            return Err(ContractError::WrongState("Generated"));
        }
        if amount != session.econ.escrow_a {
            return Err(ContractError::AmountMismatch);
        }
        Self::deposit(
            balances,
            session,
            caller,
            amount,
            |e| &mut e.key_a,
            "deposit:key-escrow",
        )?;
        let expiry = height + key_deadline;
        session.key_contract = Some(EscrowContract {
            amount,
            installed_at: height,
            expiry,
        });
        session.stage_expiry = expiry;
        Ok(format!("key contract armed, expires at height {expiry}"))
    }

    // ---- SC-N-Key: key reveal -------------------------------------------

    /// Notifier reveals the symmetric key. The contract decrypts the
    /// recorded payload, checks the commitment opening and the consistency
    /// of the revealed ciphertext with the proven KEM component, and pays
    /// the key escrow to the notifier on success. A hash mismatch
    /// terminates the session with all escrows refunded.
    pub fn record_key(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        key: SymKey,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::Generated)?;
        if session.notifier_account.as_deref() != Some(caller) {
            return Err(ContractError::UnauthorizedCaller);
        }
        let key_contract = session
            .key_contract
            .ok_or(ContractError::WrongState("Generated"))?;
        if height > key_contract.expiry {
            return Err(ContractError::PastDeadline);
        }

        let revealed = crypto::sym_decrypt(&key, &session.recorded.ciphertext2);
        let commitment = session
            .recorded
            .commitment
            .expect("generated session has commitment");
        let opening = session
            .recorded
            .opening
            .expect("generated session has opening");
        let hash_ok = crypto::verify_commit(&commitment, &revealed, &opening);
        let kem_ok = match DetCiphertext::from_bytes(&revealed) {
            Ok(ct) => Some(ct.kem) == session.recorded.kem,
            Err(_) => false,
        };
        if !hash_ok || !kem_ok {
            session.state = SessionState::Aborted;
            Self::refund_all(balances, session, "key fails hash check");
            return Ok("aborted: revealed data fails the hash check; all escrows refunded".into());
        }

        let amount = key_contract.amount;
        let notifier = caller.to_string();
        Self::payout(
            balances,
            session,
            |e| &mut e.key_a,
            &notifier,
            amount,
            "payout:key-escrow->notifier",
        );
        session.recorded.key = Some(key);
        session.recorded.revealed = Some(revealed);
        session.state = SessionState::KeyPosted;
        session.stage_expiry = session.sign_contract.expect("interlock installed").expiry;
        Ok("key accepted: escrow transferred to notifier".into())
    }

    // ---- SC-R-Sign: receipt signature ------------------------------------

    /// Recipient submits its receipt signature over the revealed ciphertext.
    /// An invalid signature is rejected without effect (the recipient can
    /// retry until the deadline); a valid one returns the sign escrow to the
    /// recipient, making the interlock net zero.
    pub fn record_signature(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        sig: Signature,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::KeyPosted)?;
        if session.recipient_account != caller {
            return Err(ContractError::UnauthorizedCaller);
        }
        let sign_contract = session
            .sign_contract
            .expect("key posted implies sign contract");
        if height > sign_contract.expiry {
            return Err(ContractError::PastDeadline);
        }
        let revealed = session
            .recorded
            .revealed
            .clone()
            .expect("key posted implies reveal");
        if !Crypto::verify_sig(&session.recipient_pk, &revealed, &sig) {
            return Err(ContractError::BadSignature);
        }
        let amount = sign_contract.amount;
        let recipient = session.recipient_account.clone();
        Self::payout(
            balances,
            session,
            |e| &mut e.sign_a,
            &recipient,
            amount,
            "payout:sign-escrow->recipient",
        );
        session.recorded.receipt_sig = Some(sig);
        session.state = SessionState::SignaturePosted;
        // The notifier should claim within one challenge-window length.
        session.stage_expiry = height + session.deadlines.challenge_timeout;
        Ok("receipt signature accepted: escrow returned, interlock settled".into())
    }

    // ---- SC-Reward: claim, challenge, finalize ---------------------------

    /// Notifier submits the receipt signature as evidence and opens the
    /// challenge window.
    pub fn claim_reward(
        &mut self,
        height: u64,
        caller: &str,
        session_id: u64,
        sig: Signature,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::SignaturePosted)?;
        if session.notifier_account.as_deref() != Some(caller) {
            return Err(ContractError::UnauthorizedCaller);
        }
        if session.recorded.receipt_sig.as_ref() != Some(&sig) {
            return Err(ContractError::SignatureMismatch);
        }
        let deadline = height + session.deadlines.challenge_timeout;
        session.state = SessionState::ChallengeWindow;
        session.challenge_deadline = Some(deadline);
        session.stage_expiry = deadline;
        Ok(format!(
            "reward claimed: challenge window open until height {deadline}"
        ))
    }

    /// Recipient disputes the delivered data by publishing its decryption.
    ///
    /// The contract first re-encrypts the claimed plaintext under the
    /// recipient key: a mismatch proves nothing about the notifier (the
    /// deterministic scheme binds honest plaintexts to their ciphertext) and
    /// the challenge is rejected outright. When the binding holds, the
    /// content checks run; any failure upholds the challenge, penalizes the
    /// notifier, and refunds the reward escrow.
    pub fn challenge(
        &mut self,
        balances: &mut Balances,
        height: u64,
        caller: &str,
        session_id: u64,
        dec_eld: Vec<u8>,
        attestation: Option<VrsAttestation>,
    ) -> Result<String, ContractError> {
        let registry = self.registry.clone();
        let threshold = self.quorum_threshold;
        let session = self.session_mut(session_id)?;
        session.require_state(SessionState::ChallengeWindow)?;
        if session.recipient_account != caller {
            return Err(ContractError::UnauthorizedCaller);
        }
        let deadline = session
            .challenge_deadline
            .expect("challenge window has deadline");
        if height > deadline || session.challenge.is_some() {
            return Err(ContractError::WindowClosed);
        }

        // Deferred well-formedness check: if the generation-stage proof was
        // never verified, verify it now; failure is the notifier's fault.
        if !session.proof_checked {
            session.proof_checked = true;
            let kem = session.recorded.kem.expect("generated session has kem");
            let commitment = session
                .recorded
                .commitment
                .expect("generated session has commitment");
            let proof = session
                .recorded
                .proof
                .clone()
                .expect("generated session has proof");
            if !Crypto::verify_enc_proof(&session.recipient_pk, &kem, &commitment, &proof) {
                let reason = "deferred well-formedness proof rejected".to_string();
                session.challenge = Some(ChallengeRecord {
                    dec_eld,
                    verdict: Verdict::Upheld,
                    reason: reason.clone(),
                });
                Self::penalize(balances, session);
                return Ok(format!("challenge upheld: {reason}; notifier penalized"));
            }
        }

        let revealed = session
            .recorded
            .revealed
            .clone()
            .expect("challenge implies reveal");
        let binding_ok = !dec_eld.is_empty()
            && Crypto::det_encrypt(&session.recipient_pk, &dec_eld)
                .map(|ct| ct.to_bytes() == revealed)
                .unwrap_or(false);
        if !binding_ok {
            return Ok(
                "challenge rejected: re-encryption of the claimed plaintext does not reproduce the delivered ciphertext"
                    .into(),
            );
        }

        let failure = Self::validate_content(
            &registry,
            threshold,
            session,
            &dec_eld,
            attestation.as_ref(),
        );
        match failure {
            Some(reason) => {
                session.challenge = Some(ChallengeRecord {
                    dec_eld,
                    verdict: Verdict::Upheld,
                    reason: reason.clone(),
                });
                Self::penalize(balances, session);
                Ok(format!("challenge upheld: {reason}; notifier penalized"))
            }
            None => {
                session.challenge = Some(ChallengeRecord {
                    dec_eld,
                    verdict: Verdict::Rejected,
                    reason: "delivered data validates".into(),
                });
                Ok("challenge rejected: delivered data validates; window continues".into())
            }
        }
    }

    /// Returns the first failed content check, if any.
    fn validate_content(
        registry: &BTreeMap<MemberId, GroupElement>,
        threshold: usize,
        session: &Session,
        dec_eld: &[u8],
        attestation: Option<&VrsAttestation>,
    ) -> Option<String> {
        let eld = match EndorsedLedgerData::from_bytes(dec_eld) {
            Ok(eld) => eld,
            Err(_) => return Some("payload is not well-formed endorsed ledger data".into()),
        };
        if eld.data.key != session.object_key {
            return Some(format!(
                "payload is for object '{}', session notified '{}'",
                eld.data.key, session.object_key
            ));
        }
        if Some(eld.data.version) != session.version {
            return Some(format!(
                "payload carries version {}, session notified version {:?}",
                eld.data.version, session.version
            ));
        }
        if !verify_endorsements_with(registry, threshold, &eld) {
            return Some("endorsement signatures fail quorum verification".into());
        }
        let mut endorsers: Vec<&MemberId> = eld.endorsements.iter().map(|(id, _)| id).collect();
        let mut authorized: Vec<&MemberId> = session
            .recorded
            .auth_sigs
            .iter()
            .map(|(id, _)| id)
            .collect();
        endorsers.sort();
        endorsers.dedup();
        authorized.sort();
        authorized.dedup();
        if endorsers != authorized {
            return Some("endorser set does not match the authorization signer set".into());
        }
        if let Some(att) = attestation {
            let att_ok = verify_vrs_attestation(registry, threshold, att)
                && att.object_key == session.object_key
                && att.requestor_pk == session.recipient_pk;
            if att_ok && eld.data.version < att.head_version {
                return Some(format!(
                    "stale version: delivered {}, attested head is {}",
                    eld.data.version, att.head_version
                ));
            }
        }
        None
    }

    fn penalize(balances: &mut Balances, session: &mut Session) {
        let reward = session.escrow.reward;
        let penalty = session.escrow.penalty;
        let recipient = session.recipient_account.clone();
        if reward > 0 {
            Self::payout(
                balances,
                session,
                |e| &mut e.reward,
                &recipient,
                reward,
                "refund:reward (challenge upheld)",
            );
        }
        if penalty > 0 {
            Self::payout(
                balances,
                session,
                |e| &mut e.penalty,
                &recipient,
                penalty,
                "payout:penalty->recipient",
            );
        }
        session.state = SessionState::Penalized;
    }

    /// Close the challenge window: re-verify the receipt signature and pay
    /// the reward split. Callable explicitly once the window has passed;
    /// the block clock also triggers it automatically.
    pub fn finalize(
        &mut self,
        balances: &mut Balances,
        height: u64,
        session_id: u64,
    ) -> Result<String, ContractError> {
        let session = self.session_mut(session_id)?;
        if matches!(&session.challenge, Some(c) if c.verdict == Verdict::Upheld) {
            return Err(ContractError::ChallengeUpheld);
        }
        session.require_state(SessionState::ChallengeWindow)?;
        let deadline = session
            .challenge_deadline
            .expect("challenge window has deadline");
        if height <= deadline {
            return Err(ContractError::WrongState("ChallengeWindow"));
        }
        Ok(Self::finalize_inner(balances, session))
    }

    fn finalize_inner(balances: &mut Balances, session: &mut Session) -> String {
        // Deferred proof check, in case the window closed with no challenge.
        if !session.proof_checked {
            session.proof_checked = true;
            let kem = session.recorded.kem.expect("generated session has kem");
            let commitment = session
                .recorded
                .commitment
                .expect("generated session has commitment");
            let proof = session
                .recorded
                .proof
                .clone()
                .expect("generated session has proof");
            if !Crypto::verify_enc_proof(&session.recipient_pk, &kem, &commitment, &proof) {
                Self::penalize(balances, session);
                return "finalization found the deferred proof invalid: notifier penalized".into();
            }
        }
        let receipt_ok = match (&session.recorded.receipt_sig, &session.recorded.revealed) {
            (Some(sig), Some(revealed)) => Crypto::verify_sig(&session.recipient_pk, revealed, sig),
            _ => false,
        };
        if !receipt_ok {
            // Unreachable through the state machine (the receipt was
            // verified when recorded); kept as a contract-side guard.
            session.state = SessionState::Aborted;
            Self::refund_all(
                balances,
                session,
                "receipt signature failed final verification",
            );
            return "aborted: receipt signature failed final verification".into();
        }

        let econ = session.econ;
        let members = session.member_accounts.clone();
        let notifier = session
            .notifier_account
            .clone()
            .expect("rewarded session has notifier");
        let share = econ.reward_a / members.len() as u64;
        let remainder = econ.reward_a - share * members.len() as u64;
        for account in &members {
            if share > 0 {
                Self::payout(
                    balances,
                    session,
                    |e| &mut e.reward,
                    account,
                    share,
                    "payout:reward-share",
                );
            }
        }
        Self::payout(
            balances,
            session,
            |e| &mut e.reward,
            &notifier,
            remainder + econ.bonus,
            "payout:notifier-bonus",
        );
        let penalty = session.escrow.penalty;
        if penalty > 0 {
            Self::payout(
                balances,
                session,
                |e| &mut e.penalty,
                &notifier,
                penalty,
                "refund:penalty (honest)",
            );
        }
        session.state = SessionState::Rewarded;
        "reward distributed: session rewarded".into()
    }

    // ---- block clock ----------------------------------------------------

    /// Execute the timeout branch of every session whose current deadline
    /// lies strictly more than one block in the past. Sessions are
    /// processed in creation order; returns `(session, description)` pairs
    /// for the block log.
    pub fn process_timeouts(&mut self, balances: &mut Balances, height: u64) -> Vec<(u64, String)> {
        let mut events = Vec::new();
        for idx in 0..self.sessions.len() {
            let session = &mut self.sessions[idx];
            if session.state.is_terminal() || height <= session.stage_expiry + 1 {
                continue;
            }
            let info = match session.state {
                SessionState::Init => {
                    session.state = SessionState::Refunded;
                    Self::refund_all(balances, session, "no generation before deadline");
                    "timeout: session expired in Init; reward refunded".to_string()
                }
                SessionState::Generated => {
                    session.state = SessionState::Refunded;
                    Self::refund_all(balances, session, "interlock never completed");
                    match (&session.sign_contract, &session.key_contract) {
                        (None, _) => {
                            "timeout: sign contract never installed; deposits refunded".to_string()
                        }
                        (Some(_), None) => {
                            "timeout: key contract never installed; deposits refunded".to_string()
                        }
                        (Some(_), Some(_)) => {
                            "timeout: no key before deadline; protocol terminates with full refunds"
                                .to_string()
                        }
                    }
                }
                SessionState::KeyPosted => {
                    // Forfeiture: the recipient took the key transfer but
                    // never produced a valid receipt signature.
                    session.state = SessionState::Aborted;
                    Self::refund_all(balances, session, "receipt signature withheld");
                    "timeout: no valid receipt signature; recipient forfeits the interlock escrow"
                        .to_string()
                }
                SessionState::SignaturePosted => {
                    session.state = SessionState::Refunded;
                    Self::refund_all(balances, session, "reward never claimed");
                    "timeout: reward never claimed; deposits refunded".to_string()
                }
                SessionState::ChallengeWindow => {
                    format!(
                        "timeout: challenge window closed; {}",
                        Self::finalize_inner(balances, session)
                    )
                }
                _ => unreachable!("terminal states filtered above"),
            };
            events.push((session.id, info));
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{self, derive_bytes};
    use crate::privbc::{PrivateChain, Role};
    use crate::pubbc::{
        auth_sigs_hex, proof_hex, signature_hex, sym_key_hex, Account, ContractCall, PublicChain,
    };
    use crate::{Crypto, KeyPair};
    use std::collections::BTreeMap;

    const KEY: &str = "deed-42";

    fn econ() -> EconParams {
        EconParams {
            reward_a: 10,
            escrow_a: 100,
            penalty: 50,
            bonus: 3,
        }
    }

    fn deadlines() -> DeadlineParams {
        DeadlineParams {
            t_key: 10,
            t_sig: 40,
            challenge_timeout: 20,
            min_gap: 20,
        }
    }

    struct Fixture {
        net: PrivateChain,
        chain: PublicChain,
        recipient: KeyPair,
        initial: BTreeMap<String, u64>,
        session: u64,
    }

    impl Fixture {
        fn delta(&self, account: &str) -> i64 {
            self.chain.balance(account) as i64 - self.initial[account] as i64
        }

        fn state(&self) -> SessionState {
            self.chain.etlc.session(self.session).unwrap().state
        }

        fn tick_until_settled(&mut self) {
            for _ in 0..200 {
                if self
                    .chain
                    .etlc
                    .sessions
                    .iter()
                    .all(|s| s.state.is_terminal())
                {
                    return;
                }
                self.chain.tick();
            }
            panic!("sessions did not settle");
        }
    }

    fn member_regs(net: &PrivateChain) -> Vec<MemberReg> {
        net.members()
            .map(|m| MemberReg {
                member_id: m.id.clone(),
                pk_hex: crate::point_hex(&m.keypair.pk),
                account: m.pubbc_account.clone(),
            })
            .collect()
    }

    fn setup() -> Fixture {
        setup_with(econ(), false)
    }

    fn setup_with(econ: EconParams, defer: bool) -> Fixture {
        let mut net = PrivateChain::new(
            &[21u8; 32],
            &[
                ("m1".into(), Role::Peer, "m1".into()),
                ("m2".into(), Role::Peer, "m2".into()),
                ("m3".into(), Role::Peer, "m3".into()),
            ],
            2,
        );
        net.defer_generation_validation = defer;
        let peers = net.peer_ids();
        net.update_ledger_data(&"m1".into(), KEY, b"owner=alice", &peers)
            .unwrap();
        let recipient = Crypto::keygen(&derive_bytes(&[21u8; 32], "recipient:r1"));
        net.permit_access(&recipient.pk, KEY, &peers).unwrap();

        let mut accounts: Vec<Account> = net
            .members()
            .map(|m| Account {
                id: m.pubbc_account.clone(),
                pk: m.keypair.pk,
                balance: 1000,
            })
            .collect();
        accounts.push(Account {
            id: "r1".into(),
            pk: recipient.pk,
            balance: 1000,
        });
        let mut chain = PublicChain::new(accounts, defer);
        let initial = chain.balances();

        let receipt = chain.submit(
            "r1",
            &ContractCall::RecordPubKey {
                recipient_pk: crate::point_hex(&recipient.pk),
                object_key: KEY.into(),
                members: member_regs(&net),
                quorum_threshold: 2,
                econ,
                deadlines: deadlines(),
            },
        );
        assert!(receipt.ok, "{}", receipt.info);
        Fixture {
            net,
            chain,
            recipient,
            initial,
            session: 0,
        }
    }

    struct GenPayload {
        call: ContractCall,
        key: SymKey,
        revealed: Vec<u8>,
        dec_eld: Vec<u8>,
    }

    /// Build an honest generation payload for the current head via the
    /// private chain, then wrap it for the public contract.
    fn honest_generation(f: &mut Fixture, notifier: &str) -> GenPayload {
        let eld_bytes = f.net.head(KEY).unwrap().to_bytes();
        let version = f.net.head(KEY).unwrap().data.version;
        let ct = Crypto::det_encrypt(&f.recipient.pk, &eld_bytes).unwrap();
        let commitment = crypto::commit(&ct.to_bytes(), derive_bytes(b"fixture", "opening"));
        let proof = Crypto::prove_enc(&f.recipient.pk, &eld_bytes, &ct, &commitment.value).unwrap();
        let peers = f.net.peer_ids();
        let record = f
            .net
            .record_enc_data_hash_proof(
                &notifier.to_string(),
                &f.recipient.pk,
                KEY,
                version,
                &ct,
                &commitment,
                &proof,
                &peers,
            )
            .unwrap();
        let sym = SymKey::derive(b"fixture", "session-key");
        let ciphertext2 = crypto::sym_encrypt(&sym, &ct.to_bytes());
        let call = ContractCall::RecordCiphertextHashProof {
            session: f.session,
            version,
            kem: crate::point_hex(&ct.kem),
            ciphertext2: hex::encode(&ciphertext2),
            commitment: commitment.value.to_hex(),
            opening: hex::encode(commitment.opening),
            proof: proof_hex(&proof),
            auth_sigs: auth_sigs_hex(&record.auth_sigs),
        };
        GenPayload {
            call,
            key: sym,
            revealed: ct.to_bytes(),
            dec_eld: eld_bytes,
        }
    }

    fn run_interlock(f: &mut Fixture, gen: &GenPayload, notifier: &str) {
        assert!(f.chain.submit(notifier, &gen.call).ok);
        assert!(
            f.chain
                .submit(
                    notifier,
                    &ContractCall::InstallSignContract {
                        session: f.session,
                        amount: 100,
                        sig_deadline: 40,
                    }
                )
                .ok
        );
        assert!(
            f.chain
                .submit(
                    "r1",
                    &ContractCall::InstallKeyContract {
                        session: f.session,
                        amount: 100,
                        key_deadline: 10,
                    }
                )
                .ok
        );
        assert!(
            f.chain
                .submit(
                    notifier,
                    &ContractCall::RecordKey {
                        session: f.session,
                        key: sym_key_hex(&gen.key),
                    }
                )
                .ok
        );
    }

    fn receipt_sig(f: &Fixture, gen: &GenPayload) -> Signature {
        Crypto::sign(&f.recipient.sk, &gen.revealed)
    }

    #[test]
    fn honest_session_reaches_rewarded_with_exact_settlement() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_interlock(&mut f, &gen, "m1");
        let sig = receipt_sig(&f, &gen);
        assert!(
            f.chain
                .submit(
                    "r1",
                    &ContractCall::RecordReceiptSignature {
                        session: 0,
                        signature: signature_hex(&sig),
                    }
                )
                .ok
        );
        assert!(
            f.chain
                .submit(
                    "m1",
                    &ContractCall::ClaimReward {
                        session: 0,
                        signature: signature_hex(&sig)
                    }
                )
                .ok
        );
        assert_eq!(f.state(), SessionState::ChallengeWindow);
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Rewarded);
        // a=10 over 3 members: share 3 each, remainder 1 + bonus 3 to the notifier.
        assert_eq!(f.delta("r1"), -13);
        assert_eq!(f.delta("m1"), 3 + 1 + 3);
        assert_eq!(f.delta("m2"), 3);
        assert_eq!(f.delta("m3"), 3);
        assert_eq!(f.chain.etlc.session(0).unwrap().escrow.total(), 0);
        assert_eq!(f.chain.total_supply(), f.chain.genesis_supply());
    }

    #[test]
    fn reward_split_oracle_three_members_a9_bonus3() {
        let mut f = setup_with(
            EconParams {
                reward_a: 9,
                escrow_a: 100,
                penalty: 50,
                bonus: 3,
            },
            false,
        );
        let gen = honest_generation(&mut f, "m1");
        run_interlock(&mut f, &gen, "m1");
        let sig = receipt_sig(&f, &gen);
        f.chain.submit(
            "r1",
            &ContractCall::RecordReceiptSignature {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        f.chain.submit(
            "m1",
            &ContractCall::ClaimReward {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        f.tick_until_settled();
        // Independent split computation: 9 = 3*3 with remainder 0.
        let (a, n) = (9u64, 3u64);
        let share = a / n;
        let remainder = a - share * n;
        assert_eq!((share, remainder), (3, 0));
        assert_eq!(f.delta("m2"), 3);
        assert_eq!(f.delta("m3"), 3);
        assert_eq!(f.delta("m1"), 3 + 3); // share + bonus, no remainder
        assert_eq!(f.delta("r1"), -12);
    }

    #[test]
    fn duplicate_bootstrap_is_rejected_while_session_lives() {
        let mut f = setup();
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::RecordPubKey {
                recipient_pk: crate::point_hex(&f.recipient.pk),
                object_key: KEY.into(),
                members: member_regs(&f.net),
                quorum_threshold: 2,
                econ: econ(),
                deadlines: deadlines(),
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("already exists"), "{}", receipt.info);
    }

    #[test]
    fn bootstrap_deposit_below_reward_is_insufficient() {
        let mut net = PrivateChain::new(
            &[22u8; 32],
            &[
                ("m1".into(), Role::Peer, "m1".into()),
                ("m2".into(), Role::Peer, "m2".into()),
            ],
            2,
        );
        let peers = net.peer_ids();
        net.update_ledger_data(&"m1".into(), KEY, b"v", &peers)
            .unwrap();
        let recipient = Crypto::keygen(&[1u8; 32]);
        let accounts = vec![Account {
            id: "poor".into(),
            pk: recipient.pk,
            balance: 5,
        }];
        let mut chain = PublicChain::new(accounts, false);
        let receipt = chain.submit(
            "poor",
            &ContractCall::RecordPubKey {
                recipient_pk: crate::point_hex(&recipient.pk),
                object_key: KEY.into(),
                members: member_regs(&net),
                quorum_threshold: 2,
                econ: econ(),
                deadlines: deadlines(),
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("insufficient funds"));
        assert_eq!(chain.balance("poor"), 5);
    }

    #[test]
    fn generation_with_dropped_auth_sig_fails_quorum() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        let call = match gen.call {
            ContractCall::RecordCiphertextHashProof {
                session,
                version,
                kem,
                ciphertext2,
                commitment,
                opening,
                proof,
                auth_sigs,
            } => {
                // Keep a single signature out of the 2-of-3 requirement.
                ContractCall::RecordCiphertextHashProof {
                    session,
                    version,
                    kem,
                    ciphertext2,
                    commitment,
                    opening,
                    proof,
                    auth_sigs: auth_sigs[..1].to_vec(),
                }
            }
            _ => unreachable!(),
        };
        let receipt = f.chain.submit("m1", &call);
        assert!(!receipt.ok);
        assert!(
            receipt.info.contains("authorization signatures"),
            "{}",
            receipt.info
        );
        assert_eq!(f.state(), SessionState::Init);
    }

    #[test]
    fn generation_with_wrong_recipient_proof_aborts_and_refunds() {
        let mut f = setup();
        let eld_bytes = f.net.head(KEY).unwrap().to_bytes();
        let honest_ct = Crypto::det_encrypt(&f.recipient.pk, &eld_bytes).unwrap();
        let commitment = crypto::commit(&honest_ct.to_bytes(), [3u8; 32]);
        // Auth sigs over the honest commitment, obtained legitimately.
        let honest_proof =
            Crypto::prove_enc(&f.recipient.pk, &eld_bytes, &honest_ct, &commitment.value).unwrap();
        let peers = f.net.peer_ids();
        let record = f
            .net
            .record_enc_data_hash_proof(
                &"m1".to_string(),
                &f.recipient.pk,
                KEY,
                0,
                &honest_ct,
                &crypto::Commitment {
                    value: commitment.value,
                    opening: commitment.opening,
                },
                &honest_proof,
                &peers,
            )
            .unwrap();
        // The posted ciphertext and proof target a different key entirely.
        let attacker = Crypto::keygen(&[77u8; 32]);
        let wrong_ct = Crypto::det_encrypt(&attacker.pk, &eld_bytes).unwrap();
        let wrong_proof =
            Crypto::prove_enc(&attacker.pk, &eld_bytes, &wrong_ct, &commitment.value).unwrap();
        let sym = SymKey::derive(b"x", "k");
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::RecordCiphertextHashProof {
                session: 0,
                version: 0,
                kem: crate::point_hex(&wrong_ct.kem),
                ciphertext2: hex::encode(crypto::sym_encrypt(&sym, &wrong_ct.to_bytes())),
                commitment: commitment.value.to_hex(),
                opening: hex::encode(commitment.opening),
                proof: proof_hex(&wrong_proof),
                auth_sigs: auth_sigs_hex(&record.auth_sigs),
            },
        );
        assert!(receipt.ok);
        assert!(receipt.info.contains("aborted"), "{}", receipt.info);
        assert_eq!(f.state(), SessionState::Aborted);
        // Recipient got its deposit back; nobody else moved.
        assert_eq!(f.delta("r1"), 0);
        assert_eq!(f.delta("m1"), 0);
    }

    #[test]
    fn second_notifier_for_the_same_version_is_first_come_first_served() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        assert_eq!(f.state(), SessionState::Generated);

        let racing = honest_generation(&mut f, "m2");
        let receipt = f.chain.submit("m2", &racing.call);
        assert!(!receipt.ok);
        assert!(receipt.info.contains("already exists"), "{}", receipt.info);
    }

    #[test]
    fn sign_contract_deadline_gap_is_enforced() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 11,
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("deadline"), "{}", receipt.info);
    }

    #[test]
    fn poor_notifier_cannot_install_sign_contract() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        // Drain m1 below A, keeping enough obviously spent funds around.
        let drain = f.chain.balance("m1") - 40;
        f.chain.transfer("m1", "m2", drain).unwrap();
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("insufficient funds"));
    }

    #[test]
    fn poor_recipient_cannot_install_key_contract() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        // r1 already escrowed 13; drop the rest below A.
        let drain = f.chain.balance("r1") - 60;
        f.chain.transfer("r1", "m3", drain).unwrap();
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("insufficient funds"));
        assert_eq!(f.chain.balance("r1"), 60);
    }

    #[test]
    fn key_contract_requires_sign_contract_first() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("sign contract"), "{}", receipt.info);
    }

    #[test]
    fn wrong_key_aborts_with_all_escrows_refunded() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        let wrong = SymKey::derive(b"not the key", "k");
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::RecordKey {
                session: 0,
                key: sym_key_hex(&wrong),
            },
        );
        assert!(receipt.ok);
        assert!(receipt.info.contains("aborted"), "{}", receipt.info);
        assert_eq!(f.state(), SessionState::Aborted);
        for account in ["r1", "m1", "m2", "m3"] {
            assert_eq!(
                f.delta(account),
                0,
                "account {account} should be made whole"
            );
        }
        assert_eq!(f.chain.etlc.session(0).unwrap().escrow.total(), 0);
    }

    #[test]
    fn key_posted_past_deadline_is_rejected_then_refunded_by_tick() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        // Key deadline is height 10; at height 11 the submission is late.
        for _ in 0..11 {
            f.chain.tick();
        }
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::RecordKey {
                session: 0,
                key: sym_key_hex(&gen.key),
            },
        );
        assert!(!receipt.ok);
        assert!(
            receipt.info.contains("deadline has passed"),
            "{}",
            receipt.info
        );
        assert_eq!(f.state(), SessionState::Generated);
        // The following tick runs the timeout branch and unwinds everything.
        f.chain.tick();
        assert_eq!(f.state(), SessionState::Refunded);
        for account in ["r1", "m1"] {
            assert_eq!(f.delta(account), 0);
        }
    }

    #[test]
    fn withheld_signature_forfeits_the_interlock_escrow() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_interlock(&mut f, &gen, "m1");
        assert_eq!(f.state(), SessionState::KeyPosted);
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Aborted);
        // The recipient paid A to the notifier and never recovered it.
        assert_eq!(f.delta("r1"), -100);
        assert_eq!(f.delta("m1"), 100);
        assert_eq!(f.delta("m2"), 0);
    }

    #[test]
    fn invalid_receipt_signature_is_rejected_without_state_change() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_interlock(&mut f, &gen, "m1");
        let other = Crypto::keygen(&[50u8; 32]);
        let bad = Crypto::sign(&other.sk, &gen.revealed);
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::RecordReceiptSignature {
                session: 0,
                signature: signature_hex(&bad),
            },
        );
        assert!(!receipt.ok);
        assert!(receipt.info.contains("signature does not verify"));
        assert_eq!(f.state(), SessionState::KeyPosted);
        // A valid retry still lands.
        let good = receipt_sig(&f, &gen);
        assert!(
            f.chain
                .submit(
                    "r1",
                    &ContractCall::RecordReceiptSignature {
                        session: 0,
                        signature: signature_hex(&good)
                    }
                )
                .ok
        );
        assert_eq!(f.state(), SessionState::SignaturePosted);
        assert_eq!(f.delta("r1"), -13); // only the reward deposit remains out
    }

    #[test]
    fn claim_requires_the_recorded_receipt() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        let premature = f.chain.submit(
            "m1",
            &ContractCall::ClaimReward {
                session: 0,
                signature: signature_hex(&Crypto::sign(&f.recipient.sk, b"x")),
            },
        );
        assert!(!premature.ok);
        assert!(premature.info.contains("not valid in state"));

        run_interlock(&mut f, &gen, "m1");
        let sig = receipt_sig(&f, &gen);
        f.chain.submit(
            "r1",
            &ContractCall::RecordReceiptSignature {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        // One byte off the recorded receipt.
        let mut forged = sig.to_bytes();
        forged[10] ^= 1;
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::ClaimReward {
                session: 0,
                signature: hex::encode(&forged),
            },
        );
        assert!(!receipt.ok);
        assert!(
            receipt.info.contains("does not match") || receipt.info.contains("malformed"),
            "{}",
            receipt.info
        );
    }

    fn run_to_challenge_window(f: &mut Fixture, gen: &GenPayload) {
        run_interlock(f, gen, "m1");
        let sig = receipt_sig(f, gen);
        assert!(
            f.chain
                .submit(
                    "r1",
                    &ContractCall::RecordReceiptSignature {
                        session: f.session,
                        signature: signature_hex(&sig)
                    }
                )
                .ok
        );
        assert!(
            f.chain
                .submit(
                    "m1",
                    &ContractCall::ClaimReward {
                        session: f.session,
                        signature: signature_hex(&sig)
                    }
                )
                .ok
        );
    }

    #[test]
    fn fabricated_challenge_is_rejected_by_the_binding_check() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_to_challenge_window(&mut f, &gen);
        let fabricated = b"this is not the data that was delivered".to_vec();
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::Challenge {
                session: 0,
                dec_eld: hex::encode(&fabricated),
                attestation: None,
            },
        );
        assert!(receipt.ok);
        assert!(
            receipt.info.contains("challenge rejected"),
            "{}",
            receipt.info
        );
        assert_eq!(f.state(), SessionState::ChallengeWindow);
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Rewarded);
    }

    #[test]
    fn genuine_challenge_on_valid_data_is_rejected_and_reward_proceeds() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_to_challenge_window(&mut f, &gen);
        let (_, att) = f.net.vrs_query(&f.recipient.pk, KEY).unwrap();
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::Challenge {
                session: 0,
                dec_eld: hex::encode(&gen.dec_eld),
                attestation: Some(hex::encode(att.to_bytes())),
            },
        );
        assert!(receipt.ok);
        assert!(
            receipt.info.contains("delivered data validates"),
            "{}",
            receipt.info
        );
        // The one adjudicated challenge is spent.
        let again = f.chain.submit(
            "r1",
            &ContractCall::Challenge {
                session: 0,
                dec_eld: hex::encode(&gen.dec_eld),
                attestation: None,
            },
        );
        assert!(!again.ok);
        assert!(again.info.contains("window is closed"));
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Rewarded);
    }

    #[test]
    fn stale_delivery_is_upheld_and_penalized() {
        let mut f = setup();
        // Generation happens against version 0...
        let gen = honest_generation(&mut f, "m1");
        // ...and the ledger moves on before the notifier posts it.
        let peers = f.net.peer_ids();
        f.net
            .update_ledger_data(&"m2".into(), KEY, b"owner=bob", &peers)
            .unwrap();
        run_to_challenge_window(&mut f, &gen);
        let (_, att) = f.net.vrs_query(&f.recipient.pk, KEY).unwrap();
        assert_eq!(att.head_version, 1);
        let receipt = f.chain.submit(
            "r1",
            &ContractCall::Challenge {
                session: 0,
                dec_eld: hex::encode(&gen.dec_eld),
                attestation: Some(hex::encode(att.to_bytes())),
            },
        );
        assert!(receipt.ok);
        assert!(
            receipt.info.contains("challenge upheld"),
            "{}",
            receipt.info
        );
        assert!(receipt.info.contains("stale version"), "{}", receipt.info);
        assert_eq!(f.state(), SessionState::Penalized);
        assert_eq!(f.delta("m1"), -50, "notifier pays the penalty");
        assert_eq!(
            f.delta("r1"),
            50,
            "recipient is made whole plus the penalty"
        );
        assert_eq!(f.delta("m2"), 0);
        assert_eq!(f.delta("m3"), 0);
        // Finalize after an upheld challenge is refused.
        for _ in 0..25 {
            f.chain.tick();
        }
        let receipt = f.chain.submit("m1", &ContractCall::Finalize { session: 0 });
        assert!(!receipt.ok);
        assert!(
            receipt.info.contains("upheld challenge"),
            "{}",
            receipt.info
        );
    }

    #[test]
    fn finalize_before_the_window_closes_is_refused() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_to_challenge_window(&mut f, &gen);
        let receipt = f.chain.submit("m1", &ContractCall::Finalize { session: 0 });
        assert!(!receipt.ok);
        assert!(receipt.info.contains("not valid in state"));
        // Explicit finalize works once past the deadline, before any tick
        // processes the timeout branch.
        for _ in 0..21 {
            f.chain.tick();
        }
        let receipt = f.chain.submit("m1", &ContractCall::Finalize { session: 0 });
        assert!(receipt.ok, "{}", receipt.info);
        assert_eq!(f.state(), SessionState::Rewarded);
    }

    #[test]
    fn terminal_states_are_absorbing() {
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_to_challenge_window(&mut f, &gen);
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Rewarded);
        let ops: Vec<ContractCall> = vec![
            ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
            ContractCall::RecordKey {
                session: 0,
                key: sym_key_hex(&gen.key),
            },
            ContractCall::Finalize { session: 0 },
            ContractCall::Challenge {
                session: 0,
                dec_eld: hex::encode(&gen.dec_eld),
                attestation: None,
            },
        ];
        for call in ops {
            let receipt = f.chain.submit("m1", &call);
            assert!(!receipt.ok, "terminal session accepted {call:?}");
        }
    }

    #[test]
    fn abandonment_at_every_stage_resolves_with_zero_escrow() {
        // Stage 1: nothing after bootstrap.
        let mut f = setup();
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Refunded);
        assert_eq!(f.delta("r1"), 0);

        // Stage 2: generated, no sign contract.
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Refunded);
        assert_eq!(f.delta("m1"), 0);
        assert_eq!(f.delta("r1"), 0);

        // Stage 3: sign contract armed, no key contract.
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Refunded);
        assert_eq!(f.delta("m1"), 0);

        // Stage 4: both armed, key never posted.
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        assert!(f.chain.submit("m1", &gen.call).ok);
        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Refunded);
        assert_eq!(f.delta("m1"), 0);
        assert_eq!(f.delta("r1"), 0);

        // Stage 5: signature posted, reward never claimed.
        let mut f = setup();
        let gen = honest_generation(&mut f, "m1");
        run_interlock(&mut f, &gen, "m1");
        let sig = receipt_sig(&f, &gen);
        f.chain.submit(
            "r1",
            &ContractCall::RecordReceiptSignature {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Refunded);
        assert_eq!(f.delta("m1"), 0);
        assert_eq!(f.delta("r1"), 0);
    }

    #[test]
    fn deferred_proof_check_penalizes_wrong_recipient_encryption_at_the_end() {
        let mut f = setup_with(econ(), true);
        // Under deferred validation the private chain signs the commitment
        // blindly, so a wrong-key ciphertext sails through generation.
        let attacker = Crypto::keygen(&[88u8; 32]);
        let eld_bytes = f.net.head(KEY).unwrap().to_bytes();
        let wrong_ct = Crypto::det_encrypt(&attacker.pk, &eld_bytes).unwrap();
        let commitment = crypto::commit(&wrong_ct.to_bytes(), [4u8; 32]);
        let wrong_proof =
            Crypto::prove_enc(&attacker.pk, &eld_bytes, &wrong_ct, &commitment.value).unwrap();
        let peers = f.net.peer_ids();
        let record = f
            .net
            .record_enc_data_hash_proof(
                &"m1".to_string(),
                &f.recipient.pk,
                KEY,
                0,
                &wrong_ct,
                &commitment,
                &wrong_proof,
                &peers,
            )
            .unwrap();
        let sym = SymKey::derive(b"defer", "k");
        let receipt = f.chain.submit(
            "m1",
            &ContractCall::RecordCiphertextHashProof {
                session: 0,
                version: 0,
                kem: crate::point_hex(&wrong_ct.kem),
                ciphertext2: hex::encode(crypto::sym_encrypt(&sym, &wrong_ct.to_bytes())),
                commitment: commitment.value.to_hex(),
                opening: hex::encode(commitment.opening),
                proof: proof_hex(&wrong_proof),
                auth_sigs: auth_sigs_hex(&record.auth_sigs),
            },
        );
        assert!(receipt.ok, "{}", receipt.info);
        assert_eq!(f.state(), SessionState::Generated);

        f.chain.submit(
            "m1",
            &ContractCall::InstallSignContract {
                session: 0,
                amount: 100,
                sig_deadline: 40,
            },
        );
        f.chain.submit(
            "r1",
            &ContractCall::InstallKeyContract {
                session: 0,
                amount: 100,
                key_deadline: 10,
            },
        );
        assert!(
            f.chain
                .submit(
                    "m1",
                    &ContractCall::RecordKey {
                        session: 0,
                        key: sym_key_hex(&sym)
                    }
                )
                .ok
        );
        // The recipient cannot decrypt, but signing is still rational.
        let sig = Crypto::sign(&f.recipient.sk, &wrong_ct.to_bytes());
        f.chain.submit(
            "r1",
            &ContractCall::RecordReceiptSignature {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        f.chain.submit(
            "m1",
            &ContractCall::ClaimReward {
                session: 0,
                signature: signature_hex(&sig),
            },
        );
        // Deferred check bites at finalization.
        f.tick_until_settled();
        assert_eq!(f.state(), SessionState::Penalized);
        assert_eq!(f.delta("m1"), -50);
        assert_eq!(f.delta("r1"), 50);
    }
}
