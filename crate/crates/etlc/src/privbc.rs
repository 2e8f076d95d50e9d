//! Deterministic in-process model of the private blockchain: member
//! identities under a simulated membership issuer, a versioned endorsed
//! ledger behind a k-of-n endorsement quorum, the access-control contract,
//! and the verifiable read service (VRS).
//!
//! Consensus is modeled as the endorsement quorum itself: an operation
//! commits when enough distinct peers co-sign it. The ledger is
//! single-writer; every committed transaction is appended to an ordered
//! commit log so runs replay bit-identically.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::{self, Group};
use crate::wire::{Reader, WireError, Writer};
use crate::{
    Commitment, Crypto, DefaultGroup, DetCiphertext, Digest, EncProof, GroupElement, KeyPair,
    Signature,
};

/// Signing context prefixes. A signature over one kind of statement can
/// never be replayed as another kind.
mod ctx {
    pub const ENDORSE: &str = "etlc.ledger-endorse";
    pub const ACL_GRANT: &str = "etlc.acl-grant";
    pub const ACL_REVOKE: &str = "etlc.acl-revoke";
    pub const AUTH_GRANT: &str = "etlc.auth-grant";
    pub const VRS_HEAD: &str = "etlc.vrs-head";
    pub const MEMBER_CERT: &str = "etlc.member-cert";
}

pub type MemberId = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrivError {
    #[error("object key is not on the ledger")]
    UnknownObject,
    #[error("endorsement quorum not met: {got} of {need} required signers")]
    QuorumNotMet { got: usize, need: usize },
    #[error("no live access entry for this subject and object")]
    NoLiveEntry,
    #[error("author or signer is not a network member")]
    NotAMember,
    #[error("subject is not authorized for this object")]
    NotAuthorized,
    #[error("ciphertext corresponds to version {found}, head is {head}")]
    StaleVersion { found: u64, head: u64 },
    #[error("proof or ciphertext failed validation: {0}")]
    BadProof(&'static str),
    #[error("requestor has no read access to this object")]
    AccessDenied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Peer,
    Client,
}

/// A network member with its signing keys, its role, and the account it
/// holds on the public chain for reward settlement.
#[derive(Clone, Debug)]
pub struct Member {
    pub id: MemberId,
    pub keypair: KeyPair,
    pub role: Role,
    pub pubbc_account: String,
    /// Certificate from the simulated membership issuer over `(id, pk)`.
    pub cert: Signature,
}

/// A versioned key-value item on the ledger.
///
/// Wire layout: `str(key) || bytes(value) || u64(version)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerData {
    pub key: String,
    pub value: Vec<u8>,
    pub version: u64,
}

impl LedgerData {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    fn write(&self, w: &mut Writer) {
        w.put_str(&self.key);
        w.put_bytes(&self.value);
        w.put_u64(self.version);
    }

    fn read(r: &mut Reader) -> Result<Self, WireError> {
        Ok(Self {
            key: r.get_str()?,
            value: r.get_bytes()?,
            version: r.get_u64()?,
        })
    }
}

/// Ledger data packaged with the quorum endorsements that give it
/// extrinsic value.
///
/// Wire layout: `LedgerData || u32(count) || count * (str(member) || Signature)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndorsedLedgerData {
    pub data: LedgerData,
    pub endorsements: Vec<(MemberId, Signature)>,
}

impl EndorsedLedgerData {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.data.write(&mut w);
        w.put_u32(self.endorsements.len() as u32);
        for (id, sig) in &self.endorsements {
            w.put_str(id);
            sig.write(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let data = LedgerData::read(&mut r)?;
        let count = r.get_u32()? as usize;
        if count > 4096 {
            return Err(WireError::BadLength(count));
        }
        let mut endorsements = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.get_str()?;
            let sig = Signature::read(&mut r)?;
            endorsements.push((id, sig));
        }
        r.expect_end()?;
        Ok(Self { data, endorsements })
    }

    /// Message each endorser signed.
    pub fn endorsement_message(data: &LedgerData) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_str(ctx::ENDORSE);
        data.write(&mut w);
        w.finish()
    }
}

/// One row of the access-control list maintained by the ACL contract.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessControlEntry {
    pub subject_pk: GroupElement,
    pub object_key: String,
    pub granted_at_version: u64,
    pub revoked: bool,
}

/// Everything the generation stage commits on the private ledger for one
/// notification: the commitment to the encrypted payload, its opening, the
/// well-formedness proof, and the quorum signatures authorizing the
/// recipient (the authorization evidence forwarded to the public chain).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationRecord {
    pub object_key: String,
    pub version: u64,
    pub recipient_pk: GroupElement,
    pub commitment: Digest,
    pub opening: [u8; 32],
    pub proof: EncProof,
    pub auth_sigs: Vec<(MemberId, Signature)>,
}

/// Message signed by each peer validating a generation record.
pub fn auth_grant_message(
    object_key: &str,
    version: u64,
    commitment: &Digest,
    recipient_pk: &GroupElement,
) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str(ctx::AUTH_GRANT);
    w.put_str(object_key);
    w.put_u64(version);
    w.put_raw(commitment.as_bytes());
    w.put_bytes(&DefaultGroup::point_bytes(recipient_pk));
    w.finish()
}

/// Quorum-signed statement of the current head version of an object,
/// returned by the VRS and usable as freshness evidence elsewhere.
///
/// Wire layout: `str(key) || u64(head) || point(requestor) || u32(count) ||
/// count * (str(member) || Signature)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VrsAttestation {
    pub object_key: String,
    pub head_version: u64,
    pub requestor_pk: GroupElement,
    pub signatures: Vec<(MemberId, Signature)>,
}

impl VrsAttestation {
    pub fn statement(object_key: &str, head_version: u64, requestor_pk: &GroupElement) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_str(ctx::VRS_HEAD);
        w.put_str(object_key);
        w.put_u64(head_version);
        w.put_bytes(&DefaultGroup::point_bytes(requestor_pk));
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_str(&self.object_key);
        w.put_u64(self.head_version);
        w.put_bytes(&DefaultGroup::point_bytes(&self.requestor_pk));
        w.put_u32(self.signatures.len() as u32);
        for (id, sig) in &self.signatures {
            w.put_str(id);
            sig.write(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let object_key = r.get_str()?;
        let head_version = r.get_u64()?;
        let requestor_pk = crate::DefaultGroup::point_from_bytes(&r.get_bytes()?)
            .ok_or(WireError::BadElement("requestor pk"))?;
        let count = r.get_u32()? as usize;
        if count > 4096 {
            return Err(WireError::BadLength(count));
        }
        let mut signatures = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.get_str()?;
            signatures.push((id, Signature::read(&mut r)?));
        }
        r.expect_end()?;
        Ok(Self {
            object_key,
            head_version,
            requestor_pk,
            signatures,
        })
    }
}

/// An entry in the ordered commit log, the private half of a run transcript.
#[derive(Clone, Debug)]
pub struct PrivCommit {
    pub index: u64,
    pub kind: String,
    pub object_key: String,
    pub version: Option<u64>,
    pub payload_hex: String,
}

/// Notification emitted by the update hook: fires synchronously on commit
/// for every live access grant on the updated key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateNotice {
    pub object_key: String,
    pub version: u64,
    pub subscriber_pks: Vec<GroupElement>,
}

/// The private chain state. Single-writer: every mutating call is one
/// ordered transaction.
pub struct PrivateChain {
    issuer: KeyPair,
    members: BTreeMap<MemberId, Member>,
    quorum_threshold: usize,
    ledger: BTreeMap<String, Vec<EndorsedLedgerData>>,
    acl: Vec<AccessControlEntry>,
    generation_records: Vec<GenerationRecord>,
    commits: Vec<PrivCommit>,
    notices: Vec<UpdateNotice>,
    /// When set, peers co-sign generation records without re-deriving the
    /// ciphertext or checking the proof; the public chain's deferred proof
    /// check becomes the only line of defense.
    pub defer_generation_validation: bool,
}

impl PrivateChain {
    /// Build a network from `(id, role, pubbc_account)` triples. Key pairs
    /// are derived from the given seed so identical scenarios produce
    /// identical networks.
    pub fn new(
        seed: &[u8; 32],
        members: &[(String, Role, String)],
        quorum_threshold: usize,
    ) -> Self {
        let issuer = Crypto::keygen(&crypto::derive_bytes(seed, "membership-issuer"));
        let mut map = BTreeMap::new();
        for (id, role, account) in members {
            let keypair = Crypto::keygen(&crypto::derive_bytes(seed, &format!("member:{id}")));
            let cert_msg = member_cert_message(id, &keypair.pk);
            let cert = Crypto::sign(&issuer.sk, &cert_msg);
            map.insert(
                id.clone(),
                Member {
                    id: id.clone(),
                    keypair,
                    role: *role,
                    pubbc_account: account.clone(),
                    cert,
                },
            );
        }
        Self {
            issuer,
            members: map,
            quorum_threshold,
            ledger: BTreeMap::new(),
            acl: Vec::new(),
            generation_records: Vec::new(),
            commits: Vec::new(),
            notices: Vec::new(),
            defer_generation_validation: false,
        }
    }

    pub fn quorum_threshold(&self) -> usize {
        self.quorum_threshold
    }

    pub fn member(&self, id: &str) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.members.values()
    }

    pub fn peer_ids(&self) -> Vec<MemberId> {
        self.members
            .values()
            .filter(|m| m.role == Role::Peer)
            .map(|m| m.id.clone())
            .collect()
    }

    /// Every member's certificate verifies under the issuer key.
    pub fn verify_membership(&self, member: &Member) -> bool {
        let msg = member_cert_message(&member.id, &member.keypair.pk);
        Crypto::verify_sig(&self.issuer.pk, &msg, &member.cert)
    }

    pub fn head(&self, object_key: &str) -> Option<&EndorsedLedgerData> {
        self.ledger.get(object_key).and_then(|v| v.last())
    }

    /// Head version of every object on the ledger.
    pub fn heads(&self) -> std::collections::BTreeMap<String, u64> {
        self.ledger
            .iter()
            .filter_map(|(k, v)| v.last().map(|e| (k.clone(), e.data.version)))
            .collect()
    }

    pub fn has_live_grant(&self, subject_pk: &GroupElement, object_key: &str) -> bool {
        self.live_entry(subject_pk, object_key).is_some()
    }

    pub fn version_history(&self, object_key: &str) -> Option<&[EndorsedLedgerData]> {
        self.ledger.get(object_key).map(|v| v.as_slice())
    }

    pub fn commits(&self) -> &[PrivCommit] {
        &self.commits
    }

    pub fn generation_records(&self) -> &[GenerationRecord] {
        &self.generation_records
    }

    /// Drain pending update notices; the simulation loop feeds these to
    /// notifier drivers.
    pub fn take_notices(&mut self) -> Vec<UpdateNotice> {
        std::mem::take(&mut self.notices)
    }

    fn live_entry(
        &self,
        subject_pk: &GroupElement,
        object_key: &str,
    ) -> Option<&AccessControlEntry> {
        self.acl
            .iter()
            .find(|e| !e.revoked && e.object_key == object_key && e.subject_pk == *subject_pk)
    }

    fn check_quorum(&self, signer_ids: &[MemberId]) -> Result<Vec<&Member>, PrivError> {
        let mut seen = Vec::new();
        for id in signer_ids {
            let member = self.members.get(id).ok_or(PrivError::NotAMember)?;
            if member.role == Role::Peer && !seen.iter().any(|m: &&Member| m.id == member.id) {
                seen.push(member);
            }
        }
        if seen.len() < self.quorum_threshold {
            return Err(PrivError::QuorumNotMet {
                got: seen.len(),
                need: self.quorum_threshold,
            });
        }
        Ok(seen)
    }

    fn log(&mut self, kind: &str, object_key: &str, version: Option<u64>, payload: &[u8]) {
        self.commits.push(PrivCommit {
            index: self.commits.len() as u64,
            kind: kind.to_string(),
            object_key: object_key.to_string(),
            version,
            payload_hex: hex::encode(payload),
        });
    }

    /// Grant `subject_pk` read/notification access to `object_key`,
    /// co-signed by a quorum of peers. Idempotent on a live grant.
    pub fn permit_access(
        &mut self,
        subject_pk: &GroupElement,
        object_key: &str,
        signer_ids: &[MemberId],
    ) -> Result<AccessControlEntry, PrivError> {
        let head_version = self
            .head(object_key)
            .map(|e| e.data.version)
            .ok_or(PrivError::UnknownObject)?;
        let signers = self.check_quorum(signer_ids)?;
        if let Some(existing) = self.live_entry(subject_pk, object_key) {
            return Ok(existing.clone());
        }
        let grant_msg = acl_message(ctx::ACL_GRANT, subject_pk, object_key, head_version);
        let sigs: Vec<Vec<u8>> = signers
            .iter()
            .map(|m| Crypto::sign(&m.keypair.sk, &grant_msg).to_bytes())
            .collect();
        let entry = AccessControlEntry {
            subject_pk: *subject_pk,
            object_key: object_key.to_string(),
            granted_at_version: head_version,
            revoked: false,
        };
        self.acl.push(entry.clone());
        self.log(
            "permit_access",
            object_key,
            Some(head_version),
            &sigs.concat(),
        );
        Ok(entry)
    }

    /// Revoke a live grant; subsequent generation attempts for the pair fail.
    pub fn revoke_access(
        &mut self,
        subject_pk: &GroupElement,
        object_key: &str,
        signer_ids: &[MemberId],
    ) -> Result<AccessControlEntry, PrivError> {
        self.check_quorum(signer_ids)?;
        let pos = self
            .acl
            .iter()
            .position(|e| !e.revoked && e.object_key == object_key && e.subject_pk == *subject_pk)
            .ok_or(PrivError::NoLiveEntry)?;
        self.acl[pos].revoked = true;
        let entry = self.acl[pos].clone();
        let revoke_msg = acl_message(
            ctx::ACL_REVOKE,
            subject_pk,
            object_key,
            entry.granted_at_version,
        );
        self.log("revoke_access", object_key, None, &revoke_msg);
        Ok(entry)
    }

    /// Commit a new value for `key`. The version increments by exactly one
    /// per commit (first commit is version 0). Fires the notification hook
    /// for every live subscriber of the key.
    pub fn update_ledger_data(
        &mut self,
        author: &MemberId,
        key: &str,
        value: &[u8],
        endorser_ids: &[MemberId],
    ) -> Result<EndorsedLedgerData, PrivError> {
        if !self.members.contains_key(author) {
            return Err(PrivError::NotAMember);
        }
        let endorsers = self.check_quorum(endorser_ids)?;
        let version = self.ledger.get(key).map(|v| v.len() as u64).unwrap_or(0);
        let data = LedgerData {
            key: key.to_string(),
            value: value.to_vec(),
            version,
        };
        let msg = EndorsedLedgerData::endorsement_message(&data);
        let endorsements: Vec<(MemberId, Signature)> = endorsers
            .iter()
            .map(|m| (m.id.clone(), Crypto::sign(&m.keypair.sk, &msg)))
            .collect();
        let eld = EndorsedLedgerData { data, endorsements };
        let payload = eld.to_bytes();
        self.ledger
            .entry(key.to_string())
            .or_default()
            .push(eld.clone());
        self.log("update_ledger_data", key, Some(version), &payload);
        let subscriber_pks: Vec<GroupElement> = self
            .acl
            .iter()
            .filter(|e| !e.revoked && e.object_key == key)
            .map(|e| e.subject_pk)
            .collect();
        self.notices.push(UpdateNotice {
            object_key: key.to_string(),
            version,
            subscriber_pks,
        });
        Ok(eld)
    }

    /// Verify the endorsements on an ELD against this network's member keys.
    pub fn verify_endorsements(&self, eld: &EndorsedLedgerData) -> bool {
        verify_endorsements_with(
            &self
                .members
                .iter()
                .map(|(id, m)| (id.clone(), m.keypair.pk))
                .collect(),
            self.quorum_threshold,
            eld,
        )
    }

    /// Validate and co-sign a generation payload: the peers check the ACL,
    /// re-derive the deterministic encryption of the head ELD, verify the
    /// commitment and proof, and only then produce the authorization
    /// signatures that the public chain will accept.
    #[allow(clippy::too_many_arguments)]
    pub fn record_enc_data_hash_proof(
        &mut self,
        notifier: &MemberId,
        recipient_pk: &GroupElement,
        object_key: &str,
        declared_version: u64,
        ciphertext: &DetCiphertext,
        commitment: &Commitment,
        proof: &EncProof,
        validator_ids: &[MemberId],
    ) -> Result<GenerationRecord, PrivError> {
        if !self.members.contains_key(notifier) {
            return Err(PrivError::NotAMember);
        }
        if self.live_entry(recipient_pk, object_key).is_none() {
            return Err(PrivError::NotAuthorized);
        }
        let history = self
            .ledger
            .get(object_key)
            .ok_or(PrivError::UnknownObject)?;
        let head = history.len() as u64 - 1;

        if self.defer_generation_validation {
            // Light-validation mode: peers attest the declared version and
            // commitment without re-deriving the ciphertext.
            if declared_version != head {
                return Err(PrivError::StaleVersion {
                    found: declared_version,
                    head,
                });
            }
        } else {
            // Identify which committed version this ciphertext encrypts.
            let mut found = None;
            for eld in history {
                let expected = Crypto::det_encrypt(recipient_pk, &eld.to_bytes())
                    .map_err(|_| PrivError::BadProof("empty payload"))?;
                if expected == *ciphertext {
                    found = Some(eld.data.version);
                    break;
                }
            }
            match found {
                Some(v) if v == head => {}
                Some(v) => return Err(PrivError::StaleVersion { found: v, head }),
                None => {
                    return Err(PrivError::BadProof(
                        "ciphertext does not match any committed version",
                    ))
                }
            }
            if declared_version != head {
                return Err(PrivError::StaleVersion {
                    found: declared_version,
                    head,
                });
            }
            if !crypto::verify_commit(
                &commitment.value,
                &ciphertext.to_bytes(),
                &commitment.opening,
            ) {
                return Err(PrivError::BadProof(
                    "commitment does not open to the ciphertext",
                ));
            }
            if !Crypto::verify_enc_proof(recipient_pk, &ciphertext.kem, &commitment.value, proof) {
                return Err(PrivError::BadProof("well-formedness proof rejected"));
            }
        }

        let validators = self.check_quorum(validator_ids)?;
        let auth_msg = auth_grant_message(
            object_key,
            declared_version,
            &commitment.value,
            recipient_pk,
        );
        let auth_sigs: Vec<(MemberId, Signature)> = validators
            .iter()
            .map(|m| (m.id.clone(), Crypto::sign(&m.keypair.sk, &auth_msg)))
            .collect();
        let record = GenerationRecord {
            object_key: object_key.to_string(),
            version: declared_version,
            recipient_pk: *recipient_pk,
            commitment: commitment.value,
            opening: commitment.opening,
            proof: proof.clone(),
            auth_sigs,
        };
        self.generation_records.push(record.clone());
        let mut payload = ciphertext.to_bytes();
        payload.extend_from_slice(commitment.value.as_bytes());
        self.log(
            "record_enc_data_hash_proof",
            object_key,
            Some(declared_version),
            &payload,
        );
        Ok(record)
    }

    /// Canonical JSON export of the full ledger state, for transcript
    /// diffing: sorted keys, full version histories as hex payloads, and
    /// the access-control list.
    pub fn export_json(&self) -> String {
        let ledger: BTreeMap<&String, Vec<serde_json::Value>> = self
            .ledger
            .iter()
            .map(|(key, history)| {
                let entries = history
                    .iter()
                    .map(|eld| {
                        serde_json::json!({
                            "version": eld.data.version,
                            "payload_hex": hex::encode(eld.to_bytes()),
                        })
                    })
                    .collect();
                (key, entries)
            })
            .collect();
        let acl: Vec<serde_json::Value> = self
            .acl
            .iter()
            .map(|e| {
                serde_json::json!({
                    "subject_pk": crate::point_hex(&e.subject_pk),
                    "object_key": e.object_key,
                    "granted_at_version": e.granted_at_version,
                    "revoked": e.revoked,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "quorum_threshold": self.quorum_threshold,
            "members": self.members.keys().collect::<Vec<_>>(),
            "ledger": ledger,
            "acl": acl,
            "commits": self.commits.len(),
        }))
        .expect("ledger state serializes")
    }

    /// Access-controlled read: returns the head ELD together with a
    /// quorum-signed attestation that the requestor is associated with the
    /// object and of the current head version.
    pub fn vrs_query(
        &self,
        requestor_pk: &GroupElement,
        object_key: &str,
    ) -> Result<(EndorsedLedgerData, VrsAttestation), PrivError> {
        if self.live_entry(requestor_pk, object_key).is_none() {
            return Err(PrivError::AccessDenied);
        }
        let head = self.head(object_key).ok_or(PrivError::UnknownObject)?;
        let statement = VrsAttestation::statement(object_key, head.data.version, requestor_pk);
        let signatures: Vec<(MemberId, Signature)> = self
            .members
            .values()
            .filter(|m| m.role == Role::Peer)
            .map(|m| (m.id.clone(), Crypto::sign(&m.keypair.sk, &statement)))
            .collect();
        let attestation = VrsAttestation {
            object_key: object_key.to_string(),
            head_version: head.data.version,
            requestor_pk: *requestor_pk,
            signatures,
        };
        Ok((head.clone(), attestation))
    }
}

fn member_cert_message(id: &str, pk: &GroupElement) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str(ctx::MEMBER_CERT);
    w.put_str(id);
    w.put_bytes(&DefaultGroup::point_bytes(pk));
    w.finish()
}

fn acl_message(
    context: &str,
    subject_pk: &GroupElement,
    object_key: &str,
    version: u64,
) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_str(context);
    w.put_bytes(&DefaultGroup::point_bytes(subject_pk));
    w.put_str(object_key);
    w.put_u64(version);
    w.finish()
}

/// Quorum-verify an ELD against an explicit key registry; used both by the
/// chain itself and by the public-chain contract, which only knows the
/// registered keys.
pub fn verify_endorsements_with(
    registry: &BTreeMap<MemberId, GroupElement>,
    threshold: usize,
    eld: &EndorsedLedgerData,
) -> bool {
    let msg = EndorsedLedgerData::endorsement_message(&eld.data);
    let mut valid: Vec<&MemberId> = Vec::new();
    for (id, sig) in &eld.endorsements {
        if valid.contains(&id) {
            continue;
        }
        match registry.get(id) {
            Some(pk) if Crypto::verify_sig(pk, &msg, sig) => valid.push(id),
            _ => return false,
        }
    }
    valid.len() >= threshold
}

/// Verify a set of authorization signatures against a registry.
pub fn verify_auth_sigs(
    registry: &BTreeMap<MemberId, GroupElement>,
    threshold: usize,
    object_key: &str,
    version: u64,
    commitment: &Digest,
    recipient_pk: &GroupElement,
    sigs: &[(MemberId, Signature)],
) -> bool {
    let msg = auth_grant_message(object_key, version, commitment, recipient_pk);
    let mut valid: Vec<&MemberId> = Vec::new();
    for (id, sig) in sigs {
        if valid.contains(&id) {
            continue;
        }
        match registry.get(id) {
            Some(pk) if Crypto::verify_sig(pk, &msg, sig) => valid.push(id),
            _ => return false,
        }
    }
    valid.len() >= threshold
}

/// Verify a VRS attestation against a registry.
pub fn verify_vrs_attestation(
    registry: &BTreeMap<MemberId, GroupElement>,
    threshold: usize,
    att: &VrsAttestation,
) -> bool {
    let msg = VrsAttestation::statement(&att.object_key, att.head_version, &att.requestor_pk);
    let mut valid: Vec<&MemberId> = Vec::new();
    for (id, sig) in &att.signatures {
        if valid.contains(&id) {
            continue;
        }
        match registry.get(id) {
            Some(pk) if Crypto::verify_sig(pk, &msg, sig) => valid.push(id),
            _ => return false,
        }
    }
    valid.len() >= threshold
}
