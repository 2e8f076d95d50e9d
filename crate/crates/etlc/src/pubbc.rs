//! Deterministic public-blockchain model: accounts with integer balances,
//! an ordered transaction log grouped into blocks, and a logical
//! block-height clock that drives every contract timeout.
//!
//! There are no fees, no forks and no mempool. A transaction submitted
//! between ticks lands in the block at the current height in submission
//! order; `tick` advances the height and then executes expired contract
//! timeout branches in session-creation order. Rejected transactions are
//! logged with their rejection receipt and leave every balance untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{ContractError, DeadlineParams, EconParams, EtlcState, MemberReg};
use crate::crypto::SymKey;
use crate::privbc::VrsAttestation;
use crate::{DetCiphertext, Digest, EncProof, GroupElement, Signature};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PubError {
    #[error("unknown account '{0}'")]
    UnknownAccount(String),
    #[error("transfer amount must be positive")]
    NonPositiveAmount,
    #[error("insufficient funds: need {need}, have {have}")]
    InsufficientFunds { need: u64, have: u64 },
    #[error(transparent)]
    Contract(#[from] ContractError),
}

/// An externally owned account.
#[derive(Clone, Debug)]
pub struct Account {
    pub id: String,
    pub pk: GroupElement,
    pub balance: u64,
}

/// The balance table, split out so contract code can move funds without
/// borrowing the whole chain.
#[derive(Clone, Debug, Default)]
pub struct Balances(BTreeMap<String, u64>);

impl Balances {
    pub fn balance(&self, account: &str) -> u64 {
        self.0.get(account).copied().unwrap_or(0)
    }

    pub fn credit(&mut self, account: &str, amount: u64) {
        *self.0.entry(account.to_string()).or_insert(0) += amount;
    }

    pub fn debit(&mut self, account: &str, amount: u64) {
        let entry = self.0.get_mut(account).expect("debit of unknown account");
        assert!(*entry >= amount, "debit would overdraw {account}");
        *entry -= amount;
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn snapshot(&self) -> BTreeMap<String, u64> {
        self.0.clone()
    }
}

/// A contract invocation as it appears in a transaction payload. All
/// cryptographic objects travel in their canonical hex encoding, so the
/// payload serializes to one deterministic JSON document per call.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "snake_case")]
pub enum ContractCall {
    RecordPubKey {
        recipient_pk: String,
        object_key: String,
        members: Vec<MemberReg>,
        quorum_threshold: usize,
        econ: EconParams,
        deadlines: DeadlineParams,
    },
    RecordCiphertextHashProof {
        session: u64,
        version: u64,
        kem: String,
        ciphertext2: String,
        commitment: String,
        opening: String,
        proof: String,
        auth_sigs: Vec<(String, String)>,
    },
    InstallSignContract {
        session: u64,
        amount: u64,
        sig_deadline: u64,
    },
    InstallKeyContract {
        session: u64,
        amount: u64,
        key_deadline: u64,
    },
    RecordKey {
        session: u64,
        key: String,
    },
    RecordReceiptSignature {
        session: u64,
        signature: String,
    },
    ClaimReward {
        session: u64,
        signature: String,
    },
    Challenge {
        session: u64,
        dec_eld: String,
        attestation: Option<String>,
    },
    Finalize {
        session: u64,
    },
    Transfer {
        to: String,
        amount: u64,
    },
}

impl ContractCall {
    /// `(contract, operation)` routing label for the transaction log.
    pub fn route(&self) -> (&'static str, &'static str) {
        match self {
            ContractCall::RecordPubKey { .. } => ("sc_reward", "record_pub_key"),
            ContractCall::RecordCiphertextHashProof { .. } => {
                ("sc_reward", "record_ciphertext_hash_proof")
            }
            ContractCall::InstallSignContract { .. } => ("sc_r_sign", "install"),
            ContractCall::InstallKeyContract { .. } => ("sc_n_key", "install"),
            ContractCall::RecordKey { .. } => ("sc_n_key", "record_key"),
            ContractCall::RecordReceiptSignature { .. } => ("sc_r_sign", "record_signature"),
            ContractCall::ClaimReward { .. } => ("sc_reward", "record_signature"),
            ContractCall::Challenge { .. } => ("sc_reward", "validate"),
            ContractCall::Finalize { .. } => ("sc_reward", "verify_signature"),
            ContractCall::Transfer { .. } => ("native", "transfer"),
        }
    }
}

/// Outcome of a transaction, kept verbatim in the log. `info` carries the
/// full verdict rationale for transcript auditing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Receipt {
    pub ok: bool,
    pub info: String,
}

/// One logged transaction with its receipt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TxRecord {
    pub index: u64,
    pub height: u64,
    pub sender: String,
    pub contract: String,
    pub op: String,
    pub payload: String,
    pub receipt: Receipt,
}

/// A sealed block: all transactions submitted at one height, in order.
#[derive(Clone, Debug, Serialize)]
pub struct Block {
    pub height: u64,
    pub txs: Vec<TxRecord>,
}

pub struct PublicChain {
    height: u64,
    accounts: BTreeMap<String, Account>,
    balances: Balances,
    txs: Vec<TxRecord>,
    pub etlc: EtlcState,
    genesis_supply: u64,
}

impl PublicChain {
    pub fn new(accounts: Vec<Account>, defer_proof_check: bool) -> Self {
        let mut balances = Balances::default();
        let mut map = BTreeMap::new();
        for account in accounts {
            balances.credit(&account.id, account.balance);
            map.insert(account.id.clone(), account);
        }
        let genesis_supply = balances.total();
        Self {
            height: 0,
            accounts: map,
            balances,
            txs: Vec::new(),
            etlc: EtlcState::new(defer_proof_check),
            genesis_supply,
        }
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn balance(&self, account: &str) -> u64 {
        self.balances.balance(account)
    }

    pub fn balances(&self) -> BTreeMap<String, u64> {
        self.balances.snapshot()
    }

    pub fn genesis_supply(&self) -> u64 {
        self.genesis_supply
    }

    /// Circulating balances plus everything escrowed in contracts. Constant
    /// across any run.
    pub fn total_supply(&self) -> u64 {
        self.balances.total() + self.etlc.escrow_total()
    }

    pub fn txs(&self) -> &[TxRecord] {
        &self.txs
    }

    /// The transaction log grouped into blocks by height.
    pub fn blocks(&self) -> Vec<Block> {
        let mut blocks: Vec<Block> = Vec::new();
        for tx in &self.txs {
            match blocks.last_mut() {
                Some(last) if last.height == tx.height => last.txs.push(tx.clone()),
                _ => blocks.push(Block {
                    height: tx.height,
                    txs: vec![tx.clone()],
                }),
            }
        }
        blocks
    }

    /// Direct currency transfer between accounts.
    pub fn transfer(&mut self, from: &str, to: &str, amount: u64) -> Result<(), PubError> {
        let call = ContractCall::Transfer {
            to: to.to_string(),
            amount,
        };
        let receipt = self.submit(from, &call);
        if receipt.ok {
            Ok(())
        } else {
            Err(self
                .transfer_error(from, to, amount)
                .expect("receipt says failure"))
        }
    }

    fn transfer_error(&self, from: &str, to: &str, amount: u64) -> Option<PubError> {
        if !self.accounts.contains_key(from) {
            return Some(PubError::UnknownAccount(from.to_string()));
        }
        if !self.accounts.contains_key(to) {
            return Some(PubError::UnknownAccount(to.to_string()));
        }
        if amount == 0 {
            return Some(PubError::NonPositiveAmount);
        }
        let have = self.balances.balance(from);
        if have < amount {
            return Some(PubError::InsufficientFunds { need: amount, have });
        }
        None
    }

    /// Advance the block clock by one and execute every expired contract
    /// timeout branch, logging each as a system transaction.
    pub fn tick(&mut self) -> u64 {
        self.height += 1;
        let events = self.etlc.process_timeouts(&mut self.balances, self.height);
        for (session, info) in events {
            self.log(
                "system",
                "sc_reward",
                "timeout",
                format!("{{\"session\":{session}}}"),
                Receipt { ok: true, info },
            );
        }
        debug_assert_eq!(
            self.total_supply(),
            self.genesis_supply,
            "supply must be conserved"
        );
        self.height
    }

    fn log(
        &mut self,
        sender: &str,
        contract: &str,
        op: &str,
        payload: String,
        receipt: Receipt,
    ) -> &TxRecord {
        self.txs.push(TxRecord {
            index: self.txs.len() as u64,
            height: self.height,
            sender: sender.to_string(),
            contract: contract.to_string(),
            op: op.to_string(),
            payload,
            receipt,
        });
        self.txs.last().expect("just pushed")
    }

    /// Submit a transaction. The call is dispatched atomically: a rejected
    /// call changes no balance and no contract state, and the rejection
    /// itself is logged with its reason.
    pub fn submit(&mut self, sender: &str, call: &ContractCall) -> Receipt {
        let (contract, op) = call.route();
        let payload = serde_json::to_string(call).expect("contract calls serialize");
        let result = if self.accounts.contains_key(sender) {
            self.dispatch(sender, call)
        } else {
            Err(PubError::UnknownAccount(sender.to_string()))
        };
        let receipt = match result {
            Ok(info) => Receipt { ok: true, info },
            Err(err) => Receipt {
                ok: false,
                info: format!("rejected: {err}"),
            },
        };
        self.log(sender, contract, op, payload, receipt.clone());
        debug_assert_eq!(
            self.total_supply(),
            self.genesis_supply,
            "supply must be conserved"
        );
        receipt
    }

    fn dispatch(&mut self, sender: &str, call: &ContractCall) -> Result<String, PubError> {
        let height = self.height;
        match call {
            ContractCall::Transfer { to, amount } => {
                if let Some(err) = self.transfer_error(sender, to, *amount) {
                    return Err(err);
                }
                self.balances.debit(sender, *amount);
                self.balances.credit(to, *amount);
                Ok(format!("transferred {amount} to {to}"))
            }
            ContractCall::RecordPubKey {
                recipient_pk,
                object_key,
                members,
                quorum_threshold,
                econ,
                deadlines,
            } => {
                let pk = crate::point_from_hex(recipient_pk)
                    .ok_or(ContractError::Malformed("recipient pk"))?;
                let id = self.etlc.record_pubkey(
                    &mut self.balances,
                    height,
                    sender,
                    pk,
                    object_key,
                    members,
                    *quorum_threshold,
                    *econ,
                    *deadlines,
                )?;
                Ok(format!("session {id} created in Init"))
            }
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
                let kem = crate::point_from_hex(kem).ok_or(ContractError::Malformed("kem"))?;
                let ciphertext2 = decode_hex(ciphertext2, "ciphertext")?;
                let commitment = Digest::from_slice(&decode_hex(commitment, "commitment")?)
                    .ok_or(ContractError::Malformed("commitment"))?;
                let opening: [u8; 32] = decode_hex(opening, "opening")?
                    .try_into()
                    .map_err(|_| ContractError::Malformed("opening"))?;
                let proof = EncProof::from_bytes(&decode_hex(proof, "proof")?)
                    .map_err(|_| ContractError::Malformed("proof"))?;
                let mut sigs = Vec::with_capacity(auth_sigs.len());
                for (id, sig_hex) in auth_sigs {
                    let sig = Signature::from_bytes(&decode_hex(sig_hex, "auth sig")?)
                        .map_err(|_| ContractError::Malformed("auth sig"))?;
                    sigs.push((id.clone(), sig));
                }
                Ok(self.etlc.record_ciphertext_hash_proof(
                    &mut self.balances,
                    height,
                    sender,
                    *session,
                    *version,
                    kem,
                    ciphertext2,
                    commitment,
                    opening,
                    proof,
                    sigs,
                )?)
            }
            ContractCall::InstallSignContract {
                session,
                amount,
                sig_deadline,
            } => Ok(self.etlc.install_sign_contract(
                &mut self.balances,
                height,
                sender,
                *session,
                *amount,
                *sig_deadline,
            )?),
            ContractCall::InstallKeyContract {
                session,
                amount,
                key_deadline,
            } => Ok(self.etlc.install_key_contract(
                &mut self.balances,
                height,
                sender,
                *session,
                *amount,
                *key_deadline,
            )?),
            ContractCall::RecordKey { session, key } => {
                let key = SymKey::from_bytes(&decode_hex(key, "sym key")?)
                    .ok_or(ContractError::Malformed("sym key"))?;
                Ok(self
                    .etlc
                    .record_key(&mut self.balances, height, sender, *session, key)?)
            }
            ContractCall::RecordReceiptSignature { session, signature } => {
                let sig = Signature::from_bytes(&decode_hex(signature, "signature")?)
                    .map_err(|_| ContractError::Malformed("signature"))?;
                Ok(self
                    .etlc
                    .record_signature(&mut self.balances, height, sender, *session, sig)?)
            }
            ContractCall::ClaimReward { session, signature } => {
                let sig = Signature::from_bytes(&decode_hex(signature, "signature")?)
                    .map_err(|_| ContractError::Malformed("signature"))?;
                Ok(self.etlc.claim_reward(height, sender, *session, sig)?)
            }
            ContractCall::Challenge {
                session,
                dec_eld,
                attestation,
            } => {
                let dec_eld = decode_hex(dec_eld, "dec eld")?;
                let attestation = match attestation {
                    Some(hex) => Some(
                        VrsAttestation::from_bytes(&decode_hex(hex, "attestation")?)
                            .map_err(|_| ContractError::Malformed("attestation"))?,
                    ),
                    None => None,
                };
                Ok(self.etlc.challenge(
                    &mut self.balances,
                    height,
                    sender,
                    *session,
                    dec_eld,
                    attestation,
                )?)
            }
            ContractCall::Finalize { session } => {
                Ok(self.etlc.finalize(&mut self.balances, height, *session)?)
            }
        }
    }
}

fn decode_hex(s: &str, what: &'static str) -> Result<Vec<u8>, ContractError> {
    hex::decode(s).map_err(|_| ContractError::Malformed(what))
}

/// Hex helpers for building calls.
pub fn ciphertext_hex(ct: &DetCiphertext) -> String {
    hex::encode(ct.to_bytes())
}

pub fn proof_hex(proof: &EncProof) -> String {
    hex::encode(proof.to_bytes())
}

pub fn signature_hex(sig: &Signature) -> String {
    hex::encode(sig.to_bytes())
}

pub fn sym_key_hex(key: &SymKey) -> String {
    hex::encode(key.to_bytes())
}

pub fn auth_sigs_hex(sigs: &[(String, Signature)]) -> Vec<(String, String)> {
    sigs.iter()
        .map(|(id, sig)| (id.clone(), signature_hex(sig)))
        .collect()
}
