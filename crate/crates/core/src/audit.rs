//! Salted vector commitments, membership proofs, hash-chained event logs
//! and the replay audit transcript.
//!
//! The public tier of a transcript shows the two schedule roots, the
//! negotiated spread constraint, the selected grid point with a membership
//! proof into each tree, the event log (schedules replaced by their roots)
//! and sealed copies of the outcome for each dealer. An optional auditor
//! opening adds every leaf and salt so the selection can be replayed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{
    filter_feasible, select_trade, Candidate, Client, ContractState, Event, LoggedEvent, Phase, ScheduleEntry,
    SpreadResponse,
};
use crate::digest::{tagged_hash, Digest};
use crate::equilibrium::Dealer;
use crate::fixed::Fixed;

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("salt {index} has {len} bytes, expected 32")]
    SaltLength { index: usize, len: usize },
    #[error("{salts} salts for {leaves} leaves")]
    SaltCount { salts: usize, leaves: usize },
    #[error("cannot commit to an empty schedule")]
    Empty,
    #[error("transcripts are built from settled or aborted contracts, not {0:?}")]
    NotTerminal(Phase),
    #[error("{0} opening does not reproduce the committed root")]
    OpeningMismatch(&'static str),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Leaf digest binding index, rate, volume and salt.
pub fn leaf_hash(index: u64, rate: Fixed, volume: Fixed, salt: &[u8; 32]) -> Digest {
    tagged_hash(
        b"LEAF",
        &[&index.to_le_bytes(), &rate.raw().to_le_bytes(), &volume.raw().to_le_bytes(), salt],
    )
}

fn node_hash(left: &Digest, right: &Digest) -> Digest {
    tagged_hash(b"NODE", &[left.as_bytes(), right.as_bytes()])
}

/// Binary hash tree levels, leaves first. An unpaired last node is
/// promoted unchanged.
fn tree_levels(leaves: Vec<Digest>) -> Vec<Vec<Digest>> {
    let mut levels = vec![leaves];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        let next = prev
            .chunks(2)
            .map(|pair| if pair.len() == 2 { node_hash(&pair[0], &pair[1]) } else { pair[0] })
            .collect();
        levels.push(next);
    }
    levels
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleCommitment {
    pub root: Digest,
    pub leaf_count: u64,
    pub leaves: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipProof {
    pub index: u64,
    pub leaf_count: u64,
    pub rate: Fixed,
    pub volume: Fixed,
    pub salt: Digest,
    /// Sibling per level, `None` where the node was promoted.
    pub path: Vec<Option<Digest>>,
}

fn check_salts<S: AsRef<[u8]>>(salts: &[S], leaves: usize) -> Result<Vec<[u8; 32]>, AuditError> {
    if salts.len() != leaves {
        return Err(AuditError::SaltCount { salts: salts.len(), leaves });
    }
    salts
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let s = s.as_ref();
            <[u8; 32]>::try_from(s).map_err(|_| AuditError::SaltLength { index, len: s.len() })
        })
        .collect()
}

/// Commits to a schedule with one fresh 32-byte salt per entry.
pub fn commit_schedule<S: AsRef<[u8]>>(entries: &[ScheduleEntry], salts: &[S]) -> Result<ScheduleCommitment, AuditError> {
    if entries.is_empty() {
        return Err(AuditError::Empty);
    }
    let salts = check_salts(salts, entries.len())?;
    let leaves: Vec<Digest> = entries
        .iter()
        .zip(&salts)
        .enumerate()
        .map(|(i, (e, s))| leaf_hash(i as u64, e.rate, e.volume, s))
        .collect();
    let root = *tree_levels(leaves.clone()).last().unwrap().first().unwrap();
    Ok(ScheduleCommitment { root, leaf_count: entries.len() as u64, leaves })
}

/// Membership proof for entry `index`.
pub fn prove_membership<S: AsRef<[u8]>>(
    entries: &[ScheduleEntry],
    salts: &[S],
    index: usize,
) -> Result<MembershipProof, AuditError> {
    let commitment = commit_schedule(entries, salts)?;
    if index >= entries.len() {
        return Err(AuditError::Invariant(format!("index {index} outside {} leaves", entries.len())));
    }
    let levels = tree_levels(commitment.leaves);
    let mut path = Vec::with_capacity(levels.len() - 1);
    let mut idx = index;
    for level in &levels[..levels.len() - 1] {
        let sibling = idx ^ 1;
        path.push(level.get(sibling).copied());
        idx /= 2;
    }
    let salt = Digest(<[u8; 32]>::try_from(salts[index].as_ref()).expect("checked by commit"));
    Ok(MembershipProof {
        index: index as u64,
        leaf_count: entries.len() as u64,
        rate: entries[index].rate,
        volume: entries[index].volume,
        salt,
        path,
    })
}

/// Folds the proof's leaf up its path and compares with `root`. The path
/// shape must match `leaf_count` exactly.
pub fn verify_membership(root: &Digest, proof: &MembershipProof) -> bool {
    if proof.leaf_count == 0 || proof.index >= proof.leaf_count {
        return false;
    }
    let mut current = leaf_hash(proof.index, proof.rate, proof.volume, proof.salt.as_bytes());
    let (mut idx, mut width) = (proof.index, proof.leaf_count);
    let mut steps = proof.path.iter();
    while width > 1 {
        let promoted = idx == width - 1 && width % 2 == 1;
        match (steps.next(), promoted) {
            (Some(None), true) => {}
            (Some(Some(sibling)), false) => {
                current = if idx % 2 == 0 { node_hash(&current, sibling) } else { node_hash(sibling, &current) };
            }
            _ => return false,
        }
        idx /= 2;
        width = width.div_ceil(2);
    }
    steps.next().is_none() && current == *root
}

/// Deterministic 32-byte salts for `label` derived from `seed`.
pub fn salts_from_seed(seed: u64, label: &str, count: usize) -> Vec<[u8; 32]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from_le_bytes(tagged_hash(b"SALT", &[label.as_bytes()]).0[..8].try_into().unwrap()));
    (0..count)
        .map(|_| {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        })
        .collect()
}

/// Authenticated sealing of outcome data to a named recipient.
pub trait Sealer {
    fn seal(&self, recipient: &str, plaintext: &[u8]) -> Vec<u8>;
    fn open(&self, recipient: &str, sealed: &[u8]) -> Option<Vec<u8>>;
}

/// Reproducible stand-in keyed by recipient id: a hash keystream plus a
/// 32-byte tag. Not secret; it only fixes the transcript format.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubSealer;

impl StubSealer {
    fn key(recipient: &str) -> Digest {
        tagged_hash(b"SEALKEY", &[recipient.as_bytes()])
    }

    fn keystream(key: &Digest, len: usize) -> Vec<u8> {
        (0..len.div_ceil(32) as u64)
            .flat_map(|block| tagged_hash(b"SEALSTREAM", &[key.as_bytes(), &block.to_le_bytes()]).0)
            .take(len)
            .collect()
    }
}

impl Sealer for StubSealer {
    fn seal(&self, recipient: &str, plaintext: &[u8]) -> Vec<u8> {
        let key = Self::key(recipient);
        let mut out: Vec<u8> = plaintext.iter().zip(Self::keystream(&key, plaintext.len())).map(|(p, k)| p ^ k).collect();
        out.extend_from_slice(tagged_hash(b"SEALTAG", &[key.as_bytes(), plaintext]).as_bytes());
        out
    }

    fn open(&self, recipient: &str, sealed: &[u8]) -> Option<Vec<u8>> {
        let body_len = sealed.len().checked_sub(32)?;
        let key = Self::key(recipient);
        let plain: Vec<u8> =
            sealed[..body_len].iter().zip(Self::keystream(&key, body_len)).map(|(c, k)| c ^ k).collect();
        (tagged_hash(b"SEALTAG", &[key.as_bytes(), &plain]).as_bytes() == &sealed[body_len..]).then_some(plain)
    }
}

fn outcome_plaintext(r_mm: Fixed, r_rm: Fixed, r_bd: Fixed, volume: Fixed) -> Vec<u8> {
    [r_mm, r_rm, r_bd, volume].iter().flat_map(|f| f.raw().to_le_bytes()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SealedOutput {
    pub recipient: String,
    pub ciphertext: String,
}

/// Event as published: schedules appear only through their roots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PublicEvent {
    SubmitSchedule { dealer_id: String, side: Dealer, commitment: Digest },
    PostDeposit { client: Client, amount: Fixed },
    SubmitFirstSpread { dealer_id: String, kappa: Fixed },
    RespondSpread { dealer_id: String, response: SpreadResponse },
    Tick { now: u64 },
    RequestExecute,
}

impl From<&Event> for PublicEvent {
    fn from(e: &Event) -> Self {
        match e {
            Event::SubmitSchedule { schedule, commitment } => PublicEvent::SubmitSchedule {
                dealer_id: schedule.dealer_id.clone(),
                side: schedule.side,
                commitment: *commitment,
            },
            Event::PostDeposit { client, amount } => PublicEvent::PostDeposit { client: *client, amount: *amount },
            Event::SubmitFirstSpread { dealer_id, kappa } => {
                PublicEvent::SubmitFirstSpread { dealer_id: dealer_id.clone(), kappa: *kappa }
            }
            Event::RespondSpread { dealer_id, response } => {
                PublicEvent::RespondSpread { dealer_id: dealer_id.clone(), response: *response }
            }
            Event::Tick { now } => PublicEvent::Tick { now: *now },
            Event::RequestExecute => PublicEvent::RequestExecute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicLogEntry {
    pub seq: u64,
    pub time: u64,
    pub event: PublicEvent,
    pub phase_after: Phase,
}

impl From<&LoggedEvent> for PublicLogEntry {
    fn from(l: &LoggedEvent) -> Self {
        PublicLogEntry { seq: l.seq, time: l.time, event: (&l.event).into(), phase_after: l.phase_after }
    }
}

/// `H("EVENT" || previous || entry)` folded over the log from the zero
/// digest.
pub fn event_chain(entries: &[PublicLogEntry]) -> Digest {
    entries.iter().fold(Digest::default(), |prev, e| {
        let bytes = serde_json::to_vec(e).expect("event serializes");
        tagged_hash(b"EVENT", &[prev.as_bytes(), &bytes])
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptOutcome {
    pub index: u64,
    pub volume: Fixed,
    pub r_mm: Fixed,
    pub r_rm: Fixed,
    pub r_bd: Fixed,
    pub mm_proof: MembershipProof,
    pub rm_proof: MembershipProof,
    pub sealed: Vec<SealedOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenedLeaf {
    pub volume: Fixed,
    pub rate: Fixed,
    pub salt: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditorOpening {
    pub mm: Vec<OpenedLeaf>,
    pub rm: Vec<OpenedLeaf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditTranscript {
    pub version: u32,
    pub mm_root: Option<Digest>,
    pub rm_root: Option<Digest>,
    pub spread_constraint: Option<Fixed>,
    pub phase: Phase,
    pub outcome: Option<TranscriptOutcome>,
    pub events: Vec<PublicLogEntry>,
    pub chain_head: Digest,
    pub opening: Option<AuditorOpening>,
}

impl AuditTranscript {
    /// Pretty JSON, declaration-order keys, lowercase hex, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }
}

/// Roots the verifier expects, published at commit time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedRoots {
    pub mm_root: Option<Digest>,
    pub rm_root: Option<Digest>,
}

/// Builds the transcript of a finished run. Salts are the ones used for
/// the commitments recorded in the contract; they must reproduce them.
pub fn build_transcript<S: AsRef<[u8]>>(
    state: &ContractState,
    mm_salts: &[S],
    rm_salts: &[S],
    sealer: &dyn Sealer,
    auditor_mode: bool,
) -> Result<AuditTranscript, AuditError> {
    if !state.phase.is_terminal() {
        return Err(AuditError::NotTerminal(state.phase));
    }
    let mut opened: [Option<Vec<OpenedLeaf>>; 2] = [None, None];
    for (slot, report, salts, side) in [
        (0, &state.mm_report, mm_salts, "money-market"),
        (1, &state.rm_report, rm_salts, "repo-market"),
    ] {
        if let Some(sub) = report {
            let c = commit_schedule(&sub.schedule.entries, salts)?;
            if c.root != sub.commitment {
                return Err(AuditError::OpeningMismatch(side));
            }
            let salts = check_salts(salts, sub.schedule.entries.len())?;
            opened[slot] = Some(
                sub.schedule
                    .entries
                    .iter()
                    .zip(salts)
                    .map(|(e, s)| OpenedLeaf { volume: e.volume, rate: e.rate, salt: Digest(s) })
                    .collect(),
            );
        }
    }
    let outcome = match (state.phase, state.outcome) {
        (Phase::Settled, Some(sel)) => {
            let (mm, rm) = match (&state.mm_report, &state.rm_report) {
                (Some(mm), Some(rm)) => (mm, rm),
                _ => return Err(AuditError::Invariant("settled without both schedules".into())),
            };
            let plain = outcome_plaintext(sel.r_mm, sel.r_rm, sel.r_bd, sel.volume);
            let sealed = [&state.config.mm_dealer, &state.config.rm_dealer]
                .iter()
                .map(|id| SealedOutput { recipient: id.to_string(), ciphertext: hex::encode(sealer.seal(id, &plain)) })
                .collect();
            Some(TranscriptOutcome {
                index: sel.index as u64,
                volume: sel.volume,
                r_mm: sel.r_mm,
                r_rm: sel.r_rm,
                r_bd: sel.r_bd,
                mm_proof: prove_membership(&mm.schedule.entries, mm_salts, sel.index)?,
                rm_proof: prove_membership(&rm.schedule.entries, rm_salts, sel.index)?,
                sealed,
            })
        }
        (Phase::Settled, None) => return Err(AuditError::Invariant("settled contract has no outcome".into())),
        _ => None,
    };
    let events: Vec<PublicLogEntry> = state.log.iter().map(PublicLogEntry::from).collect();
    let [mm_open, rm_open] = opened;
    let opening = match (auditor_mode, mm_open, rm_open) {
        (true, Some(mm), Some(rm)) => Some(AuditorOpening { mm, rm }),
        _ => None,
    };
    Ok(AuditTranscript {
        version: TRANSCRIPT_VERSION,
        mm_root: state.mm_report.as_ref().map(|r| r.commitment),
        rm_root: state.rm_report.as_ref().map(|r| r.commitment),
        spread_constraint: state.spread_constraint,
        phase: state.phase,
        outcome,
        chain_head: event_chain(&events),
        events,
        opening,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PublicOk,
    FullOk,
    Fail(String),
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::PublicOk => f.write_str("PublicOK"),
            Verdict::FullOk => f.write_str("FullOK"),
            Verdict::Fail(reason) => write!(f, "Fail({reason})"),
        }
    }
}

/// Parses transcript bytes, insists they are in canonical form, then runs
/// [`verify_transcript`].
pub fn verify_transcript_bytes(bytes: &[u8], expected: &ExpectedRoots, sealer: &dyn Sealer) -> Verdict {
    let transcript: AuditTranscript = match serde_json::from_slice(bytes) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(format!("parse: {e}")),
    };
    if transcript.to_canonical_json().as_bytes() != bytes {
        return Verdict::Fail("canonical form".into());
    }
    verify_transcript(&transcript, expected, sealer)
}

macro_rules! ensure {
    ($cond:expr, $reason:expr) => {
        if !$cond {
            return Verdict::Fail($reason.to_string());
        }
    };
}

/// Checks, in order: version, roots, event chain, roots against the logged
/// commitments, phase, spread constraint, outcome (membership, hurdle,
/// interdealer rate, sealed outputs) and, when present, the auditor
/// opening by replaying the selection. The first failing check is named.
pub fn verify_transcript(t: &AuditTranscript, expected: &ExpectedRoots, sealer: &dyn Sealer) -> Verdict {
    ensure!(t.version == TRANSCRIPT_VERSION, "version");
    ensure!(t.mm_root == expected.mm_root && t.rm_root == expected.rm_root, "roots");
    ensure!(event_chain(&t.events) == t.chain_head, "event chain");
    ensure!(t.events.iter().enumerate().all(|(i, e)| e.seq == i as u64), "event chain");

    let mut logged_roots = (None, None);
    let mut dealers = (None, None);
    let mut first_kappa = None;
    let mut derived_kappa = None;
    for e in &t.events {
        match &e.event {
            PublicEvent::SubmitSchedule { dealer_id, side: Dealer::Mm, commitment } => {
                logged_roots.0 = Some(*commitment);
                dealers.0 = Some(dealer_id.as_str());
            }
            PublicEvent::SubmitSchedule { dealer_id, side: Dealer::Rm, commitment } => {
                logged_roots.1 = Some(*commitment);
                dealers.1 = Some(dealer_id.as_str());
            }
            PublicEvent::SubmitFirstSpread { kappa, .. } => first_kappa = Some(*kappa),
            PublicEvent::RespondSpread { response, .. } => {
                derived_kappa = match response {
                    SpreadResponse::Accept => first_kappa,
                    SpreadResponse::Raise { kappa } => Some(*kappa),
                }
            }
            _ => {}
        }
    }
    ensure!(logged_roots == (t.mm_root, t.rm_root), "commitment log");
    ensure!(t.phase.is_terminal(), "phase");
    ensure!(t.events.last().map(|e| e.phase_after) == Some(t.phase), "phase");
    ensure!(derived_kappa == t.spread_constraint, "spread constraint");

    match (&t.outcome, t.phase) {
        (None, Phase::Aborted) => {}
        (Some(o), Phase::Settled) => {
            let (Some(mm_root), Some(rm_root), Some(kappa)) = (t.mm_root, t.rm_root, t.spread_constraint) else {
                return Verdict::Fail("outcome".into());
            };
            ensure!(verify_membership(&mm_root, &o.mm_proof), "membership");
            ensure!(verify_membership(&rm_root, &o.rm_proof), "membership");
            ensure!(
                o.mm_proof.index == o.index && o.rm_proof.index == o.index && o.mm_proof.leaf_count == o.rm_proof.leaf_count,
                "membership"
            );
            ensure!(
                o.mm_proof.volume == o.volume && o.rm_proof.volume == o.volume && o.mm_proof.rate == o.r_mm && o.rm_proof.rate == o.r_rm,
                "outcome"
            );
            let c = Candidate { volume: o.volume, r_mm: o.r_mm, r_rm: o.r_rm };
            ensure!(o.volume > Fixed::ZERO && c.clears(kappa), "hurdle");
            ensure!(o.r_bd == o.r_mm.midpoint(o.r_rm), "interdealer rate");
            let plain = outcome_plaintext(o.r_mm, o.r_rm, o.r_bd, o.volume);
            let recipients = [dealers.0, dealers.1];
            ensure!(o.sealed.len() == 2, "sealed outputs");
            for (s, who) in o.sealed.iter().zip(recipients) {
                ensure!(Some(s.recipient.as_str()) == who, "sealed outputs");
                ensure!(hex::encode(sealer.seal(&s.recipient, &plain)) == s.ciphertext, "sealed outputs");
            }
        }
        _ => return Verdict::Fail("outcome".into()),
    }

    let Some(opening) = &t.opening else {
        return Verdict::PublicOk;
    };
    for (leaves, root, side) in [(&opening.mm, t.mm_root, "opening mm"), (&opening.rm, t.rm_root, "opening rm")] {
        let entries: Vec<ScheduleEntry> = leaves.iter().map(|l| ScheduleEntry { volume: l.volume, rate: l.rate }).collect();
        let salts: Vec<[u8; 32]> = leaves.iter().map(|l| l.salt.0).collect();
        match commit_schedule(&entries, &salts) {
            Ok(c) if Some(c.root) == root => {}
            _ => return Verdict::Fail(side.to_string()),
        }
    }
    ensure!(
        opening.mm.len() == opening.rm.len() && opening.mm.iter().zip(&opening.rm).all(|(a, b)| a.volume == b.volume),
        "opening grid"
    );
    let candidates: Vec<Candidate> = opening
        .mm
        .iter()
        .zip(&opening.rm)
        .map(|(a, b)| Candidate { volume: a.volume, r_mm: a.rate, r_rm: b.rate })
        .collect();
    let replay = t.spread_constraint.and_then(|k| select_trade(&candidates, &filter_feasible(&candidates, k)));
    let recorded = t.outcome.as_ref().map(|o| (o.index as usize, o.volume, o.r_mm, o.r_rm, o.r_bd));
    let replayed = replay.map(|s| (s.index, s.volume, s.r_mm, s.r_rm, s.r_bd));
    match (recorded, replayed) {
        (a, b) if a == b => Verdict::FullOk,
        // an abort before selection leaves nothing to replay
        (None, Some(_)) if t.spread_constraint.is_some() && !t.events.iter().any(|e| e.event == PublicEvent::RequestExecute) => {
            Verdict::FullOk
        }
        _ => Verdict::Fail("optimality".into()),
    }
}
