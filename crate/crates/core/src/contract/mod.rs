//! The trading protocol as a deterministic state machine.
//!
//! Phases run Commit → Negotiate → Select → Execute → Settled, with Aborted
//! reachable from every live phase. Events are applied one at a time; a
//! rejected event leaves the state untouched. Time is logical and only
//! advances through `Tick`.

pub mod ledger;
pub mod selection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{stub_signature, Digest};
use crate::equilibrium::Dealer;
use crate::fixed::Fixed;
pub use ledger::{Asset, EscrowLedger, Party, Transfer};
pub use selection::{filter_feasible, select_trade, Candidate, Selection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("event {event} not allowed in phase {phase:?}")]
    WrongPhase { event: &'static str, phase: Phase },
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("unknown dealer `{0}`")]
    UnknownDealer(String),
    #[error("dealer `{got}` is not the expected mover `{expected}`")]
    WrongMover { expected: String, got: String },
    #[error("response spread {response} is below the first mover's {first}")]
    SpreadBelowFirst { first: Fixed, response: Fixed },
    #[error("spread must be nonnegative, got {0}")]
    NegativeSpread(Fixed),
    #[error("schedule is not on the agreed volume grid")]
    GridMismatch,
    #[error("schedule rates are not monotone for its side")]
    NonMonotone,
    #[error("signature check failed for {0}")]
    BadSignature(String),
    #[error("deposit of {amount} exceeds the remaining requirement {remaining}")]
    ExcessDeposit { amount: Fixed, remaining: Fixed },
    #[error("{party:?} holds {available} {asset:?}, needs {needed}")]
    InsufficientBalance { party: Party, asset: Asset, needed: Fixed, available: Fixed },
    #[error("amounts must be nonnegative")]
    NegativeAmount,
    #[error("clock cannot move backwards from {current} to {requested}")]
    ClockRegression { current: u64, requested: u64 },
    #[error("no default pending")]
    NoDefault,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("invalid contract configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Commit,
    Negotiate,
    Select,
    Execute,
    Settled,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Settled | Phase::Aborted)
    }
}

/// The client behind each side of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Client {
    MoneyMarket,
    RepoMarket,
}

impl Client {
    pub fn party(self) -> Party {
        match self {
            Client::MoneyMarket => Party::MoneyMarket,
            Client::RepoMarket => Party::RepoMarket,
        }
    }

    fn escrow(self) -> Party {
        match self {
            Client::MoneyMarket => Party::EscrowMm,
            Client::RepoMarket => Party::EscrowRm,
        }
    }

    /// Cash from the lender, securities from the borrower.
    pub fn asset(self) -> Asset {
        match self {
            Client::MoneyMarket => Asset::Cash,
            Client::RepoMarket => Asset::Securities,
        }
    }

    pub fn signer_id(self) -> &'static str {
        match self {
            Client::MoneyMarket => "money-market",
            Client::RepoMarket => "repo-market",
        }
    }

    pub fn of(side: Dealer) -> Client {
        match side {
            Dealer::Mm => Client::MoneyMarket,
            Dealer::Rm => Client::RepoMarket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub volume: Fixed,
    pub rate: Fixed,
}

/// A client schedule on the agreed grid, signed by the client and its
/// dealer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedSchedule {
    pub dealer_id: String,
    pub side: Dealer,
    pub entries: Vec<ScheduleEntry>,
    pub client_signature: Digest,
    pub dealer_signature: Digest,
}

impl ReportedSchedule {
    /// Builds a schedule carrying valid stub signatures.
    pub fn signed(dealer_id: &str, side: Dealer, entries: Vec<ScheduleEntry>) -> Self {
        let payload = signing_payload(dealer_id, side, &entries);
        ReportedSchedule {
            dealer_id: dealer_id.to_string(),
            side,
            client_signature: stub_signature(Client::of(side).signer_id(), &payload),
            dealer_signature: stub_signature(dealer_id, &payload),
            entries,
        }
    }

    pub fn from_rates(dealer_id: &str, side: Dealer, grid: &[Fixed], rates: &[Fixed]) -> Self {
        let entries = grid.iter().zip(rates).map(|(&volume, &rate)| ScheduleEntry { volume, rate }).collect();
        Self::signed(dealer_id, side, entries)
    }

    fn signatures_valid(&self) -> bool {
        let payload = signing_payload(&self.dealer_id, self.side, &self.entries);
        self.client_signature == stub_signature(Client::of(self.side).signer_id(), &payload)
            && self.dealer_signature == stub_signature(&self.dealer_id, &payload)
    }
}

fn signing_payload(dealer_id: &str, side: Dealer, entries: &[ScheduleEntry]) -> Vec<u8> {
    serde_json::to_vec(&(dealer_id, side, entries)).expect("schedule payload serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub dealer_id: String,
    pub kappa: Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpreadResponse {
    Accept,
    Raise { kappa: Fixed },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    SubmitSchedule { schedule: ReportedSchedule, commitment: Digest },
    PostDeposit { client: Client, amount: Fixed },
    SubmitFirstSpread { dealer_id: String, kappa: Fixed },
    RespondSpread { dealer_id: String, response: SpreadResponse },
    Tick { now: u64 },
    RequestExecute,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::SubmitSchedule { .. } => "SubmitSchedule",
            Event::PostDeposit { .. } => "PostDeposit",
            Event::SubmitFirstSpread { .. } => "SubmitFirstSpread",
            Event::RespondSpread { .. } => "RespondSpread",
            Event::Tick { .. } => "Tick",
            Event::RequestExecute => "RequestExecute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    pub time: u64,
    pub event: Event,
    pub phase_after: Phase,
}

/// Last logical time at which each live phase may still make progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deadlines {
    pub commit: u64,
    pub negotiate: u64,
    pub select: u64,
    pub execute: u64,
}

impl Deadlines {
    pub fn of(&self, phase: Phase) -> Option<u64> {
        match phase {
            Phase::Commit => Some(self.commit),
            Phase::Negotiate => Some(self.negotiate),
            Phase::Select => Some(self.select),
            Phase::Execute => Some(self.execute),
            Phase::Settled | Phase::Aborted => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractConfig {
    pub grid: Vec<Fixed>,
    pub mm_dealer: String,
    pub rm_dealer: String,
    pub deadlines: Deadlines,
    /// Opening cash of the money-market client.
    pub mm_endowment: Fixed,
    /// Opening securities of the repo-market client.
    pub rm_endowment: Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeadlineStatus {
    Ok,
    Expired,
}

/// Second-leg repurchase obligation recorded at settlement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub payer: Party,
    pub payee: Party,
    pub asset: Asset,
    pub amount: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmittedSchedule {
    pub schedule: ReportedSchedule,
    pub commitment: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub config: ContractConfig,
    pub phase: Phase,
    pub clock: u64,
    pub first_mover: String,
    pub mm_report: Option<SubmittedSchedule>,
    pub rm_report: Option<SubmittedSchedule>,
    pub mm_deposit: Fixed,
    pub rm_deposit: Fixed,
    pub first_spread: Option<SpreadReport>,
    pub spread_constraint: Option<Fixed>,
    pub feasible: Vec<usize>,
    pub outcome: Option<Selection>,
    pub obligations: Vec<Obligation>,
    pub ledger: EscrowLedger,
    pub log: Vec<LoggedEvent>,
    pub expired: Vec<Phase>,
    pub abort_reason: Option<String>,
}

impl ContractState {
    pub fn genesis(config: ContractConfig) -> Result<Self, ProtocolError> {
        let g = &config.grid;
        if g.is_empty() || g[0].is_negative() || g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ProtocolError::Config("grid must be nonempty, nonnegative and strictly increasing".into()));
        }
        if config.mm_dealer.is_empty() || config.rm_dealer.is_empty() || config.mm_dealer == config.rm_dealer {
            return Err(ProtocolError::Config("dealer ids must be nonempty and distinct".into()));
        }
        let d = config.deadlines;
        if !(d.commit < d.negotiate && d.negotiate < d.select && d.select < d.execute) {
            return Err(ProtocolError::Config("phase deadlines must be strictly increasing".into()));
        }
        let ledger = EscrowLedger::with_endowments(&[
            (Party::MoneyMarket, Asset::Cash, config.mm_endowment),
            (Party::RepoMarket, Asset::Securities, config.rm_endowment),
        ])?;
        let first_mover = config.mm_dealer.clone().min(config.rm_dealer.clone());
        Ok(ContractState {
            config,
            phase: Phase::Commit,
            clock: 0,
            first_mover,
            mm_report: None,
            rm_report: None,
            mm_deposit: Fixed::ZERO,
            rm_deposit: Fixed::ZERO,
            first_spread: None,
            spread_constraint: None,
            feasible: Vec::new(),
            outcome: None,
            obligations: Vec::new(),
            ledger,
            log: Vec::new(),
            expired: Vec::new(),
            abort_reason: None,
        })
    }

    /// Deposit each client owes under the max-deposit rule: the largest grid
    /// volume, in cash at unit price for the lender and in securities for
    /// the borrower.
    pub fn required_deposit(&self) -> Fixed {
        *self.config.grid.last().unwrap()
    }

    pub fn deposit(&self, client: Client) -> Fixed {
        match client {
            Client::MoneyMarket => self.mm_deposit,
            Client::RepoMarket => self.rm_deposit,
        }
    }

    pub fn second_mover(&self) -> &str {
        if self.first_mover == self.config.mm_dealer {
            &self.config.rm_dealer
        } else {
            &self.config.mm_dealer
        }
    }

    pub fn dealer_side(&self, dealer_id: &str) -> Option<Dealer> {
        if dealer_id == self.config.mm_dealer {
            Some(Dealer::Mm)
        } else if dealer_id == self.config.rm_dealer {
            Some(Dealer::Rm)
        } else {
            None
        }
    }

    /// Paired grid points from both reports, once both are in.
    pub fn candidates(&self) -> Option<Vec<Candidate>> {
        let (mm, rm) = (self.mm_report.as_ref()?, self.rm_report.as_ref()?);
        Some(
            mm.schedule
                .entries
                .iter()
                .zip(&rm.schedule.entries)
                .map(|(a, b)| Candidate { volume: a.volume, r_mm: a.rate, r_rm: b.rate })
                .collect(),
        )
    }

    /// Whether `phase` is past its deadline at time `now` (inclusive
    /// boundary). Once a phase has expired it stays expired.
    pub fn check_deadline(&self, phase: Phase, now: u64) -> Result<DeadlineStatus, ProtocolError> {
        let deadline = self
            .config
            .deadlines
            .of(phase)
            .ok_or_else(|| ProtocolError::Config(format!("phase {phase:?} has no deadline")))?;
        if now > deadline || self.expired.contains(&phase) {
            Ok(DeadlineStatus::Expired)
        } else {
            Ok(DeadlineStatus::Ok)
        }
    }

    /// Clients whose deposit is incomplete.
    pub fn defaulters(&self) -> Vec<Client> {
        let required = self.required_deposit();
        [Client::MoneyMarket, Client::RepoMarket].into_iter().filter(|&c| self.deposit(c) < required).collect()
    }

    /// Applies one event, returning the successor state. The input state is
    /// never modified.
    pub fn apply_event(&self, event: Event) -> Result<ContractState, ProtocolError> {
        let mut next = self.clone();
        next.apply(&event)?;
        next.log.push(LoggedEvent { seq: self.log.len() as u64, time: next.clock, event, phase_after: next.phase });
        Ok(next)
    }

    fn wrong_phase(&self, event: &Event) -> ProtocolError {
        ProtocolError::WrongPhase { event: event.name(), phase: self.phase }
    }

    fn apply(&mut self, event: &Event) -> Result<(), ProtocolError> {
        match event {
            Event::Tick { now } => return self.tick(*now),
            _ if self.phase.is_terminal() => return Err(self.wrong_phase(event)),
            _ => {}
        }
        match (self.phase, event) {
            (Phase::Commit, Event::SubmitSchedule { schedule, commitment }) => {
                self.submit_schedule(schedule, *commitment)?;
                self.maybe_open_negotiation();
            }
            (Phase::Commit, Event::PostDeposit { client, amount }) => {
                self.post_deposit(*client, *amount)?;
                self.maybe_open_negotiation();
            }
            (Phase::Negotiate, Event::SubmitFirstSpread { dealer_id, kappa }) => {
                if self.first_spread.is_some() {
                    return Err(ProtocolError::Duplicate("first spread".into()));
                }
                self.dealer_side(dealer_id).ok_or_else(|| ProtocolError::UnknownDealer(dealer_id.clone()))?;
                if *dealer_id != self.first_mover {
                    return Err(ProtocolError::WrongMover { expected: self.first_mover.clone(), got: dealer_id.clone() });
                }
                if kappa.is_negative() {
                    return Err(ProtocolError::NegativeSpread(*kappa));
                }
                self.first_spread = Some(SpreadReport { dealer_id: dealer_id.clone(), kappa: *kappa });
            }
            (Phase::Negotiate, Event::RespondSpread { dealer_id, response }) => {
                let first = self.first_spread.as_ref().ok_or_else(|| self.wrong_phase(event))?.kappa;
                self.dealer_side(dealer_id).ok_or_else(|| ProtocolError::UnknownDealer(dealer_id.clone()))?;
                if dealer_id != self.second_mover() {
                    return Err(ProtocolError::WrongMover { expected: self.second_mover().to_string(), got: dealer_id.clone() });
                }
                let kappa = match *response {
                    SpreadResponse::Accept => first,
                    SpreadResponse::Raise { kappa } if kappa >= first => kappa,
                    SpreadResponse::Raise { kappa } => {
                        return Err(ProtocolError::SpreadBelowFirst { first, response: kappa });
                    }
                };
                self.spread_constraint = Some(kappa);
                self.phase = Phase::Select;
            }
            (Phase::Select, Event::RequestExecute) => self.fix_contract()?,
            (Phase::Execute, Event::RequestExecute) => self.settle()?,
            _ => return Err(self.wrong_phase(event)),
        }
        Ok(())
    }

    fn submit_schedule(&mut self, schedule: &ReportedSchedule, commitment: Digest) -> Result<(), ProtocolError> {
        let side = self
            .dealer_side(&schedule.dealer_id)
            .ok_or_else(|| ProtocolError::UnknownDealer(schedule.dealer_id.clone()))?;
        if side != schedule.side {
            return Err(ProtocolError::Config(format!(
                "dealer `{}` reports for the {:?} side",
                schedule.dealer_id, side
            )));
        }
        let slot_taken = match side {
            Dealer::Mm => self.mm_report.is_some(),
            Dealer::Rm => self.rm_report.is_some(),
        };
        if slot_taken {
            return Err(ProtocolError::Duplicate(format!("schedule from `{}`", schedule.dealer_id)));
        }
        if schedule.entries.len() != self.config.grid.len()
            || schedule.entries.iter().zip(&self.config.grid).any(|(e, g)| e.volume != *g)
        {
            return Err(ProtocolError::GridMismatch);
        }
        let monotone = schedule.entries.windows(2).all(|w| match side {
            Dealer::Mm => w[1].rate >= w[0].rate,
            Dealer::Rm => w[1].rate <= w[0].rate,
        });
        if !monotone {
            return Err(ProtocolError::NonMonotone);
        }
        if !schedule.signatures_valid() {
            return Err(ProtocolError::BadSignature(schedule.dealer_id.clone()));
        }
        let submitted = Some(SubmittedSchedule { schedule: schedule.clone(), commitment });
        match side {
            Dealer::Mm => self.mm_report = submitted,
            Dealer::Rm => self.rm_report = submitted,
        }
        Ok(())
    }

    fn post_deposit(&mut self, client: Client, amount: Fixed) -> Result<(), ProtocolError> {
        if amount.is_negative() {
            return Err(ProtocolError::NegativeAmount);
        }
        let remaining = Fixed(self.required_deposit().raw() - self.deposit(client).raw());
        if amount > remaining {
            return Err(ProtocolError::ExcessDeposit { amount, remaining });
        }
        self.ledger.transfer(client.party(), client.escrow(), client.asset(), amount, "deposit")?;
        let slot = match client {
            Client::MoneyMarket => &mut self.mm_deposit,
            Client::RepoMarket => &mut self.rm_deposit,
        };
        *slot = Fixed(slot.raw() + amount.raw());
        Ok(())
    }

    fn maybe_open_negotiation(&mut self) {
        if self.mm_report.is_some() && self.rm_report.is_some() && self.defaulters().is_empty() {
            self.phase = Phase::Negotiate;
        }
    }

    fn tick(&mut self, now: u64) -> Result<(), ProtocolError> {
        if now < self.clock {
            return Err(ProtocolError::ClockRegression { current: self.clock, requested: now });
        }
        self.clock = now;
        if self.phase.is_terminal() || self.check_deadline(self.phase, now)? == DeadlineStatus::Ok {
            return Ok(());
        }
        self.expired.push(self.phase);
        if self.phase == Phase::Commit && !self.defaulters().is_empty() {
            self.distribute_default()
        } else {
            self.abort(format!("{:?} deadline passed", self.phase))
        }
    }

    /// Returns every escrowed deposit to its client and aborts.
    fn abort(&mut self, reason: String) -> Result<(), ProtocolError> {
        for client in [Client::MoneyMarket, Client::RepoMarket] {
            self.ledger.sweep(client.escrow(), client.party(), client.asset(), "refund")?;
        }
        self.phase = Phase::Aborted;
        self.abort_reason = Some(reason);
        Ok(())
    }

    /// Splits the defaulters' posted deposits equally among the agents that
    /// did not default (both dealers plus any complying client), refunds
    /// the compliant clients and aborts. Leftover raw units are handed out
    /// one each in fixed party order.
    pub fn distribute_default(&mut self) -> Result<(), ProtocolError> {
        let defaulters = self.defaulters();
        if self.phase != Phase::Commit || defaulters.is_empty() {
            return Err(ProtocolError::NoDefault);
        }
        let mut recipients = vec![Party::DealerMm, Party::DealerRm];
        for client in [Client::MoneyMarket, Client::RepoMarket] {
            if !defaulters.contains(&client) {
                recipients.push(client.party());
                self.ledger.sweep(client.escrow(), client.party(), client.asset(), "refund")?;
            }
        }
        recipients.sort();
        for &client in &defaulters {
            let pool = self.ledger.balance(client.escrow(), client.asset());
            let (share, mut remainder) = pool.split(recipients.len() as i64);
            for &party in &recipients {
                let extra = if remainder > 0 {
                    remainder -= 1;
                    1
                } else {
                    0
                };
                let amount = Fixed(share.raw() + extra);
                if amount > Fixed::ZERO {
                    self.ledger.transfer(client.escrow(), party, client.asset(), amount, "default distribution")?;
                }
            }
        }
        self.phase = Phase::Aborted;
        let names: Vec<&str> = defaulters.iter().map(|c| c.signer_id()).collect();
        self.abort_reason = Some(format!("deposit default by {}", names.join(", ")));
        Ok(())
    }

    /// Filters by the spread constraint and fixes the selected trade, or
    /// aborts with refunds when nothing clears it.
    fn fix_contract(&mut self) -> Result<(), ProtocolError> {
        let kappa = self.spread_constraint.ok_or_else(|| ProtocolError::Invariant("no spread constraint".into()))?;
        let candidates = self.candidates().ok_or_else(|| ProtocolError::Invariant("missing reports".into()))?;
        self.feasible = filter_feasible(&candidates, kappa);
        match select_trade(&candidates, &self.feasible) {
            Some(sel) => {
                self.outcome = Some(sel);
                self.phase = Phase::Execute;
                Ok(())
            }
            None => self.abort("no grid point clears the spread constraint".into()),
        }
    }

    /// First-leg transfers through both dealers, excess refunds and the
    /// second-leg obligations.
    fn settle(&mut self) -> Result<(), ProtocolError> {
        let sel = self.outcome.ok_or_else(|| ProtocolError::Invariant("settle without outcome".into()))?;
        let t = sel.volume;
        for (escrow, asset) in [(Party::EscrowMm, Asset::Cash), (Party::EscrowRm, Asset::Securities)] {
            if self.ledger.balance(escrow, asset) < t {
                return Err(ProtocolError::Invariant(format!("{escrow:?} cannot cover the trade")));
            }
        }
        let cash_path = [Party::EscrowMm, Party::DealerMm, Party::DealerRm, Party::RepoMarket];
        let sec_path = [Party::EscrowRm, Party::DealerRm, Party::DealerMm, Party::MoneyMarket];
        for w in cash_path.windows(2) {
            self.ledger.transfer(w[0], w[1], Asset::Cash, t, "first leg")?;
        }
        for w in sec_path.windows(2) {
            self.ledger.transfer(w[0], w[1], Asset::Securities, t, "first leg")?;
        }
        self.ledger.sweep(Party::EscrowMm, Party::MoneyMarket, Asset::Cash, "excess refund")?;
        self.ledger.sweep(Party::EscrowRm, Party::RepoMarket, Asset::Securities, "excess refund")?;

        let repurchase = |rate: Fixed| -> Result<Fixed, ProtocolError> {
            let price = Fixed::ONE.checked_add(rate).ok_or(ProtocolError::Overflow)?;
            t.checked_mul(price).ok_or(ProtocolError::Overflow)
        };
        self.obligations = vec![
            Obligation { payer: Party::DealerMm, payee: Party::MoneyMarket, asset: Asset::Cash, amount: repurchase(sel.r_mm)? },
            Obligation { payer: Party::DealerRm, payee: Party::DealerMm, asset: Asset::Cash, amount: repurchase(sel.r_bd)? },
            Obligation { payer: Party::RepoMarket, payee: Party::DealerRm, asset: Asset::Cash, amount: repurchase(sel.r_rm)? },
            Obligation { payer: Party::MoneyMarket, payee: Party::DealerMm, asset: Asset::Securities, amount: t },
            Obligation { payer: Party::DealerMm, payee: Party::DealerRm, asset: Asset::Securities, amount: t },
            Obligation { payer: Party::DealerRm, payee: Party::RepoMarket, asset: Asset::Securities, amount: t },
        ];
        self.phase = Phase::Settled;
        Ok(())
    }

    /// Canonical document: pretty JSON with declaration-order keys and a
    /// trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }
}
