//! Escrow ledger: balances per party and asset, plus a transfer log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::fixed::Fixed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    MoneyMarket,
    DealerMm,
    DealerRm,
    RepoMarket,
    EscrowMm,
    EscrowRm,
}

impl Party {
    pub const ALL: [Party; 6] = [
        Party::MoneyMarket,
        Party::DealerMm,
        Party::DealerRm,
        Party::RepoMarket,
        Party::EscrowMm,
        Party::EscrowRm,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asset {
    Cash,
    Securities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: Party,
    pub to: Party,
    pub asset: Asset,
    pub amount: Fixed,
    pub memo: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowLedger {
    balances: BTreeMap<Party, BTreeMap<Asset, Fixed>>,
    transfers: Vec<Transfer>,
}

impl EscrowLedger {
    /// Ledger with the given opening balances; everything else starts at
    /// zero. Opening balances are the only boundary flows.
    pub fn with_endowments(endowments: &[(Party, Asset, Fixed)]) -> Result<Self, ProtocolError> {
        let mut balances = BTreeMap::new();
        for p in Party::ALL {
            balances.insert(p, BTreeMap::from([(Asset::Cash, Fixed::ZERO), (Asset::Securities, Fixed::ZERO)]));
        }
        for &(party, asset, amount) in endowments {
            if amount.is_negative() {
                return Err(ProtocolError::Config(format!("negative endowment for {party:?}")));
            }
            let slot = balances.get_mut(&party).unwrap().get_mut(&asset).unwrap();
            *slot = slot.checked_add(amount).ok_or(ProtocolError::Overflow)?;
        }
        Ok(EscrowLedger { balances, transfers: Vec::new() })
    }

    pub fn balance(&self, party: Party, asset: Asset) -> Fixed {
        self.balances[&party][&asset]
    }

    pub fn total(&self, asset: Asset) -> i128 {
        self.balances.values().map(|b| b[&asset].raw() as i128).sum()
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// Moves `amount` between parties; rejects negative amounts and
    /// overdrafts without changing anything.
    pub fn transfer(&mut self, from: Party, to: Party, asset: Asset, amount: Fixed, memo: &str) -> Result<(), ProtocolError> {
        if amount.is_negative() {
            return Err(ProtocolError::NegativeAmount);
        }
        let available = self.balance(from, asset);
        if available < amount {
            return Err(ProtocolError::InsufficientBalance { party: from, asset, needed: amount, available });
        }
        let credited = self.balance(to, asset).checked_add(amount).ok_or(ProtocolError::Overflow)?;
        *self.balances.get_mut(&from).unwrap().get_mut(&asset).unwrap() = Fixed(available.raw() - amount.raw());
        *self.balances.get_mut(&to).unwrap().get_mut(&asset).unwrap() = credited;
        self.transfers.push(Transfer { from, to, asset, amount, memo: memo.to_string() });
        Ok(())
    }

    /// Empties `escrow` of `asset` into `to`, skipping zero transfers.
    pub fn sweep(&mut self, escrow: Party, to: Party, asset: Asset, memo: &str) -> Result<(), ProtocolError> {
        let amount = self.balance(escrow, asset);
        if amount > Fixed::ZERO {
            self.transfer(escrow, to, asset, amount, memo)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> EscrowLedger {
        EscrowLedger::with_endowments(&[
            (Party::MoneyMarket, Asset::Cash, Fixed(100)),
            (Party::RepoMarket, Asset::Securities, Fixed(50)),
        ])
        .unwrap()
    }

    #[test]
    fn transfer_moves_and_conserves() {
        let mut l = ledger();
        l.transfer(Party::MoneyMarket, Party::EscrowMm, Asset::Cash, Fixed(40), "deposit").unwrap();
        assert_eq!(l.balance(Party::EscrowMm, Asset::Cash), Fixed(40));
        assert_eq!(l.total(Asset::Cash), 100);
        assert_eq!(l.transfers().len(), 1);
    }

    #[test]
    fn overdraft_is_rejected_untouched() {
        let mut l = ledger();
        let before = l.clone();
        assert!(l.transfer(Party::RepoMarket, Party::EscrowRm, Asset::Securities, Fixed(51), "x").is_err());
        assert!(l.transfer(Party::RepoMarket, Party::EscrowRm, Asset::Securities, Fixed(-1), "x").is_err());
        assert_eq!(l, before);
    }

    #[test]
    fn sweep_skips_empty() {
        let mut l = ledger();
        l.sweep(Party::EscrowMm, Party::MoneyMarket, Asset::Cash, "refund").unwrap();
        assert!(l.transfers().is_empty());
    }
}
