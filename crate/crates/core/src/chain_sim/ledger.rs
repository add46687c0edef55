use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{Address, Amount};

/// Signed balances. Every movement is a transfer, so balances always sum to zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    balances: BTreeMap<Address, i128>,
}

impl Ledger {
    pub fn transfer(&mut self, from: &Address, to: &Address, amount: Amount) {
        if amount == 0 {
            return;
        }
        *self.balances.entry(from.clone()).or_insert(0) -= amount as i128;
        *self.balances.entry(to.clone()).or_insert(0) += amount as i128;
    }

    pub fn balance(&self, who: &Address) -> i128 {
        self.balances.get(who).copied().unwrap_or(0)
    }

    pub fn total(&self) -> i128 {
        self.balances.values().sum()
    }

    pub fn balances(&self) -> &BTreeMap<Address, i128> {
        &self.balances
    }
}
