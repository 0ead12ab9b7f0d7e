use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard decision rules; all are `k`-out-of-`M` votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HardRule {
    And,
    Or,
    Majority,
    KOfM(usize),
}

impl HardRule {
    /// Vote count needed for an `m`-user decision.
    pub fn k(&self, m: usize) -> usize {
        match *self {
            HardRule::And => m,
            HardRule::Or => 1,
            HardRule::Majority => majority_k(m),
            HardRule::KOfM(k) => k,
        }
    }

    pub fn apply(&self, bits: &[u8]) -> Result<u8> {
        fuse_k_of_m(bits, self.k(bits.len()))
    }
}

/// Strict majority, `ceil((M + 1) / 2)`; an even split is a 0.
pub fn majority_k(m: usize) -> usize {
    (m + 2) / 2
}

pub fn fuse_k_of_m(bits: &[u8], k: usize) -> Result<u8> {
    let m = bits.len();
    if m == 0 {
        return Err(Error::Config("fusion needs at least one user".into()));
    }
    if k == 0 || k > m {
        return Err(Error::Config(format!("k = {k} must lie in [1, {m}]")));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Input(format!("{b} is not a bit")));
    }
    let votes = bits.iter().filter(|&&b| b == 1).count();
    Ok(u8::from(votes >= k))
}

pub fn fuse_and(bits: &[u8]) -> Result<u8> {
    HardRule::And.apply(bits)
}

pub fn fuse_or(bits: &[u8]) -> Result<u8> {
    HardRule::Or.apply(bits)
}

pub fn fuse_majority(bits: &[u8]) -> Result<u8> {
    HardRule::Majority.apply(bits)
}
