//! Enumeration and memory caps shared by every exhaustive routine.

use crate::error::{Error, Result};

/// Environment variable holding the memory cap in MiB for dense quantum states.
pub const MEM_CAP_ENV: &str = "SALTLAB_MEM_CAP_MB";

const DEFAULT_MEM_CAP_MB: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Maximum number of oracle tables enumerated for one game.
    pub max_oracles: u128,
    /// Maximum size of a challenge or answer space.
    pub max_space: u128,
    /// Maximum number of advice maps or compositions scanned.
    pub max_enumeration: u128,
    /// Maximum number of complex amplitudes held in one state vector.
    pub max_amplitudes: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_oracles: 1 << 20,
            max_space: 1 << 16,
            max_enumeration: 1 << 24,
            max_amplitudes: amplitudes_for_mb(DEFAULT_MEM_CAP_MB),
        }
    }
}

fn amplitudes_for_mb(mb: u64) -> u128 {
    // one Complex64 is 16 bytes
    (mb as u128) * (1 << 20) / 16
}

impl Budget {
    /// Default budget with the amplitude cap read from `SALTLAB_MEM_CAP_MB`.
    pub fn from_env() -> Self {
        let mut b = Budget::default();
        if let Some(mb) = std::env::var(MEM_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
        {
            b.max_amplitudes = amplitudes_for_mb(mb);
        }
        b
    }

    pub(crate) fn check(what: &'static str, needed: u128, cap: u128) -> Result<()> {
        if needed > cap {
            Err(Error::BudgetExceeded { what, needed, cap })
        } else {
            Ok(())
        }
    }

    pub fn check_oracles(&self, needed: u128) -> Result<()> {
        Self::check("oracle enumeration", needed, self.max_oracles)
    }

    pub fn check_space(&self, what: &'static str, needed: u128) -> Result<()> {
        Self::check(what, needed, self.max_space)
    }

    pub fn check_enumeration(&self, what: &'static str, needed: u128) -> Result<()> {
        Self::check(what, needed, self.max_enumeration)
    }

    pub fn check_amplitudes(&self, needed: u128) -> Result<()> {
        Self::check("state vector", needed, self.max_amplitudes)
    }
}

/// Saturating power used for budget estimates.
pub(crate) fn sat_pow(base: u128, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_pow_saturates() {
        assert_eq!(sat_pow(2, 10), 1024);
        assert_eq!(sat_pow(10, 100), u128::MAX);
        assert_eq!(sat_pow(0, 0), 1);
    }

    #[test]
    fn check_reports_shortfall() {
        let b = Budget {
            max_oracles: 4,
            ..Budget::default()
        };
        assert!(b.check_oracles(4).is_ok());
        assert_eq!(
            b.check_oracles(5),
            Err(Error::BudgetExceeded {
                what: "oracle enumeration",
                needed: 5,
                cap: 4
            })
        );
    }
}
