//! Passive attacks recovering residues of the tag identifier.
//!
//! When both rotation amounts are zero mod 96 a session uses only T-functions,
//! and `IDS_next - IDS` leaks `ID` modulo small `N`. The detection test
//! `C == (A ^ IDS) + (B - IDS) (mod N)` uses public values only.
//!
//! Attacker-side differences are computed on the integers in `[0, 2^96)`
//! without wrapping, then reduced with a non-negative remainder. This differs
//! from wrap-then-reduce whenever `N` does not divide 2^96.

mod efficiency;
mod oracle;
mod table1;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::protocol::{RotationVariant, Transcript};
use crate::word96::{ModulusError, Word96};

pub use efficiency::{efficiency_curve, EfficiencyPoint};
pub use oracle::{degenerate_precondition, oracle_filtered_attack};
pub use table1::{
    classify_modulus, estimate_joint_probability, table1, theoretical_probability, ModulusClass,
    ProbabilityEstimate, Table1Row,
};

/// Session budget used by the reference experiment (2^18).
pub const DEFAULT_SESSION_BUDGET: u64 = 1 << 18;
pub const DEFAULT_MODULUS: u64 = 96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Modulus(#[from] ModulusError),
    #[error("distribution attack needs 1 <= k <= 8, got {0}")]
    Exponent(u32),
    #[error("distribution attack needs a power-of-two modulus, got {0}")]
    NotPowerOfTwo(u64),
}

/// A reduction modulus `N >= 2` for attack statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(n: u64) -> Result<Self, ModulusError> {
        if n < 2 {
            return Err(ModulusError(n));
        }
        Ok(Modulus(n))
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    fn reduce_word(self, w: Word96) -> u64 {
        (w.value() % u128::from(self.0)) as u64
    }

    fn reduce_signed(self, v: i128) -> u64 {
        v.rem_euclid(i128::from(self.0)) as u64
    }

    /// Exponent of the largest power of two dividing `N`.
    pub const fn two_adic_valuation(self) -> u32 {
        self.0.trailing_zeros()
    }
}

impl Default for Modulus {
    fn default() -> Self {
        Modulus(DEFAULT_MODULUS)
    }
}

impl std::fmt::Display for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackConfig {
    pub modulus: Modulus,
    pub session_budget: u64,
    pub variant: RotationVariant,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            modulus: Modulus::default(),
            session_budget: DEFAULT_SESSION_BUDGET,
            variant: RotationVariant::Modular,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn new(modulus: u64) -> Result<Self, ModulusError> {
        Ok(AttackConfig {
            modulus: Modulus::new(modulus)?,
            ..AttackConfig::default()
        })
    }

    pub fn with_budget(self, session_budget: u64) -> Self {
        AttackConfig {
            session_budget,
            ..self
        }
    }

    pub fn with_variant(self, variant: RotationVariant) -> Self {
        AttackConfig { variant, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        AttackConfig { seed, ..self }
    }
}

/// Vote counters over residues `0..N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObservationHistogram {
    counts: Vec<u64>,
    total: u64,
}

/// Pearson chi-square test of a histogram against the uniform distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

impl ObservationHistogram {
    pub fn new(modulus: Modulus) -> Self {
        ObservationHistogram {
            counts: vec![0; modulus.get() as usize],
            total: 0,
        }
    }

    pub fn record(&mut self, residue: u64) {
        self.counts[residue as usize] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn modulus(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Most frequent residue, lowest on ties; `None` when nothing was counted.
    pub fn argmax(&self) -> Option<u64> {
        if self.total == 0 {
            return None;
        }
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        Some(best as u64)
    }

    pub fn chi_square_uniform(&self) -> Option<ChiSquareTest> {
        if self.total == 0 {
            return None;
        }
        let bins = self.counts.len() as f64;
        let expected = self.total as f64 / bins;
        let statistic: f64 = self
            .counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let dof = self.counts.len() as u64 - 1;
        let dist = ChiSquared::new(dof as f64).ok()?;
        Some(ChiSquareTest {
            statistic,
            degrees_of_freedom: dof,
            p_value: dist.sf(statistic),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GuessReport {
    /// `None` when no session contributed a vote.
    pub guess: Option<u64>,
    pub modulus: Modulus,
    pub histogram: ObservationHistogram,
    pub useful_sessions: u64,
    pub sessions_consumed: u64,
}

impl GuessReport {
    fn from_histogram(modulus: Modulus, histogram: ObservationHistogram, consumed: u64) -> Self {
        GuessReport {
            guess: histogram.argmax(),
            modulus,
            useful_sessions: histogram.total(),
            histogram,
            sessions_consumed: consumed,
        }
    }
}

/// `C == (A ^ IDS) + (B - IDS) (mod n)` with exact integer arithmetic.
pub fn detect_condition(t: &Transcript, n: Modulus) -> bool {
    let lhs = n.reduce_word(t.c);
    let rhs = (t.a ^ t.ids).as_i128() + (t.b.as_i128() - t.ids.as_i128());
    lhs == n.reduce_signed(rhs)
}

/// `(IDS_next - IDS) mod n` with an exact signed difference.
pub fn delta_residue(t: &Transcript, n: Modulus) -> u64 {
    n.reduce_signed(t.ids_next.as_i128() - t.ids.as_i128())
}

/// Online form of the filtered residue-vote attack.
#[derive(Clone, Debug)]
pub struct Fig2Attack {
    modulus: Modulus,
    budget: u64,
    consumed: u64,
    histogram: ObservationHistogram,
}

impl Fig2Attack {
    pub fn new(cfg: &AttackConfig) -> Self {
        Fig2Attack {
            modulus: cfg.modulus,
            budget: cfg.session_budget,
            consumed: 0,
            histogram: ObservationHistogram::new(cfg.modulus),
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed >= self.budget
    }

    pub fn sessions_consumed(&self) -> u64 {
        self.consumed
    }

    pub fn histogram(&self) -> &ObservationHistogram {
        &self.histogram
    }

    /// Consumes one session; returns whether it passed the filter. Sessions
    /// beyond the budget are ignored.
    pub fn observe(&mut self, t: &Transcript) -> bool {
        if self.is_exhausted() {
            return false;
        }
        self.consumed += 1;
        let useful = detect_condition(t, self.modulus);
        if useful {
            self.histogram.record(delta_residue(t, self.modulus));
        }
        useful
    }

    pub fn report(&self) -> GuessReport {
        GuessReport::from_histogram(self.modulus, self.histogram.clone(), self.consumed)
    }

    pub fn finish(self) -> GuessReport {
        GuessReport::from_histogram(self.modulus, self.histogram, self.consumed)
    }
}

/// Votes `(IDS_next - IDS) mod N` over sessions passing the detection test.
pub fn fig2_attack<I>(transcripts: I, cfg: &AttackConfig) -> GuessReport
where
    I: IntoIterator<Item = Transcript>,
{
    let mut attack = Fig2Attack::new(cfg);
    for t in transcripts {
        if attack.is_exhausted() {
            break;
        }
        attack.observe(&t);
    }
    attack.finish()
}

/// Unfiltered accumulator over `(IDS_next - IDS) mod 2^k`.
#[derive(Clone, Debug)]
pub struct DistributionAttack {
    modulus: Modulus,
    budget: u64,
    consumed: u64,
    histogram: ObservationHistogram,
}

impl DistributionAttack {
    pub fn new(k: u32, budget: u64) -> Result<Self, AttackError> {
        if !(1..=8).contains(&k) {
            return Err(AttackError::Exponent(k));
        }
        let modulus = Modulus::new(1 << k)?;
        Ok(DistributionAttack {
            modulus,
            budget,
            consumed: 0,
            histogram: ObservationHistogram::new(modulus),
        })
    }

    /// Accepts `N = 2^k` for `1 <= k <= 8`.
    pub fn for_modulus(n: u64, budget: u64) -> Result<Self, AttackError> {
        if !n.is_power_of_two() || n < 2 {
            return Err(AttackError::NotPowerOfTwo(n));
        }
        Self::new(n.trailing_zeros(), budget)
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed >= self.budget
    }

    pub fn observe(&mut self, t: &Transcript) {
        if self.is_exhausted() {
            return;
        }
        self.consumed += 1;
        self.histogram.record(delta_residue(t, self.modulus));
    }

    pub fn finish(self) -> GuessReport {
        GuessReport::from_histogram(self.modulus, self.histogram, self.consumed)
    }
}

/// Most frequent `(IDS_next - IDS) mod 2^k` over up to `budget` sessions.
pub fn distribution_attack<I>(transcripts: I, k: u32, budget: u64) -> Result<GuessReport, AttackError>
where
    I: IntoIterator<Item = Transcript>,
{
    let mut attack = DistributionAttack::new(k, budget)?;
    for t in transcripts {
        if attack.is_exhausted() {
            break;
        }
        attack.observe(&t);
    }
    Ok(attack.finish())
}

/// How a residue guess compares with the true residue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub exact: bool,
    /// Low bits on which guess and truth agree, capped at the 2-adic
    /// valuation of `N` (the bits a residue mod `N` actually determines).
    pub low_bits: u32,
}

pub fn residue_agreement(guess: u64, truth: u64, n: Modulus) -> Agreement {
    let cap = n.two_adic_valuation();
    let low_bits = (guess ^ truth).trailing_zeros().min(cap);
    Agreement {
        exact: guess == truth,
        low_bits,
    }
}
