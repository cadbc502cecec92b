//! Simulation-side instrument: votes only from sessions whose hidden keys
//! really satisfy the degenerate-rotation precondition.

use super::{delta_residue, AttackConfig, GuessReport, Modulus, ObservationHistogram};
use crate::protocol::{PartyState, RotationVariant};
use crate::sim::SimulatedSession;

/// Both rotations are the identity and `N` divides both keys.
pub fn degenerate_precondition(state: &PartyState, n: Modulus, variant: RotationVariant) -> bool {
    let divides = |k: crate::word96::Word96| k.value().is_multiple_of(u128::from(n.get()));
    variant.amount(state.k1) == 0
        && variant.amount(state.k2) == 0
        && divides(state.k1)
        && divides(state.k2)
}

/// Like the filtered attack, but the filter reads the session's true keys
/// instead of the public detection test.
pub fn oracle_filtered_attack<I>(sessions: I, cfg: &AttackConfig) -> GuessReport
where
    I: IntoIterator<Item = SimulatedSession>,
{
    let n = cfg.modulus;
    let mut histogram = ObservationHistogram::new(n);
    let mut consumed = 0;
    for s in sessions.into_iter().take(cfg.session_budget as usize) {
        consumed += 1;
        if degenerate_precondition(&s.before, n, cfg.variant) {
            histogram.record(delta_residue(&s.transcript, n));
        }
    }
    GuessReport::from_histogram(n, histogram, consumed)
}
