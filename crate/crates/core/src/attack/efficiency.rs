//! Sessions-to-success measurement for the filtered attack.

use serde::Serialize;

use super::{residue_agreement, Agreement, AttackConfig, Fig2Attack};
use crate::sim::Simulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EfficiencyPoint {
    pub sessions: u64,
    pub useful_sessions: u64,
    pub guess: Option<u64>,
    pub agreement: Option<Agreement>,
}

/// Runs one simulated tag under `cfg` and snapshots the running guess after
/// each checkpoint (sorted ascending, capped by the session budget).
pub fn efficiency_curve(cfg: &AttackConfig, checkpoints: &[u64]) -> Vec<EfficiencyPoint> {
    let mut checkpoints: Vec<u64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| c <= cfg.session_budget)
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut sim = Simulation::new(cfg.seed, cfg.variant);
    let truth = sim.id().mod_small(cfg.modulus.get()).unwrap_or_default();
    let mut attack = Fig2Attack::new(cfg);
    let mut points = Vec::with_capacity(checkpoints.len());
    for target in checkpoints {
        while attack.sessions_consumed() < target {
            attack.observe(&sim.step().transcript);
        }
        let guess = attack.histogram().argmax();
        points.push(EfficiencyPoint {
            sessions: target,
            useful_sessions: attack.histogram().total(),
            guess,
            agreement: guess.map(|g| residue_agreement(g, truth, cfg.modulus)),
        });
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_are_monotone() {
        let cfg = AttackConfig::new(32).unwrap().with_budget(1 << 12).with_seed(5);
        let points = efficiency_curve(&cfg, &[1 << 12, 16, 256, 1 << 20, 16]);
        let sessions: Vec<_> = points.iter().map(|p| p.sessions).collect();
        assert_eq!(sessions, vec![16, 256, 1 << 12]);
        assert!(points.windows(2).all(|w| w[0].useful_sessions <= w[1].useful_sessions));
    }

    #[test]
    fn power_of_two_modulus_converges() {
        let cfg = AttackConfig::new(16).unwrap().with_budget(1 << 14).with_seed(2);
        let last = *efficiency_curve(&cfg, &[1 << 14]).last().unwrap();
        assert_eq!(last.agreement.map(|a| a.exact), Some(true));
    }
}
