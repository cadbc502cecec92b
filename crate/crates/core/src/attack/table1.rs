//! Success probabilities of the residue-recovery relations per modulus class.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::{delta_residue, detect_condition, Modulus};
use crate::protocol::{derive_seed, NonceSource, PartyState, RotationVariant, TagIdentity};
use crate::sim::Simulation;
use crate::word96::WIDTH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModulusClass {
    /// `N = 2^t`
    PowerOfTwo(u32),
    /// `N = 3 * 2^t`
    ThreeTimesPowerOfTwo(u32),
    /// `N = 4t + 10`
    FourTPlusTen(u64),
    /// `N = 2t + 5`
    TwoTPlusFive(u64),
    Uncovered,
}

impl fmt::Display for ModulusClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusClass::PowerOfTwo(t) => write!(f, "2^t(t={t})"),
            ModulusClass::ThreeTimesPowerOfTwo(t) => write!(f, "3*2^t(t={t})"),
            ModulusClass::FourTPlusTen(t) => write!(f, "4t+10(t={t})"),
            ModulusClass::TwoTPlusFive(t) => write!(f, "2t+5(t={t})"),
            ModulusClass::Uncovered => f.write_str("uncovered"),
        }
    }
}

pub fn classify_modulus(n: Modulus) -> ModulusClass {
    let n = n.get();
    if n.is_power_of_two() {
        return ModulusClass::PowerOfTwo(n.trailing_zeros());
    }
    if n.is_multiple_of(3) && (n / 3).is_power_of_two() {
        return ModulusClass::ThreeTimesPowerOfTwo((n / 3).trailing_zeros());
    }
    if n % 4 == 2 && n >= 10 {
        return ModulusClass::FourTPlusTen((n - 10) / 4);
    }
    if n % 2 == 1 && n >= 5 {
        return ModulusClass::TwoTPlusFive((n - 5) / 2);
    }
    ModulusClass::Uncovered
}

/// Tabulated probability for the class, `None` where no value is given.
pub fn theoretical_probability(class: ModulusClass, n: Modulus) -> Option<f64> {
    let n = n.get() as f64;
    match class {
        ModulusClass::PowerOfTwo(_) => Some(1.00),
        ModulusClass::ThreeTimesPowerOfTwo(_) => Some(0.33),
        ModulusClass::FourTPlusTen(_) => Some(2.0 / n),
        ModulusClass::TwoTPlusFive(_) => Some(1.0 / n),
        ModulusClass::Uncovered => None,
    }
}

/// Outcome counts over sessions forced into the degenerate-rotation case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProbabilityEstimate {
    pub modulus: Modulus,
    pub trials: u64,
    /// `(IDS_next - IDS) mod N == ID mod N`.
    pub recovered: u64,
    /// The public detection test passed.
    pub detected: u64,
    /// Both of the above in the same session.
    pub joint: u64,
}

impl ProbabilityEstimate {
    fn rate(&self, hits: u64) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        hits as f64 / self.trials as f64
    }

    /// Empirical probability that the residue relation recovers `ID mod N`.
    pub fn recovery_rate(&self) -> f64 {
        self.rate(self.recovered)
    }

    pub fn detection_rate(&self) -> f64 {
        self.rate(self.detected)
    }

    pub fn joint_rate(&self) -> f64 {
        self.rate(self.joint)
    }

    /// Binomial standard error of [`recovery_rate`](Self::recovery_rate).
    pub fn standard_error(&self) -> f64 {
        binomial_sigma(self.recovery_rate(), self.trials)
    }
}

pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

fn lcm_with_width(n: u64) -> u128 {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let n = u128::from(n);
    let w = u128::from(WIDTH);
    n / gcd(n, w) * w
}

/// Runs `trials` independent single sessions with `K1 ≡ K2 ≡ 0` modulo both
/// `N` and 96, so both rotations are the identity and `N` divides the keys.
/// All other secrets and nonces are uniform.
pub fn estimate_joint_probability(n: Modulus, trials: u64, seed: u64) -> ProbabilityEstimate {
    let step = lcm_with_width(n.get());
    let (recovered, detected, joint) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut src = NonceSource::new(derive_seed(seed, trial));
            let ids = src.next_word();
            let id = src.next_word();
            let k1 = src.next_multiple_of(step);
            let k2 = src.next_multiple_of(step);
            let mut sim = Simulation::from_parts(
                PartyState { ids, k1, k2 },
                TagIdentity::new(id),
                src,
                RotationVariant::Modular,
            );
            let t = sim.step().transcript;
            let truth = (id.value() % u128::from(n.get())) as u64;
            let recovered = delta_residue(&t, n) == truth;
            let detected = detect_condition(&t, n);
            (
                u64::from(recovered),
                u64::from(detected),
                u64::from(recovered && detected),
            )
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    ProbabilityEstimate {
        modulus: n,
        trials,
        recovered,
        detected,
        joint,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub modulus: Modulus,
    pub class: ModulusClass,
    pub theoretical: Option<f64>,
    pub estimate: ProbabilityEstimate,
}

/// One row per modulus, in the order given. Each row's trials are seeded from
/// `(seed, modulus)` so rows do not depend on their position.
pub fn table1(moduli: &[Modulus], trials: u64, seed: u64) -> Vec<Table1Row> {
    moduli
        .iter()
        .map(|&n| {
            let class = classify_modulus(n);
            Table1Row {
                modulus: n,
                class,
                theoretical: theoretical_probability(class, n),
                estimate: estimate_joint_probability(n, trials, derive_seed(seed, n.get())),
            }
        })
        .collect()
}
