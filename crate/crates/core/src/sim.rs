//! Seeded simulation of one reader/tag pair running consecutive sessions.

use crate::protocol::{
    run_session, NonceSource, PartyState, RotationVariant, SessionSecrets, TagIdentity, Transcript,
};
use crate::word96::Word96;

/// A simulated session as seen by an eavesdropper, plus the hidden state
/// that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulatedSession {
    pub transcript: Transcript,
    pub before: PartyState,
    pub secrets: SessionSecrets,
}

/// A freshly initialized tag and its reader, driven by one [`NonceSource`].
///
/// Initialization draws IDS, ID, K1, K2 in that order; every session then
/// draws n1 and n2.
#[derive(Clone, Debug)]
pub struct Simulation {
    reader: PartyState,
    tag: PartyState,
    id: TagIdentity,
    src: NonceSource,
    variant: RotationVariant,
}

impl Simulation {
    pub fn new(seed: u64, variant: RotationVariant) -> Self {
        let mut src = NonceSource::new(seed);
        let ids = src.next_word();
        let id = TagIdentity::new(src.next_word());
        let k1 = src.next_word();
        let k2 = src.next_word();
        Self::from_parts(PartyState { ids, k1, k2 }, id, src, variant)
    }

    pub fn from_parts(
        state: PartyState,
        id: TagIdentity,
        src: NonceSource,
        variant: RotationVariant,
    ) -> Self {
        Simulation {
            reader: state,
            tag: state,
            id,
            src,
            variant,
        }
    }

    pub fn id(&self) -> Word96 {
        self.id.id
    }

    pub fn variant(&self) -> RotationVariant {
        self.variant
    }

    /// Current (synchronized) state of the pair.
    pub fn state(&self) -> PartyState {
        self.tag
    }

    /// Runs one honest session. The announced `ids_next` is the pseudonym
    /// the tag will answer the next hello with.
    pub fn step(&mut self) -> SimulatedSession {
        let outcome = run_session(
            &mut self.reader,
            &mut self.tag,
            &self.id,
            &mut self.src,
            self.variant,
        )
        .expect("honest synchronized parties never reject");
        SimulatedSession {
            transcript: outcome.messages.link(outcome.after.ids),
            before: outcome.before,
            secrets: outcome.secrets,
        }
    }
}

impl Iterator for Simulation {
    type Item = SimulatedSession;

    fn next(&mut self) -> Option<SimulatedSession> {
        Some(self.step())
    }
}
