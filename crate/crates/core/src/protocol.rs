//! The SASI mutual authentication session.
//!
//! ```text
//! R -> T : hello
//! T -> R : IDS
//! R -> T : A || B || C      A = IDS ^ K1 ^ n1
//!                           B = (IDS | K2) + n2
//!                           C = (K1 ^ K2') + (K2 ^ K1')
//!                           K1' = Rot(K1 ^ n2, K1), K2' = Rot(K2 ^ n1, K2)
//! T -> R : D                D = (K2' + ID) ^ ((K1 ^ K2) | K1')
//! both   : IDS <- (IDS + ID) ^ (n2 ^ K1'), K1 <- K1', K2 <- K2'
//! ```
//!
//! `+` is addition modulo 2^96. Failed verifications leave state untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::word96::RotationVariant;
use crate::word96::Word96;

/// The tag's static private identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagIdentity {
    pub id: Word96,
}

impl TagIdentity {
    pub const fn new(id: Word96) -> Self {
        TagIdentity { id }
    }
}

/// Per-party mutable secrets: the index pseudonym and both keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartyState {
    pub ids: Word96,
    pub k1: Word96,
    pub k2: Word96,
}

/// Nonces and rotated keys for one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionSecrets {
    pub n1: Word96,
    pub n2: Word96,
    pub k1bar: Word96,
    pub k2bar: Word96,
}

impl SessionSecrets {
    pub fn derive(state: &PartyState, n1: Word96, n2: Word96, variant: RotationVariant) -> Self {
        SessionSecrets {
            n1,
            n2,
            k1bar: (state.k1 ^ n2).rot(state.k1, variant),
            k2bar: (state.k2 ^ n1).rot(state.k2, variant),
        }
    }
}

/// The reader's `A || B || C` message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Challenge {
    pub a: Word96,
    pub b: Word96,
    pub c: Word96,
}

/// Public messages of one completed session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Messages {
    pub ids: Word96,
    pub a: Word96,
    pub b: Word96,
    pub c: Word96,
    pub d: Word96,
}

impl Messages {
    pub fn link(self, ids_next: Word96) -> Transcript {
        Transcript {
            ids: self.ids,
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            ids_next,
        }
    }
}

/// One eavesdropped session plus the pseudonym announced by the next one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Transcript {
    pub ids: Word96,
    pub a: Word96,
    pub b: Word96,
    pub c: Word96,
    pub d: Word96,
    pub ids_next: Word96,
}

impl Transcript {
    pub fn messages(&self) -> Messages {
        Messages {
            ids: self.ids,
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("tag rejected the reader: C does not match")]
    TagRejected,
    #[error("reader rejected the tag: D does not match")]
    ReaderRejected,
    #[error("reader and tag states are not synchronized")]
    Desynchronized,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 output finalizer.
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent trial derived from a base seed.
pub const fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Deterministic word stream backed by splitmix64.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonceSource {
    seed: u64,
    counter: u64,
}

impl NonceSource {
    pub const fn new(seed: u64) -> Self {
        NonceSource { seed, counter: 0 }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit outputs drawn so far.
    pub const fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// First output fills bits 95..32, low half of the second fills 31..0.
    pub fn next_word(&mut self) -> Word96 {
        let hi = u128::from(self.next_u64());
        let lo = u128::from(self.next_u64() & 0xffff_ffff);
        Word96::new((hi << 32) | lo)
    }

    /// Uniform multiple of `m` below 2^96 (`m >= 1`).
    pub fn next_multiple_of(&mut self, m: u128) -> Word96 {
        let w = self.next_word().value();
        let m = m.max(1);
        Word96::new(w - w % m)
    }
}

/// Reader step 4: derive the rotated keys and build `A || B || C`.
pub fn reader_challenge(
    state: &PartyState,
    n1: Word96,
    n2: Word96,
    variant: RotationVariant,
) -> (Challenge, SessionSecrets) {
    let secrets = SessionSecrets::derive(state, n1, n2, variant);
    let a = state.ids ^ state.k1 ^ n1;
    let b = (state.ids | state.k2) + n2;
    let c = compute_c(state, &secrets);
    (Challenge { a, b, c }, secrets)
}

fn compute_c(state: &PartyState, secrets: &SessionSecrets) -> Word96 {
    (state.k1 ^ secrets.k2bar) + (state.k2 ^ secrets.k1bar)
}

fn compute_d(state: &PartyState, id: &TagIdentity, secrets: &SessionSecrets) -> Word96 {
    (secrets.k2bar + id.id) ^ ((state.k1 ^ state.k2) | secrets.k1bar)
}

fn updated_state(state: &PartyState, id: &TagIdentity, secrets: &SessionSecrets) -> PartyState {
    PartyState {
        ids: (state.ids + id.id) ^ (secrets.n2 ^ secrets.k1bar),
        k1: secrets.k1bar,
        k2: secrets.k2bar,
    }
}

/// Tag steps 5 and 6: recover the nonces, check `C`, answer with `D`.
pub fn tag_process(
    state: &PartyState,
    id: &TagIdentity,
    challenge: &Challenge,
    variant: RotationVariant,
) -> Result<(Word96, PartyState), AuthError> {
    let n1 = challenge.a ^ state.ids ^ state.k1;
    let n2 = challenge.b - (state.ids | state.k2);
    let secrets = SessionSecrets::derive(state, n1, n2, variant);
    if compute_c(state, &secrets) != challenge.c {
        return Err(AuthError::TagRejected);
    }
    Ok((compute_d(state, id, &secrets), updated_state(state, id, &secrets)))
}

/// Reader step 7: check `D` and apply the same update as the tag.
pub fn reader_verify_and_update(
    state: &PartyState,
    id: &TagIdentity,
    secrets: &SessionSecrets,
    d: Word96,
) -> Result<PartyState, AuthError> {
    if compute_d(state, id, secrets) != d {
        return Err(AuthError::ReaderRejected);
    }
    Ok(updated_state(state, id, secrets))
}

/// Everything one session produced, including the secrets an eavesdropper
/// never sees (kept for simulation-side instrumentation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOutcome {
    pub messages: Messages,
    pub secrets: SessionSecrets,
    pub before: PartyState,
    pub after: PartyState,
}

/// Runs steps 1-7 with nonces drawn from `src`. On success both states are
/// advanced; on rejection neither changes.
pub fn run_session(
    reader: &mut PartyState,
    tag: &mut PartyState,
    id: &TagIdentity,
    src: &mut NonceSource,
    variant: RotationVariant,
) -> Result<SessionOutcome, AuthError> {
    if reader != tag {
        return Err(AuthError::Desynchronized);
    }
    let ids = tag.ids;
    let n1 = src.next_word();
    let n2 = src.next_word();
    let (challenge, secrets) = reader_challenge(reader, n1, n2, variant);
    let (d, tag_next) = tag_process(tag, id, &challenge, variant)?;
    let reader_next = reader_verify_and_update(reader, id, &secrets, d)?;
    let outcome = SessionOutcome {
        messages: Messages {
            ids,
            a: challenge.a,
            b: challenge.b,
            c: challenge.c,
            d,
        },
        secrets,
        before: *reader,
        after: reader_next,
    };
    *reader = reader_next;
    *tag = tag_next;
    Ok(outcome)
}
