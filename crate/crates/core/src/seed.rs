//! Seed derivation.
//!
//! Every random stream in a run is a ChaCha8 generator keyed by the SHA-256
//! digest of a master seed and a text label. Labels are stable strings, so a
//! stream can be recreated in isolation (e.g. the building heights of a cell
//! without touching the agent's exploration draws).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Labels for the per-purpose substreams.
pub mod label {
    pub const BS_POSITIONS: &str = "topology/bs-positions";
    pub const BUILDING_HEIGHTS: &str = "topology/building-heights";
    pub const NET_INIT: &str = "agent/net-init";
    pub const EXPLORATION: &str = "agent/exploration";
    pub const REPLAY: &str = "agent/replay";
    pub const RANDOM_POLICY: &str = "policy/random";
}

fn digest(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update([0u8]);
    h.update(label.as_bytes());
    h.finalize().into()
}

/// Derive a 64-bit seed from `master` and `label`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let d = digest(master, label);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// A generator for the `label` substream of `master`.
pub fn substream(master: u64, label: &str) -> SimRng {
    ChaCha8Rng::from_seed(digest(master, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_stable_and_distinct() {
        let a: u64 = substream(7, label::REPLAY).random();
        let b: u64 = substream(7, label::REPLAY).random();
        let c: u64 = substream(7, label::EXPLORATION).random();
        let d: u64 = substream(8, label::REPLAY).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn derived_seed_is_frozen() {
        // Cell seeds are part of the CSV contract; a change here changes every output file.
        // sha256(1u64 LE ++ 0x00 ++ label), first 8 bytes LE; checked with python hashlib
        assert_eq!(derive_seed(1, label::BS_POSITIONS), 7459569518219953530);
        assert_ne!(derive_seed(0, "a"), derive_seed(0, "b"));
    }
}
