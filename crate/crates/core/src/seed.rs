//! Counter-based seed derivation.
//!
//! Every random stream in a run is keyed by `(master seed, stage name,
//! index)`, so adding or reordering stages never shifts another stage's
//! stream.

use std::hash::Hasher;

use twox_hash::XxHash64;

pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut h = XxHash64::with_seed(master);
    h.write(stage.as_bytes());
    h.write_u8(0xff);
    h.write_u64(index);
    h.finish()
}
