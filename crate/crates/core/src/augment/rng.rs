use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Independent random stream for one transform of one sample.
///
/// The stream key is a hash of `(seed, sample_key, transform)`, so draws do
/// not depend on which samples were augmented before or on which thread.
pub(crate) fn stream(seed: u64, sample_key: &str, transform: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"affbench/augment/v1");
    h.update(seed.to_le_bytes());
    h.update((sample_key.len() as u64).to_le_bytes());
    h.update(sample_key.as_bytes());
    h.update(transform.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}
