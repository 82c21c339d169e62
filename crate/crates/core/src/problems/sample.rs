use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies the randomness `ξ_t` of one step.
///
/// Streams are keyed on `(seed, t, name, purpose)` through ChaCha's stream
/// selector, so any draw can be regenerated independently of evaluation
/// order or thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sample {
    pub seed: u64,
    pub t: u64,
}

impl Sample {
    pub fn new(seed: u64, t: u64) -> Self {
        Self { seed, t }
    }

    pub fn rng(&self, name: &str, purpose: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_key(self.t, name, purpose));
        rng
    }
}

/// Generator for problem data that does not vary per step.
pub(crate) fn data_rng(data_seed: u64, purpose: &str) -> ChaCha8Rng {
    Sample::new(data_seed, u64::MAX).rng("data", purpose)
}

// FNV-1a over the step index and both labels.
fn stream_key(t: u64, name: &str, purpose: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let bytes = t
        .to_le_bytes()
        .into_iter()
        .chain(name.bytes())
        .chain([0xff])
        .chain(purpose.bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
