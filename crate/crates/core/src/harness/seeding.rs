use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent random streams derived from one master seed. Each consumer
/// owns a ChaCha stream id, so extra draws in one never shift another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streams {
    pub init: ChaCha8Rng,
    pub env: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    pub sac: ChaCha8Rng,
    pub pairs: ChaCha8Rng,
    pub reward: ChaCha8Rng,
    pub warmup: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Env,
    Policy,
    Sac,
    Pairs,
    Reward,
    Warmup,
    Eval,
}

pub fn stream(master: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(which as u64);
    rng
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self {
            init: stream(master, Stream::Init),
            env: stream(master, Stream::Env),
            policy: stream(master, Stream::Policy),
            sac: stream(master, Stream::Sac),
            pairs: stream(master, Stream::Pairs),
            reward: stream(master, Stream::Reward),
            warmup: stream(master, Stream::Warmup),
            eval: stream(master, Stream::Eval),
        }
    }
}
