use serde::{Deserialize, Serialize};

use crate::units::{mix64, Epoch};

/// 256-bit randomness accumulator, stored as four little-endian words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Randao(pub [u64; 4]);

impl Randao {
    pub const ZERO: Randao = Randao([0; 4]);

    pub fn from_u128(v: u128) -> Self {
        Randao([v as u64, (v >> 64) as u64, 0, 0])
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().rev().map(|w| format!("{w:016x}")).collect()
    }
}

impl std::ops::BitXor for Randao {
    type Output = Randao;

    fn bitxor(self, rhs: Randao) -> Randao {
        let mut out = [0u64; 4];
        for (i, w) in out.iter_mut().enumerate() {
            *w = self.0[i] ^ rhs.0[i];
        }
        Randao(out)
    }
}

pub fn mix_randao(randao: Randao, reveal: Randao) -> Randao {
    randao ^ reveal
}

/// Deterministic stand-in for a proposer's signed reveal: a function of the
/// epoch and the proposer's seed only.
pub fn reveal_digest(epoch: Epoch, proposer_seed: u64) -> Randao {
    let base = mix64(epoch ^ mix64(proposer_seed));
    let mut out = [0u64; 4];
    for (i, w) in out.iter_mut().enumerate() {
        *w = mix64(base.wrapping_add(i as u64));
    }
    Randao(out)
}
