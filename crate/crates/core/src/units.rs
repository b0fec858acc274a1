//! Protocol constants and unit conversions.

/// Gwei amounts (validator deposits, rewards, penalties).
pub type Gwei = u64;
/// Wei amounts (execution-layer fees).
pub type Wei = u128;
pub type Epoch = u64;
pub type Slot = u64;

pub const WEI_PER_GWEI: u128 = 1_000_000_000;
pub const GWEI_PER_ETH: u64 = 1_000_000_000;

pub const SLOTS_PER_EPOCH: u64 = 32;
pub const SECONDS_PER_SLOT: u64 = 12;
pub const SECONDS_PER_EPOCH: u64 = SLOTS_PER_EPOCH * SECONDS_PER_SLOT;
/// 365 days of 384-second epochs.
pub const EPOCHS_PER_YEAR: u64 = 365 * 86_400 / SECONDS_PER_EPOCH;

pub const MAX_EFFECTIVE_BALANCE_ETH: u64 = 32;
pub const DEPOSIT_GWEI: Gwei = 32 * GWEI_PER_ETH;
pub const EJECTION_BALANCE_GWEI: Gwei = 16 * GWEI_PER_ETH;

/// 36 days expressed in epochs.
pub const SLASHING_GRACE_EPOCHS: Epoch = 36 * 86_400 / SECONDS_PER_EPOCH;

/// Consecutive non-final epochs after which the inactivity leak engages.
pub const INACTIVITY_LEAK_EPOCHS: u64 = 5;

pub const SYNC_COMMITTEE_MAX: usize = 512;
pub const SYNC_COMMITTEE_PERIOD_EPOCHS: Epoch = 256;

#[inline]
pub fn epoch_of(slot: Slot) -> Epoch {
    slot / SLOTS_PER_EPOCH
}

#[inline]
pub fn epoch_start_slot(epoch: Epoch) -> Slot {
    epoch * SLOTS_PER_EPOCH
}

#[inline]
pub fn gwei_to_eth(gwei: f64) -> f64 {
    gwei / GWEI_PER_ETH as f64
}

#[inline]
pub fn wei_to_gwei(wei: Wei) -> f64 {
    wei as f64 / WEI_PER_GWEI as f64
}

/// SplitMix64 finalizer; the non-cryptographic mixer behind digests, reveals
/// and per-purpose seeds.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed.
pub fn mix_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, w| mix64(acc ^ mix64(*w)))
}
