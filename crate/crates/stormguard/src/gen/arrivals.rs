//! Integer-arithmetic event timing for the generator.
//!
//! Benign session arrivals form a Poisson process per UE. At microsecond
//! resolution that is a Bernoulli trial per microsecond, so inter-arrival
//! gaps are geometric; the sampler below inverts the geometric CDF in
//! Q0.64 fixed point, keeping the generator free of floating point and
//! bit-exact across platforms.

use rand::RngCore;

/// Events per second, as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn per_second(num: u64, den: u64) -> Self {
        Rate { num, den }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// The per-microsecond complement probability `1 - p` in Q0.64.
    ///
    /// Returns `None` when the rate is zero, at least one event per
    /// microsecond, or too fine-grained to represent.
    pub fn survival_q64(&self) -> Option<u64> {
        if self.num == 0 || self.den == 0 {
            return None;
        }
        let denom = (self.den as u128).checked_mul(1_000_000)?;
        if denom > u64::MAX as u128 || self.num as u128 >= denom {
            return None;
        }
        let q = ((denom - self.num as u128) << 64) / denom;
        Some(q as u64)
    }
}

#[inline]
fn mul_q64(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) >> 64) as u64
}

/// Microseconds until the next event of a Bernoulli-per-microsecond
/// process with survival probability `q64` (Q0.64). Always at least 1.
///
/// Inverts `gap = ceil(log_q v)` for a uniform draw `v` by exponential
/// bracketing over the squarings of `q` followed by a binary descent.
pub fn geometric_gap_us(rng: &mut impl RngCore, q64: u64) -> u64 {
    let v = rng.next_u64().max(1);
    if q64 <= v {
        return 1;
    }
    // Squarings q^(2^j) until one drops to v or below.
    let mut squarings = [0u64; 64];
    squarings[0] = q64;
    let mut j_star = None;
    for j in 1..64 {
        squarings[j] = mul_q64(squarings[j - 1], squarings[j - 1]);
        if squarings[j] <= v {
            j_star = Some(j);
            break;
        }
    }
    let Some(j_star) = j_star else {
        // Gap beyond 2^63 microseconds: effectively never.
        return u64::MAX;
    };
    // Largest k with q^k > v, built greedily from high powers.
    let mut k: u64 = 1 << (j_star - 1);
    let mut acc = squarings[j_star - 1];
    for j in (0..j_star - 1).rev() {
        let cand = mul_q64(acc, squarings[j]);
        if cand > v {
            acc = cand;
            k += 1 << j;
        }
    }
    k + 1
}

/// Stateless mix for deriving independent per-stream seeds from one trace
/// seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
