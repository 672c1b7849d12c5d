//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, worker_id, counter, lane)`: the
//! generator hashes those four words with SplitMix64-style finalizers instead
//! of carrying hidden state. A stream is therefore just a cursor, and two
//! streams never interact no matter how their consumption is interleaved
//! across threads.
//!
//! Counter accounting (fixed per call):
//!
//! | call                     | counter advance |
//! |--------------------------|-----------------|
//! | [`RngStream::next_u64`]  | 1               |
//! | [`RngStream::next_f64`]  | 1               |
//! | [`RngStream::gaussian`]  | 1 per value     |
//! | [`RngStream::draw_index`]| 1               |
//!
//! A Gaussian uses lanes 0 and 1 of its counter slot (Box-Muller, cosine
//! branch). Index draws reject with Lemire's multiply-shift test; retries
//! move to the next lane of the same counter slot, so the advance stays 1.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cursor into the stream identified by `(seed, worker_id)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    worker_id: u64,
    counter: u64,
    key: u64,
    tweak: u64,
}

impl RngStream {
    pub fn new(seed: u64, worker_id: u64) -> Self {
        Self::at(seed, worker_id, 0)
    }

    /// Stream positioned at an explicit counter value.
    pub fn at(seed: u64, worker_id: u64, counter: u64) -> Self {
        let k1 = mix64(seed.wrapping_add(GOLDEN));
        let key = mix64(
            k1 ^ mix64(worker_id.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ 0x8CB9_2BA7_2F3D_8DD7),
        );
        let tweak = mix64(key ^ 0xA076_1D64_78BD_642F);
        Self {
            seed,
            worker_id,
            counter,
            key,
            tweak,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn worker_id(&self) -> u64 {
        self.worker_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    fn word(&self, counter: u64, lane: u64) -> u64 {
        let x = mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)));
        mix64(x ^ self.tweak ^ lane.wrapping_mul(0xE703_7ED1_A0B4_28DB))
    }

    #[inline]
    fn unit(bits: u64) -> f64 {
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = self.word(self.counter, 0);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        Self::unit(self.next_u64())
    }

    /// Fill `out` with independent standard normal draws.
    pub fn gaussian(&mut self, out: &mut [f64]) {
        for slot in out.iter_mut() {
            let c = self.counter;
            // u1 in (0, 1] keeps the logarithm finite.
            let u1 = Self::unit(self.word(c, 0)) + (1.0 / (1u64 << 53) as f64);
            let u2 = Self::unit(self.word(c, 1));
            *slot = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            self.counter = c.wrapping_add(1);
        }
    }

    pub fn draw_gaussian(&mut self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.gaussian(&mut out);
        out
    }

    /// Uniform index in `[0, n)` without modulo bias.
    ///
    /// Panics if `n == 0`.
    pub fn draw_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "draw_index needs a nonempty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        let mut lane = 0u64;
        loop {
            let m = u128::from(self.word(c, lane)) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
            lane += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_position_same_output() {
        let mut a = RngStream::at(7, 3, 41);
        let mut b = RngStream::at(7, 3, 41);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_eq!(a.draw_gaussian(5), b.draw_gaussian(5));
        assert_eq!(a.draw_index(11), b.draw_index(11));
    }

    #[test]
    fn workers_are_distinct() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert!(xs.iter().zip(&ys).all(|(x, y)| x != y));
    }

    #[test]
    fn seeds_are_distinct() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(2, 0);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn counter_advances_are_fixed() {
        let mut s = RngStream::new(9, 2);
        s.next_u64();
        assert_eq!(s.counter(), 1);
        s.gaussian(&mut [0.0; 7]);
        assert_eq!(s.counter(), 8);
        s.draw_index(3);
        assert_eq!(s.counter(), 9);
        s.next_f64();
        assert_eq!(s.counter(), 10);
    }

    #[test]
    fn output_independent_of_interleaving() {
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 1);
        let seq_a: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let seq_b: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();

        let mut a2 = RngStream::new(5, 0);
        let mut b2 = RngStream::new(5, 1);
        let mut ia = Vec::new();
        let mut ib = Vec::new();
        for i in 0..8 {
            if i % 3 == 0 {
                ib.push(b2.next_u64());
                ia.push(a2.next_u64());
            } else {
                ia.push(a2.next_u64());
                ib.push(b2.next_u64());
            }
        }
        assert_eq!(seq_a, ia);
        assert_eq!(seq_b, ib);
    }

    #[test]
    fn gaussian_moments() {
        let mut s = RngStream::new(123, 4);
        let n = 200_000;
        let xs = s.draw_gaussian(n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // 5 standard errors
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!(
            (var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(),
            "var {var}"
        );
    }

    #[test]
    fn index_chi_square_n7() {
        let mut s = RngStream::new(2024, 0);
        let n = 7usize;
        let draws = 1_000_000usize;
        let mut counts = [0usize; 7];
        for _ in 0..draws {
            counts[s.draw_index(n)] += 1;
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square with 6 dof: 0.001 quantile 0.381, 0.999 quantile 22.458
        assert!(
            chi2 > 0.381 && chi2 < 22.458,
            "chi2 = {chi2}, counts = {counts:?}"
        );
    }

    #[test]
    fn index_in_range_for_awkward_sizes() {
        let mut s = RngStream::new(0, 0);
        for n in [1usize, 2, 3, 5, 1 << 20, usize::MAX / 3 + 1] {
            for _ in 0..100 {
                assert!(s.draw_index(n) < n);
            }
        }
    }
}
