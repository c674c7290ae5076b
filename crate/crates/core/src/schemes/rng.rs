use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Counter-based random stream. A `(seed, lane, index)` triple selects a
/// distinct ChaCha key/stream pair, so path `k` draws the same numbers no matter
/// which worker runs it.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

/// Lane of the correlation / MRC draws.
pub const LANE_MRC: u64 = 0;
/// Lane of the stock Brownian increments in the basket model.
pub const LANE_STOCK: u64 = 1;
/// Lane of ad hoc one-step tests.
pub const LANE_TEST: u64 = 2;

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::for_path(seed, LANE_MRC, 0)
    }

    pub fn for_path(seed: u64, lane: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(index);
        RngStream { inner }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Index into `{-√3, 0, √3}` drawn with probabilities `1/6, 2/3, 1/6`.
    #[inline]
    pub(crate) fn three_point(&mut self) -> usize {
        match self.inner.gen_range(0u32..6) {
            0 => 0,
            1 => 2,
            _ => 1,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// `Y ∈ {-√3, 0, √3}` with probabilities `1/6, 2/3, 1/6`; matches the first five
/// moments of a standard normal.
pub fn sample_y(rng: &mut RngStream) -> f64 {
    const S3: f64 = 1.732_050_807_568_877_2;
    [-S3, 0.0, S3][rng.three_point()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::for_path(9, LANE_MRC, 17);
        let mut b = RngStream::for_path(9, LANE_MRC, 17);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::for_path(9, LANE_STOCK, 17);
        let mut d = RngStream::for_path(9, LANE_MRC, 18);
        let x = RngStream::for_path(9, LANE_MRC, 17).next_u64();
        assert_ne!(c.next_u64(), x);
        assert_ne!(d.next_u64(), x);
    }

    #[test]
    fn three_point_moments() {
        let mut rng = RngStream::new(1);
        let n = 1_000_000;
        let (mut m1, mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let y = sample_y(&mut rng);
            m1 += y;
            m2 += y * y;
            m3 += y * y * y;
            m4 += y.powi(4);
        }
        let n = n as f64;
        // Var(Y²) = E[Y⁴] - 1 = 2, Var(Y⁴) = E[Y⁸] - 9 = 27 - 9 = 18
        assert!((m2 / n - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((m4 / n - 3.0).abs() < 4.0 * (18.0 / n).sqrt());
        assert!((m1 / n).abs() < 4.0 * (1.0 / n).sqrt());
        assert!((m3 / n).abs() < 4.0 * (9.0 / n).sqrt());
    }
}
