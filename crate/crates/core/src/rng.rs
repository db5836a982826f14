//! Counter-based random streams.
//!
//! Samples are grouped into fixed-size chunks. Chunk `c` of stream `s`
//! draws from a ChaCha generator keyed by `(s, c)`, so the values seen by
//! any sample depend only on its index. Chunks run in parallel and are
//! reduced in index order, which keeps floating-point sums identical for
//! every thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: usize = 4096;

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `work(rng, count)` over `total` samples split into chunks and
/// folds the per-chunk results left to right with `merge`.
pub fn par_chunks<A, W, M>(total: usize, seed: u64, work: W, merge: M) -> Option<A>
where
    A: Send,
    W: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let n_chunks = total.div_ceil(CHUNK);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(total - c * CHUNK);
            let mut rng = chunk_rng(seed, c as u64);
            work(&mut rng, count)
        })
        .collect();
    parts.into_iter().reduce(merge)
}

/// Running sums for a vector of statistics; gives means and standard errors.
#[derive(Debug, Clone)]
pub struct Moments {
    pub n: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Standard error of each mean.
    pub fn std_err(&self) -> Vec<f64> {
        let n = self.n as f64;
        if self.n < 2 {
            return vec![0.0; self.sum.len()];
        }
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let m = s / n;
                let var = ((q / n - m * m) * n / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn chunked_sum_independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    par_chunks(
                        50_000,
                        7,
                        |rng, count| (0..count).map(|_| rng.random::<f64>()).sum::<f64>(),
                        |a, b| a + b,
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1).to_bits(), run(3).to_bits());
    }

    #[test]
    fn moments_of_constant() {
        let mut m = Moments::new(1);
        for _ in 0..10 {
            m.push(&[2.0]);
        }
        assert_eq!(m.mean(), vec![2.0]);
        assert!(m.std_err()[0].abs() < 1e-12);
    }

    #[test]
    fn mix_spreads_bits() {
        assert_ne!(mix(1, 0), mix(1, 1));
        assert_ne!(mix(0, 1), mix(1, 0));
    }
}
