use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};

use super::Tensor;
use crate::error::{Error, Result};

/// Seedable random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8, whose 64-bit stream parameter gives independent
/// sequences for the same seed. Substreams are derived by hashing the
/// parent identity, so per-row and per-replicate streams can be created
/// in any order and still produce the same draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Independent child stream keyed by `tag`. Does not advance `self`.
    pub fn substream(&self, tag: u64) -> RngStream {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_F42D)));
        RngStream::new(child_seed, tag)
    }

    /// Child stream keyed by a path of tags, e.g. `[iteration, ROLE, row]`.
    pub fn substream_path(&self, tags: &[u64]) -> RngStream {
        tags.iter().fold(self.clone(), |s, &t| s.substream(t))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[a, b)`.
    pub fn uniform(&mut self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(Error::InvalidBounds { lower: a, upper: b });
        }
        let v = a + (b - a) * self.unit();
        Ok(if v >= b { b.next_down() } else { v })
    }

    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    /// Unit-variance Student-t draw: `sqrt((nu-2)/nu) * Z / sqrt(chi2_nu / nu)`.
    pub fn student_t_unit_var(&mut self, nu: f64) -> Result<f64> {
        if !(nu > 2.0) {
            return Err(Error::BadDof { nu });
        }
        let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let z = self.normal();
        let c: f64 = chi.sample(&mut self.inner);
        Ok(((nu - 2.0) / nu).sqrt() * z / (c / nu).sqrt())
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn draw_normal(&mut self, n: usize) -> Tensor {
        Tensor::from_vec((0..n).map(|_| self.normal()).collect())
    }

    pub fn draw_uniform(&mut self, a: f64, b: f64, n: usize) -> Result<Tensor> {
        if !(a < b) {
            return Err(Error::InvalidBounds { lower: a, upper: b });
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.uniform(a, b)?);
        }
        Ok(Tensor::from_vec(out))
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k.min(n)).into_vec()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
