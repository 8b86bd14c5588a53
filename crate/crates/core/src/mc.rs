//! Seeded, reproducible Monte Carlo expectations over multivariate Gaussian
//! laws. Samples are produced in fixed-size chunks; chunk `i` re-keys the
//! generator on a counter-based stream derived from `(seed, i)`, so the
//! stream is bit-identical for a fixed `(seed, chunk_size)` regardless of
//! evaluation order.

use crate::error::{Error, Result};
use crate::pd::PdMatrix;
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sampling budget and seed for one Monte Carlo evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

pub const DEFAULT_CHUNK: u64 = 4096;

impl SampleSpec {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        assert!(n_samples >= 1);
        Self {
            n_samples,
            seed,
            chunk_size: DEFAULT_CHUNK,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: u64) -> Self {
        assert!(n >= 1);
        self.n_samples = n;
        self
    }

    /// Re-key on a subsidiary label, leaving the budget unchanged. Distinct
    /// terms of one computation use distinct labels so their estimates carry
    /// independent noise.
    pub fn reseeded(&self, label: &str) -> Self {
        self.with_seed(derive_seed(self.seed, fnv1a(label.as_bytes())))
    }

    /// Budget for a weight evaluated inside another integral. The outer
    /// integrand is linear in the weight value, so an unbiased inner
    /// estimate keeps the outer estimate unbiased; a square-root budget
    /// bounds the total work while the inner noise lands in the outer
    /// standard error.
    pub fn nested(&self) -> Self {
        let inner = ((self.n_samples as f64).sqrt() as u64).clamp(128, 8192);
        Self {
            n_samples: inner,
            ..*self
        }
    }

    pub fn reseeded_u64(&self, tag: u64) -> Self {
        self.with_seed(derive_seed(self.seed, tag))
    }
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self::new(100_000, 0)
    }
}

/// splitmix64 finalizer over the xor of base seed and tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash a probe point by its bit patterns, for per-call seeds of derived
/// weight evaluations.
pub fn point_tag<T: Scalar>(x: &[T]) -> u64 {
    let mut bytes = Vec::with_capacity(x.len() * 8);
    for v in x {
        bytes.extend_from_slice(&v.as_f64().to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

fn chunk_rng(seed: u64, chunk_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk_index.wrapping_add(1));
    rng
}

/// Scalar Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub stderr: T,
    pub n: u64,
    pub seed: u64,
}

impl<T: Scalar> Estimate<T> {
    /// A closed-form (noise-free) value.
    pub fn exact(value: T) -> Self {
        Self {
            value,
            stderr: T::zero(),
            n: 0,
            seed: 0,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.n == 0 && self.stderr == T::zero()
    }

    /// Difference of independent estimates; standard errors combine in
    /// quadrature.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            value: self.value - other.value,
            stderr: (self.stderr * self.stderr + other.stderr * other.stderr).sqrt(),
            n: self.n.max(other.n),
            seed: self.seed,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            value: self.value + other.value,
            stderr: (self.stderr * self.stderr + other.stderr * other.stderr).sqrt(),
            n: self.n.max(other.n),
            seed: self.seed,
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            value: self.value * c,
            stderr: self.stderr * c.abs(),
            ..*self
        }
    }

    pub fn shifted(&self, c: T) -> Self {
        Self {
            value: self.value + c,
            ..*self
        }
    }

    /// Weighted sum of independent estimates.
    pub fn linear_combination(terms: &[(T, Estimate<T>)]) -> Self {
        let mut value = T::zero();
        let mut var = T::zero();
        let mut n = 0;
        let mut seed = 0;
        for (c, e) in terms {
            value += *c * e.value;
            var += *c * *c * e.stderr * e.stderr;
            if e.n > n {
                n = e.n;
                seed = e.seed;
            }
        }
        Self {
            value,
            stderr: var.sqrt(),
            n,
            seed,
        }
    }
}

/// Required sign of a checked quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonNegative,
    NonPositive,
    Zero,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::NonNegative => Direction::NonPositive,
            Direction::NonPositive => Direction::NonNegative,
            Direction::Zero => Direction::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Fold verdicts of parts that must all hold.
    pub fn combine(all: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Holds;
        for v in all {
            match (out, v) {
                (_, Verdict::Fails) | (Verdict::Fails, _) => return Verdict::Fails,
                (Verdict::Holds, Verdict::Inconclusive) => out = Verdict::Inconclusive,
                _ => {}
            }
        }
        out
    }
}

/// Statistical verdict at `z_crit` standard errors: `Holds` when the sign is
/// established with margin at least `z_crit·stderr`, `Fails` when the
/// violation is, `Inconclusive` otherwise. Exact (stderr = 0) values are
/// judged directly.
pub fn signed_verdict<T: Scalar>(e: &Estimate<T>, direction: Direction, z_crit: T) -> Verdict {
    judge(e.value, e.stderr, direction, z_crit, T::zero())
}

/// `signed_verdict` with an absolute tolerance band applied on the exact
/// (stderr = 0) path, for closed-form margins subject only to rounding.
pub fn judge<T: Scalar>(value: T, stderr: T, direction: Direction, z_crit: T, tol: T) -> Verdict {
    if stderr == T::zero() {
        let ok = match direction {
            Direction::NonNegative => value >= -tol,
            Direction::NonPositive => value <= tol,
            Direction::Zero => value.abs() <= tol,
        };
        return if ok { Verdict::Holds } else { Verdict::Fails };
    }
    let band = z_crit * stderr;
    match direction {
        Direction::NonNegative => {
            if value >= band {
                Verdict::Holds
            } else if value <= -band {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
        Direction::NonPositive => {
            if value <= -band {
                Verdict::Holds
            } else if value >= band {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
        Direction::Zero => {
            if value.abs() <= band {
                Verdict::Holds
            } else {
                Verdict::Fails
            }
        }
    }
}

/// Chunked expectation driver over an arbitrary sampler. `sample` fills one
/// draw into its buffer from the chunk generator; `g` maps the draw to the
/// integrand value.
pub fn expect_sampled<T, S, G>(
    spec: &SampleSpec,
    dim: usize,
    mut sample: S,
    mut g: G,
) -> Result<Estimate<T>>
where
    T: Scalar,
    S: FnMut(&mut ChaCha8Rng, &mut [T]),
    G: FnMut(&[T]) -> Result<T>,
{
    let n = spec.n_samples;
    let mut buf = vec![T::zero(); dim];
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    let mut done = 0u64;
    let mut chunk_index = 0u64;
    while done < n {
        let take = spec.chunk_size.min(n - done);
        let mut rng = chunk_rng(spec.seed, chunk_index);
        let mut c_sum = T::zero();
        let mut c_sq = T::zero();
        for _ in 0..take {
            sample(&mut rng, &mut buf);
            let v = g(&buf)?;
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand);
            }
            c_sum += v;
            c_sq += v * v;
        }
        sum += c_sum;
        sum_sq += c_sq;
        done += take;
        chunk_index += 1;
    }
    let n_t = T::from_u64(n).unwrap();
    let mean = sum / n_t;
    let stderr = if n > 1 {
        let var = ((sum_sq - sum * sum / n_t) / (n_t - T::one())).max(T::zero());
        (var / n_t).sqrt()
    } else {
        T::zero()
    };
    Ok(Estimate {
        value: mean,
        stderr,
        n,
        seed: spec.seed,
    })
}

/// Expectation of `g` under the zero-mean Gaussian with covariance `c`.
pub fn expect<T, G>(g: G, c: &PdMatrix<T>, spec: &SampleSpec) -> Result<Estimate<T>>
where
    T: Scalar,
    G: FnMut(&[T]) -> Result<T>,
{
    let d = c.dim();
    let mut gauss = vec![T::zero(); d];
    expect_sampled(
        spec,
        d,
        move |rng, buf| {
            for gi in gauss.iter_mut() {
                *gi = T::standard_normal(rng);
            }
            c.correlate(&gauss, buf);
        },
        g,
    )
}

/// Joint expectation of several integrands over one stream of Gaussian
/// draws; entry `k` of the result estimates integrand `k`.
pub fn expect_many<T, G>(
    c: &PdMatrix<T>,
    spec: &SampleSpec,
    m: usize,
    mut g: G,
) -> Result<Vec<Estimate<T>>>
where
    T: Scalar,
    G: FnMut(&[T], &mut [T]) -> Result<()>,
{
    let d = c.dim();
    let n = spec.n_samples;
    let mut gauss = vec![T::zero(); d];
    let mut buf = vec![T::zero(); d];
    let mut vals = vec![T::zero(); m];
    let mut sum = vec![T::zero(); m];
    let mut sum_sq = vec![T::zero(); m];
    let mut done = 0u64;
    let mut chunk_index = 0u64;
    while done < n {
        let take = spec.chunk_size.min(n - done);
        let mut rng = chunk_rng(spec.seed, chunk_index);
        for _ in 0..take {
            for gi in gauss.iter_mut() {
                *gi = T::standard_normal(&mut rng);
            }
            c.correlate(&gauss, &mut buf);
            g(&buf, &mut vals)?;
            for k in 0..m {
                if !vals[k].is_finite() {
                    return Err(Error::NonFiniteIntegrand);
                }
                sum[k] += vals[k];
                sum_sq[k] += vals[k] * vals[k];
            }
        }
        done += take;
        chunk_index += 1;
    }
    let n_t = T::from_u64(n).unwrap();
    Ok((0..m)
        .map(|k| {
            let mean = sum[k] / n_t;
            let stderr = if n > 1 {
                let var = ((sum_sq[k] - sum[k] * sum[k] / n_t) / (n_t - T::one())).max(T::zero());
                (var / n_t).sqrt()
            } else {
                T::zero()
            };
            Estimate {
                value: mean,
                stderr,
                n,
                seed: spec.seed,
            }
        })
        .collect())
}

/// The raw sample stream `L·g`, materialized. Mostly a test survey surface;
/// computations go through the expectation drivers.
pub fn sample_gaussian<T: Scalar>(c: &PdMatrix<T>, spec: &SampleSpec) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(spec.n_samples as usize);
    let d = c.dim();
    let mut gauss = vec![T::zero(); d];
    let mut buf = vec![T::zero(); d];
    let mut done = 0u64;
    let mut chunk_index = 0u64;
    while done < spec.n_samples {
        let take = spec.chunk_size.min(spec.n_samples - done);
        let mut rng = chunk_rng(spec.seed, chunk_index);
        for _ in 0..take {
            for gi in gauss.iter_mut() {
                *gi = T::standard_normal(&mut rng);
            }
            c.correlate(&gauss, &mut buf);
            out.push(buf.clone());
        }
        done += take;
        chunk_index += 1;
    }
    out
}
