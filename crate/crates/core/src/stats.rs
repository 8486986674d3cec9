//! Reproducible random streams, estimate types and the Monte Carlo engine.
//!
//! Every estimator in this crate pulls its randomness from an [`RngStream`],
//! a `(seed, stream)` pair backed by counter-mode ChaCha. Work is split into
//! chunks whose count depends only on the sample count, each chunk owns a
//! child stream, and partial results are reduced in chunk order. As a result
//! the output of every estimator is a pure function of `(seed, stream)` and
//! the inputs; in particular it does not depend on how many worker threads
//! rayon happens to use.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per parallel chunk of the Monte Carlo engine.
const CHUNK: u64 = 8192;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(key: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A reproducible random stream: a root seed plus a 64-bit stream index.
///
/// Identical `(seed, stream)` pairs yield identical draw sequences; distinct
/// stream indices yield statistically independent sequences. Streams are
/// `Copy`, cheap to derive and safe to hand to worker threads, which is how
/// the crate keeps parallel estimates independent of the scheduler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    /// Root stream for a run.
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream: 0 }
    }

    /// Stream with an explicit index, e.g. `stream = task index`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Derive an independent child stream. Children with distinct tags are
    /// independent of each other and of the parent.
    pub fn child(self, tag: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(1))),
        }
    }

    /// Child stream keyed by a label, for call sites with a natural name.
    pub fn child_from_key(self, key: &str) -> Self {
        self.child(fnv1a(key))
    }

    /// Instantiate the generator for this stream.
    pub fn rng(self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    pub fn seed(self) -> u64 {
        self.seed
    }

    pub fn stream(self) -> u64 {
        self.stream
    }
}

/// A Monte Carlo point estimate with its uncertainty.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    /// `value ± 1.96·stderr`.
    pub ci95: (f64, f64),
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n_samples: u64) -> Self {
        Estimate {
            value,
            stderr,
            n_samples,
            ci95: (value - 1.96 * stderr, value + 1.96 * stderr),
        }
    }

    /// An exactly known quantity (zero standard error).
    pub fn exact(value: f64) -> Self {
        Estimate::new(value, 0.0, 0)
    }

    /// The estimate scaled by a positive constant.
    pub fn scaled(self, factor: f64) -> Self {
        Estimate::new(self.value * factor, self.stderr * factor.abs(), self.n_samples)
    }

    /// Distance to `other` in combined standard errors (∞ if both exact).
    pub fn sigma_distance(&self, other: &Estimate) -> f64 {
        let sigma = self.stderr.hypot(other.stderr);
        if sigma == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value).abs() / sigma
        }
    }
}

/// An estimate that may have hit the resolution floor of its sample size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CensoredEstimate {
    pub value: f64,
    /// True when the underlying tail probability had no hits at this sample
    /// size, so `value` is only a lower bound.
    pub censored: bool,
}

fn chunk_sizes(n: u64) -> Vec<u64> {
    let full = n / CHUNK;
    let rest = n % CHUNK;
    let mut sizes = vec![CHUNK; full as usize];
    if rest > 0 {
        sizes.push(rest);
    }
    sizes
}

#[inline]
fn powq(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}

/// Estimate the power means `(E f^q)^(1/q)` for several exponents on a
/// shared sample set.
///
/// `init` builds per-chunk scratch state (reused across the chunk's draws);
/// `f` produces one nonnegative sample. Standard errors for `q ≠ 1` come
/// from the delta method applied to the plain mean of `f^q`.
pub fn mc_power_means_with<S, I, F>(
    stream: RngStream,
    n_samples: u64,
    exponents: &[f64],
    init: I,
    f: F,
) -> Vec<Estimate>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    assert!(n_samples > 0, "n_samples must be positive");
    let sizes = chunk_sizes(n_samples);
    let nq = exponents.len();
    // Per chunk: for each exponent, (sum of f^q, sum of f^(2q)).
    let partials: Vec<Vec<(f64, f64)>> = sizes
        .par_iter()
        .enumerate()
        .map(|(c, &size)| {
            let mut rng = stream.child(c as u64).rng();
            let mut state = init();
            let mut acc = vec![(0.0, 0.0); nq];
            for _ in 0..size {
                let x = f(&mut state, &mut rng);
                for (k, &q) in exponents.iter().enumerate() {
                    let xq = powq(x, q);
                    acc[k].0 += xq;
                    acc[k].1 += xq * xq;
                }
            }
            acc
        })
        .collect();

    let nf = n_samples as f64;
    (0..nq)
        .map(|k| {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for chunk in &partials {
                sum += chunk[k].0;
                sumsq += chunk[k].1;
            }
            let mean = sum / nf;
            let var = ((sumsq - nf * mean * mean) / (nf - 1.0).max(1.0)).max(0.0);
            let se_mean = (var / nf).sqrt();
            let q = exponents[k];
            if q == 1.0 {
                Estimate::new(mean, se_mean, n_samples)
            } else {
                let value = mean.powf(1.0 / q);
                let deriv = value / (q * mean);
                Estimate::new(value, deriv.abs() * se_mean, n_samples)
            }
        })
        .collect()
}

/// Mean of `f` over `n_samples` draws, with per-chunk scratch state.
pub fn mc_mean_with<S, I, F>(stream: RngStream, n_samples: u64, init: I, f: F) -> Estimate
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    mc_power_means_with(stream, n_samples, &[1.0], init, f)
        .pop()
        .expect("one exponent in, one estimate out")
}

/// Mean of `f` over `n_samples` draws.
pub fn mc_mean<F>(stream: RngStream, n_samples: u64, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    mc_mean_with(stream, n_samples, || (), |(), rng| f(rng))
}

/// Collect `n_samples` draws of `f` in deterministic chunk order.
pub fn mc_collect_with<S, I, F>(stream: RngStream, n_samples: u64, init: I, f: F) -> Vec<f64>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    let sizes = chunk_sizes(n_samples);
    let chunks: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(c, &size)| {
            let mut rng = stream.child(c as u64).rng();
            let mut state = init();
            (0..size).map(|_| f(&mut state, &mut rng)).collect()
        })
        .collect();
    chunks.concat()
}

/// Map `f` over item indices `0..n_items`, giving every item its own child
/// stream. Intended for heavyweight per-item work (whole tuples, rotations).
pub fn mc_map_indexed<T, F>(stream: RngStream, n_items: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, RngStream) -> T + Sync,
{
    (0..n_items)
        .into_par_iter()
        .map(|i| f(i, stream.child(i)))
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical `level`-quantile of an ascending-sorted sample together with a
/// distribution-free 95% confidence interval from binomial order statistics.
pub fn quantile_with_ci(sorted: &[f64], level: f64) -> (f64, (f64, f64)) {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&level), "quantile level must be in [0, 1]");
    let n = sorted.len();
    let nf = n as f64;
    let idx = ((level * nf).ceil() as i64 - 1).clamp(0, n as i64 - 1) as usize;
    let half = 1.96 * (nf * level * (1.0 - level)).sqrt();
    let lo = ((idx as f64 - half).floor() as i64).clamp(0, n as i64 - 1) as usize;
    let hi = ((idx as f64 + half).ceil() as i64).clamp(0, n as i64 - 1) as usize;
    (sorted[idx], (sorted[lo], sorted[hi]))
}

/// Median of an ascending-sorted sample with a binomial order-statistic CI,
/// packaged as an [`Estimate`] (stderr = CI width / 3.92).
pub fn median_estimate(sorted: &[f64]) -> Estimate {
    assert!(!sorted.is_empty(), "median of an empty sample");
    let n = sorted.len();
    let value = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (_, (lo, hi)) = quantile_with_ci(sorted, 0.5);
    let stderr = (hi - lo) / (2.0 * 1.96);
    Estimate::new(value, stderr, n as u64)
}

/// Two-sample Kolmogorov–Smirnov test.
///
/// Returns the statistic `D = sup |F_a − F_b|` and the asymptotic p-value
/// (with the usual finite-sample correction of the effective size).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs nonempty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        d = d.max(diff);
    }
    let ne = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    (d, kolmogorov_tail(lambda))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2 k² λ²)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_reproduces_exactly() {
        let s = RngStream::with_stream(7, 3);
        let a: Vec<u64> = {
            let mut r = s.rng();
            (0..8).map(|_| r.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut r = s.rng();
            (0..8).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let base = RngStream::new(7);
        let mut r0 = base.child(0).rng();
        let mut r1 = base.child(1).rng();
        let a: u64 = r0.gen();
        let b: u64 = r1.gen();
        assert_ne!(a, b);
        assert_ne!(base.child(0), base.child(1));
        assert_ne!(base.child(0), base.child(0).child(0));
    }

    #[test]
    fn mc_mean_matches_direct_loop() {
        let stream = RngStream::new(11).child_from_key("unit-test");
        let est = mc_mean(stream, 20_000, |rng| rng.gen::<f64>());
        assert!((est.value - 0.5).abs() < 4.0 * est.stderr);
        assert!(est.stderr > 0.0 && est.stderr < 0.01);
        assert_eq!(est.n_samples, 20_000);
        let again = mc_mean(stream, 20_000, |rng| rng.gen::<f64>());
        assert_eq!(est.value.to_bits(), again.value.to_bits());
    }

    #[test]
    fn power_means_are_monotone_on_shared_samples() {
        let stream = RngStream::new(5).child_from_key("power-means");
        let qs = [-2.0, -1.0, 1.0, 2.0, 4.0];
        let ests = mc_power_means_with(stream, 4096, &qs, || (), |(), rng| 0.1 + rng.gen::<f64>());
        for w in ests.windows(2) {
            assert!(w[0].value <= w[1].value * (1.0 + 1e-12));
        }
    }

    #[test]
    fn quantile_levels_and_limits() {
        let sorted: Vec<f64> = (1..=100).map(f64::from).collect();
        let (q90, (lo, hi)) = quantile_with_ci(&sorted, 0.9);
        assert_eq!(q90, 90.0);
        assert!(lo <= q90 && q90 <= hi);
        // level → 0 approaches the sample minimum
        let (qmin, _) = quantile_with_ci(&sorted, 0.0);
        assert_eq!(qmin, 1.0);
        let (qmax, _) = quantile_with_ci(&sorted, 1.0);
        assert_eq!(qmax, 100.0);
    }

    #[test]
    fn ks_accepts_identical_distributions_and_rejects_shifted() {
        let stream = RngStream::new(3).child_from_key("ks");
        let mut rng = stream.rng();
        let a: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let (_, p_same) = ks_two_sample(&a, &b);
        assert!(p_same > 0.01, "p = {p_same}");
        let c: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let (_, p_diff) = ks_two_sample(&a, &c);
        assert!(p_diff < 1e-6, "p = {p_diff}");
    }

    #[test]
    fn median_of_odd_sample_is_middle_value() {
        let sorted: Vec<f64> = (0..101).map(f64::from).collect();
        let m = median_estimate(&sorted);
        assert_eq!(m.value, 50.0);
        assert!(m.stderr > 0.0);
        assert!((m.ci95.0 - (m.value - 1.96 * m.stderr)).abs() < 1e-12);
    }
}
