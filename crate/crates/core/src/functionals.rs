//! Global invariants of a body estimated by Monte Carlo.
//!
//! For a body `K ⊂ ℝⁿ` with gauge `‖·‖_K`:
//!
//! * `M(K) = E ‖ξ‖_K`, `ξ` uniform on the unit sphere, and its power-mean
//!   relatives `M_q(K) = (E ‖ξ‖_K^q)^{1/q}`,
//! * the mean half-width `w(K) = E h_K(ξ)` (the same average for the polar
//!   gauge),
//! * the Gaussian median `m(K)` of `‖G‖_K`,
//! * the critical dimensions `k(K) = n (M/b)²` and
//!   `d(K) = min{n, −ln γ_n((m/2)K)}`,
//! * moments `I_q(μ) = (E |x|₂^q)^{1/q}` and `E ‖x‖_K` under a pushforward
//!   measure `μ`.
//!
//! Everything with a closed form (`b`, `R`, `vrad`, volumes) lives on
//! [`BodySpec`] instead.

use crate::bodies::BodySpec;
use crate::error::Error;
use crate::sampling::{sample_gaussian_into, sample_sphere_into, PushforwardMeasure};
use crate::stats::{
    mc_collect_with, mc_mean_with, mc_power_means_with, median_estimate, CensoredEstimate,
    Estimate, RngStream,
};
use crate::Result;
use serde::Serialize;

pub(crate) fn validate_exponents(qs: &[f64], dim: usize) -> Result<()> {
    for &q in qs {
        if q == 0.0 {
            return Err(Error::arg("moment exponent q must be nonzero"));
        }
        if q <= -(dim as f64) {
            return Err(Error::arg(format!(
                "moment exponent q = {q} must exceed −n = −{dim} for an integrable gauge power"
            )));
        }
        if !q.is_finite() {
            return Err(Error::arg("moment exponent q must be finite"));
        }
    }
    Ok(())
}

/// `M_q(K) = (E ‖ξ‖_K^q)^{1/q}` for several exponents on one shared sphere
/// sample (so the estimates are comparable and exactly monotone in `q`).
pub fn estimate_m_many(
    body: &BodySpec,
    qs: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    validate_exponents(qs, body.dim())?;
    let dim = body.dim();
    Ok(mc_power_means_with(
        stream,
        n_samples,
        qs,
        || vec![0.0; dim],
        |xi, rng| {
            sample_sphere_into(rng, xi);
            body.gauge(xi)
        },
    ))
}

/// `M(K) = E ‖ξ‖_K`, `ξ` uniform on the sphere.
pub fn estimate_m(body: &BodySpec, n_samples: u64, stream: RngStream) -> Estimate {
    estimate_m_many(body, &[1.0], n_samples, stream)
        .expect("q = 1 is always valid")
        .pop()
        .expect("one exponent in, one estimate out")
}

/// Mean half-width `w(K) = E h_K(ξ)`, `ξ` uniform on the sphere.
pub fn estimate_mean_width(body: &BodySpec, n_samples: u64, stream: RngStream) -> Estimate {
    let dim = body.dim();
    mc_mean_with(
        stream,
        n_samples,
        || vec![0.0; dim],
        |xi, rng| {
            sample_sphere_into(rng, xi);
            body.support(xi)
        },
    )
}

/// Median of `‖G‖_K` for a standard Gaussian `G`, with a standard error from
/// binomial order statistics.
pub fn estimate_gaussian_median(body: &BodySpec, n_samples: u64, stream: RngStream) -> Estimate {
    let dim = body.dim();
    let mut values = mc_collect_with(
        stream,
        n_samples,
        || vec![0.0; dim],
        |g, rng| {
            sample_gaussian_into(rng, g);
            body.gauge(g)
        },
    );
    values.sort_by(|a, b| a.partial_cmp(b).expect("gauges are finite"));
    median_estimate(&values)
}

/// Critical (Dvoretzky) dimension `k(K) = n (M/b)²` from an estimate of `M`.
pub fn k_from_m(body: &BodySpec, m: &Estimate) -> Estimate {
    let n = body.dim() as f64;
    let b = body.polar_radius();
    let value = n * (m.value / b) * (m.value / b);
    let stderr = 2.0 * n * m.value * m.stderr / (b * b);
    Estimate::new(value, stderr, m.n_samples)
}

/// `k(K)` estimated end to end.
pub fn estimate_k(body: &BodySpec, n_samples: u64, stream: RngStream) -> Estimate {
    k_from_m(body, &estimate_m(body, n_samples, stream))
}

/// Gaussian small-ball dimension `d(K) = min{n, −ln P(‖G‖_K ≤ m/2)}`.
///
/// The probability is estimated with `n_samples` fresh Gaussians; when no
/// sample lands in `(m/2)K` the estimate is censored at `min{n, ln N}`,
/// which is only a lower bound on `d`.
pub fn estimate_d(
    body: &BodySpec,
    gaussian_median: f64,
    n_samples: u64,
    stream: RngStream,
) -> CensoredEstimate {
    let dim = body.dim();
    let threshold = 0.5 * gaussian_median;
    let hit = mc_mean_with(
        stream,
        n_samples,
        || vec![0.0; dim],
        |g, rng| {
            sample_gaussian_into(rng, g);
            if body.gauge(g) <= threshold {
                1.0
            } else {
                0.0
            }
        },
    );
    let n = dim as f64;
    if hit.value <= 0.0 {
        CensoredEstimate {
            value: n.min((n_samples as f64).ln()),
            censored: true,
        }
    } else {
        CensoredEstimate {
            value: n.min(-hit.value.ln()),
            censored: false,
        }
    }
}

/// `I_q(μ) = (E |x|₂^q)^{1/q}` for several exponents on one shared sample.
pub fn estimate_iq_many(
    measure: &PushforwardMeasure,
    qs: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    validate_exponents(qs, measure.dim())?;
    let dim = measure.dim();
    Ok(mc_power_means_with(
        stream,
        n_samples,
        qs,
        || (measure.sampler(), vec![0.0; dim]),
        |(sampler, x), rng| {
            sampler.sample_into(rng, x);
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        },
    ))
}

/// `I_q` for a single exponent.
pub fn estimate_iq(
    measure: &PushforwardMeasure,
    q: f64,
    n_samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    Ok(estimate_iq_many(measure, &[q], n_samples, stream)?
        .pop()
        .expect("one exponent in, one estimate out"))
}

/// `E ‖x‖_K` under the measure.
pub fn estimate_i1k(
    measure: &PushforwardMeasure,
    k_body: &BodySpec,
    n_samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if k_body.dim() != measure.dim() {
        return Err(Error::DimensionMismatch {
            expected: measure.dim(),
            got: k_body.dim(),
        });
    }
    let dim = measure.dim();
    Ok(mc_mean_with(
        stream,
        n_samples,
        || (measure.sampler(), vec![0.0; dim]),
        |(sampler, x), rng| {
            sampler.sample_into(rng, x);
            k_body.gauge(x)
        },
    ))
}

/// Fraction of measure samples with `|x|₂ ≥ level` (tail diagnostics).
pub fn estimate_euclidean_tail(
    measure: &PushforwardMeasure,
    level: f64,
    n_samples: u64,
    stream: RngStream,
) -> Estimate {
    let dim = measure.dim();
    mc_mean_with(
        stream,
        n_samples,
        || (measure.sampler(), vec![0.0; dim]),
        |(sampler, x), rng| {
            let norm2: f64 = {
                sampler.sample_into(rng, x);
                x.iter().map(|v| v * v).sum()
            };
            if norm2.sqrt() >= level {
                1.0
            } else {
                0.0
            }
        },
    )
}

/// Everything the `functionals` command reports for one body.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionalProfile {
    pub body: String,
    pub dim: usize,
    /// `M(K)` and the shared-sample power means requested alongside it.
    pub m: Estimate,
    pub m_q: Vec<(f64, Estimate)>,
    pub mean_width: Estimate,
    pub gaussian_median: Estimate,
    /// Closed forms: circumradius of the polar body, circumradius, volume radius.
    pub polar_radius: f64,
    pub radius: f64,
    pub vrad: f64,
    pub k: Estimate,
    pub d: CensoredEstimate,
    pub n_samples: u64,
}

/// Exponents profiled by default alongside `M`.
pub const PROFILE_EXPONENTS: [f64; 4] = [-2.0, -1.0, 2.0, 4.0];

/// Estimate the full profile of one body. Each constituent estimator gets
/// its own child stream, so profiles are reproducible per `(seed, body)`.
pub fn profile(body: &BodySpec, n_samples: u64, stream: RngStream) -> Result<FunctionalProfile> {
    let mut qs = vec![1.0];
    qs.extend(PROFILE_EXPONENTS.iter().copied().filter(|&q| q > -(body.dim() as f64)));
    let mut m_all = estimate_m_many(body, &qs, n_samples, stream.child_from_key("m"))?;
    let m = m_all.remove(0);
    let m_q = qs[1..].iter().copied().zip(m_all).collect();
    let mean_width = estimate_mean_width(body, n_samples, stream.child_from_key("w"));
    let gaussian_median =
        estimate_gaussian_median(body, n_samples, stream.child_from_key("median"));
    let k = k_from_m(body, &m);
    let d = estimate_d(
        body,
        gaussian_median.value,
        n_samples,
        stream.child_from_key("d"),
    );
    Ok(FunctionalProfile {
        body: body.descriptor(),
        dim: body.dim(),
        m,
        m_q,
        mean_width,
        gaussian_median,
        polar_radius: body.polar_radius(),
        radius: body.radius(),
        vrad: body.vrad(),
        k,
        d,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{BodySpec, Exponent};
    use crate::sampling::{BodyTuple, WeightVector};

    fn stream(key: &str) -> RngStream {
        RngStream::new(77).child_from_key(key)
    }

    #[test]
    fn m_of_the_unit_ball_is_exactly_one() {
        let ball = BodySpec::ball(8).unwrap();
        let m = estimate_m(&ball, 2000, stream("m-ball"));
        assert!((m.value - 1.0).abs() < 1e-12);
        assert!(m.stderr < 1e-12);
    }

    #[test]
    fn m_scales_like_the_inverse_body_scale() {
        let b = BodySpec::cross_polytope(6).unwrap();
        let double = b.clone().scaled(2.0).unwrap();
        let m1 = estimate_m(&b, 4000, stream("m-scale"));
        let m2 = estimate_m(&double, 4000, stream("m-scale"));
        assert!((m1.value - 2.0 * m2.value).abs() < 1e-12);
    }

    #[test]
    fn m_q_monotone_and_close_to_m_for_small_q() {
        let cube = BodySpec::cube(16).unwrap().normalized();
        let qs = [-2.0, -1.0, 1.0, 2.0, 4.0];
        let ests = estimate_m_many(&cube, &qs, 20_000, stream("mq")).unwrap();
        for w in ests.windows(2) {
            assert!(w[0].value <= w[1].value * (1.0 + 1e-12));
        }
        // M_{−1} and M₁ agree within a few percent in a 16-dimensional body.
        let ratio = ests[1].value / ests[2].value;
        assert!(ratio > 0.9 && ratio <= 1.0, "ratio {ratio}");
    }

    #[test]
    fn invalid_exponents_are_rejected() {
        let cube = BodySpec::cube(4).unwrap();
        assert!(estimate_m_many(&cube, &[0.0], 100, stream("bad")).is_err());
        assert!(estimate_m_many(&cube, &[-4.0], 100, stream("bad")).is_err());
        assert!(estimate_m_many(&cube, &[-5.0], 100, stream("bad")).is_err());
        assert!(estimate_m_many(&cube, &[f64::INFINITY], 100, stream("bad")).is_err());
    }

    #[test]
    fn mean_width_of_the_ball_is_one() {
        let ball = BodySpec::ball(5).unwrap();
        let w = estimate_mean_width(&ball, 1000, stream("w-ball"));
        assert!((w.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duality_lower_bound_for_width_times_m() {
        // ⟨ξ, ξ⟩ = 1 ≤ ‖ξ‖_K · h_K(ξ) pointwise, so M̂ · ŵ ≥ 1 − noise.
        let body = BodySpec::lp(Exponent::Finite(1.5), 6).unwrap().normalized();
        let m = estimate_m(&body, 20_000, stream("mw-m"));
        let w = estimate_mean_width(&body, 20_000, stream("mw-w"));
        let product = m.value * w.value;
        let sigma = (m.stderr * w.value).hypot(w.stderr * m.value);
        assert!(product >= 1.0 - 3.0 * sigma, "product {product}");
    }

    #[test]
    fn gaussian_median_of_ball_matches_chi_distribution() {
        // Median of the χ₁₆ distribution ≈ 3.9169.
        let ball = BodySpec::ball(16).unwrap();
        let med = estimate_gaussian_median(&ball, 40_000, stream("median"));
        assert!((med.value - 3.9169).abs() < 4.0 * med.stderr.max(0.005), "median {}", med.value);
    }

    #[test]
    fn small_ball_dimension_censors_when_unresolvable() {
        // P(‖G‖₂ ≤ median/2) at n = 64 is ≈ 6e−9, far below 1/N.
        let ball = BodySpec::ball(64).unwrap();
        let med = estimate_gaussian_median(&ball, 20_000, stream("d-median"));
        let d = estimate_d(&ball, med.value, 50_000, stream("d"));
        assert!(d.censored);
        assert!((d.value - 50_000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn iq_of_singleton_weight_is_plain_norm_mean() {
        let body = BodySpec::ball(4).unwrap().normalized();
        let t = WeightVector::new(vec![1.0]).unwrap();
        let measure = PushforwardMeasure::new(BodyTuple::Common(body.clone()), t, false).unwrap();
        let i1 = estimate_iq(&measure, 1.0, 10_000, stream("iq")).unwrap();
        let i2 = estimate_iq(&measure, 2.0, 10_000, stream("iq")).unwrap();
        assert!(i1.value <= i2.value);
        // E |x|₂ for the scaled ball: radius λ times n/(n+1).
        let expected = body.scale() * 4.0 / 5.0;
        assert!((i1.value - expected).abs() < 4.0 * i1.stderr);
    }

    #[test]
    fn i1k_against_own_gauge_is_dimension_fraction() {
        // ∫_K ‖x‖_K dx = n/(n+1) for any volume-one star body.
        let body = BodySpec::cross_polytope(3).unwrap().normalized();
        let t = WeightVector::new(vec![1.0]).unwrap();
        let measure =
            PushforwardMeasure::new(BodyTuple::Common(body.clone()), t, false).unwrap();
        let i = estimate_i1k(&measure, &body, 50_000, stream("i1k")).unwrap();
        assert!((i.value - 0.75).abs() < 4.0 * i.stderr, "value {}", i.value);
    }

    #[test]
    fn profile_is_reproducible_and_complete() {
        let body = BodySpec::cube(8).unwrap().normalized();
        let p1 = profile(&body, 4000, stream("profile")).unwrap();
        let p2 = profile(&body, 4000, stream("profile")).unwrap();
        assert_eq!(p1.m.value.to_bits(), p2.m.value.to_bits());
        assert_eq!(p1.m_q.len(), PROFILE_EXPONENTS.len());
        assert_eq!(p1.dim, 8);
        assert!(p1.k.value > 0.0);
        assert!(p1.polar_radius > 0.0 && p1.radius > 0.0 && p1.vrad > 0.0);
    }
}
