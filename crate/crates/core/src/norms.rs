//! The multi-integral norm and its closed-form companions.
//!
//! For bodies `C₁, …, C_s` (usually one common `C`), weights `t ∈ ℝˢ`, and a
//! target body `K`, the norm is
//!
//! ```text
//! ‖t‖ = E ‖t₁x₁ + … + t_s x_s‖_K,   x_j uniform on C_j, independent.
//! ```
//!
//! [`estimate_norm`] samples it directly. [`estimate_norm_isotropic`] goes
//! through the identity `‖t‖ = |t|₂ · L_C · I₁(μ_t, K)` with `μ_t` the law of
//! the sum rescaled to isotropic position; both routes must agree within
//! noise, which the test suites exploit.
//!
//! [`q_n_cube`] is the closed-form equivalent for the volume-one cube, and
//! [`density_at_zero`] the exact density of `⟨t, x⟩` at the origin in the
//! one-dimensional case.

use crate::bodies::BodySpec;
use crate::error::Error;
use crate::functionals::validate_exponents;
use crate::sampling::{BodyTuple, PushforwardMeasure, WeightVector};
use crate::stats::{mc_power_means_with, Estimate, RngStream};
use crate::Result;

/// `(E ‖Σ t_j x_j‖_K^q)^{1/q}` for several exponents on one shared sample.
///
/// `qs` must be nonzero and exceed `−n`; the estimates use a common stream of
/// sum draws so ratios between moments carry far less noise than independent
/// runs would.
pub fn estimate_norm_moments(
    tuple: &BodyTuple,
    t: &WeightVector,
    k_body: &BodySpec,
    qs: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    tuple.validate(t.len())?;
    let dim = tuple.dim();
    if k_body.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: k_body.dim(),
        });
    }
    validate_exponents(qs, dim)?;
    let measure = PushforwardMeasure::new(tuple.clone(), t.clone(), false)?;
    Ok(mc_power_means_with(
        stream,
        n_samples,
        qs,
        || (measure.sampler(), vec![0.0; dim]),
        |(sampler, x), rng| {
            sampler.sample_into(rng, x);
            k_body.gauge(x)
        },
    ))
}

/// The multi-integral norm `E ‖Σ t_j x_j‖_K`, estimated directly.
pub fn estimate_norm(
    tuple: &BodyTuple,
    t: &WeightVector,
    k_body: &BodySpec,
    n_samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    Ok(estimate_norm_moments(tuple, t, k_body, &[1.0], n_samples, stream)?
        .pop()
        .expect("one exponent in, one estimate out"))
}

/// The same norm through the isotropic factorization
/// `‖t‖ = |t|₂ · L_C · E ‖y‖_K`, `y ~ μ_t` the isotropically rescaled sum.
///
/// Requires a common volume-one generating body and a nonzero `t`; those are
/// exactly the hypotheses under which the factorization is an identity, so
/// anything else is an argument error rather than a silent approximation.
pub fn estimate_norm_isotropic(
    tuple: &BodyTuple,
    t: &WeightVector,
    k_body: &BodySpec,
    n_samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    tuple.validate(t.len())?;
    let dim = tuple.dim();
    if k_body.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: k_body.dim(),
        });
    }
    let common = tuple
        .common()
        .ok_or_else(|| Error::arg("the isotropic route needs one common generating body"))?;
    let l_c = common.isotropic_constant()?;
    let measure = PushforwardMeasure::new(tuple.clone(), t.clone(), true)?;
    let i1 = crate::functionals::estimate_i1k(&measure, k_body, n_samples, stream)?;
    Ok(i1.scaled(l_c * t.l2()))
}

/// Closed form equivalent of the norm when both bodies are the volume-one
/// cube: with `u = max(1, round(ln n))` and `t*` the weights sorted by
/// decreasing absolute value,
///
/// ```text
/// q_n(t) = t*₁ + … + t*_u + √u · (t*_{u+1}² + …)^{1/2}.
/// ```
///
/// The norm itself matches this up to universal constant factors.
pub fn q_n_cube(t: &WeightVector, n: usize) -> f64 {
    let u = (n as f64).ln().round().max(1.0) as usize;
    q_n_cube_with_u(t, u)
}

/// `q_n` with the head length `u` fixed explicitly.
pub fn q_n_cube_with_u(t: &WeightVector, u: usize) -> f64 {
    let sorted = t.decreasing_abs();
    let head_len = u.min(sorted.len());
    let head: f64 = sorted[..head_len].iter().sum();
    let tail_sq: f64 = sorted[head_len..].iter().map(|v| v * v).sum();
    head + (u as f64).sqrt() * tail_sq.sqrt()
}

/// Entries smaller than this multiple of `|t|₂` contribute a zero-width
/// factor to the one-dimensional sum and are dropped from the density.
const DENSITY_WIDTH_CUTOFF: f64 = 1e-12;

/// Exact subset enumeration is used up to this many nonzero weights; past it
/// the alternating formula is replaced by characteristic-function quadrature.
const DENSITY_EXACT_MAX: usize = 26;

/// Exact enumeration is also abandoned when the alternating sum cancels more
/// than `e^18.4 ≈ 10^8`, which would leave fewer than eight correct digits.
const DENSITY_CANCELLATION_LIMIT: f64 = 18.4;

/// Natural log of the ratio between the largest alternating term `(T/2)^{s−1}`
/// and the scale of the accumulated result `(s−1)!·Π a_j / ‖a‖₂` (the density
/// itself is of order `1/‖a‖₂`). Digits lost to cancellation in the f64 subset
/// sum are roughly this value over `ln 10`. Strongly decaying weights drive it
/// up fast: geometric decay with ratio 0.7 crosses `10^8` near 15 weights.
fn density_cancellation_exponent(a: &[f64]) -> f64 {
    let s = a.len();
    let half = 0.5 * a.iter().sum::<f64>();
    let l2 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ln_ratio = (s as f64 - 1.0) * half.ln() + l2.ln();
    for k in 1..s {
        ln_ratio -= (k as f64).ln();
    }
    for &w in a {
        ln_ratio -= w.ln();
    }
    ln_ratio
}

/// Density at the origin of `⟨t, x⟩` for `x` uniform on the volume-one cube
/// (iid coordinates uniform on `[−1/2, 1/2]`).
///
/// For `s` nonzero weights `a_j = |t_j|` and `T = Σ a_j` the exact value is
///
/// ```text
/// g(0) = (1/((s−1)!·Π a_j)) · Σ_{A ⊆ [s]} (−1)^{|A|} (T/2 − Σ_{j∈A} a_j)₊^{s−1},
/// ```
///
/// evaluated by pruned subset enumeration when that is numerically safe and by
/// integrating the characteristic function `Π sinc(a_j ω/2)` otherwise, where
/// the integrand decays like `ω^{−s}` and a composite Simpson rule converges
/// rapidly. Enumeration is safe when `s ≤ 26` and the alternating sum cancels
/// by less than `10^8` (see [`density_cancellation_exponent`]); one or two
/// weights always enumerate, since the formula then has too few terms to
/// cancel badly and the quadrature integrand would decay too slowly.
/// Classical facts pinned by the tests: for `|t|₂ = 1` the value lies in
/// `[1, √2]` and tends to `√(6/π)` for flat weights.
pub fn density_at_zero(t: &WeightVector) -> Result<f64> {
    let cutoff = DENSITY_WIDTH_CUTOFF * t.l2();
    let mut widths: Vec<f64> = t
        .entries()
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > cutoff)
        .collect();
    if widths.is_empty() {
        return Err(Error::arg(
            "density at the origin needs at least one nonzero weight",
        ));
    }
    widths.sort_by(|x, y| y.partial_cmp(x).expect("weights are finite"));
    let exact_is_safe = widths.len() <= 2
        || (widths.len() <= DENSITY_EXACT_MAX
            && density_cancellation_exponent(&widths) <= DENSITY_CANCELLATION_LIMIT);
    if exact_is_safe {
        Ok(density_exact(&widths))
    } else {
        Ok(density_by_quadrature(&widths))
    }
}

/// Alternating subset-sum formula. `a` sorted descending so that pruning on
/// partial sums `≥ T/2` cuts whole subtrees.
pub(crate) fn density_exact(a: &[f64]) -> f64 {
    let s = a.len();
    let half = 0.5 * a.iter().sum::<f64>();
    let mut acc = 0.0;
    subset_terms(a, 0, 0.0, 1.0, half, (s - 1) as i32, &mut acc);
    // Normalization (s−1)! · Π a_j stays far from overflow for s ≤ 26.
    let mut norm = 1.0;
    for k in 1..s {
        norm *= k as f64;
    }
    for &w in a {
        norm *= w;
    }
    acc / norm
}

fn subset_terms(a: &[f64], i: usize, sum: f64, sign: f64, half: f64, sm1: i32, acc: &mut f64) {
    if i == a.len() {
        let x = half - sum;
        *acc += if sm1 == 0 {
            if x > 0.0 {
                sign
            } else {
                0.0
            }
        } else {
            sign * x.powi(sm1)
        };
        return;
    }
    subset_terms(a, i + 1, sum, sign, half, sm1, acc);
    let with = sum + a[i];
    if with < half {
        subset_terms(a, i + 1, with, -sign, half, sm1, acc);
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `g(0) = (1/π) ∫₀^∞ Π_j sinc(a_j ω / 2) dω`, only used for many weights
/// where the integrand decays like `ω^{−s}`.
pub(crate) fn density_by_quadrature(a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    // Envelope Π min(1, 2/(a_j ω)) sets the truncation point.
    let envelope = |omega: f64| -> f64 {
        a.iter()
            .map(|&w| (2.0 / (w * omega)).min(1.0))
            .product::<f64>()
    };
    let mut upper = 16.0 / total.max(f64::MIN_POSITIVE);
    while envelope(upper) > 1e-14 {
        upper *= 2.0;
    }
    // Oscillation scale of the product is at least 2π / T; resolve finely.
    let panels = ((upper * total / std::f64::consts::PI * 16.0).ceil() as usize).clamp(512, 400_000);
    let integrand = |omega: f64| -> f64 {
        a.iter().map(|&w| sinc(0.5 * w * omega)).product::<f64>()
    };
    let h = upper / panels as f64;
    // Composite Simpson (panels forced even by construction below).
    let panels = panels + panels % 2;
    let h = if panels as f64 * h > upper { upper / panels as f64 } else { h };
    let mut sum = integrand(0.0) + integrand(upper);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(k as f64 * h);
    }
    (sum * h / 3.0) / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{BodySpec, Exponent};

    fn stream(key: &str) -> RngStream {
        RngStream::new(101).child_from_key(key)
    }

    fn flat(s: usize) -> WeightVector {
        WeightVector::new(vec![1.0 / (s as f64).sqrt(); s]).unwrap()
    }

    #[test]
    fn norm_is_homogeneous_in_t_on_shared_samples() {
        let cube = BodySpec::cube(6).unwrap().normalized();
        let tuple = BodyTuple::Common(cube.clone());
        let t = WeightVector::new(vec![0.3, -1.1, 0.7]).unwrap();
        let t2 = WeightVector::new(vec![0.6, -2.2, 1.4]).unwrap();
        let a = estimate_norm(&tuple, &t, &cube, 2000, stream("homog")).unwrap();
        let b = estimate_norm(&tuple, &t2, &cube, 2000, stream("homog")).unwrap();
        assert!((b.value - 2.0 * a.value).abs() <= 1e-12 * b.value.abs());
    }

    #[test]
    fn single_term_norm_is_a_polar_style_mean() {
        // s = 1, t = (1): E ‖x‖_K over K itself is n/(n+1).
        let ball = BodySpec::ball(4).unwrap().normalized();
        let tuple = BodyTuple::Common(ball.clone());
        let t = WeightVector::new(vec![1.0]).unwrap();
        let est = estimate_norm(&tuple, &t, &ball, 40_000, stream("single")).unwrap();
        assert!((est.value - 0.8).abs() < 4.0 * est.stderr, "value {}", est.value);
    }

    #[test]
    fn direct_and_isotropic_routes_agree() {
        let cube = BodySpec::cube(8).unwrap().normalized();
        let ball = BodySpec::ball(8).unwrap();
        let tuple = BodyTuple::Common(cube);
        let t = WeightVector::new(vec![1.0, 0.5, 0.25, 0.125]).unwrap();
        let direct = estimate_norm(&tuple, &t, &ball, 30_000, stream("direct")).unwrap();
        let iso = estimate_norm_isotropic(&tuple, &t, &ball, 30_000, stream("iso")).unwrap();
        let sigma = direct.stderr.hypot(iso.stderr);
        assert!(
            (direct.value - iso.value).abs() <= 4.0 * sigma,
            "direct {} iso {}",
            direct.value,
            iso.value
        );
    }

    #[test]
    fn isotropic_route_rejects_what_the_identity_needs() {
        let cube = BodySpec::cube(4).unwrap(); // not volume one
        let tuple = BodyTuple::Common(cube.clone());
        let t = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let err = estimate_norm_isotropic(&tuple, &t, &cube, 10, stream("rej"));
        assert!(err.is_err());

        let per_term = BodyTuple::PerTerm(vec![
            BodySpec::cube(4).unwrap().normalized(),
            BodySpec::ball(4).unwrap().normalized(),
        ]);
        let err = estimate_norm_isotropic(&per_term, &t, &BodySpec::ball(4).unwrap(), 10, stream("rej"));
        assert!(err.is_err());
    }

    #[test]
    fn moments_share_samples_and_stay_monotone() {
        let body = BodySpec::lp(Exponent::Finite(1.5), 5).unwrap().normalized();
        let tuple = BodyTuple::Common(body.clone());
        let t = flat(5);
        let qs = [1.0, 2.0, 4.0];
        let ests =
            estimate_norm_moments(&tuple, &t, &body, &qs, 5000, stream("moments")).unwrap();
        assert!(ests[0].value <= ests[1].value && ests[1].value <= ests[2].value);
    }

    #[test]
    fn q_n_matches_hand_arithmetic() {
        // n = 16 → u = round(ln 16) = 3; flat sixteen weights 1/4:
        // head 3/4, tail √3 · √(13/16).
        let t = flat(16);
        let expected = 0.75 + 3f64.sqrt() * (13.0 / 16.0f64).sqrt();
        assert!((q_n_cube(&t, 16) - expected).abs() < 1e-12);
        assert!((expected - 2.3114).abs() < 5e-4);

        // u larger than s degenerates to the plain sum.
        let short = WeightVector::new(vec![0.6, 0.8]).unwrap();
        assert!((q_n_cube_with_u(&short, 5) - 1.4).abs() < 1e-12);

        // e₁ gives exactly 1 for any u.
        let e1 = WeightVector::new(vec![1.0]).unwrap();
        assert!((q_n_cube(&e1, 64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_n_is_between_l2_and_its_sqrt2u_multiple() {
        // t*₁+…+t*_u ≤ √u |t|₂ and √u·tail ≤ √u |t|₂, so q_n ∈ [|t|₂, 2√u |t|₂].
        for s in [1usize, 3, 16, 64] {
            let t = WeightVector::from_pattern(
                crate::sampling::Pattern::Geometric,
                s,
                RngStream::new(5),
            )
            .unwrap();
            for n in [2usize, 16, 64] {
                let u = (n as f64).ln().round().max(1.0);
                let q = q_n_cube(&t, n);
                assert!(q >= t.l2() - 1e-12);
                assert!(q <= 2.0 * u.sqrt() * t.l2() + 1e-12);
            }
        }
    }

    #[test]
    fn density_exact_small_cases() {
        // One weight of size 1: uniform on [−1/2, 1/2], density 1.
        let e1 = WeightVector::new(vec![1.0]).unwrap();
        assert!((density_at_zero(&e1).unwrap() - 1.0).abs() < 1e-12);

        // Two flat weights: triangular peak √2 (Ball's extremal case).
        let two = flat(2);
        assert!((density_at_zero(&two).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);

        // Scaling: density is 1-homogeneous in 1/t.
        let t = WeightVector::new(vec![0.5, 1.0, 0.25]).unwrap();
        let t3 = WeightVector::new(vec![1.5, 3.0, 0.75]).unwrap();
        let g1 = density_at_zero(&t).unwrap();
        let g3 = density_at_zero(&t3).unwrap();
        assert!((g1 - 3.0 * g3).abs() < 1e-9);
    }

    #[test]
    fn density_respects_classical_unit_bounds() {
        let cases = [
            flat(2),
            flat(7),
            flat(26),
            WeightVector::new(vec![0.9, (1.0f64 - 0.81).sqrt()]).unwrap(),
            WeightVector::from_pattern(crate::sampling::Pattern::Geometric, 12, RngStream::new(9))
                .unwrap(),
        ];
        for t in cases {
            let g = density_at_zero(&t).unwrap();
            assert!(g >= 1.0 - 1e-9, "g {}", g);
            assert!(g <= std::f64::consts::SQRT_2 + 1e-9, "g {}", g);
        }
    }

    #[test]
    fn density_quadrature_agrees_with_exact_enumeration() {
        // Flat weights at s = 20 are comfortably inside both regimes and the
        // reference value comes from rational-arithmetic enumeration.
        let widths = vec![1.0 / 20f64.sqrt(); 20];
        let exact = density_exact(&widths);
        let quad = density_by_quadrature(&widths);
        assert!((exact - 1.3715732474327753).abs() < 1e-9, "exact {exact}");
        assert!(
            (exact - quad).abs() < 1e-6 * exact,
            "exact {exact} quad {quad}"
        );
    }

    #[test]
    fn density_ill_conditioned_weights_route_to_quadrature() {
        // Geometric decay at s = 20 makes the alternating enumeration cancel
        // by ~17 orders of magnitude, so the dispatcher must pick quadrature.
        // Reference value from rational-arithmetic enumeration of the same
        // f64 widths: 1.2957483221617678.
        let t = WeightVector::from_pattern(crate::sampling::Pattern::Geometric, 20, RngStream::new(3))
            .unwrap();
        let mut widths: Vec<f64> = t.entries().iter().map(|v| v.abs()).collect();
        widths.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!(density_cancellation_exponent(&widths) > DENSITY_CANCELLATION_LIMIT);
        let g = density_at_zero(&t).unwrap();
        assert_eq!(g.to_bits(), density_by_quadrature(&widths).to_bits());
        assert!((g - 1.2957483221617678).abs() < 1e-9, "g {g}");
    }

    #[test]
    fn density_flat_many_weights_approaches_gaussian_value() {
        // Central limit value √(6/π) with the 1 − 3/(20 s) Irwin–Hall correction.
        let t = flat(40);
        let g = density_at_zero(&t).unwrap();
        let clt = (6.0 / std::f64::consts::PI).sqrt();
        let expected = clt * (1.0 - 3.0 / (20.0 * 40.0));
        assert!((g - expected).abs() < 2e-3, "g {g} expected {expected}");
    }

    #[test]
    fn density_drops_zero_width_entries() {
        let with_zero = WeightVector::new(vec![1.0, 0.0, 1e-18]).unwrap();
        let without = WeightVector::new(vec![1.0]).unwrap();
        assert_eq!(
            density_at_zero(&with_zero).unwrap().to_bits(),
            density_at_zero(&without).unwrap().to_bits()
        );
        let zero = WeightVector::new(vec![0.0, 0.0]).unwrap();
        assert!(density_at_zero(&zero).is_err());
    }
}
