//! Vector balancing: sign-selection rules, the randomized balancing
//! quantiles β̂ and κ̂, and the random-rotation experiments.
//!
//! The balancing question asks how small `‖Σ_j ε_j x_j‖_K` can be made by
//! choosing signs ε for points x drawn from a body C. [`min_signs_bruteforce`]
//! answers exactly at small s; [`min_signs_greedy`] and random draws stand in
//! above the enumeration budget. [`estimate_beta_r`] turns per-tuple minima
//! into the (1−δ)-quantile over random tuples, and [`estimate_kappa_r`] is
//! the variant where the signs are random too.
//!
//! Sample sharing: both quantile estimators derive tuple i's points from
//! `stream.child(i).child_from_key("points")`, so calling them with the same
//! parent stream runs them on identical tuples. On shared tuples the inner
//! quantile of κ̂ dominates the bruteforce inner minimum of β̂ pointwise, so
//! `κ̂ ≥ β̂` holds sample by sample, not just in expectation. The random
//! best-of rule draws its signs from the same `"signs"` child that κ̂ uses,
//! which extends the pointwise guarantee to that rule at equal draw counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::BodySpec;
use crate::bounds::{BoundReport, Direction};
use crate::error::Error;
use crate::functionals::{estimate_d, estimate_gaussian_median, estimate_k, estimate_m};
use crate::norms::estimate_norm;
use crate::sampling::{fill_signs, sample_haar_rotation, BodySampler, BodyTuple, WeightVector};
use crate::stats::{quantile_with_ci, Estimate, RngStream};
use crate::Result;

/// Largest term count the exhaustive rule accepts (2^{s−1} gauge
/// evaluations after the ε ↦ −ε symmetry).
pub const BRUTEFORCE_MAX_TERMS: usize = 25;

/// How a sign vector was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignRule {
    /// Exhaustive minimum over all sign vectors, first sign fixed to +1.
    BruteForce,
    /// Sequential rule: each sign greedily minimizes the running sum's
    /// gauge, ties broken toward +1.
    Greedy,
    /// Best of m uniform random sign vectors.
    RandomBestOf(usize),
}

impl SignRule {
    pub fn name(self) -> String {
        match self {
            SignRule::BruteForce => "bruteforce".to_string(),
            SignRule::Greedy => "greedy".to_string(),
            SignRule::RandomBestOf(m) => format!("random-best-of-{m}"),
        }
    }

    /// Parse `brute`, `greedy` or `random:<m>`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "brute" | "bruteforce" => Ok(SignRule::BruteForce),
            "greedy" => Ok(SignRule::Greedy),
            other => match other.strip_prefix("random:") {
                Some(m) => {
                    let m: usize = m
                        .parse()
                        .map_err(|_| Error::parse(format!("bad draw count in `{other}`")))?;
                    if m == 0 {
                        return Err(Error::parse("random:<m> needs m ≥ 1"));
                    }
                    Ok(SignRule::RandomBestOf(m))
                }
                None => Err(Error::parse(format!(
                    "unknown sign rule `{other}` (expected brute, greedy or random:<m>)"
                ))),
            },
        }
    }

    /// Run the rule. The stream is consumed only by the random rule.
    pub fn assign(self, points: &[Vec<f64>], k: &BodySpec, stream: RngStream) -> Result<SignAssignment> {
        match self {
            SignRule::BruteForce => min_signs_bruteforce(points, k),
            SignRule::Greedy => Ok(min_signs_greedy(points, k)?.assignment),
            SignRule::RandomBestOf(m) => min_signs_random_best_of(points, k, m, stream),
        }
    }
}

/// A chosen sign vector and the gauge it achieves.
#[derive(Clone, Debug, Serialize)]
pub struct SignAssignment {
    /// Entries ±1.
    pub signs: Vec<i8>,
    /// `gauge_K(Σ_j signs_j · x_j)`, recomputed from the final signs.
    pub achieved: f64,
    pub method: String,
}

fn validate_points(points: &[Vec<f64>], k: &BodySpec) -> Result<()> {
    if points.is_empty() {
        return Err(Error::arg("need at least one point to balance"));
    }
    for (j, x) in points.iter().enumerate() {
        if x.len() != k.dim() {
            return Err(Error::DimensionMismatch { expected: k.dim(), got: x.len() })
                .map_err(|e| Error::arg(format!("point {j}: {e}")));
        }
    }
    Ok(())
}

fn signed_sum(points: &[Vec<f64>], signs: &[i8]) -> Vec<f64> {
    let mut sum = vec![0.0; points[0].len()];
    for (x, &eps) in points.iter().zip(signs) {
        let e = eps as f64;
        for (acc, v) in sum.iter_mut().zip(x) {
            *acc += e * v;
        }
    }
    sum
}

/// Exact minimum of the signed-sum gauge over all sign vectors.
///
/// Walks the sign cube in Gray-code order with the first sign pinned to +1
/// (negating every sign leaves the gauge unchanged), updating the running
/// sum by one flip per step: 2^{s−1} gauge evaluations. `achieved` is
/// recomputed from the winning signs so incremental drift cannot leak into
/// the reported value.
pub fn min_signs_bruteforce(points: &[Vec<f64>], k: &BodySpec) -> Result<SignAssignment> {
    validate_points(points, k)?;
    let s = points.len();
    if s > BRUTEFORCE_MAX_TERMS {
        return Err(Error::Capacity {
            what: "bruteforce sign enumeration",
            limit: BRUTEFORCE_MAX_TERMS,
            requested: s,
            hint: "use the greedy or random:<m> rules above this size",
        });
    }
    let mut signs = vec![1i8; s];
    let mut sum = signed_sum(points, &signs);
    let mut best_value = k.gauge(&sum);
    let mut best_signs = signs.clone();
    for g in 1u64..(1u64 << (s - 1)) {
        let j = 1 + g.trailing_zeros() as usize;
        let flip = -2.0 * signs[j] as f64;
        for (acc, v) in sum.iter_mut().zip(&points[j]) {
            *acc += flip * v;
        }
        signs[j] = -signs[j];
        let value = k.gauge(&sum);
        if value < best_value {
            best_value = value;
            best_signs.copy_from_slice(&signs);
        }
    }
    let achieved = k.gauge(&signed_sum(points, &best_signs));
    debug_assert!((achieved - best_value).abs() <= 1e-9 * best_value.max(1.0));
    Ok(SignAssignment { signs: best_signs, achieved, method: "bruteforce".to_string() })
}

/// A greedy run: the assignment plus the largest gauge any partial sum
/// reached along the way.
#[derive(Clone, Debug, Serialize)]
pub struct GreedyTrace {
    pub assignment: SignAssignment,
    pub max_prefix_gauge: f64,
}

/// Sequential sign choice: each ε_j minimizes the gauge of the running
/// sum, ties broken toward +1. Also tracks the prefix-sum gauge maximum,
/// which classical sequential-selection results keep bounded by 2n for
/// points inside the gauge body; here it is reported, not guaranteed.
pub fn min_signs_greedy(points: &[Vec<f64>], k: &BodySpec) -> Result<GreedyTrace> {
    validate_points(points, k)?;
    let mut sum = vec![0.0; points[0].len()];
    let mut signs = Vec::with_capacity(points.len());
    let mut max_prefix = 0.0f64;
    let mut plus = vec![0.0; sum.len()];
    let mut minus = vec![0.0; sum.len()];
    for x in points {
        for i in 0..sum.len() {
            plus[i] = sum[i] + x[i];
            minus[i] = sum[i] - x[i];
        }
        let take_plus = k.gauge(&plus) <= k.gauge(&minus);
        signs.push(if take_plus { 1i8 } else { -1i8 });
        sum.copy_from_slice(if take_plus { &plus } else { &minus });
        max_prefix = max_prefix.max(k.gauge(&sum));
    }
    let achieved = k.gauge(&signed_sum(points, &signs));
    Ok(GreedyTrace {
        assignment: SignAssignment { signs, achieved, method: "greedy".to_string() },
        max_prefix_gauge: max_prefix,
    })
}

/// Best of `m` uniform random sign vectors.
pub fn min_signs_random_best_of(
    points: &[Vec<f64>],
    k: &BodySpec,
    m: usize,
    stream: RngStream,
) -> Result<SignAssignment> {
    validate_points(points, k)?;
    if m == 0 {
        return Err(Error::arg("random best-of needs at least one draw"));
    }
    let s = points.len();
    let mut rng = stream.rng();
    let mut draw = vec![0.0f64; s];
    let mut signs = vec![1i8; s];
    let mut best_value = f64::INFINITY;
    let mut best_signs = signs.clone();
    for _ in 0..m {
        fill_signs(&mut rng, &mut draw);
        for (sg, &d) in signs.iter_mut().zip(&draw) {
            *sg = if d >= 0.0 { 1 } else { -1 };
        }
        let value = k.gauge(&signed_sum(points, &signs));
        if value < best_value {
            best_value = value;
            best_signs.copy_from_slice(&signs);
        }
    }
    let achieved = k.gauge(&signed_sum(points, &best_signs));
    Ok(SignAssignment {
        signs: best_signs,
        achieved,
        method: SignRule::RandomBestOf(m).name(),
    })
}

/// A balancing quantile estimate.
#[derive(Clone, Debug, Serialize)]
pub struct BalancingEstimate {
    /// Empirical (1−δ)-quantile of the per-tuple values.
    pub r: f64,
    /// Distribution-free 95% CI for the quantile, from order statistics.
    pub quantile_ci: (f64, f64),
    pub delta: f64,
    pub s: usize,
    pub n: usize,
    pub method: String,
    pub n_tuples: usize,
    /// The per-tuple values, ascending; basis of the quantile and of any
    /// re-reading at a different δ.
    pub sorted_values: Vec<f64>,
}

impl BalancingEstimate {
    /// The quantile this sample gives at a different δ. Monotone: smaller
    /// δ can only move the quantile up.
    pub fn quantile_at(&self, delta: f64) -> f64 {
        quantile_with_ci(&self.sorted_values, 1.0 - delta).0
    }

    /// `r` packaged with a symmetric stderr read off the order-statistic CI.
    pub fn r_estimate(&self) -> Estimate {
        let stderr = (self.quantile_ci.1 - self.quantile_ci.0) / (2.0 * 1.96);
        Estimate::new(self.r, stderr, self.n_tuples as u64)
    }
}

fn validate_quantile_request(delta: f64, n_tuples: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg(format!("delta must lie in (0, 1), got {delta}")));
    }
    let needed = (50.0 / delta).ceil() as usize;
    if n_tuples < needed {
        return Err(Error::arg(format!(
            "resolving the (1−δ) level at delta = {delta} needs at least {needed} tuples, got {n_tuples}"
        )));
    }
    Ok(())
}

fn draw_tuple(c: &BodySpec, s: usize, stream: RngStream) -> Vec<Vec<f64>> {
    let mut sampler = BodySampler::new(c);
    let mut rng = stream.rng();
    (0..s)
        .map(|_| {
            let mut x = vec![0.0; c.dim()];
            sampler.sample_into(&mut rng, &mut x);
            x
        })
        .collect()
}

fn finish_quantile(
    mut values: Vec<f64>,
    delta: f64,
    s: usize,
    n: usize,
    method: String,
) -> BalancingEstimate {
    let n_tuples = values.len();
    values.sort_by(|a, b| a.partial_cmp(b).expect("gauge values are finite"));
    let (r, quantile_ci) = quantile_with_ci(&values, 1.0 - delta);
    BalancingEstimate { r, quantile_ci, delta, s, n, method, n_tuples, sorted_values: values }
}

/// (1−δ)-quantile over random s-tuples from C of the per-tuple best
/// signed-sum gauge, the best taken by `rule`.
pub fn estimate_beta_r(
    c: &BodySpec,
    k: &BodySpec,
    s: usize,
    delta: f64,
    n_tuples: usize,
    rule: SignRule,
    stream: RngStream,
) -> Result<BalancingEstimate> {
    validate_quantile_request(delta, n_tuples)?;
    if s == 0 {
        return Err(Error::arg("need at least one point per tuple"));
    }
    if c.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), got: k.dim() });
    }
    if rule == SignRule::BruteForce && s > BRUTEFORCE_MAX_TERMS {
        return Err(Error::Capacity {
            what: "bruteforce sign enumeration",
            limit: BRUTEFORCE_MAX_TERMS,
            requested: s,
            hint: "use the greedy or random:<m> rules above this size",
        });
    }
    let values: Result<Vec<f64>> = (0..n_tuples as u64)
        .into_par_iter()
        .map(|i| {
            let tuple_stream = stream.child(i);
            let points = draw_tuple(c, s, tuple_stream.child_from_key("points"));
            Ok(rule.assign(&points, k, tuple_stream.child_from_key("signs"))?.achieved)
        })
        .collect();
    Ok(finish_quantile(values?, delta, s, c.dim(), rule.name()))
}

/// The random-signs variant: per tuple the (1−δ)-quantile of the
/// signed-sum gauge over `n_sign_draws` uniform sign vectors, then the
/// (1−δ)-quantile of those over tuples. Dominates [`estimate_beta_r`] on
/// shared tuples.
pub fn estimate_kappa_r(
    c: &BodySpec,
    k: &BodySpec,
    s: usize,
    delta: f64,
    n_tuples: usize,
    n_sign_draws: usize,
    stream: RngStream,
) -> Result<BalancingEstimate> {
    validate_quantile_request(delta, n_tuples)?;
    if s == 0 {
        return Err(Error::arg("need at least one point per tuple"));
    }
    if n_sign_draws == 0 {
        return Err(Error::arg("need at least one sign draw per tuple"));
    }
    if c.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), got: k.dim() });
    }
    let values: Vec<f64> = (0..n_tuples as u64)
        .into_par_iter()
        .map(|i| {
            let tuple_stream = stream.child(i);
            let points = draw_tuple(c, s, tuple_stream.child_from_key("points"));
            let mut rng = tuple_stream.child_from_key("signs").rng();
            let mut draw = vec![0.0f64; s];
            let mut signs = vec![0i8; s];
            let mut gauges: Vec<f64> = (0..n_sign_draws)
                .map(|_| {
                    fill_signs(&mut rng, &mut draw);
                    for (sg, &d) in signs.iter_mut().zip(&draw) {
                        *sg = if d >= 0.0 { 1 } else { -1 };
                    }
                    k.gauge(&signed_sum(&points, &signs))
                })
                .collect();
            gauges.sort_by(|a, b| a.partial_cmp(b).expect("gauge values are finite"));
            quantile_with_ci(&gauges, 1.0 - delta).0
        })
        .collect();
    Ok(finish_quantile(
        values,
        delta,
        s,
        c.dim(),
        format!("random-signs-quantile-{n_sign_draws}"),
    ))
}

/// Allowed constant in the logarithmic balancing bound
/// `β̂ ≤ c · log(2/δ) · E‖Σ x_j‖_K`.
pub const DELTA_BOUND_THRESHOLD: f64 = 3.0;
/// Allowed constant in the dimensional balancing bound.
pub const DIMENSIONAL_BOUND_THRESHOLD: f64 = 5.0;

/// Check the two upper bounds on the diagonal randomized balancing
/// quantile β̂_δ(K, K) at s = n:
///
/// * `balancing-delta`: `β̂ ≤ c · log(2/δ) · ‖(1,…,1)‖`, the norm of the
///   unweighted sum of n independent K-points, estimated by Monte Carlo;
/// * `balancing-dimensional`: `β̂ ≤ c · log(2/δ) · ϱ² · n · M̂(K)` when K
///   carries a subgaussian constant, else
///   `β̂ ≤ c · log(2/δ) · L_K · n^{5/4} · M̂(K)`.
///
/// β̂ uses the exhaustive rule up to n = 20 and the greedy rule above.
pub fn check_barany_grinberg(
    k: &BodySpec,
    delta: f64,
    n_tuples: usize,
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<BoundReport>> {
    let n = k.dim();
    let rule = if n <= 20 { SignRule::BruteForce } else { SignRule::Greedy };
    let beta = estimate_beta_r(k, k, n, delta, n_tuples, rule, stream.child_from_key("beta"))?;
    let lhs = beta.r_estimate();
    let log_factor = (2.0 / delta).ln();

    let ones = WeightVector::new(vec![1.0; n])?;
    let ones_norm = estimate_norm(
        &BodyTuple::Common(k.clone()),
        &ones,
        k,
        n_samples,
        stream.child_from_key("ones-norm"),
    )?;
    let delta_report = BoundReport::evaluate(
        "balancing-delta",
        k,
        k,
        n,
        "ones",
        Direction::Upper,
        lhs,
        ones_norm.scaled(log_factor),
        DELTA_BOUND_THRESHOLD,
        stream.seed(),
    );

    let m_hat = estimate_m(k, n_samples, stream.child_from_key("M"));
    let nf = n as f64;
    let dim_factor = match k.meta().psi2 {
        Some(rho) => log_factor * rho.value * rho.value * nf,
        None => log_factor * k.isotropic_constant()? * nf.powf(1.25),
    };
    let dim_report = BoundReport::evaluate(
        "balancing-dimensional",
        k,
        k,
        n,
        "ones",
        Direction::Upper,
        lhs,
        m_hat.scaled(dim_factor),
        DIMENSIONAL_BOUND_THRESHOLD,
        stream.seed(),
    );
    Ok(vec![delta_report, dim_report])
}

/// Which spectral quantity caps the sign-set exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Lower experiment: exponent `min{q*, d̂(K)}`, bad means some sign
    /// vector in S drops below a tenth of the rotation-averaged level.
    LowerD,
    /// Upper experiment: exponent `min{q*, k̂(K)}`, bad means some sign
    /// vector in S exceeds ten times the level.
    UpperK,
}

impl RotationMode {
    pub fn name(self) -> &'static str {
        match self {
            RotationMode::LowerD => "lower-d",
            RotationMode::UpperK => "upper-k",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "lower" | "lower-d" => Ok(RotationMode::LowerD),
            "upper" | "upper-k" => Ok(RotationMode::UpperK),
            other => Err(Error::parse(format!(
                "unknown rotation experiment `{other}` (expected lower or upper)"
            ))),
        }
    }
}

/// Sign-set size never exceeds this, whatever the exponent allows.
pub const SIGN_SET_HARD_CAP: usize = 1 << 20;
/// Bad-event factors below/above the rotation-averaged level.
pub const LOWER_BAD_FACTOR: f64 = 0.1;
pub const UPPER_BAD_FACTOR: f64 = 10.0;

/// Per-rotation outcome of the experiment.
#[derive(Clone, Debug, Serialize)]
pub struct RotationOutcome {
    pub rotation: usize,
    /// `E ‖Σ t_j U(x_j)‖_K` for this rotation U.
    pub norm: Estimate,
    /// `norm / level`.
    pub ratio: f64,
    /// Fraction of tuples where some sign vector in S crossed the bad
    /// threshold for the chosen mode.
    pub bad_fraction: f64,
}

/// Aggregate result of the random-rotation experiment.
#[derive(Clone, Debug, Serialize)]
pub struct RotationReport {
    pub body_c: String,
    pub body_k: String,
    pub n: usize,
    pub s: usize,
    pub mode: RotationMode,
    /// `√n`, or `n/ϱ²` when the sampling body carries a subgaussian
    /// constant: the guaranteed stand-in for the moment growth exponent.
    pub base_exponent: f64,
    /// `d̂(K)` (lower mode) or `k̂(K)` (upper mode).
    pub body_exponent: f64,
    /// `min{base, body}`: the exponent that caps the sign-set size.
    pub exponent: f64,
    pub set_size_requested: usize,
    /// `min{requested, ⌊e^exponent⌋, 2^20}`.
    pub set_size: usize,
    pub set_capped: bool,
    /// Reference level `L_C · √n · M̂(K) · ‖t‖₂`.
    pub level: f64,
    pub level_stderr: f64,
    pub outcomes: Vec<RotationOutcome>,
    /// Mean of the per-rotation `norm / level` ratios.
    pub avg_ratio: f64,
    pub n_rotations: usize,
    pub n_samples: u64,
    pub n_tuples: usize,
    pub seed: u64,
}

/// Rotate the sampling body by Haar rotations and watch the norm and the
/// balancing bad-event frequency.
///
/// For each of `n_rotations` Haar rotations U the experiment estimates
/// `E ‖Σ_j t_j U(x_j)‖_K` with `n_samples` draws and, over `n_tuples`
/// fresh tuples, the fraction where some sign vector in the random set S
/// crosses the mode's bad threshold. The exponent uses guaranteed
/// stand-ins for the unknowable absolute constants, so the e^{−exponent}
/// failure rates are indicative, not certified; the report carries raw
/// fractions only.
#[allow(clippy::too_many_arguments)]
pub fn run_rotation_experiment(
    c: &BodySpec,
    k: &BodySpec,
    t: &WeightVector,
    mode: RotationMode,
    set_size: usize,
    n_rotations: usize,
    n_samples: u64,
    n_tuples: usize,
    stream: RngStream,
) -> Result<RotationReport> {
    if c.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), got: k.dim() });
    }
    if c.rotation().is_some() {
        return Err(Error::arg(
            "the rotation experiment applies its own rotations; pass an unrotated sampling body",
        ));
    }
    if set_size == 0 || n_rotations == 0 || n_tuples == 0 {
        return Err(Error::arg("set size, rotation count and tuple count must be at least 1"));
    }
    let n = c.dim();
    let s = t.len();
    let nf = n as f64;

    let base_exponent = match c.meta().psi2 {
        Some(rho) => nf / (rho.value * rho.value),
        None => nf.sqrt(),
    };
    let body_exponent = match mode {
        RotationMode::LowerD => {
            let median =
                estimate_gaussian_median(k, n_samples, stream.child_from_key("median"));
            estimate_d(k, median.value, n_samples, stream.child_from_key("d")).value
        }
        RotationMode::UpperK => estimate_k(k, n_samples, stream.child_from_key("k")).value,
    };
    let exponent = base_exponent.min(body_exponent);
    let by_exponent = if exponent >= (SIGN_SET_HARD_CAP as f64).ln() {
        SIGN_SET_HARD_CAP
    } else {
        exponent.exp().floor() as usize
    };
    let effective = set_size.min(by_exponent).min(SIGN_SET_HARD_CAP).max(1);
    let capped = effective < set_size;

    let mut sign_set: Vec<Vec<f64>> = Vec::with_capacity(effective);
    {
        let mut rng = stream.child_from_key("sign-set").rng();
        for _ in 0..effective {
            let mut eps = vec![0.0f64; s];
            fill_signs(&mut rng, &mut eps);
            sign_set.push(eps);
        }
    }

    let l_c = c.isotropic_constant()?;
    let m_hat = estimate_m(k, n_samples, stream.child_from_key("M"));
    let level = l_c * nf.sqrt() * m_hat.value * t.l2();
    let level_stderr = l_c * nf.sqrt() * m_hat.stderr * t.l2();
    let (lo_cut, hi_cut) = (LOWER_BAD_FACTOR * level, UPPER_BAD_FACTOR * level);

    let outcomes: Result<Vec<RotationOutcome>> = (0..n_rotations as u64)
        .into_par_iter()
        .map(|i| {
            let rot_stream = stream.child_from_key(&format!("rotation/{i}"));
            let u = sample_haar_rotation(n, &mut rot_stream.child_from_key("haar").rng());
            let rotated = c.clone().with_rotation(u)?;
            let norm = estimate_norm(
                &BodyTuple::Common(rotated.clone()),
                t,
                k,
                n_samples,
                rot_stream.child_from_key("norm"),
            )?;

            let mut sampler = BodySampler::new(&rotated);
            let mut rng = rot_stream.child_from_key("tuples").rng();
            let mut scaled = vec![vec![0.0f64; n]; s];
            let mut sum = vec![0.0f64; n];
            let mut bad = 0usize;
            for _ in 0..n_tuples {
                for (j, row) in scaled.iter_mut().enumerate() {
                    sampler.sample_into(&mut rng, row);
                    let tj = t.entries()[j];
                    for v in row.iter_mut() {
                        *v *= tj;
                    }
                }
                let mut is_bad = false;
                for eps in &sign_set {
                    sum.fill(0.0);
                    for (row, &e) in scaled.iter().zip(eps) {
                        for (acc, v) in sum.iter_mut().zip(row) {
                            *acc += e * v;
                        }
                    }
                    let g = k.gauge(&sum);
                    let crossed = match mode {
                        RotationMode::LowerD => g <= lo_cut,
                        RotationMode::UpperK => g >= hi_cut,
                    };
                    if crossed {
                        is_bad = true;
                        break;
                    }
                }
                if is_bad {
                    bad += 1;
                }
            }
            Ok(RotationOutcome {
                rotation: i as usize,
                norm,
                ratio: norm.value / level,
                bad_fraction: bad as f64 / n_tuples as f64,
            })
        })
        .collect();
    let outcomes = outcomes?;
    let avg_ratio = outcomes.iter().map(|o| o.ratio).sum::<f64>() / outcomes.len() as f64;

    Ok(RotationReport {
        body_c: c.descriptor(),
        body_k: k.descriptor(),
        n,
        s,
        mode,
        base_exponent,
        body_exponent,
        exponent,
        set_size_requested: set_size,
        set_size: effective,
        set_capped: capped,
        level,
        level_stderr,
        outcomes,
        avg_ratio,
        n_rotations,
        n_samples,
        n_tuples,
        seed: stream.seed(),
    })
}
