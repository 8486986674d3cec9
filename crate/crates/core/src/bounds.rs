//! Empirical checkers for the known two-sided bounds on the weighted-sum
//! norm.
//!
//! Every checker walks a grid of (sampling body C, gauge body K, dimension
//! n, term count s, weight pattern) points, estimates the left side
//! `E ‖Σ_j t_j x_j‖_K` by Monte Carlo, computes the right side from closed
//! forms plus at most one auxiliary estimate (usually `M̂(K)`), and emits a
//! [`BoundReport`] per inequality side. A report never asserts; callers
//! look at [`Verdict`] and [`BoundReport::margin_sigmas`].
//!
//! Inequalities that only pin the answer up to an absolute constant are
//! checked against an explicit [`Thresholds`] entry: the verdict compares
//! `lhs` against `threshold · rhs`, and the measured `lhs / rhs` ratio is
//! reported as `implied_constant` so that drift across dimensions can be
//! examined with [`implied_constant_drift`].
//!
//! Determinism: every report draws from a stream keyed by checker id, body
//! descriptors, n, s and pattern name, derived from the config seed alone.
//! Reports are therefore reproducible one by one, independent of which
//! other checkers run. Auxiliary estimates (`M̂`, mean gauge values) are
//! cached per body within a checker run and shared across that checker's
//! right-hand sides; their errors enter each margin independently, which
//! slightly overstates the combined sigma and keeps verdicts conservative.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bodies::{BodyFamily, BodySpec, Exponent};
use crate::error::Error;
use crate::functionals::estimate_m;
use crate::norms::{estimate_norm, estimate_norm_moments, q_n_cube};
use crate::sampling::{BodyTuple, Pattern, WeightVector};
use crate::stats::{Estimate, RngStream};
use crate::Result;

/// Which side of the sandwich a report checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `lhs ≤ threshold · rhs` is asserted.
    Upper,
    /// `lhs ≥ threshold · rhs` is asserted.
    Lower,
}

/// Outcome of a single bound check at the 3-sigma level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The inequality holds as estimated (margin ≥ 0).
    Holds,
    /// The estimate landed on the wrong side but within 3 combined sigma.
    Inconclusive,
    /// Wrong side by more than 3 combined sigma.
    Violated,
}

/// One checked inequality instance.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// Stable id of the inequality side, e.g. `sandwich-upper`.
    pub theorem_id: String,
    /// Descriptor of the sampling body (all tuple slots in the default grids).
    pub body_c: String,
    /// Descriptor of the gauge body.
    pub body_k: String,
    pub n: usize,
    pub s: usize,
    /// Weight pattern name, or a literal tag for fixed vectors.
    pub t_pattern: String,
    pub direction: Direction,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// The constant the check allows in front of `rhs`.
    pub threshold: f64,
    /// Measured `lhs / rhs`, the constant that would make the bound tight.
    pub implied_constant: f64,
    /// Signed distance from the `threshold · rhs` cut in combined-sigma
    /// units; positive means the inequality holds with room to spare.
    pub margin_sigmas: f64,
    pub verdict: Verdict,
    pub seed: u64,
}

impl BoundReport {
    /// Compare `lhs` against `threshold · rhs` and classify.
    ///
    /// The combined sigma is `hypot(lhs.stderr, threshold · rhs.stderr)`;
    /// exact right sides contribute zero. Margins are clamped to ±1e15 so
    /// exact-vs-exact comparisons stay finite.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        theorem_id: impl Into<String>,
        body_c: &BodySpec,
        body_k: &BodySpec,
        s: usize,
        t_pattern: impl Into<String>,
        direction: Direction,
        lhs: Estimate,
        rhs: Estimate,
        threshold: f64,
        seed: u64,
    ) -> Self {
        let sigma = (lhs.stderr.powi(2) + (threshold * rhs.stderr).powi(2)).sqrt();
        let gap = match direction {
            Direction::Upper => threshold * rhs.value - lhs.value,
            Direction::Lower => lhs.value - threshold * rhs.value,
        };
        let margin_sigmas = (gap / sigma.max(1e-300)).clamp(-1e15, 1e15);
        let verdict = if margin_sigmas >= 0.0 {
            Verdict::Holds
        } else if margin_sigmas > -3.0 {
            Verdict::Inconclusive
        } else {
            Verdict::Violated
        };
        BoundReport {
            theorem_id: theorem_id.into(),
            body_c: body_c.descriptor(),
            body_k: body_k.descriptor(),
            n: body_k.dim(),
            s,
            t_pattern: t_pattern.into(),
            direction,
            lhs,
            rhs,
            threshold,
            implied_constant: lhs.value / rhs.value,
            margin_sigmas,
            verdict,
            seed,
        }
    }
}

/// Allowed constants for the bounds that only hold up to an absolute
/// constant. Upper entries are the largest tolerated `lhs / rhs`; lower
/// entries the smallest. Exact constants (the `√n` sandwich upper, the
/// `n/(e(n+1))` lower) are not configurable and always use 1.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds {
    pub sandwich_upper: f64,
    pub sandwich_lower: f64,
    pub general_upper: f64,
    pub subgaussian_upper: f64,
    pub two_convex_upper: f64,
    pub cotype_lower: f64,
    pub cotype_upper: f64,
    pub type_lower: f64,
    pub type_upper: f64,
    pub unconditional_upper: f64,
    pub e1_lower: f64,
    pub e1_upper: f64,
    pub cube_qn_lower: f64,
    pub cube_qn_upper: f64,
    pub khinchine: f64,
    pub lp_diagonal: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sandwich_upper: 1.0,
            sandwich_lower: 0.1,
            general_upper: 10.0,
            subgaussian_upper: 5.0,
            two_convex_upper: 5.0,
            cotype_lower: 0.1,
            cotype_upper: 5.0,
            type_lower: 0.1,
            type_upper: 5.0,
            unconditional_upper: 10.0,
            e1_lower: 0.1,
            e1_upper: 10.0,
            cube_qn_lower: 0.1,
            cube_qn_upper: 10.0,
            khinchine: 3.0,
            lp_diagonal: 3.0,
        }
    }
}

/// A term count in a grid: either a fixed `s` or "match the dimension".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermCount {
    Fixed(usize),
    MatchDim,
}

// Serialized in the grid-file grammar (`"16"` or `"n"`) so embedded configs
// replay as-is.
impl Serialize for TermCount {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl TermCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            TermCount::Fixed(s) => s,
            TermCount::MatchDim => n,
        }
    }

    /// Parse `"n"` or a positive integer.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "n" {
            return Ok(TermCount::MatchDim);
        }
        let s: usize = text
            .parse()
            .map_err(|_| Error::parse(format!("term count must be `n` or a positive integer, got `{text}`")))?;
        if s == 0 {
            return Err(Error::parse("term count must be at least 1"));
        }
        Ok(TermCount::Fixed(s))
    }
}

impl std::fmt::Display for TermCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TermCount::Fixed(s) => write!(f, "{s}"),
            TermCount::MatchDim => write!(f, "n"),
        }
    }
}

/// Grid over which the checkers run.
///
/// Bodies are instantiated at volume one in each listed dimension. Some
/// checkers use fixed sub-grids where the inequality dictates the shape
/// (diagonal families, doubling ladders); those are documented on the
/// checker and ignore the fields that do not apply.
#[derive(Clone, Debug, Serialize)]
pub struct GridConfig {
    pub n_list: Vec<usize>,
    pub s_list: Vec<TermCount>,
    pub bodies: Vec<BodyFamily>,
    pub patterns: Vec<Pattern>,
    pub n_samples: u64,
    pub seed: u64,
    pub thresholds: Thresholds,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_list: vec![4, 8, 16, 32],
            s_list: vec![
                TermCount::Fixed(1),
                TermCount::Fixed(4),
                TermCount::Fixed(16),
                TermCount::MatchDim,
            ],
            bodies: vec![
                BodyFamily::EuclideanBall,
                BodyFamily::Cube,
                BodyFamily::CrossPolytope,
                BodyFamily::LpBall(Exponent::Finite(4.0)),
            ],
            patterns: Pattern::ALL.to_vec(),
            n_samples: 100_000,
            seed: 42,
            thresholds: Thresholds::default(),
        }
    }
}

impl GridConfig {
    fn root(&self) -> RngStream {
        RngStream::new(self.seed)
    }

    /// Resolved term counts for dimension `n`, deduplicated in list order.
    pub fn term_counts(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for tc in &self.s_list {
            let s = tc.resolve(n);
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Weight vector for a pattern. Random patterns depend only on the
    /// config seed, the pattern and `s`, so every checker that asks for
    /// the same pattern at the same size sees the same vector.
    pub fn pattern_weights(&self, pattern: Pattern, s: usize) -> Result<WeightVector> {
        let stream = self.root().child_from_key(&format!("pattern/{pattern}/{s}"));
        WeightVector::from_pattern(pattern, s, stream)
    }

    /// Volume-one body of the given family in dimension `n`.
    pub fn body_at(&self, family: BodyFamily, n: usize) -> Result<BodySpec> {
        Ok(BodySpec::from_family(family, n)?.normalized())
    }
}

/// Checker names accepted by [`run_checker`], in default suite order.
pub const CHECKER_NAMES: [&str; 11] = [
    "lower-l2",
    "sandwich",
    "upper-general",
    "upper-subgaussian",
    "upper-2convex",
    "cotype",
    "type",
    "unconditional",
    "cube-qn",
    "khinchine",
    "lp-diagonal",
];

/// Run one named checker.
pub fn run_checker(name: &str, cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    match name {
        "lower-l2" => check_lower_l2(cfg),
        "sandwich" => check_sandwich(cfg),
        "upper-general" => check_upper_general(cfg),
        "upper-subgaussian" => check_upper_subgaussian(cfg),
        "upper-2convex" => check_upper_2convex(cfg),
        "cotype" => check_cotype(cfg),
        "type" => check_type(cfg),
        "unconditional" => check_unconditional(cfg),
        "cube-qn" => check_cube_qn(cfg),
        "khinchine" => check_khinchine(cfg),
        "lp-diagonal" => check_lp_diagonal(cfg),
        other => Err(Error::arg(format!(
            "unknown checker `{other}`; available: {}",
            CHECKER_NAMES.join(", ")
        ))),
    }
}

/// Aggregated result of a suite run.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub reports: Vec<BoundReport>,
    pub holds: usize,
    pub inconclusive: usize,
    pub violated: usize,
}

impl SuiteReport {
    pub fn from_reports(reports: Vec<BoundReport>) -> Self {
        let mut holds = 0;
        let mut inconclusive = 0;
        let mut violated = 0;
        for r in &reports {
            match r.verdict {
                Verdict::Holds => holds += 1,
                Verdict::Inconclusive => inconclusive += 1,
                Verdict::Violated => violated += 1,
            }
        }
        SuiteReport { reports, holds, inconclusive, violated }
    }
}

/// Run the named checkers (all of them when `names` is empty) and pool
/// their reports.
pub fn run_suite(cfg: &GridConfig, names: &[&str]) -> Result<SuiteReport> {
    let selected: Vec<&str> = if names.is_empty() {
        CHECKER_NAMES.to_vec()
    } else {
        names.to_vec()
    };
    let mut reports = Vec::new();
    for name in selected {
        reports.extend(run_checker(name, cfg)?);
    }
    Ok(SuiteReport::from_reports(reports))
}

/// One grid point of the (C, K) pair walk.
struct PairPoint {
    c: BodySpec,
    k: BodySpec,
    n: usize,
    s: usize,
    pattern: Pattern,
    t: WeightVector,
    stream: RngStream,
}

/// Walk the full (n, s, pattern, C, K) grid, handing each point its own
/// report stream keyed under `checker`.
fn for_each_pair_point<F>(cfg: &GridConfig, checker: &str, mut f: F) -> Result<()>
where
    F: FnMut(PairPoint) -> Result<()>,
{
    let root = cfg.root();
    for &n in &cfg.n_list {
        for s in cfg.term_counts(n) {
            for &pattern in &cfg.patterns {
                let t = cfg.pattern_weights(pattern, s)?;
                for &cf in &cfg.bodies {
                    let c = cfg.body_at(cf, n)?;
                    for &kf in &cfg.bodies {
                        let k = cfg.body_at(kf, n)?;
                        let stream = root.child_from_key(&format!(
                            "{checker}/{}/{}/{n}/{s}/{pattern}",
                            c.descriptor(),
                            k.descriptor()
                        ));
                        f(PairPoint { c: c.clone(), k, n, s, pattern, t: t.clone(), stream })?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn norm_lhs(p: &PairPoint, n_samples: u64) -> Result<Estimate> {
    estimate_norm(&BodyTuple::Common(p.c.clone()), &p.t, &p.k, n_samples, p.stream)
}

/// Cache of `M̂(K)` estimates, one per body descriptor, with streams keyed
/// under the owning checker so the cache never couples checkers.
struct MCache {
    map: HashMap<String, Estimate>,
    n_samples: u64,
    root: RngStream,
    checker: &'static str,
}

impl MCache {
    fn new(cfg: &GridConfig, checker: &'static str) -> Self {
        MCache { map: HashMap::new(), n_samples: cfg.n_samples, root: cfg.root(), checker }
    }

    fn get(&mut self, k: &BodySpec) -> Estimate {
        let key = k.descriptor();
        if let Some(e) = self.map.get(&key) {
            return *e;
        }
        let stream = self.root.child_from_key(&format!("{}/M/{key}", self.checker));
        let est = estimate_m(k, self.n_samples, stream);
        self.map.insert(key, est);
        est
    }
}

/// Volume correction `vol(K)^{-1/n}`; exactly 1 for normalized bodies.
fn inv_vrad_power(k: &BodySpec) -> f64 {
    (-k.log_volume() / k.dim() as f64).exp()
}

/// Lower bound from the volume of the gauge body alone:
/// `lhs ≥ n/(e(n+1)) · vol(K)^{-1/n} · ‖t‖₂` with the constant exact.
fn check_lower_l2(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for_each_pair_point(cfg, "lower-l2", |p| {
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let nn = p.n as f64;
        let rhs = Estimate::exact(
            nn / (std::f64::consts::E * (nn + 1.0)) * inv_vrad_power(&p.k) * p.t.l2(),
        );
        out.push(BoundReport::evaluate(
            "lower-l2",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Lower,
            lhs,
            rhs,
            1.0,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Two-sided bound through the polar circumradius `b(K)`:
/// `c₁·L_C·b(K)·‖t‖₂ ≤ lhs ≤ √n·L_C·b(K)·‖t‖₂`, upper constant exactly 1.
/// Both sides reuse one left-side estimate per grid point.
fn check_sandwich(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for_each_pair_point(cfg, "sandwich", |p| {
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let base = p.c.isotropic_constant()? * p.k.polar_radius() * p.t.l2();
        out.push(BoundReport::evaluate(
            "sandwich-upper",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            Estimate::exact((p.n as f64).sqrt() * base),
            cfg.thresholds.sandwich_upper,
            cfg.seed,
        ));
        out.push(BoundReport::evaluate(
            "sandwich-lower",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Lower,
            lhs,
            Estimate::exact(base),
            cfg.thresholds.sandwich_lower,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Upper bound with the dimension/term-count tradeoff:
/// `lhs ≤ c · L_C · max{n^{1/4}, √log(1+s)} · √n · M(K) · ‖t‖₂`.
fn check_upper_general(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut cache = MCache::new(cfg, "upper-general");
    let mut out = Vec::new();
    for_each_pair_point(cfg, "upper-general", |p| {
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let nn = p.n as f64;
        let tradeoff = nn.powf(0.25).max((1.0 + p.s as f64).ln().sqrt());
        let factor = p.c.isotropic_constant()? * tradeoff * nn.sqrt() * p.t.l2();
        let rhs = cache.get(&p.k).scaled(factor);
        out.push(BoundReport::evaluate(
            "upper-general",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            rhs,
            cfg.thresholds.general_upper,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Upper bound for subgaussian sampling bodies:
/// `lhs ≤ c · ϱ² · √n · M(K) · ‖t‖₂` with no isotropic-constant factor.
/// Pairs whose C carries no ϱ are skipped.
fn check_upper_subgaussian(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut cache = MCache::new(cfg, "upper-subgaussian");
    let mut out = Vec::new();
    for_each_pair_point(cfg, "upper-subgaussian", |p| {
        let Some(rho) = p.c.meta().psi2 else { return Ok(()) };
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let factor = rho.value.powi(2) * (p.n as f64).sqrt() * p.t.l2();
        let rhs = cache.get(&p.k).scaled(factor);
        out.push(BoundReport::evaluate(
            "upper-subgaussian",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            rhs,
            cfg.thresholds.subgaussian_upper,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// ℓp exponents used by the 2-convex checker; α = p − 1 on this range.
const TWO_CONVEX_EXPONENTS: [f64; 3] = [1.25, 1.5, 2.0];

/// Upper bounds for 2-convex gauge bodies, on a fixed K sub-grid of ℓp
/// balls with 1 < p ≤ 2, diagonal term count:
/// scaled form `lhs ≤ c · L_C/√α · ‖t‖₂` with C the cube, and diagonal
/// form `lhs ≤ c/α · ‖t‖₂` with C = K.
fn check_upper_2convex(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let root = cfg.root();
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        let s = n;
        for &pattern in &cfg.patterns {
            let t = cfg.pattern_weights(pattern, s)?;
            for &pk in &TWO_CONVEX_EXPONENTS {
                let k = cfg.body_at(BodyFamily::LpBall(Exponent::Finite(pk)), n)?;
                let alpha = k
                    .meta()
                    .two_convex_alpha
                    .ok_or_else(|| Error::state(format!("ℓ{pk} ball carries no 2-convexity modulus")))?
                    .value;
                let c = cfg.body_at(BodyFamily::Cube, n)?;
                let stream = root.child_from_key(&format!(
                    "upper-2convex/{}/{}/{n}/{s}/{pattern}",
                    c.descriptor(),
                    k.descriptor()
                ));
                let lhs = estimate_norm(&BodyTuple::Common(c.clone()), &t, &k, cfg.n_samples, stream)?;
                let rhs = Estimate::exact(c.isotropic_constant()? / alpha.sqrt() * t.l2());
                out.push(BoundReport::evaluate(
                    "upper-2convex",
                    &c,
                    &k,
                    s,
                    pattern.name(),
                    Direction::Upper,
                    lhs,
                    rhs,
                    cfg.thresholds.two_convex_upper,
                    cfg.seed,
                ));

                let stream = root.child_from_key(&format!(
                    "upper-2convex-diagonal/{}/{}/{n}/{s}/{pattern}",
                    k.descriptor(),
                    k.descriptor()
                ));
                let lhs = estimate_norm(&BodyTuple::Common(k.clone()), &t, &k, cfg.n_samples, stream)?;
                let rhs = Estimate::exact(t.l2() / alpha);
                out.push(BoundReport::evaluate(
                    "upper-2convex-diagonal",
                    &k,
                    &k,
                    s,
                    pattern.name(),
                    Direction::Upper,
                    lhs,
                    rhs,
                    cfg.thresholds.two_convex_upper,
                    cfg.seed,
                ));
            }
        }
    }
    Ok(out)
}

/// Two-sided bound through the cotype-2 constant of the gauge norm:
/// `c₁/C₂ · vol(K)^{-1/n} · ‖t‖₂ ≤ lhs ≤ c₂ · L_C · C₂ · √n · M(K) · ‖t‖₂`.
/// Pairs whose K carries no cotype-2 constant are skipped.
fn check_cotype(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut cache = MCache::new(cfg, "cotype");
    let mut out = Vec::new();
    for_each_pair_point(cfg, "cotype", |p| {
        let Some(c2) = p.k.meta().cotype2 else { return Ok(()) };
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let nn = p.n as f64;
        out.push(BoundReport::evaluate(
            "cotype-lower",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Lower,
            lhs,
            Estimate::exact(inv_vrad_power(&p.k) * p.t.l2() / c2.value),
            cfg.thresholds.cotype_lower,
            cfg.seed,
        ));
        let factor = p.c.isotropic_constant()? * c2.value * nn.sqrt() * p.t.l2();
        out.push(BoundReport::evaluate(
            "cotype-upper",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            cache.get(&p.k).scaled(factor),
            cfg.thresholds.cotype_upper,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Cache of mean gauge values `E_C ‖x‖_K` for the type-2 upper bound.
/// When C = K at volume one the value is the exact moment identity
/// `n/(n+1)`; otherwise it is a one-term norm estimate.
struct MeanGaugeCache {
    map: HashMap<String, Estimate>,
    n_samples: u64,
    root: RngStream,
}

impl MeanGaugeCache {
    fn get(&mut self, c: &BodySpec, k: &BodySpec) -> Result<Estimate> {
        let key = format!("{}|{}", c.descriptor(), k.descriptor());
        if let Some(e) = self.map.get(&key) {
            return Ok(*e);
        }
        let est = if c.descriptor() == k.descriptor() && k.is_normalized() {
            let n = k.dim() as f64;
            Estimate::exact(n / (n + 1.0))
        } else {
            let t = WeightVector::new(vec![1.0])?;
            let stream = self.root.child_from_key(&format!("type/mean-gauge/{key}"));
            estimate_norm(&BodyTuple::Common(c.clone()), &t, k, self.n_samples, stream)?
        };
        self.map.insert(key, est);
        Ok(est)
    }
}

/// Two-sided bound through the type-2 constant of the gauge norm:
/// `c₁ · L_C · √n · M(K)/T₂ · ‖t‖₂ ≤ lhs ≤ c₂ · T₂ · E_C‖x‖_K · ‖t‖₂`.
/// Pairs whose K carries no type-2 constant are skipped.
fn check_type(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut m_cache = MCache::new(cfg, "type");
    let mut gauge_cache =
        MeanGaugeCache { map: HashMap::new(), n_samples: cfg.n_samples, root: cfg.root() };
    let mut out = Vec::new();
    for_each_pair_point(cfg, "type", |p| {
        let Some(t2) = p.k.meta().type2 else { return Ok(()) };
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let nn = p.n as f64;
        let lower_factor = p.c.isotropic_constant()? * nn.sqrt() * p.t.l2() / t2.value;
        out.push(BoundReport::evaluate(
            "type-lower",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Lower,
            lhs,
            m_cache.get(&p.k).scaled(lower_factor),
            cfg.thresholds.type_lower,
            cfg.seed,
        ));
        let mean_gauge = gauge_cache.get(&p.c, &p.k)?;
        out.push(BoundReport::evaluate(
            "type-upper",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            mean_gauge.scaled(t2.value * p.t.l2()),
            cfg.thresholds.type_upper,
            cfg.seed,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Dimensions for the one-term logarithmic lower-bound example.
const E1_DIMS: [usize; 2] = [16, 64];

/// Upper bound for unconditional bodies,
/// `lhs ≤ c · √log n · max{‖t‖₂, √log n · ‖t‖∞}`, plus the matching
/// example showing the log factor is real: C the cross-polytope, K the
/// cube, single unit weight, where `lhs ≍ log n`.
fn check_unconditional(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for_each_pair_point(cfg, "unconditional", |p| {
        if !(p.c.meta().unconditional && p.k.meta().unconditional) || p.n < 2 {
            return Ok(());
        }
        let lhs = norm_lhs(&p, cfg.n_samples)?;
        let ln_n = (p.n as f64).ln();
        let rhs = Estimate::exact(ln_n.sqrt() * p.t.l2().max(ln_n.sqrt() * p.t.linf()));
        out.push(BoundReport::evaluate(
            "unconditional-upper",
            &p.c,
            &p.k,
            p.s,
            p.pattern.name(),
            Direction::Upper,
            lhs,
            rhs,
            cfg.thresholds.unconditional_upper,
            cfg.seed,
        ));
        Ok(())
    })?;

    let root = cfg.root();
    for &n in &E1_DIMS {
        let c = cfg.body_at(BodyFamily::CrossPolytope, n)?;
        let k = cfg.body_at(BodyFamily::Cube, n)?;
        let t = WeightVector::new(vec![1.0])?;
        let stream = root.child_from_key(&format!(
            "unconditional-e1/{}/{}/{n}/1/e1",
            c.descriptor(),
            k.descriptor()
        ));
        let lhs = estimate_norm(&BodyTuple::Common(c.clone()), &t, &k, cfg.n_samples, stream)?;
        let rhs = Estimate::exact((n as f64).ln());
        out.push(BoundReport::evaluate(
            "unconditional-e1-lower",
            &c,
            &k,
            1,
            "e1",
            Direction::Lower,
            lhs,
            rhs,
            cfg.thresholds.e1_lower,
            cfg.seed,
        ));
        out.push(BoundReport::evaluate(
            "unconditional-e1-upper",
            &c,
            &k,
            1,
            "e1",
            Direction::Upper,
            lhs,
            rhs,
            cfg.thresholds.e1_upper,
            cfg.seed,
        ));
    }
    Ok(out)
}

/// Diagonal cube norm against its closed-form equivalent `q_n(t)`,
/// checked as a two-sided ratio window. Runs at s = n on the cube only.
fn check_cube_qn(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let root = cfg.root();
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        let s = n;
        let k = cfg.body_at(BodyFamily::Cube, n)?;
        for &pattern in &cfg.patterns {
            let t = cfg.pattern_weights(pattern, s)?;
            let stream = root.child_from_key(&format!(
                "cube-qn/{}/{}/{n}/{s}/{pattern}",
                k.descriptor(),
                k.descriptor()
            ));
            let lhs = estimate_norm(&BodyTuple::Common(k.clone()), &t, &k, cfg.n_samples, stream)?;
            let rhs = Estimate::exact(q_n_cube(&t, n));
            out.push(BoundReport::evaluate(
                "cube-qn-lower",
                &k,
                &k,
                s,
                pattern.name(),
                Direction::Lower,
                lhs,
                rhs,
                cfg.thresholds.cube_qn_lower,
                cfg.seed,
            ));
            out.push(BoundReport::evaluate(
                "cube-qn-upper",
                &k,
                &k,
                s,
                pattern.name(),
                Direction::Upper,
                lhs,
                rhs,
                cfg.thresholds.cube_qn_upper,
                cfg.seed,
            ));
        }
    }
    Ok(out)
}

/// Moment orders checked against the first moment.
const KHINCHINE_ORDERS: [f64; 3] = [2.0, 4.0, 8.0];

/// Moment growth of the norm: `(E ‖·‖^q)^{1/q} ≤ c · q · E ‖·‖`.
/// Runs the diagonal pair C = K for cube and ball at n = s = 8, flat
/// weights, all moments from one shared sample set.
fn check_khinchine(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let root = cfg.root();
    let n = 8;
    let s = 8;
    let mut out = Vec::new();
    for family in [BodyFamily::Cube, BodyFamily::EuclideanBall] {
        let b = cfg.body_at(family, n)?;
        let t = cfg.pattern_weights(Pattern::Flat, s)?;
        let stream = root.child_from_key(&format!(
            "khinchine/{}/{}/{n}/{s}/flat",
            b.descriptor(),
            b.descriptor()
        ));
        let mut qs = vec![1.0];
        qs.extend_from_slice(&KHINCHINE_ORDERS);
        let moments =
            estimate_norm_moments(&BodyTuple::Common(b.clone()), &t, &b, &qs, cfg.n_samples, stream)?;
        let m1 = moments[0];
        for (q, mq) in KHINCHINE_ORDERS.iter().zip(&moments[1..]) {
            out.push(BoundReport::evaluate(
                format!("khinchine-q{}", *q as u64),
                &b,
                &b,
                s,
                Pattern::Flat.name(),
                Direction::Upper,
                *mq,
                m1.scaled(*q),
                cfg.thresholds.khinchine,
                cfg.seed,
            ));
        }
    }
    Ok(out)
}

/// Exponents and dimension ladder for the diagonal ℓp family.
const LP_DIAGONAL_EXPONENTS: [Exponent; 4] = [
    Exponent::Finite(1.5),
    Exponent::Finite(2.0),
    Exponent::Finite(4.0),
    Exponent::Infinity,
];
const LP_DIAGONAL_DIMS: [usize; 4] = [8, 16, 32, 64];

/// Diagonal ℓp bounds on a doubling ladder, flat weights, s = n:
/// `lhs ≤ c · ‖t‖₂` for p ≤ 2 and `lhs ≤ c · min{√p, √log n} · ‖t‖₂`
/// for p > 2. The ladder feeds [`implied_constant_drift`].
fn check_lp_diagonal(cfg: &GridConfig) -> Result<Vec<BoundReport>> {
    let root = cfg.root();
    let mut out = Vec::new();
    for &p in &LP_DIAGONAL_EXPONENTS {
        for &n in &LP_DIAGONAL_DIMS {
            let k = cfg.body_at(BodyFamily::LpBall(p), n)?;
            let t = cfg.pattern_weights(Pattern::Flat, n)?;
            let stream = root.child_from_key(&format!(
                "lp-diagonal/{}/{}/{n}/{n}/flat",
                k.descriptor(),
                k.descriptor()
            ));
            let lhs = estimate_norm(&BodyTuple::Common(k.clone()), &t, &k, cfg.n_samples, stream)?;
            let ln_factor = (n as f64).ln().sqrt();
            let factor = match p {
                Exponent::Finite(q) if q <= 2.0 => 1.0,
                Exponent::Finite(q) => q.sqrt().min(ln_factor),
                Exponent::Infinity => ln_factor,
            };
            let rhs = Estimate::exact(factor * t.l2());
            out.push(BoundReport::evaluate(
                "lp-diagonal",
                &k,
                &k,
                n,
                Pattern::Flat.name(),
                Direction::Upper,
                lhs,
                rhs,
                cfg.thresholds.lp_diagonal,
                cfg.seed,
            ));
        }
    }
    Ok(out)
}

/// Implied-constant drift along dimension ladders.
#[derive(Clone, Debug, Serialize)]
pub struct DriftCheck {
    /// Group key: theorem id, body families, term-count class, pattern.
    pub key: String,
    /// (n, implied constant) pairs, sorted by n.
    pub points: Vec<(usize, f64)>,
    /// Largest ratio between implied constants at consecutive doublings
    /// n and 2n, folded to ≥ 1. Exactly 1 when no doubling pair exists.
    pub max_doubling_ratio: f64,
}

/// Strip dimension and flags from a body descriptor, keeping the family.
fn family_tag(descriptor: &str) -> String {
    let tokens: Vec<&str> = descriptor.split(':').collect();
    if tokens[0] == "lp" && tokens.len() >= 2 {
        format!("lp:{}", tokens[1])
    } else {
        tokens[0].to_string()
    }
}

/// Group reports by everything except the dimension and measure how the
/// implied constant moves when n doubles. A bound is "stable" on a ladder
/// when the max doubling ratio stays below 2.
pub fn implied_constant_drift(reports: &[BoundReport]) -> Vec<DriftCheck> {
    let mut groups: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in reports {
        let s_class = if r.s == r.n { "n".to_string() } else { r.s.to_string() };
        let key = format!(
            "{}|{}|{}|s={}|{}",
            r.theorem_id,
            family_tag(&r.body_c),
            family_tag(&r.body_k),
            s_class,
            r.t_pattern
        );
        groups.entry(key).or_default().push((r.n, r.implied_constant));
    }
    groups
        .into_iter()
        .filter(|(_, points)| points.len() >= 2)
        .map(|(key, mut points)| {
            points.sort_by_key(|&(n, _)| n);
            let mut max_ratio = 1.0f64;
            for w in points.windows(2) {
                if w[1].0 == 2 * w[0].0 && w[0].1 > 0.0 && w[1].1 > 0.0 {
                    let r = w[1].1 / w[0].1;
                    max_ratio = max_ratio.max(r.max(1.0 / r));
                }
            }
            DriftCheck { key, points, max_doubling_ratio: max_ratio }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> GridConfig {
        GridConfig {
            n_list: vec![4],
            s_list: vec![TermCount::Fixed(2)],
            bodies: vec![BodyFamily::EuclideanBall, BodyFamily::Cube],
            patterns: vec![Pattern::Flat],
            n_samples: 2_000,
            seed: 7,
            thresholds: Thresholds::default(),
        }
    }

    #[test]
    fn evaluate_classifies_upper_margins() {
        let c = BodySpec::ball(4).unwrap().normalized();
        let k = c.clone();
        let lhs = Estimate::new(1.0, 0.1, 100);
        let holds = BoundReport::evaluate(
            "x",
            &c,
            &k,
            1,
            "flat",
            Direction::Upper,
            lhs,
            Estimate::exact(2.0),
            1.0,
            0,
        );
        assert_eq!(holds.verdict, Verdict::Holds);
        assert!((holds.margin_sigmas - 10.0).abs() < 1e-12);
        assert!((holds.implied_constant - 0.5).abs() < 1e-12);

        let inconclusive = BoundReport::evaluate(
            "x",
            &c,
            &k,
            1,
            "flat",
            Direction::Upper,
            lhs,
            Estimate::exact(0.9),
            1.0,
            0,
        );
        assert_eq!(inconclusive.verdict, Verdict::Inconclusive);

        let violated = BoundReport::evaluate(
            "x",
            &c,
            &k,
            1,
            "flat",
            Direction::Upper,
            lhs,
            Estimate::exact(0.5),
            1.0,
            0,
        );
        assert_eq!(violated.verdict, Verdict::Violated);
        assert!((violated.margin_sigmas + 5.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_mirrors_lower_direction() {
        let c = BodySpec::cube(4).unwrap().normalized();
        let lhs = Estimate::new(1.0, 0.05, 100);
        let report = BoundReport::evaluate(
            "x",
            &c,
            &c,
            1,
            "flat",
            Direction::Lower,
            lhs,
            Estimate::exact(2.0),
            0.25,
            0,
        );
        // lhs 1.0 vs 0.25·2.0 = 0.5: holds by 10 sigma.
        assert_eq!(report.verdict, Verdict::Holds);
        assert!((report.margin_sigmas - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exact_vs_exact_margin_is_finite() {
        let c = BodySpec::ball(2).unwrap().normalized();
        let report = BoundReport::evaluate(
            "x",
            &c,
            &c,
            1,
            "flat",
            Direction::Upper,
            Estimate::exact(1.0),
            Estimate::exact(1.0),
            1.0,
            0,
        );
        assert_eq!(report.verdict, Verdict::Holds);
        assert!(report.margin_sigmas.is_finite());
    }

    #[test]
    fn term_counts_deduplicate_in_order() {
        let cfg = GridConfig::default();
        assert_eq!(cfg.term_counts(16), vec![1, 4, 16]);
        assert_eq!(cfg.term_counts(32), vec![1, 4, 16, 32]);
        assert_eq!(cfg.term_counts(4), vec![1, 4, 16]);
    }

    #[test]
    fn pattern_weights_are_reproducible() {
        let cfg = tiny_config();
        let a = cfg.pattern_weights(Pattern::RandomUnit, 6).unwrap();
        let b = cfg.pattern_weights(Pattern::RandomUnit, 6).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn unknown_checker_is_rejected() {
        let cfg = tiny_config();
        assert!(run_checker("no-such-checker", &cfg).is_err());
    }

    #[test]
    fn lower_l2_holds_on_tiny_grid() {
        let cfg = tiny_config();
        let reports = run_checker("lower-l2", &cfg).unwrap();
        // 2 bodies × 2 bodies, one (n, s, pattern) point.
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
            assert!(r.margin_sigmas > 3.0);
        }
    }

    #[test]
    fn sandwich_emits_both_sides_and_holds() {
        let cfg = tiny_config();
        let reports = run_checker("sandwich", &cfg).unwrap();
        assert_eq!(reports.len(), 8);
        let uppers = reports.iter().filter(|r| r.direction == Direction::Upper).count();
        assert_eq!(uppers, 4);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
        }
    }

    #[test]
    fn khinchine_constants_stay_small() {
        let cfg = tiny_config();
        let reports = run_checker("khinchine", &cfg).unwrap();
        assert_eq!(reports.len(), 6);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
            assert!(r.implied_constant < 1.0, "moment growth already near linear: {r:?}");
        }
    }

    #[test]
    fn cube_qn_ratio_sits_inside_window() {
        let mut cfg = tiny_config();
        cfg.n_list = vec![8];
        let reports = run_checker("cube-qn", &cfg).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
            assert!(r.implied_constant > 0.1 && r.implied_constant < 10.0);
        }
    }

    #[test]
    fn drift_groups_by_everything_but_dimension() {
        let k8 = BodySpec::cube(8).unwrap().normalized();
        let k16 = BodySpec::cube(16).unwrap().normalized();
        let mk = |k: &BodySpec, s: usize, lhs: f64| {
            BoundReport::evaluate(
                "lp-diagonal",
                k,
                k,
                s,
                "flat",
                Direction::Upper,
                Estimate::exact(lhs),
                Estimate::exact(1.0),
                3.0,
                0,
            )
        };
        let reports = vec![mk(&k8, 8, 0.5), mk(&k16, 16, 0.8)];
        let drift = implied_constant_drift(&reports);
        assert_eq!(drift.len(), 1);
        assert!((drift[0].max_doubling_ratio - 1.6).abs() < 1e-12);
        assert_eq!(drift[0].points, vec![(8, 0.5), (16, 0.8)]);
    }

    #[test]
    fn drift_ignores_non_doubling_gaps() {
        let k8 = BodySpec::cube(8).unwrap().normalized();
        let k24 = BodySpec::cube(24).unwrap().normalized();
        let mk = |k: &BodySpec, s: usize, lhs: f64| {
            BoundReport::evaluate(
                "lp-diagonal",
                k,
                k,
                s,
                "flat",
                Direction::Upper,
                Estimate::exact(lhs),
                Estimate::exact(1.0),
                3.0,
                0,
            )
        };
        let reports = vec![mk(&k8, 8, 0.5), mk(&k24, 24, 5.0)];
        let drift = implied_constant_drift(&reports);
        assert_eq!(drift.len(), 1);
        assert_eq!(drift[0].max_doubling_ratio, 1.0);
    }

    #[test]
    fn family_tag_strips_dimension_and_flags() {
        assert_eq!(family_tag("lp:1.5:16:vol1"), "lp:1.5");
        assert_eq!(family_tag("ball:8:vol1"), "ball");
        assert_eq!(family_tag("cube:4"), "cube");
    }
}
