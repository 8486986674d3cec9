//! Exact samplers for the body family and the weighted-sum pushforward.
//!
//! Uniform points on an `ℓp` ball come from the classical representation
//! `x = λ·U·g / (Σ|g_i|^p + W)^{1/p}` with `g_i` i.i.d. with density
//! `∝ exp(−|u|^p)` and `W` a unit exponential: exact in one shot, no Markov
//! chain, no rejection beyond what the Gamma sampler uses internally. The
//! `p = ∞` case draws coordinates directly.

use crate::bodies::{BodySpec, Exponent, Rotation};
use crate::error::Error;
use crate::stats::RngStream;
use crate::Result;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

/// Draw a uniform point of `body` into `out`.
///
/// Convenience wrapper; loops should build one [`BodySampler`] and reuse it.
pub fn sample_body_into<R: Rng + ?Sized>(body: &BodySpec, rng: &mut R, out: &mut [f64]) {
    BodySampler::new(body).sample_into(rng, out);
}

/// Uniform point on the Euclidean unit sphere.
pub fn sample_sphere_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *o = g;
            norm2 += g * g;
        }
        if norm2 > 0.0 {
            let inv = norm2.sqrt().recip();
            for o in out.iter_mut() {
                *o *= inv;
            }
            return;
        }
    }
}

/// Standard Gaussian vector.
pub fn sample_gaussian_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for o in out.iter_mut() {
        *o = rng.sample(StandardNormal);
    }
}

/// Haar-distributed rotation.
pub fn sample_haar_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Rotation {
    Rotation::haar(dim, rng)
}

/// Fill with independent uniform signs `±1`.
pub fn fill_signs<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for o in out.iter_mut() {
        *o = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    }
}

enum Coordinate {
    /// `p = ∞`: uniform on `[−1, 1]`.
    Uniform,
    /// `p = 1`: signed unit exponential.
    SignedExp,
    /// `p = 2`: centered normal with density `∝ exp(−u²)`.
    ScaledNormal,
    /// General finite `p`: `|g| = Gamma(1/p)^{1/p}` with a random sign.
    SignedGammaRoot { gamma: Gamma<f64>, inv_p: f64 },
}

/// Reusable uniform sampler for one body (holds scratch and the coordinate
/// distribution, so per-draw cost is allocation-free).
pub struct BodySampler<'a> {
    body: &'a BodySpec,
    coord: Coordinate,
    scratch: Vec<f64>,
}

impl<'a> BodySampler<'a> {
    pub fn new(body: &'a BodySpec) -> Self {
        let coord = match body.exponent() {
            Exponent::Infinity => Coordinate::Uniform,
            Exponent::Finite(p) if p == 1.0 => Coordinate::SignedExp,
            Exponent::Finite(p) if p == 2.0 => Coordinate::ScaledNormal,
            Exponent::Finite(p) => Coordinate::SignedGammaRoot {
                gamma: Gamma::new(1.0 / p, 1.0).expect("valid gamma shape"),
                inv_p: 1.0 / p,
            },
        };
        let scratch = match body.rotation() {
            Some(_) => vec![0.0; body.dim()],
            None => Vec::new(),
        };
        BodySampler {
            body,
            coord,
            scratch,
        }
    }

    /// Draw one uniform point into `out` (`out.len()` must equal the body
    /// dimension).
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.body.dim(), "sample buffer has the wrong dimension");
        let scale = self.body.scale();
        match self.body.rotation() {
            None => {
                let factor = scale * self.raw_point(rng, out);
                for o in out.iter_mut() {
                    *o *= factor;
                }
            }
            Some(u) => {
                // Draw in body coordinates, then rotate.
                let mut scratch = std::mem::take(&mut self.scratch);
                let factor = scale * self.raw_point(rng, &mut scratch);
                for c in scratch.iter_mut() {
                    *c *= factor;
                }
                u.apply(&scratch, out);
                self.scratch = scratch;
            }
        }
    }

    /// Fill `out` with the unnormalized coordinate draws and return the
    /// radial factor that maps them onto the unit body.
    fn raw_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        match &self.coord {
            Coordinate::Uniform => {
                for o in out.iter_mut() {
                    *o = 2.0 * rng.gen::<f64>() - 1.0;
                }
                1.0
            }
            Coordinate::SignedExp => {
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    sum += e;
                    *o = if rng.gen::<bool>() { e } else { -e };
                }
                let w: f64 = Exp1.sample(rng);
                (sum + w).recip()
            }
            Coordinate::ScaledNormal => {
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    let g: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
                    sum += g * g;
                    *o = g;
                }
                let w: f64 = Exp1.sample(rng);
                (sum + w).sqrt().recip()
            }
            Coordinate::SignedGammaRoot { gamma, inv_p } => {
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    let w: f64 = gamma.sample(rng);
                    sum += w;
                    let g = w.powf(*inv_p);
                    *o = if rng.gen::<bool>() { g } else { -g };
                }
                let w: f64 = Exp1.sample(rng);
                (sum + w).powf(-inv_p)
            }
        }
    }
}

/// Named weight patterns covering the spiky, flat and intermediate regimes.
/// Serialized as the parseable pattern name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// `(1, 0, …, 0)`.
    E1,
    /// `(1, …, 1)/√s`.
    Flat,
    /// `t_j ∝ 0.7^j`, unit ℓ2 norm.
    Geometric,
    /// Half the ℓ2 mass on the top `⌈√s⌉` coordinates, half on the rest.
    TwoLevel,
    /// Uniform random direction, unit ℓ2 norm.
    RandomUnit,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [
        Pattern::E1,
        Pattern::Flat,
        Pattern::Geometric,
        Pattern::TwoLevel,
        Pattern::RandomUnit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::E1 => "e1",
            Pattern::Flat => "flat",
            Pattern::Geometric => "geometric",
            Pattern::TwoLevel => "twolevel",
            Pattern::RandomUnit => "random",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "e1" => Pattern::E1,
            "flat" | "uniform" => Pattern::Flat,
            "geometric" | "decay" => Pattern::Geometric,
            "twolevel" => Pattern::TwoLevel,
            "random" => Pattern::RandomUnit,
            other => {
                return Err(Error::parse(format!(
                    "unknown weight pattern `{other}` (e1, flat, geometric, twolevel, random)"
                )))
            }
        })
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.name())
    }
}

/// Weight vector `t ∈ ℝˢ` with its cached norms and decreasing rearrangement.
#[derive(Clone, Debug)]
pub struct WeightVector {
    entries: Vec<f64>,
    norm_l2: f64,
    norm_linf: f64,
    decreasing_abs: Vec<f64>,
}

impl WeightVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::arg("weight vector must have at least one entry"));
        }
        if entries.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("weight entries must be finite"));
        }
        let norm_l2 = entries.iter().map(|t| t * t).sum::<f64>().sqrt();
        let norm_linf = entries.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let mut decreasing_abs: Vec<f64> = entries.iter().map(|t| t.abs()).collect();
        decreasing_abs.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
        Ok(WeightVector {
            entries,
            norm_l2,
            norm_linf,
            decreasing_abs,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn l2(&self) -> f64 {
        self.norm_l2
    }

    pub fn linf(&self) -> f64 {
        self.norm_linf
    }

    /// `|t|` sorted in decreasing order.
    pub fn decreasing_abs(&self) -> &[f64] {
        &self.decreasing_abs
    }

    /// Rescaled to unit ℓ2 norm.
    pub fn unit(self) -> Result<Self> {
        if self.norm_l2 == 0.0 {
            return Err(Error::arg("cannot normalize the zero weight vector"));
        }
        let inv = self.norm_l2.recip();
        Self::new(self.entries.into_iter().map(|t| t * inv).collect())
    }

    pub fn from_pattern(pattern: Pattern, s: usize, stream: RngStream) -> Result<Self> {
        if s == 0 {
            return Err(Error::arg("pattern length must be at least 1"));
        }
        let entries: Vec<f64> = match pattern {
            Pattern::E1 => {
                let mut t = vec![0.0; s];
                t[0] = 1.0;
                t
            }
            Pattern::Flat => vec![1.0 / (s as f64).sqrt(); s],
            Pattern::Geometric => {
                let t: Vec<f64> = (0..s).map(|j| 0.7f64.powi(j as i32)).collect();
                return Self::new(t)?.unit();
            }
            Pattern::TwoLevel => {
                let k = ((s as f64).sqrt().round() as usize).clamp(1, s);
                if k == s {
                    vec![1.0 / (s as f64).sqrt(); s]
                } else {
                    let head = (2.0 * k as f64).sqrt().recip();
                    let tail = (2.0 * (s - k) as f64).sqrt().recip();
                    (0..s).map(|j| if j < k { head } else { tail }).collect()
                }
            }
            Pattern::RandomUnit => {
                let mut rng = stream.child_from_key("random-unit-pattern").rng();
                let mut t = vec![0.0; s];
                sample_sphere_into(&mut rng, &mut t);
                t
            }
        };
        Self::new(entries)
    }

    /// Parse a weight specification: either comma-separated reals
    /// (`0.5,0.5,-0.3`) or `pattern:<name>:<s>`. Returns the vector and a
    /// label for reports.
    pub fn parse(spec: &str, stream: RngStream) -> Result<(Self, String)> {
        if let Some(rest) = spec.strip_prefix("pattern:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(Error::parse(format!(
                    "pattern spec `{spec}` must look like pattern:<name>:<s>"
                )));
            }
            let pattern = Pattern::parse(parts[0])?;
            let s: usize = parts[1]
                .parse()
                .map_err(|_| Error::parse(format!("bad pattern length `{}`", parts[1])))?;
            Ok((Self::from_pattern(pattern, s, stream)?, pattern.name().to_string()))
        } else {
            let entries: Vec<f64> = spec
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(format!("bad weight entry `{tok}`")))
                })
                .collect::<Result<_>>()?;
            Ok((Self::new(entries)?, "custom".to_string()))
        }
    }
}

/// The bodies the `s` summands are drawn from: one common body, or one per
/// summand (all of the same dimension).
#[derive(Clone, Debug)]
pub enum BodyTuple {
    Common(BodySpec),
    PerTerm(Vec<BodySpec>),
}

impl BodyTuple {
    pub fn dim(&self) -> usize {
        match self {
            BodyTuple::Common(b) => b.dim(),
            BodyTuple::PerTerm(bs) => bs[0].dim(),
        }
    }

    /// The body of summand `j`.
    pub fn body(&self, j: usize) -> &BodySpec {
        match self {
            BodyTuple::Common(b) => b,
            BodyTuple::PerTerm(bs) => &bs[j],
        }
    }

    pub fn common(&self) -> Option<&BodySpec> {
        match self {
            BodyTuple::Common(b) => Some(b),
            BodyTuple::PerTerm(_) => None,
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            BodyTuple::Common(b) => b.descriptor(),
            BodyTuple::PerTerm(bs) => bs
                .iter()
                .map(|b| b.descriptor())
                .collect::<Vec<_>>()
                .join("+"),
        }
    }

    /// Check compatibility with a weight vector of length `s`.
    pub fn validate(&self, s: usize) -> Result<()> {
        match self {
            BodyTuple::Common(_) => Ok(()),
            BodyTuple::PerTerm(bs) => {
                if bs.is_empty() {
                    return Err(Error::arg("body tuple must not be empty"));
                }
                if bs.len() != s {
                    return Err(Error::DimensionMismatch {
                        expected: s,
                        got: bs.len(),
                    });
                }
                let dim = bs[0].dim();
                for b in bs {
                    if b.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: b.dim(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// The law of `Σ t_j x_j` with `x_j` independent uniform on the tuple bodies,
/// optionally rescaled by `1/(L_C ‖t‖₂)` so the pushforward is isotropic
/// (identity covariance) when the common body is isotropic.
#[derive(Clone, Debug)]
pub struct PushforwardMeasure {
    tuple: BodyTuple,
    weights: WeightVector,
    isotropic_rescale: bool,
    factor: f64,
}

impl PushforwardMeasure {
    pub fn new(tuple: BodyTuple, weights: WeightVector, isotropic_rescale: bool) -> Result<Self> {
        tuple.validate(weights.len())?;
        let factor = if isotropic_rescale {
            let body = tuple.common().ok_or_else(|| {
                Error::arg("isotropic rescaling needs a common body for all summands")
            })?;
            if weights.l2() == 0.0 {
                return Err(Error::arg(
                    "isotropic rescaling of the zero weight vector is undefined",
                ));
            }
            (body.isotropic_constant()? * weights.l2()).recip()
        } else {
            1.0
        };
        Ok(PushforwardMeasure {
            tuple,
            weights,
            isotropic_rescale,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.tuple.dim()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn tuple(&self) -> &BodyTuple {
        &self.tuple
    }

    pub fn is_isotropic_rescaled(&self) -> bool {
        self.isotropic_rescale
    }

    /// Build a reusable sampler (per worker / per chunk).
    pub fn sampler(&self) -> MeasureSampler<'_> {
        let samplers = match &self.tuple {
            BodyTuple::Common(b) => vec![BodySampler::new(b)],
            BodyTuple::PerTerm(bs) => bs.iter().map(BodySampler::new).collect(),
        };
        MeasureSampler {
            measure: self,
            samplers,
            point: vec![0.0; self.dim()],
        }
    }
}

/// Allocation-free sampler for a [`PushforwardMeasure`].
pub struct MeasureSampler<'a> {
    measure: &'a PushforwardMeasure,
    samplers: Vec<BodySampler<'a>>,
    point: Vec<f64>,
}

impl MeasureSampler<'_> {
    /// Draw `Σ t_j x_j` (rescaled if the measure says so) into `out`.
    /// Every call uses fresh draws for all `s` summands.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        out.fill(0.0);
        let common = self.samplers.len() == 1;
        for (j, &t) in self.measure.weights.entries().iter().enumerate() {
            let sampler = if common {
                &mut self.samplers[0]
            } else {
                &mut self.samplers[j]
            };
            sampler.sample_into(rng, &mut self.point);
            for (o, &x) in out.iter_mut().zip(&self.point) {
                *o += t * x;
            }
        }
        if self.measure.factor != 1.0 {
            for o in out.iter_mut() {
                *o *= self.measure.factor;
            }
        }
    }
}

/// Fit the subgaussian tail constant of `|⟨x, ξ⟩|` under the measure:
/// regress `−ln P(|⟨x,ξ⟩| > u)` on `u²` over the resolvable part of the grid
/// `u = 1.0, 1.5, …, 4.0` and return `c` with tail `≈ exp(−u²/c)`.
///
/// Returns `None` when fewer than three grid points have at least ten hits.
pub fn psi2_tail_constant(
    measure: &PushforwardMeasure,
    direction: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Option<f64>> {
    if direction.len() != measure.dim() {
        return Err(Error::DimensionMismatch {
            expected: measure.dim(),
            got: direction.len(),
        });
    }
    let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::arg("tail direction must be nonzero"));
    }
    let dir: Vec<f64> = direction.iter().map(|v| v / norm).collect();
    let dim = measure.dim();
    let values = crate::stats::mc_collect_with(
        stream,
        n_samples,
        || (measure.sampler(), vec![0.0; dim]),
        |(sampler, buf), rng| {
            sampler.sample_into(rng, buf);
            buf.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>().abs()
        },
    );
    let mut points = Vec::new();
    let mut u = 1.0;
    while u <= 4.0 + 1e-9 {
        let hits = values.iter().filter(|&&v| v > u).count();
        if hits >= 10 {
            let p = hits as f64 / n_samples as f64;
            points.push((u * u, -p.ln()));
        }
        u += 0.5;
    }
    if points.len() < 3 {
        return Ok(None);
    }
    // Least-squares slope of −ln p against u².
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    if slope <= 0.0 {
        return Ok(None);
    }
    Ok(Some(slope.recip()))
}
