//! Symmetric convex bodies: scaled, optionally rotated `ℓp` balls.
//!
//! A [`BodySpec`] is `λ · U(B)` where `B` is the unit ball of an `ℓp` norm
//! (`p ∈ [1, ∞]`), `λ > 0` a scale and `U` an optional rotation. Everything
//! that has a closed form for this family (gauge, support function, volume,
//! isotropic constant, circumradius, polar circumradius, volume radius) is
//! computed exactly here; Monte Carlo quantities live in [`crate::functionals`].
//!
//! Volumes are handled in log space throughout, so bodies stay representable
//! far beyond the dimensions where `Γ(1 + n/p)` overflows.

use crate::error::Error;
use crate::stats::RngStream;
use crate::Result;
use serde::Serialize;

pub use crate::mat::Rotation;

/// The exponent of an `ℓp` ball; `∞` is a first-class case, not a limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// `1/p`, with `1/∞ = 0`; exact in every formula that uses it.
    pub fn inv(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The dual exponent `p'` with `1/p + 1/p' = 1`.
    pub fn dual(self) -> Exponent {
        match self {
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
            Exponent::Infinity => Exponent::Finite(1.0),
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(p) if !(p >= 1.0 && p.is_finite()) => Err(Error::arg(format!(
                "ℓp exponent must satisfy 1 ≤ p < ∞ (use Infinity for p = ∞), got {p}"
            ))),
            other => Ok(other),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// Body family. `EuclideanBall`, `Cube` and `CrossPolytope` are the named
/// `p = 2, ∞, 1` cases and behave identically to the equivalent `LpBall`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodyFamily {
    LpBall(Exponent),
    EuclideanBall,
    Cube,
    CrossPolytope,
}

// Serialized as the parseable family tag so embedded configs replay as-is.
impl Serialize for BodyFamily {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.name())
    }
}

impl BodyFamily {
    pub fn exponent(self) -> Exponent {
        match self {
            BodyFamily::LpBall(p) => p,
            BodyFamily::EuclideanBall => Exponent::Finite(2.0),
            BodyFamily::Cube => Exponent::Infinity,
            BodyFamily::CrossPolytope => Exponent::Finite(1.0),
        }
    }

    /// Dimension-free family tag, e.g. `ball` or `lp:1.5`. The first
    /// component(s) of a body descriptor.
    pub fn name(self) -> String {
        match self {
            BodyFamily::LpBall(p) => format!("lp:{p}"),
            BodyFamily::EuclideanBall => "ball".to_string(),
            BodyFamily::Cube => "cube".to_string(),
            BodyFamily::CrossPolytope => "cross".to_string(),
        }
    }

    /// Parse a family tag as produced by [`BodyFamily::name`].
    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "ball" => Ok(BodyFamily::EuclideanBall),
            "cube" => Ok(BodyFamily::Cube),
            "cross" => Ok(BodyFamily::CrossPolytope),
            other => match other.strip_prefix("lp:") {
                Some("inf") => Ok(BodyFamily::LpBall(Exponent::Infinity)),
                Some(num) => {
                    let p: f64 = num
                        .parse()
                        .map_err(|_| Error::parse(format!("bad exponent `{num}`")))?;
                    Ok(BodyFamily::LpBall(Exponent::Finite(p).validate()?))
                }
                None => Err(Error::parse(format!(
                    "unknown body family `{tag}` (expected lp:<p>, ball, cube or cross)"
                ))),
            },
        }
    }
}

/// A literature constant together with where it comes from.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TaggedConstant {
    pub value: f64,
    pub source: &'static str,
}

/// Functional-analytic constants attached to a body. Values are literature
/// bounds recorded with their provenance; they are never computed from
/// samples, and checkers that need an absent constant skip the body.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MetaConstants {
    /// ψ₂ (subgaussian) constant of the uniform measure on the body.
    pub psi2: Option<TaggedConstant>,
    /// 2-convexity modulus α of the norm.
    pub two_convex_alpha: Option<TaggedConstant>,
    /// Cotype-2 constant of the norm.
    pub cotype2: Option<TaggedConstant>,
    /// Type-2 constant of the norm.
    pub type2: Option<TaggedConstant>,
    /// Whether the body is unconditional in the standard coordinates.
    pub unconditional: bool,
}

impl MetaConstants {
    fn for_exponent(p: Exponent, unrotated: bool) -> Self {
        let psi2 = match p {
            Exponent::Infinity => Some(TaggedConstant {
                value: 1.0,
                source: "uniform subgaussian constant of unit-volume ℓq balls, q ≥ 2 \
                         (Barthe–Guédon–Mendelson–Naor)",
            }),
            Exponent::Finite(q) if q >= 2.0 => Some(TaggedConstant {
                value: 1.0,
                source: "uniform subgaussian constant of unit-volume ℓq balls, q ≥ 2 \
                         (Barthe–Guédon–Mendelson–Naor)",
            }),
            _ => None,
        };
        let two_convex_alpha = match p {
            Exponent::Finite(q) if q > 1.0 && q <= 2.0 => Some(TaggedConstant {
                value: q - 1.0,
                source: "2-convexity modulus of L_p, 1 < p ≤ 2 (Ball–Carlen–Lieb)",
            }),
            _ => None,
        };
        let cotype2 = match p {
            Exponent::Finite(q) if q <= 2.0 => Some(TaggedConstant {
                value: if q == 2.0 { 1.0 } else { std::f64::consts::SQRT_2 },
                source: "cotype-2 constant of L_p, 1 ≤ p ≤ 2",
            }),
            _ => None,
        };
        let type2 = match p {
            Exponent::Finite(q) if q >= 2.0 => Some(TaggedConstant {
                value: (q - 1.0).sqrt(),
                source: "type-2 constant of L_q, 2 ≤ q < ∞ (hypercontractive bound)",
            }),
            _ => None,
        };
        MetaConstants {
            psi2,
            two_convex_alpha,
            cotype2,
            type2,
            unconditional: unrotated,
        }
    }
}

/// `ℓp` norm with `∞` handled directly; scale-factored so that arbitrarily
/// large finite `p` cannot overflow.
pub(crate) fn lp_norm(x: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Exponent::Finite(q) if q == 1.0 => x.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(q) if q == 2.0 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(q) => {
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return 0.0;
            }
            let s: f64 = x.iter().map(|v| (v.abs() / m).powf(q)).sum();
            m * s.powf(1.0 / q)
        }
    }
}

/// `ln vol(B₂ⁿ)`.
pub fn log_unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    0.5 * n * std::f64::consts::PI.ln() - libm::lgamma(1.0 + 0.5 * n)
}

/// A scaled, optionally rotated `ℓp` ball.
#[derive(Clone, Debug)]
pub struct BodySpec {
    family: BodyFamily,
    dim: usize,
    scale: f64,
    rotation: Option<Rotation>,
    rotation_seed: Option<u64>,
    meta: MetaConstants,
}

impl BodySpec {
    /// The unit `ℓp` ball in dimension `dim`.
    pub fn lp(p: Exponent, dim: usize) -> Result<Self> {
        Self::from_family(BodyFamily::LpBall(p.validate()?), dim)
    }

    /// The unit Euclidean ball.
    pub fn ball(dim: usize) -> Result<Self> {
        Self::from_family(BodyFamily::EuclideanBall, dim)
    }

    /// The unit `ℓ∞` ball `[−1, 1]ⁿ`; `.normalized()` is the volume-one cube.
    pub fn cube(dim: usize) -> Result<Self> {
        Self::from_family(BodyFamily::Cube, dim)
    }

    /// The unit `ℓ1` ball.
    pub fn cross_polytope(dim: usize) -> Result<Self> {
        Self::from_family(BodyFamily::CrossPolytope, dim)
    }

    /// Unit body (scale 1, no rotation) of the given family.
    pub fn from_family(family: BodyFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("body dimension must be at least 1"));
        }
        Ok(BodySpec {
            family,
            dim,
            scale: 1.0,
            rotation: None,
            rotation_seed: None,
            meta: MetaConstants::for_exponent(family.exponent(), true),
        })
    }

    /// Multiply the scale by `factor`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::arg(format!("scale factor must be positive, got {factor}")));
        }
        self.scale *= factor;
        Ok(self)
    }

    /// The same body rescaled to volume exactly one.
    pub fn normalized(mut self) -> Self {
        let shrink = (-self.log_volume() / self.dim as f64).exp();
        self.scale *= shrink;
        self
    }

    /// Apply an explicit rotation.
    pub fn with_rotation(mut self, rotation: Rotation) -> Result<Self> {
        if rotation.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rotation.dim(),
            });
        }
        self.rotation = Some(rotation);
        self.rotation_seed = None;
        self.meta.unconditional = false;
        Ok(self)
    }

    /// Apply the Haar rotation derived deterministically from `seed`.
    pub fn with_haar_rotation(mut self, seed: u64) -> Self {
        let mut rng = RngStream::new(seed).child_from_key("haar-rotation").rng();
        let rotation = Rotation::haar(self.dim, &mut rng);
        self.rotation = Some(rotation);
        self.rotation_seed = Some(seed);
        self.meta.unconditional = false;
        self
    }

    pub fn family(&self) -> BodyFamily {
        self.family
    }

    pub fn exponent(&self) -> Exponent {
        self.family.exponent()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> Option<&Rotation> {
        self.rotation.as_ref()
    }

    pub fn meta(&self) -> &MetaConstants {
        &self.meta
    }

    /// Canonical descriptor, parseable by [`BodySpec::parse`].
    pub fn descriptor(&self) -> String {
        let mut s = format!("{}:{}", self.family.name(), self.dim);
        if self.scale != 1.0 {
            if self.is_normalized() {
                s.push_str(":vol1");
            } else {
                s.push_str(&format!(":scale={}", self.scale));
            }
        }
        match (self.rotation_seed, &self.rotation) {
            (Some(seed), _) => s.push_str(&format!(":rot={seed}")),
            (None, Some(_)) => s.push_str(":rot=explicit"),
            (None, None) => {}
        }
        s
    }

    /// Parse a body descriptor.
    ///
    /// Grammar: `<family>:<n>[:vol1 | :scale=<λ>][:rot=<seed>]` where
    /// `<family>` is `lp:<p>` (`<p>` a real ≥ 1 or `inf`), `ball`, `cube`
    /// or `cross`. Examples: `lp:2:16:vol1`, `lp:inf:8`, `cross:4:rot=7`.
    pub fn parse(descriptor: &str) -> Result<Self> {
        let tokens: Vec<&str> = descriptor.split(':').collect();
        if tokens.len() < 2 {
            return Err(Error::parse(format!(
                "body descriptor `{descriptor}` must look like lp:<p>:<n> or ball:<n>"
            )));
        }
        let (family, rest) = match tokens[0] {
            "lp" => {
                if tokens.len() < 3 {
                    return Err(Error::parse(format!(
                        "descriptor `{descriptor}` is missing the dimension"
                    )));
                }
                let p = if tokens[1] == "inf" {
                    Exponent::Infinity
                } else {
                    let v: f64 = tokens[1]
                        .parse()
                        .map_err(|_| Error::parse(format!("bad exponent `{}`", tokens[1])))?;
                    Exponent::Finite(v)
                };
                (BodyFamily::LpBall(p.validate()?), &tokens[2..])
            }
            "ball" => (BodyFamily::EuclideanBall, &tokens[1..]),
            "cube" => (BodyFamily::Cube, &tokens[1..]),
            "cross" => (BodyFamily::CrossPolytope, &tokens[1..]),
            other => {
                return Err(Error::parse(format!(
                    "unknown body family `{other}` (expected lp, ball, cube or cross)"
                )))
            }
        };
        let dim: usize = rest[0]
            .parse()
            .map_err(|_| Error::parse(format!("bad dimension `{}`", rest[0])))?;
        let mut body = Self::from_family(family, dim)?;
        let mut scaling_seen = false;
        for flag in &rest[1..] {
            if *flag == "vol1" {
                if scaling_seen {
                    return Err(Error::parse("vol1 and scale= are mutually exclusive"));
                }
                body = body.normalized();
                scaling_seen = true;
            } else if let Some(v) = flag.strip_prefix("scale=") {
                if scaling_seen {
                    return Err(Error::parse("vol1 and scale= are mutually exclusive"));
                }
                let factor: f64 = v
                    .parse()
                    .map_err(|_| Error::parse(format!("bad scale `{v}`")))?;
                body = body.scaled(factor)?;
                scaling_seen = true;
            } else if let Some(v) = flag.strip_prefix("rot=") {
                let seed: u64 = v
                    .parse()
                    .map_err(|_| Error::parse(format!("bad rotation seed `{v}`")))?;
                body = body.with_haar_rotation(seed);
            } else {
                return Err(Error::parse(format!("unknown descriptor flag `{flag}`")));
            }
        }
        Ok(body)
    }

    /// The Minkowski gauge `‖x‖ = inf { r > 0 : x ∈ r·body }`.
    ///
    /// Panics if `x.len() ≠ dim`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "gauge: vector has the wrong dimension");
        let p = self.exponent();
        match &self.rotation {
            None => lp_norm(x, p) / self.scale,
            Some(u) => {
                let mut back = vec![0.0; self.dim];
                u.apply_transpose(x, &mut back);
                lp_norm(&back, p) / self.scale
            }
        }
    }

    /// The support function `h(y) = max { ⟨x, y⟩ : x ∈ body }`.
    ///
    /// Panics if `y.len() ≠ dim`.
    pub fn support(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.dim, "support: vector has the wrong dimension");
        let dual = self.exponent().dual();
        match &self.rotation {
            None => self.scale * lp_norm(y, dual),
            Some(u) => {
                let mut back = vec![0.0; self.dim];
                u.apply_transpose(y, &mut back);
                self.scale * lp_norm(&back, dual)
            }
        }
    }

    /// Membership test with a small tolerance on the gauge.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.gauge(x) <= 1.0 + 1e-12
    }

    /// `ln vol(body)`; finite and accurate through dimension 1024 and beyond.
    pub fn log_volume(&self) -> f64 {
        let n = self.dim as f64;
        let ip = self.exponent().inv();
        n * self.scale.ln() + n * (std::f64::consts::LN_2 + libm::lgamma(1.0 + ip))
            - libm::lgamma(1.0 + n * ip)
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    pub fn is_normalized(&self) -> bool {
        self.log_volume().abs() < 1e-9
    }

    /// The isotropic constant `L = (∫ x₁² dx)^{1/2}` of the volume-one body.
    ///
    /// Rotations do not change it (the inertia matrix of this family is a
    /// multiple of the identity), but the body must be volume-normalized.
    pub fn isotropic_constant(&self) -> Result<f64> {
        if !self.is_normalized() {
            return Err(Error::state(format!(
                "isotropic constant requires a volume-one body; `{}` has volume {:.6e}",
                self.descriptor(),
                self.volume()
            )));
        }
        Ok(self.scale * self.coordinate_moment_unit(2.0).sqrt())
    }

    /// `E |x₁|^q` for `x` uniform on the *unit* `ℓp` ball of this family.
    fn coordinate_moment_unit(&self, q: f64) -> f64 {
        let n = self.dim as f64;
        match self.exponent() {
            // Coordinates are independent uniforms on [−1, 1].
            Exponent::Infinity => 1.0 / (q + 1.0),
            Exponent::Finite(p) => (libm::lgamma((q + 1.0) / p) - libm::lgamma(1.0 / p)
                + libm::lgamma(1.0 + n / p)
                - libm::lgamma(1.0 + (n + q) / p))
            .exp(),
        }
    }

    /// Circumradius of the polar body: `b = max { ‖x‖_body : |x|₂ = 1 }`.
    pub fn polar_radius(&self) -> f64 {
        let n = self.dim as f64;
        let ip = self.exponent().inv();
        if ip <= 0.5 {
            1.0 / self.scale
        } else {
            n.powf(ip - 0.5) / self.scale
        }
    }

    /// Euclidean circumradius `R = max { |x|₂ : x ∈ body }`.
    pub fn radius(&self) -> f64 {
        let n = self.dim as f64;
        let ip = self.exponent().inv();
        if ip >= 0.5 {
            self.scale
        } else {
            self.scale * n.powf(0.5 - ip)
        }
    }

    /// Volume radius `(vol(body) / vol(B₂ⁿ))^{1/n}`.
    pub fn vrad(&self) -> f64 {
        ((self.log_volume() - log_unit_ball_volume(self.dim)) / self.dim as f64).exp()
    }
}

impl std::fmt::Display for BodySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.descriptor())
    }
}
