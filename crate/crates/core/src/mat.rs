//! Small dense orthogonal matrices for rotated bodies.

use rand::Rng;
use rand_distr::StandardNormal;

/// An orthogonal `n × n` matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    n: usize,
    m: Vec<f64>,
}

impl Rotation {
    pub fn identity(n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Rotation { n, m }
    }

    /// Haar-distributed rotation: QR of a Gaussian matrix with the sign of
    /// the `R` diagonal folded into `Q`, so the factorization has `R_kk > 0`.
    pub fn haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "rotation dimension must be positive");
        let mut r = vec![0.0f64; n * n];
        for e in r.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let mut q = Rotation::identity(n).m;
        let mut v = vec![0.0f64; n];

        for k in 0..n {
            let mut norm2 = 0.0;
            for i in k..n {
                norm2 += r[i * n + k] * r[i * n + k];
            }
            let norm = norm2.sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if r[k * n + k] > 0.0 { -norm } else { norm };
            v[k] = r[k * n + k] - alpha;
            for i in (k + 1)..n {
                v[i] = r[i * n + k];
            }
            let vnorm2 = v[k..n].iter().map(|x| x * x).sum::<f64>();
            if vnorm2 < f64::MIN_POSITIVE {
                continue;
            }
            for j in k..n {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i] * r[i * n + j];
                }
                let c = 2.0 * dot / vnorm2;
                for i in k..n {
                    r[i * n + j] -= c * v[i];
                }
            }
            for i in 0..n {
                let mut dot = 0.0;
                for j in k..n {
                    dot += q[i * n + j] * v[j];
                }
                let c = 2.0 * dot / vnorm2;
                for j in k..n {
                    q[i * n + j] -= c * v[j];
                }
            }
        }
        for k in 0..n {
            if r[k * n + k] < 0.0 {
                for i in 0..n {
                    q[i * n + k] = -q[i * n + k];
                }
            }
        }
        Rotation { n, m: q }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `out = U x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = Uᵀ x` (the inverse, since `U` is orthogonal).
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        out.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.m[i * n..(i + 1) * n];
            for (o, &r) in out.iter_mut().zip(row) {
                *o += r * xi;
            }
        }
    }

    /// `max_ij |(UᵀU − I)_ij|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += self.m[i * n + a] * self.m[i * n + b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}
