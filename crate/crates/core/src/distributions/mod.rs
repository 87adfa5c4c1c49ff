//! Marginal source laws, their score functions, and the PG(1, c) sampler.
//!
//! Every family has a raw form (sech with density `1/(π cosh s)`, Student-t(ν)
//! with unit scale, Laplace with unit scale, standard normal) and a
//! standardized form `s_std = s_raw / c` with unit variance. The affine map is
//! applied exactly to densities and scores:
//! `log p_std(s) = log c + log p_raw(c s)` and `ψ_std(s) = c ψ_raw(c s)`.

mod polya_gamma;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;
use core::str::FromStr;

use rand_distr::{Distribution, StudentT};

pub use polya_gamma::{
    pg_laplace_transform, pg_mean, pg_variance, sample_pg1, sample_pg1_series, TRUNCATION,
};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Shape of a marginal source law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    Sech,
    StudentT(f64),
    Laplace,
    /// Equal-weight mixture of Student-t₃ and Laplace. As a per-column
    /// benchmark family it resolves to t₃ or Laplace via [`SourceFamily::column_family`].
    Mixed,
    Gaussian,
}

/// A source family together with its standardization flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceFamily {
    kind: FamilyKind,
    standardized: bool,
}

impl SourceFamily {
    pub fn new(kind: FamilyKind, standardized: bool) -> Result<Self> {
        if let FamilyKind::StudentT(nu) = kind {
            if !(nu > 0.0) || !nu.is_finite() {
                return Err(Error::invalid(alloc::format!("Student-t degrees of freedom must be positive, got {nu}")));
            }
            if standardized && nu <= 2.0 {
                return Err(Error::invalid(alloc::format!(
                    "Student-t with nu = {nu} has infinite variance and cannot be standardized"
                )));
            }
        }
        Ok(SourceFamily { kind, standardized })
    }

    pub const fn sech() -> Self {
        SourceFamily { kind: FamilyKind::Sech, standardized: true }
    }

    pub const fn t3() -> Self {
        SourceFamily { kind: FamilyKind::StudentT(3.0), standardized: true }
    }

    pub const fn laplace() -> Self {
        SourceFamily { kind: FamilyKind::Laplace, standardized: true }
    }

    pub const fn mixed() -> Self {
        SourceFamily { kind: FamilyKind::Mixed, standardized: true }
    }

    pub const fn gaussian() -> Self {
        SourceFamily { kind: FamilyKind::Gaussian, standardized: true }
    }

    /// Same kind without standardization.
    pub const fn raw(self) -> Self {
        SourceFamily { kind: self.kind, standardized: false }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, FamilyKind::Gaussian)
    }

    /// Whether the log density is twice differentiable everywhere. Laplace
    /// (and the mixture containing it) has a kink at zero.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, FamilyKind::Laplace | FamilyKind::Mixed)
    }

    /// The divisor `c` taking raw draws to unit variance (1 when raw).
    pub fn scale(&self) -> f64 {
        if !self.standardized {
            return 1.0;
        }
        match self.kind {
            FamilyKind::Sech => FRAC_PI_2,
            FamilyKind::StudentT(nu) => libm::sqrt(nu / (nu - 2.0)),
            FamilyKind::Laplace => core::f64::consts::SQRT_2,
            FamilyKind::Mixed | FamilyKind::Gaussian => 1.0,
        }
    }

    /// Variance of the law (`1` when standardized; may be infinite for raw t).
    pub fn variance(&self) -> f64 {
        if self.standardized {
            return 1.0;
        }
        match self.kind {
            FamilyKind::Sech => PI * PI / 4.0,
            FamilyKind::StudentT(nu) if nu > 2.0 => nu / (nu - 2.0),
            FamilyKind::StudentT(_) => f64::INFINITY,
            FamilyKind::Laplace => 2.0,
            FamilyKind::Mixed => 0.5 * (3.0 + 2.0),
            FamilyKind::Gaussian => 1.0,
        }
    }

    /// Resolves a benchmark family to the law of column `j` out of `d`.
    /// Mixed assigns the first `ceil(d/2)` columns to t₃ and the rest to
    /// Laplace; other families are returned unchanged.
    pub fn column_family(&self, j: usize, d: usize) -> SourceFamily {
        match self.kind {
            FamilyKind::Mixed => {
                let kind = if j < d.div_ceil(2) { FamilyKind::StudentT(3.0) } else { FamilyKind::Laplace };
                SourceFamily { kind, standardized: self.standardized }
            }
            _ => *self,
        }
    }

    fn mixture_components(&self) -> [SourceFamily; 2] {
        [
            SourceFamily { kind: FamilyKind::StudentT(3.0), standardized: self.standardized },
            SourceFamily { kind: FamilyKind::Laplace, standardized: self.standardized },
        ]
    }

    /// Normalized log density.
    pub fn log_density(&self, s: f64) -> f64 {
        if let FamilyKind::Mixed = self.kind {
            let [a, b] = self.mixture_components();
            let (la, lb) = (a.log_density(s), b.log_density(s));
            let m = la.max(lb);
            return m + libm::log(0.5 * libm::exp(la - m) + 0.5 * libm::exp(lb - m));
        }
        let c = self.scale();
        libm::log(c) + raw_log_density(self.kind, c * s)
    }

    pub fn density(&self, s: f64) -> f64 {
        libm::exp(self.log_density(s))
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, s: f64) -> f64 {
        let x = self.scale() * s;
        match self.kind {
            FamilyKind::Sech => 2.0 / PI * libm::atan(libm::exp(x)),
            FamilyKind::Laplace => {
                if x < 0.0 {
                    0.5 * libm::exp(x)
                } else {
                    1.0 - 0.5 * libm::exp(-x)
                }
            }
            FamilyKind::Gaussian => crate::stats::normal_cdf(x),
            FamilyKind::StudentT(nu) => student_t_cdf(x, nu),
            FamilyKind::Mixed => {
                let [a, b] = self.mixture_components();
                0.5 * (a.cdf(s) + b.cdf(s))
            }
        }
    }

    pub fn score(&self) -> ScoreBundle {
        ScoreBundle { family: *self }
    }

    /// One draw.
    pub fn sample_one(&self, rng: &mut RngStream) -> f64 {
        let raw = match self.kind {
            FamilyKind::Sech => libm::log(libm::tan(FRAC_PI_2 * rng.uniform01())),
            FamilyKind::StudentT(nu) => {
                StudentT::new(nu).expect("validated degrees of freedom").sample(rng.inner())
            }
            FamilyKind::Laplace => {
                let e = rng.exp1();
                if rng.uniform01() < 0.5 {
                    -e
                } else {
                    e
                }
            }
            FamilyKind::Gaussian => rng.standard_normal(),
            FamilyKind::Mixed => {
                let [a, b] = self.mixture_components();
                return if rng.uniform01() < 0.5 { a.sample_one(rng) } else { b.sample_one(rng) };
            }
        };
        raw / self.scale()
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }

    /// Config token, e.g. `sech`, `t3`, `laplace:raw`.
    pub fn token(&self) -> String {
        let base = match self.kind {
            FamilyKind::Sech => "sech".to_string(),
            FamilyKind::StudentT(nu) => alloc::format!("t{nu}"),
            FamilyKind::Laplace => "laplace".to_string(),
            FamilyKind::Mixed => "mixed".to_string(),
            FamilyKind::Gaussian => "gaussian".to_string(),
        };
        if self.standardized {
            base
        } else {
            base + ":raw"
        }
    }
}

/// Free-function form of [`SourceFamily::sample`].
pub fn sample_source(family: &SourceFamily, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    family.sample(n, rng)
}

pub fn log_density(family: &SourceFamily, s: f64) -> f64 {
    family.log_density(s)
}

pub fn score(family: &SourceFamily) -> ScoreBundle {
    family.score()
}

impl fmt::Display for SourceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for SourceFamily {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        let (base, standardized) = match token.strip_suffix(":raw") {
            Some(b) => (b, false),
            None => (token, true),
        };
        let kind = match base {
            "sech" => FamilyKind::Sech,
            "laplace" => FamilyKind::Laplace,
            "mixed" => FamilyKind::Mixed,
            "gaussian" => FamilyKind::Gaussian,
            t if t.starts_with('t') => {
                let nu: f64 = t[1..]
                    .parse()
                    .map_err(|_| Error::invalid(alloc::format!("unknown source family '{token}'")))?;
                FamilyKind::StudentT(nu)
            }
            _ => return Err(Error::invalid(alloc::format!("unknown source family '{token}'"))),
        };
        SourceFamily::new(kind, standardized)
    }
}

fn raw_log_density(kind: FamilyKind, x: f64) -> f64 {
    match kind {
        FamilyKind::Sech => -libm::log(PI) - log_cosh(x),
        FamilyKind::StudentT(nu) => {
            libm::lgamma(0.5 * (nu + 1.0)) - libm::lgamma(0.5 * nu) - 0.5 * libm::log(nu * PI)
                - 0.5 * (nu + 1.0) * libm::log1p(x * x / nu)
        }
        FamilyKind::Laplace => -core::f64::consts::LN_2 - x.abs(),
        FamilyKind::Gaussian => -0.5 * libm::log(2.0 * PI) - 0.5 * x * x,
        FamilyKind::Mixed => unreachable!("mixture handled by caller"),
    }
}

/// `log cosh(x)` without overflow.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + libm::log1p(libm::exp(-2.0 * a)) - core::f64::consts::LN_2
}

/// Raw-scale `(ψ, ψ′, ψ″)`.
fn raw_scores(kind: FamilyKind, x: f64) -> (f64, f64, f64) {
    match kind {
        FamilyKind::Sech => {
            let t = libm::tanh(x);
            let sech2 = 1.0 - t * t;
            (-t, -sech2, 2.0 * sech2 * t)
        }
        FamilyKind::StudentT(nu) => {
            let q = nu + x * x;
            (
                -(nu + 1.0) * x / q,
                -(nu + 1.0) * (nu - x * x) / (q * q),
                -(nu + 1.0) * 2.0 * x * (x * x - 3.0 * nu) / (q * q * q),
            )
        }
        FamilyKind::Laplace => {
            let sign = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
            (-sign, 0.0, 0.0)
        }
        FamilyKind::Gaussian => (-x, -1.0, 0.0),
        FamilyKind::Mixed => unreachable!("mixture handled by caller"),
    }
}

/// Score `ψ = (log p)′` and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreBundle {
    family: SourceFamily,
}

impl ScoreBundle {
    pub fn family(&self) -> SourceFamily {
        self.family
    }

    /// `(ψ(s), ψ′(s), ψ″(s))` in one evaluation.
    pub fn all(&self, s: f64) -> (f64, f64, f64) {
        let f = self.family;
        if let FamilyKind::Mixed = f.kind {
            // For p = Σ π_k p_k with posterior weights w_k:
            // p″/p = Σ w_k(ψ_k′ + ψ_k²), p‴/p = Σ w_k(ψ_k″ + 3ψ_kψ_k′ + ψ_k³).
            let comps = f.mixture_components();
            let la = comps[0].log_density(s);
            let lb = comps[1].log_density(s);
            let m = la.max(lb);
            let (ea, eb) = (libm::exp(la - m), libm::exp(lb - m));
            let w = [ea / (ea + eb), eb / (ea + eb)];
            let (mut psi, mut m2, mut m3) = (0.0, 0.0, 0.0);
            for (wk, comp) in w.iter().zip(comps.iter()) {
                let (p, p1, p2) = comp.score().all(s);
                psi += wk * p;
                m2 += wk * (p1 + p * p);
                m3 += wk * (p2 + 3.0 * p * p1 + p * p * p);
            }
            let d1 = m2 - psi * psi;
            let d2 = m3 - 3.0 * psi * m2 + 2.0 * psi * psi * psi;
            return (psi, d1, d2);
        }
        let c = f.scale();
        let (p, p1, p2) = raw_scores(f.kind, c * s);
        (c * p, c * c * p1, c * c * c * p2)
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.all(s).0
    }

    pub fn psi_prime(&self, s: f64) -> f64 {
        self.all(s).1
    }

    pub fn psi_double_prime(&self, s: f64) -> f64 {
        self.all(s).2
    }
}

/// Student-t CDF via the regularized incomplete beta function.
fn student_t_cdf(x: f64, nu: f64) -> f64 {
    let t = nu / (nu + x * x);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, t);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `I_x(a, b)` by Lentz's continued fraction.
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
    }
    let front = libm::exp(ln_front) / a;
    let tiny = 1e-300;
    let mut f = 1.0;
    let mut c = 1.0;
    let mut d = 0.0;
    for i in 0..400 {
        let m = (i / 2) as f64;
        let num = if i == 0 {
            1.0
        } else if i % 2 == 0 {
            m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m))
        } else {
            -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0))
        };
        d = 1.0 + num * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let cd = c * d;
        f *= cd;
        if (1.0 - cd).abs() < 1e-15 {
            break;
        }
    }
    front * (f - 1.0)
}
