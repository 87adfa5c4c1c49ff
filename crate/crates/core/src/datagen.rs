//! Synthetic data for the two experiment designs: the Pólya-Gamma
//! hierarchical model and the random-mixing benchmark.
//!
//! Both generators return `X = S·Aᵀ + E` with `E` i.i.d. `N(0, σ²)`, i.e. each
//! observation row is `x_i = A·s_i + ε_i`. Random streams are split per block
//! (mixing matrix, sources, noise) so changing `n` does not perturb `A`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distributions::{sample_pg1, SourceFamily};
use crate::error::{Error, Result};
use crate::numerics::{condition_number, Matrix, RngStream};

/// Largest accepted 2-norm condition number of a benchmark mixing matrix.
pub const MAX_CONDITION: f64 = 10.0;
/// Rejection attempts before giving up on a well-conditioned mixing matrix.
pub const MAX_ATTEMPTS: usize = 1000;
/// Multiplier applied to the first column of `τ` for the hard first component.
pub const HARD_TAU_FACTOR: f64 = 100.0;

const STREAM_MIXING: u64 = 0;
const STREAM_TAU: u64 = 1;
const STREAM_SOURCES: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Protocol {
    /// `τ ~ PG(1,0)`, `s | τ ~ N(0, 1/(4τ))`, `A` with `N(0, σ₂²)` entries.
    Hierarchical { sigma2: f64, hard_first_component: bool },
    /// Standardized i.i.d. sources from `family`, well-conditioned Gaussian `A`.
    Benchmark { family: SourceFamily },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Hierarchical { .. } => "hierarchical",
            Protocol::Benchmark { .. } => "benchmark",
        }
    }

    /// Family token for metadata; the hierarchical sources have no named family.
    pub fn family_token(&self) -> String {
        match self {
            Protocol::Hierarchical { .. } => String::from("pg-hierarchical"),
            Protocol::Benchmark { family } => family.token(),
        }
    }
}

/// Generating truth kept alongside the observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub s: Matrix,
    pub a: Matrix,
    /// Per-column source family (benchmark only).
    pub families: Option<Vec<SourceFamily>>,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub truth: Option<Truth>,
    pub seed: u64,
    pub sigma: f64,
    pub protocol: Protocol,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Observation noise actually injected, `X − S·Aᵀ`.
    pub fn noise(&self) -> Option<Matrix> {
        self.truth.as_ref().map(|t| &self.x - &t.s.matmul_t(&t.a))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!("{name} must be positive and finite, got {v}")))
    }
}

fn observe(s: &Matrix, a: &Matrix, sigma: f64, rng: &mut RngStream) -> Matrix {
    let mut x = s.matmul_t(a);
    x.data_mut().iter_mut().for_each(|v| *v += sigma * rng.standard_normal());
    x
}

/// Data from the PG hierarchical model.
pub fn generate_hierarchical(
    n: usize,
    d: usize,
    sigma: f64,
    sigma2: f64,
    hard_first_component: bool,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be at least 1"));
    }
    check_positive("sigma", sigma)?;
    check_positive("sigma2", sigma2)?;
    let root = RngStream::new(seed, 0);

    let mut rng = root.child(STREAM_MIXING);
    let a = Matrix::from_fn(d, d, |_, _| sigma2 * rng.standard_normal());

    let mut rng_tau = root.child(STREAM_TAU);
    let mut rng_s = root.child(STREAM_SOURCES);
    let mut s = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let mut tau = sample_pg1(0.0, &mut rng_tau)?;
            if hard_first_component && j == 0 {
                tau *= HARD_TAU_FACTOR;
            }
            s[(i, j)] = rng_s.standard_normal() / libm::sqrt(4.0 * tau);
        }
    }

    let x = observe(&s, &a, sigma, &mut root.child(STREAM_NOISE));
    Ok(Dataset {
        x,
        truth: Some(Truth { s, a, families: None, sigma }),
        seed,
        sigma,
        protocol: Protocol::Hierarchical { sigma2, hard_first_component },
    })
}

/// Gaussian `d×d` matrix redrawn until its condition number is at most
/// [`MAX_CONDITION`].
pub fn well_conditioned_mixing(d: usize, rng: &mut RngStream) -> Result<Matrix> {
    for _ in 0..MAX_ATTEMPTS {
        let a = Matrix::from_fn(d, d, |_, _| rng.standard_normal());
        match condition_number(&a) {
            Ok(c) if c <= MAX_CONDITION => return Ok(a),
            _ => continue,
        }
    }
    Err(Error::ConditioningFailure { bound: MAX_CONDITION, attempts: MAX_ATTEMPTS })
}

/// Benchmark data: standardized sources from `family` (column-wise families
/// for `Mixed`) mixed by a well-conditioned Gaussian matrix.
pub fn generate_benchmark(family: SourceFamily, n: usize, d: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if d < 2 || n < d {
        return Err(Error::invalid(alloc::format!("benchmark needs n >= d >= 2, got n={n}, d={d}")));
    }
    check_positive("sigma", sigma)?;
    let family = SourceFamily::new(family.kind(), true)?;
    let root = RngStream::new(seed, 0);
    let a = well_conditioned_mixing(d, &mut root.child(STREAM_MIXING))?;

    let families: Vec<SourceFamily> = (0..d).map(|j| family.column_family(j, d)).collect();
    let mut rng_s = root.child(STREAM_SOURCES);
    let mut s = Matrix::zeros(n, d);
    for (j, fam) in families.iter().enumerate() {
        let col = fam.sample(n, &mut rng_s)?;
        s.set_col(j, &col);
    }

    let x = observe(&s, &a, sigma, &mut root.child(STREAM_NOISE));
    Ok(Dataset {
        x,
        truth: Some(Truth { s, a, families: Some(families), sigma }),
        seed,
        sigma,
        protocol: Protocol::Benchmark { family },
    })
}
