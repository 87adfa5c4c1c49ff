use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Primitive distributions exposed through [`RngStream::draw`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Draw {
    Uniform01,
    StandardNormal,
    Exponential { rate: f64 },
    InverseGaussian { mu: f64, lambda: f64 },
}

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// nonce, so streams with different ids never share keystream and need no
/// coordination when used from different threads.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// SplitMix64 finalizer; used to derive child stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent stream sharing the seed, with an id derived from this
    /// stream's id and `index`. Does not advance `self`.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, mix64(self.stream_id ^ mix64(index.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(alloc::format!("exponential rate must be positive, got {rate}")));
        }
        Ok(self.exp1() / rate)
    }

    /// Inverse-Gaussian IG(mu, lambda) by the transformation-with-rejection
    /// method of Michael, Schucany and Haas.
    pub fn inverse_gaussian(&mut self, mu: f64, lambda: f64) -> Result<f64> {
        if !(mu > 0.0) || !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "inverse gaussian needs mu > 0 and lambda > 0, got mu={mu}, lambda={lambda}"
            )));
        }
        let z = self.standard_normal();
        let y = z * z;
        let my = mu * y;
        let x = mu + mu * my / (2.0 * lambda)
            - mu / (2.0 * lambda) * libm::sqrt(4.0 * mu * lambda * y + my * my);
        if self.uniform01() <= mu / (mu + x) {
            Ok(x)
        } else {
            Ok(mu * mu / x)
        }
    }

    /// Gamma(shape, scale).
    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        let g = Gamma::new(shape, scale)
            .map_err(|_| Error::invalid(alloc::format!("gamma(shape={shape}, scale={scale})")))?;
        Ok(g.sample(&mut self.rng))
    }

    /// Inverse-gamma with density ∝ x^{-(shape+1)} exp(-scale / x).
    pub fn inverse_gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        Ok(scale / self.gamma(shape, 1.0)?)
    }

    pub fn draw(&mut self, dist: Draw) -> Result<f64> {
        match dist {
            Draw::Uniform01 => Ok(self.uniform01()),
            Draw::StandardNormal => Ok(self.standard_normal()),
            Draw::Exponential { rate } => self.exponential(rate),
            Draw::InverseGaussian { mu, lambda } => self.inverse_gaussian(mu, lambda),
        }
    }

    /// Borrow the underlying generator for `rand_distr` samplers.
    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
