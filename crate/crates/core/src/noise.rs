//! Seedable noise sources. Every family is standardized to zero mean and unit
//! variance; the Brownian family is then rescaled by its strength.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default Poisson rate before standardization.
pub const DEFAULT_POISSON_RATE: f64 = 10.0;

/// A deterministic random stream selected by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Sibling stream with the same seed and a different selector. Does not
    /// advance `self`.
    pub fn substream(&self, stream_id: u64) -> Self {
        RngStream::new(self.seed, stream_id)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Noise families compared throughout the analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Gaussian,
    /// Standard normal rescaled by the Brownian strength `sigma`.
    Brownian { sigma: f64 },
    Laplacian,
    /// `(X - rate) / sqrt(rate)` with `X ~ Poisson(rate)`.
    Poisson { rate: f64 },
    Uniform,
}

impl NoiseKind {
    pub fn poisson() -> Self {
        NoiseKind::Poisson {
            rate: DEFAULT_POISSON_RATE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Brownian { .. } => "brownian",
            NoiseKind::Laplacian => "laplacian",
            NoiseKind::Poisson { .. } => "poisson",
            NoiseKind::Uniform => "uniform",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseKind::Brownian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::Parameter(format!("brownian strength must be positive, got {sigma}")),
            ),
            NoiseKind::Poisson { rate } if !(rate > 0.0 && rate.is_finite()) => Err(
                Error::Parameter(format!("poisson rate must be positive, got {rate}")),
            ),
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            NoiseKind::Gaussian => rng.standard_normal(),
            NoiseKind::Brownian { sigma } => sigma * rng.standard_normal(),
            NoiseKind::Laplacian => {
                // inverse CDF with scale b = 1/sqrt(2) so that 2b^2 = 1
                let b = std::f64::consts::FRAC_1_SQRT_2;
                let u = rng.uniform() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -b * u.signum() * tail.ln()
            }
            NoiseKind::Poisson { rate } => {
                let x: f64 = Poisson::new(rate)
                    .expect("rate validated")
                    .sample(rng.inner());
                (x - rate) / rate.sqrt()
            }
            NoiseKind::Uniform => (2.0 * rng.uniform() - 1.0) * 3f64.sqrt(),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    /// Parses a family name; `brownian` defaults to unit strength.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "brownian" => Ok(NoiseKind::Brownian { sigma: 1.0 }),
            "laplacian" => Ok(NoiseKind::Laplacian),
            "poisson" => Ok(NoiseKind::poisson()),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(Error::Parameter(format!("unknown noise family `{other}`"))),
        }
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    let n: usize = dims.iter().product();
    if dims.is_empty() || n == 0 {
        return Err(Error::Parameter(format!("empty noise shape {dims:?}")));
    }
    Ok(n)
}

/// I.i.d. standardized samples of `kind`, flattened row-major over `dims`.
pub fn sample_noise<T: Real>(kind: NoiseKind, dims: &[usize], rng: &mut RngStream) -> Result<Vec<T>> {
    kind.validate()?;
    let n = element_count(dims)?;
    Ok((0..n).map(|_| T::lit(kind.draw(rng))).collect())
}

/// Per-step Brownian increment: i.i.d. `N(0, sigma^2 * alpha_t)`.
pub fn brownian_field<T: Real>(
    sigma: f64,
    alpha_t: f64,
    dims: &[usize],
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(alpha_t > 0.0 && alpha_t.is_finite()) {
        return Err(Error::Parameter(format!("alpha_t must be positive, got {alpha_t}")));
    }
    let n = element_count(dims)?;
    let scale = sigma * alpha_t.sqrt();
    Ok((0..n).map(|_| T::lit(scale * rng.standard_normal())).collect())
}
