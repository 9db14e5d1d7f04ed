use serde::{Deserialize, Serialize};

use super::rng::CounterRng;
use super::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Poisson,
    Gaussian,
}

impl std::str::FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseKind::None),
            "poisson" => Ok(NoiseKind::Poisson),
            "gaussian" => Ok(NoiseKind::Gaussian),
            other => Err(format!("unknown noise kind '{other}'")),
        }
    }
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Poisson => "poisson",
            NoiseKind::Gaussian => "gaussian",
        }
    }
}

/// Noise applied to a noiseless curve y.
///
/// - `Poisson`: the curve is scaled so its maximum equals `scale` counts,
///   each point is replaced by a Poisson draw and scaled back; σ = √max(λ, 1)
///   from the expected count λ, in the same units, so the weights do not
///   depend on the draw.
/// - `Gaussian`: adds N(0, σ²) with σ = `scale` × max|y|.
/// - `None`: values are exact; the reported σ is a nominal 1% of max|y|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    #[serde(default)]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Replica index, used as the generator stream.
    #[serde(default)]
    pub stream: u64,
}

/// Nominal relative σ reported for noiseless data.
pub const NOMINAL_SIGMA_FRACTION: f64 = 0.01;

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, scale: 0.0, seed: 0, stream: 0 }
    }

    pub fn poisson(peak_counts: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::Poisson, scale: peak_counts, seed, stream: 0 }
    }

    pub fn gaussian(sigma_fraction: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::Gaussian, scale: sigma_fraction, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.kind != NoiseKind::None && !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SynthError::InvalidNoise(format!("scale must be > 0 for {} noise", self.kind.as_str())));
        }
        Ok(())
    }

    /// Returns (noisy values, σ) for the noiseless curve `y`.
    pub fn apply(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SynthError> {
        self.validate()?;
        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak = if peak > 0.0 { peak } else { 1.0 };
        let mut rng = CounterRng::new(self.seed, self.stream);
        Ok(match self.kind {
            NoiseKind::None => (y.to_vec(), vec![NOMINAL_SIGMA_FRACTION * peak; y.len()]),
            NoiseKind::Gaussian => {
                let s = self.scale * peak;
                (y.iter().map(|v| v + s * rng.normal()).collect(), vec![s; y.len()])
            }
            NoiseKind::Poisson => {
                let f = self.scale / peak;
                let mut vals = Vec::with_capacity(y.len());
                let mut sig = Vec::with_capacity(y.len());
                for v in y {
                    let lambda = v.max(0.0) * f;
                    let k = rng.poisson(lambda) as f64;
                    vals.push(k / f);
                    sig.push(lambda.max(1.0).sqrt() / f);
                }
                (vals, sig)
            }
        })
    }
}
