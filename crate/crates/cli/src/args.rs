use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "qekit", version, about = "Photophysics analysis for solid-state quantum emitters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Input file (or directory, for `survey` and `temp-series`); repeatable for `temp-series`.
    #[arg(long, short = 'i')]
    pub input: Vec<PathBuf>,
    /// Report path for fits, data path for `convert` and `synth`.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// TOML or JSON parameter file; a previous report can be given to re-run it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write an SVG plot next to the report.
    #[arg(long)]
    pub plot: bool,
    /// Override any parameter: `--set key=value` (value parsed as JSON, else a string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Vibronic fit settings exposed as flags.
#[derive(Debug, Clone, Args)]
pub struct VibronicFlags {
    #[arg(long)]
    pub zpl_shape: Option<String>,
    #[arg(long)]
    pub delta_e_mev: Option<f64>,
    #[arg(long)]
    pub e_max_mev: Option<f64>,
    /// `auto` or a positive integer.
    #[arg(long)]
    pub n_max: Option<String>,
    /// Hold the ZPL FWHM fixed (μeV).
    #[arg(long)]
    pub gamma_fixed_uev: Option<f64>,
    #[arg(long)]
    pub smoothness_lambda: Option<f64>,
    #[arg(long)]
    pub e_zpl_hint_ev: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct IrfFlags {
    #[arg(long)]
    pub irf_fwhm_uev: Option<f64>,
    /// `linear` or `quadrature`.
    #[arg(long)]
    pub irf_method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate, convert to energy or lineshape, and rebin a spectrum.
    Convert {
        #[command(flatten)]
        common: Common,
        /// `energy`, `wavelength` or `lineshape`.
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        e_zpl_hint_ev: Option<f64>,
        /// Efficiency curve CSV with columns `wavelength_nm,efficiency`.
        #[arg(long)]
        efficiency: Option<PathBuf>,
        /// Equal-count rebinning target per bin.
        #[arg(long)]
        rebin_counts: Option<f64>,
    },
    /// Fit the finite-temperature vibronic lineshape of one spectrum.
    VibronicFit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        vib: VibronicFlags,
        #[arg(long)]
        temperature_k: Option<f64>,
    },
    /// Fit spectra at several temperatures and test S_HR for temperature independence.
    TempSeries {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        vib: VibronicFlags,
    },
    /// Fit a single Lorentzian or Gaussian peak.
    PeakFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        zpl_shape: Option<String>,
        #[command(flatten)]
        irf: IrfFlags,
        #[arg(long)]
        window_lo_ev: Option<f64>,
        #[arg(long)]
        window_hi_ev: Option<f64>,
    },
    /// Fit Γ(P) = Γ₀·√(1 + P/P₀).
    PowerFit {
        #[command(flatten)]
        common: Common,
    },
    /// Fit Γ(T) = Γ₀ + aT + bT⁵.
    TempFit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        irf: IrfFlags,
    },
    /// Fit the first-order saturation model.
    SatFit {
        #[command(flatten)]
        common: Common,
        /// Include a linear background term.
        #[arg(long)]
        background: Option<bool>,
    },
    /// Fit g²(τ) = 1 − α·e^{−|τ|/τ₀}.
    G2Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        irf_fwhm_ns: Option<f64>,
        #[arg(long)]
        normalize: Option<bool>,
    },
    /// Fit a single-exponential decay with baseline.
    LifetimeFit {
        #[command(flatten)]
        common: Common,
    },
    /// Radiative lifetime from ZPL energy, transition dipole and refractive index.
    Radlife {
        #[command(flatten)]
        common: Common,
        /// ZPL energy in eV.
        #[arg(long)]
        e_zpl: Option<f64>,
        /// Transition dipole in e·Å.
        #[arg(long)]
        mu: Option<f64>,
        /// Refractive index.
        #[arg(long)]
        n: Option<f64>,
    },
    /// Detect emitters in a hyperspectral cube and summarize their ZPLs.
    Survey {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        band_lo_nm: Option<f64>,
        #[arg(long)]
        band_hi_nm: Option<f64>,
        #[arg(long)]
        min_snr: Option<f64>,
        #[arg(long)]
        min_separation_px: Option<f64>,
        #[arg(long)]
        zpl_shape: Option<String>,
    },
    /// Generate synthetic spectra, point sets or cubes with known ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        /// `vibronic`, `cube`, or a scalar model name.
        #[arg(long)]
        kind: Option<String>,
        /// `none`, `poisson` or `gaussian`.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long)]
        temperature_k: Option<f64>,
        #[arg(long)]
        s_hr: Option<f64>,
        #[arg(long)]
        zpl_shape: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Convert { .. } => "convert",
            Command::VibronicFit { .. } => "vibronic-fit",
            Command::TempSeries { .. } => "temp-series",
            Command::PeakFit { .. } => "peak-fit",
            Command::PowerFit { .. } => "power-fit",
            Command::TempFit { .. } => "temp-fit",
            Command::SatFit { .. } => "sat-fit",
            Command::G2Fit { .. } => "g2-fit",
            Command::LifetimeFit { .. } => "lifetime-fit",
            Command::Radlife { .. } => "radlife",
            Command::Survey { .. } => "survey",
            Command::Synth { .. } => "synth",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Convert { common, .. }
            | Command::VibronicFit { common, .. }
            | Command::TempSeries { common, .. }
            | Command::PeakFit { common, .. }
            | Command::PowerFit { common }
            | Command::TempFit { common, .. }
            | Command::SatFit { common, .. }
            | Command::G2Fit { common, .. }
            | Command::LifetimeFit { common }
            | Command::Radlife { common, .. }
            | Command::Survey { common, .. }
            | Command::Synth { common, .. } => common,
        }
    }
}
