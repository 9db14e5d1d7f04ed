use serde::Serialize;

use super::{EmitterRecord, SurveyError};

pub const MIN_EMITTERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges_nm: Vec<f64>,
    pub counts: Vec<usize>,
}

/// ZPL population summary with an unbinned maximum-likelihood Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZplDistribution {
    /// Sorted ascending.
    pub values_nm: Vec<f64>,
    pub mean_nm: f64,
    pub mean_sigma_nm: f64,
    pub sigma_nm: f64,
    pub sigma_sigma_nm: f64,
    pub histogram: Histogram,
    /// All values identical: σ = 0 and the Gaussian is degenerate.
    pub degenerate: bool,
}

/// Distribution of the fitted ZPLs of `records`; failed peak fits are skipped.
pub fn zpl_distribution(records: &[EmitterRecord], bin_width_nm: f64) -> Result<ZplDistribution, SurveyError> {
    let values: Vec<f64> = records.iter().filter_map(|r| r.zpl_nm).collect();
    zpl_distribution_from_values(&values, bin_width_nm)
}

pub fn zpl_distribution_from_values(values: &[f64], bin_width_nm: f64) -> Result<ZplDistribution, SurveyError> {
    if values.len() < MIN_EMITTERS {
        return Err(SurveyError::TooFewEmitters { need: MIN_EMITTERS, got: values.len() });
    }
    if !(bin_width_nm > 0.0) {
        return Err(SurveyError::InvalidParameter(format!("bin width must be > 0, got {bin_width_nm}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SurveyError::InvalidParameter("non-finite ZPL value".into()));
    }
    // sorting first makes the sums independent of input order
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let degenerate = sorted[0] == sorted[sorted.len() - 1];
    let sigma = if degenerate { 0.0 } else { var.sqrt() };
    let mean = mean.clamp(sorted[0], sorted[sorted.len() - 1]);

    let first = (sorted[0] / bin_width_nm).floor();
    let last = (sorted[sorted.len() - 1] / bin_width_nm).floor();
    let n_bins = (last - first) as usize + 1;
    let edges_nm: Vec<f64> = (0..=n_bins).map(|i| (first + i as f64) * bin_width_nm).collect();
    let mut counts = vec![0; n_bins];
    for v in &sorted {
        let k = ((v / bin_width_nm).floor() - first) as usize;
        counts[k.min(n_bins - 1)] += 1;
    }
    Ok(ZplDistribution {
        mean_nm: mean,
        mean_sigma_nm: sigma / n.sqrt(),
        sigma_nm: sigma,
        sigma_sigma_nm: sigma / (2.0 * n).sqrt(),
        values_nm: sorted,
        histogram: Histogram { edges_nm, counts },
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_values() {
        let d = zpl_distribution_from_values(&[770.0; 6], 5.0).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.sigma_nm, 0.0);
        assert_eq!(d.mean_nm, 770.0);
        assert_eq!(d.histogram.counts, vec![6]);
    }

    #[test]
    fn histogram_counts_all_values() {
        let v = [761.0, 765.0, 770.0, 771.0, 779.9, 780.0];
        let d = zpl_distribution_from_values(&v, 10.0).unwrap();
        assert_eq!(d.histogram.edges_nm, vec![760.0, 770.0, 780.0, 790.0]);
        assert_eq!(d.histogram.counts, vec![2, 3, 1]);
    }

    #[test]
    fn too_few() {
        assert!(matches!(zpl_distribution_from_values(&[1.0; 4], 1.0), Err(SurveyError::TooFewEmitters { .. })));
    }
}
