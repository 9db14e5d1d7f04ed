use super::{Bin, Spectrum, SpectrumError};

/// Default target counts per bin for [`equal_count_edges`].
pub const DEFAULT_COUNTS_PER_BIN: f64 = 400.0;

/// Redistributes bin contents onto new edges by fractional overlap.
///
/// Intensities are treated as bin contents (counts), so totals are conserved
/// when the target edges span the source range. Sigmas are combined in
/// quadrature with the same overlap fractions. Output is ascending.
pub fn rebin(spectrum: &Spectrum, target_edges: &[f64]) -> Result<Spectrum, SpectrumError> {
    if target_edges.len() < 2 || target_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpectrumError::NonMonotonicEdges);
    }
    let src = spectrum.sorted_ascending();
    let edges = src.bin_edges();
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let tol = 1e-12 * (hi - lo).abs().max(hi.abs());
    if target_edges[0] < lo - tol || target_edges[target_edges.len() - 1] > hi + tol {
        return Err(SpectrumError::EdgesOutOfRange { lo, hi });
    }

    let nt = target_edges.len() - 1;
    let mut counts = vec![0.0; nt];
    let mut var = vec![0.0; nt];
    let mut j = 0usize;
    for (i, b) in src.bins().iter().enumerate() {
        let (a0, a1) = (edges[i], edges[i + 1]);
        let width = a1 - a0;
        while j < nt && target_edges[j + 1] <= a0 {
            j += 1;
        }
        let mut k = j;
        while k < nt && target_edges[k] < a1 {
            let overlap = a1.min(target_edges[k + 1]) - a0.max(target_edges[k]);
            if overlap > 0.0 {
                let f = overlap / width;
                counts[k] += f * b.intensity;
                var[k] += (f * b.sigma).powi(2);
            }
            k += 1;
        }
    }
    let bins = (0..nt)
        .map(|k| Bin::new(0.5 * (target_edges[k] + target_edges[k + 1]), counts[k], var[k].sqrt()))
        .collect();
    src.replace_bins(spectrum.axis_kind(), bins)
}

/// Edges for adaptive rebinning: consecutive source bins are merged until
/// each output bin holds at least `counts_per_bin` counts; a short remainder
/// is folded into the last bin. Merging whole source bins keeps error bars
/// approximately uniform where the signal is strong.
pub fn equal_count_edges(spectrum: &Spectrum, counts_per_bin: f64) -> Vec<f64> {
    let src = spectrum.sorted_ascending();
    let edges = src.bin_edges();
    let mut out = vec![edges[0]];
    let mut acc = 0.0;
    for (i, b) in src.bins().iter().enumerate() {
        acc += b.intensity.max(0.0);
        if acc >= counts_per_bin {
            out.push(edges[i + 1]);
            acc = 0.0;
        }
    }
    let last = edges[edges.len() - 1];
    if *out.last().unwrap() < last {
        if out.len() > 1 {
            *out.last_mut().unwrap() = last;
        } else {
            out.push(last);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::AxisKind;
    use proptest::prelude::*;

    fn uniform(n: usize, y: f64, s: f64) -> Spectrum {
        let bins = (0..n).map(|i| Bin::new(800.0 + i as f64, y, s)).collect();
        Spectrum::new(AxisKind::WavelengthNm, bins).unwrap()
    }

    #[test]
    fn merging_pairs_adds_in_quadrature() {
        let s = uniform(16, 50.0, 5.0);
        let edges: Vec<f64> = (0..=8).map(|k| 799.5 + 2.0 * k as f64).collect();
        let r = rebin(&s, &edges).unwrap();
        assert_eq!(r.len(), 8);
        for b in r.bins() {
            assert!((b.intensity - 100.0).abs() < 1e-12);
            assert!((b.sigma - 7.0711).abs() < 1e-4);
        }
    }

    #[test]
    fn identical_edges_identity() {
        let bins = (0..12).map(|i| Bin::new(800.0 + i as f64, (i * i) as f64, 1.0 + i as f64)).collect();
        let s = Spectrum::new(AxisKind::WavelengthNm, bins).unwrap();
        let r = rebin(&s, &s.bin_edges()).unwrap();
        for (a, b) in s.bins().iter().zip(r.bins()) {
            assert!((a.axis - b.axis).abs() < 1e-12);
            assert!((a.intensity - b.intensity).abs() < 1e-12);
            assert!((a.sigma - b.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_errors() {
        let s = uniform(10, 1.0, 1.0);
        assert!(matches!(rebin(&s, &[800.0]), Err(SpectrumError::NonMonotonicEdges)));
        assert!(matches!(rebin(&s, &[805.0, 802.0]), Err(SpectrumError::NonMonotonicEdges)));
        assert!(matches!(rebin(&s, &[790.0, 802.0]), Err(SpectrumError::EdgesOutOfRange { .. })));
    }

    #[test]
    fn equal_count_edges_reach_target() {
        let s = uniform(40, 100.0, 10.0);
        let edges = equal_count_edges(&s, 400.0);
        assert_eq!(edges.len(), 11);
        let r = rebin(&s, &edges).unwrap();
        assert!(r.bins().iter().all(|b| (b.intensity - 400.0).abs() < 1e-9));
    }

    proptest! {
        #[test]
        fn conserves_counts_on_full_coverage(
            vals in proptest::collection::vec(0.0f64..1e4, 16..80),
            cuts in proptest::collection::vec(0.0f64..1.0, 7..12),
        ) {
            let n = vals.len();
            let bins = (0..n).map(|i| Bin::poisson(500.0 + 0.5 * i as f64, vals[i])).collect();
            let s = Spectrum::new(AxisKind::WavelengthNm, bins).unwrap();
            let edges = s.bin_edges();
            let (lo, hi) = (edges[0], edges[n]);
            let mut inner: Vec<f64> = cuts.iter().map(|c| lo + c * (hi - lo)).collect();
            inner.sort_by(|a, b| a.total_cmp(b));
            inner.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let mut target = vec![lo];
            target.extend(inner.into_iter().filter(|v| *v > lo + 1e-6 && *v < hi - 1e-6));
            target.push(hi);
            prop_assume!(target.len() >= 9);
            let r = rebin(&s, &target).unwrap();
            let before = s.total_counts();
            let after = r.total_counts();
            prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
            prop_assert!(r.bins().iter().all(|b| b.sigma >= 0.0));
        }
    }
}
