use std::path::Path;

use super::{AxisKind, Bin, Lineshape, Spectrum, SpectrumError};
use crate::table::Table;

/// Spectrum from a parsed `axis,intensity[,sigma]` table.
pub fn spectrum_from_table(table: &Table) -> Result<Spectrum, SpectrumError> {
    table.expect_columns(&["axis", "intensity"], &["sigma"])?;
    let kind: AxisKind = table
        .metadata
        .get("axis_kind")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(AxisKind::WavelengthNm);
    let has_sigma = table.columns.len() == 3;
    let bins = table
        .rows
        .iter()
        .map(|r| if has_sigma { Bin::new(r[0], r[1], r[2]) } else { Bin::poisson(r[0], r[1]) })
        .collect();
    let mut metadata = table.metadata.clone();
    metadata.insert("axis_kind".into(), kind.as_str().into());
    Spectrum::with_metadata(kind, bins, metadata)
}

pub fn spectrum_to_table(spectrum: &Spectrum) -> Table {
    let mut t = Table::new(&["axis", "intensity", "sigma"]);
    t.metadata = spectrum.metadata.clone();
    t.metadata.insert("axis_kind".into(), spectrum.axis_kind().as_str().into());
    t.rows = spectrum.bins().iter().map(|b| vec![b.axis, b.intensity, b.sigma]).collect();
    t
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum, SpectrumError> {
    spectrum_from_table(&Table::read(path)?)
}

pub fn write_spectrum(spectrum: &Spectrum, path: &Path) -> Result<(), SpectrumError> {
    Ok(spectrum_to_table(spectrum).write(path)?)
}

pub fn lineshape_to_table(l: &Lineshape) -> Table {
    let mut t = Table::new(&["delta_e_ev", "density", "sigma"]);
    t.metadata.insert("e_zpl_hint_ev".into(), format!("{}", l.e_zpl_hint));
    t.rows = (0..l.len()).map(|i| vec![l.delta_e[i], l.density[i], l.sigma[i]]).collect();
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_without_sigma_column() {
        let mut text = String::from("# axis_kind=energy_eV\n# temperature_K=4\naxis,intensity\n");
        for i in 0..8 {
            text.push_str(&format!("{},{}\n", 1.5 + 0.01 * i as f64, 4.0 * i as f64));
        }
        let s = spectrum_from_table(&Table::parse(&text).unwrap()).unwrap();
        assert_eq!(s.axis_kind(), AxisKind::EnergyEv);
        assert_eq!(s.temperature_k().unwrap(), Some(4.0));
        assert_eq!(s.bins()[1].sigma, 2.0);
    }

    #[test]
    fn rejects_wrong_header_and_axis_kind() {
        let bad = Table::parse("x,y\n1,2\n").unwrap();
        assert!(spectrum_from_table(&bad).is_err());
        let bad = Table::parse("# axis_kind=frequency\naxis,intensity\n1,2\n").unwrap();
        assert!(matches!(spectrum_from_table(&bad), Err(SpectrumError::BadMetadata { .. })));
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = Spectrum::from_arrays(
            AxisKind::WavelengthNm,
            &(0..9).map(|i| 700.0 + 0.1 * i as f64).collect::<Vec<_>>(),
            &(0..9).map(|i| (i as f64).sqrt() * 1.1).collect::<Vec<_>>(),
            None,
        )
        .unwrap();
        write_spectrum(&s, &path).unwrap();
        let back = read_spectrum(&path).unwrap();
        assert_eq!(back.bins(), s.bins());
    }
}
