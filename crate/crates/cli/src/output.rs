//! CSV and JSON emitters. Every CSV is read back against its header before
//! the command reports success.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use pcqed_core::{BandPoint, FourierCoefficients, IonizationRow, MassCorrection};

pub const BANDS_HEADER: [&str; 5] = ["k_rho_invnm", "k_z_invnm", "pol", "band", "omega_eV"];
pub const FOURIER_HEADER: [&str; 5] = ["m", "G_invnm", "re_E", "im_E", "pol"];
pub const TABLE_HEADER: [&str; 5] = ["symbol", "I_vac_eV", "delta_eV", "I_pc_eV", "flag"];
pub const DISPERSION_HEADER: [&str; 2] = ["omega_eV", "n"];
pub const SWEEP_HEADER: [&str; 9] = [
    "label",
    "n_h",
    "n_bar",
    "delta_E_eV",
    "abs_delta_E_eV",
    "A_eV",
    "B_eV",
    "tol_achieved",
    "error",
];

fn create(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file)))
}

/// Writes `rows` under `header`, then parses the file back.
fn write_csv<R: Serialize + for<'de> Deserialize<'de>>(
    path: &Path,
    header: &[&str],
    rows: &[R],
) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    let back: Vec<R> = read_csv(path, header)?;
    ensure!(back.len() == rows.len(), "{}: wrote {} rows, read {}", path.display(), rows.len(), back.len());
    Ok(())
}

/// Reads a CSV whose header must equal `header`.
pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> anyhow::Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        bail!("{}: header {:?}, expected {:?}", path.display(), got, header);
    }
    let mut out = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        out.push(rec.with_context(|| format!("{}:{}", path.display(), i + 2))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub k_rho_invnm: f64,
    pub k_z_invnm: f64,
    pub pol: String,
    pub band: usize,
    #[serde(rename = "omega_eV")]
    pub omega_ev: f64,
}

impl From<&BandPoint> for BandRow {
    fn from(p: &BandPoint) -> Self {
        Self {
            k_rho_invnm: p.k_rho,
            k_z_invnm: p.k_z,
            pol: p.pol.to_string(),
            band: p.band,
            omega_ev: p.omega,
        }
    }
}

pub fn write_bands(path: &Path, points: &[BandPoint]) -> anyhow::Result<()> {
    let rows: Vec<BandRow> = points.iter().map(BandRow::from).collect();
    write_csv(path, &BANDS_HEADER, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierRow {
    pub m: i64,
    #[serde(rename = "G_invnm")]
    pub g_invnm: f64,
    #[serde(rename = "re_E")]
    pub re_e: f64,
    #[serde(rename = "im_E")]
    pub im_e: f64,
    pub pol: String,
}

pub fn write_fourier(path: &Path, fc: &FourierCoefficients) -> anyhow::Result<()> {
    let m_max = fc.m_max as i64;
    let rows: Vec<FourierRow> = (-m_max..=m_max)
        .map(|m| {
            let c = fc.at(m);
            FourierRow {
                m,
                g_invnm: fc.g[(m + m_max) as usize],
                re_e: c.re,
                im_e: c.im,
                pol: fc.bandpoint.pol.to_string(),
            }
        })
        .collect();
    write_csv(path, &FOURIER_HEADER, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub symbol: String,
    #[serde(rename = "I_vac_eV")]
    pub i_vac_ev: f64,
    #[serde(rename = "delta_eV")]
    pub delta_ev: f64,
    #[serde(rename = "I_pc_eV")]
    pub i_pc_ev: f64,
    pub flag: String,
}

impl From<&IonizationRow> for TableRow {
    fn from(r: &IonizationRow) -> Self {
        Self {
            symbol: r.symbol.clone(),
            i_vac_ev: r.i_vac,
            delta_ev: r.delta,
            i_pc_ev: r.i_pc,
            flag: r.flag().to_string(),
        }
    }
}

pub fn write_table(path: &Path, rows: &[IonizationRow]) -> anyhow::Result<()> {
    let rows: Vec<TableRow> = rows.iter().map(TableRow::from).collect();
    write_csv(path, &TABLE_HEADER, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    #[serde(rename = "omega_eV")]
    pub omega_ev: f64,
    pub n: f64,
}

pub fn write_dispersion(path: &Path, rows: &[DispersionRow]) -> anyhow::Result<()> {
    write_csv(path, &DISPERSION_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub n_h: Option<f64>,
    pub n_bar: Option<f64>,
    #[serde(rename = "delta_E_eV")]
    pub delta_e_ev: Option<f64>,
    #[serde(rename = "abs_delta_E_eV")]
    pub abs_delta_e_ev: Option<f64>,
    #[serde(rename = "A_eV")]
    pub a_ev: Option<f64>,
    #[serde(rename = "B_eV")]
    pub b_ev: Option<f64>,
    pub tol_achieved: Option<f64>,
    pub error: String,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    write_csv(path, &SWEEP_HEADER, rows)
}

/// Convergence report of a mass run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    #[serde(rename = "A_eV")]
    pub a_ev: f64,
    #[serde(rename = "B_eV")]
    pub b_ev: f64,
    pub tol_achieved: f64,
    pub bands_included: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "vacuum_term_eV")]
    pub vacuum_term_ev: f64,
    #[serde(rename = "tail_estimate_eV")]
    pub tail_estimate_ev: Option<f64>,
    pub scheme: String,
    pub converged: bool,
    #[serde(rename = "closed_form_eV")]
    pub closed_form_ev: f64,
    pub refinement_level: u32,
    pub nodes: usize,
    pub longitudinal_residual: f64,
    pub parseval_max: f64,
    #[serde(rename = "per_band_eV")]
    pub per_band_ev: Vec<(f64, f64)>,
}

impl MassReport {
    pub fn new(mc: &MassCorrection, converged: bool) -> Self {
        Self {
            a_ev: mc.a,
            b_ev: mc.b,
            tol_achieved: mc.tol_achieved,
            bands_included: mc.bands_included,
            m: mc.m_max,
            vacuum_term_ev: mc.vacuum_term,
            tail_estimate_ev: mc.tail_estimate,
            scheme: mc.scheme.tag().to_string(),
            converged,
            closed_form_ev: mc.closed_form,
            refinement_level: mc.refinement_level,
            nodes: mc.nodes,
            longitudinal_residual: mc.longitudinal_residual,
            parseval_max: mc.parseval_max,
            per_band_ev: mc.per_band.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcqed_core::{builtin_atoms, pc_ionization_table, Polarization};

    #[test]
    fn bands_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let pts = [BandPoint { k_rho: 0.0, k_z: 0.01, band: 1, pol: Polarization::TM, omega: 1.25 }];
        write_bands(&p, &pts).unwrap();
        let back: Vec<BandRow> = read_csv(&p, &BANDS_HEADER).unwrap();
        assert_eq!(back, vec![BandRow::from(&pts[0])]);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("k_rho_invnm,k_z_invnm,pol,band,omega_eV\n"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table(&p, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "symbol,I_vac_eV,delta_eV,I_pc_eV,flag\n");
    }

    #[test]
    fn table_values_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = pc_ionization_table(&builtin_atoms(), -1.82).unwrap();
        write_table(&p, &rows).unwrap();
        let back: Vec<TableRow> = read_csv(&p, &TABLE_HEADER).unwrap();
        assert_eq!(back[0].symbol, "H");
        assert_eq!(back[0].i_pc_ev, rows[0].i_pc);
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "omega,n\n1,2\n").unwrap();
        assert!(read_csv::<DispersionRow>(&p, &DISPERSION_HEADER).is_err());
    }
}
