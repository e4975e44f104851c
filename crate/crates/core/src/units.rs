//! Physical constants, unit conversions, reference atomic data and the
//! angular expectation values shared by the rest of the crate.
//!
//! Energies are carried in eV and lengths in nm. Wavenumbers are in nm⁻¹ and
//! convert to energies through ħc.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fine-structure constant (CODATA 2018).
pub const ALPHA: f64 = 7.297_352_5693e-3;
/// ħc in eV·nm.
pub const HBAR_C: f64 = 197.326_980_4;
/// Boltzmann constant in eV/K.
pub const K_B: f64 = 8.617_333_262e-5;
/// Molar gas constant in J/(mol·K). Only used when reporting Arrhenius factors.
pub const R_GAS: f64 = 8.314_462_618;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub alpha: f64,
    pub hbar_c: f64,
    pub k_b: f64,
    pub r_gas: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            alpha: ALPHA,
            hbar_c: HBAR_C,
            k_b: K_B,
            r_gas: R_GAS,
        }
    }
}

/// Converts a photon energy (eV) into a vacuum wavenumber (nm⁻¹).
pub fn energy_to_wavenumber(energy: f64) -> Result<f64> {
    if !(energy >= 0.0) || !energy.is_finite() {
        return Err(Error::domain(format!(
            "energy must be finite and non-negative, got {energy}"
        )));
    }
    Ok(energy / HBAR_C)
}

pub fn wavenumber_to_energy(k: f64) -> Result<f64> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::domain(format!(
            "wavenumber must be finite and non-negative, got {k}"
        )));
    }
    Ok(k * HBAR_C)
}

/// Vacuum electromagnetic mass with a sharp cutoff, `(4α/3π)·k0`.
///
/// `k0` is given in energy units (eV) and so is the result.
pub fn vacuum_mass_correction(k0: f64) -> Result<f64> {
    if !(k0 >= 0.0) || !k0.is_finite() {
        return Err(Error::domain(format!("cutoff must be non-negative, got {k0}")));
    }
    Ok(4.0 * ALPHA / (3.0 * PI) * k0)
}

/// Orbital state `|l, m_l⟩` of the valence electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicState {
    l: u32,
    m_l: i32,
}

impl AtomicState {
    pub fn new(l: u32, m_l: i32) -> Result<Self> {
        if m_l.unsigned_abs() > l {
            return Err(Error::domain(format!("|m_l| = {} exceeds l = {l}", m_l.abs())));
        }
        Ok(Self { l, m_l })
    }

    pub const fn s_state() -> Self {
        Self { l: 0, m_l: 0 }
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn m_l(&self) -> i32 {
        self.m_l
    }
}

/// `⟨l,m|cos²θ|l,m⟩` for the spherical harmonic `Y_{l,m}`.
///
/// Closed form from the recurrence `x P_l^m = [(l−m+1) P_{l+1}^m + (l+m) P_{l−1}^m]/(2l+1)`.
pub fn cos2_expectation(state: AtomicState) -> f64 {
    let l = f64::from(state.l);
    let m2 = f64::from(state.m_l) * f64::from(state.m_l);
    (2.0 * l * l + 2.0 * l - 1.0 - 2.0 * m2) / ((2.0 * l - 1.0) * (2.0 * l + 3.0))
}

/// Electron momentum direction relative to the crystal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("polar angle {theta} outside [0, π]")));
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Cartesian unit vector with z along the crystal axis.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub symbol: String,
    /// First ionization energy in vacuum, eV.
    pub ionization_energy_vacuum: f64,
}

impl AtomRecord {
    pub fn new(symbol: impl Into<String>, ionization_energy_vacuum: f64) -> Result<Self> {
        if !(ionization_energy_vacuum > 0.0) {
            return Err(Error::validation(format!(
                "ionization energy must be positive, got {ionization_energy_vacuum}"
            )));
        }
        Ok(Self {
            symbol: symbol.into(),
            ionization_energy_vacuum,
        })
    }
}

/// Hydrogen and the alkali metals, two-decimal vacuum ionization energies (eV).
const BUILTIN_ATOMS: [(&str, f64); 7] = [
    ("H", 13.60),
    ("Li", 5.39),
    ("Na", 5.14),
    ("K", 4.34),
    ("Rb", 4.18),
    ("Cs", 3.90),
    ("Fr", 4.07),
];

pub fn builtin_atoms() -> Vec<AtomRecord> {
    BUILTIN_ATOMS
        .iter()
        .map(|&(symbol, energy)| AtomRecord {
            symbol: symbol.to_string(),
            ionization_energy_vacuum: energy,
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct AtomRow {
    symbol: String,
    #[serde(rename = "ionization_eV")]
    ionization_ev: f64,
}

/// Reads an atom table with header `symbol,ionization_eV`.
pub fn load_atom_table(path: &Path) -> Result<Vec<AtomRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["symbol", "ionization_eV"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `symbol,ionization_eV`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut atoms = Vec::new();
    for row in reader.deserialize::<AtomRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        atoms.push(AtomRecord::new(row.symbol, row.ionization_ev)?);
    }
    Ok(atoms)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::Io {
                path: path.to_path_buf(),
                source: io,
            };
        }
        unreachable!()
    }
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Associated Legendre P_l^m(x) by the standard upward recurrence in l.
    fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
        let mut pmm = 1.0;
        let s = (1.0 - x * x).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * s;
            fact += 2.0;
        }
        if l == m {
            return pmm;
        }
        let mut pmmp1 = x * f64::from(2 * m + 1) * pmm;
        if l == m + 1 {
            return pmmp1;
        }
        let mut pll = 0.0;
        for ll in (m + 2)..=l {
            pll = (x * f64::from(2 * ll - 1) * pmmp1 - f64::from(ll + m - 1) * pmm)
                / f64::from(ll - m);
            pmm = pmmp1;
            pmmp1 = pll;
        }
        pll
    }

    /// Midpoint quadrature of |Y_lm|² cos²θ over the sphere, normalization divided out.
    fn cos2_by_quadrature(l: u32, m: i32) -> f64 {
        let n = 20_000;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            let p = assoc_legendre(l, m.unsigned_abs(), x);
            num += p * p * x * x;
            den += p * p;
        }
        num / den
    }

    #[test]
    fn wavenumber_conversion() {
        assert_relative_eq!(energy_to_wavenumber(197.326_980_4).unwrap(), 1.0);
        assert_eq!(energy_to_wavenumber(0.0).unwrap(), 0.0);
        assert!((energy_to_wavenumber(10.65).unwrap() - 0.053_971_332).abs() < 1e-9);
        assert!(energy_to_wavenumber(-1.0).is_err());
    }

    #[test]
    fn conversion_round_trip() {
        for e in [1e-3, 0.5, 10.65, 1234.5] {
            let back = wavenumber_to_energy(energy_to_wavenumber(e).unwrap()).unwrap();
            assert!(((back - e) / e).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuum_mass_values() {
        assert_eq!(vacuum_mass_correction(0.0).unwrap(), 0.0);
        let k = 3.0 * PI / (4.0 * ALPHA);
        assert_relative_eq!(vacuum_mass_correction(k).unwrap(), 1.0, epsilon = 1e-14);
        assert!((vacuum_mass_correction(10.65).unwrap() - 0.032_984_036).abs() < 1e-9);
        assert!(vacuum_mass_correction(-1.0).is_err());
    }

    #[test]
    fn vacuum_mass_is_linear() {
        let base = vacuum_mass_correction(7.3).unwrap();
        for a in [0.5, 2.0, 3.0, 17.0] {
            let scaled = vacuum_mass_correction(a * 7.3).unwrap();
            assert!((scaled - a * base).abs() <= 2.0 * f64::EPSILON * scaled.abs());
        }
    }

    #[test]
    fn cos2_matches_quadrature_oracle() {
        for l in 0..=4u32 {
            for m in -(l as i32)..=(l as i32) {
                let closed = cos2_expectation(AtomicState::new(l, m).unwrap());
                let oracle = cos2_by_quadrature(l, m);
                assert!((closed - oracle).abs() < 1e-6, "l={l} m={m}: {closed} vs {oracle}");
            }
        }
        assert_relative_eq!(cos2_expectation(AtomicState::s_state()), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(cos2_expectation(AtomicState::new(1, 0).unwrap()), 0.6, epsilon = 1e-15);
        assert_relative_eq!(cos2_expectation(AtomicState::new(1, -1).unwrap()), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn cos2_sum_rule() {
        for l in 0..=4u32 {
            let sum: f64 = (-(l as i32)..=(l as i32))
                .map(|m| cos2_expectation(AtomicState::new(l, m).unwrap()))
                .sum();
            assert!((sum - f64::from(2 * l + 1) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(AtomicState::new(1, 2).is_err());
        assert!(Direction::new(-0.1, 0.0).is_err());
        assert!(AtomRecord::new("X", 0.0).is_err());
    }

    #[test]
    fn constants_match_codata() {
        let c = PhysicalConstants::default();
        assert!((c.alpha / 7.297_352_5693e-3 - 1.0).abs() < 1e-12);
        assert!((c.hbar_c / 197.326_980_4 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn atom_table_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atoms.csv");
        std::fs::write(&path, "symbol,ionization_eV\n# comment\nH,13.598\nLi,5.392\n").unwrap();
        let atoms = load_atom_table(&path).unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[1].symbol, "Li");

        std::fs::write(&path, "symbol,energy\nH,13.6\n").unwrap();
        assert!(matches!(load_atom_table(&path), Err(Error::Parse { .. })));
    }
}
