//! Photonic-crystal corrections to the electron electromagnetic mass.
//!
//! The pipeline runs bottom-up: a dispersion model for the high-index layer,
//! Bloch bands of the two-layer stack, normalized Fourier coefficients of each
//! mode, the anisotropic mass coefficients `(A, B)` by quadrature over the
//! zone, and finally ionization-energy shifts of atoms sitting in the voids.

pub mod bands;
pub mod dispersion;
pub mod error;
pub mod fields;
pub mod ionization;
pub mod mass;
pub mod quadrature;
pub mod transfer;
pub mod units;

pub use bands::{
    band_surface, dispersion_residual, mode_count, solve_bands, BandPoint, BandSolver, BandSurface,
    BrillouinZone, LayerStack, Polarization, ScanConfig,
};
pub use dispersion::{average_index, hfo2_like, load_dispersion_table, AveragedIndex, DispersionModel};
pub use error::{Error, Result};
pub use fields::{fourier_coefficients, mode_profile, BlochFieldProfile, FourierCoefficients};
pub use ionization::{
    arrhenius_factor, closed_form_from, delta_m_min, ionization_correction_closed_form,
    ionization_correction_general, pc_ionization_table, BSign, IonizationResult, IonizationRow, RateFactor,
    RateFactorInput, Route,
};
pub use mass::{
    ab_coefficients, angular_factors, azimuthal_reduction_check, delta_m, tail_estimate,
    vacuum_subtraction_term, AzimuthalReport, AzimuthalSample, MassCorrection, ModeRegion, QuadratureConfig,
    RegularizationConfig, SubtractionScheme, TailEstimate,
};
pub use transfer::{layer_axial_wavenumber, unit_cell_transfer_matrix, TransferMatrix};
pub use units::{
    builtin_atoms, cos2_expectation, energy_to_wavenumber, load_atom_table, vacuum_mass_correction,
    wavenumber_to_energy, AtomRecord, AtomicState, Direction, PhysicalConstants,
};
