//! Ionization-energy shifts from the mass coefficients.

use serde::{Deserialize, Serialize};

use crate::bands::LayerStack;
use crate::error::{Error, Result};
use crate::mass::{ab_coefficients, MassCorrection, QuadratureConfig, RegularizationConfig};
use crate::units::{cos2_expectation, AtomRecord, AtomicState, K_B};

/// Relative size below which `B` is reported as zero.
const B_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BSign {
    Negative,
    Positive,
    ZeroWithinTol,
}

impl BSign {
    fn of(mc: &MassCorrection) -> Self {
        let scale = mc.a.abs().max(mc.b.abs()).max(1e-300);
        if mc.b.abs() <= B_ZERO_TOL * scale {
            BSign::ZeroWithinTol
        } else if mc.b < 0.0 {
            BSign::Negative
        } else {
            BSign::Positive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    General,
    ClosedForm,
}

impl Route {
    pub fn tag(&self) -> &'static str {
        match self {
            Route::General => "general",
            Route::ClosedForm => "closed_form",
        }
    }
}

/// Energies in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonizationResult {
    pub delta_e_ion: f64,
    pub delta_m_min: f64,
    pub delta_m_expect: f64,
    pub b_sign: BSign,
    pub route: Route,
}

/// Smallest `A + cos²Θ·B` over directions.
pub fn delta_m_min(mc: &MassCorrection) -> f64 {
    mc.a + mc.b.min(0.0)
}

/// `δm_min − ⟨δm⟩` in the given orbital state.
pub fn ionization_correction_general(mc: &MassCorrection, state: AtomicState) -> IonizationResult {
    let min = delta_m_min(mc);
    let expect = mc.a + cos2_expectation(state) * mc.b;
    IonizationResult {
        // written so that A drops out exactly
        delta_e_ion: mc.b.min(0.0) - cos2_expectation(state) * mc.b,
        delta_m_min: min,
        delta_m_expect: expect,
        b_sign: BSign::of(mc),
        route: Route::General,
    }
}

/// s-state shift from the independently accumulated integrand, which equals
/// `(2/3)B` and is only meaningful when the minimum lies along the axis.
///
/// For `B > 0` the general route is returned instead, with a warning.
pub fn closed_form_from(mc: &MassCorrection) -> IonizationResult {
    let sign = BSign::of(mc);
    if sign == BSign::Positive {
        log::warn!(
            "B = {:.4e} eV > 0: closed form does not apply, reporting the general route",
            mc.b
        );
        return ionization_correction_general(mc, AtomicState::s_state());
    }
    IonizationResult {
        delta_e_ion: mc.closed_form,
        delta_m_min: delta_m_min(mc),
        delta_m_expect: delta_m_min(mc) - mc.closed_form,
        b_sign: sign,
        route: Route::ClosedForm,
    }
}

/// Runs the mass quadrature and evaluates the closed-form s-state shift.
pub fn ionization_correction_closed_form(
    stack: &LayerStack,
    quad: &QuadratureConfig,
    reg: &RegularizationConfig,
) -> Result<IonizationResult> {
    let mc = ab_coefficients(stack, quad, reg)?;
    Ok(closed_form_from(&mc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonizationRow {
    pub symbol: String,
    pub i_vac: f64,
    pub delta: f64,
    pub i_pc: f64,
    /// Set when the shifted energy is no longer positive.
    pub unbound: bool,
}

impl IonizationRow {
    pub fn flag(&self) -> &'static str {
        if self.unbound {
            "unbound"
        } else {
            "ok"
        }
    }
}

pub fn pc_ionization_table(atoms: &[AtomRecord], delta_e_ion: f64) -> Result<Vec<IonizationRow>> {
    if !delta_e_ion.is_finite() {
        return Err(Error::validation(format!("non-finite energy shift {delta_e_ion}")));
    }
    Ok(atoms
        .iter()
        .map(|a| {
            let i_pc = a.ionization_energy_vacuum + delta_e_ion;
            if i_pc <= 0.0 {
                log::warn!("{}: shifted ionization energy {i_pc:.3} eV is not positive", a.symbol);
            }
            IonizationRow {
                symbol: a.symbol.clone(),
                i_vac: a.ionization_energy_vacuum,
                delta: delta_e_ion,
                i_pc,
                unbound: i_pc <= 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFactorInput {
    /// Change of activation energy, eV.
    pub delta_ea: f64,
    /// Kelvin.
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFactor {
    /// May overflow to infinity; `log10` stays finite.
    pub factor: f64,
    pub log10: f64,
}

pub fn arrhenius_factor(input: RateFactorInput) -> Result<RateFactor> {
    if !(input.temperature > 0.0) || !input.temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {}", input.temperature)));
    }
    if !input.delta_ea.is_finite() {
        return Err(Error::domain("activation-energy change must be finite"));
    }
    let x = -input.delta_ea / (K_B * input.temperature);
    Ok(RateFactor {
        factor: x.exp(),
        log10: x / std::f64::consts::LN_10,
    })
}
