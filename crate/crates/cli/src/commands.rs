use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use pcqed_core::{
    ab_coefficients, arrhenius_factor, average_index, azimuthal_reduction_check, band_surface, closed_form_from,
    dispersion::hfo2_like, dispersion_residual, fourier_coefficients, ionization_correction_general,
    mode_profile, pc_ionization_table, solve_bands, unit_cell_transfer_matrix, AtomicState, AzimuthalSample,
    BandPoint, DispersionModel, Error, IonizationResult, LayerStack, MassCorrection, Polarization,
    RateFactorInput,
};

use pcqed_core::units::HBAR_C;

use crate::config::{LoadedConfig, SweepConfig};
use crate::output::{self, DispersionRow, MassReport, SweepRow};

/// Lower end of the window used for the averaged index of dispersive hosts, eV.
pub const AVERAGE_FROM: f64 = 1.0;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Outputs were written but some numerical target was missed.
    Numerical,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Numerical => 3,
        }
    }
}

fn pick(out: Option<&Path>, default: &Path) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| default.to_path_buf())
}

/// Mass coefficients, tolerating non-convergence. The flag tells which.
pub fn mass_or_best(loaded: &LoadedConfig, stack: &LayerStack) -> pcqed_core::Result<(MassCorrection, bool)> {
    let c = &loaded.config;
    match ab_coefficients(stack, &c.quadrature, &c.regularization) {
        Ok(mc) => Ok((mc, true)),
        Err(Error::NotConverged { best, achieved }) => {
            log::warn!("quadrature stopped at relative change {achieved:.3e}");
            Ok((*best, false))
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_bands(loaded: &LoadedConfig, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let c = &loaded.config;
    let stack = &loaded.stack;
    let omega_max = c.regularization.omega_max;
    let edge = stack.brillouin_zone().edge();
    let k_rho = c.bands.k_rho.points();
    let k_z = match &c.bands.k_z {
        Some(g) => g.points(),
        None => (0..33).map(|i| edge * i as f64 / 32.0).collect(),
    };
    let mut points: Vec<BandPoint> = Vec::new();
    for &pol in &c.bands.polarizations {
        let surf = band_surface(stack, pol, &k_rho, &k_z, omega_max)?;
        points.extend(surf.points().copied());
    }
    let path = pick(out, &c.outputs.bands);
    output::write_bands(&path, &points)?;
    log::info!("{} band points -> {}", points.len(), path.display());

    let rows: Vec<DispersionRow> = (1..=200)
        .map(|i| {
            let w = omega_max * i as f64 / 200.0;
            DispersionRow { omega_ev: w, n: stack.n_h(w) }
        })
        .collect();
    output::write_dispersion(&c.outputs.dispersion, &rows)?;

    if let Some(d) = &c.bands.fourier_dump {
        let roots = solve_bands(stack, d.pol, d.k_rho, d.k_z, omega_max)?;
        let bp = roots
            .get(d.band.wrapping_sub(1))
            .with_context(|| format!("band {} not found below {omega_max} eV", d.band))?;
        let fc = fourier_coefficients(&mode_profile(stack, bp)?, d.m_max)?;
        output::write_fourier(&c.outputs.fourier, &fc)?;
    }
    Ok(Outcome::Success)
}

pub fn cmd_mass(loaded: &LoadedConfig, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let (mc, converged) = mass_or_best(loaded, &loaded.stack)?;
    let path = pick(out, &loaded.config.outputs.mass);
    output::write_json(&path, &MassReport::new(&mc, converged))?;
    println!(
        "A = {:.6} eV  B = {:.6} eV  (tol {:.2e}, {} bands, {})",
        mc.a,
        mc.b,
        mc.tol_achieved,
        mc.bands_included,
        if converged { "converged" } else { "NOT converged" }
    );
    Ok(if converged { Outcome::Success } else { Outcome::Numerical })
}

pub fn cmd_ionize(loaded: &LoadedConfig, out: Option<&Path>, delta_e: Option<f64>) -> anyhow::Result<Outcome> {
    let c = &loaded.config;
    let mut outcome = Outcome::Success;
    let delta = match delta_e.or(c.ionize.delta_e) {
        Some(d) => {
            println!("delta E_ion = {d:.4} eV (given)");
            d
        }
        None => {
            let (mc, converged) = mass_or_best(loaded, &loaded.stack)?;
            if !converged {
                outcome = Outcome::Numerical;
            }
            let general = ionization_correction_general(&mc, AtomicState::s_state());
            let chosen = closed_form_from(&mc);
            summarize(&chosen, &general);
            chosen.delta_e_ion
        }
    };
    let rows = pc_ionization_table(&loaded.atoms, delta)?;
    let path = pick(out, &c.outputs.table);
    output::write_table(&path, &rows)?;
    let rate = arrhenius_factor(RateFactorInput {
        delta_ea: delta,
        temperature: c.ionize.temperature,
    })?;
    println!(
        "rate factor at {} K: 10^{:.2}  ({} atoms -> {})",
        c.ionize.temperature,
        rate.log10,
        rows.len(),
        path.display()
    );
    for r in rows.iter().filter(|r| r.unbound) {
        println!("warning: {} is unbound ({:.3} eV)", r.symbol, r.i_pc);
    }
    Ok(outcome)
}

fn summarize(chosen: &IonizationResult, general: &IonizationResult) {
    println!(
        "delta E_ion = {:.6} eV  route {}  B {:?}",
        chosen.delta_e_ion,
        chosen.route.tag(),
        chosen.b_sign
    );
    println!("  general route {:.6} eV", general.delta_e_ion);
}

/// One point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub n_h: Option<f64>,
    pub model: DispersionModel,
}

pub fn sweep_points(sweep: &SweepConfig) -> anyhow::Result<Vec<SweepPoint>> {
    let mut pts = Vec::new();
    let mut consts = sweep.n_h.as_ref().map(|r| r.points()).unwrap_or_default();
    consts.extend(&sweep.values);
    for n in consts {
        pts.push(SweepPoint {
            label: format!("n={n}"),
            n_h: Some(n),
            model: DispersionModel::constant(n)?,
        });
    }
    for &(a, g) in &sweep.metamaterial {
        pts.push(SweepPoint {
            label: format!("a={a},g={g}"),
            n_h: None,
            model: DispersionModel::metamaterial(a, g, hfo2_like())?,
        });
    }
    Ok(pts)
}

pub fn default_sweep() -> SweepConfig {
    SweepConfig {
        n_h: None,
        values: vec![2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 18.0],
        metamaterial: Vec::new(),
        d_h_fraction: None,
    }
}

pub fn sweep_row(loaded: &LoadedConfig, sweep: &SweepConfig, pt: &SweepPoint) -> SweepRow {
    let c = &loaded.config;
    let omega_max = c.regularization.omega_max;
    let period = c.stack.d_h + c.stack.d_l;
    let (d_h, d_l) = match sweep.d_h_fraction {
        Some(f) => (f * period, (1.0 - f) * period),
        None => (c.stack.d_h, c.stack.d_l),
    };
    let mut row = SweepRow {
        label: pt.label.clone(),
        n_h: pt.n_h,
        n_bar: None,
        delta_e_ev: None,
        abs_delta_e_ev: None,
        a_ev: None,
        b_ev: None,
        tol_achieved: None,
        error: String::new(),
    };
    let n_bar = match pt.n_h {
        Some(n) => Ok(n),
        None => average_index(&pt.model, AVERAGE_FROM, omega_max).map(|a| a.n_bar),
    };
    let result = n_bar.and_then(|n| {
        row.n_bar = Some(n);
        let stack = LayerStack::new(d_h, d_l, pt.model.clone())?;
        mass_or_best(loaded, &stack)
    });
    match result {
        Ok((mc, converged)) => {
            let r = ionization_correction_general(&mc, AtomicState::s_state());
            row.delta_e_ev = Some(r.delta_e_ion);
            row.abs_delta_e_ev = Some(r.delta_e_ion.abs());
            row.a_ev = Some(mc.a);
            row.b_ev = Some(mc.b);
            row.tol_achieved = Some(mc.tol_achieved);
            if !converged {
                row.error = "not converged".into();
            }
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

pub fn cmd_sweep(loaded: &LoadedConfig, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let c = &loaded.config;
    let sweep = c.sweep.clone().unwrap_or_else(default_sweep);
    sweep.validate()?;
    let mut rows = Vec::new();
    for pt in sweep_points(&sweep)? {
        let row = sweep_row(loaded, &sweep, &pt);
        match row.abs_delta_e_ev {
            Some(v) => println!("{:<16} |dE| = {v:.6} eV {}", row.label, row.error),
            None => println!("{:<16} failed: {}", row.label, row.error),
        }
        rows.push(row);
    }
    let path = pick(out, &c.outputs.sweep);
    output::write_sweep(&path, &rows)?;
    let clean = rows.iter().all(|r| r.error.is_empty());
    Ok(if clean { Outcome::Success } else { Outcome::Numerical })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckItem {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

/// Invariant suite on the configured stack.
pub fn run_checks(loaded: &LoadedConfig) -> anyhow::Result<Vec<CheckItem>> {
    let stack = &loaded.stack;
    let omega_max = loaded.config.regularization.omega_max;
    let edge = stack.brillouin_zone().edge();
    let w_max = omega_max / HBAR_C;
    let k_z_pts: Vec<f64> = (0..5).map(|i| edge * (0.1 + 0.2 * i as f64)).collect();
    let k_rho_pts: Vec<f64> = (0..4).map(|i| w_max * 0.3 * i as f64).collect();

    let mut det = 0.0f64;
    for i in 1..=20 {
        let omega = omega_max * i as f64 / 20.0;
        for &k_rho in &k_rho_pts {
            for pol in Polarization::BOTH {
                let m = unit_cell_transfer_matrix(stack, pol, omega, k_rho);
                let size = m.m.iter().flatten().fold(1.0f64, |a, &b| a.max(b.abs()));
                det = det.max((m.det() - 1.0).abs() / (size * size));
            }
        }
    }

    let (mut residual, mut mirror, mut continuity, mut parseval) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for pol in Polarization::BOTH {
        for &k_rho in &k_rho_pts {
            for &k_z in &k_z_pts {
                let roots = solve_bands(stack, pol, k_rho, k_z, omega_max)?;
                let mirrored = solve_bands(stack, pol, k_rho, -k_z, omega_max)?;
                if roots.len() != mirrored.len() {
                    mirror = f64::INFINITY;
                }
                for (a, b) in roots.iter().zip(&mirrored) {
                    mirror = mirror.max((a.omega - b.omega).abs());
                }
                for bp in &roots {
                    residual = residual.max(dispersion_residual(stack, pol, bp.omega, k_rho, k_z).abs());
                    let p = mode_profile(stack, bp)?;
                    continuity = continuity.max(p.continuity_residual());
                    parseval = parseval.max(fourier_coefficients(&p, 64)?.parseval_residual);
                }
            }
        }
    }

    let samples: Vec<AzimuthalSample> = (0..100)
        .map(|i| {
            let t = i as f64;
            AzimuthalSample {
                k_rho: w_max * (0.05 + 0.9 * ((t * 0.618_034) % 1.0)),
                k_gz: w_max * (2.0 * ((t * 0.414_214) % 1.0) - 1.0),
                theta: std::f64::consts::PI * ((t * 0.732_051) % 1.0),
            }
        })
        .collect();
    let az = azimuthal_reduction_check(&samples);

    Ok(vec![
        CheckItem::new("transfer_det", det, 1e-12),
        CheckItem::new("root_residual", residual, 1e-10),
        CheckItem::new("kz_mirror", mirror, 0.0),
        CheckItem::new("continuity", continuity, 1e-10),
        CheckItem::new("parseval_m64", parseval, 1e-8),
        CheckItem::new("azimuthal", az.max_te_error.max(az.max_tm_error), 1e-10),
        CheckItem::new("azimuthal_cross", az.max_cross_term, 1e-10),
    ])
}

pub fn cmd_check(loaded: &LoadedConfig, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let items = run_checks(loaded)?;
    for it in &items {
        println!(
            "{:<16} {:>10.3e} (tol {:.0e}) {}",
            it.name,
            it.worst,
            it.tolerance,
            if it.passed { "ok" } else { "FAIL" }
        );
    }
    output::write_json(&pick(out, &loaded.config.outputs.check), &items)?;
    Ok(if items.iter().all(|i| i.passed) { Outcome::Success } else { Outcome::Numerical })
}
