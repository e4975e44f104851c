//! Bloch dispersion of a two-layer stack and enumeration of every band below
//! a frequency cutoff.
//!
//! Roots are located by a phase-adaptive scan of the scaled residual and
//! polished by a safeguarded Illinois iteration. The number of roots is
//! checked against an exact oscillation count, so a missed pair of close
//! roots triggers a finer rescan instead of a silently wrong band set.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};
use crate::transfer::{CellFns, Wave};
use crate::units::HBAR_C;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerStack {
    d_h: f64,
    d_l: f64,
    model_h: DispersionModel,
}

impl LayerStack {
    /// Thicknesses in nm. The second layer is the void, with index 1.
    pub fn new(d_h: f64, d_l: f64, model_h: DispersionModel) -> Result<Self> {
        let stack = Self { d_h, d_l, model_h };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_h > 0.0) || !(self.d_l > 0.0) || !self.d_h.is_finite() || !self.d_l.is_finite() {
            return Err(Error::validation(format!(
                "layer thicknesses must be positive, got d_h={}, d_l={}",
                self.d_h, self.d_l
            )));
        }
        self.model_h.validate()
    }

    /// Stack whose "high-index" layer is also vacuum.
    pub fn empty_lattice(d_h: f64, d_l: f64) -> Result<Self> {
        Self::new(d_h, d_l, DispersionModel::Constant { n: 1.0 })
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn d_l(&self) -> f64 {
        self.d_l
    }

    pub fn model_h(&self) -> &DispersionModel {
        &self.model_h
    }

    pub fn period(&self) -> f64 {
        self.d_h + self.d_l
    }

    pub fn brillouin_zone(&self) -> BrillouinZone {
        BrillouinZone::new(self.period())
    }

    #[inline]
    pub fn n_h(&self, omega: f64) -> f64 {
        self.model_h.index_at(omega)
    }

    /// `ε(z)` inside the unit cell, `z` in `[0, Λ)`.
    pub fn epsilon_at(&self, omega: f64, z: f64) -> f64 {
        let z = z.rem_euclid(self.period());
        if z < self.d_h {
            let n = self.n_h(omega);
            n * n
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrillouinZone {
    b_z: f64,
}

impl BrillouinZone {
    pub fn new(period: f64) -> Self {
        Self { b_z: 2.0 * PI / period }
    }

    pub fn b_z(&self) -> f64 {
        self.b_z
    }

    /// Zone edge `π/Λ`.
    pub fn edge(&self) -> f64 {
        0.5 * self.b_z
    }

    pub fn contains(&self, k_z: f64) -> bool {
        k_z.abs() <= self.edge() * (1.0 + 1e-12)
    }

    /// Maps any axial wavenumber into the first zone.
    pub fn reduce(&self, k: f64) -> f64 {
        let r = (k + self.edge()).rem_euclid(self.b_z) - self.edge();
        if r == -self.edge() {
            self.edge()
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    TE,
    TM,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::TE, Polarization::TM];

    pub fn lambda(&self) -> u8 {
        match self {
            Polarization::TE => 1,
            Polarization::TM => 2,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::TE => "TE",
            Polarization::TM => "TM",
        })
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TE" => Ok(Polarization::TE),
            "TM" => Ok(Polarization::TM),
            other => Err(Error::validation(format!("unknown polarization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub k_rho: f64,
    pub k_z: f64,
    pub band: usize,
    pub pol: Polarization,
    /// eV
    pub omega: f64,
}

/// Residual of the Bloch condition, divided by the cosh factors of any
/// evanescent layers.
///
/// Where both layers propagate this is exactly
/// `cos(k_zΛ) − [cos φ_h cos φ_l − ½(r + 1/r) sin φ_h sin φ_l]`. The positive
/// rescaling elsewhere leaves roots and signs unchanged.
pub fn dispersion_residual(
    stack: &LayerStack,
    pol: Polarization,
    omega: f64,
    k_rho: f64,
    k_z: f64,
) -> f64 {
    let cell = CellFns::new(stack, pol, omega, k_rho);
    residual_from_cell(&cell, stack.period(), k_z)
}

#[inline]
fn residual_from_cell(cell: &CellFns, period: f64, k_z: f64) -> f64 {
    let ls = cell.log_scale();
    let bloch = (k_z.abs() * period).cos();
    if ls == 0.0 {
        bloch - cell.half_trace()
    } else {
        bloch * (-ls).exp() - cell.half_trace()
    }
}

/// Number of Bloch eigenfrequencies strictly below `omega` at `(k_rho, k_z)`,
/// with the high-index material frozen at `n_h(omega)`.
///
/// Zeros of the solution with `y(0) = 0` place `omega` between two Dirichlet
/// levels, which interlace with the bands; the half-trace then picks the band
/// or gap, and the Bloch phase decides the last band.
pub fn mode_count(stack: &LayerStack, pol: Polarization, omega: f64, k_rho: f64, k_z: f64) -> usize {
    let cell = CellFns::new(stack, pol, omega, k_rho);
    count_from_cell(&cell, stack, k_z)
}

fn count_from_cell(cell: &CellFns, stack: &LayerStack, k_z: f64) -> usize {
    let (zeros_h, state) = layer_zeros(&cell.h, cell.p_h, stack.d_h, [0.0, 1.0]);
    let (zeros_l, _) = layer_zeros(&cell.l, cell.p_l, stack.d_l, state);
    let z = zeros_h + zeros_l;

    let d_scaled = cell.half_trace();
    let unit = (-cell.log_scale()).exp();
    if d_scaled.abs() <= unit {
        let d = (d_scaled / unit).clamp(-1.0, 1.0);
        let theta = (k_z.abs() * stack.period()).cos().clamp(-1.0, 1.0).acos();
        let a = d.acos();
        let band = z + 1;
        // a band sitting exactly at `omega` counts as below it
        let below = if band % 2 == 1 { a >= theta } else { a <= theta };
        z + usize::from(below)
    } else if d_scaled > 0.0 {
        if z % 2 == 0 {
            z
        } else {
            z + 1
        }
    } else if z % 2 == 1 {
        z
    } else {
        z + 1
    }
}

/// Zeros of `y` inside one layer and the (scaled) state at its far side.
fn layer_zeros(f: &crate::transfer::LayerFns, p: f64, d: f64, v: [f64; 2]) -> (usize, [f64; 2]) {
    let out = [f.c * v[0] + f.s / p * v[1], -p * f.t * v[0] + f.c * v[1]];
    let zeros = match f.wave {
        Wave::Propagating(k) => {
            let phi = v[0].atan2(v[1] / (p * k));
            let hi = ((phi + k * d) / PI).floor();
            let lo = (phi / PI).floor();
            (hi - lo).max(0.0) as usize
        }
        Wave::Evanescent(_) | Wave::Critical => {
            usize::from(v[0] * out[0] < 0.0 || (out[0] == 0.0 && v[0] != 0.0))
        }
    };
    // keep the state O(1); only signs and ratios matter
    let norm = out[0].abs().max(out[1].abs());
    let out = if norm > 0.0 { [out[0] / norm, out[1] / norm] } else { out };
    (zeros, out)
}

/// Tunables of the root scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Largest phase advance per step in any propagating layer, in units of π.
    /// Also sets the frequency cap as this fraction of `(π/Λ)/n̄`.
    pub scan_fraction: f64,
    /// Rescans at half step before a count mismatch becomes an error.
    pub max_retries: usize,
    /// Relative bracket width at which refinement stops.
    pub rel_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            scan_fraction: 0.125,
            max_retries: 4,
            rel_tol: 1e-12,
        }
    }
}

/// A refined root together with its final bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootInfo {
    pub point: BandPoint,
    pub bracket: (f64, f64),
    pub residual: f64,
}

/// Root finder bound to one stack and one frequency cutoff.
#[derive(Debug, Clone)]
pub struct BandSolver {
    stack: LayerStack,
    omega_max: f64,
    n_bar: f64,
    config: ScanConfig,
}

impl BandSolver {
    pub fn new(stack: LayerStack, omega_max: f64, config: ScanConfig) -> Result<Self> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return Err(Error::domain(format!("omega_max must be positive, got {omega_max}")));
        }
        if !(config.scan_fraction > 0.0 && config.scan_fraction <= 0.5) {
            return Err(Error::validation(format!(
                "scan_fraction {} outside (0, 0.5]",
                config.scan_fraction
            )));
        }
        if !(config.rel_tol > 0.0) {
            return Err(Error::validation("rel_tol must be positive"));
        }
        let n_bar = stack.model_h.max_index(omega_max).max(1.0);
        Ok(Self {
            stack,
            omega_max,
            n_bar,
            config,
        })
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// Index used for the frequency-step cap.
    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    fn check_k(&self, k_rho: f64, k_z: f64) -> Result<()> {
        if !(k_rho >= 0.0) || !k_rho.is_finite() {
            return Err(Error::domain(format!("k_rho must be non-negative, got {k_rho}")));
        }
        if !self.stack.brillouin_zone().contains(k_z) {
            return Err(Error::domain(format!("k_z = {k_z} lies outside the first zone")));
        }
        Ok(())
    }

    #[inline]
    fn residual(&self, pol: Polarization, omega: f64, k_rho: f64, k_z: f64) -> f64 {
        let cell = CellFns::new(&self.stack, pol, omega, k_rho);
        residual_from_cell(&cell, self.stack.period(), k_z)
    }

    /// All band points with `0 < ω ≤ ω_max`, ascending.
    pub fn solve(&self, pol: Polarization, k_rho: f64, k_z: f64) -> Result<Vec<BandPoint>> {
        Ok(self
            .solve_detailed(pol, k_rho, k_z)?
            .into_iter()
            .map(|r| r.point)
            .collect())
    }

    pub fn solve_detailed(&self, pol: Polarization, k_rho: f64, k_z: f64) -> Result<Vec<RootInfo>> {
        self.check_k(k_rho, k_z)?;
        let w_lo = self.omega_max * 1e-12;
        let expected = self.expected_roots(pol, w_lo, k_rho, k_z);
        let mut found = 0;
        for retry in 0..=self.config.max_retries {
            let refine = 0.5f64.powi(retry as i32);
            let roots = self.scan(pol, k_rho, k_z, w_lo, refine);
            if roots.len() == expected {
                return Ok(roots
                    .into_iter()
                    .enumerate()
                    .map(|(i, (omega, bracket, residual))| RootInfo {
                        point: BandPoint {
                            k_rho,
                            k_z,
                            band: i + 1,
                            pol,
                            omega,
                        },
                        bracket,
                        residual,
                    })
                    .collect());
            }
            log::debug!(
                "{pol} k_rho={k_rho} k_z={k_z}: {} roots, expected {expected}; rescanning",
                roots.len()
            );
            found = roots.len();
        }
        Err(Error::RootCount {
            found,
            expected,
            k_rho,
            k_z,
            retries: self.config.max_retries,
        })
    }

    fn expected_roots(&self, pol: Polarization, w_lo: f64, k_rho: f64, k_z: f64) -> usize {
        let hi = mode_count(&self.stack, pol, self.omega_max, k_rho, k_z);
        let lo = mode_count(&self.stack, pol, w_lo, k_rho, k_z);
        hi.saturating_sub(lo)
    }

    /// Frequency step from the current point so no layer phase advances by
    /// more than the configured fraction of π.
    fn step(&self, omega: f64, k_rho: f64, refine: f64) -> f64 {
        let frac = self.config.scan_fraction * refine;
        let dpsi = PI * frac;
        let cap = frac * (PI / self.stack.period()) / self.n_bar * HBAR_C;
        let w = omega / HBAR_C;
        let n_h = self.stack.n_h(omega);
        let mut next = omega + cap;
        for (n, d) in [(n_h, self.stack.d_h), (1.0, self.stack.d_l)] {
            let q = (n * w) * (n * w) - k_rho * k_rho;
            let psi = q.signum() * q.abs().sqrt() * d;
            let target = if psi < -PI { -PI } else { psi + dpsi };
            let q_t = target.signum() * target * target / (d * d) + k_rho * k_rho;
            let w_t = q_t.max(0.0).sqrt() / n * HBAR_C;
            if w_t > omega {
                next = next.min(w_t);
            }
        }
        (next - omega).max(omega * 1e-10).max(1e-300)
    }

    fn scan(
        &self,
        pol: Polarization,
        k_rho: f64,
        k_z: f64,
        w_lo: f64,
        refine: f64,
    ) -> Vec<(f64, (f64, f64), f64)> {
        let f = |w: f64| self.residual(pol, w, k_rho, k_z);
        let mut roots = Vec::new();
        let mut a = w_lo;
        let mut fa = f(a);
        while a < self.omega_max {
            let b = (a + self.step(a, k_rho, refine)).min(self.omega_max);
            let fb = f(b);
            if fa * fb < 0.0 {
                roots.push(self.refine_root(&f, a, b, fa, fb));
            } else if fa != 0.0 && fb != 0.0 {
                if let Some((x, fx)) = find_hidden_sign_change(&f, a, b, fa, fb) {
                    roots.push(self.refine_root(&f, a, x, fa, fx));
                    roots.push(self.refine_root(&f, x, b, fx, fb));
                }
            }
            if fb == 0.0 {
                roots.push((b, (b, b), 0.0));
            }
            a = b;
            fa = fb;
        }
        roots
    }

    fn refine_root(
        &self,
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
    ) -> (f64, (f64, f64), f64) {
        refine_bracket(f, a, b, fa, fb, self.config.rel_tol)
    }

    /// In-plane wavenumbers at which some band crosses `ω_max`, ascending.
    ///
    /// These are roots in `k_ρ` of the residual at fixed `ω_max`; they become
    /// panel breakpoints for the quadrature. A count mismatch against the
    /// oscillation count is logged, not fatal.
    pub fn k_rho_cutoffs(&self, pol: Polarization, k_z: f64) -> Result<Vec<f64>> {
        self.check_k(0.0, k_z)?;
        let w = self.omega_max / HBAR_C;
        let n_max = self.stack.n_h(self.omega_max);
        let k_end = n_max * w;
        let expected = mode_count(&self.stack, pol, self.omega_max, 0.0, k_z);
        let g = |k: f64| self.residual(pol, self.omega_max, k, k_z);
        let mut best = Vec::new();
        for retry in 0..=self.config.max_retries {
            let frac = self.config.scan_fraction * 0.5f64.powi(retry as i32);
            let mut grid = vec![0.0, k_end];
            for (n, d) in [(n_max, self.stack.d_h), (1.0, self.stack.d_l)] {
                let big = n * w;
                let du = PI * frac / d;
                let steps = (big / du).ceil() as usize;
                for i in 0..=steps {
                    let u = (i as f64 * du).min(big);
                    grid.push((big * big - u * u).max(0.0).sqrt());
                }
            }
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let mut roots = Vec::new();
            let mut fa = g(grid[0]);
            for win in grid.windows(2) {
                let (a, b) = (win[0], win[1]);
                let fb = g(b);
                if fa * fb < 0.0 {
                    roots.push(refine_bracket(&g, a, b, fa, fb, self.config.rel_tol).0);
                } else if fa != 0.0 && fb != 0.0 {
                    if let Some((x, fx)) = find_hidden_sign_change(&g, a, b, fa, fb) {
                        roots.push(refine_bracket(&g, a, x, fa, fx, self.config.rel_tol).0);
                        roots.push(refine_bracket(&g, x, b, fx, fb, self.config.rel_tol).0);
                    }
                }
                if fb == 0.0 && b > 0.0 {
                    roots.push(b);
                }
                fa = fb;
            }
            if roots.len() == expected {
                return Ok(roots);
            }
            best = roots;
        }
        log::warn!(
            "{pol} k_z={k_z}: found {} k_rho cutoffs, expected {expected}",
            best.len()
        );
        Ok(best)
    }
}

/// Looks for a pair of roots inside a cell whose endpoints share a sign.
fn find_hidden_sign_change(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
) -> Option<(f64, f64)> {
    let sign = fa.signum();
    let m = 0.5 * (a + b);
    let fm = f(m);
    if fm * sign <= 0.0 {
        return Some((m, fm));
    }
    if fm.abs() >= fa.abs().min(fb.abs()) {
        return None;
    }
    // golden-section search for the minimum of sign·f
    let g = |x: f64| sign * f(x);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..60 {
        if g1 <= 0.0 {
            return Some((x1, sign * g1));
        }
        if g2 <= 0.0 {
            return Some((x2, sign * g2));
        }
        if g1 < g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        }
        if hi - lo <= 1e-14 * hi.abs() {
            break;
        }
    }
    None
}

/// Illinois false position with a forced bisection whenever a step fails to
/// halve the bracket. Returns the root, its final bracket and residual.
pub(crate) fn refine_bracket(
    f: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    rel_tol: f64,
) -> (f64, (f64, f64), f64) {
    let mut kept = 0i8;
    let mut bisect_next = false;
    for _ in 0..400 {
        let width = b - a;
        if width <= rel_tol * b.abs().max(a.abs()) {
            break;
        }
        let secant = (a * fb - b * fa) / (fb - fa);
        let x = if !bisect_next && secant > a && secant < b {
            secant
        } else {
            0.5 * (a + b)
        };
        let fx = f(x);
        if fx == 0.0 {
            return (x, (x, x), 0.0);
        }
        if fx * fa < 0.0 {
            b = x;
            fb = fx;
            if kept == -1 {
                fa *= 0.5;
            }
            kept = -1;
        } else {
            a = x;
            fa = fx;
            if kept == 1 {
                fb *= 0.5;
            }
            kept = 1;
        }
        bisect_next = (b - a) > 0.5 * width;
    }
    let fa_true = f(a);
    let fb_true = f(b);
    let (root, res) = if fa_true.abs() <= fb_true.abs() {
        (a, fa_true)
    } else {
        (b, fb_true)
    };
    (root, (a, b), res)
}

/// Convenience wrapper over [`BandSolver`] with the default scan settings.
pub fn solve_bands(
    stack: &LayerStack,
    pol: Polarization,
    k_rho: f64,
    k_z: f64,
    omega_max: f64,
) -> Result<Vec<BandPoint>> {
    BandSolver::new(stack.clone(), omega_max, ScanConfig::default())?.solve(pol, k_rho, k_z)
}

/// Band points on a `(k_rho, k_z)` grid, row-major with `k_z` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSurface {
    pub pol: Polarization,
    pub k_rho_grid: Vec<f64>,
    pub k_z_grid: Vec<f64>,
    /// One entry per grid node, in row-major order.
    pub nodes: Vec<Vec<BandPoint>>,
}

impl BandSurface {
    pub fn points(&self) -> impl Iterator<Item = &BandPoint> {
        self.nodes.iter().flatten()
    }

    pub fn at(&self, i_rho: usize, i_z: usize) -> &[BandPoint] {
        &self.nodes[i_rho * self.k_z_grid.len() + i_z]
    }
}

pub fn band_surface(
    stack: &LayerStack,
    pol: Polarization,
    k_rho_grid: &[f64],
    k_z_grid: &[f64],
    omega_max: f64,
) -> Result<BandSurface> {
    if k_rho_grid.is_empty() || k_z_grid.is_empty() {
        return Err(Error::domain("band surface grids must be non-empty"));
    }
    let solver = BandSolver::new(stack.clone(), omega_max, ScanConfig::default())?;
    let nz = k_z_grid.len();
    let nodes: Vec<Vec<BandPoint>> = (0..k_rho_grid.len() * nz)
        .into_par_iter()
        .map(|i| solver.solve(pol, k_rho_grid[i / nz], k_z_grid[i % nz]))
        .collect::<Result<_>>()?;
    Ok(BandSurface {
        pol,
        k_rho_grid: k_rho_grid.to_vec(),
        k_z_grid: k_z_grid.to_vec(),
        nodes,
    })
}

/// Extended-zone wavenumbers `|k_z + m·b_z|` in ascending order, as many as requested.
pub fn folded_wavenumbers(k_z: f64, b_z: f64, count: usize) -> Vec<f64> {
    let k = k_z.abs();
    let mut out = Vec::with_capacity(count);
    let mut m = 0.0;
    while out.len() < count {
        if m == 0.0 {
            out.push(k);
        } else {
            out.push(m * b_z - k);
            if out.len() < count {
                out.push(m * b_z + k);
            }
        }
        m += 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack(n: f64, d_h: f64, d_l: f64) -> LayerStack {
        LayerStack::new(d_h, d_l, DispersionModel::constant(n).unwrap()).unwrap()
    }

    /// Empty-lattice frequencies (eV) below the cutoff, by direct enumeration.
    fn empty_lattice_modes(period: f64, k_rho: f64, k_z: f64, omega_max: f64) -> Vec<f64> {
        let b = 2.0 * PI / period;
        let mut out = Vec::new();
        for m in -200i32..=200 {
            let kz = k_z + f64::from(m) * b;
            let w = (kz * kz + k_rho * k_rho).sqrt() * HBAR_C;
            if w <= omega_max && w > 0.0 {
                out.push(w);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn empty_lattice_residual_vanishes() {
        let s = stack(1.0, 30.0, 70.0);
        for k_z in [0.01, 0.02, 0.03] {
            let omega = k_z * HBAR_C;
            let r = dispersion_residual(&s, Polarization::TE, omega, 0.0, k_z);
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn te_equals_tm_for_unit_index() {
        let s = stack(1.0, 30.0, 70.0);
        for (w, kr, kz) in [(3.0, 0.0, 0.01), (5.0, 0.02, 0.0), (1.0, 0.03, 0.02)] {
            let a = dispersion_residual(&s, Polarization::TE, w, kr, kz);
            let b = dispersion_residual(&s, Polarization::TM, w, kr, kz);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_lattice_folding() {
        let s = stack(1.0, 50.0, 50.0);
        let bz = s.brillouin_zone();
        let k_z = 0.3 * bz.edge();
        let third = (bz.b_z() + k_z) * HBAR_C;
        let roots = solve_bands(&s, Polarization::TE, 0.0, k_z, third * 1.01).unwrap();
        let w: Vec<f64> = roots.iter().map(|p| p.omega).collect();
        let expected = [k_z, bz.b_z() - k_z, bz.b_z() + k_z].map(|k| k * HBAR_C);
        assert_eq!(w.len(), 3);
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
        }
        assert_eq!(roots.iter().map(|p| p.band).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn gap_edges_bracketed_by_dense_scan() {
        let s = stack(2.0, 100.0 / 6.0, 500.0 / 6.0);
        let edge = s.brillouin_zone().edge();
        let roots = solve_bands(&s, Polarization::TE, 0.0, edge * (1.0 - 1e-9), 12.0).unwrap();
        // dense sign-change oracle
        let mut dense = Vec::new();
        let n = 200_000;
        let mut prev = dispersion_residual(&s, Polarization::TE, 12.0 / n as f64, 0.0, edge * (1.0 - 1e-9));
        for i in 2..=n {
            let w = 12.0 * i as f64 / n as f64;
            let cur = dispersion_residual(&s, Polarization::TE, w, 0.0, edge * (1.0 - 1e-9));
            if prev * cur < 0.0 {
                dense.push(w);
            }
            prev = cur;
        }
        assert_eq!(roots.len(), dense.len());
        for (r, d) in roots.iter().zip(&dense) {
            assert!((r.omega - d).abs() < 2.0 * 12.0 / n as f64);
        }
    }

    #[test]
    fn band_count_grows_with_index() {
        let kz = 0.013;
        let count = |n: f64| {
            solve_bands(&stack(n, 50.0, 50.0), Polarization::TM, 0.0, kz, 10.65)
                .unwrap()
                .len()
        };
        let base = count(1.0) as f64;
        let two = count(2.0) as f64;
        assert!((two / base - 1.5).abs() <= 0.5, "{base} -> {two}");
        let counts: Vec<usize> = [2.0, 3.0, 5.0, 7.0].iter().map(|&n| count(n)).collect();
        assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
        assert!(counts[3] > counts[0], "{counts:?}");
    }

    #[test]
    fn zone_reduction() {
        let bz = BrillouinZone::new(100.0);
        assert!((bz.reduce(bz.b_z() + 0.01) - 0.01).abs() < 1e-15);
        assert!(bz.contains(bz.edge()));
        assert!(!bz.contains(bz.edge() * 1.01));
    }

    #[test]
    fn folded_sequence() {
        let f = folded_wavenumbers(0.2, 1.0, 5);
        assert_eq!(f, vec![0.2, 0.8, 1.2, 1.8, 2.2]);
    }

    #[test]
    fn out_of_zone_rejected() {
        let s = stack(2.0, 50.0, 50.0);
        assert!(solve_bands(&s, Polarization::TE, 0.0, 1.0, 5.0).is_err());
        assert!(solve_bands(&s, Polarization::TE, -1.0, 0.0, 5.0).is_err());
        assert!(solve_bands(&s, Polarization::TE, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cutoffs_match_band_crossings() {
        let s = stack(3.0, 40.0, 60.0);
        let solver = BandSolver::new(s.clone(), 6.0, ScanConfig::default()).unwrap();
        let kz = 0.01;
        for pol in Polarization::BOTH {
            let cuts = solver.k_rho_cutoffs(pol, kz).unwrap();
            let at0 = solver.solve(pol, 0.0, kz).unwrap().len();
            assert_eq!(cuts.len(), at0);
            for &k in &cuts {
                assert!(dispersion_residual(&s, pol, 6.0, k, kz).abs() < 1e-10);
                let below = solver.solve(pol, k * (1.0 - 1e-6), kz).unwrap().len();
                let above = solver.solve(pol, k * (1.0 + 1e-6), kz).unwrap().len();
                assert_eq!(below, above + 1);
            }
        }
    }

    #[test]
    fn surface_is_row_major() {
        let s = stack(2.0, 50.0, 50.0);
        let kr = [0.0, 0.01];
        let kz = [-0.02, 0.0, 0.02];
        let surf = band_surface(&s, Polarization::TM, &kr, &kz, 5.0).unwrap();
        assert_eq!(surf.nodes.len(), 6);
        let single = solve_bands(&s, Polarization::TM, 0.01, 0.02, 5.0).unwrap();
        assert_eq!(surf.at(1, 2), single.as_slice());
        for (a, b) in surf.at(1, 0).iter().zip(surf.at(1, 2)) {
            assert_eq!(a.omega, b.omega);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residual_even_in_kz(
            n in 1.0..8.0f64, d_h in 5.0..100.0f64, d_l in 5.0..100.0f64,
            w in 0.1..12.0f64, kr in 0.0..0.3f64, frac in 0.0..1.0f64, tm in any::<bool>(),
        ) {
            let s = stack(n, d_h, d_l);
            let pol = if tm { Polarization::TM } else { Polarization::TE };
            let kz = frac * s.brillouin_zone().edge();
            let a = dispersion_residual(&s, pol, w, kr, kz);
            let b = dispersion_residual(&s, pol, w, kr, -kz);
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!(a.is_finite());
        }

        #[test]
        fn roots_are_roots(
            n in 1.0..6.0f64, d_h in 10.0..80.0f64, d_l in 10.0..80.0f64,
            kr_frac in 0.0..1.0f64, frac in -1.0..1.0f64, tm in any::<bool>(),
        ) {
            let s = stack(n, d_h, d_l);
            let pol = if tm { Polarization::TM } else { Polarization::TE };
            let omega_max = 8.0;
            let kr = kr_frac * n * omega_max / HBAR_C;
            let kz = frac * s.brillouin_zone().edge();
            let solver = BandSolver::new(s.clone(), omega_max, ScanConfig::default()).unwrap();
            let roots = solver.solve_detailed(pol, kr, kz).unwrap();
            for r in &roots {
                prop_assert!(dispersion_residual(&s, pol, r.point.omega, kr, kz).abs() < 1e-10);
                prop_assert!(r.bracket.1 - r.bracket.0 < 1e-12 * r.point.omega);
            }
            prop_assert!(roots.windows(2).all(|w| w[1].point.omega > w[0].point.omega));
            let mirrored = solver.solve(pol, kr, -kz).unwrap();
            prop_assert_eq!(mirrored.len(), roots.len());
            for (a, b) in mirrored.iter().zip(&roots) {
                prop_assert_eq!(a.omega.to_bits(), b.point.omega.to_bits());
            }
        }

        #[test]
        fn empty_lattice_count_exact(
            period in 20.0..200.0f64, split in 0.1..0.9f64,
            kr in 0.0..0.05f64, frac in -1.0..1.0f64, omega_max in 1.0..15.0f64,
        ) {
            let s = LayerStack::empty_lattice(split * period, (1.0 - split) * period).unwrap();
            let kz = frac * s.brillouin_zone().edge();
            let oracle = empty_lattice_modes(period, kr, kz, omega_max);
            let roots = solve_bands(&s, Polarization::TE, kr, kz, omega_max).unwrap();
            prop_assert_eq!(roots.len(), oracle.len());
            for (r, o) in roots.iter().zip(&oracle) {
                prop_assert!((r.omega - o).abs() < 1e-8 * o);
            }
        }

        #[test]
        fn weak_contrast_converges_to_empty_lattice(
            kr in 0.0..0.03f64, frac in 0.05..0.95f64,
        ) {
            let s = stack(1.0 + 1e-4, 40.0, 60.0);
            let kz = frac * s.brillouin_zone().edge();
            let oracle = empty_lattice_modes(100.0, kr, kz, 10.0);
            let roots = solve_bands(&s, Polarization::TM, kr, kz, 10.0).unwrap();
            // the slightly denser medium can pull one extra mode under the cutoff
            prop_assert!(roots.len() >= oracle.len());
            for (r, o) in roots.iter().zip(&oracle) {
                prop_assert!((r.omega - o).abs() < 1e-3 * o);
            }
        }
    }
}
