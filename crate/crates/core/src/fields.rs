//! Bloch eigenfields by the transfer-matrix method and their plane-wave
//! coefficients.
//!
//! Inside each layer the governing scalar is a short sum of exponentials, so
//! every integral needed here (norms, Fourier coefficients) is evaluated in
//! closed form.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{dispersion_residual, BandPoint, LayerStack, Polarization};
use crate::error::{Error, Result};
use crate::transfer::{CellFns, LayerFns, TransferMatrix, Wave};
use crate::units::HBAR_C;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Residual above which a band point is refused.
pub const OFF_SHELL_TOLERANCE: f64 = 1e-8;

/// `coef·exp(β·(z − origin))`
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: Complex64,
    beta: Complex64,
    origin: f64,
}

impl Term {
    #[inline]
    fn eval(&self, z: f64) -> Complex64 {
        self.coef * (self.beta * (z - self.origin)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerField {
    z0: f64,
    z1: f64,
    eps: f64,
    y: Vec<Term>,
    w: Vec<Term>,
}

/// Normalized Bloch mode in real space.
///
/// `y` is E_y (TE) or H_y (TM). The electric field is normalized so that
/// `(1/Λ)∫ε|E|² dz = 1/2` over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochFieldProfile {
    pub bandpoint: BandPoint,
    layers: [LayerField; 2],
    period: f64,
    /// Frequency as a wavenumber, nm⁻¹.
    omega_k: f64,
    bloch: Complex64,
    /// Factor applied to the raw eigenvector.
    pub normalization: f64,
    /// Set when the cell matrix was (numerically) `±1` and the standing-wave
    /// eigenvector was chosen by convention.
    pub degenerate: bool,
}

/// `(e^x − 1)/x`, accurate for small and purely imaginary `x`.
#[inline]
fn phi1(x: Complex64) -> Complex64 {
    if x.norm_sqr() < 1e-6 {
        // five terms give full precision for |x| < 1e-3
        Complex64::new(1.0, 0.0) + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        expm1(x) / x
    }
}

#[inline]
fn expm1(x: Complex64) -> Complex64 {
    let (s, c) = x.im.sin_cos();
    let half = (0.5 * x.im).sin();
    Complex64::new(x.re.exp_m1() * c - 2.0 * half * half, x.re.exp() * s)
}

/// `∫_{z0}^{z1} exp(g·z + a) dz`, expanded about the endpoint where the
/// integrand is largest.
#[inline]
fn integral_exp(g: Complex64, a: Complex64, z0: f64, z1: f64) -> Complex64 {
    let len = z1 - z0;
    if g.re <= 0.0 {
        (g * z0 + a).exp() * len * phi1(g * len)
    } else {
        (g * z1 + a).exp() * len * phi1(-g * len)
    }
}

/// `∫ Σ_j Σ_k s_j·conj(t_k)` over a layer.
fn overlap(s: &[Term], t: &[Term], z0: f64, z1: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in s {
        for b in t {
            let g = a.beta + b.beta.conj();
            let shift = -(a.beta * a.origin) - b.beta.conj() * b.origin;
            acc += a.coef * b.coef.conj() * integral_exp(g, shift, z0, z1);
        }
    }
    acc
}

fn min_wavenumber(d: f64) -> f64 {
    1e-5 / d
}

/// Terms of `y` and `w` in one layer starting at `z0` from the left state.
/// `right` is the known value of `y` at the far side, used for thick barriers.
fn layer_terms(
    f: &LayerFns,
    p: f64,
    z0: f64,
    d: f64,
    left: [Complex64; 2],
    right: Option<Complex64>,
) -> (Vec<Term>, Vec<Term>) {
    let (ya, wa) = (left[0], left[1]);
    let z1 = z0 + d;
    match f.wave {
        Wave::Propagating(k) => propagating_terms(k.max(min_wavenumber(d)), p, z0, ya, wa),
        Wave::Critical => propagating_terms(min_wavenumber(d), p, z0, ya, wa),
        Wave::Evanescent(kappa) => {
            let kappa = kappa.max(min_wavenumber(d));
            match right {
                Some(yb) if kappa * d >= 1.0 => {
                    let e = (-kappa * d).exp();
                    let den = 1.0 - e * e;
                    let a = (ya - yb * e) / den;
                    let b = (yb - ya * e) / den;
                    let neg = Complex64::new(-kappa, 0.0);
                    let pos = Complex64::new(kappa, 0.0);
                    (
                        vec![
                            Term { coef: a, beta: neg, origin: z0 },
                            Term { coef: b, beta: pos, origin: z1 },
                        ],
                        vec![
                            Term { coef: -p * kappa * a, beta: neg, origin: z0 },
                            Term { coef: p * kappa * b, beta: pos, origin: z1 },
                        ],
                    )
                }
                _ => {
                    let r = wa / (p * kappa);
                    let up = 0.5 * (ya + r);
                    let down = 0.5 * (ya - r);
                    let neg = Complex64::new(-kappa, 0.0);
                    let pos = Complex64::new(kappa, 0.0);
                    (
                        vec![
                            Term { coef: up, beta: pos, origin: z0 },
                            Term { coef: down, beta: neg, origin: z0 },
                        ],
                        vec![
                            Term { coef: p * kappa * up, beta: pos, origin: z0 },
                            Term { coef: -p * kappa * down, beta: neg, origin: z0 },
                        ],
                    )
                }
            }
        }
    }
}

fn propagating_terms(k: f64, p: f64, z0: f64, ya: Complex64, wa: Complex64) -> (Vec<Term>, Vec<Term>) {
    let r = wa / (p * k);
    let a = 0.5 * (ya - I * r);
    let b = 0.5 * (ya + I * r);
    let fwd = Complex64::new(0.0, k);
    let bwd = Complex64::new(0.0, -k);
    (
        vec![
            Term { coef: a, beta: fwd, origin: z0 },
            Term { coef: b, beta: bwd, origin: z0 },
        ],
        vec![
            Term { coef: I * p * k * a, beta: fwd, origin: z0 },
            Term { coef: -I * p * k * b, beta: bwd, origin: z0 },
        ],
    )
}

/// Builds the normalized Bloch mode at an on-shell band point.
pub fn mode_profile(stack: &LayerStack, bandpoint: &BandPoint) -> Result<BlochFieldProfile> {
    let res = dispersion_residual(stack, bandpoint.pol, bandpoint.omega, bandpoint.k_rho, bandpoint.k_z);
    if !(res.abs() < OFF_SHELL_TOLERANCE) {
        return Err(Error::OffShell { residual: res });
    }
    Ok(build_profile(stack, bandpoint))
}

pub(crate) fn build_profile(stack: &LayerStack, bp: &BandPoint) -> BlochFieldProfile {
    let cell = CellFns::new(stack, bp.pol, bp.omega, bp.k_rho);
    let period = stack.period();
    let m = cell.cell_matrix().m;
    let bloch = Complex64::from_polar(1.0, bp.k_z * period);
    let lam = bloch * (-cell.log_scale()).exp();

    let v1 = [Complex64::new(m[0][1], 0.0), lam - m[0][0]];
    let v2 = [lam - m[1][1], Complex64::new(m[1][0], 0.0)];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let scale = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let degenerate = n1.max(n2).sqrt() < 1e-12 * scale;
    let v = if degenerate {
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    } else if n1 >= n2 {
        v1
    } else {
        v2
    };
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v0 = [v[0] / norm, v[1] / norm];

    let (d_h, d_l) = (stack.d_h(), stack.d_l());
    let (yh, wh) = layer_terms(&cell.h, cell.p_h, 0.0, d_h, v0, None);
    let mh = TransferMatrix::from_layer(&cell.h, cell.p_h).scale(cell.h.log_scale.exp());
    let left = [
        v0[0] * mh.m[0][0] + v0[1] * mh.m[0][1],
        v0[0] * mh.m[1][0] + v0[1] * mh.m[1][1],
    ];
    let (yl, wl) = layer_terms(&cell.l, cell.p_l, d_h, d_l, left, Some(bloch * v0[0]));

    let mut profile = BlochFieldProfile {
        bandpoint: *bp,
        layers: [
            LayerField { z0: 0.0, z1: d_h, eps: cell.n_h * cell.n_h, y: yh, w: wh },
            LayerField { z0: d_h, z1: period, eps: 1.0, y: yl, w: wl },
        ],
        period,
        omega_k: bp.omega / HBAR_C,
        bloch,
        normalization: 1.0,
        degenerate,
    };
    let energy = profile.weighted_norm();
    let factor = (0.5 / energy).sqrt();
    for layer in profile.layers.iter_mut() {
        for t in layer.y.iter_mut().chain(layer.w.iter_mut()) {
            t.coef *= factor;
        }
    }
    profile.normalization = factor / norm;
    profile
}

impl BlochFieldProfile {
    pub fn pol(&self) -> Polarization {
        self.bandpoint.pol
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn layer_at(&self, z: f64) -> (&LayerField, Complex64) {
        // fold into the reference cell, tracking the Bloch phase
        let cells = (z / self.period).floor();
        let zr = z - cells * self.period;
        let phase = Complex64::from_polar(1.0, self.bandpoint.k_z * self.period * cells);
        let layer = if zr < self.layers[0].z1 { &self.layers[0] } else { &self.layers[1] };
        (layer, phase)
    }

    fn eval_terms(terms: &[Term], z: f64) -> Complex64 {
        terms.iter().map(|t| t.eval(z)).sum()
    }

    /// Governing scalar `y(z)` (E_y or H_y), any `z`.
    pub fn y(&self, z: f64) -> Complex64 {
        let cells = (z / self.period).floor();
        let zr = z - cells * self.period;
        let (layer, phase) = self.layer_at(z);
        phase * Self::eval_terms(&layer.y, zr)
    }

    /// `p·dy/dz`, continuous across interfaces.
    pub fn w(&self, z: f64) -> Complex64 {
        let cells = (z / self.period).floor();
        let zr = z - cells * self.period;
        let (layer, phase) = self.layer_at(z);
        phase * Self::eval_terms(&layer.w, zr)
    }

    /// Values of `(y, w)` approaching the interface at `z_interface` from the left
    /// and the right layer of the reference cell.
    pub fn interface_values(&self, which: usize) -> ([Complex64; 2], [Complex64; 2]) {
        let [h, l] = &self.layers;
        if which == 0 {
            let z = h.z1;
            (
                [Self::eval_terms(&h.y, z), Self::eval_terms(&h.w, z)],
                [Self::eval_terms(&l.y, z), Self::eval_terms(&l.w, z)],
            )
        } else {
            // the far side of the void against the Bloch image of the start of the cell
            let z = l.z1;
            (
                [Self::eval_terms(&l.y, z), Self::eval_terms(&l.w, z)],
                [
                    self.bloch * Self::eval_terms(&h.y, 0.0),
                    self.bloch * Self::eval_terms(&h.w, 0.0),
                ],
            )
        }
    }

    /// Largest relative mismatch of `(y, w)` over both interfaces.
    pub fn continuity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for which in 0..2 {
            let (a, b) = self.interface_values(which);
            let scale_y = a[0].norm().max(b[0].norm()).max(self.y_scale());
            let scale_w = a[1].norm().max(b[1].norm()).max(self.w_scale());
            worst = worst.max((a[0] - b[0]).norm() / scale_y);
            worst = worst.max((a[1] - b[1]).norm() / scale_w);
        }
        worst
    }

    fn y_scale(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.y.iter()).map(|t| t.coef.norm()).fold(0.0, f64::max)
    }

    fn w_scale(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.w.iter()).map(|t| t.coef.norm()).fold(0.0, f64::max)
    }

    /// Forward and backward amplitudes in the high-index layer.
    pub fn high_index_amplitudes(&self) -> (Complex64, Complex64) {
        let y = &self.layers[0].y;
        (y[0].coef, y[1].coef)
    }

    /// Electric field `(E_x, E_y, E_z)` at `z` for in-plane position 0.
    pub fn electric_field(&self, z: f64) -> [Complex64; 3] {
        let zero = Complex64::new(0.0, 0.0);
        match self.pol() {
            Polarization::TE => [zero, self.y(z), zero],
            Polarization::TM => {
                let (layer, _) = self.layer_at(z);
                let ex = -I * self.w(z) / self.omega_k;
                let ez = -self.bandpoint.k_rho * self.y(z) / (self.omega_k * layer.eps);
                [ex, zero, ez]
            }
        }
    }

    /// Per-layer terms of the nonzero electric-field components.
    fn component_terms(&self, layer: &LayerField) -> Vec<Vec<Term>> {
        let scaled = |terms: &[Term], f: Complex64| -> Vec<Term> {
            terms.iter().map(|t| Term { coef: t.coef * f, ..*t }).collect()
        };
        match self.pol() {
            Polarization::TE => vec![layer.y.clone()],
            Polarization::TM => vec![
                scaled(&layer.w, -I / self.omega_k),
                scaled(&layer.y, Complex64::new(-self.bandpoint.k_rho / (self.omega_k * layer.eps), 0.0)),
            ],
        }
    }

    fn norm_with(&self, weighted: bool) -> f64 {
        let mut total = 0.0;
        for layer in &self.layers {
            let w = if weighted { layer.eps } else { 1.0 };
            for comp in self.component_terms(layer) {
                total += w * overlap(&comp, &comp, layer.z0, layer.z1).re;
            }
        }
        total / self.period
    }

    /// `(1/Λ)∫ε|E|²`, equal to 1/2 after normalization.
    pub fn weighted_norm(&self) -> f64 {
        self.norm_with(true)
    }

    /// `(1/Λ)∫|E|²`, the Parseval target of the plane-wave coefficients.
    pub fn plain_norm(&self) -> f64 {
        self.norm_with(false)
    }
}

/// Plane-wave coefficients `E(G)` of one mode for `G = m·b_z`, `|m| ≤ M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub bandpoint: BandPoint,
    pub m_max: usize,
    /// `G` values, nm⁻¹, ordered by `m` from `−M` to `M`.
    pub g: Vec<f64>,
    /// Transverse coefficient per `G`: E_y for TE, the in-plane TM projection for TM.
    pub coeffs: Vec<Complex64>,
    /// Longitudinal projection per `G` (all zero for TE).
    pub longitudinal: Vec<Complex64>,
    /// Discarded longitudinal share of the coefficient norm.
    pub longitudinal_residual: f64,
    /// `|(1/Λ)∫|E|² − Σ_G |E(G)|²| / (1/Λ)∫|E|²`
    pub parseval_residual: f64,
}

impl FourierCoefficients {
    /// Coefficient at `G = m·b_z`.
    pub fn at(&self, m: i64) -> Complex64 {
        self.coeffs[(m + self.m_max as i64) as usize]
    }

    /// Sum of `|E(G)|²` over transverse and longitudinal parts.
    pub fn total_norm(&self) -> f64 {
        self.coeffs.iter().chain(&self.longitudinal).map(|c| c.norm_sqr()).sum()
    }

    /// `Σ_G E(G)·e^{i(k_z+G)z}` for TE, or the transverse+longitudinal
    /// recombination into `(E_x, E_z)` for TM.
    pub fn reconstruct(&self, z: f64) -> [Complex64; 3] {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = [zero; 3];
        let k_rho = self.bandpoint.k_rho;
        for (i, &g) in self.g.iter().enumerate() {
            let kgz = self.bandpoint.k_z + g;
            let phase = Complex64::from_polar(1.0, kgz * z);
            match self.bandpoint.pol {
                Polarization::TE => out[1] += self.coeffs[i] * phase,
                Polarization::TM => {
                    let (ex, ez) = unproject(self.coeffs[i], self.longitudinal[i], k_rho, kgz);
                    out[0] += ex * phase;
                    out[2] += ez * phase;
                }
            }
        }
        out
    }
}

#[inline]
fn project(ex: Complex64, ez: Complex64, k_rho: f64, kgz: f64) -> (Complex64, Complex64) {
    let k = k_rho.hypot(kgz);
    if k == 0.0 {
        return (ex, ez);
    }
    ((ex * kgz - ez * k_rho) / k, (ex * k_rho + ez * kgz) / k)
}

#[inline]
fn unproject(t: Complex64, l: Complex64, k_rho: f64, kgz: f64) -> (Complex64, Complex64) {
    let k = k_rho.hypot(kgz);
    if k == 0.0 {
        return (t, l);
    }
    ((t * kgz + l * k_rho) / k, (l * kgz - t * k_rho) / k)
}

/// Closed-form plane-wave decomposition of a mode, gauge-fixed so the largest
/// coefficient is real and positive.
pub fn fourier_coefficients(profile: &BlochFieldProfile, m_max: usize) -> Result<FourierCoefficients> {
    if m_max < 1 {
        return Err(Error::domain("G cutoff must be at least 1"));
    }
    let fc = compute_coefficients(profile, m_max);
    if fc.parseval_residual > 1e-8 {
        log::warn!(
            "{} band {}: Parseval residual {:.2e} at M = {m_max}",
            fc.bandpoint.pol,
            fc.bandpoint.band,
            fc.parseval_residual
        );
    }
    Ok(fc)
}

pub(crate) fn compute_coefficients(profile: &BlochFieldProfile, m_max: usize) -> FourierCoefficients {
    let bp = profile.bandpoint;
    let period = profile.period;
    let b_z = 2.0 * PI / period;
    let count = 2 * m_max + 1;
    let comps: Vec<(f64, f64, Vec<Vec<Term>>)> = profile
        .layers
        .iter()
        .map(|l| (l.z0, l.z1, profile.component_terms(l)))
        .collect();
    let ncomp = comps[0].2.len();
    let mut g = Vec::with_capacity(count);
    let mut raw = vec![[Complex64::new(0.0, 0.0); 2]; count];
    for (i, slot) in raw.iter_mut().enumerate() {
        let m = i as i64 - m_max as i64;
        let gm = m as f64 * b_z;
        g.push(gm);
        let q = bp.k_z + gm;
        for (z0, z1, terms) in &comps {
            for (c, comp) in terms.iter().enumerate() {
                for t in comp {
                    let gg = t.beta - I * q;
                    let shift = -(t.beta * t.origin);
                    slot[c] += t.coef * integral_exp(gg, shift, *z0, *z1);
                }
            }
        }
        for v in slot.iter_mut().take(ncomp) {
            *v /= period;
        }
    }

    let zero = Complex64::new(0.0, 0.0);
    let (mut coeffs, mut longitudinal): (Vec<Complex64>, Vec<Complex64>) = match bp.pol {
        Polarization::TE => (raw.iter().map(|r| r[0]).collect(), vec![zero; count]),
        Polarization::TM => raw
            .iter()
            .zip(&g)
            .map(|(r, &gm)| project(r[0], r[1], bp.k_rho, bp.k_z + gm))
            .unzip(),
    };

    let (imax, _) = coeffs
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, c)| if c.norm() > best.1 { (i, c.norm()) } else { best });
    let lead = coeffs[imax];
    if lead.norm() > 0.0 {
        let rot = lead.conj() / lead.norm();
        for c in coeffs.iter_mut().chain(longitudinal.iter_mut()) {
            *c *= rot;
        }
        coeffs[imax] = Complex64::new(coeffs[imax].norm(), 0.0);
    }

    let trans: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let long: f64 = longitudinal.iter().map(|c| c.norm_sqr()).sum();
    let plain = profile.plain_norm();
    FourierCoefficients {
        bandpoint: bp,
        m_max,
        g,
        coeffs,
        longitudinal,
        longitudinal_residual: if trans + long > 0.0 { long / (trans + long) } else { 0.0 },
        parseval_residual: ((plain - trans - long) / plain).abs(),
    }
}
