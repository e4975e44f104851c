//! Layer propagation in the `(y, w)` basis.
//!
//! `y` is the governing scalar (E_y for TE, H_y for TM) and `w = p·dy/dz` with
//! `p = 1` for TE and `p = 1/ε` for TM, so both components are continuous at
//! interfaces. Evanescent layers are carried with a factored-out `cosh(κd)` to
//! keep thick barriers finite.

use std::ops::Mul;

use num_complex::Complex64;

use crate::bands::{LayerStack, Polarization};
use crate::units::HBAR_C;

/// Axial wavenumber in a layer of index `n`. `omega` is given as a wavenumber
/// (nm⁻¹), like `k_rho`. Evanescent layers return a purely imaginary value.
pub fn layer_axial_wavenumber(n: f64, omega: f64, k_rho: f64) -> Complex64 {
    let q = (n * omega) * (n * omega) - k_rho * k_rho;
    if q >= 0.0 {
        Complex64::new(q.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-q).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Wave {
    Propagating(f64),
    Evanescent(f64),
    Critical,
}

/// Scaled layer functions. The true values are `c·e^ls`, `s·e^ls`, `t·e^ls`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerFns {
    pub c: f64,
    pub s: f64,
    pub t: f64,
    pub log_scale: f64,
    pub wave: Wave,
}

pub(crate) fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// `n` is the layer index, `w` the frequency as a wavenumber, `d` the thickness.
#[inline]
pub(crate) fn layer_fns(n: f64, w: f64, k_rho: f64, d: f64) -> LayerFns {
    let q = (n * w) * (n * w) - k_rho * k_rho;
    if q > 0.0 {
        let k = q.sqrt();
        let (sn, cs) = (k * d).sin_cos();
        LayerFns {
            c: cs,
            s: sn / k,
            t: k * sn,
            log_scale: 0.0,
            wave: Wave::Propagating(k),
        }
    } else if q < 0.0 {
        let kappa = (-q).sqrt();
        let x = kappa * d;
        let th = x.tanh();
        LayerFns {
            c: 1.0,
            s: th / kappa,
            t: -kappa * th,
            log_scale: ln_cosh(x),
            wave: Wave::Evanescent(kappa),
        }
    } else {
        LayerFns {
            c: 1.0,
            s: d,
            t: 0.0,
            log_scale: 0.0,
            wave: Wave::Critical,
        }
    }
}

/// Real 2×2 matrix acting on `(y, w)`. Lossless layers keep every entry real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[f64; 2]; 2],
}

impl TransferMatrix {
    pub const IDENTITY: TransferMatrix = TransferMatrix {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub(crate) fn from_layer(f: &LayerFns, p: f64) -> Self {
        TransferMatrix {
            m: [[f.c, f.s / p], [-p * f.t, f.c]],
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn scale(&self, a: f64) -> Self {
        let m = self.m;
        TransferMatrix {
            m: [[a * m[0][0], a * m[0][1]], [a * m[1][0], a * m[1][1]]],
        }
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        let a = self.m;
        let b = rhs.m;
        TransferMatrix {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

/// `p` factors of the high-index and void layers.
#[inline]
pub(crate) fn p_factors(pol: Polarization, n_h: f64) -> (f64, f64) {
    match pol {
        Polarization::TE => (1.0, 1.0),
        Polarization::TM => (1.0 / (n_h * n_h), 1.0),
    }
}

/// Everything one period needs at a given `(ω, k_ρ)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellFns {
    pub h: LayerFns,
    pub l: LayerFns,
    pub p_h: f64,
    pub p_l: f64,
    pub n_h: f64,
}

impl CellFns {
    pub fn new(stack: &LayerStack, pol: Polarization, omega: f64, k_rho: f64) -> Self {
        let w = omega / HBAR_C;
        let n_h = stack.n_h(omega);
        let (p_h, p_l) = p_factors(pol, n_h);
        CellFns {
            h: layer_fns(n_h, w, k_rho, stack.d_h()),
            l: layer_fns(1.0, w, k_rho, stack.d_l()),
            p_h,
            p_l,
            n_h,
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.h.log_scale + self.l.log_scale
    }

    /// Scaled half-trace of the unit-cell matrix.
    pub fn half_trace(&self) -> f64 {
        let (h, l) = (&self.h, &self.l);
        h.c * l.c - 0.5 * ((self.p_l / self.p_h) * l.t * h.s + (self.p_h / self.p_l) * h.t * l.s)
    }

    /// Scaled unit-cell matrix `M_l·M_h`, origin at the start of the high-index layer.
    pub fn cell_matrix(&self) -> TransferMatrix {
        TransferMatrix::from_layer(&self.l, self.p_l) * TransferMatrix::from_layer(&self.h, self.p_h)
    }
}

/// Unit-cell transfer matrix on `(y, w)` at frequency `omega` (eV).
///
/// Entries are unscaled, so very thick evanescent barriers can overflow; the
/// solver works with the scaled form internally.
pub fn unit_cell_transfer_matrix(
    stack: &LayerStack,
    pol: Polarization,
    omega: f64,
    k_rho: f64,
) -> TransferMatrix {
    let cell = CellFns::new(stack, pol, omega, k_rho);
    cell.cell_matrix().scale(cell.log_scale().exp())
}
