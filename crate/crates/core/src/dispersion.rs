//! Refractive-index models for the high-index layer.
//!
//! Every model with a finite high-frequency window returns exactly 1 above the
//! end of that window, which keeps the band sums ultraviolet-finite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::csv_error;

/// Default start of the blend toward unit index, eV.
pub const DEFAULT_BLEND_START: f64 = 10.65;
/// Default end of the blend toward unit index, eV.
pub const DEFAULT_BLEND_END: f64 = 40.0;

const AVERAGE_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionModel {
    Constant {
        n: f64,
    },
    /// `n(ω) = 1 + C1/ω² + C2/ω⁴`, coefficients in eV² and eV⁴.
    SellmeierTail {
        c1: f64,
        c2: f64,
    },
    Tabulated(TabulatedIndex),
    /// Effective index `√(a/g)·n_d(ω)` of a nanoparticle superlattice.
    MetamaterialEffective {
        a: f64,
        g: f64,
        dielectric: Box<DispersionModel>,
        #[serde(default = "default_blend_start")]
        blend_start: f64,
        #[serde(default = "default_blend_end")]
        blend_end: f64,
    },
}

fn default_blend_start() -> f64 {
    DEFAULT_BLEND_START
}

fn default_blend_end() -> f64 {
    DEFAULT_BLEND_END
}

/// Linearly interpolated samples. Above the last sample the index is blended
/// to 1, reaching it at `blend_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedIndex {
    samples: Vec<(f64, f64)>,
    #[serde(default = "default_blend_end")]
    blend_end: f64,
}

impl TabulatedIndex {
    pub fn new(samples: Vec<(f64, f64)>, blend_end: f64) -> Result<Self> {
        let table = Self { samples, blend_end };
        table.validate()?;
        Ok(table)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn blend_end(&self) -> f64 {
        self.blend_end
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::validation("dispersion table has no samples"));
        }
        for (i, &(w, n)) in self.samples.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::validation(format!("sample {i}: frequency {w} must be positive")));
            }
            if !(n >= 1.0) || !n.is_finite() {
                return Err(Error::validation(format!("sample {i}: index {n} is below 1")));
            }
            if i > 0 && w <= self.samples[i - 1].0 {
                return Err(Error::validation(format!(
                    "sample {i}: frequency {w} does not increase"
                )));
            }
        }
        let last = self.samples[self.samples.len() - 1].0;
        if !(self.blend_end > last) {
            return Err(Error::validation(format!(
                "blend_end {} must exceed the last sample at {last}",
                self.blend_end
            )));
        }
        Ok(())
    }

    fn eval(&self, omega: f64) -> (f64, bool) {
        let s = &self.samples;
        let (w0, n0) = s[0];
        if omega <= w0 {
            return (n0, omega < w0);
        }
        let (wl, nl) = s[s.len() - 1];
        if omega >= wl {
            return (blend_to_unity(nl, omega, wl, self.blend_end), false);
        }
        let i = s.partition_point(|&(w, _)| w <= omega);
        let (wa, na) = s[i - 1];
        let (wb, nb) = s[i];
        (na + (nb - na) * (omega - wa) / (wb - wa), false)
    }
}

/// `(1 − s)·n + s` with the smoothstep `s` rising from 0 at `start` to 1 at `end`.
fn blend_to_unity(n: f64, omega: f64, start: f64, end: f64) -> f64 {
    if omega >= end {
        return 1.0;
    }
    if omega <= start {
        return n;
    }
    let t = (omega - start) / (end - start);
    let s = t * t * (3.0 - 2.0 * t);
    (1.0 - s) * n + s
}

/// Index value and whether the query fell below a tabulated range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEvaluation {
    pub n: f64,
    pub clamped: bool,
}

impl DispersionModel {
    pub fn constant(n: f64) -> Result<Self> {
        let m = DispersionModel::Constant { n };
        m.validate()?;
        Ok(m)
    }

    pub fn sellmeier_tail(c1: f64, c2: f64) -> Result<Self> {
        let m = DispersionModel::SellmeierTail { c1, c2 };
        m.validate()?;
        Ok(m)
    }

    pub fn metamaterial(a: f64, g: f64, dielectric: DispersionModel) -> Result<Self> {
        Self::metamaterial_with_blend(a, g, dielectric, DEFAULT_BLEND_START, DEFAULT_BLEND_END)
    }

    pub fn metamaterial_with_blend(
        a: f64,
        g: f64,
        dielectric: DispersionModel,
        blend_start: f64,
        blend_end: f64,
    ) -> Result<Self> {
        let m = DispersionModel::MetamaterialEffective {
            a,
            g,
            dielectric: Box::new(dielectric),
            blend_start,
            blend_end,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the parameter invariants. Deserialized models should pass through here.
    pub fn validate(&self) -> Result<()> {
        match self {
            DispersionModel::Constant { n } => {
                if !(*n >= 1.0) || !n.is_finite() {
                    return Err(Error::validation(format!("constant index {n} is below 1")));
                }
            }
            DispersionModel::SellmeierTail { c1, c2 } => {
                if !(*c1 >= 0.0 && *c2 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
                    return Err(Error::validation(format!(
                        "Sellmeier coefficients must be non-negative, got C1={c1}, C2={c2}"
                    )));
                }
            }
            DispersionModel::Tabulated(t) => t.validate()?,
            DispersionModel::MetamaterialEffective {
                a,
                g,
                dielectric,
                blend_start,
                blend_end,
            } => {
                if !(*g > 0.0) || !(*a >= *g) || !a.is_finite() {
                    return Err(Error::validation(format!(
                        "metamaterial needs a >= g > 0, got a={a}, g={g}"
                    )));
                }
                if !(*blend_start > 0.0) || !(*blend_end > *blend_start) || !blend_end.is_finite() {
                    return Err(Error::validation(format!(
                        "blend window [{blend_start}, {blend_end}] is empty"
                    )));
                }
                dielectric.validate()?;
            }
        }
        Ok(())
    }

    /// `n(ω)` for `ω > 0` eV. Queries below a tabulated range clamp and log a warning.
    pub fn refractive_index(&self, omega: f64) -> Result<f64> {
        let e = self.evaluate(omega)?;
        if e.clamped {
            log::warn!("index queried at {omega} eV below the tabulated range; clamped");
        }
        Ok(e.n)
    }

    pub fn evaluate(&self, omega: f64) -> Result<IndexEvaluation> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::domain(format!("frequency must be positive, got {omega}")));
        }
        let (n, clamped) = self.eval(omega);
        Ok(IndexEvaluation { n, clamped })
    }

    /// Unchecked evaluation for hot loops; `omega` must be positive.
    #[inline]
    pub(crate) fn index_at(&self, omega: f64) -> f64 {
        self.eval(omega).0
    }

    fn eval(&self, omega: f64) -> (f64, bool) {
        match self {
            DispersionModel::Constant { n } => (*n, false),
            DispersionModel::SellmeierTail { c1, c2 } => {
                let w2 = omega * omega;
                (1.0 + c1 / w2 + c2 / (w2 * w2), false)
            }
            DispersionModel::Tabulated(t) => t.eval(omega),
            DispersionModel::MetamaterialEffective {
                a,
                g,
                dielectric,
                blend_start,
                blend_end,
            } => {
                if omega >= *blend_end {
                    return (1.0, false);
                }
                let (nd, clamped) = dielectric.eval(omega);
                let raw = (a / g).sqrt() * nd;
                (blend_to_unity(raw, omega, *blend_start, *blend_end), clamped)
            }
        }
    }

    /// Frequency above which the model is exactly 1, if it has one.
    pub fn unity_above(&self) -> Option<f64> {
        match self {
            DispersionModel::Constant { n } if *n == 1.0 => Some(0.0),
            DispersionModel::Constant { .. } | DispersionModel::SellmeierTail { .. } => None,
            DispersionModel::Tabulated(t) => Some(t.blend_end),
            DispersionModel::MetamaterialEffective { blend_end, .. } => Some(*blend_end),
        }
    }

    /// Leading `1/ω²` coefficient of the high-frequency expansion, eV².
    pub fn sellmeier_c1(&self) -> f64 {
        match self {
            DispersionModel::SellmeierTail { c1, .. } => *c1,
            _ => 0.0,
        }
    }

    /// Largest index on `(0, omega_hi]`, sampled on the averaging grid plus table nodes.
    pub fn max_index(&self, omega_hi: f64) -> f64 {
        let mut best = self.index_at(omega_hi);
        for i in 1..=AVERAGE_POINTS {
            let w = omega_hi * i as f64 / AVERAGE_POINTS as f64;
            best = best.max(self.index_at(w));
        }
        let mut nodes = Vec::new();
        self.collect_nodes(&mut nodes);
        for w in nodes.into_iter().filter(|&w| w > 0.0 && w <= omega_hi) {
            best = best.max(self.index_at(w));
        }
        if let DispersionModel::SellmeierTail { .. } = self {
            // diverges at zero; report the value at the low end of the grid
            best = best.max(self.index_at(omega_hi / AVERAGE_POINTS as f64));
        }
        best
    }

    fn collect_nodes(&self, out: &mut Vec<f64>) {
        match self {
            DispersionModel::Tabulated(t) => out.extend(t.samples.iter().map(|s| s.0)),
            DispersionModel::MetamaterialEffective { dielectric, .. } => dielectric.collect_nodes(out),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedIndex {
    pub n_bar: f64,
    pub omega_range: (f64, f64),
    pub note: String,
}

/// Arithmetic mean of `n(ω)` on a uniform grid over `[omega_lo, omega_hi]`.
pub fn average_index(model: &DispersionModel, omega_lo: f64, omega_hi: f64) -> Result<AveragedIndex> {
    if !(omega_lo > 0.0) || !(omega_hi > omega_lo) || !omega_hi.is_finite() {
        return Err(Error::domain(format!(
            "averaging range [{omega_lo}, {omega_hi}] is invalid"
        )));
    }
    let n = AVERAGE_POINTS;
    let h = (omega_hi - omega_lo) / (n - 1) as f64;
    let sum: f64 = (0..n).map(|i| model.index_at(omega_lo + i as f64 * h)).sum();
    Ok(AveragedIndex {
        n_bar: sum / n as f64,
        omega_range: (omega_lo, omega_hi),
        note: format!("uniform mean over {n} points on [{omega_lo}, {omega_hi}] eV"),
    })
}

#[derive(Debug, Deserialize)]
struct Row {
    #[serde(rename = "omega_eV")]
    omega: f64,
    n: f64,
}

/// Reads a two-column `omega_eV,n` table into a [`DispersionModel::Tabulated`].
pub fn load_dispersion_table(path: &Path) -> Result<DispersionModel> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "omega_eV" || &headers[1] != "n" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `omega_eV,n`".into(),
        });
    }
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if let Some(&(prev, _)) = samples.last() {
            if row.omega <= prev {
                return Err(Error::validation(format!(
                    "{}:{line}: frequency {} does not increase (previous {prev})",
                    path.display(),
                    row.omega
                )));
            }
        }
        samples.push((row.omega, row.n));
    }
    if samples.is_empty() {
        return Err(Error::validation(format!("{}: no samples", path.display())));
    }
    let end = DEFAULT_BLEND_END.max(samples[samples.len() - 1].0 * 2.0);
    Ok(DispersionModel::Tabulated(TabulatedIndex::new(samples, end)?))
}

/// Approximate real index of thin-film HfO₂ from the near infrared to the
/// vacuum ultraviolet, eV against n.
pub const HFO2_SAMPLES: [(f64, f64); 17] = [
    (0.5, 1.88),
    (1.0, 1.90),
    (2.0, 2.00),
    (3.0, 2.06),
    (4.0, 2.14),
    (5.0, 2.30),
    (5.5, 2.45),
    (6.0, 2.65),
    (6.5, 2.80),
    (7.0, 2.78),
    (8.0, 2.55),
    (9.0, 2.30),
    (10.0, 2.10),
    (10.65, 2.00),
    (11.0, 1.95),
    (12.0, 1.85),
    (14.0, 1.70),
];

pub fn hfo2_like() -> DispersionModel {
    DispersionModel::Tabulated(TabulatedIndex {
        samples: HFO2_SAMPLES.to_vec(),
        blend_end: DEFAULT_BLEND_END,
    })
}
