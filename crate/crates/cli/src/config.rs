//! Run configuration: JSON on disk, `_comment` keys allowed anywhere.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use pcqed_core::{
    builtin_atoms, dispersion::hfo2_like, load_atom_table, load_dispersion_table, AtomRecord, DispersionModel,
    LayerStack, Polarization, QuadratureConfig, RegularizationConfig,
};

/// Default layer thickness, nm. Equal layers are an assumption; override per run.
pub const DEFAULT_THICKNESS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub stack: StackConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub ionize: IonizeConfig,
    #[serde(default)]
    pub outputs: OutputPaths,
    /// Symbols to tabulate. `None` means every known atom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    /// Replaces the built-in atom data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    #[serde(default = "default_thickness")]
    pub d_h: f64,
    #[serde(default = "default_thickness")]
    pub d_l: f64,
    pub model_h: HostModel,
}

fn default_thickness() -> f64 {
    DEFAULT_THICKNESS
}

/// Host index model. Either an inline model, a dispersion table on disk, the
/// built-in HfO₂-like table, or a metamaterial built on any of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HostModel {
    File(TableFile),
    Builtin(BuiltinRef),
    Metamaterial(MetamaterialRef),
    Inline(DispersionModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub table_file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinModel {
    Hfo2Like,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRef {
    pub builtin: BuiltinModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamaterialRef {
    pub metamaterial: MetamaterialParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamaterialParams {
    /// nm
    pub a: f64,
    /// nm
    pub g: f64,
    pub dielectric: Box<HostModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend_end: Option<f64>,
}

impl HostModel {
    pub fn constant(n: f64) -> Self {
        HostModel::Inline(DispersionModel::Constant { n })
    }

    pub fn metamaterial(a: f64, g: f64) -> Self {
        HostModel::Metamaterial(MetamaterialRef {
            metamaterial: MetamaterialParams {
                a,
                g,
                dielectric: Box::new(HostModel::Builtin(BuiltinRef { builtin: BuiltinModel::Hfo2Like })),
                blend_start: None,
                blend_end: None,
            },
        })
    }

    /// `base` resolves relative table paths.
    pub fn resolve(&self, base: &Path) -> anyhow::Result<DispersionModel> {
        let model = match self {
            HostModel::File(f) => load_dispersion_table(&base.join(&f.table_file))?,
            HostModel::Builtin(b) => match b.builtin {
                BuiltinModel::Hfo2Like => hfo2_like(),
            },
            HostModel::Metamaterial(m) => {
                let p = &m.metamaterial;
                let d = p.dielectric.resolve(base)?;
                match (p.blend_start, p.blend_end) {
                    (None, None) => DispersionModel::metamaterial(p.a, p.g, d)?,
                    (s, e) => DispersionModel::metamaterial_with_blend(
                        p.a,
                        p.g,
                        d,
                        s.unwrap_or(pcqed_core::dispersion::DEFAULT_BLEND_START),
                        e.unwrap_or(pcqed_core::dispersion::DEFAULT_BLEND_END),
                    )?,
                }
            }
            HostModel::Inline(m) => {
                m.validate()?;
                m.clone()
            }
        };
        Ok(model)
    }
}

/// Either explicit values or `count` evenly spaced points on `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(RangeGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range(r) if r.count <= 1 => vec![r.start],
            Grid::Range(r) => (0..r.count)
                .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    pub polarizations: Vec<Polarization>,
    /// nm⁻¹
    pub k_rho: Grid,
    /// nm⁻¹. Defaults to 33 points across the half zone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_z: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_dump: Option<FourierDump>,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self {
            polarizations: Polarization::BOTH.to_vec(),
            k_rho: Grid::Values(vec![0.0]),
            k_z: None,
            fourier_dump: None,
        }
    }
}

/// One mode whose Fourier coefficients are written out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierDump {
    pub pol: Polarization,
    pub k_rho: f64,
    pub k_z: f64,
    /// 1-based
    pub band: usize,
    #[serde(default = "default_dump_m")]
    pub m_max: usize,
}

fn default_dump_m() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Constant-index points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_h: Option<IndexRange>,
    /// Extra constant-index points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// `(a, g)` pairs in nm for HfO₂-like metamaterial hosts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metamaterial: Vec<(f64, f64)>,
    /// Keeps the period and moves the interface.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_h_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl IndexRange {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + self.step * i as f64).collect()
    }
}

impl SweepConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(r) = &self.n_h {
            if !(r.start >= 1.0) || !(r.step > 0.0) || !(r.stop >= r.start) {
                bail!("sweep range needs start >= 1, step > 0 and stop >= start");
            }
        }
        if self.values.iter().any(|&n| !(n >= 1.0)) {
            bail!("sweep indices must be at least 1");
        }
        if let Some(f) = self.d_h_fraction {
            if !(f > 0.0 && f < 1.0) {
                bail!("d_h_fraction must lie in (0, 1), got {f}");
            }
        }
        for &(a, g) in &self.metamaterial {
            if !(a > 0.0 && g > 0.0) {
                bail!("metamaterial a and g must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonizeConfig {
    /// Skips the quadrature and applies this shift, eV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    /// Kelvin, for the rate factor in the summary.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    300.0
}

impl Default for IonizeConfig {
    fn default() -> Self {
        Self {
            delta_e: None,
            temperature: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub bands: PathBuf,
    pub fourier: PathBuf,
    pub dispersion: PathBuf,
    pub mass: PathBuf,
    pub table: PathBuf,
    pub sweep: PathBuf,
    pub check: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            bands: "bands.csv".into(),
            fourier: "fourier.csv".into(),
            dispersion: "dispersion.csv".into(),
            mass: "mass.json".into(),
            table: "ionization.csv".into(),
            sweep: "sweep.csv".into(),
            check: "check.json".into(),
        }
    }
}

/// Drops every object key starting with `_comment`, at any depth.
pub fn strip_comments(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("_comment"));
            map.values_mut().for_each(strip_comments);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_comments),
        _ => {}
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        strip_comments(&mut value);
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_stack(d_h: f64, d_l: f64, model_h: HostModel) -> Self {
        Self {
            stack: StackConfig { d_h, d_l, model_h },
            quadrature: QuadratureConfig::default(),
            regularization: RegularizationConfig::default(),
            bands: BandsConfig::default(),
            sweep: None,
            ionize: IonizeConfig::default(),
            outputs: OutputPaths::default(),
            atoms: None,
            atom_table: None,
        }
    }
}

/// A parsed configuration with its data files loaded.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub stack: LayerStack,
    pub atoms: Vec<AtomRecord>,
    /// Directory of the config file; relative data paths start here.
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(config, base)
    }

    pub fn from_config(config: RunConfig, base: PathBuf) -> anyhow::Result<Self> {
        let model = config.stack.model_h.resolve(&base)?;
        let stack = LayerStack::new(config.stack.d_h, config.stack.d_l, model)?;
        config.quadrature.validate()?;
        if !(config.regularization.omega_max > 0.0) {
            bail!("omega_max must be positive");
        }
        if let Some(s) = &config.sweep {
            s.validate()?;
        }
        if !(config.ionize.temperature > 0.0) {
            bail!("temperature must be positive");
        }
        let known = match &config.atom_table {
            Some(p) => load_atom_table(&base.join(p))?,
            None => builtin_atoms(),
        };
        let atoms = match &config.atoms {
            None => known,
            Some(symbols) => symbols
                .iter()
                .map(|s| {
                    known
                        .iter()
                        .find(|a| &a.symbol == s)
                        .cloned()
                        .with_context(|| format!("unknown atom `{s}`"))
                })
                .collect::<anyhow::Result<_>>()?,
        };
        Ok(Self {
            config,
            stack,
            atoms,
            base,
        })
    }
}
