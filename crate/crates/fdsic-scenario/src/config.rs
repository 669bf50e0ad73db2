//! Scenario description, read from TOML. Every table and key is optional
//! and falls back to the desk-scale defaults; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fdsic::imd::MomentMode;
use fdsic::impairments::{default_measured_pa, irr_to_b, IqImbalance, PaPolynomial};
use fdsic::ofdm::{Band, SubcarrierGrid};
use fdsic::sic::EstimatorConfig;
use fdsic::{db_to_lin, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub grid: GridSpec,
    pub pa: PaSpec,
    pub iq: IqSpec,
    pub channel: ChannelSpec,
    pub beams: BeamSpec,
    pub levels: LevelSpec,
    pub estimator: EstimatorSpec,
    pub run: RunSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplexPreset {
    #[default]
    Ibfd,
    Sbfd,
    Overlap,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub num_subcarriers: usize,
    pub spacing_hz: f64,
    pub cp_length: usize,
    pub duplex: DuplexPreset,
    /// Inclusive `[start, end]`; only with `duplex = "custom"`.
    pub dl: Option<[usize; 2]>,
    pub ul: Option<[usize; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            num_subcarriers: 256,
            spacing_hz: 60e3,
            cp_length: 32,
            duplex: DuplexPreset::Ibfd,
            dl: None,
            ul: None,
        }
    }
}

/// DL and UL allocations of a preset on a `p`-subcarrier grid.
///
/// The DL band covers 40% of the grid centred on `P/2`, so it is its own
/// mirror image. SBFD puts a 14% UL band one guard subcarrier above it;
/// the overlap preset centres a 30% UL band on the upper DL edge.
pub fn preset_bands(preset: DuplexPreset, p: usize) -> Result<(Band, Band)> {
    let r = |f: f64| (f * p as f64).round() as usize;
    let half = r(0.2);
    if p < 16 || half == 0 {
        return Err(Error::Config(format!("num_subcarriers {p} too small for the duplex presets")));
    }
    let dl = Band::new(p / 2 - half, p / 2 + half)?;
    let ul = match preset {
        DuplexPreset::Ibfd => dl,
        DuplexPreset::Sbfd => Band::new(dl.end + 2, (dl.end + 1 + r(0.14)).min(p - 1))?,
        DuplexPreset::Overlap => {
            let w = r(0.3);
            let start = dl.end - w / 2;
            Band::new(start, (start + w - 1).min(p - 1))?
        }
        DuplexPreset::Custom => return Err(Error::Config("custom duplex has no preset bands".into())),
    };
    Ok((dl, ul))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaModel {
    #[default]
    Measured,
    Linear,
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaSpec {
    pub model: PaModel,
    /// `[re, im]` of `a_1, a_3, a_5, ...` for the custom model.
    pub coeffs: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IqSpec {
    pub enabled: bool,
    pub irr_db: f64,
    pub phase_rad: f64,
}

impl Default for IqSpec {
    fn default() -> Self {
        IqSpec { enabled: true, irr_db: 25.0, phase_rad: 0.3 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    #[default]
    Synth,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub source: ChannelSource,
    pub path: Option<PathBuf>,
    pub n_rays: usize,
    pub nlos_offset_db: f64,
    pub nlos_decay_db_per_tap: f64,
    pub angle_spread_deg: f64,
    pub los_angle_deg: f64,
    /// Total TX-to-RX isolation ahead of digital SIC (propagation loss
    /// plus analog cancellation). The beamformed channel is scaled to a
    /// mean power gain of `-isolation_db`.
    pub isolation_db: f64,
    pub array_rows: usize,
    pub array_cols: usize,
    pub element_spacing: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            source: ChannelSource::Synth,
            path: None,
            n_rays: 5,
            nlos_offset_db: -10.0,
            nlos_decay_db_per_tap: 3.0,
            angle_spread_deg: 60.0,
            los_angle_deg: 0.0,
            isolation_db: DESK_ISOLATION_DB,
            array_rows: 1,
            array_cols: 4,
            element_spacing: 0.5,
        }
    }
}

/// Free-space loss over 1 m at 3.5 GHz.
pub const FSPL_1M_DB: f64 = 43.3;
/// Free-space loss plus 25 dB of analog cancellation.
pub const DESK_ISOLATION_DB: f64 = FSPL_1M_DB + 25.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSpec {
    pub tx_angle_deg: f64,
    pub rx_angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelSpec {
    /// Receiver noise per subcarrier.
    pub noise_dbm: f64,
    /// RMS amplitude of the time-domain DL signal at the PA input.
    pub drive_rms: f64,
}

impl Default for LevelSpec {
    fn default() -> Self {
        LevelSpec { noise_dbm: -90.0, drive_rms: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    /// Basis-selection threshold; the noise power when absent.
    pub gamma_dbm: Option<f64>,
    pub k_max: usize,
    pub n_impulse: usize,
    pub n_train: usize,
    pub regularization: f64,
    pub moment_mode: String,
    pub iq_refinements: usize,
    /// Time-domain peak amplitude of the strongest impulse pilot; the
    /// others ramp linearly up to it.
    pub impulse_peak: f64,
    pub qam_order: usize,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            gamma_dbm: None,
            k_max: 2,
            n_impulse: 4,
            n_train: 14,
            regularization: 0.0,
            moment_mode: MomentMode::Gaussian.name().into(),
            iq_refinements: 3,
            impulse_peak: 6.0,
            qam_order: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Canceller {
    None,
    Linear,
    Proposed,
    FullLs,
    IqOnly,
    PaOnly,
}

impl Canceller {
    pub const ALL: [Canceller; 6] = [
        Canceller::None,
        Canceller::Linear,
        Canceller::Proposed,
        Canceller::FullLs,
        Canceller::IqOnly,
        Canceller::PaOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Canceller::None => "none",
            Canceller::Linear => "linear",
            Canceller::Proposed => "proposed",
            Canceller::FullLs => "full_ls",
            Canceller::IqOnly => "iq_only",
            Canceller::PaOnly => "pa_only",
        }
    }
}

impl fmt::Display for Canceller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Canceller {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Canceller::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown canceller {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    /// Data symbols cancelled per seed after estimation.
    pub n_symbols: usize,
    /// Independent channel, data and noise draws averaged together.
    pub n_seeds: usize,
    pub cancellers: Vec<Canceller>,
    /// Worker threads for the seed loop; 0 picks the available cores.
    pub threads: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            n_symbols: 20,
            n_seeds: 1,
            cancellers: Canceller::ALL.to_vec(),
            threads: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml(&text)?;
        // tap files are resolved relative to the config file
        if let (Some(p), Some(dir)) = (&spec.channel.path, path.parent()) {
            if p.is_relative() {
                spec.channel.path = Some(dir.join(p));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario spec serializes")
    }

    pub fn preset(duplex: DuplexPreset) -> Self {
        let mut s = ScenarioSpec::default();
        s.grid.duplex = duplex;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Error::Config(format!("{name}: {msg}"));
        self.grid()?;
        self.pa()?;
        self.iq()?;
        if self.channel.source == ChannelSource::File {
            match &self.channel.path {
                None => return Err(field("channel.path", "required when source = \"file\"".into())),
                Some(p) if !p.exists() => {
                    return Err(field("channel.path", format!("{} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if self.channel.n_rays == 0 {
            return Err(field("channel.n_rays", "must be at least 1".into()));
        }
        if self.channel.array_rows == 0 || self.channel.array_cols == 0 {
            return Err(field("channel.array_rows/array_cols", "must be positive".into()));
        }
        if !(self.levels.drive_rms > 0.0) {
            return Err(field("levels.drive_rms", "must be positive".into()));
        }
        if self.levels.noise_dbm >= self.tx_power_dbm()? {
            return Err(field(
                "levels.noise_dbm",
                format!("{} dBm is not below the {:.1} dBm transmit power", self.levels.noise_dbm, self.tx_power_dbm()?),
            ));
        }
        self.estimator_config()?.validate().map_err(|e| field("estimator", e.to_string()))?;
        if !matches!(self.estimator.qam_order, 4 | 16 | 64) {
            return Err(field("estimator.qam_order", "must be 4, 16 or 64".into()));
        }
        if !(self.estimator.impulse_peak > 0.0) {
            return Err(field("estimator.impulse_peak", "must be positive".into()));
        }
        if self.run.n_symbols == 0 || self.run.n_seeds == 0 {
            return Err(field("run", "n_symbols and n_seeds must be positive".into()));
        }
        if self.run.cancellers.is_empty() {
            return Err(field("run.cancellers", "list at least one canceller".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SubcarrierGrid> {
        let g = &self.grid;
        let (dl, ul) = match g.duplex {
            DuplexPreset::Custom => {
                let (Some(dl), Some(ul)) = (g.dl, g.ul) else {
                    return Err(Error::Config("grid: custom duplex needs both dl and ul".into()));
                };
                (Band::new(dl[0], dl[1])?, Band::new(ul[0], ul[1])?)
            }
            preset => {
                if g.dl.is_some() || g.ul.is_some() {
                    return Err(Error::Config("grid: dl/ul only apply with duplex = \"custom\"".into()));
                }
                preset_bands(preset, g.num_subcarriers)?
            }
        };
        SubcarrierGrid::new(g.num_subcarriers, g.spacing_hz, g.cp_length, dl, ul)
            .map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn pa(&self) -> Result<PaPolynomial> {
        match self.pa.model {
            PaModel::Measured => Ok(default_measured_pa()),
            PaModel::Linear => Ok(PaPolynomial::linear(default_measured_pa().coeff(0).re)),
            PaModel::Custom => {
                let c = self
                    .pa
                    .coeffs
                    .as_ref()
                    .ok_or_else(|| Error::Config("pa.coeffs: required for the custom model".into()))?;
                PaPolynomial::new(c.iter().map(|v| C64::new(v[0], v[1])).collect())
                    .map_err(|e| Error::Config(format!("pa.coeffs: {e}")))
            }
        }
    }

    pub fn iq(&self) -> Result<IqImbalance> {
        if !self.iq.enabled {
            return Ok(IqImbalance::none());
        }
        irr_to_b(self.iq.irr_db, self.iq.phase_rad).map_err(|e| Error::Config(format!("iq: {e}")))
    }

    pub fn noise_power(&self) -> f64 {
        db_to_lin(self.levels.noise_dbm)
    }

    /// Frequency-domain DL amplitude giving the configured PA drive.
    pub fn a_digi(&self) -> Result<f64> {
        let g = self.grid()?;
        Ok(self.levels.drive_rms * g.num_subcarriers() as f64 / (g.dl().len() as f64).sqrt())
    }

    /// Linear-term transmit power per DL subcarrier.
    pub fn tx_power_dbm(&self) -> Result<f64> {
        let a1 = self.pa()?.coeff(0).norm();
        Ok(fdsic::lin_to_db((a1 * self.a_digi()?).powi(2)))
    }

    pub fn gamma(&self) -> f64 {
        db_to_lin(self.estimator.gamma_dbm.unwrap_or(self.levels.noise_dbm))
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        let e = &self.estimator;
        Ok(EstimatorConfig {
            gamma: self.gamma(),
            k_max: e.k_max,
            n_impulse: e.n_impulse,
            n_train: e.n_train,
            regularization: e.regularization,
            moment_mode: e.moment_mode.parse().map_err(|e| Error::Config(format!("estimator.moment_mode: {e}")))?,
            iq_refinements: e.iq_refinements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_at_desk_scale() {
        let (dl, ul) = preset_bands(DuplexPreset::Sbfd, 256).unwrap();
        assert_eq!((dl.start, dl.end), (77, 179));
        assert_eq!((ul.start, ul.end), (181, 216));
        let (_, ov) = preset_bands(DuplexPreset::Overlap, 256).unwrap();
        assert_eq!((ov.start, ov.end), (141, 217));
        let (dl, ul) = preset_bands(DuplexPreset::Ibfd, 2048).unwrap();
        assert_eq!(dl, ul);
        assert_eq!(dl.start + dl.end, 2048);
    }

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(ScenarioSpec::from_toml("").unwrap(), ScenarioSpec::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioSpec::from_toml("sed = 3").is_err());
        assert!(ScenarioSpec::from_toml("[grid]\nnum_subcarrier = 64").is_err());
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let e = ScenarioSpec::from_toml("[levels]\nnoise_dbm = 90.0").unwrap_err();
        assert!(e.to_string().contains("levels.noise_dbm"), "{e}");
        let e = ScenarioSpec::from_toml("[channel]\nsource = \"file\"\npath = \"/nonexistent/taps.csv\"").unwrap_err();
        assert!(e.to_string().contains("channel.path"), "{e}");
        let e = ScenarioSpec::from_toml("[estimator]\nn_impulse = 2").unwrap_err();
        assert!(e.to_string().contains("estimator"), "{e}");
        assert!(ScenarioSpec::from_toml("[grid]\nduplex = \"custom\"").is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut s = ScenarioSpec::preset(DuplexPreset::Overlap);
        s.run.cancellers = vec![Canceller::Proposed, Canceller::Linear];
        s.estimator.gamma_dbm = Some(-95.0);
        assert_eq!(ScenarioSpec::from_toml(&s.to_toml()).unwrap(), s);
    }
}
