//! Ray-based MIMO SI channel, analog beams and the effective scalar
//! channel seen by the digital canceller.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::ofdm::{dft_vec, SubcarrierGrid};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub gain: C64,
    pub delay_s: f64,
    pub aoa: f64,
    pub aod: f64,
    pub is_los: bool,
}

/// Exactly one LoS ray, holding the minimum delay; delays finite and
/// nonnegative.
pub fn validate_rays(rays: &[Ray]) -> Result<()> {
    if rays.is_empty() {
        return Err(Error::NoRays);
    }
    for (i, r) in rays.iter().enumerate() {
        if !(r.delay_s >= 0.0) || !r.delay_s.is_finite() {
            return Err(Error::InvalidRay { index: i, msg: format!("delay {} s", r.delay_s) });
        }
        if !r.gain.re.is_finite() || !r.gain.im.is_finite() {
            return Err(Error::InvalidRay { index: i, msg: "non-finite gain".into() });
        }
    }
    let los: Vec<usize> = (0..rays.len()).filter(|&i| rays[i].is_los).collect();
    match los.as_slice() {
        [i] => {
            let d = rays[*i].delay_s;
            if let Some(j) = (0..rays.len()).find(|&j| rays[j].delay_s < d) {
                return Err(Error::InvalidRay {
                    index: j,
                    msg: "NLoS ray arrives before the LoS ray".into(),
                });
            }
            Ok(())
        }
        [] => Err(Error::InvalidRay { index: 0, msg: "no LoS ray".into() }),
        [_, second, ..] => Err(Error::InvalidRay { index: *second, msg: "second LoS ray".into() }),
    }
}

/// Uniform planar array, element spacing in wavelengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn upa(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("array needs at least one element".into()));
        }
        Ok(ArrayGeometry { rows, cols, spacing })
    }

    pub fn n_elements(&self) -> usize {
        self.rows * self.cols
    }
}

/// Steering vector towards azimuth `angle` in the array's horizontal
/// plane (zero elevation).
pub fn array_response(geom: &ArrayGeometry, angle: f64) -> Vec<C64> {
    array_response_2d(geom, angle, 0.0)
}

/// Entry `(r, c)` is `exp(j 2 pi d (c cos(el) sin(az) + r sin(el)))`.
pub fn array_response_2d(geom: &ArrayGeometry, az: f64, el: f64) -> Vec<C64> {
    let u = el.cos() * az.sin();
    let v = el.sin();
    let mut out = Vec::with_capacity(geom.n_elements());
    for r in 0..geom.rows {
        for c in 0..geom.cols {
            let ph = 2.0 * PI * geom.spacing * (c as f64 * u + r as f64 * v);
            out.push(C64::from_polar(1.0, ph));
        }
    }
    out
}

/// Analog beam with unit-modulus entries scaled by `1/sqrt(N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamVector {
    pub weights: Vec<C64>,
}

impl BeamVector {
    /// Beam matched to the steering vector at `angle`.
    pub fn steer(geom: &ArrayGeometry, angle: f64) -> Self {
        Self::from_phases(&array_response(geom, angle))
    }

    /// Keeps only the phase of each entry.
    pub fn from_phases(v: &[C64]) -> Self {
        let s = 1.0 / (v.len() as f64).sqrt();
        BeamVector { weights: v.iter().map(|z| C64::from_polar(s, z.arg())).collect() }
    }
}

/// Per-tap `N_rx x N_tx` channel matrices.
#[derive(Clone, Debug)]
pub struct MimoTaps {
    pub taps: Vec<DMatrix<C64>>,
    pub los_tap: usize,
}

/// Snap each ray to `round(delay / T_s)` and accumulate
/// `g e_rx(aoa) e_tx(aod)^H`. `n_taps` must not exceed the CP.
pub fn build_mimo_taps(
    rays: &[Ray],
    geom_tx: &ArrayGeometry,
    geom_rx: &ArrayGeometry,
    grid: &SubcarrierGrid,
    n_taps: usize,
) -> Result<MimoTaps> {
    build_mimo_taps_with_los(rays, geom_tx, geom_rx, grid, n_taps, None)
}

/// As [`build_mimo_taps`], with an optional per-element matrix replacing
/// the far-field outer product of the LoS ray (near-field data).
pub fn build_mimo_taps_with_los(
    rays: &[Ray],
    geom_tx: &ArrayGeometry,
    geom_rx: &ArrayGeometry,
    grid: &SubcarrierGrid,
    n_taps: usize,
    los_override: Option<&DMatrix<C64>>,
) -> Result<MimoTaps> {
    validate_rays(rays)?;
    if n_taps == 0 || n_taps > grid.cp_length() {
        return Err(Error::Config(format!(
            "tap count {n_taps} must be in 1..={} (cyclic prefix)",
            grid.cp_length()
        )));
    }
    let (nr, nt) = (geom_rx.n_elements(), geom_tx.n_elements());
    if let Some(m) = los_override {
        if m.shape() != (nr, nt) {
            return Err(Error::Config(format!("LoS override must be {nr}x{nt}")));
        }
    }
    let ts = grid.sample_period();
    let mut taps = vec![DMatrix::<C64>::zeros(nr, nt); n_taps];
    let mut los_tap = 0;
    for (i, ray) in rays.iter().enumerate() {
        let n = (ray.delay_s / ts).round() as usize;
        if n >= n_taps {
            return Err(Error::InvalidRay {
                index: i,
                msg: format!("delay maps to tap {n}, beyond the {n_taps}-tap window"),
            });
        }
        let outer = match (ray.is_los, los_override) {
            (true, Some(m)) => m.clone(),
            _ => {
                let er = DMatrix::from_column_slice(nr, 1, &array_response(geom_rx, ray.aoa));
                let et = DMatrix::from_column_slice(nt, 1, &array_response(geom_tx, ray.aod));
                er * et.adjoint()
            }
        };
        taps[n] += outer * ray.gain;
        if ray.is_los {
            los_tap = n;
        }
    }
    Ok(MimoTaps { taps, los_tap })
}

/// Beamformed scalar SI channel.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannel {
    pub taps: Vec<C64>,
    pub freq: Vec<C64>,
    pub los_tap: usize,
    pub los_gain: C64,
}

impl EffectiveChannel {
    pub fn from_taps(taps: Vec<C64>, p: usize, los_tap: usize) -> Result<Self> {
        if taps.len() > p || los_tap >= taps.len() {
            return Err(Error::Config("tap vector longer than the grid".into()));
        }
        let mut padded = taps.clone();
        padded.resize(p, C64::new(0.0, 0.0));
        let los_gain = taps[los_tap];
        Ok(EffectiveChannel { freq: dft_vec(&padded), taps, los_tap, los_gain })
    }

    pub fn scaled(&self, s: f64) -> Self {
        EffectiveChannel {
            taps: self.taps.iter().map(|v| v * s).collect(),
            freq: self.freq.iter().map(|v| v * s).collect(),
            los_tap: self.los_tap,
            los_gain: self.los_gain * s,
        }
    }

    /// Mean `|H[p]|^2` over the grid.
    pub fn mean_power_gain(&self) -> f64 {
        self.freq.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.freq.len() as f64
    }

    /// Linear convolution of a CP-extended symbol, truncated to its length.
    pub fn convolve(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (n, yn) in y.iter_mut().enumerate() {
            for (d, h) in self.taps.iter().enumerate().take(n + 1) {
                *yn += h * x[n - d];
            }
        }
        y
    }
}

/// `h[n] = w^H H[n] f`.
pub fn apply_beams(
    mimo: &MimoTaps,
    f_tx: &BeamVector,
    w_rx: &BeamVector,
    p: usize,
) -> Result<EffectiveChannel> {
    let (nr, nt) = mimo.taps.first().map(|m| m.shape()).ok_or(Error::NoRays)?;
    if f_tx.weights.len() != nt || w_rx.weights.len() != nr {
        return Err(Error::Config(format!(
            "beam sizes {}x{} do not match channel {nr}x{nt}",
            w_rx.weights.len(),
            f_tx.weights.len()
        )));
    }
    let f = DMatrix::from_column_slice(nt, 1, &f_tx.weights);
    let w = DMatrix::from_column_slice(nr, 1, &w_rx.weights);
    let taps: Vec<C64> = mimo.taps.iter().map(|h| (w.adjoint() * h * &f)[(0, 0)]).collect();
    EffectiveChannel::from_taps(taps, p, mimo.los_tap)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthProfile {
    pub n_rays: usize,
    pub los_gain_db: f64,
    /// Power of the first NLoS tap relative to the LoS ray.
    pub nlos_offset_db: f64,
    pub nlos_decay_db_per_tap: f64,
    /// NLoS angles are drawn uniformly within this half-width around the
    /// LoS direction.
    pub angle_spread: f64,
    pub los_angle: f64,
    /// Highest tap an NLoS ray may occupy.
    pub max_tap: usize,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            n_rays: 5,
            los_gain_db: 0.0,
            nlos_offset_db: -10.0,
            nlos_decay_db_per_tap: 3.0,
            angle_spread: PI / 3.0,
            los_angle: 0.0,
            max_tap: 19,
        }
    }
}

/// Ray 0 is the LoS ray at zero delay. NLoS ray `l` sits on tap `l` while
/// that fits under `max_tap`, otherwise on a uniformly drawn tap.
pub fn synth_channel(profile: &SynthProfile, sample_period: f64, seed: u64) -> Result<Vec<Ray>> {
    if profile.n_rays == 0 {
        return Err(Error::Config("n_rays must be at least 1".into()));
    }
    let mut rng = crate::rng(seed);
    let mut rays = vec![Ray {
        gain: C64::new(10f64.powf(profile.los_gain_db / 20.0), 0.0),
        delay_s: 0.0,
        aoa: profile.los_angle,
        aod: profile.los_angle,
        is_los: true,
    }];
    for l in 1..profile.n_rays {
        let tap = if l <= profile.max_tap {
            l
        } else {
            rng.random_range(1..=profile.max_tap.max(1))
        };
        let db = profile.los_gain_db + profile.nlos_offset_db
            - profile.nlos_decay_db_per_tap * (tap as f64 - 1.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let s = profile.angle_spread;
        let aoa = profile.los_angle + rng.random_range(-s..=s);
        let aod = profile.los_angle + rng.random_range(-s..=s);
        rays.push(Ray {
            gain: C64::from_polar(10f64.powf(db / 20.0), phase),
            delay_s: tap as f64 * sample_period,
            aoa,
            aod,
            is_los: false,
        });
    }
    Ok(rays)
}

#[derive(serde::Deserialize, serde::Serialize)]
struct RayRow {
    ray: usize,
    delay_s: f64,
    gain_re: f64,
    gain_im: f64,
    aoa_rad: f64,
    aod_rad: f64,
    is_los: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Rays from a `ray,delay_s,gain_re,gain_im,aoa_rad,aod_rad,is_los` CSV.
pub fn load_taps(path: impl AsRef<Path>) -> Result<Vec<Ray>> {
    let text = std::fs::read_to_string(path)?;
    parse_taps(&text)
}

pub fn parse_taps(text: &str) -> Result<Vec<Ray>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rays = Vec::new();
    for rec in rdr.deserialize::<RayRow>() {
        let row = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rays.len() + 2;
        let is_los = parse_bool(&row.is_los).ok_or_else(|| Error::Parse {
            line,
            msg: format!("is_los must be true/false/1/0, got {:?}", row.is_los),
        })?;
        rays.push(Ray {
            gain: C64::new(row.gain_re, row.gain_im),
            delay_s: row.delay_s,
            aoa: row.aoa_rad,
            aod: row.aod_rad,
            is_los,
        });
    }
    validate_rays(&rays)?;
    Ok(rays)
}

pub fn save_taps(path: impl AsRef<Path>, rays: &[Ray]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for (i, r) in rays.iter().enumerate() {
        w.serialize(RayRow {
            ray: i,
            delay_s: r.delay_s,
            gain_re: r.gain.re,
            gain_im: r.gain.im,
            aoa_rad: r.aoa,
            aod_rad: r.aod,
            is_los: r.is_los.to_string(),
        })
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
