//! Two-stage frequency-domain SIC.
//!
//! Estimation runs `b -> a -> H -> K_p`: the IQ mirror coefficient from
//! DL mirror pairs, the PA coefficients from impulse pilots received over
//! the known LoS gain, the per-subcarrier SI channel with the PA model
//! folded into one scalar regressor, and the per-subcarrier order sets
//! from predicted SI power. Running regenerates the SI on UL subcarriers
//! from the DL symbol and subtracts it.

mod ls;

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

pub use ls::{ls_solve, scalar_ls, AUTO_RIDGE_COND};

use crate::counter::{OpCounter, Ops, Stage};
use crate::imd::{predict_si_power, ImdRecursion, MomentMode};
use crate::impairments::iq_freq;
use crate::ofdm::{mirror_index, Band, FreqSymbol, SubcarrierGrid, TimeSignal};
use crate::{Error, Result, C64};

/// Columns or regressors whose energy is below this fraction of the
/// largest one are treated as absent (FFT round-off, not signal).
const ENERGY_FLOOR: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Inclusion threshold on predicted per-order SI power (linear, mW).
    pub gamma: f64,
    pub k_max: usize,
    pub n_impulse: usize,
    pub n_train: usize,
    pub regularization: f64,
    pub moment_mode: MomentMode,
    /// Passes of [`refine_iq`] after the first mirror-pair solve.
    pub iq_refinements: usize,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.n_impulse < self.k_max + 1 {
            return Err(Error::Config(format!(
                "need at least k_max + 1 = {} impulse symbols, got {}",
                self.k_max + 1,
                self.n_impulse
            )));
        }
        if self.n_train == 0 {
            return Err(Error::Config("need at least one training symbol".into()));
        }
        if self.regularization < 0.0 {
            return Err(Error::Config("regularization must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One received impulse pilot (CP removed).
#[derive(Clone, Debug)]
pub struct ImpulseObservation {
    pub amplitude: f64,
    pub omega: f64,
    pub rx: TimeSignal,
}

/// One data training symbol and what was received for it.
#[derive(Clone, Debug)]
pub struct DataObservation {
    pub tx: FreqSymbol,
    pub rx: FreqSymbol,
}

/// Impulse pilots first, then data training symbols.
#[derive(Clone, Debug)]
pub struct TrainingBuffer {
    pub pilot_band: Band,
    pub impulse: Vec<ImpulseObservation>,
    pub data: Vec<DataObservation>,
}

/// Per-subcarrier scalar channel estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimate {
    pub h: Vec<C64>,
    /// `false` where the regressor carried no energy.
    pub valid: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SicCoefficients {
    pub num_subcarriers: usize,
    pub ul: Band,
    pub h_hat: Vec<C64>,
    pub h_valid: Vec<bool>,
    /// `a_hat[k]` is the estimate of `a_{2k+1}`.
    pub a_hat: Vec<C64>,
    pub b_hat: C64,
    /// Nonlinear orders `k >= 1` kept on each subcarrier.
    pub basis_sets: Vec<Vec<usize>>,
}

impl SicCoefficients {
    pub fn k_max(&self) -> usize {
        self.a_hat.len() - 1
    }

    /// Highest order any subcarrier needs.
    pub fn k_run(&self) -> usize {
        self.basis_sets.iter().flat_map(|s| s.iter().copied()).max().unwrap_or(0)
    }

    pub fn total_basis(&self) -> usize {
        self.basis_sets.iter().map(|s| s.len()).sum()
    }

    /// Text dump: `key=value` header lines, then `p,h_re,h_im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "P={}", self.num_subcarriers)?;
        writeln!(w, "ul={},{}", self.ul.start, self.ul.end)?;
        for (k, a) in self.a_hat.iter().enumerate() {
            writeln!(w, "a_{}={:e},{:e}", 2 * k + 1, a.re, a.im)?;
        }
        writeln!(w, "b_iq={:e},{:e}", self.b_hat.re, self.b_hat.im)?;
        for p in self.ul.iter() {
            let ks: Vec<String> = self.basis_sets[p].iter().map(|k| k.to_string()).collect();
            writeln!(w, "K_{p}={}", ks.join(" "))?;
        }
        writeln!(w, "p,h_re,h_im")?;
        for p in self.ul.iter() {
            if self.h_valid[p] {
                writeln!(w, "{p},{:e},{:e}", self.h_hat[p].re, self.h_hat[p].im)?;
            } else {
                writeln!(w, "{p},nan,nan")?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut p_size = None;
        let mut ul = None;
        let mut a: Vec<(usize, C64)> = Vec::new();
        let mut b = None;
        let mut sets: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut rows: Vec<(usize, Option<C64>)> = Vec::new();
        let mut in_rows = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let ln = i + 1;
            let bad = |msg: &str| Error::Parse { line: ln, msg: msg.to_string() };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if in_rows {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 3 {
                    return Err(bad("expected p,h_re,h_im"));
                }
                let p: usize = f[0].parse().map_err(|_| bad("bad subcarrier index"))?;
                let re: f64 = f[1].parse().map_err(|_| bad("bad h_re"))?;
                let im: f64 = f[2].parse().map_err(|_| bad("bad h_im"))?;
                rows.push((p, (!re.is_nan()).then_some(C64::new(re, im))));
                continue;
            }
            if line == "p,h_re,h_im" {
                in_rows = true;
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let complex = |v: &str| -> Result<C64> {
                let (re, im) = v.split_once(',').ok_or_else(|| bad("expected re,im"))?;
                Ok(C64::new(
                    re.trim().parse().map_err(|_| bad("bad real part"))?,
                    im.trim().parse().map_err(|_| bad("bad imaginary part"))?,
                ))
            };
            if key == "P" {
                p_size = Some(val.parse::<usize>().map_err(|_| bad("bad P"))?);
            } else if key == "ul" {
                let (s, e) = val.split_once(',').ok_or_else(|| bad("expected start,end"))?;
                let s = s.parse().map_err(|_| bad("bad ul start"))?;
                let e = e.parse().map_err(|_| bad("bad ul end"))?;
                ul = Some(Band::new(s, e).map_err(|_| bad("ul start after end"))?);
            } else if key == "b_iq" {
                b = Some(complex(val)?);
            } else if let Some(order) = key.strip_prefix("a_") {
                let order: usize = order.parse().map_err(|_| bad("bad order"))?;
                if order % 2 == 0 {
                    return Err(bad("even PA order"));
                }
                a.push((order / 2, complex(val)?));
            } else if let Some(p) = key.strip_prefix("K_") {
                let p: usize = p.parse().map_err(|_| bad("bad subcarrier index"))?;
                let ks = val
                    .split_whitespace()
                    .map(|k| k.parse::<usize>().map_err(|_| bad("bad order index")))
                    .collect::<Result<Vec<_>>>()?;
                sets.push((p, ks));
            } else {
                return Err(bad(&format!("unknown key {key:?}")));
            }
        }
        let n = p_size.ok_or_else(|| Error::Parse { line: 0, msg: "missing P".into() })?;
        let ul = ul.ok_or_else(|| Error::Parse { line: 0, msg: "missing ul".into() })?;
        let b_hat = b.ok_or_else(|| Error::Parse { line: 0, msg: "missing b_iq".into() })?;
        if ul.end >= n {
            return Err(Error::Parse { line: 0, msg: "ul outside grid".into() });
        }
        let k_max = a.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let mut a_hat = vec![C64::new(0.0, 0.0); k_max + 1];
        for (k, v) in a {
            a_hat[k] = v;
        }
        let mut basis_sets = vec![Vec::new(); n];
        for (p, ks) in sets {
            if p >= n || ks.iter().any(|&k| k == 0 || k > k_max) {
                return Err(Error::Parse { line: 0, msg: format!("invalid basis set for p={p}") });
            }
            basis_sets[p] = ks;
        }
        let mut h_hat = vec![C64::new(0.0, 0.0); n];
        let mut h_valid = vec![false; n];
        for (p, h) in rows {
            if p >= n {
                return Err(Error::Parse { line: 0, msg: format!("subcarrier {p} outside grid") });
            }
            if let Some(h) = h {
                h_hat[p] = h;
                h_valid[p] = true;
            }
        }
        Ok(SicCoefficients { num_subcarriers: n, ul, h_hat, h_valid, a_hat, b_hat, basis_sets })
    }
}

/// Mirror coefficient from DL mirror pairs.
///
/// For each DL subcarrier `p` whose mirror is also excited, solve
/// `Y[p] = G X[p] + G b conj(X[-p])` over the training symbols for
/// `(G, G b)`, then combine the per-pair ratios weighted by `|G|^2`.
/// The PA's nonlinear terms act as noise here; [`refine_iq`] removes
/// that bias once PA and channel estimates exist.
pub fn estimate_iq(data: &[DataObservation], dl: Band, counter: &mut OpCounter) -> Result<C64> {
    let y: Vec<&[C64]> = data.iter().map(|d| d.rx.values.as_slice()).collect();
    pair_ls(data, &y, dl, counter)
}

fn pair_ls(data: &[DataObservation], y_obs: &[&[C64]], dl: Band, counter: &mut OpCounter) -> Result<C64> {
    if data.len() < 2 {
        return Err(Error::Unidentifiable("b_iq from fewer than two symbols".into()));
    }
    let p_size = data[0].tx.values.len();
    let m = data.len();
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    let mut pairs = 0;
    for p in dl.iter() {
        let pm = mirror_index(p, p_size);
        if !dl.contains(pm) {
            continue;
        }
        let a = DMatrix::from_fn(m, 2, |i, j| {
            if j == 0 {
                data[i].tx.values[p]
            } else {
                data[i].tx.values[pm].conj()
            }
        });
        let y: Vec<C64> = y_obs.iter().map(|v| v[p]).collect();
        counter.record(Stage::Iq, Ops::ls(m, 2));
        let Ok(c) = ls_solve(&a, &y, 0.0) else {
            continue;
        };
        num += c[0].conj() * c[1];
        den += c[0].norm_sqr();
        pairs += 1;
    }
    counter.record(Stage::Iq, Ops::new(2 * pairs + 1, 2 * pairs));
    if pairs == 0 || den == 0.0 {
        return Err(Error::Unidentifiable("b_iq: no DL subcarrier has an excited mirror".into()));
    }
    Ok(num / den)
}

/// One refinement pass: strip the predicted nonlinear SI from the DL
/// observations and redo the mirror-pair solve on what is left.
///
/// The true `(a, b, H)` is a fixed point, so in a noiseless chain the
/// passes converge to the exact `b`.
pub fn refine_iq(
    data: &[DataObservation],
    dl: Band,
    a_hat: &[C64],
    b_hat: C64,
    counter: &mut OpCounter,
) -> Result<C64> {
    let k_max = a_hat.len() - 1;
    let phis: Vec<Vec<Vec<C64>>> = data
        .iter()
        .map(|d| bases(&d.tx.values, b_hat, k_max, excited(&d.tx.values), Stage::Iq, counter))
        .collect();
    let h = channel_ls(data, &phis, a_hat, dl, Stage::Iq, counter);
    let mut cleaned = Vec::with_capacity(data.len());
    for (d, phi) in data.iter().zip(&phis) {
        let mut y = d.rx.values.clone();
        for p in dl.iter() {
            if h.valid[p] {
                let nl: C64 = (1..=k_max).map(|k| a_hat[k] * phi[k][p]).sum();
                y[p] -= h.h[p] * nl;
            }
        }
        counter.record(Stage::Iq, Ops::new((dl.len() * (k_max + 1)) as u64, (dl.len() * k_max) as u64));
        cleaned.push(y);
    }
    let y: Vec<&[C64]> = cleaned.iter().map(|v| v.as_slice()).collect();
    pair_ls(data, &y, dl, counter)
}

/// Sample index of the impulse peak, `-Omega P / 2 pi mod P`.
pub fn pilot_peak(omega: f64, p: usize) -> usize {
    ((-omega * p as f64 / (2.0 * PI)).rem_euclid(p as f64).round() as usize) % p
}

/// PA coefficients from impulse pilots.
///
/// Each pilot gives one equation at the LoS arrival of its peak,
/// `y = h_LoS sum_k a_{2k+1} A^{2k+1} (1+b) |1+b|^{2k} (|band|/P)^{2k+1}`,
/// so the LS has `k_max + 1` unknowns whatever the UL size.
pub fn estimate_pa(
    impulse: &[ImpulseObservation],
    pilot_band: Band,
    los_gain: C64,
    los_tap: usize,
    b_hat: C64,
    k_max: usize,
    regularization: f64,
    counter: &mut OpCounter,
) -> Result<Vec<C64>> {
    if impulse.len() < k_max + 1 {
        return Err(Error::Underdetermined(format!(
            "{} impulse symbols for {} PA coefficients",
            impulse.len(),
            k_max + 1
        )));
    }
    let g = C64::new(1.0, 0.0) + b_hat;
    let m = impulse.len();
    let mut y = Vec::with_capacity(m);
    let a = DMatrix::from_fn(m, k_max + 1, |i, k| {
        let obs = &impulse[i];
        let p = obs.rx.samples.len();
        let frac = pilot_band.len() as f64 / p as f64;
        let amp = obs.amplitude * frac;
        los_gain * g * (g.norm_sqr() * amp * amp).powi(k as i32) * amp
    });
    for obs in impulse {
        let p = obs.rx.samples.len();
        y.push(obs.rx.samples[(pilot_peak(obs.omega, p) + los_tap) % p]);
    }
    counter.record(Stage::Pa, Ops::new((m * (k_max + 1)) as u64, 0) + Ops::ls(m, k_max + 1));
    ls_solve(&a, &y, regularization)
}

/// Nonlinear bases `Phi_1..=Phi_{2k+1}` of `x` after mirroring with `b`.
fn bases(x: &[C64], b: C64, k: usize, dl_len: usize, stage: Stage, counter: &mut OpCounter) -> Vec<Vec<C64>> {
    let x_iq = if b == C64::new(0.0, 0.0) { x.to_vec() } else { iq_freq(x, b) };
    if b != C64::new(0.0, 0.0) {
        counter.mul(stage, dl_len as u64);
        counter.add(stage, dl_len as u64);
    }
    let mut out = vec![x_iq];
    if k > 0 {
        let mut rec = ImdRecursion::new(&out[0]);
        for _ in 0..k {
            let next = rec.step();
            out.push(next);
        }
        counter.record(stage, rec.ops);
    }
    out
}

fn excited(x: &[C64]) -> usize {
    x.iter().filter(|v| **v != C64::new(0.0, 0.0)).count()
}

/// SI channel with the PA model folded into one regressor per
/// subcarrier, `g_m[p] = sum_k a_k Phi_{k,m}[p]`, then scalar LS.
pub fn estimate_channel(
    data: &[DataObservation],
    a_hat: &[C64],
    b_hat: C64,
    ul: Band,
    counter: &mut OpCounter,
) -> Result<ChannelEstimate> {
    if data.is_empty() {
        return Err(Error::Underdetermined("no training symbols".into()));
    }
    let k_max = a_hat.len() - 1;
    let phis: Vec<Vec<Vec<C64>>> = data
        .iter()
        .map(|d| bases(&d.tx.values, b_hat, k_max, excited(&d.tx.values), Stage::Transform, counter))
        .collect();
    Ok(channel_ls(data, &phis, a_hat, ul, Stage::Channel, counter))
}

fn channel_ls(
    data: &[DataObservation],
    phis: &[Vec<Vec<C64>>],
    a_hat: &[C64],
    band: Band,
    stage: Stage,
    counter: &mut OpCounter,
) -> ChannelEstimate {
    let p_size = data[0].tx.values.len();
    let k_max = a_hat.len() - 1;
    let g: Vec<Vec<C64>> = band
        .iter()
        .map(|p| phis.iter().map(|phi| a_hat.iter().zip(phi).map(|(a, f)| a * f[p]).sum::<C64>()).collect())
        .collect();
    let m = data.len() as u64;
    let n = band.len() as u64;
    counter.record(stage, Ops::new(m * (k_max as u64 + 1) * n, m * k_max as u64 * n));
    let energy: Vec<f64> = g.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum()).collect();
    let floor = ENERGY_FLOOR * energy.iter().cloned().fold(0.0, f64::max);
    let mut h = vec![C64::new(0.0, 0.0); p_size];
    let mut valid = vec![false; p_size];
    for (i, p) in band.iter().enumerate() {
        counter.record(stage, Ops::ls(data.len(), 1));
        if energy[i] <= floor {
            continue;
        }
        let y: Vec<C64> = data.iter().map(|d| d.rx.values[p]).collect();
        if let Some(v) = scalar_ls(&g[i], &y) {
            h[p] = v;
            valid[p] = true;
        }
    }
    ChannelEstimate { h, valid }
}

/// Keep order `k` on subcarrier `p` while
/// `|a_k|^2 mu_k[p] |H[p]|^2 > gamma`, stopping at the first order that
/// fails.
pub fn select_basis(
    a_hat: &[C64],
    mu: &[Vec<f64>],
    h: &ChannelEstimate,
    gamma: f64,
    k_max: usize,
    ul: Band,
    counter: &mut OpCounter,
) -> Vec<Vec<usize>> {
    let p_size = h.h.len();
    let power = predict_si_power(a_hat, mu, &h.h);
    let mut sets = vec![Vec::new(); p_size];
    for p in ul.iter() {
        if !h.valid[p] {
            continue;
        }
        for k in 1..=k_max.min(a_hat.len() - 1).min(mu.len() - 1) {
            counter.record(Stage::Select, Ops::new(2, 0));
            if power[k][p] > gamma {
                sets[p].push(k);
            } else {
                break;
            }
        }
    }
    sets
}

/// Everything the estimation step needs besides the training buffer.
#[derive(Clone, Debug)]
pub struct EstimationInputs<'a> {
    pub grid: &'a SubcarrierGrid,
    /// DL amplitude the basis-power tables are built for.
    pub a_digi: f64,
    pub los_gain: C64,
    pub los_tap: usize,
    pub config: &'a EstimatorConfig,
    /// Skip the IQ estimate and use this value instead.
    pub force_b: Option<C64>,
}

/// Full estimation step, `b -> a -> H -> K_p`.
pub fn estimate(buffer: &TrainingBuffer, inp: &EstimationInputs<'_>, counter: &mut OpCounter) -> Result<SicCoefficients> {
    let cfg = inp.config;
    cfg.validate()?;
    let grid = inp.grid;
    let mut b_hat = match inp.force_b {
        Some(b) => b,
        None => estimate_iq(&buffer.data, grid.dl(), counter)?,
    };
    let pa = |b: C64, counter: &mut OpCounter| {
        estimate_pa(&buffer.impulse, buffer.pilot_band, inp.los_gain, inp.los_tap, b, cfg.k_max, cfg.regularization, counter)
    };
    if inp.force_b.is_none() {
        for _ in 0..cfg.iq_refinements {
            let a = pa(b_hat, counter)?;
            b_hat = refine_iq(&buffer.data, grid.dl(), &a, b_hat, counter)?;
        }
    }
    let a_hat = pa(b_hat, counter)?;
    let h = estimate_channel(&buffer.data, &a_hat, b_hat, grid.ul(), counter)?;
    let mu = crate::imd::mu_tables(grid, b_hat, inp.a_digi, cfg.k_max, cfg.moment_mode);
    let basis_sets = select_basis(&a_hat, &mu, &h, cfg.gamma, cfg.k_max, grid.ul(), counter);
    Ok(SicCoefficients {
        num_subcarriers: grid.num_subcarriers(),
        ul: grid.ul(),
        h_hat: h.h,
        h_valid: h.valid,
        a_hat,
        b_hat,
        basis_sets,
    })
}

/// Running step: regenerate `H (a_1 Phi_1 + sum_{k in K_p} a_k Phi_k)` on
/// UL subcarriers and subtract it. Other subcarriers pass through.
pub fn run_sic(y_rx: &FreqSymbol, x_dl: &FreqSymbol, coeffs: &SicCoefficients, counter: &mut OpCounter) -> Result<FreqSymbol> {
    let n = coeffs.num_subcarriers;
    if y_rx.values.len() != n || x_dl.values.len() != n {
        return Err(Error::Mismatch(format!(
            "coefficients are for {n} subcarriers, symbols have {} and {}",
            y_rx.values.len(),
            x_dl.values.len()
        )));
    }
    let k_run = coeffs.k_run();
    let phi = bases(&x_dl.values, coeffs.b_hat, k_run, excited(&x_dl.values), Stage::RunTransform, counter);
    let mut out = y_rx.values.clone();
    let mut ops = Ops::default();
    for p in coeffs.ul.iter() {
        if !coeffs.h_valid[p] {
            continue;
        }
        // combined coefficients H[p] a_k are formed once per estimate
        let h = coeffs.h_hat[p];
        let mut est = h * coeffs.a_hat[0] * phi[0][p];
        for &k in &coeffs.basis_sets[p] {
            est += h * coeffs.a_hat[k] * phi[k][p];
        }
        out[p] -= est;
        let terms = 1 + coeffs.basis_sets[p].len() as u64;
        ops += Ops::new(terms, terms);
    }
    counter.record(Stage::Running, ops);
    Ok(FreqSymbol::new(out, y_rx.index))
}

/// Scalar channel on a linear regressor `X + b conj(X[-p])`; `b = 0` is
/// plain linear SIC.
pub fn estimate_linear(data: &[DataObservation], b: C64, ul: Band) -> ChannelEstimate {
    let p_size = data.first().map_or(0, |d| d.tx.values.len());
    let regs: Vec<Vec<C64>> = data.iter().map(|d| iq_freq(&d.tx.values, b)).collect();
    let mut h = vec![C64::new(0.0, 0.0); p_size];
    let mut valid = vec![false; p_size];
    for p in ul.iter() {
        let g: Vec<C64> = regs.iter().map(|r| r[p]).collect();
        let y: Vec<C64> = data.iter().map(|d| d.rx.values[p]).collect();
        if let Some(v) = scalar_ls(&g, &y) {
            h[p] = v;
            valid[p] = true;
        }
    }
    ChannelEstimate { h, valid }
}

/// `Y - H_lin X` on UL subcarriers. Pass an IQ-mirrored `X` for the
/// IQ-only variant.
pub fn baseline_linear(y_rx: &FreqSymbol, x_dl: &FreqSymbol, h_lin: &ChannelEstimate, ul: Band) -> FreqSymbol {
    let mut out = y_rx.values.clone();
    for p in ul.iter() {
        if h_lin.valid[p] {
            out[p] -= h_lin.h[p] * x_dl.values[p];
        }
    }
    FreqSymbol::new(out, y_rx.index)
}

/// Per-subcarrier joint LS over all basis orders.
#[derive(Clone, Debug, PartialEq)]
pub struct FullLsCoefficients {
    pub num_subcarriers: usize,
    pub ul: Band,
    pub b_hat: C64,
    pub k_max: usize,
    /// `(k, C_{p,k})` for the columns kept on each subcarrier.
    pub c: Vec<Vec<(usize, C64)>>,
}

pub fn baseline_full_ls(
    data: &[DataObservation],
    grid: &SubcarrierGrid,
    k_max: usize,
    b_hat: C64,
    regularization: f64,
    counter: &mut OpCounter,
) -> Result<FullLsCoefficients> {
    let m = data.len();
    if m < k_max + 1 {
        return Err(Error::Underdetermined(format!("{m} training symbols for {} unknowns", k_max + 1)));
    }
    let ul = grid.ul();
    let phis: Vec<Vec<Vec<C64>>> = data
        .iter()
        .map(|d| bases(&d.tx.values, b_hat, k_max, excited(&d.tx.values), Stage::FullLsTransform, counter))
        .collect();
    let col_energy = |k: usize, p: usize| -> f64 { phis.iter().map(|f| f[k][p].norm_sqr()).sum() };
    let peak: Vec<f64> = (0..=k_max)
        .map(|k| ul.iter().map(|p| col_energy(k, p)).fold(0.0, f64::max))
        .collect();
    let mut c = vec![Vec::new(); grid.num_subcarriers()];
    for p in ul.iter() {
        let cols: Vec<usize> =
            (0..=k_max).filter(|&k| peak[k] > 0.0 && col_energy(k, p) > ENERGY_FLOOR * peak[k]).collect();
        if cols.is_empty() {
            continue;
        }
        let a = DMatrix::from_fn(m, cols.len(), |i, j| phis[i][cols[j]][p]);
        let y: Vec<C64> = data.iter().map(|d| d.rx.values[p]).collect();
        counter.record(Stage::FullLs, Ops::ls(m, cols.len()));
        let sol = ls_solve(&a, &y, regularization)?;
        c[p] = cols.into_iter().zip(sol).collect();
    }
    Ok(FullLsCoefficients { num_subcarriers: grid.num_subcarriers(), ul, b_hat, k_max, c })
}

pub fn run_full_ls(
    y_rx: &FreqSymbol,
    x_dl: &FreqSymbol,
    coeffs: &FullLsCoefficients,
    counter: &mut OpCounter,
) -> Result<FreqSymbol> {
    if y_rx.values.len() != coeffs.num_subcarriers || x_dl.values.len() != coeffs.num_subcarriers {
        return Err(Error::Mismatch("symbol length differs from coefficient grid".into()));
    }
    let phi = bases(&x_dl.values, coeffs.b_hat, coeffs.k_max, excited(&x_dl.values), Stage::FullLsRunning, counter);
    let mut out = y_rx.values.clone();
    let mut ops = Ops::default();
    for p in coeffs.ul.iter() {
        for &(k, ck) in &coeffs.c[p] {
            out[p] -= ck * phi[k][p];
        }
        let n = coeffs.c[p].len() as u64;
        ops += Ops::new(n, n);
    }
    counter.record(Stage::FullLsRunning, ops);
    Ok(FreqSymbol::new(out, y_rx.index))
}
