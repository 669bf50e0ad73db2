//! End-to-end runs: build the chain for each seed, collect training,
//! estimate every requested canceller, then cancel fresh data symbols.

use std::collections::BTreeMap;
use std::thread;

use fdsic::chain::{noise_symbol, SiChain};
use fdsic::channel::{
    apply_beams, build_mimo_taps, load_taps, synth_channel, ArrayGeometry, BeamVector, EffectiveChannel, SynthProfile,
};
use fdsic::counter::{OpCounter, Stage};
use fdsic::imd::{default_omega, impulse_pilot};
use fdsic::ofdm::{gen_qam_symbols, FreqSymbol, SubcarrierGrid};
use fdsic::sic::{
    baseline_full_ls, baseline_linear, estimate, estimate_linear, run_full_ls, run_sic, ChannelEstimate,
    DataObservation, EstimationInputs, FullLsCoefficients, ImpulseObservation, SicCoefficients, TrainingBuffer,
};
use fdsic::{rng_stream, Error, Result, C64};

use crate::config::{Canceller, ChannelSource, ScenarioSpec};
use crate::report::{CancellerMetrics, CounterRow, EstimateSummary, MetricsReport};

// PRNG streams and salts per seed
const CHANNEL_SALT: u64 = 0xc4a2_7e11_0000_0000;
const STREAM_TRAIN: u64 = 1;
const STREAM_RUN: u64 = 2;

/// One seed's SI chain and the quantities the estimator may know.
#[derive(Clone, Debug)]
pub struct Chain {
    pub grid: SubcarrierGrid,
    pub si: SiChain,
    pub a_digi: f64,
}

pub fn build_channel(spec: &ScenarioSpec, grid: &SubcarrierGrid, seed: u64) -> Result<EffectiveChannel> {
    let c = &spec.channel;
    let rays = match c.source {
        ChannelSource::Synth => {
            let profile = SynthProfile {
                n_rays: c.n_rays,
                los_gain_db: 0.0,
                nlos_offset_db: c.nlos_offset_db,
                nlos_decay_db_per_tap: c.nlos_decay_db_per_tap,
                angle_spread: c.angle_spread_deg.to_radians(),
                los_angle: c.los_angle_deg.to_radians(),
                max_tap: grid.cp_length() - 1,
            };
            synth_channel(&profile, grid.sample_period(), seed ^ CHANNEL_SALT)?
        }
        ChannelSource::File => {
            let path = c.path.as_ref().ok_or_else(|| Error::Config("channel.path: missing".into()))?;
            load_taps(path)?
        }
    };
    let geom = ArrayGeometry::upa(c.array_rows, c.array_cols, c.element_spacing)?;
    let mimo = build_mimo_taps(&rays, &geom, &geom, grid, grid.cp_length())?;
    let f = BeamVector::steer(&geom, spec.beams.tx_angle_deg.to_radians());
    let w = BeamVector::steer(&geom, spec.beams.rx_angle_deg.to_radians());
    let h = apply_beams(&mimo, &f, &w, grid.num_subcarriers())?;
    let gain = h.mean_power_gain();
    if !(gain > 0.0) {
        return Err(Error::Config("beams null the SI channel completely".into()));
    }
    Ok(h.scaled((fdsic::db_to_lin(-c.isolation_db) / gain).sqrt()))
}

pub fn build_chain(spec: &ScenarioSpec, seed: u64) -> Result<Chain> {
    let grid = spec.grid()?;
    let h = build_channel(spec, &grid, seed)?;
    let si = SiChain::new(grid.clone(), spec.iq()?, spec.pa()?, h, spec.noise_power())?;
    Ok(Chain { grid, si, a_digi: spec.a_digi()? })
}

/// Impulse pilots on the full band with amplitudes ramping up to the
/// configured peak, then QAM training symbols on the DL allocation.
pub fn collect_training(spec: &ScenarioSpec, chain: &Chain, seed: u64) -> Result<TrainingBuffer> {
    let e = &spec.estimator;
    let mut rng = rng_stream(seed, STREAM_TRAIN);
    let full = chain.grid.full_band();
    let pilot_grid = chain.grid.with_dl(full)?;
    let omega = default_omega(&chain.grid);
    let mut impulse = Vec::with_capacity(e.n_impulse);
    for m in 0..e.n_impulse {
        // full band: the time-domain peak equals the amplitude
        let amp = e.impulse_peak * (m + 1) as f64 / e.n_impulse as f64;
        let x = impulse_pilot(&pilot_grid, amp, omega);
        impulse.push(ImpulseObservation { amplitude: amp, omega, rx: chain.si.receive_time(&x, &mut rng)? });
    }
    let mut data = Vec::with_capacity(e.n_train);
    for (m, mut x) in gen_qam_symbols(&chain.grid, e.qam_order, chain.a_digi, e.n_train, seed ^ 0x5eed)?
        .into_iter()
        .enumerate()
    {
        x.index = e.n_impulse + m;
        let rx = chain.si.receive(&x, &mut rng)?;
        data.push(DataObservation { tx: x, rx });
    }
    Ok(TrainingBuffer { pilot_band: full, impulse, data })
}

/// Estimated state of one canceller.
#[derive(Clone, Debug)]
pub enum Fitted {
    None,
    Linear { h: ChannelEstimate, b: C64 },
    Proposed(SicCoefficients),
    FullLs(FullLsCoefficients),
}

impl Fitted {
    pub fn cancel(&self, grid: &SubcarrierGrid, y: &FreqSymbol, x: &FreqSymbol, counter: &mut OpCounter) -> Result<FreqSymbol> {
        match self {
            Fitted::None => Ok(y.clone()),
            Fitted::Linear { h, b } => {
                let x_iq = FreqSymbol::new(fdsic::impairments::iq_freq(&x.values, *b), x.index);
                Ok(baseline_linear(y, &x_iq, h, grid.ul()))
            }
            Fitted::Proposed(c) => run_sic(y, x, c, counter),
            Fitted::FullLs(c) => run_full_ls(y, x, c, counter),
        }
    }
}

/// Estimates for every canceller in `which`. The IQ-only and full-LS
/// variants reuse the proposed estimator's mirror coefficient.
pub fn fit_cancellers(
    spec: &ScenarioSpec,
    chain: &Chain,
    buf: &TrainingBuffer,
    which: &[Canceller],
) -> Result<BTreeMap<Canceller, (Fitted, OpCounter)>> {
    let cfg = spec.estimator_config()?;
    let inputs = |force_b| EstimationInputs {
        grid: &chain.grid,
        a_digi: chain.a_digi,
        los_gain: chain.si.channel.los_gain,
        los_tap: chain.si.channel.los_tap,
        config: &cfg,
        force_b,
    };
    let mut out = BTreeMap::new();
    let needs_proposed =
        which.iter().any(|c| matches!(c, Canceller::Proposed | Canceller::IqOnly | Canceller::FullLs));
    let mut proposed = None;
    if needs_proposed {
        let mut counter = OpCounter::new();
        let c = estimate(buf, &inputs(None), &mut counter)?;
        proposed = Some((c, counter));
    }
    for &w in which {
        let fitted = match w {
            Canceller::None => (Fitted::None, OpCounter::new()),
            Canceller::Linear => {
                let zero = C64::new(0.0, 0.0);
                (Fitted::Linear { h: estimate_linear(&buf.data, zero, chain.grid.ul()), b: zero }, OpCounter::new())
            }
            Canceller::IqOnly => {
                let b = proposed.as_ref().map(|p| p.0.b_hat).unwrap_or_default();
                (Fitted::Linear { h: estimate_linear(&buf.data, b, chain.grid.ul()), b }, OpCounter::new())
            }
            Canceller::Proposed => {
                let (c, k) = proposed.clone().expect("proposed estimate present");
                (Fitted::Proposed(c), k)
            }
            Canceller::PaOnly => {
                let mut counter = OpCounter::new();
                let c = estimate(buf, &inputs(Some(C64::new(0.0, 0.0))), &mut counter)?;
                (Fitted::Proposed(c), counter)
            }
            Canceller::FullLs => {
                let (p, pk) = proposed.as_ref().expect("proposed estimate present");
                let mut counter = OpCounter::new();
                // the mirror coefficient is shared, so is its cost
                counter.record(Stage::Iq, pk.get(Stage::Iq));
                let f = baseline_full_ls(&buf.data, &chain.grid, cfg.k_max, p.b_hat, cfg.regularization, &mut counter)?;
                (Fitted::FullLs(f), counter)
            }
        };
        out.insert(w, fitted);
    }
    Ok(out)
}

/// Per-seed accumulators.
#[derive(Clone, Debug, Default)]
struct SeedResult {
    /// `|Y|^2` summed over symbols, per UL subcarrier.
    received: Vec<f64>,
    /// Noise-free SI power, per UL subcarrier.
    raw_si: Vec<f64>,
    per: BTreeMap<Canceller, SeedCanceller>,
    estimates: Option<EstimateSummary>,
    counters: Vec<CounterRow>,
}

#[derive(Clone, Debug, Default)]
struct SeedCanceller {
    residual: Vec<f64>,
    residual_si: Vec<f64>,
    per_symbol: Vec<f64>,
}

fn run_seed(spec: &ScenarioSpec, seed: u64) -> Result<SeedResult> {
    let chain = build_chain(spec, seed)?;
    let buf = collect_training(spec, &chain, seed)?;
    let mut which = spec.run.cancellers.clone();
    which.sort();
    which.dedup();
    let mut fitted = fit_cancellers(spec, &chain, &buf, &which)?;
    let ul = chain.grid.ul();
    let n_ul = ul.len();
    let mut res = SeedResult { received: vec![0.0; n_ul], raw_si: vec![0.0; n_ul], ..Default::default() };
    for &w in &which {
        res.per.insert(
            w,
            SeedCanceller { residual: vec![0.0; n_ul], residual_si: vec![0.0; n_ul], per_symbol: Vec::new() },
        );
    }
    let mut rng = rng_stream(seed, STREAM_RUN);
    let symbols = gen_qam_symbols(&chain.grid, spec.estimator.qam_order, chain.a_digi, spec.run.n_symbols, seed ^ 0xda7a)?;
    let p = chain.grid.num_subcarriers();
    for x in &symbols {
        let y_si = chain.si.si_only(x)?;
        let noise = noise_symbol(p, chain.si.noise_power, &mut rng);
        let y = FreqSymbol::new(y_si.values.iter().zip(&noise).map(|(a, b)| a + b).collect(), x.index);
        for (i, q) in ul.iter().enumerate() {
            res.received[i] += y.values[q].norm_sqr();
            res.raw_si[i] += y_si.values[q].norm_sqr();
        }
        for (w, (f, counter)) in fitted.iter_mut() {
            let r = f.cancel(&chain.grid, &y, x, counter)?;
            let acc = res.per.get_mut(w).expect("canceller slot");
            let mut total = 0.0;
            for (i, q) in ul.iter().enumerate() {
                let v = r.values[q].norm_sqr();
                acc.residual[i] += v;
                acc.residual_si[i] += (r.values[q] - noise[q]).norm_sqr();
                total += v;
            }
            acc.per_symbol.push(total / n_ul as f64);
        }
    }
    for (w, (f, counter)) in &fitted {
        for (stage, ops) in counter.iter() {
            res.counters.push(CounterRow { stage: format!("{w}:{stage}"), counter: "mul".into(), value: ops.mul });
            res.counters.push(CounterRow { stage: format!("{w}:{stage}"), counter: "add".into(), value: ops.add });
        }
        let t = counter.total();
        res.counters.push(CounterRow { stage: format!("{w}:total"), counter: "mul".into(), value: t.mul });
        res.counters.push(CounterRow { stage: format!("{w}:total"), counter: "add".into(), value: t.add });
        if let (Canceller::Proposed, Fitted::Proposed(c)) = (w, f) {
            res.estimates = Some(EstimateSummary::from_coefficients(c));
        }
    }
    Ok(res)
}

fn lin_dbm(v: f64) -> f64 {
    fdsic::lin_to_db(v)
}

/// Runs `n_seeds` consecutive seeds from `spec.seed` (or `seed`) in
/// parallel and averages per-subcarrier powers across them. Counters and
/// estimates come from the first seed.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<MetricsReport> {
    spec.validate()?;
    let n = spec.run.n_seeds;
    let threads = match spec.run.threads {
        0 => thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        t => t,
    }
    .min(n);
    let seeds: Vec<u64> = (0..n as u64).map(|i| spec.seed.wrapping_add(i)).collect();
    let mut results: Vec<Option<Result<SeedResult>>> = (0..n).map(|_| None).collect();
    thread::scope(|s| {
        let chunks: Vec<_> = results.chunks_mut(n.div_ceil(threads)).zip(seeds.chunks(n.div_ceil(threads))).collect();
        for (slots, seeds) in chunks {
            s.spawn(move || {
                for (slot, &seed) in slots.iter_mut().zip(seeds) {
                    *slot = Some(run_seed(spec, seed));
                }
            });
        }
    });
    let results: Vec<SeedResult> = results.into_iter().map(|r| r.expect("every seed ran")).collect::<Result<_>>()?;

    let grid = spec.grid()?;
    let ul = grid.ul();
    let n_ul = ul.len();
    let denom = (n * spec.run.n_symbols) as f64;
    let mean = |f: &dyn Fn(&SeedResult) -> &Vec<f64>| -> Vec<f64> {
        (0..n_ul).map(|i| results.iter().map(|r| f(r)[i]).sum::<f64>() / denom).collect()
    };
    let received = mean(&|r| &r.received);
    let raw_si = mean(&|r| &r.raw_si);
    let raw_total: f64 = raw_si.iter().sum();
    let mut cancellers = Vec::new();
    for &w in results[0].per.keys() {
        let residual = mean(&|r| &r.per[&w].residual);
        let residual_si = mean(&|r| &r.per[&w].residual_si);
        let cdf_samples: Vec<f64> = results.iter().flat_map(|r| r.per[&w].per_symbol.iter().map(|v| lin_dbm(*v))).collect();
        cancellers.push(CancellerMetrics {
            name: w,
            residual_dbm: residual.iter().map(|v| lin_dbm(*v)).collect(),
            residual_si_dbm: residual_si.iter().map(|v| lin_dbm(*v)).collect(),
            sicr_db: crate::report::sicr(raw_total, residual_si.iter().sum()),
            cdf_dbm: crate::report::residual_cdf(&cdf_samples)?.into_iter().map(|(v, _)| v).collect(),
        });
    }
    let first = &results[0];
    Ok(MetricsReport {
        seed: spec.seed,
        n_seeds: n,
        n_symbols: spec.run.n_symbols,
        ul: [ul.start, ul.end],
        dl: [grid.dl().start, grid.dl().end],
        noise_dbm: spec.levels.noise_dbm,
        tx_power_dbm: spec.tx_power_dbm()?,
        received_dbm: received.iter().map(|v| lin_dbm(*v)).collect(),
        raw_si_dbm: raw_si.iter().map(|v| lin_dbm(*v)).collect(),
        cancellers,
        counters: first.counters.clone(),
        estimates: first.estimates.clone(),
        config: spec.clone(),
    })
}
