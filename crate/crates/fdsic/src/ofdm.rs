//! OFDM numerology, flexible-duplex allocations, transforms and symbols.

use std::cell::RefCell;
use std::ops::RangeInclusive;

use rustfft::FftPlanner;

use crate::{Error, Result, C64};

/// Contiguous, inclusive range of subcarrier indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Band {
    pub start: usize,
    pub end: usize,
}

impl Band {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("band start {start} exceeds end {end}")));
        }
        Ok(Band { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: usize) -> bool {
        p >= self.start && p <= self.end
    }

    pub fn iter(&self) -> RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn intersect(&self, other: &Band) -> Option<Band> {
        let s = self.start.max(other.start);
        let e = self.end.min(other.end);
        (s <= e).then_some(Band { start: s, end: e })
    }

    /// 0/1 indicator over a grid of size `p`.
    pub fn indicator(&self, p: usize) -> Vec<bool> {
        (0..p).map(|i| self.contains(i)).collect()
    }
}

/// OFDM dimensions plus the UL and DL allocations.
#[derive(Clone, Debug, PartialEq)]
pub struct SubcarrierGrid {
    p: usize,
    spacing_hz: f64,
    n_cp: usize,
    dl: Band,
    ul: Band,
}

impl SubcarrierGrid {
    pub fn new(p: usize, spacing_hz: f64, n_cp: usize, dl: Band, ul: Band) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("num_subcarriers must be positive".into()));
        }
        if n_cp == 0 || n_cp >= p {
            return Err(Error::Config(format!("cp_length must satisfy 0 < N_cp < P, got {n_cp}")));
        }
        if !(spacing_hz > 0.0) {
            return Err(Error::Config("subcarrier_spacing must be positive".into()));
        }
        for (name, b) in [("dl_set", dl), ("ul_set", ul)] {
            if b.end >= p {
                return Err(Error::Config(format!("{name} end {} outside grid of {p}", b.end)));
            }
        }
        Ok(SubcarrierGrid { p, spacing_hz, n_cp, dl, ul })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.p
    }

    pub fn spacing_hz(&self) -> f64 {
        self.spacing_hz
    }

    pub fn cp_length(&self) -> usize {
        self.n_cp
    }

    pub fn dl(&self) -> Band {
        self.dl
    }

    pub fn ul(&self) -> Band {
        self.ul
    }

    /// Sampling interval `1/(P Δf)`.
    pub fn sample_period(&self) -> f64 {
        1.0 / (self.p as f64 * self.spacing_hz)
    }

    pub fn full_band(&self) -> Band {
        Band { start: 0, end: self.p - 1 }
    }

    /// Same numerology with a different DL allocation.
    pub fn with_dl(&self, dl: Band) -> Result<Self> {
        Self::new(self.p, self.spacing_hz, self.n_cp, dl, self.ul)
    }

    pub fn with_ul(&self, ul: Band) -> Result<Self> {
        Self::new(self.p, self.spacing_hz, self.n_cp, self.dl, ul)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreqSymbol {
    pub values: Vec<C64>,
    pub index: usize,
}

impl FreqSymbol {
    pub fn new(values: Vec<C64>, index: usize) -> Self {
        FreqSymbol { values, index }
    }

    pub fn zeros(p: usize) -> Self {
        FreqSymbol { values: vec![C64::new(0.0, 0.0); p], index: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<C64>,
    pub has_cp: bool,
}

impl TimeSignal {
    pub fn new(samples: Vec<C64>) -> Self {
        TimeSignal { samples, has_cp: false }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, no scaling.
pub fn fft_forward(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse DFT including the `1/P` factor.
pub fn fft_inverse(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
    let s = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

pub fn dft_vec(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    fft_forward(&mut v);
    v
}

pub fn idft_vec(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    fft_inverse(&mut v);
    v
}

pub fn idft(spectrum: &FreqSymbol, grid: &SubcarrierGrid) -> Result<TimeSignal> {
    if spectrum.values.len() != grid.p {
        return Err(Error::Config(format!(
            "spectrum has {} values, grid has {}",
            spectrum.values.len(),
            grid.p
        )));
    }
    Ok(TimeSignal::new(idft_vec(&spectrum.values)))
}

pub fn dft(signal: &TimeSignal, grid: &SubcarrierGrid) -> Result<FreqSymbol> {
    if signal.has_cp {
        return Err(Error::Usage("strip the cyclic prefix before the DFT".into()));
    }
    if signal.samples.len() != grid.p {
        return Err(Error::Config(format!(
            "signal has {} samples, grid has {}",
            signal.samples.len(),
            grid.p
        )));
    }
    Ok(FreqSymbol::new(dft_vec(&signal.samples), 0))
}

pub fn add_cp(signal: &TimeSignal, n_cp: usize) -> Result<TimeSignal> {
    if signal.has_cp {
        return Err(Error::Usage("signal already carries a cyclic prefix".into()));
    }
    let n = signal.samples.len();
    if n_cp == 0 || n_cp >= n {
        return Err(Error::Config(format!("cp_length {n_cp} invalid for {n} samples")));
    }
    let mut out = Vec::with_capacity(n + n_cp);
    out.extend_from_slice(&signal.samples[n - n_cp..]);
    out.extend_from_slice(&signal.samples);
    Ok(TimeSignal { samples: out, has_cp: true })
}

pub fn remove_cp(signal: &TimeSignal, n_cp: usize) -> Result<TimeSignal> {
    if !signal.has_cp {
        return Err(Error::Usage("signal carries no cyclic prefix".into()));
    }
    if n_cp >= signal.samples.len() {
        return Err(Error::Config(format!("cp_length {n_cp} exceeds signal length")));
    }
    Ok(TimeSignal { samples: signal.samples[n_cp..].to_vec(), has_cp: false })
}

/// Grid index of subcarrier `-p`.
pub fn mirror_index(p: usize, num_subcarriers: usize) -> usize {
    (num_subcarriers - p % num_subcarriers) % num_subcarriers
}

/// Uniform square-QAM point with unit average power.
pub fn qam_point<R: rand::Rng + ?Sized>(order: usize, rng: &mut R) -> C64 {
    let m = (order as f64).sqrt() as usize;
    let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let level = |i: usize| (2 * i) as f64 - (m as f64 - 1.0);
    let i = rng.random_range(0..m);
    let q = rng.random_range(0..m);
    C64::new(level(i), level(q)) / norm
}

/// `count` independent QAM symbols on the DL allocation with
/// `E|X[p]|^2 = amplitude^2`.
pub fn gen_qam_symbols(
    grid: &SubcarrierGrid,
    order: usize,
    amplitude: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<FreqSymbol>> {
    if !matches!(order, 4 | 16 | 64) {
        return Err(Error::Config(format!("QAM order {order} not in {{4, 16, 64}}")));
    }
    if !(amplitude > 0.0) {
        return Err(Error::Config("amplitude must be positive".into()));
    }
    let mut rng = crate::rng(seed);
    Ok((0..count)
        .map(|m| qam_symbol(grid.p, grid.dl, order, amplitude, m, &mut rng))
        .collect())
}

pub fn qam_symbol<R: rand::Rng + ?Sized>(
    p: usize,
    band: Band,
    order: usize,
    amplitude: f64,
    index: usize,
    rng: &mut R,
) -> FreqSymbol {
    let mut values = vec![C64::new(0.0, 0.0); p];
    for q in band.iter() {
        values[q] = qam_point(order, rng) * amplitude;
    }
    FreqSymbol::new(values, index)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DuplexMode {
    Ibfd,
    Sbfd,
    PartialOverlap,
}

impl DuplexMode {
    pub fn name(&self) -> &'static str {
        match self {
            DuplexMode::Ibfd => "ibfd",
            DuplexMode::Sbfd => "sbfd",
            DuplexMode::PartialOverlap => "overlap",
        }
    }
}

/// Duplex mode and the size of the UL/DL overlap.
pub fn classify_duplex(grid: &SubcarrierGrid) -> (DuplexMode, usize) {
    let overlap = grid.ul.intersect(&grid.dl).map_or(0, |b| b.len());
    let mode = if grid.ul == grid.dl {
        DuplexMode::Ibfd
    } else if overlap == 0 {
        DuplexMode::Sbfd
    } else {
        DuplexMode::PartialOverlap
    };
    (mode, overlap)
}
