//! Instrumented complex multiply/add counters, grouped by processing
//! stage.
//!
//! A length-`P` DFT is charged `(P/2) log2 P` multiplies and `P log2 P`
//! adds (radix-2 butterfly accounting).

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ops {
    pub mul: u64,
    pub add: u64,
}

impl Ops {
    pub fn new(mul: u64, add: u64) -> Self {
        Ops { mul, add }
    }

    pub fn fft(p: usize) -> Self {
        let lg = (p as f64).log2().ceil() as u64;
        Ops { mul: p as u64 / 2 * lg, add: p as u64 * lg }
    }

    /// Normal-equation LS with `m` observations and `k` unknowns:
    /// Gram and right-hand side, then a `k x k` solve.
    pub fn ls(m: usize, k: usize) -> Self {
        let (m, k) = (m as u64, k as u64);
        Ops { mul: m * k * k + m * k + k * k * k, add: m * k * k + m * k + k * k * k }
    }
}

impl std::ops::Add for Ops {
    type Output = Ops;
    fn add(self, o: Ops) -> Ops {
        Ops { mul: self.mul + o.mul, add: self.add + o.add }
    }
}

impl std::ops::AddAssign for Ops {
    fn add_assign(&mut self, o: Ops) {
        self.mul += o.mul;
        self.add += o.add;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    /// IQ mirroring `X + b X*[-p]` and the estimate of `b`.
    Iq,
    /// Nonlinear basis generation during estimation.
    Transform,
    /// PA coefficient LS.
    Pa,
    /// Per-subcarrier SI channel LS.
    Channel,
    /// Basis-set selection.
    Select,
    /// Basis generation during the running step.
    RunTransform,
    /// Per-subcarrier regeneration and subtraction in the running step.
    Running,
    /// Basis generation for the full-LS baseline.
    FullLsTransform,
    /// Per-subcarrier joint LS of the full-LS baseline.
    FullLs,
    /// Full-LS baseline running step.
    FullLsRunning,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Iq,
        Stage::Transform,
        Stage::Pa,
        Stage::Channel,
        Stage::Select,
        Stage::RunTransform,
        Stage::Running,
        Stage::FullLsTransform,
        Stage::FullLs,
        Stage::FullLsRunning,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Iq => "iq",
            Stage::Transform => "transform",
            Stage::Pa => "pa",
            Stage::Channel => "channel",
            Stage::Select => "select",
            Stage::RunTransform => "run_transform",
            Stage::Running => "running",
            Stage::FullLsTransform => "full_ls_transform",
            Stage::FullLs => "full_ls",
            Stage::FullLsRunning => "full_ls_running",
        }
    }

    /// Stages belonging to the proposed estimation step.
    pub const ESTIMATION: [Stage; 5] =
        [Stage::Iq, Stage::Transform, Stage::Pa, Stage::Channel, Stage::Select];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OpCounter {
    counts: BTreeMap<Stage, Ops>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, stage: Stage, ops: Ops) {
        *self.counts.entry(stage).or_default() += ops;
    }

    pub fn mul(&mut self, stage: Stage, n: u64) {
        self.record(stage, Ops::new(n, 0));
    }

    pub fn add(&mut self, stage: Stage, n: u64) {
        self.record(stage, Ops::new(0, n));
    }

    pub fn get(&self, stage: Stage) -> Ops {
        self.counts.get(&stage).copied().unwrap_or_default()
    }

    pub fn sum(&self, stages: &[Stage]) -> Ops {
        stages.iter().fold(Ops::default(), |acc, s| acc + self.get(*s))
    }

    pub fn total(&self) -> Ops {
        self.counts.values().fold(Ops::default(), |a, b| a + *b)
    }

    pub fn merge(&mut self, other: &OpCounter) {
        for (s, o) in &other.counts {
            self.record(*s, *o);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, Ops)> + '_ {
        self.counts.iter().map(|(s, o)| (*s, *o))
    }
}
