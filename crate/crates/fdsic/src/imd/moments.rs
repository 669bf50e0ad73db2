//! Expected basis power `mu_{2k+1}[p] = E|Phi_{2k+1}[p]|^2` over random
//! DL symbols.

use std::fmt;
use std::str::FromStr;

use super::sets::pair_count;
use crate::ofdm::{dft_vec, idft_vec, SubcarrierGrid};
use crate::{Error, C64};

/// How `mu` is evaluated.
///
/// `TwoTermB` and `TwoTermA` run the two-term recursion over the pair
/// count; they differ only in the factor of the second term (`B_IQ^2`
/// versus `A^4`). `Gaussian` is the exact expectation for circular
/// Gaussian DL symbols, evaluated through Isserlis' theorem on the
/// time-domain samples, and handles the improper statistics created by
/// IQ imbalance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MomentMode {
    TwoTermB,
    TwoTermA,
    #[default]
    Gaussian,
}

impl MomentMode {
    pub const ALL: [MomentMode; 3] = [MomentMode::TwoTermB, MomentMode::TwoTermA, MomentMode::Gaussian];

    pub fn name(&self) -> &'static str {
        match self {
            MomentMode::TwoTermB => "two_term_b",
            MomentMode::TwoTermA => "two_term_a",
            MomentMode::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for MomentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MomentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "two_term_b" => Ok(MomentMode::TwoTermB),
            "two_term_a" => Ok(MomentMode::TwoTermA),
            "gaussian" => Ok(MomentMode::Gaussian),
            _ => Err(Error::Config(format!("unknown moment mode {s:?}"))),
        }
    }
}

/// `mu[k][p]` for `k = 0..=k_max` with DL amplitude `a_digi` and mirror
/// coefficient `b`.
pub fn mu_tables(grid: &SubcarrierGrid, b: C64, a_digi: f64, k_max: usize, mode: MomentMode) -> Vec<Vec<f64>> {
    let p = grid.num_subcarriers();
    match mode {
        MomentMode::Gaussian => {
            let power: Vec<f64> =
                (0..p).map(|q| if grid.dl().contains(q) { a_digi * a_digi } else { 0.0 }).collect();
            mu_gaussian(&power, b, k_max)
        }
        MomentMode::TwoTermB | MomentMode::TwoTermA => {
            let dl = grid.dl();
            let lam = pair_count(dl).folded(p);
            let a2 = a_digi * a_digi;
            let bb = (1.0 + b.norm_sqr()) * a2;
            let second = if mode == MomentMode::TwoTermB { bb * bb } else { a2 * a2 };
            let p4 = (p as f64).powi(4);
            let n2 = (dl.len() as f64).powi(2);
            let mut out = vec![(0..p).map(|q| if dl.contains(q) { bb } else { 0.0 }).collect::<Vec<_>>()];
            for k in 1..=k_max {
                let kf = k as f64;
                let c1 = 2.0 * kf * (2.0 * kf - 1.0) * bb * bb / p4;
                let c2 = (kf + 1.0).powi(2) * second * n2 / p4;
                let prev = &out[k - 1];
                let next = (0..p)
                    .map(|t| {
                        let conv: f64 = (0..p)
                            .filter(|&r| prev[r] != 0.0)
                            .map(|r| lam[(t + r) % p] as f64 * prev[r])
                            .sum();
                        c1 * conv + c2 * prev[t]
                    })
                    .collect();
                out.push(next);
            }
            out
        }
    }
}

/// Exact `E|Phi_{2k+1}[p]|^2` when `X[q]` are independent circular
/// Gaussians with variances `power[q]`, after IQ imbalance `b`.
///
/// The samples `u = x_iq[n+d]`, `v = x_iq[n]` are jointly Gaussian with
/// lag-only second moments, so `C(d) = E[phi(u) conj(phi(v))]` follows
/// from pairing sums, and `mu = P * DFT(C)`.
pub fn mu_gaussian(power: &[f64], b: C64, k_max: usize) -> Vec<Vec<f64>> {
    let p = power.len();
    let pc: Vec<C64> = power.iter().map(|&v| C64::new(v, 0.0)).collect();
    let r: Vec<C64> = idft_vec(&pc).into_iter().map(|v| v / p as f64).collect();
    let r0 = r[0].re;
    let b2 = b.norm_sqr();
    let s = C64::new(r0 * (1.0 + b2), 0.0);
    let pu = b * (2.0 * r0);
    (0..=k_max)
        .map(|k| {
            let c: Vec<C64> = (0..p)
                .map(|d| {
                    let rd = r[d];
                    let cross = rd + rd.conj() * b2;
                    let pcross = b * (rd + rd.conj());
                    let m = [
                        [pu, s, pcross, cross],
                        [s, pu.conj(), cross.conj(), pcross.conj()],
                        [pcross, cross.conj(), pu, s],
                        [cross, pcross.conj(), s, pu.conj()],
                    ];
                    Wick::new(k, m).moment()
                })
                .collect();
            dft_vec(&c).into_iter().map(|v| (v.re * p as f64).max(0.0)).collect()
        })
        .collect()
}

/// Gaussian moment `E[u^{k+1} conj(u)^k conj(v)^{k+1} v^k]` by recursive
/// pairing over multiplicities of the four variable types.
struct Wick {
    m: [[C64; 4]; 4],
    dim: usize,
    memo: Vec<Option<C64>>,
    start: [usize; 4],
}

impl Wick {
    fn new(k: usize, m: [[C64; 4]; 4]) -> Self {
        let dim = k + 2;
        Wick { m, dim, memo: vec![None; dim.pow(4)], start: [k + 1, k, k, k + 1] }
    }

    fn moment(&mut self) -> C64 {
        self.eval(self.start)
    }

    fn key(&self, n: [usize; 4]) -> usize {
        ((n[0] * self.dim + n[1]) * self.dim + n[2]) * self.dim + n[3]
    }

    fn eval(&mut self, n: [usize; 4]) -> C64 {
        let Some(i) = (0..4).find(|&i| n[i] > 0) else {
            return C64::new(1.0, 0.0);
        };
        let key = self.key(n);
        if let Some(v) = self.memo[key] {
            return v;
        }
        let mut rest = n;
        rest[i] -= 1;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..4 {
            if rest[j] == 0 || self.m[i][j] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut next = rest;
            next[j] -= 1;
            acc += self.m[i][j] * rest[j] as f64 * self.eval(next);
        }
        self.memo[key] = Some(acc);
        acc
    }
}
