//! IMD set sizes: how many DL index tuples `(q_1..q_{k+1}; q'_1..q'_k)`
//! have signed sum `q_1 + .. + q_{k+1} - q'_1 - .. - q'_k` aliasing to
//! each subcarrier.

use crate::ofdm::{Band, SubcarrierGrid};

/// Exact pair counts `|{(q1, q2) in DL^2 : q1 + q2 = s}|`, the
/// self-convolution of the DL indicator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCount {
    offset: i64,
    counts: Vec<u64>,
}

impl PairCount {
    pub fn get(&self, s: i64) -> u64 {
        let i = s - self.offset;
        if i < 0 {
            return 0;
        }
        self.counts.get(i as usize).copied().unwrap_or(0)
    }

    /// Inclusive support `[2 p_start, 2 p_end]`.
    pub fn support(&self) -> (i64, i64) {
        (self.offset, self.offset + self.counts.len() as i64 - 1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts folded onto `[0, p)`.
    pub fn folded(&self, p: usize) -> Vec<u64> {
        let mut out = vec![0; p];
        for (i, c) in self.counts.iter().enumerate() {
            out[(self.offset + i as i64).rem_euclid(p as i64) as usize] += c;
        }
        out
    }
}

pub fn lambda_dl(grid: &SubcarrierGrid) -> PairCount {
    pair_count(grid.dl())
}

pub fn pair_count(band: Band) -> PairCount {
    let n = band.len();
    let mut counts = vec![0u64; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            counts[i + j] += 1;
        }
    }
    PairCount { offset: 2 * band.start as i64, counts }
}

/// `|Q^{2k+1}(t)|` on the integer line before aliasing, for every `k` up
/// to `k_max`. Entry `k` is `(offset, counts)` covering
/// `[(k+1) p_start - k p_end, (k+1) p_end - k p_start]`.
pub fn q_size_unfolded(band: Band, k_max: usize) -> Vec<(i64, Vec<u128>)> {
    let lam = pair_count(band);
    let (ls, _) = lam.support();
    let mut out = vec![(band.start as i64, vec![1u128; band.len()])];
    for k in 1..=k_max {
        let (poff, prev) = &out[k - 1];
        let lo = (k as i64 + 1) * band.start as i64 - k as i64 * band.end as i64;
        let hi = (k as i64 + 1) * band.end as i64 - k as i64 * band.start as i64;
        let mut next = vec![0u128; (hi - lo + 1) as usize];
        // |Q^{2k+1}(t)| = sum_rho Lambda(t + rho) |Q^{2k-1}(rho)|, t = s - rho
        for (ri, &qv) in prev.iter().enumerate() {
            if qv == 0 {
                continue;
            }
            let rho = poff + ri as i64;
            for (si, &lv) in lam.counts.iter().enumerate() {
                let t = ls + si as i64 - rho;
                next[(t - lo) as usize] += lv as u128 * qv;
            }
        }
        out.push((lo, next));
    }
    out
}

/// `|Q^{2k+1}_p|` for `k = 0..=k_max`, `p in [0, P)`: the integer-line
/// recursion folded by summing the aliases `p + rP`.
pub fn q_size(grid: &SubcarrierGrid, k_max: usize) -> Vec<Vec<u128>> {
    q_size_band(grid.dl(), grid.num_subcarriers(), k_max)
}

pub fn q_size_band(band: Band, p: usize, k_max: usize) -> Vec<Vec<u128>> {
    q_size_unfolded(band, k_max)
        .into_iter()
        .map(|(off, v)| {
            let mut f = vec![0u128; p];
            for (i, c) in v.into_iter().enumerate() {
                f[(off + i as i64).rem_euclid(p as i64) as usize] += c;
            }
            f
        })
        .collect()
}

/// Same table from the circular recursion with the folded pair count,
/// `|Q^{2k+1}_p| = sum_rho Lambda_P[(p + rho) mod P] |Q^{2k-1}_rho|`.
pub fn q_size_circular(band: Band, p: usize, k_max: usize) -> Vec<Vec<u128>> {
    let lam = pair_count(band).folded(p);
    let mut out: Vec<Vec<u128>> = vec![(0..p).map(|i| band.contains(i) as u128).collect()];
    for k in 1..=k_max {
        let prev = &out[k - 1];
        let next = (0..p)
            .map(|t| {
                (0..p)
                    .filter(|&r| prev[r] != 0)
                    .map(|r| lam[(t + r) % p] as u128 * prev[r])
                    .sum()
            })
            .collect();
        out.push(next);
    }
    out
}

/// Piecewise-continuous approximation of `|Q^3_p|`, evaluated
/// literally: `Q(p - P) + Q(p) + Q(p + P)`. It is not an exact count;
/// compare with [`q_size`].
pub fn q3_closed(grid: &SubcarrierGrid, p: usize) -> f64 {
    let dl = grid.dl();
    let (s, e) = (dl.start as f64, dl.end as f64);
    let big_p = grid.num_subcarriers() as f64;
    let q = |p: f64| -> f64 {
        if 2.0 * s - e < p && p <= s {
            0.5 * (p + e - 2.0 * s).powi(2)
        } else if s <= p && p <= e {
            // the in-band piece also covers p = p_end, where it meets the
            // upper skirt continuously
            (e - s).powi(2) - 0.5 * (p - s).powi(2) - 0.5 * (e - p).powi(2)
        } else if e < p && p <= 2.0 * e - s {
            0.5 * (2.0 * e - s - p).powi(2)
        } else {
            0.0
        }
    };
    let p = p as f64;
    q(p - big_p) + q(p) + q(p + big_p)
}
