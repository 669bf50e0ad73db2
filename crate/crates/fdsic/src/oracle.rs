//! Slow, independent reference computations.
//!
//! Nothing here shares code with the fast paths beyond the basic
//! types: transforms are plain `O(P^2)` sums, set sizes come from tuple
//! enumeration and basis powers from Monte Carlo.

use std::f64::consts::PI;
use std::thread;

use crate::ofdm::Band;
use crate::C64;

/// Plain `O(P^2)` DFT, no scaling.
pub fn naive_dft(x: &[C64]) -> Vec<C64> {
    let p = x.len();
    (0..p)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * C64::from_polar(1.0, -2.0 * PI * ((k * n) % p) as f64 / p as f64))
                .sum()
        })
        .collect()
}

/// Plain `O(P^2)` IDFT with the `1/P` factor.
pub fn naive_idft(x: &[C64]) -> Vec<C64> {
    let p = x.len();
    (0..p)
        .map(|n| {
            x.iter()
                .enumerate()
                .map(|(k, v)| v * C64::from_polar(1.0, 2.0 * PI * ((k * n) % p) as f64 / p as f64))
                .sum::<C64>()
                / p as f64
        })
        .collect()
}

/// `|Q_{2k+1}[p]|` by enumerating every `(k+1, k)` tuple of DL indices
/// with `sum q_i - sum q'_j = p mod P`. Exponential in `k`; use on small
/// allocations only.
pub fn q_size_enumerate(dl: Band, p_size: usize, k: usize) -> Vec<u128> {
    let idx: Vec<usize> = dl.iter().collect();
    let mut counts = vec![0u128; p_size];
    let slots = 2 * k + 1;
    let mut cur = vec![0usize; slots];
    loop {
        let mut s: i64 = 0;
        for (i, &c) in cur.iter().enumerate() {
            let q = idx[c] as i64;
            if i <= k {
                s += q;
            } else {
                s -= q;
            }
        }
        counts[s.rem_euclid(p_size as i64) as usize] += 1;
        let mut i = 0;
        while i < slots {
            cur[i] += 1;
            if cur[i] < idx.len() {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
        if i == slots {
            break;
        }
    }
    counts
}

/// `Phi_{2k+1}` by summing every tuple term
/// `P^-2k prod X[q_i] prod conj(X[q'_j])` directly.
pub fn basis_tuple_sum(x_iq: &[C64], k: usize) -> Vec<C64> {
    let p = x_iq.len();
    let sup: Vec<usize> = (0..p).filter(|&q| x_iq[q] != C64::new(0.0, 0.0)).collect();
    let mut out = vec![C64::new(0.0, 0.0); p];
    let slots = 2 * k + 1;
    if sup.is_empty() {
        return out;
    }
    let scale = 1.0 / (p as f64).powi(2 * k as i32);
    let mut cur = vec![0usize; slots];
    loop {
        let mut s: i64 = 0;
        let mut term = C64::new(scale, 0.0);
        for (i, &c) in cur.iter().enumerate() {
            let q = sup[c];
            if i <= k {
                s += q as i64;
                term *= x_iq[q];
            } else {
                s -= q as i64;
                term *= x_iq[q].conj();
            }
        }
        out[s.rem_euclid(p as i64) as usize] += term;
        let mut i = 0;
        while i < slots {
            cur[i] += 1;
            if cur[i] < sup.len() {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
        if i == slots {
            break;
        }
    }
    out
}

/// One recursion step evaluated as the literal double sum
/// `P^-2 sum_{q1,q2} X[q1] X[q2] conj(prev[q1+q2-p])`.
pub fn imd_step_direct(x_iq: &[C64], prev: &[C64]) -> Vec<C64> {
    let p = x_iq.len();
    let scale = 1.0 / (p * p) as f64;
    (0..p)
        .map(|t| {
            let mut acc = C64::new(0.0, 0.0);
            for q1 in 0..p {
                if x_iq[q1] == C64::new(0.0, 0.0) {
                    continue;
                }
                for q2 in 0..p {
                    acc += x_iq[q1] * x_iq[q2] * prev[(q1 + q2 + p - t) % p].conj();
                }
            }
            acc * scale
        })
        .collect()
}

/// Time-domain reference basis: naive IDFT, raise each sample, naive DFT.
pub fn basis_time_domain(x_iq: &[C64], k: usize) -> Vec<C64> {
    let t = naive_idft(x_iq);
    let phi: Vec<C64> = t.iter().map(|v| v * v.norm_sqr().powi(k as i32)).collect();
    naive_dft(&phi)
}

/// Monte Carlo estimate of `E|Phi_{2k+1}[p]|^2` with its standard error.
#[derive(Clone, Debug)]
pub struct MonteCarloMu {
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub trials: usize,
}

/// Draws `trials` DL symbols from `draw`, applies the mirror `b`, and
/// averages `|Phi_{2k+1}|^2` on `threads` worker threads. Each worker
/// gets its own seeded stream so results do not depend on scheduling.
pub fn monte_carlo_mu<F>(
    p_size: usize,
    b: C64,
    k_max: usize,
    trials: usize,
    seed: u64,
    threads: usize,
    draw: F,
) -> MonteCarloMu
where
    F: Fn(&mut crate::Rng) -> Vec<C64> + Sync,
{
    let threads = threads.max(1).min(trials.max(1));
    let per = trials.div_ceil(threads);
    let parts: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, usize)> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let draw = &draw;
                s.spawn(move || {
                    let mut rng = crate::rng_stream(seed, w as u64);
                    let n = per.min(trials.saturating_sub(w * per));
                    let mut sum = vec![vec![0.0; p_size]; k_max + 1];
                    let mut sq = vec![vec![0.0; p_size]; k_max + 1];
                    for _ in 0..n {
                        let x = draw(&mut rng);
                        let x_iq: Vec<C64> = (0..p_size)
                            .map(|q| x[q] + b * x[(p_size - q) % p_size].conj())
                            .collect();
                        let phi = crate::imd::basis_direct_all(&x_iq, k_max);
                        for k in 0..=k_max {
                            for q in 0..p_size {
                                let v = phi[k][q].norm_sqr();
                                sum[k][q] += v;
                                sq[k][q] += v * v;
                            }
                        }
                    }
                    (sum, sq, n)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut sum = vec![vec![0.0; p_size]; k_max + 1];
    let mut sq = vec![vec![0.0; p_size]; k_max + 1];
    let mut n = 0;
    for (s, q, c) in parts {
        n += c;
        for k in 0..=k_max {
            for i in 0..p_size {
                sum[k][i] += s[k][i];
                sq[k][i] += q[k][i];
            }
        }
    }
    let nf = n as f64;
    let mean: Vec<Vec<f64>> = sum.iter().map(|r| r.iter().map(|v| v / nf).collect()).collect();
    let stderr = sq
        .iter()
        .zip(&mean)
        .map(|(r, m)| {
            r.iter()
                .zip(m)
                .map(|(s2, mu)| ((s2 / nf - mu * mu).max(0.0) / (nf - 1.0).max(1.0)).sqrt())
                .collect()
        })
        .collect();
    MonteCarloMu { mean, stderr, trials: n }
}

/// Circular Gaussian DL symbol with variance `a^2` on `dl`.
pub fn gaussian_draw(p_size: usize, dl: Band, a: f64) -> impl Fn(&mut crate::Rng) -> Vec<C64> + Sync {
    move |rng| {
        (0..p_size)
            .map(|q| if dl.contains(q) { crate::cgauss(rng, a * a) } else { C64::new(0.0, 0.0) })
            .collect()
    }
}

/// Unit-power QAM DL symbol scaled by `a` on `dl`.
pub fn qam_draw(p_size: usize, dl: Band, order: usize, a: f64) -> impl Fn(&mut crate::Rng) -> Vec<C64> + Sync {
    move |rng| {
        (0..p_size)
            .map(|q| if dl.contains(q) { crate::ofdm::qam_point(order, rng) * a } else { C64::new(0.0, 0.0) })
            .collect()
    }
}
