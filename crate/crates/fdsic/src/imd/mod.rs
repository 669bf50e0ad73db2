//! Frequency-domain nonlinear basis `Phi_{2k+1} = DFT(|x_iq|^{2k} x_iq)`,
//! its recursive evaluation, IMD set sizes, expected basis power and the
//! impulse pilot.

mod moments;
mod pilot;
mod sets;

use std::io::Write;

pub use moments::{mu_gaussian, mu_tables, MomentMode};
pub use pilot::{
    check_pilot, default_omega, impulse_pilot, impulse_pilot_basis, impulse_pilot_basis_exact,
    pilot_weight_table, PilotCheck,
};
pub use sets::{lambda_dl, pair_count, q3_closed, q_size, q_size_band, q_size_circular, q_size_unfolded, PairCount};

use crate::counter::Ops;
use crate::impairments::{iq_freq, IqImbalance};
use crate::ofdm::{dft_vec, fft_forward, fft_inverse, idft_vec, FreqSymbol, SubcarrierGrid};
use crate::{Error, Result, C64};

/// Basis of order `2k+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearBasis {
    pub order: usize,
    pub values: Vec<C64>,
}

impl NonlinearBasis {
    pub fn k(&self) -> usize {
        self.order / 2
    }
}

/// Reference path: mirror, IDFT, raise per sample, DFT.
pub fn basis_direct(x: &FreqSymbol, imb: &IqImbalance, k: usize) -> NonlinearBasis {
    let x_iq = idft_vec(&iq_freq(&x.values, imb.b));
    let phi: Vec<C64> = x_iq.iter().map(|v| v * v.norm_sqr().powi(k as i32)).collect();
    NonlinearBasis { order: 2 * k + 1, values: dft_vec(&phi) }
}

/// `Phi_1 ..= Phi_{2k_max+1}` of an already mirrored spectrum, direct path.
pub fn basis_direct_all(x_iq: &[C64], k_max: usize) -> Vec<Vec<C64>> {
    let t = idft_vec(x_iq);
    let r: Vec<f64> = t.iter().map(|v| v.norm_sqr()).collect();
    let mut cur = t;
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            for (c, rr) in cur.iter_mut().zip(&r) {
                *c *= *rr;
            }
        }
        out.push(dft_vec(&cur));
    }
    out
}

/// One step of the recursion
/// `Phi_{2k+1}[p] = P^-2 sum_{q1,q2} X_iq[q1] X_iq[q2] conj(Phi_{2k-1}[q1+q2-p])`,
/// indices modulo `P`, `q1, q2` over the support of `X_iq`.
pub fn imd_step(x_iq: &FreqSymbol, prev: &NonlinearBasis) -> Result<NonlinearBasis> {
    if prev.order == 0 || prev.order % 2 == 0 {
        return Err(Error::Usage(format!("basis order {} is not odd", prev.order)));
    }
    if x_iq.values.len() != prev.values.len() {
        return Err(Error::Mismatch("spectrum and basis lengths differ".into()));
    }
    let mut rec = ImdRecursion::new(&x_iq.values);
    rec.prev_time = idft_vec(&prev.values);
    rec.k = prev.k();
    Ok(NonlinearBasis { order: prev.order + 2, values: rec.step() })
}

/// Pair sums `V[s] = sum_{q1 + q2 = s mod P} X[q1] X[q2]` over the
/// nonzero entries of `x`, visiting each unordered pair once.
pub fn pair_sums(x: &[C64]) -> (Vec<C64>, Ops) {
    let p = x.len();
    let support: Vec<usize> = (0..p).filter(|&q| x[q] != C64::new(0.0, 0.0)).collect();
    let mut v = vec![C64::new(0.0, 0.0); p];
    for (i, &a) in support.iter().enumerate() {
        v[(2 * a) % p] += x[a] * x[a];
        for &b in &support[i + 1..] {
            v[(a + b) % p] += 2.0 * x[a] * x[b];
        }
    }
    let n = support.len() as u64;
    let pairs = n * (n + 1) / 2;
    (v, Ops::new(pairs, pairs))
}

/// Recursive basis generator for one symbol. The pair sums are formed
/// once; each further order costs one pointwise product and one DFT.
///
/// Evaluating the pair-sum convolution as a circular correlation gives
/// `Phi_{2k+1} = P^-1 DFT(IDFT(V) . conj(IDFT(Phi_{2k-1})))`, and
/// `IDFT(Phi_{2k-1})` is the previous step's time-domain product.
#[derive(Clone, Debug)]
pub struct ImdRecursion {
    pair_time: Vec<C64>,
    prev_time: Vec<C64>,
    k: usize,
    /// Operations spent so far.
    pub ops: Ops,
}

impl ImdRecursion {
    pub fn new(x_iq: &[C64]) -> Self {
        let p = x_iq.len();
        let (mut v, mut ops) = pair_sums(x_iq);
        fft_inverse(&mut v);
        ops += Ops::fft(p);
        let prev_time = idft_vec(x_iq);
        // the first-order time signal is what the transmitter already has
        ImdRecursion { pair_time: v, prev_time, k: 0, ops }
    }

    /// Order of the basis the next `step` returns.
    pub fn next_order(&self) -> usize {
        2 * self.k + 3
    }

    pub fn step(&mut self) -> Vec<C64> {
        let p = self.pair_time.len();
        let s = 1.0 / p as f64;
        let mut t: Vec<C64> =
            self.pair_time.iter().zip(&self.prev_time).map(|(a, b)| a * b.conj() * s).collect();
        self.prev_time = t.clone();
        fft_forward(&mut t);
        self.ops += Ops::new(p as u64, 0) + Ops::fft(p);
        self.k += 1;
        t
    }
}

/// `Phi_1 ..= Phi_{2k_max+1}` through the recursion.
pub fn basis_recursive(x_iq: &[C64], k_max: usize) -> (Vec<Vec<C64>>, Ops) {
    let mut out = vec![x_iq.to_vec()];
    if k_max == 0 {
        return (out, Ops::default());
    }
    let mut rec = ImdRecursion::new(x_iq);
    for _ in 0..k_max {
        out.push(rec.step());
    }
    (out, rec.ops)
}

/// Per-allocation tables shared by estimation and running steps.
#[derive(Clone, Debug)]
pub struct ImdTables {
    pub num_subcarriers: usize,
    pub k_max: usize,
    pub q_size: Vec<Vec<u128>>,
    pub mu: Vec<Vec<f64>>,
    pub lambda: PairCount,
    pub mode: MomentMode,
}

impl ImdTables {
    pub fn build(grid: &SubcarrierGrid, b: C64, a_digi: f64, k_max: usize, mode: MomentMode) -> Self {
        ImdTables {
            num_subcarriers: grid.num_subcarriers(),
            k_max,
            q_size: q_size(grid, k_max),
            mu: mu_tables(grid, b, a_digi, k_max, mode),
            lambda: lambda_dl(grid),
            mode,
        }
    }

    /// CSV with header `k,p,q_size,mu`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,p,q_size,mu")?;
        for k in 0..=self.k_max {
            for p in 0..self.num_subcarriers {
                writeln!(w, "{k},{p},{},{:e}", self.q_size[k][p], self.mu[k][p])?;
            }
        }
        Ok(())
    }
}

/// `I[k][p] = |a_{2k+1}|^2 mu_{2k+1}[p] |H[p]|^2`.
pub fn predict_si_power(a_hat: &[C64], mu: &[Vec<f64>], h_hat: &[C64]) -> Vec<Vec<f64>> {
    a_hat
        .iter()
        .zip(mu)
        .map(|(a, m)| m.iter().zip(h_hat).map(|(mu, h)| a.norm_sqr() * mu * h.norm_sqr()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::Band;

    #[test]
    fn single_tone_third_order() {
        let p = 16;
        let mut x = vec![C64::new(0.0, 0.0); p];
        x[5] = C64::new(2.0, 0.0);
        let (b, _) = basis_recursive(&x, 1);
        for q in 0..p {
            let want = if q == 5 { 8.0 / (p * p) as f64 } else { 0.0 };
            assert!((b[1][q] - C64::new(want, 0.0)).norm() < 1e-14, "q={q}");
        }
    }

    #[test]
    fn recursion_matches_direct() {
        let mut rng = crate::rng(11);
        let p = 64;
        let mut x = vec![C64::new(0.0, 0.0); p];
        for q in 20..28 {
            x[q] = crate::cgauss(&mut rng, 1.0);
        }
        let x_iq = iq_freq(&x, C64::new(0.05, 0.02));
        let (r, _) = basis_recursive(&x_iq, 3);
        let d = basis_direct_all(&x_iq, 3);
        for k in 0..=3 {
            let scale = d[k].iter().map(|v| v.norm()).fold(0.0, f64::max);
            for q in 0..p {
                assert!((r[k][q] - d[k][q]).norm() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn imd_step_rejects_even_order() {
        let x = FreqSymbol::zeros(8);
        let bad = NonlinearBasis { order: 2, values: vec![C64::new(0.0, 0.0); 8] };
        assert!(imd_step(&x, &bad).is_err());
    }

    #[test]
    fn predicted_power_scaling() {
        let mu = vec![vec![1.0, 2.0]];
        let h = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let i = predict_si_power(&[C64::new(3.0, 0.0)], &mu, &h);
        assert_eq!(i[0], vec![9.0, 72.0]);
        assert_eq!(predict_si_power(&[C64::new(0.0, 0.0)], &mu, &h)[0], vec![0.0, 0.0]);
    }

    #[test]
    fn tables_csv_shape() {
        let b = Band::new(2, 5).unwrap();
        let g = SubcarrierGrid::new(16, 60e3, 2, b, b).unwrap();
        let t = ImdTables::build(&g, C64::new(0.0, 0.0), 1.0, 2, MomentMode::Gaussian);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,p,q_size,mu\n"));
        assert_eq!(s.lines().count(), 1 + 3 * 16);
    }
}
