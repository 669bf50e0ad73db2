//! Impulse pilot: a linear phase ramp across the DL allocation whose
//! time-domain signal is a single peak, so each order of the nonlinear
//! basis has a closed form.

use std::f64::consts::PI;

use super::NonlinearBasis;
use crate::impairments::IqImbalance;
use crate::ofdm::{idft_vec, mirror_index, FreqSymbol, SubcarrierGrid};
use crate::C64;

/// Phase slope that puts the peak at sample `N_cp` under the `1/P`
/// IDFT convention (the peak sits at `n0 = -Omega P / 2 pi mod P`).
pub fn default_omega(grid: &SubcarrierGrid) -> f64 {
    -2.0 * PI * grid.cp_length() as f64 / grid.num_subcarriers() as f64
}

/// `A e^{j Omega p}` on the DL allocation.
pub fn impulse_pilot(grid: &SubcarrierGrid, a_digi: f64, omega: f64) -> FreqSymbol {
    let values = (0..grid.num_subcarriers())
        .map(|p| {
            if grid.dl().contains(p) {
                C64::from_polar(a_digi, omega * p as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    FreqSymbol::new(values, 0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotCheck {
    /// Sample nearest to the nominal peak position.
    pub peak: usize,
    /// The nominal peak falls exactly on a sample.
    pub integer_peak: bool,
    /// The peak lands at sample `N_cp`.
    pub at_cp: bool,
    /// Largest power among the `N_cp` samples before the peak, relative to
    /// the peak, in dB (`-inf` for an exact impulse).
    pub leakage_db: f64,
}

impl PilotCheck {
    pub fn ok(&self) -> bool {
        self.integer_peak && self.at_cp
    }
}

pub fn check_pilot(grid: &SubcarrierGrid, omega: f64) -> PilotCheck {
    let p = grid.num_subcarriers();
    let n_cp = grid.cp_length();
    let pos = (-omega * p as f64 / (2.0 * PI)).rem_euclid(p as f64);
    let peak = (pos.round() as usize) % p;
    let integer_peak = (pos - pos.round()).abs() < 1e-9;
    let x = idft_vec(&impulse_pilot(grid, 1.0, omega).values);
    let top = x[peak].norm_sqr();
    let leak = (1..=n_cp).map(|d| x[(peak + p - d) % p].norm_sqr()).fold(0.0, f64::max);
    PilotCheck { peak, integer_peak, at_cp: peak == n_cp, leakage_db: 10.0 * (leak / top).log10() }
}

/// `|Q_p| A^{2k+1} |1+b|^{2k} (1+b) e^{j Omega p} / P^{2k}` from the set
/// size table. Exact when the DL allocation is its own mirror image or
/// `b = 0`, and the peak is on a sample.
pub fn impulse_pilot_basis(
    grid: &SubcarrierGrid,
    imb: &IqImbalance,
    a_digi: f64,
    omega: f64,
    k: usize,
    q_size: &[Vec<u128>],
) -> NonlinearBasis {
    let p = grid.num_subcarriers();
    let g = C64::new(1.0, 0.0) + imb.b;
    let scale = g * g.norm_sqr().powi(k as i32) * a_digi.powi(2 * k as i32 + 1)
        / (p as f64).powi(2 * k as i32);
    let values = (0..p)
        .map(|q| scale * q_size[k][q] as f64 * C64::from_polar(1.0, omega * q as f64))
        .collect();
    NonlinearBasis { order: 2 * k + 1, values }
}

/// Weighted IMD counts of the mirrored pilot for any allocation:
/// `W_0[p] = 1_DL(p) + b 1_DL(-p)` and
/// `W_k[p] = sum_{q1,q2} W_0[q1] W_0[q2] conj(W_{k-1}[q1+q2-p])`.
pub fn pilot_weight_table(grid: &SubcarrierGrid, b: C64, k_max: usize) -> Vec<Vec<C64>> {
    let p = grid.num_subcarriers();
    let dl = grid.dl();
    let w: Vec<C64> = (0..p)
        .map(|q| {
            let mut v = C64::new(0.0, 0.0);
            if dl.contains(q) {
                v += 1.0;
            }
            if dl.contains(mirror_index(q, p)) {
                v += b;
            }
            v
        })
        .collect();
    let support: Vec<usize> = (0..p).filter(|&q| w[q] != C64::new(0.0, 0.0)).collect();
    let mut pairs = vec![C64::new(0.0, 0.0); p];
    for &a in &support {
        for &c in &support {
            pairs[(a + c) % p] += w[a] * w[c];
        }
    }
    let nz: Vec<usize> = (0..p).filter(|&s| pairs[s] != C64::new(0.0, 0.0)).collect();
    let mut out = vec![w];
    for k in 1..=k_max {
        let prev = &out[k - 1];
        let next = (0..p)
            .map(|t| nz.iter().map(|&s| pairs[s] * prev[(s + p - t) % p].conj()).sum())
            .collect();
        out.push(next);
    }
    out
}

/// Exact pilot basis from the weighted counts of [`pilot_weight_table`].
pub fn impulse_pilot_basis_exact(
    a_digi: f64,
    omega: f64,
    k: usize,
    weights: &[Vec<C64>],
) -> NonlinearBasis {
    let p = weights[0].len();
    let scale = a_digi.powi(2 * k as i32 + 1) / (p as f64).powi(2 * k as i32);
    let values = weights[k]
        .iter()
        .enumerate()
        .map(|(q, w)| w * scale * C64::from_polar(1.0, omega * q as f64))
        .collect();
    NonlinearBasis { order: 2 * k + 1, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imd::{basis_direct, q_size};
    use crate::impairments::apply_iq_freq;
    use crate::ofdm::Band;

    fn grid(s: usize, e: usize) -> SubcarrierGrid {
        SubcarrierGrid::new(64, 60e3, 8, Band::new(s, e).unwrap(), Band::new(s, e).unwrap()).unwrap()
    }

    #[test]
    fn full_band_is_exact_impulse() {
        let g = grid(0, 63);
        let om = default_omega(&g);
        let x = idft_vec(&impulse_pilot(&g, 2.0, om).values);
        for (n, v) in x.iter().enumerate() {
            let want = if n == 8 { 2.0 } else { 0.0 };
            assert!((v - C64::new(want, 0.0)).norm() < 1e-12, "n={n}");
        }
        let c = check_pilot(&g, om);
        assert!(c.ok());
        assert!(c.leakage_db < -200.0);
    }

    #[test]
    fn zero_slope_is_flagged() {
        let c = check_pilot(&grid(0, 63), 0.0);
        assert_eq!(c.peak, 0);
        assert!(!c.ok());
        let half = check_pilot(&grid(0, 63), -2.0 * PI * 8.5 / 64.0);
        assert!(!half.integer_peak);
    }

    #[test]
    fn partial_band_has_sidelobes() {
        let g = grid(24, 40);
        let c = check_pilot(&g, default_omega(&g));
        assert_eq!(c.peak, 8);
        assert!(c.leakage_db > -60.0 && c.leakage_db < 0.0);
    }

    #[test]
    fn first_order_equals_mirrored_pilot() {
        let g = grid(22, 42);
        let imb = IqImbalance::new(C64::new(0.03, 0.04)).unwrap();
        let om = default_omega(&g);
        let q = q_size(&g, 0);
        let closed = impulse_pilot_basis(&g, &imb, 1.5, om, 0, &q);
        let direct = apply_iq_freq(&impulse_pilot(&g, 1.5, om), &imb);
        for p in 0..64 {
            assert!((closed.values[p] - direct.values[p]).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_weights_match_direct_on_any_band() {
        let g = grid(5, 17);
        let imb = IqImbalance::new(C64::new(0.05, -0.02)).unwrap();
        let om = default_omega(&g);
        let w = pilot_weight_table(&g, imb.b, 2);
        let x = impulse_pilot(&g, 1.2, om);
        for k in 0..=2 {
            let e = impulse_pilot_basis_exact(1.2, om, k, &w);
            let d = basis_direct(&x, &imb, k);
            let scale = d.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for p in 0..64 {
                assert!((e.values[p] - d.values[p]).norm() <= 1e-10 * scale, "k={k} p={p}");
            }
        }
    }
}
