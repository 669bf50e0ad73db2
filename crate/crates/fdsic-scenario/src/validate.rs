//! Reference checks run by `fdsic validate` on a scenario's grid.

use fdsic::imd::{
    basis_recursive, check_pilot, default_omega, impulse_pilot, impulse_pilot_basis, impulse_pilot_basis_exact,
    mu_tables, pilot_weight_table, q_size, q_size_band, basis_direct, MomentMode,
};
use fdsic::impairments::iq_freq;
use fdsic::ofdm::{gen_qam_symbols, mirror_index, Band};
use fdsic::oracle::{basis_time_domain, gaussian_draw, monte_carlo_mu, q_size_enumerate};
use fdsic::{Result, C64};

use crate::config::ScenarioSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "ok  " } else { "FAIL" };
        write!(f, "{tag} {:<28} {}", self.name, self.detail)
    }
}

/// Tuple enumeration gets expensive quickly; keep each call under this.
const ENUM_BUDGET: f64 = 2e7;

fn max_rel(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

pub fn validate(spec: &ScenarioSpec, mc_trials: usize) -> Result<Vec<Check>> {
    let grid = spec.grid()?;
    let p = grid.num_subcarriers();
    let dl = grid.dl();
    let k_max = spec.estimator.k_max;
    let b = spec.iq()?.b;
    let mut out = Vec::new();

    // set sizes against enumeration, on a sub-band when the DL is large
    let mut sub = dl;
    while (sub.len() as f64).powi(3) > ENUM_BUDGET {
        sub = Band::new(sub.start, sub.start + sub.len() / 2 - 1)?;
    }
    let fast = q_size_band(sub, p, k_max);
    for k in 1..=k_max {
        if (sub.len() as f64).powi(2 * k as i32 + 1) > ENUM_BUDGET {
            continue;
        }
        let slow = q_size_enumerate(sub, p, k);
        out.push(Check {
            name: format!("q_size k={k}"),
            passed: fast[k] == slow,
            detail: format!("band {}..={} against tuple enumeration", sub.start, sub.end),
        });
    }
    let q = q_size(&grid, k_max);
    let counting = (0..=k_max).all(|k| q[k].iter().sum::<u128>() == (dl.len() as u128).pow(2 * k as u32 + 1));
    out.push(Check { name: "q_size total".into(), passed: counting, detail: "sum over p equals |DL|^(2k+1)".into() });

    // recursion against a naive time-domain evaluation
    let x = gen_qam_symbols(&grid, spec.estimator.qam_order, spec.a_digi()?, 1, spec.seed)?.remove(0);
    let x_iq = iq_freq(&x.values, b);
    let (rec, _) = basis_recursive(&x_iq, k_max);
    let worst = (0..=k_max).map(|k| max_rel(&rec[k], &basis_time_domain(&x_iq, k))).fold(0.0, f64::max);
    out.push(Check {
        name: "recursive basis".into(),
        passed: worst <= 1e-8,
        detail: format!("max relative error {worst:.2e}"),
    });

    // impulse pilot
    let full = grid.with_dl(grid.full_band())?;
    let omega = default_omega(&grid);
    let pc = check_pilot(&full, omega);
    out.push(Check {
        name: "impulse pilot".into(),
        passed: pc.ok(),
        detail: format!("peak at sample {}, cp {}", pc.peak, grid.cp_length()),
    });
    let imb = spec.iq()?;
    let w = pilot_weight_table(&grid, b, k_max);
    let pilot = impulse_pilot(&grid, 1.0, omega);
    let self_mirrored = dl.iter().all(|q| dl.contains(mirror_index(q, p)));
    let mut worst_exact: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for k in 0..=k_max {
        let direct = basis_direct(&pilot, &imb, k);
        worst_exact = worst_exact.max(max_rel(&impulse_pilot_basis_exact(1.0, omega, k, &w).values, &direct.values));
        worst_closed =
            worst_closed.max(max_rel(&impulse_pilot_basis(&grid, &imb, 1.0, omega, k, &q).values, &direct.values));
    }
    out.push(Check {
        name: "pilot basis (weighted)".into(),
        passed: worst_exact <= 1e-9,
        detail: format!("max relative error {worst_exact:.2e}"),
    });
    out.push(Check {
        name: "pilot basis (closed form)".into(),
        passed: !self_mirrored || worst_closed <= 1e-9,
        detail: if self_mirrored {
            format!("max relative error {worst_closed:.2e}")
        } else {
            format!("DL not its own mirror, error {worst_closed:.2e} expected")
        },
    });

    // basis power against Monte Carlo with Gaussian symbols
    if mc_trials > 1 {
        let a = spec.a_digi()?;
        let mu = mu_tables(&grid, b, a, k_max, MomentMode::Gaussian);
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let mc = monte_carlo_mu(p, b, k_max, mc_trials, spec.seed, threads, gaussian_draw(p, dl, a));
        for k in 1..=k_max {
            let top = mu[k].iter().cloned().fold(0.0, f64::max);
            let mut worst_z: f64 = 0.0;
            let mut worst_rel: f64 = 0.0;
            for pp in grid.ul().iter() {
                if mu[k][pp] < 1e-6 * top {
                    continue;
                }
                worst_z = worst_z.max((mc.mean[k][pp] - mu[k][pp]).abs() / mc.stderr[k][pp]);
                worst_rel = worst_rel.max((mc.mean[k][pp] / mu[k][pp] - 1.0).abs());
            }
            out.push(Check {
                name: format!("basis power k={k}"),
                passed: worst_z < 5.0,
                detail: format!("{mc_trials} trials, max |z| {worst_z:.2}, max rel {worst_rel:.3}"),
            });
        }
    }
    Ok(out)
}
