use fdsic::chain::SiChain;
use fdsic::channel::EffectiveChannel;
use fdsic::counter::{OpCounter, Stage};
use fdsic::imd::{default_omega, impulse_pilot, MomentMode};
use fdsic::impairments::{default_measured_pa, irr_to_b, IqImbalance, PaPolynomial};
use fdsic::ofdm::{gen_qam_symbols, Band, FreqSymbol, SubcarrierGrid};
use fdsic::sic::*;
use fdsic::{Result, C64};

const P: usize = 256;

struct Setup {
    grid: SubcarrierGrid,
    chain: SiChain,
    a_digi: f64,
}

fn setup(ul: (usize, usize), iq: IqImbalance, pa: PaPolynomial, noise: f64) -> Setup {
    let dl = Band::new(77, 179).unwrap();
    let grid = SubcarrierGrid::new(P, 60e3, 32, dl, Band::new(ul.0, ul.1).unwrap()).unwrap();
    let taps = vec![
        C64::new(1.0, 0.0),
        C64::from_polar(0.3, 1.1),
        C64::from_polar(0.2, -2.0),
        C64::from_polar(0.15, 0.4),
        C64::from_polar(0.1, 2.9),
    ];
    let h = EffectiveChannel::from_taps(taps, P, 0).unwrap();
    let h = h.scaled((10f64.powf(-6.83) / h.mean_power_gain()).sqrt());
    let chain = SiChain::new(grid.clone(), iq, pa, h, noise).unwrap();
    Setup { grid, chain, a_digi: 0.5 * P as f64 / (dl.len() as f64).sqrt() }
}

fn config(n_impulse: usize, n_train: usize, gamma: f64) -> EstimatorConfig {
    EstimatorConfig {
        gamma,
        k_max: 2,
        n_impulse,
        n_train,
        regularization: 0.0,
        moment_mode: MomentMode::Gaussian,
        iq_refinements: 6,
    }
}

fn buffer(s: &Setup, cfg: &EstimatorConfig, seed: u64) -> Result<TrainingBuffer> {
    let mut rng = fdsic::rng_stream(seed, 1);
    let full = s.grid.full_band();
    let pilot_grid = s.grid.with_dl(full)?;
    let omega = default_omega(&s.grid);
    let mut impulse = Vec::new();
    for m in 0..cfg.n_impulse {
        let amp = 6.0 * (m + 1) as f64 / cfg.n_impulse as f64;
        let x = impulse_pilot(&pilot_grid, amp, omega);
        impulse.push(ImpulseObservation { amplitude: amp, omega, rx: s.chain.receive_time(&x, &mut rng)? });
    }
    let mut data = Vec::new();
    for x in gen_qam_symbols(&s.grid, 16, s.a_digi, cfg.n_train, seed)? {
        let rx = s.chain.receive(&x, &mut rng)?;
        data.push(DataObservation { tx: x, rx });
    }
    Ok(TrainingBuffer { pilot_band: full, impulse, data })
}

fn estimate_for(s: &Setup, cfg: &EstimatorConfig, seed: u64, force_b: Option<C64>) -> (SicCoefficients, OpCounter) {
    let buf = buffer(s, cfg, seed).unwrap();
    let inp = EstimationInputs {
        grid: &s.grid,
        a_digi: s.a_digi,
        los_gain: s.chain.channel.los_gain,
        los_tap: 0,
        config: cfg,
        force_b,
    };
    let mut counter = OpCounter::new();
    let c = estimate(&buf, &inp, &mut counter).unwrap();
    (c, counter)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn noiseless_chain_recovers_every_parameter() {
    let iq = irr_to_b(25.0, 0.3).unwrap();
    let s = setup((77, 179), iq, default_measured_pa(), 0.0);
    let (c, _) = estimate_for(&s, &config(4, 14, 1e-30), 1, None);
    assert!(rel(c.b_hat, iq.b) < 1e-6, "b {} vs {}", c.b_hat, iq.b);
    for k in 0..3 {
        let e = rel(c.a_hat[k], s.chain.pa.coeff(k));
        assert!(e < 1e-6, "a_{} rel err {e}", 2 * k + 1);
    }
    for p in s.grid.ul().iter() {
        assert!(c.h_valid[p]);
        assert!(rel(c.h_hat[p], s.chain.channel.freq[p]) < 1e-8, "p={p}");
    }
    let x = gen_qam_symbols(&s.grid, 16, s.a_digi, 1, 99).unwrap().remove(0);
    let y = s.chain.si_only(&x).unwrap();
    let mut counter = OpCounter::new();
    let r = run_sic(&y, &x, &c, &mut counter).unwrap();
    let raw: f64 = s.grid.ul().iter().map(|p| y.values[p].norm_sqr()).sum();
    let res: f64 = s.grid.ul().iter().map(|p| r.values[p].norm_sqr()).sum();
    assert!(res < 1e-16 * raw, "{res} vs {raw}");
    assert!(counter.get(Stage::Running).mul <= (s.grid.ul().len() * 3) as u64);
}

#[test]
fn linear_chain_gives_zero_mirror_coefficient() {
    let s = setup((77, 179), IqImbalance::none(), PaPolynomial::linear(35.89), 0.0);
    let buf = buffer(&s, &config(4, 6, 1.0), 3).unwrap();
    let b = estimate_iq(&buf.data, s.grid.dl(), &mut OpCounter::new()).unwrap();
    assert!(b.norm() < 1e-9, "{b}");
}

#[test]
fn sbfd_channel_identified_from_out_of_band_regressor() {
    let iq = irr_to_b(25.0, -0.7).unwrap();
    let s = setup((181, 216), iq, default_measured_pa(), 0.0);
    let (c, _) = estimate_for(&s, &config(4, 14, 1e-30), 5, None);
    for p in s.grid.ul().iter() {
        assert!(c.h_valid[p], "p={p}");
        assert!(rel(c.h_hat[p], s.chain.channel.freq[p]) < 1e-6, "p={p}");
    }
}

#[test]
fn selection_limits() {
    let iq = irr_to_b(25.0, 0.0).unwrap();
    let s = setup((77, 179), iq, default_measured_pa(), 0.0);
    let (all, _) = estimate_for(&s, &config(4, 14, 1e-300), 2, None);
    assert!(s.grid.ul().iter().all(|p| all.basis_sets[p] == vec![1, 2]));
    let (none, _) = estimate_for(&s, &config(4, 14, f64::INFINITY.min(1e300)), 2, None);
    assert_eq!(none.total_basis(), 0);

    // with every set empty the canceller is the linear one on X_iq
    let x = gen_qam_symbols(&s.grid, 16, s.a_digi, 1, 7).unwrap().remove(0);
    let y = s.chain.si_only(&x).unwrap();
    let r = run_sic(&y, &x, &none, &mut OpCounter::new()).unwrap();
    let x_iq = FreqSymbol::new(fdsic::impairments::iq_freq(&x.values, none.b_hat), 0);
    for p in s.grid.ul().iter() {
        let want = y.values[p] - none.h_hat[p] * none.a_hat[0] * x_iq.values[p];
        assert!((r.values[p] - want).norm() <= 1e-12 * y.values[p].norm());
    }
}

#[test]
fn threshold_monotonicity() {
    let iq = irr_to_b(25.0, 0.0).unwrap();
    let s = setup((77, 179), iq, default_measured_pa(), 1e-9);
    let mut prev: Option<SicCoefficients> = None;
    for g in [1e-12, 1e-10, 1e-9, 1e-8, 1e-6] {
        let (c, _) = estimate_for(&s, &config(4, 14, g), 4, None);
        if let Some(pv) = &prev {
            for p in s.grid.ul().iter() {
                assert!(c.basis_sets[p].iter().all(|k| pv.basis_sets[p].contains(k)), "p={p}");
            }
        }
        prev = Some(c);
    }
}

#[test]
fn full_ls_noiseless_residual_is_zero() {
    let iq = irr_to_b(25.0, 0.2).unwrap();
    let s = setup((77, 179), iq, default_measured_pa(), 0.0);
    let buf = buffer(&s, &config(4, 14, 1.0), 8).unwrap();
    let mut counter = OpCounter::new();
    let f = baseline_full_ls(&buf.data, &s.grid, 2, iq.b, 0.0, &mut counter).unwrap();
    let x = gen_qam_symbols(&s.grid, 16, s.a_digi, 1, 70).unwrap().remove(0);
    let y = s.chain.si_only(&x).unwrap();
    let r = run_full_ls(&y, &x, &f, &mut counter).unwrap();
    let raw: f64 = s.grid.ul().iter().map(|p| y.values[p].norm_sqr()).sum();
    let res: f64 = s.grid.ul().iter().map(|p| r.values[p].norm_sqr()).sum();
    assert!(res < 1e-14 * raw, "{res} vs {raw}");
    assert!(baseline_full_ls(&buf.data[..2], &s.grid, 2, iq.b, 0.0, &mut counter).is_err());
}

#[test]
fn coefficients_reject_other_grid() {
    let s = setup((77, 179), IqImbalance::none(), default_measured_pa(), 0.0);
    let (c, _) = estimate_for(&s, &config(3, 4, 1.0), 1, None);
    let short = FreqSymbol::zeros(128);
    assert!(run_sic(&short, &short, &c, &mut OpCounter::new()).is_err());
}

#[test]
fn too_few_impulse_symbols() {
    let s = setup((77, 179), IqImbalance::none(), default_measured_pa(), 0.0);
    let buf = buffer(&s, &config(3, 4, 1.0), 1).unwrap();
    let r = estimate_pa(&buf.impulse[..2], buf.pilot_band, s.chain.channel.los_gain, 0, C64::new(0.0, 0.0), 2, 0.0, &mut OpCounter::new());
    assert!(matches!(r, Err(fdsic::Error::Underdetermined(_))));
}
