use fdsic::imd::{basis_direct_all, basis_recursive, q_size_band};
use fdsic::impairments::iq_freq;
use fdsic::ofdm::{add_cp, dft_vec, idft_vec, mirror_index, remove_cp, Band, TimeSignal};
use fdsic::sic::{ls_solve, SicCoefficients};
use fdsic::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cplx() -> impl Strategy<Value = C64> {
    (-4.0f64..4.0, -4.0f64..4.0).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_round_trip(x in prop::collection::vec(cplx(), 1..80)) {
        let back = dft_vec(&idft_vec(&x));
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn cp_round_trip(x in prop::collection::vec(cplx(), 4..64), frac in 0.05f64..0.9) {
        let n_cp = ((x.len() as f64 * frac) as usize).max(1).min(x.len() - 1);
        let s = add_cp(&TimeSignal::new(x.clone()), n_cp).unwrap();
        prop_assert_eq!(s.samples.len(), x.len() + n_cp);
        prop_assert_eq!(remove_cp(&s, n_cp).unwrap().samples, x);
    }

    #[test]
    fn mirror_is_involution(p in 1usize..5000, q in 0usize..5000) {
        let q = q % p;
        prop_assert_eq!(mirror_index(mirror_index(q, p), p), q);
    }

    #[test]
    fn set_sizes_sum_to_tuple_count(p in 8usize..80, s in 0usize..80, w in 1usize..12, k in 0usize..4) {
        let s = s % p;
        let e = (s + w - 1).min(p - 1);
        let band = Band::new(s, e).unwrap();
        let q = q_size_band(band, p, k);
        let total: u128 = q[k].iter().sum();
        prop_assert_eq!(total, (band.len() as u128).pow(2 * k as u32 + 1));
    }

    #[test]
    fn recursion_agrees_with_direct(vals in prop::collection::vec(cplx(), 1..12), off in 0usize..40, b in cplx()) {
        let p = 48;
        let mut x = vec![C64::new(0.0, 0.0); p];
        for (i, v) in vals.iter().enumerate() {
            x[(off + i) % p] = *v;
        }
        let x_iq = iq_freq(&x, b * 0.05);
        let (r, _) = basis_recursive(&x_iq, 3);
        let d = basis_direct_all(&x_iq, 3);
        for k in 0..=3 {
            let scale = d[k].iter().map(|v| v.norm()).fold(1e-300, f64::max);
            for q in 0..p {
                prop_assert!((r[k][q] - d[k][q]).norm() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn ls_recovers_noiseless_truth(seed in 0u64..1000, m in 4usize..40, k in 1usize..4) {
        prop_assume!(m >= k);
        let mut rng = fdsic::rng(seed);
        let a = DMatrix::from_fn(m, k, |_, _| fdsic::cgauss(&mut rng, 1.0));
        let c: Vec<C64> = (0..k).map(|_| fdsic::cgauss(&mut rng, 1.0)).collect();
        let y: Vec<C64> = (0..m).map(|i| (0..k).map(|j| a[(i, j)] * c[j]).sum()).collect();
        if let Ok(got) = ls_solve(&a, &y, 0.0) {
            for j in 0..k {
                prop_assert!((got[j] - c[j]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn coefficient_dump_round_trips(
        h in prop::collection::vec(cplx(), 8),
        a in prop::collection::vec(cplx(), 1..4),
        b in cplx(),
        mask in prop::collection::vec(any::<bool>(), 8),
    ) {
        let n = 32;
        let ul = Band::new(10, 17).unwrap();
        let k_max = a.len() - 1;
        let mut h_hat = vec![C64::new(0.0, 0.0); n];
        let mut h_valid = vec![false; n];
        let mut basis_sets = vec![Vec::new(); n];
        for (i, p) in ul.iter().enumerate() {
            if mask[i] {
                h_hat[p] = h[i];
                h_valid[p] = true;
                basis_sets[p] = (1..=k_max.min(i % 3)).collect();
            }
        }
        let c = SicCoefficients { num_subcarriers: n, ul, h_hat, h_valid, a_hat: a, b_hat: b * 0.01, basis_sets };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        prop_assert_eq!(SicCoefficients::read_csv(std::io::Cursor::new(buf)).unwrap(), c);
    }
}
