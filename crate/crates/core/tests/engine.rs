use num_bigint::BigUint;
use num_traits::Zero;
use pdpu::engine::csa::{csa_compress, mask};
use pdpu::engine::stages::{s1_decode, s2_multiply, s3_align, s4_accumulate, s5_normalize, s6_encode};
use pdpu::engine::{discrete_dot_fma, discrete_dot_mul_add, fused_dot_traced};
use pdpu::fuzz::random_case;
use pdpu::oracle::{oracle_fused_dot, oracle_step_rounded_dot, Schedule};
use pdpu::{pdpu_dot, quire_width, Mode, Multiplier, PdpuConfig, PositBits, PositFormat};
use proptest::prelude::*;

fn fmt(n: u32, es: u32) -> PositFormat {
    PositFormat::new(n, es).unwrap()
}

/// Mixed-precision configs with `es <= 2`, where the quire is exact.
fn config(mode: Mode) -> impl Strategy<Value = PdpuConfig> {
    (4u32..=16, 0u32..=8, 0u32..=2, 1usize..=9, 4u32..=40).prop_map(move |(n_in, extra, es, n, wm)| {
        let out = (n_in + extra).min(20);
        PdpuConfig::new(fmt(n_in, es), fmt(out, es), n, wm, mode).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn quire_matches_oracle(cfg in config(Mode::Quire), seed: u64, index in 0u64..1000) {
        let (a, b, acc) = random_case(&cfg, seed, index);
        prop_assert_eq!(pdpu_dot(&cfg, &a, &b, acc), oracle_fused_dot(&cfg, &a, &b, acc));
    }

    #[test]
    fn discrete_modes_match_schedules(cfg in config(Mode::DiscreteMulAdd), seed: u64) {
        let (a, b, acc) = random_case(&cfg, seed, 0);
        prop_assert_eq!(
            discrete_dot_mul_add(&cfg, &a, &b, acc),
            oracle_step_rounded_dot(&cfg, &a, &b, acc, Schedule::MulAdd)
        );
        prop_assert_eq!(
            discrete_dot_fma(&cfg, &a, &b, acc),
            oracle_step_rounded_dot(&cfg, &a, &b, acc, Schedule::Fma)
        );
    }

    #[test]
    fn width_saturates_at_quire(cfg in config(Mode::Fused), seed: u64, extra in 0u32..64) {
        let (a, b, acc) = random_case(&cfg, seed, 0);
        let q = quire_width(cfg.out_fmt());
        let at = |wm| {
            let c = PdpuConfig::new(cfg.in_fmt(), cfg.out_fmt(), cfg.n_terms(), wm, Mode::Fused).unwrap();
            pdpu_dot(&c, &a, &b, acc).unwrap()
        };
        prop_assert_eq!(at(q), at(q + extra));
        prop_assert_eq!(at(q), pdpu_dot(&cfg.with_mode(Mode::Quire), &a, &b, acc).unwrap());
    }

    #[test]
    fn zero_vector_returns_acc(cfg in config(Mode::Fused), seed: u64) {
        // acc shares the truncated window, so it passes through intact only
        // when the window holds its whole mantissa plus the guard position
        let wm = cfg.wm().max(cfg.out_fmt().frac_width() + 2);
        let cfg = PdpuConfig::new(cfg.in_fmt(), cfg.out_fmt(), cfg.n_terms(), wm, Mode::Fused).unwrap();
        let (a, _, acc) = random_case(&cfg, seed, 0);
        prop_assume!(!acc.is_nar() && a.iter().all(|x| !x.is_nar()));
        let zeros = vec![cfg.in_fmt().zero(); cfg.n_terms()];
        for mode in Mode::ALL {
            let c = cfg.with_mode(mode);
            prop_assert_eq!(pdpu_dot(&c, &a, &zeros, acc).unwrap(), acc, "{}", mode);
        }
    }

    #[test]
    fn nar_anywhere_gives_nar(cfg in config(Mode::Fused), seed: u64, slot in 0usize..19) {
        let (mut a, mut b, mut acc) = random_case(&cfg, seed, 0);
        let n = cfg.n_terms();
        match slot % (2 * n + 1) {
            i if i < n => a[i] = cfg.in_fmt().nar(),
            i if i < 2 * n => b[i - n] = cfg.in_fmt().nar(),
            _ => acc = cfg.out_fmt().nar(),
        }
        for mode in Mode::ALL {
            prop_assert!(pdpu_dot(&cfg.with_mode(mode), &a, &b, acc).unwrap().is_nar());
        }
        prop_assert!(oracle_fused_dot(&cfg, &a, &b, acc).unwrap().is_nar());
    }

    #[test]
    fn stage_chain_is_the_public_op(cfg in config(Mode::Fused), seed: u64) {
        let (a, b, acc) = random_case(&cfg, seed, 0);
        let s1 = s1_decode(&cfg, &a, &b, acc).unwrap();
        let s2 = s2_multiply(&cfg, &s1);
        let s3 = s3_align(&cfg, &s2);
        let s4 = s4_accumulate(&s3);
        let out = s6_encode(&s5_normalize(&s4), cfg.out_fmt());
        prop_assert_eq!(out, pdpu_dot(&cfg, &a, &b, acc).unwrap());
        let (traced, trace) = fused_dot_traced(&cfg, &a, &b, acc).unwrap();
        prop_assert_eq!(traced, out);
        let out_hex = out.to_string();
        prop_assert_eq!(trace.get("s6.out"), Some(out_hex.as_str()));

        // carry-save form resolves to the modular sum of the aligned terms
        let total = s3.terms.iter().fold(BigUint::zero(), |t, x| t + &x.bits) & mask(s3.wacc);
        prop_assert_eq!(s4.csa.resolve(), total);
    }

    #[test]
    fn booth_multiplier_changes_nothing(cfg in config(Mode::Fused), seed: u64) {
        let (a, b, acc) = random_case(&cfg, seed, 0);
        for mode in Mode::ALL {
            let c = cfg.with_mode(mode);
            prop_assert_eq!(
                pdpu_dot(&c, &a, &b, acc),
                pdpu_dot(&c.with_multiplier(Multiplier::BoothRadix4), &a, &b, acc)
            );
        }
    }

    #[test]
    fn quire_is_permutation_invariant(cfg in config(Mode::Quire), seed: u64, rot in 0usize..9) {
        let (mut a, mut b, acc) = random_case(&cfg, seed, 0);
        let want = pdpu_dot(&cfg, &a, &b, acc).unwrap();
        let r = rot % cfg.n_terms();
        a.rotate_left(r);
        b.rotate_left(r);
        a.reverse();
        b.reverse();
        prop_assert_eq!(pdpu_dot(&cfg, &a, &b, acc).unwrap(), want);
    }

    #[test]
    fn csa_random_compressions(width in 1u32..200, values in prop::collection::vec(any::<u128>(), 1..34)) {
        let xs: Vec<BigUint> = values.iter().map(|&v| BigUint::from(v) & mask(width)).collect();
        let want = xs.iter().fold(BigUint::zero(), |t, x| t + x) & mask(width);
        prop_assert_eq!(csa_compress(&xs, width).resolve(), want);
    }
}

#[test]
fn identity_pass_through() {
    let f = fmt(16, 2);
    for mode in Mode::ALL {
        let cfg = PdpuConfig::new(f, f, 1, 14, mode).unwrap();
        for x in f.patterns().step_by(97) {
            assert_eq!(pdpu_dot(&cfg, &[x], &[f.one()], f.zero()).unwrap(), x, "{mode} {x}");
        }
    }
}

#[test]
fn quire_exhaustive_p6_two_terms() {
    // every (a0, a1, b0, b1) over all 64 patterns of P(6,1), acc = 0, plus
    // every acc against a strided slice of operand pairs
    let f = fmt(6, 1);
    let cfg = PdpuConfig::new(f, f, 2, 0, Mode::Quire).unwrap();
    let ps: Vec<PositBits> = f.patterns().collect();
    for &a0 in &ps {
        for &b0 in &ps {
            for &a1 in &ps {
                for &b1 in &ps {
                    let (a, b) = ([a0, a1], [b0, b1]);
                    assert_eq!(
                        pdpu_dot(&cfg, &a, &b, f.zero()),
                        oracle_fused_dot(&cfg, &a, &b, f.zero()),
                        "{a0} {a1} {b0} {b1}"
                    );
                }
            }
        }
    }
    for &acc in &ps {
        for (i, &a0) in ps.iter().enumerate().step_by(5) {
            for &b0 in ps.iter().skip(i % 3).step_by(3) {
                let (a, b) = ([a0, b0], [b0.negate(), a0]);
                assert_eq!(pdpu_dot(&cfg, &a, &b, acc), oracle_fused_dot(&cfg, &a, &b, acc));
            }
        }
    }
}

#[test]
fn narrow_window_truncates_acc() {
    let f = fmt(16, 2);
    let cfg = PdpuConfig::new(f, f, 1, 6, Mode::Fused).unwrap();
    let acc = PositBits::from_f64(f, 1.0 + 1.0 / 1024.0);
    assert_eq!(pdpu_dot(&cfg, &[f.zero()], &[f.zero()], acc).unwrap(), f.one());
}

#[test]
fn narrow_width_loses_accuracy_but_not_sign_of_large_terms() {
    let f = fmt(8, 2);
    let cfg = PdpuConfig::new(f, f, 2, 4, Mode::Fused).unwrap();
    let big = PositBits::from_f64(f, 64.0);
    let tiny = PositBits::from_f64(f, 1.0 / 64.0);
    // tiny*tiny falls entirely outside the 4-bit window
    let out = pdpu_dot(&cfg, &[big, tiny], &[f.one(), tiny], f.zero()).unwrap();
    assert_eq!(out, big);
}
