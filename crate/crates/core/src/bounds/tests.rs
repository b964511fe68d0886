use super::*;
use num_bigint::BigInt;
use proptest::prelude::*;

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ev(n: i64, d: i64) -> ExactValue {
    ExactValue::ratio(n, d)
}

/// Counts tuples (S1, S2 ⊆ [q], T ⊆ [k], U ⊆ [c]) with |S1| = |S2| = |T| = t
/// and |U| = k − t, by enumerating bitmasks.
fn capital_a_by_counting(k: u32, q: u32, c: u32) -> u64 {
    let subsets = |n: u32, size: u32| (0u32..(1 << n)).filter(|m| m.count_ones() == size).count() as u64;
    (0..=k)
        .map(|t| {
            let sq = subsets(q, t);
            sq * sq * subsets(k, t) * if k - t <= c { subsets(c, k - t) } else { 0 }
        })
        .sum()
}

#[test]
fn capital_a_examples() {
    assert_eq!(capital_a(1, 2, 3).unwrap(), ExactValue::from_integer(7));
    assert_eq!(capital_a(2, 2, 2).unwrap(), ExactValue::from_integer(18));
    assert_eq!(capital_a(2, 3, 0).unwrap(), ExactValue::from_integer(9));
}

#[test]
fn capital_a_matches_subset_counting() {
    for k in 1..=3 {
        for q in 0..=5 {
            for c in 0..=5 {
                let want = capital_a_by_counting(k, q, c);
                let got = capital_a(k as u64, q as u64, c as u64).unwrap();
                assert_eq!(got, ExactValue::from_integer(want), "k={k} q={q} c={c}");
            }
        }
    }
}

#[test]
fn capital_a_single_reprogramming_is_q_squared_plus_c() {
    for q in 0..=1000u64 {
        for c in (0..=1000u64).step_by(37).chain([1000]) {
            assert_eq!(
                capital_a(1, q, c).unwrap(),
                ExactValue::from_integer(q * q + c),
                "q={q} c={c}"
            );
        }
    }
}

#[test]
fn alpha_examples() {
    assert_eq!(alpha_distribution(1, 2, 3).unwrap(), vec![ev(3, 7), ev(4, 7)]);
    assert_eq!(
        alpha_distribution(1, 0, 1).unwrap(),
        vec![ExactValue::one(), ExactValue::zero()]
    );
    assert_eq!(
        alpha_distribution(3, 1, 1).unwrap_err(),
        BoundsError::ZeroMass { k: 3, q: 1, c: 1 }
    );
}

#[test]
fn alpha_sums_to_one_exactly() {
    for total in 1..=24u64 {
        for q in 0..=total {
            let c = total - q;
            for k in 1..=total {
                let alpha = alpha_distribution(k, q, c).unwrap();
                assert_eq!(alpha.len() as u64, k + 1);
                let sum = alpha
                    .iter()
                    .map(|a| a.as_rational().unwrap().clone())
                    .fold(BigRational::zero(), |acc, a| acc + a);
                assert!(alpha.iter().all(|a| !a.is_negative()));
                assert_eq!(sum, BigRational::one(), "k={k} q={q} c={c}");
            }
        }
    }
}

#[test]
fn hybrid_loss_examples() {
    assert_eq!(hybrid_loss_exact(1, 1, 1).unwrap(), ExactValue::from_integer(8));
    assert_eq!(hybrid_loss_exact(1, 2, 3).unwrap(), ExactValue::from_integer(28));
    assert_eq!(hybrid_loss_exact(2, 2, 2).unwrap(), ExactValue::from_integer(576));
}

#[test]
fn hybrid_loss_is_monotone_and_at_least_one() {
    for k in 1..=4u64 {
        for q in 0..=8u64 {
            for c in 0..=8u64 {
                if k > q + c {
                    continue;
                }
                let base = hybrid_loss_exact(k, q, c).unwrap();
                assert!(base >= ExactValue::one());
                assert!(dfm_loss(k, q).unwrap() >= ExactValue::one());
                assert!(hybrid_loss_exact(k, q + 1, c).unwrap() >= base);
                assert!(hybrid_loss_exact(k, q, c + 1).unwrap() >= base);
            }
        }
    }
}

#[test]
fn simplified_factor_at_unit_budget() {
    let eight_e2 = ExactValue::Exact(int(8) * e_squared_upper());
    assert_eq!(hybrid_loss_simplified(1, 0, 1).unwrap().bare, eight_e2);
    assert_eq!(hybrid_loss_simplified(1, 1, 0).unwrap().bare, eight_e2);
    let full = hybrid_loss_simplified(1, 1, 0).unwrap().full;
    assert_eq!(full, ExactValue::Exact(int(4) * int(8) * e_squared_upper()));
}

#[test]
fn e_squared_upper_bounds_e_squared() {
    let e2 = std::f64::consts::E * std::f64::consts::E;
    assert!(e_squared_upper() > BigRational::from_float(e2).unwrap());
}

#[test]
fn capital_a_below_simplified_factor() {
    for q in 1..=12u64 {
        for c in 1..=12u64 {
            for k in 1..=q.min(c) {
                let a = capital_a(k, q, c).unwrap();
                let bare = hybrid_loss_simplified(k, q, c).unwrap().bare;
                assert!(a.is_exact() && bare.is_exact());
                assert!(a <= bare, "k={k} q={q} c={c}: {a} > {bare}");
            }
        }
    }
}

#[test]
fn dfm_examples() {
    assert_eq!(dfm_loss(1, 2).unwrap(), ExactValue::from_integer(25));
    assert_eq!(dfm_loss(2, 1).unwrap(), ExactValue::from_integer(81));
    assert_eq!(dfm_loss(1, 0).unwrap(), ExactValue::one());
}

#[test]
fn noisy_exact_examples() {
    assert_eq!(noisy_loss_exact(&r(0, 1), 2, 1).unwrap(), ExactValue::from_integer(4));
    for total in 1..=8u64 {
        for k in 1..=total {
            let want = BigUint::from(k) * binomial(total, k);
            assert_eq!(
                noisy_loss_exact(&r(1, 1), total, k).unwrap(),
                ExactValue::from_biguint(want)
            );
        }
    }
}

#[test]
fn noisy_half_denominator_is_geometric() {
    // at p = 1/2 the geometric sum is (k+1)/2^k, so the denominator is
    // (k+1)/(2^k·C(T,k)) and the ratio's numerator is easy to recompute
    for total in 1..=10u64 {
        for k in 1..=total {
            let half = r(1, 2);
            let mut numer = BigRational::zero();
            for t in 0..=k {
                numer += big(binomial(total, t) * binomial(k, t));
            }
            let numer = numer * int(k) / big(BigUint::one() << k);
            let denom = ratio(k + 1, 1) / big((BigUint::one() << k) * binomial(total, k));
            assert_eq!(
                noisy_loss_exact(&half, total, k).unwrap(),
                ExactValue::Exact(numer / denom)
            );
        }
    }
}

#[test]
fn noisy_asymptotic_examples() {
    assert_eq!(noisy_loss_asymptotic(&r(1, 1), 5, 2).unwrap(), ExactValue::from_integer(20));
    assert_eq!(noisy_loss_asymptotic(&r(0, 1), 2, 1).unwrap(), ExactValue::from_integer(6));
}

#[test]
fn noisy_exact_below_k_times_asymptotic() {
    for p in [r(0, 1), r(1, 4), r(1, 2), r(3, 4), r(1, 1)] {
        for total in 1..=10u64 {
            for k in 1..=total {
                let exact = noisy_loss_exact(&p, total, k).unwrap();
                let asym = noisy_loss_asymptotic(&p, total, k).unwrap();
                let scaled = asym.mul(&ExactValue::from_integer(k), Rounding::Up);
                assert!(exact <= scaled, "p={p} T={total} k={k}: {exact} > {scaled}");
            }
        }
    }
}

#[test]
fn noisy_exact_varies_boundedly_in_p() {
    // adjacent points of a 1/16 grid differ by at most a factor
    // C(T,k)·2^k·(k+1) in either direction for these small parameters
    for total in 1..=6u64 {
        for k in 1..=total {
            let values: Vec<ExactValue> = (0..=16)
                .map(|i| noisy_loss_exact(&r(i, 16), total, k).unwrap())
                .collect();
            let bound = ExactValue::from_biguint(binomial(total, k) * (BigUint::one() << k) * (k + 1));
            for w in values.windows(2) {
                let up = w[1].div(&w[0], Rounding::Up);
                let down = w[0].div(&w[1], Rounding::Up);
                assert!(up <= bound && down <= bound);
            }
            assert_eq!(values[16], ExactValue::from_biguint(binomial(total, k) * k));
        }
    }
}

#[test]
fn noisy_rejects_bad_inputs() {
    assert!(noisy_loss_exact(&r(3, 2), 4, 1).is_err());
    assert!(noisy_loss_exact(&r(1, 2), 1, 2).is_err());
    assert!(noisy_loss_asymptotic(&r(-1, 2), 4, 1).is_err());
}

#[test]
fn bounded_depth_map() {
    assert_eq!(bounded_depth_params(1, 5).unwrap(), (r(1, 1), 10));
    assert_eq!(bounded_depth_params(10, 3).unwrap(), (r(1, 10), 6));
    assert!(bounded_depth_params(0, 3).is_err());
    let (p, t) = bounded_depth_params(4, 3).unwrap();
    assert_eq!(
        noisy_loss_asymptotic(&p, t, 2).unwrap(),
        ExactValue::Exact(big(binomial(6, 2)) * (num_traits::Pow::pow(r(3, 4) * int(12), 2) + int(2)))
    );
}

#[test]
fn lifting_examples() {
    assert_eq!(lifting_bound(1, 1, 1, &ev(1, 8)).unwrap(), ExactValue::one());
    assert_eq!(lifting_bound(1, 2, 3, &ev(1, 100)).unwrap(), ev(28, 100));
    assert_eq!(lifting_bound(1, 2, 3, &ExactValue::zero()).unwrap(), ExactValue::zero());
    assert_eq!(lifting_bound(1, 1, 1, &ev(1, 2)).unwrap(), ExactValue::one());
    let raw = Bounds::default().lifting_bound_raw(1, 1, 1, &ev(1, 2)).unwrap();
    assert_eq!(raw, ExactValue::from_integer(4));
}

#[test]
fn dpt_examples() {
    let single = lifting_bound(1, 2, 3, &ev(1, 100)).unwrap();
    assert_eq!(dpt_bound(1, 1, 2, 3, &ev(1, 100)).unwrap(), single);
    assert_eq!(dpt_bound(2, 1, 2, 3, &ev(1, 100)).unwrap(), ev(28 * 28, 100 * 100));
    for g in 1..5 {
        assert_eq!(dpt_bound(g, 1, 2, 3, &ExactValue::zero()).unwrap(), ExactValue::zero());
    }
}

#[test]
fn advice_examples() {
    let p = ev(1, 1000);
    let lifting = lifting_bound(1, 2, 3, &p).unwrap();
    let want = ExactValue::from_integer(4).mul(&lifting, Rounding::Up).cap_at_one();
    assert_eq!(advice_bound(1, 2, 3, 1, &p).unwrap(), want);
    assert_eq!(advice_bound(1, 2, 3, 3, &ExactValue::zero()).unwrap(), ExactValue::zero());
}

#[test]
fn advice_is_monotone() {
    let ps = [ev(1, 1 << 20), ev(1, 1 << 12), ev(1, 1 << 6)];
    for s in 1..=3u64 {
        for q in 0..=4u64 {
            for c in 0..=4u64 {
                if q + c == 0 {
                    continue;
                }
                for (i, p) in ps.iter().enumerate() {
                    let v = advice_bound(1, q, c, s, p).unwrap();
                    assert!(advice_bound(1, q + 1, c, s, p).unwrap() >= v);
                    assert!(advice_bound(1, q, c + 1, s, p).unwrap() >= v);
                    if let Some(next) = ps.get(i + 1) {
                        assert!(advice_bound(1, q, c, s, next).unwrap() >= v);
                    }
                }
            }
        }
    }
}

#[test]
fn salted_examples() {
    let p = ev(1, 1000);
    let lifting = lifting_bound(1, 2, 3, &p).unwrap();
    assert_eq!(salted_bound(1, 2, 3, 0, 64, &p).unwrap(), lifting);
    assert_eq!(salted_bound(1, 2, 3, 64, 64, &p).unwrap(), ExactValue::one());
    let sum = ev(4 * 3, 1 << 20).add(&lifting, Rounding::Up);
    assert_eq!(salted_bound(1, 2, 3, 3, 1 << 20, &p).unwrap(), sum);
}

#[test]
fn multi_image_examples() {
    let a = multi_image_alg_success(1, 2, 3, 100).unwrap();
    assert_eq!(a.capped, ev(7, 200));
    let b = multi_image_alg_success(2, 2, 2, 16).unwrap();
    assert_eq!(b.capped, ev(1, 128));
    assert_eq!(
        multi_image_alg_success(2, 3, 2, 16).unwrap_err(),
        BoundsError::IndivisibleBudget { k: 2, q: 3, c: 2 }
    );
    let capped = multi_image_alg_success(1, 4, 0, 8).unwrap();
    assert_eq!(capped.capped, ExactValue::one());
    assert_eq!(capped.raw, ev(16, 16));
}

#[test]
fn optimality_ratio_is_bounded() {
    // loss·k!/N^k over the algorithm's success is at most
    // 2^{3k}·k·(8e²)^k ≤ (16·8e²)^k
    let c_const = int(16) * int(8) * e_squared_upper();
    for k in 1..=2u64 {
        for u in 1..=2u64 {
            for v in 0..=2u64 {
                for n in [8u64, 16] {
                    let (q, c) = (k * u, k * v);
                    let loss = hybrid_loss_exact(k, q, c).unwrap();
                    let kfact = (1..=k).product::<u64>();
                    let upper = loss.mul(&ev(kfact as i64, n.pow(k as u32) as i64), Rounding::Up);
                    let alg = multi_image_alg_success(k, q, c, n).unwrap().raw;
                    let ratio = upper.div(&alg, Rounding::Up);
                    let limit = ExactValue::Exact(num_traits::Pow::pow(&c_const, k as i32));
                    assert!(ratio <= limit);
                }
            }
        }
    }
}

#[test]
fn floor_examples() {
    assert_eq!(hybrid_search_floor(0, 1, 2).unwrap(), ev(1, 4));
    assert_eq!(hybrid_search_floor(1, 0, 4).unwrap(), ev(1, 8));
    assert_eq!(
        hybrid_search_floor(1, 4, 4).unwrap_err(),
        BoundsError::DomainExhausted { v: 4, n: 4 }
    );
    for n in 2..=8u64 {
        for u in 0..=3u64 {
            for v in 0..n - 1 {
                let f = hybrid_search_floor(u, v, n).unwrap();
                assert!(hybrid_search_floor(u + 1, v, n).unwrap() >= f);
                assert!(hybrid_search_floor(u, v + 1, n).unwrap() >= f);
            }
        }
    }
}

#[test]
fn log_domain_tracks_exact_values() {
    let small = Bounds::new(32);
    for (k, q, c) in [(4u64, 40u64, 17u64), (5, 100, 100), (8, 64, 1000)] {
        let exact = capital_a(k, q, c).unwrap();
        let logged = small.capital_a(k, q, c).unwrap();
        assert!(exact.is_exact());
        assert!(!logged.is_exact());
        assert!(logged >= exact);
        assert!((logged.log2() - exact.log2()).abs() < 1e-6);

        let loss = hybrid_loss_exact(k, q, c).unwrap();
        let loss_log = small.hybrid_loss_exact(k, q, c).unwrap();
        assert!(loss_log >= loss);
        assert!((loss_log.log2() - loss.log2()).abs() < 1e-6);
    }
    let exact = noisy_loss_exact(&r(1, 3), 40, 6).unwrap();
    let logged = small.noisy_loss_exact(&r(1, 3), 40, 6).unwrap();
    assert!(!logged.is_exact() && logged >= exact);
    assert!((logged.log2() - exact.log2()).abs() < 1e-6);

    let alg = multi_image_alg_success(4, 40, 8, 1 << 20).unwrap().raw;
    let alg_log = small.multi_image_alg_success(4, 40, 8, 1 << 20).unwrap().raw;
    assert!(!alg_log.is_exact() && alg_log <= alg);
}

#[test]
fn cryptographic_scale_parameters() {
    let q = 1u64 << 60;
    let c = 1u64 << 62;
    let loss = hybrid_loss_exact(128, q, c).unwrap();
    assert!(!loss.is_exact());
    let simplified = hybrid_loss_simplified(128, q, c).unwrap();
    assert!(simplified.full >= loss);
    let bound = lifting_bound(128, q, c, &ExactValue::from_log2(-256.0 * 128.0)).unwrap();
    assert!(bound.log2() < 0.0);
}

#[test]
fn bounds_are_pure() {
    let a = noisy_loss_exact(&r(2, 7), 9, 3).unwrap();
    let b = noisy_loss_exact(&r(2, 7), 9, 3).unwrap();
    assert_eq!(a, b);
    let x = Bounds::new(16).hybrid_loss_exact(6, 90, 70).unwrap();
    let y = Bounds::new(16).hybrid_loss_exact(6, 90, 70).unwrap();
    assert_eq!(x.log2().to_bits(), y.log2().to_bits());
}

#[test]
fn report_has_unique_tagged_entries() {
    let mut params = Params::new(1, 2, 3);
    params.codomain = Some(100);
    params.total = Some(6);
    params.p = Some(r(1, 2));
    params.instances = Some(2);
    params.advice_bits = Some(2);
    params.salts = Some(1024);
    let report = BoundReport::build(&Bounds::default(), &params, Some(&ev(1, 100)), Some(&ev(1, 10_000))).unwrap();
    assert!(report.names_are_unique());
    assert_eq!(report.get("lifting_bound").unwrap().value, ev(28, 100));
    assert_eq!(report.get("capital_a").unwrap().tag, TheoremTag::HybridReprogram);
    let text = serde_json::to_string(&report).unwrap();
    let back: BoundReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}

#[test]
fn report_rejects_inconsistent_params() {
    let params = Params::new(1, 0, 0);
    assert!(BoundReport::build(&Bounds::default(), &params, None, None).is_err());
    let mut params = Params::new(1, 1, 1);
    params.p = Some(r(1, 2));
    params.depth = Some(3);
    assert!(BoundReport::build(&Bounds::default(), &params, None, None).is_err());
}

proptest! {
    #[test]
    fn exact_and_log_routes_agree(k in 1u64..6, q in 0u64..200, c in 0u64..200) {
        prop_assume!(k <= q + c);
        let exact = hybrid_loss_exact(k, q, c).unwrap();
        let logged = Bounds::new(8).hybrid_loss_exact(k, q, c).unwrap();
        prop_assert!(logged >= exact);
        prop_assert!((logged.log2() - exact.log2()).abs() < 1e-6);
    }

    #[test]
    fn alpha_is_a_distribution(k in 1u64..8, q in 0u64..30, c in 0u64..30) {
        prop_assume!(k <= q + c);
        let alpha = alpha_distribution(k, q, c).unwrap();
        let total: BigRational = alpha.iter().map(|a| a.as_rational().unwrap().clone()).sum();
        prop_assert_eq!(total, BigRational::one());
    }
}
