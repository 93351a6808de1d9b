use cbrw::config::{parse_config_str, RunConfig};
use cbrw::export::fmt_f64;
use cbrw::front::FrontModel;
use cbrw::lattice_walk::{JumpLaw, JumpModel};
use cbrw::malthus::{
    classify, rho_of_lambda, solve_malthusian, taboo_transforms, Catalyst, CatalyticSystem, OffspringLaw, Regime,
    SolverSettings,
};
use cbrw::simulate::{run_cbrw, Caps};
use proptest::prelude::*;

/// Nearest-neighbour walk on `Z^d` with arbitrary positive step weights.
fn nn_weighted(d: usize, q: f64, w: &[f64]) -> JumpModel {
    let total: f64 = w.iter().sum();
    let mut atoms = Vec::new();
    for k in 0..d {
        for (sign, wi) in [(1, w[2 * k]), (-1, w[2 * k + 1])] {
            let mut e = vec![0; d];
            e[k] = sign;
            atoms.push((e, wi / total));
        }
    }
    JumpModel::new(d, q, JumpLaw::FiniteSupport(atoms)).unwrap()
}

fn walk_2d() -> impl Strategy<Value = JumpModel> {
    (0.5f64..3.0, prop::collection::vec(0.1f64..1.0, 4)).prop_map(|(q, w)| nn_weighted(2, q, &w))
}

fn walk_1d() -> impl Strategy<Value = JumpModel> {
    (0.5f64..3.0, prop::collection::vec(0.1f64..1.0, 2)).prop_map(|(q, w)| nn_weighted(1, q, &w))
}

fn cat(x: Vec<i64>, alpha: f64) -> Catalyst {
    Catalyst {
        position: x,
        alpha,
        offspring: OffspringLaw::Deterministic(2),
    }
}

fn angle(t: f64) -> Vec<f64> {
    vec![t.cos(), t.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cumulant_vanishes_at_zero_and_is_convex(
        m in walk_2d(),
        a in prop::collection::vec(-1.5f64..1.5, 2),
        b in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        prop_assert_eq!(m.log_mgf(&[0.0, 0.0]).unwrap(), 0.0);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (ha, hb, hm) = (m.log_mgf(&a).unwrap(), m.log_mgf(&b).unwrap(), m.log_mgf(&mid).unwrap());
        prop_assert!(hm <= 0.5 * (ha + hb) + 1e-12 * (1.0 + ha.abs() + hb.abs()));
    }

    #[test]
    fn cumulant_gradient_matches_differences(m in walk_2d(), s in prop::collection::vec(-1.0f64..1.0, 2)) {
        let g = m.grad_log_mgf(&s).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut p = s.clone();
            let mut n = s.clone();
            p[k] += h;
            n[k] -= h;
            let fd = (m.log_mgf(&p).unwrap() - m.log_mgf(&n).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "{} vs {}", fd, g[k]);
        }
    }

    #[test]
    fn characteristic_function_is_bounded(m in walk_2d(), th in prop::collection::vec(-4.0f64..4.0, 2)) {
        prop_assert!(m.char_fn(&th).norm() <= 1.0 + 1e-12);
        prop_assert!((m.char_fn(&[0.0, 0.0]).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn floats_round_trip_through_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn front_points_lie_on_the_supporting_hyperplane(
        m in walk_2d(),
        nu in 0.2f64..3.0,
        t in 0.0f64..std::f64::consts::TAU,
        c in 0.5f64..1.5,
    ) {
        let front = FrontModel::new(m.clone(), nu).unwrap();
        let r = front.level_point(&angle(t)).unwrap();
        prop_assert!((m.log_mgf(&r).unwrap() - nu).abs() <= front.level_tol());
        let z = front.front_point(&r).unwrap();
        let zr = z[0] * r[0] + z[1] * r[1];
        prop_assert!((zr - nu).abs() < 1e-12 * (1.0 + nu));
        // The support function is positively homogeneous and equals nu at z.
        let scaled: Vec<f64> = z.iter().map(|v| c * v).collect();
        let margin = front.support_margin(&scaled).unwrap();
        prop_assert!((margin - (c - 1.0) * nu).abs() < 1e-7 * (1.0 + nu), "{} vs {}", margin, (c - 1.0) * nu);
    }

    #[test]
    fn taboo_rows_are_sub_probabilities(
        m in walk_2d(),
        lambda in 0.0f64..3.0,
        pos in prop::collection::vec(-3i64..=3, 4),
    ) {
        prop_assume!(pos[0..2] != pos[2..4]);
        let system = CatalyticSystem::new(
            m,
            vec![cat(pos[0..2].to_vec(), 0.5), cat(pos[2..4].to_vec(), 0.3)],
            vec![0, 0],
        ).unwrap();
        let f = taboo_transforms(&system, lambda, &SolverSettings::default()).unwrap();
        for i in 0..2 {
            let row = f[(i, 0)] + f[(i, 1)];
            prop_assert!(f[(i, 0)] >= -1e-12 && f[(i, 1)] >= -1e-12);
            prop_assert!(row <= 1.0 + 1e-9, "row {} sums to {}", i, row);
        }
    }

    #[test]
    fn spectral_radius_decreases_in_lambda(
        m in walk_1d(),
        alpha in 0.1f64..0.9,
        l1 in 0.0f64..2.0,
        dl in 0.01f64..2.0,
    ) {
        let system = CatalyticSystem::new(m, vec![cat(vec![0], alpha), cat(vec![2], alpha)], vec![0]).unwrap();
        let s = SolverSettings::default();
        let a = rho_of_lambda(&system, l1, &s).unwrap();
        let b = rho_of_lambda(&system, l1 + dl, &s).unwrap();
        prop_assert!(b <= a + 1e-10, "rho({}) = {} < rho({}) = {}", l1, a, l1 + dl, b);
    }

    #[test]
    fn malthusian_parameter_is_translation_invariant(
        m in walk_1d(),
        alpha in 0.3f64..0.9,
        shift in -6i64..=6,
    ) {
        let at = |o: i64| CatalyticSystem::new(
            m.clone(),
            vec![cat(vec![o], alpha), cat(vec![o + 3], alpha)],
            vec![o],
        ).unwrap();
        let s = SolverSettings::default();
        let (ca, cb) = (classify(&at(0), &s).unwrap(), classify(&at(shift), &s).unwrap());
        prop_assert!((ca.rho_at_zero - cb.rho_at_zero).abs() < 1e-10 * ca.rho_at_zero);
        prop_assert_eq!(ca.regime, cb.regime);
        if ca.regime == Regime::Supercritical {
            let a = solve_malthusian(&at(0), &s).unwrap().nu;
            let b = solve_malthusian(&at(shift), &s).unwrap().nu;
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a), "{} vs {}", a, b);
        }
    }

    #[test]
    fn simulation_is_reproducible_and_conserves_particles(seed in any::<u64>(), alpha in 0.1f64..0.7) {
        let m = nn_weighted(1, 1.0, &[1.0, 1.0]);
        let system = CatalyticSystem::new(m, vec![cat(vec![0], alpha)], vec![0]).unwrap();
        let a = run_cbrw(&system, 3.0, &[1.0, 3.0], Caps::default(), seed).unwrap();
        let b = run_cbrw(&system, 3.0, &[1.0, 3.0], Caps::default(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.population.len(), 2);
        for (snap, &n) in a.snapshots.iter().zip(&a.population) {
            prop_assert_eq!(snap.population(), n);
        }
        let e = a.events;
        prop_assert_eq!(a.population[1] + e.branchings, 1 + e.offspring);
        prop_assert!(a.local_time.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn configuration_round_trips(
        q in 0.1f64..10.0,
        alpha in 0.0f64..0.99,
        mean in 0.5f64..5.0,
        x in -20i64..20,
        horizon in 0.5f64..50.0,
        seed in any::<u64>(),
    ) {
        let text = format!(
            r#"{{"model": {{"dimension": 1, "q": {q}, "law": {{"kind": "nearest-neighbor"}}}},
                "catalysts": [{{"position": [{x}], "alpha": {alpha}, "offspring": {{"kind": "poisson", "mean": {mean}}}}}],
                "simulate": {{"horizon": {horizon}, "seed": {seed}}}}}"#
        );
        let cfg: RunConfig = parse_config_str(&text).unwrap();
        prop_assert_eq!(cfg.model.q, q);
        prop_assert_eq!(cfg.simulate.seed, seed);
        let back = parse_config_str(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
