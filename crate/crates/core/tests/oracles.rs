//! Independent oracles: a discrete-event estimator of the taboo transforms
//! and an ODE solution for the mean population.

use cbrw::lattice_walk::{JumpLaw, JumpModel};
use cbrw::malthus::{taboo_transforms, Catalyst, CatalyticSystem, OffspringLaw, SolverSettings};
use cbrw::simulate::{holding_time, many_to_one_estimate, replicate_rng, Caps, TestFunction};
use rand::Rng;

fn sym1() -> JumpModel {
    JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)])).unwrap()
}

fn catalyst(x: i64, alpha: f64) -> Catalyst {
    Catalyst {
        position: vec![x],
        alpha,
        offspring: OffspringLaw::Deterministic(2),
    }
}

/// `E[exp(-lambda tau); first catalyst hit after leaving w_i is w_j]`, with
/// `tau` counted from the exit jump, by direct simulation of the walk.
fn taboo_monte_carlo(cats: &[i64], i: usize, lambda: f64, paths: u64, seed: u64) -> Vec<(f64, f64)> {
    let n = cats.len();
    let mut sums = vec![(0.0f64, 0.0f64); n];
    let mut rng = replicate_rng(seed, 0, 9);
    // exp(-lambda t) < 1e-14 beyond this time.
    let t_max = 14.0 * std::f64::consts::LN_10 / lambda;
    for _ in 0..paths {
        let step = |rng: &mut cbrw::simulate::SimRng| if rng.random::<bool>() { 1 } else { -1 };
        let mut x = cats[i] + step(&mut rng);
        let mut t = 0.0;
        loop {
            if let Some(j) = cats.iter().position(|&c| c == x) {
                let w = (-lambda * t).exp();
                sums[j].0 += w;
                sums[j].1 += w * w;
                break;
            }
            t += holding_time(&mut rng, 1.0);
            if t > t_max {
                break;
            }
            x += step(&mut rng);
        }
    }
    sums.iter()
        .map(|&(s, s2)| {
            let mean = s / paths as f64;
            let var = s2 / paths as f64 - mean * mean;
            (mean, (var / paths as f64).sqrt())
        })
        .collect()
}

#[test]
fn taboo_transforms_match_discrete_event_estimator() {
    let cats = [0, 1];
    let system = CatalyticSystem::new(
        sym1(),
        vec![catalyst(0, 0.5), catalyst(1, 0.5)],
        vec![0],
    )
    .unwrap();
    let settings = SolverSettings::default();
    for lambda in [0.3, 1.0] {
        let f = taboo_transforms(&system, lambda, &settings).unwrap();
        for i in 0..2 {
            let mc = taboo_monte_carlo(&cats, i, lambda, 1_000_000, 11 + i as u64);
            for j in 0..2 {
                let (mean, se) = mc[j];
                let exact = f[(i, j)];
                assert!(
                    (exact - mean).abs() < 3.0 * se.max(1e-12),
                    "lambda {lambda} F[{i}][{j}] = {exact}, Monte Carlo {mean} +- {se}"
                );
            }
        }
    }
}

/// `E_0 mu(t)` from `u' = (Q + V) u`, `V = alpha beta (m - 1)` at the origin,
/// on `[-l, l]` with absorbing ends far enough out to be invisible.
fn mean_population_ode(t: f64, rate: f64, l: usize) -> f64 {
    let n = 2 * l + 1;
    let apply = |u: &[f64], out: &mut [f64]| {
        for k in 0..n {
            let left = if k > 0 { u[k - 1] } else { 0.0 };
            let right = if k + 1 < n { u[k + 1] } else { 0.0 };
            out[k] = 0.5 * (left + right) - u[k] + if k == l { rate * u[k] } else { 0.0 };
        }
    };
    let mut u = vec![1.0; n];
    let steps = 20_000;
    let h = t / steps as f64;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        apply(&u, &mut k1);
        for k in 0..n {
            tmp[k] = u[k] + 0.5 * h * k1[k];
        }
        apply(&tmp, &mut k2);
        for k in 0..n {
            tmp[k] = u[k] + 0.5 * h * k2[k];
        }
        apply(&tmp, &mut k3);
        for k in 0..n {
            tmp[k] = u[k] + h * k3[k];
        }
        apply(&tmp, &mut k4);
        for k in 0..n {
            u[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
    }
    u[l]
}

#[test]
fn mean_population_matches_ode() {
    let exact = mean_population_ode(5.0, 1.0, 60);
    assert!((exact - 13.237003).abs() < 1e-5, "{exact}");
    let system = CatalyticSystem::new(sym1(), vec![catalyst(0, 0.5)], vec![0]).unwrap();
    let m = many_to_one_estimate(&system, 5.0, &TestFunction::One, 40_000, 77, Caps::default()).unwrap();
    assert!((m.lhs_mean - exact).abs() < 3.0 * m.lhs_se, "{m:?} vs {exact}");
    assert!((m.rhs_mean - exact).abs() < 3.0 * m.rhs_se, "{m:?} vs {exact}");
}

#[test]
fn half_space_many_to_one_agrees() {
    let system = CatalyticSystem::new(sym1(), vec![catalyst(0, 0.5)], vec![0]).unwrap();
    let g = TestFunction::HalfSpace {
        normal: vec![1.0],
        offset: 1.0,
    };
    let m = many_to_one_estimate(&system, 3.0, &g, 40_000, 5, Caps::default()).unwrap();
    assert!(m.z_score.abs() < 3.0, "{m:?}");
    assert!(m.lhs_mean > 0.0 && m.lhs_mean < 13.0);
}
