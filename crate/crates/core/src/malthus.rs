//! Catalytic system, the matrix `D(lambda)` and the Malthusian parameter.
//!
//! `d_ij(lambda) = delta_ij alpha_i m_i G*_i(lambda) + (1 - alpha_i) G*_i(lambda) F_ij(lambda)`
//! with `G*_i = beta_i / (beta_i + lambda)` and `F_ij` the Laplace transform
//! of the time from leaving `w_i` to the first hit of the catalyst set, on
//! the event that the hit is at `w_j`. The `F` matrix comes from the Green
//! matrix at the catalysts by first-entrance decomposition:
//! `F = ((lambda + q) I - G^{-1}) / q`.

use serde::Serialize;
use thiserror::Error;

use crate::lattice_walk::JumpModel;
use crate::linalg::Matrix;
use crate::resolvent::{
    green_differences, green_matrix, green_origin, green_values_at_zero, GreenError, Quadrature,
};
use crate::scalar::Real;

/// Largest catalyst set accepted.
pub const MAX_CATALYSTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MalthusError {
    #[error("invalid catalytic system: {0}")]
    InvalidSystem(String),
    #[error("Green matrix at the catalysts is ill-conditioned (condition number {condition:.3e})")]
    IllConditionedGreenMatrix { condition: f64 },
    #[error("power iteration did not converge after {iterations} iterations (gap {residual:.3e})")]
    NotConverged { residual: f64, iterations: usize },
    #[error("system is not supercritical: rho(D(0)) = {rho_at_zero}")]
    NotSupercritical { rho_at_zero: f64 },
    #[error("could not bracket the root of rho(D(lambda)) = 1: {0}")]
    BracketFailure(String),
    #[error("solution check failed: {0}")]
    InvariantViolated(String),
    #[error(transparent)]
    Green(#[from] GreenError),
}

/// Offspring count law `xi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OffspringLaw<T = f64> {
    Deterministic(u64),
    /// 0 w.p. `p0`, 2 otherwise.
    Binary { p0: T },
    /// Failures before the first success, success probability `p`.
    Geometric { p: T },
    Poisson { mean: T },
}

impl<T: Real> OffspringLaw<T> {
    pub fn mean(&self) -> T {
        match self {
            Self::Deterministic(k) => T::from_u64(*k).expect("count representable"),
            Self::Binary { p0 } => T::lit(2.0) * (T::one() - *p0),
            Self::Geometric { p } => (T::one() - *p) / *p,
            Self::Poisson { mean } => *mean,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let ok = match self {
            Self::Deterministic(_) => true,
            Self::Binary { p0 } => *p0 >= T::zero() && *p0 <= T::one(),
            Self::Geometric { p } => *p > T::zero() && *p <= T::one(),
            Self::Poisson { mean } => *mean >= T::zero() && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("offspring law {self:?} has parameters out of range"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalyst<T = f64> {
    pub position: Vec<i64>,
    pub alpha: T,
    pub offspring: OffspringLaw<T>,
}

#[derive(Debug, Clone)]
pub struct CatalyticSystem<T = f64> {
    model: JumpModel<T>,
    catalysts: Vec<Catalyst<T>>,
    start: Vec<i64>,
}

impl<T: Real> CatalyticSystem<T> {
    pub fn new(
        model: JumpModel<T>,
        catalysts: Vec<Catalyst<T>>,
        start: Vec<i64>,
    ) -> Result<Self, MalthusError> {
        let d = model.dimension();
        let bad = |msg: String| Err(MalthusError::InvalidSystem(msg));
        if catalysts.is_empty() {
            return bad("at least one catalyst is required".into());
        }
        if catalysts.len() > MAX_CATALYSTS {
            return bad(format!("at most {MAX_CATALYSTS} catalysts are supported"));
        }
        if start.len() != d {
            return bad(format!("start {start:?} does not have dimension {d}"));
        }
        for (k, c) in catalysts.iter().enumerate() {
            if c.position.len() != d {
                return bad(format!("catalyst {k} position does not have dimension {d}"));
            }
            if !(c.alpha >= T::zero() && c.alpha < T::one()) {
                return bad(format!("catalyst {k}: alpha = {} must lie in [0, 1)", c.alpha));
            }
            c.offspring.validate().map_err(MalthusError::InvalidSystem)?;
            if catalysts[..k].iter().any(|o| o.position == c.position) {
                return bad(format!("catalyst position {:?} is repeated", c.position));
            }
        }
        Ok(Self {
            model,
            catalysts,
            start,
        })
    }

    pub fn model(&self) -> &JumpModel<T> {
        &self.model
    }

    pub fn catalysts(&self) -> &[Catalyst<T>] {
        &self.catalysts
    }

    pub fn start(&self) -> &[i64] {
        &self.start
    }

    pub fn len(&self) -> usize {
        self.catalysts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalysts.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec<i64>> {
        self.catalysts.iter().map(|c| c.position.clone()).collect()
    }

    /// `beta_k = q / (1 - alpha_k)`.
    pub fn beta(&self, k: usize) -> T {
        self.model.q() / (T::one() - self.catalysts[k].alpha)
    }

    pub fn mean_offspring(&self, k: usize) -> T {
        self.catalysts[k].offspring.mean()
    }

    /// Index of the catalyst at `x`, if any.
    pub fn catalyst_at(&self, x: &[i64]) -> Option<usize> {
        self.catalysts.iter().position(|c| c.position == x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings<T = f64> {
    /// Smallest positive `lambda` used where a `lambda -> 0` value is reported.
    pub lambda_min: T,
    /// Supercritical iff `rho(D(0)) > 1 + class_margin`.
    pub class_margin: T,
    /// Required `|rho(D(nu)) - 1|`.
    pub rho_tol: T,
    /// Bisection stops when the bracket is narrower than `bracket_tol (1 + nu)`.
    pub bracket_tol: T,
    pub perron_tol: T,
    pub perron_max_iter: usize,
    pub quadrature: Quadrature<T>,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            lambda_min: T::lit(1e-8),
            class_margin: T::lit(1e-6),
            rho_tol: T::lit(1e-9),
            bracket_tol: T::lit(1e-10),
            perron_tol: T::lit(1e-12),
            perron_max_iter: 100_000,
            quadrature: Quadrature::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Supercritical,
    NotSupercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification<T = f64> {
    pub regime: Regime,
    /// `rho(D(0))`, from the `lambda = 0` limit of the taboo transforms.
    pub rho_at_zero: T,
    /// `rho(D(lambda_min))`.
    pub rho_at_floor: T,
    pub lambda_min: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalthusSolution<T = f64> {
    pub nu: T,
    pub rho_at_floor: T,
    pub rho_at_zero: T,
    pub lambda_min: T,
    pub regime: Regime,
    /// Final bisection bracket.
    pub bracket: (T, T),
    /// Root-finding iterations (doublings plus bisection steps).
    pub iterations: usize,
    /// Half-width of the final bracket.
    pub est_error: T,
    pub rho_at_nu: T,
    /// `F(nu)`.
    pub taboo: Matrix<T>,
}

fn inverse_guarded<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>, MalthusError> {
    let inv = m.inverse().ok_or(MalthusError::IllConditionedGreenMatrix {
        condition: f64::INFINITY,
    })?;
    let condition = m.norm1() * inv.norm1();
    if !(condition < T::lit(1e12)) {
        return Err(MalthusError::IllConditionedGreenMatrix {
            condition: condition.to_f64_lossy(),
        });
    }
    Ok(inv)
}

/// `G_lambda^{-1}` at the catalysts, `lambda >= 0`. For recurrent walks the
/// Green matrix is split as `A + g 11^T` with `g = G_lambda(0,0)`, which
/// keeps the inverse accurate down to and including `lambda = 0`.
fn green_inverse<T: Real>(
    system: &CatalyticSystem<T>,
    lambda: T,
    quad: &Quadrature<T>,
) -> Result<Matrix<T>, MalthusError> {
    let model = system.model();
    let points = system.positions();
    let n = points.len();
    if !model.is_recurrent() {
        let g = if lambda > T::zero() {
            green_matrix(model, lambda, &points, quad)?.0
        } else {
            let disp = |i: usize, j: usize| -> Vec<i64> {
                points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect()
            };
            let all: Vec<Vec<i64>> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| disp(i, j)).collect();
            let vals = green_values_at_zero(model, &all, quad)?.values;
            Matrix::from_fn(n, n, |i, j| vals[i * n + j])
        };
        return inverse_guarded(&g);
    }
    let g = if lambda > T::zero() {
        Some(green_origin(model, lambda, &vec![0; model.dimension()], quad)?)
    } else {
        None
    };
    if n == 1 {
        return Ok(Matrix::from_fn(1, 1, |_, _| g.map_or(T::zero(), |g| T::one() / g)));
    }
    let disp = |i: usize, j: usize| -> Vec<i64> {
        points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect()
    };
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .collect();
    let diffs: Vec<Vec<i64>> = pairs.iter().map(|&(i, j)| disp(i, j)).collect();
    let vals = green_differences(model, lambda, &diffs, quad)?.values;
    let mut a = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        a[(i, j)] = v;
    }
    let a_inv = inverse_guarded(&a)?;
    let ones = vec![T::one(); n];
    let u = a_inv.mul_vec(&ones);
    let v: Vec<T> = (0..n).map(|j| (0..n).fold(T::zero(), |acc, i| acc + a_inv[(i, j)])).collect();
    let s = u.iter().fold(T::zero(), |acc, &x| acc + x);
    let (num, den) = match g {
        Some(g) => (g, T::one() + g * s),
        None => (T::one(), s),
    };
    if den.abs() <= T::epsilon() * T::lit(1e4) * (T::one() + num * s.abs()) {
        return Err(MalthusError::IllConditionedGreenMatrix {
            condition: f64::INFINITY,
        });
    }
    let c = num / den;
    Ok(Matrix::from_fn(n, n, |i, j| a_inv[(i, j)] - c * u[i] * v[j]))
}

/// `F_ij(lambda)`, `lambda >= 0`.
pub fn taboo_transforms<T: Real>(
    system: &CatalyticSystem<T>,
    lambda: T,
    settings: &SolverSettings<T>,
) -> Result<Matrix<T>, MalthusError> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(MalthusError::Green(GreenError::NonPositiveLambda(lambda.to_f64_lossy())));
    }
    let q = system.model().q();
    let g_inv = green_inverse(system, lambda, &settings.quadrature)?;
    let n = system.len();
    let diag = (lambda + q) / q;
    Ok(Matrix::from_fn(n, n, |i, j| {
        let delta = if i == j { diag } else { T::zero() };
        delta - g_inv[(i, j)] / q
    }))
}

/// `D(lambda)` from the taboo transforms at the same `lambda`.
pub fn build_d<T: Real>(system: &CatalyticSystem<T>, lambda: T, taboo: &Matrix<T>) -> Matrix<T> {
    let n = system.len();
    Matrix::from_fn(n, n, |i, j| {
        let beta = system.beta(i);
        let g_star = beta / (beta + lambda);
        let alpha = system.catalysts()[i].alpha;
        let branch = if i == j {
            alpha * system.mean_offspring(i) * g_star
        } else {
            T::zero()
        };
        branch + (T::one() - alpha) * g_star * taboo[(i, j)]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronRoot<T = f64> {
    pub value: T,
    pub iterations: usize,
    /// Final Collatz–Wielandt gap.
    pub gap: T,
}

/// Spectral radius of a nonnegative matrix.
pub fn perron_root<T: Real>(m: &Matrix<T>) -> Result<T, MalthusError> {
    perron_root_with(m, T::lit(1e-12), 100_000).map(|p| p.value)
}

/// Power iteration on `B = M + cI`, `c = max diagonal + 1`, accelerated by
/// squaring: step `k` tests `v = B^(2^k) 1` against the Collatz–Wielandt
/// bounds of `B`, so nearly equal leading eigenvalues cost `log` steps.
/// Stops when the bounds agree to `tol` relative.
pub fn perron_root_with<T: Real>(
    m: &Matrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<PerronRoot<T>, MalthusError> {
    assert!(m.is_square(), "Perron root of non-square matrix");
    let n = m.rows();
    let scale = m.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    if m.iter().any(|&x| x < -T::lit(1e-12) * scale.max(T::one()) || !x.is_finite()) {
        return Err(MalthusError::InvalidSystem("Perron root of a matrix with negative entries".into()));
    }
    let clean = m.map(|x| x.max(T::zero()));
    if n == 1 {
        return Ok(PerronRoot {
            value: clean[(0, 0)],
            iterations: 0,
            gap: T::zero(),
        });
    }
    let c = (0..n).fold(T::zero(), |a, i| a.max(clean[(i, i)])) + T::one();
    let mut b = clean;
    for i in 0..n {
        b[(i, i)] = b[(i, i)] + c;
    }
    let mut power = b.clone();
    let mut best_gap = T::infinity();
    let mut since_best = 0usize;
    let mut last = (T::zero(), T::infinity());
    for it in 1..=max_iter {
        let pv = power.mul_vec(&vec![T::one(); n]);
        let top = pv.iter().fold(T::zero(), |a, &x| a.max(x));
        let v: Vec<T> = pv.into_iter().map(|x| (x / top).max(T::min_positive_value())).collect();
        let w = b.mul_vec(&v);
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for (wi, vi) in w.iter().zip(&v) {
            let r = *wi / *vi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let gap = hi - lo;
        let rho = T::lit(0.5) * (lo + hi) - c;
        let floor = T::epsilon() * T::lit(8.0) * hi;
        if gap <= tol * rho.max(T::zero()) || gap <= floor {
            return Ok(PerronRoot {
                value: rho.max(T::zero()),
                iterations: it,
                gap,
            });
        }
        if gap < best_gap {
            best_gap = gap;
            since_best = 0;
        } else {
            since_best += 1;
            // Rounding-limited: the bounds no longer tighten.
            if since_best > 8 && gap <= T::lit(1e-9) * hi {
                return Ok(PerronRoot {
                    value: rho.max(T::zero()),
                    iterations: it,
                    gap,
                });
            }
            if since_best > 64 {
                return Err(MalthusError::NotConverged {
                    residual: gap.to_f64_lossy(),
                    iterations: it,
                });
            }
        }
        last = (rho, gap);
        power = square_normalized(&power);
    }
    Err(MalthusError::NotConverged {
        residual: last.1.to_f64_lossy(),
        iterations: max_iter,
    })
}

/// `A A` scaled to unit maximum entry.
fn square_normalized<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.rows();
    let sq = Matrix::from_fn(n, n, |i, j| (0..n).fold(T::zero(), |s, k| s + a[(i, k)] * a[(k, j)]));
    let top = sq.iter().fold(T::zero(), |m, &x| m.max(x));
    sq.map(|x| x / top)
}

/// `rho(D(lambda))`, `lambda >= 0`.
pub fn rho_of_lambda<T: Real>(
    system: &CatalyticSystem<T>,
    lambda: T,
    settings: &SolverSettings<T>,
) -> Result<T, MalthusError> {
    let taboo = taboo_transforms(system, lambda, settings)?;
    let d = build_d(system, lambda, &taboo);
    Ok(perron_root_with(&d, settings.perron_tol, settings.perron_max_iter)?.value)
}

pub fn classify<T: Real>(
    system: &CatalyticSystem<T>,
    settings: &SolverSettings<T>,
) -> Result<Classification<T>, MalthusError> {
    let rho_at_zero = rho_of_lambda(system, T::zero(), settings)?;
    let rho_at_floor = rho_of_lambda(system, settings.lambda_min, settings)?;
    let regime = if rho_at_zero > T::one() + settings.class_margin {
        Regime::Supercritical
    } else {
        Regime::NotSupercritical
    };
    Ok(Classification {
        regime,
        rho_at_zero,
        rho_at_floor,
        lambda_min: settings.lambda_min,
    })
}

/// Bisection for `rho(D(nu)) = 1` on `[0, lambda_hi]`.
pub fn solve_malthusian<T: Real>(
    system: &CatalyticSystem<T>,
    settings: &SolverSettings<T>,
) -> Result<MalthusSolution<T>, MalthusError> {
    let class = classify(system, settings)?;
    if class.regime != Regime::Supercritical {
        return Err(MalthusError::NotSupercritical {
            rho_at_zero: class.rho_at_zero.to_f64_lossy(),
        });
    }
    let rho = |l: T| rho_of_lambda(system, l, settings);
    let mut iterations = 0;
    let mut lo = T::zero();
    let mut hi = T::one();
    while rho(hi)? >= T::one() {
        lo = hi;
        hi = hi * T::lit(2.0);
        iterations += 1;
        if hi > T::lit(1e12) {
            return Err(MalthusError::BracketFailure(format!(
                "rho(D(lambda)) >= 1 up to lambda = {lo}"
            )));
        }
    }
    let half = T::lit(0.5);
    let mut rho_mid = T::nan();
    for _ in 0..400 {
        let mid = half * (lo + hi);
        let narrow = hi - lo < settings.bracket_tol * (T::one() + mid);
        if narrow && (rho_mid - T::one()).abs() < settings.rho_tol {
            break;
        }
        if mid <= lo || mid >= hi {
            break;
        }
        rho_mid = rho(mid)?;
        iterations += 1;
        if rho_mid > T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = half * (lo + hi);
    let taboo = taboo_transforms(system, nu, settings)?;
    let rho_at_nu = perron_root_with(&build_d(system, nu, &taboo), settings.perron_tol, settings.perron_max_iter)?.value;
    if !((rho_at_nu - T::one()).abs() < settings.rho_tol) {
        return Err(MalthusError::InvariantViolated(format!(
            "|rho(D(nu)) - 1| = {:e} at nu = {nu}",
            (rho_at_nu - T::one()).abs()
        )));
    }
    if !(nu > T::zero()) {
        return Err(MalthusError::InvariantViolated(format!("nu = {nu} is not positive")));
    }
    if system.len() == 1 {
        let bound = system.catalysts()[0].alpha * system.beta(0) * (system.mean_offspring(0) - T::one());
        if !(nu + system.model().q() > bound) {
            return Err(MalthusError::InvariantViolated(format!(
                "nu + q = {} does not exceed alpha beta (m - 1) = {bound}",
                nu + system.model().q()
            )));
        }
    }
    Ok(MalthusSolution {
        nu,
        rho_at_floor: class.rho_at_floor,
        rho_at_zero: class.rho_at_zero,
        lambda_min: class.lambda_min,
        regime: class.regime,
        bracket: (lo, hi),
        iterations,
        est_error: half * (hi - lo),
        rho_at_nu,
        taboo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::JumpLaw;

    fn sym1() -> JumpModel {
        JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)])).unwrap()
    }

    fn nearest_neighbour(d: usize) -> JumpModel {
        let mut atoms = Vec::new();
        for k in 0..d {
            for s in [1, -1] {
                let mut y = vec![0; d];
                y[k] = s;
                atoms.push((y, 1.0 / (2 * d) as f64));
            }
        }
        JumpModel::new(d, 1.0, JumpLaw::FiniteSupport(atoms)).unwrap()
    }

    fn single(model: JumpModel, alpha: f64, law: OffspringLaw) -> CatalyticSystem {
        let d = model.dimension();
        CatalyticSystem::new(
            model,
            vec![Catalyst {
                position: vec![0; d],
                alpha,
                offspring: law,
            }],
            vec![0; d],
        )
        .unwrap()
    }

    #[test]
    fn perron_examples() {
        let id = Matrix::<f64>::identity(2);
        assert!((perron_root(&id).unwrap() - 1.0).abs() < 1e-12);
        let p = Matrix::from_rows(&[vec![0.0f64, 1.0], vec![1.0, 0.0]]);
        assert!((perron_root(&p).unwrap() - 1.0).abs() < 1e-12);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let expected = (5.0 + 33f64.sqrt()) / 2.0;
        assert!(((perron_root(&m).unwrap() - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn perron_nearly_decoupled() {
        // Leading eigenvalues 1e-7 apart; plain power iteration needs ~1e8 steps.
        let (a, d, e) = (1.0f64, 1.0 - 1e-7, 1e-9);
        let m = Matrix::from_rows(&[vec![a, e], vec![e, d]]);
        let expected = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + e * e).sqrt();
        let p = perron_root_with(&m, 1e-12, 100_000).unwrap();
        assert!((p.value - expected).abs() < 1e-12, "{p:?} vs {expected}");
        assert!(p.iterations < 100, "{p:?}");
    }

    #[test]
    fn taboo_single_catalyst_closed_form() {
        let sys = single(sym1(), 0.5, OffspringLaw::Deterministic(2));
        let s = SolverSettings::default();
        let l = 2f64.sqrt() - 1.0;
        let f = taboo_transforms(&sys, l, &s).unwrap();
        assert!((f[(0, 0)] - l).abs() < 1e-10);
        let f0 = taboo_transforms(&sys, 0.0, &s).unwrap();
        assert_eq!(f0[(0, 0)], 1.0);
        let mut prev = 1.0;
        for &l in &[0.5, 1.0, 4.0, 16.0, 64.0] {
            let f = taboo_transforms(&sys, l, &s).unwrap()[(0, 0)];
            assert!(f < prev && f > 0.0);
            prev = f;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn taboo_two_catalysts_at_zero() {
        let sys = CatalyticSystem::new(
            sym1(),
            vec![
                Catalyst { position: vec![0], alpha: 0.5, offspring: OffspringLaw::Deterministic(2) },
                Catalyst { position: vec![1], alpha: 0.5, offspring: OffspringLaw::Deterministic(2) },
            ],
            vec![0],
        )
        .unwrap();
        let s = SolverSettings::default();
        let f = taboo_transforms(&sys, 0.0, &s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((f[(i, j)] - 0.5).abs() < 1e-10, "{f:?}");
            }
        }
        // lambda > 0: F_{0->1} = 1/2 (first jump right), F_{0->0} = z/2.
        let l = 0.7;
        let f = taboo_transforms(&sys, l, &s).unwrap();
        let z = l + 1.0 - (l * l + 2.0 * l).sqrt();
        assert!((f[(0, 1)] - 0.5).abs() < 1e-10);
        assert!((f[(0, 0)] - z / 2.0).abs() < 1e-10);
    }

    #[test]
    fn build_d_examples() {
        let sys = single(sym1(), 0.5, OffspringLaw::Deterministic(2));
        let s = SolverSettings::default();
        let l = 2f64.sqrt() - 1.0;
        let d = build_d(&sys, l, &taboo_transforms(&sys, l, &s).unwrap());
        assert!((d[(0, 0)] - 1.0).abs() < 1e-9);
        let big = build_d(&sys, 1e6, &taboo_transforms(&sys, 1e6, &s).unwrap());
        assert!(big[(0, 0)] < 1e-5);
        let mean_one = single(sym1(), 0.3, OffspringLaw::Deterministic(1));
        let d = build_d(&mean_one, 1e-8, &taboo_transforms(&mean_one, 1e-8, &s).unwrap());
        assert!(d[(0, 0)] <= 1.0 && d[(0, 0)] > 0.999);
    }

    #[test]
    fn classify_examples() {
        let s = SolverSettings::default();
        let c = classify(&single(sym1(), 0.5, OffspringLaw::Deterministic(2)), &s).unwrap();
        assert_eq!(c.regime, Regime::Supercritical);
        assert!((c.rho_at_zero - 1.5).abs() < 1e-12);
        assert!((c.rho_at_floor - 1.5).abs() < 1e-3);
        let c = classify(&single(sym1(), 0.5, OffspringLaw::Deterministic(1)), &s).unwrap();
        assert_eq!(c.regime, Regime::NotSupercritical);
        let c = classify(&single(nearest_neighbour(2), 0.4, OffspringLaw::Deterministic(1)), &s).unwrap();
        assert_eq!(c.regime, Regime::NotSupercritical);
    }

    #[test]
    fn solve_closed_form() {
        let s = SolverSettings::default();
        let sol = solve_malthusian(&single(sym1(), 0.5, OffspringLaw::Deterministic(2)), &s).unwrap();
        assert!((sol.nu - (2f64.sqrt() - 1.0)).abs() < 1e-8);
        assert!((sol.rho_at_nu - 1.0).abs() < 1e-9);
        assert!((sol.taboo[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn solve_near_critical() {
        let s = SolverSettings::default();
        let sol = solve_malthusian(&single(sym1(), 0.5, OffspringLaw::Poisson { mean: 1.0001 }), &s).unwrap();
        // rho(D(lambda)) ~ 1 + 5e-5 - sqrt(lambda / 2) near 0.
        assert!(sol.nu > 0.0 && sol.nu < 1e-8, "nu = {}", sol.nu);
        assert!((sol.nu - 5e-9).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_systems() {
        let c = |alpha: f64, pos: Vec<Vec<i64>>| {
            CatalyticSystem::new(
                sym1(),
                pos.into_iter()
                    .map(|p| Catalyst { position: p, alpha, offspring: OffspringLaw::Deterministic(2) })
                    .collect(),
                vec![0],
            )
        };
        assert!(c(1.0, vec![vec![0]]).is_err());
        assert!(c(-0.1, vec![vec![0]]).is_err());
        assert!(c(0.5, vec![vec![0], vec![0]]).is_err());
        assert!(c(0.5, vec![]).is_err());
        assert!(c(0.5, vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn not_supercritical_is_an_error() {
        let s = SolverSettings::default();
        let r = solve_malthusian(&single(sym1(), 0.5, OffspringLaw::Binary { p0: 0.5 }), &s);
        assert!(matches!(r, Err(MalthusError::NotSupercritical { .. })));
    }
}
