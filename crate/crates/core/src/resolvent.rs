//! Lattice Green function `G_lambda(0, x) = int_0^inf e^{-lambda t} P_0(S(t) = x) dt`.
//!
//! The Fourier representation is
//!
//! ```text
//! G_lambda(0, x) = (2 pi)^-d  int_{[-pi,pi]^d}  e^{-<s,x>} e^{-i<theta,x>} / (lambda - H(s + i theta)) d theta
//! ```
//!
//! for any real `s` with `H(t s) <= 0` on `[0, 1]`; we shift by the minimiser
//! `s*` of `H`. After the shift the integrand is periodic and analytic, and
//! the only place it can be large is a neighbourhood of `theta = 0` when
//! `lambda` is small and `H(s*) = 0`. The integrand is split with the radial
//! cut-off `chi(r) = erfc((r - 1.55) / 0.19) / 2`, which is 1 and 0 to within
//! 1e-29 at `r = 0` and `r = pi`:
//!
//! * `(1 - chi) f` vanishes near the origin and is periodic and smooth, so
//!   the tensor trapezoid rule on `N^d` nodes converges geometrically;
//! * `chi f` lives in the ball `|theta| < pi` and is integrated in polar
//!   coordinates with radius `e^u`, trapezoid in `u`, which resolves the
//!   `lambda`-scale peak at the origin at logarithmic cost.
//!
//! Both parts are refined by doubling until successive values agree.

use std::collections::BTreeSet;

use num_complex::Complex;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::lattice_walk::{expm1_complex, JumpLaw, JumpModel, Marginal, WalkError};
use crate::linalg::Matrix;
use crate::scalar::{dot_lattice, pairwise_sum, Real};

const CUT_CENTER: f64 = 1.55;
const CUT_WIDTH: f64 = 0.19;
/// `chi` is taken as exactly 1 below and 0 above these radii.
const CUT_INNER: f64 = CUT_CENTER - 8.0 * CUT_WIDTH;
const CUT_OUTER: f64 = CUT_CENTER + 8.0 * CUT_WIDTH;
const RADIAL_CAP: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("quadrature did not converge: estimated error {est_error:.3e} at grid size {grid_size}")]
    QuadratureNotConverged { est_error: f64, grid_size: usize },
    #[error("imaginary residue {residue:.3e} exceeds tolerance")]
    ImaginaryResidue { residue: f64 },
    #[error("resolvent quadrature supports dimensions 1 to 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("the walk is recurrent: G_0 is infinite")]
    Recurrent,
    #[error(transparent)]
    Walk(#[from] WalkError),
}

/// Tolerance and grid limits of the resolvent quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature<T = f64> {
    /// Relative tolerance: absolute error target is `tol * max(1, |G|)`.
    pub tol: T,
    /// Initial periodic grid per dimension for `d <= 2`.
    pub start_grid: usize,
    /// Initial periodic grid per dimension for `d = 3`.
    pub start_grid_3d: usize,
    /// Grid cap per dimension for `d <= 2`.
    pub max_grid: usize,
    /// Grid cap per dimension for `d = 3`.
    pub max_grid_3d: usize,
}

impl<T: Real> Default for Quadrature<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            start_grid: 256,
            start_grid_3d: 64,
            max_grid: 8192,
            max_grid_3d: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenEvaluation<T = f64> {
    pub lambda: T,
    pub points: Vec<Vec<i64>>,
    pub values: Vec<T>,
    /// Periodic grid size per dimension of the final pass.
    pub grid_size: usize,
    /// Radial and angular node counts of the polar part.
    pub core_nodes: (usize, usize),
    pub est_error: T,
}

/// `G_lambda(0, x)`.
pub fn green_origin<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    x: &[i64],
    quad: &Quadrature<T>,
) -> Result<T, GreenError> {
    Ok(green_values(model, lambda, &[x.to_vec()], quad)?.values[0])
}

/// Matrix with entries `G_lambda(0, points[j] - points[i])` and the
/// evaluation record of the distinct displacements.
pub fn green_matrix<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    quad: &Quadrature<T>,
) -> Result<(Matrix<T>, GreenEvaluation<T>), GreenError> {
    let disp = |i: usize, j: usize| -> Vec<i64> {
        points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect()
    };
    let n = points.len();
    let mut set = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            set.insert(disp(i, j));
        }
    }
    let unique: Vec<Vec<i64>> = set.into_iter().collect();
    let eval = green_values(model, lambda, &unique, quad)?;
    let lookup = |x: &Vec<i64>| {
        let k = unique.binary_search(x).expect("displacement present");
        eval.values[k]
    };
    let m = Matrix::from_fn(n, n, |i, j| lookup(&disp(i, j)));
    Ok((m, eval))
}

/// `G_lambda(0, x)` for every `x` in `points`, sharing one quadrature.
pub fn green_values<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    quad: &Quadrature<T>,
) -> Result<GreenEvaluation<T>, GreenError> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(GreenError::NonPositiveLambda(lambda.to_f64_lossy()));
    }
    evaluate(model, lambda, points, false, quad)
}

/// `G_0(0, x)`, the expected time spent at `x`; finite only for transient
/// walks.
pub fn green_values_at_zero<T: Real>(
    model: &JumpModel<T>,
    points: &[Vec<i64>],
    quad: &Quadrature<T>,
) -> Result<GreenEvaluation<T>, GreenError> {
    if model.is_recurrent() {
        return Err(GreenError::Recurrent);
    }
    evaluate(model, T::zero(), points, false, quad)
}

/// `G_lambda(0, x) - G_lambda(0, 0)` for `lambda >= 0`. The difference has a
/// finite limit at `lambda = 0` also for recurrent walks (minus the
/// potential kernel).
pub fn green_differences<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    quad: &Quadrature<T>,
) -> Result<GreenEvaluation<T>, GreenError> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(GreenError::NonPositiveLambda(lambda.to_f64_lossy()));
    }
    evaluate(model, lambda, points, true, quad)
}

fn evaluate<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    subtract_origin: bool,
    quad: &Quadrature<T>,
) -> Result<GreenEvaluation<T>, GreenError> {
    let d = model.dimension();
    if d == 0 || d > 3 {
        return Err(GreenError::UnsupportedDimension(d));
    }
    for p in points {
        assert_eq!(p.len(), d, "point has wrong dimension");
    }
    let tilt = model.tilt().to_vec();
    let two_pi = T::TAU();
    let core_norm = two_pi.powi(-(d as i32));
    let noise = T::epsilon() * T::lit(256.0);

    // Polar part around the origin.
    // Below u_min the polar integrand times the Jacobian e^{du} is negligible.
    let u_min = if lambda > T::zero() && !subtract_origin {
        (T::lit(1e-3) * quad.tol.max(T::epsilon()) * lambda.min(T::one())).ln() / T::from_usize_lossy(d)
    } else {
        T::lit(-40.0)
    };
    let u_max = T::lit(CUT_OUTER).ln();
    let (ang_start, ang_cap) = match d {
        1 => (1, 1),
        2 => (16, 4096),
        _ => (8, 256),
    };
    let to_values = |raw: &[Complex<T>], norm: T| -> Vec<Complex<T>> {
        raw.iter().map(|v| *v * norm).collect()
    };
    let max_diff = |a: &[Complex<T>], b: &[Complex<T>]| {
        a.iter().zip(b).fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()))
    };
    let magnitude = |v: &[Complex<T>]| v.iter().fold(T::one(), |m, x| m.max(x.re.abs()));

    let mut n_u = 256;
    let mut n_a = ang_start;
    let mut core = to_values(&core_sum(model, lambda, points, subtract_origin, &tilt, u_min, u_max, n_u, n_a), core_norm);
    let mut err_u;
    loop {
        let fine = to_values(&core_sum(model, lambda, points, subtract_origin, &tilt, u_min, u_max, 2 * n_u, n_a), core_norm);
        err_u = max_diff(&fine, &core);
        core = fine;
        n_u *= 2;
        let tol_abs = quad.tol * magnitude(&core) * T::lit(0.25);
        if err_u <= tol_abs.max(noise * magnitude(&core)) {
            break;
        }
        if n_u >= RADIAL_CAP {
            return Err(GreenError::QuadratureNotConverged {
                est_error: err_u.to_f64_lossy(),
                grid_size: n_u,
            });
        }
    }
    let mut err_a = T::zero();
    if d > 1 {
        loop {
            let fine = to_values(&core_sum(model, lambda, points, subtract_origin, &tilt, u_min, u_max, n_u, 2 * n_a), core_norm);
            err_a = max_diff(&fine, &core);
            core = fine;
            n_a *= 2;
            let tol_abs = quad.tol * magnitude(&core) * T::lit(0.25);
            if err_a <= tol_abs.max(noise * magnitude(&core)) {
                break;
            }
            if n_a >= ang_cap {
                return Err(GreenError::QuadratureNotConverged {
                    est_error: err_a.to_f64_lossy(),
                    grid_size: n_a,
                });
            }
        }
    }

    // Periodic part.
    let (mut n, cap) = if d == 3 {
        (quad.start_grid_3d, quad.max_grid_3d)
    } else {
        (quad.start_grid, quad.max_grid)
    };
    let far_norm = |n: usize| T::from_usize_lossy(n).powi(-(d as i32));
    let mut far = to_values(&far_sum(model, lambda, points, subtract_origin, &tilt, n), far_norm(n));
    let err_far;
    loop {
        let pooled: Vec<Complex<T>> = core.iter().zip(&far).map(|(a, b)| *a + *b).collect();
        let tol_abs = quad.tol * magnitude(&pooled) * T::lit(0.5);
        let n2 = 2 * n;
        if n2 > cap {
            return Err(GreenError::QuadratureNotConverged {
                est_error: T::infinity().to_f64_lossy(),
                grid_size: n,
            });
        }
        let fine = to_values(&far_sum(model, lambda, points, subtract_origin, &tilt, n2), far_norm(n2));
        let e = max_diff(&fine, &far);
        far = fine;
        n = n2;
        if e <= tol_abs.max(noise * magnitude(&pooled)) {
            err_far = e;
            break;
        }
        if 2 * n > cap {
            return Err(GreenError::QuadratureNotConverged {
                est_error: e.to_f64_lossy(),
                grid_size: n,
            });
        }
    }

    let total: Vec<Complex<T>> = core.iter().zip(&far).map(|(a, b)| *a + *b).collect();
    let est_error = err_u + err_a + err_far;
    let mag = magnitude(&total);
    let im_tol = (T::lit(1e-12) * mag).max(est_error * T::lit(10.0)).max(noise * mag);
    let residue = total.iter().fold(T::zero(), |m, v| m.max(v.im.abs()));
    if residue > im_tol {
        return Err(GreenError::ImaginaryResidue {
            residue: residue.to_f64_lossy(),
        });
    }
    Ok(GreenEvaluation {
        lambda,
        points: points.to_vec(),
        values: total.iter().map(|v| v.re).collect(),
        grid_size: n,
        core_nodes: (n_u, n_a),
        est_error,
    })
}

/// Radial cut-off `chi`.
fn cutoff<T: Real>(r: T) -> T {
    let r = r.to_f64_lossy();
    if r <= CUT_INNER {
        return T::one();
    }
    if r >= CUT_OUTER {
        return T::zero();
    }
    T::lit(0.5 * erfc((r - CUT_CENTER) / CUT_WIDTH))
}

/// Angular nodes and weights on the unit sphere of dimension `d - 1`.
fn sphere_rule<T: Real>(d: usize, n: usize) -> Vec<(Vec<T>, T)> {
    match d {
        1 => vec![(vec![T::one()], T::one()), (vec![-T::one()], T::one())],
        2 => {
            let w = T::TAU() / T::from_usize_lossy(n);
            (0..n)
                .map(|k| {
                    let phi = w * T::from_usize_lossy(k);
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect()
        }
        _ => {
            let (nodes, weights) = gauss_legendre(n);
            let m = 2 * n;
            let w_az = T::TAU() / T::from_usize_lossy(m);
            let mut out = Vec::with_capacity(n * m);
            for (c, wc) in nodes.iter().zip(&weights) {
                let c = T::lit(*c);
                let s = (T::one() - c * c).max(T::zero()).sqrt();
                for k in 0..m {
                    let phi = w_az * T::from_usize_lossy(k);
                    out.push((vec![s * phi.cos(), s * phi.sin(), c], T::lit(*wc) * w_az));
                }
            }
            out
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[allow(clippy::too_many_arguments)]
fn core_sum<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    subtract_origin: bool,
    tilt: &[T],
    u_min: T,
    u_max: T,
    n_u: usize,
    n_a: usize,
) -> Vec<Complex<T>> {
    let d = model.dimension();
    let q = model.q();
    let h = (u_max - u_min) / T::from_usize_lossy(n_u);
    let dt = T::from_usize_lossy(d);
    let rule = sphere_rule::<T>(d, n_a);
    let shifts: Vec<T> = points.iter().map(|x| -dot_lattice(tilt, x)).collect();
    let mut z = vec![Complex::new(T::zero(), T::zero()); d];
    let mut per_direction: Vec<Vec<Complex<T>>> = vec![Vec::with_capacity(rule.len()); points.len()];
    let mut acc = vec![Complex::new(T::zero(), T::zero()); points.len()];
    for (omega, w_ang) in &rule {
        acc.iter_mut().for_each(|a| *a = Complex::new(T::zero(), T::zero()));
        for i in 0..=n_u {
            let u = u_min + h * T::from_usize_lossy(i);
            let r = u.exp();
            let chi = cutoff(r);
            if chi == T::zero() {
                continue;
            }
            for k in 0..d {
                z[k] = Complex::new(tilt[k], r * omega[k]);
            }
            let den = Complex::new(lambda, T::zero()) - model.mgf_minus_one_complex(&z) * q;
            let weight = chi * (u * dt).exp() * h * *w_ang;
            let base = Complex::new(weight, T::zero()) / den;
            for ((a, x), &shift) in acc.iter_mut().zip(points).zip(&shifts) {
                let w = Complex::new(shift, -r * dot_lattice(omega, x));
                let factor = if subtract_origin { expm1_complex(w) } else { w.exp() };
                *a = *a + base * factor;
            }
        }
        for (dst, a) in per_direction.iter_mut().zip(&acc) {
            dst.push(*a);
        }
    }
    per_direction.iter().map(|v| pairwise_sum(v)).collect()
}

/// Per-axis tables of the shifted moment generating function on the grid.
enum LawTables<T> {
    /// `sum_k w_k (m_k(z_k) - 1)`.
    Mixture(Vec<Vec<Complex<T>>>),
    /// `prod_k m_k(z_k) - 1`.
    Product(Vec<Vec<Complex<T>>>),
    /// `sum_a p_a prod_k e^{z_k y_ak} - 1`; `tables[k][v]` indexed by the
    /// distinct values `values[k]` on axis `k`.
    Finite {
        probs: Vec<T>,
        index: Vec<Vec<usize>>,
        tables: Vec<Vec<Vec<Complex<T>>>>,
    },
}

fn marginal_table<T: Real>(marg: &Marginal<T>, s: T, theta: &[T]) -> Vec<Complex<T>> {
    theta.iter().map(|&t| marg.mgf_complex(Complex::new(s, t))).collect()
}

impl<T: Real> LawTables<T> {
    fn build(model: &JumpModel<T>, tilt: &[T], theta: &[T]) -> Self {
        match model.law() {
            JumpLaw::AxisMixture(axes) => Self::Mixture(
                axes.iter()
                    .zip(tilt)
                    .map(|((w, marg), &s)| {
                        marginal_table(marg, s, theta)
                            .into_iter()
                            .map(|m| (m - T::one()) * *w)
                            .collect()
                    })
                    .collect(),
            ),
            JumpLaw::ProductMarginals(margs) => Self::Product(
                margs
                    .iter()
                    .zip(tilt)
                    .map(|(marg, &s)| marginal_table(marg, s, theta))
                    .collect(),
            ),
            JumpLaw::FiniteSupport(atoms) => {
                let d = model.dimension();
                let mut values: Vec<Vec<i64>> = vec![Vec::new(); d];
                for (y, _) in atoms {
                    for k in 0..d {
                        if !values[k].contains(&y[k]) {
                            values[k].push(y[k]);
                        }
                    }
                }
                let index = atoms
                    .iter()
                    .map(|(y, _)| (0..d).map(|k| values[k].iter().position(|&v| v == y[k]).unwrap()).collect())
                    .collect();
                let tables = (0..d)
                    .map(|k| {
                        values[k]
                            .iter()
                            .map(|&v| {
                                let vf = T::from_i64_lossy(v);
                                theta
                                    .iter()
                                    .map(|&t| Complex::new(tilt[k] * vf, t * vf).exp())
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                Self::Finite {
                    probs: atoms.iter().map(|a| a.1).collect(),
                    index,
                    tables,
                }
            }
        }
    }
}

fn far_sum<T: Real>(
    model: &JumpModel<T>,
    lambda: T,
    points: &[Vec<i64>],
    subtract_origin: bool,
    tilt: &[T],
    n: usize,
) -> Vec<Complex<T>> {
    let d = model.dimension();
    let q = model.q();
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let step = T::TAU() / T::from_usize_lossy(n);
    let theta: Vec<T> = (0..n).map(|j| -T::PI() + step * T::from_usize_lossy(j)).collect();
    let theta2: Vec<T> = theta.iter().map(|&t| t * t).collect();
    let tables = LawTables::build(model, tilt, &theta);
    // phases[p][k][j] = e^{-i theta_j x_k}
    let phases: Vec<Vec<Vec<Complex<T>>>> = points
        .iter()
        .map(|x| {
            (0..d)
                .map(|k| {
                    let xf = T::from_i64_lossy(x[k]);
                    theta.iter().map(|&t| Complex::new((t * xf).cos(), -(t * xf).sin())).collect()
                })
                .collect()
        })
        .collect();
    let np = points.len();
    let shifts: Vec<Complex<T>> = points
        .iter()
        .map(|x| Complex::new((-dot_lattice(tilt, x)).exp(), T::zero()))
        .collect();
    let minus = if subtract_origin { one } else { zero };
    let lambda_c = Complex::new(lambda, T::zero());
    let rows = n.pow((d - 1) as u32);
    let mut row_sums: Vec<Vec<Complex<T>>> = vec![Vec::with_capacity(rows); np];
    let mut idx = vec![0usize; d];
    let mut outer_phase = vec![one; np];
    let mut acc = vec![zero; np];
    let n_atoms = match &tables {
        LawTables::Finite { probs, .. } => probs.len(),
        _ => 0,
    };
    let mut partial = vec![zero; n_atoms];
    let cut2 = T::lit(CUT_OUTER) * T::lit(CUT_OUTER);
    let inner2 = T::lit(CUT_INNER) * T::lit(CUT_INNER);
    let last = d - 1;
    for row in 0..rows {
        let mut rem = row;
        for k in (0..last).rev() {
            idx[k] = rem % n;
            rem /= n;
        }
        let outer_r2 = (0..last).fold(T::zero(), |a, k| a + theta2[idx[k]]);
        for (p, ph) in outer_phase.iter_mut().enumerate() {
            *ph = (0..last).fold(shifts[p], |a, k| a * phases[p][k][idx[k]]);
        }
        let outer_law = match &tables {
            LawTables::Mixture(t) => (0..last).fold(zero, |a, k| a + t[k][idx[k]]),
            LawTables::Product(t) => (0..last).fold(one, |a, k| a * t[k][idx[k]]),
            LawTables::Finite { index, tables, .. } => {
                for (a, pa) in partial.iter_mut().enumerate() {
                    *pa = (0..last).fold(one, |acc, k| acc * tables[k][index[a][k]][idx[k]]);
                }
                zero
            }
        };
        acc.iter_mut().for_each(|a| *a = zero);
        for j in 0..n {
            let r2 = outer_r2 + theta2[j];
            let w = if r2 >= cut2 {
                T::one()
            } else if r2 <= inner2 {
                continue;
            } else {
                T::one() - cutoff(r2.sqrt())
            };
            let e = match &tables {
                LawTables::Mixture(t) => outer_law + t[last][j],
                LawTables::Product(t) => outer_law * t[last][j] - one,
                LawTables::Finite { probs, index, tables } => {
                    let mut m = zero;
                    for a in 0..n_atoms {
                        m = m + partial[a] * tables[last][index[a][last]][j] * probs[a];
                    }
                    m - one
                }
            };
            let inv = Complex::new(w, T::zero()) / (lambda_c - e * q);
            for p in 0..np {
                acc[p] = acc[p] + inv * (outer_phase[p] * phases[p][last][j] - minus);
            }
        }
        for (dst, a) in row_sums.iter_mut().zip(&acc) {
            dst.push(*a);
        }
    }
    row_sums.iter().map(|v| pairwise_sum(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym1(q: f64) -> JumpModel {
        JumpModel::new(1, q, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)])).unwrap()
    }

    fn closed_1d(lambda: f64, q: f64) -> f64 {
        1.0 / (lambda * lambda + 2.0 * lambda * q).sqrt()
    }

    #[test]
    fn d1_closed_form() {
        let quad = Quadrature::default();
        for &q in &[1.0, 2.0] {
            for &l in &[0.1, 1.0, 5.0] {
                let g = green_origin(&sym1(q), l, &[0], &quad).unwrap();
                assert!((g - closed_1d(l, q)).abs() < 1e-10, "q={q} l={l} g={g}");
            }
        }
        let l = 2f64.sqrt() - 1.0;
        assert!((green_origin(&sym1(1.0), l, &[0], &quad).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn d1_off_diagonal() {
        let quad = Quadrature::default();
        let (m, _) = green_matrix(&sym1(1.0), 1.0, &[vec![0], vec![2]], &quad).unwrap();
        let z: f64 = 2.0 - 3f64.sqrt();
        let expected = z * z / 3f64.sqrt();
        assert!((m[(0, 1)] - expected).abs() < 1e-10);
        assert!((m[(0, 1)] - 0.0414519).abs() < 1e-7);
        assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn d1_small_lambda() {
        let quad = Quadrature::default();
        let g = green_origin(&sym1(1.0), 1e-8, &[0], &quad).unwrap();
        let exact = closed_1d(1e-8, 1.0);
        assert!(((g - exact) / exact).abs() < 1e-9, "g={g} exact={exact}");
    }

    #[test]
    fn single_point_matrix() {
        let quad = Quadrature::default();
        let (m, _) = green_matrix(&sym1(1.0), 1.0, &[vec![0]], &quad).unwrap();
        assert_eq!(m.rows(), 1);
        assert!((m[(0, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn drifting_walk_is_real() {
        // Right-biased walk: +1 w.p. 0.7, -1 w.p. 0.3. Closed form with
        // generating-function root: G(0,0) = 1/sqrt((lambda+q)^2 - 4 q^2 p (1-p)).
        let m = JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 0.7), (vec![-1], 0.3)])).unwrap();
        let quad = Quadrature::default();
        for &l in &[1e-8, 0.1, 1.0] {
            let g = green_origin(&m, l, &[0], &quad).unwrap();
            let exact = 1.0 / ((l + 1.0f64).powi(2) - 4.0 * 0.21).sqrt();
            assert!((g - exact).abs() < 1e-10 * exact.max(1.0), "l={l}: {g} vs {exact}");
        }
    }

    #[test]
    fn differences_at_zero_are_potential_kernel() {
        let quad = Quadrature::default();
        for &q in &[1.0, 2.0] {
            let pts = vec![vec![1], vec![-2], vec![3]];
            let e = green_differences(&sym1(q), 0.0, &pts, &quad).unwrap();
            for (p, v) in pts.iter().zip(&e.values) {
                assert!((v + p[0].abs() as f64 / q).abs() < 1e-10, "q={q} x={p:?} v={v}");
            }
        }
    }

    #[test]
    fn differences_match_values() {
        let quad = Quadrature::default();
        let m = example_2b();
        let pts = vec![vec![0, 0], vec![2, 1], vec![-1, 0]];
        let v = green_values(&m, 0.3, &pts, &quad).unwrap().values;
        let dv = green_differences(&m, 0.3, &pts, &quad).unwrap().values;
        for k in 0..3 {
            assert!((dv[k] - (v[k] - v[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn transient_value_at_zero() {
        let quad = Quadrature::default();
        let m = example_2b();
        let at_zero = green_values_at_zero(&m, &[vec![0, 0]], &quad).unwrap().values[0];
        let near = green_origin(&m, 1e-9, &[0, 0], &quad).unwrap();
        assert!((at_zero - near).abs() < 1e-7 * at_zero);
        assert_eq!(green_values_at_zero(&sym1(1.0), &[vec![0]], &quad), Err(GreenError::Recurrent));
    }

    fn example_2b() -> JumpModel {
        JumpModel::new(
            2,
            3.0,
            JumpLaw::FiniteSupport(vec![
                (vec![2, 0], 0.5),
                (vec![-1, 0], 1.0 / 6.0),
                (vec![0, 1], 1.0 / 6.0),
                (vec![0, -1], 1.0 / 6.0),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_lambda() {
        let quad = Quadrature::default();
        assert!(matches!(green_origin(&sym1(1.0), 0.0, &[0], &quad), Err(GreenError::NonPositiveLambda(_))));
        assert!(matches!(green_origin(&sym1(1.0), -1.0, &[0], &quad), Err(GreenError::NonPositiveLambda(_))));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((integral - 2.0 / 11.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_monotone_step() {
        assert_eq!(cutoff(0.01f64), 1.0);
        assert_eq!(cutoff(3.1f64), 0.0);
        assert!((cutoff(CUT_CENTER) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(3.1 * i as f64 / 100.0);
            assert!(c <= prev && (0.0..=1.0).contains(&c));
            prev = c;
        }
    }
}
