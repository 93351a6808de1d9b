//! Level set `R = {r : H(r) = nu}`, the front map
//! `z(r) = nu grad H(r) / <grad H(r), r>` and the support margin
//! `sup_{r in R} <x, r> - nu` that classifies points against the front.
//!
//! `H` is convex with `H(0) = 0 < nu` and grows without bound along every
//! ray, so each ray from the origin meets `R` exactly once; everything here
//! is parameterised by that ray intersection.

use serde::Serialize;
use thiserror::Error;

use crate::lattice_walk::{JumpModel, WalkError};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontError {
    #[error("nu must be positive and finite, got {0}")]
    BadNu(f64),
    #[error("point is not on the level set: |H(r) - nu| = {residual:.3e}")]
    NotOnLevelSet { residual: f64 },
    #[error("epsilon must lie in (0, nu), got {0}")]
    BadEpsilon(f64),
    #[error("level tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("direction must be nonzero and match the dimension")]
    BadDirection,
    #[error("front sampling supports dimensions 1 to 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("root finding along a ray did not converge")]
    NoConvergence,
    #[error(transparent)]
    Walk(#[from] WalkError),
}

#[derive(Debug, Clone)]
pub struct FrontModel<T = f64> {
    model: JumpModel<T>,
    nu: T,
    level_tol: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontRecord<T = f64> {
    pub u: Vec<T>,
    pub r: Vec<T>,
    pub z: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontSample<T = f64> {
    pub dimension: usize,
    pub nu: T,
    /// Directions per angle (`K`); 2 in one dimension.
    pub resolution: usize,
    pub records: Vec<FrontRecord<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointClass {
    /// In `O_eps`: margin above `eps`.
    Outside,
    /// In `Q_eps`: margin below `-eps`.
    Inside,
    Shell,
}

impl<T: Real> FrontModel<T> {
    pub fn new(model: JumpModel<T>, nu: T) -> Result<Self, FrontError> {
        if !(nu > T::zero()) || !nu.is_finite() {
            return Err(FrontError::BadNu(nu.to_f64_lossy()));
        }
        Ok(Self {
            model,
            nu,
            level_tol: None,
        })
    }

    /// Overrides the default level tolerance. Must be positive.
    pub fn with_level_tol(mut self, tol: T) -> Result<Self, FrontError> {
        if !(tol > T::zero()) || !tol.is_finite() {
            return Err(FrontError::BadTolerance(tol.to_f64_lossy()));
        }
        self.level_tol = Some(tol);
        Ok(self)
    }

    pub fn model(&self) -> &JumpModel<T> {
        &self.model
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    /// Accepted `|H(r) - nu|` for points of `R`: `1e-10 (1 + nu)` unless overridden.
    pub fn level_tol(&self) -> T {
        if let Some(tol) = self.level_tol {
            return tol;
        }
        (T::lit(1e-10) * (T::one() + self.nu)).max(T::epsilon().sqrt() * (T::one() + self.nu))
    }

    fn radius_tol(&self) -> T {
        (T::lit(1e-12) * (T::one() + self.nu)).max(T::epsilon() * T::lit(64.0) * (T::one() + self.nu))
    }

    /// The `rho > 0` with `H(rho u / |u|) = nu`.
    pub fn level_radius(&self, u: &[T]) -> Result<T, FrontError> {
        if u.len() != self.dimension() {
            return Err(FrontError::BadDirection);
        }
        let len = norm(u);
        if !(len > T::zero()) || !len.is_finite() {
            return Err(FrontError::BadDirection);
        }
        let unit: Vec<T> = u.iter().map(|&x| x / len).collect();
        self.radius_unit(&unit)
    }

    fn radius_unit(&self, unit: &[T]) -> Result<T, FrontError> {
        let at = |rho: T| -> Vec<T> { unit.iter().map(|&x| x * rho).collect() };
        let f = |rho: T| -> Result<T, FrontError> { Ok(self.model.log_mgf(&at(rho))? - self.nu) };
        let mut lo = T::zero();
        let mut hi = T::one();
        let mut f_hi = f(hi)?;
        let mut doublings = 0;
        while f_hi < T::zero() {
            lo = hi;
            hi = hi * T::lit(2.0);
            f_hi = f(hi)?;
            doublings += 1;
            if doublings > 200 {
                return Err(FrontError::NoConvergence);
            }
        }
        // Newton from the right is monotone on a convex increasing branch;
        // bisection guards the rest.
        let tol = self.radius_tol();
        let mut rho = hi;
        let mut val = f_hi;
        for _ in 0..200 {
            if val.abs() < tol {
                return Ok(rho);
            }
            if val > T::zero() {
                hi = rho;
            } else {
                lo = rho;
            }
            let slope = dot(&self.model.grad_log_mgf(&at(rho))?, unit);
            let newton = rho - val / slope;
            rho = if slope > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                T::lit(0.5) * (lo + hi)
            };
            val = f(rho)?;
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        if val.abs() < tol {
            Ok(rho)
        } else {
            Err(FrontError::NoConvergence)
        }
    }

    /// `r = rho(u) u` for unit `u`.
    pub fn level_point(&self, u: &[T]) -> Result<Vec<T>, FrontError> {
        let len = norm(u);
        if !(len > T::zero()) || u.len() != self.dimension() {
            return Err(FrontError::BadDirection);
        }
        let unit: Vec<T> = u.iter().map(|&x| x / len).collect();
        let rho = self.radius_unit(&unit)?;
        Ok(unit.iter().map(|&x| x * rho).collect())
    }

    /// `z(r)`.
    pub fn front_point(&self, r: &[T]) -> Result<Vec<T>, FrontError> {
        if r.len() != self.dimension() {
            return Err(FrontError::BadDirection);
        }
        let (h, g) = self.model.log_mgf_and_grad(r)?;
        let residual = (h - self.nu).abs();
        if !(residual < self.level_tol()) {
            return Err(FrontError::NotOnLevelSet {
                residual: residual.to_f64_lossy(),
            });
        }
        let c = self.nu / dot(&g, r);
        Ok(g.into_iter().map(|x| x * c).collect())
    }

    /// Direction grid: both signs for `d = 1`, `K` equispaced angles for
    /// `d = 2`, `K` azimuths times `K` midpoint polar cosines for `d = 3`.
    pub fn directions(&self, k: usize) -> Result<Vec<Vec<T>>, FrontError> {
        let tau = T::TAU();
        let kf = T::from_usize_lossy(k.max(1));
        match self.dimension() {
            1 => Ok(vec![vec![-T::one()], vec![T::one()]]),
            2 => Ok((0..k)
                .map(|i| {
                    let phi = tau * T::from_usize_lossy(i) / kf;
                    vec![phi.cos(), phi.sin()]
                })
                .collect()),
            3 => {
                let mut out = Vec::with_capacity(k * k);
                for b in 0..k {
                    let c = -T::one() + (T::lit(2.0) * T::from_usize_lossy(b) + T::one()) / kf;
                    let s = (T::one() - c * c).max(T::zero()).sqrt();
                    for a in 0..k {
                        let phi = tau * T::from_usize_lossy(a) / kf;
                        out.push(vec![s * phi.cos(), s * phi.sin(), c]);
                    }
                }
                Ok(out)
            }
            d => Err(FrontError::UnsupportedDimension(d)),
        }
    }

    pub fn sample_front(&self, k: usize) -> Result<FrontSample<T>, FrontError> {
        let records = self
            .directions(k)?
            .into_iter()
            .map(|u| {
                let r = self.level_point(&u)?;
                let z = self.front_point(&r)?;
                Ok(FrontRecord { u, r, z })
            })
            .collect::<Result<Vec<_>, FrontError>>()?;
        Ok(FrontSample {
            dimension: self.dimension(),
            nu: self.nu,
            resolution: if self.dimension() == 1 { 2 } else { k },
            records,
        })
    }

    fn ray_value(&self, x: &[T], unit: &[T]) -> Result<T, FrontError> {
        Ok(self.radius_unit(unit)? * dot(x, unit))
    }

    /// `sup_{r in R} <x, r> - nu`.
    pub fn support_margin(&self, x: &[T]) -> Result<T, FrontError> {
        let d = self.dimension();
        if x.len() != d {
            return Err(FrontError::BadDirection);
        }
        if x.iter().all(|&v| v == T::zero()) {
            return Ok(-self.nu);
        }
        let best = match d {
            1 => {
                let plus = self.ray_value(x, &[T::one()])?;
                let minus = self.ray_value(x, &[-T::one()])?;
                plus.max(minus)
            }
            2 => self.margin_2d(x)?,
            _ => self.margin_kkt(x)?,
        };
        Ok(best - self.nu)
    }

    fn margin_2d(&self, x: &[T]) -> Result<T, FrontError> {
        const SCAN: usize = 64;
        const STARTS: usize = 8;
        let tau = T::TAU();
        let step = tau / T::from_usize_lossy(SCAN);
        let g = |phi: T| self.ray_value(x, &[phi.cos(), phi.sin()]);
        let values: Vec<T> = (0..SCAN)
            .map(|i| g(step * T::from_usize_lossy(i)))
            .collect::<Result<_, _>>()?;
        // Local maxima of the periodic scan, best first.
        let mut peaks: Vec<usize> = (0..SCAN)
            .filter(|&i| {
                let prev = values[(i + SCAN - 1) % SCAN];
                let next = values[(i + 1) % SCAN];
                values[i] >= prev && values[i] >= next
            })
            .collect();
        peaks.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
        peaks.truncate(STARTS);
        let mut best = values.iter().fold(-T::infinity(), |a, &v| a.max(v));
        for i in peaks {
            let centre = step * T::from_usize_lossy(i);
            let v = golden_max(&g, centre - step, centre + step, T::lit(1e-10))?;
            best = best.max(v);
        }
        Ok(best)
    }

    /// Lagrange conditions `x = mu grad H(r)`, `H(r) = nu`, solved by Newton
    /// from the best of the `3^d - 1` lattice directions.
    fn margin_kkt(&self, x: &[T]) -> Result<T, FrontError> {
        let d = self.dimension();
        let mut starts: Vec<Vec<T>> = Vec::new();
        let total = 3usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<T> = (0..d)
                .map(|_| {
                    let digit = (c % 3) as i64 - 1;
                    c /= 3;
                    T::from_i64_lossy(digit)
                })
                .collect();
            if v.iter().any(|&t| t != T::zero()) {
                let n = norm(&v);
                starts.push(v.into_iter().map(|t| t / n).collect());
            }
        }
        let xn = norm(x);
        starts.push(x.iter().map(|&t| t / xn).collect());
        let mut scored: Vec<(T, Vec<T>)> = starts
            .into_iter()
            .map(|u| Ok((self.ray_value(x, &u)?, u)))
            .collect::<Result<_, FrontError>>()?;
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut best = scored[0].0;
        for (_, u) in scored.iter().take(3) {
            if let Some(v) = self.kkt_newton(x, u)? {
                best = best.max(v);
            }
        }
        Ok(best)
    }

    fn kkt_newton(&self, x: &[T], u0: &[T]) -> Result<Option<T>, FrontError> {
        let d = self.dimension();
        let mut r = self.level_point(u0)?;
        let g0 = self.model.grad_log_mgf(&r)?;
        let mut mu = norm(x) / norm(&g0);
        for _ in 0..100 {
            let (h, g) = self.model.log_mgf_and_grad(&r)?;
            let hess = self.model.hessian_log_mgf(&r)?;
            let mut res: Vec<T> = (0..d).map(|i| mu * g[i] - x[i]).collect();
            res.push(h - self.nu);
            let scale = norm(x).max(T::one());
            if res.iter().all(|v| v.abs() <= T::lit(1e-14) * scale) {
                break;
            }
            let jac = Matrix::from_fn(d + 1, d + 1, |i, j| match (i < d, j < d) {
                (true, true) => mu * hess[(i, j)],
                (true, false) => g[i],
                (false, true) => g[j],
                (false, false) => T::zero(),
            });
            let neg: Vec<T> = res.iter().map(|&v| -v).collect();
            let Some(step) = jac.solve(&neg) else { return Ok(None) };
            let mut t = T::one();
            // Keep mu positive so the iteration stays at the maximiser.
            while mu + t * step[d] <= T::zero() {
                t = t * T::lit(0.5);
            }
            for i in 0..d {
                r[i] = r[i] + t * step[i];
            }
            mu = mu + t * step[d];
            if !r.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
        }
        // Evaluate on the exact ray intersection so the value is attained.
        if norm(&r) == T::zero() {
            return Ok(None);
        }
        let on_level = self.level_point(&r)?;
        Ok(Some(dot(x, &on_level)))
    }

    pub fn classify_point(&self, x: &[T], epsilon: T) -> Result<PointClass, FrontError> {
        if !(epsilon > T::zero() && epsilon < self.nu) {
            return Err(FrontError::BadEpsilon(epsilon.to_f64_lossy()));
        }
        let m = self.support_margin(x)?;
        Ok(if m > epsilon {
            PointClass::Outside
        } else if m < -epsilon {
            PointClass::Inside
        } else {
            PointClass::Shell
        })
    }
}

/// Golden-section maximum of a unimodal `f` on `[a, b]`.
fn golden_max<T: Real>(
    f: &impl Fn(T) -> Result<T, FrontError>,
    mut a: T,
    mut b: T,
    tol: T,
) -> Result<T, FrontError> {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fe = f(e)?;
    while b - a > tol {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e)?;
        }
    }
    Ok(fc.max(fe))
}
