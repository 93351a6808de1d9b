//! Space-homogeneous continuous-time random walk on `Z^d`.
//!
//! The walk jumps at rate `q`; jump values are i.i.d. with one of the
//! built-in laws below. All exponential functionals (`H`, its gradient and
//! Hessian, the characteristic function and the complex moment generating
//! function used by the resolvent) are closed-form.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{dot_lattice, Real};

/// Default cap on any exponent evaluated by `log_mgf` and friends.
pub const DEFAULT_EXPONENT_BOUND: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("jump support spans a sublattice of rank {rank}, dimension is {dimension}")]
    NonFullRankSupport { rank: usize, dimension: usize },
    #[error("walk is not irreducible: {0}")]
    ReducibleSupport(String),
    #[error("bad probabilities: {0}")]
    BadProbabilities(String),
    #[error("the zero vector is in the jump support")]
    ZeroJumpInSupport,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("exponent {exponent:.6e} exceeds the bound {bound}")]
    RangeError { exponent: f64, bound: f64 },
}

/// One-dimensional jump law, used as an axis move or as a coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal<T = f64> {
    /// `+1` or `-1` with probability 1/2 each.
    Rademacher,
    /// `+n` w.p. `p_plus * sigma_plus^(n-1) e^(-sigma_plus) / (n-1)!` and
    /// `-n` w.p. `p_minus * sigma_minus^(n-1) e^(-sigma_minus) / (n-1)!`.
    DisplacedPoisson {
        sigma_plus: T,
        sigma_minus: T,
        p_plus: T,
        p_minus: T,
    },
    /// Explicit `(value, probability)` atoms.
    FiniteList(Vec<(i64, T)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw<T = f64> {
    /// Explicit `(jump vector, probability)` atoms.
    FiniteSupport(Vec<(Vec<i64>, T)>),
    /// Each jump moves along exactly one axis; axis `k` is chosen with
    /// weight `axes[k].0` and the step along it follows `axes[k].1`.
    AxisMixture(Vec<(T, Marginal<T>)>),
    /// Independent coordinates.
    ProductMarginals(Vec<Marginal<T>>),
}

#[derive(Debug, Clone)]
pub struct JumpModel<T = f64> {
    dimension: usize,
    q: T,
    law: JumpLaw<T>,
    exponent_bound: T,
    tilt: Vec<T>,
    min_log_mgf: T,
    sampler: JumpSampler,
}

fn prob_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

fn check_bound<T: Real>(exponent: T, bound: T) -> Result<(), WalkError> {
    if exponent > bound || exponent.is_nan() {
        Err(WalkError::RangeError {
            exponent: exponent.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        })
    } else {
        Ok(())
    }
}

impl<T: Real> Marginal<T> {
    fn finite_atoms(&self) -> Option<Vec<(i64, f64)>> {
        match self {
            Marginal::Rademacher => Some(vec![(1, 0.5), (-1, 0.5)]),
            Marginal::DisplacedPoisson { .. } => None,
            Marginal::FiniteList(atoms) => Some(atoms.iter().map(|a| (a.0, a.1.to_f64_lossy())).collect()),
        }
    }

    fn validate(&self) -> Result<(), WalkError> {
        match self {
            Marginal::Rademacher => Ok(()),
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => {
                if !(*sigma_plus >= T::zero() && *sigma_minus >= T::zero())
                    || !sigma_plus.is_finite()
                    || !sigma_minus.is_finite()
                {
                    return Err(WalkError::InvalidModel(
                        "displaced Poisson rates must be finite and nonnegative".into(),
                    ));
                }
                check_probabilities([*p_plus, *p_minus].into_iter(), "displaced Poisson side")
            }
            Marginal::FiniteList(atoms) => {
                if atoms.is_empty() {
                    return Err(WalkError::BadProbabilities("empty finite list".into()));
                }
                check_probabilities(atoms.iter().map(|a| a.1), "finite list")
            }
        }
    }

    fn contains_zero(&self) -> bool {
        match self {
            Marginal::FiniteList(atoms) => atoms.iter().any(|&(k, p)| k == 0 && p > T::zero()),
            _ => false,
        }
    }

    /// Atoms with positive probability, enough to determine the generated
    /// group and the cone of the support.
    fn skeleton(&self) -> Vec<i64> {
        match self {
            Marginal::Rademacher => vec![1, -1],
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => {
                let mut v = Vec::new();
                if *p_plus > T::zero() {
                    v.push(1);
                    if *sigma_plus > T::zero() {
                        v.push(2);
                    }
                }
                if *p_minus > T::zero() {
                    v.push(-1);
                    if *sigma_minus > T::zero() {
                        v.push(-2);
                    }
                }
                v
            }
            Marginal::FiniteList(atoms) => atoms
                .iter()
                .filter(|a| a.1 > T::zero())
                .map(|a| a.0)
                .collect(),
        }
    }

    /// `(E e^{sY}, E Y e^{sY}, E Y^2 e^{sY})`.
    fn moments(&self, s: T, bound: T) -> Result<[T; 3], WalkError> {
        match self {
            Marginal::Rademacher => {
                check_bound(s.abs(), bound)?;
                Ok([s.cosh(), s.sinh(), s.cosh()])
            }
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => {
                let mut out = [T::zero(); 3];
                if *p_plus > T::zero() {
                    check_bound(s, bound)?;
                    let es = s.exp();
                    let e = *sigma_plus * (es - T::one()) + s;
                    check_bound(e, bound)?;
                    let a = *p_plus * e.exp();
                    let a1 = *sigma_plus * es + T::one();
                    out[0] = out[0] + a;
                    out[1] = out[1] + a * a1;
                    out[2] = out[2] + a * (a1 * a1 + *sigma_plus * es);
                }
                if *p_minus > T::zero() {
                    check_bound(-s, bound)?;
                    let es = (-s).exp();
                    let e = *sigma_minus * (es - T::one()) - s;
                    check_bound(e, bound)?;
                    let b = *p_minus * e.exp();
                    let b1 = *sigma_minus * es + T::one();
                    out[0] = out[0] + b;
                    out[1] = out[1] - b * b1;
                    out[2] = out[2] + b * (b1 * b1 + *sigma_minus * es);
                }
                Ok(out)
            }
            Marginal::FiniteList(atoms) => {
                let mut out = [T::zero(); 3];
                for &(k, p) in atoms {
                    if p == T::zero() {
                        continue;
                    }
                    let kf = T::from_i64_lossy(k);
                    let e = s * kf;
                    check_bound(e, bound)?;
                    let w = p * e.exp();
                    out[0] = out[0] + w;
                    out[1] = out[1] + w * kf;
                    out[2] = out[2] + w * kf * kf;
                }
                Ok(out)
            }
        }
    }

    /// `E e^{zY}` for complex `z`.
    pub(crate) fn mgf_complex(&self, z: Complex<T>) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        match self {
            Marginal::Rademacher => z.cosh(),
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => {
                let mut acc = Complex::new(T::zero(), T::zero());
                if *p_plus > T::zero() {
                    acc = acc + ((z.exp() - one) * *sigma_plus + z).exp() * *p_plus;
                }
                if *p_minus > T::zero() {
                    acc = acc + (((-z).exp() - one) * *sigma_minus - z).exp() * *p_minus;
                }
                acc
            }
            Marginal::FiniteList(atoms) => atoms.iter().fold(
                Complex::new(T::zero(), T::zero()),
                |acc, &(k, p)| acc + (z * T::from_i64_lossy(k)).exp() * p,
            ),
        }
    }

    fn mgf_minus_one_complex(&self, z: Complex<T>) -> Complex<T> {
        match self {
            Marginal::Rademacher => {
                let s = (z * T::lit(0.5)).sinh();
                s * s * T::lit(2.0)
            }
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => {
                let mut acc = Complex::new(T::zero(), T::zero());
                if *p_plus > T::zero() {
                    acc = acc + expm1_complex(expm1_complex(z) * *sigma_plus + z) * *p_plus;
                }
                if *p_minus > T::zero() {
                    acc = acc + expm1_complex(expm1_complex(-z) * *sigma_minus - z) * *p_minus;
                }
                acc
            }
            Marginal::FiniteList(atoms) => atoms.iter().fold(
                Complex::new(T::zero(), T::zero()),
                |acc, &(k, p)| acc + expm1_complex(z * T::from_i64_lossy(k)) * p,
            ),
        }
    }

    fn mean(&self) -> T {
        match self {
            Marginal::Rademacher => T::zero(),
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                p_minus,
            } => *p_plus * (*sigma_plus + T::one()) - *p_minus * (*sigma_minus + T::one()),
            Marginal::FiniteList(atoms) => atoms
                .iter()
                .fold(T::zero(), |acc, &(k, p)| acc + p * T::from_i64_lossy(k)),
        }
    }
}

/// `e^w - 1` for complex `w`, accurate for small `|w|`.
pub(crate) fn expm1_complex<T: Real>(w: Complex<T>) -> Complex<T> {
    let (a, b) = (w.re, w.im);
    let half = (b * T::lit(0.5)).sin();
    Complex::new(
        a.exp_m1() * b.cos() - T::lit(2.0) * half * half,
        a.exp() * b.sin(),
    )
}

fn check_probabilities<T: Real>(
    probs: impl Iterator<Item = T>,
    what: &str,
) -> Result<(), WalkError> {
    let mut total = T::zero();
    for p in probs {
        if !(p >= T::zero()) || !p.is_finite() {
            return Err(WalkError::BadProbabilities(format!(
                "{what}: probability {p} is negative or not finite"
            )));
        }
        total = total + p;
    }
    if (total - T::one()).abs() > prob_tol::<T>() {
        return Err(WalkError::BadProbabilities(format!(
            "{what}: probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl<T: Real> JumpModel<T> {
    /// Validates the law and builds the model: probabilities, zero jump,
    /// full-rank support, generation of the whole lattice and positive
    /// spanning (`H -> inf` along every ray).
    pub fn new(dimension: usize, q: T, law: JumpLaw<T>) -> Result<Self, WalkError> {
        Self::with_exponent_bound(dimension, q, law, T::lit(DEFAULT_EXPONENT_BOUND))
    }

    pub fn with_exponent_bound(
        dimension: usize,
        q: T,
        law: JumpLaw<T>,
        exponent_bound: T,
    ) -> Result<Self, WalkError> {
        if dimension == 0 {
            return Err(WalkError::InvalidModel("dimension must be positive".into()));
        }
        if !(q > T::zero()) || !q.is_finite() {
            return Err(WalkError::InvalidModel(format!("jump rate q = {q} must be positive")));
        }
        if !(exponent_bound > T::zero()) {
            return Err(WalkError::InvalidModel("exponent bound must be positive".into()));
        }
        validate_law(dimension, &law)?;
        let skeleton = law_skeleton(dimension, &law);
        let (rank, index) = lattice_rank_and_index(dimension, &skeleton);
        if rank < dimension {
            return Err(WalkError::NonFullRankSupport { rank, dimension });
        }
        if index != 1 {
            return Err(WalkError::ReducibleSupport(format!(
                "jumps generate a sublattice of index {index}"
            )));
        }
        let sampler = JumpSampler::build(&law);
        let mut model = Self {
            dimension,
            q,
            law,
            exponent_bound,
            tilt: vec![T::zero(); dimension],
            min_log_mgf: T::zero(),
            sampler,
        };
        let (tilt, h_min) = model.minimize_log_mgf()?;
        model.tilt = tilt;
        model.min_log_mgf = h_min;
        Ok(model)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn law(&self) -> &JumpLaw<T> {
        &self.law
    }

    pub fn exponent_bound(&self) -> T {
        self.exponent_bound
    }

    /// Minimiser `s*` of `H`; the zero-drift exponential tilt of the walk.
    pub fn tilt(&self) -> &[T] {
        &self.tilt
    }

    /// Zero drift in dimension 1 or 2: `G_0(0, 0) = inf`.
    pub fn is_recurrent(&self) -> bool {
        self.dimension <= 2 && self.min_log_mgf.abs() <= T::lit(1e-14) * self.q
    }

    /// `H(s*) = min H <= 0`.
    pub fn min_log_mgf(&self) -> T {
        self.min_log_mgf
    }

    fn mgf_moments(&self, s: &[T], want_hessian: bool) -> Result<(T, Vec<T>, Option<Matrix<T>>), WalkError> {
        assert_eq!(s.len(), self.dimension, "argument has wrong dimension");
        let d = self.dimension;
        let bound = self.exponent_bound;
        match &self.law {
            JumpLaw::FiniteSupport(atoms) => {
                let mut m = T::zero();
                let mut g = vec![T::zero(); d];
                let mut h = want_hessian.then(|| Matrix::zeros(d, d));
                for (y, p) in atoms {
                    if *p == T::zero() {
                        continue;
                    }
                    let e = dot_lattice(s, y);
                    check_bound(e, bound)?;
                    let w = *p * e.exp();
                    m = m + w;
                    for i in 0..d {
                        let yi = T::from_i64_lossy(y[i]);
                        g[i] = g[i] + w * yi;
                        if let Some(h) = h.as_mut() {
                            for j in 0..d {
                                h[(i, j)] = h[(i, j)] + w * yi * T::from_i64_lossy(y[j]);
                            }
                        }
                    }
                }
                Ok((m, g, h))
            }
            JumpLaw::AxisMixture(axes) => {
                let mut m = T::zero();
                let mut g = vec![T::zero(); d];
                let mut h = want_hessian.then(|| Matrix::zeros(d, d));
                for (k, (w, marg)) in axes.iter().enumerate() {
                    if *w == T::zero() {
                        continue;
                    }
                    let mk = marg.moments(s[k], bound)?;
                    m = m + *w * mk[0];
                    g[k] = *w * mk[1];
                    if let Some(h) = h.as_mut() {
                        h[(k, k)] = *w * mk[2];
                    }
                }
                Ok((m, g, h))
            }
            JumpLaw::ProductMarginals(margs) => {
                let mk: Vec<[T; 3]> = margs
                    .iter()
                    .zip(s)
                    .map(|(marg, &sk)| marg.moments(sk, bound))
                    .collect::<Result<_, _>>()?;
                let prod_except = |skip: &[usize]| {
                    mk.iter()
                        .enumerate()
                        .filter(|(i, _)| !skip.contains(i))
                        .fold(T::one(), |acc, (_, v)| acc * v[0])
                };
                let m = prod_except(&[]);
                let g: Vec<T> = (0..d).map(|k| mk[k][1] * prod_except(&[k])).collect();
                let h = want_hessian.then(|| {
                    Matrix::from_fn(d, d, |i, j| {
                        if i == j {
                            mk[i][2] * prod_except(&[i])
                        } else {
                            mk[i][1] * mk[j][1] * prod_except(&[i, j])
                        }
                    })
                });
                Ok((m, g, h))
            }
        }
    }

    /// `H(s) = q (E e^{<s,Y>} - 1)`.
    pub fn log_mgf(&self, s: &[T]) -> Result<T, WalkError> {
        if s.iter().all(|&x| x == T::zero()) {
            return Ok(T::zero());
        }
        let (m, _, _) = self.mgf_moments(s, false)?;
        Ok(self.q * (m - T::one()))
    }

    pub fn grad_log_mgf(&self, s: &[T]) -> Result<Vec<T>, WalkError> {
        let (_, g, _) = self.mgf_moments(s, false)?;
        Ok(g.into_iter().map(|x| x * self.q).collect())
    }

    pub fn hessian_log_mgf(&self, s: &[T]) -> Result<Matrix<T>, WalkError> {
        let (_, _, h) = self.mgf_moments(s, true)?;
        Ok(h.expect("requested").map(|x| x * self.q))
    }

    /// `(H(s), grad H(s))` in one pass.
    pub fn log_mgf_and_grad(&self, s: &[T]) -> Result<(T, Vec<T>), WalkError> {
        let (m, g, _) = self.mgf_moments(s, false)?;
        Ok((self.q * (m - T::one()), g.into_iter().map(|x| x * self.q).collect()))
    }

    /// `E e^{<z,Y>}` for complex `z`; no overflow guard, callers keep the
    /// real part of `z` bounded.
    pub fn mgf_complex(&self, z: &[Complex<T>]) -> Complex<T> {
        assert_eq!(z.len(), self.dimension, "argument has wrong dimension");
        let zero = Complex::new(T::zero(), T::zero());
        match &self.law {
            JumpLaw::FiniteSupport(atoms) => atoms.iter().fold(zero, |acc, (y, p)| {
                let e = z
                    .iter()
                    .zip(y)
                    .fold(zero, |e, (&zk, &yk)| e + zk * T::from_i64_lossy(yk));
                acc + e.exp() * *p
            }),
            JumpLaw::AxisMixture(axes) => axes
                .iter()
                .zip(z)
                .fold(zero, |acc, ((w, marg), &zk)| acc + marg.mgf_complex(zk) * *w),
            JumpLaw::ProductMarginals(margs) => margs
                .iter()
                .zip(z)
                .fold(Complex::new(T::one(), T::zero()), |acc, (marg, &zk)| {
                    acc * marg.mgf_complex(zk)
                }),
        }
    }

    /// `E e^{<z,Y>} - 1` without the cancellation of `mgf_complex(z) - 1`
    /// near `z = 0`.
    pub fn mgf_minus_one_complex(&self, z: &[Complex<T>]) -> Complex<T> {
        assert_eq!(z.len(), self.dimension, "argument has wrong dimension");
        let zero = Complex::new(T::zero(), T::zero());
        match &self.law {
            JumpLaw::FiniteSupport(atoms) => atoms.iter().fold(zero, |acc, (y, p)| {
                let e = z
                    .iter()
                    .zip(y)
                    .fold(zero, |e, (&zk, &yk)| e + zk * T::from_i64_lossy(yk));
                acc + expm1_complex(e) * *p
            }),
            JumpLaw::AxisMixture(axes) => axes
                .iter()
                .zip(z)
                .fold(zero, |acc, ((w, marg), &zk)| acc + marg.mgf_minus_one_complex(zk) * *w),
            JumpLaw::ProductMarginals(margs) => {
                // prod(1 + e_k) - 1, accumulated one factor at a time.
                let mut acc = zero;
                for (marg, &zk) in margs.iter().zip(z) {
                    let e = marg.mgf_minus_one_complex(zk);
                    acc = acc + e * (acc + T::one());
                }
                acc
            }
        }
    }

    /// Characteristic function `E e^{i<theta,Y>}`.
    pub fn char_fn(&self, theta: &[T]) -> Complex<T> {
        let z: Vec<Complex<T>> = theta.iter().map(|&t| Complex::new(T::zero(), t)).collect();
        self.mgf_complex(&z)
    }

    /// `E Y`.
    pub fn mean_jump(&self) -> Vec<T> {
        let d = self.dimension;
        match &self.law {
            JumpLaw::FiniteSupport(atoms) => {
                let mut m = vec![T::zero(); d];
                for (y, p) in atoms {
                    for i in 0..d {
                        m[i] = m[i] + *p * T::from_i64_lossy(y[i]);
                    }
                }
                m
            }
            JumpLaw::AxisMixture(axes) => axes.iter().map(|(w, marg)| *w * marg.mean()).collect(),
            JumpLaw::ProductMarginals(margs) => margs.iter().map(Marginal::mean).collect(),
        }
    }

    /// `grad H(0) = q E Y`.
    pub fn drift(&self) -> Vec<T> {
        self.mean_jump().into_iter().map(|m| m * self.q).collect()
    }

    /// The jump law as a list of atoms when its support is finite and small.
    pub fn finite_atoms(&self) -> Option<Vec<(Vec<i64>, f64)>> {
        const MAX_ATOMS: usize = 4096;
        let d = self.dimension;
        match &self.law {
            JumpLaw::FiniteSupport(atoms) => Some(atoms.iter().map(|a| (a.0.clone(), a.1.to_f64_lossy())).collect()),
            JumpLaw::AxisMixture(axes) => {
                let mut out = Vec::new();
                for (axis, (w, marg)) in axes.iter().enumerate() {
                    for (v, p) in marg.finite_atoms()? {
                        let mut y = vec![0; d];
                        y[axis] = v;
                        out.push((y, w.to_f64_lossy() * p));
                    }
                }
                Some(out)
            }
            JumpLaw::ProductMarginals(margs) => {
                let mut out: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
                for marg in margs {
                    let atoms = marg.finite_atoms()?;
                    if out.len() * atoms.len() > MAX_ATOMS {
                        return None;
                    }
                    out = out
                        .iter()
                        .flat_map(|(y, p)| {
                            atoms.iter().map(move |&(v, q)| {
                                let mut z = y.clone();
                                z.push(v);
                                (z, p * q)
                            })
                        })
                        .collect();
                }
                out.retain(|(y, _)| y.iter().any(|&v| v != 0));
                Some(out)
            }
        }
    }

    /// Draws one jump into `out` (length `d`).
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i64]) {
        self.sampler.sample(rng, out);
    }

    pub fn sample_jump_vec<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let mut out = vec![0; self.dimension];
        self.sampler.sample(rng, &mut out);
        out
    }

    /// Damped Newton on the strictly convex `H`, started at the origin. A
    /// law that does not positively span `R^d` has no minimiser and the
    /// iterates run off to infinity.
    fn minimize_log_mgf(&self) -> Result<(Vec<T>, T), WalkError> {
        let d = self.dimension;
        let mut s = vec![T::zero(); d];
        let mut h = T::zero();
        let runaway = T::lit(60.0);
        // Stationarity is judged on the mean of the tilted law, g / m, which
        // stays of order one for a law whose support lies in a half-space.
        let tight = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
        let loose = T::lit(1e-8).max(T::epsilon().sqrt());
        for _ in 0..500 {
            let (m, g, hess) = self.mgf_moments(&s, true).map_err(|_| not_spanning())?;
            let tilted_mean = g.iter().fold(T::zero(), |a, &x| a.max((x / m).abs()));
            if tilted_mean <= tight {
                return Ok((s, h));
            }
            let neg_g: Vec<T> = g.iter().map(|&x| -x).collect();
            let step = hess.expect("requested").solve(&neg_g).ok_or_else(not_spanning)?;
            let slope = self.q * g.iter().zip(&step).fold(T::zero(), |a, (&x, &y)| a + x * y);
            if tilted_mean <= loose && -slope <= T::epsilon() * T::lit(64.0) * (T::one() + h.abs()) {
                // Decrease below the resolution of H: finish with the full
                // Newton step, which is quadratically accurate here.
                let s_new: Vec<T> = s.iter().zip(&step).map(|(&a, &b)| a + b).collect();
                let h_new = self.log_mgf(&s_new).map_err(|_| not_spanning())?;
                return Ok((s_new, h_new.min(h)));
            }
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<T> = s.iter().zip(&step).map(|(&a, &b)| a + t * b).collect();
                if let Ok(ht) = self.log_mgf(&trial) {
                    if ht <= h + T::lit(1e-4) * t * slope {
                        s = trial;
                        h = ht;
                        accepted = true;
                        break;
                    }
                }
                t = t * T::lit(0.5);
            }
            if !accepted {
                // No further decrease representable: accept only if stationary
                // up to rounding.
                return if tilted_mean <= loose {
                    Ok((s, h))
                } else {
                    Err(not_spanning())
                };
            }
            if s.iter().any(|x| x.abs() > runaway) {
                return Err(not_spanning());
            }
        }
        Err(not_spanning())
    }
}

fn not_spanning() -> WalkError {
    WalkError::ReducibleSupport("jump support does not positively span R^d".into())
}

fn validate_law<T: Real>(dimension: usize, law: &JumpLaw<T>) -> Result<(), WalkError> {
    match law {
        JumpLaw::FiniteSupport(atoms) => {
            if atoms.is_empty() {
                return Err(WalkError::BadProbabilities("empty jump support".into()));
            }
            for (y, _) in atoms {
                if y.len() != dimension {
                    return Err(WalkError::InvalidModel(format!(
                        "jump {y:?} does not have dimension {dimension}"
                    )));
                }
            }
            check_probabilities(atoms.iter().map(|a| a.1), "jump support")?;
            if atoms.iter().any(|(y, _)| y.iter().all(|&k| k == 0)) {
                return Err(WalkError::ZeroJumpInSupport);
            }
        }
        JumpLaw::AxisMixture(axes) => {
            if axes.len() != dimension {
                return Err(WalkError::InvalidModel(format!(
                    "axis mixture has {} axes, dimension is {dimension}",
                    axes.len()
                )));
            }
            check_probabilities(axes.iter().map(|a| a.0), "axis weights")?;
            for (w, marg) in axes {
                marg.validate()?;
                if *w > T::zero() && marg.contains_zero() {
                    return Err(WalkError::ZeroJumpInSupport);
                }
            }
        }
        JumpLaw::ProductMarginals(margs) => {
            if margs.len() != dimension {
                return Err(WalkError::InvalidModel(format!(
                    "{} marginals given, dimension is {dimension}",
                    margs.len()
                )));
            }
            for marg in margs {
                marg.validate()?;
            }
            if margs.iter().all(Marginal::contains_zero) {
                return Err(WalkError::ZeroJumpInSupport);
            }
        }
    }
    Ok(())
}

fn law_skeleton<T: Real>(dimension: usize, law: &JumpLaw<T>) -> Vec<Vec<i64>> {
    match law {
        JumpLaw::FiniteSupport(atoms) => atoms
            .iter()
            .filter(|a| a.1 > T::zero())
            .map(|a| a.0.clone())
            .collect(),
        JumpLaw::AxisMixture(axes) => {
            let mut out = Vec::new();
            for (k, (w, marg)) in axes.iter().enumerate() {
                if *w > T::zero() {
                    for a in marg.skeleton() {
                        let mut y = vec![0; dimension];
                        y[k] = a;
                        out.push(y);
                    }
                }
            }
            out
        }
        JumpLaw::ProductMarginals(margs) => {
            let mut out: Vec<Vec<i64>> = vec![Vec::new()];
            for marg in margs {
                let mut atoms = marg.skeleton();
                // Cap each coordinate so the product stays small; a handful of
                // atoms already fixes the generated group for these laws.
                atoms.truncate(6);
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        atoms.iter().map(move |&a| {
                            let mut v = prefix.clone();
                            v.push(a);
                            v
                        })
                    })
                    .collect();
            }
            out.retain(|y| y.iter().any(|&k| k != 0));
            out
        }
    }
}

/// Rank of the integer span of `vectors` and, when the rank is full, the
/// index of that sublattice in `Z^d` (integer row echelon form).
pub fn lattice_rank_and_index(dimension: usize, vectors: &[Vec<i64>]) -> (usize, i128) {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rank = 0;
    let mut index: i128 = 1;
    for col in 0..dimension {
        loop {
            let pivot = (rank..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].abs());
            let Some(p) = pivot else { break };
            rows.swap(rank, p);
            let mut done = true;
            for r in rank + 1..rows.len() {
                if rows[r][col] != 0 {
                    let f = rows[r][col] / rows[rank][col];
                    for c in 0..dimension {
                        rows[r][c] -= f * rows[rank][c];
                    }
                    if rows[r][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                index *= rows[rank][col].abs();
                rank += 1;
                break;
            }
        }
        if rank == rows.len() {
            // Remaining columns cannot get pivots.
            if col + 1 < dimension {
                break;
            }
        }
    }
    (rank, index)
}

/// Walker alias table drawing an index from a single 64-bit word: the high
/// part of `u * n` picks the column, the low part decides against the cut.
#[derive(Debug, Clone)]
pub(crate) struct AliasTable {
    cut: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub(crate) fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut cut = vec![u64::MAX; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            cut[s] = (scaled[s] * 18_446_744_073_709_551_616.0) as u64;
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Self { cut, alias }
    }

    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let m = u128::from(rng.next_u64()) * self.cut.len() as u128;
        let i = (m >> 64) as usize;
        if (m as u64) < self.cut[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

#[derive(Debug, Clone)]
enum MarginalSampler {
    Rademacher,
    DisplacedPoisson {
        p_plus: f64,
        plus: Option<Poisson<f64>>,
        minus: Option<Poisson<f64>>,
    },
    Finite {
        values: Vec<i64>,
        alias: AliasTable,
    },
}

impl MarginalSampler {
    fn build<T: Real>(marg: &Marginal<T>) -> Self {
        match marg {
            Marginal::Rademacher => Self::Rademacher,
            Marginal::DisplacedPoisson {
                sigma_plus,
                sigma_minus,
                p_plus,
                ..
            } => {
                let pois = |s: T| {
                    let s = s.to_f64_lossy();
                    (s > 0.0).then(|| Poisson::new(s).expect("positive rate"))
                };
                Self::DisplacedPoisson {
                    p_plus: p_plus.to_f64_lossy(),
                    plus: pois(*sigma_plus),
                    minus: pois(*sigma_minus),
                }
            }
            Marginal::FiniteList(atoms) => Self::Finite {
                values: atoms.iter().map(|a| a.0).collect(),
                alias: AliasTable::new(atoms.iter().map(|a| a.1.to_f64_lossy()).collect())
                    ,
            },
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            Self::DisplacedPoisson { p_plus, plus, minus } => {
                let draw = |d: &Option<Poisson<f64>>, rng: &mut R| {
                    1 + d.as_ref().map_or(0, |d| d.sample(rng) as i64)
                };
                if rng.random::<f64>() < *p_plus {
                    draw(plus, rng)
                } else {
                    -draw(minus, rng)
                }
            }
            Self::Finite { values, alias } => values[alias.sample(rng)],
        }
    }
}

#[derive(Debug, Clone)]
enum JumpSampler {
    Finite {
        dimension: usize,
        vectors: Vec<i64>,
        alias: AliasTable,
    },
    Mixture {
        axes: AliasTable,
        marginals: Vec<MarginalSampler>,
    },
    Product(Vec<MarginalSampler>),
}

impl JumpSampler {
    fn build<T: Real>(law: &JumpLaw<T>) -> Self {
        match law {
            JumpLaw::FiniteSupport(atoms) => Self::Finite {
                dimension: atoms[0].0.len(),
                vectors: atoms.iter().flat_map(|a| a.0.iter().copied()).collect(),
                alias: AliasTable::new(atoms.iter().map(|a| a.1.to_f64_lossy()).collect())
                    ,
            },
            JumpLaw::AxisMixture(axes) => Self::Mixture {
                axes: AliasTable::new(axes.iter().map(|a| a.0.to_f64_lossy()).collect())
                    ,
                marginals: axes.iter().map(|a| MarginalSampler::build(&a.1)).collect(),
            },
            JumpLaw::ProductMarginals(margs) => {
                Self::Product(margs.iter().map(MarginalSampler::build).collect())
            }
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i64]) {
        match self {
            Self::Finite {
                dimension,
                vectors,
                alias,
            } => {
                let i = alias.sample(rng);
                out.copy_from_slice(&vectors[i * dimension..(i + 1) * dimension]);
            }
            Self::Mixture { axes, marginals } => {
                out.iter_mut().for_each(|x| *x = 0);
                let k = axes.sample(rng);
                out[k] = marginals[k].sample(rng);
            }
            Self::Product(margs) => {
                // Resample until nonzero: a product law may put mass on the
                // origin only when some coordinate has a zero atom.
                loop {
                    for (o, m) in out.iter_mut().zip(margs) {
                        *o = m.sample(rng);
                    }
                    if out.iter().any(|&x| x != 0) {
                        break;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn symmetric_1d(q: f64) -> JumpModel {
        JumpModel::new(1, q, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)])).unwrap()
    }

    fn example_2a(q: f64) -> JumpModel {
        JumpModel::new(
            2,
            q,
            JumpLaw::AxisMixture(vec![(0.5, Marginal::Rademacher), (0.5, Marginal::Rademacher)]),
        )
        .unwrap()
    }

    fn example_2b(q: f64) -> JumpModel {
        JumpModel::new(
            2,
            q,
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
    fn validation_examples() {
        symmetric_1d(1.0);
        example_2b(3.0);
        let err = JumpModel::new(2, 1.0, JumpLaw::FiniteSupport(vec![(vec![1, 0], 1.0)])).unwrap_err();
        assert_eq!(err, WalkError::NonFullRankSupport { rank: 1, dimension: 2 });
    }

    #[test]
    fn validation_errors() {
        let bad = JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.4)]));
        assert!(matches!(bad, Err(WalkError::BadProbabilities(_))));
        let neg = JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 1.5), (vec![-1], -0.5)]));
        assert!(matches!(neg, Err(WalkError::BadProbabilities(_))));
        let zero = JumpModel::new(
            1,
            1.0,
            JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.25), (vec![0], 0.25)]),
        );
        assert_eq!(zero.unwrap_err(), WalkError::ZeroJumpInSupport);
        let sub = JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![2], 0.5), (vec![-2], 0.5)]));
        assert!(matches!(sub, Err(WalkError::ReducibleSupport(_))));
        let one_sided = JumpModel::new(1, 1.0, JumpLaw::FiniteSupport(vec![(vec![1], 1.0)]));
        assert!(matches!(one_sided, Err(WalkError::ReducibleSupport(_))));
        let q0 = JumpModel::new(1, 0.0, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)]));
        assert!(matches!(q0, Err(WalkError::InvalidModel(_))));
    }

    #[test]
    fn lattice_index() {
        assert_eq!(lattice_rank_and_index(2, &[vec![2, 0], vec![-1, 0], vec![0, 1]]), (2, 1));
        assert_eq!(lattice_rank_and_index(2, &[vec![1, 1], vec![1, -1]]), (2, 2));
        assert_eq!(lattice_rank_and_index(2, &[vec![2, 4], vec![1, 2]]).0, 1);
        assert_eq!(lattice_rank_and_index(3, &[vec![1, 1, 1], vec![1, 1, -1], vec![2, 1, 1], vec![1, 2, 1]]), (3, 1));
    }

    #[test]
    fn log_mgf_examples() {
        let m = symmetric_1d(1.0);
        assert_eq!(m.log_mgf(&[0.0]).unwrap(), 0.0);
        assert!((m.log_mgf(&[1.0]).unwrap() - (1f64.cosh() - 1.0)).abs() < 1e-13);
        let m2 = example_2a(2.0);
        let s = [3f64.acosh(), 0.0];
        assert!((m2.log_mgf(&s).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn grad_examples() {
        let m = symmetric_1d(1.0);
        assert_eq!(m.grad_log_mgf(&[0.0]).unwrap(), vec![0.0]);
        assert!((m.grad_log_mgf(&[1.0]).unwrap()[0] - 1f64.sinh()).abs() < 1e-13);

        // Example 2b, nu = 1, q = 3: right axis crossing solves 3a^3 - 6a + 1 = 0.
        let m = example_2b(3.0);
        let f = |a: f64| 3.0 * a.powi(3) - 6.0 * a + 1.0;
        let (mut lo, mut hi) = (1.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 { lo = mid } else { hi = mid }
        }
        let r1 = lo.ln();
        assert!((r1 - 0.279199).abs() < 1e-6);
        assert!((m.log_mgf(&[r1, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let g = m.grad_log_mgf(&[r1, 0.0]).unwrap();
        let expected = 3.0 * ((2.0 * r1).exp() - (-r1).exp() / 6.0);
        assert!((g[0] - expected).abs() < 1e-12);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn char_fn_examples() {
        let m = symmetric_1d(1.0);
        for &t in &[0.0, 0.3, 1.7, -2.5] {
            let phi = m.char_fn(&[t]);
            assert!((phi.re - t.cos()).abs() < 1e-15 && phi.im.abs() < 1e-15);
        }
        let (s1, s2) = (2.0, 1.0);
        let m = JumpModel::new(
            2,
            8.0,
            JumpLaw::AxisMixture(vec![
                (0.5, Marginal::DisplacedPoisson { sigma_plus: s1, sigma_minus: s2, p_plus: 0.5, p_minus: 0.5 }),
                (0.5, Marginal::Rademacher),
            ]),
        )
        .unwrap();
        let th = [0.7f64, -1.1];
        let i = Complex::new(0.0, 1.0);
        let e1 = Complex::new(0.0, th[0]);
        let expected = ((i * th[0]).exp() - 1.0).scale(s1).exp() * (e1.exp()) * 0.25
            + (((-i * th[0]).exp() - 1.0).scale(s2) - e1).exp() * 0.25
            + th[1].cos() * 0.5;
        let got = m.char_fn(&th);
        assert!((got - expected).norm() < 1e-14);
        assert!((m.char_fn(&[0.0, 0.0]) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn drift_examples() {
        assert_eq!(symmetric_1d(1.0).drift(), vec![0.0]);
        let d = example_2b(3.0).drift();
        assert!((d[0] - 2.5).abs() < 1e-14 && d[1].abs() < 1e-15);
        let (s1, s2, q) = (2.0f64, 1.0, 8.0);
        let m = JumpModel::new(
            2,
            q,
            JumpLaw::AxisMixture(vec![
                (0.5, Marginal::DisplacedPoisson { sigma_plus: s1, sigma_minus: s2, p_plus: 0.5, p_minus: 0.5 }),
                (0.5, Marginal::Rademacher),
            ]),
        )
        .unwrap();
        let d = m.drift();
        assert!((d[0] - q * ((s1 + 1.0) / 4.0 - (s2 + 1.0) / 4.0)).abs() < 1e-13);
    }

    #[test]
    fn overflow_is_range_error() {
        let m = symmetric_1d(1.0);
        assert!(matches!(m.log_mgf(&[800.0]), Err(WalkError::RangeError { .. })));
        let dp = JumpModel::new(
            1,
            1.0,
            JumpLaw::ProductMarginals(vec![Marginal::DisplacedPoisson {
                sigma_plus: 2.0,
                sigma_minus: 1.0,
                p_plus: 0.5,
                p_minus: 0.5,
            }]),
        )
        .unwrap();
        assert!(matches!(dp.log_mgf(&[6.0]), Err(WalkError::RangeError { .. })));
        assert!(dp.log_mgf(&[5.0]).is_ok());
    }

    #[test]
    fn tilt_of_drifting_walk() {
        let m = example_2b(3.0);
        let g = m.grad_log_mgf(m.tilt()).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        assert!(m.min_log_mgf() < 0.0);
        assert_eq!(symmetric_1d(1.0).tilt(), &[0.0]);
    }

    #[test]
    fn displaced_poisson_sample_mean() {
        let m = JumpModel::new(
            1,
            1.0,
            JumpLaw::ProductMarginals(vec![Marginal::DisplacedPoisson {
                sigma_plus: 2.0,
                sigma_minus: 1.0,
                p_plus: 0.5,
                p_minus: 0.5,
            }]),
        )
        .unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut out = [0i64];
        for _ in 0..n {
            m.sample_jump(&mut rng, &mut out);
            assert_ne!(out[0], 0);
            let x = out[0] as f64;
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn product_marginals_sample_in_support() {
        let m = JumpModel::new(
            3,
            1.0,
            JumpLaw::ProductMarginals(vec![
                Marginal::DisplacedPoisson { sigma_plus: 0.2, sigma_minus: 0.2, p_plus: 0.5, p_minus: 0.5 },
                Marginal::DisplacedPoisson { sigma_plus: 0.5, sigma_minus: 0.5, p_plus: 0.5, p_minus: 0.5 },
                Marginal::Rademacher,
            ]),
        )
        .unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..10_000 {
            let y = m.sample_jump_vec(&mut rng);
            assert!(y[0] != 0 && y[1] != 0);
            assert!(y[2] == 1 || y[2] == -1);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let m: JumpModel<f32> =
            JumpModel::new(1, 1.0f32, JumpLaw::FiniteSupport(vec![(vec![1], 0.5), (vec![-1], 0.5)])).unwrap();
        assert!((m.log_mgf(&[1.0f32]).unwrap() - (1f32.cosh() - 1.0)).abs() < 1e-6);
    }
}
