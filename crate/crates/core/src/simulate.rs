//! Continuous-time simulation of the catalytic branching walk, the weighted
//! single-walk estimator of the many-to-one identity, and statistics of the
//! normalised cloud `X_v(t) / t` against the front.
//!
//! Runs advance checkpoint to checkpoint. At a checkpoint the population is
//! stored as counts per site: particles sharing a site are exchangeable and
//! every clock is memoryless, so the process restarted from the counts has
//! the same law. Between checkpoints each particle and its descendants are
//! followed exactly, depth first, on the replicate's single RNG stream.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Bernoulli, Distribution, Exp1, Geometric, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use thiserror::Error;

use crate::front::{FrontError, FrontModel};
use crate::lattice_walk::{AliasTable, JumpModel};
use crate::malthus::{CatalyticSystem, OffspringLaw};

/// Largest dimension the simulator handles.
pub const MAX_SIM_DIMENSION: usize = 3;
pub const DEFAULT_MAX_POPULATION: u64 = 5_000_000;
pub const DEFAULT_MAX_EVENTS: u64 = 500_000_000;

type Site = [i64; MAX_SIM_DIMENSION];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation supports dimensions 1 to {MAX_SIM_DIMENSION}, got {0}")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("population cap exceeded; trace kept up to t = {}", .trace.completed_time)]
    PopulationCapExceeded { trace: Box<SimulationTrace> },
    #[error("event cap exceeded; trace kept up to t = {}", .trace.completed_time)]
    EventCapExceeded { trace: Box<SimulationTrace> },
    #[error("snapshot holds no particles")]
    EmptySnapshot,
    #[error("every trace is extinct inside the fitting window")]
    AllExtinct,
    #[error(transparent)]
    Front(#[from] FrontError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Caps {
    pub max_population: u64,
    pub max_events: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_population: DEFAULT_MAX_POPULATION,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    PopulationCap,
    EventCap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventSummary {
    pub jumps: u64,
    pub branchings: u64,
    pub offspring: u64,
    /// Branchings that left no offspring.
    pub deaths: u64,
}

impl EventSummary {
    pub fn total(&self) -> u64 {
        self.jumps + self.branchings
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSnapshot {
    pub time: f64,
    pub dimension: usize,
    /// Occupied sites in lexicographic order with their particle counts.
    pub counts: Vec<(Vec<i64>, u64)>,
}

impl ParticleSnapshot {
    pub fn population(&self) -> u64 {
        self.counts.iter().map(|c| c.1).sum()
    }

    /// One entry per particle.
    pub fn positions(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.counts
            .iter()
            .flat_map(|(site, n)| std::iter::repeat_n(site.as_slice(), *n as usize))
    }

    /// Counts for the sites inside the box `[lo, hi]`.
    pub fn window_counts(&self, lo: &[i64], hi: &[i64]) -> Vec<(Vec<i64>, u64)> {
        self.counts
            .iter()
            .filter(|(s, _)| s.iter().zip(lo).zip(hi).all(|((x, a), b)| a <= x && x <= b))
            .cloned()
            .collect()
    }
}

/// Box spanned by the catalysts, widened by 10 in every direction.
pub fn default_window(system: &CatalyticSystem) -> (Vec<i64>, Vec<i64>) {
    let d = system.model().dimension();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for c in system.catalysts() {
        for i in 0..d {
            lo[i] = lo[i].min(c.position[i] - 10);
            hi[i] = hi[i].max(c.position[i] + 10);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub seed: u64,
    pub replicate: u64,
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    /// `mu(t)` at each checkpoint reached.
    pub population: Vec<u64>,
    pub snapshots: Vec<ParticleSnapshot>,
    /// Total particle time spent at each catalyst up to `completed_time`.
    pub local_time: Vec<f64>,
    pub events: EventSummary,
    pub survived: bool,
    /// Some catalyst was occupied after `horizon / 2`.
    pub visited_catalyst_late: bool,
    pub completed_time: f64,
    pub truncated: Option<Truncation>,
}

enum OffspringSampler {
    Fixed(u64),
    Binary(Bernoulli),
    Geometric(Geometric),
    Poisson(Poisson<f64>),
}

impl OffspringSampler {
    fn new(law: &OffspringLaw) -> Self {
        match *law {
            OffspringLaw::Deterministic(k) => Self::Fixed(k),
            OffspringLaw::Binary { p0 } => Self::Binary(Bernoulli::new(1.0 - p0).expect("validated p0")),
            OffspringLaw::Geometric { p } if p >= 1.0 => Self::Fixed(0),
            OffspringLaw::Geometric { p } => Self::Geometric(Geometric::new(p).expect("validated p")),
            OffspringLaw::Poisson { mean } if mean <= 0.0 => Self::Fixed(0),
            OffspringLaw::Poisson { mean } => Self::Poisson(Poisson::new(mean).expect("validated mean")),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Fixed(k) => *k,
            Self::Binary(b) => 2 * u64::from(b.sample(rng)),
            Self::Geometric(g) => g.sample(rng),
            Self::Poisson(p) => p.sample(rng) as u64,
        }
    }
}

struct Rule {
    site: Site,
    beta: f64,
    alpha: f64,
    offspring: OffspringSampler,
}

/// Counts per site: a dense box around the origin with a map for the rest.
struct SiteCounts {
    d: usize,
    radius: i64,
    side: i64,
    dense: Vec<u64>,
    touched: Vec<usize>,
    overflow: HashMap<Site, u64>,
}

impl SiteCounts {
    fn new(d: usize) -> Self {
        let radius: i64 = match d {
            1 => 1 << 15,
            2 => 255,
            _ => 40,
        };
        let side = 2 * radius + 1;
        Self {
            d,
            radius,
            side,
            dense: vec![0; side.pow(d as u32) as usize],
            touched: Vec::new(),
            overflow: HashMap::new(),
        }
    }

    #[inline]
    fn index(&self, x: &Site) -> Option<usize> {
        let mut idx = 0i64;
        for i in (0..self.d).rev() {
            let c = x[i] + self.radius;
            if c < 0 || c >= self.side {
                return None;
            }
            idx = idx * self.side + c;
        }
        Some(idx as usize)
    }

    #[inline]
    fn add(&mut self, x: &Site, n: u64) {
        match self.index(x) {
            Some(i) => {
                if self.dense[i] == 0 {
                    self.touched.push(i);
                }
                self.dense[i] += n;
            }
            None => *self.overflow.entry(*x).or_insert(0) += n,
        }
    }

    /// Empties the table and returns its entries sorted by site.
    fn drain_sorted(&mut self) -> Vec<(Site, u64)> {
        let mut out = Vec::with_capacity(self.touched.len() + self.overflow.len());
        for &i in &self.touched {
            let mut rest = i as i64;
            let mut site = [0; MAX_SIM_DIMENSION];
            for s in site.iter_mut().take(self.d) {
                *s = rest % self.side - self.radius;
                rest /= self.side;
            }
            out.push((site, self.dense[i]));
            self.dense[i] = 0;
        }
        self.touched.clear();
        out.extend(self.overflow.drain());
        out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

pub type SimRng = Xoshiro256PlusPlus;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, replicate, stream)`: the three words are folded
/// through SplitMix64 and the result seeds Xoshiro256++.
pub fn replicate_rng(seed: u64, replicate: u64, stream: u64) -> SimRng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ stream);
    SimRng::seed_from_u64(key)
}

/// `Exp(rate)` holding time.
#[inline]
pub fn holding_time<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

fn to_site(x: &[i64]) -> Site {
    let mut s = [0; MAX_SIM_DIMENSION];
    s[..x.len()].copy_from_slice(x);
    s
}

fn check_dimension(model: &JumpModel) -> Result<usize, SimError> {
    let d = model.dimension();
    if d == 0 || d > MAX_SIM_DIMENSION {
        return Err(SimError::UnsupportedDimension(d));
    }
    Ok(d)
}

enum Stop {
    Population,
    Events,
}

/// Jump sampler for the inner loop: finite laws get a flat alias table.
enum Jumps {
    Table { alias: AliasTable, vectors: Vec<Site> },
    General,
}

/// Reusable simulation state for one system; buffers survive across
/// replicates.
pub struct Simulator<'a> {
    system: &'a CatalyticSystem,
    d: usize,
    q: f64,
    rules: Vec<Rule>,
    jumps: Jumps,
    next: SiteCounts,
    stack: Vec<(Site, f64)>,
}

impl<'a> Simulator<'a> {
    pub fn new(system: &'a CatalyticSystem) -> Result<Self, SimError> {
        let d = check_dimension(system.model())?;
        let rules = system
            .catalysts()
            .iter()
            .enumerate()
            .map(|(k, c)| Rule {
                site: to_site(&c.position),
                beta: system.beta(k),
                alpha: c.alpha,
                offspring: OffspringSampler::new(&c.offspring),
            })
            .collect();
        let jumps = match system.model().finite_atoms() {
            Some(atoms) => Jumps::Table {
                alias: AliasTable::new(atoms.iter().map(|a| a.1).collect()),
                vectors: atoms.iter().map(|a| to_site(&a.0)).collect(),
            },
            None => Jumps::General,
        };
        Ok(Self {
            system,
            d,
            q: system.model().q(),
            rules,
            jumps,
            next: SiteCounts::new(d),
            stack: Vec::new(),
        })
    }

    /// One replicate on stream `(seed, replicate)`.
    pub fn run(
        &mut self,
        horizon: f64,
        checkpoints: &[f64],
        caps: Caps,
        seed: u64,
        replicate: u64,
    ) -> Result<SimulationTrace, SimError> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SimError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if checkpoints.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
            return Err(SimError::InvalidArgument("checkpoints must lie in [0, horizon]".into()));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidArgument("checkpoints must be strictly increasing".into()));
        }
        let mut rng = replicate_rng(seed, replicate, 0);
        let mut trace = SimulationTrace {
            seed,
            replicate,
            horizon,
            checkpoints: checkpoints.to_vec(),
            population: Vec::with_capacity(checkpoints.len()),
            snapshots: Vec::with_capacity(checkpoints.len()),
            local_time: vec![0.0; self.rules.len()],
            events: EventSummary::default(),
            survived: true,
            visited_catalyst_late: false,
            completed_time: 0.0,
            truncated: None,
        };
        let mut current: Vec<(Site, u64)> = vec![(to_site(self.system.start()), 1)];
        let mut boundaries: Vec<f64> = checkpoints.to_vec();
        if boundaries.last() != Some(&horizon) {
            boundaries.push(horizon);
        }
        let mut t0 = 0.0;
        let mut live: u64 = 1;
        for &t1 in &boundaries {
            if t1 > t0 {
                let mut epoch = Epoch {
                    t0,
                    t1,
                    t_half: 0.5 * horizon,
                    caps,
                    bound: live,
                    events: trace.events,
                    local_time: trace.local_time.clone(),
                    late: trace.visited_catalyst_late,
                };
                let outcome = match self.d {
                    1 => self.run_epoch::<1>(&current, &mut epoch, &mut rng),
                    2 => self.run_epoch::<2>(&current, &mut epoch, &mut rng),
                    _ => self.run_epoch::<3>(&current, &mut epoch, &mut rng),
                };
                let next = self.next.drain_sorted();
                if let Err(stop) = outcome {
                    trace.survived = live > 0;
                    trace.completed_time = t0;
                    return Err(match stop {
                        Stop::Population => {
                            trace.truncated = Some(Truncation::PopulationCap);
                            SimError::PopulationCapExceeded { trace: Box::new(trace) }
                        }
                        Stop::Events => {
                            trace.truncated = Some(Truncation::EventCap);
                            SimError::EventCapExceeded { trace: Box::new(trace) }
                        }
                    });
                }
                trace.events = epoch.events;
                trace.local_time = epoch.local_time;
                trace.visited_catalyst_late = epoch.late;
                current = next;
                live = current.iter().map(|c| c.1).sum();
                t0 = t1;
            }
            if checkpoints.binary_search_by(|c| c.total_cmp(&t1)).is_ok() {
                trace.population.push(live);
                trace.snapshots.push(ParticleSnapshot {
                    time: t1,
                    dimension: self.d,
                    counts: current.iter().map(|(s, n)| (s[..self.d].to_vec(), *n)).collect(),
                });
            }
        }
        trace.completed_time = horizon;
        trace.survived = live > 0;
        Ok(trace)
    }

    /// Follows every particle of `current` and its descendants to the end of
    /// the epoch, depth first, and deposits the survivors in `self.next`.
    fn run_epoch<const D: usize>(
        &mut self,
        current: &[(Site, u64)],
        epoch: &mut Epoch,
        rng: &mut SimRng,
    ) -> Result<(), Stop> {
        let Simulator {
            system,
            q,
            rules,
            jumps,
            next,
            stack,
            ..
        } = self;
        let rules: &[Rule] = rules;
        let (t0, t1, t_half) = (epoch.t0, epoch.t1, epoch.t_half);
        let inv_q = 1.0 / *q;
        let max_events = epoch.caps.max_events;
        let max_population = epoch.caps.max_population;
        let mut events = epoch.events.total();
        let mut ev = epoch.events;
        let mut bound = epoch.bound;
        let mut late = epoch.late;
        let mut local_time = std::mem::take(&mut epoch.local_time);
        let table = match jumps {
            Jumps::Table { alias, vectors } => Some((&*alias, vectors.as_slice())),
            Jumps::General => None,
        };
        let mut result = Ok(());
        'sites: for &(site, count) in current {
            for _ in 0..count {
                stack.push((site, t0));
                while let Some((mut x, mut t)) = stack.pop() {
                    let survives = loop {
                        if events > max_events {
                            result = Err(Stop::Events);
                            break 'sites;
                        }
                        match rules.iter().position(|r| r.site[..D] == x[..D]) {
                            None => {
                                let e: f64 = rng.sample(Exp1);
                                t += e * inv_q;
                                if t >= t1 {
                                    break true;
                                }
                            }
                            Some(k) => {
                                let rule = &rules[k];
                                let e: f64 = rng.sample(Exp1);
                                let end = t + e / rule.beta;
                                let stay = end.min(t1);
                                local_time[k] += stay - t;
                                late |= stay > t_half;
                                if end >= t1 {
                                    break true;
                                }
                                t = end;
                                if rng.random::<f64>() < rule.alpha {
                                    let n = rule.offspring.sample(rng);
                                    ev.branchings += 1;
                                    ev.offspring += n;
                                    events += 1;
                                    if n == 0 {
                                        ev.deaths += 1;
                                        break false;
                                    }
                                    bound += n - 1;
                                    if bound > max_population {
                                        result = Err(Stop::Population);
                                        break 'sites;
                                    }
                                    for _ in 1..n {
                                        stack.push((x, t));
                                    }
                                    continue;
                                }
                            }
                        }
                        match table {
                            Some((alias, vectors)) => {
                                let y = &vectors[alias.sample(rng)];
                                for i in 0..D {
                                    x[i] += y[i];
                                }
                            }
                            None => {
                                let mut y = [0i64; MAX_SIM_DIMENSION];
                                system.model().sample_jump(rng, &mut y[..D]);
                                for i in 0..D {
                                    x[i] += y[i];
                                }
                            }
                        }
                        ev.jumps += 1;
                        events += 1;
                    };
                    if survives {
                        next.add(&x, 1);
                    }
                }
            }
        }
        stack.clear();
        epoch.local_time = local_time;
        epoch.events = ev;
        epoch.bound = bound;
        epoch.late = late;
        result
    }
}

struct Epoch {
    t0: f64,
    t1: f64,
    t_half: f64,
    caps: Caps,
    /// Live particles at the epoch start plus every offspring surplus so far;
    /// bounds the population at all times in the epoch.
    bound: u64,
    events: EventSummary,
    local_time: Vec<f64>,
    late: bool,
}

/// Single replicate on stream `(seed, 0)`.
pub fn run_cbrw(
    system: &CatalyticSystem,
    horizon: f64,
    checkpoints: &[f64],
    caps: Caps,
    seed: u64,
) -> Result<SimulationTrace, SimError> {
    Simulator::new(system)?.run(horizon, checkpoints, caps, seed, 0)
}

/// Replicates `0..count` in order, handing each result to `visit`.
pub fn run_replicates(
    system: &CatalyticSystem,
    horizon: f64,
    checkpoints: &[f64],
    caps: Caps,
    seed: u64,
    count: u64,
    mut visit: impl FnMut(u64, Result<SimulationTrace, SimError>) -> Result<(), SimError>,
) -> Result<(), SimError> {
    let mut sim = Simulator::new(system)?;
    for r in 0..count {
        let res = sim.run(horizon, checkpoints, caps, seed, r);
        visit(r, res)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkSample {
    pub position: Vec<i64>,
    pub weight: f64,
    pub local_times: Vec<f64>,
}

/// The catalyst-free walk (rate `q` everywhere) run for time `t`, weighted by
/// `exp(sum_k alpha_k beta_k (m_k - 1) L(t; w_k))`.
pub fn local_time_walk(system: &CatalyticSystem, t: f64, seed: u64) -> Result<WalkSample, SimError> {
    let mut rng = replicate_rng(seed, 0, 1);
    local_time_walk_with(system, t, &mut rng)
}

pub fn local_time_walk_with<R: Rng + ?Sized>(
    system: &CatalyticSystem,
    t: f64,
    rng: &mut R,
) -> Result<WalkSample, SimError> {
    let d = check_dimension(system.model())?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SimError::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let model = system.model();
    let q = model.q();
    let sites: Vec<Site> = system.catalysts().iter().map(|c| to_site(&c.position)).collect();
    let mut local = vec![0.0; sites.len()];
    let mut x = to_site(system.start());
    let mut jump = [0i64; MAX_SIM_DIMENSION];
    let mut now = 0.0;
    loop {
        let next = now + holding_time(rng, q);
        let stop = next.min(t);
        if let Some(k) = sites.iter().position(|s| *s == x) {
            local[k] += stop - now;
        }
        if next >= t {
            break;
        }
        now = next;
        model.sample_jump(rng, &mut jump[..d]);
        for i in 0..d {
            x[i] += jump[i];
        }
    }
    let exponent: f64 = (0..sites.len())
        .map(|k| {
            let c = &system.catalysts()[k];
            c.alpha * system.beta(k) * (system.mean_offspring(k) - 1.0) * local[k]
        })
        .sum();
    Ok(WalkSample {
        position: x[..d].to_vec(),
        weight: exponent.exp(),
        local_times: local,
    })
}

/// Test functions for the many-to-one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    /// Indicator of `<normal, x> >= offset`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[i64]) -> f64 {
        match self {
            Self::One => 1.0,
            Self::HalfSpace { normal, offset } => {
                let v: f64 = normal.iter().zip(x).map(|(a, &b)| a * b as f64).sum();
                if v >= *offset {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManyToOne {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn z_score(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let s = (sa * sa + sb * sb).sqrt();
    if s > 0.0 {
        (a - b) / s
    } else if a == b {
        0.0
    } else {
        f64::INFINITY.copysign(a - b)
    }
}

/// Left side: sum of `g` over particles of independent branching runs. Right
/// side: `g(S(t))` times the local-time weight of independent single walks.
pub fn many_to_one_estimate(
    system: &CatalyticSystem,
    t: f64,
    g: &TestFunction,
    runs: u64,
    seed: u64,
    caps: Caps,
) -> Result<ManyToOne, SimError> {
    if runs < 100 {
        return Err(SimError::InvalidArgument(format!("at least 100 runs are required, got {runs}")));
    }
    let mut lhs = Moments::default();
    let mut sim = Simulator::new(system)?;
    for r in 0..runs {
        let trace = if t > 0.0 {
            sim.run(t, &[t], caps, seed, r)?
        } else {
            sim.run(1.0, &[0.0], caps, seed, r)?
        };
        let snap = &trace.snapshots[0];
        lhs.push(snap.counts.iter().map(|(x, n)| g.eval(x) * *n as f64).sum());
    }
    let mut rhs = Moments::default();
    for r in 0..runs {
        let mut rng = replicate_rng(seed, r, 1);
        let w = local_time_walk_with(system, t, &mut rng)?;
        rhs.push(g.eval(&w.position) * w.weight);
    }
    Ok(ManyToOne {
        lhs_mean: lhs.mean,
        lhs_se: lhs.se(),
        rhs_mean: rhs.mean,
        rhs_se: rhs.se(),
        z_score: z_score(lhs.mean, lhs.se(), rhs.mean, rhs.se()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfCheck {
    pub empirical_mean: f64,
    pub standard_error: f64,
    pub predicted: f64,
    pub z_score: f64,
}

/// Empirical `E_0 exp<s, S(t)>` against `exp(t H(s))`.
pub fn empirical_mgf_check(
    model: &JumpModel,
    t: f64,
    s: &[f64],
    runs: u64,
    seed: u64,
) -> Result<MgfCheck, SimError> {
    let d = check_dimension(model)?;
    if s.len() != d || !(t >= 0.0) || runs == 0 {
        return Err(SimError::InvalidArgument("bad time, tilt length or run count".into()));
    }
    let h = model.log_mgf(s).map_err(|e| SimError::InvalidArgument(e.to_string()))?;
    let predicted = (t * h).exp();
    if !(predicted < 1e6) {
        return Err(SimError::InvalidArgument(format!(
            "exp(t H(s)) = {predicted:.3e} is too large for a variance-controlled estimate"
        )));
    }
    let mut rng = replicate_rng(seed, 0, 2);
    let mean_jumps = model.q() * t;
    let count = (mean_jumps > 0.0).then(|| Poisson::new(mean_jumps).expect("positive mean"));
    let mut jump = [0i64; MAX_SIM_DIMENSION];
    let mut acc = Moments::default();
    for _ in 0..runs {
        let n = count.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        let mut x = [0i64; MAX_SIM_DIMENSION];
        for _ in 0..n {
            model.sample_jump(&mut rng, &mut jump[..d]);
            for i in 0..d {
                x[i] += jump[i];
            }
        }
        let e: f64 = (0..d).map(|i| s[i] * x[i] as f64).sum();
        acc.push(e.exp());
    }
    Ok(MgfCheck {
        empirical_mean: acc.mean,
        standard_error: acc.se(),
        predicted,
        z_score: z_score(acc.mean, acc.se(), predicted, 0.0),
    })
}

pub const SECTORS: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotSpread {
    pub time: f64,
    pub population: u64,
    pub max_margin: f64,
    /// Per epsilon: fraction of particles with margin above `eps`.
    pub outside_fraction: Vec<f64>,
    /// Per epsilon: some particle has margin above `-eps`.
    pub near_front: Vec<bool>,
    /// Per epsilon, `d = 2` only: fraction of the angular sectors holding a
    /// particle with margin above `-eps`.
    pub sector_coverage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadReport {
    pub epsilon_fracs: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Per snapshot.
    pub max_margin: Vec<f64>,
    /// Per epsilon, averaged over snapshots.
    pub outside_fraction: Vec<f64>,
    /// Per epsilon, share of snapshots with a near-front particle.
    pub near_front_rate: Vec<f64>,
    /// Per epsilon, averaged over snapshots; `d = 2` only.
    pub sector_coverage: Option<Vec<f64>>,
    pub snapshots: Vec<SnapshotSpread>,
}

/// Margins of `X_v(t) / t` against the front, with `eps = frac * nu`.
pub fn spread_statistics(
    snapshots: &[ParticleSnapshot],
    front: &FrontModel,
    epsilon_fracs: &[f64],
) -> Result<SpreadReport, SimError> {
    let nu = front.nu();
    let epsilons: Vec<f64> = epsilon_fracs.iter().map(|f| f * nu).collect();
    let mut per = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        per.push(snapshot_spread(snap, front, &epsilons)?);
    }
    let n = per.len().max(1) as f64;
    let ne = epsilons.len();
    let outside_fraction = (0..ne).map(|e| per.iter().map(|p| p.outside_fraction[e]).sum::<f64>() / n).collect();
    let near_front_rate = (0..ne)
        .map(|e| per.iter().filter(|p| p.near_front[e]).count() as f64 / n)
        .collect();
    let sector_coverage = (front.dimension() == 2).then(|| {
        (0..ne)
            .map(|e| per.iter().map(|p| p.sector_coverage.as_ref().map_or(0.0, |c| c[e])).sum::<f64>() / n)
            .collect()
    });
    Ok(SpreadReport {
        epsilon_fracs: epsilon_fracs.to_vec(),
        epsilons,
        max_margin: per.iter().map(|p| p.max_margin).collect(),
        outside_fraction,
        near_front_rate,
        sector_coverage,
        snapshots: per,
    })
}

pub fn snapshot_spread(
    snap: &ParticleSnapshot,
    front: &FrontModel,
    epsilons: &[f64],
) -> Result<SnapshotSpread, SimError> {
    let population = snap.population();
    if population == 0 {
        return Err(SimError::EmptySnapshot);
    }
    if !(snap.time > 0.0) {
        return Err(SimError::InvalidArgument("spread needs a snapshot time > 0".into()));
    }
    if snap.dimension != front.dimension() {
        return Err(SimError::InvalidArgument("snapshot and front dimensions differ".into()));
    }
    let ne = epsilons.len();
    let mut max_margin = f64::NEG_INFINITY;
    let mut outside = vec![0u64; ne];
    let mut near = vec![false; ne];
    let mut sectors = vec![vec![false; SECTORS]; ne];
    let mut scaled = vec![0.0; snap.dimension];
    for (site, count) in &snap.counts {
        for (s, &x) in scaled.iter_mut().zip(site) {
            *s = x as f64 / snap.time;
        }
        let m = front.support_margin(&scaled)?;
        max_margin = max_margin.max(m);
        let sector = (snap.dimension == 2 && site.iter().any(|&v| v != 0)).then(|| {
            let a = (site[1] as f64).atan2(site[0] as f64).rem_euclid(std::f64::consts::TAU);
            ((a / std::f64::consts::TAU * SECTORS as f64) as usize).min(SECTORS - 1)
        });
        for (e, &eps) in epsilons.iter().enumerate() {
            if m > eps {
                outside[e] += count;
            }
            if m > -eps {
                near[e] = true;
                if let Some(k) = sector {
                    sectors[e][k] = true;
                }
            }
        }
    }
    Ok(SnapshotSpread {
        time: snap.time,
        population,
        max_margin,
        outside_fraction: outside.iter().map(|&o| o as f64 / population as f64).collect(),
        near_front: near,
        sector_coverage: (snap.dimension == 2).then(|| {
            sectors
                .iter()
                .map(|s| s.iter().filter(|&&b| b).count() as f64 / SECTORS as f64)
                .collect()
        }),
    })
}

/// Least-squares slope of `ln(mean mu(t))` over the checkpoints in
/// `[t_a, t_b]`.
pub fn growth_rate_fit(traces: &[SimulationTrace], window: (f64, f64)) -> Result<f64, SimError> {
    if traces.len() < 100 {
        return Err(SimError::InvalidArgument(format!(
            "at least 100 traces are required, got {}",
            traces.len()
        )));
    }
    let checkpoints = &traces[0].checkpoints;
    if traces.iter().any(|t| t.checkpoints != *checkpoints || t.truncated.is_some()) {
        return Err(SimError::InvalidArgument(
            "traces must be complete and share their checkpoints".into(),
        ));
    }
    let (ta, tb) = window;
    if tb > traces[0].horizon {
        return Err(SimError::InvalidArgument("window ends after the horizon".into()));
    }
    let mut pts = Vec::new();
    for (i, &t) in checkpoints.iter().enumerate() {
        if t >= ta && t <= tb {
            let mean = traces.iter().map(|tr| tr.population[i] as f64).sum::<f64>() / traces.len() as f64;
            if mean == 0.0 {
                return Err(SimError::AllExtinct);
            }
            pts.push((t, mean.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(SimError::InvalidArgument("window holds fewer than two checkpoints".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(sxy / sxx)
}
