//! Monte Carlo observables: survival curves, invariant-law densities,
//! magnetisation with a frozen boundary, clustering and convergence tests.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::duality::InitLaw;
use crate::error::{Error, Result};
use crate::graphical::{evolve, flow, relevance_set, sample_events, EventSampler, Stepper};
use crate::lattice::{Alphabet, Configuration, Lattice, LatticeSpec};
use crate::models::{contact, ising_glauber, ModelSpec};
use crate::rng::{derive_seed, par_replicas, Rng};
use crate::stats::{mean_se, two_sample_z, wilson, MeanSe, Proportion};

/// One-dimensional survival experiment: a ring of `len` sites started from a
/// single infected site in the middle, observed up to `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPlan {
    pub len: usize,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPoint {
    pub lambda: f64,
    pub theta: Proportion,
    /// Replicas whose infection reached the edge of the box.
    pub truncated: u64,
}

impl ThetaPoint {
    pub fn truncated_frac(&self) -> f64 {
        self.truncated as f64 / self.theta.trials as f64
    }
}

/// Lanes share one graphical representation with arrows at rate
/// `lambda_max`; an arrow with mark `u` is used by every lane with
/// `lambda > u lambda_max`. Events are only drawn on the hull of the top
/// lane's infection, where all other lanes live as well.
struct Lanes {
    /// `masks[k]` holds the lanes from rank `k` upwards.
    sorted: Vec<f64>,
    masks: Vec<u64>,
    all: u64,
    lambda_max: f64,
}

impl Lanes {
    fn new(lambdas: &[f64], lambda_max: f64) -> Self {
        let n = lambdas.len();
        let masks = (0..=n).map(|k| (if k >= 64 { 0 } else { !0u64 << k }) & mask_of(n)).collect();
        Self { sorted: lambdas.to_vec(), masks, all: mask_of(n), lambda_max }
    }

    #[inline]
    fn open(&self, u: f64) -> u64 {
        let t = u * self.lambda_max;
        self.masks[self.sorted.partition_point(|&l| l <= t)]
    }
}

fn mask_of(n: usize) -> u64 {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

/// Runs one replica; returns the masks of lanes alive at the horizon and of
/// lanes that reached the edge of the box.
fn survival_replica(lanes: &Lanes, len: usize, horizon: f64, rng: &mut Rng) -> (u64, u64) {
    let mut x = vec![0u64; len];
    let origin = len / 2;
    x[origin] = lanes.all;
    let (mut lo, mut hi) = (origin, origin);
    let mut wrapped = false;
    let mut alive = 1usize;
    let mut touched = 0u64;
    let per_site = 2.0 * lanes.lambda_max + 1.0;
    let mut t = 0.0;
    while alive > 0 {
        let width = hi - lo + 1;
        let e: f64 = Exp1.sample(rng);
        t += e / (width as f64 * per_site);
        if t > horizon {
            break;
        }
        let s = lo + rng.random_range(0..width);
        let v = rng.random::<f64>() * per_site;
        if v < 1.0 {
            if x[s] != 0 {
                x[s] = 0;
                alive -= 1;
                if !wrapped {
                    while lo < hi && x[lo] == 0 {
                        lo += 1;
                    }
                    while hi > lo && x[hi] == 0 {
                        hi -= 1;
                    }
                }
            }
            continue;
        }
        if x[s] == 0 {
            continue;
        }
        let v = v - 1.0;
        let (target, u) = if v < lanes.lambda_max {
            ((s + len - 1) % len, v / lanes.lambda_max)
        } else {
            ((s + 1) % len, (v - lanes.lambda_max) / lanes.lambda_max)
        };
        let add = x[s] & lanes.open(u);
        if add & !x[target] == 0 {
            continue;
        }
        if x[target] == 0 {
            alive += 1;
        }
        x[target] |= add;
        if target == 0 || target == len - 1 {
            touched |= x[target];
        }
        if !wrapped {
            if (s == 0 && target == len - 1) || (s == len - 1 && target == 0) {
                wrapped = true;
                lo = 0;
                hi = len - 1;
            } else {
                lo = lo.min(target);
                hi = hi.max(target);
            }
        }
    }
    let surv = x.iter().fold(0, |a, &v| a | v);
    (surv, touched)
}

fn check_plan(plan: &SurvivalPlan) -> Result<()> {
    if plan.len < 3 || plan.len % 2 == 0 {
        return Err(Error::Parameter(format!("survival box must be odd and >= 3, got {}", plan.len)));
    }
    if plan.replicas == 0 || !(plan.horizon >= 0.0) {
        return Err(Error::Parameter("need replicas >= 1 and horizon >= 0".into()));
    }
    Ok(())
}

/// Survival proxies at several infection rates on common random numbers.
/// The arrow rate of the shared representation is `lambda_max`, which must
/// bound every entry of `lambdas`.
pub fn theta_lanes(lambdas: &[f64], lambda_max: f64, plan: &SurvivalPlan) -> Result<Vec<ThetaPoint>> {
    check_plan(plan)?;
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("lambda grid must be sorted".into()));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0) || l > lambda_max) {
        return Err(Error::Parameter(format!("lambdas must lie in [0, {lambda_max}]")));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    // The top lane fixes the hull, so every chunk sees the same events.
    for chunk in lambdas.chunks(63) {
        let mut grid = chunk.to_vec();
        grid.push(lambda_max);
        let lanes = Lanes::new(&grid, lambda_max);
        let res = par_replicas(plan.seed, plan.replicas, |_, rng| {
            survival_replica(&lanes, plan.len, plan.horizon, rng)
        });
        for (k, &lambda) in chunk.iter().enumerate() {
            let bit = 1u64 << k;
            let s = res.iter().filter(|r| r.0 & bit != 0).count() as u64;
            let tr = res.iter().filter(|r| r.1 & bit != 0).count() as u64;
            out.push(ThetaPoint {
                lambda,
                theta: wilson(s, plan.replicas as u64, 1.96),
                truncated: tr,
            });
        }
    }
    Ok(out)
}

/// `θ(λ)` proxy: fraction of replicas still infected at the horizon.
pub fn survival_estimate(lambda: f64, plan: &SurvivalPlan) -> Result<ThetaPoint> {
    Ok(theta_lanes(&[lambda], lambda, plan)?[0])
}

/// Survival curve over a sorted grid; exactly nondecreasing in `λ`.
pub fn theta_curve(lambdas: &[f64], plan: &SurvivalPlan) -> Result<Vec<ThetaPoint>> {
    let top = lambdas.iter().copied().fold(0.0, f64::max);
    theta_lanes(lambdas, top, plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCBracket {
    pub lo: f64,
    pub hi: f64,
    pub threshold: f64,
    pub evaluations: Vec<ThetaPoint>,
}

/// Bisection for the rate at which the survival proxy crosses `threshold`.
/// All evaluations share one representation at rate `bracket.1`, so the
/// proxy is monotone along the search.
pub fn lambda_c_estimate(
    bracket: (f64, f64),
    tol: f64,
    threshold: f64,
    plan: &SurvivalPlan,
) -> Result<LambdaCBracket> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Parameter("need lo < hi and tol > 0".into()));
    }
    let mut evaluations = Vec::new();
    let ends = theta_lanes(&[lo, hi], hi, plan)?;
    evaluations.extend(&ends);
    if ends[0].theta.estimate > threshold || ends[1].theta.estimate <= threshold {
        return Err(Error::Parameter(format!(
            "bracket [{lo}, {hi}] does not straddle the threshold {threshold}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let p = theta_lanes(&[mid], bracket.1, plan)?[0];
        evaluations.push(p);
        if p.theta.estimate > threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaCBracket { lo, hi, threshold, evaluations })
}

/// Sizes `|X_T|` of the replicas that survive, for the extinction versus
/// unbounded growth diagnostic.
pub fn surviving_sizes(lambda: f64, plan: &SurvivalPlan) -> Result<Vec<usize>> {
    check_plan(plan)?;
    let lattice = Arc::new(Lattice::new(LatticeSpec::ring(plan.len))?);
    let model = contact(&lattice, lambda, 1.0)?;
    let sampler = EventSampler::new(&model)?;
    let sizes = par_replicas(plan.seed, plan.replicas, |_, rng| {
        let mut x = vec![0u8; plan.len];
        x[plan.len / 2] = 1;
        let mut st = Stepper::new(&model);
        for (k, e) in sampler.iter(rng, plan.horizon).enumerate() {
            st.step(&mut x, &e);
            if k % 4096 == 0 && x.iter().all(|&v| v == 0) {
                break;
            }
        }
        x.iter().map(|&v| v as usize).sum::<usize>()
    });
    Ok(sizes.into_iter().filter(|&s| s > 0).collect())
}

/// Fraction of survivors with `|X_T| > n` for each `n`.
pub fn growth_histogram(sizes: &[usize], levels: &[usize]) -> Vec<(usize, f64)> {
    levels
        .iter()
        .map(|&n| {
            let k = sizes.iter().filter(|&&s| s > n).count();
            (n, if sizes.is_empty() { f64::NAN } else { k as f64 / sizes.len() as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub t: f64,
    pub density: MeanSe,
}

/// Mean fraction of sites in state 1 at each sample time.
pub fn invariant_density(
    model: &ModelSpec,
    init: &InitLaw,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<DensityPoint>> {
    if times.windows(2).any(|w| w[1] < w[0]) || replicas == 0 {
        return Err(Error::Parameter("need sorted sample times and replicas >= 1".into()));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    let sampler = EventSampler::new(model)?;
    let n = model.n_sites();
    let dynamic: Vec<usize> = model.lattice.dynamic_sites().collect();
    let per: Vec<Vec<f64>> = par_replicas(seed, replicas, |_, rng| {
        let mut cfg = init.sample(n, rng);
        cfg.alphabet = model.alphabet;
        model.lattice.pin(&mut cfg);
        let mut x = cfg.states;
        let mut st = Stepper::new(model);
        let mut out = Vec::with_capacity(times.len());
        let mut k = 0;
        let dens = |x: &[u8]| dynamic.iter().filter(|&&i| x[i] == 1).count() as f64 / dynamic.len() as f64;
        for e in sampler.iter(rng, horizon) {
            while k < times.len() && times[k] < e.t {
                out.push(dens(&x));
                k += 1;
            }
            st.step(&mut x, &e);
        }
        while k < times.len() {
            out.push(dens(&x));
            k += 1;
        }
        out
    });
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let xs: Vec<f64> = per.iter().map(|r| r[k]).collect();
            DensityPoint { t, density: mean_se(&xs) }
        })
        .collect())
}

/// On one event stream, compares the state at `s + t` started from all ones
/// at time 0 with the one started from all ones at time `s`. For a monotone
/// model the first lies below the second at every site.
pub fn nested_ones_check(model: &ModelSpec, s: f64, t: f64, seed: u64) -> Result<bool> {
    let ev = sample_events(model, s + t, seed)?;
    let ones = model.uniform(model.alphabet.size() - 1).states;
    let mut a = ones.clone();
    flow(model, &mut a, &ev.events, 0.0, s + t);
    let mut b = ones;
    flow(model, &mut b, &ev.events, s, s + t);
    Ok(a.iter().zip(&b).all(|(x, y)| x <= y))
}

/// `(1 - sinh(β)^{-4})^{1/8}` above `β_c = log(1 + √2)`, zero below.
pub fn onsager_magnetization(beta: f64) -> f64 {
    let s = beta.sinh();
    if s <= 1.0 {
        return 0.0;
    }
    (1.0 - s.powi(-4)).powf(0.125)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnetization {
    pub beta: f64,
    pub side: usize,
    pub m_hat: MeanSe,
    pub onsager: f64,
}

/// Mean spin of the central site of an `l x l` Glauber box whose outer
/// layer is frozen at `+1`, averaged over `[T/2, T]` at spacing `dt`.
pub fn magnetization_frozen_boundary(
    beta: f64,
    l: usize,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<Magnetization> {
    if l < 2 || replicas == 0 || !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::Parameter("need L >= 2, replicas >= 1, T > 0 and dt > 0".into()));
    }
    let lattice = Arc::new(Lattice::new(LatticeSpec::frozen_box(2, l + 2, 1))?);
    let model = ising_glauber(&lattice, beta)?;
    let centre = lattice.index(&[(l + 2) / 2, (l + 2) / 2]);
    let sampler = EventSampler::new(&model)?;
    let means: Vec<f64> = par_replicas(seed, replicas, |_, rng| {
        let mut x = lattice.uniform(Alphabet::Spin, 1).states;
        let mut st = Stepper::new(&model);
        let mut next = horizon / 2.0;
        let (mut sum, mut k) = (0.0, 0usize);
        for e in sampler.iter(rng, horizon) {
            while next < e.t {
                sum += 2.0 * x[centre] as f64 - 1.0;
                k += 1;
                next += dt;
            }
            st.step(&mut x, &e);
        }
        while next <= horizon {
            sum += 2.0 * x[centre] as f64 - 1.0;
            k += 1;
            next += dt;
        }
        sum / k as f64
    });
    Ok(Magnetization { beta, side: l, m_hat: mean_se(&means), onsager: onsager_magnetization(beta) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPoint {
    pub t: f64,
    /// Fraction of nearest-neighbour edges with unequal endpoints.
    pub disagreement: MeanSe,
    /// `(size, count)` of same-state clusters, pooled over replicas.
    pub histogram: Vec<(usize, u64)>,
}

fn edges(lattice: &Lattice) -> Vec<(usize, usize)> {
    lattice
        .ordered_edges()
        .into_iter()
        .filter(|&(i, j)| i < j)
        .map(|(i, j)| (i as usize, j as usize))
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn cluster_sizes(x: &[u8], edges: &[(usize, usize)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..x.len()).collect();
    for &(i, j) in edges {
        if x[i] == x[j] {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut size = vec![0usize; x.len()];
    for i in 0..x.len() {
        let r = find(&mut parent, i);
        size[r] += 1;
    }
    size.into_iter().filter(|&s| s > 0).collect()
}

/// Neighbour disagreement and cluster sizes of a two-state model started
/// from product Bernoulli(`p`).
pub fn clustering_stats(
    model: &ModelSpec,
    p: f64,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<ClusterPoint>> {
    if model.alphabet.size() != 2 {
        return Err(Error::Alphabet("clustering statistics need a two-state model".into()));
    }
    if !(0.0..=1.0).contains(&p) || replicas == 0 {
        return Err(Error::Parameter("need p in [0, 1] and replicas >= 1".into()));
    }
    let e = edges(&model.lattice);
    if e.is_empty() {
        return Err(Error::Lattice("lattice has no edges".into()));
    }
    let n = model.n_sites();
    let per: Vec<Vec<(f64, Vec<usize>)>> = par_replicas(seed, replicas, |_, rng| {
        let x0 = Configuration {
            alphabet: model.alphabet,
            states: (0..n).map(|_| u8::from(rng.random::<f64>() < p)).collect(),
        };
        let horizon = times.last().copied().unwrap_or(0.0);
        let sampler = EventSampler::new(model).expect("validated model");
        let events = sampler.sample(rng, horizon);
        let traj = evolve(model, &x0, &events, times).expect("validated state");
        traj.states
            .iter()
            .map(|c| {
                let d = e.iter().filter(|&&(i, j)| c.states[i] != c.states[j]).count();
                (d as f64 / e.len() as f64, cluster_sizes(&c.states, &e))
            })
            .collect()
    });
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let d: Vec<f64> = per.iter().map(|r| r[k].0).collect();
            let mut hist = std::collections::BTreeMap::new();
            for r in &per {
                for &s in &r[k].1 {
                    *hist.entry(s).or_insert(0u64) += 1;
                }
            }
            ClusterPoint { t, disagreement: mean_se(&d), histogram: hist.into_iter().collect() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomConReport {
    pub from_ones: Vec<MeanSe>,
    pub from_product: Vec<MeanSe>,
    /// `z` statistic per observable: density, then pair occupation at
    /// distances 1 and 2.
    pub z: Vec<f64>,
    pub degenerate: bool,
    pub pass: bool,
}

/// Compares the contact process on a ring at time `T` started from all
/// ones and from product Bernoulli(`p`): density and `P[x(i) = 1 = x(i+d)]`
/// for `d = 1, 2`, each by a two-sample test at level `alpha`.
pub fn homogeneous_convergence_test(
    lambda: f64,
    p: f64,
    len: usize,
    horizon: f64,
    replicas: usize,
    seed: u64,
    alpha: f64,
) -> Result<HomConReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!("p must lie in (0, 1], got {p}")));
    }
    let lattice = Arc::new(Lattice::new(LatticeSpec::ring(len))?);
    let model = contact(&lattice, lambda, 1.0)?;
    let observe = |init: InitLaw, label: &str| -> Result<Vec<MeanSe>> {
        let rows: Vec<[f64; 3]> = par_replicas(derive_seed(seed, label), replicas, |_, rng| {
            let mut x = init.sample(len, rng).states;
            let ev = EventSampler::new(&model).expect("valid rates").sample(rng, horizon);
            let mut st = Stepper::new(&model);
            for e in &ev {
                st.step(&mut x, e);
            }
            let f = |d: usize| (0..len).filter(|&i| x[i] == 1 && x[(i + d) % len] == 1).count() as f64 / len as f64;
            [f(0), f(1), f(2)]
        });
        Ok((0..3).map(|k| mean_se(&rows.iter().map(|r| r[k]).collect::<Vec<_>>())).collect())
    };
    let a = observe(InitLaw::Ones, "ones")?;
    let b = observe(InitLaw::Bernoulli(p), "product")?;
    let degenerate = a[0].mean == 0.0 && b[0].mean == 0.0;
    let mut z = Vec::new();
    let mut pass = true;
    for k in 0..3 {
        let (zk, ok) = if a[k].se == 0.0 && b[k].se == 0.0 {
            (0.0, a[k].mean == b[k].mean)
        } else {
            two_sample_z(a[k], b[k], alpha)
        };
        z.push(zk);
        pass &= ok;
    }
    Ok(HomConReport { from_ones: a, from_product: b, z, degenerate, pass })
}

/// Mean size of the relevance set `ζ^{{site}, t}_0` at each time.
pub fn zeta_sizes(
    model: &ModelSpec,
    site: usize,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<(f64, MeanSe)>> {
    if site >= model.n_sites() {
        return Err(Error::SiteOutOfRange { site, n: model.n_sites() });
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let sampler = EventSampler::new(model)?;
    let per: Vec<Result<Vec<f64>>> = par_replicas(seed, replicas, |_, rng| {
        let events = sampler.sample(rng, horizon);
        times
            .iter()
            .map(|&t| relevance_set(model, &events, &[site], t, 0.0).map(|z| z.len() as f64))
            .collect()
    });
    let per: Vec<Vec<f64>> = per.into_iter().collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, mean_se(&per.iter().map(|r| r[k]).collect::<Vec<_>>())))
        .collect())
}

/// Redraws the initial state outside `ζ^{A,t}_0` and checks that the state
/// on `A` at time `t` does not change. Returns the number of mismatching
/// seeds.
pub fn relevance_forward_check(
    model: &ModelSpec,
    a: &[usize],
    t: f64,
    seeds: usize,
    seed: u64,
) -> Result<usize> {
    let n = model.n_sites();
    let q = model.alphabet.size();
    let sampler = EventSampler::new(model)?;
    let bad: Vec<Result<bool>> = par_replicas(seed, seeds, |_, rng| {
        let events = sampler.sample(rng, t);
        let zeta = relevance_set(model, &events, a, t, 0.0)?;
        let mut x: Vec<u8> = (0..n).map(|_| rng.random_range(0..q)).collect();
        let mut y: Vec<u8> = (0..n).map(|_| rng.random_range(0..q)).collect();
        for &i in &zeta {
            y[i] = x[i];
        }
        let mut cx = Configuration { alphabet: model.alphabet, states: x.clone() };
        let mut cy = Configuration { alphabet: model.alphabet, states: y.clone() };
        model.lattice.pin(&mut cx);
        model.lattice.pin(&mut cy);
        x = cx.states;
        y = cy.states;
        flow(model, &mut x, &events, 0.0, t);
        flow(model, &mut y, &events, 0.0, t);
        Ok(a.iter().any(|&i| x[i] != y[i]))
    });
    let mut count = 0;
    for b in bad {
        count += usize::from(b?);
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::voter;

    fn plan(len: usize, horizon: f64, replicas: usize) -> SurvivalPlan {
        SurvivalPlan { len, horizon, replicas, seed: 3 }
    }

    #[test]
    fn zero_rate_dies() {
        let p = survival_estimate(0.0, &plan(21, 10.0, 200)).unwrap();
        assert_eq!(p.theta.successes, 0);
    }

    #[test]
    fn curve_is_monotone() {
        let grid: Vec<f64> = (0..20).map(|k| 0.5 + 0.15 * k as f64).collect();
        let c = theta_curve(&grid, &plan(61, 20.0, 300)).unwrap();
        assert!(c.windows(2).all(|w| w[0].theta.successes <= w[1].theta.successes));
        assert!(c[0].theta.estimate < c[19].theta.estimate);
    }

    #[test]
    fn lanes_match_single_runs() {
        // A lane's result does not depend on which other lanes ride along.
        let pl = plan(41, 15.0, 100);
        let a = theta_lanes(&[1.2, 1.7], 2.5, &pl).unwrap();
        let b = theta_lanes(&[1.7], 2.5, &pl).unwrap();
        assert_eq!(a[1].theta.successes, b[0].theta.successes);
    }

    #[test]
    fn large_rate_survives() {
        let p = survival_estimate(20.0, &plan(401, 10.0, 200)).unwrap();
        assert!(p.theta.estimate >= 0.9, "{:?}", p);
    }

    #[test]
    fn onsager_values() {
        assert!((onsager_magnetization(1.2) - 0.97361).abs() < 1e-5);
        assert_eq!(onsager_magnetization(0.4), 0.0);
        assert_eq!(onsager_magnetization((1.0 + 2f64.sqrt()).ln() - 1e-9), 0.0);
    }

    #[test]
    fn voter_from_ones_stays() {
        let l = Arc::new(Lattice::new(LatticeSpec::ring(30)).unwrap());
        let m = voter(&l).unwrap();
        let d = invariant_density(&m, &InitLaw::Ones, &[1.0, 5.0], 10, 1).unwrap();
        assert!(d.iter().all(|p| p.density.mean == 1.0));
    }

    #[test]
    fn nested_ones_below() {
        let l = Arc::new(Lattice::new(LatticeSpec::ring(30)).unwrap());
        let m = contact(&l, 2.0, 1.0).unwrap();
        for seed in 0..20 {
            assert!(nested_ones_check(&m, 2.0, 3.0, seed).unwrap());
        }
    }

    #[test]
    fn product_start_disagreement() {
        let l = Arc::new(Lattice::new(LatticeSpec::ring(400)).unwrap());
        let m = voter(&l).unwrap();
        let c = clustering_stats(&m, 0.5, &[0.0], 50, 2).unwrap();
        let d = c[0].disagreement;
        assert!((d.mean - 0.5).abs() < 3.0 * d.se + 1e-3, "{d:?}");
        let total: u64 = c[0].histogram.iter().map(|&(s, k)| s as u64 * k).sum();
        assert_eq!(total, 400 * 50);
    }

    #[test]
    fn product_one_is_trivial() {
        let r = homogeneous_convergence_test(2.5, 1.0, 41, 5.0, 20, 1, 0.01).unwrap();
        assert!(!r.degenerate);
        let r = homogeneous_convergence_test(0.3, 0.5, 41, 60.0, 20, 1, 0.01).unwrap();
        assert!(r.degenerate && r.pass);
    }

    #[test]
    fn relevance_check_exact() {
        let l = Arc::new(Lattice::new(LatticeSpec::ring(25)).unwrap());
        let m = contact(&l, 1.0, 1.0).unwrap();
        assert_eq!(relevance_forward_check(&m, &[0], 2.0, 50, 4).unwrap(), 0);
    }
}
