//! Mean-field limits on the complete graph: drift and quadratic variation of
//! the density, ODE integration, fixed points, the reduced one-dimensional
//! jump chain and the Wright–Fisher diffusion.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, Convention, LatticeSpec};
use crate::models::{contact_normalized, potts_glauber, ModelSpec};
use crate::rng::{par_replicas, Rng};
use crate::stats::{wilson, Proportion};

/// Mean-field model family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Glauber dynamics with `beta` multiplying the neighbour fraction; the
    /// state is the magnetisation in `[-1, 1]`.
    Ising { beta: f64 },
    Contact { lambda: f64 },
    /// Voter model with rate `1/N` per ordered pair.
    Voter,
    /// Voter model with rate 1 per ordered pair (time sped up by `N`).
    SpedVoter,
    /// Cooperative branching at `b/N^2` per triple plus deaths at rate one.
    CoopDeath { b: f64 },
    /// Cooperative branching at `b/N^2` per triple plus coalescing walks at
    /// `1/N` per ordered pair.
    CoopRw { b: f64 },
    /// Sped-up voter model with branching bias `s` and death rate `d`, both
    /// already on the diffusive time scale.
    BiasedVoterDeath { s: f64, d: f64 },
    /// Voter model with rebel flips: `0 -> 1` at `(f0 + a01 f1) f1` and
    /// `1 -> 0` at `(f1 + a10 f0) f0`.
    NpTwoAlpha { a01: f64, a10: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub family: Family,
}

impl From<Family> for DriftSpec {
    fn from(family: Family) -> Self {
        Self { family }
    }
}

impl DriftSpec {
    pub fn new(family: Family) -> Result<Self> {
        let bad = |name: &str| Err(Error::Parameter(format!("{name} must be finite and >= 0")));
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match family {
            Family::Ising { beta } if !ok(beta) => return bad("beta"),
            Family::Contact { lambda } if !ok(lambda) => return bad("lambda"),
            Family::CoopDeath { b } | Family::CoopRw { b } if !ok(b) => return bad("b"),
            Family::BiasedVoterDeath { s, d } if !(ok(s) && ok(d)) => return bad("s and d"),
            Family::NpTwoAlpha { a01, a10 } if !(ok(a01) && ok(a10)) => return bad("alpha"),
            _ => {}
        }
        Ok(Self { family })
    }

    pub fn domain(&self) -> (f64, f64) {
        match self.family {
            Family::Ising { .. } => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        Ok(())
    }

    /// Limiting drift `b(x)`.
    pub fn drift(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.drift_unchecked(x))
    }

    fn drift_unchecked(&self, x: f64) -> f64 {
        let y = 1.0 - x;
        match self.family {
            Family::Ising { beta } => (0.5 * beta * x).tanh() - x,
            Family::Contact { lambda } => lambda * x * y - x,
            Family::Voter | Family::SpedVoter => 0.0,
            Family::CoopDeath { b } => b * x * x * y - x,
            Family::CoopRw { b } => b * x * x * y - x * x,
            Family::BiasedVoterDeath { s, d } => s * x * y - d * x,
            Family::NpTwoAlpha { a01, a10 } => x * y * ((1.0 - a10) * y - (1.0 - a01) * x),
        }
    }

    /// Jump rates `(r+, r-)` of the reduced chain at density `x` for `N` sites.
    pub fn rates(&self, n: usize, x: f64) -> Result<(f64, f64)> {
        self.check(x)?;
        let nf = n as f64;
        let y = 1.0 - x;
        Ok(match self.family {
            Family::Ising { beta } => {
                let (ep, em) = ((0.5 * beta * x).exp(), (-0.5 * beta * x).exp());
                (nf * y / 2.0 * ep / (ep + em), nf * (1.0 + x) / 2.0 * em / (ep + em))
            }
            Family::Contact { lambda } => (lambda * nf * x * y, nf * x),
            Family::Voter => (nf * x * y, nf * x * y),
            Family::SpedVoter => (nf * nf * x * y, nf * nf * x * y),
            Family::CoopDeath { b } => (b * nf * x * x * y, nf * x),
            Family::CoopRw { b } => (b * nf * x * x * y, (x * (nf * x - 1.0)).max(0.0)),
            Family::BiasedVoterDeath { s, d } => {
                (nf * nf * x * y + s * nf * x * y, nf * nf * x * y + d * nf * x)
            }
            Family::NpTwoAlpha { a01, a10 } => {
                (nf * y * (y + a01 * x) * x, nf * x * (x + a10 * y) * y)
            }
        })
    }

    /// Size of one jump of the density.
    pub fn jump(&self, n: usize) -> f64 {
        match self.family {
            Family::Ising { .. } => 2.0 / n as f64,
            _ => 1.0 / n as f64,
        }
    }

    /// Quadratic variation `a_N(x)` of the reduced chain.
    pub fn qvar(&self, n: usize, x: f64) -> Result<f64> {
        let (up, down) = self.rates(n, x)?;
        let h = self.jump(n);
        Ok(h * h * (up + down))
    }

    /// Density of the reduced chain in state `k`.
    pub fn density(&self, n: usize, k: usize) -> f64 {
        match self.family {
            Family::Ising { .. } => (2.0 * k as f64 - n as f64) / n as f64,
            _ => k as f64 / n as f64,
        }
    }

    /// State index of density `x`, if `x` lies on the grid of `N` sites.
    pub fn state_of(&self, n: usize, x: f64) -> Result<usize> {
        self.check(x)?;
        let k = match self.family {
            Family::Ising { .. } => (x + 1.0) * n as f64 / 2.0,
            _ => x * n as f64,
        };
        let r = k.round();
        if (k - r).abs() > 1e-9 {
            return Err(Error::Parameter(format!("{x} is not on the grid of {n} sites")));
        }
        Ok(r as usize)
    }
}

/// ODE solution on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub step: f64,
    pub x: Vec<f64>,
}

impl OdePath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.x.len()).map(move |k| k as f64 * self.step)
    }

    pub fn last(&self) -> f64 {
        *self.x.last().expect("nonempty path")
    }

    /// Linear interpolation at time `t` (clamped to the path).
    pub fn at(&self, t: f64) -> f64 {
        let s = (t / self.step).max(0.0);
        let k = s.floor() as usize;
        if k + 1 >= self.x.len() {
            return self.last();
        }
        let w = s - k as f64;
        self.x[k] * (1.0 - w) + self.x[k + 1] * w
    }
}

/// Classical fixed-step RK4 for `dx/dt = b(x)`.
pub fn integrate_ode(spec: &DriftSpec, x0: f64, t: f64, step: f64) -> Result<OdePath> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Parameter("step must be positive".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Parameter("horizon must be nonnegative".into()));
    }
    spec.check(x0)?;
    let (lo, hi) = spec.domain();
    let steps = (t / step).round() as usize;
    let mut x = Vec::with_capacity(steps + 1);
    let mut v = x0;
    x.push(v);
    let f = |u: f64| spec.drift_unchecked(u.clamp(lo, hi));
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * step * k1);
        let k3 = f(v + 0.5 * step * k2);
        let k4 = f(v + step * k3);
        v += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if v < lo - 1e-9 || v > hi + 1e-9 {
            return Err(Error::Invariant(format!("ODE left the domain at x = {v}")));
        }
        v = v.clamp(lo, hi);
        x.push(v);
    }
    Ok(OdePath { step, x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    /// Attracting on one side only.
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub stability: Stability,
}

/// Zeros of the drift: sign-change scan on a grid of mesh `1e-3`, bisection
/// to `1e-10`, stability from the sign of the drift on either side. Families
/// with identically zero drift have a continuum of fixed points and return an
/// empty list.
pub fn fixed_points(spec: &DriftSpec) -> Vec<FixedPoint> {
    let (lo, hi) = spec.domain();
    let f = |x: f64| spec.drift_unchecked(x);
    let m = ((hi - lo) / 1e-3).round() as usize;
    let grid: Vec<f64> = (0..=m).map(|k| lo + (hi - lo) * k as f64 / m as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    if vals.iter().all(|&v| v == 0.0) {
        return Vec::new();
    }
    let bisect = |mut a: f64, mut b: f64, fa_neg: bool| {
        while b - a > 1e-12 {
            let c = 0.5 * (a + b);
            let fc = f(c);
            if fc == 0.0 {
                return c;
            }
            if (fc < 0.0) == fa_neg {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    };
    // Offset used to look inside a cell next to an exact zero.
    let delta = 1e-9 * (hi - lo);
    let mut roots: Vec<f64> = Vec::new();
    for k in 0..=m {
        if vals[k] == 0.0 {
            roots.push(grid[k]);
        }
        if k == m {
            break;
        }
        let (a, b) = (grid[k], grid[k + 1]);
        let (fa, fb) = (vals[k], vals[k + 1]);
        if fa != 0.0 && fb != 0.0 {
            if (fa < 0.0) != (fb < 0.0) {
                roots.push(bisect(a, b, fa < 0.0));
            }
        } else if fa == 0.0 && fb != 0.0 {
            let v = f(a + delta);
            if v != 0.0 && (v < 0.0) != (fb < 0.0) {
                roots.push(bisect(a + delta, b, v < 0.0));
            }
        } else if fb == 0.0 && fa != 0.0 {
            let v = f(b - delta);
            if v != 0.0 && (v < 0.0) != (fa < 0.0) {
                roots.push(bisect(a, b - delta, fa < 0.0));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    let h = 1e-6;
    roots
        .into_iter()
        .map(|x| {
            let left = if x - h >= lo { Some(f(x - h)) } else { None };
            let right = if x + h <= hi { Some(f(x + h)) } else { None };
            let attract_left = left.map(|v| v > 0.0);
            let attract_right = right.map(|v| v < 0.0);
            let stability = match (attract_left, attract_right) {
                (Some(true), Some(true)) | (None, Some(true)) | (Some(true), None) => Stability::Stable,
                (Some(false), Some(false)) | (None, Some(false)) | (Some(false), None) => {
                    Stability::Unstable
                }
                _ => Stability::Marginal,
            };
            FixedPoint { x, stability }
        })
        .collect()
}

/// Largest stable fixed point.
pub fn upper_fixed_point(spec: &DriftSpec) -> Option<f64> {
    fixed_points(spec)
        .into_iter()
        .filter(|p| p.stability == Stability::Stable)
        .map(|p| p.x)
        .fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.max(x))))
}

/// Rows `(parameter, fixed point, stability)` over a parameter sweep.
pub fn bifurcation(
    params: &[f64],
    family: impl Fn(f64) -> Family,
) -> Vec<(f64, FixedPoint)> {
    params
        .iter()
        .flat_map(|&p| {
            fixed_points(&DriftSpec { family: family(p) }).into_iter().map(move |fp| (p, fp))
        })
        .collect()
}

/// Fits `x ~ C (p - p_c)^c` by least squares on logs.
pub fn critical_exponent(params: &[f64], values: &[f64], p_c: f64) -> f64 {
    let lx: Vec<f64> = params.iter().map(|p| (p - p_c).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    crate::stats::linear_fit(&lx, &ly).0
}

/// One path of the reduced jump chain started from state `k0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub n: usize,
    pub jump_times: Vec<f64>,
    /// `states[0]` is the initial state; `states[m]` holds after jump `m`.
    pub states: Vec<usize>,
}

impl ChainPath {
    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.jump_times.partition_point(|&s| s <= t)]
    }
}

/// Simulates the reduced chain by exponential holding times.
pub fn reduced_chain(
    spec: &DriftSpec,
    n: usize,
    k0: usize,
    t: f64,
    rng: &mut Rng,
) -> Result<ChainPath> {
    if n < 2 {
        return Err(Error::Parameter("N must be at least 2".into()));
    }
    if k0 > n {
        return Err(Error::Parameter(format!("state {k0} exceeds {n}")));
    }
    let mut path = ChainPath { n, jump_times: Vec::new(), states: vec![k0] };
    let mut k = k0;
    let mut now = 0.0;
    loop {
        let (up, down) = spec.rates(n, spec.density(n, k))?;
        let up = if k == n { 0.0 } else { up };
        let down = if k == 0 { 0.0 } else { down };
        let total = up + down;
        if total <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(rng);
        now += e / total;
        if now > t {
            break;
        }
        k = if rng.random::<f64>() * total < up { k + 1 } else { k - 1 };
        path.jump_times.push(now);
        path.states.push(k);
    }
    Ok(path)
}

/// Largest deviation `sup_t |X̄_t - y_t|` between a chain path and the ODE
/// path. The ODE solution is monotone, so each constant piece of the chain is
/// compared at its end points.
pub fn sup_deviation(spec: &DriftSpec, path: &ChainPath, ode: &OdePath, t: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut start = 0.0;
    for (m, &k) in path.states.iter().enumerate() {
        let end = path.jump_times.get(m).copied().unwrap_or(t);
        let x = spec.density(path.n, k);
        worst = worst.max((x - ode.at(start)).abs()).max((x - ode.at(end)).abs());
        start = end;
    }
    worst
}

/// For each `N`, the fraction of replicas whose sup-deviation from the ODE
/// on `[0, t]` is at most `eps`.
pub fn to_ode_check(
    spec: &DriftSpec,
    ns: &[usize],
    x0: f64,
    t: f64,
    eps: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<(usize, Proportion)>> {
    let ode = integrate_ode(spec, x0, t, 1e-3)?;
    let mut out = Vec::new();
    for &n in ns {
        let k0 = spec.state_of(n, x0)?;
        let s = crate::rng::derive_seed(seed, &format!("to-ode-{n}"));
        let hits: Vec<Result<bool>> = par_replicas(s, replicas as usize, |_, rng| {
            let p = reduced_chain(spec, n, k0, t, rng)?;
            Ok(sup_deviation(spec, &p, &ode, t) <= eps)
        });
        let mut k = 0;
        for h in hits {
            k += h? as u64;
        }
        out.push((n, wilson(k, replicas, 1.96)));
    }
    Ok(out)
}

/// Complete-graph particle system whose density is the reduced chain of
/// `spec` (Ising and contact families).
pub fn complete_graph_model(spec: &DriftSpec, n: usize) -> Result<ModelSpec> {
    let lattice = Arc::new(build_lattice(LatticeSpec::complete(n, Convention::IncludeSelf))?);
    match spec.family {
        Family::Ising { beta } => potts_glauber(&lattice, 2, beta / n as f64),
        Family::Contact { lambda } => contact_normalized(&lattice, lambda),
        _ => Err(Error::Parameter("no complete-graph builder for this family".into())),
    }
}

/// Samples of `X̄_t` from the full complete-graph particle system started
/// from the first `k0` sites in state 1 (spin `+1` for Ising).
pub fn full_chain_samples(
    spec: &DriftSpec,
    n: usize,
    k0: usize,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let model = complete_graph_model(spec, n)?;
    let sampler = crate::graphical::EventSampler::new(&model)?;
    Ok(par_replicas(seed, replicas as usize, |_, rng| {
        let mut x: Vec<u8> = (0..n).map(|i| (i < k0) as u8).collect();
        let mut stepper = crate::graphical::Stepper::new(&model);
        for e in sampler.iter(rng, t) {
            stepper.step(&mut x, &e);
        }
        let k = x.iter().filter(|&&v| v == 1).count();
        spec.density(n, k)
    }))
}

/// Samples of `X̄_t` from the reduced chain.
pub fn reduced_chain_samples(
    spec: &DriftSpec,
    n: usize,
    k0: usize,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let r: Vec<Result<f64>> = par_replicas(seed, replicas as usize, |_, rng| {
        let p = reduced_chain(spec, n, k0, t, rng)?;
        Ok(spec.density(n, *p.states.last().expect("initial state")))
    });
    r.into_iter().collect()
}

/// Euler–Maruyama path of `dX = sqrt(2X(1-X)) dB`, absorbed at 0 and 1.
pub fn wright_fisher(x0: f64, t: f64, step: f64, rng: &mut Rng) -> Result<OdePath> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Parameter("step must be positive".into()));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::OutOfDomain { x: x0, lo: 0.0, hi: 1.0 });
    }
    let steps = (t / step).round() as usize;
    let mut x = Vec::with_capacity(steps + 1);
    let mut v = x0;
    x.push(v);
    let sq = step.sqrt();
    for _ in 0..steps {
        if v > 0.0 && v < 1.0 {
            let z: f64 = StandardNormal.sample(rng);
            v = (v + (2.0 * v * (1.0 - v)).sqrt() * sq * z).clamp(0.0, 1.0);
        }
        x.push(v);
    }
    Ok(OdePath { step, x })
}

/// Terminal value of a Wright–Fisher path without storing it.
pub fn wright_fisher_endpoint(x0: f64, t: f64, step: f64, rng: &mut Rng) -> f64 {
    let steps = (t / step).round() as usize;
    let sq = step.sqrt();
    let mut v = x0;
    for _ in 0..steps {
        if v <= 0.0 || v >= 1.0 {
            break;
        }
        let z: f64 = StandardNormal.sample(rng);
        v = (v + (2.0 * v * (1.0 - v)).sqrt() * sq * z).clamp(0.0, 1.0);
    }
    v
}

/// Kolmogorov–Smirnov distance between `X̄_t` of the sped-up voter chain on
/// `N` sites and the Wright–Fisher diffusion, both from `x0`.
pub fn wf_compare(n: usize, x0: f64, t: f64, samples: u64, step: f64, seed: u64) -> Result<f64> {
    let spec = DriftSpec { family: Family::SpedVoter };
    let k0 = spec.state_of(n, x0)?;
    let chain = reduced_chain_samples(&spec, n, k0, t, samples, crate::rng::derive_seed(seed, "wf-chain"))?;
    let diff: Vec<f64> = par_replicas(crate::rng::derive_seed(seed, "wf-sde"), samples as usize, |_, rng| {
        wright_fisher_endpoint(x0, t, step, rng)
    });
    Ok(crate::stats::ks_distance(&chain, &diff))
}

/// Times at which the Ising reduced chain switches between the two
/// metastable wells, counted when the magnetisation crosses `-level` after
/// last being above `level` or vice versa.
pub fn sign_flip_epochs(n: usize, beta: f64, t: f64, level: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let spec = DriftSpec::new(Family::Ising { beta })?;
    let path = reduced_chain(&spec, n, n, t, rng)?;
    let mut side = 1i8;
    let mut flips = Vec::new();
    for (m, &k) in path.states.iter().enumerate().skip(1) {
        let x = spec.density(n, k);
        if side > 0 && x <= -level {
            side = -1;
            flips.push(path.jump_times[m - 1]);
        } else if side < 0 && x >= level {
            side = 1;
            flips.push(path.jump_times[m - 1]);
        }
    }
    Ok(flips)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: Family) -> DriftSpec {
        DriftSpec::new(f).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(spec(Family::Ising { beta: 3.0 }).drift(0.0).unwrap(), 0.0);
        assert_eq!(spec(Family::Contact { lambda: 2.0 }).drift(0.5).unwrap(), 0.0);
        let q = spec(Family::Contact { lambda: 2.0 }).qvar(100, 0.5).unwrap();
        assert!((q - 0.01).abs() < 1e-15);
        let (up, down) = spec(Family::Contact { lambda: 2.0 }).rates(100, 0.5).unwrap();
        assert_eq!((up, down), (50.0, 50.0));
        let (up, down) = spec(Family::Ising { beta: 3.0 }).rates(10, 0.0).unwrap();
        assert!((up - 2.5).abs() < 1e-12 && (down - 2.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(spec(Family::Contact { lambda: 1.0 }).drift(1.5).is_err());
        assert!(spec(Family::Ising { beta: 1.0 }).drift(-1.0).is_ok());
    }

    #[test]
    fn ising_qvar_closed_form() {
        let s = spec(Family::Ising { beta: 2.5 });
        for k in 0..=20 {
            let x = -1.0 + 0.1 * k as f64;
            let a = (-0.5 * 2.5 * x).exp();
            let b = (0.5 * 2.5 * x).exp();
            let want = 2.0 / 50.0 * (1.0 + x * (a - b) / (a + b));
            assert!((s.qvar(50, x).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn root_next_to_grid_zero() {
        let fps = fixed_points(&spec(Family::Contact { lambda: 1.0001 }));
        assert_eq!(fps.len(), 2);
        assert!((fps[1].x - 0.0001 / 1.0001).abs() < 1e-10);
        assert_eq!(fps[1].stability, Stability::Stable);
    }

    #[test]
    fn contact_fixed_points() {
        let fp = fixed_points(&spec(Family::Contact { lambda: 2.0 }));
        assert_eq!(fp.len(), 2);
        assert_eq!(fp[0].x, 0.0);
        assert_eq!(fp[0].stability, Stability::Unstable);
        assert!((fp[1].x - 0.5).abs() < 1e-10);
        assert_eq!(fp[1].stability, Stability::Stable);
    }

    #[test]
    fn ising_fixed_point_counts() {
        for (beta, count) in [(1.8, 1), (2.0, 1), (2.1, 3), (2.3, 3)] {
            let fp = fixed_points(&spec(Family::Ising { beta }));
            assert_eq!(fp.len(), count, "beta = {beta}");
        }
        let fp = fixed_points(&spec(Family::Ising { beta: 2.0 }));
        assert_eq!(fp[0].stability, Stability::Stable);
    }

    #[test]
    fn voter_ode_constant() {
        let p = integrate_ode(&spec(Family::Voter), 0.3, 2.0, 1e-3).unwrap();
        assert!(p.x.iter().all(|&x| x == 0.3));
        assert!(fixed_points(&spec(Family::Voter)).is_empty());
    }

    #[test]
    fn coop_death_first_order_branch() {
        let fp = fixed_points(&spec(Family::CoopDeath { b: 6.0 }));
        let upper = 0.5 * (1.0 + (1.0 - 4.0 / 6.0f64).sqrt());
        assert_eq!(fp.len(), 3);
        assert!((fp[2].x - upper).abs() < 1e-9);
        assert_eq!(fixed_points(&spec(Family::CoopDeath { b: 3.0 })).len(), 1);
    }

    #[test]
    fn np_interior_fixed_point() {
        let (a01, a10) = (0.5, 0.5);
        let fp = fixed_points(&spec(Family::NpTwoAlpha { a01, a10 }));
        let interior = (1.0 - a10) / ((1.0 - a10) + (1.0 - a01));
        assert!(fp.iter().any(|p| (p.x - interior).abs() < 1e-9 && p.stability == Stability::Stable));
    }

    #[test]
    fn zero_is_absorbing_for_contact_chain() {
        let mut rng = crate::rng::replica_rng(1, 0);
        let p = reduced_chain(&spec(Family::Contact { lambda: 3.0 }), 50, 0, 10.0, &mut rng).unwrap();
        assert!(p.jump_times.is_empty());
    }

    #[test]
    fn wright_fisher_absorbing_start() {
        let mut rng = crate::rng::replica_rng(1, 0);
        let p = wright_fisher(0.0, 1.0, 1e-3, &mut rng).unwrap();
        assert!(p.x.iter().all(|&x| x == 0.0));
        assert!(wright_fisher(0.5, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn bad_step_rejected() {
        assert!(integrate_ode(&spec(Family::Voter), 0.5, 1.0, 0.0).is_err());
    }
}
