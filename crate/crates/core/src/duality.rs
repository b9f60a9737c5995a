//! Dual maps, duality functions, generator-level duality checks and pathwise
//! duality assertions.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphical::{dual_evolve, evolve, sample_events};
use crate::lattice::{Alphabet, Configuration, Lattice};
use crate::maps::{arrow_encoding, classify, LocalMap, Site, SupportEval};
use crate::models::{contact_voter, Dynamics, Instance, ModelSpec};
use crate::rng::{par_replicas, Rng};
use crate::stats::{mean_se, wilson, MeanSe, Proportion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Additive,
    Cancellative,
}

impl Mode {
    fn xor(self) -> bool {
        self == Mode::Cancellative
    }
}

/// `psi_q(x, y) = q^<x,y>` with `0^0 = 1`.
pub fn psi_q(q: f64, x: &[u8], y: &[u8]) -> f64 {
    let k = x.iter().zip(y).filter(|(a, b)| **a & **b == 1).count();
    if k == 0 {
        1.0
    } else {
        q.powi(k as i32)
    }
}

fn overlap_bits(x: u32, y: u32, xor: bool) -> u32 {
    if xor {
        (x & y).count_ones() & 1
    } else {
        ((x & y) != 0) as u32
    }
}

/// Checks the defining relation of a dual pair by exhaustion over the joint
/// support: `1{m(x) and y = 0} = 1{x and m'(y) = 0}` (additive) or equal
/// parities of the overlaps (cancellative).
pub fn verify_dual_pair(m: &LocalMap, dual: &LocalMap, mode: Mode) -> Result<bool> {
    let mut sites = m.support();
    sites.extend(dual.support());
    sites.sort_unstable();
    sites.dedup();
    let mut a = SupportEval::with_sites(m, sites.clone())?;
    let mut b = SupportEval::with_sites(dual, sites)?;
    let n = 1u32 << a.width();
    let da: Vec<u32> = (0..n).map(|x| a.eval(x)).collect();
    let db: Vec<u32> = (0..n).map(|y| b.eval(y)).collect();
    for x in 0..n {
        for y in 0..n {
            if overlap_bits(da[x as usize], y, mode.xor()) != overlap_bits(x, db[y as usize], mode.xor())
            {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True if the two maps act identically on every configuration of the union
/// of their supports.
pub fn same_action(a: &LocalMap, b: &LocalMap) -> Result<bool> {
    let mut sites = a.support();
    sites.extend(b.support());
    sites.sort_unstable();
    sites.dedup();
    let mut ea = SupportEval::with_sites(a, sites.clone())?;
    let mut eb = SupportEval::with_sites(b, sites)?;
    Ok((0..1u32 << ea.width()).all(|x| ea.eval(x) == eb.eval(x)))
}

fn catalog_candidates(support: &[Site]) -> Vec<LocalMap> {
    use LocalMap::*;
    let mut v = Vec::new();
    for &i in support {
        v.push(Death { i });
        for &j in support {
            if i == j {
                continue;
            }
            v.extend([
                Vot { i, j },
                Bra { i, j },
                Rw { i, j },
                Ann { i, j },
                Bran { i, j },
                Excl { i, j },
                Death2 { i, j },
            ]);
        }
    }
    v
}

/// Dual of an additive or cancellative map: arrows reversed, blocking symbols
/// kept. Returns the matching catalog map when one exists and a `Linear` map
/// otherwise; the defining relation is verified by exhaustion either way.
pub fn dual_map(m: &LocalMap, mode: Mode) -> Result<LocalMap> {
    let c = classify(m)?;
    let ok = match mode {
        Mode::Additive => c.additive,
        Mode::Cancellative => c.cancellative,
    };
    if !ok {
        return Err(match mode {
            Mode::Additive => Error::NotAdditive(m.to_string()),
            Mode::Cancellative => Error::NotCancellative(m.to_string()),
        });
    }
    let support = m.support();
    let enc = arrow_encoding(m)?;
    let pos = |s: Site| support.iter().position(|&t| t == s).expect("site in support");
    let mut images = vec![0u32; support.len()];
    for (a, &s) in support.iter().enumerate() {
        if !enc.blocks.contains(&s) {
            images[a] |= 1 << a;
        }
    }
    for &(i, j) in &enc.arrows {
        images[pos(j)] |= 1 << pos(i);
    }
    let linear = LocalMap::Linear {
        xor: mode.xor(),
        support: Arc::from(support.clone()),
        images: Arc::from(images),
    };
    if !verify_dual_pair(m, &linear, mode)? {
        return Err(Error::NoDual(m.to_string()));
    }
    for cand in catalog_candidates(&support) {
        if cand.support() == support && same_action(&cand, &linear)? {
            return Ok(cand);
        }
    }
    Ok(linear)
}

/// Same lattice and rates, every instance replaced by its dual map.
pub fn dual_model(model: &ModelSpec, mode: Mode) -> Result<ModelSpec> {
    if model.dynamics != Dynamics::Maps || model.alphabet != Alphabet::Binary {
        return Err(Error::NoDual(format!("{} is not a binary map model", model.name)));
    }
    let mut cache: std::collections::HashMap<LocalMap, LocalMap> = Default::default();
    let mut instances = Vec::with_capacity(model.instances.len());
    for inst in &model.instances {
        let d = match cache.get(&inst.map) {
            Some(d) => d.clone(),
            None => {
                let d = dual_map(&inst.map, mode)?;
                cache.insert(inst.map.clone(), d.clone());
                d
            }
        };
        instances.push(Instance { map: d, rate: inst.rate });
    }
    Ok(ModelSpec {
        name: format!("dual_{}", model.name),
        params: model.params.clone(),
        lattice: model.lattice.clone(),
        alphabet: model.alphabet,
        dynamics: Dynamics::Maps,
        instances,
    })
}

/// Largest state space accepted by `generator_matrix`.
pub const MAX_STATES: usize = 4096;

/// Dense generator over `S^Λ`. States are indexed in base `|S|` with site 0
/// as the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub alphabet: Alphabet,
    pub n_sites: usize,
    pub size: usize,
    pub entries: Vec<f64>,
}

impl Generator {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.size + y]
    }

    pub fn state(&self, x: usize) -> Vec<u8> {
        decode(x, self.alphabet.size() as usize, self.n_sites)
    }

    pub fn index(&self, x: &[u8]) -> usize {
        encode(x, self.alphabet.size() as usize)
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.size)
            .map(|x| self.entries[x * self.size..(x + 1) * self.size].iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

fn decode(mut x: usize, s: usize, n: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    for d in v.iter_mut() {
        *d = (x % s) as u8;
        x /= s;
    }
    v
}

fn encode(x: &[u8], s: usize) -> usize {
    x.iter().rev().fold(0, |acc, &d| acc * s + d as usize)
}

/// Off-diagonal `G(x, m(x))` accumulates the instance rates; rows sum to 0.
pub fn generator_matrix(model: &ModelSpec) -> Result<Generator> {
    let s = model.alphabet.size() as usize;
    let n = model.n_sites();
    let size = (s as f64).powi(n as i32);
    if size > MAX_STATES as f64 {
        return Err(Error::StateSpaceTooLarge { states: size as usize, max: MAX_STATES });
    }
    let size = size as usize;
    let mut g = vec![0.0; size * size];
    for x in 0..size {
        let xs = decode(x, s, n);
        let mut row_out = 0.0;
        match model.dynamics {
            Dynamics::Maps => {
                let mut y = xs.clone();
                for inst in &model.instances {
                    y.copy_from_slice(&xs);
                    inst.map.apply_pinned(&mut y, model.lattice.pinned_mask());
                    let yi = encode(&y, s);
                    if yi != x {
                        g[x * size + yi] += inst.rate;
                        row_out += inst.rate;
                    }
                }
            }
            Dynamics::Potts { .. } => {
                let mut y = xs.clone();
                for i in model.lattice.dynamic_sites() {
                    let rates = model.transition_rates(&xs, i);
                    for (v, r) in rates.iter().enumerate() {
                        if v as u8 == xs[i] || *r == 0.0 {
                            continue;
                        }
                        y.copy_from_slice(&xs);
                        y[i] = v as u8;
                        g[x * size + encode(&y, s)] += r;
                        row_out += r;
                    }
                }
            }
        }
        g[x * size + x] -= row_out;
    }
    Ok(Generator { alphabet: model.alphabet, n_sites: n, size, entries: g })
}

/// Largest `|Σ_x' G(x,x')ψ(x',y) − Σ_y' ψ(x,y')G'(y,y')|` over all `(x, y)`.
pub fn generator_duality_residual(
    g: &Generator,
    gd: &Generator,
    psi: impl Fn(&[u8], &[u8]) -> f64,
) -> Result<f64> {
    if g.size != gd.size || g.n_sites != gd.n_sites {
        return Err(Error::Dimension(format!("{} vs {} states", g.size, gd.size)));
    }
    let n = g.size;
    let states: Vec<Vec<u8>> = (0..n).map(|x| g.state(x)).collect();
    let mut p = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            p[x * n + y] = psi(&states[x], &states[y]);
        }
    }
    let sparse = |m: &Generator| -> Vec<Vec<(usize, f64)>> {
        (0..n)
            .map(|x| (0..n).filter_map(|y| Some((y, m.get(x, y))).filter(|e| e.1 != 0.0)).collect())
            .collect()
    };
    let (sg, sd) = (sparse(g), sparse(gd));
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let lhs: f64 = sg[x].iter().map(|&(x2, r)| r * p[x2 * n + y]).sum();
            let rhs: f64 = sd[y].iter().map(|&(y2, r)| r * p[x * n + y2]).sum();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Law of an initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLaw {
    Zero,
    Ones,
    /// Independent Bernoulli sites.
    Bernoulli(f64),
    /// A fixed set of sites.
    Sites(Vec<usize>),
    /// `k` sites drawn uniformly without replacement.
    RandomSites(usize),
}

impl InitLaw {
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Configuration {
        match self {
            InitLaw::Zero => Configuration::zeros(n),
            InitLaw::Ones => Configuration::ones(n),
            InitLaw::Bernoulli(p) => Configuration {
                alphabet: Alphabet::Binary,
                states: (0..n).map(|_| rng.random_bool(*p) as u8).collect(),
            },
            InitLaw::Sites(s) => Configuration::indicator(n, s),
            InitLaw::RandomSites(k) => {
                let s = rand::seq::index::sample(rng, n, (*k).min(n)).into_vec();
                Configuration::indicator(n, &s)
            }
        }
    }
}

/// First failing realization of a pathwise duality assertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub replica: u64,
    pub s: f64,
    pub x0: Configuration,
    pub y0: Configuration,
    /// Event stream in the graphical module's CSV format.
    pub events_csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseReport {
    pub runs: u64,
    pub passed: u64,
    pub counterexample: Option<Counterexample>,
}

impl PathwiseReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.runs
    }
}

fn pairing(x: &[u8], y: &[u8], mode: Mode) -> u8 {
    let k = x.iter().zip(y).filter(|(a, b)| **a & **b == 1).count();
    match mode {
        Mode::Additive => (k == 0) as u8,
        Mode::Cancellative => (k % 2) as u8,
    }
}

/// Samples one Poisson point set per replica, runs the forward flow from
/// `X_0` and the dual flow from `Y_0` on it, and checks that the pairing of
/// `X_{t-s}` with `Y_s` is the same for every `s` on a grid of `grid + 1`
/// points. The identity must hold exactly in every replica.
#[allow(clippy::too_many_arguments)]
pub fn pathwise_duality_assert(
    model: &ModelSpec,
    mode: Mode,
    t: f64,
    replicas: u64,
    seed: u64,
    x0_law: &InitLaw,
    y0_law: &InitLaw,
    grid: usize,
) -> Result<PathwiseReport> {
    let dual = dual_model(model, mode)?;
    let duals: Vec<LocalMap> = dual.instances.iter().map(|i| i.map.clone()).collect();
    let n = model.n_sites();
    let grid = grid.max(1);
    let s_grid: Vec<f64> = (0..=grid).map(|k| t * k as f64 / grid as f64).collect();
    let x_times: Vec<f64> = s_grid.iter().rev().map(|s| t - s).map(|v| v.max(0.0)).collect();
    let outcomes = par_replicas(seed, replicas as usize, |k, rng| -> Result<Option<Counterexample>> {
        let x0 = x0_law.sample(n, rng);
        let y0 = y0_law.sample(n, rng);
        let ev_seed: u64 = rng.random();
        let events = sample_events(model, t, ev_seed)?;
        let xs = evolve(model, &x0, &events.events, &x_times)?;
        let ys = dual_evolve(&duals, &events.events, &y0, t, &s_grid)?;
        let first = pairing(&xs.states[grid].states, &ys.states[0].states, mode);
        for (idx, s) in s_grid.iter().enumerate() {
            let xv = &xs.states[grid - idx].states;
            let yv = &ys.states[idx].states;
            if pairing(xv, yv, mode) != first {
                let mut buf = Vec::new();
                events.write_csv(model, &mut buf)?;
                return Ok(Some(Counterexample {
                    replica: k as u64,
                    s: *s,
                    x0,
                    y0,
                    events_csv: String::from_utf8_lossy(&buf).into_owned(),
                }));
            }
        }
        Ok(None)
    });
    let mut report = PathwiseReport { runs: replicas, passed: 0, counterexample: None };
    for o in outcomes {
        match o? {
            None => report.passed += 1,
            Some(c) => {
                if report.counterexample.is_none() {
                    report.counterexample = Some(c);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovoReport {
    pub q: f64,
    /// `E[q^<X_T, y>]` from the all-ones start.
    pub lhs: MeanSe,
    /// Frequency of extinction by time `T` from `y`.
    pub rhs: Proportion,
}

impl CovoReport {
    /// Whether the two sides agree within `z` joint standard errors.
    pub fn agrees(&self, z: f64) -> bool {
        let p = self.rhs.estimate;
        let se_r = (p * (1.0 - p) / self.rhs.trials as f64).sqrt();
        let se = (self.lhs.se * self.lhs.se + se_r * se_r).sqrt();
        (self.lhs.mean - p).abs() <= z * se.max(1e-12)
    }
}

/// Compares both sides of the upper-invariant-law identity of the
/// contact-voter model at a finite horizon `t`.
pub fn covo_extinction_identity(
    lambda: f64,
    gamma: f64,
    y: &[usize],
    lattice: &Arc<Lattice>,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<CovoReport> {
    let model = contact_voter(lattice, lambda, gamma)?;
    let q = if gamma + lambda > 0.0 { gamma / (gamma + lambda) } else { 1.0 };
    let n = model.n_sites();
    let sampler = crate::graphical::EventSampler::new(&model)?;
    let yc = Configuration::indicator(n, y);
    let lhs: Vec<f64> = par_replicas(seed, replicas as usize, |_, rng| {
        let mut x = vec![1u8; n];
        let mut stepper = crate::graphical::Stepper::new(&model);
        for e in sampler.iter(rng, t) {
            stepper.step(&mut x, &e);
        }
        psi_q(q, &x, &yc.states)
    });
    let seed2 = crate::rng::derive_seed(seed, "covo-extinction");
    let extinct: Vec<bool> = par_replicas(seed2, replicas as usize, |_, rng| {
        let mut x = yc.states.clone();
        let mut alive = x.iter().filter(|&&v| v == 1).count();
        if alive == 0 {
            return true;
        }
        for e in sampler.iter(rng, t) {
            let m = &model.instances[e.inst as usize].map;
            let touched = m.domain();
            let before: usize = touched.iter().map(|&s| x[s as usize] as usize).sum();
            m.apply_in_place(&mut x);
            let after: usize = touched.iter().map(|&s| x[s as usize] as usize).sum();
            alive = alive + after - before;
            if alive == 0 {
                return true;
            }
        }
        false
    });
    let k = extinct.iter().filter(|&&e| e).count() as u64;
    Ok(CovoReport { q, lhs: mean_se(&lhs), rhs: wilson(k, replicas, 1.96) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Convention, LatticeSpec};
    use crate::models::{contact, voter};
    use LocalMap::*;

    #[test]
    fn catalog_duals() {
        assert_eq!(dual_map(&Vot { i: 0, j: 1 }, Mode::Additive).unwrap(), Rw { i: 1, j: 0 });
        assert_eq!(dual_map(&Bra { i: 0, j: 1 }, Mode::Additive).unwrap(), Bra { i: 1, j: 0 });
        assert_eq!(dual_map(&Death { i: 3 }, Mode::Additive).unwrap(), Death { i: 3 });
        assert_eq!(dual_map(&Excl { i: 0, j: 1 }, Mode::Additive).unwrap(), Excl { i: 0, j: 1 });
        assert_eq!(dual_map(&Bran { i: 0, j: 1 }, Mode::Cancellative).unwrap(), Bran { i: 1, j: 0 });
    }

    #[test]
    fn non_additive_has_no_dual() {
        assert!(dual_map(&Coop { i: 0, j: 1, k: 2 }, Mode::Additive).is_err());
        assert!(dual_map(&Bra { i: 0, j: 1 }, Mode::Cancellative).is_err());
    }

    #[test]
    fn psi_special_cases() {
        assert_eq!(psi_q(0.0, &[0, 1], &[1, 0]), 1.0);
        assert_eq!(psi_q(0.0, &[1, 1], &[1, 0]), 0.0);
        assert_eq!(psi_q(-1.0, &[1, 1], &[1, 1]), 1.0);
        assert_eq!(psi_q(-1.0, &[1, 0], &[1, 1]), -1.0);
    }

    #[test]
    fn single_site_death_generator() {
        let l = Arc::new(build_lattice(LatticeSpec::complete(1, Convention::ExcludeSelf)).unwrap());
        let g = generator_matrix(&contact(&l, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.entries, vec![0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn contact_ring3_branch_entry() {
        let l = Arc::new(build_lattice(LatticeSpec::ring(3)).unwrap());
        let g = generator_matrix(&contact(&l, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.get(g.index(&[1, 0, 0]), g.index(&[1, 1, 0])), 1.0);
        assert!(g.max_row_sum() < 1e-14);
    }

    #[test]
    fn voter_dual_to_coalescing_walks() {
        let l = Arc::new(build_lattice(LatticeSpec::ring(4)).unwrap());
        let v = voter(&l).unwrap();
        let d = dual_model(&v, Mode::Additive).unwrap();
        assert!(d.instances.iter().all(|i| matches!(i.map, Rw { .. })));
        let r = generator_duality_residual(
            &generator_matrix(&v).unwrap(),
            &generator_matrix(&d).unwrap(),
            |x, y| psi_q(0.0, x, y),
        )
        .unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn state_space_limit() {
        let l = Arc::new(build_lattice(LatticeSpec::ring(13)).unwrap());
        assert!(matches!(
            generator_matrix(&contact(&l, 1.0, 1.0).unwrap()),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn empty_dual_start_is_trivial() {
        let l = Arc::new(build_lattice(LatticeSpec::ring(8)).unwrap());
        let m = contact(&l, 1.0, 1.0).unwrap();
        let r = pathwise_duality_assert(&m, Mode::Additive, 2.0, 20, 1, &InitLaw::Bernoulli(0.5), &InitLaw::Zero, 10)
            .unwrap();
        assert!(r.all_passed());
    }
}
