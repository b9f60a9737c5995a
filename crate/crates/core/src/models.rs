//! Model builders: rate-weighted families of local maps over a lattice.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Configuration, Lattice};
use crate::maps::{LocalMap, Site};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub map: LocalMap,
    pub rate: f64,
}

/// How the generator is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dynamics {
    /// Fixed-rate local maps.
    Maps,
    /// Heat-bath Potts Glauber dynamics: every site is resampled at rate one
    /// from `exp(beta N_{x,i}(s)) / sum_t exp(beta N_{x,i}(t))`.
    Potts { q: u8, beta: f64 },
}

/// A generator description: lattice, alphabet and map instances with rates.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub lattice: Arc<Lattice>,
    pub alphabet: Alphabet,
    pub dynamics: Dynamics,
    pub instances: Vec<Instance>,
}

impl ModelSpec {
    fn new(name: &str, lattice: &Arc<Lattice>, alphabet: Alphabet) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
            lattice: lattice.clone(),
            alphabet,
            dynamics: Dynamics::Maps,
            instances: Vec::new(),
        }
    }

    /// Model from an explicit instance list; zero-rate instances are dropped.
    pub fn from_instances(
        name: &str,
        lattice: &Arc<Lattice>,
        alphabet: Alphabet,
        instances: impl IntoIterator<Item = Instance>,
    ) -> Self {
        let mut m = Self::new(name, lattice, alphabet);
        for i in instances {
            m.push(i.map, i.rate);
        }
        m
    }

    fn param(mut self, k: &str, v: f64) -> Self {
        self.params.insert(k.to_string(), v);
        self
    }

    /// Adds an instance unless its rate is zero or it would only write
    /// pinned sites.
    fn push(&mut self, map: LocalMap, rate: f64) {
        if rate <= 0.0 {
            return;
        }
        if map.domain().iter().all(|&s| self.lattice.is_pinned(s as usize)) {
            return;
        }
        self.instances.push(Instance { map, rate });
    }

    /// Total event rate. For Potts dynamics this is the uniformisation rate.
    pub fn total_rate(&self) -> f64 {
        match self.dynamics {
            Dynamics::Maps => self.instances.iter().map(|m| m.rate).sum(),
            Dynamics::Potts { .. } => self.lattice.dynamic_sites().count() as f64,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.len()
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Rate at which site `i` changes to each state from configuration `x`.
    /// Summed over map instances (or read off the heat-bath law for Potts).
    pub fn transition_rates(&self, x: &[u8], i: usize) -> Vec<f64> {
        let q = self.alphabet.size() as usize;
        let mut out = vec![0.0; q];
        match self.dynamics {
            Dynamics::Maps => {
                let mut y = x.to_vec();
                for inst in &self.instances {
                    if !inst.map.domain().contains(&(i as Site)) {
                        continue;
                    }
                    y.copy_from_slice(x);
                    inst.map.apply_in_place(&mut y);
                    if y[i] != x[i] {
                        out[y[i] as usize] += inst.rate;
                    }
                }
            }
            Dynamics::Potts { q: _, beta } => {
                let w = potts_weights(&self.lattice, x, i, q, beta);
                for s in 0..q {
                    if s != x[i] as usize {
                        out[s] = w[s];
                    }
                }
            }
        }
        out
    }

    /// Uniform initial configuration respecting the lattice boundary.
    pub fn uniform(&self, state: u8) -> Configuration {
        self.lattice.uniform(self.alphabet, state)
    }
}

/// Heat-bath probabilities of each colour at site `i`.
pub fn potts_weights(lattice: &Lattice, x: &[u8], i: usize, q: usize, beta: f64) -> Vec<f64> {
    let mut counts = vec![0usize; q];
    for &j in lattice.neighbors(i) {
        counts[x[j as usize] as usize] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&0) as f64;
    let w: Vec<f64> = counts.iter().map(|&c| (beta * (c as f64 - top)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

fn lattice_degree(lattice: &Lattice, i: usize) -> f64 {
    lattice.neighbors(i).len() as f64
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Parameter(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

/// Contact process: `bra_ij` at rate `lambda` per ordered edge and `death_i`
/// at rate `delta` per site.
pub fn contact(lattice: &Arc<Lattice>, lambda: f64, delta: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("delta", delta)?;
    let mut m = ModelSpec::new("contact", lattice, Alphabet::Binary)
        .param("lambda", lambda)
        .param("delta", delta);
    for (i, j) in lattice.ordered_edges() {
        m.push(LocalMap::Bra { i, j }, lambda);
    }
    for i in lattice.dynamic_sites() {
        m.push(LocalMap::Death { i: i as Site }, delta);
    }
    Ok(m)
}

/// Contact process with infection rate `lambda / |N_j|` into site `j`; on the
/// include-self complete graph this is the mean-field normalisation.
pub fn contact_normalized(lattice: &Arc<Lattice>, lambda: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    let mut m = ModelSpec::new("contact_normalized", lattice, Alphabet::Binary)
        .param("lambda", lambda)
        .param("delta", 1.0);
    for j in 0..lattice.len() {
        let deg = lattice_degree(lattice, j);
        for &i in lattice.neighbors(j) {
            if i as usize != j {
                m.push(LocalMap::Bra { i, j: j as Site }, lambda / deg);
            }
        }
    }
    for i in lattice.dynamic_sites() {
        m.push(LocalMap::Death { i: i as Site }, 1.0);
    }
    Ok(m)
}

/// Voter model: each site adopts the type of a uniform neighbour at rate one.
pub fn voter(lattice: &Arc<Lattice>) -> Result<ModelSpec> {
    biased_voter(lattice, 0.0).map(|mut m| {
        m.name = "voter".into();
        m.params.clear();
        m
    })
}

/// Biased voter model: `vot_ij` at `1/|N_j|` and `bra_ij` at `s/|N_j|`.
pub fn biased_voter(lattice: &Arc<Lattice>, s: f64) -> Result<ModelSpec> {
    check_nonneg("s", s)?;
    let mut m = ModelSpec::new("biased_voter", lattice, Alphabet::Binary).param("s", s);
    for j in 0..lattice.len() {
        let deg = lattice_degree(lattice, j);
        for &i in lattice.neighbors(j) {
            if i as usize != j {
                m.push(LocalMap::Vot { i, j: j as Site }, 1.0 / deg);
            }
        }
    }
    for j in 0..lattice.len() {
        let deg = lattice_degree(lattice, j);
        for &i in lattice.neighbors(j) {
            if i as usize != j {
                m.push(LocalMap::Bra { i, j: j as Site }, s / deg);
            }
        }
    }
    Ok(m)
}

/// Contact-voter mixture: `bra_ij` at `lambda`, `vot_ij` at `gamma` per
/// ordered edge, `death_i` at rate one.
pub fn contact_voter(lattice: &Arc<Lattice>, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    check_nonneg("gamma", gamma)?;
    let mut m = contact(lattice, lambda, 1.0)?;
    m.name = "contact_voter".into();
    m.params.insert("gamma".into(), gamma);
    for (i, j) in lattice.ordered_edges() {
        m.push(LocalMap::Vot { i, j }, gamma);
    }
    Ok(m)
}

/// Level rates `(r^+_L, r^-_L)` for `L = -N, -N+2, ..., N`.
///
/// `r^-` uses `tanh(b(L+2)/2) - tanh(bL/2)`, the mirror image of `r^+`, so that
/// the rates are nonnegative and sum to `1 - tanh(bM/2)` over `L >= M`.
pub fn ising_level_rates(n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let n = n as i32;
    let th = |l: i32| (0.5 * beta * l as f64).tanh();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut l = -n;
    while l <= n {
        plus.push(if l == -n { 1.0 + th(-n) } else { th(l) - th(l - 2) });
        minus.push(if l == n { 1.0 - th(n) } else { th(l + 2) - th(l) });
        l += 2;
    }
    (plus, minus)
}

/// Ising model with Glauber dynamics written with the level maps
/// `m^+_{i,L}`, `m^-_{i,L}`. Flip-to-plus rate at local magnetisation `M` is
/// `1 + tanh(beta M / 2)`.
pub fn ising_glauber(lattice: &Arc<Lattice>, beta: f64) -> Result<ModelSpec> {
    check_nonneg("beta", beta)?;
    let n = lattice
        .regular_degree()
        .ok_or_else(|| Error::Lattice("Ising level maps need a regular lattice".into()))?;
    let (plus, minus) = ising_level_rates(n, beta);
    let mut m = ModelSpec::new("ising_glauber", lattice, Alphabet::Spin).param("beta", beta);
    let sites: Vec<usize> = lattice.dynamic_sites().collect();
    for i in sites {
        let nbrs: Arc<[Site]> = Arc::from(lattice.neighbors(i));
        for (k, l) in (-(n as i32)..=n as i32).step_by(2).enumerate() {
            m.push(LocalMap::GlauberPlus { i: i as Site, level: l, nbrs: nbrs.clone() }, plus[k]);
            m.push(LocalMap::GlauberMinus { i: i as Site, level: l, nbrs: nbrs.clone() }, minus[k]);
        }
    }
    Ok(m)
}

/// Potts model with heat-bath Glauber dynamics in direct-rate form.
pub fn potts_glauber(lattice: &Arc<Lattice>, q: u8, beta: f64) -> Result<ModelSpec> {
    if q < 2 {
        return Err(Error::Parameter(format!("Potts model needs q >= 2, got {q}")));
    }
    check_nonneg("beta", beta)?;
    let mut m = ModelSpec::new("potts_glauber", lattice, Alphabet::Potts(q))
        .param("q", q as f64)
        .param("beta", beta);
    m.dynamics = Dynamics::Potts { q, beta };
    Ok(m)
}

/// Neuhauser–Pacala model: `vot_ji` at `alpha/|N_i|` per neighbour `j` and
/// `rebel_kji` at `(1-alpha)/|N_i|^2` per unordered neighbour pair `{j,k}`.
pub fn neuhauser_pacala(lattice: &Arc<Lattice>, alpha: f64) -> Result<ModelSpec> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha must lie in [0,1], got {alpha}")));
    }
    let mut m = ModelSpec::new("neuhauser_pacala", lattice, Alphabet::Binary).param("alpha", alpha);
    for i in 0..lattice.len() {
        let nb: Vec<Site> =
            lattice.neighbors(i).iter().copied().filter(|&j| j as usize != i).collect();
        let deg = nb.len() as f64;
        for &j in &nb {
            m.push(LocalMap::Vot { i: j, j: i as Site }, alpha / deg);
        }
        for (a, &j) in nb.iter().enumerate() {
            for &k in &nb[a + 1..] {
                m.push(LocalMap::Rebel { i: k, j, k: i as Site }, (1.0 - alpha) / (deg * deg));
            }
        }
    }
    Ok(m)
}

/// Threshold voter model through the cancellative maps `m_{Delta,i}` over
/// even subsets `Delta` of `N_i ∪ {i}`, each at rate `2^{-|N_i|+1}`.
pub fn threshold_voter(lattice: &Arc<Lattice>) -> Result<ModelSpec> {
    let mut m = ModelSpec::new("threshold_voter", lattice, Alphabet::Binary);
    for i in 0..lattice.len() {
        let nb: Vec<Site> =
            lattice.neighbors(i).iter().copied().filter(|&j| j as usize != i).collect();
        if nb.len() > 16 {
            return Err(Error::Parameter("threshold voter needs |N_i| <= 16".into()));
        }
        let mut set = nb.clone();
        set.push(i as Site);
        let rate = 2f64.powi(-(nb.len() as i32) + 1);
        for mask in 0u32..(1 << set.len()) {
            if mask.count_ones() % 2 == 1 {
                continue;
            }
            let mut delta: Vec<Site> =
                (0..set.len()).filter(|&a| mask & (1 << a) != 0).map(|a| set[a]).collect();
            delta.sort_unstable();
            m.push(LocalMap::Threshold { i: i as Site, delta: Arc::from(delta) }, rate);
        }
    }
    Ok(m)
}

/// Coalescing random walks: each particle jumps at rate one to a uniform
/// neighbour.
pub fn coalescing_rw(lattice: &Arc<Lattice>) -> Result<ModelSpec> {
    walk_model(lattice, "coalescing_rw", |i, j| LocalMap::Rw { i, j })
}

/// Annihilating random walks.
pub fn annihilating_rw(lattice: &Arc<Lattice>) -> Result<ModelSpec> {
    walk_model(lattice, "annihilating_rw", |i, j| LocalMap::Ann { i, j })
}

/// Symmetric exclusion: `excl_ij` at rate `1/|N_i|` per ordered edge.
pub fn exclusion(lattice: &Arc<Lattice>) -> Result<ModelSpec> {
    walk_model(lattice, "exclusion", |i, j| LocalMap::Excl { i, j })
}

fn walk_model(
    lattice: &Arc<Lattice>,
    name: &str,
    f: impl Fn(Site, Site) -> LocalMap,
) -> Result<ModelSpec> {
    let mut m = ModelSpec::new(name, lattice, Alphabet::Binary);
    for i in 0..lattice.len() {
        let nb: Vec<Site> =
            lattice.neighbors(i).iter().copied().filter(|&j| j as usize != i).collect();
        let deg = nb.len() as f64;
        for j in nb {
            m.push(f(i as Site, j), 1.0 / deg);
        }
    }
    Ok(m)
}

fn coop_family(lattice: &Arc<Lattice>, name: &str, b: f64) -> Result<ModelSpec> {
    check_nonneg("b", b)?;
    let mut m = ModelSpec::new(name, lattice, Alphabet::Binary).param("b", b);
    for k in 0..lattice.len() {
        let nb = lattice.neighbors(k);
        let deg = nb.len() as f64;
        for &i in nb {
            for &j in nb {
                m.push(LocalMap::Coop { i, j, k: k as Site }, b / (deg * deg));
            }
        }
    }
    Ok(m)
}

/// Cooperative branching with deaths: `coop_ijk` at `b/|N_k|^2` for every
/// ordered pair `(i,j)` of neighbours of `k`, `death_k` at rate one.
pub fn coop_death(lattice: &Arc<Lattice>, b: f64) -> Result<ModelSpec> {
    let mut m = coop_family(lattice, "coop_death", b)?;
    for k in lattice.dynamic_sites() {
        m.push(LocalMap::Death { i: k as Site }, 1.0);
    }
    Ok(m)
}

/// Cooperative branching with coalescing random walks in place of deaths.
pub fn coop_rw(lattice: &Arc<Lattice>, b: f64) -> Result<ModelSpec> {
    let mut m = coop_family(lattice, "coop_rw", b)?;
    let walks = coalescing_rw(lattice)?;
    m.instances.extend(walks.instances);
    Ok(m)
}

/// Biased annihilating branching process: `lambda` per `bra_ij` and rate one
/// per `kill_ij`, over ordered edges.
pub fn babp(lattice: &Arc<Lattice>, lambda: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    let mut m = ModelSpec::new("babp", lattice, Alphabet::Binary).param("lambda", lambda);
    for (i, j) in lattice.ordered_edges() {
        m.push(LocalMap::Bra { i, j }, lambda);
    }
    for (i, j) in lattice.ordered_edges() {
        m.push(LocalMap::Kill { i, j }, 1.0);
    }
    Ok(m)
}

/// Annihilating branching: `bran_ij` at `lambda` per ordered edge and
/// `death_i` at rate `delta`.
pub fn annihilating_branching(lattice: &Arc<Lattice>, lambda: f64, delta: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("delta", delta)?;
    let mut m = ModelSpec::new("annihilating_branching", lattice, Alphabet::Binary)
        .param("lambda", lambda)
        .param("delta", delta);
    for (i, j) in lattice.ordered_edges() {
        m.push(LocalMap::Bran { i, j }, lambda);
    }
    for i in lattice.dynamic_sites() {
        m.push(LocalMap::Death { i: i as Site }, delta);
    }
    Ok(m)
}

fn ring_len(lattice: &Lattice, min: usize) -> Result<usize> {
    use crate::lattice::LatticeKind;
    if !matches!(lattice.kind(), LatticeKind::Ring | LatticeKind::Torus) || lattice.dim() != 1 {
        return Err(Error::Lattice("model is defined on a one-dimensional ring".into()));
    }
    if lattice.len() < min {
        return Err(Error::Lattice(format!("ring needs at least {min} sites")));
    }
    Ok(lattice.len())
}

/// Contact process with double deaths on a ring: `bra_{i,i±1}` at `lambda`,
/// `death_{i,i+1}` at rate one.
pub fn contact_double_death(lattice: &Arc<Lattice>, lambda: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    let n = ring_len(lattice, 3)?;
    let mut m = ModelSpec::new("contact_double_death", lattice, Alphabet::Binary)
        .param("lambda", lambda);
    for i in 0..n {
        let (l, r) = (((i + n - 1) % n) as Site, ((i + 1) % n) as Site);
        m.push(LocalMap::Bra { i: i as Site, j: r }, lambda);
        m.push(LocalMap::Bra { i: i as Site, j: l }, lambda);
    }
    for i in 0..n {
        m.push(LocalMap::Death2 { i: i as Site, j: ((i + 1) % n) as Site }, 1.0);
    }
    Ok(m)
}

/// One-dimensional cooperative branching: `coop_{i,i+s,i+2s}` at `lambda`
/// for `s = ±1`, `death_i` at rate one.
pub fn cooperative_1d(lattice: &Arc<Lattice>, lambda: f64) -> Result<ModelSpec> {
    check_nonneg("lambda", lambda)?;
    let n = ring_len(lattice, 5)?;
    let mut m =
        ModelSpec::new("cooperative_1d", lattice, Alphabet::Binary).param("lambda", lambda);
    for i in 0..n {
        let at = |d: isize| ((i as isize + d).rem_euclid(n as isize)) as Site;
        m.push(LocalMap::Coop { i: i as Site, j: at(1), k: at(2) }, lambda);
        m.push(LocalMap::Coop { i: i as Site, j: at(-1), k: at(-2) }, lambda);
    }
    for i in 0..n {
        m.push(LocalMap::Death { i: i as Site }, 1.0);
    }
    Ok(m)
}

/// Summability constants of a generator at its worst site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    /// `sup_i sum_{m: i in D(m)} r_m`
    pub k0: f64,
    /// `sup_i sum_{m: i in D(m)} r_m (|R_i(m)| - 1)`
    pub k: f64,
    /// `sup_i sum_{m: i in D(m)} r_m |R_i(m)|`
    pub k1: f64,
}

impl Summability {
    /// `K < 0` certifies ergodicity.
    pub fn ergodic_certificate(&self) -> bool {
        self.k < 0.0
    }
}

pub fn summability_constants(model: &ModelSpec) -> Result<Summability> {
    if model.dynamics != Dynamics::Maps {
        return Err(Error::Parameter("summability constants need a map representation".into()));
    }
    let n = model.n_sites();
    let mut k0 = vec![0.0; n];
    let mut k = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    for inst in &model.instances {
        for i in inst.map.domain() {
            let r = inst.map.relevance(i).len() as f64;
            let i = i as usize;
            k0[i] += inst.rate;
            k[i] += inst.rate * (r - 1.0);
            k1[i] += inst.rate * r;
        }
    }
    let sup = |v: &[f64]| {
        model
            .lattice
            .dynamic_sites()
            .map(|i| v[i])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(Summability { k0: sup(&k0), k: sup(&k), k1: sup(&k1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Convention, LatticeSpec};
    use rand::{Rng, SeedableRng};

    fn ring(n: usize) -> Arc<Lattice> {
        Arc::new(build_lattice(LatticeSpec::ring(n)).unwrap())
    }

    #[test]
    fn contact_ring3_counts() {
        let m = contact(&ring(3), 1.0, 1.0).unwrap();
        let bra = m.instances.iter().filter(|x| matches!(x.map, LocalMap::Bra { .. })).count();
        assert_eq!(bra, 6);
        assert_eq!(m.instances.len(), 9);
        assert!((m.total_rate() - 9.0).abs() < 1e-15);
    }

    #[test]
    fn voter_incoming_rate_is_one() {
        let m = voter(&ring(7)).unwrap();
        for j in 0..7u32 {
            let r: f64 = m
                .instances
                .iter()
                .filter(|x| matches!(x.map, LocalMap::Vot { j: t, .. } if t == j))
                .map(|x| x.rate)
                .sum();
            assert!((r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_parameters_reduce() {
        let l = ring(6);
        let v = voter(&l).unwrap();
        let b = biased_voter(&l, 0.0).unwrap();
        assert_eq!(v.instances, b.instances);
        let c = contact(&l, 1.3, 1.0).unwrap();
        let cv = contact_voter(&l, 1.3, 0.0).unwrap();
        assert_eq!(c.instances, cv.instances);
    }

    #[test]
    fn ising_rates_at_beta_zero() {
        let (p, m) = ising_level_rates(4, 0.0);
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&r| r == 0.0));
        assert_eq!(*m.last().unwrap(), 1.0);
        assert!(m[..m.len() - 1].iter().all(|&r| r == 0.0));
    }

    #[test]
    fn ising_rate_reference_point() {
        let (p, _) = ising_level_rates(6, 0.4);
        assert!((p[0] - 0.166_345_392_987_844_7).abs() < 1e-12);
    }

    #[test]
    fn ising_cumulative_rates() {
        for &(n, beta) in &[(2usize, 0.3), (4, 1.1), (6, 0.4), (8, 2.5)] {
            let (p, m) = ising_level_rates(n, beta);
            assert!(p.iter().chain(&m).all(|&r| r >= 0.0));
            let levels: Vec<i32> = (-(n as i32)..=n as i32).step_by(2).collect();
            for (a, &mag) in levels.iter().enumerate() {
                let up: f64 = p[..=a].iter().sum();
                let down: f64 = m[a..].iter().sum();
                let th = (0.5 * beta * mag as f64).tanh();
                assert!((up - (1.0 + th)).abs() < 1e-12);
                assert!((down - (1.0 - th)).abs() < 1e-12);
            }
            let total: f64 = p.iter().sum();
            assert!((total - (1.0 + (0.5 * beta * n as f64).tanh())).abs() < 1e-12);
        }
    }

    #[test]
    fn ising_map_form_matches_half_rate_heat_bath() {
        let l = Arc::new(build_lattice(LatticeSpec::torus(2, 5)).unwrap());
        let beta = 0.7;
        let ising = ising_glauber(&l, beta).unwrap();
        let potts = potts_glauber(&l, 2, beta).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let x: Vec<u8> = (0..l.len()).map(|_| rng.random_range(0..2)).collect();
            for i in 0..l.len() {
                let a = ising.transition_rates(&x, i);
                let b = potts.transition_rates(&x, i);
                let flip = 1 - x[i] as usize;
                assert!((a[flip] / 2.0 - b[flip]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn potts_infinite_temperature() {
        let l = Arc::new(build_lattice(LatticeSpec::torus(2, 5)).unwrap());
        let m = potts_glauber(&l, 4, 0.0).unwrap();
        let x = vec![0u8; l.len()];
        let r = m.transition_rates(&x, 3);
        assert_eq!(r[0], 0.0);
        assert!(r[1..].iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn ising_rejects_irregular_lattice() {
        let mut s = LatticeSpec::torus(1, 5);
        s.kind = crate::lattice::LatticeKind::FrozenBox;
        s.boundary = Some(1);
        // A frozen segment has regular interior degree, so it is accepted.
        let l = Arc::new(build_lattice(s).unwrap());
        assert!(ising_glauber(&l, 0.5).is_ok());
    }

    fn np_rates(x: &[u8], l: &Lattice, i: usize, alpha: f64) -> f64 {
        let nb = l.neighbors(i);
        let f1 = nb.iter().filter(|&&j| x[j as usize] == 1).count() as f64 / nb.len() as f64;
        let f0 = 1.0 - f1;
        if x[i] == 0 {
            f1 * (f0 + alpha * f1)
        } else {
            f0 * (f1 + alpha * f0)
        }
    }

    #[test]
    fn neuhauser_pacala_rates() {
        let l = Arc::new(build_lattice(LatticeSpec::torus(2, 5)).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for &alpha in &[0.0, 0.3, 0.8, 1.0] {
            let m = neuhauser_pacala(&l, alpha).unwrap();
            for _ in 0..20 {
                let x: Vec<u8> = (0..l.len()).map(|_| rng.random_range(0..2)).collect();
                for i in 0..l.len() {
                    let got = m.transition_rates(&x, i)[1 - x[i] as usize];
                    assert!((got - np_rates(&x, &l, i, alpha)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn neuhauser_pacala_alpha_one_is_voter() {
        let l = ring(9);
        let np = neuhauser_pacala(&l, 1.0).unwrap();
        let v = voter(&l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<u8> = (0..9).map(|_| rng.random_range(0..2)).collect();
            for i in 0..9 {
                assert_eq!(np.transition_rates(&x, i), v.transition_rates(&x, i));
            }
        }
    }

    #[test]
    fn threshold_voter_rates() {
        let l = Arc::new(build_lattice(LatticeSpec::torus(2, 5)).unwrap());
        let m = threshold_voter(&l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x: Vec<u8> = (0..l.len()).map(|_| rng.random_range(0..2)).collect();
            for i in 0..l.len() {
                let other = l.neighbors(i).iter().any(|&j| x[j as usize] != x[i]);
                let want = if other { 1.0 } else { 0.0 };
                let got = m.transition_rates(&x, i)[1 - x[i] as usize];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contact_summability() {
        let s = summability_constants(&contact(&ring(11), 0.3, 1.0).unwrap()).unwrap();
        assert!((s.k - (2.0 * 0.3 - 1.0)).abs() < 1e-12);
        assert!(s.ergodic_certificate());
        let s = summability_constants(&contact(&ring(11), 0.6, 1.0).unwrap()).unwrap();
        assert!(!s.ergodic_certificate());
        let d = summability_constants(&contact(&ring(11), 0.0, 0.7).unwrap()).unwrap();
        assert!((d.k + 0.7).abs() < 1e-15);
    }

    #[test]
    fn ising_summability_certificate() {
        for &(side, dim) in &[(5usize, 1usize), (5, 2), (5, 3)] {
            let l = Arc::new(build_lattice(LatticeSpec::torus(dim, side)).unwrap());
            let n = 2 * dim;
            for &beta in &[0.01, 0.05, 0.1, 0.2, 0.4] {
                let s = summability_constants(&ising_glauber(&l, beta).unwrap()).unwrap();
                let t = (0.5 * beta * n as f64).tanh();
                let want = -2.0 * (1.0 - t) + 2.0 * 2.0 * t * n as f64;
                assert!((s.k - want).abs() < 1e-12);
                let cert = (beta * n as f64).exp() < (n as f64 + 1.0) / n as f64;
                assert_eq!(s.ergodic_certificate(), cert, "n={n} beta={beta}");
            }
        }
    }

    #[test]
    fn certificate_monotone_in_parameters() {
        let l = ring(11);
        let mut last = true;
        for k in 0..40 {
            let lam = k as f64 * 0.025;
            let c = summability_constants(&contact(&l, lam, 1.0).unwrap())
                .unwrap()
                .ergodic_certificate();
            assert!(last || !c);
            last = c;
        }
    }

    #[test]
    fn complete_graph_mean_field_contact() {
        let l = Arc::new(build_lattice(LatticeSpec::complete(10, Convention::IncludeSelf)).unwrap());
        let m = contact_normalized(&l, 2.0).unwrap();
        let x = Configuration::indicator(10, &[0, 1, 2, 3]).states;
        let r = m.transition_rates(&x, 7);
        assert!((r[1] - 2.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn double_death_and_cooperative_shapes() {
        let l = ring(8);
        assert_eq!(contact_double_death(&l, 1.0).unwrap().instances.len(), 24);
        assert_eq!(cooperative_1d(&l, 1.0).unwrap().instances.len(), 24);
        assert!(cooperative_1d(&ring(3), 1.0).is_err());
    }
}
