//! Monotone couplings of pairs of models on one Poisson point set.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphical::{coupled_evolve, CoupledSpec, JointInstance, Order};
use crate::lattice::{Lattice, LatticeSpec};
use crate::maps::{LocalMap, Site};
use crate::models::{
    annihilating_rw, coalescing_rw, contact, contact_double_death, cooperative_1d, ModelSpec,
};
use crate::rng::{par_replicas, Rng};

/// Couples `first` to `second` by driving each map `m` of `first` with the
/// same Poisson points as `translate(m)` in `second`. Rate that one side has
/// in excess of the other runs on that side alone.
pub fn translated_coupling(
    name: &str,
    first: &ModelSpec,
    second: &ModelSpec,
    translate: impl Fn(&LocalMap) -> LocalMap,
    order: Order,
) -> CoupledSpec {
    let mut left: HashMap<LocalMap, f64> = HashMap::new();
    let mut order_of = Vec::new();
    for inst in &second.instances {
        if !left.contains_key(&inst.map) {
            order_of.push(inst.map.clone());
        }
        *left.entry(inst.map.clone()).or_insert(0.0) += inst.rate;
    }
    let mut joint = Vec::new();
    for inst in &first.instances {
        let target = translate(&inst.map);
        let avail = left.get_mut(&target);
        let shared = avail.as_ref().map_or(0.0, |a| a.min(inst.rate));
        if shared > 0.0 {
            joint.push(JointInstance {
                first: Some(inst.map.clone()),
                second: Some(target),
                rate: shared,
            });
            *avail.unwrap() -= shared;
        }
        if inst.rate > shared {
            joint.push(JointInstance { first: Some(inst.map.clone()), second: None, rate: inst.rate - shared });
        }
    }
    for m in order_of {
        let r = left[&m];
        if r > 1e-15 {
            joint.push(JointInstance { first: None, second: Some(m), rate: r });
        }
    }
    CoupledSpec {
        name: name.to_string(),
        n_first: first.n_sites(),
        n_second: second.n_sites(),
        joint,
        order,
    }
}

fn ring(n: usize) -> Result<Arc<Lattice>> {
    Ok(Arc::new(Lattice::new(LatticeSpec::ring(n))?))
}

/// Contact processes at `lambda <= lambda2` on one lattice.
pub fn lambda_coupling(lattice: &Arc<Lattice>, lambda: f64, lambda2: f64) -> Result<CoupledSpec> {
    if lambda > lambda2 {
        return Err(Error::Parameter(format!("need lambda <= lambda', got {lambda} > {lambda2}")));
    }
    let a = contact(lattice, lambda, 1.0)?;
    let b = contact(lattice, lambda2, 1.0)?;
    Ok(translated_coupling("lambda", &a, &b, LocalMap::clone, Order::Le))
}

/// Annihilating walks below coalescing walks: each `ann_ij` shares its
/// points with `rw_ij`.
pub fn ann_coal_coupling(lattice: &Arc<Lattice>) -> Result<CoupledSpec> {
    let a = annihilating_rw(lattice)?;
    let b = coalescing_rw(lattice)?;
    Ok(translated_coupling(
        "ann-coal",
        &a,
        &b,
        |m| match *m {
            LocalMap::Ann { i, j } => LocalMap::Rw { i, j },
            ref other => other.clone(),
        },
        Order::Le,
    ))
}

/// Cooperative branching `X` and the contact process with double deaths `Y`
/// on a ring of `n` sites, with `Y(i) <= X(i) X(i+1)` preserved. Site `i` of
/// `Y` stands for the pair `(i, i+1)` of `X`.
pub fn double_death_coupling(n: usize, lambda: f64) -> Result<CoupledSpec> {
    let l = ring(n)?;
    let x = cooperative_1d(&l, lambda)?;
    let y = contact_double_death(&l, lambda)?;
    let n = n as Site;
    let prev = move |i: Site| (i + n - 1) % n;
    let next = move |i: Site| (i + 1) % n;
    Ok(translated_coupling(
        "double-death",
        &x,
        &y,
        move |m| match *m {
            LocalMap::Death { i } => LocalMap::Death2 { i: prev(i), j: i },
            LocalMap::Coop { i, j, .. } if j == next(i) => LocalMap::Bra { i, j },
            LocalMap::Coop { i, j, k } if j == prev(i) => LocalMap::Bra { i: j, j: k },
            ref other => other.clone(),
        },
        Order::PairProductGe,
    ))
}

/// Contact process on a ring of `side` sites embedded as the first axis of
/// the `dim`-dimensional torus of the same side.
pub fn dimension_coupling(side: usize, dim: usize, lambda: f64) -> Result<CoupledSpec> {
    if dim < 2 {
        return Err(Error::Parameter("the larger lattice needs dimension >= 2".into()));
    }
    let small = ring(side)?;
    let big = Arc::new(Lattice::new(LatticeSpec::torus(dim, side))?);
    let embed: Vec<usize> = (0..side)
        .map(|i| {
            let mut c = vec![0; dim];
            c[0] = i;
            big.index(&c)
        })
        .collect();
    let a = contact(&small, lambda, 1.0)?;
    let b = contact(&big, lambda, 1.0)?;
    let e = embed.clone();
    Ok(translated_coupling(
        "dimension",
        &a,
        &b,
        move |m| m.relabel(|s| e[s as usize] as Site),
        Order::Embedded(embed),
    ))
}

/// Nearest-neighbour contact process below the range-`range` one.
pub fn range_coupling(side: usize, dim: usize, range: usize, lambda: f64) -> Result<CoupledSpec> {
    let nn = Arc::new(Lattice::new(LatticeSpec::torus(dim, side))?);
    let far = Arc::new(Lattice::new(LatticeSpec::torus_range(dim, side, range))?);
    let a = contact(&nn, lambda, 1.0)?;
    let b = contact(&far, lambda, 1.0)?;
    Ok(translated_coupling("range", &a, &b, LocalMap::clone, Order::Le))
}

/// Random initial pair satisfying the coupling's order.
pub fn ordered_initial(spec: &CoupledSpec, density: f64, rng: &mut Rng) -> (Vec<u8>, Vec<u8>) {
    let bern = |rng: &mut Rng| u8::from(rng.random::<f64>() < density);
    let x: Vec<u8> = (0..spec.n_first).map(|_| bern(rng)).collect();
    let mut y: Vec<u8> = (0..spec.n_second).map(|_| bern(rng)).collect();
    match &spec.order {
        Order::Le => {
            for (a, b) in x.iter().zip(y.iter_mut()) {
                *b |= a;
            }
        }
        Order::PairProductGe => {
            let n = x.len();
            for i in 0..n {
                y[i] &= x[i] & x[(i + 1) % n];
            }
        }
        Order::Embedded(map) => {
            for (i, &j) in map.iter().enumerate() {
                y[j] |= x[i];
            }
        }
    }
    (x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub name: String,
    pub runs: usize,
    pub events: usize,
    pub violations: usize,
    /// `(replica, time)` of the first violation found.
    pub first_violation: Option<(usize, f64)>,
}

impl CouplingReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Runs `runs` seeded coupled evolutions from random ordered initial states
/// and checks the order after every event.
pub fn coupling_check(
    spec: &CoupledSpec,
    density: f64,
    horizon: f64,
    runs: usize,
    seed: u64,
) -> Result<CouplingReport> {
    let out = par_replicas(seed, runs, |_, rng| {
        let (x0, y0) = ordered_initial(spec, density, rng);
        coupled_evolve(spec, &x0, &y0, horizon, rng)
    });
    let mut rep = CouplingReport {
        name: spec.name.clone(),
        runs,
        events: 0,
        violations: 0,
        first_violation: None,
    };
    for (k, r) in out.into_iter().enumerate() {
        let r = r?;
        rep.events += r.events;
        if let Some(t) = r.violation {
            rep.violations += 1;
            rep.first_violation.get_or_insert((k, t));
        }
    }
    Ok(rep)
}
