//! Comparison of the one-dimensional contact process with oriented bond
//! percolation.
//!
//! The site `(i1, i2)` of the percolation grid is mapped to the space-time
//! point `(κ, σ) = (i1 - i2, T (i1 + i2))`. The bond towards `(i1, i2 + 1)`
//! is open when the event `G-` occurs: the first infection arrow `κ -> κ-1`
//! after `σ` comes at `τ < σ + T`, `κ` does not die in `(σ, τ]` and `κ - 1`
//! does not die in `(τ, σ + T]`. The bond towards `(i1 + 1, i2)` uses `κ + 1`
//! in the same way (`G+`).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graphical::{reach_with, sample_events, ArrowGraph, EventStream};
use crate::lattice::{Lattice, LatticeSpec};
use crate::maps::LocalMap;
use crate::models::{contact, ModelSpec};
use crate::stats::independence_2x2;

use super::BondField;

/// `(1 - e^{-λT}) e^{-T}`, the probability of a single good event.
pub fn good_event_probability(lambda: f64, t: f64) -> f64 {
    (1.0 - (-lambda * t).exp()) * (-t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Towards `κ - 1`, i.e. the bond `(i1, i2) -> (i1, i2 + 1)`.
    Minus,
    /// Towards `κ + 1`, i.e. the bond `(i1, i2) -> (i1 + 1, i2)`.
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodEvent {
    pub i1: usize,
    pub i2: usize,
    pub dir: Direction,
    /// Ring site of `κ`.
    pub site: usize,
    pub sigma: f64,
    /// First arrow time in `(σ, σ + T)`, if any.
    pub tau: Option<f64>,
    pub good: bool,
}

/// Per-site sorted death and arrow times of a nearest-neighbour contact
/// process on a ring.
#[derive(Debug, Clone)]
pub struct ContactIndex {
    pub len: usize,
    pub deaths: Vec<Vec<f64>>,
    /// Arrows `s -> s + 1`.
    pub right: Vec<Vec<f64>>,
    /// Arrows `s -> s - 1`.
    pub left: Vec<Vec<f64>>,
}

impl ContactIndex {
    pub fn new(model: &ModelSpec, events: &EventStream) -> Result<Self> {
        let len = model.n_sites();
        let mut ix = Self {
            len,
            deaths: vec![Vec::new(); len],
            right: vec![Vec::new(); len],
            left: vec![Vec::new(); len],
        };
        for e in &events.events {
            match model.instances[e.inst as usize].map {
                LocalMap::Death { i } => ix.deaths[i as usize].push(e.t),
                LocalMap::Bra { i, j } => {
                    let (i, j) = (i as usize, j as usize);
                    if j == (i + 1) % len {
                        ix.right[i].push(e.t);
                    } else if (j + 1) % len == i {
                        ix.left[i].push(e.t);
                    } else {
                        return Err(Error::Parameter(format!("arrow {i}->{j} is not nearest-neighbour")));
                    }
                }
                ref m => return Err(Error::Parameter(format!("unexpected map {m} in contact events"))),
            }
        }
        Ok(ix)
    }

    fn first_after(list: &[f64], s: f64) -> Option<f64> {
        let k = list.partition_point(|&t| t <= s);
        list.get(k).copied()
    }

    fn any_in(list: &[f64], s: f64, u: f64) -> bool {
        Self::first_after(list, s).is_some_and(|t| t <= u)
    }

    /// Evaluates the good event for a bond leaving `site` at time `sigma`.
    pub fn good_event(&self, site: usize, sigma: f64, t: f64, dir: Direction) -> (Option<f64>, bool) {
        let (arrows, other) = match dir {
            Direction::Minus => (&self.left[site], (site + self.len - 1) % self.len),
            Direction::Plus => (&self.right[site], (site + 1) % self.len),
        };
        let tau = Self::first_after(arrows, sigma).filter(|&tau| tau < sigma + t);
        let good = tau.is_some_and(|tau| {
            !Self::any_in(&self.deaths[site], sigma, tau)
                && !Self::any_in(&self.deaths[other], tau, sigma + t)
        });
        (tau, good)
    }
}

/// Ring length used for `levels` slabs: `κ` ranges over `[-levels, levels]`.
fn ring_len(levels: usize) -> usize {
    2 * levels + 3
}

/// Good events of every bond with `i1 + i2 < levels`, slab by slab in chain
/// order `G-_κ, G+_κ, G-_{κ+2}, ...` with `κ` increasing.
pub fn contact_good_events(index: &ContactIndex, t: f64, levels: usize) -> Result<Vec<GoodEvent>> {
    if index.len < ring_len(levels) {
        return Err(Error::Window(format!(
            "ring of {} sites cannot hold {levels} levels (need {})",
            index.len,
            ring_len(levels)
        )));
    }
    let centre = levels + 1;
    let mut out = Vec::with_capacity(levels * (levels + 1));
    for level in 0..levels {
        let sigma = t * level as f64;
        for i1 in 0..=level {
            let i2 = level - i1;
            // κ = i1 - i2 increases with i1.
            let site = centre + i1 - i2;
            for dir in [Direction::Minus, Direction::Plus] {
                let (tau, good) = index.good_event(site, sigma, t, dir);
                out.push(GoodEvent { i1, i2, dir, site, sigma, tau, good });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ContactPercolation {
    pub lambda: f64,
    pub t_block: f64,
    pub levels: usize,
    pub field: BondField,
    pub events_log: Vec<GoodEvent>,
    /// Open bonds whose contact path was checked.
    pub verified: usize,
    /// Open bonds without an open contact path between their endpoints.
    pub violations: usize,
}

impl ContactPercolation {
    /// Builds the percolation field from a given contact event stream on the
    /// ring. With `verify`, every open bond is checked by an open-path search
    /// in the events.
    pub fn from_events(
        model: &ModelSpec,
        events: &EventStream,
        t_block: f64,
        levels: usize,
        verify: bool,
    ) -> Result<Self> {
        if !(t_block > 0.0) || levels == 0 {
            return Err(Error::Parameter("need T > 0 and at least one level".into()));
        }
        let needed = t_block * levels as f64;
        if events.horizon < needed {
            return Err(Error::Window(format!(
                "events cover [0, {}] but {levels} levels of height {t_block} need [0, {needed}]",
                events.horizon
            )));
        }
        let index = ContactIndex::new(model, events)?;
        let log = contact_good_events(&index, t_block, levels)?;
        let mut field = BondField::closed(2, levels + 1)?;
        for g in &log {
            if g.good {
                let k = match g.dir {
                    Direction::Plus => 0,
                    Direction::Minus => 1,
                };
                field.set_open(field.index(&[g.i1, g.i2]), k, true)?;
            }
        }
        let (mut verified, mut violations) = (0, 0);
        if verify {
            let graph = ArrowGraph::new(model, false)?;
            let n = model.n_sites();
            // Both bonds of a grid site share the source, so one reach per pair.
            for pair in log.chunks(2) {
                if !pair.iter().any(|g| g.good) {
                    continue;
                }
                let g0 = &pair[0];
                let win = events.window(g0.sigma, g0.sigma + t_block);
                let wet = reach_with(&graph, n, win, &[g0.site], g0.sigma, g0.sigma + t_block);
                for g in pair.iter().filter(|g| g.good) {
                    let target = match g.dir {
                        Direction::Minus => (g.site + n - 1) % n,
                        Direction::Plus => (g.site + 1) % n,
                    };
                    verified += 1;
                    if wet.binary_search(&target).is_err() {
                        violations += 1;
                    }
                }
            }
        }
        let lambda = model.get("lambda").unwrap_or(f64::NAN);
        Ok(Self { lambda, t_block, levels, field, events_log: log, verified, violations })
    }

    pub fn n_bonds(&self) -> usize {
        self.events_log.len()
    }

    pub fn n_good(&self) -> usize {
        self.events_log.iter().filter(|g| g.good).count()
    }

    /// Good-event indicators of each slab, in chain order.
    pub fn slabs(&self) -> Vec<Vec<bool>> {
        let mut out = Vec::with_capacity(self.levels);
        let mut k = 0;
        for level in 0..self.levels {
            let len = 2 * (level + 1);
            out.push(self.events_log[k..k + len].iter().map(|g| g.good).collect());
            k += len;
        }
        out
    }
}

/// Contact process with death rate one and infection rate `lambda` per
/// ordered nearest-neighbour pair on a ring just wide enough for `levels`.
pub fn contact_ring_model(lambda: f64, levels: usize) -> Result<ModelSpec> {
    let lattice = Arc::new(Lattice::new(LatticeSpec::ring(ring_len(levels)))?);
    contact(&lattice, lambda, 1.0)
}

/// Samples a contact graphical representation and builds its percolation
/// field.
pub fn contact_to_percolation(
    lambda: f64,
    t_block: f64,
    levels: usize,
    seed: u64,
    verify: bool,
) -> Result<ContactPercolation> {
    let model = contact_ring_model(lambda, levels)?;
    let events = sample_events(&model, t_block * levels as f64, seed)?;
    ContactPercolation::from_events(&model, &events, t_block, levels, verify)
}

/// Independence test between chain bonds `lag` apart within a slab.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTest {
    pub lag: usize,
    pub table: [[u64; 2]; 2],
    pub stat: f64,
    pub independent: bool,
}

/// Chi-square independence tests of `(χ_n, χ_{n+lag})` pooled over slabs.
pub fn dependence_scan(slabs: &[Vec<bool>], lags: &[usize], alpha: f64) -> Vec<LagTest> {
    lags.iter()
        .map(|&lag| {
            let mut table = [[0u64; 2]; 2];
            for s in slabs {
                for n in 0..s.len().saturating_sub(lag) {
                    table[s[n] as usize][s[n + lag] as usize] += 1;
                }
            }
            let (stat, independent) = independence_2x2(table, alpha);
            LagTest { lag, table, stat, independent }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_values() {
        assert!((good_event_probability(10.0, 0.3) - 0.7039).abs() < 1e-4);
        assert!((good_event_probability(100.0, 0.05) - 0.9448).abs() < 1e-4);
    }

    #[test]
    fn open_bonds_have_contact_paths() {
        for seed in 0..5 {
            let cp = contact_to_percolation(10.0, 0.3, 12, seed, true).unwrap();
            assert_eq!(cp.violations, 0);
            assert_eq!(cp.verified, cp.n_good());
            assert_eq!(cp.field.n_open(), cp.n_good());
            assert_eq!(cp.n_bonds(), 12 * 13);
        }
    }

    #[test]
    fn short_window_rejected() {
        let model = contact_ring_model(1.0, 4).unwrap();
        let events = sample_events(&model, 1.0, 0).unwrap();
        assert!(matches!(
            ContactPercolation::from_events(&model, &events, 0.5, 4, false),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn slabs_follow_chain_order() {
        let cp = contact_to_percolation(10.0, 0.3, 5, 3, false).unwrap();
        let slabs = cp.slabs();
        assert_eq!(slabs.len(), 5);
        assert_eq!(slabs[4].len(), 10);
        let g = &cp.events_log[2];
        assert_eq!((g.i1, g.i2, g.dir), (0, 1, Direction::Minus));
    }
}
