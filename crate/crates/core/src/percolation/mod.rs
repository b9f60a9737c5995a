//! Oriented bond percolation, the Peierls bound, K-dependent to i.i.d.
//! couplings and the comparison of the contact process with percolation.

mod contact;
mod kdep;

pub use contact::{
    contact_good_events, contact_ring_model, contact_to_percolation, dependence_scan,
    good_event_probability,
    ContactIndex, ContactPercolation, Direction, GoodEvent, LagTest,
};
pub use kdep::{
    kdep_couple, kdep_parameters, phi_product_field, ConditionalChain, ContactChain, KdepOutput,
    WindowEvent, WindowField,
};

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{par_replicas, replica_rng};
use crate::stats::{wilson, Proportion};

/// Open/closed flags on the upward bonds of the box `{0, ..., side-1}^d`.
///
/// Sites are indexed with coordinate 0 least significant. The bond leaving
/// site `i` in direction `k` is stored at `i * d + k` and exists when the
/// `k`-th coordinate of `i` is below `side - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondField {
    pub dim: usize,
    pub side: usize,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    open: Vec<bool>,
}

impl BondField {
    pub fn closed(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::Parameter("box needs positive dimension and side".into()));
        }
        let n = side
            .checked_pow(dim as u32)
            .filter(|n| n.checked_mul(dim).is_some() && *n <= 1 << 28)
            .ok_or_else(|| Error::Parameter("box too large".into()))?;
        Ok(Self { dim, side, p: None, seed: None, open: vec![false; n * dim] })
    }

    pub fn n_sites(&self) -> usize {
        self.open.len() / self.dim
    }

    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for v in c.iter_mut() {
            *v = i % self.side;
            i /= self.side;
        }
        c
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter().rev().fold(0, |acc, &v| acc * self.side + v)
    }

    fn stride(&self, k: usize) -> usize {
        self.side.pow(k as u32)
    }

    fn coord(&self, i: usize, k: usize) -> usize {
        (i / self.stride(k)) % self.side
    }

    /// `l1` height of a site.
    pub fn height(&self, i: usize) -> usize {
        (0..self.dim).map(|k| self.coord(i, k)).sum()
    }

    pub fn bond_exists(&self, i: usize, k: usize) -> bool {
        self.coord(i, k) + 1 < self.side
    }

    pub fn is_open(&self, i: usize, k: usize) -> bool {
        self.open[i * self.dim + k]
    }

    pub fn set_open(&mut self, i: usize, k: usize, v: bool) -> Result<()> {
        if k >= self.dim || i >= self.n_sites() || !self.bond_exists(i, k) {
            return Err(Error::Parameter(format!("no bond from site {i} in direction {k}")));
        }
        self.open[i * self.dim + k] = v;
        Ok(())
    }

    pub fn n_bonds(&self) -> usize {
        (0..self.n_sites())
            .map(|i| (0..self.dim).filter(|&k| self.bond_exists(i, k)).count())
            .sum()
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&b| b).count()
    }

    /// Sites reachable from `origin` along open upward bonds.
    pub fn reachable(&self, origin: usize) -> Result<Vec<bool>> {
        if origin >= self.n_sites() {
            return Err(Error::SiteOutOfRange { site: origin, n: self.n_sites() });
        }
        let mut seen = vec![false; self.n_sites()];
        let mut queue = VecDeque::from([origin]);
        seen[origin] = true;
        while let Some(i) = queue.pop_front() {
            for k in 0..self.dim {
                if self.is_open(i, k) {
                    let j = i + self.stride(k);
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        Ok(seen)
    }

    /// Whether an open path from the origin reaches `l1` height `n`.
    pub fn survives_to_level(&self, n: usize) -> bool {
        // Level-by-level sweep: only the wet sites of the current level are kept.
        let mut wet = vec![0usize];
        for _ in 0..n {
            let mut next = Vec::with_capacity(wet.len() * self.dim);
            for &i in &wet {
                for k in 0..self.dim {
                    if self.is_open(i, k) {
                        next.push(i + self.stride(k));
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            wet = next;
        }
        true
    }

    /// Longest open path starting at each site, by dynamic programming from
    /// the top of the box down.
    pub fn longest_open_paths(&self) -> Vec<usize> {
        let n = self.n_sites();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.height(i)));
        let mut best = vec![0usize; n];
        for i in order {
            for k in 0..self.dim {
                if self.is_open(i, k) {
                    best[i] = best[i].max(1 + best[i + self.stride(k)]);
                }
            }
        }
        best
    }

    /// Writes `i1,...,id,direction,open` rows for every bond.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (1..=self.dim).map(|k| format!("i{k}")).collect();
        writeln!(w, "{},direction,open", cols.join(","))?;
        for i in 0..self.n_sites() {
            let c = self.coords(i);
            for k in 0..self.dim {
                if self.bond_exists(i, k) {
                    let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{},{},{}", cs.join(","), k + 1, self.is_open(i, k) as u8)?;
                }
            }
        }
        Ok(())
    }
}

/// i.i.d. Bernoulli(`p`) bond field on `{0, ..., side-1}^d`.
pub fn sample_bond_field(dim: usize, side: usize, p: f64, seed: u64) -> Result<BondField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("p = {p} outside [0, 1]")));
    }
    let mut f = BondField::closed(dim, side)?;
    let mut rng = replica_rng(seed, 0);
    for i in 0..f.n_sites() {
        for k in 0..dim {
            if f.bond_exists(i, k) {
                f.open[i * dim + k] = rng.random::<f64>() < p;
            }
        }
    }
    f.p = Some(p);
    f.seed = Some(seed);
    Ok(f)
}

/// Fraction of fields in which the origin is connected to height `n`.
pub fn percolation_theta(dim: usize, p: f64, n: usize, replicas: u64, seed: u64) -> Result<Proportion> {
    if n == 0 || replicas == 0 {
        return Err(Error::Parameter("n and replicas must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("p = {p} outside [0, 1]")));
    }
    let hits: Vec<bool> = par_replicas(seed, replicas as usize, |_, rng| {
        survives_lazy(dim, p, n, rng)
    });
    let k = hits.iter().filter(|&&h| h).count() as u64;
    Ok(wilson(k, replicas, 1.96))
}

/// Level-by-level survival with bonds drawn only where the cluster needs them.
fn survives_lazy(dim: usize, p: f64, n: usize, rng: &mut crate::rng::Rng) -> bool {
    let mut wet: Vec<Vec<u32>> = vec![vec![0; dim]];
    for _ in 0..n {
        let mut next: Vec<Vec<u32>> = Vec::new();
        for c in &wet {
            for k in 0..dim {
                if rng.random::<f64>() < p {
                    let mut d = c.clone();
                    d[k] += 1;
                    next.push(d);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return false;
        }
        wet = next;
    }
    true
}

/// Tail `Σ_{n >= 2m} n 3^n (1-p)^{n/2}` of the Peierls contour series in
/// closed form, `+∞` when `p <= 8/9`.
pub fn peierls_bound(p: f64, m: usize) -> f64 {
    let x = 3.0 * (1.0 - p).max(0.0).sqrt();
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let n0 = (2 * m).max(2) as f64;
    x.powf(n0) * (n0 - (n0 - 1.0) * x) / ((1.0 - x) * (1.0 - x))
}

/// The same tail by direct summation. Divergence is detected numerically:
/// terms that stop decreasing after their peak, or a sum that overflows,
/// report `+∞`.
pub fn peierls_bound_direct(p: f64, m: usize, max_terms: usize) -> f64 {
    let x = 3.0 * (1.0 - p).max(0.0).sqrt();
    let n0 = (2 * m).max(2);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let peak = if x < 1.0 && x > 0.0 { (-1.0 / x.ln()).ceil() as usize + 1 } else { 0 };
    for n in n0..n0 + max_terms {
        let term = n as f64 * (n as f64 * x.ln()).exp();
        sum += term;
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        if n > peak && term >= prev {
            return f64::INFINITY;
        }
        if term <= 1e-17 * sum || term == 0.0 {
            return sum;
        }
        prev = term;
    }
    f64::INFINITY
}

/// Smallest `m` whose Peierls tail is below one.
pub fn peierls_certificate(p: f64, max_m: usize) -> Option<usize> {
    (1..=max_m).find(|&m| peierls_bound(p, m) < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_fields() {
        let f = sample_bond_field(2, 6, 0.0, 1).unwrap();
        assert_eq!(f.n_open(), 0);
        assert_eq!(f.reachable(0).unwrap().iter().filter(|&&b| b).count(), 1);
        let f = sample_bond_field(2, 6, 1.0, 1).unwrap();
        assert_eq!(f.n_open(), f.n_bonds());
        assert!(f.reachable(0).unwrap().iter().all(|&b| b));
        assert_eq!(f.n_bonds(), 2 * 6 * 5);
    }

    #[test]
    fn peierls_closed_form_matches_sum() {
        assert_eq!(peierls_bound(0.8, 1), f64::INFINITY);
        assert_eq!(peierls_bound(8.0 / 9.0, 1), f64::INFINITY);
        for m in 1..6 {
            let a = peierls_bound(0.95, m);
            let b = peierls_bound_direct(0.95, m, 100_000);
            assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
        }
        assert!(peierls_bound_direct(0.85, 1, 1_000_000).is_infinite());
        assert!(peierls_certificate(0.95, 50).is_some());
    }

    #[test]
    fn level_sweep_agrees_with_longest_path() {
        for seed in 0..100 {
            let f = sample_bond_field(2, 21, 0.65, seed).unwrap();
            let best = f.longest_open_paths();
            assert_eq!(f.survives_to_level(20), best[0] >= 20);
        }
    }

    #[test]
    fn theta_input_checks() {
        assert!(percolation_theta(2, 1.5, 10, 10, 0).is_err());
        assert!(percolation_theta(2, 0.5, 0, 10, 0).is_err());
    }
}
