//! Sequential coupling of K-dependent Bernoulli variables to i.i.d. ones.
//!
//! The field is thinned, `χ'_n = ψ_n χ_n` with `ψ_n` i.i.d. Bernoulli(`r`),
//! and the conditional law `p'_n = P[χ'_n = 1 | χ'_0, ..., χ'_{n-1}]` is
//! computed exactly by a forward filter over the hidden variables the field
//! is built from. A uniform `U_n` is then drawn on `(0, p'_n)` or `(p'_n, 1)`
//! according to `χ'_n`, which makes `U_n` independent of the past, and
//! `χ̃_n = 1{U_n < p̃}`.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `(r, p̃)` with `r = 1 - (1-p)^{1/K}` and `p̃ = r^2`.
pub fn kdep_parameters(p: f64, k: usize) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p) || k == 0 {
        return Err(Error::Parameter(format!("need p in [0, 1] and K >= 1, got p={p}, K={k}")));
    }
    let r = 1.0 - (1.0 - p).powf(1.0 / k as f64);
    Ok((r, r * r))
}

/// Exact conditional law of a dependent field given the thinned history.
pub trait ConditionalChain {
    /// `P[χ_n = 1 | χ'_0, ..., χ'_{n-1}]` for the next index.
    fn prob_one(&mut self) -> f64;
    /// Conditions on the thinned value `χ'_n` and moves to the next index.
    fn observe(&mut self, chi_prime: bool, r: f64);
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdepOutput {
    pub r: f64,
    pub p_tilde: f64,
    pub chi_prime: Vec<bool>,
    pub chi_tilde: Vec<bool>,
    /// `p'_n = r P[χ_n = 1 | history]` at each index.
    pub conditionals: Vec<f64>,
}

impl KdepOutput {
    /// Indices where `χ̃ <= χ' <= χ` fails.
    pub fn order_violations(&self, chi: &[bool]) -> usize {
        (0..chi.len())
            .filter(|&n| {
                (self.chi_tilde[n] && !self.chi_prime[n]) || (self.chi_prime[n] && !chi[n])
            })
            .count()
    }

    /// Indices where the computed conditional falls below `p̃`.
    pub fn bound_violations(&self) -> usize {
        self.conditionals.iter().filter(|&&c| c < self.p_tilde).count()
    }

    pub fn min_conditional(&self) -> f64 {
        self.conditionals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Couples a `K`-dependent field with `P[χ_n = 1] >= p` to i.i.d.
/// Bernoulli(`p̃`) variables below it.
pub fn kdep_couple(
    chi: &[bool],
    chain: &mut dyn ConditionalChain,
    k: usize,
    p: f64,
    rng: &mut Rng,
) -> Result<KdepOutput> {
    let (r, p_tilde) = kdep_parameters(p, k)?;
    if p_tilde < 0.25 {
        return Err(Error::Parameter(format!(
            "p̃ = {p_tilde:.4} < 1/4 for p = {p}, K = {k}"
        )));
    }
    let mut out = KdepOutput {
        r,
        p_tilde,
        chi_prime: Vec::with_capacity(chi.len()),
        chi_tilde: Vec::with_capacity(chi.len()),
        conditionals: Vec::with_capacity(chi.len()),
    };
    for &c in chi {
        let pn = r * chain.prob_one();
        let psi = rng.random::<f64>() < r;
        let cp = psi && c;
        let v: f64 = rng.random();
        let u = if cp { pn * v } else { pn + (1.0 - pn) * v };
        out.conditionals.push(pn);
        out.chi_prime.push(cp);
        out.chi_tilde.push(u < p_tilde);
        chain.observe(cp, r);
    }
    Ok(out)
}

/// Largest filter state space accepted by `WindowField`.
pub const MAX_WINDOW_STATES: usize = 1_000_000;

/// Window predicate given as a plain function pointer.
pub type WindowEvent = fn(&[u8]) -> bool;

/// A field `χ_n = g(ξ_n, ..., ξ_{n+w-1})` over i.i.d. symbols `ξ` with law
/// `probs`.
pub struct WindowField<G: Fn(&[u8]) -> bool> {
    probs: Vec<f64>,
    width: usize,
    g: G,
    states: usize,
    belief: Vec<f64>,
    scratch: Vec<f64>,
    buf: Vec<u8>,
}

impl<G: Fn(&[u8]) -> bool> WindowField<G> {
    pub fn new(probs: Vec<f64>, width: usize, g: G) -> Result<Self> {
        if width == 0 || probs.is_empty() {
            return Err(Error::Window("window needs width >= 1 and a nonempty alphabet".into()));
        }
        let a = probs.len();
        let states = (a as f64).powi(width as i32 - 1);
        if states > MAX_WINDOW_STATES as f64 {
            return Err(Error::Window(format!(
                "{a}^{} = {states} filter states exceeds {MAX_WINDOW_STATES}",
                width - 1
            )));
        }
        let states = states as usize;
        let mut f = Self {
            probs,
            width,
            g,
            states,
            belief: vec![0.0; states],
            scratch: vec![0.0; states],
            buf: vec![0; width],
        };
        f.reset();
        Ok(f)
    }

    /// Resets the filter to the prior of `(ξ_0, ..., ξ_{w-2})`.
    pub fn reset(&mut self) {
        for s in 0..self.states {
            self.belief[s] = self.prior_of(s);
        }
    }

    fn prior_of(&self, mut s: usize) -> f64 {
        let a = self.probs.len();
        let mut w = 1.0;
        for _ in 0..self.width - 1 {
            w *= self.probs[s % a];
            s /= a;
        }
        w
    }

    /// Decodes state `s` (oldest symbol least significant) plus a new symbol
    /// into the window buffer.
    fn fill(&mut self, mut s: usize, new: usize) {
        let a = self.probs.len();
        for k in 0..self.width - 1 {
            self.buf[k] = (s % a) as u8;
            s /= a;
        }
        self.buf[self.width - 1] = new as u8;
    }

    fn next_state(&self, s: usize, new: usize) -> usize {
        let a = self.probs.len();
        if self.width == 1 {
            return 0;
        }
        s / a + new * a.pow(self.width as u32 - 2)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<bool> {
        let cdf: Vec<f64> = self
            .probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let xi: Vec<u8> = (0..n + self.width - 1)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u8
            })
            .collect();
        (0..n).map(|k| (self.g)(&xi[k..k + self.width])).collect()
    }
}

impl<G: Fn(&[u8]) -> bool> ConditionalChain for WindowField<G> {
    fn prob_one(&mut self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..self.states {
            let b = self.belief[s];
            if b == 0.0 {
                continue;
            }
            den += b;
            for new in 0..self.probs.len() {
                self.fill(s, new);
                if (self.g)(&self.buf) {
                    num += b * self.probs[new];
                }
            }
        }
        num / den
    }

    fn observe(&mut self, chi_prime: bool, r: f64) {
        let (l1, l0) = if chi_prime { (r, 0.0) } else { (1.0 - r, 1.0) };
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..self.states {
            let b = self.belief[s];
            if b == 0.0 {
                continue;
            }
            for new in 0..self.probs.len() {
                self.fill(s, new);
                let like = if (self.g)(&self.buf) { l1 } else { l0 };
                let ns = self.next_state(s, new);
                self.scratch[ns] += b * self.probs[new] * like;
            }
        }
        let z: f64 = self.scratch.iter().sum();
        for (b, v) in self.belief.iter_mut().zip(&self.scratch) {
            *b = v / z;
        }
    }
}

/// The field `χ_n = φ_n φ_{n+1}` with `φ` i.i.d. Bernoulli(`√p`). It is
/// 3-dependent with `P[χ_n = 1] = p`.
pub fn phi_product_field(p: f64) -> Result<WindowField<WindowEvent>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("p = {p} outside [0, 1]")));
    }
    let q = p.sqrt();
    fn both(w: &[u8]) -> bool {
        w[0] == 1 && w[1] == 1
    }
    WindowField::new(vec![1.0 - q, q], 2, both as fn(&[u8]) -> bool)
}

/// Exact filter for the contact good-event field of one or more time slabs.
///
/// Within a slab the bonds come in chain order `G-_κ, G+_κ, G-_{κ+2}, ...`.
/// Bond `n` is a function of its own first arrow time `τ ~ Exp(λ)` and two
/// hidden link variables shared with its chain neighbours: the first death
/// time `d` at its owner site (law `Exp(1)` with the event `d > T` as an
/// atom) and the last death time `ℓ` in the slab at the site it infects
/// (density `e^{-(T-s)}` with the atom `ℓ = 0` for no death). Given
/// `(d, ℓ)`, `P[G = 1] = (e^{-λℓ} - e^{-λ min(d, T)})^+`. Both link
/// variables are discretised on `cells` equal cells of `[0, T]` with exact
/// cell masses and midpoint values; the kernel vanishes continuously on the
/// diagonal, so the discretisation error is second order in the mesh.
pub struct ContactChain {
    /// `A[k] = e^{-λ min(d_k, T)}` for death-time points (last = atom `d > T`).
    a_val: Vec<f64>,
    a_mass: Vec<f64>,
    /// `B[j] = e^{-λ ℓ_j}` for last-death points (first = atom `ℓ = 0`).
    b_val: Vec<f64>,
    b_mass: Vec<f64>,
    segments: Vec<usize>,
    seg: usize,
    pos: usize,
    belief: Vec<f64>,
    g: Vec<f64>,
    prefix: Vec<f64>,
    prefix_b: Vec<f64>,
}

impl ContactChain {
    /// `segments` lists the number of bonds in each independent slab; each
    /// slab starts with a `G-` bond.
    pub fn new(lambda: f64, t: f64, cells: usize, segments: Vec<usize>) -> Result<Self> {
        if !(lambda > 0.0 && t > 0.0) || cells == 0 {
            return Err(Error::Parameter("need lambda > 0, T > 0 and cells > 0".into()));
        }
        let h = t / cells as f64;
        let mut a_val = Vec::with_capacity(cells + 1);
        let mut a_mass = Vec::with_capacity(cells + 1);
        let mut b_val = vec![1.0];
        let mut b_mass = vec![(-t).exp()];
        for k in 0..cells {
            let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
            let mid = 0.5 * (lo + hi);
            a_val.push((-lambda * mid).exp());
            a_mass.push((-lo).exp() - (-hi).exp());
            b_val.push((-lambda * mid).exp());
            b_mass.push((-(t - hi)).exp() - (-(t - lo)).exp());
        }
        a_val.push((-lambda * t).exp());
        a_mass.push((-t).exp());
        let n = cells + 1;
        let mut c = Self {
            a_val,
            a_mass,
            b_val,
            b_mass,
            segments,
            seg: 0,
            pos: 0,
            belief: vec![0.0; n],
            g: vec![0.0; n],
            prefix: vec![0.0; n],
            prefix_b: vec![0.0; n],
        };
        c.start_segment();
        Ok(c)
    }

    fn start_segment(&mut self) {
        self.pos = 0;
        self.belief.copy_from_slice(&self.b_mass);
    }

    /// `g(h') = Σ_h belief(h) k(h, h')` for the next link variable. Points
    /// satisfy `ℓ_j < min(d_k, T)` exactly when `j <= k`.
    fn propagate(&mut self) {
        let n = self.belief.len();
        if self.pos % 2 == 0 {
            // G-: current link is ℓ (index j), next is d (index k).
            let (mut s0, mut sb) = (0.0, 0.0);
            for k in 0..n {
                s0 += self.belief[k];
                sb += self.belief[k] * self.b_val[k];
                self.prefix[k] = s0;
                self.prefix_b[k] = sb;
            }
            for k in 0..n {
                self.g[k] = (self.prefix_b[k] - self.a_val[k] * self.prefix[k]).max(0.0);
            }
        } else {
            // G+: current link is d (index k), next is ℓ (index j).
            let (mut s0, mut sa) = (0.0, 0.0);
            for j in (0..n).rev() {
                s0 += self.belief[j];
                sa += self.belief[j] * self.a_val[j];
                self.prefix[j] = s0;
                self.prefix_b[j] = sa;
            }
            for j in 0..n {
                self.g[j] = (self.b_val[j] * self.prefix[j] - self.prefix_b[j]).max(0.0);
            }
        }
    }

    fn next_mass(&self) -> &[f64] {
        if self.pos % 2 == 0 {
            &self.a_mass
        } else {
            &self.b_mass
        }
    }

    /// Samples the good-event indicators of the given slabs directly from
    /// the link variables and arrow times.
    pub fn sample(lambda: f64, t: f64, segments: &[usize], rng: &mut Rng) -> Vec<bool> {
        use rand_distr::{Distribution, Exp1};
        let mut out = Vec::new();
        for &len in segments {
            let last_death = |rng: &mut Rng| -> f64 {
                let e: f64 = Exp1.sample(rng);
                (t - e).max(0.0)
            };
            let first_death = |rng: &mut Rng| -> f64 { Exp1.sample(rng) };
            let mut link = last_death(rng);
            for n in 0..len {
                let next = if n % 2 == 0 { first_death(rng) } else { last_death(rng) };
                let (d, l) = if n % 2 == 0 { (next, link) } else { (link, next) };
                let e: f64 = Exp1.sample(rng);
                let tau = e / lambda;
                out.push(tau < t && tau < d && tau > l);
                link = next;
            }
        }
        out
    }
}

impl ConditionalChain for ContactChain {
    fn prob_one(&mut self) -> f64 {
        self.propagate();
        let z: f64 = self.belief.iter().sum();
        let mass = self.next_mass();
        mass.iter().zip(&self.g).map(|(m, g)| m * g).sum::<f64>() / z
    }

    fn observe(&mut self, chi_prime: bool, r: f64) {
        let (l1, l0) = if chi_prime { (r, 0.0) } else { (1.0 - r, 1.0) };
        let z: f64 = self.belief.iter().sum();
        let mass: Vec<f64> = self.next_mass().to_vec();
        let mut total = 0.0;
        for (k, m) in mass.iter().enumerate() {
            let g = self.g[k] / z;
            let v = m * (l0 + (l1 - l0) * g);
            self.belief[k] = v;
            total += v;
        }
        for b in self.belief.iter_mut() {
            *b /= total;
        }
        self.pos += 1;
        if self.seg < self.segments.len() && self.pos >= self.segments[self.seg] {
            self.seg += 1;
            self.start_segment();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters() {
        let (r, pt) = kdep_parameters(1.0, 3).unwrap();
        assert_eq!((r, pt), (1.0, 1.0));
        let (_, pt) = kdep_parameters(0.99, 3).unwrap();
        assert!((pt - 0.6155).abs() < 1e-4);
    }

    #[test]
    fn small_p_tilde_rejected() {
        let mut f = phi_product_field(0.5).unwrap();
        let mut rng = crate::rng::replica_rng(0, 0);
        assert!(kdep_couple(&[true], &mut f, 3, 0.5, &mut rng).is_err());
    }

    #[test]
    fn phi_field_zero_conditional() {
        // P[χ_n = 1 | χ_{n-1} = 0, χ_{n-2} = 1] = 0 without thinning.
        let mut f = phi_product_field(0.9).unwrap();
        f.prob_one();
        f.observe(true, 1.0);
        f.prob_one();
        f.observe(false, 1.0);
        assert_eq!(f.prob_one(), 0.0);
    }

    #[test]
    fn phi_field_marginal() {
        let mut f = phi_product_field(0.9).unwrap();
        assert!((f.prob_one() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contact_chain_marginal() {
        let (lambda, t) = (10.0, 0.3);
        let mut c = ContactChain::new(lambda, t, 4000, vec![4]).unwrap();
        let want = (1.0 - (-lambda * t).exp()) * (-t).exp();
        assert!((c.prob_one() - want).abs() < 1e-6);
    }

    #[test]
    fn oversized_window_rejected() {
        assert!(WindowField::new(vec![0.5; 4], 12, |_: &[u8]| true).is_err());
    }
}
