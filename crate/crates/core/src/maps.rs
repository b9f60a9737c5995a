//! Local maps: apply semantics, domains, relevance sets and brute-force
//! structural classification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Configuration};

pub type Site = u32;

/// Largest support that exhaustive enumeration will accept.
pub const MAX_ENUM_SUPPORT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Vot,
    Bra,
    Death,
    Death2,
    Rw,
    Ann,
    Excl,
    Coop,
    Kill,
    Bran,
    Rebel,
    GlauberPlus,
    GlauberMinus,
    Threshold,
    Linear,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Vot => "vot",
            MapKind::Bra => "bra",
            MapKind::Death => "death",
            MapKind::Death2 => "death2",
            MapKind::Rw => "rw",
            MapKind::Ann => "ann",
            MapKind::Excl => "excl",
            MapKind::Coop => "coop",
            MapKind::Kill => "kill",
            MapKind::Bran => "bran",
            MapKind::Rebel => "rebel",
            MapKind::GlauberPlus => "glauber_plus",
            MapKind::GlauberMinus => "glauber_minus",
            MapKind::Threshold => "threshold",
            MapKind::Linear => "linear",
        }
    }
}

/// A local map on `{0,1}^Λ` (or `{-1,+1}^Λ` for the Glauber level maps).
///
/// Site arguments follow the usual subscript order: `Vot { i, j }` copies the
/// type of `i` onto `j`, `Coop { i, j, k }` places a particle at `k` when both
/// `i` and `j` are occupied, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalMap {
    Vot { i: Site, j: Site },
    Bra { i: Site, j: Site },
    Death { i: Site },
    Death2 { i: Site, j: Site },
    Rw { i: Site, j: Site },
    Ann { i: Site, j: Site },
    Excl { i: Site, j: Site },
    Coop { i: Site, j: Site, k: Site },
    Kill { i: Site, j: Site },
    Bran { i: Site, j: Site },
    Rebel { i: Site, j: Site, k: Site },
    /// Sets `i` to `+1` when the local magnetisation is at least `level`.
    GlauberPlus { i: Site, level: i32, nbrs: Arc<[Site]> },
    /// Sets `i` to `-1` when the local magnetisation is at most `level`.
    GlauberMinus { i: Site, level: i32, nbrs: Arc<[Site]> },
    /// `x(i) <- x(i) xor (xor of x over delta)`.
    Threshold { i: Site, delta: Arc<[Site]> },
    /// Generic additive (`xor = false`) or cancellative (`xor = true`) map
    /// given by the images of unit configurations on `support`; bit `b` of
    /// `images[a]` is `m(1_{support[a]})(support[b])`.
    Linear { xor: bool, support: Arc<[Site]>, images: Arc<[u32]> },
}

impl fmt::Display for LocalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind().as_str())?;
        let p = self.params();
        write!(f, "(")?;
        for (n, v) in p.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl LocalMap {
    pub fn kind(&self) -> MapKind {
        match self {
            LocalMap::Vot { .. } => MapKind::Vot,
            LocalMap::Bra { .. } => MapKind::Bra,
            LocalMap::Death { .. } => MapKind::Death,
            LocalMap::Death2 { .. } => MapKind::Death2,
            LocalMap::Rw { .. } => MapKind::Rw,
            LocalMap::Ann { .. } => MapKind::Ann,
            LocalMap::Excl { .. } => MapKind::Excl,
            LocalMap::Coop { .. } => MapKind::Coop,
            LocalMap::Kill { .. } => MapKind::Kill,
            LocalMap::Bran { .. } => MapKind::Bran,
            LocalMap::Rebel { .. } => MapKind::Rebel,
            LocalMap::GlauberPlus { .. } => MapKind::GlauberPlus,
            LocalMap::GlauberMinus { .. } => MapKind::GlauberMinus,
            LocalMap::Threshold { .. } => MapKind::Threshold,
            LocalMap::Linear { .. } => MapKind::Linear,
        }
    }

    /// Integer parameters written to event dumps: sites, then the level for
    /// Glauber maps or the subset for threshold maps.
    pub fn params(&self) -> Vec<i64> {
        use LocalMap::*;
        match self {
            Death { i } => vec![*i as i64],
            Vot { i, j } | Bra { i, j } | Death2 { i, j } | Rw { i, j } | Ann { i, j }
            | Excl { i, j } | Kill { i, j } | Bran { i, j } => vec![*i as i64, *j as i64],
            Coop { i, j, k } | Rebel { i, j, k } => vec![*i as i64, *j as i64, *k as i64],
            GlauberPlus { i, level, .. } | GlauberMinus { i, level, .. } => {
                vec![*i as i64, *level as i64]
            }
            Threshold { i, delta } => {
                let mut v = vec![*i as i64];
                v.extend(delta.iter().map(|&d| d as i64));
                v
            }
            Linear { support, .. } => support.iter().map(|&s| s as i64).collect(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            LocalMap::GlauberPlus { .. } | LocalMap::GlauberMinus { .. } => Alphabet::Spin,
            _ => Alphabet::Binary,
        }
    }

    /// Writable sites `D(m)`.
    pub fn domain(&self) -> Vec<Site> {
        use LocalMap::*;
        match self {
            Vot { j, .. } | Bra { j, .. } | Kill { j, .. } | Bran { j, .. } => vec![*j],
            Death { i } => vec![*i],
            Death2 { i, j } | Rw { i, j } | Ann { i, j } | Excl { i, j } => sorted(vec![*i, *j]),
            Coop { k, .. } | Rebel { k, .. } => vec![*k],
            GlauberPlus { i, .. } | GlauberMinus { i, .. } => vec![*i],
            Threshold { i, delta } => {
                if delta.is_empty() {
                    vec![]
                } else {
                    vec![*i]
                }
            }
            Linear { support, images, .. } => {
                // Site b is writable unless every unit image keeps it as identity.
                let mut d = Vec::new();
                for (b, &s) in support.iter().enumerate() {
                    let identity = images.iter().enumerate().all(|(a, &img)| {
                        let bit = (img >> b) & 1 == 1;
                        bit == (a == b)
                    });
                    if !identity {
                        d.push(s);
                    }
                }
                sorted(d)
            }
        }
    }

    /// Sites `R_i(m)` whose value can affect the new value at `i`.
    pub fn relevance(&self, i: Site) -> Vec<Site> {
        use LocalMap::*;
        if !self.domain().contains(&i) {
            return vec![i];
        }
        let out = match self {
            Vot { i: a, .. } => vec![*a],
            Bra { i: a, j: b } | Kill { i: a, j: b } | Bran { i: a, j: b } => vec![*a, *b],
            Death { .. } | Death2 { .. } => vec![],
            Rw { i: a, j: b } | Ann { i: a, j: b } => {
                if i == *a {
                    vec![]
                } else {
                    vec![*a, *b]
                }
            }
            Excl { i: a, j: b } => {
                if i == *a {
                    vec![*b]
                } else {
                    vec![*a]
                }
            }
            Coop { i: a, j: b, k: c } | Rebel { i: a, j: b, k: c } => vec![*a, *b, *c],
            GlauberPlus { level, nbrs, .. } => {
                if *level <= -(nbrs.len() as i32) {
                    vec![]
                } else {
                    let mut v = nbrs.to_vec();
                    v.push(i);
                    v
                }
            }
            GlauberMinus { level, nbrs, .. } => {
                if *level >= nbrs.len() as i32 {
                    vec![]
                } else {
                    let mut v = nbrs.to_vec();
                    v.push(i);
                    v
                }
            }
            Threshold { delta, .. } => {
                let mut v: Vec<Site> = delta.iter().copied().filter(|&d| d != i).collect();
                if !delta.contains(&i) {
                    v.push(i);
                }
                v
            }
            Linear { support, images, .. } => {
                let b = support.iter().position(|&s| s == i).expect("domain site in support");
                let mut v = Vec::new();
                for (a, &img) in images.iter().enumerate() {
                    if (img >> b) & 1 == 1 {
                        v.push(support[a]);
                    }
                }
                v
            }
        };
        sorted(out)
    }

    /// Sites read or written by the map.
    pub fn support(&self) -> Vec<Site> {
        let mut s = self.domain();
        for i in self.domain() {
            s.extend(self.relevance(i));
        }
        match self {
            LocalMap::Linear { support, .. } => s.extend(support.iter().copied()),
            LocalMap::GlauberPlus { i, nbrs, .. } | LocalMap::GlauberMinus { i, nbrs, .. } => {
                s.push(*i);
                s.extend(nbrs.iter().copied());
            }
            LocalMap::Threshold { i, delta } => {
                s.push(*i);
                s.extend(delta.iter().copied());
            }
            _ => {}
        }
        sorted(s)
    }

    /// Applies the map in place. States are bits (spins stored as `0 = -1`).
    #[inline]
    pub fn apply_in_place(&self, x: &mut [u8]) {
        use LocalMap::*;
        match *self {
            Vot { i, j } => x[j as usize] = x[i as usize],
            Bra { i, j } => x[j as usize] |= x[i as usize],
            Death { i } => x[i as usize] = 0,
            Death2 { i, j } => {
                x[i as usize] = 0;
                x[j as usize] = 0;
            }
            Rw { i, j } => {
                x[j as usize] |= x[i as usize];
                x[i as usize] = 0;
            }
            Ann { i, j } => {
                x[j as usize] ^= x[i as usize];
                x[i as usize] = 0;
            }
            Excl { i, j } => x.swap(i as usize, j as usize),
            Coop { i, j, k } => x[k as usize] |= x[i as usize] & x[j as usize],
            Kill { i, j } => x[j as usize] &= 1 ^ x[i as usize],
            Bran { i, j } => x[j as usize] ^= x[i as usize],
            Rebel { i, j, k } => x[k as usize] ^= x[i as usize] ^ x[j as usize],
            GlauberPlus { i, level, ref nbrs } => {
                if magnetisation(x, nbrs) >= level {
                    x[i as usize] = 1;
                }
            }
            GlauberMinus { i, level, ref nbrs } => {
                if magnetisation(x, nbrs) <= level {
                    x[i as usize] = 0;
                }
            }
            Threshold { i, ref delta } => {
                let mut v = x[i as usize];
                for &d in delta.iter() {
                    v ^= x[d as usize];
                }
                x[i as usize] = v;
            }
            Linear { xor, ref support, ref images } => {
                let mut out = 0u32;
                for (a, &s) in support.iter().enumerate() {
                    if x[s as usize] == 1 {
                        out = if xor { out ^ images[a] } else { out | images[a] };
                    }
                }
                for (b, &s) in support.iter().enumerate() {
                    x[s as usize] = ((out >> b) & 1) as u8;
                }
            }
        }
    }

    /// Applies the map without writing any pinned site.
    pub fn apply_pinned(&self, x: &mut [u8], pinned: &[bool]) {
        let d = self.domain();
        let saved: Vec<(usize, u8)> = d
            .iter()
            .map(|&s| s as usize)
            .filter(|&s| pinned[s])
            .map(|s| (s, x[s]))
            .collect();
        self.apply_in_place(x);
        for (s, v) in saved {
            x[s] = v;
        }
    }

    /// Checked application to a configuration.
    pub fn apply(&self, cfg: &Configuration) -> Result<Configuration> {
        if cfg.alphabet != self.alphabet() {
            return Err(Error::Alphabet(format!(
                "{} acts on {:?} configurations, got {:?}",
                self,
                self.alphabet(),
                cfg.alphabet
            )));
        }
        if let Some(&s) = self.support().iter().find(|&&s| s as usize >= cfg.len()) {
            return Err(Error::SiteOutOfRange { site: s as usize, n: cfg.len() });
        }
        let mut out = cfg.clone();
        self.apply_in_place(&mut out.states);
        Ok(out)
    }

    /// Rebuilds the map with every site relabelled through `f`.
    pub fn relabel(&self, f: impl Fn(Site) -> Site) -> LocalMap {
        use LocalMap::*;
        match self {
            Vot { i, j } => Vot { i: f(*i), j: f(*j) },
            Bra { i, j } => Bra { i: f(*i), j: f(*j) },
            Death { i } => Death { i: f(*i) },
            Death2 { i, j } => Death2 { i: f(*i), j: f(*j) },
            Rw { i, j } => Rw { i: f(*i), j: f(*j) },
            Ann { i, j } => Ann { i: f(*i), j: f(*j) },
            Excl { i, j } => Excl { i: f(*i), j: f(*j) },
            Coop { i, j, k } => Coop { i: f(*i), j: f(*j), k: f(*k) },
            Kill { i, j } => Kill { i: f(*i), j: f(*j) },
            Bran { i, j } => Bran { i: f(*i), j: f(*j) },
            Rebel { i, j, k } => Rebel { i: f(*i), j: f(*j), k: f(*k) },
            GlauberPlus { i, level, nbrs } => GlauberPlus {
                i: f(*i),
                level: *level,
                nbrs: nbrs.iter().map(|&s| f(s)).collect(),
            },
            GlauberMinus { i, level, nbrs } => GlauberMinus {
                i: f(*i),
                level: *level,
                nbrs: nbrs.iter().map(|&s| f(s)).collect(),
            },
            Threshold { i, delta } => {
                Threshold { i: f(*i), delta: delta.iter().map(|&s| f(s)).collect() }
            }
            Linear { xor, support, images } => Linear {
                xor: *xor,
                support: support.iter().map(|&s| f(s)).collect(),
                images: images.clone(),
            },
        }
    }
}

#[inline]
fn magnetisation(x: &[u8], nbrs: &[Site]) -> i32 {
    let ones: i32 = nbrs.iter().map(|&j| x[j as usize] as i32).sum();
    2 * ones - nbrs.len() as i32
}

fn sorted(mut v: Vec<Site>) -> Vec<Site> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Evaluates a map on configurations of its support encoded as bitmasks.
pub struct SupportEval<'a> {
    map: &'a LocalMap,
    sites: Vec<Site>,
    scratch: Vec<u8>,
}

impl<'a> SupportEval<'a> {
    pub fn new(map: &'a LocalMap) -> Result<Self> {
        Self::with_sites(map, map.support())
    }

    /// Evaluator over `sites`, which must contain the map's support.
    pub fn with_sites(map: &'a LocalMap, sites: Vec<Site>) -> Result<Self> {
        if sites.len() > MAX_ENUM_SUPPORT {
            return Err(Error::SupportTooLarge { support: sites.len(), max: MAX_ENUM_SUPPORT });
        }
        let max = sites.iter().copied().max().unwrap_or(0) as usize;
        Ok(Self { map, sites, scratch: vec![0; max + 1] })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn width(&self) -> usize {
        self.sites.len()
    }

    pub fn eval(&mut self, bits: u32) -> u32 {
        for (a, &s) in self.sites.iter().enumerate() {
            self.scratch[s as usize] = ((bits >> a) & 1) as u8;
        }
        self.map.apply_in_place(&mut self.scratch);
        let mut out = 0u32;
        for (a, &s) in self.sites.iter().enumerate() {
            out |= (self.scratch[s as usize] as u32) << a;
        }
        out
    }
}

/// Relevance set of `i` computed by flipping each support site over every
/// configuration of the support.
pub fn relevance_brute(map: &LocalMap, i: Site) -> Result<Vec<Site>> {
    let mut sites = map.support();
    if !sites.contains(&i) {
        sites.push(i);
        sites.sort_unstable();
    }
    let mut ev = SupportEval::with_sites(map, sites)?;
    let w = ev.width();
    let bi = ev.sites().iter().position(|&s| s == i).expect("i in sites");
    let mut rel = 0u32;
    for x in 0..(1u32 << w) {
        let base = (ev.eval(x) >> bi) & 1;
        for j in 0..w {
            if rel & (1 << j) != 0 {
                continue;
            }
            if (ev.eval(x ^ (1 << j)) >> bi) & 1 != base {
                rel |= 1 << j;
            }
        }
    }
    Ok((0..w).filter(|&j| rel & (1 << j) != 0).map(|j| ev.sites()[j]).collect())
}

/// Writable sites found by brute force.
pub fn domain_brute(map: &LocalMap) -> Result<Vec<Site>> {
    let mut ev = SupportEval::new(map)?;
    let w = ev.width();
    let mut changed = 0u32;
    for x in 0..(1u32 << w) {
        changed |= ev.eval(x) ^ x;
    }
    Ok((0..w).filter(|&j| changed & (1 << j) != 0).map(|j| ev.sites()[j]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub monotone: bool,
    pub additive: bool,
    pub cancellative: bool,
}

/// Brute-force classification over all configurations of the support.
///
/// Monotonicity is checked on covering pairs `x <= x + e_j`, which implies
/// the full order by transitivity.
pub fn classify(map: &LocalMap) -> Result<Classification> {
    let mut ev = SupportEval::new(map)?;
    let w = ev.width();
    let n = 1u32 << w;
    let images: Vec<u32> = (0..n).map(|x| ev.eval(x)).collect();
    let units: Vec<u32> = (0..w).map(|a| images[1 << a]).collect();
    let mut monotone = true;
    'outer: for x in 0..n {
        for j in 0..w {
            if x & (1 << j) == 0 {
                let (lo, hi) = (images[x as usize], images[(x | (1 << j)) as usize]);
                if lo & !hi != 0 {
                    monotone = false;
                    break 'outer;
                }
            }
        }
    }
    let combine = |x: u32, xor: bool| -> u32 {
        let mut out = 0;
        for (a, &u) in units.iter().enumerate() {
            if x & (1 << a) != 0 {
                out = if xor { out ^ u } else { out | u };
            }
        }
        out
    };
    let zero_fixed = images[0] == 0;
    let additive = zero_fixed && (0..n).all(|x| images[x as usize] == combine(x, false));
    let cancellative = zero_fixed && (0..n).all(|x| images[x as usize] == combine(x, true));
    Ok(Classification { monotone, additive, cancellative })
}

/// Arrow and blocking-symbol encoding of an additive or cancellative map:
/// arrows `(i, j)` with `m(1_i)(j) = 1`, `i != j`, and blocks at `i` with
/// `m(1_i)(i) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrowEncoding {
    pub arrows: Vec<(Site, Site)>,
    pub blocks: Vec<Site>,
}

pub fn arrow_encoding(map: &LocalMap) -> Result<ArrowEncoding> {
    let mut ev = SupportEval::new(map)?;
    let w = ev.width();
    let mut arrows = Vec::new();
    let mut blocks = Vec::new();
    for a in 0..w {
        let img = ev.eval(1 << a);
        for b in 0..w {
            let bit = (img >> b) & 1 == 1;
            if a == b {
                if !bit {
                    blocks.push(ev.sites()[a]);
                }
            } else if bit {
                arrows.push((ev.sites()[a], ev.sites()[b]));
            }
        }
    }
    arrows.sort_unstable();
    Ok(ArrowEncoding { arrows, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_catalog() -> Vec<LocalMap> {
        use LocalMap::*;
        let nb: Arc<[Site]> = Arc::from(vec![1, 2, 3, 4]);
        let mut v = vec![
            Vot { i: 0, j: 1 },
            Bra { i: 0, j: 1 },
            Death { i: 0 },
            Death2 { i: 0, j: 1 },
            Rw { i: 0, j: 1 },
            Ann { i: 0, j: 1 },
            Excl { i: 0, j: 1 },
            Coop { i: 0, j: 1, k: 2 },
            Kill { i: 0, j: 1 },
            Bran { i: 0, j: 1 },
            Rebel { i: 0, j: 1, k: 2 },
            Threshold { i: 0, delta: Arc::from(vec![1, 2]) },
            Threshold { i: 0, delta: Arc::from(vec![0, 3]) },
            Threshold { i: 0, delta: Arc::from(vec![]) },
        ];
        for l in [-4, -2, 0, 2, 4] {
            v.push(GlauberPlus { i: 0, level: l, nbrs: nb.clone() });
            v.push(GlauberMinus { i: 0, level: l, nbrs: nb.clone() });
        }
        v
    }

    #[test]
    fn closed_forms_match_brute_force() {
        for m in all_catalog() {
            assert_eq!(m.domain(), domain_brute(&m).unwrap(), "domain of {m}");
            for i in 0..5 {
                assert_eq!(m.relevance(i), relevance_brute(&m, i).unwrap(), "R_{i} of {m}");
            }
        }
    }

    #[test]
    fn documented_relevance_examples() {
        assert_eq!(LocalMap::Vot { i: 3, j: 7 }.domain(), vec![7]);
        assert_eq!(LocalMap::Vot { i: 3, j: 7 }.relevance(7), vec![3]);
        let rw = LocalMap::Rw { i: 3, j: 7 };
        assert_eq!(rw.domain(), vec![3, 7]);
        assert!(rw.relevance(3).is_empty());
        assert_eq!(rw.relevance(7), vec![3, 7]);
        assert!(LocalMap::Death { i: 2 }.relevance(2).is_empty());
        assert_eq!(LocalMap::Death { i: 2 }.relevance(5), vec![5]);
    }

    #[test]
    fn apply_examples() {
        let x = Configuration::new(Alphabet::Binary, vec![1, 0, 1]).unwrap();
        let y = LocalMap::Bra { i: 0, j: 1 }.apply(&x).unwrap();
        assert_eq!(y.states, vec![1, 1, 1]);
        let x = Configuration::new(Alphabet::Binary, vec![1, 1, 0]).unwrap();
        let y = LocalMap::Ann { i: 0, j: 1 }.apply(&x).unwrap();
        assert_eq!(y.states, vec![0, 0, 0]);
        let z = Configuration::zeros(3);
        assert_eq!(LocalMap::Death { i: 1 }.apply(&z).unwrap(), z);
    }

    #[test]
    fn glauber_rejects_binary_configurations() {
        let g = LocalMap::GlauberPlus { i: 0, level: 0, nbrs: Arc::from(vec![1, 2]) };
        assert!(matches!(g.apply(&Configuration::zeros(3)), Err(Error::Alphabet(_))));
    }

    #[test]
    fn classification_table() {
        use LocalMap::*;
        let c = |m: LocalMap| classify(&m).unwrap();
        let t = |m, a, b| Classification { monotone: m, additive: a, cancellative: b };
        assert_eq!(c(Bra { i: 0, j: 1 }), t(true, true, false));
        assert_eq!(c(Coop { i: 0, j: 1, k: 2 }), t(true, false, false));
        assert_eq!(c(Ann { i: 0, j: 1 }), t(false, false, true));
        assert_eq!(c(Vot { i: 0, j: 1 }), t(true, true, true));
        assert_eq!(c(Excl { i: 0, j: 1 }), t(true, true, true));
        assert_eq!(c(Death { i: 0 }), t(true, true, true));
        assert_eq!(c(Rw { i: 0, j: 1 }), t(true, true, false));
        assert_eq!(c(Bran { i: 0, j: 1 }), t(false, false, true));
        assert_eq!(c(Rebel { i: 0, j: 1, k: 2 }), t(false, false, true));
        assert!(!c(Kill { i: 0, j: 1 }).additive);
    }

    #[test]
    fn additive_implies_monotone_on_catalog() {
        for m in all_catalog() {
            let c = classify(&m).unwrap();
            if c.additive {
                assert!(c.monotone, "{m}");
            }
        }
    }

    #[test]
    fn covering_pairs_agree_with_all_pairs() {
        for m in all_catalog() {
            let mut ev = SupportEval::new(&m).unwrap();
            let w = ev.width();
            let mut mono = true;
            for x in 0..(1u32 << w) {
                for y in 0..(1u32 << w) {
                    if x & !y == 0 && ev.eval(x) & !ev.eval(y) != 0 {
                        mono = false;
                    }
                }
            }
            assert_eq!(mono, classify(&m).unwrap().monotone, "{m}");
        }
    }

    #[test]
    fn constant_glauber_levels_have_empty_relevance() {
        let nb: Arc<[Site]> = Arc::from(vec![1, 2, 3, 4, 5, 6]);
        let p = LocalMap::GlauberPlus { i: 0, level: -6, nbrs: nb.clone() };
        let m = LocalMap::GlauberMinus { i: 0, level: 6, nbrs: nb };
        assert!(relevance_brute(&p, 0).unwrap().is_empty());
        assert!(relevance_brute(&m, 0).unwrap().is_empty());
    }

    #[test]
    fn oversized_support_rejected() {
        let nb: Arc<[Site]> = (1..=24).collect();
        let g = LocalMap::GlauberPlus { i: 0, level: 0, nbrs: nb };
        assert!(matches!(classify(&g), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn pinned_sites_are_read_only() {
        let mut x = vec![1u8, 0, 1];
        LocalMap::Excl { i: 0, j: 1 }.apply_pinned(&mut x, &[true, false, false]);
        assert_eq!(x, vec![1, 1, 1]);
    }

    #[test]
    fn arrows_and_blocks() {
        let e = arrow_encoding(&LocalMap::Vot { i: 0, j: 1 }).unwrap();
        assert_eq!(e.arrows, vec![(0, 1)]);
        assert_eq!(e.blocks, vec![1]);
        let e = arrow_encoding(&LocalMap::Death { i: 4 }).unwrap();
        assert!(e.arrows.is_empty());
        assert_eq!(e.blocks, vec![4]);
    }
}
