//! Finite lattices and configurations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    Torus,
    FrozenBox,
    Complete,
    Ring,
}

/// Shape of the interaction ball: `L1` gives nearest neighbours at range 1,
/// `Sup` gives the `(2R+1)^d - 1` box neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L1,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    ExcludeSelf,
    IncludeSelf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub dim: usize,
    pub sides: Vec<usize>,
    pub range: usize,
    pub norm: Norm,
    pub convention: Convention,
    /// State pinned on the boundary of a frozen box.
    pub boundary: Option<u8>,
}

impl LatticeSpec {
    pub fn ring(len: usize) -> Self {
        Self {
            kind: LatticeKind::Ring,
            dim: 1,
            sides: vec![len],
            range: 1,
            norm: Norm::L1,
            convention: Convention::ExcludeSelf,
            boundary: None,
        }
    }

    pub fn torus(dim: usize, side: usize) -> Self {
        Self {
            kind: LatticeKind::Torus,
            dim,
            sides: vec![side; dim],
            range: 1,
            norm: Norm::L1,
            convention: Convention::ExcludeSelf,
            boundary: None,
        }
    }

    pub fn torus_range(dim: usize, side: usize, range: usize) -> Self {
        Self { range, norm: Norm::Sup, ..Self::torus(dim, side) }
    }

    pub fn complete(n: usize, convention: Convention) -> Self {
        Self {
            kind: LatticeKind::Complete,
            dim: 1,
            sides: vec![n],
            range: 1,
            norm: Norm::L1,
            convention,
            boundary: None,
        }
    }

    /// Box of `side^dim` sites whose outer layer is pinned to `boundary`.
    pub fn frozen_box(dim: usize, side: usize, boundary: u8) -> Self {
        Self {
            kind: LatticeKind::FrozenBox,
            dim,
            sides: vec![side; dim],
            range: 1,
            norm: Norm::L1,
            convention: Convention::ExcludeSelf,
            boundary: Some(boundary),
        }
    }
}

/// A finite site set with materialised, sorted neighbour lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    n: usize,
    strides: Vec<usize>,
    offsets: Vec<usize>,
    flat: Vec<u32>,
    pinned: Vec<bool>,
}

pub fn build_lattice(spec: LatticeSpec) -> Result<Lattice> {
    Lattice::new(spec)
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        if spec.dim == 0 || spec.sides.len() != spec.dim {
            return Err(Error::Lattice(format!(
                "dimension {} with {} side lengths",
                spec.dim,
                spec.sides.len()
            )));
        }
        if spec.sides.contains(&0) {
            return Err(Error::Lattice("zero side length".into()));
        }
        if spec.range == 0 {
            return Err(Error::Lattice("interaction range must be at least 1".into()));
        }
        if spec.convention == Convention::IncludeSelf && spec.kind != LatticeKind::Complete {
            return Err(Error::Lattice(
                "include-self convention is only available on the complete graph".into(),
            ));
        }
        match spec.kind {
            LatticeKind::Ring if spec.dim != 1 => {
                return Err(Error::Lattice("a ring is one-dimensional".into()))
            }
            LatticeKind::Complete if spec.dim != 1 => {
                return Err(Error::Lattice("complete graph takes a single size".into()))
            }
            LatticeKind::Torus | LatticeKind::Ring => {
                let min = 2 * spec.range + 1;
                if let Some(&s) = spec.sides.iter().find(|&&s| s < min) {
                    return Err(Error::Lattice(format!(
                        "torus side {s} is smaller than 2R+1 = {min}"
                    )));
                }
            }
            LatticeKind::FrozenBox => {
                if spec.boundary.is_none() {
                    return Err(Error::Lattice("frozen box needs a boundary state".into()));
                }
                if spec.sides.iter().any(|&s| s < 3) {
                    return Err(Error::Lattice("frozen box needs side at least 3".into()));
                }
            }
            LatticeKind::Complete => {}
        }
        let n: usize = spec.sides.iter().product();
        if n > u32::MAX as usize {
            return Err(Error::Lattice("too many sites".into()));
        }
        let mut strides = vec![1usize; spec.dim];
        for k in (0..spec.dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * spec.sides[k + 1];
        }
        let mut lat = Lattice {
            spec,
            n,
            strides,
            offsets: Vec::with_capacity(n + 1),
            flat: Vec::new(),
            pinned: vec![false; n],
        };
        lat.materialise();
        Ok(lat)
    }

    fn materialise(&mut self) {
        let spec = &self.spec;
        let n = self.n;
        self.offsets.push(0);
        if spec.kind == LatticeKind::Complete {
            let include = spec.convention == Convention::IncludeSelf;
            for i in 0..n {
                self.flat
                    .extend((0..n as u32).filter(|&j| include || j as usize != i));
                self.offsets.push(self.flat.len());
            }
            return;
        }
        let d = spec.dim;
        let r = spec.range as i64;
        let mut shifts: Vec<Vec<i64>> = Vec::new();
        let mut cur = vec![-r; d];
        loop {
            let nonzero = cur.iter().any(|&c| c != 0);
            let inside = match spec.norm {
                Norm::L1 => cur.iter().map(|c| c.abs()).sum::<i64>() <= r,
                Norm::Sup => true,
            };
            if nonzero && inside {
                shifts.push(cur.clone());
            }
            let mut k = 0;
            while k < d {
                cur[k] += 1;
                if cur[k] <= r {
                    break;
                }
                cur[k] = -r;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        let wrap = matches!(spec.kind, LatticeKind::Torus | LatticeKind::Ring);
        let mut buf = Vec::new();
        for i in 0..n {
            let c = self.coords(i);
            if spec.kind == LatticeKind::FrozenBox {
                self.pinned[i] = c.iter().zip(&spec.sides).any(|(&x, &s)| x == 0 || x == s - 1);
            }
            buf.clear();
            'shift: for s in &shifts {
                let mut idx = 0usize;
                for k in 0..d {
                    let side = spec.sides[k] as i64;
                    let mut x = c[k] as i64 + s[k];
                    if wrap {
                        x = x.rem_euclid(side);
                    } else if x < 0 || x >= side {
                        continue 'shift;
                    }
                    idx += x as usize * self.strides[k];
                }
                buf.push(idx as u32);
            }
            buf.sort_unstable();
            self.flat.extend_from_slice(&buf);
            self.offsets.push(self.flat.len());
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sorted neighbour list of site `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.flat[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Checked variant of [`Lattice::neighbors`].
    pub fn try_neighbors(&self, i: usize) -> Result<&[u32]> {
        if i >= self.n {
            return Err(Error::SiteOutOfRange { site: i, n: self.n });
        }
        Ok(self.neighbors(i))
    }

    #[inline]
    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    pub fn pinned_mask(&self) -> &[bool] {
        &self.pinned
    }

    pub fn boundary_state(&self) -> Option<u8> {
        self.spec.boundary
    }

    /// Sites that evolve (everything except a frozen boundary).
    pub fn dynamic_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| !self.pinned[i])
    }

    pub fn coords(&self, i: usize) -> Vec<usize> {
        let mut rest = i;
        self.strides
            .iter()
            .map(|&s| {
                let c = rest / s;
                rest %= s;
                c
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Site reached from `i` by adding `shift` (with wrap-around on tori).
    pub fn shifted(&self, i: usize, shift: &[i64]) -> Option<usize> {
        let c = self.coords(i);
        let wrap = matches!(self.spec.kind, LatticeKind::Torus | LatticeKind::Ring);
        let mut idx = 0;
        for k in 0..self.spec.dim {
            let side = self.spec.sides[k] as i64;
            let mut x = c[k] as i64 + shift[k];
            if wrap {
                x = x.rem_euclid(side);
            } else if x < 0 || x >= side {
                return None;
            }
            idx += x as usize * self.strides[k];
        }
        Some(idx)
    }

    /// Ordered pairs `(i, j)` with `j` a neighbour of `i` and `j != i`.
    pub fn ordered_edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                if j as usize != i {
                    out.push((i as u32, j));
                }
            }
        }
        out
    }

    /// Common neighbourhood size if every dynamic site has the same one.
    pub fn regular_degree(&self) -> Option<usize> {
        let mut deg = None;
        for i in self.dynamic_sites() {
            let k = self.neighbors(i).len();
            match deg {
                None => deg = Some(k),
                Some(d) if d != k => return None,
                _ => {}
            }
        }
        deg
    }

    /// Configuration with every dynamic site in `state` and the boundary pinned.
    pub fn uniform(&self, alphabet: Alphabet, state: u8) -> Configuration {
        let mut c = Configuration { alphabet, states: vec![state; self.n] };
        self.pin(&mut c);
        c
    }

    /// Overwrites pinned sites with the boundary state.
    pub fn pin(&self, cfg: &mut Configuration) {
        if let Some(b) = self.spec.boundary {
            for (s, &p) in cfg.states.iter_mut().zip(&self.pinned) {
                if p {
                    *s = b;
                }
            }
        }
    }
}

/// Local state space. Spins are stored as `0 = -1`, `1 = +1`; Potts colours as
/// `0..q` standing for `1..=q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    Binary,
    Spin,
    Potts(u8),
}

impl Alphabet {
    pub fn size(self) -> u8 {
        match self {
            Alphabet::Binary | Alphabet::Spin => 2,
            Alphabet::Potts(q) => q,
        }
    }

    /// Value reported in CSV output.
    pub fn display(self, s: u8) -> i32 {
        match self {
            Alphabet::Binary => s as i32,
            Alphabet::Spin => 2 * s as i32 - 1,
            Alphabet::Potts(_) => s as i32 + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub alphabet: Alphabet,
    pub states: Vec<u8>,
}

impl Configuration {
    pub fn new(alphabet: Alphabet, states: Vec<u8>) -> Result<Self> {
        let q = alphabet.size();
        if let Some(&bad) = states.iter().find(|&&s| s >= q) {
            return Err(Error::Alphabet(format!("state {bad} outside alphabet of size {q}")));
        }
        Ok(Self { alphabet, states })
    }

    pub fn zeros(n: usize) -> Self {
        Self { alphabet: Alphabet::Binary, states: vec![0; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { alphabet: Alphabet::Binary, states: vec![1; n] }
    }

    /// Binary configuration with ones exactly on `sites`.
    pub fn indicator(n: usize, sites: &[usize]) -> Self {
        let mut c = Self::zeros(n);
        for &i in sites {
            c.states[i] = 1;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.states.iter().filter(|&&s| s == 1).count()
    }

    pub fn is_zero(&self) -> bool {
        self.states.iter().all(|&s| s == 0)
    }

    /// Spin value of site `i` for spin alphabets.
    pub fn spin(&self, i: usize) -> i8 {
        2 * self.states[i] as i8 - 1
    }

    pub fn ones_set(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.states[i] == 1).collect()
    }

    /// Pointwise order `self <= other`.
    pub fn le(&self, other: &Configuration) -> bool {
        self.states.iter().zip(&other.states).all(|(a, b)| a <= b)
    }

    /// `<x, y>` = number of sites where both are one.
    pub fn overlap(&self, other: &Configuration) -> usize {
        self.states
            .iter()
            .zip(&other.states)
            .filter(|(&a, &b)| a == 1 && b == 1)
            .count()
    }

    /// CSV rows `coord_0,...,coord_{d-1},state`.
    pub fn to_csv_rows(&self, lattice: &Lattice) -> Vec<String> {
        (0..self.len())
            .map(|i| {
                let mut row: Vec<String> =
                    lattice.coords(i).iter().map(|c| c.to_string()).collect();
                row.push(self.alphabet.display(self.states[i]).to_string());
                row.join(",")
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbour_ring() {
        let l = build_lattice(LatticeSpec::torus(1, 5)).unwrap();
        for i in 0..5 {
            let mut want = [((i + 4) % 5) as u32, ((i + 1) % 5) as u32];
            want.sort();
            assert_eq!(l.neighbors(i), &want[..]);
        }
    }

    #[test]
    fn square_torus_degrees() {
        let l = build_lattice(LatticeSpec::torus(2, 7)).unwrap();
        assert!((0..l.len()).all(|i| l.neighbors(i).len() == 4));
        let l = build_lattice(LatticeSpec::torus_range(2, 7, 2)).unwrap();
        assert!((0..l.len()).all(|i| l.neighbors(i).len() == 24));
    }

    #[test]
    fn small_torus_rejected() {
        assert!(build_lattice(LatticeSpec::torus_range(2, 4, 2)).is_err());
        assert!(build_lattice(LatticeSpec::ring(2)).is_err());
    }

    #[test]
    fn ring_and_complete_lists() {
        let l = build_lattice(LatticeSpec::ring(4)).unwrap();
        assert_eq!(l.neighbors(0), &[1, 3]);
        let c = build_lattice(LatticeSpec::complete(3, Convention::IncludeSelf)).unwrap();
        assert_eq!(c.neighbors(1), &[0, 1, 2]);
        let c = build_lattice(LatticeSpec::complete(3, Convention::ExcludeSelf)).unwrap();
        assert_eq!(c.neighbors(1), &[0, 2]);
    }

    #[test]
    fn frozen_segment() {
        let l = build_lattice(LatticeSpec::frozen_box(1, 10, 1)).unwrap();
        assert_eq!(l.neighbors(1), &[0, 2]);
        assert!(l.is_pinned(0) && l.is_pinned(9));
        assert!((1..9).all(|i| !l.is_pinned(i)));
        assert_eq!(l.neighbors(0), &[1]);
    }

    #[test]
    fn include_self_rejected_off_complete() {
        let mut s = LatticeSpec::torus(1, 5);
        s.convention = Convention::IncludeSelf;
        assert!(build_lattice(s).is_err());
    }

    #[test]
    fn row_major_coordinates() {
        let l = build_lattice(LatticeSpec::torus(2, 7)).unwrap();
        assert_eq!(l.coords(8), vec![1, 1]);
        assert_eq!(l.index(&[2, 3]), 17);
        assert_eq!(l.shifted(0, &[-1, 0]), Some(42));
    }

    #[test]
    fn configuration_rejects_foreign_states() {
        assert!(Configuration::new(Alphabet::Binary, vec![0, 2]).is_err());
        assert!(Configuration::new(Alphabet::Potts(3), vec![0, 2]).is_ok());
    }
}
