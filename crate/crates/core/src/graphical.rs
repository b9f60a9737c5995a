//! Poisson graphical representation: event streams, stochastic flows,
//! backward relevance sets, open paths, dual flows and coupled evolutions.

use std::io::Write;

use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::maps::{arrow_encoding, classify, LocalMap, Site};
use crate::models::{potts_weights, Dynamics, ModelSpec};
use crate::rng::Rng;

/// One point of the Poisson point set: a time, the index of the map instance
/// (or of the site, for heat-bath dynamics) and a uniform mark.
///
/// The mark is only read by heat-bath updates and by rate thinning in
/// coupled runs; plain map dynamics ignore it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub inst: u32,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub horizon: f64,
    pub seed: Option<u64>,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Events with time in `(s, u]`.
    pub fn window(&self, s: f64, u: f64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t <= s);
        let hi = self.events.partition_point(|e| e.t <= u);
        &self.events[lo..hi]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Writes `time,map_kind,site_params...` rows.
    pub fn write_csv<W: Write>(&self, model: &ModelSpec, mut w: W) -> Result<()> {
        writeln!(w, "time,map_kind,site_params")?;
        for e in &self.events {
            match model.dynamics {
                Dynamics::Maps => {
                    let m = &model.instances[e.inst as usize].map;
                    let p: Vec<String> = m.params().iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{:.17e},{},{}", e.t, m.kind().as_str(), p.join(","))?;
                }
                Dynamics::Potts { .. } => {
                    writeln!(w, "{:.17e},heat_bath,{},{:.17e}", e.t, e.inst, e.u)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws events for a model: a global exponential clock at the total rate and
/// an independent categorical choice of instance per tick.
#[derive(Debug, Clone)]
pub struct EventSampler {
    rate: f64,
    choice: Choice,
}

#[derive(Debug, Clone)]
enum Choice {
    Empty,
    Alias(WeightedAliasIndex<f64>),
    Sites(Vec<u32>),
}

impl EventSampler {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        match model.dynamics {
            Dynamics::Maps => {
                let rates: Vec<f64> = model.instances.iter().map(|i| i.rate).collect();
                if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return Err(Error::Parameter("rates must be finite and nonnegative".into()));
                }
                let rate: f64 = rates.iter().sum();
                if rates.is_empty() || rate == 0.0 {
                    return Ok(Self { rate: 0.0, choice: Choice::Empty });
                }
                let alias = WeightedAliasIndex::new(rates)
                    .map_err(|e| Error::Parameter(format!("rate table: {e}")))?;
                Ok(Self { rate, choice: Choice::Alias(alias) })
            }
            Dynamics::Potts { .. } => {
                let sites: Vec<u32> = model.lattice.dynamic_sites().map(|i| i as u32).collect();
                Ok(Self { rate: sites.len() as f64, choice: Choice::Sites(sites) })
            }
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Lazily generated events on `(0, horizon]`.
    pub fn iter<'a>(&'a self, rng: &'a mut Rng, horizon: f64) -> EventIter<'a> {
        EventIter { sampler: self, rng, t: 0.0, horizon }
    }

    pub fn sample(&self, rng: &mut Rng, horizon: f64) -> Vec<Event> {
        self.iter(rng, horizon).collect()
    }
}

pub struct EventIter<'a> {
    sampler: &'a EventSampler,
    rng: &'a mut Rng,
    t: f64,
    horizon: f64,
}

impl Iterator for EventIter<'_> {
    type Item = Event;

    #[inline]
    fn next(&mut self) -> Option<Event> {
        if self.sampler.rate <= 0.0 {
            return None;
        }
        let e: f64 = Exp1.sample(self.rng);
        self.t += e / self.sampler.rate;
        if self.t > self.horizon {
            return None;
        }
        let inst = match &self.sampler.choice {
            Choice::Empty => return None,
            Choice::Alias(a) => a.sample(self.rng) as u32,
            Choice::Sites(s) => s[self.rng.random_range(0..s.len())],
        };
        let u: f64 = self.rng.random();
        Some(Event { t: self.t, inst, u })
    }
}

/// Samples the Poisson point set of `model` on `(0, horizon]` from a seed.
pub fn sample_events(model: &ModelSpec, horizon: f64, seed: u64) -> Result<EventStream> {
    let sampler = EventSampler::new(model)?;
    let mut rng = crate::rng::replica_rng(seed, 0);
    Ok(EventStream { horizon, seed: Some(seed), events: sampler.sample(&mut rng, horizon) })
}

/// Applies single events of a model to a configuration.
pub struct Stepper<'a> {
    model: &'a ModelSpec,
    pinned: Option<&'a [bool]>,
    weights: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ModelSpec) -> Self {
        let mask = model.lattice.pinned_mask();
        let pinned = if mask.iter().any(|&p| p) { Some(mask) } else { None };
        Self { model, pinned, weights: Vec::new() }
    }

    #[inline]
    pub fn step(&mut self, x: &mut [u8], e: &Event) {
        match self.model.dynamics {
            Dynamics::Maps => {
                let m = &self.model.instances[e.inst as usize].map;
                match self.pinned {
                    None => m.apply_in_place(x),
                    Some(p) => m.apply_pinned(x, p),
                }
            }
            Dynamics::Potts { q, beta } => {
                let i = e.inst as usize;
                self.weights = potts_weights(&self.model.lattice, x, i, q as usize, beta);
                let mut acc = 0.0;
                let mut new = q - 1;
                for (s, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if e.u < acc {
                        new = s as u8;
                        break;
                    }
                }
                x[i] = new;
            }
        }
    }
}

/// Configurations sampled at deterministic times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
}

/// Composes the event maps with times `<= t` onto `x0` and records the
/// configuration at each sample time (right-continuous paths).
pub fn evolve(
    model: &ModelSpec,
    x0: &Configuration,
    events: &[Event],
    sample_times: &[f64],
) -> Result<Trajectory> {
    if x0.alphabet != model.alphabet {
        return Err(Error::Alphabet(format!(
            "model {} runs on {:?}, initial state is {:?}",
            model.name, model.alphabet, x0.alphabet
        )));
    }
    if x0.len() != model.n_sites() {
        return Err(Error::Dimension(format!(
            "initial state has {} sites, lattice has {}",
            x0.len(),
            model.n_sites()
        )));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("sample times must be sorted".into()));
    }
    let mut x = x0.states.clone();
    let mut stepper = Stepper::new(model);
    let mut out = Trajectory { times: Vec::new(), states: Vec::new() };
    let mut k = 0;
    for &t in sample_times {
        while k < events.len() && events[k].t <= t {
            stepper.step(&mut x, &events[k]);
            k += 1;
        }
        out.times.push(t);
        out.states.push(Configuration { alphabet: x0.alphabet, states: x.clone() });
    }
    Ok(out)
}

/// The flow `X_{s,u}`: applies events in `(s, u]` to `x`.
pub fn flow(model: &ModelSpec, x: &mut [u8], events: &[Event], s: f64, u: f64) {
    let mut stepper = Stepper::new(model);
    for e in events.iter().filter(|e| e.t > s && e.t <= u) {
        stepper.step(x, e);
    }
}

/// Backward relevance set: sites at time `s` whose values can influence the
/// state on `a` at time `u`.
pub fn relevance_set(
    model: &ModelSpec,
    events: &[Event],
    a: &[usize],
    u: f64,
    s: f64,
) -> Result<Vec<usize>> {
    if model.dynamics != Dynamics::Maps {
        return Err(Error::Parameter("relevance sets need a map representation".into()));
    }
    let n = model.n_sites();
    let mut xi = vec![false; n];
    for &i in a {
        xi[i] = true;
    }
    let mut fresh = Vec::new();
    for e in events.iter().rev().filter(|e| e.t > s && e.t <= u) {
        let m = &model.instances[e.inst as usize].map;
        let d = m.domain();
        if !d.iter().any(|&i| xi[i as usize]) {
            continue;
        }
        fresh.clear();
        for &i in &d {
            if xi[i as usize] {
                fresh.extend(m.relevance(i));
            }
        }
        for &i in &d {
            xi[i as usize] = false;
        }
        for &j in &fresh {
            xi[j as usize] = true;
        }
    }
    Ok((0..n).filter(|&i| xi[i]).collect())
}

/// Arrow/block encodings of every instance of an additive (or cancellative)
/// model, derived by brute force from the maps.
#[derive(Debug, Clone)]
pub struct ArrowGraph {
    arrows: Vec<Vec<(Site, Site)>>,
    blocks: Vec<Vec<Site>>,
    targets: Vec<Vec<Site>>,
    xor: bool,
}

impl ArrowGraph {
    /// `xor = false` for additive models (open paths), `true` for cancellative
    /// models (parity of open paths).
    pub fn new(model: &ModelSpec, xor: bool) -> Result<Self> {
        let mut arrows = Vec::with_capacity(model.instances.len());
        let mut blocks = Vec::with_capacity(model.instances.len());
        let mut seen: std::collections::HashMap<crate::maps::MapKind, bool> = Default::default();
        for inst in &model.instances {
            let ok = *seen.entry(inst.map.kind()).or_insert_with(|| {
                let c = classify(&inst.map).map(|c| if xor { c.cancellative } else { c.additive });
                c.unwrap_or(false)
            });
            if !ok {
                return Err(if xor {
                    Error::NotCancellative(inst.map.to_string())
                } else {
                    Error::NotAdditive(inst.map.to_string())
                });
            }
            let enc = arrow_encoding(&inst.map)?;
            arrows.push(enc.arrows);
            blocks.push(enc.blocks);
        }
        let targets = arrows
            .iter()
            .zip(&blocks)
            .map(|(a, b): (&Vec<(Site, Site)>, &Vec<Site>)| {
                let mut t: Vec<Site> = a.iter().map(|e| e.1).chain(b.iter().copied()).collect();
                t.sort_unstable();
                t.dedup();
                t
            })
            .collect();
        Ok(Self { arrows, blocks, targets, xor })
    }

    /// Pushes the wet set through one event: a site is wet afterwards if it
    /// was wet and not blocked, or (for the additive case) an arrow from a wet
    /// site points at it. In the cancellative case contributions add mod 2.
    pub fn push(&self, wet: &mut [u8], inst: usize, scratch: &mut Vec<(Site, u8)>) {
        scratch.clear();
        let arrows = &self.arrows[inst];
        let blocks = &self.blocks[inst];
        for &j in &self.targets[inst] {
            let mut v = if blocks.contains(&j) { 0 } else { wet[j as usize] };
            for &(i, k) in arrows {
                if k == j {
                    let w = wet[i as usize];
                    v = if self.xor { v ^ w } else { v | w };
                }
            }
            scratch.push((j, v));
        }
        for &(j, v) in scratch.iter() {
            wet[j as usize] = v;
        }
    }
}

/// Sites reachable at time `t` by open paths from `sources x {0}`.
pub fn open_path_reach(
    model: &ModelSpec,
    events: &[Event],
    sources: &[usize],
    t: f64,
) -> Result<Vec<usize>> {
    let g = ArrowGraph::new(model, false)?;
    Ok(reach_with(&g, model.n_sites(), events, sources, 0.0, t))
}

/// Open-path reach through a prepared arrow graph over `(s, t]`.
pub fn reach_with(
    g: &ArrowGraph,
    n: usize,
    events: &[Event],
    sources: &[usize],
    s: f64,
    t: f64,
) -> Vec<usize> {
    let mut wet = vec![0u8; n];
    for &i in sources {
        wet[i] = 1;
    }
    let mut scratch = Vec::new();
    for e in events.iter().filter(|e| e.t > s && e.t <= t) {
        g.push(&mut wet, e.inst as usize, &mut scratch);
    }
    (0..n).filter(|&i| wet[i] == 1).collect()
}

/// Runs the dual flow on the same Poisson points: the dual maps `duals[m]` of
/// the events in `(0, t]` are applied in reverse time order, and `Y_s` is
/// recorded for each `s` in `sample_times`.
pub fn dual_evolve(
    duals: &[LocalMap],
    events: &[Event],
    y0: &Configuration,
    t: f64,
    sample_times: &[f64],
) -> Result<Trajectory> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&s| s > t) {
        return Err(Error::Parameter("dual sample times must be sorted and within [0, t]".into()));
    }
    let mut y = y0.states.clone();
    let end = events.partition_point(|e| e.t <= t);
    let mut k = end;
    let mut out = Trajectory { times: Vec::new(), states: Vec::new() };
    for &s in sample_times {
        // Y_s has seen every event with time in (t - s, t].
        while k > 0 && events[k - 1].t > t - s {
            k -= 1;
            let m = duals
                .get(events[k].inst as usize)
                .ok_or_else(|| Error::NoDual(format!("instance {}", events[k].inst)))?;
            m.apply_in_place(&mut y);
        }
        out.times.push(s);
        out.states.push(Configuration { alphabet: y0.alphabet, states: y.clone() });
    }
    Ok(out)
}

/// A pair of maps driven by one Poisson point: either side may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct JointInstance {
    pub first: Option<LocalMap>,
    pub second: Option<LocalMap>,
    pub rate: f64,
}

/// Order relation asserted between the two coupled states.
#[derive(Debug, Clone, PartialEq)]
pub enum Order {
    /// `X <= Y` sitewise.
    Le,
    /// `Y(i) <= X(i) X(i+1)` on a ring (pair process of the first component).
    PairProductGe,
    /// `X(i) <= Y(embed[i])` where the first lattice embeds in the second.
    Embedded(Vec<usize>),
}

impl Order {
    pub fn holds(&self, x: &[u8], y: &[u8]) -> bool {
        match self {
            Order::Le => x.iter().zip(y).all(|(a, b)| a <= b),
            Order::PairProductGe => {
                let n = x.len();
                (0..n).all(|i| y[i] <= x[i] & x[(i + 1) % n])
            }
            Order::Embedded(map) => map.iter().enumerate().all(|(i, &j)| x[i] <= y[j]),
        }
    }
}

/// Two models on shared randomness.
#[derive(Debug, Clone)]
pub struct CoupledSpec {
    pub name: String,
    pub n_first: usize,
    pub n_second: usize,
    pub joint: Vec<JointInstance>,
    pub order: Order,
}

impl CoupledSpec {
    /// Marginal instance list of one component, with rates of identical maps
    /// merged, sorted by map.
    pub fn marginal(&self, second: bool) -> Vec<(String, f64)> {
        let mut acc: std::collections::BTreeMap<String, f64> = Default::default();
        for j in &self.joint {
            let m = if second { &j.second } else { &j.first };
            if let Some(m) = m {
                *acc.entry(m.to_string()).or_insert(0.0) += j.rate;
            }
        }
        acc.into_iter().collect()
    }
}

/// Outcome of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub events: usize,
    /// First event time at which the order failed, if any.
    pub violation: Option<f64>,
    pub first: Vec<u8>,
    pub second: Vec<u8>,
}

/// Runs both components on one Poisson point set over `(0, horizon]`,
/// checking the order relation initially and after every event.
pub fn coupled_evolve(
    spec: &CoupledSpec,
    x0: &[u8],
    y0: &[u8],
    horizon: f64,
    rng: &mut Rng,
) -> Result<CoupledRun> {
    if spec.joint.iter().any(|j| !(j.rate >= 0.0) || !j.rate.is_finite()) {
        return Err(Error::Parameter(format!("coupling {} has a negative rate", spec.name)));
    }
    if x0.len() != spec.n_first || y0.len() != spec.n_second {
        return Err(Error::Dimension("initial states do not match the coupling".into()));
    }
    let rates: Vec<f64> = spec.joint.iter().map(|j| j.rate).collect();
    let total: f64 = rates.iter().sum();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut run = CoupledRun { events: 0, violation: None, first: vec![], second: vec![] };
    if !spec.order.holds(&x, &y) {
        run.violation = Some(0.0);
    }
    if total > 0.0 {
        let alias = WeightedAliasIndex::new(rates)
            .map_err(|e| Error::Parameter(format!("rate table: {e}")))?;
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if t > horizon {
                break;
            }
            let j = &spec.joint[alias.sample(rng)];
            if let Some(m) = &j.first {
                m.apply_in_place(&mut x);
            }
            if let Some(m) = &j.second {
                m.apply_in_place(&mut y);
            }
            run.events += 1;
            if run.violation.is_none() && !spec.order.holds(&x, &y) {
                run.violation = Some(t);
            }
        }
    }
    run.first = x;
    run.second = y;
    Ok(run)
}
