//! Edge-consistent tet refinement along the upper envelope of the tissue
//! fields.
//!
//! Every decision is a function of one edge (its endpoint positions and
//! values), so tets that share a face split it the same way. Edges are
//! split in an order keyed on endpoint positions, which makes the result
//! independent of the order tets are visited in.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::tetmesh::TET_EDGES;

use super::Provenance;

/// Refinement rounds before we give up. Each round sweeps every pair once;
/// in practice one or two suffice.
const MAX_ROUNDS: usize = 64;

pub(crate) struct Work {
    pub k: usize,
    pub pos: Vec<Vec3>,
    /// `k` values per vertex.
    pub val: Vec<f64>,
    pub prov: Vec<Provenance>,
    pub tets: Vec<[usize; 4]>,
    pub origin: Vec<usize>,
    pub thr: f64,
    /// Split edges per pass, in creation order: `((lo_id, hi_id), new_vertex)`.
    pub history: Vec<Vec<((usize, usize), usize)>>,
}

/// Bitset of candidate tissues per original tet.
pub(crate) struct Candidates {
    words: usize,
    bits: Vec<u64>,
}

impl Candidates {
    pub fn has(&self, t: usize, a: usize) -> bool {
        self.bits[t * self.words + a / 64] >> (a % 64) & 1 == 1
    }

    pub fn all(k: usize, n: usize) -> Self {
        let words = k.div_ceil(64);
        Candidates { words, bits: vec![u64::MAX; n * words] }
    }
}

/// Tissues that can reach the upper envelope somewhere in each tet: those
/// whose maximum over the tet is not below every other tissue's minimum.
pub(crate) fn candidates(k: usize, tets: &[[usize; 4]], val: &[f64], thr: f64) -> Candidates {
    let words = k.div_ceil(64);
    let mut bits = vec![0u64; tets.len() * words];
    let mut hi = vec![0.0; k];
    for (t, tet) in tets.iter().enumerate() {
        let mut floor = f64::NEG_INFINITY;
        for a in 0..k {
            let mut h = f64::NEG_INFINITY;
            let mut l = f64::INFINITY;
            for &v in tet {
                let x = val[v * k + a];
                h = h.max(x);
                l = l.min(x);
            }
            hi[a] = h;
            floor = floor.max(l);
        }
        for a in 0..k {
            if hi[a] >= floor - 4.0 * thr {
                bits[t * words + a / 64] |= 1 << (a % 64);
            }
        }
    }
    Candidates { words, bits }
}

impl Work {
    fn values(&self, v: usize) -> &[f64] {
        &self.val[v * self.k..(v + 1) * self.k]
    }

    fn pos_cmp(&self, a: usize, b: usize) -> Ordering {
        self.pos[a].total_cmp(&self.pos[b]).then(a.cmp(&b))
    }

    /// Endpoints ordered by position.
    fn canonical(&self, a: usize, b: usize) -> (usize, usize) {
        if self.pos_cmp(a, b) == Ordering::Greater {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Crossing parameter of the pair on edge `(p, q)` (canonical order)
    /// when the sign change is strict.
    fn crossing(&self, p: usize, q: usize, i: usize, j: usize) -> Option<f64> {
        let (vp, vq) = (self.values(p), self.values(q));
        let gp = vp[i] - vp[j];
        let gq = vq[i] - vq[j];
        let thr = self.thr;
        ((gp > thr && gq < -thr) || (gp < -thr && gq > thr)).then(|| gp / (gp - gq))
    }

    fn push_split(&mut self, p: usize, q: usize, t: f64) -> usize {
        let id = self.pos.len();
        self.pos.push(self.pos[p].lerp(self.pos[q], t));
        for a in 0..self.k {
            let (x, y) = (self.val[p * self.k + a], self.val[q * self.k + a]);
            self.val.push(x + t * (y - x));
        }
        self.prov.push(Provenance::Split { a: p, b: q, t });
        id
    }

    fn edge_order(&self, e: &(usize, usize), f: &(usize, usize)) -> Ordering {
        self.pos_cmp(e.0, f.0).then_with(|| self.pos_cmp(e.1, f.1))
    }

    /// One sweep for the pair `(i, j)`. An edge is split when the pair
    /// changes sign along it and some tet holding it descends from an input
    /// tet where both tissues can reach the top. Returns the number of
    /// split edges.
    fn pass(&mut self, i: usize, j: usize, cand: &Candidates) -> usize {
        let mut marked: BTreeMap<(usize, usize), (usize, usize, f64)> = BTreeMap::new();
        for (tet, &o) in self.tets.iter().zip(&self.origin) {
            if !(cand.has(o, i) && cand.has(o, j)) {
                continue;
            }
            for [a, b] in TET_EDGES {
                let (p, q) = self.canonical(tet[a], tet[b]);
                let key = (p.min(q), p.max(q));
                if marked.contains_key(&key) {
                    continue;
                }
                if let Some(t) = self.crossing(p, q, i, j) {
                    marked.insert(key, (p, q, t));
                }
            }
        }
        if marked.is_empty() {
            self.history.push(Vec::new());
            return 0;
        }
        let mut created: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut order = Vec::new();
        let old = core::mem::take(&mut self.tets);
        let old_origin = core::mem::take(&mut self.origin);
        let mut tets = Vec::with_capacity(old.len() + 4 * marked.len());
        let mut origin = Vec::with_capacity(tets.capacity());
        let mut active: Vec<(usize, usize, f64)> = Vec::with_capacity(6);
        for (tet, o) in old.into_iter().zip(old_origin) {
            active.clear();
            for [a, b] in TET_EDGES {
                let (x, y) = (tet[a], tet[b]);
                if let Some(&e) = marked.get(&(x.min(y), x.max(y))) {
                    active.push(e);
                }
            }
            if active.is_empty() {
                tets.push(tet);
                origin.push(o);
                continue;
            }
            active.sort_by(|x, y| self.edge_order(&(x.0, x.1), &(y.0, y.1)));
            let mut subs = vec![tet];
            for &(p, q, t) in &active {
                let key = (p.min(q), p.max(q));
                let v = match created.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = self.push_split(p, q, t);
                        created.insert(key, v);
                        order.push((key, v));
                        v
                    }
                };
                subs = split_edge(&subs, p, q, v);
            }
            origin.extend(core::iter::repeat_n(o, subs.len()));
            tets.extend(subs);
        }
        self.tets = tets;
        self.origin = origin;
        let n = order.len();
        self.history.push(order);
        n
    }

    /// Refine until no pair has an envelope crossing on any edge.
    pub fn run(&mut self, pairs: &[(usize, usize)], cand: &Candidates) -> Result<usize> {
        for round in 0..MAX_ROUNDS {
            let mut splits = 0;
            for &(i, j) in pairs {
                splits += self.pass(i, j, cand);
            }
            if splits == 0 {
                return Ok(round + 1);
            }
        }
        Err(Error::Internal(alloc::format!("envelope refinement did not settle in {MAX_ROUNDS} rounds")))
    }

    /// Apply the recorded splits to tets that did not take part in the
    /// refinement (bone), so shared faces match.
    pub fn replay(&self, mut tets: Vec<[usize; 4]>, mut origin: Vec<usize>) -> (Vec<[usize; 4]>, Vec<usize>) {
        for created in &self.history {
            if created.is_empty() {
                continue;
            }
            let map: BTreeMap<(usize, usize), usize> = created.iter().copied().collect();
            let mut out = Vec::with_capacity(tets.len());
            let mut out_origin = Vec::with_capacity(tets.len());
            for (tet, o) in tets.into_iter().zip(origin) {
                let mut edges: Vec<(usize, usize, usize)> = TET_EDGES
                    .iter()
                    .filter_map(|&[a, b]| {
                        let (p, q) = self.canonical(tet[a], tet[b]);
                        map.get(&(p.min(q), p.max(q))).map(|&v| (p, q, v))
                    })
                    .collect();
                if edges.is_empty() {
                    out.push(tet);
                    out_origin.push(o);
                    continue;
                }
                edges.sort_by(|x, y| self.edge_order(&(x.0, x.1), &(y.0, y.1)));
                let mut subs = vec![tet];
                for &(p, q, v) in &edges {
                    subs = split_edge(&subs, p, q, v);
                }
                out_origin.extend(core::iter::repeat_n(o, subs.len()));
                out.extend(subs);
            }
            tets = out;
            origin = out_origin;
        }
        (tets, origin)
    }
}

/// Split every tet containing edge `(a, b)` at the new vertex `v`. The two
/// children keep the parent's orientation.
pub(crate) fn split_edge(tets: &[[usize; 4]], a: usize, b: usize, v: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(tets.len() + 2);
    for &t in tets {
        let ia = t.iter().position(|&x| x == a);
        let ib = t.iter().position(|&x| x == b);
        match (ia, ib) {
            (Some(ia), Some(ib)) => {
                let mut c0 = t;
                c0[ia] = v;
                let mut c1 = t;
                c1[ib] = v;
                out.push(c0);
                out.push(c1);
            }
            _ => out.push(t),
        }
    }
    out
}
