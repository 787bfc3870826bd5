//! Random-graph construction and component statistics.
//!
//! Given a point set, a scaled profile and a domain metric, each unordered
//! pair `(i, j)` links independently with probability `g(d(i, j) / r)`. The
//! Bernoulli draw for a pair is addressed by the key `(seed, i, j)`, so the
//! edge set is a pure function of (points, profile, domain, seed) no matter
//! how pairs are enumerated. That is what makes the grid-pruned builder
//! drop-in compatible with the exact one: it merely skips pairs whose link
//! probability is zero (or negligibly small, within a stated budget).

use crate::connfn::ScaledModel;
use crate::geometry::{Domain, PointSet};
use crate::quad;
use crate::stream::keyed_uniform;
use crate::{Error, Result};
use std::f64::consts::PI;
use std::io::Write;

/// How an instance's candidate pairs were enumerated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuilderKind {
    /// Every pair examined.
    Exact,
    /// Cell-grid enumeration up to `cutoff`, with the expected number of
    /// suppressed edges bounded by `eps_miss`.
    Pruned { cutoff: f64, eps_miss: f64 },
}

/// A realized network: points plus sampled edges and build provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkInstance {
    r: f64,
    domain: Domain,
    seed: u64,
    builder: BuilderKind,
    adj: Vec<Vec<u32>>,
    edge_count: usize,
}

impl NetworkInstance {
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn builder(&self) -> BuilderKind {
        self.builder
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Neighbor ids of node `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    /// All edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, nbrs)| {
            let i = i as u32;
            nbrs.iter().copied().filter(move |&j| j > i).map(move |j| (i, j))
        })
    }

    /// Nodes with no neighbors.
    pub fn isolated_count(&self) -> usize {
        self.adj.iter().filter(|nbrs| nbrs.is_empty()).count()
    }

    /// Plain-text dump: one `n r domain seed` header line, then one `i j`
    /// line per edge, ascending. Stable across runs for a given seed.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {} {} {}", self.n(), self.r, self.domain.label(), self.seed)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }
}

#[inline]
fn pair_links(seed: u64, i: u32, j: u32, p: f64) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        keyed_uniform(&[seed, u64::from(i), u64::from(j)]) < p
    }
}

fn finish(
    r: f64,
    domain: Domain,
    seed: u64,
    builder: BuilderKind,
    mut adj: Vec<Vec<u32>>,
    needs_sort: bool,
) -> NetworkInstance {
    if needs_sort {
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
    }
    let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
    NetworkInstance {
        r,
        domain,
        seed,
        builder,
        adj,
        edge_count,
    }
}

/// Samples edges by examining every pair. Reference builder.
pub fn build_exact(
    points: &PointSet,
    model: &ScaledModel,
    domain: Domain,
    seed: u64,
) -> NetworkInstance {
    let n = points.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        let pi = points.get(i);
        for j in (i + 1)..n {
            let d = domain.distance(pi, points.get(j));
            let p = model.eval_at_distance(d);
            if pair_links(seed, i as u32, j as u32, p) {
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    }
    // ascending pair enumeration leaves each list already sorted
    finish(model.r(), domain, seed, BuilderKind::Exact, adj, false)
}

/// Smallest cutoff radius `R` such that the expected number of edges lost by
/// ignoring pairs farther than `R` is at most `eps_miss`, using the bound
/// `rho^2 2 pi r^2 INT_{R/r}^inf x g(x) dx`.
///
/// Compact-support profiles get their exact reach (`R = r` times the support
/// radius, clipped to the domain diameter) and lose nothing. For others the
/// bound is solved by bisection; if it cannot be met even at the domain
/// diameter the request is refused.
pub fn choose_cutoff(
    model: &ScaledModel,
    rho: f64,
    eps_miss: f64,
    domain: Domain,
) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("intensity must be finite and positive, got {rho}"),
        });
    }
    if !(eps_miss.is_finite() && eps_miss > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps_miss",
            reason: format!("miss budget must be finite and positive, got {eps_miss}"),
        });
    }
    let diameter = domain.diameter();
    if let Some(s) = model.support_distance() {
        return Ok(s.min(diameter));
    }
    let r = model.r();
    let g = |x: f64| model.model().evaluate(x);
    // expected suppressed edges when ignoring pairs beyond R
    let miss_bound = |cut: f64| -> Result<f64> {
        let a = cut / r;
        let tail = quad::integrate_to_infinity(
            |x| x * g(x),
            a,
            (a * 2.0).max(a + 8.0),
            |x| x * x * g(x),
            1e-10,
            1e-300,
        )?;
        Ok(rho * rho * 2.0 * PI * r * r * tail.value)
    };
    if miss_bound(diameter)? > eps_miss {
        return Err(Error::CutoffInfeasible {
            bound: miss_bound(diameter)?,
            target: eps_miss,
        });
    }
    let (mut lo, mut hi) = (0.0f64, diameter);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if miss_bound(mid)? <= eps_miss {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Samples edges via a cell grid, examining only pairs within the cutoff
/// radius for the given miss budget. Pair draws use the same keys as
/// [`build_exact`], so for compact-support profiles the result is identical
/// bit for bit; otherwise the expected number of missing edges is bounded by
/// `eps_miss`, recorded in the instance metadata.
pub fn build_pruned(
    points: &PointSet,
    model: &ScaledModel,
    domain: Domain,
    seed: u64,
    rho: f64,
    eps_miss: f64,
) -> Result<NetworkInstance> {
    let cutoff = choose_cutoff(model, rho, eps_miss, domain)?;
    let builder = BuilderKind::Pruned { cutoff, eps_miss };
    let n = points.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];

    // cell side must stay >= cutoff for 3x3 neighborhoods to cover it, and
    // there is no point in having far more cells than points
    let by_cutoff = (1.0 / cutoff).floor() as usize;
    let by_count = ((n as f64).sqrt().ceil() as usize) * 2;
    let ncells = by_cutoff.min(by_count.max(4)).max(1);

    let mut link = |a: usize, b: usize, d: f64| {
        let p = model.eval_at_distance(d);
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if pair_links(seed, i as u32, j as u32, p) {
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
    };

    if ncells < 4 {
        // grid too coarse to be useful; scan all pairs within the cutoff
        for i in 0..n {
            for j in (i + 1)..n {
                let d = domain.distance(points.get(i), points.get(j));
                if d <= cutoff {
                    link(i, j, d);
                }
            }
        }
        return Ok(finish(model.r(), domain, seed, builder, adj, true));
    }

    let side = 1.0 / ncells as f64;
    let cell_of = |v: f64| (((v + 0.5) / side) as usize).min(ncells - 1);
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); ncells * ncells];
    for (idx, p) in points.points().iter().enumerate() {
        cells[cell_of(p.y) * ncells + cell_of(p.x)].push(idx as u32);
    }

    let wrap = |c: isize| -> Option<usize> {
        match domain {
            Domain::Torus => Some(c.rem_euclid(ncells as isize) as usize),
            Domain::Square => (0..ncells as isize).contains(&c).then_some(c as usize),
        }
    };

    for cy in 0..ncells {
        for cx in 0..ncells {
            let home = cy * ncells + cx;
            if cells[home].is_empty() {
                continue;
            }
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (Some(ny), Some(nx)) =
                        (wrap(cy as isize + dy), wrap(cx as isize + dx))
                    else {
                        continue;
                    };
                    let other = ny * ncells + nx;
                    if other < home {
                        continue; // unordered cell pair handled from the smaller index
                    }
                    if other == home {
                        let members = &cells[home];
                        for (k, &a) in members.iter().enumerate() {
                            for &b in &members[k + 1..] {
                                let d =
                                    domain.distance(points.get(a as usize), points.get(b as usize));
                                if d <= cutoff {
                                    link(a as usize, b as usize, d);
                                }
                            }
                        }
                    } else {
                        for &a in &cells[home] {
                            for &b in &cells[other] {
                                let d =
                                    domain.distance(points.get(a as usize), points.get(b as usize));
                                if d <= cutoff {
                                    link(a as usize, b as usize, d);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(finish(model.r(), domain, seed, builder, adj, true))
}

/// Component census of an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentStats {
    pub node_count: usize,
    pub component_count: usize,
    pub largest: usize,
    pub isolated: usize,
    /// Component sizes, descending.
    pub sizes: Vec<u32>,
    /// True when the whole instance is one piece (vacuously for n <= 1).
    pub connected: bool,
}

impl ComponentStats {
    fn from_sizes(node_count: usize, mut sizes: Vec<u32>) -> Self {
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let component_count = sizes.len();
        let largest = sizes.first().copied().unwrap_or(0) as usize;
        let isolated = sizes.iter().filter(|&&s| s == 1).count();
        ComponentStats {
            node_count,
            component_count,
            largest,
            isolated,
            connected: node_count <= 1 || component_count == 1,
            sizes,
        }
    }

    /// Number of components with exactly `k` nodes.
    pub fn count_of_order(&self, k: usize) -> usize {
        self.sizes.iter().filter(|&&s| s as usize == k).count()
    }

    /// Number of components with more than `m` nodes.
    pub fn count_above(&self, m: usize) -> usize {
        self.sizes.iter().filter(|&&s| s as usize > m).count()
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            // path halving
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Connected-component census via union-find.
pub fn components(inst: &NetworkInstance) -> ComponentStats {
    let n = inst.n();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        let i32_ = i as u32;
        for &j in inst.neighbors(i) {
            if j > i32_ {
                uf.union(i32_, j);
            }
        }
    }
    let mut sizes = Vec::new();
    for i in 0..n as u32 {
        if uf.find(i) == i {
            sizes.push(uf.size[i as usize]);
        }
    }
    ComponentStats::from_sizes(n, sizes)
}

/// Reference census via breadth-first traversal; used to cross-check
/// [`components`] in tests.
pub fn components_bfs(inst: &NetworkInstance) -> ComponentStats {
    let n = inst.n();
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut size = 0u32;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &w in inst.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w as usize);
                }
            }
        }
        sizes.push(size);
    }
    ComponentStats::from_sizes(n, sizes)
}
