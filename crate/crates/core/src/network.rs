//! Contact networks.
//!
//! Three generator families (ring lattice, rewired small-world lattice and
//! Erdős–Rényi overlay) are combined by successive unions into a chain of
//! eight nested networks. A day's restriction flags select one level of the
//! chain.
//!
//! The suite stores every edge once, tagged with the first level it appears
//! in, and keeps each node's neighbour list sorted by that level. The
//! neighbours of a node at level `l` are therefore a prefix of its list.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};
use crate::params::BehaviorParams;

/// Simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    /// Normalised `(u, v)` with `u < v`, sorted, no duplicates.
    edges: Vec<(u32, u32)>,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    /// Builds a network from arbitrary pairs. Self-loops are rejected,
    /// duplicates (in either orientation) are merged.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(EpiError::Structural(format!("self-loop on node {a}")));
            }
            if a as usize >= n || b as usize >= n {
                return Err(EpiError::Structural(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self { n, edges })
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                edges.push((u, v));
            }
        }
        Self { n, edges }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u as usize] += 1;
            d[v as usize] += 1;
        }
        d
    }

    pub fn is_subset_of(&self, other: &Network) -> bool {
        self.edges.iter().all(|&(u, v)| other.contains(u, v))
    }

    fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        adj
    }

    /// Writes one `u v` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Ring lattice where node `i` is linked to `i±1` and `i±2` (mod `n`).
pub fn ring_lattice(n: usize) -> Result<Network> {
    if n < 5 {
        return Err(EpiError::InvalidInput(format!(
            "a degree-4 ring lattice needs at least 5 nodes, got {n}"
        )));
    }
    let n32 = n as u32;
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n32 {
        for step in 1..=2 {
            let j = (i + step) % n32;
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(Network { n, edges })
}

/// Small-world rewiring: every edge `(i, j)` is, with probability `alpha`,
/// replaced by `(i, k)` where `k` is uniform over the nodes that are neither
/// `i` nor currently adjacent to `i`.
pub fn rewire<R: Rng + ?Sized>(base: &Network, alpha: f64, rng: &mut R) -> Result<Network> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EpiError::InvalidInput(format!(
            "rewiring probability {alpha} outside [0, 1]"
        )));
    }
    if alpha == 0.0 {
        return Ok(base.clone());
    }
    let n = base.n;
    let mut adj = base.adjacency();
    for &(i, j) in &base.edges {
        if !rng.gen_bool(alpha) {
            continue;
        }
        let (iu, ju) = (i as usize, j as usize);
        let free = n - 1 - adj[iu].len();
        if free == 0 {
            continue;
        }
        let k = if adj[iu].len() * 2 < n {
            loop {
                let k = rng.gen_range(0..n as u32);
                if k != i && !adj[iu].contains(&k) {
                    break k;
                }
            }
        } else {
            let candidates: Vec<u32> = (0..n as u32)
                .filter(|&k| k != i && !adj[iu].contains(&k))
                .collect();
            candidates[rng.gen_range(0..candidates.len())]
        };
        adj[iu].retain(|&x| x != j);
        adj[ju].retain(|&x| x != i);
        adj[iu].push(k);
        adj[k as usize].push(i);
    }
    let mut edges = Vec::with_capacity(base.edges.len());
    for (u, list) in adj.iter().enumerate() {
        for &v in list {
            if (u as u32) < v {
                edges.push((u as u32, v));
            }
        }
    }
    edges.sort_unstable();
    Ok(Network { n, edges })
}

/// Erdős–Rényi overlay whose mean degree is `expected_added_degree`
/// (per-pair probability `expected_added_degree / (n - 1)`).
pub fn er_overlay<R: Rng + ?Sized>(
    n: usize,
    expected_added_degree: f64,
    rng: &mut R,
) -> Result<Network> {
    if !(expected_added_degree >= 0.0) {
        return Err(EpiError::InvalidInput(format!(
            "expected added degree {expected_added_degree} must be >= 0"
        )));
    }
    if expected_added_degree == 0.0 {
        return Ok(Network::empty(n));
    }
    if n < 2 || expected_added_degree > (n - 1) as f64 {
        return Err(EpiError::InvalidInput(format!(
            "expected added degree {expected_added_degree} exceeds n - 1 for n = {n}"
        )));
    }
    let beta = expected_added_degree / (n - 1) as f64;
    if beta >= 1.0 {
        return Ok(Network::complete(n));
    }
    // Geometric skipping over the lower triangle (Batagelj & Brandes).
    let log_q = (1.0 - beta).ln();
    let mut edges = Vec::new();
    let mut v: i64 = 1;
    let mut w: i64 = -1;
    let n = n as i64;
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v && v < n {
            w -= v;
            v += 1;
        }
        if v < n {
            edges.push((w as u32, v as u32));
        }
    }
    edges.sort_unstable();
    Ok(Network {
        n: n as usize,
        edges,
    })
}

/// The eight nested contact levels, from hard isolation to no restrictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuiteLevel {
    L0 = 0,
    Ls,
    Lm,
    Ll,
    Rxs,
    Rs,
    Rm,
    Rl,
}

impl SuiteLevel {
    pub const COUNT: usize = 8;

    pub const ALL: [SuiteLevel; Self::COUNT] = [
        SuiteLevel::L0,
        SuiteLevel::Ls,
        SuiteLevel::Lm,
        SuiteLevel::Ll,
        SuiteLevel::Rxs,
        SuiteLevel::Rs,
        SuiteLevel::Rm,
        SuiteLevel::Rl,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SuiteLevel::L0 => "L_0",
            SuiteLevel::Ls => "L_s",
            SuiteLevel::Lm => "L_m",
            SuiteLevel::Ll => "L_l",
            SuiteLevel::Rxs => "R_xs",
            SuiteLevel::Rs => "R_s",
            SuiteLevel::Rm => "R_m",
            SuiteLevel::Rl => "R_l",
        }
    }
}

impl fmt::Display for SuiteLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps workplace closing (0..=3), school closing (0..=3) and the lockdown
/// flag (0..=1) to the active network: the more restrictions, the sparser.
pub fn select_network(wpcf: u8, scf: u8, ldf: u8) -> Result<SuiteLevel> {
    if wpcf > 3 || scf > 3 || ldf > 1 {
        return Err(EpiError::InvalidInput(format!(
            "restriction flags out of range: workplace {wpcf}, school {scf}, lockdown {ldf}"
        )));
    }
    let sum = (wpcf + scf + ldf) as usize;
    Ok(SuiteLevel::ALL[SuiteLevel::COUNT - 1 - sum])
}

/// Nested network chain over a common node set.
#[derive(Debug, Clone)]
pub struct NetworkSuite {
    n: usize,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    /// `level_end[i * 8 + l]`: end of node `i`'s neighbours present at level `l`.
    level_end: Vec<u32>,
}

impl NetworkSuite {
    /// Builds a suite from per-level layers; the network at level `l` is the
    /// union of layers `0..=l`.
    pub fn from_layers(n: usize, layers: &[Network]) -> Result<Self> {
        if layers.len() != SuiteLevel::COUNT {
            return Err(EpiError::Structural(format!(
                "expected {} layers, got {}",
                SuiteLevel::COUNT,
                layers.len()
            )));
        }
        let mut tagged: Vec<(u32, u32, u8)> = Vec::new();
        for (level, layer) in layers.iter().enumerate() {
            if layer.n != n {
                return Err(EpiError::Structural(format!(
                    "layer {level} has {} nodes, suite has {n}",
                    layer.n
                )));
            }
            tagged.extend(layer.edges.iter().map(|&(u, v)| (u, v, level as u8)));
        }
        tagged.sort_unstable();
        tagged.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);

        let mut degree = vec![0u32; n];
        for &(u, v, _) in &tagged {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0u32);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut entries: Vec<(u8, u32)> = vec![(0, 0); *offsets.last().unwrap() as usize];
        let mut fill: Vec<u32> = offsets[..n].to_vec();
        for &(u, v, l) in &tagged {
            entries[fill[u as usize] as usize] = (l, v);
            fill[u as usize] += 1;
            entries[fill[v as usize] as usize] = (l, u);
            fill[v as usize] += 1;
        }
        let mut level_end = vec![0u32; n * SuiteLevel::COUNT];
        for i in 0..n {
            let (lo, hi) = (offsets[i] as usize, offsets[i + 1] as usize);
            entries[lo..hi].sort_unstable();
            let mut pos = lo;
            for l in 0..SuiteLevel::COUNT {
                while pos < hi && entries[pos].0 as usize <= l {
                    pos += 1;
                }
                level_end[i * SuiteLevel::COUNT + l] = pos as u32;
            }
        }
        Ok(Self {
            n,
            offsets,
            neighbors: entries.into_iter().map(|(_, v)| v).collect(),
            level_end,
        })
    }

    /// Same network at every level.
    pub fn uniform(network: Network) -> Self {
        let n = network.n;
        let mut layers = vec![network];
        layers.extend((1..SuiteLevel::COUNT).map(|_| Network::empty(n)));
        Self::from_layers(n, &layers).expect("layers share one node set")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Neighbours of `node` in the network active at `level`.
    #[inline]
    pub fn neighbors(&self, level: SuiteLevel, node: usize) -> &[u32] {
        let lo = self.offsets[node] as usize;
        let hi = self.level_end[node * SuiteLevel::COUNT + level.index()] as usize;
        &self.neighbors[lo..hi]
    }

    pub fn degree(&self, level: SuiteLevel, node: usize) -> usize {
        self.neighbors(level, node).len()
    }

    pub fn edge_count(&self, level: SuiteLevel) -> usize {
        (0..self.n).map(|i| self.degree(level, i)).sum::<usize>() / 2
    }

    /// Materialises the network active at `level`.
    pub fn network(&self, level: SuiteLevel) -> Network {
        let mut edges = Vec::with_capacity(self.edge_count(level));
        for u in 0..self.n {
            for &v in self.neighbors(level, u) {
                if (u as u32) < v {
                    edges.push((u as u32, v));
                }
            }
        }
        edges.sort_unstable();
        Network { n: self.n, edges }
    }

    /// Writes one edge-list file per level into `dir`, named after the level.
    pub fn export_edge_lists(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| EpiError::io(dir, e))?;
        for level in SuiteLevel::ALL {
            let path = dir.join(format!("{}.edges", level.name()));
            let file = std::fs::File::create(&path).map_err(|e| EpiError::io(&path, e))?;
            self.network(level)
                .write_edge_list(std::io::BufWriter::new(file))
                .map_err(|e| EpiError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Builds the eight-level suite for a region of `n` nodes.
///
/// Levels L_s, L_m and L_l each add an independently rewired lattice,
/// levels R_xs..R_l each add an independent random overlay.
pub fn build_suite<R: Rng + ?Sized>(n: usize, behavior: &BehaviorParams, rng: &mut R) -> Result<NetworkSuite> {
    let ring = ring_lattice(n)?;
    let mut layers = Vec::with_capacity(SuiteLevel::COUNT);
    layers.push(ring.clone());
    for _ in 0..3 {
        layers.push(rewire(&ring, behavior.p_l, rng)?);
    }
    for d in behavior.overlay_degrees() {
        layers.push(er_overlay(n, d, rng)?);
    }
    NetworkSuite::from_layers(n, &layers)
}
