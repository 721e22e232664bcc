//! Road network graph, fastest-path routing, travel-time tables, access-node
//! selection and zone construction.
//!
//! Edge travel times are static for the whole simulation. Fastest paths
//! minimize travel time with deterministic tie-breaking: smaller total
//! distance first, then the lexicographically smaller node sequence. All
//! quantities are integer milliseconds / millimeters, so ties are exact.

use crate::{mm_from_m, ms_from_s, DistMm, NodeId, TimeMs, ZoneId};
use poolsim_milp as milp;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge {from}->{to}: travel time must be positive")]
    NonPositiveTravelTime { from: NodeId, to: NodeId },
    #[error("edge {from}->{to}: negative length")]
    NegativeLength { from: NodeId, to: NodeId },
    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("time scale factor must be positive, got {0}")]
    BadScaleFactor(f64),
    #[error("requested {wanted} access nodes but only {available} candidates")]
    TooFewCandidates { wanted: usize, available: usize },
    #[error("zone construction infeasible: {0}")]
    Infeasible(String),
    #[error("{file}: {msg}")]
    BadFile { file: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    time: TimeMs,
    dist: DistMm,
}

/// Directed road network with travel-time/length edges and a designated set
/// of access nodes where customers may board or alight.
#[derive(Debug, Clone)]
pub struct Network {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    /// Forward adjacency, one arc per (from, to) pair: parallel edges are
    /// collapsed to the (time, dist)-smallest one, which is the only edge a
    /// fastest path can use.
    adj: Vec<Vec<Arc>>,
    radj: Vec<Vec<Arc>>,
    access: Vec<bool>,
    coords: Vec<(f64, f64)>,
}

/// Result of a fastest-path query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub time: TimeMs,
    pub dist: DistMm,
    pub path: Vec<NodeId>,
}

impl Network {
    /// Builds a network from node and edge lists.
    ///
    /// `nodes`: (id, is_access, x, y) with coordinates in meters.
    /// `edges`: (from, to, travel_time_ms, length_mm).
    pub fn new(
        nodes: Vec<(NodeId, bool, f64, f64)>,
        edges: Vec<(NodeId, NodeId, TimeMs, DistMm)>,
    ) -> Result<Self, NetworkError> {
        let mut sorted = nodes;
        sorted.sort_by_key(|&(id, _, _, _)| id);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(NetworkError::DuplicateNode(w[0].0));
            }
        }
        let ids: Vec<NodeId> = sorted.iter().map(|&(id, _, _, _)| id).collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let access: Vec<bool> = sorted.iter().map(|&(_, a, _, _)| a).collect();
        let coords: Vec<(f64, f64)> = sorted.iter().map(|&(_, _, x, y)| (x, y)).collect();

        let n = ids.len();
        let mut best: BTreeMap<(usize, usize), (TimeMs, DistMm)> = BTreeMap::new();
        for (from, to, time, dist) in edges {
            let fi = *index.get(&from).ok_or(NetworkError::UnknownNode(from))?;
            let ti = *index.get(&to).ok_or(NetworkError::UnknownNode(to))?;
            if time <= 0 {
                return Err(NetworkError::NonPositiveTravelTime { from, to });
            }
            if dist < 0 {
                return Err(NetworkError::NegativeLength { from, to });
            }
            let entry = best.entry((fi, ti)).or_insert((time, dist));
            if (time, dist) < *entry {
                *entry = (time, dist);
            }
        }
        let mut adj = vec![Vec::new(); n];
        let mut radj = vec![Vec::new(); n];
        for (&(fi, ti), &(time, dist)) in &best {
            adj[fi].push(Arc { to: ti, time, dist });
            radj[ti].push(Arc { to: fi, time, dist });
        }
        for list in radj.iter_mut() {
            list.sort_by_key(|a| a.to);
        }
        Ok(Self {
            ids,
            index,
            adj,
            radj,
            access,
            coords,
        })
    }

    /// Regular grid with bidirectional uniform edges; every node is an access
    /// node. Node ids are `row * cols + col`.
    pub fn grid(rows: u32, cols: u32, edge_time: TimeMs, edge_dist: DistMm) -> Self {
        let spacing = edge_dist as f64 / 1000.0;
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let id = NodeId(r * cols + c);
                nodes.push((id, true, c as f64 * spacing, r as f64 * spacing));
                if c + 1 < cols {
                    let right = NodeId(r * cols + c + 1);
                    edges.push((id, right, edge_time, edge_dist));
                    edges.push((right, id, edge_time, edge_dist));
                }
                if r + 1 < rows {
                    let down = NodeId((r + 1) * cols + c);
                    edges.push((id, down, edge_time, edge_dist));
                    edges.push((down, id, edge_time, edge_dist));
                }
            }
        }
        Self::new(nodes, edges).expect("grid construction is always valid")
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    pub fn is_access(&self, node: NodeId) -> bool {
        self.index.get(&node).map(|&i| self.access[i]).unwrap_or(false)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids.iter().copied()
    }

    /// Access nodes in ascending id order.
    pub fn access_nodes(&self) -> Vec<NodeId> {
        self.ids
            .iter()
            .zip(&self.access)
            .filter(|(_, &a)| a)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn coord(&self, node: NodeId) -> Option<(f64, f64)> {
        self.index.get(&node).map(|&i| self.coords[i])
    }

    /// The canonical arc between two adjacent nodes, if any.
    pub fn arc(&self, from: NodeId, to: NodeId) -> Option<(TimeMs, DistMm)> {
        let fi = *self.index.get(&from)?;
        let ti = *self.index.get(&to)?;
        self.adj[fi]
            .iter()
            .find(|a| a.to == ti)
            .map(|a| (a.time, a.dist))
    }

    /// Returns a copy of the network with every edge travel time multiplied
    /// by `factor` (rounded to milliseconds, floored at 1 ms); lengths are
    /// unchanged.
    pub fn scale_edge_times(&self, factor: f64) -> Result<Self, NetworkError> {
        if !(factor > 0.0) {
            return Err(NetworkError::BadScaleFactor(factor));
        }
        let mut out = self.clone();
        for list in out.adj.iter_mut().chain(out.radj.iter_mut()) {
            for arc in list.iter_mut() {
                arc.time = ((arc.time as f64 * factor).round() as TimeMs).max(1);
            }
        }
        Ok(out)
    }

    fn idx(&self, node: NodeId) -> Result<usize, NetworkError> {
        self.index.get(&node).copied().ok_or(NetworkError::UnknownNode(node))
    }

    /// Single-source fastest-path costs (time, then distance) to every node.
    /// `reversed` searches the transpose graph, i.e. costs *towards* the
    /// source.
    fn dijkstra(&self, source: usize, reversed: bool) -> Vec<Option<(TimeMs, DistMm)>> {
        let adj = if reversed { &self.radj } else { &self.adj };
        let mut dist: Vec<Option<(TimeMs, DistMm)>> = vec![None; self.ids.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(TimeMs, DistMm, usize)>> = BinaryHeap::new();
        dist[source] = Some((0, 0));
        heap.push(std::cmp::Reverse((0, 0, source)));
        while let Some(std::cmp::Reverse((t, d, v))) = heap.pop() {
            if dist[v] != Some((t, d)) {
                continue;
            }
            for arc in &adj[v] {
                let cand = (t + arc.time, d + arc.dist);
                if dist[arc.to].map_or(true, |cur| cand < cur) {
                    dist[arc.to] = Some(cand);
                    heap.push(std::cmp::Reverse((cand.0, cand.1, arc.to)));
                }
            }
        }
        dist
    }

    /// Fastest-path costs from `origin` to all nodes.
    pub fn times_from(&self, origin: NodeId) -> Result<Vec<(NodeId, TimeMs, DistMm)>, NetworkError> {
        let s = self.idx(origin)?;
        let dist = self.dijkstra(s, false);
        Ok(self
            .ids
            .iter()
            .zip(&dist)
            .filter_map(|(&id, d)| d.map(|(t, m)| (id, t, m)))
            .collect())
    }

    /// Time-minimal path from `origin` to `dest`; ties broken by smaller
    /// distance, then by the lexicographically smaller node sequence.
    pub fn fastest_path(&self, origin: NodeId, dest: NodeId) -> Result<PathResult, NetworkError> {
        let o = self.idx(origin)?;
        let d = self.idx(dest)?;
        if o == d {
            return Ok(PathResult {
                time: 0,
                dist: 0,
                path: vec![origin],
            });
        }
        // Costs towards the destination; suffix costs of optimal paths.
        let rev = self.dijkstra(d, true);
        let (total_t, total_d) = rev[o].ok_or(NetworkError::Unreachable {
            from: origin,
            to: dest,
        })?;
        // Greedy walk: at every node take the smallest-id neighbor that still
        // completes an optimal (time, dist) path. Suffixes of optimal paths
        // are optimal, so the walk realizes the lexicographically smallest
        // optimal node sequence.
        let mut path = vec![origin];
        let mut cur = o;
        let (mut t_acc, mut d_acc) = (0, 0);
        while cur != d {
            let mut chosen: Option<&Arc> = None;
            for arc in &self.adj[cur] {
                if let Some((rt, rd)) = rev[arc.to] {
                    if t_acc + arc.time + rt == total_t && d_acc + arc.dist + rd == total_d {
                        chosen = Some(arc);
                        break;
                    }
                }
            }
            let arc = chosen.expect("optimal continuation must exist");
            t_acc += arc.time;
            d_acc += arc.dist;
            cur = arc.to;
            path.push(self.ids[cur]);
            debug_assert!(path.len() <= self.ids.len());
        }
        Ok(PathResult {
            time: total_t,
            dist: total_d,
            path,
        })
    }

    /// Fastest-path cost only (no path reconstruction).
    pub fn cost(&self, origin: NodeId, dest: NodeId) -> Result<(TimeMs, DistMm), NetworkError> {
        let o = self.idx(origin)?;
        let d = self.idx(dest)?;
        self.dijkstra(o, false)[d].ok_or(NetworkError::Unreachable {
            from: origin,
            to: dest,
        })
    }

    /// Precomputes the pairwise fastest-path table over `nodes`.
    pub fn travel_time_matrix(&self, nodes: &[NodeId]) -> Result<TravelTimeMatrix, NetworkError> {
        let mut uniq = nodes.to_vec();
        uniq.sort();
        uniq.dedup();
        let index: HashMap<NodeId, usize> = uniq.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut entries = vec![None; uniq.len() * uniq.len()];
        for (row, &origin) in uniq.iter().enumerate() {
            let s = self.idx(origin)?;
            let dist = self.dijkstra(s, false);
            for (col, &destination) in uniq.iter().enumerate() {
                entries[row * uniq.len() + col] = dist[self.idx(destination)?];
            }
        }
        Ok(TravelTimeMatrix {
            nodes: uniq,
            index,
            entries,
        })
    }

    /// Thins a candidate node set down to exactly `target_count` nodes.
    ///
    /// While more than `target_count` candidates survive, a uniformly random
    /// candidate whose nearest surviving neighbor lies closer than
    /// `min_spacing_m` (straight-line meters) is removed; once no candidate
    /// violates the spacing rule, removal continues uniformly at random.
    pub fn select_access_nodes<R: Rng>(
        &self,
        candidate_rule: impl Fn(NodeId) -> bool,
        min_spacing_m: f64,
        target_count: usize,
        rng: &mut R,
    ) -> Result<BTreeSet<NodeId>, NetworkError> {
        let mut cands: Vec<usize> = (0..self.ids.len())
            .filter(|&i| candidate_rule(self.ids[i]))
            .collect();
        if target_count > cands.len() {
            return Err(NetworkError::TooFewCandidates {
                wanted: target_count,
                available: cands.len(),
            });
        }
        while cands.len() > target_count {
            let mut violating: Vec<usize> = Vec::new();
            if min_spacing_m > 0.0 {
                for (pos, &i) in cands.iter().enumerate() {
                    let (xi, yi) = self.coords[i];
                    let crowded = cands.iter().any(|&j| {
                        if j == i {
                            return false;
                        }
                        let (xj, yj) = self.coords[j];
                        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt() < min_spacing_m
                    });
                    if crowded {
                        violating.push(pos);
                    }
                }
            }
            let victim_pos = if violating.is_empty() {
                rng.gen_range(0..cands.len())
            } else {
                violating[rng.gen_range(0..violating.len())]
            };
            cands.remove(victim_pos);
        }
        Ok(cands.into_iter().map(|i| self.ids[i]).collect())
    }

    /// Minimum-cardinality centroid set such that every access node is
    /// reachable from some centroid within `reach_limit` driving time
    /// (set-cover integer program over the access nodes, fixed variable
    /// order by ascending node id).
    pub fn select_zone_centroids(&self, reach_limit: TimeMs) -> Result<Vec<NodeId>, NetworkError> {
        let access: Vec<usize> = (0..self.ids.len()).filter(|&i| self.access[i]).collect();
        if access.is_empty() {
            return Err(NetworkError::Infeasible("no access nodes".into()));
        }
        // covers[c][n]: centroid candidate c reaches access node n in time.
        let mut covered_by: Vec<Vec<usize>> = vec![Vec::new(); access.len()];
        for (ci, &c) in access.iter().enumerate() {
            let dist = self.dijkstra(c, false);
            for (ni, &n) in access.iter().enumerate() {
                if let Some((t, _)) = dist[n] {
                    if t <= reach_limit {
                        covered_by[ni].push(ci);
                    }
                }
            }
        }
        for (ni, cov) in covered_by.iter().enumerate() {
            if cov.is_empty() {
                return Err(NetworkError::Infeasible(format!(
                    "access node {} unreachable within the limit",
                    self.ids[access[ni]]
                )));
            }
        }
        let mut model = milp::Model::new(milp::Sense::Minimize);
        let vars: Vec<milp::VarRef> = access.iter().map(|_| model.add_binary()).collect();
        for v in &vars {
            model.set_objective(*v, 1.0);
        }
        for cov in &covered_by {
            let terms: Vec<_> = cov.iter().map(|&ci| (vars[ci], 1.0)).collect();
            model.add_constraint(&terms, milp::Relation::Ge, 1.0);
        }
        let sol = milp::solve(&model, milp::SolveLimits::default());
        if sol.status != milp::SolveStatus::Optimal {
            return Err(NetworkError::Infeasible(format!(
                "set cover solve ended with {:?}",
                sol.status
            )));
        }
        Ok(access
            .iter()
            .zip(&sol.values)
            .filter(|(_, &x)| x > 0.5)
            .map(|(&i, _)| self.ids[i])
            .collect())
    }

    /// Partitions the access nodes into zones of the closest centroid
    /// (travel time centroid -> node, ties to the smallest centroid id).
    pub fn assign_nodes_to_zones(&self, centroids: &[NodeId]) -> Result<Vec<Zone>, NetworkError> {
        if centroids.is_empty() {
            return Err(NetworkError::Infeasible("no centroids given".into()));
        }
        let mut sorted = centroids.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut reach: Vec<Vec<Option<(TimeMs, DistMm)>>> = Vec::with_capacity(sorted.len());
        for &c in &sorted {
            reach.push(self.dijkstra(self.idx(c)?, false));
        }
        let mut zones: Vec<Zone> = sorted
            .iter()
            .enumerate()
            .map(|(k, &c)| Zone {
                id: ZoneId(k as u32),
                centroid: c,
                members: BTreeSet::new(),
            })
            .collect();
        for (i, &id) in self.ids.iter().enumerate() {
            if !self.access[i] {
                continue;
            }
            let mut best: Option<(TimeMs, usize)> = None;
            for (k, r) in reach.iter().enumerate() {
                if let Some((t, _)) = r[i] {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, k));
                    }
                }
            }
            match best {
                Some((_, k)) => {
                    zones[k].members.insert(id);
                }
                None => {
                    return Err(NetworkError::Infeasible(format!(
                        "node {id} unreachable from every centroid"
                    )))
                }
            }
        }
        Ok(zones)
    }
}

/// Zone of the operating area: a centroid plus the access nodes it serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub id: ZoneId,
    pub centroid: NodeId,
    pub members: BTreeSet<NodeId>,
}

/// Precomputed origin x destination fastest-path costs over a node subset.
/// Unreachable pairs are `None`; the diagonal is `(0, 0)`.
#[derive(Debug, Clone)]
pub struct TravelTimeMatrix {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    entries: Vec<Option<(TimeMs, DistMm)>>,
}

impl TravelTimeMatrix {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    /// Cost between two covered nodes; `None` when unreachable. Panics if a
    /// node is not part of the table.
    pub fn cost(&self, origin: NodeId, dest: NodeId) -> Option<(TimeMs, DistMm)> {
        let o = self.index[&origin];
        let d = self.index[&dest];
        self.entries[o * self.nodes.len() + d]
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Loads a network from `nodes.csv` (node_id, is_access, x, y) and
/// `edges.csv` (from, to, travel_time_s, length_m) in `dir`. A missing or
/// empty length falls back to travel_time x 10 m/s.
pub fn load_network_dir(dir: &Path) -> Result<Network, NetworkError> {
    let nodes_path = dir.join("nodes.csv");
    let edges_path = dir.join("edges.csv");
    let bad = |file: &Path, msg: String| NetworkError::BadFile {
        file: file.display().to_string(),
        msg,
    };

    let mut nodes = Vec::new();
    let mut rdr = csv::Reader::from_path(&nodes_path)?;
    {
        let headers = rdr.headers()?.clone();
        let expect = ["node_id", "is_access", "x", "y"];
        for e in expect {
            if !headers.iter().any(|h| h == e) {
                return Err(bad(&nodes_path, format!("missing column {e}")));
            }
        }
        let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
        let (c_id, c_acc, c_x, c_y) = (col("node_id"), col("is_access"), col("x"), col("y"));
        for rec in rdr.records() {
            let rec = rec?;
            let id: u32 = rec[c_id]
                .trim()
                .parse()
                .map_err(|e| bad(&nodes_path, format!("node_id: {e}")))?;
            let acc = matches!(rec[c_acc].trim(), "1" | "true");
            let x: f64 = rec[c_x].trim().parse().unwrap_or(0.0);
            let y: f64 = rec[c_y].trim().parse().unwrap_or(0.0);
            nodes.push((NodeId(id), acc, x, y));
        }
    }

    let mut edges = Vec::new();
    let mut rdr = csv::Reader::from_path(&edges_path)?;
    {
        let headers = rdr.headers()?.clone();
        for e in ["from", "to", "travel_time_s"] {
            if !headers.iter().any(|h| h == e) {
                return Err(bad(&edges_path, format!("missing column {e}")));
            }
        }
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (c_from, c_to, c_tt) = (
            col("from").unwrap(),
            col("to").unwrap(),
            col("travel_time_s").unwrap(),
        );
        let c_len = col("length_m");
        for rec in rdr.records() {
            let rec = rec?;
            let from: u32 = rec[c_from]
                .trim()
                .parse()
                .map_err(|e| bad(&edges_path, format!("from: {e}")))?;
            let to: u32 = rec[c_to]
                .trim()
                .parse()
                .map_err(|e| bad(&edges_path, format!("to: {e}")))?;
            let tt_s: f64 = rec[c_tt]
                .trim()
                .parse()
                .map_err(|e| bad(&edges_path, format!("travel_time_s: {e}")))?;
            let tt = ms_from_s(tt_s);
            let len = match c_len.and_then(|c| rec.get(c)).map(str::trim) {
                Some(s) if !s.is_empty() => mm_from_m(
                    s.parse::<f64>()
                        .map_err(|e| bad(&edges_path, format!("length_m: {e}")))?,
                ),
                // Documented fallback: 10 m/s of driving.
                _ => tt * 10,
            };
            edges.push((NodeId(from), NodeId(to), tt, len));
        }
    }
    Network::new(nodes, edges)
}

/// Writes `nodes.csv` / `edges.csv` for `net` into `dir`.
pub fn save_network_dir(net: &Network, dir: &Path) -> Result<(), NetworkError> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))?;
    w.write_record(["node_id", "is_access", "x", "y"])?;
    for (i, &id) in net.ids.iter().enumerate() {
        let (x, y) = net.coords[i];
        w.write_record(&[
            id.to_string(),
            if net.access[i] { "1".into() } else { "0".into() },
            format!("{x}"),
            format!("{y}"),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("edges.csv"))?;
    w.write_record(["from", "to", "travel_time_s", "length_m"])?;
    for (fi, list) in net.adj.iter().enumerate() {
        for arc in list {
            w.write_record(&[
                net.ids[fi].to_string(),
                net.ids[arc.to].to_string(),
                format!("{}", crate::s_from_ms(arc.time)),
                format!("{}", arc.dist as f64 / 1000.0),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads zones from CSV (node_id, zone_id, is_centroid).
pub fn load_zones(path: &Path) -> Result<Vec<Zone>, NetworkError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    for e in ["node_id", "zone_id", "is_centroid"] {
        if !headers.iter().any(|h| h == e) {
            return Err(NetworkError::BadFile {
                file: path.display().to_string(),
                msg: format!("missing column {e}"),
            });
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (c_node, c_zone, c_cent) = (col("node_id"), col("zone_id"), col("is_centroid"));
    let mut members: BTreeMap<u32, BTreeSet<NodeId>> = BTreeMap::new();
    let mut centroids: BTreeMap<u32, NodeId> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let node = NodeId(rec[c_node].trim().parse().map_err(|e| NetworkError::BadFile {
            file: path.display().to_string(),
            msg: format!("node_id: {e}"),
        })?);
        let zone: u32 = rec[c_zone].trim().parse().map_err(|e| NetworkError::BadFile {
            file: path.display().to_string(),
            msg: format!("zone_id: {e}"),
        })?;
        members.entry(zone).or_default().insert(node);
        if matches!(rec[c_cent].trim(), "1" | "true") {
            centroids.insert(zone, node);
        }
    }
    let mut zones = Vec::new();
    for (zid, mem) in members {
        let centroid = centroids.get(&zid).copied().ok_or_else(|| NetworkError::BadFile {
            file: path.display().to_string(),
            msg: format!("zone {zid} has no centroid row"),
        })?;
        zones.push(Zone {
            id: ZoneId(zid),
            centroid,
            members: mem,
        });
    }
    Ok(zones)
}

/// Writes zones as CSV (node_id, zone_id, is_centroid).
pub fn save_zones(zones: &[Zone], path: &Path) -> Result<(), NetworkError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "zone_id", "is_centroid"])?;
    for z in zones {
        for &node in &z.members {
            w.write_record(&[
                node.to_string(),
                z.id.to_string(),
                if node == z.centroid { "1".into() } else { "0".to_string() },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Zone lookup by member node.
#[derive(Debug, Clone)]
pub struct ZoneMap {
    by_node: HashMap<NodeId, ZoneId>,
    pub zones: Vec<Zone>,
}

impl ZoneMap {
    pub fn new(zones: Vec<Zone>) -> Self {
        let mut by_node = HashMap::new();
        for z in &zones {
            for &n in &z.members {
                by_node.insert(n, z.id);
            }
        }
        Self { by_node, zones }
    }

    pub fn zone_of(&self, node: NodeId) -> Option<ZoneId> {
        self.by_node.get(&node).copied()
    }

    pub fn centroid(&self, zone: ZoneId) -> NodeId {
        self.zones[zone.0 as usize].centroid
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Network {
        // A -> B (10s, 100m), B -> C (10s, 100m), A -> C (25s, 260m)
        Network::new(
            vec![
                (NodeId(0), true, 0.0, 0.0),
                (NodeId(1), true, 100.0, 0.0),
                (NodeId(2), true, 200.0, 0.0),
                (NodeId(3), true, 300.0, 0.0), // isolated
            ],
            vec![
                (NodeId(0), NodeId(1), 10_000, 100_000),
                (NodeId(1), NodeId(2), 10_000, 100_000),
                (NodeId(0), NodeId(2), 25_000, 260_000),
            ],
        )
        .unwrap()
    }

    #[test]
    fn fastest_path_triangle() {
        let net = triangle();
        let r = net.fastest_path(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(r.time, 20_000);
        assert_eq!(r.dist, 200_000);
        assert_eq!(r.path, vec![NodeId(0), NodeId(1), NodeId(2)]);
    }

    #[test]
    fn fastest_path_identity() {
        let net = triangle();
        let r = net.fastest_path(NodeId(0), NodeId(0)).unwrap();
        assert_eq!((r.time, r.dist), (0, 0));
        assert_eq!(r.path, vec![NodeId(0)]);
    }

    #[test]
    fn fastest_path_unreachable() {
        let net = triangle();
        assert!(matches!(
            net.fastest_path(NodeId(0), NodeId(3)),
            Err(NetworkError::Unreachable { .. })
        ));
    }

    #[test]
    fn equal_time_tie_breaks_on_distance_then_lex() {
        // Two same-time routes 0->3: via 1 (longer) and via 2 (shorter).
        let net = Network::new(
            vec![
                (NodeId(0), true, 0.0, 0.0),
                (NodeId(1), true, 0.0, 0.0),
                (NodeId(2), true, 0.0, 0.0),
                (NodeId(3), true, 0.0, 0.0),
            ],
            vec![
                (NodeId(0), NodeId(1), 10_000, 150_000),
                (NodeId(1), NodeId(3), 10_000, 150_000),
                (NodeId(0), NodeId(2), 10_000, 100_000),
                (NodeId(2), NodeId(3), 10_000, 100_000),
            ],
        )
        .unwrap();
        let r = net.fastest_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(r.path, vec![NodeId(0), NodeId(2), NodeId(3)]);

        // Fully symmetric alternatives: lexicographically smaller wins.
        let net = Network::new(
            vec![
                (NodeId(0), true, 0.0, 0.0),
                (NodeId(1), true, 0.0, 0.0),
                (NodeId(2), true, 0.0, 0.0),
                (NodeId(3), true, 0.0, 0.0),
            ],
            vec![
                (NodeId(0), NodeId(1), 10_000, 100_000),
                (NodeId(1), NodeId(3), 10_000, 100_000),
                (NodeId(0), NodeId(2), 10_000, 100_000),
                (NodeId(2), NodeId(3), 10_000, 100_000),
            ],
        )
        .unwrap();
        let r = net.fastest_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(r.path, vec![NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn scaling_edges() {
        let net = triangle();
        let same = net.scale_edge_times(1.0).unwrap();
        assert_eq!(same.fastest_path(NodeId(0), NodeId(2)).unwrap().time, 20_000);
        let scaled = net.scale_edge_times(1.62).unwrap();
        assert_eq!(scaled.arc(NodeId(0), NodeId(1)).unwrap().0, 16_200);
        // Doubling doubles any fastest-path time; lengths unchanged.
        let doubled = net.scale_edge_times(2.0).unwrap();
        let r = doubled.fastest_path(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(r.time, 40_000);
        assert_eq!(r.dist, 200_000);
        assert!(net.scale_edge_times(0.0).is_err());
        assert!(net.scale_edge_times(-1.5).is_err());
    }

    #[test]
    fn triangle_inequality_on_grid() {
        let net = Network::grid(4, 4, 60_000, 500_000);
        let nodes = net.access_nodes();
        let matrix = net.travel_time_matrix(&nodes).unwrap();
        for &o in &nodes {
            for &d in &nodes {
                let (tod, _) = matrix.cost(o, d).unwrap();
                for &m in &nodes {
                    let (tom, _) = matrix.cost(o, m).unwrap();
                    let (tmd, _) = matrix.cost(m, d).unwrap();
                    assert!(tod <= tom + tmd);
                }
            }
        }
    }

    #[test]
    fn matrix_matches_on_demand_routing() {
        let net = Network::grid(3, 5, 45_000, 380_000);
        let nodes = net.access_nodes();
        let matrix = net.travel_time_matrix(&nodes).unwrap();
        for &o in &nodes {
            for &d in &nodes {
                let r = net.fastest_path(o, d).unwrap();
                assert_eq!(matrix.cost(o, d), Some((r.time, r.dist)));
            }
        }
        assert_eq!(matrix.cost(nodes[3], nodes[3]), Some((0, 0)));
    }

    #[test]
    fn access_node_selection() {
        let net = Network::grid(4, 4, 60_000, 500_000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Identity case: keep everything.
        let all = net
            .select_access_nodes(|_| true, 0.0, 16, &mut rng)
            .unwrap();
        assert_eq!(all.len(), 16);
        // Spacing vacuous: random removal down to target.
        let some = net
            .select_access_nodes(|_| true, 0.0, 5, &mut rng)
            .unwrap();
        assert_eq!(some.len(), 5);
        // Spacing 600m on a 500m grid: everything violates initially.
        let spaced = net
            .select_access_nodes(|_| true, 600.0, 4, &mut rng)
            .unwrap();
        assert_eq!(spaced.len(), 4);
        // Deterministic per seed.
        let mut rng1 = ChaCha8Rng::seed_from_u64(9);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            net.select_access_nodes(|_| true, 600.0, 6, &mut rng1).unwrap(),
            net.select_access_nodes(|_| true, 600.0, 6, &mut rng2).unwrap()
        );
        assert!(net.select_access_nodes(|_| true, 0.0, 17, &mut rng).is_err());
    }

    #[test]
    fn star_graph_single_centroid() {
        // Star: center 0 connected to leaves both ways.
        let mut nodes = vec![(NodeId(0), true, 0.0, 0.0)];
        let mut edges = Vec::new();
        for i in 1..=5 {
            nodes.push((NodeId(i), true, i as f64, 0.0));
            edges.push((NodeId(0), NodeId(i), 30_000, 100_000));
            edges.push((NodeId(i), NodeId(0), 30_000, 100_000));
        }
        let net = Network::new(nodes, edges).unwrap();
        let centroids = net.select_zone_centroids(30_000).unwrap();
        assert_eq!(centroids, vec![NodeId(0)]);
    }

    #[test]
    fn full_reach_gives_single_centroid() {
        let net = Network::grid(3, 3, 10_000, 100_000);
        // Diameter is 4 edges = 40 s.
        let centroids = net.select_zone_centroids(40_000).unwrap();
        assert_eq!(centroids.len(), 1);
    }

    #[test]
    fn zone_cover_matches_bruteforce_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        for case in 0..100 {
            let n = rng.gen_range(2..=12u32);
            let mut nodes = Vec::new();
            let mut edges = Vec::new();
            for i in 0..n {
                nodes.push((NodeId(i), true, i as f64, 0.0));
            }
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.gen_bool(0.35) {
                        edges.push((NodeId(a), NodeId(b), rng.gen_range(1..=5) * 1000, 1000));
                    }
                }
            }
            let net = Network::new(nodes, edges).unwrap();
            let limit: TimeMs = rng.gen_range(1..=8) * 1000;
            let got = net.select_zone_centroids(limit).unwrap();

            // Brute force minimum cover.
            let ids: Vec<NodeId> = net.access_nodes();
            let cover: Vec<Vec<bool>> = ids
                .iter()
                .map(|&c| {
                    let row = net.times_from(c).unwrap();
                    let costs: HashMap<NodeId, TimeMs> =
                        row.into_iter().map(|(id, t, _)| (id, t)).collect();
                    ids.iter()
                        .map(|&m| costs.get(&m).map_or(false, |&t| t <= limit))
                        .collect()
                })
                .collect();
            let mut best = usize::MAX;
            for mask in 0u32..(1 << ids.len()) {
                let picked: Vec<usize> =
                    (0..ids.len()).filter(|i| mask >> i & 1 == 1).collect();
                if picked.len() >= best {
                    continue;
                }
                let all = (0..ids.len()).all(|m| picked.iter().any(|&c| cover[c][m]));
                if all {
                    best = picked.len();
                }
            }
            assert_eq!(got.len(), best, "case {case}: sizes differ");
        }
    }

    #[test]
    fn zone_assignment_partition_and_ties() {
        // Line 0 - 1 - 2 - 3 - 4 with centroids 1 and 3; node 2 is
        // equidistant and goes to the smaller centroid id.
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for i in 0..5u32 {
            nodes.push((NodeId(i), true, i as f64, 0.0));
            if i > 0 {
                edges.push((NodeId(i - 1), NodeId(i), 10_000, 100_000));
                edges.push((NodeId(i), NodeId(i - 1), 10_000, 100_000));
            }
        }
        let net = Network::new(nodes, edges).unwrap();
        let zones = net.assign_nodes_to_zones(&[NodeId(3), NodeId(1)]).unwrap();
        assert_eq!(zones.len(), 2);
        assert_eq!(zones[0].centroid, NodeId(1));
        assert!(zones[0].members.contains(&NodeId(2)), "tie goes to centroid 1");
        let all: BTreeSet<NodeId> = zones.iter().flat_map(|z| z.members.clone()).collect();
        assert_eq!(all.len(), 5);
        let total: usize = zones.iter().map(|z| z.members.len()).sum();
        assert_eq!(total, 5, "zones are pairwise disjoint");
        // Single centroid: one zone holding everything.
        let one = net.assign_nodes_to_zones(&[NodeId(0)]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].members.len(), 5);
    }

    #[test]
    fn network_csv_round_trip() {
        let net = Network::grid(3, 3, 30_000, 250_000);
        let dir = std::env::temp_dir().join(format!("poolsim-net-{}", std::process::id()));
        save_network_dir(&net, &dir).unwrap();
        let loaded = load_network_dir(&dir).unwrap();
        assert_eq!(loaded.num_nodes(), 9);
        assert_eq!(loaded.num_edges(), net.num_edges());
        let a = net.fastest_path(NodeId(0), NodeId(8)).unwrap();
        let b = loaded.fastest_path(NodeId(0), NodeId(8)).unwrap();
        assert_eq!((a.time, a.dist, a.path), (b.time, b.dist, b.path));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn zones_csv_round_trip() {
        let net = Network::grid(3, 3, 30_000, 250_000);
        let centroids = net.select_zone_centroids(60_000).unwrap();
        let zones = net.assign_nodes_to_zones(&centroids).unwrap();
        let path = std::env::temp_dir().join(format!("poolsim-zones-{}.csv", std::process::id()));
        save_zones(&zones, &path).unwrap();
        let loaded = load_zones(&path).unwrap();
        assert_eq!(zones, loaded);
        std::fs::remove_file(&path).ok();
    }
}
