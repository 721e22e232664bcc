//! Request ingestion, trip-record filtering and conversion, demand
//! forecasting (perfect and myopic) and Poisson sampling of artificial
//! future requests.

use crate::network::{Network, NetworkError, ZoneMap};
use crate::{ms_from_s, DistMm, NodeId, RequestId, TimeMs, ZoneId};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("request {id}: origin and destination must differ")]
    DegenerateRequest { id: RequestId },
    #[error("request {id}: {node} is not an access node")]
    NotAccess { id: RequestId, node: NodeId },
    #[error("request {id}: origin cannot reach destination")]
    Unroutable { id: RequestId },
    #[error("zone {zone} has no access nodes but a positive rate")]
    EmptyZone { zone: ZoneId },
    #[error("node {0} is not assigned to any zone")]
    Unzoned(NodeId),
    #[error("forecast window must align to whole bins")]
    MisalignedWindow,
    #[error("{file}: {msg}")]
    BadFile { file: String, msg: String },
    #[error(transparent)]
    Net(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A customer trip request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time: TimeMs,
    pub direct_time: TimeMs,
    pub direct_distance: DistMm,
}

impl Request {
    /// Builds a request, deriving direct time/distance from the fastest path
    /// and validating the type invariants.
    pub fn new(
        id: RequestId,
        origin: NodeId,
        destination: NodeId,
        request_time: TimeMs,
        net: &Network,
    ) -> Result<Self, DemandError> {
        if origin == destination {
            return Err(DemandError::DegenerateRequest { id });
        }
        for node in [origin, destination] {
            if !net.is_access(node) {
                return Err(DemandError::NotAccess { id, node });
            }
        }
        let (direct_time, direct_distance) = net
            .cost(origin, destination)
            .map_err(|_| DemandError::Unroutable { id })?;
        Ok(Self {
            id,
            origin,
            destination,
            request_time,
            direct_time,
            direct_distance,
        })
    }
}

// ---------------------------------------------------------------------------
// Trip records
// ---------------------------------------------------------------------------

/// Raw zone-level trip record as found in TNC-style datasets.
#[derive(Debug, Clone)]
pub struct RawTrip {
    pub origin_area: String,
    pub destination_area: String,
    /// Start of the reported pickup interval.
    pub start_time: TimeMs,
    /// Width of the reported pickup interval.
    pub start_interval: TimeMs,
    pub distance_km: Option<f64>,
    pub duration_s: Option<f64>,
}

/// Bounds for removing presumably faulty records; a record is kept when each
/// quantity lies inside the closed interval.
#[derive(Debug, Clone)]
pub struct TripFilterRules {
    pub min_distance_km: f64,
    pub max_distance_km: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub min_speed_kmh: f64,
    pub max_speed_kmh: f64,
}

impl Default for TripFilterRules {
    fn default() -> Self {
        Self {
            min_distance_km: 0.1,
            max_distance_km: 100.0,
            min_duration_s: 60.0,
            max_duration_s: 5.0 * 3600.0,
            min_speed_kmh: 5.0,
            max_speed_kmh: 130.0,
        }
    }
}

impl TripFilterRules {
    pub fn validate(&self) -> Result<(), String> {
        for (lo, hi, what) in [
            (self.min_distance_km, self.max_distance_km, "distance"),
            (self.min_duration_s, self.max_duration_s, "duration"),
            (self.min_speed_kmh, self.max_speed_kmh, "speed"),
        ] {
            if !(lo < hi) {
                return Err(format!("{what}: min must be below max"));
            }
        }
        Ok(())
    }
}

/// Counters describing what `filter_trips` / `trips_to_requests` dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripDiagnostics {
    pub missing_fields: usize,
    pub out_of_bounds: usize,
    pub empty_area: usize,
    pub degenerate: usize,
    pub subsampled_out: usize,
}

/// Keeps exactly the records whose distance, duration and average speed all
/// lie inside the rule bounds. Records missing a required field are dropped
/// and counted, not a failure.
pub fn filter_trips(records: &[RawTrip], rules: &TripFilterRules) -> (Vec<RawTrip>, TripDiagnostics) {
    let mut diag = TripDiagnostics::default();
    let mut kept = Vec::new();
    for rec in records {
        let (dist, dur) = match (rec.distance_km, rec.duration_s) {
            (Some(d), Some(t)) => (d, t),
            _ => {
                diag.missing_fields += 1;
                continue;
            }
        };
        if dur <= 0.0 {
            diag.missing_fields += 1;
            continue;
        }
        let speed = dist / (dur / 3600.0);
        let inside = dist >= rules.min_distance_km
            && dist <= rules.max_distance_km
            && dur >= rules.min_duration_s
            && dur <= rules.max_duration_s
            && speed >= rules.min_speed_kmh
            && speed <= rules.max_speed_kmh;
        if inside {
            kept.push(rec.clone());
        } else {
            diag.out_of_bounds += 1;
        }
    }
    (kept, diag)
}

/// Converts zone-level trip records to node-level requests: origin and
/// destination drawn uniformly from the area's access nodes (destination
/// redrawn on a collision), request time uniform in whole seconds within the
/// reported start interval. `subsample` keeps each record independently with
/// the given probability before conversion.
pub fn trips_to_requests<R: Rng>(
    records: &[RawTrip],
    net: &Network,
    areas: &BTreeMap<String, Vec<NodeId>>,
    subsample: f64,
    rng: &mut R,
) -> (Vec<Request>, TripDiagnostics) {
    let mut diag = TripDiagnostics::default();
    let mut drafts: Vec<(NodeId, NodeId, TimeMs)> = Vec::new();
    for rec in records {
        if subsample < 1.0 && !rng.gen_bool(subsample.clamp(0.0, 1.0)) {
            diag.subsampled_out += 1;
            continue;
        }
        let (o_nodes, d_nodes) = match (areas.get(&rec.origin_area), areas.get(&rec.destination_area)) {
            (Some(o), Some(d)) if !o.is_empty() && !d.is_empty() => (o, d),
            _ => {
                diag.empty_area += 1;
                continue;
            }
        };
        let origin = o_nodes[rng.gen_range(0..o_nodes.len())];
        let mut destination = d_nodes[rng.gen_range(0..d_nodes.len())];
        if destination == origin {
            if d_nodes.iter().all(|&n| n == origin) {
                diag.degenerate += 1;
                continue;
            }
            while destination == origin {
                destination = d_nodes[rng.gen_range(0..d_nodes.len())];
            }
        }
        let span_s = (rec.start_interval / 1000).max(1);
        let offset_s = rng.gen_range(0..span_s);
        drafts.push((origin, destination, rec.start_time + offset_s * 1000));
    }
    drafts.sort_by_key(|&(o, d, t)| (t, o, d));
    let mut requests = Vec::new();
    for (k, (origin, destination, t)) in drafts.into_iter().enumerate() {
        match Request::new(RequestId(k as u64), origin, destination, t, net) {
            Ok(r) => requests.push(r),
            Err(_) => diag.degenerate += 1,
        }
    }
    (requests, diag)
}

// ---------------------------------------------------------------------------
// Forecasts
// ---------------------------------------------------------------------------

/// Expected requests per (origin zone, destination zone, time bin). Bins are
/// `bin_width` wide and aligned to multiples of it.
#[derive(Debug, Clone)]
pub struct ForecastMatrix {
    bin_width: TimeMs,
    rates: BTreeMap<(ZoneId, ZoneId, TimeMs), f64>,
}

impl ForecastMatrix {
    pub fn new(bin_width: TimeMs) -> Self {
        assert!(bin_width > 0);
        Self {
            bin_width,
            rates: BTreeMap::new(),
        }
    }

    pub fn bin_width(&self) -> TimeMs {
        self.bin_width
    }

    pub fn set_rate(&mut self, origin: ZoneId, destination: ZoneId, bin_start: TimeMs, rate: f64) {
        assert!(rate >= 0.0, "rates must be nonnegative");
        assert!(
            bin_start % self.bin_width == 0,
            "bin start must align to the bin width"
        );
        if rate > 0.0 {
            self.rates.insert((origin, destination, bin_start), rate);
        }
    }

    pub fn rate(&self, origin: ZoneId, destination: ZoneId, bin_start: TimeMs) -> f64 {
        self.rates
            .get(&(origin, destination, bin_start))
            .copied()
            .unwrap_or(0.0)
    }

    /// Nonzero cells in deterministic (origin, destination, bin) order.
    pub fn cells(&self) -> impl Iterator<Item = (ZoneId, ZoneId, TimeMs, f64)> + '_ {
        self.rates.iter().map(|(&(i, j, t), &r)| (i, j, t, r))
    }

    /// Sums rates over all bins whose start lies in `[from, to)`.
    pub fn rate_in_window(&self, origin: ZoneId, destination: ZoneId, from: TimeMs, to: TimeMs) -> f64 {
        let mut total = 0.0;
        let mut bin = from.div_euclid(self.bin_width) * self.bin_width;
        if bin < from {
            bin += self.bin_width;
        }
        while bin < to {
            total += self.rate(origin, destination, bin);
            bin += self.bin_width;
        }
        total
    }

    pub fn total_expected(&self) -> f64 {
        self.rates.values().sum()
    }
}

/// Builds the perfect forecast: the rate of cell (i, j, T) is the number of
/// input requests from zone i to zone j with request time in `[T, T+bin)`.
pub fn perfect_forecast(
    future_requests: &[Request],
    zones: &ZoneMap,
    bin_width: TimeMs,
) -> Result<ForecastMatrix, DemandError> {
    let mut counts: BTreeMap<(ZoneId, ZoneId, TimeMs), f64> = BTreeMap::new();
    for r in future_requests {
        let i = zones.zone_of(r.origin).ok_or(DemandError::Unzoned(r.origin))?;
        let j = zones
            .zone_of(r.destination)
            .ok_or(DemandError::Unzoned(r.destination))?;
        let bin = r.request_time.div_euclid(bin_width) * bin_width;
        *counts.entry((i, j, bin)).or_insert(0.0) += 1.0;
    }
    let mut fc = ForecastMatrix::new(bin_width);
    for ((i, j, bin), c) in counts {
        fc.set_rate(i, j, bin, c);
    }
    Ok(fc)
}

/// Builds the myopic forecast at time `now`: the request count per (i, j)
/// over `[now - bin, now)` becomes the rate of every future bin whose start
/// lies in `[now, now + horizon)`.
pub fn myopic_forecast(
    history: &[Request],
    zones: &ZoneMap,
    now: TimeMs,
    bin_width: TimeMs,
    horizon: TimeMs,
) -> Result<ForecastMatrix, DemandError> {
    let mut counts: BTreeMap<(ZoneId, ZoneId), f64> = BTreeMap::new();
    for r in history {
        if r.request_time < now - bin_width || r.request_time >= now {
            continue;
        }
        let i = zones.zone_of(r.origin).ok_or(DemandError::Unzoned(r.origin))?;
        let j = zones
            .zone_of(r.destination)
            .ok_or(DemandError::Unzoned(r.destination))?;
        *counts.entry((i, j)).or_insert(0.0) += 1.0;
    }
    let mut fc = ForecastMatrix::new(bin_width);
    let mut bin = now;
    while bin < now + horizon {
        for (&(i, j), &c) in &counts {
            fc.set_rate(i, j, bin, c);
        }
        bin += bin_width;
    }
    Ok(fc)
}

/// Draws artificial requests for `[from, to)` from the forecast: per cell a
/// Poisson count, per trip a uniform origin node in zone i, a uniform
/// destination node in zone j (redrawn while equal to the origin), and a
/// uniform whole-second request time within the bin. Output sorted by
/// request time; ids start at `first_id`.
pub fn sample_requests<R: Rng>(
    fc: &ForecastMatrix,
    from: TimeMs,
    to: TimeMs,
    zones: &ZoneMap,
    net: &Network,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<Request>, DemandError> {
    if from % fc.bin_width() != 0 || to % fc.bin_width() != 0 {
        return Err(DemandError::MisalignedWindow);
    }
    let member_lists: Vec<Vec<NodeId>> = zones
        .zones
        .iter()
        .map(|z| z.members.iter().copied().collect())
        .collect();
    let mut drafts: Vec<(TimeMs, NodeId, NodeId)> = Vec::new();
    for (i, j, bin, rate) in fc.cells() {
        if bin < from || bin >= to {
            continue;
        }
        let origin_nodes = &member_lists[i.0 as usize];
        let dest_nodes = &member_lists[j.0 as usize];
        if origin_nodes.is_empty() {
            return Err(DemandError::EmptyZone { zone: i });
        }
        if dest_nodes.is_empty() {
            return Err(DemandError::EmptyZone { zone: j });
        }
        let count = Poisson::new(rate).expect("positive rate").sample(rng) as u64;
        for _ in 0..count {
            let origin = origin_nodes[rng.gen_range(0..origin_nodes.len())];
            let mut destination = dest_nodes[rng.gen_range(0..dest_nodes.len())];
            if destination == origin && dest_nodes.iter().all(|&n| n == origin) {
                continue; // single-node zone pair, nothing to draw
            }
            while destination == origin {
                destination = dest_nodes[rng.gen_range(0..dest_nodes.len())];
            }
            let offset_s = rng.gen_range(0..(fc.bin_width() / 1000).max(1));
            drafts.push((bin + offset_s * 1000, origin, destination));
        }
    }
    drafts.sort();
    let mut out = Vec::with_capacity(drafts.len());
    for (k, (t, o, d)) in drafts.into_iter().enumerate() {
        out.push(Request::new(RequestId(first_id + k as u64), o, d, t, net)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Loads requests from CSV (request_id, origin_node, destination_node,
/// request_time_s); rows must be sorted by time.
pub fn load_requests(path: &Path, net: &Network) -> Result<Vec<Request>, DemandError> {
    let bad = |msg: String| DemandError::BadFile {
        file: path.display().to_string(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    for e in ["request_id", "origin_node", "destination_node", "request_time_s"] {
        if !headers.iter().any(|h| h == e) {
            return Err(bad(format!("missing column {e}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (c_id, c_o, c_d, c_t) = (
        col("request_id"),
        col("origin_node"),
        col("destination_node"),
        col("request_time_s"),
    );
    let mut out: Vec<Request> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: u64 = rec[c_id].trim().parse().map_err(|e| bad(format!("request_id: {e}")))?;
        let o: u32 = rec[c_o].trim().parse().map_err(|e| bad(format!("origin_node: {e}")))?;
        let d: u32 = rec[c_d]
            .trim()
            .parse()
            .map_err(|e| bad(format!("destination_node: {e}")))?;
        let t: f64 = rec[c_t]
            .trim()
            .parse()
            .map_err(|e| bad(format!("request_time_s: {e}")))?;
        let req = Request::new(RequestId(id), NodeId(o), NodeId(d), ms_from_s(t), net)?;
        if let Some(prev) = out.last() {
            if req.request_time < prev.request_time {
                return Err(bad("rows not sorted by request_time_s".into()));
            }
        }
        out.push(req);
    }
    Ok(out)
}

/// Writes requests as CSV (request_id, origin_node, destination_node,
/// request_time_s), sorted by time.
pub fn save_requests(requests: &[Request], path: &Path) -> Result<(), DemandError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut sorted: Vec<&Request> = requests.iter().collect();
    sorted.sort_by_key(|r| (r.request_time, r.id));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["request_id", "origin_node", "destination_node", "request_time_s"])?;
    for r in sorted {
        w.write_record(&[
            r.id.to_string(),
            r.origin.to_string(),
            r.destination.to_string(),
            format!("{}", crate::s_from_ms(r.request_time)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads an externally supplied forecast from CSV (origin_zone,
/// destination_zone, bin_start_s, rate).
pub fn load_forecast(path: &Path, bin_width: TimeMs) -> Result<ForecastMatrix, DemandError> {
    let bad = |msg: String| DemandError::BadFile {
        file: path.display().to_string(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    for e in ["origin_zone", "destination_zone", "bin_start_s", "rate"] {
        if !headers.iter().any(|h| h == e) {
            return Err(bad(format!("missing column {e}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (c_i, c_j, c_t, c_r) = (
        col("origin_zone"),
        col("destination_zone"),
        col("bin_start_s"),
        col("rate"),
    );
    let mut fc = ForecastMatrix::new(bin_width);
    for rec in rdr.records() {
        let rec = rec?;
        let i: u32 = rec[c_i].trim().parse().map_err(|e| bad(format!("origin_zone: {e}")))?;
        let j: u32 = rec[c_j]
            .trim()
            .parse()
            .map_err(|e| bad(format!("destination_zone: {e}")))?;
        let t: f64 = rec[c_t].trim().parse().map_err(|e| bad(format!("bin_start_s: {e}")))?;
        let r: f64 = rec[c_r].trim().parse().map_err(|e| bad(format!("rate: {e}")))?;
        let bin = ms_from_s(t);
        if bin % bin_width != 0 {
            return Err(bad(format!("bin_start_s {t} not aligned to the bin width")));
        }
        if r < 0.0 {
            return Err(bad(format!("negative rate {r}")));
        }
        fc.set_rate(ZoneId(i), ZoneId(j), bin, r);
    }
    Ok(fc)
}
