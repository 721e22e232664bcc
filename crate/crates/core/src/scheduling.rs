//! Stops, schedules, feasibility checking, the operator objective, schedule
//! execution in time and the insertion heuristic.
//!
//! A schedule is an ordered stop list executed along fastest paths. It is
//! feasible when every customer is dropped off after being picked up, picked
//! up no later than `request_time + max_wait`, dropped off no later than
//! `request_time + max_wait + (1 + max_detour) * direct_time` (both bounds
//! inclusive), and the occupancy never exceeds the vehicle capacity.

use crate::demand::Request;
use crate::network::Network;
use crate::{DistMm, NodeId, RequestId, TimeMs, VehicleId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Travel-time provider; implemented by [`Network`] directly and by cached
/// lookups in the engine.
pub trait Router {
    /// Fastest-path time/distance between nodes, `None` when unreachable.
    fn travel(&self, from: NodeId, to: NodeId) -> Option<(TimeMs, DistMm)>;
}

impl Router for Network {
    fn travel(&self, from: NodeId, to: NodeId) -> Option<(TimeMs, DistMm)> {
        self.cost(from, to).ok()
    }
}

/// Service quality parameters of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ServiceConstraints {
    pub max_wait: TimeMs,
    /// Maximum relative detour on top of the direct travel time.
    pub max_detour: f64,
    pub capacity: u32,
    pub boarding_duration: TimeMs,
}

impl ServiceConstraints {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_wait < 0 || self.boarding_duration < 0 {
            return Err("durations must be nonnegative".into());
        }
        if self.max_detour < 0.0 {
            return Err("max_detour must be nonnegative".into());
        }
        if self.capacity < 1 {
            return Err("capacity must be at least 1".into());
        }
        Ok(())
    }

    pub fn latest_pickup(&self, r: &Request) -> TimeMs {
        r.request_time + self.max_wait
    }

    /// Drop-off deadline anchored at the latest pickup plus the maximally
    /// detoured ride, so deadlines are fixed at request time.
    pub fn latest_dropoff(&self, r: &Request) -> TimeMs {
        r.request_time + self.max_wait + ((1.0 + self.max_detour) * r.direct_time as f64).round() as TimeMs
    }
}

#[derive(Debug, Error)]
pub enum SchedulingError {
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("stop at {to} not routable from {from}")]
    Unroutable { from: NodeId, to: NodeId },
}

/// First failed feasibility condition of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Drop-off without (or before) the matching pick-up, double boarding,
    /// or a customer left on board at the end.
    Precedence(RequestId),
    /// Pick-up after the waiting-time deadline.
    WaitingTime(RequestId),
    /// Drop-off after the detour deadline.
    Detour(RequestId),
    /// More customers on board than seats.
    Capacity { at_stop: usize },
}

/// Planned or executed halt of one vehicle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stop {
    pub node: NodeId,
    pub board: Vec<RequestId>,
    pub alight: Vec<RequestId>,
    pub planned_arrival: TimeMs,
    pub planned_departure: TimeMs,
}

/// Stop content before times are planned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopPlan {
    pub node: NodeId,
    pub board: Vec<RequestId>,
    pub alight: Vec<RequestId>,
}

impl StopPlan {
    pub fn pickup(node: NodeId, r: RequestId) -> Self {
        Self {
            node,
            board: vec![r],
            alight: Vec::new(),
        }
    }

    pub fn dropoff(node: NodeId, r: RequestId) -> Self {
        Self {
            node,
            board: Vec::new(),
            alight: vec![r],
        }
    }
}

impl From<&Stop> for StopPlan {
    fn from(s: &Stop) -> Self {
        Self {
            node: s.node,
            board: s.board.clone(),
            alight: s.alight.clone(),
        }
    }
}

/// Ordered stop sequence for one vehicle with planned times.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    pub stops: Vec<Stop>,
}

impl Schedule {
    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    /// All request ids referenced by the schedule.
    pub fn served(&self) -> BTreeSet<RequestId> {
        let mut out = BTreeSet::new();
        for s in &self.stops {
            out.extend(s.board.iter().copied());
            out.extend(s.alight.iter().copied());
        }
        out
    }

    pub fn plans(&self) -> Vec<StopPlan> {
        self.stops.iter().map(StopPlan::from).collect()
    }

    /// System time tau: from `now` until the departure at the final stop.
    pub fn system_time(&self, now: TimeMs) -> TimeMs {
        match self.stops.last() {
            Some(s) => s.planned_departure - now,
            None => 0,
        }
    }
}

/// Operator objective rho = tau - pi * |served| (milliseconds); lower is
/// better, each served request is worth the large reward pi.
pub fn objective(sch: &Schedule, pi: TimeMs, now: TimeMs) -> i64 {
    sch.system_time(now) - pi * sch.served().len() as i64
}

/// Where a vehicle currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    At(NodeId),
    OnEdge {
        from: NodeId,
        to: NodeId,
        elapsed: TimeMs,
        edge_time: TimeMs,
        edge_dist: DistMm,
    },
}

impl Position {
    /// Node the vehicle is at or will reach next.
    pub fn anchor(&self) -> NodeId {
        match *self {
            Position::At(n) => n,
            Position::OnEdge { to, .. } => to,
        }
    }

    /// Travel time/distance to `target`, continuing to the edge head first
    /// when mid-edge.
    pub fn travel_to(&self, target: NodeId, router: &impl Router) -> Option<(TimeMs, DistMm)> {
        match *self {
            Position::At(n) => router.travel(n, target),
            Position::OnEdge {
                to,
                elapsed,
                edge_time,
                edge_dist,
                ..
            } => {
                let (t, d) = router.travel(to, target)?;
                Some((t + (edge_time - elapsed), d + edge_dist))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleStatus {
    Idle,
    EnRoute,
    Rebalancing,
}

/// Mutable state of one fleet vehicle.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    pub pos: Position,
    pub onboard: BTreeSet<RequestId>,
    pub schedule: Option<Schedule>,
    pub status: VehicleStatus,
    pub rebalance_target: Option<NodeId>,
    /// End of the current stop dwell; the vehicle cannot depart earlier.
    pub busy_until: TimeMs,
    /// Remaining node path towards the current waypoint (front = next node).
    plan: VecDeque<NodeId>,
}

impl VehicleState {
    pub fn idle_at(id: VehicleId, node: NodeId) -> Self {
        Self {
            id,
            pos: Position::At(node),
            onboard: BTreeSet::new(),
            schedule: None,
            status: VehicleStatus::Idle,
            rebalance_target: None,
            busy_until: 0,
            plan: VecDeque::new(),
        }
    }

    pub fn occupancy(&self) -> u32 {
        self.onboard.len() as u32
    }

    /// Earliest time the vehicle can start moving at or after `now`.
    pub fn ready_at(&self, now: TimeMs) -> TimeMs {
        self.busy_until.max(now)
    }

    /// Replaces the assigned schedule (new plan is rebuilt lazily).
    pub fn assign_schedule(&mut self, sch: Schedule) {
        self.schedule = if sch.is_empty() { None } else { Some(sch) };
        self.rebalance_target = None;
        self.plan.clear();
        self.status = if self.schedule.is_some() {
            VehicleStatus::EnRoute
        } else if self.onboard.is_empty() {
            VehicleStatus::Idle
        } else {
            VehicleStatus::EnRoute
        };
    }

    /// Sends the (idle) vehicle towards a repositioning target.
    pub fn command_rebalance(&mut self, target: NodeId) {
        self.rebalance_target = Some(target);
        self.plan.clear();
        self.status = VehicleStatus::Rebalancing;
    }

    /// Cancels an unfinished repositioning command.
    pub fn cancel_rebalance(&mut self) {
        if self.status == VehicleStatus::Rebalancing {
            self.rebalance_target = None;
            self.plan.clear();
            self.status = VehicleStatus::Idle;
        }
    }
}

/// Outcome of planning stop times against the constraints.
#[derive(Debug, Clone)]
pub enum Planned {
    Feasible(Schedule),
    Violation(Violation),
}

impl Planned {
    pub fn feasible(self) -> Option<Schedule> {
        match self {
            Planned::Feasible(s) => Some(s),
            Planned::Violation(_) => None,
        }
    }
}

/// Computes stop times for `plans` starting from `pos` at `ready` and checks
/// all feasibility conditions. `onboard` customers are treated as already
/// picked up; every boarded customer must alight within the schedule.
#[allow(clippy::too_many_arguments)]
pub fn plan_times(
    plans: &[StopPlan],
    pos: Position,
    ready: TimeMs,
    onboard: &BTreeSet<RequestId>,
    requests: &BTreeMap<RequestId, Request>,
    cons: &ServiceConstraints,
    router: &impl Router,
) -> Result<Planned, SchedulingError> {
    let mut stops = Vec::with_capacity(plans.len());
    let mut aboard: BTreeSet<RequestId> = onboard.clone();
    let mut completed: BTreeSet<RequestId> = BTreeSet::new();
    let mut t = ready;
    let mut prev: Option<NodeId> = None;

    for (k, plan) in plans.iter().enumerate() {
        let hop = match prev {
            None => pos.travel_to(plan.node, router),
            Some(p) => router.travel(p, plan.node),
        };
        let (dt, _) = hop.ok_or(SchedulingError::Unroutable {
            from: prev.unwrap_or(pos.anchor()),
            to: plan.node,
        })?;
        let arrival = t + dt;

        for &r in &plan.alight {
            let req = requests.get(&r).ok_or(SchedulingError::UnknownRequest(r))?;
            if !aboard.remove(&r) {
                return Ok(Planned::Violation(Violation::Precedence(r)));
            }
            completed.insert(r);
            if arrival > cons.latest_dropoff(req) {
                return Ok(Planned::Violation(Violation::Detour(r)));
            }
        }
        for &r in &plan.board {
            let req = requests.get(&r).ok_or(SchedulingError::UnknownRequest(r))?;
            if aboard.contains(&r) || completed.contains(&r) {
                return Ok(Planned::Violation(Violation::Precedence(r)));
            }
            aboard.insert(r);
            if arrival > cons.latest_pickup(req) {
                return Ok(Planned::Violation(Violation::WaitingTime(r)));
            }
        }
        if aboard.len() as u32 > cons.capacity {
            return Ok(Planned::Violation(Violation::Capacity { at_stop: k }));
        }

        let dwell = if plan.board.is_empty() && plan.alight.is_empty() {
            0
        } else {
            cons.boarding_duration
        };
        let departure = arrival + dwell;
        stops.push(Stop {
            node: plan.node,
            board: plan.board.clone(),
            alight: plan.alight.clone(),
            planned_arrival: arrival,
            planned_departure: departure,
        });
        t = departure;
        prev = Some(plan.node);
    }

    if let Some(&r) = aboard.iter().next() {
        // Someone is never dropped off.
        return Ok(Planned::Violation(Violation::Precedence(r)));
    }
    Ok(Planned::Feasible(Schedule { stops }))
}

/// Checks an existing schedule against the vehicle state and constraints at
/// `now`. Times are re-derived from scratch; the stored planned times do not
/// influence the verdict.
pub fn check_feasible(
    sch: &Schedule,
    veh: &VehicleState,
    requests: &BTreeMap<RequestId, Request>,
    cons: &ServiceConstraints,
    now: TimeMs,
    router: &impl Router,
) -> Result<Planned, SchedulingError> {
    plan_times(
        &sch.plans(),
        veh.pos,
        veh.ready_at(now),
        &veh.onboard,
        requests,
        cons,
        router,
    )
}

/// All feasible ways of inserting `req` into the vehicle's current stop
/// sequence, preserving the existing stop order. Returns planned schedules.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_insertions(
    base: &[StopPlan],
    veh: &VehicleState,
    req: &Request,
    requests: &BTreeMap<RequestId, Request>,
    cons: &ServiceConstraints,
    now: TimeMs,
    router: &impl Router,
) -> Result<Vec<Schedule>, SchedulingError> {
    let ready = veh.ready_at(now);
    // A vehicle that cannot even reach the origin directly in time can skip
    // the enumeration: any detour arrives later.
    match veh.pos.travel_to(req.origin, router) {
        Some((t, _)) if ready + t <= cons.latest_pickup(req) => {}
        _ => return Ok(Vec::new()),
    }

    let n = base.len();
    let mut out = Vec::new();
    for i in 0..=n {
        for j in i..=n {
            let mut plans = Vec::with_capacity(n + 2);
            plans.extend_from_slice(&base[..i]);
            plans.push(StopPlan::pickup(req.origin, req.id));
            plans.extend_from_slice(&base[i..j]);
            plans.push(StopPlan::dropoff(req.destination, req.id));
            plans.extend_from_slice(&base[j..]);
            if let Planned::Feasible(sch) =
                plan_times(&plans, veh.pos, ready, &veh.onboard, requests, cons, router)?
            {
                out.push(sch);
            }
        }
    }
    Ok(out)
}

/// Best feasible insertion of `req` into the vehicle's schedule by the
/// objective; `None` when no insertion position is feasible. Ties keep the
/// earliest (pickup, dropoff) position pair.
#[allow(clippy::too_many_arguments)]
pub fn insert_request(
    veh: &VehicleState,
    req: &Request,
    requests: &BTreeMap<RequestId, Request>,
    cons: &ServiceConstraints,
    pi: TimeMs,
    now: TimeMs,
    router: &impl Router,
) -> Result<Option<Schedule>, SchedulingError> {
    let base: Vec<StopPlan> = veh.schedule.as_ref().map(|s| s.plans()).unwrap_or_default();
    let candidates = enumerate_insertions(&base, veh, req, requests, cons, now, router)?;
    Ok(candidates
        .into_iter()
        .map(|s| (objective(&s, pi, now), s))
        .min_by_key(|(rho, _)| *rho)
        .map(|(_, s)| s))
}

/// Splits a (hypothetical-vehicle) schedule at every stop after which the
/// occupancy is zero, except the final stop. Concatenating the parts
/// reproduces the stop order exactly.
pub fn split_idle_subschedules(sch: &Schedule) -> Vec<Schedule> {
    let mut out = Vec::new();
    let mut occ: i64 = 0;
    let mut start = 0usize;
    for (k, stop) in sch.stops.iter().enumerate() {
        occ += stop.board.len() as i64 - stop.alight.len() as i64;
        let last = k + 1 == sch.stops.len();
        if occ == 0 && !last {
            out.push(Schedule {
                stops: sch.stops[start..=k].to_vec(),
            });
            start = k + 1;
        }
    }
    if start < sch.stops.len() {
        out.push(Schedule {
            stops: sch.stops[start..].to_vec(),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Execution in time
// ---------------------------------------------------------------------------

/// Event emitted while advancing a vehicle through time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdvanceEvent {
    /// Arrived at a node while driving; occupancy is the value during the
    /// completed edge.
    Moved {
        time: TimeMs,
        node: NodeId,
        occupancy: u32,
        edge_time: TimeMs,
        edge_dist: DistMm,
    },
    Boarded {
        time: TimeMs,
        node: NodeId,
        request: RequestId,
        occupancy: u32,
    },
    Alighted {
        time: TimeMs,
        node: NodeId,
        request: RequestId,
        occupancy: u32,
    },
    /// Last stop fully serviced; the vehicle is idle at `node`.
    ScheduleCompleted { time: TimeMs, node: NodeId },
    /// Repositioning target reached; the vehicle is idle at `node`.
    RebalanceArrived { time: TimeMs, node: NodeId },
}

/// Advances `veh` from `from_t` to `to_t`, moving it along fastest-path legs,
/// executing stops when reached and their dwell has elapsed. Two advances of
/// dt/2 produce exactly the same state and events as one advance of dt.
pub fn advance(
    veh: &mut VehicleState,
    from_t: TimeMs,
    to_t: TimeMs,
    net: &Network,
    router: &impl Router,
) -> Vec<AdvanceEvent> {
    let mut events = Vec::new();
    let mut t = from_t;

    loop {
        // Dwell blocks any movement.
        if veh.busy_until > t {
            if veh.busy_until > to_t {
                return events;
            }
            t = veh.busy_until;
        }

        // Completed the last stop while dwelling: now idle.
        if veh.schedule.is_none() && veh.status == VehicleStatus::EnRoute {
            veh.status = VehicleStatus::Idle;
            events.push(AdvanceEvent::ScheduleCompleted {
                time: t,
                node: veh.pos.anchor(),
            });
        }

        let waypoint = match (&veh.schedule, veh.rebalance_target) {
            (Some(sch), _) => sch.stops.first().map(|s| s.node),
            (None, Some(target)) => Some(target),
            (None, None) => None,
        };
        let waypoint = match waypoint {
            Some(w) => w,
            None => return events,
        };

        // At the waypoint with no pending path: execute it.
        if veh.plan.is_empty() {
            if veh.pos == Position::At(waypoint) {
                if veh.schedule.is_some() {
                    execute_stop(veh, t, &mut events);
                } else {
                    veh.rebalance_target = None;
                    veh.status = VehicleStatus::Idle;
                    events.push(AdvanceEvent::RebalanceArrived {
                        time: t,
                        node: waypoint,
                    });
                }
                continue;
            }
            // Lay out the node path towards the waypoint.
            let start = veh.pos.anchor();
            match net.fastest_path(start, waypoint) {
                Ok(p) => {
                    if let Position::OnEdge { .. } = veh.pos {
                        veh.plan.push_back(start);
                    }
                    veh.plan.extend(p.path.into_iter().skip(1));
                }
                Err(_) => return events, // unroutable target: stay put
            }
            let _ = router; // route costs come from the network here
            continue;
        }

        // Traverse towards plan.front().
        match veh.pos {
            Position::OnEdge {
                from,
                to,
                elapsed,
                edge_time,
                edge_dist,
            } => {
                debug_assert_eq!(Some(&to), veh.plan.front());
                let remaining = edge_time - elapsed;
                if t + remaining <= to_t {
                    t += remaining;
                    veh.pos = Position::At(to);
                    veh.plan.pop_front();
                    events.push(AdvanceEvent::Moved {
                        time: t,
                        node: to,
                        occupancy: veh.occupancy(),
                        edge_time,
                        edge_dist,
                    });
                    let _ = from;
                } else {
                    veh.pos = Position::OnEdge {
                        from,
                        to,
                        elapsed: elapsed + (to_t - t),
                        edge_time,
                        edge_dist,
                    };
                    return events;
                }
            }
            Position::At(node) => {
                let next = *veh.plan.front().expect("plan nonempty");
                if next == node {
                    veh.plan.pop_front();
                    continue;
                }
                let (edge_time, edge_dist) = net
                    .arc(node, next)
                    .expect("plan follows existing edges");
                if t + edge_time <= to_t {
                    t += edge_time;
                    veh.pos = Position::At(next);
                    veh.plan.pop_front();
                    events.push(AdvanceEvent::Moved {
                        time: t,
                        node: next,
                        occupancy: veh.occupancy(),
                        edge_time,
                        edge_dist,
                    });
                } else {
                    veh.pos = Position::OnEdge {
                        from: node,
                        to: next,
                        elapsed: to_t - t,
                        edge_time,
                        edge_dist,
                    };
                    return events;
                }
            }
        }
    }
}

/// Boards/alights at the schedule's first stop (the vehicle stands on it).
fn execute_stop(veh: &mut VehicleState, t: TimeMs, events: &mut Vec<AdvanceEvent>) {
    let sch = veh.schedule.as_mut().expect("stop execution needs a schedule");
    let stop = sch.stops.remove(0);
    for &r in &stop.alight {
        veh.onboard.remove(&r);
        events.push(AdvanceEvent::Alighted {
            time: t,
            node: stop.node,
            request: r,
            occupancy: veh.occupancy(),
        });
    }
    for &r in &stop.board {
        veh.onboard.insert(r);
        events.push(AdvanceEvent::Boarded {
            time: t,
            node: stop.node,
            request: r,
            occupancy: veh.occupancy(),
        });
    }
    let dwell = if stop.board.is_empty() && stop.alight.is_empty() {
        0
    } else {
        stop.planned_departure - stop.planned_arrival
    };
    veh.busy_until = t + dwell;
    if sch.stops.is_empty() {
        veh.schedule = None;
        // Status flips to Idle (with the completion event) once the dwell
        // has elapsed, at the top of the advance loop.
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Request;
    use crate::network::Network;

    fn cons() -> ServiceConstraints {
        ServiceConstraints {
            max_wait: 360_000,
            max_detour: 0.4,
            capacity: 4,
            boarding_duration: 0,
        }
    }

    fn line_net() -> Network {
        // 0 - 1 - 2 - 3 - 4, 60 s / 500 m per hop, bidirectional.
        Network::grid(1, 5, 60_000, 500_000)
    }

    fn req(book: &mut BTreeMap<RequestId, Request>, id: u64, o: u32, d: u32, t: TimeMs, net: &Network) -> Request {
        let r = Request::new(RequestId(id), NodeId(o), NodeId(d), t, net).unwrap();
        book.insert(r.id, r.clone());
        r
    }

    #[test]
    fn empty_schedule_is_feasible_with_zero_objective() {
        let net = line_net();
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let book = BTreeMap::new();
        let sch = Schedule::default();
        let planned = check_feasible(&sch, &veh, &book, &cons(), 0, &net).unwrap();
        assert!(matches!(planned, Planned::Feasible(_)));
        assert_eq!(objective(&sch, 1_000_000_000, 0), 0);
    }

    #[test]
    fn pickup_exactly_at_deadline_is_feasible() {
        let net = line_net();
        let mut book = BTreeMap::new();
        // Vehicle at node 0; request at node 1 made at t 0; hop takes 60 s.
        let r = req(&mut book, 1, 1, 2, 0, &net);
        let mut c = cons();
        c.max_wait = 60_000; // arrival == deadline exactly
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let plans = vec![
            StopPlan::pickup(r.origin, r.id),
            StopPlan::dropoff(r.destination, r.id),
        ];
        match plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &c, &net).unwrap() {
            Planned::Feasible(s) => {
                assert_eq!(s.stops[0].planned_arrival, 60_000);
            }
            Planned::Violation(v) => panic!("inclusive bound violated: {v:?}"),
        }
        // One millisecond later is rejected.
        c.max_wait = 59_999;
        match plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &c, &net).unwrap() {
            Planned::Violation(Violation::WaitingTime(id)) => assert_eq!(id, r.id),
            other => panic!("expected waiting violation, got {other:?}"),
        }
    }

    #[test]
    fn capacity_violation_is_detected() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let mut c = cons();
        c.capacity = 4;
        // Five simultaneous passengers on a capacity-4 vehicle.
        let mut plans = Vec::new();
        for id in 0..5 {
            let r = req(&mut book, id, 0, 4, 0, &net);
            plans.push(StopPlan::pickup(r.origin, r.id));
        }
        for id in 0..5 {
            plans.push(StopPlan::dropoff(NodeId(4), RequestId(id)));
        }
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        match plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &c, &net).unwrap() {
            Planned::Violation(Violation::Capacity { at_stop }) => assert_eq!(at_stop, 4),
            other => panic!("expected capacity violation, got {other:?}"),
        }
    }

    #[test]
    fn precedence_violation_is_detected() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 1, 3, 0, &net);
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let plans = vec![
            StopPlan::dropoff(r.destination, r.id),
            StopPlan::pickup(r.origin, r.id),
        ];
        match plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &cons(), &net).unwrap() {
            Planned::Violation(Violation::Precedence(id)) => assert_eq!(id, r.id),
            other => panic!("expected precedence violation, got {other:?}"),
        }
    }

    #[test]
    fn unknown_request_is_an_error_not_a_violation() {
        let net = line_net();
        let book = BTreeMap::new();
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let plans = vec![StopPlan::pickup(NodeId(1), RequestId(77))];
        assert!(matches!(
            plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &cons(), &net),
            Err(SchedulingError::UnknownRequest(RequestId(77)))
        ));
    }

    #[test]
    fn objective_formula() {
        // tau = 600 s, two served requests, pi = 10000 s -> -19400 s.
        let sch = Schedule {
            stops: vec![
                Stop {
                    node: NodeId(0),
                    board: vec![RequestId(0), RequestId(1)],
                    alight: vec![],
                    planned_arrival: 0,
                    planned_departure: 0,
                },
                Stop {
                    node: NodeId(1),
                    board: vec![],
                    alight: vec![RequestId(0), RequestId(1)],
                    planned_arrival: 600_000,
                    planned_departure: 600_000,
                },
            ],
        };
        assert_eq!(objective(&sch, 10_000_000, 0), -19_400_000);
        // For a fixed request set, lower tau orders lower rho.
        let mut later = sch.clone();
        later.stops[1].planned_departure = 700_000;
        assert!(objective(&sch, 10_000_000, 0) < objective(&later, 10_000_000, 0));
        // One more request at unchanged tau lowers rho by exactly pi.
        let mut richer = sch.clone();
        richer.stops[0].board.push(RequestId(2));
        richer.stops[1].alight.push(RequestId(2));
        assert_eq!(
            objective(&richer, 10_000_000, 0),
            objective(&sch, 10_000_000, 0) - 10_000_000
        );
    }

    #[test]
    fn insertion_into_idle_vehicle_builds_two_stop_schedule() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 2, 4, 0, &net);
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(2));
        let sch = insert_request(&veh, &r, &book, &cons(), 1_000_000_000, 0, &net)
            .unwrap()
            .expect("forced construction");
        assert_eq!(sch.stops.len(), 2);
        assert_eq!(sch.stops[0].node, r.origin);
        assert_eq!(sch.stops[0].planned_arrival, 0, "pickup at now");
        assert_eq!(sch.stops[1].node, r.destination);
    }

    #[test]
    fn insertion_fails_when_origin_is_out_of_reach() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 4, 3, 0, &net);
        let mut c = cons();
        c.max_wait = 120_000; // node 0 -> node 4 takes 240 s > 120 s
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        assert!(insert_request(&veh, &r, &book, &c, 1_000_000_000, 0, &net)
            .unwrap()
            .is_none());
    }

    #[test]
    fn insertion_matches_bruteforce_over_position_pairs() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let pi = 1_000_000_000;
        let a = req(&mut book, 1, 0, 3, 0, &net);
        let b = req(&mut book, 2, 1, 4, 0, &net);
        let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let first = insert_request(&veh, &a, &book, &cons(), pi, 0, &net)
            .unwrap()
            .unwrap();
        veh.assign_schedule(first.clone());

        // Brute force: all 6 position pairs of the second request.
        let base = first.plans();
        let mut best: Option<(i64, Schedule)> = None;
        for i in 0..=2usize {
            for j in i..=2usize {
                let mut plans = Vec::new();
                plans.extend_from_slice(&base[..i]);
                plans.push(StopPlan::pickup(b.origin, b.id));
                plans.extend_from_slice(&base[i..j]);
                plans.push(StopPlan::dropoff(b.destination, b.id));
                plans.extend_from_slice(&base[j..]);
                if let Planned::Feasible(s) =
                    plan_times(&plans, veh.pos, 0, &veh.onboard, &book, &cons(), &net).unwrap()
                {
                    let rho = objective(&s, pi, 0);
                    if best.as_ref().map_or(true, |(b_rho, _)| rho < *b_rho) {
                        best = Some((rho, s));
                    }
                }
            }
        }
        let got = insert_request(&veh, &b, &book, &cons(), pi, 0, &net)
            .unwrap()
            .unwrap();
        let (best_rho, _) = best.unwrap();
        assert_eq!(objective(&got, pi, 0), best_rho);
    }

    #[test]
    fn split_single_request_schedule_is_one_piece() {
        let sch = two_stop(RequestId(1), NodeId(0), NodeId(2), 0, 120_000);
        let parts = split_idle_subschedules(&sch);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], sch);
    }

    #[test]
    fn split_disjoint_legs_into_two() {
        let mut sch = two_stop(RequestId(1), NodeId(0), NodeId(1), 0, 60_000);
        let second = two_stop(RequestId(2), NodeId(3), NodeId(4), 300_000, 360_000);
        sch.stops.extend(second.stops.clone());
        let parts = split_idle_subschedules(&sch);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1], second);
        // Concatenation covers all stops exactly once, order preserved.
        let rebuilt: Vec<_> = parts.iter().flat_map(|p| p.stops.clone()).collect();
        assert_eq!(rebuilt, sch.stops);
    }

    #[test]
    fn split_keeps_interleaved_pooled_schedule_whole() {
        // occupancy trace 1, 2, 1, 0: zero only at the end.
        let sch = Schedule {
            stops: vec![
                stop_board(NodeId(0), RequestId(1), 0),
                stop_board(NodeId(1), RequestId(2), 60_000),
                stop_alight(NodeId(2), RequestId(1), 120_000),
                stop_alight(NodeId(3), RequestId(2), 180_000),
            ],
        };
        assert_eq!(split_idle_subschedules(&sch).len(), 1);
    }

    fn stop_board(node: NodeId, r: RequestId, t: TimeMs) -> Stop {
        Stop {
            node,
            board: vec![r],
            alight: vec![],
            planned_arrival: t,
            planned_departure: t,
        }
    }

    fn stop_alight(node: NodeId, r: RequestId, t: TimeMs) -> Stop {
        Stop {
            node,
            board: vec![],
            alight: vec![r],
            planned_arrival: t,
            planned_departure: t,
        }
    }

    fn two_stop(r: RequestId, o: NodeId, d: NodeId, t0: TimeMs, t1: TimeMs) -> Schedule {
        Schedule {
            stops: vec![stop_board(o, r, t0), stop_alight(d, r, t1)],
        }
    }

    #[test]
    fn advance_idle_vehicle_is_a_no_op() {
        let net = line_net();
        let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(2));
        let before = veh.clone();
        let events = advance(&mut veh, 0, 60_000, &net, &net);
        assert!(events.is_empty());
        assert_eq!(veh.pos, before.pos);
        assert_eq!(veh.status, VehicleStatus::Idle);
    }

    #[test]
    fn advance_completes_schedule_and_goes_idle() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 1, 3, 0, &net);
        let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let sch = insert_request(&veh, &r, &book, &cons(), 1_000_000_000, 0, &net)
            .unwrap()
            .unwrap();
        veh.assign_schedule(sch);
        let events = advance(&mut veh, 0, 600_000, &net, &net);
        assert_eq!(veh.status, VehicleStatus::Idle);
        assert_eq!(veh.pos, Position::At(NodeId(3)));
        assert_eq!(veh.occupancy(), 0);
        assert!(events
            .iter()
            .any(|e| matches!(e, AdvanceEvent::ScheduleCompleted { node, .. } if *node == NodeId(3))));
        // Passenger conservation: boarded minus alighted equals occupancy.
        let boards = events.iter().filter(|e| matches!(e, AdvanceEvent::Boarded { .. })).count();
        let alights = events.iter().filter(|e| matches!(e, AdvanceEvent::Alighted { .. })).count();
        assert_eq!(boards, alights);
    }

    #[test]
    fn advance_halfsteps_equal_full_step() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 1, 4, 0, &net);
        let build = || {
            let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
            let sch = insert_request(&veh, &r, &book, &cons(), 1_000_000_000, 0, &net)
                .unwrap()
                .unwrap();
            veh.assign_schedule(sch);
            veh
        };
        for dt in [50_000i64, 90_000, 130_000, 250_000] {
            let mut a = build();
            let mut ev_a = advance(&mut a, 0, dt, &net, &net);

            let mut b = build();
            let mut ev_b = advance(&mut b, 0, dt / 2, &net, &net);
            ev_b.extend(advance(&mut b, dt / 2, dt, &net, &net));

            assert_eq!(a.pos, b.pos, "dt {dt}");
            assert_eq!(a.onboard, b.onboard);
            assert_eq!(a.status, b.status);
            ev_a.sort_by_key(sort_key);
            ev_b.sort_by_key(sort_key);
            assert_eq!(ev_a, ev_b, "dt {dt}");
        }
    }

    fn sort_key(e: &AdvanceEvent) -> (TimeMs, u8) {
        match e {
            AdvanceEvent::Moved { time, .. } => (*time, 0),
            AdvanceEvent::Alighted { time, .. } => (*time, 1),
            AdvanceEvent::Boarded { time, .. } => (*time, 2),
            AdvanceEvent::ScheduleCompleted { time, .. } => (*time, 3),
            AdvanceEvent::RebalanceArrived { time, .. } => (*time, 4),
        }
    }

    #[test]
    fn rebalance_movement_arrives_and_idles() {
        let net = line_net();
        let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        veh.command_rebalance(NodeId(2));
        assert_eq!(veh.status, VehicleStatus::Rebalancing);
        let events = advance(&mut veh, 0, 120_000, &net, &net);
        assert_eq!(veh.status, VehicleStatus::Idle);
        assert_eq!(veh.pos, Position::At(NodeId(2)));
        assert!(events
            .iter()
            .any(|e| matches!(e, AdvanceEvent::RebalanceArrived { node, .. } if *node == NodeId(2))));
    }

    #[test]
    fn interrupting_rebalance_mid_edge_continues_via_edge_head() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let mut veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        veh.command_rebalance(NodeId(4));
        advance(&mut veh, 0, 90_000, &net, &net);
        match veh.pos {
            Position::OnEdge { from, to, elapsed, .. } => {
                assert_eq!((from, to), (NodeId(1), NodeId(2)));
                assert_eq!(elapsed, 30_000);
            }
            other => panic!("expected mid-edge position, got {other:?}"),
        }
        // New request back at node 0: plan continues to node 2 first.
        let r = req(&mut book, 1, 0, 1, 90_000, &net);
        veh.cancel_rebalance();
        let sch = insert_request(&veh, &r, &book, &cons(), 1_000_000_000, 90_000, &net)
            .unwrap()
            .unwrap();
        // 30 s left on the edge, then 2 hops back: pickup at 90 + 150 s.
        assert_eq!(sch.stops[0].planned_arrival, 240_000);
        veh.assign_schedule(sch);
        let events = advance(&mut veh, 90_000, 600_000, &net, &net);
        let first_move = events
            .iter()
            .find_map(|e| match e {
                AdvanceEvent::Moved { node, time, .. } => Some((*node, *time)),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_move, (NodeId(2), 120_000), "edge head first");
        assert_eq!(veh.pos, Position::At(NodeId(1)));
        assert_eq!(veh.status, VehicleStatus::Idle);
    }

    #[test]
    fn boarding_duration_delays_departure() {
        let net = line_net();
        let mut book = BTreeMap::new();
        let r = req(&mut book, 1, 0, 2, 0, &net);
        let mut c = cons();
        c.boarding_duration = 10_000;
        let veh = VehicleState::idle_at(VehicleId(0), NodeId(0));
        let sch = insert_request(&veh, &r, &book, &c, 1_000_000_000, 0, &net)
            .unwrap()
            .unwrap();
        assert_eq!(sch.stops[0].planned_arrival, 0);
        assert_eq!(sch.stops[0].planned_departure, 10_000);
        assert_eq!(sch.stops[1].planned_arrival, 130_000);
    }
}
