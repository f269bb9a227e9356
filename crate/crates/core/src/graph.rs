//! The critical graph: every trajectory of `Q dz^2` on `Re eta = 0` through
//! a critical point, plus the humps joining asymptotic directions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{EqmError, Result};
use crate::eta::EtaEvaluator;
use crate::poly::C64;
use crate::trace::{angle_gap, CritKind, TraceSettings, TrajEnd, Tracer, Trajectory};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Branch { label: String, cut: usize },
    Zero { multiplicity: usize, on_graph: bool, re_eta: f64 },
    Infinity { angle_index: usize, angle: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    /// Infinity nodes sit on the escape circle.
    pub position: C64,
    /// Order as a zero of `Q`; `-(4p + 2)` at infinity.
    pub order: i64,
    /// Local trajectory directions (empty for infinity and off-graph zeros).
    pub directions: Vec<f64>,
}

impl Node {
    pub fn is_infinity(&self) -> bool {
        matches!(self.kind, NodeKind::Infinity { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Cut,
    Ray,
    Hump,
    GapConnection,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Cut index for `Cut` edges.
    pub cut: Option<usize>,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphCensus {
    pub cuts_found: usize,
    pub rays: usize,
    pub humps: usize,
    pub gap_connections: usize,
    pub other: usize,
    /// Edge ends landing on each asymptotic angle.
    pub infinity_hits: Vec<usize>,
    pub expected_humps: usize,
    pub expected_gap_connections: usize,
    /// Largest deviation (degrees) of measured local separations from the
    /// model value at finite nodes with a full set of traced edges.
    pub local_angle_error_deg: f64,
    /// Largest deviation (degrees) of escape tangents from their asymptote.
    pub asymptotic_error_deg: f64,
    pub max_level_error: f64,
    pub problems: Vec<String>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalGraph {
    pub schema_version: u32,
    pub p: usize,
    pub q: usize,
    pub r_escape: f64,
    pub scale: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub census: GraphCensus,
}

impl CriticalGraph {
    /// Node id of branch point `k` in `points()` order.
    pub fn branch_node(&self, k: usize) -> usize {
        k
    }

    pub fn infinity_node(&self, k: usize) -> usize {
        self.nodes.len() - 4 * self.p + k
    }

    pub fn zero_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Zero { .. }))
    }

    /// Traced cut `j` oriented from `a_j` to `b_j`, if found.
    pub fn cut_polyline(&self, j: usize) -> Option<Vec<C64>> {
        let e = self.edges.iter().find(|e| e.kind == EdgeKind::Cut && e.cut == Some(j))?;
        let mut pts = e.trajectory.points.clone();
        if e.from == 2 * j + 1 {
            pts.reverse();
        }
        Some(pts)
    }

    pub fn cut_polylines(&self) -> Vec<Option<Vec<C64>>> {
        (0..self.q).map(|j| self.cut_polyline(j)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

fn nearest_direction(dirs: &[f64], theta: f64) -> Option<(usize, f64)> {
    dirs.iter()
        .enumerate()
        .map(|(k, d)| (k, angle_gap(*d, theta)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Traces one local trajectory: `start` indexes branch points (`points()`
/// order) followed by clustered zeros of `h`.
pub fn trace_trajectory(ev: &EtaEvaluator, start: usize, direction: usize) -> Result<Trajectory> {
    let tr = Tracer::new(ev, TraceSettings::default())?;
    let dirs = tr.launch_angles(start.min(tr.crit().len() - 1));
    if start >= tr.crit().len() || direction >= dirs.len() {
        return Err(EqmError::OutOfRange { index: direction, limit: dirs.len() });
    }
    tr.trace_from(start, dirs[direction])
}

pub fn build_critical_graph(ev: &EtaEvaluator) -> Result<CriticalGraph> {
    build_critical_graph_with(ev, &TraceSettings::default())
}

/// Launches every local trajectory from branch points and on-graph zeros,
/// closes the remaining asymptotic angles with humps and checks the census.
/// A failed census returns [`EqmError::CensusViolation`] carrying the graph.
pub fn build_critical_graph_with(ev: &EtaEvaluator, settings: &TraceSettings) -> Result<CriticalGraph> {
    let tr = Tracer::new(ev, settings.clone())?;
    let crit = tr.crit();
    let p = ev.potential().p();
    let q = ev.endpoints().q();
    let na = tr.n_angles();
    let nc = crit.len();
    let deg = 180.0 / PI;

    let mut nodes = Vec::with_capacity(nc + na);
    for (i, c) in crit.iter().enumerate() {
        let kind = match c.kind {
            CritKind::Branch => NodeKind::Branch {
                label: format!("{}{}", if i % 2 == 0 { 'a' } else { 'b' }, i / 2 + 1),
                cut: i / 2,
            },
            CritKind::Zero => NodeKind::Zero { multiplicity: c.multiplicity, on_graph: c.on_level, re_eta: c.re_eta },
        };
        let directions = if c.on_level { tr.launch_angles(i) } else { Vec::new() };
        nodes.push(Node { id: i, kind, position: c.z, order: c.order as i64, directions });
    }
    for k in 0..na {
        let angle = tr.asymptotic_angle(k);
        nodes.push(Node {
            id: nc + k,
            kind: NodeKind::Infinity { angle_index: k, angle },
            position: C64::from_polar(tr.r_escape(), angle),
            order: -(4 * p as i64 + 2),
            directions: Vec::new(),
        });
    }
    let node_of = |e: TrajEnd| match e {
        TrajEnd::Crit(i) => i,
        TrajEnd::Infinity(k) => nc + k,
    };

    let mut problems = Vec::new();
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut used: Vec<Vec<bool>> = nodes.iter().map(|n| vec![false; n.directions.len()]).collect();
    for i in 0..nc {
        for k in 0..nodes[i].directions.len() {
            if used[i][k] {
                continue;
            }
            used[i][k] = true;
            let t = match tr.trace_from(i, nodes[i].directions[k]) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("trace from node {i} direction {k}: {e}"));
                    continue;
                }
            };
            if let TrajEnd::Crit(j) = t.end {
                match nearest_direction(&nodes[j].directions, t.arrival) {
                    Some((kk, gap)) if gap < 20.0 / deg => {
                        if used[j][kk] {
                            // Already traced from the other end.
                            continue;
                        }
                        used[j][kk] = true;
                    }
                    _ => problems.push(format!("arrival at node {j} off every local direction")),
                }
            }
            trajs.push(t);
        }
    }

    let mut hits = vec![0usize; na];
    for t in &trajs {
        for e in [t.start, t.end] {
            if let TrajEnd::Infinity(k) = e {
                hits[k] += 1;
            }
        }
    }
    for k in 0..na {
        if hits[k] != 0 {
            continue;
        }
        match tr.trace_from_infinity(k) {
            Ok(Some(t)) => match t.end {
                TrajEnd::Infinity(k2) if k2 != k && hits[k2] == 0 => {
                    hits[k] += 1;
                    hits[k2] += 1;
                    trajs.push(t);
                }
                end => problems.push(format!("level curve from angle {k} ended at {end:?}")),
            },
            Ok(None) => problems.push(format!("no level crossing near angle {k}")),
            Err(e) => problems.push(format!("trace from angle {k}: {e}")),
        }
    }

    let mut edges = Vec::with_capacity(trajs.len());
    for (id, t) in trajs.into_iter().enumerate() {
        let (from, to) = (node_of(t.start), node_of(t.end));
        let branch = |n: usize| n < 2 * q;
        let inf = |n: usize| n >= nc;
        let (kind, cut) = if branch(from) && branch(to) && from / 2 == to / 2 && from != to {
            (EdgeKind::Cut, Some(from / 2))
        } else if branch(from) && branch(to) && from / 2 != to / 2 {
            (EdgeKind::GapConnection, None)
        } else if inf(from) && inf(to) {
            (EdgeKind::Hump, None)
        } else if inf(from) != inf(to) {
            (EdgeKind::Ray, None)
        } else {
            (EdgeKind::Other, None)
        };
        edges.push(Edge { id, from, to, kind, cut, trajectory: t });
    }

    let count = |k: EdgeKind| edges.iter().filter(|e| e.kind == k).count();
    let mut cut_ids: Vec<usize> = edges.iter().filter_map(|e| e.cut).collect();
    cut_ids.sort_unstable();
    cut_ids.dedup();
    let (expected_humps, expected_gap_connections) = if p >= q { (2 * (p - q), 0) } else { (0, 2 * (q - p)) };

    // Local separations from measured chords.
    let mut local_err: f64 = 0.0;
    for n in nodes.iter().filter(|n| !n.directions.is_empty()) {
        let mut measured: Vec<f64> = edges
            .iter()
            .flat_map(|e| {
                let mut v = Vec::new();
                if e.from == n.id {
                    if let Some(d) = e.trajectory.departure {
                        v.push(d);
                    }
                }
                if e.to == n.id {
                    v.push(e.trajectory.arrival);
                }
                v
            })
            .map(|a| a.rem_euclid(2.0 * PI))
            .collect();
        if measured.len() != n.directions.len() {
            continue;
        }
        measured.sort_by(f64::total_cmp);
        let model = 2.0 * PI / n.directions.len() as f64;
        for w in 0..measured.len() {
            let next = if w + 1 < measured.len() { measured[w + 1] } else { measured[0] + 2.0 * PI };
            local_err = local_err.max(((next - measured[w]) - model).abs() * deg);
        }
    }
    let asym_err = edges
        .iter()
        .filter_map(|e| match e.trajectory.end {
            TrajEnd::Infinity(k) => Some(angle_gap(e.trajectory.arrival, tr.asymptotic_angle(k)) * deg),
            TrajEnd::Crit(_) => None,
        })
        .fold(0.0, f64::max);
    let max_level_error = edges.iter().map(|e| e.trajectory.max_level_error).fold(0.0, f64::max);

    let census_humps = count(EdgeKind::Hump);
    let census_gaps = count(EdgeKind::GapConnection);
    if let Some(k) = hits.iter().position(|h| *h != 1) {
        problems.push(format!("asymptotic angle {k} hit {} times", hits[k]));
    }
    if census_humps != expected_humps {
        problems.push(format!("{census_humps} humps, expected {expected_humps}"));
    }
    if census_gaps != expected_gap_connections {
        problems.push(format!("{census_gaps} gap connections, expected {expected_gap_connections}"));
    }
    let census = GraphCensus {
        cuts_found: cut_ids.len(),
        rays: count(EdgeKind::Ray),
        humps: census_humps,
        gap_connections: census_gaps,
        other: count(EdgeKind::Other),
        infinity_hits: hits,
        expected_humps,
        expected_gap_connections,
        local_angle_error_deg: local_err,
        asymptotic_error_deg: asym_err,
        max_level_error,
        ok: problems.is_empty(),
        problems,
    };
    let graph = CriticalGraph {
        schema_version: GRAPH_SCHEMA_VERSION,
        p,
        q,
        r_escape: tr.r_escape(),
        scale: tr.scale(),
        nodes,
        edges,
        census,
    };
    if graph.census.ok {
        Ok(graph)
    } else {
        Err(EqmError::CensusViolation { reason: graph.census.problems.join("; "), graph: Box::new(graph) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{EndpointSet, Potential};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn semicircle_graph() {
        let ep = EndpointSet::new(vec![c(-2.0, 0.0)], vec![c(2.0, 0.0)]).unwrap();
        let ev = EtaEvaluator::new(&Potential::gaussian(), &ep).unwrap();
        let g = build_critical_graph(&ev).unwrap();
        assert_eq!(g.census.cuts_found, 1);
        assert_eq!(g.census.rays, 4);
        assert_eq!(g.census.humps, 0);
        assert_eq!(g.census.infinity_hits, vec![1, 1, 1, 1]);
        assert!(g.census.local_angle_error_deg < 1.0, "{}", g.census.local_angle_error_deg);
        assert!(g.census.asymptotic_error_deg < 1.0);
        let cut = g.cut_polyline(0).unwrap();
        assert_eq!(cut[0], c(-2.0, 0.0));
        assert!(cut.iter().all(|z| z.im.abs() < 1e-8));
        let json: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["nodes"].as_array().unwrap().len(), 2 + 4);
    }
}
