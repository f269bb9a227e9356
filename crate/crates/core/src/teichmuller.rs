//! Faces of the critical graph as geodesic polygons, audited with
//! Teichmüller's lemma:
//! `#V - 2 = sum_v (ord(v) + 2) theta(v) / 2pi + sum_interior ord`.
//!
//! The escape circle closes the graph: consecutive asymptotic angles are
//! joined by arcs, and every maximal run of arcs on a face boundary is one
//! vertex at infinity spanning `arcs * pi/2p`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::branch::point_in_ring;
use crate::graph::{CriticalGraph, NodeKind};
use crate::poly::C64;
use crate::trace::angle_gap;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolygonVertex {
    pub node: usize,
    pub order: i64,
    pub angle: f64,
    /// Number of escape-circle arcs for a vertex at infinity.
    pub arcs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicPolygon {
    pub vertices: Vec<PolygonVertex>,
    /// Off-graph zeros inside the face with their orders.
    pub interior: Vec<(usize, i64)>,
    /// Graph edges on the boundary.
    pub edges: Vec<usize>,
    #[serde(skip)]
    pub ring: Vec<C64>,
}

impl GeodesicPolygon {
    pub fn is_finite(&self) -> bool {
        self.vertices.iter().all(|v| v.arcs.is_none())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolygonAudit {
    pub lhs: f64,
    pub rhs: f64,
    /// A bounded face with one or two vertices.
    pub singular_finite: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TeichmullerReport {
    pub polygons: Vec<(GeodesicPolygon, PolygonAudit)>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
struct HalfEdge {
    tail: usize,
    head: usize,
    out: f64,
    edge: Option<usize>,
    forward: bool,
    /// Escape-circle arc starting at angle index `k`, traversed ccw or cw.
    arc: Option<(usize, bool)>,
}

fn snapped(dirs: &[f64], chord: f64) -> f64 {
    dirs.iter()
        .copied()
        .min_by(|a, b| angle_gap(*a, chord).total_cmp(&angle_gap(*b, chord)))
        .filter(|d| angle_gap(*d, chord) < 20f64.to_radians())
        .unwrap_or(chord)
}

fn half_edges(g: &CriticalGraph) -> Vec<HalfEdge> {
    let na = 4 * g.p;
    let angle_of = |n: usize| match g.nodes[n].kind {
        NodeKind::Infinity { angle, .. } => Some(angle),
        _ => None,
    };
    let out_at = |n: usize, chord: f64| match angle_of(n) {
        Some(a) => a + PI,
        None => snapped(&g.nodes[n].directions, chord),
    };
    let mut hs = Vec::new();
    for e in &g.edges {
        let t = &e.trajectory;
        let dep = t.departure.unwrap_or_else(|| {
            let p = &t.points;
            (p[1.min(p.len() - 1)] - p[0]).arg()
        });
        hs.push(HalfEdge { tail: e.from, head: e.to, out: out_at(e.from, dep), edge: Some(e.id), forward: true, arc: None });
        hs.push(HalfEdge { tail: e.to, head: e.from, out: out_at(e.to, t.arrival), edge: Some(e.id), forward: false, arc: None });
    }
    for k in 0..na {
        let (u, v) = (g.infinity_node(k), g.infinity_node((k + 1) % na));
        let (au, av) = (angle_of(u).unwrap(), angle_of(v).unwrap());
        hs.push(HalfEdge { tail: u, head: v, out: au + PI / 2.0, edge: None, forward: true, arc: Some((k, true)) });
        hs.push(HalfEdge { tail: v, head: u, out: av - PI / 2.0, edge: None, forward: false, arc: Some((k, false)) });
    }
    for h in &mut hs {
        h.out = h.out.rem_euclid(2.0 * PI);
    }
    hs
}

/// Faces of the closed graph, excluding the exterior of the escape circle.
pub fn extract_polygons(g: &CriticalGraph) -> Vec<GeodesicPolygon> {
    let hs = half_edges(g);
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for (i, h) in hs.iter().enumerate() {
        outgoing[h.tail].push(i);
    }
    let next = |i: usize| -> (usize, f64) {
        let twin = i ^ 1;
        let phi = hs[twin].out;
        outgoing[hs[i].head]
            .iter()
            .map(|&j| {
                let mut d = (phi - hs[j].out).rem_euclid(2.0 * PI);
                if j == twin || d == 0.0 {
                    d = 2.0 * PI;
                }
                (j, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("head has an outgoing half-edge")
    };
    let pdeg = g.p as f64;
    let r_arc = 1.5 * g.r_escape;
    let mut seen = vec![false; hs.len()];
    let mut out = Vec::new();
    for start in 0..hs.len() {
        if seen[start] {
            continue;
        }
        let mut cycle: Vec<(usize, f64)> = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            let (j, ang) = next(i);
            cycle.push((i, ang));
            i = j;
        }
        if cycle.iter().all(|(i, _)| matches!(hs[*i].arc, Some((_, false)))) {
            continue;
        }
        if cycle.iter().all(|(i, _)| hs[*i].arc.is_some()) {
            continue;
        }
        let n = cycle.len();
        let is_arc: Vec<bool> = cycle.iter().map(|(i, _)| hs[*i].arc.is_some()).collect();
        let mut vertices = Vec::new();
        for c in 0..n {
            let (h, ang) = cycle[c];
            let v = hs[h].head;
            let nx = (c + 1) % n;
            if g.nodes[v].is_infinity() {
                // Runs of arcs are counted where they start.
                if is_arc[nx] && !is_arc[c] {
                    let mut len = 0;
                    while is_arc[(nx + len) % n] && len < n {
                        len += 1;
                    }
                    vertices.push(PolygonVertex {
                        node: v,
                        order: g.nodes[v].order,
                        angle: len as f64 * PI / (2.0 * pdeg),
                        arcs: Some(len),
                    });
                } else if !is_arc[nx] && !is_arc[c] {
                    vertices.push(PolygonVertex { node: v, order: g.nodes[v].order, angle: 0.0, arcs: Some(0) });
                }
            } else {
                vertices.push(PolygonVertex { node: v, order: g.nodes[v].order, angle: ang, arcs: None });
            }
        }
        let mut ring = Vec::new();
        let mut edges = Vec::new();
        for (h, _) in &cycle {
            let he = &hs[*h];
            match (he.edge, he.arc) {
                (Some(e), _) => {
                    edges.push(e);
                    let pts = &g.edges[e].trajectory.points;
                    if he.forward {
                        ring.extend(pts[..pts.len() - 1].iter().copied());
                    } else {
                        ring.extend(pts[1..].iter().rev().copied());
                    }
                }
                (None, Some((k, ccw))) => {
                    let a0 = PI / (4.0 * pdeg) + k as f64 * PI / (2.0 * pdeg);
                    let step = PI / (2.0 * pdeg) / 8.0;
                    for s in 0..8 {
                        let a = if ccw { a0 + s as f64 * step } else { a0 + (8 - s) as f64 * step };
                        ring.push(C64::from_polar(r_arc, a));
                    }
                }
                _ => unreachable!(),
            }
        }
        let interior = g
            .nodes
            .iter()
            .filter(|nd| matches!(nd.kind, NodeKind::Zero { on_graph: false, .. }))
            .filter(|nd| point_in_ring(&ring, nd.position))
            .map(|nd| (nd.id, nd.order))
            .collect();
        out.push(GeodesicPolygon { vertices, interior, edges, ring });
    }
    out
}

pub fn audit_polygon(poly: &GeodesicPolygon) -> PolygonAudit {
    let lhs = poly.vertices.len() as f64 - 2.0;
    let rhs = poly.vertices.iter().map(|v| (v.order + 2) as f64 * v.angle / (2.0 * PI)).sum::<f64>()
        + poly.interior.iter().map(|(_, o)| *o as f64).sum::<f64>();
    let singular_finite = poly.is_finite() && poly.vertices.len() <= 2;
    PolygonAudit { lhs, rhs, singular_finite, ok: !singular_finite && (lhs - rhs).abs() <= 0.05 }
}

pub fn teichmuller_audit(g: &CriticalGraph) -> TeichmullerReport {
    let polygons: Vec<_> = extract_polygons(g)
        .into_iter()
        .map(|p| {
            let a = audit_polygon(&p);
            (p, a)
        })
        .collect();
    let passed = !polygons.is_empty() && polygons.iter().all(|(_, a)| a.ok);
    TeichmullerReport { polygons, passed }
}
