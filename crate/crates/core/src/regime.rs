//! Regular q-cut checks and classification over q.
//!
//! A solution is regular when the endpoints are distinct, every cut is a
//! critical trajectory joining its two endpoints, no zero of `h` touches the
//! support, and the complementary contour pieces (`-inf` to the first cut,
//! each gap, the last cut to `+inf`) fit inside `{Re eta < 0}`.

use serde::Serialize;

use crate::branch::{polyline_distance, EndpointSet};
use crate::endpoint::{solve_endpoints, SolveReport, SolverOptions};
use crate::error::EqmError;
use crate::eta::EtaEvaluator;
use crate::graph::{build_critical_graph_with, CriticalGraph, GraphCensus};
use crate::mask::{stable_land_mask, StableLandMask, StraitDiagnostic, Window};
use crate::poly::{Potential, C64};
use crate::seeds::{same_configuration, seed_list, Seed, SeedCache, SeedSource};
use crate::trace::TraceSettings;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeOptions {
    pub solver: SolverOptions,
    pub trace: TraceSettings,
    /// Coarsest mask grid; the check refines it once (twice if needed).
    pub mask_resolution: usize,
    /// Condition 2 threshold relative to the endpoint scale.
    pub zero_dist_rel: f64,
    /// Multistart configurations tried per q in addition to the other seeds.
    pub restarts: usize,
    /// Try multistart even after another seed converged.
    pub multistart_always: bool,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            trace: TraceSettings::default(),
            mask_resolution: 100,
            zero_dist_rel: 1e-6,
            restarts: 8,
            multistart_always: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Singular,
    Unsolvable,
}

/// Which degeneration the failure pattern points to: a zero of `h` at an
/// endpoint (a), on the support interior (b), or a closed strait (c).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryHint {
    A,
    B,
    C,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub passed: bool,
    pub evaluated: bool,
    pub detail: String,
}

impl Condition {
    fn pass(detail: impl Into<String>) -> Self {
        Self { passed: true, evaluated: true, detail: detail.into() }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self { passed: false, evaluated: true, detail: detail.into() }
    }

    fn skipped(detail: impl Into<String>) -> Self {
        Self { passed: false, evaluated: false, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroDistance {
    pub zero: C64,
    pub to_support: f64,
    pub to_endpoint: f64,
}

/// Cut order and orientations under which conditions 3 to 5 were checked:
/// position `i` of the contour holds solver cut `order[i]`, reversed when
/// `flipped[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub order: Vec<usize>,
    pub flipped: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub schema_version: u32,
    pub q: usize,
    pub verdict: Verdict,
    pub boundary_hint: BoundaryHint,
    /// Items 1 to 5 of the regularity definition.
    pub conditions: Vec<Condition>,
    pub distinct: bool,
    pub seed_source: Option<SeedSource>,
    /// Endpoints relabeled along the contour when an assignment was found.
    pub endpoints: Option<EndpointSet>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub jacobian_condition: Option<f64>,
    pub zero_distances: Vec<ZeroDistance>,
    pub min_endpoint_zero_distance: Option<f64>,
    pub straits: Vec<StraitDiagnostic>,
    pub assignment: Option<Assignment>,
    pub census: Option<GraphCensus>,
    pub error: Option<String>,
}

impl RegimeReport {
    fn unsolvable(q: usize, error: String) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            q,
            verdict: Verdict::Unsolvable,
            boundary_hint: BoundaryHint::None,
            conditions: (0..5).map(|_| Condition::skipped("no converged solution")).collect(),
            distinct: false,
            seed_source: None,
            endpoints: None,
            residual: None,
            iterations: None,
            jacobian_condition: None,
            zero_distances: Vec::new(),
            min_endpoint_zero_distance: None,
            straits: Vec::new(),
            assignment: None,
            census: None,
            error: Some(error),
        }
    }

    pub fn is_regular(&self) -> bool {
        self.verdict == Verdict::Regular
    }

    pub fn passed_count(&self) -> usize {
        self.conditions.iter().filter(|c| c.passed).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything computed for one converged solution, kept for callers that
/// need the graph or the mask.
#[derive(Clone, Debug)]
pub struct RegimeAnalysis {
    pub report: RegimeReport,
    pub graph: Option<CriticalGraph>,
    pub mask: Option<StableLandMask>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Cuts whose density is negative. `Re eta` grows away from a cut of
/// positive density on both sides, so it is sampled just off three interior
/// points of each traced cut.
fn negative_cuts(ev: &EtaEvaluator, lines: &[Option<Vec<C64>>], scale: f64) -> crate::error::Result<Vec<usize>> {
    let mut out = Vec::new();
    for (j, line) in lines.iter().enumerate() {
        let Some(line) = line else { continue };
        if line.len() < 5 {
            continue;
        }
        let length: f64 = line.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let delta = (1e-3 * scale).min(0.05 * length);
        let mut negative = false;
        for k in [line.len() / 4, line.len() / 2, 3 * line.len() / 4] {
            let k = k.clamp(1, line.len() - 2);
            let t = line[k + 1] - line[k - 1];
            let n = t.unscale(t.norm()) * C64::new(0.0, delta);
            if ev.re_eta(line[k] + n)? < 0.0 && ev.re_eta(line[k] - n)? < 0.0 {
                negative = true;
            }
        }
        if negative {
            out.push(j);
        }
    }
    Ok(out)
}

/// Outcome of conditions 3, 4, 5 for one assignment.
fn contour_conditions(mask: &StableLandMask, asg: &Assignment) -> [bool; 3] {
    let seed = |cut: usize, end_b: bool| mask.seeds[2 * cut + usize::from(end_b)].component;
    let q = asg.order.len();
    // Start (`a` end) and finish (`b` end) of contour position i.
    let start = |i: usize| seed(asg.order[i], asg.flipped[i]);
    let finish = |i: usize| seed(asg.order[i], !asg.flipped[i]);
    let same = |x: Option<usize>, y: Option<usize>| x.is_some() && x == y;
    let right = same(finish(q - 1), mask.right);
    let left = same(start(0), mask.left);
    let gaps = (0..q - 1).all(|i| same(finish(i), start(i + 1)));
    [right, left, gaps]
}

fn best_assignment(mask: &StableLandMask, q: usize) -> (Assignment, [bool; 3]) {
    let mut best: Option<(Assignment, [bool; 3])> = None;
    for order in permutations(q) {
        for bits in 0..(1u32 << q) {
            let flipped: Vec<bool> = (0..q).map(|i| bits >> i & 1 == 1).collect();
            let asg = Assignment { order: order.clone(), flipped };
            let res = contour_conditions(mask, &asg);
            let score = res.iter().filter(|x| **x).count();
            if best.as_ref().map_or(true, |(_, r)| score > r.iter().filter(|x| **x).count()) {
                let done = score == 3;
                best = Some((asg, res));
                if done {
                    return best.unwrap();
                }
            }
        }
    }
    best.expect("at least one assignment")
}

/// Runs conditions 1 to 5 on a converged solution.
pub fn analyze_solution(pot: &Potential, solve: &SolveReport, opts: &RegimeOptions) -> RegimeAnalysis {
    let ep = &solve.endpoints;
    let q = ep.q();
    let scale = ep.scale();
    let mut report = RegimeReport::unsolvable(q, String::new());
    report.error = None;
    report.verdict = Verdict::Singular;
    report.residual = Some(solve.residual_norm);
    report.iterations = Some(solve.iterations);
    report.jacobian_condition = Some(solve.jacobian_condition);
    report.endpoints = Some(ep.clone());
    report.distinct = ep.min_separation() > opts.solver.coalesce_tol;

    let ev = match EtaEvaluator::with_tolerance(pot, ep, opts.solver.quad_tol) {
        Ok(ev) => ev,
        Err(e) => {
            report.error = Some(e.to_string());
            return RegimeAnalysis { report, graph: None, mask: None };
        }
    };
    let zeros = ev.h().zeros.clone();
    let points = ep.points();
    report.min_endpoint_zero_distance = zeros
        .iter()
        .flat_map(|z| points.iter().map(move |p| (z - p).norm()))
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));

    // Condition 1.
    let graph = match build_critical_graph_with(&ev, &opts.trace) {
        Ok(g) => Some(g),
        Err(EqmError::CensusViolation { graph, .. }) => Some(*graph),
        Err(e) => {
            report.error = Some(e.to_string());
            None
        }
    };
    let lines: Vec<Option<Vec<C64>>> = graph.as_ref().map_or(vec![None; q], |g| g.cut_polylines());
    let missing: Vec<usize> = (0..q).filter(|j| lines[*j].is_none()).collect();
    report.census = graph.as_ref().map(|g| g.census.clone());
    report.conditions[0] = match &graph {
        None => Condition::fail("critical graph could not be traced"),
        Some(_) if !missing.is_empty() => Condition::fail(format!("cuts {missing:?} are not joined by a trajectory")),
        Some(g) if !g.census.ok => Condition::fail(format!("census: {}", g.census.problems.join("; "))),
        Some(_) => match negative_cuts(&ev.with_cut_polylines(&lines), &lines, scale) {
            Ok(neg) if neg.is_empty() => Condition::pass("every cut is a single critical trajectory with positive density"),
            Ok(neg) => Condition::fail(format!("cuts {neg:?} carry negative density")),
            Err(e) => Condition::fail(format!("density sign check failed: {e}")),
        },
    };

    // Condition 2: distances to the traced support, straight segments where
    // no trajectory was found.
    let support: Vec<Vec<C64>> = (0..q)
        .map(|j| lines[j].clone().unwrap_or_else(|| vec![ep.a()[j], ep.b()[j]]))
        .collect();
    let tol = opts.zero_dist_rel * scale;
    report.zero_distances = zeros
        .iter()
        .map(|&z| ZeroDistance {
            zero: z,
            to_support: support.iter().map(|l| polyline_distance(z, l)).fold(f64::INFINITY, f64::min),
            to_endpoint: points.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min),
        })
        .collect();
    let hits: Vec<&ZeroDistance> = report.zero_distances.iter().filter(|d| d.to_support <= tol).collect();
    report.conditions[1] = if hits.is_empty() {
        let min = report.zero_distances.iter().map(|d| d.to_support).fold(f64::INFINITY, f64::min);
        Condition::pass(format!("zeros stay {min:.3e} from the support"))
    } else {
        Condition::fail(format!(
            "zeros {:?} lie within {tol:.1e} of the support",
            hits.iter().map(|d| d.zero).collect::<Vec<_>>()
        ))
    };
    if !hits.is_empty() {
        report.boundary_hint = if hits.iter().any(|d| d.to_endpoint <= 10.0 * tol) { BoundaryHint::A } else { BoundaryHint::B };
    }

    // Conditions 3 to 5 need the traced cuts.
    if !(report.conditions[0].passed && report.conditions[1].passed) {
        for k in 2..5 {
            report.conditions[k] = Condition::skipped("requires conditions 1 and 2");
        }
        return RegimeAnalysis { report, graph, mask: None };
    }
    let ev = ev.with_cut_polylines(&lines);
    let mask = match stable_land_mask(&ev, &Window::around(&ev), opts.mask_resolution) {
        Ok(m) => m,
        Err(e) => {
            for k in 2..5 {
                report.conditions[k] = Condition::fail(e.to_string());
            }
            report.error = Some(e.to_string());
            return RegimeAnalysis { report, graph, mask: None };
        }
    };
    report.straits = mask.straits.clone();
    let (asg, [right, left, gaps]) = best_assignment(&mask, q);
    let unseeded: Vec<usize> = mask.seeds.iter().enumerate().filter(|(_, s)| s.component.is_none()).map(|(k, _)| k).collect();
    let note = if unseeded.is_empty() { String::new() } else { format!("; no stable-land seed at branch points {unseeded:?}") };
    report.conditions[2] = if right {
        Condition::pass("last cut reaches +inf inside the stable lands")
    } else {
        Condition::fail(format!("no stable-land path from the last cut to +inf{note}"))
    };
    report.conditions[3] = if left {
        Condition::pass("-inf reaches the first cut inside the stable lands")
    } else {
        Condition::fail(format!("no stable-land path from -inf to the first cut{note}"))
    };
    report.conditions[4] = if gaps {
        Condition::pass(if q == 1 { "no gaps" } else { "every gap lies in the stable lands" })
    } else {
        Condition::fail(format!("a gap is blocked{note}"))
    };
    if !(right && left && gaps) && report.boundary_hint == BoundaryHint::None {
        report.boundary_hint = BoundaryHint::C;
    }
    if let Ok(relabeled) = ep.relabel(&asg.order, &asg.flipped) {
        report.endpoints = Some(relabeled);
    }
    report.assignment = Some(asg);
    if report.distinct && report.conditions.iter().all(|c| c.passed) {
        report.verdict = Verdict::Regular;
    }
    RegimeAnalysis { report, graph, mask: Some(mask) }
}

/// Best report among several solutions: regular first, then most
/// conditions passed, then seed order.
fn better(x: &RegimeReport, y: &RegimeReport) -> bool {
    (x.is_regular(), x.passed_count()) > (y.is_regular(), y.passed_count())
}

/// Outcome of a seed search: the best analysis and every distinct
/// converged configuration, in the order found.
struct Search {
    best: Option<RegimeAnalysis>,
    solutions: Vec<EndpointSet>,
    tried: usize,
    last_error: Option<String>,
}

/// Solves seeds in order and analyzes each new converged solution until one
/// is regular. With `solve_all` the remaining seeds are still solved (not
/// analyzed) so the solution set is complete.
fn search(pot: &Potential, q: usize, seeds: &[Seed], opts: &RegimeOptions, solve_all: bool) -> Search {
    let mut out = Search { best: None, solutions: Vec::new(), tried: 0, last_error: None };
    let mut found_regular = false;
    for seed in seeds {
        if seed.source == SeedSource::Multistart && !out.solutions.is_empty() && !opts.multistart_always {
            break;
        }
        if found_regular && !solve_all {
            break;
        }
        out.tried += 1;
        let sol = match solve_endpoints(pot, q, &seed.endpoints, &opts.solver) {
            Ok(sol) => sol,
            Err(e) => {
                out.last_error = Some(e.to_string());
                continue;
            }
        };
        if out.solutions.iter().any(|s| same_configuration(s, &sol.endpoints, 1e-6)) {
            continue;
        }
        out.solutions.push(sol.endpoints.clone());
        if found_regular {
            continue;
        }
        let mut a = analyze_solution(pot, &sol, opts);
        a.report.seed_source = Some(seed.source);
        found_regular = a.report.is_regular();
        if out.best.as_ref().map_or(true, |b| better(&a.report, &b.report)) {
            out.best = Some(a);
        }
    }
    out
}

fn finish(q: usize, s: Search) -> RegimeAnalysis {
    s.best.unwrap_or_else(|| RegimeAnalysis {
        report: RegimeReport::unsolvable(
            q,
            format!("no convergence from {} seeds ({})", s.tried, s.last_error.unwrap_or_default()),
        ),
        graph: None,
        mask: None,
    })
}

/// Checks `q` cuts starting from the given seeds. Seeds are solved in
/// order and each new converged solution is analyzed; the first regular one
/// ends the search, otherwise the report passing most conditions is kept.
/// Multistart seeds are skipped once another seed has converged unless
/// `opts.multistart_always` is set.
pub fn check_with_seeds(pot: &Potential, q: usize, seeds: &[Seed], opts: &RegimeOptions) -> RegimeAnalysis {
    finish(q, search(pot, q, seeds, opts, false))
}

/// A check together with the distinct solutions it converged to, which
/// seed the neighbouring points of a scan.
#[derive(Clone, Debug)]
pub struct ContinuedCheck {
    pub analysis: RegimeAnalysis,
    pub solutions: Vec<EndpointSet>,
    /// True when no neighbour seed converged and the default seeds were used.
    pub fell_back: bool,
}

/// Solutions found at nearby parameters are continued first; the default
/// seed strategy runs only when none of them converges.
pub fn check_continued(
    pot: &Potential,
    q: usize,
    neighbors: &[EndpointSet],
    cache: Option<&SeedCache>,
    opts: &RegimeOptions,
) -> ContinuedCheck {
    let seeds: Vec<Seed> = neighbors
        .iter()
        .filter(|e| e.q() == q)
        .map(|e| Seed { source: SeedSource::Neighbor, endpoints: e.clone() })
        .collect();
    let s = search(pot, q, &seeds, opts, true);
    if !s.solutions.is_empty() {
        let solutions = s.solutions.clone();
        return ContinuedCheck { analysis: finish(q, s), solutions, fell_back: false };
    }
    let seeds = seed_list(pot, q, None, cache, opts.restarts, &opts.solver);
    let s = search(pot, q, &seeds, opts, true);
    let solutions = s.solutions.clone();
    ContinuedCheck { analysis: finish(q, s), solutions, fell_back: true }
}

/// Regular q-cut check with the default seed strategy (`seed` is tried
/// first when given).
pub fn check_regular(pot: &Potential, q: usize, seed: Option<&EndpointSet>, opts: &RegimeOptions) -> RegimeReport {
    check_regular_cached(pot, q, seed, None, opts).report
}

pub fn check_regular_cached(
    pot: &Potential,
    q: usize,
    seed: Option<&EndpointSet>,
    cache: Option<&SeedCache>,
    opts: &RegimeOptions,
) -> RegimeAnalysis {
    if q == 0 || q > pot.max_cuts() {
        return RegimeAnalysis {
            report: RegimeReport::unsolvable(q, format!("q must lie in 1..={}", pot.max_cuts())),
            graph: None,
            mask: None,
        };
    }
    let seeds = seed_list(pot, q, seed, cache, opts.restarts, &opts.solver);
    check_with_seeds(pot, q, &seeds, opts)
}

/// One sample of [`strait_track`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StraitSample {
    pub tau: f64,
    pub potential: Potential,
    pub verdict: Verdict,
    /// Narrowest corridor through a saddle of `Re eta`, `0` once closed.
    pub min_width: Option<f64>,
    pub report: RegimeReport,
}

/// Follows a `q`-cut solution along `t(tau) = (1 - tau) t_start + tau t_end`
/// at `samples` evenly spaced points, each solve starting from the previous
/// solution, and records the verdict and the narrowest strait. Stops at the
/// first point where the solve fails.
pub fn strait_track(
    start: &Potential,
    end: &Potential,
    q: usize,
    seed: &EndpointSet,
    samples: usize,
    opts: &RegimeOptions,
) -> crate::error::Result<Vec<StraitSample>> {
    let mut out = Vec::with_capacity(samples);
    let mut current = seed.clone();
    for k in 0..samples {
        let tau = if samples <= 1 { 0.0 } else { k as f64 / (samples - 1) as f64 };
        let pot = start.lerp(end, tau)?;
        let sol = match solve_endpoints(&pot, q, &current, &opts.solver) {
            Ok(sol) => sol,
            Err(e) if out.is_empty() => return Err(e),
            Err(_) => break,
        };
        current = sol.endpoints.clone();
        let report = analyze_solution(&pot, &sol, opts).report;
        let min_width = report.straits.iter().map(|s| s.width).fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.min(w))));
        out.push(StraitSample { tau, potential: pot, verdict: report.verdict, min_width, report });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "q")]
pub enum ClassVerdict {
    Unique(usize),
    Ambiguous,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub schema_version: u32,
    pub potential: Potential,
    pub reports: Vec<RegimeReport>,
    pub verdict: ClassVerdict,
}

impl Classification {
    pub fn from_reports(pot: &Potential, reports: Vec<RegimeReport>) -> Self {
        let regular: Vec<usize> = reports.iter().filter(|r| r.is_regular()).map(|r| r.q).collect();
        let verdict = match regular.as_slice() {
            [q] => ClassVerdict::Unique(*q),
            [] => ClassVerdict::None,
            _ => ClassVerdict::Ambiguous,
        };
        Self { schema_version: REPORT_SCHEMA_VERSION, potential: pot.clone(), reports, verdict }
    }

    pub fn selected(&self) -> Option<usize> {
        match self.verdict {
            ClassVerdict::Unique(q) => Some(q),
            _ => None,
        }
    }

    pub fn report(&self, q: usize) -> Option<&RegimeReport> {
        self.reports.iter().find(|r| r.q == q)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classification serializes")
    }
}

/// Checks every `q` in `1..=2p-1`.
pub fn classify(pot: &Potential, opts: &RegimeOptions) -> Classification {
    classify_cached(pot, None, opts)
}

pub fn classify_cached(pot: &Potential, cache: Option<&SeedCache>, opts: &RegimeOptions) -> Classification {
    let reports = (1..=pot.max_cuts()).map(|q| check_regular_cached(pot, q, None, cache, opts).report).collect();
    Classification::from_reports(pot, reports)
}
