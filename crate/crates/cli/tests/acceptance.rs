//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! `cargo test --test acceptance -- 3 7` runs a subset. Setting
//! `EQM_BLESS=1` rewrites the golden phase-map grid instead of comparing.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use eqm::endpoint::{condition_number, cut_integral, gap_integral, jacobian, moment, solve_endpoints, SolverOptions};
use eqm::eta::{EtaEvaluator, PathHint};
use eqm::graph::build_critical_graph;
use eqm::measure::{compute_h, lagrange_multiplier, EquilibriumMeasure};
use eqm::regime::{check_regular_cached, classify, classify_cached, ClassVerdict, RegimeOptions, Verdict};
use eqm::seeds::{same_configuration, SeedCache};
use eqm::teichmuller::teichmuller_audit;
use eqm::{EndpointSet, Potential, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// A regular solution used by several criteria.
struct Bench {
    label: String,
    pot: Potential,
    ep: EndpointSet,
}

fn benchmark_points() -> Vec<(String, Potential, usize)> {
    let mut v = vec![("semicircle".to_owned(), Potential::gaussian(), 1)];
    let quartic = [
        (c(0.0, 0.0), 1),
        (c(1.0, 0.0), 1),
        (c(0.0, 2.0), 1),
        (c(1.0, 1.0), 1),
        (c(0.0, 4.0), 1),
        (c(1.0, 3.8), 1),
        (c(1.0, 3.92), 1),
        (c(1.0, 4.0), 1),
        (c(-1.0, 4.0), 1),
        (c(-3.0, 0.0), 2),
        (c(-1.35, 4.0), 3),
    ];
    for (s, q) in quartic {
        v.push((format!("sigma={s}"), Potential::quartic(s), q));
    }
    v
}

fn benchmarks() -> &'static [Bench] {
    static CELL: OnceLock<Vec<Bench>> = OnceLock::new();
    CELL.get_or_init(|| {
        let opts = RegimeOptions::default();
        benchmark_points()
            .into_iter()
            .map(|(label, pot, q)| {
                let a = check_regular_cached(&pot, q, None, None, &opts);
                assert_eq!(a.report.verdict, Verdict::Regular, "benchmark {label} is not regular");
                Bench { label, ep: a.report.endpoints.clone().expect("regular has endpoints"), pot }
            })
            .collect()
    })
}

/// Every converged solution at the benchmark parameters, regular or not.
fn solution_matrix() -> &'static [Bench] {
    static CELL: OnceLock<Vec<Bench>> = OnceLock::new();
    CELL.get_or_init(|| {
        let opts = RegimeOptions::default();
        let mut out = Vec::new();
        for b in benchmarks() {
            out.push(Bench { label: format!("{} q={}", b.label, b.ep.q()), pot: b.pot.clone(), ep: b.ep.clone() });
            for q in (1..=b.pot.max_cuts()).filter(|q| *q != b.ep.q()) {
                if let Some(ep) = check_regular_cached(&b.pot, q, None, None, &opts).report.endpoints {
                    out.push(Bench { label: format!("{} q={q}", b.label), pot: b.pot.clone(), ep });
                }
            }
        }
        out
    })
}

// 1.
fn semicircle_exactness() -> Outcome {
    let pot = Potential::gaussian();
    let seed = EndpointSet::new(vec![c(-1.5, 0.1)], vec![c(1.7, -0.2)]).map_err(err)?;
    let sol = solve_endpoints(&pot, 1, &seed, &SolverOptions::default()).map_err(err)?;
    let (a, b) = (sol.endpoints.a()[0], sol.endpoints.b()[0]);
    let e_end = (a - c(-2.0, 0.0)).norm().max((b - c(2.0, 0.0)).norm());

    // ell = 2 g(2) - V(2) with g(2) = int log(2 - s) rho(s) ds; s = 2 cos(th).
    let n = 400_000;
    let h = PI / n as f64;
    let g2: f64 = (0..n)
        .map(|k| {
            let th = (k as f64 + 0.5) * h;
            (2.0 - 2.0 * th.cos()).ln() * (2.0 / PI) * th.sin().powi(2) * h
        })
        .sum();
    let ell_oracle = 2.0 * g2 - 2.0;
    let ell = lagrange_multiplier(&pot, &sol.endpoints).map_err(err)?;
    let e_ell = (ell - c(ell_oracle, 0.0)).norm();

    let em = EquilibriumMeasure::new(&pot, &sol.endpoints, 1e-13).map_err(err)?;
    let rho = em.density_at(0, c(0.0, 0.0)).map_err(err)?.rho;
    let e_rho = (rho - 4f64.sqrt() / (2.0 * PI)).abs();
    verdict(
        e_end <= 1e-10 && e_ell <= 1e-8 && e_rho <= 1e-9,
        format!("endpoint err {e_end:.1e}, ell err {e_ell:.1e}, density err {e_rho:.1e}"),
    )
}

// 2.
fn quartic_one_cut() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, Duration::ZERO);
    for s in [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0), c(1.0, 1.0)] {
        let t = Instant::now();
        let pot = Potential::quartic(s);
        let seed = EndpointSet::new(vec![c(-1.4, 0.0)], vec![c(1.4, 0.0)]).map_err(err)?;
        let sol = solve_endpoints(&pot, 1, &seed, &SolverOptions::default()).map_err(|e| format!("sigma={s}: {e}"))?;
        let h = compute_h(&pot, &sol.endpoints).map_err(err)?;
        let elapsed = t.elapsed();
        let (a, b) = (sol.endpoints.a()[0], sol.endpoints.b()[0]);
        if (a + b).norm() > 1e-9 {
            return Err(format!("sigma={s}: solution is not symmetric ({a}, {b})"));
        }
        // Polynomial part and 1/z coefficient of (z^3 + s z)(z^2 - b^2)^(-1/2).
        let b2 = b * b;
        let relation = (b2 * b2 * 3.0 + s * b2 * 4.0 - 16.0).norm();
        let h_oracle = [s + b2 * 0.5, c(0.0, 0.0), c(1.0, 0.0)];
        if h.coeffs.len() != 3 {
            return Err(format!("sigma={s}: h has degree {}", h.degree()));
        }
        let h_err = h.coeffs.iter().zip(&h_oracle).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        worst = (worst.0.max(relation), worst.1.max(h_err), worst.2.max(elapsed));
    }
    verdict(
        worst.0 <= 1e-9 && worst.1 <= 1e-9 && worst.2 < Duration::from_secs(1),
        format!("max |3b^4+4sb^2-16| {:.1e}, max h err {:.1e}, slowest {:.2}s", worst.0, worst.1, worst.2.as_secs_f64()),
    )
}

// 3.
fn quartic_two_cut() -> Outcome {
    let s = -3.0;
    let pot = Potential::quartic(c(s, 0.0));
    let seed = EndpointSet::new(vec![c(-2.1, 0.05), c(0.9, 0.0)], vec![c(-1.1, 0.0), c(2.3, -0.05)]).map_err(err)?;
    let sol = solve_endpoints(&pot, 2, &seed, &SolverOptions::default()).map_err(err)?;
    let (a, b) = ((-s - 2.0).sqrt(), (-s + 2.0).sqrt());
    let oracle = EndpointSet::new(vec![c(-b, 0.0), c(a, 0.0)], vec![c(-a, 0.0), c(b, 0.0)]).map_err(err)?;
    let close = same_configuration(&sol.endpoints, &oracle, 1e-9);
    let h = compute_h(&pot, &sol.endpoints).map_err(err)?;
    let gap = gap_integral(&pot, &sol.endpoints, &h, 0, 1e-13).map_err(err)?.re.abs();
    verdict(
        close && gap <= 1e-9,
        format!("endpoints {}, gap condition {gap:.1e}", sol.endpoints.points().iter().map(|z| format!("{z:.6}")).collect::<Vec<_>>().join(" ")),
    )
}

// 4.
fn labeled_classifications() -> Outcome {
    let opts = RegimeOptions::default();
    let mut wrong = Vec::new();
    let cases = [
        (c(1.0, 1.0), 1),
        (c(0.0, 4.0), 1),
        (c(1.0, 3.8), 1),
        (c(1.0, 3.92), 1),
        (c(1.0, 4.0), 1),
        (c(-1.0, 4.0), 1),
        (c(-1.35, 4.0), 3),
    ];
    for (s, q) in cases {
        let cl = classify(&Potential::quartic(s), &opts);
        if cl.verdict != ClassVerdict::Unique(q) {
            wrong.push(format!("sigma={s}: {:?}", cl.verdict));
        }
    }
    verdict(wrong.is_empty(), if wrong.is_empty() { format!("{} points as labeled", cases.len()) } else { wrong.join("; ") })
}

// 5.
fn boundary_type_a() -> Outcome {
    let opts = RegimeOptions::default();
    let ss = [0.9, 0.99, 0.999];
    let sigma = |s: f64| c(0.0, s * 12f64.sqrt());
    let start = check_regular_cached(&Potential::quartic(sigma(ss[0])), 1, None, None, &opts);
    let mut ep = start.report.endpoints.ok_or("no one-cut solution at s = 0.9")?;
    let mut d = Vec::new();
    for (k, &s) in ss.iter().enumerate() {
        let pot = Potential::quartic(sigma(s));
        if k > 0 {
            ep = solve_endpoints(&pot, 1, &ep, &opts.solver).map_err(|e| format!("s={s}: {e}"))?.endpoints;
        }
        let h = compute_h(&pot, &ep).map_err(err)?;
        let pts = ep.points();
        d.push(h.zeros.iter().flat_map(|z| pts.iter().map(move |p| (z - p).norm())).fold(f64::INFINITY, f64::min));
    }
    let decreasing = d[1] < d[0] && d[2] < d[1];
    // d ~ (1 - s)^alpha; extrapolate d^(1/alpha) linearly to zero.
    let alpha = (d[0] / d[1]).ln() / ((1.0 - ss[0]) / (1.0 - ss[1])).ln();
    let (u1, u2) = (d[1].powf(1.0 / alpha), d[2].powf(1.0 / alpha));
    let root = ss[2] - u2 * (ss[2] - ss[1]) / (u2 - u1);
    let rel = (root - 1.0).abs();
    verdict(
        decreasing && rel <= 0.01,
        format!("distances {:.3e}, {:.3e}, {:.3e}, exponent {alpha:.3}, root at |sigma| = {:.5} ({:.2e} from sqrt(12))", d[0], d[1], d[2], root * 12f64.sqrt(), rel),
    )
}

// 6.
fn strait_closure() -> Outcome {
    let opts = RegimeOptions::default();
    let xs: Vec<f64> = (0..=16).map(|k| -0.5 - 0.05 * k as f64).collect();
    let mut prev: Option<EndpointSet> = None;
    let mut regular = Vec::new();
    for &x in &xs {
        let a = check_regular_cached(&Potential::quartic(c(x, 4.0)), 1, prev.as_ref(), None, &opts);
        regular.push(a.report.is_regular());
        if let Some(ep) = a.report.endpoints {
            prev = Some(ep);
        }
    }
    let flips: Vec<usize> = (1..xs.len()).filter(|&k| regular[k] != regular[k - 1]).collect();
    let marks: String = regular.iter().map(|r| if *r { 'R' } else { '-' }).collect();
    match flips.as_slice() {
        [k] if regular[0] => {
            let (hi, lo) = (xs[*k - 1], xs[*k]);
            verdict(
                hi <= -1.10 + 1e-9 && lo >= -1.20 - 1e-9,
                format!("one-cut verdict flips between x = {hi:.2} and {lo:.2} ({marks})"),
            )
        }
        _ => Err(format!("expected a single regular-to-singular flip, got {marks}")),
    }
}

// 7.
fn openness() -> Outcome {
    let opts = RegimeOptions { multistart_always: false, ..Default::default() };
    let mut cache = SeedCache::new();
    for b in benchmarks() {
        cache.insert(&b.pot, &b.ep);
    }
    let dirs: Vec<C64> = (0..8).map(|k| C64::from_polar(1e-3, k as f64 * PI / 4.0)).collect();
    let mut bad = Vec::new();
    let mut count = 0;
    for b in benchmarks() {
        let q = b.ep.q();
        for d in &dirs {
            let mut t = b.pot.t().to_vec();
            let j = if b.pot.p() == 2 { 1 } else { 0 };
            t[j] += d;
            let pot = b.pot.with_t(t).map_err(err)?;
            let cl = classify_cached(&pot, Some(&cache), &opts);
            count += 1;
            if cl.verdict != ClassVerdict::Unique(q) {
                bad.push(format!("{} + {d:.1e}: {:?}", b.label, cl.verdict));
            }
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { format!("{count} perturbations keep verdict and q") } else { bad.join("; ") })
}

/// `T_l` by the trapezoid rule on a circle enclosing every endpoint.
fn moment_oracle(pot: &Potential, ep: &EndpointSet, l: usize) -> C64 {
    let pts = ep.points();
    let rho = 1.5 * pts.iter().map(|p| p.norm()).fold(0.0, f64::max) + 0.5;
    let n = 2048;
    let mut acc = c(0.0, 0.0);
    for k in 0..n {
        let z = C64::from_polar(rho, 2.0 * PI * k as f64 / n as f64);
        let inv = pts.iter().fold(z.powi(-(ep.q() as i32)), |s, p| s / (c(1.0, 0.0) - p / z).sqrt());
        acc += z.powi(l as i32) * pot.eval_v_prime(z) * inv * z;
    }
    acc / n as f64 * -0.5
}

// 8.
fn moment_invariants() -> Outcome {
    // Solutions are polished to the quadrature tolerance so the imposed
    // equations are not the limiting error of the derived one.
    let polish = SolverOptions { newton_tol: 1e-13, ..Default::default() };
    let tol = polish.quad_tol;
    let (mut worst_t, mut worst_last) = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    let matrix = solution_matrix();
    for b in matrix {
        let q = b.ep.q();
        let ep = match solve_endpoints(&b.pot, q, &b.ep, &polish) {
            Ok(s) => s.endpoints,
            Err(e) => {
                bad.push(format!("{}: polishing failed ({e})", b.label));
                continue;
            }
        };
        let b = Bench { label: b.label.clone(), pot: b.pot.clone(), ep };
        for l in 0..=q {
            let t = moment_oracle(&b.pot, &b.ep, l);
            let e = if l == q { (t + 1.0).norm() } else { t.norm() };
            worst_t = worst_t.max(e);
            if e > 1e-10 {
                bad.push(format!("{}: T_{l} off by {e:.1e}", b.label));
            }
        }
        let h = compute_h(&b.pot, &b.ep).map_err(err)?;
        let last = cut_integral(&b.pot, &b.ep, &h, q - 1, tol).map_err(err)?;
        let e = last.re.abs() / last.norm().max(1.0);
        worst_last = worst_last.max(e);
        if e > tol {
            bad.push(format!("{}: last-cut condition {e:.1e}", b.label));
        }
    }
    verdict(
        bad.is_empty(),
        format!("{} solutions, max moment err {worst_t:.1e}, max last-cut {worst_last:.1e}{}", matrix.len(), if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }),
    )
}

/// Path from the base endpoint out to a large circle, around it, and in.
fn far_path(ev: &EtaEvaluator, z: C64, k0: usize, k1: usize) -> Vec<C64> {
    let r = 3.0 * (ev.endpoints().scale() + z.norm()) + 1.0;
    let angle = |k: usize| 2.0 * PI * k as f64 / 16.0;
    let (t0, mut t1) = (angle(k0), angle(k1));
    if t1 < t0 {
        t1 += 2.0 * PI;
    }
    let steps = 24;
    (0..=steps).map(|s| C64::from_polar(r, t0 + (t1 - t0) * s as f64 / steps as f64)).collect()
}

// 9.
fn eta_single_valued() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for b in benchmarks() {
        let ev = EtaEvaluator::new(&b.pot, &b.ep).map_err(err)?;
        let scale = b.ep.scale();
        let mut got = 0;
        let mut attempts = 0;
        while got < 50 {
            attempts += 1;
            if attempts > 500 {
                return Err(format!("{}: could not route two paths to 50 points", b.label));
            }
            let z = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)) * scale;
            let Ok(direct) = ev.eta_straight(z, &PathHint::Auto) else { continue };
            let around = (0..16)
                .flat_map(|k0| (0..16).map(move |k1| (k0, k1)))
                .find_map(|(k0, k1)| ev.eta_straight(z, &PathHint::Via(far_path(&ev, z, k0, k1))).ok());
            let Some(around) = around else { continue };
            worst = worst.max((direct.re - around.re).abs());
            got += 1;
        }
        compared += got;
    }
    verdict(worst <= 1e-8, format!("{compared} points, max two-path Re eta gap {worst:.1e}"))
}

// 10.
fn graph_census() -> Outcome {
    let mut bad = Vec::new();
    let mut polys = 0;
    let quartic: Vec<&Bench> = benchmarks().iter().filter(|b| b.pot.p() == 2).collect();
    for b in &quartic {
        let (p, q) = (b.pot.p(), b.ep.q());
        let ev = EtaEvaluator::new(&b.pot, &b.ep).map_err(err)?;
        let g = build_critical_graph(&ev).map_err(|e| format!("{}: {e}", b.label))?;
        let cs = &g.census;
        let humps = if p > q { 2 * (p - q) } else { 0 };
        let gaps = if q > p { 2 * (q - p) } else { 0 };
        if cs.infinity_hits.len() != 4 * p || cs.infinity_hits.iter().any(|h| *h != 1) {
            bad.push(format!("{}: infinity hits {:?}", b.label, cs.infinity_hits));
        }
        if cs.cuts_found != q || cs.humps != humps || cs.gap_connections != gaps {
            bad.push(format!("{}: cuts {} humps {} gap connections {}", b.label, cs.cuts_found, cs.humps, cs.gap_connections));
        }
        if cs.local_angle_error_deg > 1.0 {
            bad.push(format!("{}: local angle error {:.2} deg", b.label, cs.local_angle_error_deg));
        }
        let audit = teichmuller_audit(&g);
        polys += audit.polygons.len();
        if !audit.passed {
            bad.push(format!("{}: Teichmuller audit failed", b.label));
        }
        if audit.polygons.iter().any(|(_, a)| a.singular_finite && a.ok) {
            bad.push(format!("{}: singular finite polygon accepted", b.label));
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("{} graphs, {polys} polygons audited", quartic.len()) } else { bad.join("; ") },
    )
}

// 11.
fn jacobian_health() -> Outcome {
    let opts = SolverOptions::default();
    let (mut worst_cond, mut min_dt) = (0.0f64, f64::INFINITY);
    for b in benchmarks() {
        let jac = jacobian(&b.pot, &b.ep, &opts).map_err(err)?;
        worst_cond = worst_cond.max(condition_number(&jac));
        let pts = b.ep.points();
        let q = b.ep.q();
        for k in 0..pts.len() {
            let h = 1e-6 * b.ep.scale();
            let shifted = |dz: f64| {
                let mut x = pts.clone();
                x[k] += dz;
                EndpointSet::new(x[..q].to_vec(), x[q..].to_vec()).and_then(|ep| moment(&b.pot, &ep, 0))
            };
            let d = (shifted(h).map_err(err)? - shifted(-h).map_err(err)?) / (2.0 * h);
            min_dt = min_dt.min(d.norm());
        }
    }
    verdict(
        worst_cond < 1e8 && min_dt > 1e-8,
        format!("max condition {worst_cond:.2e}, min |dT0/dalpha| {min_dt:.2e}"),
    )
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

// 12.
fn phase_map_regression() -> Outcome {
    let out = std::env::temp_dir().join(format!("eqm-acceptance-{}", std::process::id()));
    let status = Command::new(env!("CARGO_BIN_EXE_eqm"))
        .args(["scan", "--config"])
        .arg(golden_dir().join("quartic_scan.json"))
        .arg("--out")
        .arg(&out)
        .args(["--threads", "4"])
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(err)?;
    let text = std::fs::read_to_string(out.join("scan.json")).map_err(err)?;
    let _ = std::fs::remove_dir_all(&out);
    let v: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
    let grid = v["result"]["verdict_grid"].as_str().ok_or("scan.json has no verdict grid")?;
    let fraction = v["result"]["resolved_fraction"].as_f64().ok_or("scan.json has no resolved fraction")?;
    let golden_path = golden_dir().join("quartic_81x51.txt");
    if std::env::var_os("EQM_BLESS").is_some() {
        std::fs::write(&golden_path, grid).map_err(err)?;
    }
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| format!("golden grid: {e}"))?;
    let mismatched = grid.chars().zip(golden.chars()).filter(|(a, b)| a != b).count()
        + grid.len().abs_diff(golden.len());
    verdict(
        status.code() == Some(0) && fraction >= 0.95 && mismatched == 0,
        format!("exit {:?}, resolved {:.1}%, {mismatched} cells differ from golden", status.code(), 100.0 * fraction),
    )
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let all = [
        Criterion { id: 1, name: "semicircle exactness", limit: Some(secs(1)), run: semicircle_exactness },
        Criterion { id: 2, name: "quartic one-cut closed form", limit: Some(secs(4)), run: quartic_one_cut },
        Criterion { id: 3, name: "quartic two-cut closed form", limit: None, run: quartic_two_cut },
        Criterion { id: 4, name: "labeled classifications", limit: Some(secs(30)), run: labeled_classifications },
        Criterion { id: 5, name: "boundary type (a)", limit: Some(secs(10)), run: boundary_type_a },
        Criterion { id: 6, name: "strait closure", limit: Some(secs(60)), run: strait_closure },
        Criterion { id: 7, name: "openness", limit: Some(secs(120)), run: openness },
        Criterion { id: 8, name: "moment and residual invariants", limit: None, run: moment_invariants },
        Criterion { id: 9, name: "Re eta single-valuedness", limit: None, run: eta_single_valued },
        Criterion { id: 10, name: "graph census", limit: None, run: graph_census },
        Criterion { id: 11, name: "Jacobian health", limit: None, run: jacobian_health },
        Criterion { id: 12, name: "phase-map regression", limit: Some(secs(15 * 60)), run: phase_map_regression },
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    println!("acceptance ({cores} cores available)");
    let mut failed = 0;
    for cr in all.iter().filter(|cr| wanted.is_empty() || wanted.contains(&cr.id)) {
        // Shared benchmark solutions are built outside the timed region.
        if matches!(cr.id, 7 | 9 | 10 | 11) {
            benchmarks();
        }
        if cr.id == 8 {
            solution_matrix();
        }
        let t = Instant::now();
        let res = (cr.run)();
        let dt = t.elapsed();
        let over = cr.limit.is_some_and(|l| dt > l);
        let (tag, detail) = match (&res, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {}s limit", cr.limit.unwrap().as_secs())),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {:>2} {}: {detail} [{:.2}s]", cr.id, cr.name, dt.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
