//! Phase-map scans over one complex coefficient.
//!
//! Rows run along the imaginary axis. Row 0 is swept left to right, each
//! cell continuing the solutions of the cell before it; every later row is
//! processed in parallel, each cell continuing the solutions of its three
//! neighbours in the row below. Results do not depend on the thread count.

use std::time::Instant;

use eqm::regime::{check_continued, ClassVerdict, Classification, RegimeOptions, RegimeReport, Verdict};
use eqm::seeds::{same_configuration, SeedCache};
use eqm::{EndpointSet, Potential, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

/// Inclusive range of `count` evenly spaced values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn fixed(v: f64) -> Self {
        Self { start: v, stop: v, count: 1 }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.count <= 1 {
            self.start
        } else {
            self.start + (self.stop - self.start) * k as f64 / (self.count - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }
}

/// Grid over `t_index` (1-based, the coefficient of `z^index / index`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub index: usize,
    pub re: Range,
    pub im: Range,
}

impl ScanSpec {
    pub fn validate(&self, base: &Potential) -> Result<(), ConfigError> {
        if self.index == 0 || self.index > base.max_cuts() {
            return Err(ConfigError::Invalid(format!(
                "scan.index must lie in 1..={}, got {}",
                base.max_cuts(),
                self.index
            )));
        }
        for (name, r) in [("re", &self.re), ("im", &self.im)] {
            if r.count == 0 || !r.start.is_finite() || !r.stop.is_finite() {
                return Err(ConfigError::Invalid(format!("scan.{name} needs count >= 1 and finite bounds")));
            }
        }
        Ok(())
    }

    pub fn potential_at(&self, base: &Potential, re: f64, im: f64) -> Potential {
        let mut t = base.t().to_vec();
        t[self.index - 1] = C64::new(re, im);
        base.with_t(t).expect("finite coefficients")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVerdict {
    /// Exactly one q is regular.
    Regular,
    Ambiguous,
    /// Some q solved, none regular.
    Singular,
    Unsolvable,
}

impl CellVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Regular => "regular",
            Self::Ambiguous => "ambiguous",
            Self::Singular => "singular",
            Self::Unsolvable => "unsolvable",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanCell {
    pub re: f64,
    pub im: f64,
    pub verdict: CellVerdict,
    pub q: Option<usize>,
    pub endpoints: Option<EndpointSet>,
    pub residual: Option<f64>,
    /// One letter per q: `R` regular, `S` singular, `U` unsolvable.
    pub digest: String,
    /// Whether any q needed the default seeds.
    pub fell_back: bool,
    pub wall_ms: f64,
    #[serde(skip)]
    pub reports: Vec<RegimeReport>,
    #[serde(skip)]
    pub solutions: Vec<Vec<EndpointSet>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub spec: ScanSpec,
    /// Row-major, rows along `im`.
    pub cells: Vec<ScanCell>,
}

impl ScanResult {
    pub fn cell(&self, i_re: usize, i_im: usize) -> &ScanCell {
        &self.cells[i_im * self.spec.re.count + i_re]
    }

    pub fn resolved_fraction(&self) -> f64 {
        let n = self.cells.iter().filter(|c| c.verdict == CellVerdict::Regular).count();
        n as f64 / self.cells.len().max(1) as f64
    }

    /// Selected q per cell as text, one row per line from the top
    /// (largest `im`): `1`..`9`, `?` ambiguous, `.` singular, `x` unsolvable.
    pub fn verdict_grid(&self) -> String {
        let mut out = String::new();
        for j in (0..self.spec.im.count).rev() {
            for i in 0..self.spec.re.count {
                let c = self.cell(i, j);
                out.push(match (c.verdict, c.q) {
                    (CellVerdict::Regular, Some(q)) => char::from_digit(q as u32, 36).unwrap_or('#'),
                    (CellVerdict::Ambiguous, _) => '?',
                    (CellVerdict::Unsolvable, _) => 'x',
                    _ => '.',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Regular configurations of all cells, for warm-starting later runs.
    pub fn fill_cache(&self, base: &Potential, cache: &mut SeedCache) {
        for c in &self.cells {
            if let (CellVerdict::Regular, Some(ep)) = (c.verdict, &c.endpoints) {
                cache.insert(&self.spec.potential_at(base, c.re, c.im), ep);
            }
        }
    }
}

/// Coarsest mask grid used by scans unless overridden.
pub const SCAN_MASK_RESOLUTION: usize = 32;

/// Solutions kept per q for continuation.
const MAX_SOLUTIONS: usize = 8;

/// Classifies one point, continuing the neighbours' solutions.
pub fn classify_cell(
    pot: &Potential,
    neighbors: &[&ScanCell],
    cache: Option<&SeedCache>,
    opts: &RegimeOptions,
) -> (Classification, Vec<Vec<EndpointSet>>, bool) {
    let mut reports = Vec::new();
    let mut solutions = Vec::new();
    let mut fell_back = false;
    for q in 1..=pot.max_cuts() {
        let mut seeds: Vec<EndpointSet> = Vec::new();
        for n in neighbors {
            for s in n.solutions.get(q - 1).into_iter().flatten() {
                if !seeds.iter().any(|x| same_configuration(x, s, 1e-6)) {
                    seeds.push(s.clone());
                }
            }
        }
        let check = check_continued(pot, q, &seeds, cache, opts);
        fell_back |= check.fell_back;
        reports.push(check.analysis.report);
        let mut sols = check.solutions;
        sols.truncate(MAX_SOLUTIONS);
        solutions.push(sols);
    }
    (Classification::from_reports(pot, reports), solutions, fell_back)
}

fn make_cell(re: f64, im: f64, cl: Classification, solutions: Vec<Vec<EndpointSet>>, fell_back: bool, wall_ms: f64) -> ScanCell {
    let digest = cl
        .reports
        .iter()
        .map(|r| match r.verdict {
            Verdict::Regular => 'R',
            Verdict::Singular => 'S',
            Verdict::Unsolvable => 'U',
        })
        .collect();
    let (verdict, q) = match cl.verdict {
        ClassVerdict::Unique(q) => (CellVerdict::Regular, Some(q)),
        ClassVerdict::Ambiguous => (CellVerdict::Ambiguous, None),
        ClassVerdict::None if cl.reports.iter().any(|r| r.verdict != Verdict::Unsolvable) => (CellVerdict::Singular, None),
        ClassVerdict::None => (CellVerdict::Unsolvable, None),
    };
    let selected = q.and_then(|q| cl.report(q));
    ScanCell {
        re,
        im,
        verdict,
        q,
        endpoints: selected.and_then(|r| r.endpoints.clone()),
        residual: selected.and_then(|r| r.residual),
        digest,
        fell_back,
        wall_ms,
        reports: cl.reports,
        solutions,
    }
}

fn run_cell(
    spec: &ScanSpec,
    base: &Potential,
    re: f64,
    im: f64,
    neighbors: &[&ScanCell],
    cache: Option<&SeedCache>,
    opts: &RegimeOptions,
) -> ScanCell {
    let start = Instant::now();
    let pot = spec.potential_at(base, re, im);
    let (cl, sols, fell_back) = classify_cell(&pot, neighbors, cache, opts);
    make_cell(re, im, cl, sols, fell_back, start.elapsed().as_secs_f64() * 1e3)
}

/// Runs the scan on a pool of `threads` workers. `progress` is called with
/// each finished row index.
pub fn run_scan(
    base: &Potential,
    spec: &ScanSpec,
    cache: Option<&SeedCache>,
    opts: &RegimeOptions,
    threads: usize,
    mut progress: impl FnMut(usize),
) -> Result<ScanResult, ConfigError> {
    spec.validate(base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    let xs = spec.re.values();
    let ys = spec.im.values();
    let nx = xs.len();
    let mut cells: Vec<ScanCell> = Vec::with_capacity(nx * ys.len());
    for (j, &im) in ys.iter().enumerate() {
        if j == 0 {
            for &re in &xs {
                let prev: Vec<&ScanCell> = cells.last().into_iter().collect();
                let cell = run_cell(spec, base, re, im, &prev, cache, opts);
                cells.push(cell);
            }
        } else {
            let below = &cells[(j - 1) * nx..j * nx];
            let row: Vec<ScanCell> = pool.install(|| {
                (0..nx)
                    .into_par_iter()
                    .map(|i| {
                        let mut nb = vec![&below[i]];
                        if i > 0 {
                            nb.push(&below[i - 1]);
                        }
                        if i + 1 < nx {
                            nb.push(&below[i + 1]);
                        }
                        run_cell(spec, base, xs[i], im, &nb, cache, opts)
                    })
                    .collect()
            });
            cells.extend(row);
        }
        progress(j);
    }
    Ok(ScanResult { spec: spec.clone(), cells })
}
