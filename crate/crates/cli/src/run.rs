//! The four subcommands. Each returns an exit code and reports problems on
//! standard error.

use std::path::{Path, PathBuf};

use eqm::endpoint::{moments, residual, solve_endpoints, SolveReport};
use eqm::eta::EtaEvaluator;
use eqm::graph::build_critical_graph_with;
use eqm::mask::{stable_land_mask, Window};
use eqm::measure::{lagrange_multiplier, EquilibriumMeasure};
use eqm::regime::{classify_cached, ClassVerdict, RegimeOptions};
use eqm::seeds::{seed_list, SeedCache};
use eqm::{EndpointSet, EqmError, Potential, C64};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, JobConfig, Mode, QSpec, SeedKeyword, SeedSpec};
use crate::output::{graph_svg, scan_svg, target, write_json, write_scan_csv, Provenance};
use crate::scan::{run_scan, SCAN_MASK_RESOLUTION};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const SOLVER: i32 = 2;
    pub const AMBIGUOUS: i32 = 3;
    pub const COVERAGE: i32 = 4;
}

/// Scans succeed when at least this fraction of cells is resolved.
pub const MIN_COVERAGE: f64 = 0.9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(String),
    #[error("no unique regular cut count: {0}")]
    Ambiguous(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            RunError::Solver(_) | RunError::Io(_) | RunError::Csv(_) => exit::SOLVER,
            RunError::Ambiguous(_) => exit::AMBIGUOUS,
        }
    }
}

/// A validated job with its command-line settings resolved.
#[derive(Clone, Debug)]
pub struct Job {
    pub mode: Mode,
    pub cfg: JobConfig,
    pub out: PathBuf,
    pub threads: usize,
}

impl Job {
    pub fn new(mode: Mode, cfg: JobConfig, out: Option<PathBuf>, threads: Option<usize>) -> Result<Self, ConfigError> {
        cfg.validate(mode)?;
        let out = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        let threads = threads
            .or(cfg.threads)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if threads == 0 {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        Ok(Self { mode, cfg, out, threads })
    }

    fn potential(&self) -> Potential {
        self.cfg.potential.build().expect("validated")
    }

    fn options(&self) -> RegimeOptions {
        let mut opts = self.cfg.regime_options();
        if self.mode == Mode::Scan {
            opts.multistart_always = false;
            if self.cfg.tolerances.mask_resolution.is_none() {
                opts.mask_resolution = SCAN_MASK_RESOLUTION;
            }
        }
        opts
    }

    fn cache_path(&self) -> Option<&Path> {
        self.cfg.output.cache.as_deref()
    }

    fn load_cache(&self) -> Result<Option<SeedCache>, RunError> {
        let wanted = matches!(self.cfg.seed, SeedSpec::Keyword(SeedKeyword::Cache));
        match self.cache_path() {
            Some(p) if p.exists() => SeedCache::load(p).map(Some).map_err(|e| ConfigError::Invalid(e.to_string()).into()),
            Some(_) => Ok(Some(SeedCache::new())),
            None if wanted => Err(ConfigError::Invalid("seed \"cache\" needs a cache path".into()).into()),
            None => Ok(None),
        }
    }

    fn save_cache(&self, cache: &SeedCache) -> Result<(), RunError> {
        if let Some(p) = self.cache_path() {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            cache.save(p)?;
        }
        Ok(())
    }

    fn explicit_seed(&self) -> Option<EndpointSet> {
        match &self.cfg.seed {
            SeedSpec::Explicit(e) => Some(e.build().expect("validated")),
            SeedSpec::Keyword(_) => None,
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(&self.cfg, self.mode, &self.options())
    }

    pub fn run(&self) -> Result<i32, RunError> {
        match self.mode {
            Mode::Solve => self.run_solve(),
            Mode::Classify => self.run_classify(),
            Mode::Graph => self.run_graph(),
            Mode::Scan => self.run_scan(),
        }
    }

    /// Converged endpoints for the configured q, classifying first for
    /// `"auto"`.
    fn solve(&self, cache: Option<&SeedCache>) -> Result<SolveReport, RunError> {
        let pot = self.potential();
        let opts = self.options();
        let q = match self.cfg.q {
            QSpec::Fixed(q) => q,
            QSpec::Auto(_) => {
                let cl = classify_cached(&pot, cache, &opts);
                let ClassVerdict::Unique(q) = cl.verdict else {
                    return Err(RunError::Ambiguous(format!("{:?}", cl.verdict)));
                };
                let ep = cl.report(q).and_then(|r| r.endpoints.clone()).expect("regular reports carry endpoints");
                return solve_endpoints(&pot, q, &ep, &opts.solver).map_err(|e| RunError::Solver(e.to_string()));
            }
        };
        let explicit = self.explicit_seed();
        let mut last = String::from("no seeds");
        for seed in seed_list(&pot, q, explicit.as_ref(), cache, opts.restarts, &opts.solver) {
            match solve_endpoints(&pot, q, &seed.endpoints, &opts.solver) {
                Ok(r) => return Ok(r),
                Err(e) => last = e.to_string(),
            }
        }
        Err(RunError::Solver(last))
    }

    fn run_solve(&self) -> Result<i32, RunError> {
        let cache = self.load_cache()?;
        let sol = self.solve(cache.as_ref())?;
        let pot = self.potential();
        let opts = self.options();
        let ep = &sol.endpoints;
        let solver = |e: EqmError| RunError::Solver(e.to_string());
        let em = EquilibriumMeasure::new(&pot, ep, opts.solver.quad_tol).map_err(solver)?;
        let out = SolveOutput {
            q: ep.q(),
            endpoints: ep.clone(),
            iterations: sol.iterations,
            residual_norm: sol.residual_norm,
            residual: residual(&pot, ep, opts.solver.quad_tol).map_err(solver)?.0,
            moments: moments(&pot, ep).map_err(solver)?,
            jacobian_condition: sol.jacobian_condition,
            h_coeffs: em.h().coeffs.clone(),
            h_zeros: em.h().zeros.clone(),
            ell: lagrange_multiplier(&pot, ep).ok(),
            cut_masses: em.cut_masses().to_vec(),
            total_mass: em.total_mass(),
        };
        if let Some(mut c) = cache {
            c.insert(&pot, ep);
            self.save_cache(&c)?;
        }
        write_json(&target(&self.out, "solve.json")?, &self.provenance(), &out)?;
        Ok(exit::OK)
    }

    fn run_classify(&self) -> Result<i32, RunError> {
        let pot = self.potential();
        let cache = self.load_cache()?;
        let cl = classify_cached(&pot, cache.as_ref(), &self.options());
        write_json(&target(&self.out, "classify.json")?, &self.provenance(), &cl)?;
        let code = match cl.verdict {
            ClassVerdict::Unique(q) => {
                if let (Some(mut c), Some(ep)) = (cache, cl.report(q).and_then(|r| r.endpoints.clone())) {
                    c.insert(&pot, &ep);
                    self.save_cache(&c)?;
                }
                exit::OK
            }
            _ => {
                eprintln!("eqm: no unique regular cut count ({:?})", cl.verdict);
                exit::AMBIGUOUS
            }
        };
        Ok(code)
    }

    fn run_graph(&self) -> Result<i32, RunError> {
        let cache = self.load_cache()?;
        let sol = self.solve(cache.as_ref())?;
        let pot = self.potential();
        let opts = self.options();
        let ev = EtaEvaluator::with_tolerance(&pot, &sol.endpoints, opts.solver.quad_tol)
            .map_err(|e| RunError::Solver(e.to_string()))?;
        let prov = self.provenance();
        let graph = match build_critical_graph_with(&ev, &opts.trace) {
            Ok(g) => g,
            Err(EqmError::CensusViolation { reason, graph }) => {
                write_json(&target(&self.out, "graph.json")?, &prov, &*graph)?;
                return Err(RunError::Solver(format!("census violation: {reason}; partial graph written")));
            }
            Err(e) => {
                let dump = serde_json::json!({ "error": e.to_string(), "endpoints": sol.endpoints });
                write_json(&target(&self.out, "graph.json")?, &prov, &dump)?;
                return Err(RunError::Solver(e.to_string()));
            }
        };
        let mask = if self.cfg.output.mask {
            let ev = ev.with_cut_polylines(&graph.cut_polylines());
            let window = match &self.cfg.window {
                Some(w) => Window { center: C64::new(w.center[0], w.center[1]), half_width: w.half_width },
                None => Window::around(&ev),
            };
            Some(stable_land_mask(&ev, &window, opts.mask_resolution).map_err(|e| RunError::Solver(e.to_string()))?)
        } else {
            None
        };
        write_json(&target(&self.out, "graph.json")?, &prov, &GraphOutput { graph: &graph, mask: mask.as_ref() })?;
        if self.cfg.output.svg {
            let w = match (&self.cfg.window, &mask) {
                (Some(w), _) => (w.center[0], w.center[1], w.half_width),
                (None, Some(m)) => (m.window.center.re, m.window.center.im, m.window.half_width),
                (None, None) => {
                    let w = Window::around(&ev);
                    (w.center.re, w.center.im, w.half_width)
                }
            };
            std::fs::write(target(&self.out, "graph.svg")?, graph_svg(&prov, &graph, mask.as_ref(), w))?;
        }
        Ok(exit::OK)
    }

    fn run_scan(&self) -> Result<i32, RunError> {
        let spec = self.cfg.scan.clone().expect("validated");
        let base = self.potential();
        let mut cache = self.load_cache()?;
        let res = run_scan(&base, &spec, cache.as_ref(), &self.options(), self.threads, |j| {
            eprintln!("eqm: row {}/{} done", j + 1, spec.im.count)
        })?;
        let prov = self.provenance();
        write_scan_csv(&target(&self.out, "scan.csv")?, &prov, &res, base.max_cuts())?;
        let fraction = res.resolved_fraction();
        let summary = ScanSummary {
            cells: res.cells.len(),
            resolved_fraction: fraction,
            fallback_cells: res.cells.iter().filter(|c| c.fell_back).count(),
            verdict_grid: res.verdict_grid(),
            scan: &res,
        };
        write_json(&target(&self.out, "scan.json")?, &prov, &summary)?;
        if self.cfg.output.svg {
            std::fs::write(target(&self.out, "scan.svg")?, scan_svg(&prov, &res))?;
        }
        if let Some(c) = cache.as_mut() {
            res.fill_cache(&base, c);
            self.save_cache(c)?;
        }
        if fraction >= MIN_COVERAGE {
            Ok(exit::OK)
        } else {
            eprintln!("eqm: only {:.1}% of cells resolved", 100.0 * fraction);
            Ok(exit::COVERAGE)
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    q: usize,
    endpoints: EndpointSet,
    iterations: usize,
    residual_norm: f64,
    residual: Vec<f64>,
    moments: Vec<C64>,
    jacobian_condition: f64,
    h_coeffs: Vec<C64>,
    h_zeros: Vec<C64>,
    ell: Option<C64>,
    cut_masses: Vec<C64>,
    total_mass: C64,
}

#[derive(Serialize)]
struct GraphOutput<'a> {
    graph: &'a eqm::graph::CriticalGraph,
    mask: Option<&'a eqm::mask::StableLandMask>,
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    cells: usize,
    resolved_fraction: f64,
    fallback_cells: usize,
    verdict_grid: String,
    scan: &'a crate::scan::ScanResult,
}
