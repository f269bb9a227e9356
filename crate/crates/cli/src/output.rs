//! Result files. Every file carries a provenance block: a top-level
//! `provenance` object in JSON, a leading `# provenance:` comment in CSV and
//! a `<metadata id="provenance">` element in SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eqm::graph::{CriticalGraph, EdgeKind, NodeKind};
use eqm::mask::StableLandMask;
use eqm::regime::RegimeOptions;
use serde::{Deserialize, Serialize};

use crate::config::{JobConfig, Mode};
use crate::scan::ScanResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub config_sha256: String,
    pub tolerances: serde_json::Value,
    pub created_unix: u64,
}

impl Provenance {
    pub fn new(cfg: &JobConfig, mode: Mode, opts: &RegimeOptions) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: "eqm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode,
            config_sha256: cfg.hash(),
            tolerances: serde_json::to_value(opts).expect("options serialize"),
            created_unix,
        }
    }

    fn one_line(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }
}

pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, result: &T) -> std::io::Result<()> {
    let doc = serde_json::json!({ "provenance": prov, "result": result });
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("result serializes"))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// Reads the provenance block of a JSON, CSV or SVG output.
pub fn read_provenance(path: &Path) -> Result<Provenance, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let block = match ext {
        "json" => {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            v.get("provenance").cloned().ok_or("no provenance object")?.to_string()
        }
        "csv" => text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# provenance: "))
            .ok_or("no provenance comment")?
            .to_owned(),
        "svg" => {
            let open = "<metadata id=\"provenance\">";
            let start = text.find(open).ok_or("no provenance metadata")? + open.len();
            let end = start + text[start..].find("</metadata>").ok_or("unterminated metadata")?;
            xml_unescape(&text[start..end])
        }
        _ => return Err(format!("unknown output type {ext:?}")),
    };
    serde_json::from_str(&block).map_err(|e| format!("bad provenance: {e}"))
}

/// CSV with one row per cell; endpoint columns cover the largest q.
pub fn write_scan_csv(path: &Path, prov: &Provenance, res: &ScanResult, max_q: usize) -> Result<(), csv::Error> {
    let mut text = format!("# provenance: {}\n", prov.one_line());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["re_coord".into(), "im_coord".into(), "verdict".into(), "q".into()];
    for side in ["a", "b"] {
        for k in 1..=max_q {
            header.push(format!("{side}{k}_re"));
            header.push(format!("{side}{k}_im"));
        }
    }
    header.extend(["residual".into(), "wall_ms".into()]);
    w.write_record(&header)?;
    for c in &res.cells {
        let mut row = vec![format!("{}", c.re), format!("{}", c.im), c.verdict.as_str().into()];
        row.push(c.q.map(|q| q.to_string()).unwrap_or_default());
        for side in 0..2 {
            for k in 0..max_q {
                let z = c.endpoints.as_ref().and_then(|e| if side == 0 { e.a().get(k) } else { e.b().get(k) }).copied();
                row.push(z.map(|z| format!("{:.15e}", z.re)).unwrap_or_default());
                row.push(z.map(|z| format!("{:.15e}", z.im)).unwrap_or_default());
            }
        }
        row.push(c.residual.map(|r| format!("{r:.3e}")).unwrap_or_default());
        row.push(format!("{:.1}", c.wall_ms));
        w.write_record(&row)?;
    }
    let body = w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))?;
    text.push_str(&String::from_utf8(body).expect("csv is utf-8"));
    std::fs::write(path, text)?;
    Ok(())
}

const SIZE: f64 = 640.0;

struct Frame {
    cx: f64,
    cy: f64,
    half: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let s = SIZE / (2.0 * self.half);
        ((x - self.cx + self.half) * s, (self.cy + self.half - y) * s)
    }
}

fn svg_open(prov: &Provenance, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <title>{}</title>\n<metadata id=\"provenance\">{}</metadata>\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        xml_escape(title),
        xml_escape(&prov.one_line())
    )
}

/// Critical graph picture: cuts in red, other trajectories in black, branch
/// points as discs, zeros of `h` as squares, and optionally the stable lands
/// shaded from the mask.
pub fn graph_svg(prov: &Provenance, graph: &CriticalGraph, mask: Option<&StableLandMask>, window: (f64, f64, f64)) -> String {
    let f = Frame { cx: window.0, cy: window.1, half: window.2 };
    let mut s = svg_open(prov, "critical graph");
    if let Some(m) = mask {
        let n = m.resolution;
        let mid = |v: &[f64], k: usize, up: bool| {
            if up {
                if k + 1 <= n { 0.5 * (v[k] + v[k + 1]) } else { v[k] }
            } else if k > 0 {
                0.5 * (v[k] + v[k - 1])
            } else {
                v[k]
            }
        };
        s.push_str("<g fill=\"#bfe3f5\" stroke=\"none\">\n");
        for j in 0..=n {
            for i in 0..=n {
                if m.re_eta[m.index(i, j)] >= 0.0 {
                    continue;
                }
                let (x0, y1) = f.px(mid(&m.xs, i, false), mid(&m.ys, j, true));
                let (x1, y0) = f.px(mid(&m.xs, i, true), mid(&m.ys, j, false));
                let _ = writeln!(s, "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>", x1 - x0, y0 - y1);
            }
        }
        s.push_str("</g>\n");
    }
    for e in &graph.edges {
        let (color, width) = if e.kind == EdgeKind::Cut { ("#c0392b", 2.5) } else { ("#222", 1.0) };
        let pts: Vec<String> = e
            .trajectory
            .points
            .iter()
            .map(|z| {
                let (x, y) = f.px(z.re, z.im);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" data-kind=\"{:?}\" points=\"{}\"/>",
            e.kind,
            pts.join(" ")
        );
    }
    for node in &graph.nodes {
        let (x, y) = f.px(node.position.re, node.position.im);
        match &node.kind {
            NodeKind::Branch { label, .. } => {
                let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"#c0392b\"><title>{label}</title></circle>");
            }
            NodeKind::Zero { .. } => {
                let _ = writeln!(s, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"7\" height=\"7\" fill=\"#2c7a2c\"/>", x - 3.5, y - 3.5);
            }
            NodeKind::Infinity { .. } => {}
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Phase map coloured by the selected q.
pub fn scan_svg(prov: &Provenance, res: &ScanResult) -> String {
    let (nx, ny) = (res.spec.re.count, res.spec.im.count);
    let mut s = svg_open(prov, "phase map");
    let (w, h) = (SIZE / nx as f64, SIZE / ny as f64);
    for j in 0..ny {
        for i in 0..nx {
            let c = res.cell(i, j);
            let color = match c.q {
                Some(1) => "#4f8fc0",
                Some(2) => "#e3a33b",
                Some(3) => "#5aa55a",
                Some(_) => "#9b59b6",
                None if c.verdict == crate::scan::CellVerdict::Ambiguous => "#d62728",
                None => "#cccccc",
            };
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"><title>{} {} {}</title></rect>",
                i as f64 * w,
                (ny - 1 - j) as f64 * h,
                w + 0.05,
                h + 0.05,
                c.re,
                c.im,
                c.verdict.as_str()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// `dir/name`, creating `dir` if needed.
pub fn target(dir: &Path, name: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}
