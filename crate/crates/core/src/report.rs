//! Sample dumps and scatter plots.
//!
//! Samples CSV: `chain_id,dim_0,...,dim_{n-1}`, one final `tau_0` per row.
//! Trace CSV: `chain_id,t,dim_0,...`, one row per chain and step, `t = T..0`.
//! Numbers are written in shortest round-trip form, so a dump read back and
//! rewritten is byte-identical.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sampler::ChainTrace;
use crate::trajectory::Trajectory;

fn dim_header(out: &mut String, n: usize) {
    for d in 0..n {
        let _ = write!(out, ",dim_{d}");
    }
    out.push('\n');
}

pub fn write_samples_csv(samples: &[Trajectory]) -> Result<String> {
    let n = samples.first().ok_or(Error::Empty("samples"))?.len();
    let mut out = String::from("chain_id");
    dim_header(&mut out, n);
    for (i, s) in samples.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in s.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// `traces[c][k]` is chain `c` after `k` steps, so `t = T - k`.
pub fn write_trace_csv(traces: &[ChainTrace]) -> Result<String> {
    let first = traces.first().ok_or(Error::Empty("traces"))?;
    let n = first.first().map_or(0, Vec::len);
    let steps = first.len().saturating_sub(1);
    let mut out = String::from("chain_id,t");
    dim_header(&mut out, n);
    for (c, tr) in traces.iter().enumerate() {
        for (k, state) in tr.iter().enumerate() {
            let _ = write!(out, "{c},{}", steps - k);
            for v in state {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub chain_ids: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
    pub dims: usize,
}

impl SampleTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Columns `(a, b)` of every row.
    pub fn points(&self, a: usize, b: usize) -> Result<Vec<[f64; 2]>> {
        if a >= self.dims || b >= self.dims {
            return Err(Error::InvalidParameter(format!(
                "columns ({a}, {b}) out of range for {} dims",
                self.dims
            )));
        }
        Ok(self.rows.iter().map(|r| [r[a], r[b]]).collect())
    }

    /// The last two columns, i.e. the final waypoint of a 2D trajectory.
    pub fn final_points(&self) -> Result<Vec<[f64; 2]>> {
        if self.dims < 2 {
            return Err(Error::InvalidParameter("scatter needs at least two dims".into()));
        }
        self.points(self.dims - 2, self.dims - 1)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        (0..self.dims).map(|d| self.rows.iter().map(|r| r[d]).sum::<f64>() / n).collect()
    }
}

pub fn read_samples_csv(text: &str) -> Result<SampleTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("samples CSV is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"chain_id") || cols.len() < 2 {
        return Err(Error::Parse(format!("line 1: expected header chain_id,dim_0,..., found {header:?}")));
    }
    for (d, c) in cols[1..].iter().enumerate() {
        if *c != format!("dim_{d}") {
            return Err(Error::Parse(format!("line 1: column {} should be dim_{d}, found {c:?}", d + 2)));
        }
    }
    let dims = cols.len() - 1;
    let mut table = SampleTable {
        chain_ids: Vec::new(),
        rows: Vec::new(),
        dims,
    };
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dims + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                i + 1,
                dims + 1,
                fields.len()
            )));
        }
        let id = fields[0]
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("line {}: bad chain_id {:?}", i + 1, fields[0])))?;
        let row = fields[1..]
            .iter()
            .enumerate()
            .map(|(d, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("line {}: dim_{d} is not a finite number: {f:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        table.chain_ids.push(id);
        table.rows.push(row);
    }
    if table.rows.is_empty() {
        return Err(Error::Parse("samples CSV has a header but no rows".into()));
    }
    Ok(table)
}

/// Per-axis mean and standard deviation.
pub fn point_moments(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let n = points.len() as f64;
    let mut mean = [0.0; 2];
    for p in points {
        mean[0] += p[0] / n;
        mean[1] += p[1] / n;
    }
    let mut var = [0.0; 2];
    for p in points {
        for a in 0..2 {
            var[a] += (p[a] - mean[a]).powi(2) / (n - 1.0).max(1.0);
        }
    }
    (mean, var.map(f64::sqrt))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScatterStyle {
    pub title: String,
    pub annotation: String,
    /// Fixed plot bounds `[xmin, xmax, ymin, ymax]`; derived from the data when `None`.
    pub bounds: Option<[f64; 4]>,
}

fn nice_bounds(points: &[[f64; 2]]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in points {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].max(p[0]);
        b[2] = b[2].min(p[1]);
        b[3] = b[3].max(p[1]);
    }
    let half = ((b[1] - b[0]).max(b[3] - b[2]) * 0.55).max(0.05);
    let cx = 0.5 * (b[0] + b[1]);
    let cy = 0.5 * (b[2] + b[3]);
    let r = (half * 10.0).ceil() / 10.0;
    let snap = |c: f64| (c * 10.0).round() / 10.0;
    [snap(cx) - r, snap(cx) + r, snap(cy) - r, snap(cy) + r]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A deterministic SVG scatter in data coordinates with axes, ticks and a mean marker.
pub fn scatter_svg(points: &[[f64; 2]], style: &ScatterStyle) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Empty("scatter points"));
    }
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const M: f64 = 56.0;
    let [x0, x1, y0, y1] = style.bounds.unwrap_or_else(|| nice_bounds(points));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&style.title));
    if !style.annotation.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="38" text-anchor="middle">{}</text>"#, W / 2.0, escape(&style.annotation));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/>"#, sx(xv), H - M, H - M + 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{xv:.2}</text>"#, sx(xv), H - M + 18.0);
        let _ = writeln!(s, r#"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="black"/>"#, sy(yv), M - 5.0, M);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#, M - 8.0, sy(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle">y</text>"#, H / 2.0);
    let _ = writeln!(s, r##"<g fill="#1f5fa8" fill-opacity="0.35">"##);
    for p in points {
        if p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1 {
            continue;
        }
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6"/>"#, sx(p[0]), sy(p[1]));
    }
    s.push_str("</g>\n");
    let (mean, std) = point_moments(points);
    let (mx, my) = (sx(mean[0]), sy(mean[1]));
    let _ = writeln!(s, r##"<path d="M{:.2} {my:.2}H{:.2}M{mx:.2} {:.2}V{:.2}" stroke="#c0392b" stroke-width="2"/>"##, mx - 7.0, mx + 7.0, my - 7.0, my + 7.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">n={} mean=({:.3}, {:.3}) std=({:.3}, {:.3})</text>"#,
        W - M,
        M - 8.0,
        points.len(),
        mean[0],
        mean[1],
        std[0],
        std[1]
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::TrajShape;

    #[test]
    fn samples_round_trip_bytes() {
        let ts = vec![
            Trajectory::new(vec![0.1, -2.5e-9], TrajShape::point(2)).unwrap(),
            Trajectory::new(vec![1.0 / 3.0, 7.0], TrajShape::point(2)).unwrap(),
        ];
        let text = write_samples_csv(&ts).unwrap();
        assert!(text.starts_with("chain_id,dim_0,dim_1\n0,0.1,-0.0000000025\n"));
        let back = read_samples_csv(&text).unwrap();
        assert_eq!(back.rows[1], vec![1.0 / 3.0, 7.0]);
        let again: Vec<Trajectory> = back.rows.into_iter().map(|r| Trajectory::new(r, TrajShape::point(2)).unwrap()).collect();
        assert_eq!(write_samples_csv(&again).unwrap(), text);
    }

    #[test]
    fn malformed_csv_errors() {
        assert!(matches!(read_samples_csv(""), Err(Error::Parse(_))));
        assert!(matches!(read_samples_csv("chain_id,dim_0\n"), Err(Error::Parse(_))));
        let e = read_samples_csv("chain_id,dim_0\n0,1.0\n1,abc\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(read_samples_csv("id,x\n0,1\n").is_err());
        assert!(read_samples_csv("chain_id,dim_0,dim_1\n0,1\n").is_err());
    }

    #[test]
    fn trace_rows_count_down() {
        let tr = vec![vec![vec![1.0], vec![0.5], vec![0.25]]];
        let text = write_trace_csv(&tr).unwrap();
        assert_eq!(text, "chain_id,t,dim_0\n0,2,1\n0,1,0.5\n0,0,0.25\n");
    }

    #[test]
    fn svg_is_deterministic_and_centred() {
        let pts: Vec<[f64; 2]> = (0..200).map(|i| [-1.0 + 0.001 * (i % 17) as f64, 0.002 * (i % 5) as f64]).collect();
        let style = ScatterStyle { title: "w = (1, 0)".into(), annotation: "mcdp".into(), bounds: None };
        let a = scatter_svg(&pts, &style).unwrap();
        assert_eq!(a, scatter_svg(&pts, &style).unwrap());
        assert!(a.contains("mean=(-0.992"));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(scatter_svg(&[], &style).is_err());
    }
}
