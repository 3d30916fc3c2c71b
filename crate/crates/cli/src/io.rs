//! On-disk formats: boundary snapshots, grid dumps, the diagnostics CSV,
//! and plain-text polygon input.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), enough to
//! reproduce any f64 bit for bit on re-read.

use aggpatch_core::levelset::{DefiningGrid, GridSpec};
use aggpatch_core::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(tok: &str, what: &str) -> Result<f64, String> {
    tok.parse::<f64>().map_err(|_| format!("{what}: not a number: {tok:?}"))
}

/// One stored boundary state.
///
/// Layout: a single header line
/// `# s=<s> t=<t> area=<a> cx=<x> cy=<y> n=<N>`
/// followed by exactly N lines of `x y` marker coordinates in order.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub s: f64,
    pub t: f64,
    pub area: f64,
    pub centroid: Vec2,
    pub points: Vec<Vec2>,
}

impl Snapshot {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(48 * (self.points.len() + 1));
        let _ = writeln!(
            out,
            "# s={} t={} area={} cx={} cy={} n={}",
            fmt_f64(self.s),
            fmt_f64(self.t),
            fmt_f64(self.area),
            fmt_f64(self.centroid.x),
            fmt_f64(self.centroid.y),
            self.points.len()
        );
        for p in &self.points {
            let _ = writeln!(out, "{} {}", fmt_f64(p.x), fmt_f64(p.y));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("snapshot is empty")?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("#") {
            return Err("snapshot header must start with '#'".into());
        }
        let mut s = None;
        let mut t = None;
        let mut area = None;
        let mut cx = None;
        let mut cy = None;
        let mut n = None;
        for tok in toks {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| format!("snapshot header token {tok:?} is not key=value"))?;
            match key {
                "s" => s = Some(parse_f64(val, "header s")?),
                "t" => t = Some(parse_f64(val, "header t")?),
                "area" => area = Some(parse_f64(val, "header area")?),
                "cx" => cx = Some(parse_f64(val, "header cx")?),
                "cy" => cy = Some(parse_f64(val, "header cy")?),
                "n" => {
                    n = Some(
                        val.parse::<usize>()
                            .map_err(|_| format!("header n: not a count: {val:?}"))?,
                    )
                }
                other => return Err(format!("snapshot header has unknown key {other:?}")),
            }
        }
        let n = n.ok_or("snapshot header is missing n")?;
        let mut points = Vec::with_capacity(n);
        for line in lines {
            let mut it = line.split_whitespace();
            let (Some(xs), Some(ys)) = (it.next(), it.next()) else {
                return Err(format!("marker line needs two coordinates: {line:?}"));
            };
            if it.next().is_some() {
                return Err(format!("marker line has trailing tokens: {line:?}"));
            }
            points.push(Vec2::new(parse_f64(xs, "marker x")?, parse_f64(ys, "marker y")?));
        }
        if points.len() != n {
            return Err(format!("header says n={n} but {} marker lines follow", points.len()));
        }
        Ok(Snapshot {
            s: s.ok_or("snapshot header is missing s")?,
            t: t.ok_or("snapshot header is missing t")?,
            area: area.ok_or("snapshot header is missing area")?,
            centroid: Vec2::new(
                cx.ok_or("snapshot header is missing cx")?,
                cy.ok_or("snapshot header is missing cy")?,
            ),
            points,
        })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), String> {
    std::fs::write(path, snap.to_text())
        .map_err(|e| format!("cannot write snapshot {}: {e}", path.display()))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read snapshot {}: {e}", path.display()))?;
    Snapshot::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Plain-text polygon: one `x y` pair per line, `#` lines and blank lines
/// ignored, vertices in order around the boundary.
pub fn read_polygon(path: &Path) -> Result<Vec<Vec2>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read polygon {}: {e}", path.display()))?;
    let mut pts = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(xs), Some(ys)) = (it.next(), it.next()) else {
            return Err(format!("polygon line needs two coordinates: {line:?}"));
        };
        pts.push(Vec2::new(parse_f64(xs, "polygon x")?, parse_f64(ys, "polygon y")?));
    }
    Ok(pts)
}

/// Fixed column set of the per-step diagnostics CSV.
pub const CSV_HEADER: &str = "s,t,area,area_ratio_error,cx,cy,mu,q,sup_gradv,\
log_bound_ratio,tangent_holder,min_spacing,max_spacing";

/// One diagnostics row. Quantities that are not available for a given run
/// (q and log_bound_ratio without a grid, mu outside `run`) hold NaN and are
/// written as `NaN`.
#[derive(Clone, Copy, Debug)]
pub struct CsvRow {
    pub s: f64,
    pub t: f64,
    pub area: f64,
    pub area_ratio_error: f64,
    pub cx: f64,
    pub cy: f64,
    pub mu: f64,
    pub q: f64,
    pub sup_gradv: f64,
    pub log_bound_ratio: f64,
    pub tangent_holder: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        [
            self.s,
            self.t,
            self.area,
            self.area_ratio_error,
            self.cx,
            self.cy,
            self.mu,
            self.q,
            self.sup_gradv,
            self.log_bound_ratio,
            self.tangent_holder,
            self.min_spacing,
            self.max_spacing,
        ]
        .map(fmt_f64)
        .join(",")
    }

    #[cfg(test)]
    pub fn parse(line: &str) -> Result<Self, String> {
        let vals: Vec<f64> = line
            .split(',')
            .map(|tok| parse_f64(tok.trim(), "csv value"))
            .collect::<Result<_, _>>()?;
        if vals.len() != 13 {
            return Err(format!("csv row has {} columns, want 13", vals.len()));
        }
        Ok(CsvRow {
            s: vals[0],
            t: vals[1],
            area: vals[2],
            area_ratio_error: vals[3],
            cx: vals[4],
            cy: vals[5],
            mu: vals[6],
            q: vals[7],
            sup_gradv: vals[8],
            log_bound_ratio: vals[9],
            tangent_holder: vals[10],
            min_spacing: vals[11],
            max_spacing: vals[12],
        })
    }
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<(), String> {
    let mut out = String::with_capacity(64 + 320 * rows.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write csv {}: {e}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    origin: [f64; 2],
    spacing: f64,
    nx: usize,
    ny: usize,
    s: f64,
}

/// Grid dump: one JSON header line with the lattice parameters and time
/// stamp, then ny rows of nx comma-separated values (row iy=0 first).
pub fn write_grid(path: &Path, grid: &DefiningGrid) -> Result<(), String> {
    let hdr = GridHeader {
        origin: [grid.spec.origin.x, grid.spec.origin.y],
        spacing: grid.spec.spacing,
        nx: grid.spec.nx,
        ny: grid.spec.ny,
        s: grid.s,
    };
    let mut out = serde_json::to_string(&hdr).map_err(|e| e.to_string())?;
    out.push('\n');
    for iy in 0..grid.spec.ny {
        for ix in 0..grid.spec.nx {
            if ix > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(grid.value(ix, iy)));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write grid {}: {e}", path.display()))
}

pub fn read_grid(path: &Path) -> Result<DefiningGrid, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read grid {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let hdr: GridHeader = serde_json::from_str(lines.next().ok_or("grid file is empty")?)
        .map_err(|e| format!("grid header does not parse: {e}"))?;
    let spec = GridSpec {
        origin: Vec2::new(hdr.origin[0], hdr.origin[1]),
        spacing: hdr.spacing,
        nx: hdr.nx,
        ny: hdr.ny,
    };
    let mut values = Vec::with_capacity(hdr.nx * hdr.ny);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            values.push(parse_f64(tok.trim(), "grid value")?);
        }
    }
    DefiningGrid::new(spec, hdr.s, values).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let pts: Vec<Vec2> = (0..16)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / 16.0;
                Vec2::new((1.0 / 3.0) * th.cos(), 1e-7 * th.sin() - 0.123456789012345)
            })
            .collect();
        let snap = Snapshot {
            s: 2.0_f64.ln(),
            t: 0.5,
            area: PI / 9.0,
            centroid: Vec2::new(-1e-300, 7.0 / 11.0),
            points: pts,
        };
        let back = Snapshot::parse(&snap.to_text()).unwrap();
        assert_eq!(back.s.to_bits(), snap.s.to_bits());
        assert_eq!(back.area.to_bits(), snap.area.to_bits());
        assert_eq!(back.centroid.x.to_bits(), snap.centroid.x.to_bits());
        for (a, b) in back.points.iter().zip(&snap.points) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn snapshot_parse_rejects_malformed_input() {
        assert!(Snapshot::parse("").is_err());
        assert!(Snapshot::parse("1.0 2.0\n").is_err());
        // Count mismatch between header and body.
        let bad = "# s=0 t=0 area=1 cx=0 cy=0 n=3\n0 0\n1 0\n";
        assert!(Snapshot::parse(bad).unwrap_err().contains("n=3"));
        let unknown = "# s=0 t=0 area=1 cx=0 cy=0 n=0 extra=1\n";
        assert!(Snapshot::parse(unknown).is_err());
    }

    #[test]
    fn csv_row_format_matches_the_header() {
        assert_eq!(CSV_HEADER.split(',').count(), 13);
        let row = CsvRow {
            s: 0.25,
            t: 1.0 - (-0.25_f64).exp(),
            area: PI,
            area_ratio_error: -3e-9,
            cx: 0.0,
            cy: 0.0,
            mu: 1.13,
            q: f64::NAN,
            sup_gradv: 0.5,
            log_bound_ratio: f64::NAN,
            tangent_holder: 1.2,
            min_spacing: 0.02,
            max_spacing: 0.021,
        };
        let line = row.to_line();
        assert_eq!(line.split(',').count(), 13);
        let back = CsvRow::parse(&line).unwrap();
        assert_eq!(back.s.to_bits(), row.s.to_bits());
        assert!(back.q.is_nan());
        assert_eq!(back.sup_gradv.to_bits(), row.sup_gradv.to_bits());
    }

    #[test]
    fn polygon_reader_skips_comments_and_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("poly.txt");
        std::fs::write(&p, "# square\n0 0\n1 0\n\n1 1\n0 1\n").unwrap();
        let pts = read_polygon(&p).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2], Vec2::new(1.0, 1.0));
    }

    #[test]
    fn grid_round_trip_preserves_values_and_nans() {
        let spec = GridSpec { origin: Vec2::new(-1.0, -2.0), spacing: 0.25, nx: 9, ny: 8 };
        let grid = DefiningGrid::from_fn(spec, 0.75, |p| {
            if p.x > 0.9 {
                f64::NAN
            } else {
                (p.x * 1.7).sin() + p.y / 3.0
            }
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.txt");
        write_grid(&path, &grid).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.spec, grid.spec);
        assert_eq!(back.s.to_bits(), grid.s.to_bits());
        for (a, b) in back.values().iter().zip(grid.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
