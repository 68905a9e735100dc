//! SVG heatmaps and line plots of sweep CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("column `{name}` not found (available: {available})")]
    Column { name: String, available: String },
    #[error("no plottable rows")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A CSV file read as text, with `#` comment lines dropped.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, PlotError> {
        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .flat_map(|l| [l, "\n"])
            .collect();
        let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { columns, rows })
    }

    pub fn index(&self, name: &str) -> Result<usize, PlotError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PlotError::Column {
                name: name.to_string(),
                available: self.columns.join(", "),
            })
    }

    fn number(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

/// Anchor colours of a perceptually ordered map, dark to light.
const MAP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (MAP.len() - 1) as f64;
    let i = (t.floor() as usize).min(MAP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (MAP[i], MAP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn fmt(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e4 || x.abs() < 1e-2 {
        format!("{x:.1e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Linear or log10 map from data to pixels.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
    log: bool,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64, log: bool) -> Self {
        let (mut lo, mut hi) = if log {
            (lo.log10(), hi.log10())
        } else {
            (lo, hi)
        };
        if hi - lo < 1e-300 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self {
            lo,
            hi,
            p0,
            p1,
            log,
        }
    }

    fn px(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect()
        } else {
            (0..=4)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
                .collect()
        }
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(out: &mut String, xs: &Scale, ys: &Scale, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in xs.ticks() {
        let x = xs.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            fmt(t)
        );
    }
    for t in ys.ticks() {
        let y = ys.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            fmt(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn range(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    v.fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((a, b)) => Some((a.min(x), b.max(x))),
    })
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[derive(Clone, Debug, Default)]
pub struct HeatmapOptions {
    pub log_x: bool,
    pub log_y: bool,
    /// Draw the contour `z = level`.
    pub contour: Option<f64>,
    pub title: String,
}

/// Heatmap of `z` over the rectilinear grid spanned by the `x` and `y`
/// values. Missing or non-numeric cells are drawn grey.
pub fn heatmap(
    table: &Table,
    x: &str,
    y: &str,
    z: &str,
    opts: &HeatmapOptions,
) -> Result<String, PlotError> {
    let (ix, iy, iz) = (table.index(x)?, table.index(y)?, table.index(z)?);
    let mut cells = BTreeMap::new();
    let mut xv = Vec::new();
    let mut yv = Vec::new();
    for r in 0..table.rows.len() {
        let (Some(a), Some(b)) = (table.number(r, ix), table.number(r, iy)) else {
            continue;
        };
        if (opts.log_x && a <= 0.0) || (opts.log_y && b <= 0.0) {
            continue;
        }
        xv.push(a);
        yv.push(b);
        cells.insert((a.to_bits(), b.to_bits()), table.number(r, iz));
    }
    let xs = sorted_unique(xv);
    let ys = sorted_unique(yv);
    if xs.is_empty() || ys.is_empty() {
        return Err(PlotError::Empty);
    }
    let grid: Vec<Vec<Option<f64>>> = ys
        .iter()
        .map(|&b| {
            xs.iter()
                .map(|&a| cells.get(&(a.to_bits(), b.to_bits())).copied().flatten())
                .collect()
        })
        .collect();
    let (zlo, zhi) = range(grid.iter().flatten().flatten().copied()).unwrap_or((0.0, 1.0));
    let zspan = if zhi > zlo { zhi - zlo } else { 1.0 };

    // Cell edges halfway between samples, in the plotted coordinate.
    let edges = |v: &[f64], log: bool| -> Vec<f64> {
        let t: Vec<f64> = v.iter().map(|&a| if log { a.log10() } else { a }).collect();
        let step = |i: usize| if t.len() > 1 { t[i + 1] - t[i] } else { 1.0 };
        let mut e = vec![t[0] - step(0) / 2.0];
        for i in 0..t.len() - 1 {
            e.push((t[i] + t[i + 1]) / 2.0);
        }
        e.push(t[t.len() - 1] + step(t.len().saturating_sub(2)) / 2.0);
        e.into_iter()
            .map(|a| if log { 10f64.powf(a) } else { a })
            .collect()
    };
    let ex = edges(&xs, opts.log_x);
    let ey = edges(&ys, opts.log_y);
    let sx = Scale::new(ex[0], ex[ex.len() - 1], LEFT, W - RIGHT, opts.log_x);
    let sy = Scale::new(ey[0], ey[ey.len() - 1], H - BOTTOM, TOP, opts.log_y);

    let mut out = String::new();
    let title = if opts.title.is_empty() {
        z
    } else {
        &opts.title
    };
    header(&mut out, title);
    for (j, row) in grid.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let (px0, px1) = (sx.px(ex[i]), sx.px(ex[i + 1]));
            let (py0, py1) = (sy.px(ey[j + 1]), sy.px(ey[j]));
            let fill = match v {
                Some(v) => color((v - zlo) / zspan),
                None => "#bbbbbb".into(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#,
                px1 - px0,
                py1 - py0
            );
        }
    }
    if let Some(level) = opts.contour {
        let pts = |i: usize, j: usize| (sx.px(xs[i]), sy.px(ys[j]));
        for seg in marching_squares(&grid, level) {
            let ((i0, j0), (i1, j1)) = seg;
            let lerp = |(a, b): (f64, f64)| {
                let (ia, fa) = (a.floor() as usize, a.fract());
                let (jb, fb) = (b.floor() as usize, b.fract());
                let (x0, y0) = pts(ia, jb);
                let (x1, _) = pts((ia + 1).min(xs.len() - 1), jb);
                let (_, y1) = pts(ia, (jb + 1).min(ys.len() - 1));
                (x0 + fa * (x1 - x0), y0 + fb * (y1 - y0))
            };
            let (a, b) = (lerp((i0, j0)), lerp((i1, j1)));
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="white" stroke-width="1.5"/>"#,
                a.0, a.1, b.0, b.1
            );
        }
    }
    axes(&mut out, &sx, &sy, x, y);

    // Colour bar.
    let bx = W - RIGHT + 25.0;
    let (top, bot) = (TOP, H - BOTTOM);
    let n = 64;
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let y = bot - (k + 1) as f64 * (bot - top) / n as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{y:.2}" width="18" height="{:.2}" fill="{}"/>"#,
            (bot - top) / n as f64 + 0.5,
            color(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{bx}" y="{top}" width="18" height="{}" fill="none" stroke="black"/>"#,
        bot - top
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let y = bot - t * (bot - top);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}">{}</text>"#,
            bx + 22.0,
            y + 4.0,
            fmt(zlo + t * zspan)
        );
    }
    if let Some(level) = opts.contour {
        if zhi > zlo && (zlo..=zhi).contains(&level) {
            let y = bot - (level - zlo) / zspan * (bot - top);
            let _ = writeln!(
                out,
                r#"<line x1="{bx}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="white" stroke-width="1.5"/>"#,
                bx + 18.0
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

type Segment = ((f64, f64), (f64, f64));

/// Contour segments of `grid[j][i]` at `level`, in fractional grid indices
/// `(i, j)`. Cells with a missing corner are skipped; saddles are resolved
/// by the cell mean.
pub fn marching_squares(grid: &[Vec<Option<f64>>], level: f64) -> Vec<Segment> {
    let mut segs = Vec::new();
    for j in 0..grid.len().saturating_sub(1) {
        for i in 0..grid[j].len().saturating_sub(1) {
            let (Some(a), Some(b), Some(c), Some(d)) = (
                grid[j][i],
                grid[j][i + 1],
                grid[j + 1][i + 1],
                grid[j + 1][i],
            ) else {
                continue;
            };
            // Corners counter-clockwise from (i, j); edges 0..4 follow them.
            let v = [a, b, c, d];
            let corner = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let crossing = |e: usize| -> Option<(f64, f64)> {
                let (p, q) = (v[e], v[(e + 1) % 4]);
                if (p >= level) == (q >= level) {
                    return None;
                }
                let t = (level - p) / (q - p);
                let (c0, c1) = (corner[e], corner[(e + 1) % 4]);
                Some((
                    i as f64 + c0.0 + t * (c1.0 - c0.0),
                    j as f64 + c0.1 + t * (c1.1 - c0.1),
                ))
            };
            let hits: Vec<(usize, (f64, f64))> =
                (0..4).filter_map(|e| crossing(e).map(|p| (e, p))).collect();
            match hits.len() {
                2 => segs.push((hits[0].1, hits[1].1)),
                4 => {
                    let centre_above = (a + b + c + d) / 4.0 >= level;
                    let a_above = a >= level;
                    if centre_above == a_above {
                        segs.push((hits[0].1, hits[1].1));
                        segs.push((hits[2].1, hits[3].1));
                    } else {
                        segs.push((hits[3].1, hits[0].1));
                        segs.push((hits[1].1, hits[2].1));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

const LINE_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Clone, Debug, Default)]
pub struct LineOptions {
    pub log_x: bool,
    pub log_y: bool,
    /// Split every y column into one series per distinct value of this column.
    pub group: Option<String>,
    pub title: String,
}

/// One polyline per y column (and group), sorted by x.
pub fn lines(
    table: &Table,
    x: &str,
    ys: &[String],
    opts: &LineOptions,
) -> Result<String, PlotError> {
    let ix = table.index(x)?;
    let iys: Vec<usize> = ys
        .iter()
        .map(|y| table.index(y))
        .collect::<Result<_, _>>()?;
    let ig = opts.group.as_deref().map(|g| table.index(g)).transpose()?;

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    if let Some(g) = ig {
        for row in &table.rows {
            if !groups.contains(&row[g]) {
                groups.push(row[g].clone());
            }
        }
    } else {
        groups.push(String::new());
    }
    for (y, &iy) in ys.iter().zip(&iys) {
        for grp in &groups {
            let mut pts: Vec<(f64, f64)> = (0..table.rows.len())
                .filter(|&r| ig.is_none_or(|g| &table.rows[r][g] == grp))
                .filter_map(|r| Some((table.number(r, ix)?, table.number(r, iy)?)))
                .filter(|&(a, b)| (!opts.log_x || a > 0.0) && (!opts.log_y || b > 0.0))
                .collect();
            pts.sort_by(|p, q| p.0.total_cmp(&q.0));
            let name = match (ig, ys.len()) {
                (None, _) => y.clone(),
                (Some(g), 1) => format!("{}={grp}", table.columns[g]),
                (Some(g), _) => format!("{y} {}={grp}", table.columns[g]),
            };
            series.push((name, pts));
        }
    }
    let all = || series.iter().flat_map(|s| s.1.iter());
    let (xlo, xhi) = range(all().map(|p| p.0)).ok_or(PlotError::Empty)?;
    let (ylo, yhi) = range(all().map(|p| p.1)).ok_or(PlotError::Empty)?;
    let pad = if opts.log_y { 0.0 } else { 0.05 * (yhi - ylo) };
    let sx = Scale::new(xlo, xhi, LEFT, W - RIGHT, opts.log_x);
    let sy = Scale::new(ylo - pad, yhi + pad, H - BOTTOM, TOP, opts.log_y);

    let mut out = String::new();
    let title = if opts.title.is_empty() {
        ys.join(", ")
    } else {
        opts.title.clone()
    };
    header(&mut out, &title);
    axes(&mut out, &sx, &sy, x, &ys.join(", "));
    for (k, (name, pts)) in series.iter().enumerate() {
        let c = LINE_COLORS[k % LINE_COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", sx.px(a), sy.px(b)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = W - RIGHT + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="{c}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 14.0,
            ly - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly:.1}" font-size="10">{}</text>"#,
            lx + 18.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
