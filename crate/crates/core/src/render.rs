//! Heatmaps (PNG or SVG) and RMSE-versus-counts curves (SVG).
//!
//! PNG heatmaps map one data pixel to one image pixel. The first array axis
//! (signal) runs upward, the second (idler) to the right. Axis calibration
//! in nm is stored in PNG text chunks and drawn as tick labels in SVG.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::container::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::metrics::wrap_phase_unchecked;

pub type Rgb = [u8; 3];

/// Color of masked-out pixels.
pub const MASKED: Rgb = [128, 128, 128];

const VIRIDIS: [Rgb; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    /// Perceptually ordered sequential map, linear in the value.
    Linear,
    /// Hue wheel over (-pi, pi]; values are wrapped first.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteSpec {
    pub palette: Palette,
    /// Value range for the linear palette; data min/max when absent.
    pub range: Option<(f64, f64)>,
}

impl PaletteSpec {
    pub fn linear() -> Self {
        Self { palette: Palette::Linear, range: None }
    }

    pub fn linear_range(lo: f64, hi: f64) -> Self {
        Self { palette: Palette::Linear, range: Some((lo, hi)) }
    }

    pub fn phase() -> Self {
        Self { palette: Palette::Cyclic, range: Some((-PI, PI)) }
    }
}

/// Sequential palette at `t` in [0, 1]; the ends are the extremal colors.
pub fn linear_color(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
}

/// Hue-wheel color of a phase; `-pi` and `pi` give the same color.
pub fn cyclic_color(phase: f64) -> Rgb {
    let t = (wrap_phase_unchecked(phase) + PI) / (2.0 * PI);
    let h = (t * 6.0) % 6.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0f64).round() as u8, (g * 255.0f64).round() as u8, (b * 255.0f64).round() as u8]
}

fn check_inputs(map: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<()> {
    if let Some(m) = mask {
        if m.dim() != map.dim() {
            return Err(Error::ShapeMismatch { expected: map.dim(), actual: m.dim() });
        }
    }
    let visible = |idx: (usize, usize)| mask.is_none_or(|m| m[idx]);
    if let Some((idx, v)) = map.indexed_iter().find(|(idx, v)| visible(*idx) && !v.is_finite()) {
        return Err(Error::NonFinite(format!("heatmap value {v} at {idx:?}")));
    }
    Ok(())
}

/// Value range actually used for the linear palette.
pub fn resolve_range(map: &Array2<f64>, mask: Option<&Array2<bool>>, spec: &PaletteSpec) -> (f64, f64) {
    if let Some(r) = spec.range {
        return r;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (idx, &v) in map.indexed_iter() {
        if mask.is_none_or(|m| m[idx]) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Colors of every pixel, in array layout.
pub fn colorize(map: &Array2<f64>, mask: Option<&Array2<bool>>, spec: &PaletteSpec) -> Result<Array2<Rgb>> {
    check_inputs(map, mask)?;
    let (lo, hi) = resolve_range(map, mask, spec);
    Ok(Array2::from_shape_fn(map.dim(), |idx| {
        if mask.is_some_and(|m| !m[idx]) {
            return MASKED;
        }
        let v = map[idx];
        match spec.palette {
            Palette::Cyclic => cyclic_color(v),
            Palette::Linear => linear_color(if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }),
        }
    }))
}

/// Row-major RGB buffer with the first axis flipped so that it runs upward.
fn raster(colors: &[Array2<Rgb>], gap: usize) -> (usize, usize, Vec<u8>) {
    let rows = colors.iter().map(|c| c.nrows()).max().unwrap_or(0);
    let width: usize = colors.iter().map(|c| c.ncols()).sum::<usize>() + gap * colors.len().saturating_sub(1);
    let mut buf = vec![255u8; rows * width * 3];
    let mut x0 = 0;
    for c in colors {
        let n0 = c.nrows();
        for ((i, j), rgb) in c.indexed_iter() {
            let y = n0 - 1 - i;
            let at = (y * width + x0 + j) * 3;
            buf[at..at + 3].copy_from_slice(rgb);
        }
        x0 += c.ncols() + gap;
    }
    (width, rows, buf)
}

fn axis_text(grid: &FrequencyGrid) -> (String, String) {
    let (n0, n1) = grid.shape();
    (
        format!("{}..{}", grid.signal_wavelength_nm(0), grid.signal_wavelength_nm(n0 - 1)),
        format!("{}..{}", grid.idler_wavelength_nm(0), grid.idler_wavelength_nm(n1 - 1)),
    )
}

fn write_png(path: &Path, width: usize, height: usize, data: &[u8], text: &[(&str, String)]) -> Result<()> {
    let to_err = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let file = fs::File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    for (k, v) in text {
        encoder.add_text_chunk((*k).to_string(), v.clone()).map_err(to_err)?;
    }
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(data).map_err(to_err)?;
    writer.finish().map_err(to_err)?;
    Ok(())
}

fn png_metadata(grid: &FrequencyGrid, spec: &PaletteSpec, range: (f64, f64)) -> Vec<(&'static str, String)> {
    let (sig, idl) = axis_text(grid);
    vec![
        ("signal_axis_nm", sig),
        ("idler_axis_nm", idl),
        ("palette", format!("{:?}", spec.palette).to_lowercase()),
        ("range", format!("{}..{}", range.0, range.1)),
        ("format_version", FORMAT_VERSION.to_string()),
    ]
}

/// Writes a heatmap; the format follows the extension (`.png` or `.svg`).
pub fn render_heatmap(
    map: &Array2<f64>,
    mask: Option<&Array2<bool>>,
    grid: &FrequencyGrid,
    path: impl AsRef<Path>,
    spec: &PaletteSpec,
    title: &str,
) -> Result<()> {
    render_panels(&[(map, mask, title)], grid, path, spec)
}

/// One heatmap panel: values, optional validity mask, title.
pub type Panel<'a> = (&'a Array2<f64>, Option<&'a Array2<bool>>, &'a str);

/// Several heatmaps on a common palette, left to right.
pub fn render_panels(
    panels: &[Panel<'_>],
    grid: &FrequencyGrid,
    path: impl AsRef<Path>,
    spec: &PaletteSpec,
) -> Result<()> {
    let path = path.as_ref();
    if panels.is_empty() {
        return Err(Error::InvalidParameter("nothing to render".into()));
    }
    for (map, _, _) in panels {
        if map.dim() != grid.shape() {
            return Err(Error::ShapeMismatch { expected: grid.shape(), actual: map.dim() });
        }
    }
    for (map, mask, _) in panels {
        check_inputs(map, *mask)?;
    }
    let range = panels
        .iter()
        .map(|(m, k, _)| resolve_range(m, *k, spec))
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
        .expect("non-empty");
    let spec = &PaletteSpec { range: Some(range), ..*spec };
    let colors = panels.iter().map(|(m, k, _)| colorize(m, *k, spec)).collect::<Result<Vec<_>>>()?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => {
            let (w, h, data) = raster(&colors, 1);
            write_png(path, w, h, &data, &png_metadata(grid, spec, range))
        }
        Some("svg") => {
            let titles: Vec<&str> = panels.iter().map(|p| p.2).collect();
            fs::write(path, heatmap_svg(&colors, &titles, grid, spec, range))?;
            Ok(())
        }
        _ => Err(Error::InvalidParameter(format!("{}: heatmaps are written as .png or .svg", path.display()))),
    }
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

const CELL: f64 = 10.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_B: f64 = 50.0;
const MARGIN_T: f64 = 30.0;
const PANEL_GAP: f64 = 90.0;

fn ticks(n: usize) -> Vec<usize> {
    let step = (n / 4).max(1);
    (0..n).step_by(step).chain(std::iter::once(n - 1)).collect::<std::collections::BTreeSet<_>>().into_iter().collect()
}

fn heatmap_svg(colors: &[Array2<Rgb>], titles: &[&str], grid: &FrequencyGrid, spec: &PaletteSpec, range: (f64, f64)) -> String {
    let (n0, n1) = grid.shape();
    let pw = n1 as f64 * CELL;
    let ph = n0 as f64 * CELL;
    let bar_w = 16.0;
    let width = MARGIN_L + colors.len() as f64 * (pw + PANEL_GAP) + bar_w + 60.0;
    let height = MARGIN_T + ph + MARGIN_B;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (p, (c, title)) in colors.iter().zip(titles).enumerate() {
        let x0 = MARGIN_L + p as f64 * (pw + PANEL_GAP);
        let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
        for ((i, j), rgb) in c.indexed_iter() {
            let x = x0 + j as f64 * CELL;
            let y = MARGIN_T + (n0 - 1 - i) as f64 * CELL;
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#, hex(*rgb));
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<rect x="{x0}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, x0 + pw / 2.0, MARGIN_T - 10.0, escape(title));
        for j in ticks(n1) {
            let x = x0 + (j as f64 + 0.5) * CELL;
            let y = MARGIN_T + ph;
            let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{x}" y2="{}" stroke="black"/>"#, y + 4.0);
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{:.2}</text>"#, y + 16.0, grid.idler_wavelength_nm(j));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">idler wavelength (nm)</text>"#, x0 + pw / 2.0, MARGIN_T + ph + 36.0);
        for i in ticks(n0) {
            let y = MARGIN_T + (n0 as f64 - 1.0 - i as f64 + 0.5) * CELL;
            let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#, x0 - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, x0 - 6.0, y + 4.0, grid.signal_wavelength_nm(i));
        }
        let cy = MARGIN_T + ph / 2.0;
        let _ = writeln!(s, r#"<text x="{}" y="{cy}" text-anchor="middle" transform="rotate(-90 {} {cy})">signal wavelength (nm)</text>"#, x0 - 52.0, x0 - 52.0);
    }
    let bx = MARGIN_L + colors.len() as f64 * (pw + PANEL_GAP) - PANEL_GAP + 20.0;
    let steps = 64;
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        let c = match spec.palette {
            Palette::Linear => linear_color(t),
            Palette::Cyclic => cyclic_color(-PI + t * 2.0 * PI),
        };
        let y = MARGIN_T + ph * (1.0 - (k + 1) as f64 / steps as f64);
        let _ = writeln!(s, r#"<rect x="{bx}" y="{y}" width="{bar_w}" height="{}" fill="{}" shape-rendering="crispEdges"/>"#, ph / steps as f64 + 0.5, hex(c));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + bar_w + 4.0, MARGIN_T + 8.0, fmt_num(range.1));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + bar_w + 4.0, MARGIN_T + ph, fmt_num(range.0));
    s.push_str("</svg>\n");
    s
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log plot of mean RMSE against peak counts with one-sigma bars.
///
/// Points with non-positive abscissa or mean are skipped.
pub fn render_curve_svg(points: &[(f64, f64, f64)], path: impl AsRef<Path>, title: &str) -> Result<()> {
    let pts: Vec<_> = points.iter().copied().filter(|&(x, y, _)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()).collect();
    if pts.is_empty() {
        return Err(Error::InvalidParameter("no positive points to plot".into()));
    }
    let (w, h) = (560.0, 400.0);
    let (l, r, t, b) = (80.0, 20.0, 40.0, 60.0);
    let lo_hi = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (xlo, xhi) = lo_hi(&mut pts.iter().map(|p| p.0.log10()));
    let (ylo, yhi) = lo_hi(&mut pts.iter().flat_map(|&(_, m, s)| {
        let low = if m - s > 0.0 { m - s } else { m };
        [low.log10(), (m + s).log10()]
    }));
    let (xlo, xhi) = (xlo.floor(), xhi.ceil().max(xlo.floor() + 1.0));
    let (ylo, yhi) = (ylo.floor(), yhi.ceil().max(ylo.floor() + 1.0));
    let px = |x: f64| l + (x.log10() - xlo) / (xhi - xlo) * (w - l - r);
    let py = |y: f64| h - b - (y.log10() - ylo) / (yhi - ylo) * (h - t - b);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - l - r, h - t - b);
    for d in xlo as i32..=xhi as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, h - b, h - b + 5.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, h - b + 18.0);
    }
    for d in ylo as i32..=yhi as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, l - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">peak coincidence counts</text>"#, l + (w - l - r) / 2.0, h - 18.0);
    let cy = t + (h - t - b) / 2.0;
    let _ = writeln!(s, r#"<text x="22" y="{cy}" text-anchor="middle" transform="rotate(-90 22 {cy})">weighted phase RMSE (rad)</text>"#);
    let line: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.3},{:.3}", px(x), py(y))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#3b518b" stroke-width="1.5"/>"##, line.join(" "));
    for &(x, m, sd) in &pts {
        let (cx, cy) = (px(x), py(m));
        if sd > 0.0 {
            let lo = if m - sd > 0.0 { py(m - sd) } else { cy };
            let _ = writeln!(s, r##"<line x1="{cx:.3}" y1="{lo:.3}" x2="{cx:.3}" y2="{:.3}" stroke="#3b518b"/>"##, py(m + sd));
        }
        let _ = writeln!(s, r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="3.5" fill="#3b518b"/>"##);
    }
    s.push_str("</svg>\n");
    fs::write(path, s)?;
    Ok(())
}
