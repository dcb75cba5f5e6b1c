//! Dot plots of fragments and chains: red for forward-strand similarity,
//! green (drawn with descending y) for reverse-strand similarity.

use std::fmt::Write as _;

use thiserror::Error;

use crate::memfind::{Fragment, Strand};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlotError {
    #[error("fragment {0:?} lies outside the plot")]
    OutOfBounds(Fragment),
    #[error("fragment {0:?} is in the wrong series")]
    WrongStrand(Fragment),
}

/// What to draw. Reverse fragments keep the coordinates they were found in
/// (against the reverse complement of the y sequence); they are mapped back
/// when drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotSpec {
    pub x_id: String,
    pub y_id: String,
    pub x_len: usize,
    pub y_len: usize,
    pub fwd: Vec<Fragment>,
    pub rev: Vec<Fragment>,
    pub title: String,
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), PlotError> {
        for f in &self.fwd {
            if f.strand != Strand::Forward {
                return Err(PlotError::WrongStrand(*f));
            }
        }
        for f in &self.rev {
            if f.strand != Strand::Reverse {
                return Err(PlotError::WrongStrand(*f));
            }
        }
        for f in self.fwd.iter().chain(&self.rev) {
            let inside = |x: usize, y: usize| (1..=self.x_len).contains(&x) && (1..=self.y_len).contains(&y);
            if !inside(f.beg.x, f.beg.y) || !inside(f.end.x, f.end.y) {
                return Err(PlotError::OutOfBounds(*f));
            }
        }
        Ok(())
    }

    /// Endpoints in original sequence coordinates, forward fragments first.
    pub fn segments(&self) -> impl Iterator<Item = (Strand, (f64, f64), (f64, f64))> + '_ {
        self.fwd.iter().chain(&self.rev).map(move |f| {
            let (a, b) = f.plot_endpoints(self.y_len);
            (f.strand, (a.x as f64, a.y as f64), (b.x as f64, b.y as f64))
        })
    }
}

/// Linear map from sequence coordinates to SVG user space. Position 0 sits
/// on the left/bottom edge of the frame and the full length on the
/// right/top edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_len: f64,
    pub y_len: f64,
}

impl Viewport {
    pub const CANVAS: f64 = 800.0;
    pub const MARGIN: f64 = 60.0;

    pub fn for_spec(spec: &PlotSpec) -> Viewport {
        let side = Self::CANVAS - 2.0 * Self::MARGIN;
        Viewport {
            left: Self::MARGIN,
            top: Self::MARGIN,
            width: side,
            height: side,
            x_len: spec.x_len.max(1) as f64,
            y_len: spec.y_len.max(1) as f64,
        }
    }

    pub fn to_svg(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.left + x * self.width / self.x_len,
            self.top + self.height - y * self.height / self.y_len,
        )
    }

    pub fn from_svg(&self, (px, py): (f64, f64)) -> (f64, f64) {
        (
            (px - self.left) * self.x_len / self.width,
            (self.top + self.height - py) * self.y_len / self.height,
        )
    }
}

pub const FORWARD_COLOR: &str = "red";
pub const REVERSE_COLOR: &str = "green";

fn color(strand: Strand) -> &'static str {
    match strand {
        Strand::Forward => FORWARD_COLOR,
        Strand::Reverse => REVERSE_COLOR,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG document using only `rect`, `text` and `line` elements; one `line`
/// per fragment.
pub fn render_svg(spec: &PlotSpec) -> Result<String, PlotError> {
    spec.validate()?;
    let vp = Viewport::for_spec(spec);
    let size = Viewport::CANVAS;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        vp.left, vp.top, vp.width, vp.height
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        size / 2.0,
        vp.top / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{} ({} bp)</text>"#,
        vp.left + vp.width / 2.0,
        vp.top + vp.height + 40.0,
        escape(&spec.x_id),
        spec.x_len
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 {} {})">{} ({} bp)</text>"#,
        vp.left - 30.0,
        vp.top + vp.height / 2.0,
        vp.left - 30.0,
        vp.top + vp.height / 2.0,
        escape(&spec.y_id),
        spec.y_len
    );
    for (tick_x, label) in [(0.0, "0".to_string()), (vp.x_len, spec.x_len.to_string())] {
        let (px, py) = vp.to_svg((tick_x, 0.0));
        let _ = writeln!(
            out,
            r#"<text x="{px:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="middle">{label}</text>"#,
            py + 15.0
        );
    }
    for (tick_y, label) in [(0.0, "0".to_string()), (vp.y_len, spec.y_len.to_string())] {
        let (px, py) = vp.to_svg((0.0, tick_y));
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{py:.3}" font-family="sans-serif" font-size="10" text-anchor="end">{label}</text>"#,
            px - 5.0
        );
    }
    for (strand, a, b) in spec.segments() {
        let (x1, y1) = vp.to_svg(a);
        let (x2, y2) = vp.to_svg(b);
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{}" stroke-width="1.5" stroke-linecap="round"/>"#,
            color(strand)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// A `<line>` element read back from an SVG document.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgLine {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub stroke: String,
}

/// Extract every `<line>` element. Only understands the attribute layout
/// written by [`render_svg`].
pub fn parse_svg_lines(svg: &str) -> Result<Vec<SvgLine>, String> {
    fn attr<'a>(el: &'a str, name: &str) -> Option<&'a str> {
        let key = format!(" {name}=\"");
        let start = el.find(&key)? + key.len();
        let len = el[start..].find('"')?;
        Some(&el[start..start + len])
    }
    let num = |el: &str, name: &str| -> Result<f64, String> {
        attr(el, name)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("line element without numeric {name}"))
    };
    svg.match_indices("<line ")
        .map(|(i, _)| {
            let el = &svg[i..i + svg[i..].find("/>").ok_or("unterminated line element")?];
            Ok(SvgLine {
                from: (num(el, "x1")?, num(el, "y1")?),
                to: (num(el, "x2")?, num(el, "y2")?),
                stroke: attr(el, "stroke").ok_or("line element without stroke")?.to_string(),
            })
        })
        .collect()
}

/// A gnuplot script and its companion data file. The data file holds the
/// fragments in MEM format, forward first, as two index blocks; the script
/// reads it from `data_path`.
pub fn emit_gnuplot(spec: &PlotSpec, data_path: &str, svg_out: &str) -> Result<(String, String), PlotError> {
    spec.validate()?;
    let mut data = String::from("# forward\n");
    for f in &spec.fwd {
        let _ = writeln!(data, "{}\t{}\t{}\t{}\t{}\t{}", f.beg.x, f.end.x, f.beg.y, f.end.y, f.weight, f.strand);
    }
    data.push_str("\n\n# reverse\n");
    for f in &spec.rev {
        let _ = writeln!(data, "{}\t{}\t{}\t{}\t{}\t{}", f.beg.x, f.end.x, f.beg.y, f.end.y, f.weight, f.strand);
    }

    let quote = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
    let mut script = String::new();
    let _ = writeln!(script, "set terminal svg size 800,800");
    let _ = writeln!(script, "set output \"{}\"", quote(svg_out));
    let _ = writeln!(script, "set title \"{}\"", quote(&spec.title));
    let _ = writeln!(script, "set xlabel \"{} ({} bp)\"", quote(&spec.x_id), spec.x_len);
    let _ = writeln!(script, "set ylabel \"{} ({} bp)\"", quote(&spec.y_id), spec.y_len);
    let _ = writeln!(script, "set xrange [0:{}]", spec.x_len);
    let _ = writeln!(script, "set yrange [0:{}]", spec.y_len);
    let _ = writeln!(script, "set size square");
    let mut series = Vec::new();
    if !spec.fwd.is_empty() {
        series.push(format!(
            "\"{}\" index 0 using 1:3:($2-$1):($4-$3) with vectors nohead lc rgb \"{FORWARD_COLOR}\" title \"forward\"",
            quote(data_path)
        ));
    }
    if !spec.rev.is_empty() {
        let flip = spec.y_len + 1;
        series.push(format!(
            "\"{}\" index 1 using 1:({flip}-$3):($2-$1):($3-$4) with vectors nohead lc rgb \"{REVERSE_COLOR}\" title \"reverse\"",
            quote(data_path)
        ));
    }
    if series.is_empty() {
        let _ = writeln!(script, "plot NaN notitle");
    } else {
        let _ = writeln!(script, "plot {}", series.join(", \\\n     "));
    }
    Ok((script, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memfind::{parse_mems, Point};
    use proptest::prelude::*;

    fn spec(fwd: Vec<Fragment>, rev: Vec<Fragment>) -> PlotSpec {
        PlotSpec {
            x_id: "chrA".into(),
            y_id: "chrB".into(),
            x_len: 100,
            y_len: 80,
            fwd,
            rev,
            title: "chrA vs chrB".into(),
        }
    }

    #[test]
    fn empty_plot_has_frame_only() {
        let svg = render_svg(&spec(vec![], vec![])).unwrap();
        assert!(svg.contains("<rect"));
        assert!(svg.contains("chrA (100 bp)"));
        assert!(svg.contains("chrB (80 bp)"));
        assert!(parse_svg_lines(&svg).unwrap().is_empty());
    }

    #[test]
    fn one_forward_fragment() {
        let f = Fragment::new(1, 1, 4, Strand::Forward);
        let s = spec(vec![f], vec![]);
        let svg = render_svg(&s).unwrap();
        let lines = parse_svg_lines(&svg).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].stroke, "red");
        let vp = Viewport::for_spec(&s);
        assert_eq!(lines[0].from, vp.to_svg((1.0, 1.0)));
        assert_eq!(lines[0].to, vp.to_svg((4.0, 4.0)));
    }

    #[test]
    fn reverse_fragment_descends() {
        let r = Fragment::new(10, 5, 6, Strand::Reverse);
        let s = spec(vec![], vec![r]);
        let lines = parse_svg_lines(&render_svg(&s).unwrap()).unwrap();
        assert_eq!(lines[0].stroke, "green");
        let vp = Viewport::for_spec(&s);
        let (a, b) = (vp.from_svg(lines[0].from), vp.from_svg(lines[0].to));
        assert!(b.0 > a.0 && b.1 < a.1);
        assert_eq!((a.1.round() as usize, b.1.round() as usize), (76, 71));
    }

    #[test]
    fn out_of_bounds_and_wrong_series() {
        let f = Fragment::new(98, 1, 4, Strand::Forward);
        assert_eq!(render_svg(&spec(vec![f], vec![])), Err(PlotError::OutOfBounds(f)));
        let r = Fragment::new(1, 1, 4, Strand::Reverse);
        assert_eq!(render_svg(&spec(vec![r], vec![])), Err(PlotError::WrongStrand(r)));
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = spec(
            vec![Fragment::new(1, 1, 10, Strand::Forward), Fragment::new(30, 20, 15, Strand::Forward)],
            vec![Fragment::new(50, 3, 12, Strand::Reverse)],
        );
        assert_eq!(render_svg(&s).unwrap(), render_svg(&s.clone()).unwrap());
    }

    #[test]
    fn escapes_labels() {
        let mut s = spec(vec![], vec![]);
        s.title = "a<b & \"c\"".into();
        assert!(render_svg(&s).unwrap().contains("a&lt;b &amp; &quot;c&quot;"));
    }

    #[test]
    fn gnuplot_data_is_mem_format() {
        let fwd = vec![Fragment::new(1, 1, 10, Strand::Forward), Fragment::new(30, 20, 15, Strand::Forward)];
        let rev = vec![Fragment::new(50, 3, 12, Strand::Reverse)];
        let (script, data) = emit_gnuplot(&spec(fwd.clone(), rev.clone()), "plot.dat", "plot.svg").unwrap();
        let parsed = parse_mems(&data).unwrap();
        assert_eq!(parsed, [fwd, rev].concat());
        assert!(script.contains("index 0") && script.contains("index 1"));
        assert!(script.contains("\"red\"") && script.contains("\"green\""));
        assert!(script.contains("set output \"plot.svg\""));

        let (script, _) = emit_gnuplot(&spec(vec![], vec![]), "plot.dat", "plot.svg").unwrap();
        assert!(script.contains("plot NaN"));
    }

    fn arb_frag(strand: Strand) -> impl Strategy<Value = Fragment> {
        (1usize..=100, 1usize..=80, 1usize..20).prop_map(move |(x, y, len)| {
            let len = len.min(101 - x).min(81 - y);
            Fragment::new(x, y, len, strand)
        })
    }

    proptest! {
        #[test]
        fn svg_round_trip(
            fwd in prop::collection::vec(arb_frag(Strand::Forward), 0..15),
            rev in prop::collection::vec(arb_frag(Strand::Reverse), 0..15),
        ) {
            let s = spec(fwd.clone(), rev.clone());
            let lines = parse_svg_lines(&render_svg(&s).unwrap()).unwrap();
            prop_assert_eq!(lines.len(), fwd.len() + rev.len());
            let vp = Viewport::for_spec(&s);
            for (line, f) in lines.iter().zip(fwd.iter().chain(&rev)) {
                prop_assert_eq!(line.stroke.as_str(), color(f.strand));
                let (a, b) = f.plot_endpoints(s.y_len);
                let back = |p: (f64, f64)| {
                    let (x, y) = vp.from_svg(p);
                    Point { x: x.round() as usize, y: y.round() as usize }
                };
                prop_assert_eq!((back(line.from), back(line.to)), (a, b));
            }
        }
    }
}
