//! Plain-text and SVG serialization of planar layouts.
//!
//! Text format, one record per line, `#` starts a comment:
//!
//! ```text
//! layout patch
//! feed <x> <y>
//! raster <dx> <dy>
//! outline <n>
//! <x> <y>          (n lines)
//! region <n>
//! <x> <y>          (n lines, repeated per region)
//! feature <id> <x0> <y0> <x1> <y1>
//! end
//! ```

use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::design::{DesignKind, Feature, PlanarLayout};
use crate::geom2d::{Polygon, P2};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LayoutIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layout text ended before `end`")]
    Truncated,
}

fn fmt_pt(out: &mut String, p: &P2) {
    let _ = writeln!(out, "{:.6} {:.6}", p.x, p.y);
}

pub fn layout_to_text(layout: &PlanarLayout) -> String {
    let mut out = String::new();
    let kind = match layout.kind {
        DesignKind::Patch => "patch",
        DesignKind::Uwb => "uwb",
    };
    let _ = writeln!(out, "layout {kind}");
    let _ = writeln!(out, "feed {:.6} {:.6}", layout.feed_point.x, layout.feed_point.y);
    let r = layout.raster_direction;
    let _ = writeln!(out, "raster {:.9} {:.9}", r.x, r.y);
    let _ = writeln!(out, "outline {}", layout.substrate_outline.len());
    for p in &layout.substrate_outline.vertices {
        fmt_pt(&mut out, p);
    }
    for region in &layout.conductive_regions {
        let _ = writeln!(out, "region {}", region.len());
        for p in &region.vertices {
            fmt_pt(&mut out, p);
        }
    }
    for f in &layout.features {
        let _ = writeln!(
            out,
            "feature {} {:.6} {:.6} {:.6} {:.6}",
            f.id, f.start.x, f.start.y, f.end.x, f.end.y
        );
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let text = raw.split('#').next().unwrap_or("").trim();
            if !text.is_empty() {
                return Some((i + 1, text.split_whitespace().collect()));
            }
        }
        None
    }
}

fn num(line: usize, tok: &str) -> Result<f64, LayoutIoError> {
    tok.parse().map_err(|_| LayoutIoError::Parse {
        line,
        message: format!("bad number `{tok}`"),
    })
}

fn err(line: usize, message: impl Into<String>) -> LayoutIoError {
    LayoutIoError::Parse {
        line,
        message: message.into(),
    }
}

fn read_points(lines: &mut Lines, count: usize) -> Result<Vec<P2>, LayoutIoError> {
    (0..count)
        .map(|_| {
            let (ln, toks) = lines.next().ok_or(LayoutIoError::Truncated)?;
            if toks.len() != 2 {
                return Err(err(ln, "expected `<x> <y>`"));
            }
            Ok(P2::new(num(ln, toks[0])?, num(ln, toks[1])?))
        })
        .collect()
}

pub fn layout_from_text(text: &str) -> Result<PlanarLayout, LayoutIoError> {
    let mut lines = Lines {
        inner: Box::new(text.lines().enumerate()),
    };
    let mut kind = None;
    let mut feed = None;
    let mut raster = Vector2::y();
    let mut outline = None;
    let mut regions = Vec::new();
    let mut features = Vec::new();
    loop {
        let (ln, toks) = lines.next().ok_or(LayoutIoError::Truncated)?;
        let arity = |n: usize| {
            if toks.len() == n {
                Ok(())
            } else {
                Err(err(ln, format!("`{}` takes {} fields", toks[0], n - 1)))
            }
        };
        match toks[0] {
            "layout" => {
                arity(2)?;
                kind = Some(match toks[1] {
                    "patch" => DesignKind::Patch,
                    "uwb" => DesignKind::Uwb,
                    other => return Err(err(ln, format!("unknown layout kind `{other}`"))),
                });
            }
            "feed" => {
                arity(3)?;
                feed = Some(P2::new(num(ln, toks[1])?, num(ln, toks[2])?));
            }
            "raster" => {
                arity(3)?;
                raster = Vector2::new(num(ln, toks[1])?, num(ln, toks[2])?);
            }
            "outline" | "region" => {
                arity(2)?;
                let n: usize = toks[1].parse().map_err(|_| err(ln, "bad vertex count"))?;
                let poly = Polygon::new(read_points(&mut lines, n)?);
                if toks[0] == "outline" {
                    outline = Some(poly);
                } else {
                    regions.push(poly);
                }
            }
            "feature" => {
                arity(6)?;
                features.push(Feature {
                    id: toks[1].to_string(),
                    start: P2::new(num(ln, toks[2])?, num(ln, toks[3])?),
                    end: P2::new(num(ln, toks[4])?, num(ln, toks[5])?),
                });
            }
            "end" => {
                return Ok(PlanarLayout {
                    kind: kind.ok_or_else(|| err(ln, "missing `layout` record"))?,
                    substrate_outline: outline.ok_or_else(|| err(ln, "missing outline"))?,
                    conductive_regions: regions,
                    feed_point: feed.ok_or_else(|| err(ln, "missing feed"))?,
                    raster_direction: raster,
                    features,
                })
            }
            other => return Err(err(ln, format!("unknown record `{other}`"))),
        }
    }
}

fn svg_path(poly: &Polygon, ymax: f64) -> String {
    let mut d = String::new();
    for (i, p) in poly.vertices.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{:.4},{:.4} ", p.x, ymax - p.y);
    }
    d.push('Z');
    d
}

/// SVG drawing in mm with y flipped so the layout reads upright.
pub fn layout_to_svg(layout: &PlanarLayout) -> String {
    let bb = layout.bbox();
    let (w, h) = (bb.width(), bb.height());
    let ymax = bb.max.y;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}mm" height="{h:.3}mm" viewBox="{:.4} 0 {w:.4} {h:.4}">"#,
        bb.min.x
    );
    let _ = writeln!(
        out,
        r##"  <path d="{}" fill="#e8dcc0" stroke="#555" stroke-width="0.1"/>"##,
        svg_path(&layout.substrate_outline, ymax)
    );
    for region in &layout.conductive_regions {
        let _ = writeln!(
            out,
            r##"  <path d="{}" fill="#b87333" stroke="none"/>"##,
            svg_path(region, ymax)
        );
    }
    let _ = writeln!(
        out,
        r##"  <circle cx="{:.4}" cy="{:.4}" r="0.5" fill="#c00"/>"##,
        layout.feed_point.x,
        ymax - layout.feed_point.y
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{patch_layout, synthesize_patch, uwb_layout, UwbParams};

    #[test]
    fn text_round_trip() {
        let d = synthesize_patch(3e9, 2.7, 1.5).unwrap();
        let lay = patch_layout(&d, 10.0).unwrap();
        let text = layout_to_text(&lay);
        let back = layout_from_text(&text).unwrap();
        assert_eq!(layout_to_text(&back), text);
        assert_eq!(back.conductive_regions.len(), 1);
        assert!((back.conductive_regions[0].area() - lay.conductive_regions[0].area()).abs() < 1e-4);
    }

    #[test]
    fn uwb_round_trip_and_svg() {
        let (lay, _) = uwb_layout(&UwbParams::default()).unwrap();
        let back = layout_from_text(&layout_to_text(&lay)).unwrap();
        assert_eq!(back.conductive_regions.len(), 3);
        assert_eq!(back.features.len(), lay.features.len());
        let svg = layout_to_svg(&lay);
        assert_eq!(svg.matches("<path").count(), 4);
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = layout_from_text("layout patch\nfeed 0 x\n").unwrap_err();
        assert_eq!(
            e,
            LayoutIoError::Parse {
                line: 2,
                message: "bad number `x`".into()
            }
        );
        assert_eq!(layout_from_text("layout patch\n").unwrap_err(), LayoutIoError::Truncated);
    }
}
