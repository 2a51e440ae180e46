//! Region map export: binary PGM raster, SVG component outlines, and a
//! per-class summary.
//!
//! Rasters put axis 0 left to right and axis 1 bottom to top. A 1-D map is a
//! single row; a 3-D map exports the middle slice along axis 2. Gray levels:
//! boundary cells are 0 and class `m` of `M` is `255 - m * 191 / max(M - 1, 1)`
//! (integer division), so classes span 255 down to 64.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use super::grid::RegionMap;

/// Gray level of class `m` among `classes` classes.
pub fn class_gray(m: usize, classes: usize) -> u8 {
    (255 - m * 191 / classes.saturating_sub(1).max(1)) as u8
}

/// Raster dimensions and the slice of the map being drawn.
struct Raster {
    width: usize,
    height: usize,
    layer: usize,
}

impl Raster {
    fn new(map: &RegionMap) -> Self {
        let res = map.spec().resolution();
        let width = res[0];
        let height = res.get(1).copied().unwrap_or(1);
        let layer = res.get(2).map_or(0, |&r| r / 2);
        Self {
            width,
            height,
            layer,
        }
    }

    /// Cell index of pixel `(col, row)`, rows counted from the bottom.
    fn cell(&self, col: usize, row: usize) -> usize {
        (self.layer * self.height + row) * self.width + col
    }
}

/// Writes the map as binary PGM (P5), one byte per cell.
pub fn write_pgm(map: &RegionMap, mut out: impl Write) -> io::Result<()> {
    let r = Raster::new(map);
    write!(out, "P5\n{} {}\n255\n", r.width, r.height)?;
    let mut buf = Vec::with_capacity(r.width * r.height);
    for row in (0..r.height).rev() {
        for col in 0..r.width {
            buf.push(match map.label(r.cell(col, row)) {
                Some(m) => class_gray(m, map.classes()),
                None => 0,
            });
        }
    }
    out.write_all(&buf)
}

/// Writes the map as SVG 1.1 with one `<path>` per component, traced from
/// the component's outline edges in cell units.
pub fn write_svg(map: &RegionMap, mut out: impl Write) -> io::Result<()> {
    let r = Raster::new(map);
    let (w, h) = (r.width, r.height);
    // Directed outline edges per component, counter-clockwise around each
    // cell in y-up coordinates, keyed by start vertex.
    let mut edges: BTreeMap<usize, BTreeMap<(usize, usize), Vec<(usize, usize)>>> = BTreeMap::new();
    let comp_at = |col: isize, row: isize| -> Option<usize> {
        if col < 0 || row < 0 || col as usize >= w || row as usize >= h {
            None
        } else {
            map.component(r.cell(col as usize, row as usize))
        }
    };
    for row in 0..h {
        for col in 0..w {
            let Some(c) = comp_at(col as isize, row as isize) else {
                continue;
            };
            let (ci, ri) = (col as isize, row as isize);
            let e = edges.entry(c).or_default();
            let mut push = |a: (usize, usize), b: (usize, usize)| e.entry(a).or_default().push(b);
            if comp_at(ci, ri - 1) != Some(c) {
                push((col, row), (col + 1, row));
            }
            if comp_at(ci + 1, ri) != Some(c) {
                push((col + 1, row), (col + 1, row + 1));
            }
            if comp_at(ci, ri + 1) != Some(c) {
                push((col + 1, row + 1), (col, row + 1));
            }
            if comp_at(ci - 1, ri) != Some(c) {
                push((col, row + 1), (col, row));
            }
        }
    }

    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )?;
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="black"/>"#)?;
    for (c, mut by_start) in edges {
        let class = map.components()[c].label as usize;
        let g = class_gray(class, map.classes());
        let mut d = String::new();
        while let Some((&start, _)) = by_start.iter().next() {
            let mut cur = start;
            let _ = write!(d, "M{} {}", cur.0, h - cur.1);
            loop {
                let nexts = by_start.get_mut(&cur).expect("outline edges form closed loops");
                let next = nexts.pop().expect("non-empty edge list");
                if nexts.is_empty() {
                    by_start.remove(&cur);
                }
                cur = next;
                if cur == start {
                    d.push('Z');
                    break;
                }
                let _ = write!(d, "L{} {}", cur.0, h - cur.1);
            }
        }
        writeln!(
            out,
            r#"<path id="component-{c}" data-class="{class}" d="{d}" fill="rgb({g},{g},{g})" fill-rule="nonzero" stroke="red" stroke-width="0.25"/>"#
        )?;
    }
    writeln!(out, "</svg>")
}

/// Summary as a JSON array of `{class, components, cells, touches_boundary}`.
pub fn summary_json(map: &RegionMap) -> String {
    let mut s = serde_json::to_string_pretty(&map.summary()).expect("summary serializes");
    s.push('\n');
    s
}

/// One line per class, e.g. `class 1: 2 components, 680 cells, touches boundary`.
pub fn summary_text(map: &RegionMap) -> String {
    let mut s = String::new();
    for c in map.summary() {
        let _ = writeln!(
            s,
            "class {}: {} component{}, {} cells{}",
            c.class,
            c.components,
            if c.components == 1 { "" } else { "s" },
            c.cells,
            if c.touches_boundary { ", touches boundary" } else { "" }
        );
    }
    let _ = writeln!(s, "boundary cells: {}", map.boundary_cells());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{GridSpec, BOUNDARY};

    fn map(res: &[usize], labels: Vec<u32>, classes: usize) -> RegionMap {
        let d = res.len();
        let spec = GridSpec::new(vec![0.0; d], vec![1.0; d], res.to_vec()).unwrap();
        RegionMap::from_labels(spec, classes, labels).unwrap()
    }

    #[test]
    fn gray_levels() {
        assert_eq!(class_gray(0, 1), 255);
        assert_eq!(class_gray(0, 2), 255);
        assert_eq!(class_gray(1, 2), 64);
        assert_eq!(class_gray(2, 3), 64);
        assert_eq!(class_gray(1, 3), 160);
    }

    #[test]
    fn pgm_layout_is_y_up() {
        // bottom row: class 0, boundary; top row: class 1, class 1
        let m = map(&[2, 2], vec![0, BOUNDARY, 1, 1], 2);
        let mut buf = Vec::new();
        write_pgm(&m, &mut buf).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[64, 64, 255, 0]);
    }

    #[test]
    fn pgm_one_and_three_dimensional() {
        let m = map(&[3], vec![0, 1, 0], 2);
        let mut buf = Vec::new();
        write_pgm(&m, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 1\n255\n"));

        let mut labels = vec![0u32; 8];
        labels[4..].fill(1);
        let m = map(&[2, 2, 2], labels, 2);
        let mut buf = Vec::new();
        write_pgm(&m, &mut buf).unwrap();
        assert_eq!(&buf[buf.len() - 4..], &[64, 64, 64, 64]);
    }

    #[test]
    fn svg_has_one_path_per_component() {
        let m = map(&[3, 3], vec![0, 1, 0, 1, 1, 1, 0, 1, 0], 2);
        let mut buf = Vec::new();
        write_svg(&m, &mut buf).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert_eq!(svg.matches("<path").count(), m.components().len());
        assert_eq!(m.components().len(), 5);
        // the plus-shaped class-1 component is a single 12-edge loop
        let plus = svg.lines().find(|l| l.contains(r#"data-class="1""#)).unwrap();
        assert_eq!(plus.matches('Z').count(), 1);
        assert_eq!(plus.matches('L').count(), 11);
    }

    #[test]
    fn svg_traces_holes() {
        let mut labels = vec![0u32; 9];
        labels[4] = 1;
        let m = map(&[3, 3], labels, 2);
        let mut buf = Vec::new();
        write_svg(&m, &mut buf).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        let ring = svg.lines().find(|l| l.contains(r#"data-class="0""#)).unwrap();
        assert_eq!(ring.matches('Z').count(), 2);
    }

    #[test]
    fn summaries() {
        let m = map(&[2, 2], vec![0, BOUNDARY, 1, 1], 2);
        let text = summary_text(&m);
        assert!(text.contains("class 0: 1 component, 1 cells, touches boundary"));
        assert!(text.contains("boundary cells: 1"));
        let v: serde_json::Value = serde_json::from_str(&summary_json(&m)).unwrap();
        assert_eq!(v[1]["components"], 1);
        assert_eq!(v[1]["cells"], 2);
        assert_eq!(v[1]["touches_boundary"], true);
    }
}
