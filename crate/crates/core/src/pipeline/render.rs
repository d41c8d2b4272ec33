//! Deterministic top-down SVG drawings of floor plans.

use std::fmt::Write;

use super::FloorPlan;
use crate::dfpg::Trajectory;
use crate::error::Result;

/// Pixels per cell.
pub const CELL_PX: usize = 8;

fn lattice_point(out: &mut String, p: [usize; 2]) {
    let _ = write!(out, "{},{} ", p[0] * CELL_PX, p[1] * CELL_PX);
}

/// Lattice corners of the wall loop, closed (first vertex repeated).
fn wall_vertices(plan: &FloorPlan) -> Result<Vec<[usize; 2]>> {
    let lp = plan.boundary_loop()?;
    let mut v: Vec<[usize; 2]> = lp.corners().iter().map(|&i| lp.segment(i).from).collect();
    if let Some(&first) = v.first() {
        v.push(first);
    }
    Ok(v)
}

/// Maximal rectangles from merging identical horizontal runs of
/// consecutive rows: `(row, col, height, width)`.
fn furniture_rects(plan: &FloorPlan) -> Vec<(usize, usize, usize, usize)> {
    let n = plan.n();
    let f = plan.furniture.to_mask();
    let mut open: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut done = Vec::new();
    for r in 0..n {
        let mut runs = Vec::new();
        let mut c = 0;
        while c < n {
            if f[r * n + c] {
                let start = c;
                while c < n && f[r * n + c] {
                    c += 1;
                }
                runs.push((start, c - start));
            } else {
                c += 1;
            }
        }
        let mut next = Vec::new();
        for rect in open.drain(..) {
            if let Some(k) = runs.iter().position(|&(c0, w)| c0 == rect.1 && w == rect.3) {
                runs.remove(k);
                next.push((rect.0, rect.1, rect.2 + 1, rect.3));
            } else {
                done.push(rect);
            }
        }
        next.extend(runs.into_iter().map(|(c0, w)| (r, c0, 1, w)));
        open = next;
    }
    done.extend(open);
    done.sort();
    done
}

/// SVG with the footprint fill, the wall polyline (corners + 1 vertices),
/// one polyline per door, furniture rectangles and the optional walk.
pub fn render_svg(plan: &FloorPlan, traj: Option<&Trajectory>) -> Result<String> {
    let n = plan.n();
    let size = n * CELL_PX;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect width="{size}" height="{size}" fill="#ffffff"/>"##
    );
    let walls = wall_vertices(plan)?;
    let mut pts = String::new();
    for &p in &walls[..walls.len().saturating_sub(1)] {
        lattice_point(&mut pts, p);
    }
    let _ = writeln!(
        s,
        r##"<polygon class="interior" points="{}" fill="#f2efe6" stroke="none"/>"##,
        pts.trim_end()
    );
    for (r, c, h, w) in furniture_rects(plan) {
        let _ = writeln!(
            s,
            r##"<rect class="furniture" x="{}" y="{}" width="{}" height="{}" fill="#b08d57"/>"##,
            c * CELL_PX,
            r * CELL_PX,
            w * CELL_PX,
            h * CELL_PX
        );
    }
    pts.clear();
    for &p in &walls {
        lattice_point(&mut pts, p);
    }
    let _ = writeln!(
        s,
        r##"<polyline class="walls" points="{}" fill="none" stroke="#222222" stroke-width="3"/>"##,
        pts.trim_end()
    );
    let lp = plan.boundary_loop()?;
    for door in &plan.doors {
        pts.clear();
        lattice_point(&mut pts, lp.segment(door[0]).from);
        for &i in door {
            lattice_point(&mut pts, lp.segment(i).to);
        }
        let _ = writeln!(
            s,
            r##"<polyline class="door" points="{}" fill="none" stroke="#2e8b57" stroke-width="5"/>"##,
            pts.trim_end()
        );
    }
    if let Some(t) = traj {
        let scale = CELL_PX as f64 / plan.grid.cell_size_m;
        pts.clear();
        for p in &t.points {
            let _ = write!(pts, "{:.2},{:.2} ", p[0] * scale, p[1] * scale);
        }
        let _ = writeln!(
            s,
            r##"<polyline class="trajectory" points="{}" fill="none" stroke="#1f5fbf" stroke-width="1"/>"##,
            pts.trim_end()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
