//! Occupancy grids for one planar slice, with contour and raster extraction.
//!
//! Every extracted path deposits exactly one line width per visited cell, so
//! the printed volume equals the cell volume of the mask it covers.

/// Row-major boolean grid; `(i, j)` is column `i`, row `j`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

/// Clockwise ring of the eight neighbors starting at the west cell.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

pub(crate) type Cell = (usize, usize);

/// A path through cell centers in cell units. `closed` loops return to their
/// first point; open paths already include their half-cell end extensions.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CellPath {
    pub points: Vec<(f64, f64)>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            cells: vec![false; nx * ny],
        }
    }

    pub fn get(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.cells[j as usize * self.nx + i as usize]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[j * self.nx + i] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Occupied cells with at least one empty (or off-grid) 8-neighbor.
    pub fn boundary(&self) -> Grid {
        let mut out = Grid::new(self.nx, self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (ii, jj) = (i as isize, j as isize);
                if self.get(ii, jj) && RING.iter().any(|(di, dj)| !self.get(ii + di, jj + dj)) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn minus(&self, other: &Grid) -> Grid {
        Grid {
            nx: self.nx,
            ny: self.ny,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| *a && !*b)
                .collect(),
        }
    }

    /// Moore-neighbor trace of the contour that starts at `start` with the
    /// empty neighbor `back`. Stops when the first step out of `start` is
    /// about to repeat.
    fn moore(&self, start: Cell, back: (isize, isize)) -> Vec<Cell> {
        let limit = 4 * self.count() + 8;
        let start_i = (start.0 as isize, start.1 as isize);
        let (mut p, mut b) = (start_i, back);
        let mut out = vec![start];
        while out.len() <= limit {
            let d = RING
                .iter()
                .position(|&(di, dj)| (p.0 + di, p.1 + dj) == b)
                .expect("backtrack cell is adjacent");
            let next = (1..=8).map(|s| (d + s) % 8).find_map(|k| {
                let q = (p.0 + RING[k].0, p.1 + RING[k].1);
                self.get(q.0, q.1).then(|| {
                    let prev = RING[(k + 7) % 8];
                    (q, (p.0 + prev.0, p.1 + prev.1))
                })
            });
            let Some((q, nb)) = next else {
                break;
            };
            let qc = (q.0 as usize, q.1 as usize);
            if p == start_i && out.len() > 1 && out[1] == qc {
                out.pop();
                break;
            }
            out.push(qc);
            p = q;
            b = nb;
        }
        out
    }

    /// Perimeter paths covering every boundary cell exactly once.
    pub fn contour_paths(&self) -> Vec<CellPath> {
        let boundary = self.boundary();
        let mut visited = Grid::new(self.nx, self.ny);
        let mut paths = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !boundary.get(i as isize, j as isize) || visited.get(i as isize, j as isize) {
                    continue;
                }
                let (ii, jj) = (i as isize, j as isize);
                let back = [(-1, 0), (0, -1), (1, 0), (0, 1)]
                    .iter()
                    .chain(RING.iter())
                    .map(|&(di, dj)| (ii + di, jj + dj))
                    .find(|&(a, b)| !self.get(a, b))
                    .expect("boundary cell has an empty neighbor");
                let cells = self.moore((i, j), back);
                paths.extend(split_new_runs(&cells, &mut visited, &boundary));
            }
        }
        paths
    }

    /// Horizontal (`along_x`) or vertical runs of occupied cells on the rows
    /// selected by `keep`, as edge-to-edge segments in serpentine order.
    pub fn raster_runs(&self, along_x: bool, keep: impl Fn(usize) -> bool) -> Vec<CellPath> {
        let (rows, cols) = if along_x { (self.ny, self.nx) } else { (self.nx, self.ny) };
        let at = |r: usize, c: usize| {
            if along_x {
                self.get(c as isize, r as isize)
            } else {
                self.get(r as isize, c as isize)
            }
        };
        let mut out = Vec::new();
        let mut forward = true;
        for r in (0..rows).filter(|&r| keep(r)) {
            let mut runs = Vec::new();
            let mut c = 0;
            while c < cols {
                if at(r, c) {
                    let s = c;
                    while c < cols && at(r, c) {
                        c += 1;
                    }
                    runs.push((s as f64, c as f64));
                } else {
                    c += 1;
                }
            }
            if runs.is_empty() {
                continue;
            }
            if !forward {
                runs.reverse();
            }
            let rc = r as f64 + 0.5;
            for (a, b) in runs {
                let (a, b) = if forward { (a, b) } else { (b, a) };
                let pts = if along_x {
                    vec![(a, rc), (b, rc)]
                } else {
                    vec![(rc, a), (rc, b)]
                };
                out.push(CellPath { points: pts });
            }
            forward = !forward;
        }
        out
    }
}

fn center(c: Cell) -> (f64, f64) {
    (c.0 as f64 + 0.5, c.1 as f64 + 0.5)
}

/// Splits a traced contour into paths over boundary cells not yet printed.
/// A contour seen for the first time with no repeats stays a closed loop;
/// otherwise each run of fresh cells becomes an open path extended by half a
/// cell at both ends.
fn split_new_runs(cells: &[Cell], visited: &mut Grid, boundary: &Grid) -> Vec<CellPath> {
    let fresh: Vec<bool> = {
        let mut seen = visited.clone();
        cells
            .iter()
            .map(|&(i, j)| {
                let ok = boundary.get(i as isize, j as isize) && !seen.get(i as isize, j as isize);
                seen.set(i, j, true);
                ok
            })
            .collect()
    };
    for &(i, j) in cells {
        if boundary.get(i as isize, j as isize) {
            visited.set(i, j, true);
        }
    }
    let closes = cells.len() > 1 && {
        let (a, b) = (cells[0], cells[cells.len() - 1]);
        a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
    };
    if fresh.iter().all(|f| *f) && closes {
        let mut pts: Vec<(f64, f64)> = cells.iter().map(|&c| center(c)).collect();
        pts.push(pts[0]);
        return vec![CellPath { points: pts }];
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k < cells.len() {
        if !fresh[k] {
            k += 1;
            continue;
        }
        let s = k;
        while k < cells.len() && fresh[k] {
            k += 1;
        }
        out.push(open_path(&cells[s..k]));
    }
    out
}

fn open_path(run: &[Cell]) -> CellPath {
    let mut pts: Vec<(f64, f64)> = run.iter().map(|&c| center(c)).collect();
    let extend = |from: (f64, f64), to: (f64, f64)| {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let n = dx.hypot(dy);
        (to.0 + 0.5 * dx / n, to.1 + 0.5 * dy / n)
    };
    if pts.len() == 1 {
        let (x, y) = pts[0];
        return CellPath {
            points: vec![(x - 0.5, y), (x + 0.5, y)],
        };
    }
    let head = extend(pts[1], pts[0]);
    let tail = extend(pts[pts.len() - 2], pts[pts.len() - 1]);
    pts.insert(0, head);
    pts.push(tail);
    CellPath { points: pts }
}

#[cfg(test)]
impl CellPath {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum()
    }
}
