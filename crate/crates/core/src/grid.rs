//! Cell sets on the square lattice and their induced grid graphs.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point. `x` is the column, `y` the row (rows grow downward in ASCII art).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// The four lattice neighbours, in a fixed order.
    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x, self.y - 1),
        ]
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell::new(x, y)
    }
}

/// An `rows x cols` rectangle; both sides at least one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RectShape {
    rows: u32,
    cols: u32,
}

impl RectShape {
    pub fn new(rows: u32, cols: u32) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!(
                "rectangle sides must be positive, got {rows}x{cols}"
            )));
        }
        Ok(RectShape { rows, cols })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn area(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    /// Same rectangle with the shorter side first.
    pub fn oriented(&self) -> Self {
        RectShape {
            rows: self.rows.min(self.cols),
            cols: self.rows.max(self.cols),
        }
    }

    pub fn transposed(&self) -> Self {
        RectShape {
            rows: self.cols,
            cols: self.rows,
        }
    }

    /// Edge count `2lm - l - m` of the rectangular grid.
    pub fn edge_count(&self) -> u64 {
        let (l, m) = (self.rows as u64, self.cols as u64);
        2 * l * m - l - m
    }
}

impl fmt::Display for RectShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for RectShape {
    type Err = Error;

    /// Parses the `LxM` syntax used on the command line.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidShape(format!("expected LxM with positive integers, got {s:?}"));
        let (l, m) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let rows = l.trim().parse::<u32>().map_err(|_| bad())?;
        let cols = m.trim().parse::<u32>().map_err(|_| bad())?;
        RectShape::new(rows, cols)
    }
}

/// Canonicalization mode for [`canonicalize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    /// Up to translation only.
    Fixed,
    /// Up to translation and the eight symmetries of the square.
    Free,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Fixed => "fixed",
            Symmetry::Free => "free",
        })
    }
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Symmetry::Fixed),
            "free" => Ok(Symmetry::Free),
            other => Err(Error::InvalidArgument(format!(
                "mode must be fixed or free, got {other:?}"
            ))),
        }
    }
}

/// The eight elements of the dihedral group of the square, acting on lattice points.
pub const DIHEDRAL: [fn(Cell) -> Cell; 8] = [
    |c| Cell::new(c.x, c.y),
    |c| Cell::new(-c.y, c.x),
    |c| Cell::new(-c.x, -c.y),
    |c| Cell::new(c.y, -c.x),
    |c| Cell::new(c.y, c.x),
    |c| Cell::new(-c.x, c.y),
    |c| Cell::new(c.x, -c.y),
    |c| Cell::new(-c.y, -c.x),
];

/// A nonempty finite set of cells, translated so the minimum `x` and minimum `y` are both 0.
///
/// Cells are kept sorted by `(x, y)`; two sets are equal iff their sorted lists are.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellSet {
    cells: Vec<Cell>,
}

impl CellSet {
    /// Builds a translation-canonical set, rejecting empty input and duplicates.
    pub fn new<I, C>(cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: Into<Cell>,
    {
        let mut cells: Vec<Cell> = cells.into_iter().map(Into::into).collect();
        if cells.is_empty() {
            return Err(Error::EmptyShape);
        }
        cells.sort_unstable();
        if let Some(w) = cells.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateCell {
                line: None,
                x: w[0].x,
                y: w[0].y,
            });
        }
        Ok(Self::translated(cells))
    }

    /// Shifts an already sorted, duplicate-free, nonempty list.
    fn translated(mut cells: Vec<Cell>) -> Self {
        let min_x = cells.iter().map(|c| c.x).min().expect("nonempty");
        let min_y = cells.iter().map(|c| c.y).min().expect("nonempty");
        if min_x != 0 || min_y != 0 {
            for c in &mut cells {
                c.x -= min_x;
                c.y -= min_y;
            }
        }
        CellSet { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// Number of occupied columns.
    pub fn width(&self) -> u32 {
        self.cells.iter().map(|c| c.x).max().map_or(0, |m| m as u32 + 1)
    }

    /// Number of occupied rows.
    pub fn height(&self) -> u32 {
        self.cells.iter().map(|c| c.y).max().map_or(0, |m| m as u32 + 1)
    }

    /// Image under a lattice map, re-canonicalized by translation.
    pub fn map(&self, f: impl Fn(Cell) -> Cell) -> CellSet {
        let mut cells: Vec<Cell> = self.cells.iter().map(|&c| f(c)).collect();
        cells.sort_unstable();
        Self::translated(cells)
    }

    /// All eight dihedral images, in [`DIHEDRAL`] order.
    pub fn dihedral_images(&self) -> [CellSet; 8] {
        DIHEDRAL.map(|g| self.map(g))
    }

    /// Free canonical form: lexicographically least dihedral image.
    pub fn free_canonical(&self) -> CellSet {
        self.dihedral_images()
            .into_iter()
            .min()
            .expect("eight images")
    }

    /// Whether this set already is its own free canonical form.
    pub fn is_free_canonical(&self) -> bool {
        DIHEDRAL[1..].iter().all(|g| {
            let image = self.map(g);
            self.cells <= image.cells
        })
    }

    /// `Some(shape)` iff the set fills its bounding box.
    pub fn as_rect(&self) -> Option<RectShape> {
        let (w, h) = (self.width(), self.height());
        (w as usize * h as usize == self.len()).then(|| RectShape::new(h, w).expect("nonempty"))
    }

    /// Breadth-first reachability from the first cell.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for nb in self.cells[i].neighbors() {
                if let Ok(j) = self.cells.binary_search(&nb) {
                    if !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        reached == self.len()
    }
}

impl fmt::Display for CellSet {
    /// Compact one-line ASCII art, rows separated by `/`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let art = crate::shape_file::serialize_cells(self, crate::shape_file::ShapeFormat::Ascii);
        f.write_str(&art.trim_end().replace('\n', "/"))
    }
}

/// `{(x, y) : 0 <= x < cols, 0 <= y < rows}`.
pub fn rect_cells(shape: RectShape) -> CellSet {
    let cells = (0..shape.cols as i32)
        .flat_map(|x| (0..shape.rows as i32).map(move |y| Cell::new(x, y)))
        .collect();
    CellSet { cells }
}

/// Canonical representative of an arbitrary nonempty cell collection.
pub fn canonicalize<I, C>(cells: I, mode: Symmetry) -> Result<CellSet>
where
    I: IntoIterator<Item = C>,
    C: Into<Cell>,
{
    let set = CellSet::new(cells)?;
    Ok(match mode {
        Symmetry::Fixed => set,
        Symmetry::Free => set.free_canonical(),
    })
}

pub fn is_connected(cells: &CellSet) -> bool {
    cells.is_connected()
}

/// The subgraph of the square lattice induced by a cell set.
///
/// Vertices are the cells in row-major order (by `y`, then `x`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridGraph {
    vertices: Vec<Cell>,
    adjacency: Vec<Vec<usize>>,
}

impl GridGraph {
    pub fn vertices(&self) -> &[Cell] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbs)| nbs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == self.vertex_count()
    }
}

pub fn induced_graph(cells: &CellSet) -> GridGraph {
    let mut vertices = cells.cells().to_vec();
    vertices.sort_unstable_by_key(|c| (c.y, c.x));
    let index: HashMap<Cell, usize> = vertices.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let adjacency = vertices
        .iter()
        .map(|c| {
            let mut nbs: Vec<usize> = c.neighbors().iter().filter_map(|nb| index.get(nb).copied()).collect();
            nbs.sort_unstable();
            nbs
        })
        .collect();
    GridGraph {
        vertices,
        adjacency,
    }
}

/// Rectangle grid graph `P_rows x P_cols`.
pub fn rect_graph(shape: RectShape) -> GridGraph {
    induced_graph(&rect_cells(shape))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cells: &[(i32, i32)]) -> CellSet {
        CellSet::new(cells.iter().copied()).unwrap()
    }

    #[test]
    fn rect_cells_small() {
        assert_eq!(rect_cells(RectShape::new(1, 1).unwrap()), set(&[(0, 0)]));
        assert_eq!(
            rect_cells(RectShape::new(2, 2).unwrap()),
            set(&[(0, 0), (0, 1), (1, 0), (1, 1)])
        );
        let r = rect_cells(RectShape::new(2, 3).unwrap());
        assert_eq!(r.len(), 6);
        assert_eq!((r.height(), r.width()), (2, 3));
    }

    #[test]
    fn rect_shape_rejects_zero_and_parses() {
        assert!(RectShape::new(0, 3).is_err());
        assert_eq!("3x12".parse::<RectShape>().unwrap(), RectShape::new(3, 12).unwrap());
        assert!("3by4".parse::<RectShape>().is_err());
        assert!("0x4".parse::<RectShape>().is_err());
    }

    #[test]
    fn induced_graph_examples() {
        let g = induced_graph(&set(&[(0, 0)]));
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 0));
        let g = induced_graph(&set(&[(0, 0), (0, 1), (1, 0), (1, 1)]));
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 4));
        assert!((0..4).all(|v| g.degree(v) == 2));
        let g = induced_graph(&set(&[(0, 0), (1, 0), (0, 1)]));
        assert_eq!((g.vertex_count(), g.edge_count()), (3, 2));
    }

    #[test]
    fn vertex_order_is_row_major() {
        let g = rect_graph(RectShape::new(2, 3).unwrap());
        let order: Vec<_> = g.vertices().iter().map(|c| (c.x, c.y)).collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]);
    }

    #[test]
    fn rectangle_edge_formula() {
        for l in 1..=7 {
            for m in 1..=7 {
                let shape = RectShape::new(l, m).unwrap();
                let g = rect_graph(shape);
                assert_eq!(g.vertex_count() as u64, shape.area());
                assert_eq!(g.edge_count() as u64, shape.edge_count());
            }
        }
    }

    #[test]
    fn connectivity() {
        assert!(set(&[(0, 0), (0, 1), (1, 0), (1, 1)]).is_connected());
        assert!(!set(&[(0, 0), (2, 0)]).is_connected());
        assert!(!set(&[(0, 0), (1, 1)]).is_connected());
        for l in 1..=5 {
            for m in 1..=5 {
                assert!(rect_cells(RectShape::new(l, m).unwrap()).is_connected());
            }
        }
    }

    #[test]
    fn canonicalize_examples() {
        let c = canonicalize([(5, 7), (6, 7)], Symmetry::Fixed).unwrap();
        assert_eq!(c, set(&[(0, 0), (1, 0)]));
        let vertical = canonicalize([(3, 3), (3, 4)], Symmetry::Free).unwrap();
        assert_eq!(vertical, set(&[(0, 0), (0, 1)]));
        let square = set(&[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(canonicalize(square.cells().iter().copied(), Symmetry::Free).unwrap(), square);
    }

    #[test]
    fn cellset_rejects_empty_and_duplicates() {
        assert!(matches!(CellSet::new(Vec::<Cell>::new()), Err(Error::EmptyShape)));
        assert!(matches!(
            CellSet::new([(0, 0), (0, 0)]),
            Err(Error::DuplicateCell { x: 0, y: 0, .. })
        ));
    }

    #[test]
    fn as_rect_detects_full_boxes() {
        assert_eq!(rect_cells(RectShape::new(3, 4).unwrap()).as_rect(), Some(RectShape::new(3, 4).unwrap()));
        assert_eq!(set(&[(0, 0), (1, 0), (0, 1)]).as_rect(), None);
    }

    #[test]
    fn is_free_canonical_matches_free_canonical() {
        let l = set(&[(0, 0), (0, 1), (0, 2), (1, 2)]);
        for img in l.dihedral_images() {
            assert_eq!(img.is_free_canonical(), img == img.free_canonical());
        }
    }

    #[test]
    fn display_is_ascii_rows() {
        assert_eq!(set(&[(0, 0), (1, 0), (0, 1)]).to_string(), "##/#.");
    }
}
