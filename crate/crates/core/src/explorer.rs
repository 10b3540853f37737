//! Exhaustive search over connected cell sets of a fixed area.
//!
//! Shapes are produced by Redelmeier's algorithm: grow from the origin, only
//! ever adding cells from the half-plane `y > 0 || (y == 0 && x >= 0)`, and
//! never re-offering a cell that an earlier sibling branch already considered.
//! Every fixed polyomino is produced exactly once, with the origin as its
//! lowest-leftmost cell. The search tree is cut at a fixed depth into work
//! units that can run on any number of threads; results are merged in unit
//! order so reports do not depend on the thread count.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{tree_count_exact, TreeCount};
use crate::grid::{induced_graph, rect_graph, Cell, CellSet, RectShape, Symmetry};
use crate::spectral::tau_product_log;

/// Largest area explored without an explicit override.
pub const DEFAULT_MAX_EXPLORE_AREA: u64 = 12;

/// Depth at which the search tree is cut into work units.
const SPLIT_DEPTH: usize = 5;

/// Search state of Redelmeier's algorithm over a padded grid.
#[derive(Clone, Debug)]
struct Redelmeier {
    area: usize,
    width: usize,
    seen: Vec<bool>,
    poly: Vec<Cell>,
}

/// A subtree of the enumeration: a partial shape plus the cells it may still grow into.
#[derive(Clone, Debug)]
pub struct WorkUnit {
    state: Redelmeier,
    untried: Vec<Cell>,
}

impl Redelmeier {
    fn new(area: usize) -> Self {
        let width = 2 * area + 1;
        Redelmeier {
            area,
            width,
            seen: vec![false; width * (area + 2)],
            poly: Vec::with_capacity(area),
        }
    }

    fn index(&self, c: Cell) -> usize {
        (c.y as usize + 1) * self.width + (c.x + self.area as i32) as usize
    }

    fn allowed(c: Cell) -> bool {
        c.y > 0 || (c.y == 0 && c.x >= 0)
    }

    /// Depth-first growth. `visit` sees each complete shape and returns `false` to stop.
    fn grow(&mut self, untried: &mut Vec<Cell>, visit: &mut dyn FnMut(&[Cell]) -> bool) -> bool {
        while let Some(cell) = untried.pop() {
            self.poly.push(cell);
            let keep_going = if self.poly.len() == self.area {
                visit(&self.poly)
            } else {
                let mut next = untried.clone();
                let (added, count) = self.offer_neighbors(cell, &mut next);
                let go = self.grow(&mut next, visit);
                self.forget(&added[..count]);
                go
            };
            self.poly.pop();
            if !keep_going {
                return false;
            }
        }
        true
    }

    /// Pushes the unseen allowed neighbours of `cell` and marks them seen.
    fn offer_neighbors(&mut self, cell: Cell, next: &mut Vec<Cell>) -> ([Cell; 4], usize) {
        let mut added = [cell; 4];
        let mut count = 0;
        for nb in cell.neighbors() {
            if Self::allowed(nb) {
                let i = self.index(nb);
                if !self.seen[i] {
                    self.seen[i] = true;
                    next.push(nb);
                    added[count] = nb;
                    count += 1;
                }
            }
        }
        (added, count)
    }

    fn forget(&mut self, cells: &[Cell]) {
        for &c in cells {
            let i = self.index(c);
            self.seen[i] = false;
        }
    }

    /// Like [`Self::grow`] but stops at `depth` cells and records the subtree instead.
    fn split(&mut self, untried: &mut Vec<Cell>, depth: usize, out: &mut Vec<WorkUnit>) {
        while let Some(cell) = untried.pop() {
            self.poly.push(cell);
            let mut next = untried.clone();
            let (added, count) = self.offer_neighbors(cell, &mut next);
            if self.poly.len() == depth {
                out.push(WorkUnit {
                    state: self.clone(),
                    untried: next,
                });
            } else {
                self.split(&mut next, depth, out);
            }
            self.forget(&added[..count]);
            self.poly.pop();
        }
    }
}

impl WorkUnit {
    /// Runs the subtree; returns `false` if `visit` asked to stop.
    pub fn for_each(mut self, visit: &mut dyn FnMut(&[Cell]) -> bool) -> bool {
        self.state.grow(&mut self.untried, visit)
    }
}

/// Cuts the enumeration of `area`-cell shapes into independent subtrees, in a fixed order.
pub fn work_units(area: usize) -> Vec<WorkUnit> {
    assert!(area >= 1, "area must be positive");
    let mut root = Redelmeier::new(area);
    let origin = Cell::new(0, 0);
    let i = root.index(origin);
    root.seen[i] = true;
    let depth = SPLIT_DEPTH.min(area - 1);
    if depth == 0 {
        return vec![WorkUnit {
            state: root,
            untried: vec![origin],
        }];
    }
    let mut out = Vec::new();
    root.split(&mut vec![origin], depth, &mut out);
    out
}

fn accept(cells: &[Cell], mode: Symmetry) -> Option<CellSet> {
    let set = CellSet::new(cells.iter().copied()).expect("nonempty and distinct");
    match mode {
        Symmetry::Fixed => Some(set),
        Symmetry::Free => set.is_free_canonical().then_some(set),
    }
}

/// Calls `visit` on every connected shape of the given area, once per translation
/// class (`Fixed`) or once per class under the symmetries of the square (`Free`).
///
/// Shapes arrive translation-canonical; in `Free` mode each is its own free canonical form.
pub fn for_each_shape(area: usize, mode: Symmetry, mut visit: impl FnMut(CellSet)) {
    for unit in work_units(area) {
        unit.for_each(&mut |cells| {
            if let Some(set) = accept(cells, mode) {
                visit(set);
            }
            true
        });
    }
}

/// Every shape of the given area, in enumeration order.
pub fn enumerate_shapes(area: usize, mode: Symmetry) -> Vec<CellSet> {
    let mut out = Vec::new();
    for_each_shape(area, mode, |s| out.push(s));
    out
}

pub fn count_shapes(area: usize, mode: Symmetry) -> u64 {
    work_units(area)
        .into_par_iter()
        .map(|unit| {
            let mut n = 0u64;
            unit.for_each(&mut |cells| {
                if accept(cells, mode).is_some() {
                    n += 1;
                }
                true
            });
            n
        })
        .sum()
}

/// Ordered pairs `(v, u)` with `v` in the set and `u` a lattice neighbour outside it.
pub fn boundary_incidences(cells: &CellSet) -> u64 {
    cells
        .cells()
        .iter()
        .flat_map(|c| c.neighbors())
        .filter(|nb| !cells.contains(*nb))
        .count() as u64
}

/// Edge, boundary and cycle-rank quantities of a connected shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundsReport {
    pub cells: u64,
    /// `Some(n)` when the area is the perfect square `n^2`.
    pub n: Option<u64>,
    pub edges: u64,
    pub boundary: u64,
    /// Occupied columns.
    pub w: u64,
    /// Occupied rows.
    pub h: u64,
    /// `E - |S| + 1`.
    pub rho: u64,
    /// `4|S| = 2E + b`.
    pub identity_holds: bool,
    /// `b >= 2w + 2h >= 4 sqrt(wh) >= 4n`; `None` for non-square areas.
    pub chain_holds: Option<bool>,
    /// `E <= 2n(n-1)`; `None` for non-square areas.
    pub edge_bound_holds: Option<bool>,
    /// `rho <= (n-1)^2`; `None` for non-square areas.
    pub cycle_rank_bound_holds: Option<bool>,
    /// `E = 2n(n-1)`.
    pub edge_bound_tight: bool,
    pub is_square: bool,
    /// The edge bound is attained and the shape is the `n x n` square.
    pub equality_is_square: bool,
}

impl BoundsReport {
    /// Every applicable check holds, including "equality only at the square".
    pub fn all_hold(&self) -> bool {
        self.identity_holds
            && self.chain_holds != Some(false)
            && self.edge_bound_holds != Some(false)
            && self.cycle_rank_bound_holds != Some(false)
            && (!self.edge_bound_tight || self.is_square)
    }
}

fn exact_sqrt(v: u64) -> Option<u64> {
    let r = (v as f64).sqrt().round() as u64;
    (r.checked_mul(r) == Some(v)).then_some(r)
}

pub fn bounds_report(cells: &CellSet) -> Result<BoundsReport> {
    if !cells.is_connected() {
        return Err(Error::Disconnected);
    }
    let size = cells.len() as u64;
    let edges = induced_graph(cells).edge_count() as u64;
    let boundary = boundary_incidences(cells);
    let mut xs: Vec<i32> = cells.cells().iter().map(|c| c.x).collect();
    let mut ys: Vec<i32> = cells.cells().iter().map(|c| c.y).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let (w, h) = (xs.len() as u64, ys.len() as u64);
    let rho = edges + 1 - size;
    let n = exact_sqrt(size);
    let is_square = n.is_some_and(|n| w == n && h == n);
    let (chain_holds, edge_bound_holds, cycle_rank_bound_holds, edge_bound_tight) = match n {
        Some(n) => {
            // 2w + 2h >= 4 sqrt(wh) squared is (w - h)^2 >= 0; 4 sqrt(wh) >= 4n is wh >= n^2
            let chain = boundary >= 2 * w + 2 * h
                && (2 * w + 2 * h).pow(2) >= 16 * w * h
                && w * h >= n * n;
            let bound = 2 * n * (n - 1);
            (
                Some(chain),
                Some(edges <= bound),
                Some(rho <= (n - 1) * (n - 1)),
                edges == bound,
            )
        }
        None => (None, None, None, false),
    };
    Ok(BoundsReport {
        cells: size,
        n,
        edges,
        boundary,
        w,
        h,
        rho,
        identity_holds: 4 * size == 2 * edges + boundary,
        chain_holds,
        edge_bound_holds,
        cycle_rank_bound_holds,
        edge_bound_tight,
        is_square,
        equality_is_square: edge_bound_tight && is_square,
    })
}

/// Grows a connected shape by adding uniformly random frontier cells.
pub fn random_connected_shape<R: Rng + ?Sized>(rng: &mut R, size: usize) -> CellSet {
    assert!(size >= 1);
    let mut cells = vec![Cell::new(0, 0)];
    let mut members = std::collections::HashSet::from([Cell::new(0, 0)]);
    let mut frontier: Vec<Cell> = Cell::new(0, 0).neighbors().to_vec();
    while cells.len() < size {
        let pick = frontier.swap_remove(rng.gen_range(0..frontier.len()));
        if !members.insert(pick) {
            continue;
        }
        cells.push(pick);
        frontier.extend(pick.neighbors().into_iter().filter(|nb| !members.contains(nb)));
    }
    CellSet::new(cells).expect("distinct cells")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauBackend {
    /// Exact counts only.
    Exact,
    /// Exact counts, plus a spectral cross-check whenever the shape is a rectangle.
    SpectralForRectangles,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExploreConfig {
    pub n: u32,
    pub mode: Symmetry,
    pub backend: TauBackend,
    /// Refuse areas above [`DEFAULT_MAX_EXPLORE_AREA`] unless set.
    pub allow_big: bool,
    /// Abort (non-exhaustively) after examining this many shapes.
    pub max_shapes: Option<u64>,
}

impl ExploreConfig {
    pub fn new(n: u32, mode: Symmetry) -> Self {
        ExploreConfig {
            n,
            mode,
            backend: TauBackend::Exact,
            allow_big: false,
            max_shapes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub shape: CellSet,
    pub tau: TreeCount,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationReport {
    pub n: u32,
    pub mode: Symmetry,
    pub shapes_examined: u64,
    /// False when the run stopped early at `max_shapes`.
    pub exhaustive: bool,
    pub tau_square: TreeCount,
    pub max_tau: TreeCount,
    /// Every shape attaining `max_tau`, sorted.
    pub argmax_shapes: Vec<CellSet>,
    pub conjecture_holds: bool,
    /// Shapes with more spanning trees than the square (expected empty).
    pub counterexamples: Vec<Counterexample>,
    /// Some maximizer other than the square exists.
    pub non_square_maximizer: bool,
    /// Shapes failing a [`BoundsReport`] check (expected zero).
    pub bounds_failures: u64,
    /// Rectangles whose spectral count disagreed with the exact one (expected zero).
    pub spectral_mismatches: u64,
}

#[derive(Default)]
struct Partial {
    examined: u64,
    max_tau: Option<TreeCount>,
    argmax: Vec<CellSet>,
    counterexamples: Vec<Counterexample>,
    bounds_failures: u64,
    spectral_mismatches: u64,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.examined += other.examined;
        self.bounds_failures += other.bounds_failures;
        self.spectral_mismatches += other.spectral_mismatches;
        self.counterexamples.extend(other.counterexamples);
        match (&self.max_tau, &other.max_tau) {
            (_, None) => {}
            (None, Some(_)) => {
                self.max_tau = other.max_tau;
                self.argmax = other.argmax;
            }
            (Some(a), Some(b)) => {
                if b > a {
                    self.max_tau = other.max_tau;
                    self.argmax = other.argmax;
                } else if b == a {
                    self.argmax.extend(other.argmax);
                }
            }
        }
        self
    }
}

/// Checks `tau(L[S]) <= tau(n x n)` over every connected `S` with `|S| = n^2`.
pub fn explore_conjecture(config: &ExploreConfig) -> Result<ExplorationReport> {
    explore_with_progress(config, |_| {})
}

/// [`explore_conjecture`] reporting the running shape count after each work unit.
pub fn explore_with_progress(
    config: &ExploreConfig,
    progress: impl Fn(u64) + Sync,
) -> Result<ExplorationReport> {
    if config.n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let area = config.n as u64 * config.n as u64;
    if area > DEFAULT_MAX_EXPLORE_AREA && !config.allow_big {
        return Err(Error::Budget(format!(
            "area {area} exceeds the default exhaustive budget of {DEFAULT_MAX_EXPLORE_AREA}; set allow_big (--allow-big) to run it"
        )));
    }
    let square = RectShape::new(config.n, config.n)?;
    let tau_square = tree_count_exact(&rect_graph(square));
    let examined = AtomicU64::new(0);
    let aborted = AtomicBool::new(false);

    let partials: Vec<Partial> = work_units(area as usize)
        .into_par_iter()
        .map(|unit| {
            let mut p = Partial::default();
            if aborted.load(Ordering::Relaxed) {
                return p;
            }
            unit.for_each(&mut |cells| {
                let Some(shape) = accept(cells, config.mode) else {
                    return true;
                };
                if let Some(limit) = config.max_shapes {
                    if examined.fetch_add(1, Ordering::Relaxed) >= limit {
                        aborted.store(true, Ordering::Relaxed);
                        return false;
                    }
                }
                examine(&shape, &tau_square, config.backend, &mut p);
                true
            });
            if config.max_shapes.is_none() {
                examined.fetch_add(p.examined, Ordering::Relaxed);
            }
            progress(examined.load(Ordering::Relaxed));
            p
        })
        .collect();

    let total = partials.into_iter().fold(Partial::default(), Partial::merge);
    let mut argmax = total.argmax;
    argmax.sort();
    argmax.dedup();
    let mut counterexamples = total.counterexamples;
    counterexamples.sort_by(|a, b| b.tau.cmp(&a.tau).then_with(|| a.shape.cmp(&b.shape)));
    let max_tau = total.max_tau.unwrap_or_else(TreeCount::zero);
    Ok(ExplorationReport {
        n: config.n,
        mode: config.mode,
        shapes_examined: total.examined,
        exhaustive: !aborted.load(Ordering::Relaxed),
        non_square_maximizer: argmax.iter().any(|s| s.as_rect() != Some(square)),
        conjecture_holds: counterexamples.is_empty(),
        tau_square,
        max_tau,
        argmax_shapes: argmax,
        counterexamples,
        bounds_failures: total.bounds_failures,
        spectral_mismatches: total.spectral_mismatches,
    })
}

fn examine(shape: &CellSet, tau_square: &TreeCount, backend: TauBackend, p: &mut Partial) {
    p.examined += 1;
    let tau = tree_count_exact(&induced_graph(shape));
    if backend == TauBackend::SpectralForRectangles {
        if let Some(rect) = shape.as_rect() {
            let log = tau_product_log(rect);
            if !log.encloses(tau.ln(), crate::balancing::exact_ln_error(tau.ln())) {
                p.spectral_mismatches += 1;
            }
        }
    }
    if !bounds_report(shape).is_ok_and(|b| b.all_hold()) {
        p.bounds_failures += 1;
    }
    if &tau > tau_square {
        p.counterexamples.push(Counterexample {
            shape: shape.clone(),
            tau: tau.clone(),
        });
    }
    match &p.max_tau {
        Some(m) if &tau < m => {}
        Some(m) if &tau == m => p.argmax.push(shape.clone()),
        _ => {
            p.max_tau = Some(tau);
            p.argmax = vec![shape.clone()];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::rect_cells;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn small_counts() {
        assert_eq!(count_shapes(1, Symmetry::Fixed), 1);
        assert_eq!(count_shapes(1, Symmetry::Free), 1);
        assert_eq!(count_shapes(2, Symmetry::Fixed), 2);
        assert_eq!(count_shapes(2, Symmetry::Free), 1);
        assert_eq!(count_shapes(4, Symmetry::Fixed), 19);
        assert_eq!(count_shapes(4, Symmetry::Free), 5);
    }

    #[test]
    fn shapes_are_valid_and_distinct() {
        for area in 1..=8 {
            for mode in [Symmetry::Fixed, Symmetry::Free] {
                let shapes = enumerate_shapes(area, mode);
                let distinct: HashSet<_> = shapes.iter().collect();
                assert_eq!(distinct.len(), shapes.len());
                for s in &shapes {
                    assert_eq!(s.len(), area);
                    assert!(s.is_connected());
                    let canonical = match mode {
                        Symmetry::Fixed => CellSet::new(s.cells().iter().copied()).unwrap(),
                        Symmetry::Free => s.free_canonical(),
                    };
                    assert_eq!(&canonical, s);
                }
            }
        }
    }

    #[test]
    fn free_classes_cover_fixed_shapes() {
        for area in 1..=7 {
            let free: HashSet<_> = enumerate_shapes(area, Symmetry::Free).into_iter().collect();
            let fixed = enumerate_shapes(area, Symmetry::Fixed);
            let classes: HashSet<_> = fixed.iter().map(CellSet::free_canonical).collect();
            assert_eq!(classes, free);
        }
    }

    #[test]
    fn work_units_partition_the_search() {
        let direct: usize = work_units(7).len();
        assert!(direct > 1);
        let mut all = Vec::new();
        for unit in work_units(7) {
            unit.for_each(&mut |cells| {
                all.push(CellSet::new(cells.iter().copied()).unwrap());
                true
            });
        }
        assert_eq!(all.len(), 760);
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(boundary_incidences(&rect_cells(RectShape::new(1, 1).unwrap())), 4);
        assert_eq!(boundary_incidences(&rect_cells(RectShape::new(2, 2).unwrap())), 8);
        assert_eq!(boundary_incidences(&rect_cells(RectShape::new(1, 3).unwrap())), 8);
    }

    #[test]
    fn bounds_examples() {
        let sq = bounds_report(&rect_cells(RectShape::new(3, 3).unwrap())).unwrap();
        assert_eq!(sq.edges, 12);
        assert!(sq.edge_bound_tight && sq.equality_is_square && sq.all_hold());
        assert_eq!(sq.rho, 4);

        let path = bounds_report(&rect_cells(RectShape::new(1, 9).unwrap())).unwrap();
        assert_eq!((path.edges, path.rho), (8, 0));
        assert!(!path.edge_bound_tight && path.all_hold());

        let two = bounds_report(&rect_cells(RectShape::new(2, 2).unwrap())).unwrap();
        assert_eq!(4 * two.cells, 2 * two.edges + two.boundary);
        assert_eq!((two.edges, two.boundary), (4, 8));

        let gap = CellSet::new([(0, 0), (2, 0)]).unwrap();
        assert_eq!(bounds_report(&gap), Err(Error::Disconnected));

        let odd = bounds_report(&rect_cells(RectShape::new(2, 3).unwrap())).unwrap();
        assert_eq!(odd.n, None);
        assert!(odd.identity_holds && odd.all_hold());
    }

    #[test]
    fn nine_cell_non_squares_have_fewer_edges() {
        for_each_shape(9, Symmetry::Fixed, |s| {
            let b = bounds_report(&s).unwrap();
            if s.as_rect() == Some(RectShape::new(3, 3).unwrap()) {
                assert_eq!(b.edges, 12);
            } else {
                assert!(b.edges < 12);
            }
        });
    }

    #[test]
    fn random_shapes_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for size in 1..40 {
            let s = random_connected_shape(&mut rng, size);
            assert_eq!(s.len(), size);
            assert!(s.is_connected());
        }
    }

    #[test]
    fn explore_small() {
        let r = explore_conjecture(&ExploreConfig::new(1, Symmetry::Fixed)).unwrap();
        assert_eq!((r.shapes_examined, r.max_tau.clone()), (1, TreeCount::one()));
        assert!(r.conjecture_holds && r.exhaustive);

        let r = explore_conjecture(&ExploreConfig::new(2, Symmetry::Fixed)).unwrap();
        assert_eq!(r.shapes_examined, 19);
        assert_eq!(r.max_tau, 4.into());
        assert_eq!(r.argmax_shapes, vec![rect_cells(RectShape::new(2, 2).unwrap())]);
        assert!(!r.non_square_maximizer);
        assert_eq!(r.bounds_failures, 0);
    }

    #[test]
    fn explore_budget() {
        let err = explore_conjecture(&ExploreConfig::new(4, Symmetry::Free)).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
        let mut cfg = ExploreConfig::new(3, Symmetry::Fixed);
        cfg.max_shapes = Some(100);
        let r = explore_conjecture(&cfg).unwrap();
        assert!(!r.exhaustive);
        assert!(r.shapes_examined <= 100);
    }

    #[test]
    fn spectral_backend_cross_checks_rectangles() {
        let mut cfg = ExploreConfig::new(2, Symmetry::Free);
        cfg.backend = TauBackend::SpectralForRectangles;
        let r = explore_conjecture(&cfg).unwrap();
        assert_eq!(r.shapes_examined, 5);
        assert_eq!(r.spectral_mismatches, 0);
    }
}
