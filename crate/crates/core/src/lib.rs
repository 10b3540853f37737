//! Spanning-tree counts of grid graphs.
//!
//! - [`exact`]: Matrix-Tree determinants for any induced subgraph of the square lattice.
//! - [`spectral`]: closed-form log counts for rectangles and the functions behind them.
//! - [`balancing`]: certified comparisons between rectangles of equal area.
//! - [`explorer`]: exhaustive search over polyominoes of a given area.

pub mod balancing;
pub mod error;
pub mod exact;
pub mod explorer;
pub mod grid;
pub mod report;
pub mod shape_file;
pub mod spectral;
pub mod sum;
pub mod verify;

pub use error::{Error, Result};
pub use exact::{tree_count_exact, TreeCount};
pub use grid::{induced_graph, rect_graph, Cell, CellSet, GridGraph, RectShape, Symmetry};
pub use spectral::{tau_product_log, LogTau};
