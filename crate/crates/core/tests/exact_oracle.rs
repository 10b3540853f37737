//! Determinant counts against the subset brute force, on every small connected shape.

use gridtree_core::exact::{modular::tree_count_modular, tree_count_bruteforce};
use gridtree_core::explorer::for_each_shape;
use gridtree_core::{induced_graph, rect_graph, tree_count_exact, RectShape, Symmetry, TreeCount};

#[test]
fn every_shape_up_to_eight_cells() {
    let mut checked = 0;
    for area in 1..=8 {
        for_each_shape(area, Symmetry::Fixed, |shape| {
            let g = induced_graph(&shape);
            let brute = tree_count_bruteforce(&g).expect("small shapes stay under the edge guard");
            assert_eq!(tree_count_exact(&g), brute, "{shape}");
            assert_eq!(tree_count_modular(&g), brute, "{shape}");
            checked += 1;
        });
    }
    assert_eq!(checked, 1 + 2 + 6 + 19 + 63 + 216 + 760 + 2725);
}

#[test]
fn trees_have_one_spanning_tree() {
    // every connected shape with |E| = |V| - 1 is itself a tree
    for area in 1..=8 {
        for_each_shape(area, Symmetry::Free, |shape| {
            let g = induced_graph(&shape);
            if g.edge_count() + 1 == g.vertex_count() {
                assert_eq!(tree_count_exact(&g), TreeCount::one(), "{shape}");
            }
        });
    }
}

#[test]
fn small_rectangles() {
    for (l, m, tau) in [(2, 2, 4u64), (2, 3, 15), (3, 3, 192), (3, 4, 2415), (2, 5, 209)] {
        let g = rect_graph(RectShape::new(l, m).unwrap());
        assert_eq!(tree_count_bruteforce(&g).unwrap(), tau.into());
        assert_eq!(tree_count_exact(&g), tau.into());
    }
}
