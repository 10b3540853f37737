//! Exact spanning-tree counts via the Matrix-Tree theorem.
//!
//! The count is the determinant of any reduced Laplacian (one row and column
//! removed). Determinants are computed with fraction-free Bareiss elimination,
//! over `i128` when the Hadamard bound guarantees no overflow and over
//! arbitrary-precision integers otherwise.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::GridGraph;

/// Number of spanning trees of a graph; zero iff disconnected.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeCount(BigUint);

impl TreeCount {
    pub fn new(value: BigUint) -> Self {
        TreeCount(value)
    }

    pub fn zero() -> Self {
        TreeCount(BigUint::zero())
    }

    pub fn one() -> Self {
        TreeCount(BigUint::one())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Natural logarithm, accurate to a few ulps of the result.
    ///
    /// Panics on zero.
    pub fn ln(&self) -> f64 {
        big_ln(&self.0)
    }

    /// Nearest `f64` (may be infinite for astronomically large counts).
    pub fn to_f64(&self) -> f64 {
        let bits = self.0.bits();
        if bits <= 64 {
            return self.0.iter_u64_digits().next().unwrap_or(0) as f64;
        }
        self.ln().exp()
    }
}

impl From<u64> for TreeCount {
    fn from(v: u64) -> Self {
        TreeCount(BigUint::from(v))
    }
}

impl fmt::Display for TreeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl Serialize for TreeCount {
    /// Decimal string, since counts overflow every JSON number type.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

/// `ln(n)` for a positive big integer: `ln(m) + e ln 2` with `n ~ m 2^e`, `m` in `[1, 2)`.
///
/// `m` keeps the top 53 bits, so the result is within `4 eps (|ln n| + 1)`.
pub(crate) fn big_ln(n: &BigUint) -> f64 {
    assert!(!n.is_zero(), "logarithm of zero");
    let bits = n.bits();
    let top = if bits <= 53 {
        n.iter_u64_digits().next().unwrap_or(0) << (53 - bits)
    } else {
        (n >> (bits - 53)).iter_u64_digits().next().unwrap_or(0)
    };
    let mantissa = top as f64 / (1u64 << 52) as f64;
    mantissa.ln() + (bits - 1) as f64 * std::f64::consts::LN_2
}

/// Square integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerMatrix {
    dim: usize,
    entries: Vec<i64>,
}

impl IntegerMatrix {
    pub fn zeros(dim: usize) -> Self {
        IntegerMatrix {
            dim,
            entries: vec![0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        IntegerMatrix {
            dim,
            entries: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, v: i64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim.max(1)).take(self.dim).map(<[i64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `log2` of the Hadamard bound `prod_i ||row_i||`.
    pub fn hadamard_log2(&self) -> f64 {
        self.entries
            .chunks(self.dim.max(1))
            .take(self.dim)
            .map(|row| {
                let norm2: f64 = row.iter().map(|&a| (a as f64) * (a as f64)).sum();
                if norm2 == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    0.5 * norm2.log2()
                }
            })
            .sum()
    }

    /// Exact determinant by Bareiss elimination.
    pub fn determinant(&self) -> BigInt {
        // Every intermediate of Bareiss is a minor, so bounded by the Hadamard bound;
        // products of two such values must stay below 2^127.
        if self.hadamard_log2() < 60.0 {
            let rows = self.entries.iter().map(|&a| a as i128).collect();
            BigInt::from(bareiss(self.dim, rows))
        } else {
            let rows = self.entries.iter().map(|&a| BigInt::from(a)).collect();
            bareiss(self.dim, rows)
        }
    }
}

/// Fraction-free elimination on a row-major `n x n` matrix.
///
/// A zero pivot is replaced by the first row below with a nonzero entry in
/// that column (negating the result); if none exists the determinant is zero.
pub fn bareiss<T>(n: usize, mut m: Vec<T>) -> T
where
    T: Integer + Signed + Clone,
{
    if n == 0 {
        return T::one();
    }
    let mut prev = T::one();
    let mut negate = false;
    for k in 0..n - 1 {
        if m[k * n + k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i * n + k].is_zero()) else {
                return T::zero();
            };
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            negate = !negate;
        }
        let pivot = m[k * n + k].clone();
        for i in k + 1..n {
            let lead = m[i * n + k].clone();
            for j in k + 1..n {
                let v = pivot.clone() * m[i * n + j].clone();
                let v = if lead.is_zero() {
                    v
                } else {
                    v - lead.clone() * m[k * n + j].clone()
                };
                m[i * n + j] = v.div_floor(&prev);
            }
            m[i * n + k] = T::zero();
        }
        prev = pivot;
    }
    let det = m[n * n - 1].clone();
    if negate {
        -det
    } else {
        det
    }
}

/// Degree matrix minus adjacency, with row and column `root` removed.
pub fn laplacian_minor(graph: &GridGraph, root: usize) -> Result<IntegerMatrix> {
    let n = graph.vertex_count();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "Laplacian minor needs at least two vertices".into(),
        ));
    }
    if root >= n {
        return Err(Error::InvalidArgument(format!(
            "root {root} out of range for {n} vertices"
        )));
    }
    let reindex = |v: usize| if v < root { v } else { v - 1 };
    let mut m = IntegerMatrix::zeros(n - 1);
    for u in (0..n).filter(|&u| u != root) {
        let i = reindex(u);
        m.set(i, i, graph.degree(u) as i64);
        for &v in graph.neighbors(u) {
            if v != root {
                m.set(i, reindex(v), -1);
            }
        }
    }
    Ok(m)
}

fn count_from_det(det: BigInt) -> TreeCount {
    let (sign, mag) = det.into_parts();
    debug_assert!(sign != Sign::Minus, "reduced Laplacian determinant is nonnegative");
    TreeCount(mag)
}

/// Spanning-tree count; 1 for a single vertex, 0 for a disconnected graph.
pub fn tree_count_exact(graph: &GridGraph) -> TreeCount {
    tree_count_with_root(graph, 0)
}

/// Same as [`tree_count_exact`] but deleting an arbitrary row/column.
pub fn tree_count_with_root(graph: &GridGraph, root: usize) -> TreeCount {
    match graph.vertex_count() {
        0 => TreeCount::zero(),
        1 => TreeCount::one(),
        _ => count_from_det(laplacian_minor(graph, root).expect("valid root").determinant()),
    }
}

/// Largest edge count the brute-force oracle accepts.
pub const BRUTEFORCE_EDGE_LIMIT: usize = 24;

/// Counts spanning trees by testing every `(|V| - 1)`-edge subset for acyclicity.
///
/// Independent of the determinant path; only for tiny graphs.
pub fn tree_count_bruteforce(graph: &GridGraph) -> Result<TreeCount> {
    let edges = graph.edges();
    if edges.len() > BRUTEFORCE_EDGE_LIMIT {
        return Err(Error::EdgeGuard {
            edges: edges.len(),
            limit: BRUTEFORCE_EDGE_LIMIT,
        });
    }
    let n = graph.vertex_count();
    if n == 0 {
        return Ok(TreeCount::zero());
    }
    let k = n - 1;
    if k > edges.len() {
        return Ok(TreeCount::zero());
    }
    let mut count: u64 = 0;
    let mut parent = vec![0usize; n];
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i;
        }
        // n-1 edges with no cycle span n vertices
        if chosen.iter().all(|&e| union(&mut parent, edges[e].0, edges[e].1)) {
            count += 1;
        }
        if !next_combination(&mut chosen, edges.len()) {
            break;
        }
    }
    Ok(TreeCount::from(count))
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

fn union(parent: &mut [usize], a: usize, b: usize) -> bool {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra == rb {
        return false;
    }
    parent[ra] = rb;
    true
}

/// Advances a sorted `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

pub mod modular {
    //! Multi-prime determinant with CRT recombination.
    //!
    //! Not used by default; it must agree with [`super::tree_count_exact`].

    use super::*;

    /// Primes just below 2^62, descending, found by deterministic Miller-Rabin.
    fn primes(count: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(count);
        let mut p = (1u64 << 62) - 1;
        while out.len() < count {
            if is_prime(p) {
                out.push(p);
            }
            p -= 2;
        }
        out
    }

    fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
        let mut r = 1 % p;
        a %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = mul_mod(r, a, p);
            }
            a = mul_mod(a, a, p);
            e >>= 1;
        }
        r
    }

    pub(crate) fn is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            if n % p == 0 {
                return n == p;
            }
        }
        let (mut d, mut s) = (n - 1, 0);
        while d % 2 == 0 {
            d /= 2;
            s += 1;
        }
        // these bases are deterministic for all 64-bit n
        'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let mut x = pow_mod(a, d, n);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 1..s {
                x = mul_mod(x, x, n);
                if x == n - 1 {
                    continue 'witness;
                }
            }
            return false;
        }
        true
    }

    /// Determinant modulo a prime by Gaussian elimination over GF(p).
    pub fn det_mod(m: &IntegerMatrix, p: u64) -> u64 {
        let n = m.dim();
        let mut a: Vec<u64> = m.entries.iter().map(|&v| v.rem_euclid(p as i64) as u64).collect();
        let mut det = 1u64;
        for k in 0..n {
            let Some(piv) = (k..n).find(|&i| a[i * n + k] != 0) else {
                return 0;
            };
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                det = (p - det) % p;
            }
            let pivot = a[k * n + k];
            det = mul_mod(det, pivot, p);
            let inv = pow_mod(pivot, p - 2, p);
            for i in k + 1..n {
                let f = mul_mod(a[i * n + k], inv, p);
                if f == 0 {
                    continue;
                }
                for j in k..n {
                    let sub = mul_mod(f, a[k * n + j], p);
                    a[i * n + j] = (a[i * n + j] + p - sub) % p;
                }
            }
        }
        det
    }

    /// Exact determinant of a matrix whose determinant is known to be nonnegative.
    pub fn determinant_nonnegative(m: &IntegerMatrix) -> BigUint {
        if m.dim() == 0 {
            return BigUint::one();
        }
        let bound = m.hadamard_log2();
        if bound == f64::NEG_INFINITY {
            return BigUint::zero();
        }
        // each prime contributes just under 62 bits; one spare prime of slack
        let count = (bound / 61.0).ceil() as usize + 1;
        let mut modulus = BigUint::one();
        let mut value = BigUint::zero();
        for p in primes(count) {
            let r = det_mod(m, p);
            // Garner step: value += modulus * ((r - value) * modulus^{-1} mod p)
            let v_mod = (&value % p).iter_u64_digits().next().unwrap_or(0);
            let m_mod = (&modulus % p).iter_u64_digits().next().unwrap_or(0);
            let diff = (r + p - v_mod) % p;
            let coeff = mul_mod(diff, pow_mod(m_mod, p - 2, p), p);
            value += &modulus * coeff;
            modulus *= p;
        }
        value
    }

    pub fn tree_count_modular(graph: &GridGraph) -> TreeCount {
        match graph.vertex_count() {
            0 => TreeCount::zero(),
            1 => TreeCount::one(),
            _ => TreeCount(determinant_nonnegative(&laplacian_minor(graph, 0).expect("two vertices"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{induced_graph, rect_graph, CellSet, RectShape};
    use proptest::prelude::*;

    fn rect(l: u32, m: u32) -> GridGraph {
        rect_graph(RectShape::new(l, m).unwrap())
    }

    #[test]
    fn minors() {
        let c4 = rect(2, 2);
        let m = laplacian_minor(&c4, 0).unwrap();
        assert_eq!(m.dim(), 3);
        assert!((0..3).all(|i| m.get(i, i) == 2));
        assert!(m.is_symmetric());

        let p3 = rect(1, 3);
        let m = laplacian_minor(&p3, 0).unwrap();
        assert_eq!(m.rows(), vec![vec![2, -1], vec![-1, 1]]);

        assert!(laplacian_minor(&rect(1, 1), 0).is_err());
        assert!(laplacian_minor(&p3, 3).is_err());
        assert_eq!(IntegerMatrix::zeros(0).determinant(), BigInt::one());
    }

    #[test]
    fn minor_entries_in_range() {
        let g = rect(4, 5);
        let m = laplacian_minor(&g, 7).unwrap();
        for i in 0..m.dim() {
            assert!((0..=4).contains(&m.get(i, i)));
            for j in (0..m.dim()).filter(|&j| j != i) {
                assert!(matches!(m.get(i, j), 0 | -1));
            }
        }
    }

    #[test]
    fn small_counts() {
        assert_eq!(tree_count_exact(&rect(1, 1)), TreeCount::one());
        for m in 1..20 {
            assert_eq!(tree_count_exact(&rect(1, m)), TreeCount::one());
        }
        assert_eq!(tree_count_exact(&rect(2, 2)), 4.into());
        assert_eq!(tree_count_exact(&rect(2, 3)), 15.into());
        assert_eq!(tree_count_exact(&rect(3, 3)), 192.into());
    }

    #[test]
    fn bruteforce_values() {
        assert_eq!(tree_count_bruteforce(&rect(2, 2)).unwrap(), 4.into());
        // 2x3: 21 subsets of 5 out of 7 edges, 15 of them trees
        assert_eq!(tree_count_bruteforce(&rect(2, 3)).unwrap(), 15.into());
        // 3x3: 495 subsets of 8 out of 12 edges
        assert_eq!(tree_count_bruteforce(&rect(3, 3)).unwrap(), 192.into());
        let gap = induced_graph(&CellSet::new([(0, 0), (2, 0)]).unwrap());
        assert_eq!(tree_count_bruteforce(&gap).unwrap(), TreeCount::zero());
        assert_eq!(tree_count_exact(&gap), TreeCount::zero());
        assert!(matches!(
            tree_count_bruteforce(&rect(4, 5)),
            Err(Error::EdgeGuard { edges: 31, .. })
        ));
    }

    #[test]
    fn bareiss_handles_zero_pivots() {
        // leading zero forces a row swap
        let m = IntegerMatrix::from_rows(&[vec![0, 1, 2], vec![1, 0, 3], vec![4, -3, 8]]);
        assert_eq!(m.determinant(), BigInt::from(-2));
        let singular = IntegerMatrix::from_rows(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(singular.determinant(), BigInt::zero());
        let zero_col = IntegerMatrix::from_rows(&[vec![0, 1], vec![0, 4]]);
        assert_eq!(zero_col.determinant(), BigInt::zero());
    }

    #[test]
    fn bigint_and_i128_paths_agree() {
        let m = laplacian_minor(&rect(5, 6), 0).unwrap();
        let small = bareiss(m.dim(), m.entries.iter().map(|&a| a as i128).collect());
        let big = bareiss(m.dim(), m.entries.iter().map(|&a| BigInt::from(a)).collect());
        assert_eq!(BigInt::from(small), big);
    }

    #[test]
    fn known_rectangle_counts() {
        assert_eq!(tree_count_exact(&rect(2, 8)), 10864.into());
        assert_eq!(tree_count_exact(&rect(4, 4)), 100352.into());
        assert_eq!(tree_count_exact(&rect(5, 5)), 557568000.into());
    }

    #[test]
    fn transpose_symmetry() {
        for l in 1..=6 {
            for m in l..=8 {
                assert_eq!(tree_count_exact(&rect(l, m)), tree_count_exact(&rect(m, l)));
            }
        }
    }

    #[test]
    fn modular_agrees_with_bareiss() {
        for l in 1..=9 {
            for m in l..=14 {
                let g = rect(l, m);
                assert_eq!(modular::tree_count_modular(&g), tree_count_exact(&g), "{l}x{m}");
            }
        }
        let gap = induced_graph(&CellSet::new([(0, 0), (2, 0)]).unwrap());
        assert_eq!(modular::tree_count_modular(&gap), TreeCount::zero());
    }

    #[test]
    fn primes_are_prime() {
        assert!(modular::is_prime((1u64 << 61) - 1));
        assert!(!modular::is_prime((1u64 << 62) - 1));
        assert!(!modular::is_prime(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
    }

    #[test]
    fn logarithm_of_big_counts() {
        let c = tree_count_exact(&rect(10, 10));
        let exact_digits = c.to_string().len();
        assert!((c.ln() / std::f64::consts::LN_10).floor() as usize + 1 == exact_digits);
        assert_eq!(TreeCount::from(192).ln(), 192f64.ln());
    }

    fn arb_shape() -> impl Strategy<Value = CellSet> {
        proptest::collection::btree_set((0i32..5, 0i32..5), 2..14)
            .prop_map(|s| CellSet::new(s).unwrap())
            .prop_filter("connected", |s| s.is_connected())
    }

    proptest! {
        #[test]
        fn root_independence(shape in arb_shape(), roots in proptest::collection::vec(any::<prop::sample::Index>(), 3)) {
            let g = induced_graph(&shape);
            let base = tree_count_exact(&g);
            for r in roots {
                prop_assert_eq!(&tree_count_with_root(&g, r.index(g.vertex_count())), &base);
            }
        }

        #[test]
        fn dihedral_invariance(shape in arb_shape()) {
            let base = tree_count_exact(&induced_graph(&shape));
            prop_assert!(!base.is_zero());
            for img in shape.dihedral_images() {
                prop_assert_eq!(&tree_count_exact(&induced_graph(&img)), &base);
            }
        }
    }
}
