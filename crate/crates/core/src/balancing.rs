//! Rectangle comparisons at fixed area.
//!
//! For `A x B` and `a x b` with `AB = ab` and `A <= a <= b <= B`, put `t = a/A = B/b`.
//! Then
//!
//! ```text
//! log(tau(a,b) / tau(A,B)) = (t - 1)(A C_b - b C_A) + Gamma
//! Gamma = sum_{k<b} G_t(A c(k/b)) - sum_{j<A} G_t(b c(j/A))
//! ```
//!
//! The first term is nonnegative because Riemann averages of the concave
//! function `c` increase with the number of points; `Gamma` is positive
//! because `G_t` is positive and decreasing. A [`BalancingCertificate`]
//! evaluates every piece with an error budget and checks the identity against
//! both the spectral product and exact determinant counts.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{tree_count_exact, TreeCount};
use crate::grid::{rect_graph, RectShape};
use crate::spectral::{
    c_sum_with_bound, c_unchecked, g_error_bound, g_unchecked, tau_product_log, C_EVAL_RELATIVE_ERROR,
};
use crate::sum::CompensatedSum;

const EPS: f64 = f64::EPSILON;

/// Rectangles with at most this many vertices get exact counts in certificates.
pub const DEFAULT_EXACT_VERTEX_BUDGET: u64 = 400;

/// Left Riemann average `A_r(f) = (1/r) sum_{j=1}^{r-1} f(j/r)`; `A_1 = 0`.
pub fn riemann_average(f: impl Fn(f64) -> f64, r: u32) -> f64 {
    assert!(r >= 1, "r must be positive");
    let acc: CompensatedSum = (1..r).map(|j| f(j as f64 / r as f64)).collect();
    acc.value() / r as f64
}

/// `B_r(u) = (1/r) sum_{j=1}^{r-1} min(j/r, u)` in closed form:
/// `a(a+1)/(2r^2) + (r-1-a) u / r` with `a = floor(r u)`, capped at `r - 1`.
pub fn min_kernel_average(u: f64, r: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(u));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    let rf = r as f64;
    let a = ((rf * u).floor()).min(rf - 1.0);
    Ok(a * (a + 1.0) / (2.0 * rf * rf) + (rf - 1.0 - a) * u / rf)
}

/// The defining sum of [`min_kernel_average`].
pub fn min_kernel_direct(u: f64, r: u32) -> f64 {
    riemann_average(|x| x.min(u), r)
}

/// [`min_kernel_average`] over the rationals.
pub fn min_kernel_average_exact(u: Ratio<i64>, r: i64) -> Ratio<i64> {
    assert!(r >= 1);
    let a = (u * r).floor().to_integer().min(r - 1);
    Ratio::new(a * (a + 1), 2 * r * r) + u * Ratio::new(r - 1 - a, r)
}

/// The defining sum of [`min_kernel_average_exact`].
pub fn min_kernel_direct_exact(u: Ratio<i64>, r: i64) -> Ratio<i64> {
    let total = (1..r).fold(Ratio::from_integer(0), |acc, j| acc + Ratio::new(j, r).min(u));
    total / r
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub function: String,
    pub r_max: u32,
    pub tolerance: f64,
    /// `averages[i]` is `A_{i+1}(f)`.
    pub averages: Vec<f64>,
    /// Smallest `r` with `A_r > A_{r+1} + tolerance`.
    pub first_violation: Option<u32>,
}

impl ConcavityReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }

    /// Smallest `A_{r+1} - A_r` over the ladder.
    pub fn min_step(&self) -> f64 {
        self.averages
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks `A_r(f) <= A_{r+1}(f) + tolerance` for `1 <= r < r_max`.
pub fn check_concavity_ladder(
    name: &str,
    f: impl Fn(f64) -> f64 + Sync,
    r_max: u32,
    tolerance: f64,
) -> ConcavityReport {
    let averages: Vec<f64> = (1..=r_max.max(1))
        .into_par_iter()
        .map(|r| riemann_average(&f, r))
        .collect();
    let first_violation = averages
        .windows(2)
        .position(|w| w[0] > w[1] + tolerance)
        .map(|i| i as u32 + 1);
    ConcavityReport {
        function: name.to_string(),
        r_max,
        tolerance,
        averages,
        first_violation,
    }
}

/// Max over `xs` of `|f(x) - f'(1) x - int_0^1 min(x,u)(-f''(u)) du|`, the integral by
/// the composite midpoint rule with `panels` panels.
pub fn kernel_representation_check(
    f: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    f2: impl Fn(f64) -> f64,
    xs: &[f64],
    panels: usize,
) -> f64 {
    assert!(panels > 0);
    let h = 1.0 / panels as f64;
    let weights: Vec<(f64, f64)> = (0..panels)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            (u, -f2(u))
        })
        .collect();
    let slope = f1(1.0);
    xs.iter()
        .map(|&x| {
            let integral: CompensatedSum = weights.iter().map(|&(u, w)| x.min(u) * w * h).collect();
            (f(x) - slope * x - integral.value()).abs()
        })
        .fold(0.0, f64::max)
}

/// `k_j = floor(j b / A)` for `1 <= j <= A - 1`.
///
/// The result is strictly increasing with `1 <= k_j <= b - 1` and `k_j / b <= j / A`.
pub fn matching_indices(a_short: u64, b: u64) -> Result<Vec<u64>> {
    if a_short == 0 || a_short > b {
        return Err(Error::InvalidArgument(format!(
            "matching needs 1 <= A <= b, got A={a_short}, b={b}"
        )));
    }
    let ks: Vec<u64> = (1..a_short).map(|j| j * b / a_short).collect();
    debug_assert!(ks.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(ks.iter().all(|&k| (1..b).contains(&k)));
    Ok(ks)
}

/// `Gamma = sum_{k=1}^{b-1} G_t(A c(k/b)) - sum_{j=1}^{A-1} G_t(b c(j/A))` and its error bound.
pub fn residual_gamma(a_short: u64, b: u64, t: Ratio<u64>) -> Result<(f64, f64)> {
    if a_short == 0 || a_short > b {
        return Err(Error::InvalidArgument(format!(
            "residual needs 1 <= A <= b, got A={a_short}, b={b}"
        )));
    }
    if t < Ratio::from_integer(1) {
        return Err(Error::InvalidArgument(format!("t must be >= 1, got {t}")));
    }
    if t == Ratio::from_integer(1) {
        return Ok((0.0, 0.0));
    }
    let tf = ratio_to_f64(t);
    // z = side * c(x): c's own error plus one rounding for the product
    let z_rel = C_EVAL_RELATIVE_ERROR * EPS + EPS;
    let mut plus = CompensatedSum::new();
    let mut minus = CompensatedSum::new();
    let mut err = 0.0;
    for k in 1..b {
        let z = a_short as f64 * c_unchecked(k as f64 / b as f64);
        plus.add(g_unchecked(tf, z));
        err += g_error_bound(tf, z, z_rel);
    }
    for j in 1..a_short {
        let z = b as f64 * c_unchecked(j as f64 / a_short as f64);
        minus.add(g_unchecked(tf, z));
        err += g_error_bound(tf, z, z_rel);
    }
    let value = plus.value() - minus.value();
    err += plus.rounding_bound() + minus.rounding_bound() + EPS * value.abs();
    Ok((value, err))
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Upper bound on the error of [`TreeCount::ln`].
pub fn exact_ln_error(ln: f64) -> f64 {
    4.0 * EPS * (ln.abs() + 1.0)
}

fn serialize_ratio<S: Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

/// Numeric realization of the linear-plus-residual identity for one pair of rectangles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalancingCertificate {
    /// The less balanced rectangle `A x B`.
    pub original: RectShape,
    /// The more balanced rectangle `a x b`.
    pub balanced: RectShape,
    #[serde(serialize_with = "serialize_ratio")]
    pub t: Ratio<u64>,
    /// `(t - 1)(A C_b - b C_A)`.
    pub linear_term: f64,
    pub linear_err: f64,
    /// `Gamma`.
    pub residual_term: f64,
    pub residual_err: f64,
    /// `log tau(a,b) - log tau(A,B)` from the spectral product.
    pub log_diff_spectral: f64,
    pub log_diff_spectral_err: f64,
    /// Same difference from exact counts, when both fit the exact budget.
    pub log_diff_exact: Option<f64>,
    pub tau_original: Option<TreeCount>,
    pub tau_balanced: Option<TreeCount>,
    /// `|linear + Gamma - log_diff_spectral|`.
    pub discrepancy: f64,
    /// Sum of the component error bounds; `discrepancy` must not exceed it.
    pub max_abscrepancy: f64,
}

impl BalancingCertificate {
    pub fn area(&self) -> u64 {
        self.original.area()
    }

    pub fn is_trivial(&self) -> bool {
        self.t == Ratio::from_integer(1)
    }

    /// Slack allowed between the spectral and exact log differences.
    pub fn exact_budget(&self) -> Option<f64> {
        let (o, b) = (self.tau_original.as_ref()?, self.tau_balanced.as_ref()?);
        Some(self.log_diff_spectral_err + exact_ln_error(o.ln()) + exact_ln_error(b.ln()))
    }

    /// Every invariant the certificate fails, as readable messages; empty means it closes.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (aa, bb) = (self.original.rows() as u64, self.original.cols() as u64);
        let (a, b) = (self.balanced.rows() as u64, self.balanced.cols() as u64);
        if aa * bb != a * b || !(aa <= a && a <= b && b <= bb) {
            v.push(format!("{} -> {} is not a balancing pair", self.original, self.balanced));
        }
        if self.is_trivial() {
            if self.linear_term != 0.0 || self.residual_term != 0.0 || self.log_diff_spectral != 0.0 {
                v.push("t = 1 but a term is nonzero".into());
            }
        } else {
            if self.linear_term < -self.linear_err {
                v.push(format!(
                    "linear term {:e} is negative beyond its bound {:e}",
                    self.linear_term, self.linear_err
                ));
            }
            if self.residual_term <= self.residual_err {
                v.push(format!(
                    "residual {:e} not certified positive (bound {:e})",
                    self.residual_term, self.residual_err
                ));
            }
        }
        if !(self.discrepancy <= self.max_abscrepancy) {
            v.push(format!(
                "identity does not close: discrepancy {:e} > budget {:e}",
                self.discrepancy, self.max_abscrepancy
            ));
        }
        if let (Some(o), Some(bal), Some(diff), Some(budget)) = (
            &self.tau_original,
            &self.tau_balanced,
            self.log_diff_exact,
            self.exact_budget(),
        ) {
            if self.is_trivial() {
                if o != bal {
                    v.push("t = 1 but exact counts differ".into());
                }
            } else if o >= bal {
                v.push(format!("exact counts not strictly increasing: {o} >= {bal}"));
            }
            if (diff - self.log_diff_spectral).abs() > budget {
                v.push(format!(
                    "exact log difference {diff:e} disagrees with spectral {:e} beyond {budget:e}",
                    self.log_diff_spectral
                ));
            }
        }
        v
    }

    pub fn passes(&self) -> bool {
        self.violations().is_empty()
    }
}

/// Validates `lm = l'm'` and `l <= l' <= m' <= m`; returns `t = l'/l`.
pub fn balancing_ratio(original: RectShape, balanced: RectShape) -> Result<Ratio<u64>> {
    let (aa, bb) = (original.rows() as u64, original.cols() as u64);
    let (a, b) = (balanced.rows() as u64, balanced.cols() as u64);
    if aa * bb != a * b {
        return Err(Error::NotBalancing(format!(
            "areas differ: {original} has {}, {balanced} has {}",
            aa * bb,
            a * b
        )));
    }
    if !(aa <= a && a <= b && b <= bb) {
        return Err(Error::NotBalancing(format!(
            "need l <= l' <= m' <= m, got {original} -> {balanced}"
        )));
    }
    let t = Ratio::new(a, aa);
    debug_assert_eq!(t, Ratio::new(bb, b));
    Ok(t)
}

/// Certificate for `tau(l, m) <= tau(l', m')`, computing exact counts for rectangles
/// with at most [`DEFAULT_EXACT_VERTEX_BUDGET`] vertices.
pub fn balancing_certificate(l: u32, m: u32, l2: u32, m2: u32) -> Result<BalancingCertificate> {
    balancing_certificate_with_budget(l, m, l2, m2, DEFAULT_EXACT_VERTEX_BUDGET)
}

pub fn balancing_certificate_with_budget(
    l: u32,
    m: u32,
    l2: u32,
    m2: u32,
    exact_vertex_budget: u64,
) -> Result<BalancingCertificate> {
    let original = RectShape::new(l, m)?;
    let balanced = RectShape::new(l2, m2)?;
    balancing_ratio(original, balanced)?;
    let counts = (original.area() <= exact_vertex_budget).then(|| {
        (
            tree_count_exact(&rect_graph(original)),
            tree_count_exact(&rect_graph(balanced)),
        )
    });
    certificate_from_counts(original, balanced, counts)
}

fn certificate_from_counts(
    original: RectShape,
    balanced: RectShape,
    counts: Option<(TreeCount, TreeCount)>,
) -> Result<BalancingCertificate> {
    let t = balancing_ratio(original, balanced)?;
    let aa = original.rows() as u64;
    let b = balanced.cols() as u64;

    let (linear_term, linear_err) = if t == Ratio::from_integer(1) {
        (0.0, 0.0)
    } else {
        let (c_b, c_b_err) = c_sum_with_bound(b as u32);
        let (c_a, c_a_err) = c_sum_with_bound(aa as u32);
        let tm1 = ratio_to_f64(t - Ratio::from_integer(1));
        let left = aa as f64 * c_b;
        let right = b as f64 * c_a;
        let inner = left - right;
        let inner_err = aa as f64 * c_b_err + b as f64 * c_a_err + 2.0 * EPS * (left.abs() + right.abs());
        let value = tm1 * inner;
        (value, tm1 * inner_err + 2.0 * EPS * value.abs())
    };

    let (residual_term, residual_err) = residual_gamma(aa, b, t)?;

    let lo = tau_product_log(original);
    let hi = tau_product_log(balanced);
    let log_diff_spectral = hi.log_value - lo.log_value;
    let log_diff_spectral_err = hi.err_bound + lo.err_bound + EPS * log_diff_spectral.abs();

    let discrepancy = (linear_term + residual_term - log_diff_spectral).abs();
    let max_abscrepancy = linear_err
        + residual_err
        + log_diff_spectral_err
        + 2.0 * EPS * (linear_term.abs() + residual_term.abs() + log_diff_spectral.abs());

    let (tau_original, tau_balanced, log_diff_exact) = match counts {
        Some((o, bal)) => {
            let diff = bal.ln() - o.ln();
            (Some(o), Some(bal), Some(diff))
        }
        None => (None, None, None),
    };

    Ok(BalancingCertificate {
        original,
        balanced,
        t,
        linear_term,
        linear_err,
        residual_term,
        residual_err,
        log_diff_spectral,
        log_diff_spectral_err,
        log_diff_exact,
        tau_original,
        tau_balanced,
        discrepancy,
        max_abscrepancy,
    })
}

/// Oriented rectangles `l x m` (`l <= m`) with `lm = area`, by increasing `l`.
pub fn factor_pairs(area: u64) -> Vec<RectShape> {
    (1..)
        .take_while(|l: &u64| l * l <= area)
        .filter(|l| area % l == 0)
        .map(|l| RectShape::new(l as u32, (area / l) as u32).expect("positive"))
        .collect()
}

/// All balancing-ordered pairs for one area, including each rectangle paired with itself.
pub fn balancing_pairs(area: u64) -> Vec<(RectShape, RectShape)> {
    let pairs = factor_pairs(area);
    let mut out = Vec::new();
    for (i, &original) in pairs.iter().enumerate() {
        for &balanced in &pairs[i..] {
            out.push((original, balanced));
        }
    }
    out
}

/// Exact counts for every oriented rectangle of area at most `max_area`.
pub fn rectangle_counts(max_area: u64) -> BTreeMap<RectShape, TreeCount> {
    let shapes: Vec<RectShape> = (1..=max_area).flat_map(factor_pairs).collect();
    shapes
        .into_par_iter()
        .map(|s| (s, tree_count_exact(&rect_graph(s))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Certificates for every balancing pair with area `<= max_area`, sorted by
/// `(area, original, balanced)` regardless of thread count.
pub fn balancing_sweep(max_area: u64, exact_vertex_budget: u64) -> Vec<BalancingCertificate> {
    let counts = rectangle_counts(max_area.min(exact_vertex_budget));
    let jobs: Vec<(RectShape, RectShape)> = (1..=max_area).flat_map(balancing_pairs).collect();
    jobs.into_par_iter()
        .map(|(o, b)| {
            let exact = counts.get(&o).zip(counts.get(&b)).map(|(x, y)| (x.clone(), y.clone()));
            certificate_from_counts(o, b, exact).expect("pairs are balancing by construction")
        })
        .collect()
}

/// One row of the square-maximality check for rectangles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryRow {
    pub n: u32,
    pub rectangle: RectShape,
    pub tau: TreeCount,
    pub tau_square: TreeCount,
}

impl CorollaryRow {
    pub fn holds(&self) -> bool {
        self.tau <= self.tau_square
    }
}

/// `tau(l, m) <= tau(n, n)` for every factorization `lm = n^2`, `n <= max_n`.
pub fn corollary_check(max_n: u32) -> Vec<CorollaryRow> {
    let counts = rectangle_counts(max_n as u64 * max_n as u64);
    (1..=max_n)
        .flat_map(|n| {
            let area = n as u64 * n as u64;
            let square = counts[&RectShape::new(n, n).expect("positive")].clone();
            let counts = &counts;
            factor_pairs(area).into_iter().map(move |r| CorollaryRow {
                n,
                rectangle: r,
                tau: counts[&r].clone(),
                tau_square: square.clone(),
            })
        })
        .collect()
}
