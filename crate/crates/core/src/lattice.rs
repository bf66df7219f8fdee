//! LLL basis reduction with unimodular-transform extraction, plus brute-force
//! lattice oracles used for verification on small dimensions.
//!
//! Bases are stored column-wise: column `i` of the generator matrix is the
//! `i`-th basis vector. The reduction runs on the `R` factor of a QR
//! decomposition (size reduction on columns of `R`, Givens rotations after
//! each swap) and tracks the integer change of basis `U` exactly, so
//! `G_reduced = G·U` holds by construction rather than by rounding.

use log::trace;
use nalgebra::DMatrix;
use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::linalg::integer_determinant;

/// Default Lovász constant.
pub const DEFAULT_DELTA: f64 = 0.75;

/// Largest dimension accepted by the enumeration oracles.
pub const BRUTE_FORCE_MAX_DIM: usize = 4;

const FULL_RANK_TOL: f64 = 1e-12;
const VERIFY_TOL: f64 = 1e-9;
// Slack on the reduction tests so that a reduced basis re-fed to the
// algorithm is left untouched despite rounding in a fresh QR.
const SIZE_SLACK: f64 = 1e-10;
const LOVASZ_SLACK: f64 = 1e-10;
const MAX_POLISH_PASSES: usize = 4;

/// Integer `K×K` matrix, used both for LLL transforms and for the
/// integer-forcing coefficient matrix `A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntegerMatrix(pub DMatrix<i64>);

impl IntegerMatrix {
    pub fn identity(k: usize) -> Self {
        IntegerMatrix(DMatrix::identity(k, k))
    }

    pub fn from_row_slice(k: usize, entries: &[i64]) -> Self {
        IntegerMatrix(DMatrix::from_row_slice(k, k, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_f64(&self) -> DMatrix<f64> {
        self.0.map(|v| v as f64)
    }

    pub fn determinant(&self) -> BigInt {
        integer_determinant(&self.0)
    }

    pub fn is_unimodular(&self) -> bool {
        let det = self.determinant();
        det == BigInt::from(1) || det == BigInt::from(-1)
    }

    /// `A·Aᵀ` as a real matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let a = self.as_f64();
        &a * a.transpose()
    }

    /// Row-major nested vectors, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.0.nrows())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }
}

/// Generator matrix of a lattice; columns are the basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis(DMatrix<f64>);

impl LatticeBasis {
    /// Wraps `g` after checking that its columns are linearly independent.
    ///
    /// The test compares `∏ r_ii` from a QR factorization against the
    /// Hadamard bound `∏ ‖g_i‖`, so it is invariant under column scaling.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        check_full_rank(&g)?;
        Ok(LatticeBasis(g))
    }

    pub fn from_columns(cols: &[&[f64]]) -> Result<Self> {
        let k = cols.len();
        let m = cols.first().map_or(0, |c| c.len());
        Self::new(DMatrix::from_fn(m, k, |i, j| cols[j][i]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

fn check_full_rank(g: &DMatrix<f64>) -> Result<()> {
    let k = g.ncols();
    if k == 0 || g.nrows() < k {
        return Err(Error::DimensionMismatch(format!(
            "basis must have at least as many rows as columns, got {}x{}",
            g.nrows(),
            k
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBasis {
            det: f64::NAN,
            bound: 0.0,
        });
    }
    let r = g.clone().qr().r();
    let det: f64 = (0..k).map(|i| r[(i, i)].abs()).product();
    let hadamard: f64 = (0..k).map(|j| g.column(j).norm()).product();
    let bound = FULL_RANK_TOL * hadamard;
    if !(det > bound) {
        return Err(Error::SingularBasis { det, bound });
    }
    Ok(())
}

/// Output of [`lll_reduce`].
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub reduced: DMatrix<f64>,
    pub transform: IntegerMatrix,
    pub swaps: usize,
    pub size_reductions: usize,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.25 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Lovász constant must lie in (0.25, 1], got {delta}"
        )));
    }
    Ok(())
}

/// Swap budget: `10·K²·b` with `b` the bit size of the largest entry at
/// `1e-12` resolution.
fn swap_cap(g: &DMatrix<f64>) -> usize {
    let k = g.ncols();
    let max = g.amax().max(1e-12);
    let bits = ((max / 1e-12) + 1.0).log2().ceil().max(1.0) as usize;
    10 * k * k * bits
}

struct Counters {
    swaps: usize,
    size_reductions: usize,
}

/// One LLL sweep over the `R` factor of `g`, accumulating column operations
/// into `u`. Returns true when any operation was applied.
fn lll_pass(
    g: &DMatrix<f64>,
    delta: f64,
    u: &mut DMatrix<i64>,
    counters: &mut Counters,
    cap: usize,
) -> Result<bool> {
    let k = g.ncols();
    let mut r = g.clone().qr().r();
    let mut changed = false;
    let mut i = 1;
    while i < k {
        for j in (0..i).rev() {
            let ratio = r[(j, i)] / r[(j, j)];
            if ratio.abs() <= 0.5 + SIZE_SLACK {
                continue;
            }
            let mu = ratio.round();
            if !mu.is_finite() || mu.abs() > 9.0e15 {
                return Err(Error::NonConvergence { cap });
            }
            if mu > 0.0 && log::log_enabled!(log::Level::Trace) {
                trace!("positive size-reduction coefficient {mu} at ({j}, {i})");
            }
            for row in 0..=j {
                r[(row, i)] -= mu * r[(row, j)];
            }
            let mu_int = mu as i64;
            for row in 0..k {
                let v = u[(row, i)]
                    .checked_sub(
                        mu_int
                            .checked_mul(u[(row, j)])
                            .ok_or(Error::NonConvergence { cap })?,
                    )
                    .ok_or(Error::NonConvergence { cap })?;
                u[(row, i)] = v;
            }
            counters.size_reductions += 1;
            changed = true;
        }

        let prev = r[(i - 1, i - 1)];
        let lhs = delta * prev * prev;
        let rhs = r[(i, i)] * r[(i, i)] + r[(i - 1, i)] * r[(i - 1, i)];
        if lhs > rhs * (1.0 + LOVASZ_SLACK) {
            r.swap_columns(i - 1, i);
            u.swap_columns(i - 1, i);
            // restore triangularity on rows i-1, i
            let a = r[(i - 1, i - 1)];
            let b = r[(i, i - 1)];
            let n = a.hypot(b);
            let (c, s) = (a / n, b / n);
            for col in (i - 1)..k {
                let top = r[(i - 1, col)];
                let bot = r[(i, col)];
                r[(i - 1, col)] = c * top + s * bot;
                r[(i, col)] = -s * top + c * bot;
            }
            r[(i, i - 1)] = 0.0;
            counters.swaps += 1;
            changed = true;
            if counters.swaps > cap {
                return Err(Error::NonConvergence { cap });
            }
            i = (i - 1).max(1);
        } else {
            i += 1;
        }
    }
    Ok(changed)
}

/// LLL-reduces `basis` with Lovász constant `delta ∈ (1/4, 1]`.
///
/// The returned transform is unimodular and satisfies `reduced = G·U`
/// exactly in floating point (the reduced basis is recomputed from `U`).
/// After the main sweep the basis is re-factored and swept again until a
/// sweep changes nothing, which keeps the output stable under re-reduction.
pub fn lll_reduce(basis: &LatticeBasis, delta: f64) -> Result<ReductionResult> {
    check_delta(delta)?;
    let g = basis.matrix();
    let k = g.ncols();
    let cap = swap_cap(g);
    let mut u = DMatrix::<i64>::identity(k, k);
    let mut counters = Counters {
        swaps: 0,
        size_reductions: 0,
    };
    let mut current = g.clone();
    for _ in 0..MAX_POLISH_PASSES {
        if !lll_pass(&current, delta, &mut u, &mut counters, cap)? {
            break;
        }
        current = g * u.map(|v| v as f64);
    }
    let transform = IntegerMatrix(u);
    if !transform.is_unimodular() {
        return Err(Error::NonConvergence { cap });
    }
    Ok(ReductionResult {
        reduced: current,
        transform,
        swaps: counters.swaps,
        size_reductions: counters.size_reductions,
    })
}

/// Solver for the shortest-independent-vectors problem, returning the
/// integer change of basis. LLL is the shipped implementation.
pub trait SivpSolver: Sync {
    fn solve(&self, basis: &LatticeBasis) -> Result<IntegerMatrix>;
}

/// LLL-backed SIVP solver.
#[derive(Debug, Clone, Copy)]
pub struct Lll {
    pub delta: f64,
}

impl Default for Lll {
    fn default() -> Self {
        Lll {
            delta: DEFAULT_DELTA,
        }
    }
}

impl SivpSolver for Lll {
    fn solve(&self, basis: &LatticeBasis) -> Result<IntegerMatrix> {
        solve_sivp_unimodular(basis, self.delta)
    }
}

/// Unimodular `U` such that `G·U` is LLL-reduced.
pub fn solve_sivp_unimodular(basis: &LatticeBasis, delta: f64) -> Result<IntegerMatrix> {
    Ok(lll_reduce(basis, delta)?.transform)
}

/// Checks the size-reduction and Lovász conditions on a fresh QR of `basis`,
/// both to a tolerance of `1e-9`.
pub fn verify_lll_reduced(basis: &LatticeBasis, delta: f64) -> Result<bool> {
    check_delta(delta)?;
    let g = basis.matrix();
    let k = g.ncols();
    let r = g.clone().qr().r();
    for j in 1..k {
        for i in 0..j {
            if (r[(i, j)] / r[(i, i)]).abs() > 0.5 + VERIFY_TOL {
                return Ok(false);
            }
        }
    }
    for i in 0..k.saturating_sub(1) {
        let lhs = delta * r[(i, i)] * r[(i, i)];
        let rhs = r[(i, i + 1)] * r[(i, i + 1)] + r[(i + 1, i + 1)] * r[(i + 1, i + 1)];
        if lhs > rhs + VERIFY_TOL * lhs.max(rhs) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A lattice vector found by enumeration: its integer coefficients and length.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedVector {
    pub coeffs: Vec<i64>,
    pub norm: f64,
}

/// Successive minima `λ_1 ≤ … ≤ λ_K` over coefficient vectors with entries in
/// `[-bound, bound]`, for `K ≤ 4`.
pub fn successive_minima_bruteforce(basis: &LatticeBasis, coeff_bound: i64) -> Result<Vec<f64>> {
    Ok(independent_minima_bruteforce(basis, coeff_bound)?
        .into_iter()
        .map(|v| v.norm)
        .collect())
}

/// The vectors achieving [`successive_minima_bruteforce`].
///
/// All nonzero coefficient vectors in the box are sorted by ascending norm
/// (ties broken by lexicographic coefficient order) and accepted greedily
/// when they raise the rank. Rank is tested exactly on the integer
/// coefficients, which is equivalent since `G` has full column rank.
pub fn independent_minima_bruteforce(
    basis: &LatticeBasis,
    coeff_bound: i64,
) -> Result<Vec<EnumeratedVector>> {
    let k = basis.dim();
    if k > BRUTE_FORCE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: k,
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    if coeff_bound < 1 {
        return Err(Error::InvalidArgument(
            "coefficient bound must be >= 1".into(),
        ));
    }
    let mut candidates = enumerate_box(basis.matrix(), coeff_bound);
    candidates.sort_by(|a, b| {
        a.norm
            .partial_cmp(&b.norm)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
    let mut chosen: Vec<EnumeratedVector> = Vec::with_capacity(k);
    let mut echelon = IntegerEchelon::new(k);
    for cand in candidates {
        if echelon.try_insert(&cand.coeffs) {
            chosen.push(cand);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return Err(Error::InvalidArgument(
            "coefficient box does not span the lattice".into(),
        ));
    }
    Ok(chosen)
}

fn enumerate_box(g: &DMatrix<f64>, bound: i64) -> Vec<EnumeratedVector> {
    let k = g.ncols();
    let side = (2 * bound + 1) as usize;
    let total = side.pow(k as u32);
    let mut out = Vec::with_capacity(total - 1);
    let mut coeffs = vec![-bound; k];
    for _ in 0..total {
        if coeffs.iter().any(|&c| c != 0) {
            let mut v = nalgebra::DVector::<f64>::zeros(g.nrows());
            for (j, &c) in coeffs.iter().enumerate() {
                if c != 0 {
                    v.axpy(c as f64, &g.column(j), 1.0);
                }
            }
            out.push(EnumeratedVector {
                coeffs: coeffs.clone(),
                norm: v.norm(),
            });
        }
        for c in coeffs.iter_mut().rev() {
            if *c < bound {
                *c += 1;
                break;
            }
            *c = -bound;
        }
    }
    out
}

/// Incremental exact rank test over the integers (fraction-free row echelon).
struct IntegerEchelon {
    rows: Vec<(usize, Vec<i128>)>,
    dim: usize,
}

impl IntegerEchelon {
    fn new(dim: usize) -> Self {
        IntegerEchelon {
            rows: Vec::new(),
            dim,
        }
    }

    fn try_insert(&mut self, v: &[i64]) -> bool {
        let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for (pivot, row) in &self.rows {
            let a = w[*pivot];
            if a == 0 {
                continue;
            }
            let p = row[*pivot];
            for c in 0..self.dim {
                w[c] = w[c] * p - a * row[c];
            }
            let g = w.iter().fold(0i128, |acc, &x| gcd(acc, x));
            if g > 1 {
                w.iter_mut().for_each(|x| *x /= g);
            }
        }
        match w.iter().position(|&x| x != 0) {
            Some(pivot) => {
                self.rows.push((pivot, w));
                true
            }
            None => false,
        }
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
