//! Linear operators and the conjugate-gradient solver.
//!
//! [`LinearOperator`] is the abstraction the reconstruction stack is built
//! on: the projector, its normal equations, and the toy operators in tests
//! all implement it. The contract is linearity plus the adjoint identity
//! ⟨Ax, y⟩ = ⟨x, Aᵀy⟩; [`adjoint_probe`] checks the latter on random probes.

use alloc::vec;
use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::vecn;
#[allow(unused_imports)]
use num_traits::Float;

/// A linear map R^n → R^m together with its adjoint.
pub trait LinearOperator {
    /// Domain dimension n.
    fn domain_dim(&self) -> usize;
    /// Range dimension m.
    fn range_dim(&self) -> usize;
    /// A·x.
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// Aᵀ·y.
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;
}

/// The identity map on R^n.
pub struct IdentityOperator {
    pub n: usize,
}

impl LinearOperator for IdentityOperator {
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn range_dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

/// Dense row-major matrix operator, mostly for small systems and tests.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("DenseOperator::new", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl LinearOperator for DenseOperator {
    fn domain_dim(&self) -> usize {
        self.cols
    }
    fn range_dim(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| vecn::dot_unchecked(&self.data[r * self.cols..(r + 1) * self.cols], x))
            .collect()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            vecn::axpy(yr, &self.data[r * self.cols..(r + 1) * self.cols], &mut out);
        }
        out
    }
}

/// The symmetric positive-definite map s ↦ AᵀA·s + zeta·s.
///
/// This is the system matrix of the data-consistency proximal subproblem;
/// it is SPD for zeta > 0 even when A is rank deficient.
pub struct NormalEquationsOperator<'a, A: LinearOperator + ?Sized> {
    pub a: &'a A,
    pub zeta: f64,
}

impl<'a, A: LinearOperator + ?Sized> LinearOperator for NormalEquationsOperator<'a, A> {
    fn domain_dim(&self) -> usize {
        self.a.domain_dim()
    }
    fn range_dim(&self) -> usize {
        self.a.domain_dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.a.apply_adjoint(&self.a.apply(x));
        vecn::axpy(self.zeta, x, &mut out);
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgSolution {
    /// Final iterate.
    pub x: Vec<f64>,
    /// ‖rhs − op(x_k)‖₂ for k = 0..=iters (index 0 is the initial residual).
    pub residuals: Vec<f64>,
    /// Iterations actually taken.
    pub iters: usize,
    /// Whether the tolerance test ‖r‖ ≤ tol·‖rhs‖ stopped the solve.
    pub converged: bool,
}

/// Conjugate gradient on a symmetric positive definite operator.
///
/// Runs until `max_iters` steps or ‖r‖ ≤ `tol`·‖rhs‖, whichever comes
/// first. The iterate is warm-started from `x0`.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    op: &A,
    rhs: &[f64],
    x0: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<CgSolution> {
    let n = op.domain_dim();
    if rhs.len() != n {
        return Err(Error::dims("cg_solve rhs", n, rhs.len()));
    }
    if x0.len() != n {
        return Err(Error::dims("cg_solve x0", n, x0.len()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidConfig(
            "cg_solve: max_iters must be >= 1".into(),
        ));
    }

    let mut x = x0.to_vec();
    let mut r = vecn::sub(rhs, &op.apply(&x));
    let mut p = r.clone();
    let mut rs_old = vecn::dot_unchecked(&r, &r);

    let rhs_norm = vecn::norm2(rhs);
    let stop = tol * rhs_norm;
    let mut residuals = vec![rs_old.sqrt()];
    let mut converged = rs_old.sqrt() <= stop;
    let mut iters = 0;

    if !converged {
        for k in 0..max_iters {
            let ap = op.apply(&p);
            let p_ap = vecn::dot_unchecked(&p, &ap);
            if p_ap <= 0.0 || !p_ap.is_finite() {
                // Either breakdown or a non-PD operator; the iterate so far
                // is still the best Krylov estimate, but NaN must not escape.
                if !vecn::all_finite(&x) {
                    return Err(Error::NumericalBreakdown {
                        context: "cg_solve",
                        step: k,
                    });
                }
                break;
            }
            let alpha = rs_old / p_ap;
            vecn::axpy(alpha, &p, &mut x);
            vecn::axpy(-alpha, &ap, &mut r);
            let rs_new = vecn::dot_unchecked(&r, &r);
            if !rs_new.is_finite() {
                return Err(Error::NumericalBreakdown {
                    context: "cg_solve",
                    step: k,
                });
            }
            residuals.push(rs_new.sqrt());
            iters = k + 1;
            if rs_new.sqrt() <= stop {
                converged = true;
                break;
            }
            let beta = rs_new / rs_old;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rs_old = rs_new;
        }
    }

    if !vecn::all_finite(&x) {
        return Err(Error::NumericalBreakdown {
            context: "cg_solve",
            step: iters,
        });
    }
    Ok(CgSolution {
        x,
        residuals,
        iters,
        converged,
    })
}

/// Debug-mode contract check: ⟨Ax, y⟩ vs ⟨x, Aᵀy⟩ on `probes` random pairs.
///
/// Returns the worst relative discrepancy, or an error past `rel_tol`.
pub fn adjoint_probe<A: LinearOperator + ?Sized>(
    op: &A,
    probes: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<f64> {
    let mut stream = SeedStream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x = stream.standard_normal_vec(op.domain_dim());
        let y = stream.standard_normal_vec(op.range_dim());
        let lhs = vecn::dot_unchecked(&op.apply(&x), &y);
        let rhs = vecn::dot_unchecked(&x, &op.apply_adjoint(&y));
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        let rel = (lhs - rhs).abs() / scale;
        worst = worst.max(rel);
    }
    if worst > rel_tol {
        return Err(Error::Contract(alloc::format!(
            "adjoint identity violated: worst rel diff {worst:e} > {rel_tol:e}"
        )));
    }
    Ok(worst)
}

/// Symmetry probe for debug use: checks ⟨Sx, y⟩ = ⟨x, Sy⟩ on random pairs.
pub fn symmetry_probe<A: LinearOperator + ?Sized>(
    op: &A,
    probes: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<f64> {
    if op.domain_dim() != op.range_dim() {
        return Err(Error::dims(
            "symmetry_probe",
            op.domain_dim(),
            op.range_dim(),
        ));
    }
    let mut stream = SeedStream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x = stream.standard_normal_vec(op.domain_dim());
        let y = stream.standard_normal_vec(op.domain_dim());
        let lhs = vecn::dot_unchecked(&op.apply(&x), &y);
        let rhs = vecn::dot_unchecked(&x, &op.apply(&y));
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    if worst > rel_tol {
        return Err(Error::Contract(alloc::format!(
            "symmetry violated: worst rel diff {worst:e} > {rel_tol:e}"
        )));
    }
    Ok(worst)
}

/// Largest eigenvalue of AᵀA by power iteration on a seeded probe.
///
/// Used to pick the FISTA step size 1/L. Deterministic for a fixed seed.
pub fn power_iteration_normal<A: LinearOperator + ?Sized>(op: &A, iters: usize, seed: u64) -> f64 {
    let n = op.domain_dim();
    let mut stream = SeedStream::new(seed);
    let mut v = stream.standard_normal_vec(n);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = op.apply_adjoint(&op.apply(&v));
        let norm = vecn::norm2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        lambda = vecn::dot_unchecked(&v, &w) / vecn::dot_unchecked(&v, &v);
        v = vecn::scale(1.0 / norm, &w);
    }
    lambda
}

/// Symmetric dense matrix stored row-major, with a Jacobi eigendecomposition.
///
/// Small-n workhorse behind the Gaussian MMSE denoiser: factoring the prior
/// covariance once turns every posterior-mean evaluation into two dense
/// matrix-vector products.
#[derive(Clone, Debug)]
pub struct SymEig {
    /// Eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns: `vectors[i * n + j]` is component i of eigenvector j.
    pub vectors: Vec<f64>,
    pub n: usize,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n×n).
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> Result<SymEig> {
    if matrix.len() != n * n {
        return Err(Error::dims("jacobi_eigen", n * n, matrix.len()));
    }
    let mut a = matrix.to_vec();
    // Symmetry check up to roundoff.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a[i * n + j] - a[j * n + i]).abs();
            let s = a[i * n + j].abs().max(a[j * n + i].abs()).max(1.0);
            if d > 1e-10 * s {
                return Err(Error::Contract("jacobi_eigen: matrix not symmetric".into()));
            }
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s
    };

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        if off(&a) <= 1e-24 * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/cols p and q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    // Sort ascending, carrying eigenvectors along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigenvalues[i].partial_cmp(&eigenvalues[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let mut sorted_vecs = vec![0.0; n * n];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vecs[i * n + new_j] = v[i * n + old_j];
        }
    }
    eigenvalues = sorted_vals;
    Ok(SymEig {
        eigenvalues,
        vectors: sorted_vecs,
        n,
    })
}

impl SymEig {
    /// Qᵀ·x.
    pub fn to_eigenbasis(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n);
        (0..n)
            .map(|j| (0..n).map(|i| self.vectors[i * n + j] * x[i]).sum())
            .collect()
    }

    /// Q·c.
    pub fn from_eigenbasis(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(c.len(), n);
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.vectors[i * n + j] * cj;
            }
        }
        out
    }
}
