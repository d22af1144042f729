//! Dense complex linear algebra used by the beamforming updates.
//!
//! Every extremal-eigenvector routine returns a *canonical* vector so that
//! results are reproducible bit for bit:
//!
//! * eigenvalues are sorted in descending order;
//! * eigenvalues closer than `1e-10 * ||m||_F` form a tied group, and the
//!   group's eigenspace is re-expressed in the basis obtained by projecting
//!   the standard basis vectors `e_1, e_2, ...` onto it in order (so the first
//!   vector of a group maximises `|x_1|` over the eigenspace);
//! * each vector is rotated so that its first component of modulus above
//!   `1e-12` is real and non-negative.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-10;
const TIE_TOL: f64 = 1e-10;
const PHASE_TOL: f64 = 1e-12;
const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm, canonical phase.
    pub vector: ComplexVector,
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Vec<EigenPair>> {
    Ok(decompose(m)?.pairs)
}

/// Eigenvector of the largest eigenvalue.
pub fn dominant_eigvec(m: &ComplexMatrix) -> Result<ComplexVector> {
    let d = decompose(m)?;
    Ok(d.pairs.into_iter().next().expect("non-empty").vector)
}

/// Eigenvector of the smallest eigenvalue. Under a tie this is the first
/// canonical vector of the bottom eigenspace.
pub fn least_eigvec(m: &ComplexMatrix) -> Result<ComplexVector> {
    let d = decompose(m)?;
    let start = d.bottom_group_start();
    Ok(d.pairs.into_iter().nth(start).expect("non-empty").vector)
}

/// Canonical orthonormal basis of the eigenspace belonging to the smallest
/// eigenvalue (dimension > 1 only when that eigenvalue is tied).
pub fn least_eigenspace(m: &ComplexMatrix) -> Result<Vec<ComplexVector>> {
    let d = decompose(m)?;
    let start = d.bottom_group_start();
    Ok(d.pairs.into_iter().skip(start).map(|p| p.vector).collect())
}

/// Solves `m x = b` for Hermitian positive definite `m` via Cholesky.
pub fn solve_hpd(m: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    check_square(m)?;
    if m.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, right-hand side has length {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    if !all_finite(m.iter()) || !all_finite(b.iter()) {
        return Err(Error::NonFinite);
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
    // nalgebra accepts tiny positive pivots; reject the ones that are zero to
    // working precision as well.
    let l = chol.l_dirty();
    let scale = m.diagonal().iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
    if (0..m.nrows()).any(|k| l[(k, k)].re <= f64::EPSILON * scale.sqrt()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(chol.solve(b))
}

/// `u u^H`.
pub fn outer(u: &ComplexVector) -> ComplexMatrix {
    u * u.adjoint()
}

/// `w^H m w`, real part (exact for Hermitian `m` up to rounding).
pub fn quad_form(m: &ComplexMatrix, w: &ComplexVector) -> f64 {
    w.dotc(&(m * w)).re
}

/// Standard basis vector `e_k` of dimension `n`.
pub fn basis_vector(n: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(n);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

/// Scales `v` to unit norm; `None` if its norm is below `floor`.
pub fn normalized(v: &ComplexVector, floor: f64) -> Option<ComplexVector> {
    let n = v.norm();
    if n < floor || !n.is_finite() {
        None
    } else {
        Some(v.unscale(n))
    }
}

/// Rotates `v` so its first component of modulus above `1e-12` is real and
/// non-negative.
pub fn canonical_phase(mut v: ComplexVector) -> ComplexVector {
    if let Some(k) = v.iter().position(|z| z.norm() > PHASE_TOL) {
        let z = v[k];
        let r = z.norm();
        let rot = z.conj() / r;
        v.iter_mut().for_each(|x| *x *= rot);
        v[k] = Complex64::new(r, 0.0);
    }
    v
}

pub(crate) fn all_finite<'a>(mut it: impl Iterator<Item = &'a Complex64>) -> bool {
    it.all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    check_square(m)?;
    if !all_finite(m.iter()) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    let scale = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    if worst > HERMITIAN_TOL * scale {
        return Err(Error::NonHermitian { asymmetry: worst });
    }
    Ok(())
}

struct Decomposition {
    pairs: Vec<EigenPair>,
    /// Start index of each tied group, ascending.
    group_starts: Vec<usize>,
}

impl Decomposition {
    fn bottom_group_start(&self) -> usize {
        *self.group_starts.last().expect("at least one group")
    }
}

fn decompose(m: &ComplexMatrix) -> Result<Decomposition> {
    check_hermitian(m)?;
    let n = m.nrows();
    // Exact Hermitian copy: the solver reads one triangle only.
    let sym = (m + m.adjoint()).unscale(2.0);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors: Vec<ComplexVector> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let tie = TIE_TOL * m.norm();
    let mut group_starts = vec![0];
    for k in 1..n {
        if values[k - 1] - values[k] > tie {
            group_starts.push(k);
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for (g, &start) in group_starts.iter().enumerate() {
        let end = group_starts.get(g + 1).copied().unwrap_or(n);
        let basis = if end - start == 1 {
            vec![vectors[start].clone()]
        } else {
            canonical_basis(&vectors[start..end])
        };
        for (offset, v) in basis.into_iter().enumerate() {
            pairs.push(EigenPair {
                value: values[start + offset],
                vector: canonical_phase(v.unscale(v.norm())),
            });
        }
    }
    Ok(Decomposition {
        pairs,
        group_starts,
    })
}

/// Re-expresses the span of `span` (orthonormal) as Gram-Schmidt over the
/// projections of `e_1, e_2, ...`.
fn canonical_basis(span: &[ComplexVector]) -> Vec<ComplexVector> {
    let dim = span.len();
    let n = span[0].len();
    let mut out: Vec<ComplexVector> = Vec::with_capacity(dim);
    for k in 0..n {
        if out.len() == dim {
            break;
        }
        let e = basis_vector(n, k);
        let mut p = ComplexVector::zeros(n);
        for u in span {
            p += u * u.dotc(&e);
        }
        for _ in 0..2 {
            for q in &out {
                let c = q.dotc(&p);
                p -= q * c;
            }
        }
        if let Some(p) = normalized(&p, PROJECTION_TOL) {
            out.push(p);
        }
    }
    // The projections of the standard basis span the eigenspace, so this only
    // triggers on severe loss of orthogonality in the solver output.
    if out.len() < dim {
        return span.to_vec();
    }
    out
}
