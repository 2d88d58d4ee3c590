//! Pointwise rank-revealing linear algebra.
//!
//! Every rank decision goes through singular values with a single tolerance
//! policy ([`Tolerances`]): a singular value counts when it exceeds
//! `max(rows, cols) · σ_max · rank_rel`. Quotient spaces are never formed;
//! complement bases, annihilator pairings and least-squares residuals stand
//! in for them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative factor of the rank threshold.
    pub rank_rel: f64,
    /// Relative factor of the image-membership threshold.
    pub img_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank_rel: 1e-10, img_rel: 1e-10 }
    }
}

impl Tolerances {
    /// `max(rows, cols) · σ_max · rank_rel`.
    pub fn rank_threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * self.rank_rel
    }

    /// `max(rows, cols) · σ_max · img_rel · (1 + ‖b‖₂)`.
    pub fn image_threshold(&self, rows: usize, cols: usize, sigma_max: f64, rhs_norm: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * self.img_rel * (1.0 + rhs_norm)
    }
}

/// Singular value decomposition with values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    /// `rows × p`, `p = min(rows, cols)`.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `cols × p`.
    pub v: DMatrix<f64>,
}

impl SortedSvd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let p = m.min(n);
        if p == 0 {
            return SortedSvd { u: DMatrix::zeros(m, 0), singular_values: Vec::new(), v: DMatrix::zeros(n, 0) };
        }
        let svd = a.clone().svd(true, true);
        let (u, sigma, v) = (svd.u.expect("u requested"), svd.singular_values, svd.v_t.expect("v_t requested").transpose());
        // nalgebra's bidiagonal iteration occasionally returns factors that do
        // not reproduce nearly rank-deficient inputs.
        let (u, sigma, v) = if factorization_ok(a, &u, sigma.as_slice(), &v) {
            (u, sigma.as_slice().to_vec(), v)
        } else {
            jacobi_svd(a)
        };
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
        let singular_values = order.iter().map(|&i| sigma[i]).collect();
        let u = DMatrix::from_fn(m, p, |r, c| u[(r, order[c])]);
        let v = DMatrix::from_fn(n, p, |r, c| v[(r, order[c])]);
        SortedSvd { u, singular_values, v }
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, rows: usize, cols: usize, tol: &Tolerances) -> usize {
        self.rank_scaled(rows, cols, 0.0, tol)
    }

    /// Rank with the threshold taken relative to `max(σ_max, scale)`.
    pub fn rank_scaled(&self, rows: usize, cols: usize, scale: f64, tol: &Tolerances) -> usize {
        let threshold = tol.rank_threshold(rows, cols, self.sigma_max().max(scale));
        self.singular_values.iter().filter(|&&s| s > threshold).count()
    }
}

fn factorization_ok(a: &DMatrix<f64>, u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> bool {
    let (m, n) = a.shape();
    let p = sigma.len();
    let tol = 64.0 * f64::EPSILON * (m + n) as f64;
    let mut us = u.clone();
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let identity = DMatrix::<f64>::identity(p, p);
    (us * v.transpose() - a).norm() <= tol * a.norm()
        && (u.transpose() * u - &identity).norm() <= tol
        && (v.transpose() * v - &identity).norm() <= tol
}

/// One-sided Jacobi SVD, unsorted, with thin factors.
fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let floor = f64::EPSILON * sigma.iter().cloned().fold(0.0, f64::max);
    let mut u = DMatrix::zeros(m, n);
    let mut filled = Vec::new();
    for j in 0..n {
        if sigma[j] > floor {
            u.set_column(j, &(w.column(j) / sigma[j]));
            filled.push(j);
        }
    }
    // Complete U with coordinate vectors orthogonalized against the filled columns.
    let mut candidate = 0;
    for j in (0..n).filter(|j| sigma[*j] <= floor) {
        loop {
            let mut e = DVector::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _pass in 0..2 {
                for &k in &filled {
                    let proj = u.column(k).dot(&e);
                    e -= u.column(k) * proj;
                }
            }
            if e.norm() > 0.5 {
                u.set_column(j, &e.normalize());
                filled.push(j);
                break;
            }
        }
    }
    (u, sigma, v)
}

/// Columns spanning a subspace of `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Wraps `columns`, rejecting linearly dependent columns.
    pub fn new(columns: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let r = rank(&columns, tol);
        if r != columns.ncols() {
            return Err(Error::Invalid(format!(
                "basis columns are dependent (rank {r} of {})",
                columns.ncols()
            )));
        }
        Ok(SubspaceBasis { basis: columns })
    }

    pub(crate) fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        SubspaceBasis { basis }
    }

    pub fn zero(ambient: usize) -> Self {
        SubspaceBasis { basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        SubspaceBasis { basis: DMatrix::identity(ambient, ambient) }
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.basis
    }
}

/// `x₀ + span(kernel)`, with the least-squares residual of `x₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSolutionSet {
    pub particular: DVector<f64>,
    pub kernel: SubspaceBasis,
    pub residual: f64,
    /// Image-membership threshold the residual was compared against.
    pub threshold: f64,
}

impl AffineSolutionSet {
    pub fn is_consistent(&self) -> bool {
        self.residual <= self.threshold
    }

    pub fn is_unique(&self) -> bool {
        self.kernel.dim() == 0
    }
}

/// Numerical rank.
pub fn rank(a: &DMatrix<f64>, tol: &Tolerances) -> usize {
    SortedSvd::new(a).rank(a.nrows(), a.ncols(), tol)
}

/// Numerical rank of a matrix whose entries are known only up to the
/// magnitude `scale` (for instance a product `B·C` with `scale = ‖B‖·‖C‖`),
/// so that round-off in an exactly vanishing product is not counted.
pub fn rank_scaled(a: &DMatrix<f64>, scale: f64, tol: &Tolerances) -> usize {
    SortedSvd::new(a).rank_scaled(a.nrows(), a.ncols(), scale, tol)
}

/// Flips each column so its first non-negligible component is positive.
fn fix_signs(mut basis: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in basis.column_iter_mut() {
        let scale = col.amax();
        if let Some(&lead) = col.iter().find(|c| c.abs() > 1e-12 * scale) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
    basis
}

/// Orthonormal basis of the right null space.
pub fn kernel_basis(a: &DMatrix<f64>, tol: &Tolerances) -> SubspaceBasis {
    kernel_with_rank(a, rank(a, tol))
}

fn kernel_with_rank(a: &DMatrix<f64>, r: usize) -> SubspaceBasis {
    let (m, n) = a.shape();
    if n == 0 {
        return SubspaceBasis::zero(0);
    }
    if m == 0 {
        return SubspaceBasis::full(n);
    }
    // Pad with zero rows so the decomposition yields a full n×n V.
    let padded = if m < n { a.clone().resize_vertically(n, 0.0) } else { a.clone() };
    let svd = SortedSvd::new(&padded);
    let cols: Vec<usize> = (r..n).collect();
    SubspaceBasis::from_orthonormal(fix_signs(svd.v.select_columns(&cols)))
}

/// Orthonormal basis of the left null space (cokernel).
pub fn cokernel_basis(a: &DMatrix<f64>, tol: &Tolerances) -> SubspaceBasis {
    kernel_basis(&a.transpose(), tol)
}

/// Orthonormal basis of the column space.
pub fn image_basis(a: &DMatrix<f64>, tol: &Tolerances) -> SubspaceBasis {
    let svd = SortedSvd::new(a);
    let r = svd.rank(a.nrows(), a.ncols(), tol);
    let cols: Vec<usize> = (0..r).collect();
    SubspaceBasis::from_orthonormal(fix_signs(svd.u.select_columns(&cols)))
}

/// Rank-truncated pseudo-inverse.
pub fn pseudo_inverse(a: &DMatrix<f64>, tol: &Tolerances) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let svd = SortedSvd::new(a);
    let r = svd.rank(m, n, tol);
    let mut pinv = DMatrix::zeros(n, m);
    for i in 0..r {
        pinv += svd.v.column(i) * svd.u.column(i).transpose() / svd.singular_values[i];
    }
    pinv
}

/// Solution set of `a·x = b` by rank-truncated least squares.
///
/// Inconsistency is reported through the residual, never as an error.
pub fn solve_affine(a: &DMatrix<f64>, b: &DVector<f64>, tol: &Tolerances) -> Result<AffineSolutionSet> {
    solve_affine_scaled(a, b, 0.0, tol)
}

/// [`solve_affine`] with rank and image thresholds relative to `max(σ_max, scale)`.
pub fn solve_affine_scaled(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    scale: f64,
    tol: &Tolerances,
) -> Result<AffineSolutionSet> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Shape(format!("matrix has {m} rows but right-hand side has {}", b.len())));
    }
    let svd = SortedSvd::new(a);
    let r = svd.rank_scaled(m, n, scale, tol);
    let mut x = DVector::zeros(n);
    for i in 0..r {
        let coef = svd.u.column(i).dot(b) / svd.singular_values[i];
        x += svd.v.column(i) * coef;
    }
    let residual = (a * &x - b).norm();
    let threshold = tol.image_threshold(m, n, svd.sigma_max().max(scale), b.norm());
    Ok(AffineSolutionSet { particular: x, kernel: kernel_with_rank(a, r), residual, threshold })
}

/// Norm of the component of `v` orthogonal to the column span of `frame`.
pub fn span_residual(frame: &DMatrix<f64>, v: &DVector<f64>, tol: &Tolerances) -> f64 {
    if frame.ncols() == 0 {
        return v.norm();
    }
    let fit = pseudo_inverse(frame, tol) * v;
    (frame * fit - v).norm()
}

/// Projectors `(P, Q)` of the splitting `ℝⁿ = E ⊕ F`: `P` onto `E` along
/// `F`, `Q = I − P` onto `F` along `E`.
pub fn complement_projectors(
    e: &SubspaceBasis,
    f: &SubspaceBasis,
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = e.ambient();
    if f.ambient() != n {
        return Err(Error::Shape(format!("ambient dimensions {} and {} differ", n, f.ambient())));
    }
    let mut joined = DMatrix::zeros(n, e.dim() + f.dim());
    joined.columns_mut(0, e.dim()).copy_from(e.matrix());
    joined.columns_mut(e.dim(), f.dim()).copy_from(f.matrix());
    let r = rank(&joined, tol);
    if e.dim() + f.dim() != n || r != n {
        return Err(Error::NotComplementary { rank: r, dim: n });
    }
    let inv = joined.try_inverse().ok_or(Error::NotComplementary { rank: r, dim: n })?;
    // Coordinates along E are the first dim(E) rows of [E|F]⁻¹.
    let p = e.matrix() * inv.rows(0, e.dim());
    let q = DMatrix::identity(n, n) - &p;
    Ok((p, q))
}

/// Classification of a pair of subspaces `E, F ⊂ G` through the pairing
/// matrix `Dⁱⱼ = ⟨αⁱ, vⱼ⟩` of an annihilator basis of `E` with a basis of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceClassification {
    /// `E + F = G`.
    pub sum_full: bool,
    /// `E ∩ F = 0`.
    pub intersection_zero: bool,
    /// `E ⊕ F = G`.
    pub direct_sum: bool,
    pub d: DMatrix<f64>,
    pub rank_d: usize,
}

/// `alpha` holds the annihilator covectors of `E` as columns (`p` of them),
/// `frame` a basis of `F` (`q` columns).
pub fn subspace_classify(
    alpha: &SubspaceBasis,
    frame: &SubspaceBasis,
    tol: &Tolerances,
) -> Result<SubspaceClassification> {
    if alpha.ambient() != frame.ambient() {
        return Err(Error::Shape("covectors and vectors live in different dimensions".into()));
    }
    let d = alpha.matrix().transpose() * frame.matrix();
    let scale = alpha.matrix().norm() * frame.matrix().norm();
    Ok(classify_pairing(d, scale, tol))
}

pub(crate) fn classify_pairing(d: DMatrix<f64>, scale: f64, tol: &Tolerances) -> SubspaceClassification {
    let (p, q) = d.shape();
    let rank_d = rank_scaled(&d, scale, tol);
    let sum_full = rank_d == p;
    let intersection_zero = rank_d == q;
    SubspaceClassification { sum_full, intersection_zero, direct_sum: sum_full && intersection_zero, d, rank_d }
}

/// The induced map `f̄ = p ∘ f ∘ j : E∘ → F/F∘` of a linear map `f: E → F`
/// with subspaces `E∘ ⊂ E`, `F∘ ⊂ F`.
///
/// The quotient is represented by an orthonormal complement `W` of `F∘`, so
/// `f̄` is the matrix `Wᵀ·f·J` with `J` a basis of `E∘`.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    reduced: DMatrix<f64>,
    complement: DMatrix<f64>,
    e_sub: DMatrix<f64>,
    map: DMatrix<f64>,
    scale: f64,
    tol: Tolerances,
}

impl QuotientMap {
    pub fn new(map: &DMatrix<f64>, e_sub: &SubspaceBasis, f_sub: &SubspaceBasis, tol: &Tolerances) -> Result<Self> {
        if e_sub.ambient() != map.ncols() || f_sub.ambient() != map.nrows() {
            return Err(Error::Shape("subspaces do not match the map's domain and codomain".into()));
        }
        let complement = cokernel_basis(f_sub.matrix(), tol).into_matrix();
        let reduced = complement.transpose() * map * e_sub.matrix();
        let scale = complement.norm() * map.norm() * e_sub.matrix().norm();
        Ok(QuotientMap {
            reduced,
            scale,
            complement,
            e_sub: e_sub.matrix().clone(),
            map: map.clone(),
            tol: *tol,
        })
    }

    /// Matrix of `f̄` in the chosen bases.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn is_injective(&self) -> bool {
        rank_scaled(&self.reduced, self.scale, &self.tol) == self.reduced.ncols()
    }

    pub fn is_surjective(&self) -> bool {
        rank_scaled(&self.reduced, self.scale, &self.tol) == self.reduced.nrows()
    }

    /// Solves `f̄(x) = b̄` for the class of `b ∈ F`; the solution set is
    /// returned in ambient coordinates of `E`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<AffineSolutionSet> {
        if b.len() != self.map.nrows() {
            return Err(Error::Shape("right-hand side does not live in the codomain".into()));
        }
        let reduced_rhs = self.complement.transpose() * b;
        // The projected right-hand side carries round-off of order ‖b‖ even when
        // the reduced matrix vanishes, hence the unit floor on the scale.
        let set = solve_affine_scaled(&self.reduced, &reduced_rhs, self.scale.max(1.0), &self.tol)?;
        Ok(AffineSolutionSet {
            particular: &self.e_sub * &set.particular,
            kernel: SubspaceBasis::from_orthonormal(&self.e_sub * set.kernel.matrix()),
            residual: set.residual,
            threshold: set.threshold,
        })
    }
}
