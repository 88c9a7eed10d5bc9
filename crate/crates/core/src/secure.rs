//! Null-space masking machinery: kernel-basis computation, the secure
//! response projection, the two-party masked matrix product, quasi-secure
//! splitting-matrix augmentation and the sparsity-leak detector.
//!
//! The masking identity everything rests on: for orthonormal columns `Z`
//! drawn from `ker(Dᵀ)`, `Dᵀ(I − ZZᵀ)X = DᵀX` exactly, while `I − ZZᵀ` is a
//! rank-deficient projector that cannot be inverted to recover `X`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, RealMatrix, RealVector};
use crate::split::{ColumnMeta, SplittingMatrix};

/// Relative threshold below which a pivot counts as zero during rank
/// determination.
const RANK_TOL: f64 = 1e-10;

/// Tolerance of the ±eᵢ row test in [`detect_sparsity_leak`].
const LEAK_TOL: f64 = 1e-6;

/// Orthonormal vectors annihilated by the transpose of a protected matrix.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    vectors: RealMatrix,
}

impl KernelBasis {
    pub fn from_columns(vectors: RealMatrix) -> Self {
        KernelBasis { vectors }
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of basis vectors r.
    pub fn r(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &RealMatrix {
        &self.vectors
    }

    /// Max-norm orthonormality defect `‖UᵀU − I‖`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.vectors.transpose() * &self.vectors;
        let eye = RealMatrix::identity(self.r(), self.r());
        max_abs(&(gram - eye))
    }

    /// Max-norm annihilation residual `‖DᵀU‖` against the protected matrix.
    pub fn annihilation_residual(&self, d: &RealMatrix) -> f64 {
        max_abs(&(d.transpose() * &self.vectors))
    }
}

/// Splitting matrix padded with decoy binary columns and Gaussian columns
/// before kernel construction.
#[derive(Debug, Clone)]
pub struct QuasiSecureMatrix {
    /// `[M | M' | Y]`, n × (l + l1 + l2).
    pub m_star: RealMatrix,
    /// Positions of the genuine columns of `M` inside `m_star`.
    pub true_indices: Vec<usize>,
    /// Metadata of the genuine candidates.
    pub candidates: Vec<ColumnMeta>,
    pub l1: usize,
    pub l2: usize,
}

impl QuasiSecureMatrix {
    /// Extracts the rows of `values` (indexed like `m_star` columns) that
    /// belong to genuine candidates.
    pub fn filter_true_rows(&self, values: &RealVector) -> RealVector {
        RealVector::from_iterator(
            self.true_indices.len(),
            self.true_indices.iter().map(|&i| values[i]),
        )
    }
}

/// Parameters of the quasi-secure augmentation.
#[derive(Debug, Clone, Copy)]
pub struct SecureKernelConfig {
    /// Number of decoy binary columns.
    pub l1: usize,
    /// Number of Gaussian columns.
    pub l2: usize,
    /// Mean of the Gaussian columns.
    pub mu: f64,
    /// Standard deviation of the Gaussian columns.
    pub sigma: f64,
    /// Number of kernel vectors to return.
    pub r: usize,
}

/// Canonical null-space basis of the system `C·u = 0` via Gauss–Jordan
/// elimination with partial pivoting. Returns the rank of `C` and one
/// (non-orthonormalized) basis vector per free column, in free-column order.
///
/// The canonical vectors inherit the sparsity structure of `C`: a binary
/// nested splitting matrix yields per-bucket difference vectors and pure
/// unit vectors for unconstrained coordinates.
fn canonical_nullspace(c: &RealMatrix) -> (usize, Vec<RealVector>) {
    let mut a = c.clone();
    let (m, n) = (a.nrows(), a.ncols());
    let tol = RANK_TOL * max_abs(&a);
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut row = 0usize;
    for col in 0..n {
        if row >= m {
            break;
        }
        let (piv_row, piv_val) = (row..m)
            .map(|i| (i, a[(i, col)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if piv_val <= tol {
            continue;
        }
        a.swap_rows(row, piv_row);
        let p = a[(row, col)];
        for j in col..n {
            a[(row, j)] /= p;
        }
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = a[(i, col)];
            if f != 0.0 {
                for j in col..n {
                    a[(i, j)] -= f * a[(row, j)];
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }

    let rank = pivots.len();
    let is_pivot = {
        let mut mask = vec![false; n];
        for &(_, c) in &pivots {
            mask[c] = true;
        }
        mask
    };
    let mut basis = Vec::with_capacity(n - rank);
    for free in 0..n {
        if is_pivot[free] {
            continue;
        }
        let mut v = RealVector::zeros(n);
        v[free] = 1.0;
        for &(r_i, c_i) in &pivots {
            v[c_i] = -a[(r_i, free)];
        }
        basis.push(v);
    }
    (rank, basis)
}

/// Two-pass modified Gram–Schmidt over unit-scale `cols`, in place of
/// structure-free QR so that coordinate-disjoint inputs stay
/// coordinate-disjoint. Errors on near-dependence.
fn orthonormalize(cols: &mut [RealVector]) -> Result<()> {
    for _pass in 0..2 {
        for i in 0..cols.len() {
            let (head, tail) = cols.split_at_mut(i);
            let v = &mut tail[0];
            for u in head.iter() {
                let c = u.dot(v);
                v.axpy(-c, u, 1.0);
            }
            let norm = v.norm();
            if norm <= 1e-8 {
                return Err(Error::Parameter(
                    "degenerate vector set during orthonormalization".into(),
                ));
            }
            *v /= norm;
        }
    }
    Ok(())
}

/// Coordinate-connected components of a set of vectors: two vectors belong
/// to the same component when their supports are linked through shared
/// coordinates. Returns one list of vector indices per component, ordered by
/// smallest support coordinate.
fn support_components(vectors: &[RealVector], n: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let supports: Vec<Vec<usize>> = vectors
        .iter()
        .map(|v| {
            let scale = v.amax().max(f64::MIN_POSITIVE);
            (0..n).filter(|&i| v[i].abs() > 1e-12 * scale).collect()
        })
        .collect();
    for sup in &supports {
        for w in sup.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (idx, sup) in supports.iter().enumerate() {
        let root = find(&mut parent, sup[0]);
        groups.entry(root).or_default().push(idx);
    }
    let mut out: Vec<(usize, Vec<usize>)> = groups
        .into_values()
        .map(|idxs| {
            let min_coord = idxs
                .iter()
                .flat_map(|&i| supports[i].iter().copied())
                .min()
                .unwrap();
            (min_coord, idxs)
        })
        .collect();
    out.sort_by_key(|(c, _)| *c);
    out.into_iter().map(|(_, idxs)| idxs).collect()
}

/// Computes `r` orthonormal vectors spanning a subspace of `ker(Dᵀ)`.
///
/// The canonical null-space basis is mixed by a seeded random orthogonal
/// rotation *within each coordinate-connected component*, so repeated
/// requests never expose a canonical basis while the support structure of
/// the kernel itself is preserved. A kernel that decomposes into small
/// blocks (raw binary splitting matrices do) therefore yields sparse
/// vectors, and a coordinate-coupled kernel yields dense ones.
pub fn kernel_basis(d: &RealMatrix, r: usize, rng: &mut ChaCha20Rng) -> Result<KernelBasis> {
    let n = d.nrows();
    if r == 0 {
        return Err(Error::Parameter("kernel basis size r must be >= 1".into()));
    }
    let (rank, canonical) = canonical_nullspace(&d.transpose());
    let k = canonical.len();
    debug_assert_eq!(k, n - rank);
    if r > k {
        return Err(Error::Capacity(format!(
            "requested {r} kernel vectors but ker(D^T) has dimension {k} (n = {n}, rank = {rank})"
        )));
    }

    // Draw r of the k canonical vectors uniformly; each component then emits
    // as many random in-span combinations as it had draws.
    let drawn = sample(rng, k, r).into_vec();
    let mut selected_per_component: Vec<(Vec<usize>, usize)> = support_components(&canonical, n)
        .into_iter()
        .map(|idxs| {
            let hits = drawn.iter().filter(|&&d| idxs.contains(&d)).count();
            (idxs, hits)
        })
        .collect();
    selected_per_component.retain(|(_, hits)| *hits > 0);

    let mut columns: Vec<RealVector> = Vec::with_capacity(r);
    for (idxs, hits) in selected_per_component {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for attempt in 0..32 {
            let mut group: Vec<RealVector> = Vec::with_capacity(hits);
            for _ in 0..hits {
                let mut v = RealVector::zeros(n);
                for &ci in &idxs {
                    v.axpy(normal.sample(rng), &canonical[ci], 1.0);
                }
                let norm = v.norm();
                if norm > 1e-12 {
                    group.push(v / norm);
                }
            }
            if group.len() == hits && orthonormalize(&mut group).is_ok() {
                columns.extend(group);
                break;
            }
            if attempt == 31 {
                return Err(Error::Parameter(
                    "failed to draw an independent kernel combination".into(),
                ));
            }
        }
    }

    let mut vectors = RealMatrix::zeros(n, r);
    for (j, col) in columns.iter().enumerate() {
        vectors.set_column(j, col);
    }
    Ok(KernelBasis { vectors })
}

/// Stacks `r_prime` distinct basis columns, chosen uniformly, into the mask
/// matrix `Z`.
pub fn select_mask(
    basis: &KernelBasis,
    r_prime: usize,
    rng: &mut ChaCha20Rng,
) -> Result<RealMatrix> {
    if r_prime == 0 {
        return Err(Error::Parameter(
            "r' = 0 would return the input unmasked; at least one kernel vector is required".into(),
        ));
    }
    if r_prime > basis.r() {
        return Err(Error::Parameter(format!(
            "r' = {r_prime} exceeds the {} available kernel vectors",
            basis.r()
        )));
    }
    let chosen = sample(rng, basis.r(), r_prime).into_vec();
    let mut z = RealMatrix::zeros(basis.n(), r_prime);
    for (j, &c) in chosen.iter().enumerate() {
        z.set_column(j, &basis.vectors.column(c));
    }
    Ok(z)
}

/// `W = X − Z(ZᵀX)`, i.e. `(I − ZZᵀ)X` without forming the projector.
pub fn apply_mask(z: &RealMatrix, x: &RealMatrix) -> RealMatrix {
    x - z * (z.transpose() * x)
}

/// The projector `I − ZZᵀ` in explicit form, for leak inspection.
pub fn masking_projector(z: &RealMatrix) -> RealMatrix {
    RealMatrix::identity(z.nrows(), z.nrows()) - z * z.transpose()
}

/// Masks the private matrix `X` with `r_prime` randomly selected vectors of
/// the received kernel basis: `W = (I − ZZᵀ)X`.
pub fn secure_response(
    x: &RealMatrix,
    basis: &KernelBasis,
    r_prime: usize,
    rng: &mut ChaCha20Rng,
) -> Result<RealMatrix> {
    if x.nrows() != basis.n() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows but the kernel basis lives in dimension {}",
            x.nrows(),
            basis.n()
        )));
    }
    let z = select_mask(basis, r_prime, rng)?;
    Ok(apply_mask(&z, x))
}

/// Reference two-party masked product: party A protects `d_a`, party B
/// responds with a masked `d_b`, and A recovers `D_AᵀD_B` exactly.
pub fn smm_protocol(
    d_a: &RealMatrix,
    d_b: &RealMatrix,
    r: usize,
    r_prime: usize,
    seed: u64,
) -> Result<RealMatrix> {
    if d_a.nrows() != d_b.nrows() {
        return Err(Error::Dimension(format!(
            "operands must share the instance dimension: {} vs {}",
            d_a.nrows(),
            d_b.nrows()
        )));
    }
    if r_prime > r {
        return Err(Error::Parameter(format!("r' = {r_prime} exceeds r = {r}")));
    }
    use rand::SeedableRng;
    let mut rng_a = ChaCha20Rng::seed_from_u64(crate::linalg::derive_seed(seed, &[1]));
    let mut rng_b = ChaCha20Rng::seed_from_u64(crate::linalg::derive_seed(seed, &[2]));
    let basis = kernel_basis(d_a, r, &mut rng_a)?;
    let w = secure_response(d_b, &basis, r_prime, &mut rng_b)?;
    Ok(d_a.transpose() * w)
}

/// Builds the quasi-secure splitting matrix `M* = [M | M' | Y]` and a kernel
/// basis of `(M*)ᵀ`.
///
/// `M'` columns are genuine threshold patterns on random permutations of a
/// synthetic monotone feature, i.e. indicators of uniformly sized random
/// user subsets, so a revealed true column is not distinguishable from a
/// decoy by shape. `Y` columns carry Gaussian values and couple all
/// coordinates in the kernel, which removes the row sparsity that would
/// otherwise leak through the masking projector.
pub fn secure_kernel(
    m: &SplittingMatrix,
    cfg: &SecureKernelConfig,
    rng: &mut ChaCha20Rng,
) -> Result<(QuasiSecureMatrix, KernelBasis)> {
    let n = m.rows();
    let l = m.cols();
    let l_prime = l + cfg.l1 + cfg.l2;
    if l_prime >= n {
        return Err(Error::Capacity(format!(
            "augmented matrix needs l' = {l_prime} < n = {n} for a nonempty kernel"
        )));
    }
    if cfg.sigma <= 0.0 && cfg.l2 > 0 {
        return Err(Error::Parameter("sigma must be positive when l2 > 0".into()));
    }

    let mut m_star = RealMatrix::zeros(n, l_prime);
    m_star.view_mut((0, 0), (n, l)).copy_from(m.entries());
    for j in 0..cfg.l1 {
        let left_size = rng.random_range(1..n);
        let members = sample(rng, n, left_size);
        for i in members {
            m_star[(i, l + j)] = 1.0;
        }
    }
    if cfg.l2 > 0 {
        let normal = Normal::new(cfg.mu, cfg.sigma)
            .map_err(|e| Error::Parameter(format!("invalid Gaussian parameters: {e}")))?;
        for j in 0..cfg.l2 {
            for i in 0..n {
                m_star[(i, l + cfg.l1 + j)] = normal.sample(rng);
            }
        }
    }

    let basis = kernel_basis(&m_star, cfg.r, rng)?;
    Ok((
        QuasiSecureMatrix {
            m_star,
            true_indices: (0..l).collect(),
            candidates: m.column_meta().to_vec(),
            l1: cfg.l1,
            l2: cfg.l2,
        },
        basis,
    ))
}

/// Flags every row `i` of the masking projector that equals `±eᵢ` within
/// `1e-6`: for such rows the masked response would hand the row of the
/// protected matrix through unchanged, so the responding party must refuse.
pub fn detect_sparsity_leak(basis: &KernelBasis, projector: &RealMatrix) -> Vec<usize> {
    debug_assert_eq!(projector.nrows(), basis.n());
    debug_assert_eq!(projector.ncols(), basis.n());
    let n = projector.nrows();
    let mut flagged = Vec::new();
    for i in 0..n {
        let mut plus = true;
        let mut minus = true;
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let v = projector[(i, j)];
            if (v - target).abs() > LEAK_TOL {
                plus = false;
            }
            if (v + target).abs() > LEAK_TOL {
                minus = false;
            }
            if !plus && !minus {
                break;
            }
        }
        if plus || minus {
            flagged.push(i);
        }
    }
    flagged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::{propose_candidates, split_operator, SplitCandidateSet};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn random_matrix(n: usize, m: usize, rng: &mut ChaCha20Rng) -> RealMatrix {
        RealMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Nested single-feature splitting matrix over values 1..=n with
    /// thresholds placed so the matrix contains all-one and all-zero rows.
    fn leaky_fixture(n: usize) -> SplittingMatrix {
        let values: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let ids: Vec<u64> = (0..n as u64).collect();
        let cands = SplitCandidateSet {
            feature: "f".into(),
            thresholds: vec![2.5, 6.5, 9.5],
        };
        split_operator(&values, &cands, &ids).unwrap()
    }

    #[test]
    fn kernel_of_two_axes_is_third_axis() {
        let d = RealMatrix::from_columns(&[
            RealVector::from_vec(vec![1.0, 0.0, 0.0]),
            RealVector::from_vec(vec![0.0, 1.0, 0.0]),
        ]);
        let basis = kernel_basis(&d, 1, &mut rng(7)).unwrap();
        assert!((basis.vectors()[(2, 0)].abs() - 1.0).abs() <= 1e-12);
        assert!(basis.vectors()[(0, 0)].abs() <= 1e-12);
        assert!(basis.vectors()[(1, 0)].abs() <= 1e-12);
    }

    #[test]
    fn kernel_of_zero_matrix_is_full_space() {
        let d = RealMatrix::zeros(5, 1);
        let basis = kernel_basis(&d, 5, &mut rng(11)).unwrap();
        assert_eq!(basis.r(), 5);
        assert!(basis.orthonormality_defect() <= 1e-9);
    }

    #[test]
    fn kernel_annihilates_protected_matrix() {
        for seed in 0..5 {
            let mut r = rng(seed);
            let d = random_matrix(10, 2, &mut r);
            let basis = kernel_basis(&d, 4, &mut r).unwrap();
            assert!(basis.annihilation_residual(&d) <= 1e-8, "seed {seed}");
            assert!(basis.orthonormality_defect() <= 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn kernel_capacity_enforced() {
        let d = random_matrix(6, 2, &mut rng(3));
        assert!(matches!(
            kernel_basis(&d, 5, &mut rng(4)),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            kernel_basis(&d, 0, &mut rng(4)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn response_is_identity_when_basis_orthogonal_to_input() {
        // Basis = ±e3; X lives in span{e1, e2}, so ZZᵀX = 0 exactly.
        let d = RealMatrix::from_columns(&[
            RealVector::from_vec(vec![1.0, 0.0, 0.0]),
            RealVector::from_vec(vec![0.0, 1.0, 0.0]),
        ]);
        let basis = kernel_basis(&d, 1, &mut rng(5)).unwrap();
        let x = RealMatrix::from_columns(&[
            RealVector::from_vec(vec![2.0, -1.0, 0.0]),
            RealVector::from_vec(vec![0.5, 3.0, 0.0]),
        ]);
        let w = secure_response(&x, &basis, 1, &mut rng(6)).unwrap();
        assert_eq!(w, x);
    }

    #[test]
    fn response_of_zero_is_zero() {
        let mut r = rng(9);
        let d = random_matrix(8, 2, &mut r);
        let basis = kernel_basis(&d, 3, &mut r).unwrap();
        let w = secure_response(&RealMatrix::zeros(8, 4), &basis, 2, &mut r).unwrap();
        assert_eq!(w, RealMatrix::zeros(8, 4));
    }

    #[test]
    fn response_preserves_protected_products() {
        for seed in 0..10 {
            let mut r = rng(100 + seed);
            let d = random_matrix(12, 3, &mut r);
            let x = random_matrix(12, 5, &mut r);
            let basis = kernel_basis(&d, 4, &mut r).unwrap();
            let w = secure_response(&x, &basis, 2, &mut r).unwrap();
            let defect = max_abs(&(d.transpose() * &w - d.transpose() * &x));
            assert!(defect <= 1e-8, "seed {seed}: defect {defect}");
            // Dense inputs are actually masked.
            assert!(max_abs(&(&w - &x)) > 0.0);
        }
    }

    #[test]
    fn response_rejects_unmasked_request() {
        let mut r = rng(2);
        let d = random_matrix(6, 1, &mut r);
        let basis = kernel_basis(&d, 2, &mut r).unwrap();
        let x = random_matrix(6, 2, &mut r);
        assert!(matches!(
            secure_response(&x, &basis, 0, &mut r),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            secure_response(&x, &basis, 3, &mut r),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn smm_trivial_cases() {
        let e1 = RealMatrix::from_columns(&[RealVector::from_vec(vec![1.0, 0.0, 0.0])]);
        let b = RealMatrix::from_columns(&[RealVector::from_vec(vec![1.0, 2.0, 3.0])]);
        let prod = smm_protocol(&e1, &b, 2, 1, 42).unwrap();
        assert_eq!(prod.shape(), (1, 1));
        assert!((prod[(0, 0)] - 1.0).abs() <= 1e-8);

        let zero = RealMatrix::zeros(3, 2);
        let prod = smm_protocol(&e1, &zero, 2, 1, 43).unwrap();
        assert!(max_abs(&prod) <= 1e-12);
    }

    #[test]
    fn smm_matches_direct_product() {
        let mut r = rng(77);
        for case in 0..20 {
            let a = random_matrix(20, 2, &mut r);
            let b = random_matrix(20, 5, &mut r);
            let masked = smm_protocol(&a, &b, 6, 3, 1000 + case).unwrap();
            let direct = a.transpose() * &b;
            assert!(max_abs(&(masked - direct)) <= 1e-8, "case {case}");
        }
    }

    #[test]
    fn projector_rank_deficiency() {
        // I − ZZᵀ has exactly r' singular values at zero.
        let mut r = rng(8);
        let d = random_matrix(10, 2, &mut r);
        let basis = kernel_basis(&d, 5, &mut r).unwrap();
        let z = select_mask(&basis, 3, &mut r).unwrap();
        let p = masking_projector(&z);
        let sv = p.svd(false, false).singular_values;
        let tiny = sv.iter().filter(|s| **s < 1e-9).count();
        assert_eq!(tiny, 3);
    }

    #[test]
    fn secure_kernel_without_augmentation_is_plain_matrix() {
        let m = leaky_fixture(12);
        let cfg = SecureKernelConfig {
            l1: 0,
            l2: 0,
            mu: 0.0,
            sigma: 1.0,
            r: 4,
        };
        let (qs, basis) = secure_kernel(&m, &cfg, &mut rng(21)).unwrap();
        assert_eq!(qs.m_star, *m.entries());
        assert_eq!(qs.true_indices, vec![0, 1, 2]);
        assert!(basis.annihilation_residual(&qs.m_star) <= 1e-8);
    }

    #[test]
    fn secure_kernel_true_columns_recoverable() {
        let m = leaky_fixture(16);
        let cfg = SecureKernelConfig {
            l1: 3,
            l2: 2,
            mu: 0.0,
            sigma: 1.0,
            r: 5,
        };
        let (qs, basis) = secure_kernel(&m, &cfg, &mut rng(33)).unwrap();
        assert_eq!(qs.m_star.ncols(), 3 + 3 + 2);
        for (pos, &col) in qs.true_indices.iter().enumerate() {
            assert_eq!(qs.m_star.column(col), m.entries().column(pos));
        }
        assert!(basis.annihilation_residual(&qs.m_star) <= 1e-8);
        assert!(basis.orthonormality_defect() <= 1e-9);
    }

    #[test]
    fn secure_kernel_capacity() {
        let m = leaky_fixture(12);
        let cfg = SecureKernelConfig {
            l1: 6,
            l2: 4,
            mu: 0.0,
            sigma: 1.0,
            r: 2,
        };
        assert!(matches!(
            secure_kernel(&m, &cfg, &mut rng(1)),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn detector_flags_constructed_identity_rows() {
        // Z = [e1] in R³: rows 2 and 3 of I − ZZᵀ equal e2, e3.
        let z = RealMatrix::from_columns(&[RealVector::from_vec(vec![1.0, 0.0, 0.0])]);
        let basis = KernelBasis::from_columns(z.clone());
        let flagged = detect_sparsity_leak(&basis, &masking_projector(&z));
        assert_eq!(flagged, vec![1, 2]);
    }

    #[test]
    fn detector_flags_identity_projector() {
        let basis = KernelBasis::from_columns(RealMatrix::zeros(4, 0));
        let eye = RealMatrix::identity(4, 4);
        assert_eq!(detect_sparsity_leak(&basis, &eye), vec![0, 1, 2, 3]);
    }

    #[test]
    fn detector_silent_for_dense_mask() {
        let mut r = rng(14);
        let d = random_matrix(9, 2, &mut r);
        let basis = kernel_basis(&d, 4, &mut r).unwrap();
        let z = select_mask(&basis, 2, &mut r).unwrap();
        assert!(detect_sparsity_leak(&basis, &masking_projector(&z)).is_empty());
    }

    #[test]
    fn raw_binary_kernel_leaks_and_gaussian_columns_repair_it() {
        // The regression pair behind the anti-sparsity augmentation: a raw
        // nested binary matrix decomposes the kernel into per-bucket blocks,
        // so masks built from it expose most projector rows; two Gaussian
        // columns couple every coordinate and the leak disappears.
        let m = leaky_fixture(12);
        for seed in 0..8 {
            let raw = SecureKernelConfig {
                l1: 0,
                l2: 0,
                mu: 0.0,
                sigma: 1.0,
                r: 4,
            };
            let (_, basis) = secure_kernel(&m, &raw, &mut rng(500 + seed)).unwrap();
            let z = select_mask(&basis, 2, &mut rng(600 + seed)).unwrap();
            let flagged = detect_sparsity_leak(&basis, &masking_projector(&z));
            assert!(!flagged.is_empty(), "seed {seed}: raw kernel must leak");

            let repaired = SecureKernelConfig {
                l1: 0,
                l2: 2,
                mu: 0.0,
                sigma: 1.0,
                r: 4,
            };
            let (_, basis) = secure_kernel(&m, &repaired, &mut rng(500 + seed)).unwrap();
            let z = select_mask(&basis, 2, &mut rng(600 + seed)).unwrap();
            let flagged = detect_sparsity_leak(&basis, &masking_projector(&z));
            assert!(flagged.is_empty(), "seed {seed}: {flagged:?}");
        }
    }

    #[test]
    fn quantile_matrix_round_trip_through_kernel() {
        // End-to-end consistency on an organically proposed candidate set.
        let mut r = rng(55);
        let values: Vec<f64> = (0..30).map(|_| r.random_range(-5.0..5.0)).collect();
        let ids: Vec<u64> = (0..30).collect();
        let cands = propose_candidates("f", &values, 6).unwrap().unwrap();
        let m = split_operator(&values, &cands, &ids).unwrap();
        let cfg = SecureKernelConfig {
            l1: 4,
            l2: 3,
            mu: 0.0,
            sigma: 1.0,
            r: 8,
        };
        let (qs, basis) = secure_kernel(&m, &cfg, &mut r).unwrap();
        let g = RealMatrix::from_fn(30, 1, |i, _| (i as f64).sin());
        let w = secure_response(&g, &basis, 4, &mut r).unwrap();
        let recovered = qs.m_star.transpose() * &w;
        let direct = qs.m_star.transpose() * &g;
        assert!(max_abs(&(recovered - direct)) <= 1e-8);
    }
}
