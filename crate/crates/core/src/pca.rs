//! Principal component analysis over feature vectors.
//!
//! Inputs are z-score standardized per dimension (header features span many
//! orders of magnitude, so raw covariance would be dominated by a few
//! fields). The covariance matrix of the standardized data is
//! eigendecomposed with cyclic Jacobi rotations: sweeps run until the
//! off-diagonal Frobenius norm drops below 1e-10 or 100 sweeps elapse.
//! Eigenvectors are sign-fixed (largest-magnitude entry positive) so
//! repeated fits on identical data are bit-comparable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::select::FeatureVector;

const JACOBI_TOLERANCE: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Floor applied to per-dimension standard deviations; constant dimensions
/// standardize to zero instead of dividing by zero.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PcaError {
    #[error("too few samples: {0} (need at least 2)")]
    TooFewSamples(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

/// Reduction target: a fixed component count or the smallest count whose
/// cumulative explained variance reaches a fraction of the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    Components(usize),
    VarianceFraction(f64),
}

impl Default for PcaTarget {
    fn default() -> Self {
        PcaTarget::VarianceFraction(0.95)
    }
}

/// Fitted PCA: standardization statistics plus an orthonormal component
/// basis. Immutable and shareable; `transform` is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub dim_in: usize,
    pub dim_out: usize,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// `dim_out` rows of length `dim_in`, pairwise orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Non-negative, non-increasing.
    pub explained_variance: Vec<f64>,
    pub schema_id: String,
    /// True when the training data had zero total variance; transforms of
    /// such data are all-zero.
    pub degenerate: bool,
}

/// Fit a PCA model on vectors sharing one schema.
pub fn pca_fit(vectors: &[FeatureVector], target: PcaTarget) -> Result<PcaModel, PcaError> {
    if vectors.len() < 2 {
        return Err(PcaError::TooFewSamples(vectors.len()));
    }
    let schema_id = vectors[0].schema_id.clone();
    let dim = vectors[0].values.len();
    for v in vectors {
        if v.schema_id != schema_id {
            return Err(PcaError::SchemaMismatch(
                "vectors were built against different schemas".into(),
            ));
        }
        if v.values.len() != dim {
            return Err(PcaError::SchemaMismatch(format!(
                "vector length {} does not match dimension {}",
                v.values.len(),
                dim
            )));
        }
    }
    if dim == 0 {
        return Err(PcaError::InvalidTarget("input dimension is zero".into()));
    }
    match target {
        PcaTarget::Components(k) if k == 0 || k > dim => {
            return Err(PcaError::InvalidTarget(format!(
                "component count {k} outside 1..={dim}"
            )))
        }
        PcaTarget::VarianceFraction(f) if !(f > 0.0 && f <= 1.0) => {
            return Err(PcaError::InvalidTarget(format!(
                "variance fraction {f} outside (0, 1]"
            )))
        }
        _ => {}
    }

    let n = vectors.len();
    let mut means = vec![0.0; dim];
    for v in vectors {
        for (m, x) in means.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    // Sample variance (n - 1), matching the explained-variance contract.
    let mut variances = vec![0.0; dim];
    for v in vectors {
        for ((var, m), x) in variances.iter_mut().zip(&means).zip(&v.values) {
            let d = x - m;
            *var += d * d;
        }
    }
    for var in &mut variances {
        *var /= (n - 1) as f64;
    }
    let stds: Vec<f64> = variances.iter().map(|v| v.sqrt().max(STD_FLOOR)).collect();

    // Standardized data, row per sample.
    let z: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            v.values
                .iter()
                .zip(&means)
                .zip(&stds)
                .map(|((x, m), s)| (x - m) / s)
                .collect()
        })
        .collect();

    // Covariance of standardized data.
    let mut cov = vec![0.0; dim * dim];
    for row in &z {
        for i in 0..dim {
            let zi = row[i];
            if zi == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[i * dim + j] += zi * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let c = cov[i * dim + j] / denom;
            cov[i * dim + j] = c;
            cov[j * dim + i] = c;
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen_cyclic(&mut cov, dim);

    // Order by eigenvalue descending, stable in the original index.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let sorted_values: Vec<f64> = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
    let total: f64 = sorted_values.iter().sum();
    let degenerate = total <= 0.0;

    let dim_out = match target {
        PcaTarget::Components(k) => k,
        PcaTarget::VarianceFraction(f) => {
            if degenerate {
                1
            } else {
                let mut cumulative = 0.0;
                let mut k = dim;
                for (i, value) in sorted_values.iter().enumerate() {
                    cumulative += value;
                    if cumulative >= f * total {
                        k = i + 1;
                        break;
                    }
                }
                k
            }
        }
    };

    let mut components = Vec::with_capacity(dim_out);
    for &col in order.iter().take(dim_out) {
        let mut row: Vec<f64> = (0..dim).map(|i| eigenvectors[i * dim + col]).collect();
        sign_fix(&mut row);
        components.push(row);
    }

    Ok(PcaModel {
        dim_in: dim,
        dim_out,
        feature_means: means,
        feature_stds: stds,
        components,
        explained_variance: sorted_values[..dim_out].to_vec(),
        schema_id,
        degenerate,
    })
}

/// Make the largest-magnitude entry positive (earliest such entry wins).
fn sign_fix(row: &mut [f64]) {
    let mut best = 0usize;
    for (i, value) in row.iter().enumerate() {
        if value.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        for value in row.iter_mut() {
            *value = -*value;
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix stored row-major
/// in `a` (destroyed). Returns (eigenvalues, eigenvector matrix with
/// eigenvector j in column j).
fn jacobi_eigen_cyclic(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n < 2 {
        return ((0..n).map(|i| a[i * n + i]).collect(), v);
    }

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < JACOBI_TOLERANCE {
            break;
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[p * n + i] = a[i * n + p];
                    a[i * n + q] = s * aip + c * aiq;
                    a[q * n + i] = a[i * n + q];
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Project one vector: `components · ((v − means) ⊘ stds)`.
pub fn pca_transform(model: &PcaModel, vector: &FeatureVector) -> Result<Vec<f64>, PcaError> {
    if vector.schema_id != model.schema_id {
        return Err(PcaError::SchemaMismatch(
            "vector schema does not match the fitted model".into(),
        ));
    }
    if vector.values.len() != model.dim_in {
        return Err(PcaError::SchemaMismatch(format!(
            "vector length {} does not match model dimension {}",
            vector.values.len(),
            model.dim_in
        )));
    }
    let standardized: Vec<f64> = vector
        .values
        .iter()
        .zip(&model.feature_means)
        .zip(&model.feature_stds)
        .map(|((x, m), s)| (x - m) / s)
        .collect();
    Ok(model
        .components
        .iter()
        .map(|row| row.iter().zip(&standardized).map(|(a, b)| a * b).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(data: &[&[f64]]) -> Vec<FeatureVector> {
        data.iter()
            .map(|row| FeatureVector {
                values: row.to_vec(),
                schema_id: "test-schema".into(),
            })
            .collect()
    }

    fn seeded_data(n: usize, d: usize, seed: u64) -> Vec<FeatureVector> {
        // Small deterministic LCG; good enough for test fixtures.
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| FeatureVector {
                values: (0..d).map(|_| next() * 10.0 - 5.0).collect(),
                schema_id: "test-schema".into(),
            })
            .collect()
    }

    #[test]
    fn rank_one_data_needs_one_component() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let model = pca_fit(&vecs(&refs), PcaTarget::VarianceFraction(0.99)).unwrap();
        assert_eq!(model.dim_out, 1);
        let total: f64 = model.explained_variance.iter().sum();
        // Both standardized dimensions are identical: variance 2, all on PC1.
        assert!((model.explained_variance[0] / 2.0 - 1.0).abs() < 1e-9);
        assert!((total - model.explained_variance[0]).abs() < 1e-12);
    }

    #[test]
    fn full_basis_reconstructs() {
        let data = seeded_data(40, 6, 7);
        let model = pca_fit(&data, PcaTarget::Components(6)).unwrap();
        for v in &data {
            let y = pca_transform(&model, v).unwrap();
            for i in 0..6 {
                let reconstructed = model.feature_means[i]
                    + model.feature_stds[i]
                        * model
                            .components
                            .iter()
                            .zip(&y)
                            .map(|(row, yi)| row[i] * yi)
                            .sum::<f64>();
                let scale = v.values[i].abs().max(1.0);
                assert!(
                    (reconstructed - v.values[i]).abs() / scale < 1e-6,
                    "dim {i}: {reconstructed} vs {}",
                    v.values[i]
                );
            }
        }
    }

    #[test]
    fn transform_of_mean_is_zero() {
        let data = seeded_data(30, 5, 3);
        let model = pca_fit(&data, PcaTarget::Components(5)).unwrap();
        let mean = FeatureVector {
            values: model.feature_means.clone(),
            schema_id: "test-schema".into(),
        };
        for y in pca_transform(&model, &mean).unwrap() {
            assert!(y.abs() < 1e-9);
        }
    }

    #[test]
    fn orthonormal_isometry() {
        let data = seeded_data(25, 4, 11);
        let model = pca_fit(&data, PcaTarget::Components(4)).unwrap();
        for v in &data {
            let standardized: Vec<f64> = v
                .values
                .iter()
                .zip(&model.feature_means)
                .zip(&model.feature_stds)
                .map(|((x, m), s)| (x - m) / s)
                .collect();
            let y = pca_transform(&model, v).unwrap();
            let n_in: f64 = standardized.iter().map(|x| x * x).sum::<f64>().sqrt();
            let n_out: f64 = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n_in - n_out).abs() < 1e-9);
        }
    }

    #[test]
    fn projected_variance_matches_explained() {
        let data = seeded_data(60, 5, 17);
        let model = pca_fit(&data, PcaTarget::Components(5)).unwrap();
        let projected: Vec<Vec<f64>> = data
            .iter()
            .map(|v| pca_transform(&model, v).unwrap())
            .collect();
        for j in 0..model.dim_out {
            let mean: f64 = projected.iter().map(|p| p[j]).sum::<f64>() / projected.len() as f64;
            let var: f64 = projected.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>()
                / (projected.len() - 1) as f64;
            assert!(
                (var - model.explained_variance[j]).abs() < 1e-6,
                "component {j}: {var} vs {}",
                model.explained_variance[j]
            );
        }
    }

    #[test]
    fn components_are_orthonormal() {
        let data = seeded_data(50, 8, 23);
        let model = pca_fit(&data, PcaTarget::Components(8)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = model.components[i]
                    .iter()
                    .zip(&model.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8, "({i},{j}) dot {dot}");
            }
        }
    }

    #[test]
    fn monotone_component_prefix() {
        let data = seeded_data(40, 6, 29);
        let small = pca_fit(&data, PcaTarget::Components(3)).unwrap();
        let large = pca_fit(&data, PcaTarget::Components(5)).unwrap();
        for k in 0..3 {
            assert_eq!(small.components[k], large.components[k]);
        }
    }

    #[test]
    fn repeated_fits_bit_identical() {
        let data = seeded_data(30, 5, 31);
        let a = pca_fit(&data, PcaTarget::Components(4)).unwrap();
        let b = pca_fit(&data, PcaTarget::Components(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_data_transforms_to_zero() {
        let data: Vec<FeatureVector> = (0..5)
            .map(|_| FeatureVector {
                values: vec![3.0, 7.0, 1.0],
                schema_id: "test-schema".into(),
            })
            .collect();
        let model = pca_fit(&data, PcaTarget::VarianceFraction(0.95)).unwrap();
        assert!(model.degenerate);
        let y = pca_transform(&model, &data[0]).unwrap();
        assert!(y.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = seeded_data(1, 3, 1);
        assert_eq!(
            pca_fit(&data, PcaTarget::Components(1)),
            Err(PcaError::TooFewSamples(1))
        );
        let data = seeded_data(10, 3, 1);
        assert!(matches!(
            pca_fit(&data, PcaTarget::Components(4)),
            Err(PcaError::InvalidTarget(_))
        ));
        assert!(matches!(
            pca_fit(&data, PcaTarget::VarianceFraction(0.0)),
            Err(PcaError::InvalidTarget(_))
        ));
        let model = pca_fit(&data, PcaTarget::Components(2)).unwrap();
        let foreign = FeatureVector {
            values: vec![0.0; 3],
            schema_id: "other-schema".into(),
        };
        assert!(matches!(
            pca_transform(&model, &foreign),
            Err(PcaError::SchemaMismatch(_))
        ));
    }

    // Independent oracle: classical Jacobi using largest off-diagonal
    // pivot, written without reference to the cyclic implementation.
    #[allow(clippy::needless_range_loop)]
    fn oracle_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
        let n = matrix.len();
        let mut a: Vec<Vec<f64>> = matrix.to_vec();
        for _ in 0..100_000 {
            let (mut p, mut q, mut biggest) = (0, 1, 0.0f64);
            for i in 0..n {
                for j in i + 1..n {
                    if a[i][j].abs() > biggest {
                        biggest = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if biggest < 1e-13 {
                break;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a.clone();
            for i in 0..n {
                b[i][p] = c * a[i][p] - s * a[i][q];
                b[i][q] = s * a[i][p] + c * a[i][q];
            }
            let mut b2 = b.clone();
            for j in 0..n {
                b2[p][j] = c * b[p][j] - s * b[q][j];
                b2[q][j] = s * b[p][j] + c * b[q][j];
            }
            a = b2;
        }
        let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        eigenvalues.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eigenvalues
    }

    #[test]
    fn eigenvalues_match_independent_jacobi_oracle() {
        let data = seeded_data(50, 5, 42);
        let model = pca_fit(&data, PcaTarget::Components(5)).unwrap();

        // Rebuild the standardized covariance the oracle's way.
        let n = data.len();
        let d = 5;
        let mut cov = vec![vec![0.0; d]; d];
        let z: Vec<Vec<f64>> = data
            .iter()
            .map(|v| {
                (0..d)
                    .map(|i| (v.values[i] - model.feature_means[i]) / model.feature_stds[i])
                    .collect()
            })
            .collect();
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = z.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64;
            }
        }
        let expected = oracle_eigenvalues(&cov);
        for (got, want) in model.explained_variance.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }
}
