//! Oblique reflection operators.
//!
//! A reflection field is a matrix-valued map `y -> H(y)` that sends the
//! outward normal cone of the domain at `y` into the switching cone (the
//! nonpositive coordinate directions supported on active constraints) while
//! staying uniformly coercive on normal directions. Four constructions are
//! provided: the barycentric operator for uncontrolled chains built from the
//! deleted-row/column inverses, the symmetric three-mode operator with
//! explicit vertex matrices, the symmetric-family operator for the uniform
//! chain in any dimension, and the vertex matrices for the cyclic
//! controlled-randomisation example. A sampling verifier produces the
//! certificate (coercivity floor, cone defect, norm bound) that downstream
//! consumers require.

use crate::error::ReflectionError;
use crate::geometry::{
    barycentric_coordinates, builtin, normal_generators, DomainVerdict, SwitchingDomain,
};
use crate::linalg::{dot, norm2, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fields are accepted only when the sampled coercivity floor clears this.
pub const ETA_FLOOR: f64 = 1e-6;
/// Cone-membership tolerance for verification.
pub const CONE_TOL: f64 = 1e-9;
/// Exhaustive copositivity testing is exact up to this matrix size.
pub const COPOSITIVITY_EXACT_CAP: usize = 6;

/// Which construction produced a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldConstruction {
    MarkovianBarycentric,
    Dim3NonMarkovian,
    SymmetricFamily,
    ControlledDim3Vertices,
}

/// Piecewise-linear reflection operator anchored at the slice vertices.
#[derive(Debug, Clone)]
pub struct ReflectionField {
    pub construction: FieldConstruction,
    pub domain: SwitchingDomain,
    /// Slice vertices; vertex `j` is the one whose own constraint `j` is
    /// slack while all others are active.
    pub vertices: Vec<Vec<f64>>,
    pub vertex_matrices: Vec<Mat>,
    /// Sampled coercivity floor, recorded by verification.
    pub eta: f64,
    /// Sampled operator-norm bound, recorded by verification.
    pub bound: f64,
    /// Whether the construction promises symmetric positive definite values.
    pub symmetric: bool,
}

impl ReflectionField {
    /// Evaluate the field: values are translation-invariant along the ones
    /// vector, equal to the vertex matrices at the vertices, interpolated
    /// barycentrically on the slice, and extended outside the domain through
    /// the Euclidean projection.
    pub fn evaluate(&self, y: &[f64]) -> Mat {
        let d = self.domain.d();
        let point: Vec<f64> = if self.domain.model.membership(y, 1e-9).0 {
            y.to_vec()
        } else {
            euclid_or_self(&self.domain, y)
        };
        // Reduce along the ones direction, then snap to a vertex when
        // within working precision so vertex values are returned exactly.
        let slice: Vec<f64> = point.iter().map(|v| v - point[d - 1]).collect();
        for (v, m) in self.vertices.iter().zip(&self.vertex_matrices) {
            if slice.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-12) {
                return m.clone();
            }
        }
        let lambda = match barycentric_coordinates(&slice, &self.vertices) {
            Ok(l) => l,
            Err(_) => vec![1.0 / d as f64; d],
        };
        // Clamp the tiny negatives produced by projected points.
        let clamped: Vec<f64> = lambda.iter().map(|l| l.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let mut h = Mat::zeros(d, d);
        for (l, m) in clamped.iter().zip(&self.vertex_matrices) {
            if *l > 0.0 {
                h = h.add(&m.scale(l / total));
            }
        }
        h
    }
}

fn euclid_or_self(domain: &SwitchingDomain, y: &[f64]) -> Vec<f64> {
    domain.euclidean_project(y).unwrap_or_else(|_| y.to_vec())
}

/// Outcome of a strict-copositivity test.
#[derive(Debug, Clone)]
pub enum Copositivity {
    /// Minimum of the quadratic form over the standard simplex (when the
    /// exhaustive facial test ran) or `None` when certified by the
    /// positive-definite sufficient condition.
    Strict { simplex_min: Option<f64> },
    /// A nonnegative witness with nonpositive quadratic value.
    NotStrict { witness: Vec<f64>, value: f64 },
    /// Above the exact cap and no certificate either way.
    Inconclusive,
}

impl Copositivity {
    pub fn is_strict(&self) -> bool {
        matches!(self, Copositivity::Strict { .. })
    }
}

/// Decide strict copositivity of a square matrix: positive definiteness of
/// the symmetric part certifies it outright; otherwise the quadratic form is
/// minimised exactly over the standard simplex by facial enumeration (exact
/// for sizes up to the cap), and larger sizes fall back to sampling.
pub fn copositivity_check(m: &Mat) -> Copositivity {
    let n = m.rows();
    assert_eq!(n, m.cols(), "copositivity needs a square matrix");
    let sym = m.add(&m.transpose()).scale(0.5);

    let eigs = sym.symmetric_eigenvalues();
    if eigs[0] > 1e-12 * sym.max_abs().max(1.0) {
        return Copositivity::Strict { simplex_min: None };
    }

    if n <= COPOSITIVITY_EXACT_CAP {
        let (min_val, argmin) = simplex_minimum(&sym);
        // A vanishing minimum on the simplex already defeats strictness;
        // classify through a scale-relative band so rounding cannot promote
        // a zero to "strict".
        if min_val > 1e-12 * sym.max_abs().max(1.0) {
            Copositivity::Strict {
                simplex_min: Some(min_val),
            }
        } else {
            Copositivity::NotStrict {
                witness: argmin,
                value: min_val,
            }
        }
    } else {
        // Sampling fallback: only a negative certificate is possible.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst = f64::INFINITY;
        let mut arg = vec![0.0; n];
        for _ in 0..100_000 {
            let mut x: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            let val = quad_form(&sym, &x);
            if val < worst {
                worst = val;
                arg = x;
            }
        }
        if worst <= 0.0 {
            Copositivity::NotStrict {
                witness: arg,
                value: worst,
            }
        } else {
            Copositivity::Inconclusive
        }
    }
}

fn quad_form(a: &Mat, x: &[f64]) -> f64 {
    dot(x, &a.matvec(x))
}

/// Minimum of `x^T A x` over the standard simplex for symmetric `A`: every
/// face contributes its interior stationary point (if it has one in the
/// relative interior) and the vertices contribute the diagonal. Faces whose
/// bordered stationarity system is singular are covered by a sampling net.
fn simplex_minimum(a: &Mat) -> (f64, Vec<f64>) {
    let n = a.rows();
    let mut best = f64::INFINITY;
    let mut arg = vec![0.0; n];
    let mut degenerate_faces = false;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        if k == 1 {
            let i = support[0];
            if a[(i, i)] < best {
                best = a[(i, i)];
                arg = vec![0.0; n];
                arg[i] = 1.0;
            }
            continue;
        }
        // Stationarity of x^T A x on the face: 2 A_S x = lambda 1, sum x = 1.
        let mut sys = Mat::zeros(k + 1, k + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                sys[(r, c)] = 2.0 * a[(i, j)];
            }
            sys[(r, k)] = -1.0;
            sys[(k, r)] = 1.0;
        }
        let mut rhs = vec![0.0; k + 1];
        rhs[k] = 1.0;
        let Ok(sol) = sys.solve(&rhs) else {
            degenerate_faces = true;
            continue;
        };
        if sol[..k].iter().any(|&v| v <= 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (r, &i) in support.iter().enumerate() {
            x[i] = sol[r];
        }
        let val = quad_form(a, &x);
        if val < best {
            best = val;
            arg = x;
        }
    }
    if degenerate_faces {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        for _ in 0..20_000 {
            let mut x: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            let val = quad_form(a, &x);
            if val < best {
                best = val;
                arg = x;
            }
        }
    }
    (best, arg)
}

/// Barycentric operator for an uncontrolled chain: at vertex `j` the matrix
/// carries the transposed inverse of `Q^{(j,j)}` on the complementary block
/// (zero row and column `j`), so every normal generator `n_i` is sent to
/// `-e_i`. Requires strict copositivity of every deleted block.
pub fn build_h_markovian(domain: &SwitchingDomain) -> Result<ReflectionField, ReflectionError> {
    let model = &domain.model;
    if !model.is_uncontrolled() {
        return Err(ReflectionError::Geometry(
            crate::error::GeometryError::NotUncontrolled,
        ));
    }
    if domain.certificate.verdict != DomainVerdict::NonemptyInterior {
        return Err(ReflectionError::Geometry(
            crate::error::GeometryError::EmptyInterior,
        ));
    }
    let vertices = domain
        .slice_vertices
        .clone()
        .ok_or(ReflectionError::Geometry(
            crate::error::GeometryError::EmptyInterior,
        ))?;
    let d = model.d();
    let p = &model.p[0];
    for i in 0..d {
        if !copositivity_check(&p.q_minor(i)).is_strict() {
            return Err(ReflectionError::NotCopositive { index: i });
        }
    }
    let mut matrices = Vec::with_capacity(d);
    for i in 0..d {
        let inv_t = p
            .q_minor(i)
            .inverse()
            .map_err(|_| ReflectionError::NotCopositive { index: i })?
            .transpose();
        let mut h = Mat::zeros(d, d);
        for r in 0..d - 1 {
            for c in 0..d - 1 {
                let rr = r + usize::from(r >= i);
                let cc = c + usize::from(c >= i);
                h[(rr, cc)] = inv_t[(r, c)];
            }
        }
        matrices.push(h);
    }
    Ok(ReflectionField {
        construction: FieldConstruction::MarkovianBarycentric,
        domain: domain.clone(),
        vertices,
        vertex_matrices: matrices,
        eta: 0.0,
        bound: 0.0,
        symmetric: false,
    })
}

/// Symmetric positive definite operator for the three-mode chain with free
/// transition probabilities `p, q, r` strictly inside the unit interval.
/// The three vertex matrices are closed forms; each maps the two normal
/// generators active at its vertex onto negative coordinate directions.
pub fn build_h_dim3(
    p: f64,
    q: f64,
    r: f64,
    cbar: Vec<f64>,
) -> Result<ReflectionField, ReflectionError> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 && r > 0.0 && r < 1.0) {
        return Err(ReflectionError::DegenerateTransition { p, q, r });
    }
    let model = builtin::dim3(p, q, r, cbar)
        .map_err(|e| ReflectionError::Geometry(crate::error::GeometryError::Model(e)))?;
    let domain = SwitchingDomain::build(model).map_err(ReflectionError::Geometry)?;
    if domain.certificate.verdict != DomainVerdict::NonemptyInterior {
        return Err(ReflectionError::Geometry(
            crate::error::GeometryError::EmptyInterior,
        ));
    }
    let vertices = domain
        .slice_vertices
        .clone()
        .ok_or(ReflectionError::Geometry(
            crate::error::GeometryError::EmptyInterior,
        ))?;

    // Vertex with constraints {1,2} active (third constraint slack).
    let m_a = Mat::from_rows(&[
        vec![1.0 + p, 1.0 + p * q, 1.0],
        vec![1.0 + p * q, 1.0 + q, 1.0],
        vec![1.0, 1.0, 1.0],
    ])
    .scale(1.0 / (p * q * (1.0 - p * q)));
    // Constraints {1,3} active.
    let m_b = Mat::from_rows(&[
        vec![2.0 - p, 1.0, 1.0 + r * (1.0 - p)],
        vec![1.0, 1.0, 1.0],
        vec![1.0 + r * (1.0 - p), 1.0, 1.0 + r],
    ])
    .scale(1.0 / (r * (1.0 - p) * (1.0 - r * (1.0 - p))));
    // Constraints {2,3} active.
    let m_c = Mat::from_rows(&[
        vec![1.0, 1.0, 1.0],
        vec![1.0, 2.0 - q, 1.0 + (1.0 - q) * (1.0 - r)],
        vec![1.0, 1.0 + (1.0 - q) * (1.0 - r), 2.0 - r],
    ])
    .scale(1.0 / ((1.0 - q) * (1.0 - r) * (1.0 - (1.0 - q) * (1.0 - r))));

    // Slice vertex j is the one whose own constraint j stays slack, so the
    // matrix with {1,2} active belongs to vertex 2 and so on.
    let vertex_matrices = vec![m_c, m_b, m_a];
    Ok(ReflectionField {
        construction: FieldConstruction::Dim3NonMarkovian,
        domain,
        vertices,
        vertex_matrices,
        eta: 0.0,
        bound: 0.0,
        symmetric: true,
    })
}

/// Symmetric-family operator for the uniform chain `P_{i,j} = 1/(d-1)` off
/// the diagonal, unit costs. The base vertex matrix has diagonal `a = 2`,
/// generic off-diagonal `a - (d-1)/d` and final row/column `a - 2(d-1)/d`;
/// the other vertices are index swaps of the base.
pub fn build_h_symmetric(d: usize) -> Result<ReflectionField, ReflectionError> {
    if d < 3 {
        return Err(ReflectionError::DimensionTooSmall(d));
    }
    let model = builtin::symmetric(d, vec![1.0; d])
        .map_err(|e| ReflectionError::Geometry(crate::error::GeometryError::Model(e)))?;
    let domain = SwitchingDomain::build(model).map_err(ReflectionError::Geometry)?;
    let vertices = domain
        .slice_vertices
        .clone()
        .ok_or(ReflectionError::Geometry(
            crate::error::GeometryError::EmptyInterior,
        ))?;

    let a = 2.0;
    let ratio = (d - 1) as f64 / d as f64;
    let mut base = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            base[(i, j)] = if i == d - 1 || j == d - 1 {
                a - 2.0 * ratio
            } else if i == j {
                a
            } else {
                a - ratio
            };
        }
    }
    let mut vertex_matrices = Vec::with_capacity(d);
    for k in 0..d {
        // Swap indices k and d-1 in both rows and columns.
        let mut m = Mat::zeros(d, d);
        let perm = |i: usize| -> usize {
            if i == k {
                d - 1
            } else if i == d - 1 {
                k
            } else {
                i
            }
        };
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = base[(perm(i), perm(j))];
            }
        }
        vertex_matrices.push(m);
    }
    Ok(ReflectionField {
        construction: FieldConstruction::SymmetricFamily,
        domain,
        vertices,
        vertex_matrices,
        eta: 0.0,
        bound: 0.0,
        symmetric: true,
    })
}

/// Closed-form determinant of the symmetric-family base matrix.
pub fn symmetric_det_closed_form(d: usize, a: f64) -> f64 {
    let ratio = (d - 1) as f64 / d as f64;
    (a - 2.0 * ratio) * (d - 1) as f64 * ratio.powi(d as i32 - 2)
}

/// Closed-form trace of the symmetric-family base matrix.
pub fn symmetric_trace_closed_form(d: usize, a: f64) -> f64 {
    d as f64 * a - 2.0 * (d - 1) as f64 / d as f64
}

/// Vertex data for the cyclic controlled-randomisation example: the three
/// extreme slice points and symmetric positive definite matrices mapping
/// each vertex's two active-constraint gradients onto negative coordinate
/// directions. The third listed vertex is the ones-translate of the first,
/// so it shares the first vertex's matrix.
#[derive(Debug, Clone)]
pub struct ControlledDim3Vertices {
    /// As listed: (1,0,0), (0,1,0), (0,-1,-1).
    pub vertices: Vec<Vec<f64>>,
    pub matrices: Vec<Mat>,
}

pub fn build_h_controlled_dim3_vertices() -> ControlledDim3Vertices {
    let h1 = Mat::from_rows(&[
        vec![1.0, 1.0, 1.0],
        vec![1.0, 2.0, 1.0],
        vec![1.0, 1.0, 2.0],
    ]);
    let h2 = Mat::from_rows(&[
        vec![2.0, 1.0, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![1.0, 1.0, 2.0],
    ]);
    let h3 = h1.clone();
    ControlledDim3Vertices {
        vertices: vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, -1.0],
        ],
        matrices: vec![h1, h2, h3],
    }
}

/// Full field for the controlled example, anchored at the slice triangle
/// `(1,0,0), (0,1,0), (-1,-1,0)`; the third matrix is the cyclic image of
/// the second.
pub fn build_h_controlled_dim3_field(
    grid_points: usize,
) -> Result<ReflectionField, ReflectionError> {
    let domain = SwitchingDomain::build(builtin::example3(grid_points))
        .map_err(ReflectionError::Geometry)?;
    let printed = build_h_controlled_dim3_vertices();
    let h3 = Mat::from_rows(&[
        vec![2.0, 1.0, 1.0],
        vec![1.0, 2.0, 1.0],
        vec![1.0, 1.0, 1.0],
    ]);
    Ok(ReflectionField {
        construction: FieldConstruction::ControlledDim3Vertices,
        domain,
        vertices: vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![-1.0, -1.0, 0.0],
        ],
        vertex_matrices: vec![printed.matrices[0].clone(), printed.matrices[1].clone(), h3],
        eta: 0.0,
        bound: 0.0,
        symmetric: true,
    })
}

/// Verification certificate for a reflection field.
#[derive(Debug, Clone)]
pub struct HCertificate {
    pub construction: FieldConstruction,
    /// Minimum of `v^T H v` over sampled unit normal-cone vectors.
    pub eta_min: f64,
    /// Worst violation of cone membership over all samples.
    pub cone_max_defect: f64,
    /// Worst asymmetry of evaluated matrices (symmetric constructions).
    pub symmetry_defect: f64,
    /// Largest sampled operator norm.
    pub bound_max: f64,
    /// Smallest and largest eigenvalues seen (symmetric constructions).
    pub eig_min: f64,
    pub eig_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    pub failure: Option<String>,
}

impl HCertificate {
    /// Structured text record for inclusion in reports.
    pub fn to_record(&self) -> String {
        format!(
            "h-certificate construction={:?} pass={} eta_min={:.17e} cone_max_defect={:.17e} \
             symmetry_defect={:.17e} bound_max={:.17e} eig_min={:.17e} eig_max={:.17e} \
             samples={} seed={}",
            self.construction,
            self.pass,
            self.eta_min,
            self.cone_max_defect,
            self.symmetry_defect,
            self.bound_max,
            self.eig_min,
            self.eig_max,
            self.samples,
            self.seed
        )
    }
}

/// Verify a barycentric field by stratified boundary sampling: every proper
/// nonempty support of the vertex set is sampled, the normal-cone
/// generators of the complementary active set are pushed through the field,
/// and coercivity is measured on unit cone vectors.
pub fn verify_h(field: &ReflectionField, sample_count: usize, seed: u64) -> HCertificate {
    // The controlled construction has curved edges and per-vertex maximising
    // controls; its cone checks live at the vertices with the active
    // constraint gradients of the maximisers.
    if field.construction == FieldConstruction::ControlledDim3Vertices {
        return verify_controlled_vertices(field, seed);
    }
    let d = field.domain.d();
    let model = &field.domain.model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut eta_min = f64::INFINITY;
    let mut cone_max_defect = 0.0f64;
    let mut symmetry_defect = 0.0f64;
    let mut bound_max = 0.0f64;
    let mut eig_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    let mut samples = 0usize;
    let mut failure: Option<String> = None;

    // Proper nonempty supports, vertices first.
    let mut supports: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1 << d) - 1 {
        supports.push((0..d).filter(|i| mask & (1 << i) != 0).collect());
    }
    supports.sort_by_key(|s| s.len());
    let per_stratum = (sample_count / supports.len()).max(1);

    for support in &supports {
        let versions = if support.len() == 1 { 1 } else { per_stratum };
        for _ in 0..versions {
            // Point in the stratum: positive weights on the support.
            let mut lambda = vec![0.0; d];
            if support.len() == 1 {
                lambda[support[0]] = 1.0;
            } else {
                let raw: Vec<f64> = support
                    .iter()
                    .map(|_| 0.05 + 0.95 * rng.random::<f64>())
                    .collect();
                let s: f64 = raw.iter().sum();
                for (k, &i) in support.iter().enumerate() {
                    lambda[i] = raw[k] / s;
                }
            }
            let mut y = vec![0.0; d];
            for (l, v) in lambda.iter().zip(&field.vertices) {
                for k in 0..d {
                    y[k] += l * v[k];
                }
            }
            samples += 1;
            let h = field.evaluate(&y);

            if field.symmetric {
                symmetry_defect = symmetry_defect.max(h.symmetry_defect());
                let eigs = h.symmetric_eigenvalues();
                eig_min = eig_min.min(eigs[0]);
                eig_max = eig_max.max(eigs[eigs.len() - 1]);
                bound_max = bound_max.max(eigs[eigs.len() - 1].abs().max(eigs[0].abs()));
            } else {
                bound_max = bound_max.max(h.norm_frobenius());
            }

            let generators = normal_generators(model, support);
            let active: Vec<usize> = generators.iter().map(|(j, _)| *j).collect();
            // Test vectors: each generator alone plus random nonnegative
            // combinations.
            let mut tests: Vec<Vec<f64>> = generators.iter().map(|(_, n)| n.clone()).collect();
            for _ in 0..4 {
                let mut v = vec![0.0; d];
                for (_, n) in &generators {
                    let w: f64 = rng.random();
                    for k in 0..d {
                        v[k] += w * n[k];
                    }
                }
                tests.push(v);
            }
            for v in &tests {
                let norm = norm2(v);
                if norm < 1e-14 {
                    continue;
                }
                let hv = h.matvec(v);
                for (k, &hvk) in hv.iter().enumerate() {
                    let defect = if active.contains(&k) {
                        hvk.max(0.0)
                    } else {
                        hvk.abs()
                    };
                    if defect > cone_max_defect {
                        cone_max_defect = defect;
                        if defect > CONE_TOL && failure.is_none() {
                            failure = Some(format!(
                                "cone defect {defect:.3e} at support {support:?} component {k}"
                            ));
                        }
                    }
                }
                let eta = dot(v, &hv) / (norm * norm);
                if eta < eta_min {
                    eta_min = eta;
                }
            }
        }
    }

    if eta_min <= ETA_FLOOR && failure.is_none() {
        failure = Some(format!("coercivity floor not met: eta {eta_min:.3e}"));
    }
    if field.symmetric && symmetry_defect > 1e-12 && failure.is_none() {
        failure = Some(format!("symmetry defect {symmetry_defect:.3e}"));
    }
    // Symmetric constructions must stay positive definite so the spectral
    // window [1/L, L] exists.
    if field.symmetric && eig_min <= 0.0 && failure.is_none() {
        failure = Some(format!(
            "lost positive definiteness: min eigenvalue {eig_min:.3e}"
        ));
    }
    let pass = failure.is_none();
    HCertificate {
        construction: field.construction,
        eta_min,
        cone_max_defect,
        symmetry_defect,
        bound_max,
        eig_min,
        eig_max,
        samples,
        seed,
        pass,
        failure,
    }
}

/// Vertex verification for the controlled construction: at each slice
/// vertex the gradients of the active constraints (taken at their
/// maximising controls) must map to nonpositive multiples of their own
/// coordinate directions, with symmetric positive definite values.
fn verify_controlled_vertices(field: &ReflectionField, seed: u64) -> HCertificate {
    let model = &field.domain.model;
    let d = field.domain.d();
    let mut eta_min = f64::INFINITY;
    let mut cone_max_defect = 0.0f64;
    let mut symmetry_defect = 0.0f64;
    let mut bound_max = 0.0f64;
    let mut eig_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    let mut samples = 0usize;
    let mut failure: Option<String> = None;

    for (v, h) in field.vertices.iter().zip(&field.vertex_matrices) {
        samples += 1;
        symmetry_defect = symmetry_defect.max(h.symmetry_defect());
        let eigs = h.symmetric_eigenvalues();
        eig_min = eig_min.min(eigs[0]);
        eig_max = eig_max.max(eigs[eigs.len() - 1]);
        bound_max = bound_max.max(eigs[eigs.len() - 1].abs().max(eigs[0].abs()));

        let active: Vec<usize> = (0..d)
            .filter(|&i| v[i] - model.obstacle(v, i) <= 1e-9)
            .collect();
        for &i in &active {
            let (u_star, _) = model.argmax_control(v, i);
            let mut n: Vec<f64> = model.p[u_star].row(i).to_vec();
            n[i] -= 1.0;
            let hv = h.matvec(&n);
            for (k, &hvk) in hv.iter().enumerate() {
                let defect = if k == i { hvk.max(0.0) } else { hvk.abs() };
                if defect > cone_max_defect {
                    cone_max_defect = defect;
                    if defect > CONE_TOL && failure.is_none() {
                        failure = Some(format!(
                            "cone defect {defect:.3e} at vertex {v:?} constraint {i}"
                        ));
                    }
                }
            }
            let norm = norm2(&n);
            if norm > 1e-14 {
                eta_min = eta_min.min(dot(&n, &hv) / (norm * norm));
            }
        }
    }
    if eta_min <= ETA_FLOOR && failure.is_none() {
        failure = Some(format!("coercivity floor not met: eta {eta_min:.3e}"));
    }
    if symmetry_defect > 1e-12 && failure.is_none() {
        failure = Some(format!("symmetry defect {symmetry_defect:.3e}"));
    }
    if eig_min <= 0.0 && failure.is_none() {
        failure = Some(format!(
            "lost positive definiteness: min eigenvalue {eig_min:.3e}"
        ));
    }
    let pass = failure.is_none();
    HCertificate {
        construction: field.construction,
        eta_min,
        cone_max_defect,
        symmetry_defect,
        bound_max,
        eig_min,
        eig_max,
        samples,
        seed,
        pass,
        failure,
    }
}

/// Verify a field and record the measured coercivity floor and norm bound
/// on it.
pub fn verify_and_record(
    field: &mut ReflectionField,
    sample_count: usize,
    seed: u64,
) -> HCertificate {
    let cert = verify_h(field, sample_count, seed);
    field.eta = cert.eta_min;
    field.bound = cert.bound_max;
    cert
}

/// The four-mode instance demonstrating that no coercive reflection
/// operator can send its three vertex normals to coordinate directions: the
/// canonical choice annihilates the quadratic form on an explicit cone
/// vector.
#[derive(Debug, Clone)]
pub struct Dim4Witness {
    pub p: crate::markov::StochasticMatrix,
    pub normals: Vec<Vec<f64>>,
    pub h: Mat,
    pub v: Vec<f64>,
    pub v_h_v: f64,
}

pub fn dim4_counterexample() -> Dim4Witness {
    let s3 = 3.0f64.sqrt();
    let p = crate::markov::StochasticMatrix::from_rows(&[
        vec![0.0, s3 / 2.0, 0.0, 1.0 - s3 / 2.0],
        vec![1.0 - s3 / 2.0, 0.0, s3 - 1.0, 1.0 - s3 / 2.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
    ])
    .expect("static counterexample");
    let q = p.q_matrix();
    let normals: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..4).map(|j| -q[(i, j)]).collect())
        .collect();

    // H is pinned on the three normals; complete it by sending the ones
    // vector to zero, which fixes a unique matrix without affecting the
    // witness value.
    let mut basis = Mat::zeros(4, 4);
    let mut images = Mat::zeros(4, 4);
    for (c, n) in normals.iter().enumerate() {
        for r in 0..4 {
            basis[(r, c)] = n[r];
        }
        images[(c, c)] = -1.0;
    }
    for r in 0..4 {
        basis[(r, 3)] = 1.0;
    }
    let h = images.matmul(&basis.inverse().expect("normals plus ones form a basis"));

    let weights = [0.5, 1.0, s3 / 2.0];
    let v: Vec<f64> = (0..4)
        .map(|k| weights.iter().zip(&normals).map(|(w, n)| w * n[k]).sum())
        .collect();
    let v_h_v = dot(&v, &h.matvec(&v));
    Dim4Witness {
        p,
        normals,
        h,
        v,
        v_h_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ControlledTransitionModel;
    use crate::markov::irreducible;

    #[test]
    fn copositivity_positive_definite_case() {
        // Deleted block of the uniform three-mode chain.
        let q11 = builtin::example2().p[0].q_minor(0);
        assert!(copositivity_check(&q11).is_strict());
    }

    #[test]
    fn copositivity_witness_found() {
        let m = Mat::from_rows(&[vec![1.0, -3.0], vec![-3.0, 1.0]]);
        match copositivity_check(&m) {
            Copositivity::NotStrict { witness, value } => {
                assert!(value <= 0.0);
                assert!(witness.iter().all(|&w| w >= 0.0));
                // The uniform direction certifies: (1,1) M (1,1)^T = -4.
                let v = quad_form(&m, &[1.0, 1.0]);
                assert!((v + 4.0).abs() < 1e-12);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn copositivity_diagonally_dominant() {
        let m = Mat::from_rows(&[
            vec![3.0, -1.0, -1.0],
            vec![-1.0, 3.0, -1.0],
            vec![-1.0, -1.0, 3.0],
        ]);
        assert!(copositivity_check(&m).is_strict());
    }

    #[test]
    fn markovian_field_on_example2() {
        let domain = SwitchingDomain::build(builtin::example2()).unwrap();
        let field = build_h_markovian(&domain).unwrap();
        // Every vertex matrix sends the normal generators of its active
        // constraints onto negative coordinate directions.
        for (j, h) in field.vertex_matrices.iter().enumerate() {
            let generators = normal_generators(&field.domain.model, &[j]);
            for (g, n) in &generators {
                let hv = h.matvec(n);
                for k in 0..3 {
                    let expect = if k == *g { -1.0 } else { 0.0 };
                    assert!((hv[k] - expect).abs() < 1e-12);
                }
            }
        }
        let cert = verify_h(&field, 1000, 17);
        assert!(cert.pass, "{:?}", cert.failure);
        assert!(cert.eta_min > 1e-3);
        assert!(cert.cone_max_defect <= CONE_TOL);
    }

    #[test]
    fn markovian_field_two_mode_classical() {
        let mut cost = Mat::zeros(2, 2);
        cost[(0, 1)] = 1.0;
        cost[(1, 0)] = 1.0;
        let model = crate::geometry::classical_embedding(&cost).unwrap();
        let domain = SwitchingDomain::build(model).unwrap();
        let field = build_h_markovian(&domain).unwrap();
        // At the vertex with constraint 0 active, the normal (-1, 1) flips
        // to the negative first coordinate direction.
        let idx = field
            .vertices
            .iter()
            .position(|v| (v[0] + 1.0).abs() < 1e-12)
            .expect("vertex (-c1, 0)");
        let h = &field.vertex_matrices[idx];
        let hv = h.matvec(&[-1.0, 1.0]);
        assert!((hv[0] + 1.0).abs() < 1e-12);
        assert!(hv[1].abs() < 1e-12);
    }

    #[test]
    fn dim3_field_printed_identities() {
        let field = build_h_dim3(0.5, 0.5, 0.5, vec![1.0; 3]).unwrap();
        // The matrix with constraints {1,2} active lives at slice vertex 2.
        let h = &field.vertex_matrices[2];
        let scale = 16.0 / 3.0;
        let expect = [[1.5, 1.25, 1.0], [1.25, 1.5, 1.0], [1.0, 1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - scale * expect[i][j]).abs() < 1e-12);
            }
        }
        // Cone identities with a = 1/q, b = 1/p.
        let hv = h.matvec(&[-1.0, 0.5, 0.5]);
        assert!((hv[0] + 2.0).abs() < 1e-10);
        assert!(hv[1].abs() < 1e-10 && hv[2].abs() < 1e-10);
        let hv = h.matvec(&[0.5, -1.0, 0.5]);
        assert!((hv[1] + 2.0).abs() < 1e-10);
        assert!(hv[0].abs() < 1e-10 && hv[2].abs() < 1e-10);
        // Symmetric positive definite.
        for m in &field.vertex_matrices {
            assert_eq!(m.symmetry_defect(), 0.0);
            let eigs = m.symmetric_eigenvalues();
            assert!(eigs[0] > 0.0);
        }
        let cert = verify_h(&field, 1000, 23);
        assert!(cert.pass, "{:?}", cert.failure);
        assert!(cert.eta_min >= 1e-3);
    }

    #[test]
    fn dim3_general_parameters_identities() {
        let (p, q, r) = (0.3, 0.6, 0.45);
        let field = build_h_dim3(p, q, r, vec![0.8, 1.1, 0.9]).unwrap();
        let h_a = &field.vertex_matrices[2];
        let hv = h_a.matvec(&[-1.0, p, 1.0 - p]);
        assert!((hv[0] + 1.0 / q).abs() < 1e-10);
        assert!(hv[1].abs() < 1e-10 && hv[2].abs() < 1e-10);
        let hv = h_a.matvec(&[q, -1.0, 1.0 - q]);
        assert!((hv[1] + 1.0 / p).abs() < 1e-10);
        let h_b = &field.vertex_matrices[1];
        let hv = h_b.matvec(&[-1.0, p, 1.0 - p]);
        assert!((hv[0] + 1.0 / r).abs() < 1e-10);
        let hv = h_b.matvec(&[r, 1.0 - r, -1.0]);
        assert!((hv[2] + 1.0 / (1.0 - p)).abs() < 1e-10);
        let h_c = &field.vertex_matrices[0];
        let hv = h_c.matvec(&[q, -1.0, 1.0 - q]);
        assert!((hv[1] + 1.0 / (1.0 - r)).abs() < 1e-10);
        let hv = h_c.matvec(&[r, 1.0 - r, -1.0]);
        assert!((hv[2] + 1.0 / (1.0 - q)).abs() < 1e-10);
        let cert = verify_h(&field, 500, 7);
        assert!(cert.pass, "{:?}", cert.failure);
    }

    #[test]
    fn dim3_rejects_degenerate() {
        assert!(matches!(
            build_h_dim3(0.0, 0.5, 0.5, vec![1.0; 3]),
            Err(ReflectionError::DegenerateTransition { .. })
        ));
    }

    #[test]
    fn symmetric_family_det_trace_and_mapping() {
        let field = build_h_symmetric(3).unwrap();
        let base = &field.vertex_matrices[2];
        assert!((base.det() - 8.0 / 9.0).abs() < 1e-10);
        let trace: f64 = (0..3).map(|i| base[(i, i)]).sum();
        assert!((trace - 14.0 / 3.0).abs() < 1e-10);
        assert!((symmetric_det_closed_form(3, 2.0) - 8.0 / 9.0).abs() < 1e-15);
        assert!((symmetric_trace_closed_form(3, 2.0) - 14.0 / 3.0).abs() < 1e-15);

        // H(y^d) f^k = -e_k.
        for d in [3usize, 4, 5] {
            let field = build_h_symmetric(d).unwrap();
            let base = &field.vertex_matrices[d - 1];
            assert!(
                (base.det() - symmetric_det_closed_form(d, 2.0)).abs()
                    < 1e-10 * symmetric_det_closed_form(d, 2.0).abs().max(1.0)
            );
            for k in 0..d - 1 {
                let f: Vec<f64> = (0..d)
                    .map(|i| if i == k { -1.0 } else { 1.0 / (d - 1) as f64 })
                    .collect();
                let hv = base.matvec(&f);
                for i in 0..d {
                    let expect = if i == k { -1.0 } else { 0.0 };
                    assert!((hv[i] - expect).abs() < 1e-12, "d={d} k={k} i={i}");
                }
            }
            // Permuted vertices map their own active normals likewise.
            for v in 0..d {
                let h = &field.vertex_matrices[v];
                for k in 0..d {
                    if k == v {
                        continue;
                    }
                    let n: Vec<f64> = (0..d)
                        .map(|i| if i == k { -1.0 } else { 1.0 / (d - 1) as f64 })
                        .collect();
                    let hv = h.matvec(&n);
                    for i in 0..d {
                        let expect = if i == k { -1.0 } else { 0.0 };
                        assert!((hv[i] - expect).abs() < 1e-12, "d={d} vertex {v} k={k}");
                    }
                }
            }
            let cert = verify_h(&field, 600, 3);
            assert!(cert.pass, "d={d}: {:?}", cert.failure);
        }

        // d = 4: the certificate's spectral window matches the closed-form
        // eigenvalues. Two of them are (d-1)/d; the other two solve the
        // quadratic pinned by the closed-form determinant and trace.
        let field4 = build_h_symmetric(4).unwrap();
        let cert4 = verify_h(&field4, 400, 9);
        let lam = 3.0 / 4.0;
        let det = symmetric_det_closed_form(4, 2.0);
        let tr = symmetric_trace_closed_form(4, 2.0);
        let prod = det / (lam * lam);
        let sum = tr - 2.0 * lam;
        let disc = (sum * sum - 4.0 * prod).sqrt();
        let lo = 0.5 * (sum - disc);
        let hi = 0.5 * (sum + disc);
        assert!((cert4.eig_min - lo.min(lam)).abs() < 1e-9);
        assert!((cert4.eig_max - hi.max(lam)).abs() < 1e-9);

        // Eigenvalue (d-1)/d with multiplicity d-2 at d = 5.
        let field = build_h_symmetric(5).unwrap();
        let eigs = field.vertex_matrices[4].symmetric_eigenvalues();
        let target = 4.0 / 5.0;
        let count = eigs.iter().filter(|e| (**e - target).abs() < 1e-9).count();
        assert_eq!(count, 3);

        assert!(matches!(
            build_h_symmetric(2),
            Err(ReflectionError::DimensionTooSmall(2))
        ));
    }

    #[test]
    fn controlled_dim3_printed_identities() {
        let data = build_h_controlled_dim3_vertices();
        let h1 = &data.matrices[0];
        let hv = h1.matvec(&[1.0, 0.0, -1.0]);
        assert!((hv[2] + 1.0).abs() < 1e-10 && hv[0].abs() < 1e-10 && hv[1].abs() < 1e-10);
        let hv = h1.matvec(&[1.0, -1.0, 0.0]);
        assert!((hv[1] + 1.0).abs() < 1e-10 && hv[0].abs() < 1e-10 && hv[2].abs() < 1e-10);
        let h2 = &data.matrices[1];
        let hv = h2.matvec(&[-1.0, 1.0, 0.0]);
        assert!((hv[0] + 1.0).abs() < 1e-10 && hv[1].abs() < 1e-10 && hv[2].abs() < 1e-10);
        for m in &data.matrices {
            assert_eq!(m.symmetry_defect(), 0.0);
            let eigs = m.symmetric_eigenvalues();
            assert!(eigs[0] > 0.0, "positive definite");
        }
        // The third vertex is the ones-translate of the first.
        let shifted: Vec<f64> = data.vertices[2].iter().map(|v| v + 1.0).collect();
        assert_eq!(shifted, data.vertices[0]);
    }

    #[test]
    fn controlled_dim3_field_verifies() {
        let mut field = build_h_controlled_dim3_field(101).unwrap();
        let cert = verify_and_record(&mut field, 100, 5);
        assert!(cert.pass, "{:?}", cert.failure);
        assert!(cert.eta_min > ETA_FLOOR);
        assert!(cert.cone_max_defect <= CONE_TOL);
        assert!(field.eta > 0.0);
        // The evaluable field returns the vertex matrices at the slice
        // triangle corners.
        let h = field.evaluate(&[1.0, 0.0, 0.0]);
        assert_eq!(h, field.vertex_matrices[0]);
        let h = field.evaluate(&[-1.0, -1.0, 0.0]);
        assert_eq!(h, field.vertex_matrices[2]);
    }

    #[test]
    fn dim4_witness_vanishes() {
        let w = dim4_counterexample();
        assert!(w.v_h_v.abs() <= 1e-12);
        // Row-stochastic and irreducible.
        for i in 0..4 {
            let s: f64 = w.p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(w.p.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert!(irreducible(&w.p));
        // Normals sum to zero.
        for n in &w.normals {
            assert!(n.iter().sum::<f64>().abs() < 1e-12);
        }
        // H pins the three normals.
        for (i, n) in w.normals.iter().enumerate() {
            let hv = w.h.matvec(n);
            for k in 0..4 {
                let expect = if k == i { -1.0 } else { 0.0 };
                assert!((hv[k] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zeroed_field_fails_verification() {
        let domain = SwitchingDomain::build(builtin::example2()).unwrap();
        let mut field = build_h_markovian(&domain).unwrap();
        for m in &mut field.vertex_matrices {
            *m = Mat::zeros(3, 3);
        }
        let cert = verify_h(&field, 200, 1);
        assert!(!cert.pass);
        assert!(cert.eta_min.abs() < 1e-15);
    }

    #[test]
    fn field_translation_and_projection_extension() {
        let domain = SwitchingDomain::build(builtin::example2()).unwrap();
        let field = build_h_markovian(&domain).unwrap();
        // Dyadic vertex: translation along ones is exact, so values match
        // bitwise.
        let v = vec![2.0, 0.0, 0.0];
        let h0 = field.evaluate(&v);
        for h in [1.0f64, 2.0, -3.0, 0.5] {
            let shifted: Vec<f64> = v.iter().map(|x| x + h).collect();
            let h1 = field.evaluate(&shifted);
            assert_eq!(h0, h1);
        }
        // Vertex snap returns the stored matrix exactly.
        assert_eq!(h0, field.vertex_matrices[0]);
        // Outside the domain the value equals the value at the projection.
        let y = vec![5.0, 0.0, 0.0];
        let proj = domain.euclidean_project(&y).unwrap();
        let hy = field.evaluate(&y);
        let hp = field.evaluate(&proj);
        for i in 0..3 {
            for j in 0..3 {
                assert!((hy[(i, j)] - hp[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn markovian_rejects_failed_copositivity() {
        // The four-mode counterexample matrix fails the gate at the block
        // whose quadratic form vanishes on the witness cone vector.
        let w = dim4_counterexample();
        let model = ControlledTransitionModel::uncontrolled(w.p.clone(), vec![1.0; 4]).unwrap();
        let domain = SwitchingDomain::build(model).unwrap();
        match build_h_markovian(&domain) {
            Err(ReflectionError::NotCopositive { index }) => {
                assert_eq!(index, 3);
                match copositivity_check(&w.p.q_minor(index)) {
                    Copositivity::NotStrict { witness, value } => {
                        assert!(value.abs() < 1e-10, "form vanishes on the witness");
                        assert!(witness.iter().all(|&x| x >= 0.0));
                    }
                    other => panic!("expected a witness, got {other:?}"),
                }
            }
            other => panic!("expected a copositivity refusal, got {other:?}"),
        }
    }
}
