//! Approximate Forster transform by iterative whitening, with extraction of a
//! dense subspace when no full-dimensional transform exists.
//!
//! A point set is in δ-approximate radially isotropic position when every
//! point is unit and `(1/|X|) Σ (u·x)² ≥ 1/d − δ` for every unit `u`; the
//! quantifier over `u` reduces to the smallest eigenvalue of the second-moment
//! matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, Vector, UNIT_TOL};
use crate::linalg::{jacobi_eigen, second_moment, Matrix, SymmetricEigen};

/// Residual below which a point counts as lying inside a subspace.
pub const SUBSPACE_TOL: f64 = 1e-9;
/// Consecutive low-eigenvalue iterations that trigger subspace extraction.
const COLLAPSE_PATIENCE: usize = 10;
/// Relative eigenvalue below which the second moment is treated as singular.
const SINGULAR_REL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub min_dir_second_moment: f64,
    pub max_norm_dev: f64,
    pub delta_target: f64,
    pub pass: bool,
}

/// `S_A(x) = Ax/‖Ax‖`.
pub fn normalized_map(a: &Matrix, x: &Vector) -> Result<Vector> {
    let ax = a.mul_vec(x)?;
    let n = dot(&ax, &ax).sqrt();
    let scale = a.frobenius_norm() * x.norm();
    if !(n > 1e-14 * scale) || !n.is_finite() {
        return Err(Error::SingularMap(n));
    }
    Vector::new(ax.into_iter().map(|c| c / n).collect())
}

fn rip_from_slices(points: &[&[f64]], dim: usize, delta: f64) -> Result<(RipReport, SymmetricEigen)> {
    if points.is_empty() {
        return Err(Error::InvalidSize("radial isotropy check on an empty set".into()));
    }
    let m = second_moment(points.iter().copied(), dim);
    let eig = jacobi_eigen(&m)?;
    let max_norm_dev = points
        .iter()
        .map(|x| (dot(x, x).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    let lambda = eig.min_value();
    let report = RipReport {
        min_dir_second_moment: lambda,
        max_norm_dev,
        delta_target: delta,
        pass: lambda >= 1.0 / dim as f64 - delta && max_norm_dev <= UNIT_TOL,
    };
    Ok((report, eig))
}

/// Checks δ-approximate radial isotropy in the ambient dimension of `points`.
pub fn rip_check(points: &[Vector], delta: f64) -> Result<RipReport> {
    let dim = points.first().map(Vector::dim).unwrap_or(0);
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::InvalidInput("points have mixed dimensions".into()));
    }
    let slices: Vec<&[f64]> = points.iter().map(Vector::as_slice).collect();
    Ok(rip_from_slices(&slices, dim, delta)?.0)
}

/// Fraction of `points` with `|u·x| ≥ 1/(2√d)`. Requires radial isotropy at
/// `δ = 1/(2d)`, under which the fraction is at least `1/(4d)`.
pub fn soft_margin_audit(points: &[Vector], u: &Vector) -> Result<f64> {
    Ok(soft_margin_audit_many(points, std::slice::from_ref(u))?[0])
}

/// [`soft_margin_audit`] for several directions, checking isotropy once.
pub fn soft_margin_audit_many(points: &[Vector], directions: &[Vector]) -> Result<Vec<f64>> {
    let d = points.first().map(Vector::dim).unwrap_or(0);
    let report = rip_check(points, 1.0 / (2.0 * d as f64))?;
    if !report.pass {
        return Err(Error::NotRadiallyIsotropic(report));
    }
    let threshold = 1.0 / (2.0 * (d as f64).sqrt());
    directions
        .iter()
        .map(|u| {
            if u.dim() != d || !u.is_unit() {
                return Err(Error::InvalidInput("audit direction must be a unit vector of matching dimension".into()));
            }
            let hits = points.iter().filter(|x| u.dot(x).abs() >= threshold).count();
            Ok(hits as f64 / points.len() as f64)
        })
        .collect()
}

/// Result of [`forster_transform`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForsterOutput {
    /// Ambient `d×d` map: the frame map on the retained subspace and the
    /// identity on its orthogonal complement.
    pub a: Matrix,
    /// Orthonormal basis of the retained subspace `V`, as vectors of `R^d`.
    pub subspace_basis: Vec<Vector>,
    /// `k×k` map acting on coordinates in `subspace_basis`.
    pub frame_map: Matrix,
    /// Indices of the input points lying in `V`, ascending.
    pub retained_indices: Vec<usize>,
    /// `S_A` of each retained point, in the `k`-dimensional frame.
    pub transformed_points: Vec<Vector>,
    pub fraction: f64,
    pub rip: RipReport,
    /// Whitening steps across all recursion levels.
    pub iterations: usize,
}

impl ForsterOutput {
    /// Working dimension `k = dim V`.
    pub fn k(&self) -> usize {
        self.subspace_basis.len()
    }

    /// Coordinates of an ambient vector in the retained frame.
    pub fn project(&self, x: &Vector) -> Vec<f64> {
        self.subspace_basis.iter().map(|b| b.dot(x)).collect()
    }

    /// The normal in the transformed frame that labels transformed points the
    /// way `w` labels the originals: `A_k^{-T} B w`.
    pub fn pull_back_normal(&self, w: &Vector) -> Result<Vector> {
        let inv_t = self.frame_map.inverse()?.transpose();
        Vector::new(inv_t.mul_slice(&self.project(w)))
    }
}

/// Default iteration cap `ceil(10·d·ln(1/δ))`.
pub fn default_max_iters(d: usize, delta: f64) -> usize {
    ((10.0 * d as f64 * (1.0 / delta).ln()).ceil() as usize).max(1)
}

/// Places `points` (or a dense subspace of them) in δ-approximate radially
/// isotropic position.
///
/// Each step whitens the normalized transformed points, `A ← M^{-1/2}A`.
/// When `M` is singular, or its smallest eigenvalue stays tiny or stops
/// improving, the points crowding the top eigenspace are tested for an exact
/// common subspace holding at least its dimension's share of the set; the
/// search then restarts inside that subspace.
pub fn forster_transform(points: &[Vector], delta: f64, max_iters: usize) -> Result<ForsterOutput> {
    let d = points.first().map(Vector::dim).ok_or(Error::InvalidSize("empty point set".into()))?;
    if points.iter().any(|p| p.dim() != d) {
        return Err(Error::InvalidInput("points have mixed dimensions".into()));
    }
    if !(delta > 0.0 && delta < 1.0 / d as f64) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1/d) for d = {d}")));
    }
    if max_iters == 0 {
        return Err(Error::OutOfRange("max_iters must be at least 1".into()));
    }
    let mut coords = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let n = p.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput(format!("point {i} is the zero vector")));
        }
        coords.push(p.as_slice().iter().map(|c| c / n).collect::<Vec<f64>>());
    }

    // Each level maps the current frame onto a smaller one by an orthonormal
    // row basis.
    let total = points.len();
    let mut indices: Vec<usize> = (0..total).collect();
    let mut frame_rows: Vec<Vec<f64>> = identity_rows(d);
    let mut iterations = 0usize;

    loop {
        match whiten(&coords, delta, max_iters.saturating_sub(iterations).max(1))? {
            Level::Converged { a, iters, report } => {
                iterations += iters;
                let transformed: Vec<Vector> = coords
                    .iter()
                    .map(|x| map_unit(&a, x).map(Vector::from_raw))
                    .collect::<Result<_>>()?;
                let basis: Vec<Vector> = frame_rows.iter().map(|r| Vector::from_raw(r.clone())).collect();
                let ambient = ambient_map(&a, &frame_rows, d);
                let fraction = indices.len() as f64 / total as f64;
                return Ok(ForsterOutput {
                    a: ambient,
                    subspace_basis: basis,
                    frame_map: a,
                    retained_indices: indices,
                    transformed_points: transformed,
                    fraction,
                    rip: report,
                    iterations,
                });
            }
            Level::Split { rows, keep, iters } => {
                iterations += iters;
                // Compose the new basis with the current frame.
                frame_rows = rows
                    .iter()
                    .map(|r| {
                        (0..d)
                            .map(|c| r.iter().zip(&frame_rows).map(|(rj, f)| rj * f[c]).sum())
                            .collect()
                    })
                    .collect();
                coords = keep
                    .iter()
                    .map(|&i| {
                        let y: Vec<f64> = rows.iter().map(|r| dot(r, &coords[i])).collect();
                        let n = dot(&y, &y).sqrt();
                        y.into_iter().map(|c| c / n).collect()
                    })
                    .collect();
                indices = keep.iter().map(|&i| indices[i]).collect();
            }
            Level::Stuck { iters, report } => {
                return Err(Error::NoConvergence {
                    iterations: iterations + iters,
                    report,
                })
            }
        }
    }
}

enum Level {
    Converged { a: Matrix, iters: usize, report: RipReport },
    /// Restrict to the span of `rows` (orthonormal, in current coordinates),
    /// keeping the listed local indices.
    Split { rows: Vec<Vec<f64>>, keep: Vec<usize>, iters: usize },
    Stuck { iters: usize, report: RipReport },
}

fn identity_rows(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut r = vec![0.0; d];
            r[i] = 1.0;
            r
        })
        .collect()
}

fn map_unit(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    let y = a.mul_slice(x);
    let n = dot(&y, &y).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::SingularMap(n));
    }
    Ok(y.into_iter().map(|c| c / n).collect())
}

fn ambient_map(frame_map: &Matrix, rows: &[Vec<f64>], d: usize) -> Matrix {
    // Bᵀ A_k B + (I − BᵀB).
    let k = rows.len();
    let mut out = Matrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            let mut v = 0.0;
            for p in 0..k {
                let bp_i = rows[p][i];
                if bp_i == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for q in 0..k {
                    inner += frame_map[(p, q)] * rows[q][j];
                }
                v += bp_i * inner;
                v -= bp_i * rows[p][j];
            }
            out[(i, j)] += v;
        }
    }
    out
}

fn whiten(coords: &[Vec<f64>], delta: f64, budget: usize) -> Result<Level> {
    let m = coords[0].len();
    let mut a = Matrix::identity(m);
    let mut low_streak = 0usize;
    let mut history: Vec<f64> = Vec::new();
    let mut report;
    let mut iters = 0usize;
    loop {
        let ys: Vec<Vec<f64>> = coords.iter().map(|x| map_unit(&a, x)).collect::<Result<_>>()?;
        let slices: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let (rep, eig) = rip_from_slices(&slices, m, delta)?;
        report = rep;
        if report.pass {
            return Ok(Level::Converged { a, iters, report });
        }
        let lambda = eig.min_value();
        let singular = lambda <= SINGULAR_REL * eig.max_value();
        low_streak = if lambda < delta / (4.0 * m as f64) { low_streak + 1 } else { 0 };
        history.push(lambda);
        let stagnant = history.len() > COLLAPSE_PATIENCE
            && lambda <= history[history.len() - 1 - COLLAPSE_PATIENCE] * (1.0 + 1e-3);
        if singular || low_streak >= COLLAPSE_PATIENCE || stagnant {
            if let Some((rows, keep)) = extract_subspace(coords, &ys, &eig) {
                return Ok(Level::Split { rows, keep, iters });
            }
        }
        if iters >= budget || singular {
            return Ok(Level::Stuck { iters, report });
        }
        let inv_sqrt = eig.reconstruct_with(|l| 1.0 / l.sqrt());
        a = inv_sqrt.matmul(&a)?;
        let f = a.frobenius_norm();
        a.scale((m as f64).sqrt() / f);
        iters += 1;
    }
}

/// Looks for a proper subspace, spanned exactly by input points, holding at
/// least its dimension's share of them. Candidates are the points whose
/// transformed image sits mostly in a top eigenspace of `M`; the splits are
/// tried from the largest relative eigengap down.
fn extract_subspace(coords: &[Vec<f64>], ys: &[Vec<f64>], eig: &SymmetricEigen) -> Option<(Vec<Vec<f64>>, Vec<usize>)> {
    let m = eig.values.len();
    let n = coords.len();
    let mut splits: Vec<(usize, f64)> = (1..m)
        .map(|j| {
            let lo = eig.values[j].max(f64::MIN_POSITIVE);
            (j, eig.values[j - 1] / lo)
        })
        .collect();
    splits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    for (j, _) in splits {
        let top = &eig.vectors[..j];
        let candidates: Vec<usize> = (0..n)
            .filter(|&i| top.iter().map(|v| dot(v, &ys[i]).powi(2)).sum::<f64>() >= 0.5)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        // Exact span of the candidates in the original coordinates.
        let cm = second_moment(candidates.iter().map(|&i| coords[i].as_slice()), m);
        let Ok(ce) = jacobi_eigen(&cm) else { continue };
        let r = ce.values.iter().filter(|&&l| l > SINGULAR_REL * ce.max_value()).count();
        if r == 0 || r >= m {
            continue;
        }
        let rows: Vec<Vec<f64>> = ce.vectors[..r].to_vec();
        let keep: Vec<usize> = (0..n)
            .filter(|&i| {
                let x = &coords[i];
                let mut res = x.clone();
                for b in &rows {
                    let c = dot(b, x);
                    res.iter_mut().zip(b).for_each(|(r, bi)| *r -= c * bi);
                }
                dot(&res, &res).sqrt() <= SUBSPACE_TOL
            })
            .collect();
        if keep.len() as f64 >= r as f64 / m as f64 * n as f64 - 1e-12 {
            return Some((rows, keep));
        }
    }
    None
}
