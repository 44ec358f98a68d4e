//! The PAMOO weight subproblem `max_{w >= 0} 2 w^T delta - w^T G w`,
//! where `G = J^T J` is the Gram matrix of the objective gradients.

use crate::error::{ensure_all_finite, AmooError, Result};
use crate::objective::ObjectiveSet;
use crate::parallel::{map_chunks, map_reduce_chunks, Exec};
use crate::point::{Point, WeightVector};

/// Symmetric-matrix entries below this magnitude on the diagonal are treated as zero curvature.
pub const ZERO_CURVATURE: f64 = 1e-14;
/// Gains below this are not worth an unbounded direction.
pub const POSITIVE_GAP: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
const POWER_ITERATIONS: usize = 50;

/// Dense m x m matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    m: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(AmooError::Config("gram matrix must be square and nonempty".into()));
        }
        Ok(Gram { m, data: rows.into_iter().flatten().collect() })
    }

    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        (0..m).for_each(|i| data[i * m + i] = 1.0);
        Gram { m, data }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn scaled(&self, c: f64) -> Gram {
        Gram { m: self.m, data: self.data.iter().map(|v| v * c).collect() }
    }

    fn mul(&self, w: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| crate::linalg::dot(self.row(i), w)).collect()
    }

    fn quad(&self, w: &[f64]) -> f64 {
        crate::linalg::dot(w, &self.mul(w))
    }

    fn trace(&self) -> f64 {
        (0..self.m).map(|i| self.get(i, i)).sum()
    }

    /// Cholesky of `G + shift I`; succeeds iff the smallest eigenvalue exceeds `-shift`.
    fn is_psd_with_slack(&self, shift: f64) -> bool {
        let m = self.m;
        let mut l = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut s = self.get(i, j) + if i == j { shift } else { 0.0 };
                for k in 0..j {
                    s -= l[i * m + k] * l[j * m + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * m + i] = s.sqrt();
                } else {
                    l[i * m + j] = s / l[j * m + j];
                }
            }
        }
        true
    }

    /// Largest eigenvalue by power iteration from the normalized all-ones vector.
    pub fn power_iteration_max_eigenvalue(&self) -> f64 {
        let mut v = vec![1.0 / (self.m as f64).sqrt(); self.m];
        let mut lambda = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let gv = self.mul(&v);
            let norm = crate::linalg::norm(&gv);
            if norm == 0.0 {
                break;
            }
            lambda = crate::linalg::dot(&v, &gv);
            v = gv.into_iter().map(|x| x / norm).collect();
        }
        lambda.max(1e-12)
    }
}

/// `(J^T J, [grad f_1, ..., grad f_m])` at `x`.
pub fn gram_matrix(set: &ObjectiveSet, x: &Point) -> Result<(Gram, Vec<Vec<f64>>)> {
    gram_matrix_with(set, x, Exec::default())
}

pub fn gram_matrix_with(set: &ObjectiveSet, x: &Point, exec: Exec) -> Result<(Gram, Vec<Vec<f64>>)> {
    let grads = set.gradients(x.as_slice())?;
    let gram = gram_from_gradients(&grads, exec);
    Ok((gram, grads))
}

/// Coordinates per work item when splitting the pairwise dot products.
const GRAM_CHUNK: usize = 4096;

/// Pairwise inner products, chunked over coordinates.
pub fn gram_from_gradients(grads: &[Vec<f64>], exec: Exec) -> Gram {
    let m = grads.len();
    let n = grads.first().map_or(0, |g| g.len());
    let upper = map_reduce_chunks(
        exec,
        n,
        GRAM_CHUNK,
        |r| {
            let mut part = Vec::with_capacity(m * (m + 1) / 2);
            for i in 0..m {
                for j in i..m {
                    part.push(crate::linalg::dot(&grads[i][r.clone()], &grads[j][r.clone()]));
                }
            }
            part
        },
        vec![0.0; m * (m + 1) / 2],
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let mut data = vec![0.0; m * m];
    let mut t = 0;
    for i in 0..m {
        for j in i..m {
            data[i * m + j] = upper[t];
            data[j * m + i] = upper[t];
            t += 1;
        }
    }
    Gram { m, data }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSubproblem {
    pub delta: Vec<f64>,
    pub gram: Gram,
}

impl WeightSubproblem {
    pub fn new(delta: Vec<f64>, gram: Gram) -> Result<Self> {
        let m = gram.dim();
        if delta.len() != m {
            return Err(AmooError::Config(format!("delta has length {} for a {m}x{m} gram", delta.len())));
        }
        ensure_all_finite("delta", &delta)?;
        ensure_all_finite("gram", &gram.data)?;
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (gram.get(i, j), gram.get(j, i));
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(AmooError::Config(format!("gram is not symmetric at ({i}, {j})")));
                }
            }
        }
        let slack = 1e-10 * gram.trace().abs().max(1.0);
        if !gram.is_psd_with_slack(slack) {
            return Err(AmooError::Config("gram matrix is not positive semidefinite".into()));
        }
        Ok(WeightSubproblem { delta, gram })
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    /// `2 w^T delta - w^T G w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        2.0 * crate::linalg::dot(w, &self.delta) - self.gram.quad(w)
    }

    /// Gradient of the objective, `2 (delta - G w)`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.gram.mul(w).iter().zip(&self.delta).map(|(gw, d)| 2.0 * (d - gw)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub weights: WeightVector,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation of the stationarity conditions at the returned point.
    pub residual: f64,
}

fn stationarity_residual(grad: &[f64], w: &[f64]) -> f64 {
    grad.iter()
        .zip(w)
        .map(|(g, wi)| if *wi > 0.0 { g.abs() } else { g.max(0.0) })
        .fold(0.0, f64::max)
}

/// Projected gradient ascent from `w = 0` with step `1 / lambda_max(G)`.
///
/// Stops when every stationarity condition holds to `tol * |delta|_inf`.
/// Zero-curvature indices with non-positive gain are pinned at zero; one
/// with positive gain makes the problem unbounded.
pub fn solve_nonneg_qp(p: &WeightSubproblem, tol: f64, max_iters: usize) -> Result<QpSolution> {
    if !(tol > 0.0) {
        return Err(AmooError::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let m = p.dim();
    let mut free = vec![true; m];
    for i in 0..m {
        if p.gram.get(i, i) <= ZERO_CURVATURE {
            if p.delta[i] > POSITIVE_GAP {
                return Err(AmooError::Unbounded { index: i });
            }
            free[i] = false;
        }
    }
    let scaled_tol = tol * p.delta.iter().fold(0.0_f64, |a, d| a.max(d.abs()));

    let max_diag = (0..m).map(|i| p.gram.get(i, i)).fold(0.0, f64::max);
    let mut lambda = p.gram.power_iteration_max_eigenvalue();
    if lambda < max_diag {
        // start vector missed the top eigenvector; the trace bounds lambda_max for PSD matrices
        lambda = p.gram.trace();
    }

    let mut w = vec![0.0; m];
    let mut obj: f64 = 0.0;
    let mut grad = p.gradient(&w);
    let mut iterations = 0;
    let mut residual = masked_residual(&grad, &w, &free);
    while residual > scaled_tol && iterations < max_iters {
        iterations += 1;
        let next: Vec<f64> = (0..m)
            .map(|i| if free[i] { (w[i] + grad[i] / (2.0 * lambda)).max(0.0) } else { 0.0 })
            .collect();
        let next_obj = p.objective(&next);
        if next_obj < obj - 1e-15 * obj.abs().max(1.0) {
            lambda *= 2.0;
            continue;
        }
        w = next;
        obj = next_obj;
        grad = p.gradient(&w);
        residual = masked_residual(&grad, &w, &free);
    }
    Ok(QpSolution {
        weights: WeightVector::new(w)?,
        objective: obj,
        converged: residual <= scaled_tol,
        iterations,
        residual,
    })
}

fn masked_residual(grad: &[f64], w: &[f64], free: &[bool]) -> f64 {
    let g: Vec<f64> = grad.iter().zip(free).map(|(g, f)| if *f { *g } else { g.min(0.0) }).collect();
    stationarity_residual(&g, w)
}

/// Exhaustive search over the grid `{0, h, ..., grid_max}^m`, `h = grid_max / (grid_steps - 1)`.
/// Returns the first best grid point in lexicographic order.
pub fn brute_force_qp_oracle(p: &WeightSubproblem, grid_max: f64, grid_steps: usize) -> Result<(Vec<f64>, f64)> {
    brute_force_qp_oracle_with(p, grid_max, grid_steps, Exec::default())
}

pub fn brute_force_qp_oracle_with(
    p: &WeightSubproblem,
    grid_max: f64,
    grid_steps: usize,
    exec: Exec,
) -> Result<(Vec<f64>, f64)> {
    let m = p.dim();
    if m > 3 {
        return Err(AmooError::Usage(format!("grid oracle supports m <= 3, got {m}")));
    }
    if grid_steps < 2 || !(grid_max > 0.0) {
        return Err(AmooError::Usage("grid needs at least 2 steps and a positive extent".into()));
    }
    let h = grid_max / (grid_steps - 1) as f64;
    let at = |k: usize| k as f64 * h;
    let (d, g) = (&p.delta, &p.gram);

    // Each work item scans one slice of the first axis.
    let best_per_slice = map_chunks(exec, grid_steps, 1, |r| {
        let i0 = r.start;
        let w0 = at(i0);
        let base0 = 2.0 * w0 * d[0] - g.get(0, 0) * w0 * w0;
        let mut best = (vec![w0], base0);
        if m == 1 {
            return best;
        }
        best.1 = f64::NEG_INFINITY;
        for i1 in 0..grid_steps {
            let w1 = at(i1);
            let base1 = base0 + 2.0 * w1 * d[1] - g.get(1, 1) * w1 * w1 - 2.0 * g.get(0, 1) * w0 * w1;
            if m == 2 {
                if base1 > best.1 {
                    best = (vec![w0, w1], base1);
                }
                continue;
            }
            let lin = 2.0 * d[2] - 2.0 * (g.get(0, 2) * w0 + g.get(1, 2) * w1);
            let curv = g.get(2, 2);
            for i2 in 0..grid_steps {
                let w2 = at(i2);
                let v = base1 + w2 * (lin - curv * w2);
                if v > best.1 {
                    best = (vec![w0, w1, w2], v);
                }
            }
        }
        best
    });
    let mut best = (vec![0.0; m], f64::NEG_INFINITY);
    for cand in best_per_slice {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{FnObjective, Objective};
    use std::sync::Arc;

    fn sub(delta: &[f64], rows: Vec<Vec<f64>>) -> WeightSubproblem {
        WeightSubproblem::new(delta.to_vec(), Gram::from_rows(rows).unwrap()).unwrap()
    }

    fn solve(p: &WeightSubproblem) -> QpSolution {
        solve_nonneg_qp(p, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap()
    }

    #[test]
    fn gram_examples() {
        let f: Arc<dyn Objective> = Arc::new(FnObjective::new(1, 0.0, |x| 0.5 * x[0] * x[0], |x| vec![x[0]]));
        let set = ObjectiveSet::new(vec![f]).unwrap();
        let (g, _) = gram_matrix(&set, &Point::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!(g, Gram::from_rows(vec![vec![1.0]]).unwrap());

        let gv = vec![1.0, 2.0, -2.0];
        let g = gram_from_gradients(&[gv.clone(), gv], Exec::Sequential);
        assert_eq!(g, Gram::from_rows(vec![vec![9.0, 9.0], vec![9.0, 9.0]]).unwrap());

        let g = gram_from_gradients(&[vec![1.0, 0.0], vec![0.0, 1.0]], Exec::Sequential);
        assert_eq!(g, Gram::identity(2));
    }

    #[test]
    fn gram_is_policy_independent() {
        let grads: Vec<Vec<f64>> =
            (0..3).map(|i| (0..20_000).map(|j| ((i * 7 + j) as f64 * 0.013).sin()).collect()).collect();
        assert_eq!(gram_from_gradients(&grads, Exec::Sequential), gram_from_gradients(&grads, Exec::Parallel));
    }

    #[test]
    fn identity_gram_returns_delta() {
        let s = solve(&sub(&[1.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert!(s.converged);
        assert!((s.weights.as_slice()[0] - 1.0).abs() < 1e-9);
        assert!((s.weights.as_slice()[1] - 0.5).abs() < 1e-9);
        assert!((s.objective - 1.25).abs() < 1e-12);
    }

    #[test]
    fn rank_one_gram_attains_flat_optimum() {
        let s = solve(&sub(&[1.0, 1.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]));
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_objective_matches_polyak() {
        let s = solve(&sub(&[0.5], vec![vec![1.0]]));
        assert_eq!(s.weights.as_slice(), &[0.5]);
    }

    #[test]
    fn negative_gains_stay_at_zero() {
        let s = solve(&sub(&[-1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 4.0]]));
        assert_eq!(s.weights.as_slice()[0], 0.0);
        assert!((s.weights.as_slice()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_curvature_with_positive_gain_is_unbounded() {
        let p = sub(&[1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(solve_nonneg_qp(&p, DEFAULT_TOL, 100), Err(AmooError::Unbounded { index: 1 }));
        let p = sub(&[1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(solve(&p).weights.as_slice()[1], 0.0);
    }

    #[test]
    fn power_iteration_miss_falls_back_to_trace() {
        // all-ones is orthogonal to the only nonzero eigenvector
        let p = sub(&[1.0, -1.0], vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let s = solve(&p);
        assert!(s.converged);
        assert!((s.objective - 1.0).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn iteration_cap_sets_flag() {
        let p = sub(&[1.0, 0.999], vec![vec![1.0, 0.999], vec![0.999, 1.0]]);
        let s = solve_nonneg_qp(&p, DEFAULT_TOL, 2).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 2);
    }

    #[test]
    fn rejects_invalid_subproblems() {
        let g = Gram::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(WeightSubproblem::new(vec![1.0, 1.0], g).is_err());
        let g = Gram::from_rows(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(WeightSubproblem::new(vec![1.0, 1.0], g).is_err());
        assert!(WeightSubproblem::new(vec![1.0], Gram::identity(2)).is_err());
        assert!(WeightSubproblem::new(vec![f64::NAN], Gram::identity(1)).is_err());
    }

    #[test]
    fn oracle_examples() {
        let p = sub(&[1.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (_, v) = brute_force_qp_oracle(&p, 2.0, 401).unwrap();
        assert!((v - 1.25).abs() < 1e-4);
        let p = sub(&[0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (w, v) = brute_force_qp_oracle(&p, 2.0, 11).unwrap();
        assert_eq!((w, v), (vec![0.0, 0.0], 0.0));
        let p = WeightSubproblem::new(vec![0.0; 4], Gram::identity(4)).unwrap();
        assert!(matches!(brute_force_qp_oracle(&p, 1.0, 3), Err(AmooError::Usage(_))));
    }

    #[test]
    fn oracle_is_policy_independent() {
        let p = sub(&[0.3, 0.9, 0.1], vec![vec![2.0, 0.3, 0.1], vec![0.3, 1.0, 0.2], vec![0.1, 0.2, 0.5]]);
        let a = brute_force_qp_oracle_with(&p, 2.0, 41, Exec::Sequential).unwrap();
        let b = brute_force_qp_oracle_with(&p, 2.0, 41, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
