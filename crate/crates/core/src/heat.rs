//! Stationary heat equation `alpha * Lap(u) = beta * u - m` with zero-flux walls.
//!
//! The five-point Laplacian uses mirrored ghost nodes at the walls, which keeps
//! the discrete operator `beta * I - alpha * Lap_h` symmetric positive definite
//! and makes the Laplacian sum to zero over the grid, so `beta * sum(u) = sum(m)`.
//!
//! Lengths in the Laplacian are measured in units of `length_scale`, which
//! defaults to the longer side of the domain. `alpha` is therefore dimensionless
//! and the smoothing radius `sqrt(alpha / beta)` is a fraction of the domain size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};
use crate::motion::Direction;
use crate::spectral::Dct2d;

/// Linear solver used for the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Direct solve in the cosine eigenbasis of the operator.
    #[default]
    Spectral,
    /// Jacobi-preconditioned conjugate gradients, warm-started when possible.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedacParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to `10 * (nx + ny)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Unit of length for the Laplacian, in metres. Defaults to the longer domain side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    #[serde(default)]
    pub solver: SolverKind,
}

fn default_tol() -> f64 {
    1e-6
}

impl Default for HedacParams {
    fn default() -> Self {
        HedacParams {
            alpha: 0.03,
            beta: 4.0,
            tol: default_tol(),
            max_iters: None,
            length_scale: None,
            solver: SolverKind::default(),
        }
    }
}

impl HedacParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        HedacParams {
            alpha,
            beta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("hedac.alpha", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("hedac.beta", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("hedac.tol", "must lie in (0, 1)"));
        }
        if self.max_iters == Some(0) {
            return Err(Error::config("hedac.max_iters", "must be at least 1"));
        }
        if let Some(l) = self.length_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config("hedac.length_scale", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn max_iters_for(&self, spec: &GridSpec) -> usize {
        self.max_iters.unwrap_or(10 * (spec.nx + spec.ny))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub field: ScalarField,
    /// Achieved relative residual `|m - A u| / |m|` in the 2-norm.
    pub residual: f64,
    pub iters: usize,
}

/// The discrete operator `beta * I - alpha * Lap_h` on one grid.
#[derive(Debug, Clone, Copy)]
pub struct HeatOperator {
    nx: usize,
    ny: usize,
    beta: f64,
    /// `alpha / dx^2` and `alpha / dy^2` in scaled units.
    kx: f64,
    ky: f64,
}

impl HeatOperator {
    pub fn new(spec: &GridSpec, params: &HedacParams) -> Self {
        let l = params.length_scale.unwrap_or(spec.width.max(spec.height));
        let dx = spec.dx() / l;
        let dy = spec.dy() / l;
        HeatOperator {
            nx: spec.nx,
            ny: spec.ny,
            beta: params.beta,
            kx: params.alpha / (dx * dx),
            ky: params.alpha / (dy * dy),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Off-diagonal couplings (positive numbers; the matrix entries are their negatives).
    pub fn couplings(&self) -> (f64, f64) {
        (self.kx, self.ky)
    }

    /// Eigenvalues on the DCT-II basis, laid out like the grid.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sx: Vec<f64> = (0..self.nx)
            .map(|k| 4.0 * self.kx * (std::f64::consts::PI * k as f64 / (2.0 * self.nx as f64)).sin().powi(2))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for l in 0..self.ny {
            let sy = 4.0 * self.ky * (std::f64::consts::PI * l as f64 / (2.0 * self.ny as f64)).sin().powi(2);
            out.extend(sx.iter().map(|x| self.beta + x + sy));
        }
        out
    }

    pub fn diagonal(&self, i: usize, j: usize) -> f64 {
        let nbx = (i > 0) as usize + (i + 1 < self.nx) as usize;
        let nby = (j > 0) as usize + (j + 1 < self.ny) as usize;
        self.beta + self.kx * nbx as f64 + self.ky * nby as f64
    }

    /// `out = A v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (nx, ny, kx, ky, beta) = (self.nx, self.ny, self.kx, self.ky, self.beta);
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                let c = v[k];
                let mut acc = beta * c;
                if i > 0 {
                    acc += kx * (c - v[k - 1]);
                }
                if i + 1 < nx {
                    acc += kx * (c - v[k + 1]);
                }
                if j > 0 {
                    acc += ky * (c - v[k - nx]);
                }
                if j + 1 < ny {
                    acc += ky * (c - v[k + nx]);
                }
                out[k] = acc;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(beta I - alpha Lap_h) u = m` with the solver selected in `params`.
/// `warm_start` seeds the CG iteration and is ignored by the spectral solver.
pub fn solve_potential(m: &ScalarField, params: &HedacParams, warm_start: Option<&PotentialField>) -> Result<PotentialField> {
    HeatSolver::new(m.spec(), params)?.solve(m, warm_start)
}

/// Potential solver bound to one grid and parameter set; caches the
/// transform plans and operator eigenvalues between calls.
#[derive(Debug)]
pub struct HeatSolver {
    spec: GridSpec,
    params: HedacParams,
    op: HeatOperator,
    spectral: Option<(Dct2d, Vec<f64>)>,
}

impl HeatSolver {
    pub fn new(spec: &GridSpec, params: &HedacParams) -> Result<Self> {
        params.validate()?;
        let op = HeatOperator::new(spec, params);
        let spectral = match params.solver {
            SolverKind::Spectral => Some((Dct2d::new(spec.nx, spec.ny), op.eigenvalues())),
            SolverKind::Cg => None,
        };
        Ok(HeatSolver {
            spec: *spec,
            params: *params,
            op,
            spectral,
        })
    }

    pub fn params(&self) -> &HedacParams {
        &self.params
    }

    pub fn solve(&self, m: &ScalarField, warm_start: Option<&PotentialField>) -> Result<PotentialField> {
        if m.spec() != &self.spec {
            return Err(Error::Shape("source grid differs from solver grid".into()));
        }
        let u = match &self.spectral {
            Some((dct, eig)) => solve_spectral(&self.op, dct, eig, m, self.params.tol)?,
            None => solve_cg(&self.op, m, &self.params, warm_start)?,
        };
        debug_assert!(
            conservation_defect(&u.field, m, self.params.beta) <= 1e-6,
            "beta * sum(u) != sum(m): relative defect {:e}",
            conservation_defect(&u.field, m, self.params.beta)
        );
        Ok(u)
    }
}

/// `|beta * sum(u) - sum(m)| / sum(|m|)`; zero for an exact solve, since the
/// Neumann operator's fluxes cancel in the sum.
pub fn conservation_defect(u: &ScalarField, m: &ScalarField, beta: f64) -> f64 {
    let su: f64 = u.values().iter().sum();
    let sm: f64 = m.values().iter().sum();
    let scale: f64 = m.values().iter().map(|v| v.abs()).sum();
    if scale == 0.0 {
        return (beta * su).abs();
    }
    (beta * su - sm).abs() / scale
}

fn solve_spectral(op: &HeatOperator, dct: &Dct2d, eig: &[f64], m: &ScalarField, tol: f64) -> Result<PotentialField> {
    m.check_finite()?;
    let spec = *m.spec();
    let rhs = m.values();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(PotentialField {
            field: ScalarField::zeros(spec),
            residual: 0.0,
            iters: 0,
        });
    }
    let mut coeffs = dct.forward(rhs);
    for (c, l) in coeffs.iter_mut().zip(eig) {
        *c /= l;
    }
    let mut u = dct.inverse(&coeffs);
    let mut r = vec![0.0; u.len()];
    op.apply(&u, &mut r);
    for (ri, mi) in r.iter_mut().zip(rhs) {
        *ri = mi - *ri;
    }
    remove_mean(&mut u, &mut r, op.beta);
    let residual = dot(&r, &r).sqrt() / rhs_norm;
    if residual > tol {
        return Err(Error::SolverFailure { iters: 1, residual });
    }
    Ok(PotentialField {
        field: ScalarField::from_values(spec, u)?,
        residual,
        iters: 1,
    })
}

fn solve_cg(op: &HeatOperator, m: &ScalarField, params: &HedacParams, warm_start: Option<&PotentialField>) -> Result<PotentialField> {
    m.check_finite()?;
    let spec = *m.spec();
    let n = spec.len();
    let rhs = m.values();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(PotentialField {
            field: ScalarField::zeros(spec),
            residual: 0.0,
            iters: 0,
        });
    }

    let mut u = match warm_start {
        Some(w) if w.field.spec() == &spec => w.field.values().to_vec(),
        _ => vec![0.0; n],
    };
    let inv_diag: Vec<f64> = (0..spec.ny)
        .flat_map(|j| (0..spec.nx).map(move |i| (i, j)))
        .map(|(i, j)| 1.0 / op.diagonal(i, j))
        .collect();

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    op.apply(&u, &mut ap);
    for k in 0..n {
        r[k] = rhs[k] - ap[k];
    }
    // The constant vector is an eigenvector (eigenvalue beta); removing the
    // residual's mean up front is exact and keeps sum(r) near zero throughout.
    remove_mean(&mut u, &mut r, params.beta);

    let max_iters = params.max_iters_for(&spec);
    let target = params.tol * rhs_norm;
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let mut iters = 0;
    while res > target && iters < max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for k in 0..n {
            u[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        iters += 1;
        res = dot(&r, &r).sqrt();
        if res <= target {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let b = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + b * p[k];
        }
    }

    // true residual, then exact mean correction
    op.apply(&u, &mut ap);
    for k in 0..n {
        r[k] = rhs[k] - ap[k];
    }
    remove_mean(&mut u, &mut r, params.beta);
    let residual = dot(&r, &r).sqrt() / rhs_norm;
    if residual > params.tol {
        return Err(Error::SolverFailure { iters, residual });
    }
    Ok(PotentialField {
        field: ScalarField::from_values(spec, u)?,
        residual,
        iters,
    })
}

/// Shifts `u` by a constant so that the residual has zero mean.
fn remove_mean(u: &mut [f64], r: &mut [f64], beta: f64) {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let shift = mean / beta;
    u.iter_mut().for_each(|x| *x += shift);
    r.iter_mut().for_each(|x| *x -= mean);
}

/// Per-node unit gradient direction of a potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    pub x: ScalarField,
    pub y: ScalarField,
    /// Nodes where `|grad u|` is below the degeneracy threshold; their vectors are zero.
    pub degenerate: Vec<bool>,
}

/// Threshold below which a gradient is treated as having no direction.
pub fn degenerate_threshold(u: &ScalarField) -> f64 {
    let umax = u.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    1e-12 * umax
}

pub fn direction_field(u: &PotentialField) -> DirectionField {
    let (gx, gy) = u.field.gradient();
    let eps = degenerate_threshold(&u.field);
    let spec = *u.field.spec();
    let mut x = Vec::with_capacity(spec.len());
    let mut y = Vec::with_capacity(spec.len());
    let mut degenerate = Vec::with_capacity(spec.len());
    for (&a, &b) in gx.values().iter().zip(gy.values()) {
        let n = a.hypot(b);
        if n <= eps || n == 0.0 {
            x.push(0.0);
            y.push(0.0);
            degenerate.push(true);
        } else {
            x.push(a / n);
            y.push(b / n);
            degenerate.push(false);
        }
    }
    DirectionField {
        x: ScalarField::from_values(spec, x).expect("same grid"),
        y: ScalarField::from_values(spec, y).expect("same grid"),
        degenerate,
    }
}

/// Normalized gradient of `u` at an arbitrary point.
pub fn direction_at(u: &ScalarField, p: Vec2) -> Result<Direction> {
    let g = u.gradient_at(p)?;
    let eps = degenerate_threshold(u);
    if g.norm() <= eps {
        return Ok(Direction::Keep);
    }
    Ok(Direction::from_vector(g))
}
