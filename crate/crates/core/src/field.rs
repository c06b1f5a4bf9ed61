//! Uniform rectangular grids and the scalar fields living on them.
//!
//! Samples sit at cell centers: node `(i, j)` is at `((i + 0.5) dx, (j + 0.5) dy)`
//! and is stored at index `j * nx + i` (row-major, y varying slowest).

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rectangular domain `[0, width] x [0, height]` split into `nx * ny` equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = GridSpec {
            width,
            height,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::config("grid", "nx and ny must be at least 2"));
        }
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::config("grid", "width and height must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Cell containing `p` (points on the far edges map to the last cell).
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let i = ((p.x / self.dx()).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((p.y / self.dy()).floor().max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    /// Inclusive node index ranges whose centers may lie within `radius` of `p`.
    pub fn nodes_near(&self, p: Vec2, radius: f64) -> Option<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
        let (dx, dy) = (self.dx(), self.dy());
        let lo_i = ((p.x - radius) / dx - 0.5).ceil();
        let hi_i = ((p.x + radius) / dx - 0.5).floor();
        let lo_j = ((p.y - radius) / dy - 0.5).ceil();
        let hi_j = ((p.y + radius) / dy - 0.5).floor();
        let max_i = (self.nx - 1) as f64;
        let max_j = (self.ny - 1) as f64;
        if hi_i < 0.0 || hi_j < 0.0 || lo_i > max_i || lo_j > max_j || lo_i > hi_i || lo_j > hi_j {
            return None;
        }
        let i0 = lo_i.max(0.0) as usize;
        let i1 = hi_i.min(max_i) as usize;
        let j0 = lo_j.max(0.0) as usize;
        let j1 = hi_j.min(max_j) as usize;
        Some((i0..=i1, j0..=j1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        ScalarField {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        Ok(ScalarField { spec, values })
    }

    /// Samples `f` at every node center.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                values.push(f(spec.node(i, j)));
            }
        }
        ScalarField { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.spec.nx, self.spec.ny, other.spec.nx, other.spec.ny
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        Ok(ScalarField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint quadrature: sum of node values times cell area.
    pub fn integrate(&self) -> Result<f64> {
        self.check_finite()?;
        Ok(self.sum() * self.spec.cell_area())
    }

    pub(crate) fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Bilinear interpolation between the four surrounding nodes. Points between
    /// the domain edge and the outermost node centers are clamped onto the hull.
    pub fn interpolate(&self, p: Vec2) -> Result<f64> {
        let g = &self.spec;
        if !p.is_finite() || !g.contains(p) {
            return Err(Error::OutOfDomain {
                x: p.x,
                y: p.y,
                width: g.width,
                height: g.height,
            });
        }
        let (i0, j0, tx, ty) = self.stencil(p);
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        Ok((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }

    /// Lower-left stencil node and fractional offsets for bilinear weights.
    fn stencil(&self, p: Vec2) -> (usize, usize, f64, f64) {
        let g = &self.spec;
        let fx = (p.x / g.dx() - 0.5).clamp(0.0, (g.nx - 1) as f64);
        let fy = (p.y / g.dy() - 0.5).clamp(0.0, (g.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(g.nx - 2);
        let j0 = (fy.floor() as usize).min(g.ny - 2);
        (i0, j0, fx - i0 as f64, fy - j0 as f64)
    }

    /// Central differences in the interior, one-sided at boundary nodes.
    pub fn gradient(&self) -> (ScalarField, ScalarField) {
        let g = self.spec;
        let (nx, ny) = (g.nx, g.ny);
        let (dx, dy) = (g.dx(), g.dy());
        let mut gx = vec![0.0; g.len()];
        let mut gy = vec![0.0; g.len()];
        let v = &self.values;
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                gx[k] = if i == 0 {
                    (v[k + 1] - v[k]) / dx
                } else if i == nx - 1 {
                    (v[k] - v[k - 1]) / dx
                } else {
                    (v[k + 1] - v[k - 1]) / (2.0 * dx)
                };
                gy[k] = if j == 0 {
                    (v[k + nx] - v[k]) / dy
                } else if j == ny - 1 {
                    (v[k] - v[k - nx]) / dy
                } else {
                    (v[k + nx] - v[k - nx]) / (2.0 * dy)
                };
            }
        }
        (
            ScalarField { spec: g, values: gx },
            ScalarField { spec: g, values: gy },
        )
    }

    /// Gradient evaluated at an arbitrary point: bilinear interpolation of the
    /// nodal finite-difference gradient over the stencil around `p`.
    pub fn gradient_at(&self, p: Vec2) -> Result<Vec2> {
        let g = &self.spec;
        if !p.is_finite() || !g.contains(p) {
            return Err(Error::OutOfDomain {
                x: p.x,
                y: p.y,
                width: g.width,
                height: g.height,
            });
        }
        let (i0, j0, tx, ty) = self.stencil(p);
        let mut out = Vec2::ZERO;
        for (di, dj, w) in [
            (0, 0, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            out += self.node_gradient(i0 + di, j0 + dj) * w;
        }
        Ok(out)
    }

    fn node_gradient(&self, i: usize, j: usize) -> Vec2 {
        let g = &self.spec;
        let gx = if i == 0 {
            (self.at(1, j) - self.at(0, j)) / g.dx()
        } else if i == g.nx - 1 {
            (self.at(i, j) - self.at(i - 1, j)) / g.dx()
        } else {
            (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * g.dx())
        };
        let gy = if j == 0 {
            (self.at(i, 1) - self.at(i, 0)) / g.dy()
        } else if j == g.ny - 1 {
            (self.at(i, j) - self.at(i, j - 1)) / g.dy()
        } else {
            (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * g.dy())
        };
        Vec2::new(gx, gy)
    }

    /// Rescales a nonnegative field so that it integrates to one.
    pub fn scale_to_unit_mass(&self) -> Result<ScalarField> {
        self.check_finite()?;
        if let Some(index) = self.values.iter().position(|&v| v < 0.0) {
            return Err(Error::DegeneratePrior(format!(
                "negative value {} at node {index}",
                self.values[index]
            )));
        }
        let mass = self.integrate()?;
        if mass <= 0.0 {
            return Err(Error::DegeneratePrior(format!("total mass {mass} is not positive")));
        }
        let inv = 1.0 / mass;
        Ok(self.map(|v| v * inv))
    }

    /// Field snapshot: a header line `nx ny dx dy` followed by the values in
    /// storage order, one grid row per line.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.spec;
        writeln!(w, "{} {} {} {}", g.nx, g.ny, g.dx(), g.dy())?;
        let mut line = String::new();
        for row in self.values.chunks(g.nx) {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{v:e}");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<ScalarField> {
        let bad = |m: &str| Error::Parse {
            path: "<snapshot>".into(),
            message: m.to_string(),
        };
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens.len() < 4 {
            return Err(bad("missing header"));
        }
        let nx: usize = tokens[0].parse().map_err(|_| bad("bad nx"))?;
        let ny: usize = tokens[1].parse().map_err(|_| bad("bad ny"))?;
        let dx: f64 = tokens[2].parse().map_err(|_| bad("bad dx"))?;
        let dy: f64 = tokens[3].parse().map_err(|_| bad("bad dy"))?;
        let spec = GridSpec::new(dx * nx as f64, dy * ny as f64, nx, ny)?;
        let values = tokens[4..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::from_values(spec, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: f64, h: f64, nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(w, h, nx, ny).unwrap()
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(GridSpec::new(10.0, 10.0, 1, 5).is_err());
        assert!(GridSpec::new(0.0, 10.0, 5, 5).is_err());
    }

    #[test]
    fn full_size_grids_have_exact_spacing() {
        assert_eq!(grid(3000.0, 3000.0, 600, 600).dx(), 5.0);
        let g = grid(4000.0, 2000.0, 800, 400);
        assert_eq!((g.dx(), g.dy()), (5.0, 5.0));
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = grid(1000.0, 1000.0, 250, 250);
        let one = ScalarField::constant(g, 1.0);
        assert!((one.integrate().unwrap() - 1.0e6).abs() < 1e-6);
        assert_eq!(ScalarField::zeros(g).integrate().unwrap(), 0.0);
    }

    #[test]
    fn integrate_rejects_nan() {
        let g = grid(10.0, 10.0, 4, 4);
        let mut f = ScalarField::zeros(g);
        f.values_mut()[5] = f64::NAN;
        assert!(matches!(f.integrate(), Err(Error::NonFinite { index: 5, .. })));
    }

    #[test]
    fn interpolate_hits_nodes_and_reproduces_ramps() {
        let g = grid(250.0, 100.0, 50, 20);
        let ramp = ScalarField::from_fn(g, |p| p.x);
        assert!((ramp.interpolate(Vec2::new(137.5, 40.0)).unwrap() - 137.5).abs() < 1e-9);
        let f = ScalarField::from_fn(g, |p| (p.x * 0.1).sin() + p.y);
        let n = g.node(7, 3);
        assert!((f.interpolate(n).unwrap() - f.at(7, 3)).abs() < 1e-12);
        let c = ScalarField::constant(g, 3.25);
        assert!((c.interpolate(Vec2::new(0.1, 99.9)).unwrap() - 3.25).abs() < 1e-12);
    }

    #[test]
    fn interpolate_outside_is_an_error() {
        let g = grid(10.0, 10.0, 4, 4);
        let f = ScalarField::zeros(g);
        assert!(matches!(f.interpolate(Vec2::new(-0.1, 5.0)), Err(Error::OutOfDomain { .. })));
        assert!(f.interpolate(Vec2::new(10.0, 10.0)).is_ok());
    }

    #[test]
    fn gradient_of_linear_and_quadratic() {
        let g = grid(20.0, 10.0, 20, 10);
        let (gx, gy) = ScalarField::constant(g, 4.0).gradient();
        assert!(gx.values().iter().chain(gy.values()).all(|&v| v == 0.0));

        let (gx, gy) = ScalarField::from_fn(g, |p| 2.0 * p.x).gradient();
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((gx.at(i, j) - 2.0).abs() < 1e-9);
                assert!(gy.at(i, j).abs() < 1e-9);
            }
        }

        // central difference of x^2 is exact: ((x+h)^2 - (x-h)^2) / 2h = 2x
        let (gx, _) = ScalarField::from_fn(g, |p| p.x * p.x).gradient();
        for i in 1..g.nx - 1 {
            let x0 = g.node(i, 4).x;
            assert!((gx.at(i, 4) - 2.0 * x0).abs() < 1e-9, "i={i}");
        }
    }

    #[test]
    fn scale_to_unit_mass_cases() {
        let g = grid(1000.0, 1000.0, 100, 100);
        let u = ScalarField::constant(g, 1.0).scale_to_unit_mass().unwrap();
        assert!(u.values().iter().all(|&v| (v - 1e-6).abs() < 1e-18));
        let again = u.scale_to_unit_mass().unwrap();
        for (a, b) in u.values().iter().zip(again.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert!(matches!(
            ScalarField::zeros(g).scale_to_unit_mass(),
            Err(Error::DegeneratePrior(_))
        ));
        assert!(ScalarField::constant(g, -1.0).scale_to_unit_mass().is_err());
    }

    #[test]
    fn nodes_near_covers_disc() {
        let g = grid(100.0, 100.0, 50, 50);
        let p = Vec2::new(10.3, 97.0);
        let (ri, rj) = g.nodes_near(p, 6.0).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if (g.node(i, j) - p).norm() <= 6.0 {
                    assert!(ri.contains(&i) && rj.contains(&j));
                }
            }
        }
        assert!(g.nodes_near(Vec2::new(-50.0, 50.0), 10.0).is_none());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = grid(30.0, 20.0, 3, 2);
        let f = ScalarField::from_values(g, vec![0.0, 1.5, -2.0, 1e-300, 3.0, 4.25]).unwrap();
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 2 10 10\n"));
        let back = ScalarField::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, f);
    }
}
