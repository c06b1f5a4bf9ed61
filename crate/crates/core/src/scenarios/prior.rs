//! Prior target densities and target sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};

/// Anisotropic Gaussian bump, normalized to unit mass on the grid.
pub fn gaussian_prior(grid: &GridSpec, center: Vec2, sigma_x: f64, sigma_y: f64) -> Result<ScalarField> {
    if !(sigma_x > 0.0 && sigma_y > 0.0) {
        return Err(Error::config("prior.sigma", "must be positive"));
    }
    ScalarField::from_fn(*grid, |p| {
        let a = (p.x - center.x) / sigma_x;
        let b = (p.y - center.y) / sigma_y;
        (-0.5 * (a * a + b * b)).exp()
    })
    .scale_to_unit_mass()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm_sq() <= self.radius * self.radius
    }
}

/// Region built as a union of `minuends` with the union of `subtrahends` removed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircleSet {
    pub minuends: Vec<Circle>,
    pub subtrahends: Vec<Circle>,
}

impl CircleSet {
    pub fn validate(&self) -> Result<()> {
        for c in self.minuends.iter().chain(&self.subtrahends) {
            if !(c.radius > 0.0 && c.center.is_finite()) {
                return Err(Error::config("prior.circles", format!("invalid circle {c:?}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.minuends.iter().any(|c| c.contains(p)) && !self.subtrahends.iter().any(|c| c.contains(p))
    }

    /// Parses lines of `+|- xc yc r`; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> std::result::Result<CircleSet, String> {
        let mut set = CircleSet::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || format!("line {}: expected `+|- xc yc r`, got `{line}`", n + 1);
            if parts.len() != 4 {
                return Err(bad());
            }
            let nums: Vec<f64> = parts[1..].iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            let c = Circle {
                center: Vec2::new(nums[0], nums[1]),
                radius: nums[2],
            };
            match parts[0] {
                "+" => set.minuends.push(c),
                "-" => set.subtrahends.push(c),
                _ => return Err(bad()),
            }
        }
        Ok(set)
    }

    pub fn scaled(&self, k: f64) -> CircleSet {
        let s = |c: &Circle| Circle {
            center: c.center * k,
            radius: c.radius * k,
        };
        CircleSet {
            minuends: self.minuends.iter().map(s).collect(),
            subtrahends: self.subtrahends.iter().map(s).collect(),
        }
    }
}

/// Uniform density over the node centres inside `circles`.
pub fn region_prior(grid: &GridSpec, circles: &CircleSet) -> Result<ScalarField> {
    circles.validate()?;
    let f = ScalarField::from_fn(*grid, |p| if circles.contains(p) { 1.0 } else { 0.0 });
    if f.max() <= 0.0 {
        return Err(Error::DegeneratePrior("circle region contains no grid node".into()));
    }
    f.scale_to_unit_mass()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Vec2,
    pub end: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub segments: Vec<Segment>,
    pub sigma: f64,
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("prior.sigma", "road sigma must be positive"));
        }
        if self.segments.is_empty() {
            return Err(Error::DegeneratePrior("road network has no segments".into()));
        }
        for s in &self.segments {
            if !((s.end - s.start).norm() > 0.0) {
                return Err(Error::config("prior.segments", format!("zero-length segment {s:?}")));
            }
        }
        Ok(())
    }

    /// Parses lines of `x1 y1 x2 y2`.
    pub fn parse_segments(text: &str) -> std::result::Result<Vec<Segment>, String> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| format!("line {}: expected `x1 y1 x2 y2`, got `{line}`", n + 1))?;
            if nums.len() != 4 {
                return Err(format!("line {}: expected 4 numbers, got {}", n + 1, nums.len()));
            }
            out.push(Segment {
                start: Vec2::new(nums[0], nums[1]),
                end: Vec2::new(nums[2], nums[3]),
            });
        }
        Ok(out)
    }
}

/// Gaussian kernels integrated along every road segment (composite midpoint
/// rule, spacing at most `sigma / 4 / refine`).
pub fn road_prior(grid: &GridSpec, net: &RoadNetwork) -> Result<ScalarField> {
    road_prior_refined(grid, net, 1)
}

pub fn road_prior_refined(grid: &GridSpec, net: &RoadNetwork, refine: usize) -> Result<ScalarField> {
    net.validate()?;
    let sigma = net.sigma;
    let reach = 5.0 * sigma;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut f = ScalarField::zeros(*grid);
    let g = *grid;
    let values = f.values_mut();
    for s in &net.segments {
        let len = (s.end - s.start).norm();
        let n = (len / (0.25 * sigma / refine.max(1) as f64)).ceil().max(1.0) as usize;
        let dl = len / n as f64;
        for k in 0..n {
            let w = s.start + (s.end - s.start) * ((k as f64 + 0.5) / n as f64);
            let Some((ri, rj)) = g.nodes_near(w, reach) else { continue };
            for j in rj {
                for i in ri.clone() {
                    let d2 = (g.node(i, j) - w).norm_sq();
                    values[g.index(i, j)] += dl * (-d2 * inv).exp();
                }
            }
        }
    }
    f.scale_to_unit_mass()
}

/// Draws `n` positions: a cell with probability proportional to its value,
/// then a uniform point inside that cell.
pub fn sample_targets<R: Rng + ?Sized>(prior: &ScalarField, n: usize, rng: &mut R) -> Result<Vec<Vec2>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let g = *prior.spec();
    let dist = WeightedIndex::new(prior.values()).map_err(|e| Error::DegeneratePrior(format!("cannot sample targets: {e}")))?;
    Ok((0..n)
        .map(|_| {
            let k = dist.sample(rng);
            let (i, j) = (k % g.nx, k / g.nx);
            Vec2::new(
                (i as f64 + rng.gen::<f64>()) * g.dx(),
                (j as f64 + rng.gen::<f64>()) * g.dy(),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_prior_is_normalized_and_peaks_at_center() {
        let g = GridSpec::new(1000.0, 1000.0, 250, 250).unwrap();
        let f = gaussian_prior(&g, Vec2::new(500.0, 500.0), 150.0, 150.0).unwrap();
        assert!((f.integrate().unwrap() - 1.0).abs() < 1e-9);
        let (mut best, mut arg) = (0.0, 0);
        for (k, &v) in f.values().iter().enumerate() {
            if v > best {
                best = v;
                arg = k;
            }
        }
        let p = g.node(arg % 250, arg / 250);
        assert!((p - Vec2::new(500.0, 500.0)).norm() <= g.dx());
    }

    #[test]
    fn isotropic_gaussian_is_swap_symmetric() {
        let g = GridSpec::new(100.0, 100.0, 40, 40).unwrap();
        let f = gaussian_prior(&g, Vec2::new(50.0, 50.0), 12.0, 12.0).unwrap();
        for j in 0..40 {
            for i in 0..40 {
                assert!((f.at(i, j) - f.at(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn narrow_gaussian_mass_stays_within_three_sigma() {
        let g = GridSpec::new(100.0, 100.0, 100, 100).unwrap();
        let c = Vec2::new(50.0, 50.0);
        let s = 2.0 * g.dx();
        let f = gaussian_prior(&g, c, s, s).unwrap();
        let inside: f64 = (0..100 * 100)
            .filter(|k| (g.node(k % 100, k / 100) - c).norm() <= 3.0 * s)
            .map(|k| f.values()[k] * g.cell_area())
            .sum();
        // a 2-D Gaussian holds 1 - exp(-9/2) of its mass inside 3 sigma
        let want = 1.0 - (-4.5f64).exp();
        assert!((inside - want).abs() < 0.005, "{inside} vs {want}");
    }

    #[test]
    fn single_disc_is_uniform() {
        let g = GridSpec::new(100.0, 100.0, 100, 100).unwrap();
        let set = CircleSet {
            minuends: vec![Circle {
                center: Vec2::new(50.0, 50.0),
                radius: 30.0,
            }],
            subtrahends: vec![],
        };
        let f = region_prior(&g, &set).unwrap();
        let want = 1.0 / (std::f64::consts::PI * 900.0);
        assert!((f.at(50, 50) - want).abs() / want < 0.02);
        assert_eq!(f.at(0, 0), 0.0);
    }

    #[test]
    fn covered_minuend_is_degenerate() {
        let g = GridSpec::new(100.0, 100.0, 50, 50).unwrap();
        let c = Circle {
            center: Vec2::new(50.0, 50.0),
            radius: 10.0,
        };
        let set = CircleSet {
            minuends: vec![c],
            subtrahends: vec![Circle { radius: 20.0, ..c }],
        };
        assert!(matches!(region_prior(&g, &set), Err(Error::DegeneratePrior(_))));
    }

    #[test]
    fn disjoint_discs_split_mass_by_area() {
        let g = GridSpec::new(200.0, 100.0, 200, 100).unwrap();
        let a = Circle {
            center: Vec2::new(50.0, 50.0),
            radius: 20.0,
        };
        let b = Circle {
            center: Vec2::new(150.0, 50.0),
            radius: 20.0,
        };
        let f = region_prior(
            &g,
            &CircleSet {
                minuends: vec![a, b],
                subtrahends: vec![],
            },
        )
        .unwrap();
        let left: f64 = (0..g.len()).filter(|k| k % 200 < 100).map(|k| f.values()[k] * g.cell_area()).sum();
        assert!((left - 0.5).abs() < 0.01);
    }

    #[test]
    fn circle_file_parses() {
        let set = CircleSet::parse("# island\n+ 1 2 3\n- 4 5 6  # lake\n\n").unwrap();
        assert_eq!(set.minuends.len(), 1);
        assert_eq!(set.subtrahends[0].radius, 6.0);
        assert!(CircleSet::parse("* 1 2 3").is_err());
        assert!(CircleSet::parse("+ 1 2").is_err());
    }

    #[test]
    fn short_road_is_a_bump_at_its_midpoint() {
        let g = GridSpec::new(200.0, 200.0, 100, 100).unwrap();
        let net = RoadNetwork {
            segments: vec![Segment {
                start: Vec2::new(99.0, 101.0),
                end: Vec2::new(101.0, 101.0),
            }],
            sigma: 20.0,
        };
        let f = road_prior(&g, &net).unwrap();
        let arg = (0..g.len()).max_by(|&a, &b| f.values()[a].total_cmp(&f.values()[b])).unwrap();
        let p = g.node(arg % 100, arg / 100);
        assert!((p - Vec2::new(100.0, 101.0)).norm() <= 1.5 * g.dx());
    }

    fn sample_network() -> RoadNetwork {
        RoadNetwork {
            segments: RoadNetwork::parse_segments("0 1000 1500 1100\n1500 1100 1800 2000\n1500 1100 2800 0\n").unwrap(),
            sigma: 100.0,
        }
    }

    #[test]
    fn road_mass_concentrates_near_segments() {
        let g = GridSpec::new(4000.0, 2000.0, 400, 200).unwrap();
        let net = sample_network();
        let f = road_prior(&g, &net).unwrap();
        assert!((f.integrate().unwrap() - 1.0).abs() < 1e-9);
        let near: f64 = (0..g.len())
            .filter(|&k| {
                let p = g.node(k % 400, k / 400);
                net.segments.iter().any(|s| point_segment_distance(p, s) <= 300.0)
            })
            .map(|k| f.values()[k] * g.cell_area())
            .sum();
        assert!(near >= 0.95, "{near}");
    }

    #[test]
    fn road_sampling_refinement_is_converged() {
        let g = GridSpec::new(4000.0, 2000.0, 200, 100).unwrap();
        let net = sample_network();
        let a = road_prior_refined(&g, &net, 1).unwrap();
        let b = road_prior_refined(&g, &net, 2).unwrap();
        let diff: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * g.cell_area();
        assert!(diff < 0.005, "{diff}");
    }

    fn point_segment_distance(p: Vec2, s: &Segment) -> f64 {
        let d = s.end - s.start;
        let t = ((p - s.start).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        (p - (s.start + d * t)).norm()
    }

    #[test]
    fn sampling_edge_cases() {
        let g = GridSpec::new(10.0, 10.0, 10, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let uniform = ScalarField::constant(g, 0.01);
        assert!(sample_targets(&uniform, 0, &mut rng).unwrap().is_empty());
        let mut single = ScalarField::zeros(g);
        single.values_mut()[g.index(3, 7)] = 1.0;
        for p in sample_targets(&single, 500, &mut rng).unwrap() {
            assert_eq!(g.cell_of(p), (3, 7));
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let g = GridSpec::new(10.0, 10.0, 10, 10).unwrap();
        let f = gaussian_prior(&g, Vec2::new(3.0, 4.0), 2.0, 3.0).unwrap();
        let a = sample_targets(&f, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_targets(&f, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_sampling_counts_within_binomial_bounds() {
        let g = GridSpec::new(10.0, 10.0, 10, 10).unwrap();
        let f = ScalarField::constant(g, 0.01);
        let n = 100_000;
        let mut counts = vec![0usize; g.len()];
        for p in sample_targets(&f, n, &mut ChaCha8Rng::seed_from_u64(3)).unwrap() {
            let (i, j) = g.cell_of(p);
            counts[g.index(i, j)] += 1;
        }
        let p = 1.0 / g.len() as f64;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 4.0 * sd, "{c} vs {mean}");
        }
    }
}
