//! Symmetric quadrature rules on triangles, in barycentric coordinates.
//!
//! Weights are normalized to sum to one; multiply by the triangle area on use.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// A rule exact to at least `degree` (1 through 6). Every returned rule has positive weights.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    let mut rule = Builder::default();
    let exact = match degree {
        1 => {
            rule.centroid(1.0);
            1
        }
        2 => {
            rule.orbit3(0.5, 1.0 / 3.0);
            2
        }
        // no positive symmetric 4-point rule of degree 3; use the degree-4 rule
        3 | 4 => {
            rule.orbit3(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70);
            rule.orbit3(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64);
            4
        }
        5 => {
            let s15 = 15f64.sqrt();
            rule.centroid(9.0 / 40.0);
            rule.orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            rule.orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
            5
        }
        6 => {
            rule.orbit3(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03);
            rule.orbit3(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92);
            rule.orbit6(0.053_145_049_844_816_947_35, 0.310_352_451_033_784_405_42, 0.082_851_075_618_373_575_19);
            6
        }
        _ => return Err(Error::InvalidConfig(format!("unsupported quadrature degree {degree} (supported: 1..=6)"))),
    };
    Ok(QuadratureRule { points: rule.points, weights: rule.weights, degree: exact })
}

#[derive(Default)]
struct Builder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Builder {
    fn centroid(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    /// Points `(a, a, 1-2a)` and permutations.
    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    /// Points `(a, b, 1-a-b)` and all six permutations.
    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [b, c, a], [c, a, b], [b, a, c], [a, c, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
