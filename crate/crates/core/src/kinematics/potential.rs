//! Pair potentials and the two evaluation forms of the total interaction:
//! over the three pair distances, and over the shape coordinates
//! `(r, R, theta)` with the distances reconstructed by the law of cosines.

use super::MassTriple;
use crate::error::Error;
use crate::Result;

/// Interaction of one body pair as a function of their distance.
#[derive(Debug, Clone, PartialEq)]
pub enum PairPotential {
    /// `-strength / sqrt(d^2 + softening^2)`.
    Gravity { strength: f64, softening: f64 },
    /// `depth ((1 - exp(-width (d - r_eq)))^2 - 1)`: zero at infinity,
    /// minimum `-depth` at `r_eq`.
    Morse { depth: f64, width: f64, r_eq: f64 },
    /// Natural cubic spline through `(d, V)` samples, linear beyond the ends.
    Tabulated(CubicSpline),
    /// No interaction.
    None,
}

impl PairPotential {
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        Ok(Self::Tabulated(CubicSpline::new(samples)?))
    }

    pub fn value(&self, d: f64) -> f64 {
        match self {
            Self::Gravity { strength, softening } => {
                -strength / (d * d + softening * softening).sqrt()
            }
            Self::Morse { depth, width, r_eq } => {
                let e = (-width * (d - r_eq)).exp();
                let w = 1.0 - e;
                depth * (w * w - 1.0)
            }
            Self::Tabulated(s) => s.value(d),
            Self::None => 0.0,
        }
    }

    pub fn derivative(&self, d: f64) -> f64 {
        match self {
            Self::Gravity { strength, softening } => {
                let s2 = d * d + softening * softening;
                strength * d / (s2 * s2.sqrt())
            }
            Self::Morse { depth, width, r_eq } => {
                let e = (-width * (d - r_eq)).exp();
                2.0 * depth * (1.0 - e) * width * e
            }
            Self::Tabulated(s) => s.derivative(d),
            Self::None => 0.0,
        }
    }
}

/// Which pair a quantity refers to; `P23` is the `(2,3)` pair carried by `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    P12,
    P13,
    P23,
}

/// Total interaction split over the three pairs, with the normalization scale
/// of the conformal factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub v12: PairPotential,
    pub v13: PairPotential,
    pub v23: PairPotential,
}

/// Pair distances from physical Jacobi lengths and the pair angle.
pub fn pair_distances_physical(
    m: &MassTriple<f64>,
    r_phys: f64,
    big_r_phys: f64,
    cos_theta: f64,
) -> (f64, f64, f64) {
    let lm = m.lambda_minus;
    let lp = m.lambda_plus;
    let d23 = big_r_phys;
    let d12 = (r_phys * r_phys + lm * lm * big_r_phys * big_r_phys
        - 2.0 * lm * r_phys * big_r_phys * cos_theta)
        .max(0.0)
        .sqrt();
    let d13 = (r_phys * r_phys + lp * lp * big_r_phys * big_r_phys
        + 2.0 * lp * r_phys * big_r_phys * cos_theta)
        .max(0.0)
        .sqrt();
    (d12, d13, d23)
}

/// Pair distances from mass-scaled lengths.
pub fn pair_distances_scaled(
    m: &MassTriple<f64>,
    r_scaled: f64,
    big_r_scaled: f64,
    cos_theta: f64,
) -> (f64, f64, f64) {
    let r_phys = r_scaled / m.scale_r();
    let big_r_phys = big_r_scaled / m.scale_big_r();
    pair_distances_physical(m, r_phys, big_r_phys, cos_theta)
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self { v12: PairPotential::None, v13: PairPotential::None, v23: PairPotential::None }
    }

    /// Newtonian gravity with coupling `g_const` and a common softening length.
    pub fn gravity(m: &MassTriple<f64>, g_const: f64, softening: f64) -> Self {
        let pair = |ma: f64, mb: f64| PairPotential::Gravity {
            strength: g_const * ma * mb,
            softening,
        };
        Self {
            v12: pair(m.m1, m.m2),
            v13: pair(m.m1, m.m3),
            v23: pair(m.m2, m.m3),
        }
    }

    /// Same Morse well on all three pairs.
    pub fn morse_uniform(depth: f64, width: f64, r_eq: f64) -> Self {
        let p = PairPotential::Morse { depth, width, r_eq };
        Self { v12: p.clone(), v13: p.clone(), v23: p }
    }

    pub fn pair(&self, which: Pair) -> &PairPotential {
        match which {
            Pair::P12 => &self.v12,
            Pair::P13 => &self.v13,
            Pair::P23 => &self.v23,
        }
    }

    /// Total potential over the three pair distances.
    pub fn v_bar(&self, d12: f64, d13: f64, d23: f64) -> f64 {
        self.v12.value(d12) + self.v13.value(d13) + self.v23.value(d23)
    }

    /// Total potential over shape coordinates (mass-scaled lengths).
    pub fn v_internal(&self, m: &MassTriple<f64>, r_scaled: f64, big_r_scaled: f64, theta: f64) -> f64 {
        let (d12, d13, d23) = pair_distances_scaled(m, r_scaled, big_r_scaled, theta.cos());
        self.v_bar(d12, d13, d23)
    }

    /// Gradient of `v_internal` with respect to `(r_scaled, big_r_scaled, theta)`.
    pub fn v_internal_gradient(
        &self,
        m: &MassTriple<f64>,
        r_scaled: f64,
        big_r_scaled: f64,
        theta: f64,
    ) -> [f64; 3] {
        let cr = 1.0 / m.scale_r();
        let c_big_r = 1.0 / m.scale_big_r();
        let r = r_scaled * cr;
        let big_r = big_r_scaled * c_big_r;
        let (s, c) = theta.sin_cos();
        let lm = m.lambda_minus;
        let lp = m.lambda_plus;
        let (d12, d13, d23) = pair_distances_physical(m, r, big_r, c);
        let f12 = self.v12.derivative(d12);
        let f13 = self.v13.derivative(d13);
        let f23 = self.v23.derivative(d23);

        // d(d12)/d(r_phys) etc. from the law-of-cosines forms.
        let d12_dr = if d12 > 0.0 { (r - lm * big_r * c) / d12 } else { 0.0 };
        let d12_dbr = if d12 > 0.0 { (lm * lm * big_r - lm * r * c) / d12 } else { 0.0 };
        let d12_dth = if d12 > 0.0 { lm * r * big_r * s / d12 } else { 0.0 };
        let d13_dr = if d13 > 0.0 { (r + lp * big_r * c) / d13 } else { 0.0 };
        let d13_dbr = if d13 > 0.0 { (lp * lp * big_r + lp * r * c) / d13 } else { 0.0 };
        let d13_dth = if d13 > 0.0 { -lp * r * big_r * s / d13 } else { 0.0 };
        let _ = d23;

        [
            cr * (f12 * d12_dr + f13 * d13_dr),
            c_big_r * (f12 * d12_dbr + f13 * d13_dbr + f23),
            f12 * d12_dth + f13 * d13_dth,
        ]
    }

    /// `max |V|` over a grid of the declared shape box (the normalization
    /// scale of the conformal factor).
    pub fn u0_grid_max(&self, m: &MassTriple<f64>, sample_box: &ShapeBox) -> Result<f64> {
        let n = sample_box.grid_n.max(2);
        let mut best = 0.0f64;
        for i in 0..n {
            let fi = i as f64 / (n - 1) as f64;
            let r = sample_box.r_range.0 + fi * (sample_box.r_range.1 - sample_box.r_range.0);
            for j in 0..n {
                let fj = j as f64 / (n - 1) as f64;
                let big_r = sample_box.big_r_range.0 + fj * (sample_box.big_r_range.1 - sample_box.big_r_range.0);
                for k in 0..n {
                    let theta = std::f64::consts::PI * k as f64 / (n - 1) as f64;
                    let v = self.v_internal(m, r, big_r, theta);
                    if v.is_finite() {
                        best = best.max(v.abs());
                    }
                }
            }
        }
        if best <= 0.0 {
            return Err(Error::InvalidArgument(
                "potential vanishes on the sampling box; supply an explicit normalization scale".into(),
            ));
        }
        Ok(best)
    }
}

/// Sampling box over mass-scaled shape lengths (theta spans its full range).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeBox {
    pub r_range: (f64, f64),
    pub big_r_range: (f64, f64),
    pub grid_n: usize,
}

impl Default for ShapeBox {
    fn default() -> Self {
        Self { r_range: (0.2, 5.0), big_r_range: (0.2, 5.0), grid_n: 64 }
    }
}

/// Natural cubic spline with linear extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidArgument("tabulated potential needs at least 3 samples".into()));
        }
        let mut pts = samples.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 - w[0].0 <= 0.0) {
            return Err(Error::InvalidArgument("tabulated abscissae must be strictly increasing".into()));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let n = xs.len();
        // Tridiagonal solve for natural boundary conditions.
        let mut u = vec![0.0; n];
        let mut second = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let du = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * du / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            second[i] = second[i] * second[i + 1] + u[i];
        }
        Ok(Self { xs, ys, second })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.end_slope(0) * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.end_slope(n - 1) * (x - self.xs[n - 1]);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.end_slope(0);
        }
        if x >= self.xs[n - 1] {
            return self.end_slope(n - 1);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.second[i + 1] - (3.0 * a * a - 1.0) * self.second[i]) * h / 6.0
    }

    fn end_slope(&self, at: usize) -> f64 {
        let n = self.xs.len();
        if at == 0 {
            let h = self.xs[1] - self.xs[0];
            (self.ys[1] - self.ys[0]) / h - h * self.second[1] / 6.0
        } else {
            let h = self.xs[n - 1] - self.xs[n - 2];
            (self.ys[n - 1] - self.ys[n - 2]) / h + h * self.second[n - 2] / 6.0
        }
    }
}
