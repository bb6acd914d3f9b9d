//! The hyperbolic matrix `B`, the bump functions `h_{eps,d}` and the
//! perturbed torus diffeomorphisms `B_{eps,d} (+) B_{eps,d}` on `T^4`.
//!
//! Points of `T^4` are stored as `(x1, y1, x2, y2)`; the complex structure
//! is `z1 = x1 + i x2`, `z2 = y1 + i y2`, so the 2x2 block acts on the pairs
//! `(x1, y1)` and `(x2, y2)` and is complex linear wherever the bump is.

use core::fmt;

use nalgebra::Matrix4;

use crate::util::{circle_dist, smooth_step, smooth_step_integral, wrap01};

#[derive(Clone, Debug, PartialEq)]
pub enum DynError {
    NotSymmetric,
    ComplexEigenvalues,
    InvalidProfile(&'static str),
    InvalidMatrix(&'static str),
    /// `|coef| * eps >= 1`, where `det = det(B) + coef * h'`.
    NotDiffeomorphism { coefficient: i64, epsilon: f64 },
    NoConvergence { steps: usize, residual: f64 },
}

impl fmt::Display for DynError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynError::NotSymmetric => write!(f, "matrix is not symmetric"),
            DynError::ComplexEigenvalues => write!(f, "matrix has non-real eigenvalues"),
            DynError::InvalidProfile(why) => write!(f, "invalid bump profile: {why}"),
            DynError::InvalidMatrix(why) => write!(f, "invalid matrix: {why}"),
            DynError::NotDiffeomorphism { coefficient, epsilon } => write!(
                f,
                "jacobian 1 + ({coefficient})h' may vanish for epsilon = {epsilon}"
            ),
            DynError::NoConvergence { steps, residual } => {
                write!(f, "no convergence after {steps} steps (residual {residual:e})")
            }
        }
    }
}

impl core::error::Error for DynError {}

/// Exact 2x2 integer matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mat2Int(pub [[i64; 2]; 2]);

impl Mat2Int {
    /// `(13 8; 8 5)`: hyperbolic, symmetric and congruent to the identity mod 2.
    pub const B13_8: Mat2Int = Mat2Int([[13, 8], [8, 5]]);
    pub const IDENTITY: Mat2Int = Mat2Int([[1, 0], [0, 1]]);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2Int([[a, b], [c, d]])
    }

    pub fn det(&self) -> i64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul(&self, other: &Mat2Int) -> Mat2Int {
        let a = &self.0;
        let b = &other.0;
        Mat2Int([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn square(&self) -> Mat2Int {
        self.mul(self)
    }

    /// Adjugate; equals the inverse when `det = 1`.
    pub fn adjugate(&self) -> Mat2Int {
        let m = &self.0;
        Mat2Int([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn transpose(&self) -> Mat2Int {
        let m = &self.0;
        Mat2Int([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[0][1] == self.0[1][0]
    }

    /// Determinant one and `|trace| > 2`.
    pub fn is_hyperbolic(&self) -> bool {
        self.det() == 1 && self.trace().abs() > 2
    }

    pub fn is_identity_mod2(&self) -> bool {
        let m = &self.0;
        m[0][0].rem_euclid(2) == 1
            && m[1][1].rem_euclid(2) == 1
            && m[0][1].rem_euclid(2) == 0
            && m[1][0].rem_euclid(2) == 0
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        let m = &self.0;
        [
            [m[0][0] as f64, m[0][1] as f64],
            [m[1][0] as f64, m[1][1] as f64],
        ]
    }
}

/// Closed-form spectral data of a 2x2 real matrix with real eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen2 {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Unit eigenvector for `lambda_plus`.
    pub eigvec_plus: [f64; 2],
    /// Unit eigenvector for `lambda_minus`.
    pub eigvec_minus: [f64; 2],
}

/// Eigenvalues of a symmetric integer matrix by the quadratic formula.
///
/// The smaller root is recovered as `det / lambda_plus` so that it keeps full
/// relative precision even when it is tiny (`9 - 4 sqrt 5` for `B`).
pub fn eig_sym2(m: &Mat2Int) -> Result<Eigen2, DynError> {
    if !m.is_symmetric() {
        return Err(DynError::NotSymmetric);
    }
    let e = eig_real2(&m.to_f64())?;
    // symmetric input: force exact orthogonality of the pair
    let [px, py] = e.eigvec_plus;
    let mut minus = [-py, px];
    if minus[0] < 0.0 || (minus[0] == 0.0 && minus[1] < 0.0) {
        minus = [py, -px];
    }
    Ok(Eigen2 { eigvec_minus: minus, ..e })
}

/// Eigen-decomposition of a real 2x2 matrix with real eigenvalues, ordered
/// so that `lambda_plus >= lambda_minus`.
pub fn eig_real2(m: &[[f64; 2]; 2]) -> Result<Eigen2, DynError> {
    let [[a, b], [c, d]] = *m;
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    // discriminant written as ((a-d)/2)^2 + bc to avoid cancellation
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc < 0.0 {
        return Err(DynError::ComplexEigenvalues);
    }
    let rad = libm::sqrt(disc);
    let (lp, lm) = if half_tr >= 0.0 {
        let lp = half_tr + rad;
        let lm = if lp != 0.0 { det / lp } else { half_tr - rad };
        (lp, lm)
    } else {
        let lm = half_tr - rad;
        let lp = if lm != 0.0 { det / lm } else { half_tr + rad };
        (lp, lm)
    };
    Ok(Eigen2 {
        lambda_plus: lp,
        lambda_minus: lm,
        eigvec_plus: eigvec_for(a, b, c, d, lp, [1.0, 0.0]),
        eigvec_minus: eigvec_for(a, b, c, d, lm, [0.0, 1.0]),
    })
}

fn eigvec_for(a: f64, b: f64, c: f64, d: f64, lambda: f64, fallback: [f64; 2]) -> [f64; 2] {
    // rows of (M - lambda I) are orthogonal to the eigenvector
    let cand1 = [b, lambda - a];
    let cand2 = [lambda - d, c];
    let n1 = libm::hypot(cand1[0], cand1[1]);
    let n2 = libm::hypot(cand2[0], cand2[1]);
    let (v, n) = if n1 >= n2 { (cand1, n1) } else { (cand2, n2) };
    if n == 0.0 {
        return fallback;
    }
    let mut out = [v[0] / n, v[1] / n];
    if out[0] < 0.0 || (out[0] == 0.0 && out[1] < 0.0) {
        out = [-out[0], -out[1]];
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpKind {
    /// Derivative equal to `eps` on the linear zones, glued by
    /// `exp(-1/t)` transitions to a negative plateau.
    SmoothGlued,
    /// `eps sin(4 d pi x) / (4 d pi)`.
    AnalyticSin,
}

/// The odd, 1/2-periodic bump `h_{eps,d}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    kind: BumpKind,
    epsilon: f64,
    d: u32,
    delta: f64,
    // transition width and plateau depth of h'_{eps,1}/eps on [0, 1/4]
    tau: f64,
    kappa: f64,
}

pub const DEFAULT_DELTA: f64 = 1.0 / 16.0;

impl BumpProfile {
    /// Smooth-glued profile with linear zone `|x| < delta / d`.
    ///
    /// `delta` must lie in `(0, 1/8)`: at `delta = 1/8` the mean-zero
    /// condition forces `h' = -eps` on the whole complement, which cannot be
    /// glued smoothly.
    pub fn smooth(epsilon: f64, d: u32, delta: f64) -> Result<Self, DynError> {
        Self::check_common(epsilon, d)?;
        if !(delta > 0.0 && delta < 0.125) {
            return Err(DynError::InvalidProfile("delta must lie in (0, 1/8)"));
        }
        let tau = 0.5 * (0.25 - 2.0 * delta);
        let kappa = (delta + 0.5 * tau) / (0.25 - delta - 0.5 * tau);
        Ok(Self { kind: BumpKind::SmoothGlued, epsilon, d, delta, tau, kappa })
    }

    pub fn analytic_sin(epsilon: f64, d: u32) -> Result<Self, DynError> {
        Self::check_common(epsilon, d)?;
        Ok(Self {
            kind: BumpKind::AnalyticSin,
            epsilon,
            d,
            delta: DEFAULT_DELTA,
            tau: 0.0,
            kappa: 0.0,
        })
    }

    fn check_common(epsilon: f64, d: u32) -> Result<(), DynError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(DynError::InvalidProfile("epsilon must be finite and >= 0"));
        }
        if d == 0 {
            return Err(DynError::InvalidProfile("d must be positive"));
        }
        Ok(())
    }

    pub fn kind(&self) -> BumpKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Half-width of the component of 0 on which `h(x) = eps x` exactly.
    /// Zero for the analytic profile, which is linear only to first order.
    pub fn linear_zone_half_width(&self) -> f64 {
        match self.kind {
            BumpKind::SmoothGlued => self.delta / self.d as f64,
            BumpKind::AnalyticSin => 0.0,
        }
    }

    /// Returns `(h(x), h'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if self.epsilon == 0.0 {
            return (0.0, 0.0);
        }
        match self.kind {
            BumpKind::AnalyticSin => {
                let w = 4.0 * self.d as f64 * core::f64::consts::PI;
                let arg = w * wrap01(x);
                (self.epsilon * libm::sin(arg) / w, self.epsilon * libm::cos(arg))
            }
            BumpKind::SmoothGlued => {
                let d = self.d as f64;
                let y = d * x;
                // position within the half period, centred: s in [-1/4, 1/4]
                let s = y - 0.5 * libm::round(2.0 * y);
                let a = libm::fabs(s);
                let (big_h, g) = self.unit_profile(a);
                let sign = if s < 0.0 { -1.0 } else { 1.0 };
                (sign * self.epsilon * big_h / d, self.epsilon * g)
            }
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// `(int_0^a g, g(a))` for `a` in `[0, 1/4]`, where `h'_{eps,1} = eps g`.
    fn unit_profile(&self, a: f64) -> (f64, f64) {
        let (delta, tau, kappa) = (self.delta, self.tau, self.kappa);
        if a <= delta {
            (a, 1.0)
        } else if a <= delta + tau {
            let u = (a - delta) / tau;
            (a - (1.0 + kappa) * tau * smooth_step_integral(u), 1.0 - (1.0 + kappa) * smooth_step(u))
        } else {
            let at_end = delta + tau - 0.5 * (1.0 + kappa) * tau;
            (at_end - kappa * (a - delta - tau), -kappa)
        }
    }
}

/// A point of `T^4 = R^4 / Z^4`, stored as `(x1, y1, x2, y2)` in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Torus4Point(pub [f64; 4]);

impl Torus4Point {
    pub fn new(coords: [f64; 4]) -> Self {
        Torus4Point(coords.map(wrap01))
    }

    pub fn coords(&self) -> [f64; 4] {
        self.0
    }

    /// The involution `(z1, z2) -> (-z1, -z2)`.
    pub fn negate(&self) -> Self {
        Torus4Point::new(self.0.map(|c| -c))
    }

    /// Largest per-coordinate circle distance.
    pub fn dist(&self, other: &Torus4Point) -> f64 {
        (0..4)
            .map(|i| circle_dist(self.0[i], other.0[i]))
            .fold(0.0, f64::max)
    }

    /// The 16 fixed points of the involution: bit `j` of `index` sets
    /// coordinate `j` to `1/2`.
    pub fn half_lattice(index: u8) -> Self {
        let mut c = [0.0; 4];
        for (j, slot) in c.iter_mut().enumerate() {
            if index >> j & 1 == 1 {
                *slot = 0.5;
            }
        }
        Torus4Point(c)
    }
}

/// Parameters of `B_{eps,d}(x, y) = B (x, y) - (a h(x), b h(x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbedMapParams {
    b: Mat2Int,
    bump: BumpProfile,
    direction: (i64, i64),
}

impl PerturbedMapParams {
    pub fn new(b: Mat2Int, bump: BumpProfile, direction: (i64, i64)) -> Result<Self, DynError> {
        if b.det() != 1 {
            return Err(DynError::InvalidMatrix("B must have determinant 1"));
        }
        let p = Self { b, bump, direction };
        let coef = p.det_coefficient();
        if (coef.abs() as f64) * bump.epsilon() >= 1.0 {
            return Err(DynError::NotDiffeomorphism { coefficient: coef, epsilon: bump.epsilon() });
        }
        Ok(p)
    }

    /// `B = (13 8; 8 5)`, smooth bump, direction `(1, 1)`.
    pub fn diagonal(epsilon: f64, d: u32) -> Result<Self, DynError> {
        Self::new(Mat2Int::B13_8, BumpProfile::smooth(epsilon, d, DEFAULT_DELTA)?, (1, 1))
    }

    /// Direction `(8, 5)`: the determinant of every block is exactly 1.
    pub fn area_preserving(epsilon: f64, d: u32) -> Result<Self, DynError> {
        Self::new(Mat2Int::B13_8, BumpProfile::smooth(epsilon, d, DEFAULT_DELTA)?, (8, 5))
    }

    pub fn b(&self) -> Mat2Int {
        self.b
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    pub fn direction(&self) -> (i64, i64) {
        self.direction
    }

    pub fn epsilon(&self) -> f64 {
        self.bump.epsilon()
    }

    pub fn d(&self) -> u32 {
        self.bump.d()
    }

    /// `coef` in `det(block) = det(B) + coef * h'`.
    pub fn det_coefficient(&self) -> i64 {
        let m = &self.b.0;
        let (a, b) = self.direction;
        b * m[0][1] - a * m[1][1]
    }

    /// The 2x2 differential of one factor at a point with first coordinate `x`.
    pub fn block(&self, x: f64) -> [[f64; 2]; 2] {
        self.block_with_slope(self.bump.h_prime(x))
    }

    /// The constant block on the linear zones, where `h' = eps`.
    pub fn linear_block(&self) -> [[f64; 2]; 2] {
        self.block_with_slope(self.epsilon())
    }

    fn block_with_slope(&self, hp: f64) -> [[f64; 2]; 2] {
        let m = self.b.to_f64();
        let (a, b) = (self.direction.0 as f64, self.direction.1 as f64);
        [[m[0][0] - a * hp, m[0][1]], [m[1][0] - b * hp, m[1][1]]]
    }

    fn factor_lift(&self, x: f64, y: f64) -> (f64, f64) {
        let m = self.b.to_f64();
        let h = self.bump.h(x);
        let (a, b) = (self.direction.0 as f64, self.direction.1 as f64);
        (m[0][0] * x + m[0][1] * y - a * h, m[1][0] * x + m[1][1] * y - b * h)
    }

    fn factor_apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.factor_lift(x, y);
        (wrap01(u), wrap01(v))
    }

    fn factor_inverse(&self, qx: f64, qy: f64) -> Result<(f64, f64), DynError> {
        // (x, y) = B^{-1} (q + (a, b) h(x)); the x-equation is the scalar
        // fixed point x = x0 + c h(x) with |c h'| <= |c| eps < 1.
        let inv = self.b.adjugate().to_f64();
        let (a, b) = (self.direction.0 as f64, self.direction.1 as f64);
        let x0 = inv[0][0] * qx + inv[0][1] * qy;
        let c = inv[0][0] * a + inv[0][1] * b;
        let mut x = x0;
        let mut converged = c == 0.0;
        let mut residual = 0.0;
        if !converged {
            for _ in 0..50 {
                let (h, hp) = self.bump.eval(x);
                let phi = x - x0 - c * h;
                residual = libm::fabs(phi);
                if residual <= 1e-15 * (1.0 + libm::fabs(x)) {
                    converged = true;
                    break;
                }
                x -= phi / (1.0 - c * hp);
            }
        }
        if !converged {
            return Err(DynError::NoConvergence { steps: 50, residual });
        }
        let h = self.bump.h(x);
        let y = inv[1][0] * (qx + a * h) + inv[1][1] * (qy + b * h);
        Ok((wrap01(x), wrap01(y)))
    }
}

/// Applies `B_{eps,d} (+) B_{eps,d}` and reduces mod 1.
pub fn perturbed_apply(params: &PerturbedMapParams, p: &Torus4Point) -> Torus4Point {
    let c = p.0;
    let (x1, y1) = params.factor_apply(c[0], c[1]);
    let (x2, y2) = params.factor_apply(c[2], c[3]);
    Torus4Point([x1, y1, x2, y2])
}

/// The 4x4 differential, block diagonal on the index pairs `(0,1)`, `(2,3)`.
pub fn perturbed_diff(params: &PerturbedMapParams, p: &Torus4Point) -> Matrix4<f64> {
    let c = p.0;
    let m1 = params.block(c[0]);
    let m2 = params.block(c[2]);
    Matrix4::new(
        m1[0][0], m1[0][1], 0.0, 0.0, //
        m1[1][0], m1[1][1], 0.0, 0.0, //
        0.0, 0.0, m2[0][0], m2[0][1], //
        0.0, 0.0, m2[1][0], m2[1][1],
    )
}

/// Determinant of the factor block at first coordinate `x`.
pub fn jacobian_det(params: &PerturbedMapParams, x: f64) -> f64 {
    let m = params.block(x);
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of [`perturbed_apply`]; Newton on the scalar first-coordinate
/// equation of each factor.
pub fn perturbed_inverse(
    params: &PerturbedMapParams,
    q: &Torus4Point,
) -> Result<Torus4Point, DynError> {
    let c = q.0;
    let (x1, y1) = params.factor_inverse(c[0], c[1])?;
    let (x2, y2) = params.factor_inverse(c[2], c[3])?;
    Ok(Torus4Point([x1, y1, x2, y2]))
}
