//! The trivialised skew product
//! `F(x, y1, y2) = (f(x), B^2 y1 + alpha(x), y2 + beta(x) + omega)` over the
//! perturbed torus map, with the alpha-removing coordinate change and
//! Birkhoff averages of characters in `y2`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

use crate::bundlealg::IntMat;
use crate::dyncore::{
    perturbed_apply, perturbed_diff, perturbed_inverse, DynError, Mat2Int, PerturbedMapParams,
    Torus4Point,
};
use crate::hyperbolic::{lyapunov_spectrum, HypError, LyapunovOptions, LyapunovReport, TangentDynamics};
use crate::util::{wrap01, Halton};

pub const K_MIN: usize = 2;
pub const K_MAX: usize = 22;

#[derive(Clone, Debug, PartialEq)]
pub enum SkewError {
    InvalidParams(&'static str),
    Dyn(DynError),
    Hyp(HypError),
}

impl fmt::Display for SkewError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkewError::InvalidParams(why) => write!(f, "invalid skew-product parameters: {why}"),
            SkewError::Dyn(e) => write!(f, "{e}"),
            SkewError::Hyp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SkewError {}

impl From<DynError> for SkewError {
    fn from(e: DynError) -> Self {
        SkewError::Dyn(e)
    }
}

impl From<HypError> for SkewError {
    fn from(e: HypError) -> Self {
        SkewError::Hyp(e)
    }
}

/// `cos_coef * cos(2 pi <freq, x>) + sin_coef * sin(2 pi <freq, x>)` in
/// output component `component`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub component: usize,
    pub freq: [i64; 4],
    pub cos_coef: f64,
    pub sin_coef: f64,
}

/// A trigonometric polynomial `T^4 -> R^dim` (read mod 1 where it is used as
/// a torus-valued map).
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMap {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigMap {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self, SkewError> {
        if terms.iter().any(|t| t.component >= dim) {
            return Err(SkewError::InvalidParams("trig term component out of range"));
        }
        if terms.iter().any(|t| !(t.cos_coef.is_finite() && t.sin_coef.is_finite())) {
            return Err(SkewError::InvalidParams("trig coefficients must be finite"));
        }
        Ok(Self { dim, terms })
    }

    pub fn constant(values: &[f64]) -> Self {
        let terms = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| TrigTerm { component: i, freq: [0; 4], cos_coef: *v, sin_coef: 0.0 })
            .collect();
        Self { dim: values.len(), terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos_coef == 0.0 && (t.sin_coef == 0.0 || t.freq == [0; 4]))
    }

    pub fn eval_into(&self, x: &[f64; 4], out: &mut [f64]) {
        out[..self.dim].iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            let phase = 2.0 * PI * dot(&t.freq, x);
            out[t.component] += t.cos_coef * libm::cos(phase) + t.sin_coef * libm::sin(phase);
        }
    }

    pub fn eval(&self, x: &[f64; 4]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Differential, `dim x 4`.
    pub fn jacobian(&self, x: &[f64; 4]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim, 4);
        for t in &self.terms {
            let phase = 2.0 * PI * dot(&t.freq, x);
            let g = 2.0 * PI * (t.sin_coef * libm::cos(phase) - t.cos_coef * libm::sin(phase));
            for (c, f) in t.freq.iter().enumerate() {
                j[(t.component, c)] += g * *f as f64;
            }
        }
        j
    }

    /// Exact mean over `T^4`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for t in self.terms.iter().filter(|t| t.freq == [0; 4]) {
            m[t.component] += t.cos_coef;
        }
        m
    }

    /// `self o L` for an integer matrix `L` acting on `T^4` (frequencies map
    /// by `L^T`).
    pub fn compose_linear(&self, l: &[[i64; 4]; 4]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut freq = [0i64; 4];
                for (j, fj) in freq.iter_mut().enumerate() {
                    *fj = (0..4).map(|i| t.freq[i] * l[i][j]).sum();
                }
                TrigTerm { freq, ..*t }
            })
            .collect();
        Self { dim: self.dim, terms }
    }

    pub fn sub(&self, other: &TrigMap) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| TrigTerm {
            cos_coef: -t.cos_coef,
            sin_coef: -t.sin_coef,
            ..*t
        }));
        Self { dim: self.dim.max(other.dim), terms }
    }
}

fn dot(f: &[i64; 4], x: &[f64; 4]) -> f64 {
    f.iter().zip(x).map(|(a, b)| *a as f64 * b).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkewParams {
    k: usize,
    base: PerturbedMapParams,
    alpha: TrigMap,
    beta: TrigMap,
    omega: Vec<f64>,
}

impl SkewParams {
    pub fn new(
        k: usize,
        base: PerturbedMapParams,
        alpha: TrigMap,
        beta: TrigMap,
        omega: Vec<f64>,
    ) -> Result<Self, SkewError> {
        if !(K_MIN..=K_MAX).contains(&k) {
            return Err(SkewError::InvalidParams("k must lie in [2, 22]"));
        }
        if alpha.dim() != 2 {
            return Err(SkewError::InvalidParams("alpha must take values in T^2"));
        }
        if beta.dim() != k - 2 || omega.len() != k - 2 {
            return Err(SkewError::InvalidParams("beta and omega must have k - 2 components"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(SkewError::InvalidParams("omega must be finite"));
        }
        Ok(Self { k, base, alpha, beta, omega })
    }

    /// Defaults: `alpha = 0.25 (sin 2 pi x1, sin 2 pi y1)`, `beta_j` a single
    /// mean-zero cosine of amplitude `1/8`, `omega_j` the fractional part of
    /// the square root of the `j`-th prime.
    pub fn with_defaults(k: usize, base: PerturbedMapParams) -> Result<Self, SkewError> {
        if !(K_MIN..=K_MAX).contains(&k) {
            return Err(SkewError::InvalidParams("k must lie in [2, 22]"));
        }
        let alpha = TrigMap::new(
            2,
            vec![
                TrigTerm { component: 0, freq: [1, 0, 0, 0], cos_coef: 0.0, sin_coef: 0.25 },
                TrigTerm { component: 1, freq: [0, 1, 0, 0], cos_coef: 0.0, sin_coef: 0.25 },
            ],
        )?;
        let beta = TrigMap::new(
            k - 2,
            (0..k - 2)
                .map(|j| {
                    let mut freq = [0i64; 4];
                    freq[j % 4] = 1;
                    freq[(j + 1) % 4] += 1;
                    TrigTerm { component: j, freq, cos_coef: 0.125, sin_coef: 0.0 }
                })
                .collect(),
        )?;
        Self::new(k, base, alpha, beta, default_omega(k - 2))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &PerturbedMapParams {
        &self.base
    }

    pub fn alpha(&self) -> &TrigMap {
        &self.alpha
    }

    pub fn beta(&self) -> &TrigMap {
        &self.beta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn with_alpha(&self, alpha: TrigMap) -> Result<Self, SkewError> {
        Self::new(self.k, self.base, alpha, self.beta.clone(), self.omega.clone())
    }

    pub fn with_beta(&self, beta: TrigMap) -> Result<Self, SkewError> {
        Self::new(self.k, self.base, self.alpha.clone(), beta, self.omega.clone())
    }
}

const PRIMES: [u32; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

pub fn default_omega(n: usize) -> Vec<f64> {
    PRIMES.iter().take(n).map(|p| {
        let r = libm::sqrt(*p as f64);
        r - libm::floor(r)
    }).collect()
}

/// `diag(B^2, I_{k-2})`, the fibre automorphism of the model.
pub fn fiber_automorphism(k: usize, b: &Mat2Int) -> IntMat {
    let b2 = IntMat::from_mat2(&b.square());
    if k == 2 {
        return b2;
    }
    IntMat::block_diag(&[&b2, &IntMat::identity(k - 2)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkewPoint {
    pub x: Torus4Point,
    pub y1: [f64; 2],
    pub y2: Vec<f64>,
}

impl SkewPoint {
    pub fn new(x: [f64; 4], y1: [f64; 2], y2: Vec<f64>) -> Self {
        Self {
            x: Torus4Point::new(x),
            y1: [wrap01(y1[0]), wrap01(y1[1])],
            y2: y2.into_iter().map(wrap01).collect(),
        }
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut s = self.x.0.to_vec();
        s.extend_from_slice(&self.y1);
        s.extend_from_slice(&self.y2);
        s
    }

    pub fn from_state(s: &[f64]) -> Self {
        Self::new([s[0], s[1], s[2], s[3]], [s[4], s[5]], s[6..].to_vec())
    }
}

fn b2_f64(b: &Mat2Int) -> [[f64; 2]; 2] {
    b.square().to_f64()
}

pub fn skew_apply(params: &SkewParams, pt: &SkewPoint) -> SkewPoint {
    let mut s = pt.to_state();
    SkewMap::new(params).step(&mut s);
    SkewPoint::from_state(&s)
}

/// [`SkewParams`] as a [`TangentDynamics`] on `T^{4+k}` with state layout
/// `(x, y1, y2)`.
#[derive(Clone, Debug)]
pub struct SkewMap<'a> {
    params: &'a SkewParams,
    b2: [[f64; 2]; 2],
}

impl<'a> SkewMap<'a> {
    pub fn new(params: &'a SkewParams) -> Self {
        Self { params, b2: b2_f64(&params.base.b()) }
    }
}

impl TangentDynamics for SkewMap<'_> {
    fn dim(&self) -> usize {
        4 + self.params.k
    }

    fn step(&self, s: &mut [f64]) {
        let x = [s[0], s[1], s[2], s[3]];
        let mut a = [0.0; 2];
        self.params.alpha.eval_into(&x, &mut a);
        let m = &self.b2;
        let y1 = [
            m[0][0] * s[4] + m[0][1] * s[5] + a[0],
            m[1][0] * s[4] + m[1][1] * s[5] + a[1],
        ];
        s[4] = wrap01(y1[0]);
        s[5] = wrap01(y1[1]);
        let n2 = self.params.k - 2;
        if n2 > 0 {
            let mut b = vec![0.0; n2];
            self.params.beta.eval_into(&x, &mut b);
            for j in 0..n2 {
                s[6 + j] = wrap01(s[6 + j] + b[j] + self.params.omega[j]);
            }
        }
        let fx = perturbed_apply(&self.params.base, &Torus4Point(x));
        s[..4].copy_from_slice(&fx.0);
    }

    fn jacobian(&self, s: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let x = [s[0], s[1], s[2], s[3]];
        let mut j = DMatrix::zeros(n, n);
        let df = perturbed_diff(&self.params.base, &Torus4Point(x));
        for r in 0..4 {
            for c in 0..4 {
                j[(r, c)] = df[(r, c)];
            }
        }
        j.view_mut((4, 0), (2, 4)).copy_from(&self.params.alpha.jacobian(&x));
        for r in 0..2 {
            for c in 0..2 {
                j[(4 + r, 4 + c)] = self.b2[r][c];
            }
        }
        let n2 = self.params.k - 2;
        if n2 > 0 {
            j.view_mut((6, 0), (n2, 4)).copy_from(&self.params.beta.jacobian(&x));
            for i in 0..n2 {
                j[(6 + i, 6 + i)] = 1.0;
            }
        }
        j
    }
}

pub fn skew_lyapunov(params: &SkewParams, pt: &SkewPoint, n: usize) -> Result<LyapunovReport, SkewError> {
    if n < 10_000 {
        return Err(SkewError::InvalidParams("need at least 10^4 iterations"));
    }
    Ok(lyapunov_spectrum(&SkewMap::new(params), &pt.to_state(), n, &LyapunovOptions::default())?)
}

/// `(I - M)^{-1}` over the rationals.
pub fn id_minus_inverse(m: &Mat2Int) -> Result<[[Ratio<i64>; 2]; 2], SkewError> {
    let a = Mat2Int::new(1 - m.0[0][0], -m.0[0][1], -m.0[1][0], 1 - m.0[1][1]);
    let det = a.det();
    if det == 0 {
        return Err(SkewError::InvalidParams("I - B^2 is singular"));
    }
    let adj = a.adjugate();
    Ok([
        [Ratio::new(adj.0[0][0], det), Ratio::new(adj.0[0][1], det)],
        [Ratio::new(adj.0[1][0], det), Ratio::new(adj.0[1][1], det)],
    ])
}

/// The function `u` of the coordinate change `Y = y1 - u(x)`, solving
/// `u o f - B^2 u = alpha` pointwise by a two-sided series along the base
/// orbit: forward along the expanding eigendirection of `B^2`, backward
/// along the contracting one.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaKiller {
    base: PerturbedMapParams,
    alpha: TrigMap,
    /// Unit eigenvectors of `B^2` (expanding, contracting); `B^2` is
    /// symmetric, so they are orthonormal.
    e_plus: [f64; 2],
    e_minus: [f64; 2],
    /// `lambda^-2`, the geometric ratio of both series.
    ratio: f64,
    terms: usize,
}

impl AlphaKiller {
    /// Value of `u` at `x`. Constant `alpha` reduces to `(I - B^2)^{-1} alpha`.
    pub fn eval(&self, x: &Torus4Point) -> Result<[f64; 2], SkewError> {
        let mut a = [0.0; 2];
        let (mut up, mut um) = (0.0, 0.0);
        let mut weight = self.ratio;
        let mut fwd = *x;
        for _ in 0..self.terms {
            self.alpha.eval_into(&fwd.0, &mut a);
            up -= weight * (a[0] * self.e_plus[0] + a[1] * self.e_plus[1]);
            weight *= self.ratio;
            fwd = perturbed_apply(&self.base, &fwd);
        }
        let mut weight = 1.0;
        let mut back = *x;
        for _ in 0..self.terms {
            back = perturbed_inverse(&self.base, &back)?;
            self.alpha.eval_into(&back.0, &mut a);
            um += weight * (a[0] * self.e_minus[0] + a[1] * self.e_minus[1]);
            weight *= self.ratio;
        }
        Ok([
            up * self.e_plus[0] + um * self.e_minus[0],
            up * self.e_plus[1] + um * self.e_minus[1],
        ])
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.is_zero()
    }

    /// `|u(f x) - B^2 u(x) - alpha(x)|_inf`.
    pub fn residual_at(&self, x: &Torus4Point) -> Result<f64, SkewError> {
        let u = self.eval(x)?;
        let uf = self.eval(&perturbed_apply(&self.base, x))?;
        let m = b2_f64(&self.base.b());
        let a = self.alpha.eval(&x.0);
        let r0 = uf[0] - (m[0][0] * u[0] + m[0][1] * u[1]) - a[0];
        let r1 = uf[1] - (m[1][0] * u[0] + m[1][1] * u[1]) - a[1];
        Ok(f64::max(libm::fabs(r0), libm::fabs(r1)))
    }

    /// `(x, y1, y2) -> (x, y1 - u(x), y2)`.
    pub fn conjugate(&self, pt: &SkewPoint) -> Result<SkewPoint, SkewError> {
        let u = self.eval(&pt.x)?;
        Ok(SkewPoint::new(pt.x.0, [pt.y1[0] - u[0], pt.y1[1] - u[1]], pt.y2.clone()))
    }

    pub fn unconjugate(&self, pt: &SkewPoint) -> Result<SkewPoint, SkewError> {
        let u = self.eval(&pt.x)?;
        Ok(SkewPoint::new(pt.x.0, [pt.y1[0] + u[0], pt.y1[1] + u[1]], pt.y2.clone()))
    }
}

/// Removes `alpha` by the coordinate change `Y = y1 - u(x)`; returns the
/// conjugated parameters (alpha identically zero) and `u`.
pub fn kill_alpha(params: &SkewParams) -> Result<(SkewParams, AlphaKiller), SkewError> {
    let b2 = params.base.b().square();
    id_minus_inverse(&b2)?;
    let eig = crate::dyncore::eig_sym2(&b2)?;
    let ratio = 1.0 / eig.lambda_plus;
    // Both tails fall below 1e-17 relative.
    let terms = (libm::ceil(-17.0 * libm::log(10.0) / libm::log(ratio)) as usize).max(1) + 1;
    let killer = AlphaKiller {
        base: params.base,
        alpha: params.alpha.clone(),
        e_plus: eig.eigvec_plus,
        e_minus: eig.eigvec_minus,
        ratio,
        terms,
    };
    Ok((params.with_alpha(TrigMap::zero(2))?, killer))
}

/// `F' = rho o F` with `rho = (0, omega)`: adds `omega` to the constant
/// part of the `y2` step.
pub fn rotate(params: &SkewParams, omega: &[f64]) -> Result<SkewParams, SkewError> {
    if omega.len() != params.k - 2 {
        return Err(SkewError::InvalidParams("omega must have k - 2 components"));
    }
    let shifted = params.omega.iter().zip(omega).map(|(a, b)| a + b).collect();
    SkewParams::new(params.k, params.base, params.alpha.clone(), params.beta.clone(), shifted)
}

/// Quasi-Monte Carlo estimate of `int (beta + omega) dvol`.
pub fn beta_integral(params: &SkewParams, samples: usize) -> Vec<f64> {
    let n2 = params.k - 2;
    let mut acc = vec![0.0; n2];
    let mut h = Halton::new(4, 1);
    let mut x = [0.0; 4];
    let mut b = vec![0.0; n2];
    for _ in 0..samples {
        h.fill(&mut x);
        params.beta.eval_into(&x, &mut b);
        acc.iter_mut().zip(&b).for_each(|(a, v)| *a += v);
    }
    acc.iter()
        .zip(&params.omega)
        .map(|(a, w)| a / samples.max(1) as f64 + w)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Decaying,
    NonDecaying,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Decaying => "decaying",
            Verdict::NonDecaying => "non-decaying",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicityReport {
    pub character: Vec<i64>,
    /// Running averages at log-spaced checkpoints `(n, average)`.
    pub averages: Vec<(usize, Complex64)>,
    pub beta_integral: Vec<f64>,
    pub verdict: Verdict,
}

impl ErgodicityReport {
    pub fn final_average(&self) -> Complex64 {
        self.averages.last().map(|a| a.1).unwrap_or_default()
    }
}

/// Checkpoints per decade of the averaging trace.
pub const CHECKPOINTS_PER_DECADE: usize = 20;
const BETA_QMC_SAMPLES: usize = 1 << 16;

fn checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let decades = libm::log10(n as f64);
    let steps = libm::ceil(decades * CHECKPOINTS_PER_DECADE as f64) as usize;
    for i in 0..=steps {
        let c = libm::round(libm::pow(10.0, i as f64 / CHECKPOINTS_PER_DECADE as f64)) as usize;
        let c = c.clamp(1, n);
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Decaying when every checkpoint in the last decade is below `n^{-1/4}`,
/// non-decaying when none is, inconclusive otherwise.
pub fn decay_verdict(averages: &[(usize, Complex64)]) -> Verdict {
    let Some(&(n, _)) = averages.last() else {
        return Verdict::Inconclusive;
    };
    let threshold = libm::pow(n as f64, -0.25);
    let tail: Vec<f64> = averages.iter().filter(|(i, _)| *i * 10 >= n).map(|(_, a)| a.norm()).collect();
    if tail.iter().all(|a| *a < threshold) {
        Verdict::Decaying
    } else if tail.iter().all(|a| *a >= threshold) {
        Verdict::NonDecaying
    } else {
        Verdict::Inconclusive
    }
}

/// Running averages of `exp(2 pi i <m, y2>)` along one orbit for several
/// characters at once.
pub fn birkhoff_characters(
    params: &SkewParams,
    characters: &[Vec<i64>],
    pt: &SkewPoint,
    n: usize,
) -> Result<Vec<ErgodicityReport>, SkewError> {
    if n < 10_000 {
        return Err(SkewError::InvalidParams("need at least 10^4 iterations"));
    }
    let n2 = params.k - 2;
    if characters.iter().any(|m| m.len() != n2) {
        return Err(SkewError::InvalidParams("character must have k - 2 components"));
    }
    let marks = checkpoints(n);
    let map = SkewMap::new(params);
    let mut s = pt.to_state();
    let mut sums = vec![Complex64::new(0.0, 0.0); characters.len()];
    let mut traces: Vec<Vec<(usize, Complex64)>> = vec![Vec::with_capacity(marks.len()); characters.len()];
    let mut next = 0;
    for it in 1..=n {
        for (m, sum) in characters.iter().zip(sums.iter_mut()) {
            let phase: f64 = m.iter().zip(&s[6..]).map(|(a, y)| *a as f64 * y).sum();
            let phase = phase - libm::round(phase);
            *sum += Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        if marks[next] == it {
            for (sum, tr) in sums.iter().zip(traces.iter_mut()) {
                tr.push((it, sum / it as f64));
            }
            next += 1;
        }
        map.step(&mut s);
    }
    let integral = beta_integral(params, BETA_QMC_SAMPLES);
    Ok(characters
        .iter()
        .zip(traces)
        .map(|(m, averages)| ErgodicityReport {
            character: m.clone(),
            verdict: decay_verdict(&averages),
            averages,
            beta_integral: integral.clone(),
        })
        .collect())
}

pub fn birkhoff_character(
    params: &SkewParams,
    m: &[i64],
    pt: &SkewPoint,
    n: usize,
) -> Result<ErgodicityReport, SkewError> {
    let mut v = birkhoff_characters(params, &[m.to_vec()], pt, n)?;
    Ok(v.remove(0))
}
