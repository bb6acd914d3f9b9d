//! Charts on the Kummer surface `X`: the quotient projection `sigma` away
//! from the 16 exceptional points, the blow-up charts `psi1`, `psi2` near
//! them, and the induced map `f_{eps,d}` with its differential.
//!
//! Near a half-lattice point `p` the displacement `z = t - p` is written in
//! scaled eigen-coordinates `zeta = d P^{-1} z`, where the columns of `P`
//! are unit eigenvectors of the linear-zone block. Then
//!
//! * `psi1`: `v = zeta1 / zeta2`, `w = zeta2^2` (used when `|v| <= 1`),
//! * `psi2`: `v = zeta2 / zeta1`, `w = zeta1^2` (used otherwise),
//!
//! and the exceptional line is `w = 0` in both. Because `zeta` is scaled by
//! `d`, the chart picture is the same for every `d`.

use core::fmt;

use num_complex::Complex64;

use crate::dyncore::{
    eig_real2, perturbed_apply, perturbed_diff, perturbed_inverse, BumpKind, DynError,
    PerturbedMapParams, Torus4Point,
};
use crate::util::wrap_centered;

#[derive(Clone, Debug, PartialEq)]
pub enum KummerError {
    /// `sigma` is undefined on the 16 half-lattice points.
    ExceptionalInput,
    /// A cross-chart transition was requested at `v = 0`.
    PoleAtZero,
    /// Transitions only make sense between charts of one exceptional point.
    ChartMismatch,
    /// The atlas needs an exactly linear zone around each exceptional point.
    UnsupportedProfile,
    /// A chart point was supplied outside the chart's domain.
    OutsideDomain,
    Dyn(DynError),
}

impl fmt::Display for KummerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KummerError::ExceptionalInput => write!(f, "point lies on the exceptional set"),
            KummerError::PoleAtZero => write!(f, "chart transition has a pole at v = 0"),
            KummerError::ChartMismatch => write!(f, "charts belong to different exceptional points"),
            KummerError::UnsupportedProfile => {
                write!(f, "bump profile has no exactly linear zone")
            }
            KummerError::OutsideDomain => write!(f, "coordinates outside the chart domain"),
            KummerError::Dyn(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for KummerError {}

impl From<DynError> for KummerError {
    fn from(e: DynError) -> Self {
        KummerError::Dyn(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChartId {
    Torus,
    Psi1(u8),
    Psi2(u8),
}

impl ChartId {
    pub fn exceptional_index(&self) -> Option<u8> {
        match *self {
            ChartId::Torus => None,
            ChartId::Psi1(p) | ChartId::Psi2(p) => Some(p),
        }
    }
}

/// A point of `X`. Torus-chart coordinates are the canonical representative
/// of the orbit `{t, -t}`; psi-chart coordinates are
/// `(Re v, Im v, Re w, Im w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KummerPoint {
    pub chart: ChartId,
    pub coords: [f64; 4],
}

impl KummerPoint {
    pub fn psi(chart: ChartId, v: Complex64, w: Complex64) -> Self {
        KummerPoint { chart, coords: [v.re, v.im, w.re, w.im] }
    }

    pub fn v(&self) -> Complex64 {
        Complex64::new(self.coords[0], self.coords[1])
    }

    pub fn w(&self) -> Complex64 {
        Complex64::new(self.coords[2], self.coords[3])
    }

    pub fn on_exceptional_line(&self) -> bool {
        self.chart != ChartId::Torus && self.coords[2] == 0.0 && self.coords[3] == 0.0
    }

    /// Same chart and coordinates within `tol` (circle distance on the torus).
    pub fn approx_eq(&self, other: &KummerPoint, tol: f64) -> bool {
        if self.chart != other.chart {
            return false;
        }
        (0..4).all(|i| {
            let diff = self.coords[i] - other.coords[i];
            let diff = if self.chart == ChartId::Torus { wrap_centered(diff) } else { diff };
            libm::fabs(diff) <= tol
        })
    }
}

/// Tangent vector; components follow the chart's coordinate order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVec {
    pub base: KummerPoint,
    pub components: [f64; 4],
}

impl TangentVec {
    pub fn dv(&self) -> Complex64 {
        Complex64::new(self.components[0], self.components[1])
    }

    pub fn dw(&self) -> Complex64 {
        Complex64::new(self.components[2], self.components[3])
    }
}

/// Canonical representative of `{t, -t}`: the lexicographically smaller one.
/// Returns the representative and `true` if it is `-t`.
pub fn canonical_rep(t: &Torus4Point) -> (Torus4Point, bool) {
    let neg = t.negate();
    for i in 0..4 {
        if neg.0[i] < t.0[i] {
            return (neg, true);
        }
        if neg.0[i] > t.0[i] {
            return (*t, false);
        }
    }
    (*t, false)
}

/// Index of the half-lattice point nearest to `t` and the centred
/// displacement `t - p`.
pub fn nearest_exceptional(t: &Torus4Point) -> (u8, [f64; 4]) {
    let mut index = 0u8;
    let mut z = [0.0; 4];
    for j in 0..4 {
        let c = t.0[j];
        let half = libm::round(2.0 * c) as i64;
        if half.rem_euclid(2) == 1 {
            index |= 1 << j;
            z[j] = c - 0.5;
        } else {
            z[j] = wrap_centered(c);
        }
    }
    (index, z)
}

/// `psi2^{-1} psi1 (v, w) = (1/v, v^2 w)` and its inverse (the same formula).
pub fn blowup_chart_map(
    from: ChartId,
    to: ChartId,
    v: Complex64,
    w: Complex64,
) -> Result<(Complex64, Complex64), KummerError> {
    if from == to {
        return Ok((v, w));
    }
    match (from, to) {
        (ChartId::Psi1(a), ChartId::Psi2(b)) | (ChartId::Psi2(a), ChartId::Psi1(b)) if a == b => {
            if v == Complex64::new(0.0, 0.0) {
                return Err(KummerError::PoleAtZero);
            }
            Ok((v.inv(), v * v * w))
        }
        _ => Err(KummerError::ChartMismatch),
    }
}

/// Jacobian of the chart transition applied to `(dv, dw)` at `(v, w)`.
fn transition_tangent(
    v: Complex64,
    w: Complex64,
    dv: Complex64,
    dw: Complex64,
) -> (Complex64, Complex64) {
    (-dv / (v * v), 2.0 * v * w * dv + v * v * dw)
}

/// Coefficient of `eta = sigma_*(dz1 ^ dz2)` in the chart's holomorphic
/// frame, with the psi charts normalised to the model `C^2`: `1` on the
/// torus chart, `1/2` for `dv ^ dw` in `psi1` and `-1/2` in `psi2`.
pub fn eta_coefficient(pt: &KummerPoint) -> Complex64 {
    match pt.chart {
        ChartId::Torus => Complex64::new(1.0, 0.0),
        ChartId::Psi1(_) => Complex64::new(0.5, 0.0),
        ChartId::Psi2(_) => Complex64::new(-0.5, 0.0),
    }
}

/// Complex determinant of the `psi1 -> psi2` transition at `v`.
pub fn transition_jacobian_det(v: Complex64) -> Complex64 {
    // d(1/v) ^ d(v^2 w) = (-1/v^2) v^2 dv ^ dw
    -(v * v) / (v * v)
}

/// Chart-local state used internally: a point with one tangent vector.
#[derive(Clone, Copy, Debug)]
enum Local {
    Torus { t: Torus4Point, dt: [f64; 4] },
    Psi { p: u8, second: bool, v: Complex64, w: Complex64, dv: Complex64, dw: Complex64 },
}

/// Frame data and chart geometry for one map `f_{eps,d}`.
#[derive(Clone, Copy, Debug)]
pub struct Atlas {
    params: PerturbedMapParams,
    mu_hat: f64,
    mu_check: f64,
    frame: [[f64; 2]; 2],
    frame_inv: [[f64; 2]; 2],
    scale: f64,
    radius: f64,
}

impl Atlas {
    pub fn new(params: PerturbedMapParams) -> Result<Self, KummerError> {
        if params.bump().kind() != BumpKind::SmoothGlued {
            return Err(KummerError::UnsupportedProfile);
        }
        let block = params.linear_block();
        let e = eig_real2(&block)?;
        let frame = [
            [e.eigvec_plus[0], e.eigvec_minus[0]],
            [e.eigvec_plus[1], e.eigvec_minus[1]],
        ];
        let det = frame[0][0] * frame[1][1] - frame[0][1] * frame[1][0];
        let frame_inv = [
            [frame[1][1] / det, -frame[0][1] / det],
            [-frame[1][0] / det, frame[0][0] / det],
        ];
        let d = params.d() as f64;
        let radius = f64::min(params.bump().delta() / d, 0.1);
        Ok(Self {
            params,
            mu_hat: e.lambda_plus,
            mu_check: e.lambda_minus,
            frame,
            frame_inv,
            scale: d,
            radius,
        })
    }

    pub fn params(&self) -> &PerturbedMapParams {
        &self.params
    }

    /// Expanding eigenvalue of the linear-zone block.
    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    /// Contracting eigenvalue of the linear-zone block (`1 / mu_hat` only
    /// when that block has determinant one).
    pub fn mu_check(&self) -> f64 {
        self.mu_check
    }

    /// Columns are the unit eigenvectors for `mu_hat`, `mu_check`.
    pub fn frame(&self) -> [[f64; 2]; 2] {
        self.frame
    }

    /// Spectral norm of the eigenframe.
    pub fn frame_norm(&self) -> f64 {
        let p = &self.frame;
        let a = p[0][0] * p[0][0] + p[1][0] * p[1][0];
        let b = p[0][0] * p[0][1] + p[1][0] * p[1][1];
        let c = p[0][1] * p[0][1] + p[1][1] * p[1][1];
        let half_tr = 0.5 * (a + c);
        let rad = libm::sqrt(0.25 * (a - c) * (a - c) + b * b);
        libm::sqrt(half_tr + rad)
    }

    /// Torus radius of the psi-chart neighbourhoods, `min(delta / d, 0.1)`.
    pub fn handoff_radius(&self) -> f64 {
        self.radius
    }

    /// The same radius measured in the scaled model, `d * r_d`.
    pub fn model_radius(&self) -> f64 {
        self.scale * self.radius
    }

    /// Chart multipliers `(v factor, w factor)` of one forward step.
    pub fn chart_multipliers(&self, chart: ChartId) -> (f64, f64) {
        match chart {
            ChartId::Psi2(_) => (self.mu_check / self.mu_hat, self.mu_hat * self.mu_hat),
            _ => (self.mu_hat / self.mu_check, self.mu_check * self.mu_check),
        }
    }

    fn to_zeta(&self, z: &[f64; 4]) -> [Complex64; 2] {
        let z1 = Complex64::new(z[0], z[2]);
        let z2 = Complex64::new(z[1], z[3]);
        let q = &self.frame_inv;
        [
            (z1 * q[0][0] + z2 * q[0][1]) * self.scale,
            (z1 * q[1][0] + z2 * q[1][1]) * self.scale,
        ]
    }

    fn from_zeta(&self, zeta: &[Complex64; 2]) -> [f64; 4] {
        let p = &self.frame;
        let z1 = (zeta[0] * p[0][0] + zeta[1] * p[0][1]) / self.scale;
        let z2 = (zeta[0] * p[1][0] + zeta[1] * p[1][1]) / self.scale;
        [z1.re, z2.re, z1.im, z2.im]
    }

    /// Euclidean length of the torus displacement `P zeta / d`, times `d`.
    fn model_norm(&self, zeta: &[Complex64; 2]) -> f64 {
        let z = self.from_zeta(zeta);
        self.scale * libm::sqrt(z.iter().map(|c| c * c).sum::<f64>())
    }

    /// Whether a psi-chart point lies in the chart domain.
    pub fn in_psi_domain(&self, pt: &KummerPoint) -> bool {
        match pt.chart {
            ChartId::Torus => false,
            chart => {
                let zeta = zeta_from_psi(chart, pt.v(), pt.w());
                self.model_norm(&zeta) < self.model_radius()
            }
        }
    }

    /// The quotient map `sigma`.
    pub fn sigma_project(&self, t: &Torus4Point) -> Result<KummerPoint, KummerError> {
        Ok(self.project_local(t, &[0.0; 4])?.into_vec().base)
    }

    /// `sigma` together with its differential applied to `dt`.
    pub fn sigma_project_tangent(
        &self,
        t: &Torus4Point,
        dt: &[f64; 4],
    ) -> Result<TangentVec, KummerError> {
        Ok(self.project_local(t, dt)?.into_vec())
    }

    fn project_local(&self, t: &Torus4Point, dt: &[f64; 4]) -> Result<Local, KummerError> {
        let (p, z) = nearest_exceptional(t);
        if z.iter().all(|&c| c == 0.0) {
            return Err(KummerError::ExceptionalInput);
        }
        let norm = libm::sqrt(z.iter().map(|c| c * c).sum::<f64>());
        if norm < self.radius {
            let zeta = self.to_zeta(&z);
            let dzeta = self.to_zeta(dt);
            let second = zeta[0].norm() > zeta[1].norm();
            let (a, b, da, db) = if second {
                (zeta[1], zeta[0], dzeta[1], dzeta[0])
            } else {
                (zeta[0], zeta[1], dzeta[0], dzeta[1])
            };
            // v = a / b, w = b^2
            let v = a / b;
            let w = b * b;
            let dv = (da * b - a * db) / (b * b);
            let dw = 2.0 * b * db;
            Ok(Local::Psi { p, second, v, w, dv, dw })
        } else {
            let (rep, flipped) = canonical_rep(t);
            let dt = if flipped { dt.map(|c| -c) } else { *dt };
            Ok(Local::Torus { t: rep, dt })
        }
    }

    fn local_of(&self, vec: &TangentVec) -> Local {
        let c = vec.components;
        match vec.base.chart {
            ChartId::Torus => Local::Torus { t: Torus4Point(vec.base.coords), dt: c },
            ChartId::Psi1(p) | ChartId::Psi2(p) => Local::Psi {
                p,
                second: matches!(vec.base.chart, ChartId::Psi2(_)),
                v: vec.base.v(),
                w: vec.base.w(),
                dv: vec.dv(),
                dw: vec.dw(),
            },
        }
    }

    /// Brings a psi-chart state to its canonical chart, or hands it to the
    /// torus chart when it has left the chart domain.
    fn normalize(&self, local: Local) -> Result<Local, KummerError> {
        match local {
            Local::Torus { .. } => Ok(local),
            Local::Psi { p, second, v, w, dv, dw } => {
                let (second, v, w, dv, dw) = if v.norm() > 1.0 {
                    let (dv2, dw2) = transition_tangent(v, w, dv, dw);
                    (!second, v.inv(), v * v * w, dv2, dw2)
                } else {
                    (second, v, w, dv, dw)
                };
                let chart = if second { ChartId::Psi2(p) } else { ChartId::Psi1(p) };
                let zeta = zeta_from_psi(chart, v, w);
                if self.model_norm(&zeta) < self.model_radius() {
                    return Ok(Local::Psi { p, second, v, w, dv, dw });
                }
                let (t, dt) = self.psi_to_torus(p, chart, v, w, dv, dw)?;
                self.project_local(&t, &dt)
            }
        }
    }

    fn psi_to_torus(
        &self,
        p: u8,
        chart: ChartId,
        v: Complex64,
        w: Complex64,
        dv: Complex64,
        dw: Complex64,
    ) -> Result<(Torus4Point, [f64; 4]), KummerError> {
        if w == Complex64::new(0.0, 0.0) {
            return Err(KummerError::OutsideDomain);
        }
        let s = w.sqrt();
        let ds = dw / (2.0 * s);
        let (a, da) = (v * s, dv * s + v * ds);
        let (zeta, dzeta) = match chart {
            ChartId::Psi2(_) => ([s, a], [ds, da]),
            _ => ([a, s], [da, ds]),
        };
        let base = Torus4Point::half_lattice(p).0;
        let z = self.from_zeta(&zeta);
        let dz = self.from_zeta(&dzeta);
        let t = Torus4Point::new([base[0] + z[0], base[1] + z[1], base[2] + z[2], base[3] + z[3]]);
        Ok((t, dz))
    }

    /// A point of `T^4` over `pt` (one of the two), or `None` on the
    /// exceptional line.
    pub fn torus_lift(&self, pt: &KummerPoint) -> Option<Torus4Point> {
        match pt.chart {
            ChartId::Torus => Some(Torus4Point(pt.coords)),
            chart => {
                let p = chart.exceptional_index().unwrap_or(0);
                let zero = Complex64::new(0.0, 0.0);
                self.psi_to_torus(p, chart, pt.v(), pt.w(), zero, zero).ok().map(|(t, _)| t)
            }
        }
    }

    fn step_local(&self, local: Local, forward: bool) -> Result<Local, KummerError> {
        match local {
            Local::Torus { t, dt } => {
                if forward {
                    let image = perturbed_apply(&self.params, &t);
                    let m = perturbed_diff(&self.params, &t);
                    let dt2 = mat4_apply(&m, &dt);
                    self.project_local(&image, &dt2)
                } else {
                    let pre = perturbed_inverse(&self.params, &t)?;
                    let dt2 = [
                        block_solve(&self.params.block(pre.0[0]), [dt[0], dt[1]]),
                        block_solve(&self.params.block(pre.0[2]), [dt[2], dt[3]]),
                    ];
                    let dt2 = [dt2[0][0], dt2[0][1], dt2[1][0], dt2[1][1]];
                    self.project_local(&pre, &dt2)
                }
            }
            Local::Psi { p, second, v, w, dv, dw } => {
                let chart = if second { ChartId::Psi2(p) } else { ChartId::Psi1(p) };
                let (fv, fw) = self.chart_multipliers(chart);
                let (fv, fw) = if forward { (fv, fw) } else { (1.0 / fv, 1.0 / fw) };
                let next = Local::Psi { p, second, v: v * fv, w: w * fw, dv: dv * fv, dw: dw * fw };
                if !forward {
                    // the chart formula is only valid if the preimage stays in
                    // the linear zone; otherwise go through the torus
                    let zeta = zeta_from_psi(chart, v * fv, w * fw);
                    if self.model_norm(&zeta) >= self.model_radius() {
                        let (t, dt) = self.psi_to_torus(p, chart, v, w, dv, dw)?;
                        return self.step_local(Local::Torus { t, dt }, false);
                    }
                }
                self.normalize(next)
            }
        }
    }

    /// The induced map `f_{eps,d}`.
    pub fn apply(&self, pt: &KummerPoint) -> Result<KummerPoint, KummerError> {
        Ok(self.diff(&TangentVec { base: *pt, components: [0.0; 4] })?.base)
    }

    pub fn apply_inverse(&self, pt: &KummerPoint) -> Result<KummerPoint, KummerError> {
        Ok(self.diff_inverse(&TangentVec { base: *pt, components: [0.0; 4] })?.base)
    }

    /// Pushes a tangent vector forward by `Df`; the base point moves to its
    /// image and the components are expressed in the image's chart.
    pub fn diff(&self, vec: &TangentVec) -> Result<TangentVec, KummerError> {
        let local = self.step_local(self.local_of(vec), true)?;
        Ok(local.into_vec())
    }

    /// Pulls a tangent vector back by `Df^{-1}`.
    pub fn diff_inverse(&self, vec: &TangentVec) -> Result<TangentVec, KummerError> {
        let local = self.step_local(self.local_of(vec), false)?;
        Ok(local.into_vec())
    }

    /// Re-expresses a psi-chart tangent vector in the other psi chart.
    pub fn change_chart(&self, vec: &TangentVec, to: ChartId) -> Result<TangentVec, KummerError> {
        let (v, w) = (vec.base.v(), vec.base.w());
        let (v2, w2) = blowup_chart_map(vec.base.chart, to, v, w)?;
        let (dv, dw) = if vec.base.chart == to {
            (vec.dv(), vec.dw())
        } else {
            transition_tangent(v, w, vec.dv(), vec.dw())
        };
        Ok(TangentVec {
            base: KummerPoint::psi(to, v2, w2),
            components: [dv.re, dv.im, dw.re, dw.im],
        })
    }

    /// The scaled eigen-coordinates `zeta` of a psi-chart point, on the
    /// branch `sqrt(w)` with non-negative real part.
    pub fn zeta_of(&self, pt: &KummerPoint) -> Option<[Complex64; 2]> {
        match pt.chart {
            ChartId::Torus => None,
            chart => Some(zeta_from_psi(chart, pt.v(), pt.w())),
        }
    }

    /// The differential of the psi-to-zeta map applied to a tangent vector.
    /// Undefined (returns `None`) on the exceptional line.
    pub fn dzeta_of(&self, vec: &TangentVec) -> Option<[Complex64; 2]> {
        let chart = vec.base.chart;
        if chart == ChartId::Torus || vec.base.w() == Complex64::new(0.0, 0.0) {
            return None;
        }
        let (v, w) = (vec.base.v(), vec.base.w());
        let s = w.sqrt();
        let ds = vec.dw() / (2.0 * s);
        let da = vec.dv() * s + v * ds;
        Some(match chart {
            ChartId::Psi2(_) => [ds, da],
            _ => [da, ds],
        })
    }

    /// `P dzeta`: the flat torus displacement scaled by `d`.
    pub fn frame_apply(&self, dzeta: &[Complex64; 2]) -> [Complex64; 2] {
        let p = &self.frame;
        [
            dzeta[0] * p[0][0] + dzeta[1] * p[0][1],
            dzeta[0] * p[1][0] + dzeta[1] * p[1][1],
        ]
    }
}

impl Local {
    fn into_vec(self) -> TangentVec {
        match self {
            Local::Torus { t, dt } => TangentVec {
                base: KummerPoint { chart: ChartId::Torus, coords: t.0 },
                components: dt,
            },
            Local::Psi { p, second, v, w, dv, dw } => {
                let chart = if second { ChartId::Psi2(p) } else { ChartId::Psi1(p) };
                TangentVec {
                    base: KummerPoint::psi(chart, v, w),
                    components: [dv.re, dv.im, dw.re, dw.im],
                }
            }
        }
    }
}

fn zeta_from_psi(chart: ChartId, v: Complex64, w: Complex64) -> [Complex64; 2] {
    let s = w.sqrt();
    match chart {
        ChartId::Psi2(_) => [s, v * s],
        _ => [v * s, s],
    }
}

fn mat4_apply(m: &nalgebra::Matrix4<f64>, x: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (0..4).map(|j| m[(i, j)] * x[j]).sum();
    }
    out
}

fn block_solve(m: &[[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * r[0] - m[0][1] * r[1]) / det,
        (-m[1][0] * r[0] + m[0][0] * r[1]) / det,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atlas(eps: f64, d: u32) -> Atlas {
        Atlas::new(PerturbedMapParams::diagonal(eps, d).unwrap()).unwrap()
    }

    #[test]
    fn transition_example() {
        let (v, w) = blowup_chart_map(
            ChartId::Psi1(0),
            ChartId::Psi2(0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
        )
        .unwrap();
        assert_eq!((v, w), (Complex64::new(0.5, 0.0), Complex64::new(2.0, 0.0)));
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(
            blowup_chart_map(ChartId::Psi1(3), ChartId::Psi2(3), zero, zero),
            Err(KummerError::PoleAtZero)
        );
        assert_eq!(
            blowup_chart_map(ChartId::Psi1(3), ChartId::Psi2(4), zero, zero),
            Err(KummerError::ChartMismatch)
        );
    }

    #[test]
    fn exceptional_points_rejected() {
        let a = atlas(0.05, 2);
        for i in 0..16 {
            assert_eq!(
                a.sigma_project(&Torus4Point::half_lattice(i)),
                Err(KummerError::ExceptionalInput)
            );
        }
    }

    #[test]
    fn eta_across_transition() {
        let v = Complex64::new(0.3, -1.2);
        let lhs = eta_coefficient(&KummerPoint::psi(ChartId::Psi1(0), v, v));
        let rhs = eta_coefficient(&KummerPoint::psi(ChartId::Psi2(0), v, v)) * transition_jacobian_det(v);
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn origin_of_line_fixed_without_perturbation() {
        let a = atlas(0.0, 1);
        let zero = Complex64::new(0.0, 0.0);
        let pt = KummerPoint::psi(ChartId::Psi1(5), zero, zero);
        assert_eq!(a.apply(&pt).unwrap(), pt);
    }

    #[test]
    fn analytic_profile_rejected() {
        let bump = crate::dyncore::BumpProfile::analytic_sin(0.05, 1).unwrap();
        let params =
            PerturbedMapParams::new(crate::dyncore::Mat2Int::B13_8, bump, (1, 1)).unwrap();
        assert_eq!(Atlas::new(params).err(), Some(KummerError::UnsupportedProfile));
    }
}
