//! The metric family on `X`: the Hermitian metric `Q(v)|dv|^2 + |dw|^2 / Q(v)`
//! near each exceptional line, the scaled flat metric `d^2 g` elsewhere,
//! their blend across a collar, and a two-sided finite-average adapted norm.
//!
//! Heights are measured by `|w|` in the canonical psi chart, which equals
//! `max(|zeta1|, |zeta2|)^2` and so does not depend on the chart.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::dyncore::eig_real2;
use crate::kummer::{Atlas, ChartId, KummerError, KummerPoint, TangentVec};
use crate::util::smooth_step;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricError {
    InvalidSpec(&'static str),
    Kummer(KummerError),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::InvalidSpec(why) => write!(f, "invalid metric spec: {why}"),
            MetricError::Kummer(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MetricError {}

impl From<KummerError> for MetricError {
    fn from(e: KummerError) -> Self {
        MetricError::Kummer(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionTag {
    /// Inner neighbourhood of an exceptional line.
    V,
    /// Collar between the inner and outer neighbourhoods.
    B,
    /// Everything else.
    G,
}

impl RegionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionTag::V => "V",
            RegionTag::B => "B",
            RegionTag::G => "G",
        }
    }
}

/// Parameters of `g_{d,X}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSpec {
    pub d: u32,
    pub epsilon: f64,
    /// Height below which the metric is the pure blow-up metric.
    pub v1_radius: f64,
    /// Height above which the metric is the pure flat metric.
    pub v2_radius: f64,
    /// `sqrt(mu_eps * lambda)`.
    pub mu_bar: f64,
    /// Larger eigenvalue of `B`.
    pub lambda: f64,
}

impl MetricSpec {
    /// Default radii: `v2` is half the largest height that stays inside the
    /// chart domain, and `v1` is smaller by four times the largest one-step
    /// height change, so no orbit can step over the collar.
    pub fn for_atlas(atlas: &Atlas) -> Result<Self, MetricError> {
        let v2 = 0.5 * handoff_height(atlas);
        let factor = f64::min(
            atlas.mu_check() * atlas.mu_check(),
            1.0 / (atlas.mu_hat() * atlas.mu_hat()),
        );
        Self::with_radii(atlas, 0.25 * factor * v2, v2)
    }

    pub fn with_radii(atlas: &Atlas, v1: f64, v2: f64) -> Result<Self, MetricError> {
        if !(v1 > 0.0 && v1 < v2) {
            return Err(MetricError::InvalidSpec("need 0 < v1_radius < v2_radius"));
        }
        if v2 > handoff_height(atlas) {
            return Err(MetricError::InvalidSpec("v2_radius exceeds the chart handoff"));
        }
        let lambda = eig_real2(&atlas.params().b().to_f64())
            .map_err(|_| MetricError::InvalidSpec("B must have real eigenvalues"))?
            .lambda_plus;
        let mu = atlas.mu_hat();
        if !(mu > 1.0 && mu <= lambda) {
            return Err(MetricError::InvalidSpec("need 1 < mu_eps <= lambda"));
        }
        Ok(Self {
            d: atlas.params().d(),
            epsilon: atlas.params().epsilon(),
            v1_radius: v1,
            v2_radius: v2,
            mu_bar: libm::sqrt(mu * lambda),
            lambda,
        })
    }

    /// Blend weight of the blow-up metric at height `h`: 1 below `v1`,
    /// 0 above `v2`, smooth in `log h` between.
    pub fn rho(&self, height: f64) -> f64 {
        if height <= self.v1_radius {
            return 1.0;
        }
        if height >= self.v2_radius {
            return 0.0;
        }
        let lo = libm::log(self.v1_radius);
        let hi = libm::log(self.v2_radius);
        1.0 - smooth_step((libm::log(height) - lo) / (hi - lo))
    }
}

/// Largest height `max|zeta_i|^2` for which every point is inside the
/// psi-chart domain.
pub fn handoff_height(atlas: &Atlas) -> f64 {
    let r = atlas.model_radius() / (libm::sqrt(2.0) * atlas.frame_norm());
    r * r
}

/// `Q(v) = (1 + |v|^2)^{-2}`.
pub fn q_factor(v: Complex64) -> f64 {
    let s = 1.0 + v.norm_sqr();
    1.0 / (s * s)
}

/// Norm of the real part of `Q(v) dv dv* + Q(v)^{-1} dw dw*`, evaluated in
/// the chart the vector is given in.
pub fn k_norm(vec: &TangentVec) -> f64 {
    let q = q_factor(vec.base.v());
    libm::sqrt(q * vec.dv().norm_sqr() + vec.dw().norm_sqr() / q)
}

/// `k`-norm growth of `e_v` and `e_w` under `(v, w) -> (mu^2 v, w/mu^2)`
/// on the exceptional line.
pub fn cstar_ratio(v: Complex64, mu: f64) -> (f64, f64) {
    let m2 = mu * mu;
    let r = (m2 + m2 * v.norm_sqr()) / (1.0 + m2 * m2 * v.norm_sqr());
    (r, 1.0 / r)
}

/// Chart-independent height of a psi-chart point.
pub fn height(pt: &KummerPoint) -> f64 {
    let v2 = pt.v().norm_sqr();
    f64::max(v2, 1.0) * pt.w().norm()
}

pub fn region_classify(spec: &MetricSpec, pt: &KummerPoint) -> RegionTag {
    if pt.chart == ChartId::Torus {
        return RegionTag::G;
    }
    let h = height(pt);
    if h < spec.v1_radius {
        RegionTag::V
    } else if h < spec.v2_radius {
        RegionTag::B
    } else {
        RegionTag::G
    }
}

/// Moves a psi-chart vector into the chart where `|v| <= 1`.
fn canonical_chart(atlas: &Atlas, vec: &TangentVec) -> Result<TangentVec, MetricError> {
    if vec.base.v().norm() <= 1.0 {
        return Ok(*vec);
    }
    let other = match vec.base.chart {
        ChartId::Psi1(p) => ChartId::Psi2(p),
        ChartId::Psi2(p) => ChartId::Psi1(p),
        ChartId::Torus => return Ok(*vec),
    };
    Ok(atlas.change_chart(vec, other)?)
}

/// Norm of `vec` in `g_{d,X}`.
pub fn gdx_norm(spec: &MetricSpec, atlas: &Atlas, vec: &TangentVec) -> Result<f64, MetricError> {
    if vec.base.chart == ChartId::Torus {
        let s: f64 = vec.components.iter().map(|c| c * c).sum();
        return Ok(spec.d as f64 * libm::sqrt(s));
    }
    let vec = canonical_chart(atlas, vec)?;
    let rho = spec.rho(height(&vec.base));
    let k = k_norm(&vec);
    if rho >= 1.0 {
        return Ok(k);
    }
    let flat = match atlas.dzeta_of(&vec) {
        Some(dzeta) => {
            let dz = atlas.frame_apply(&dzeta);
            libm::sqrt(dz[0].norm_sqr() + dz[1].norm_sqr())
        }
        None => return Ok(k),
    };
    Ok(libm::sqrt(rho * k * k + (1.0 - rho) * flat * flat))
}

/// `|Df u| / |u|` in `g_{d,X}`, together with the regions of the base point
/// and its image.
pub fn expansion_ratio(
    spec: &MetricSpec,
    atlas: &Atlas,
    vec: &TangentVec,
) -> Result<(f64, RegionTag, RegionTag), MetricError> {
    let image = atlas.diff(vec)?;
    let r = gdx_norm(spec, atlas, &image)? / gdx_norm(spec, atlas, vec)?;
    Ok((r, region_classify(spec, &vec.base), region_classify(spec, &image.base)))
}

/// Base of the weights `c^{-2j}` in the adapted norm.
pub fn adapted_rate(spec: &MetricSpec) -> f64 {
    0.95 * spec.lambda * spec.lambda
}

/// `g_{d,X}` norms of `Df^j u` for `j = -(n-1) ..= n`, index `j + n - 1`.
fn orbit_norms(
    spec: &MetricSpec,
    atlas: &Atlas,
    vec: &TangentVec,
    n: usize,
) -> Result<Vec<f64>, MetricError> {
    let mut back = Vec::with_capacity(n);
    let mut cur = *vec;
    for _ in 1..n {
        cur = atlas.diff_inverse(&cur)?;
        back.push(gdx_norm(spec, atlas, &cur)?);
    }
    back.reverse();
    let mut out = back;
    out.push(gdx_norm(spec, atlas, vec)?);
    cur = *vec;
    for _ in 0..n {
        cur = atlas.diff(&cur)?;
        out.push(gdx_norm(spec, atlas, &cur)?);
    }
    Ok(out)
}

fn adapted_from_norms(norms: &[f64], n: usize, c: f64, shift: usize) -> f64 {
    // |Df^s u|^2 + sum_{0<j<n} c^{-2j} (|Df^{s+j} u|^2 + |Df^{s-j} u|^2)
    let zero = n - 1;
    let here = norms[zero + shift];
    let mut acc = here * here;
    let mut w = 1.0;
    let inv = 1.0 / (c * c);
    for j in 1..n {
        w *= inv;
        let fwd = norms[zero + shift + j];
        let bwd = norms[zero + shift - j];
        acc += w * (fwd * fwd + bwd * bwd);
    }
    libm::sqrt(acc)
}

/// Two-sided finite-average norm
/// `|u|'^2 = sum_{|j|<N} c^{-2|j|} |Df^j u|^2` with
/// `c = 0.95 lambda^2`.
pub fn adapted_norm(
    spec: &MetricSpec,
    atlas: &Atlas,
    vec: &TangentVec,
    horizon: usize,
) -> Result<f64, MetricError> {
    if horizon == 0 {
        return Err(MetricError::InvalidSpec("horizon must be at least 1"));
    }
    let norms = orbit_norms(spec, atlas, vec, horizon)?;
    Ok(adapted_from_norms(&norms, horizon, adapted_rate(spec), 0))
}

/// One-step ratio `|Df u|' / |u|'` of the adapted norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptedRatio {
    pub ratio: f64,
    pub from: RegionTag,
    pub to: RegionTag,
}

pub fn adapted_ratio(
    spec: &MetricSpec,
    atlas: &Atlas,
    vec: &TangentVec,
    horizon: usize,
) -> Result<AdaptedRatio, MetricError> {
    if horizon == 0 {
        return Err(MetricError::InvalidSpec("horizon must be at least 1"));
    }
    let norms = orbit_norms(spec, atlas, vec, horizon)?;
    let c = adapted_rate(spec);
    let here = adapted_from_norms(&norms, horizon, c, 0);
    let there = adapted_from_norms(&norms, horizon, c, 1);
    let image = atlas.apply(&vec.base)?;
    Ok(AdaptedRatio {
        ratio: there / here,
        from: region_classify(spec, &vec.base),
        to: region_classify(spec, &image),
    })
}

/// Splits an orbit's region tags into passages (maximal runs that avoid `G`)
/// and returns the largest number of separate `B` runs in any passage.
pub fn max_collar_visits(tags: &[RegionTag]) -> usize {
    let mut worst = 0;
    let mut visits = 0;
    let mut prev = RegionTag::G;
    for &t in tags {
        match t {
            RegionTag::G => visits = 0,
            RegionTag::B if prev != RegionTag::B => visits += 1,
            _ => {}
        }
        worst = worst.max(visits);
        prev = t;
    }
    worst
}

/// Region tags along `f^j(start)` for `j = 0..n`.
pub fn orbit_tags(
    spec: &MetricSpec,
    atlas: &Atlas,
    start: &KummerPoint,
    n: usize,
) -> Result<Vec<RegionTag>, MetricError> {
    let mut tags = Vec::with_capacity(n);
    let mut p = *start;
    for _ in 0..n {
        tags.push(region_classify(spec, &p));
        p = atlas.apply(&p)?;
    }
    Ok(tags)
}
