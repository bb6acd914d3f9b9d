//! Hyperbolicity diagnostics: Lyapunov spectra by repeated QR, invariant
//! complements by the graph transform, the inequality chain for an integer
//! automorphism `A` against measured base rates, and the one-step pinching
//! check for the adapted metric.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bundlealg::{BundleError, IntMat};
use crate::dyncore::{perturbed_apply, perturbed_diff, PerturbedMapParams, Torus4Point};
use crate::kummer::{Atlas, ChartId, KummerPoint, TangentVec};
use crate::metric::{
    adapted_ratio, handoff_height, MetricError, MetricSpec, RegionTag,
};
use crate::util::{splitmix64, wrap01, Halton};

#[derive(Clone, Debug, PartialEq)]
pub enum HypError {
    InvalidInput(&'static str),
    /// The tangent frame collapsed (a zero diagonal in the QR factor).
    Degenerate { iteration: usize },
    /// `m(T3) <= |T1|` at some orbit point.
    GapViolation { index: usize, norm_t1: f64, conorm_t3: f64 },
    NoConvergence { sweeps: usize, change: f64 },
    NotTriangular { index: usize },
    Metric(MetricError),
    Bundle(BundleError),
}

impl fmt::Display for HypError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypError::InvalidInput(why) => write!(f, "invalid input: {why}"),
            HypError::Degenerate { iteration } => {
                write!(f, "tangent frame degenerate at iteration {iteration}")
            }
            HypError::GapViolation { index, norm_t1, conorm_t3 } => write!(
                f,
                "gap condition fails at orbit point {index}: |T1| = {norm_t1}, m(T3) = {conorm_t3}"
            ),
            HypError::NoConvergence { sweeps, change } => {
                write!(f, "graph transform did not converge in {sweeps} sweeps (change {change:e})")
            }
            HypError::NotTriangular { index } => {
                write!(f, "cocycle matrix {index} is not block upper triangular")
            }
            HypError::Metric(e) => write!(f, "{e}"),
            HypError::Bundle(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for HypError {}

impl From<MetricError> for HypError {
    fn from(e: MetricError) -> Self {
        HypError::Metric(e)
    }
}

impl From<BundleError> for HypError {
    fn from(e: BundleError) -> Self {
        HypError::Bundle(e)
    }
}

/// A smooth self-map of a torus `R^n / Z^n` (or of `R^n`) with its
/// differential.
pub trait TangentDynamics {
    fn dim(&self) -> usize;
    /// Advances `state` by one iterate in place.
    fn step(&self, state: &mut [f64]);
    /// Differential at `state`.
    fn jacobian(&self, state: &[f64]) -> DMatrix<f64>;
}

/// `B_{eps,d} (+) B_{eps,d}` on `T^4`.
#[derive(Clone, Copy, Debug)]
pub struct TorusMap {
    pub params: PerturbedMapParams,
}

impl TangentDynamics for TorusMap {
    fn dim(&self) -> usize {
        4
    }

    fn step(&self, state: &mut [f64]) {
        let p = perturbed_apply(&self.params, &Torus4Point([state[0], state[1], state[2], state[3]]));
        state[..4].copy_from_slice(&p.0);
    }

    fn jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        let m = perturbed_diff(&self.params, &Torus4Point([state[0], state[1], state[2], state[3]]));
        DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
    }
}

/// Translation `x -> x + shift` on `T^n`.
#[derive(Clone, Debug)]
pub struct Translation {
    pub shift: Vec<f64>,
}

impl TangentDynamics for Translation {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn step(&self, state: &mut [f64]) {
        for (x, s) in state.iter_mut().zip(&self.shift) {
            *x = wrap01(*x + s);
        }
    }

    fn jacobian(&self, _state: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.shift.len(), self.shift.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovOptions {
    /// Iterates discarded before accumulation starts.
    pub transient: usize,
    /// Number of trace rows recorded over the run.
    pub trace_points: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { transient: 1000, trace_points: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovReport {
    /// Exponents in nats per iterate, descending.
    pub exponents: Vec<f64>,
    pub n_iters: usize,
    /// Per-exponent variance of the running estimates over the last decade
    /// of the run (iterations `n/10 ..= n`).
    pub residuals: Vec<f64>,
    /// Orbit average of `log |det Df|`.
    pub log_det_average: f64,
    /// Running estimates `(iteration, exponents)`, each sorted descending.
    pub trace: Vec<(usize, Vec<f64>)>,
}

impl LyapunovReport {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Lyapunov spectrum by re-orthonormalising a full tangent frame every step.
pub fn lyapunov_spectrum<M: TangentDynamics + ?Sized>(
    map: &M,
    x0: &[f64],
    n_iters: usize,
    opts: &LyapunovOptions,
) -> Result<LyapunovReport, HypError> {
    let n = map.dim();
    if x0.len() != n {
        return Err(HypError::InvalidInput("initial point has the wrong dimension"));
    }
    if n_iters < 1000 {
        return Err(HypError::InvalidInput("need at least 1000 iterations"));
    }
    let mut x = x0.to_vec();
    let mut q = DMatrix::<f64>::identity(n, n);
    for it in 0..opts.transient {
        let j = map.jacobian(&x);
        let qr = (j * &q).qr();
        q = qr.q();
        if qr.r().diagonal().iter().any(|r| *r == 0.0 || !r.is_finite()) {
            return Err(HypError::Degenerate { iteration: it });
        }
        map.step(&mut x);
    }
    let every = (n_iters / opts.trace_points.max(1)).max(1);
    let mut sums = vec![0.0; n];
    let mut log_det = 0.0;
    let mut trace = Vec::new();
    for it in 1..=n_iters {
        let j = map.jacobian(&x);
        log_det += libm::log(libm::fabs(j.determinant()));
        let qr = (j * &q).qr();
        let r = qr.r();
        for (i, s) in sums.iter_mut().enumerate() {
            let d = libm::fabs(r[(i, i)]);
            if d == 0.0 || !d.is_finite() {
                return Err(HypError::Degenerate { iteration: it });
            }
            *s += libm::log(d);
        }
        q = qr.q();
        map.step(&mut x);
        if it % every == 0 || it == n_iters {
            let mut est: Vec<f64> = sums.iter().map(|s| s / it as f64).collect();
            sort_desc(&mut est);
            trace.push((it, est));
        }
    }
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / n_iters as f64).collect();
    sort_desc(&mut exponents);
    let tail: Vec<&Vec<f64>> =
        trace.iter().filter(|(it, _)| *it >= n_iters / 10).map(|(_, e)| e).collect();
    let residuals = (0..n)
        .map(|i| {
            let m = tail.iter().map(|e| e[i]).sum::<f64>() / tail.len() as f64;
            tail.iter().map(|e| (e[i] - m) * (e[i] - m)).sum::<f64>() / tail.len() as f64
        })
        .collect();
    Ok(LyapunovReport {
        exponents,
        n_iters,
        residuals,
        log_det_average: log_det / n_iters as f64,
        trace,
    })
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
}

/// Bases of candidate invariant subspaces at each orbit point.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingFrame {
    /// `(s, c, u)`.
    pub dims: [usize; 3],
    /// `bases[i][sigma]` has `dims[sigma]` unit columns.
    pub bases: Vec<[DMatrix<f64>; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphTransformResult {
    /// `G_i: E3 -> E1`; the complement at point `i` is spanned by `[G_i; I]`.
    pub graphs: Vec<DMatrix<f64>>,
    /// `E1` (as the `s` block) and the invariant complement (as `u`).
    pub frame: SplittingFrame,
    /// `max_i |T1 G_i + C_i - G_{i+1} T3_i| / (|T_i| (1 + |G_{i+1}|))`.
    pub residual: f64,
    /// `max_i |T1_i| / m(T3_i)`.
    pub contraction: f64,
    pub sweeps: usize,
}

fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn conorm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Invariant complement to the invariant subbundle `E1 = R^{n1} x 0` of a
/// periodic cocycle of block upper-triangular maps `T_i = (T1 C; 0 T3)`,
/// where `T_i` maps the fibre at `i` to the fibre at `i + 1 (mod period)`.
pub fn graph_transform_complement(
    cocycle: &[DMatrix<f64>],
    n1: usize,
    max_sweeps: usize,
    tol: f64,
) -> Result<GraphTransformResult, HypError> {
    let period = cocycle.len();
    if period == 0 {
        return Err(HypError::InvalidInput("empty cocycle"));
    }
    let n = cocycle[0].nrows();
    if n1 == 0 || n1 >= n || cocycle.iter().any(|t| t.nrows() != n || t.ncols() != n) {
        return Err(HypError::InvalidInput("inconsistent block sizes"));
    }
    let n3 = n - n1;
    let mut blocks = Vec::with_capacity(period);
    let mut contraction: f64 = 0.0;
    for (i, t) in cocycle.iter().enumerate() {
        let lower = t.view((n1, 0), (n3, n1));
        if lower.iter().any(|x| libm::fabs(*x) > 1e-14 * (1.0 + t.norm())) {
            return Err(HypError::NotTriangular { index: i });
        }
        let t1 = t.view((0, 0), (n1, n1)).into_owned();
        let c = t.view((0, n1), (n1, n3)).into_owned();
        let t3 = t.view((n1, n1), (n3, n3)).into_owned();
        let (a, m) = (norm2(&t1), conorm(&t3));
        if !(m > a) {
            return Err(HypError::GapViolation { index: i, norm_t1: a, conorm_t3: m });
        }
        contraction = contraction.max(a / m);
        let t3_inv = t3.try_inverse().ok_or(HypError::GapViolation { index: i, norm_t1: a, conorm_t3: 0.0 })?;
        blocks.push((t1, c, t3_inv));
    }
    let mut graphs = vec![DMatrix::<f64>::zeros(n1, n3); period];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..period {
            let (t1, c, t3_inv) = &blocks[i];
            let next = (t1 * &graphs[i] + c) * t3_inv;
            let j = (i + 1) % period;
            let scale = 1.0 + next.norm();
            change = change.max((&next - &graphs[j]).norm() / scale);
            graphs[j] = next;
        }
        if change <= tol {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(HypError::NoConvergence { sweeps, change });
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..period {
        let t = &cocycle[i];
        let t1 = t.view((0, 0), (n1, n1));
        let c = t.view((0, n1), (n1, n3));
        let t3 = t.view((n1, n1), (n3, n3));
        let j = (i + 1) % period;
        let r = t1 * &graphs[i] + c - &graphs[j] * t3;
        residual = residual.max(r.norm() / (t.norm() * (1.0 + graphs[j].norm())));
    }
    let bases = graphs
        .iter()
        .map(|g| {
            let e1 = DMatrix::from_fn(n, n1, |r, c| if r == c { 1.0 } else { 0.0 });
            let mut comp = DMatrix::zeros(n, n3);
            comp.view_mut((0, 0), (n1, n3)).copy_from(g);
            for k in 0..n3 {
                comp[(n1 + k, k)] = 1.0;
            }
            for mut col in comp.column_iter_mut() {
                let nrm = col.norm();
                col /= nrm;
            }
            [e1, DMatrix::zeros(n, 0), comp]
        })
        .collect();
    Ok(GraphTransformResult {
        graphs,
        frame: SplittingFrame { dims: [n1, 0, n3], bases },
        residual,
        contraction,
        sweeps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarReport {
    pub dims: [usize; 3],
    pub lambda_s: f64,
    pub mu_s: f64,
    /// `None` when the centre block is trivial.
    pub lambda_c: Option<f64>,
    pub mu_c: Option<f64>,
    pub lambda_u: f64,
    pub mu_u: f64,
    pub m_f: f64,
    pub norm_df: f64,
    /// `lambda_s <= mu_s < lambda_c <= mu_c < lambda_u <= mu_u`.
    pub chain: bool,
    pub pass: bool,
}

fn to_f64(a: &IntMat) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) as f64)
}

/// Deterministic full-rank starting block for subspace iteration.
fn start_block(n: usize, p: usize) -> DMatrix<f64> {
    let mut seed = 0x5eed_u64;
    DMatrix::from_fn(n, p, |_, _| {
        seed = splitmix64(seed);
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

/// Orthonormal basis of the dominant `p`-dimensional invariant subspace.
fn dominant_subspace(m: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let n = m.nrows();
    if p == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut q = start_block(n, p).qr().q();
    for _ in 0..400 {
        q = (m * &q).qr().q();
    }
    q
}

/// Orthonormal basis of the `dim`-dimensional intersection of two subspaces.
fn intersect(u: &DMatrix<f64>, w: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = u.nrows();
    if dim == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = (u.transpose() * w).svd(true, false);
    let left = svd.u.unwrap_or_else(|| DMatrix::identity(u.ncols(), u.ncols()));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut y = DMatrix::zeros(u.ncols(), dim);
    for (k, &idx) in order.iter().take(dim).enumerate() {
        y.set_column(k, &left.column(idx));
    }
    (u * y).qr().q()
}

fn extremal_gains(a: &DMatrix<f64>, basis: &DMatrix<f64>) -> (f64, f64) {
    let sv = (a * basis).svd(false, false).singular_values;
    (sv.min(), sv.max())
}

/// Extremal gains of `A` on its dominated splitting and the inequality chain
/// against measured conorm `m_f` and norm `norm_df` of the base map.
pub fn verify_star(a: &IntMat, dims: [usize; 3], m_f: f64, norm_df: f64) -> Result<StarReport, HypError> {
    let k = a.rows();
    if a.cols() != k || dims.iter().sum::<usize>() != k {
        return Err(HypError::InvalidInput("splitting dimensions must add up to k"));
    }
    if dims[0] == 0 || dims[2] == 0 {
        return Err(HypError::InvalidInput("stable and unstable blocks must be non-trivial"));
    }
    let inv = a.inverse_unimodular()?;
    let af = to_f64(a);
    let invf = to_f64(&inv);
    let [s, c, u] = dims;
    let eu = dominant_subspace(&af, u);
    let es = dominant_subspace(&invf, s);
    let ec = intersect(&dominant_subspace(&af, c + u), &dominant_subspace(&invf, s + c), c);
    let (lambda_s, mu_s) = extremal_gains(&af, &es);
    let (lambda_u, mu_u) = extremal_gains(&af, &eu);
    let (lambda_c, mu_c) = if c > 0 {
        let (l, m) = extremal_gains(&af, &ec);
        (Some(l), Some(m))
    } else {
        (None, None)
    };
    let chain = match (lambda_c, mu_c) {
        (Some(lc), Some(mc)) => mu_s < lc && mc < lambda_u,
        _ => mu_s < lambda_u,
    };
    let pass = chain && mu_s < m_f && lambda_u > norm_df;
    Ok(StarReport {
        dims,
        lambda_s,
        mu_s,
        lambda_c,
        mu_c,
        lambda_u,
        mu_u,
        m_f,
        norm_df,
        chain,
        pass,
    })
}

/// Sampled conorm `m(f)` and norm `|Df|` of the base map on `T^4` (flat
/// metric): extremes over `samples` quasi-random points together with the
/// linear-zone block. These are sample extrema, not certified bounds.
pub fn base_rate_extrema(params: &PerturbedMapParams, samples: usize) -> (f64, f64) {
    let mut h = Halton::new(4, 0);
    let mut x = [0.0; 4];
    let lin = params.linear_block();
    let lin = nalgebra::Matrix2::new(lin[0][0], lin[0][1], lin[1][0], lin[1][1]).singular_values();
    let (mut lo, mut hi) = (lin.min(), lin.max());
    for _ in 0..samples {
        h.fill(&mut x);
        let sv = perturbed_diff(params, &Torus4Point(x)).singular_values();
        lo = lo.min(sv.min());
        hi = hi.max(sv.max());
    }
    (lo, hi)
}

/// Deterministic sample of unit-scale tangent vectors on `X`: 40% over
/// quasi-random torus points, 60% in psi charts (a third of those on the
/// exceptional lines, the rest at log-uniform heights up to the handoff).
pub fn pinching_samples(atlas: &Atlas, spec: &MetricSpec, count: usize, seed: u64) -> Vec<TangentVec> {
    let mut h = Halton::new(8, splitmix64(seed) % (1 << 20));
    let mut buf = [0.0; 8];
    let lo = libm::log(spec.v1_radius * 1e-3);
    let hi = libm::log(0.999 * handoff_height(atlas));
    let mut out = Vec::with_capacity(count);
    let mut i = 0usize;
    while out.len() < count {
        h.fill(&mut buf);
        let slot = i % 5;
        i += 1;
        let base = if slot < 2 {
            match atlas.sigma_project(&Torus4Point::new([buf[0], buf[1], buf[2], buf[3]])) {
                Ok(p) => p,
                Err(_) => continue,
            }
        } else {
            let tau = 2.0 * core::f64::consts::PI;
            let v = Complex64::from_polar(libm::sqrt(buf[0]), tau * buf[1]);
            let w = if slot == 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(libm::exp(lo + buf[2] * (hi - lo)), tau * buf[3])
            };
            let p = (i % 16) as u8;
            let chart = if i % 2 == 0 { ChartId::Psi1(p) } else { ChartId::Psi2(p) };
            KummerPoint::psi(chart, v, w)
        };
        let comp = [buf[4] - 0.5, buf[5] - 0.5, buf[6] - 0.5, buf[7] - 0.5];
        if comp.iter().all(|c| *c == 0.0) {
            continue;
        }
        out.push(TangentVec { base, components: comp });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Offender {
    pub ratio: f64,
    pub from: RegionTag,
    pub to: RegionTag,
    pub base: KummerPoint,
    /// `max(log(ratio / lambda^2), log(lambda^-2 / ratio))`; positive means
    /// outside the pinching interval.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinchingReport {
    pub d: u32,
    pub horizon: usize,
    pub samples: usize,
    pub inside: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Up to five samples closest to (or beyond) the bounds, worst first.
    pub worst: Vec<Offender>,
}

const KEEP_WORST: usize = 5;

impl PinchingReport {
    fn empty(d: u32, horizon: usize) -> Self {
        Self {
            d,
            horizon,
            samples: 0,
            inside: 0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
            worst: Vec::new(),
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.inside as f64 / self.samples as f64
        }
    }

    pub fn pass(&self) -> bool {
        self.samples > 0 && self.inside == self.samples
    }

    /// Associative merge of two partial reports over disjoint sample sets.
    pub fn merge(mut self, other: PinchingReport) -> PinchingReport {
        self.samples += other.samples;
        self.inside += other.inside;
        self.min_ratio = self.min_ratio.min(other.min_ratio);
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.worst.extend(other.worst);
        self.worst.sort_by(|a, b| b.excess.partial_cmp(&a.excess).unwrap_or(core::cmp::Ordering::Equal));
        self.worst.truncate(KEEP_WORST);
        self
    }
}

/// Fraction of samples whose adapted one-step ratio lies strictly inside
/// `(lambda^-2, lambda^2)`.
pub fn pinching_check(
    spec: &MetricSpec,
    atlas: &Atlas,
    horizon: usize,
    samples: &[TangentVec],
) -> Result<PinchingReport, HypError> {
    let l2 = spec.lambda * spec.lambda;
    let mut report = PinchingReport::empty(spec.d, horizon);
    for vec in samples {
        let r = adapted_ratio(spec, atlas, vec, horizon)?;
        report.samples += 1;
        if r.ratio > 1.0 / l2 && r.ratio < l2 {
            report.inside += 1;
        }
        report.min_ratio = report.min_ratio.min(r.ratio);
        report.max_ratio = report.max_ratio.max(r.ratio);
        let excess = f64::max(libm::log(r.ratio / l2), libm::log(1.0 / (l2 * r.ratio)));
        report = report.merge(PinchingReport {
            worst: vec![Offender { ratio: r.ratio, from: r.from, to: r.to, base: vec.base, excess }],
            ..PinchingReport::empty(spec.d, horizon)
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinchingSearch {
    /// Every `(d, N)` tried, in search order.
    pub tried: Vec<PinchingReport>,
    /// The first passing `(d, N)` in lexicographic order.
    pub first_pass: Option<(u32, usize)>,
}

/// Searches `d = 1..=d_max`, then `N = 1..=n_max`, for a configuration in
/// which every sample is pinched; stops at the first pass.
pub fn pinching_search(
    make_params: impl Fn(u32) -> Result<PerturbedMapParams, crate::dyncore::DynError>,
    d_max: u32,
    n_max: usize,
    sample_count: usize,
    seed: u64,
) -> Result<PinchingSearch, HypError> {
    let mut tried = Vec::new();
    for d in 1..=d_max {
        let params = make_params(d).map_err(|_| HypError::InvalidInput("invalid map parameters"))?;
        let atlas = Atlas::new(params).map_err(|_| HypError::InvalidInput("atlas unavailable"))?;
        let spec = MetricSpec::for_atlas(&atlas)?;
        let samples = pinching_samples(&atlas, &spec, sample_count, seed);
        for n in 1..=n_max {
            let report = pinching_check(&spec, &atlas, n, &samples)?;
            let pass = report.pass();
            tried.push(report);
            if pass {
                return Ok(PinchingSearch { tried, first_pass: Some((d, n)) });
            }
        }
    }
    Ok(PinchingSearch { tried, first_pass: None })
}
