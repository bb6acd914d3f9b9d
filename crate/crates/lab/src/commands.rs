//! The experiments behind each subcommand. Every function takes fully
//! resolved settings and returns a [`Report`]; nothing here touches the
//! filesystem.

use num_complex::Complex64;
use phk_core::bundlealg::{amap_exists, kummer_induced_action, simply_connected, IntMat};
use phk_core::dyncore::{
    perturbed_apply, perturbed_inverse, BumpProfile, Mat2Int, PerturbedMapParams, Torus4Point,
    DEFAULT_DELTA,
};
use phk_core::hyperbolic::{
    base_rate_extrema, lyapunov_spectrum, pinching_check, pinching_samples, verify_star,
    LyapunovOptions, LyapunovReport, PinchingReport, PinchingSearch, TorusMap,
};
use phk_core::kummer::{Atlas, ChartId, KummerPoint, TangentVec};
use phk_core::metric::{cstar_ratio, k_norm, q_factor, region_classify, MetricSpec};
use phk_core::skewprod::{
    birkhoff_character, default_omega, fiber_automorphism, rotate, skew_lyapunov, SkewParams,
    SkewPoint, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::RunError;
use crate::formats::{write_ergodicity_csv, write_lyapunov_csv, write_table, BundleFile};

/// `ln(9 + 4 sqrt 5)`.
pub const LN_LAMBDA: f64 = 2.887_270_927_429_206_5;

/// Samples per parallel work unit. Fixed, so results do not depend on the
/// number of threads.
pub const CHUNK: usize = 500;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<String>,
    pub pass: bool,
    /// `(file name, contents)` to be written into the output directory.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push(format!("{name}: {} ({detail})", if ok { "pass" } else { "FAIL" }));
        self.pass &= ok;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSettings {
    pub epsilon: f64,
    pub d: u32,
    pub direction: (i64, i64),
}

impl MapSettings {
    pub fn params(&self) -> Result<PerturbedMapParams, RunError> {
        let bump = BumpProfile::smooth(self.epsilon, self.d, DEFAULT_DELTA).map_err(RunError::config)?;
        PerturbedMapParams::new(Mat2Int::B13_8, bump, self.direction).map_err(RunError::config)
    }
}

/// Independent random stream `stream` of the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn random_torus_point(r: &mut ChaCha8Rng) -> [f64; 4] {
    [r.gen(), r.gen(), r.gen(), r.gen()]
}

pub fn parse_direction(s: &str) -> Result<(i64, i64), RunError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(RunError::Config(format!("direction `{s}` must be `a,b`")));
    }
    let p = |t: &str| t.parse::<i64>().map_err(|_| RunError::Config(format!("direction `{s}` must be integers")));
    Ok((p(parts[0])?, p(parts[1])?))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------- bundle

#[derive(Clone, Debug, PartialEq)]
pub struct BundleSettings {
    pub a: IntMat,
    pub k: usize,
    pub m: usize,
    pub clutching: Option<IntMat>,
}

/// Resolves a named fibre automorphism: `B2` is `diag(B^2, I_{k-2})`.
pub fn named_matrix(name: &str, k: usize) -> Result<IntMat, RunError> {
    match name {
        "B2" => Ok(fiber_automorphism(k, &Mat2Int::B13_8)),
        "I" => Ok(IntMat::identity(k)),
        other => Err(RunError::Config(format!("unknown matrix name `{other}` (expected B2, I or rows)"))),
    }
}

pub fn bundle(s: &BundleSettings) -> Result<Report, RunError> {
    if s.k < 2 || s.m < s.k || s.m > 22 {
        return Err(RunError::Config("need 2 <= k <= m <= 22".into()));
    }
    let h = match &s.clutching {
        Some(h) => h.clone(),
        None => IntMat::projection(s.k, s.m),
    };
    if h.shape() != (s.k, s.m) {
        return Err(RunError::Config(format!("clutching matrix must be {} x {}", s.k, s.m)));
    }
    if s.a.shape() != (s.k, s.k) || !s.a.is_unimodular() {
        return Err(RunError::Config(format!("A must be a unimodular {} x {} matrix", s.k, s.k)));
    }
    let f = if s.m == 22 {
        kummer_induced_action(&Mat2Int::B13_8, true).map_err(RunError::compute)?
    } else {
        fiber_automorphism(s.m, &Mat2Int::B13_8)
    };
    let amap = amap_exists(&s.a, &h, &f).map_err(RunError::compute)?;
    let sc = simply_connected(&h).map_err(RunError::compute)?;
    let mut rep = Report { pass: true, ..Default::default() };
    rep.lines.push(format!("amap_exists={amap}"));
    rep.lines.push(format!("simply_connected={sc}"));
    rep.pass = amap && sc;
    let mut buf = Vec::new();
    BundleFile::from_mat(&h).write(&mut buf)?;
    rep.files.push(("bundle.json".into(), buf));
    Ok(rep)
}

// -------------------------------------------------------------- simulate

pub fn simulate(map: &MapSettings, iters: usize, seed: u64) -> Result<Report, RunError> {
    let params = map.params()?;
    let atlas = Atlas::new(params).map_err(RunError::config)?;
    let spec = MetricSpec::for_atlas(&atlas).map_err(RunError::compute)?;
    let mut p = Torus4Point::new(random_torus_point(&mut stream_rng(seed, 0)));
    let mut rows = Vec::with_capacity(iters + 1);
    let mut worst: f64 = 0.0;
    for n in 0..=iters {
        let (chart, region) = match atlas.sigma_project(&p) {
            Ok(kp) => (chart_name(kp.chart), region_classify(&spec, &kp).as_str().to_string()),
            Err(_) => ("exceptional".to_string(), "-".to_string()),
        };
        let mut row = vec![n.to_string()];
        row.extend(p.0.iter().map(|c| c.to_string()));
        row.push(chart);
        row.push(region);
        rows.push(row);
        let q = perturbed_apply(&params, &p);
        let back = perturbed_inverse(&params, &q).map_err(RunError::compute)?;
        worst = worst.max(back.dist(&p));
        p = q;
    }
    let mut rep = Report { pass: true, ..Default::default() };
    rep.lines.push(format!("iterations={iters}"));
    rep.check("inverse round trip", worst < 1e-9, format!("max error {worst:.3e}"));
    let mut buf = Vec::new();
    write_table(&mut buf, &["n", "x1", "x2", "x3", "x4", "chart", "region"], &rows)?;
    rep.files.push(("orbit.csv".into(), buf));
    Ok(rep)
}

fn chart_name(c: ChartId) -> String {
    match c {
        ChartId::Torus => "torus".into(),
        ChartId::Psi1(i) => format!("psi1:{i}"),
        ChartId::Psi2(i) => format!("psi2:{i}"),
    }
}

// ------------------------------------------------------------- lyapunov

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSettings {
    pub map: MapSettings,
    pub iters: usize,
    pub orbits: usize,
    pub skew_k: Option<usize>,
    pub seed: u64,
}

fn expected_spectrum(skew_k: Option<usize>) -> Vec<f64> {
    let l = LN_LAMBDA;
    match skew_k {
        None => vec![l, l, -l, -l],
        Some(k) => {
            let mut v = vec![2.0 * l, l, l];
            v.extend(std::iter::repeat_n(0.0, k - 2));
            v.extend([-l, -l, -2.0 * l]);
            v
        }
    }
}

pub fn lyapunov(s: &LyapunovSettings) -> Result<Report, RunError> {
    let params = s.map.params()?;
    let min_iters = if s.skew_k.is_some() { 10_000 } else { 1000 };
    if s.iters < min_iters {
        return Err(RunError::Config(format!("iters must be at least {min_iters}")));
    }
    if s.orbits == 0 {
        return Err(RunError::Config("orbits must be positive".into()));
    }
    let skew = match s.skew_k {
        Some(k) => Some(SkewParams::with_defaults(k, params).map_err(RunError::config)?),
        None => None,
    };
    let reports: Vec<LyapunovReport> = (0..s.orbits)
        .into_par_iter()
        .map(|i| {
            let mut r = stream_rng(s.seed, i as u64);
            let x = random_torus_point(&mut r);
            match (&skew, s.skew_k) {
                (Some(p), Some(k)) => {
                    let y2 = (0..k - 2).map(|_| r.gen()).collect();
                    let pt = SkewPoint::new(x, [r.gen(), r.gen()], y2);
                    skew_lyapunov(p, &pt, s.iters).map_err(RunError::compute)
                }
                _ => lyapunov_spectrum(&TorusMap { params }, &x, s.iters, &LyapunovOptions::default())
                    .map_err(RunError::compute),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut rep = Report { pass: true, ..Default::default() };
    let expected = expected_spectrum(s.skew_k);
    for (i, r) in reports.iter().enumerate() {
        rep.lines.push(format!("orbit {i}: exponents={}", fmt_vec(&r.exponents)));
        let gap = (r.sum() - r.log_det_average).abs();
        rep.check("sum matches log-Jacobian average", gap < 1e-6, format!("|diff| = {gap:.3e}"));
        if s.map.epsilon == 0.0 {
            let tol = if s.skew_k.is_some() { 1e-2 } else { 1e-3 };
            let err = r.exponents.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rep.check("linear spectrum", err < tol, format!("max error {err:.3e}, tol {tol:e}"));
        } else if s.skew_k.is_some() {
            let two_l = 2.0 * LN_LAMBDA;
            let (top, bottom) = (r.exponents[0], r.exponents[r.exponents.len() - 1]);
            let ok = (top - two_l).abs() < 0.01 * two_l && (bottom + two_l).abs() < 0.01 * two_l;
            rep.check("fibre exponents", ok, format!("top {top:.6}, bottom {bottom:.6}"));
        }
        let mut buf = Vec::new();
        write_lyapunov_csv(&mut buf, &r.trace)?;
        let name = if s.orbits == 1 { "lyapunov.csv".to_string() } else { format!("lyapunov_{i}.csv") };
        rep.files.push((name, buf));
    }
    Ok(rep)
}

// --------------------------------------------------------- verify-metric

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSettings {
    pub map: MapSettings,
    /// `None` selects `{1.5, mu_eps, lambda}`.
    pub mu: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
}

/// Log-uniform complex number with modulus in `[lo, hi]`.
pub fn log_uniform_c(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Complex64 {
    Complex64::from_polar(lo * (hi / lo).powf(r.gen::<f64>()), std::f64::consts::TAU * r.gen::<f64>())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricErrors {
    pub q_rel: f64,
    pub cstar_min: f64,
    pub cstar_max: f64,
    pub knorm_rel: f64,
}

impl MetricErrors {
    fn merge(self, o: MetricErrors) -> MetricErrors {
        MetricErrors {
            q_rel: self.q_rel.max(o.q_rel),
            cstar_min: self.cstar_min.min(o.cstar_min),
            cstar_max: self.cstar_max.max(o.cstar_max),
            knorm_rel: self.knorm_rel.max(o.knorm_rel),
        }
    }
}

/// Q inversion, cstar range for one `mu` and k-norm chart consistency on
/// `samples` random points, in fixed chunks.
pub fn metric_errors(atlas: &Atlas, mu: f64, samples: usize, seed: u64) -> Result<MetricErrors, RunError> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<MetricErrors> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = stream_rng(seed, c as u64);
            let mut e = MetricErrors { cstar_min: f64::INFINITY, ..Default::default() };
            let count = CHUNK.min(samples - c * CHUNK);
            for _ in 0..count {
                let v = log_uniform_c(&mut r, 1e-4, 1e4);
                let lhs = q_factor(1.0 / v);
                let rhs = v.norm_sqr().powi(2) * q_factor(v);
                e.q_rel = e.q_rel.max((lhs - rhs).abs() / lhs.max(rhs));
                let (ev, _) = cstar_ratio(v, mu);
                e.cstar_min = e.cstar_min.min(ev);
                e.cstar_max = e.cstar_max.max(ev);
                let base = KummerPoint::psi(ChartId::Psi1(0), log_uniform_c(&mut r, 0.1, 10.0), Complex64::new(0.0, 0.0));
                let comps = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
                let vec = TangentVec { base, components: comps };
                let other = atlas.change_chart(&vec, ChartId::Psi2(0)).map_err(RunError::compute)?;
                let (a, b) = (k_norm(&vec), k_norm(&other));
                e.knorm_rel = e.knorm_rel.max((a - b).abs() / a);
            }
            Ok(e)
        })
        .collect::<Result<_, RunError>>()?;
    Ok(parts
        .into_iter()
        .reduce(MetricErrors::merge)
        .unwrap_or(MetricErrors { cstar_min: f64::INFINITY, ..Default::default() }))
}

pub fn verify_metric(s: &MetricSettings) -> Result<Report, RunError> {
    let atlas = Atlas::new(s.map.params()?).map_err(RunError::config)?;
    let spec = MetricSpec::for_atlas(&atlas).map_err(RunError::compute)?;
    if s.samples == 0 {
        return Err(RunError::Config("samples must be positive".into()));
    }
    let mus = s.mu.clone().unwrap_or_else(|| vec![1.5, atlas.mu_hat(), spec.lambda]);
    if mus.iter().any(|m| !(m.is_finite() && *m >= 1.0)) {
        return Err(RunError::Config("every mu must be at least 1".into()));
    }
    let mut rep = Report { pass: true, ..Default::default() };
    for (i, &mu) in mus.iter().enumerate() {
        let e = metric_errors(&atlas, mu, s.samples, s.seed.wrapping_add(i as u64))?;
        let m2 = mu * mu;
        let inside = e.cstar_min >= (1.0 - 1e-12) / m2 && e.cstar_max <= m2 * (1.0 + 1e-12);
        rep.check(
            &format!("CP1 ratio bounds mu={mu:.6}"),
            inside,
            format!("ratio in [{:.6e}, {:.6e}], bounds [{:.6e}, {:.6e}]", e.cstar_min, e.cstar_max, 1.0 / m2, m2),
        );
        rep.check("Q inversion identity", e.q_rel < 1e-12, format!("max rel error {:.3e}", e.q_rel));
        rep.check("k-norm chart consistency", e.knorm_rel < 1e-12, format!("max rel error {:.3e}", e.knorm_rel));
    }
    Ok(rep)
}

// ------------------------------------------------------------- verify-ph

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhSettings {
    pub epsilon: f64,
    pub direction: (i64, i64),
    pub d_max: u32,
    pub n_max: usize,
    pub samples: usize,
    pub k: usize,
    pub seed: u64,
}

/// [`pinching_check`] over fixed chunks, merged in order.
pub fn pinching_parallel(
    spec: &MetricSpec,
    atlas: &Atlas,
    horizon: usize,
    samples: &[TangentVec],
) -> Result<PinchingReport, RunError> {
    let parts: Vec<PinchingReport> = samples
        .par_chunks(CHUNK)
        .map(|c| pinching_check(spec, atlas, horizon, c).map_err(RunError::compute))
        .collect::<Result<_, _>>()?;
    parts
        .into_iter()
        .reduce(PinchingReport::merge)
        .ok_or_else(|| RunError::Config("samples must be positive".into()))
}

/// Lexicographic search over `d`, then `N`, stopping at the first pass.
pub fn pinching_search_parallel(s: &PhSettings) -> Result<PinchingSearch, RunError> {
    let mut tried = Vec::new();
    for d in 1..=s.d_max {
        let map = MapSettings { epsilon: s.epsilon, d, direction: s.direction };
        let atlas = Atlas::new(map.params()?).map_err(RunError::config)?;
        let spec = MetricSpec::for_atlas(&atlas).map_err(RunError::compute)?;
        let samples = pinching_samples(&atlas, &spec, s.samples, s.seed);
        for n in 1..=s.n_max {
            let report = pinching_parallel(&spec, &atlas, n, &samples)?;
            let pass = report.pass();
            tried.push(report);
            if pass {
                return Ok(PinchingSearch { tried, first_pass: Some((d, n)) });
            }
        }
    }
    Ok(PinchingSearch { tried, first_pass: None })
}

pub fn offender_lines(report: &PinchingReport) -> Vec<String> {
    report
        .worst
        .iter()
        .map(|o| {
            format!(
                "  offender ratio={:.6e} {}->{} chart={} coords={}",
                o.ratio,
                o.from.as_str(),
                o.to.as_str(),
                chart_name(o.base.chart),
                fmt_vec(&o.base.coords)
            )
        })
        .collect()
}

pub fn verify_ph(s: &PhSettings) -> Result<Report, RunError> {
    if s.d_max == 0 || s.n_max == 0 || s.samples == 0 {
        return Err(RunError::Config("d_max, n_max and samples must be positive".into()));
    }
    if !(2..=22).contains(&s.k) {
        return Err(RunError::Config("k must lie in [2, 22]".into()));
    }
    let search = pinching_search_parallel(s)?;
    let mut rep = Report { pass: true, ..Default::default() };
    let rows: Vec<Vec<String>> = search
        .tried
        .iter()
        .map(|t| {
            vec![
                t.d.to_string(),
                t.horizon.to_string(),
                t.samples.to_string(),
                t.inside.to_string(),
                t.fraction().to_string(),
                t.min_ratio.to_string(),
                t.max_ratio.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    write_table(&mut buf, &["d", "horizon", "samples", "inside", "fraction", "min_ratio", "max_ratio"], &rows)?;
    rep.files.push(("pinching.csv".into(), buf));
    let d_used = match search.first_pass {
        Some((d, n)) => {
            rep.check("adapted pinching", true, format!("first pass at d={d}, N={n}"));
            d
        }
        None => {
            let last = search.tried.last().expect("at least one configuration");
            rep.check(
                "adapted pinching",
                false,
                format!("no pass for d<={}, N<={}; last fraction {:.6}", s.d_max, s.n_max, last.fraction()),
            );
            rep.lines.extend(offender_lines(last));
            1
        }
    };
    let params = MapSettings { epsilon: s.epsilon, d: d_used, direction: s.direction }.params()?;
    let (m_f, norm_df) = base_rate_extrema(&params, 10_000);
    let a = fiber_automorphism(s.k, &Mat2Int::B13_8);
    let star = verify_star(&a, [1, s.k - 2, 1], m_f, norm_df).map_err(RunError::compute)?;
    rep.check(
        "fibre domination",
        star.pass,
        format!(
            "mu_s={:.6e} < m(f)={:.6}, lambda_u={:.6} > |Df|={:.6}",
            star.mu_s, star.m_f, star.lambda_u, star.norm_df
        ),
    );
    Ok(rep)
}

// ------------------------------------------------------------ ergodicity

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicitySettings {
    pub map: MapSettings,
    pub k: usize,
    /// Translation vector; the built-in default when `None`.
    pub omega: Option<Vec<f64>>,
    pub characters: Option<Vec<Vec<i64>>>,
    pub iters: usize,
    pub seed: u64,
}

/// Five nonzero characters of `Z^n`.
pub fn default_characters(n: usize) -> Vec<Vec<i64>> {
    if n == 1 {
        return (1..=5).map(|j| vec![j]).collect();
    }
    [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1]]
        .iter()
        .map(|c| {
            let mut v = vec![0; n];
            v[0] = c[0];
            v[1] = c[1];
            v
        })
        .collect()
}

pub fn ergodicity(s: &ErgodicitySettings) -> Result<Report, RunError> {
    if !(3..=22).contains(&s.k) {
        return Err(RunError::Config("ergodicity needs k in [3, 22]".into()));
    }
    if s.iters < 10_000 {
        return Err(RunError::Config("iters must be at least 10000".into()));
    }
    let n2 = s.k - 2;
    let mut params = SkewParams::with_defaults(s.k, s.map.params()?).map_err(RunError::config)?;
    if let Some(w) = &s.omega {
        if w.len() != n2 {
            return Err(RunError::Config(format!("omega must have {n2} components")));
        }
        let shift: Vec<f64> = w.iter().zip(default_omega(n2)).map(|(a, b)| a - b).collect();
        params = rotate(&params, &shift).map_err(RunError::config)?;
    }
    let chars = s.characters.clone().unwrap_or_else(|| default_characters(n2));
    if chars.is_empty() || chars.iter().any(|c| c.len() != n2) {
        return Err(RunError::Config(format!("characters must be nonempty vectors of length {n2}")));
    }
    let mut r = stream_rng(s.seed, 0);
    let x = random_torus_point(&mut r);
    let y1 = [r.gen(), r.gen()];
    let y2 = (0..n2).map(|_| r.gen()).collect();
    let pt = SkewPoint::new(x, y1, y2);
    let reports: Vec<_> = chars
        .par_iter()
        .map(|m| birkhoff_character(&params, m, &pt, s.iters).map_err(RunError::compute))
        .collect::<Result<_, _>>()?;
    let mut rep = Report { pass: true, ..Default::default() };
    if let Some(first) = reports.first() {
        rep.lines.push(format!("integral of beta + omega = {}", fmt_vec(&first.beta_integral)));
    }
    for (i, e) in reports.iter().enumerate() {
        let a = e.final_average();
        rep.check(
            &format!("character {:?}", e.character),
            e.verdict == Verdict::Decaying,
            format!("|avg({})| = {:.3e}, verdict {}", s.iters, a.norm(), e.verdict.as_str()),
        );
        let mut buf = Vec::new();
        write_ergodicity_csv(&mut buf, &e.averages)?;
        rep.files.push((format!("ergodicity_{i}.csv"), buf));
    }
    Ok(rep)
}
