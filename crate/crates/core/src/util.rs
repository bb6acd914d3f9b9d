//! Small numerical helpers shared across modules: circle arithmetic,
//! a C-infinity transition function, Gauss-Legendre panels and a Halton
//! low-discrepancy sequence.

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - libm::floor(x);
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduces `x` into `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    wrap01(x + 0.5) - 0.5
}

/// Distance on the circle `R/Z`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    libm::fabs(wrap_centered(a - b))
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
#[inline]
fn flat_bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / t)
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, and `S(t) + S(1-t) = 1`.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = flat_bump(t);
    let b = flat_bump(1.0 - t);
    a / (a + b)
}

const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in GL10_NODES.iter().zip(GL10_WEIGHTS.iter()) {
            acc += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += acc * half;
    }
    total
}

/// `int_0^u smooth_step(t) dt` for `u` in `[0, 1]`; exactly `1/2` at `u = 1`.
pub fn smooth_step_integral(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 0.5;
    }
    // S(t) + S(1-t) = 1 folds the upper half onto the lower one.
    if u > 0.5 {
        let tail = smooth_step_integral(1.0 - u);
        return 0.5 - (1.0 - u) + tail;
    }
    let panels = 1 + (u / 0.0625) as usize;
    gauss_legendre(smooth_step, 0.0, u, panels)
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    out
}

/// Deterministic Halton sequence in up to 32 dimensions.
///
/// `offset` selects the starting index so that independent streams can be
/// carved out of the same sequence.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, offset: u64) -> Self {
        assert!(dim >= 1 && dim <= PRIMES.len(), "Halton dimension out of range");
        Self { dim, index: offset + 1 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the next point into `out[..dim]`.
    pub fn fill(&mut self, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().take(self.dim).enumerate() {
            *slot = radical_inverse(self.index, PRIMES[j]);
        }
        self.index += 1;
    }
}

/// Splitmix64 step, used to turn a seed into a Halton offset.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
