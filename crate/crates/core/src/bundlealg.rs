//! Exact integer algebra of principal `T^k`-bundles over simply connected
//! bases: cocycles on a finite nerve, the action of `GL(k, Z)` on bundle
//! data, pullbacks along maps of the base, the A-map criterion `A H = H F`
//! on second homology, and surjectivity of `H` via Smith normal form.
//!
//! All matrices act on the left on column vectors of `H_2`; cohomological
//! statements are the transposes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_integer::Integer;
use num_rational::Ratio;

use crate::dyncore::Mat2Int;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BundleError {
    Shape { expected: (usize, usize), found: (usize, usize) },
    NotSquare,
    NotUnimodular,
    Overflow,
    MalformedNerve(&'static str),
    /// `B` moves some half-lattice point although it was declared fixed.
    MovesExceptionalSet,
}

impl fmt::Display for BundleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BundleError::Shape { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            BundleError::NotSquare => write!(f, "matrix is not square"),
            BundleError::NotUnimodular => write!(f, "matrix is not invertible over Z"),
            BundleError::Overflow => write!(f, "integer overflow"),
            BundleError::MalformedNerve(why) => write!(f, "malformed nerve: {why}"),
            BundleError::MovesExceptionalSet => {
                write!(f, "matrix does not fix the 16 half-lattice points")
            }
        }
    }
}

impl core::error::Error for BundleError {}

/// Dense integer matrix, row major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMat {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self, BundleError> {
        if data.len() != rows * cols {
            return Err(BundleError::Shape { expected: (rows, cols), found: (data.len(), 1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, BundleError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(BundleError::Shape { expected: (r, c), found: (r, row.len()) });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_mat2(m: &Mat2Int) -> Self {
        Self { rows: 2, cols: 2, data: vec![m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: i64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMat) -> Result<IntMat, BundleError> {
        if self.cols != other.rows {
            return Err(BundleError::Shape {
                expected: (self.cols, other.cols),
                found: (other.rows, other.cols),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc: i128 = 0;
                for l in 0..self.cols {
                    acc += self.get(i, l) as i128 * other.get(l, j) as i128;
                }
                out.data[i * other.cols + j] =
                    i64::try_from(acc).map_err(|_| BundleError::Overflow)?;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &IntMat) -> Result<IntMat, BundleError> {
        if self.shape() != other.shape() {
            return Err(BundleError::Shape { expected: self.shape(), found: other.shape() });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.checked_add(*b).ok_or(BundleError::Overflow))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: i64) -> Result<IntMat, BundleError> {
        let data = self
            .data
            .iter()
            .map(|a| a.checked_mul(s).ok_or(BundleError::Overflow))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// Block-diagonal matrix with the given square or rectangular blocks.
    pub fn block_diag(blocks: &[&IntMat]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.set(r0 + i, c0 + j, b.get(i, j));
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &IntMat) -> Result<IntMat, BundleError> {
        if self.rows != other.rows {
            return Err(BundleError::Shape { expected: (self.rows, other.cols), found: other.shape() });
        }
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j));
            }
        }
        Ok(out)
    }

    /// `[I_k | 0]`, the projection `Z^m -> Z^k` onto the first summand.
    pub fn projection(k: usize, m: usize) -> Self {
        let mut out = Self::zeros(k, m);
        for i in 0..k.min(m) {
            out.set(i, i, 1);
        }
        out
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Result<i64, BundleError> {
        if self.rows != self.cols {
            return Err(BundleError::NotSquare);
        }
        let n = self.rows;
        if n == 0 {
            return Ok(1);
        }
        let mut a: Vec<i128> = self.data.iter().map(|&x| x as i128).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k * n + k] == 0 {
                let Some(swap) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                    return Ok(0);
                };
                for j in 0..n {
                    a.swap(k * n + j, swap * n + j);
                }
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = a[i * n + j]
                        .checked_mul(pivot)
                        .and_then(|x| x.checked_sub(a[i * n + k].checked_mul(a[k * n + j])?))
                        .ok_or(BundleError::Overflow)?;
                    a[i * n + j] = v / prev;
                }
                a[i * n + k] = 0;
            }
            prev = pivot;
        }
        i64::try_from(sign * a[n * n - 1]).map_err(|_| BundleError::Overflow)
    }

    pub fn is_unimodular(&self) -> bool {
        matches!(self.det(), Ok(1) | Ok(-1))
    }

    /// Exact inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Result<IntMat, BundleError> {
        if !self.is_unimodular() {
            return Err(BundleError::NotUnimodular);
        }
        let n = self.rows;
        let mut a: Vec<Ratio<i128>> = self.data.iter().map(|&x| Ratio::from_integer(x as i128)).collect();
        let mut inv: Vec<Ratio<i128>> = IntMat::identity(n)
            .data
            .iter()
            .map(|&x| Ratio::from_integer(x as i128))
            .collect();
        for k in 0..n {
            let piv = (k..n)
                .find(|&r| a[r * n + k] != Ratio::from_integer(0))
                .ok_or(BundleError::NotUnimodular)?;
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
                inv.swap(k * n + j, piv * n + j);
            }
            let p = a[k * n + k];
            for j in 0..n {
                a[k * n + j] /= p;
                inv[k * n + j] /= p;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[i * n + k];
                if f == Ratio::from_integer(0) {
                    continue;
                }
                for j in 0..n {
                    let (akj, ikj) = (a[k * n + j], inv[k * n + j]);
                    a[i * n + j] -= f * akj;
                    inv[i * n + j] -= f * ikj;
                }
            }
        }
        let data = inv
            .iter()
            .map(|r| {
                if r.is_integer() {
                    i64::try_from(r.to_integer()).map_err(|_| BundleError::Overflow)
                } else {
                    Err(BundleError::NotUnimodular)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(IntMat { rows: n, cols: n, data })
    }

    /// Invariant factors `d_1 | d_2 | ...` of the Smith normal form, one per
    /// row/column up to `min(rows, cols)`; zero factors included.
    pub fn smith_invariants(&self) -> Result<Vec<i64>, BundleError> {
        let (r, c) = (self.rows, self.cols);
        let mut a: Vec<i128> = self.data.iter().map(|&x| x as i128).collect();
        let at = |a: &Vec<i128>, i: usize, j: usize| a[i * c + j];
        let mut out = Vec::with_capacity(r.min(c));
        for t in 0..r.min(c) {
            // smallest non-zero entry of the trailing block as pivot
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    let v = at(&a, i, j);
                    if v != 0 && best.is_none_or(|(bi, bj)| v.abs() < at(&a, bi, bj).abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                out.extend(core::iter::repeat_n(0, r.min(c) - t));
                break;
            };
            swap_rows(&mut a, c, t, pi);
            swap_cols(&mut a, c, t, pj);
            loop {
                let p = at(&a, t, t);
                let mut dirty = false;
                for i in t + 1..r {
                    let q = Integer::div_floor(&at(&a, i, t), &p);
                    if q != 0 {
                        for j in t..c {
                            let v = at(&a, t, j).checked_mul(q).ok_or(BundleError::Overflow)?;
                            a[i * c + j] -= v;
                        }
                    }
                    if at(&a, i, t) != 0 {
                        dirty = true;
                    }
                }
                for j in t + 1..c {
                    let q = Integer::div_floor(&at(&a, t, j), &p);
                    if q != 0 {
                        for i in t..r {
                            let v = at(&a, i, t).checked_mul(q).ok_or(BundleError::Overflow)?;
                            a[i * c + j] -= v;
                        }
                    }
                    if at(&a, t, j) != 0 {
                        dirty = true;
                    }
                }
                if !dirty {
                    // pivot must divide the whole trailing block
                    let mut fix = None;
                    'scan: for i in t + 1..r {
                        for j in t + 1..c {
                            if at(&a, i, j) % p != 0 {
                                fix = Some(i);
                                break 'scan;
                            }
                        }
                    }
                    match fix {
                        None => break,
                        Some(i) => {
                            for j in t..c {
                                let v = at(&a, i, j);
                                a[t * c + j] += v;
                            }
                            continue;
                        }
                    }
                }
                // move the smallest entry of row/column t into the pivot
                let mut best = (t, t);
                for i in t..r {
                    let v = at(&a, i, t);
                    if v != 0 && v.abs() < at(&a, best.0, best.1).abs() {
                        best = (i, t);
                    }
                }
                for j in t..c {
                    let v = at(&a, t, j);
                    if v != 0 && v.abs() < at(&a, best.0, best.1).abs() {
                        best = (t, j);
                    }
                }
                swap_rows(&mut a, c, t, best.0);
                swap_cols(&mut a, c, t, best.1);
            }
            out.push(i64::try_from(at(&a, t, t).abs()).map_err(|_| BundleError::Overflow)?);
        }
        Ok(out)
    }
}

fn swap_rows(a: &mut [i128], c: usize, i: usize, k: usize) {
    if i != k {
        for j in 0..c {
            a.swap(i * c + j, k * c + j);
        }
    }
}

fn swap_cols(a: &mut [i128], c: usize, j: usize, k: usize) {
    if j != k {
        let r = a.len() / c;
        for i in 0..r {
            a.swap(i * c + j, i * c + k);
        }
    }
}

/// One oriented edge of the nerve with its transition datum: a winding
/// vector in `Z^k` and a constant in `(Q/Z)^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub winding: Vec<i64>,
    pub constant: Vec<Ratio<i64>>,
}

impl Edge {
    pub fn new(from: usize, to: usize, winding: Vec<i64>, constant: Vec<Ratio<i64>>) -> Self {
        let constant = constant.into_iter().map(frac).collect();
        Self { from, to, winding, constant }
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(r: Ratio<i64>) -> Ratio<i64> {
    r - r.floor()
}

/// Transition data of a `T^k`-bundle on a finite nerve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CocycleData {
    pub k: usize,
    pub vertices: usize,
    pub edges: Vec<Edge>,
    pub triangles: Vec<[usize; 3]>,
}

impl CocycleData {
    /// The datum on the edge `a -> b`, negated if stored as `b -> a`.
    fn value(&self, a: usize, b: usize) -> Result<(Vec<i64>, Vec<Ratio<i64>>), BundleError> {
        for e in &self.edges {
            if e.from == a && e.to == b {
                return Ok((e.winding.clone(), e.constant.clone()));
            }
            if e.from == b && e.to == a {
                return Ok((
                    e.winding.iter().map(|x| -x).collect(),
                    e.constant.iter().map(|x| frac(-x)).collect(),
                ));
            }
        }
        Err(BundleError::MalformedNerve("triangle side is not an edge"))
    }

    fn validate(&self) -> Result<(), BundleError> {
        for e in &self.edges {
            if e.from >= self.vertices || e.to >= self.vertices {
                return Err(BundleError::MalformedNerve("edge endpoint out of range"));
            }
            if e.from == e.to {
                return Err(BundleError::MalformedNerve("loop edge"));
            }
            if e.winding.len() != self.k || e.constant.len() != self.k {
                return Err(BundleError::MalformedNerve("edge datum has wrong rank"));
            }
        }
        for t in &self.triangles {
            if t.iter().any(|&v| v >= self.vertices) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(BundleError::MalformedNerve("degenerate triangle"));
            }
        }
        Ok(())
    }

    /// Subdivides edge `index` by a new vertex `m`: `a -> m` carries the old
    /// datum, `m -> b` zero, and each triangle `(a, b, c)` splits in two.
    pub fn refine_edge(&self, index: usize) -> Result<CocycleData, BundleError> {
        self.validate()?;
        let old = self.edges.get(index).ok_or(BundleError::MalformedNerve("no such edge"))?;
        let (a, b) = (old.from, old.to);
        let m = self.vertices;
        let zero_c = vec![Ratio::from_integer(0); self.k];
        let mut edges: Vec<Edge> = self.edges.iter().enumerate().filter(|(i, _)| *i != index).map(|(_, e)| e.clone()).collect();
        edges.push(Edge::new(a, m, old.winding.clone(), old.constant.clone()));
        edges.push(Edge::new(m, b, vec![0; self.k], zero_c));
        let mut triangles = Vec::new();
        for t in &self.triangles {
            let has_a = t.contains(&a);
            let has_b = t.contains(&b);
            if has_a && has_b {
                let c = *t.iter().find(|&&v| v != a && v != b).unwrap_or(&a);
                // m -> c equals b -> c
                let (w, k) = self.value(b, c)?;
                if !edges.iter().any(|e| (e.from == m && e.to == c) || (e.from == c && e.to == m)) {
                    edges.push(Edge::new(m, c, w, k));
                }
                triangles.push([a, m, c]);
                triangles.push([m, b, c]);
            } else {
                triangles.push(*t);
            }
        }
        Ok(CocycleData { k: self.k, vertices: m + 1, edges, triangles })
    }
}

/// Whether every triangle closes in `Z^k` and in `(Q/Z)^k`.
pub fn cocycle_check(c: &CocycleData) -> Result<bool, BundleError> {
    c.validate()?;
    for t in &c.triangles {
        let (w1, k1) = c.value(t[0], t[1])?;
        let (w2, k2) = c.value(t[1], t[2])?;
        let (w3, k3) = c.value(t[2], t[0])?;
        for i in 0..c.k {
            if w1[i] + w2[i] + w3[i] != 0 {
                return Ok(false);
            }
            if *frac(k1[i] + k2[i] + k3[i]).numer() != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Clutching exponents of a `T^k`-bundle over a wedge of `m` two-spheres:
/// column `j` lists the winding exponents of the gluing map over sphere `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClutchingData {
    pub exponents: IntMat,
}

impl ClutchingData {
    pub fn new(exponents: IntMat) -> Self {
        Self { exponents }
    }

    pub fn k(&self) -> usize {
        self.exponents.rows()
    }

    pub fn m(&self) -> usize {
        self.exponents.cols()
    }
}

/// A bundle over a simply connected base, recorded by its Chern classes
/// (`k x m`, one row per circle factor).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleClass {
    pub chern: IntMat,
}

/// Post-composition of all transition functions with `A in GL(k, Z)`.
pub trait ApplyAut: Sized {
    fn apply_aut(&self, a: &IntMat) -> Result<Self, BundleError>;
}

/// Pullback along a map of the base acting on `H_2` by `g_star`.
pub trait Pullback: Sized {
    fn pullback(&self, g_star: &IntMat) -> Result<Self, BundleError>;
}

fn check_aut(a: &IntMat, k: usize) -> Result<(), BundleError> {
    if a.shape() != (k, k) {
        return Err(BundleError::Shape { expected: (k, k), found: a.shape() });
    }
    if !a.is_unimodular() {
        return Err(BundleError::NotUnimodular);
    }
    Ok(())
}

impl ApplyAut for CocycleData {
    fn apply_aut(&self, a: &IntMat) -> Result<Self, BundleError> {
        check_aut(a, self.k)?;
        let mut out = self.clone();
        for e in &mut out.edges {
            let mut w = vec![0i64; self.k];
            let mut c = vec![Ratio::from_integer(0); self.k];
            for i in 0..self.k {
                for j in 0..self.k {
                    let aij = a.get(i, j);
                    w[i] = w[i]
                        .checked_add(aij.checked_mul(e.winding[j]).ok_or(BundleError::Overflow)?)
                        .ok_or(BundleError::Overflow)?;
                    c[i] = frac(c[i] + e.constant[j] * aij);
                }
            }
            e.winding = w;
            e.constant = c;
        }
        Ok(out)
    }
}

impl ApplyAut for ClutchingData {
    fn apply_aut(&self, a: &IntMat) -> Result<Self, BundleError> {
        check_aut(a, self.k())?;
        Ok(ClutchingData { exponents: a.mul(&self.exponents)? })
    }
}

impl ApplyAut for BundleClass {
    fn apply_aut(&self, a: &IntMat) -> Result<Self, BundleError> {
        check_aut(a, self.chern.rows())?;
        Ok(BundleClass { chern: a.mul(&self.chern)? })
    }
}

fn check_base(g: &IntMat, m: usize) -> Result<(), BundleError> {
    if g.shape() != (m, m) {
        return Err(BundleError::Shape { expected: (m, m), found: g.shape() });
    }
    Ok(())
}

impl Pullback for ClutchingData {
    fn pullback(&self, g_star: &IntMat) -> Result<Self, BundleError> {
        check_base(g_star, self.m())?;
        Ok(ClutchingData { exponents: self.exponents.mul(g_star)? })
    }
}

impl Pullback for BundleClass {
    fn pullback(&self, g_star: &IntMat) -> Result<Self, BundleError> {
        check_base(g_star, self.chern.cols())?;
        Ok(BundleClass { chern: self.chern.mul(g_star)? })
    }
}

pub fn apply_aut<T: ApplyAut>(a: &IntMat, x: &T) -> Result<T, BundleError> {
    x.apply_aut(a)
}

pub fn pullback_class<T: Pullback>(x: &T, g_star: &IntMat) -> Result<T, BundleError> {
    x.pullback(g_star)
}

/// An A-map over `f` exists iff `A H = H F` (`A: k x k`, `H: k x m`, `F: m x m`).
pub fn amap_exists(a: &IntMat, h: &IntMat, f: &IntMat) -> Result<bool, BundleError> {
    let (k, m) = h.shape();
    check_aut(a, k)?;
    check_base(f, m)?;
    Ok(a.mul(h)? == h.mul(f)?)
}

/// Whether `H: Z^m -> Z^k` is onto, i.e. all `k` invariant factors are 1.
pub fn simply_connected(h: &IntMat) -> Result<bool, BundleError> {
    let (k, m) = h.shape();
    if k > m {
        return Ok(false);
    }
    Ok(h.smith_invariants()?.iter().all(|&d| d == 1))
}

/// Permutation of the 16 half-lattice points of `T^4` under `B (+) B`, as a
/// permutation matrix (column `i` has its 1 in the row of the image of `i`).
pub fn half_lattice_permutation(b: &Mat2Int) -> IntMat {
    let m = &b.0;
    let mut s = IntMat::zeros(16, 16);
    for i in 0..16usize {
        let bit = |j: usize| ((i >> j) & 1) as i64;
        let (x1, y1, x2, y2) = (bit(0), bit(1), bit(2), bit(3));
        let img = |x: i64, y: i64| {
            (
                (m[0][0] * x + m[0][1] * y).rem_euclid(2),
                (m[1][0] * x + m[1][1] * y).rem_euclid(2),
            )
        };
        let (u1, v1) = img(x1, y1);
        let (u2, v2) = img(x2, y2);
        let j = (u1 | v1 << 1 | u2 << 2 | v2 << 3) as usize;
        s.set(j, i, 1);
    }
    s
}

/// The action on `H_2` of the Kummer surface of the map induced by `B`:
/// `diag(B^2, I_4, S_16)` in the basis that makes it block diagonal.
pub fn kummer_induced_action(b: &Mat2Int, fixes_exceptional: bool) -> Result<IntMat, BundleError> {
    if b.det() != 1 {
        return Err(BundleError::NotUnimodular);
    }
    let s16 = half_lattice_permutation(b);
    if fixes_exceptional && s16 != IntMat::identity(16) {
        return Err(BundleError::MovesExceptionalSet);
    }
    let b2 = IntMat::from_mat2(&b.square());
    Ok(IntMat::block_diag(&[&b2, &IntMat::identity(4), &s16]))
}

/// `A(E)` and the pullback `g^* E` agree as clutching data.
pub fn commutation_check(a: &IntMat, m: &ClutchingData, g: &IntMat) -> Result<bool, BundleError> {
    Ok(m.apply_aut(a)?.exponents == m.pullback(g)?.exponents)
}
