//! 2×2 real matrices, closed-form operator norms and overflow-safe long products.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Row-major 2×2 real matrix [[a, b], [c, d]].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(m: [[f64; 2]; 2]) -> Self {
        Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a, m.b], [m.c, m.d]]
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    pub const ZERO: Mat2 = Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Self::new(x, 0.0, 0.0, y)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.a, s * self.b, s * self.c, s * self.d)
    }

    /// Adjugate divided by the determinant; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        (det != 0.0 && det.is_finite())
            .then(|| Self::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// |det − 1| ≤ tol.
    pub fn is_sl2(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        op_norm(self)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

/// σ_max = sqrt((F + sqrt(F² − 4 det²)) / 2) with F the squared Frobenius norm.
///
/// F² − 4det² is evaluated as ((a−d)² + (b+c)²)((a+d)² + (b−c)²), which is never negative.
pub fn op_norm(m: &Mat2) -> f64 {
    let s = m.max_abs();
    if s == 0.0 || !s.is_finite() {
        return s;
    }
    let (a, b, c, d) = (m.a / s, m.b / s, m.c / s, m.d / s);
    let f = a * a + b * b + c * c + d * d;
    let disc = (((a - d) * (a - d) + (b + c) * (b + c)) * ((a + d) * (a + d) + (b - c) * (b - c))).sqrt();
    s * ((f + disc) / 2.0).sqrt()
}

/// R_θ = [[cos θ, −sin θ], [sin θ, cos θ]].
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// [[1, 0], [s, 1]].
pub fn shear_lower(s: f64) -> Mat2 {
    Mat2::new(1.0, 0.0, s, 1.0)
}

/// diag(u, 1/u).
pub fn diagonal(u: f64) -> Result<Mat2> {
    if u == 0.0 || !u.is_finite() {
        return Err(invalid(format!("diagonal(u) needs finite nonzero u, got {u}")));
    }
    Ok(Mat2::diag(u, 1.0 / u))
}

fn binary_exponent(x: f64) -> i64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i64;
    if biased == 0 {
        binary_exponent(x * 2f64.powi(64)) - 64
    } else {
        biased - 1023
    }
}

fn pow2(e: i64) -> f64 {
    if e < -1100 {
        0.0
    } else if e > 1100 {
        f64::INFINITY
    } else if e < -1000 {
        2f64.powi(e as i32 + 100) * 2f64.powi(-100)
    } else {
        2f64.powi(e as i32)
    }
}

/// A long product kept as rows with independent power-of-two exponents.
///
/// Row i of the represented matrix is `rows[i] · 2^exps[i]`, with the largest mantissa of each
/// nonzero row in [1, 2). Scaling by powers of two is exact, so the represented matrix matches
/// plain floating-point multiplication except that it cannot overflow or underflow. The
/// determinant is tracked separately as ln|det| and a sign, accumulated from the factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledProduct {
    rows: [[f64; 2]; 2],
    exps: [i64; 2],
    log_abs_det: f64,
    det_negative: bool,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScaledProduct {
    pub fn identity() -> Self {
        Self { rows: [[1.0, 0.0], [0.0, 1.0]], exps: [0, 0], log_abs_det: 0.0, det_negative: false }
    }

    pub fn from_mat2(m: &Mat2) -> Self {
        let mut p = Self::identity();
        p.mul_left(m);
        p
    }

    fn normalized(row: [f64; 2], exp: i64) -> ([f64; 2], i64) {
        let m = row[0].abs().max(row[1].abs());
        if m == 0.0 {
            return ([0.0, 0.0], 0);
        }
        let k = binary_exponent(m);
        let s = pow2(-k);
        ([row[0] * s, row[1] * s], exp + k)
    }

    /// Σ_j coef_j · 2^{cexp_j} · row_j · 2^{rexp_j}, normalized.
    #[inline]
    fn combine(terms: [(f64, i64, [f64; 2], i64); 2]) -> ([f64; 2], i64) {
        let live = |t: &(f64, i64, [f64; 2], i64)| t.0 != 0.0 && (t.2[0] != 0.0 || t.2[1] != 0.0);
        let [t0, t1] = terms;
        match (live(&t0), live(&t1)) {
            (false, false) => ([0.0, 0.0], 0),
            (true, false) => Self::normalized([t0.0 * t0.2[0], t0.0 * t0.2[1]], t0.1 + t0.3),
            (false, true) => Self::normalized([t1.0 * t1.2[0], t1.0 * t1.2[1]], t1.1 + t1.3),
            (true, true) => {
                let (e0, e1) = (t0.1 + t0.3, t1.1 + t1.3);
                let emax = e0.max(e1);
                let s0 = t0.0 * pow2(e0 - emax);
                let s1 = t1.0 * pow2(e1 - emax);
                Self::normalized([s0 * t0.2[0] + s1 * t1.2[0], s0 * t0.2[1] + s1 * t1.2[1]], emax)
            }
        }
    }

    fn absorb_det(&mut self, det: f64) {
        self.log_abs_det += det.abs().ln();
        self.det_negative ^= det < 0.0;
    }

    /// self ← M · self.
    pub fn mul_left(&mut self, m: &Mat2) {
        let (r0, e0) = Self::combine([(m.a, 0, self.rows[0], self.exps[0]), (m.b, 0, self.rows[1], self.exps[1])]);
        let (r1, e1) = Self::combine([(m.c, 0, self.rows[0], self.exps[0]), (m.d, 0, self.rows[1], self.exps[1])]);
        self.rows = [r0, r1];
        self.exps = [e0, e1];
        self.absorb_det(m.det());
    }

    /// self ← diag(±e^{l0}, ±e^{l1}) · self, exact on the exponents.
    pub fn mul_left_diag_log(&mut self, log_abs: [f64; 2], negative: [bool; 2]) {
        for i in 0..2 {
            let l2 = log_abs[i] / std::f64::consts::LN_2;
            let whole = l2.floor();
            let mut frac = (l2 - whole).exp2();
            if negative[i] {
                frac = -frac;
            }
            let (r, e) = Self::normalized([self.rows[i][0] * frac, self.rows[i][1] * frac], self.exps[i] + whole as i64);
            self.rows[i] = r;
            self.exps[i] = e;
        }
        self.log_abs_det += log_abs[0] + log_abs[1];
        self.det_negative ^= negative[0] ^ negative[1];
    }

    /// later · earlier.
    pub fn compose(later: &ScaledProduct, earlier: &ScaledProduct) -> ScaledProduct {
        let l = later;
        let mut rows = [[0.0; 2]; 2];
        let mut exps = [0i64; 2];
        for i in 0..2 {
            let (r, e) = Self::combine([
                (l.rows[i][0], l.exps[i], earlier.rows[0], earlier.exps[0]),
                (l.rows[i][1], l.exps[i], earlier.rows[1], earlier.exps[1]),
            ]);
            rows[i] = r;
            exps[i] = e;
        }
        ScaledProduct {
            rows,
            exps,
            log_abs_det: l.log_abs_det + earlier.log_abs_det,
            det_negative: l.det_negative ^ earlier.det_negative,
        }
    }

    /// ln|entry (i, j)|; −∞ for a zero entry.
    pub fn log_abs_entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j].abs().ln() + self.exps[i] as f64 * std::f64::consts::LN_2
    }

    pub fn entry_sign(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j].signum()
    }

    /// ln ‖P‖.
    pub fn log_norm(&self) -> f64 {
        let live: Vec<usize> = (0..2).filter(|&i| self.rows[i] != [0.0, 0.0]).collect();
        if live.is_empty() {
            return f64::NEG_INFINITY;
        }
        let emax = live.iter().map(|&i| self.exps[i]).max().unwrap();
        let s = |i: usize| if self.rows[i] == [0.0, 0.0] { 0.0 } else { pow2(self.exps[i] - emax) };
        let m = Mat2::new(
            self.rows[0][0] * s(0),
            self.rows[0][1] * s(0),
            self.rows[1][0] * s(1),
            self.rows[1][1] * s(1),
        );
        op_norm(&m).ln() + emax as f64 * std::f64::consts::LN_2
    }

    /// Same as [`log_norm`](Self::log_norm): the log-scale of the (unit, log_scale) view.
    pub fn log_scale(&self) -> f64 {
        self.log_norm()
    }

    /// P / ‖P‖.
    pub fn unit(&self) -> Mat2 {
        let ln = self.log_norm();
        let f = |i: usize| (self.exps[i] as f64 * std::f64::consts::LN_2 - ln).exp();
        Mat2::new(
            self.rows[0][0] * f(0),
            self.rows[0][1] * f(0),
            self.rows[1][0] * f(1),
            self.rows[1][1] * f(1),
        )
    }

    /// The represented matrix; entries may overflow for very long products.
    pub fn to_mat2(&self) -> Mat2 {
        let f = |i: usize| pow2(self.exps[i]);
        Mat2::new(
            self.rows[0][0] * f(0),
            self.rows[0][1] * f(0),
            self.rows[1][0] * f(1),
            self.rows[1][1] * f(1),
        )
    }

    /// ln|det| accumulated from the factors.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn det(&self) -> f64 {
        let v = self.log_abs_det.exp();
        if self.det_negative {
            -v
        } else {
            v
        }
    }

    pub fn det_negative(&self) -> bool {
        self.det_negative
    }

    /// ln ‖P^{-1}‖ = ln ‖P‖ − ln|det P|.
    pub fn log_inverse_norm(&self) -> f64 {
        self.log_norm() - self.log_abs_det
    }

    /// det computed from the entries (not from the factors), divided by the tracked det.
    pub fn det_ratio(&self) -> f64 {
        let r = &self.rows;
        let entry_det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let log = entry_det.abs().ln() + (self.exps[0] + self.exps[1]) as f64 * std::f64::consts::LN_2;
        let sign = entry_det.signum() * if self.det_negative { -1.0 } else { 1.0 };
        sign * (log - self.log_abs_det).exp()
    }
}

/// M · acc.
pub fn scaled_mul(acc: &ScaledProduct, m: &Mat2) -> ScaledProduct {
    let mut out = *acc;
    out.mul_left(m);
    out
}

/// A diagonal or antidiagonal matrix stored by the logs of its two nonzero entries.
///
/// Diagonal: diag(s0·e^{l0}, s1·e^{l1}). Antidiagonal: [[0, s0·e^{l0}], [s1·e^{l1}, 0]].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub anti: bool,
    pub log_abs: [f64; 2],
    pub negative: [bool; 2],
}

impl Monomial {
    pub fn identity() -> Self {
        Self { anti: false, log_abs: [0.0, 0.0], negative: [false, false] }
    }

    /// later · earlier.
    pub fn compose(later: &Monomial, earlier: &Monomial) -> Monomial {
        let (l, e) = (later, earlier);
        // pick which entry of `earlier` each entry of `later` multiplies
        let (idx, anti) = match (l.anti, e.anti) {
            (false, false) => ([0, 1], false),
            (false, true) => ([0, 1], true),
            (true, false) => ([1, 0], true),
            (true, true) => ([1, 0], false),
        };
        Monomial {
            anti,
            log_abs: [l.log_abs[0] + e.log_abs[idx[0]], l.log_abs[1] + e.log_abs[idx[1]]],
            negative: [l.negative[0] ^ e.negative[idx[0]], l.negative[1] ^ e.negative[idx[1]]],
        }
    }

    pub fn log_norm(&self) -> f64 {
        self.log_abs[0].max(self.log_abs[1])
    }

    pub fn to_mat2(&self) -> Mat2 {
        let v = |i: usize| {
            let x = self.log_abs[i].exp();
            if self.negative[i] {
                -x
            } else {
                x
            }
        };
        if self.anti {
            Mat2::new(0.0, v(0), v(1), 0.0)
        } else {
            Mat2::diag(v(0), v(1))
        }
    }

    /// Snaps a product onto the monomial pattern it is closest to.
    ///
    /// The dominant entry is read from `p`; the other nonzero entry comes from the tracked
    /// determinant. Returns the residual (largest discarded entry relative to ‖p‖) as the error
    /// when it exceeds `tol`.
    pub fn from_scaled(p: &ScaledProduct, tol: f64) -> std::result::Result<(Monomial, f64), f64> {
        let l = |i, j| p.log_abs_entry(i, j);
        let diag_mag = l(0, 0).max(l(1, 1));
        let anti_mag = l(0, 1).max(l(1, 0));
        let ln = p.log_norm();
        let anti = anti_mag > diag_mag;
        let (big, small) = if anti {
            if l(0, 1) >= l(1, 0) {
                ((0, 1), (1, 0))
            } else {
                ((1, 0), (0, 1))
            }
        } else if l(0, 0) >= l(1, 1) {
            ((0, 0), (1, 1))
        } else {
            ((1, 1), (0, 0))
        };
        let residual = ((if anti { diag_mag } else { anti_mag }) - ln).exp();
        if residual > tol {
            return Err(residual);
        }
        let big_log = l(big.0, big.1);
        let big_neg = p.entry_sign(big.0, big.1) < 0.0;
        let small_log = p.log_abs_det() - big_log;
        // det = big·small for diagonal, −big·small for antidiagonal
        let small_neg = big_neg ^ p.det_negative() ^ anti;
        let mut m = Monomial { anti, log_abs: [0.0; 2], negative: [false; 2] };
        let slot = |pos: (usize, usize)| pos.0;
        m.log_abs[slot(big)] = big_log;
        m.negative[slot(big)] = big_neg;
        m.log_abs[slot(small)] = small_log;
        m.negative[slot(small)] = small_neg;
        Ok((m, residual))
    }
}
