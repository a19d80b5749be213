//! Fast evaluation of long cocycle products along one orbit.
//!
//! Branch membership is computed for 64 consecutive times at once from bit-packed coordinates.
//! Runs of diagonal factors are folded into exact log sums; only non-diagonal factors are
//! multiplied as matrices.

use crate::cocycle::{Branch, LocallyConstantCocycle};
use crate::error::{Error, Result};
use crate::mat2::{Mat2, ScaledProduct};
use crate::shift::{LazyPoint, Orbit};

#[derive(Clone, Debug)]
enum Kind {
    Identity,
    Diagonal { log_abs: [f64; 2], negative: [bool; 2] },
    General(Mat2),
}

impl Kind {
    fn of(m: &Mat2) -> Kind {
        if m.b == 0.0 && m.c == 0.0 && m.a != 0.0 && m.d != 0.0 {
            if m.a == 1.0 && m.d == 1.0 {
                Kind::Identity
            } else {
                Kind::Diagonal { log_abs: [m.a.abs().ln(), m.d.abs().ln()], negative: [m.a < 0.0, m.d < 0.0] }
            }
        } else {
            Kind::General(*m)
        }
    }
}

#[derive(Clone, Debug)]
struct CompiledBranch {
    include: Vec<usize>,
    exclude: Vec<usize>,
    kind: Kind,
}

/// Branch data laid out for block evaluation.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    cylinders: Vec<(i64, Vec<u8>)>,
    branches: Vec<CompiledBranch>,
    default: Kind,
    min_base: i64,
}

impl Compiled {
    pub(crate) fn new(branches: &[Branch], default: &Mat2) -> Self {
        let mut cylinders: Vec<(i64, Vec<u8>)> = Vec::new();
        let mut index = |base: i64, word: &[u8]| -> usize {
            if let Some(pos) = cylinders.iter().position(|(b, w)| *b == base && w == word) {
                pos
            } else {
                cylinders.push((base, word.to_vec()));
                cylinders.len() - 1
            }
        };
        let branches = branches
            .iter()
            .map(|br| CompiledBranch {
                include: br.cylinders().iter().map(|c| index(c.base(), c.word())).collect(),
                exclude: br.exclude().iter().map(|c| index(c.base(), c.word())).collect(),
                kind: Kind::of(br.matrix()),
            })
            .collect();
        let min_base = cylinders.iter().map(|(b, _)| *b).min().unwrap_or(0).min(0);
        Self { cylinders, branches, default: Kind::of(default), min_base }
    }
}

#[derive(Default)]
struct DiagRun {
    log_abs: [f64; 2],
    negative: [bool; 2],
    pending: bool,
}

impl DiagRun {
    fn add(&mut self, kind: &Kind, count: u32) {
        if count == 0 {
            return;
        }
        if let Kind::Diagonal { log_abs, negative } = kind {
            self.log_abs[0] += log_abs[0] * count as f64;
            self.log_abs[1] += log_abs[1] * count as f64;
            let odd = count % 2 == 1;
            self.negative[0] ^= negative[0] && odd;
            self.negative[1] ^= negative[1] && odd;
            self.pending = true;
        }
    }

    fn flush(&mut self, acc: &mut ScaledProduct) {
        if self.pending {
            acc.mul_left_diag_log(self.log_abs, self.negative);
        }
        *self = DiagRun::default();
    }
}

/// Evaluates products of one cocycle along the orbit of one point.
pub struct OrbitScanner<'a> {
    compiled: &'a Compiled,
    orbit: Orbit,
    occ: Vec<u64>,
}

impl<'a> OrbitScanner<'a> {
    pub fn new(f: &'a LocallyConstantCocycle, x: &LazyPoint) -> Self {
        let compiled = f.compiled();
        Self { compiled, orbit: Orbit::new(x), occ: vec![0; compiled.cylinders.len()] }
    }

    pub fn orbit(&mut self) -> &mut Orbit {
        &mut self.orbit
    }

    /// acc ← A(f^{end−1}x) ⋯ A(f^{start}x) · acc.
    pub fn multiply(&mut self, start: i64, end: i64, acc: &mut ScaledProduct) -> Result<()> {
        let c = self.compiled;
        let nb = c.branches.len();
        let mut bits = vec![0u64; nb];
        let mut run = DiagRun::default();
        let mut t = start;
        while t < end {
            let len = (end - t).min(64);
            let mask = if len == 64 { !0u64 } else { (1u64 << len) - 1 };
            for (slot, (base, word)) in self.occ.iter_mut().zip(&c.cylinders) {
                *slot = self.orbit.occurrences(word, t + base);
            }
            let mut covered = 0u64;
            let mut general = 0u64;
            for (b, br) in c.branches.iter().enumerate() {
                let inc = br.include.iter().fold(0u64, |acc, &i| acc | self.occ[i]);
                let exc = br.exclude.iter().fold(0u64, |acc, &i| acc | self.occ[i]);
                let here = inc & !exc & mask;
                if covered & here != 0 {
                    let r = (covered & here).trailing_zeros() as i64;
                    let first = (0..b).find(|&a| bits[a] >> r & 1 == 1).unwrap_or(0);
                    return Err(Error::AmbiguousBranch { time: t + r, first, second: b });
                }
                covered |= here;
                bits[b] = here;
                if matches!(br.kind, Kind::General(_)) {
                    general |= here;
                }
            }
            let default_bits = !covered & mask;
            if matches!(c.default, Kind::General(_)) {
                general |= default_bits;
            }
            let mut lo = 0u32;
            let add_segment = |run: &mut DiagRun, seg: u64| {
                for (b, br) in c.branches.iter().enumerate() {
                    run.add(&br.kind, (bits[b] & seg).count_ones());
                }
                run.add(&c.default, (default_bits & seg).count_ones());
            };
            let mut g = general;
            while g != 0 {
                let r = g.trailing_zeros();
                let seg = segment(lo, r);
                add_segment(&mut run, seg);
                run.flush(acc);
                let kind = (0..nb)
                    .find(|&b| bits[b] >> r & 1 == 1)
                    .map(|b| &c.branches[b].kind)
                    .unwrap_or(&c.default);
                if let Kind::General(m) = kind {
                    acc.mul_left(m);
                }
                lo = r + 1;
                g &= g - 1;
            }
            add_segment(&mut run, segment(lo, len as u32) & mask);
            t += len;
            if t & 0xffff == 0 {
                self.orbit.release_before(t + c.min_base - 64);
            }
        }
        run.flush(acc);
        Ok(())
    }

    /// A(f^{end−1}x) ⋯ A(f^{start}x).
    pub fn product(&mut self, start: i64, end: i64) -> Result<ScaledProduct> {
        let mut acc = ScaledProduct::identity();
        self.multiply(start, end, &mut acc)?;
        Ok(acc)
    }
}

/// Bits lo..hi (exclusive).
fn segment(lo: u32, hi: u32) -> u64 {
    if hi <= lo {
        return 0;
    }
    let upper = if hi >= 64 { !0u64 } else { (1u64 << hi) - 1 };
    upper & (!0u64 << lo)
}
