//! Enumeration oracles and random cocycle builders shared by the integration tests.
#![allow(dead_code)]

use shiftcocycle::cocycle::{Branch, CylinderUnion, LocallyConstantCocycle};
use shiftcocycle::mat2::{op_norm, rotation, Mat2};
use shiftcocycle::modulus::{weight, ModulusSpec};
use shiftcocycle::shift::Cylinder;

pub fn all_words(w: usize) -> Vec<Vec<u8>> {
    (0u32..1 << w).map(|n| (0..w).map(|r| ((n >> r) & 1) as u8).collect()).collect()
}

fn union_window(f: &LocallyConstantCocycle, g: &LocallyConstantCocycle) -> (i64, i64) {
    (f.window().0.min(g.window().0), f.window().1.max(g.window().1))
}

fn restrict(c: &LocallyConstantCocycle, lo: i64, word: &[u8]) -> Vec<u8> {
    let (a, b) = c.window();
    word[(a - lo) as usize..=(b - lo) as usize].to_vec()
}

/// (F − G) on every word of the union window.
pub fn diff_table(f: &LocallyConstantCocycle, g: &LocallyConstantCocycle) -> (i64, Vec<Vec<u8>>, Vec<Mat2>) {
    let (lo, hi) = union_window(f, g);
    let words = all_words((hi - lo + 1) as usize);
    let values = words
        .iter()
        .map(|u| f.evaluate_word(&restrict(f, lo, u)).unwrap() - g.evaluate_word(&restrict(g, lo, u)).unwrap())
        .collect();
    (lo, words, values)
}

/// Smallest n with u_j ≠ v_j for some |j| = n inside the window.
pub fn disagreement(lo: i64, u: &[u8], v: &[u8]) -> Option<u64> {
    let hi = lo + u.len() as i64 - 1;
    (0..=lo.unsigned_abs().max(hi.unsigned_abs())).find(|&n| {
        let n = n as i64;
        [n, -n].iter().any(|&j| j >= lo && j <= hi && u[(j - lo) as usize] != v[(j - lo) as usize])
    })
}

pub fn brute_sup(f: &LocallyConstantCocycle, g: &LocallyConstantCocycle) -> f64 {
    diff_table(f, g).2.iter().map(op_norm).fold(0.0, f64::max)
}

/// sup over window-word pairs of ‖H(u) − H(v)‖·weight(N(u, v)).
pub fn brute_seminorm(f: &LocallyConstantCocycle, g: &LocallyConstantCocycle, spec: &ModulusSpec, rho: f64) -> f64 {
    let (lo, words, h) = diff_table(f, g);
    let mut best: f64 = 0.0;
    for (i, u) in words.iter().enumerate() {
        for (j, v) in words.iter().enumerate().skip(i + 1) {
            if let Some(n) = disagreement(lo, u, v) {
                best = best.max(op_norm(&(h[i] - h[j])) * weight(spec, n, rho));
            }
        }
    }
    best
}

/// rotation(a)·diag(e^s, e^−s)·rotation(b).
pub fn sl2(s: f64, a: f64, b: f64) -> Mat2 {
    rotation(a) * Mat2::diag(s.exp(), (-s).exp()) * rotation(b)
}

/// Window (−1, 1); window word r goes to branch `assign[r]`, or to the default when that is ≥ `mats.len() − 1`.
pub fn random_cocycle(assign: &[u8], mats: &[(f64, f64, f64)]) -> LocallyConstantCocycle {
    let words = all_words(3);
    let nb = mats.len() - 1;
    let mut branches = Vec::new();
    for (b, &(s, a, c)) in mats[..nb].iter().enumerate() {
        let cyl: Vec<Cylinder> = words
            .iter()
            .zip(assign)
            .filter(|(_, &a)| a as usize == b)
            .map(|(w, _)| Cylinder::new(-1, w.clone()).unwrap())
            .collect();
        if !cyl.is_empty() {
            branches.push(Branch::new(CylinderUnion::new(cyl).unwrap(), vec![], sl2(s, a, c)));
        }
    }
    let (s, a, c) = mats[nb];
    LocallyConstantCocycle::new("random", (-1, 1), branches, sl2(s, a, c)).unwrap()
}
