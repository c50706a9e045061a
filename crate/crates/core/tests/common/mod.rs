//! Independent oracles for the integration tests: brute-force evaluation of
//! producing functions, Möbius interpolation over bitmasks, and Heisenberg
//! arithmetic through explicit 3x3 matrices.

#![allow(dead_code)]

use nilrec::rational::{floor, int, ratio};
use nilrec::setcore::{FiniteSet, IndexInterval};
use nilrec::setpoly::{SetPolynomial, TProducing, Value, ValueGroup};
use nilrec::Q;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Elements of the bitmask `m` (bit `i` stands for `i + 1`).
pub fn mask_elements(m: u32) -> Vec<u32> {
    (0..32).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect()
}

pub fn mask_set(m: u32) -> FiniteSet {
    FiniteSet::new(mask_elements(m)).unwrap()
}

/// `sum over keys contained in alpha` of a sparse t-producing table.
pub fn t_eval(entries: &[(Vec<u32>, Q)], alpha: &[u32]) -> Q {
    entries
        .iter()
        .filter(|(k, _)| k.iter().all(|a| alpha.contains(a)))
        .fold(int(0), |acc, (_, v)| acc + v)
}

/// Möbius coefficients `c(S) = sum_{T <= S} (-1)^{|S - T|} f(T)` of a
/// function on the subsets of an `n`-set.
pub fn mobius(values: &[Q], n: u32) -> Vec<Q> {
    let mut c = values.to_vec();
    for i in 0..n {
        for m in 0..(1u32 << n) {
            if m >> i & 1 == 1 {
                let lower = c[(m ^ (1 << i)) as usize].clone();
                c[m as usize] -= lower;
            }
        }
    }
    c
}

/// Largest support size of a nonzero Möbius coefficient (0 for the zero
/// function, and for constants).
pub fn mobius_degree(values: &[Q], n: u32) -> u32 {
    mobius(values, n)
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != int(0))
        .map(|(m, _)| (m as u32).count_ones())
        .max()
        .unwrap_or(0)
}

pub fn random_q(rng: &mut ChaCha8Rng) -> Q {
    ratio(rng.gen_range(-20..=20), rng.gen_range(1..=12))
}

/// Sparse rational t-producing table on `[r]` with keys of size at most `d`.
pub fn random_entries(rng: &mut ChaCha8Rng, d: usize, r: u32, density: f64) -> Vec<(Vec<u32>, Q)> {
    let mut out = Vec::new();
    for m in 1u32..(1 << r) {
        if m.count_ones() as usize <= d && rng.gen_bool(density) {
            let v = random_q(rng);
            if v != int(0) {
                out.push((mask_elements(m), v));
            }
        }
    }
    out
}

pub fn setpoly(d: usize, r: u32, entries: &[(Vec<u32>, Q)]) -> SetPolynomial {
    let tp = TProducing::new(
        d,
        IndexInterval::new(r).unwrap(),
        ValueGroup::Rationals,
        entries
            .iter()
            .map(|(k, v)| (FiniteSet::new(k.clone()).unwrap(), Value::scalar(v.clone()))),
    )
    .unwrap();
    SetPolynomial::new(tp).unwrap()
}

/// Upper unipotent 3x3 matrix `[[1,x,z],[0,1,y],[0,0,1]]`, stored as
/// `(x, y, z)` but multiplied entrywise as a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat(pub [[Q; 3]; 3]);

impl Mat {
    pub fn from_xyz(x: &Q, y: &Q, z: &Q) -> Mat {
        Mat([
            [int(1), x.clone(), z.clone()],
            [int(0), int(1), y.clone()],
            [int(0), int(0), int(1)],
        ])
    }

    pub fn identity() -> Mat {
        Mat::from_xyz(&int(0), &int(0), &int(0))
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        let mut c: [[Q; 3]; 3] = Default::default();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = int(0);
                for k in 0..3 {
                    s += &self.0[i][k] * &o.0[k][j];
                }
                c[i][j] = s;
            }
        }
        Mat(c)
    }

    /// Inverse by back substitution on the unipotent matrix.
    pub fn inverse(&self) -> Mat {
        let (x, y, z) = self.xyz();
        Mat::from_xyz(&-x.clone(), &-y.clone(), &(&x * &y - z))
    }

    pub fn xyz(&self) -> (Q, Q, Q) {
        (self.0[0][1].clone(), self.0[1][2].clone(), self.0[0][2].clone())
    }

    pub fn is_unipotent(&self) -> bool {
        let m = &self.0;
        (0..3).all(|i| m[i][i] == int(1)) && m[1][0] == int(0) && m[2][0] == int(0) && m[2][1] == int(0)
    }
}

/// The integer matrix `γ` and fundamental-domain matrix `q` with `g = γ q`,
/// found by searching integer `γ` near `g` rather than by the floor formula.
pub fn lattice_split(g: &Mat) -> (Mat, Mat) {
    let (x, y, _) = g.xyz();
    let a = floor(&x);
    let b = floor(&y);
    // with a and b fixed, q = γ^{-1} g has q_z = z - c - a * q_y: exactly
    // one integer c puts it in [0, 1)
    for dc in -2i64..=2 {
        let (_, _, z) = g.xyz();
        let qy = &y - &b;
        let c = floor(&(&z - &a * &qy)) + int(dc);
        let gamma = Mat::from_xyz(&a, &b, &c);
        let q = gamma.inverse().mul(g);
        let (qx, qy, qz) = q.xyz();
        let unit = |v: &Q| *v >= int(0) && *v < int(1);
        if unit(&qx) && unit(&qy) && unit(&qz) {
            return (gamma, q);
        }
    }
    panic!("no lattice split for {g:?}");
}

pub fn circle(a: &Q) -> Q {
    let f = a - floor(a);
    let g = int(1) - &f;
    if f < g {
        f
    } else {
        g
    }
}
