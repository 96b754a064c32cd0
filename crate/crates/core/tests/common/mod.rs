//! Dense reference implementations used as oracles by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use qvgc::statevec::{GateKind, Statevector};
use rand::Rng;

pub type Mat = Vec<Vec<C>>;
pub type M2 = [[C; 2]; 2];

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn identity(dim: usize) -> Mat {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn mat_add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn mat_scale(a: &Mat, s: C) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn matvec(m: &Mat, v: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn m2(m: M2) -> Mat {
    vec![m[0].to_vec(), m[1].to_vec()]
}

pub const I2: M2 = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];
pub const PX: M2 = [[C::new(0.0, 0.0), C::new(1.0, 0.0)], [C::new(1.0, 0.0), C::new(0.0, 0.0)]];
pub const PY: M2 = [[C::new(0.0, 0.0), C::new(0.0, -1.0)], [C::new(0.0, 1.0), C::new(0.0, 0.0)]];
pub const PZ: M2 = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(-1.0, 0.0)]];
pub const P0: M2 = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(0.0, 0.0)]];
pub const P1: M2 = [[C::new(0.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];

/// Tensor product over all `n` qubits with `ops` placed on their qubits and
/// identity elsewhere. Qubit 0 is the rightmost (least-significant) factor.
pub fn embed(ops: &[(usize, M2)], n: usize) -> Mat {
    let mut out = identity(1);
    for q in (0..n).rev() {
        let f = ops.iter().find(|(k, _)| *k == q).map_or(I2, |(_, m)| *m);
        out = kron(&out, &m2(f));
    }
    out
}

/// cos(θ/2)·I − i·sin(θ/2)·P for a Pauli string P given by `ops`.
fn pauli_rotation(ops: &[(usize, M2)], theta: f64, n: usize) -> Mat {
    mat_add(
        &mat_scale(&identity(1 << n), c((theta / 2.0).cos(), 0.0)),
        &mat_scale(&embed(ops, n), c(0.0, -(theta / 2.0).sin())),
    )
}

/// Full 2^n × 2^n matrix of a gate, built from Kronecker products.
pub fn gate_matrix(kind: GateKind, targets: &[usize], angle: f64, n: usize) -> Mat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = targets[0];
    let single = |m: M2| embed(&[(q, m)], n);
    match kind {
        GateKind::H => single([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]),
        GateKind::X => single(PX),
        GateKind::Y => single(PY),
        GateKind::Z => single(PZ),
        GateKind::S => single([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]),
        GateKind::T => single([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), C::from_polar(1.0, PI / 4.0)]]),
        GateKind::Cnot => mat_add(
            &embed(&[(targets[0], P0)], n),
            &embed(&[(targets[0], P1), (targets[1], PX)], n),
        ),
        GateKind::Rx => pauli_rotation(&[(q, PX)], angle, n),
        GateKind::Ry => pauli_rotation(&[(q, PY)], angle, n),
        GateKind::Rz => pauli_rotation(&[(q, PZ)], angle, n),
        GateKind::Rzz => pauli_rotation(&[(targets[0], PZ), (targets[1], PZ)], angle, n),
    }
}

/// Every valid target list for `kind` on `n` qubits.
pub fn target_choices(kind: GateKind, n: usize) -> Vec<Vec<usize>> {
    if kind.arity() == 1 {
        (0..n).map(|q| vec![q]).collect()
    } else {
        (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| vec![a, b]))
            .collect()
    }
}

pub fn random_amplitudes(n: usize, rng: &mut impl Rng) -> Vec<C> {
    let raw: Vec<C> = (0..1usize << n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

pub fn random_state(n: usize, rng: &mut impl Rng) -> Statevector {
    Statevector::from_amplitudes(random_amplitudes(n, rng)).unwrap()
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// ZZ feature-map state built without gates: each repetition applies
/// H^{⊗n} and then the diagonal unitary exp(i Σ_S φ_S(x) Π_{k∈S} Z_k) over
/// all singletons and all pairs.
pub fn zz_oracle_state(x: &[f64], reps: usize) -> Vec<C> {
    let n = x.len();
    let dim = 1usize << n;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamards = embed(
        &(0..n)
            .map(|q| (q, [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]))
            .collect::<Vec<_>>(),
        n,
    );
    let z = |basis: usize, k: usize| if (basis >> k) & 1 == 0 { 1.0 } else { -1.0 };
    let generator: Vec<f64> = (0..dim)
        .map(|b| {
            let mut g = 0.0;
            for i in 0..n {
                g += x[i] * z(b, i);
                for j in i + 1..n {
                    g += (PI - x[i]) * (PI - x[j]) * z(b, i) * z(b, j);
                }
            }
            g
        })
        .collect();
    let mut psi = vec![c(0.0, 0.0); dim];
    psi[0] = c(1.0, 0.0);
    for _ in 0..reps {
        psi = matvec(&hadamards, &psi);
        for (a, g) in psi.iter_mut().zip(&generator) {
            *a *= C::from_polar(1.0, *g);
        }
    }
    psi
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
