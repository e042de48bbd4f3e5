//! Independent reference implementations used by the integration tests and the
//! acceptance suite. Each one evaluates a quantity the slow, literal way.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use qrchain::params::{ApeParams, RgsParams};
use qrchain::state::CorrelatedPairState;

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli(which: char) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match which {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => unreachable!(),
    }
}

/// Tensor product of single-qubit Paulis, first char = most significant qubit.
pub fn pauli_string(s: &str) -> M {
    s.chars()
        .map(pauli)
        .reduce(|a, b| a.kronecker(&b))
        .expect("non-empty")
}

/// Dense 4×4 matrix of `ρ(w, λ, φ)`.
pub fn pair_matrix(s: &CorrelatedPairState) -> M {
    let mut m = pauli_string("II") * c(0.25, 0.0);
    let k = s.w / 4.0;
    m += (pauli_string("XX") - pauli_string("YY")) * c(k * s.lam * s.phi.cos(), 0.0);
    m += (pauli_string("XY") + pauli_string("YX")) * c(k * s.lam * s.phi.sin(), 0.0);
    m += pauli_string("ZZ") * c(k * s.lam * s.lam, 0.0);
    m
}

fn single(op: &M, qubit: usize, n: usize) -> M {
    let mut out = M::identity(1, 1);
    for q in 0..n {
        let f = if q == qubit { op.clone() } else { pauli('I') };
        out = out.kronecker(&f);
    }
    out
}

fn depolarize(rho: &M, qubit: usize, p: f64) -> M {
    let mut twirl = M::zeros(rho.nrows(), rho.ncols());
    for ch in ['I', 'X', 'Y', 'Z'] {
        let pq = single(&pauli(ch), qubit, 4);
        twirl += &pq * rho * &pq;
    }
    rho * c(1.0 - p, 0.0) + twirl * c(p / 4.0, 0.0)
}

/// Deterministic BSM on the middle qubits of `left ⊗ right`, written out on
/// the 16-dimensional space: Z phases, MS gate, depolarising noise on both
/// ions, projection on `|00⟩`, partial trace and renormalisation.
pub fn dbsm_dense(left: &CorrelatedPairState, right: &CorrelatedPairState, p_ms: f64) -> M {
    let rho = pair_matrix(left).kronecker(&pair_matrix(right));
    let a = std::f64::consts::FRAC_PI_8;
    let zj = single(&pauli('Z'), 1, 4);
    let zk = single(&pauli('Z'), 2, 4);
    let id = M::identity(16, 16);
    // e^{iaZ} = cos a + i sin a Z
    let rot_j = &id * c(a.cos(), 0.0) + &zj * c(0.0, a.sin());
    let rot_k = &id * c(a.cos(), 0.0) - &zk * c(0.0, a.sin());
    let xx = single(&pauli('X'), 1, 4) * single(&pauli('X'), 2, 4);
    let q = std::f64::consts::FRAC_PI_4;
    let ms = &id * c(q.cos(), 0.0) - &xx * c(0.0, q.sin());
    let u = &ms * &rot_j * &rot_k;
    let mut r = &u * rho * u.adjoint();
    r = depolarize(&r, 1, p_ms);
    r = depolarize(&r, 2, p_ms);
    let mut out = M::zeros(4, 4);
    for a in 0..4usize {
        for b in 0..4usize {
            // a = (i, l) bits; middle bits fixed to 0.
            let ia = ((a >> 1) << 3) | (a & 1);
            let ib = ((b >> 1) << 3) | (b & 1);
            out[(a, b)] = r[(ia, ib)];
        }
    }
    let tr = out.trace();
    out / tr
}

pub fn max_abs_diff(a: &M, b: &M) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Literal nested-sum evaluation of the expected cycle time. Links are
/// `1..=n+1`; odd ones go in step 1, even ones in step 2. For `n = 0` the
/// success bracket is `T·h + T_corr` (no DBSM).
pub fn t_exp_nested(p: f64, h_max: u32, n: u32, t: f64, t_corr: f64, t_dbsm: f64) -> f64 {
    let links = (n + 1) as usize;
    let pmf = |h: u32| (1.0 - p).powi(h as i32 - 1) * p;
    let odd: Vec<usize> = (0..links).filter(|i| (i + 1) % 2 == 1).collect();
    let even: Vec<usize> = (0..links).filter(|i| (i + 1) % 2 == 0).collect();
    let cdf = 1.0 - (1.0 - p).powi(h_max as i32);
    let p1 = cdf.powi(odd.len() as i32);
    let p2 = cdf.powi(even.len() as i32);

    let mut first = 0.0;
    let mut h = vec![1u32; links];
    loop {
        let w: f64 = h.iter().map(|&x| pmf(x)).product();
        let mo = odd.iter().map(|&i| h[i]).max().unwrap_or(0);
        let me = even.iter().map(|&i| h[i]).max().unwrap_or(0);
        let bracket = if n == 0 {
            t * f64::from(mo) + t_corr
        } else {
            t * f64::from(mo + me) + 2.0 * t_corr + t_dbsm
        };
        first += w * bracket;
        if !odometer(&mut h, h_max) {
            break;
        }
    }
    let second = (1.0 - p1) * t * f64::from(h_max);

    let mut third = 0.0;
    if n > 0 {
        let mut ho = vec![1u32; odd.len()];
        loop {
            let w: f64 = ho.iter().map(|&x| pmf(x)).product();
            let mo = *ho.iter().max().unwrap();
            third += w * (t * f64::from(mo + h_max) + t_corr);
            if !odometer(&mut ho, h_max) {
                break;
            }
        }
        third *= 1.0 - p2;
    }
    first + second + third
}

fn odometer(h: &mut [u32], h_max: u32) -> bool {
    for x in h.iter_mut() {
        if *x < h_max {
            *x += 1;
            return true;
        }
        *x = 1;
    }
    false
}

/// `ē_{X|m}` by enumerating all `2^m` flip patterns in exact rational arithmetic.
pub fn majority_error_enumerated(m: u32, e: &BigRational) -> BigRational {
    let one = BigRational::one();
    let mut total = BigRational::zero();
    for mask in 0u32..(1 << m) {
        let flips = mask.count_ones();
        if 2 * flips < m {
            continue;
        }
        let mut w = one.clone();
        for b in 0..m {
            if mask >> b & 1 == 1 {
                w *= e.clone();
            } else {
                w *= &one - e;
            }
        }
        total += w;
    }
    total
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite")
}

/// Branch duration from first principles: each level-1 subtree takes
/// `b1 + 1` emissions, a CZ and a measurement; the leaf phase two CZs, an
/// emission and a measurement.
pub fn t_rgs_walk(rgs: &RgsParams, ape: &ApeParams) -> f64 {
    let mut t = 0.0;
    for _branch in 0..2 * rgs.m {
        for _sub in 0..rgs.b0 {
            for _ in 0..=rgs.b1 {
                t += ape.t_emit_s;
            }
            t += ape.t_cz_s;
            t += ape.t_meas_s;
        }
        t += 2.0 * ape.t_cz_s + ape.t_emit_s + ape.t_meas_s;
    }
    t
}

/// Monte Carlo over explicit trees: fraction of branches whose core allows a
/// logical X (some complete subtree) and a logical Z (every level-1 read
/// directly or through a child) measurement.
pub fn tree_mc<R: Rng>(mu: f64, b0: u32, b1: u32, trials: u32, rng: &mut R) -> (f64, f64) {
    let mut x_ok = 0u32;
    let mut z_ok = 0u32;
    for _ in 0..trials {
        let mut any_full = false;
        let mut all_read = true;
        for _ in 0..b0 {
            let l1 = rng.gen::<f64>() >= mu;
            let kids: Vec<bool> = (0..b1).map(|_| rng.gen::<f64>() >= mu).collect();
            any_full |= l1 && kids.iter().all(|&k| k);
            all_read &= l1 || kids.iter().any(|&k| k);
        }
        x_ok += u32::from(any_full);
        z_ok += u32::from(all_read);
    }
    (
        f64::from(x_ok) / f64::from(trials),
        f64::from(z_ok) / f64::from(trials),
    )
}

/// Probabilities of an X, Y, Z residual after two independent flip channels
/// each applied `n` times with probability `e`, by enumerating flip counts.
pub fn two_channel_enumeration(e: f64, n: u32) -> (f64, f64, f64) {
    let mut odd = 0.0;
    for k in (1..=n).step_by(2) {
        odd += binom(n, k) * e.powi(k as i32) * (1.0 - e).powi((n - k) as i32);
    }
    let even = 1.0 - odd;
    (odd * even, odd * odd, even * odd)
}

pub fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `(x − μ) / σ` with the convention that zero σ demands exact agreement.
pub fn z_score(sim: f64, theory: f64, sem: f64) -> f64 {
    if sem > 0.0 {
        (sim - theory) / sem
    } else if (sim - theory).abs() <= 1e-12 * theory.abs().max(1e-300) {
        0.0
    } else {
        f64::INFINITY
    }
}
