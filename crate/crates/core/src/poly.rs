//! Scalar-generic polynomial kernels: Gauss-Legendre rules and Lagrange
//! basis evaluation. Everything else in the crate works in `f64`.

use num_traits::Float;

use crate::error::{Error, Result};

/// Largest supported number of Gauss-Legendre nodes.
pub const MAX_GAUSS_NODES: usize = 10;

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("float conversion")
}

/// Legendre polynomial P_d and its derivative at x in [-1,1].
fn legendre<T: Float>(d: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if d == 0 {
        return (p0, T::zero());
    }
    for k in 2..=d {
        let kf: T = cast(k as f64);
        let p2 = ((cast::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let df: T = cast(d as f64);
    let dp = df * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on (0,1), nodes ascending.
pub fn gauss_legendre_rule<T: Float>(d: usize) -> Result<(Vec<T>, Vec<T>)> {
    if d == 0 || d > MAX_GAUSS_NODES {
        return Err(Error::Config(format!(
            "Gauss-Legendre rule needs 1..={} nodes, got {}",
            MAX_GAUSS_NODES, d
        )));
    }
    let mut nodes = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    let pi: T = cast(std::f64::consts::PI);
    let half: T = cast(0.5);
    for i in 1..=d {
        let mut x = (pi * (cast::<T>(i as f64) - cast(0.25)) / (cast::<T>(d as f64) + half)).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, dpx) = legendre(d, x);
            dp = dpx;
            let dx = p / dpx;
            x = x - dx;
            if dx.abs() <= T::epsilon() * cast(4.0) {
                break;
            }
        }
        let (_, dpx) = legendre(d, x);
        if dpx.is_finite() {
            dp = dpx;
        }
        nodes.push((T::one() - x) * half);
        weights.push(T::one() / ((T::one() - x * x) * dp * dp));
    }
    Ok((nodes, weights))
}

/// Roots of the shifted Legendre polynomial of degree d on (0,1), ascending.
pub fn gauss_legendre_nodes<T: Float>(d: usize) -> Result<Vec<T>> {
    gauss_legendre_rule(d).map(|(n, _)| n)
}

/// Values of the Lagrange basis polynomials on `nodes` at `t`.
pub fn lagrange_values<T: Float>(nodes: &[T], t: T, out: &mut [T]) {
    for (j, o) in out.iter_mut().enumerate().take(nodes.len()) {
        let mut v = T::one();
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                v = v * (t - xk) / (nodes[j] - xk);
            }
        }
        *o = v;
    }
}

/// Derivatives of the Lagrange basis polynomials on `nodes` at `t`.
pub fn lagrange_derivatives<T: Float>(nodes: &[T], t: T, out: &mut [T]) {
    let m = nodes.len();
    for j in 0..m {
        let mut sum = T::zero();
        for k in 0..m {
            if k == j {
                continue;
            }
            let mut term = T::one() / (nodes[j] - nodes[k]);
            for l in 0..m {
                if l != j && l != k {
                    term = term * (t - nodes[l]) / (nodes[j] - nodes[l]);
                }
            }
            sum = sum + term;
        }
        out[j] = sum;
    }
}

/// Interpolation weights P_l(eps), l = -r..=s, on the integer nodes -r..=s.
pub fn integer_stencil_weights<T: Float>(r: usize, s: usize, eps: T) -> Vec<T> {
    let nodes: Vec<T> = (0..=(r + s)).map(|i| cast::<T>(i as f64 - r as f64)).collect();
    let mut w = vec![T::zero(); nodes.len()];
    lagrange_values(&nodes, eps, &mut w);
    w
}

/// Basis values and derivatives on the equidistant nodes j/d of [0,1].
pub fn equidistant_basis<T: Float>(d: usize, x: T) -> (Vec<T>, Vec<T>) {
    let nodes: Vec<T> = (0..=d).map(|j| cast::<T>(j as f64 / d as f64)).collect();
    let mut v = vec![T::zero(); d + 1];
    let mut dv = vec![T::zero(); d + 1];
    lagrange_values(&nodes, x, &mut v);
    lagrange_derivatives(&nodes, x, &mut dv);
    (v, dv)
}
