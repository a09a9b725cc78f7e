use ddebif::linalg::Mat;
use ddebif::spectrum::*;
use ddebif::{default_stability_method, PointKind};
use num_complex::Complex64;

/// Scalar Newton on λ + a e^{-λ} = 0.
fn hayes_root(a: f64, mut l: Complex64) -> Complex64 {
    for _ in 0..50 {
        let f = l + a * (-l).exp();
        let df = 1.0 - a * (-l).exp();
        l -= f / df;
    }
    l
}

fn hayes() -> LinearizedDde {
    let a = std::f64::consts::FRAC_PI_2;
    LinearizedDde { a: vec![Mat::zeros(1, 1), Mat::from_element(1, 1, -a)], tau: vec![1.0] }
}

#[test]
fn bdf4_safety_radius_matches_constant() {
    let rho = lms_safety_radius(&ddebif::bdf4_alpha(), &ddebif::bdf4_beta(), 0.01, 0.01);
    println!("rho = {rho}");
    assert!((rho - ddebif::BDF4_RHO).abs() < 1e-12);
}

#[test]
fn hayes_leading_roots() {
    let lin = hayes();
    let method = default_stability_method(PointKind::Stst);
    let (h, l0, _) = approximate_roots(&lin, &method).unwrap();
    let oracle = hayes_root(std::f64::consts::FRAC_PI_2, Complex64::new(0.1, 1.5));
    println!("h={h} l0={:?} oracle={oracle}", &l0[..4.min(l0.len())]);
    assert!((l0[0] - oracle).norm() < 1e-2 || (l0[0] - oracle.conj()).norm() < 1e-2);
    let (l1, n1) = correct_roots(&lin, &l0, &method);
    assert!(n1.is_none());
    let pair = [l1[0], l1[1]];
    assert!(pair.iter().any(|z| (z - oracle).norm() < 1e-6));
    assert!(pair.iter().any(|z| (z - oracle.conj()).norm() < 1e-6));
}


/// A = V D V⁻¹ with D in real block form, so the eigenvalues are known.
fn planted(rng: &mut rand::rngs::StdRng) -> (Mat, Vec<Complex64>) {
    use rand::Rng;
    let mut d = Mat::zeros(5, 5);
    let mut eig = Vec::new();
    for b in 0..2 {
        let (re, im) = (rng.gen_range(-2.0..1.0), rng.gen_range(0.2..3.0));
        let k = 2 * b;
        d[(k, k)] = re;
        d[(k + 1, k + 1)] = re;
        d[(k, k + 1)] = im;
        d[(k + 1, k)] = -im;
        eig.push(Complex64::new(re, im));
        eig.push(Complex64::new(re, -im));
    }
    let r = rng.gen_range(-2.0..1.0);
    d[(4, 4)] = r;
    eig.push(Complex64::new(r, 0.0));
    let v = Mat::from_fn(5, 5, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
    let a = &v * d * v.clone().try_inverse().unwrap();
    (a, eig)
}

#[test]
fn zero_delay_terms_reduce_to_matrix_eigenvalues() {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let method = default_stability_method(PointKind::Stst);
    for case in 0..10 {
        let (a0, eig) = planted(&mut rng);
        let lin = LinearizedDde { a: vec![a0, Mat::zeros(5, 5), Mat::zeros(5, 5)], tau: vec![1.0, 2.5] };
        let (_, l0, _) = approximate_roots(&lin, &method).unwrap();
        let (l1, _) = correct_roots(&lin, &l0, &method);
        assert_eq!(l1.len(), 5, "case {}", case);
        for z in &eig {
            let best = l1.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "case {}: eigenvalue {} missed by {:.2e}", case, z, best);
        }
    }
}
