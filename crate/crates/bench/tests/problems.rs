use mfd_bench::problems::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Second derivatives of the disk solution, differentiated by hand:
/// u = sin(4x+0.1)/16 + x cos(2y+0.4)/4
/// u_xx = -sin(4x+0.1), u_yy = -x cos(2y+0.4).
fn disk_minus_laplacian(x: f64, y: f64) -> f64 {
    let uxx = -(4.0 * x + 0.1).sin();
    let uyy = -x * (2.0 * y + 0.4).cos();
    -(uxx + uyy)
}

#[test]
fn disk_source_matches_symbolic_laplacian() {
    let p = disk_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = p.source(&[x, y, 0.0]);
        assert!((f - disk_minus_laplacian(x, y)).abs() <= 1e-10, "({x}, {y})");
    }
}

#[test]
fn quoted_source_at_origin() {
    assert!((disk_problem().source(&[0.0; 3]) - 0.0998334).abs() < 1e-7);
    assert!((disk_problem().exact(&[0.0; 3]) - 0.1f64.sin() / 16.0).abs() < 1e-15);
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [disk_problem(), quadratic_problem(), box3d_problem()] {
        for _ in 0..100 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let g = p.gradient(&x);
            for k in 0..p.dim() {
                let h = 1e-5;
                let (mut a, mut b) = (x, x);
                a[k] += h;
                b[k] -= h;
                let fd = (p.exact(&a) - p.exact(&b)) / (2.0 * h);
                assert!((g[k] - fd).abs() < 1e-8, "{} d{k}", p.name);
            }
        }
    }
}

#[test]
fn clouds_carry_the_exact_dirichlet_data() {
    let p = disk_problem();
    let c = p.cloud(300, 2).unwrap();
    for i in 0..c.len() {
        if c.kind(i) == mfd_core::geometry::PointKind::Dirichlet {
            assert_eq!(c.bc_value(i), p.exact(c.point(i)));
        }
    }
}
