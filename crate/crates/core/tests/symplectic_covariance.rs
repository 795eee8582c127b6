use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wigner_gup::{
    block_rep, build_moment_matrix, check_psd, gaussian_moments, spin_rep, transform_moments,
    GaussianState, HalfInt, MomentTable, SymplecticMap, C64, DEFAULT_PSD_TOL,
};

fn solve_d(a: f64, b: f64, c: f64) -> Option<SymplecticMap> {
    // fix the determinant by solving for the last entry, keeping it in range
    if a.abs() < 1e-3 {
        return None;
    }
    let d = (1.0 + b * c) / a;
    if d.abs() > 2.0 {
        return None;
    }
    SymplecticMap::new(a, b, c, d).ok()
}

fn symplectic() -> impl Strategy<Value = SymplecticMap> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
        .prop_filter_map("entry out of range", |(a, b, c)| solve_d(a, b, c))
}

fn random_symplectic(rng: &mut ChaCha8Rng) -> SymplecticMap {
    loop {
        let (a, b, c) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        if let Some(s) = solve_d(a, b, c) {
            return s;
        }
    }
}

fn random_gaussian(rng: &mut ChaCha8Rng, hbar: f64, physical: bool) -> GaussianState {
    let s = random_symplectic(rng);
    let spread = if physical {
        rng.gen_range(1.0..2.0)
    } else {
        rng.gen_range(0.2..0.9)
    };
    let m = s.as_matrix();
    let v = m * m.transpose() * (hbar / 2.0 * spread);
    let mean = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    GaussianState::new(mean, [[v[(0, 0)], v[(0, 1)]], [v[(1, 0)], v[(1, 1)]]]).unwrap()
}

fn cmax(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(1.0f64, |acc, x| acc.max(x.abs()));
    (a - b).abs().max() / scale
}

proptest! {
    #[test]
    fn representation_property(s1 in symplectic(), s2 in symplectic(), j2 in 0u32..=6) {
        let j = HalfInt::from_twice(j2);
        let lhs = spin_rep(&s1.compose(&s2), j).entries;
        let rhs = spin_rep(&s1, j).entries * spin_rep(&s2, j).entries;
        prop_assert!(max_rel_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn unimodular(s in symplectic(), j2 in 0u32..=6) {
        let k = spin_rep(&s, HalfInt::from_twice(j2)).entries;
        prop_assert!((k.determinant() - 1.0).abs() < 1e-10, "det = {}", k.determinant());
    }
}

#[test]
fn covariance_of_moment_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hbar = 1.0;
    for _ in 0..25 {
        let physical = rng.gen_bool(0.5);
        let g = random_gaussian(&mut rng, hbar, physical);
        let t = gaussian_moments(&g, 6, hbar).unwrap();
        let s = random_symplectic(&mut rng);
        let moved = transform_moments(&t, &s).unwrap();
        for j2 in 0..=3 {
            let j = HalfInt::from_twice(j2);
            let k = block_rep(&s, j).map(|x| C64::new(x, 0.0));
            let before = build_moment_matrix(&t, j).unwrap();
            let after = build_moment_matrix(&moved, j).unwrap();
            let predicted = &k * before.entries() * k.transpose();
            let scale = after.scale().max(before.scale());
            assert!(
                cmax(&(after.entries() - &predicted)) < 1e-9 * scale,
                "J={j}"
            );
            for a in j.up_to() {
                for b in j.up_to() {
                    let ka = spin_rep(&s, a).entries.map(|x| C64::new(x, 0.0));
                    let kb = spin_rep(&s, b).entries.map(|x| C64::new(x, 0.0));
                    let block = &ka * before.block(a, b) * kb.transpose();
                    assert!(cmax(&(after.block(a, b) - block)) < 1e-9 * scale);
                }
            }
            let v1 = check_psd(&before, DEFAULT_PSD_TOL).unwrap().verdict;
            let v2 = check_psd(&after, DEFAULT_PSD_TOL).unwrap().verdict;
            assert_eq!(v1, v2, "verdict changed at J={j}");
        }
    }
}

#[test]
fn identity_leaves_table_alone() {
    let g = GaussianState::new([0.2, -0.4], [[0.9, 0.3], [0.3, 0.7]]).unwrap();
    let t = gaussian_moments(&g, 6, 1.0).unwrap();
    assert_eq!(
        transform_moments(&t, &SymplecticMap::identity()).unwrap(),
        t
    );
}

fn assert_tables_close(a: &MomentTable, b: &MomentTable, tol: f64) {
    assert_eq!(a.max_order(), b.max_order());
    for (idx, v) in a.moments() {
        let w = b.get(idx.m, idx.n).unwrap();
        assert!((v - w).abs() <= tol * v.abs().max(1.0), "{idx}: {v} vs {w}");
    }
}

#[test]
fn vacuum_is_rotation_invariant() {
    let h = 1.0;
    let vac = gaussian_moments(&GaussianState::vacuum(h), 8, h).unwrap();
    for theta in [0.3, 1.0, 2.5] {
        let rotated = transform_moments(&vac, &SymplecticMap::rotation(theta)).unwrap();
        assert_tables_close(&rotated, &vac, 1e-12);
    }
}

#[test]
fn squeezed_vacuum_matches_gaussian_route() {
    let h = 1.0;
    let lam: f64 = 1.6;
    let vac = gaussian_moments(&GaussianState::vacuum(h), 6, h).unwrap();
    let s = SymplecticMap::squeeze(lam).unwrap();
    let moved = transform_moments(&vac, &s).unwrap();
    assert!((moved.get(2, 0).unwrap() - lam * lam * h / 2.0).abs() < 1e-14);
    assert!((moved.get(0, 2).unwrap() - h / (2.0 * lam * lam)).abs() < 1e-14);
    assert_eq!(moved.get(1, 1).unwrap(), 0.0);
    let squeezed = GaussianState::new(
        [0.0, 0.0],
        [[lam * lam * h / 2.0, 0.0], [0.0, h / (2.0 * lam * lam)]],
    )
    .unwrap();
    assert_tables_close(&moved, &gaussian_moments(&squeezed, 6, h).unwrap(), 1e-12);
}

#[test]
fn general_gaussian_transform_matches_covariance_route() {
    // S V S^T and S mu give the moments of the transformed Gaussian
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let g = random_gaussian(&mut rng, 1.0, true);
        let s = random_symplectic(&mut rng);
        let m = s.as_matrix();
        let cov = g.covariance();
        let v =
            m * nalgebra::Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]) * m.transpose();
        let mu = m * nalgebra::Vector2::new(g.mean()[0], g.mean()[1]);
        let direct = GaussianState::new(
            [mu[0], mu[1]],
            [[v[(0, 0)], v[(0, 1)]], [v[(0, 1)], v[(1, 1)]]],
        )
        .unwrap();
        let via_rep = transform_moments(&gaussian_moments(&g, 6, 1.0).unwrap(), &s).unwrap();
        assert_tables_close(&via_rep, &gaussian_moments(&direct, 6, 1.0).unwrap(), 1e-9);
    }
}
