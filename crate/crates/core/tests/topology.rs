mod common;

use std::collections::BTreeSet;

use nlfem::cmap::{build_cmap, CellId, Generators, Law, NULL};
use nlfem::geometry::Point;
use nlfem::harness::mesh::generate_mesh;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use common::{brute_neighbors, brute_orbit, scrambled_mesh};

#[test]
fn orbits_and_neighbours_match_brute_force_on_random_meshes() {
    let started = std::time::Instant::now();
    let mut rng = Pcg64Mcg::seed_from_u64(2024);
    for _ in 0..50 {
        let mesh = scrambled_mesh(&mut rng);
        let m = mesh.to_cmap().unwrap();
        assert!(m.validate().is_empty(), "{:?}", m.validate());
        let n = m.dim();
        let darts: Vec<u32> = (0..40).map(|_| rng.gen_range(0..m.dart_count() as u32)).collect();
        for &d in &darts {
            assert_eq!(m.orbit(d, Generators::Vertex).unwrap(), brute_orbit(&m, d, 0));
            for i in 1..=n {
                assert_eq!(m.orbit(d, Generators::Cell(i)).unwrap(), brute_orbit(&m, d, i), "{i}-cell of dart {d}");
            }
        }
        for t in 0..m.element_count() {
            let walked: BTreeSet<usize> =
                m.neighbor_ncells(CellId::new(n, t)).unwrap().map(|c| c.index as usize).collect();
            let want = brute_neighbors(&m, t);
            assert_eq!(walked, want);
            let direct: BTreeSet<usize> =
                m.facet_neighbors(t).iter().take(n + 1).filter(|&&u| u != u32::MAX).map(|&u| u as usize).collect();
            assert_eq!(direct, want);
        }
    }
    assert!(started.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn cells_are_orbits() {
    let m = generate_mesh(3, 2, 0.3).unwrap().to_cmap().unwrap();
    for i in 1..=3 {
        for c in 0..m.cell_count(i) {
            let cell = CellId::new(i, c);
            let orbit = m.orbit(m.dart_of(cell), Generators::Cell(i)).unwrap();
            assert!(orbit.iter().all(|&d| m.cell_of(i, d) == cell));
            let members = (0..m.dart_count() as u32).filter(|&d| m.cell_of(i, d) == cell).count();
            assert_eq!(orbit.len(), members);
        }
    }
}

#[test]
fn broken_beta2_link_is_one_involution_violation() {
    for dim in [2, 3] {
        let mut m = generate_mesh(dim, 3, 0.3).unwrap().to_cmap().unwrap();
        let d = (0..m.dart_count() as u32).find(|&d| m.beta(2, d) != NULL).unwrap();
        m.set_beta(2, d, NULL);
        let v = m.validate();
        assert_eq!(v.iter().filter(|x| x.law == Law::Involution).count(), 1, "{dim}D: {v:?}");
    }
}

#[test]
fn single_simplex_has_no_links() {
    let pts = [Point::zeros(), Point::x(), Point::y(), Point::z()];
    let m = build_cmap(3, &pts, &[[0usize, 1, 2, 3]], &[nlfem::cmap::Region::Interior]).unwrap();
    assert_eq!(m.dart_count(), 12);
    assert!((0..12).all(|d| m.beta(3, d) == NULL));
    assert!(m.validate().is_empty());
}
