use proptest::prelude::*;

use afem_ocp::fe::{interpolate_nodal, scalar_fn};
use afem_ocp::mesh::{ElementSet, Mesh};

fn boundary_length(mesh: &Mesh) -> f64 {
    mesh.boundary_edges()
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (mesh.vertices()[a], mesh.vertices()[b]);
            (x[0] - y[0]).hypot(x[1] - y[1])
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn local_refinement_invariants(
        n in 1usize..4,
        r in 1usize..4,
        seeds in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..64), 1..5),
    ) {
        let mut mesh = Mesh::unit_square(n).unwrap();
        for marks in seeds {
            let marked: ElementSet = (0..mesh.num_elements()).filter(|&t| marks[t % marks.len()]).collect();
            let (fine, refined) = mesh.refine(&marked, r).unwrap();
            prop_assert!(fine.check_conformity().is_ok());
            let tol = 1e-15 * fine.num_elements() as f64;
            prop_assert!((fine.total_area() - 1.0).abs() < tol, "area {}", fine.total_area());
            prop_assert!((boundary_length(&fine) - 4.0).abs() < tol);
            prop_assert!(fine.num_vertices() >= mesh.num_vertices());
            prop_assert!(fine.shape_regularity() >= 45.0 - 1e-9);
            for t in marked.iter() {
                prop_assert!(refined.contains(t));
            }
            // every marked element is bisected at least r times
            for t in 0..fine.num_elements() {
                let p = fine.parent(t);
                if marked.contains(p) {
                    prop_assert!(fine.generation(t) >= mesh.generation(p) + r as u32);
                }
            }
            // prolongation is exact for P1 functions
            let g = scalar_fn(|x| 3.0 * x[0] - 2.0 * x[1] + 0.5);
            let coarse = interpolate_nodal(&mesh, &g).unwrap();
            let direct = interpolate_nodal(&fine, &g).unwrap();
            let lifted = fine.prolongate(&coarse).unwrap();
            for (a, b) in lifted.values().iter().zip(direct.values()) {
                prop_assert!((a - b).abs() < 1e-13);
            }
            mesh = fine;
        }
    }

    #[test]
    fn refinement_is_deterministic(n in 1usize..4, marks in prop::collection::vec(any::<bool>(), 1..32)) {
        let mesh = Mesh::unit_square(n).unwrap();
        let marked: ElementSet = (0..mesh.num_elements()).filter(|&t| marks[t % marks.len()]).collect();
        let (a, _) = mesh.refine(&marked, 2).unwrap();
        let (b, _) = mesh.refine(&marked, 2).unwrap();
        prop_assert_eq!(a.elements(), b.elements());
        prop_assert_eq!(a.vertices(), b.vertices());
    }
}

#[test]
fn uniform_levels_quadruple_elements() {
    let mut mesh = Mesh::unit_square(2).unwrap();
    for _ in 0..4 {
        let fine = mesh.refine_uniform(2).unwrap();
        assert_eq!(fine.num_elements(), 4 * mesh.num_elements());
        let h = mesh.mesh_size_function();
        let hf = fine.mesh_size_function();
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        assert!((max(hf.values()) - 0.5 * max(h.values())).abs() < 1e-14);
        mesh = fine;
    }
    assert_eq!(mesh.num_vertices(), 33 * 33);
}
