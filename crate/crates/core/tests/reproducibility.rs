use sha2::{Digest, Sha256};

use afem_ocp::adapt::{afem_loop, AdaptOptions, AdaptiveHistory};
use afem_ocp::control::SolverOptions;
use afem_ocp::fe::{interpolate_nodal, scalar_fn};
use afem_ocp::mesh::{ElementSet, Mesh};
use afem_ocp::problems::example1;
use afem_ocp::vtk::{to_vtk, Field};

fn short_run() -> AdaptiveHistory {
    let opts = AdaptOptions {
        max_dofs: None,
        max_iters: Some(8),
        ..AdaptOptions::default()
    };
    afem_loop(&example1(), &opts, &SolverOptions::default()).unwrap().history
}

#[test]
fn history_csv_is_bitwise_reproducible() {
    let a = short_run().to_csv(false);
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| short_run().to_csv(false));
    assert_eq!(a, b);
    let back = AdaptiveHistory::read_csv(a.as_bytes()).unwrap();
    assert_eq!(back.to_csv(false), a);
    assert_eq!(back.len(), 8);
}

#[test]
fn csv_file_roundtrip() {
    let h = short_run();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    h.write_csv(&mut std::fs::File::create(&path).unwrap(), true).unwrap();
    let back = AdaptiveHistory::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.records.len(), h.records.len());
    assert_eq!(back.records[3].eta, h.records[3].eta);
    assert_eq!(back.records[3].err_u, h.records[3].err_u);
}

/// Frozen snapshot of a small refined mesh with fixed fields. A change in
/// the digest means the VTK layout or the refinement changed.
#[test]
fn vtk_snapshot_checksum() {
    let mut marked = ElementSet::new();
    marked.insert(0);
    marked.insert(5);
    let (mesh, _) = Mesh::unit_square(2).unwrap().refine(&marked, 1).unwrap();
    let y = interpolate_nodal(&mesh, &scalar_fn(|x| x[0] - 0.5 * x[1])).unwrap();
    let eta: Vec<f64> = (0..mesh.num_elements()).map(|t| mesh.area(t)).collect();
    let text = to_vtk(&mesh, "snapshot", &[Field { name: "eta", values: &eta }], &[Field { name: "y", values: y.values() }]).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0\nsnapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, FROZEN_VTK_DIGEST, "{text}");
}

const FROZEN_VTK_DIGEST: &str = "038be0db8723c1d222d37892941066fc3c6e0d279289f4e13bdacec9567426e7";
