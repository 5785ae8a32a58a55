//! Rigid-motion invariance of the shape measures and basic mesh contracts.

use proptest::prelude::*;
use shapeopt_core::geometry::{perimeter_gradient, SurfaceMesh};
use shapeopt_core::Error;

fn polygon(radii: &[f64]) -> Vec<[f64; 2]> {
    let n = radii.len();
    radii
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

proptest! {
    #[test]
    fn measures_are_rigid_motion_invariant(
        radii in prop::collection::vec(0.5..1.5f64, 6..30),
        angle in -3.0..3.0f64,
        shift in prop::array::uniform2(-5.0..5.0f64),
    ) {
        let nodes = polygon(&radii);
        let mesh = SurfaceMesh::closed_from_nodes(nodes.clone()).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<[f64; 2]> = nodes.iter().map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect();
        let moved = SurfaceMesh::closed_from_nodes(moved).unwrap();
        prop_assert!((mesh.perimeter() - moved.perimeter()).abs() <= 1e-12 * mesh.perimeter());
        let (a, b) = (mesh.signed_area().unwrap(), moved.signed_area().unwrap());
        prop_assert!((a - b).abs() <= 1e-11 * a.abs());
        prop_assert!(a > 0.0);
        prop_assert!((mesh.reversed().signed_area().unwrap() + a).abs() <= 1e-12 * a);
        // Translations are in the kernel of the perimeter gradient.
        let g = perimeter_gradient(&mesh.coords(), true);
        let gx: f64 = g.iter().step_by(2).sum();
        let gy: f64 = g.iter().skip(1).step_by(2).sum();
        prop_assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
    }
}

#[test]
fn clockwise_and_degenerate_meshes_are_rejected() {
    let mut nodes = polygon(&[1.0; 8]);
    nodes.reverse();
    assert!(matches!(SurfaceMesh::closed_from_nodes(nodes), Err(Error::InvalidMesh(_))));
    let mut nodes = polygon(&[1.0; 8]);
    nodes[3] = nodes[2];
    assert!(matches!(SurfaceMesh::closed_from_nodes(nodes), Err(Error::InvalidMesh(_))));
    let s = SurfaceMesh::open_chord(&[0.0, 0.5, 1.0]).unwrap();
    assert!(matches!(s.signed_area(), Err(Error::Unsupported(_))));
}
