use bvdp_core::tensor_mesh::{assemble_nonlocal_form_with, Mesh, NonlocalQuadrature, Side};

#[test]
fn pair_quadrature_refinement_changes_form_by_under_one_percent() {
    let mesh = Mesh::rectangle(16, 16, [0.0, 0.0], [1.0, 1.0], &[Side::Left, Side::Right]).unwrap();
    let base = NonlocalQuadrature::default();
    let t = std::time::Instant::now();
    let a = assemble_nonlocal_form_with(&mesh, 1.25, &base).unwrap();
    eprintln!("assembly: {:?}", t.elapsed());
    let b = assemble_nonlocal_form_with(&mesh, 1.25, &base.refined()).unwrap();
    let fields: [fn(f64, f64) -> f64; 3] = [
        |x, y| (x - 0.5) * (x - 0.5) + y,
        |x, y| (3.0 * x).sin() * (2.0 * y).cos(),
        |x, _| (-(x - 0.5) * (x - 0.5) / 0.02).exp(),
    ];
    for f in fields {
        let z: Vec<f64> = mesh.vertices().iter().map(|v| f(v[0], v[1])).collect();
        let (qa, qb) = (a.quad_form(&z), b.quad_form(&z));
        eprintln!("{qa} {qb}");
        assert!(qa > 0.0);
        assert!((qa - qb).abs() < 0.01 * qb, "{qa} vs {qb}");
    }
}
