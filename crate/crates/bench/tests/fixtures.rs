use rkls::LinearSystem;
use rkls_bench::{poly_system, unit_samples};

#[test]
fn fixtures_have_expected_shapes() {
    let x = unit_samples(5, 7, 0);
    for row in x.iter_rows() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    let (op, z) = poly_system::<f32>(20, 7, 3, 0);
    assert_eq!((op.nrows(), op.ncols()), (21, 21));
    assert_eq!(z.shape(), (21, 3));
    assert!(z.row(0).iter().all(|&v| v == 0.0));
}
