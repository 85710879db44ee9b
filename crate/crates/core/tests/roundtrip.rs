use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphwave::sphere::{decode_analytic, layouts, AnalyticMode};
use sphwave::wavelets::{forward_transform, inverse_transform};
use sphwave::{build_mesh, Band, DecodingMatrix, Family, FilterBank, Format, SubdivisionMesh};

#[test]
fn mesh_and_bank_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = build_mesh(2);
    mesh.save(&dir.path().join("mesh")).unwrap();
    let back = SubdivisionMesh::load(&dir.path().join("mesh")).unwrap();
    assert_eq!(back.vertex_counts(), mesh.vertex_counts());

    let bank = FilterBank::build(&back, Family::Interpolating).unwrap();
    bank.save(&dir.path().join("bank")).unwrap();
    let loaded = FilterBank::load(&dir.path().join("bank")).unwrap();
    assert_eq!(loaded.family, Family::Interpolating);
    for (a, b) in bank.levels().iter().zip(loaded.levels()) {
        assert_eq!(a.a, b.a);
        assert_eq!(a.p, b.p);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = DVector::from_fn(66, |_, _| rng.gen_range(-1.0..1.0));
    let coeffs = forward_transform(&loaded, &f, 2).unwrap();
    let g = inverse_transform(&loaded, &coeffs, 2).unwrap();
    assert!((f - g).amax() < 1e-9);
}

#[test]
fn decoder_csv_round_trip() {
    let layout = layouts::octahedron();
    let d = decode_analytic(&layout, 1, AnalyticMode::Pseudoinverse, 0.0)
        .unwrap()
        .with_band(Band::Hf);
    let back = DecodingMatrix::parse_csv(&d.to_csv()).unwrap();
    assert_eq!(back.format, Format::Ambisonics { order: 1 });
    assert_eq!(back.band, Band::Hf);
    assert_eq!(back.gains, d.gains);
}
