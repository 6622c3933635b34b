//! Property tests for the crate-wide invariants.

use proptest::prelude::*;

use fourier_mask::codec::{encode_mask, EncoderConfig};
use fourier_mask::fourier::{
    fourier_features, fourier_mapping, make_grid, mapping_row, presigmoid_sums, synthesize_mask,
    CoefficientField, MaskRaster,
};
use fourier_mask::lattice::{coefficient_count, FrequencyLattice};
use fourier_mask::metrics::soft_iou;

fn raster_strategy(h: usize, w: usize) -> impl Strategy<Value = MaskRaster> {
    proptest::collection::vec(0.0..=1.0f64, h * w)
        .prop_map(move |v| MaskRaster::new(h, w, v).expect("values in range"))
}

fn binary_raster_strategy(h: usize, w: usize) -> impl Strategy<Value = MaskRaster> {
    proptest::collection::vec(proptest::bool::ANY, h * w).prop_map(move |bits| {
        MaskRaster::new(h, w, bits.into_iter().map(f64::from).collect()).expect("binary values")
    })
}

proptest! {
    #[test]
    fn lattice_formula_matches_enumeration(f in 0u32..=16) {
        let mut count = 0usize;
        for u in 0..=f as i32 {
            for v in -(f as i32)..=f as i32 {
                if !(u == 0 && v < 0) {
                    count += 1;
                }
            }
        }
        prop_assert_eq!(coefficient_count(f), count);
        prop_assert_eq!(FrequencyLattice::build(f).len(), count);
    }

    #[test]
    fn mapping_is_periodic(
        f in 0u32..=6,
        x in 0.0..1.0f64,
        y in 0.0..1.0f64,
        dx in -3i32..=3,
        dy in -3i32..=3,
    ) {
        let lattice = FrequencyLattice::build(f);
        let base = mapping_row((x, y), &lattice);
        let shifted = mapping_row((x + dx as f64, y + dy as f64), &lattice);
        for (a, b) in base.iter().zip(&shifted) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn synthesized_values_stay_in_open_unit_interval(
        f in 0u32..=3,
        h in 1usize..=6,
        w in 1usize..=6,
        seedling in proptest::collection::vec(-20.0..20.0f64, 0..98),
    ) {
        let lattice = FrequencyLattice::build(f);
        let n = 2 * lattice.len();
        let mut coeffs = vec![0.0; n];
        for (slot, v) in coeffs.iter_mut().zip(&seedling) {
            *slot = *v;
        }
        let field = CoefficientField::global(f, coeffs).expect("sized above");
        let grid = make_grid(h, w, 1).expect("small grid");
        let mapping = fourier_mapping(&grid, &lattice);
        let features = fourier_features(&mapping, &field).expect("shapes match");
        let raster = synthesize_mask(&features, h, w).expect("shapes match");
        for &v in raster.values() {
            prop_assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn doubling_coefficients_doubles_presigmoid_sums(
        f in 0u32..=3,
        values in proptest::collection::vec(-5.0..5.0f64, 98),
    ) {
        let lattice = FrequencyLattice::build(f);
        let n = 2 * lattice.len();
        let coeffs = values[..n].to_vec();
        let doubled: Vec<f64> = coeffs.iter().map(|v| 2.0 * v).collect();
        let grid = make_grid(4, 4, 1).expect("small grid");
        let mapping = fourier_mapping(&grid, &lattice);
        let a = fourier_features(&mapping, &CoefficientField::global(f, coeffs).unwrap()).unwrap();
        let b = fourier_features(&mapping, &CoefficientField::global(f, doubled).unwrap()).unwrap();
        for (x, y) in presigmoid_sums(&a).iter().zip(presigmoid_sums(&b)) {
            prop_assert_eq!(2.0 * x, y);
        }
    }

    #[test]
    fn soft_iou_is_symmetric_and_bounded(
        a in raster_strategy(4, 5),
        b in raster_strategy(4, 5),
    ) {
        let ab = soft_iou(&a, &b).expect("shapes match");
        let ba = soft_iou(&b, &a).expect("shapes match");
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn soft_iou_equals_set_iou_on_binary_masks(
        a in binary_raster_strategy(5, 5),
        b in binary_raster_strategy(5, 5),
    ) {
        let inter = a
            .values()
            .iter()
            .zip(b.values())
            .filter(|(x, y)| **x == 1.0 && **y == 1.0)
            .count();
        let union = a
            .values()
            .iter()
            .zip(b.values())
            .filter(|(x, y)| **x == 1.0 || **y == 1.0)
            .count();
        let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        prop_assert_eq!(soft_iou(&a, &b).expect("shapes match"), expected);
    }

    #[test]
    fn binary_masks_roundtrip_every_format(
        mask in binary_raster_strategy(6, 4),
        format in prop_oneof![Just("pgm"), Just("txt"), Just("rle.json")],
    ) {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join(format!("m.{format}"));
        fourier_mask::maskio::save_mask(&mask, &path, false).expect("save");
        let back = fourier_mask::maskio::load_mask(&path).expect("load");
        prop_assert_eq!(back.values(), mask.values());
    }

    #[test]
    fn encoding_scales_exactly_across_power_of_two_alphas(
        mask in binary_raster_strategy(8, 8),
        halvings in 1u32..=3,
    ) {
        let base = encode_mask(&mask, &EncoderConfig::new(2)).expect("valid config");
        let scaled_alpha = 8.0 / (1u32 << halvings) as f64;
        let scaled =
            encode_mask(&mask, &EncoderConfig::new(2).with_alpha(scaled_alpha)).expect("valid");
        let factor = (1u32 << halvings) as f64;
        for (a, b) in base.values().iter().zip(scaled.values()) {
            prop_assert_eq!(*a, factor * b);
        }
    }
}
