use proptest::prelude::*;
use sched_core::nonlinearity::SectorMap;
use sched_core::rng;

fn sector_maps() -> Vec<SectorMap> {
    vec![
        SectorMap::Identity,
        SectorMap::log_quantizer(1.0 / 1024.0).unwrap(),
        SectorMap::log_quantizer(1.0 / 16.0).unwrap(),
        SectorMap::log_quantizer(1.0).unwrap(),
        SectorMap::saturation(3.0, 0.05).unwrap(),
    ]
}

#[test]
fn sector_bounds_hold_exactly_on_random_inputs() {
    let mut r = rng::seeded(2024);
    for map in sector_maps() {
        let (kappa, big_k) = map.sector_bounds().unwrap();
        for _ in 0..100_000 {
            let u = rng::uniform(&mut r, -1e6, 1e6);
            if u == 0.0 {
                continue;
            }
            let ratio = map.apply(u) / u;
            assert!(kappa <= ratio && ratio <= big_k, "{map:?} at {u}: {ratio}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn maps_are_odd_bit_exactly(u in -1e6f64..1e6) {
        for map in sector_maps().into_iter().chain([SectorMap::uniform_quantizer(0.0625).unwrap()]) {
            prop_assert_eq!(map.apply(-u).to_bits(), (-map.apply(u)).to_bits());
        }
    }

    #[test]
    fn sector_maps_preserve_sign(u in -1e6f64..1e6) {
        prop_assume!(u != 0.0);
        for map in sector_maps() {
            prop_assert!(u * map.apply(u) > 0.0);
        }
    }

    #[test]
    fn log_quantizer_lands_on_grid(u in 1e-6f64..1e6) {
        let rho = 1.0 / 128.0;
        let q = SectorMap::log_quantizer(rho).unwrap().apply(u);
        let level = q.ln() / rho;
        prop_assert!((level - level.round()).abs() < 1e-6);
    }
}
