use optolink_core::spectral::{fresnel_reflectance, LidOptics, LinkSpectrum, MpeModel, SpectralCurve};
use proptest::prelude::*;

proptest! {
    #[test]
    fn mp_phi_increases_above_700(a in 700.0f64..1049.0, d in 0.01f64..1.0) {
        let m = MpeModel::default();
        prop_assert!(m.mp_phi(a + d, 9.0).unwrap() > m.mp_phi(a, 9.0).unwrap());
    }

    #[test]
    fn eqe_bounded_and_capacity_below_limit(nm in 600.0f64..1000.0) {
        let s = LinkSpectrum::default();
        let eqe = s.pv_eqe_scaled(nm).unwrap();
        prop_assert!((0.0..=1.0).contains(&eqe));
        let a = s.stack.junction_absorptions(nm).unwrap();
        prop_assert!(a.iter().sum::<f64>() <= 1.0 + 1e-12);
        let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((eqe - a.len() as f64 * min).abs() < 1e-12);
        prop_assert!(s.power_delivery_capacity(nm).unwrap() <= s.mp_phi(nm).unwrap());
    }

    #[test]
    fn normal_incidence_reflectance_is_symmetric(n1 in 1.0f64..3.0, n2 in 1.0f64..3.0) {
        let a = fresnel_reflectance(n1, n2, 0.0).unwrap();
        let b = fresnel_reflectance(n2, n1, 0.0).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&a));
        // scalar closed form
        prop_assert!((a - ((n1 - n2) / (n1 + n2)).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn oblique_reflectance_matches_stokes_form(n2 in 1.1f64..3.0, angle in 0.5f64..85.0) {
        // Fresnel in the sin/tan form, independent of the cosine form used by the crate
        let ti = angle.to_radians();
        let tt = (ti.sin() / n2).asin();
        let rs = ((ti - tt).sin() / (ti + tt).sin()).powi(2);
        let rp = ((ti - tt).tan() / (ti + tt).tan()).powi(2);
        let r = fresnel_reflectance(1.0, n2, angle).unwrap();
        prop_assert!((r - 0.5 * (rs + rp)).abs() < 1e-12);
    }

    #[test]
    fn lid_transmission_ignores_thickness(t in 1.0f64..5000.0, angle in 0.0f64..20.0) {
        let a = LidOptics::aqueous_diamond_air(angle);
        let b = LidOptics { thickness_um: t, ..a };
        prop_assert_eq!(a.transmission().unwrap(), b.transmission().unwrap());
    }

    #[test]
    fn optimum_invariant_under_curve_scaling(k in 0.05f64..0.99) {
        let s = LinkSpectrum::default();
        let scaled = LinkSpectrum {
            eye_transmission: SpectralCurve::new(
                s.eye_transmission.samples().map(|(x, y)| (x, k * y)).collect(),
            )
            .unwrap(),
            ..s.clone()
        };
        let a = s.optimum_wavelength(600.0, 1000.0, 2.0).unwrap();
        let b = scaled.optimum_wavelength(600.0, 1000.0, 2.0).unwrap();
        prop_assert_eq!(a.wavelength_nm, b.wavelength_nm);
    }
}
