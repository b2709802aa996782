use optolink_core::analog::{interface_digitize, photodiode_current, pv_transient, InterfaceCircuit, Load, Photodiode, PvModel};
use optolink_core::Waveform;
use proptest::prelude::*;

fn diode_current(m: &PvModel, v: f64, p: f64) -> f64 {
    let scale = m.n_junctions as f64 * m.ideality * m.thermal_voltage;
    m.i_ph_per_mw * p - m.i0_ma * ((v / scale).exp() - 1.0)
}

proptest! {
    #[test]
    fn electrical_power_never_exceeds_optical(p in 0.5f64..40.0, frac in 0.0f64..1.0) {
        let m = PvModel::default();
        let v = frac * m.open_circuit_voltage(p);
        prop_assert!(v * m.current(v, p) <= p);
        prop_assert!(m.max_power_point(p, None).unwrap().power_mw <= p);
    }

    #[test]
    fn mpp_is_the_global_maximum_of_a_dense_scan(p in 0.5f64..40.0) {
        let m = PvModel::default();
        let mpp = m.max_power_point(p, None).unwrap();
        let voc = m.open_circuit_voltage(p);
        let best = (0..=4000)
            .map(|k| {
                let v = voc * k as f64 / 4000.0;
                v * diode_current(&m, v, p)
            })
            .fold(f64::MIN, f64::max);
        prop_assert!(mpp.power_mw >= best - 1e-9);
        prop_assert!(mpp.power_mw - best < 1e-4 * best);
    }

    #[test]
    fn resistive_operating_point_satisfies_both_equations(p in 0.5f64..40.0, r in 0.05f64..20.0) {
        let m = PvModel::default();
        let op = m.operating_point(p, Load::Resistive { kohm: r }).unwrap();
        let i_diode = diode_current(&m, op.voltage, p);
        prop_assert!((op.current_ma - i_diode).abs() <= 1e-6 * op.current_ma.abs().max(1e-9));
        prop_assert!((op.voltage - op.current_ma * r).abs() <= 1e-6 * op.voltage.abs().max(1e-9));
    }

    #[test]
    fn transient_settles_to_static_operating_point(p in 2.0f64..40.0, r in 0.3f64..5.0) {
        let m = PvModel::default();
        let light = Waveform::new(10.0, vec![p; 3000]);
        let w = pv_transient(&m, &light, r).unwrap();
        let op = m.operating_point(p, Load::Resistive { kohm: r }).unwrap();
        let v = *w.voltage.last().unwrap();
        prop_assert!((v - op.voltage).abs() < 1e-3 * op.voltage);
    }

    #[test]
    fn dc_offset_leaves_edges_unchanged(bits in prop::collection::vec(any::<bool>(), 8..24), offset in 0.0f64..0.3) {
        let c = InterfaceCircuit::default();
        let pd = Photodiode::default();
        let half = 833.3;
        let chips: Vec<bool> = bits.iter().flat_map(|&b| [!b, b]).collect();
        let n = (chips.len() as f64 * half) as usize;
        let light = Waveform::from_fn(1.0, n, |t| if chips[((t / half) as usize).min(chips.len() - 1)] { 0.14 } else { 0.10 });
        let a = interface_digitize(&c, &photodiode_current(&pd, &light).unwrap(), 3.4).unwrap().edges();
        let shifted = light.map(|p| p + offset);
        let b = interface_digitize(&c, &photodiode_current(&pd, &shifted).unwrap(), 3.4).unwrap().edges();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.rising, y.rising);
            prop_assert!((x.time_ns - y.time_ns).abs() < 1e-3);
        }
    }
}
