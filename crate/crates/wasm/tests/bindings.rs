use optolink_wasm::{capacity_curve_checked, pv_curve_checked, stimulation_pulse_checked};

#[test]
fn capacity_curve_peaks_at_850() {
    let c = capacity_curve_checked(600.0, 1000.0, 5.0).unwrap();
    assert_eq!(c.wavelengths_nm().len(), 81);
    assert_eq!(c.capacity_mw().len(), 81);
    assert_eq!(c.optimum_nm(), 850.0);
    assert!((c.optimum_mw() - 27.16).abs() < 0.3);
}

#[test]
fn capacity_curve_rejects_bad_grid() {
    assert!(capacity_curve_checked(700.0, 600.0, 1.0).is_err());
}

#[test]
fn pv_curve_spans_short_circuit_to_open_circuit() {
    let c = pv_curve_checked(30.0, 101).unwrap();
    let v = c.voltage();
    assert_eq!(v.len(), 101);
    assert_eq!(v[0], 0.0);
    assert!((v[100] - c.open_circuit_voltage()).abs() < 1e-9);
    assert!((c.mpp_voltage() - 4.7).abs() < 0.1);
    let best = c.power_mw().iter().cloned().fold(0.0, f64::max);
    assert!(best <= c.mpp_power_mw() + 1e-9);
    assert!(pv_curve_checked(-1.0, 10).is_err());
}

#[test]
fn pulse_plateau_into_resistor() {
    let p = stimulation_pulse_checked(250.0, 500.0, 0.08, 10.0, 0.0, 0.0).unwrap();
    assert!((p.peak_voltage() - 2.70).abs() < 0.02);
    assert!(p.net_charge_nc().abs() < 1.0);
    assert_eq!(p.time_us().len(), p.voltage().len());
    let clipped = stimulation_pulse_checked(400.0, 500.0, 0.08, 10.0, 0.0, 0.0).unwrap();
    assert!(clipped.compliance_samples() > 0);
}

#[test]
fn pulse_into_randles_load() {
    let p = stimulation_pulse_checked(100.0, 200.0, 0.0, 1.5, 1000.0, 58.7).unwrap();
    assert!(p.peak_voltage() > 0.15 && p.peak_voltage() < 2.7);
}
