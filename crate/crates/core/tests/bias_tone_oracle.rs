//! Bias-tone harmonics against a Bessel-expansion oracle.

use qrnglab::modulator::{bias_tone_spectrum, ModulatorConfig};

#[test]
fn harmonics_match_oracle_within_0_1_db() {
    let csv = include_str!("fixtures/bias_tone_oracle.csv");
    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let (shift, amp, k, want) = (f[0], f[1], f[2] as usize, f[3]);
        let cfg = ModulatorConfig {
            bias_shift_v: shift * ModulatorConfig::pmiq_2020().v_pi,
            ..ModulatorConfig::pmiq_2020()
        };
        let table = bias_tone_spectrum(&cfg, amp * cfg.v_pi, 10e3, true).unwrap();
        let got = table.power_dbc(k).unwrap();
        assert!(
            (got - want).abs() < 0.1,
            "shift {shift} amp {amp} k {k}: {got} vs {want}"
        );
        checked += 1;
    }
    assert_eq!(checked, 30);
}
