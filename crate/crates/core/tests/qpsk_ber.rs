//! Monte-Carlo BER of the full chain against the closed form.

use qrnglab::qpsk::*;

fn static_link() -> LinkConfig {
    // no phase noise, so a long averaging window costs nothing
    LinkConfig {
        cpr_window: 513,
        ..LinkConfig::default()
    }
}

#[test]
fn measured_ber_within_three_sigma_of_theory() {
    for ebn0 in [4.0, 6.0, 8.0] {
        let r = ber_measure(&static_link().with_ebn0_db(ebn0), 1_000_000, 2).unwrap();
        let th = ber_theory_qpsk(ebn0);
        let z = (r.ber - th) / r.binomial_sigma(th);
        assert!(
            z.abs() < 3.0,
            "Eb/N0 {ebn0} dB: measured {} theory {th} (z = {z:.2})",
            r.ber
        );
        assert_eq!(r.n_bits, 1_000_000);
    }
}

#[test]
fn polarizations_are_statistically_alike() {
    let r = ber_measure(&static_link().with_ebn0_db(5.0), 1_000_000, 3).unwrap();
    let (a, b) = (&r.per_pol[0], &r.per_pol[1]);
    let p = r.ber;
    let z = (a.ber() - b.ber()) / (p * (1.0 - p) * (1.0 / a.n_bits as f64 + 1.0 / b.n_bits as f64)).sqrt();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn threshold_search_matches_closed_form_inversion() {
    let measured = threshold_search(FEC_THRESHOLD, &static_link(), 1_000_000, 4).unwrap();
    let theory = ebn0_for_ber(FEC_THRESHOLD).unwrap();
    assert!((measured - theory).abs() < 0.15, "measured {measured}, theory {theory}");
}

#[test]
fn decisions_invariant_under_offset_and_rotation() {
    let cfg = LinkConfig {
        esn0_db: 12.0,
        freq_offset_hz: 2e8,
        ..LinkConfig::default()
    };
    let with_offset = ber_measure(&cfg, 200_000, 5).unwrap();
    let without = ber_measure(
        &LinkConfig {
            freq_offset_hz: 0.0,
            ..cfg.clone()
        },
        200_000,
        5,
    )
    .unwrap();
    assert!(with_offset.n_errors.abs_diff(without.n_errors) <= 10 + without.n_errors / 5);
}
