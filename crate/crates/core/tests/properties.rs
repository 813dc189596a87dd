use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use qsim_core::graph::UnitDiskGraph;
use qsim_core::histogram::sample_shots;
use qsim_core::mitigation::{apply_error_channel, mitigate_exact, total_variation, ReadoutModel};
use qsim_core::pulse::{build_detuning_schedule, ScheduleParameterization};
use qsim_core::units::{from_mhz, C6_RB87};
use qsim_core::{
    bitstring_label, blockade_radius, evolve, make_ramp_plateau_ramp, parse_bitstring, probabilities, AtomRegister,
    BitstringHistogram, IntegratorConfig, Waveform,
};

fn distribution(n: usize) -> impl Strategy<Value = BitstringHistogram> {
    prop::collection::vec(0.001f64..1.0, 1 << n).prop_map(move |w| {
        let s: f64 = w.iter().sum();
        BitstringHistogram::exact(n, w.iter().map(|x| x / s).collect()).unwrap()
    })
}

/// Atoms on a line with gaps of at least 4 μm.
fn line_register(max_atoms: usize) -> impl Strategy<Value = AtomRegister> {
    prop::collection::vec(4.0f64..12.0, 1..max_atoms).prop_map(|gaps| {
        let mut x = 0.0;
        let mut pos = vec![[0.0, 0.0]];
        for g in gaps {
            x += g;
            pos.push([x, 0.0]);
        }
        AtomRegister::new(pos).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_is_unitary(
        reg in line_register(5),
        omega in 0.5f64..2.5,
        delta in -10.0f64..10.0,
        total in 0.3f64..1.5,
    ) {
        let delta = Waveform::new(vec![(0.0, from_mhz(-delta)), (total, from_mhz(delta))]).unwrap();
        let s = make_ramp_plateau_ramp(from_mhz(omega), 0.1, total - 0.2, 0.1, Some(delta)).unwrap();
        let state = evolve(&reg, &s, &IntegratorConfig::default()).unwrap();
        prop_assert!((state.norm() - 1.0).abs() <= 1e-8);
        assert_abs_diff_eq!(probabilities(&state).total_probability(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn relabelling_atoms_relabels_outcomes(reg in line_register(4), omega in 0.5f64..2.5) {
        let n = reg.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let s = make_ramp_plateau_ramp(from_mhz(omega), 0.1, 0.6, 0.1, None).unwrap();
        let cfg = IntegratorConfig::default();
        let a = probabilities(&evolve(&reg, &s, &cfg).unwrap());
        let b = probabilities(&evolve(&reg.permuted(&perm).unwrap(), &s, &cfg).unwrap());
        let shifted = probabilities(&evolve(&reg.translated(13.0, -2.0), &s, &cfg).unwrap());
        for x in 0..1u64 << n {
            let y = (0..n).fold(0u64, |acc, j| acc | ((x >> perm[j] & 1) << j));
            prop_assert!((a.probability(x) - b.probability(y)).abs() < 1e-12);
            prop_assert!((a.probability(x) - shifted.probability(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_mitigation_inverts_the_channel(p in (1usize..5).prop_flat_map(distribution), eps in 0.0f64..0.3) {
        let model = ReadoutModel::new(eps).unwrap();
        let noisy = apply_error_channel(&p, model).unwrap();
        assert_abs_diff_eq!(noisy.total_probability(), 1.0, epsilon = 1e-12);
        let back = mitigate_exact(&noisy, model).unwrap();
        prop_assert!(total_variation(&back.histogram, &p).unwrap() < 1e-10);
        prop_assert!(back.negative_mass < 1e-10);
    }

    #[test]
    fn sampling_is_seeded_and_conserves_shots(p in distribution(3), shots in 1u64..5000, seed in any::<u64>()) {
        let a = sample_shots(&p, shots, seed).unwrap();
        let b = sample_shots(&p, shots, seed).unwrap();
        prop_assert_eq!(a.shots(), shots);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bitstring_labels_round_trip(n in 1usize..20, raw in any::<u64>()) {
        let b = raw & ((1u64 << n) - 1);
        let label = bitstring_label(b, n);
        prop_assert_eq!(label.len(), n);
        prop_assert_eq!(parse_bitstring(&label).unwrap(), (b, n));
    }

    #[test]
    fn waveforms_hit_every_knot(values in prop::collection::vec(-20.0f64..20.0, 2..8), step in 0.05f64..1.0) {
        let knots: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| (k as f64 * step, v)).collect();
        let w = Waveform::new(knots.clone()).unwrap();
        for pair in knots.windows(2) {
            let (t0, v0) = pair[0];
            let (t1, v1) = pair[1];
            prop_assert!((w.value_at(t0) - v0).abs() < 1e-12);
            let mid = w.value_at(0.5 * (t0 + t1));
            prop_assert!((mid - 0.5 * (v0 + v1)).abs() < 1e-9);
            prop_assert!(mid >= v0.min(v1) - 1e-12 && mid <= v0.max(v1) + 1e-12);
        }
    }

    #[test]
    fn detuning_schedules_stay_inside_their_bounds(u in prop::collection::vec(0.0f64..1.0, 6)) {
        let spec = ScheduleParameterization::new(from_mhz(2.5), 4.0, 0.29, 0.4, (from_mhz(-6.0), from_mhz(10.0)));
        let b = spec.bounds().unwrap();
        let (lo, hi) = (b.lower(), b.upper());
        let params: Vec<f64> = u.iter().enumerate().map(|(k, x)| lo[k] + x * (hi[k] - lo[k])).collect();
        let s = build_detuning_schedule(&params, &spec).unwrap();
        let (dlo, dhi) = spec.detuning_bounds;
        prop_assert!((s.total_time() - 4.0).abs() < 1e-12);
        prop_assert!(s.delta().min_value() >= dlo - 1e-9 && s.delta().max_value() <= dhi + 1e-9);
        prop_assert!(s.omega().value_at(0.0).abs() < 1e-12 && s.omega().value_at(4.0).abs() < 1e-12);
    }

    #[test]
    fn maximum_sets_are_independent_and_maximal(edges in prop::collection::vec((0usize..9, 0usize..9), 0..20)) {
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|(a, b)| a != b).collect();
        let g = UnitDiskGraph::from_edges(9, &edges).unwrap();
        let mis = g.enumerate_max_independent_sets().unwrap();
        prop_assert!(!mis.maximum_sets.is_empty());
        for &s in &mis.maximum_sets {
            prop_assert_eq!(s.count_ones() as usize, mis.max_cardinality);
            prop_assert!(g.is_independent_set(s));
            prop_assert!(g.is_maximal(s).unwrap());
            // every subset of an independent set is independent
            prop_assert!(g.is_independent_set(s & (s - 1)));
        }
    }

    #[test]
    fn blockade_radius_shrinks_with_drive(a in 0.5f64..5.0, b in 0.5f64..5.0) {
        prop_assume!(a < b);
        let ra = blockade_radius(from_mhz(a), 0.0, C6_RB87).unwrap();
        let rb = blockade_radius(from_mhz(b), 0.0, C6_RB87).unwrap();
        prop_assert!(rb < ra);
    }
}
