//! Properties of the bundled D2+ system: bound levels, the initial packet,
//! free evolution, dissociation accounting and symmetries of the dynamics.

use std::sync::OnceLock;

use num_complex::Complex64;
use vibchess::config::RunConfig;
use vibchess::grid::{ChannelField, TwoChannelState};
use vibchess::model::{coupling_matrix, predict_interference_times};
use vibchess::parallel::Executor;
use vibchess::propagator::{dissociation_yield, DissociationLedger, PropagationConfig, SplitOperator};
use vibchess::pulse::LaserPulse;
use vibchess::run::Simulation;
use vibchess::scan::{chessboard_contrast, control_row, control_scan, BoundPacket, ScanRange};
use vibchess::units::{fs_to_au, HARTREE_CM, HARTREE_EV};

fn sim() -> &'static Simulation {
    static SIM: OnceLock<Simulation> = OnceLock::new();
    SIM.get_or_init(|| Simulation::build(RunConfig::default()).expect("default system"))
}

fn wrap(x: f64) -> f64 {
    (x + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
}

#[test]
fn bound_levels_match_spectroscopy() {
    let e = sim().basis.energies();
    // D0(D2+) = 21711.6 cm-1 and Delta G(1/2) = 1577 cm-1 from the spectroscopic literature
    assert!((-e[0] * HARTREE_EV - 2.6919).abs() < 5e-3, "D0 = {} eV", -e[0] * HARTREE_EV);
    assert!(((e[1] - e[0]) * HARTREE_CM - 1577.0).abs() < 3.0, "fundamental {} cm-1", (e[1] - e[0]) * HARTREE_CM);
    assert!((25..=29).contains(&e.len()), "{} bound levels", e.len());
    // fewer bound levels than requested means the whole bound manifold was found
    assert!(sim().basis.truncated());
}

#[test]
fn anharmonic_constants_and_interference_times() {
    let fit = sim().basis.fit_anharmonic().unwrap();
    assert!((fit.omega_e - 0.007).abs() < 0.1 * 0.007, "omega_e = {}", fit.omega_e);
    assert!(fit.omega_e_x_e > 0.0 && fit.omega_e_x_e < 0.05 * fit.omega_e);
    let t = predict_interference_times(&fit);
    assert!((t.fractional_revival_fs - 280.0).abs() < 28.0, "{}", t.fractional_revival_fs);
    assert!((t.parity_flip_interval_fs - 11.0).abs() < 2.0, "{}", t.parity_flip_interval_fs);
}

#[test]
fn eigenstates_are_orthonormal_and_centred() {
    let b = &sim().basis;
    let s0 = b.state(0).unwrap();
    let s1 = b.state(1).unwrap();
    assert!((s0.norm_squared() - 1.0).abs() < 1e-10);
    assert!(s0.inner_product(&s1).unwrap().norm() < 1e-8);
    let r0 = s0.expectation_position().unwrap();
    assert!((r0 - 2.0).abs() < 0.1, "<R>_0 = {r0}");
}

#[test]
fn initial_packet() {
    let s = sim();
    let r = s.pump.state.g.expectation_position().unwrap();
    assert!((r - 1.4).abs() < 0.05, "<R> = {r}");
    assert!((s.pump.state.norm_squared() - 1.0).abs() < 1e-12);
    let p = s.pump.populations();
    let peak = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    assert!((1..=3).contains(&peak), "peak at n = {peak}");
    let low: f64 = p[..=9].iter().sum();
    assert!(p[0] > 0.01 && low > 0.85, "n <= 9 holds {low}");
    assert!(p.windows(2).skip(peak).all(|w| w[1] < w[0]), "tail not monotone: {p:?}");
    assert!(chessboard_contrast(&p).unwrap().abs() < 0.4);
    // a small share of the neutral packet lies above the dissociation limit
    let bound: f64 = p.iter().sum();
    assert!(bound > 0.98 && bound < 1.0, "{bound}");
}

#[test]
fn eigenstates_only_acquire_phase() {
    let s = sim();
    let b = &s.basis;
    let mut prop = SplitOperator::new(&s.ops, 0.5, None);
    for n in [0, 3, 8] {
        let mut state = TwoChannelState::on_gerade(b.state(n).unwrap());
        prop.run(&mut state, 0.0, 1000, &|_| 0.0, 1000, None).unwrap();
        let c = b.project(&state).unwrap();
        assert!((c[n].norm() - 1.0).abs() < 1e-6, "n = {n}: {}", c[n].norm());
        assert!(wrap(c[n].arg() + b.energies()[n] * 500.0).abs() < 1e-4);
    }
    // the same over 100 fs at a looser tolerance
    let t = fs_to_au(100.0);
    let steps = (t / 0.5).round() as usize;
    let mut prop = SplitOperator::new(&s.ops, t / steps as f64, None);
    let mut state = TwoChannelState::on_gerade(b.state(4).unwrap());
    prop.run(&mut state, 0.0, steps, &|_| 0.0, steps, None).unwrap();
    let c = b.project(&state).unwrap()[4];
    assert!(wrap(c.arg() + b.energies()[4] * t).abs() < 1e-3, "phase error {}", wrap(c.arg() + b.energies()[4] * t));
}

#[test]
fn bound_packet_stays_bound_without_field() {
    let s = sim();
    let c0: Vec<Complex64> = s.pump.coefficients.clone();
    let mut state = TwoChannelState::on_gerade(s.basis.synthesize(&c0));
    let norm0 = state.norm_squared();
    let mut prop = SplitOperator::new(&s.ops, 0.5, None);
    prop.run(&mut state, 0.0, 2000, &|_| 0.0, 2000, None).unwrap();
    let y = dissociation_yield(&state, &s.basis, norm0).unwrap();
    assert!(y < 1e-9, "yield {y}");
}

#[test]
fn ungerade_population_is_dissociative() {
    let s = sim();
    let grid = *s.basis.grid();
    let k = 8.0;
    let u = ChannelField::from_fn(grid, |r| Complex64::from_polar((-(r - 4.0).powi(2)).exp(), k * r));
    let mut u = u;
    u.normalize().unwrap();
    let state = TwoChannelState::new(ChannelField::zeros(grid), u).unwrap();
    assert!((dissociation_yield(&state, &s.basis, 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn probe_yield_matches_ledger() {
    let s = sim();
    let probe = LaserPulse::new(4e14, 790.0, 30.0, 5.0).unwrap();
    let cfg = PropagationConfig { absorber_fraction: 0.1, ..PropagationConfig::span(0.0, 120.0) };
    let out = vibchess::propagator::propagate(s.pump.state.clone(), &[probe], &cfg, &s.ops, None).unwrap();
    let y = dissociation_yield(&out.state, &s.basis, 1.0).unwrap();
    assert!(y > 0.0 && y < 1.0, "yield {y}");
    let ledger = DissociationLedger::new(&out.state, &s.basis, out.absorbed_flux).unwrap();
    assert!((ledger.total() - y).abs() < 1e-9, "ledger {} vs yield {y}", ledger.total());
    assert!(ledger.u_population + ledger.absorbed_flux > 0.0);
}

#[test]
fn reversed_field_restores_the_state() {
    // forward under F(t), conjugate, forward under F(t0 + t1 - t), conjugate
    let s = sim();
    let pulse = LaserPulse::new(5e13, 790.0, 15.0, 5.0).unwrap();
    let t1 = fs_to_au(30.0);
    let conj = |st: &TwoChannelState| {
        let c = |f: &ChannelField| {
            ChannelField::from_amplitudes(*f.grid(), f.amplitudes().iter().map(|a| a.conj()).collect()).unwrap()
        };
        TwoChannelState::new(c(&st.g), c(&st.u)).unwrap()
    };
    for dt in [0.5, 0.25] {
        let n = (t1 / dt).round() as usize;
        let mut prop = SplitOperator::new(&s.ops, t1 / n as f64, None);
        let mut st = s.pump.state.clone();
        prop.run(&mut st, 0.0, n, &|t| pulse.field_at(t), n, None).unwrap();
        assert!(st.populations().1 > 1e-4, "pulse must act");
        let mut back = conj(&st);
        prop.run(&mut back, 0.0, n, &|t| pulse.field_at(t1 - t), n, None).unwrap();
        let back = conj(&back);
        let err: f64 = back
            .g
            .amplitudes()
            .iter()
            .zip(s.pump.state.g.amplitudes())
            .chain(back.u.amplitudes().iter().zip(s.pump.state.u.amplitudes()))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * s.basis.grid().dr().sqrt();
        // the symmetric splitting is exactly time-reversible, so only round-off remains
        assert!(err < 1e-10, "dt = {dt}: {err:e}");
    }
}

#[test]
fn carrier_sign_does_not_change_populations() {
    let s = sim();
    let ctx = s.context().unwrap();
    let init = s.initial_packet();
    let pulse = LaserPulse::new(5e13, 790.0, 293.0, 5.0).unwrap();
    let a = control_row(&ctx, &init, &pulse).unwrap();
    let b = control_row(&ctx, &init, &pulse.negated()).unwrap();
    for n in 0..=8 {
        let (x, y) = (a.populations[n], b.populations[n]);
        assert!((x - y).abs() <= 0.01 * x.max(y), "n = {n}: {x} vs {y}");
    }
}

#[test]
fn zero_intensity_scan_keeps_the_initial_distribution() {
    let s = sim();
    let ctx = s.context().unwrap();
    let init = s.initial_packet();
    let pulse = LaserPulse::new(0.0, 790.0, 0.0, 5.0).unwrap();
    let map = control_scan(&ctx, &init, &pulse, &ScanRange::new(100.0, 300.0, 100.0).unwrap(), &Executor::new(2), None)
        .unwrap();
    let p0 = s.pump.populations();
    for row in map.completed() {
        for (x, y) in row.populations.iter().zip(&p0) {
            // splitting error mixes levels by up to about 1e-6 at dt = 0.5, falling as dt^2
            assert!((x - y).abs() < 2e-6, "tau {}: {x} vs {y}", row.tau_fs);
        }
        assert!(row.yield_ < 1e-8);
    }
    assert_eq!(map.completed().count(), 3);
}

#[test]
fn chessboard_extremes() {
    let s = sim();
    let ctx = s.context().unwrap();
    let init = s.initial_packet();
    let pulse = LaserPulse::new(5e13, 790.0, 0.0, 5.0).unwrap();
    let even = control_row(&ctx, &init, &pulse.centered_at(293.0)).unwrap();
    let odd = control_row(&ctx, &init, &pulse.centered_at(306.0)).unwrap();
    assert!(even.contrast.unwrap() > 0.6, "{:?}", even.contrast);
    assert!(odd.contrast.unwrap() < -0.6, "{:?}", odd.contrast);
    for row in [&even, &odd] {
        assert!(row.populations.iter().all(|&p| p >= 0.0));
        assert!(row.populations.iter().sum::<f64>() <= 1.0 + 1e-9);
        assert!((0.0..=1.0).contains(&row.yield_));
    }
}

#[test]
fn coupling_matrix_structure() {
    let s = sim();
    let d2 = coupling_matrix(&s.basis, &s.ops.dipole, 14).unwrap();
    for n in 0..14 {
        assert!(d2.get(n, n) > 0.0);
        for m in 0..14 {
            assert!((d2.get(n, m) - d2.get(m, n)).abs() < 1e-10 * d2.get(n, n).abs().max(1.0));
        }
    }
    for n in 0..=8 {
        let by_distance: Vec<f64> = (0..=4).filter_map(|k| d2.rows()[n].get(n + k).map(|x| x.abs())).collect();
        assert!(by_distance.windows(2).all(|w| w[1] < w[0]), "n = {n}: {by_distance:?}");
    }
    // a constant dipole turns d^2 into c^2 times the identity
    let c = 0.7;
    let flat = coupling_matrix(&s.basis, &vec![c; s.basis.grid().len()], 10).unwrap();
    for n in 0..10 {
        for m in 0..10 {
            let expect = if n == m { c * c } else { 0.0 };
            assert!((flat.get(n, m) - expect).abs() < 1e-8);
        }
    }
}

#[test]
fn model_flips_parity_between_delays() {
    let s = sim();
    let model = s.model().unwrap();
    let pulse = LaserPulse::new(5e13, 790.0, 0.0, 5.0).unwrap();
    let c = &s.pump.coefficients[..model.len()];
    let contrast = |tau: f64| {
        let a = model.apply_pulse(c, &pulse.centered_at(tau), 5.0).unwrap();
        chessboard_contrast(&a.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>()).unwrap()
    };
    let (ce, co) = (contrast(293.0), contrast(306.0));
    assert!(ce > 0.0 && co < 0.0, "{ce} {co}");
}

#[test]
fn model_single_level_spreads_to_neighbours() {
    let s = sim();
    let model = s.model().unwrap();
    // a single impulse is tridiagonal
    let mut a = vec![Complex64::new(0.0, 0.0); model.len()];
    a[4] = Complex64::new(1.0, 0.0);
    let kappa = model.kappa_matrix(0.02, std::f64::consts::PI / 0.0577).unwrap();
    let out = vibchess::model::apply_impulse(&a, 10.0, &kappa, &model.energies);
    for (n, c) in out.iter().enumerate() {
        assert_eq!(c.norm() > 0.0, (3..=5).contains(&n), "n = {n}");
    }
    // a whole pulse in the perturbative regime
    let pulse = LaserPulse::new(1e13, 790.0, 300.0, 5.0).unwrap();
    let clocks = model.clock_phases(4, &pulse, 5.0).unwrap();
    let total: f64 = clocks.iter().map(|c| c.amplitude.powi(2)).sum();
    let near: f64 = clocks.iter().filter(|c| (3..=5).contains(&c.n)).map(|c| c.amplitude.powi(2)).sum();
    assert!(near / total > 0.99, "{}", near / total);
    let off = LaserPulse::new(0.0, 790.0, 300.0, 5.0).unwrap();
    for c in model.clock_phases(4, &off, 5.0).unwrap() {
        assert!(c.phase.abs() < 1e-12);
        assert!((c.amplitude - if c.n == 4 { 1.0 } else { 0.0 }).abs() < 1e-12);
    }
}

#[test]
fn packets_evolve_analytically() {
    let s = sim();
    let p = BoundPacket::new(0.0, s.pump.coefficients.clone());
    let t = fs_to_au(50.0);
    let c = p.at(t, s.basis.energies());
    let mut state = TwoChannelState::on_gerade(s.basis.synthesize(&s.pump.coefficients));
    let steps = (t / 0.5).round() as usize;
    SplitOperator::new(&s.ops, t / steps as f64, None).run(&mut state, 0.0, steps, &|_| 0.0, steps, None).unwrap();
    let grid_c = s.basis.project(&state).unwrap();
    let err = c.iter().zip(&grid_c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}
