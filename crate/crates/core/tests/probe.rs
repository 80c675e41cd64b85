//! Probe-delay scans: agreement of the two propagation routes and limiting cases.

use std::sync::OnceLock;

use num_complex::Complex64;
use vibchess::config::RunConfig;
use vibchess::parallel::Executor;
use vibchess::pulse::LaserPulse;
use vibchess::run::Simulation;
use vibchess::scan::{probe_scan, probe_scan_with, BoundPacket, ProbeMethod, ProbeSetup, ProbeTransfer, ScanRange};
use vibchess::spectrum::{beat_spectrum, SpectrumOptions};

fn sim() -> &'static Simulation {
    static SIM: OnceLock<Simulation> = OnceLock::new();
    SIM.get_or_init(|| Simulation::build(RunConfig::default()).expect("default system"))
}

fn transfer() -> &'static ProbeTransfer {
    static T: OnceLock<ProbeTransfer> = OnceLock::new();
    T.get_or_init(|| {
        let ctx = sim().context().unwrap();
        ProbeTransfer::compute(&ctx, &probe(), &Executor::new(2)).expect("transfer matrix")
    })
}

fn probe() -> LaserPulse {
    LaserPulse::new(4e14, 790.0, 0.0, 5.0).unwrap()
}

fn setup(control: Option<LaserPulse>, probe: LaserPulse, range: ScanRange, method: ProbeMethod) -> ProbeSetup {
    ProbeSetup { initial: sim().initial_packet(), control, probe, range, method }
}

#[test]
fn direct_and_transfer_routes_agree() {
    let s = sim();
    let ctx = s.context().unwrap();
    let exec = Executor::new(2);
    let control = LaserPulse::new(5e13, 790.0, 293.0, 5.0).unwrap();
    // the 305 fs probe window overlaps the control window, the others follow it
    let range = ScanRange::new(305.0, 425.0, 40.0).unwrap();
    assert_eq!(range.len(), 4);
    let direct = probe_scan(&ctx, &setup(Some(control), probe(), range, ProbeMethod::Direct), &exec, None).unwrap();
    let st = setup(Some(control), probe(), range, ProbeMethod::Transfer);
    let transfer = probe_scan_with(&ctx, &st, Some(transfer()), &exec, None).unwrap();
    assert!(direct.failures.is_empty() && transfer.failures.is_empty());
    assert_eq!(direct.control_yield, transfer.control_yield);
    assert!(direct.control_yield > 0.0);
    for i in 0..range.len() {
        let (a, b) = (direct.yields[i], transfer.yields[i]);
        assert!(a > 1e-3, "tau' = {}: yield {a}", direct.tau_prime_fs[i]);
        assert!((a - b).abs() < 1e-9, "tau' = {}: {a} vs {b}", direct.tau_prime_fs[i]);
    }
}

#[test]
fn probe_must_follow_control() {
    let s = sim();
    let ctx = s.context().unwrap();
    let control = LaserPulse::new(5e13, 790.0, 293.0, 5.0).unwrap();
    let range = ScanRange::new(290.0, 300.0, 5.0).unwrap();
    let r = probe_scan(&ctx, &setup(Some(control), probe(), range, ProbeMethod::Direct), &Executor::sequential(), None);
    assert!(r.is_err());
}

#[test]
fn zero_probe_gives_zero_yield() {
    let s = sim();
    let ctx = s.context().unwrap();
    let silent = probe().with_intensity(0.0);
    let range = ScanRange::new(310.0, 330.0, 10.0).unwrap();
    for method in [ProbeMethod::Direct, ProbeMethod::Transfer] {
        let ys = probe_scan(&ctx, &setup(None, silent, range, method), &Executor::new(2), None).unwrap();
        assert_eq!(ys.control_yield, 0.0);
        for y in &ys.yields {
            assert!(y.abs() < 1e-6, "{method:?}: {y}");
        }
    }
}

#[test]
fn single_level_has_no_beats() {
    let s = sim();
    let ctx = s.context().unwrap();
    let exec = Executor::new(2);
    let mut c = vec![Complex64::new(0.0, 0.0); s.basis.len()];
    c[3] = Complex64::new(1.0, 0.0);
    let range = ScanRange::new(310.0, 660.0, 1.0).unwrap();
    let st = ProbeSetup {
        initial: BoundPacket::new(0.0, c),
        control: None,
        probe: probe(),
        range,
        method: ProbeMethod::Transfer,
    };
    let ys = probe_scan_with(&ctx, &st, Some(transfer()), &exec, None).unwrap();
    let level = ys.yields[0];
    assert!(level > 1e-3, "{level}");
    let spread = ys.yields.iter().map(|y| (y - level).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-12 * level.max(1.0), "{spread}");
    let spec = beat_spectrum(&ys.tau_prime_fs, &ys.yields, &SpectrumOptions::default()).unwrap();
    let top = spec.amplitudes().into_iter().skip(1).fold(0.0, f64::max);
    assert!(top < 1e-10, "largest beat amplitude {top}");
}

#[test]
fn even_control_favours_even_pairs() {
    let s = sim();
    let ctx = s.context().unwrap();
    let exec = Executor::new(2);
    let control = LaserPulse::new(5e13, 790.0, 293.0, 5.0).unwrap();
    let range = ScanRange::new(330.0, 1330.0, 1.0).unwrap();
    let ys = probe_scan_with(
        &ctx,
        &setup(Some(control), probe(), range, ProbeMethod::Transfer),
        Some(transfer()),
        &exec,
        None,
    )
    .unwrap();
    let spec = beat_spectrum(&ys.tau_prime_fs, &ys.yields, &SpectrumOptions::default()).unwrap();
    let e = s.basis.energies();
    let half = 0.5 * spec.resolution_au();
    let strength = |n: usize| spec.max_near(e[n + 2] - e[n], half);
    let even: f64 = [2, 4, 6].iter().map(|&n| strength(n)).sum();
    let odd: f64 = [1, 3, 5].iter().map(|&n| strength(n)).sum();
    assert!(even > 2.0 * odd, "even {even} odd {odd}");
}
