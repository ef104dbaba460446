//! Acceptance suite: one test per shipped claim, each printing a one-line
//! verdict. Run with `cargo test -p harmonica --test acceptance --
//! --nocapture` to see the lines.

use std::time::Instant;

use harmonica::mixture::{run_mixture, ExperimentConfig};
use harmonica_core::decomposition::{
    decompose, extract_potential, harmonicity_defect, harmonicity_defect_extension, is_harmonic,
    is_incompressible, random_game, random_harmonic, random_potential, PotentialOutcome,
};
use harmonica_core::dynamics::{
    detect_recurrence, eff_replicator_field, integrate, regret_series, volume_tracker,
    IntegrateOptions, Verdict,
};
use harmonica_core::fixtures;
use harmonica_core::game::is_non_strategic;
use harmonica_core::geometry::{
    metric_eff_inverse, replicator_divergence_analytic, shah_divergence, shah_gradient,
    shah_inner, simplex_volume_numeric, simplex_volume_shah, JacobianMode, ReplicatorFieldEff,
};
use harmonica_core::{eff_payoff_field, embed, mixed_payoff, payoff_field, reduce};
use harmonica_core::{EffProfile, Game, MixedProfile};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const SHAPES: [&[usize]; 4] = [&[2, 2], &[2, 3], &[3, 3], &[2, 2, 2]];

fn pass(n: u32, what: &str) {
    println!("acceptance {n:02} ({what}): PASS");
}

#[test]
fn acceptance_01_harmonic_iff_incompressible() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xA1);
    for (s, shape) in SHAPES.iter().enumerate() {
        for k in 0..200u64 {
            let g = random_game(shape, 10_000 * (s as u64 + 1) + k, 1.0);
            let h = decompose(&g, 1e-13, 20_000).unwrap().harmonic_game;
            assert!(is_harmonic(&h, 1e-8));
            for game in [&g, &h] {
                assert_eq!(
                    is_harmonic(game, 1e-8),
                    is_incompressible(game, 5, 1e-8),
                    "shape {shape:?} seed {k}"
                );
                for _ in 0..20 {
                    let x = MixedProfile::sample_interior(&mut rng, shape, 0.0);
                    let half_ext = 0.5 * harmonicity_defect_extension(game, &x);
                    let div = replicator_divergence_analytic(game, &x).unwrap();
                    assert!(
                        (half_ext - div).abs() <= 1e-9,
                        "extension {half_ext} vs divergence {div}"
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1} s");
    pass(1, "harmonic games are exactly the incompressible ones");
}

#[test]
fn acceptance_02_divergence_closed_form_vs_finite_difference() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xA2);
    for k in 0..20u64 {
        let shape = SHAPES[(k % 4) as usize];
        let g = random_game(shape, 20_000 + k, 1.0);
        let field = ReplicatorFieldEff { game: &g };
        for _ in 0..50 {
            let x = MixedProfile::sample_interior(&mut rng, shape, 0.02);
            let analytic = replicator_divergence_analytic(&g, &x).unwrap();
            let fd =
                shah_divergence(&field, &reduce(&x).unwrap(), JacobianMode::FiniteDifference)
                    .unwrap();
            let tol = 1e-5 * analytic.abs().max(1.0);
            assert!(
                (analytic - fd).abs() <= tol,
                "analytic {analytic} vs finite-difference {fd}"
            );
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "took {elapsed:.1} s");
    pass(2, "closed-form divergence matches the metric finite difference");
}

#[test]
fn acceptance_03_energy_is_conserved_on_harmonic_games() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xA3);
    let opts = IntegrateOptions::default(); // rtol 1e-9
    for k in 0..20u64 {
        let shape = SHAPES[(k % 4) as usize];
        let h = random_harmonic(shape, 30_000 + k, 1.0);
        let x0 = MixedProfile::sample_interior(&mut rng, shape, 0.05);
        let rec = integrate(&h, &x0, 100.0, &opts).unwrap();
        let drift = rec
            .energy
            .iter()
            .fold(0.0f64, |m, e| m.max((e - rec.energy[0]).abs()));
        assert!(drift < 1e-6, "shape {shape:?} seed {k}: drift {drift:.3e}");
    }
    // negative control: the potential fixture loses energy conservation
    let pd = fixtures::prisoners_dilemma();
    let rec = integrate(&pd, &MixedProfile::uniform(&[2, 2]), 100.0, &opts).unwrap();
    let drift = rec
        .energy
        .iter()
        .fold(0.0f64, |m, e| m.max((e - rec.energy[0]).abs()));
    assert!(drift > 1e-2, "control drift {drift:.3e}");
    pass(3, "energy drift < 1e-6 on harmonic games, large on the control");
}

#[test]
fn acceptance_04_volume_preservation() {
    let opts = IntegrateOptions::default();
    let harmonic_runs: [(Game, Vec<Vec<f64>>); 3] = [
        (fixtures::matching_pennies(), vec![vec![0.3], vec![0.35]]),
        (
            fixtures::harmonic_two_by_three(1.0, 2.0),
            vec![vec![0.4], vec![0.3, 0.35]],
        ),
        (
            random_harmonic(&[2, 2, 2], 1, 1.0),
            vec![vec![0.3], vec![0.4], vec![0.35]],
        ),
    ];
    for (g, blocks) in harmonic_runs {
        let x0 = EffProfile::new(blocks).unwrap();
        let track = volume_tracker(&g, &x0, 50.0, &opts).unwrap();
        assert!(
            track.jacobian_drift() < 1e-5,
            "jacobian drift {:.3e}",
            track.jacobian_drift()
        );
        assert!(
            track.max_method_gap() < 1e-5,
            "method gap {:.3e}",
            track.max_method_gap()
        );
    }
    // volume contracts near the attracting vertex of the potential fixture
    let pd = fixtures::prisoners_dilemma();
    let x0 = EffProfile::new(vec![vec![0.9], vec![0.9]]).unwrap();
    let track = volume_tracker(&pd, &x0, 50.0, &opts).unwrap();
    let last = *track.logvol_jacobian.last().unwrap();
    assert!(last <= -0.1, "expected contraction of at least 0.1, got {last}");
    assert!(track.max_method_gap() < 1e-5);
    pass(4, "frame volume is preserved on harmonic games and contracts on the control");
}

#[test]
fn acceptance_05_recurrence() {
    let opts = IntegrateOptions::default();
    let eps = 1e-2;
    let t_max = 500.0;

    let mp = fixtures::matching_pennies();
    let x0 = embed(&EffProfile::new(vec![vec![0.3], vec![0.3]]).unwrap());
    let report = detect_recurrence(&mp, &x0, eps, t_max, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::Recurrent);
    assert!(report.return_times.len() >= 3, "{} returns", report.return_times.len());

    let h = random_harmonic(&[2, 2, 2], 1, 1.0);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let x0 = MixedProfile::sample_interior(&mut rng, &[2, 2, 2], 0.05);
    let report = detect_recurrence(&h, &x0, eps, t_max, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::Recurrent);
    assert!(report.return_times.len() >= 3, "{} returns", report.return_times.len());

    let pd = fixtures::prisoners_dilemma();
    let report =
        detect_recurrence(&pd, &MixedProfile::uniform(&[2, 2]), eps, t_max, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::NotObserved);
    assert!(report.return_times.is_empty());
    pass(5, "near-returns on harmonic games, none on the control");
}

#[test]
fn acceptance_06_regret_bound() {
    let opts = IntegrateOptions::default();
    let mut games: Vec<Game> = vec![
        fixtures::matching_pennies(),
        fixtures::rescaled_matching_pennies(),
        fixtures::prisoners_dilemma(),
        fixtures::harmonic_two_by_three(1.0, 2.0),
        fixtures::potential_222(),
        fixtures::harmonic_222(),
        fixtures::single_player_two_actions(),
        fixtures::zero_game(&[2, 2]),
    ];
    for k in 0..10u64 {
        games.push(random_game(SHAPES[(k % 4) as usize], 60_000 + k, 1.0));
    }
    for g in &games {
        let x0 = MixedProfile::uniform(g.action_counts());
        let rec = integrate(g, &x0, 100.0, &opts).unwrap();
        for i in 0..g.num_players() {
            let bound = (g.action_counts()[i] as f64).ln() + 1e-6;
            let series = regret_series(&rec, g, i).unwrap();
            let worst = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(
                worst <= bound,
                "player {i}: regret {worst} exceeds {bound}"
            );
        }
    }
    pass(6, "regret never exceeds log of the action count");
}

#[test]
fn acceptance_07_decomposition_correctness() {
    // reconstruction is subtraction-defined: the harmonic entries are
    // bitwise u - p, and re-adding rounds at most once
    let mut games: Vec<Game> = vec![
        fixtures::matching_pennies(),
        fixtures::prisoners_dilemma(),
        fixtures::potential_222(),
        fixtures::harmonic_222(),
    ];
    for k in 0..8u64 {
        games.push(random_game(SHAPES[(k % 4) as usize], 70_000 + k, 1.0));
    }
    for g in &games {
        let r = decompose(g, 1e-13, 20_000).unwrap();
        for i in 0..g.num_players() {
            for (k, u) in g.payoff_tensor(i).iter().enumerate() {
                let p = r.potential_game.payoff_tensor(i)[k];
                let h = r.harmonic_game.payoff_tensor(i)[k];
                assert_eq!(h, u - p, "harmonic part is subtraction-defined");
                assert!((p + h - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0));
            }
        }
        let defect = harmonicity_defect(&r.harmonic_game)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(defect <= 1e-8, "harmonic defect {defect:.3e}");
    }

    // the harmonic remainder of a potential game carries no incentives
    for g in [fixtures::potential_222(), random_potential(&[2, 3], 71, 1.0)] {
        let r = decompose(&g, 1e-13, 20_000).unwrap();
        assert!(is_non_strategic(&r.harmonic_game, 1e-8));
    }

    // linearity across the interpolation family
    let p = fixtures::potential_222();
    let h = fixtures::harmonic_222();
    let phi_p = decompose(&p, 1e-13, 20_000).unwrap().potential_fn;
    let phi_h = decompose(&h, 1e-13, 20_000).unwrap().potential_fn;
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mix = Game::weighted_sum(&[(lambda, &p), (1.0 - lambda, &h)]).unwrap();
        let phi = decompose(&mix, 1e-13, 20_000).unwrap().potential_fn;
        for k in 0..phi.len() {
            let expect = lambda * phi_p[k] + (1.0 - lambda) * phi_h[k];
            assert!((phi[k] - expect).abs() <= 1e-8);
        }
    }

    // the two-by-two potential fixture recovers its known potential, up to
    // the additive constant fixed by the pin
    let pd = fixtures::prisoners_dilemma();
    let target = fixtures::prisoners_dilemma_potential();
    for phi in [
        decompose(&pd, 1e-13, 20_000).unwrap().potential_fn,
        match extract_potential(&pd, 1e-10) {
            PotentialOutcome::Exact { phi } => phi,
            PotentialOutcome::Inexact { max_violation } => {
                panic!("expected an exact potential, violation {max_violation}")
            }
        },
    ] {
        let shift = phi[0] - target[0];
        for (a, b) in phi.iter().zip(&target) {
            assert!((a - b - shift).abs() <= 1e-9, "{phi:?} vs {target:?}");
        }
    }
    pass(7, "decomposition reconstructs, is linear, and recovers known potentials");
}

#[test]
fn acceptance_08_simplex_volumes() {
    use std::f64::consts::PI;
    assert_eq!(simplex_volume_shah(1), PI);
    assert_eq!(simplex_volume_shah(2), 2.0 * PI);
    assert_eq!(simplex_volume_shah(3), PI * PI);
    let v1 = simplex_volume_numeric(1, 32, 1e-8).unwrap();
    assert!((v1 - PI).abs() <= 1e-6, "m=1 quadrature {v1}");
    let v2 = simplex_volume_numeric(2, 32, 1e-8).unwrap();
    assert!((v2 - 2.0 * PI).abs() <= 1e-3, "m=2 quadrature {v2}");
    pass(8, "closed-form volumes are exact and the quadrature agrees");
}

#[test]
fn acceptance_09_gradient_identities() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xA9);
    let games: Vec<Game> = (0..4)
        .map(|k| random_game(SHAPES[k % 4], 90_000 + k as u64, 1.0))
        .collect();
    let mut max_err = 0.0f64;
    for k in 0..1000 {
        let g = &games[k % games.len()];
        let xe = EffProfile::sample_interior(&mut rng, g.action_counts(), 1e-4);
        let f = eff_replicator_field(g, &xe).unwrap();
        let w = eff_payoff_field(g, &xe).unwrap();
        for i in 0..g.num_players() {
            let inv = metric_eff_inverse(&xe, i);
            for l in 0..f[i].len() {
                let got: f64 = inv[l].iter().zip(&w.blocks[i]).map(|(a, b)| a * b).sum();
                max_err = max_err.max((f[i][l] - got).abs());
            }
        }
    }
    assert!(max_err < 1e-12, "max deviation {max_err:.3e}");

    // defining relation of the gradient against on-simplex differences
    let g = &games[1];
    for _ in 0..50 {
        let x = MixedProfile::sample_interior(&mut rng, g.action_counts(), 0.05);
        let v = payoff_field(g, &x).unwrap();
        for i in 0..g.num_players() {
            let grad = shah_gradient(&v.blocks[i], &x, i).unwrap();
            let n = g.action_counts()[i];
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = z.iter().sum::<f64>() / n as f64;
            z.iter_mut().for_each(|c| *c -= mean);
            let inner = shah_inner(x.block(i), &grad, &z);
            let t = 1e-6;
            let shift = |sign: f64| {
                let block: Vec<f64> =
                    x.block(i).iter().zip(&z).map(|(&a, &d)| a + sign * t * d).collect();
                x.with_block(i, block).unwrap()
            };
            let deriv = (mixed_payoff(g, &shift(1.0), i).unwrap()
                - mixed_payoff(g, &shift(-1.0), i).unwrap())
                / (2.0 * t);
            let scale = inner.abs().max(deriv.abs()).max(1e-6);
            assert!((inner - deriv).abs() / scale < 1e-5, "{inner} vs {deriv}");
        }
    }
    pass(9, "the flow is the metric gradient of the payoffs");
}

#[test]
fn acceptance_10_mixture_experiment() {
    let started = Instant::now();
    std::env::set_var("HARMONICA_THREADS", "1");
    let p = fixtures::potential_222();
    let h = fixtures::harmonic_222();
    let config = ExperimentConfig {
        seed: 1,
        lambda_grid: (0..8).map(|k| k as f64 / 7.0).collect(),
        t_end: 150.0,
        rtol: 1e-9,
        atol: 1e-12,
        eps: 1e-2,
        vertex_tol: 1e-3,
    };
    let rows = run_mixture(&p, &h, &config).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].recurrent, "pure harmonic end must recur");
    assert!(!rows[0].converged_to_pure);
    assert!(rows[7].converged_to_pure, "pure potential end must converge");
    assert!(!rows[7].recurrent);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed:.1} s single-threaded");
    pass(10, "interpolation sweep shows recurrence at one end, convergence at the other");
}
