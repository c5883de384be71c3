//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use morphnash::classifier::{train_classifier, ClassifierConfig, ClassifierParams, ClassifierReport};
use morphnash::game::{
    assemble_sd_model, init_riccati, lyapunov_iterations, GameConfig, GameController, GameWeights, IterationOptions,
};
use morphnash::linalg;
use morphnash::meta::collect::{collect_data, CollectConfig};
use morphnash::meta::daiml::{discriminator_accuracy, phi_objective, prediction_report, Batch, PredictionReport};
use morphnash::meta::{train_daiml, DaimlConfig, Dataset, Discriminator, PhiNetwork};
use morphnash::nn::Standardizer;
use morphnash::sim::{self, Controller, LqrBaseline, LqrWeights, Scenario};
use morphnash::vehicle::{self, StateVec, TrimPoint, VehicleParams};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn report(id: usize, name: &str, budget: Duration, elapsed: Duration, v: Verdict) -> bool {
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    println!(
        "criterion {id} {name}: {} ({:.2} s of {:.0} s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        v.detail
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

struct Setup {
    params: VehicleParams,
    trim: TrimPoint,
    printed_trim: TrimPoint,
}

fn setup() -> Setup {
    let params = VehicleParams::default();
    let printed_trim = TrimPoint::default();
    let trim = printed_trim.refine(&params).expect("trim refines");
    Setup {
        params,
        trim,
        printed_trim,
    }
}

fn linearization(s: &Setup) -> Verdict {
    let (a, b) = vehicle::linearize(&s.params, &s.printed_trim).expect("linearize");
    let (ra, rb) = vehicle::reference_linear_model();
    let mut worst_a: f64 = 0.0;
    let mut worst_b: f64 = 0.0;
    let mut ok = true;
    for i in 0..5 {
        for j in 0..5 {
            let (c, r) = (a[(i, j)], ra[(i, j)]);
            if r == 0.0 {
                ok &= c.abs() <= 1e-12;
            } else {
                let rel = (c - r).abs() / r.abs();
                worst_a = worst_a.max(rel);
                ok &= rel <= 0.05 || (c - r).abs() <= 1e-3;
            }
        }
        for j in 0..2 {
            let (c, r) = (b[(i, j)], rb[(i, j)]);
            if r == 0.0 {
                ok &= c.abs() <= 1e-12;
            } else {
                let rel = (c - r).abs() / r.abs();
                worst_b = worst_b.max(rel);
                ok &= rel <= 0.01;
            }
        }
    }
    Verdict::new(
        ok,
        format!(
            "worst relative deviation A {:.2}%, B {:.3}%",
            100.0 * worst_a,
            100.0 * worst_b
        ),
    )
}

fn solvers() -> Verdict {
    let mut r = rng(2024);
    let (mut lyap_res, mut lyap_dev): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let a = random_hurwitz(&mut r, 5);
        let q = random_psd(&mut r, 5, 0.0);
        let p = linalg::solve_lyapunov(&a, &q).expect("lyapunov");
        lyap_res = lyap_res.max((a.transpose() * &p + &p * &a + &q).norm());
        lyap_dev = lyap_dev.max(rel_diff(&p, &lyapunov_smith(&a, &q)));
    }
    let (mut are_res, mut are_ode, mut are_sign, mut abscissa): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, f64::MIN);
    let mut ode_missing = 0;
    for _ in 0..100 {
        let a = random_matrix(&mut r, 5, 5);
        let b = random_matrix(&mut r, 5, 2);
        let q = random_psd(&mut r, 5, 0.1);
        let rr = random_psd(&mut r, 2, 0.5);
        let p = linalg::solve_are(&a, &b, &q, &rr).expect("are");
        are_res = are_res.max(linalg::are_residual(&a, &b, &q, &rr, &p).unwrap().norm());
        let s = linalg::control_gramian_term(&b, &rr).unwrap();
        abscissa = abscissa.max(linalg::spectral_abscissa(&(&a - &s * &p)));
        match are_by_riccati_ode(&a, &b, &q, &rr) {
            Some(po) => are_ode = are_ode.max(rel_diff(&p, &po)),
            None => ode_missing += 1,
        }
        are_sign = are_sign.max(rel_diff(&p, &linalg::hamiltonian_sign_solution(&a, &s, &q).unwrap()));
    }
    let pass = lyap_res <= 1e-9
        && lyap_dev <= 1e-9
        && are_res <= 1e-8
        && abscissa < 0.0
        && ode_missing == 0
        && are_ode <= 1e-6
        && are_sign <= 1e-8;
    Verdict::new(
        pass,
        format!(
            "lyapunov residual {lyap_res:.1e}, vs doubling {lyap_dev:.1e}; ARE residual {are_res:.1e}, \
             closed-loop abscissa {abscissa:.3}, vs Riccati ODE {are_ode:.1e} ({ode_missing} unconverged), \
             vs sign method {are_sign:.1e}"
        ),
    )
}

fn scalar_game_truth() -> Verdict {
    let (model, w) = scalar_game(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    let (init, _) = init_riccati(&model, &w).expect("init");
    let p_a0 = init.p_a[(0, 0)];
    let opts = IterationOptions {
        epsilon: 1e-12,
        ..IterationOptions::default()
    };
    let out = lyapunov_iterations(&init, &model, &w, &opts).expect("iterations");
    let target = 1.0 / 3f64.sqrt();
    let err = (out.pair.p_u[(0, 0)] - target)
        .abs()
        .max((out.pair.p_a[(0, 0)] - target).abs());
    let init_err = (p_a0 - (2f64.sqrt() - 1.0)).abs();
    Verdict::new(
        out.converged && err <= 1e-8 && init_err <= 1e-10,
        format!(
            "|p - 1/sqrt(3)| = {err:.1e} after {} iterations, |P_a0 - (sqrt(2)-1)| = {init_err:.1e}",
            out.iterations
        ),
    )
}

fn monotone_convergence(s: &Setup, phi: &PhiNetwork) -> Verdict {
    let weights = GameConfig::default().weights().unwrap();
    let mut r = rng(77);
    let (mut non_monotone, mut failures) = (0, 0);
    let (mut worst_decrease, mut worst_residual, mut worst_abscissa) = (f64::INFINITY, 0.0f64, f64::MIN);
    for _ in 0..50 {
        let x = StateVec::new(
            r.random_range(-5.0..5.0),
            r.random_range(-0.1..0.1),
            r.random_range(-0.1..0.1),
            r.random_range(-0.2..0.2),
            r.random_range(-10.0..10.0),
        );
        let model = assemble_sd_model(&x, &s.params, &s.trim, phi).expect("model");
        let run = init_riccati(&model, &weights)
            .and_then(|(init, _)| lyapunov_iterations(&init, &model, &weights, &IterationOptions::default()));
        let out = match run {
            Ok(o) => o,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let dec = out
            .history
            .iter()
            .map(|h| h.decrease_u.min(h.decrease_a))
            .fold(f64::INFINITY, f64::min);
        worst_decrease = worst_decrease.min(dec);
        if dec < -1e-9 {
            non_monotone += 1;
        }
        worst_residual = worst_residual.max(out.residual_u.max(out.residual_a));
        worst_abscissa = out.history.iter().map(|h| h.abscissa).fold(worst_abscissa, f64::max);
        if !out.converged {
            failures += 1;
        }
    }
    Verdict::new(
        non_monotone == 0 && failures == 0 && worst_residual <= 1e-5 && worst_abscissa < 0.0,
        format!(
            "{non_monotone}/50 instances with a non-monotone step (smallest eig of P_i - P_i+1 {worst_decrease:.3e}), \
             {failures} unconverged, worst residual {worst_residual:.1e}, worst A_c abscissa {worst_abscissa:.2e}"
        ),
    )
}

struct Trained {
    dataset: Dataset,
    phi_adv: PhiNetwork,
    disc_adv: Discriminator,
    phi_plain: PhiNetwork,
    disc_plain: Discriminator,
    classifier: ClassifierParams,
    classifier_report: ClassifierReport,
    daiml_time: Duration,
    classifier_time: Duration,
}

fn train(s: &Setup) -> Trained {
    let lqr = LqrBaseline::design(&s.params, &s.trim, &LqrWeights::default()).expect("lqr");
    let (dataset, collect_time) =
        timed(|| collect_data(&s.params, &s.trim, &lqr, &CollectConfig::default()).expect("collect"));
    let adv_cfg = DaimlConfig::default();
    let plain_cfg = DaimlConfig {
        alpha: 0.0,
        ..adv_cfg.clone()
    };
    let (train_set, _) = dataset.split_holdout(adv_cfg.holdout);
    let t0 = Instant::now();
    let ((adv, plain), (clf, clf_time)) = thread::scope(|sc| {
        let ha = sc.spawn(|| train_daiml(&train_set, &adv_cfg).expect("daiml"));
        let hp = sc.spawn(|| train_daiml(&train_set, &plain_cfg).expect("daiml"));
        let hc = sc.spawn(|| timed(|| train_classifier(&dataset, &ClassifierConfig::default()).expect("classifier")));
        ((ha.join().unwrap(), hp.join().unwrap()), hc.join().unwrap())
    });
    Trained {
        phi_adv: adv.phi,
        disc_adv: adv.disc,
        phi_plain: plain.phi,
        disc_plain: plain.disc,
        classifier: clf.0,
        classifier_report: clf.1,
        daiml_time: collect_time + t0.elapsed(),
        classifier_time: collect_time + clf_time,
        dataset,
    }
}

fn gradient_check() -> f64 {
    let cfg = DaimlConfig::default();
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for alpha in [0.0, cfg.alpha] {
        let cfg = DaimlConfig { alpha, ..cfg.clone() };
        let mut phi = PhiNetwork::new(cfg.feature_dim, Standardizer::identity(5), &mut r);
        for l in &mut phi.mlp.layers {
            l.bias.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
        }
        let disc = Discriminator::new(cfg.feature_dim, &mut r);
        let mut batch = |n| Batch {
            x: random_matrix(&mut r, 5, n),
            y: random_matrix(&mut r, 5, n),
        };
        let (ba, bb) = (batch(16), batch(12));
        let (_, grads) = phi_objective(&phi, &disc, &ba, &bb, 2, &cfg).unwrap();
        let g = grads.flat_params();
        let theta = phi.mlp.flat_params();
        let mut probe = phi.clone();
        let h = 1e-5;
        for i in (0..theta.len()).step_by(23) {
            let mut p = theta.clone();
            p[i] += h;
            probe.mlp.set_flat_params(&p);
            let lp = phi_objective(&probe, &disc, &ba, &bb, 2, &cfg).unwrap().0.total;
            p[i] -= 2.0 * h;
            probe.mlp.set_flat_params(&p);
            let lm = phi_objective(&probe, &disc, &ba, &bb, 2, &cfg).unwrap().0.total;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3));
        }
    }
    worst
}

fn daiml_behaviour(t: &Trained) -> Verdict {
    let cfg = DaimlConfig::default();
    let grad_err = gradient_check();
    let (train_set, held) = t.dataset.split_holdout(cfg.holdout);
    let pred: PredictionReport = prediction_report(&t.phi_adv, &train_set, &held, &cfg).expect("report");
    let acc_adv = discriminator_accuracy(&t.phi_adv, &t.disc_adv, &held);
    let acc_plain = discriminator_accuracy(&t.phi_plain, &t.disc_plain, &held);
    Verdict::new(
        grad_err <= 1e-4 && pred.improvement() >= 5.0 && acc_adv < acc_plain,
        format!(
            "gradient rel. error {grad_err:.1e}, held-out MSE {:.4} vs zero predictor {:.4} ({:.1}x), \
             discriminator accuracy {acc_adv:.3} (alpha {}) vs {acc_plain:.3} (alpha 0)",
            pred.mse,
            pred.zero_mse,
            pred.improvement(),
            cfg.alpha
        ),
    )
}

fn classifier_quality(t: &Trained) -> Verdict {
    let rep = &t.classifier_report;
    Verdict::new(
        rep.accuracy >= 0.8 && rep.xi_mae <= 0.1,
        format!(
            "held-out top-1 accuracy {:.3}, xi mean abs error {:.4}",
            rep.accuracy, rep.xi_mae
        ),
    )
}

fn game_controller(s: &Setup, t: &Trained) -> GameController {
    GameController::new(
        s.params.clone(),
        s.trim,
        t.phi_adv.clone(),
        t.classifier.clone(),
        &GameConfig::default(),
    )
    .expect("controller")
}

fn cost_weights() -> GameWeights {
    GameConfig::default().weights().unwrap()
}

fn closed_loop(s: &Setup, t: &Trained) -> Verdict {
    let w = cost_weights();
    let ctrl = Controller::Game(Box::new(game_controller(s, t)));
    let scenario = Scenario::default();
    let run = sim::run_closed_loop(&scenario, &s.params, &s.trim, &ctrl, &w);
    let (settled, detail) = match &run {
        Ok(log) => {
            let m = sim::metrics(log, &w.q_u, &s.trim.state());
            (
                m.settling_time.is_some() && m.inputs_admissible,
                format!(
                    "weighted error {:.3} -> {:.3} (threshold {:.3}), settling {}, inputs admissible {}",
                    m.initial_error,
                    m.final_error,
                    m.threshold,
                    m.settling_time.map_or("none".into(), |t| format!("{t:.2} s")),
                    m.inputs_admissible
                ),
            )
        }
        Err(e) => (false, format!("run failed: {e}")),
    };
    // trim start stays within the settling band of the default run
    let band = sim::metrics::SETTLE_FRACTION
        * sim::metrics::weighted_norm(&(StateVec::from(scenario.x0) - s.trim.state()), &w.q_u);
    let (stays, drift) = match sim::run_closed_loop(&scenario.at_trim(&s.trim), &s.params, &s.trim, &ctrl, &w) {
        Ok(log) => {
            let drift = log
                .samples
                .iter()
                .map(|x| sim::metrics::weighted_norm(&(x.x - s.trim.state()), &w.q_u))
                .fold(0.0, f64::max);
            (drift <= band, format!("{drift:.3e}"))
        }
        Err(e) => (false, format!("failed: {e}")),
    };
    Verdict::new(
        settled && stays,
        format!("{detail}; trim-start max weighted drift {drift} (band {band:.3})"),
    )
}

fn cost_direction(s: &Setup, t: &Trained) -> Verdict {
    let w = cost_weights();
    let game = Controller::Game(Box::new(game_controller(s, t)));
    let lqr = Controller::Lqr(LqrBaseline::design(&s.params, &s.trim, &LqrWeights::default()).unwrap());
    let results: Vec<Result<(f64, f64, f64), String>> = thread::scope(|sc| {
        let handles: Vec<_> = (0..5u64)
            .map(|seed| {
                let (game, lqr, w) = (&game, &lqr, &w);
                sc.spawn(move || {
                    let scenario = Scenario {
                        seed,
                        ..Scenario::default()
                    };
                    let lg = sim::run_closed_loop(&scenario, &s.params, &s.trim, game, w).map_err(|e| e.to_string())?;
                    let ll = sim::run_closed_loop(&scenario, &s.params, &s.trim, lqr, w).map_err(|e| e.to_string())?;
                    let c = sim::compare(&lg, &ll, &w.q_u, &s.trim.state()).map_err(|e| e.to_string())?;
                    Ok((c.a.cost_u, c.b.cost_u, c.cost_reduction_percent))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, r) in results.iter().enumerate() {
        match r {
            Ok((g, l, pct)) => {
                pass &= g < l;
                parts.push(format!("seed {seed}: game {g:.1} vs LQR {l:.1} ({pct:+.2}%)"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("seed {seed}: {e}"));
            }
        }
    }
    parts.push("reference reduction 40.26%".into());
    Verdict::new(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let s = setup();
    let mut all = true;

    let (v, d) = timed(|| linearization(&s));
    all &= report(1, "linearization", Duration::from_secs(1), d, v);
    let (v, d) = timed(solvers);
    all &= report(2, "solvers", Duration::from_secs(30), d, v);
    let (v, d) = timed(scalar_game_truth);
    all &= report(3, "scalar game", Duration::from_secs(1), d, v);

    let trained = train(&s);
    let (v, d) = timed(|| monotone_convergence(&s, &trained.phi_adv));
    all &= report(4, "monotone iterations", Duration::from_secs(120), d, v);
    let (v, d) = timed(|| daiml_behaviour(&trained));
    all &= report(5, "meta-learning", Duration::from_secs(900), d + trained.daiml_time, v);
    let v = classifier_quality(&trained);
    all &= report(6, "classifier", Duration::from_secs(300), trained.classifier_time, v);
    let (v, d) = timed(|| closed_loop(&s, &trained));
    all &= report(7, "closed loop", Duration::from_secs(300), d, v);
    let (v, d) = timed(|| cost_direction(&s, &trained));
    all &= report(8, "cost vs LQR", Duration::from_secs(600), d, v);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
