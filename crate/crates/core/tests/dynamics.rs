use sgflab_core::bias::{solve_implicit_bias, EntropyParams};
use sgflab_core::diagnostics::kkt_residual;
use sgflab_core::dynamics::*;
use sgflab_core::linalg::Matrix;
use sgflab_core::math::asinh;
use sgflab_core::model::{generate_sparse_regression, grad_w_loss, Dataset, WeightState};
use sgflab_core::rng;

fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
    Dataset::new(Matrix::from_rows(rows).unwrap(), y.to_vec(), None).unwrap()
}

fn config(algo: Algorithm, gamma: f64, alpha: f64, d: usize) -> DynamicsConfig {
    DynamicsConfig::new(algo, gamma, vec![alpha; d])
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn gd_at_interpolator_is_stationary() {
    let data = generate_sparse_regression(4, 8, 2, 3).unwrap();
    let zero = Dataset::new(data.x.clone(), vec![0.0; 4], None).unwrap();
    let cfg = config(Algorithm::Gd, 0.01, 0.3, 8);
    let tr = run_gd(&zero, &cfg).unwrap();
    assert_eq!(tr.status, Status::Converged);
    assert_eq!(tr.steps, 0);
    assert_eq!(tr.terminal.w_plus, vec![0.3; 8]);
    assert_eq!(tr.records.len(), 1);
}

#[test]
fn gd_scalar_problem_tracks_ode_oracle() {
    // X = [[1]], y = 1: with u = ln(w₊/α), u' = 1 − β and β = 2α² sinh(2u)
    let data = dataset(&[vec![1.0]], &[1.0]);
    let (alpha, gamma) = (0.5, 0.01);
    let mut cfg = config(Algorithm::Gd, gamma, alpha, 1);
    cfg.record_every = 1;
    cfg.max_steps = 2000;
    let tr = run_gd(&data, &cfg).unwrap();
    let betas: Vec<f64> = tr.records.iter().map(|r| r.beta[0]).collect();
    assert!(betas.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0));
    // loss ≤ 1e-10 means |1 − β| ≤ 2e-5
    assert!(1.0 - betas.last().unwrap() <= 2e-5);

    let f = |u: f64| 1.0 - 2.0 * alpha * alpha * (2.0 * u).sinh();
    let h = 1e-4;
    let (mut u, mut t) = (0.0, 0.0);
    for rec in tr.records.iter().filter(|r| r.step % 100 == 0) {
        while t < rec.time - h / 2.0 {
            let k1 = f(u);
            let k2 = f(u + h / 2.0 * k1);
            let k3 = f(u + h / 2.0 * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        let exact = 2.0 * alpha * alpha * (2.0 * u).sinh();
        assert!((rec.beta[0] - exact).abs() < 5e-3, "t={} gd={} ode={exact}", rec.time, rec.beta[0]);
    }
}

#[test]
fn gd_reaches_implicit_bias_at_reference_scale() {
    let data = generate_sparse_regression(40, 100, 5, 1).unwrap();
    let alpha = 0.05;
    // the Euler bias in the KKT residual is about dt/4 here
    let mut cfg = config(Algorithm::Gd, 3e-4, alpha, 100);
    cfg.max_steps = 10_000_000;
    cfg.record_every = 1_000_000;
    let tr = run_gd(&data, &cfg).unwrap();
    assert_eq!(tr.status, Status::Converged);
    assert_eq!(tr.nonmonotone_steps, 0);
    let params = EntropyParams::uniform(alpha, 100).unwrap();
    let k = kkt_residual(&tr.final_beta(), &data, &params);
    assert!(k.stationarity <= 1e-4, "kkt {}", k.stationarity);
    let oracle = solve_implicit_bias(&data, &params).unwrap();
    let rel = max_abs_diff(&oracle, &tr.final_beta()) / oracle.iter().map(|b| b.abs()).fold(0.0, f64::max);
    assert!(rel < 1e-3, "rel {rel}");
}

#[test]
fn gd_flags_nonmonotone_loss_for_large_dt() {
    let data = generate_sparse_regression(5, 10, 2, 2).unwrap();
    let mut cfg = config(Algorithm::Gd, 1.0, 1.0, 10);
    cfg.max_steps = 50;
    let tr = run_gd(&data, &cfg).unwrap();
    assert!(tr.nonmonotone_steps > 0 || tr.status == Status::Diverged);
}

#[test]
fn full_batch_sgd_without_replacement_is_gd() {
    let data = generate_sparse_regression(6, 12, 2, 5).unwrap();
    let mut gd = config(Algorithm::Gd, 0.05, 0.2, 12);
    gd.max_steps = 3000;
    gd.record_every = 7;
    let mut sgd = gd.clone();
    sgd.algo = Algorithm::Sgd;
    sgd.batch_size = 6;
    sgd.sampling = Sampling::WithoutReplacement;
    sgd.seed = 99;
    let a = run_gd(&data, &gd).unwrap();
    let b = run_sgd(&data, &sgd).unwrap();
    assert_eq!(a.terminal, b.terminal);
    assert_eq!(a.records, b.records);
    assert_eq!(a.loss_integral, b.loss_integral);
}

#[test]
fn zero_labels_keep_beta_at_zero() {
    let data = generate_sparse_regression(5, 10, 2, 4).unwrap();
    let zero = Dataset::new(data.x.clone(), vec![0.0; 5], None).unwrap();
    for algo in [Algorithm::Sgd, Algorithm::Sgf] {
        let tr = run(&zero, &config(algo, 0.01, 0.2, 10)).unwrap();
        assert_eq!(tr.status, Status::Converged);
        assert!(tr.final_beta().iter().all(|b| *b == 0.0));
    }
    let mut state = WeightState::init(&[0.2; 10], 2).unwrap();
    let mut s = rng::stream(1, "noise");
    let mut noise = [0.0; 5];
    for _ in 0..100 {
        s.fill_normal(0.1, &mut noise);
        state = sgf_step(&state, &zero, 0.01, 0.01, &noise).unwrap();
    }
    assert!(state.beta().iter().all(|b| *b == 0.0));
}

#[test]
fn effective_step_size_examples() {
    assert_eq!(effective_step_size(0.3, 1, 7, Sampling::WithReplacement).unwrap(), 0.3);
    assert_eq!(effective_step_size(0.3, 1, 7, Sampling::WithoutReplacement).unwrap(), 0.3);
    assert_eq!(effective_step_size(0.3, 7, 7, Sampling::WithoutReplacement).unwrap(), 0.0);
    assert!((effective_step_size(0.1, 2, 5, Sampling::WithoutReplacement).unwrap() - 0.0375).abs() < 1e-16);
    assert!((effective_step_size(0.1, 4, 5, Sampling::WithReplacement).unwrap() - 0.025).abs() < 1e-16);
    assert!(effective_step_size(0.1, 6, 5, Sampling::WithReplacement).is_err());
    assert!(effective_step_size(0.1, 0, 5, Sampling::WithReplacement).is_err());
}

#[test]
fn sgf_step_fixes_interpolators() {
    // w₊ = (1, ½), w₋ = (½, ½): β = (¾, 0) interpolates y = ¾ exactly
    let data = dataset(&[vec![1.0, 2.0]], &[0.75]);
    let state = WeightState { w_plus: vec![1.0, 0.5], w_minus: vec![0.5, 0.5], depth: 2 };
    for noise in [[0.0], [0.7], [-3.0]] {
        assert_eq!(sgf_step(&state, &data, 0.1, 0.1, &noise).unwrap(), state);
        assert_eq!(sgf_general_step(&state, &data, 0.1, 0.1, &noise).unwrap(), state);
    }
    let deep = WeightState { w_plus: vec![1.0, 0.5], w_minus: vec![0.5, 0.5], depth: 3 };
    let d3 = dataset(&[vec![1.0, 2.0]], &[0.875]);
    assert_eq!(sgf_depth_p_step(&deep, &d3, 0.1, 0.1, &[1.3]).unwrap(), deep);
}

#[test]
fn sgf_step_without_noise_is_a_gradient_step() {
    let data = generate_sparse_regression(4, 9, 2, 8).unwrap();
    let mut s = rng::stream(3, "test");
    let state = WeightState {
        w_plus: (0..9).map(|_| 0.2 + s.uniform()).collect(),
        w_minus: (0..9).map(|_| 0.2 + s.uniform()).collect(),
        depth: 2,
    };
    let dt = 1e-2;
    let next = sgf_step(&state, &data, 0.5, dt, &[0.0; 4]).unwrap();
    let (gp, gm) = grad_w_loss(&state, &data).unwrap();
    for j in 0..9 {
        assert!((next.w_plus[j] - (state.w_plus[j] - dt * gp[j])).abs() < 1e-14);
        assert!((next.w_minus[j] - (state.w_minus[j] - dt * gm[j])).abs() < 1e-14);
    }
}

#[test]
fn sgf_step_rejects_wrong_shapes() {
    let data = generate_sparse_regression(3, 5, 1, 1).unwrap();
    let state = WeightState::init(&[0.1; 5], 2).unwrap();
    assert!(sgf_step(&state, &data, 0.1, 0.1, &[0.0; 2]).is_err());
    let deep = WeightState::init(&[0.1; 5], 3).unwrap();
    assert!(sgf_step(&deep, &data, 0.1, 0.1, &[0.0; 3]).is_err());
}

#[test]
fn sgf_increment_second_moment_matches_sgd_covariance() {
    let data = generate_sparse_regression(5, 8, 2, 11).unwrap();
    let n = 5.0;
    let mut s = rng::stream(5, "state");
    let state = WeightState {
        w_plus: (0..8).map(|_| 0.5 + s.uniform()).collect(),
        w_minus: (0..8).map(|_| 0.5 + s.uniform()).collect(),
        depth: 2,
    };
    let gamma = 0.05;
    let dt = gamma;
    let beta = state.beta();
    let loss = sgflab_core::model::loss(&beta, &data).unwrap();
    let (gp, _) = grad_w_loss(&state, &data).unwrap();
    let drift: Vec<f64> = gp.iter().map(|g| -g * dt).collect();
    // (4/n) γ² L [diag(w₊) Xᵀ][diag(w₊) Xᵀ]ᵀ + drift driftᵀ
    let expected = |j: usize, k: usize| {
        let mut acc = 0.0;
        for i in 0..data.n() {
            acc += data.x.row(i)[j] * data.x.row(i)[k];
        }
        4.0 / n * gamma * gamma * loss * state.w_plus[j] * state.w_plus[k] * acc + drift[j] * drift[k]
    };
    let draws = 100_000;
    let mut m = vec![vec![0.0; 8]; 8];
    let mut noise = vec![0.0; 5];
    let mut ns = rng::stream(17, "noise");
    for _ in 0..draws {
        ns.fill_normal(dt.sqrt(), &mut noise);
        let next = sgf_step(&state, &data, gamma, dt, &noise).unwrap();
        let inc: Vec<f64> = next.w_plus.iter().zip(&state.w_plus).map(|(a, b)| a - b).collect();
        for j in 0..8 {
            for k in 0..8 {
                m[j][k] += inc[j] * inc[k] / draws as f64;
            }
        }
    }
    let mut diag: Vec<usize> = (0..8).collect();
    diag.sort_by(|a, b| expected(*b, *b).partial_cmp(&expected(*a, *a)).unwrap());
    for &j in &diag[..4] {
        let e = expected(j, j);
        assert!((m[j][j] - e).abs() <= 0.05 * e, "entry {j}: {} vs {e}", m[j][j]);
    }
}

#[test]
fn sgf_dual_path_closed_form() {
    // exact in continuous time; the Euler scheme adds O(dt) over the horizon
    let data = generate_sparse_regression(5, 10, 2, 21).unwrap();
    let gamma = 2e-4;
    let mut cfg = config(Algorithm::Sgf, gamma, 0.4, 10);
    cfg.dt = gamma / 10.0;
    cfg.max_steps = 10_000;
    cfg.loss_tol = 0.0;
    cfg.record_every = 50;
    cfg.seed = 4;
    let tr = run_sgf(&data, &cfg).unwrap();
    let h = data.h_tilde_diag();
    let sqrt_n = (data.n() as f64).sqrt();
    let mut worst: f64 = 0.0;
    for rec in &tr.records {
        let eta = rec.eta.as_ref().unwrap();
        let xt_eta = data.x.tmul_vec(eta);
        for j in 0..10 {
            let at = 0.4 * (-2.0 * gamma * h[j] * rec.loss_integral).exp();
            let lhs = asinh(rec.beta[j] / (2.0 * at * at));
            worst = worst.max((lhs - 2.0 * xt_eta[j] / sqrt_n).abs());
        }
    }
    assert!(worst <= 1e-4, "closed form drift {worst}");
}

#[test]
fn sgf_approaches_gradient_flow_as_gamma_shrinks() {
    let data = generate_sparse_regression(5, 10, 2, 6).unwrap();
    let sup_dist = |gamma: f64| {
        let mut base = config(Algorithm::Gd, gamma, 0.3, 10);
        base.dt = 1e-3;
        base.max_steps = 3000;
        base.loss_tol = 0.0;
        base.record_every = 10;
        let gf = run_gd(&data, &base).unwrap();
        let mut sgf = base.clone();
        sgf.algo = Algorithm::Sgf;
        sgf.seed = 12;
        let tr = run_sgf(&data, &sgf).unwrap();
        gf.records.iter().zip(&tr.records).map(|(a, b)| max_abs_diff(&a.beta, &b.beta)).fold(0.0, f64::max)
    };
    let (coarse, fine) = (sup_dist(1e-2), sup_dist(1e-3));
    assert!(fine < coarse, "{fine} !< {coarse}");
    assert!(fine < 0.5 * coarse);
}

#[test]
fn zero_label_noise_reproduces_plain_runs() {
    let data = generate_sparse_regression(6, 12, 2, 9).unwrap();
    for (plain, noisy) in [(Algorithm::Sgd, Algorithm::SgdLabelNoise), (Algorithm::Sgf, Algorithm::SgfLabelNoise)] {
        let mut a = config(plain, 0.02, 0.3, 12);
        a.max_steps = 2000;
        a.record_every = 100;
        a.seed = 77;
        let mut b = a.clone();
        b.algo = noisy;
        b.label_noise = Some(LabelNoise { delta: 0.0, cutoff_step: 1000 });
        let ta = run(&data, &a).unwrap();
        let tb = run(&data, &b).unwrap();
        assert_eq!(ta.records, tb.records);
        assert_eq!(ta.terminal, tb.terminal);
        assert_eq!(Some(ta.loss_integral), tb.tilde_loss_integral);
    }
}

#[test]
fn label_noise_keeps_interpolator_moving() {
    let data = generate_sparse_regression(4, 8, 1, 2).unwrap();
    let zero = Dataset::new(data.x.clone(), vec![0.0; 4], None).unwrap();
    for algo in [Algorithm::SgdLabelNoise, Algorithm::SgfLabelNoise] {
        let mut cfg = config(algo, 0.01, 0.3, 8);
        cfg.label_noise = Some(LabelNoise { delta: 0.5, cutoff_step: 10 });
        cfg.max_steps = 10;
        let tr = run(&zero, &cfg).unwrap();
        assert!(tr.final_beta().iter().any(|b| *b != 0.0));
        assert!(tr.tilde_loss_integral.unwrap() > tr.loss_integral);
    }
}

#[test]
fn label_noise_needs_schedule() {
    let data = generate_sparse_regression(4, 8, 1, 2).unwrap();
    let cfg = config(Algorithm::SgdLabelNoise, 0.01, 0.3, 8);
    assert!(run(&data, &cfg).is_err());
    assert!(run_sgd(&data, &config(Algorithm::Gd, 0.01, 0.3, 8)).is_err());
}

#[test]
fn general_noise_with_equal_sample_losses_is_sgf() {
    let data = dataset(&[vec![1.0, 0.5, -0.2], vec![0.3, -1.0, 0.4]], &[1.0, -1.0]);
    let state = WeightState::init(&[0.3; 3], 2).unwrap();
    let noise = [0.37, -1.21];
    let a = sgf_step(&state, &data, 0.2, 0.01, &noise).unwrap();
    let b = sgf_general_step(&state, &data, 0.2, 0.01, &noise).unwrap();
    assert_eq!(a, b);
}

#[test]
fn depth_two_through_depth_p_path_is_sgf() {
    let data = generate_sparse_regression(5, 10, 2, 13).unwrap();
    let state = WeightState::init(&[0.3; 10], 2).unwrap();
    let noise = [0.1, -0.4, 0.9, 0.0, 1.5];
    assert_eq!(
        sgf_step(&state, &data, 0.05, 0.005, &noise).unwrap(),
        sgf_depth_p_step(&state, &data, 0.05, 0.005, &noise).unwrap()
    );

    let mut a = config(Algorithm::Sgf, 0.05, 0.3, 10);
    a.dt = 0.005;
    a.max_steps = 5000;
    a.seed = 3;
    let mut b = a.clone();
    b.algo = Algorithm::SgfDepthP;
    let ta = run_sgf(&data, &a).unwrap();
    let tb = run_sgf_depth_p(&data, &b).unwrap();
    assert_eq!(ta.terminal, tb.terminal);
    assert_eq!(ta.loss_integral, tb.loss_integral);
    for v in tb.aux_integral_plus.unwrap().iter().chain(&tb.aux_integral_minus.unwrap()) {
        assert!((v - ta.loss_integral).abs() <= 1e-12 * ta.loss_integral);
    }
}

#[test]
fn depth_p_halving_keeps_weights_positive() {
    let data = generate_sparse_regression(3, 6, 2, 5).unwrap();
    let mut cfg = config(Algorithm::SgfDepthP, 0.5, 1.0, 6);
    cfg.depth = 3;
    cfg.dt = 0.5;
    cfg.max_steps = 200;
    let tr = run_sgf_depth_p(&data, &cfg).unwrap();
    if tr.status != Status::Diverged {
        assert!(tr.terminal.w_plus.iter().chain(&tr.terminal.w_minus).all(|w| *w > 0.0));
    }
    assert!(tr.halved_steps > 0 || tr.status == Status::Diverged);
    assert!(tr.records.windows(2).all(|w| w[1].time > w[0].time));
}

#[test]
fn depth_p_reaches_its_kkt_point() {
    use sgflab_core::bias::{depth_p_kkt_residual, DepthPPotential};
    use sgflab_core::diagnostics::depth_p_alpha_eff;
    let data = generate_sparse_regression(3, 6, 2, 1).unwrap();
    let (alpha, gamma) = (0.5, 0.05);
    let mut cfg = config(Algorithm::SgfDepthP, gamma, alpha, 6);
    cfg.depth = 3;
    cfg.dt = gamma / 10.0;
    cfg.max_steps = 20_000_000;
    cfg.seed = 2;
    let tr = run_sgf_depth_p(&data, &cfg).unwrap();
    assert_eq!(tr.status, Status::Converged);
    let (ap, am) = depth_p_alpha_eff(
        &cfg.alpha,
        gamma,
        3,
        &data.h_tilde_diag(),
        tr.aux_integral_plus.as_ref().unwrap(),
        tr.aux_integral_minus.as_ref().unwrap(),
    )
    .unwrap();
    assert!(ap.iter().chain(&am).all(|a| *a <= alpha));
    let pot = DepthPPotential::new(ap, am, 3).unwrap();
    let r = depth_p_kkt_residual(&tr.final_beta(), &data, &pot).unwrap();
    assert!(r <= 1e-3, "depth-p kkt {r}");
}

#[test]
fn runs_are_seed_deterministic() {
    let data = generate_sparse_regression(6, 12, 2, 1).unwrap();
    for algo in [Algorithm::Sgd, Algorithm::Sgf, Algorithm::SgfGeneral] {
        let mut cfg = config(algo, 0.02, 0.3, 12);
        cfg.max_steps = 500;
        cfg.record_every = 10;
        cfg.seed = 8;
        cfg.record_noise = algo.is_flow();
        let a = run(&data, &cfg).unwrap();
        let b = run(&data, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 9;
        assert_ne!(run(&data, &cfg).unwrap().terminal, a.terminal);
    }
}

#[test]
fn loss_integral_is_trapezoid_of_losses() {
    let data = generate_sparse_regression(5, 10, 2, 14).unwrap();
    for algo in [Algorithm::Gd, Algorithm::Sgd, Algorithm::Sgf] {
        let mut cfg = config(algo, 0.02, 0.3, 10);
        cfg.max_steps = 3000;
        cfg.record_every = 1;
        cfg.seed = 1;
        let fine = run(&data, &cfg).unwrap();
        let h = cfg.step_length();
        let trap: f64 = fine.records.windows(2).map(|w| 0.5 * (w[0].loss + w[1].loss) * h).sum();
        assert!((trap - fine.loss_integral).abs() <= 1e-12 * fine.loss_integral);
        assert!(fine.records.windows(2).all(|w| w[1].loss_integral >= w[0].loss_integral));
        cfg.record_every = 97;
        let coarse = run(&data, &cfg).unwrap();
        assert_eq!(coarse.loss_integral, fine.loss_integral);
        assert_eq!(coarse.records.last().unwrap().step, fine.steps);
    }
}

#[test]
fn general_noise_tracks_per_sample_integrals() {
    let data = generate_sparse_regression(5, 10, 2, 15).unwrap();
    let mut cfg = config(Algorithm::SgfGeneral, 0.02, 0.3, 10);
    cfg.max_steps = 4000;
    cfg.seed = 5;
    let tr = run_sgf_general(&data, &cfg).unwrap();
    let per = tr.sample_loss_integrals.unwrap();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    assert!((mean - tr.loss_integral).abs() <= 1e-10 * tr.loss_integral);
}

#[test]
fn divergence_is_reported() {
    let data = generate_sparse_regression(5, 10, 2, 16).unwrap();
    let mut cfg = config(Algorithm::Gd, 5.0, 3.0, 10);
    cfg.max_steps = 10_000;
    let tr = run_gd(&data, &cfg).unwrap();
    assert_eq!(tr.status, Status::Diverged);
}

#[test]
fn config_validation() {
    let data = generate_sparse_regression(4, 8, 1, 1).unwrap();
    let good = config(Algorithm::Sgd, 0.01, 0.3, 8);
    assert!(good.validate(&data).is_ok());
    let mut c = good.clone();
    c.gamma = 0.0;
    assert!(c.validate(&data).is_err());
    let mut c = good.clone();
    c.batch_size = 5;
    assert!(c.validate(&data).is_err());
    let mut c = good.clone();
    c.alpha = vec![0.3; 7];
    assert!(c.validate(&data).is_err());
    let mut c = good.clone();
    c.depth = 3;
    assert!(c.validate(&data).is_err());
    let mut c = good;
    c.alpha[2] = -1.0;
    assert!(c.validate(&data).is_err());
    for a in Algorithm::ALL {
        assert_eq!(Algorithm::parse(a.as_str()), Some(a));
    }
}
