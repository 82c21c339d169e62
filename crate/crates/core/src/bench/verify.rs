//! Self-check suite behind `marsm verify`.
//!
//! Every check runs at a fixed seed and reports its measured value next to
//! the threshold it must meet.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::RunConfig;
use super::runner::{execute, format_real};
use crate::matlin::{fro_norm, jacobi_svd, Mat, SVD_DEFAULT_TOL};
use crate::optim::{
    adjusted_recurrence_step, clip_fro, mars_m_step, moonlight_step, verify_schedule_lemma, AdjustedConfig,
    AdjustedState, MarsMConfig, MarsMState, MarsMode, MoonlightConfig, MoonlightState, Schedule,
};
use crate::polar::{exact_polar, newton_schulz, NsScheme, PolarMethod};
use crate::problems::{MlpDims, ParamSet, Problem, ProblemSpec, Sample, SyntheticMlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub bound: Bound,
    pub threshold: f64,
}

impl Check {
    fn new(name: &'static str, measured: f64, bound: Bound, threshold: f64) -> Self {
        Self {
            name,
            measured,
            bound,
            threshold,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.measured <= self.threshold,
            Bound::AtLeast => self.measured >= self.threshold,
            Bound::Above => self.measured > self.threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
            Bound::Above => ">",
        };
        write!(
            f,
            "{}  {:<36} measured {:<12.4e} {} {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            op,
            format_real(self.threshold)
        )
    }
}

/// Knobs for fault injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Quintic Newton–Schulz steps used throughout the suite.
    pub ns_steps: usize,
    /// Threshold passed to `clip_fro` where the contract expects 1.
    pub clip_threshold: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            ns_steps: 5,
            clip_threshold: 1.0,
        }
    }
}

pub fn verify(opts: &VerifyOptions) -> Vec<Check> {
    let mut checks = Vec::new();
    checks.extend(matlin_checks());
    checks.extend(polar_checks(opts));
    checks.extend(optim_checks(opts));
    checks.extend(problem_checks());
    checks.push(csv_determinism());
    checks
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng)).expect("finite")
}

/// Tall Gaussian matrix with `σ_min ≥ ratio·σ_max`, shapes up to `max_rows × max_cols`.
fn conditioned(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize, ratio: f64) -> Mat {
    loop {
        let n = rng.random_range(2..=max_cols);
        let m = rng.random_range(n..=max_rows.max(n));
        let a = gaussian(m, n, rng);
        let s = jacobi_svd(&a, SVD_DEFAULT_TOL).expect("svd").s;
        if s[n - 1] >= ratio * s[0] {
            return a;
        }
    }
}

fn dist(a: &Mat, b: &Mat) -> f64 {
    fro_norm(&a.sub(b).expect("same shape"))
}

fn matlin_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let (mut fro_err, mut submult, mut order, mut nondet) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY, 0.0);
    for _ in 0..30 {
        let (m, n) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let a = gaussian(m, n, &mut rng);
        let svd = jacobi_svd(&a, SVD_DEFAULT_TOL).expect("svd");
        let f = fro_norm(&a);
        let ss: f64 = svd.s.iter().map(|s| s * s).sum();
        fro_err = fro_err.max((f * f - ss).abs() / (f * f));
        let nuc: f64 = svd.s.iter().sum();
        order = order.min((nuc - f).min(f - svd.s[0]) / f);

        let b = gaussian(n, rng.random_range(1..=8), &mut rng);
        let ab = fro_norm(&a.matmul(&b).expect("shapes agree"));
        let bound = svd.s[0] * fro_norm(&b);
        submult = submult.max((ab - bound) / bound);

        let again = jacobi_svd(&a, SVD_DEFAULT_TOL).expect("svd");
        if again != svd {
            nondet += 1.0;
        }
    }
    vec![
        Check::new("matlin.fro_norm_vs_singular_values", fro_err, Bound::AtMost, 1e-8),
        Check::new("matlin.submultiplicativity", submult, Bound::AtMost, 1e-12),
        Check::new("matlin.norm_ordering", order, Bound::AtLeast, -1e-12),
        Check::new("matlin.svd_determinism", nondet, Bound::AtMost, 0.0),
    ]
}

fn polar_checks(opts: &VerifyOptions) -> Vec<Check> {
    let quintic = NsScheme::quintic(opts.ns_steps);
    let cubic = NsScheme::cubic(30);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let (mut q_orth, mut c_orth) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let m = conditioned(&mut rng, 24, 12, 1e-3);
        let eye = Mat::identity(m.cols());
        let q = newton_schulz(&m, &quintic);
        q_orth = q_orth.max(dist(&q.t_matmul(&q).expect("gram"), &eye));
        let c = newton_schulz(&m, &cubic);
        c_orth = c_orth.max(dist(&c.t_matmul(&c).expect("gram"), &eye));
    }

    let (mut agree, mut sv_min, mut sv_max, mut align) = (0.0f64, f64::INFINITY, 0.0f64, f64::INFINITY);
    for _ in 0..40 {
        let m = conditioned(&mut rng, 64, 32, 1e-2);
        let exact = exact_polar(&m).expect("nonzero");
        agree = agree.max(dist(&newton_schulz(&m, &cubic), &exact));
        let q = newton_schulz(&m, &quintic);
        let s = jacobi_svd(&q, SVD_DEFAULT_TOL).expect("svd").s;
        sv_min = sv_min.min(s[s.len() - 1]);
        sv_max = sv_max.max(s[0]);
        let nuc: f64 = jacobi_svd(&m, SVD_DEFAULT_TOL).expect("svd").s.iter().sum();
        align = align.min(m.dot(&q).expect("same shape") / nuc);
    }

    let mut maximal = f64::INFINITY;
    for _ in 0..5 {
        let m = gaussian(8, 5, &mut rng);
        let best = m.dot(&exact_polar(&m).expect("nonzero")).expect("same shape");
        for _ in 0..100 {
            let q = exact_polar(&gaussian(8, 5, &mut rng)).expect("nonzero");
            maximal = maximal.min(best - m.dot(&q).expect("same shape"));
        }
    }

    let mut scale = 0.0f64;
    for _ in 0..5 {
        let m = gaussian(9, 6, &mut rng);
        for scheme in [quintic, cubic] {
            let base = newton_schulz(&m, &scheme);
            for c in [1e-3, 1.0, 1e3] {
                scale = scale.max(dist(&newton_schulz(&m.scale(c), &scheme), &base));
            }
        }
    }

    vec![
        Check::new("polar.quintic_orthonormality", q_orth, Bound::AtMost, 0.3),
        Check::new("polar.cubic_orthonormality", c_orth, Bound::AtMost, 1e-6),
        Check::new("polar.cubic_agreement", agree, Bound::AtMost, 1e-6),
        Check::new("polar.quintic_sv_min", sv_min, Bound::AtLeast, 0.5),
        Check::new("polar.quintic_sv_max", sv_max, Bound::AtMost, 1.5),
        Check::new("polar.quintic_alignment", align, Bound::AtLeast, 0.9),
        Check::new("polar.exact_is_maximizer", maximal, Bound::AtLeast, -1e-12),
        Check::new("polar.scale_invariance", scale, Bound::AtMost, 1e-9),
    ]
}

fn optim_checks(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut checks = clip_checks(opts, &mut rng);

    let polar = PolarMethod::NewtonSchulz(NsScheme::quintic(opts.ns_steps));
    let moon = MoonlightConfig {
        lambda: 0.0,
        polar,
        ..MoonlightConfig::default()
    };
    let mars = MarsMConfig {
        lambda: 0.0,
        polar,
        ..MarsMConfig::default()
    };
    let (mut rms_min, mut rms_max) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let g = conditioned(&mut rng, 24, 12, 1e-2);
        let (r, c) = g.shape();
        let x = Mat::zeros(r, c);
        let d1 = moonlight_step(&mut MoonlightState::new(r, c), &x, &g, &moon).expect("step").direction;
        let mut st = MarsMState::new(r, c, MarsMode::Approximate);
        let d2 = mars_m_step(&mut st, &x, &g, None, &mars).expect("step").direction;
        for d in [d1, d2] {
            rms_min = rms_min.min(d.rms());
            rms_max = rms_max.max(d.rms());
        }
    }
    checks.push(Check::new("optim.update_rms_min", rms_min, Bound::AtLeast, 0.15));
    checks.push(Check::new("optim.update_rms_max", rms_max, Bound::AtMost, 0.25));

    checks.push(Check::new("optim.equivalence_approx_adjusted", equivalence_a(&mut rng), Bound::AtMost, 1e-10));
    checks.push(Check::new("optim.equivalence_moonlight", equivalence_b(&mut rng), Bound::AtMost, 1e-10));

    let mut worst_eta = 0.0f64;
    let mut beta_ok = true;
    for s in [2.0, 3.0, 4.0, 100.0] {
        for t in 1..=100_000 {
            let v = Schedule::Theory { s }.eval(t).expect("valid schedule");
            worst_eta = worst_eta.max(v.eta);
            beta_ok &= v.beta_next.is_some_and(|b| (0.0..1.0).contains(&b));
        }
    }
    if !beta_ok {
        worst_eta = f64::INFINITY;
    }
    checks.push(Check::new("optim.theory_schedule_validity", worst_eta, Bound::AtMost, 0.5));

    checks.push(Check::new("optim.step_determinism", step_mismatches(&mut rng), Bound::AtMost, 0.0));

    let mut neutral = 0.0f64;
    for _ in 0..5 {
        let g = gaussian(7, 5, &mut rng);
        let x = gaussian(7, 5, &mut rng);
        let base = moonlight_step(&mut MoonlightState::new(7, 5), &x, &g, &moon).expect("step").direction;
        for c in [1e-3, 1e3] {
            let d = moonlight_step(&mut MoonlightState::new(7, 5), &x, &g.scale(c), &moon)
                .expect("step")
                .direction;
            neutral = neutral.max(dist(&d, &base));
        }
    }
    checks.push(Check::new("optim.direction_scale_neutrality", neutral, Bound::AtMost, 1e-9));

    let slack = [1, 2, 4, 100]
        .iter()
        .map(|&s| verify_schedule_lemma(s, 1_000_000).min_slack)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new("optim.schedule_lemma_slack", slack, Bound::Above, 0.0));
    checks
}

fn clip_checks(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const CONTRACT: f64 = 1.0;
    let (mut excess, mut not_identity, mut direction) = (f64::NEG_INFINITY, 0.0, 0.0f64);
    for i in 0..1000 {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let c = gaussian(rng.random_range(1..=6), rng.random_range(1..=6), rng).scale(scale);
        let out = clip_fro(&c, opts.clip_threshold);
        excess = excess.max(fro_norm(&out) - CONTRACT);
        // thresholds other than the pinned one exercise the full contract
        let tau = if i % 2 == 0 { CONTRACT } else { 10f64.powf(rng.random_range(-3.0..3.0)) };
        let out_tau = if tau == CONTRACT { out } else { clip_fro(&c, tau) };
        if tau != CONTRACT {
            excess = excess.max(fro_norm(&out_tau) - tau);
        }
        if fro_norm(&c) <= tau && out_tau != c {
            not_identity += 1.0;
        }
        let (nc, no) = (fro_norm(&c), fro_norm(&out_tau));
        if nc > 0.0 {
            direction = direction.max(dist(&c.scale(1.0 / nc), &out_tau.scale(1.0 / no)));
        }
    }
    vec![
        Check::new("optim.clip_norm_bound", excess, Bound::AtMost, 1e-15),
        Check::new("optim.clip_identity_below", not_identity, Bound::AtMost, 0.0),
        Check::new("optim.clip_direction", direction, Bound::AtMost, 1e-12),
    ]
}

fn rel(a: &Mat, b: &Mat) -> f64 {
    dist(a, b) / fro_norm(b).max(f64::MIN_POSITIVE)
}

/// Approximate MARS-M without clipping against the adjusted-momentum form,
/// seeded from the MARS-M state after its first step.
fn equivalence_a(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for gamma in [0.01, 0.025, 0.5] {
        let cfg = MarsMConfig {
            gamma,
            clip: None,
            lambda: 0.0,
            polar: PolarMethod::Svd,
            ..MarsMConfig::default()
        };
        let adj = AdjustedConfig::new(cfg.beta, gamma);
        let x = Mat::zeros(4, 3);
        let mut st = MarsMState::new(4, 3, MarsMode::Approximate);
        let g1 = gaussian(4, 3, rng);
        mars_m_step(&mut st, &x, &g1, None, &cfg).expect("step");
        let mut a = AdjustedState::from_correction_state(&st.momentum, &g1, &adj).expect("beta in range");
        for _ in 0..500 {
            let g = gaussian(4, 3, rng);
            mars_m_step(&mut st, &x, &g, None, &cfg).expect("step");
            let m = adjusted_recurrence_step(&mut a, &g, &adj).expect("step");
            worst = worst.max(rel(&m, &st.momentum));
        }
    }
    worst
}

/// Moonlight's buffer form against `M_t = β·M_{t−1} + (1+β)·g_t − β·g_{t−1}`
/// and the adjusted form with `w = 1/(1−β)`, `γ = 1`.
fn equivalence_b(rng: &mut ChaCha8Rng) -> f64 {
    let cfg = MoonlightConfig {
        polar: PolarMethod::Svd,
        lambda: 0.0,
        ..MoonlightConfig::default()
    };
    let beta = cfg.beta;
    let adj = AdjustedConfig {
        beta,
        gamma: 1.0,
        grad_weight: 1.0 / (1.0 - beta),
    };
    let x = Mat::zeros(4, 3);
    let mut st = MoonlightState::new(4, 3);
    let mut a = AdjustedState::new(4, 3);
    let mut expanded = Mat::zeros(4, 3);
    let mut g_prev = Mat::zeros(4, 3);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let g = gaussian(4, 3, rng);
        moonlight_step(&mut st, &x, &g, &cfg).expect("step");
        let m = st.buffer.lin_comb(beta, &g, 1.0).expect("same shape");
        expanded = expanded
            .lin_comb(beta, &g, 1.0 + beta)
            .and_then(|e| e.lin_comb(1.0, &g_prev, -beta))
            .expect("same shape");
        let adjusted = adjusted_recurrence_step(&mut a, &g, &adj).expect("step");
        worst = worst.max(rel(&m, &expanded)).max(rel(&adjusted, &expanded));
        g_prev = g;
    }
    worst
}

fn step_mismatches(rng: &mut ChaCha8Rng) -> f64 {
    let cfg = MarsMConfig {
        mode: MarsMode::Exact,
        ..MarsMConfig::default()
    };
    let grads: Vec<(Mat, Mat)> = (0..50).map(|_| (gaussian(6, 4, rng), gaussian(6, 4, rng))).collect();
    let trajectory = || {
        let mut st = MarsMState::new(6, 4, MarsMode::Exact);
        let mut x = Mat::zeros(6, 4);
        let mut out = Vec::new();
        for (g, g_ref) in &grads {
            x = mars_m_step(&mut st, &x, g, Some(g_ref), &cfg).expect("step").params;
            out.push(x.clone());
        }
        out
    };
    let (a, b) = (trajectory(), trajectory());
    a.iter().zip(&b).filter(|(p, q)| p != q).count() as f64
}

fn problems_under_test() -> Vec<(&'static str, Box<dyn Problem>)> {
    let specs = [
        (
            "quadratic",
            ProblemSpec::Quadratic {
                m: 6,
                n: 4,
                sigma: 0.5,
                coupling: 0.5,
                target_scale: 1.0,
                data_seed: 11,
            },
        ),
        (
            "lowrank",
            ProblemSpec::LowRank {
                m: 8,
                n: 6,
                rank: 2,
                sigma: 0.3,
                init_scale: 0.5,
                data_seed: 12,
            },
        ),
        (
            "mlp",
            ProblemSpec::Mlp {
                dims: MlpDims {
                    input: 6,
                    hidden: 5,
                    classes: 3,
                },
                batch: 8,
                dataset_size: 64,
                init_scale: 1.0,
                data_seed: 13,
            },
        ),
    ];
    specs
        .into_iter()
        .map(|(n, s)| (n, s.build().expect("valid spec")))
        .collect()
}

/// Random point near the problem's initialization.
fn perturbed_init(p: &dyn Problem, seed: u64, rng: &mut ChaCha8Rng) -> ParamSet {
    let mut x = p.init(seed);
    for param in x.iter_mut() {
        let (r, c) = param.value.shape();
        param.value = param.value.lin_comb(1.0, &gaussian(r, c, rng), 0.5).expect("same shape");
    }
    x
}

fn problem_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let problems = problems_under_test();

    // Replays: identical sample ⇒ identical noise / minibatch.
    let mut replay = 0.0f64;
    for (_, p) in &problems {
        let s = Sample::new(3, 17);
        let (xa, xb) = (perturbed_init(p.as_ref(), 1, &mut rng), perturbed_init(p.as_ref(), 2, &mut rng));
        let ga = p.evaluate(&xa, s).expect("eval").grad;
        if p.evaluate(&xa, s).expect("eval").grad != ga {
            replay = f64::INFINITY;
        }
        if let (Some(ta), Some(tb)) = (p.true_grad(&xa), p.true_grad(&xb)) {
            let gb = p.evaluate(&xb, s).expect("eval").grad;
            let na = ga.lin_comb(1.0, &ta.expect("grad"), -1.0).expect("same params");
            let nb = gb.lin_comb(1.0, &tb.expect("grad"), -1.0).expect("same params");
            replay = replay.max(na.lin_comb(1.0, &nb, -1.0).expect("same params").fro_norm());
        }
    }
    let mlp = SyntheticMlp::generated(
        MlpDims {
            input: 6,
            hidden: 5,
            classes: 3,
        },
        8,
        64,
        1.0,
        13,
    )
    .expect("valid mlp");
    let s = Sample::new(3, 17);
    if mlp.batch_indices(s) != mlp.batch_indices(s) {
        replay = f64::INFINITY;
    }
    let mut checks = vec![Check::new("problems.sample_replay", replay, Bound::AtMost, 1e-12)];

    // Unbiasedness on the quadratic, in units of the allowed 3σ/√N.
    let (_, quad) = &problems[0];
    let sigma = quad.meta().sigma.expect("quadratic has sigma");
    let x = perturbed_init(quad.as_ref(), 0, &mut rng);
    let truth = quad.true_grad(&x).expect("closed form").expect("grad");
    let n = 10_000u64;
    let mut acc = truth.lin_comb(0.0, &truth, 0.0).expect("same params");
    for t in 1..=n {
        let g = quad.evaluate(&x, Sample::new(99, t)).expect("eval").grad;
        acc = acc.lin_comb(1.0, &g, 1.0 / n as f64).expect("same params");
    }
    let diff = acc.lin_comb(1.0, &truth, -1.0).expect("same params");
    let worst = diff
        .iter()
        .flat_map(|p| p.value.as_slice().iter().copied())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push(Check::new(
        "problems.quadratic_unbiased",
        worst / (3.0 * sigma / (n as f64).sqrt()),
        Bound::AtMost,
        1.0,
    ));

    // Smoothness: quadratic against its analytic L, the others against a
    // bound fitted on separate pairs.
    for (name, p) in &problems {
        let ratio = |rng: &mut ChaCha8Rng| {
            let s = Sample::new(5, rng.random_range(1..1000));
            let xa = perturbed_init(p.as_ref(), 1, rng);
            let xb = perturbed_init(p.as_ref(), 1, rng);
            let ga = p.evaluate(&xa, s).expect("eval").grad;
            let gb = p.evaluate(&xb, s).expect("eval").grad;
            ga.lin_comb(1.0, &gb, -1.0).expect("same").fro_norm()
                / xa.lin_comb(1.0, &xb, -1.0).expect("same").fro_norm()
        };
        let l = match p.meta().l_smooth {
            Some(l) => l * (1.0 + 1e-12),
            None => 2.0 * (0..100).map(|_| ratio(&mut rng)).fold(0.0, f64::max),
        };
        let worst = (0..100).map(|_| ratio(&mut rng)).fold(0.0, f64::max);
        let check_name = match *name {
            "quadratic" => "problems.smoothness_quadratic",
            "lowrank" => "problems.smoothness_lowrank",
            _ => "problems.smoothness_mlp",
        };
        checks.push(Check::new(check_name, worst / l, Bound::AtMost, 1.0));
    }

    let mut fd = 0.0f64;
    for (_, p) in &problems {
        for k in 0..5 {
            let x = perturbed_init(p.as_ref(), k, &mut rng);
            fd = fd.max(finite_difference_error(p.as_ref(), &x, Sample::new(7, k + 1)));
        }
    }
    checks.push(Check::new("problems.gradient_finite_difference", fd, Bound::AtMost, 1e-5));
    checks
}

/// `‖g − g_fd‖_F / ‖g‖_F` with entrywise central differences.
pub fn finite_difference_error(p: &dyn Problem, x: &ParamSet, s: Sample) -> f64 {
    let g = p.evaluate(x, s).expect("eval").grad;
    let mut err2 = 0.0;
    let names: Vec<String> = x.iter().map(|q| q.name.clone()).collect();
    for (pi, name) in names.iter().enumerate() {
        let base = x.get(name).expect("present");
        let gp = g.get(name).expect("present");
        for i in 0..base.len() {
            let (r, c) = (i / base.cols(), i % base.cols());
            let h = 1e-5 * base[(r, c)].abs().max(1.0);
            let shifted = |d: f64| {
                let mut y = x.clone();
                let param = y.iter_mut().nth(pi).expect("same order");
                param.value[(r, c)] += d;
                p.evaluate(&y, s).expect("eval").loss
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            err2 += (fd - gp[(r, c)]).powi(2);
        }
    }
    err2.sqrt() / g.fro_norm().max(f64::MIN_POSITIVE)
}

fn csv_determinism() -> Check {
    let cfg: RunConfig = "[run]\nname = verify\nsteps = 30\nseed = 7\n\
        [problem]\nname = lowrank\nm = 6\nn = 5\nrank = 2\n\
        [optimizer]\nname = mars_m\nmode = exact\ngamma = 0.5\n"
        .parse()
        .expect("static config");
    let strip = |cfg: &RunConfig| -> Vec<String> {
        execute(cfg)
            .expect("run")
            .records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{:?},{},{}",
                    r.step,
                    format_real(r.loss),
                    format_real(r.grad_norm_fro),
                    r.true_grad_norm.map(format_real),
                    format_real(r.update_rms),
                    format_real(r.eta)
                )
            })
            .collect()
    };
    let (a, b) = (strip(&cfg), strip(&cfg));
    let mismatches = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Check::new("bench.run_determinism", mismatches as f64, Bound::AtMost, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(checks: &'a [Check], name: &str) -> &'a Check {
        checks.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn one_ns_step_breaks_the_quintic_band() {
        let checks = polar_checks(&VerifyOptions {
            ns_steps: 1,
            ..VerifyOptions::default()
        });
        assert!(!find(&checks, "polar.quintic_sv_min").passed());
        assert!(find(&checks, "polar.cubic_agreement").passed());
    }

    #[test]
    fn misconfigured_clip_breaks_the_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bad = clip_checks(
            &VerifyOptions {
                clip_threshold: 2.0,
                ..VerifyOptions::default()
            },
            &mut rng,
        );
        assert!(!find(&bad, "optim.clip_norm_bound").passed());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let good = clip_checks(&VerifyOptions::default(), &mut rng);
        assert!(good.iter().all(Check::passed), "{good:?}");
    }

    #[test]
    fn check_display() {
        let c = Check::new("x.y", 0.5, Bound::AtLeast, 0.9);
        assert!(!c.passed());
        assert!(c.to_string().starts_with("FAIL  x.y"));
        assert!(Check::new("a", 0.0, Bound::AtMost, 0.0).passed());
        assert!(!Check::new("a", 0.0, Bound::Above, 0.0).passed());
    }
}
