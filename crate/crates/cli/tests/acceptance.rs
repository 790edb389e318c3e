//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gluing_cli::config::SweepConfig;
use gluing_cli::pipeline::{self, Outcome};
use gluing_cli::{run_sweep, Command, ExperimentConfig, SweepKey};
use gluing_core::fields::integrate_values;
use gluing_core::fit::spread;
use gluing_core::geometry::{default_alpha, Cutoff};
use gluing_core::{fit_slope, CapPair, GridParams, LinearSolver, SolveParams};

const EPS_SWEEP: [f64; 5] = [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn config(command: Command, n: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(command);
    c.m = n;
    c
}

fn sweep(mut cfg: ExperimentConfig, eps: &[f64]) -> Vec<(SweepKey, Outcome)> {
    let target = cfg.command;
    cfg.command = Command::Sweep;
    cfg.sweep = Some(SweepConfig {
        target,
        eps: eps.to_vec(),
        h_t: vec![],
        r: vec![],
        q: vec![],
    });
    run_sweep(&cfg).expect("sweep").0
}

fn column(rows: &[(SweepKey, Outcome)], name: &str) -> Vec<f64> {
    rows.iter().map(|(_, o)| o.get(name).expect(name)).collect()
}

fn eps_of(rows: &[(SweepKey, Outcome)]) -> Vec<f64> {
    rows.iter().map(|(k, _)| k.eps).collect()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    fit_slope(xs, ys).expect("fit").slope
}

/// Exact two-branch neck profile: `‖S‖_∞` is pure discretization error.
fn neck_exactness() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let (mut hs, mut ss) = (vec![], vec![]);
        for h in [0.04, 0.02, 0.01, 0.005] {
            let mut c = config(Command::Build, n);
            c.grid.h_t = Some(h);
            let o = pipeline::run_build(&c).expect("build");
            hs.push(o.get("h_t").unwrap());
            ss.push(o.get("neck_exactness").unwrap());
        }
        let p = slope(&hs, &ss);
        pass &= (p - 2.0).abs() <= 0.2;
        parts.push(format!("n={n} slope {p:.3}"));
    }
    Verdict::new(pass, format!("{} (want 2 ± 0.2)", parts.join(", ")))
}

fn curvature_estimate() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let rows = sweep(config(Command::Curvature, n), &EPS_SWEEP);
        let neck = spread(&column(&rows, "weighted_sup_neck"));
        let plateau = spread(&column(&rows, "weighted_sup_plateau"));
        pass &= neck <= 4.0;
        parts.push(format!(
            "n={n} spread {neck:.2} on |t|<=L ({plateau:.2} on |t|<=L-1)"
        ));
    }
    Verdict::new(pass, format!("{} (want <= 4)", parts.join(", ")))
}

fn weighted_linear(n: usize) -> Vec<(SweepKey, Outcome)> {
    let mut c = config(Command::SolveLinear, n);
    c.linear.weighted = true;
    c.linear.iterate = false;
    c.linear.sources = 20;
    sweep(c, &EPS_SWEEP)
}

fn dirichlet_estimate() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let r = column(&weighted_linear(n), "max_dirichlet_ratio");
        let s = spread(&r);
        pass &= s <= 4.0;
        parts.push(format!(
            "n={n} ratio in [{:.3}, {:.3}] spread {s:.2}",
            min(&r),
            max(&r)
        ));
    }
    Verdict::new(pass, format!("{} (want spread <= 4)", parts.join(", ")))
}

fn error_order() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let rows = weighted_linear(n);
        let eps = eps_of(&rows);
        let ratio = column(&rows, "max_error_ratio");
        // Divide out e^{(n-2)α} = ε^{-1/2} from the bound at α = |log ε|/(2(n-2)).
        let norm: Vec<f64> = ratio
            .iter()
            .zip(&eps)
            .map(|(r, e)| r / ((n as f64 - 2.0) * default_alpha(n, *e)).exp())
            .collect();
        let raw = slope(&eps, &ratio);
        let p = slope(&eps, &norm);
        pass &= (p - (n as f64 - 2.0)).abs() <= 0.3;
        parts.push(format!(
            "n={n} slope {p:.3} after e^((n-2)alpha) (raw {raw:.3})"
        ));
    }
    Verdict::new(pass, format!("{} (want n-2 ± 0.3)", parts.join(", ")))
}

fn neumann_series() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let mut c = config(Command::SolveLinear, n);
        c.eps = 0.015625;
        let o = pipeline::run_solve_linear(&c).expect("solve-linear");
        let hist = o
            .tables
            .iter()
            .find(|t| t.name == "linear_residuals")
            .unwrap();
        let lin = o.tables.iter().find(|t| t.name == "linear").unwrap();
        let col = |name: &str| lin.header.iter().position(|h| h == name).unwrap();
        let (fi, ni) = (col("first_ratio"), col("norm_f"));
        let mut worst = 0.0f64;
        for row in &lin.rows {
            let first: f64 = row[fi].parse().unwrap();
            let norm_f: f64 = row[ni].parse().unwrap();
            let r: Vec<f64> = hist
                .rows
                .iter()
                .filter(|h| h[0] == row[0])
                .map(|h| h[2].parse().unwrap())
                .collect();
            // Pass ratios until round-off takes over.
            for w in r.windows(2).filter(|w| w[1] > 1e-10 * norm_f) {
                worst = worst.max(w[1] / w[0] / first);
            }
        }
        let res = o.get("max_relative_residual").unwrap();
        let lin_err = o.get("lambda_linearity").unwrap();
        let ok = worst <= 1.0 + 1e-9 && res <= 1e-9 && lin_err <= 1e-10;
        pass &= ok;
        parts.push(format!(
            "n={n} pass ratio / first {worst:.3}, residual {res:.1e}, lambda linearity {lin_err:.1e}"
        ));
    }
    Verdict::new(pass, parts.join(", "))
}

fn min(v: &[f64]) -> f64 {
    v.iter().fold(f64::INFINITY, |m, x| m.min(*x))
}

fn max(v: &[f64]) -> f64 {
    v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x))
}

fn yamabe() -> (Verdict, Verdict) {
    let mut p6 = Vec::new();
    let mut p7 = Vec::new();
    let (mut pass6, mut pass7) = (true, true);
    for n in [3, 4] {
        let rows = sweep(config(Command::SolveYamabe, n), &EPS_SWEEP);
        let eps = eps_of(&rows);
        let its = max(&column(&rows, "iterations"));
        let vr = column(&rows, "v_sup_over_r_eps");
        let lip = column(&rows, "lipschitz_over_eps");
        let lip_n = column(&rows, "lipschitz_over_eps_n2");
        let s = slope(&eps, &column(&rows, "abs_S"));
        let ok_lip = if n == 3 {
            spread(&lip) <= 4.0
        } else {
            // ε^{n-2} decay: Lip/ε is bounded but not constant.
            max(&lip) <= 2.0 * lip[lip.len() - 1] && spread(&lip_n) <= 4.0
        };
        // One C for the whole sweep: fix it at the coarsest ε with a factor 2
        // of slack, then every finer ε must stay below it.
        let coarse = eps
            .iter()
            .zip(&vr)
            .fold((f64::NEG_INFINITY, 0.0), |a, (e, v)| {
                if *e > a.0 {
                    (*e, *v)
                } else {
                    a
                }
            })
            .1;
        let c_bound = 2.0 * coarse;
        pass6 &= its <= 25.0 && max(&vr) <= c_bound && ok_lip;
        p6.push(format!(
            "n={n} iterations <= {its}, |v|/r_eps in [{:.2}, {:.2}] (C = {c_bound:.2}), Lip/eps in [{:.3}, {:.3}], Lip/eps^(n-2) spread {:.2}",
            min(&vr),
            max(&vr),
            min(&lip),
            max(&lip),
            spread(&lip_n)
        ));
        pass7 &= (s - (n as f64 - 2.0)).abs() <= 0.3;
        p7.push(format!("n={n} slope {s:.3}"));
    }
    (
        Verdict::new(pass6, p6.join("; ")),
        Verdict::new(pass7, format!("{} (want n-2 ± 0.3)", p7.join(", "))),
    )
}

fn balancing() -> Verdict {
    let mut c = config(Command::Balance, 3);
    c.eps = 0.015625;
    c.lump_volume_1 = 1.0;
    c.lump_volume_2 = 2.0;
    let o = pipeline::run_balance(&c).expect("balance");
    let (a, b) = (
        o.get("lambda_R_max_1").unwrap(),
        o.get("lambda_1_R_max").unwrap(),
    );
    let lam = o.get("lambda").unwrap();
    let l11 = o.get("lambda_11").unwrap();
    let tol = 1e-10 * l11.abs() + 1e-14;
    c.lump_volume_2 = 1.0;
    let sym = pipeline::run_balance(&c).expect("balance");
    let l_sym = sym.get("lambda_11").unwrap();
    let pass =
        o.get("R_max") == Some(16.0) && a * b < 0.0 && lam.abs() <= tol && l_sym.abs() <= 1e-10;
    Verdict::new(
        pass,
        format!(
            "lambda(16,1) {a:.3e}, lambda(1,16) {b:.3e}, (R0,Q0) = ({:.4}, {:.4}) with |lambda| {:.1e} <= {tol:.1e}; symmetric lambda(1,1) {l_sym:.1e}",
            o.get("R0").unwrap(),
            o.get("Q0").unwrap(),
            lam.abs()
        ),
    )
}

fn deformation() -> Verdict {
    let eps = [0.03125, 0.015625, 0.0078125, 0.00390625];
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [3, 4] {
        let rows = sweep(config(Command::Deform, n), &eps);
        let band = column(&rows, "sum_over_eps_n2");
        let e2 = column(&rows, "abs_E2");
        let p = slope(&eps_of(&rows), &e2);
        let vol_ok = rows.iter().all(|(_, o)| {
            o.get("final_integral").unwrap().abs() <= 1e-10 * o.get("final_volume").unwrap()
                && o.get("lambda").unwrap().abs() <= o.get("lambda_tolerance").unwrap()
        });
        let want = 2.0 * (n as f64 - 2.0);
        let ok = band.iter().all(|b| (0.9..=1.1).contains(b)) && (p - want).abs() <= 0.4 && vol_ok;
        pass &= ok;
        parts.push(format!(
            "n={n} (r+s)/eps^(n-2) in [{:.4}, {:.4}], E2 slope {p:.3}, final checks {}",
            min(&band),
            max(&band),
            if vol_ok { "ok" } else { "FAILED" }
        ));
    }
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("flat.toml");
    std::fs::write(&cfg, "command = \"deform\"\n[deform]\npairing_1 = 0.0\n").unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_gluing"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .expect("run gluing");
    let code = status.status.code();
    pass &= code == Some(4);
    parts.push(format!("Ricci-flat exit code {code:?}"));
    Verdict::new(pass, parts.join("; "))
}

fn structural_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let n = rng.gen_range(3..=4);
        let eps = 2f64.powf(-rng.gen_range(3.0..8.0));
        let caps = CapPair::new(n, rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0));
        let sp = SolveParams {
            grid: GridParams::default(),
            ..SolveParams::default()
        };
        let g = caps
            .build(eps, &sp, rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0))
            .expect("geometry");
        let f: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lap = g.laplacian();
        let (lf, lh) = (lap.apply(&f), lap.apply(&h));
        let abs_scale = |v: &[f64]| {
            v.iter()
                .zip(&g.vol_weight)
                .map(|(x, w)| (x * w).abs())
                .sum::<f64>()
        };

        worst[0] = worst[0].max(integrate_values(&g, &lf).abs() / abs_scale(&lf));
        let a: Vec<f64> = h.iter().zip(&lf).map(|(x, y)| x * y).collect();
        let b: Vec<f64> = f.iter().zip(&lh).map(|(x, y)| x * y).collect();
        worst[1] = worst[1]
            .max((integrate_values(&g, &a) - integrate_values(&g, &b)).abs() / abs_scale(&a));
        let (c1, cp, c2) = (
            g.cutoff(Cutoff::Chi1),
            g.cutoff(Cutoff::ChiP),
            g.cutoff(Cutoff::Chi2),
        );
        for i in 0..g.len() {
            worst[2] = worst[2].max((c1[i] + cp[i] + c2[i] - 1.0).abs());
        }
        let solver = LinearSolver::new(&g, (n as f64 - 2.0) / 2.0).expect("solver");
        let beta = &solver.basis.beta.values;
        worst[3] = worst[3].max(integrate_values(&g, beta).abs() / abs_scale(beta));
    }
    let pass = worst.iter().all(|w| *w <= 1e-10);
    Verdict::new(
        pass,
        format!(
            "100 instances: divergence {:.1e}, adjointness {:.1e}, partition {:.1e}, beta mean {:.1e} (want <= 1e-10)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, budget: Duration, start: Instant, v: Verdict| {
        let took = start.elapsed();
        let pass = v.pass && took <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} {}: {name}: {} [{:.1}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    };

    let t = Instant::now();
    report(
        "1",
        "neck exactness",
        Duration::from_secs(5),
        t,
        neck_exactness(),
    );
    let t = Instant::now();
    report(
        "2",
        "scalar curvature estimate",
        Duration::from_secs(30),
        t,
        curvature_estimate(),
    );
    let t = Instant::now();
    report(
        "3",
        "Dirichlet neck estimate",
        Duration::from_secs(60),
        t,
        dirichlet_estimate(),
    );
    let t = Instant::now();
    report(
        "4",
        "approximate solve error order",
        Duration::from_secs(120),
        t,
        error_order(),
    );
    let t = Instant::now();
    report(
        "5",
        "Neumann series",
        Duration::from_secs(120),
        t,
        neumann_series(),
    );
    let t = Instant::now();
    let (v6, v7) = yamabe();
    let took = t.elapsed();
    report("6", "Picard contraction", Duration::from_secs(300), t, v6);
    report(
        "7",
        "constant scalar curvature order",
        Duration::from_secs(300),
        Instant::now() - took,
        v7,
    );
    let t = Instant::now();
    report(
        "8",
        "homothety balancing",
        Duration::from_secs(600),
        t,
        balancing(),
    );
    let t = Instant::now();
    report(
        "9",
        "deformation balancing",
        Duration::from_secs(600),
        t,
        deformation(),
    );
    let t = Instant::now();
    report(
        "10",
        "discrete structural identities",
        Duration::from_secs(30),
        t,
        structural_identities(),
    );

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
