//! One pipeline per command. Each returns named scalar outputs and the tables
//! to be written as CSV.

use gluing_core::balance::find_balanced_scaling;
use gluing_core::curvature::{neck_scalar_curvature, scalar_curvature};
use gluing_core::fields::{integrate_values, max_abs};
use gluing_core::geometry::Chart;
use gluing_core::nonlinear::ball_radius;
use gluing_core::sampling::{ball_sample, rng, smooth_source};
use gluing_core::{balance, CapPair, GluedGeometry, LinearSolver, YamabeSolver};

use crate::config::{Command, ExperimentConfig};
use crate::error::{CliError, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Named outputs of one command, in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub metrics: Vec<(String, f64)>,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn put(&mut self, name: &str, v: f64) {
        self.metrics.push((name.to_string(), v));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Shortest round-trip representation, so equal inputs give equal bytes.
pub fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn caps(cfg: &ExperimentConfig) -> CapPair {
    CapPair {
        m: cfg.m,
        n: cfg.codim(),
        lump_volume_1: cfg.lump_volume_1,
        lump_volume_2: cfg.lump_volume_2,
    }
}

pub fn build_geometry(cfg: &ExperimentConfig) -> Result<GluedGeometry, CliError> {
    caps(cfg)
        .build(cfg.eps, &cfg.solve_params(), cfg.r, cfg.q)
        .context(|| format!("building geometry at eps = {}", cfg.eps))
}

fn node_rows(g: &GluedGeometry, cols: &[&[f64]]) -> Vec<Vec<String>> {
    (0..g.len())
        .map(|i| {
            let mut row = vec![
                i.to_string(),
                g.chart(i).as_str().to_string(),
                fmt(g.coordinate(i)),
            ];
            row.extend(cols.iter().map(|c| fmt(c[i])));
            row
        })
        .collect()
}

/// Largest `|S|` of the exact two-branch neck profile under central
/// differences; zero in exact arithmetic.
fn neck_exactness(g: &GluedGeometry) -> f64 {
    let ts = &g.neck.t_nodes;
    let p = &g.profile;
    let s = neck_scalar_curvature(g.n(), ts, g.neck.h_t, |t| p.branch1(t) + p.branch2(t));
    max_abs(&s)
}

pub fn run_build(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = build_geometry(cfg)?;
    let mut out = Outcome::default();
    out.put("nodes", g.len() as f64);
    out.put("h_t", g.neck.h_t);
    out.put("alpha", g.alpha());
    out.put("half_length", g.neck.half_length());
    out.put("total_volume", g.total_volume());
    out.put(
        "u_eps_min",
        g.u_eps.iter().fold(f64::INFINITY, |m, x| m.min(*x)),
    );
    out.put("neck_exactness", neck_exactness(&g));
    let u: Vec<f64> = (0..g.len())
        .map(|i| match g.chart(i) {
            Chart::Neck => g.u_eps[i - 1],
            _ => 1.0,
        })
        .collect();
    out.tables.push(Table {
        name: "geometry",
        header: cols(&["node_id", "chart", "coordinate", "u_eps", "vol_weight"]),
        rows: node_rows(&g, &[&u, &g.vol_weight]),
    });
    Ok(out)
}

pub fn run_curvature(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = build_geometry(cfg)?;
    let s = scalar_curvature(&g)
        .context(|| "scalar curvature".into())?
        .values;
    let eps = g.eps();
    let l = g.neck.half_length();
    let power = g.n() as i32 - 1;
    let weighted_sup = |bound: f64| {
        (0..g.len())
            .filter_map(|i| {
                g.t(i)
                    .filter(|t| t.abs() <= bound)
                    .map(|t| s[i].abs() * eps * t.cosh().powi(power))
            })
            .fold(0.0f64, f64::max)
    };
    let solver = LinearSolver::new(&g, cfg.linear_gamma()).context(|| "linear solver".into())?;
    let mut out = Outcome::default();
    out.put("sup_abs", max_abs(&s));
    out.put("weighted_sup_plateau", weighted_sup(l - 1.0));
    out.put("weighted_sup_neck", weighted_sup(l));
    out.put("source_norm", solver.source_norm(&s));
    out.put("integral", integrate_values(&g, &s));
    let abs_s: Vec<f64> = s.iter().map(|x| x.abs()).collect();
    out.put("l1_norm", integrate_values(&g, &abs_s));
    out.tables.push(Table {
        name: "curvature",
        header: cols(&["node_id", "chart", "coordinate", "S"]),
        rows: node_rows(&g, &[&s]),
    });
    Ok(out)
}

pub fn run_solve_linear(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = build_geometry(cfg)?;
    let gamma = cfg.linear_gamma();
    let solver = LinearSolver::new(&g, gamma).context(|| "linear solver".into())?;
    let (lo, hi) = solver.dirichlet_window();
    let mut rng = rng(cfg.seed);
    let w = solver.weight.clone();
    let weight = cfg.linear.weighted.then_some((&w, gamma + 2.0));

    let mut rows = Vec::new();
    let mut history = Vec::new();
    let mut sources = Vec::new();
    let mut lambdas = Vec::new();
    let (mut max_dir, mut max_err, mut max_first, mut max_res, mut max_it) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0usize);
    for k in 0..cfg.linear.sources {
        let f = smooth_source(&g, &mut rng, weight);
        let norm_f = solver.source_norm(&f);
        let window: Vec<f64> = (0..g.len())
            .map(|i| if i > lo && i < hi { f[i] } else { 0.0 })
            .collect();
        let v = solver
            .dirichlet_neck_solve(&window)
            .context(|| format!("Dirichlet solve, source {k}"))?;
        let dir_ratio = solver.norm(&v) / solver.source_norm(&window);
        let approx = solver
            .approximate_solve(&f)
            .context(|| format!("approximate solve, source {k}"))?;
        let err_ratio = approx.diagnostics.norm_r_err / norm_f;
        max_dir = max_dir.max(dir_ratio);
        max_err = max_err.max(err_ratio);
        let mut row = vec![
            k.to_string(),
            fmt(norm_f),
            fmt(dir_ratio),
            fmt(err_ratio),
            fmt(approx.lambda),
        ];
        if cfg.linear.iterate {
            let lin = solver
                .iterate_linear_solve(&f, cfg.solver.linear_tol, cfg.solver.linear_max_iter)
                .context(|| format!("Neumann iteration, source {k}"))?;
            let rel = lin.final_residual / norm_f;
            max_first = max_first.max(lin.first_ratio);
            max_res = max_res.max(rel);
            max_it = max_it.max(lin.iterations);
            for (j, r) in lin.residual_history.iter().enumerate() {
                history.push(vec![k.to_string(), j.to_string(), fmt(*r)]);
            }
            row.extend([
                fmt(lin.lambda),
                lin.iterations.to_string(),
                fmt(lin.first_ratio),
                fmt(rel),
            ]);
            lambdas.push(lin.lambda);
        }
        rows.push(row);
        sources.push(f);
    }

    let mut out = Outcome::default();
    out.put("gamma", gamma);
    out.put("max_dirichlet_ratio", max_dir);
    out.put("max_error_ratio", max_err);
    let mut header = cols(&[
        "source",
        "norm_f",
        "dirichlet_ratio",
        "error_ratio",
        "lambda_approx",
    ]);
    if cfg.linear.iterate {
        out.put("max_first_ratio", max_first);
        out.put("max_relative_residual", max_res);
        out.put("max_iterations", max_it as f64);
        header.extend(cols(&[
            "lambda",
            "iterations",
            "first_ratio",
            "relative_residual",
        ]));
    }
    if cfg.linear.iterate && sources.len() >= 2 {
        let (a, b) = (2.0, -3.0);
        let comb: Vec<f64> = sources[0]
            .iter()
            .zip(&sources[1])
            .map(|(x, y)| a * x + b * y)
            .collect();
        let lin = solver
            .iterate_linear_solve(&comb, cfg.solver.linear_tol, cfg.solver.linear_max_iter)
            .context(|| "Neumann iteration, combined source".into())?;
        let expect = a * lambdas[0] + b * lambdas[1];
        let scale = (a * lambdas[0]).abs() + (b * lambdas[1]).abs();
        out.put(
            "lambda_linearity",
            (lin.lambda - expect).abs() / scale.max(f64::MIN_POSITIVE),
        );
    }
    out.tables.push(Table {
        name: "linear",
        header,
        rows,
    });
    if cfg.linear.iterate {
        out.tables.push(Table {
            name: "linear_residuals",
            header: cols(&["source", "pass", "residual"]),
            rows: history,
        });
    }
    Ok(out)
}

pub fn run_solve_yamabe(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = build_geometry(cfg)?;
    let sp = cfg.solve_params();
    let mut y = YamabeSolver::new(&g, sp.gamma).context(|| "Yamabe solver".into())?;
    y.linear_tol = sp.linear_tol;
    y.linear_max_iter = sp.linear_max_iter;
    let st = y
        .solve(sp.picard_tol, sp.picard_max_iter)
        .context(|| "Picard iteration".into())?;
    let eps = g.eps();
    let r_eps =
        ball_radius(g.n(), eps, sp.gamma, cfg.yamabe.c0).context(|| "ball radius".into())?;
    let v_sup = st.v.max_abs();

    let mut out = Outcome::default();
    out.put("S", st.s);
    out.put("abs_S", st.s.abs());
    out.put("lambda", st.lambda);
    out.put("iterations", st.iteration as f64);
    out.put("residual", st.residual);
    out.put("v_sup", v_sup);
    out.put("v_weighted", y.linear.norm(&st.v.values));
    out.put("r_eps", r_eps);
    out.put("v_sup_over_r_eps", v_sup / r_eps);

    if cfg.yamabe.lipschitz_pairs > 0 {
        let mut rng = rng(cfg.seed);
        let w = y.linear.weight.clone();
        let mut lip = 0.0f64;
        for k in 0..cfg.yamabe.lipschitz_pairs {
            let a = ball_sample(&g, &mut rng, &w, sp.gamma, r_eps);
            let b = ball_sample(&g, &mut rng, &w, sp.gamma, r_eps);
            let ta = y
                .picard_step(&a)
                .context(|| format!("Picard step, pair {k}"))?;
            let tb = y
                .picard_step(&b)
                .context(|| format!("Picard step, pair {k}"))?;
            let dt: Vec<f64> = ta.u.iter().zip(&tb.u).map(|(x, z)| x - z).collect();
            let dv: Vec<f64> = a.iter().zip(&b).map(|(x, z)| x - z).collect();
            lip = lip.max(y.linear.norm(&dt) / y.linear.norm(&dv));
        }
        out.put("lipschitz", lip);
        out.put("lipschitz_over_eps", lip / eps);
        out.put("lipschitz_over_eps_n2", lip / eps.powi(g.n() as i32 - 2));
    }

    let picard = (0..st.step_norms.len())
        .map(|j| {
            vec![
                j.to_string(),
                fmt(st.step_norms[j]),
                fmt(st.s_history[j]),
                fmt(st.lambda_history[j]),
                fmt(st.residual_history[j]),
            ]
        })
        .collect();
    out.tables.push(Table {
        name: "picard",
        header: cols(&["j", "step_norm", "S", "lambda", "residual"]),
        rows: picard,
    });
    out.tables.push(Table {
        name: "solution",
        header: cols(&["node_id", "chart", "coordinate", "v"]),
        rows: node_rows(&g, &[&st.v.values]),
    });
    Ok(out)
}

pub fn run_balance(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let res = find_balanced_scaling(cfg.eps, &caps(cfg), &cfg.solve_params(), cfg.balance.r_max)
        .context(|| format!("homothety balancing at eps = {}", cfg.eps))?;
    let mut out = Outcome::default();
    out.put("R0", res.r0);
    out.put("Q0", res.q0);
    out.put("lambda", res.lambda);
    out.put("lambda_11", res.lambda_11);
    out.put("tolerance", res.tolerance);
    out.put("R_max", res.r_max);
    out.put("lambda_R_max_1", res.endpoints[0].lambda);
    out.put("lambda_1_R_max", res.endpoints[1].lambda);
    out.put("probes", res.probes.len() as f64);
    out.tables.push(Table {
        name: "balance",
        header: cols(&["R", "Q", "lambda", "lambda_hat", "S", "picard_iterations"]),
        rows: res
            .probes
            .iter()
            .map(|p| {
                vec![
                    fmt(p.r),
                    fmt(p.q),
                    fmt(p.lambda),
                    fmt(p.lambda_hat),
                    fmt(p.s),
                    p.picard_iterations.to_string(),
                ]
            })
            .collect(),
    });
    Ok(out)
}

/// `λ` at the configured `(R, Q)`; the per-point pipeline of a balance sweep.
pub fn run_lambda_probe(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = balance::lambda_of_scaling(cfg.r, cfg.q, cfg.eps, &caps(cfg), &cfg.solve_params())
        .context(|| format!("eigenvalue at (R, Q) = ({}, {})", cfg.r, cfg.q))?;
    let mut out = Outcome::default();
    out.put("lambda", p.lambda);
    out.put("lambda_hat", p.lambda_hat);
    out.put("S", p.s);
    out.put("picard_iterations", p.picard_iterations as f64);
    Ok(out)
}

pub fn run_deform(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let res =
        balance::solve_deformation(cfg.eps, &caps(cfg), cfg.deform_params(), cfg.solve_params())
            .context(|| format!("deformation balancing at eps = {}", cfg.eps))?;
    let en = cfg.eps.powi(cfg.codim() as i32 - 2);
    let root = &res.root;
    let fc = &res.final_check;
    let mut out = Outcome::default();
    out.put("r", root.r);
    out.put("s", root.s);
    out.put("sum_over_eps_n2", (root.r + root.s) / en);
    out.put("G", root.g_value);
    out.put("H", root.h_value);
    out.put("E1", root.e1);
    out.put("E2", root.e2);
    out.put("abs_E2", root.e2.abs());
    out.put("lambda", root.lambda);
    out.put("lambda_tolerance", res.lambda_tolerance);
    out.put("bisections", res.bisections as f64);
    out.put("final_integral", fc.integral);
    out.put("final_volume", fc.volume);
    out.put("final_sup", fc.sup_abs);
    out.tables.push(Table {
        name: "deform_curve",
        header: cols(&[
            "r",
            "s",
            "G",
            "H",
            "E1",
            "E2",
            "lambda",
            "picard_iterations",
        ]),
        rows: res
            .curve
            .iter()
            .chain(std::iter::once(root))
            .map(|p| {
                vec![
                    fmt(p.r),
                    fmt(p.s),
                    fmt(p.g_value),
                    fmt(p.h_value),
                    fmt(p.e1),
                    fmt(p.e2),
                    fmt(p.lambda),
                    p.picard_iterations.to_string(),
                ]
            })
            .collect(),
    });
    Ok(out)
}

/// Runs a single non-sweep command. Inside a sweep, `balance` means one
/// eigenvalue probe at the point's `(R, Q)`.
pub fn run_single(cfg: &ExperimentConfig, in_sweep: bool) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Build => run_build(cfg),
        Command::Curvature => run_curvature(cfg),
        Command::SolveLinear => run_solve_linear(cfg),
        Command::SolveYamabe => run_solve_yamabe(cfg),
        Command::Balance if in_sweep => run_lambda_probe(cfg),
        Command::Balance => run_balance(cfg),
        Command::Deform => run_deform(cfg),
        Command::Sweep => Err(CliError::Config("`command`: sweep cannot be nested".into())),
    }
}
