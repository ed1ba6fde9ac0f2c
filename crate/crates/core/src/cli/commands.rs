use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Command, Format, RunConfig};
use super::{CliError, Output, EXIT_OK, EXIT_VALIDATION};
use crate::bogoliubov::truncated_solution;
use crate::error::Error;
use crate::meanfield::{critical_point, mf_observables, minimize_surface_numeric, stationary_rho, PhiSet};
use crate::model::{canonicalize, classify_phase, ModelParams};
use crate::scaling::{fit_peaks, peak_campaign, par_map, Edge, PeakRow, Window};
use crate::spectrum::{
    block_eigenvalues, dense_eigenvalues, excited_fraction, write_block_dump, write_ground_dump, ExactConfig,
    ExactSolver,
};

pub fn dispatch(cfg: &RunConfig) -> Result<Output, CliError> {
    let solver = ExactSolver::new(ExactConfig {
        max_n: cfg.max_n,
        ..Default::default()
    });
    match cfg.command {
        Command::Phase => phase(cfg),
        Command::Sweep => sweep(cfg, &solver),
        Command::Exponents => exponents(cfg, &solver),
        Command::Compare => compare(cfg, &solver),
    }
}

/// 17 significant digits; the exponent form keeps files byte-stable.
fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn params(cfg: &RunConfig, gamma_x: f64, n: usize) -> Result<ModelParams, CliError> {
    ModelParams::new(cfg.epsilon, gamma_x, cfg.gamma_y, n).map_err(|e| CliError::Config(e.to_string()))
}

fn grid(cfg: &RunConfig) -> Vec<(usize, f64)> {
    cfg.n_list
        .iter()
        .flat_map(|&n| cfg.gamma_x.iter().map(move |&g| (n, g)))
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct PhaseRow {
    gamma_x: f64,
    gamma_y: f64,
    epsilon: f64,
    #[serde(rename = "N")]
    n: usize,
    region: String,
    rho_c: f64,
    phi_c: &'static str,
    e_gs_mf: f64,
    ne_mf: f64,
}

fn phase(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut rows = Vec::new();
    for (n, g) in grid(cfg) {
        let p = params(cfg, g, n)?;
        let region = classify_phase(&p)?;
        let (c, swapped) = canonicalize(&p)?;
        let cp = critical_point(&c)?;
        let mf = mf_observables(&c)?;
        let phi_c = match (cp.phi_c_set, swapped) {
            (PhiSet::Undetermined, _) => "undetermined",
            (PhiSet::ZeroAndPi, false) => "0;pi",
            (PhiSet::ZeroAndPi, true) => "pi/2;3pi/2",
        };
        rows.push(PhaseRow {
            gamma_x: g,
            gamma_y: cfg.gamma_y,
            epsilon: cfg.epsilon,
            n,
            region: region.label().to_string(),
            rho_c: cp.rho_c,
            phi_c,
            e_gs_mf: mf.e_gs,
            ne_mf: mf.n_e,
        });
    }
    let main = match cfg.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut s = String::from("gamma_x,gamma_y,epsilon,N,region,rho_c,phi_c,e_gs_mf,ne_mf\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    num(r.gamma_x),
                    num(r.gamma_y),
                    num(r.epsilon),
                    r.n,
                    r.region,
                    num(r.rho_c),
                    r.phi_c,
                    num(r.e_gs_mf),
                    num(r.ne_mf)
                );
            }
            s
        }
    };
    Ok(Output {
        main,
        side: None,
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    gamma_x: f64,
    #[serde(rename = "N")]
    n: usize,
    e_gs_mf: Option<f64>,
    e_gs_trunc: Option<f64>,
    e_gs_exact: Option<f64>,
    ne_mf: Option<f64>,
    ne_trunc: Option<f64>,
    ne_exact: Option<f64>,
    gap_trunc: Option<f64>,
    gap1_exact: Option<f64>,
    gap2_exact: Option<f64>,
    gamma_y: f64,
    epsilon: f64,
    #[serde(skip)]
    dump: String,
}

const SWEEP_HEADER: &str =
    "gamma_x,N,e_gs_mf,e_gs_trunc,e_gs_exact,ne_mf,ne_trunc,ne_exact,gap_trunc,gap1_exact,gap2_exact,gamma_y,epsilon\n";

fn sweep_point(cfg: &RunConfig, solver: &ExactSolver, n: usize, g: f64) -> Result<SweepRow, CliError> {
    let p = params(cfg, g, n)?;
    let (c, _) = canonicalize(&p)?;
    let mut row = SweepRow {
        gamma_x: g,
        n,
        e_gs_mf: None,
        e_gs_trunc: None,
        e_gs_exact: None,
        ne_mf: None,
        ne_trunc: None,
        ne_exact: None,
        gap_trunc: None,
        gap1_exact: None,
        gap2_exact: None,
        gamma_y: cfg.gamma_y,
        epsilon: cfg.epsilon,
        dump: String::new(),
    };
    if cfg.evaluator.meanfield() {
        let mf = mf_observables(&c)?;
        row.e_gs_mf = Some(mf.e_gs);
        row.ne_mf = Some(mf.n_e);
    }
    if cfg.evaluator.truncated() {
        match truncated_solution(&c) {
            Ok(t) => {
                row.e_gs_trunc = Some(t.e_gs_t);
                row.ne_trunc = Some(t.n_e_t);
                row.gap_trunc = Some(t.gap);
            }
            // blank inside the singular guard
            Err(Error::SingularAtTransition { .. }) | Err(Error::DegenerateCouplings { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if cfg.evaluator.exact() {
        let s = solver.lowest_levels(&p, 3)?;
        let e0 = s.ground_energy();
        row.e_gs_exact = Some(e0 / p.n());
        row.ne_exact = Some(excited_fraction(&s));
        row.gap1_exact = s.energies.get(1).map(|l| (l.energy - e0).max(0.0));
        row.gap2_exact = s.energies.get(2).map(|l| (l.energy - e0).max(0.0));
        if cfg.dump.is_some() {
            let mut buf = Vec::new();
            write_block_dump(&mut buf, &solver.build_blocks(&p)?)?;
            write_ground_dump(&mut buf, &s)?;
            row.dump = format!("# gamma_x {} gamma_y {} epsilon {}\n", num(g), num(cfg.gamma_y), num(cfg.epsilon));
            row.dump += &String::from_utf8(buf).expect("ascii dump");
        }
    }
    Ok(row)
}

fn sweep(cfg: &RunConfig, solver: &ExactSolver) -> Result<Output, CliError> {
    let points = grid(cfg);
    let rows = par_map(cfg.jobs, &points, |&(n, g)| Ok(sweep_point(cfg, solver, n, g)))?;
    let rows = rows.into_iter().collect::<Result<Vec<_>, CliError>>()?;

    if let Some(path) = &cfg.dump {
        let text: String = rows.iter().map(|r| r.dump.as_str()).collect();
        std::fs::write(path, text)?;
    }
    let main = match cfg.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut s = String::from(SWEEP_HEADER);
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    num(r.gamma_x),
                    r.n,
                    opt(r.e_gs_mf),
                    opt(r.e_gs_trunc),
                    opt(r.e_gs_exact),
                    opt(r.ne_mf),
                    opt(r.ne_trunc),
                    opt(r.ne_exact),
                    opt(r.gap_trunc),
                    opt(r.gap1_exact),
                    opt(r.gap2_exact),
                    num(r.gamma_y),
                    num(r.epsilon)
                );
            }
            s
        }
    };
    Ok(Output {
        main,
        side: None,
        exit_code: EXIT_OK,
    })
}

fn edge_label(e: Option<Edge>) -> &'static str {
    match e {
        None => "",
        Some(Edge::Lower) => "lower",
        Some(Edge::Upper) => "upper",
    }
}

fn exponents(cfg: &RunConfig, solver: &ExactSolver) -> Result<Output, CliError> {
    // refuse before spending minutes on a campaign that cannot be fitted
    let usable = cfg.n_list.len() - usize::from(cfg.drop_smallest && !cfg.n_list.is_empty());
    if usable < 3 {
        return Err(Error::TooFewPoints(usable).into());
    }
    let mut base = params(cfg, 0.0, cfg.n_list[0])?;
    base.gamma_x = base.gamma_c();
    if cfg.special_line {
        base.gamma_y = base.gamma_c();
    }
    let window = match cfg.window {
        Some((a, b)) if cfg.special_line => Some(Window::open_above(a, b)?),
        Some((a, b)) => Some(Window::closed(a, b)?),
        None => None,
    };
    let rows: Vec<PeakRow> = peak_campaign(solver, &base, &cfg.n_list, window, cfg.special_line, cfg.jobs)?;
    let fit = fit_peaks(&rows, cfg.drop_smallest)?;

    let warnings: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.peak
                .edge
                .map(|e| format!("N = {}: maximum at the {} window edge", r.n_atoms, edge_label(Some(e))))
        })
        .collect();
    let summary = json!({
        "campaign": if cfg.special_line { "special" } else { "generic" },
        "epsilon": base.epsilon,
        "gamma_y": base.gamma_y,
        "slope": fit.slope,
        "prefactor": fit.prefactor,
        "intercept_log2": fit.intercept_log2,
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
        "drop_smallest": cfg.drop_smallest,
        "warnings": warnings,
    });

    let row_values: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "N": r.n_atoms,
                "gamma_star": r.peak.gamma_star,
                "chi_max": r.peak.value,
                "gamma_y": base.gamma_y,
                "epsilon": base.epsilon,
                "edge": r.peak.edge,
            })
        })
        .collect();
    let (main, side) = match cfg.format {
        Format::Json => (to_json(&json!({ "rows": row_values, "fit": summary })), None),
        Format::Csv => {
            let mut s = String::from("N,gamma_star,chi_max,gamma_y,epsilon,edge\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{}\n",
                    r.n_atoms,
                    num(r.peak.gamma_star),
                    num(r.peak.value),
                    num(base.gamma_y),
                    num(base.epsilon),
                    edge_label(r.peak.edge)
                );
            }
            (s, Some((".fit.json", to_json(&summary))))
        }
    };
    Ok(Output {
        main,
        side,
        exit_code: EXIT_OK,
    })
}

const DENSE_SETS: usize = 50;
const DENSE_MAX_N: usize = 12;
const CHI_SETS: usize = 8;
const CHI_N: usize = 200;
const MINIMIZER_SETS: usize = 20;
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    samples: usize,
    max_deviation: f64,
    tolerance: f64,
    /// Informational checks are reported but never fail the run.
    gating: bool,
    pass: bool,
}

impl Check {
    fn new(name: &'static str, samples: usize, max_deviation: f64, tolerance: f64, gating: bool) -> Self {
        Check {
            name,
            samples,
            max_deviation,
            tolerance,
            gating,
            pass: max_deviation <= tolerance,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn compare(cfg: &RunConfig, solver: &ExactSolver) -> Result<Output, CliError> {
    let tol = |default: f64| cfg.tolerance.unwrap_or(default);
    let mut rng = StdRng::seed_from_u64(cfg.seed);

    let dense_sets: Vec<ModelParams> = (0..DENSE_SETS)
        .map(|_| {
            let n = rng.gen_range(1..=DENSE_MAX_N);
            ModelParams::new(rng.gen_range(0.2..2.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), n)
        })
        .collect::<Result<_, _>>()?;
    let chi_sets: Vec<ModelParams> = (0..CHI_SETS)
        .map(|_| ModelParams::new(1.0, rng.gen_range(-3.0..1.0), rng.gen_range(-3.0..3.0), CHI_N))
        .collect::<Result<_, _>>()?;
    let mf_sets: Vec<ModelParams> = (0..MINIMIZER_SETS)
        .map(|_| {
            let n = rng.gen_range(2..=400);
            ModelParams::new(1.0, rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), n)
        })
        .collect::<Result<_, _>>()?;

    let dense = par_map(cfg.jobs, &dense_sets, |p| {
        let a = dense_eigenvalues(p);
        let b = block_eigenvalues(&solver.build_blocks(p)?)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    })?;
    let chi = par_map(cfg.jobs, &chi_sets, |p| {
        let r = solver.chi_f_resolvent(p)?;
        let s = solver.chi_f_sum(p)?;
        let f = solver.chi_f_finite_difference(p, FD_STEP)?;
        Ok((rel(s, r), rel(f, r)))
    })?;
    let mf = par_map(cfg.jobs, &mf_sets, |p| {
        let (c, _) = canonicalize(p)?;
        let num = minimize_surface_numeric(&c)?.rho_c;
        let scale = c.n().sqrt();
        Ok((
            (num - stationary_rho(&c)?).abs() / scale,
            (num - critical_point(&c)?.rho_c).abs() / scale,
        ))
    })?;

    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, f64::max);
    let checks = vec![
        Check::new("dense_vs_block_eigenvalues", DENSE_SETS, max(&mut dense.iter().copied()), tol(1e-10), true),
        Check::new("chi_sum_vs_resolvent_rel", CHI_SETS, max(&mut chi.iter().map(|c| c.0)), tol(1e-8), true),
        Check::new("chi_fd_vs_resolvent_rel", CHI_SETS, max(&mut chi.iter().map(|c| c.1)), tol(1e-3), true),
        Check::new(
            "minimizer_vs_stationary_rho_over_sqrt_n",
            MINIMIZER_SETS,
            max(&mut mf.iter().map(|m| m.0)),
            tol(1e-5),
            true,
        ),
        // the closed form drops the 1/N piece of the surface; reported only
        Check::new(
            "minimizer_vs_closed_form_rho_over_sqrt_n",
            MINIMIZER_SETS,
            max(&mut mf.iter().map(|m| m.1)),
            tol(1e-5),
            false,
        ),
    ];
    let pass = checks.iter().all(|c| c.pass || !c.gating);
    let report = json!({
        "seed": cfg.seed,
        "dense_max_n": DENSE_MAX_N,
        "chi_n": CHI_N,
        "fd_step": FD_STEP,
        "checks": checks,
        "pass": pass,
    });
    let main = match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut s = String::from("check,samples,max_deviation,tolerance,gating,pass\n");
            for c in &checks {
                s += &format!(
                    "{},{},{},{},{},{}\n",
                    c.name,
                    c.samples,
                    num(c.max_deviation),
                    num(c.tolerance),
                    c.gating,
                    c.pass
                );
            }
            s
        }
    };
    Ok(Output {
        main,
        side: None,
        exit_code: if pass { EXIT_OK } else { EXIT_VALIDATION },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn cfg(args: &[&str]) -> RunConfig {
        let mut v = vec!["lipkin"];
        v.extend_from_slice(args);
        super::super::Args::try_parse_from(v).unwrap().resolve(None).unwrap()
    }

    #[test]
    fn phase_row_example() {
        let out = dispatch(&cfg(&["phase", "--gamma-x=-2", "--gamma-y=1", "--n=100"])).unwrap();
        let lines: Vec<&str> = out.main.lines().collect();
        assert_eq!(lines.len(), 2);
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[4], "DeformedII");
        assert_eq!(f[5].parse::<f64>().unwrap(), 5.0);
        assert_eq!(f[8].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn region_three_phase_reports_rotated_minima() {
        let out = dispatch(&cfg(&["phase", "--gamma-x=1", "--gamma-y=-2", "--n=100"])).unwrap();
        let row = out.main.lines().nth(1).unwrap();
        assert!(row.contains("DeformedIII") && row.contains("pi/2;3pi/2"), "{row}");
    }

    #[test]
    fn sweep_blanks_truncated_columns_at_transition() {
        let out = dispatch(&cfg(&["sweep", "--gamma-x-range=-2:0:3", "--n=10"])).unwrap();
        let lines: Vec<&str> = out.main.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER.trim_end());
        let mid: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(mid[0].parse::<f64>().unwrap(), -1.0);
        assert_eq!((mid[3], mid[6], mid[8]), ("", "", ""));
        assert!(!mid[4].is_empty() && !mid[9].is_empty());
        assert!(lines[1].split(',').all(|f| !f.is_empty()));
    }

    #[test]
    fn sweep_evaluator_selection() {
        let out = dispatch(&cfg(&["sweep", "--gamma-x=0.5", "--n=4", "--evaluator=exact"])).unwrap();
        let f: Vec<&str> = out.main.lines().nth(1).unwrap().split(',').collect();
        assert_eq!((f[2], f[3], f[5], f[6], f[8]), ("", "", "", "", ""));
        assert!(!f[4].is_empty());
    }

    #[test]
    fn exponent_fit_needs_three_sizes() {
        let e = dispatch(&cfg(&["exponents", "--n-list=2^10"])).err().unwrap();
        assert_eq!(e.exit_code(), super::super::EXIT_FIT);
        let e = dispatch(&cfg(&["exponents", "--n-list=64,128,256", "--drop-smallest"])).err().unwrap();
        assert_eq!(e.exit_code(), super::super::EXIT_FIT);
    }

    #[test]
    fn compare_passes_and_fails_on_tight_tolerance() {
        let out = dispatch(&cfg(&["compare", "--seed=3"])).unwrap();
        assert_eq!(out.exit_code, EXIT_OK, "{}", out.main);
        let again = dispatch(&cfg(&["compare", "--seed=3"])).unwrap();
        assert_eq!(out.main, again.main);
        let bad = dispatch(&cfg(&["compare", "--seed=3", "--tolerance=1e-20"])).unwrap();
        assert_eq!(bad.exit_code, EXIT_VALIDATION);
    }
}
