//! Slower cross-module checks: resolvent cost, peak-search determinism and
//! the data collapse of exact susceptibility curves.

use std::time::{Duration, Instant};

use lipkin::scaling::{collapse_data, find_chi_max, CampaignPoint, Window};
use lipkin::spectrum::ExactSolver;
use lipkin::ModelParams;

fn p(gx: f64, gy: f64, n: usize) -> ModelParams {
    ModelParams::with_unit_epsilon(gx, gy, n).unwrap()
}

fn best_of<F: FnMut()>(repeats: usize, mut f: F) -> Duration {
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn resolvent_cost_is_linear() {
    let solver = ExactSolver::default();
    let small = p(-1.01, 1.0, 1 << 13);
    let large = p(-1.01, 1.0, 1 << 14);
    solver.chi_f_resolvent(&large).unwrap();
    let t_small = best_of(7, || {
        solver.chi_f_resolvent(&small).unwrap();
    });
    let t_large = best_of(7, || {
        solver.chi_f_resolvent(&large).unwrap();
    });
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
    assert!(ratio <= 2.5, "N = 2^14 vs 2^13 took {ratio:.2}x");
}

#[test]
fn peak_search_is_deterministic() {
    let solver = ExactSolver::default();
    let base = p(0.0, 1.0, 2048);
    let w = Window::default_for(&base, false);
    let a = find_chi_max(&solver, &base, w).unwrap();
    let b = find_chi_max(&solver, &base, w).unwrap();
    assert!((a.gamma_star - b.gamma_star).abs() <= 1e-8);
    assert_eq!(a.value, b.value);
}

#[test]
fn chi_peak_collapses_under_linear_scaling() {
    let solver = ExactSolver::default();
    let sizes = [512usize, 1024];
    let xs: Vec<f64> = (-8..=8).map(|i| 0.25 * i as f64).collect();
    let mut campaign = Vec::new();
    for &n in &sizes {
        for &x in &xs {
            let g = -1.0 + x / n as f64;
            campaign.push(CampaignPoint {
                n_atoms: n,
                gamma_x: g,
                chi: solver.chi_f_resolvent(&p(g, 1.0, n)).unwrap(),
            });
        }
    }
    let c = collapse_data(&campaign, 1.0, 4.0 / 3.0, -1.0);
    let (a, b) = c.split_at(xs.len());
    for (u, v) in a.iter().zip(b) {
        assert!((u.x - v.x).abs() < 1e-9);
        assert!((u.y - v.y).abs() / v.y < 0.10, "x = {}: {} vs {}", u.x, u.y, v.y);
    }
    // the collapsed curve is not symmetric about the transition
    let left = a[0].y;
    let right = a[a.len() - 1].y;
    assert!((left - right).abs() / left.max(right) > 0.01);
}
