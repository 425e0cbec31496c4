mod common;

use common::rng;
use crimesir::dynamics::{monitor_invariance, rk4_step, INVARIANCE_TOL};
use crimesir::stability::{jacobian_at, Mat3};
use crimesir::{integrate_backward, integrate_forward, AdjointState, ModelParams, State, TimeGrid};
use rand::Rng;

const BETAS: [f64; 5] = [2.0, 1.0, 0.5, 0.3, 0.05];

fn order_on<F: Fn(f64, &[f64; 1]) -> [f64; 1] + Copy>(
    rhs: F,
    y0: f64,
    exact: f64,
    t_end: f64,
) -> f64 {
    let err = |n: usize| {
        let dt = t_end / n as f64;
        let mut y = [y0];
        for k in 0..n {
            y = rk4_step(rhs, &y, k as f64 * dt, dt);
        }
        (y[0] - exact).abs()
    };
    (err(20) / err(40)).log2()
}

#[test]
fn rk4_order_on_nonautonomous_problem() {
    // y' = y·cos t, y(0) = 1  =>  y = exp(sin t)
    let p = order_on(|t, y| [y[0] * t.cos()], 1.0, 2f64.sin().exp(), 2.0);
    assert!((3.8..=4.2).contains(&p), "order {p}");
}

#[test]
fn rk4_order_on_logistic() {
    let exact = 1.0 / (1.0 + 9.0 * (-3.0f64).exp());
    let p = order_on(|_, y| [y[0] * (1.0 - y[0])], 0.1, exact, 3.0);
    assert!((3.8..=4.2).contains(&p), "order {p}");
}

#[test]
fn depletion_near_three_periods_for_beta_one() {
    let p = ModelParams::table2(1.0);
    let grid = TimeGrid::with_step(0.0, 5.0, 0.001).unwrap();
    let traj = integrate_forward(&State::new(1357.0, 136.0, 46.0), None, &p, &grid).unwrap();
    let t = traj.depletion_time(0.01).unwrap();
    assert!((2.5..=4.0).contains(&t), "{t}");
}

#[test]
fn trajectories_inside_region_stay_inside() {
    let mut r = rng(31);
    for case in 0..50 {
        let p = ModelParams::table2(BETAS[case % BETAS.len()]);
        let cap = p.capacity();
        // uniform point of the simplex scaled by a random fraction of capacity
        let n0 = cap * r.gen_range(0.0..=1.0);
        let (a, b) = (r.gen_range(0.0..1.0f64), r.gen_range(0.0..1.0f64));
        let (lo, hi) = (a.min(b), a.max(b));
        let x0 = State::new(n0 * lo, n0 * (hi - lo), n0 * (1.0 - hi));
        let grid = TimeGrid::with_step(0.0, 20.0, 0.01).unwrap();
        let traj = integrate_forward(&x0, None, &p, &grid).unwrap();
        let rep = monitor_invariance(&traj, &p);
        assert!(
            rep.starts_in_region && rep.stays_in_region(),
            "{x0:?}: {rep:?}"
        );
        assert!(traj
            .states
            .iter()
            .all(|x| x.total() <= cap + INVARIANCE_TOL));
    }
}

#[test]
fn overfull_starts_decrease_while_above_capacity() {
    let mut r = rng(32);
    for case in 0..20 {
        let p = ModelParams::table2(BETAS[case % BETAS.len()]);
        let cap = p.capacity();
        let x0 = State::new(
            r.gen_range(0.0..3.0) * cap,
            r.gen_range(0.0..2.0) * cap,
            r.gen_range(0.0..1.0) * cap,
        );
        if x0.total() <= cap {
            continue;
        }
        let grid = TimeGrid::with_step(0.0, 20.0, 0.001).unwrap();
        let traj = integrate_forward(&x0, None, &p, &grid).unwrap();
        let rep = monitor_invariance(&traj, &p);
        assert!(
            rep.positive && rep.bounded && rep.decreasing_above_capacity,
            "{x0:?}: {rep:?}"
        );
    }
}

#[test]
fn empty_population_stays_nonnegative() {
    let p = ModelParams::table2(0.3);
    let grid = TimeGrid::with_step(0.0, 10.0, 0.01).unwrap();
    let traj = integrate_forward(&State::default(), None, &p, &grid).unwrap();
    let rep = monitor_invariance(&traj, &p);
    assert!(rep.positive && rep.stays_in_region());
    assert!(traj.states.iter().all(|x| x.i == 0.0 && x.r == 0.0));
}

fn expm(m: &Mat3, t: f64) -> Mat3 {
    // scaling and squaring around a truncated Taylor series
    let norm: f64 = m.iter().flatten().map(|v| (v * t).abs()).sum();
    let squarings = norm.log2().ceil().max(0.0) as i32 + 4;
    let a: Mat3 = m.map(|row| row.map(|v| v * t / 2f64.powi(squarings)));
    let mul = crimesir::stability::mat_mul;
    let mut result: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    for k in 1..30 {
        term = mul(&term, &a).map(|row| row.map(|v| v / k as f64));
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

#[test]
fn backward_adjoint_matches_linear_closed_form() {
    // With the state pinned at E0 and u = 0 the co-state obeys
    // ż = M z + b with M = −Jᵀ and b = −(0, 1, −1).
    let p = ModelParams::table2(2.0);
    let e0 = State::new(p.capacity(), 0.0, 0.0);
    let j = jacobian_at(&e0, &p);
    let m: Mat3 = std::array::from_fn(|r| std::array::from_fn(|c| -j[c][r]));
    let b = [0.0, -1.0, 1.0];
    let zt = [0.3, -0.2, 0.5];
    let t_final = 2.0;

    let grid = TimeGrid::with_step(0.0, t_final, 0.001).unwrap();
    let traj = integrate_forward(&e0, None, &p, &grid).unwrap();
    let adj = integrate_backward(&AdjointState::from_array(zt), &traj, None, &p, &grid).unwrap();

    // particular solution z* = −M⁻¹ b
    let m_inv = crimesir::stability::inverse(&m).unwrap();
    let z_star: [f64; 3] =
        std::array::from_fn(|r| -(0..3).map(|c| m_inv[r][c] * b[c]).sum::<f64>());
    for k in (0..grid.len()).step_by(250) {
        let e = expm(&m, grid.time(k) - t_final);
        let exact: [f64; 3] = std::array::from_fn(|r| {
            z_star[r] + (0..3).map(|c| e[r][c] * (zt[c] - z_star[c])).sum::<f64>()
        });
        let got = adj.costates[k].to_array();
        for r in 0..3 {
            let scale = exact[r].abs().max(1.0);
            assert!(
                (got[r] - exact[r]).abs() <= 1e-8 * scale,
                "node {k}: {got:?} vs {exact:?}"
            );
        }
    }
}

#[test]
fn backward_grid_nodes_align_with_forward() {
    let p = ModelParams::table2(0.3);
    let grid = TimeGrid::with_step(0.0, 1.0, 0.01).unwrap();
    let traj = integrate_forward(&State::new(1357.0, 136.0, 46.0), None, &p, &grid).unwrap();
    let adj = integrate_backward(&AdjointState::ZERO, &traj, None, &p, &grid).unwrap();
    assert_eq!(adj.grid, traj.grid);
    assert_eq!(adj.costates.len(), traj.states.len());
    assert_eq!(adj.costates[grid.n_steps], AdjointState::ZERO);
}
