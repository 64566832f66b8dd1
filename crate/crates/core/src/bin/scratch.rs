use std::time::Instant;

use bolusopt::scenario::Scenario;
use bolusopt::solvers::{optimize_delivery, solve_proper, sweep_gamma, SweepParameter};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("bergman");
    let mut scn = match which {
        "hovorka" => Scenario::hovorka_2004(),
        _ => Scenario::bergman_paper(),
    };
    if let Ok(s) = std::env::var("MEAL_SCALE") {
        scn.meal.output_gain *= s.parse::<f64>().unwrap();
    }
    if let Ok(s) = std::env::var("BERGMAN_A") {
        if let bolusopt::models::Model::Bergman(ref mut p) = scn.model {
            p.a = s.parse::<f64>().unwrap();
        }
    }
    if let Ok(s) = std::env::var("HORIZON") {
        scn.sim.horizon = s.parse::<f64>().unwrap();
    }
    if std::env::var("MGDL").is_ok() {
        scn.g0 = 90.0;
        scn.lambda = 72.0;
        scn.tolerances.tol_floor *= 18.0;
        scn.tolerances.tol_extremum *= 18.0;
    }
    let cmd = args.get(2).map(|s| s.as_str()).unwrap_or("sweep");
    let t0 = Instant::now();
    match cmd {
        "sweep" => {
            let grid: Vec<f64> = args[3..].iter().map(|s| s.parse().unwrap()).collect();
            let pts = sweep_gamma(&scn, SweepParameter::Tau, &grid).unwrap();
            for p in pts {
                println!(
                    "tau={:8.2} gamma={:.4} u_hat={:.4e} t'={:8.3} class={} err={:?}",
                    p.value, p.gamma, p.u_hat, p.t_prime, p.classification, p.error
                );
            }
        }
        "delivery" => {
            let tau: f64 = args[3].parse().unwrap();
            let (lo, hi) = scn.delivery_window();
            match optimize_delivery(&scn, tau, lo, hi) {
                Ok(r) => println!(
                    "tau={} -> t'={:.3} gamma={:.4} u_hat={:.4e} class={} evals={}",
                    tau, r.t_prime, r.gamma, r.u_hat, r.classification, r.sweep_log.len()
                ),
                Err(e) => println!("tau={tau} -> ERROR {e}"),
            }
        }
        "tpsweep" => {
            let tau: f64 = args[3].parse().unwrap();
            let grid: Vec<f64> = args[4..].iter().map(|s| s.parse().unwrap()).collect();
            let pts = sweep_gamma(&scn, SweepParameter::TPrime { tau }, &grid).unwrap();
            for p in pts {
                println!(
                    "t'={:8.2} gamma={:.4} u_hat={:.4e} class={} err={:?}",
                    p.value, p.gamma, p.u_hat, p.classification, p.error
                );
            }
        }
        "shape" => {
            let tp: f64 = args[3].parse().unwrap();
            let tau: f64 = args[4].parse().unwrap();
            let r = solve_proper(&scn, tp, tau).unwrap();
            let report =
                bolusopt::analysis::classify(&r.trajectory, scn.lambda, &scn.tolerances);
            println!(
                "u_hat={:.5e} gamma={:.5}@{:.1} min={:.5} class={}",
                r.u_hat, report.gamma, report.gamma_time, report.min_glucose, report.classification
            );
            for e in &report.extrema {
                println!(
                    "  {:?}{} t={:9.2} g={:.5}",
                    e.kind,
                    if e.boundary { "(b)" } else { "   " },
                    e.time,
                    e.value
                );
            }
        }
        "zero" => {
            let tr = solve_proper(&scn, 0.0, 0.0);
            // lambda trick: simulate basal-only directly instead
            let u_bar = scn.basal().unwrap();
            let input = bolusopt::models::PulseInput::basal_only(u_bar);
            let t =
                bolusopt::integrate::simulate(&scn.model, &input, &scn.meal, &scn.sim).unwrap();
            let (xi, xv) = t.max_glucose();
            println!("zero-bolus max={:.4}@{:.1} end={:.6}", xv, t.times[xi], t.glucose.last().unwrap());
            drop(tr);
        }
        "proper" => {
            let tp: f64 = args[3].parse().unwrap();
            let tau: f64 = args[4].parse().unwrap();
            let r = solve_proper(&scn, tp, tau).unwrap();
            let (mi, mv) = r.trajectory.min_glucose();
            let (xi, xv) = r.trajectory.max_glucose();
            println!(
                "u_hat={:.6e} min={:.6}@{:.1} max={:.6}@{:.1} iters={}",
                r.u_hat,
                mv,
                r.trajectory.times[mi],
                xv,
                r.trajectory.times[xi],
                r.iterations
            );
        }
        "global" => {
            let r = bolusopt::solvers::optimize_global(&scn).unwrap();
            println!(
                "GLOBAL tau={:.3} t'={:.3} gamma={:.5} u_hat={:.5e} class={} evals={}",
                r.tau,
                r.t_prime,
                r.gamma,
                r.u_hat,
                r.classification,
                r.sweep_log.len()
            );
            println!("lambda-side:");
            for &i in &r.lambda_side {
                let p = &r.sweep_log[i];
                println!(
                    "  tau={:9.3} t'={:8.3} gamma={:.5} class={}",
                    p.tau, p.t_prime, p.gamma, p.classification
                );
            }
            println!("gamma-side:");
            for &i in &r.gamma_side {
                let p = &r.sweep_log[i];
                println!(
                    "  tau={:9.3} t'={:8.3} gamma={:.5} class={}",
                    p.tau, p.t_prime, p.gamma, p.classification
                );
            }
        }
        _ => eprintln!("unknown cmd"),
    }
    eprintln!("[{:.2?}]", t0.elapsed());
}
