//! Acceptance suite: one line per criterion, exit status 1 if any fails.
//!
//! Runs every scenario at desk scale in serial mode and checks the report
//! quantities against tolerances pinned here, independent of the verdicts
//! the scenarios compute for themselves.

use std::process::ExitCode;

use serde_json::Value;
use spvar_cli::{run, Outcome, RunOptions, Scenario, ScenarioConfig, Status};

const SEED: u64 = 20_240_601;

struct Line {
    id: u8,
    title: &'static str,
    seconds: f64,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Line {
    fn new(id: u8, title: &'static str, seconds: f64) -> Self {
        Line {
            id,
            title,
            seconds,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn time_limit(&mut self, limit: f64) {
        let s = self.seconds;
        self.expect(s < limit, format!("{s:.2} s < {limit} s"));
    }

    fn print(&self) -> bool {
        let ok = self.failures.is_empty();
        let tag = if ok { "PASS" } else { "FAIL" };
        let body = if ok { self.notes.join("; ") } else { self.failures.join("; ") };
        println!("criterion {:>2} {tag} {} ({:.2} s): {body}", self.id, self.title, self.seconds);
        ok
    }
}

fn execute(s: Scenario) -> Outcome {
    let opts = RunOptions {
        seed: SEED,
        serial: true,
        ..RunOptions::default()
    };
    run(s, &ScenarioConfig::default(), &opts).unwrap_or_else(|e| panic!("{s} failed to run: {e}"))
}

fn num(o: &Outcome, pointer: &str) -> f64 {
    let (key, rest) = pointer.split_once('/').unwrap_or((pointer, ""));
    let v = o.report.quantity(key).unwrap_or_else(|| panic!("missing quantity {key}"));
    let v = if rest.is_empty() { v } else { v.pointer(&format!("/{rest}")).unwrap_or(&Value::Null) };
    v.as_f64().unwrap_or_else(|| panic!("quantity {pointer} is not a number: {v}"))
}

fn verdict(o: &Outcome, name: &str) -> Status {
    o.report.verdict(name).unwrap_or_else(|| panic!("missing verdict {name}")).status
}

fn step(o: &Outcome, name: &str) -> f64 {
    o.runtime.step_seconds(name).unwrap_or_else(|| panic!("missing step {name}"))
}

fn lemmas(o: &Outcome) -> Vec<Line> {
    let mut c1 = Line::new(1, "constant machinery", step(o, "constants"));
    let root = num(o, "max_d0_root_residual");
    let stat = num(o, "max_stationary_residual");
    c1.expect(root < 1e-10, format!("|f_d0(s0(d0))| = {root:e} < 1e-10"));
    c1.expect(stat < 1e-10, format!("|f_d'(s0(d))| = {stat:e} < 1e-10"));
    c1.expect(verdict(o, "d0-sign-properties") == Status::Pass, "sign properties at {0.5, 0.9, 1.1, 2}·d0");
    c1.time_limit(1.0);

    let mut c2 = Line::new(2, "Poisson oracles", step(o, "poisson"));
    for (key, tol) in [
        ("ball_max_rel_error_radial", 1e-3),
        ("ball_max_rel_error_3d", 5e-3),
        ("gaussian_radial_vs_3d", 5e-3),
        ("energy_identity_radial", 1e-3),
        ("energy_identity_3d", 5e-3),
    ] {
        let v = num(o, key);
        c2.expect(v < tol, format!("{key} = {v:.3e} < {tol:e}"));
    }
    c2.time_limit(10.0);

    let mut c3 = Line::new(3, "gradient correctness", step(o, "gradients"));
    for (key, tol) in [("gradient_fd_rel_error_radial", 1e-4), ("gradient_fd_rel_error_3d", 1e-3)] {
        let v = num(o, key);
        c3.expect(v < tol, format!("{key} = {v:.3e} < {tol:e}"));
    }
    c3.time_limit(30.0);

    let mut c4 = Line::new(4, "inequality suites", step(o, "inequalities"));
    let ratio = num(o, "strauss_max_lhs_over_rhs");
    c4.expect(
        verdict(o, "strauss-inequality") == Status::Pass && ratio <= 1.0 + 1e-6,
        format!("Lions-type inequality on 100 fields, max lhs/rhs = {ratio:.4}"),
    );
    let slack = num(o, "coercivity_min_slack");
    let lowest = num(o, "coercivity_lowest_energy");
    c4.expect(
        slack >= -1e-6 && lowest < 0.0,
        format!("coercivity floor slack {slack:.3e} ≥ −1e-6 along trajectories reaching J = {lowest:.3e}"),
    );
    let pos = num(o, "min_energy_rho_above_d0");
    c4.expect(pos > 0.0, format!("min J for ρ = 1.5·d0 over 100 fields = {pos:.3e} > 0"));
    c4.time_limit(60.0);

    let mut c9 = Line::new(9, "threshold bounds", step(o, "bounds"));
    let lower = num(o, "lambda_bounds/lambda0_lower");
    let upper = num(o, "lambda_bounds/lambda0_upper");
    let c1v = num(o, "lambda_bounds/c1");
    let drift = num(o, "witness_drift");
    c9.expect(lower <= upper, format!("Λ0 lower {lower:.6e} ≤ upper {upper:.6e}"));
    c9.expect(
        (upper - c1v * c1v / 2.0).abs() <= 1e-15,
        format!("upper = C1²/2 with C1 = {c1v:.9}"),
    );
    c9.expect((c1v - 0.08).abs() < 1e-6, format!("|C1 − 0.08| = {:.1e} < 1e-6", (c1v - 0.08).abs()));
    c9.expect(drift < 1e-10, format!("witness drift {drift:.1e} < 1e-10"));
    c9.time_limit(30.0);
    vec![c1, c2, c3, c4, c9]
}

fn autonomous(o: &Outcome) -> Line {
    let mut c = Line::new(5, "two radial solutions below 4Λ0", o.runtime.total_seconds);
    let lambda = num(o, "lambda");
    let lower = num(o, "lambda_bounds/lambda0_lower");
    c.expect(lambda == 2.0 * lower, format!("λ = 2·Λ0 lower = {lambda:.6e}"));
    for (name, grad_tol, sign) in [("minimizer", 1e-6, -1.0), ("mountain_pass", 1e-5, 1.0)] {
        let e = num(o, &format!("{name}/energy"));
        let g = num(o, &format!("{name}/gradient_norm"));
        let nr = num(o, &format!("{name}/nehari_residual"));
        c.expect(sign * e > 0.0, format!("{name} J = {e:.4e}"));
        c.expect(g < grad_tol, format!("{name} gradient {g:.2e} < {grad_tol:e}"));
        c.expect(nr.abs() < 1e-3, format!("{name} Nehari {nr:.1e}"));
    }
    c.time_limit(120.0);
    c
}

fn uniqueness(o: &Outcome) -> Line {
    let mut c = Line::new(6, "zero is the unique solution", o.runtime.total_seconds);
    let upper = num(o, "lambda_bounds/lambdabar0_upper");
    let lambda = num(o, "lambda");
    c.expect(lambda == 2.0 * upper, format!("λ = 2·Λ̄0 upper = {lambda:.4e}"));
    let rho_min = num(o, "rho_min");
    c.expect(rho_min > upper.sqrt(), format!("ρ_min = {rho_min:.4} > {:.4}", upper.sqrt()));
    for name in ["autonomous", "non-autonomous"] {
        let s = &o.report.series[&format!("{name}_starts")];
        let zero = s.rows.iter().filter(|r| r[2] < 1e-6 && r[5] == 1.0).count();
        c.expect(s.rows.len() == 20 && zero == 20, format!("{name}: {zero}/{} zero", s.rows.len()));
    }
    c.time_limit(120.0);
    c
}

fn multibump(o: &Outcome) -> Line {
    let mut c = Line::new(7, "multibump energies", o.runtime.total_seconds);
    let mb = o.report.quantity("multibump").expect("multibump quantity");
    let single = mb["single_energy"].as_f64().unwrap();
    let cc = mb["c_apriori"].as_f64().unwrap();
    let rows = mb["rows"].as_array().unwrap();
    let energies: Vec<f64> = rows.iter().map(|r| r["energy"].as_f64().unwrap()).collect();
    c.expect(energies.len() == 5, format!("N = 1..{}", energies.len()));
    c.expect(
        energies.windows(2).all(|w| w[1] < w[0]),
        format!("J(w_N) strictly decreasing: {energies:.1?}"),
    );
    let bound = rows.iter().all(|r| {
        let n = r["n_bumps"].as_f64().unwrap();
        r["energy"].as_f64().unwrap() <= n * single + cc
    });
    c.expect(bound, format!("J(w_N) ≤ N·{single:.1} + C, C = {cc:.4e}"));
    let cross = rows.iter().all(|r| match (r["cross_sum"].as_f64(), r["cross_bound"].as_f64()) {
        (Some(s), Some(b)) => s <= b,
        _ => true,
    });
    c.expect(cross, "cross terms within the printed bound for every pair");
    let defect = num(o, "additivity_defect");
    c.expect(defect < 1e-12, format!("additivity defect {defect:.1e} < 1e-12"));
    c.time_limit(60.0);
    c
}

fn symmetry(o: &Outcome) -> Line {
    let mut c = Line::new(8, "symmetry breaking", o.runtime.total_seconds);
    let theta = num(o, "theta/energy");
    let alpha = num(o, "alpha/energy");
    let alpha_fine = num(o, "alpha_fine/energy");
    let error = (alpha - alpha_fine).abs();
    let margin = theta - alpha_fine;
    c.expect(theta < 0.0, format!("θ = {theta:.4e} < 0"));
    c.expect(alpha < theta && alpha_fine < theta, format!("α = {alpha:.4e} / {alpha_fine:.4e} < θ"));
    c.expect(
        margin > 10.0 * error,
        format!("margin {margin:.4e} > 10 × resolution change {error:.3e}"),
    );
    c.expect(verdict(o, "alpha-theta-margin") == Status::Pass, "margin verdict pass (not inconclusive)");
    let mp = num(o, "mountain_pass/energy");
    c.expect(mp > 0.0 && verdict(o, "third-solution") == Status::Pass, format!("third solution J = {mp:.4e} > 0"));
    c.time_limit(1200.0);
    c
}

fn main() -> ExitCode {
    let lem = execute(Scenario::VerifyLemmas);
    let auto = execute(Scenario::Autonomous);
    let uniq = execute(Scenario::UniquenessScan);
    let mb = execute(Scenario::Multibump);
    let gs = execute(Scenario::GroundState);

    let mut lines = lemmas(&lem);
    lines.push(autonomous(&auto));
    lines.push(uniqueness(&uniq));
    lines.push(multibump(&mb));
    lines.push(symmetry(&execute(Scenario::SymmetryBreaking)));

    let mut c10 = Line::new(10, "serial reproducibility", 0.0);
    for first in [&lem, &auto, &uniq, &mb, &gs] {
        let s = first.report.scenario;
        let again = execute(s);
        c10.seconds += again.runtime.total_seconds;
        c10.expect(
            first.report.to_json() == again.report.to_json(),
            format!("{s} report JSON byte-identical"),
        );
    }
    lines.push(c10);
    lines.sort_by_key(|l| l.id);

    let mut all = true;
    for l in &lines {
        all &= l.print();
    }
    let gs_ok = gs.report.all_passed;
    println!(
        "ground-state scenario {}",
        if gs_ok { "all verdicts pass" } else { "has failing verdicts" }
    );
    if all && gs_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
