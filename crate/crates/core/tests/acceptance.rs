//! One PASS/FAIL line per acceptance criterion. Runs the shipped configs at
//! full scale, so expect several minutes.

mod common;

use std::time::{Duration, Instant};

use interp_lab::experiments::{run, ExperimentConfig, ExperimentOutput, Table};

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        self.total += 1;
        self.passed += ok as usize;
        println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn timed(text: &str) -> (ExperimentOutput, Duration) {
    let cfg = ExperimentConfig::parse(text).unwrap();
    let start = Instant::now();
    let out = run(&cfg).unwrap();
    (out, start.elapsed())
}

fn num(t: &Table, row: usize, col: &str) -> f64 {
    t.column(col).unwrap()[row].as_f64().unwrap_or(f64::NAN)
}

fn text(t: &Table, row: usize, col: &str) -> String {
    t.column(col).unwrap()[row].csv()
}

/// `(exact landmarks, λ=1 loss at the largest d, λ=0.1 minimum over d > n)`.
fn figure1_checks(out: &ExperimentOutput, n: usize) -> (bool, f64, f64) {
    let s = out.table("figure1_summary").unwrap();
    let rows = 0..s.rows.len();
    let exact = rows
        .clone()
        .all(|i| num(s, i, "null") == 1.0 && num(s, i, "bayes") == 0.5);
    let at = |lambda: f64| rows.clone().filter(move |&i| num(s, i, "lambda") == lambda);
    let top = at(1.0).max_by_key(|&i| num(s, i, "d") as usize).unwrap();
    let dip = at(0.1)
        .filter(|&i| num(s, i, "d") as usize > n)
        .map(|i| num(s, i, "loss_mean"))
        .fold(f64::INFINITY, f64::min);
    (exact, num(s, top, "loss_mean"), dip)
}

fn criterion_1(r: &mut Report) {
    for (label, cfg, n, limit) in [
        ("paper", common::FIGURE1_PAPER, 200, 30 * 60),
        ("desk", common::FIGURE1_DESK, 100, 3 * 60),
    ] {
        let (out, t) = timed(cfg);
        let (exact, top, dip) = figure1_checks(&out, n);
        let ok = exact && top > 0.9 && dip < 1.0 && t.as_secs() <= limit;
        r.line(
            &format!("1 ({label})"),
            ok,
            format!(
                "null=1.0 and bayes=0.5 exact: {exact}; λ=1 loss at largest d {top:.4} > 0.9; \
                 λ=0.1 min loss over d>n {dip:.4} < 1.0; runtime {:.1}s ≤ {limit}s",
                t.as_secs_f64()
            ),
        );
    }
}

fn criteria_2_3(r: &mut Report) {
    let (out, t) = timed(common::BOUND_CHECK);
    let s = out.table("bound_check_summary").unwrap();
    let row = |q: &str| (0..s.rows.len()).find(|&i| text(s, i, "quantity") == q).unwrap();
    let main = row("ucb_main");
    let (f, se) = (num(s, main, "fraction"), num(s, main, "se"));
    r.line(
        "2",
        f >= 0.90 - 3.0 * se && f >= 0.85,
        format!("ucb_main coverage {f:.4} (SE {se:.4}) ≥ max(0.90 − 3SE, 0.85) over 500 trials, {:.1}s", t.as_secs_f64()),
    );
    let nb = row("norm_bound");
    let (f, se) = (num(s, nb, "fraction"), num(s, nb, "se"));
    r.line("3", f >= 0.90 - 3.0 * se, format!("norm-bound coverage {f:.4} (SE {se:.4}) ≥ 0.90 − 3SE"));
}

fn criterion_4(r: &mut Report) {
    let (res, _) = common::min_l2_oracle_errors(100, 4, 8, 101);
    r.line("4a", res <= 1e-9, format!("min-ℓ2 max residual {res:.2e} ≤ 1e-9 over 100 (n=4, d=8)"));
    let gap = common::basis_pursuit_gap(100, 3, 6, 202);
    r.line("4b", gap <= 1e-6, format!("basis pursuit vs vertex enumeration gap {gap:.2e} ≤ 1e-6 over 100 (n=3, d=6)"));
    let c = common::worst_case_random_search(100, 3, 6, 100_000, 303);
    r.line(
        "4c",
        c.passed == c.count,
        format!(
            "worst_case_l2 ≥ random search − 1e-6 with KKT ≤ 1e-8 in {}/{} (min margin {:.2e}, max KKT {:.2e})",
            c.passed, c.count, c.min_margin, c.max_kkt
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let zs: Vec<(usize, f64)> = [2, 10, 100]
        .into_iter()
        .enumerate()
        .map(|(i, d)| (d, common::chi_mean_z(d, 20_000, 400 + i as u64)))
        .collect();
    r.line(
        "5 (width)",
        zs.iter().all(|(_, z)| *z <= 4.0),
        format!("E‖H‖₂ within 4SE of the chi mean: {zs:.2?} (d, |z|)"),
    );
    let (er, eb) = common::spiked_rank_errors();
    r.line(
        "5 (ranks)",
        er.abs() <= 1e-10 && eb.abs() <= 1e-10,
        format!("effective ranks of diag(1, 0.01·1₉₉₉) off by ({er:.1e}, {eb:.1e}), tolerance 1e-10"),
    );
    let gaps = common::sandwich_gaps(20_000, 505);
    let ok = gaps.iter().all(|(_, lo, hi, se)| *lo <= 3.0 * se && *hi <= 3.0 * se);
    r.line(
        "5 (sandwich)",
        ok,
        format!("r − 1 ≤ r_‖·‖₂ ≤ r within 3SE on {} fixtures", gaps.len()),
    );
}

fn criterion_6(r: &mut Report) {
    let (out, t) = timed(common::CGMT);
    let s = out.table("cgmt_summary").unwrap();
    let pairs: Vec<String> = (0..s.rows.len())
        .map(|i| format!("{} {} failures of {}", text(s, i, "pair"), text(s, i, "failures"), text(s, i, "points")))
        .collect();
    let ok = s.rows.len() == 2
        && (0..s.rows.len()).all(|i| text(s, i, "all_pass") == "true")
        && t.as_secs() <= 600;
    r.line("6", ok, format!("tail inequality at every t: {}; {:.1}s ≤ 600s", pairs.join(", "), t.as_secs_f64()));
}

fn criterion_7(r: &mut Report) {
    let (out, _) = timed(common::JUNK);
    let p = out.table("junk_points").unwrap();
    let losses: Vec<f64> = (0..p.rows.len()).map(|i| num(p, i, "loss_mean")).collect();
    let decreasing = losses.windows(2).all(|w| w[1] < w[0]);
    r.line(
        "7 (trend)",
        decreasing,
        format!("mean basis pursuit loss strictly decreasing in d: {losses:.4?}"),
    );
    let last = p.rows.len() - 1;
    let ratio = num(p, last, "r1") / num(p, 0, "r1");
    r.line("7 (r1 growth)", (1.4..=2.2).contains(&ratio), format!("r1(2¹⁴)/r1(2⁸) = {ratio:.3} in [1.4, 2.2]"));
}

fn criterion_8(r: &mut Report) {
    let (mass, size) = common::tau_split_checks(20, 606);
    r.line("8", mass == 20 && size == 20, format!("mass display {mass}/20, size display {size}/20"));
}

fn criterion_9(r: &mut Report) {
    let mut same = Vec::new();
    for cfg in common::small_configs() {
        let ok = common::csv_at_threads(&cfg, 1) == common::csv_at_threads(&cfg, 8);
        same.push(format!("{} {}", cfg.experiment.as_str(), if ok { "identical" } else { "DIFFERS" }));
    }
    let ok = same.iter().all(|s| s.ends_with("identical"));
    r.line("9", ok, format!("CSV at 1 vs 8 threads: {}", same.join(", ")));
}

fn main() {
    // `cargo test -- --list` and filters from other targets should not trigger the full run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }
    let mut r = Report { passed: 0, total: 0 };
    criterion_1(&mut r);
    criteria_2_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    println!("acceptance: {}/{} checks passed", r.passed, r.total);
}
