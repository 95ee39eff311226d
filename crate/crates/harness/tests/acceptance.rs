//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Pass criterion numbers as arguments (`cargo test --test acceptance -- 1 7`)
//! to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use escape_lab::maps::{Intermittent, Map};
use escape_lab::measure::{induced_ulam, Start, StartSampler};
use escape_lab::open_systems::{
    hitting_time, leading_eigenvalue, open_ulam, SolenoidStarts, SurvivalCurve,
};
use escape_lab::rng::{stream, Domain};
use escape_lab::stats::{fit_exponential_rate, fit_power_law};
use escape_lab::{FareyMap, Hole1D, HoleCylinder, LsvMap, SolenoidMap, Tower, TowerSampler};
use escape_lab_harness::{emit_report, run_experiment, ExperimentConfig, RawConfig, RunReport};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&mut Shared) -> Check);

fn run(text: &str) -> RunReport {
    let raw = RawConfig::parse(text, "acceptance").expect("config parses");
    let config = ExperimentConfig::from_raw(&raw).expect("config validates");
    run_experiment(&config).expect("experiment runs")
}

fn artifact<'a>(r: &'a RunReport, role: &str) -> &'a str {
    &r.artifacts
        .iter()
        .find(|a| a.role == role)
        .expect("artifact present")
        .contents
}

/// Columns of a CSV with a header line, parsed as f64.
fn columns(csv: &str) -> Vec<Vec<f64>> {
    let mut lines = csv.lines();
    let width = lines.next().expect("header").split(',').count();
    let mut cols = vec![Vec::new(); width];
    for l in lines {
        for (i, f) in l.split(',').enumerate() {
            cols[i].push(f.parse().expect("numeric field"));
        }
    }
    cols
}

fn within(label: &str, value: f64, target: f64, tol: f64) -> Check {
    let msg = format!("{label} {value:.4} (target {target} ± {tol})");
    if (value - target).abs() <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(checks: Vec<Check>) -> Check {
    let ok = checks.iter().all(Result::is_ok);
    let text = checks
        .into_iter()
        .map(|c| c.unwrap_or_else(|e| format!("{e} <-- failed")))
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn lsv_survival(alpha: f64, extra: usize) -> RunReport {
    run(&format!(
        "experiment = survival\nsystem = lsv\nalpha = {alpha}\nhole = (0.5,0.6)\nsamples = 1000000\nhorizon = 100000\n\
         fit_window = (100,10000)\nbase_extra = {extra}\nseed = 7\n"
    ))
}

struct Shared {
    lsv_half: Option<RunReport>,
    lsv_two_thirds: Option<RunReport>,
}

fn criterion_1(s: &mut Shared) -> Check {
    let r = s.lsv_half.get_or_insert_with(|| lsv_survival(0.5, 0));
    within("exponent", r.fits[0].exponent, -1.0, 0.15)
}

fn criterion_2(s: &mut Shared) -> Check {
    let r = s
        .lsv_two_thirds
        .get_or_insert_with(|| lsv_survival(2.0 / 3.0, 0));
    within("exponent", r.fits[0].exponent, -0.5, 0.12)
}

fn criterion_3(s: &mut Shared) -> Check {
    let base = s.lsv_half.get_or_insert_with(|| lsv_survival(0.5, 0));
    let raised = lsv_survival(0.5, 2);
    let (m0, m2) = (
        base.diagnostics["base_index"],
        raised.diagnostics["base_index"],
    );
    let (e0, e2) = (base.fits[0].exponent, raised.fits[0].exponent);
    all(vec![
        if m2 == m0 + 2.0 {
            Ok(format!("m {m0} and {m2}"))
        } else {
            Err(format!("m {m0} and {m2}"))
        },
        within(
            &format!("exponent change ({e0:.4} vs {e2:.4})"),
            (e0 - e2).abs(),
            0.0,
            0.05,
        ),
    ])
}

fn criterion_4(s: &mut Shared) -> Check {
    let mut checks = Vec::new();
    for alpha in [0.5, 2.0 / 3.0] {
        let r = run(&format!(
            "experiment = tower\nsystem = lsv\nalpha = {alpha}\nhole = (0.5,0.6)\nhorizon = 100000\nfit_window = (1000,100000)\nseed = 1\n"
        ));
        let a = format!("α={alpha:.3}");
        checks.push(within(
            &format!("{a} preimage slope"),
            r.fit("preimage").unwrap().exponent,
            -1.0 / alpha,
            0.05,
        ));
        checks.push(within(
            &format!("{a} tail-sum slope"),
            r.fit("return_tail_sum").unwrap().exponent,
            1.0 - 1.0 / alpha,
            0.05,
        ));

        let tails = columns(artifact(&r, "return_tails"));
        let survival = if alpha == 0.5 {
            s.lsv_half.get_or_insert_with(|| lsv_survival(0.5, 0))
        } else {
            s.lsv_two_thirds
                .get_or_insert_with(|| lsv_survival(2.0 / 3.0, 0))
        };
        let curve = SurvivalCurve::from_csv(artifact(survival, "survival_curve")).unwrap();
        let mut ratios = Vec::new();
        for (i, &n) in curve
            .times
            .iter()
            .enumerate()
            .filter(|(_, &n)| (100..=10_000).contains(&n))
        {
            let j = tails[0]
                .iter()
                .position(|&m| m == n as f64)
                .expect("same grid");
            ratios.push((curve.p_hat(i), tails[3][j]));
        }
        let c = ratios
            .iter()
            .map(|(p, t)| p / t)
            .fold(f64::INFINITY, f64::min);
        let spread = ratios.iter().map(|(p, t)| p / t).fold(0.0, f64::max) / c;
        let dominated = c > 0.0 && ratios.iter().all(|&(p, t)| p >= c * t);
        let msg =
            format!("{a} survival ≥ {c:.3}·tail sum on [1e2,1e4], ratio spread {spread:.3} (≤ 3)");
        checks.push(if dominated && spread <= 3.0 {
            Ok(msg)
        } else {
            Err(msg)
        });
    }
    all(checks)
}

fn criterion_5(_: &mut Shared) -> Check {
    let r = run(
        "experiment = ulam\nsystem = lsv\nalpha = 0.5\nhole = (0.5,0.6)\ncells = 1024\nsamples = 1000000\n\
         j_max = 80\nrate_window = (2,30)\nseed = 5\n",
    );
    let fit = r.rate_fit("induced_survival").unwrap();
    let d = &r.diagnostics;
    let r2 = format!("semilog r² {:.5} (≥ 0.99)", fit.r_squared);
    all(vec![
        if fit.r_squared >= 0.99 {
            Ok(r2)
        } else {
            Err(r2)
        },
        within(
            &format!(
                "rate {:.5} vs -ln λ {:.5}: relative gap",
                fit.rate, d["ulam_rate"]
            ),
            d["rate_relative_gap"],
            0.0,
            0.15,
        ),
        within(
            &format!(
                "λ(1024) {:.6}, λ(2048) {:.6}: relative change",
                d["lambda"], d["lambda_refined"]
            ),
            d["lambda_relative_change"],
            0.0,
            0.02,
        ),
    ])
}

fn criterion_6(_: &mut Shared) -> Check {
    let r = run(
        "experiment = mld\nsystem = lsv\nalpha = 0.5\nhole = (0.5,0.6)\nsamples = 100000\nhorizon = 100000\n\
         fit_window = (100,10000)\ngrid_min = 100\ntolerance = 0.3\nseed = 3\n",
    );
    let probs = &columns(artifact(&r, "max_deviation_curve"))[1];
    let monotone = probs.windows(2).all(|w| w[1] <= w[0]);
    let m = format!("nonincreasing over {} grid points", probs.len());
    all(vec![
        if monotone { Ok(m) } else { Err(m) },
        within("exponent", r.fits[0].exponent, -1.0, 0.3),
    ])
}

fn criterion_7(_: &mut Shared) -> Check {
    let r = run(
        "experiment = survival\nsystem = farey\ntheta = 2\nhole = (0.5,0.6)\nsamples = 1000000\nhorizon = 100000\n\
         fit_window = (1000,10000)\nseed = 7\n",
    );
    within("exponent on [1e3,1e4]", r.fits[0].exponent, -1.0, 0.15)
}

fn criterion_8(_: &mut Shared) -> Check {
    let b2 = run(
        "experiment = survival\nsystem = synthetic_tower\nbeta = 2\nhole_mass = 0.1\nsamples = 1000000\nhorizon = 100000\n\
         fit_window = (1000,10000)\nseed = 7\n",
    );
    let b3 = run(
        "experiment = survival\nsystem = synthetic_tower\nbeta = 3\nhole_mass = 0.1\nestimator = remaining_time\n\
         samples = 1000000\nhorizon = 100000\nfit_window = (1000,10000)\nseed = 7\n",
    );
    all(vec![
        within("β=2 exponent", b2.fits[0].exponent, -1.0, 0.15),
        within("β=3 exponent", b3.fits[0].exponent, -2.0, 0.2),
    ])
}

fn criterion_9(_: &mut Shared) -> Check {
    let horizon = 100_000u64;
    let burn_in = 40u64;
    let g = LsvMap::new(0.5).unwrap();
    let sol = SolenoidMap::new(0.5, 0.2).unwrap();
    let hole = Hole1D::interval(0.5, 0.6).unwrap();
    let full = HoleCylinder::new(hole.clone(), None).unwrap();
    let sampler = TowerSampler::for_hole(g, &hole, 0, horizon + burn_in, 7).unwrap();
    let starts = SolenoidStarts {
        map: sol,
        x_starts: &sampler,
        burn_in,
    };
    let (mut matched, mut mismatched) = (0, 0);
    for i in 0..10_000 {
        let mut rng = stream(11, Domain::Trajectory, i);
        if let Start::At(p) = starts.sample(&mut rng) {
            if hitting_time(&sol, &full, p, horizon) == hitting_time(&g, &hole, p.x, horizon) {
                matched += 1;
            } else {
                mismatched += 1;
            }
        }
    }
    let eq =
        format!("{matched} materialized starts with equal escape times, {mismatched} different");
    let base = "experiment = survival\nsystem = solenoid\nalpha = 0.5\ntheta_c = 0.2\nhole = (0.5,0.6)\nsamples = 1000000\nhorizon = 100000\nburn_in = 40\nseed = 7\n";
    let rf = run(&format!("{base}disk = full\nfit_window = (100,10000)\n"));
    let rs = run(&format!(
        "{base}disk = (0.05,-0.45,0.15)\nfit_window = (1000,10000)\ntolerance = 0.2\n"
    ));
    all(vec![
        if mismatched == 0 && matched > 9_000 {
            Ok(eq)
        } else {
            Err(eq)
        },
        within("full-disk exponent", rf.fits[0].exponent, -1.0, 0.15),
        within(
            "sub-disk exponent on [1e3,1e4]",
            rs.fits[0].exponent,
            -1.0,
            0.2,
        ),
    ])
}

fn criterion_10(_: &mut Shared) -> Check {
    let r = run(
        "experiment = norms\nsystem = rotation\ngamma = golden\nobservable = cos2pi\np = 1\nsamples = 10000\nhorizon = 100000\n\
         grid_min = 10\nfit_window = (100,10000)\nseed = 1\n",
    );
    let cols = columns(artifact(&r, "norm_curves"));
    let dominated = cols[2]
        .iter()
        .zip(&cols[1])
        .all(|(sup, plain)| sup >= plain);
    let (p, s) = (
        r.fit("plain_moment").unwrap().exponent,
        r.fit("sup_moment").unwrap().exponent,
    );
    let d = format!("sup ≥ plain at all {} grid points", cols[0].len());
    all(vec![
        if dominated { Ok(d) } else { Err(d) },
        within(
            &format!("exponents plain {p:.4}, sup {s:.4}: gap"),
            (p - s).abs(),
            0.0,
            0.2,
        ),
    ])
}

fn criterion_11(_: &mut Shared) -> Check {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = stream(99, Domain::Pilot, 0);

    let g = LsvMap::new(0.5).unwrap();
    let worst = (0..10_000)
        .map(|_| {
            let y: f64 = rng.random();
            (g.apply(g.left_inverse(y).unwrap()) - y).abs()
        })
        .fold(0.0, f64::max);
    checks.push(if worst <= 1e-12 {
        Ok(format!("LSV inverse round trip {worst:.1e}"))
    } else {
        Err(format!("inverse {worst:.1e}"))
    });
    let f = FareyMap::new(2.0).unwrap();
    let worst = (0..10_000)
        .map(|_| {
            let y: f64 = rng.random();
            (f.apply(f.neutral_inverse(y)) - y)
                .abs()
                .max((f.apply(f.reinject_inverse(y)) - y).abs())
        })
        .fold(0.0, f64::max);
    checks.push(if worst <= 1e-12 {
        Ok(format!("Farey inverse round trips {worst:.1e}"))
    } else {
        Err(format!("Farey inverses {worst:.1e}"))
    });

    let hole = Hole1D::interval(0.5, 0.6).unwrap();
    let tower = Tower::for_hole(g, &hole, 0, 200_000).unwrap();
    let lo = tower.base_low();
    let (mut returns_ok, mut lifts_ok) = (true, true);
    for _ in 0..10_000 {
        let x = lo + (1.0 - lo) * rng.random::<f64>();
        if !tower.in_base(x) {
            continue;
        }
        let r = tower.return_time(x).unwrap();
        returns_ok &= tower.return_time_direct(x, 1_000_000).unwrap().time() == Some(r);
        if !hole.contains_point(x) {
            let (mut y, mut total) = (x, 0u64);
            loop {
                let (z, r) = tower.induced_step(y).unwrap();
                total += r;
                y = z;
                if hole.contains_point(y) {
                    break;
                }
            }
            lifts_ok &= hitting_time(&g, &hole, x, u64::MAX).time() == Some(total);
        }
    }
    checks.push(if returns_ok {
        Ok("symbolic = direct returns on 1e4 points".into())
    } else {
        Err("symbolic vs direct returns".into())
    });
    checks.push(if lifts_ok {
        Ok("lifting identity exact".into())
    } else {
        Err("lifting identity".into())
    });

    let series: Vec<(f64, f64)> = (1..=100)
        .map(|i| (i as f64 * 10.0, 3.0 * (i as f64 * 10.0).powf(-1.37)))
        .collect();
    let pe = (fit_power_law(&series, (10.0, 1000.0)).unwrap().exponent + 1.37).abs();
    let rates: Vec<(f64, f64)> = (1..=60)
        .map(|j| (j as f64, 0.2 * (-0.31 * j as f64).exp()))
        .collect();
    let re = (fit_exponential_rate(&rates, (1.0, 60.0)).unwrap().rate - 0.31).abs();
    checks.push(if pe <= 1e-10 && re <= 1e-10 {
        Ok(format!("fit oracles {pe:.1e}, {re:.1e}"))
    } else {
        Err(format!("fit oracles {pe:.1e}, {re:.1e}"))
    });

    let op = induced_ulam(&tower, 512, 50, 1).unwrap();
    let rows_ok = (0..op.matrix.dim()).all(|i| (op.matrix.row_sum(i) - 1.0).abs() < 1e-12);
    let nested = [
        Hole1D::interval(0.52, 0.58).unwrap(),
        hole.clone(),
        Hole1D::new(vec![(0.5, 0.7), (0.8, 0.85)]).unwrap(),
    ];
    let lambdas: Vec<f64> = nested
        .iter()
        .map(|h| {
            leading_eigenvalue(&open_ulam(&op, h).unwrap(), 1e-13, 100_000)
                .unwrap()
                .0
        })
        .collect();
    let mono = lambdas.windows(2).all(|w| w[1] <= w[0]);
    checks.push(if rows_ok && mono {
        Ok("Ulam row sums and hole monotonicity".into())
    } else {
        Err(format!("Ulam invariants {lambdas:?}"))
    });

    let cfg = "experiment = survival\nsystem = lsv\nalpha = 0.5\nhole = (0.5,0.6)\nsamples = 20000\nhorizon = 20000\nfit_window = (100,2000)\nseed = 4\n";
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut bytes = Vec::new();
    for (d, w) in dirs.iter().zip(["1", "2"]) {
        let r = run(&format!("{cfg}workers = {w}\n"));
        emit_report(&r, d.path()).unwrap();
        let mut files: Vec<_> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        bytes.push(files);
    }
    checks.push(if bytes[0] == bytes[1] {
        Ok("byte-identical reruns".into())
    } else {
        Err("reruns differ".into())
    });

    let secs = start.elapsed().as_secs_f64();
    checks.push(if secs < 60.0 {
        Ok(format!("{secs:.1} s"))
    } else {
        Err(format!("{secs:.1} s (limit 60 s)"))
    });
    all(checks)
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 11] = [
        ("LSV escape exponent, α = 1/2", criterion_1),
        ("LSV escape exponent, α = 2/3", criterion_2),
        ("base independence", criterion_3),
        ("preimage and return-time tails", criterion_4),
        ("induced exponential escape", criterion_5),
        ("maximal large deviations", criterion_6),
        ("Farey exponent", criterion_7),
        ("abstract tower", criterion_8),
        ("solenoid", criterion_9),
        ("Birkhoff norms", criterion_10),
        ("property suites", criterion_11),
    ];
    let mut shared = Shared {
        lsv_half: None,
        lsv_two_thirds: None,
    };
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut shared))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
