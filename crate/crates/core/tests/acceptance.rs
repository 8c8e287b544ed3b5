//! Acceptance suite. Custom harness: prints one PASS/FAIL line per criterion,
//! indented sub-checks below it, and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fakeprior::best_response::random::{random_monotone, random_regular};
use fakeprior::best_response::{
    myerson_best_response, prior_independent_dominance_check, sparqr_equilibrium, sparqr_gap_integral,
    sparqr_two_buyer_gap, spamr_epsilon_undercut_gain, spamr_incident_quantile, spamr_regular_best_response,
    ve_equilibrium_condition,
};
use fakeprior::equilibrium::{
    appendix_family_demos, fpa_bne_iid, full_surplus_target, myerson_fpa_equivalence_check, spamr_revenue_checks,
    symmetric_table, ve_revenue_checks, verify_symmetric_equilibrium, Check, DeviationPolicy,
};
use fakeprior::interim::{
    game_utility, interim_allocation_curve, interim_payment_direct, monte_carlo_oracle, quadrature_summary,
    BuyerInterim, McConfig,
};
use fakeprior::mechanism::PreparedMechanism;
use fakeprior::{FakeProfile, MechanismFamily, QuantileDistribution, QuantileGrid, Result, VeRule};

const N_POINTS: usize = 1025;
const TOL: f64 = 1e-3;
const SEED: u64 = 20_240_601;
const MC_SAMPLES: usize = 1_000_000;

struct Outcome {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }
}

fn grid(n: usize) -> QuantileGrid {
    QuantileGrid::new(n).expect("valid grid size")
}

fn uniform(g: QuantileGrid) -> Result<QuantileDistribution> {
    QuantileDistribution::uniform(0.0, 1.0, g)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn policy() -> DeviationPolicy {
    DeviationPolicy {
        seed: SEED,
        tol: TOL,
        ..DeviationPolicy::default()
    }
}

fn intro_example() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    for (eps, want, tol) in [
        (0.1, 1.1 * 0.8 / 4.0, TOL),
        (0.01, 1.01 * 0.98 / 4.0, TOL),
        (1e-3, 0.25, 5e-3),
    ] {
        let reports = vec![u.clone(), QuantileDistribution::constant(eps, g)?];
        let m = PreparedMechanism::new(&MechanismFamily::Myerson, &FakeProfile::new(reports)?)?;
        let got = game_utility(&m, &u, 1)?.virtual_form;
        out.checks.push(Check::equal(format!("constant_report_utility_eps_{eps}"), want, got, tol));
    }
    Ok(out)
}

fn myerson_best_response_recovery() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let opp = QuantileDistribution::affine(0.5, -0.25, g)?;
    let br = myerson_best_response(&u, &[opp])?;
    let r = br.virtual_curve.clone().unwrap_or_default();
    let want_r = g.sample(|q| (1.0 - q) / 2.0);
    let want_v = g.sample(|q| 0.5 - q / 4.0);
    out.checks.push(Check::at_most("virtual_bid_max_error", 0.0, max_abs_diff(&r, &want_r), TOL));
    out.checks.push(Check::at_most("report_max_error", 0.0, max_abs_diff(br.fake.values(), &want_v), TOL));
    Ok(out)
}

fn myerson_equilibrium_figures() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let fam = MechanismFamily::Myerson;
    let cand = QuantileDistribution::affine(0.5, -0.25, g)?;
    let report = verify_symmetric_equilibrium(&fam, &u, &cand, 2, &policy())?;
    out.checks.push(Check::at_most("equilibrium_max_gain", 0.0, report.max_gain, TOL));
    out.notes.push(format!("{} deviations, best {}", report.deviation_count, report.best_deviation));
    let eq = symmetric_table("acceptance", &fam, &u, &cand, 2)?;
    let tr = symmetric_table("acceptance", &fam, &u, &u, 2)?;
    out.checks.push(Check::equal("equilibrium_utility", 1.0 / 6.0, eq.utilities[0], TOL));
    out.checks.push(Check::equal("equilibrium_revenue", 1.0 / 3.0, eq.revenue, TOL));
    out.checks.push(Check::equal("equilibrium_welfare", 2.0 / 3.0, eq.welfare, TOL));
    out.checks.push(Check::equal("truthful_utility", 1.0 / 12.0, tr.utilities[0], TOL));
    out.checks.push(Check::equal("truthful_revenue", 5.0 / 12.0, tr.revenue, TOL));
    out.checks.push(Check::equal("truthful_welfare", 7.0 / 12.0, tr.welfare, TOL));
    Ok(out)
}

fn myerson_fpa_equivalence() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let truths = vec![u.clone(), u.clone()];
    let half = g.sample(|q| (1.0 - q) / 2.0);
    let base = myerson_fpa_equivalence_check(&truths, &[half.clone(), half.clone()])?;
    out.checks.push(Check::at_most("half_value_profile_discrepancy", 0.0, base.max_discrepancy, 1e-10));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_monotone(g, 1.0, &mut rng)?.values().to_vec();
        let b = random_monotone(g, 1.0, &mut rng)?.values().to_vec();
        worst = worst.max(myerson_fpa_equivalence_check(&truths, &[a, b])?.max_discrepancy);
    }
    out.checks.push(Check::at_most("random_profiles_discrepancy", 0.0, worst, 1e-10));
    let bne = fpa_bne_iid(&u, 2)?;
    out.checks.push(Check::at_most("fpa_bne_half_value_error", 0.0, max_abs_diff(&bne.bids, &half), 1e-6));
    Ok(out)
}

fn spamr_regular() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let q0 = spamr_incident_quantile(&u, 2)?;
    out.checks.push(Check::equal("incident_quantile", 0.25, q0, 1e-6));
    let fake = spamr_regular_best_response(&u, q0)?;
    let eq = symmetric_table("acceptance", &MechanismFamily::Spamr, &u, &fake, 2)?;
    let spa = symmetric_table("acceptance", &MechanismFamily::Spa, &u, &u, 2)?;
    out.checks.push(Check::equal("equilibrium_revenue", 1.0 / 3.0, eq.revenue, TOL));
    out.checks.push(Check::equal("equilibrium_revenue_equals_spa", spa.revenue, eq.revenue, TOL));
    for n in [3, 4] {
        // the helper doubles the tolerance for n buyers
        out.checks.extend(spamr_revenue_checks(&u, n, TOL)?);
    }
    Ok(out)
}

fn spamr_general() -> Result<Outcome> {
    let mut out = Outcome::new();
    let u = uniform(grid(N_POINTS))?;
    let level = 3.0 / 16.0;
    let mut gains = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let gain = spamr_epsilon_undercut_gain(&u, level, 2, eps)?;
        out.checks.push(Check::flag(format!("undercut_gain_positive_eps_{eps:e}"), gain > 0.0));
        out.notes.push(format!("gain at eps {eps:e}: {gain:.6e}"));
        gains.push(gain);
    }
    out.checks.push(Check::flag("undercut_gain_non_vanishing", gains[2] >= 0.5 * gains[0]));
    Ok(out)
}

fn sparqr() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let sol = sparqr_equilibrium(&u, 2)?;
    let want = g.sample(|q| if q == 0.0 { 1.0 } else { 1.0 - q + q * q.ln() });
    out.checks.push(Check::at_most("ode_solution_max_error", 0.0, max_abs_diff(sol.fake.values(), &want), 1e-4));
    out.checks.push(Check::at_most("ode_residual", 0.0, sol.residual_max, 1e-6));
    let report = verify_symmetric_equilibrium(&MechanismFamily::Sparqr, &u, &sol.fake, 2, &policy())?;
    out.checks.push(Check::at_most("equilibrium_max_gain", 0.0, report.max_gain, TOL));
    out.notes.push(format!("best deviation: {} (gain {:.6e})", report.best_deviation, report.max_gain));
    out.notes.push(format!(
        "max gain over atomless deviations: {:.6e} (information only)",
        report.atomless_max_gain
    ));
    let eq = symmetric_table("acceptance", &MechanismFamily::Sparqr, &u, &sol.fake, 2)?;
    let spa = symmetric_table("acceptance", &MechanismFamily::Spa, &u, &u, 2)?;
    out.checks.push(Check::at_most("revenue_at_most_spa", spa.revenue, eq.revenue, TOL));
    out.checks.push(Check::flag("two_buyer_gap_nonnegative", sparqr_two_buyer_gap(&sol.fake) >= 0.0));
    for n in 3..=5 {
        let want = 1.0 / n as f64 - 1.0 / (n as f64 + 1.0);
        out.checks.push(Check::equal(format!("gap_integral_n{n}"), want, sparqr_gap_integral(n), 1e-6));
    }
    Ok(out)
}

fn ve_suite() -> Result<Outcome> {
    let mut out = Outcome::new();
    let u = uniform(grid(N_POINTS))?;
    for rule in VeRule::registry() {
        let p = rule.check_partials();
        out.checks.push(Check::flag(format!("partials_{}", rule.label()), p.truthful()));
        let s = ve_equilibrium_condition(&rule, &u)?;
        let below = s.fake.values().iter().zip(u.values()).all(|(w, v)| *w <= v + 1e-12);
        out.checks.push(Check::flag(format!("report_at_most_truth_{}", rule.label()), below));
    }
    out.checks.extend(ve_revenue_checks(&u, 2, TOL)?.into_iter().filter(|c| c.name.starts_with("ve_rev")));
    Ok(out)
}

fn spa_dominance() -> Result<Outcome> {
    let mut out = Outcome::new();
    let u = uniform(grid(N_POINTS))?;
    let r = prior_independent_dominance_check(&MechanismFamily::Spa, &u, 2, 100, SEED, 1e-6)?;
    out.checks.push(Check::at_most("max_deviation_gain", 0.0, r.max_gain, 1e-6));
    out.checks.push(Check::flag("blend_toward_truth_monotone", r.blend_monotone));
    out.notes.push(format!("blend path: {:?}", r.blend_path));
    Ok(out)
}

fn appendix_families() -> Result<Outcome> {
    let mut out = Outcome::new();
    let u = uniform(grid(N_POINTS))?;
    let (_, tables) = appendix_family_demos(&u, 2, TOL)?;
    let (target, spa, zero, truthful) = (&tables[0], &tables[1], &tables[2], &tables[3]);
    out.checks.push(Check::equal("quantile_reserve_zero_report_revenue", 0.0, zero.revenue, 0.0));
    out.checks.push(Check::equal("quantile_reserve_truthful_equals_spa", spa.revenue, truthful.revenue, TOL));
    out.checks.push(Check::equal("target_revenue", 2.0 / 3.0, target.revenue, TOL));
    out.checks.push(Check::equal("target_revenue_equals_welfare", target.welfare, target.revenue, TOL));
    Ok(out)
}

/// Every family, with the target family pinned to `target`.
fn families(target: &QuantileDistribution, n: usize) -> Vec<MechanismFamily> {
    let mut fams = vec![
        MechanismFamily::Spa,
        MechanismFamily::Myerson,
        MechanismFamily::Spamr,
        MechanismFamily::Sparqr,
        MechanismFamily::QuantileReserve,
        MechanismFamily::TargetDistribution {
            target: vec![target.clone(); n],
        },
    ];
    fams.extend(VeRule::registry().into_iter().map(|rule| MechanismFamily::VirtualEfficient { rule }));
    fams
}

fn payment_identity(out: &mut Outcome) -> Result<()> {
    let g = grid(65);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mc = McConfig::default();
    let kinds = families(&uniform(g)?, 2).len();
    let mut worst = vec![0.0f64; kinds];
    let mut counts = vec![0usize; kinds];
    for p in 0..10_000 {
        let a = random_regular(g, rng.gen_range(0.5..2.0), &mut rng)?;
        let b = random_regular(g, rng.gen_range(0.5..2.0), &mut rng)?;
        let k = p % kinds;
        let mut fam = families(&a, 2).swap_remove(k);
        if let MechanismFamily::TargetDistribution { target } = &mut fam {
            target[1] = b.clone();
        }
        let m = PreparedMechanism::new(&fam, &FakeProfile::new(vec![a, b])?)?;
        let i = rng.gen_range(0..2);
        let q = rng.gen::<f64>();
        let identity = BuyerInterim::new(&m, i).payment_at(&m, q);
        let direct = interim_payment_direct(&m, i, q, &mc)?;
        worst[k] = worst[k].max((identity - direct).abs());
        counts[k] += 1;
    }
    for (k, fam) in families(&uniform(g)?, 2).iter().enumerate() {
        let label = match fam {
            MechanismFamily::VirtualEfficient { rule } => format!("ve_{}", rule.label()),
            other => other.name().to_string(),
        };
        out.notes.push(format!("payment identity {label}: {} profiles", counts[k]));
        out.checks.push(Check::at_most(format!("payment_identity_{label}"), 0.0, worst[k], 5e-4));
    }
    Ok(())
}

fn quadrature_vs_monte_carlo(out: &mut Outcome) -> Result<()> {
    let g = grid(N_POINTS);
    let u = uniform(g)?;
    let mc = McConfig {
        samples: MC_SAMPLES,
        seed: SEED,
    };
    let sparqr_eq = sparqr_equilibrium(&u, 2)?.fake;
    let spamr_eq = spamr_regular_best_response(&u, spamr_incident_quantile(&u, 2)?)?;
    let ve_rule = VeRule::QuantileDiscount { beta: 0.5 };
    let ve_eq = ve_equilibrium_condition(&ve_rule, &u)?.fake;
    let target = full_surplus_target(&u)?;
    let cases: Vec<(&str, MechanismFamily, QuantileDistribution, usize)> = vec![
        ("spa_truthful_n2", MechanismFamily::Spa, u.clone(), 2),
        ("spa_truthful_n3", MechanismFamily::Spa, u.clone(), 3),
        ("myerson_truthful_n3", MechanismFamily::Myerson, u.clone(), 3),
        ("myerson_equilibrium", MechanismFamily::Myerson, QuantileDistribution::affine(0.5, -0.25, g)?, 2),
        ("spamr_equilibrium", MechanismFamily::Spamr, spamr_eq, 2),
        ("sparqr_equilibrium", MechanismFamily::Sparqr, sparqr_eq, 2),
        ("quantile_reserve_truthful", MechanismFamily::QuantileReserve, u.clone(), 2),
        ("ve_discount_equilibrium", MechanismFamily::VirtualEfficient { rule: ve_rule }, ve_eq, 2),
        (
            "target_forced",
            MechanismFamily::TargetDistribution {
                target: vec![target.clone(); 2],
            },
            target.clone(),
            2,
        ),
    ];
    for (name, fam, report, n) in cases {
        let m = PreparedMechanism::new(&fam, &FakeProfile::symmetric(&report, n)?)?;
        let truths = vec![u.clone(); n];
        let quad = quadrature_summary(&m, &truths)?;
        let est = monte_carlo_oracle(&m, &truths, &mc)?;
        for (what, q, e, se) in [
            ("rev", quad.revenue.virtual_form, est.revenue, est.revenue_se),
            ("sw", quad.welfare, est.welfare, est.welfare_se),
            ("u0", quad.utilities[0].virtual_form, est.utilities[0], est.utilities_se[0]),
        ] {
            out.checks.push(Check::at_most(format!("mc_{name}_{what}_in_se"), 4.0, (q - e).abs() / se.max(1e-15), 0.0));
        }
    }
    Ok(())
}

fn allocation_monotone(out: &mut Outcome) -> Result<()> {
    let g = grid(257);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
    let mut truths = vec![uniform(g)?, QuantileDistribution::equal_revenue(1.0, g)?];
    for _ in 0..4 {
        truths.push(random_regular(g, 1.0, &mut rng)?);
        truths.push(random_monotone(g, 1.0, &mut rng)?);
    }
    let kinds = families(&truths[0], 2).len();
    let mut ok = vec![true; kinds];
    for v in &truths {
        for n in [2, 3] {
            for (k, fam) in families(v, n).iter().enumerate() {
                let m = PreparedMechanism::new(fam, &FakeProfile::symmetric(v, n)?)?;
                let x = interim_allocation_curve(&m, 0);
                ok[k] &= x.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            }
        }
    }
    for (k, fam) in families(&truths[0], 2).iter().enumerate() {
        let label = match fam {
            MechanismFamily::VirtualEfficient { rule } => format!("ve_{}", rule.label()),
            other => other.name().to_string(),
        };
        out.checks.push(Check::flag(format!("x_star_monotone_{label}"), ok[k]));
    }
    Ok(())
}

/// Headline scalars at one grid size.
fn headline_scalars(n_points: usize) -> Result<Vec<(String, f64)>> {
    let g = grid(n_points);
    let u = uniform(g)?;
    let mut s = Vec::new();
    let push_table = |s: &mut Vec<(String, f64)>, name: &str, fam: &MechanismFamily, fake: &QuantileDistribution| {
        let t = symmetric_table("refine", fam, &u, fake, 2)?;
        s.push((format!("{name}_rev"), t.revenue));
        s.push((format!("{name}_sw"), t.welfare));
        s.push((format!("{name}_u"), t.utilities[0]));
        Ok::<_, fakeprior::Error>(())
    };
    push_table(&mut s, "spa", &MechanismFamily::Spa, &u)?;
    push_table(&mut s, "myerson_truthful", &MechanismFamily::Myerson, &u)?;
    push_table(&mut s, "myerson_eq", &MechanismFamily::Myerson, &QuantileDistribution::affine(0.5, -0.25, g)?)?;
    let q0 = spamr_incident_quantile(&u, 2)?;
    s.push(("spamr_q0".into(), q0));
    push_table(&mut s, "spamr_eq", &MechanismFamily::Spamr, &spamr_regular_best_response(&u, q0)?)?;
    push_table(&mut s, "sparqr_eq", &MechanismFamily::Sparqr, &sparqr_equilibrium(&u, 2)?.fake)?;
    for rule in VeRule::registry() {
        let fake = ve_equilibrium_condition(&rule, &u)?.fake;
        push_table(&mut s, &format!("ve_{}", rule.label()), &MechanismFamily::VirtualEfficient { rule }, &fake)?;
    }
    let target = full_surplus_target(&u)?;
    let fam = MechanismFamily::TargetDistribution {
        target: vec![target.clone(); 2],
    };
    push_table(&mut s, "target", &fam, &target)?;
    for eps in [0.1, 0.01] {
        let m = PreparedMechanism::new(
            &MechanismFamily::Myerson,
            &FakeProfile::new(vec![u.clone(), QuantileDistribution::constant(eps, g)?])?,
        )?;
        s.push((format!("intro_eps_{eps}"), game_utility(&m, &u, 1)?.virtual_form));
    }
    let br = myerson_best_response(&u, &[QuantileDistribution::affine(0.5, -0.25, g)?])?;
    s.push(("myerson_br_utility".into(), br.achieved_utility));
    Ok(s)
}

fn grid_refinement(out: &mut Outcome) -> Result<()> {
    let coarse = headline_scalars(513)?;
    let fine = headline_scalars(2049)?;
    let worst = coarse
        .iter()
        .zip(&fine)
        .map(|((name, a), (_, b))| (name.clone(), (a - b).abs()))
        .fold((String::new(), 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
    out.notes.push(format!("{} scalars, largest change {} ({:.3e})", coarse.len(), worst.0, worst.1));
    out.checks.push(Check::at_most("refinement_513_to_2049_max_change", 0.0, worst.1, TOL));
    Ok(())
}

fn infrastructure() -> Result<Outcome> {
    let mut out = Outcome::new();
    payment_identity(&mut out)?;
    quadrature_vs_monte_carlo(&mut out)?;
    allocation_monotone(&mut out)?;
    grid_refinement(&mut out)?;
    Ok(out)
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 11] = [
    ("constant report against truthful uniform opponent", intro_example),
    ("Myerson best response to the affine opponent", myerson_best_response_recovery),
    ("Myerson symmetric equilibrium and truthful baseline", myerson_equilibrium_figures),
    ("Myerson induced game equals first-price auction", myerson_fpa_equivalence),
    ("SPAMR regular case: incident quantile and revenue", spamr_regular),
    ("SPAMR general case: non-vanishing undercut gain", spamr_general),
    ("SPARQR: ODE equilibrium, verification, revenue gap", sparqr),
    ("VE suite: partials, report below truth, revenue bound", ve_suite),
    ("SPA dominance against random fake reports", spa_dominance),
    ("quantile-reserve and target-distribution families", appendix_families),
    ("payment identity, Monte Carlo, monotone x*, refinement", infrastructure),
];

fn main() -> ExitCode {
    // libtest flags (e.g. --nocapture) are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let started = Instant::now();
    let mut failed = 0;
    for (k, (title, run)) in CRITERIA.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let t0 = Instant::now();
        let result = run();
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                let pass = o.checks.iter().all(|c| c.passed);
                failed += usize::from(!pass);
                println!("{} {id:>2}  {title}  ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
                for c in &o.checks {
                    println!(
                        "        {:<4} {:<52} computed {:>14.9} reference {:>14.9} error {:>10.3e} tol {:.0e}",
                        if c.passed { "ok" } else { "fail" },
                        c.name,
                        c.computed,
                        c.reference,
                        c.error,
                        c.tol
                    );
                }
                for n in &o.notes {
                    println!("        note {n}");
                }
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {id:>2}  {title}  ({secs:.1}s)");
                println!("        error {e}");
            }
        }
    }
    println!("acceptance: {failed} failed, total {:.1}s", started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
