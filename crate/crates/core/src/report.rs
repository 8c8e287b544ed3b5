//! Named scenarios, their output files and the consolidated reproduction table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::best_response::random::random_monotone;
use crate::best_response::{
    myerson_best_response, prior_independent_dominance_check, spamr_epsilon_undercut_gain, spamr_form,
    spamr_incident_quantile, spamr_piecewise_report, spamr_regular_best_response, sparqr_equilibrium,
    sparqr_two_buyer_gap, ve_equilibrium_condition,
};
use crate::equilibrium::{
    appendix_family_demos, best_response_dynamics, fpa_bne_iid, fpa_equilibrium_check, myerson_fpa_equivalence_check,
    sparqr_revenue_checks, spamr_revenue_checks, symmetric_table, ve_revenue_checks, verify_symmetric_equilibrium,
    Check, DeviationPolicy, EquilibriumReport, Trajectory, Verdict,
};
use crate::error::{Error, Result};
use crate::interim::{game_utility, monte_carlo_oracle, write_curve, McConfig, RevenueTable};
use crate::mechanism::{FakeProfile, MechanismFamily, PreparedMechanism, VeRule};
use crate::numeric::fmt_sig;
use crate::quantile::{QuantileDistribution, QuantileGrid};

/// Environment variable consulted for the default output directory.
pub const OUT_ENV: &str = "FAKEPRIOR_OUT";

pub const SCENARIOS: [&str; 12] = [
    "intro-epsilon",
    "myerson-uniform-br",
    "myerson-uniform-eq",
    "myerson-fpa-equiv",
    "spamr-regular-eq",
    "spamr-general-no-eq",
    "sparqr-eq",
    "sparqr-revenue-bound",
    "ve-bound",
    "spa-dominance",
    "appendix-families",
    "n-buyer-suite",
];

/// Run settings. Every field has a default; a JSON config may set any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_points: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Tolerance for the reference-value comparisons, in valuation units.
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_points: 1025,
            mc_samples: 1_000_000,
            seed: 20_240_601,
            tol: 1e-3,
            out: None,
            parallel: false,
        }
    }
}

impl ScenarioConfig {
    /// Parses without validating, so callers can override fields first.
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// The scenarios use the breakpoints 1/4, 1/2, 3/4 and 13/16, so the
    /// cell count must be a multiple of 16.
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 17 || !(self.n_points - 1).is_multiple_of(16) {
            return Err(Error::InvalidGrid(format!(
                "n_points = {} must be 16k + 1 with k >= 1",
                self.n_points
            )));
        }
        if self.mc_samples < 2 {
            return Err(Error::InvalidParameters("mc_samples must be at least 2".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameters(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<QuantileGrid> {
        self.validate()?;
        QuantileGrid::new(self.n_points)
    }

    /// `--out`, then the environment variable, then `./fakeprior-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fakeprior-out"))
    }

    fn mc(&self) -> McConfig {
        McConfig {
            samples: self.mc_samples,
            seed: self.seed,
        }
    }
}

/// Solver diagnostics: `{residual_max, utility, breakpoints}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub solver: String,
    pub residual_max: f64,
    pub utility: f64,
    pub breakpoints: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub grid: QuantileGrid,
    pub values: Vec<f64>,
}

/// Everything one scenario computed. The first check is the headline row.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub tables: Vec<RevenueTable>,
    pub equilibria: Vec<EquilibriumReport>,
    pub diagnostics: Vec<SolverDiagnostics>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
    #[serde(skip)]
    pub trajectories: Vec<(String, Trajectory)>,
}

impl ScenarioOutcome {
    fn new(name: &str) -> Self {
        Self {
            scenario: name.into(),
            passed: false,
            checks: Vec::new(),
            tables: Vec::new(),
            equilibria: Vec::new(),
            diagnostics: Vec::new(),
            curves: Vec::new(),
            trajectories: Vec::new(),
        }
    }

    fn curve(&mut self, name: &str, d: &QuantileDistribution) {
        self.curves.push(Curve {
            name: name.into(),
            grid: *d.grid(),
            values: d.values().to_vec(),
        });
    }

    fn finish(mut self) -> Self {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn headline(&self) -> Option<&Check> {
        self.checks.first()
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("scenario,check,reference,computed,error,tol,pass\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.scenario,
                c.name,
                fmt_sig(c.reference),
                fmt_sig(c.computed),
                fmt_sig(c.error),
                fmt_sig(c.tol),
                if c.passed { "pass" } else { "fail" }
            );
        }
        s
    }

    /// Writes `checks.csv`, `revenue_n{n}.csv`, `report.json`, curve and
    /// trajectory files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("checks.csv"), self.checks_csv())?;
        let mut by_n: BTreeMap<usize, Vec<RevenueTable>> = BTreeMap::new();
        for t in &self.tables {
            by_n.entry(t.utilities.len()).or_default().push(t.clone());
        }
        for (n, rows) in by_n {
            fs::write(dir.join(format!("revenue_n{n}.csv")), RevenueTable::to_csv(&rows))?;
        }
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        for c in &self.curves {
            write_curve(&dir.join(format!("{}.tsv", c.name)), &c.grid, &c.values)?;
        }
        for (name, t) in &self.trajectories {
            fs::write(dir.join(format!("{name}.csv")), t.to_csv())?;
        }
        Ok(())
    }
}

/// Quadrature row for an arbitrary report profile.
fn profile_table(
    scenario: &str,
    family: &MechanismFamily,
    truths: &[QuantileDistribution],
    reports: Vec<QuantileDistribution>,
) -> Result<RevenueTable> {
    let m = PreparedMechanism::new(family, &FakeProfile::new(reports)?)?;
    let s = crate::interim::quadrature_summary(&m, truths)?;
    Ok(RevenueTable {
        scenario: scenario.into(),
        family: family.name().into(),
        method: "quadrature".into(),
        revenue: s.revenue.virtual_form,
        welfare: s.welfare,
        utilities: s.utilities.iter().map(|u| u.virtual_form).collect(),
        samples: None,
        seed: None,
        stderr: None,
    })
}

/// Monte Carlo row plus a 4-standard-error agreement check against `quad`.
fn mc_table(
    scenario: &str,
    family: &MechanismFamily,
    truths: &[QuantileDistribution],
    reports: Vec<QuantileDistribution>,
    quad: &RevenueTable,
    cfg: &ScenarioConfig,
) -> Result<(RevenueTable, Check)> {
    let m = PreparedMechanism::new(family, &FakeProfile::new(reports)?)?;
    let e = monte_carlo_oracle(&m, truths, &cfg.mc())?;
    let check = Check::at_most(
        format!("{}_rev_quadrature_vs_mc_within_4se", family.name()),
        4.0 * e.revenue_se,
        (e.revenue - quad.revenue).abs(),
        1e-12,
    );
    let row = RevenueTable {
        scenario: scenario.into(),
        family: family.name().into(),
        method: "monte_carlo".into(),
        revenue: e.revenue,
        welfare: e.welfare,
        utilities: e.utilities,
        samples: Some(e.samples),
        seed: Some(e.seed),
        stderr: Some(e.revenue_se),
    };
    Ok((row, check))
}

fn uniform(g: QuantileGrid) -> Result<QuantileDistribution> {
    QuantileDistribution::uniform(0.0, 1.0, g)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn equilibrium_check(name: &str, r: &EquilibriumReport, tol: f64) -> Check {
    Check::at_most(name, 0.0, r.max_gain, tol)
}

fn intro_epsilon(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("intro-epsilon");
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let truths = vec![u.clone(), u.clone()];
    for (eps, tol) in [(0.1, cfg.tol), (0.01, cfg.tol), (1e-3, 5.0 * cfg.tol)] {
        let reports = vec![u.clone(), QuantileDistribution::constant(eps, g)?];
        let m = PreparedMechanism::new(&MechanismFamily::Myerson, &FakeProfile::new(reports.clone())?)?;
        let got = game_utility(&m, &u, 1)?.virtual_form;
        let want = if eps < 5e-3 { 0.25 } else { (eps + 1.0) * (1.0 - 2.0 * eps) / 4.0 };
        out.checks.push(Check::equal(format!("constant_report_utility_eps_{eps}"), want, got, tol));
        out.tables.push(profile_table(&out.scenario, &MechanismFamily::Myerson, &truths, reports)?);
    }
    Ok(out.finish())
}

fn myerson_uniform_br(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("myerson-uniform-br");
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let opp = QuantileDistribution::affine(0.5, -0.25, g)?;
    let br = myerson_best_response(&u, &[opp])?;
    let r = br.virtual_curve.clone().unwrap_or_default();
    let want_r = g.sample(|q| (1.0 - q) / 2.0);
    let want_v = g.sample(|q| 0.5 - q / 4.0);
    out.checks.push(Check::at_most("virtual_bid_max_error", 0.0, max_abs_diff(&r, &want_r), cfg.tol));
    out.checks
        .push(Check::at_most("report_max_error", 0.0, max_abs_diff(br.fake.values(), &want_v), cfg.tol));
    out.checks.push(Check::flag("virtual_bid_decreasing", r.windows(2).all(|w| w[1] <= w[0])));
    out.checks.push(Check::flag("report_regular", br.fake.is_regular()));
    out.checks.push(Check::flag(
        "report_at_least_virtual_bid",
        br.fake.values().iter().zip(&r).all(|(v, r)| *v >= r - 1e-12),
    ));
    out.diagnostics.push(SolverDiagnostics {
        solver: "myerson_best_response".into(),
        residual_max: br.residual_max,
        utility: br.achieved_utility,
        breakpoints: Vec::new(),
    });
    out.curve("best_response", &br.fake);
    out.curves.push(Curve {
        name: "virtual_bid".into(),
        grid: g,
        values: r,
    });
    Ok(out.finish())
}

fn myerson_uniform_eq(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let name = "myerson-uniform-eq";
    let mut out = ScenarioOutcome::new(name);
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let fam = MechanismFamily::Myerson;
    let cand = QuantileDistribution::affine(0.5, -0.25, g)?;
    let policy = DeviationPolicy {
        seed: cfg.seed,
        tol: cfg.tol,
        ..DeviationPolicy::default()
    };
    let report = verify_symmetric_equilibrium(&fam, &u, &cand, 2, &policy)?;
    out.checks.push(equilibrium_check("equilibrium_max_gain", &report, cfg.tol));
    let eq = symmetric_table(name, &fam, &u, &cand, 2)?;
    let tr = symmetric_table(name, &fam, &u, &u, 2)?;
    out.checks.push(Check::equal("equilibrium_utility", 1.0 / 6.0, eq.utilities[0], cfg.tol));
    out.checks.push(Check::equal("equilibrium_revenue", 1.0 / 3.0, eq.revenue, cfg.tol));
    out.checks.push(Check::equal("equilibrium_welfare", 2.0 / 3.0, eq.welfare, cfg.tol));
    out.checks.push(Check::equal("truthful_utility", 1.0 / 12.0, tr.utilities[0], cfg.tol));
    out.checks.push(Check::equal("truthful_revenue", 5.0 / 12.0, tr.revenue, cfg.tol));
    out.checks.push(Check::equal("truthful_welfare", 7.0 / 12.0, tr.welfare, cfg.tol));
    let truths = vec![u.clone(), u.clone()];
    let (mc, check) = mc_table(name, &fam, &truths, vec![cand.clone(), cand.clone()], &eq, cfg)?;
    out.checks.push(check);
    out.tables.extend([eq, tr, mc]);

    let still = best_response_dynamics(&fam, &u, &[cand.clone(), cand.clone()], 1, 1.0)?;
    out.checks.push(Check::at_most("dynamics_from_equilibrium_change", 0.0, still.last_change(), cfg.tol));
    let traj = best_response_dynamics(&fam, &u, &[u.clone(), u.clone()], 10, 1.0)?;
    if settled(&fam, &u, &traj, cfg.tol)? {
        let gap = traj.profile[0].sup_distance(&cand);
        out.checks.push(Check::at_most("dynamics_fixed_point_distance", 0.0, gap, 1e-2));
    }
    out.trajectories.push(("dynamics".into(), traj));
    out.equilibria.push(report);
    out.curve("candidate", &cand);
    Ok(out.finish())
}

/// Small last-round change and every buyer already best-responding. The sup
/// change alone is fooled by two reports leapfrogging just above zero.
fn settled(family: &MechanismFamily, v: &QuantileDistribution, traj: &Trajectory, tol: f64) -> Result<bool> {
    if traj.last_change() >= tol {
        return Ok(false);
    }
    let m = PreparedMechanism::new(family, &FakeProfile::new(traj.profile.clone())?)?;
    let n = traj.profile.len();
    for (row, i) in traj.rows.iter().rev().take(n).zip((0..n).rev()) {
        if game_utility(&m, v, i)?.virtual_form < row.utility - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn myerson_fpa_equiv(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("myerson-fpa-equiv");
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let truths = vec![u.clone(), u.clone()];
    let half = g.sample(|q| (1.0 - q) / 2.0);
    let base = myerson_fpa_equivalence_check(&truths, &[half.clone(), half.clone()])?;
    out.checks.push(Check::at_most("half_value_discrepancy", 0.0, base.max_discrepancy, 1e-10));
    out.checks.push(Check::equal("half_value_utility", 1.0 / 6.0, base.myerson[0], cfg.tol));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_monotone(g, 1.0, &mut rng)?.values().to_vec();
        let b = random_monotone(g, 1.0, &mut rng)?.values().to_vec();
        worst = worst.max(myerson_fpa_equivalence_check(&truths, &[a, b])?.max_discrepancy);
    }
    out.checks.push(Check::at_most("random_profiles_discrepancy", 0.0, worst, 1e-10));
    let bne = fpa_bne_iid(&u, 2)?;
    out.checks.push(Check::at_most("fpa_bne_half_value_error", 0.0, max_abs_diff(&bne.bids, &half), 1e-6));
    let fc = fpa_equilibrium_check(&u, &bne, 50, cfg.seed)?;
    out.checks.push(Check::at_most("fpa_bne_pointwise_gain", 0.0, fc.pointwise_gain, cfg.tol));
    out.checks.push(Check::at_most("fpa_bne_sampled_gain", 0.0, fc.sampled_gain, cfg.tol));
    out.curves.push(Curve {
        name: "fpa_bne".into(),
        grid: g,
        values: bne.bids,
    });
    Ok(out.finish())
}

fn spamr_regular_eq(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let name = "spamr-regular-eq";
    let mut out = ScenarioOutcome::new(name);
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let fam = MechanismFamily::Spamr;
    let q0 = spamr_incident_quantile(&u, 2)?;
    out.checks.push(Check::equal("incident_quantile", 0.25, q0, 1e-6));
    let fake = spamr_regular_best_response(&u, q0)?;
    let policy = DeviationPolicy {
        regular_only: true,
        seed: cfg.seed,
        tol: cfg.tol,
        ..DeviationPolicy::default()
    };
    let report = verify_symmetric_equilibrium(&fam, &u, &fake, 2, &policy)?;
    out.checks.push(equilibrium_check("equilibrium_max_gain", &report, cfg.tol));
    let eq = symmetric_table(name, &fam, &u, &fake, 2)?;
    let spa = symmetric_table(name, &MechanismFamily::Spa, &u, &u, 2)?;
    out.checks.push(Check::equal("equilibrium_revenue", 1.0 / 3.0, eq.revenue, cfg.tol));
    out.checks.push(Check::equal("equilibrium_revenue_equals_spa", spa.revenue, eq.revenue, cfg.tol));
    let star = fake.reserve_quantile();
    out.checks.push(Check::flag("report_regular", fake.is_regular()));
    out.checks.push(Check::equal("report_reserve_quantile", 1.0, star.quantile, 1e-12));
    out.diagnostics.push(SolverDiagnostics {
        solver: "spamr_regular_best_response".into(),
        residual_max: crate::best_response::incident_equation(&u, 2, q0).abs(),
        utility: eq.utilities[0],
        breakpoints: vec![q0],
    });
    out.tables.extend([eq, spa]);
    out.equilibria.push(report);
    out.curve("equilibrium_report", &fake);
    Ok(out.finish())
}

fn spamr_general_no_eq(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("spamr-general-no-eq");
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let level = 3.0 / 16.0;
    let cand = spamr_piecewise_report(&u, &spamr_form(&u, level)?)?;
    let policy = DeviationPolicy {
        seed: cfg.seed,
        tol: cfg.tol,
        ..DeviationPolicy::default()
    };
    let report = verify_symmetric_equilibrium(&MechanismFamily::Spamr, &u, &cand, 2, &policy)?;
    let refuted = matches!(report.verdict, Verdict::Refuted { .. });
    out.checks.push(Check::flag("candidate_refuted", refuted));
    out.checks.push(Check::flag("witness_is_undercut", report.best_deviation.starts_with("undercut")));
    let gains: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| spamr_epsilon_undercut_gain(&u, level, 2, eps))
        .collect::<Result<_>>()?;
    for (eps, gain) in [1e-2, 1e-3, 1e-4].iter().zip(&gains) {
        out.checks.push(Check::flag(format!("undercut_gain_positive_eps_{eps:e}"), *gain > 0.0));
    }
    out.checks.push(Check::flag("undercut_gain_non_vanishing", gains[2] >= 0.5 * gains[0]));
    out.diagnostics.push(SolverDiagnostics {
        solver: "spamr_epsilon_undercut".into(),
        residual_max: 0.0,
        utility: gains[2],
        breakpoints: gains,
    });
    let traj = best_response_dynamics(&MechanismFamily::Spamr, &u, &[u.clone(), u.clone()], 3, 1.0)?;
    out.trajectories.push(("dynamics".into(), traj));
    out.equilibria.push(report);
    out.curve("candidate", &cand);
    Ok(out.finish())
}

fn sparqr_eq(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let name = "sparqr-eq";
    let mut out = ScenarioOutcome::new(name);
    let g = cfg.grid()?;
    let u = uniform(g)?;
    let sol = sparqr_equilibrium(&u, 2)?;
    let want = g.sample(|q| if q == 0.0 { 1.0 } else { 1.0 - q + q * q.ln() });
    out.checks.push(Check::at_most("ode_solution_max_error", 0.0, max_abs_diff(sol.fake.values(), &want), 1e-4));
    out.checks.push(Check::at_most("ode_residual", 0.0, sol.residual_max, 1e-6));
    out.checks.push(Check::at_most("rk4_cross_check", 0.0, sol.rk4_max_diff, 1e-6));
    out.checks.push(Check::at_most("boundary_slope", 0.0, sol.boundary_slope.abs(), 1e-4));
    let policy = DeviationPolicy {
        seed: cfg.seed,
        tol: cfg.tol,
        ..DeviationPolicy::default()
    };
    let report = verify_symmetric_equilibrium(&MechanismFamily::Sparqr, &u, &sol.fake, 2, &policy)?;
    out.checks.push(equilibrium_check("equilibrium_max_gain", &report, cfg.tol));
    out.checks.push(equilibrium_check("equilibrium_max_gain_atomless_deviations", &report_atomless(&report), cfg.tol));
    let eq = symmetric_table(name, &MechanismFamily::Sparqr, &u, &sol.fake, 2)?;
    let spa = symmetric_table(name, &MechanismFamily::Spa, &u, &u, 2)?;
    out.checks.push(Check::at_most("revenue_at_most_spa", spa.revenue, eq.revenue, cfg.tol));
    out.checks.push(Check::flag("two_buyer_gap_nonnegative", sparqr_two_buyer_gap(&sol.fake) >= 0.0));
    out.diagnostics.push(SolverDiagnostics {
        solver: "sparqr_equilibrium".into(),
        residual_max: sol.residual_max,
        utility: eq.utilities[0],
        breakpoints: Vec::new(),
    });
    out.tables.extend([eq, spa]);
    out.equilibria.push(report);
    out.curve("equilibrium_report", &sol.fake);
    Ok(out.finish())
}

fn report_atomless(r: &EquilibriumReport) -> EquilibriumReport {
    EquilibriumReport {
        max_gain: r.atomless_max_gain,
        ..r.clone()
    }
}

fn sparqr_revenue_bound(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("sparqr-revenue-bound");
    let u = uniform(cfg.grid()?)?;
    for n in 2..=5 {
        out.checks.extend(sparqr_revenue_checks(&u, n, cfg.tol)?);
    }
    Ok(out.finish())
}

fn ve_bound(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let name = "ve-bound";
    let mut out = ScenarioOutcome::new(name);
    let u = uniform(cfg.grid()?)?;
    for rule in VeRule::registry() {
        out.checks.push(Check::flag(format!("partials_{}", rule.label()), rule.check_partials().truthful()));
        let s = ve_equilibrium_condition(&rule, &u)?;
        out.checks.push(Check::flag(format!("report_decreasing_{}", rule.label()), s.decreasing));
        out.diagnostics.push(SolverDiagnostics {
            solver: format!("ve_equilibrium_condition {}", rule.label()),
            residual_max: s.residual_max,
            utility: symmetric_table(name, &MechanismFamily::VirtualEfficient { rule }, &u, &s.fake, 2)?.utilities[0],
            breakpoints: Vec::new(),
        });
    }
    let slope_rule = VeRule::Linear {
        a_v: 1.0,
        a_q: 0.0,
        a_slope: 0.5,
    };
    out.checks.push(Check::flag("slope_dependent_rule_rejected", slope_rule.validate().is_err()));
    out.checks.extend(ve_revenue_checks(&u, 2, cfg.tol)?);
    Ok(out.finish())
}

fn spa_dominance(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("spa-dominance");
    let u = uniform(cfg.grid()?)?;
    let r = prior_independent_dominance_check(&MechanismFamily::Spa, &u, 2, 100, cfg.seed, 1e-6)?;
    out.checks.push(Check::at_most("max_deviation_gain", 0.0, r.max_gain, 1e-6));
    out.checks.push(Check::flag("blend_toward_truth_monotone", r.blend_monotone));
    out.diagnostics.push(SolverDiagnostics {
        solver: "prior_independent_dominance_check".into(),
        residual_max: r.max_gain,
        utility: r.truthful_utility,
        breakpoints: r.blend_path,
    });
    Ok(out.finish())
}

fn appendix_families(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let mut out = ScenarioOutcome::new("appendix-families");
    let u = uniform(cfg.grid()?)?;
    let (checks, tables) = appendix_family_demos(&u, 2, cfg.tol)?;
    let target = &tables[0];
    out.checks.push(Check::equal("target_revenue", 2.0 / 3.0, target.revenue, cfg.tol));
    out.checks.push(Check::equal("target_welfare", 2.0 / 3.0, target.welfare, cfg.tol));
    out.checks.push(Check::equal("quantile_reserve_truthful_revenue", 1.0 / 3.0, tables[3].revenue, cfg.tol));
    out.checks.extend(checks);
    out.tables = tables;
    Ok(out.finish())
}

fn n_buyer_suite(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let name = "n-buyer-suite";
    let mut out = ScenarioOutcome::new(name);
    let u = uniform(cfg.grid()?)?;
    for n in [3, 4] {
        out.checks.extend(spamr_revenue_checks(&u, n, cfg.tol)?);
    }
    for n in [3, 4] {
        out.checks.extend(sparqr_revenue_checks(&u, n, cfg.tol)?);
        out.checks.extend(ve_revenue_checks(&u, n, cfg.tol)?);
        out.tables.push(symmetric_table(name, &MechanismFamily::Spa, &u, &u, n)?);
    }
    Ok(out.finish())
}

pub fn run_scenario(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    match name {
        "intro-epsilon" => intro_epsilon(cfg),
        "myerson-uniform-br" => myerson_uniform_br(cfg),
        "myerson-uniform-eq" => myerson_uniform_eq(cfg),
        "myerson-fpa-equiv" => myerson_fpa_equiv(cfg),
        "spamr-regular-eq" => spamr_regular_eq(cfg),
        "spamr-general-no-eq" => spamr_general_no_eq(cfg),
        "sparqr-eq" => sparqr_eq(cfg),
        "sparqr-revenue-bound" => sparqr_revenue_bound(cfg),
        "ve-bound" => ve_bound(cfg),
        "spa-dominance" => spa_dominance(cfg),
        "appendix-families" => appendix_families(cfg),
        "n-buyer-suite" => n_buyer_suite(cfg),
        other => Err(Error::InvalidParameters(format!(
            "unknown scenario '{other}'; known: {}",
            SCENARIOS.join(", ")
        ))),
    }
}

/// Runs the named scenarios in order, concurrently when `cfg.parallel`.
pub fn run_scenarios(names: &[String], cfg: &ScenarioConfig) -> Result<Vec<ScenarioOutcome>> {
    if names.is_empty() {
        return Err(Error::InvalidParameters("no scenarios given".into()));
    }
    if cfg.parallel {
        names.par_iter().map(|n| run_scenario(n, cfg)).collect()
    } else {
        names.iter().map(|n| run_scenario(n, cfg)).collect()
    }
}

/// One row of the reproduction table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub scenario: String,
    pub check: String,
    pub reference: f64,
    pub computed: f64,
    pub error: f64,
    pub passed: bool,
    pub failing: Vec<String>,
}

pub fn reproduction_table(outcomes: &[ScenarioOutcome]) -> Vec<TableRow> {
    outcomes
        .iter()
        .map(|o| {
            let head = o.headline();
            TableRow {
                scenario: o.scenario.clone(),
                check: head.map(|c| c.name.clone()).unwrap_or_default(),
                reference: head.map_or(f64::NAN, |c| c.reference),
                computed: head.map_or(f64::NAN, |c| c.computed),
                error: head.map_or(f64::NAN, |c| c.error.abs()),
                passed: o.passed,
                failing: o.failures().iter().map(|c| c.name.clone()).collect(),
            }
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("scenario,check,reference_value,computed,abs_error,result\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.scenario,
            r.check,
            fmt_sig(r.reference),
            fmt_sig(r.computed),
            fmt_sig(r.error),
            if r.passed { "pass" } else { "fail" }
        );
    }
    s
}

/// Writes `table.csv`, `table.json` and every scenario directory under `dir`.
pub fn write_table(outcomes: &[ScenarioOutcome], dir: &Path) -> Result<Vec<TableRow>> {
    fs::create_dir_all(dir)?;
    for o in outcomes {
        o.write(&dir.join(&o.scenario))?;
    }
    let rows = reproduction_table(outcomes);
    fs::write(dir.join("table.csv"), table_csv(&rows))?;
    fs::write(dir.join("table.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistSummary {
    pub q_star: f64,
    pub r_star: f64,
    pub price: f64,
    pub regular: bool,
}

/// Writes `v.tsv`, `revenue.tsv`, `virtual_value.tsv`, `ironed_revenue.tsv`
/// and `summary.json` for one distribution.
pub fn write_dist(d: &QuantileDistribution, dir: &Path) -> Result<DistSummary> {
    fs::create_dir_all(dir)?;
    let g = d.grid();
    let ironed = d.iron();
    write_curve(&dir.join("v.tsv"), g, d.values())?;
    write_curve(&dir.join("revenue.tsv"), g, &d.revenue_curve().values)?;
    write_curve(&dir.join("virtual_value.tsv"), g, &d.virtual_value_curve().values)?;
    write_curve(&dir.join("ironed_revenue.tsv"), g, &ironed.ironed_revenue)?;
    let star = d.reserve_quantile();
    let summary = DistSummary {
        q_star: star.quantile,
        r_star: star.revenue,
        price: star.price,
        regular: d.is_regular(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_points: 257,
            mc_samples: 20_000,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn config_rejects_unaligned_grid() {
        let cfg = ScenarioConfig {
            n_points: 1000,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ScenarioConfig::from_json(r#"{"n_points": 513, "seed": 3}"#).unwrap().seed == 3);
        assert!(ScenarioConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn unknown_and_empty() {
        assert!(run_scenario("nope", &small()).is_err());
        assert!(run_scenarios(&[], &small()).is_err());
    }

    #[test]
    fn intro_and_appendix_pass_on_coarse_grid() {
        for name in ["intro-epsilon", "appendix-families", "spa-dominance"] {
            let o = run_scenario(name, &small()).unwrap();
            assert!(o.passed, "{name}: {:?}", o.failures());
        }
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        let cfg = small();
        let names = vec!["intro-epsilon".to_string(), "myerson-fpa-equiv".to_string()];
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_table(&run_scenarios(&names, &cfg).unwrap(), a.path()).unwrap();
        let par = ScenarioConfig { parallel: true, ..cfg };
        write_table(&run_scenarios(&names, &par).unwrap(), b.path()).unwrap();
        for f in ["table.csv", "table.json", "intro-epsilon/report.json", "myerson-fpa-equiv/fpa_bne.tsv"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn dist_summary_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let d = QuantileDistribution::uniform(0.0, 1.0, QuantileGrid::new(65).unwrap()).unwrap();
        let s = write_dist(&d, dir.path()).unwrap();
        assert!((s.q_star - 0.5).abs() < 1e-12);
        assert!(s.regular);
        assert!(dir.path().join("ironed_revenue.tsv").exists());
    }
}
