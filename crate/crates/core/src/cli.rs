//! Command-line front end: argument parsing, dispatch and CSV artifacts.

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bounds::{family_sweep, lfd_chain_report, FamilySpec, InequalityReport, SLACK};
use crate::config::{DistributionSpec, RunConfig};
use crate::decay::{fit_late_rate, landau_rate_constants, verify_decay, DecayHypothesis, DecayReport, Trajectory, NOISE_FLOOR};
use crate::dist::{fermi_dirac_equilibrium, radial_moment};
use crate::dist::{Distribution, GridDistribution};
use crate::error::{Error, Result};
use crate::functionals::{FunctionalOptions, FunctionalReport};
use crate::solver;

#[derive(Debug, Parser)]
#[command(name = "landau-lab", version, about = "Entropy dissipation functionals, inequality sweeps and a homogeneous Landau solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replaces the γ list (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// Replaces the ε list (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    /// Slack of the inequality checks, relative H tolerance of the decay
    /// checks and root tolerance of the equilibrium solve.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Functional report per (state, γ, ε).
    Functionals,
    /// Inequality sweep over a test family.
    Verify,
    /// Time integration with conservation and entropy monitors.
    Simulate,
    /// Hypothesis and envelope checks on a trajectory CSV.
    Decay {
        /// Overrides the trajectory path of the config (relative to the
        /// working directory).
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Fermi-Dirac equilibrium parameters per ε.
    Equilibrium,
}

/// Result of a successful command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// An inequality or decay check failed.
    pub violation: bool,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.violation {
            4
        } else {
            0
        }
    }
}

/// Parse, dispatch and map the result to an exit code; messages go to
/// stdout (summary) and stderr (errors).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut ctx = Context::new(&cli.global)?;
    let run = |ctx: &mut Context| match &cli.command {
        Command::Functionals => ctx.functionals(),
        Command::Verify => ctx.verify(),
        Command::Simulate => ctx.simulate(),
        Command::Decay { trajectory } => ctx.decay(trajectory.as_deref()),
        Command::Equilibrium => ctx.equilibrium(),
    };
    match cli.global.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run(&mut ctx)),
        None => run(&mut ctx),
    }
}

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    gammas: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    outcome: Outcome,
}

impl Context {
    fn new(args: &GlobalArgs) -> Result<Self> {
        let (mut cfg, base) = match &args.config {
            Some(path) => (
                RunConfig::load(path)?,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (RunConfig::default(), PathBuf::new()),
        };
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(t) = args.tolerance {
            cfg.tolerance = Some(t);
        }
        if args.threads == Some(0) {
            return Err(Error::Config("--threads must be positive".into()));
        }
        cfg.validate()?;
        let nonempty = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
        if args.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config("--gamma values must lie in [0, 1]".into()));
        }
        if args.epsilon.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Config("--epsilon values must be nonnegative".into()));
        }
        Ok(Self {
            cfg,
            base,
            out: args.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            gammas: nonempty(&args.gamma),
            epsilons: nonempty(&args.epsilon),
            outcome: Outcome::default(),
        })
    }

    fn options(&self) -> FunctionalOptions {
        self.cfg.quadrature.options(self.cfg.seed)
    }

    fn say(&mut self, line: impl Into<String>) {
        self.outcome.summary.push(line.into());
    }

    /// Write `name` under the output directory through a temporary file
    /// and a rename.
    fn write<F: FnOnce(&mut dyn Write) -> Result<()>>(&mut self, name: &str, body: F) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let target = self.out.join(name);
        let tmp = self.out.join(format!(".{name}.tmp"));
        {
            let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            body(&mut file)?;
            file.flush()?;
        }
        std::fs::rename(&tmp, &target)?;
        self.outcome.files.push(target.clone());
        Ok(target)
    }

    fn finish(&mut self) -> Outcome {
        std::mem::take(&mut self.outcome)
    }

    fn functionals(&mut self) -> Result<Outcome> {
        let sec = self.cfg.functionals.clone().unwrap_or_default();
        let gammas = self.gammas.clone().unwrap_or(sec.gammas.clone());
        let epsilons = self.epsilons.clone().unwrap_or(sec.epsilons.clone());
        let opts = self.options();
        let mut states: Vec<(String, Distribution)> = sec
            .distributions
            .iter()
            .map(|d| Ok((d.id.clone(), d.state.build(&self.base)?)))
            .collect::<Result<_>>()?;
        if let Some(family) = &sec.family {
            match family {
                FamilySpec::FermiDelta { .. } => {
                    for &e in &epsilons {
                        states.extend(family.members(Some(e))?);
                    }
                }
                _ => states.extend(family.members(None)?),
            }
        }
        if states.is_empty() {
            return Err(Error::Config("functionals: no distributions or family given".into()));
        }
        let mut jobs = Vec::new();
        for (id, f) in &states {
            for &g in &gammas {
                jobs.push((id, f, g, None));
                for &e in epsilons.iter().filter(|e| **e > 0.0) {
                    jobs.push((id, f, g, Some(e)));
                }
            }
        }
        let rows: Vec<Vec<String>> = jobs
            .par_iter()
            .map(|(id, f, g, e)| Ok(FunctionalReport::compute(f, *g, *e, &opts)?.csv_row(id)))
            .collect::<Result<_>>()?;
        let path = self.write(&sec.output, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(FunctionalReport::CSV_HEADER)?;
            for r in &rows {
                wtr.write_record(r)?;
            }
            wtr.flush()?;
            Ok(())
        })?;
        self.say(format!("functionals: {} rows written to {}", rows.len(), path.display()));
        Ok(self.finish())
    }

    fn verify(&mut self) -> Result<Outcome> {
        let sec = self.cfg.verify.clone().unwrap_or_default();
        let gammas = self.gammas.clone().unwrap_or(sec.gammas.clone());
        let epsilons = self.epsilons.clone().unwrap_or(sec.epsilons.clone());
        let opts = self.options();
        let slack = self.cfg.tolerance.unwrap_or(SLACK);
        let rescore = |r: &mut InequalityReport| {
            r.rhs *= sec.rhs_scale;
            r.rescore(slack);
        };
        let mut table = family_sweep(&sec.family, &gammas, &epsilons, &opts)?;
        table.rows.iter_mut().for_each(rescore);
        let path = self.write(&sec.output, |w| table.write_csv(w))?;
        for (name, c) in table.summary() {
            self.say(format!(
                "{name}: {} rows, {} gate-passing, {} satisfied",
                c.total, c.gate_passed, c.satisfied
            ));
        }
        let mut violation = !table.all_proved_rows_hold();
        if sec.chain {
            let lfd_eps: Vec<f64> = epsilons.iter().copied().filter(|e| *e > 0.0).collect();
            if lfd_eps.is_empty() {
                return Err(Error::Config("verify: chain audits need at least one ε > 0".into()));
            }
            let mut jobs = Vec::new();
            for &e in &lfd_eps {
                for (id, f) in sec.family.members(Some(e))? {
                    for &g in &gammas {
                        jobs.push((id.clone(), f.clone(), g, e));
                    }
                }
            }
            let mut links: Vec<InequalityReport> = jobs
                .par_iter()
                .map(|(id, f, g, e)| {
                    Ok(lfd_chain_report(f, *g, *e, &opts)?
                        .links
                        .into_iter()
                        .map(|l| l.with_id(id.clone()))
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            links.iter_mut().for_each(rescore);
            let failed = links.iter().filter(|l| !l.ok()).count();
            violation |= failed > 0;
            let name = sec.chain_output.clone();
            self.write(&name, |w| crate::bounds::SweepTable { rows: links.clone() }.write_csv(w))?;
            self.say(format!("chain: {} links, {failed} failed", links.len()));
        }
        self.say(if violation {
            "VIOLATION: a gate-passing instance is unsatisfied".to_string()
        } else {
            "satisfied: all gate-passing".to_string()
        });
        self.say(format!("report written to {}", path.display()));
        self.outcome.violation = violation;
        Ok(self.finish())
    }

    fn simulate(&mut self) -> Result<Outcome> {
        let sec = self.cfg.simulate.clone().unwrap_or_default();
        let mut cfg = sec.solver.clone();
        let single = |v: &Option<Vec<f64>>, name: &str| -> Result<Option<f64>> {
            match v.as_deref() {
                None => Ok(None),
                Some([x]) => Ok(Some(*x)),
                Some(_) => Err(Error::Config(format!("simulate takes a single --{name}"))),
            }
        };
        if let Some(g) = single(&self.gammas, "gamma")? {
            cfg.gamma = g;
        }
        if let Some(e) = single(&self.epsilons, "epsilon")? {
            cfg.epsilon = e;
        }
        cfg.validate()?;
        let f0 = match &sec.initial {
            DistributionSpec::Grid { .. } => match sec.initial.build(&self.base)? {
                Distribution::Grid(g) => g,
                _ => unreachable!("grid spec builds a grid"),
            },
            spec => {
                let f = spec.build(&self.base)?;
                GridDistribution::sample(cfg.half_width, cfg.nodes, |v| f.density(v))?
            }
        };
        let stem = sec.output.trim_end_matches(".csv").to_string();
        let out = match solver::run(&f0, &cfg) {
            Ok(out) => out,
            Err(failure) => {
                self.write(&sec.output, |w| failure.partial.write_csv(w))?;
                self.write(&format!("{stem}_last_good.csv"), |w| failure.last_good.write_csv(w))?;
                return Err(failure.error);
            }
        };
        let path = self.write(&sec.output, |w| out.trajectory.write_csv(w))?;
        self.write(&format!("{stem}_identity.csv"), |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["t", "entropy_drop", "dissipated", "residual"])?;
            for s in &out.identity {
                wtr.write_record([
                    format!("{:.12e}", s.t),
                    format!("{:.12e}", s.entropy_drop),
                    format!("{:.12e}", s.dissipated),
                    s.residual.map(|r| format!("{r:.6e}")).unwrap_or_default(),
                ])?;
            }
            wtr.flush()?;
            Ok(())
        })?;
        for (t, g) in &out.snapshots {
            self.write(&format!("{}_{t:.6}.csv", sec.snapshot_prefix), |w| g.write_csv(w))?;
        }
        let (dm, dp, de) = out.drifts();
        self.say(format!(
            "simulate: {} samples, {} steps ({} rejected), {} RHS evaluations",
            out.trajectory.len(),
            out.steps,
            out.rejected_steps,
            out.rhs_evaluations
        ));
        self.say(format!("drift: mass {dm:.3e}, momentum {dp:.3e}, energy {de:.3e}"));
        if let Some(r) = out.max_identity_residual() {
            self.say(format!("entropy identity: max relative residual {r:.3e}"));
        }
        self.say(format!("trajectory written to {}", path.display()));
        if sec.decay && cfg.epsilon == 0.0 {
            let tol = self.cfg.tolerance.unwrap_or(NOISE_FLOOR);
            self.decay_checks(&out.trajectory, sec.c1, None, tol, "decay.csv")?;
        }
        Ok(self.finish())
    }

    fn decay(&mut self, trajectory: Option<&Path>) -> Result<Outcome> {
        let sec = self.cfg.decay.clone().unwrap_or_default();
        let path = match trajectory {
            Some(p) => p.to_path_buf(),
            None => self.base.join(&sec.trajectory),
        };
        let file = std::fs::File::open(&path)
            .map_err(|e| Error::Config(format!("cannot open trajectory {}: {e}", path.display())))?;
        let traj = Trajectory::read_csv(std::io::BufReader::new(file))?.reindexed_from(sec.start_time);
        if traj.is_empty() {
            return Err(Error::Config(format!("no trajectory samples at or after t = {}", sec.start_time)));
        }
        let tol = self.cfg.tolerance.unwrap_or(sec.tolerance);
        let explicit = sec.q.zip(sec.c0);
        self.decay_checks(&traj, sec.c1, explicit, tol, &sec.output)?;
        Ok(self.finish())
    }

    /// Derive (q, c0) unless given, run both checks and write a key/value
    /// report.
    fn decay_checks(&mut self, traj: &Trajectory, c1: f64, explicit: Option<(f64, f64)>, tol: f64, name: &str) -> Result<DecayReport> {
        let h0 = traj.samples.first().map_or(0.0, |s| s.h);
        let (hyp, sup) = match explicit {
            Some((q, c0)) => (DecayHypothesis::new(q, c0, h0)?, None),
            None => {
                let sup = traj.sup_l2q6();
                if sup <= 0.0 {
                    return Err(Error::Config(
                        "trajectory has no l2q6 column; give q and c0 in the decay section".into(),
                    ));
                }
                (landau_rate_constants(sup, c1)?.hypothesis(h0)?, Some(sup))
            }
        };
        let report = verify_decay(traj, &hyp, tol);
        let fit = fit_late_rate(traj, NOISE_FLOOR).ok();
        let mut rows: Vec<(&str, String)> = vec![
            ("q", format!("{:.12e}", hyp.q)),
            ("c0", format!("{:.12e}", hyp.c0)),
            ("h0", format!("{:.12e}", hyp.h0)),
            ("onset", format!("{:.12e}", hyp.onset())),
            ("h_tolerance", format!("{:.6e}", report.h_tol)),
            ("hypothesis_checked", report.hypothesis_check.checked.to_string()),
            ("hypothesis_violations", report.hypothesis_check.violations.len().to_string()),
            ("envelope_checked", report.envelope_check.checked.to_string()),
            ("envelope_violations", report.envelope_check.envelope_violations.len().to_string()),
            ("monotonicity_violations", report.envelope_check.monotonicity_violations.len().to_string()),
            ("fitted_rate", fit.map(|r| format!("{r:.12e}")).unwrap_or_default()),
            ("passed", report.passed().to_string()),
        ];
        if let Some(s) = sup {
            rows.insert(0, ("sup_l2q6", format!("{s:.12e}")));
        }
        self.write(name, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["key", "value"])?;
            for (k, v) in &rows {
                wtr.write_record([*k, v.as_str()])?;
            }
            wtr.flush()?;
            Ok(())
        })?;
        self.say(format!(
            "decay: q = {:.4e}, c0 = {:.4e}, onset {:.4e}; hypothesis {} / {} ok, envelope {} / {} ok, {} monotonicity violations",
            hyp.q,
            hyp.c0,
            hyp.onset(),
            report.hypothesis_check.checked - report.hypothesis_check.violations.len(),
            report.hypothesis_check.checked,
            report.envelope_check.checked - report.envelope_check.envelope_violations.len(),
            report.envelope_check.checked,
            report.envelope_check.monotonicity_violations.len(),
        ));
        if let Some(r) = fit {
            self.say(format!("decay: fitted late-time rate {r:.4e}"));
        }
        if !report.passed() {
            self.say("VIOLATION: decay checks failed");
            self.outcome.violation = true;
        }
        Ok(report)
    }

    fn equilibrium(&mut self) -> Result<Outcome> {
        let sec = self.cfg.equilibrium.clone().unwrap_or_default();
        let epsilons = self.epsilons.clone().unwrap_or(sec.epsilons.clone());
        if epsilons.iter().any(|e| *e <= 0.0) {
            return Err(Error::Config("equilibrium: ε must be positive".into()));
        }
        let tol = self.cfg.tolerance.unwrap_or(sec.tolerance);
        let rows: Vec<Vec<String>> = epsilons
            .par_iter()
            .map(|&e| {
                let fmt = |x: f64| format!("{x:.12e}");
                match fermi_dirac_equilibrium(e, tol) {
                    Ok(s) => {
                        let qtol = (tol * 1e-3).max(1e-15);
                        let mass = radial_moment(0, s.b, s.ln_a(), e, qtol);
                        let energy = radial_moment(2, s.b, s.ln_a(), e, qtol);
                        Ok(vec![fmt(e), fmt(s.a), fmt(s.b), fmt(s.sup_norm()), fmt(mass), fmt(energy), "ok".into()])
                    }
                    Err(Error::Saturation(_)) => Ok(vec![
                        fmt(e),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "saturated".into(),
                    ]),
                    Err(err) => Err(err),
                }
            })
            .collect::<Result<_>>()?;
        let path = self.write(&sec.output, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["epsilon", "a", "b", "sup_norm", "mass", "energy", "status"])?;
            for r in &rows {
                wtr.write_record(r)?;
            }
            wtr.flush()?;
            Ok(())
        })?;
        let saturated = rows.iter().filter(|r| r[6] == "saturated").count();
        self.say(format!(
            "equilibrium: {} rows ({saturated} saturated) written to {}",
            rows.len(),
            path.display()
        ));
        Ok(self.finish())
    }
}
