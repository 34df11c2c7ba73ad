//! One function per verb. Each computes, checks hard invariants and writes CSV files.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use shortfall_core::demos::{hullwhite_demo, kais_covariation, nonconcave_value};
use shortfall_core::diagnostics::{
    density_moment, jump_bound_check, kernel_sweep, ks_distance, lattice_exit_probability,
    q_price_martingale, terminal_pmf, terminal_prices, KernelReport,
};
use shortfall_core::dp::{
    dp_grid, estimate_cost, grid_index, latest_checkpoint, resume_dp_grid, unhedged_value, Bound,
    CheckpointPolicy, DpConfig, ValueSlice,
};
use shortfall_core::kernel::{DriftFunctional, Measure};
use shortfall_core::mc::{
    discounted_terminal, exit_stats_ladder, simulate_raw, simulate_truncated,
    unhedged_from_samples, ExitStats, McEstimate,
};
use shortfall_core::model::{Instance, TruncationBounds};

use crate::config::{OffGrid, RunConfig};
use crate::error::CliError;
use crate::output::{num, opt, Csv, Provenance};

/// Residual allowed in the kernel identities before a run is declared broken.
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Table1,
    Table2,
    Table3,
    Table4,
    Diagnostics,
    Demos,
    Mc,
    Resume,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Table1 => "table1",
            Verb::Table2 => "table2",
            Verb::Table3 => "table3",
            Verb::Table4 => "table4",
            Verb::Diagnostics => "diagnostics",
            Verb::Demos => "demos",
            Verb::Mc => "mc",
            Verb::Resume => "resume",
        }
    }
}

pub struct Runner {
    pub cfg: RunConfig,
    pub verb: Verb,
    pub out: PathBuf,
    pub dry_run: bool,
}

/// One ladder row: n, M fraction, M, grid index, whether x was on the grid, and the
/// value under each bound.
type LadderRow = (usize, f64, usize, usize, bool, BTreeMap<&'static str, f64>);

/// A planned grid program, for dry runs.
struct DpPlan {
    n: usize,
    m: usize,
    bound: Bound,
}

impl Runner {
    pub fn run(&self) -> Result<(), CliError> {
        if self.dry_run {
            return self.dry_run_report();
        }
        match self.verb {
            Verb::Table1 => self.table1(false),
            Verb::Resume => self.table1(true),
            Verb::Table2 => self.table2(),
            Verb::Table3 => self.ladder_table(3),
            Verb::Table4 => self.ladder_table(4),
            Verb::Diagnostics => self.diagnostics(),
            Verb::Demos => self.demos(),
            Verb::Mc => self.mc(),
        }
    }

    fn provenance(&self, notes: Vec<String>) -> Provenance {
        Provenance {
            command: self.verb.name().into(),
            config_digest: self.cfg.digest(),
            projection: self.cfg.projection.label().into(),
            notes,
        }
    }

    fn write(&self, csv: &Csv, name: &str, notes: Vec<String>) -> Result<(), CliError> {
        let path = csv.write(&self.out, name, &self.provenance(notes))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn dp_config(&self, m: usize, bound: Bound) -> DpConfig {
        let mut c = DpConfig::new(m, bound).with_projection(self.cfg.projection);
        c.plus_rounding = self.cfg.plus_rounding;
        c.precision = self.cfg.precision;
        c
    }

    /// Grid program, checkpointed under `<checkpoint>/<tag>_n<n>_m<m>` when a directory is
    /// configured and resumed from there when a checkpoint exists.
    fn run_dp(
        &self,
        inst: &Instance,
        m: usize,
        bound: Bound,
        tag: &str,
        must_resume: bool,
    ) -> Result<ValueSlice, CliError> {
        let mut dp = self.dp_config(m, bound);
        let t = Instant::now();
        let slice = match &self.cfg.checkpoint {
            Some(root) => {
                let dir = root.join(format!("{tag}_n{}_m{m}", inst.n()));
                dp.checkpoint = CheckpointPolicy::Every {
                    dir: dir.clone(),
                    stride: self.cfg.checkpoint_stride.max(1),
                };
                if latest_checkpoint(&dir, bound)?.is_some() {
                    eprintln!("resuming {bound} n={} M={m} from {}", inst.n(), dir.display());
                    resume_dp_grid(inst, &dp)?
                } else if must_resume {
                    return Err(CliError::Resource(format!(
                        "no {bound} checkpoint in {}",
                        dir.display()
                    )));
                } else {
                    dp_grid(inst, &dp)?
                }
            }
            None if must_resume => {
                return Err(CliError::Resource("resume needs --checkpoint DIR".into()));
            }
            None => dp_grid(inst, &dp)?,
        };
        eprintln!("{bound} n={} M={m} done in {:.1?}", inst.n(), t.elapsed());
        Ok(slice)
    }

    fn table1(&self, resume: bool) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let inst = cfg.instance(cfg.n)?;
        let xs = &cfg.x_grid;
        let idx: Vec<usize> = xs
            .iter()
            .map(|&x| grid_index(x, cfg.params.s0, cfg.m))
            .collect::<Result<_, _>>()
            .map_err(CliError::config)?;
        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for bound in cfg.bound.bounds() {
            let slice = self.run_dp(&inst, cfg.m, bound, "table1", resume)?;
            values.insert(bound.label(), idx.iter().map(|&l| slice.root_value(l)).collect());
        }
        let u_lat: Vec<f64> = xs
            .iter()
            .map(|&x| unhedged_value(&inst, cfg.projection, x))
            .collect::<Result<_, _>>()?;
        let samples = simulate_truncated(&cfg.params, &cfg.bounds, &cfg.mc)?;
        let u_mc = unhedged_from_samples(&cfg.params, &samples, &cfg.mc, xs);

        let jm = values.get("minus");
        let jp = values.get("plus");
        for (r, x) in xs.iter().enumerate() {
            if let (Some(a), Some(b)) = (jm, jp) {
                if a[r] > b[r] + 1e-9 {
                    return Err(CliError::Invariant(format!("J- > J+ at x = {x}")));
                }
            }
            // doing nothing is admissible and stays on the grid
            for v in [jm, jp].into_iter().flatten() {
                if v[r] < u_lat[r] - 1e-9 {
                    return Err(CliError::Invariant(format!(
                        "grid value {} below the unhedged value {} at x = {x}",
                        v[r], u_lat[r]
                    )));
                }
            }
        }

        let mut table = Csv::new(&["x", "j_minus", "j_plus", "u_lattice", "u_mc", "u_mc_stderr"]);
        let mut figure = Csv::new(&["x", "j_minus", "j_plus", "u_lattice", "u_mc"]);
        for (r, x) in xs.iter().enumerate() {
            let jm_r = opt(jm.map(|v| v[r]));
            let jp_r = opt(jp.map(|v| v[r]));
            table.row(vec![
                num(x),
                jm_r.clone(),
                jp_r.clone(),
                num(u_lat[r]),
                num(u_mc[r].mean),
                num(u_mc[r].stderr),
            ]);
            figure.row(vec![num(x), jm_r, jp_r, num(u_lat[r]), num(u_mc[r].mean)]);
        }
        self.write(&table, "table1.csv", vec![format!("n={} M={}", cfg.n, cfg.m)])?;
        let path = figure.write_plain(&self.out, "figure1.csv")?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn exit_rows(&self, inst_for: &dyn Fn(f64) -> Result<Instance, CliError>) -> Result<(Csv, String), CliError> {
        let cfg = &self.cfg;
        let his = &cfg.table2.sigma_hi;
        let stats = exit_stats_ladder(&cfg.params, cfg.bounds.sigma_lo, his, &cfg.mc)?;
        let mut csv = Csv::new(&[
            "sigma_hi",
            "p_exit",
            "p_exit_stderr",
            "p_no_exit",
            "p_no_exit_stderr",
            "p_hit_lo",
            "p_hit_hi",
            "lattice_p_exit",
        ]);
        for s in &stats {
            let inst = inst_for(s.sigma_hi)?;
            let lat = lattice_exit_probability(&inst, cfg.projection, s.sigma_lo, s.sigma_hi)?;
            csv.row(vec![
                num(s.sigma_hi),
                num(s.p_exit.mean),
                num(s.p_exit.stderr),
                num(s.p_no_exit.mean),
                num(s.p_no_exit.stderr),
                num(s.p_hit_lo.mean),
                num(s.p_hit_hi.mean),
                num(lat),
            ]);
        }
        Ok((csv, orientation_note(&stats)))
    }

    fn table2(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let inst_for = |hi: f64| {
            let b = TruncationBounds::new(cfg.bounds.sigma_lo, hi).map_err(CliError::config)?;
            cfg.instance_with(cfg.n, b)
        };
        let idx: Vec<usize> = cfg
            .table2
            .x
            .iter()
            .map(|&x| grid_index(x, cfg.params.s0, cfg.m))
            .collect::<Result<_, _>>()
            .map_err(CliError::config)?;
        let mut values = Csv::new(&["sigma_hi", "x", "j_minus", "j_plus"]);
        for &hi in &cfg.table2.sigma_hi {
            let inst = inst_for(hi)?;
            let mut cols: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for bound in cfg.bound.bounds() {
                let slice = self.run_dp(&inst, cfg.m, bound, &format!("table2_hi{hi}"), false)?;
                cols.insert(bound.label(), idx.iter().map(|&l| slice.root_value(l)).collect());
            }
            for (r, x) in cfg.table2.x.iter().enumerate() {
                values.row(vec![
                    num(hi),
                    num(x),
                    opt(cols.get("minus").map(|v| v[r])),
                    opt(cols.get("plus").map(|v| v[r])),
                ]);
            }
        }
        let (exit, note) = self.exit_rows(&inst_for)?;
        println!("{note}");
        self.write(&values, "table2.csv", vec![format!("n={} M={}", cfg.n, cfg.m)])?;
        self.write(&exit, "table2_exit.csv", vec![note])
    }

    /// Control-grid index of the ladder capital, or the grid point below it.
    fn ladder_index(&self, m: usize, x: f64, off_grid: OffGrid) -> Result<(usize, bool), CliError> {
        let s0 = self.cfg.params.s0;
        match grid_index(x, s0, m) {
            Ok(l) => Ok((l, true)),
            Err(e) => match off_grid {
                OffGrid::Error => Err(CliError::config(e)),
                OffGrid::Floor => Ok((((x / s0 * m as f64) + 1e-9).floor() as usize, false)),
            },
        }
    }

    fn ladder_table(&self, which: u8) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let ladder = if which == 3 { &cfg.table3 } else { &cfg.table4 };
        let bounds = cfg.bound.bounds();
        let mut rows: Vec<LadderRow> = Vec::new();
        let mut cache: BTreeMap<(usize, usize, &str), ValueSlice> = BTreeMap::new();
        for &n in &ladder.n {
            let inst = cfg.instance(n)?;
            for &frac in &ladder.m_fractions {
                for m in ladder.m_rounding.apply(n, frac) {
                    let (l, on_grid) = self.ladder_index(m, ladder.x, ladder.off_grid)?;
                    let mut js = BTreeMap::new();
                    for &bound in &bounds {
                        let key = (n, m, bound.label());
                        if let Entry::Vacant(e) = cache.entry(key) {
                            e.insert(self.run_dp(&inst, m, bound, &format!("table{which}"), false)?);
                        }
                        js.insert(bound.label(), cache[&key].root_value(l));
                    }
                    rows.push((n, frac, m, l, on_grid, js));
                }
            }
        }
        let notes = vec![format!("x={}", ladder.x)];
        if which == 3 {
            let mut csv = Csv::new(&["n", "m_fraction", "m", "lambda", "on_grid", "j_minus", "j_plus"]);
            for (n, frac, m, l, on_grid, js) in &rows {
                csv.row(vec![
                    n.to_string(),
                    num(frac),
                    m.to_string(),
                    num(*l as f64 / *m as f64),
                    on_grid.to_string(),
                    opt(js.get("minus")),
                    opt(js.get("plus")),
                ]);
            }
            return self.write(&csv, "table3.csv", notes);
        }
        let mut csv = Csv::new(&[
            "n",
            "m",
            "lambda",
            "on_grid",
            "j_minus",
            "j_plus",
            "rel_change_minus",
            "rel_change_plus",
        ]);
        for (n, frac, m, l, on_grid, js) in &rows {
            // (J(n) - J(n/2)) / |J(n/2)| against the row at half the steps
            let half = rows
                .iter()
                .find(|r| 2 * r.0 == *n && r.1 == *frac && r.2 * 2 <= *m + 1 && r.2 * 2 + 1 >= *m);
            let rel = |b: &str| -> String {
                let prev = half.and_then(|h| h.5.get(b));
                opt(js.get(b).zip(prev).map(|(now, before)| (now - before) / before.abs()))
            };
            csv.row(vec![
                n.to_string(),
                m.to_string(),
                num(*l as f64 / *m as f64),
                on_grid.to_string(),
                opt(js.get("minus")),
                opt(js.get("plus")),
                rel("minus"),
                rel("plus"),
            ]);
        }
        self.write(&csv, "table4.csv", notes)
    }

    fn diagnostics(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let d = &cfg.diagnostics;
        let inst = cfg.instance(cfg.n)?;
        let upsilon = DriftFunctional::constant(d.upsilon);
        let p = kernel_sweep(&inst, &Measure::Physical, cfg.projection)?;
        let q = kernel_sweep(&inst, &Measure::Martingale(upsilon.clone()), cfg.projection)?;
        let q_mart = q_price_martingale(&inst, &upsilon, cfg.projection)?;
        let jump = jump_bound_check(&inst, cfg.projection, d.jump_paths, cfg.mc.seed)?;

        let mut kernels = Csv::new(&[
            "measure",
            "nodes_total",
            "projected_xi",
            "projected_xihat",
            "max_sum_error",
            "max_moment_residual",
            "max_cross_residual",
            "max_martingale_residual",
            "projected_mass",
        ]);
        for (name, r) in [("physical", &p), ("martingale", &q)] {
            kernels.row(kernel_row(name, r));
        }

        let mut failures = Vec::new();
        for (name, r) in [("physical", &p), ("martingale", &q)] {
            if r.max_sum_error > IDENTITY_TOL {
                failures.push(format!("{name} triple sums off by {}", r.max_sum_error));
            }
            if r.max_moment_residual > IDENTITY_TOL {
                failures.push(format!("{name} moment residual {}", r.max_moment_residual));
            }
        }
        if q_mart > IDENTITY_TOL {
            failures.push(format!("price martingale residual {q_mart:?}"));
        }
        if !jump.holds() {
            failures.push(format!("price jump {} above e^a - 1 = {}", jump.realized_max, jump.a_n));
        }

        let ks_cfg = shortfall_core::mc::McConfig { paths: d.ks_paths, ..cfg.mc };
        let sde = simulate_truncated(&cfg.params, &cfg.bounds, &ks_cfg)?;
        let mut conv = Csv::new(&["n", "ks_distance", "density_moment_q2", "moment_ratio", "jump_bound"]);
        let mut prev: Option<f64> = None;
        for &n in &d.n {
            let inst_n = cfg.instance(n)?;
            let pmf = terminal_pmf(&inst_n, &Measure::Physical, cfg.projection)?;
            let ks = ks_distance(&terminal_prices(&inst_n), &pmf, &sde.s_t)?;
            // an infinite moment is a property of the chosen measure, not a broken run
            let dm = match density_moment(&inst_n, &upsilon, 2.0, cfg.projection) {
                Err(shortfall_core::Error::AbsoluteContinuity { .. }) => f64::INFINITY,
                other => other?,
            };
            conv.row(vec![
                n.to_string(),
                num(ks),
                num(dm),
                opt(prev.map(|p| dm / p).filter(|r| r.is_finite())),
                num(inst_n.lattice.exp_up - 1.0),
            ]);
            prev = Some(dm);
        }
        let jump_note = format!(
            "n={}: largest simulated relative price move {:?} <= e^a - 1 = {:?}",
            cfg.n, jump.realized_max, jump.a_n
        );
        self.write(&kernels, "diagnostics_kernels.csv", vec![
            format!("n={}", cfg.n),
            format!("price martingale residual {q_mart:?}"),
            jump_note,
        ])?;
        self.write(&conv, "diagnostics_convergence.csv", vec![format!("sde paths={}", d.ks_paths)])?;
        println!(
            "physical: {} of {} nodes projected, projected mass {:.4}",
            p.nodes_projected(),
            p.nodes_total,
            p.projected_mass
        );
        if failures.is_empty() {
            println!("all kernel identities hold within {IDENTITY_TOL:e}");
            Ok(())
        } else {
            Err(CliError::Invariant(failures.join("; ")))
        }
    }

    fn demos(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let d = &cfg.demos;
        let mut cov = Csv::new(&[
            "n",
            "second_moment",
            "stderr",
            "target",
            "within_3_stderr",
            "terminal_correlation",
        ]);
        for &n in &d.covariation_n {
            let r = kais_covariation(n, 1.0, d.covariation_paths, cfg.mc.seed)?;
            cov.row(vec![
                n.to_string(),
                num(r.second_moment.mean),
                num(r.second_moment.stderr),
                num(r.target),
                r.second_moment.within(r.target, 3.0).to_string(),
                num(r.terminal_correlation),
            ]);
        }
        let mut hw = Csv::new(&[
            "n",
            "mean_terminal",
            "mean_stderr",
            "call_price",
            "call_stderr",
            "gap",
            "ks_vs_sde",
            "enumerated",
        ]);
        let mut failures = Vec::new();
        for &n in &d.hullwhite_n {
            let r = hullwhite_demo(n, &d.hullwhite)?;
            if r.enumerated && (r.mean_terminal.mean - 1.0).abs() > IDENTITY_TOL {
                failures.push(format!("binomial mean {} at n={n}", r.mean_terminal.mean));
            }
            hw.row(vec![
                n.to_string(),
                num(r.mean_terminal.mean),
                num(r.mean_terminal.stderr),
                num(r.call_price.mean),
                num(r.call_price.stderr),
                num(r.gap),
                num(r.ks_vs_sde),
                r.enumerated.to_string(),
            ]);
        }
        let nc = nonconcave_value(d.nonconcave_n)?;
        if nc.value != 1.5 {
            failures.push(format!("non-concave value {} instead of 3/2", nc.value));
        }
        let mut ncsv = Csv::new(&["n", "value", "limit_value", "min_wealth", "replication_error"]);
        ncsv.row(vec![
            nc.n.to_string(),
            num(nc.value),
            num(nc.limit_value),
            num(nc.min_wealth),
            num(nc.replication_error),
        ]);
        self.write(&cov, "demos_covariation.csv", vec![])?;
        self.write(&hw, "demos_hullwhite.csv", vec![format!("strike={}", d.hullwhite.strike)])?;
        self.write(&ncsv, "demos_nonconcave.csv", vec![])?;
        println!(
            "non-concave example: value {} = 3/2 at n={}, limit model value {}",
            nc.value, nc.n, nc.limit_value
        );
        if failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invariant(failures.join("; ")))
        }
    }

    fn mc(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let inst_for = |hi: f64| {
            let b = TruncationBounds::new(cfg.bounds.sigma_lo, hi).map_err(CliError::config)?;
            cfg.instance_with(cfg.n, b)
        };
        let (exit, note) = self.exit_rows(&inst_for)?;
        println!("{note}");
        let truncated = simulate_truncated(&cfg.params, &cfg.bounds, &cfg.mc)?;
        let raw = simulate_raw(&cfg.params, &cfg.mc)?;
        let u = unhedged_from_samples(&cfg.params, &truncated, &cfg.mc, &cfg.x_grid);
        let mut un = Csv::new(&["x", "u_mc", "stderr"]);
        for (x, e) in cfg.x_grid.iter().zip(&u) {
            un.row(vec![num(x), num(e.mean), num(e.stderr)]);
        }
        let p = &cfg.params;
        let cir_mean = p.theta + (p.nu0 - p.theta) * (-p.kappa * p.maturity).exp();
        let checks: [(&str, McEstimate, f64); 3] = [
            ("discounted_price_truncated", discounted_terminal(p, &truncated, &cfg.mc), p.s0),
            ("discounted_price_raw", discounted_terminal(p, &raw, &cfg.mc), p.s0),
            ("raw_variance_mean", McEstimate::from_values(&raw.nu_t, &cfg.mc), cir_mean),
        ];
        let mut ch = Csv::new(&["check", "estimate", "stderr", "target", "within_3_stderr"]);
        for (name, e, target) in checks {
            ch.row(vec![
                name.into(),
                num(e.mean),
                num(e.stderr),
                num(target),
                e.within(target, 3.0).to_string(),
            ]);
        }
        self.write(&exit, "mc_exit.csv", vec![note])?;
        self.write(&un, "mc_unhedged.csv", vec![])?;
        self.write(&ch, "mc_checks.csv", vec![])?;
        if cfg.mc_dump_terminal {
            let path = self.out.join("mc_terminal.csv");
            let f = std::fs::File::create(&path).map_err(|e| CliError::io("mc_terminal.csv", e))?;
            truncated
                .write_csv(std::io::BufWriter::new(f))
                .map_err(|e| CliError::io("mc_terminal.csv", e))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    fn dry_run_report(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let mut plans = Vec::new();
        let push = |n: usize, m: usize, plans: &mut Vec<DpPlan>| {
            for bound in cfg.bound.bounds() {
                plans.push(DpPlan { n, m, bound });
            }
        };
        let mut mc_runs = 0usize;
        match self.verb {
            Verb::Table1 | Verb::Resume => {
                push(cfg.n, cfg.m, &mut plans);
                mc_runs = 1;
            }
            Verb::Table2 => {
                for _ in &cfg.table2.sigma_hi {
                    push(cfg.n, cfg.m, &mut plans);
                }
                mc_runs = 1;
            }
            Verb::Table3 | Verb::Table4 => {
                let ladder = if self.verb == Verb::Table3 { &cfg.table3 } else { &cfg.table4 };
                let mut seen = Vec::new();
                for &n in &ladder.n {
                    for &f in &ladder.m_fractions {
                        for m in ladder.m_rounding.apply(n, f) {
                            if !seen.contains(&(n, m)) {
                                seen.push((n, m));
                                push(n, m, &mut plans);
                            }
                        }
                    }
                }
            }
            Verb::Mc => mc_runs = 3,
            Verb::Diagnostics => mc_runs = 1,
            Verb::Demos => {}
        }
        println!("dry run of {}: nothing is computed", self.verb.name());
        let (mut states, mut ops) = (0u128, 0u128);
        for p in &plans {
            let inst = cfg.instance(p.n)?;
            let c = estimate_cost(&inst, p.m, cfg.precision);
            println!(
                "  grid {} n={} M={}: nodes sum_k (2k+1)^2 = {}, states = {}, ops = {}, peak memory = {} bytes",
                p.bound, p.n, p.m, c.nodes, c.states, c.ops, c.peak_bytes
            );
            states += c.states;
            ops += c.ops;
        }
        if !plans.is_empty() {
            println!("  total: states = {states}, ops = {ops}");
        }
        if mc_runs > 0 {
            let (steps, _) = cfg.mc.grid(cfg.params.maturity);
            println!(
                "  monte carlo: {mc_runs} run(s) of {} paths x {steps} steps",
                cfg.mc.paths
            );
        }
        if self.verb == Verb::Diagnostics {
            let nodes: u128 = cfg
                .diagnostics
                .n
                .iter()
                .chain([&cfg.n])
                .map(|&n| (0..=n as u128).map(|k| (2 * k + 1).pow(2)).sum::<u128>())
                .sum();
            println!("  lattice sweeps over {nodes} nodes");
        }
        Ok(())
    }
}

fn kernel_row(name: &str, r: &KernelReport) -> Vec<String> {
    vec![
        name.into(),
        r.nodes_total.to_string(),
        r.projected_xi.to_string(),
        r.projected_xihat.to_string(),
        num(r.max_sum_error),
        num(r.max_moment_residual),
        opt(r.max_cross_residual),
        opt(r.max_martingale_residual),
        num(r.projected_mass),
    ]
}

/// Which exit event rises with the upper barrier. Only the probability of staying inside
/// the band can increase as the band widens.
pub fn orientation_note(stats: &[ExitStats]) -> String {
    let rising = stats.windows(2).all(|w| w[0].p_no_exit.mean <= w[1].p_no_exit.mean);
    if rising {
        "probabilities that increase with sigma_hi are P(Theta = T) = p_no_exit; \
         P(Theta < T) = p_exit decreases as the band widens"
            .into()
    } else {
        "p_no_exit is not monotone in sigma_hi on this ladder; compare both columns".into()
    }
}
