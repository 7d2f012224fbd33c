use owgame_core::asymptotics::{
    cost_sweep, cost_targets, diagnostics_from_rows, halfgrid_convergence, limit_sweep, oscillation_grid,
    terminal_w_limit, CostTargets,
};
use owgame_core::equilibrium::assemble_profile;
use owgame_core::solve_equilibrium;
use owgame_core::verification::{full_audit, AuditOptions};
use serde_json::{json, Value};

use crate::config::{to_method, RunConfig};
use crate::error::CliError;
use crate::output::{to_value, Body, Cell, Document, Table};

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn solve(cfg: &RunConfig) -> Result<Document, CliError> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let eq = solve_equilibrium(&p, &grid, cfg.solve_method())?;
    let profile = assemble_profile(&p, &eq.vectors);

    let mut columns: Vec<String> = ["k", "t_k", "v_k", "w_k"].iter().map(|s| s.to_string()).collect();
    columns.extend((1..=p.n).map(|i| format!("xi_{i}_k")));
    let mut table = Table::with_columns(columns);
    for (k, &t) in grid.times().iter().enumerate() {
        let mut row: Vec<Cell> = vec![k.into(), t.into(), eq.vectors.v[k].into(), eq.vectors.w[k].into()];
        row.extend((0..p.n).map(|i| Cell::from(profile.row(i)[k])));
        table.push(row);
    }

    let mut metadata = json!({
        "method": eq.method.to_string(),
        "nu_branch": eq.nu_branch,
        "residual_nu": eq.residual_nu,
        "residual_omega": eq.residual_omega,
        "sum_nu": eq.vectors.sum_nu,
        "sum_omega": eq.vectors.sum_omega,
    });
    if let Some(check) = cfg.method_check {
        let other = solve_equilibrium(&p, &grid, to_method(check))?;
        let gap_nu = max_gap(&eq.vectors.nu, &other.vectors.nu);
        let gap_omega = max_gap(&eq.vectors.omega, &other.vectors.omega);
        metadata["method_check"] = json!({
            "method": other.method.to_string(),
            "max_gap_nu": gap_nu,
            "max_gap_omega": gap_omega,
            "max_gap": gap_nu.max(gap_omega),
        });
    }
    Ok(Document {
        metadata,
        body: Body::Table(table),
    })
}

pub fn limits(cfg: &RunConfig) -> Result<Document, CliError> {
    let p = cfg.params()?;
    let rows = limit_sweep(&p, &cfg.t_list, &cfg.n_list, cfg.solve_method())?;
    let mut table = Table::new(&["N", "t", "V", "W", "g", "f", "N_err_V", "N_err_W"]);
    for r in &rows {
        table.push(vec![
            r.steps.into(),
            r.t.into(),
            r.v.into(),
            r.w.into(),
            r.g.into(),
            r.f.into(),
            r.scaled_v_error.into(),
            r.scaled_w_error.into(),
        ]);
    }

    // Rates are reported at interior times only: both profiles jump at the
    // endpoints.
    let all = diagnostics_from_rows(&rows, &cfg.t_list, None);
    let rates: Vec<Value> = all
        .iter()
        .filter(|d| d.t > 0.0 && d.t < p.horizon)
        .map(|d| {
            json!({
                "t": d.t,
                "target": d.target,
                "sup_scaled": d.sup_scaled,
                "first_half_max": d.first_half_max,
                "verdict": d.verdict,
            })
        })
        .collect();
    let limit = terminal_w_limit(&p);
    let terminal: Vec<Value> = rows
        .iter()
        .filter(|r| r.t == p.horizon)
        .map(|r| json!({"N": r.steps, "W_T": r.w, "limit": limit, "N_gap": r.steps as f64 * (r.w - limit).abs()}))
        .collect();
    Ok(Document {
        metadata: json!({"rates": rates, "terminal_w": terminal}),
        body: Body::Table(table),
    })
}

pub fn oscillate(cfg: &RunConfig) -> Result<Document, CliError> {
    let p = cfg.params()?;
    let scans = oscillation_grid(&p, &cfg.t_list, &cfg.n_list)?;
    let mut table = Table::new(&[
        "N",
        "t",
        "n_t",
        "class",
        "V",
        "W",
        "beta_plus",
        "beta_minus",
        "gamma_plus",
        "gamma_minus",
        "phi_plus",
        "phi_minus",
        "psi_plus",
        "psi_minus",
        "V_target",
        "W_target",
        "V_nearest",
        "W_nearest",
    ]);
    for (j, &steps) in cfg.n_list.iter().enumerate() {
        for scan in &scans {
            let s = &scan.samples[j];
            let c = &scan.clusters;
            table.push(vec![
                steps.into(),
                scan.t.into(),
                s.index.into(),
                s.class.label().into(),
                s.v.into(),
                s.w.into(),
                c.beta_plus.into(),
                c.beta_minus.into(),
                c.gamma_plus.into(),
                c.gamma_minus.into(),
                c.phi_plus.into(),
                c.phi_minus.into(),
                c.psi_plus.into(),
                c.psi_minus.into(),
                s.v_target.into(),
                s.w_target.into(),
                s.v_nearest.into(),
                s.w_nearest.into(),
            ]);
        }
    }
    let classes: Vec<Value> = scans
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "classes": s.classes.iter().map(|c| json!({
                    "class": c.class.label(),
                    "count": c.count,
                    "last_N": c.last_steps,
                    "V_residual": c.v_residual,
                    "W_residual": c.w_residual,
                    "V_nearest": c.v_nearest,
                    "W_nearest": c.w_nearest,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Document {
        metadata: json!({"classes": classes}),
        body: Body::Table(table),
    })
}

pub fn costs(cfg: &RunConfig) -> Result<Document, CliError> {
    let p = cfg.params()?;
    let rows = cost_sweep(&p, &cfg.n_list, cfg.c, cfg.solve_method())?;
    let targets = cost_targets(&p)?;
    let base = ["N", "agent", "split_index", "total", "impact", "inst_front", "inst_back"];
    let table = match &targets {
        CostTargets::Continuous { agents } => {
            let mut cols = base.to_vec();
            cols.extend(["limit_impact", "limit_block_initial", "limit_block_terminal", "limit_total"]);
            let mut t = Table::new(&cols);
            for r in &rows {
                for (i, (c, l)) in r.agents.iter().zip(agents).enumerate() {
                    t.push(vec![
                        r.steps.into(),
                        (i + 1).into(),
                        c.split_index.into(),
                        c.total.into(),
                        c.impact.into(),
                        c.inst_front.into(),
                        c.inst_back.into(),
                        l.impact.into(),
                        l.block_initial.into(),
                        l.block_terminal.into(),
                        l.total.into(),
                    ]);
                }
            }
            t
        }
        CostTargets::ThetaZero { agents } => {
            let mut cols = base.to_vec();
            cols.extend(["parity", "limit_even", "limit_odd", "limit_parity"]);
            let mut t = Table::new(&cols);
            for r in &rows {
                let even = r.steps % 2 == 0;
                for (i, (c, l)) in r.agents.iter().zip(agents).enumerate() {
                    t.push(vec![
                        r.steps.into(),
                        (i + 1).into(),
                        c.split_index.into(),
                        c.total.into(),
                        c.impact.into(),
                        c.inst_front.into(),
                        c.inst_back.into(),
                        (if even { "even" } else { "odd" }).into(),
                        l.even_limit.into(),
                        l.odd_limit.into(),
                        (if even { l.even_limit } else { l.odd_limit }).into(),
                    ]);
                }
            }
            t
        }
    };
    Ok(Document {
        metadata: json!({"targets": to_value(&targets)?}),
        body: Body::Table(table),
    })
}

pub fn halfgrid(cfg: &RunConfig) -> Result<Document, CliError> {
    let p = cfg.params()?;
    let report = halfgrid_convergence(&p, &cfg.n_list, cfg.halfgrid_mode(), &cfg.t_list)?;
    let mut table = Table::new(&[
        "N",
        "sup_inventory",
        "sup_V_first_half",
        "sup_V_second_half",
        "sup_W_first_half",
        "sup_W_second_half",
    ]);
    for r in &report.rows {
        table.push(vec![
            r.steps.into(),
            r.sup_inventory.into(),
            r.sup_v_first.into(),
            r.sup_v_second.into(),
            r.sup_w_first.into(),
            r.sup_w_second.into(),
        ]);
    }
    Ok(Document {
        metadata: json!({
            "mode": report.mode.to_string(),
            "mesh_points": report.mesh_points,
            "inventory_decreasing": report.inventory_decreasing,
        }),
        body: Body::Table(table),
    })
}

/// Returns the document and the pass flag.
pub fn audit(cfg: &RunConfig) -> Result<(Document, bool), CliError> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let opts = AuditOptions {
        trials: cfg.trials,
        seed: cfg.seed,
        corrupt: cfg.corrupt,
        cross_check: true,
    };
    let report = full_audit(&p, &grid, &opts)?;
    let pass = report.pass;
    Ok((
        Document {
            metadata: json!({"pass": pass}),
            body: Body::Report(to_value(&report)?),
        },
        pass,
    ))
}
