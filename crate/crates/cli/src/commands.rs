//! CSV producers for each subcommand.

use std::fmt::Write;

use semiclassical::exprjet::Expr;
use semiclassical::oracle::oracle_spectrum;
use semiclassical::quantize::{bs_solve_with, convergence_fit, gram_det_with, gram_scan_with, SpectrumTable};
use semiclassical::symbol::{validate_well, EnergyWindow, HamiltonianSymbol};
use semiclassical::wronlab::{
    chi_independence_check, default_cutoff, flux_norm_check, gram_numeric_with, wkb_grid, wronskian_identity,
    Basepoint, CutoffSpec,
};
use semiclassical::Error;

use crate::config::RunConfig;
use crate::CliError;

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && m.is_finite() && !(1e-4..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn first_hbar(cfg: &RunConfig) -> f64 {
    cfg.problem.hbar.values()[0]
}

/// Symbol and window after the single-well checks; warnings go to stderr.
fn prepared(cfg: &RunConfig) -> Result<(HamiltonianSymbol, EnergyWindow), CliError> {
    let s = cfg.symbol()?;
    let w = cfg.window()?;
    let report = validate_well(&s, &w)?;
    for warning in &report.warnings {
        eprintln!("bsq: warning: {warning}");
    }
    Ok((s, w))
}

/// `V + h p1 + h^2 p2` when the symbol is of Schrödinger type with
/// `x`-only corrections.
fn effective_potential(s: &HamiltonianSymbol, h: f64) -> Option<Expr> {
    let v = s.potential()?;
    if !(s.p1().is_xi_free() && s.p2().is_xi_free()) {
        return None;
    }
    let scaled = |c: f64, e: &Expr| Expr::Mul(Box::new(Expr::Num(c)), Box::new(e.clone()));
    let mut out = v.clone();
    if !s.p1().is_zero() {
        out = Expr::Add(Box::new(out), Box::new(scaled(h, s.p1())));
    }
    if !s.p2().is_zero() {
        out = Expr::Add(Box::new(out), Box::new(scaled(h * h, s.p2())));
    }
    Some(out)
}

fn table_with_oracle(
    cfg: &RunConfig,
    s: &HamiltonianSymbol,
    w: &EnergyWindow,
    h: f64,
    order: u8,
) -> Result<(SpectrumTable, bool), CliError> {
    let mut table = bs_solve_with(s, h, w, order, &cfg.quantize_options())?;
    let with_oracle = match effective_potential(s, h) {
        Some(v) => {
            let levels = oracle_spectrum(&v, h, w, &cfg.oracle_config())?;
            table.attach_oracle(&levels);
            true
        }
        None => false,
    };
    if table.non_monotone {
        eprintln!("bsq: warning: quantization function not monotone on the window; roots from a dense scan");
    }
    if table.derivative_warning {
        eprintln!("bsq: warning: energy-derivative estimates failed their consistency check");
    }
    Ok((table, with_oracle))
}

pub fn spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let (s, w) = prepared(cfg)?;
    let h = first_hbar(cfg);
    let (table, with_oracle) = table_with_oracle(cfg, &s, &w, h, cfg.solver.order)?;
    let mut out = String::from("n,E_bs0,E_bs1,E_bs2");
    if with_oracle {
        out.push_str(",E_oracle,err0,err2");
    }
    out.push('\n');
    for r in &table.rows {
        let _ = write!(
            out,
            "{},{},{},{}",
            r.n,
            cell(r.e_order0),
            cell(r.e_order1),
            cell(r.e_order2)
        );
        if with_oracle {
            let _ = write!(out, ",{},{},{}", cell(r.e_oracle), cell(r.err0), cell(r.err2));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn gram_scan(cfg: &RunConfig) -> Result<String, CliError> {
    let (s, w) = prepared(cfg)?;
    let h = first_hbar(cfg);
    let order = cfg.solver.order;
    let opts = cfg.quantize_options();
    let scan = gram_scan_with(&s, &w, h, cfg.solver.gram_steps, order, &opts)?;
    let eta = Some(opts.eta.unwrap_or(1e-3 * (w.e_max - w.e_min)));
    let mut rows: Vec<(f64, f64, u8)> = scan.evals.iter().map(|g| (g.energy, g.det, 0)).collect();
    for &z in &scan.zeros {
        rows.push((z, gram_det_with(&s, z, h, order, &opts, eta)?.det, 1));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut out = String::from("E,det,zero_flag\n");
    for (e, d, flag) in rows {
        let _ = writeln!(out, "{},{},{flag}", num(e), num(d));
    }
    Ok(out)
}

pub fn oracle(cfg: &RunConfig) -> Result<String, CliError> {
    let (s, w) = prepared(cfg)?;
    let h = first_hbar(cfg);
    let v = effective_potential(&s, h).ok_or(Error::NotSchrodinger)?;
    let levels = oracle_spectrum(&v, h, &w, &cfg.oracle_config())?;
    let mut out = String::from("n,E\n");
    for (n, e) in levels {
        let _ = writeln!(out, "{n},{}", num(e));
    }
    Ok(out)
}

pub fn convergence(cfg: &RunConfig) -> Result<String, CliError> {
    let (s, w) = prepared(cfg)?;
    let hs = cfg.problem.hbar.values();
    if hs.len() < 3 {
        return Err(CliError::Config("convergence needs at least three hbar values".into()));
    }
    if effective_potential(&s, hs[0]).is_none() {
        return Err(Error::NotSchrodinger.into());
    }
    let mut out = String::from("h,max_err_order0,max_err_order2\n");
    let (mut e0, mut e2) = (Vec::new(), Vec::new());
    for &h in &hs {
        let (table, _) = table_with_oracle(cfg, &s, &w, h, 2)?;
        let worst = |pick: fn(&semiclassical::quantize::SpectrumRow) -> Option<f64>| {
            table
                .rows
                .iter()
                .filter_map(pick)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        };
        let (m0, m2) = (worst(|r| r.err0), worst(|r| r.err2));
        let _ = writeln!(out, "{},{},{}", num(h), cell(m0), cell(m2));
        if let (Some(a), Some(b)) = (m0, m2) {
            e0.push((h, a));
            e2.push((h, b));
        }
    }
    let slope = |pts: &[(f64, f64)]| {
        convergence_fit(pts)
            .map(|f| num(f.slope))
            .unwrap_or_else(|_| "nan".into())
    };
    let _ = writeln!(out, "# slope_order0={},slope_order2={}", slope(&e0), slope(&e2));
    Ok(out)
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
}

pub fn wronskian_check(cfg: &RunConfig) -> Result<String, CliError> {
    let (s, w) = prepared(cfg)?;
    let v = s.potential().ok_or(Error::NotSchrodinger)?.clone();
    let h = first_hbar(cfg);
    let e = cfg.wronlab.energy.unwrap_or(0.5 * (w.e_min + w.e_max));
    let opts = cfg.wron_options();
    let grid = wkb_grid(&s, e, h, opts.points_per_oscillation)?;
    let chi_a = default_cutoff(&grid, Basepoint::Right, opts.cutoff_radii)?;
    let chi_b = default_cutoff(&grid, Basepoint::Left, opts.cutoff_radii)?;
    let chi_alt = CutoffSpec::new(chi_a.center, 0.8 * chi_a.r1, chi_a.r1 + 1.1 * (chi_a.r2 - chi_a.r1))?;

    let identity = wronskian_identity(&v, e, h, &grid, &chi_a)?;
    let right = flux_norm_check(&s, e, h, Basepoint::Right, &chi_a, &opts)?;
    let left = flux_norm_check(&s, e, h, Basepoint::Left, &chi_b, &opts)?;
    let chi = chi_independence_check(&s, e, h, Basepoint::Right, &chi_a, &chi_alt, &opts)?;
    let gram = gram_numeric_with(&s, e, h, opts.order, &grid, &chi_a, &chi_b)?;

    let checks = [
        Check {
            name: "commutator_identity",
            value: identity.residual,
            bound: 1e-8,
        },
        Check {
            name: "commutator_cross_check",
            value: right.commutator_ratio.max(left.commutator_ratio),
            bound: 1.0,
        },
        Check {
            name: "flux_w_right",
            value: right.w_error,
            bound: 0.1,
        },
        Check {
            name: "flux_w_left",
            value: left.w_error,
            bound: 0.1,
        },
        Check {
            name: "mixed_term",
            value: right.mixed_plus.max(right.mixed_minus) / right.norm_sq,
            bound: 1e-4,
        },
        Check {
            name: "chi_independence",
            value: chi.difference,
            bound: chi.bound,
        },
        Check {
            name: "sum_identity",
            value: chi.sum_identity / chi.norm_sq,
            bound: 1e-4,
        },
        Check {
            name: "gram_det",
            value: (gram.det - gram.analytic_det).norm(),
            bound: 0.05,
        },
        Check {
            name: "gram_off_diagonal",
            value: (gram.matrix[1][0] - gram.analytic_off_diagonal).norm(),
            bound: 0.05,
        },
    ];
    let mut out = String::from("check,value,bound,pass\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.name,
            num(c.value),
            num(c.bound),
            c.value <= c.bound
        );
    }
    Ok(out)
}
