use edgescatter::critical_set;
use edgescatter::registry::Named;
use serde::Serialize;

use super::{to_csv, to_json, Context, Outcome, Task};
use crate::config::Format;
use crate::error::CliError;

pub struct Spectrum;

/// One sample of a branch `E_j(xi)`; `branch` is 0 for the zero mode and
/// `+-n` for the two branches of level `n`. Critical values appear as rows of
/// kind `critical` at `xi = 0`.
#[derive(Debug, Serialize)]
struct Row {
    kind: &'static str,
    branch: i64,
    xi: f64,
    energy: f64,
}

#[derive(Serialize)]
struct Table {
    e_max: f64,
    critical: Vec<f64>,
    rows: Vec<Row>,
}

impl Named for Spectrum {
    fn name(&self) -> &'static str {
        "spectrum"
    }
}

impl Task for Spectrum {
    fn default_format(&self) -> Format {
        Format::Csv
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let e_max = ctx.config.e_max;
        let k = ctx.config.xi_points;
        let xs: Vec<f64> = (0..k).map(|i| -e_max + 2.0 * e_max * i as f64 / (k - 1) as f64).collect();
        let mut rows = Vec::new();
        for &xi in &xs {
            if xi.abs() <= e_max {
                rows.push(Row {
                    kind: "branch",
                    branch: 0,
                    xi,
                    energy: -xi,
                });
            }
        }
        for (n, &rho) in ctx.basis.rho.iter().enumerate().skip(1) {
            if rho > e_max * e_max {
                break;
            }
            for sign in [1i64, -1] {
                for &xi in &xs {
                    let e = (xi * xi + rho).sqrt();
                    if e <= e_max {
                        rows.push(Row {
                            kind: "branch",
                            branch: sign * n as i64,
                            xi,
                            energy: sign as f64 * e,
                        });
                    }
                }
            }
        }
        let critical = critical_set(&ctx.basis, e_max);
        log::info!("{} branch samples, {} critical values", rows.len(), critical.len());
        let body = match ctx.format {
            Format::Json => to_json(&Table { e_max, critical, rows })?,
            Format::Csv => {
                let crit = critical.iter().map(|&z| Row {
                    kind: "critical",
                    branch: 0,
                    xi: 0.0,
                    energy: z,
                });
                to_csv(rows.into_iter().chain(crit))?
            }
        };
        Ok(Outcome::ok(body))
    }
}
