use edgescatter::registry::Named;
use edgescatter::scattering::{scatter, ChannelSummary};
use edgescatter::C64;
use nalgebra::DMatrix;
use serde::Serialize;

use super::{to_csv, to_json, Context, Outcome, Task};
use crate::config::Format;
use crate::error::CliError;

pub struct Scatter;

const ORDERING: &str = "channels lists the n_plus channels with J > 0 first, then the n_minus channels with J < 0; \
matrix rows index the incident channel and columns the outgoing one; S = [[t_plus, r_minus], [r_plus, t_minus]]; \
complex entries are [re, im]";

type Entries = Vec<Vec<[f64; 2]>>;

pub(crate) fn entries(m: &DMatrix<C64>) -> Entries {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

#[derive(Serialize)]
struct Report<'a> {
    energy: f64,
    method: &'a str,
    ordering: &'a str,
    n_plus: usize,
    n_minus: usize,
    channels: &'a [ChannelSummary],
    t_plus: Entries,
    r_minus: Entries,
    r_plus: Entries,
    t_minus: Entries,
    unitarity_defect: f64,
    defect_bound: f64,
    passed: bool,
    trace_difference: f64,
    max_residual: f64,
    max_match_defect: f64,
    max_boundary_defect: f64,
}

#[derive(Serialize)]
struct Row {
    block: &'static str,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

impl Named for Scatter {
    fn name(&self) -> &'static str {
        "scatter"
    }
}

impl Task for Scatter {
    fn default_format(&self) -> Format {
        Format::Json
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let s = scatter(&ctx.basis, &ctx.potential, ctx.energy()?, &ctx.params, &ctx.config.method)?;
        let bound = ctx.config.defect_bound;
        let passed = s.unitarity_defect < bound;
        if !passed {
            log::error!("unitarity defect {:e} exceeds bound {:e}", s.unitarity_defect, bound);
        }
        let body = match ctx.format {
            Format::Json => to_json(&Report {
                energy: s.energy,
                method: s.method,
                ordering: ORDERING,
                n_plus: s.n_plus,
                n_minus: s.n_minus,
                channels: &s.channels,
                t_plus: entries(&s.t_plus),
                r_minus: entries(&s.r_minus),
                r_plus: entries(&s.r_plus),
                t_minus: entries(&s.t_minus),
                unitarity_defect: s.unitarity_defect,
                defect_bound: bound,
                passed,
                trace_difference: s.trace_difference(),
                max_residual: s.max_residual,
                max_match_defect: s.max_match_defect,
                max_boundary_defect: s.max_boundary_defect,
            })?,
            Format::Csv => {
                let blocks = [("t_plus", &s.t_plus), ("r_minus", &s.r_minus), ("r_plus", &s.r_plus), ("t_minus", &s.t_minus)];
                to_csv(blocks.into_iter().flat_map(|(name, m)| {
                    (0..m.nrows()).flat_map(move |i| {
                        (0..m.ncols()).map(move |j| Row {
                            block: name,
                            row: i,
                            col: j,
                            re: m[(i, j)].re,
                            im: m[(i, j)].im,
                        })
                    })
                }))?
            }
        };
        Ok(Outcome { body, passed })
    }
}
