use edgescatter::registry::Named;
use edgescatter::{channels_at, ChannelKind};
use serde::Serialize;

use super::{to_csv, to_json, Context, Outcome, Task};
use crate::config::Format;
use crate::error::CliError;

pub struct Channels;

#[derive(Serialize)]
struct Row {
    level: usize,
    branch_sign: i8,
    kind: &'static str,
    xi_re: f64,
    xi_im: f64,
    current: f64,
}

impl Named for Channels {
    fn name(&self) -> &'static str {
        "channels"
    }
}

impl Task for Channels {
    fn default_format(&self) -> Format {
        Format::Json
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let set = channels_at(&ctx.basis, ctx.energy()?, ctx.params.n_evanescent, ctx.params.guard)?;
        let body = match ctx.format {
            Format::Json => to_json(&set)?,
            Format::Csv => to_csv(set.propagating.iter().chain(&set.evanescent).map(|c| Row {
                level: c.level,
                branch_sign: c.branch_sign,
                kind: match c.kind {
                    ChannelKind::Propagating => "propagating",
                    ChannelKind::Evanescent => "evanescent",
                },
                xi_re: c.xi.re,
                xi_im: c.xi.im,
                current: c.current,
            }))?,
        };
        Ok(Outcome::ok(body))
    }
}
