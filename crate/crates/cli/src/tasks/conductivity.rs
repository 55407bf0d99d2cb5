use edgescatter::registry::Named;
use edgescatter::{conductivity, SwitchProfile};

use super::{to_csv, to_json, Context, Outcome, Task};
use crate::config::Format;
use crate::error::CliError;

pub struct Conductivity;

impl Named for Conductivity {
    fn name(&self) -> &'static str {
        "conductivity"
    }
}

impl Task for Conductivity {
    fn default_format(&self) -> Format {
        Format::Json
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let [lo, hi] = ctx.window()?;
        let window = SwitchProfile::energy_window(lo, hi);
        let rep = conductivity(&ctx.basis, &ctx.potential, &window, ctx.config.n_nodes, &ctx.params)?;
        log::info!("2 pi sigma_I = {} over [{lo}, {hi}]", rep.integrated);
        if rep.flagged {
            log::warn!("some energy nodes were shifted or lie near a threshold");
        }
        let body = match ctx.format {
            Format::Json => to_json(&rep)?,
            Format::Csv => to_csv(&rep.nodes)?,
        };
        Ok(Outcome::ok(body))
    }
}
