//! `xresponse fit`: power-law fit of sign correlators. Emits one JSON per
//! convention and a one-row CSV with both conventions' parameter columns
//! side by side.

use std::collections::BTreeSet;

use anyhow::anyhow;
use serde::Serialize;
use xresponse_core::aggregate::{correlator_average, Direction};
use xresponse_core::fit::{fit_points, Chi2Norm, FitOptions, MemoryClass, PowerLawFit};
use xresponse_core::response::SeriesKind;
use xresponse_core::types::Symbol;
use xresponse_core::ZeroConvention;

use crate::artifacts::{load_store, write_json, write_text};
use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(clap::Args)]
pub struct FitArgs {
    /// Fit the pairwise correlator of this ordered pair `I:J`.
    #[arg(long, conflicts_with_all = ["anchor", "direction"])]
    pub pair: Option<String>,
    /// Fit the averaged correlator of this anchor...
    #[arg(long, requires = "direction")]
    pub anchor: Option<String>,
    /// ...in this direction.
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Inclusive lag range `lo:hi` to fit over.
    #[arg(long)]
    pub fit_range: Option<String>,
    /// Fit-error normalization.
    #[arg(long, default_value = "mean")]
    pub chi2: Chi2Norm,
}

#[derive(Serialize)]
struct FitDoc {
    label: String,
    convention: ZeroConvention,
    theta: f64,
    tau0: f64,
    gamma: f64,
    chi2: f64,
    converged: bool,
    degenerate: bool,
    n_points: usize,
    memory_class: MemoryClass,
}

fn parse_range(expr: &Option<String>) -> Result<Option<(u32, u32)>, Failure> {
    let Some(expr) = expr else { return Ok(None) };
    let (lo, hi) = expr
        .split_once(':')
        .ok_or_else(|| Failure::parse(anyhow!("--fit-range must be lo:hi")))?;
    let lo: u32 = lo.parse().map_err(|_| Failure::parse(anyhow!("bad range {expr:?}")))?;
    let hi: u32 = hi.parse().map_err(|_| Failure::parse(anyhow!("bad range {expr:?}")))?;
    if lo > hi {
        return Err(Failure::parse(anyhow!("empty range {expr:?}")));
    }
    Ok(Some((lo, hi)))
}

pub fn run(config: &RunConfig, args: FitArgs) -> Result<(), Failure> {
    let store = load_store(&config.output_dir).map_err(Failure::missing_input)?;
    if store.is_empty() {
        return Err(Failure::missing_input(anyhow!(
            "no series found under {}; run `xresponse response` first",
            config.output_dir.display()
        )));
    }
    let range = parse_range(&args.fit_range)?;
    let options = FitOptions { chi2_norm: args.chi2, ..FitOptions::default() };

    // Collect (tau, value) inputs per convention plus a label.
    let mut inputs: Vec<(ZeroConvention, Vec<(f64, f64)>)> = Vec::new();
    let label;
    if let Some(pair) = &args.pair {
        let (i, j) = pair
            .split_once(':')
            .ok_or_else(|| Failure::parse(anyhow!("--pair must be I:J")))?;
        let i = Symbol::new(i).map_err(Failure::parse)?;
        let j = Symbol::new(j).map_err(Failure::parse)?;
        label = format!("{i}_{j}");
        for convention in config.convention.conventions() {
            let series = store
                .get(SeriesKind::SignCorrelator, convention, &i, &j)
                .ok_or_else(|| {
                    Failure::missing_input(anyhow!(
                        "no {} correlator for ({i}, {j})",
                        convention.token()
                    ))
                })?;
            let pts = series
                .points
                .iter()
                .map(|p| (p.tau as f64, p.value))
                .collect();
            inputs.push((convention, pts));
        }
    } else if let (Some(anchor), Some(direction)) = (&args.anchor, args.direction) {
        let anchor = Symbol::new(anchor.as_str()).map_err(Failure::parse)?;
        label = format!("{direction}_{anchor}");
        let partners: BTreeSet<Symbol> = store.symbols();
        for convention in config.convention.conventions() {
            let avg = correlator_average(direction, &anchor, &partners, convention, &store)
                .map_err(Failure::missing_input)?;
            let pts = avg.points.iter().map(|p| (p.tau as f64, p.value)).collect();
            inputs.push((convention, pts));
        }
    } else {
        return Err(Failure::parse(anyhow!(
            "pass either --pair I:J or --anchor S --direction d"
        )));
    }

    let mut fits: Vec<(ZeroConvention, PowerLawFit<f64>)> = Vec::new();
    for (convention, pts) in inputs {
        let pts: Vec<(f64, f64)> = match range {
            Some((lo, hi)) => pts
                .into_iter()
                .filter(|&(t, _)| t >= lo as f64 && t <= hi as f64)
                .collect(),
            None => pts,
        };
        let fit = fit_points(&pts, &options).map_err(|e| Failure::degenerate(anyhow!(e)))?;
        let doc = FitDoc {
            label: label.clone(),
            convention,
            theta: fit.theta,
            tau0: fit.tau0,
            gamma: fit.gamma,
            chi2: fit.chi2,
            converged: fit.converged,
            degenerate: fit.degenerate,
            n_points: fit.n_points,
            memory_class: fit.memory_class(),
        };
        write_json(
            &config
                .output_dir
                .join(format!("fit_{label}_{}.json", convention.token())),
            config,
            &doc,
        )?;
        println!(
            "fit {label} {}: theta={} tau0={} gamma={} chi2={} converged={} class={}",
            convention.token(),
            fit.theta,
            fit.tau0,
            fit.gamma,
            fit.chi2,
            fit.converged,
            fit.memory_class()
        );
        fits.push((convention, fit));
    }

    // Table-style CSV row: inc-0 and exc-0 parameter columns side by side.
    let mut csv = String::new();
    csv.push_str(&format!("# {}\n", config.provenance()));
    csv.push_str(
        "label,theta_inc0,theta_exc0,tau0_inc0,tau0_exc0,gamma_inc0,gamma_exc0,chi2_inc0,chi2_exc0,class_inc0,class_exc0\n",
    );
    let by_conv = |c: ZeroConvention| fits.iter().find(|(fc, _)| *fc == c).map(|(_, f)| f);
    let fmt_num = |f: Option<&PowerLawFit<f64>>, get: fn(&PowerLawFit<f64>) -> f64| {
        f.map_or(String::new(), |f| get(f).to_string())
    };
    let fmt_class = |f: Option<&PowerLawFit<f64>>| {
        f.map_or(String::new(), |f| f.memory_class().to_string())
    };
    let inc = by_conv(ZeroConvention::IncludeZeros);
    let exc = by_conv(ZeroConvention::ExcludeZeros);
    csv.push_str(&format!(
        "{label},{},{},{},{},{},{},{},{},{},{}\n",
        fmt_num(inc, |f| f.theta),
        fmt_num(exc, |f| f.theta),
        fmt_num(inc, |f| f.tau0),
        fmt_num(exc, |f| f.tau0),
        fmt_num(inc, |f| f.gamma),
        fmt_num(exc, |f| f.gamma),
        fmt_num(inc, |f| f.chi2),
        fmt_num(exc, |f| f.chi2),
        fmt_class(inc),
        fmt_class(exc),
    ));
    write_text(
        &config.output_dir.join(format!("fit_{label}.csv")),
        csv.as_bytes(),
    )?;
    Ok(())
}
