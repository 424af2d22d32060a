use std::fs::File;
use std::io::{self, BufWriter, Write};

use log::warn;
use serde_json::json;
use shaping_filter::error_analysis::error_table_with;
use shaping_filter::io::{self as out, Metadata};
use shaping_filter::operators::{differentiation_matrix, integration_matrix};
use shaping_filter::simulation::{generate_ensemble, run_ensemble, uniform_grid};
use shaping_filter::state_space::{default_interpolation_points, RealizationReport};
use shaping_filter::{
    companion_realization, compose_rational, exact_projection, interpolation_realization, whitening_operator,
    ExecutionMode, GaussianSource, ModalImpulseResponse, SampleTrajectory, SpectralSampler,
};

use crate::config::{Format, OperatorKind, RunConfig, SimMethod};
use crate::CliError;

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(cfg: &RunConfig, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = sink(cfg)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Io(e.to_string()))
}

fn metadata(cfg: &RunConfig) -> Metadata {
    Metadata::versioned().with("tf", cfg.source_label()).with("T", cfg.horizon)
}

pub fn synthesize(cfg: &RunConfig) -> Result<(), CliError> {
    let tf = cfg.transfer_function()?;
    let pz = tf.poles_zeros();
    let companion = companion_realization(&tf);
    let interp = interpolation_realization(&tf, &default_interpolation_points(&tf))?;
    let fractions = tf.partial_fractions()?;
    let kernel = ModalImpulseResponse::from_fractions(&fractions);
    let poles: Vec<_> = pz
        .poles
        .iter()
        .map(|p| json!({"re": p.value.re, "im": p.value.im, "multiplicity": p.multiplicity}))
        .collect();
    let zeros: Vec<_> = pz.zeros.iter().map(|z| json!({"re": z.re, "im": z.im})).collect();
    let report = json!({
        "metadata": metadata(cfg).to_json(),
        "tf": tf,
        "order": tf.order(),
        "stable": pz.stable,
        "gain": pz.gain,
        "poles": poles,
        "zeros": zeros,
        "realization": RealizationReport::from(&companion),
        "interpolation_b": interp.b().iter().copied().collect::<Vec<_>>(),
        "partial_fractions": fractions.terms,
        "impulse_response": kernel.terms,
        "kernel_norm_sq": kernel.kernel_norm_squared(cfg.horizon)?,
    });
    write_json(cfg, &report)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let tf = cfg.transfer_function()?;
    let stable = tf.poles_zeros().stable;
    let mut meta = metadata(cfg)
        .with("method", format!("{:?}", cfg.method).to_lowercase())
        .with("seed", cfg.seed)
        .with("n", cfg.count)
        .with("grid", cfg.grid);
    if !stable {
        warn!("transfer function has poles outside the open left half-plane");
        meta.push("warning", "unstable transfer function");
    }

    let intervals = cfg.grid - 1;
    let steps = cfg.steps.unwrap_or(intervals);
    if !steps.is_multiple_of(intervals) {
        return Err(CliError::Config(format!("steps ({steps}) must be a multiple of grid - 1 ({intervals})")));
    }
    let stride = steps / intervals;
    let mode = ExecutionMode::default();

    type Sampler = Box<dyn Fn(&mut GaussianSource) -> shaping_filter::Result<SampleTrajectory> + Sync + Send>;
    let sampler: Sampler = match cfg.method {
        SimMethod::Spectral => {
            let order = cfg.order()?;
            meta.push("L", order);
            meta.push("composition", format!("{:?}", cfg.composition).to_lowercase());
            let w = match cfg.operator {
                Some(OperatorKind::Exact) => exact_projection(&tf, cfg.horizon, order)?,
                None | Some(OperatorKind::Rational) => compose_rational(&tf, cfg.horizon, order, cfg.composition)?,
                Some(other) => {
                    return Err(CliError::Config(format!("operator {other:?} cannot drive a simulation")));
                }
            };
            let s = SpectralSampler::on_grid(&w, uniform_grid(cfg.horizon, cfg.grid))?;
            Box::new(move |src| Ok(s.sample(src)))
        }
        SimMethod::Sde => {
            meta.push("steps", steps);
            let ss = companion_realization(&tf);
            let horizon = cfg.horizon;
            Box::new(move |src| ss.euler_maruyama_strided(horizon, steps, stride, src))
        }
        SimMethod::Ito => {
            meta.push("steps", steps);
            let k = ModalImpulseResponse::from_fractions(&tf.partial_fractions()?);
            let horizon = cfg.horizon;
            Box::new(move |src| k.ito_sum_strided(horizon, steps, stride, src))
        }
    };

    if cfg.format != Format::Csv {
        return Err(CliError::Config("simulate writes CSV only".into()));
    }
    let w = sink(cfg)?;
    if cfg.stats {
        let stats = run_ensemble(mode, cfg.seed, cfg.count, |s| sampler(s))?;
        out::write_stats(w, &stats, &meta)?;
    } else if cfg.count == 1 {
        let tr = sampler(&mut GaussianSource::new(cfg.seed, 0))?;
        out::write_trajectory(w, &tr, &meta)?;
    } else {
        let trajs = generate_ensemble(mode, cfg.seed, cfg.count, |s| sampler(s))?;
        out::write_trajectories_wide(w, &trajs, &meta)?;
    }
    Ok(())
}

pub fn error_table(cfg: &RunConfig) -> Result<(), CliError> {
    let tf = cfg.transfer_function()?;
    let orders = cfg.table_orders()?;
    let reports = error_table_with(&tf, cfg.horizon, &orders, cfg.composition, ExecutionMode::default())?;
    let meta = metadata(cfg).with("composition", format!("{:?}", cfg.composition).to_lowercase());
    match cfg.format {
        Format::Csv => out::write_error_table(sink(cfg)?, &reports, &meta)?,
        Format::Json => write_json(cfg, &json!({"metadata": meta.to_json(), "reports": reports}))?,
        Format::Markdown => {
            let mut w = sink(cfg)?;
            let text = out::error_table_markdown(&[(cfg.source_label(), reports)]);
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

pub fn operator(cfg: &RunConfig) -> Result<(), CliError> {
    let kind = cfg.operator.unwrap_or(OperatorKind::Rational);
    let order = cfg.order()?;
    let t = cfg.horizon;
    let mut tf = None;
    let op = match kind {
        OperatorKind::Derivative => differentiation_matrix(t, order)?,
        OperatorKind::Integral => integration_matrix(t, order)?,
        kind => {
            let h = cfg.transfer_function()?;
            let op = match kind {
                OperatorKind::Exact => exact_projection(&h, t, order)?,
                OperatorKind::Rational => compose_rational(&h, t, order, cfg.composition)?,
                _ => whitening_operator(&compose_rational(&h, t, order, cfg.composition)?)?,
            };
            tf = Some(h);
            op
        }
    };
    let kind_name = match kind {
        OperatorKind::Exact => "exact",
        OperatorKind::Rational => "rational",
        OperatorKind::Derivative => "P",
        OperatorKind::Integral => "Pinv",
        OperatorKind::Whiten => "whiten",
    };
    let mut meta = Metadata::versioned().with("operator", kind_name);
    if tf.is_some() {
        meta.push("tf", cfg.source_label());
    }
    meta.push("T", t);
    meta.push("L", order);
    meta.push("provenance", op.provenance().as_str());
    match cfg.format {
        Format::Json => write_json(cfg, &out::operator_json(&op, tf.as_ref(), &meta)),
        Format::Csv if cfg.dense => Ok(out::write_matrix_dense(sink(cfg)?, &op, &meta)?),
        Format::Csv => Ok(out::write_matrix_long(sink(cfg)?, &op, &meta)?),
        Format::Markdown => Err(CliError::Config("operator writes csv or json".into())),
    }
}
