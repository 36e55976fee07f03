//! End-to-end runs: build networks and points from a config, train, evaluate.

use thiserror::Error;

use crate::config::{BackboneKind, ConfigError, ExperimentConfig};
use crate::networks::{Backbone, DualNetwork, KanNetwork, MlpNetwork, NetworkError};
use crate::problems::ProblemDefinition;
use crate::reporting::{evaluate_errors, ErrorReport, ReportingError};
use crate::sampling::{substream, CollocationSet, SamplingError};
use crate::training::{train, TrainError, TrainObserver, TrainReport};

/// Stream of the experiment seed used for network initialization.
const INIT_STREAM: u64 = 7;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Reporting(#[from] ReportingError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 for bad input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Train(TrainError::Config(_)) => 2,
            ExperimentError::Train(TrainError::NonFinite { .. } | TrainError::NonFiniteGradient { .. }) => 3,
            ExperimentError::Io { .. } => 4,
            _ => 1,
        }
    }
}

/// Freshly initialized dual network for `cfg`.
pub fn init_networks(cfg: &ExperimentConfig, def: &ProblemDefinition) -> Result<DualNetwork, NetworkError> {
    let mut rng = substream(cfg.seed, INIT_STREAM);
    let (lo, hi) = def.decomposition.bounding_box();
    let mut make = || -> Result<Backbone, NetworkError> {
        Ok(match cfg.backbone {
            BackboneKind::Mlp => Backbone::Mlp(MlpNetwork::glorot(&cfg.widths, &mut rng)?),
            BackboneKind::Kan => Backbone::Kan(KanNetwork::random(
                &cfg.widths,
                cfg.grid_intervals,
                cfg.spline_order,
                [lo, hi],
                &mut rng,
            )?),
        })
    };
    let net1 = make()?;
    let net2 = make()?;
    DualNetwork::new(net1, net2)
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub dual: DualNetwork,
    pub collocation: CollocationSet,
    pub report: TrainReport,
    pub errors: ErrorReport,
}

/// Validates `cfg`, trains, and evaluates on a fresh test set.
pub fn run_experiment(cfg: &ExperimentConfig, observer: &mut dyn TrainObserver) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    let def = ProblemDefinition::builtin(cfg.problem);
    let mut dual = init_networks(cfg, &def)?;
    let mut colloc = CollocationSet::generate(&def.decomposition, &cfg.sampling, cfg.collocation_seed())?;
    let mut report = train(&mut dual, &def, &mut colloc, &cfg.train_config(), observer)?;
    let errors = evaluate_errors(&dual, &def, cfg.n_test, cfg.seed)?;
    report.errors = Some(errors.clone());
    Ok(RunOutcome {
        dual,
        collocation: colloc,
        report,
        errors,
    })
}

/// Labels of the four-way comparison, in table order.
pub const COMPARISON_LABELS: [&str; 4] = ["PINNs", "KANs", "PINNs-A", "KANs-A"];

/// The four comparison runs of `problem`, sharing one collocation seed.
pub fn comparison_configs(problem: crate::problems::ProblemId, seed: u64) -> Vec<(String, ExperimentConfig)> {
    let mut out = Vec::new();
    for (label, (backbone, rard)) in COMPARISON_LABELS.iter().zip([
        (BackboneKind::Mlp, false),
        (BackboneKind::Kan, false),
        (BackboneKind::Mlp, true),
        (BackboneKind::Kan, true),
    ]) {
        let mut cfg = crate::config::preset(problem, backbone, rard);
        cfg.seed = seed;
        cfg.collocation_seed = Some(seed);
        out.push((label.to_string(), cfg));
    }
    out
}

/// Column headers of comparison and sweep tables.
const TABLE_COLUMNS: [&str; 6] = ["e_omega1", "e_omega2", "e_gamma", "e_boundary1", "e_boundary2", "max_abs"];

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.3e}")
    }
}

/// CSV and aligned-text renderings of labelled error reports.
pub fn format_table(first_header: &str, rows: &[(String, ErrorReport)]) -> (String, String) {
    let mut csv = format!("{first_header},{}\n", TABLE_COLUMNS.join(","));
    for (label, r) in rows {
        let cells: Vec<String> = r
            .columns()
            .iter()
            .map(|(_, v)| if v.is_nan() { String::new() } else { format!("{v:e}") })
            .collect();
        csv.push_str(&format!("{label},{}\n", cells.join(",")));
    }
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(first_header.len());
    let mut text = format!("{first_header:<width$}");
    for c in TABLE_COLUMNS {
        text.push_str(&format!("  {c:>11}"));
    }
    text.push('\n');
    for (label, r) in rows {
        text.push_str(&format!("{label:<width$}"));
        for (_, v) in r.columns() {
            text.push_str(&format!("  {:>11}", fmt_cell(v)));
        }
        text.push('\n');
    }
    (csv, text)
}

/// Sweep axis over KAN structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Hidden width of a three-hidden-layer KAN.
    Neurons,
    /// Grid intervals `G`.
    Grid,
}

/// KAN configs varying one structural parameter of the `problem` preset.
/// `neurons` and `grid` fix the other parameter when given.
pub fn sweep_configs(
    problem: crate::problems::ProblemId,
    axis: SweepAxis,
    values: &[usize],
    neurons: Option<usize>,
    grid: Option<usize>,
    seed: u64,
) -> Vec<(String, ExperimentConfig)> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = crate::config::preset(problem, BackboneKind::Kan, false);
            cfg.seed = seed;
            cfg.collocation_seed = Some(seed);
            if let Some(n) = neurons {
                cfg.widths = vec![2, n, n, n, 1];
            }
            if let Some(g) = grid {
                cfg.grid_intervals = g;
            }
            match axis {
                SweepAxis::Neurons => cfg.widths = vec![2, v, v, v, 1],
                SweepAxis::Grid => cfg.grid_intervals = v,
            }
            (v.to_string(), cfg)
        })
        .collect()
}
