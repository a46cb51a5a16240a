//! Scoring and comparison machinery: confusion matrices, F1 with
//! confidence intervals, asymmetry diagnostics, and the evaluation grid
//! that sweeps methods across models, topics, and configurations.

mod matrix;
mod metrics;
mod report;

pub use matrix::{
    double_entry_check, enumerate_cells, estimate_cell_cost, prompt_context, run_cell,
    run_matrix, token_cost, CellResult, CellSpec, CostLedger, MatrixContext, MatrixPlan,
    MethodFamily, ModelPrices, ModelSet, RunOptions,
};
pub use report::{items_jsonl, plot_data_json, summary_csv};
pub use metrics::{
    bias, bias_with_ci, bootstrap_f1_ci, f1, percentile, replicate_ci, BiasEstimate,
    BootstrapParams, CiMethod, ConfusionMatrix, EvalError, ItemOutcome, MetricWithCi,
};
