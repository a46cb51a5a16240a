//! Deterministic report assembly: a summary CSV mirroring the experiment
//! table, plot-ready JSON for the cost/performance and asymmetry figures,
//! and a per-item JSONL audit trail. Same inputs, same bytes.

use serde::Serialize;

use super::matrix::CellResult;
use crate::logprob::FramingLabel;

fn sorted(cells: &[CellResult]) -> Vec<&CellResult> {
    let mut refs: Vec<&CellResult> = cells.iter().collect();
    refs.sort_by(|x, y| x.spec.cmp(&y.spec));
    refs
}

fn num(value: f64) -> String {
    format!("{value:.6}")
}

/// One row per cell: `method,model,topic,variant,f1,ci_low,ci_high,bias,
/// bias_significant,cost`. Metric fields are left empty for cells that
/// errored or were undefined; cost is always present.
pub fn summary_csv(cells: &[CellResult]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "method",
            "model",
            "topic",
            "variant",
            "f1",
            "ci_low",
            "ci_high",
            "bias",
            "bias_significant",
            "cost",
        ])
        .expect("write to memory");
    for cell in sorted(cells) {
        let (f1, ci_low, ci_high) = match &cell.f1_a {
            Some(m) => (num(m.point), num(m.ci_low), num(m.ci_high)),
            None => (String::new(), String::new(), String::new()),
        };
        // The bias value is only quoted when it is statistically significant;
        // the boolean column records the verdict either way. Insignificant
        // estimates still appear in the plot data with their full intervals.
        let (bias, significant) = match &cell.bias {
            Some(b) if b.significant => (num(b.bias), "true".to_string()),
            Some(_) => (String::new(), "false".to_string()),
            None => (String::new(), String::new()),
        };
        writer
            .write_record([
                cell.spec.method.as_str(),
                &cell.spec.model,
                &cell.spec.topic,
                &cell.spec.variant,
                &f1,
                &ci_low,
                &ci_high,
                &bias,
                &significant,
                &num(cell.ledger.cost),
            ])
            .expect("write to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

#[derive(Serialize)]
struct CostPoint {
    key: String,
    method: &'static str,
    model: String,
    topic: String,
    variant: String,
    cost: f64,
    f1: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize)]
struct BiasInterval {
    key: String,
    bias: f64,
    ci_low: f64,
    ci_high: f64,
    significant: bool,
}

#[derive(Serialize)]
struct CellIssue {
    key: String,
    error: String,
}

#[derive(Serialize)]
struct PlotData {
    cost_vs_f1: Vec<CostPoint>,
    bias_intervals: Vec<BiasInterval>,
    errors: Vec<CellIssue>,
}

/// Data behind the two standard figures: a cost-versus-F1 scatter and an
/// asymmetry interval chart. Cells without a defined metric are listed under
/// `errors` instead of being dropped silently.
pub fn plot_data_json(cells: &[CellResult]) -> String {
    let cells = sorted(cells);
    let cost_vs_f1 = cells
        .iter()
        .filter_map(|cell| {
            cell.f1_a.as_ref().map(|m| CostPoint {
                key: cell.key(),
                method: cell.spec.method.as_str(),
                model: cell.spec.model.clone(),
                topic: cell.spec.topic.clone(),
                variant: cell.spec.variant.clone(),
                cost: cell.ledger.cost,
                f1: m.point,
                ci_low: m.ci_low,
                ci_high: m.ci_high,
            })
        })
        .collect();
    let bias_intervals = cells
        .iter()
        .filter_map(|cell| {
            cell.bias.as_ref().map(|b| BiasInterval {
                key: cell.key(),
                bias: b.bias,
                ci_low: b.ci_low,
                ci_high: b.ci_high,
                significant: b.significant,
            })
        })
        .collect();
    let errors = cells
        .iter()
        .filter_map(|cell| {
            cell.error.as_ref().map(|e| CellIssue { key: cell.key(), error: e.clone() })
        })
        .collect();
    let data = PlotData { cost_vs_f1, bias_intervals, errors };
    let mut body = serde_json::to_string_pretty(&data).expect("plot data serializes");
    body.push('\n');
    body
}

#[derive(Serialize)]
struct ItemRecord<'a> {
    cell: String,
    id: &'a str,
    truth: FramingLabel,
    predicted: Option<FramingLabel>,
}

/// One line per evaluated item across all cells, in cell order. This is the
/// raw material from which every metric in the summary can be recomputed.
pub fn items_jsonl(cells: &[CellResult]) -> String {
    let mut out = String::new();
    for cell in sorted(cells) {
        let key = cell.key();
        for item in &cell.items {
            let record = ItemRecord {
                cell: key.clone(),
                id: &item.id,
                truth: item.truth,
                predicted: item.predicted,
            };
            out.push_str(&serde_json::to_string(&record).expect("item serializes"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::matrix::{CellSpec, CostLedger, MethodFamily};
    use super::super::metrics::{BiasEstimate, CiMethod, ItemOutcome, MetricWithCi};
    use super::*;

    fn cell(model: &str, variant: &str, f1: Option<f64>) -> CellResult {
        CellResult {
            spec: CellSpec {
                method: MethodFamily::Paired,
                model: model.into(),
                topic: "pets".into(),
                variant: variant.into(),
            },
            label_a: "dog life".into(),
            label_b: "cat life".into(),
            f1_a: f1.map(|point| MetricWithCi {
                point,
                ci_low: point - 0.05,
                ci_high: (point + 0.05).min(1.0),
                method: CiMethod::Bootstrap,
            }),
            f1_b: None,
            bias: f1.map(|_| BiasEstimate {
                bias: 0.125,
                ci_low: 0.05,
                ci_high: 0.2,
                significant: true,
                replicates_used: 100,
            }),
            failures: 0,
            items: vec![
                ItemOutcome { id: "a0".into(), truth: FramingLabel::A, predicted: Some(FramingLabel::A) },
                ItemOutcome { id: "b0".into(), truth: FramingLabel::B, predicted: None },
            ],
            ledger: if f1.is_some() {
                CostLedger { calls: 4, retries: 0, input_tokens: 100, output_tokens: 0, cost: 0.25 }
            } else {
                CostLedger::default()
            },
            error: if f1.is_none() { Some("model `x` is not configured".into()) } else { None },
        }
    }

    #[test]
    fn summary_rows_are_sorted_and_formatted() {
        let csv = summary_csv(&[cell("zeta", "k=2", Some(0.9)), cell("alpha", "k=1", Some(0.8))]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "method,model,topic,variant,f1,ci_low,ci_high,bias,bias_significant,cost"
        );
        assert_eq!(lines[1], "paired,alpha,pets,k=1,0.800000,0.750000,0.850000,0.125000,true,0.250000");
        assert_eq!(lines[2], "paired,zeta,pets,k=2,0.900000,0.850000,0.950000,0.125000,true,0.250000");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn errored_cells_keep_their_row_with_blank_metrics() {
        let csv = summary_csv(&[cell("alpha", "k=1", None)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "paired,alpha,pets,k=1,,,,,,0.000000");
    }

    #[test]
    fn insignificant_bias_is_left_blank_but_flagged() {
        let mut c = cell("alpha", "k=1", Some(0.8));
        if let Some(b) = c.bias.as_mut() {
            b.significant = false;
            b.ci_low = -0.1;
        }
        let csv = summary_csv(&[c]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "paired,alpha,pets,k=1,0.800000,0.750000,0.850000,,false,0.250000");
    }

    #[test]
    fn reports_are_byte_identical_regardless_of_input_order() {
        let a = vec![cell("alpha", "k=1", Some(0.8)), cell("zeta", "k=2", Some(0.9))];
        let b = vec![cell("zeta", "k=2", Some(0.9)), cell("alpha", "k=1", Some(0.8))];
        assert_eq!(summary_csv(&a), summary_csv(&b));
        assert_eq!(plot_data_json(&a), plot_data_json(&b));
        assert_eq!(items_jsonl(&a), items_jsonl(&b));
    }

    #[test]
    fn plot_data_partitions_defined_and_errored_cells() {
        let cells = vec![cell("alpha", "k=1", Some(0.8)), cell("beta", "k=2", None)];
        let json = plot_data_json(&cells);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["cost_vs_f1"].as_array().unwrap().len(), 1);
        assert_eq!(value["cost_vs_f1"][0]["key"], "paired/alpha/pets/k=1");
        assert_eq!(value["errors"].as_array().unwrap().len(), 1);
        assert_eq!(value["errors"][0]["key"], "paired/beta/pets/k=2");
    }

    #[test]
    fn item_lines_carry_labels_and_failures() {
        let jsonl = items_jsonl(&[cell("alpha", "k=1", Some(0.8))]);
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            r#"{"cell":"paired/alpha/pets/k=1","id":"a0","truth":"A","predicted":"A"}"#
        );
        assert_eq!(
            lines[1],
            r#"{"cell":"paired/alpha/pets/k=1","id":"b0","truth":"B","predicted":null}"#
        );
    }
}
