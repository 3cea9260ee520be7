//! Text renderings of command results. Floats in CSV use nine decimals.

use std::fmt::Write as _;

use serde::Serialize;

use lfqkd::sim::{BatchSummary, ComparisonReport};
use lfqkd::threshold::{curves_to_csv, ThresholdCurve};
use lfqkd::KeyRateBreakdown;

#[derive(Debug, Serialize)]
pub struct RateReport<'a> {
    pub model: &'a str,
    pub operational_rate: f64,
    #[serde(flatten)]
    pub breakdown: KeyRateBreakdown,
}

fn csv_f64(v: f64) -> String {
    format!("{v:.9}")
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_f64).unwrap_or_default()
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn rate_csv(report: &RateReport<'_>) -> String {
    let b = &report.breakdown;
    let fields = [
        report.model.to_string(),
        csv_f64(b.rate),
        csv_f64(report.operational_rate),
        csv_f64(b.delta.value()),
        csv_opt(b.phase_bound),
        csv_f64(b.signal),
        csv_f64(b.ec_cost),
        csv_f64(b.pa_cost),
        csv_opt(b.p_1.map(f64::from)),
        csv_opt(b.y_1.map(f64::from)),
        csv_opt(b.delta_1.map(f64::from)),
    ];
    format!(
        "model,rate,operational_rate,delta,phase_bound,signal,ec_cost,pa_cost,p_1,y_1,delta_1\n{}\n",
        fields.join(",")
    )
}

#[derive(Debug, Serialize)]
struct CurvePoint {
    eta: f64,
    e_d_max: f64,
}

#[derive(Debug, Serialize)]
struct CurveJson {
    model: &'static str,
    points: Vec<CurvePoint>,
}

pub fn curves(curves: &[ThresholdCurve], as_json: bool) -> String {
    if !as_json {
        return curves_to_csv(curves);
    }
    let body: Vec<CurveJson> = curves
        .iter()
        .map(|c| CurveJson {
            model: c.family.tag(),
            points: c
                .points
                .iter()
                .map(|p| CurvePoint {
                    eta: p.eta.value(),
                    e_d_max: p.e_d_max.value(),
                })
                .collect(),
        })
        .collect();
    json(&body)
}

pub fn summary_csv(s: &BatchSummary) -> String {
    let mut out = String::from(
        "scenario,model,n_pulses,seed,n_single,n_double,n_none,n_single_errors,q_s,e_s,rate\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        s.scenario.as_str(),
        s.model,
        s.n_pulses,
        s.seed,
        s.n_single,
        s.n_double,
        s.n_none,
        s.n_single_errors,
        csv_f64(s.q_s),
        csv_f64(s.e_s),
        csv_f64(s.rate)
    );
    out
}

pub fn comparison_csv(r: &ComparisonReport) -> String {
    let mut out = String::from(
        "model,n_pulses,seed,q_s,q_s_expected,q_s_z_score,q_s_offset_bound,\
         e_s,e_s_expected,e_s_z_score,e_s_offset_bound,rate_empirical,rate_analytic,rate_gap,pass\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.model,
        r.n_pulses,
        r.seed,
        csv_f64(r.q_s.empirical),
        csv_f64(r.q_s.expected),
        csv_opt(r.q_s.z_score),
        csv_f64(r.q_s.offset_bound),
        csv_f64(r.e_s.empirical),
        csv_f64(r.e_s.expected),
        csv_opt(r.e_s.z_score),
        csv_f64(r.e_s.offset_bound),
        csv_f64(r.rate_empirical),
        csv_f64(r.rate_analytic),
        csv_f64(r.rate_gap),
        r.pass
    );
    out
}
