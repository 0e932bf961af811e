//! CSV and JSON serialization of sweep results.

use phyanon::{SweepCell, SweepResult};
use serde_json::{Map, Number, Value};

pub const CSV_HEADER: &str =
    "snr_db,precoder,der,der_lo,der_hi,ser,ser_lo,ser_hi,mean_entropy_bits,trials,seed";

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e9)`.
pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fields(cell: &SweepCell, seed: u64) -> [(&'static str, String); 11] {
    [
        ("snr_db", fmt_g9(cell.snr_db)),
        ("precoder", cell.precoder.name().to_string()),
        ("der", fmt_g9(cell.der)),
        ("der_lo", fmt_g9(cell.der_ci.0)),
        ("der_hi", fmt_g9(cell.der_ci.1)),
        ("ser", fmt_g9(cell.ser)),
        ("ser_lo", fmt_g9(cell.ser_ci.0)),
        ("ser_hi", fmt_g9(cell.ser_ci.1)),
        ("mean_entropy_bits", fmt_g9(cell.mean_entropy_bits)),
        ("trials", cell.trials.to_string()),
        ("seed", seed.to_string()),
    ]
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &result.cells {
        let row: Vec<String> = fields(cell, result.master_seed)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Array of objects with the CSV column names. Numbers go through the same
/// nine-digit rounding; NaN and infinities become `null`.
pub fn to_json(result: &SweepResult) -> String {
    let rows: Vec<Value> = result
        .cells
        .iter()
        .map(|cell| {
            let mut obj = Map::new();
            for (name, text) in fields(cell, result.master_seed) {
                let value = match name {
                    "precoder" => Value::String(text),
                    "trials" => Value::Number(cell.trials.into()),
                    "seed" => Value::Number(result.master_seed.into()),
                    _ => text
                        .parse::<f64>()
                        .ok()
                        .and_then(Number::from_f64)
                        .map_or(Value::Null, Value::Number),
                };
                obj.insert(name.to_string(), value);
            }
            Value::Object(obj)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&Value::Array(rows)).expect("json values serialize");
    text.push('\n');
    text
}
