//! Locale-independent number formatting for the CSV outputs: six
//! significant digits, `.` decimal point, scientific notation only outside
//! a sane fixed-point range.

pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let trimmed = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        &s
    };
    trimmed.to_string()
}

/// One RFC-4180 CSV line; our fields never need quoting (numbers, plain
/// words and `;`-joined error messages with commas stripped).
pub fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

/// Error text safe to embed as a bare CSV field.
pub fn csv_safe(text: &str) -> String {
    text.replace([',', '"', '\n'], ";")
}
