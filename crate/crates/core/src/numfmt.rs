//! Human-readable number formatting.

/// Formats with six significant digits, like C's `%g`: fixed notation for
/// moderate magnitudes with trailing zeros removed, scientific otherwise.
pub fn sig6(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exp = value.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let sci = format!("{value:.5e}");
    let exp = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{value:.decimals$}"))
    } else {
        let (mantissa, e) = sci
            .split_once('e')
            .expect("scientific format has an exponent");
        let sign = if e.starts_with('-') { "-" } else { "+" };
        let digits = e.trim_start_matches('-');
        format!("{}e{sign}{:0>2}", trim_zeros(mantissa.to_string()), digits)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig6(3.0 / 2f64.sqrt()), "2.12132");
        assert_eq!(sig6(2.0 / 3.0), "0.666667");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-1.5), "-1.5");
        assert_eq!(sig6(224.0 / 450.0), "0.497778");
        assert_eq!(sig6(999999.5), "1e+06");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.0000123456789), "1.23457e-05");
        assert_eq!(sig6(0.000123456789), "0.000123457");
    }
}
