/// Locale-independent rendering of a real with 6 significant digits in the
/// style of C's `%g`: fixed notation for exponents in `[-4, 6)`, otherwise
/// `d.ddddde±XX`. Trailing zeros are dropped. NaN prints as `NA`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s.to_owned()
    }
}

/// Parse a value written by [`format_real`].
pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "NA" | "" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

/// `x` rounded to the precision [`format_real`] prints.
pub fn round_real(x: f64) -> f64 {
    parse_real(&format_real(x)).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_style() {
        assert_eq!(format_real(0.259), "0.259");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(2657.26), "2657.26");
        assert_eq!(format_real(123456.7), "123457");
        assert_eq!(format_real(1234567.0), "1.23457e+06");
        assert_eq!(format_real(0.000123456789), "0.000123457");
        assert_eq!(format_real(0.0000123456789), "1.23457e-05");
        assert_eq!(format_real(-3.475), "-3.475");
        assert_eq!(format_real(9.9999996), "10");
        assert_eq!(format_real(f64::NAN), "NA");
        assert_eq!(format_real(-0.0), "0");
    }

    #[test]
    fn round_trip_to_six_digits() {
        for &x in &[0.123456789, 98765.4321, 1e-9 / 3.0, 7.0e12 / 9.0] {
            let back = parse_real(&format_real(x)).unwrap();
            assert!(((back - x) / x).abs() < 5e-6);
        }
    }
}
