//! Engineering-notation numbers: `100f`, `0.45u`, `2meg`, `1e-3`.

/// Splits a token into its numeric mantissa and decimal exponent, applying
/// an engineering suffix if present.
fn split(token: &str) -> Option<(&str, i32)> {
    let t = token.trim();
    let bytes = t.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let digits_start = end;
    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
        end += 1;
    }
    if end == digits_start {
        return None;
    }
    // Optional exponent, only if followed by a digit (so `1e` is rejected
    // rather than misread).
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        let exp_digits = k;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        if k > exp_digits {
            end = k;
        }
    }
    let (mantissa, suffix) = t.split_at(end);
    let exp = match suffix.to_ascii_lowercase().as_str() {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "meg" => 6,
        _ => return None,
    };
    Some((mantissa, exp))
}

/// Parses an engineering-notation value and returns it in units of
/// `10^unit_exp`, with a single rounding step.
pub fn parse_scaled(token: &str, unit_exp: i32) -> Option<f64> {
    let (mantissa, suffix_exp) = split(token)?;
    let shift = suffix_exp - unit_exp;
    let value: f64 = if shift == 0 {
        mantissa.parse().ok()?
    } else {
        // Fold the shift into the literal so the decimal-to-binary
        // conversion happens exactly once.
        let (base, exp) = match mantissa.find(['e', 'E']) {
            Some(i) => (&mantissa[..i], mantissa[i + 1..].parse::<i32>().ok()?),
            None => (mantissa, 0),
        };
        format!("{base}e{}", exp + shift).parse().ok()?
    };
    value.is_finite().then_some(value)
}

/// Parses an engineering-notation value in base SI units.
pub fn parse_value(token: &str) -> Option<f64> {
    parse_scaled(token, 0)
}

/// Formats a value with engineering suffix for human-facing output.
pub fn format_eng(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    const TABLE: [(f64, &str); 8] = [
        (1e6, "meg"),
        (1e3, "k"),
        (1.0, ""),
        (1e-3, "m"),
        (1e-6, "u"),
        (1e-9, "n"),
        (1e-12, "p"),
        (1e-15, "f"),
    ];
    let mag = value.abs();
    let (scale, suffix) = TABLE
        .iter()
        .copied()
        .find(|(s, _)| mag >= *s * 0.999_999_5)
        .unwrap_or((1e-15, "f"));
    let scaled = value / scale;
    let text = format!("{scaled:.4}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    format!("{text}{suffix}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_value("100f"), Some(100e-15));
        assert_eq!(parse_value("0.45u"), Some(0.45e-6));
        assert_eq!(parse_value("2MEG"), Some(2e6));
        assert_eq!(parse_value("3m"), Some(3e-3));
        assert_eq!(parse_value("1.5k"), Some(1500.0));
        assert_eq!(parse_value("-2.5n"), Some(-2.5e-9));
        assert_eq!(parse_value("1e-3"), Some(1e-3));
        assert_eq!(parse_value("1e-3u"), Some(1e-9));
    }

    #[test]
    fn scaled_is_exact() {
        assert_eq!(parse_scaled("0.45u", -6), Some(0.45));
        assert_eq!(parse_scaled("0.045u", -6), Some(0.045));
        assert_eq!(parse_scaled("450n", -6), Some(0.45));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "u", "1x", "abc", "1.0.0e", "--1", "1e"] {
            assert_eq!(parse_value(bad), None, "{bad}");
        }
    }

    #[test]
    fn formats() {
        assert_eq!(format_eng(1e-6), "1u");
        assert_eq!(format_eng(2.5e-13), "250f");
        assert_eq!(format_eng(47_000.0), "47k");
    }
}
