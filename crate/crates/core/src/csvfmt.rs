//! Deterministic number formatting for CSV artifacts.
//!
//! All floating-point fields are serialized with 6 significant digits
//! (printf `%g` rules); millisecond times are written as plain integers.
//! Re-running a stage with identical inputs must reproduce byte-identical
//! files, so every writer in the crate goes through [`fmt_g6`].

/// Format with 6 significant digits, `%g`-style: fixed notation when the
/// decimal exponent is in [-4, 6), scientific otherwise, trailing zeros
/// trimmed.
pub fn fmt_g6(x: f64) -> String {
    fmt_g(x, 6)
}

/// `%g`-style formatting with `sig` significant digits.
pub fn fmt_g(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    // Round to `sig` significant digits first so the exponent test matches
    // the rounded value (e.g. 9.9999e5 at 4 digits becomes 1e6).
    let formatted = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = formatted
        .split_once('e')
        .expect("exponential format always contains 'e'");
    let exp: i32 = exp.parse().expect("exponent parses");

    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        // Rebuild fixed notation from the rounded digit string; going back
        // through f64 would re-round.
        let neg = mantissa.starts_with('-');
        let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
        let body = if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                format!("{digits}{}", "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        };
        let body = trim_zeros(&body);
        if neg {
            format!("-{body}")
        } else {
            body
        }
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
