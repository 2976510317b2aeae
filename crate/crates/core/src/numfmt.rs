//! Decimal rendering with a fixed number of significant digits.
//!
//! Rounding is half-to-even on the exact binary value, which is what the
//! standard library's `{:.Ne}` formatter does.

/// Splits `v` into (negative, digit string, decimal exponent) rounded to
/// `digits` significant digits. `v` must be finite.
fn sci_parts(v: f64, digits: usize) -> (bool, String, i32) {
    debug_assert!(digits >= 1);
    let s = format!("{:.*e}", digits - 1, v);
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mant.starts_with('-');
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    (negative, digits, exp)
}

/// Rounds `v` to `digits` significant digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", digits - 1, v).parse().expect("round trip")
}

/// Plain positional notation keeping every significant digit, e.g.
/// `626.000` or `0.0123456` at six digits. Never uses an exponent.
pub fn plain_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        let mut s = String::from("0");
        if digits > 1 {
            s.push('.');
            s.extend(std::iter::repeat_n('0', digits - 1));
        }
        return s;
    }
    let (negative, ds, exp) = sci_parts(v, digits);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&ds);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= ds.len() {
            out.push_str(&ds);
            out.extend(std::iter::repeat_n('0', int_len - ds.len()));
        } else {
            out.push_str(&ds[..int_len]);
            out.push('.');
            out.push_str(&ds[int_len..]);
        }
    }
    out
}

/// `%g`-style rendering: positional when the exponent is moderate,
/// scientific otherwise, trailing zeros trimmed.
pub fn general_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let (_, _, exp) = sci_parts(v, digits);
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, v);
        let (mant, e) = s.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        trim_zeros(&plain_sig(v, digits)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Twelve significant digits, the precision used by every CSV artifact.
pub fn csv_num(v: f64) -> String {
    general_sig(v, 12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_keeps_significance() {
        assert_eq!(plain_sig(626.0, 6), "626.000");
        assert_eq!(plain_sig(0.0123456789, 6), "0.0123457");
        assert_eq!(plain_sig(123456.0, 6), "123456");
        assert_eq!(plain_sig(1234567.0, 6), "1234570");
        assert_eq!(plain_sig(-1.5, 3), "-1.50");
        assert_eq!(plain_sig(0.0, 3), "0.00");
        assert_eq!(plain_sig(9.9996, 4), "10.00");
    }

    #[test]
    fn half_even() {
        assert_eq!(plain_sig(0.123456, 4), "0.1235");
        // 0.125 is exact in binary, so this is a true tie.
        assert_eq!(plain_sig(0.125, 2), "0.12");
        assert_eq!(plain_sig(0.375, 2), "0.38");
        assert_eq!(round_sig(2.5, 1), 2.0);
    }

    #[test]
    fn general_forms() {
        assert_eq!(general_sig(626.0, 12), "626");
        assert_eq!(general_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(general_sig(1.5e-9, 12), "1.5e-9");
        assert_eq!(general_sig(-2.0e15, 12), "-2e15");
        let v = 0.1 + 0.2;
        assert_eq!(csv_num(v).parse::<f64>().unwrap(), round_sig(v, 12));
    }
}
