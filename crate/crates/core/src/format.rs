//! Stable fixed-decimal rendering of computed values.

/// Fixed-decimal string with `sig` significant digits, rounded half to even
/// on the exact binary value. `None` and non-finite values render as `NA`.
pub fn fixed_sig(x: Option<f64>, sig: usize) -> String {
    let x = match x {
        Some(v) if v.is_finite() => v,
        _ => return "NA".to_string(),
    };
    let sig = sig.max(1);
    if x == 0.0 {
        return if sig == 1 { "0".into() } else { format!("0.{}", "0".repeat(sig - 1)) };
    }
    // `{:e}` rounds the exact binary value half to even.
    let sci = format!("{:.*e}", sig - 1, x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i64 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if x < 0.0 { "-" } else { "" };
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

/// [`fixed_sig`] with nine significant digits.
pub fn sig9(x: f64) -> String {
    fixed_sig(Some(x), 9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities() {
        assert_eq!(sig9(0.029_442_594_066_307_4), "0.0294425941");
        assert_eq!(sig9(0.048_782_469_757_671), "0.0487824698");
        assert_eq!(sig9(3.992_553_627_644_51e-4), "0.000399255363");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.0), "0.00000000");
        assert_eq!(sig9(1.234e-12), "0.00000000000123400000");
    }

    #[test]
    fn large_and_negative() {
        assert_eq!(sig9(123_456_789_012.0), "123456789000");
        assert_eq!(sig9(-2.5), "-2.50000000");
        assert_eq!(sig9(12_345.678_901_23), "12345.6789");
        assert_eq!(fixed_sig(Some(f64::NAN), 9), "NA");
        assert_eq!(fixed_sig(None, 9), "NA");
    }

    #[test]
    fn ties_round_to_even() {
        // Exactly representable ties.
        assert_eq!(fixed_sig(Some(0.125), 2), "0.12");
        assert_eq!(fixed_sig(Some(0.375), 2), "0.38");
        assert_eq!(fixed_sig(Some(2.5), 1), "2");
        assert_eq!(fixed_sig(Some(3.5), 1), "4");
        assert_eq!(sig9(100_000_000.5), "100000000");
        assert_eq!(sig9(100_000_001.5), "100000002");
        // 0.15 is stored slightly below the tie, so it rounds down.
        assert_eq!(fixed_sig(Some(0.15), 1), "0.1");
    }
}
