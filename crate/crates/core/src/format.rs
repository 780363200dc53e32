//! Float formatting shared by every CSV writer.

/// Formats `x` like C's `printf("%.12e", x)`: twelve fractional digits and a
/// signed exponent with at least two digits.
pub fn sci12(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_printf() {
        assert_eq!(sci12(1.0), "1.000000000000e+00");
        assert_eq!(sci12(-0.00123), "-1.230000000000e-03");
        assert_eq!(sci12(6.02214076e123), "6.022140760000e+123");
        assert_eq!(sci12(0.0), "0.000000000000e+00");
    }
}
