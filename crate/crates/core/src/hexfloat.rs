//! C99-style hex-float formatting for bit-exact text round trips.

use crate::error::{Error, Result};

/// Format an f64 as a C99 hex float, e.g. `0x1.921fb54442d18p+1`.
pub fn format_hex(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0x0p+0".into() } else { "0x0p+0".into() };
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v < 0.0 { "-inf".into() } else { "inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        // subnormal: represent as 0x0.<mantissa>p-1022
        return format!("{sign}0x0.{mantissa:013x}p-1022");
    }
    let exp = exp_bits - 1023;
    if mantissa == 0 {
        format!("{sign}0x1p{exp:+}")
    } else {
        let hex = format!("{mantissa:013x}");
        let trimmed = hex.trim_end_matches('0');
        format!("{sign}0x1.{trimmed}p{exp:+}")
    }
}

/// Parse the output of `format_hex`.
pub fn parse_hex(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t),
    };
    let rest = rest
        .strip_prefix("0x")
        .ok_or_else(|| Error::Parse(format!("not a hex float: {s}")))?;
    let pidx = rest
        .find(['p', 'P'])
        .ok_or_else(|| Error::Parse(format!("missing exponent: {s}")))?;
    let (mant_str, exp_str) = rest.split_at(pidx);
    let exp: i64 = exp_str[1..]
        .parse()
        .map_err(|_| Error::Parse(format!("bad exponent in {s}")))?;
    let (int_part, frac_part) = match mant_str.find('.') {
        Some(i) => (&mant_str[..i], &mant_str[i + 1..]),
        None => (mant_str, ""),
    };
    let mut value = 0.0f64;
    for c in int_part.chars() {
        let d = c.to_digit(16).ok_or_else(|| Error::Parse(format!("bad digit in {s}")))? as f64;
        value = value * 16.0 + d;
    }
    let mut scale = 1.0 / 16.0;
    for c in frac_part.chars() {
        let d = c.to_digit(16).ok_or_else(|| Error::Parse(format!("bad digit in {s}")))? as f64;
        value += d * scale;
        scale /= 16.0;
    }
    let v = value * (exp as f64).exp2();
    Ok(if neg { -v } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let cases = [
            0.0,
            -0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -3.333333333333333e5,
            f64::MIN_POSITIVE,
            f64::MAX,
            5e-324, // smallest subnormal
        ];
        for &v in &cases {
            let s = format_hex(v);
            let back = parse_hex(&s).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn known_representation() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(2.0), "0x1p+1");
        assert_eq!(format_hex(-0.5), "-0x1p-1");
        assert_eq!(parse_hex("0x1.8p+1").unwrap(), 3.0);
    }
}
