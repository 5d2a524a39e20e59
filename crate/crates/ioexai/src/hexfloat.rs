//! Exact text encoding of `f64` as C99 hexadecimal floating point
//! (`0x1.8p+1`, `-0x0.0000000000001p-1022`, `inf`, `nan`).

/// Formats `v` so that [`parse`] returns the identical bit pattern.
pub fn format(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut frac = format!("{mantissa:013x}");
    while frac.ends_with('0') {
        frac.pop();
    }
    if frac.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{frac}p{exp:+}")
    }
}

/// Parses the output of [`format`]. Also accepts any hex float whose
/// significand has at most 13 fractional digits and whose value is exactly
/// representable.
pub fn parse(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (sig, exp) = rest.split_once('p')?;
    let exp: i32 = exp.parse().ok()?;
    let (int_part, frac_part) = sig.split_once('.').unwrap_or((sig, ""));
    if int_part.is_empty() || frac_part.len() > 13 || !frac_part.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let lead = u64::from_str_radix(int_part, 16).ok()?;
    let frac = if frac_part.is_empty() { 0 } else { u64::from_str_radix(frac_part, 16).ok()? };
    let frac = frac << (4 * (13 - frac_part.len()));

    let bits = match (lead, exp) {
        (0, _) if frac == 0 => 0,
        (0, -1022) => frac,
        (1, -1022..=1023) => ((exp + 1023) as u64) << 52 | frac,
        _ => return None,
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encodings() {
        assert_eq!(format(1.0), "0x1p+0");
        assert_eq!(format(3.0), "0x1.8p+1");
        assert_eq!(format(-0.1), "-0x1.999999999999ap-4");
        assert_eq!(format(0.0), "0x0p+0");
        assert_eq!(format(-0.0), "-0x0p+0");
        assert_eq!(format(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(format(5e-324), "0x0.0000000000001p-1022");
        assert_eq!(parse("0x1.8p+1"), Some(3.0));
        assert_eq!(parse("-inf"), Some(f64::NEG_INFINITY));
        assert!(parse("nan").unwrap().is_nan());
        assert!(parse("0x1.8").is_none());
        assert!(parse("0x2p+0").is_none());
        assert!(parse("1.5").is_none());
        assert!(parse("0x1.gp+0").is_none());
    }

    proptest! {
        #[test]
        fn round_trips_every_bit_pattern(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = parse(&format(v)).unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), bits);
            }
        }
    }
}
