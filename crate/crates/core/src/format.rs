//! Number formatting for human-readable reports.

/// Formats `x` with six significant digits, switching to scientific notation for very large or
/// very small magnitudes.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (e.g. 999999.5)
    if s.trim_start_matches('-')
        .replace('.', "")
        .trim_start_matches('0')
        .len()
        > 6
        && decimals > 0
    {
        return format!("{x:.prec$}", prec = decimals - 1);
    }
    s
}
