//! Number rendering shared by every report.

/// Decimal with 12 significant digits; scientific below 1e-4.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..12).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// `p/q` with the smallest `q <= 100000` within 1e-12 of `x`.
pub fn fraction(x: f64) -> Option<String> {
    if !x.is_finite() || x < 0.0 {
        return None;
    }
    for q in 1u64..=100_000 {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() <= 1e-12 {
            return Some(if q == 1 { format!("{p}") } else { format!("{p}/{q}") });
        }
    }
    None
}

/// `sig12(x)` followed by ` (p/q)` when `x` is a small rational.
pub fn probability(x: f64) -> String {
    match fraction(x) {
        Some(f) if f != "0" => format!("{} ({f})", sig12(x)),
        _ => sig12(x),
    }
}

/// Components below 1e-15 in magnitude are round-off and print as 0.
pub fn complex(re: f64, im: f64) -> String {
    let clean = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    let (re, im) = (clean(re), clean(im));
    let sign = if im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", sig12(re), sig12(im.abs()))
}
