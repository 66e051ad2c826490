//! Number formatting shared by every text output.

/// Twelve significant digits in scientific notation.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000000e0"
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.138230076757951), "1.38230076758e-1");
        assert_eq!(sig12(-2.0), "-2.00000000000e0");
        assert_eq!(sig12(-0.0), sig12(0.0));
    }
}
