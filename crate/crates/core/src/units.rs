//! dBm / mW conversions. Cost arithmetic is linear (mW); interfaces speak dBm.

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_are_inverse() {
        assert_eq!(dbm_to_mw(0.0), 1.0);
        assert!((dbm_to_mw(-5.0) - 0.316_227_766).abs() < 1e-9);
        for x in [-25.0, -15.0, -10.0, -5.0, 0.0, 5.0] {
            assert!((mw_to_dbm(dbm_to_mw(x)) - x).abs() < 1e-12);
        }
    }
}
