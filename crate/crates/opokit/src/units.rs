//! Unit conventions and small conversion helpers.
//!
//! Internally the crate is strict SI: lengths in metres, frequencies in hertz,
//! powers in watts, angles in radians, noise powers as linear ratios relative
//! to shot noise. Anything human-facing (config keys, CSV columns, CLI flags)
//! carries an explicit unit suffix and is converted at the boundary by these
//! helpers, never inside the physics code.

use crate::scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Power ratio -> decibels. `r` must be positive.
pub fn db_from_linear<T: Real>(r: T) -> T {
    T::of(10.0) * r.log10()
}

/// Decibels -> power ratio.
pub fn linear_from_db<T: Real>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

pub fn mm_to_m<T: Real>(mm: T) -> T {
    mm * T::of(1e-3)
}

pub fn m_to_mm<T: Real>(m: T) -> T {
    m * T::of(1e3)
}

pub fn um_to_m<T: Real>(um: T) -> T {
    um * T::of(1e-6)
}

pub fn m_to_um<T: Real>(m: T) -> T {
    m * T::of(1e6)
}

pub fn nm_to_m<T: Real>(nm: T) -> T {
    nm * T::of(1e-9)
}

pub fn mhz_to_hz<T: Real>(mhz: T) -> T {
    mhz * T::of(1e6)
}

pub fn hz_to_mhz<T: Real>(hz: T) -> T {
    hz * T::of(1e-6)
}

pub fn mw_to_w<T: Real>(mw: T) -> T {
    mw * T::of(1e-3)
}

pub fn w_to_mw<T: Real>(w: T) -> T {
    w * T::of(1e3)
}

pub fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::PI() / T::of(180.0)
}

pub fn rad_to_deg<T: Real>(rad: T) -> T {
    rad * T::of(180.0) / T::PI()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn db_reference_points() {
        assert!((db_from_linear(1.0f64)).abs() < 1e-15);
        assert!((db_from_linear(10.0f64) - 10.0).abs() < 1e-12);
        assert!((db_from_linear(0.5f64) + 3.0103).abs() < 1e-4);
        assert!((linear_from_db(-10.0f64) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn angle_conversions() {
        assert!((deg_to_rad(180.0f64) - std::f64::consts::PI).abs() < 1e-15);
        assert!((rad_to_deg(std::f64::consts::FRAC_PI_2) - 90.0).abs() < 1e-12);
    }

    proptest! {
        // dB <-> linear roundtrip is the identity well below any tolerance
        // used elsewhere in the crate.
        #[test]
        fn db_roundtrip(r in 1e-6f64..1e6) {
            let back = linear_from_db(db_from_linear(r));
            prop_assert!((back - r).abs() <= 1e-12 * r);
        }

        #[test]
        fn db_roundtrip_from_db(db in -60.0f64..60.0) {
            let back = db_from_linear(linear_from_db(db));
            prop_assert!((back - db).abs() <= 1e-12);
        }
    }
}
