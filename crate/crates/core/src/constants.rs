//! Physical constants (CODATA 2018).

/// Speed of light in vacuum, m/s.
pub const C: f64 = 2.997_924_58e8;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Floor applied to |S11| when expressed in dB.
pub const DB_FLOOR: f64 = -80.0;

/// Converts a linear reflection magnitude to dB, clamped at [`DB_FLOOR`].
pub fn mag_to_db(mag: f64) -> f64 {
    if mag <= 0.0 {
        return DB_FLOOR;
    }
    (20.0 * mag.log10()).max(DB_FLOOR)
}
