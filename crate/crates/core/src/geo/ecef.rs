use serde::{Deserialize, Serialize};

/// WGS-84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// Mean Earth radius (IUGG), meters; only for spherical approximations.
pub const MEAN_EARTH_RADIUS: f64 = 6_371_008.8;

/// Earth-centered, earth-fixed position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub fn distance(&self, other: &EcefPoint) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Geodetic longitude/latitude in degrees and ellipsoidal height in meters
/// to ECEF, using the prime-vertical radius of curvature.
pub fn wgs84_to_ecef(lon_deg: f64, lat_deg: f64, alt_m: f64) -> EcefPoint {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let (sin_lat, cos_lat) = lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = lon_deg.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - e2 * sin_lat * sin_lat).sqrt();
    EcefPoint {
        x: (n + alt_m) * cos_lat * cos_lon,
        y: (n + alt_m) * cos_lat * sin_lon,
        z: (n * (1.0 - e2) + alt_m) * sin_lat,
    }
}

/// Great-circle distance on a sphere of radius [`MEAN_EARTH_RADIUS`], meters.
pub fn haversine_m(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * MEAN_EARTH_RADIUS * a.sqrt().asin()
}

/// East/north speeds in km/h of angular rates in degrees per second at
/// latitude `lat_deg`, on the sphere of radius [`MEAN_EARTH_RADIUS`].
pub fn rates_to_kmh(lat_deg: f64, lon_rate: f64, lat_rate: f64) -> (f64, f64) {
    let k = MEAN_EARTH_RADIUS * 3.6_f64 * std::f64::consts::PI / 180.0;
    (lon_rate * k * lat_deg.to_radians().cos(), lat_rate * k)
}

/// Inverse of [`rates_to_kmh`].
pub fn kmh_to_rates(lat_deg: f64, vx_kmh: f64, vy_kmh: f64) -> (f64, f64) {
    let k = MEAN_EARTH_RADIUS * 3.6_f64 * std::f64::consts::PI / 180.0;
    (vx_kmh / (k * lat_deg.to_radians().cos()), vy_kmh / k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_points() {
        let e = wgs84_to_ecef(0.0, 0.0, 0.0);
        assert_eq!((e.x, e.y, e.z), (WGS84_A, 0.0, 0.0));
        let p = wgs84_to_ecef(0.0, 90.0, 0.0);
        let b = WGS84_A * (1.0 - WGS84_F);
        assert!(p.x.abs() < 1e-6 && p.y.abs() < 1e-6);
        assert!((p.z - 6_356_752.3142).abs() < 1e-3, "{}", p.z);
        assert!((p.z - b).abs() < 1e-6);
    }

    #[test]
    fn haversine_quarter_meridian() {
        let d = haversine_m(0.0, 0.0, 0.0, 90.0);
        assert!((d - MEAN_EARTH_RADIUS * std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        assert_eq!(haversine_m(100.0, 30.0, 100.0, 30.0), 0.0);
    }

    #[test]
    fn rate_conversion_round_trips() {
        let (vx, vy) = rates_to_kmh(30.0, 0.002, -0.001);
        let (a, b) = kmh_to_rates(30.0, vx, vy);
        assert!((a - 0.002).abs() < 1e-15 && (b + 0.001).abs() < 1e-15);
        // one degree of latitude per hour is about 111.2 km/h
        let (_, v) = rates_to_kmh(0.0, 0.0, 1.0 / 3600.0);
        assert!((v - 111.195).abs() < 1e-3, "{v}");
    }
}
