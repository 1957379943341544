#pragma once

// Equirectangular projection between geodetic degrees and local meters,
// centered at the region origin. Adequate for regions up to tens of km.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cellsim {

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

struct LocalXY {
    double x = 0.0;
    double y = 0.0;
};

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

inline LocalXY geo_to_local(double lat, double lon, double origin_lat,
                            double origin_lon) {
    if (std::abs(lat) >= 85.0 || std::abs(origin_lat) >= 85.0)
        throw std::invalid_argument("geo_to_local: latitude out of range (|lat| < 85)");
    double x = (lon - origin_lon) * kDegToRad * kEarthRadiusM *
               std::cos(origin_lat * kDegToRad);
    double y = (lat - origin_lat) * kDegToRad * kEarthRadiusM;
    return {x, y};
}

inline GeoPoint local_to_geo(double x, double y, double origin_lat,
                             double origin_lon) {
    if (std::abs(origin_lat) >= 85.0)
        throw std::invalid_argument("local_to_geo: latitude out of range (|lat| < 85)");
    double lat = origin_lat + y / (kDegToRad * kEarthRadiusM);
    double lon = origin_lon +
                 x / (kDegToRad * kEarthRadiusM * std::cos(origin_lat * kDegToRad));
    return {lat, lon};
}

/// Azimuth from `from` to `to` in degrees, compass convention
/// (0 = +y/north, 90 = +x/east), wrapped to [0, 360).
inline double azimuth_deg(const LocalXY& from, const LocalXY& to) {
    double a = std::atan2(to.x - from.x, to.y - from.y) / kDegToRad;
    if (a < 0.0) a += 360.0;
    return a;
}

/// Wrap an angle difference to (-180, 180].
inline double wrap_deg(double a) {
    a = std::fmod(a, 360.0);
    if (a <= -180.0) a += 360.0;
    if (a > 180.0) a -= 360.0;
    return a;
}

}  // namespace cellsim
