#pragma once

#include <cmath>

namespace geobeam {

// All powers are carried in linear milliwatts internally; dBm appears only
// at configuration and reporting boundaries.

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

/// SINR threshold delivering `rate` bits/s/Hz: 2^rate - 1.
inline double rate_to_sinr(double rate) { return std::exp2(rate) - 1.0; }

inline double sinr_to_rate(double sinr) { return std::log2(1.0 + sinr); }

}  // namespace geobeam
