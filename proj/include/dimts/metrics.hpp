#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dimts/array.hpp"

namespace dimts {

/// Fixed scale of the correlational score, kept verbatim for comparability
/// with published tables (it does not depend on the channel count).
inline constexpr double kCorrelationalScoreScale = 0.1;

struct DatasetPair {
    DenseArray real;       // [M_r, L, C]
    DenseArray synthetic;  // [M_s, L, C]
    std::vector<std::string> channel_names;  // optional, defaults to ch<i>

    void validate() const;
    std::size_t real_windows() const { return real.dim(0); }
    std::size_t synthetic_windows() const { return synthetic.dim(0); }
    std::size_t length() const { return real.dim(1); }
    std::size_t channels() const { return real.dim(2); }
};

enum class DistanceKind { js, kl };
DistanceKind parse_distance(const std::string& name);
std::string distance_name(DistanceKind d);

struct MetricOptions {
    std::size_t bins = 50;
    std::size_t max_lag = 0;  // 0 -> length / 4
    DistanceKind distance = DistanceKind::js;
};

struct MetricReport {
    double correlational = 0.0;
    double mdd = 0.0;
    double acd = 0.0;
    double sd = 0.0;
    double kd = 0.0;
    double vds = 0.0;
    double fdds = 0.0;

    std::vector<std::string> channel_names;
    std::vector<std::string> pair_names;
    std::vector<double> mdd_per_channel, acd_per_channel, sd_per_channel, kd_per_channel,
        vds_per_channel;
    std::vector<double> correlational_per_pair, fdds_per_pair;

    std::size_t real_windows = 0, synthetic_windows = 0, length = 0, channels = 0;
    std::size_t bins = 0, max_lag = 0;
    std::string distance;

    std::string to_json() const;   // pretty-printed, key-sorted
    std::string to_table() const;  // fixed-width human-readable summary
};

// -- individual metrics ------------------------------------------------------

double correlational_score(const DatasetPair& pair);
double mdd(const DatasetPair& pair, std::size_t bins = 50);
double acd(const DatasetPair& pair, std::size_t max_lag);
double skewness_diff(const DatasetPair& pair);
double kurtosis_diff(const DatasetPair& pair);
double vds(const DatasetPair& pair, DistanceKind distance = DistanceKind::js,
           std::size_t bins = 50);
double fdds(const DatasetPair& pair, DistanceKind distance = DistanceKind::js,
            std::size_t bins = 50);

MetricReport evaluate_all(const DatasetPair& pair, const MetricOptions& options = {});

// -- building blocks exposed for verification --------------------------------

/// Mean absolute bin-wise difference of two probability vectors.
double histogram_difference(const std::vector<double>& p, const std::vector<double>& q);

/// Natural-log divergences over probability vectors of equal size.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// Sample autocorrelation r_0..r_max_lag of one series; r_0 == 1.
std::vector<double> acf(const std::vector<double>& x, std::size_t max_lag);

/// Probability histogram anchored to [lo, hi]. With `overflow`, two extra
/// bins (below / above the range) book-end the interior bins; otherwise
/// out-of-range values are clipped into the edge bins.
std::vector<double> anchored_histogram(const std::vector<double>& values, double lo, double hi,
                                       std::size_t bins, bool overflow);

}  // namespace dimts
