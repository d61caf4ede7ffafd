#include "dimts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dimts/errors.hpp"

namespace dimts {

namespace {

constexpr double kKlFloor = 1e-12;
constexpr double kVarianceFloor = 1e-24;

double value_at(const DenseArray& a, std::size_t m, std::size_t t, std::size_t c) {
    return a[(m * a.dim(1) + t) * a.dim(2) + c];
}

std::vector<double> pooled_channel(const DenseArray& a, std::size_t c) {
    std::vector<double> out;
    out.reserve(a.dim(0) * a.dim(1));
    for (std::size_t m = 0; m < a.dim(0); ++m)
        for (std::size_t t = 0; t < a.dim(1); ++t) out.push_back(value_at(a, m, t, c));
    return out;
}

struct Moments {
    double mean = 0.0, var = 0.0, m3 = 0.0, m4 = 0.0;
};

Moments pooled_moments(const std::vector<double>& v) {
    Moments mo;
    for (double x : v) mo.mean += x;
    mo.mean /= static_cast<double>(v.size());
    for (double x : v) {
        double d = x - mo.mean;
        mo.var += d * d;
        mo.m3 += d * d * d;
        mo.m4 += d * d * d * d;
    }
    double n = static_cast<double>(v.size());
    mo.var /= n;
    mo.m3 /= n;
    mo.m4 /= n;
    return mo;
}

std::string channel_label(const DatasetPair& pair, std::size_t c) {
    if (c < pair.channel_names.size()) return pair.channel_names[c];
    return "ch" + std::to_string(c);
}

/// Signed pooled Pearson correlation matrix of one side.
std::vector<std::vector<double>> correlation_matrix(const DenseArray& a, const DatasetPair& pair,
                                                    const char* side) {
    std::size_t C = a.dim(2);
    std::vector<std::vector<double>> vals(C);
    std::vector<Moments> mo(C);
    for (std::size_t c = 0; c < C; ++c) {
        vals[c] = pooled_channel(a, c);
        mo[c] = pooled_moments(vals[c]);
        if (mo[c].var <= kVarianceFloor)
            throw data_error(std::string(side) + " channel " + channel_label(pair, c) +
                             " has zero variance");
    }
    std::vector<std::vector<double>> corr(C, std::vector<double>(C, 1.0));
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = i + 1; j < C; ++j) {
            double cov = 0.0;
            for (std::size_t k = 0; k < vals[i].size(); ++k)
                cov += (vals[i][k] - mo[i].mean) * (vals[j][k] - mo[j].mean);
            cov /= static_cast<double>(vals[i].size());
            double r = cov / std::sqrt(mo[i].var * mo[j].var);
            corr[i][j] = corr[j][i] = r;
        }
    }
    return corr;
}

/// Pearson correlation of channels (i, j) inside one window; 0 when a
/// channel is flat there (matching the training-loss convention).
double window_correlation(const DenseArray& a, std::size_t m, std::size_t i, std::size_t j) {
    std::size_t L = a.dim(1);
    double mi = 0.0, mj = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
        mi += value_at(a, m, t, i);
        mj += value_at(a, m, t, j);
    }
    mi /= static_cast<double>(L);
    mj /= static_cast<double>(L);
    double cov = 0.0, vi = 0.0, vj = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
        double di = value_at(a, m, t, i) - mi, dj = value_at(a, m, t, j) - mj;
        cov += di * dj;
        vi += di * di;
        vj += dj * dj;
    }
    std::size_t n = L;
    if (vi / n <= kVarianceFloor || vj / n <= kVarianceFloor) return 0.0;
    return cov / std::sqrt(vi * vj);
}

void anchor_range(const std::vector<double>& values, double& lo, double& hi) {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    }
}

double divergence(DistanceKind d, const std::vector<double>& p, const std::vector<double>& q) {
    return d == DistanceKind::js ? js_divergence(p, q) : kl_divergence(p, q);
}

std::vector<std::pair<std::size_t, std::size_t>> index_pairs(std::size_t C) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i + 1; j < C; ++j) out.emplace_back(i, j);
    return out;
}

}  // namespace

void DatasetPair::validate() const {
    if (real.ndim() != 3 || synthetic.ndim() != 3)
        throw data_error("datasets must be [windows, length, channels]");
    if (real.dim(0) == 0 || synthetic.dim(0) == 0) throw data_error("empty dataset");
    if (real.dim(1) != synthetic.dim(1) || real.dim(2) != synthetic.dim(2))
        throw data_error("datasets must share window length and channel count");
    if (!real.all_finite() || !synthetic.all_finite())
        throw data_error("datasets must be finite");
    if (!channel_names.empty() && channel_names.size() != real.dim(2))
        throw data_error("channel name count mismatch");
}

DistanceKind parse_distance(const std::string& name) {
    if (name == "js") return DistanceKind::js;
    if (name == "kl") return DistanceKind::kl;
    throw usage_error("unknown distance '" + name + "' (expected js or kl)");
}

std::string distance_name(DistanceKind d) { return d == DistanceKind::js ? "js" : "kl"; }

double histogram_difference(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty()) throw data_error("histogram size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return acc / static_cast<double>(p.size());
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty()) throw data_error("histogram size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) acc += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
    return acc;
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty()) throw data_error("histogram size mismatch");
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
}

std::vector<double> acf(const std::vector<double>& x, std::size_t max_lag) {
    if (x.size() < 2) throw data_error("autocorrelation needs at least two points");
    if (max_lag >= x.size()) throw data_error("autocorrelation lag exceeds series length");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double denom = 0.0;
    for (double v : x) denom += (v - mean) * (v - mean);
    if (denom / static_cast<double>(x.size()) <= kVarianceFloor)
        throw data_error("zero-variance window");
    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double num = 0.0;
        for (std::size_t k = 0; k + lag < x.size(); ++k)
            num += (x[k] - mean) * (x[k + lag] - mean);
        r[lag] = num / denom;
    }
    return r;
}

std::vector<double> anchored_histogram(const std::vector<double>& values, double lo, double hi,
                                       std::size_t bins, bool overflow) {
    if (bins == 0) throw data_error("histogram needs at least one bin");
    if (!(hi > lo)) throw data_error("histogram range must be non-empty");
    std::vector<double> h(overflow ? bins + 2 : bins, 0.0);
    if (values.empty()) return h;
    double width = (hi - lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t idx;
        if (v < lo) {
            idx = 0;  // below-range overflow bin, or clipped into the first bin
        } else if (v > hi) {
            idx = overflow ? bins + 1 : bins - 1;
        } else {
            std::size_t interior = std::min(static_cast<std::size_t>((v - lo) / width),
                                            bins - 1);
            idx = overflow ? interior + 1 : interior;
        }
        h[idx] += 1.0;
    }
    for (double& b : h) b /= static_cast<double>(values.size());
    return h;
}

double correlational_score(const DatasetPair& pair) {
    pair.validate();
    std::size_t C = pair.channels();
    if (C < 2) return 0.0;
    auto cr = correlation_matrix(pair.real, pair, "real");
    auto cf = correlation_matrix(pair.synthetic, pair, "synthetic");
    double acc = 0.0;
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < C; ++j) acc += std::abs(cr[i][j] - cf[i][j]);
    return kCorrelationalScoreScale * acc;
}

double mdd(const DatasetPair& pair, std::size_t bins) {
    pair.validate();
    double acc = 0.0;
    for (std::size_t c = 0; c < pair.channels(); ++c) {
        for (std::size_t t = 0; t < pair.length(); ++t) {
            std::vector<double> rv, sv;
            rv.reserve(pair.real_windows());
            sv.reserve(pair.synthetic_windows());
            for (std::size_t m = 0; m < pair.real_windows(); ++m)
                rv.push_back(value_at(pair.real, m, t, c));
            for (std::size_t m = 0; m < pair.synthetic_windows(); ++m)
                sv.push_back(value_at(pair.synthetic, m, t, c));
            double lo, hi;
            anchor_range(rv, lo, hi);
            acc += histogram_difference(anchored_histogram(rv, lo, hi, bins, false),
                                        anchored_histogram(sv, lo, hi, bins, false));
        }
    }
    return acc / static_cast<double>(pair.channels() * pair.length());
}

double acd(const DatasetPair& pair, std::size_t max_lag) {
    pair.validate();
    if (max_lag < 1 || max_lag >= pair.length())
        throw data_error("autocorrelation lag must satisfy 1 <= lag < window length");

    double acc = 0.0;
    for (std::size_t c = 0; c < pair.channels(); ++c) {
        auto side_mean_acf = [&](const DenseArray& a, const char* side) {
            std::vector<double> mean_r(max_lag + 1, 0.0);
            std::vector<double> series(pair.length());
            for (std::size_t m = 0; m < a.dim(0); ++m) {
                for (std::size_t t = 0; t < pair.length(); ++t)
                    series[t] = value_at(a, m, t, c);
                std::vector<double> r;
                try {
                    r = acf(series, max_lag);
                } catch (const Error&) {
                    throw data_error(std::string(side) + " channel " + channel_label(pair, c) +
                                     " has a zero-variance window");
                }
                for (std::size_t l = 0; l <= max_lag; ++l) mean_r[l] += r[l];
            }
            for (double& v : mean_r) v /= static_cast<double>(a.dim(0));
            return mean_r;
        };
        auto rr = side_mean_acf(pair.real, "real");
        auto rs = side_mean_acf(pair.synthetic, "synthetic");
        for (std::size_t l = 1; l <= max_lag; ++l) acc += std::abs(rr[l] - rs[l]);
    }
    return acc / static_cast<double>(pair.channels() * max_lag);
}

namespace {

double moment_diff(const DatasetPair& pair, int order) {
    pair.validate();
    double acc = 0.0;
    for (std::size_t c = 0; c < pair.channels(); ++c) {
        auto ratio = [&](const DenseArray& a, const char* side) {
            Moments mo = pooled_moments(pooled_channel(a, c));
            if (mo.var <= kVarianceFloor)
                throw data_error(std::string(side) + " channel " + channel_label(pair, c) +
                                 " has zero variance");
            double sigma = std::sqrt(mo.var);
            return order == 3 ? mo.m3 / (sigma * sigma * sigma) : mo.m4 / (mo.var * mo.var);
        };
        acc += std::abs(ratio(pair.real, "real") - ratio(pair.synthetic, "synthetic"));
    }
    return acc / static_cast<double>(pair.channels());
}

}  // namespace

double skewness_diff(const DatasetPair& pair) { return moment_diff(pair, 3); }
double kurtosis_diff(const DatasetPair& pair) { return moment_diff(pair, 4); }

double vds(const DatasetPair& pair, DistanceKind distance, std::size_t bins) {
    pair.validate();
    double acc = 0.0;
    for (std::size_t c = 0; c < pair.channels(); ++c) {
        std::vector<double> rv = pooled_channel(pair.real, c);
        std::vector<double> sv = pooled_channel(pair.synthetic, c);
        double lo, hi;
        anchor_range(rv, lo, hi);
        acc += divergence(distance, anchored_histogram(rv, lo, hi, bins, true),
                          anchored_histogram(sv, lo, hi, bins, true));
    }
    return acc / static_cast<double>(pair.channels());
}

double fdds(const DatasetPair& pair, DistanceKind distance, std::size_t bins) {
    pair.validate();
    if (pair.channels() < 2) return 0.0;
    if (pair.real_windows() < 2 || pair.synthetic_windows() < 2)
        throw data_error("functional-dependency shift needs at least two windows per side");

    auto pairs = index_pairs(pair.channels());
    double acc = 0.0;
    for (auto [i, j] : pairs) {
        std::vector<double> rv, sv;
        for (std::size_t m = 0; m < pair.real_windows(); ++m)
            rv.push_back(window_correlation(pair.real, m, i, j));
        for (std::size_t m = 0; m < pair.synthetic_windows(); ++m)
            sv.push_back(window_correlation(pair.synthetic, m, i, j));
        double lo, hi;
        anchor_range(rv, lo, hi);
        acc += divergence(distance, anchored_histogram(rv, lo, hi, bins, true),
                          anchored_histogram(sv, lo, hi, bins, true));
    }
    return acc / static_cast<double>(pairs.size());
}

MetricReport evaluate_all(const DatasetPair& pair, const MetricOptions& options) {
    pair.validate();
    MetricReport rep;
    rep.real_windows = pair.real_windows();
    rep.synthetic_windows = pair.synthetic_windows();
    rep.length = pair.length();
    rep.channels = pair.channels();
    rep.bins = options.bins;
    rep.max_lag = options.max_lag != 0 ? options.max_lag : pair.length() / 4;
    rep.distance = distance_name(options.distance);
    for (std::size_t c = 0; c < pair.channels(); ++c)
        rep.channel_names.push_back(channel_label(pair, c));
    for (auto [i, j] : index_pairs(pair.channels()))
        rep.pair_names.push_back(rep.channel_names[i] + ":" + rep.channel_names[j]);

    rep.correlational = correlational_score(pair);
    rep.mdd = mdd(pair, options.bins);
    rep.acd = acd(pair, rep.max_lag);
    rep.sd = skewness_diff(pair);
    rep.kd = kurtosis_diff(pair);
    rep.vds = vds(pair, options.distance, options.bins);
    rep.fdds = fdds(pair, options.distance, options.bins);

    // Per-channel / per-pair breakdowns via single-slice dataset views.
    if (pair.channels() >= 2) {
        auto cr = correlation_matrix(pair.real, pair, "real");
        auto cf = correlation_matrix(pair.synthetic, pair, "synthetic");
        for (auto [i, j] : index_pairs(pair.channels()))
            rep.correlational_per_pair.push_back(std::abs(cr[i][j] - cf[i][j]));
    }
    for (std::size_t c = 0; c < pair.channels(); ++c) {
        DatasetPair slice;
        slice.real = DenseArray({pair.real_windows(), pair.length(), 1});
        slice.synthetic = DenseArray({pair.synthetic_windows(), pair.length(), 1});
        for (std::size_t m = 0; m < pair.real_windows(); ++m)
            for (std::size_t t = 0; t < pair.length(); ++t)
                slice.real[m * pair.length() + t] = value_at(pair.real, m, t, c);
        for (std::size_t m = 0; m < pair.synthetic_windows(); ++m)
            for (std::size_t t = 0; t < pair.length(); ++t)
                slice.synthetic[m * pair.length() + t] = value_at(pair.synthetic, m, t, c);
        rep.mdd_per_channel.push_back(mdd(slice, options.bins));
        rep.acd_per_channel.push_back(acd(slice, rep.max_lag));
        rep.sd_per_channel.push_back(skewness_diff(slice));
        rep.kd_per_channel.push_back(kurtosis_diff(slice));
        rep.vds_per_channel.push_back(vds(slice, options.distance, options.bins));
    }
    if (pair.channels() >= 2) {
        auto pairs = index_pairs(pair.channels());
        for (auto [i, j] : pairs) {
            std::vector<double> rv, sv;
            for (std::size_t m = 0; m < pair.real_windows(); ++m)
                rv.push_back(window_correlation(pair.real, m, i, j));
            for (std::size_t m = 0; m < pair.synthetic_windows(); ++m)
                sv.push_back(window_correlation(pair.synthetic, m, i, j));
            double lo, hi;
            anchor_range(rv, lo, hi);
            rep.fdds_per_pair.push_back(
                divergence(options.distance, anchored_histogram(rv, lo, hi, options.bins, true),
                           anchored_histogram(sv, lo, hi, options.bins, true)));
        }
    }
    return rep;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["metrics"] = {{"correlational", correlational}, {"mdd", mdd}, {"acd", acd}, {"sd", sd},
                    {"kd", kd},                       {"vds", vds}, {"fdds", fdds}};
    j["per_channel"] = {{"names", channel_names},
                        {"mdd", mdd_per_channel},
                        {"acd", acd_per_channel},
                        {"sd", sd_per_channel},
                        {"kd", kd_per_channel},
                        {"vds", vds_per_channel}};
    j["per_pair"] = {{"names", pair_names},
                     {"correlational", correlational_per_pair},
                     {"fdds", fdds_per_pair}};
    j["meta"] = {{"real_windows", real_windows},
                 {"synthetic_windows", synthetic_windows},
                 {"length", length},
                 {"channels", channels},
                 {"bins", bins},
                 {"max_lag", max_lag},
                 {"distance", distance},
                 {"correlational_scale", kCorrelationalScoreScale}};
    return j.dump(2) + "\n";
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "metric" << "score\n";
    auto row = [&](const char* name, double v) {
        os << std::left << std::setw(16) << name << std::scientific << std::setprecision(6) << v
           << "\n";
    };
    row("correlational", correlational);
    row("mdd", mdd);
    row("acd", acd);
    row("sd", sd);
    row("kd", kd);
    row("vds", vds);
    row("fdds", fdds);
    return os.str();
}

}  // namespace dimts
