#include "dimts/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dimts/checkpoint.hpp"
#include "dimts/errors.hpp"

namespace dimts {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open CSV file: " + path);

    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> data;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        std::vector<std::string> cells = split_cells(t);
        if (table.names.empty()) {
            for (const auto& c : cells)
                if (c.empty())
                    throw data_error(path + ":" + std::to_string(lineno) + ": empty header name");
            table.names = cells;
            continue;
        }
        if (cells.size() != table.names.size())
            throw data_error(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(table.names.size()) + " columns, found " +
                             std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[j].size() || cells[j].empty())
                throw data_error(path + ":" + std::to_string(lineno) + ": column " +
                                 std::to_string(j + 1) + " (" + table.names[j] +
                                 "): cannot parse '" + cells[j] + "' as a number");
            data.push_back(v);
        }
    }
    if (table.names.empty()) throw data_error(path + ": missing header row");
    if (data.empty()) throw data_error(path + ": no data rows");
    std::size_t rows = data.size() / table.names.size();
    table.values = DenseArray({rows, table.names.size()}, std::move(data));
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    for (std::size_t j = 0; j < table.names.size(); ++j)
        out << (j ? "," : "") << table.names[j];
    out << "\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t j = 0; j < table.cols(); ++j)
            out << (j ? "," : "") << fmt(table.values.at(r, j));
        out << "\n";
    }
    if (!out) throw data_error("failed to write: " + path);
}

DenseArray WindowedDataset::window(std::size_t m) const {
    if (m >= num_windows()) throw data_error("window index out of range");
    std::size_t L = length(), C = channels();
    DenseArray w({L, C});
    std::copy_n(windows.data() + m * L * C, L * C, w.data());
    return w;
}

DenseArray WindowedDataset::normalize(const DenseArray& raw) const {
    std::size_t C = channel_names.size();
    if (raw.ndim() == 0 || raw.shape().back() != C)
        throw data_error("normalize: trailing axis must have " + std::to_string(C) + " channels");
    DenseArray out = raw;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t c = i % C;
        out[i] = 2.0 * (out[i] - ch_min[c]) / (ch_max[c] - ch_min[c]) - 1.0;
    }
    return out;
}

DenseArray WindowedDataset::denormalize(const DenseArray& scaled) const {
    std::size_t C = channel_names.size();
    if (scaled.ndim() == 0 || scaled.shape().back() != C)
        throw data_error("denormalize: trailing axis must have " + std::to_string(C) +
                         " channels");
    DenseArray out = scaled;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t c = i % C;
        out[i] = (out[i] + 1.0) * 0.5 * (ch_max[c] - ch_min[c]) + ch_min[c];
    }
    return out;
}

WindowedDataset window_table(const CsvTable& table, std::size_t length, std::size_t stride) {
    if (length < 2) throw data_error("window length must be at least 2");
    if (stride == 0) throw data_error("stride must be positive");
    std::size_t R = table.rows(), C = table.cols();
    if (R < length)
        throw data_error("series has " + std::to_string(R) + " rows, shorter than window length " +
                         std::to_string(length));

    WindowedDataset ds;
    ds.channel_names = table.names;
    ds.stride = stride;
    ds.ch_min.assign(C, std::numeric_limits<double>::infinity());
    ds.ch_max.assign(C, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            double v = table.values.at(r, c);
            ds.ch_min[c] = std::min(ds.ch_min[c], v);
            ds.ch_max[c] = std::max(ds.ch_max[c], v);
        }
    for (std::size_t c = 0; c < C; ++c)
        if (!(ds.ch_max[c] > ds.ch_min[c]))
            throw data_error("channel " + table.names[c] + " is constant; cannot scale to [-1,1]");

    std::size_t M = (R - length) / stride + 1;
    ds.windows = DenseArray({M, length, C});
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < length; ++t)
            for (std::size_t c = 0; c < C; ++c) {
                double v = table.values.at(m * stride + t, c);
                ds.windows[(m * length + t) * C + c] =
                    2.0 * (v - ds.ch_min[c]) / (ds.ch_max[c] - ds.ch_min[c]) - 1.0;
            }
    return ds;
}

WindowedDataset ingest_csv(const std::string& path, std::size_t length, std::size_t stride) {
    return window_table(read_csv(path), length, stride);
}

void save_dataset(const std::string& dir, const WindowedDataset& ds) {
    std::filesystem::create_directories(dir);
    save_tensor(dir + "/windows.bin", ds.windows);
    nlohmann::json meta = {{"channel_names", ds.channel_names},
                           {"ch_min", ds.ch_min},
                           {"ch_max", ds.ch_max},
                           {"stride", ds.stride},
                           {"num_windows", ds.num_windows()},
                           {"length", ds.length()},
                           {"channels", ds.channels()}};
    std::ofstream out(dir + "/dataset.json");
    if (!out) throw data_error("cannot open for writing: " + dir + "/dataset.json");
    out << meta.dump(2) << "\n";
}

WindowedDataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/dataset.json");
    if (!in) throw data_error("not an ingested dataset directory (missing dataset.json): " + dir);
    nlohmann::json meta = nlohmann::json::parse(in, nullptr, false);
    if (meta.is_discarded()) throw data_error("malformed dataset.json in " + dir);

    WindowedDataset ds;
    try {
        ds.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
        ds.ch_min = meta.at("ch_min").get<std::vector<double>>();
        ds.ch_max = meta.at("ch_max").get<std::vector<double>>();
        ds.stride = meta.at("stride").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error("dataset.json in " + dir + ": " + e.what());
    }
    ds.windows = load_tensor(dir + "/windows.bin");
    if (ds.windows.ndim() != 3 || ds.windows.dim(2) != ds.channel_names.size())
        throw data_error("windows.bin does not match dataset.json in " + dir);
    if (ds.ch_min.size() != ds.channel_names.size() ||
        ds.ch_max.size() != ds.channel_names.size())
        throw data_error("dataset.json in " + dir + ": scaling arrays do not match channels");
    return ds;
}

DenseArray eval_windows(const CsvTable& table, std::size_t length, std::size_t stride,
                        std::vector<std::string>& names_out) {
    if (!table.names.empty() && table.names[0] == "window") {
        std::size_t C = table.cols() - 1;
        if (C == 0) throw data_error("windowed CSV has no channel columns");
        names_out.assign(table.names.begin() + 1, table.names.end());

        std::vector<std::size_t> starts = {0};
        for (std::size_t r = 1; r < table.rows(); ++r)
            if (table.values.at(r, 0) != table.values.at(r - 1, 0)) starts.push_back(r);
        starts.push_back(table.rows());

        std::size_t L = starts[1] - starts[0];
        if (L < 2) throw data_error("windowed CSV groups must have at least 2 rows");
        std::size_t M = starts.size() - 1;
        DenseArray w({M, L, C});
        for (std::size_t m = 0; m < M; ++m) {
            if (starts[m + 1] - starts[m] != L)
                throw data_error("windowed CSV group " + std::to_string(m) + " has " +
                                 std::to_string(starts[m + 1] - starts[m]) + " rows, expected " +
                                 std::to_string(L));
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t c = 0; c < C; ++c)
                    w[(m * L + t) * C + c] = table.values.at(starts[m] + t, c + 1);
        }
        return w;
    }

    // Plain series: slide raw (unscaled) windows.
    if (length < 2) throw data_error("window length must be at least 2");
    if (stride == 0) throw data_error("stride must be positive");
    std::size_t R = table.rows(), C = table.cols();
    if (R < length)
        throw data_error("series has " + std::to_string(R) + " rows, shorter than window length " +
                         std::to_string(length));
    names_out = table.names;
    std::size_t M = (R - length) / stride + 1;
    DenseArray w({M, length, C});
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < length; ++t)
            for (std::size_t c = 0; c < C; ++c)
                w[(m * length + t) * C + c] = table.values.at(m * stride + t, c);
    return w;
}

CsvTable samples_to_table(const DenseArray& samples, const std::vector<std::string>& names) {
    if (samples.ndim() != 3) throw data_error("samples must be [M x L x C]");
    std::size_t M = samples.dim(0), L = samples.dim(1), C = samples.dim(2);
    if (names.size() != C) throw data_error("channel name count does not match samples");

    CsvTable table;
    table.names.reserve(C + 1);
    table.names.push_back("window");
    table.names.insert(table.names.end(), names.begin(), names.end());
    table.values = DenseArray({M * L, C + 1});
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < L; ++t) {
            table.values.at(m * L + t, 0) = static_cast<double>(m);
            for (std::size_t c = 0; c < C; ++c)
                table.values.at(m * L + t, c + 1) = samples[(m * L + t) * C + c];
        }
    return table;
}

}  // namespace dimts
