#include "dimts/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dimts/errors.hpp"

namespace dimts {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty())
        throw data_error("config key " + key + ": cannot parse '" + value + "' as a number");
    return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty())
        throw data_error("config key " + key + ": cannot parse '" + value +
                         "' as a non-negative integer");
    return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::string cell;
    std::istringstream in(value);
    while (std::getline(in, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(parse_size(key, cell));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    weights.validate();
    if (!(lr > 0.0)) throw data_error("learning rate must be positive");
    if (steps == 0) throw data_error("steps must be positive");
    if (batch_size < 2) throw data_error("batch size must be at least 2");
    if (stride == 0) throw data_error("stride must be positive");
    if (!(sigma_scale >= 0.0)) throw data_error("sigma_scale must be non-negative");
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data") cfg.data = value;
    else if (key == "length") cfg.model.seq_len = parse_size(key, value);
    else if (key == "channels") cfg.model.channels = parse_size(key, value);
    else if (key == "hidden_dim") cfg.model.hidden_dim = parse_size(key, value);
    else if (key == "state_dim") cfg.model.state_dim = parse_size(key, value);
    else if (key == "num_encoders") cfg.model.num_encoders = parse_size(key, value);
    else if (key == "num_difm") cfg.model.num_difm = parse_size(key, value);
    else if (key == "num_dipm") cfg.model.num_dipm = parse_size(key, value);
    else if (key == "dilation_factors") cfg.model.dilation_factors = parse_size_list(key, value);
    else if (key == "lag_weight0") cfg.model.lag_weight0 = parse_double(key, value);
    else if (key == "lag_weight") cfg.model.lag_weight = parse_double(key, value);
    else if (key == "diffusion_steps") cfg.model.diffusion_steps = parse_size(key, value);
    else if (key == "seed") cfg.model.seed = parse_size(key, value);
    else if (key == "lambda1") cfg.weights.lambda1 = parse_double(key, value);
    else if (key == "lambda2") cfg.weights.lambda2 = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "steps") cfg.steps = parse_size(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_size(key, value);
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_size(key, value);
    else if (key == "stride") cfg.stride = parse_size(key, value);
    else if (key == "sigma_scale") cfg.sigma_scale = parse_double(key, value);
    else throw data_error("unknown config key: " + key);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

std::string config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "data=" << cfg.data << "\n";
    out << "length=" << cfg.model.seq_len << "\n";
    out << "channels=" << cfg.model.channels << "\n";
    out << "hidden_dim=" << cfg.model.hidden_dim << "\n";
    out << "state_dim=" << cfg.model.state_dim << "\n";
    out << "num_encoders=" << cfg.model.num_encoders << "\n";
    out << "num_difm=" << cfg.model.num_difm << "\n";
    out << "num_dipm=" << cfg.model.num_dipm << "\n";
    out << "dilation_factors=" << join_sizes(cfg.model.dilation_factors) << "\n";
    out << "lag_weight0=" << fmt(cfg.model.lag_weight0) << "\n";
    out << "lag_weight=" << fmt(cfg.model.lag_weight) << "\n";
    out << "diffusion_steps=" << cfg.model.diffusion_steps << "\n";
    out << "seed=" << cfg.model.seed << "\n";
    out << "lambda1=" << fmt(cfg.weights.lambda1) << "\n";
    out << "lambda2=" << fmt(cfg.weights.lambda2) << "\n";
    out << "lr=" << fmt(cfg.lr) << "\n";
    out << "steps=" << cfg.steps << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "checkpoint_every=" << cfg.checkpoint_every << "\n";
    out << "stride=" << cfg.stride << "\n";
    out << "sigma_scale=" << fmt(cfg.sigma_scale) << "\n";
    return out.str();
}

void write_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << config_text(cfg);
    if (!out) throw data_error("failed to write: " + path);
}

nlohmann::json config_json(const RunConfig& cfg) {
    return {{"data", cfg.data},
            {"length", cfg.model.seq_len},
            {"channels", cfg.model.channels},
            {"hidden_dim", cfg.model.hidden_dim},
            {"state_dim", cfg.model.state_dim},
            {"num_encoders", cfg.model.num_encoders},
            {"num_difm", cfg.model.num_difm},
            {"num_dipm", cfg.model.num_dipm},
            {"dilation_factors", cfg.model.dilation_factors},
            {"lag_weight0", cfg.model.lag_weight0},
            {"lag_weight", cfg.model.lag_weight},
            {"diffusion_steps", cfg.model.diffusion_steps},
            {"seed", cfg.model.seed},
            {"lambda1", cfg.weights.lambda1},
            {"lambda2", cfg.weights.lambda2},
            {"lr", cfg.lr},
            {"steps", cfg.steps},
            {"batch_size", cfg.batch_size},
            {"checkpoint_every", cfg.checkpoint_every},
            {"stride", cfg.stride},
            {"sigma_scale", cfg.sigma_scale}};
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        cfg.data = j.at("data").get<std::string>();
        cfg.model.seq_len = j.at("length").get<std::size_t>();
        cfg.model.channels = j.at("channels").get<std::size_t>();
        cfg.model.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        cfg.model.state_dim = j.at("state_dim").get<std::size_t>();
        cfg.model.num_encoders = j.at("num_encoders").get<std::size_t>();
        cfg.model.num_difm = j.at("num_difm").get<std::size_t>();
        cfg.model.num_dipm = j.at("num_dipm").get<std::size_t>();
        cfg.model.dilation_factors = j.at("dilation_factors").get<std::vector<std::size_t>>();
        cfg.model.lag_weight0 = j.at("lag_weight0").get<double>();
        cfg.model.lag_weight = j.at("lag_weight").get<double>();
        cfg.model.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
        cfg.model.seed = j.at("seed").get<std::size_t>();
        cfg.weights.lambda1 = j.at("lambda1").get<double>();
        cfg.weights.lambda2 = j.at("lambda2").get<double>();
        cfg.lr = j.at("lr").get<double>();
        cfg.steps = j.at("steps").get<std::size_t>();
        cfg.batch_size = j.at("batch_size").get<std::size_t>();
        cfg.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
        cfg.stride = j.at("stride").get<std::size_t>();
        cfg.sigma_scale = j.at("sigma_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed run config: ") + e.what());
    }
    return cfg;
}

}  // namespace dimts
