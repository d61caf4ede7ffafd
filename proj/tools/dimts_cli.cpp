// dimts: end-to-end pipeline driver.
//   ingest            CSV -> normalized sliding windows (binary + JSON sidecar)
//   train             Adam optimization of the diffusion objective
//   sample            reverse-diffusion sampling from a checkpoint
//   evaluate          7-metric comparison of real vs synthetic CSVs
//   analyze-channels  similarity matrix and channel scan order
// Exit codes: 0 success, 1 usage, 2 data, 3 numeric.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dimts/config.hpp"
#include "dimts/dataset.hpp"
#include "dimts/errors.hpp"
#include "dimts/metrics.hpp"
#include "dimts/permutation.hpp"
#include "dimts/train.hpp"

namespace fs = std::filesystem;
using namespace dimts;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw data_error("failed to write: " + path);
}

struct TrainArgs {
    std::string config_path, data, out_dir, resume;
    std::size_t seed = 0, steps = 0, length = 0, stride = 0, batch_size = 0;
    double lambda1 = 0.0, lambda2 = 0.0, lr = 0.0;
    std::vector<std::string> sets;
};

RunConfig effective_config(const TrainArgs& a, const CLI::App* cmd) {
    RunConfig cfg;
    if (!a.config_path.empty()) cfg = load_config_file(a.config_path);
    for (const auto& kv : a.sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw usage_error("--set expects key=value, got: " + kv);
        set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (cmd->count("--data")) cfg.data = a.data;
    if (cmd->count("--seed")) cfg.model.seed = a.seed;
    if (cmd->count("--steps")) cfg.steps = a.steps;
    if (cmd->count("--length")) cfg.model.seq_len = a.length;
    if (cmd->count("--stride")) cfg.stride = a.stride;
    if (cmd->count("--lambda1")) cfg.weights.lambda1 = a.lambda1;
    if (cmd->count("--lambda2")) cfg.weights.lambda2 = a.lambda2;
    if (cmd->count("--lr")) cfg.lr = a.lr;
    if (cmd->count("--batch-size")) cfg.batch_size = a.batch_size;
    return cfg;
}

WindowedDataset resolve_dataset(const RunConfig& cfg) {
    if (cfg.data.empty()) throw usage_error("no dataset given: pass --data or set data= in the config");
    if (fs::is_directory(cfg.data)) return load_dataset(cfg.data);
    return ingest_csv(cfg.data, cfg.model.seq_len, cfg.stride);
}

int run(int argc, char** argv) {
    CLI::App app{"dimts: selective-scan diffusion for multichannel time series"};
    app.require_subcommand(1);

    // ingest ------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "window and normalize a CSV series");
    std::string in_data, in_out;
    std::size_t in_length = 24, in_stride = 1;
    ingest->add_option("--data", in_data, "input CSV")->required();
    ingest->add_option("--length", in_length, "window length");
    ingest->add_option("--stride", in_stride, "window stride");
    ingest->add_option("--out-dir", in_out, "output directory")->required();

    // train ---------------------------------------------------------------
    auto* train = app.add_subcommand("train", "optimize a model on windowed data");
    TrainArgs ta;
    train->add_option("--config", ta.config_path, "key=value config file");
    train->add_option("--data", ta.data, "CSV path or ingested dataset directory");
    train->add_option("--out-dir", ta.out_dir, "run output directory")->required();
    train->add_option("--seed", ta.seed, "run seed");
    train->add_option("--steps", ta.steps, "optimization steps");
    train->add_option("--length", ta.length, "window length (CSV input)");
    train->add_option("--stride", ta.stride, "window stride (CSV input)");
    train->add_option("--lambda1", ta.lambda1, "Fourier loss weight");
    train->add_option("--lambda2", ta.lambda2, "correlation loss weight");
    train->add_option("--lr", ta.lr, "Adam learning rate");
    train->add_option("--batch-size", ta.batch_size, "windows per step");
    train->add_option("--resume", ta.resume, "checkpoint to continue from");
    train->add_option("--set", ta.sets, "extra key=value overrides")->take_all();

    // sample --------------------------------------------------------------
    auto* sample = app.add_subcommand("sample", "draw synthetic windows from a checkpoint");
    std::string sa_ckpt, sa_out;
    std::size_t sa_num = 4, sa_seed = 0, sa_length = 0;
    double sa_sigma = 1.0;
    sample->add_option("--checkpoint", sa_ckpt, "trained checkpoint")->required();
    sample->add_option("--num", sa_num, "number of windows");
    sample->add_option("--seed", sa_seed, "sampling seed");
    sample->add_option("--sigma-scale", sa_sigma, "reverse-noise scale (0 = deterministic)");
    sample->add_option("--length", sa_length, "expected window length (schema guard)");
    sample->add_option("--out-dir", sa_out, "output directory")->required();

    // evaluate ------------------------------------------------------------
    auto* eval = app.add_subcommand("evaluate", "compare real and synthetic CSVs");
    std::string ev_real, ev_synth, ev_out, ev_distance = "js";
    std::size_t ev_length = 24, ev_stride = 1, ev_bins = 50, ev_maxlag = 0;
    eval->add_option("--real", ev_real, "real CSV")->required();
    eval->add_option("--synthetic", ev_synth, "synthetic CSV")->required();
    eval->add_option("--length", ev_length, "window length for plain series");
    eval->add_option("--stride", ev_stride, "window stride for plain series");
    eval->add_option("--bins", ev_bins, "histogram bins");
    eval->add_option("--max-lag", ev_maxlag, "autocorrelation max lag (0 = length/4)");
    eval->add_option("--distance", ev_distance, "distribution distance: js or kl");
    eval->add_option("--out-dir", ev_out, "output directory")->required();

    // analyze-channels ------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze-channels", "channel similarity and scan order");
    std::string an_data, an_out;
    std::size_t an_length = 24, an_stride = 1;
    analyze->add_option("--data", an_data, "input CSV")->required();
    analyze->add_option("--length", an_length, "window length");
    analyze->add_option("--stride", an_stride, "window stride");
    analyze->add_option("--out-dir", an_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (*ingest) {
        WindowedDataset ds = ingest_csv(in_data, in_length, in_stride);
        save_dataset(in_out, ds);
        std::cout << "ingested " << ds.num_windows() << " windows of [" << ds.length() << " x "
                  << ds.channels() << "] into " << in_out << "\n";
        return 0;
    }

    if (*train) {
        RunConfig cfg = effective_config(ta, train);
        WindowedDataset ds = resolve_dataset(cfg);
        TrainResult res = run_train(cfg, ds, ta.out_dir, ta.resume);
        std::cout << "trained " << res.steps_run << " steps; final loss " << res.final_total
                  << "\ncheckpoint: " << res.checkpoint_path << "\nloss log:  " << res.log_path
                  << "\n";
        return 0;
    }

    if (*sample) {
        if (sa_num == 0) throw usage_error("--num must be positive");
        SampleResult res = run_sample(sa_ckpt, sa_num, sa_seed, sa_sigma);
        if (sa_length != 0 && sa_length != res.samples.dim(1))
            throw data_error("checkpoint generates windows of length " +
                             std::to_string(res.samples.dim(1)) + ", requested " +
                             std::to_string(sa_length));
        fs::create_directories(sa_out);
        std::string path = sa_out + "/samples.csv";
        write_csv(path, samples_to_table(res.samples, res.channel_names));
        std::cout << "sampled " << res.samples.dim(0) << " windows into " << path << "\n";
        return 0;
    }

    if (*eval) {
        DatasetPair pair;
        std::vector<std::string> synth_names;
        pair.real = eval_windows(read_csv(ev_real), ev_length, ev_stride, pair.channel_names);
        pair.synthetic = eval_windows(read_csv(ev_synth), ev_length, ev_stride, synth_names);
        if (synth_names != pair.channel_names)
            throw data_error("real and synthetic channel names differ");
        MetricOptions opt;
        opt.bins = ev_bins;
        opt.max_lag = ev_maxlag;
        opt.distance = parse_distance(ev_distance);
        MetricReport report = evaluate_all(pair, opt);
        fs::create_directories(ev_out);
        write_text(ev_out + "/report.json", report.to_json());
        std::cout << report.to_table();
        return 0;
    }

    if (*analyze) {
        WindowedDataset ds = ingest_csv(an_data, an_length, an_stride);
        SimilarityMatrix sim = pearson_similarity(ds.windows);
        ChannelPermutation perm = solve_ordering(sim);

        nlohmann::json sim_rows = nlohmann::json::array();
        for (std::size_t i = 0; i < sim.channels(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < sim.channels(); ++j) row.push_back(sim.G.at(i, j));
            sim_rows.push_back(row);
        }
        std::vector<std::string> ordered;
        for (std::size_t j : perm.pi) ordered.push_back(ds.channel_names[j]);
        nlohmann::json out = {{"channels", ds.channel_names},
                              {"similarity", sim_rows},
                              {"fiedler", perm.fiedler.vec()},
                              {"lambda", perm.lambda},
                              {"permutation", perm.pi},
                              {"ordered_channels", ordered},
                              {"objective", perm.objective},
                              {"adjacent_similarity", adjacent_similarity(perm.pi, sim)},
                              {"fallback", perm.fallback}};
        fs::create_directories(an_out);
        write_text(an_out + "/channels.json", out.dump(2) + "\n");
        std::cout << "scan order:";
        for (const auto& name : ordered) std::cout << " " << name;
        std::cout << (perm.fallback ? " (degenerate similarity, identity fallback)" : "") << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
