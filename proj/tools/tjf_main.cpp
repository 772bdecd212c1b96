// tjf: multi-agent trajectory forecasting CLI.
//
// Subcommands: generate, train, predict, evaluate, dump-attention.
// Exit codes: 0 success, 2 usage/config, 3 numerical failure,
//             4 checkpoint/dataset incompatibility, 5 I/O.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tjf/checkpoint.hpp"
#include "tjf/data.hpp"
#include "tjf/errors.hpp"
#include "tjf/kv_file.hpp"
#include "tjf/metrics.hpp"
#include "tjf/model.hpp"
#include "tjf/synthetic.hpp"
#include "tjf/trainer.hpp"

namespace fs = std::filesystem;
using namespace tjf;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIncompatible = 4;
constexpr int kExitIo = 5;

fs::path default_out_dir(const std::string& leaf) {
    if (const char* env = std::getenv("TJF_OUT_DIR")) return fs::path(env) / leaf;
    return fs::path(leaf);
}

struct Dataset {
    std::vector<Demonstration> demos;
    DatasetManifest manifest;
};

Dataset load_dataset(const fs::path& dir) {
    const fs::path csv = dir / "trajectories.csv";
    const fs::path manifest = dir / "manifest.txt";
    if (!fs::exists(csv)) throw IoError("dataset file '" + csv.string() + "' does not exist");
    if (!fs::exists(manifest)) throw IoError("dataset manifest '" + manifest.string() + "' does not exist");

    Dataset ds;
    ds.manifest = DatasetManifest::load(manifest);
    IngestResult ingest = ingest_csv(csv, ds.manifest.sample_rate_hz);
    if (ingest.dropped_frames > 0) {
        std::cerr << "note: dropped " << ingest.dropped_frames << " incomplete frames\n";
    }
    ds.demos = std::move(ingest.demos);
    for (auto& d : ds.demos) {
        d.agent_roles = ds.manifest.agent_roles;
        if (!ds.manifest.normalized) d = normalize(d, ds.manifest.norm);
        d.validate();
    }
    return ds;
}

ModelConfig load_model_config(const std::string& config_path,
                              const std::vector<std::string>& overrides, const Dataset& ds) {
    KvFile kv;
    if (!config_path.empty()) kv = KvFile::load(config_path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not KEY=VALUE");
        kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
    ModelConfig defaults;
    defaults.agent_count = ds.manifest.agent_count;
    ModelConfig config = config_from_kv(kv, defaults);
    if (config.agent_count != ds.manifest.agent_count) {
        throw IncompatibilityError("config expects K=" + std::to_string(config.agent_count) +
                                   ", dataset has K=" + std::to_string(ds.manifest.agent_count));
    }
    return config;
}

PredictFn model_predictor(const ForecastModel& model) {
    return [&model](const PredictionTask& task) { return rollout(model, task); };
}

int run_generate(const std::string& scenario_name, std::int64_t k, std::int64_t t, std::int64_t n,
                 double hz, std::uint64_t seed, double noise, const std::string& units,
                 const fs::path& out_dir) {
    SyntheticOptions opt;
    opt.scenario = parse_scenario(scenario_name);
    opt.agent_count = k;
    opt.frame_count = t;
    opt.demo_count = n;
    opt.sample_rate_hz = hz;
    opt.seed = seed;
    opt.noise = noise;

    NormalizationSpec norm;
    if (units == "basketball") {
        norm = NormalizationSpec::basketball_court();
    } else if (units == "soccer") {
        norm = NormalizationSpec::soccer_pitch();
    } else if (units == "none") {
        norm = NormalizationSpec::identity();
    } else {
        throw ConfigError("unknown units '" + units + "' (expected basketball|soccer|none)");
    }

    const SyntheticSet set = generate_synthetic(opt);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    write_trajectory_csv(out_dir / "trajectories.csv", set.demos);

    DatasetManifest manifest;
    manifest.scenario = scenario_name;
    manifest.demo_count = opt.demo_count;
    manifest.agent_count = opt.agent_count;
    manifest.frame_count = opt.frame_count;
    manifest.sample_rate_hz = opt.sample_rate_hz;
    manifest.seed = opt.seed;
    manifest.noise = opt.effective_noise();
    manifest.normalized = true;
    manifest.norm = norm;
    manifest.agent_roles = set.agent_roles;
    const SplitResult split = split_by_hash(set.demos);
    for (const auto& d : split.train) manifest.split_assignment[d.demo_id] = "train";
    for (const auto& d : split.val) manifest.split_assignment[d.demo_id] = "val";
    for (const auto& d : split.test) manifest.split_assignment[d.demo_id] = "test";
    manifest.save(out_dir / "manifest.txt");

    std::cout << "wrote " << set.demos.size() << " demos (" << split.train.size() << " train / "
              << split.val.size() << " val / " << split.test.size() << " test) to "
              << out_dir.string() << "\n";
    return 0;
}

int run_train(const fs::path& data_dir, const std::string& config_path,
              const std::vector<std::string>& overrides, const fs::path& out_dir) {
    const Dataset ds = load_dataset(data_dir);
    const ModelConfig config = load_model_config(config_path, overrides, ds);
    const SplitResult split = ds.manifest.apply_split(ds.demos);
    if (split.train.empty() || split.val.empty()) {
        throw DataError("dataset split leaves train or val empty");
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    std::cout << "training on " << split.train.size() << " demos, validating on "
              << split.val.size() << "\n";
    const TrainResult result = train(split.train, split.val, config, &std::cout);

    save_checkpoint(out_dir / "model.tjf", result.model);
    write_loss_history_csv(out_dir / "loss_history.csv", result, config);

    KvFile manifest;
    manifest.set("data_dir", data_dir.string());
    manifest.set("scenario", ds.manifest.scenario);
    manifest.set("train_demos", static_cast<std::int64_t>(split.train.size()));
    manifest.set("val_demos", static_cast<std::int64_t>(split.val.size()));
    manifest.set("test_demos", static_cast<std::int64_t>(split.test.size()));
    manifest.set("best_epoch", result.best_epoch);
    manifest.set("best_val_loss", result.best_val_loss);
    config_to_kv(config, manifest);
    manifest.save(out_dir / "manifest.txt");

    std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss
              << "; checkpoint written to " << (out_dir / "model.tjf").string() << "\n";
    return 0;
}

int run_predict(const fs::path& model_path, const fs::path& data_dir, const std::string& demo_id,
                std::int64_t t_obs, std::int64_t horizon, const fs::path& out_file) {
    const ForecastModel model = load_checkpoint(model_path);
    const Dataset ds = load_dataset(data_dir);
    if (model.config.agent_count != ds.manifest.agent_count) {
        throw IncompatibilityError("checkpoint K=" + std::to_string(model.config.agent_count) +
                                   " does not match dataset K=" +
                                   std::to_string(ds.manifest.agent_count));
    }

    std::vector<Demonstration> outputs;
    for (const auto& demo : ds.demos) {
        if (!demo_id.empty() && demo.demo_id != demo_id) continue;
        if (demo.frame_count() < t_obs + 1) {
            throw DataError("demo '" + demo.demo_id + "' is shorter than t_obs");
        }
        PredictionTask task;
        task.observed.assign(demo.frames.begin(), demo.frames.begin() + t_obs);
        task.horizon = horizon;
        Demonstration out;
        out.demo_id = demo.demo_id + "_pred";
        out.sample_rate_hz = demo.sample_rate_hz;
        out.frames = rollout(model, task);
        outputs.push_back(std::move(out));
    }
    if (outputs.empty()) {
        throw DataError(demo_id.empty() ? "dataset holds no demos"
                                        : "demo '" + demo_id + "' not found");
    }
    write_trajectory_csv(out_file, outputs);
    std::cout << "wrote " << outputs.size() << " predicted trajectories to " << out_file.string()
              << "\n";
    return 0;
}

int run_evaluate(const std::vector<std::string>& baselines, const std::string& model_path,
                 const std::string& uniform_model_path, const fs::path& data_dir,
                 const EvalProtocol& protocol, const std::string& out_csv) {
    const Dataset ds = load_dataset(data_dir);
    const SplitResult split = ds.manifest.apply_split(ds.demos);
    if (split.test.empty()) throw DataError("dataset split leaves the test set empty");

    // Which rows to produce: explicit --baseline list, otherwise whatever the
    // provided checkpoints (or their absence) imply.
    std::vector<std::string> rows = baselines;
    if (rows.empty()) {
        if (!model_path.empty()) rows.push_back("attention");
        if (!uniform_model_path.empty()) rows.push_back("uniform");
        if (rows.empty()) rows.push_back("velocity");
    }

    const std::string dataset_label =
        ds.manifest.scenario.empty() ? data_dir.filename().string() : ds.manifest.scenario;

    for (const auto& row : rows) {
        PredictFn predict;
        std::string model_name;
        ForecastModel model;  // keeps checkpoint alive for the closure
        if (row == "velocity") {
            predict = velocity_baseline;
            model_name = "velocity";
        } else if (row == "attention" || row == "uniform") {
            const std::string& path = row == "attention" ? model_path : uniform_model_path;
            if (path.empty()) {
                throw ConfigError("--baseline " + row + " needs " +
                                  (row == "attention" ? std::string("--model")
                                                      : std::string("--uniform-model")));
            }
            model = load_checkpoint(path);
            if (model.config.agent_count != ds.manifest.agent_count) {
                throw IncompatibilityError(
                    "checkpoint K=" + std::to_string(model.config.agent_count) +
                    " does not match dataset K=" + std::to_string(ds.manifest.agent_count));
            }
            const Aggregation agg = model.config.spatial.aggregation;
            if ((row == "attention") != (agg == Aggregation::Attention)) {
                throw IncompatibilityError("checkpoint aggregation is " + aggregation_name(agg) +
                                           ", requested row is " + row);
            }
            model_name = agg == Aggregation::Attention ? "graph_attention_tcn" : "graph_uniform_tcn";
            predict = model_predictor(model);
        } else {
            throw ConfigError("unknown baseline '" + row +
                              "' (expected velocity|uniform|attention)");
        }

        const EvalReport report = evaluate(predict, split.test, ds.manifest.norm, protocol);
        std::cout << format_report_table(model_name, report) << "\n";
        if (!out_csv.empty()) {
            append_report_csv(out_csv, model_name,
                              protocol.team.empty() ? "all" : protocol.team, dataset_label,
                              report);
        }
    }
    return 0;
}

int run_dump_attention(const fs::path& model_path, const fs::path& data_dir,
                       const fs::path& out_file, std::int64_t max_demos) {
    const ForecastModel model = load_checkpoint(model_path);
    const Dataset ds = load_dataset(data_dir);
    if (model.config.agent_count != ds.manifest.agent_count) {
        throw IncompatibilityError("checkpoint K=" + std::to_string(model.config.agent_count) +
                                   " does not match dataset K=" +
                                   std::to_string(ds.manifest.agent_count));
    }

    std::ofstream out(out_file);
    if (!out) throw IoError("cannot open '" + out_file.string() + "' for writing");
    out << "demo_id,t,i,j,alpha\n";

    NoGradGuard no_grad;
    std::int64_t dumped = 0;
    for (const auto& demo : ds.demos) {
        if (max_demos > 0 && dumped >= max_demos) break;
        std::vector<Tensor> attention;
        encode_sequence(std::span<const FrameSnapshot>(demo.frames.data(), demo.frames.size()),
                        model.spatial, model.config.spatial, &attention);
        for (std::size_t t = 0; t < attention.size(); ++t) {
            const Tensor& alpha = attention[t];
            const std::int64_t k = alpha.dim(0);
            for (std::int64_t i = 0; i < k; ++i) {
                for (std::int64_t j = 0; j < k; ++j) {
                    out << demo.demo_id << ',' << t << ',' << i << ',' << j << ','
                        << format_double(alpha.at(i, j)) << '\n';
                }
            }
        }
        ++dumped;
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + out_file.string() + "'");
    std::cout << "wrote attention matrices of " << dumped << " demos to " << out_file.string()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tjf: multi-agent trajectory forecasting"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic trajectory dataset");
    std::string gen_scenario = "leader_follower";
    std::int64_t gen_k = 11, gen_t = 50, gen_n = 200;
    double gen_hz = 5.0, gen_noise = -1.0;
    std::uint64_t gen_seed = 0;
    std::string gen_units = "basketball";
    std::string gen_out;
    gen->add_option("--scenario", gen_scenario, "leader_follower|circular_play|independent_drift");
    gen->add_option("--k", gen_k, "Agents per frame (players + ball)");
    gen->add_option("--t", gen_t, "Frames per demonstration");
    gen->add_option("--n", gen_n, "Number of demonstrations");
    gen->add_option("--hz", gen_hz, "Sample rate");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--noise", gen_noise, "Noise level (negative = scenario default)");
    gen->add_option("--units", gen_units, "Physical units: basketball|soccer|none");
    gen->add_option("--out", gen_out, "Output directory");

    // train
    auto* tr = app.add_subcommand("train", "Train a forecaster on a dataset");
    std::string tr_data, tr_config, tr_out;
    std::vector<std::string> tr_set;
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--config", tr_config, "Key-value config file");
    tr->add_option("--set", tr_set, "Config override KEY=VALUE (repeatable)");
    tr->add_option("--out", tr_out, "Output directory");

    // predict
    auto* pr = app.add_subcommand("predict", "Roll out forecasts and dump trajectories");
    std::string pr_model, pr_data, pr_demo, pr_out;
    std::int64_t pr_tobs = 30, pr_horizon = 20;
    pr->add_option("--model", pr_model, "Checkpoint file")->required();
    pr->add_option("--data", pr_data, "Dataset directory")->required();
    pr->add_option("--demo", pr_demo, "Demo id (default: all demos)");
    pr->add_option("--t-obs", pr_tobs, "Observed frames");
    pr->add_option("--horizon", pr_horizon, "Frames to predict");
    pr->add_option("--out", pr_out, "Output CSV file");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score predictors on the test split");
    std::string ev_model, ev_uniform_model, ev_data, ev_out, ev_team;
    std::vector<std::string> ev_baselines;
    std::string ev_protocol = "basketball";
    EvalProtocol protocol;
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("--model", ev_model, "Attention-model checkpoint");
    ev->add_option("--uniform-model", ev_uniform_model, "Uniform-aggregation checkpoint");
    ev->add_option("--baseline", ev_baselines, "velocity|uniform|attention (repeatable)");
    ev->add_option("--protocol", ev_protocol, "Threshold preset: basketball (3 ft) | soccer (1 m)");
    ev->add_option("--t-obs", protocol.t_obs, "Observed frames");
    ev->add_option("--horizon", protocol.horizon, "Frames to predict");
    ev->add_option("--n-samples", protocol.n_samples, "Sampled test demos per run");
    ev->add_option("--eval-seed", protocol.seed, "Sampling seed");
    ev->add_option("--team", ev_team, "Score only agents with this role");
    ev->add_option("--out", ev_out, "CSV file to append report rows to");

    // dump-attention
    auto* da = app.add_subcommand("dump-attention", "Write per-frame attention matrices as CSV");
    std::string da_model, da_data, da_out;
    std::int64_t da_max = 0;
    da->add_option("--model", da_model, "Checkpoint file")->required();
    da->add_option("--data", da_data, "Dataset directory")->required();
    da->add_option("--out", da_out, "Output CSV file");
    da->add_option("--max-demos", da_max, "Limit dumped demos (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const fs::path out = gen_out.empty() ? default_out_dir("dataset") : fs::path(gen_out);
            return run_generate(gen_scenario, gen_k, gen_t, gen_n, gen_hz, gen_seed, gen_noise,
                                gen_units, out);
        }
        if (tr->parsed()) {
            const fs::path out = tr_out.empty() ? default_out_dir("run") : fs::path(tr_out);
            return run_train(tr_data, tr_config, tr_set, out);
        }
        if (pr->parsed()) {
            const fs::path out =
                pr_out.empty() ? default_out_dir("predictions.csv") : fs::path(pr_out);
            return run_predict(pr_model, pr_data, pr_demo, pr_tobs, pr_horizon, out);
        }
        if (ev->parsed()) {
            if (ev_protocol == "basketball") {
                protocol.threshold = 3.0;
            } else if (ev_protocol == "soccer") {
                protocol.threshold = 1.0;
            } else {
                throw ConfigError("unknown protocol '" + ev_protocol +
                                  "' (expected basketball|soccer)");
            }
            protocol.team = ev_team;
            return run_evaluate(ev_baselines, ev_model, ev_uniform_model, ev_data, protocol,
                                ev_out);
        }
        if (da->parsed()) {
            const fs::path out =
                da_out.empty() ? default_out_dir("attention.csv") : fs::path(da_out);
            return run_dump_attention(da_model, da_data, out, da_max);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IncompatibilityError& e) {
        std::cerr << "incompatible inputs: " << e.what() << "\n";
        return kExitIncompatible;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
