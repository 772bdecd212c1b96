#include "tjf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tjf/kv_file.hpp"
#include "tjf/rng.hpp"

namespace tjf {

namespace {

void require_comparable(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth,
                        const char* op) {
    if (pred.size() != truth.size()) {
        throw DimensionError(std::string(op) + ": " + std::to_string(pred.size()) +
                             " predicted frames vs " + std::to_string(truth.size()) + " truth");
    }
    if (pred.empty()) throw DimensionError(std::string(op) + ": empty trajectories");
    const std::int64_t k = pred[0].agent_count();
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].agent_count() != k || truth[t].agent_count() != k) {
            throw DimensionError(std::string(op) + ": agent count mismatch at frame " +
                                 std::to_string(t));
        }
    }
}

double point_error(const AgentState& a, const AgentState& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double avg_l2_error(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth) {
    require_comparable(pred, truth, "avg_l2_error");
    const std::size_t k = pred[0].states.size();
    double total = 0.0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        for (std::size_t a = 0; a < k; ++a) {
            total += point_error(pred[t].states[a], truth[t].states[a]);
        }
    }
    return total / static_cast<double>(pred.size() * k);
}

double max_error(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth) {
    require_comparable(pred, truth, "max_error");
    const std::size_t k = pred[0].states.size();
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        double worst = 0.0;
        for (std::size_t t = 0; t < pred.size(); ++t) {
            worst = std::max(worst, point_error(pred[t].states[a], truth[t].states[a]));
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double miss_rate(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth,
                 double threshold) {
    if (!(threshold > 0.0)) throw ParameterError("miss_rate: threshold must be positive");
    require_comparable(pred, truth, "miss_rate");
    const std::size_t k = pred[0].states.size();
    std::size_t misses = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        for (std::size_t a = 0; a < k; ++a) {
            if (point_error(pred[t].states[a], truth[t].states[a]) > threshold) ++misses;
        }
    }
    return 100.0 * static_cast<double>(misses) / static_cast<double>(pred.size() * k);
}

namespace {

std::vector<FrameSnapshot> denorm_frames(std::vector<FrameSnapshot> frames,
                                         const NormalizationSpec& spec) {
    for (auto& frame : frames) {
        for (auto& s : frame.states) s = spec.denormalize(s);
    }
    return frames;
}

std::vector<FrameSnapshot> select_agents(const std::vector<FrameSnapshot>& frames,
                                         const std::vector<std::size_t>& keep) {
    std::vector<FrameSnapshot> out(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        out[t].states.reserve(keep.size());
        for (auto a : keep) out[t].states.push_back(frames[t].states[a]);
    }
    return out;
}

struct MeanSd {
    double mean = 0.0;
    double sd_of_mean = 0.0;
};

MeanSd mean_and_sd(const std::vector<double>& xs) {
    MeanSd r;
    const auto n = static_cast<double>(xs.size());
    for (double x : xs) r.mean += x;
    r.mean /= n;
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - r.mean) * (x - r.mean);
        r.sd_of_mean = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
    }
    return r;
}

}  // namespace

EvalReport evaluate(const PredictFn& predict, const std::vector<Demonstration>& test_set,
                    const NormalizationSpec& denorm, const EvalProtocol& protocol) {
    if (test_set.empty()) throw DataError("evaluate: empty test set");
    if (protocol.t_obs < 1 || protocol.horizon < 1) {
        throw ParameterError("evaluate: t_obs and horizon must be >= 1");
    }
    if (protocol.n_samples < 1) throw ParameterError("evaluate: n_samples must be >= 1");
    const std::int64_t needed = protocol.t_obs + protocol.horizon;
    for (const auto& d : test_set) {
        if (d.frame_count() < needed) {
            throw DataError("evaluate: demo '" + d.demo_id + "' has " +
                            std::to_string(d.frame_count()) + " frames, protocol needs " +
                            std::to_string(needed));
        }
    }

    EvalReport report;
    report.n_samples = protocol.n_samples;
    report.threshold = protocol.threshold;
    report.seed = protocol.seed;

    // Sample demo indices; small test sets fall back to replacement.
    Rng rng(protocol.seed, 31);
    std::vector<std::size_t> sample;
    const auto n = test_set.size();
    if (n >= static_cast<std::size_t>(protocol.n_samples)) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        rng.shuffle(pool);
        sample.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(protocol.n_samples));
    } else {
        report.sampled_with_replacement = true;
        for (std::int64_t i = 0; i < protocol.n_samples; ++i) {
            sample.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
        }
    }

    std::vector<double> avg_errors, max_errors, miss_rates;
    for (auto idx : sample) {
        const Demonstration& demo = test_set[idx];
        PredictionTask task;
        task.observed.assign(demo.frames.begin(), demo.frames.begin() + protocol.t_obs);
        task.horizon = protocol.horizon;
        std::vector<FrameSnapshot> truth(demo.frames.begin() + protocol.t_obs,
                                         demo.frames.begin() + needed);
        std::vector<FrameSnapshot> pred = predict(task);
        if (pred.size() != truth.size()) {
            throw DimensionError("evaluate: predictor returned " + std::to_string(pred.size()) +
                                 " frames, expected " + std::to_string(truth.size()));
        }

        pred = denorm_frames(std::move(pred), denorm);
        truth = denorm_frames(std::move(truth), denorm);

        if (!protocol.team.empty() && !demo.agent_roles.empty()) {
            std::vector<std::size_t> keep;
            for (std::size_t a = 0; a < demo.agent_roles.size(); ++a) {
                if (demo.agent_roles[a] == protocol.team) keep.push_back(a);
            }
            if (keep.empty()) {
                throw DataError("evaluate: no agent has role '" + protocol.team + "' in demo '" +
                                demo.demo_id + "'");
            }
            pred = select_agents(pred, keep);
            truth = select_agents(truth, keep);
        }

        avg_errors.push_back(avg_l2_error(pred, truth));
        max_errors.push_back(max_error(pred, truth));
        miss_rates.push_back(miss_rate(pred, truth, protocol.threshold));
    }

    const MeanSd avg = mean_and_sd(avg_errors);
    const MeanSd mx = mean_and_sd(max_errors);
    report.avg_error = avg.mean;
    report.avg_error_sd = avg.sd_of_mean;
    report.max_err = mx.mean;
    report.max_err_sd = mx.sd_of_mean;
    report.miss = *std::min_element(miss_rates.begin(), miss_rates.end());
    return report;
}

std::string format_report_table(const std::string& model_name, const EvalReport& report) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s avg %.4f +/- %.4f   max %.4f +/- %.4f   miss %.2f%%",
                  model_name.c_str(), report.avg_error, report.avg_error_sd, report.max_err,
                  report.max_err_sd, report.miss);
    os << line;
    if (report.sampled_with_replacement) os << "   (sampled with replacement)";
    return os.str();
}

void append_report_csv(const std::filesystem::path& path, const std::string& model_name,
                       const std::string& team, const std::string& dataset,
                       const EvalReport& report) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (fresh) out << "model,team,dataset,avg,avg_sd,max,max_sd,miss,seed\n";
    out << model_name << ',' << (team.empty() ? "all" : team) << ',' << dataset << ','
        << format_double(report.avg_error) << ',' << format_double(report.avg_error_sd) << ','
        << format_double(report.max_err) << ',' << format_double(report.max_err_sd) << ','
        << format_double(report.miss) << ',' << report.seed << '\n';
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace tjf
