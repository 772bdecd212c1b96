#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tjf/data.hpp"
#include "tjf/model.hpp"

namespace tjf {

/// Mean over agents and timesteps of the per-point Euclidean error.
double avg_l2_error(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth);

/// Per agent the maximum error over timesteps, then the mean over agents.
double max_error(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth);

/// Percent of (agent, timestep) pairs with error strictly above threshold.
double miss_rate(std::span<const FrameSnapshot> pred, std::span<const FrameSnapshot> truth,
                 double threshold);

struct EvalProtocol {
    std::int64_t t_obs = 30;
    std::int64_t horizon = 20;
    double threshold = 3.0;  // feet for basketball, meters for soccer
    std::int64_t n_samples = 20;
    std::uint64_t seed = 0;
    std::string team;  // role filter; empty scores every agent
};

struct EvalReport {
    double avg_error = 0.0;
    double avg_error_sd = 0.0;  // stddev of the mean over samples
    double max_err = 0.0;
    double max_err_sd = 0.0;
    double miss = 0.0;  // percent; best (minimum) over samples
    std::int64_t n_samples = 0;
    double threshold = 0.0;
    std::uint64_t seed = 0;
    bool sampled_with_replacement = false;
};

using PredictFn = std::function<std::vector<FrameSnapshot>(const PredictionTask&)>;

/// Samples protocol.n_samples test demonstrations (without replacement when
/// the set is large enough, with replacement and a flag otherwise), runs the
/// predictor on the observed prefix of each, and aggregates denormalized
/// errors: mean +/- stddev-of-mean for average and max error, minimum over
/// samples for the miss rate.
EvalReport evaluate(const PredictFn& predict, const std::vector<Demonstration>& test_set,
                    const NormalizationSpec& denorm, const EvalProtocol& protocol);

std::string format_report_table(const std::string& model_name, const EvalReport& report);

/// Appends one machine-readable row, creating the header when the file is new:
/// model,team,dataset,avg,avg_sd,max,max_sd,miss,seed
void append_report_csv(const std::filesystem::path& path, const std::string& model_name,
                       const std::string& team, const std::string& dataset,
                       const EvalReport& report);

}  // namespace tjf
