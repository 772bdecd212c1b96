#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "tjf/model.hpp"

namespace tjf {

/// Standard Adam over a fixed parameter list.
class AdamOptimizer {
public:
    explicit AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                           double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }

    /// One update from the accumulated gradients; missing gradients count as
    /// zero. Throws NumericalError if an update would be non-finite.
    void step();
    void zero_grad();

private:
    struct Slot {
        Tensor param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, epsilon_;
    std::int64_t t_ = 0;
};

struct EpochStats {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    ForecastModel model;  // best-validation snapshot
    std::vector<EpochStats> history;
    std::int64_t best_epoch = -1;
    double best_val_loss = 0.0;
};

/// Mini-batch training with the exponential learning-rate schedule
/// lr(e) = learning_rate * lr_decay^e, best-validation snapshotting, and
/// optional early stopping. Deterministic for a fixed config and data.
TrainResult train(const std::vector<Demonstration>& train_set,
                  const std::vector<Demonstration>& val_set, const ModelConfig& config,
                  std::ostream* log = nullptr);

/// Loss history as CSV (epoch, train_loss, val_loss, lr) with key config
/// values echoed in leading comment lines.
void write_loss_history_csv(const std::filesystem::path& path, const TrainResult& result,
                            const ModelConfig& config);

}  // namespace tjf
