#include "tjf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tjf/kv_file.hpp"

namespace tjf {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    slots_.reserve(params.size());
    for (auto& p : params) {
        Slot s;
        s.m.assign(static_cast<std::size_t>(p.size()), 0.0);
        s.v.assign(static_cast<std::size_t>(p.size()), 0.0);
        s.param = std::move(p);
        slots_.push_back(std::move(s));
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& slot : slots_) {
        double* p = slot.param.data();
        const bool has_grad = slot.param.has_grad();
        const double* g = has_grad ? slot.param.grad().data() : nullptr;
        for (std::size_t i = 0; i < slot.m.size(); ++i) {
            const double grad = has_grad ? g[i] : 0.0;
            slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * grad;
            slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * grad * grad;
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            const double update = lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
            if (!std::isfinite(update)) {
                throw NumericalError("adam: non-finite update at step " + std::to_string(t_));
            }
            p[i] -= update;
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& slot : slots_) slot.param.zero_grad();
}

namespace {

double validation_loss(const ForecastModel& model, const std::vector<Demonstration>& val_set,
                       Rng& rng) {
    NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& demo : val_set) {
        total += forward_loss(model, demo, /*train=*/false, rng).item();
    }
    return total / static_cast<double>(val_set.size());
}

std::vector<std::vector<double>> snapshot_values(const ForecastModel& model) {
    std::vector<std::vector<double>> values;
    for (const auto& [name, t] : model.parameters()) values.push_back(t.values());
    return values;
}

void restore_values(ForecastModel& model, const std::vector<std::vector<double>>& values) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.values() = values[i];
}

}  // namespace

TrainResult train(const std::vector<Demonstration>& train_set,
                  const std::vector<Demonstration>& val_set, const ModelConfig& config,
                  std::ostream* log) {
    config.validate();
    if (train_set.empty() || val_set.empty()) {
        throw DataError("train: empty train or validation split");
    }
    for (const auto& d : train_set) d.validate();
    for (const auto& d : val_set) d.validate();

    const std::int64_t window_length = train_set.front().frame_count();
    if (log && !config.tcn.covers(window_length)) {
        *log << "warning: TCN receptive field " << config.tcn.receptive_field()
             << " does not cover window length " << window_length << "\n";
    }

    TrainResult result;
    result.model = ForecastModel::init(config);
    AdamOptimizer optimizer(
        [&] {
            std::vector<Tensor> ps;
            for (auto& [name, t] : result.model.parameters()) ps.push_back(t);
            return ps;
        }(),
        config.learning_rate);

    Rng shuffle_rng(config.seed, 11);
    Rng dropout_rng(config.seed, 13);
    Rng val_rng(config.seed, 17);  // unused on the eval path; keeps signatures uniform

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::vector<double>> best_values = snapshot_values(result.model);
    result.best_val_loss = validation_loss(result.model, val_set, val_rng);
    result.best_epoch = -1;  // untrained snapshot; replaced by the first epoch that improves
    std::int64_t epochs_since_improvement = 0;

    for (std::int64_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
        optimizer.set_learning_rate(lr);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_start = 0;
        std::int64_t batch_index = 0;
        while (batch_start < order.size()) {
            const std::size_t batch_end =
                std::min(batch_start + static_cast<std::size_t>(config.batch_size), order.size());
            const auto batch_n = static_cast<double>(batch_end - batch_start);
            optimizer.zero_grad();
            for (std::size_t i = batch_start; i < batch_end; ++i) {
                const Demonstration& demo = train_set[order[i]];
                const Tensor loss = forward_loss(result.model, demo, /*train=*/true, dropout_rng);
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    throw NumericalError("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_index) + ", demo '" + demo.demo_id +
                                         "'");
                }
                epoch_loss += value;
                loss.backward(1.0 / batch_n);  // batch gradient = mean over members
            }
            optimizer.step();
            if (!result.model.parameters_finite()) {
                throw NumericalError("train: non-finite parameter after epoch " +
                                     std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            }
            batch_start = batch_end;
            ++batch_index;
        }
        epoch_loss /= static_cast<double>(train_set.size());

        const double val_loss = validation_loss(result.model, val_set, val_rng);
        result.history.push_back({epoch, epoch_loss, val_loss, lr});
        if (log) {
            *log << "epoch " << epoch << " train_loss " << epoch_loss << " val_loss " << val_loss
                 << " lr " << lr << "\n";
        }

        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            best_values = snapshot_values(result.model);
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (config.early_stop_patience > 0 &&
                epochs_since_improvement >= config.early_stop_patience) {
                if (log) *log << "early stop after epoch " << epoch << "\n";
                break;
            }
        }
    }

    restore_values(result.model, best_values);
    return result;
}

void write_loss_history_csv(const std::filesystem::path& path, const TrainResult& result,
                            const ModelConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "# learning_rate = " << format_double(config.learning_rate) << "\n";
    out << "# lr_decay = " << format_double(config.lr_decay) << "\n";
    out << "# batch_size = " << config.batch_size << "\n";
    out << "# seed = " << config.seed << "\n";
    out << "# aggregation = " << aggregation_name(config.spatial.aggregation) << "\n";
    out << "# best_epoch = " << result.best_epoch << "\n";
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& row : result.history) {
        out << row.epoch << ',' << format_double(row.train_loss) << ','
            << format_double(row.val_loss) << ',' << format_double(row.lr) << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace tjf
