#include "tjf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tjf/kv_file.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace tjf {

namespace {

constexpr char kMagic[4] = {'T', 'J', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint: truncated while reading " + what);
    }
    return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& what) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint: truncated while reading " + what);
    }
    return v;
}

std::filesystem::path meta_path(const std::filesystem::path& file) {
    std::filesystem::path p = file;
    p += ".meta";
    return p;
}

}  // namespace

void config_to_kv(const ModelConfig& config, KvFile& kv) {
    kv.set("d_z", config.d_z);
    kv.set("agent_count", config.agent_count);
    kv.set("spatial_activation", activation_name(config.spatial.activation));
    kv.set("aggregation", aggregation_name(config.spatial.aggregation));
    kv.set("leaky_slope", config.spatial.leaky_slope);
    kv.set("velocity_features", config.spatial.velocity_features);
    kv.set("tcn_levels", config.tcn.levels);
    kv.set("tcn_kernel_size", config.tcn.kernel_size);
    kv.set("tcn_channels", config.tcn.channels);
    kv.set("tcn_dropout", config.tcn.dropout_rate);
    kv.set("learning_rate", config.learning_rate);
    kv.set("lr_decay", config.lr_decay);
    kv.set("batch_size", config.batch_size);
    kv.set("max_epochs", config.max_epochs);
    kv.set("early_stop_patience", config.early_stop_patience);
    kv.set("seed", config.seed);
    kv.set("teacher_forcing", config.teacher_forcing);
    std::string roles;
    for (std::size_t i = 0; i < config.modeled_roles.size(); ++i) {
        if (i) roles += ",";
        roles += config.modeled_roles[i];
    }
    kv.set("modeled_roles", roles);
}

ModelConfig config_from_kv(const KvFile& kv, const ModelConfig& defaults) {
    ModelConfig c = defaults;
    if (kv.has("d_z")) c.d_z = kv.get_int("d_z");
    if (kv.has("agent_count")) c.agent_count = kv.get_int("agent_count");
    if (kv.has("spatial_activation")) c.spatial.activation = parse_activation(kv.get("spatial_activation"));
    if (kv.has("aggregation")) c.spatial.aggregation = parse_aggregation(kv.get("aggregation"));
    if (kv.has("leaky_slope")) c.spatial.leaky_slope = kv.get_double("leaky_slope");
    if (kv.has("velocity_features")) c.spatial.velocity_features = kv.get_bool("velocity_features");
    if (kv.has("tcn_levels")) c.tcn.levels = kv.get_int("tcn_levels");
    if (kv.has("tcn_kernel_size")) c.tcn.kernel_size = kv.get_int("tcn_kernel_size");
    if (kv.has("tcn_channels")) c.tcn.channels = kv.get_int("tcn_channels");
    if (kv.has("tcn_dropout")) c.tcn.dropout_rate = kv.get_double("tcn_dropout");
    if (kv.has("learning_rate")) c.learning_rate = kv.get_double("learning_rate");
    if (kv.has("lr_decay")) c.lr_decay = kv.get_double("lr_decay");
    if (kv.has("batch_size")) c.batch_size = kv.get_int("batch_size");
    if (kv.has("max_epochs")) c.max_epochs = kv.get_int("max_epochs");
    if (kv.has("early_stop_patience")) c.early_stop_patience = kv.get_int("early_stop_patience");
    if (kv.has("seed")) c.seed = kv.get_uint("seed");
    if (kv.has("teacher_forcing")) c.teacher_forcing = kv.get_bool("teacher_forcing");
    if (kv.has("modeled_roles")) {
        c.modeled_roles.clear();
        std::istringstream in(kv.get("modeled_roles"));
        std::string role;
        while (std::getline(in, role, ',')) {
            if (!role.empty()) c.modeled_roles.push_back(role);
        }
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& file, const ForecastModel& model) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    for (const auto& [name, tensor] : model.parameters()) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (auto d : tensor.shape()) write_u64(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + file.string() + "'");

    KvFile kv;
    config_to_kv(model.config, kv);
    kv.save(meta_path(file));
}

ForecastModel load_checkpoint(const std::filesystem::path& file) {
    const ModelConfig config = config_from_kv(KvFile::load(meta_path(file)));
    ForecastModel model = ForecastModel::init(config);

    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    char magic[4];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IncompatibilityError("checkpoint '" + file.string() + "' has a bad magic header");
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion) {
        throw IncompatibilityError("checkpoint version " + std::to_string(version) +
                                   " unsupported (expected " + std::to_string(kVersion) + ")");
    }

    auto params = model.parameters();
    std::size_t loaded = 0;
    while (true) {
        std::uint32_t name_len = 0;
        if (!in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len))) break;  // EOF
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw IoError("checkpoint: truncated name");
        const std::uint32_t rank = read_u32(in, "rank");
        std::vector<std::int64_t> dims(rank);
        std::int64_t count = 1;
        for (auto& d : dims) {
            d = static_cast<std::int64_t>(read_u64(in, "dims"));
            count *= d;
        }
        std::vector<double> payload(static_cast<std::size_t>(count));
        if (!in.read(reinterpret_cast<char*>(payload.data()),
                     static_cast<std::streamsize>(payload.size() * sizeof(double)))) {
            throw IoError("checkpoint: truncated payload for '" + name + "'");
        }

        bool found = false;
        for (auto& [pname, tensor] : params) {
            if (pname != name) continue;
            if (tensor.shape() != dims) {
                throw IncompatibilityError("checkpoint parameter '" + name + "' has shape " +
                                           shape_str(dims) + ", model expects " +
                                           shape_str(tensor.shape()));
            }
            tensor.values() = std::move(payload);
            found = true;
            ++loaded;
            break;
        }
        if (!found) {
            throw IncompatibilityError("checkpoint parameter '" + name +
                                       "' does not exist in the configured model");
        }
    }
    if (loaded != params.size()) {
        throw IncompatibilityError("checkpoint holds " + std::to_string(loaded) +
                                   " parameters, model expects " + std::to_string(params.size()));
    }
    return model;
}

}  // namespace tjf
