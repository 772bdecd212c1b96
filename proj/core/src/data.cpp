#include "tjf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tjf/errors.hpp"
#include "tjf/kv_file.hpp"

namespace tjf {

void Demonstration::validate() const {
    if (frames.size() < 2) {
        throw DataError("demonstration '" + demo_id + "' has " + std::to_string(frames.size()) +
                        " frames; need at least 2");
    }
    const std::int64_t k = frames.front().agent_count();
    if (k < 1) throw DataError("demonstration '" + demo_id + "' has no agents");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].agent_count() != k) {
            throw DataError("demonstration '" + demo_id + "': frame " + std::to_string(t) +
                            " holds " + std::to_string(frames[t].agent_count()) +
                            " agents, expected " + std::to_string(k));
        }
        for (const auto& s : frames[t].states) {
            if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
                throw DataError("demonstration '" + demo_id + "': non-finite position at frame " +
                                std::to_string(t));
            }
        }
    }
    if (!agent_roles.empty() && static_cast<std::int64_t>(agent_roles.size()) != k) {
        throw DataError("demonstration '" + demo_id + "': role list does not match agent count");
    }
}

void NormalizationSpec::validate() const {
    if (!(max_x > min_x) || !(max_y > min_y)) {
        throw ParameterError("normalization spec requires max > min per axis");
    }
}

AgentState NormalizationSpec::normalize(const AgentState& s) const {
    return {2.0 * (s.x - min_x) / (max_x - min_x) - 1.0,
            2.0 * (s.y - min_y) / (max_y - min_y) - 1.0};
}

AgentState NormalizationSpec::denormalize(const AgentState& s) const {
    return {(s.x + 1.0) * 0.5 * (max_x - min_x) + min_x,
            (s.y + 1.0) * 0.5 * (max_y - min_y) + min_y};
}

bool NormalizationSpec::is_identity() const {
    return min_x == -1.0 && max_x == 1.0 && min_y == -1.0 && max_y == 1.0;
}

NormalizationSpec NormalizationSpec::basketball_court() { return {0.0, 94.0, 0.0, 50.0}; }
NormalizationSpec NormalizationSpec::soccer_pitch() { return {0.0, 105.0, 0.0, 68.0}; }
NormalizationSpec NormalizationSpec::identity() { return {-1.0, 1.0, -1.0, 1.0}; }

// --- ingestion ---------------------------------------------------------------

namespace {

struct CsvRow {
    std::string demo_id;
    std::int64_t frame;
    std::string agent_id;
    double x, y;
};

CsvRow parse_row(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
        throw ParseError("expected 5 comma-separated fields, got " + std::to_string(fields.size()),
                         line_no);
    }
    CsvRow row;
    row.demo_id = fields[0];
    row.agent_id = fields[2];
    try {
        std::size_t pos = 0;
        row.frame = std::stoll(fields[1], &pos);
        if (pos != fields[1].size()) throw std::invalid_argument(fields[1]);
        row.x = std::stod(fields[3], &pos);
        if (pos != fields[3].size()) throw std::invalid_argument(fields[3]);
        row.y = std::stod(fields[4], &pos);
        if (pos != fields[4].size()) throw std::invalid_argument(fields[4]);
    } catch (const std::exception&) {
        throw ParseError("malformed numeric field in '" + line + "'", line_no);
    }
    if (!std::isfinite(row.x) || !std::isfinite(row.y)) {
        throw ParseError("non-finite coordinate", line_no);
    }
    return row;
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path, double sample_rate_hz) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::string line;
    std::size_t line_no = 0;

    // Header.
    if (!std::getline(in, line)) return {};
    ++line_no;
    {
        std::string header = line;
        header.erase(std::remove_if(header.begin(), header.end(),
                                    [](char c) { return c == ' ' || c == '\r'; }),
                     header.end());
        if (header != "demo_id,frame,agent_id,x,y") {
            throw ParseError("unexpected header '" + line + "'", line_no);
        }
    }

    // Group rows, preserving demo order of first appearance.
    struct DemoAccum {
        std::vector<std::string> agent_order;
        std::map<std::string, std::size_t> agent_index;
        std::map<std::int64_t, std::map<std::size_t, AgentState>> frames;
    };
    std::vector<std::string> demo_order;
    std::map<std::string, DemoAccum> accum;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const CsvRow row = parse_row(line, line_no);
        auto it = accum.find(row.demo_id);
        if (it == accum.end()) {
            demo_order.push_back(row.demo_id);
            it = accum.emplace(row.demo_id, DemoAccum{}).first;
        }
        DemoAccum& d = it->second;
        auto ait = d.agent_index.find(row.agent_id);
        if (ait == d.agent_index.end()) {
            ait = d.agent_index.emplace(row.agent_id, d.agent_order.size()).first;
            d.agent_order.push_back(row.agent_id);
        }
        auto& frame = d.frames[row.frame];
        if (!frame.emplace(ait->second, AgentState{row.x, row.y}).second) {
            throw ParseError("duplicate (demo,frame,agent) row for demo '" + row.demo_id + "'",
                             line_no);
        }
    }

    IngestResult result;
    for (const auto& id : demo_order) {
        const DemoAccum& d = accum.at(id);
        Demonstration demo;
        demo.demo_id = id;
        demo.sample_rate_hz = sample_rate_hz;
        const std::size_t k = d.agent_order.size();
        for (const auto& [frame_no, agents] : d.frames) {
            if (agents.size() != k) {
                ++result.dropped_frames;  // some agent missing at this frame
                continue;
            }
            FrameSnapshot snap;
            snap.states.resize(k);
            for (const auto& [idx, state] : agents) snap.states[idx] = state;
            demo.frames.push_back(std::move(snap));
        }
        if (!demo.frames.empty()) result.demos.push_back(std::move(demo));
    }
    return result;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<Demonstration>& demos) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "demo_id,frame,agent_id,x,y\n";
    for (const auto& demo : demos) {
        for (std::size_t t = 0; t < demo.frames.size(); ++t) {
            const auto& states = demo.frames[t].states;
            for (std::size_t a = 0; a < states.size(); ++a) {
                out << demo.demo_id << ',' << t << ',' << a << ',' << format_double(states[a].x)
                    << ',' << format_double(states[a].y) << '\n';
            }
        }
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// --- preprocessing -----------------------------------------------------------

Demonstration resample(const Demonstration& demo, double target_hz) {
    if (target_hz <= 0.0) throw ParameterError("resample: target rate must be positive");
    if (demo.sample_rate_hz <= 0.0) {
        throw ParameterError("resample: demonstration '" + demo.demo_id +
                             "' has no source sample rate");
    }
    const double factor_real = demo.sample_rate_hz / target_hz;
    const auto factor = static_cast<std::int64_t>(std::llround(factor_real));
    if (factor < 1 || std::fabs(factor_real - static_cast<double>(factor)) > 1e-9) {
        throw ParameterError("resample: " + format_double(demo.sample_rate_hz) + " Hz -> " +
                             format_double(target_hz) + " Hz is not an integer decimation");
    }
    Demonstration out;
    out.demo_id = demo.demo_id;
    out.sample_rate_hz = target_hz;
    out.agent_roles = demo.agent_roles;
    for (std::size_t t = 0; t < demo.frames.size(); t += static_cast<std::size_t>(factor)) {
        out.frames.push_back(demo.frames[t]);
    }
    return out;
}

std::vector<Demonstration> window(const std::vector<Demonstration>& demos, std::int64_t length,
                                  double overlap_fraction) {
    if (length < 2) throw ParameterError("window: length must be >= 2");
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
        throw ParameterError("window: overlap fraction must lie in [0,1)");
    }
    auto stride = static_cast<std::int64_t>(
        std::llround(static_cast<double>(length) * (1.0 - overlap_fraction)));
    if (stride < 1) stride = 1;

    std::vector<Demonstration> out;
    for (const auto& demo : demos) {
        const std::int64_t t_total = demo.frame_count();
        std::int64_t index = 0;
        for (std::int64_t start = 0; start + length <= t_total; start += stride, ++index) {
            Demonstration w;
            w.demo_id = demo.demo_id + "_w" + std::to_string(index);
            w.sample_rate_hz = demo.sample_rate_hz;
            w.agent_roles = demo.agent_roles;
            w.frames.assign(demo.frames.begin() + start, demo.frames.begin() + start + length);
            out.push_back(std::move(w));
        }
    }
    return out;
}

namespace {

Demonstration map_positions(const Demonstration& demo,
                            const std::function<AgentState(const AgentState&)>& f) {
    Demonstration out;
    out.demo_id = demo.demo_id;
    out.sample_rate_hz = demo.sample_rate_hz;
    out.agent_roles = demo.agent_roles;
    out.frames.reserve(demo.frames.size());
    for (const auto& frame : demo.frames) {
        FrameSnapshot snap;
        snap.states.reserve(frame.states.size());
        for (const auto& s : frame.states) snap.states.push_back(f(s));
        out.frames.push_back(std::move(snap));
    }
    return out;
}

}  // namespace

Demonstration normalize(const Demonstration& demo, const NormalizationSpec& spec) {
    spec.validate();
    return map_positions(demo, [&spec](const AgentState& s) { return spec.normalize(s); });
}

Demonstration denormalize(const Demonstration& demo, const NormalizationSpec& spec) {
    spec.validate();
    return map_positions(demo, [&spec](const AgentState& s) { return spec.denormalize(s); });
}

Demonstration filter_frames(const Demonstration& demo,
                            const std::function<bool(const FrameSnapshot&)>& keep) {
    Demonstration out;
    out.demo_id = demo.demo_id;
    out.sample_rate_hz = demo.sample_rate_hz;
    out.agent_roles = demo.agent_roles;
    for (const auto& frame : demo.frames) {
        if (keep(frame)) out.frames.push_back(frame);
    }
    return out;
}

// --- splitting ---------------------------------------------------------------

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

std::uint64_t demo_id_hash(const std::string& id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : id) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SplitResult split_by_hash(const std::vector<Demonstration>& demos, double train_fraction,
                          double val_fraction) {
    if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
        throw ParameterError("split fractions out of range");
    }
    std::vector<std::size_t> order(demos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&demos](std::size_t a, std::size_t b) {
        const auto ha = demo_id_hash(demos[a].demo_id);
        const auto hb = demo_id_hash(demos[b].demo_id);
        if (ha != hb) return ha < hb;
        return demos[a].demo_id < demos[b].demo_id;
    });

    const auto n = demos.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));

    SplitResult result;
    for (std::size_t i = 0; i < n; ++i) {
        const Demonstration& d = demos[order[i]];
        if (i < n_train) {
            result.train.push_back(d);
        } else if (i < n_train + n_val) {
            result.val.push_back(d);
        } else {
            result.test.push_back(d);
        }
    }
    return result;
}

// --- manifest ----------------------------------------------------------------

void DatasetManifest::save(const std::filesystem::path& path) const {
    KvFile kv;
    kv.set("scenario", scenario);
    kv.set("demo_count", demo_count);
    kv.set("agent_count", agent_count);
    kv.set("frame_count", frame_count);
    kv.set("sample_rate_hz", sample_rate_hz);
    kv.set("seed", seed);
    kv.set("noise", noise);
    kv.set("normalized", normalized);
    kv.set("norm_min_x", norm.min_x);
    kv.set("norm_max_x", norm.max_x);
    kv.set("norm_min_y", norm.min_y);
    kv.set("norm_max_y", norm.max_y);
    std::string roles;
    for (std::size_t i = 0; i < agent_roles.size(); ++i) {
        if (i) roles += ",";
        roles += agent_roles[i];
    }
    kv.set("agent_roles", roles);
    for (const auto& [id, split] : split_assignment) kv.set("split." + id, split);
    kv.save(path);
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    const KvFile kv = KvFile::load(path);
    DatasetManifest m;
    m.scenario = kv.get_or("scenario", "");
    m.demo_count = kv.get_int("demo_count");
    m.agent_count = kv.get_int("agent_count");
    m.frame_count = kv.get_int("frame_count");
    m.sample_rate_hz = kv.get_double("sample_rate_hz");
    m.seed = kv.get_uint("seed");
    m.noise = kv.get_double("noise");
    m.normalized = kv.get_bool("normalized");
    m.norm.min_x = kv.get_double("norm_min_x");
    m.norm.max_x = kv.get_double("norm_max_x");
    m.norm.min_y = kv.get_double("norm_min_y");
    m.norm.max_y = kv.get_double("norm_max_y");
    const std::string roles = kv.get_or("agent_roles", "");
    if (!roles.empty()) {
        std::istringstream in(roles);
        std::string role;
        while (std::getline(in, role, ',')) m.agent_roles.push_back(role);
    }
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("split.", 0) == 0) m.split_assignment[k.substr(6)] = v;
    }
    return m;
}

SplitResult DatasetManifest::apply_split(const std::vector<Demonstration>& demos) const {
    if (split_assignment.empty()) return split_by_hash(demos);
    SplitResult result;
    for (const auto& d : demos) {
        auto it = split_assignment.find(d.demo_id);
        if (it == split_assignment.end()) {
            throw DataError("manifest has no split assignment for demo '" + d.demo_id + "'");
        }
        if (it->second == "train") {
            result.train.push_back(d);
        } else if (it->second == "val") {
            result.val.push_back(d);
        } else if (it->second == "test") {
            result.test.push_back(d);
        } else {
            throw DataError("unknown split '" + it->second + "' for demo '" + d.demo_id + "'");
        }
    }
    return result;
}

}  // namespace tjf
