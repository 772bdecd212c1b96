#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tjf/graph_attention.hpp"

namespace tjf {

/// One game segment: T frames of K agents. Frames all hold the same K.
struct Demonstration {
    std::string demo_id;
    std::vector<FrameSnapshot> frames;
    double sample_rate_hz = 0.0;
    std::vector<std::string> agent_roles;  // optional; empty or one label per agent

    std::int64_t frame_count() const { return static_cast<std::int64_t>(frames.size()); }
    std::int64_t agent_count() const {
        return frames.empty() ? 0 : frames.front().agent_count();
    }
    void validate() const;  // throws DataError on broken invariants
};

/// Affine map between raw per-axis coordinate ranges and [-1, 1].
struct NormalizationSpec {
    double min_x = -1.0, max_x = 1.0;
    double min_y = -1.0, max_y = 1.0;

    void validate() const;
    AgentState normalize(const AgentState& s) const;
    AgentState denormalize(const AgentState& s) const;
    bool is_identity() const;

    static NormalizationSpec basketball_court();  // feet, 94 x 50
    static NormalizationSpec soccer_pitch();      // meters, 105 x 68
    static NormalizationSpec identity();
};

// --- ingestion ---------------------------------------------------------------

struct IngestResult {
    std::vector<Demonstration> demos;
    std::size_t dropped_frames = 0;  // frames discarded for missing agents
};

/// Reads `demo_id,frame,agent_id,x,y` CSV rows (one per agent per frame).
/// Agent order is fixed by first appearance; frames missing any agent are
/// dropped and counted.
IngestResult ingest_csv(const std::filesystem::path& path, double sample_rate_hz = 0.0);

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<Demonstration>& demos);

// --- preprocessing -----------------------------------------------------------

/// Decimates to target_hz; the source rate must be an integer multiple.
Demonstration resample(const Demonstration& demo, double target_hz);

/// Sliding windows of `length` frames with stride length*(1-overlap); demos
/// shorter than `length` are dropped. Window ids are `<id>_w<index>`.
std::vector<Demonstration> window(const std::vector<Demonstration>& demos, std::int64_t length,
                                  double overlap_fraction);

Demonstration normalize(const Demonstration& demo, const NormalizationSpec& spec);
Demonstration denormalize(const Demonstration& demo, const NormalizationSpec& spec);

/// Keeps frames satisfying the predicate (hook for court-side filtering).
Demonstration filter_frames(const Demonstration& demo,
                            const std::function<bool(const FrameSnapshot&)>& keep);

// --- splitting ---------------------------------------------------------------

enum class Split { Train, Val, Test };
std::string split_name(Split s);

/// FNV-1a hash of the demo id; the split is a pure function of the id set.
std::uint64_t demo_id_hash(const std::string& id);

struct SplitResult {
    std::vector<Demonstration> train, val, test;
};

/// Orders demos by (hash, id) and cuts exact train/val/test fractions, so the
/// assignment is stable across runs and the counts are deterministic.
SplitResult split_by_hash(const std::vector<Demonstration>& demos, double train_fraction = 0.8,
                          double val_fraction = 0.1);

// --- manifest ----------------------------------------------------------------

struct DatasetManifest {
    std::string scenario;
    std::int64_t demo_count = 0;
    std::int64_t agent_count = 0;
    std::int64_t frame_count = 0;
    double sample_rate_hz = 0.0;
    std::uint64_t seed = 0;
    double noise = 0.0;
    bool normalized = true;
    NormalizationSpec norm;
    std::vector<std::string> agent_roles;
    std::map<std::string, std::string> split_assignment;  // demo_id -> train|val|test

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);

    SplitResult apply_split(const std::vector<Demonstration>& demos) const;
};

}  // namespace tjf
