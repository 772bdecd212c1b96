#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tjf/data.hpp"

namespace tjf {

enum class Scenario { LeaderFollower, CircularPlay, IndependentDrift };

Scenario parse_scenario(const std::string& name);  // throws ParameterError on unknown names
std::string scenario_name(Scenario s);

struct SyntheticOptions {
    Scenario scenario = Scenario::LeaderFollower;
    std::int64_t demo_count = 200;
    std::int64_t agent_count = 11;  // K-1 players plus the ball (last agent)
    std::int64_t frame_count = 50;
    double sample_rate_hz = 5.0;
    std::uint64_t seed = 0;
    double noise = -1.0;  // < 0 selects the per-scenario default

    double effective_noise() const;
};

struct SyntheticSet {
    std::vector<Demonstration> demos;
    /// For leader_follower: target agent index each follower steers toward
    /// (-1 for the leader and the ball). Empty for other scenarios.
    std::vector<std::int64_t> follower_target;
    /// Tracking gain per agent (0 for the leader and the ball). Loose
    /// "spacing" followers have near-zero gains.
    std::vector<double> follower_gain;
    std::vector<std::string> agent_roles;
};

/// Coordinated-agent trajectory generator. Positions are produced directly
/// in [-1, 1]; identical options give byte-identical output.
///
/// leader_follower: agent 0 rides a smooth random curve, every other player
/// tracks a fixed offset from one designated earlier agent (momentum plus
/// tracking noise), and the last agent (ball) shadows the leader closely.
/// circular_play: agents orbit a drifting center with per-agent phase/radius.
/// independent_drift: per-agent smoothed random walks; with zero noise the
/// walks degenerate to exact constant-velocity lines.
SyntheticSet generate_synthetic(const SyntheticOptions& options);

}  // namespace tjf
