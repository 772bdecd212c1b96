#include "tjf/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "tjf/errors.hpp"
#include "tjf/rng.hpp"

namespace tjf {

Scenario parse_scenario(const std::string& name) {
    if (name == "leader_follower") return Scenario::LeaderFollower;
    if (name == "circular_play") return Scenario::CircularPlay;
    if (name == "independent_drift") return Scenario::IndependentDrift;
    throw ParameterError("unknown scenario '" + name +
                         "' (expected leader_follower|circular_play|independent_drift)");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::LeaderFollower: return "leader_follower";
        case Scenario::CircularPlay: return "circular_play";
        case Scenario::IndependentDrift: return "independent_drift";
    }
    return "leader_follower";
}

double SyntheticOptions::effective_noise() const {
    if (noise >= 0.0) return noise;
    switch (scenario) {
        case Scenario::LeaderFollower: return 0.015;
        case Scenario::CircularPlay: return 0.01;
        case Scenario::IndependentDrift: return 0.004;
    }
    return 0.01;
}

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

/// Smooth random curve on [-1,1]: a few low-frequency sinusoids per axis.
struct SmoothCurve {
    struct Component {
        double amplitude, frequency, phase;
    };
    std::vector<Component> x, y;
    double cx = 0.0, cy = 0.0;

    static SmoothCurve make(Rng& rng, double span, std::int64_t frame_count) {
        SmoothCurve c;
        c.cx = rng.uniform(-0.25, 0.25);
        c.cy = rng.uniform(-0.25, 0.25);
        auto components = [&rng, span, frame_count]() {
            std::vector<Component> comps(2);
            double remaining = span;
            for (auto& comp : comps) {
                comp.amplitude = rng.uniform(0.35, 1.0) * remaining;
                remaining -= comp.amplitude * 0.5;
                // Periods between roughly 0.6x and 2.5x of the segment keep
                // the curve visibly turning inside the window.
                const double period = rng.uniform(0.6, 2.5) * static_cast<double>(frame_count);
                comp.frequency = 6.283185307179586 / period;
                comp.phase = rng.uniform(0.0, 6.283185307179586);
            }
            return comps;
        };
        c.x = components();
        c.y = components();
        return c;
    }

    AgentState at(double t) const {
        double px = cx, py = cy;
        for (const auto& comp : x) px += comp.amplitude * std::sin(comp.frequency * t + comp.phase);
        for (const auto& comp : y) py += comp.amplitude * std::sin(comp.frequency * t + comp.phase);
        return {clamp_unit(px), clamp_unit(py)};
    }
};

Demonstration make_demo(const std::string& id, std::int64_t frames, std::int64_t agents,
                        double hz, const std::vector<std::string>& roles) {
    Demonstration d;
    d.demo_id = id;
    d.sample_rate_hz = hz;
    d.agent_roles = roles;
    d.frames.assign(static_cast<std::size_t>(frames),
                    FrameSnapshot{std::vector<AgentState>(static_cast<std::size_t>(agents))});
    return d;
}

std::vector<std::string> default_roles(Scenario scenario, std::int64_t k) {
    std::vector<std::string> roles(static_cast<std::size_t>(k), "defense");
    const std::int64_t players = k - 1;
    for (std::int64_t i = 0; i < (players + 1) / 2; ++i) roles[static_cast<std::size_t>(i)] = "offense";
    roles.back() = "ball";
    (void)scenario;
    return roles;
}

SyntheticSet leader_follower(const SyntheticOptions& opt) {
    const std::int64_t k = opt.agent_count;
    const std::int64_t t_total = opt.frame_count;
    const double noise = opt.effective_noise();
    Rng structure_rng(opt.seed, 101);

    SyntheticSet set;
    set.agent_roles = default_roles(opt.scenario, k);
    set.follower_target.assign(static_cast<std::size_t>(k), -1);
    set.follower_gain.assign(static_cast<std::size_t>(k), 0.0);

    // Dataset-wide hidden dependency graph: every follower tracks one
    // designated earlier agent at a fixed court-frame offset, so the
    // formation geometry is shared by all demonstrations. The squad splits
    // into an on-ball unit hanging off the leader and, when there are enough
    // players, a weak-side unit: its anchor is designated to the leader far
    // across the court with so little pull that the unit drifts on its own,
    // and the remaining followers hold tight stations around that anchor.
    const std::int64_t followers = k - 2;
    const std::int64_t weak_side = std::max<std::int64_t>(0, (followers - 1) / 2);
    const std::int64_t on_ball = followers - weak_side;
    const std::int64_t anchor = on_ball + 1;  // first weak-side agent
    std::vector<AgentState> offsets(static_cast<std::size_t>(k));
    std::vector<double> momentum(static_cast<std::size_t>(k), 0.0);
    std::vector<double> sigma(static_cast<std::size_t>(k), 0.0);
    for (std::int64_t i = 1; i + 1 < k; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (i < anchor) {
            // On-ball unit: short chains rooted at the leader.
            std::int64_t target = 0;
            if (i > 1 && structure_rng.uniform() < 0.35) {
                const std::int64_t back = std::min<std::int64_t>(i - 1, 2);
                target = i - 1 - static_cast<std::int64_t>(structure_rng.uniform_index(
                                     static_cast<std::uint64_t>(back)));
            }
            set.follower_target[idx] = target;
            set.follower_gain[idx] = 0.28;
            momentum[idx] = 0.65;
            sigma[idx] = noise;
            const double angle = structure_rng.uniform(0.0, 6.283185307179586);
            const double radius = structure_rng.uniform(0.15, 0.35);
            offsets[idx] = {radius * std::cos(angle), radius * std::sin(angle)};
        } else if (i == anchor) {
            // Weak-side anchor: designated to the leader across the court,
            // pull faint, velocity memory long; it glides on its own in the
            // same slow band as the leader's curve.
            set.follower_target[idx] = 0;
            set.follower_gain[idx] = structure_rng.uniform(0.007, 0.009);
            momentum[idx] = 0.97;
            sigma[idx] = 0.35 * noise;
            offsets[idx] = {structure_rng.uniform(0.6, 0.75),
                            structure_rng.uniform(-0.15, 0.15)};
        } else {
            // Weak-side unit: tight stations around the anchor.
            set.follower_target[idx] = anchor;
            set.follower_gain[idx] = 0.28;
            momentum[idx] = 0.65;
            sigma[idx] = noise;
            const double angle = structure_rng.uniform(0.0, 6.283185307179586);
            const double radius = structure_rng.uniform(0.1, 0.25);
            offsets[idx] = {radius * std::cos(angle), radius * std::sin(angle)};
        }
    }

    for (std::int64_t d = 0; d < opt.demo_count; ++d) {
        Rng rng(opt.seed, 1000 + static_cast<std::uint64_t>(d));
        Demonstration demo = make_demo("lf" + std::to_string(d), t_total, k, opt.sample_rate_hz,
                                       set.agent_roles);
        // The leader glides on its own long-memory momentum walk, loosely
        // anchored to a per-demo home spot off to the -x side so the
        // weak-side unit fits on the court.
        const AgentState leader_home{rng.uniform(-0.55, -0.3), rng.uniform(-0.25, 0.25)};
        AgentState leader_vel{0.0, 0.0};

        std::vector<AgentState> pos(static_cast<std::size_t>(k));
        std::vector<AgentState> vel(static_cast<std::size_t>(k));
        pos[0] = {clamp_unit(leader_home.x + rng.normal(0.0, 0.08)),
                  clamp_unit(leader_home.y + rng.normal(0.0, 0.08))};
        for (std::int64_t i = 1; i + 1 < k; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto target = static_cast<std::size_t>(set.follower_target[idx]);
            // Followers start near their station with a little scatter.
            pos[idx] = {clamp_unit(pos[target].x + offsets[idx].x + rng.normal(0.0, 0.05)),
                        clamp_unit(pos[target].y + offsets[idx].y + rng.normal(0.0, 0.05))};
        }
        if (k > 1) pos[static_cast<std::size_t>(k - 1)] = pos[0];  // ball starts on the leader

        const double ball_gain = 0.55;
        for (std::int64_t t = 0; t < t_total; ++t) {
            leader_vel.x = 0.97 * leader_vel.x + 0.008 * (leader_home.x - pos[0].x) +
                           0.35 * noise * rng.normal();
            leader_vel.y = 0.97 * leader_vel.y + 0.008 * (leader_home.y - pos[0].y) +
                           0.35 * noise * rng.normal();
            pos[0].x = clamp_unit(pos[0].x + leader_vel.x);
            pos[0].y = clamp_unit(pos[0].y + leader_vel.y);
            for (std::int64_t i = 1; i + 1 < k; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                const auto target = static_cast<std::size_t>(set.follower_target[idx]);
                const double ex = pos[target].x + offsets[idx].x - pos[idx].x;
                const double ey = pos[target].y + offsets[idx].y - pos[idx].y;
                vel[idx].x = momentum[idx] * vel[idx].x + set.follower_gain[idx] * ex +
                             sigma[idx] * rng.normal();
                vel[idx].y = momentum[idx] * vel[idx].y + set.follower_gain[idx] * ey +
                             sigma[idx] * rng.normal();
                pos[idx].x = clamp_unit(pos[idx].x + vel[idx].x);
                pos[idx].y = clamp_unit(pos[idx].y + vel[idx].y);
            }
            if (k > 1) {
                // Ball shadows the leader with light smoothing and a touch of noise.
                const auto ball = static_cast<std::size_t>(k - 1);
                pos[ball].x = clamp_unit(pos[ball].x + ball_gain * (pos[0].x - pos[ball].x) +
                                         0.2 * noise * rng.normal());
                pos[ball].y = clamp_unit(pos[ball].y + ball_gain * (pos[0].y - pos[ball].y) +
                                         0.2 * noise * rng.normal());
            }
            for (std::int64_t i = 0; i < k; ++i) {
                demo.frames[static_cast<std::size_t>(t)].states[static_cast<std::size_t>(i)] =
                    pos[static_cast<std::size_t>(i)];
            }
        }
        set.demos.push_back(std::move(demo));
    }
    return set;
}

SyntheticSet circular_play(const SyntheticOptions& opt) {
    const std::int64_t k = opt.agent_count;
    const std::int64_t t_total = opt.frame_count;
    const double noise = opt.effective_noise();

    SyntheticSet set;
    set.agent_roles = default_roles(opt.scenario, k);

    for (std::int64_t d = 0; d < opt.demo_count; ++d) {
        Rng rng(opt.seed, 2000 + static_cast<std::uint64_t>(d));
        Demonstration demo = make_demo("cp" + std::to_string(d), t_total, k, opt.sample_rate_hz,
                                       set.agent_roles);
        const double omega = rng.uniform(0.04, 0.12) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        double cx = rng.uniform(-0.3, 0.3), cy = rng.uniform(-0.3, 0.3);
        const double drift_x = rng.uniform(-0.004, 0.004), drift_y = rng.uniform(-0.004, 0.004);
        std::vector<double> phase(static_cast<std::size_t>(k)), radius(static_cast<std::size_t>(k));
        for (std::int64_t i = 0; i < k; ++i) {
            phase[static_cast<std::size_t>(i)] =
                6.283185307179586 * static_cast<double>(i) / static_cast<double>(k);
            radius[static_cast<std::size_t>(i)] = rng.uniform(0.15, 0.5);
        }
        for (std::int64_t t = 0; t < t_total; ++t) {
            cx += drift_x;
            cy += drift_y;
            for (std::int64_t i = 0; i < k; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                const double theta = omega * static_cast<double>(t) + phase[idx];
                demo.frames[static_cast<std::size_t>(t)].states[idx] = {
                    clamp_unit(cx + radius[idx] * std::cos(theta) + noise * rng.normal()),
                    clamp_unit(cy + radius[idx] * std::sin(theta) + noise * rng.normal())};
            }
        }
        set.demos.push_back(std::move(demo));
    }
    return set;
}

SyntheticSet independent_drift(const SyntheticOptions& opt) {
    const std::int64_t k = opt.agent_count;
    const std::int64_t t_total = opt.frame_count;
    const double noise = opt.effective_noise();

    SyntheticSet set;
    set.agent_roles = default_roles(opt.scenario, k);

    for (std::int64_t d = 0; d < opt.demo_count; ++d) {
        Rng rng(opt.seed, 3000 + static_cast<std::uint64_t>(d));
        Demonstration demo = make_demo("id" + std::to_string(d), t_total, k, opt.sample_rate_hz,
                                       set.agent_roles);
        for (std::int64_t i = 0; i < k; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            AgentState p{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
            // Initial velocity scaled so a noiseless line stays inside the
            // box for the whole segment (no clamping on the zero-noise path).
            const double reach_x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.0, 1.0);
            const double reach_y = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.0, 1.0);
            AgentState v{reach_x * (1.0 - std::fabs(p.x)) * 0.9 / static_cast<double>(t_total),
                         reach_y * (1.0 - std::fabs(p.y)) * 0.9 / static_cast<double>(t_total)};
            for (std::int64_t t = 0; t < t_total; ++t) {
                demo.frames[static_cast<std::size_t>(t)].states[idx] = p;
                v.x = v.x + noise * 0.2 * rng.normal();
                v.y = v.y + noise * 0.2 * rng.normal();
                p.x = noise == 0.0 ? p.x + v.x : clamp_unit(p.x + v.x);
                p.y = noise == 0.0 ? p.y + v.y : clamp_unit(p.y + v.y);
            }
        }
        set.demos.push_back(std::move(demo));
    }
    return set;
}

}  // namespace

SyntheticSet generate_synthetic(const SyntheticOptions& options) {
    if (options.demo_count < 1) throw ParameterError("generate_synthetic: demo_count must be >= 1");
    if (options.agent_count < 1) throw ParameterError("generate_synthetic: agent_count must be >= 1");
    if (options.frame_count < 2) throw ParameterError("generate_synthetic: frame_count must be >= 2");
    if (options.sample_rate_hz <= 0.0) throw ParameterError("generate_synthetic: sample rate must be positive");

    switch (options.scenario) {
        case Scenario::LeaderFollower: return leader_follower(options);
        case Scenario::CircularPlay: return circular_play(options);
        case Scenario::IndependentDrift: return independent_drift(options);
    }
    throw ParameterError("generate_synthetic: unknown scenario");
}

}  // namespace tjf
