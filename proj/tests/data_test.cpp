#include <cmath>

#include "doctest.h"
#include "support/test_util.hpp"
#include "tjf/data.hpp"
#include "tjf/model.hpp"
#include "tjf/synthetic.hpp"

using namespace tjf;
using namespace tjf::testing;

TEST_CASE("ingest: happy path groups agents and sorts frames") {
    TempDir tmp("ingest");
    const auto csv = tmp.path() / "data.csv";
    write_file(csv,
               "demo_id,frame,agent_id,x,y\n"
               "g1,1,a,0.3,0.4\n"
               "g1,0,a,0.1,0.2\n"
               "g1,0,b,-0.1,-0.2\n"
               "g1,1,b,-0.3,-0.4\n"
               "g1,2,a,0.5,0.6\n"
               "g1,2,b,-0.5,-0.6\n");
    const IngestResult r = ingest_csv(csv, 5.0);
    CHECK(r.dropped_frames == 0);
    REQUIRE(r.demos.size() == 1);
    const Demonstration& d = r.demos[0];
    CHECK(d.frame_count() == 3);
    CHECK(d.agent_count() == 2);
    // Frames sorted; agent order by first appearance (a before b).
    CHECK(d.frames[0].states[0].x == 0.1);
    CHECK(d.frames[1].states[1].y == -0.4);
    CHECK(d.frames[2].states[0].y == 0.6);
}

TEST_CASE("ingest: frames missing an agent are dropped and counted") {
    TempDir tmp("ingest_drop");
    const auto csv = tmp.path() / "data.csv";
    write_file(csv,
               "demo_id,frame,agent_id,x,y\n"
               "g1,0,a,0,0\n"
               "g1,0,b,1,1\n"
               "g1,1,a,0,0\n"  // b missing at frame 1
               "g1,2,a,0,0\n"
               "g1,2,b,1,1\n");
    const IngestResult r = ingest_csv(csv);
    CHECK(r.dropped_frames == 1);
    REQUIRE(r.demos.size() == 1);
    CHECK(r.demos[0].frame_count() == 2);
}

TEST_CASE("ingest: empty file yields an empty list without errors") {
    TempDir tmp("ingest_empty");
    const auto csv = tmp.path() / "data.csv";
    write_file(csv, "");
    CHECK(ingest_csv(csv).demos.empty());
    write_file(csv, "demo_id,frame,agent_id,x,y\n");
    CHECK(ingest_csv(csv).demos.empty());
}

TEST_CASE("ingest: malformed rows carry the line number") {
    TempDir tmp("ingest_bad");
    const auto csv = tmp.path() / "data.csv";
    write_file(csv,
               "demo_id,frame,agent_id,x,y\n"
               "g1,0,a,0,0\n"
               "g1,zero,a,0\n");
    CHECK_THROWS_WITH_AS(ingest_csv(csv), doctest::Contains("line 3"), ParseError);
    CHECK_THROWS_AS(ingest_csv(tmp.path() / "absent.csv"), IoError);
}

TEST_CASE("resample: decimation arithmetic") {
    Rng rng(1);
    Demonstration d;
    d.demo_id = "r";
    d.sample_rate_hz = 25.0;
    d.frames = random_frames(50, 2, rng);
    const Demonstration out = resample(d, 5.0);
    CHECK(out.frame_count() == 10);
    CHECK(out.sample_rate_hz == 5.0);
    for (std::int64_t i = 0; i < 10; ++i) {
        CHECK(out.frames[static_cast<std::size_t>(i)].states[0].x ==
              d.frames[static_cast<std::size_t>(5 * i)].states[0].x);
    }

    // Factor 1 is the identity.
    const Demonstration same = resample(d, 25.0);
    CHECK(same.frame_count() == 50);

    // Short input keeps only index 0.
    Demonstration three;
    three.demo_id = "t";
    three.sample_rate_hz = 25.0;
    three.frames = random_frames(3, 2, rng);
    CHECK(resample(three, 5.0).frame_count() == 1);

    CHECK_THROWS_AS(resample(d, 10.0), ParameterError);  // 2.5x is not integer
}

TEST_CASE("window: stride arithmetic and exact fits") {
    Rng rng(2);
    auto make = [&rng](std::int64_t t) {
        Demonstration d;
        d.demo_id = "w";
        d.sample_rate_hz = 5.0;
        d.frames = random_frames(t, 2, rng);
        return d;
    };

    const auto w100 = window({make(100)}, 50, 0.5);
    REQUIRE(w100.size() == 3);  // offsets 0, 25, 50
    CHECK(w100[0].demo_id == "w_w0");
    CHECK(w100[2].demo_id == "w_w2");

    CHECK(window({make(50)}, 50, 0.5).size() == 1);
    CHECK(window({make(49)}, 50, 0.5).empty());
    CHECK_THROWS_AS(window({make(10)}, 1, 0.5), ParameterError);
    CHECK_THROWS_AS(window({make(10)}, 5, 1.0), ParameterError);
}

TEST_CASE("window: every window is a contiguous slice of its source") {
    Rng rng(3);
    Demonstration d;
    d.demo_id = "s";
    d.sample_rate_hz = 5.0;
    d.frames = random_frames(37, 3, rng);
    const auto windows = window({d}, 10, 0.3);  // stride 7
    CHECK(!windows.empty());
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const std::size_t offset = wi * 7;
        for (std::size_t t = 0; t < 10; ++t) {
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(windows[wi].frames[t].states[a].x == d.frames[offset + t].states[a].x);
                CHECK(windows[wi].frames[t].states[a].y == d.frames[offset + t].states[a].y);
            }
        }
    }
}

TEST_CASE("normalize: endpoints, midpoint, round trip, ordering") {
    const NormalizationSpec court = NormalizationSpec::basketball_court();
    CHECK(court.normalize({0.0, 0.0}).x == -1.0);
    CHECK(court.normalize({94.0, 50.0}).x == 1.0);
    CHECK(court.normalize({47.0, 25.0}).x == 0.0);
    CHECK(court.normalize({47.0, 25.0}).y == 0.0);

    Rng rng(4);
    Demonstration d;
    d.demo_id = "n";
    d.sample_rate_hz = 5.0;
    d.frames.resize(6);
    for (auto& f : d.frames) {
        f.states.resize(2);
        for (auto& s : f.states) s = {rng.uniform(0.0, 94.0), rng.uniform(0.0, 50.0)};
    }
    const Demonstration round_trip = denormalize(normalize(d, court), court);
    for (std::size_t t = 0; t < d.frames.size(); ++t) {
        for (std::size_t a = 0; a < 2; ++a) {
            CHECK(std::fabs(round_trip.frames[t].states[a].x - d.frames[t].states[a].x) < 1e-9);
            CHECK(std::fabs(round_trip.frames[t].states[a].y - d.frames[t].states[a].y) < 1e-9);
        }
    }

    //  Strictly increasing inputs stay strictly increasing.
    for (int trial = 0; trial < 50; ++trial) {
        const double x1 = rng.uniform(0.0, 94.0);
        const double x2 = rng.uniform(0.0, 94.0);
        if (x1 < x2) {
            CHECK(court.normalize({x1, 0}).x < court.normalize({x2, 0}).x);
        }
    }

    NormalizationSpec degenerate{3.0, 3.0, 0.0, 1.0};
    CHECK_THROWS_AS(degenerate.validate(), ParameterError);
}

TEST_CASE("split_by_hash: stable, exact counts, id-keyed") {
    SyntheticOptions opt;
    opt.scenario = Scenario::IndependentDrift;
    opt.demo_count = 250;
    opt.agent_count = 2;
    opt.frame_count = 4;
    opt.seed = 5;
    const SyntheticSet set = generate_synthetic(opt);
    const SplitResult a = split_by_hash(set.demos);
    CHECK(a.train.size() == 200);
    CHECK(a.val.size() == 25);
    CHECK(a.test.size() == 25);

    // Shuffling the input changes nothing: assignment depends on ids only.
    std::vector<Demonstration> shuffled = set.demos;
    Rng rng(6);
    rng.shuffle(shuffled);
    const SplitResult b = split_by_hash(shuffled);
    auto ids = [](const std::vector<Demonstration>& v) {
        std::vector<std::string> out;
        for (const auto& d : v) out.push_back(d.demo_id);
        return out;
    };
    CHECK(ids(a.test) == ids(b.test));
    CHECK(ids(a.val) == ids(b.val));
}

TEST_CASE("synthetic: determinism and schema") {
    SyntheticOptions opt;
    opt.scenario = Scenario::LeaderFollower;
    opt.demo_count = 3;
    opt.agent_count = 5;
    opt.frame_count = 12;
    opt.seed = 7;
    const SyntheticSet a = generate_synthetic(opt);
    const SyntheticSet b = generate_synthetic(opt);
    REQUIRE(a.demos.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        a.demos[i].validate();
        CHECK(a.demos[i].agent_count() == 5);
        CHECK(a.demos[i].frame_count() == 12);
        for (std::size_t t = 0; t < a.demos[i].frames.size(); ++t) {
            for (std::size_t ag = 0; ag < 5; ++ag) {
                const auto& sa = a.demos[i].frames[t].states[ag];
                const auto& sb = b.demos[i].frames[t].states[ag];
                CHECK(sa.x == sb.x);
                CHECK(sa.y == sb.y);
                CHECK(std::fabs(sa.x) <= 1.0);
                CHECK(std::fabs(sa.y) <= 1.0);
            }
        }
    }
    CHECK(a.agent_roles.size() == 5);
    CHECK(a.agent_roles.back() == "ball");

    CHECK_THROWS_AS(parse_scenario("nope"), ParameterError);
}

TEST_CASE("synthetic: zero-noise drift is exactly constant velocity") {
    SyntheticOptions opt;
    opt.scenario = Scenario::IndependentDrift;
    opt.demo_count = 5;
    opt.agent_count = 3;
    opt.frame_count = 30;
    opt.seed = 9;
    opt.noise = 0.0;
    const SyntheticSet set = generate_synthetic(opt);
    for (const auto& demo : set.demos) {
        PredictionTask task;
        task.observed.assign(demo.frames.begin(), demo.frames.begin() + 10);
        task.horizon = 20;
        const auto pred = velocity_baseline(task);
        for (std::int64_t i = 0; i < 20; ++i) {
            const auto& truth = demo.frames[static_cast<std::size_t>(10 + i)];
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(std::fabs(pred[static_cast<std::size_t>(i)].states[a].x -
                                truth.states[a].x) < 1e-9);
                CHECK(std::fabs(pred[static_cast<std::size_t>(i)].states[a].y -
                                truth.states[a].y) < 1e-9);
            }
        }
    }
}

TEST_CASE("synthetic: followers track their designated target most strongly") {
    SyntheticOptions opt;
    opt.scenario = Scenario::LeaderFollower;
    opt.demo_count = 8;
    opt.agent_count = 5;
    opt.frame_count = 60;
    opt.seed = 20240803;
    const SyntheticSet set = generate_synthetic(opt);
    REQUIRE(set.follower_target.size() == 5);

    // Pearson correlation of displacement series, pooled over demos and axes.
    const std::int64_t k = opt.agent_count;
    auto displacement = [&](const Demonstration& d, std::int64_t agent) {
        std::vector<double> out;
        for (std::size_t t = 1; t < d.frames.size(); ++t) {
            out.push_back(d.frames[t].states[static_cast<std::size_t>(agent)].x -
                          d.frames[t - 1].states[static_cast<std::size_t>(agent)].x);
            out.push_back(d.frames[t].states[static_cast<std::size_t>(agent)].y -
                          d.frames[t - 1].states[static_cast<std::size_t>(agent)].y);
        }
        return out;
    };
    auto pearson = [](const std::vector<double>& u, const std::vector<double>& v) {
        const auto n = static_cast<double>(u.size());
        double mu = 0, mv = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            mu += u[i];
            mv += v[i];
        }
        mu /= n;
        mv /= n;
        double suv = 0, suu = 0, svv = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            suv += (u[i] - mu) * (v[i] - mv);
            suu += (u[i] - mu) * (u[i] - mu);
            svv += (v[i] - mv) * (v[i] - mv);
        }
        return suv / std::sqrt(suu * svv);
    };

    for (std::int64_t follower = 1; follower + 1 < k; ++follower) {
        // Loose spacing followers barely steer; the dependency is only
        // measurable for the tight ones.
        if (set.follower_gain[static_cast<std::size_t>(follower)] < 0.1) continue;
        const std::int64_t target = set.follower_target[static_cast<std::size_t>(follower)];
        REQUIRE(target >= 0);
        double best_other = -2.0;
        double with_target = -2.0;
        for (std::int64_t other = 0; other < k; ++other) {
            if (other == follower) continue;
            std::vector<double> u, v;
            for (const auto& demo : set.demos) {
                const auto du = displacement(demo, follower);
                const auto dv = displacement(demo, other);
                u.insert(u.end(), du.begin(), du.end());
                v.insert(v.end(), dv.begin(), dv.end());
            }
            const double r = pearson(u, v);
            if (other == target) {
                with_target = r;
            } else {
                best_other = std::max(best_other, r);
            }
        }
        CHECK(with_target > best_other);
    }
}

TEST_CASE("manifest: round trip including split assignment and roles") {
    TempDir tmp("manifest");
    DatasetManifest m;
    m.scenario = "leader_follower";
    m.demo_count = 3;
    m.agent_count = 4;
    m.frame_count = 50;
    m.sample_rate_hz = 5.0;
    m.seed = 99;
    m.noise = 0.015;
    m.normalized = true;
    m.norm = NormalizationSpec::basketball_court();
    m.agent_roles = {"offense", "offense", "defense", "ball"};
    m.split_assignment = {{"lf0", "train"}, {"lf1", "val"}, {"lf2", "test"}};
    const auto path = tmp.path() / "manifest.txt";
    m.save(path);

    const DatasetManifest r = DatasetManifest::load(path);
    CHECK(r.scenario == "leader_follower");
    CHECK(r.agent_count == 4);
    CHECK(r.norm.max_x == 94.0);
    CHECK(r.agent_roles == m.agent_roles);
    CHECK(r.split_assignment.at("lf1") == "val");

    SyntheticOptions opt;
    opt.scenario = Scenario::LeaderFollower;
    opt.demo_count = 3;
    opt.agent_count = 4;
    opt.frame_count = 50;
    opt.seed = 99;
    const SyntheticSet set = generate_synthetic(opt);
    const SplitResult split = r.apply_split(set.demos);
    CHECK(split.train.size() == 1);
    CHECK(split.val.size() == 1);
    CHECK(split.test.size() == 1);
}

TEST_CASE("demonstration validation catches inconsistent agent counts") {
    Rng rng(10);
    Demonstration d;
    d.demo_id = "bad";
    d.sample_rate_hz = 5.0;
    d.frames = random_frames(3, 2, rng);
    d.frames[1].states.push_back({0, 0});
    CHECK_THROWS_AS(d.validate(), DataError);
}

TEST_CASE("filter_frames applies the court-side hook") {
    Rng rng(11);
    Demonstration d;
    d.demo_id = "half";
    d.sample_rate_hz = 5.0;
    d.frames = random_frames(20, 2, rng);
    const Demonstration kept = filter_frames(d, [](const FrameSnapshot& f) {
        return f.states[0].x >= 0.0;  // keep one half only
    });
    for (const auto& f : kept.frames) CHECK(f.states[0].x >= 0.0);
    CHECK(kept.frame_count() <= d.frame_count());
}

TEST_CASE("trajectory CSV round trip preserves values") {
    TempDir tmp("csv_rt");
    SyntheticOptions opt;
    opt.scenario = Scenario::CircularPlay;
    opt.demo_count = 2;
    opt.agent_count = 3;
    opt.frame_count = 6;
    opt.seed = 12;
    const SyntheticSet set = generate_synthetic(opt);
    const auto path = tmp.path() / "t.csv";
    write_trajectory_csv(path, set.demos);
    const IngestResult r = ingest_csv(path, 5.0);
    REQUIRE(r.demos.size() == set.demos.size());
    for (std::size_t i = 0; i < r.demos.size(); ++i) {
        for (std::size_t t = 0; t < r.demos[i].frames.size(); ++t) {
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(r.demos[i].frames[t].states[a].x == set.demos[i].frames[t].states[a].x);
                CHECK(r.demos[i].frames[t].states[a].y == set.demos[i].frames[t].states[a].y);
            }
        }
    }
}
