#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcgen/common.hpp"
#include "bcgen/corpus.hpp"
#include "bcgen/synth.hpp"

using namespace bcgen;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SynthConfig tiny_synth(std::uint64_t seed = 5) {
    SynthConfig c;
    c.n_sessions = 4;
    c.session_s = 20.0;
    c.sessions_per_pair = 2;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("value iteration closed form on the chain") {
    // states 0 -> 1 -> 2(absorbing, r=1), gamma 0.9:
    // Q*(2,.) = 1/(1-0.9) = 10, Q*(1,advance) = 0.9*10 = 9,
    // Q*(0,advance) = 0.9*9 = 8.1
    const TabularMdp mdp = small_chain_mdp();
    const OracleQ oracle = value_iteration(mdp);
    CHECK(oracle.residual <= 1e-10);
    CHECK(oracle.q(2, 0) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(oracle.q(2, 1) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(oracle.q.row(1).maxCoeff() == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(oracle.q.row(0).maxCoeff() == doctest::Approx(8.1).epsilon(1e-9));

    // Bellman equation satisfied at every (s,a) by direct substitution
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < 2; ++a) {
            double rhs = mdp.reward(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                rhs += mdp.gamma * mdp.p[static_cast<std::size_t>(a)](s, s2) *
                       oracle.q.row(s2).maxCoeff();
            CHECK(oracle.q(s, a) == doctest::Approx(rhs).epsilon(1e-8));
        }
}

TEST_CASE("value iteration with gamma 0 returns immediate rewards") {
    TabularMdp mdp = small_chain_mdp();
    mdp.gamma = 0.0;
    const OracleQ oracle = value_iteration(mdp);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(oracle.q(s, a) == doctest::Approx(mdp.reward(s, a)));
}

TEST_CASE("greedy policy attains the exact optimal value") {
    const TabularMdp mdp = small_chain_mdp();
    const OracleQ oracle = value_iteration(mdp);
    Eigen::MatrixXd greedy = Eigen::MatrixXd::Zero(mdp.n_states, 2);
    for (int s = 0; s < mdp.n_states; ++s)
        greedy(s, oracle.q(s, 0) >= oracle.q(s, 1) ? 0 : 1) = 1.0;
    const Eigen::VectorXd v = exact_policy_value(mdp, greedy, mdp.gamma);
    for (int s = 0; s < mdp.n_states; ++s)
        CHECK(v[s] == doctest::Approx(oracle.q.row(s).maxCoeff()).epsilon(1e-9));
}

TEST_CASE("uniform policy on a symmetric MDP has equal state values") {
    // two states, symmetric dynamics and rewards
    TabularMdp mdp;
    mdp.n_states = 2;
    mdp.gamma = 0.9;
    mdp.p.assign(2, Eigen::MatrixXd(2, 2));
    mdp.p[0] << 0.5, 0.5, 0.5, 0.5;
    mdp.p[1] << 0.5, 0.5, 0.5, 0.5;
    mdp.reward.resize(2, 2);
    mdp.reward << 1.0, 2.0, 1.0, 2.0;
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
    const Eigen::VectorXd v = exact_policy_value(mdp, uniform, mdp.gamma);
    CHECK(v[0] == doctest::Approx(v[1]));
}

TEST_CASE("finite horizon value converges to the infinite value") {
    const TabularMdp mdp = regime_mdp();
    const OracleQ oracle = value_iteration(mdp);
    const Eigen::MatrixXd pol = soften_tabular_greedy(oracle.q, 0.9);
    const Eigen::VectorXd v_inf = exact_policy_value(mdp, pol, mdp.gamma);
    const Eigen::VectorXd v_h = finite_horizon_policy_value(mdp, pol, mdp.gamma, 5000);
    for (int s = 0; s < mdp.n_states; ++s)
        CHECK(v_h[s] == doctest::Approx(v_inf[s]).epsilon(1e-8));
}

TEST_CASE("regime MDP prefers laughing only after utterances") {
    const TabularMdp mdp = regime_mdp();
    const OracleQ oracle = value_iteration(mdp);
    // states: 0 speaking, 1 pausing, 2 post-utterance; action 1 = laugh
    CHECK(oracle.q(2, 1) > oracle.q(2, 0));
    CHECK(oracle.q(0, 0) > oracle.q(0, 1));
    CHECK(oracle.q(1, 0) > oracle.q(1, 1));
}

TEST_CASE("exhaustive batch enumerates all state-action pairs") {
    const TabularMdp mdp = small_chain_mdp();
    const TupleDataset batch = exhaustive_batch(mdp, 3);
    CHECK(batch.size() == static_cast<std::size_t>(mdp.n_states * 2 * 3));
    // one-hot states
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd s = batch.state(batch[i].s);
        CHECK(s.sum() == doctest::Approx(1.0));
        CHECK(s.maxCoeff() == doctest::Approx(1.0));
    }
}

TEST_CASE("simulated trajectories follow the behavior policy statistics") {
    const TabularMdp mdp = regime_mdp();
    const Eigen::MatrixXd behavior = Eigen::MatrixXd::Constant(3, 2, 0.5);
    const SimulatedBatch sim = simulate_trajectories(mdp, behavior, 200, 50, 3);
    CHECK(sim.trajectories.size() == 200);
    CHECK(sim.data.size() == 200 * 50);
    // action frequency near 0.5
    double ones = 0.0;
    for (std::size_t i = 0; i < sim.data.size(); ++i) ones += sim.data[i].a;
    CHECK(ones / static_cast<double>(sim.data.size()) ==
          doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("step_wis calibrates against the exact policy value") {
    const TabularMdp mdp = regime_mdp();
    const OracleQ oracle = value_iteration(mdp);
    const Eigen::MatrixXd target = soften_tabular_greedy(oracle.q, 0.9);
    const Eigen::MatrixXd behavior = soften_tabular_greedy(oracle.q, 0.7);

    const int horizon = 100;
    const SimulatedBatch sim =
        simulate_trajectories(mdp, behavior, 2000, horizon, 11);
    const double wis = step_wis(sim.data, sim.trajectories,
                                tabular_policy_spec(target, "target"),
                                tabular_policy_spec(behavior, "behavior"),
                                mdp.gamma);
    // compare against the like-for-like finite-horizon exact value,
    // averaged over the uniform start-state distribution of the simulator
    const Eigen::VectorXd v =
        finite_horizon_policy_value(mdp, target, mdp.gamma, horizon);
    const double exact = v.mean();
    CHECK(wis == doctest::Approx(exact).epsilon(0.10));
}

TEST_CASE("soften_tabular_greedy rows are stochastic") {
    const OracleQ oracle = value_iteration(regime_mdp());
    const Eigen::MatrixXd pol = soften_tabular_greedy(oracle.q, 0.9);
    for (int s = 0; s < pol.rows(); ++s) {
        CHECK(pol.row(s).sum() == doctest::Approx(1.0));
        CHECK(pol.row(s).minCoeff() == doctest::Approx(0.1));
    }
}

TEST_CASE("corpus generation is deterministic and ingestible") {
    namespace fs = std::filesystem;
    const fs::path dir1 = "/tmp/bcgen_test_corpus1";
    const fs::path dir2 = "/tmp/bcgen_test_corpus2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    const SynthConfig cfg = tiny_synth();
    generate_corpus(cfg, dir1.string());
    generate_corpus(cfg, dir2.string());

    // byte-identical across runs with the same seed
    for (const auto& entry : fs::recursive_directory_iterator(dir1)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), dir1);
        CHECK(slurp(entry.path()) == slurp(dir2 / rel));
    }

    // a different seed changes the corpus
    const fs::path dir3 = "/tmp/bcgen_test_corpus3";
    fs::remove_all(dir3);
    generate_corpus(tiny_synth(6), dir3.string());
    CHECK(slurp(dir1 / "session0" / "annotations.jsonl") !=
          slurp(dir3 / "session0" / "annotations.jsonl"));

    // round-trips through the real ingestion path
    const CorpusBuildResult built =
        build_dataset_from_corpus(dir1.string(), dir1.string(), true);
    // 20 s at 40 Hz -> 760 states -> 759 tuples, x4 sessions x2 roles
    CHECK(built.data.size() == 8 * 759);
    CHECK(built.data.sessions().size() == 8);

    // state frame arithmetic: session_s * 40 - 40 states per channel
    const CorpusManifest manifest = read_corpus_manifest(dir1.string());
    CHECK(manifest.sessions.size() == 4);

    // the in-memory builder agrees with the file round-trip
    const TupleDataset direct = build_synthetic_dataset(cfg, true);
    REQUIRE(direct.size() == built.data.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(direct[i].a == built.data[i].a);
        CHECK(direct[i].r == doctest::Approx(built.data[i].r).epsilon(1e-6));
    }
    // states match to CSV precision
    for (std::size_t i = 0; i < 100; ++i) {
        const Eigen::VectorXd a = direct.state(direct[i].s);
        const Eigen::VectorXd b = built.data.state(built.data[i].s);
        for (int d = 0; d < direct.state_dim(); ++d)
            CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-6));
    }

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}

TEST_CASE("synth config validation") {
    SynthConfig c = tiny_synth();
    c.laugh_rate_post = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = tiny_synth();
    c.dwell_speaking_s = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_NOTHROW(tiny_synth().validate());
}
