#include <doctest.h>

#include <cmath>

#include "cartoonlab/rng.hpp"
#include "cartoonlab/sampler.hpp"

using namespace cartoonlab;

namespace {

LabeledMixture two_class() {
    LabeledMixture m;
    m.dimension = 2;
    m.class_priors = {0.5, 0.5};
    m.classes = {{0, {{1.0, {3.0, 0.0}, {0.25, 0.25}}}},
                 {1, {{1.0, {-3.0, 0.0}, {0.25, 0.25}}}}};
    m.validate();
    return m;
}

LabeledMixture delta_at(Latent mu) {
    LabeledMixture m;
    m.dimension = static_cast<int>(mu.size());
    m.class_priors = {1.0};
    m.classes = {{0, {{1.0, std::move(mu), Latent(m.dimension, 1e-12)}}}};
    m.validate();
    return m;
}

// Independently coded plain CFG + DDIM loop: no disturbance machinery, no
// run_chain. Kept as the reference the sampler is diffed against.
Latent plain_reference_loop(const Denoiser& den, const NoiseSchedule& sched, const DdimGrid& grid,
                            const Condition& p, double gamma, std::uint64_t seed) {
    NormalSampler rng(seed);
    Latent x = rng.vector(static_cast<std::size_t>(den.dimension()));
    for (std::size_t i = 0; i + 1 < grid.timesteps.size(); ++i) {
        int t = grid.timesteps[i];
        int t_prev = grid.timesteps[i + 1];
        Latent text = den.epsilon(x, p, t);
        Latent null = den.epsilon(x, Condition::null_text(), t);
        Latent eps(x.size());
        double w = 1.0 - gamma;
        for (std::size_t k = 0; k < x.size(); ++k) eps[k] = w * null[k] + gamma * text[k];
        double ab_t = sched.alpha_bar(t);
        double ab_prev = sched.alpha_bar(t_prev);
        double sa_t = std::sqrt(ab_t), sb_t = std::sqrt(1.0 - ab_t);
        double sa_p = std::sqrt(ab_prev), sb_p = std::sqrt(1.0 - ab_prev);
        for (std::size_t k = 0; k < x.size(); ++k) {
            double pred_x0 = (x[k] - sb_t * eps[k]) / sa_t;
            x[k] = sa_p * pred_x0 + sb_p * eps[k];
        }
    }
    return x;
}

}  // namespace

TEST_CASE("ddim_step hand case") {
    NoiseSchedule s;
    s.T = 2;
    s.betas = {0.36, 0.609375};
    s.alpha_bars = {1.0, 0.64, 0.25};
    Latent out = ddim_step({2.0}, {0.5}, 2, 1, s);
    // pred_x0 = (2 - sqrt(0.75)*0.5)/0.5 = 3.1339746; 0.8*pred + 0.6*0.5
    CHECK(out[0] == doctest::Approx(2.80717967697245).epsilon(1e-12));
}

TEST_CASE("ddim_step: equal abar and zero eps is the identity") {
    NoiseSchedule s;
    s.T = 2;
    s.betas = {0.5, 0.0};
    s.alpha_bars = {1.0, 0.5, 0.5};
    Latent out = ddim_step({1.7, -0.3}, {0.0, 0.0}, 2, 1, s);
    CHECK(out[0] == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("ddim_step preserves the (x0, eps) decomposition") {
    auto s = make_linear_schedule(1000, 1e-4, 0.02);
    NormalSampler rng(8);
    Latent x0 = rng.vector(3), eps = rng.vector(3);
    for (auto [t, t_prev] : {std::pair{900, 500}, {500, 100}, {100, 0}}) {
        Latent x_t = forward_noise(s, x0, t, eps);
        Latent stepped = ddim_step(x_t, eps, t, t_prev, s);
        Latent want = forward_noise(s, x0, t_prev, eps);
        CHECK(distance(stepped, want) < 1e-9);
    }
}

TEST_CASE("ddim_step error paths") {
    auto s = make_linear_schedule(1000, 1e-4, 0.02);
    CHECK_THROWS_AS(ddim_step({1.0}, {0.0}, 100, 100, s), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step({1.0}, {0.0}, 100, 200, s), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step({1.0}, {0.0, 0.0}, 200, 100, s), std::invalid_argument);
}

TEST_CASE("trajectory bookkeeping") {
    Trajectory traj;
    traj.record(990, {1.0});
    CHECK_THROWS_AS(traj.record(990, {2.0}), std::logic_error);
    CHECK_THROWS_AS(traj.at(980), std::logic_error);
    CHECK(traj.at(990)[0] == 1.0);
}

TEST_CASE("sample_free with no disturbance bit-matches the independent reference loop") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        auto res = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                               DisturbanceStrategy::none(), seed);
        Latent ref = plain_reference_loop(den, sched, grid, Condition::prompt(0), 7.5, seed);
        CHECK(res.final_sample[0] == ref[0]);
        CHECK(res.final_sample[1] == ref[1]);
        for (const auto& row : res.record.rows) {
            CHECK(row.sigma_source == SigmaSource::SameAsText);
            CHECK(row.deviation_norm == 0.0);
        }
    }
}

TEST_CASE("BackD trajectory prefix above s bit-matches the baseline run") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    std::uint64_t seed = 1234;
    auto disturbed = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                                 DisturbanceStrategy::back_d(300, 300), seed);
    auto baseline = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                                DisturbanceStrategy::none(), seed);
    for (const auto& [t, x] : disturbed.trajectory.entries()) {
        if (t < 300) continue;  // first active step is t = 300, it writes t = 290
        const Latent& bx = baseline.trajectory.at(t);
        CHECK(x[0] == bx[0]);
        CHECK(x[1] == bx[1]);
    }
    // below the window the paths must differ
    CHECK(distance(disturbed.final_sample, baseline.final_sample) > 0.0);
    CHECK(distance(disturbed.final_sample, disturbed.record.baseline_final) ==
          doctest::Approx(distance(disturbed.final_sample, baseline.final_sample)));
}

TEST_CASE("activation boundary: one stride of s flips exactly one sigma_source") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    std::uint64_t seed = 7;
    auto a = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                         DisturbanceStrategy::back_d(300, 300), seed);
    auto b = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                         DisturbanceStrategy::back_d(300, 310), seed);
    int flips = 0;
    REQUIRE(a.record.rows.size() == b.record.rows.size());
    for (std::size_t i = 0; i < a.record.rows.size(); ++i)
        if (a.record.rows[i].sigma_source != b.record.rows[i].sigma_source) ++flips;
    CHECK(flips == 1);
}

TEST_CASE("prose activation rule shifts the window by one stride") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    SamplerOptions prose;
    prose.activation = ActivationRule::BelowS;
    auto strict = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                              DisturbanceStrategy::back_d(300, 300), 7, prose);
    auto incl = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                            DisturbanceStrategy::back_d(300, 300), 7);
    int active_strict = 0, active_incl = 0;
    for (const auto& r : strict.record.rows)
        if (r.sigma_source != SigmaSource::SameAsText) ++active_strict;
    for (const auto& r : incl.record.rows)
        if (r.sigma_source != SigmaSource::SameAsText) ++active_incl;
    CHECK(active_incl == active_strict + 1);
}

TEST_CASE("record identity: deviation = |1-gamma| * null branch gap on every row") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    for (double gamma : {1.0, 3.0, 7.5}) {
        auto res = sample_free(den, sched, grid, Condition::prompt(1), gamma,
                               DisturbanceStrategy::back_d(200, 300), 21);
        for (const auto& row : res.record.rows)
            CHECK(std::abs(row.deviation_norm -
                           std::abs(1.0 - gamma) * row.null_branch_gap) < 1e-9);
    }
}

TEST_CASE("sample_free rejects ImageD and misaligned windows") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    CHECK_THROWS_AS(sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                                DisturbanceStrategy::image_d({1.0, 1.0}, 300), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                                DisturbanceStrategy::back_d(305, 300), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                                DisturbanceStrategy::back_d(300, 305), 1),
                    std::invalid_argument);
}

TEST_CASE("delta data converges to the mode and matches a fine-grid oracle") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    Latent mu{2.0, -1.0};
    GmmDenoiser den(delta_at(mu), sched);
    auto coarse = sample_free(den, sched, make_grid(sched, 100), Condition::prompt(0), 1.0,
                              DisturbanceStrategy::none(), 5);
    auto fine = sample_free(den, sched, make_grid(sched, 1000), Condition::prompt(0), 1.0,
                            DisturbanceStrategy::none(), 5);
    CHECK(distance(coarse.final_sample, mu) < 1e-2);
    CHECK(distance(fine.final_sample, mu) < 1e-2);
    CHECK(distance(coarse.final_sample, fine.final_sample) < 1e-2);
}

TEST_CASE("cartoonize executes k = s*N/T steps") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    Latent x_ref{3.0, 0.0};
    auto res = cartoonize(den, sched, grid, Condition::prompt(0), 7.5,
                          DisturbanceStrategy::image_d({}, 300), x_ref, 3);
    CHECK(res.record.rows.size() == 30);
    for (const auto& row : res.record.rows)
        CHECK(row.sigma_source == SigmaSource::CleanReference);
}

TEST_CASE("cartoonize with ImageD at gamma = 1 bit-matches plain img2img") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    Latent x_ref{2.5, 0.5};
    for (std::uint64_t seed : {1ULL, 17ULL, 333ULL}) {
        auto imaged = cartoonize(den, sched, grid, Condition::prompt(0), 1.0,
                                 DisturbanceStrategy::image_d({}, 300), x_ref, seed);
        auto plain = img2img_baseline(den, sched, grid, Condition::prompt(0), 1.0, 300, x_ref,
                                      seed);
        CHECK(imaged.final_sample[0] == plain.final_sample[0]);
        CHECK(imaged.final_sample[1] == plain.final_sample[1]);
    }
}

TEST_CASE("cartoonize BackD uses the cached initial eps for the rollback source") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    Latent x_ref{3.0, 0.0};
    std::uint64_t seed = 11;
    auto res = cartoonize(den, sched, grid, Condition::prompt(0), 7.5,
                          DisturbanceStrategy::back_d(200, 300), x_ref, seed);
    CHECK(res.record.rows.size() == 30);
    for (const auto& row : res.record.rows)
        CHECK(row.sigma_source == SigmaSource::ForwardNoised);

    // replay the first step by hand: x_sigma = forward_noise(x_ref, s + b, eps)
    NormalSampler rng(seed);
    Latent eps = rng.vector(2);
    Latent x_s = forward_noise(sched, x_ref, 300, eps);
    Latent x_sigma = forward_noise(sched, x_ref, 500, eps);
    Latent text = den.epsilon(x_s, Condition::prompt(0), 300);
    Latent null = den.epsilon(x_sigma, Condition::null_text(), 300);
    Latent combined = cfg_combine(text, null, 7.5);
    Latent x_next = ddim_step(x_s, combined, 300, 290, sched);
    CHECK(res.trajectory.at(290) == x_next);
}

TEST_CASE("cartoonize rejects strategy none and bad references") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    CHECK_THROWS_AS(cartoonize(den, sched, grid, Condition::prompt(0), 7.5,
                               DisturbanceStrategy::none(), {3.0, 0.0}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(cartoonize(den, sched, grid, Condition::prompt(0), 7.5,
                               DisturbanceStrategy::image_d({}, 300), {3.0}, 1),
                    std::invalid_argument);
}

TEST_CASE("img2img baseline accepts s = 0 and returns x_ref untouched") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    Latent x_ref{2.5, 0.5};
    auto res = img2img_baseline(den, sched, grid, Condition::prompt(0), 7.5, 0, x_ref, 42);
    CHECK(res.final_sample == x_ref);
    CHECK(res.record.rows.empty());
}

TEST_CASE("determinism: identical config and seed give identical results") {
    auto sched = make_linear_schedule(1000, 1e-4, 0.02);
    auto grid = make_grid(sched, 100);
    GmmDenoiser den(two_class(), sched);
    auto a = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                         DisturbanceStrategy::back_d(300, 300), 77);
    auto b = sample_free(den, sched, grid, Condition::prompt(0), 7.5,
                         DisturbanceStrategy::back_d(300, 300), 77);
    CHECK(a.final_sample == b.final_sample);
    REQUIRE(a.record.rows.size() == b.record.rows.size());
    for (std::size_t i = 0; i < a.record.rows.size(); ++i) {
        CHECK(a.record.rows[i].deviation_norm == b.record.rows[i].deviation_norm);
        CHECK(a.record.rows[i].null_branch_gap == b.record.rows[i].null_branch_gap);
    }
}
