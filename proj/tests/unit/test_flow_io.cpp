#include <doctest.h>

#include <filesystem>

#include "lamina/errors.hpp"
#include "lamina/flow_io.hpp"
#include "support/problems.hpp"

using namespace lamina;
using namespace lamina::testing;

TEST_CASE("registration config round-trips") {
    RegistrationConfig c;
    c.kernel = KernelSpec{{{1.2, 1.0}, {0.4, 0.3}}};
    c.varifold.width = 0.7;
    c.varifold.normalize = true;
    c.hybrid_weight = 0.25;
    c.attachment_weight = 42.0;
    c.auto_scale_attachment = false;
    c.n_steps = 7;
    c.constraint = ConstraintForm::SignedNonsmooth;
    c.schedule.penalty_growth = 5.0;
    c.inner.max_iterations = 33;
    c.tol_constraint = 3e-4;
    const RegistrationConfig r = registration_config_from_json(to_json(c));
    CHECK(to_json(r) == to_json(c));
    CHECK(r.kernel.components.size() == 2);
    CHECK(r.constraint == ConstraintForm::SignedNonsmooth);
}

TEST_CASE("registration config parsing") {
    SUBCASE("shorthand kernel width") {
        const auto c = registration_config_from_json(Json{{"kernel_width", 0.9}, {"varifold_width", 0.5}});
        REQUIRE(c.kernel.components.size() == 1);
        CHECK(c.kernel.components[0].width == 0.9);
        CHECK(c.n_steps == 10);
    }
    SUBCASE("unknown key is named") {
        try {
            registration_config_from_json(Json{{"kernel_width", 1.0}, {"varifold_width", 1.0}, {"kernal", 2}});
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("kernal") != std::string::npos);
        }
    }
    SUBCASE("widths are required") {
        CHECK_THROWS_AS(registration_config_from_json(Json{{"varifold_width", 1.0}}), ConfigError);
        CHECK_THROWS_AS(registration_config_from_json(Json{{"kernel_width", 1.0}}), ConfigError);
    }
    SUBCASE("unknown constraint form") {
        CHECK_THROWS_AS(registration_config_from_json(
                            Json{{"kernel_width", 1.0}, {"varifold_width", 1.0}, {"constraint", "sqrt"}}),
                        ConfigError);
    }
}

TEST_CASE("checkpoint round-trips state, config and target") {
    Rng rng(4);
    const auto p = random_registration_problem(rng);
    const auto path = std::filesystem::temp_directory_path() / "lamina_test_checkpoint.json";
    save_checkpoint(path, Checkpoint{p.state, p.config, p.target});
    const Checkpoint c = load_checkpoint(path);
    CHECK(c.state.n_steps == p.state.n_steps);
    CHECK(c.state.faces == p.state.faces);
    CHECK(c.state.q == p.state.q);
    CHECK(c.state.alpha == p.state.alpha);
    CHECK(c.state.multipliers == p.state.multipliers);
    CHECK(c.state.penalty == p.state.penalty);
    CHECK(to_json(c.config) == to_json(p.config));
    REQUIRE(c.target.has_value());
    CHECK(c.target->vertices == p.target.vertices);
    CHECK(c.target->faces == p.target.faces);
}

TEST_CASE("malformed flow state") {
    Rng rng(5);
    const auto p = random_registration_problem(rng);
    Json j = to_json(p.state);
    j["q"].erase(j["q"].begin());
    CHECK_THROWS_AS(flow_state_from_json(j), ConfigError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/flow.json"), Error);
}
